use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, Completion, LmError, PromptRequest, Wire};

fn default_key_env() -> String {
    "LESSONS_API_KEY".to_string()
}

fn default_timeout() -> u64 {
    60
}

/// Chat-completions endpoint settings, read from a TOML file. The token itself
/// only ever comes from the named environment variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl RemoteConfig {
    pub fn from_toml(text: &str) -> Result<Self, LmError> {
        let cfg: RemoteConfig = toml::from_str(text).map_err(|e| LmError::Config(e.to_string()))?;
        if cfg.endpoint.trim().is_empty() || cfg.model.trim().is_empty() {
            return Err(LmError::Config("endpoint and model are required".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, LmError> {
        let token = std::env::var(&config.api_key_env).ok().filter(|t| !t.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LmError::Config(e.to_string()))?;
        Ok(RemoteBackend { config, token, client })
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn measures_latency(&self) -> bool {
        true
    }

    fn complete(&self, _request: &PromptRequest, prompt: &str) -> Result<Completion, LmError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let body_text = body.to_string();
        let mut call = self
            .client
            .post(&self.config.endpoint)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body_text.clone());
        if let Some(token) = &self.token {
            call = call.bearer_auth(token);
        }
        let response = call.send().map_err(|e| LmError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| LmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LmError::Transport(format!("HTTP {status}: {text}")));
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LmError::Transport(format!("invalid JSON body: {e}")))?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .ok_or_else(|| LmError::Transport("response has no choices[0].message.content".into()))?;
        Ok(Completion { text: content.to_string(), wire: Some(Wire { request: body_text, response: text }) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_requires_endpoint_and_model() {
        let cfg =
            RemoteConfig::from_toml("endpoint = \"http://localhost:1/v1/chat/completions\"\nmodel = \"m\"\n").unwrap();
        assert_eq!(cfg.api_key_env, "LESSONS_API_KEY");
        assert!(RemoteConfig::from_toml("endpoint = \"\"\nmodel = \"m\"").is_err());
        assert!(RemoteConfig::from_toml("model = \"m\"").is_err());
    }
}
