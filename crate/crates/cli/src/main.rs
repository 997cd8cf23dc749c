//! `lessons`: run benchmarks, serve the session API, inspect knowledge bases.
//! Every subcommand talks to the service, in-process unless `--server` is given.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lessons_client::{BenchmarkParams, Client};
use lessons_core::knowledge::KnowledgeBase;
use lessons_core::lm::{Gateway, RemoteBackend, RemoteConfig};
use lessons_core::orchestrator::Ablation;
use lessons_core::scenario::Scenario;
use lessons_service::{spawn_local, AppState, ServiceConfig};

#[derive(Parser, Debug)]
#[command(name = "lessons", version, about = "Interactive correction engine: benchmarks, service, knowledge")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the scripted benchmark over a scenario file or directory.
    Run(RunArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Inspect or edit a knowledge base.
    Kb(KbArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Scripted,
    Remote,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Language-model backend.
    #[arg(long, value_enum, default_value = "scripted")]
    backend: BackendKind,
    /// TOML endpoint file for the remote backend.
    #[arg(long)]
    endpoint: Option<PathBuf>,
    /// Knowledge base file to start from and save back to.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Seed for the text embedder.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bearer token for the service.
    #[arg(long)]
    token: Option<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file, or a directory searched for `*.json`.
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated ablation columns run next to the full system;
    /// join switches with `+` to combine them in one column.
    #[arg(long, default_value = "")]
    ablate: String,
    /// Rounds over the suite; knowledge carries from one to the next.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    iterations: u32,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Worker threads for independent scenario/ablation cells.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Exit with status 2 when an expected ordering does not hold.
    #[arg(long = "assert")]
    check: bool,
    /// Use a running service instead of an in-process one.
    #[arg(long)]
    server: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Scenario file or directory served under `/scenarios`.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct KbArgs {
    #[command(subcommand)]
    action: KbAction,
    /// Knowledge base file.
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    /// Use a running service instead of opening `--kb` in-process.
    #[arg(long, global = true)]
    server: Option<String>,
    #[arg(long, global = true)]
    token: Option<String>,
}

#[derive(Subcommand, Debug)]
enum KbAction {
    /// List entry ids.
    List,
    /// Print one entry as JSON.
    Show { key: String },
    /// Delete one entry.
    Delete { key: String },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Error(anyhow::Error),
    Assertion(Vec<String>),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Error(e)
    }
}

fn parse_ablations(list: &str) -> Result<Vec<Ablation>> {
    let mut out = vec![Ablation::full()];
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let a: Ablation = token.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    Ok(out)
}

fn gateway(common: &Common) -> Result<Option<Gateway>> {
    match common.backend {
        BackendKind::Scripted => Ok(None),
        BackendKind::Remote => {
            let path = common.endpoint.as_deref().context("--backend remote needs --endpoint <file>")?;
            let config = RemoteConfig::load(path)?;
            Ok(Some(Gateway::new(Arc::new(RemoteBackend::new(config)?))))
        }
    }
}

fn load_kb(path: Option<&Path>) -> Result<Option<KnowledgeBase>> {
    match path {
        Some(p) if p.exists() => Ok(Some(KnowledgeBase::load(p).with_context(|| format!("loading {}", p.display()))?)),
        _ => Ok(None),
    }
}

fn service_config(scenarios: Vec<Scenario>, common: &Common) -> Result<ServiceConfig> {
    Ok(ServiceConfig {
        scenarios,
        kb: load_kb(common.kb.as_deref())?,
        kb_path: common.kb.clone(),
        seed: common.seed,
        gateway: gateway(common)?,
        token: common.token.clone(),
    })
}

async fn connect(
    server: Option<&str>,
    local: impl FnOnce() -> Result<ServiceConfig>,
    token: Option<&str>,
) -> Result<Client> {
    let client = match server {
        Some(url) => Client::new(url),
        None => Client::new(format!("http://{}", spawn_local(AppState::new(local()?)).await?)),
    };
    Ok(match token {
        Some(t) => client.with_token(t),
        None => client,
    })
}

async fn run(args: RunArgs) -> Result<(), Failure> {
    let scenarios = Scenario::load_all(&args.scenario).context("loading scenarios")?;
    let ablations = parse_ablations(&args.ablate)?;
    let suite: Vec<String> = scenarios.iter().map(|s| s.id.clone()).collect();
    let common = args.common.clone();
    let client =
        connect(args.server.as_deref(), || service_config(scenarios, &common), common.token.as_deref()).await?;
    let report = client
        .benchmark(&BenchmarkParams {
            suite,
            ablations,
            iterations: Some(args.iterations),
            seed: Some(args.common.seed),
            parallel: args.parallel,
        })
        .await
        .map_err(anyhow::Error::from)?;
    if let Some(path) = &args.report {
        let json = report.to_canonical_json().map_err(anyhow::Error::from)?;
        std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&report.render_tables());
    if args.check {
        let v = report.violations();
        if !v.is_empty() {
            return Err(Failure::Assertion(v));
        }
    }
    Ok(())
}

/// Write to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

async fn serve(args: ServeArgs) -> Result<()> {
    let scenarios = Scenario::load_all(&args.scenario).context("loading scenarios")?;
    let config = service_config(scenarios, &args.common)?;
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    lessons_service::serve(listener, AppState::new(config)).await?;
    Ok(())
}

async fn kb(args: KbArgs) -> Result<()> {
    if args.server.is_none() && args.kb.is_none() {
        bail!("kb needs --kb <path> or --server <url>");
    }
    let common = Common {
        backend: BackendKind::Scripted,
        endpoint: None,
        kb: args.kb.clone(),
        seed: 0,
        token: args.token.clone(),
    };
    let client =
        connect(args.server.as_deref(), || service_config(Vec::new(), &common), common.token.as_deref()).await?;
    match args.action {
        KbAction::List => {
            let listing = client.kb().await?;
            let mut out = String::new();
            for e in listing.entries {
                out.push_str(&e.id());
                out.push('\n');
            }
            emit(&out);
        }
        KbAction::Show { key } => {
            let entry = client.kb_entry(&key).await?;
            emit(&(serde_json::to_string_pretty(&entry)? + "\n"));
        }
        KbAction::Delete { key } => client.kb_delete(&key).await?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("LESSONS_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = runtime.block_on(async {
        match cli.command {
            Command::Run(a) => run(a).await,
            Command::Serve(a) => serve(a).await.map_err(Failure::from),
            Command::Kb(a) => kb(a).await.map_err(Failure::from),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Assertion(v)) => {
            for line in v {
                eprintln!("assertion failed: {line}");
            }
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_always_leads_the_columns() {
        let a = parse_ablations("cap, no_history,cap").unwrap();
        assert_eq!(a, vec![Ablation::full(), "cap".parse().unwrap(), "no-history".parse().unwrap()]);
        let combined = parse_ablations("no-visual+no-history").unwrap();
        assert_eq!(combined.len(), 2);
        assert_eq!(combined[1], "no-history+no-visual".parse().unwrap());
        assert_eq!(parse_ablations("").unwrap(), vec![Ablation::full()]);
        assert!(parse_ablations("everything").is_err());
    }
}
