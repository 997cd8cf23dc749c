//! Scenario documents: scene fixture, task sequence, scripted-user policy and
//! scripted-backend rules.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::BackendRules;
use crate::sim::{
    Aperture, Approach, Bounds, GripperState, ObjectRecord, Pose, Vec3, WorldState, DEFAULT_GRASP_TOLERANCE,
};
use crate::skill::normalize;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("scenario {id}: {message}")]
    Invalid { id: String, message: String },
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error("no scenarios given")]
    Empty,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Skill-level knowledge carried across iterations.
    #[default]
    Skill,
    /// Plan-level knowledge transferred from training to test tasks.
    Plan,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<ObjectRecord>,
    #[serde(default)]
    pub gripper: Option<[f64; 3]>,
    #[serde(default)]
    pub workspace: Option<Bounds>,
    #[serde(default)]
    pub grasp_tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub instruction: String,
    #[serde(default)]
    pub phase: Phase,
    /// Execute the plan in the simulator; plan-only tasks stop after review.
    #[serde(default = "yes")]
    pub execute: bool,
    /// Iterations the task runs in; empty means all.
    #[serde(default)]
    pub iterations: Vec<u32>,
}

fn yes() -> bool {
    true
}

impl TaskSpec {
    pub fn runs_in(&self, iteration: u32) -> bool {
        self.iterations.is_empty() || self.iterations.contains(&iteration)
    }
}

/// Per-object overrides applied to the base scene for one iteration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectPatch {
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub grasp_point: Option<[f64; 3]>,
    #[serde(default)]
    pub grasp_orientation: Option<Approach>,
    #[serde(default)]
    pub feature: Option<Vec<f64>>,
    #[serde(default)]
    pub open_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub iteration: u32,
    #[serde(default)]
    pub objects: BTreeMap<String, ObjectPatch>,
}

/// Condition on a plan that the scripted user checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "check")]
pub enum PlanCheck {
    /// A sub-task matching `first` must come before one matching `then`.
    Order { first: String, then: String },
    /// Some sub-task must match.
    Missing { skill: String },
    /// No sub-task may match.
    Present { skill: String },
    /// Two pick-ups without a put or place in between.
    SingleHand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRuleSpec {
    #[serde(flatten)]
    pub check: PlanCheck,
    pub correction: String,
    /// Task names the rule applies to; empty means all.
    #[serde(default)]
    pub tasks: Vec<String>,
}

fn matches(skill: &str, pattern: &str) -> bool {
    normalize(skill).contains(&normalize(pattern))
}

fn is_pick(skill: &str) -> bool {
    let s = normalize(skill);
    ["pick up", "grab", "take"].iter().any(|p| s.starts_with(p))
}

fn is_put(skill: &str) -> bool {
    let s = normalize(skill);
    ["put", "place", "hang"].iter().any(|p| s.starts_with(p))
}

impl PlanCheck {
    pub fn violated(&self, skills: &[String]) -> bool {
        match self {
            PlanCheck::Order { first, then } => {
                let Some(t) = skills.iter().position(|s| matches(s, then)) else { return false };
                !skills[..t].iter().any(|s| matches(s, first))
            }
            PlanCheck::Missing { skill } => !skills.iter().any(|s| matches(s, skill)),
            PlanCheck::Present { skill } => skills.iter().any(|s| matches(s, skill)),
            PlanCheck::SingleHand => {
                let mut holding = false;
                for s in skills {
                    if is_pick(s) {
                        if holding {
                            return true;
                        }
                        holding = true;
                    } else if is_put(s) {
                        holding = false;
                    }
                }
                false
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserPolicy {
    /// Corrections per sub-task before the user gives up.
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub plan_rules: Vec<PlanRuleSpec>,
}

fn default_max_rounds() -> usize {
    12
}

impl Default for UserPolicy {
    fn default() -> Self {
        UserPolicy { max_rounds: default_max_rounds(), plan_rules: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub kind: ScenarioKind,
    #[serde(default)]
    pub description: String,
    pub scene: Scene,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub variations: Vec<Variation>,
    #[serde(default)]
    pub user_policy: UserPolicy,
    #[serde(default)]
    pub backend_rules: BackendRules,
}

impl Scenario {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Parse { path: origin.to_string(), message: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// A single file, or every `*.json` file of a directory tree in path order.
    pub fn load_all(path: &Path) -> Result<Vec<Self>, ScenarioError> {
        let io = |e: std::io::Error| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() };
        if !path.is_dir() {
            return Ok(vec![Self::load(path)?]);
        }
        let mut files = Vec::new();
        let mut stack = vec![path.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).map_err(io)? {
                let p = entry.map_err(io)?.path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().is_some_and(|e| e == "json") {
                    files.push(p);
                }
            }
        }
        files.sort();
        let out: Vec<Self> = files.iter().map(|f| Self::load(f)).collect::<Result<_, _>>()?;
        if out.is_empty() {
            return Err(ScenarioError::Empty);
        }
        Ok(out)
    }

    fn invalid(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid { id: self.id.clone(), message: message.into() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.id.trim().is_empty() {
            return Err(self.invalid("empty id"));
        }
        if self.tasks.is_empty() {
            return Err(self.invalid("no tasks"));
        }
        let ids: Vec<&str> = self.scene.objects.iter().map(|o| o.id.as_str()).collect();
        for v in &self.variations {
            if v.iteration == 0 {
                return Err(self.invalid("iterations are numbered from 1"));
            }
            if let Some(unknown) = v.objects.keys().find(|k| !ids.contains(&k.as_str())) {
                return Err(self.invalid(format!("variation refers to unknown object {unknown:?}")));
            }
        }
        for t in &self.tasks {
            if t.iterations.contains(&0) {
                return Err(self.invalid(format!("task {:?} lists iteration 0", t.name)));
            }
        }
        for r in &self.user_policy.plan_rules {
            if let Some(unknown) = r.tasks.iter().find(|n| !self.tasks.iter().any(|t| &&t.name == n)) {
                return Err(self.invalid(format!("plan rule refers to unknown task {unknown:?}")));
            }
        }
        let dims: Vec<usize> = self.scene.objects.iter().map(|o| o.feature.len()).filter(|d| *d > 0).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(self.invalid("object features differ in dimension"));
        }
        self.world(1)?;
        Ok(())
    }

    /// Feature dimension used by this scenario's objects.
    pub fn feature_dim(&self) -> Option<usize> {
        self.scene.objects.iter().map(|o| o.feature.len()).find(|d| *d > 0)
    }

    /// Base scene with the variations of `iteration` applied.
    pub fn world(&self, iteration: u32) -> Result<WorldState, ScenarioError> {
        let mut objects: BTreeMap<String, ObjectRecord> =
            self.scene.objects.iter().map(|o| (o.id.clone(), o.clone())).collect();
        for v in self.variations.iter().filter(|v| v.iteration == iteration) {
            for (id, patch) in &v.objects {
                let o = objects.get_mut(id).ok_or_else(|| self.invalid(format!("unknown object {id:?}")))?;
                if let Some(p) = patch.position {
                    o.pose.position = Vec3::from(p);
                }
                if let Some(l) = &patch.label {
                    o.label = l.clone();
                }
                if let Some(g) = patch.grasp_point {
                    o.grasp_point = Vec3::from(g);
                }
                if let Some(a) = patch.grasp_orientation {
                    o.grasp_orientation = a;
                }
                if let Some(f) = &patch.feature {
                    o.feature = f.clone();
                }
                if let (Some(f), Some(a)) = (patch.open_fraction, o.articulation.as_mut()) {
                    a.open_fraction = f;
                }
            }
        }
        let mut world = WorldState {
            objects,
            gripper: GripperState {
                pose: Pose::new(Vec3::from(self.scene.gripper.unwrap_or([0.0, 0.0, 0.5])), Approach::Front),
                aperture: Aperture::Open,
                holding: None,
                hold_offset: Vec3::zeros(),
            },
            workspace: self
                .scene
                .workspace
                .clone()
                .unwrap_or(Bounds { min: Vec3::new(-1.0, -1.0, 0.0), max: Vec3::new(1.0, 1.0, 1.0) }),
            tick: 0,
            grasp_tolerance: self.scene.grasp_tolerance.unwrap_or(DEFAULT_GRASP_TOLERANCE),
        };
        world.link_containment();
        world.validate().map_err(|e| self.invalid(e.to_string()))?;
        Ok(world)
    }

    pub fn task(&self, name: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn plan_rules_for<'a>(&'a self, task: &'a str) -> impl Iterator<Item = (usize, &'a PlanRuleSpec)> + 'a {
        self.user_policy
            .plan_rules
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.tasks.is_empty() || r.tasks.iter().any(|t| t == task))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "id": "mini",
        "scene": {"objects": [{
            "id": "drawer_top", "label": "top drawer", "category": "drawer",
            "pose": {"position": [0, 0.4, 0.3], "approach": "front"},
            "extents": [0.2, 0.3, 0.1], "normal": [0, -1, 0], "grasp_point": [0.1, 0, 0],
            "grasp_orientation": "front",
            "articulation": {"axis": [0, -1, 0], "travel_max": 0.3}
        }]},
        "tasks": [{"name": "open", "instruction": "open the top drawer"}],
        "variations": [{"iteration": 2, "objects": {"drawer_top": {"position": [0.2, 0.4, 0.3]}}}]
    }"#;

    #[test]
    fn minimal_scenario_loads_with_defaults() {
        let s = Scenario::from_json(MINIMAL, "mini.json").unwrap();
        assert_eq!(s.kind, ScenarioKind::Skill);
        assert!(s.tasks[0].execute);
        assert_eq!(s.user_policy.max_rounds, 12);
        assert_eq!(s.world(1).unwrap().objects["drawer_top"].pose.position.x, 0.0);
        assert_eq!(s.world(2).unwrap().objects["drawer_top"].pose.position.x, 0.2);
        assert_eq!(s.world(3).unwrap(), s.world(1).unwrap());
    }

    #[test]
    fn bad_references_are_rejected() {
        let bad = MINIMAL.replace("\"drawer_top\": {\"position\"", "\"nope\": {\"position\"");
        assert!(matches!(Scenario::from_json(&bad, "x"), Err(ScenarioError::Invalid { .. })));
        let no_tasks = MINIMAL.replace(r#"[{"name": "open", "instruction": "open the top drawer"}]"#, "[]");
        assert!(matches!(Scenario::from_json(&no_tasks, "x"), Err(ScenarioError::Invalid { .. })));
        assert!(matches!(Scenario::from_json("{", "x"), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn plan_checks() {
        let plan = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let order = PlanCheck::Order { first: "open the top drawer".into(), then: "pick up the scissors".into() };
        assert!(order.violated(&plan(&["Pick up the scissors", "Put the scissors into the top drawer"])));
        assert!(!order.violated(&plan(&["Open the top drawer", "Pick up the scissors"])));
        assert!(PlanCheck::SingleHand.violated(&plan(&["Pick up the milk", "Pick up the carrot"])));
        assert!(!PlanCheck::SingleHand.violated(&plan(&[
            "Pick up the milk",
            "Put the milk in the microwave",
            "Pick up the carrot"
        ])));
        assert!(PlanCheck::Missing { skill: "white drawer".into() }.violated(&plan(&["Open the drawer"])));
        assert!(
            PlanCheck::Present { skill: "white shelf".into() }.violated(&plan(&["Put the book on the white shelf"]))
        );
    }
}
