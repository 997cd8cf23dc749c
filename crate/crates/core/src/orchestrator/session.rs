use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::events::{EventLog, EventType};
use super::{Ablation, OrchestratorError};
use crate::composer::{compose, filter_parameters, SkillKnowledgeBundle};
use crate::correction::{
    Author, Correction, CorrectionConfig, CorrectionEngine, HandleInput, HistoryEntry, InteractionHistory, Solution,
    SolutionRecord,
};
use crate::dsl::{self, ExecCursor, Program, StepError, StepEvent};
use crate::knowledge::{
    distill_plan, distill_skill, Embedder, KnowledgeEntry, KnowledgeKind, PlanDistillInput, Provenance, RetrieveConfig,
    Retriever, SharedKb, SkillDistillInput,
};
use crate::lm::{Gateway, Level, Transcript};
use crate::planner::{self, ConstraintSource, Plan, PlanContext};
use crate::scenario::{Scenario, TaskSpec};
use crate::sim::{detect, skill_success, EventKind, WorldState};
use crate::skill::parse_skill;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum SessionState {
    Idle,
    Planning,
    /// Plan-only task: the plan is shown and may be corrected or approved.
    PlanReview,
    ExecutingSkill {
        skill: usize,
        cursor: usize,
    },
    AwaitingCorrection {
        skill: usize,
        statement: usize,
    },
    Distilling,
    Done,
}

impl SessionState {
    pub fn name(&self) -> &'static str {
        match self {
            SessionState::Idle => "idle",
            SessionState::Planning => "planning",
            SessionState::PlanReview => "plan_review",
            SessionState::ExecutingSkill { .. } => "executing_skill",
            SessionState::AwaitingCorrection { .. } => "awaiting_correction",
            SessionState::Distilling => "distilling",
            SessionState::Done => "done",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserMode {
    #[default]
    Human,
    Scripted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub index: usize,
    pub skill: String,
    pub corrections: u64,
    pub success: bool,
    pub retrieved: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub corrections: u64,
    pub plan_corrections: u64,
    pub skill_corrections: u64,
    pub skills: Vec<SkillRecord>,
    pub success: Option<bool>,
    pub retrieved_plan: Option<String>,
    pub distilled: Vec<String>,
    pub errors: Vec<String>,
}

/// What a correction produced, as returned to callers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub level: Option<Level>,
    pub solution: SolutionRecord,
    pub state: SessionState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub event: Option<StepEvent>,
    pub error: Option<String>,
    pub grasp_missed: bool,
    pub state: SessionState,
}

/// Everything a session needs from its surroundings.
#[derive(Clone)]
pub struct SessionSetup {
    pub id: String,
    pub scenario: Arc<Scenario>,
    pub task: TaskSpec,
    pub iteration: u32,
    pub ablation: Ablation,
    pub user_mode: UserMode,
    pub gateway: Gateway,
    pub kb: SharedKb,
    pub embedder: Arc<dyn Embedder>,
    /// Earlier final plans, used only by the plan-archive ablation.
    pub plan_archive: String,
    pub threshold: f64,
}

/// Full session view returned by the state endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub scenario: String,
    pub task: TaskSpec,
    pub iteration: u32,
    pub ablation: Ablation,
    pub user_mode: UserMode,
    pub state: SessionState,
    pub world: WorldState,
    pub plan: Option<Plan>,
    pub program: Option<String>,
    pub history: InteractionHistory,
    pub metrics: SessionMetrics,
    pub events: usize,
}

pub struct Session {
    setup: SessionSetup,
    state: SessionState,
    world: WorldState,
    plan: Option<Plan>,
    plan_ctx: PlanContext,
    cursor: Option<ExecCursor>,
    history: InteractionHistory,
    transcript: Transcript,
    logged_prompts: usize,
    events: EventLog,
    metrics: SessionMetrics,
    /// Retrieved task constraints followed by this session's plan corrections;
    /// all of them are distilled again when the plan succeeds.
    plan_correction_texts: Vec<String>,
}

impl Session {
    pub fn new(setup: SessionSetup) -> Result<Self, OrchestratorError> {
        let world = setup.scenario.world(setup.iteration)?;
        let mut s = Session {
            setup,
            state: SessionState::Idle,
            world,
            plan: None,
            plan_ctx: PlanContext::default(),
            cursor: None,
            history: InteractionHistory::default(),
            transcript: Transcript::default(),
            logged_prompts: 0,
            events: EventLog::default(),
            metrics: SessionMetrics::default(),
            plan_correction_texts: Vec::new(),
        };
        s.set_state(SessionState::Idle);
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.setup.id
    }

    pub fn setup(&self) -> &SessionSetup {
        &self.setup
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref()
    }

    pub fn program(&self) -> Option<&Program> {
        self.cursor.as_ref().map(|c| &c.program)
    }

    pub fn program_finished(&self) -> bool {
        self.cursor.as_ref().is_some_and(|c| c.is_finished())
    }

    pub fn history(&self) -> &InteractionHistory {
        &self.history
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn metrics(&self) -> &SessionMetrics {
        &self.metrics
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            id: self.setup.id.clone(),
            scenario: self.setup.scenario.id.clone(),
            task: self.setup.task.clone(),
            iteration: self.setup.iteration,
            ablation: self.setup.ablation,
            user_mode: self.setup.user_mode,
            state: self.state.clone(),
            world: self.world.clone(),
            plan: self.plan.clone(),
            program: self.program().map(dsl::format),
            history: self.history.clone(),
            metrics: self.metrics.clone(),
            events: self.events.len(),
        }
    }

    /// Corrections issued while `skill` was active.
    pub fn skill_rounds(&self, skill: usize) -> usize {
        self.history.for_skill(skill).iter().filter(|e| e.level != Some(Level::High)).count()
    }

    fn set_state(&mut self, state: SessionState) {
        self.state = state;
        let payload = serde_json::to_value(&self.state).unwrap_or_default();
        self.events.push(EventType::State, payload);
    }

    fn flush_prompts(&mut self) {
        for e in &self.transcript.entries[self.logged_prompts..] {
            self.events
                .push(EventType::Prompt, json!({"seq": e.seq, "kind": e.kind, "attempt": e.attempt, "error": e.error}));
        }
        self.logged_prompts = self.transcript.entries.len();
    }

    fn error(&mut self, context: &str, message: String) {
        let line = format!("{context}: {message}");
        tracing::debug!(session = %self.setup.id, "{line}");
        self.events.push(EventType::Error, json!({"context": context, "message": message}));
        self.metrics.errors.push(line);
    }

    fn conflict(&self, action: &str) -> OrchestratorError {
        OrchestratorError::Conflict(format!("{action} is not allowed in state {}", self.state.name()))
    }

    fn retriever<'a>(&'a self, kb: &'a crate::knowledge::KnowledgeBase) -> Retriever<'a> {
        Retriever {
            gateway: &self.setup.gateway,
            kb,
            embedder: self.setup.embedder.as_ref(),
            config: RetrieveConfig { visual: self.setup.ablation.visual(), threshold: self.setup.threshold },
            cross_modal: &self.setup.scenario.backend_rules.cross_modal,
        }
    }

    pub fn instruction(&mut self, text: &str) -> Result<(), OrchestratorError> {
        if self.state != SessionState::Idle {
            return Err(self.conflict("instruction"));
        }
        if text.trim().is_empty() {
            return Err(OrchestratorError::BadRequest("empty instruction".into()));
        }
        self.set_state(SessionState::Planning);
        let mut ctx = PlanContext {
            instruction: text.trim().to_string(),
            object_state: self.world.describe(),
            ..Default::default()
        };
        if self.setup.ablation.retrieval() {
            let kb = self.setup.kb.clone();
            let kb = kb.read();
            let mut transcript = std::mem::take(&mut self.transcript);
            let result = self.retriever(&kb).retrieve(&mut transcript, KnowledgeKind::PlanLevel, text, None);
            self.transcript = transcript;
            match result {
                Ok(r) => {
                    for c in &r.global.robot_constraints {
                        ctx.constraints.push(
                            c,
                            ConstraintSource::Knowledge(crate::knowledge::entry_id(
                                KnowledgeKind::PlanLevel,
                                crate::knowledge::Scope::Global,
                                c,
                            )),
                        );
                    }
                    for p in &r.global.user_preferences {
                        ctx.constraints.push(
                            p,
                            ConstraintSource::Knowledge(crate::knowledge::entry_id(
                                KnowledgeKind::PlanLevel,
                                crate::knowledge::Scope::Global,
                                p,
                            )),
                        );
                    }
                    if let Some(e) = &r.specific {
                        ctx.retrieved = e.render();
                        self.plan_correction_texts.extend(e.constraints.iter().cloned());
                        self.metrics.retrieved_plan = Some(e.id());
                    }
                }
                Err(e) => self.error("retrieve", e.to_string()),
            }
        } else if self.setup.ablation.plan_archive() {
            ctx.retrieved = self.setup.plan_archive.clone();
        }
        self.plan_ctx = ctx;
        let result = planner::plan(&self.setup.gateway, &mut self.transcript, &self.plan_ctx, &self.world);
        self.flush_prompts();
        match result {
            Ok(plan) => {
                self.events.push(EventType::Plan, &plan);
                self.plan = Some(plan);
                if self.setup.task.execute {
                    self.start_skill(0);
                } else {
                    self.set_state(SessionState::PlanReview);
                }
            }
            Err(e) => {
                self.error("plan", e.to_string());
                self.finish(false);
            }
        }
        Ok(())
    }

    fn skill_bundle(&mut self, skill: &str) -> SkillKnowledgeBundle {
        if !self.setup.ablation.retrieval() {
            return SkillKnowledgeBundle::default();
        }
        let target = parse_skill(skill)
            .and_then(|i| detect(&self.world, &i.object).ok())
            .and_then(|id| self.world.objects.get(&id).cloned());
        let kb = self.setup.kb.clone();
        let kb = kb.read();
        let mut transcript = std::mem::take(&mut self.transcript);
        let retriever = self.retriever(&kb);
        let result = match &target {
            Some(o) if !o.feature.is_empty() => {
                retriever.retrieve(&mut transcript, KnowledgeKind::SkillLevel, skill, Some(&o.feature))
            }
            Some(o) => retriever.retrieve_by_name(&mut transcript, KnowledgeKind::SkillLevel, skill, &o.label),
            None => retriever.retrieve(&mut transcript, KnowledgeKind::SkillLevel, skill, None),
        };
        self.transcript = transcript;
        match result {
            Ok(r) => match r.specific {
                Some(e) => SkillKnowledgeBundle {
                    params: filter_parameters(e.task_params.clone()),
                    object_label: e.object_info.as_ref().map(|o| o.label.clone()),
                    source: Some(e.id()),
                },
                None => SkillKnowledgeBundle::default(),
            },
            Err(e) => {
                self.error("retrieve", e.to_string());
                SkillKnowledgeBundle::default()
            }
        }
    }

    fn start_skill(&mut self, index: usize) {
        let Some(skill) = self.plan.as_ref().and_then(|p| p.skills.get(index)).cloned() else {
            self.finish_plan();
            return;
        };
        if let Some(p) = self.plan.as_mut() {
            p.cursor = index;
        }
        let bundle = self.skill_bundle(&skill);
        self.metrics.skills.push(SkillRecord {
            index,
            skill: skill.clone(),
            corrections: 0,
            success: false,
            retrieved: bundle.source.clone(),
        });
        let composed = compose(&self.setup.gateway, &mut self.transcript, &skill, &bundle, &self.world);
        self.flush_prompts();
        match composed {
            Ok(program) => {
                self.events.push(
                    EventType::Plan,
                    json!({"skill": index, "name": skill, "program": dsl::format(&program), "knowledge": bundle.source}),
                );
                self.cursor = Some(ExecCursor::new(program, self.world.clone()));
                self.set_state(SessionState::ExecutingSkill { skill: index, cursor: 0 });
            }
            Err(e) => {
                self.error("compose", e.to_string());
                self.cursor = None;
                self.set_state(SessionState::AwaitingCorrection { skill: index, statement: 0 });
            }
        }
    }

    pub fn step(&mut self) -> Result<StepReport, OrchestratorError> {
        let SessionState::ExecutingSkill { skill, .. } = self.state else {
            return Err(self.conflict("step"));
        };
        let Some(cursor) = self.cursor.as_mut() else {
            return Err(self.conflict("step"));
        };
        match cursor.step() {
            Ok(event) => {
                self.world = cursor.world.clone();
                let next = cursor.index;
                let grasp_missed = event.events.iter().any(|e| matches!(e.kind, EventKind::GraspMissed { .. }));
                self.events.push(EventType::Step, &event);
                self.set_state(SessionState::ExecutingSkill { skill, cursor: next });
                Ok(StepReport { event: Some(event), error: None, grasp_missed, state: self.state.clone() })
            }
            Err(StepError::Finished) => {
                Err(OrchestratorError::Conflict("program finished; approve or interrupt".into()))
            }
            Err(StepError::Runtime(e)) => {
                self.error("step", e.to_string());
                self.set_state(SessionState::AwaitingCorrection { skill, statement: e.index });
                Ok(StepReport {
                    event: None,
                    error: Some(e.to_string()),
                    grasp_missed: false,
                    state: self.state.clone(),
                })
            }
        }
    }

    pub fn interrupt(&mut self) -> Result<SessionState, OrchestratorError> {
        match self.state {
            SessionState::ExecutingSkill { skill, cursor } => {
                self.set_state(SessionState::AwaitingCorrection { skill, statement: cursor })
            }
            SessionState::AwaitingCorrection { .. } | SessionState::PlanReview => {}
            _ => return Err(self.conflict("interrupt")),
        }
        Ok(self.state.clone())
    }

    pub fn correct(&mut self, text: &str, author: Author) -> Result<CorrectionReport, OrchestratorError> {
        let (skill_index, statement) = match self.state {
            SessionState::AwaitingCorrection { skill, statement } => (skill, statement),
            SessionState::PlanReview => (self.plan.as_ref().map_or(0, |p| p.cursor), 0),
            _ => return Err(self.conflict("correction")),
        };
        if text.trim().is_empty() {
            return Err(OrchestratorError::BadRequest("empty correction".into()));
        }
        let plan = self.plan.clone().ok_or_else(|| self.conflict("correction"))?;
        let program = self.program().cloned().unwrap_or_default();
        let correction = Correction {
            text: text.trim().to_string(),
            skill_index,
            round: self.skill_rounds(skill_index) + 1,
            span: program.statements.get(statement.min(program.len().saturating_sub(1))).map(|s| s.span),
            author,
        };
        self.metrics.corrections += 1;
        self.events.push(EventType::Correction, &correction);
        let engine = CorrectionEngine::new(CorrectionConfig { mode: self.setup.ablation.context_mode() });
        let handled = engine.handle(HandleInput {
            gateway: &self.setup.gateway,
            transcript: &mut self.transcript,
            correction: &correction,
            world: &self.world,
            plan: &plan,
            plan_context: &self.plan_ctx,
            program: &program,
            failed_statement: statement,
            history: &self.history,
        });
        self.flush_prompts();
        if handled.level == Some(Level::High) {
            self.metrics.plan_corrections += 1;
            if !self.plan_correction_texts.contains(&correction.text) {
                self.plan_correction_texts.push(correction.text.clone());
            }
        } else {
            self.metrics.skill_corrections += 1;
            if let Some(r) = self.metrics.skills.last_mut() {
                r.corrections += 1;
            }
        }
        let record = match &handled.result {
            Ok(Solution::Replan { plan, .. }) => SolutionRecord::Replan { skills: plan.skills.clone() },
            Ok(Solution::NewProgram { program, resume_at, interpretation, displacement, .. }) => {
                SolutionRecord::Program {
                    program: program.clone(),
                    resume_at: *resume_at,
                    interpretation: interpretation.clone(),
                    displacement: *displacement,
                }
            }
            Err(e) => SolutionRecord::Failed { error: e.to_string() },
        };
        self.events.push(EventType::Solution, json!({"level": handled.level, "solution": &record}));
        self.history.push(HistoryEntry {
            plan: plan.skills.clone(),
            skill_index,
            skill: plan.skills.get(skill_index).cloned().unwrap_or_default(),
            program: dsl::format(&program),
            correction,
            level: handled.level,
            dependence: handled.dependence,
            solution: record.clone(),
        });
        match handled.result {
            Ok(Solution::Replan { plan, .. }) => {
                self.plan_ctx.constraints.push(text, ConstraintSource::Scenario);
                let index = plan.cursor;
                self.events.push(EventType::Plan, &plan);
                self.plan = Some(plan);
                if self.state == SessionState::PlanReview {
                    self.set_state(SessionState::PlanReview);
                } else {
                    self.start_skill(index);
                }
            }
            Ok(Solution::NewProgram { program: source, resume_at, .. }) => match dsl::parse(&source) {
                Ok(program) => {
                    let env = self.cursor.as_ref().map(|c| c.env.clone()).unwrap_or_default();
                    let index = if env.is_empty() { 0 } else { resume_at.min(program.len()) };
                    self.cursor = Some(ExecCursor { program, index, env, world: self.world.clone() });
                    self.set_state(SessionState::ExecutingSkill { skill: skill_index, cursor: index });
                }
                Err(e) => self.error("correction", e.to_string()),
            },
            Err(e) => self.error("correction", e.to_string()),
        }
        Ok(CorrectionReport { level: handled.level, solution: record, state: self.state.clone() })
    }

    /// Confirm the active sub-task (or the reviewed plan). A sub-task that is
    /// not fulfilled ends the episode as a failure.
    pub fn approve(&mut self) -> Result<SessionState, OrchestratorError> {
        match self.state.clone() {
            SessionState::PlanReview => self.finish_plan(),
            SessionState::ExecutingSkill { skill, .. } | SessionState::AwaitingCorrection { skill, .. } => {
                let name = self.plan.as_ref().and_then(|p| p.skills.get(skill)).cloned().unwrap_or_default();
                let ok = skill_success(&self.world, &name).unwrap_or(false);
                if let Some(r) = self.metrics.skills.last_mut() {
                    r.success = ok;
                }
                if !ok {
                    self.error("approve", format!("sub-task {name:?} was not fulfilled"));
                    self.finish(false);
                    return Ok(self.state.clone());
                }
                if self.setup.ablation.distillation() {
                    self.set_state(SessionState::Distilling);
                    self.distill_skill(skill, &name);
                }
                self.start_skill(skill + 1);
            }
            _ => return Err(self.conflict("approve")),
        }
        Ok(self.state.clone())
    }

    fn provenance(&self) -> Provenance {
        Provenance { session: self.setup.id.clone(), iteration: self.setup.iteration, sequence: 0 }
    }

    fn store(&mut self, entries: Vec<KnowledgeEntry>) {
        let kb = self.setup.kb.clone();
        let mut kb = kb.write();
        for e in entries {
            match kb.put(e) {
                Ok(id) => {
                    self.events.push(EventType::Distilled, json!({"id": id}));
                    self.metrics.distilled.push(id);
                }
                Err(e) => self.error("distill", e.to_string()),
            }
        }
    }

    fn distill_skill(&mut self, index: usize, skill: &str) {
        let Some(program) = self.program().cloned() else { return };
        let provenance = self.provenance();
        let history: Vec<&HistoryEntry> = self.history.for_skill(index);
        let result = distill_skill(
            &self.setup.gateway,
            &mut self.transcript,
            SkillDistillInput { skill, history: &history, program: &program, world_after: &self.world, provenance },
        );
        self.flush_prompts();
        match result {
            Ok(entries) => self.store(entries),
            Err(e) => self.error("distill", e.to_string()),
        }
    }

    fn finish_plan(&mut self) {
        if self.setup.ablation.distillation() {
            self.set_state(SessionState::Distilling);
            let plan = self.plan.clone().map(|p| p.skills).unwrap_or_default();
            let provenance = self.provenance();
            let state = self.world.describe();
            let history: Vec<&HistoryEntry> =
                self.history.entries.iter().filter(|e| e.level == Some(Level::High)).collect();
            let result = distill_plan(
                &self.setup.gateway,
                &mut self.transcript,
                PlanDistillInput {
                    instruction: &self.setup.task.instruction,
                    history: &history,
                    corrections: &self.plan_correction_texts,
                    final_plan: &plan,
                    object_state: &state,
                    fulfilled: true,
                    provenance,
                },
            );
            self.flush_prompts();
            match result {
                Ok(entries) => self.store(entries),
                Err(e) => self.error("distill", e.to_string()),
            }
        }
        self.finish(true);
    }

    fn finish(&mut self, success: bool) {
        self.metrics.success = Some(success);
        self.set_state(SessionState::Done);
        let metrics = serde_json::to_value(&self.metrics).unwrap_or_default();
        self.events.push(EventType::Done, metrics);
    }

    /// Final plan rendered for the plan archive.
    pub fn archive_text(&self) -> Option<String> {
        let plan = self.plan.as_ref()?;
        Some(format!("Previous task: {}\nPlan: {}", plan.instruction, plan.numbered()))
    }
}
