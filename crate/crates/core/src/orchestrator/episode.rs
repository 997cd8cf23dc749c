use serde::{Deserialize, Serialize};

use super::{Ablation, OrchestratorError, ScriptedUser, Session, SessionState, SkillRecord};
use crate::correction::Author;
use crate::scenario::Phase;
use crate::sim::EventKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLimits {
    /// Session actions (steps, corrections, approvals) before the episode is cut off.
    pub max_actions: usize,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        EpisodeLimits { max_actions: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub session_id: String,
    pub scenario: String,
    pub task: String,
    pub phase: Phase,
    pub iteration: u32,
    pub ablation: Ablation,
    pub corrections: u64,
    pub plan_corrections: u64,
    pub skill_corrections: u64,
    pub skills: Vec<SkillRecord>,
    pub success: bool,
    pub plan: Vec<String>,
    pub errors: Vec<String>,
    pub distilled: Vec<String>,
    pub transcript_entries: usize,
}

impl EpisodeReport {
    pub fn from_session(s: &Session) -> Self {
        let setup = s.setup();
        let m = s.metrics();
        EpisodeReport {
            session_id: setup.id.clone(),
            scenario: setup.scenario.id.clone(),
            task: setup.task.name.clone(),
            phase: setup.task.phase,
            iteration: setup.iteration,
            ablation: setup.ablation,
            corrections: m.corrections,
            plan_corrections: m.plan_corrections,
            skill_corrections: m.skill_corrections,
            skills: m.skills.clone(),
            success: m.success.unwrap_or(false),
            plan: s.plan().map(|p| p.skills.clone()).unwrap_or_default(),
            errors: m.errors.clone(),
            distilled: m.distilled.clone(),
            transcript_entries: s.transcript().entries.len(),
        }
    }
}

fn correct_or_give_up(
    session: &mut Session,
    user: &mut ScriptedUser,
    skill: usize,
    nearest: Option<&str>,
    max_rounds: usize,
) -> Result<(), OrchestratorError> {
    let text =
        if session.skill_rounds(skill) >= max_rounds { None } else { user.skill_correction(session, skill, nearest)? };
    match text {
        Some(t) => session.correct(&t, Author::ScriptedUser).map(|_| ()),
        None => session.approve().map(|_| ()),
    }
}

/// Drive a session to completion with the scripted user.
pub fn run_episode(
    session: &mut Session,
    user: &mut ScriptedUser,
    limits: EpisodeLimits,
) -> Result<EpisodeReport, OrchestratorError> {
    let scenario = session.setup().scenario.clone();
    let task = session.setup().task.clone();
    let max_rounds = scenario.user_policy.max_rounds;
    if *session.state() == SessionState::Idle {
        session.instruction(&task.instruction)?;
    }
    let mut actions = 0;
    while *session.state() != SessionState::Done {
        actions += 1;
        if actions > limits.max_actions {
            return Err(OrchestratorError::Conflict(format!("episode {} did not finish", session.id())));
        }
        match session.state().clone() {
            SessionState::PlanReview => {
                let skills = session.plan().map(|p| p.skills.clone()).unwrap_or_default();
                match user.plan_correction(&scenario, &task.name, &skills) {
                    Some(t) => session.correct(&t, Author::ScriptedUser).map(|_| ())?,
                    None => session.approve().map(|_| ())?,
                }
            }
            SessionState::ExecutingSkill { skill, cursor } => {
                if cursor == 0 {
                    let skills = session.plan().map(|p| p.skills.clone()).unwrap_or_default();
                    if let Some(t) = user.plan_correction(&scenario, &task.name, &skills) {
                        session.interrupt()?;
                        session.correct(&t, Author::ScriptedUser)?;
                        continue;
                    }
                }
                if session.program_finished() {
                    let name = skills_name(session, skill);
                    if crate::sim::skill_success(session.world(), &name).unwrap_or(false) {
                        session.approve()?;
                    } else {
                        session.interrupt()?;
                        correct_or_give_up(session, user, skill, None, max_rounds)?;
                    }
                    continue;
                }
                let report = session.step()?;
                let miss = report.event.as_ref().and_then(|e| {
                    e.events.iter().find_map(|ev| match &ev.kind {
                        EventKind::GraspMissed { nearest, .. } => Some(nearest.clone()),
                        _ => None,
                    })
                });
                if let Some(nearest) = miss {
                    session.interrupt()?;
                    correct_or_give_up(session, user, skill, nearest.as_deref(), max_rounds)?;
                }
            }
            SessionState::AwaitingCorrection { skill, .. } => {
                correct_or_give_up(session, user, skill, None, max_rounds)?;
            }
            SessionState::Idle | SessionState::Planning | SessionState::Distilling | SessionState::Done => {
                return Err(OrchestratorError::Conflict(format!(
                    "session {} stuck in {}",
                    session.id(),
                    session.state().name()
                )));
            }
        }
    }
    Ok(EpisodeReport::from_session(session))
}

fn skills_name(session: &Session, skill: usize) -> String {
    session.plan().and_then(|p| p.skills.get(skill)).cloned().unwrap_or_default()
}
