use std::collections::BTreeSet;

use super::{OrchestratorError, Session};
use crate::correction::{frame_axes, SolutionRecord};
use crate::lm::{Direction, Frame};
use crate::scenario::Scenario;
use crate::sim::{detect, Approach, WorldState};
use crate::skill::parse_skill;

/// Deterministic stand-in for the human in benchmark runs. It knows the true
/// grasp points and the scenario's plan rules, and phrases corrections the
/// way a person watching the robot would.
#[derive(Clone, Debug, Default)]
pub struct ScriptedUser {
    fired: BTreeSet<usize>,
    last: Option<(usize, Direction)>,
}

fn approach_phrase(a: Approach) -> &'static str {
    match a {
        Approach::TopDown => "grasp it from the top",
        Approach::Front => "grasp it from the front",
        Approach::SideLeft => "grasp it from the left",
        Approach::SideRight => "grasp it from the right",
    }
}

fn target_object(world: &WorldState, skill: &str, nearest: Option<&str>) -> Option<String> {
    parse_skill(skill).and_then(|i| detect(world, &i.object).ok()).or_else(|| nearest.map(str::to_string))
}

impl ScriptedUser {
    pub fn new() -> Self {
        ScriptedUser::default()
    }

    /// First violated plan rule that has not been voiced yet.
    pub fn plan_correction(&mut self, scenario: &Scenario, task: &str, skills: &[String]) -> Option<String> {
        let (i, rule) =
            scenario.plan_rules_for(task).find(|(i, r)| !self.fired.contains(i) && r.check.violated(skills))?;
        self.fired.insert(i);
        Some(rule.correction.clone())
    }

    /// Correction for a missed grasp during sub-task `skill`, or `None` when
    /// the miss is not something a motion correction can fix.
    pub fn skill_correction(
        &mut self,
        session: &Session,
        skill: usize,
        nearest: Option<&str>,
    ) -> Result<Option<String>, OrchestratorError> {
        let world = session.world();
        let name = session.plan().and_then(|p| p.skills.get(skill)).cloned().unwrap_or_default();
        let id = target_object(world, &name, nearest)
            .ok_or_else(|| OrchestratorError::MissingGroundTruth(format!("target of {name:?}")))?;
        let obj = world.objects.get(&id).ok_or_else(|| OrchestratorError::MissingGroundTruth(id.clone()))?;
        if world.gripper.pose.approach != obj.grasp_orientation {
            self.last = None;
            return Ok(Some(approach_phrase(obj.grasp_orientation).to_string()));
        }
        let error = obj.grasp_point_world() - world.gripper.pose.position;
        if error.norm() <= world.grasp_tolerance {
            return Ok(None);
        }
        let (_, axes) = frame_axes(Frame::ObjectCentric, Some(obj));
        let components = [
            (axes.right.dot(&error), Direction::Right, Direction::Left),
            (axes.forward.dot(&error), Direction::Forward, Direction::Backward),
            (axes.up.dot(&error), Direction::Up, Direction::Down),
        ];
        let (value, pos, neg) =
            components.into_iter().fold(components[0], |best, c| if c.0.abs() > best.0.abs() { c } else { best });
        let direction = if value >= 0.0 { pos } else { neg };
        let last_moved = session
            .history()
            .for_skill(skill)
            .last()
            .is_some_and(|e| matches!(e.solution, SolutionRecord::Program { displacement: Some(_), .. }));
        let text = if self.last == Some((skill, direction)) && last_moved {
            "a bit more".to_string()
        } else {
            format!("move {} a little bit", direction.as_str())
        };
        self.last = Some((skill, direction));
        Ok(Some(text))
    }
}
