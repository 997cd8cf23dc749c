use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Program, Span, Statement, Value};
use super::builtins::Builtin;
use super::format;
use crate::sim::{self, Aperture, Approach, Event, PlaceTarget, Pose, Primitive, SimError, Vec3, WorldState};

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum RuntimeErrorKind {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("identifier {0:?} is not bound")]
    Unbound(String),
    #[error("argument {0:?} is missing or malformed")]
    BadArgument(String),
    #[error("{0} has no articulation axis; pass a direction")]
    NoDirection(String),
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[error("statement {index} ({span}): {kind}")]
pub struct RuntimeError {
    pub span: Span,
    pub index: usize,
    pub kind: RuntimeErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("program finished")]
    Finished,
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// Result of executing one statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub index: usize,
    pub span: Span,
    pub statement: String,
    pub command: Builtin,
    pub events: Vec<Event>,
    /// Binding created by this statement, as (name, object id).
    pub bound: Option<(String, String)>,
}

/// Statement-at-a-time execution state. A failing statement leaves the
/// cursor, bindings and world exactly as they were before it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExecCursor {
    pub program: Program,
    pub index: usize,
    pub env: BTreeMap<String, String>,
    pub world: WorldState,
}

impl ExecCursor {
    pub fn new(program: Program, world: WorldState) -> Self {
        ExecCursor { program, index: 0, env: BTreeMap::new(), world }
    }

    pub fn is_finished(&self) -> bool {
        self.index >= self.program.len()
    }

    pub fn current(&self) -> Option<&Statement> {
        self.program.statements.get(self.index)
    }

    pub fn step(&mut self) -> Result<StepEvent, StepError> {
        let Some(stmt) = self.program.statements.get(self.index).cloned() else {
            return Err(StepError::Finished);
        };
        let err = |kind: RuntimeErrorKind| RuntimeError { span: stmt.span, index: self.index, kind };
        let (world, events, bound) = self.execute(&stmt).map_err(err)?;
        if let Some((name, id)) = &bound {
            self.env.insert(name.clone(), id.clone());
        }
        self.world = world;
        let event = StepEvent {
            index: self.index,
            span: stmt.span,
            statement: format::statement(&stmt),
            command: stmt.command,
            events,
            bound,
        };
        self.index += 1;
        Ok(event)
    }

    /// Run to completion, stopping at the first error.
    pub fn run(&mut self) -> Result<Vec<StepEvent>, RuntimeError> {
        let mut out = Vec::new();
        loop {
            match self.step() {
                Ok(e) => out.push(e),
                Err(StepError::Finished) => return Ok(out),
                Err(StepError::Runtime(e)) => return Err(e),
            }
        }
    }

    fn object(&self, stmt: &Statement, param: &str) -> Result<String, RuntimeErrorKind> {
        match stmt.arg(param) {
            Some(Value::Ident(name)) => {
                self.env.get(name).cloned().ok_or_else(|| RuntimeErrorKind::Unbound(name.clone()))
            }
            _ => Err(RuntimeErrorKind::BadArgument(param.into())),
        }
    }

    #[allow(clippy::type_complexity)]
    fn execute(
        &self,
        stmt: &Statement,
    ) -> Result<(WorldState, Vec<Event>, Option<(String, String)>), RuntimeErrorKind> {
        let vector = |p: &str| match stmt.arg(p) {
            Some(Value::Vector(v)) => Some(Vec3::from(*v)),
            _ => None,
        };
        let orientation = |p: &str| -> Result<Option<Approach>, RuntimeErrorKind> {
            match stmt.arg(p) {
                None => Ok(None),
                Some(Value::Str(s)) => s.parse().map(Some).map_err(|_| RuntimeErrorKind::BadArgument(p.into())),
                Some(_) => Err(RuntimeErrorKind::BadArgument(p.into())),
            }
        };
        let current = &self.world.gripper.pose;
        let primitives = match stmt.command {
            Builtin::Detect => {
                let Some(Value::Str(label)) = stmt.arg("label") else {
                    return Err(RuntimeErrorKind::BadArgument("label".into()));
                };
                let id = sim::detect(&self.world, label)?;
                let bound = stmt.binding.clone().map(|b| (b, id));
                return Ok((self.world.clone(), Vec::new(), bound));
            }
            Builtin::MoveTo => {
                let position = vector("position").ok_or_else(|| RuntimeErrorKind::BadArgument("position".into()))?;
                let approach = orientation("orientation")?.unwrap_or(current.approach);
                vec![Primitive::MoveTo { pose: Pose { position, approach, roll: current.roll } }]
            }
            Builtin::MoveBy => {
                let delta = vector("delta").ok_or_else(|| RuntimeErrorKind::BadArgument("delta".into()))?;
                vec![Primitive::MoveBy { delta }]
            }
            Builtin::Rotate => {
                let approach =
                    orientation("orientation")?.ok_or_else(|| RuntimeErrorKind::BadArgument("orientation".into()))?;
                vec![Primitive::MoveTo { pose: Pose { position: current.position, approach, roll: current.roll } }]
            }
            Builtin::OpenGripper => vec![Primitive::SetAperture { aperture: Aperture::Open }],
            Builtin::CloseGripper => vec![Primitive::SetAperture { aperture: Aperture::Closed }],
            Builtin::Grasp => {
                let id = self.object(stmt, "object")?;
                let obj = self.world.object(&id)?;
                let offset = vector("offset").unwrap_or_else(Vec3::zeros);
                let approach = orientation("orientation")?.unwrap_or(obj.grasp_orientation);
                let pose = Pose { position: obj.pose.position + offset, approach, roll: current.roll };
                vec![Primitive::MoveTo { pose }, Primitive::SetAperture { aperture: Aperture::Closed }]
            }
            Builtin::Pull => {
                let id = self.object(stmt, "object")?;
                let Some(Value::Number(distance)) = stmt.arg("distance") else {
                    return Err(RuntimeErrorKind::BadArgument("distance".into()));
                };
                let direction = match vector("direction") {
                    Some(d) => d,
                    None => self
                        .world
                        .object(&id)?
                        .articulation
                        .as_ref()
                        .map(|a| a.axis)
                        .ok_or_else(|| RuntimeErrorKind::NoDirection(id.clone()))?,
                };
                vec![Primitive::Pull { object: id, direction, distance: *distance }]
            }
            Builtin::Place => {
                let id = self.object(stmt, "object")?;
                let target = match stmt.arg("target") {
                    Some(Value::Vector(v)) => PlaceTarget::Point(Vec3::from(*v)),
                    Some(Value::Ident(_)) => PlaceTarget::Object(self.object(stmt, "target")?),
                    _ => return Err(RuntimeErrorKind::BadArgument("target".into())),
                };
                vec![Primitive::PlaceAt { object: id, target }]
            }
        };
        let mut world = self.world.clone();
        let mut events = Vec::with_capacity(primitives.len());
        for p in &primitives {
            let (next, event) = sim::apply(&world, p)?;
            world = next;
            events.push(event);
        }
        Ok((world, events, None))
    }
}
