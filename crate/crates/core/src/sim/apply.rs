use serde::{Deserialize, Serialize};

use super::{Aperture, Pose, SimError, Vec3, WorldState, OPEN_FRACTION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceTarget {
    Object(String),
    Point(Vec3),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum Primitive {
    MoveTo { pose: Pose },
    MoveBy { delta: Vec3 },
    SetAperture { aperture: Aperture },
    Pull { object: String, direction: Vec3, distance: f64 },
    PlaceAt { object: String, target: PlaceTarget },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    Moved { from: Vec3, to: Vec3 },
    Grasped { object: String },
    GraspMissed { nearest: Option<String>, distance: Option<f64> },
    Released { object: Option<String> },
    Articulated { object: String, from: f64, to: f64 },
    Placed { object: String, target: PlaceTarget },
    NoChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub primitive: Primitive,
    pub kind: EventKind,
}

/// Apply one primitive. Failed primitives leave the input world untouched and
/// return an error; successful ones return the successor world and an event.
pub fn apply(world: &WorldState, primitive: &Primitive) -> Result<(WorldState, Event), SimError> {
    let mut next = world.clone();
    let kind = match primitive {
        Primitive::MoveTo { pose } => {
            let from = next.gripper.pose.position;
            move_gripper(&mut next, pose.position)?;
            next.gripper.pose.approach = pose.approach;
            next.gripper.pose.roll = pose.roll;
            EventKind::Moved { from, to: pose.position }
        }
        Primitive::MoveBy { delta } => {
            let from = next.gripper.pose.position;
            let to = from + delta;
            move_gripper(&mut next, to)?;
            EventKind::Moved { from, to }
        }
        Primitive::SetAperture { aperture: Aperture::Open } => {
            next.gripper.aperture = Aperture::Open;
            next.gripper.hold_offset = Vec3::zeros();
            EventKind::Released { object: next.gripper.holding.take() }
        }
        Primitive::SetAperture { aperture: Aperture::Closed } => close_gripper(&mut next),
        Primitive::Pull { object, direction, distance } => pull(&mut next, object, direction, *distance)?,
        Primitive::PlaceAt { object, target } => place(&mut next, object, target)?,
    };
    next.tick += 1;
    let event = Event { tick: next.tick, primitive: primitive.clone(), kind };
    Ok((next, event))
}

fn move_gripper(world: &mut WorldState, to: Vec3) -> Result<(), SimError> {
    if !to.iter().all(|x| x.is_finite()) || !world.workspace.contains(&to) {
        return Err(SimError::OutOfWorkspace([to.x, to.y, to.z]));
    }
    if let Some(held) = world.gripper.holding.clone() {
        let target = to + world.gripper.hold_offset;
        let delta = target - world.object(&held)?.pose.position;
        translate(world, &held, &delta)?;
        // the held object lands exactly at gripper + offset
        world.objects.get_mut(&held).expect("checked").pose.position = target;
    }
    world.gripper.pose.position = to;
    Ok(())
}

/// Move an object and everything it contains by `delta`.
fn translate(world: &mut WorldState, id: &str, delta: &Vec3) -> Result<(), SimError> {
    let mut stack = vec![id.to_string()];
    let mut moved = Vec::new();
    while let Some(cur) = stack.pop() {
        let obj = world.object(&cur)?;
        let p = obj.pose.position + delta;
        if !world.workspace.contains(&p) {
            return Err(SimError::OutOfWorkspace([p.x, p.y, p.z]));
        }
        stack.extend(obj.contains.iter().cloned());
        moved.push((cur, p));
    }
    for (cur, p) in moved {
        world.objects.get_mut(&cur).expect("checked").pose.position = p;
    }
    Ok(())
}

fn close_gripper(world: &mut WorldState) -> EventKind {
    world.gripper.aperture = Aperture::Closed;
    if let Some(held) = &world.gripper.holding {
        return EventKind::Grasped { object: held.clone() };
    }
    let g = world.gripper.pose.position;
    let nearest = world
        .objects
        .values()
        .map(|o| ((o.grasp_point_world() - g).norm(), o))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let Some((distance, obj)) = nearest else {
        return EventKind::GraspMissed { nearest: None, distance: None };
    };
    if distance > world.grasp_tolerance || obj.grasp_orientation != world.gripper.pose.approach {
        return EventKind::GraspMissed { nearest: Some(obj.id.clone()), distance: Some(distance) };
    }
    let id = obj.id.clone();
    let offset = obj.pose.position - g;
    let detach = obj.articulation.is_none();
    let container = obj.inside_of.clone();
    if detach {
        if let Some(c) = container {
            if let Some(c) = world.objects.get_mut(&c) {
                c.contains.retain(|x| x != &id);
            }
            world.objects.get_mut(&id).expect("exists").inside_of = None;
        }
    }
    world.gripper.holding = Some(id.clone());
    world.gripper.hold_offset = offset;
    EventKind::Grasped { object: id }
}

fn pull(world: &mut WorldState, object: &str, direction: &Vec3, distance: f64) -> Result<EventKind, SimError> {
    if world.gripper.holding.as_deref() != Some(object) {
        return Err(SimError::InvalidPull(format!("gripper is not holding {object}")));
    }
    let obj = world.object(object)?;
    let Some(art) = obj.articulation.clone() else {
        return Err(SimError::InvalidPull(format!("{object} is not articulated")));
    };
    let norm = direction.norm();
    if norm.is_nan() || norm <= 0.0 || !distance.is_finite() || distance < 0.0 {
        return Err(SimError::InvalidPull("direction must be non-zero and distance non-negative".into()));
    }
    let alignment = direction.dot(&art.axis) / norm;
    let step = distance / art.travel_max;
    let to = if alignment > 0.9 {
        (art.open_fraction + step).clamp(0.0, 1.0)
    } else if alignment < -0.9 {
        (art.open_fraction - step).clamp(0.0, 1.0)
    } else {
        art.open_fraction
    };
    let from = art.open_fraction;
    let delta = art.axis * ((to - from) * art.travel_max);
    let target = world.gripper.pose.position + delta;
    move_gripper(world, target)?;
    world.objects.get_mut(object).and_then(|o| o.articulation.as_mut()).expect("articulated").open_fraction = to;
    Ok(EventKind::Articulated { object: object.to_string(), from, to })
}

fn place(world: &mut WorldState, object: &str, target: &PlaceTarget) -> Result<EventKind, SimError> {
    if world.gripper.holding.as_deref() != Some(object) {
        return Err(SimError::InvalidPlace(format!("gripper is not holding {object}")));
    }
    let destination = match target {
        PlaceTarget::Point(p) => *p,
        PlaceTarget::Object(cid) => {
            if cid == object {
                return Err(SimError::InvalidPlace("cannot place an object into itself".into()));
            }
            let c = world.object(cid)?;
            if let Some(a) = &c.articulation {
                if a.open_fraction < OPEN_FRACTION {
                    return Err(SimError::InvalidPlace(format!("{cid} is not open")));
                }
            }
            c.pose.position
        }
    };
    let gripper_target = destination - world.gripper.hold_offset;
    move_gripper(world, gripper_target)?;
    let previous = world.object(object)?.inside_of.clone();
    if let Some(prev) = previous {
        if let Some(p) = world.objects.get_mut(&prev) {
            p.contains.retain(|x| x != object);
        }
    }
    let new_container = match target {
        PlaceTarget::Object(cid) => Some(cid.clone()),
        PlaceTarget::Point(_) => None,
    };
    if let Some(cid) = &new_container {
        let c = world.objects.get_mut(cid).expect("checked");
        c.contains.push(object.to_string());
        c.contains.sort();
        c.contains.dedup();
    }
    world.objects.get_mut(object).expect("checked").inside_of = new_container;
    Ok(EventKind::Placed { object: object.to_string(), target: target.clone() })
}
