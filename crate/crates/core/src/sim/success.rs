use super::{detect, Aperture, SimError, WorldState, CLOSED_FRACTION, OPEN_FRACTION};
use crate::skill::{parse_skill, SkillCategory};

/// Category-specific fulfilment predicate for a skill description.
pub fn skill_success(world: &WorldState, skill: &str) -> Result<bool, SimError> {
    let intent = parse_skill(skill).ok_or_else(|| SimError::UnknownSkillCategory(skill.to_string()))?;
    let target = detect(world, &intent.object)?;
    let obj = world.object(&target)?;
    Ok(match intent.category {
        SkillCategory::Open => obj.articulation.as_ref().is_some_and(|a| a.open_fraction >= OPEN_FRACTION),
        SkillCategory::Close => obj.articulation.as_ref().is_some_and(|a| a.open_fraction <= CLOSED_FRACTION),
        SkillCategory::PickUp => world.gripper.holding.as_deref() == Some(target.as_str()),
        SkillCategory::Put | SkillCategory::Hang => {
            let dest =
                intent.destination.as_deref().ok_or_else(|| SimError::UnknownSkillCategory(skill.to_string()))?;
            let container = detect(world, dest)?;
            obj.inside_of.as_deref() == Some(container.as_str()) && world.gripper.aperture == Aperture::Open
        }
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn open_requires_threshold() {
        let mut w = desk();
        assert!(!skill_success(&w, "open the top drawer").unwrap());
        w.objects.get_mut("drawer_top").unwrap().articulation.as_mut().unwrap().open_fraction = 0.6;
        assert!(skill_success(&w, "Open the top drawer").unwrap());
        assert!(!skill_success(&w, "Close the top drawer").unwrap());
    }

    #[test]
    fn pick_up_checks_holding() {
        let mut w = desk();
        assert!(!skill_success(&w, "pick up the scissors").unwrap());
        w.gripper.aperture = Aperture::Closed;
        w.gripper.holding = Some("scissors".into());
        assert!(skill_success(&w, "pick up the scissors").unwrap());
    }

    #[test]
    fn put_checks_containment_and_open_gripper() {
        let mut w = desk();
        w.objects.get_mut("scissors").unwrap().inside_of = Some("drawer_top".into());
        w.link_containment();
        assert!(skill_success(&w, "Put down the scissors into the top drawer").unwrap());
        w.gripper.aperture = Aperture::Closed;
        assert!(!skill_success(&w, "Put down the scissors into the top drawer").unwrap());
    }

    #[test]
    fn unknown_category_errors() {
        let w = desk();
        assert!(matches!(skill_success(&w, "juggle the scissors"), Err(SimError::UnknownSkillCategory(_))));
    }
}
