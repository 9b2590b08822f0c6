//! Seeded re-scripting of a scenario's disturbances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use assembly_core::{DisturbanceAction, DisturbanceEvent, Pose64, Scenario64};

use crate::HarnessError;

/// `count` copies of `scenario` whose events keep their step and target but
/// send each part to a fresh pose drawn uniformly over the table region.
/// Variant `k` is seeded with `base_seed + k`.
pub fn disturbance_variants(
    scenario: &Scenario64,
    count: usize,
    base_seed: u64,
) -> Result<Vec<Scenario64>, HarnessError> {
    let table = scenario.table.ok_or_else(|| {
        HarnessError::Usage(format!("scenario `{}` has no [table] region", scenario.name))
    })?;
    if scenario.events.is_empty() {
        return Err(HarnessError::Usage(format!("scenario `{}` has no events", scenario.name)));
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed + k);
        let mut s = scenario.clone();
        s.name = format!("{}-v{k}", scenario.name);
        s.events = scenario
            .events
            .iter()
            .map(|e| {
                let x = rng.random_range(table.min[0]..=table.max[0]);
                let y = rng.random_range(table.min[1]..=table.max[1]);
                let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                Ok(DisturbanceEvent {
                    action: DisturbanceAction::SetPose(Pose64::planar(x, y, yaw)?),
                    ..*e
                })
            })
            .collect::<Result<_, assembly_core::Error>>()?;
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_are_seeded_and_distinct() {
        let s = Scenario64::load("disassembly").unwrap();
        let a = disturbance_variants(&s, 3, 5).unwrap();
        let b = disturbance_variants(&s, 3, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].events, a[1].events);
        assert_eq!(a[0].events.len(), s.events.len());
        assert!(disturbance_variants(&Scenario64::load("ramp8").unwrap(), 1, 0).is_err());
    }
}
