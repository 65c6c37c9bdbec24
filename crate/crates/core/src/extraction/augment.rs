//! Insertion of an irrelevant distant vehicle into a scenario.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Augmentation, ScenarioRecord, Trajectory, LANE_WIDTH, N_SLOTS, T_OBS};

/// Lateral acceleration bound for a donor segment.
pub const DONOR_MAX_AY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub count: usize,
    pub min_gap: f64,
    /// Extra longitudinal clearance drawn uniformly from `[0, max_margin]`.
    pub max_margin: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            count: 50,
            min_gap: 80.0,
            max_margin: 40.0,
        }
    }
}

/// Start indices of `T_OBS`-long donor windows with bounded `|a_y|` and a
/// single lane.
pub fn donor_windows(donor: &Trajectory) -> Vec<usize> {
    if donor.len() < T_OBS {
        return Vec::new();
    }
    (0..=donor.len() - T_OBS)
        .filter(|&s| {
            let w = &donor.points[s..s + T_OBS];
            w.iter().all(|p| p.ay.abs() < DONOR_MAX_AY) && w.iter().all(|p| p.lane_id == w[0].lane_id)
        })
        .collect()
}

fn first_free_slot(record: &ScenarioRecord) -> Option<usize> {
    (1..N_SLOTS).find(|&s| record.tensor.slot_is_empty(s))
}

/// Copies a donor segment into the first free slot of `record`, shifted so
/// that it stays more than `min_gap` meters from the ego at every frame.
/// The inserted row of the interaction matrix stays 0.
pub fn augment_irrelevant(
    record: &ScenarioRecord,
    donor: &Trajectory,
    min_gap: f64,
    seed: u64,
) -> Result<ScenarioRecord> {
    let max_margin = AugmentConfig::default().max_margin;
    augment_with_margin(record, donor, min_gap, max_margin, seed)
}

pub fn augment_with_margin(
    record: &ScenarioRecord,
    donor: &Trajectory,
    min_gap: f64,
    max_margin: f64,
    seed: u64,
) -> Result<ScenarioRecord> {
    let slot = first_free_slot(record)
        .ok_or_else(|| Error::Augmentation(format!("record {} has no free slot", record.id)))?;
    let windows = donor_windows(donor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let &start = windows.choose(&mut rng).ok_or_else(|| {
        Error::Augmentation(format!(
            "donor vehicle {} has no steady single-lane segment of {T_OBS} frames",
            donor.vehicle_id
        ))
    })?;
    let seg = &donor.points[start..start + T_OBS];
    let lane_offset = [-LANE_WIDTH, 0.0, LANE_WIDTH][rng.random_range(0..3)];
    let ahead = rng.random_bool(0.5);
    let margin = rng.random_range(0.0..=max_margin) + 1e-3;

    let tensor = &record.tensor;
    let rel: Vec<f64> = (0..T_OBS)
        .map(|t| (seg[t].x - seg[0].x) - tensor.get(0, 0, t))
        .collect();
    let shift = if ahead {
        min_gap - rel.iter().copied().fold(f64::INFINITY, f64::min) + margin
    } else {
        -min_gap - rel.iter().copied().fold(f64::NEG_INFINITY, f64::max) - margin
    };

    let mut out = record.clone();
    for (t, p) in seg.iter().enumerate() {
        let values = [
            p.x - seg[0].x + shift,
            p.y - seg[0].y + lane_offset,
            p.vx,
            p.vy,
            p.ax,
            p.ay,
        ];
        for (f, v) in values.into_iter().enumerate() {
            out.tensor.set(slot, f, t, v);
        }
        out.tensor.set_present(slot, t, true);
        out.interaction.set(slot, t, 0.0);
    }
    out.id = format!("{}#aug{slot}", record.id);
    out.augmentation = Some(Augmentation {
        parent: record.id.clone(),
        slot,
    });
    Ok(out)
}

/// Inverse of [`augment_irrelevant`]: clears the inserted slot.
pub fn remove_augmentation(record: &ScenarioRecord) -> Option<ScenarioRecord> {
    let aug = record.augmentation.as_ref()?;
    let mut out = record.clone();
    out.tensor.clear_slot(aug.slot);
    for t in 0..T_OBS {
        out.interaction.set(aug.slot, t, 0.0);
    }
    out.id = aug.parent.clone();
    out.augmentation = None;
    Some(out)
}

/// Augments `cfg.count` distinct originals drawn by seed from `records`,
/// each with a donor drawn from `donors`. Records without a free slot and
/// donors without a qualifying segment are never drawn.
pub fn augment_dataset(
    records: &[ScenarioRecord],
    donors: &[Trajectory],
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<Vec<ScenarioRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents: Vec<&ScenarioRecord> = records
        .iter()
        .filter(|r| r.augmentation.is_none() && first_free_slot(r).is_some())
        .collect();
    let donors: Vec<&Trajectory> = donors.iter().filter(|d| !donor_windows(d).is_empty()).collect();
    if parents.len() < cfg.count {
        return Err(Error::Augmentation(format!(
            "{} augmentations requested but only {} records have a free slot",
            cfg.count,
            parents.len()
        )));
    }
    if donors.is_empty() && cfg.count > 0 {
        return Err(Error::Augmentation("no donor has a qualifying segment".into()));
    }
    let chosen = rand::seq::index::sample(&mut rng, parents.len(), cfg.count).into_vec();
    let mut chosen = chosen;
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|i| {
            let donor = donors[rng.random_range(0..donors.len())];
            augment_with_margin(parents[i], donor, cfg.min_gap, cfg.max_margin, rng.random())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgsfm::DgsfmConfig;
    use crate::extraction::tests::straight;
    use crate::extraction::{extract, ExtractionConfig};
    use crate::types::{validate_record, ChangePoint, CompositeLabel, Lateral, Longitudinal};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn parent(extra: usize) -> ScenarioRecord {
        let mut trajs = vec![straight(1, 0..400, 0.0, 0.0, 30.0)];
        for k in 0..extra {
            trajs.push(straight(2 + k as i64, 0..400, 10.0 + 9.0 * k as f64, 3.75, 28.0));
        }
        let cp = ChangePoint {
            frame: 200,
            before: CompositeLabel::CRUISE,
            after: CompositeLabel::new(Longitudinal::Decelerate, Lateral::KeepLane),
        };
        let (mut recs, _) = extract(
            &trajs,
            &BTreeMap::from([(1, vec![cp])]),
            &ExtractionConfig::default(),
            &DgsfmConfig::default(),
        );
        recs.remove(0)
    }

    fn donor(vx: f64) -> Trajectory {
        straight(99, 0..300, 500.0, 7.5, vx)
    }

    #[test]
    fn removing_the_insert_restores_the_parent() {
        let p = parent(2);
        let child = augment_irrelevant(&p, &donor(33.0), 80.0, 5).unwrap();
        assert_eq!(child.augmentation.as_ref().unwrap().slot, 3);
        assert_eq!(child.root_id(), p.id);
        assert_eq!(remove_augmentation(&child).unwrap(), p);
        assert!(validate_record(&child).is_empty());
    }

    #[test]
    fn full_record_is_rejected() {
        let p = parent(8);
        assert!(matches!(
            augment_irrelevant(&p, &donor(30.0), 80.0, 1),
            Err(Error::Augmentation(_))
        ));
    }

    #[test]
    fn wobbling_donor_is_rejected() {
        let mut d = donor(30.0);
        for (k, p) in d.points.iter_mut().enumerate() {
            p.ay = if k % 50 < 25 { 0.3 } else { -0.3 };
        }
        assert!(matches!(
            augment_irrelevant(&parent(1), &d, 80.0, 1),
            Err(Error::Augmentation(_))
        ));
    }

    #[test]
    fn dataset_augmentation_is_deterministic() {
        let recs: Vec<_> = (0..6).map(|k| {
            let mut r = parent(k % 3);
            r.id = format!("p{k}");
            r
        }).collect();
        let donors = vec![donor(25.0), donor(35.0)];
        let cfg = AugmentConfig { count: 4, ..AugmentConfig::default() };
        let a = augment_dataset(&recs, &donors, &cfg, 11).unwrap();
        let b = augment_dataset(&recs, &donors, &cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        let mut parents: Vec<_> = a.iter().map(|r| r.root_id().to_string()).collect();
        parents.dedup();
        assert_eq!(parents.len(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inserted_vehicle_keeps_its_distance(seed in any::<u64>(), vx in 15.0f64..45.0, extra in 0usize..8) {
            let p = parent(extra);
            let child = augment_irrelevant(&p, &donor(vx), 80.0, seed).unwrap();
            let slot = child.augmentation.as_ref().unwrap().slot;
            let min = (0..T_OBS)
                .map(|t| {
                    let dx = child.tensor.get(slot, 0, t) - child.tensor.get(0, 0, t);
                    let dy = child.tensor.get(slot, 1, t) - child.tensor.get(0, 1, t);
                    dx.hypot(dy)
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(min > 80.0);
            prop_assert!(child.interaction.row(slot).iter().all(|&v| v == 0.0));
            prop_assert_eq!(child.pseudo_class, p.pseudo_class);
            for s in 0..N_SLOTS {
                if s != slot {
                    for t in 0..T_OBS {
                        prop_assert_eq!(child.interaction.get(s, t), p.interaction.get(s, t));
                        prop_assert_eq!(child.tensor.present(s, t), p.tensor.present(s, t));
                    }
                }
            }
            prop_assert!(validate_record(&child).is_empty());
        }
    }
}
