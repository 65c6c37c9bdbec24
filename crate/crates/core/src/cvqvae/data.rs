use super::loss::Sample;
use super::train::SampleSet;
use crate::types::{ScenarioRecord, ScenarioTensor, N_FEATURES, N_SLOTS, T_OBS};

/// Flattened tensor, presence mask broadcast over features, pseudo-class
/// index and interaction matrix masked to present cells.
pub fn scenario_sample(record: &ScenarioRecord) -> Sample {
    let tensor = &record.tensor;
    let mut mask = vec![0.0; ScenarioTensor::LEN];
    let mut interaction_mask = vec![0.0; N_SLOTS * T_OBS];
    for slot in 0..N_SLOTS {
        for t in 0..T_OBS {
            if tensor.present(slot, t) {
                interaction_mask[slot * T_OBS + t] = 1.0;
                for f in 0..N_FEATURES {
                    mask[ScenarioTensor::offset(slot, f, t)] = 1.0;
                }
            }
        }
    }
    Sample {
        input: tensor.values().to_vec(),
        mask,
        class: Some(record.pseudo_class.index()),
        interaction: record.interaction.values().to_vec(),
        interaction_mask,
    }
}

/// Samples for `records`, with one input-scale group per kinematic feature.
pub fn scenario_set(records: &[ScenarioRecord]) -> SampleSet {
    SampleSet {
        samples: records.iter().map(scenario_sample).collect(),
        groups: (0..ScenarioTensor::LEN).map(|j| (j / T_OBS) % N_FEATURES).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::tests::valid_record;

    #[test]
    fn mask_follows_presence() {
        let r = valid_record();
        let s = scenario_sample(&r);
        for slot in 0..N_SLOTS {
            for t in 0..T_OBS {
                let p = if r.tensor.present(slot, t) { 1.0 } else { 0.0 };
                assert_eq!(s.interaction_mask[slot * T_OBS + t], p);
                assert_eq!(s.mask[ScenarioTensor::offset(slot, 3, t)], p);
            }
        }
        assert_eq!(s.class, Some(r.pseudo_class.index()));
    }

    #[test]
    fn groups_are_features() {
        let set = scenario_set(&[valid_record()]);
        assert_eq!(set.groups[ScenarioTensor::offset(4, 2, 17)], 2);
        assert_eq!(set.groups[ScenarioTensor::offset(0, 5, 99)], 5);
    }
}
