//! Shared data model: trajectories, composite behavior labels, scenario
//! tensors, interaction matrices and the records that bundle them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vehicle slots per scenario; slot 0 is the ego.
pub const N_SLOTS: usize = 9;
/// Features per vehicle and frame, in the order x, y, vx, vy, ax, ay.
pub const N_FEATURES: usize = 6;
/// Frames per scenario tensor (4 s at 25 Hz).
pub const T_OBS: usize = 100;
/// Number of pseudo-classes (5 longitudinal x 2 lateral states).
pub const N_CLASSES: usize = 10;
/// Sampling step of highD recordings.
pub const DEFAULT_DT: f64 = 0.04;
/// Lane width used for synthesis and augmentation.
pub const LANE_WIDTH: f64 = 3.75;

pub const FEATURE_NAMES: [&str; N_FEATURES] = ["x", "y", "vx", "vy", "ax", "ay"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: i64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
    pub lane_id: i32,
}

impl TrackPoint {
    pub fn features(&self) -> [f64; N_FEATURES] {
        [self.x, self.y, self.vx, self.vy, self.ax, self.ay]
    }

    fn is_finite(&self) -> bool {
        self.features().iter().all(|v| v.is_finite())
    }
}

/// Original direction of travel along the road x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    PositiveX,
    NegativeX,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vehicle_id: i64,
    pub recording_id: String,
    /// Carriageway the vehicle drove on. Kept through normalization so that
    /// neighbors are only searched among vehicles sharing a coordinate frame.
    pub carriageway: Direction,
    pub dt: f64,
    pub points: Vec<TrackPoint>,
}

impl Trajectory {
    /// Checks length, finiteness and gap-free frame indices.
    pub fn validate(&self) -> Result<()> {
        let integrity = |message: String| Error::Integrity {
            vehicle_id: self.vehicle_id,
            message,
        };
        if self.points.is_empty() {
            return Err(integrity("empty trajectory".into()));
        }
        if !(self.dt > 0.0) {
            return Err(integrity(format!("non-positive dt {}", self.dt)));
        }
        if self.points[0].frame < 0 {
            return Err(integrity("negative frame index".into()));
        }
        for pair in self.points.windows(2) {
            if pair[1].frame != pair[0].frame + 1 {
                return Err(integrity(format!(
                    "frame gap between {} and {}",
                    pair[0].frame, pair[1].frame
                )));
            }
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_finite()) {
            return Err(integrity(format!("non-finite kinematics at frame {}", p.frame)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_frame(&self) -> i64 {
        self.points.first().map_or(0, |p| p.frame)
    }

    pub fn last_frame(&self) -> i64 {
        self.points.last().map_or(-1, |p| p.frame)
    }

    /// Point at an absolute frame index, if the vehicle is recorded there.
    pub fn at(&self, frame: i64) -> Option<&TrackPoint> {
        let offset = frame - self.first_frame();
        if offset < 0 {
            return None;
        }
        self.points.get(offset as usize)
    }

    pub fn covers(&self, start: i64, end: i64) -> bool {
        !self.is_empty() && self.first_frame() <= start && self.last_frame() >= end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Longitudinal {
    Zero,
    Accelerate,
    Decelerate,
    ExtremeAccelerate,
    ExtremeDecelerate,
}

impl Longitudinal {
    pub const ALL: [Longitudinal; 5] = [
        Longitudinal::Zero,
        Longitudinal::Accelerate,
        Longitudinal::Decelerate,
        Longitudinal::ExtremeAccelerate,
        Longitudinal::ExtremeDecelerate,
    ];

    /// The state with accelerate and decelerate swapped.
    pub fn mirrored(self) -> Self {
        match self {
            Longitudinal::Zero => Longitudinal::Zero,
            Longitudinal::Accelerate => Longitudinal::Decelerate,
            Longitudinal::Decelerate => Longitudinal::Accelerate,
            Longitudinal::ExtremeAccelerate => Longitudinal::ExtremeDecelerate,
            Longitudinal::ExtremeDecelerate => Longitudinal::ExtremeAccelerate,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Longitudinal::Zero => "zero",
            Longitudinal::Accelerate => "accelerate",
            Longitudinal::Decelerate => "decelerate",
            Longitudinal::ExtremeAccelerate => "extreme_accelerate",
            Longitudinal::ExtremeDecelerate => "extreme_decelerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lateral {
    KeepLane,
    LaneChange,
}

impl Lateral {
    fn name(self) -> &'static str {
        match self {
            Lateral::KeepLane => "keep_lane",
            Lateral::LaneChange => "lane_change",
        }
    }
}

/// Joint longitudinal and lateral behavior state of a vehicle.
///
/// Written as `longitudinal/lateral`, e.g. `decelerate/keep_lane`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CompositeLabel {
    pub longitudinal: Longitudinal,
    pub lateral: Lateral,
}

impl CompositeLabel {
    pub const CRUISE: CompositeLabel = CompositeLabel {
        longitudinal: Longitudinal::Zero,
        lateral: Lateral::KeepLane,
    };

    pub fn new(longitudinal: Longitudinal, lateral: Lateral) -> Self {
        Self {
            longitudinal,
            lateral,
        }
    }

    /// Pseudo-class index in `0..N_CLASSES`.
    pub fn index(self) -> usize {
        let lon = Longitudinal::ALL
            .iter()
            .position(|&l| l == self.longitudinal)
            .unwrap_or(0);
        let lat = match self.lateral {
            Lateral::KeepLane => 0,
            Lateral::LaneChange => 1,
        };
        lon * 2 + lat
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index >= N_CLASSES {
            return None;
        }
        let lateral = if index % 2 == 0 {
            Lateral::KeepLane
        } else {
            Lateral::LaneChange
        };
        Some(Self::new(Longitudinal::ALL[index / 2], lateral))
    }

    pub fn all() -> impl Iterator<Item = CompositeLabel> {
        (0..N_CLASSES).filter_map(CompositeLabel::from_index)
    }
}

impl fmt::Display for CompositeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.longitudinal.name(), self.lateral.name())
    }
}

impl FromStr for CompositeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CompositeLabel::all()
            .find(|l| l.to_string() == s.trim())
            .ok_or_else(|| Error::Input(format!("unknown composite label '{s}'")))
    }
}

/// A composite-label transition at frame `frame` (the first frame of the
/// new behavior).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub frame: i64,
    pub before: CompositeLabel,
    pub after: CompositeLabel,
}

/// One-hot pseudo-class, stored by its hot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PseudoClassLabel(usize);

impl PseudoClassLabel {
    pub fn new(index: usize) -> Result<Self> {
        if index < N_CLASSES {
            Ok(Self(index))
        } else {
            Err(Error::Input(format!("pseudo-class index {index} out of range")))
        }
    }

    pub fn from_label(label: CompositeLabel) -> Self {
        Self(label.index())
    }

    pub fn from_one_hot(one_hot: &[f64]) -> Result<Self> {
        if one_hot.len() != N_CLASSES {
            return Err(Error::Shape {
                expected: N_CLASSES,
                actual: one_hot.len(),
            });
        }
        let ones: Vec<usize> = (0..N_CLASSES).filter(|&i| one_hot[i] == 1.0).collect();
        let zeros = one_hot.iter().filter(|&&v| v == 0.0).count();
        match ones.as_slice() {
            [i] if zeros == N_CLASSES - 1 => Ok(Self(*i)),
            _ => Err(Error::Input("vector is not one-hot".into())),
        }
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn one_hot(self) -> [f64; N_CLASSES] {
        let mut v = [0.0; N_CLASSES];
        v[self.0] = 1.0;
        v
    }

    pub fn label(self) -> CompositeLabel {
        CompositeLabel::from_index(self.0).expect("index validated at construction")
    }
}

/// Fixed-shape `N_SLOTS x N_FEATURES x T_OBS` array of kinematic features,
/// row-major, with a per-slot, per-frame presence mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTensor {
    values: Vec<f64>,
    presence: Vec<bool>,
}

impl ScenarioTensor {
    pub const LEN: usize = N_SLOTS * N_FEATURES * T_OBS;

    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; Self::LEN],
            presence: vec![false; N_SLOTS * T_OBS],
        }
    }

    pub fn from_parts(values: Vec<f64>, presence: Vec<bool>) -> Result<Self> {
        if values.len() != Self::LEN {
            return Err(Error::Shape {
                expected: Self::LEN,
                actual: values.len(),
            });
        }
        if presence.len() != N_SLOTS * T_OBS {
            return Err(Error::Shape {
                expected: N_SLOTS * T_OBS,
                actual: presence.len(),
            });
        }
        Ok(Self { values, presence })
    }

    #[inline]
    pub fn offset(slot: usize, feature: usize, t: usize) -> usize {
        (slot * N_FEATURES + feature) * T_OBS + t
    }

    pub fn get(&self, slot: usize, feature: usize, t: usize) -> f64 {
        self.values[Self::offset(slot, feature, t)]
    }

    pub fn set(&mut self, slot: usize, feature: usize, t: usize, value: f64) {
        self.values[Self::offset(slot, feature, t)] = value;
    }

    pub fn present(&self, slot: usize, t: usize) -> bool {
        self.presence[slot * T_OBS + t]
    }

    pub fn set_present(&mut self, slot: usize, t: usize, present: bool) {
        self.presence[slot * T_OBS + t] = present;
    }

    pub fn slot_is_empty(&self, slot: usize) -> bool {
        (0..T_OBS).all(|t| !self.present(slot, t))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn presence(&self) -> &[bool] {
        &self.presence
    }

    /// Clears a slot back to a pseudo-vehicle.
    pub fn clear_slot(&mut self, slot: usize) {
        for f in 0..N_FEATURES {
            for t in 0..T_OBS {
                self.set(slot, f, t, 0.0);
            }
        }
        for t in 0..T_OBS {
            self.set_present(slot, t, false);
        }
    }
}

/// `N_SLOTS x T_OBS` interaction scores, row-major by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    values: Vec<f64>,
}

impl InteractionMatrix {
    pub const LEN: usize = N_SLOTS * T_OBS;

    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; Self::LEN],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != Self::LEN {
            return Err(Error::Shape {
                expected: Self::LEN,
                actual: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn get(&self, slot: usize, t: usize) -> f64 {
        self.values[slot * T_OBS + t]
    }

    pub fn set(&mut self, slot: usize, t: usize, value: f64) {
        self.values[slot * T_OBS + t] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, slot: usize) -> &[f64] {
        &self.values[slot * T_OBS..(slot + 1) * T_OBS]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub recording_id: String,
    pub ego_vehicle_id: i64,
    pub anchor_frame: i64,
}

/// Marks a record produced by inserting an irrelevant vehicle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmentation {
    pub parent: String,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRecord {
    pub id: String,
    pub tensor: ScenarioTensor,
    pub pseudo_class: PseudoClassLabel,
    pub interaction: InteractionMatrix,
    pub anchor: ChangePoint,
    pub provenance: Provenance,
    pub augmentation: Option<Augmentation>,
}

impl ScenarioRecord {
    pub fn augmentation_parent(&self) -> Option<&str> {
        self.augmentation.as_ref().map(|a| a.parent.as_str())
    }

    /// Identifier of the original record this one derives from (itself for
    /// originals).
    pub fn root_id(&self) -> &str {
        self.augmentation_parent().unwrap_or(&self.id)
    }
}

/// Which invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NonFinite,
    EgoPresence,
    ZeroPadding,
    AnchorLabels,
    InteractionRange,
    EgoRow,
    AbsentRow,
    AugmentedRow,
    NeighborSum,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NonFinite => "finite values",
            Rule::EgoPresence => "ego present at every frame",
            Rule::ZeroPadding => "pseudo-vehicle slots carry zero features",
            Rule::AnchorLabels => "anchor labels differ",
            Rule::InteractionRange => "interaction entries in [0, 1]",
            Rule::EgoRow => "interaction ego row equals 1",
            Rule::AbsentRow => "interaction absent slots equal 0",
            Rule::AugmentedRow => "interaction of inserted vehicle equals 0",
            Rule::NeighborSum => "neighbor interaction sums to 1 per frame",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

const SUM_TOLERANCE: f64 = 1e-9;

/// Collects every invariant violation of a record. One entry per broken
/// rule, with the first offending location in the detail.
pub fn validate_record(record: &ScenarioRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |rule: Rule, detail: String| {
        if !out.iter().any(|v: &Violation| v.rule == rule) {
            out.push(Violation { rule, detail });
        }
    };
    let tensor = &record.tensor;
    let inter = &record.interaction;

    if let Some(i) = tensor.values().iter().position(|v| !v.is_finite()) {
        flag(Rule::NonFinite, format!("tensor cell {i}"));
    }
    if let Some(i) = inter.values().iter().position(|v| !v.is_finite()) {
        flag(Rule::NonFinite, format!("interaction cell {i}"));
    }
    if let Some(t) = (0..T_OBS).find(|&t| !tensor.present(0, t)) {
        flag(Rule::EgoPresence, format!("ego absent at frame {t}"));
    }
    'pad: for slot in 0..N_SLOTS {
        for t in 0..T_OBS {
            if tensor.present(slot, t) {
                continue;
            }
            if let Some(f) = (0..N_FEATURES).find(|&f| tensor.get(slot, f, t) != 0.0) {
                flag(
                    Rule::ZeroPadding,
                    format!("slot {slot} feature {} frame {t}", FEATURE_NAMES[f]),
                );
                break 'pad;
            }
        }
    }
    if record.anchor.before == record.anchor.after {
        flag(Rule::AnchorLabels, format!("both {}", record.anchor.after));
    }
    if let Some(i) = inter
        .values()
        .iter()
        .position(|v| !(0.0..=1.0).contains(v))
    {
        flag(Rule::InteractionRange, format!("cell {i}"));
    }
    if let Some(t) = (0..T_OBS).find(|&t| inter.get(0, t) != 1.0) {
        flag(Rule::EgoRow, format!("frame {t} has {}", inter.get(0, t)));
    }
    let inserted = record.augmentation.as_ref().map(|a| a.slot);
    for t in 0..T_OBS {
        let mut sum = 0.0;
        let mut any = false;
        for slot in 1..N_SLOTS {
            let v = inter.get(slot, t);
            if !tensor.present(slot, t) {
                if v != 0.0 {
                    flag(Rule::AbsentRow, format!("slot {slot} frame {t} has {v}"));
                }
            } else if Some(slot) == inserted {
                if v != 0.0 {
                    flag(Rule::AugmentedRow, format!("slot {slot} frame {t} has {v}"));
                }
            } else {
                any = true;
                sum += v;
            }
        }
        if any && (sum - 1.0).abs() > SUM_TOLERANCE {
            flag(Rule::NeighborSum, format!("frame {t} sums to {sum}"));
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// A record with the ego and one neighbor present everywhere.
    pub(crate) fn valid_record() -> ScenarioRecord {
        let mut tensor = ScenarioTensor::zeros();
        let mut inter = InteractionMatrix::zeros();
        for t in 0..T_OBS {
            tensor.set_present(0, t, true);
            tensor.set_present(1, t, true);
            tensor.set(0, 2, t, 30.0);
            tensor.set(1, 0, t, 25.0);
            tensor.set(1, 2, t, 28.0);
            inter.set(0, t, 1.0);
            inter.set(1, t, 1.0);
        }
        ScenarioRecord {
            id: "r:1:100".into(),
            tensor,
            pseudo_class: PseudoClassLabel::new(3).unwrap(),
            interaction: inter,
            anchor: ChangePoint {
                frame: 100,
                before: CompositeLabel::CRUISE,
                after: CompositeLabel::from_index(3).unwrap(),
            },
            provenance: Provenance {
                recording_id: "r".into(),
                ego_vehicle_id: 1,
                anchor_frame: 100,
            },
            augmentation: None,
        }
    }

    #[test]
    fn valid_record_has_no_violations() {
        assert!(validate_record(&valid_record()).is_empty());
    }

    #[test]
    fn ego_row_breach_is_reported() {
        let mut r = valid_record();
        r.interaction.set(0, 17, 0.5);
        let v = validate_record(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::EgoRow);
        assert!(v[0].to_string().contains("ego row"));
    }

    #[test]
    fn padding_breach_is_reported() {
        let mut r = valid_record();
        r.tensor.set(5, 3, 40, 0.25);
        let v = validate_record(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::ZeroPadding);
    }

    #[test]
    fn neighbor_sum_and_absent_rows() {
        let mut r = valid_record();
        r.interaction.set(1, 3, 0.7);
        r.interaction.set(4, 9, 0.1);
        let rules: Vec<Rule> = validate_record(&r).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::NeighborSum));
        assert!(rules.contains(&Rule::AbsentRow));
    }

    #[test]
    fn composite_label_index_is_a_bijection() {
        let mut seen = [false; N_CLASSES];
        for i in 0..N_CLASSES {
            let label = CompositeLabel::from_index(i).unwrap();
            assert_eq!(label.index(), i);
            assert!(!seen[i]);
            seen[i] = true;
            assert_eq!(label.to_string().parse::<CompositeLabel>().unwrap(), label);
        }
        assert!(CompositeLabel::from_index(N_CLASSES).is_none());
        let distinct: std::collections::HashSet<_> = CompositeLabel::all().collect();
        assert_eq!(distinct.len(), N_CLASSES);
    }

    #[test]
    fn one_hot_round_trip() {
        for i in 0..N_CLASSES {
            let p = PseudoClassLabel::new(i).unwrap();
            let v = p.one_hot();
            assert_eq!(v.iter().sum::<f64>(), 1.0);
            assert_eq!(PseudoClassLabel::from_one_hot(&v).unwrap(), p);
        }
        assert!(PseudoClassLabel::from_one_hot(&[0.0; N_CLASSES]).is_err());
        assert!(PseudoClassLabel::new(N_CLASSES).is_err());
    }

    #[test]
    fn trajectory_gap_is_rejected() {
        let p = |frame| TrackPoint {
            frame,
            x: 0.0,
            y: 0.0,
            vx: 0.0,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            lane_id: 2,
        };
        let mut traj = Trajectory {
            vehicle_id: 7,
            recording_id: "01".into(),
            carriageway: Direction::PositiveX,
            dt: DEFAULT_DT,
            points: vec![p(1), p(2), p(3)],
        };
        assert!(traj.validate().is_ok());
        assert_eq!(traj.at(2).unwrap().frame, 2);
        assert!(traj.at(0).is_none());
        traj.points.remove(1);
        assert!(matches!(traj.validate(), Err(Error::Integrity { vehicle_id: 7, .. })));
    }
}
