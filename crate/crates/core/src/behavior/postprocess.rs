use crate::types::{ChangePoint, CompositeLabel, Lateral, Longitudinal};

use super::lateral::LateralSegment;
use super::DetectorConfig;

/// Inclusive frame range with one composite label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start_frame: i64,
    pub end_frame: i64,
    pub label: CompositeLabel,
}

impl Segment {
    pub fn len(&self) -> usize {
        (self.end_frame - self.start_frame + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame < self.start_frame
    }
}

fn merge_equal(segments: &mut Vec<Segment>) {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for s in segments.drain(..) {
        match out.last_mut() {
            Some(prev) if prev.label == s.label => prev.end_frame = s.end_frame,
            _ => out.push(s),
        }
    }
    *segments = out;
}

/// Runs of equal labels as segments starting at `first_frame`.
pub fn segments_from_labels(labels: &[CompositeLabel], first_frame: i64) -> Vec<Segment> {
    let mut segments: Vec<Segment> = labels
        .iter()
        .enumerate()
        .map(|(k, &label)| Segment {
            start_frame: first_frame + k as i64,
            end_frame: first_frame + k as i64,
            label,
        })
        .collect();
    merge_equal(&mut segments);
    segments
}

/// Cleans a per-frame composite labeling into segments.
///
/// Segments shorter than `min_segment` are absorbed into the preceding
/// segment (the first segment into its successor). Adjacent lane-change
/// segments are then merged, keeping the longitudinal state of the longer
/// one.
pub fn clean_segments(labels: &[CompositeLabel], first_frame: i64, min_segment: usize) -> Vec<Segment> {
    let mut segments = segments_from_labels(labels, first_frame);
    while let Some(i) = segments.iter().position(|s| s.len() < min_segment) {
        if segments.len() == 1 {
            break;
        }
        let short = segments.remove(i);
        if i > 0 {
            segments[i - 1].end_frame = short.end_frame;
        } else {
            segments[0].start_frame = short.start_frame;
        }
        merge_equal(&mut segments);
    }
    let mut i = 0;
    while i + 1 < segments.len() {
        let (a, b) = (segments[i], segments[i + 1]);
        if a.label.lateral == Lateral::LaneChange && b.label.lateral == Lateral::LaneChange {
            let keep = if b.len() > a.len() { b.label } else { a.label };
            segments[i] = Segment {
                start_frame: a.start_frame,
                end_frame: b.end_frame,
                label: keep,
            };
            segments.remove(i + 1);
        } else {
            i += 1;
        }
    }
    merge_equal(&mut segments);
    segments
}

/// A change point at the first frame of every segment after the first.
pub fn change_points(segments: &[Segment]) -> Vec<ChangePoint> {
    segments
        .windows(2)
        .map(|w| ChangePoint {
            frame: w[1].start_frame,
            before: w[0].label,
            after: w[1].label,
        })
        .collect()
}

/// Combines per-frame longitudinal states with lateral segments covering
/// the same frames (starting at `lateral[0].start_frame`) into composite
/// segments and their change points.
pub fn postprocess(
    longitudinal: &[Longitudinal],
    lateral: &[LateralSegment],
    cfg: &DetectorConfig,
) -> (Vec<Segment>, Vec<ChangePoint>) {
    let Some(first) = lateral.first() else {
        return (Vec::new(), Vec::new());
    };
    let first_frame = first.start_frame;
    let mut lat = Vec::with_capacity(longitudinal.len());
    for seg in lateral {
        lat.extend(std::iter::repeat(seg.lateral).take(seg.len()));
    }
    assert_eq!(
        lat.len(),
        longitudinal.len(),
        "longitudinal and lateral labels must cover the same frames"
    );
    let labels: Vec<CompositeLabel> = longitudinal
        .iter()
        .zip(&lat)
        .map(|(&lo, &la)| CompositeLabel::new(lo, la))
        .collect();
    let segments = clean_segments(&labels, first_frame, cfg.min_segment);
    let cps = change_points(&segments);
    (segments, cps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn label(i: usize) -> CompositeLabel {
        CompositeLabel::from_index(i).unwrap()
    }

    #[test]
    fn uniform_labels_have_no_change_points() {
        let segs = clean_segments(&[label(0); 300], 0, 3);
        assert_eq!(segs.len(), 1);
        assert!(change_points(&segs).is_empty());
    }

    #[test]
    fn one_boundary_gives_one_change_point() {
        let mut labels = vec![CompositeLabel::CRUISE; 100];
        labels.extend(vec![label(2); 100]);
        let cps = change_points(&clean_segments(&labels, 0, 3));
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].frame, 100);
        assert_eq!(cps[0].before, CompositeLabel::CRUISE);
        assert_eq!(cps[0].after, label(2));
    }

    #[test]
    fn spurious_short_segment_is_removed() {
        let mut labels = vec![CompositeLabel::CRUISE; 100];
        labels.extend(vec![label(4); 2]);
        labels.extend(vec![CompositeLabel::CRUISE; 100]);
        let segs = clean_segments(&labels, 0, 3);
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start_frame, segs[0].end_frame), (0, 201));
        assert!(change_points(&segs).is_empty());
    }

    #[test]
    fn adjacent_lane_changes_merge_with_longer_longitudinal() {
        let lc_zero = CompositeLabel::new(Longitudinal::Zero, Lateral::LaneChange);
        let lc_acc = CompositeLabel::new(Longitudinal::Accelerate, Lateral::LaneChange);
        let mut labels = vec![CompositeLabel::CRUISE; 50];
        labels.extend(vec![lc_zero; 30]);
        labels.extend(vec![lc_acc; 60]);
        labels.extend(vec![CompositeLabel::CRUISE; 50]);
        let segs = clean_segments(&labels, 0, 3);
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[1].label, lc_acc);
        assert_eq!((segs[1].start_frame, segs[1].end_frame), (50, 139));
    }

    proptest! {
        #[test]
        fn change_points_match_segment_boundaries(
            runs in proptest::collection::vec((0usize..10, 1usize..40), 1..15)
        ) {
            let labels: Vec<CompositeLabel> = runs
                .iter()
                .flat_map(|&(l, n)| std::iter::repeat(label(l)).take(n))
                .collect();
            let segs = clean_segments(&labels, 7, 3);
            let cps = change_points(&segs);
            prop_assert_eq!(cps.len(), segs.len() - 1);
            let covered: usize = segs.iter().map(|s| s.len()).sum();
            prop_assert_eq!(covered, labels.len());
            for (cp, w) in cps.iter().zip(segs.windows(2)) {
                prop_assert_eq!(cp.frame, w[1].start_frame);
                prop_assert_eq!(w[0].end_frame + 1, w[1].start_frame);
                prop_assert!(cp.before != cp.after);
            }
            if segs.len() > 1 {
                prop_assert!(segs.iter().all(|s| s.len() >= 3));
            }
        }
    }
}
