use crate::types::{Longitudinal, Trajectory};

use super::DetectorConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    /// A run satisfying some (threshold, duration) pair starts here.
    Onset { sign: i8 },
    /// |a_x| exceeds the extreme threshold at this frame.
    Extreme { sign: i8 },
    /// A run of |a_x| below the release threshold long enough to count.
    Release,
}

fn event_rank(e: &Event) -> u8 {
    match e {
        Event::Release => 0,
        Event::Onset { .. } => 1,
        Event::Extreme { .. } => 2,
    }
}

fn normal(sign: i8) -> Longitudinal {
    if sign > 0 {
        Longitudinal::Accelerate
    } else {
        Longitudinal::Decelerate
    }
}

fn extreme(sign: i8) -> Longitudinal {
    if sign > 0 {
        Longitudinal::ExtremeAccelerate
    } else {
        Longitudinal::ExtremeDecelerate
    }
}

fn sign_of(state: Longitudinal) -> i8 {
    match state {
        Longitudinal::Zero => 0,
        Longitudinal::Accelerate | Longitudinal::ExtremeAccelerate => 1,
        Longitudinal::Decelerate | Longitudinal::ExtremeDecelerate => -1,
    }
}

/// Start frames of maximal runs where `pred` holds for at least `min_len`
/// consecutive samples.
fn qualifying_runs(len: usize, min_len: usize, pred: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < len {
        if !pred(k) {
            k += 1;
            continue;
        }
        let start = k;
        while k < len && pred(k) {
            k += 1;
        }
        if k - start >= min_len.max(1) {
            out.push(start);
        }
    }
    out
}

/// Per-sample longitudinal state of an acceleration signal.
///
/// Starts in `Zero`. A run of `s * a_x > tau_up` lasting at least `n_up`
/// samples switches to the normal state of sign `s` from the run's first
/// sample; with several pairs the earliest qualifying start wins. A run of
/// `|a_x| < tau_down` lasting `n_down` samples returns to `Zero` from its
/// first sample. `|a_x| > tau_extreme` switches to the extreme state at
/// once; the extreme segment is dated back to the start of the surrounding
/// run above the smallest `tau_up`, so a braking ramp is labeled extreme
/// from its onset.
pub fn longitudinal_states(ax: &[f64], cfg: &DetectorConfig) -> Vec<Longitudinal> {
    let len = ax.len();
    let mut events: Vec<(usize, Event)> = Vec::new();
    for &(tau, n) in &cfg.up_pairs {
        for sign in [1i8, -1] {
            let s = f64::from(sign);
            for start in qualifying_runs(len, n, |k| s * ax[k] > tau) {
                events.push((start, Event::Onset { sign }));
            }
        }
    }
    for (k, &a) in ax.iter().enumerate() {
        if a.abs() > cfg.tau_extreme {
            events.push((k, Event::Extreme { sign: if a > 0.0 { 1 } else { -1 } }));
        }
    }
    for start in qualifying_runs(len, cfg.n_down, |k| ax[k].abs() < cfg.tau_down) {
        events.push((start, Event::Release));
    }
    events.sort_by_key(|(frame, e)| (*frame, event_rank(e)));

    let tau_min = cfg.min_tau_up();
    let mut transitions: Vec<(usize, Longitudinal)> = Vec::new();
    let mut current = Longitudinal::Zero;
    for (frame, event) in events {
        match event {
            Event::Release => {
                if current != Longitudinal::Zero {
                    current = Longitudinal::Zero;
                    transitions.push((frame, current));
                }
            }
            Event::Onset { sign } => {
                if sign_of(current) != sign {
                    current = normal(sign);
                    transitions.push((frame, current));
                }
            }
            Event::Extreme { sign } => {
                let target = extreme(sign);
                if current == target {
                    continue;
                }
                let s = f64::from(sign);
                let mut start = frame;
                while start > 0 && s * ax[start - 1] > tau_min {
                    start -= 1;
                }
                transitions.retain(|&(f, _)| f < start);
                current = target;
                transitions.push((start, current));
            }
        }
    }

    let mut states = vec![Longitudinal::Zero; len];
    for (i, &(from, state)) in transitions.iter().enumerate() {
        let to = transitions.get(i + 1).map_or(len, |&(f, _)| f);
        for s in &mut states[from..to] {
            *s = state;
        }
    }
    states
}

pub fn detect_longitudinal(traj: &Trajectory, cfg: &DetectorConfig) -> Vec<Longitudinal> {
    let ax: Vec<f64> = traj.points.iter().map(|p| p.ax).collect();
    longitudinal_states(&ax, cfg)
}

/// Number of entries into a non-zero state (including sign switches and
/// escalations to extreme).
pub fn count_onsets(states: &[Longitudinal]) -> usize {
    states
        .iter()
        .enumerate()
        .filter(|&(k, &s)| s != Longitudinal::Zero && (k == 0 || states[k - 1] != s))
        .count()
}
