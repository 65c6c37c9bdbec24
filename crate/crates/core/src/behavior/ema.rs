//! Energy-based baseline: residuals against an exponential moving average,
//! windowed energy, events at local energy maxima.

use serde::{Deserialize, Serialize};

use crate::types::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakThreshold {
    Absolute(f64),
    /// Multiple of the median energy of each (channel, window) series.
    MedianMultiple(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmaConfig {
    pub window_sizes: Vec<usize>,
    pub alpha: f64,
    pub peak_threshold: PeakThreshold,
}

impl Default for EmaConfig {
    fn default() -> Self {
        Self {
            window_sizes: vec![30, 60, 90],
            alpha: 0.05,
            peak_threshold: PeakThreshold::MedianMultiple(3.0),
        }
    }
}

fn residual(signal: &[f64], alpha: f64) -> Vec<f64> {
    let mut ema = signal.first().copied().unwrap_or(0.0);
    signal
        .iter()
        .map(|&s| {
            ema = alpha * s + (1.0 - alpha) * ema;
            s - ema
        })
        .collect()
}

/// `E_w(t) = sum_{|u - t| <= w/2} r(u)^2 / w`, truncated at the borders.
pub fn window_energy(residual: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut prefix = vec![0.0; residual.len() + 1];
    for (i, r) in residual.iter().enumerate() {
        prefix[i + 1] = prefix[i] + r * r;
    }
    (0..residual.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(residual.len());
            (prefix[hi] - prefix[lo]) / window as f64
        })
        .collect()
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Candidate change frames (absolute indices) over the `a_x` and `v_y`
/// channels. Always returns at least one event.
pub fn detect_ema(traj: &Trajectory, cfg: &EmaConfig) -> Vec<i64> {
    if traj.is_empty() {
        return Vec::new();
    }
    let channels: [Vec<f64>; 2] = [
        traj.points.iter().map(|p| p.ax).collect(),
        traj.points.iter().map(|p| p.vy).collect(),
    ];
    let mut candidates = Vec::new();
    let mut global_max: Option<(f64, usize)> = None;
    for signal in &channels {
        let r = residual(signal, cfg.alpha);
        for &w in &cfg.window_sizes {
            let energy = window_energy(&r, w.max(1));
            let threshold = match cfg.peak_threshold {
                PeakThreshold::Absolute(v) => v,
                PeakThreshold::MedianMultiple(m) => m * median(&energy),
            };
            for t in 0..energy.len() {
                let e = energy[t];
                if global_max.is_none_or(|(best, _)| e > best) {
                    global_max = Some((e, t));
                }
                let left = t == 0 || e > energy[t - 1];
                let right = t + 1 == energy.len() || e > energy[t + 1];
                if t > 0 && t + 1 < energy.len() && left && right && e > threshold {
                    candidates.push(t);
                }
            }
        }
    }
    candidates.sort_unstable();
    let min_gap = cfg.window_sizes.iter().copied().min().unwrap_or(1);
    let mut events: Vec<usize> = Vec::new();
    for c in candidates {
        if events.last().is_none_or(|&last| c > last + min_gap) {
            events.push(c);
        }
    }
    if events.is_empty() {
        events.push(global_max.map_or(0, |(_, t)| t));
    }
    events
        .into_iter()
        .map(|t| traj.first_frame() + t as i64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Direction, TrackPoint};

    fn traj(ax: &[f64]) -> Trajectory {
        Trajectory {
            vehicle_id: 1,
            recording_id: "t".into(),
            carriageway: Direction::PositiveX,
            dt: 0.04,
            points: ax
                .iter()
                .enumerate()
                .map(|(k, &a)| TrackPoint {
                    frame: k as i64,
                    x: 0.0,
                    y: 0.0,
                    vx: 30.0,
                    vy: 0.0,
                    ax: a,
                    ay: 0.0,
                    lane_id: 2,
                })
                .collect(),
        }
    }

    /// Direct re-simulation of the energy definition for one window.
    fn brute_energy_peak(ax: &[f64], alpha: f64, w: usize) -> usize {
        let mut ema = ax[0];
        let r: Vec<f64> = ax
            .iter()
            .map(|&s| {
                ema = alpha * s + (1.0 - alpha) * ema;
                s - ema
            })
            .collect();
        let half = (w / 2) as i64;
        let mut best = (f64::MIN, 0);
        for t in 0..ax.len() as i64 {
            let mut e = 0.0;
            for u in (t - half)..=(t + half) {
                if u >= 0 && (u as usize) < ax.len() {
                    e += r[u as usize].powi(2) / w as f64;
                }
            }
            if e > best.0 {
                best = (e, t as usize);
            }
        }
        best.1
    }

    #[test]
    fn quiet_signal_yields_exactly_one_event() {
        let events = detect_ema(&traj(&[0.0; 500]), &EmaConfig::default());
        assert_eq!(events, vec![0]);
    }

    #[test]
    fn step_is_located_within_half_window() {
        let mut ax = vec![0.0; 700];
        for a in &mut ax[300..] {
            *a = 1.0;
        }
        for w in [30usize, 60, 90] {
            let cfg = EmaConfig {
                window_sizes: vec![w],
                ..EmaConfig::default()
            };
            let events = detect_ema(&traj(&ax), &cfg);
            let peak = brute_energy_peak(&ax, cfg.alpha, w);
            assert!(events.contains(&(peak as i64)), "window {w}: {events:?} vs {peak}");
            assert!(events.iter().any(|&e| (e - 300).abs() <= (w / 2) as i64));
        }
        let events = detect_ema(&traj(&ax), &EmaConfig::default());
        assert!(events.iter().any(|&e| (e - 300).abs() <= 45));
    }

    #[test]
    fn two_steps_give_two_events() {
        let mut ax = vec![0.0; 1000];
        for a in &mut ax[250..400] {
            *a = 1.0;
        }
        for a in &mut ax[700..850] {
            *a = -1.0;
        }
        let events = detect_ema(&traj(&ax), &EmaConfig::default());
        assert!(events.len() >= 2, "{events:?}");
        assert!(events.iter().any(|&e| (240..=300).contains(&e)));
        assert!(events.iter().any(|&e| (690..=750).contains(&e)));
    }
}
