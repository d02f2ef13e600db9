//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers to run a subset:
//! `cargo test --test acceptance -- 3 6`.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdlab::agent::System;
use tdlab::env::{
    acrobot_step, energy_pumping_policy, mountain_car_step, run_episode, AcrobotState, MountainCar,
    MountainCarState, Throttle,
};
use tdlab::eval::{interference_from_gradients, interference_schedule, pairwise_interference, rve, EvalDataset};
use tdlab::featurize::{discretize, FeatureVector, Featurizer, Preprocessing, TileCoder, TileCoderConfig};
use tdlab::harness::{prepare_dataset, run_single, run_sweep, ExperimentConfig, Profile, SweepResult, Task};
use tdlab::net::{Network, NetworkSpec};
use tdlab::stats::{mean, regularized_incomplete_beta, smooth, two_sample_ttest};

use common::{oracle_forward, random_point, tanh_sinh, OracleNet, Param};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// 1

fn random_network(r: &mut ChaCha8Rng) -> Network {
    let layers = r.gen_range(1..=4);
    let hidden: Vec<usize> = (0..layers).map(|_| r.gen_range(5..=100)).collect();
    let spec = NetworkSpec::new(r.gen_range(1..=8), hidden, r.gen_range(1..=3));
    let mut net = Network::init(spec, r).unwrap();
    let spec = net.spec().clone();
    let widths: Vec<usize> = spec.hidden_layers.iter().copied().chain([spec.outputs]).collect();
    for (l, &w) in widths.iter().enumerate() {
        for u in 0..w {
            *net.bias_mut(l, u) = r.gen_range(-0.1..0.1);
        }
    }
    net
}

fn random_input(r: &mut ChaCha8Rng, len: usize) -> FeatureVector {
    if r.gen_bool(0.5) {
        FeatureVector::Dense((0..len).map(|_| r.gen_range(-1.0..1.0)).collect())
    } else {
        let k = r.gen_range(1..=len);
        let mut active = rand::seq::index::sample(r, len, k).into_vec();
        active.sort_unstable();
        FeatureVector::Sparse { active, len }
    }
}

fn gradient_correctness() -> Result<String, String> {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    // central differences of a piecewise-linear function are exact away
    // from kinks; keep every hidden pre-activation clear of zero
    const KINK_MARGIN: f64 = 1e-3;
    let start = Instant::now();
    let mut r = rng(1);
    let (mut instances, mut coords, mut worst) = (0, 0usize, 0.0f64);
    while instances < 120 {
        let mut net = random_network(&mut r);
        let len = net.spec().input_length;
        let Some(x) = (0..50)
            .map(|_| random_input(&mut r, len))
            .find(|x| oracle_forward(&net, &x.to_dense()).1 > KINK_MARGIN)
        else {
            continue;
        };
        let dense = x.to_dense();
        let out = r.gen_range(0..net.spec().outputs);
        net.forward(&x).map_err(|e| e.to_string())?;
        let g = net.backward(out).map_err(|e| e.to_string())?.0;
        let mut oracle = OracleNet::from_network(&net);
        let layout = oracle.layout();
        ensure(layout.len() == g.len(), || "gradient length differs from parameter count".into())?;
        let acts = oracle.activations(&dense);
        for (k, &p) in layout.iter().enumerate() {
            ensure(*oracle.get_mut(p) == net.params()[k], || format!("parameter {k} is not at {p:?}"))?;
            let layer = match p {
                Param::Weight(l, ..) | Param::Bias(l, _) => l,
            };
            let orig = *oracle.get_mut(p);
            *oracle.get_mut(p) = orig + H;
            let fp = oracle.outputs_from(layer, &acts[layer])[out];
            *oracle.get_mut(p) = orig - H;
            let fm = oracle.outputs_from(layer, &acts[layer])[out];
            *oracle.get_mut(p) = orig;
            let fd = (fp - fm) / (2.0 * H);
            let rel = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            ensure(rel <= TOL, || {
                format!("instance {instances} coord {k}: analytic {} vs numeric {fd} (rel {rel:e})", g[k])
            })?;
        }
        coords += net.param_count();
        instances += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{instances} instances, {coords} coordinates, worst rel {worst:.2e}, {elapsed:.1?}"))
}

// ---------------------------------------------------------------------------
// 2

fn feature_coders() -> Result<String, String> {
    let mut r = rng(2);
    for task in [Task::McControl, Task::AcrobotControl] {
        let bounds = task.bounds();
        let bins = task.bins_per_dim();
        for _ in 0..10_000 {
            let s = random_point(&mut r, &bounds);
            let f = discretize(&s, &bounds, bins).map_err(|e| e.to_string())?;
            let active = f.active().ok_or("discretizer output is not sparse")?;
            let distinct: BTreeSet<_> = active.iter().collect();
            ensure(active.len() == bounds.dims() && distinct.len() == bounds.dims(), || {
                format!("{task}: {} active indices for {s:?}", active.len())
            })?;
            ensure(active.iter().all(|&i| i < bins * bounds.dims()), || format!("{task}: index out of range"))?;
        }
    }

    // each index must stand for a single (tiling, tile) tuple: the tuples
    // common to every state activating an index never run out, and there
    // are as many indices as tuples
    let bounds = Task::McControl.bounds();
    let mut coder = TileCoder::new(bounds.clone(), TileCoderConfig::MOUNTAIN_CAR).map_err(|e| e.to_string())?;
    let mut candidates: HashMap<usize, BTreeSet<common::Tile>> = HashMap::new();
    let mut tuples_seen = BTreeSet::new();
    for _ in 0..10_000 {
        let s = random_point(&mut r, &bounds);
        let f = coder.encode(&s).map_err(|e| e.to_string())?;
        let active = f.active().ok_or("tile coder output is not sparse")?;
        let distinct: BTreeSet<_> = active.iter().collect();
        ensure(active.len() == 8 && distinct.len() == 8, || format!("{} indices for {s:?}", active.len()))?;
        ensure(active.iter().all(|&i| i < 128) && f.len() == 128, || "index outside [0, 128)".into())?;
        let tiles: BTreeSet<common::Tile> = common::oracle_tiles(&s, &bounds, 8, 4).into_iter().collect();
        for &i in active {
            let c = candidates.entry(i).or_insert_with(|| tiles.clone());
            c.retain(|t| tiles.contains(t));
            ensure(!c.is_empty(), || format!("index {i} covers more than one tile"))?;
        }
        tuples_seen.extend(tiles);
    }
    ensure(candidates.len() == tuples_seen.len(), || {
        format!("{} indices for {} tiles", candidates.len(), tuples_seen.len())
    })?;

    let fig = TileCoderConfig {
        num_tilings: 3,
        tiles_per_dim: 4,
        dims: 2,
        capacity: 48,
    };
    let mut coder = TileCoder::new(bounds.clone(), fig).map_err(|e| e.to_string())?;
    let dense = coder.encode(&[-0.3, 0.01]).map_err(|e| e.to_string())?.to_dense();
    let ones = dense.iter().filter(|&&v| v == 1.0).count();
    ensure(dense.len() == 48 && ones == 3 && dense.iter().all(|&v| v == 0.0 || v == 1.0), || {
        format!("three-tiling example: {ones} ones in {} entries", dense.len())
    })?;
    Ok(format!(
        "discretizer 2x10,000 states; tile coder 10,000 states, {} tiles on {} indices; 3 ones in 48",
        tuples_seen.len(),
        candidates.len()
    ))
}

// ---------------------------------------------------------------------------
// 3

fn environments() -> Result<String, String> {
    let r0 = mountain_car_step(MountainCarState::new(-0.5, 0.0), Throttle::Forward);
    ensure(
        (r0.next_state.velocity - 0.000_823_156_995_830_742_8).abs() < 1e-12
            && (r0.next_state.position + 0.499_176_843_004_169_26).abs() < 1e-12
            && r0.reward == -1.0
            && !r0.terminal,
        || format!("hand example gave {:?}", r0),
    )?;

    let mut r = rng(3);
    let bounds = Task::AcrobotControl.bounds();
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let s = random_point(&mut r, &bounds);
        let a = r.gen_range(0..3);
        let got = acrobot_step(AcrobotState::new(s[0], s[1], s[2], s[3]), a);
        let (want, want_terminal) = common::oracle_acrobot([s[0], s[1], s[2], s[3]], a as f64 - 1.0);
        let n = got.next_state;
        let diffs = [
            common::angle_diff(n.theta1, want[0]),
            common::angle_diff(n.theta2, want[1]),
            (n.omega1 - want[2]).abs(),
            (n.omega2 - want[3]).abs(),
        ];
        let d = diffs.iter().copied().fold(0.0, f64::max);
        worst = worst.max(d);
        ensure(d <= 1e-10, || format!("pair {i}: {s:?} a={a} differs by {d:e}"))?;
        ensure(got.terminal == want_terminal, || format!("pair {i}: terminal flag differs"))?;
    }

    let mut env = MountainCar::default();
    let mut longest = 0;
    for _ in 0..1000 {
        let ep = run_episode(&mut env, energy_pumping_policy, 1000, &mut r).map_err(|e| e.to_string())?;
        ensure(ep.terminated_naturally, || "energy pumping hit the 1000-step cutoff".into())?;
        longest = longest.max(ep.steps);
    }
    Ok(format!("hand step exact; acrobot worst diff {worst:.1e}; pumping longest episode {longest} steps"))
}

// ---------------------------------------------------------------------------
// 4

fn random_prediction_setup(r: &mut ChaCha8Rng) -> (Network, Featurizer, EvalDataset) {
    let bounds = Task::McPrediction.bounds();
    let featurizer = match r.gen_range(0..3) {
        0 => Featurizer::Raw(bounds.clone()),
        1 => Featurizer::Discretize { bounds: bounds.clone(), bins: 20 },
        _ => Featurizer::TileCode(TileCoder::new(bounds.clone(), TileCoderConfig::MOUNTAIN_CAR).unwrap()),
    };
    let layers = r.gen_range(1..=3);
    let hidden = (0..layers).map(|_| r.gen_range(5..=60)).collect();
    let net = Network::init(NetworkSpec::new(featurizer.input_length(), hidden, 1), r).unwrap();
    let n = r.gen_range(2..=50);
    let states: Vec<Vec<f64>> = (0..n).map(|_| random_point(r, &bounds)).collect();
    let values = (0..n).map(|_| r.gen_range(-120.0..0.0)).collect();
    (net, featurizer, EvalDataset::new(states, values).unwrap())
}

fn brute_force_interference(grads: &[Vec<f64>]) -> f64 {
    let norm = |g: &[f64]| g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (mut total, mut pairs) = (0.0, 0usize);
    for i in 0..grads.len() {
        for j in i + 1..grads.len() {
            let (ni, nj) = (norm(&grads[i]), norm(&grads[j]));
            if ni < 1e-12 || nj < 1e-12 {
                continue;
            }
            let dot: f64 = grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum();
            total += dot / (ni * nj);
            pairs += 1;
        }
    }
    total / pairs as f64
}

fn interference_oracle() -> Result<String, String> {
    let mut r = rng(4);
    let (mut worst, mut worst_scale) = (0.0f64, 0.0f64);
    for inst in 0..50 {
        let (mut net, mut feat, ds) = random_prediction_setup(&mut r);
        let report = pairwise_interference(&mut net, &mut feat, &ds).map_err(|e| e.to_string())?;
        let grads: Vec<Vec<f64>> = ds
            .states
            .iter()
            .map(|s| {
                net.forward(&feat.encode(s).unwrap()).unwrap();
                net.backward(0).unwrap().0
            })
            .collect();
        let brute = brute_force_interference(&grads);
        let d = (report.mean - brute).abs();
        worst = worst.max(d);
        ensure(d <= 1e-10, || format!("instance {inst}: {} vs brute force {brute}", report.mean))?;
        ensure((-1.0..=1.0).contains(&report.mean), || format!("instance {inst}: PI {}", report.mean))?;

        let scaled: Vec<Vec<f64>> = grads
            .iter()
            .map(|g| {
                let c = 10f64.powf(r.gen_range(-3.0..3.0));
                g.iter().map(|x| c * x).collect()
            })
            .collect();
        let rescaled = interference_from_gradients(scaled.iter().map(Vec::as_slice)).map_err(|e| e.to_string())?;
        let d = (rescaled.mean - report.mean).abs();
        worst_scale = worst_scale.max(d);
        ensure(d <= 1e-12, || format!("instance {inst}: rescaling moved PI by {d:e}"))?;
    }
    Ok(format!("50 instances, worst diff {worst:.1e}, worst rescaling drift {worst_scale:.1e}"))
}

// ---------------------------------------------------------------------------
// 5

fn rve_oracle() -> Result<String, String> {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let (mut net, mut feat, ds) = random_prediction_setup(&mut r);
        let got = rve(&mut net, &mut feat, &ds).map_err(|e| e.to_string())?;
        let preds: Vec<f64> = ds.states.iter().map(|s| oracle_forward(&net, &feat.encode(s).unwrap().to_dense()).0[0]).collect();
        let want = (preds.iter().zip(&ds.true_values).map(|(p, v)| (p - v).powi(2)).sum::<f64>() / ds.len() as f64).sqrt();
        let d = (got - want).abs();
        worst = worst.max(d);
        ensure(d <= 1e-12, || format!("instance {inst}: {got} vs {want}"))?;

        let exact: Vec<f64> = ds
            .states
            .iter()
            .map(|s| net.forward(&feat.encode(s).unwrap()).unwrap()[0])
            .collect();
        let matched = EvalDataset::new(ds.states.clone(), exact).unwrap();
        let zero = rve(&mut net, &mut feat, &matched).map_err(|e| e.to_string())?;
        ensure(zero == 0.0, || format!("instance {inst}: RVE {zero} on matched values"))?;
    }
    Ok(format!("50 instances, worst diff {worst:.1e}; matched values give 0"))
}

// ---------------------------------------------------------------------------
// 6

fn statistics() -> Result<String, String> {
    let oracle_beta = |x: f64, a: f64, b: f64| {
        let f = |t: f64, one_minus_t: f64| t.powf(a - 1.0) * one_minus_t.powf(b - 1.0);
        tanh_sinh(&f, x) / tanh_sinh(&f, 1.0)
    };
    let fx = two_sample_ttest(&[0.0, 1.0, 2.0], &[2.0, 3.0, 4.0]).map_err(|e| e.to_string())?;
    let oracle_p = oracle_beta(4.0 / (4.0 + fx.t_statistic.powi(2)), 2.0, 0.5);
    ensure(
        (fx.t_statistic + 2.449).abs() < 1e-3
            && fx.degrees_of_freedom == 4.0
            && (fx.p_value - 0.0705).abs() < 1e-3
            && (fx.p_value - oracle_p).abs() < 1e-3,
        || format!("fixture gave {fx:?}, oracle p {oracle_p}"),
    )?;
    let same = two_sample_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure(same.p_value == 1.0, || format!("identical samples gave p {}", same.p_value))?;

    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (x, a, b) = (r.gen_range(0.01..0.99), r.gen_range(0.5..20.0), r.gen_range(0.5..20.0));
        let d = (regularized_incomplete_beta(x, a, b) - oracle_beta(x, a, b)).abs();
        worst = worst.max(d);
        ensure(d <= 1e-7, || format!("I_{x}({a}, {b}) off by {d:e}"))?;
    }
    Ok(format!(
        "t={:.4} df={} p={:.5} (oracle {:.5}); identical p=1; beta worst diff {worst:.1e}",
        fx.t_statistic, fx.degrees_of_freedom, fx.p_value, oracle_p
    ))
}

// ---------------------------------------------------------------------------
// 7-9

fn desk(task: Task, prep: Preprocessing, interference: bool) -> ExperimentConfig {
    let mut c = ExperimentConfig::profile(Profile::Desk, task, prep, System::Sgd);
    c.measure_interference = interference;
    c.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    c
}

fn sweep(cfg: &ExperimentConfig, dataset: Option<&EvalDataset>) -> Result<SweepResult, String> {
    run_sweep(cfg, dataset).map_err(|e| e.to_string())
}

fn claim_a() -> Result<String, String> {
    let start = Instant::now();
    let raw = sweep(&desk(Task::McControl, Preprocessing::Raw, false), None)?;
    let mut parts = vec![format!("raw {:.1}", raw.best().mean_auc)];
    for prep in [Preprocessing::Tilecode, Preprocessing::Discretize] {
        let s = sweep(&desk(Task::McControl, prep, false), None)?;
        let t = two_sample_ttest(&s.best().aucs, &raw.best().aucs).map_err(|e| e.to_string())?;
        ensure(s.best().mean_auc < raw.best().mean_auc && t.p_value < 0.05, || {
            format!("{prep} {:.1} vs raw {:.1}, p {:.3e}", s.best().mean_auc, raw.best().mean_auc, t.p_value)
        })?;
        parts.push(format!("{prep} {:.1} (p {:.2e})", s.best().mean_auc, t.p_value));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30 * 60), || format!("took {elapsed:?}"))?;
    Ok(format!("best mean AUC: {}; {elapsed:.0?}", parts.join(", ")))
}

struct PredictionSweeps {
    raw: SweepResult,
    tile: SweepResult,
}

fn prediction_sweeps() -> Result<PredictionSweeps, String> {
    let raw_cfg = desk(Task::McPrediction, Preprocessing::Raw, true);
    let dataset = prepare_dataset(&raw_cfg).map_err(|e| e.to_string())?.ok_or("no dataset")?;
    ensure(dataset.len() == 500 && raw_cfg.dataset.walk_steps == 100_000, || "unexpected dataset shape".into())?;
    Ok(PredictionSweeps {
        raw: sweep(&raw_cfg, Some(&dataset))?,
        tile: sweep(&desk(Task::McPrediction, Preprocessing::Tilecode, true), Some(&dataset))?,
    })
}

fn final_smoothed(s: &SweepResult) -> Vec<f64> {
    s.best()
        .records
        .iter()
        .map(|r| *smooth(&r.per_episode, 10).unwrap().last().unwrap())
        .collect()
}

fn claim_b(p: &PredictionSweeps) -> Result<String, String> {
    let (fr, ft) = (final_smoothed(&p.raw), final_smoothed(&p.tile));
    let t = two_sample_ttest(&ft, &fr).map_err(|e| e.to_string())?;
    ensure(mean(&ft) < mean(&fr) && t.p_value < 0.05, || {
        format!("final RVE tilecode {:.3} vs raw {:.3}, p {:.3e}", mean(&ft), mean(&fr), t.p_value)
    })?;
    let pi = |s: &SweepResult| -> Vec<f64> { s.best().records.iter().filter_map(|r| r.time_averaged_interference()).collect() };
    let (pr, pt) = (pi(&p.raw), pi(&p.tile));
    ensure(pr.len() == 10 && pt.len() == 10, || "missing interference snapshots".into())?;
    ensure(mean(&pt) < mean(&pr), || format!("interference tilecode {:.4} vs raw {:.4}", mean(&pt), mean(&pr)))?;
    Ok(format!(
        "final RVE tilecode {:.3} < raw {:.3} (p {:.2e}); interference tilecode {:.4} < raw {:.4}",
        mean(&ft),
        mean(&fr),
        t.p_value,
        mean(&pt),
        mean(&pr)
    ))
}

fn claim_c(p: &PredictionSweeps) -> Result<String, String> {
    let (raw, tile) = (p.raw.sensitivity(), p.tile.sensitivity());
    ensure(raw.len() == tile.len(), || "slices differ in length".into())?;
    let mut csv = String::from("step_size,raw_mean_auc,raw_stderr,raw_diverged,tilecode_mean_auc,tilecode_stderr,tilecode_diverged\n");
    let (mut compared, mut failures) = (0, Vec::new());
    for (a, b) in raw.iter().zip(&tile) {
        ensure(a.params.step_size == b.params.step_size, || "step sizes misaligned".into())?;
        let div = |s: &tdlab::harness::SettingResult| s.records.iter().filter(|r| r.diverged).count();
        let (da, db) = (div(a), div(b));
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            a.params.step_size, a.mean_auc, a.stderr, da, b.mean_auc, b.stderr, db
        ));
        if da == 0 && db == 0 {
            compared += 1;
            if b.mean_auc > a.mean_auc {
                failures.push(format!("alpha {}: tilecode {} > raw {}", a.params.step_size, b.mean_auc, a.mean_auc));
            }
        }
    }
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("sensitivity_mc_prediction_sgd.csv");
    std::fs::write(&out, &csv).map_err(|e| e.to_string())?;
    print!("{csv}");
    ensure(compared > 0, || "no step size free of divergence".into())?;
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("tilecode <= raw at all {compared} non-divergent step sizes; full CSV above and at {}", out.display()))
}

// ---------------------------------------------------------------------------
// 10

fn tdlab(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tdlab"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("tdlab {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for n in names {
        let x = std::fs::read(a.join(n)).map_err(|e| format!("{n}: {e}"))?;
        let y = std::fs::read(b.join(n)).map_err(|e| format!("{n}: {e}"))?;
        ensure(x == y, || format!("{n} differs between {} and {}", a.display(), b.display()))?;
    }
    Ok(())
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let run = [
        "run", "--task", "mc_control", "--preprocessing", "tilecode", "--system", "adam_er_tn", "--runs", "3",
        "--episodes", "4", "--step-size", "0.001", "--beta1", "0.9", "--beta2", "0.999", "--seed", "11",
    ];
    tdlab(&[&run[..], &["--out", &d("run1")]].concat())?;
    tdlab(&[&run[..], &["--out", &d("run2")]].concat())?;
    same_files(&dir.path().join("run1"), &dir.path().join("run2"), &["runs.csv", "learning_curve.csv", "aucs.csv"])?;

    let sweep = [
        "interference", "--preprocessing", "discretize", "--system", "sgd_er", "--runs", "3", "--episodes", "12",
        "--step-sizes", "0.01,0.001", "--walk-steps", "3000", "--samples", "40",
    ];
    tdlab(&[&sweep[..], &["--workers", "1", "--out", &d("w1")]].concat())?;
    tdlab(&[&sweep[..], &["--workers", "8", "--out", &d("w8")]].concat())?;
    same_files(
        &dir.path().join("w1"),
        &dir.path().join("w8"),
        &["sweep.csv", "sensitivity.csv", "learning_curve.csv", "interference.csv", "runs.csv", "aucs.csv"],
    )?;
    Ok("repeated run byte-identical; --workers 1 and 8 sweeps byte-identical".into())
}

// ---------------------------------------------------------------------------
// 11

fn schedule() -> Result<String, String> {
    let want: Vec<usize> = [0, 1, 5, 10].into_iter().chain((25..=500).step_by(25)).collect();
    ensure(interference_schedule(500) == want, || format!("schedule {:?}", interference_schedule(500)))?;

    let mut cfg = ExperimentConfig::profile(Profile::Desk, Task::McPrediction, Preprocessing::Raw, System::Sgd);
    cfg.episodes = 500;
    cfg.measure_interference = true;
    cfg.dataset.walk_steps = 2000;
    cfg.dataset.sample_size = 16;
    let ds = prepare_dataset(&cfg).map_err(|e| e.to_string())?.ok_or("no dataset")?;
    let rec = run_single(&cfg, cfg.settings()[4], 0, Some(&ds)).map_err(|e| e.to_string())?;
    let got: Vec<usize> = rec.snapshots.ok_or("no snapshots")?.iter().map(|s| s.episode_index).collect();
    ensure(got == want, || format!("run snapshots at {got:?}"))?;
    Ok(format!("{} snapshots at 0, 1, 5, 10, 25, 50, ..., 500", want.len()))
}

// ---------------------------------------------------------------------------

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wants = |n: u32| selected.is_empty() || selected.contains(&n);

    let mut checks: Vec<(u32, &str, Check)> = vec![
        (1, "gradient correctness", gradient_correctness),
        (2, "feature coder exactness", feature_coders),
        (3, "environment conformance", environments),
        (4, "interference oracle equivalence", interference_oracle),
        (5, "value error oracle equivalence", rve_oracle),
        (6, "statistics fixtures", statistics),
        (7, "desk claim A: control learning speed", claim_a),
    ];
    checks.retain(|c| wants(c.0));
    let mut failed = 0;
    let mut report = |n: u32, name: &str, res: Result<String, String>, t: Duration| {
        match res {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail} [{t:.1?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {why} [{t:.1?}]");
            }
        }
    };
    for (n, name, f) in checks {
        let t = Instant::now();
        let res = f();
        report(n, name, res, t.elapsed());
    }
    if wants(8) || wants(9) {
        let t = Instant::now();
        match prediction_sweeps() {
            Ok(p) => {
                if wants(8) {
                    report(8, "desk claim B: prediction error and interference", claim_b(&p), t.elapsed());
                }
                if wants(9) {
                    report(9, "desk claim C: step-size sensitivity", claim_c(&p), t.elapsed());
                }
            }
            Err(e) => {
                for n in [8, 9].into_iter().filter(|&n| wants(n)) {
                    report(n, "prediction claims", Err(e.clone()), t.elapsed());
                }
            }
        }
    }
    let later: Vec<(u32, &str, Check)> = vec![(10, "determinism", determinism), (11, "schedule fidelity", schedule)];
    for (n, name, f) in later.into_iter().filter(|c| wants(c.0)) {
        let t = Instant::now();
        let res = f();
        report(n, name, res, t.elapsed());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
