//! Acceptance suite. Prints one PASS/FAIL line per criterion. Set
//! `PSPD_ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.
//!
//! Run alone with `cargo test -p pspd-cli --test acceptance`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pspd::metrics::{ece, nll};
use pspd::model::{backward, evaluate_objective, Distillation, WeightedObjective};
use pspd::numerics::softmax;
use pspd::regularizer::{closed_form_weight, oracle_weight};
use pspd::{
    auc, generate_synthetic, optimizer_step, train_with_observer, Ablation, BatchSchedule, Dataset, DenseMatrix,
    ModelParameters, OptimizerState, PaceSchedule, ProbabilityVector, RegularizerKind, SampleWeighting,
    SyntheticSpec, TeacherSnapshot, TrainConfig, TrainObserver,
};
use pspd_cli::config::Overrides;
use pspd_cli::{load_config, run_ablation, run_experiment, RunOptions};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kinds() -> [RegularizerKind; 2] {
    RegularizerKind::ALL
}

// ---------------------------------------------------------------------------
// 1. closed form against the grid oracle

fn closed_form_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let steps = 100_000; // grid spacing 1e-5
    let (mut max_dw, mut max_gap) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let kind = kinds()[rng.random_range(0..2)];
        let lambda: f64 = rng.random_range(0.01..10.0);
        let loss = rng.random_range(0.0..=3.0 * lambda);
        let exact = closed_form_weight(kind, loss, lambda).map_err(|e| e.to_string())?;
        let grid = oracle_weight(kind, loss, lambda, steps).map_err(|e| e.to_string())?;
        max_dw = max_dw.max((exact.weight - grid.weight).abs());
        max_gap = max_gap.max(exact.objective_value - grid.objective_value);
    }
    ensure(
        max_dw <= 2e-5 && max_gap <= 1e-9,
        format!("1000 cases: max |Δw| = {max_dw:.2e} (≤ 2e-5), max objective excess = {max_gap:.2e} (≤ 1e-9)"),
    )
}

// ---------------------------------------------------------------------------
// 2. monotonicity of the weights

fn weights_are_monotone() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let w = |k, l, lambda| closed_form_weight(k, l, lambda).unwrap().weight;
    for _ in 0..10_000 {
        let kind = kinds()[rng.random_range(0..2)];
        let lambda: f64 = rng.random_range(0.01..5.0);
        let (a, b): (f64, f64) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        let (lo, hi) = (a.min(b), a.max(b));
        if w(kind, lo, lambda) < w(kind, hi, lambda) {
            violations += 1;
        }
        let loss = rng.random_range(0.0..10.0);
        let (l1, l2): (f64, f64) = (rng.random_range(0.01..10.0), rng.random_range(0.01..10.0));
        if w(kind, loss, l1.min(l2)) > w(kind, loss, l1.max(l2)) {
            violations += 1;
        }
    }
    ensure(
        violations == 0,
        format!("10000 pairs in loss and 10000 in pace: {violations} violations"),
    )
}

// ---------------------------------------------------------------------------
// 3. gradients against central finite differences

#[derive(Clone, Copy, Debug)]
enum Objective {
    CrossEntropy,
    Distill,
    Mixed,
}

/// Per-coordinate comparison for one random network.
struct Comparison {
    analytic: f64,
    numeric: f64,
    objective: f64,
}

impl Comparison {
    fn relative_error(&self) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(self.numeric.abs()).max(1e-8)
    }
}

fn compare_gradients(seed: u64, objective: Objective) -> Vec<Comparison> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=3);
    let mut sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    let classes = rng.random_range(2..=4);
    sizes.push(classes);
    let count = ModelParameters::zeros(&sizes).unwrap().parameter_count();
    let flat: Vec<f64> = (0..count).map(|_| rng.random_range(-1.0..1.0)).collect();
    let params = ModelParameters::from_flat(&sizes, &flat).unwrap();
    let n = rng.random_range(1..=6);
    let x = DenseMatrix::new(n, sizes[0], (0..n * sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let teacher: Vec<ProbabilityVector> = (0..n)
        .map(|_| softmax(&(0..classes).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>()).unwrap())
        .collect();
    let (w, phi, gamma): (Vec<f64>, Vec<f64>, f64) = match objective {
        Objective::CrossEntropy => (vec![1.0; n], vec![0.0; n], 0.0),
        Objective::Distill => (vec![0.0; n], vec![1.0; n], 1.0),
        Objective::Mixed => (
            (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
            (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
            rng.random_range(0.1..2.0),
        ),
    };
    let obj = WeightedObjective {
        labels: &labels,
        sample_weights: &w,
        distillation: Some(Distillation {
            teacher_probs: &teacher,
            weights: &phi,
            gamma,
        }),
    };
    let analytic = backward(&params, &x, &obj).unwrap().gradient.to_flat();
    let value = evaluate_objective(&params, &x, &obj).unwrap();
    let h = 1e-6;
    (0..flat.len())
        .map(|k| {
            let at = |delta: f64| {
                let mut shifted = flat.clone();
                shifted[k] += delta;
                evaluate_objective(&ModelParameters::from_flat(&sizes, &shifted).unwrap(), &x, &obj).unwrap()
            };
            Comparison {
                analytic: analytic[k],
                numeric: (at(h) - at(-h)) / (2.0 * h),
                objective: value,
            }
        })
        .collect()
}

// A central difference over 2h cannot resolve slopes finer than one ulp of
// the objective divided by 2h. Misses are reported in these steps so a
// failure can be told apart from a wrong derivative.
fn resolution(c: &Comparison) -> f64 {
    c.objective.abs().max(f64::MIN_POSITIVE) * f64::EPSILON / 2e-6
}

fn gradients_match_finite_differences() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for objective in [Objective::CrossEntropy, Objective::Distill, Objective::Mixed] {
        let all: Vec<Comparison> = (0..100).flat_map(|s| compare_gradients(1000 + s, objective)).collect();
        let worst = all.iter().max_by(|a, b| a.relative_error().total_cmp(&b.relative_error())).unwrap();
        let misses: Vec<&Comparison> = all.iter().filter(|c| c.relative_error() > 1e-4).collect();
        let miss_in_steps = misses
            .iter()
            .map(|c| (c.analytic - c.numeric).abs() / resolution(c))
            .fold(0.0, f64::max);
        ok &= misses.is_empty();
        let mut part = format!(
            "{objective:?} worst {:.2e} at |g| = {:.1e} ({} of {} coordinates over)",
            worst.relative_error(),
            worst.analytic.abs(),
            misses.len(),
            all.len()
        );
        if !misses.is_empty() {
            part += &format!(", every miss within {miss_in_steps:.1} oracle steps");
        }
        parts.push(part);
    }
    ensure(ok, format!("100 networks each, relative error ≤ 1e-4 with step 1e-6: {}", parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 4-6. training loop

fn noisy(n: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        n,
        d: 5,
        class_count: 2,
        class_separation: 2.0,
        noise_rate: 0.2,
        seed,
    })
    .unwrap()
}

#[derive(Default)]
struct Recorder {
    ends: Vec<ModelParameters>,
    teachers: Vec<Option<TeacherSnapshot>>,
    lambdas: Vec<(f64, f64)>,
    nonzero_w: Vec<usize>,
    max_loss: Vec<f64>,
}

impl TrainObserver<f64> for Recorder {
    fn epoch_start(&mut self, _: usize, _: &ModelParameters, teacher: Option<&TeacherSnapshot>, w: &SampleWeighting) {
        self.teachers.push(teacher.cloned());
        self.lambdas.push((w.lambda_w, w.lambda_phi));
        self.nonzero_w.push(w.pcl_weights.iter().filter(|&&x| x != 0.0).count());
        self.max_loss.push(w.pcl_losses.iter().copied().fold(0.0, f64::max));
    }

    fn epoch_end(&mut self, _: usize, student: &ModelParameters) {
        self.ends.push(student.clone());
    }
}

fn small_config(epochs: usize, ablation: Ablation) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        hidden_layers: vec![8],
        seed: 21,
        ablation,
        ..TrainConfig::default()
    }
}

fn algorithm_fidelity() -> Check {
    let data = noisy(150, 4);
    let config = small_config(20, Ablation::Full);
    let mut rec = Recorder::default();
    let outcome = train_with_observer(&config, &data, None, &mut rec).map_err(|e| e.to_string())?;
    let first_kl = outcome.trace.records[0].kl_evaluations;
    let teacher_ok = rec.teachers[0].is_none()
        && (1..config.epochs).all(|e| {
            rec.teachers[e]
                .as_ref()
                .is_some_and(|t| t.source_epoch() == e && t.params().bitwise_eq(&rec.ends[e - 1]))
        });
    let pace_ok = rec
        .lambdas
        .iter()
        .enumerate()
        .all(|(t, &(lw, lp))| lw == 0.6 + 0.006 * t as f64 && lp == 0.8 + 0.003 * t as f64);
    ensure(
        first_kl == 0 && teacher_ok && pace_ok,
        format!(
            "(a) epoch-1 KL evaluations = {first_kl}; (b) teacher = previous student bitwise for epochs 2..={}: {teacher_ok}; (c) paces exact at 0.6/0.006 and 0.8/0.003: {pace_ok}",
            config.epochs
        ),
    )
}

fn baseline_matches_plain_loop() -> Check {
    let data = noisy(160, 5);
    let config = small_config(10, Ablation::Baseline);
    let mut rec = Recorder::default();
    train_with_observer(&config, &data, None, &mut rec).map_err(|e| e.to_string())?;

    let sizes = config.layer_sizes(data.feature_count(), data.class_count());
    let mut params = ModelParameters::glorot_uniform(&sizes, config.seed).unwrap();
    let mut adam = OptimizerState::new(&params, config.adam);
    let mut batches = BatchSchedule::new(config.seed);
    let mut first_mismatch = None;
    for epoch in 0..config.epochs {
        let lr = config.lr_schedule.lr_at(epoch);
        for chunk in batches.next_epoch(data.len()).chunks(config.batch_size) {
            let x = data.features().select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let ones = vec![1.0; chunk.len()];
            let obj = WeightedObjective { labels: &y, sample_weights: &ones, distillation: None };
            let g = backward(&params, &x, &obj).unwrap().gradient;
            optimizer_step(&mut params, &mut adam, &g, lr).unwrap();
        }
        if first_mismatch.is_none() && !params.bitwise_eq(&rec.ends[epoch]) {
            first_mismatch = Some(epoch + 1);
        }
    }
    match first_mismatch {
        None => Ok(format!("{} epochs, all parameters bitwise equal after every epoch", config.epochs)),
        Some(e) => Err(format!("trajectories differ from epoch {e}")),
    }
}

fn curriculum_growth() -> Check {
    let data = noisy(300, 6);
    let mut details = Vec::new();
    let mut ok = true;
    for kind in kinds() {
        let config = TrainConfig {
            frozen: true,
            pcl_kind: kind,
            pcl_schedule: PaceSchedule::new(0.6, 0.1).unwrap(),
            ..small_config(50, Ablation::PclOnly)
        };
        let mut rec = Recorder::default();
        train_with_observer(&config, &data, None, &mut rec).map_err(|e| e.to_string())?;
        let monotone = rec.nonzero_w.windows(2).all(|p| p[0] <= p[1]);
        let past: Vec<usize> = (0..rec.lambdas.len()).filter(|&e| rec.lambdas[e].0 > rec.max_loss[e]).collect();
        let full = past.iter().all(|&e| rec.nonzero_w[e] == data.len());
        ok &= monotone && full && !past.is_empty();
        details.push(format!(
            "{kind}: {} -> {} of {} non-decreasing={monotone}, all selected in the {} epochs past the max loss={full}",
            rec.nonzero_w[0],
            rec.nonzero_w[49],
            data.len(),
            past.len()
        ));
    }
    ensure(ok, details.join("; "))
}

// ---------------------------------------------------------------------------
// 7. directional reproduction at desk scale

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml")
}

fn desk_scale_reproduction() -> Check {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let overrides = Overrides {
        output_dir: Some(out.path().to_path_buf()),
        ..Overrides::default()
    };
    let loaded = load_config(&desk_config(), &overrides).map_err(|e| e.to_string())?;
    let outcome = run_ablation(&loaded, RunOptions::default()).map_err(|e| e.to_string())?;
    let folds = loaded.config.folds;
    let mean = |arm: Ablation, f: fn(&pspd::MetricsReport) -> f64| {
        (0..folds).map(|k| f(&outcome.arm(k, arm).unwrap().test)).sum::<f64>() / folds as f64
    };
    let acc = |r: &pspd::MetricsReport| r.acc;
    let nll_of = |r: &pspd::MetricsReport| r.nll;
    let (full_acc, base_acc) = (mean(Ablation::Full, acc), mean(Ablation::Baseline, acc));
    let (full_nll, base_nll) = (mean(Ablation::Full, nll_of), mean(Ablation::Baseline, nll_of));
    let wins = (0..folds)
        .filter(|&k| {
            let a = |arm| outcome.arm(k, arm).unwrap().test.acc;
            a(Ablation::Full) >= a(Ablation::PclOnly).max(a(Ablation::PcdOnly))
        })
        .count();
    ensure(
        full_acc >= base_acc && full_nll <= base_nll + 0.01 && wins >= 3,
        format!(
            "{folds} seeds: acc Full {full_acc:.4} vs Baseline {base_acc:.4}; NLL Full {full_nll:.4} vs Baseline {base_nll:.4} (+0.01); Full ≥ max(PclOnly, PcdOnly) in {wins}/{folds}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. metrics and CLI determinism

fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for (_, &sp) in scores.iter().enumerate().filter(|&(i, _)| positive[i]) {
        for (j, &sn) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1;
            twice_wins += if sp > sn { 2 } else if sp == sn { 1 } else { 0 };
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

fn probs(rows: &[[f64; 2]]) -> Vec<ProbabilityVector> {
    rows.iter().map(|r| ProbabilityVector::new(r.to_vec()).unwrap()).collect()
}

fn result_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "manifest.json" {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn metric_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut auc_mismatches = 0;
    let mut sets = 0;
    while sets < 200 {
        let n = rng.random_range(2..=12);
        // Scores on a coarse grid so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
        let positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
            continue;
        }
        sets += 1;
        if auc(&scores, &positive).unwrap() != pairwise_auc(&scores, &positive) {
            auc_mismatches += 1;
        }
    }

    let mut fixture_errors = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > 1e-9 {
            fixture_errors.push(format!("{name}: {got} vs {want}"));
        }
    };
    let calibrated = probs(&[[0.8, 0.2]; 10]);
    let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 8)).collect();
    check("ece calibrated", ece(&calibrated, &labels, 10).unwrap(), 0.0);
    let sure = probs(&[[1.0, 0.0]; 4]);
    check("ece overconfident", ece(&sure, &[0, 1, 0, 1], 10).unwrap(), 0.5);
    let two_bins = probs(&[[0.95, 0.05], [0.95, 0.05], [0.35, 0.65], [0.35, 0.65]]);
    // bins (0.9,1]: acc 1/2 conf 0.95; (0.6,0.7]: acc 1/2 conf 0.65
    check("ece two bins", ece(&two_bins, &[0, 1, 1, 0], 10).unwrap(), 0.5 * 0.45 + 0.5 * 0.15);
    check("nll one-hot", nll(&probs(&[[1.0, 0.0], [0.0, 1.0]]), &[0, 1]).unwrap(), 0.0);
    check("nll uniform", nll(&probs(&[[0.5, 0.5]; 3]), &[0, 1, 1]).unwrap(), std::f64::consts::LN_2);
    check("nll single", nll(&probs(&[[0.25, 0.75]]), &[1]).unwrap(), -(0.75f64.ln()));

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("tiny.toml");
    fs::write(
        &config,
        "folds = 2\n[data]\nsource = \"synthetic\"\nn = 150\nd = 4\nclass_count = 2\nclass_separation = 2.0\nnoise_rate = 0.2\nseed = 1\n[train]\nepochs = 5\nhidden_layers = [8]\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (name, threads) in [("first", Some(1)), ("second", Some(3))] {
        let overrides = Overrides {
            output_dir: Some(tmp.path().join(name)),
            ..Overrides::default()
        };
        let loaded = load_config(&config, &overrides).map_err(|e| e.to_string())?;
        run_experiment(&loaded, RunOptions { threads }).map_err(|e| e.to_string())?;
        outputs.push(result_files(&tmp.path().join(name)));
    }
    let deterministic = !outputs[0].is_empty() && outputs[0] == outputs[1];

    ensure(
        auc_mismatches == 0 && fixture_errors.is_empty() && deterministic,
        format!(
            "auc exact on {sets} sets ({auc_mismatches} mismatches); ece/nll fixtures within 1e-9{}; two runs byte-identical ({} files): {deterministic}",
            if fixture_errors.is_empty() { String::new() } else { format!(" FAILED [{}]", fixture_errors.join(", ")) },
            outputs[0].len()
        ),
    )
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: &'static str,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { id: "AC1", name: "closed form vs grid oracle", limit: Some(Duration::from_secs(5)), run: closed_form_matches_oracle },
        Criterion { id: "AC2", name: "weight monotonicity", limit: None, run: weights_are_monotone },
        Criterion { id: "AC3", name: "gradient check", limit: Some(Duration::from_secs(30)), run: gradients_match_finite_differences },
        Criterion { id: "AC4", name: "training loop fidelity", limit: None, run: algorithm_fidelity },
        Criterion { id: "AC5", name: "baseline vs plain loop", limit: None, run: baseline_matches_plain_loop },
        Criterion { id: "AC6", name: "curriculum growth (frozen model)", limit: None, run: curriculum_growth },
        Criterion { id: "AC7", name: "desk-scale ablation trends", limit: Some(Duration::from_secs(600)), run: desk_scale_reproduction },
        Criterion { id: "AC8", name: "metrics and CLI determinism", limit: None, run: metric_correctness },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let late = c.limit.is_some_and(|l| elapsed > l);
        let (status, detail) = match (&result, late) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; took longer than {:?}", c.limit.unwrap())),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{} {status} {} [{:.2}s]: {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    // Failures are reported, not fatal, unless asked for.
    if failed > 0 && std::env::var_os("PSPD_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
