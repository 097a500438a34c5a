//! Acceptance gate. Each test covers one release criterion end to end and
//! prints a single pass/fail line (shown under `--nocapture`); the test
//! verdict carries the same information either way. Trend criteria run the
//! shipped benchmark configs under configs/ at their fixed seeds, so every
//! number here is deterministic.

use std::collections::HashSet;
use std::sync::OnceLock;

use pu_forge::commands::{self, Method, SeedRun};
use pu_forge::config::ExperimentConfig;
use pu_forge::eval::compute_metrics;
use pu_forge::loss::{finite_difference_gradient, LossBatch};
use pu_forge::model::Model;
use pu_forge::pseudo::mix_pairs;
use pu_forge::pspu::{pkt_transfer, train_baseline, train_pspu, PSPUConfig};
use pu_forge::risk::{nnpu_risk, pu_loss_batch, upu_risk, Estimator, RiskConfig};
use pu_forge::rng::StreamRng;
use pu_forge::ssl::{ps_loss_batch, SSLConfig};

fn report(num: usize, name: &str, failures: Vec<String>) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {num} ({name}): {verdict}");
    assert!(
        failures.is_empty(),
        "criterion {num} ({name}):\n  {}",
        failures.join("\n  ")
    );
}

fn benchmark_cfg(extra: &str) -> ExperimentConfig {
    let text = format!("{}{extra}", include_str!("../../../configs/benchmark.conf"));
    let cfg = ExperimentConfig::parse_str(&text).expect("benchmark config parses");
    cfg.validate().expect("benchmark config validates");
    cfg
}

fn extreme_cfg() -> ExperimentConfig {
    let cfg = ExperimentConfig::parse_str(include_str!("../../../configs/extreme.conf"))
        .expect("extreme config parses");
    cfg.validate().expect("extreme config validates");
    cfg
}

fn runs_for(cfg: &ExperimentConfig, method: Method) -> Vec<SeedRun> {
    cfg.run
        .seeds
        .iter()
        .map(|&s| commands::run_seed(cfg, method, s).expect("seed run succeeds"))
        .collect()
}

/// The stock benchmark PSPU runs triple as the pseudo-mixup, pkt, and r=1.0
/// ablation arms, so they are computed once and shared.
fn bench_pspu_runs() -> &'static [SeedRun] {
    static RUNS: OnceLock<Vec<SeedRun>> = OnceLock::new();
    RUNS.get_or_init(|| runs_for(&benchmark_cfg(""), Method::Pspu))
}

fn extreme_nnpu_runs() -> &'static [SeedRun] {
    static RUNS: OnceLock<Vec<SeedRun>> = OnceLock::new();
    RUNS.get_or_init(|| runs_for(&extreme_cfg(), Method::Nnpu))
}

fn mean_final_f1(method: Method, runs: &[SeedRun], classifier: &str) -> f64 {
    commands::summarize(method, runs).mean[classifier].f1
}

fn final_f1s(method: Method, runs: &[SeedRun], classifier: &str) -> Vec<f64> {
    commands::summarize(method, runs)
        .seeds
        .iter()
        .map(|s| s.finals[classifier].f1)
        .collect()
}

fn standard_error(vals: &[f64]) -> f64 {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (var / n).sqrt()
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Straight-line reimplementation of both risk totals: per-example sigmoid
/// losses in an outer loop over sets, inner loop over rows.
fn oracle_totals(model: &Model, d_p: &[Vec<f64>], d_u: &[Vec<f64>], prior: f64) -> (f64, f64) {
    let loss = |z: f64, y: f64| 1.0 / (1.0 + (y * z).exp());
    let mut r_p_pos = 0.0;
    let mut r_p_neg = 0.0;
    for x in d_p {
        let z = model.forward(x).unwrap();
        r_p_pos += loss(z, 1.0);
        r_p_neg += loss(z, -1.0);
    }
    r_p_pos /= d_p.len() as f64;
    r_p_neg /= d_p.len() as f64;
    let mut r_u_neg = 0.0;
    for x in d_u {
        r_u_neg += loss(model.forward(x).unwrap(), -1.0);
    }
    r_u_neg /= d_u.len() as f64;
    let negative = r_u_neg - prior * r_p_neg;
    let upu = prior * r_p_pos + negative;
    let nnpu = prior * r_p_pos + negative.max(0.0);
    (upu, nnpu)
}

/// Scalar identity network: relu(x) - relu(-x) = x, so logits equal inputs.
fn identity_model() -> Model {
    Model::from_params(&[1, 2, 1], vec![1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0]).unwrap()
}

#[test]
fn criterion_1_estimator_correctness() {
    let mut failures = Vec::new();
    let mut rng = StreamRng::new(2024, "acceptance/estimator");
    for instance in 0..200 {
        let dim = 1 + rng.below(4);
        let hidden = 2 + rng.below(5);
        let model = Model::init(&[dim, hidden, 1], &mut rng).unwrap();
        let draw = |rng: &mut StreamRng, n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect())
                .collect()
        };
        let n_p = 1 + rng.below(100);
        let d_p = draw(&mut rng, n_p);
        let n_u = 1 + rng.below(100);
        let d_u = draw(&mut rng, n_u);
        let prior = rng.uniform(0.05, 0.95);
        let cfg = RiskConfig::new(prior).unwrap();
        let (want_upu, want_nnpu) = oracle_totals(&model, &d_p, &d_u, prior);
        let got_upu = upu_risk(&model, &d_p, &d_u, &cfg).unwrap().total;
        let got_nnpu = nnpu_risk(&model, &d_p, &d_u, &cfg).unwrap().total;
        if (got_upu - want_upu).abs() > 1e-9 {
            failures.push(format!(
                "instance {instance}: upu {got_upu} vs oracle {want_upu}"
            ));
        }
        if (got_nnpu - want_nnpu).abs() > 1e-9 {
            failures.push(format!(
                "instance {instance}: nnpu {got_nnpu} vs oracle {want_nnpu}"
            ));
        }
    }

    // Clamp example: one positive at logit +3, two unlabeled at -3, prior 0.5.
    // The negative part is -0.4289, so nnpu clamps while upu goes negative.
    let model = identity_model();
    let d_p = vec![vec![3.0]];
    let d_u = vec![vec![-3.0], vec![-3.0]];
    let cfg = RiskConfig::new(0.5).unwrap();
    let nnpu = nnpu_risk(&model, &d_p, &d_u, &cfg).unwrap().total;
    let upu = upu_risk(&model, &d_p, &d_u, &cfg).unwrap().total;
    if (nnpu - 0.02371).abs() > 1e-4 {
        failures.push(format!("clamp example: nnpu {nnpu} vs 0.02371"));
    }
    if (upu - (-0.40514)).abs() > 1e-4 {
        failures.push(format!("clamp example: upu {upu} vs -0.40514"));
    }
    report(1, "estimator correctness", failures);
}

fn fd_check(model: &Model, batch: &LossBatch, what: &str, failures: &mut Vec<String>) {
    let (_, analytic) = batch.gradient(model).unwrap();
    let fd = finite_difference_gradient(model, batch, 1e-5).unwrap();
    for (i, (a, f)) in analytic.iter().zip(fd.iter()).enumerate() {
        let scale = 1.0_f64.max(a.abs()).max(f.abs());
        if (a - f).abs() > 1e-4 * scale {
            failures.push(format!("{what}: coordinate {i} analytic {a} vs fd {f}"));
        }
    }
}

#[test]
fn criterion_2_gradient_integrity() {
    let mut failures = Vec::new();
    let mut rng = StreamRng::new(31, "acceptance/fd");

    // 15 nnpu + 5 upu instances on random data (the nnpu ones land in the
    // plain branch; random draws keep the negative part positive).
    for trial in 0..20 {
        let model = Model::init(&[2, 4, 1], &mut rng).unwrap();
        let scale = 1.0 + (trial % 5) as f64;
        let draw = |rng: &mut StreamRng, n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..2).map(|_| rng.standard_normal() * scale).collect())
                .collect()
        };
        let d_p = draw(&mut rng, 3);
        let d_u = draw(&mut rng, 4);
        let cfg = RiskConfig::new(rng.uniform(0.1, 0.9)).unwrap();
        let estimator = if trial < 15 { Estimator::Nnpu } else { Estimator::Upu };
        let (_, batch) = pu_loss_batch(&model, &d_p, &d_u, &cfg, estimator).unwrap();
        fd_check(&model, &batch, &format!("{estimator} trial {trial}"), &mut failures);
    }

    // 5 constructed defect-branch instances: the identity network with a
    // confident positive and very negative unlabeled logits drives the
    // negative part below zero, exercising the correction step's gradient.
    for trial in 0..5 {
        let model = identity_model();
        let t = trial as f64;
        let d_p = vec![vec![4.0 + t]];
        let d_u = vec![vec![-4.0 - t], vec![-3.0 - t]];
        let cfg = RiskConfig::new(0.5).unwrap();
        let (breakdown, batch) =
            pu_loss_batch(&model, &d_p, &d_u, &cfg, Estimator::Nnpu).unwrap();
        assert!(
            breakdown.negative_part < 0.0,
            "defect construction must engage the correction branch"
        );
        fd_check(&model, &batch, &format!("defect trial {trial}"), &mut failures);
    }

    // 25 pseudo-supervised instances with all three loss groups active
    // (w_c > 0 keeps the feature-consistency terms in the batch).
    let cfg = SSLConfig::default();
    assert!(cfg.w_u > 0.0 && cfg.w_c > 0.0);
    for trial in 0..25 {
        let model = Model::init(&[3, 4, 1], &mut rng).unwrap();
        let labeled: Vec<(Vec<f64>, f64)> = (0..3)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect();
                (x, rng.uniform(-1.0, 1.0))
            })
            .collect();
        let unlabeled: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect())
            .collect();
        let batch = ps_loss_batch(&model, &labeled, &unlabeled, &cfg, &mut rng).unwrap();
        fd_check(&model, &batch, &format!("ps trial {trial}"), &mut failures);
    }

    report(2, "gradient integrity", failures);
}

#[test]
fn criterion_3_risk_gap_trend() {
    let mut failures = Vec::new();
    let cfg = ExperimentConfig::parse_str("run.seeds = 0,1,2,3,4\n").unwrap();
    cfg.validate().unwrap();
    let mut grew = 0;
    for &seed in &cfg.run.seeds {
        let train = commands::build_train_set(&cfg, seed).unwrap();
        let test = commands::build_test_set(&cfg, seed).unwrap();
        let pcfg = cfg.pspu_for_seed(seed);
        assert_eq!(pcfg.estimator, Estimator::Nnpu);
        let out = train_baseline(&pcfg, &train, &test).unwrap();
        let first = out.gaps.first().unwrap().expect("hidden positives present");
        let last = out.gaps.last().unwrap().expect("hidden positives present");
        if last.gap > first.gap {
            grew += 1;
        }
    }
    if grew < 4 {
        failures.push(format!("risk gap grew in only {grew}/5 seeds"));
    }
    report(3, "risk-gap trend", failures);
}

#[test]
fn criterion_4_collapse_signature() {
    let mut failures = Vec::new();
    let cfg = extreme_cfg();
    let acc_floor = 1.0 - cfg.data.prior - 0.02;
    let mut collapsed = 0;
    for run in extreme_nnpu_runs() {
        let last = run.records.last().unwrap();
        if last.f1 < 0.1 {
            collapsed += 1;
            if last.acc < acc_floor {
                failures.push(format!(
                    "seed {}: collapsed with acc {:.4} below {acc_floor:.2}",
                    run.seed, last.acc
                ));
            }
        }
    }
    if collapsed < 3 {
        failures.push(format!("all-negative collapse in only {collapsed}/5 seeds"));
    }
    report(4, "collapse signature", failures);
}

#[test]
fn criterion_5_improvement_direction() {
    let mut failures = Vec::new();

    let imb_base = mean_final_f1(
        Method::Nnpu,
        &runs_for(&benchmark_cfg(""), Method::Nnpu),
        "g_pu",
    );
    let imb_pspu = mean_final_f1(Method::Pspu, bench_pspu_runs(), "g_ps");
    if imb_pspu < imb_base + 0.05 {
        failures.push(format!(
            "imbalanced: g_ps mean f1 {imb_pspu:.4} vs baseline {imb_base:.4} (need +0.05)"
        ));
    }

    let ext_base = mean_final_f1(Method::Nnpu, extreme_nnpu_runs(), "g_pu");
    let ext_pspu = mean_final_f1(
        Method::Pspu,
        &runs_for(&extreme_cfg(), Method::Pspu),
        "g_ps",
    );
    if ext_pspu < ext_base + 0.05 {
        failures.push(format!(
            "extreme: g_ps mean f1 {ext_pspu:.4} vs baseline {ext_base:.4} (need +0.05)"
        ));
    }

    report(5, "improvement direction", failures);
}

#[test]
fn criterion_6_ablation_directions() {
    let mut failures = Vec::new();

    let pseudo = mean_final_f1(Method::Pspu, bench_pspu_runs(), "g_ps");
    let vanilla = mean_final_f1(
        Method::Pspu,
        &runs_for(&benchmark_cfg("pspu.mixup = false\n"), Method::Pspu),
        "g_ps",
    );
    if pseudo < vanilla {
        failures.push(format!(
            "mixup: pseudo mean f1 {pseudo:.4} below vanilla {vanilla:.4}"
        ));
    }

    let independent = mean_final_f1(
        Method::Pspu,
        &runs_for(&benchmark_cfg("pspu.transfer = independent\n"), Method::Pspu),
        "g_ps",
    );
    if pseudo <= independent {
        failures.push(format!(
            "transfer: pkt mean f1 {pseudo:.4} not above independent {independent:.4}"
        ));
    }

    let r01 = runs_for(&benchmark_cfg("select.ratio = 0.1\n"), Method::Pspu);
    let r05 = runs_for(&benchmark_cfg("select.ratio = 0.5\n"), Method::Pspu);
    let m01 = mean_final_f1(Method::Pspu, &r01, "g_ps");
    let m05 = mean_final_f1(Method::Pspu, &r05, "g_ps");
    let m10 = pseudo;
    if m05 <= m01 {
        failures.push(format!("ratio: r=0.5 mean f1 {m05:.4} not above r=0.1 {m01:.4}"));
    }
    if m10 <= m01 {
        failures.push(format!("ratio: r=1.0 mean f1 {m10:.4} not above r=0.1 {m01:.4}"));
    }
    // r=0.5 and r=1.0 are expected to land close together; an inversion is
    // tolerated only within one standard error of the noisier arm.
    if m10 < m05 {
        let se = standard_error(&final_f1s(Method::Pspu, &r05, "g_ps"))
            .max(standard_error(&final_f1s(Method::Pspu, bench_pspu_runs(), "g_ps")));
        if m05 - m10 > se {
            failures.push(format!(
                "ratio: r=1.0 mean f1 {m10:.4} trails r=0.5 {m05:.4} by more than one se {se:.4}"
            ));
        }
    }

    report(6, "ablation directions", failures);
}

const MICRO: &str = "\
data.dim = 4
data.n_total = 120
data.prior = 0.3
data.n_labeled = 12
data.n_test = 60
model.hidden = 8
optim.batch_pu = 40
optim.batch_ps = 16
pspu.stop_e = 3
run.seeds = 0,1
";

#[test]
fn criterion_7_algebraic_identities() {
    let mut failures = Vec::new();
    let mut rng = StreamRng::new(9, "acceptance/algebra");

    // pkt endpoints and the exact convex combination, component by component.
    let a: Vec<f64> = (0..9).map(|_| rng.uniform(-2.0, 2.0)).collect();
    let b: Vec<f64> = (0..9).map(|_| rng.uniform(-2.0, 2.0)).collect();
    if !bits_equal(&pkt_transfer(&a, &b, 1.0).unwrap(), &a) {
        failures.push("pkt: lambda = 1 must return theta_pu bitwise".into());
    }
    if !bits_equal(&pkt_transfer(&a, &b, 0.0).unwrap(), &b) {
        failures.push("pkt: lambda = 0 must return theta_ps bitwise".into());
    }
    let lambda = 0.25;
    let blend = pkt_transfer(&a, &b, lambda).unwrap();
    let expect: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
        .collect();
    if !bits_equal(&blend, &expect) {
        failures.push("pkt: lambda = 0.25 blend is not the exact convex combination".into());
    }
    let step: f64 = blend
        .iter()
        .zip(&a)
        .map(|(n, o)| (n - o) * (n - o))
        .sum::<f64>()
        .sqrt();
    let span: f64 = b.iter().zip(&a).map(|(y, x)| (y - x) * (y - x)).sum::<f64>().sqrt();
    if (step - (1.0 - lambda) * span).abs() > 1e-12 * span.max(1.0) {
        failures.push(format!(
            "pkt: step norm {step} differs from (1-lambda) * span {}",
            (1.0 - lambda) * span
        ));
    }

    // Partition disjointness and coverage at every epoch of a full run.
    let cfg = ExperimentConfig::parse_str(MICRO).unwrap();
    cfg.validate().unwrap();
    let train = commands::build_train_set(&cfg, 0).unwrap();
    let test = commands::build_test_set(&cfg, 0).unwrap();
    let out = train_pspu(&cfg.pspu_for_seed(0), &train, &test).unwrap();
    let n_u = train.n_u();
    for art in &out.history {
        let p = &art.partition;
        p.audit(n_u).unwrap();
        let mut seen = HashSet::new();
        for &i in p.idx_p.iter().chain(&p.idx_n).chain(&p.idx_u) {
            if i >= n_u || !seen.insert(i) {
                failures.push(format!(
                    "partition: epoch {} index {i} repeated or out of range",
                    art.epoch
                ));
            }
        }
        if seen.len() != n_u {
            failures.push(format!(
                "partition: epoch {} covers {} of {n_u} unlabeled indices",
                art.epoch,
                seen.len()
            ));
        }
    }

    // Mixed examples reconstruct exactly from their recorded provenance.
    let d_up: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let d_un: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let set = mix_pairs(&d_up, &d_un, 0.75, 12, &mut rng).unwrap();
    for (k, e) in set.examples.iter().enumerate() {
        if !(0.0..=1.0).contains(&e.beta) || e.src_p >= d_up.len() || e.src_n >= d_un.len() {
            failures.push(format!("mixup: example {k} has invalid provenance"));
            continue;
        }
        let x: Vec<f64> = d_up[e.src_p]
            .iter()
            .zip(&d_un[e.src_n])
            .map(|(p, n)| e.beta * p + (1.0 - e.beta) * n)
            .collect();
        if !bits_equal(&e.x, &x) || e.y.to_bits() != (2.0 * e.beta - 1.0).to_bits() {
            failures.push(format!("mixup: example {k} does not reconstruct bitwise"));
        }
    }

    // The pseudo-supervised objective never sees the class prior: two configs
    // that differ only in risk.prior produce bit-identical losses/gradients.
    let mut cfg_a = PSPUConfig::default();
    cfg_a.risk = RiskConfig::new(0.1).unwrap();
    let mut cfg_b = PSPUConfig::default();
    cfg_b.risk = RiskConfig::new(0.45).unwrap();
    let model = Model::init(&[3, 4, 1], &mut rng).unwrap();
    let labeled = vec![(vec![0.3, -0.2, 1.0], 0.6), (vec![-1.0, 0.4, 0.1], -0.8)];
    let unlabeled = vec![vec![0.5, 0.5, -0.5], vec![-0.1, 0.9, 0.2]];
    let mut rng_a = StreamRng::new(17, "acceptance/prior");
    let mut rng_b = StreamRng::new(17, "acceptance/prior");
    let batch_a = ps_loss_batch(&model, &labeled, &unlabeled, &cfg_a.ssl, &mut rng_a).unwrap();
    let batch_b = ps_loss_batch(&model, &labeled, &unlabeled, &cfg_b.ssl, &mut rng_b).unwrap();
    let (va, ga) = batch_a.gradient(&model).unwrap();
    let (vb, gb) = batch_b.gradient(&model).unwrap();
    if va.to_bits() != vb.to_bits() || !bits_equal(&ga, &gb) {
        failures.push("prior invariance: ps objective changed with risk.prior".into());
    }

    // Independent-mode g_pu is bitwise the standalone baseline, epoch by epoch.
    let cfg_ind =
        ExperimentConfig::parse_str(&format!("{MICRO}pspu.transfer = independent\n")).unwrap();
    cfg_ind.validate().unwrap();
    let train = commands::build_train_set(&cfg_ind, 0).unwrap();
    let test = commands::build_test_set(&cfg_ind, 0).unwrap();
    let pcfg = cfg_ind.pspu_for_seed(0);
    let joint = train_pspu(&pcfg, &train, &test).unwrap();
    let alone = train_baseline(&pcfg, &train, &test).unwrap();
    if !bits_equal(joint.g_pu.params(), alone.model.params()) {
        failures.push("independent mode: final g_pu differs from the standalone run".into());
    }
    for (art, snap) in joint.history.iter().zip(&alone.snapshots) {
        if !bits_equal(&art.theta_pu_end, snap) {
            failures.push(format!(
                "independent mode: epoch {} g_pu differs from the standalone run",
                art.epoch
            ));
        }
    }

    // Same seed, same config: byte-identical artifacts on disk.
    let cfg = ExperimentConfig::parse_str(MICRO).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    commands::cmd_train(&cfg, Method::Pspu, Some(dir_a.path())).unwrap();
    commands::cmd_train(&cfg, Method::Pspu, Some(dir_b.path())).unwrap();
    for name in ["seed_0/metrics.csv", "seed_1/metrics.csv", "summary.json"] {
        let lhs = std::fs::read(dir_a.path().join(name)).unwrap();
        let rhs = std::fs::read(dir_b.path().join(name)).unwrap();
        if lhs != rhs {
            failures.push(format!("determinism: {name} differs between identical runs"));
        }
    }

    report(7, "algebraic identities", failures);
}

/// Exhaustive pair enumeration: +1 per positive ranked above a negative,
/// +0.5 per tie, normalized by n_pos * n_neg.
fn oracle_metrics(scores: &[f64], labels: &[f64], threshold: f64) -> (f64, f64, Option<f64>) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let acc = (tp + tn) as f64 / scores.len() as f64;
    let f1 = if tp == 0 {
        0.0
    } else {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fn_) as f64;
        2.0 * precision * recall / (precision + recall)
    };
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for (&sp, &lp) in scores.iter().zip(labels) {
        if lp != 1.0 {
            continue;
        }
        for (&sn, &ln) in scores.iter().zip(labels) {
            if ln != -1.0 {
                continue;
            }
            pairs += 1;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    let auc = (pairs > 0).then(|| wins / pairs as f64);
    (acc, f1, auc)
}

#[test]
fn criterion_8_metrics_correctness() {
    let mut failures = Vec::new();
    let mut rng = StreamRng::new(77, "acceptance/metrics");
    for instance in 0..20 {
        // Scores on a half-unit grid so ties actually occur.
        let (scores, labels) = loop {
            let n = 4 + rng.below(9);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.uniform(-2.0, 2.0) * 2.0).round() / 2.0)
                .collect();
            let labels: Vec<f64> = (0..n)
                .map(|_| if rng.bernoulli(0.4) { 1.0 } else { -1.0 })
                .collect();
            if labels.contains(&1.0) && labels.contains(&-1.0) {
                break (scores, labels);
            }
        };
        let (acc, f1, auc) = compute_metrics(&scores, &labels, 0.0).unwrap();
        let (want_acc, want_f1, want_auc) = oracle_metrics(&scores, &labels, 0.0);
        if acc != want_acc || f1 != want_f1 || auc != want_auc {
            failures.push(format!(
                "instance {instance}: got ({acc}, {f1}, {auc:?}), oracle ({want_acc}, {want_f1}, {want_auc:?})"
            ));
        }
    }

    // All-negative predictions: accuracy is exactly 1 - pi_hat, f1 exactly 0.
    // Counts are dyadic (2 of 8) so both sides are exact in f64.
    let scores = vec![-1.0; 8];
    let labels = vec![1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
    let (acc, f1, auc) = compute_metrics(&scores, &labels, 0.0).unwrap();
    let pi_hat = 2.0 / 8.0;
    if acc != 1.0 - pi_hat {
        failures.push(format!("all-negative: acc {acc} vs {}", 1.0 - pi_hat));
    }
    if f1 != 0.0 {
        failures.push(format!("all-negative: f1 {f1} vs 0"));
    }
    if auc != Some(0.5) {
        failures.push(format!("all-negative: tied scores must give auc 0.5, got {auc:?}"));
    }
    report(8, "metrics correctness", failures);
}
