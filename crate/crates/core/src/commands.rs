//! Command implementations behind the CLI: dataset generation, training
//! across seeds, the risk-gap diagnostic, and ablation sweeps.
//!
//! Every command resolves its output directory (flag beats config), archives
//! the fully resolved config there, and writes deterministic artifacts:
//! identical config and seed give byte-identical CSV files. Seeds run on a
//! small worker pool capped by the `PU_FORGE_THREADS` env var; results are
//! keyed by job index, so the merge never depends on completion order.

use crate::config::ExperimentConfig;
use crate::data::{
    delete_unlabeled_positives, gen_gaussian_labeled, gen_gaussian_pu, load_csv, save_csv,
    GaussianSpec, PUDataset, Regime,
};
use crate::error::{Error, Result};
use crate::eval::{ClassifierTag, MetricsRecord};
use crate::model::Model;
use crate::plot::{line_chart, Series};
use crate::pspu::{train_baseline, train_pspu, PSPUConfig};
use crate::risk::Estimator;
use crate::rng::StreamRng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

pub const METRICS_HEADER: &str = "epoch,classifier,acc,f1,auc,risk_gap";
pub const GAP_HEADER: &str = "epoch,r_p_neg,r_pu_neg,gap";
pub const ABLATION_HEADER: &str =
    "sweep,value,seed,acc_g_pu,f1_g_pu,auc_g_pu,acc_g_ps,f1_g_ps,auc_g_ps";
pub const CONFIG_ARCHIVE: &str = "config.resolved.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Upu,
    Nnpu,
    Pspu,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Upu => f.write_str("upu"),
            Method::Nnpu => f.write_str("nnpu"),
            Method::Pspu => f.write_str("pspu"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upu" => Ok(Method::Upu),
            "nnpu" => Ok(Method::Nnpu),
            "pspu" => Ok(Method::Pspu),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (expected upu|nnpu|pspu)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    NsRatio,
    TransferMode,
    MixupOnoff,
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sweep::NsRatio => f.write_str("ns_ratio"),
            Sweep::TransferMode => f.write_str("transfer_mode"),
            Sweep::MixupOnoff => f.write_str("mixup_onoff"),
        }
    }
}

impl FromStr for Sweep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ns_ratio" => Ok(Sweep::NsRatio),
            "transfer_mode" => Ok(Sweep::TransferMode),
            "mixup_onoff" => Ok(Sweep::MixupOnoff),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep {other:?} (expected ns_ratio|transfer_mode|mixup_onoff)"
            ))),
        }
    }
}

/// Training split for one seed: loaded from `data.path` when set, otherwise
/// generated from the data section (extreme regime deletes hidden positives).
pub fn build_train_set(cfg: &ExperimentConfig, seed: u64) -> Result<PUDataset> {
    if let Some(path) = &cfg.data.path {
        return load_csv(path);
    }
    let spec = GaussianSpec {
        dim: cfg.data.dim,
        n_total: cfg.data.n_total,
        prior: cfg.data.prior,
        n_labeled: cfg.data.n_labeled,
        separation: cfg.data.separation,
    };
    let ds = gen_gaussian_pu(&spec, seed)?;
    match cfg.data.regime {
        Regime::Imbalanced => Ok(ds),
        Regime::Balanced => {
            PUDataset::new(ds.examples().to_vec(), ds.prior(), Regime::Balanced)
        }
        Regime::Extreme => delete_unlabeled_positives(&ds, cfg.data.rho, seed),
    }
}

/// Fully labeled held-out pairs from the same distribution, on their own
/// stream so training never touches these draws.
pub fn build_test_set(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut rng = StreamRng::new(seed, "data/test");
    gen_gaussian_labeled(
        cfg.data.dim,
        cfg.data.n_test,
        cfg.data.prior,
        cfg.data.separation,
        &mut rng,
    )
}

fn resolve_out(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| cfg.run.out.clone())
}

/// Archive the exact resolved config in the output directory, with the
/// invocation as a leading comment so the run is replayable verbatim.
fn archive_config(cfg: &ExperimentConfig, invocation: &str, dir: &Path) -> Result<()> {
    let mut archived = cfg.clone();
    archived.run.out = dir.to_path_buf();
    let text = format!("# {invocation}\n{}", archived.resolved());
    std::fs::write(dir.join(CONFIG_ARCHIVE), text)?;
    Ok(())
}

fn clamp_workers(env_cap: Option<usize>, hardware: usize, jobs: usize) -> usize {
    env_cap
        .filter(|&n| n >= 1)
        .unwrap_or(hardware)
        .min(jobs)
        .max(1)
}

fn worker_count(jobs: usize) -> usize {
    let hardware = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("PU_FORGE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok());
    clamp_workers(cap, hardware, jobs)
}

/// Run jobs on a worker pool; results come back in job order regardless of
/// which worker finished first.
fn run_parallel<J, R, F>(jobs: Vec<J>, f: F) -> Result<Vec<R>>
where
    J: Send,
    R: Send,
    F: Fn(J) -> Result<R> + Sync,
{
    let n = jobs.len();
    let workers = worker_count(n);
    let queue: Mutex<VecDeque<(usize, J)>> = Mutex::new(jobs.into_iter().enumerate().collect());
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().expect("queue lock").pop_front();
                match job {
                    Some((idx, job)) => {
                        let result = f(job);
                        slots.lock().expect("slot lock")[idx] = Some(result);
                    }
                    None => break,
                }
            });
        }
    });
    slots
        .into_inner()
        .expect("worker pool finished")
        .into_iter()
        .map(|slot| slot.expect("every job ran"))
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `epoch,classifier,acc,f1,auc,risk_gap`; absent metrics stay empty.
pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.epoch,
            r.classifier,
            r.acc,
            r.f1,
            fmt_opt(r.auc),
            fmt_opt(r.risk_gap),
        );
    }
    s
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FinalMetrics {
    pub acc: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub risk_gap: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Final-epoch metrics keyed by classifier name.
    pub finals: BTreeMap<String, FinalMetrics>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub seeds: Vec<SeedSummary>,
    pub mean: BTreeMap<String, FinalMetrics>,
    /// Population standard deviation across seeds.
    pub std: BTreeMap<String, FinalMetrics>,
}

pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub models: Vec<(ClassifierTag, Model)>,
}

fn method_config(cfg: &ExperimentConfig, method: Method, seed: u64) -> PSPUConfig {
    let mut pcfg = cfg.pspu_for_seed(seed);
    match method {
        Method::Upu => pcfg.estimator = Estimator::Upu,
        Method::Nnpu => pcfg.estimator = Estimator::Nnpu,
        Method::Pspu => {}
    }
    pcfg
}

/// Train one seed; for pspu the records interleave g_pu and g_ps per epoch.
pub fn run_seed(cfg: &ExperimentConfig, method: Method, seed: u64) -> Result<SeedRun> {
    let train = build_train_set(cfg, seed)?;
    let test = build_test_set(cfg, seed)?;
    let pcfg = method_config(cfg, method, seed);
    match method {
        Method::Pspu => {
            let out = train_pspu(&pcfg, &train, &test)?;
            let mut records = Vec::with_capacity(2 * out.history.len());
            for art in &out.history {
                records.push(art.metrics_pu);
                records.push(art.metrics_ps);
            }
            Ok(SeedRun {
                seed,
                records,
                models: vec![
                    (ClassifierTag::GPu, out.g_pu),
                    (ClassifierTag::GPs, out.g_ps),
                ],
            })
        }
        Method::Upu | Method::Nnpu => {
            let out = train_baseline(&pcfg, &train, &test)?;
            Ok(SeedRun {
                seed,
                records: out.history,
                models: vec![(ClassifierTag::GPu, out.model)],
            })
        }
    }
}

/// Last-epoch record per classifier (rows arrive in epoch order).
fn finals_of(records: &[MetricsRecord]) -> BTreeMap<String, FinalMetrics> {
    let mut map = BTreeMap::new();
    for r in records {
        map.insert(
            r.classifier.to_string(),
            FinalMetrics {
                acc: r.acc,
                f1: r.f1,
                auc: r.auc,
                risk_gap: r.risk_gap,
            },
        );
    }
    map
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_of(values: &[f64]) -> f64 {
    let m = mean_of(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

fn fold_opt(values: &[Option<f64>], fold: impl Fn(&[f64]) -> f64) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        None
    } else {
        Some(fold(&present))
    }
}

fn aggregate(
    per_seed: &[BTreeMap<String, FinalMetrics>],
) -> (BTreeMap<String, FinalMetrics>, BTreeMap<String, FinalMetrics>) {
    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    let Some(first) = per_seed.first() else {
        return (mean, std);
    };
    for name in first.keys() {
        let rows: Vec<&FinalMetrics> = per_seed.iter().filter_map(|m| m.get(name)).collect();
        let accs: Vec<f64> = rows.iter().map(|r| r.acc).collect();
        let f1s: Vec<f64> = rows.iter().map(|r| r.f1).collect();
        let aucs: Vec<Option<f64>> = rows.iter().map(|r| r.auc).collect();
        let gaps: Vec<Option<f64>> = rows.iter().map(|r| r.risk_gap).collect();
        mean.insert(
            name.clone(),
            FinalMetrics {
                acc: mean_of(&accs),
                f1: mean_of(&f1s),
                auc: fold_opt(&aucs, mean_of),
                risk_gap: fold_opt(&gaps, mean_of),
            },
        );
        std.insert(
            name.clone(),
            FinalMetrics {
                acc: std_of(&accs),
                f1: std_of(&f1s),
                auc: fold_opt(&aucs, std_of),
                risk_gap: fold_opt(&gaps, std_of),
            },
        );
    }
    (mean, std)
}

pub fn summarize(method: Method, runs: &[SeedRun]) -> Summary {
    let seeds: Vec<SeedSummary> = runs
        .iter()
        .map(|r| SeedSummary {
            seed: r.seed,
            finals: finals_of(&r.records),
        })
        .collect();
    let per_seed: Vec<BTreeMap<String, FinalMetrics>> =
        seeds.iter().map(|s| s.finals.clone()).collect();
    let (mean, std) = aggregate(&per_seed);
    Summary {
        method: method.to_string(),
        seeds,
        mean,
        std,
    }
}

/// Generate the training split for the first seed and write it as CSV,
/// reporting the count contract and the binomial sanity bound on the draw.
pub fn cmd_gen_data(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let dir = resolve_out(cfg, out);
    std::fs::create_dir_all(&dir)?;
    archive_config(cfg, "pu-forge gen-data", &dir)?;
    let seed = cfg.run.seeds[0];

    // Binomial check on the raw draw, before any regime deletion.
    let spec = GaussianSpec {
        dim: cfg.data.dim,
        n_total: cfg.data.n_total,
        prior: cfg.data.prior,
        n_labeled: cfg.data.n_labeled,
        separation: cfg.data.separation,
    };
    let raw = gen_gaussian_pu(&spec, seed)?;
    let draw_frac = raw.hidden_positive_fraction();
    let sigma = (cfg.data.prior * (1.0 - cfg.data.prior) / cfg.data.n_total as f64).sqrt();
    let bound = 4.0 * sigma;
    if (draw_frac - cfg.data.prior).abs() > bound {
        return Err(Error::InfeasibleCounts(format!(
            "drawn positive fraction {draw_frac:.4} deviates from prior {} by more than {bound:.4}",
            cfg.data.prior
        )));
    }

    let ds = build_train_set(cfg, seed)?;
    let path = dir.join("data.csv");
    save_csv(&ds, &path)?;
    println!(
        "wrote {}: N_p = {}, N_u = {}, empirical prior = {:.4} (draw {:.4}, bound |x - {}| <= {:.4})",
        path.display(),
        ds.n_p(),
        ds.n_u(),
        ds.hidden_positive_fraction(),
        draw_frac,
        cfg.data.prior,
        bound
    );
    Ok(())
}

/// Train every seed, write per-seed metrics.csv and model JSON files, and the
/// cross-seed summary.json.
pub fn cmd_train(cfg: &ExperimentConfig, method: Method, out: Option<&Path>) -> Result<()> {
    let dir = resolve_out(cfg, out);
    std::fs::create_dir_all(&dir)?;
    archive_config(cfg, &format!("pu-forge train --method {method}"), &dir)?;

    let runs = run_parallel(cfg.run.seeds.clone(), |seed| run_seed(cfg, method, seed))?;
    for run in &runs {
        let sdir = dir.join(format!("seed_{}", run.seed));
        std::fs::create_dir_all(&sdir)?;
        std::fs::write(sdir.join("metrics.csv"), metrics_csv(&run.records))?;
        for (tag, model) in &run.models {
            let text = serde_json::to_string(model)?;
            std::fs::write(sdir.join(format!("model_{tag}.json")), text)?;
        }
        let finals = finals_of(&run.records);
        let mut line = format!("seed {}:", run.seed);
        for (name, m) in &finals {
            let _ = write!(line, " {name} f1 = {:.4} acc = {:.4}", m.f1, m.acc);
        }
        println!("{line}");
    }

    let summary = summarize(method, &runs);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)?;
    for (name, m) in &summary.mean {
        let sd = &summary.std[name];
        println!(
            "mean {name}: f1 = {:.4} +- {:.4}, acc = {:.4} +- {:.4}",
            m.f1, sd.f1, m.acc, sd.acc
        );
    }
    println!("wrote {}", dir.join("summary.json").display());
    Ok(())
}

/// Per-epoch parameter snapshots paired with the training data they scored,
/// enough to recompute every gap.csv row offline.
#[derive(Debug, Serialize, Deserialize)]
pub struct GapSnapshots {
    pub layer_sizes: Vec<usize>,
    pub epochs: Vec<Vec<f64>>,
}

/// PU-only training on the first seed; writes per-epoch risk decomposition
/// (gap.csv), the parameter snapshots behind it, the training data, and an
/// optional SVG of both risk curves.
pub fn cmd_diagnose_gap(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let dir = resolve_out(cfg, out);
    std::fs::create_dir_all(&dir)?;
    archive_config(cfg, "pu-forge diagnose-gap", &dir)?;
    let seed = cfg.run.seeds[0];
    let train = build_train_set(cfg, seed)?;
    let test = build_test_set(cfg, seed)?;
    let pcfg = cfg.pspu_for_seed(seed);
    let out_run = train_baseline(&pcfg, &train, &test)?;

    let mut rows = String::from(GAP_HEADER);
    rows.push('\n');
    let mut r_p = Vec::with_capacity(out_run.gaps.len());
    let mut r_pu = Vec::with_capacity(out_run.gaps.len());
    for (i, gap) in out_run.gaps.iter().enumerate() {
        let Some(g) = gap else {
            return Err(Error::EmptySet(
                "hidden positives in the unlabeled pool; the gap diagnostic needs them",
            ));
        };
        let _ = writeln!(rows, "{},{},{},{}", i + 1, g.r_p_neg, g.r_pu_neg, g.gap);
        r_p.push(g.r_p_neg);
        r_pu.push(g.r_pu_neg);
    }
    std::fs::write(dir.join("gap.csv"), rows)?;
    save_csv(&train, &dir.join("data.csv"))?;
    let snapshots = GapSnapshots {
        layer_sizes: out_run.model.layer_sizes().to_vec(),
        epochs: out_run.snapshots,
    };
    std::fs::write(
        dir.join("snapshots.json"),
        serde_json::to_string(&snapshots)?,
    )?;

    if cfg.run.plot {
        let svg = dir.join("gap.svg");
        let series = [
            Series {
                label: "R_p_neg",
                ys: &r_p,
            },
            Series {
                label: "R_pu_neg",
                ys: &r_pu,
            },
        ];
        if let Err(e) = line_chart("negative-direction risks", "risk", &series, &svg) {
            eprintln!("plot skipped: {e}");
        }
    }

    let first = out_run.gaps.first().and_then(|g| g.map(|g| g.gap)).unwrap_or(0.0);
    let last = out_run.gaps.last().and_then(|g| g.map(|g| g.gap)).unwrap_or(0.0);
    println!(
        "gap epoch 1 = {first:.4}, epoch {} = {last:.4}; wrote {}",
        out_run.gaps.len(),
        dir.join("gap.csv").display()
    );
    Ok(())
}

fn sweep_values(sweep: Sweep) -> Vec<String> {
    match sweep {
        Sweep::NsRatio => vec!["0.1".into(), "0.5".into(), "1".into()],
        Sweep::TransferMode => vec!["independent".into(), "inherit".into(), "pkt".into()],
        Sweep::MixupOnoff => vec!["vanilla".into(), "pseudo".into()],
    }
}

fn apply_sweep(mut pcfg: PSPUConfig, sweep: Sweep, value: &str) -> Result<PSPUConfig> {
    match sweep {
        Sweep::NsRatio => {
            pcfg.selection.ratio = value
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad ratio {value:?}")))?;
        }
        Sweep::TransferMode => pcfg.transfer = value.parse()?,
        Sweep::MixupOnoff => pcfg.mixup = value == "pseudo",
    }
    Ok(pcfg)
}

/// One full pspu run per (sweep value, seed); final metrics of both
/// classifiers land in ablation.csv, one row per pair.
pub fn cmd_ablate(cfg: &ExperimentConfig, sweep: Sweep, out: Option<&Path>) -> Result<()> {
    let dir = resolve_out(cfg, out);
    std::fs::create_dir_all(&dir)?;
    archive_config(cfg, &format!("pu-forge ablate --sweep {sweep}"), &dir)?;

    let values = sweep_values(sweep);
    let jobs: Vec<(String, u64)> = values
        .iter()
        .flat_map(|v| cfg.run.seeds.iter().map(move |&s| (v.clone(), s)))
        .collect();

    let rows = run_parallel(jobs, |(value, seed)| {
        let train = build_train_set(cfg, seed)?;
        let test = build_test_set(cfg, seed)?;
        let pcfg = apply_sweep(cfg.pspu_for_seed(seed), sweep, &value)?;
        let out_run = train_pspu(&pcfg, &train, &test)?;
        let finals = finals_of(
            &out_run
                .history
                .iter()
                .flat_map(|a| [a.metrics_pu, a.metrics_ps])
                .collect::<Vec<_>>(),
        );
        let pu = finals["g_pu"];
        let ps = finals["g_ps"];
        Ok((value, seed, pu, ps))
    })?;

    let mut csv = String::from(ABLATION_HEADER);
    csv.push('\n');
    for (value, seed, pu, ps) in &rows {
        let _ = writeln!(
            csv,
            "{sweep},{value},{seed},{},{},{},{},{},{}",
            pu.acc,
            pu.f1,
            fmt_opt(pu.auc),
            ps.acc,
            ps.f1,
            fmt_opt(ps.auc),
        );
    }
    std::fs::write(dir.join("ablation.csv"), csv)?;

    for value in &values {
        let f1s: Vec<f64> = rows
            .iter()
            .filter(|(v, ..)| v == value)
            .map(|(_, _, _, ps)| ps.f1)
            .collect();
        println!(
            "{sweep} = {value}: mean final f1(g_ps) = {:.4} over {} seeds",
            mean_of(&f1s),
            f1s.len()
        );
    }
    println!("wrote {}", dir.join("ablation.csv").display());
    Ok(())
}
