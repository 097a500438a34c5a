//! The full training loop: per epoch, PU-risk updates of g_pu, pseudo
//! supervision generation from its scores, pseudo-supervised updates of g_ps,
//! and a weight transfer between the two, mode-dependent.
//!
//! Randomness is split into independent named streams (init, pu/batch,
//! ps/batch, mix, aug) so that skipping a stage never perturbs the others;
//! in particular, independent-mode g_pu consumes exactly the streams of a
//! standalone PU run and stays bit-identical to it.

use crate::data::PUDataset;
use crate::error::{Error, Result};
use crate::eval::{
    metrics_on_labeled, risk_gap, ClassifierTag, GapDiagnostic, MetricsRecord,
};
use crate::model::Model;
use crate::optim::Sgd;
use crate::pseudo::{
    build_prime, mix_pairs, score_unlabeled, select_confident, DPrime, Partition,
    SelectionConfig,
};
use crate::risk::{pu_loss_batch, Estimator, RiskConfig};
use crate::rng::StreamRng;
use crate::ssl::{ps_loss_batch, SSLConfig};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    /// No weights cross between g_pu and g_ps.
    Independent,
    /// g_ps restarts from g_pu at every epoch; nothing flows back.
    Inherit,
    /// After the ps updates, g_pu <- lambda g_pu + (1-lambda) g_ps.
    Pkt,
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TransferMode::Independent => "independent",
            TransferMode::Inherit => "inherit",
            TransferMode::Pkt => "pkt",
        };
        f.write_str(s)
    }
}

impl FromStr for TransferMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(TransferMode::Independent),
            "inherit" => Ok(TransferMode::Inherit),
            "pkt" => Ok(TransferMode::Pkt),
            other => Err(Error::InvalidConfig(format!(
                "unknown transfer mode {other:?} (expected independent|inherit|pkt)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PSPUConfig {
    pub hidden: Vec<usize>,
    pub stop_e: usize,
    /// Transfer coefficient; 1 keeps g_pu untouched.
    pub lambda: f64,
    pub lr_pu: f64,
    pub lr_ps: f64,
    pub momentum: f64,
    /// Unlabeled examples per PU minibatch; every PU minibatch carries the
    /// full labeled-positive pool next to its unlabeled chunk.
    pub batch_pu: usize,
    /// Labeled and unlabeled draws per pseudo-supervised minibatch.
    pub batch_ps: usize,
    /// Feed mixed pseudo examples (true) or the raw confident selections with
    /// hard labels (false, the vanilla ablation arm).
    pub mixup: bool,
    pub selection: SelectionConfig,
    pub ssl: SSLConfig,
    pub risk: RiskConfig,
    pub estimator: Estimator,
    pub transfer: TransferMode,
    pub seed: u64,
}

impl Default for PSPUConfig {
    fn default() -> Self {
        PSPUConfig {
            hidden: vec![64, 64],
            stop_e: 30,
            lambda: 0.9,
            lr_pu: 0.02,
            lr_ps: 0.05,
            momentum: 0.9,
            batch_pu: 250,
            batch_ps: 128,
            mixup: true,
            selection: SelectionConfig::default(),
            ssl: SSLConfig::default(),
            risk: RiskConfig {
                prior: 0.1,
                gamma: 1.0,
                beta_nn: 0.0,
            },
            estimator: Estimator::Nnpu,
            transfer: TransferMode::Pkt,
            seed: 0,
        }
    }
}

impl PSPUConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "at least one nonempty hidden layer is required".into(),
            ));
        }
        if self.stop_e == 0 {
            return Err(Error::InvalidConfig("stop_e must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0,1], got {}",
                self.lambda
            )));
        }
        if self.batch_pu == 0 || self.batch_ps == 0 {
            return Err(Error::InvalidConfig("batch sizes must be positive".into()));
        }
        if !(self.risk.prior > 0.0 && self.risk.prior < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "class prior must lie in (0,1), got {}",
                self.risk.prior
            )));
        }
        self.selection.validate()?;
        self.ssl.validate()?;
        Ok(())
    }

    fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(1);
        sizes
    }
}

/// lambda * theta_pu + (1 - lambda) * theta_ps, elementwise.
pub fn pkt_transfer(theta_pu: &[f64], theta_ps: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if theta_pu.len() != theta_ps.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_pu.len(),
            got: theta_ps.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!(
            "lambda must lie in [0,1], got {lambda}"
        )));
    }
    Ok(theta_pu
        .iter()
        .zip(theta_ps.iter())
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect())
}

#[derive(Debug, Clone)]
pub struct EpochArtifacts {
    pub epoch: usize,
    /// g_pu parameters after its updates, before any transfer.
    pub theta_pu_after_updates: Vec<f64>,
    /// g_pu parameters at the end of the epoch.
    pub theta_pu_end: Vec<f64>,
    /// g_ps parameters at the end of the epoch.
    pub theta_ps_end: Vec<f64>,
    pub partition: Partition,
    pub pseudo_count: usize,
    pub pseudo_mean_soft_label: f64,
    pub steps_pu: usize,
    pub steps_ps: usize,
    pub metrics_pu: MetricsRecord,
    pub metrics_ps: MetricsRecord,
}

#[derive(Debug)]
pub struct PspuOutput {
    pub g_pu: Model,
    pub g_ps: Model,
    pub history: Vec<EpochArtifacts>,
}

#[derive(Debug)]
pub struct BaselineOutput {
    pub model: Model,
    pub history: Vec<MetricsRecord>,
    pub gaps: Vec<Option<GapDiagnostic>>,
    /// Parameter snapshot at the end of each epoch.
    pub snapshots: Vec<Vec<f64>>,
}

/// One epoch of PU-risk minibatch updates; returns the step count.
fn pu_stage(
    model: &mut Model,
    opt: &mut Sgd,
    d_p: &[Vec<f64>],
    d_u: &[Vec<f64>],
    risk_cfg: &RiskConfig,
    estimator: Estimator,
    batch_size: usize,
    rng: &mut StreamRng,
    epoch: usize,
) -> Result<usize> {
    let mut order: Vec<usize> = (0..d_u.len()).collect();
    rng.shuffle(&mut order);
    let mut steps = 0;
    for (step, chunk) in order.chunks(batch_size).enumerate() {
        let batch_u: Vec<Vec<f64>> = chunk.iter().map(|&i| d_u[i].clone()).collect();
        let (_, batch) = pu_loss_batch(model, d_p, &batch_u, risk_cfg, estimator)?;
        let (value, grad) = batch.gradient(model)?;
        if !value.is_finite() {
            return Err(Error::NumericAbort {
                context: format!("epoch {epoch}, pu step {step}: objective {value}"),
            });
        }
        opt.step(model.params_mut(), &grad)?;
        steps += 1;
    }
    Ok(steps)
}

/// Pseudo-supervised minibatch updates on D'; returns the step count.
/// Each step draws `batch_ps` labeled and `batch_ps` unlabeled examples with
/// replacement (capped by pool size for the labeled part).
#[allow(clippy::too_many_arguments)]
fn ps_stage(
    model: &mut Model,
    opt: &mut Sgd,
    dprime: &DPrime,
    ssl_cfg: &SSLConfig,
    batch_size: usize,
    steps: usize,
    rng_batch: &mut StreamRng,
    rng_aug: &mut StreamRng,
    epoch: usize,
) -> Result<usize> {
    for step in 0..steps {
        let n_l = dprime.labeled.len();
        let take_l = batch_size.min(n_l);
        let labeled: Vec<(Vec<f64>, f64)> = (0..take_l)
            .map(|_| dprime.labeled[rng_batch.below(n_l)].clone())
            .collect();
        let unlabeled: Vec<Vec<f64>> = if dprime.unlabeled.is_empty() {
            Vec::new()
        } else {
            (0..batch_size)
                .map(|_| dprime.unlabeled[rng_batch.below(dprime.unlabeled.len())].clone())
                .collect()
        };
        let batch = ps_loss_batch(model, &labeled, &unlabeled, ssl_cfg, rng_aug)?;
        let (value, grad) = batch.gradient(model)?;
        if !value.is_finite() {
            return Err(Error::NumericAbort {
                context: format!("epoch {epoch}, ps step {step}: objective {value}"),
            });
        }
        opt.step(model.params_mut(), &grad)?;
    }
    Ok(steps)
}

fn eval_record(
    model: &Model,
    classifier: ClassifierTag,
    epoch: usize,
    train: &PUDataset,
    test: &[(Vec<f64>, f64)],
) -> Result<MetricsRecord> {
    let (acc, f1, auc) = metrics_on_labeled(model, test)?;
    let gap = risk_gap(model, train)?.map(|g| g.gap);
    Ok(MetricsRecord {
        epoch,
        classifier,
        acc,
        f1,
        auc,
        risk_gap: gap,
    })
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Full loop; returns both classifiers and per-epoch artifacts.
pub fn train_pspu(
    cfg: &PSPUConfig,
    train: &PUDataset,
    test: &[(Vec<f64>, f64)],
) -> Result<PspuOutput> {
    cfg.validate()?;
    let d_p = train.positive_features();
    let d_u = train.unlabeled_features();
    if d_p.is_empty() {
        return Err(Error::EmptySet("labeled-positive pool"));
    }
    if d_u.is_empty() {
        return Err(Error::EmptySet("unlabeled pool"));
    }
    let sizes = cfg.layer_sizes(train.dim());

    let mut rng_init = StreamRng::new(cfg.seed, "init");
    let mut rng_pu = StreamRng::new(cfg.seed, "pu/batch");
    let mut rng_ps = StreamRng::new(cfg.seed, "ps/batch");
    let mut rng_mix = StreamRng::new(cfg.seed, "mix");
    let mut rng_aug = StreamRng::new(cfg.seed, "aug");

    let mut g_pu = Model::init(&sizes, &mut rng_init)?;
    let mut g_ps = g_pu.clone();
    let mut opt_pu = Sgd::new(cfg.lr_pu, cfg.momentum, g_pu.params().len())?;
    let mut opt_ps = Sgd::new(cfg.lr_ps, cfg.momentum, g_ps.params().len())?;

    let steps_per_epoch = ceil_div(d_u.len(), cfg.batch_pu);
    let mut history = Vec::with_capacity(cfg.stop_e);

    for epoch in 1..=cfg.stop_e {
        if cfg.transfer == TransferMode::Inherit {
            g_ps.set_params(g_pu.params())?;
            opt_ps.reset();
        }

        let steps_pu = pu_stage(
            &mut g_pu,
            &mut opt_pu,
            &d_p,
            &d_u,
            &cfg.risk,
            cfg.estimator,
            cfg.batch_pu,
            &mut rng_pu,
            epoch,
        )?;
        let theta_pu_after_updates = g_pu.params().to_vec();

        let scores = score_unlabeled(&g_pu, &d_u)?;
        let n_s = cfg.selection.n_s(cfg.risk.prior, d_u.len());
        let partition = select_confident(&scores, n_s)?;
        partition.audit(d_u.len())?;
        let d_up: Vec<Vec<f64>> = partition.idx_p.iter().map(|&i| d_u[i].clone()).collect();
        let d_un: Vec<Vec<f64>> = partition.idx_n.iter().map(|&i| d_u[i].clone()).collect();
        let d_uu: Vec<Vec<f64>> = partition.idx_u.iter().map(|&i| d_u[i].clone()).collect();

        let (dprime, pseudo_count, pseudo_mean_soft_label) = if cfg.mixup {
            let pseudo = mix_pairs(
                &d_up,
                &d_un,
                cfg.selection.alpha,
                cfg.selection.n_mix(n_s),
                &mut rng_mix,
            )?;
            let count = pseudo.examples.len();
            let mean_y = pseudo.examples.iter().map(|e| e.y).sum::<f64>() / count.max(1) as f64;
            (build_prime(&d_p, &pseudo, &d_uu)?, count, mean_y)
        } else {
            // Vanilla arm: confident selections enter as hard labels.
            let mut labeled: Vec<(Vec<f64>, f64)> =
                d_p.iter().map(|x| (x.clone(), 1.0)).collect();
            labeled.extend(d_up.iter().map(|x| (x.clone(), 1.0)));
            labeled.extend(d_un.iter().map(|x| (x.clone(), -1.0)));
            let count = d_up.len() + d_un.len();
            (
                DPrime {
                    labeled,
                    unlabeled: d_uu.clone(),
                },
                count,
                0.0,
            )
        };

        let steps_ps = ps_stage(
            &mut g_ps,
            &mut opt_ps,
            &dprime,
            &cfg.ssl,
            cfg.batch_ps,
            steps_per_epoch,
            &mut rng_ps,
            &mut rng_aug,
            epoch,
        )?;

        // lambda = 1 is the exact no-op: skip the transfer entirely so the
        // g_pu trajectory (including optimizer state) matches a plain PU run.
        if cfg.transfer == TransferMode::Pkt && cfg.lambda < 1.0 {
            let blended = pkt_transfer(g_pu.params(), g_ps.params(), cfg.lambda)?;
            g_pu.set_params(&blended)?;
            opt_pu.reset();
        }

        let metrics_pu = eval_record(&g_pu, ClassifierTag::GPu, epoch, train, test)?;
        let metrics_ps = eval_record(&g_ps, ClassifierTag::GPs, epoch, train, test)?;
        history.push(EpochArtifacts {
            epoch,
            theta_pu_after_updates,
            theta_pu_end: g_pu.params().to_vec(),
            theta_ps_end: g_ps.params().to_vec(),
            partition,
            pseudo_count,
            pseudo_mean_soft_label,
            steps_pu,
            steps_ps,
            metrics_pu,
            metrics_ps,
        });
    }

    Ok(PspuOutput {
        g_pu,
        g_ps,
        history,
    })
}

/// PU-risk-only training (the uPU/nnPU baseline). Consumes the same init and
/// pu/batch streams as [`train_pspu`], so an independent-mode PSPU run's g_pu
/// is bit-identical to this trajectory.
pub fn train_baseline(
    cfg: &PSPUConfig,
    train: &PUDataset,
    test: &[(Vec<f64>, f64)],
) -> Result<BaselineOutput> {
    cfg.validate()?;
    let d_p = train.positive_features();
    let d_u = train.unlabeled_features();
    if d_p.is_empty() {
        return Err(Error::EmptySet("labeled-positive pool"));
    }
    if d_u.is_empty() {
        return Err(Error::EmptySet("unlabeled pool"));
    }
    let sizes = cfg.layer_sizes(train.dim());
    let mut rng_init = StreamRng::new(cfg.seed, "init");
    let mut rng_pu = StreamRng::new(cfg.seed, "pu/batch");
    let mut model = Model::init(&sizes, &mut rng_init)?;
    let mut opt = Sgd::new(cfg.lr_pu, cfg.momentum, model.params().len())?;

    let mut history = Vec::with_capacity(cfg.stop_e);
    let mut gaps = Vec::with_capacity(cfg.stop_e);
    let mut snapshots = Vec::with_capacity(cfg.stop_e);
    for epoch in 1..=cfg.stop_e {
        pu_stage(
            &mut model,
            &mut opt,
            &d_p,
            &d_u,
            &cfg.risk,
            cfg.estimator,
            cfg.batch_pu,
            &mut rng_pu,
            epoch,
        )?;
        history.push(eval_record(&model, ClassifierTag::GPu, epoch, train, test)?);
        gaps.push(risk_gap(&model, train)?);
        snapshots.push(model.params().to_vec());
    }
    Ok(BaselineOutput {
        model,
        history,
        gaps,
        snapshots,
    })
}
