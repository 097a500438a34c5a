//! Pseudo-supervised objective over D': soft-label cross-entropy on the
//! labeled part, sharpened prediction consistency on the unlabeled part, and
//! feature-level KL consistency over the whole batch.
//!
//! No PU quantity enters here: nothing in this module takes a class prior.

use crate::data::augment;
use crate::error::{Error, Result};
use crate::loss::{sigmoid, softplus, LossBatch, LossTerm};
use crate::model::Model;
use crate::rng::StreamRng;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Single-output MixMatch reduction: soft labels + sharpened consistency.
    MixmatchLite,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::MixmatchLite => f.write_str("mixmatch-lite"),
        }
    }
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixmatch-lite" => Ok(Objective::MixmatchLite),
            other => Err(Error::InvalidConfig(format!(
                "unsupported ssl objective {other:?} (available: mixmatch-lite)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SSLConfig {
    /// Weight of the unlabeled prediction-consistency term.
    pub w_u: f64,
    /// Weight of the feature-KL consistency term.
    pub w_c: f64,
    /// Sharpening temperature in (0,1]; 1 disables sharpening.
    pub temperature: f64,
    /// Gaussian augmentation strength.
    pub sigma_aug: f64,
    /// Per-coordinate dropout probability of the augmentation.
    pub dropout_p: f64,
    pub objective: Objective,
}

impl Default for SSLConfig {
    fn default() -> Self {
        SSLConfig {
            w_u: 1.0,
            w_c: 0.1,
            temperature: 0.5,
            sigma_aug: 0.1,
            dropout_p: 0.05,
            objective: Objective::MixmatchLite,
        }
    }
}

impl SSLConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_u >= 0.0 && self.w_u.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "w_u must be finite and nonnegative, got {}",
                self.w_u
            )));
        }
        if !(self.w_c >= 0.0 && self.w_c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "w_c must be finite and nonnegative, got {}",
                self.w_c
            )));
        }
        if !(self.temperature > 0.0 && self.temperature <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must lie in (0,1], got {}",
                self.temperature
            )));
        }
        if !(self.sigma_aug >= 0.0 && self.sigma_aug.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma_aug must be finite and nonnegative, got {}",
                self.sigma_aug
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidConfig(format!(
                "dropout_p must lie in [0,1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

/// sharpen(p, T) = p^(1/T) / (p^(1/T) + (1-p)^(1/T)). T = 1 is the exact
/// identity (special-cased so no rounding sneaks in).
pub fn sharpen(p: f64, t: f64) -> f64 {
    if t == 1.0 {
        return p;
    }
    let e = 1.0 / t;
    let a = p.powf(e);
    let b = (1.0 - p).powf(e);
    a / (a + b)
}

/// Cross-entropy between the frozen target q = (y'+1)/2 and p = sigmoid(g(x)).
pub fn soft_label_loss(model: &Model, x: &[f64], y_soft: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&y_soft) {
        return Err(Error::InvalidLabel(y_soft));
    }
    let q = (y_soft + 1.0) / 2.0;
    let z = model.forward(x)?;
    if !z.is_finite() {
        return Err(Error::NumericAbort {
            context: "soft-label loss saw a non-finite logit".into(),
        });
    }
    Ok(q * softplus(-z) + (1.0 - q) * softplus(z))
}

/// (sharpen(p1, T) - p2)^2 over two augmented views; the sharpened first view
/// is the target and receives no gradient. Draws aug1 fully, then aug2.
pub fn prediction_consistency(
    model: &Model,
    x: &[f64],
    cfg: &SSLConfig,
    rng: &mut StreamRng,
) -> Result<f64> {
    let aug1 = augment(x, cfg.sigma_aug, cfg.dropout_p, rng);
    let aug2 = augment(x, cfg.sigma_aug, cfg.dropout_p, rng);
    let target = sharpen(sigmoid(model.forward(&aug1)?), cfg.temperature);
    let p2 = sigmoid(model.forward(&aug2)?);
    let diff = target - p2;
    Ok(diff * diff)
}

/// KL divergence between normalized features of two augmented views, first
/// view as the reference. Draws aug1 fully, then aug2.
pub fn feature_consistency(
    model: &Model,
    x: &[f64],
    cfg: &SSLConfig,
    rng: &mut StreamRng,
) -> Result<f64> {
    let aug1 = augment(x, cfg.sigma_aug, cfg.dropout_p, rng);
    let aug2 = augment(x, cfg.sigma_aug, cfg.dropout_p, rng);
    let f1 = model.features(&aug1)?;
    let f2 = model.features(&aug2)?;
    let p = crate::loss::softmax_floored(&f1);
    let q = crate::loss::softmax_floored(&f2);
    Ok(crate::loss::kl_divergence(&p, &q))
}

/// Materialize one pseudo-supervised training batch.
///
/// Draw order, shared with the value-level oracle: labeled terms consume no
/// randomness; then each unlabeled example draws its two prediction views
/// (target frozen at the current parameters); then every batch member, labeled
/// first, draws its two feature views. Groups with zero weight draw nothing.
pub fn ps_loss_batch(
    model: &Model,
    labeled: &[(Vec<f64>, f64)],
    unlabeled: &[Vec<f64>],
    cfg: &SSLConfig,
    rng: &mut StreamRng,
) -> Result<LossBatch> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(Error::EmptySet("labeled part of a pseudo-supervised batch"));
    }
    let Objective::MixmatchLite = cfg.objective;
    let mut batch = LossBatch::new();
    let n_l = labeled.len() as f64;
    for (x, y_soft) in labeled {
        if !(-1.0..=1.0).contains(y_soft) {
            return Err(Error::InvalidLabel(*y_soft));
        }
        batch.push(LossTerm::SoftCrossEntropy {
            x: x.clone(),
            target_prob: (y_soft + 1.0) / 2.0,
            weight: 1.0 / n_l,
        });
    }
    if cfg.w_u > 0.0 && !unlabeled.is_empty() {
        let n_u = unlabeled.len() as f64;
        for x in unlabeled {
            let aug1 = augment(x, cfg.sigma_aug, cfg.dropout_p, rng);
            let aug2 = augment(x, cfg.sigma_aug, cfg.dropout_p, rng);
            let target = sharpen(sigmoid(model.forward(&aug1)?), cfg.temperature);
            batch.push(LossTerm::SquaredProbError {
                x: aug2,
                target_prob: target,
                weight: cfg.w_u / n_u,
            });
        }
    }
    if cfg.w_c > 0.0 {
        let n_all = (labeled.len() + unlabeled.len()) as f64;
        for x in labeled.iter().map(|(x, _)| x).chain(unlabeled.iter()) {
            let aug1 = augment(x, cfg.sigma_aug, cfg.dropout_p, rng);
            let aug2 = augment(x, cfg.sigma_aug, cfg.dropout_p, rng);
            batch.push(LossTerm::FeatureKl {
                x_ref: aug1,
                x_other: aug2,
                weight: cfg.w_c / n_all,
            });
        }
    }
    Ok(batch)
}

/// Value of the pseudo-supervised objective on one batch.
pub fn ps_objective(
    model: &Model,
    labeled: &[(Vec<f64>, f64)],
    unlabeled: &[Vec<f64>],
    cfg: &SSLConfig,
    rng: &mut StreamRng,
) -> Result<f64> {
    ps_loss_batch(model, labeled, unlabeled, cfg, rng)?.value(model)
}
