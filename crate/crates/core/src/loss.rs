//! Differentiable loss terms over a materialized batch.
//!
//! Every stochastic choice (augmented views, mixed examples, frozen targets)
//! is resolved *before* a term is built, so a `LossBatch` is a pure function
//! of the model parameters. That is what makes finite-difference gradient
//! checks meaningful: `value` and the gradient from `evaluate` describe the
//! same deterministic surface.
//!
//! Weights carry any coefficient and 1/n averaging; a batch value is the
//! plain sum of its term values.

use crate::error::{Error, Result};
use crate::model::Model;

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^t) without overflow.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 35.0 {
        t
    } else if t < -35.0 {
        t.exp()
    } else {
        t.exp().ln_1p()
    }
}

/// Exponentiate-and-renormalize a feature vector into a probability vector,
/// with a per-coordinate floor of 1e-8 guarding degenerate inputs.
pub fn softmax_floored(s: &[f64]) -> Vec<f64> {
    assert!(!s.is_empty(), "softmax of empty vector");
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = s.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = p.iter().sum();
    for v in &mut p {
        *v = (*v / sum).max(1e-8);
    }
    let floored_sum: f64 = p.iter().sum();
    for v in &mut p {
        *v /= floored_sum;
    }
    p
}

/// D_KL(p || q) for probability vectors of equal length.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "KL over equal-length vectors");
    p.iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// One additive contribution to a batch objective.
#[derive(Debug, Clone)]
pub enum LossTerm {
    /// weight * l(g(x), y) with the sigmoid surrogate l(z,y) = 1/(1+exp(y z)).
    SigmoidMargin { x: Vec<f64>, y: f64, weight: f64 },
    /// weight * (-q ln p - (1-q) ln(1-p)), p = sigmoid(g(x)), q a frozen
    /// target probability in [0,1].
    SoftCrossEntropy {
        x: Vec<f64>,
        target_prob: f64,
        weight: f64,
    },
    /// weight * (target - sigmoid(g(x)))^2 with a frozen target probability
    /// (no gradient flows into the target).
    SquaredProbError {
        x: Vec<f64>,
        target_prob: f64,
        weight: f64,
    },
    /// weight * D_KL(normalize(features(x_ref)) || normalize(features(x_other))).
    /// Both sides receive gradients; the reference distribution comes first.
    FeatureKl {
        x_ref: Vec<f64>,
        x_other: Vec<f64>,
        weight: f64,
    },
}

fn eval_term(model: &Model, term: &LossTerm, mut grad: Option<&mut [f64]>) -> Result<f64> {
    match term {
        LossTerm::SigmoidMargin { x, y, weight } => {
            if *y != 1.0 && *y != -1.0 {
                return Err(Error::InvalidLabel(*y));
            }
            let trace = model.trace(x)?;
            let z = trace.logit();
            let l = sigmoid(-y * z);
            if let Some(g) = grad.as_deref_mut() {
                let d_logit = -weight * y * l * (1.0 - l);
                model.backprop(&trace, d_logit, None, g);
            }
            Ok(weight * l)
        }
        LossTerm::SoftCrossEntropy {
            x,
            target_prob,
            weight,
        } => {
            let q = *target_prob;
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidLabel(q));
            }
            let trace = model.trace(x)?;
            let z = trace.logit();
            // -ln sigmoid(z) = softplus(-z); -ln(1 - sigmoid(z)) = softplus(z).
            let value = q * softplus(-z) + (1.0 - q) * softplus(z);
            if let Some(g) = grad.as_deref_mut() {
                let d_logit = weight * (sigmoid(z) - q);
                model.backprop(&trace, d_logit, None, g);
            }
            Ok(weight * value)
        }
        LossTerm::SquaredProbError {
            x,
            target_prob,
            weight,
        } => {
            let trace = model.trace(x)?;
            let p = sigmoid(trace.logit());
            let diff = p - target_prob;
            if let Some(g) = grad.as_deref_mut() {
                let d_logit = weight * 2.0 * diff * p * (1.0 - p);
                model.backprop(&trace, d_logit, None, g);
            }
            Ok(weight * diff * diff)
        }
        LossTerm::FeatureKl {
            x_ref,
            x_other,
            weight,
        } => {
            let trace_ref = model.trace(x_ref)?;
            let trace_other = model.trace(x_other)?;
            let f_ref = trace_ref.features().ok_or(Error::NoHiddenLayer)?;
            let f_other = trace_other.features().ok_or(Error::NoHiddenLayer)?;
            let p = softmax_floored(f_ref);
            let q = softmax_floored(f_other);
            let kl = kl_divergence(&p, &q);
            if let Some(g) = grad.as_deref_mut() {
                // d/ds_ref[k]   = p_k ((ln p_k - ln q_k) - KL)
                // d/ds_other[k] = q_k - p_k
                let d_ref: Vec<f64> = p
                    .iter()
                    .zip(q.iter())
                    .map(|(&pk, &qk)| weight * pk * ((pk / qk).ln() - kl))
                    .collect();
                let d_other: Vec<f64> = p
                    .iter()
                    .zip(q.iter())
                    .map(|(&pk, &qk)| weight * (qk - pk))
                    .collect();
                model.backprop(&trace_ref, 0.0, Some(&d_ref), g);
                model.backprop(&trace_other, 0.0, Some(&d_other), g);
            }
            Ok(weight * kl)
        }
    }
}

/// An additive collection of loss terms; value = sum of term values.
#[derive(Debug, Clone, Default)]
pub struct LossBatch {
    terms: Vec<LossTerm>,
}

impl LossBatch {
    pub fn new() -> Self {
        LossBatch { terms: Vec::new() }
    }

    pub fn push(&mut self, term: LossTerm) {
        self.terms.push(term);
    }

    pub fn extend(&mut self, terms: impl IntoIterator<Item = LossTerm>) {
        self.terms.extend(terms);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Objective value at the current parameters.
    pub fn value(&self, model: &Model) -> Result<f64> {
        let mut total = 0.0;
        for term in &self.terms {
            total += eval_term(model, term, None)?;
        }
        Ok(total)
    }

    /// Objective value, accumulating d(value)/d(theta) into `grad`.
    pub fn evaluate(&self, model: &Model, grad: &mut [f64]) -> Result<f64> {
        let mut total = 0.0;
        for term in &self.terms {
            total += eval_term(model, term, Some(grad))?;
        }
        Ok(total)
    }

    /// Value and a freshly allocated gradient.
    pub fn gradient(&self, model: &Model) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; model.params().len()];
        let value = self.evaluate(model, &mut grad)?;
        Ok((value, grad))
    }
}

/// Central finite differences of the batch value, one coordinate at a time.
/// Test support: O(params^2) work, intended for small models only.
pub fn finite_difference_gradient(model: &Model, batch: &LossBatch, eps: f64) -> Result<Vec<f64>> {
    let mut fd = vec![0.0; model.params().len()];
    let mut probe = model.clone();
    for i in 0..fd.len() {
        let original = model.params()[i];
        probe.params_mut()[i] = original + eps;
        let plus = batch.value(&probe)?;
        probe.params_mut()[i] = original - eps;
        let minus = batch.value(&probe)?;
        probe.params_mut()[i] = original;
        fd[i] = (plus - minus) / (2.0 * eps);
    }
    Ok(fd)
}
