//! Pseudo supervision: score the unlabeled pool, pick the most confident
//! positives and negatives, and mix the confident pairs into soft-labeled
//! examples.

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::model::Model;
use crate::rng::StreamRng;
use std::collections::HashSet;

#[derive(Debug, Clone, Copy)]
pub struct SelectionConfig {
    /// Sample ratio r in (0,1]; n_s = floor(r * prior * n_u), at least 1.
    pub ratio: f64,
    /// Symmetric Beta shape for the mixing coefficient.
    pub alpha: f64,
    /// Number of mixed examples per epoch; None derives 2 * n_s.
    pub n_mix: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            ratio: 1.0,
            alpha: 0.75,
            n_mix: None,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "selection ratio must lie in (0,1], got {}",
                self.ratio
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "Beta shape must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn n_s(&self, prior: f64, n_u: usize) -> usize {
        ((self.ratio * prior * n_u as f64).floor() as usize).max(1)
    }

    pub fn n_mix(&self, n_s: usize) -> usize {
        self.n_mix.unwrap_or(2 * n_s)
    }
}

/// Disjoint index lists into the unlabeled pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub idx_p: Vec<usize>,
    pub idx_n: Vec<usize>,
    pub idx_u: Vec<usize>,
}

impl Partition {
    /// Disjointness and exact coverage of 0..n_total.
    pub fn audit(&self, n_total: usize) -> Result<()> {
        let mut seen = vec![false; n_total];
        let all = self
            .idx_p
            .iter()
            .chain(self.idx_n.iter())
            .chain(self.idx_u.iter());
        let mut count = 0usize;
        for &i in all {
            if i >= n_total {
                return Err(Error::Overlap(format!(
                    "index {i} outside unlabeled pool of size {n_total}"
                )));
            }
            if seen[i] {
                return Err(Error::Overlap(format!("index {i} appears twice")));
            }
            seen[i] = true;
            count += 1;
        }
        if count != n_total {
            return Err(Error::Overlap(format!(
                "partition covers {count} of {n_total} indices"
            )));
        }
        Ok(())
    }
}

/// One mixed example with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoExample {
    pub x: Vec<f64>,
    /// Soft label in [-1, +1].
    pub y: f64,
    pub src_p: usize,
    pub src_n: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoSet {
    pub examples: Vec<PseudoExample>,
}

/// Composite training set: hard positives and mixed soft examples as the
/// labeled part, the unselected unlabeled remainder as the unlabeled part.
#[derive(Debug, Clone)]
pub struct DPrime {
    pub labeled: Vec<(Vec<f64>, f64)>,
    pub unlabeled: Vec<Vec<f64>>,
}

impl DPrime {
    pub fn len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Classification scores sigmoid(g(x)) for the unlabeled pool.
pub fn score_unlabeled(model: &Model, d_u: &[Vec<f64>]) -> Result<Vec<f64>> {
    if d_u.is_empty() {
        return Err(Error::EmptySet("unlabeled pool to score"));
    }
    d_u.iter().map(|x| Ok(sigmoid(model.forward(x)?))).collect()
}

/// The n_s largest scores become pseudo-positives, then the n_s smallest of
/// the remainder become pseudo-negatives; ties resolve to the lower index.
pub fn select_confident(scores: &[f64], n_s: usize) -> Result<Partition> {
    let n_u = scores.len();
    if 2 * n_s > n_u {
        return Err(Error::SelectionTooLarge { n_s, n_u });
    }
    if n_s == 0 {
        return Err(Error::InvalidConfig("n_s must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n_u).collect();
    // Descending score, ascending index on ties.
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores must be comparable")
            .then(a.cmp(&b))
    });
    let mut idx_p: Vec<usize> = order[..n_s].to_vec();
    let rest = &order[n_s..];
    // Ascending score, ascending index on ties, over the remainder.
    let mut rest_sorted: Vec<usize> = rest.to_vec();
    rest_sorted.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores must be comparable")
            .then(a.cmp(&b))
    });
    let mut idx_n: Vec<usize> = rest_sorted[..n_s].to_vec();
    let taken: HashSet<usize> = idx_p.iter().chain(idx_n.iter()).copied().collect();
    let mut idx_u: Vec<usize> = (0..n_u).filter(|i| !taken.contains(i)).collect();
    idx_p.sort_unstable();
    idx_n.sort_unstable();
    idx_u.sort_unstable();
    Ok(Partition { idx_p, idx_n, idx_u })
}

fn mix_one(x_i: &[f64], x_j: &[f64], beta: f64) -> Vec<f64> {
    x_i.iter()
        .zip(x_j.iter())
        .map(|(a, b)| beta * a + (1.0 - beta) * b)
        .collect()
}

/// Draw `n_mix` pairs (uniform from each side), mix with Beta(alpha, alpha)
/// coefficients: x' = beta x_i + (1-beta) x_j, y' = 2 beta - 1.
pub fn mix_pairs(
    d_up: &[Vec<f64>],
    d_un: &[Vec<f64>],
    alpha: f64,
    n_mix: usize,
    rng: &mut StreamRng,
) -> Result<PseudoSet> {
    if d_up.is_empty() {
        return Err(Error::EmptySet("confident-positive pool"));
    }
    if d_un.is_empty() {
        return Err(Error::EmptySet("confident-negative pool"));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "Beta shape must be positive, got {alpha}"
        )));
    }
    let mut examples = Vec::with_capacity(n_mix);
    for _ in 0..n_mix {
        let src_p = rng.below(d_up.len());
        let src_n = rng.below(d_un.len());
        let beta = rng.beta_symmetric(alpha);
        let x = mix_one(&d_up[src_p], &d_un[src_n], beta);
        examples.push(PseudoExample {
            x,
            y: 2.0 * beta - 1.0,
            src_p,
            src_n,
            beta,
        });
    }
    Ok(PseudoSet { examples })
}

/// Assemble D' from hard positives, the mixed pseudo set, and the unselected
/// remainder. Exact feature duplicates across parts are an internal error.
pub fn build_prime(
    d_p: &[Vec<f64>],
    d_ps: &PseudoSet,
    d_uu: &[Vec<f64>],
) -> Result<DPrime> {
    if d_p.is_empty() {
        return Err(Error::EmptySet("labeled-positive pool"));
    }
    let key = |x: &[f64]| -> Vec<u64> { x.iter().map(|v| v.to_bits()).collect() };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for x in d_p
        .iter()
        .chain(d_ps.examples.iter().map(|e| &e.x))
        .chain(d_uu.iter())
    {
        if !seen.insert(key(x)) {
            return Err(Error::Overlap(
                "an example appears in more than one part of D'".into(),
            ));
        }
    }
    let mut labeled: Vec<(Vec<f64>, f64)> =
        d_p.iter().map(|x| (x.clone(), 1.0)).collect();
    labeled.extend(d_ps.examples.iter().map(|e| (e.x.clone(), e.y)));
    Ok(DPrime {
        labeled,
        unlabeled: d_uu.to_vec(),
    })
}
