//! PU datasets: synthetic generation, split construction, augmentation, CSV IO.
//!
//! Every example carries a hidden ground-truth label next to its P/U tag. The
//! hidden label exists for evaluation and diagnostics only; training code goes
//! through [`TrainerView`], which structurally has no label field. Keeping the
//! field private to this module makes the isolation a compile-time property.

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PuTag {
    P,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Balanced,
    Imbalanced,
    Extreme,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Balanced => "balanced",
            Regime::Imbalanced => "imbalanced",
            Regime::Extreme => "extreme",
        };
        f.write_str(s)
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Regime::Balanced),
            "imbalanced" => Ok(Regime::Imbalanced),
            "extreme" => Ok(Regime::Extreme),
            other => Err(Error::InvalidConfig(format!(
                "unknown regime {other:?} (expected balanced|imbalanced|extreme)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub pu_tag: PuTag,
    hidden_label: f64,
}

impl Example {
    pub fn new(x: Vec<f64>, pu_tag: PuTag, hidden_label: f64) -> Result<Self> {
        if hidden_label != 1.0 && hidden_label != -1.0 {
            return Err(Error::InvalidLabel(hidden_label));
        }
        if pu_tag == PuTag::P && hidden_label != 1.0 {
            return Err(Error::Overlap(
                "a P-tagged example must carry hidden label +1".into(),
            ));
        }
        Ok(Example {
            x,
            pu_tag,
            hidden_label,
        })
    }

    /// Ground-truth label, for evaluation and diagnostics only.
    pub fn oracle_label(&self) -> f64 {
        self.hidden_label
    }
}

/// What training code is allowed to see: features and the P/U tag, nothing else.
pub struct TrainerView<'a> {
    pub x: &'a [f64],
    pub pu_tag: PuTag,
}

#[derive(Debug, Clone)]
pub struct PUDataset {
    examples: Vec<Example>,
    prior: f64,
    regime: Regime,
}

impl PUDataset {
    pub fn new(examples: Vec<Example>, prior: f64, regime: Regime) -> Result<Self> {
        if !(prior > 0.0 && prior < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "class prior must lie in (0,1), got {prior}"
            )));
        }
        if let Some(first) = examples.first() {
            let d = first.x.len();
            if let Some(bad) = examples.iter().find(|e| e.x.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: bad.x.len(),
                });
            }
        }
        Ok(PUDataset {
            examples,
            prior,
            regime,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn trainer_views(&self) -> impl Iterator<Item = TrainerView<'_>> {
        self.examples.iter().map(|e| TrainerView {
            x: &e.x,
            pu_tag: e.pu_tag,
        })
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn with_prior(mut self, prior: f64) -> Result<Self> {
        if !(prior > 0.0 && prior < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "class prior must lie in (0,1), got {prior}"
            )));
        }
        self.prior = prior;
        Ok(self)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.x.len())
    }

    pub fn n_p(&self) -> usize {
        self.examples.iter().filter(|e| e.pu_tag == PuTag::P).count()
    }

    pub fn n_u(&self) -> usize {
        self.examples.iter().filter(|e| e.pu_tag == PuTag::U).count()
    }

    /// Feature vectors of the labeled-positive pool (trainer side).
    pub fn positive_features(&self) -> Vec<Vec<f64>> {
        self.examples
            .iter()
            .filter(|e| e.pu_tag == PuTag::P)
            .map(|e| e.x.clone())
            .collect()
    }

    /// Feature vectors of the unlabeled pool (trainer side).
    pub fn unlabeled_features(&self) -> Vec<Vec<f64>> {
        self.examples
            .iter()
            .filter(|e| e.pu_tag == PuTag::U)
            .map(|e| e.x.clone())
            .collect()
    }

    /// Unlabeled examples with oracle labels (evaluator side).
    pub fn unlabeled_examples(&self) -> Vec<&Example> {
        self.examples
            .iter()
            .filter(|e| e.pu_tag == PuTag::U)
            .collect()
    }

    /// Fraction of hidden positives over the whole dataset (oracle side).
    pub fn hidden_positive_fraction(&self) -> f64 {
        if self.examples.is_empty() {
            return 0.0;
        }
        let pos = self
            .examples
            .iter()
            .filter(|e| e.hidden_label == 1.0)
            .count();
        pos as f64 / self.examples.len() as f64
    }

    /// Fraction of hidden positives inside the unlabeled pool (oracle side).
    pub fn hidden_positive_fraction_in_u(&self) -> f64 {
        let (mut pos, mut total) = (0usize, 0usize);
        for e in &self.examples {
            if e.pu_tag == PuTag::U {
                total += 1;
                if e.hidden_label == 1.0 {
                    pos += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            pos as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GaussianSpec {
    pub dim: usize,
    pub n_total: usize,
    pub prior: f64,
    pub n_labeled: usize,
    pub separation: f64,
}

/// Two opposed spherical Gaussians under the censoring construction: hidden
/// labels ~ Bernoulli(prior), means at +/- separation/sqrt(d) * 1, and exactly
/// `n_labeled` of the drawn positives tagged P uniformly at random. The
/// unlabeled pool's positive fraction sits below the configured prior because
/// the labeled positives were removed from it; the prior holds marginally.
pub fn gen_gaussian_pu(spec: &GaussianSpec, seed: u64) -> Result<PUDataset> {
    if spec.dim == 0 {
        return Err(Error::InvalidConfig("dim must be positive".into()));
    }
    if !(spec.prior > 0.0 && spec.prior < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "class prior must lie in (0,1), got {}",
            spec.prior
        )));
    }
    if spec.separation < 0.0 {
        return Err(Error::InvalidConfig("separation must be >= 0".into()));
    }
    if spec.n_labeled == 0 {
        return Err(Error::InvalidConfig("n_labeled must be positive".into()));
    }
    if (spec.n_labeled as f64) >= spec.prior * spec.n_total as f64 {
        return Err(Error::InfeasibleCounts(format!(
            "n_labeled = {} must stay below prior * n_total = {}",
            spec.n_labeled,
            spec.prior * spec.n_total as f64
        )));
    }
    let mut rng = StreamRng::new(seed, "data/gen");
    let mu = spec.separation / (spec.dim as f64).sqrt();
    let mut examples = Vec::with_capacity(spec.n_total);
    let mut positive_indices = Vec::new();
    for i in 0..spec.n_total {
        let label = if rng.bernoulli(spec.prior) { 1.0 } else { -1.0 };
        let x: Vec<f64> = (0..spec.dim)
            .map(|_| label * mu + rng.standard_normal())
            .collect();
        if label == 1.0 {
            positive_indices.push(i);
        }
        examples.push(Example::new(x, PuTag::U, label)?);
    }
    if positive_indices.len() < spec.n_labeled {
        return Err(Error::InfeasibleCounts(format!(
            "drew {} positives, cannot tag {} as labeled",
            positive_indices.len(),
            spec.n_labeled
        )));
    }
    rng.shuffle(&mut positive_indices);
    for &i in positive_indices.iter().take(spec.n_labeled) {
        examples[i].pu_tag = PuTag::P;
    }
    rng.shuffle(&mut examples);
    PUDataset::new(examples, spec.prior, Regime::Imbalanced)
}

/// Fully labeled draws from the same two-Gaussian family: Bernoulli(prior)
/// labels, means at +/- separation/sqrt(d) * 1. Used for oracle test sets and
/// as a source for [`make_split`].
pub fn gen_gaussian_labeled(
    dim: usize,
    n: usize,
    prior: f64,
    separation: f64,
    rng: &mut StreamRng,
) -> Result<Vec<(Vec<f64>, f64)>> {
    if dim == 0 {
        return Err(Error::InvalidConfig("dim must be positive".into()));
    }
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "class prior must lie in (0,1), got {prior}"
        )));
    }
    if separation < 0.0 {
        return Err(Error::InvalidConfig("separation must be >= 0".into()));
    }
    let mu = separation / (dim as f64).sqrt();
    Ok((0..n)
        .map(|_| {
            let label = if rng.bernoulli(prior) { 1.0 } else { -1.0 };
            let x = (0..dim)
                .map(|_| label * mu + rng.standard_normal())
                .collect();
            (x, label)
        })
        .collect())
}

/// Delete a fraction `rho` of the hidden positives inside the unlabeled pool,
/// chosen uniformly; the regime becomes extreme. Labeled positives are kept.
pub fn delete_unlabeled_positives(ds: &PUDataset, rho: f64, seed: u64) -> Result<PUDataset> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!(
            "removal fraction must lie in [0,1), got {rho}"
        )));
    }
    let mut rng = StreamRng::new(seed, "data/extreme");
    let mut hidden_pos: Vec<usize> = ds
        .examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.pu_tag == PuTag::U && e.hidden_label == 1.0)
        .map(|(i, _)| i)
        .collect();
    let k = (rho * hidden_pos.len() as f64).floor() as usize;
    rng.shuffle(&mut hidden_pos);
    let drop: std::collections::HashSet<usize> = hidden_pos.into_iter().take(k).collect();
    let examples: Vec<Example> = ds
        .examples
        .iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, e)| e.clone())
        .collect();
    PUDataset::new(examples, ds.prior, Regime::Extreme)
}

/// Build a PU split from a fully labeled source.
///
/// balanced: tag `n_labeled` random positives P, everything else goes to U.
/// imbalanced: keep all negatives and floor(prior/(1-prior) * n_neg) positives
/// in U, so U's positive fraction matches the target prior; the rest of the
/// positives are discarded.
/// extreme: imbalanced, then delete fraction `rho` of U's positives.
pub fn make_split(
    source: &[(Vec<f64>, f64)],
    prior: f64,
    n_labeled: usize,
    regime: Regime,
    rho: f64,
    seed: u64,
) -> Result<PUDataset> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "class prior must lie in (0,1), got {prior}"
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!(
            "removal fraction must lie in [0,1), got {rho}"
        )));
    }
    if n_labeled == 0 {
        return Err(Error::InvalidConfig("n_labeled must be positive".into()));
    }
    let mut pos_idx = Vec::new();
    let mut neg_idx = Vec::new();
    for (i, (_, label)) in source.iter().enumerate() {
        match *label {
            l if l == 1.0 => pos_idx.push(i),
            l if l == -1.0 => neg_idx.push(i),
            other => return Err(Error::InvalidLabel(other)),
        }
    }
    if pos_idx.len() < n_labeled {
        return Err(Error::InfeasibleCounts(format!(
            "source has {} positives, need at least n_labeled = {}",
            pos_idx.len(),
            n_labeled
        )));
    }
    let mut rng = StreamRng::new(seed, "data/split");
    rng.shuffle(&mut pos_idx);

    let labeled = &pos_idx[..n_labeled];
    let unlabeled_pos: &[usize] = match regime {
        Regime::Balanced => &pos_idx[n_labeled..],
        Regime::Imbalanced | Regime::Extreme => {
            let n_pos_u = (prior / (1.0 - prior) * neg_idx.len() as f64).floor() as usize;
            if n_labeled + n_pos_u > pos_idx.len() {
                return Err(Error::InfeasibleCounts(format!(
                    "need {} positives ({} labeled + {} unlabeled), source has {}",
                    n_labeled + n_pos_u,
                    n_labeled,
                    n_pos_u,
                    pos_idx.len()
                )));
            }
            let kept = if regime == Regime::Extreme {
                n_pos_u - (rho * n_pos_u as f64).floor() as usize
            } else {
                n_pos_u
            };
            &pos_idx[n_labeled..n_labeled + kept]
        }
    };

    let mut examples = Vec::new();
    for &i in labeled {
        examples.push(Example::new(source[i].0.clone(), PuTag::P, 1.0)?);
    }
    for &i in unlabeled_pos {
        examples.push(Example::new(source[i].0.clone(), PuTag::U, 1.0)?);
    }
    for &i in &neg_idx {
        examples.push(Example::new(source[i].0.clone(), PuTag::U, -1.0)?);
    }
    rng.shuffle(&mut examples);
    PUDataset::new(examples, prior, regime)
}

/// One augmented view: additive Gaussian noise of the given strength, then
/// per-coordinate dropout. Each coordinate consumes one normal draw and one
/// uniform draw regardless of the parameters, so stream positions stay
/// comparable across configurations.
pub fn augment(x: &[f64], strength: f64, dropout_p: f64, rng: &mut StreamRng) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let noisy = v + strength * rng.standard_normal();
            if rng.unit() < dropout_p {
                0.0
            } else {
                noisy
            }
        })
        .collect()
}

fn format_feature(v: f64) -> String {
    // 17 significant digits: enough for an exact f64 round trip.
    format!("{v:.16e}")
}

/// Write the dataset in the documented CSV schema:
/// header `f0,...,f{d-1},pu_tag,true_label`, LF line endings.
pub fn save_csv(ds: &PUDataset, path: &Path) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptySet("cannot save an empty dataset"));
    }
    let d = ds.dim();
    let mut out = String::new();
    for j in 0..d {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("pu_tag,true_label\n");
    for e in ds.examples() {
        for v in &e.x {
            out.push_str(&format_feature(*v));
            out.push(',');
        }
        let tag = match e.pu_tag {
            PuTag::P => "P",
            PuTag::U => "U",
        };
        let label = if e.hidden_label == 1.0 { "1" } else { "-1" };
        out.push_str(tag);
        out.push(',');
        out.push_str(label);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Load a dataset written by [`save_csv`]. The recorded prior is the file's
/// empirical hidden-positive fraction; callers with a configured prior should
/// override it via [`PUDataset::with_prior`].
pub fn load_csv(path: &Path) -> Result<PUDataset> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[cols.len() - 2] != "pu_tag" || cols[cols.len() - 1] != "true_label" {
        return Err(Error::Parse {
            line: 1,
            msg: "header must be f0,...,f{d-1},pu_tag,true_label".into(),
        });
    }
    let d = cols.len() - 2;
    for (j, col) in cols[..d].iter().enumerate() {
        if *col != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                msg: format!("feature column {j} named {col:?}, expected \"f{j}\""),
            });
        }
    }
    let mut examples = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1; // 1-based, header is line 1
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != d + 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, got {}", d + 2, fields.len()),
            });
        }
        let mut x = Vec::with_capacity(d);
        for (j, f) in fields[..d].iter().enumerate() {
            x.push(f.parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("feature f{j}: {e}"),
            })?);
        }
        let pu_tag = match fields[d] {
            "P" => PuTag::P,
            "U" => PuTag::U,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("pu_tag must be P or U, got {other:?}"),
                })
            }
        };
        let label = match fields[d + 1] {
            "1" | "+1" => 1.0,
            "-1" => -1.0,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("true_label must be 1 or -1, got {other:?}"),
                })
            }
        };
        let example = Example::new(x, pu_tag, label).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        examples.push(example);
    }
    if examples.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "file has a header but no rows".into(),
        });
    }
    let pos = examples.iter().filter(|e| e.hidden_label == 1.0).count();
    let prior = pos as f64 / examples.len() as f64;
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::InvalidConfig(
            "file contains a single hidden class; PU training needs both".into(),
        ));
    }
    PUDataset::new(examples, prior, Regime::Balanced)
}
