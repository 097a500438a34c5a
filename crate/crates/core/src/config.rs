//! Experiment configuration: a flat `key = value` text format with section
//! prefixes (`data.`, `model.`, `optim.`, `risk.`, `select.`, `ssl.`,
//! `pspu.`, `run.`).
//!
//! `#` starts a comment, blank lines are skipped, unknown and duplicate keys
//! are rejected, and every key has a default so the empty file is a valid
//! config. [`ExperimentConfig::resolved`] renders the fully resolved state
//! back into the same format; parsing that text reproduces the config
//! exactly, which is what makes archived configs re-runnable.

use crate::data::Regime;
use crate::error::{Error, Result};
use crate::pspu::PSPUConfig;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone)]
pub struct DataConfig {
    pub dim: usize,
    pub n_total: usize,
    /// Marginal positive probability of the generating distribution.
    pub prior: f64,
    pub n_labeled: usize,
    pub separation: f64,
    pub regime: Regime,
    /// Fraction of hidden positives removed from U in the extreme regime.
    pub rho: f64,
    /// Size of the fully labeled held-out evaluation set.
    pub n_test: usize,
    /// Load the training split from this CSV instead of generating it.
    pub path: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dim: 20,
            n_total: 2000,
            prior: 0.1,
            n_labeled: 60,
            separation: 2.0,
            regime: Regime::Imbalanced,
            rho: 0.5,
            n_test: 2000,
            path: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub plot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: vec![0, 1, 2, 3, 4],
            out: PathBuf::from("runs"),
            plot: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub pspu: PSPUConfig,
    pub run: RunConfig,
}

/// Key-value table with line provenance; duplicates rejected at parse time,
/// leftovers rejected at the end, so typos never pass silently.
struct KeyTable {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyTable {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "empty key".into(),
                });
            }
            if let Some((first_line, _)) = entries.get(&key) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate key {key:?} (first set at line {first_line})"),
                });
            }
            entries.insert(key, (line_no, value));
        }
        Ok(KeyTable { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn take_with<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some((line, value)) => parse(&value).map_err(|msg| Error::Parse {
                line,
                msg: format!("key {key}: {msg}"),
            }),
        }
    }

    fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.take_with(key, default, |v| {
            v.parse::<usize>()
                .map_err(|_| format!("invalid non-negative integer {v:?}"))
        })
    }

    fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.take_with(key, default, |v| {
            v.parse::<f64>().map_err(|_| format!("invalid number {v:?}"))
        })
    }

    fn take_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        self.take_with(key, default, |v| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected true or false, got {v:?}")),
        })
    }

    fn take_enum<T: FromStr<Err = Error>>(&mut self, key: &str, default: T) -> Result<T> {
        self.take_with(key, default, |v| {
            v.parse::<T>().map_err(|e| e.to_string())
        })
    }

    /// Unknown keys are fatal; report the first by line order.
    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self
            .entries
            .iter()
            .min_by_key(|(_, (line, _))| *line)
            .map(|(k, v)| (k.clone(), v.clone()))
        {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key {key:?}"),
            });
        }
        Ok(())
    }
}

fn parse_list<T: FromStr>(value: &str, what: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| format!("invalid {what} entry {s:?}"))
        })
        .collect()
}

fn join_list<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut t = KeyTable::parse(text)?;
        let dd = DataConfig::default();
        let pd = PSPUConfig::default();
        let rd = RunConfig::default();

        let data = DataConfig {
            dim: t.take_usize("data.dim", dd.dim)?,
            n_total: t.take_usize("data.n_total", dd.n_total)?,
            prior: t.take_f64("data.prior", dd.prior)?,
            n_labeled: t.take_usize("data.n_labeled", dd.n_labeled)?,
            separation: t.take_f64("data.separation", dd.separation)?,
            regime: t.take_enum("data.regime", dd.regime)?,
            rho: t.take_f64("data.rho", dd.rho)?,
            n_test: t.take_usize("data.n_test", dd.n_test)?,
            path: t.take("data.path").map(|(_, v)| PathBuf::from(v)),
        };

        let mut pspu = pd.clone();
        pspu.hidden = t.take_with("model.hidden", pd.hidden.clone(), |v| {
            parse_list::<usize>(v, "layer width")
        })?;
        pspu.lr_pu = t.take_f64("optim.lr_pu", pd.lr_pu)?;
        pspu.lr_ps = t.take_f64("optim.lr_ps", pd.lr_ps)?;
        pspu.momentum = t.take_f64("optim.momentum", pd.momentum)?;
        pspu.batch_pu = t.take_usize("optim.batch_pu", pd.batch_pu)?;
        pspu.batch_ps = t.take_usize("optim.batch_ps", pd.batch_ps)?;
        pspu.risk.prior = t.take_f64("risk.prior", pd.risk.prior)?;
        pspu.estimator = t.take_enum("risk.estimator", pd.estimator)?;
        pspu.risk.gamma = t.take_f64("risk.gamma", pd.risk.gamma)?;
        pspu.risk.beta_nn = t.take_f64("risk.beta_nn", pd.risk.beta_nn)?;
        // The surrogate is not pluggable; the key exists so configs can say
        // so explicitly, and anything else is refused.
        t.take_with("risk.loss", (), |v| {
            if v == "sigmoid" {
                Ok(())
            } else {
                Err(format!("only the sigmoid surrogate is available, got {v:?}"))
            }
        })?;
        pspu.selection.ratio = t.take_f64("select.ratio", pd.selection.ratio)?;
        pspu.selection.alpha = t.take_f64("select.alpha", pd.selection.alpha)?;
        pspu.selection.n_mix = t.take_with("select.n_mix", pd.selection.n_mix, |v| {
            if v == "auto" {
                Ok(None)
            } else {
                v.parse::<usize>()
                    .map(Some)
                    .map_err(|_| format!("expected auto or an integer, got {v:?}"))
            }
        })?;
        pspu.ssl.objective = t.take_enum("ssl.objective", pd.ssl.objective)?;
        pspu.ssl.w_u = t.take_f64("ssl.w_u", pd.ssl.w_u)?;
        pspu.ssl.w_c = t.take_f64("ssl.w_c", pd.ssl.w_c)?;
        pspu.ssl.temperature = t.take_f64("ssl.temperature", pd.ssl.temperature)?;
        pspu.ssl.sigma_aug = t.take_f64("ssl.sigma_aug", pd.ssl.sigma_aug)?;
        pspu.ssl.dropout_p = t.take_f64("ssl.dropout_p", pd.ssl.dropout_p)?;
        pspu.stop_e = t.take_usize("pspu.stop_e", pd.stop_e)?;
        pspu.lambda = t.take_f64("pspu.lambda", pd.lambda)?;
        pspu.transfer = t.take_enum("pspu.transfer", pd.transfer)?;
        pspu.mixup = t.take_bool("pspu.mixup", pd.mixup)?;

        let run = RunConfig {
            seeds: t.take_with("run.seeds", rd.seeds.clone(), |v| {
                parse_list::<u64>(v, "seed")
            })?,
            out: t
                .take("run.out")
                .map(|(_, v)| PathBuf::from(v))
                .unwrap_or(rd.out),
            plot: t.take_bool("run.plot", rd.plot)?,
        };

        t.finish()?;
        let cfg = ExperimentConfig { data, pspu, run };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.pspu.validate()?;
        let d = &self.data;
        if d.dim == 0 {
            return Err(Error::InvalidConfig("data.dim must be positive".into()));
        }
        if !(d.prior > 0.0 && d.prior < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "data.prior must lie in (0,1), got {}",
                d.prior
            )));
        }
        if !(0.0..1.0).contains(&d.rho) {
            return Err(Error::InvalidConfig(format!(
                "data.rho must lie in [0,1), got {}",
                d.rho
            )));
        }
        if d.separation < 0.0 {
            return Err(Error::InvalidConfig(
                "data.separation must be >= 0".into(),
            ));
        }
        if d.n_test == 0 {
            return Err(Error::InvalidConfig("data.n_test must be positive".into()));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::InvalidConfig("run.seeds must be nonempty".into()));
        }
        let mut sorted = self.run.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.run.seeds.len() {
            return Err(Error::InvalidConfig(
                "run.seeds contains duplicates".into(),
            ));
        }
        Ok(())
    }

    /// Per-seed training config; `method`-level overrides happen downstream.
    pub fn pspu_for_seed(&self, seed: u64) -> PSPUConfig {
        let mut cfg = self.pspu.clone();
        cfg.seed = seed;
        cfg
    }

    /// Render every knob in the file format. Parsing the output reproduces
    /// this config; the text is archived beside each run's outputs.
    pub fn resolved(&self) -> String {
        let mut s = String::new();
        let d = &self.data;
        let p = &self.pspu;
        let r = &self.run;
        let _ = writeln!(s, "data.dim = {}", d.dim);
        let _ = writeln!(s, "data.n_total = {}", d.n_total);
        let _ = writeln!(s, "data.prior = {}", d.prior);
        let _ = writeln!(s, "data.n_labeled = {}", d.n_labeled);
        let _ = writeln!(s, "data.separation = {}", d.separation);
        let _ = writeln!(s, "data.regime = {}", d.regime);
        let _ = writeln!(s, "data.rho = {}", d.rho);
        let _ = writeln!(s, "data.n_test = {}", d.n_test);
        if let Some(path) = &d.path {
            let _ = writeln!(s, "data.path = {}", path.display());
        }
        let _ = writeln!(s, "model.hidden = {}", join_list(&p.hidden));
        let _ = writeln!(s, "optim.lr_pu = {}", p.lr_pu);
        let _ = writeln!(s, "optim.lr_ps = {}", p.lr_ps);
        let _ = writeln!(s, "optim.momentum = {}", p.momentum);
        let _ = writeln!(s, "optim.batch_pu = {}", p.batch_pu);
        let _ = writeln!(s, "optim.batch_ps = {}", p.batch_ps);
        let _ = writeln!(s, "risk.prior = {}", p.risk.prior);
        let _ = writeln!(s, "risk.estimator = {}", p.estimator);
        let _ = writeln!(s, "risk.gamma = {}", p.risk.gamma);
        let _ = writeln!(s, "risk.beta_nn = {}", p.risk.beta_nn);
        let _ = writeln!(s, "risk.loss = sigmoid");
        let _ = writeln!(s, "select.ratio = {}", p.selection.ratio);
        let _ = writeln!(s, "select.alpha = {}", p.selection.alpha);
        let n_mix = p
            .selection
            .n_mix
            .map(|n| n.to_string())
            .unwrap_or_else(|| "auto".into());
        let _ = writeln!(s, "select.n_mix = {n_mix}");
        let _ = writeln!(s, "ssl.objective = {}", p.ssl.objective);
        let _ = writeln!(s, "ssl.w_u = {}", p.ssl.w_u);
        let _ = writeln!(s, "ssl.w_c = {}", p.ssl.w_c);
        let _ = writeln!(s, "ssl.temperature = {}", p.ssl.temperature);
        let _ = writeln!(s, "ssl.sigma_aug = {}", p.ssl.sigma_aug);
        let _ = writeln!(s, "ssl.dropout_p = {}", p.ssl.dropout_p);
        let _ = writeln!(s, "pspu.stop_e = {}", p.stop_e);
        let _ = writeln!(s, "pspu.lambda = {}", p.lambda);
        let _ = writeln!(s, "pspu.transfer = {}", p.transfer);
        let _ = writeln!(s, "pspu.mixup = {}", p.mixup);
        let _ = writeln!(s, "run.seeds = {}", join_list(&r.seeds));
        let _ = writeln!(s, "run.out = {}", r.out.display());
        let _ = writeln!(s, "run.plot = {}", r.plot);
        s
    }
}
