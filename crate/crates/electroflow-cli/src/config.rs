//! Run configuration: CLI flags layered over an optional key=value config
//! file. Every run log and CSV row embeds the hash of the fully resolved
//! configuration.

use electroflow::error::{Error, Result};
use electroflow::ipm::{ParamMode, SolveParams};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    IpmLocalized,
    IpmExact,
    Ssp,
}

impl Algorithm {
    pub fn parse(s: &str) -> Result<Algorithm> {
        match s {
            "ipm-localized" => Ok(Algorithm::IpmLocalized),
            "ipm-exact" => Ok(Algorithm::IpmExact),
            "ssp" => Ok(Algorithm::Ssp),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm '{other}' (expected ipm-localized, ipm-exact, or ssp)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::IpmLocalized => "ipm-localized",
            Algorithm::IpmExact => "ipm-exact",
            Algorithm::Ssp => "ssp",
        }
    }
}

/// Fully resolved run configuration; serializable to and from the simple
/// key=value text format.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: ParamMode,
    pub algorithm: Algorithm,
    pub k: Option<usize>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub eps_hat: Option<f64>,
    pub beta_chk: Option<f64>,
    pub t_hat: Option<usize>,
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            mode: ParamMode::Practical,
            algorithm: Algorithm::IpmLocalized,
            k: None,
            beta: None,
            alpha: None,
            eps: None,
            eps_hat: None,
            beta_chk: None,
            t_hat: None,
            timings: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "expected key=value".into(),
                });
            };
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidArgument(format!("malformed {what}: {value}"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "mode" => {
                self.mode = match value {
                    "practical" => ParamMode::Practical,
                    "faithful" => ParamMode::Faithful,
                    _ => return Err(bad("mode (practical|faithful)")),
                }
            }
            "algorithm" => self.algorithm = Algorithm::parse(value)?,
            "k" => self.k = Some(value.parse().map_err(|_| bad("k"))?),
            "beta" => self.beta = Some(value.parse().map_err(|_| bad("beta"))?),
            "alpha" => self.alpha = Some(value.parse().map_err(|_| bad("alpha"))?),
            "eps" => self.eps = Some(value.parse().map_err(|_| bad("eps"))?),
            "eps_hat" => self.eps_hat = Some(value.parse().map_err(|_| bad("eps_hat"))?),
            "beta_chk" => self.beta_chk = Some(value.parse().map_err(|_| bad("beta_chk"))?),
            "t_hat" => self.t_hat = Some(value.parse().map_err(|_| bad("t_hat"))?),
            "timings" => self.timings = value == "true" || value == "1",
            other => {
                return Err(Error::InvalidArgument(format!("unknown config key '{other}'")))
            }
        }
        Ok(())
    }

    /// Canonical key=value serialization (sorted keys, resolved values).
    pub fn serialize(&self) -> String {
        let mut map: BTreeMap<&'static str, String> = BTreeMap::new();
        map.insert("seed", self.seed.to_string());
        map.insert(
            "mode",
            match self.mode {
                ParamMode::Practical => "practical".into(),
                ParamMode::Faithful => "faithful".into(),
            },
        );
        map.insert("algorithm", self.algorithm.as_str().into());
        let params = self.solve_params();
        map.insert("k", params.k.to_string());
        map.insert("beta", format!("{}", params.beta));
        map.insert("alpha", format!("{}", params.alpha));
        map.insert("eps", format!("{}", params.eps));
        map.insert("eps_hat", format!("{}", params.eps_hat));
        map.insert("beta_chk", format!("{}", params.beta_chk));
        map.insert("t_hat", params.t_hat.to_string());
        map.insert("timings", self.timings.to_string());
        let mut out = String::new();
        for (k, v) in map {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// FNV-1a hash of the canonical serialization, hex-encoded.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.serialize().as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Solver parameters with CLI overrides applied. The exact algorithm is
    /// the same driver pinned to the walk-free full-subset regime.
    pub fn solve_params(&self) -> SolveParams {
        let mut p = match self.mode {
            ParamMode::Practical => SolveParams::practical(),
            ParamMode::Faithful => SolveParams::faithful(self.k.unwrap_or(1)),
        };
        if let Some(k) = self.k {
            if self.mode == ParamMode::Faithful {
                p = SolveParams::faithful(k);
            } else {
                p.k = k;
            }
        }
        if let Some(beta) = self.beta {
            p.beta = beta;
        }
        if let Some(alpha) = self.alpha {
            p.alpha = alpha;
        }
        if let Some(eps) = self.eps {
            p.eps = eps;
        }
        if let Some(eps_hat) = self.eps_hat {
            p.eps_hat = eps_hat;
        }
        if let Some(beta_chk) = self.beta_chk {
            p.beta_chk = beta_chk;
        }
        if let Some(t_hat) = self.t_hat {
            p.t_hat = t_hat;
        }
        if self.algorithm == Algorithm::IpmExact {
            p.beta = 1.0;
            p.beta_chk = 1.0;
        }
        p
    }
}
