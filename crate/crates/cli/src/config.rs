//! Run settings: a flat TOML file overlaid by command-line flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};
use usc_transfer::sweep::linspace;
use usc_transfer::{Complex64, Model};

/// A parse or validation problem in user input (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

/// Complex amplitude written as `"re,im"`, `[re, im]` or a bare real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Amplitude(pub Complex64);

impl FromStr for Amplitude {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad amplitude {s:?}: {e}"));
        match s.split_once(',') {
            Some((re, im)) => Ok(Self(Complex64::new(parse(re)?, parse(im)?))),
            None => Ok(Self(Complex64::new(parse(s)?, 0.0))),
        }
    }
}

impl<'de> Deserialize<'de> for Amplitude {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Real(f64),
            Pair([f64; 2]),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Real(x) => Ok(Self(Complex64::new(x, 0.0))),
            Raw::Pair([re, im]) => Ok(Self(Complex64::new(re, im))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Every knob shared by the subcommands. Unset fields fall back to the
/// config file, then to the built-in defaults.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Knobs {
    /// Peak coupling g0 / omega_c (also the upper control bound for `optimize`)
    #[arg(long)]
    pub g0: Option<f64>,
    /// Inverse protocol speed 1 / (omega_c T)
    #[arg(long)]
    pub t_inv: Option<f64>,
    /// Gaussian separation tau / T
    #[arg(long)]
    pub tau_ratio: Option<f64>,
    /// Cavity loss rate kappa / omega_c
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Fock-space cutoff
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Amplitude of |gg> in the input state, "re,im"
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<Amplitude>,
    /// Amplitude of the transferred excitation, "re,im"
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<Amplitude>,
    #[arg(long)]
    pub model: Option<Model>,
    /// Piecewise-constant bins per control
    #[arg(long)]
    pub bins: Option<usize>,
    /// Control duration (defaults to T = 1 / t_inv)
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent optimizer starts
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Sweep axis for t_inv, comma separated
    #[arg(long, value_delimiter = ',')]
    pub t_inv_values: Option<Vec<f64>>,
    /// Sweep axis for g0, comma separated
    #[arg(long, value_delimiter = ',')]
    pub g0_values: Option<Vec<f64>>,
    /// Worker threads (defaults to all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl Knobs {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }

    /// Fields set here win over `base`.
    pub fn over(self, base: Knobs) -> Knobs {
        Knobs {
            g0: self.g0.or(base.g0),
            t_inv: self.t_inv.or(base.t_inv),
            tau_ratio: self.tau_ratio.or(base.tau_ratio),
            kappa: self.kappa.or(base.kappa),
            nmax: self.nmax.or(base.nmax),
            alpha: self.alpha.or(base.alpha),
            beta: self.beta.or(base.beta),
            model: self.model.or(base.model),
            bins: self.bins.or(base.bins),
            duration: self.duration.or(base.duration),
            seed: self.seed.or(base.seed),
            restarts: self.restarts.or(base.restarts),
            max_iters: self.max_iters.or(base.max_iters),
            t_inv_values: self.t_inv_values.or(base.t_inv_values),
            g0_values: self.g0_values.or(base.g0_values),
            jobs: self.jobs.or(base.jobs),
        }
    }

    pub fn resolve(self) -> anyhow::Result<Resolved> {
        let t_inv = self.t_inv.unwrap_or(0.04);
        if !(t_inv > 0.0 && t_inv.is_finite()) {
            return usage(format!("t-inv must be positive, got {t_inv}"));
        }
        let t_inv_values = match (self.t_inv_values, self.t_inv) {
            (Some(v), _) => v,
            (None, Some(t)) => vec![t],
            (None, None) => linspace(0.01, 0.10, 10),
        };
        let g0_values = match (self.g0_values, self.g0) {
            (Some(v), _) => v,
            (None, Some(g)) => vec![g],
            (None, None) => linspace(0.05, 0.5, 10),
        };
        let r = Resolved {
            model: self.model.unwrap_or_default(),
            g0: self.g0.unwrap_or(0.3),
            t_inv,
            tau_ratio: self.tau_ratio.unwrap_or(usc_transfer::pulses::DEFAULT_TAU_RATIO),
            kappa: self.kappa.unwrap_or(0.005),
            nmax: self.nmax.unwrap_or(8),
            alpha: self.alpha.map_or(Complex64::new(0.0, 0.0), |a| a.0),
            beta: self.beta.map_or(Complex64::new(1.0, 0.0), |b| b.0),
            bins: self.bins.unwrap_or(20),
            duration: self.duration.unwrap_or(1.0 / t_inv),
            seed: self.seed.unwrap_or(0),
            restarts: self.restarts.unwrap_or(1),
            max_iters: self.max_iters.unwrap_or(500),
            t_inv_values,
            g0_values,
        };
        if r.bins == 0 || r.restarts == 0 {
            return usage("bins and restarts must be at least 1");
        }
        if self.jobs == Some(0) {
            return usage("jobs must be at least 1");
        }
        Ok(r)
    }
}

/// Fully resolved settings; echoed into every JSON output under the same
/// keys the config file uses, so the echo loads back as a config.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Resolved {
    pub model: Model,
    pub g0: f64,
    pub t_inv: f64,
    pub tau_ratio: f64,
    pub kappa: f64,
    pub nmax: usize,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub bins: usize,
    pub duration: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub t_inv_values: Vec<f64>,
    pub g0_values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplitude_forms() {
        assert_eq!("0.6,-0.8".parse::<Amplitude>().unwrap().0, Complex64::new(0.6, -0.8));
        assert_eq!("1".parse::<Amplitude>().unwrap().0, Complex64::new(1.0, 0.0));
        assert!("1;2".parse::<Amplitude>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: Knobs = toml::from_str("g0 = 0.2\nkappa = 0.01\nbeta = \"0,1\"\nt-inv-values = [0.04]").unwrap();
        let cli = Knobs { g0: Some(0.25), ..Default::default() };
        let r = cli.over(file).resolve().unwrap();
        assert_eq!(r.g0, 0.25);
        assert_eq!(r.kappa, 0.01);
        assert_eq!(r.beta, Complex64::new(0.0, 1.0));
        assert_eq!(r.t_inv_values, vec![0.04]);
        assert_eq!(r.g0_values, vec![0.25]);
        assert_eq!(r.duration, 25.0);
    }

    #[test]
    fn echo_loads_back() {
        let cli = Knobs { beta: Some(Amplitude(Complex64::new(0.6, 0.8))), nmax: Some(5), ..Default::default() };
        let r = cli.resolve().unwrap();
        let echoed = toml::to_string(&r).unwrap();
        let again = toml::from_str::<Knobs>(&echoed).unwrap().resolve().unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Knobs>("gee-zero = 1.0").is_err());
    }
}
