//! Run configuration, read from a single TOML file.
//!
//! ```toml
//! experiment = "tv-window"
//! seed = 7
//! output = "tv"            # relative to the output root
//! dump = false             # per-sample / per-spectrum files
//!
//! [kernel]
//! kind = "lazy-nn"
//! a = 0.25
//!
//! [potential]
//! kind = "linear"
//!
//! [tv-window]
//! lambda = 1e-3
//! horizon = 1.0
//! n_over_h2 = [4.0, 16.0]
//! endpoints = [[1, 1], [10, 10]]
//! upper = 4.0
//! bins = [20, 10]
//!
//! [tolerances]
//! endpoint_uniformity = 0.05
//! ```
//!
//! Exactly one experiment block, matching `experiment`, must be present.
//! Nothing has a default except `output`, `dump`, `truncation` and
//! `tolerances`: seeds and sample counts are always explicit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::report::Check;
use crate::model::{make_kernel, KernelSpec, PotentialFamily, WalkKernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    LazyNn { a: f64 },
    Weights { offsets: Vec<i64>, probs: Vec<f64> },
    Geometric { rho: f64, range: u32 },
}

impl KernelConfig {
    pub fn build(&self) -> Result<WalkKernel> {
        let spec = match self {
            KernelConfig::LazyNn { a } => KernelSpec::LazyNearestNeighbor { a: *a },
            KernelConfig::Weights { offsets, probs } => {
                if offsets.len() != probs.len() {
                    return Err(Error::Config("kernel.offsets and kernel.probs differ in length".into()));
                }
                KernelSpec::Weights(offsets.iter().copied().zip(probs.iter().copied()).collect())
            }
            KernelConfig::Geometric { rho, range } => KernelSpec::TruncatedGeometric { rho: *rho, range: *range },
        };
        make_kernel(&spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Linear,
    Power { alpha: f64 },
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialFamily> {
        match self {
            PotentialConfig::Linear => Ok(PotentialFamily::linear()),
            PotentialConfig::Power { alpha } => PotentialFamily::power(*alpha),
        }
    }
}

/// Continuum solver settings shared by the experiments that need `φ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumConfig {
    /// Dirichlet wall `R`.
    pub cutoff: f64,
    /// Interior grid points.
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenParams {
    pub lambdas: Vec<f64>,
    pub continuum: ContinuumConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSource {
    pub u: usize,
    pub v: usize,
    /// Half-length `N` in units of `H²`.
    pub n_over_h2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FddParams {
    /// Every λ is compared with the diffusion; the first and last entries
    /// (after sorting by decreasing λ) define the improvement checks.
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    pub samples: usize,
    /// Euler–Maruyama step of the diffusion.
    pub dt: f64,
    pub bins: usize,
    pub upper: f64,
    pub continuum: ContinuumConfig,
    /// Compare tilted bridges (mid-window) instead of the stationary chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bridge: Option<BridgeSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessParams {
    pub lambdas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub samples: usize,
    /// `(ε, δ)` at which `estimate/δ` is compared across λ.
    pub reference: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowParams {
    pub lambda: f64,
    pub horizon: f64,
    pub n_over_h2: Vec<f64>,
    pub endpoints: Vec<[usize; 2]>,
    pub upper: f64,
    /// `[fine, coarse]` cells per axis.
    pub bins: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StayPositiveParams {
    pub ns: Vec<usize>,
    pub x: usize,
    pub y: usize,
    pub m_fractions: Vec<f64>,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeetingParams {
    pub ns: Vec<usize>,
    /// `x, y, z, w` as fractions of `η√n`.
    pub endpoints: [f64; 4],
    pub eta: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaGoodParams {
    pub lambda: f64,
    pub n_over_h2: f64,
    pub eta: f64,
    /// Endpoints `[u, v]` of the two bridges, in units of `H`.
    pub first: [f64; 2],
    pub second: [f64; 2],
    /// Independent pairs of bridges.
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSampleParams {
    pub lambda: f64,
    pub u: usize,
    pub v: usize,
    pub n_half: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub dump: bool,
    /// Lattice truncation `M` override for every spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    pub kernel: KernelConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "eigen-convergence")]
    pub eigen_convergence: Option<EigenParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fdd: Option<FddParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tightness: Option<TightnessParams>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "tv-window")]
    pub tv_window: Option<WindowParams>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "stay-positive")]
    pub stay_positive: Option<StayPositiveParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meeting: Option<MeetingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "eta-good")]
    pub eta_good: Option<EtaGoodParams>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "bridge-sample")]
    pub bridge_sample: Option<BridgeSampleParams>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn blocks(&self) -> [(&'static str, bool); 8] {
        [
            ("eigen-convergence", self.eigen_convergence.is_some()),
            ("fdd", self.fdd.is_some()),
            ("tightness", self.tightness.is_some()),
            ("tv-window", self.tv_window.is_some()),
            ("stay-positive", self.stay_positive.is_some()),
            ("meeting", self.meeting.is_some()),
            ("eta-good", self.eta_good.is_some()),
            ("bridge-sample", self.bridge_sample.is_some()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let entry = super::catalogue::entry(&self.experiment)?;
        for (name, value) in &self.tolerances {
            match entry.metric(name).map(|m| m.check) {
                Some(Check::Below(_) | Check::AtLeast(_)) if value.is_finite() => {}
                Some(Check::Below(_) | Check::AtLeast(_)) => {
                    return Err(Error::Config(format!("tolerances.{name} must be finite")))
                }
                Some(_) => return Err(Error::Config(format!("tolerances.{name}: metric has no threshold"))),
                None => {
                    return Err(Error::Config(format!(
                        "tolerances.{name}: unknown metric for `{}` (known: {})",
                        entry.tag,
                        entry.metric_names().join(", ")
                    )))
                }
            }
        }
        if !self.blocks().iter().any(|&(tag, present)| tag == self.experiment && present) {
            let tag = &self.experiment;
            return Err(Error::Config(format!("missing [{tag}] block for experiment `{tag}`")));
        }
        for (tag, present) in self.blocks() {
            if tag != self.experiment && present {
                return Err(Error::Config(format!(
                    "block [{tag}] does not belong to experiment `{}`",
                    self.experiment
                )));
            }
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let at_least_two = |name: &str, n: usize| {
            if n >= 2 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} needs at least two entries")))
            }
        };
        let nonempty = |name: &str, n: usize| {
            if n > 0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must not be empty")))
            }
        };
        if let Some(p) = &self.eigen_convergence {
            nonempty("lambdas", p.lambdas.len())?;
            p.lambdas.iter().try_for_each(|l| positive("lambda", *l))?;
        }
        if let Some(p) = &self.fdd {
            at_least_two("fdd.lambdas", p.lambdas.len())?;
            p.lambdas.iter().try_for_each(|l| positive("lambda", *l))?;
            at_least_two("fdd.times", p.times.len())?;
            positive("dt", p.dt)?;
            positive("upper", p.upper)?;
        }
        if let Some(p) = &self.tightness {
            nonempty("lambdas", p.lambdas.len())?;
            p.lambdas.iter().try_for_each(|l| positive("lambda", *l))?;
            if !p.epsilons.contains(&p.reference[0]) || !p.deltas.contains(&p.reference[1]) {
                return Err(Error::Config("tightness.reference must be one of the (epsilon, delta) pairs".into()));
            }
        }
        if let Some(p) = &self.tv_window {
            positive("lambda", p.lambda)?;
            positive("horizon", p.horizon)?;
            at_least_two("tv-window.n_over_h2", p.n_over_h2.len())?;
            at_least_two("tv-window.endpoints", p.endpoints.len())?;
        }
        if let Some(p) = &self.stay_positive {
            nonempty("ns", p.ns.len())?;
            positive("eta", p.eta)?;
        }
        if let Some(p) = &self.meeting {
            nonempty("ns", p.ns.len())?;
            positive("eta", p.eta)?;
        }
        if let Some(p) = &self.eta_good {
            positive("lambda", p.lambda)?;
            positive("eta", p.eta)?;
            nonempty("replicas", p.replicas)?;
        }
        if let Some(p) = &self.bridge_sample {
            positive("lambda", p.lambda)?;
            nonempty("samples", p.samples)?;
        }
        Ok(())
    }

    /// The experiment block as JSON, for the manifest.
    pub fn parameters(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "stay-positive"
seed = 1
[kernel]
kind = "lazy-nn"
a = 0.25
[potential]
kind = "linear"
[stay-positive]
ns = [100]
x = 1
y = 1
m_fractions = [1.0]
eta = 2.0
"#;

    #[test]
    fn parses_base() {
        let c = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.kernel, KernelConfig::LazyNn { a: 0.25 });
        assert!(c.kernel.build().is_ok());
    }

    #[test]
    fn seed_is_required() {
        let text = BASE.replace("seed = 1\n", "");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn unknown_fields_are_reported_with_position() {
        let text = BASE.replace("eta = 2.0", "eta = 2.0\nsamplez = 3");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("samplez") && err.contains("line"), "{err}");
        let text = BASE.replace("a = 0.25", "a = 0.25\nb = 1");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn blocks_must_match_the_tag() {
        let text = BASE.replace("experiment = \"stay-positive\"", "experiment = \"meeting\"");
        assert!(RunConfig::from_toml(&text).unwrap_err().to_string().contains("[meeting]"));
        let text = BASE.replace("experiment = \"stay-positive\"", "experiment = \"bogus\"");
        assert!(RunConfig::from_toml(&text).unwrap_err().to_string().contains("valid tags"));
    }

    #[test]
    fn tolerance_overrides_are_checked() {
        let ok = format!("{BASE}[tolerances]\nratio_spread = 2.5\n");
        assert_eq!(RunConfig::from_toml(&ok).unwrap().tolerances["ratio_spread"], 2.5);
        let unknown = format!("{BASE}[tolerances]\nratio_sprd = 2.5\n");
        assert!(RunConfig::from_toml(&unknown).unwrap_err().to_string().contains("unknown metric"));
        let info = format!("{BASE}[tolerances]\nband_spread = 2.5\n");
        assert!(RunConfig::from_toml(&info).is_err());
    }

    #[test]
    fn kernel_variants() {
        let w = KernelConfig::Weights {
            offsets: vec![-1, 1],
            probs: vec![0.5, 0.5],
        };
        assert!(w.build().is_ok());
        let bad = KernelConfig::Weights {
            offsets: vec![-1, 1],
            probs: vec![0.5],
        };
        assert!(bad.build().is_err());
        assert!(KernelConfig::Geometric { rho: 0.3, range: 40 }.build().is_ok());
        assert!(PotentialConfig::Power { alpha: -1.0 }.build().is_err());
    }
}
