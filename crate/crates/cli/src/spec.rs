//! Experiment specifications: everything a run depends on, in a form that
//! round-trips through JSON and is echoed into every output.

use std::fmt;
use std::str::FromStr;

use fsep_core::dynamics::{Observable, ObserverSpec};
use fsep_core::gibbs::ParitySource;
use fsep_core::lattice::{ExclusionConfig, StackConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub command: Command,
    /// JSON-lines destination; standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Fssep,
    Ssm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Simulate {
        model: Model,
        state: StateSpec,
        #[serde(default)]
        sites: Option<usize>,
        steps: u64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        observers: Vec<ObserverString>,
    },
    ExactRing {
        sites: usize,
        particles: u64,
        #[serde(default = "default_state_cap")]
        state_cap: usize,
        /// Rows of the π table to print.
        #[serde(default = "default_table_cap")]
        table_cap: usize,
        #[serde(default)]
        rational: bool,
    },
    ExactTransfer {
        zeta: f64,
        #[serde(default)]
        hmax: Option<u32>,
        #[serde(default)]
        cylinders: Vec<String>,
        #[serde(default)]
        ring_sites: Option<usize>,
    },
    Gibbs {
        #[serde(default)]
        zeta: Option<f64>,
        #[serde(default)]
        rho_e: Option<f64>,
        sites: usize,
        samples: u64,
        #[serde(default = "default_parity")]
        parity: ParitySource,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        emit_configs: bool,
    },
    Quench {
        rho: f64,
        sites: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_runs")]
        runs: u64,
        #[serde(default = "default_max_steps")]
        max_steps: u64,
    },
    Verify {
        #[serde(flatten)]
        test: VerifyTest,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum VerifyTest {
    /// Window law of fresh samples against samples advanced one step.
    Stationarity {
        #[serde(default = "default_model")]
        model: Model,
        state: StateSpec,
        #[serde(default = "default_sites")]
        sites: usize,
        #[serde(default = "default_k")]
        k: usize,
        samples: u64,
        #[serde(default = "default_stride")]
        stride: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    /// Exact stationary law against the weights `4^{-z}`.
    DetailedBalance {
        sites: usize,
        particles: u64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    /// Independence of consecutive gaps between frozen markers.
    Renewal {
        rho: f64,
        sites: usize,
        runs: u64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    /// Every random balanced ring becomes left- or right-moving.
    Halfdensity {
        sites: usize,
        runs: u64,
        #[serde(default = "default_max_steps")]
        max_steps: u64,
    },
    /// Window laws of `φ` images: stepping the exclusion ring `steps` times
    /// against stepping the stack ring and then mapping.
    Equivariance {
        zeta: f64,
        #[serde(default = "default_sites")]
        sites: usize,
        #[serde(default = "default_one")]
        steps: u64,
        #[serde(default = "default_k")]
        k: usize,
        samples: u64,
        #[serde(default = "default_stride")]
        stride: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    /// Decay ratio of zero-indicator covariances against `(1-ζ)/(1+ζ)`.
    Correlation {
        zeta: f64,
        sites: usize,
        samples: u64,
        #[serde(default = "default_relative")]
        tolerance: f64,
    },
}

fn default_model() -> Model {
    Model::Ssm
}
fn default_sites() -> usize {
    256
}
fn default_one() -> u64 {
    1
}
fn default_state_cap() -> usize {
    200_000
}
fn default_table_cap() -> usize {
    1000
}
fn default_parity() -> ParitySource {
    ParitySource::Even
}
fn default_k() -> usize {
    2
}
fn default_runs() -> u64 {
    1
}
fn default_max_steps() -> u64 {
    10_000_000
}
fn default_stride() -> usize {
    4
}
fn default_alpha() -> f64 {
    0.01
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_relative() -> f64 {
    0.1
}

impl Command {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Simulate { seed, .. }
            | Command::Gibbs { seed, .. }
            | Command::Quench { seed, .. }
            | Command::Verify { seed, .. } => Some(*seed),
            Command::ExactRing { .. } | Command::ExactTransfer { .. } => None,
        }
    }

    pub fn set_seed(&mut self, value: u64) {
        match self {
            Command::Simulate { seed, .. }
            | Command::Gibbs { seed, .. }
            | Command::Quench { seed, .. }
            | Command::Verify { seed, .. } => *seed = value,
            Command::ExactRing { .. } | Command::ExactTransfer { .. } => {}
        }
    }
}

/// How to produce an initial configuration.
///
/// Text forms: a literal `ring:M:...` configuration, `bernoulli:rho=R`
/// (independent sites), `fixed:rho=R` (`round(ρM)` particles placed
/// uniformly), `gibbs:zeta=Z` or `gibbs:rho_e=R` (even-sector Gibbs ring;
/// its φ-image when the model is the exclusion process), and
/// `etis:rho_e=R,kappa=K` (Gibbs ring plus Bernoulli parities).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StateSpec {
    Exclusion(ExclusionConfig),
    Stack(StackConfig),
    Bernoulli { rho: f64 },
    Fixed { rho: f64 },
    Gibbs { zeta: f64 },
    Etis { rho_e: f64, kappa: f64 },
}

fn params(body: &str) -> Result<Vec<(&str, f64)>, CliError> {
    body.split(',')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected key=value, got {p:?}")))?;
            let v = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{k}: {v:?} is not a number")))?;
            Ok((k.trim(), v))
        })
        .collect()
}

fn one(params: &[(&str, f64)], key: &str) -> Result<f64, CliError> {
    params
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| CliError::Usage(format!("missing parameter {key}")))
}

impl FromStr for StateSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if s.starts_with("ring:") {
            let body = s.splitn(3, ':').nth(2).unwrap_or("");
            return if body.contains(',') {
                Ok(StateSpec::Stack(s.parse()?))
            } else {
                Ok(StateSpec::Exclusion(s.parse()?))
            };
        }
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        let p = params(body)?;
        match kind {
            "bernoulli" => Ok(StateSpec::Bernoulli { rho: one(&p, "rho")? }),
            "fixed" => Ok(StateSpec::Fixed { rho: one(&p, "rho")? }),
            "gibbs" => match (one(&p, "zeta"), one(&p, "rho_e")) {
                (Ok(zeta), _) => Ok(StateSpec::Gibbs { zeta }),
                (_, Ok(rho_e)) => Ok(StateSpec::Gibbs {
                    zeta: fsep_core::transfer::fugacity_of_density(rho_e)?,
                }),
                _ => Err(CliError::Usage("gibbs state needs zeta or rho_e".into())),
            },
            "etis" => Ok(StateSpec::Etis {
                rho_e: one(&p, "rho_e")?,
                kappa: one(&p, "kappa")?,
            }),
            other => Err(CliError::Usage(format!("unknown state kind {other:?}"))),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Exclusion(x) => x.fmt(f),
            StateSpec::Stack(n) => n.fmt(f),
            StateSpec::Bernoulli { rho } => write!(f, "bernoulli:rho={rho}"),
            StateSpec::Fixed { rho } => write!(f, "fixed:rho={rho}"),
            StateSpec::Gibbs { zeta } => write!(f, "gibbs:zeta={zeta}"),
            StateSpec::Etis { rho_e, kappa } => write!(f, "etis:rho_e={rho_e},kappa={kappa}"),
        }
    }
}

impl TryFrom<String> for StateSpec {
    type Error = CliError;
    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl From<StateSpec> for String {
    fn from(s: StateSpec) -> String {
        s.to_string()
    }
}

/// Observer in text form: `cylinder:k=3`, `frozen`, `regions` or `parity`,
/// optionally followed by `@every`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ObserverString(pub ObserverSpec);

impl FromStr for ObserverString {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let (body, every) = match s.split_once('@') {
            Some((b, e)) => (
                b,
                e.parse()
                    .map_err(|_| CliError::Usage(format!("observer period {e:?} is not an integer")))?,
            ),
            None => (s, 0),
        };
        let (kind, rest) = body.split_once(':').unwrap_or((body, ""));
        let observable = match kind {
            "cylinder" => Observable::Cylinder {
                k: one(&params(rest)?, "k")? as usize,
            },
            "frozen" => Observable::Frozen,
            "regions" => Observable::Regions,
            "parity" => Observable::Parity,
            other => return Err(CliError::Usage(format!("unknown observer {other:?}"))),
        };
        Ok(ObserverString(ObserverSpec { observable, every }))
    }
}

impl fmt::Display for ObserverString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.observable {
            Observable::Cylinder { k } => write!(f, "cylinder:k={k}")?,
            Observable::Frozen => f.write_str("frozen")?,
            Observable::Regions => f.write_str("regions")?,
            Observable::Parity => f.write_str("parity")?,
        }
        if self.0.every > 0 {
            write!(f, "@{}", self.0.every)?;
        }
        Ok(())
    }
}

impl TryFrom<String> for ObserverString {
    type Error = CliError;
    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl From<ObserverString> for String {
    fn from(o: ObserverString) -> String {
        o.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_strings_round_trip() {
        for s in [
            "ring:6:011010",
            "ring:3:2,0,4",
            "bernoulli:rho=0.7",
            "fixed:rho=0.25",
            "gibbs:zeta=0.5",
            "etis:rho_e=2,kappa=0.3",
        ] {
            let spec: StateSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!("gibbs:rho_e=2".parse::<StateSpec>().unwrap(), StateSpec::Gibbs { zeta: 0.5 });
        assert!("gibbs:".parse::<StateSpec>().is_err());
        assert!("lattice:rho=1".parse::<StateSpec>().is_err());
        assert!("ring:4:011".parse::<StateSpec>().is_err());
    }

    #[test]
    fn observer_strings_round_trip() {
        for s in ["cylinder:k=3@10", "frozen", "regions@100", "parity@5"] {
            assert_eq!(s.parse::<ObserverString>().unwrap().to_string(), s);
        }
        assert!("cylinder".parse::<ObserverString>().is_err());
        assert!("frozen@x".parse::<ObserverString>().is_err());
    }

    #[test]
    fn specs_round_trip_through_json() {
        let spec = ExperimentSpec {
            command: Command::Verify {
                test: VerifyTest::Stationarity {
                    model: Model::Ssm,
                    state: StateSpec::Gibbs { zeta: 0.5 },
                    sites: 64,
                    k: 3,
                    samples: 10_000,
                    stride: 4,
                    alpha: 0.01,
                },
                seed: 3,
            },
            output: None,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains(r#""command":"verify""#) && json.contains(r#""test":"stationarity""#));
        assert_eq!(serde_json::from_str::<ExperimentSpec>(&json).unwrap(), spec);
        let minimal: ExperimentSpec =
            serde_json::from_str(r#"{"command":"quench","rho":0.3,"sites":1000}"#).unwrap();
        assert_eq!(minimal.command.seed(), Some(0));
    }
}
