//! Serializable process descriptions used by the experiment harness.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::processes::{
    make_target, simulate_ar, simulate_binary, simulate_gexpar, ArSpec, BinaryArSpec,
    ContractionCertificate, GexparParams, Noise, TargetSpec, Truth, DEFAULT_BURN_IN,
};

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

/// Truth of a regression process as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TruthConfig {
    Zero { d: usize },
    Linear { intercept: f64, coefs: Vec<f64> },
    Target { spec: TargetSpec },
}

impl TruthConfig {
    pub fn build(&self) -> Result<Truth> {
        Ok(match self {
            TruthConfig::Zero { d } => Truth::Zero { d: *d },
            TruthConfig::Linear { intercept, coefs } => Truth::Linear {
                intercept: *intercept,
                coefs: coefs.clone(),
            },
            TruthConfig::Target { spec } => Truth::Target(make_target(spec)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessConfig {
    Ar {
        truth: TruthConfig,
        #[serde(default)]
        noise: Noise,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default)]
        certificate: Option<ContractionCertificate>,
    },
    Gexpar {
        params: GexparParams,
        #[serde(default)]
        noise: Noise,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default)]
        allow_unstable: bool,
    },
    Binary(BinaryArSpec),
}

impl ProcessConfig {
    pub fn build(&self) -> Result<Process> {
        Ok(match self {
            ProcessConfig::Ar {
                truth,
                noise,
                burn_in,
                certificate,
            } => Process::Ar(ArSpec {
                truth: truth.build()?,
                noise: *noise,
                burn_in: *burn_in,
                certificate: certificate.clone(),
            }),
            ProcessConfig::Gexpar {
                params,
                noise,
                burn_in,
                allow_unstable,
            } => {
                params.validate()?;
                Process::Gexpar {
                    params: params.clone(),
                    noise: *noise,
                    burn_in: *burn_in,
                    allow_unstable: *allow_unstable,
                }
            }
            ProcessConfig::Binary(spec) => {
                spec.check_range()?;
                Process::Binary(spec.clone())
            }
        })
    }
}

/// A runnable data-generating process.
#[derive(Debug, Clone)]
pub enum Process {
    Ar(ArSpec),
    Gexpar {
        params: GexparParams,
        noise: Noise,
        burn_in: usize,
        allow_unstable: bool,
    },
    Binary(BinaryArSpec),
}

/// Simulated sample; `eta` is set for binary processes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub data: Dataset,
    pub eta: Option<Vec<f64>>,
}

impl Process {
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Sample> {
        match self {
            Process::Ar(spec) => Ok(Sample {
                data: simulate_ar(spec, n, seed)?.data,
                eta: None,
            }),
            Process::Gexpar {
                params,
                noise,
                burn_in,
                allow_unstable,
            } => Ok(Sample {
                data: simulate_gexpar(params, n, *noise, *burn_in, seed, *allow_unstable)?.data,
                eta: None,
            }),
            Process::Binary(spec) => {
                let s = simulate_binary(spec, n, seed)?;
                Ok(Sample {
                    data: s.data,
                    eta: Some(s.eta),
                })
            }
        }
    }

    /// Regression function, or `None` for binary processes.
    pub fn truth(&self) -> Option<Truth> {
        match self {
            Process::Ar(spec) => Some(spec.truth.clone()),
            Process::Gexpar { params, .. } => Some(Truth::Gexpar(params.clone())),
            Process::Binary(_) => None,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Process::Ar(spec) => spec.lag_order(),
            Process::Gexpar { params, .. } => params.d(),
            Process::Binary(spec) => spec.input_dim(),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Process::Binary(_))
    }

    pub fn binary_spec(&self) -> Result<&BinaryArSpec> {
        match self {
            Process::Binary(spec) => Ok(spec),
            _ => Err(Error::Config("expected a binary process".into())),
        }
    }
}
