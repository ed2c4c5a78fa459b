//! Strict JSON experiment configuration.

use std::path::{Path, PathBuf};

use scatter_core::analytic::Transport;
use scatter_core::model::{InverseTempProfile, ModelKind, TransitionMatrix};
use scatter_core::selfconsistent::{confined_profile, wandering_profile, ProfileSolution};
use scatter_core::simulate::{EstimatorKind, RunConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub profile: Option<ProfileSpec>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub t_burn: Option<f64>,
    #[serde(default = "one")]
    pub n_batches: usize,
    #[serde(default = "one")]
    pub n_replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub cgf: Option<CgfSpec>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Basic {
        beta: f64,
        #[serde(default = "half")]
        q0: f64,
        #[serde(default = "unit")]
        p0: f64,
        /// Phase points are recorded every `sample_spacing` time units.
        #[serde(default = "ten")]
        sample_spacing: f64,
    },
    Wandering {
        #[serde(default = "one")]
        n_tracers: usize,
    },
    Confined,
    General {
        matrix: MatrixSpec,
    },
}

fn half() -> f64 {
    0.5
}

fn unit() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    Wandering,
    TransmitReflect {
        transmit: f64,
    },
    /// Rows indexed in the chain-state order `(0,+),…,(N−1,+),(N,−),…,(1,−)`.
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Explicit { temperatures: Vec<f64> },
    Linear { t_left: f64, t_right: f64, n_links: usize },
    Selfconsistent { t_left: f64, t_right: f64, n_links: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Prepended to every file name.
    #[serde(default)]
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgfSpec {
    pub link: usize,
    pub lambdas: LambdaGrid,
    #[serde(default)]
    pub empirical: Option<EmpiricalSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaGrid {
    Values(Vec<f64>),
    /// `count` points strictly inside `(start, stop)`.
    Range {
        start: f64,
        stop: f64,
        count: usize,
    },
    /// Path to a JSON file holding a `values` or `range` grid, relative to the config.
    Include(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalSpec {
    pub horizon: f64,
    pub n_samples: usize,
    pub estimator: EstimatorKind,
    /// Resampling interval of the population estimator.
    #[serde(default = "unit")]
    pub resample_interval: f64,
}

/// A validated configuration with every derived object built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: ModelKind,
    pub profile: Option<InverseTempProfile>,
    pub solution: Option<ProfileSolution>,
    pub lambdas: Vec<f64>,
}

fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    /// Reads the file and resolves an included λ-grid relative to it.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(cgf) = cfg.cgf.as_mut() {
            if let LambdaGrid::Include(rel) = &cgf.lambdas {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                let inc = base.join(rel);
                let text = std::fs::read_to_string(&inc)
                    .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", inc.display())))?;
                let grid: LambdaGrid =
                    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", inc.display())))?;
                if let LambdaGrid::Include(_) = grid {
                    return invalid("an included λ-grid cannot include another file");
                }
                cgf.lambdas = grid;
            }
        }
        Ok(cfg)
    }

    pub fn transport(&self) -> Option<Transport> {
        match self.model {
            ModelSpec::Wandering { .. } => Some(Transport::Wandering),
            ModelSpec::Confined => Some(Transport::Confined),
            _ => None,
        }
    }

    /// Validates against the model constraints and builds the derived objects.
    pub fn resolve(self) -> CliResult<Experiment> {
        let solution = match &self.profile {
            None => None,
            Some(ProfileSpec::Explicit { .. }) => None,
            Some(ProfileSpec::Linear {
                t_left,
                t_right,
                n_links,
            }) => Some(wandering_profile(*t_left, *t_right, *n_links)?),
            Some(ProfileSpec::Selfconsistent {
                t_left,
                t_right,
                n_links,
            }) => match self.transport() {
                Some(Transport::Wandering) => Some(wandering_profile(*t_left, *t_right, *n_links)?),
                Some(Transport::Confined) => Some(confined_profile(*t_left, *t_right, *n_links)?),
                None => return invalid("a self-consistent profile needs a wandering or confined model"),
            },
        };
        let profile = match (&self.profile, &solution) {
            (Some(ProfileSpec::Explicit { temperatures }), _) => {
                Some(InverseTempProfile::from_temperatures(temperatures)?)
            }
            (_, Some(s)) => Some(s.profile()?),
            _ => None,
        };

        let model = match (&self.model, &profile) {
            (ModelSpec::Basic { beta, .. }, None) => ModelKind::Basic { beta: *beta },
            (ModelSpec::Basic { .. }, Some(_)) => return invalid("the basic model takes no profile"),
            (_, None) => return invalid("this model needs a profile"),
            (ModelSpec::Wandering { n_tracers }, Some(p)) => ModelKind::Wandering {
                profile: p.clone(),
                n_tracers: *n_tracers,
            },
            (ModelSpec::Confined, Some(p)) => ModelKind::Confined { profile: p.clone() },
            (ModelSpec::General { matrix }, Some(p)) => {
                let n = p.n_links();
                let matrix = match matrix {
                    MatrixSpec::Wandering => TransitionMatrix::wandering(n)?,
                    MatrixSpec::TransmitReflect { transmit } => TransitionMatrix::transmit_reflect(n, *transmit)?,
                    MatrixSpec::Rows(rows) => TransitionMatrix::new(n, rows.clone())?,
                };
                ModelKind::General {
                    profile: p.clone(),
                    matrix,
                }
            }
        };
        model.validate()?;

        if let ModelSpec::Basic {
            q0, p0, sample_spacing, ..
        } = self.model
        {
            if !(0.0..1.0).contains(&q0) || !(p0 > 0.0 && p0.is_finite()) {
                return invalid("the basic model needs q0 in [0, 1) and a positive finite p0");
            }
            if !(sample_spacing > 0.0 && sample_spacing.is_finite()) {
                return invalid("sample_spacing must be positive");
            }
        }
        if let Some(t) = self.t_end {
            self.run_config(t, self.seed).validate()?;
        }
        if self.n_replicas == 0 {
            return invalid("n_replicas must be at least 1");
        }

        let lambdas = match &self.cgf {
            None => Vec::new(),
            Some(c) => {
                let Some(p) = &profile else {
                    return invalid("a CGF sweep needs a profile");
                };
                if self.transport().is_none() {
                    return invalid("a CGF sweep needs a wandering or confined model");
                }
                if c.link >= p.n_links() {
                    return invalid(format!("cgf link {} out of range 0..{}", c.link, p.n_links()));
                }
                if let Some(e) = &c.empirical {
                    let positive = |x: f64| x > 0.0 && x.is_finite();
                    if !positive(e.horizon) || e.n_samples == 0 || !positive(e.resample_interval) {
                        return invalid("empirical estimates need a positive horizon, sample count and interval");
                    }
                }
                let lambdas = expand_grid(&c.lambdas)?;
                let (lo, hi) = (-p.beta(c.link), p.beta(c.link + 1));
                if let Some(l) = lambdas.iter().find(|l| !(**l > lo && **l < hi)) {
                    return invalid(format!("λ = {l} outside the admissible interval ({lo}, {hi})"));
                }
                lambdas
            }
        };

        Ok(Experiment {
            config: self,
            model,
            profile,
            solution,
            lambdas,
        })
    }

    pub fn run_config(&self, t_end: f64, seed: u64) -> RunConfig {
        RunConfig {
            t_burn: self.t_burn,
            n_batches: self.n_batches,
            ..RunConfig::new(t_end, seed)
        }
    }
}

fn expand_grid(grid: &LambdaGrid) -> CliResult<Vec<f64>> {
    let values = match grid {
        LambdaGrid::Values(v) => v.clone(),
        LambdaGrid::Range { start, stop, count } => {
            if *count == 0 || stop.partial_cmp(start) != Some(std::cmp::Ordering::Greater) {
                return invalid("a λ range needs stop > start and a positive count");
            }
            let step = (stop - start) / (*count + 1) as f64;
            (1..=*count).map(|k| start + k as f64 * step).collect()
        }
        LambdaGrid::Include(p) => return invalid(format!("unresolved λ-grid include {}", p.display())),
    };
    if values.is_empty() || values.iter().any(|l| !l.is_finite()) {
        return invalid("the λ-grid must hold finite values");
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WANDERING: &str = r#"{
        "model": {"kind": "wandering"},
        "profile": {"kind": "linear", "t_left": 1, "t_right": 2, "n_links": 4},
        "t_end": 1000, "seed": 3
    }"#;

    #[test]
    fn parses_and_resolves() {
        let e = ExperimentConfig::from_json(WANDERING).unwrap().resolve().unwrap();
        assert_eq!(e.profile.unwrap().n_links(), 4);
        assert_eq!(e.solution.unwrap().temperatures[2], 1.5);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = WANDERING.replace("\"seed\"", "\"sede\"");
        assert!(matches!(
            ExperimentConfig::from_json(&bad),
            Err(CliError::Validation(_))
        ));
        let nested = WANDERING.replace("\"n_links\": 4", "\"n_links\": 4, \"extra\": 1");
        assert!(ExperimentConfig::from_json(&nested).is_err());
        let model = WANDERING.replace("{\"kind\": \"wandering\"}", "{\"kind\": \"wandering\", \"x\": 1}");
        assert!(ExperimentConfig::from_json(&model).is_err());
    }

    #[test]
    fn rejects_bad_model_parameters() {
        let bad = WANDERING.replace("\"t_left\": 1", "\"t_left\": -1");
        assert!(ExperimentConfig::from_json(&bad).unwrap().resolve().is_err());
        let general = r#"{"model": {"kind": "general", "matrix": {"transmit_reflect": {"transmit": 1.5}}},
            "profile": {"kind": "explicit", "temperatures": [1, 1, 1]}}"#;
        assert!(ExperimentConfig::from_json(general).unwrap().resolve().is_err());
        let sc = r#"{"model": {"kind": "general", "matrix": "wandering"},
            "profile": {"kind": "selfconsistent", "t_left": 1, "t_right": 2, "n_links": 3}}"#;
        assert!(ExperimentConfig::from_json(sc).unwrap().resolve().is_err());
    }

    #[test]
    fn lambda_range_is_interior() {
        let g = LambdaGrid::Range {
            start: -1.0,
            stop: 2.0,
            count: 41,
        };
        let v = expand_grid(&g).unwrap();
        assert_eq!(v.len(), 41);
        assert!(v[0] > -1.0 && v[40] < 2.0);
        assert!((v[13] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_outside_domain_is_rejected() {
        let text = r#"{"model": {"kind": "confined"},
            "profile": {"kind": "explicit", "temperatures": [1, 0.5]},
            "cgf": {"link": 0, "lambdas": {"values": [2.5]}}}"#;
        assert!(ExperimentConfig::from_json(text).unwrap().resolve().is_err());
    }
}
