//! Experiment configuration files.

use std::collections::BTreeMap;
use std::path::Path;

use floqnet::models::{by_name, OscillatorModel, MODEL_NAMES};
use floqnet::msf::{linear_grid, log_grid};
use floqnet::network::{complete_graph, from_adjacency, ring_graph, CouplingSpec, GraphSpec};
use floqnet::ode::IntegratorConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    /// Flat initial state: one model state for single-oscillator commands,
    /// `n` concatenated states for `simulate`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<f64>,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub msf: MsfSection,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Complete,
    Ring,
    Adjacency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub kind: GraphKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<f64>>>,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            kind: GraphKind::Complete,
            n: Some(3),
            adjacency: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(rename = "K")]
    pub k: f64,
    /// Diagonal of DH; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<f64>>,
    #[serde(default)]
    pub activation_time: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            k: 1.0,
            mask: None,
            activation_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    pub output_grid_points: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            output_grid_points: floqnet::network::DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsfSection {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for MsfSection {
    fn default() -> Self {
        Self {
            kappa_min: 0.01,
            kappa_max: 10.0,
            points: 50,
            spacing: Spacing::Log,
        }
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_model(name: &str, params: BTreeMap<String, f64>) -> Self {
        Self {
            model: ModelSection {
                name: name.to_string(),
                params,
            },
            initial: Vec::new(),
            graph: GraphSection::default(),
            coupling: CouplingSection::default(),
            integrator: IntegratorSection::default(),
            run: RunSection::default(),
            msf: MsfSection::default(),
            seed: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn build_model(&self) -> Result<OscillatorModel, CliError> {
        let key = if MODEL_NAMES.contains(&self.model.name.as_str()) {
            "model.params"
        } else {
            "model.name"
        };
        by_name(&self.model.name, &self.model.params).map_err(|e| invalid(key, e))
    }

    pub fn build_graph(&self) -> Result<GraphSpec, CliError> {
        let g = &self.graph;
        let graph = match g.kind {
            GraphKind::Adjacency => {
                let adj = g.adjacency.as_ref().ok_or_else(|| {
                    invalid("graph.adjacency", "required when kind is \"adjacency\"")
                })?;
                if let Some(n) = g.n {
                    if n != adj.len() {
                        return Err(invalid(
                            "graph.n",
                            format!("{n} does not match the {}-row adjacency", adj.len()),
                        ));
                    }
                }
                from_adjacency(adj)
            }
            kind => {
                if g.adjacency.is_some() {
                    return Err(invalid(
                        "graph.adjacency",
                        "only allowed when kind is \"adjacency\"",
                    ));
                }
                let n = g.n.ok_or_else(|| invalid("graph.n", "required"))?;
                if kind == GraphKind::Complete {
                    complete_graph(n)
                } else {
                    ring_graph(n)
                }
            }
        };
        graph.map_err(|e| invalid("graph", e))
    }

    pub fn mask(&self, model: &OscillatorModel) -> Vec<f64> {
        self.coupling
            .mask
            .clone()
            .unwrap_or_else(|| vec![1.0; model.dim()])
    }

    pub fn build_coupling(&self, model: &OscillatorModel) -> Result<CouplingSpec, CliError> {
        let c = &self.coupling;
        if !c.k.is_finite() {
            return Err(invalid("coupling.K", "must be finite"));
        }
        let spec = CouplingSpec::new(c.k, self.mask(model), c.activation_time);
        spec.validate(model).map_err(|e| invalid("coupling", e))?;
        Ok(spec)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        let cfg =
            IntegratorConfig::with_tolerances(self.integrator.rel_tol, self.integrator.abs_tol);
        cfg.validate().map_err(|e| invalid("integrator", e))?;
        Ok(cfg)
    }

    /// Initial state for one oscillator: the configured one or the model default.
    pub fn single_initial(&self, model: &OscillatorModel) -> Result<Vec<f64>, CliError> {
        if self.initial.is_empty() {
            return Ok(model.default_initial().to_vec());
        }
        if self.initial.len() != model.dim() {
            return Err(invalid(
                "initial",
                format!(
                    "has {} entries, model {} has dimension {}",
                    self.initial.len(),
                    model.name(),
                    model.dim()
                ),
            ));
        }
        check_finite("initial", &self.initial)?;
        Ok(self.initial.clone())
    }

    pub fn network_initial(
        &self,
        model: &OscillatorModel,
        graph: &GraphSpec,
    ) -> Result<Vec<f64>, CliError> {
        let need = graph.n * model.dim();
        if self.initial.len() != need {
            return Err(invalid(
                "initial",
                format!(
                    "has {} entries, {} nodes of {} need {need}",
                    self.initial.len(),
                    graph.n,
                    model.name()
                ),
            ));
        }
        check_finite("initial", &self.initial)?;
        Ok(self.initial.clone())
    }

    pub fn validate_run(&self) -> Result<(), CliError> {
        let r = &self.run;
        if !(r.t_end.is_finite() && r.t_end > self.coupling.activation_time) {
            return Err(invalid(
                "run.t_end",
                format!(
                    "{} must be finite and exceed coupling.activation_time",
                    r.t_end
                ),
            ));
        }
        if r.output_grid_points < 2 {
            return Err(invalid("run.output_grid_points", "must be at least 2"));
        }
        Ok(())
    }

    /// The kappa grid. Log spacing is preceded by `kappa = 0`.
    pub fn kappa_grid(&self) -> Result<Vec<f64>, CliError> {
        let m = &self.msf;
        if m.points == 0 {
            return Err(invalid("msf.points", "must be positive"));
        }
        if !(m.kappa_min.is_finite() && m.kappa_max.is_finite() && m.kappa_min >= 0.0) {
            return Err(invalid(
                "msf.kappa_min",
                "bounds must be finite and non-negative",
            ));
        }
        if m.points > 1 && m.kappa_max <= m.kappa_min {
            return Err(invalid("msf.kappa_max", "must exceed kappa_min"));
        }
        Ok(match m.spacing {
            Spacing::Linear => linear_grid(m.kappa_min, m.kappa_max, m.points),
            Spacing::Log => {
                if m.kappa_min <= 0.0 {
                    return Err(invalid("msf.kappa_min", "must be positive for log spacing"));
                }
                std::iter::once(0.0)
                    .chain(log_grid(m.kappa_min, m.kappa_max, m.points))
                    .collect()
            }
        })
    }
}

fn check_finite(key: &str, values: &[f64]) -> Result<(), CliError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(key, "entries must be finite"))
    }
}
