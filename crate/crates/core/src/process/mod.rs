//! Process definitions (DAG, input laws, node equations) and their simulation.

pub mod expr;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{DagError, ProcessDag};
use crate::dataset::{DataError, Dataset, Provenance};
use crate::distribution::{Distribution, DistributionError};
use crate::scalar::Real;

pub use expr::{Compiled, Expr, ParseError};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error("function of `{node}`: {error}")]
    Parse { node: String, error: ParseError },
    #[error("invalid process spec: {0}")]
    Invalid(String),
    #[error("input `{input}`: {error}")]
    Distribution {
        input: String,
        error: DistributionError,
    },
    #[error("node `{node}` evaluated to a non-finite value at row {row}")]
    EvaluationFailure { node: String, row: usize },
    #[error("spec json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("unknown builtin `{0}` (expected welding, injection_molding or fig1)")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParams {
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformParams {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalParams {
    pub sample: Vec<f64>,
}

/// Law of one source node as written in a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", content = "params", rename_all = "lowercase")]
pub enum InputSpec {
    Normal(NormalParams),
    Uniform(UniformParams),
    Empirical(EmpiricalParams),
}

impl InputSpec {
    pub fn to_distribution<F: Real>(&self) -> Result<Distribution<F>, DistributionError> {
        match self {
            InputSpec::Normal(p) => match (p.sd, p.variance) {
                (Some(sd), None) => Distribution::normal(F::lit(p.mean), F::lit(sd)),
                (None, Some(v)) => Distribution::normal_from_variance(F::lit(p.mean), F::lit(v)),
                _ => Err(DistributionError::Invalid(
                    "normal needs exactly one of `sd` or `variance`".into(),
                )),
            },
            InputSpec::Uniform(p) => Distribution::uniform(F::lit(p.lower), F::lit(p.upper)),
            InputSpec::Empirical(p) => {
                Distribution::empirical(p.sample.iter().map(|&x| F::lit(x)).collect())
            }
        }
    }
}

/// Serialized process description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub spec_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub inputs: IndexMap<String, InputSpec>,
    pub functions: IndexMap<String, String>,
    #[serde(default)]
    pub constants: IndexMap<String, f64>,
}

impl ProcessSpec {
    pub fn from_json(text: &str) -> Result<Self, ProcessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ProcessError> {
        let text = std::fs::read_to_string(path).map_err(DataError::from)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn builtin(name: &str) -> Result<Self, ProcessError> {
        let text = match name {
            "welding" => include_str!("../../specs/welding.json"),
            "injection_molding" => include_str!("../../specs/injection_molding.json"),
            "fig1" => include_str!("../../specs/fig1.json"),
            other => return Err(ProcessError::UnknownBuiltin(other.to_string())),
        };
        Self::from_json(text)
    }

    /// Replaces the law of every source by a fixed value at its mean.
    pub fn with_zero_spread(mut self) -> Self {
        for spec in self.inputs.values_mut() {
            let mean = match spec {
                InputSpec::Normal(p) => p.mean,
                InputSpec::Uniform(p) => 0.5 * (p.lower + p.upper),
                InputSpec::Empirical(p) => p.sample.iter().sum::<f64>() / p.sample.len() as f64,
            };
            *spec = InputSpec::Normal(NormalParams {
                mean,
                sd: Some(0.0),
                variance: None,
            });
        }
        self
    }

    pub fn compile<F: Real>(&self) -> Result<Process<F>, ProcessError> {
        Process::new(self)
    }
}

/// A validated, evaluable process.
#[derive(Debug, Clone)]
pub struct Process<F> {
    pub name: String,
    pub dag: ProcessDag,
    pub output: String,
    /// Source laws, in node index order.
    pub inputs: Vec<(String, Distribution<F>)>,
    source_nodes: Vec<usize>,
    functions: Vec<Option<Compiled>>,
    pub constants: IndexMap<String, f64>,
}

impl<F: Real> Process<F> {
    pub fn new(spec: &ProcessSpec) -> Result<Self, ProcessError> {
        if spec.spec_version != SPEC_VERSION {
            return Err(ProcessError::Invalid(format!(
                "spec_version {} is not supported (expected {SPEC_VERSION})",
                spec.spec_version
            )));
        }
        let dag = ProcessDag::new(&spec.nodes, &spec.edges)?;
        for c in spec.constants.keys() {
            if dag.node(c).is_ok() {
                return Err(ProcessError::Invalid(format!("constant `{c}` shadows a node")));
            }
        }
        let output = match &spec.output {
            Some(o) => {
                dag.node(o)?;
                o.clone()
            }
            None => {
                let sinks = dag.sinks();
                if sinks.len() != 1 {
                    return Err(ProcessError::Invalid(
                        "several sinks; name the output explicitly".into(),
                    ));
                }
                dag.name(sinks.indices()[0]).to_string()
            }
        };
        for k in spec.inputs.keys() {
            let i = dag.node(k)?;
            if !dag.is_source(i) {
                return Err(ProcessError::Invalid(format!("`{k}` has predecessors but a law")));
            }
        }
        for k in spec.functions.keys() {
            let i = dag.node(k)?;
            if dag.is_source(i) {
                return Err(ProcessError::Invalid(format!("source `{k}` has a function")));
            }
        }

        let mut inputs = Vec::new();
        let mut source_nodes = Vec::new();
        let mut functions = vec![None; dag.len()];
        for v in 0..dag.len() {
            let name = dag.name(v).to_string();
            if dag.is_source(v) {
                let law = spec
                    .inputs
                    .get(&name)
                    .ok_or_else(|| ProcessError::Invalid(format!("source `{name}` has no law")))?;
                let d = law
                    .to_distribution()
                    .map_err(|error| ProcessError::Distribution {
                        input: name.clone(),
                        error,
                    })?;
                inputs.push((name, d));
                source_nodes.push(v);
            } else {
                let src = spec
                    .functions
                    .get(&name)
                    .ok_or_else(|| ProcessError::Invalid(format!("node `{name}` has no function")))?;
                let e = Expr::parse(src).map_err(|error| ProcessError::Parse {
                    node: name.clone(),
                    error,
                })?;
                let preds = dag.direct_predecessors(v);
                for free in e.free_names() {
                    let is_pred = dag.node(&free).map(|i| preds.contains(&i)).unwrap_or(false);
                    if !is_pred && !spec.constants.contains_key(&free) {
                        return Err(ProcessError::Invalid(format!(
                            "function of `{name}` uses `{free}`, which is neither a direct predecessor nor a constant"
                        )));
                    }
                }
                let c = e
                    .compile(
                        &|n| dag.node(n).ok().filter(|i| preds.contains(i)),
                        &|n| spec.constants.get(n).copied(),
                    )
                    .map_err(ProcessError::Invalid)?;
                functions[v] = Some(c);
            }
        }
        Ok(Process {
            name: spec.name.clone(),
            dag,
            output,
            inputs,
            source_nodes,
            functions,
            constants: spec.constants.clone(),
        })
    }

    pub fn input_names(&self) -> Vec<String> {
        self.inputs.iter().map(|i| i.0.clone()).collect()
    }

    /// Values of every node (index order) given source values in `inputs` order.
    pub fn evaluate_all(&self, sources: &[F]) -> Result<Vec<F>, String> {
        let mut values = vec![F::zero(); self.dag.len()];
        for (&v, &x) in self.source_nodes.iter().zip(sources) {
            values[v] = x;
        }
        for &v in self.dag.topological_order() {
            if let Some(f) = &self.functions[v] {
                let y = f.eval(&values);
                if !y.is_finite() {
                    return Err(self.dag.name(v).to_string());
                }
                values[v] = y;
            }
        }
        Ok(values)
    }

    /// Output value given source values in `inputs` order.
    pub fn evaluate_output(&self, sources: &[F]) -> Result<F, String> {
        let y = self.dag.node(&self.output).expect("output validated");
        self.evaluate_all(sources).map(|v| v[y])
    }

    /// Draws `m` independent rows; row `j` uses its own random stream, so the
    /// result does not depend on the number of threads.
    pub fn simulate(&self, m: usize, seed: u64) -> Result<Dataset<F>, ProcessError> {
        if m == 0 {
            return Err(ProcessError::Data(DataError::Empty));
        }
        let rows: Vec<Vec<F>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                let xs: Vec<F> = self.inputs.iter().map(|(_, d)| d.sample(&mut rng)).collect();
                self.evaluate_all(&xs)
                    .map_err(|node| ProcessError::EvaluationFailure { node, row: j })
            })
            .collect::<Result<_, _>>()?;
        let order = self.dag.topological_order();
        let columns = order
            .iter()
            .map(|&v| (self.dag.name(v).to_string(), rows.iter().map(|r| r[v]).collect()));
        Ok(Dataset::new(columns, Provenance::Simulated { seed })?)
    }
}
