//! Versioned JSON report written by `fit`; its schema ships in `schema/report.schema.json`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use dagsobol_core::sobol::{InputIndices, SobolReport};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Simulated { rows: usize, seed: u64 },
    Csv { path: String, rows: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub tool_version: String,
    pub process: String,
    pub output: String,
    pub engine: String,
    pub fit_mode: String,
    pub m: usize,
    pub degrees: Vec<u32>,
    /// Residual bound of sparse fits; absent for dense fits.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma: Option<f64>,
    pub data: DataSource,
    pub seed: u64,
    pub replications: usize,
    pub failures: usize,
    pub output_mean: f64,
    pub output_variance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub support_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_support_size: Option<f64>,
    pub constraint_unmet: usize,
    pub degenerate_inputs: Vec<String>,
    pub zero_variance: bool,
    /// Named constants of the process functions.
    pub constants: BTreeMap<String, f64>,
    pub inputs: Vec<InputIndices>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<String>,
}

impl RunReport {
    pub fn sobol(&self) -> SobolReport {
        let mut r = SobolReport::new(&self.engine, self.m);
        r.inputs = self.inputs.clone();
        r.output_mean = self.output_mean;
        r.output_variance = self.output_variance;
        r
    }
}

/// JSON cannot carry NaN or infinities; report them instead of writing `null`.
pub fn check_finite(r: &RunReport) -> Result<(), String> {
    let mut bad = Vec::new();
    let mut check = |what: String, v: f64| {
        if !v.is_finite() {
            bad.push(what);
        }
    };
    check("output_mean".into(), r.output_mean);
    check("output_variance".into(), r.output_variance);
    for i in &r.inputs {
        check(format!("{}.first_order", i.name), i.first_order);
        check(format!("{}.total", i.name), i.total);
        for (w, v) in [("first_order_se", i.first_order_se), ("total_se", i.total_se)] {
            if let Some(v) = v {
                check(format!("{}.{w}", i.name), v);
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(format!("non-finite values in report: {}", bad.join(", ")))
    }
}
