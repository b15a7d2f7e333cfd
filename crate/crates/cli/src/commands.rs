use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use dagsobol_core::basis::min_observations;
use dagsobol_core::dag::PredecessorCount;
use dagsobol_core::dataset::Dataset;
use dagsobol_core::engine::{replicate, run_engine, EngineConfig, EngineKind, Network};
use dagsobol_core::pick_freeze::sobol_pick_freeze;
use dagsobol_core::process::{Process, ProcessSpec};
use dagsobol_core::regression::FitMode;
use dagsobol_core::sobol::SobolReport;

use crate::args::{
    CompareArgs, EngineArg, FitArgs, MinobsArgs, ModeArg, ModelArgs, ParetoArgs, SimulateArgs, SourceArgs,
};
use crate::failure::Failure;
use crate::pareto;
use crate::report::{check_finite, DataSource, RunReport, REPORT_VERSION};

fn load_process(a: &SourceArgs) -> Result<Process<f64>, Failure> {
    let spec = match (&a.source.builtin, &a.source.spec) {
        (Some(name), None) => ProcessSpec::builtin(name)?,
        (None, Some(path)) => ProcessSpec::load(path)
            .map_err(|e| Failure::from(e).context(format!("reading {}", path.display())))?,
        _ => return Err(Failure::usage("give exactly one of --builtin and --spec")),
    };
    let mut process: Process<f64> = spec.compile()?;
    if let Some(out) = &a.output {
        let v = process.dag.node(out).map_err(|e| Failure::usage(e.to_string()))?;
        if process.dag.is_source(v) {
            return Err(Failure::usage(format!("output `{out}` is a network input")));
        }
        process.output = out.clone();
    }
    Ok(process)
}

fn kind(e: EngineArg) -> EngineKind {
    match e {
        EngineArg::Naive => EngineKind::Naive,
        EngineArg::Network => EngineKind::Network,
        EngineArg::Sn => EngineKind::SparseNetwork,
    }
}

fn engine_config(kind: EngineKind, m: &ModelArgs, process: &Process<f64>) -> Result<EngineConfig, Failure> {
    let mut cfg = EngineConfig::for_kind(kind, m.p, m.gamma);
    let depth = process
        .dag
        .iteration_depth(&process.output)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let mut degrees = vec![m.p; depth.max(1)];
    for &(l, k) in &m.p_level {
        if l > degrees.len() {
            return Err(Failure::usage(format!(
                "--p-level {l}={k}: the network has {} level(s)",
                degrees.len()
            )));
        }
        degrees[l - 1] = k;
    }
    cfg.degrees = degrees;
    cfg.fit.gamma = m.gamma;
    if let Some(mode) = m.fit_mode {
        cfg.fit.mode = match mode {
            ModeArg::Dense => FitMode::Dense,
            ModeArg::Sparse => FitMode::Sparse,
        };
    }
    if kind == EngineKind::SparseNetwork && cfg.fit.mode == FitMode::Dense {
        return Err(Failure::usage("engine sn always fits sparsely; use --engine network for dense fits"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    std::fs::write(path, body)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::data)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    if a.m == 0 {
        return Err(Failure::usage("--m must be at least 1"));
    }
    let process = load_process(&a.process)?;
    let data = process.simulate(a.m, a.seed)?;
    let file = std::fs::File::create(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .map_err(Failure::data)?;
    data.write_csv(std::io::BufWriter::new(file)).map_err(Failure::data)?;
    println!(
        "wrote {} rows x {} columns of `{}` to {}",
        data.rows(),
        data.names().count(),
        process.name,
        a.out.display()
    );
    Ok(())
}

fn print_indices(r: &SobolReport) {
    println!("{:<12} {:>12} {:>12} {:>10} {:>10}", "input", "first_order", "total", "se(S)", "se(ST)");
    for i in &r.inputs {
        let se = |v: Option<f64>| v.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:>12.5} {:>12.5} {:>10} {:>10}",
            i.name,
            i.first_order,
            i.total,
            se(i.first_order_se),
            se(i.total_se)
        );
    }
}

pub fn fit(a: &FitArgs) -> Result<(), Failure> {
    if a.reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    if a.m == Some(0) {
        return Err(Failure::usage("--m must be at least 1"));
    }
    let process = load_process(&a.process)?;
    let kind = kind(a.engine);
    let cfg = engine_config(kind, &a.model, &process)?;
    let net = Network::of(&process);
    let loaded = match &a.data {
        Some(path) => Some(
            Dataset::<f64>::load_csv(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::data)?,
        ),
        None => None,
    };
    let m = loaded.as_ref().map(Dataset::rows).or(a.m).unwrap_or(0);

    let (sobol, errors) = if a.reps == 1 {
        let data = match &loaded {
            Some(d) => d.clone(),
            None => process.simulate(m, a.seed)?,
        };
        (run_engine(kind, net, &data, &cfg)?.report, Vec::new())
    } else {
        let r = replicate(a.reps, a.seed, |seed| {
            let data = match &loaded {
                Some(d) => d.bootstrap(seed),
                None => process.simulate(m, seed)?,
            };
            Ok(run_engine(kind, net, &data, &cfg)?.report)
        })?;
        (r.aggregate, r.errors)
    };

    let report = RunReport {
        report_version: REPORT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        process: process.name.clone(),
        output: process.output.clone(),
        engine: kind.label().to_string(),
        fit_mode: match cfg.fit.mode {
            FitMode::Dense => "dense".into(),
            FitMode::Sparse => "sparse".into(),
        },
        m,
        degrees: cfg.degrees.clone(),
        gamma: (cfg.fit.mode == FitMode::Sparse).then_some(cfg.fit.gamma),
        data: match &a.data {
            Some(p) => DataSource::Csv {
                path: p.display().to_string(),
                rows: m,
            },
            None => DataSource::Simulated { rows: m, seed: a.seed },
        },
        seed: a.seed,
        replications: a.reps,
        failures: sobol.failures,
        output_mean: sobol.output_mean,
        output_variance: sobol.output_variance,
        support_size: sobol.support_size,
        final_support_size: sobol.final_support_size,
        constraint_unmet: sobol.constraint_unmet,
        degenerate_inputs: sobol.degenerate_inputs.clone(),
        zero_variance: sobol.zero_variance,
        constants: process.constants.iter().map(|(k, v)| (k.clone(), *v)).collect::<BTreeMap<_, _>>(),
        inputs: sobol.inputs.clone(),
        errors: errors.into_iter().take(5).collect(),
    };
    check_finite(&report).map_err(|e| Failure::numerical(anyhow::anyhow!(e)))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &a.out {
        Some(path) => {
            write_file(path, &(json + "\n"))?;
            println!(
                "{} on `{}`: m = {m}, {} replication(s), {} failed",
                kind.label(),
                process.name,
                a.reps,
                report.failures
            );
            print_indices(&sobol);
            if let Some(s) = report.final_support_size {
                println!("support: {:.1} (final), {:.1} (level 1)", s, report.support_size.unwrap_or(s));
            }
            if report.constraint_unmet > 0 {
                println!("warning: {} sparse fit(s) missed the residual bound", report.constraint_unmet);
            }
        }
        None => {
            // a closed pipe (`| head`) is not an error
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{json}");
        }
    }
    let title = format!("{}: first-order Sobol indices of {}", process.name, process.output);
    for path in &a.pareto {
        pareto::write(path, &sobol, &title)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::data)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareRow {
    engine: String,
    m: usize,
    reps: usize,
    failures: usize,
    mse_first_order: Option<f64>,
    mse_total: Option<f64>,
    status: String,
}

#[derive(Debug, Serialize)]
struct Comparison {
    process: String,
    output: String,
    reference_n: usize,
    seed: u64,
    reference: SobolReport,
    rows: Vec<CompareRow>,
}

fn squared_errors(est: &SobolReport, reference: &SobolReport) -> (f64, f64) {
    let n = reference.inputs.len() as f64;
    let mut s = 0.0;
    let mut t = 0.0;
    for r in &reference.inputs {
        // inputs that cannot reach the output are estimated as zero
        let (a, b) = est.get(&r.name).map(|i| (i.first_order, i.total)).unwrap_or((0.0, 0.0));
        s += (a - r.first_order).powi(2);
        t += (b - r.total).powi(2);
    }
    (s / n, t / n)
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn compare(a: &CompareArgs) -> Result<(), Failure> {
    if a.engines.is_empty() || a.sizes.is_empty() {
        return Err(Failure::usage("give at least one engine and one sample size"));
    }
    if a.sizes.contains(&0) || a.reps == 0 {
        return Err(Failure::usage("sample sizes and --reps must be at least 1"));
    }
    let process = load_process(&a.process)?;
    let reference = sobol_pick_freeze(|x: &[f64]| process.evaluate_output(x), &process.inputs, a.reference_n, a.seed)
        .map_err(Failure::numerical)?;
    let net = Network::of(&process);
    let mut rows = Vec::new();
    for &e in &a.engines {
        let kind = kind(e);
        let cfg = engine_config(kind, &a.model, &process)?;
        for &m in &a.sizes {
            let outcome = replicate(a.reps, a.seed, |seed| {
                let data = process.simulate(m, seed)?;
                Ok(run_engine(kind, net, &data, &cfg)?.report)
            });
            let row = match outcome {
                Ok(r) => {
                    let n = r.runs.len() as f64;
                    let (s, t) = r
                        .runs
                        .iter()
                        .map(|x| squared_errors(x, &reference))
                        .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
                    CompareRow {
                        engine: kind.label().into(),
                        m,
                        reps: a.reps,
                        failures: r.errors.len(),
                        mse_first_order: Some(s / n),
                        mse_total: Some(t / n),
                        status: "ok".into(),
                    }
                }
                Err(err) => CompareRow {
                    engine: kind.label().into(),
                    m,
                    reps: a.reps,
                    failures: a.reps,
                    mse_first_order: None,
                    mse_total: None,
                    status: err.to_string(),
                },
            };
            rows.push(row);
        }
    }

    let mut csv = String::from("engine,m,reps,failures,mse_first_order,mse_total,status\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},\"{}\"\n",
            r.engine,
            r.m,
            r.reps,
            r.failures,
            csv_cell(r.mse_first_order),
            csv_cell(r.mse_total),
            r.status.replace('"', "'")
        ));
    }
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(csv.as_bytes());
        }
    }
    if let Some(p) = &a.json {
        let doc = Comparison {
            process: process.name.clone(),
            output: process.output.clone(),
            reference_n: a.reference_n,
            seed: a.seed,
            reference,
            rows,
        };
        write_file(p, &(serde_json::to_string_pretty(&doc).expect("comparison serializes") + "\n"))?;
    }
    Ok(())
}

pub fn pareto(a: &ParetoArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.report)
        .with_context(|| format!("reading {}", a.report.display()))
        .map_err(Failure::data)?;
    let report: RunReport = serde_json::from_str(&text)
        .with_context(|| format!("parsing report {}", a.report.display()))
        .map_err(Failure::data)?;
    let title = format!("{}: first-order Sobol indices of {}", report.process, report.output);
    pareto::write(&a.out, &report.sobol(), &title)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(Failure::data)
}

pub fn minobs(a: &MinobsArgs) -> Result<(), Failure> {
    if a.p == 0 {
        return Err(Failure::usage("--p must be at least 1"));
    }
    let process = load_process(&a.process)?;
    let dag = &process.dag;
    let xi = dag
        .influencing_inputs(&process.output)
        .map_err(Failure::data)?
        .len();
    let d = dag
        .network_pce_dimension(&process.output, PredecessorCount::PerNode)
        .map_err(Failure::data)?;
    let naive = min_observations(xi, a.p).map_err(Failure::numerical)?;
    let network = min_observations(d, a.p).map_err(Failure::numerical)?;
    println!("process: {} (output {}), order p = {}", process.name, process.output, a.p);
    println!("{:<8} {:>9} {:>16}", "engine", "variables", "min_observations");
    println!("{:<8} {:>9} {:>16}", "naive", xi, naive);
    println!("{:<8} {:>9} {:>16}", "network", d, network);
    println!("lambda = {d}/{xi} = {:.4}", d as f64 / xi as f64);
    Ok(())
}
