use dagsobol_core::dataset::{Dataset, Provenance};
use dagsobol_core::engine::{
    fit_naive, fit_network, fit_sparse_network, replicate, run_engine, EngineConfig, EngineError, EngineKind,
    Network,
};
use dagsobol_core::process::{Process, ProcessSpec};
use dagsobol_core::{Process32, Process64};

fn builtin(name: &str) -> Process64 {
    ProcessSpec::builtin(name).unwrap().compile().unwrap()
}

#[test]
fn fig1_engines_agree() {
    let p = builtin("fig1");
    let data = p.simulate(2000, 3).unwrap();
    let a = fit_naive(Network::of(&p), &data, &EngineConfig::uniform(3)).unwrap();
    let b = fit_network(Network::of(&p), &data, &EngineConfig::uniform(3)).unwrap();
    let c = fit_sparse_network(Network::of(&p), &data, &EngineConfig::sparse(3, 1e-4)).unwrap();
    for i in &a.report.inputs {
        for other in [&b.report, &c.report] {
            let j = other.get(&i.name).unwrap();
            assert!((i.first_order - j.first_order).abs() < 0.02, "{}", i.name);
            assert!((i.total - j.total).abs() < 0.02, "{}", i.name);
        }
    }
    assert!(a.report.get("v1").unwrap().first_order > 0.5);
}

#[test]
fn network_needs_fewer_rows_than_naive() {
    let p = builtin("welding");
    let data = p.simulate(150, 9).unwrap();
    assert!(matches!(
        fit_naive(Network::of(&p), &data, &EngineConfig::uniform(3)),
        Err(EngineError::Regression(_))
    ));
    let out = fit_network(Network::of(&p), &data, &EngineConfig::uniform(3)).unwrap();
    assert!(out.report.get("h").unwrap().first_order > 0.2);
    assert_eq!(out.levels.len(), 2);
    assert_eq!(out.levels[0].largest_basis, 84);
}

#[test]
fn csv_round_trip_gives_identical_fit() {
    let p = builtin("injection_molding");
    let data = p.simulate(200, 4).unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let back = Dataset::<f64>::read_csv(buf.as_slice(), Provenance::InMemory).unwrap();
    let cfg = EngineConfig::sparse(4, 0.001);
    let a = fit_sparse_network(Network::of(&p), &data, &cfg).unwrap();
    let b = fit_sparse_network(Network::of(&p), &back, &cfg).unwrap();
    assert_eq!(a.report, b.report);
}

#[test]
fn single_precision_pipeline() {
    let p: Process32 = ProcessSpec::builtin("fig1").unwrap().compile().unwrap();
    let data = p.simulate(800, 2).unwrap();
    let out = fit_network(Network::of(&p), &data, &EngineConfig::uniform(2)).unwrap();
    let s: f64 = out.report.inputs.iter().map(|i| i.first_order).sum();
    assert!(s > 0.9 && s <= 1.0 + 1e-6, "{s}");
    let pred = out.model.predict(&data).unwrap();
    assert_eq!(pred.len(), 800);
}

#[test]
fn bootstrap_replication_of_loaded_data() {
    let p = builtin("welding");
    let data = p.simulate(120, 8).unwrap();
    let cfg = EngineConfig::sparse(3, 0.001);
    let r = replicate(10, 1, |seed| {
        Ok(run_engine(EngineKind::SparseNetwork, Network::of(&p), &data.bootstrap(seed), &cfg)?.report)
    })
    .unwrap();
    assert_eq!(r.runs.len(), 10);
    let h = r.aggregate.get("h").unwrap();
    assert!(h.first_order_se.unwrap() > 0.0);
    assert_eq!(r.aggregate.replications, Some(10));
}

#[test]
fn all_failing_replications_report_the_cause() {
    let p = builtin("welding");
    let e = replicate(3, 0, |seed| {
        let d = p.simulate(50, seed)?;
        Ok(fit_naive(Network::of(&p), &d, &EngineConfig::uniform(3))?.report)
    })
    .unwrap_err();
    assert!(e.to_string().contains("364"), "{e}");
}

#[test]
fn user_network_with_empirical_input() {
    let spec = ProcessSpec::from_json(
        r#"{"spec_version":1,"name":"emp","nodes":["a","b","m","y"],
            "edges":[["a","m"],["b","m"],["m","y"],["b","y"]],
            "inputs":{"a":{"dist":"empirical","params":{"sample":[0.1,0.5,0.9,1.3,2.0,2.2,3.1,0.7,1.1,1.9]}},
                      "b":{"dist":"uniform","params":{"lower":0,"upper":1}}},
            "functions":{"m":"a*b","y":"m + b"}}"#,
    )
    .unwrap();
    let p: Process<f64> = spec.compile().unwrap();
    let data = p.simulate(400, 5).unwrap();
    let naive = fit_naive(Network::of(&p), &data, &EngineConfig::uniform(2)).unwrap();
    let net = fit_network(Network::of(&p), &data, &EngineConfig::uniform(2)).unwrap();
    for n in ["a", "b"] {
        let (x, y) = (naive.report.get(n).unwrap(), net.report.get(n).unwrap());
        assert!((x.first_order - y.first_order).abs() < 0.02, "{n}");
    }
}
