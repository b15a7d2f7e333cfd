//! The three estimators: a single expansion in the network inputs, and the
//! level-by-level network expansion with dense or sparse coefficient fits.
//!
//! The network expansion first regresses the output on orthonormal functions of
//! the groups of its direct predecessors. Every group function is then itself
//! regressed on the groups one level further up, and the products are
//! multiplied out exactly. Groups at one level have disjoint predecessor
//! blocks (a shared predecessor would be a shared ancestor), so each product
//! term maps onto a single tensor term of the next level. After the last level
//! the expansion is over the independent network inputs only and the indices
//! are read from its coefficients.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, Factor, GroupBasis, MultiIndex, OrthonormalBasis};
use crate::dag::{DagError, NodeSet, ProcessDag};
use crate::dataset::{DataError, Dataset};
use crate::distribution::Distribution;
use crate::process::{Process, ProcessError};
use crate::regression::{dense_fit, sparse_fit, FitConfig, FitMode, FitOutcome, RegressionError};
use crate::scalar::Real;
use crate::sobol::{aggregate, sobol_from_terms, InputIndices, SobolError, SobolReport};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error("{context}: {source}")]
    Basis {
        context: String,
        #[source]
        source: BasisError,
    },
    #[error("{0}")]
    Regression(RegressionError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Sobol(#[from] SobolError),
    #[error("no law given for network input `{0}`")]
    MissingInputLaw(String),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
}

impl EngineError {
    /// True for failures caused by too little or unusable data rather than bad configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EngineError::Regression(_) | EngineError::Sobol(_) | EngineError::Basis { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EngineKind {
    #[serde(rename = "naive")]
    Naive,
    #[serde(rename = "network")]
    Network,
    #[serde(rename = "sn")]
    SparseNetwork,
}

impl EngineKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "naive" => Some(EngineKind::Naive),
            "network" => Some(EngineKind::Network),
            "sn" | "sn-pce" | "sparse" => Some(EngineKind::SparseNetwork),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EngineKind::Naive => "naive",
            EngineKind::Network => "network",
            EngineKind::SparseNetwork => "sn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Highest total order per level, starting at the level next to the output.
    /// Levels beyond the list reuse its last entry.
    pub degrees: Vec<u32>,
    pub fit: FitConfig,
}

impl EngineConfig {
    pub fn uniform(p: u32) -> Self {
        EngineConfig {
            degrees: vec![p],
            fit: FitConfig::default(),
        }
    }

    pub fn sparse(p: u32, gamma: f64) -> Self {
        EngineConfig {
            degrees: vec![p],
            fit: FitConfig::sparse(gamma),
        }
    }

    /// Dense fits for the naive and network engines, sparse fits for SN-PCE.
    pub fn for_kind(kind: EngineKind, p: u32, gamma: f64) -> Self {
        match kind {
            EngineKind::SparseNetwork => Self::sparse(p, gamma),
            _ => Self::uniform(p),
        }
    }

    pub fn degree(&self, level: usize) -> u32 {
        let i = level.saturating_sub(1).min(self.degrees.len().saturating_sub(1));
        self.degrees.get(i).copied().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.degrees.is_empty() || self.degrees.contains(&0) {
            return Err(EngineError::InvalidConfig("every degree must be at least 1".into()));
        }
        self.fit
            .validate()
            .map_err(|e| EngineError::InvalidConfig(e.to_string()))
    }
}

/// Structure and input laws the engines need: graph, output and source distributions.
#[derive(Debug, Clone, Copy)]
pub struct Network<'a, F> {
    pub dag: &'a ProcessDag,
    pub output: &'a str,
    pub inputs: &'a [(String, Distribution<F>)],
}

impl<'a, F: Real> Network<'a, F> {
    pub fn new(dag: &'a ProcessDag, output: &'a str, inputs: &'a [(String, Distribution<F>)]) -> Self {
        Network { dag, output, inputs }
    }

    pub fn of(process: &'a Process<F>) -> Self {
        Network {
            dag: &process.dag,
            output: &process.output,
            inputs: &process.inputs,
        }
    }

    fn law(&self, name: &str) -> Result<&'a Distribution<F>, EngineError> {
        self.inputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
            .ok_or_else(|| EngineError::MissingInputLaw(name.to_string()))
    }

    /// Network inputs of the output, split into usable and zero-variance ones.
    fn influencing(&self) -> Result<(Vec<String>, Vec<String>), EngineError> {
        let xi = self.dag.influencing_inputs(self.output)?;
        let mut live = Vec::new();
        let mut fixed = Vec::new();
        for name in self.dag.names_of(&xi) {
            if self.law(&name)?.is_degenerate() {
                fixed.push(name);
            } else {
                live.push(name);
            }
        }
        Ok((live, fixed))
    }
}

/// Final expansion in the independent network inputs.
#[derive(Debug, Clone)]
pub struct PceModel<F> {
    pub inputs: Vec<String>,
    pub factors: Vec<Arc<Factor<F>>>,
    pub terms: Vec<MultiIndex>,
    pub coefficients: Vec<F>,
}

impl<F: Real> PceModel<F> {
    pub fn predict(&self, data: &Dataset<F>) -> Result<Vec<F>, BasisError> {
        let basis = OrthonormalBasis::with_terms(self.factors.clone(), self.terms.clone())?;
        let x = basis.evaluate(data)?;
        Ok(x.rows()
            .into_iter()
            .map(|r| r.iter().zip(&self.coefficients).map(|(&a, &c)| a * c).sum())
            .collect())
    }

    pub fn support_size(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != F::zero()).count()
    }

    pub fn indices(&self) -> Result<(Vec<InputIndices>, f64, f64), SobolError> {
        sobol_from_terms(&self.inputs, &self.terms, &self.coefficients)
    }
}

/// Summary of one regression stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelExpansion {
    pub level: usize,
    pub groups: Vec<Vec<String>>,
    pub fits: usize,
    pub largest_basis: usize,
    pub support: usize,
    pub worst_relative_residual: f64,
    pub constraint_unmet: usize,
}

#[derive(Debug, Clone)]
pub struct EngineOutput<F> {
    pub model: PceModel<F>,
    pub report: SobolReport,
    pub levels: Vec<LevelExpansion>,
}

fn fit<F: Real>(
    design: &ndarray::Array2<F>,
    target: &[F],
    cfg: &FitConfig,
    context: impl FnOnce() -> String,
) -> Result<FitOutcome<F>, EngineError> {
    let r = match cfg.mode {
        FitMode::Dense => dense_fit(design, target, cfg),
        FitMode::Sparse => sparse_fit(design, target, cfg),
    };
    r.map_err(|e| match e {
        RegressionError::Underdetermined { required, got, .. } => {
            EngineError::Regression(RegressionError::Underdetermined {
                context: context(),
                required,
                got,
            })
        }
        other => EngineError::Regression(other),
    })
}

fn basis_err(context: String) -> impl FnOnce(BasisError) -> EngineError {
    move |source| EngineError::Basis { context, source }
}

fn finish<F: Real>(
    method: &str,
    m: usize,
    live: Vec<String>,
    fixed: Vec<String>,
    factors: Vec<Arc<Factor<F>>>,
    terms: Vec<MultiIndex>,
    coefficients: Vec<F>,
    levels: Vec<LevelExpansion>,
    top_support: usize,
) -> Result<EngineOutput<F>, EngineError> {
    let model = PceModel {
        inputs: live.clone(),
        factors,
        terms,
        coefficients,
    };
    let final_support = model.support_size();
    let mut report = match model.indices() {
        Ok((inputs, mean, var)) => {
            let mut r = SobolReport::new(method, m);
            r.inputs = inputs;
            r.output_mean = mean;
            r.output_variance = var;
            r
        }
        Err(SobolError::ZeroVariance) => {
            let mean = model.coefficients.first().map(|c| c.as_f64()).unwrap_or(0.0);
            SobolReport::zero_variance(method, m, &live, mean)
        }
        Err(e) => return Err(e.into()),
    };
    for name in &fixed {
        report.inputs.push(InputIndices {
            name: name.clone(),
            first_order: 0.0,
            total: 0.0,
            first_order_se: None,
            total_se: None,
        });
    }
    report.degenerate_inputs = fixed;
    report.support_size = Some(top_support as f64);
    report.final_support_size = Some(final_support as f64);
    report.constraint_unmet = levels.iter().map(|l| l.constraint_unmet).sum();
    Ok(EngineOutput {
        model,
        report,
        levels,
    })
}

/// One expansion in all network inputs, regressed on the output column.
pub fn fit_naive<F: Real>(
    net: Network<'_, F>,
    data: &Dataset<F>,
    cfg: &EngineConfig,
) -> Result<EngineOutput<F>, EngineError> {
    cfg.validate()?;
    let (live, fixed) = net.influencing()?;
    let p = cfg.degree(1);
    let factors = live
        .iter()
        .map(|n| {
            Factor::univariate(n, net.law(n)?, p)
                .map(Arc::new)
                .map_err(basis_err(format!("input `{n}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let basis = OrthonormalBasis::total_degree(factors.clone(), p);
    let y = data.column(net.output)?;
    if cfg.fit.mode == FitMode::Dense && data.rows() < basis.len() {
        return Err(EngineError::Regression(RegressionError::Underdetermined {
            context: format!("naive expansion in {} inputs of order {p}", live.len()),
            required: basis.len(),
            got: data.rows(),
        }));
    }
    let x = basis
        .evaluate(data)
        .map_err(basis_err("naive design".into()))?;
    let out = fit(&x, y, &cfg.fit, || "naive expansion".into())?;
    let support = out.coefficients.support.len();
    let level = LevelExpansion {
        level: 1,
        groups: live.iter().map(|n| vec![n.clone()]).collect(),
        fits: 1,
        largest_basis: basis.len(),
        support,
        worst_relative_residual: out.relative_residual,
        constraint_unmet: usize::from(!out.constraint_met),
    };
    let method = match cfg.fit.mode {
        FitMode::Dense => "naive",
        FitMode::Sparse => "naive-sparse",
    };
    finish(
        method,
        data.rows(),
        live,
        fixed,
        factors,
        basis.terms,
        out.coefficients.values,
        vec![level],
        support,
    )
}

/// Factors of one level: a shared univariate factor per live source singleton,
/// a data-driven group basis otherwise. Zero-variance groups are left out.
struct Level<F> {
    groups: Vec<NodeSet>,
    factors: Vec<Arc<Factor<F>>>,
}

struct LevelBuilder<'a, F> {
    net: Network<'a, F>,
    data: &'a Dataset<F>,
    cfg: &'a EngineConfig,
    source_factor: HashMap<usize, Arc<Factor<F>>>,
    max_degree: u32,
}

impl<'a, F: Real> LevelBuilder<'a, F> {
    fn build(&mut self, set: &NodeSet, level: usize) -> Result<Level<F>, EngineError> {
        let dag = self.net.dag;
        let mut groups = Vec::new();
        let mut factors = Vec::new();
        for g in dag.independent_decomposition(set).groups {
            if g.len() == 1 && dag.is_source(g.indices()[0]) {
                let v = g.indices()[0];
                let name = dag.name(v);
                let law = self.net.law(name)?;
                if law.is_degenerate() {
                    continue;
                }
                let f = match self.source_factor.get(&v) {
                    Some(f) => f.clone(),
                    None => {
                        let f = Arc::new(
                            Factor::univariate(name, law, self.max_degree)
                                .map_err(basis_err(format!("input `{name}`")))?,
                        );
                        self.source_factor.insert(v, f.clone());
                        f
                    }
                };
                groups.push(g);
                factors.push(f);
            } else {
                let names = dag.names_of(&g);
                let cols = names
                    .iter()
                    .map(|n| self.data.column(n).map(|c| (n.as_str(), c)))
                    .collect::<Result<Vec<_>, _>>()?;
                match GroupBasis::fit(&cols, self.cfg.degree(level)) {
                    Ok(b) => {
                        groups.push(g);
                        factors.push(Arc::new(Factor::Group(b)));
                    }
                    Err(BasisError::AllMonomialsDegenerate(_)) => continue,
                    Err(e) => {
                        return Err(EngineError::Basis {
                            context: format!("group [{}] at level {level}", names.join(", ")),
                            source: e,
                        })
                    }
                }
            }
        }
        Ok(Level { groups, factors })
    }
}

/// Sparse representation of an expansion: per-slot function indices to coefficient.
type Terms<F> = HashMap<Vec<u32>, F>;
/// Sub-expansion of one group function: (slot, order) pairs to coefficient.
type SubExpansion<F> = Vec<(Vec<(usize, u32)>, F)>;

/// Network expansion; `cfg.fit.mode` selects dense (network) or sparse (SN-PCE) fits.
pub fn fit_network<F: Real>(
    net: Network<'_, F>,
    data: &Dataset<F>,
    cfg: &EngineConfig,
) -> Result<EngineOutput<F>, EngineError> {
    cfg.validate()?;
    let dag = net.dag;
    let (live, fixed) = net.influencing()?;
    let sets = dag.level_sets(net.output)?;
    let depth = sets.len();
    let max_degree = (1..=depth).map(|l| cfg.degree(l)).max().unwrap_or(1);
    let mut builder = LevelBuilder {
        net,
        data,
        cfg,
        source_factor: HashMap::new(),
        max_degree,
    };
    let m = data.rows();
    let mut summaries = Vec::new();

    // Level 1: the output on the groups of its direct predecessors.
    let mut level = builder.build(&sets[0], 1)?;
    let p1 = cfg.degree(1);
    let basis = OrthonormalBasis::total_degree(level.factors.clone(), p1);
    let y = data.column(net.output)?;
    if cfg.fit.mode == FitMode::Dense && m < basis.len() {
        return Err(EngineError::Regression(RegressionError::Underdetermined {
            context: format!(
                "level-1 expansion of `{}` in {} predecessors",
                net.output,
                sets[0].len()
            ),
            required: basis.len(),
            got: m,
        }));
    }
    let x = basis
        .evaluate(data)
        .map_err(basis_err("level-1 design".into()))?;
    let out = fit(&x, y, &cfg.fit, || format!("level-1 expansion of `{}`", net.output))?;
    let top_support = out.coefficients.support.len();
    summaries.push(LevelExpansion {
        level: 1,
        groups: level.groups.iter().map(|g| dag.names_of(g)).collect(),
        fits: 1,
        largest_basis: basis.len(),
        support: top_support,
        worst_relative_residual: out.relative_residual,
        constraint_unmet: usize::from(!out.constraint_met),
    });
    let mut terms: Terms<F> = basis
        .terms
        .iter()
        .zip(&out.coefficients.values)
        .filter(|(_, c)| **c != F::zero())
        .map(|(t, &c)| (t.0.clone(), c))
        .collect();

    // Levels 2..L: rewrite every group function in the next level's groups.
    for l in 1..depth {
        let next = builder.build(&sets[l], l + 1)?;
        let p_next = cfg.degree(l + 1);
        let mut needed: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); level.factors.len()];
        for t in terms.keys() {
            for (j, &k) in t.iter().enumerate() {
                if k > 0 {
                    needed[j].insert(k);
                }
            }
        }
        let mut subs: Vec<HashMap<u32, SubExpansion<F>>> = Vec::with_capacity(level.factors.len());
        let mut stage = LevelExpansion {
            level: l + 1,
            groups: next.groups.iter().map(|g| dag.names_of(g)).collect(),
            fits: 0,
            largest_basis: 0,
            support: 0,
            worst_relative_residual: 0.0,
            constraint_unmet: 0,
        };
        for (j, factor) in level.factors.iter().enumerate() {
            let mut map = HashMap::new();
            if let Some(slot) = next.factors.iter().position(|f| Arc::ptr_eq(f, factor)) {
                // A source carries over unchanged.
                for &k in &needed[j] {
                    map.insert(k, vec![(vec![(slot, k)], F::one())]);
                }
                subs.push(map);
                continue;
            }
            if needed[j].is_empty() {
                subs.push(map);
                continue;
            }
            let group = &level.groups[j];
            let block = dag.predecessor_operator(group);
            let slots: Vec<usize> = next
                .groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.is_subset(&block))
                .map(|(s, _)| s)
                .collect();
            let sub_factors: Vec<Arc<Factor<F>>> = slots.iter().map(|&s| next.factors[s].clone()).collect();
            let sub_basis = OrthonormalBasis::total_degree(sub_factors, p_next);
            let label = || {
                format!(
                    "level-{} sub-expansion of group [{}] in {} predecessors",
                    l + 1,
                    dag.names_of(group).join(", "),
                    block.len()
                )
            };
            if cfg.fit.mode == FitMode::Dense && m < sub_basis.len() {
                return Err(EngineError::Regression(RegressionError::Underdetermined {
                    context: label(),
                    required: sub_basis.len(),
                    got: m,
                }));
            }
            let design = sub_basis.evaluate(data).map_err(basis_err(label()))?;
            let values = factor.evaluate(data).map_err(basis_err(label()))?;
            let width = factor.len();
            stage.largest_basis = stage.largest_basis.max(sub_basis.len());
            for &k in &needed[j] {
                let target: Vec<F> = (0..m).map(|r| values[r * width + k as usize]).collect();
                let o = fit(&design, &target, &cfg.fit, label)?;
                stage.fits += 1;
                stage.support += o.coefficients.support.len();
                stage.worst_relative_residual = stage.worst_relative_residual.max(o.relative_residual);
                stage.constraint_unmet += usize::from(!o.constraint_met);
                let expansion = o
                    .coefficients
                    .support
                    .iter()
                    .map(|&i| {
                        let idx = sub_basis.terms[i]
                            .0
                            .iter()
                            .enumerate()
                            .filter(|(_, &a)| a > 0)
                            .map(|(s, &a)| (slots[s], a))
                            .collect();
                        (idx, o.coefficients.values[i])
                    })
                    .collect();
                map.insert(k, expansion);
            }
            subs.push(map);
        }

        let width = next.factors.len();
        let mut rewritten: Terms<F> = HashMap::new();
        for (t, &c) in &terms {
            let mut acc: Vec<(Vec<u32>, F)> = vec![(vec![0; width], c)];
            for (j, &k) in t.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let sub = &subs[j][&k];
                let mut grown = Vec::with_capacity(acc.len() * sub.len());
                for (idx, a) in &acc {
                    for (pairs, b) in sub {
                        let mut idx2 = idx.clone();
                        for &(s, order) in pairs {
                            debug_assert_eq!(idx2[s], 0, "predecessor blocks overlap");
                            idx2[s] = order;
                        }
                        grown.push((idx2, *a * *b));
                    }
                }
                acc = grown;
            }
            for (idx, v) in acc {
                *rewritten.entry(idx).or_insert_with(F::zero) += v;
            }
        }
        rewritten.retain(|_, v| *v != F::zero());
        terms = rewritten;
        summaries.push(stage);
        level = next;
    }

    // The last level holds only live sources; order the slots like `live`.
    let slot_of: Vec<usize> = live
        .iter()
        .map(|n| {
            level
                .factors
                .iter()
                .position(|f| f.variables()[0] == n.as_str())
                .expect("every live input is a final factor")
        })
        .collect();
    let factors: Vec<Arc<Factor<F>>> = slot_of.iter().map(|&s| level.factors[s].clone()).collect();
    let mut list: Vec<(MultiIndex, F)> = terms
        .into_iter()
        .map(|(t, c)| (MultiIndex(slot_of.iter().map(|&s| t[s]).collect()), c))
        .collect();
    if !list.iter().any(|(t, _)| t.is_constant()) {
        list.push((MultiIndex::zeros(live.len()), F::zero()));
    }
    list.sort_by(|a, b| crate::basis::multi_index::graded_lex_cmp(&a.0 .0, &b.0 .0, a.0.total(), b.0.total()));
    let (final_terms, coefficients): (Vec<_>, Vec<_>) = list.into_iter().unzip();
    let method = match cfg.fit.mode {
        FitMode::Dense => "network",
        FitMode::Sparse => "sn",
    };
    finish(
        method,
        m,
        live,
        fixed,
        factors,
        final_terms,
        coefficients,
        summaries,
        top_support,
    )
}

/// SN-PCE: the network expansion with every coefficient fit made sparse.
pub fn fit_sparse_network<F: Real>(
    net: Network<'_, F>,
    data: &Dataset<F>,
    cfg: &EngineConfig,
) -> Result<EngineOutput<F>, EngineError> {
    let mut cfg = cfg.clone();
    cfg.fit.mode = FitMode::Sparse;
    fit_network(net, data, &cfg)
}

pub fn run_engine<F: Real>(
    kind: EngineKind,
    net: Network<'_, F>,
    data: &Dataset<F>,
    cfg: &EngineConfig,
) -> Result<EngineOutput<F>, EngineError> {
    match kind {
        EngineKind::Naive => fit_naive(net, data, cfg),
        EngineKind::Network => fit_network(net, data, cfg),
        EngineKind::SparseNetwork => fit_sparse_network(net, data, cfg),
    }
}

/// Seed of replication `rep`, derived from the master seed alone.
pub fn replication_seed(master: u64, rep: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(rep);
    rng.next_u64()
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub aggregate: SobolReport,
    pub runs: Vec<SobolReport>,
    pub errors: Vec<String>,
}

/// Runs `run` once per replication seed (in parallel) and summarises the successes.
/// Fails with the first replication's error when none succeeds.
pub fn replicate<G>(reps: usize, seed: u64, run: G) -> Result<Replication, EngineError>
where
    G: Fn(u64) -> Result<SobolReport, EngineError> + Sync,
{
    if reps == 0 {
        return Err(EngineError::InvalidConfig("at least one replication is needed".into()));
    }
    let results: Vec<Result<SobolReport, EngineError>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| run(replication_seed(seed, r)))
        .collect();
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(rep) => runs.push(rep),
            Err(e) => failed.push(e),
        }
    }
    if runs.is_empty() {
        // nothing to summarise; the first failure says why
        return Err(failed.swap_remove(0));
    }
    let errors: Vec<String> = failed.iter().map(ToString::to_string).collect();
    let aggregate = aggregate(&runs, errors.len())?;
    Ok(Replication {
        aggregate,
        runs,
        errors,
    })
}
