//! Process graphs: structure, predecessor iteration and independent decompositions.
//!
//! Nodes are identified by their declaration index. A [`NodeSet`] is always kept
//! sorted in declaration order so that every derived quantity (groups, basis
//! orderings, CSV headers) is reproducible.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DagError {
    #[error("node `{0}` declared more than once")]
    DuplicateNode(String),
    #[error("edge {from} -> {to} references undeclared node `{missing}`")]
    UnknownEndpoint {
        from: String,
        to: String,
        missing: String,
    },
    #[error("graph contains a cycle through node `{0}`")]
    CycleDetected(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("output node `{0}` is a source and has no predecessors")]
    OutputIsSource(String),
}

/// Ordered subset of the nodes of one [`ProcessDag`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NodeSet {
    members: Vec<usize>,
}

impl NodeSet {
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut members: Vec<usize> = indices.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        NodeSet { members }
    }

    pub fn indices(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        NodeSet::from_indices(self.members.iter().chain(other.members.iter()).copied())
    }
}

/// Partition of a node set into mutually independent groups.
///
/// Groups are ordered by their smallest member; members keep declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub groups: Vec<NodeSet>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Index of the group holding `node`, if any.
    pub fn group_of(&self, node: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(node))
    }
}

/// How the per-PCE variable count of a network expansion is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredecessorCount {
    /// Direct predecessors of a single node (the count the published sample sizes use).
    PerNode,
    /// Union of the direct predecessors of all nodes in an independent group
    /// (the variable count of the sub-expansions actually regressed).
    PerGroup,
}

/// Immutable directed acyclic graph of a network-structured process.
#[derive(Debug, Clone)]
pub struct ProcessDag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<bool>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
    // ancestors[i][j]: j is an ancestor of i (every node is its own ancestor)
    ancestors: Vec<Vec<bool>>,
}

impl ProcessDag {
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self, DagError> {
        let mut index = HashMap::with_capacity(nodes.len());
        let mut names = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            let n = n.as_ref().to_string();
            if index.insert(n.clone(), i).is_some() {
                return Err(DagError::DuplicateNode(n));
            }
            names.push(n);
        }
        let n = names.len();
        let mut adjacency = vec![false; n * n];
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (from, to) in edges {
            let (from, to) = (from.as_ref(), to.as_ref());
            let lookup = |name: &str| {
                index.get(name).copied().ok_or_else(|| DagError::UnknownEndpoint {
                    from: from.to_string(),
                    to: to.to_string(),
                    missing: name.to_string(),
                })
            };
            let (i, j) = (lookup(from)?, lookup(to)?);
            if !adjacency[i * n + j] {
                adjacency[i * n + j] = true;
                preds[j].push(i);
                succs[i].push(j);
            }
        }
        for list in preds.iter_mut().chain(succs.iter_mut()) {
            list.sort_unstable();
        }

        if let Some(node) = find_cycle(&succs) {
            return Err(DagError::CycleDetected(names[node].clone()));
        }
        let topo = kahn_order(&preds, &succs);

        let mut ancestors = vec![vec![false; n]; n];
        for &v in &topo {
            ancestors[v][v] = true;
            for &p in &preds[v] {
                let inherited = ancestors[p].clone();
                for (dst, src) in ancestors[v].iter_mut().zip(inherited) {
                    *dst |= src;
                }
            }
        }

        Ok(ProcessDag {
            names,
            index,
            adjacency,
            preds,
            succs,
            topo,
            ancestors,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn node(&self, name: &str) -> Result<usize, DagError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| DagError::UnknownNode(name.to_string()))
    }

    pub fn node_set<S: AsRef<str>>(&self, names: &[S]) -> Result<NodeSet, DagError> {
        names
            .iter()
            .map(|n| self.node(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()
            .map(NodeSet::from_indices)
    }

    pub fn names_of(&self, set: &NodeSet) -> Vec<String> {
        set.indices().iter().map(|&i| self.names[i].clone()).collect()
    }

    /// `A[i][j] = 1` iff there is an edge from node `i` to node `j`.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.adjacency[i * n + j] as u8).collect())
            .collect()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from * self.len() + to]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.succs
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
            .collect()
    }

    pub fn direct_predecessors(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    pub fn direct_successors(&self, node: usize) -> &[usize] {
        &self.succs[node]
    }

    pub fn is_source(&self, node: usize) -> bool {
        self.preds[node].is_empty()
    }

    /// Nodes ordered so that every edge points forward; ties broken by declaration order.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn sources(&self) -> NodeSet {
        NodeSet::from_indices((0..self.len()).filter(|&i| self.preds[i].is_empty()))
    }

    pub fn sinks(&self) -> NodeSet {
        NodeSet::from_indices((0..self.len()).filter(|&i| self.succs[i].is_empty()))
    }

    /// Whether a directed path of at least one edge leads from `from` to `to`.
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        from != to && self.ancestors[to][from]
    }

    pub fn is_ancestor(&self, ancestor: usize, node: usize) -> bool {
        self.ancestors[node][ancestor]
    }

    /// Source nodes with a path to `output`.
    pub fn influencing_inputs(&self, output: &str) -> Result<NodeSet, DagError> {
        let y = self.node(output)?;
        Ok(NodeSet::from_indices(
            self.sources().indices().iter().copied().filter(|&s| self.has_path(s, y)),
        ))
    }

    /// Direct predecessors of the members of `set`, plus the members that are sources.
    pub fn predecessor_operator(&self, set: &NodeSet) -> NodeSet {
        NodeSet::from_indices(set.indices().iter().flat_map(|&v| {
            if self.preds[v].is_empty() {
                vec![v]
            } else {
                self.preds[v].clone()
            }
        }))
    }

    /// `set` after `times` applications of the predecessor operator.
    pub fn predecessor_power(&self, set: &NodeSet, times: usize) -> NodeSet {
        let mut current = set.clone();
        for _ in 0..times {
            current = self.predecessor_operator(&current);
        }
        current
    }

    /// Number of predecessor iterations until the output is expressed in sources only.
    pub fn iteration_depth(&self, output: &str) -> Result<usize, DagError> {
        let y = self.node(output)?;
        if self.is_source(y) {
            return Err(DagError::OutputIsSource(output.to_string()));
        }
        let mut current = self.predecessor_operator(&NodeSet::from_indices([y]));
        let mut level = 1;
        loop {
            let next = self.predecessor_operator(&current);
            if next == current {
                return Ok(level);
            }
            current = next;
            level += 1;
            debug_assert!(level <= self.len());
        }
    }

    /// The node sets `P^1(y), ..., P^L(y)`.
    pub fn level_sets(&self, output: &str) -> Result<Vec<NodeSet>, DagError> {
        let depth = self.iteration_depth(output)?;
        let y = NodeSet::from_indices([self.node(output)?]);
        let mut sets = Vec::with_capacity(depth);
        let mut current = y;
        for _ in 0..depth {
            current = self.predecessor_operator(&current);
            sets.push(current.clone());
        }
        Ok(sets)
    }

    fn share_ancestor(&self, a: usize, b: usize) -> bool {
        self.ancestors[a]
            .iter()
            .zip(&self.ancestors[b])
            .any(|(&x, &y)| x && y)
    }

    /// Connected components of `set` under "shares a common ancestor".
    pub fn independent_decomposition(&self, set: &NodeSet) -> Decomposition {
        let members = set.indices();
        let mut parent: Vec<usize> = (0..members.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                if self.share_ancestor(members[a], members[b]) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (k, &m) in members.iter().enumerate() {
            let root = find(&mut parent, k);
            match groups.iter_mut().find(|(r, _)| *r == root) {
                Some((_, g)) => g.push(m),
                None => groups.push((root, vec![m])),
            }
        }
        Decomposition {
            groups: groups
                .into_iter()
                .map(|(_, g)| NodeSet::from_indices(g))
                .collect(),
        }
    }

    /// Largest number of variables of any expansion the network estimator regresses.
    pub fn network_pce_dimension(
        &self,
        output: &str,
        counting: PredecessorCount,
    ) -> Result<usize, DagError> {
        let y = self.node(output)?;
        let levels = self.level_sets(output)?;
        let mut widest = self.preds[y].len();
        // the last level holds sources only and needs no further expansion
        for set in &levels[..levels.len() - 1] {
            match counting {
                PredecessorCount::PerNode => {
                    for &v in set.indices() {
                        widest = widest.max(self.preds[v].len());
                    }
                }
                PredecessorCount::PerGroup => {
                    for group in self.independent_decomposition(set).groups {
                        let preds = NodeSet::from_indices(
                            group.indices().iter().flat_map(|&v| self.preds[v].iter().copied()),
                        );
                        widest = widest.max(preds.len());
                    }
                }
            }
        }
        Ok(widest)
    }

    /// Ratio of the widest network expansion to the number of influencing inputs.
    pub fn network_lambda(&self, output: &str, counting: PredecessorCount) -> Result<f64, DagError> {
        let d = self.network_pce_dimension(output, counting)?;
        let xi = self.influencing_inputs(output)?.len();
        Ok(d as f64 / xi as f64)
    }
}

// Three-colour depth-first search; returns a node lying on a cycle.
fn find_cycle(succs: &[Vec<usize>]) -> Option<usize> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let n = succs.len();
    let mut mark = vec![Mark::White; n];
    for start in 0..n {
        if mark[start] != Mark::White {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Grey;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&w) = succs[v].get(*next) {
                *next += 1;
                match mark[w] {
                    Mark::Grey => return Some(w),
                    Mark::White => {
                        mark[w] = Mark::Grey;
                        stack.push((w, 0));
                    }
                    Mark::Black => {}
                }
            } else {
                mark[v] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}

fn kahn_order(preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Vec<usize> {
    let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| Reverse(i))
        .collect();
    let mut order = Vec::with_capacity(preds.len());
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &w in &succs[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(Reverse(w));
            }
        }
    }
    order
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn fig1() -> ProcessDag {
        let nodes: Vec<String> = (1..=13).map(|i| format!("v{i}")).collect();
        let e = |a: u32, b: u32| (format!("v{a}"), format!("v{b}"));
        let edges = vec![
            e(1, 2),
            e(1, 7),
            e(2, 7),
            e(2, 8),
            e(3, 8),
            e(4, 9),
            e(5, 9),
            e(6, 10),
            e(7, 11),
            e(8, 11),
            e(9, 12),
            e(10, 12),
            e(11, 13),
            e(12, 13),
        ];
        ProcessDag::new(&nodes, &edges).unwrap()
    }

    fn names(dag: &ProcessDag, set: &NodeSet) -> Vec<String> {
        dag.names_of(set)
    }

    #[test]
    fn fig1_sources_and_sink() {
        let dag = fig1();
        assert_eq!(dag.edges().len(), 14);
        assert_eq!(names(&dag, &dag.sources()), ["v1", "v3", "v4", "v5", "v6"]);
        assert_eq!(names(&dag, &dag.sinks()), ["v13"]);
        assert_eq!(
            names(&dag, &dag.influencing_inputs("v13").unwrap()),
            ["v1", "v3", "v4", "v5", "v6"]
        );
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = ProcessDag::new(&["a"], &[("a", "a")]).unwrap_err();
        assert_eq!(err, DagError::CycleDetected("a".into()));
    }

    #[test]
    fn longer_cycle_names_a_member() {
        let err = ProcessDag::new(&["a", "b", "c", "d"], &[("a", "b"), ("b", "c"), ("c", "b"), ("c", "d")])
            .unwrap_err();
        match err {
            DagError::CycleDetected(n) => assert!(n == "b" || n == "c"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            ProcessDag::new(&["a", "a"], &[]).unwrap_err(),
            DagError::DuplicateNode("a".into())
        );
        assert!(matches!(
            ProcessDag::new(&["a"], &[("a", "z")]).unwrap_err(),
            DagError::UnknownEndpoint { missing, .. } if missing == "z"
        ));
    }

    #[test]
    fn edgeless_graph_nodes_are_sources_and_sinks() {
        let dag = ProcessDag::new::<&str>(&["a", "b"], &[]).unwrap();
        assert_eq!(names(&dag, &dag.sources()), ["a", "b"]);
        assert_eq!(names(&dag, &dag.sinks()), ["a", "b"]);
        let single = ProcessDag::new::<&str>(&["x"], &[]).unwrap();
        assert_eq!(names(&single, &single.sources()), ["x"]);
    }

    #[test]
    fn adjacency_matches_edges() {
        let dag = fig1();
        let a = dag.adjacency_matrix();
        for i in 0..dag.len() {
            for j in 0..dag.len() {
                assert_eq!(a[i][j] == 1, dag.edges().contains(&(i, j)));
            }
        }
        // column sums vanish exactly for sources
        for j in 0..dag.len() {
            let col: u32 = (0..dag.len()).map(|i| a[i][j] as u32).sum();
            assert_eq!(col == 0, dag.sources().contains(j));
        }
    }

    #[test]
    fn influencing_inputs_edge_cases() {
        let dag = ProcessDag::new(&["a", "b", "y"], &[("a", "y")]).unwrap();
        assert_eq!(names(&dag, &dag.influencing_inputs("y").unwrap()), ["a"]);
        assert!(dag.influencing_inputs("a").unwrap().is_empty());
        assert_eq!(
            dag.influencing_inputs("zz").unwrap_err(),
            DagError::UnknownNode("zz".into())
        );
    }

    #[test]
    fn predecessor_operator_examples() {
        let dag = fig1();
        let s = dag.node_set(&["v13"]).unwrap();
        assert_eq!(names(&dag, &dag.predecessor_operator(&s)), ["v11", "v12"]);
        let s = dag.node_set(&["v7", "v8", "v9", "v10"]).unwrap();
        assert_eq!(
            names(&dag, &dag.predecessor_operator(&s)),
            ["v1", "v2", "v3", "v4", "v5", "v6"]
        );
        let src = dag.sources();
        assert_eq!(dag.predecessor_operator(&src), src);
    }

    #[test]
    fn iteration_depths() {
        let dag = fig1();
        assert_eq!(dag.iteration_depth("v13").unwrap(), 4);
        let levels = dag.level_sets("v13").unwrap();
        assert_eq!(names(&dag, &levels[3]), ["v1", "v3", "v4", "v5", "v6"]);
        let chain = ProcessDag::new(&["a", "b", "y"], &[("a", "b"), ("b", "y")]).unwrap();
        assert_eq!(chain.iteration_depth("y").unwrap(), 2);
        assert_eq!(
            chain.iteration_depth("a").unwrap_err(),
            DagError::OutputIsSource("a".into())
        );
    }

    #[test]
    fn fig1_decompositions() {
        let dag = fig1();
        let levels = dag.level_sets("v13").unwrap();
        let d1 = dag.independent_decomposition(&levels[0]);
        assert_eq!(d1.len(), 2);
        let d2 = dag.independent_decomposition(&levels[1]);
        let groups: Vec<Vec<String>> = d2.groups.iter().map(|g| names(&dag, g)).collect();
        assert_eq!(groups, vec![vec!["v7", "v8"], vec!["v9"], vec!["v10"]]);
        let d_src = dag.independent_decomposition(&dag.sources());
        assert_eq!(d_src.len(), 5);
        assert!(d_src.groups.iter().all(|g| g.len() == 1));
    }

    #[test]
    fn lambda_of_single_edge_is_one() {
        let dag = ProcessDag::new(&["a", "y"], &[("a", "y")]).unwrap();
        assert_eq!(dag.network_lambda("y", PredecessorCount::PerNode).unwrap(), 1.0);
    }

    fn random_dag(n: usize, mask: &[bool]) -> ProcessDag {
        let nodes: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let mut edges = Vec::new();
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if mask[k % mask.len()] {
                    edges.push((nodes[i].clone(), nodes[j].clone()));
                }
                k += 1;
            }
        }
        ProcessDag::new(&nodes, &edges).unwrap()
    }

    proptest! {
        #[test]
        fn predecessor_iteration_reaches_source_ancestors(
            n in 2usize..9,
            mask in prop::collection::vec(any::<bool>(), 1..40),
            pick in prop::collection::vec(any::<bool>(), 9),
        ) {
            let dag = random_dag(n, &mask);
            let s = NodeSet::from_indices((0..n).filter(|&i| pick[i]));
            let fixed = dag.predecessor_power(&s, n);
            prop_assert_eq!(dag.predecessor_operator(&fixed), fixed.clone());
            let expected = NodeSet::from_indices(dag.sources().indices().iter().copied().filter(|&src| {
                s.indices().iter().any(|&v| dag.is_ancestor(src, v))
            }));
            prop_assert_eq!(fixed, expected);
        }

        #[test]
        fn decomposition_groups_are_independent_and_cover(
            n in 2usize..9,
            mask in prop::collection::vec(any::<bool>(), 1..40),
            pick in prop::collection::vec(any::<bool>(), 9),
        ) {
            let dag = random_dag(n, &mask);
            let s = NodeSet::from_indices((0..n).filter(|&i| pick[i]));
            let d = dag.independent_decomposition(&s);
            let union = d.groups.iter().fold(NodeSet::default(), |acc, g| acc.union(g));
            prop_assert_eq!(union, s);
            for (a, ga) in d.groups.iter().enumerate() {
                for gb in d.groups.iter().skip(a + 1) {
                    for &x in ga.indices() {
                        for &y in gb.indices() {
                            prop_assert!(!dag.share_ancestor(x, y));
                        }
                    }
                }
            }
            for w in d.groups.windows(2) {
                prop_assert!(w[0].indices()[0] < w[1].indices()[0]);
            }
        }

        #[test]
        fn every_edge_tail_is_a_predecessor(
            n in 2usize..9,
            mask in prop::collection::vec(any::<bool>(), 1..40),
        ) {
            let dag = random_dag(n, &mask);
            for (u, v) in dag.edges() {
                prop_assert!(dag.predecessor_operator(&NodeSet::from_indices([v])).contains(u));
            }
            let pos: Vec<usize> = {
                let mut p = vec![0; n];
                for (k, &v) in dag.topological_order().iter().enumerate() { p[v] = k; }
                p
            };
            for (u, v) in dag.edges() {
                prop_assert!(pos[u] < pos[v]);
            }
        }
    }
}
