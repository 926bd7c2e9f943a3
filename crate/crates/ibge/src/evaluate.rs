//! Equivalence-class mapping (CPDAG and interventional essential graph) and
//! the TP/FP/SHD performance metric with ROC-sweep support.

use rayon::prelude::*;

use crate::data::{InterventionDesign, ObservedDataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::search::ConsensusGraph;

/// A partially directed graph: directed and undirected edge sets over the
/// same vertex set, disjoint and without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pdag {
    n: usize,
    directed: Vec<bool>,
    undirected: Vec<bool>,
}

impl Pdag {
    pub fn new(n: usize) -> Self {
        Pdag {
            n,
            directed: vec![false; n * n],
            undirected: vec![false; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_directed(&self, u: usize, v: usize) -> bool {
        self.directed[u * self.n + v]
    }

    #[inline]
    pub fn has_undirected(&self, u: usize, v: usize) -> bool {
        self.undirected[u * self.n + v]
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.has_directed(u, v) || self.has_directed(v, u) || self.has_undirected(u, v)
    }

    pub fn add_directed(&mut self, u: usize, v: usize) {
        debug_assert!(u != v);
        self.directed[u * self.n + v] = true;
        self.undirected[u * self.n + v] = false;
        self.undirected[v * self.n + u] = false;
    }

    pub fn add_undirected(&mut self, u: usize, v: usize) {
        debug_assert!(u != v);
        self.undirected[u * self.n + v] = true;
        self.undirected[v * self.n + u] = true;
    }

    /// Directed edges as (from, to), ascending.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in 0..self.n {
                if self.has_directed(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Undirected edges as (min, max), ascending.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.has_undirected(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.directed_edges().len() + self.undirected_edges().len()
    }

    /// Restriction to the first `k` vertices.
    fn restrict(&self, k: usize) -> Pdag {
        let mut out = Pdag::new(k);
        for u in 0..k {
            for v in 0..k {
                if self.has_directed(u, v) {
                    out.add_directed(u, v);
                }
                if u < v && self.has_undirected(u, v) {
                    out.add_undirected(u, v);
                }
            }
        }
        out
    }
}

/// CPDAG of a plain digraph given as edge list over `n` vertices: skeleton
/// plus v-structures, closed under the Meek orientation rules. The input
/// must be acyclic (callers guarantee this).
fn cpdag_of_edges(n: usize, edges: &[(usize, usize)]) -> Pdag {
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut adj = vec![false; n * n];
    for &(u, v) in edges {
        parents[v].push(u);
        adj[u * n + v] = true;
        adj[v * n + u] = true;
    }
    let mut pdag = Pdag::new(n);
    for &(u, v) in edges {
        pdag.add_undirected(u, v);
    }
    // V-structures: a→v←b with a, b non-adjacent.
    for v in 0..n {
        let ps = &parents[v];
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                let (a, b) = (ps[i], ps[j]);
                if !adj[a * n + b] {
                    pdag.add_directed(a, v);
                    pdag.add_directed(b, v);
                }
            }
        }
    }
    meek_closure(&mut pdag);
    pdag
}

/// Meek rules R1–R3, iterated to a fixpoint. Orientations seeded purely by
/// v-structures need no background-knowledge rule.
fn meek_closure(pdag: &mut Pdag) {
    let n = pdag.n;
    loop {
        let mut changed = false;
        for b in 0..n {
            for c in 0..n {
                if !pdag.has_undirected(b, c) {
                    continue;
                }
                // R1: a→b, b−c, a and c non-adjacent ⇒ b→c.
                let rule1 = (0..n)
                    .any(|a| pdag.has_directed(a, b) && a != c && !pdag.adjacent(a, c));
                if rule1 {
                    pdag.add_directed(b, c);
                    changed = true;
                    continue;
                }
                // R2 for the pair (b, c): b→a→c with b−c ⇒ b→c.
                let rule2 = (0..n)
                    .any(|a| pdag.has_directed(b, a) && pdag.has_directed(a, c));
                if rule2 {
                    pdag.add_directed(b, c);
                    changed = true;
                    continue;
                }
                // R3: b−c, b−a1, b−a2, a1→c, a2→c, a1 and a2 non-adjacent ⇒ b→c.
                let mut spouses = Vec::new();
                for a in 0..n {
                    if pdag.has_undirected(b, a) && pdag.has_directed(a, c) {
                        spouses.push(a);
                    }
                }
                let mut rule3 = false;
                'outer: for i in 0..spouses.len() {
                    for j in i + 1..spouses.len() {
                        if !pdag.adjacent(spouses[i], spouses[j]) {
                            rule3 = true;
                            break 'outer;
                        }
                    }
                }
                if rule3 {
                    pdag.add_directed(b, c);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Essential graph (CPDAG) of the observed part of a DAG.
pub fn cpdag(dag: &Dag) -> Pdag {
    cpdag_of_edges(dag.n_obs(), &dag.obs_edges())
}

/// Interventional essential graph under known target sets: the CPDAG of the
/// DAG augmented with one parentless vertex per intervention pointing at its
/// targets, restricted back to the observed vertices.
pub fn interventional_eg(dag: &Dag, targets: &[Vec<usize>]) -> Result<Pdag> {
    let n = dag.n_obs();
    let m = targets.len();
    let mut edges = dag.obs_edges();
    for (j, ts) in targets.iter().enumerate() {
        for &t in ts {
            if t >= n {
                return Err(Error::Dimension(format!(
                    "intervention {j} targets node {t} but graph has {n} observed vertices"
                )));
            }
            edges.push((n + j, t));
        }
    }
    Ok(cpdag_of_edges(n + m, &edges).restrict(n))
}

/// Canonical signature of a DAG's Markov equivalence class: its skeleton and
/// v-structures. Two DAGs share a class iff signatures match.
pub fn class_signature(dag: &Dag) -> String {
    let n = dag.n_obs();
    let mut skeleton: Vec<(usize, usize)> = dag
        .obs_edges()
        .into_iter()
        .map(|(u, v)| (u.min(v), u.max(v)))
        .collect();
    skeleton.sort_unstable();
    skeleton.dedup();
    let mut vstructs = Vec::new();
    for v in 0..n {
        let ps = dag.obs_parents(v);
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                let (a, b) = (ps[i], ps[j]);
                if !dag.has_obs_edge(a, b) && !dag.has_obs_edge(b, a) {
                    vstructs.push((a.min(b), v, a.max(b)));
                }
            }
        }
    }
    vstructs.sort_unstable();
    format!("{skeleton:?}|{vstructs:?}")
}

/// How surviving 2-cycles in a consensus edge set are treated before
/// evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoCycleRule {
    /// A bidirectional pair becomes one undirected edge.
    Symmetrize,
    /// Both directions are dropped.
    Drop,
}

/// Projects a consensus edge set (observed block only) onto a Pdag.
pub fn consensus_to_pdag(consensus: &ConsensusGraph, rule: TwoCycleRule) -> Pdag {
    let mut pdag = Pdag::new(consensus.n_obs);
    let has = |u: usize, v: usize| consensus.obs_edges.contains(&(u, v));
    for &(u, v) in &consensus.obs_edges {
        if has(v, u) {
            match rule {
                TwoCycleRule::Symmetrize => pdag.add_undirected(u, v),
                TwoCycleRule::Drop => {}
            }
        } else {
            pdag.add_directed(u, v);
        }
    }
    pdag
}

/// Edge-comparison counts between an estimated and a true Pdag. Orientation
/// mismatches (wrong direction, or directed-vs-undirected either way) count
/// half to FP and half to FN, so `SHD = FN + FP = P − TP + FP`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricResult {
    pub tp: f64,
    pub fp: f64,
    pub fn_count: f64,
    /// Number of edges in the true graph.
    pub p: usize,
    pub shd: f64,
    pub tpr: f64,
    pub fprp: f64,
}

/// Compares an estimate against the truth. Both graphs must share a vertex
/// count.
pub fn compare(estimate: &Pdag, truth: &Pdag) -> Result<MetricResult> {
    if estimate.n() != truth.n() {
        return Err(Error::Dimension(format!(
            "estimate has {} vertices, truth has {}",
            estimate.n(),
            truth.n()
        )));
    }
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_count = 0.0;
    for (u, v) in truth.directed_edges() {
        if estimate.has_directed(u, v) {
            tp += 1.0;
        } else if estimate.has_directed(v, u) || estimate.has_undirected(u, v) {
            tp += 0.5;
            fp += 0.5;
            fn_count += 0.5;
        } else {
            fn_count += 1.0;
        }
    }
    for (u, v) in truth.undirected_edges() {
        if estimate.has_undirected(u, v) {
            tp += 1.0;
        } else if estimate.has_directed(u, v) || estimate.has_directed(v, u) {
            tp += 0.5;
            fp += 0.5;
            fn_count += 0.5;
        } else {
            fn_count += 1.0;
        }
    }
    // Estimated edges outside the true skeleton.
    for (u, v) in estimate.directed_edges() {
        if !truth.adjacent(u, v) {
            fp += 1.0;
        }
    }
    for (u, v) in estimate.undirected_edges() {
        if !truth.adjacent(u, v) {
            fp += 1.0;
        }
    }
    let p = truth.edge_count();
    let shd = fn_count + fp;
    let (tpr, fprp) = if p > 0 {
        (tp / p as f64, fp / p as f64)
    } else {
        // Degenerate truth without edges: recall is vacuously perfect.
        (1.0, if fp > 0.0 { f64::INFINITY } else { 0.0 })
    };
    Ok(MetricResult {
        tp,
        fp,
        fn_count,
        p,
        shd,
        tpr,
        fprp,
    })
}

/// The alpha_mu grid used for ROC-style sweeps; the anchor point is 0.1.
pub const ALPHA_MU_GRID: [f64; 9] = [
    0.000248, 0.00111, 0.00498, 0.0223, 0.1, 0.165, 0.272, 0.448, 0.739,
];

/// One dataset entering a sweep, with its ground truth for evaluation.
#[derive(Debug, Clone)]
pub struct SweepDataset {
    pub id: String,
    pub seed: u64,
    pub regime: String,
    pub data: ObservedDataset,
    pub design: InterventionDesign,
    pub truth_dag: Dag,
    pub truth_targets: Vec<Vec<usize>>,
}

/// What a learner returns: a single DAG (mapped through the interventional
/// essential graph with the true targets before comparison) or an already
/// partially directed summary such as a consensus graph.
#[derive(Debug, Clone)]
pub enum LearnerOutput {
    Dag(Dag),
    Pdag(Pdag),
}

/// One row of the long-format sweep table.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub dataset_id: String,
    pub seed: u64,
    pub alpha_mu: f64,
    pub regime: String,
    pub metrics: MetricResult,
}

/// Maps a learner output into equivalence-class space (single DAGs pass
/// through the interventional essential graph under the true targets) and
/// compares it against the truth's interventional essential graph.
pub fn evaluate_output(ds: &SweepDataset, output: LearnerOutput) -> Result<MetricResult> {
    let truth_eg = interventional_eg(&ds.truth_dag, &ds.truth_targets)?;
    let estimate = match output {
        LearnerOutput::Dag(dag) => {
            interventional_eg(&dag.observed_subgraph(), &ds.truth_targets)?
        }
        LearnerOutput::Pdag(p) => p,
    };
    compare(&estimate, &truth_eg)
}

/// Runs `learner` for every (dataset, alpha_mu) cell, evaluates against the
/// truth's interventional essential graph, and returns long-format rows in
/// deterministic (dataset-major) order. Cells run concurrently.
pub fn roc_sweep<L>(
    datasets: &[SweepDataset],
    alpha_mu_grid: &[f64],
    learner: L,
) -> Result<Vec<SweepRow>>
where
    L: Fn(&SweepDataset, f64) -> Result<LearnerOutput> + Sync,
{
    if alpha_mu_grid.is_empty() {
        return Err(Error::InvalidArgument("alpha_mu grid is empty".into()));
    }
    let cells: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..alpha_mu_grid.len()).map(move |g| (d, g)))
        .collect();
    let rows: Vec<Result<SweepRow>> = cells
        .par_iter()
        .map(|&(d, g)| {
            let ds = &datasets[d];
            let alpha_mu = alpha_mu_grid[g];
            let metrics = evaluate_output(ds, learner(ds, alpha_mu)?)?;
            Ok(SweepRow {
                dataset_id: ds.id.clone(),
                seed: ds.seed,
                alpha_mu,
                regime: ds.regime.clone(),
                metrics,
            })
        })
        .collect();
    rows.into_iter().collect()
}
