//! MAP structure search and Metropolis–Hastings structure MCMC over DAGs
//! scored by the interventional BGe score.
//!
//! Moves are single-edge operations: add/delete/reverse on observed-observed
//! edges, plus add/delete on intervention→observed edges when targets are
//! unknown. Moves into intervention vertices are never proposed; they stay
//! parentless by construction.

use rayon::prelude::*;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::rng::substream;
use crate::score::Scorer;

/// Greedy search configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// MCMC configuration. Chains run independently from distinct seed
/// substreams; `burnin < iterations` and `thin >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if self.burnin >= self.iterations {
            return Err(Error::Config(format!(
                "burnin ({}) must be smaller than iterations ({})",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("need at least one chain".into()));
        }
        Ok(())
    }
}

/// Which moves the searchers may propose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveConstraints {
    /// Propose add/delete moves on intervention→observed edges (unknown
    /// targets). When false the intervention edges of the initial graph are
    /// frozen.
    pub allow_int_edges: bool,
    /// Optional cap on observed in-degree.
    pub max_in_degree: Option<usize>,
}

impl MoveConstraints {
    pub fn obs_only() -> Self {
        MoveConstraints {
            allow_int_edges: false,
            max_in_degree: None,
        }
    }

    pub fn with_int_edges() -> Self {
        MoveConstraints {
            allow_int_edges: true,
            max_in_degree: None,
        }
    }
}

/// A single-edge move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    AddObs(usize, usize),
    DelObs(usize, usize),
    /// Reverses the existing edge (u, v) into (v, u).
    RevObs(usize, usize),
    AddInt(usize, usize),
    DelInt(usize, usize),
}

/// One posterior draw: the graph, its log posterior score, and the chain it
/// came from.
#[derive(Debug, Clone)]
pub struct DagSample {
    pub dag: Dag,
    pub log_score: f64,
    pub chain: usize,
}

/// Recorded MCMC output across all chains.
#[derive(Debug, Clone)]
pub struct DagSampleSet {
    pub n_obs: usize,
    pub n_int: usize,
    pub samples: Vec<DagSample>,
}

/// Edge inclusion frequencies over a sample set: rows are observed vertices
/// followed by intervention vertices, columns are observed vertices.
#[derive(Debug, Clone)]
pub struct EdgePosterior {
    pub n_obs: usize,
    pub n_int: usize,
    freq: Vec<f64>,
}

impl EdgePosterior {
    #[inline]
    pub fn obs_freq(&self, u: usize, v: usize) -> f64 {
        self.freq[u * self.n_obs + v]
    }

    #[inline]
    pub fn int_freq(&self, j: usize, v: usize) -> f64 {
        self.freq[(self.n_obs + j) * self.n_obs + v]
    }
}

/// Thresholded consensus edge set. May contain 2-cycles at thresholds below
/// 0.5; evaluation symmetrizes those on request.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusGraph {
    pub n_obs: usize,
    pub n_int: usize,
    pub obs_edges: Vec<(usize, usize)>,
    pub int_edges: Vec<(usize, usize)>,
}

/// True if a path from `from` to `to` exists when the direct edge
/// `from→avoid` is ignored.
fn reaches_avoiding(dag: &Dag, from: usize, to: usize, avoid: usize) -> bool {
    let mut frontier = dag.child_mask(from) & !(1u128 << avoid);
    let mut seen = frontier;
    while frontier != 0 {
        if seen >> to & 1 == 1 {
            return true;
        }
        let mut next = 0u128;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= dag.child_mask(v);
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen >> to & 1 == 1
}

/// Visits every legal move in canonical order (observed adds, deletes,
/// reverses, then intervention adds and deletes). Stops early when the
/// visitor returns `false`.
fn visit_legal_moves<F>(dag: &Dag, cons: &MoveConstraints, mut f: F) -> Result<()>
where
    F: FnMut(Move) -> bool,
{
    let n = dag.n_obs();
    let desc = dag.descendant_masks()?;
    let cap_ok = |v: usize| match cons.max_in_degree {
        Some(cap) => dag.in_degree(v) < cap,
        None => true,
    };
    // Additions, scanned child-major so ties break on the smallest (child,
    // parent) pair.
    for v in 0..n {
        if !cap_ok(v) {
            continue;
        }
        for u in 0..n {
            if u == v || dag.has_obs_edge(u, v) {
                continue;
            }
            if desc[v] >> u & 1 == 1 {
                continue; // u is a descendant of v: adding u→v closes a cycle
            }
            if !f(Move::AddObs(u, v)) {
                return Ok(());
            }
        }
    }
    // Deletions.
    for v in 0..n {
        let mut mask = dag.parent_mask(v);
        while mask != 0 {
            let u = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            if !f(Move::DelObs(u, v)) {
                return Ok(());
            }
        }
    }
    // Reversals: u→v becomes v→u; legal when no other path u⇝v survives.
    for v in 0..n {
        let mut mask = dag.parent_mask(v);
        while mask != 0 {
            let u = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            if !cap_ok(u) {
                continue;
            }
            if reaches_avoiding(dag, u, v, v) {
                continue;
            }
            if !f(Move::RevObs(u, v)) {
                return Ok(());
            }
        }
    }
    if cons.allow_int_edges {
        for v in 0..n {
            for j in 0..dag.n_int() {
                if !dag.has_int_edge(j, v) {
                    if !f(Move::AddInt(j, v)) {
                        return Ok(());
                    }
                }
            }
        }
        for v in 0..n {
            for j in 0..dag.n_int() {
                if dag.has_int_edge(j, v) {
                    if !f(Move::DelInt(j, v)) {
                        return Ok(());
                    }
                }
            }
        }
    }
    Ok(())
}

/// Number of legal moves from `dag`.
pub fn neighborhood_size(dag: &Dag, cons: &MoveConstraints) -> Result<usize> {
    let mut count = 0usize;
    visit_legal_moves(dag, cons, |_| {
        count += 1;
        true
    })?;
    Ok(count)
}

fn kth_legal_move(dag: &Dag, cons: &MoveConstraints, k: usize) -> Result<Move> {
    let mut remaining = k;
    let mut found = None;
    visit_legal_moves(dag, cons, |mv| {
        if remaining == 0 {
            found = Some(mv);
            false
        } else {
            remaining -= 1;
            true
        }
    })?;
    found.ok_or_else(|| Error::InvalidArgument(format!("move index {k} out of range")))
}

fn apply_move(dag: &mut Dag, mv: Move) {
    match mv {
        Move::AddObs(u, v) => dag.set_obs_edge(u, v, true),
        Move::DelObs(u, v) => dag.set_obs_edge(u, v, false),
        Move::RevObs(u, v) => {
            dag.set_obs_edge(u, v, false);
            dag.set_obs_edge(v, u, true);
        }
        Move::AddInt(j, v) => dag.set_int_edge(j, v, true),
        Move::DelInt(j, v) => dag.set_int_edge(j, v, false),
    }
}

fn undo_move(dag: &mut Dag, mv: Move) {
    match mv {
        Move::AddObs(u, v) => dag.set_obs_edge(u, v, false),
        Move::DelObs(u, v) => dag.set_obs_edge(u, v, true),
        Move::RevObs(u, v) => {
            dag.set_obs_edge(v, u, false);
            dag.set_obs_edge(u, v, true);
        }
        Move::AddInt(j, v) => dag.set_int_edge(j, v, false),
        Move::DelInt(j, v) => dag.set_int_edge(j, v, true),
    }
}

fn affected_nodes(mv: Move) -> (usize, Option<usize>) {
    match mv {
        Move::AddObs(_, v) | Move::DelObs(_, v) => (v, None),
        Move::RevObs(u, v) => (v, Some(u)),
        Move::AddInt(_, v) | Move::DelInt(_, v) => (v, None),
    }
}

fn prior_delta(scorer: &Scorer, mv: Move) -> f64 {
    let kappa = scorer.prior().edge_penalty_kappa;
    match mv {
        Move::AddObs(..) | Move::AddInt(..) => -kappa,
        Move::DelObs(..) | Move::DelInt(..) => kappa,
        Move::RevObs(..) => 0.0,
    }
}

/// State shared by both searchers: the graph, per-node local scores and the
/// running total (locals + prior).
struct ScoredState {
    dag: Dag,
    locals: Vec<f64>,
    total: f64,
}

impl ScoredState {
    fn init(scorer: &Scorer, dag: Dag) -> Result<Self> {
        dag.topological_sort()?;
        let mut locals = Vec::with_capacity(dag.n_obs());
        for v in 0..dag.n_obs() {
            locals.push(scorer.local_for_dag_node(&dag, v)?);
        }
        let total = locals.iter().sum::<f64>() + scorer.prior().log_prior(&dag);
        Ok(ScoredState { dag, locals, total })
    }

    /// Score change of `mv` without committing it. Returns the delta and the
    /// fresh local scores of the affected nodes.
    fn peek_delta(&mut self, scorer: &Scorer, mv: Move) -> Result<(f64, f64, Option<f64>)> {
        apply_move(&mut self.dag, mv);
        let (a, b) = affected_nodes(mv);
        let res = (|| {
            let la = scorer.local_for_dag_node(&self.dag, a)?;
            let lb = match b {
                Some(u) => Some(scorer.local_for_dag_node(&self.dag, u)?),
                None => None,
            };
            Ok((la, lb))
        })();
        undo_move(&mut self.dag, mv);
        let (la, lb) = res?;
        let mut delta = la - self.locals[a] + prior_delta(scorer, mv);
        if let (Some(u), Some(lu)) = (b, lb) {
            delta += lu - self.locals[u];
        }
        Ok((delta, la, lb))
    }

    fn commit(&mut self, scorer: &Scorer, mv: Move, delta: f64, la: f64, lb: Option<f64>) {
        apply_move(&mut self.dag, mv);
        let (a, b) = affected_nodes(mv);
        self.locals[a] = la;
        if let (Some(u), Some(lu)) = (b, lb) {
            self.locals[u] = lu;
        }
        self.total += delta;
        let _ = scorer;
    }
}

/// Hill climbing with restarts: per sweep, evaluates every legal move and
/// takes the best strictly improving one (earliest in canonical move order
/// among ties), stopping at a local optimum or `max_sweeps`.
///
/// The restart budget is split in two phases. The first half climbs from
/// `init` and from random sparse DAGs drawn off the seed stream, in
/// parallel. The second half runs iterated local search: each round kicks
/// the incumbent best (random edge deletions and reversals of cycling
/// strength) and re-climbs, keeping improvements. The kicks are what let
/// the searcher hop between basins that single-edge moves cannot connect.
/// Returns the best graph and score over all climbs.
pub fn map_greedy(
    scorer: &Scorer,
    init: &Dag,
    cfg: &SearchConfig,
    cons: &MoveConstraints,
) -> Result<(Dag, f64)> {
    cfg.validate()?;
    let n_random = cfg.restarts.div_ceil(2);
    let n_kick = cfg.restarts - n_random;
    let climbs: Vec<Result<(Dag, f64)>> = (0..n_random)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                init.clone()
            } else {
                random_sparse_dag(
                    init.n_obs(),
                    init.n_int(),
                    cons,
                    init,
                    &mut substream(cfg.seed, r as u64),
                )
            };
            climb(scorer, start, cfg.max_sweeps, cons)
        })
        .collect();
    let mut best: Option<(Dag, f64)> = None;
    for c in climbs {
        let (dag, score) = c?;
        if best.as_ref().map_or(true, |(_, s)| score > *s) {
            best = Some((dag, score));
        }
    }
    let (mut best, mut best_score) = best.expect("at least one restart");
    const KICKS: [(f64, f64); 3] = [(0.15, 0.10), (0.3, 0.2), (0.5, 0.25)];
    for k in 0..n_kick {
        let (del, rev) = KICKS[k % KICKS.len()];
        let mut rng = substream(cfg.seed, 0x4B49_434B + k as u64);
        let start = kick(&best, del, rev, cons, &mut rng);
        let (dag, score) = climb(scorer, start, cfg.max_sweeps, cons)?;
        if score > best_score {
            best = dag;
            best_score = score;
        }
    }
    Ok((best, best_score))
}

/// Perturbs a graph for an iterated-local-search round: observed edges are
/// deleted with probability `del` and reversed (when acyclicity and the
/// in-degree cap allow) with probability `rev`; intervention edges, when
/// searchable, are deleted with probability `del`.
fn kick(dag: &Dag, del: f64, rev: f64, cons: &MoveConstraints, rng: &mut impl Rng) -> Dag {
    let mut out = dag.clone();
    for (u, v) in dag.obs_edges() {
        let r: f64 = rng.random();
        if r < del {
            out.remove_obs_edge(u, v);
        } else if r < del + rev {
            out.remove_obs_edge(u, v);
            let cap_ok = cons
                .max_in_degree
                .map_or(true, |cap| out.in_degree(u) < cap);
            if cap_ok && !out.reaches(u, v) {
                out.set_obs_edge(v, u, true);
            } else {
                out.set_obs_edge(u, v, true);
            }
        }
    }
    if cons.allow_int_edges {
        for (j, v) in dag.int_edges() {
            if rng.random::<f64>() < del {
                out.remove_int_edge(j, v);
            }
        }
    }
    out
}

fn climb(
    scorer: &Scorer,
    start: Dag,
    max_sweeps: usize,
    cons: &MoveConstraints,
) -> Result<(Dag, f64)> {
    let mut state = ScoredState::init(scorer, start)?;
    let max_sweeps = if max_sweeps == 0 { usize::MAX } else { max_sweeps };
    for _ in 0..max_sweeps {
        let mut moves = Vec::new();
        visit_legal_moves(&state.dag, cons, |mv| {
            moves.push(mv);
            true
        })?;
        let mut best: Option<(f64, Move, f64, Option<f64>)> = None;
        for mv in moves {
            let (delta, la, lb) = state.peek_delta(scorer, mv)?;
            if delta > 0.0 && best.as_ref().map_or(true, |(d, ..)| delta > *d) {
                best = Some((delta, mv, la, lb));
            }
        }
        match best {
            Some((delta, mv, la, lb)) => {
                debug_assert!(delta > 0.0);
                state.commit(scorer, mv, delta, la, lb);
            }
            None => break,
        }
    }
    Ok((state.dag, state.total))
}

/// A sparse random DAG for greedy restarts: random vertex order, each
/// forward pair kept with probability 1/n, intervention edges (when
/// allowed) with the same probability. When intervention moves are frozen,
/// the initial graph's intervention edges are preserved.
fn random_sparse_dag(
    n_obs: usize,
    n_int: usize,
    cons: &MoveConstraints,
    init: &Dag,
    rng: &mut impl Rng,
) -> Dag {
    let mut order: Vec<usize> = (0..n_obs).collect();
    for i in (1..n_obs).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let p = 1.0 / n_obs as f64;
    let mut dag = Dag::new(n_obs, n_int).expect("validated dimensions");
    for i in 0..n_obs {
        for j in i + 1..n_obs {
            if rng.random::<f64>() < p {
                let (u, v) = (order[i], order[j]);
                if cons.max_in_degree.map_or(true, |cap| dag.in_degree(v) < cap) {
                    dag.set_obs_edge(u, v, true);
                }
            }
        }
    }
    if cons.allow_int_edges {
        for j in 0..n_int {
            for v in 0..n_obs {
                if rng.random::<f64>() < p {
                    dag.set_int_edge(j, v, true);
                }
            }
        }
    } else {
        for (j, v) in init.int_edges() {
            dag.set_int_edge(j, v, true);
        }
    }
    dag
}

/// Metropolis–Hastings structure MCMC. A move is drawn uniformly from the
/// legal neighborhood; acceptance probability is
/// `min(1, exp(Δscore) · |nbhd(current)| / |nbhd(proposed)|)`. Every
/// `thin`-th post-burnin state is recorded. Chains run concurrently on
/// distinct seed substreams; an incremental-score spot check against full
/// rescoring runs every 10^4 iterations.
pub fn structure_mcmc(
    scorer: &Scorer,
    init: &Dag,
    cfg: &McmcConfig,
    cons: &MoveConstraints,
) -> Result<DagSampleSet> {
    cfg.validate()?;
    let chains: Vec<Result<Vec<DagSample>>> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| run_chain(scorer, init, cfg, cons, chain))
        .collect();
    let mut samples = Vec::new();
    for c in chains {
        samples.extend(c?);
    }
    Ok(DagSampleSet {
        n_obs: init.n_obs(),
        n_int: init.n_int(),
        samples,
    })
}

const SPOT_CHECK_EVERY: usize = 10_000;

fn run_chain(
    scorer: &Scorer,
    init: &Dag,
    cfg: &McmcConfig,
    cons: &MoveConstraints,
    chain: usize,
) -> Result<Vec<DagSample>> {
    let mut rng = substream(cfg.seed, chain as u64);
    let mut state = ScoredState::init(scorer, init.clone())?;
    let mut samples = Vec::new();
    for iter in 0..cfg.iterations {
        let nbhd_cur = neighborhood_size(&state.dag, cons)?;
        if nbhd_cur > 0 {
            let k = rng.random_range(0..nbhd_cur);
            let mv = kth_legal_move(&state.dag, cons, k)?;
            let (delta, la, lb) = state.peek_delta(scorer, mv)?;
            apply_move(&mut state.dag, mv);
            let nbhd_prop = neighborhood_size(&state.dag, cons)?;
            undo_move(&mut state.dag, mv);
            let log_ratio = delta + (nbhd_cur as f64).ln() - (nbhd_prop as f64).ln();
            let u: f64 = rng.random();
            if u.ln() < log_ratio {
                state.commit(scorer, mv, delta, la, lb);
            }
        }
        if (iter + 1) % SPOT_CHECK_EVERY == 0 {
            let fresh = scorer.total(&state.dag)?;
            if (fresh - state.total).abs() > 1e-9 {
                return Err(Error::ScoreDrift {
                    incremental: state.total,
                    recomputed: fresh,
                });
            }
            state.total = fresh;
        }
        if iter >= cfg.burnin && (iter - cfg.burnin) % cfg.thin == 0 {
            samples.push(DagSample {
                dag: state.dag.clone(),
                log_score: state.total,
                chain,
            });
        }
    }
    Ok(samples)
}

/// Per-edge inclusion frequencies over the sample set.
pub fn edge_posterior(set: &DagSampleSet) -> Result<EdgePosterior> {
    if set.samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = set.n_obs;
    let m = set.n_int;
    let mut freq = vec![0.0; (n + m) * n];
    for s in &set.samples {
        for (u, v) in s.dag.obs_edges() {
            freq[u * n + v] += 1.0;
        }
        for (j, v) in s.dag.int_edges() {
            freq[(n + j) * n + v] += 1.0;
        }
    }
    let count = set.samples.len() as f64;
    for f in freq.iter_mut() {
        *f /= count;
    }
    Ok(EdgePosterior {
        n_obs: n,
        n_int: m,
        freq,
    })
}

/// Keeps edges whose posterior frequency strictly exceeds `threshold`
/// (default 0.5 upstream). The result may be cyclic and is reported as an
/// edge set.
pub fn consensus_graph(posterior: &EdgePosterior, threshold: f64) -> ConsensusGraph {
    assert!(
        threshold > 0.0 && threshold < 1.0,
        "threshold must lie in (0,1)"
    );
    let mut obs_edges = Vec::new();
    let mut int_edges = Vec::new();
    for u in 0..posterior.n_obs {
        for v in 0..posterior.n_obs {
            if u != v && posterior.obs_freq(u, v) > threshold {
                obs_edges.push((u, v));
            }
        }
    }
    for j in 0..posterior.n_int {
        for v in 0..posterior.n_obs {
            if posterior.int_freq(j, v) > threshold {
                int_edges.push((j, v));
            }
        }
    }
    ConsensusGraph {
        n_obs: posterior.n_obs,
        n_int: posterior.n_int,
        obs_edges,
        int_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bge::BgeHyperparams;
    use crate::data::{InterventionDesign, ObservedDataset};
    use crate::score::{GraphPrior, ScoreMode};
    use rand_distr::{Distribution, Normal};

    fn obs_dataset(n_rows: usize, n_cols: usize, seed: u64) -> ObservedDataset {
        let mut rng = substream(seed, 0);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..n_rows * n_cols).map(|_| norm.sample(&mut rng)).collect();
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        ObservedDataset::new(values, n_rows, names).unwrap()
    }

    #[test]
    fn empty_three_node_graph_has_six_moves() {
        let dag = Dag::new(3, 0).unwrap();
        let cons = MoveConstraints::obs_only();
        assert_eq!(neighborhood_size(&dag, &cons).unwrap(), 6);
    }

    #[test]
    fn neighborhood_respects_acyclicity_and_cap() {
        // 0→1→2: adds 0→2 (1 legal since 2→0 and 1→0 and 2→1 close cycles),
        // deletes 2, reversals: 0→1 not reversible? removing it leaves no
        // other 0⇝1 path, so it is; same for 1→2.
        let dag = Dag::from_edges(3, 0, &[(0, 1), (1, 2)], &[]).unwrap();
        let cons = MoveConstraints::obs_only();
        let mut moves = Vec::new();
        visit_legal_moves(&dag, &cons, |m| {
            moves.push(m);
            true
        })
        .unwrap();
        assert!(moves.contains(&Move::AddObs(0, 2)));
        assert!(!moves.contains(&Move::AddObs(2, 0)));
        assert!(moves.contains(&Move::RevObs(0, 1)));
        assert!(moves.contains(&Move::RevObs(1, 2)));
        assert_eq!(moves.len(), 1 + 2 + 2);

        let capped = MoveConstraints {
            allow_int_edges: false,
            max_in_degree: Some(1),
        };
        let mut capped_moves = Vec::new();
        visit_legal_moves(&dag, &capped, |m| {
            capped_moves.push(m);
            true
        })
        .unwrap();
        // 2 already has one parent: no AddObs(0,2).
        assert!(!capped_moves.contains(&Move::AddObs(0, 2)));
    }

    #[test]
    fn reversal_blocked_by_alternate_path() {
        // 0→1, 0→2, 2→1: reversing 0→1 leaves path 0→2→1, illegal.
        let dag = Dag::from_edges(3, 0, &[(0, 1), (0, 2), (2, 1)], &[]).unwrap();
        let mut moves = Vec::new();
        visit_legal_moves(&dag, &MoveConstraints::obs_only(), |m| {
            moves.push(m);
            true
        })
        .unwrap();
        assert!(!moves.contains(&Move::RevObs(0, 1)));
        assert!(moves.contains(&Move::RevObs(2, 1)));
    }

    fn two_node_scorer_fixture(
        seed: u64,
    ) -> (ObservedDataset, InterventionDesign, BgeHyperparams) {
        let (data, design) = crate::score::tests::two_node_soft_dataset(seed, 600);
        let hp = BgeHyperparams::default_for(2, 0.5).unwrap();
        (data, design, hp)
    }

    #[test]
    fn map_recovers_two_node_truth_against_enumeration() {
        let (data, design, hp) = two_node_scorer_fixture(3);
        let scorer =
            Scorer::new(&data, &design, hp, GraphPrior::uniform(), ScoreMode::Soft).unwrap();
        let cons = MoveConstraints::with_int_edges();
        // Exhaustive oracle over all 2-node graphs with intervention edges.
        let mut best_score = f64::NEG_INFINITY;
        let mut best = None;
        for obs in [&[][..], &[(0, 1)][..], &[(1, 0)][..]] {
            for ints in [
                &[][..],
                &[(0usize, 0usize)][..],
                &[(0, 1)][..],
                &[(0, 0), (0, 1)][..],
            ] {
                let dag = Dag::from_edges(2, 1, obs, ints).unwrap();
                let s = scorer.total(&dag).unwrap();
                if s > best_score {
                    best_score = s;
                    best = Some(dag);
                }
            }
        }
        let init = Dag::new(2, 1).unwrap();
        let cfg = SearchConfig {
            restarts: 4,
            max_sweeps: 50,
            seed: 11,
        };
        let (found, score) = map_greedy(&scorer, &init, &cfg, &cons).unwrap();
        assert_eq!(found, best.unwrap());
        assert!((score - best_score).abs() < 1e-9);
        // The truth is X→Y with the intervention edge into Y.
        assert!(found.has_obs_edge(0, 1));
        assert!(found.has_int_edge(0, 1));
    }

    #[test]
    fn heavy_penalty_returns_empty_graph_on_noise() {
        let data = obs_dataset(200, 4, 21);
        let design = InterventionDesign::observational(200);
        let hp = BgeHyperparams::default_for(4, 0.5).unwrap();
        let scorer =
            Scorer::new(&data, &design, hp, GraphPrior::new(200.0).unwrap(), ScoreMode::Soft)
                .unwrap();
        let init = Dag::new(4, 0).unwrap();
        let cfg = SearchConfig {
            restarts: 3,
            max_sweeps: 30,
            seed: 5,
        };
        let (found, _) = map_greedy(&scorer, &init, &cfg, &MoveConstraints::obs_only()).unwrap();
        assert_eq!(found.obs_edge_count(), 0);
    }

    #[test]
    fn map_result_is_a_local_optimum() {
        let data = obs_dataset(120, 4, 22);
        let design = InterventionDesign::observational(120);
        let hp = BgeHyperparams::default_for(4, 0.5).unwrap();
        let scorer =
            Scorer::new(&data, &design, hp, GraphPrior::uniform(), ScoreMode::Soft).unwrap();
        let cfg = SearchConfig {
            restarts: 2,
            max_sweeps: 100,
            seed: 9,
        };
        let cons = MoveConstraints::obs_only();
        let (found, score) = map_greedy(&scorer, &Dag::new(4, 0).unwrap(), &cfg, &cons).unwrap();
        let mut moves = Vec::new();
        visit_legal_moves(&found, &cons, |m| {
            moves.push(m);
            true
        })
        .unwrap();
        let mut state = ScoredState::init(&scorer, found.clone()).unwrap();
        assert!((state.total - score).abs() < 1e-9);
        for mv in moves {
            let (delta, ..) = state.peek_delta(&scorer, mv).unwrap();
            assert!(delta <= 0.0, "move {mv:?} improves score by {delta}");
        }
    }

    #[test]
    fn mcmc_is_deterministic_given_seed() {
        let (data, design, hp) = two_node_scorer_fixture(8);
        let scorer =
            Scorer::new(&data, &design, hp, GraphPrior::uniform(), ScoreMode::Soft).unwrap();
        let cfg = McmcConfig {
            iterations: 3000,
            burnin: 500,
            thin: 10,
            chains: 2,
            seed: 77,
        };
        let init = Dag::new(2, 1).unwrap();
        let cons = MoveConstraints::with_int_edges();
        let a = structure_mcmc(&scorer, &init, &cfg, &cons).unwrap();
        let b = structure_mcmc(&scorer, &init, &cfg, &cons).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        assert_eq!(a.samples.len(), 2 * 250);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.dag, y.dag);
            assert_eq!(x.log_score.to_bits(), y.log_score.to_bits());
            assert_eq!(x.chain, y.chain);
        }
    }

    #[test]
    fn mcmc_sample_scores_match_recomputation() {
        let (data, design, hp) = two_node_scorer_fixture(12);
        let scorer =
            Scorer::new(&data, &design, hp, GraphPrior::new(0.3).unwrap(), ScoreMode::Soft)
                .unwrap();
        let cfg = McmcConfig {
            iterations: 4000,
            burnin: 1000,
            thin: 100,
            chains: 1,
            seed: 3,
        };
        let set = structure_mcmc(
            &scorer,
            &Dag::new(2, 1).unwrap(),
            &cfg,
            &MoveConstraints::with_int_edges(),
        )
        .unwrap();
        for s in &set.samples {
            let fresh = scorer.total(&s.dag).unwrap();
            assert!((fresh - s.log_score).abs() < 1e-9);
            s.dag.topological_sort().unwrap();
        }
    }

    #[test]
    fn edge_posterior_counts_fractions() {
        let d1 = Dag::from_edges(2, 1, &[(0, 1)], &[(0, 1)]).unwrap();
        let d2 = Dag::from_edges(2, 1, &[(0, 1)], &[]).unwrap();
        let set = DagSampleSet {
            n_obs: 2,
            n_int: 1,
            samples: vec![
                DagSample { dag: d1.clone(), log_score: 0.0, chain: 0 },
                DagSample { dag: d1.clone(), log_score: 0.0, chain: 0 },
                DagSample { dag: d1, log_score: 0.0, chain: 0 },
                DagSample { dag: d2, log_score: 0.0, chain: 0 },
            ],
        };
        let ep = edge_posterior(&set).unwrap();
        assert_eq!(ep.obs_freq(0, 1), 1.0);
        assert_eq!(ep.obs_freq(1, 0), 0.0);
        assert_eq!(ep.int_freq(0, 1), 0.75);
        let consensus = consensus_graph(&ep, 0.5);
        assert_eq!(consensus.obs_edges, vec![(0, 1)]);
        assert_eq!(consensus.int_edges, vec![(0, 1)]);
        let strict = consensus_graph(&ep, 0.8);
        assert_eq!(strict.int_edges, Vec::<(usize, usize)>::new());
    }

    #[test]
    fn edge_posterior_rejects_empty_sets() {
        let set = DagSampleSet {
            n_obs: 2,
            n_int: 0,
            samples: Vec::new(),
        };
        assert!(matches!(edge_posterior(&set), Err(Error::EmptySamples)));
    }
}
