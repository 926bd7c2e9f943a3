//! Directed acyclic graphs over observed vertices plus parentless
//! intervention vertices.

use crate::error::{Error, Result};

/// Hard cap on vertices per class, so adjacency fits in `u128` bitsets.
pub const MAX_VERTICES: usize = 128;

/// A DAG over `n_obs` observed vertices and `n_int` intervention vertices.
///
/// Observed-observed edges form the causal structure proper; intervention
/// vertices are fixed by the experimental setting, have no parents, and may
/// only point into observed vertices. Adjacency is kept as `u128` bitsets in
/// both directions so neighborhood enumeration and reachability stay cheap
/// inside search loops.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    n_obs: usize,
    n_int: usize,
    /// children[u] = bitset of observed v with edge u→v.
    children: Vec<u128>,
    /// parents[v] = bitset of observed u with edge u→v.
    parents: Vec<u128>,
    /// int_children[j] = bitset of observed v with edge I_j→v.
    int_children: Vec<u128>,
    /// int_parents[v] = bitset of interventions j with edge I_j→v.
    int_parents: Vec<u128>,
}

impl Dag {
    /// An empty graph.
    pub fn new(n_obs: usize, n_int: usize) -> Result<Self> {
        if n_obs == 0 {
            return Err(Error::InvalidArgument("need at least one observed vertex".into()));
        }
        if n_obs > MAX_VERTICES || n_int > MAX_VERTICES {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_VERTICES} vertices per class are supported (got n_obs={n_obs}, n_int={n_int})"
            )));
        }
        Ok(Dag {
            n_obs,
            n_int,
            children: vec![0; n_obs],
            parents: vec![0; n_obs],
            int_children: vec![0; n_int],
            int_parents: vec![0; n_obs],
        })
    }

    /// Builds a DAG from explicit edge lists, rejecting cycles.
    pub fn from_edges(
        n_obs: usize,
        n_int: usize,
        obs_edges: &[(usize, usize)],
        int_edges: &[(usize, usize)],
    ) -> Result<Self> {
        let mut dag = Dag::new(n_obs, n_int)?;
        for &(u, v) in obs_edges {
            dag.check_obs_pair(u, v)?;
            dag.set_obs_edge(u, v, true);
        }
        for &(j, v) in int_edges {
            dag.check_int_pair(j, v)?;
            dag.set_int_edge(j, v, true);
        }
        dag.topological_sort()?;
        Ok(dag)
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_int(&self) -> usize {
        self.n_int
    }

    fn check_obs_pair(&self, u: usize, v: usize) -> Result<()> {
        if u >= self.n_obs || v >= self.n_obs {
            return Err(Error::InvalidArgument(format!(
                "observed edge ({u},{v}) out of range for n_obs={}",
                self.n_obs
            )));
        }
        if u == v {
            return Err(Error::InvalidArgument(format!("self-loop on vertex {u}")));
        }
        Ok(())
    }

    fn check_int_pair(&self, j: usize, v: usize) -> Result<()> {
        if j >= self.n_int || v >= self.n_obs {
            return Err(Error::InvalidArgument(format!(
                "intervention edge ({j},{v}) out of range for n_int={}, n_obs={}",
                self.n_int, self.n_obs
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn has_obs_edge(&self, u: usize, v: usize) -> bool {
        self.children[u] >> v & 1 == 1
    }

    #[inline]
    pub fn has_int_edge(&self, j: usize, v: usize) -> bool {
        self.int_children[j] >> v & 1 == 1
    }

    /// Sets or clears an observed edge without acyclicity checks. Callers
    /// that mutate graphs mid-search maintain acyclicity themselves.
    pub(crate) fn set_obs_edge(&mut self, u: usize, v: usize, present: bool) {
        if present {
            self.children[u] |= 1 << v;
            self.parents[v] |= 1 << u;
        } else {
            self.children[u] &= !(1 << v);
            self.parents[v] &= !(1 << u);
        }
    }

    pub(crate) fn set_int_edge(&mut self, j: usize, v: usize, present: bool) {
        if present {
            self.int_children[j] |= 1 << v;
            self.int_parents[v] |= 1 << j;
        } else {
            self.int_children[j] &= !(1 << v);
            self.int_parents[v] &= !(1 << j);
        }
    }

    /// Adds an observed edge, rejecting it if it would create a cycle.
    pub fn add_obs_edge(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_obs_pair(u, v)?;
        if self.has_obs_edge(u, v) {
            return Ok(());
        }
        if u == v || self.reaches(v, u) {
            return Err(Error::Cycle(vec![u, v]));
        }
        self.set_obs_edge(u, v, true);
        Ok(())
    }

    pub fn remove_obs_edge(&mut self, u: usize, v: usize) {
        self.set_obs_edge(u, v, false);
    }

    pub fn add_int_edge(&mut self, j: usize, v: usize) -> Result<()> {
        self.check_int_pair(j, v)?;
        self.set_int_edge(j, v, true);
        Ok(())
    }

    pub fn remove_int_edge(&mut self, j: usize, v: usize) {
        self.set_int_edge(j, v, false);
    }

    #[inline]
    pub fn parent_mask(&self, v: usize) -> u128 {
        self.parents[v]
    }

    #[inline]
    pub fn child_mask(&self, u: usize) -> u128 {
        self.children[u]
    }

    #[inline]
    pub fn int_parent_mask(&self, v: usize) -> u128 {
        self.int_parents[v]
    }

    pub fn obs_parents(&self, v: usize) -> Vec<usize> {
        bits(self.parents[v])
    }

    pub fn obs_children(&self, u: usize) -> Vec<usize> {
        bits(self.children[u])
    }

    /// Intervention indices with an edge into observed vertex `v`.
    pub fn int_parents_of(&self, v: usize) -> Vec<usize> {
        bits(self.int_parents[v])
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.parents[v].count_ones() as usize
    }

    pub fn obs_edge_count(&self) -> usize {
        self.children.iter().map(|c| c.count_ones() as usize).sum()
    }

    pub fn int_edge_count(&self) -> usize {
        self.int_children
            .iter()
            .map(|c| c.count_ones() as usize)
            .sum()
    }

    pub fn obs_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.obs_edge_count());
        for u in 0..self.n_obs {
            for v in bits(self.children[u]) {
                out.push((u, v));
            }
        }
        out
    }

    pub fn int_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.int_edge_count());
        for j in 0..self.n_int {
            for v in bits(self.int_children[j]) {
                out.push((j, v));
            }
        }
        out
    }

    /// True when a directed path of length ≥ 1 runs from `from` to `to`
    /// through observed vertices.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        let mut frontier = self.children[from];
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
                next |= self.children[v];
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen >> to & 1 == 1
    }

    /// Descendant bitsets (vertices reachable by paths of length ≥ 1) for
    /// every observed vertex, computed along a reverse topological order.
    pub fn descendant_masks(&self) -> Result<Vec<u128>> {
        let order = self.topological_sort()?;
        let mut desc = vec![0u128; self.n_obs];
        for &v in order.iter().rev() {
            let mut d = self.children[v];
            for c in bits(self.children[v]) {
                d |= desc[c];
            }
            desc[v] = d;
        }
        Ok(desc)
    }

    /// Topological order of the observed vertices, lowest index first among
    /// ties. Reports the set of vertices stuck on a cycle otherwise.
    pub fn topological_sort(&self) -> Result<Vec<usize>> {
        let n = self.n_obs;
        let mut in_deg: Vec<usize> = (0..n).map(|v| self.in_degree(v)).collect();
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let mut pick = None;
            for v in 0..n {
                if !placed[v] && in_deg[v] == 0 {
                    pick = Some(v);
                    break;
                }
            }
            match pick {
                Some(v) => {
                    placed[v] = true;
                    order.push(v);
                    for c in bits(self.children[v]) {
                        in_deg[c] -= 1;
                    }
                }
                None => {
                    let stuck: Vec<usize> = (0..n).filter(|&v| !placed[v]).collect();
                    return Err(Error::Cycle(stuck));
                }
            }
        }
        Ok(order)
    }

    /// The observed subgraph with intervention vertices dropped.
    pub fn observed_subgraph(&self) -> Dag {
        Dag {
            n_obs: self.n_obs,
            n_int: 0,
            children: self.children.clone(),
            parents: self.parents.clone(),
            int_children: Vec::new(),
            int_parents: vec![0; self.n_obs],
        }
    }
}

/// Indices of set bits, ascending.
pub(crate) fn bits(mut mask: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

/// Enumerates every DAG on `n_obs` observed vertices (no intervention
/// vertices). Feasible for n_obs ≤ 5; used for exact posterior checks and
/// equivalence-class enumeration.
pub fn enumerate_dags(n_obs: usize) -> Result<Vec<Dag>> {
    if n_obs == 0 || n_obs > 5 {
        return Err(Error::InvalidArgument(
            "exhaustive DAG enumeration supports 1..=5 vertices".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..n_obs)
        .flat_map(|u| (u + 1..n_obs).map(move |v| (u, v)))
        .collect();
    let mut out = Vec::new();
    // Each unordered pair is absent, forward, or backward.
    let mut states = vec![0u8; pairs.len()];
    loop {
        let mut dag = Dag::new(n_obs, 0)?;
        for (k, &(u, v)) in pairs.iter().enumerate() {
            match states[k] {
                1 => dag.set_obs_edge(u, v, true),
                2 => dag.set_obs_edge(v, u, true),
                _ => {}
            }
        }
        if dag.topological_sort().is_ok() {
            out.push(dag);
        }
        // Odometer increment over base-3 states.
        let mut k = 0;
        loop {
            if k == states.len() {
                return Ok(out);
            }
            states[k] += 1;
            if states[k] < 3 {
                break;
            }
            states[k] = 0;
            k += 1;
        }
    }
}
