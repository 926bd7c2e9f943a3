//! Synthetic ground-truth generation: random DAGs, non-overlapping soft or
//! perfect interventions, and linear-Gaussian SEM data in block or
//! fraction-based condition layouts.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{standardize, InterventionDesign, ObservedDataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::rng::{mix, substream};

/// Intervention regime of a ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Targets keep their parents; means shift and parent weights damp.
    Soft,
    /// Targets are severed from their parents and drawn as N(shift, 1).
    Perfect,
}

/// One intervention: its disjoint target set with per-target mean shifts and
/// damping factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub label: String,
    pub targets: Vec<usize>,
    /// Parallel to `targets`.
    pub shifts: Vec<f64>,
    /// Parallel to `targets`; multiplies incoming edge weights when active.
    pub dampings: Vec<f64>,
}

/// Complete data-generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Observed-only DAG (no intervention vertices).
    pub dag: Dag,
    /// Edge weights, sorted by (from, to).
    pub weights: Vec<(usize, usize, f64)>,
    pub interventions: Vec<InterventionSpec>,
    pub regime: Regime,
}

impl GroundTruth {
    /// Validates weight ranges, damping ranges and target disjointness.
    pub fn validate(&self) -> Result<()> {
        for &(u, v, w) in &self.weights {
            if !self.dag.has_obs_edge(u, v) {
                return Err(Error::InvalidArgument(format!(
                    "weight listed for missing edge ({u},{v})"
                )));
            }
            if !(0.25..=1.0).contains(&w) {
                return Err(Error::InvalidArgument(format!(
                    "edge weight {w} outside [0.25, 1]"
                )));
            }
        }
        if self.weights.len() != self.dag.obs_edge_count() {
            return Err(Error::InvalidArgument(
                "every edge needs exactly one weight".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for spec in &self.interventions {
            if spec.targets.len() != spec.shifts.len()
                || spec.targets.len() != spec.dampings.len()
            {
                return Err(Error::Dimension(
                    "intervention target/shift/damping lengths differ".into(),
                ));
            }
            for (&t, &d) in spec.targets.iter().zip(&spec.dampings) {
                if t >= self.dag.n_obs() {
                    return Err(Error::InvalidArgument(format!("target {t} out of range")));
                }
                if !seen.insert(t) {
                    return Err(Error::InvalidArgument(format!(
                        "target {t} appears in two interventions"
                    )));
                }
                if !(0.1..=1.0).contains(&d) {
                    return Err(Error::InvalidArgument(format!(
                        "damping {d} outside [0.1, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Known target sets in the design-file shape.
    pub fn target_map(&self) -> BTreeMap<usize, Vec<usize>> {
        self.interventions
            .iter()
            .enumerate()
            .map(|(j, s)| (j, s.targets.clone()))
            .collect()
    }

    /// Samples a complete ground truth: DAG, weights and interventions from
    /// independent substreams of `seed`.
    pub fn sample(
        n: usize,
        m: usize,
        expected_parents: f64,
        regime: Regime,
        seed: u64,
    ) -> Result<Self> {
        let dag = random_dag(n, expected_parents, mix(seed, 1))?;
        let mut rng = substream(mix(seed, 2), 0);
        let mut weights = Vec::with_capacity(dag.obs_edge_count());
        for (u, v) in dag.obs_edges() {
            weights.push((u, v, 0.25 + 0.75 * rng.random::<f64>()));
        }
        let interventions = match regime {
            Regime::Soft => sample_interventions(n, m, mix(seed, 3))?,
            Regime::Perfect => sample_single_target_interventions(n, m, mix(seed, 3))?,
        };
        let truth = GroundTruth {
            dag,
            weights,
            interventions,
            regime,
        };
        truth.validate()?;
        Ok(truth)
    }

    fn weight_lookup(&self) -> BTreeMap<(usize, usize), f64> {
        self.weights.iter().map(|&(u, v, w)| ((u, v), w)).collect()
    }

    /// Which intervention targets node `v`, if any, with its shift/damping.
    fn targeting(&self, v: usize) -> Option<(usize, f64, f64)> {
        for (j, spec) in self.interventions.iter().enumerate() {
            if let Some(k) = spec.targets.iter().position(|&t| t == v) {
                return Some((j, spec.shifts[k], spec.dampings[k]));
            }
        }
        None
    }
}

/// Random DAG with a fixed random vertex order: each forward pair is kept
/// independently with probability `p = 2·expected_parents/(n−1)`, giving an
/// expected total of `expected_parents·n` edges.
pub fn random_dag(n: usize, expected_parents: f64, seed: u64) -> Result<Dag> {
    if n < 2 {
        return Err(Error::InvalidArgument("random DAG needs n >= 2".into()));
    }
    if !(expected_parents > 0.0) || expected_parents >= (n as f64 - 1.0) / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "expected_parents must lie in (0, (n-1)/2), got {expected_parents}"
        )));
    }
    let mut rng = substream(seed, 0);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let p = 2.0 * expected_parents / (n as f64 - 1.0);
    let mut dag = Dag::new(n, 0)?;
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                dag.set_obs_edge(order[i], order[j], true);
            }
        }
    }
    Ok(dag)
}

const MAX_TARGET_REDRAWS: usize = 1000;

/// Draws `m` non-overlapping interventions: target counts are 1 + Poisson(1),
/// targets come uniformly from the not-yet-targeted nodes, mean shifts are
/// standard normal and dampings uniform on [0.1, 1].
pub fn sample_interventions(n: usize, m: usize, seed: u64) -> Result<Vec<InterventionSpec>> {
    let mut rng = substream(seed, 0);
    if m == 0 {
        return Ok(Vec::new());
    }
    let poisson = Poisson::new(1.0).expect("valid rate");
    let counts: Vec<usize> = {
        let mut attempt = 0;
        loop {
            let counts: Vec<usize> = (0..m)
                .map(|_| 1 + poisson.sample(&mut rng) as usize)
                .collect();
            if counts.iter().sum::<usize>() <= n {
                break counts;
            }
            attempt += 1;
            if attempt >= MAX_TARGET_REDRAWS {
                return Err(Error::InvalidArgument(format!(
                    "could not fit target counts for m={m} interventions into n={n} nodes"
                )));
            }
        }
    };
    let norm = Normal::new(0.0, 1.0).expect("valid normal");
    let mut pool: Vec<usize> = (0..n).collect();
    let mut specs = Vec::with_capacity(m);
    for (j, &k) in counts.iter().enumerate() {
        let mut targets = Vec::with_capacity(k);
        for _ in 0..k {
            let idx = rng.random_range(0..pool.len());
            targets.push(pool.swap_remove(idx));
        }
        targets.sort_unstable();
        let shifts: Vec<f64> = (0..k).map(|_| norm.sample(&mut rng)).collect();
        let dampings: Vec<f64> = (0..k).map(|_| 0.1 + 0.9 * rng.random::<f64>()).collect();
        specs.push(InterventionSpec {
            label: format!("I{j}"),
            targets,
            shifts,
            dampings,
        });
    }
    Ok(specs)
}

/// Draws `m` perfect-style interventions with one distinct target node each;
/// set points are N(shift, 1) with standard-normal shifts.
pub fn sample_single_target_interventions(
    n: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<InterventionSpec>> {
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {m} distinct targets among {n} nodes"
        )));
    }
    let mut rng = substream(seed, 0);
    let norm = Normal::new(0.0, 1.0).expect("valid normal");
    let mut pool: Vec<usize> = (0..n).collect();
    let mut specs = Vec::with_capacity(m);
    for j in 0..m {
        let idx = rng.random_range(0..pool.len());
        let target = pool.swap_remove(idx);
        specs.push(InterventionSpec {
            label: format!("I{j}"),
            targets: vec![target],
            shifts: vec![norm.sample(&mut rng)],
            dampings: vec![1.0],
        });
    }
    Ok(specs)
}

/// How interventional rows are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionLayout {
    /// A block of rows per intervention, then purely observational rows.
    Blocks {
        rows_per_intervention: usize,
        observational_rows: usize,
    },
    /// A fraction rho of rows is interventional; each such row draws one
    /// intervention uniformly at random.
    Fraction { total_rows: usize, rho: f64 },
}

/// Generates SEM data under `truth` with rows laid out as
/// `rows_per_intervention` per intervention followed by observational rows.
pub fn generate_data(
    truth: &GroundTruth,
    n_obs_rows: usize,
    rows_per_intervention: usize,
    seed: u64,
    standardize_flag: bool,
) -> Result<(ObservedDataset, InterventionDesign)> {
    generate_with_layout(
        truth,
        ConditionLayout::Blocks {
            rows_per_intervention,
            observational_rows: n_obs_rows,
        },
        seed,
        standardize_flag,
    )
}

/// Generates SEM data with an explicit condition layout.
pub fn generate_with_layout(
    truth: &GroundTruth,
    layout: ConditionLayout,
    seed: u64,
    standardize_flag: bool,
) -> Result<(ObservedDataset, InterventionDesign)> {
    truth.validate()?;
    let n = truth.dag.n_obs();
    let m = truth.interventions.len();
    let mut rng = substream(seed, 0);

    // Active intervention per row (at most one under both layouts).
    let active: Vec<Option<usize>> = match layout {
        ConditionLayout::Blocks {
            rows_per_intervention,
            observational_rows,
        } => {
            let mut a = Vec::with_capacity(m * rows_per_intervention + observational_rows);
            for j in 0..m {
                a.extend(std::iter::repeat(Some(j)).take(rows_per_intervention));
            }
            a.extend(std::iter::repeat(None).take(observational_rows));
            a
        }
        ConditionLayout::Fraction { total_rows, rho } => {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::InvalidArgument(format!(
                    "rho must lie in [0, 1], got {rho}"
                )));
            }
            let n_int_rows = (rho * total_rows as f64).round() as usize;
            if n_int_rows > 0 && m == 0 {
                return Err(Error::InvalidArgument(
                    "fraction layout with rho > 0 needs at least one intervention".into(),
                ));
            }
            (0..total_rows)
                .map(|r| {
                    if r < n_int_rows {
                        Some(rng.random_range(0..m))
                    } else {
                        None
                    }
                })
                .collect()
        }
    };

    let n_rows = active.len();
    let order = truth.dag.topological_sort()?;
    let weight = truth.weight_lookup();
    let norm = Normal::new(0.0, 1.0).expect("valid normal");

    let mut values = vec![0.0; n_rows * n];
    let mut states = vec![0u8; n_rows * m];
    for (r, &act) in active.iter().enumerate() {
        if let Some(j) = act {
            states[r * m + j] = 1;
        }
        for &v in &order {
            let noise: f64 = norm.sample(&mut rng);
            let hit = truth
                .targeting(v)
                .filter(|&(j, _, _)| act == Some(j))
                .map(|(_, shift, damp)| (shift, damp));
            let x = match (truth.regime, hit) {
                (Regime::Perfect, Some((shift, _))) => shift + noise,
                (_, hit) => {
                    let (shift, damp) = hit.unwrap_or((0.0, 1.0));
                    let mut acc = shift + noise;
                    for u in truth.dag.obs_parents(v) {
                        acc += damp * weight[&(u, v)] * values[r * n + u];
                    }
                    acc
                }
            };
            values[r * n + v] = x;
        }
    }

    let names = (0..n).map(|j| format!("x{j}")).collect();
    let mut data = ObservedDataset::new(values, n_rows, names)?;
    if standardize_flag {
        data = standardize(&data)?.data;
    }
    let labels = truth
        .interventions
        .iter()
        .map(|s| s.label.clone())
        .collect();
    let design = InterventionDesign::new(labels, states, n_rows, Some(truth.target_map()))?;
    Ok((data, design))
}

/// Scale of a benchmark run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchScale {
    /// n = 100, m = 10, N = 400 with N_I in {5, 10, 20} plus the ×10 variant.
    Full,
    /// n = 20, m = 5, N = 400, N_I = 20.
    Desk,
}

/// One (N, N_I) cell of the soft-intervention benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftSetting {
    pub total_rows: usize,
    pub rows_per_intervention: usize,
}

impl SoftSetting {
    pub fn observational_rows(&self, m: usize) -> usize {
        self.total_rows - m * self.rows_per_intervention
    }
}

/// Benchmark parameterization for a scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub scale: BenchScale,
    pub n: usize,
    pub m: usize,
    pub expected_parents: f64,
    pub soft_settings: Vec<SoftSetting>,
    /// Interventional fractions for the perfect-intervention variant.
    pub perfect_rho: Vec<f64>,
    pub perfect_total_rows: usize,
}

/// The standard benchmark configurations.
pub fn paper_benchmark_config(scale: BenchScale) -> BenchmarkConfig {
    match scale {
        BenchScale::Full => BenchmarkConfig {
            scale,
            n: 100,
            m: 10,
            expected_parents: 2.0,
            soft_settings: vec![
                SoftSetting { total_rows: 400, rows_per_intervention: 5 },
                SoftSetting { total_rows: 400, rows_per_intervention: 10 },
                SoftSetting { total_rows: 400, rows_per_intervention: 20 },
                SoftSetting { total_rows: 4000, rows_per_intervention: 50 },
                SoftSetting { total_rows: 4000, rows_per_intervention: 100 },
                SoftSetting { total_rows: 4000, rows_per_intervention: 200 },
            ],
            perfect_rho: vec![0.0, 0.01, 0.03, 0.1, 0.3, 1.0],
            perfect_total_rows: 400,
        },
        BenchScale::Desk => BenchmarkConfig {
            scale,
            n: 20,
            m: 5,
            expected_parents: 2.0,
            soft_settings: vec![SoftSetting { total_rows: 400, rows_per_intervention: 20 }],
            perfect_rho: vec![0.0, 0.01, 0.03, 0.1, 0.3, 1.0],
            perfect_total_rows: 400,
        },
    }
}
