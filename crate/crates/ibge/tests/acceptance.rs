//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantity. Run with `cargo test --test acceptance`.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use ibge::cli::{
    benchmark_datasets, run_learner, BenchmarkSpec, LearnerKind, McmcConfigSpec, RegimeArg,
    SearchConfigSpec,
};
use ibge::evaluate::{class_signature, evaluate_output, SweepDataset};
use ibge::rng::{mix, substream};
use ibge::score::Scorer;
use ibge::simulate::{generate_with_layout, ConditionLayout, InterventionSpec};
use ibge::{
    bge_local, compare, enumerate_dags, interventional_eg, posterior_effects, structure_mcmc,
    total_effects, BenchScale, BgeHyperparams, Dag, GraphPrior, GroundTruth, InterventionDesign,
    McmcConfig, MoveConstraints, ObservedDataset, Pdag, Regime, ScoreMode, TwoCycleRule,
    WeightMatrix,
};

fn pass(criterion: usize, detail: &str) {
    println!("[acceptance {criterion}] PASS — {detail}");
}

fn random_dataset(n_rows: usize, n_cols: usize, seed: u64) -> ObservedDataset {
    let mut rng = substream(seed, 0);
    let norm = Normal::new(0.0, 1.0).unwrap();
    let values: Vec<f64> = (0..n_rows * n_cols).map(|_| norm.sample(&mut rng)).collect();
    ObservedDataset::new(
        values,
        n_rows,
        (0..n_cols).map(|j| format!("x{j}")).collect(),
    )
    .unwrap()
}

fn all_rows(n: usize) -> Vec<u32> {
    (0..n as u32).collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature (test-only oracle)
// ---------------------------------------------------------------------------

fn simpson(a: f64, fa: f64, m: f64, fm: f64, b: f64, fb: f64) -> f64 {
    let _ = m;
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let flm = f(lm);
    let rm = 0.5 * (m + b);
    let frm = f(rm);
    let left = simpson(a, fa, lm, flm, m, fm);
    let right = simpson(m, fm, rm, frm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, fa, lm, flm, m, fm, left, eps / 2.0, depth - 1)
            + simpson_step(f, m, fm, rm, frm, b, fb, right, eps / 2.0, depth - 1)
    }
}

/// Adaptive Simpson over [a, b], seeded with uniform panels so narrow bumps
/// are not missed, with a relative tolerance on the total.
fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize, rel_tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    let xs: Vec<f64> = (0..=panels).map(|i| a + i as f64 * h).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let scale: f64 = fs.iter().map(|v| v.abs()).sum::<f64>() * h.abs() + 1e-300;
    let eps = scale * rel_tol / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let (a, b) = (xs[i], xs[i + 1]);
        let m = 0.5 * (a + b);
        let fm = f(m);
        let whole = simpson(a, fs[i], m, fm, b, fs[i + 1]);
        total += simpson_step(f, a, fs[i], m, fm, b, fs[i + 1], whole, eps, 16);
    }
    total
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-0.5 * (x - mean) * (x - mean) / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Inverse-gamma density in sigma2.
fn inv_gamma_pdf(sigma2: f64, shape: f64, rate: f64) -> f64 {
    (shape * rate.ln() - statrs_ln_gamma(shape) - (shape + 1.0) * sigma2.ln() - rate / sigma2)
        .exp()
}

// Lanczos log-gamma, local to the oracle so it shares nothing with the
// implementation under test.
fn statrs_ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - statrs_ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + G + 0.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Marginal likelihood of the node regression by direct numerical
/// integration under the regression-image prior: sigma2 inverse-gamma, the
/// coefficients conditionally normal. The coefficient integrals are plain
/// quadrature; only their integration boxes come from completing the square
/// on the joint quadratic, so narrow likelihood spikes are never missed.
fn quadrature_marginal(
    x: &[f64],
    z: Option<&[f64]>,
    alpha_mu: f64,
    a0: f64,
    b0: f64,
    t_scale: f64,
) -> f64 {
    let n = x.len();
    let nf = n as f64;
    // Sufficient sums for locating the integrand bump (bounds only).
    let sx: f64 = x.iter().sum();
    let (sz, szz, sxz) = match z {
        Some(z) => (
            z.iter().sum::<f64>(),
            z.iter().map(|v| v * v).sum::<f64>(),
            x.iter().zip(z).map(|(a, b)| a * b).sum::<f64>(),
        ),
        None => (0.0, 0.0, 0.0),
    };
    // Joint quadratic in (alpha, beta): precision/sigma2 matrix M and center.
    let m_aa = nf + alpha_mu;
    let m_ab = sz;
    let m_bb = szz + t_scale;
    let det = m_aa * m_bb - m_ab * m_ab;
    let center_a;
    let center_b;
    if z.is_some() {
        center_a = (m_bb * sx - m_ab * sxz) / det;
        center_b = (m_aa * sxz - m_ab * sx) / det;
    } else {
        center_a = sx / m_aa;
        center_b = 0.0;
    }
    // Marginal spreads (times sigma) of the joint Gaussian bump.
    let spread_a = (m_bb / det).sqrt();
    let spread_b = (m_aa / det).sqrt();

    let lik = |alpha: f64, beta: f64, sigma2: f64| -> f64 {
        let mut log_l = -nf / 2.0 * (2.0 * std::f64::consts::PI * sigma2).ln();
        for i in 0..n {
            let mean = alpha + beta * z.map_or(0.0, |z| z[i]);
            log_l -= (x[i] - mean) * (x[i] - mean) / (2.0 * sigma2);
        }
        log_l.exp()
    };

    // sigma2 range: below b0/60 the prior factor e^{-b0/sigma2} vanishes;
    // the upper end covers the inverse-gamma tail to e^{-22}-level mass.
    let scale_guess = (b0 + 0.5 * x.iter().map(|v| v * v).sum::<f64>()) / (a0 + nf / 2.0);
    let u_lo = b0.ln() - 4.2;
    let u_hi = scale_guess.ln().max(b0.ln()) + 6.0 + 22.0 / a0;
    let outer = |u: f64| -> f64 {
        let sigma2 = u.exp();
        let sigma = sigma2.sqrt();
        let half_b = 10.0 * sigma * spread_b;
        // The conditional alpha bump drifts by sz/m_aa per unit beta; the
        // box covers that drift over the whole beta box plus 10 conditional
        // standard deviations.
        let half_a =
            10.0 * sigma * spread_a + m_ab.abs() / m_aa * half_b + 10.0 * sigma / m_aa.sqrt();
        let inner_alpha = |beta: f64| -> f64 {
            let g = |alpha: f64| {
                lik(alpha, beta, sigma2) * normal_pdf(alpha, 0.0, sigma2 / alpha_mu)
            };
            integrate(&g, center_a - half_a, center_a + half_a, 24, 1e-5)
        };
        let inner = match z {
            None => inner_alpha(0.0),
            Some(_) => {
                let g = |beta: f64| {
                    inner_alpha(beta) * normal_pdf(beta, 0.0, sigma2 / t_scale)
                };
                integrate(&g, center_b - half_b, center_b + half_b, 20, 1e-5)
            }
        };
        // Jacobian of sigma2 = exp(u).
        inner * inv_gamma_pdf(sigma2, a0, b0) * sigma2
    };
    integrate(&outer, u_lo, u_hi, 48, 1e-5)
}

#[test]
fn acceptance_01_bge_quadrature_oracle() {
    // Closed one-dimensional case first.
    let hp = BgeHyperparams::default_for(1, 1.0).unwrap();
    let data = ObservedDataset::from_rows(&[vec![0.0]], 1).unwrap();
    let score = bge_local(0, &[], &data, &[0], &hp).unwrap();
    let closed = 2.0 / std::f64::consts::PI;
    assert!(
        (score.exp() - closed).abs() < 1e-10,
        "closed case: {} vs {closed}",
        score.exp()
    );

    let mut max_rel: f64 = 0.0;
    for case in 0..20u64 {
        let mut rng = substream(mix(1000, case), 0);
        let p = (case % 2) as usize;
        let n_dim = p + 1 + (case / 2 % 2) as usize;
        let n_rows = 1 + (case as usize * 7 % 5);
        let alpha_mu = 0.3 + 2.7 * rng.random::<f64>();
        let hp = BgeHyperparams::default_for(n_dim, alpha_mu).unwrap();
        let t_scale = hp.t_entry(0, 0);
        let norm = Normal::new(0.0, 1.2).unwrap();
        let mut values = Vec::with_capacity(n_rows * n_dim);
        for _ in 0..n_rows * n_dim {
            values.push(norm.sample(&mut rng));
        }
        let data = ObservedDataset::new(
            values,
            n_rows,
            (0..n_dim).map(|j| format!("x{j}")).collect(),
        )
        .unwrap();
        let rows = all_rows(n_rows);
        let parents: Vec<usize> = (1..=p).collect();
        let log_score = bge_local(0, &parents, &data, &rows, &hp).unwrap();

        let x: Vec<f64> = (0..n_rows).map(|i| data.value(i, 0)).collect();
        let z: Option<Vec<f64>> =
            (p == 1).then(|| (0..n_rows).map(|i| data.value(i, 1)).collect());
        let a0 = (hp.alpha_w - n_dim as f64 + p as f64 + 1.0) / 2.0;
        let b0 = t_scale / 2.0;
        let quad = quadrature_marginal(&x, z.as_deref(), alpha_mu, a0, b0, t_scale);
        let rel = (log_score.exp() - quad).abs() / quad;
        max_rel = max_rel.max(rel);
        assert!(
            rel < 1e-3,
            "case {case}: p={p} N={n_rows} bge={} quad={quad} rel={rel}",
            log_score.exp()
        );
    }
    pass(1, &format!("20 quadrature cases, max relative error {max_rel:.2e}; closed case within 1e-10"));
}

#[test]
fn acceptance_02_score_equivalence_four_nodes() {
    let dags = enumerate_dags(4).unwrap();
    assert_eq!(dags.len(), 543);
    let mut worst: f64 = 0.0;
    for ds in 0..3u64 {
        let data = random_dataset(40, 4, mix(2000, ds));
        let design = InterventionDesign::observational(40);
        let hp = BgeHyperparams::default_for(4, 0.35 + 0.2 * ds as f64).unwrap();
        let scorer =
            Scorer::new(&data, &design, hp, GraphPrior::uniform(), ScoreMode::Soft).unwrap();
        let mut classes: HashMap<String, (f64, f64)> = HashMap::new();
        for dag in &dags {
            let total = scorer.total(dag).unwrap();
            let e = classes
                .entry(class_signature(dag))
                .or_insert((f64::INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(total);
            e.1 = e.1.max(total);
        }
        assert_eq!(classes.len(), 185);
        for (sig, (lo, hi)) in classes {
            let spread = hi - lo;
            worst = worst.max(spread);
            assert!(spread < 1e-8, "class {sig}: spread {spread}");
        }
    }
    pass(2, &format!("543 DAGs x 3 datasets, max within-class spread {worst:.2e}"));
}

#[test]
fn acceptance_03_reduction_and_composition() {
    // m = 0 reduction, bit identical across modes.
    let n = 3;
    let data = random_dataset(25, n, 3001);
    let design = InterventionDesign::observational(25);
    let design_hard =
        InterventionDesign::new(Vec::new(), Vec::new(), 25, Some(Default::default())).unwrap();
    let hp = BgeHyperparams::default_for(n, 0.4).unwrap();
    let dag = Dag::from_edges(n, 0, &[(0, 1), (0, 2), (1, 2)], &[]).unwrap();
    let soft = Scorer::new(&data, &design, hp.clone(), GraphPrior::uniform(), ScoreMode::Soft)
        .unwrap()
        .total(&dag)
        .unwrap();
    let hard = Scorer::new(
        &data,
        &design_hard,
        hp.clone(),
        GraphPrior::uniform(),
        ScoreMode::Hard,
    )
    .unwrap()
    .total(&dag)
    .unwrap();
    let rows = all_rows(25);
    let mut plain = 0.0;
    for v in 0..n {
        plain += bge_local(v, &dag.obs_parents(v), &data, &rows, &hp).unwrap();
    }
    assert_eq!(soft.to_bits(), plain.to_bits(), "soft != plain BGe");
    assert_eq!(hard.to_bits(), plain.to_bits(), "hard != plain BGe");

    // One binary intervention: local score is exactly the sum of the two
    // per-condition BGe scores.
    let n_rows = 30;
    let data = random_dataset(n_rows, 2, 3002);
    let states: Vec<u8> = (0..n_rows).map(|r| u8::from(r >= 18)).collect();
    let design1 = InterventionDesign::new(vec!["I".into()], states, n_rows, None).unwrap();
    let hp2 = BgeHyperparams::default_for(2, 0.7).unwrap();
    let scorer =
        Scorer::new(&data, &design1, hp2.clone(), GraphPrior::uniform(), ScoreMode::Soft)
            .unwrap();
    let d0: Vec<u32> = (0..18).collect();
    let d1: Vec<u32> = (18..30).collect();
    let manual = bge_local(1, &[0], &data, &d0, &hp2).unwrap()
        + bge_local(1, &[0], &data, &d1, &hp2).unwrap();
    let soft = scorer.local_soft(1, &[0], &[0]).unwrap();
    assert_eq!(soft.to_bits(), manual.to_bits(), "composition identity not exact");
    pass(3, "m=0 reduction bit-identical; binary-intervention composition exact");
}

#[test]
fn acceptance_04_mcmc_matches_exact_three_node_posterior() {
    let n = 3;
    let data = random_dataset(30, n, 4001);
    let design = InterventionDesign::observational(30);
    let hp = BgeHyperparams::default_for(n, 0.5).unwrap();
    let scorer =
        Scorer::new(&data, &design, hp, GraphPrior::uniform(), ScoreMode::Soft).unwrap();

    let dags = enumerate_dags(n).unwrap();
    assert_eq!(dags.len(), 25);
    let scores: Vec<f64> = dags.iter().map(|d| scorer.total(d).unwrap()).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / z).collect();

    let cfg = McmcConfig {
        iterations: 1_000_000,
        burnin: 50_000,
        thin: 10,
        chains: 1,
        seed: 40,
    };
    let set = structure_mcmc(
        &scorer,
        &Dag::new(n, 0).unwrap(),
        &cfg,
        &MoveConstraints::obs_only(),
    )
    .unwrap();

    let index: HashMap<Dag, usize> = dags
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, d)| (d, i))
        .collect();
    let mut counts = vec![0usize; dags.len()];
    for s in &set.samples {
        counts[index[&s.dag]] += 1;
    }
    let visited = counts.iter().filter(|&&c| c > 0).count();
    assert_eq!(visited, 25, "ergodicity: visited only {visited}/25 DAGs");
    let total = set.samples.len() as f64;
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(&exact)
            .map(|(&c, &p)| (c as f64 / total - p).abs())
            .sum::<f64>();
    assert!(tv < 0.05, "total variation {tv}");

    // Stored sample scores equal recomputation.
    for s in set.samples.iter().step_by(5000) {
        let fresh = scorer.total(&s.dag).unwrap();
        assert!((fresh - s.log_score).abs() < 1e-9);
    }
    pass(4, &format!("TV(empirical, exact) = {tv:.4} over 25 DAGs; all visited"));
}

/// X → Y with a genuinely soft intervention on Y (strong edge, damping
/// bounded away from 1 so the mechanism actually changes); half the rows
/// interventional. Near-null interventions are excluded by construction:
/// with no mechanism change the orientations stay indistinguishable.
fn two_node_truth(seed: u64) -> GroundTruth {
    let mut rng = substream(mix(5000, seed), 0);
    let w = 0.5 + 0.5 * rng.random::<f64>();
    let damp = 0.1 + 0.5 * rng.random::<f64>();
    let shift: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
    GroundTruth {
        dag: Dag::from_edges(2, 0, &[(0, 1)], &[]).unwrap(),
        weights: vec![(0, 1, w)],
        interventions: vec![InterventionSpec {
            label: "I0".into(),
            targets: vec![1],
            shifts: vec![shift],
            dampings: vec![damp],
        }],
        regime: Regime::Soft,
    }
}

#[test]
fn acceptance_05_identifiability_gain() {
    let seeds = 100u64;
    let mut wins = 0usize;
    for seed in 0..seeds {
        let truth = two_node_truth(seed);
        let (data, design) =
            ibge::generate_data(&truth, 1000, 1000, mix(5100, seed), true).unwrap();
        assert_eq!(data.n_rows(), 2000);
        let hp = BgeHyperparams::default_for(2, 0.5).unwrap();
        let scorer =
            Scorer::new(&data, &design, hp.clone(), GraphPrior::uniform(), ScoreMode::Soft)
                .unwrap();
        let g_true = Dag::from_edges(2, 1, &[(0, 1)], &[(0, 1)]).unwrap();
        let g_flip = Dag::from_edges(2, 1, &[(1, 0)], &[(0, 1)]).unwrap();
        if scorer.total(&g_true).unwrap() > scorer.total(&g_flip).unwrap() {
            wins += 1;
        }
        // Plain BGe is tied in every seed.
        let rows = all_rows(2000);
        let b_true = bge_local(0, &[], &data, &rows, &hp).unwrap()
            + bge_local(1, &[0], &data, &rows, &hp).unwrap();
        let b_flip = bge_local(1, &[], &data, &rows, &hp).unwrap()
            + bge_local(0, &[1], &data, &rows, &hp).unwrap();
        assert!(
            (b_true - b_flip).abs() < 1e-8,
            "seed {seed}: plain BGe not tied ({})",
            b_true - b_flip
        );
    }
    assert!(wins >= 95, "true orientation preferred in only {wins}/100 seeds");
    pass(5, &format!("iBGe preferred the true orientation in {wins}/100 seeds; plain BGe tied in all"));
}

fn desk_spec(seeds: u64) -> BenchmarkSpec {
    BenchmarkSpec {
        scale: BenchScale::Desk,
        regime: RegimeArg::Soft,
        seeds,
        base_seed: 20_260_809,
        alpha_mu_grid: vec![0.1],
        learners: vec![LearnerKind::Mcmc, LearnerKind::BaselineBge],
        edge_penalty: 0.0,
        map: SearchConfigSpec {
            restarts: 64,
            max_sweeps: 0,
        },
        mcmc: McmcConfigSpec {
            iterations: 30_000,
            burnin: 6_000,
            thin: 30,
            chains: 2,
        },
        threshold: 0.5,
        two_cycle_rule: TwoCycleRule::Symmetrize,
        jobs: 0,
        settings: Some(vec![0]),
    }
}

#[test]
fn acceptance_06_desk_scale_consensus_beats_blind_baseline() {
    use rayon::prelude::*;
    let spec = desk_spec(20);
    let datasets = benchmark_datasets(&spec).unwrap();
    assert_eq!(datasets.len(), 20);
    let results: Vec<(f64, f64, f64, f64)> = datasets
        .par_iter()
        .map(|ds| {
            let m_i = evaluate_output(
                ds,
                run_learner(LearnerKind::Mcmc, ds, 0.1, &spec).unwrap(),
            )
            .unwrap();
            let m_b = evaluate_output(
                ds,
                run_learner(LearnerKind::BaselineBge, ds, 0.1, &spec).unwrap(),
            )
            .unwrap();
            (m_i.tpr, m_i.fprp, m_b.tpr, m_b.fprp)
        })
        .collect();
    let mut tprs: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut fprs: Vec<f64> = results.iter().map(|r| r.1).collect();
    let med_tpr = median(&mut tprs);
    let med_fpr = median(&mut fprs);
    let dominated = results
        .iter()
        .filter(|(ti, fi, tb, fb)| ti > tb && fi <= fb)
        .count();
    assert!(med_tpr >= 0.75, "median TPR {med_tpr}");
    assert!(med_fpr <= 0.15, "median FPRp {med_fpr}");
    assert!(
        dominated * 5 >= datasets.len() * 4,
        "dominates baseline on only {dominated}/20 seeds"
    );
    pass(
        6,
        &format!(
            "median TPR {med_tpr:.3} (>= 0.75), median FPRp {med_fpr:.3} (<= 0.15), dominates baseline on {dominated}/20 seeds"
        ),
    );
}

#[test]
fn acceptance_07_large_sample_near_perfection() {
    use rayon::prelude::*;
    let spec = desk_spec(10);
    let shds: Vec<f64> = (0..10u64)
        .into_par_iter()
        .map(|seed_ix| {
            let seed = mix(77_000, seed_ix);
            let truth = GroundTruth::sample(20, 5, 2.0, Regime::Soft, seed).unwrap();
            let (data, design) = generate_with_layout(
                &truth,
                ConditionLayout::Blocks {
                    rows_per_intervention: 200,
                    observational_rows: 3000,
                },
                mix(seed, 0xD),
                true,
            )
            .unwrap();
            let ds = SweepDataset {
                id: format!("x10-s{seed_ix}"),
                seed,
                regime: "soft".into(),
                data,
                design,
                truth_targets: truth.target_map().into_values().collect(),
                truth_dag: truth.dag,
            };
            let out = run_learner(LearnerKind::Mcmc, &ds, 0.1, &spec).unwrap();
            evaluate_output(&ds, out).unwrap().shd
        })
        .collect();
    let mut shds = shds;
    let med = median(&mut shds);
    assert!(med <= 2.0, "median SHD {med} (per-seed: {shds:?})");
    pass(7, &format!("median SHD {med} over 10 seeds at tenfold samples"));
}

#[test]
fn acceptance_08_effects_calibration_and_path_oracle() {
    use rayon::prelude::*;
    // Path oracle against back-substitution on n <= 6.
    fn paths_effect(w: &WeightMatrix, u: usize, v: usize) -> f64 {
        if u == v {
            return 1.0;
        }
        let mut total = 0.0;
        let mut stack = vec![(u, 1.0)];
        while let Some((at, prod)) = stack.pop() {
            for next in 0..w.n() {
                let wt = w.weight(at, next);
                if wt != 0.0 {
                    if next == v {
                        total += prod * wt;
                    } else {
                        stack.push((next, prod * wt));
                    }
                }
            }
        }
        total
    }
    for seed in 0..20u64 {
        let mut rng = substream(mix(8000, seed), 0);
        let n = 3 + (seed % 4) as usize;
        let mut w = WeightMatrix::zeros(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < 0.6 {
                    w.set_weight(u, v, rng.random::<f64>() * 1.5 - 0.5);
                }
            }
        }
        let e = total_effects(&w).unwrap();
        for u in 0..n {
            for v in 0..n {
                assert!(
                    (e.effect(u, v) - paths_effect(&w, u, v)).abs() < 1e-10,
                    "seed {seed} pair ({u},{v})"
                );
            }
        }
    }

    // Frequentist calibration: 95% credible intervals across 200 simulations.
    let sims = 200u64;
    let counts: Vec<(usize, usize)> = (0..sims)
        .into_par_iter()
        .map(|sim| {
            let seed = mix(8100, sim);
            let mut rng = substream(seed, 1);
            let dag = ibge::random_dag(8, 2.0, mix(seed, 2)).unwrap();
            let weights: Vec<(usize, usize, f64)> = dag
                .obs_edges()
                .into_iter()
                .map(|(u, v)| (u, v, 0.25 + 0.75 * rng.random::<f64>()))
                .collect();
            let truth = GroundTruth {
                dag: dag.clone(),
                weights: weights.clone(),
                interventions: Vec::new(),
                regime: Regime::Soft,
            };
            let (data, design) =
                ibge::generate_data(&truth, 2000, 0, mix(seed, 3), false).unwrap();
            let hp = BgeHyperparams::default_for(8, 1.0).unwrap();
            let set = ibge::DagSampleSet {
                n_obs: 8,
                n_int: 0,
                samples: vec![ibge::DagSample {
                    dag: dag.clone(),
                    log_score: 0.0,
                    chain: 0,
                }],
            };
            let effects = posterior_effects(
                &set,
                &data,
                &design,
                &hp,
                ScoreMode::Soft,
                100,
                mix(seed, 4),
            )
            .unwrap();
            let mut wm = WeightMatrix::zeros(8);
            for &(u, v, w) in &weights {
                wm.set_weight(u, v, w);
            }
            let true_effects = total_effects(&wm).unwrap();
            let mut covered = 0usize;
            let mut considered = 0usize;
            for s in &effects.summaries {
                if s.is_self || !dag.reaches(s.source, s.target) {
                    continue;
                }
                considered += 1;
                let truth_val = true_effects.effect(s.source, s.target);
                if s.lower <= truth_val && truth_val <= s.upper {
                    covered += 1;
                }
            }
            (covered, considered)
        })
        .collect();
    let covered: usize = counts.iter().map(|c| c.0).sum();
    let considered: usize = counts.iter().map(|c| c.1).sum();
    let rate = covered as f64 / considered as f64;
    assert!(
        (0.85..=0.99).contains(&rate),
        "coverage {rate} over {considered} intervals"
    );
    pass(
        8,
        &format!("interval coverage {rate:.3} over {considered} ancestor pairs; path oracle within 1e-10"),
    );
}

#[test]
fn acceptance_09_metric_identities() {
    // The reversed-edge worked example.
    let mut truth = Pdag::new(2);
    truth.add_directed(0, 1);
    let mut est = Pdag::new(2);
    est.add_directed(1, 0);
    let m = compare(&est, &truth).unwrap();
    assert_eq!((m.tp, m.fp, m.shd), (0.5, 0.5, 1.0));

    // Randomized identity checks.
    for seed in 0..50u64 {
        let est = random_pdag(6, mix(9000, seed));
        let truth = random_pdag(6, mix(9500, seed));
        let m = compare(&est, &truth).unwrap();
        assert_eq!(m.shd, m.fn_count + m.fp, "seed {seed}");
        assert_eq!(m.shd, m.p as f64 - m.tp + m.fp, "seed {seed}");
        if m.p > 0 {
            assert!((0.0..=1.0).contains(&m.tpr));
            assert!(m.fprp >= 0.0);
        }
    }
    pass(9, "SHD identities exact on 50 random Pdag pairs; half-count example verified");
}

fn random_pdag(n: usize, seed: u64) -> Pdag {
    let mut rng = substream(seed, 0);
    let mut p = Pdag::new(n);
    for u in 0..n {
        for v in u + 1..n {
            match rng.random_range(0..4u8) {
                0 => p.add_directed(u, v),
                1 => p.add_directed(v, u),
                2 => p.add_undirected(u, v),
                _ => {}
            }
        }
    }
    p
}

#[test]
fn acceptance_10_equivalence_class_oracles() {
    use ibge::cpdag;
    // 25 three-node DAGs collapse to 11 essential graphs.
    let dags = enumerate_dags(3).unwrap();
    let mut egs = std::collections::HashSet::new();
    for d in &dags {
        let eg = cpdag(d);
        egs.insert(format!("{:?}|{:?}", eg.directed_edges(), eg.undirected_edges()));
    }
    assert_eq!(egs.len(), 11);

    // Per-node interventions on every node identify the DAG exactly.
    for n in 2..=3usize {
        for d in enumerate_dags(n).unwrap() {
            let targets: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
            let eg = interventional_eg(&d, &targets).unwrap();
            assert!(eg.undirected_edges().is_empty());
            let mut expect = d.obs_edges();
            expect.sort_unstable();
            assert_eq!(eg.directed_edges(), expect);
        }
    }

    // Refinement over every n <= 4 DAG and every single-intervention target
    // subset.
    for n in 2..=4usize {
        for d in enumerate_dags(n).unwrap() {
            let base = cpdag(&d);
            for subset in 0..(1u32 << n) {
                let targets: Vec<usize> = (0..n).filter(|&v| subset >> v & 1 == 1).collect();
                let eg = interventional_eg(&d, &[targets]).unwrap();
                for (u, v) in base.directed_edges() {
                    assert!(eg.has_directed(u, v));
                }
            }
        }
    }
    pass(10, "11 classes on 3 nodes; full identifiability under all-node targeting; refinement on all n<=4 instances");
}

#[test]
fn acceptance_11_cli_determinism() {
    use ibge::cli::{
        cmd_benchmark, cmd_effects, cmd_learn, cmd_simulate, BenchmarkArgs, CliArgs, Command,
    };
    use clap::Parser;
    use std::fs;
    use std::path::Path;

    let root = tempfile::TempDir::new().unwrap();
    // Both runs use the identical directory (and therefore identical
    // resolved configs); outputs are captured in between.
    let run_all = || -> std::path::PathBuf {
        let base = root.path().join("run");
        fs::create_dir_all(&base).unwrap();
        let sim = base.join("sim");
        let parse = |args: &[&str]| CliArgs::try_parse_from(args).unwrap();

        match parse(&[
            "ibge", "simulate", "--n", "8", "--m", "2", "--n-obs", "60", "--rows-per-int",
            "10", "--seed", "11", "--out", sim.to_str().unwrap(),
        ])
        .command
        {
            Command::Simulate(a) => cmd_simulate(&a).unwrap(),
            _ => unreachable!(),
        }
        let simp = base.join("sim-perfect");
        match parse(&[
            "ibge", "simulate", "--n", "6", "--m", "3", "--regime", "perfect", "--rho", "0.3",
            "--N", "100", "--seed", "12", "--out", simp.to_str().unwrap(),
        ])
        .command
        {
            Command::Simulate(a) => cmd_simulate(&a).unwrap(),
            _ => unreachable!(),
        }

        let map_out = base.join("map");
        match parse(&[
            "ibge", "learn", "map", "--data", sim.join("data.csv").to_str().unwrap(),
            "--design", sim.join("design.json").to_str().unwrap(), "--alpha-mu", "0.1",
            "--restarts", "3", "--seed", "7", "--out", map_out.to_str().unwrap(),
        ])
        .command
        {
            Command::Learn(a) => cmd_learn(&a).unwrap(),
            _ => unreachable!(),
        }

        let mcmc_out = base.join("mcmc");
        match parse(&[
            "ibge", "learn", "mcmc", "--data", sim.join("data.csv").to_str().unwrap(),
            "--design", sim.join("design.json").to_str().unwrap(), "--iterations", "4000",
            "--burnin", "1000", "--thin", "50", "--chains", "2", "--seed", "7", "--out",
            mcmc_out.to_str().unwrap(),
        ])
        .command
        {
            Command::Learn(a) => cmd_learn(&a).unwrap(),
            _ => unreachable!(),
        }

        let eff_out = base.join("effects");
        match parse(&[
            "ibge", "effects", "--samples", mcmc_out.join("samples.json").to_str().unwrap(),
            "--data", sim.join("data.csv").to_str().unwrap(), "--design",
            sim.join("design.json").to_str().unwrap(), "--draws-per-dag", "3", "--seed", "5",
            "--out", eff_out.to_str().unwrap(), "--raw-draws",
        ])
        .command
        {
            Command::Effects(a) => cmd_effects(&a).unwrap(),
            _ => unreachable!(),
        }

        // Tiny benchmark with parallel jobs to exercise ordered streaming.
        let bench_cfg = base.join("bench.json");
        fs::write(
            &bench_cfg,
            r#"{
  "scale": "desk", "regime": "soft", "seeds": 2, "base_seed": 3,
  "alpha_mu_grid": [0.1], "learners": ["map", "mcmc", "baseline-bge"],
  "map": {"restarts": 1, "max_sweeps": 30},
  "mcmc": {"iterations": 1500, "burnin": 300, "thin": 20, "chains": 1},
  "jobs": 3, "settings": [0]
}"#,
        )
        .unwrap();
        let bench_out = base.join("bench");
        fs::create_dir_all(&bench_out).unwrap();
        cmd_benchmark(&BenchmarkArgs {
            config: bench_cfg,
            out: bench_out,
        })
        .unwrap();
        base
    };

    fn collect(dir: &Path, base: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap()).collect();
        entries.sort_by_key(|e| e.path());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                collect(&p, base, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }

    let a = run_all();
    let mut fa = Vec::new();
    collect(&a, &a, &mut fa);
    // Expected result-row arithmetic: 2 datasets x 1 grid value per learner.
    let results = fs::read_to_string(a.join("bench/results_map.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2);
    fs::remove_dir_all(&a).unwrap();

    let b = run_all();
    let mut fb = Vec::new();
    collect(&b, &b, &mut fb);

    assert_eq!(fa.len(), fb.len());
    let mut checked = 0;
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert_eq!(ca, cb, "file {na} differs between reruns");
        checked += 1;
    }
    pass(11, &format!("{checked} output files byte-identical across reruns"));
}
