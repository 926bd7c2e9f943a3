// scratch diagnostic: desk density sweep
use ibge::cli::{run_learner, BenchmarkSpec, LearnerKind, McmcConfigSpec, RegimeArg, SearchConfigSpec};
use ibge::evaluate::{evaluate_output, SweepDataset};
use ibge::rng::mix;
use ibge::simulate::{generate_with_layout, ConditionLayout};
use ibge::{BenchScale, GroundTruth, Regime, TwoCycleRule};
use rayon::prelude::*;

fn datasets_ep(ep: f64, seeds: u64) -> Vec<SweepDataset> {
    (0..seeds).map(|seed_ix| {
        let seed = mix(20_260_809, seed_ix);
        let truth = GroundTruth::sample(20, 5, ep, Regime::Soft, seed).unwrap();
        let (data, design) = generate_with_layout(
            &truth,
            ConditionLayout::Blocks { rows_per_intervention: 20, observational_rows: 300 },
            mix(seed, 0xD), true).unwrap();
        SweepDataset {
            id: format!("ep{ep}-s{seed_ix:03}"), seed, regime: "soft".into(), data, design,
            truth_targets: truth.target_map().into_values().collect(), truth_dag: truth.dag,
        }
    }).collect()
}

fn run(ep: f64, restarts: usize, iters: usize) {
    let spec = BenchmarkSpec {
        scale: BenchScale::Desk, regime: RegimeArg::Soft, seeds: 20, base_seed: 20_260_809,
        alpha_mu_grid: vec![0.1], learners: vec![],
        edge_penalty: 0.0,
        map: SearchConfigSpec { restarts, max_sweeps: 0 },
        mcmc: McmcConfigSpec { iterations: iters, burnin: iters / 5, thin: 10, chains: 2 },
        threshold: 0.5, two_cycle_rule: TwoCycleRule::Symmetrize, jobs: 0, settings: Some(vec![0]),
    };
    let datasets = datasets_ep(ep, 20);
    let rows: Vec<(f64, f64, f64, f64)> = datasets.par_iter().map(|ds| {
        let mi = evaluate_output(ds, run_learner(LearnerKind::Mcmc, ds, 0.1, &spec).unwrap()).unwrap();
        let mb = evaluate_output(ds, run_learner(LearnerKind::BaselineBge, ds, 0.1, &spec).unwrap()).unwrap();
        (mi.tpr, mi.fprp, mb.tpr, mb.fprp)
    }).collect();
    let dom = rows.iter().filter(|(ti, fi, tb, fb)| ti > tb && fi <= fb).count();
    let mut tprs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut fprs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    tprs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fprs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("ep={ep} r{restarts} it{iters}: dom {dom}/20 med_tpr {:.3} med_fprp {:.3}",
        (tprs[9] + tprs[10]) / 2.0, (fprs[9] + fprs[10]) / 2.0);
}

fn main() {
    run(1.0, 64, 10_000);
    run(1.5, 64, 10_000);
    run(1.0, 64, 30_000);
}
