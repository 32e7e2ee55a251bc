//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line (run with `--nocapture` to see them).

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use coevo::dynamics::{
    action_score, increasing_differences_gap, simulate, ActivationSchedule, ControlSets,
    PopulationState, SimOptions,
};
use coevo::equilibrium::{compute_equilibrium, EquilibriumReport};
use coevo::net::{LayeredNetwork, ModelParams};
use coevo::rng::rng_for;
use coevo::search::{
    brute_force_minimum, complete_graph_thresholds, greedy_centrality_baseline,
    minimize_control_set, scenario_margin, CentralityConfig, Chain, Scenario, SearchConfig,
    SearchOutcome,
};
use coevo::{nodeset, NodeSet};
use common::{random_instance, random_subset};
use rand::Rng;

/// Criterion 1: on 21-node homogeneous complete graphs, the algorithmic
/// verdict must match the scenario's closed-form strict inequality on every
/// grid cell whose margin is not within 1e-9 of the boundary.
#[test]
fn criterion_1_closed_form_equivalence() {
    let n = 21;
    let net = LayeredNetwork::complete(n).unwrap();
    let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for &lambda in &grid {
        for &beta in &grid {
            let params = ModelParams::uniform(n, lambda, beta).unwrap();
            for c in 0..n {
                let gamma = c as f64 / (n as f64 - 1.0);
                let set: NodeSet = (0..c).collect();
                for scenario in [Scenario::Opinion, Scenario::Action, Scenario::Joint] {
                    let margin = scenario_margin(scenario, lambda, beta, gamma);
                    if margin.abs() <= 1e-9 {
                        continue;
                    }
                    let (cx, cy) = match scenario {
                        Scenario::Opinion => (NodeSet::new(), set.clone()),
                        Scenario::Action => (set.clone(), NodeSet::new()),
                        Scenario::Joint => (set.clone(), set.clone()),
                    };
                    let phi = compute_equilibrium(&net, &params, &cx, &cy).unwrap().phi;
                    checked += 1;
                    if (phi == 1) != (margin > 0.0) {
                        mismatches += 1;
                        eprintln!(
                            "mismatch: scenario {scenario} lambda {lambda} beta {beta} gamma {gamma}: phi {phi}, margin {margin}"
                        );
                    }
                }
            }
        }
    }
    assert_eq!(mismatches, 0, "{mismatches} closed-form mismatches of {checked}");
    println!("criterion 1 (closed-form equivalence): PASS - {checked} cells, 0 mismatches");
}

struct OracleStats {
    instances: usize,
    simulations: usize,
    action_mismatches: usize,
    max_opinion_err: f64,
    x_monotone_violations: usize,
    max_y_backstep: f64,
}

fn clear_margins(net: &LayeredNetwork, params: &ModelParams, report: &EquilibriumReport) -> bool {
    let state =
        PopulationState { x: report.x_star.clone(), y: report.y_star.clone(), t: 0 };
    (0..net.n()).all(|i| action_score(net, params, &state, i).abs() >= 1e-6)
}

fn oracle_stats() -> &'static OracleStats {
    static STATS: OnceLock<OracleStats> = OnceLock::new();
    STATS.get_or_init(|| {
        let mut rng = rng_for(2024, "oracle-suite");
        let mut stats = OracleStats {
            instances: 0,
            simulations: 0,
            action_mismatches: 0,
            max_opinion_err: 0.0,
            x_monotone_violations: 0,
            max_y_backstep: 0.0,
        };
        let mut seed = 0u64;
        while stats.instances < 500 {
            seed += 1;
            let n = rng.gen_range(3..=12);
            let inst = random_instance(n, 10_000 + seed);
            let cx = random_subset(n, 0.25, &mut rng);
            let cy = random_subset(n, 0.25, &mut rng);
            let report = compute_equilibrium(&inst.net, &inst.params, &cx, &cy).unwrap();
            // skip near-tie instances: the exact verdict stands, but a
            // finite-horizon simulation cannot certify margins below
            // floating-point noise
            if !clear_margins(&inst.net, &inst.params, &report) {
                continue;
            }
            stats.instances += 1;
            let control = ControlSets::pinned(cx, cy);
            for schedule in [
                ActivationSchedule::synchronous(),
                ActivationSchedule::round_robin(),
                ActivationSchedule::random_single(seed),
            ] {
                let horizon = 50 * schedule.window(n) * n;
                let traj = simulate(
                    &inst.net,
                    &inst.params,
                    &control,
                    &schedule,
                    &SimOptions::new(horizon).with_stride(horizon),
                )
                .unwrap();
                stats.simulations += 1;
                if traj.final_state.x != report.x_star {
                    stats.action_mismatches += 1;
                }
                let err = traj
                    .final_state
                    .y
                    .iter()
                    .zip(&report.y_star)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                stats.max_opinion_err = stats.max_opinion_err.max(err);
                if !traj.x_monotone {
                    stats.x_monotone_violations += 1;
                }
                stats.max_y_backstep = stats.max_y_backstep.max(traj.max_y_backstep);
            }
        }
        stats
    })
}

/// Criterion 2: simulated final states equal the computed equilibrium for
/// 500 random instances under three schedule kinds.
#[test]
fn criterion_2_oracle_equivalence() {
    let s = oracle_stats();
    assert_eq!(s.action_mismatches, 0, "final actions diverged");
    assert!(s.max_opinion_err <= 1e-6, "opinion error {}", s.max_opinion_err);
    println!(
        "criterion 2 (oracle equivalence): PASS - {} instances, {} simulations, max opinion error {:.2e}",
        s.instances, s.simulations, s.max_opinion_err
    );
}

/// Criterion 3: every simulated trajectory is componentwise nondecreasing.
#[test]
fn criterion_3_monotone_trajectories() {
    let s = oracle_stats();
    assert_eq!(s.x_monotone_violations, 0, "actions decreased");
    assert!(s.max_y_backstep <= 1e-12, "opinion backstep {}", s.max_y_backstep);
    println!(
        "criterion 3 (monotone trajectories): PASS - {} simulations, max opinion backstep {:.2e}",
        s.simulations, s.max_y_backstep
    );
}

/// Criterion 4: enlarging both pinned sets never turns a positive verdict
/// negative.
#[test]
fn criterion_4_set_monotonicity() {
    let mut rng = rng_for(4040, "nested-pairs");
    let mut checked = 0usize;
    while checked < 200 {
        let n = rng.gen_range(3..=10);
        let inst = random_instance(n, 40_000 + checked as u64);
        let big_cx = random_subset(n, 0.5, &mut rng);
        let big_cy = random_subset(n, 0.5, &mut rng);
        let small_cx: NodeSet =
            big_cx.iter().copied().filter(|_| rng.gen::<f64>() < 0.6).collect();
        let small_cy: NodeSet =
            big_cy.iter().copied().filter(|_| rng.gen::<f64>() < 0.6).collect();
        let small =
            compute_equilibrium(&inst.net, &inst.params, &small_cx, &small_cy).unwrap().phi;
        let big = compute_equilibrium(&inst.net, &inst.params, &big_cx, &big_cy).unwrap().phi;
        assert!(
            !(small == 1 && big == 0),
            "monotonicity violated: small ({small_cx:?},{small_cy:?}) works, big ({big_cx:?},{big_cy:?}) fails"
        );
        checked += 1;
    }
    println!("criterion 4 (set monotonicity): PASS - {checked} nested pairs");
}

/// Criterion 5: with a 50k budget at epsilon 0.1, the chain matches the
/// exhaustive optimum in at least 95 of 100 seeded desk-scale runs and
/// never reports a smaller (hence inadmissible) set.
#[test]
fn criterion_5_optimizer_exactness() {
    let mut rng = rng_for(5050, "optimizer-runs");
    let mut exact = 0usize;
    let mut runs = 0usize;
    let mut seed = 0u64;
    while runs < 100 {
        seed += 1;
        let n = rng.gen_range(5..=12);
        let inst = random_instance(n, 50_000 + seed);
        let all: NodeSet = (0..n).collect();
        let (vx, vy) = match runs % 3 {
            0 => (all.clone(), all.clone()),
            1 => (all.clone(), NodeSet::new()),
            _ => {
                let vx = random_subset(n, 0.7, &mut rng);
                let vy = random_subset(n, 0.7, &mut rng);
                if vx.union(&vy).count() == 0 {
                    continue;
                }
                (vx, vy)
            }
        };
        let minima = brute_force_minimum(&inst.net, &inst.params, &vx, &vy, None).unwrap();
        if minima.is_empty() {
            continue; // infeasible instance: nothing to compare
        }
        let optimum = minima[0].len();
        let cfg = SearchConfig::new(0.1, 50_000, seed);
        let outcome = minimize_control_set(&inst.net, &inst.params, &vx, &vy, &cfg).unwrap();
        let SearchOutcome::Found(res) = outcome else {
            panic!("brute force found minima but the chain start was inadmissible")
        };
        assert!(
            res.best.len() >= optimum,
            "run {runs}: chain reported {} below the optimum {optimum}",
            res.best.len()
        );
        if res.best.len() == optimum {
            exact += 1;
        }
        runs += 1;
    }
    assert!(exact >= 95, "only {exact} of {runs} runs matched the optimum");
    println!("criterion 5 (optimizer exactness): PASS - {exact}/{runs} runs exact");
}

/// Criterion 6: at case-study scale (84 nodes, joint control, epsilon 0.6,
/// 100k iterations) the chain's best set is no larger than the greedy
/// centrality baseline's admissible prefix, within a five-minute budget.
#[test]
fn criterion_6_case_study_scale() {
    let started = Instant::now();
    let n = 84;
    let net = LayeredNetwork::random_regularized(n, 606).unwrap();
    let params = ModelParams::uniform(n, 0.5, 0.5).unwrap();
    let all: NodeSet = (0..n).collect();

    let greedy =
        greedy_centrality_baseline(&net, &params, &all, &all, &CentralityConfig::default())
            .unwrap();
    let greedy_size = greedy.prefix.expect("joint control is always feasible").len();

    let cfg = SearchConfig::new(0.6, 100_000, 606);
    let outcome = minimize_control_set(&net, &params, &all, &all, &cfg).unwrap();
    let SearchOutcome::Found(res) = outcome else { panic!("joint control is always feasible") };

    let elapsed = started.elapsed();
    assert!(
        res.best.len() <= greedy_size,
        "chain best {} exceeds greedy baseline {greedy_size}",
        res.best.len()
    );
    assert!(elapsed.as_secs() < 300, "case-study run took {elapsed:?}");
    println!(
        "criterion 6 (case-study scale): PASS - chain {}/{n} ({:.1}%) vs greedy {}/{n} ({:.1}%) in {:.1?}",
        res.best.len(),
        100.0 * res.best.len() as f64 / n as f64,
        greedy_size,
        100.0 * greedy_size as f64 / n as f64,
        elapsed
    );
}

/// Criterion 7: the chain spends more time at minimum-cardinality sets at
/// epsilon 0.05 than at 0.5 in at least 8 of 10 seeds.
#[test]
fn criterion_7_epsilon_concentration() {
    let n = 6;
    let net = LayeredNetwork::complete(n).unwrap();
    let params = ModelParams::uniform(n, 0.5, 0.5).unwrap();
    let all: NodeSet = (0..n).collect();
    let minimum = complete_graph_thresholds(0.5, 0.5, n, Scenario::Joint)
        .unwrap()
        .min_size
        .unwrap();

    let occupancy = |epsilon: f64, seed: u64| -> f64 {
        let mut chain =
            Chain::new(&net, &params, &all, &all, epsilon, None, seed).unwrap().unwrap();
        let iters = 1_000_000usize;
        let mut hits = 0usize;
        for _ in 0..iters {
            chain.step().unwrap();
            if chain.current().len() == minimum {
                hits += 1;
            }
        }
        hits as f64 / iters as f64
    };

    let mut wins = 0;
    for seed in 0..10u64 {
        let low = occupancy(0.05, 700 + seed);
        let high = occupancy(0.5, 800 + seed);
        if low > high {
            wins += 1;
        }
    }
    assert!(wins >= 8, "low-epsilon concentration won only {wins}/10 seeds");
    println!("criterion 7 (epsilon concentration): PASS - {wins}/10 seeds");
}

/// Criterion 8: sampled increasing-differences gaps are never below -1e-12.
#[test]
fn criterion_8_supermodularity() {
    let mut rng = rng_for(8080, "supermodularity");
    let mut worst = f64::INFINITY;
    for trial in 0..10_000u64 {
        let n = 2 + (trial as usize % 5);
        let inst = random_instance(n, 80_000 + trial);
        let lo_x: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let hi_x: Vec<i8> =
            lo_x.iter().map(|&v| if rng.gen::<bool>() { 1 } else { v }).collect();
        let lo_y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let hi_y: Vec<f64> = lo_y.iter().map(|&v| rng.gen_range(v..=1.0)).collect();
        let lo = PopulationState::new(lo_x, lo_y).unwrap();
        let hi = PopulationState::new(hi_x, hi_y).unwrap();
        let i = rng.gen_range(0..n);
        let zi_lo = (-1i8, rng.gen_range(-1.0..=1.0));
        let zi_hi = (1i8, rng.gen_range(zi_lo.1..=1.0));
        let gap =
            increasing_differences_gap(&inst.net, &inst.params, i, zi_hi, zi_lo, &hi, &lo)
                .unwrap();
        worst = worst.min(gap);
        assert!(gap >= -1e-12, "trial {trial}: gap {gap}");
    }
    println!("criterion 8 (supermodularity): PASS - 10000 quadruples, worst gap {worst:.2e}");
}

/// Criterion 9: an automated search over 2-node networks finds a
/// submodularity violation, certified by the exact verdicts.
#[test]
fn criterion_9_non_submodularity_witness() {
    let mut witness = None;
    'outer: for w10 in 1..=5 {
        let w = w10 as f64 / 10.0;
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0 - w, w, w, 1.0 - w]);
        let net = LayeredNetwork::new(m.clone(), m).unwrap();
        for l10 in 1..=9 {
            for b10 in 1..=9 {
                let lambda = l10 as f64 / 10.0;
                let beta = b10 as f64 / 10.0;
                let params = ModelParams::uniform(2, lambda, beta).unwrap();
                let cy = nodeset([0, 1]);
                let phi = |cx: &NodeSet| {
                    compute_equilibrium(&net, &params, cx, &cy).unwrap().phi as i32
                };
                let s = nodeset([0]);
                let t = nodeset([1]);
                let union = nodeset([0, 1]);
                let inter = NodeSet::new();
                // submodularity requires phi(S) + phi(T) >= phi(S|T) + phi(S&T)
                if phi(&s) + phi(&t) < phi(&union) + phi(&inter) {
                    witness = Some((w, lambda, beta));
                    break 'outer;
                }
            }
        }
    }
    let (w, lambda, beta) = witness.expect("no submodularity violation found");
    println!(
        "criterion 9 (non-submodularity witness): PASS - cross weight {w}, lambda {lambda}, beta {beta}"
    );
}
