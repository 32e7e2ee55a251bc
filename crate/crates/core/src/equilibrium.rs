//! Exact equilibrium computation and the consensus verdict.
//!
//! Under the committed-minority starting condition the dynamics converge to
//! one equilibrium that does not depend on the activation sequence, so
//! whether the population reaches the all-`+1` action consensus is decidable
//! without simulating. The procedure grows a set of `+1`-action nodes,
//! starting from the pinned actions: for each candidate action assignment it
//! solves the pinned linear system for the matching opinion profile, then
//! adds every node whose [`action_score`](crate::dynamics::action_score) is
//! strictly positive, until nothing changes. The final set equals the whole
//! population exactly when consensus is guaranteed.
//!
//! The opinion solve factors the free-node block once per pinned-opinion
//! set ([`OpinionSolver`]) and is reused across candidate assignments and,
//! in the search module, across whole families of control sets.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::dynamics::{action_score, PopulationState, TIE_BAND};
use crate::error::{Error, Result};
use crate::net::{LayeredNetwork, ModelParams};
use crate::NodeSet;

/// Factorization of the free-opinion block for a fixed pinned-opinion set.
///
/// For free nodes `F` (those not pinned) the equilibrium opinions solve
/// `(I_F - [(I-L)W]_FF) y_F = L_F x_F + [(I-L)W]_{F,pinned} 1` where `L` is
/// the diagonal of per-node action weights. The block is strictly
/// diagonally dominant (every `lambda_i > 0`), so the system has exactly
/// one solution.
pub struct OpinionSolver {
    n: usize,
    cy: NodeSet,
    free: Vec<usize>,
    lu: Option<LU<f64, Dyn, Dyn>>,
    rhs_const: DVector<f64>,
    lambda_free: DVector<f64>,
}

impl OpinionSolver {
    pub fn new(net: &LayeredNetwork, params: &ModelParams, cy: &NodeSet) -> Result<Self> {
        let n = net.n();
        params.check_len(n)?;
        if let Some(&i) = cy.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidInput(format!("cy contains node {i} >= n = {n}")));
        }
        let free: Vec<usize> = (0..n).filter(|i| !cy.contains(i)).collect();
        let w = net.opinion_weights();
        let nf = free.len();
        if nf == 0 {
            return Ok(Self {
                n,
                cy: cy.clone(),
                free,
                lu: None,
                rhs_const: DVector::zeros(0),
                lambda_free: DVector::zeros(0),
            });
        }
        let mut block = DMatrix::zeros(nf, nf);
        for (r, &i) in free.iter().enumerate() {
            let scale = 1.0 - params.lambda(i);
            for (c, &j) in free.iter().enumerate() {
                block[(r, c)] = -scale * w[(i, j)];
            }
            block[(r, r)] += 1.0;
        }
        let mut rhs_const = DVector::zeros(nf);
        for (r, &i) in free.iter().enumerate() {
            let scale = 1.0 - params.lambda(i);
            rhs_const[r] = scale * cy.iter().map(|&j| w[(i, j)]).sum::<f64>();
        }
        let lambda_free = DVector::from_iterator(nf, free.iter().map(|&i| params.lambda(i)));
        let lu = LU::new(block);
        Ok(Self { n, cy: cy.clone(), free, lu: Some(lu), rhs_const, lambda_free })
    }

    pub fn pinned(&self) -> &NodeSet {
        &self.cy
    }

    /// Equilibrium opinions for the given action assignment: `+1` on the
    /// pinned set, the unique solution of the free block elsewhere.
    pub fn solve(&self, x_hat: &[i8]) -> Result<Vec<f64>> {
        assert_eq!(x_hat.len(), self.n, "action vector length");
        let mut y = vec![1.0; self.n];
        if self.free.is_empty() {
            return Ok(y);
        }
        let mut rhs = self.rhs_const.clone();
        for (r, &i) in self.free.iter().enumerate() {
            rhs[r] += self.lambda_free[r] * f64::from(x_hat[i]);
        }
        let sol = self
            .lu
            .as_ref()
            .expect("factorization present when free set is nonempty")
            .solve(&rhs)
            .ok_or(Error::Singular)?;
        for (r, &i) in self.free.iter().enumerate() {
            y[i] = sol[r];
        }
        Ok(y)
    }
}

/// One-shot constrained opinion solve; factor once via [`OpinionSolver`]
/// when solving repeatedly for the same pinned set.
pub fn solve_opinion_equilibrium(
    net: &LayeredNetwork,
    params: &ModelParams,
    x_hat: &[i8],
    cy: &NodeSet,
) -> Result<Vec<f64>> {
    OpinionSolver::new(net, params, cy)?.solve(x_hat)
}

/// An action assignment together with the opinion profile that solves the
/// pinned linear system for it.
#[derive(Debug, Clone)]
pub struct CandidateEquilibrium {
    pub x_hat: Vec<i8>,
    pub y_hat: Vec<f64>,
}

impl CandidateEquilibrium {
    /// Build the candidate for a `+1`-action set and pinned opinions.
    pub fn for_plus_set(
        net: &LayeredNetwork,
        params: &ModelParams,
        plus: &NodeSet,
        cy: &NodeSet,
    ) -> Result<Self> {
        let x_hat: Vec<i8> = (0..net.n()).map(|i| if plus.contains(&i) { 1 } else { -1 }).collect();
        let y_hat = solve_opinion_equilibrium(net, params, &x_hat, cy)?;
        Ok(Self { x_hat, y_hat })
    }

    /// Absolute residual of each free opinion row.
    pub fn opinion_residuals(
        &self,
        net: &LayeredNetwork,
        params: &ModelParams,
        cy: &NodeSet,
    ) -> Vec<f64> {
        let w = net.opinion_weights();
        let n = net.n();
        (0..n)
            .map(|i| {
                if cy.contains(&i) {
                    (self.y_hat[i] - 1.0).abs()
                } else {
                    let sw: f64 = (0..n).map(|j| w[(i, j)] * self.y_hat[j]).sum();
                    let rhs = (1.0 - params.lambda(i)) * sw
                        + params.lambda(i) * f64::from(self.x_hat[i]);
                    (self.y_hat[i] - rhs).abs()
                }
            })
            .collect()
    }
}

/// Outcome of the candidate-equilibrium test.
#[derive(Debug, Clone)]
pub struct EquilibriumCheck {
    /// True when no uncontrolled node strictly prefers the opposite action.
    pub is_equilibrium: bool,
    /// Uncontrolled nodes whose current action disagrees with their score.
    pub violations: Vec<usize>,
    /// Nodes at `-1` whose score is strictly positive; they are guaranteed
    /// to switch, so no equilibrium with this action assignment exists.
    pub switchers: Vec<usize>,
}

/// Test whether a candidate is an equilibrium of the controlled dynamics:
/// every node outside the pinned-action set must (weakly) agree with its
/// score, within the tie band.
pub fn check_equilibrium(
    net: &LayeredNetwork,
    params: &ModelParams,
    candidate: &CandidateEquilibrium,
    cx: &NodeSet,
) -> EquilibriumCheck {
    let n = net.n();
    let state =
        PopulationState { x: candidate.x_hat.clone(), y: candidate.y_hat.clone(), t: 0 };
    let mut violations = Vec::new();
    let mut switchers = Vec::new();
    for i in 0..n {
        if cx.contains(&i) {
            continue;
        }
        let score = action_score(net, params, &state, i);
        if f64::from(candidate.x_hat[i]) * score < -TIE_BAND {
            violations.push(i);
        }
        if candidate.x_hat[i] == -1 && score > TIE_BAND {
            switchers.push(i);
        }
    }
    EquilibriumCheck { is_equilibrium: violations.is_empty(), violations, switchers }
}

/// Result of the consensus decision: the final `+1`-action set, the reached
/// equilibrium, and whether it is the full consensus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumReport {
    /// 1 when the dynamics are guaranteed to reach the all-`+1` consensus.
    pub phi: u8,
    /// Final `+1`-action set, sorted.
    #[serde(rename = "A_f")]
    pub a_f: Vec<usize>,
    pub x_star: Vec<i8>,
    pub y_star: Vec<f64>,
    /// Number of outer sweeps performed.
    pub iterations: usize,
    /// Size of the growing set at each sweep, starting from the pinned set.
    pub set_sizes: Vec<usize>,
}

/// Decide consensus and compute the reached equilibrium for pinned sets
/// `(cx, cy)`. Requires stochastic, strongly connected layers (or the
/// reducible override) and valid parameters.
pub fn compute_equilibrium(
    net: &LayeredNetwork,
    params: &ModelParams,
    cx: &NodeSet,
    cy: &NodeSet,
) -> Result<EquilibriumReport> {
    net.ensure_ready()?;
    params.check_len(net.n())?;
    if let Some(&i) = cx.iter().find(|&&i| i >= net.n()) {
        return Err(Error::InvalidInput(format!("cx contains node {i} >= n = {}", net.n())));
    }
    let solver = OpinionSolver::new(net, params, cy)?;
    compute_with_solver(net, params, cx, &solver)
}

/// Same as [`compute_equilibrium`] but reusing a prebuilt factorization;
/// the pinned-opinion set is the solver's.
pub fn compute_with_solver(
    net: &LayeredNetwork,
    params: &ModelParams,
    cx: &NodeSet,
    solver: &OpinionSolver,
) -> Result<EquilibriumReport> {
    let n = net.n();
    let mut in_set = vec![false; n];
    for &i in cx {
        in_set[i] = true;
    }
    let mut size = cx.len();
    let mut set_sizes = vec![size];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let x_hat: Vec<i8> = in_set.iter().map(|&b| if b { 1 } else { -1 }).collect();
        let y_hat = solver.solve(&x_hat)?;
        let state = PopulationState { x: x_hat.clone(), y: y_hat.clone(), t: 0 };
        let additions: Vec<usize> = (0..n)
            .filter(|&i| !in_set[i] && action_score(net, params, &state, i) > TIE_BAND)
            .collect();
        if additions.is_empty() {
            let a_f: Vec<usize> = (0..n).filter(|&i| in_set[i]).collect();
            debug_assert!(iterations <= n - cx.len() + 1);
            return Ok(EquilibriumReport {
                phi: u8::from(size == n),
                a_f,
                x_star: x_hat,
                y_star: y_hat,
                iterations,
                set_sizes,
            });
        }
        for i in additions {
            in_set[i] = true;
            size += 1;
        }
        set_sizes.push(size);
    }
}

/// The consensus verdict alone: does pinning `(cx, cy)` at `+1` steer the
/// whole population to the `+1` consensus? Schedule-independent.
pub fn consensus_guaranteed(
    net: &LayeredNetwork,
    params: &ModelParams,
    cx: &NodeSet,
    cy: &NodeSet,
) -> Result<bool> {
    Ok(compute_equilibrium(net, params, cx, cy)?.phi == 1)
}

/// Consensus verdict with an early positive exit: as soon as `watch` joins
/// the growing set the answer is yes.
///
/// This is only valid when `cx + {watch}` (with the solver's pinned-opinion
/// set) is already known to steer the population to consensus, as happens
/// when testing the removal of a single pinned action from a working set:
/// once the removed node would switch back on its own, the remaining
/// dynamics dominate the original ones.
pub fn consensus_watching(
    net: &LayeredNetwork,
    params: &ModelParams,
    solver: &OpinionSolver,
    cx: &NodeSet,
    watch: usize,
) -> Result<bool> {
    let n = net.n();
    let mut in_set = vec![false; n];
    for &i in cx {
        in_set[i] = true;
    }
    let mut size = cx.len();
    loop {
        let x_hat: Vec<i8> = in_set.iter().map(|&b| if b { 1 } else { -1 }).collect();
        let y_hat = solver.solve(&x_hat)?;
        let state = PopulationState { x: x_hat, y: y_hat, t: 0 };
        let additions: Vec<usize> = (0..n)
            .filter(|&i| !in_set[i] && action_score(net, params, &state, i) > TIE_BAND)
            .collect();
        if additions.contains(&watch) {
            return Ok(true);
        }
        if additions.is_empty() {
            return Ok(size == n);
        }
        for i in additions {
            in_set[i] = true;
            size += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodeset;
    use crate::rng::rng_for;
    use rand::Rng;

    fn uniform(n: usize, lam: f64, beta: f64) -> ModelParams {
        ModelParams::uniform(n, lam, beta).unwrap()
    }

    #[test]
    fn all_pinned_opinions_solve_to_ones() {
        let net = LayeredNetwork::complete(4).unwrap();
        let params = uniform(4, 0.5, 0.5);
        let cy: NodeSet = (0..4).collect();
        let y = solve_opinion_equilibrium(&net, &params, &[1, -1, 1, -1], &cy).unwrap();
        assert_eq!(y, vec![1.0; 4]);
    }

    #[test]
    fn unpinned_all_minus_solves_to_minus_one() {
        let net = LayeredNetwork::random_regularized(6, 2).unwrap();
        let params = uniform(6, 0.3, 0.9);
        let y = solve_opinion_equilibrium(&net, &params, &[-1; 6], &NodeSet::new()).unwrap();
        for v in y {
            assert!((v + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_graph_free_opinion_closed_form() {
        // half the neighbours pinned, all actions at -1, lambda = 1/2:
        // free opinions settle at -1/3
        let net = LayeredNetwork::complete(5).unwrap();
        let params = uniform(5, 0.5, 0.5);
        let cy = nodeset([0, 1]); // |cy|/(n-1) = 1/2
        let y = solve_opinion_equilibrium(&net, &params, &[-1; 5], &cy).unwrap();
        for i in 2..5 {
            assert!((y[i] + 1.0 / 3.0).abs() < 1e-12, "y[{i}] = {}", y[i]);
        }
    }

    #[test]
    fn plus_consensus_is_equilibrium() {
        let net = LayeredNetwork::random_regularized(5, 7).unwrap();
        let params = uniform(5, 0.4, 0.6);
        let cand = CandidateEquilibrium {
            x_hat: vec![1; 5],
            y_hat: vec![1.0; 5],
        };
        let check = check_equilibrium(&net, &params, &cand, &NodeSet::new());
        assert!(check.is_equilibrium);
        assert!(check.switchers.is_empty());
    }

    #[test]
    fn minus_consensus_is_equilibrium_without_control() {
        let net = LayeredNetwork::random_regularized(5, 8).unwrap();
        let params = uniform(5, 0.4, 0.6);
        let cand = CandidateEquilibrium {
            x_hat: vec![-1; 5],
            y_hat: vec![-1.0; 5],
        };
        let check = check_equilibrium(&net, &params, &cand, &NodeSet::new());
        assert!(check.is_equilibrium);
    }

    #[test]
    fn pinned_majority_candidate_is_not_equilibrium() {
        // complete n=5 with 3 pinned actions: the first candidate (only the
        // pinned set at +1) leaves the other two nodes wanting to switch
        let net = LayeredNetwork::complete(5).unwrap();
        let params = uniform(5, 0.5, 0.5);
        let cx = nodeset([0, 1, 2]);
        let cand =
            CandidateEquilibrium::for_plus_set(&net, &params, &cx, &NodeSet::new()).unwrap();
        let check = check_equilibrium(&net, &params, &cand, &cx);
        assert!(!check.is_equilibrium);
        assert_eq!(check.switchers, vec![3, 4]);
    }

    #[test]
    fn full_pin_consensus_in_one_sweep() {
        let net = LayeredNetwork::complete(6).unwrap();
        let params = uniform(6, 0.5, 0.5);
        let all: NodeSet = (0..6).collect();
        let report = compute_equilibrium(&net, &params, &all, &NodeSet::new()).unwrap();
        assert_eq!(report.phi, 1);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.a_f, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn no_control_stays_at_minus_consensus() {
        let net = LayeredNetwork::random_regularized(7, 9).unwrap();
        let params = uniform(7, 0.5, 0.5);
        let report =
            compute_equilibrium(&net, &params, &NodeSet::new(), &NodeSet::new()).unwrap();
        assert_eq!(report.phi, 0);
        assert!(report.a_f.is_empty());
        assert!(report.x_star.iter().all(|&v| v == -1));
        assert!(report.y_star.iter().all(|&v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn action_majority_thresholds_on_complete_graph() {
        // strict majority of pinned actions flips everyone; exactly half
        // does not
        let net = LayeredNetwork::complete(5).unwrap();
        let params = uniform(5, 0.5, 0.5);
        let r3 =
            compute_equilibrium(&net, &params, &nodeset([0, 1, 2]), &NodeSet::new()).unwrap();
        assert_eq!(r3.phi, 1);
        let r2 = compute_equilibrium(&net, &params, &nodeset([0, 1]), &NodeSet::new()).unwrap();
        assert_eq!(r2.phi, 0);
        assert_eq!(r2.a_f, vec![0, 1]);
    }

    #[test]
    fn opinion_control_threshold_on_complete_graph() {
        // lambda = 0.5, beta = 0.8: opinion pinning needs gamma > 5/11, so
        // 6 of 12 nodes succeed and 5 fail
        let net = LayeredNetwork::complete(12).unwrap();
        let params = uniform(12, 0.5, 0.8);
        let six: NodeSet = (0..6).collect();
        let five: NodeSet = (0..5).collect();
        assert!(consensus_guaranteed(&net, &params, &NodeSet::new(), &six).unwrap());
        assert!(!consensus_guaranteed(&net, &params, &NodeSet::new(), &five).unwrap());
    }

    #[test]
    fn solver_reuse_matches_fresh_solves() {
        let net = LayeredNetwork::random_regularized(9, 4).unwrap();
        let mut rng = rng_for(4, "solver-reuse");
        let lam: Vec<f64> = (0..9).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let beta: Vec<f64> = (0..9).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let params = ModelParams::new(lam, beta).unwrap();
        let cy = nodeset([1, 4]);
        let solver = OpinionSolver::new(&net, &params, &cy).unwrap();
        for trial in 0..20 {
            let x: Vec<i8> =
                (0..9).map(|i| if (trial >> (i % 8)) & 1 == 1 { 1 } else { -1 }).collect();
            let reused = solver.solve(&x).unwrap();
            let fresh = solve_opinion_equilibrium(&net, &params, &x, &cy).unwrap();
            for (u, v) in reused.iter().zip(&fresh) {
                assert!((u - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn set_growth_is_monotone_and_bounded() {
        let mut rng = rng_for(31, "growth");
        for trial in 0..50 {
            let n = 4 + trial % 7;
            let net = LayeredNetwork::random_regularized(n, 300 + trial as u64).unwrap();
            let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
            let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
            let params = ModelParams::new(lam, beta).unwrap();
            let cx: NodeSet = (0..n).filter(|_| rng.gen::<f64>() < 0.3).collect();
            let cy: NodeSet = (0..n).filter(|_| rng.gen::<f64>() < 0.3).collect();
            let report = compute_equilibrium(&net, &params, &cx, &cy).unwrap();
            assert!(report.set_sizes.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(report.set_sizes[0], cx.len());
            assert!(report.iterations <= n - cx.len() + 1);
            assert!(cx.iter().all(|i| report.a_f.contains(i)));
            // the reached state is an equilibrium with tight residuals
            let cand = CandidateEquilibrium {
                x_hat: report.x_star.clone(),
                y_hat: report.y_star.clone(),
            };
            assert!(check_equilibrium(&net, &params, &cand, &cx).is_equilibrium);
            let res = cand.opinion_residuals(&net, &params, &cy);
            assert!(res.iter().all(|&r| r <= 1e-10), "residuals {res:?}");
        }
    }

    #[test]
    fn watching_shortcut_agrees_with_full_verdict() {
        let mut rng = rng_for(77, "watch");
        for trial in 0..60 {
            let n = 5 + trial % 6;
            let net = LayeredNetwork::random_regularized(n, 500 + trial as u64).unwrap();
            let params = uniform(n, rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9));
            // build an admissible action-control set, then test removals
            let mut cx: NodeSet = (0..n).collect();
            let solver = OpinionSolver::new(&net, &params, &NodeSet::new()).unwrap();
            for r in 0..n {
                if rng.gen::<f64>() < 0.5 {
                    continue;
                }
                let mut without = cx.clone();
                if !without.remove(&r) {
                    continue;
                }
                let fast = consensus_watching(&net, &params, &solver, &without, r).unwrap();
                let full = compute_with_solver(&net, &params, &without, &solver).unwrap();
                assert_eq!(fast, full.phi == 1, "trial {trial} removal {r}");
                if fast {
                    cx = without;
                }
            }
        }
    }

    #[test]
    fn reducible_network_needs_override() {
        let mut m = nalgebra::DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        m[(2, 3)] = 1.0;
        m[(3, 2)] = 1.0;
        let net = LayeredNetwork::new(m.clone(), m).unwrap();
        let params = uniform(4, 0.5, 0.5);
        assert!(compute_equilibrium(&net, &params, &nodeset([0]), &NodeSet::new()).is_err());
        let net = net.allow_reducible();
        let report = compute_equilibrium(&net, &params, &nodeset([0]), &nodeset([0])).unwrap();
        // the pinned pair's clique flips, the disconnected clique cannot
        assert_eq!(report.phi, 0);
        assert_eq!(report.a_f, vec![0, 1]);
    }
}
