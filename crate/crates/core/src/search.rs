//! Minimal-control-set search and baselines.
//!
//! Finding a smallest committed set whose pinning forces consensus is
//! NP-complete, and the objective is not submodular, so neither exhaustion
//! nor plain greedy scale. The workhorse here is a Markov chain over
//! *admissible* sets (sets whose verdict is positive): starting from all
//! controllable nodes, each step picks a uniformly random controllable node
//! and either drops it (if the smaller set stays admissible) or, when the
//! node is outside the current set, re-inserts it with probability
//! `epsilon`. Supersets of admissible sets are admissible, so the chain
//! never leaves the admissible space; its stationary distribution weights a
//! set of size k proportionally to `epsilon^k`, concentrating on the
//! minimum-cardinality sets as `epsilon` shrinks.
//!
//! A subset-enumeration oracle ([`brute_force_minimum`]) certifies small
//! instances, [`complete_graph_thresholds`] evaluates the closed forms
//! available on homogeneous complete graphs, and
//! [`greedy_centrality_baseline`] is the classical rank-by-centrality
//! heuristic the chain is compared against.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    compute_with_solver, consensus_guaranteed, consensus_watching, OpinionSolver,
};
use crate::error::{Error, Result};
use crate::net::{LayeredNetwork, ModelParams};
use crate::rng::rng_for;
use crate::NodeSet;

/// Split a combined control set along the constraint sets: nodes whose
/// action can be controlled go to the pinned-action side, nodes whose
/// opinion can be controlled to the pinned-opinion side (both, when
/// allowed by both).
pub fn split_control(c: &NodeSet, vx: &NodeSet, vy: &NodeSet) -> Result<(NodeSet, NodeSet)> {
    if let Some(&i) = c.iter().find(|i| !vx.contains(i) && !vy.contains(i)) {
        return Err(Error::InvalidInput(format!(
            "control set contains node {i} outside the controllable set"
        )));
    }
    Ok((c.intersection(vx).copied().collect(), c.intersection(vy).copied().collect()))
}

/// Is `c` a feasible control set, i.e. does pinning `(c & vx, c & vy)`
/// guarantee consensus?
pub fn is_admissible(
    net: &LayeredNetwork,
    params: &ModelParams,
    c: &NodeSet,
    vx: &NodeSet,
    vy: &NodeSet,
) -> Result<bool> {
    let (cx, cy) = split_control(c, vx, vy)?;
    consensus_guaranteed(net, params, &cx, &cy)
}

/// Knobs of the Markov-chain search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Re-insertion probability in (0, 1]. Smaller values concentrate the
    /// chain on minimal sets but slow down mixing.
    pub epsilon: f64,
    /// Iteration budget.
    pub max_iters: usize,
    pub seed: u64,
    /// Optional per-iteration geometric decay of `epsilon`, approximating
    /// the small-`epsilon` limit while keeping early exploration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_decay: Option<f64>,
}

impl SearchConfig {
    pub fn new(epsilon: f64, max_iters: usize, seed: u64) -> Self {
        Self { epsilon, max_iters, seed, epsilon_decay: None }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon = {} is outside (0, 1]",
                self.epsilon
            )));
        }
        if let Some(d) = self.epsilon_decay {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "epsilon decay = {d} is outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// What one chain iteration did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Remove,
    Insert,
    Hold,
}

impl std::fmt::Display for MoveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MoveKind::Remove => write!(f, "remove"),
            MoveKind::Insert => write!(f, "insert"),
            MoveKind::Hold => write!(f, "hold"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub current_size: usize,
    pub best_size: usize,
    #[serde(rename = "move")]
    pub mv: MoveKind,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchTrace {
    pub rows: Vec<TraceRow>,
    /// Iteration at which the final best size was first reached (0 when the
    /// starting set was never improved).
    pub best_first_hit: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    /// Smallest admissible set seen.
    pub best: NodeSet,
    /// Its split along the constraint sets.
    pub best_cx: NodeSet,
    pub best_cy: NodeSet,
    pub trace: SearchTrace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum SearchOutcome {
    /// Even controlling every controllable node does not reach consensus.
    Infeasible,
    Found(SearchResult),
}

/// The Markov chain over admissible control sets. Each chain owns its
/// generator and its memo table of admissibility verdicts, so independent
/// chains can run concurrently over the same shared network.
pub struct Chain<'a> {
    net: &'a LayeredNetwork,
    params: &'a ModelParams,
    vx: &'a NodeSet,
    vy: &'a NodeSet,
    vstar: Vec<usize>,
    current: NodeSet,
    epsilon: f64,
    decay: Option<f64>,
    memo: HashMap<Vec<u32>, bool>,
    rng: ChaCha8Rng,
    /// Reusable factorization when no opinions are controllable (the
    /// pinned-opinion set is then always empty).
    action_solver: Option<OpinionSolver>,
}

impl<'a> Chain<'a> {
    /// Start the chain at the full controllable set. Returns `Ok(None)`
    /// when that set is inadmissible, i.e. the instance is infeasible.
    pub fn new(
        net: &'a LayeredNetwork,
        params: &'a ModelParams,
        vx: &'a NodeSet,
        vy: &'a NodeSet,
        epsilon: f64,
        epsilon_decay: Option<f64>,
        seed: u64,
    ) -> Result<Option<Self>> {
        net.ensure_ready()?;
        params.check_len(net.n())?;
        for (name, set) in [("vx", vx), ("vy", vy)] {
            if let Some(&i) = set.iter().find(|&&i| i >= net.n()) {
                return Err(Error::InvalidInput(format!("{name} contains node {i} >= n")));
            }
        }
        let vstar: Vec<usize> = vx.union(vy).copied().collect();
        if vstar.is_empty() {
            return Err(Error::InvalidInput("no controllable nodes".into()));
        }
        let action_solver = if vy.is_empty() {
            Some(OpinionSolver::new(net, params, &NodeSet::new())?)
        } else {
            None
        };
        let mut chain = Self {
            net,
            params,
            vx,
            vy,
            vstar: vstar.clone(),
            current: vstar.iter().copied().collect(),
            epsilon,
            decay: epsilon_decay,
            memo: HashMap::new(),
            rng: rng_for(seed, "chain"),
            action_solver,
        };
        let start = chain.current.clone();
        if !chain.admissible(&start)? {
            return Ok(None);
        }
        Ok(Some(chain))
    }

    pub fn current(&self) -> &NodeSet {
        &self.current
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Reset the chain to a specific admissible set.
    pub fn set_current(&mut self, c: NodeSet) -> Result<()> {
        if !self.admissible(&c)? {
            return Err(Error::InvalidInput("set is not admissible".into()));
        }
        self.current = c;
        Ok(())
    }

    fn key(c: &NodeSet) -> Vec<u32> {
        c.iter().map(|&i| i as u32).collect()
    }

    fn admissible(&mut self, c: &NodeSet) -> Result<bool> {
        let key = Self::key(c);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let (cx, cy) = split_control(c, self.vx, self.vy)?;
        let verdict = match &self.action_solver {
            Some(solver) => compute_with_solver(self.net, self.params, &cx, solver)?.phi == 1,
            None => {
                let solver = OpinionSolver::new(self.net, self.params, &cy)?;
                compute_with_solver(self.net, self.params, &cx, &solver)?.phi == 1
            }
        };
        self.memo.insert(key, verdict);
        Ok(verdict)
    }

    /// Removal admissibility check; under pure action control the growing
    /// sweep can stop as soon as the removed node itself would switch back.
    fn removal_admissible(&mut self, cand: &NodeSet, removed: usize) -> Result<bool> {
        let key = Self::key(cand);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let verdict = match &self.action_solver {
            Some(solver) => consensus_watching(self.net, self.params, solver, cand, removed)?,
            None => {
                let (cx, cy) = split_control(cand, self.vx, self.vy)?;
                let solver = OpinionSolver::new(self.net, self.params, &cy)?;
                compute_with_solver(self.net, self.params, &cx, &solver)?.phi == 1
            }
        };
        self.memo.insert(key, verdict);
        Ok(verdict)
    }

    /// One transition: pick a controllable node uniformly at random; drop
    /// it if the smaller set stays admissible, re-insert it with
    /// probability `epsilon` if it is outside. Everything else holds.
    pub fn step(&mut self) -> Result<MoveKind> {
        let r = self.vstar[self.rng.gen_range(0..self.vstar.len())];
        let mv = if self.current.contains(&r) {
            let mut cand = self.current.clone();
            cand.remove(&r);
            if self.removal_admissible(&cand, r)? {
                self.current = cand;
                MoveKind::Remove
            } else {
                MoveKind::Hold
            }
        } else if self.rng.gen::<f64>() < self.epsilon {
            self.current.insert(r);
            MoveKind::Insert
        } else {
            MoveKind::Hold
        };
        if let Some(d) = self.decay {
            self.epsilon *= d;
        }
        Ok(mv)
    }
}

/// Search for a smallest feasible control set inside the constraint sets.
/// Starts from all controllable nodes, reports infeasibility immediately
/// when even that set fails, and otherwise runs the chain for the full
/// budget, tracking the best set seen. Deterministic given the seed.
pub fn minimize_control_set(
    net: &LayeredNetwork,
    params: &ModelParams,
    vx: &NodeSet,
    vy: &NodeSet,
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    config.check()?;
    let Some(mut chain) =
        Chain::new(net, params, vx, vy, config.epsilon, config.epsilon_decay, config.seed)?
    else {
        return Ok(SearchOutcome::Infeasible);
    };
    let mut best = chain.current().clone();
    let mut trace = SearchTrace { rows: Vec::with_capacity(config.max_iters), best_first_hit: 0 };
    for iter in 1..=config.max_iters {
        let mv = chain.step()?;
        if chain.current().len() < best.len() {
            best = chain.current().clone();
            trace.best_first_hit = iter;
        }
        trace.rows.push(TraceRow {
            iter,
            current_size: chain.current().len(),
            best_size: best.len(),
            mv,
        });
    }
    let (best_cx, best_cy) = split_control(&best, vx, vy)?;
    Ok(SearchOutcome::Found(SearchResult { best, best_cx, best_cy, trace }))
}

/// Enumerate subsets of the controllable set by increasing cardinality and
/// return every admissible set of the first feasible cardinality. An empty
/// result means the instance is infeasible up to the cap. Exponential:
/// guarded by the 20-node default cap.
pub fn brute_force_minimum(
    net: &LayeredNetwork,
    params: &ModelParams,
    vx: &NodeSet,
    vy: &NodeSet,
    cardinality_cap: Option<usize>,
) -> Result<Vec<NodeSet>> {
    net.ensure_ready()?;
    params.check_len(net.n())?;
    let vstar: Vec<usize> = vx.union(vy).copied().collect();
    if cardinality_cap.is_none() && vstar.len() > 20 {
        return Err(Error::EnumerationCap(vstar.len()));
    }
    let kmax = cardinality_cap.unwrap_or(vstar.len()).min(vstar.len());
    let action_solver = if vy.is_empty() {
        Some(OpinionSolver::new(net, params, &NodeSet::new())?)
    } else {
        None
    };
    let check = |c: &NodeSet| -> Result<bool> {
        let (cx, cy) = split_control(c, vx, vy)?;
        match &action_solver {
            Some(solver) => Ok(compute_with_solver(net, params, &cx, solver)?.phi == 1),
            None => {
                let solver = OpinionSolver::new(net, params, &cy)?;
                Ok(compute_with_solver(net, params, &cx, &solver)?.phi == 1)
            }
        }
    };
    use itertools::Itertools;
    for k in 0..=kmax {
        let mut found = Vec::new();
        for combo in vstar.iter().copied().combinations(k) {
            let c: NodeSet = combo.into_iter().collect();
            if check(&c)? {
                found.push(c);
            }
        }
        if !found.is_empty() {
            return Ok(found);
        }
    }
    Ok(Vec::new())
}

/// The three intervention shapes on a homogeneous complete graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Pin only opinions.
    Opinion,
    /// Pin only actions.
    Action,
    /// Pin both variables of each controlled node.
    Joint,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opinion" => Ok(Self::Opinion),
            "action" => Ok(Self::Action),
            "joint" => Ok(Self::Joint),
            other => Err(Error::InvalidInput(format!("unknown scenario `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Opinion => write!(f, "opinion"),
            Self::Action => write!(f, "action"),
            Self::Joint => write!(f, "joint"),
        }
    }
}

/// Signed margin of the scenario's strict feasibility inequality on a
/// homogeneous complete graph, as a function of the controlled fraction
/// `gamma = |C|/(n-1)`. Positive means the fraction suffices.
pub fn scenario_margin(scenario: Scenario, lambda: f64, beta: f64, gamma: f64) -> f64 {
    let d = gamma + lambda - lambda * gamma;
    match scenario {
        Scenario::Opinion => {
            beta * (3.0 * (1.0 - lambda) * gamma
                + 2.0 * lambda * gamma * (1.0 - lambda)
                + lambda * (2.0 * lambda - 1.0))
                / d
                - 1.0
        }
        Scenario::Action => gamma - 0.5,
        Scenario::Joint => {
            2.0 * beta * (1.0 - lambda) * ((gamma - lambda + lambda * gamma) / d)
                + (1.0 - beta) * (2.0 * gamma - 1.0)
        }
    }
}

/// Closed-form feasibility verdict on a homogeneous complete graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompleteGraphVerdict {
    pub scenario: Scenario,
    pub n: usize,
    /// Whether any controlled fraction `<= 1` suffices.
    pub feasible: bool,
    /// Smallest sufficient control-set size, when feasible.
    pub min_size: Option<usize>,
    /// The matching fraction `min_size/(n-1)`.
    pub min_gamma: Option<f64>,
}

/// Scan `gamma` over the realizable grid `{0, 1/(n-1), ..., 1}` and return
/// the smallest control-set size whose strict margin is positive.
pub fn complete_graph_thresholds(
    lambda: f64,
    beta: f64,
    n: usize,
    scenario: Scenario,
) -> Result<CompleteGraphVerdict> {
    if n < 2 {
        return Err(Error::TooFewNodes { got: n, min: 2 });
    }
    ModelParams::uniform(1, lambda, beta)?;
    let m = (n - 1) as f64;
    for c in 0..n {
        let gamma = c as f64 / m;
        if scenario_margin(scenario, lambda, beta, gamma) > 0.0 {
            return Ok(CompleteGraphVerdict {
                scenario,
                n,
                feasible: true,
                min_size: Some(c),
                min_gamma: Some(gamma),
            });
        }
    }
    Ok(CompleteGraphVerdict { scenario, n, feasible: false, min_size: None, min_gamma: None })
}

/// One cell of a parameter sweep; `min_gamma` is infinite when no fraction
/// `<= 1` is feasible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub beta: f64,
    pub min_gamma: f64,
}

/// Evaluate the minimal feasible fraction on each cell of a parameter grid.
pub fn sweep_complete(
    lambda_grid: &[f64],
    beta_grid: &[f64],
    n: usize,
    scenario: Scenario,
) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::with_capacity(lambda_grid.len() * beta_grid.len());
    for &lambda in lambda_grid {
        for &beta in beta_grid {
            let v = complete_graph_thresholds(lambda, beta, n, scenario)?;
            cells.push(SweepCell {
                lambda,
                beta,
                min_gamma: v.min_gamma.unwrap_or(f64::INFINITY),
            });
        }
    }
    Ok(cells)
}

/// Write sweep cells as `lambda,beta,min_gamma` CSV rows.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], mut out: W) -> std::io::Result<()> {
    writeln!(out, "lambda,beta,min_gamma")?;
    for c in cells {
        writeln!(out, "{},{},{}", c.lambda, c.beta, c.min_gamma)?;
    }
    Ok(())
}

/// Write a search trace as `iter,current_size,best_size,move` CSV rows.
pub fn write_trace_csv<W: Write>(trace: &SearchTrace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "iter,current_size,best_size,move")?;
    for r in &trace.rows {
        writeln!(out, "{},{},{},{}", r.iter, r.current_size, r.best_size, r.mv)?;
    }
    Ok(())
}

/// Which layer feeds the centrality ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityLayer {
    Action,
    Opinion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralityConfig {
    pub layer: CentralityLayer,
    /// Attenuation; defaults to `0.85 / spectral radius` when absent and
    /// must stay strictly below `1 / spectral radius`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for CentralityConfig {
    fn default() -> Self {
        Self { layer: CentralityLayer::Action, alpha: None }
    }
}

/// Spectral-radius estimate by power iteration on the entrywise-absolute
/// matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let abs = m.map(f64::abs);
    let mut rho = 0.0;
    for _ in 0..200 {
        let next = &abs * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        rho = norm / v.norm();
        v = next / norm;
    }
    rho
}

/// Influence-oriented Bonacich/Katz scores: `s = 1 + alpha * M^T s`, so a
/// node's score accumulates over the rows it carries weight in (the nodes
/// it influences).
pub fn bonacich_centrality(
    net: &LayeredNetwork,
    layer: CentralityLayer,
    alpha: Option<f64>,
) -> Result<Vec<f64>> {
    let m = match layer {
        CentralityLayer::Action => net.action_weights(),
        CentralityLayer::Opinion => net.opinion_weights(),
    };
    let rho = spectral_radius(m);
    let alpha = alpha.unwrap_or(0.85 / rho.max(f64::MIN_POSITIVE));
    if !(alpha > 0.0) || alpha * rho >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "attenuation {alpha} is not inside (0, 1/spectral radius = {})",
            1.0 / rho
        )));
    }
    let n = net.n();
    let system = DMatrix::identity(n, n) - m.transpose() * alpha;
    let rhs = DVector::from_element(n, 1.0);
    let sol = nalgebra::LU::new(system).solve(&rhs).ok_or(Error::Singular)?;
    Ok(sol.iter().copied().collect())
}

/// Outcome of the greedy baseline: the centrality-ordered controllable
/// nodes and the first admissible prefix, if any.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyOutcome {
    /// Controllable nodes in decreasing centrality order (ties by index).
    pub ranking: Vec<usize>,
    /// First admissible prefix of the ranking; `None` when no prefix is
    /// admissible.
    pub prefix: Option<NodeSet>,
}

/// Rank controllable nodes by centrality and grow a control set in that
/// order until it becomes admissible.
pub fn greedy_centrality_baseline(
    net: &LayeredNetwork,
    params: &ModelParams,
    vx: &NodeSet,
    vy: &NodeSet,
    config: &CentralityConfig,
) -> Result<GreedyOutcome> {
    net.ensure_ready()?;
    params.check_len(net.n())?;
    let scores = bonacich_centrality(net, config.layer, config.alpha)?;
    let mut ranking: Vec<usize> = vx.union(vy).copied().collect();
    ranking.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let action_solver = if vy.is_empty() {
        Some(OpinionSolver::new(net, params, &NodeSet::new())?)
    } else {
        None
    };
    let mut prefix = NodeSet::new();
    for &node in &ranking {
        prefix.insert(node);
        let (cx, cy) = split_control(&prefix, vx, vy)?;
        let ok = match &action_solver {
            Some(solver) => compute_with_solver(net, params, &cx, solver)?.phi == 1,
            None => {
                let solver = OpinionSolver::new(net, params, &cy)?;
                compute_with_solver(net, params, &cx, &solver)?.phi == 1
            }
        };
        if ok {
            return Ok(GreedyOutcome { ranking, prefix: Some(prefix) });
        }
    }
    Ok(GreedyOutcome { ranking, prefix: None })
}
