//! The coevolutionary engine: utilities, best responses, activation
//! schedules, and controlled simulation.
//!
//! Each node `i` holds an action `x_i` in `{-1,+1}` and an opinion `y_i` in
//! `[-1,+1]`. When activated it jointly maximizes a three-term utility:
//! a coordination payoff with observed actions, a quadratic penalty on
//! opinion disagreement with peers, and a quadratic penalty on its own
//! action-opinion inconsistency. The maximizer has a closed form: the next
//! action is the sign of a weighted score ([`action_score`], ties keep the
//! current action) and the next opinion is a convex combination of the
//! opinion neighbourhood average and the new action.
//!
//! A committed set pins actions ([`ControlSets::cx`]) and/or opinions
//! ([`ControlSets::cy`]) at `+1` from the first step onward; everyone else
//! starts from `(-1,-1)`. Under these initial conditions every trajectory
//! is componentwise nondecreasing, which [`simulate`] tracks and tests rely
//! on.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{LayeredNetwork, ModelParams};
use crate::rng::rng_for;
use crate::NodeSet;
use rand::seq::SliceRandom;
use rand::Rng;

/// Scores within this band of zero count as ties and keep the current
/// action; guards against roundoff on symmetric instances.
pub const TIE_BAND: f64 = 1e-12;

/// Default sup-norm opinion change per window below which a simulation is
/// considered settled.
pub const OPINION_TOL: f64 = 1e-10;

/// Joint population state at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    /// Actions, each exactly -1 or +1.
    pub x: Vec<i8>,
    /// Opinions in `[-1, +1]`.
    pub y: Vec<f64>,
    /// Time step.
    pub t: usize,
}

impl PopulationState {
    pub fn new(x: Vec<i8>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension(format!(
                "action vector has {} entries, opinion vector {}",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidInput(format!("x[{i}] = {} is not in {{-1,+1}}", x[i])));
        }
        if let Some(i) = y.iter().position(|&v| !(-1.0..=1.0).contains(&v)) {
            return Err(Error::InvalidInput(format!("y[{i}] = {} is outside [-1,1]", y[i])));
        }
        Ok(Self { x, y, t: 0 })
    }

    /// The all-`(-1,-1)` consensus.
    pub fn all_minus(n: usize) -> Self {
        Self { x: vec![-1; n], y: vec![-1.0; n], t: 0 }
    }

    /// The controlled starting condition: everything at `(-1,-1)` except the
    /// pinned entries, which sit at `+1`.
    pub fn initial(n: usize, control: &ControlSets) -> Self {
        let mut s = Self::all_minus(n);
        apply_control(&mut s, control);
        s
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Which nodes are committed, together with optional constraint sets for
/// the search problem. `cx` pins actions at `+1`, `cy` pins opinions;
/// when constraints are supplied they must contain the respective pinned
/// sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlSets {
    pub cx: NodeSet,
    pub cy: NodeSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vx: Option<NodeSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vy: Option<NodeSet>,
}

impl ControlSets {
    /// No committed nodes at all.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn pinned(cx: NodeSet, cy: NodeSet) -> Self {
        Self { cx, cy, vx: None, vy: None }
    }

    pub fn with_constraints(mut self, vx: NodeSet, vy: NodeSet) -> Self {
        self.vx = Some(vx);
        self.vy = Some(vy);
        self
    }

    /// All indices in range; pinned sets inside their constraint sets when
    /// constraints are active.
    pub fn check(&self, n: usize) -> Result<()> {
        for (name, set) in [("cx", &self.cx), ("cy", &self.cy)] {
            if let Some(&i) = set.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidInput(format!("{name} contains node {i} >= n = {n}")));
            }
        }
        for (name, set) in [("vx", &self.vx), ("vy", &self.vy)] {
            if let Some(set) = set {
                if let Some(&i) = set.iter().find(|&&i| i >= n) {
                    return Err(Error::InvalidInput(format!(
                        "{name} contains node {i} >= n = {n}"
                    )));
                }
            }
        }
        if let Some(vx) = &self.vx {
            if !self.cx.is_subset(vx) {
                return Err(Error::InvalidInput("cx is not contained in vx".into()));
            }
        }
        if let Some(vy) = &self.vy {
            if !self.cy.is_subset(vy) {
                return Err(Error::InvalidInput("cy is not contained in vy".into()));
            }
        }
        Ok(())
    }
}

/// Pin the committed entries of `state` at `+1`.
pub fn apply_control(state: &mut PopulationState, control: &ControlSets) {
    for &i in &control.cx {
        state.x[i] = 1;
    }
    for &j in &control.cy {
        state.y[j] = 1.0;
    }
}

/// Utility node `i` receives for the candidate pair `(action, opinion)`
/// against the current state of the population. Self-loop terms, when
/// present, read the node's *current* stored state, consistent with the
/// best-response closed form.
pub fn utility(
    net: &LayeredNetwork,
    params: &ModelParams,
    state: &PopulationState,
    i: usize,
    action: i8,
    opinion: f64,
) -> f64 {
    let n = net.n();
    let a = net.action_weights();
    let w = net.opinion_weights();
    let (lam, beta) = (params.lambda(i), params.beta(i));
    let xi = f64::from(action);
    let mut coord = 0.0;
    let mut disagree = 0.0;
    for j in 0..n {
        let xj = f64::from(state.x[j]);
        coord += a[(i, j)] * ((1.0 - xj) * (1.0 - xi) + (1.0 + xj) * (1.0 + xi));
        let d = opinion - state.y[j];
        disagree += w[(i, j)] * d * d;
    }
    let inconsistency = (xi - opinion) * (xi - opinion);
    lam * (1.0 - beta) / 2.0 * coord - beta * (1.0 - lam) * disagree - lam * beta * inconsistency
}

/// The signed score whose sign decides node `i`'s next action:
/// `2 b_i (1-l_i) * sum_j w_ij y_j + (1-b_i) * sum_j a_ij x_j`.
pub fn action_score(
    net: &LayeredNetwork,
    params: &ModelParams,
    state: &PopulationState,
    i: usize,
) -> f64 {
    let n = net.n();
    let a = net.action_weights();
    let w = net.opinion_weights();
    let mut sw = 0.0;
    let mut sa = 0.0;
    for j in 0..n {
        sw += w[(i, j)] * state.y[j];
        sa += a[(i, j)] * f64::from(state.x[j]);
    }
    2.0 * params.beta(i) * (1.0 - params.lambda(i)) * sw + (1.0 - params.beta(i)) * sa
}

/// Joint best response of node `i` against the current state, honouring the
/// pinned sets: a pinned action or opinion is `+1` regardless of
/// neighbours. Ties in the score keep the current action. The returned
/// opinion always lies in `[-1, 1]`.
pub fn best_response(
    net: &LayeredNetwork,
    params: &ModelParams,
    state: &PopulationState,
    control: &ControlSets,
    i: usize,
) -> (i8, f64) {
    let action = if control.cx.contains(&i) {
        1
    } else {
        let score = action_score(net, params, state, i);
        if score > TIE_BAND {
            1
        } else if score < -TIE_BAND {
            -1
        } else {
            state.x[i]
        }
    };
    let opinion = if control.cy.contains(&i) {
        1.0
    } else {
        let w = net.opinion_weights();
        let lam = params.lambda(i);
        let sw: f64 = (0..net.n()).map(|j| w[(i, j)] * state.y[j]).sum();
        ((1.0 - lam) * sw + lam * f64::from(action)).clamp(-1.0, 1.0)
    };
    (action, opinion)
}

/// Advance one step: every node in `active` simultaneously replaces its
/// state by its best response against the pre-step state, pins are
/// re-applied, and time advances.
pub fn step(
    net: &LayeredNetwork,
    params: &ModelParams,
    control: &ControlSets,
    state: &PopulationState,
    active: &[usize],
) -> PopulationState {
    let mut next = state.clone();
    for &i in active {
        let (xi, yi) = best_response(net, params, state, control, i);
        next.x[i] = xi;
        next.y[i] = yi;
    }
    apply_control(&mut next, control);
    next.t = state.t + 1;
    next
}

/// Increasing-differences gap of the utility: the difference-of-differences
/// `[u_i(hi; s_hi) - u_i(lo; s_hi)] - [u_i(hi; s_lo) - u_i(lo; s_lo)]`,
/// which is nonnegative whenever `hi >= lo` and `s_hi >= s_lo` componentwise
/// (the game is supermodular).
pub fn increasing_differences_gap(
    net: &LayeredNetwork,
    params: &ModelParams,
    i: usize,
    zi_hi: (i8, f64),
    zi_lo: (i8, f64),
    state_hi: &PopulationState,
    state_lo: &PopulationState,
) -> Result<f64> {
    if zi_hi.0 < zi_lo.0 || zi_hi.1 < zi_lo.1 {
        return Err(Error::InvalidInput("zi_hi must dominate zi_lo componentwise".into()));
    }
    let dominated = state_hi
        .x
        .iter()
        .zip(&state_lo.x)
        .all(|(h, l)| h >= l)
        && state_hi.y.iter().zip(&state_lo.y).all(|(h, l)| h >= l);
    if !dominated {
        return Err(Error::InvalidInput("state_hi must dominate state_lo componentwise".into()));
    }
    let diff_at = |s: &PopulationState| {
        utility(net, params, s, i, zi_hi.0, zi_hi.1) - utility(net, params, s, i, zi_lo.0, zi_lo.1)
    };
    Ok(diff_at(state_hi) - diff_at(state_lo))
}

/// Which nodes revise at each step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Everyone revises every step; window 1.
    Synchronous,
    /// One node per step in index order; window n.
    RoundRobin,
    /// One uniformly random node per step. The window guarantee is enforced
    /// by coverage repair: a node that has not activated within the window
    /// is force-included, so a step occasionally activates more than one
    /// node.
    RandomSingle {
        #[serde(skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
    },
    /// A uniformly random k-subset per step, with the same coverage repair.
    RandomSubset {
        k: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
    },
    /// A fixed sequence of activation sets, cycled.
    Explicit { sets: Vec<Vec<usize>>, window: usize },
}

/// A schedule plus the seed its stochastic kinds draw from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationSchedule {
    pub kind: ScheduleKind,
    pub seed: u64,
}

impl ActivationSchedule {
    pub fn synchronous() -> Self {
        Self { kind: ScheduleKind::Synchronous, seed: 0 }
    }

    pub fn round_robin() -> Self {
        Self { kind: ScheduleKind::RoundRobin, seed: 0 }
    }

    pub fn random_single(seed: u64) -> Self {
        Self { kind: ScheduleKind::RandomSingle { window: None }, seed }
    }

    pub fn random_subset(k: usize, seed: u64) -> Self {
        Self { kind: ScheduleKind::RandomSubset { k, window: None }, seed }
    }

    pub fn explicit(sets: Vec<Vec<usize>>, window: usize) -> Self {
        Self { kind: ScheduleKind::Explicit { sets, window }, seed: 0 }
    }

    /// The window length `T` this schedule guarantees on an n-node network:
    /// every `T` consecutive steps activate every node at least once.
    pub fn window(&self, n: usize) -> usize {
        match &self.kind {
            ScheduleKind::Synchronous => 1,
            ScheduleKind::RoundRobin => n,
            ScheduleKind::RandomSingle { window } => window.unwrap_or(2 * n),
            ScheduleKind::RandomSubset { k, window } => {
                window.unwrap_or_else(|| 2 * n.div_ceil((*k).max(1)))
            }
            ScheduleKind::Explicit { window, .. } => *window,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::TooFewNodes { got: 0, min: 1 });
        }
        match &self.kind {
            ScheduleKind::Synchronous | ScheduleKind::RoundRobin => Ok(()),
            ScheduleKind::RandomSingle { .. } => {
                let t = self.window(n);
                if t < n {
                    return Err(Error::InvalidInput(format!(
                        "window {t} cannot cover {n} nodes one at a time"
                    )));
                }
                Ok(())
            }
            ScheduleKind::RandomSubset { k, .. } => {
                if *k == 0 || *k > n {
                    return Err(Error::InvalidInput(format!("subset size {k} not in 1..={n}")));
                }
                let t = self.window(n);
                if t * k < n {
                    return Err(Error::InvalidInput(format!(
                        "window {t} of {k}-subsets cannot cover {n} nodes"
                    )));
                }
                Ok(())
            }
            ScheduleKind::Explicit { sets, window } => {
                if sets.is_empty() || *window == 0 {
                    return Err(Error::InvalidInput("explicit schedule needs sets and a window".into()));
                }
                for (s, set) in sets.iter().enumerate() {
                    if let Some(&i) = set.iter().find(|&&i| i >= n) {
                        return Err(Error::InvalidInput(format!(
                            "explicit set {s} activates node {i} >= n = {n}"
                        )));
                    }
                }
                // check the window property over one full cycle
                let t = *window;
                let len = sets.len();
                for start in 0..len {
                    let mut covered: NodeSet = NodeSet::new();
                    for off in 0..t {
                        covered.extend(sets[(start + off) % len].iter().copied());
                    }
                    if covered.len() != n {
                        return Err(Error::InvalidInput(format!(
                            "explicit schedule misses nodes in the window starting at step {start}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Stateful generator of activation sets for one run.
pub struct Scheduler {
    kind: ScheduleKind,
    n: usize,
    window: usize,
    t: usize,
    last_active: Vec<isize>,
    rng: rand_chacha::ChaCha8Rng,
}

impl Scheduler {
    pub fn new(schedule: &ActivationSchedule, n: usize) -> Result<Self> {
        schedule.validate(n)?;
        Ok(Self {
            kind: schedule.kind.clone(),
            n,
            window: schedule.window(n),
            t: 0,
            last_active: vec![-1; n],
            rng: rng_for(schedule.seed, "schedule"),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Activation set for the current step, sorted.
    pub fn next_active(&mut self) -> Vec<usize> {
        let t = self.t as isize;
        let w = self.window as isize;
        let mut active = match &self.kind {
            ScheduleKind::Synchronous => (0..self.n).collect::<Vec<_>>(),
            ScheduleKind::RoundRobin => vec![self.t % self.n],
            ScheduleKind::RandomSingle { .. } => {
                let mut forced: Vec<usize> =
                    (0..self.n).filter(|&i| t - self.last_active[i] >= w).collect();
                if forced.is_empty() {
                    forced.push(self.rng.gen_range(0..self.n));
                }
                forced
            }
            ScheduleKind::RandomSubset { k, .. } => {
                let mut forced: Vec<usize> =
                    (0..self.n).filter(|&i| t - self.last_active[i] >= w).collect();
                if forced.len() < *k {
                    let mut rest: Vec<usize> =
                        (0..self.n).filter(|i| !forced.contains(i)).collect();
                    rest.shuffle(&mut self.rng);
                    forced.extend(rest.into_iter().take(k - forced.len()));
                    forced.sort_unstable();
                }
                forced
            }
            ScheduleKind::Explicit { sets, .. } => {
                let mut s = sets[self.t % sets.len()].clone();
                s.sort_unstable();
                s.dedup();
                s
            }
        };
        active.sort_unstable();
        for &i in &active {
            self.last_active[i] = t;
        }
        self.t += 1;
        active
    }
}

/// Simulation controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOptions {
    /// Maximum number of steps.
    pub horizon: usize,
    /// Keep a snapshot every `stride` steps (the final state is always
    /// available separately).
    pub stride: usize,
    /// Declare convergence when actions have been constant for one full
    /// window and the sup-norm opinion change stayed below this for a full
    /// window.
    pub opinion_tol: f64,
}

impl SimOptions {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, stride: 1, opinion_tol: OPINION_TOL }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum StopReason {
    /// Actions constant and opinions settled for one full window.
    Converged { step: usize },
    HorizonExhausted,
}

/// One recorded snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub t: usize,
    pub x: Vec<i8>,
    pub y: Vec<f64>,
}

/// Result of [`simulate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: PopulationState,
    pub steps_run: usize,
    pub stop: StopReason,
    /// Window length the schedule guaranteed.
    pub window: usize,
    /// True when no action ever decreased.
    pub x_monotone: bool,
    /// Largest single-step opinion decrease observed (0 when none).
    pub max_y_backstep: f64,
}

/// Run the controlled dynamics from the pinned starting condition.
/// Deterministic given the schedule seed.
pub fn simulate(
    net: &LayeredNetwork,
    params: &ModelParams,
    control: &ControlSets,
    schedule: &ActivationSchedule,
    opts: &SimOptions,
) -> Result<Trajectory> {
    net.ensure_stochastic()?;
    params.check_len(net.n())?;
    control.check(net.n())?;
    if opts.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let n = net.n();
    let mut scheduler = Scheduler::new(schedule, n)?;
    let window = scheduler.window();

    let mut state = PopulationState::initial(n, control);
    let mut samples = vec![Sample { t: 0, x: state.x.clone(), y: state.y.clone() }];
    let mut x_monotone = true;
    let mut max_y_backstep: f64 = 0.0;
    let mut steps_since_x_change = 0usize;
    let mut dy_window: Vec<f64> = Vec::with_capacity(window);
    let mut stop = StopReason::HorizonExhausted;
    let mut steps_run = 0;

    for _ in 0..opts.horizon {
        let active = scheduler.next_active();
        let next = step(net, params, control, &state, &active);
        steps_run += 1;

        let mut x_changed = false;
        let mut dy_max: f64 = 0.0;
        for i in 0..n {
            if next.x[i] != state.x[i] {
                x_changed = true;
                if next.x[i] < state.x[i] {
                    x_monotone = false;
                }
            }
            let dy = next.y[i] - state.y[i];
            dy_max = dy_max.max(dy.abs());
            if dy < 0.0 {
                max_y_backstep = max_y_backstep.max(-dy);
            }
        }
        steps_since_x_change = if x_changed { 0 } else { steps_since_x_change + 1 };
        if dy_window.len() == window {
            dy_window.remove(0);
        }
        dy_window.push(dy_max);

        state = next;
        if state.t % opts.stride == 0 {
            samples.push(Sample { t: state.t, x: state.x.clone(), y: state.y.clone() });
        }

        if steps_since_x_change >= window
            && dy_window.len() == window
            && dy_window.iter().all(|&d| d < opts.opinion_tol)
        {
            stop = StopReason::Converged { step: state.t };
            break;
        }
    }

    if samples.last().map(|s| s.t) != Some(state.t) {
        samples.push(Sample { t: state.t, x: state.x.clone(), y: state.y.clone() });
    }
    Ok(Trajectory {
        samples,
        final_state: state,
        steps_run,
        stop,
        window,
        x_monotone,
        max_y_backstep,
    })
}

/// Write a trajectory as `t,node,x,y` CSV rows.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,node,x,y")?;
    for s in &traj.samples {
        for i in 0..s.x.len() {
            writeln!(out, "{},{},{},{}", s.t, i, s.x[i], s.y[i])?;
        }
    }
    Ok(())
}
