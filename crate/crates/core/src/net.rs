//! Two-layer influence networks and per-node model parameters.
//!
//! A [`LayeredNetwork`] holds two n-by-n nonnegative weight matrices over the
//! same node set: `A` (whose entry `a[i][j]` weights how much node `i`
//! observes node `j`'s action) and `W` (how much `i` weighs `j`'s opinion).
//! The dynamics assume both matrices are row-stochastic, and most verdicts
//! additionally assume each layer is strongly connected (an edge `j -> i`
//! exists when the weight of `j` in `i`'s row is positive).
//!
//! Construction never silently repairs data: [`LayeredNetwork::validate`]
//! reports row-sum deviations, negative entries, and connectivity, and the
//! algorithm entry points refuse networks that fail those checks (with an
//! explicit override for reducible networks, which can always be handled by
//! controlling each strongly connected component separately).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Absolute per-row tolerance for the row-stochasticity check. Text files
/// round; exact sums are not required.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// What to do with a row whose weights sum to zero during normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroRowPolicy {
    /// Fail with [`Error::ZeroRow`].
    Reject,
    /// Replace the row by a unit self-loop.
    SelfLoop,
}

/// Two row-stochastic weight layers over a common node set.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredNetwork {
    n: usize,
    a: DMatrix<f64>,
    w: DMatrix<f64>,
    labels: Option<Vec<String>>,
    reducible_ok: bool,
}

impl LayeredNetwork {
    /// Wrap two square matrices of equal size. Shape is enforced here;
    /// stochasticity and connectivity are reported by [`Self::validate`]
    /// and enforced by the algorithms that need them.
    pub fn new(a: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "action layer is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        if w.nrows() != w.ncols() {
            return Err(Error::Dimension(format!(
                "opinion layer is {}x{}, expected square",
                w.nrows(),
                w.ncols()
            )));
        }
        if a.nrows() != w.nrows() {
            return Err(Error::Dimension(format!(
                "layer sizes differ: action {}, opinion {}",
                a.nrows(),
                w.nrows()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::TooFewNodes { got: 0, min: 1 });
        }
        let n = a.nrows();
        Ok(Self { n, a, w, labels: None, reducible_ok: false })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Action-influence weights (`a[i][j]`, influence of `j`'s action on `i`).
    pub fn action_weights(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Opinion-influence weights (`w[i][j]`).
    pub fn opinion_weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::Dimension(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Accept this network in algorithms even if a layer is not strongly
    /// connected. Consensus verdicts then apply per reachable structure and
    /// the caller takes responsibility for interpreting them.
    pub fn allow_reducible(mut self) -> Self {
        self.reducible_ok = true;
        self
    }

    pub fn reducible_allowed(&self) -> bool {
        self.reducible_ok
    }

    /// Homogeneous complete graph: off-diagonal weights `1/(n-1)`, zero
    /// diagonal, identical layers.
    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes { got: n, min: 2 });
        }
        let off = 1.0 / (n as f64 - 1.0);
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { off });
        Self::new(m.clone(), m)
    }

    /// Ring: each node splits its weight equally over its two neighbours.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes { got: n, min: 2 });
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, (i + 1) % n)] += 0.5;
            m[(i, (i + n - 1) % n)] += 0.5;
        }
        Self::new(m.clone(), m)
    }

    /// Star with hub 0: leaves put all weight on the hub, the hub spreads
    /// uniformly over the leaves.
    pub fn star(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes { got: n, min: 2 });
        }
        let mut m = DMatrix::zeros(n, n);
        let leaf_w = 1.0 / (n as f64 - 1.0);
        for j in 1..n {
            m[(0, j)] = leaf_w;
            m[(j, 0)] = 1.0;
        }
        Self::new(m.clone(), m)
    }

    /// Random layers made strongly connected by superimposing a ring, with a
    /// few extra random edges per node. Deterministic given the seed; the two
    /// layers use independent streams.
    pub fn random_regularized(n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes { got: n, min: 2 });
        }
        let a = random_layer(n, seed, "layer-a")?;
        let w = random_layer(n, seed, "layer-w")?;
        Self::new(a, w)
    }

    /// Full structural report: row-sum deviations, bad entries, and
    /// strong-connectivity verdicts per layer.
    pub fn validate(&self) -> ValidationReport {
        let action = layer_report(&self.a);
        let opinion = layer_report(&self.w);
        let passed = action.passed() && opinion.passed();
        ValidationReport { n: self.n, action, opinion, passed }
    }

    /// Both layers nonnegative with unit row sums (within [`ROW_SUM_TOL`]).
    pub fn ensure_stochastic(&self) -> Result<()> {
        ensure_layer_stochastic(&self.a, "action")?;
        ensure_layer_stochastic(&self.w, "opinion")
    }

    /// Checks required by the equilibrium and search algorithms:
    /// stochastic layers and, unless overridden, strong connectivity.
    pub fn ensure_ready(&self) -> Result<()> {
        self.ensure_stochastic()?;
        if !self.reducible_ok {
            if !strongly_connected(&self.a) {
                return Err(Error::NotStronglyConnected { layer: "action" });
            }
            if !strongly_connected(&self.w) {
                return Err(Error::NotStronglyConnected { layer: "opinion" });
            }
        }
        Ok(())
    }

    /// Deterministic text dump with 17 significant digits per entry, good
    /// for bit-exact round trips via [`Self::read_dump`].
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "coevo-net 1")?;
        writeln!(out, "n {}", self.n)?;
        if let Some(labels) = &self.labels {
            writeln!(out, "labels {}", labels.join(" "))?;
        }
        for (name, m) in [("A", &self.a), ("W", &self.w)] {
            writeln!(out, "{name}")?;
            for i in 0..self.n {
                let row: Vec<String> =
                    (0..self.n).map(|j| format!("{:.16e}", m[(i, j)])).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    /// Parse a dump produced by [`Self::write_dump`].
    pub fn read_dump<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::Parse { line: i + 1, msg: e.to_string() }),
                None => Err(Error::Parse { line: 0, msg: "unexpected end of dump".into() }),
            }
        };
        let (ln, header) = next()?;
        if header.trim() != "coevo-net 1" {
            return Err(Error::Parse { line: ln, msg: format!("bad header `{header}`") });
        }
        let (ln, nline) = next()?;
        let n: usize = nline
            .strip_prefix("n ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse { line: ln, msg: format!("bad node count `{nline}`") })?;
        let (mut ln, mut line) = next()?;
        let labels = if let Some(rest) = line.strip_prefix("labels ") {
            let labels: Vec<String> = rest.split_whitespace().map(String::from).collect();
            (ln, line) = next()?;
            Some(labels)
        } else {
            None
        };
        fn read_matrix(
            next: &mut impl FnMut() -> Result<(usize, String)>,
            tag: &str,
            ln: usize,
            line: &str,
            n: usize,
        ) -> Result<DMatrix<f64>> {
            if line.trim() != tag {
                return Err(Error::Parse { line: ln, msg: format!("expected `{tag}`") });
            }
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                let (ln, row) = next()?;
                let mut cols = 0;
                for (j, tok) in row.split_whitespace().enumerate() {
                    if j >= n {
                        return Err(Error::Parse { line: ln, msg: "too many columns".into() });
                    }
                    m[(i, j)] = tok.parse().map_err(|e| Error::Parse {
                        line: ln,
                        msg: format!("bad weight `{tok}`: {e}"),
                    })?;
                    cols += 1;
                }
                if cols != n {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("row has {cols} columns, expected {n}"),
                    });
                }
            }
            Ok(m)
        }
        let a = read_matrix(&mut next, "A", ln, &line, n)?;
        (ln, line) = next()?;
        let w = read_matrix(&mut next, "W", ln, &line, n)?;
        let mut net = Self::new(a, w)?;
        if let Some(labels) = labels {
            net = net.with_labels(labels)?;
        }
        Ok(net)
    }

    /// Ingest a shared edge list: one list defines both layers (`A == W`).
    pub fn from_edge_list<R: BufRead>(reader: R, opts: &EdgeListOptions) -> Result<Self> {
        let recs = parse_edge_records(reader)?;
        build_network(&recs, None, opts)
    }

    /// Ingest split edge lists: one per layer, over a common id space.
    pub fn from_edge_lists<R1: BufRead, R2: BufRead>(
        action: R1,
        opinion: R2,
        opts: &EdgeListOptions,
    ) -> Result<Self> {
        let ra = parse_edge_records(action)?;
        let rw = parse_edge_records(opinion)?;
        build_network(&ra, Some(&rw), opts)
    }
}

/// Options for edge-list ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeListOptions {
    /// Treat each record as undirected: its weight contributes to both
    /// directions (self-loops contribute once).
    pub undirected: bool,
    /// What to do with nodes that end up with no outgoing weight.
    pub zero_row_policy: ZeroRowPolicy,
    /// Keep only the largest strongly connected component before
    /// normalization. Component membership is computed on edges present in
    /// both layers, so the restriction guarantees each layer is strongly
    /// connected on the kept nodes.
    pub restrict_largest_scc: bool,
}

impl Default for EdgeListOptions {
    fn default() -> Self {
        Self {
            undirected: true,
            zero_row_policy: ZeroRowPolicy::Reject,
            restrict_largest_scc: false,
        }
    }
}

/// Divide every row by its sum. Zero rows follow the policy.
pub fn normalize_rows(m: &mut DMatrix<f64>, policy: ZeroRowPolicy) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        let s: f64 = (0..m.ncols()).map(|j| m[(i, j)]).sum();
        if s > 0.0 {
            for j in 0..m.ncols() {
                m[(i, j)] /= s;
            }
        } else {
            match policy {
                ZeroRowPolicy::Reject => return Err(Error::ZeroRow { row: i }),
                ZeroRowPolicy::SelfLoop => {
                    if i >= m.ncols() {
                        return Err(Error::ZeroRow { row: i });
                    }
                    m[(i, i)] = 1.0;
                }
            }
        }
    }
    Ok(())
}

/// Per-layer findings of [`LayeredNetwork::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerReport {
    /// Largest absolute deviation of a row sum from 1.
    pub max_row_deviation: f64,
    /// Rows whose sum deviates by more than [`ROW_SUM_TOL`], with their sums.
    pub bad_rows: Vec<RowDeviation>,
    /// Positions of negative or non-finite entries.
    pub bad_entries: Vec<(usize, usize)>,
    pub strongly_connected: bool,
    /// Strongly connected components, listed only when the layer is not
    /// strongly connected.
    pub components: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowDeviation {
    pub row: usize,
    pub sum: f64,
}

impl LayerReport {
    pub fn passed(&self) -> bool {
        self.bad_rows.is_empty() && self.bad_entries.is_empty() && self.strongly_connected
    }
}

/// Deterministic structural verdict for a [`LayeredNetwork`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub action: LayerReport,
    pub opinion: LayerReport,
    pub passed: bool,
}

/// Per-node weights of the decision model. `lambda[i]` weighs observed
/// actions against one's opinion, `beta[i]` weighs exchanged opinions; both
/// must lie in `(0, 1]` so the two variables stay coupled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    lambda: Vec<f64>,
    beta: Vec<f64>,
}

impl ModelParams {
    pub fn new(lambda: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if lambda.len() != beta.len() {
            return Err(Error::InvalidParams(format!(
                "lambda has {} entries, beta has {}",
                lambda.len(),
                beta.len()
            )));
        }
        for (name, v) in [("lambda", &lambda), ("beta", &beta)] {
            if let Some((i, &x)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0 && **x <= 1.0)) {
                return Err(Error::InvalidParams(format!("{name}[{i}] = {x} is outside (0, 1]")));
            }
        }
        Ok(Self { lambda, beta })
    }

    pub fn uniform(n: usize, lambda: f64, beta: f64) -> Result<Self> {
        Self::new(vec![lambda; n], vec![beta; n])
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambda[i]
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.beta[i]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::InvalidParams(format!(
                "parameters cover {} nodes, network has {n}",
                self.n()
            )));
        }
        Ok(())
    }
}

/// Is the digraph induced by positive entries strongly connected?
/// (Orientation does not matter: a graph and its reverse have the same
/// strongly connected components.)
pub fn strongly_connected(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n == 0 {
        return false;
    }
    reachable_count(m, 0, false) == n && reachable_count(m, 0, true) == n
}

/// Strongly connected components of the digraph induced by positive
/// entries, via Kosaraju on the dense matrix. Components come out in a
/// deterministic order with sorted members.
pub fn strongly_connected_components(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if !seen[s] {
            // iterative post-order DFS
            let mut stack = vec![(s, 0usize)];
            seen[s] = true;
            while let Some(&(v, next)) = stack.last() {
                if next < n {
                    stack.last_mut().unwrap().1 = next + 1;
                    if m[(v, next)] > 0.0 && !seen[next] {
                        seen[next] = true;
                        stack.push((next, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for j in 0..n {
                // reverse edge j -> v
                if m[(j, v)] > 0.0 && comp[j] == usize::MAX {
                    comp[j] = id;
                    members.push(j);
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

fn reachable_count(m: &DMatrix<f64>, start: usize, reverse: bool) -> usize {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for j in 0..n {
            let w = if reverse { m[(j, v)] } else { m[(v, j)] };
            if w > 0.0 && !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count
}

fn layer_report(m: &DMatrix<f64>) -> LayerReport {
    let n = m.nrows();
    let mut bad_rows = Vec::new();
    let mut bad_entries = Vec::new();
    let mut max_dev: f64 = 0.0;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let v = m[(i, j)];
            if !v.is_finite() || v < 0.0 {
                bad_entries.push((i, j));
            }
            s += v;
        }
        let dev = (s - 1.0).abs();
        max_dev = max_dev.max(dev);
        if !(dev <= ROW_SUM_TOL) {
            bad_rows.push(RowDeviation { row: i, sum: s });
        }
    }
    let sc = strongly_connected(m);
    let components = if sc { Vec::new() } else { strongly_connected_components(m) };
    LayerReport {
        max_row_deviation: max_dev,
        bad_rows,
        bad_entries,
        strongly_connected: sc,
        components,
    }
}

fn ensure_layer_stochastic(m: &DMatrix<f64>, layer: &'static str) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let v = m[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::BadWeight { layer, row: i, col: j });
            }
            s += v;
        }
        if !((s - 1.0).abs() <= ROW_SUM_TOL) {
            return Err(Error::NotStochastic { layer, row: i, sum: s });
        }
    }
    Ok(())
}

fn random_layer(n: usize, seed: u64, label: &str) -> Result<DMatrix<f64>> {
    let mut rng = rng_for(seed, label);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, (i + 1) % n)] += rng.gen_range(0.5..1.5);
        m[(i, (i + n - 1) % n)] += rng.gen_range(0.5..1.5);
        let extras = 3.min(n - 1);
        for _ in 0..extras {
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            m[(i, j)] += rng.gen_range(0.1..1.0);
        }
    }
    normalize_rows(&mut m, ZeroRowPolicy::Reject)?;
    Ok(m)
}

struct EdgeRecord {
    src: u64,
    dst: u64,
    weight: f64,
}

fn parse_edge_records<R: BufRead>(reader: R) -> Result<Vec<EdgeRecord>> {
    let mut recs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split(',').map(str::trim);
        let (src, dst, weight) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected `src,dst,weight`, got `{t}`"),
                })
            }
        };
        let src: u64 = src
            .parse()
            .map_err(|_| Error::Parse { line: lineno, msg: format!("bad source id `{src}`") })?;
        let dst: u64 = dst
            .parse()
            .map_err(|_| Error::Parse { line: lineno, msg: format!("bad target id `{dst}`") })?;
        let weight: f64 = weight
            .parse()
            .map_err(|_| Error::Parse { line: lineno, msg: format!("bad weight `{weight}`") })?;
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("weight {weight} is negative or non-finite"),
            });
        }
        recs.push(EdgeRecord { src, dst, weight });
    }
    Ok(recs)
}

fn build_network(
    action: &[EdgeRecord],
    opinion: Option<&[EdgeRecord]>,
    opts: &EdgeListOptions,
) -> Result<LayeredNetwork> {
    // Remap ids to 0..n by sorted original id, so ingestion is independent
    // of record order.
    let mut ids: Vec<u64> = action
        .iter()
        .chain(opinion.unwrap_or(&[]))
        .flat_map(|r| [r.src, r.dst])
        .collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::InvalidInput("edge list contains no records".into()));
    }
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = ids.len();

    let accumulate = |recs: &[EdgeRecord]| {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for r in recs {
            let (s, d) = (index[&r.src], index[&r.dst]);
            // weight of src's influence on dst lives in row d, column s
            m[(d, s)] += r.weight;
            if opts.undirected && s != d {
                m[(s, d)] += r.weight;
            }
        }
        m
    };
    let mut a = accumulate(action);
    let mut w = match opinion {
        Some(recs) => accumulate(recs),
        None => a.clone(),
    };
    let mut labels: Vec<String> = ids.iter().map(|id| id.to_string()).collect();

    if opts.restrict_largest_scc {
        // Use edges present in both layers, so each kept layer stays
        // strongly connected on the surviving nodes.
        let both = DMatrix::from_fn(n, n, |i, j| a[(i, j)].min(w[(i, j)]));
        let comps = strongly_connected_components(&both);
        let largest = comps
            .iter()
            .max_by_key(|c| (c.len(), std::cmp::Reverse(c[0])))
            .cloned()
            .unwrap_or_default();
        if largest.len() < 2 {
            return Err(Error::EmptyAfterRestriction);
        }
        a = a.select_rows(largest.iter()).select_columns(largest.iter());
        w = w.select_rows(largest.iter()).select_columns(largest.iter());
        labels = largest.iter().map(|&i| labels[i].clone()).collect();
    }

    normalize_rows(&mut a, opts.zero_row_policy)?;
    normalize_rows(&mut w, opts.zero_row_policy)?;
    LayeredNetwork::new(a, w)?.with_labels(labels)
}
