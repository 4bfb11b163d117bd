//! Exact branch-and-bound over feature supports.
//!
//! Every node fixes some selection variables to one (`fixed_in`) or zero
//! (`fixed_out`). Its lower bound comes from the perspective relaxation of
//! the coupled quadratic penalty, dualized against the budget row. The bound
//! is evaluated in dual form: for any `beta` in `[0, 1]^M` with
//! `sum_m beta_m y_m = 0` and `s = X^T (beta ∘ y)`,
//!
//! ```text
//! H(beta) - sum_{in} s_n^2 / (2 lambda) - max_{z feasible} sum_{free} z_n s_n^2 / (2 lambda)
//! ```
//!
//! is a lower bound on every completion of the node, where `H` is the binary
//! entropy summed over examples. The inner maximization is the Lagrangian
//! (fractional knapsack) value `min_mu sum max(0, a_n - mu c_n) + mu b`, or
//! the exact 0/1 knapsack when costs are integral. Candidate `beta` come from
//! proximal Newton solves of the relaxation at a sequence of budget
//! multipliers, so bounds stay valid however early the search is stopped.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{support_cost, Dataset, FitConfig, SelectionConstraint};
use crate::error::{Error, Result};
use crate::logistic::{dot, log_odds, newton_fit, sigmoid, softplus, ModelParams, Objective};

/// Search-tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub fixed_in: Vec<usize>,
    pub fixed_out: Vec<usize>,
    pub lower_bound: f64,
    pub depth: usize,
}

impl Node {
    pub fn root() -> Self {
        Self {
            fixed_in: Vec::new(),
            fixed_out: Vec::new(),
            lower_bound: f64::NEG_INFINITY,
            depth: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Tree exhausted with an absolute gap within `abs_gap_tol`.
    Optimal,
    /// Tree exhausted with the gap certified only to `rel_gap_tol`.
    GapReached,
    /// Stopped at `max_nodes`; the gap is honest but may be large.
    NodeLimit,
    Infeasible,
}

impl SolveStatus {
    /// True when the returned objective is certified within tolerance.
    pub fn is_certified(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapReached)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub params: ModelParams,
    pub support: Vec<usize>,
    pub objective: f64,
    pub lower_bound: f64,
    pub rel_gap: f64,
    pub nodes_explored: u64,
    pub status: SolveStatus,
}

/// One line of the optional solver trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub depth: usize,
    pub bound: f64,
    pub incumbent: f64,
    pub gap: f64,
}

/// Relative optimality gap with a `max(1, |objective|)` denominator.
pub fn relative_gap(objective: f64, lower_bound: f64) -> f64 {
    ((objective - lower_bound) / objective.abs().max(1.0)).max(0.0)
}

/// Solves the constrained best subset problem to certified optimality.
pub fn solve(d: &Dataset, constraint: SelectionConstraint, lambda: f64, cfg: &FitConfig) -> Result<SolveResult> {
    solve_traced(d, constraint, lambda, cfg, |_| {})
}

/// [`solve`] with a callback invoked once per evaluated node.
pub fn solve_traced(
    d: &Dataset,
    constraint: SelectionConstraint,
    lambda: f64,
    cfg: &FitConfig,
    trace: impl FnMut(&TraceRecord),
) -> Result<SolveResult> {
    let problem = Problem::new(d, constraint, lambda, cfg)?;
    Ok(Search::new(&problem).run(trace))
}

/// Lower bound on every feasible completion of `node`. Nodes whose free
/// features all fit in the remaining budget are solved exactly.
pub fn node_lower_bound(
    d: &Dataset,
    node: &Node,
    constraint: SelectionConstraint,
    lambda: f64,
    cfg: &FitConfig,
) -> Result<f64> {
    let problem = Problem::new(d, constraint, lambda, cfg)?;
    let state = problem.state_of(node)?;
    if let Some(support) = problem.completion(&state) {
        return Ok(problem.fit(&support).objective.total);
    }
    Ok(problem.relax(&state, None, f64::INFINITY, ROOT_STEPS).bound.max(node.lower_bound))
}

/// Dual value of the relaxation at a fixed budget multiplier `mu`.
///
/// At `mu = 0` this is the ridge fit over the fixed-in and free features.
pub fn node_bound_at_multiplier(
    d: &Dataset,
    node: &Node,
    constraint: SelectionConstraint,
    lambda: f64,
    mu: f64,
    cfg: &FitConfig,
) -> Result<f64> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidConfig(format!("multiplier must be nonnegative, got {mu}")));
    }
    let problem = Problem::new(d, constraint, lambda, cfg)?;
    let state = problem.state_of(node)?;
    let mut relaxer = Relaxer::new(&problem, &state, problem.initial_warm());
    relaxer.mu = mu;
    relaxer.inner(f64::INFINITY, 4 * MAX_NEWTON);
    Ok(relaxer.best_at_mu)
}

/// Relaxation solution at a node, as used for rounding and branching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub theta: Vec<f64>,
    pub theta0: f64,
    pub mu: f64,
    pub bound: f64,
}

/// Solves the node relaxation.
pub fn node_relaxation(
    d: &Dataset,
    node: &Node,
    constraint: SelectionConstraint,
    lambda: f64,
    cfg: &FitConfig,
) -> Result<Relaxation> {
    let problem = Problem::new(d, constraint, lambda, cfg)?;
    let state = problem.state_of(node)?;
    let r = problem.relax(&state, None, f64::INFINITY, ROOT_STEPS);
    Ok(Relaxation {
        theta: r.warm.w,
        theta0: r.warm.w0,
        mu: r.warm.mu,
        bound: r.bound,
    })
}

/// Greedy rounding of the node relaxation followed by a refit; the returned
/// objective is an upper bound on the optimum.
pub fn incumbent_heuristic(
    d: &Dataset,
    node: &Node,
    constraint: SelectionConstraint,
    lambda: f64,
    cfg: &FitConfig,
) -> Result<(Vec<usize>, Objective)> {
    let problem = Problem::new(d, constraint, lambda, cfg)?;
    let state = problem.state_of(node)?;
    let support = match problem.completion(&state) {
        Some(s) => s,
        None => {
            let r = problem.relax(&state, None, f64::INFINITY, ROOT_STEPS);
            problem.round(&state, &r.warm.w)
        }
    };
    let fit = problem.fit(&support);
    Ok((support, fit.objective))
}

/// Free feature with the largest `theta_n^2` in the relaxation, lowest index
/// on ties. `None` if no feature is free.
pub fn branch_select(node: &Node, relaxation: &Relaxation) -> Option<usize> {
    let n = relaxation.theta.len();
    let mut fixed = vec![false; n];
    for &j in node.fixed_in.iter().chain(&node.fixed_out) {
        fixed[j] = true;
    }
    pick_branch(&relaxation.theta, |j| !fixed[j])
}

fn pick_branch(theta: &[f64], is_free: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &t) in theta.iter().enumerate() {
        if !is_free(j) {
            continue;
        }
        let score = t * t;
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((j, score)),
        }
    }
    best.map(|(j, _)| j)
}

/// Multiplier updates at the root and at other nodes.
const ROOT_STEPS: usize = 40;
const NODE_STEPS: usize = 12;
/// Proximal Newton iterations per multiplier.
const MAX_NEWTON: usize = 25;
/// Relative precision to which a relaxation is solved.
const RELAX_TOL: f64 = 1e-7;
/// Knapsack capacities up to this size use the exact dynamic program.
const DP_CAPACITY: f64 = 4096.0;
/// Non-members screened per swap round of the local search.
const SWAP_CANDIDATES: usize = 8;
const SWAP_ROUNDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    In,
    Out,
}

#[derive(Debug, Clone)]
struct NodeState {
    fix: Vec<Fix>,
    /// Budget left after paying for the fixed-in features.
    capacity: f64,
    depth: usize,
}

impl NodeState {
    fn fixed_in_list(&self) -> Vec<usize> {
        (0..self.fix.len()).filter(|&j| self.fix[j] == Fix::In).collect()
    }
}

/// A dual point reduced to what the bound needs.
#[derive(Debug, Clone)]
struct DualPoint {
    entropy: f64,
    /// `X^T (beta ∘ y)` for every feature (entries of excluded features are
    /// zero and never read).
    s: Vec<f64>,
}

/// Warm-start data handed from a node to its children.
#[derive(Debug, Clone)]
struct Warm {
    w: Vec<f64>,
    w0: f64,
    mu: f64,
}

struct RelaxOutcome {
    bound: f64,
    dual: Option<DualPoint>,
    warm: Warm,
}

struct Problem<'a> {
    cols: Vec<&'a [f64]>,
    y: &'a [f64],
    positive: Vec<bool>,
    costs: Vec<f64>,
    budget: f64,
    integral_costs: bool,
    lambda: f64,
    cfg: FitConfig,
}

#[derive(Debug, Clone)]
struct FitRecord {
    coef: Vec<f64>,
    intercept: f64,
    objective: Objective,
}

impl<'a> Problem<'a> {
    fn new(d: &'a Dataset, constraint: SelectionConstraint, lambda: f64, cfg: &FitConfig) -> Result<Self> {
        cfg.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "the exact solver needs lambda > 0, got {lambda}"
            )));
        }
        let (costs, budget) = constraint.resolve(d)?;
        if budget < 0.0 {
            return Err(Error::Infeasible);
        }
        let (pos, neg) = d.class_counts();
        if pos == 0 || neg == 0 {
            return Err(Error::SingleClass);
        }
        let integral_costs = costs.iter().all(|c| c.fract() == 0.0 && *c <= 1e9);
        Ok(Self {
            cols: (0..d.n_features()).map(|j| d.column(j)).collect(),
            y: d.y(),
            positive: d.y().iter().map(|&v| v > 0.0).collect(),
            costs,
            budget,
            integral_costs,
            lambda,
            cfg: cfg.clone(),
        })
    }

    fn n(&self) -> usize {
        self.cols.len()
    }

    fn m(&self) -> usize {
        self.y.len()
    }

    fn state_of(&self, node: &Node) -> Result<NodeState> {
        let n = self.n();
        let mut fix = vec![Fix::Free; n];
        for &j in &node.fixed_out {
            if j >= n {
                return Err(Error::DimensionMismatch { expected: n, found: j + 1 });
            }
            fix[j] = Fix::Out;
        }
        for &j in &node.fixed_in {
            if j >= n {
                return Err(Error::DimensionMismatch { expected: n, found: j + 1 });
            }
            if fix[j] == Fix::Out {
                return Err(Error::InvalidData(format!("feature {j} fixed both in and out")));
            }
            fix[j] = Fix::In;
        }
        let capacity = self.budget - support_cost(&self.costs, &node.fixed_in);
        if capacity < 0.0 {
            return Err(Error::Infeasible);
        }
        Ok(NodeState {
            fix,
            capacity,
            depth: node.depth,
        })
    }

    fn state_with(&self, st: &NodeState, j: usize, to: Fix) -> Option<NodeState> {
        let mut fix = st.fix.clone();
        fix[j] = to;
        let capacity = if to == Fix::In {
            let support: Vec<usize> = (0..fix.len()).filter(|&i| fix[i] == Fix::In).collect();
            let c = self.budget - support_cost(&self.costs, &support);
            if c < 0.0 {
                return None;
            }
            c
        } else {
            st.capacity
        };
        Some(NodeState {
            fix,
            capacity,
            depth: st.depth,
        })
    }

    fn affordable(&self, st: &NodeState, j: usize) -> bool {
        st.fix[j] == Fix::Free && self.costs[j] <= st.capacity
    }

    /// When every affordable free feature fits at once, the best completion
    /// selects all of them (a superset never fits worse).
    fn completion(&self, st: &NodeState) -> Option<Vec<usize>> {
        let extra: Vec<usize> = (0..self.n()).filter(|&j| self.affordable(st, j)).collect();
        let mut support = st.fixed_in_list();
        support.extend_from_slice(&extra);
        support.sort_unstable();
        if support_cost(&self.costs, &support) <= self.budget {
            Some(support)
        } else {
            None
        }
    }

    fn fit(&self, support: &[usize]) -> FitRecord {
        let cols: Vec<&[f64]> = support.iter().map(|&j| self.cols[j]).collect();
        // lambda > 0 keeps the problem bounded
        let f = newton_fit(&cols, self.y, self.lambda, &self.cfg, None, f64::INFINITY)
            .expect("regularized fit cannot be unbounded");
        FitRecord {
            coef: f.coef,
            intercept: f.intercept,
            objective: f.objective,
        }
    }

    /// Greedy rounding: free features ordered by `|theta_n| / c_n`, added while
    /// the budget allows (unaffordable ones are skipped).
    fn round(&self, s: &NodeState, w: &[f64]) -> Vec<usize> {
        let mut cand: Vec<usize> = (0..self.n())
            .filter(|&j| s.fix[j] == Fix::Free && w[j] != 0.0)
            .collect();
        cand.sort_by(|&a, &b| {
            let ra = w[a].abs() / self.costs[a];
            let rb = w[b].abs() / self.costs[b];
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut support = s.fixed_in_list();
        let mut spent = support_cost(&self.costs, &support);
        for j in cand {
            let trial = spent + self.costs[j];
            if trial <= self.budget {
                support.push(j);
                spent = support_cost(&self.costs, &support);
            }
        }
        support.sort_unstable();
        support
    }

    /// Knapsack value `max sum a_n z_n` over free features with the node's
    /// capacity, together with the Lagrangian multiplier at which the
    /// fractional relaxation is tight.
    fn knapsack(&self, st: &NodeState, a: &[f64]) -> (f64, f64) {
        let cap = self.effective_capacity(st);
        let mut items: Vec<usize> = (0..self.n())
            .filter(|&j| st.fix[j] == Fix::Free && a[j] > 0.0 && self.costs[j] <= cap)
            .collect();
        items.sort_by(|&p, &q| {
            (a[q] / self.costs[q])
                .total_cmp(&(a[p] / self.costs[p]))
                .then(p.cmp(&q))
        });
        let mut remaining = cap;
        let mut lp = 0.0;
        let mut mu = 0.0;
        for &j in &items {
            if self.costs[j] <= remaining {
                lp += a[j];
                remaining -= self.costs[j];
            } else {
                lp += a[j] * remaining / self.costs[j];
                mu = a[j] / self.costs[j];
                break;
            }
        }
        if !self.integral_costs || cap > DP_CAPACITY || mu == 0.0 {
            return (lp, mu);
        }
        let cap = cap as usize;
        let mut best = vec![0.0f64; cap + 1];
        for &j in &items {
            let c = self.costs[j] as usize;
            for w in (c..=cap).rev() {
                let v = best[w - c] + a[j];
                if v > best[w] {
                    best[w] = v;
                }
            }
        }
        (best[cap].min(lp), mu)
    }

    /// Remaining budget; integral costs can only use its integer part.
    fn effective_capacity(&self, st: &NodeState) -> f64 {
        if self.integral_costs {
            st.capacity.floor()
        } else {
            st.capacity
        }
    }

    fn scores(&self, dual: &DualPoint) -> Vec<f64> {
        let inv = 0.5 / self.lambda;
        dual.s.iter().map(|s| s * s * inv).collect()
    }

    fn bound_with_scores(&self, st: &NodeState, entropy: f64, a: &[f64]) -> (f64, f64) {
        let fixed: f64 = (0..self.n()).filter(|&j| st.fix[j] == Fix::In).map(|j| a[j]).sum();
        let (knap, mu) = self.knapsack(st, a);
        (entropy - fixed - knap + self.cfg.bound_offset, mu)
    }

    fn bound_from_dual(&self, st: &NodeState, dual: &DualPoint) -> (f64, f64) {
        let a = self.scores(dual);
        self.bound_with_scores(st, dual.entropy, &a)
    }

    /// Dual value at a fixed multiplier (Lagrangian of the budget row).
    fn dual_at_mu(&self, st: &NodeState, dual: &DualPoint, mu: f64) -> f64 {
        let inv = 0.5 / self.lambda;
        let cap = self.effective_capacity(st);
        let mut v = dual.entropy - mu * cap;
        for j in 0..self.n() {
            let a = dual.s[j] * dual.s[j] * inv;
            match st.fix[j] {
                Fix::In => v -= a,
                Fix::Free if self.costs[j] <= cap => v -= (a - mu * self.costs[j]).max(0.0),
                _ => {}
            }
        }
        v
    }

    fn initial_warm(&self) -> Warm {
        Warm {
            w: vec![0.0; self.n()],
            w0: log_odds(self.y),
            mu: 0.0,
        }
    }

    fn relax(&self, st: &NodeState, warm: Option<&Warm>, threshold: f64, max_steps: usize) -> RelaxOutcome {
        let warm = warm.cloned().unwrap_or_else(|| self.initial_warm());
        let mut relaxer = Relaxer::new(self, st, warm);
        relaxer.search(threshold, max_steps);
        relaxer.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InnerExit {
    Converged,
    AboveThreshold,
    /// The relaxation value is provably below the pruning threshold.
    BelowThreshold,
    IterationLimit,
}

/// Proximal Newton solver for the relaxation of one node at a fixed budget
/// multiplier, wrapped in a bracketing search over the multiplier.
///
/// Free features carry the reverse-Huber penalty
/// `psi(t) = rho |t|` for `|t| <= tau` and `lambda t^2 / 2 + mu c` beyond,
/// with `rho = sqrt(2 lambda mu c)` and `tau = sqrt(2 mu c / lambda)`.
struct Relaxer<'p, 'a> {
    p: &'p Problem<'a>,
    st: &'p NodeState,
    /// Features that are fixed in, or free and affordable.
    active: Vec<usize>,
    free: Vec<bool>,
    cap: f64,
    x: Vec<f64>,
    x0: f64,
    mu: f64,
    best_bound: f64,
    best_dual: Option<DualPoint>,
    best_at_mu: f64,
    margins: Vec<f64>,
    prob: Vec<f64>,
    grad: Vec<f64>,
    g0: f64,
    loss: f64,
}

impl<'p, 'a> Relaxer<'p, 'a> {
    fn new(p: &'p Problem<'a>, st: &'p NodeState, warm: Warm) -> Self {
        let cap = p.effective_capacity(st);
        let active: Vec<usize> = (0..p.n())
            .filter(|&j| st.fix[j] == Fix::In || (st.fix[j] == Fix::Free && p.costs[j] <= cap))
            .collect();
        let free = active.iter().map(|&j| st.fix[j] == Fix::Free).collect();
        let x = active.iter().map(|&j| warm.w[j]).collect();
        let m = p.m();
        Self {
            p,
            st,
            free,
            cap,
            x,
            x0: warm.w0,
            mu: warm.mu,
            best_bound: f64::NEG_INFINITY,
            best_dual: None,
            best_at_mu: f64::NEG_INFINITY,
            margins: vec![0.0; m],
            prob: vec![0.0; m],
            grad: vec![0.0; active.len()],
            g0: 0.0,
            loss: 0.0,
            active,
        }
    }

    fn cost(&self, k: usize) -> f64 {
        self.p.costs[self.active[k]]
    }

    fn penalty_params(&self, k: usize) -> (f64, f64) {
        let c = self.cost(k);
        let lambda = self.p.lambda;
        ((2.0 * lambda * self.mu * c).sqrt(), (2.0 * self.mu * c / lambda).sqrt())
    }

    fn psi(&self, k: usize, t: f64) -> f64 {
        let (rho, tau) = self.penalty_params(k);
        if t.abs() <= tau {
            rho * t.abs()
        } else {
            0.5 * self.p.lambda * t * t + self.mu * self.cost(k)
        }
    }

    /// Minimizer of `h/2 (t - v)^2 + psi(t)`.
    fn prox(&self, k: usize, v: f64, h: f64) -> f64 {
        let (rho, tau) = self.penalty_params(k);
        let a = v.abs();
        let shrink = rho / h;
        if a <= shrink {
            0.0
        } else if a <= tau + shrink {
            v - shrink * v.signum()
        } else {
            v * h / (h + self.p.lambda)
        }
    }

    /// Ridge on fixed-in features plus the free-feature penalties.
    fn penalty(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for (k, &t) in x.iter().enumerate() {
            v += if self.free[k] {
                self.psi(k, t)
            } else {
                0.5 * self.p.lambda * t * t
            };
        }
        v
    }

    /// Refreshes margins, probabilities, loss and the gradient of the
    /// smooth part at the current point.
    fn evaluate(&mut self) {
        let m = self.p.m();
        self.margins.fill(self.x0);
        for (k, &w) in self.x.iter().enumerate() {
            if w != 0.0 {
                for (z, &v) in self.margins.iter_mut().zip(self.p.cols[self.active[k]]) {
                    *z += w * v;
                }
            }
        }
        let mut loss = 0.0;
        let mut g0 = 0.0;
        let mut resid = vec![0.0; m];
        for i in 0..m {
            let z = self.margins[i] * self.p.y[i];
            self.margins[i] = z;
            loss += softplus(z);
            let b = sigmoid(-z);
            self.prob[i] = b;
            resid[i] = -self.p.y[i] * b;
            g0 += resid[i];
        }
        self.loss = loss;
        self.g0 = g0;
        for k in 0..self.active.len() {
            let mut g = dot(self.p.cols[self.active[k]], &resid);
            if !self.free[k] {
                g += self.p.lambda * self.x[k];
            }
            self.grad[k] = g;
        }
    }

    /// Lagrangian value at the current point and multiplier.
    fn primal(&self) -> f64 {
        self.loss + self.penalty(&self.x) - self.mu * self.cap
    }

    /// Dual point from `beta = sigmoid(-margin)`, made feasible by scaling
    /// down one class.
    fn dual(&mut self) -> f64 {
        let m = self.p.m();
        let (mut sum_pos, mut sum_neg) = (0.0, 0.0);
        for i in 0..m {
            if self.p.positive[i] {
                sum_pos += self.prob[i];
            } else {
                sum_neg += self.prob[i];
            }
        }
        let (alpha_pos, alpha_neg) = if sum_pos > sum_neg {
            (if sum_pos > 0.0 { sum_neg / sum_pos } else { 1.0 }, 1.0)
        } else {
            (1.0, if sum_neg > 0.0 { sum_pos / sum_neg } else { 1.0 })
        };
        let mut entropy = 0.0;
        let mut u = vec![0.0; m];
        for i in 0..m {
            let b = self.prob[i] * if self.p.positive[i] { alpha_pos } else { alpha_neg };
            entropy += binary_entropy(b);
            u[i] = b * self.p.y[i];
        }
        let mut s = vec![0.0; self.p.n()];
        for &j in &self.active {
            s[j] = dot(self.p.cols[j], &u);
        }
        let dual = DualPoint { entropy, s };
        let at_mu = self.p.dual_at_mu(self.st, &dual, self.mu);
        if at_mu > self.best_at_mu {
            self.best_at_mu = at_mu;
        }
        let (bound, _) = self.p.bound_from_dual(self.st, &dual);
        if bound > self.best_bound {
            self.best_bound = bound;
            self.best_dual = Some(dual);
        }
        at_mu
    }

    /// Proximal Newton at the current multiplier.
    fn inner(&mut self, threshold: f64, max_newton: usize) -> InnerExit {
        let m = self.p.m();
        let lambda = self.p.lambda;
        for _ in 0..max_newton {
            self.evaluate();
            let at_mu = self.dual();
            if self.best_bound >= threshold {
                return InnerExit::AboveThreshold;
            }
            if threshold.is_finite() && self.upper().0 < threshold {
                return InnerExit::BelowThreshold;
            }
            let primal = self.primal();
            if primal - at_mu <= 1e-9 * (1.0 + primal.abs()) {
                return InnerExit::Converged;
            }

            // working set: nonzero coordinates plus optimality violators
            let work: Vec<usize> = (0..self.active.len())
                .filter(|&k| {
                    !self.free[k] || self.x[k] != 0.0 || self.grad[k].abs() > self.penalty_params(k).0
                })
                .collect();
            let q = work.len();
            let curv: Vec<f64> = self.prob.iter().map(|&b| b * (1.0 - b)).collect();
            // H = A^T A with A = diag(sqrt(curv)) [X_work, 1]
            let sc: Vec<f64> = curv.iter().map(|c| c.sqrt()).collect();
            let mut a = DMatrix::<f64>::zeros(m, q + 1);
            for (k, &w) in work.iter().enumerate() {
                let col = self.p.cols[self.active[w]];
                for (dst, (&x, &s)) in a.column_mut(k).iter_mut().zip(col.iter().zip(&sc)) {
                    *dst = x * s;
                }
            }
            a.column_mut(q).copy_from_slice(&sc);
            let hm = a.transpose() * &a;
            let mut h: Vec<f64> = hm.as_slice().to_vec();
            for (k, &w) in work.iter().enumerate() {
                if !self.free[w] {
                    h[k * (q + 1) + k] += lambda;
                }
            }

            // coordinate descent on the quadratic model
            let mut d = vec![0.0; q + 1];
            let mut r: Vec<f64> = work.iter().map(|&k| self.grad[k]).collect();
            r.push(self.g0);
            let mut attempts = 0;
            for sweep in 0..200 {
                let mut change: f64 = 0.0;
                for a in 0..=q {
                    let haa = h[a * (q + 1) + a].max(1e-12);
                    let cur = if a < q { self.x[work[a]] } else { self.x0 } + d[a];
                    let v = cur - r[a] / haa;
                    let new = if a < q && self.free[work[a]] {
                        self.prox(work[a], v, haa)
                    } else {
                        v
                    };
                    let delta = new - cur;
                    if delta != 0.0 {
                        d[a] += delta;
                        // h is symmetric: row a equals column a
                        for (rb, hb) in r.iter_mut().zip(&h[a * (q + 1)..(a + 1) * (q + 1)]) {
                            *rb += delta * hb;
                        }
                        change = change.max(delta.abs() * haa.sqrt());
                    }
                }
                if change <= 1e-11 {
                    break;
                }
                if change <= 1e-2 && (attempts == 0 || sweep % 10 == 0) && attempts < 4 {
                    attempts += 1;
                    if let Some(exact) = self.pattern_solve(&work, &h, &d) {
                        d = exact;
                        break;
                    }
                }
            }

            // descent measure and backtracking on the full objective
            let mut slope = self.g0 * d[q];
            let mut psi_change = 0.0;
            for a in 0..q {
                let k = work[a];
                slope += self.grad[k] * d[a];
                if self.free[k] {
                    psi_change += self.psi(k, self.x[k] + d[a]) - self.psi(k, self.x[k]);
                }
            }
            let decrease = slope + psi_change;
            if !(decrease < -1e-15 * (1.0 + primal.abs())) {
                return InnerExit::Converged;
            }
            let mut dm = vec![d[q]; m];
            for a in 0..q {
                if d[a] != 0.0 {
                    for (z, &v) in dm.iter_mut().zip(self.p.cols[self.active[work[a]]]) {
                        *z += d[a] * v;
                    }
                }
            }
            for i in 0..m {
                dm[i] *= self.p.y[i];
            }
            let f0 = self.loss + self.penalty(&self.x);
            let mut trial = self.x.clone();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                for a in 0..q {
                    trial[work[a]] = self.x[work[a]] + t * d[a];
                }
                let loss: f64 = (0..m).map(|i| softplus(self.margins[i] + t * dm[i])).sum();
                let f = loss + self.penalty(&trial);
                if f <= f0 + 1e-4 * t * decrease + 1e-14 * (1.0 + f0.abs()) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return InnerExit::Converged;
            }
            self.x = trial;
            self.x0 += t * d[q];
        }
        self.evaluate();
        self.dual();
        if self.best_bound >= threshold {
            InnerExit::AboveThreshold
        } else {
            InnerExit::IterationLimit
        }
    }

    /// Solves the Newton subproblem exactly assuming each free coordinate
    /// stays in the penalty piece (zero, linear or quadratic) it occupies at
    /// `x + d`. Returns the step only if it satisfies the optimality
    /// conditions of the subproblem.
    fn pattern_solve(&self, work: &[usize], h: &[f64], d: &[f64]) -> Option<Vec<f64>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Piece {
            Smooth,
            Zero,
            Linear(f64),
            Quadratic,
        }
        let q = work.len();
        let lambda = self.p.lambda;
        let base = |a: usize| if a < q { self.x[work[a]] } else { self.x0 };
        let grad = |a: usize| if a < q { self.grad[work[a]] } else { self.g0 };
        let piece: Vec<Piece> = (0..=q)
            .map(|a| {
                if a == q || !self.free[work[a]] {
                    return Piece::Smooth;
                }
                let t = base(a) + d[a];
                let (_, tau) = self.penalty_params(work[a]);
                if t == 0.0 {
                    Piece::Zero
                } else if t.abs() <= tau {
                    Piece::Linear(t.signum())
                } else {
                    Piece::Quadratic
                }
            })
            .collect();
        let solve_set: Vec<usize> = (0..=q).filter(|&a| piece[a] != Piece::Zero).collect();
        let s = solve_set.len();
        let mut step = vec![0.0; q + 1];
        for a in 0..=q {
            if piece[a] == Piece::Zero {
                step[a] = -base(a);
            }
        }
        let mut mat = DMatrix::<f64>::zeros(s, s);
        let mut rhs = nalgebra::DVector::<f64>::zeros(s);
        for (i, &a) in solve_set.iter().enumerate() {
            let row = &h[a * (q + 1)..(a + 1) * (q + 1)];
            let mut r = -grad(a);
            for b in 0..=q {
                if piece[b] == Piece::Zero {
                    r -= row[b] * step[b];
                }
            }
            for (j, &b) in solve_set.iter().enumerate() {
                mat[(i, j)] = row[b];
            }
            match piece[a] {
                Piece::Linear(sign) => r -= self.penalty_params(work[a]).0 * sign,
                Piece::Quadratic => {
                    mat[(i, i)] += lambda;
                    r -= lambda * base(a);
                }
                _ => {}
            }
            rhs[i] = r;
        }
        let sol = mat.cholesky()?.solve(&rhs);
        for (i, &a) in solve_set.iter().enumerate() {
            step[a] = sol[i];
        }
        // optimality check
        for a in 0..q {
            let (rho, tau) = self.penalty_params(work[a]);
            let t = base(a) + step[a];
            let ok = match piece[a] {
                Piece::Smooth => true,
                Piece::Linear(sign) => t * sign > 0.0 && t.abs() <= tau * (1.0 + 1e-9),
                Piece::Quadratic => t.abs() >= tau * (1.0 - 1e-9),
                Piece::Zero => {
                    let row = &h[a * (q + 1)..(a + 1) * (q + 1)];
                    let r = grad(a) + dot(row, &step);
                    r.abs() <= rho * (1.0 + 1e-12)
                }
            };
            if !ok {
                return None;
            }
        }
        Some(step)
    }

    /// Budget slack of the optimal `z` for the current point, `sum c z - cap`.
    fn excess(&self) -> f64 {
        let lambda = self.p.lambda;
        let mut used = 0.0;
        for k in 0..self.active.len() {
            if self.free[k] && self.x[k] != 0.0 {
                let c = self.cost(k);
                used += c * (self.x[k].abs() * (lambda / (2.0 * self.mu * c)).sqrt()).min(1.0);
            }
        }
        used - self.cap
    }

    /// Primal value of the relaxation at the current coefficients with the
    /// best feasible `z`, and the multiplier of that `z` problem.
    fn upper(&self) -> (f64, f64) {
        let lambda = self.p.lambda;
        let mut fixed = 0.0;
        // (breakpoint, cost, |theta| sqrt(lambda c / 2), lambda theta^2 / 2)
        let mut items = Vec::new();
        for k in 0..self.active.len() {
            let t = self.x[k];
            if !self.free[k] {
                fixed += 0.5 * lambda * t * t;
            } else if t != 0.0 {
                let c = self.cost(k);
                items.push((lambda * t * t / (2.0 * c), c, t.abs() * (0.5 * lambda * c).sqrt(), 0.5 * lambda * t * t));
            }
        }
        let base = self.loss + fixed;
        let total_cost: f64 = items.iter().map(|it| it.1).sum();
        if total_cost <= self.cap {
            return (base + items.iter().map(|it| it.3).sum::<f64>(), 0.0);
        }
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut top_cost = 0.0;
        let mut top_value = 0.0;
        let mut rest: f64 = items.iter().map(|it| it.2).sum();
        for r in 0..items.len() {
            // items[..r] saturated at z = 1
            let room = self.cap - top_cost;
            if room > 0.0 && rest > 0.0 {
                let nu = (rest / room).powi(2);
                let upper_ok = r == 0 || nu <= items[r - 1].0;
                if upper_ok && nu > items[r].0 {
                    return (base + top_value + nu.sqrt() * rest, nu);
                }
            }
            top_cost += items[r].1;
            top_value += items[r].3;
            rest -= items[r].2;
        }
        (f64::INFINITY, self.mu)
    }

    /// Maximizes the dual function over the multiplier by bracketing on the
    /// sign of the budget excess.
    fn search(&mut self, threshold: f64, max_steps: usize) {
        if self.mu <= 0.0 {
            self.evaluate();
            self.dual();
            let dual = self.best_dual.as_ref().expect("dual recorded");
            let (_, mu_star) = self.p.bound_from_dual(self.st, dual);
            self.mu = mu_star.max(1e-8);
        }
        let (mut lo, mut hi): (Option<f64>, Option<f64>) = (None, None);
        for step in 0..max_steps {
            match self.inner(threshold, MAX_NEWTON) {
                InnerExit::AboveThreshold | InnerExit::BelowThreshold => return,
                InnerExit::Converged | InnerExit::IterationLimit => {}
            }
            let (upper, nu) = self.upper();
            if upper - self.best_bound <= RELAX_TOL * (1.0 + upper.abs()) {
                return;
            }
            if self.excess() > 0.0 {
                lo = Some(self.mu);
            } else {
                hi = Some(self.mu);
            }
            let mu = self.mu;
            self.mu = match (lo, hi) {
                (Some(l), None) => nu.clamp(2.0 * l, 100.0 * l),
                (None, Some(h)) => nu.clamp(h / 100.0, h / 2.0).max(1e-14),
                (Some(l), Some(h)) => {
                    if h / l < 1.0 + 1e-9 {
                        return;
                    }
                    if step % 2 == 0 && nu > l && nu < h {
                        nu
                    } else {
                        (l * h).sqrt()
                    }
                }
                (None, None) => unreachable!(),
            };
            if self.mu == mu {
                return;
            }
        }
    }

    fn finish(self) -> RelaxOutcome {
        let mut w = vec![0.0; self.p.n()];
        for (k, &j) in self.active.iter().enumerate() {
            w[j] = self.x[k];
        }
        RelaxOutcome {
            bound: self.best_bound,
            dual: self.best_dual,
            warm: Warm {
                w,
                w0: self.x0,
                mu: self.mu,
            },
        }
    }
}

fn binary_entropy(b: f64) -> f64 {
    if b <= 0.0 || b >= 1.0 {
        0.0
    } else {
        -b * b.ln() - (1.0 - b) * (-b).ln_1p()
    }
}

/// Total order on bounds for the best-first queue (smallest bound first,
/// FIFO among equal bounds).
#[derive(Debug)]
struct Queued {
    bound: f64,
    id: u64,
    state: NodeState,
    warm: Warm,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Incumbent {
    support: Vec<usize>,
    fit: FitRecord,
}

struct Search<'p, 'a> {
    p: &'p Problem<'a>,
    cache: HashMap<Vec<usize>, FitRecord>,
    incumbent: Option<Incumbent>,
    queue: BinaryHeap<Queued>,
    next_id: u64,
    explored: u64,
    pruned_min: f64,
    tolerance_pruned: bool,
}

enum Evaluated {
    Complete(Vec<usize>),
    Relaxed(RelaxOutcome),
}

impl<'p, 'a> Search<'p, 'a> {
    fn new(p: &'p Problem<'a>) -> Self {
        Self {
            p,
            cache: HashMap::new(),
            incumbent: None,
            queue: BinaryHeap::new(),
            next_id: 0,
            explored: 0,
            pruned_min: f64::INFINITY,
            tolerance_pruned: false,
        }
    }

    fn upper(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(f64::INFINITY, |i| i.fit.objective.total)
    }

    fn tolerance(&self) -> f64 {
        let u = self.upper();
        if u.is_finite() {
            self.p.cfg.abs_gap_tol.max(self.p.cfg.rel_gap_tol * u.abs().max(1.0))
        } else {
            0.0
        }
    }

    fn threshold(&self) -> f64 {
        self.upper() - self.tolerance()
    }

    fn fit_cached(&mut self, support: &[usize]) -> FitRecord {
        if let Some(f) = self.cache.get(support) {
            return f.clone();
        }
        let f = self.p.fit(support);
        self.cache.insert(support.to_vec(), f.clone());
        f
    }

    fn offer(&mut self, support: Vec<usize>) -> f64 {
        let fit = self.fit_cached(&support);
        let value = fit.objective.total;
        let better = match &self.incumbent {
            None => true,
            Some(inc) => {
                value < inc.fit.objective.total
                    || (value == inc.fit.objective.total && support < inc.support)
            }
        };
        if better {
            self.incumbent = Some(Incumbent { support, fit });
        }
        value
    }

    /// Swap-based local search from the incumbent. Non-members are screened
    /// by the size of their gradient at the incumbent fit.
    fn improve(&mut self) {
        let n = self.p.n();
        let m = self.p.m();
        for _ in 0..SWAP_ROUNDS {
            let inc = self.incumbent.as_ref().expect("incumbent set");
            let support = inc.support.clone();
            let current = inc.fit.objective.total;
            let mut margins = vec![inc.fit.intercept; m];
            for (&j, &w) in support.iter().zip(&inc.fit.coef) {
                for (z, &v) in margins.iter_mut().zip(self.p.cols[j]) {
                    *z += w * v;
                }
            }
            let resid: Vec<f64> = (0..m)
                .map(|i| -self.p.y[i] * sigmoid(-self.p.y[i] * margins[i]))
                .collect();
            let mut outside: Vec<(usize, f64)> = (0..n)
                .filter(|j| !support.contains(j))
                .map(|j| (j, dot(self.p.cols[j], &resid).abs()))
                .collect();
            outside.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            outside.truncate(SWAP_CANDIDATES);

            let spent = support_cost(&self.p.costs, &support);
            let mut best: Option<(Vec<usize>, f64)> = None;
            for &(j, _) in &outside {
                let mut moves: Vec<Vec<usize>> = Vec::new();
                if spent + self.p.costs[j] <= self.p.budget {
                    let mut s = support.clone();
                    s.push(j);
                    moves.push(s);
                } else {
                    for i in 0..support.len() {
                        let mut s = support.clone();
                        s[i] = j;
                        moves.push(s);
                    }
                }
                for mut s in moves {
                    s.sort_unstable();
                    if support_cost(&self.p.costs, &s) > self.p.budget {
                        continue;
                    }
                    let v = self.fit_cached(&s).objective.total;
                    if v < best.as_ref().map_or(current, |b| b.1) {
                        best = Some((s, v));
                    }
                }
            }
            match best {
                Some((s, _)) => {
                    self.offer(s);
                }
                None => return,
            }
        }
    }

    fn prune(&mut self, bound: f64) {
        if bound < self.upper() {
            self.pruned_min = self.pruned_min.min(bound);
            if self.upper() - bound > self.p.cfg.abs_gap_tol {
                self.tolerance_pruned = true;
            }
        }
    }

    fn push(&mut self, state: NodeState, bound: f64, warm: Warm) {
        let id = self.next_id;
        self.next_id += 1;
        self.queue.push(Queued {
            bound,
            id,
            state,
            warm,
        });
    }

    fn evaluate(&self, q: &Queued, threshold: f64) -> Evaluated {
        if let Some(support) = self.p.completion(&q.state) {
            return Evaluated::Complete(support);
        }
        let steps = if q.state.depth == 0 { ROOT_STEPS } else { NODE_STEPS };
        let mut out = self.p.relax(&q.state, Some(&q.warm), threshold, steps);
        if out.bound < q.bound {
            out.bound = q.bound;
        }
        Evaluated::Relaxed(out)
    }

    fn run(mut self, mut trace: impl FnMut(&TraceRecord)) -> SolveResult {
        let n = self.p.n();
        let root = NodeState {
            fix: vec![Fix::Free; n],
            capacity: self.p.budget,
            depth: 0,
        };
        // the empty support is always feasible and gives a first incumbent
        self.offer(Vec::new());
        let warm = self.p.initial_warm();
        self.push(root, f64::NEG_INFINITY, warm);

        let mut hit_limit = false;
        while !self.queue.is_empty() {
            let mut batch = Vec::with_capacity(self.p.cfg.node_batch);
            while batch.len() < self.p.cfg.node_batch {
                let Some(q) = self.queue.pop() else { break };
                if q.bound >= self.threshold() {
                    self.prune(q.bound);
                    continue;
                }
                batch.push(q);
            }
            if batch.is_empty() {
                break;
            }
            if let Some(limit) = self.p.cfg.max_nodes {
                if self.explored + batch.len() as u64 > limit {
                    let room = limit.saturating_sub(self.explored) as usize;
                    for q in batch.drain(room..).rev() {
                        self.queue.push(q);
                    }
                    hit_limit = true;
                    if batch.is_empty() {
                        break;
                    }
                }
            }
            let threshold = self.threshold();
            let results: Vec<Evaluated> = if batch.len() == 1 {
                vec![self.evaluate(&batch[0], threshold)]
            } else {
                batch.par_iter().map(|q| self.evaluate(q, threshold)).collect()
            };

            for (q, result) in batch.into_iter().zip(results) {
                self.explored += 1;
                self.merge(q, result, &mut trace);
            }
            if hit_limit {
                break;
            }
        }

        let upper = self.upper();
        let open_min = self
            .queue
            .iter()
            .map(|q| q.bound)
            .fold(f64::INFINITY, f64::min);
        let lower = upper.min(self.pruned_min).min(open_min);
        let status = if hit_limit && open_min < self.threshold() {
            SolveStatus::NodeLimit
        } else if self.tolerance_pruned && upper - lower > self.p.cfg.abs_gap_tol {
            SolveStatus::GapReached
        } else {
            SolveStatus::Optimal
        };
        let inc = self.incumbent.expect("empty support is always offered");
        let mut theta = vec![0.0; n];
        for (&j, &w) in inc.support.iter().zip(&inc.fit.coef) {
            theta[j] = w;
        }
        SolveResult {
            params: ModelParams {
                theta,
                theta0: inc.fit.intercept,
            },
            support: inc.support,
            objective: upper,
            lower_bound: lower,
            rel_gap: relative_gap(upper, lower),
            nodes_explored: self.explored,
            status,
        }
    }

    fn merge(&mut self, q: Queued, result: Evaluated, trace: &mut impl FnMut(&TraceRecord)) {
        let Queued { state, .. } = q;
        let out = match result {
            Evaluated::Complete(support) => {
                let value = self.offer(support);
                self.emit(trace, state.depth, value);
                return;
            }
            Evaluated::Relaxed(out) => out,
        };
        let bound = out.bound;
        self.emit(trace, state.depth, bound);
        if bound >= self.threshold() {
            self.prune(bound);
            return;
        }
        let support = self.p.round(&state, &out.warm.w);
        let value = self.offer(support);
        if state.depth == 0 {
            self.improve();
        }
        if value <= bound + self.tolerance() || bound >= self.threshold() {
            // the incumbent closes this node
            self.prune(bound);
            return;
        }
        let Some(state) = self.fix_by_reduced_cost(state, out.dual.as_ref()) else {
            return;
        };
        if let Some(support) = self.p.completion(&state) {
            self.offer(support);
            return;
        }
        let w = &out.warm.w;
        let branch = pick_branch(w, |j| self.p.affordable(&state, j))
            .or_else(|| (0..n_of(&state)).find(|&j| self.p.affordable(&state, j)))
            .expect("incomplete node has an affordable free feature");

        let mut children = Vec::with_capacity(2);
        if let Some(child) = self.p.state_with(&state, branch, Fix::In) {
            children.push(child);
        }
        children.push(self.p.state_with(&state, branch, Fix::Out).expect("exclusion is feasible"));

        for mut child in children {
            child.depth = state.depth + 1;
            let inherited = match &out.dual {
                Some(dual) => self.p.bound_from_dual(&child, dual).0.max(bound),
                None => bound,
            };
            if inherited >= self.threshold() {
                self.prune(inherited);
                continue;
            }
            let mut child_warm = out.warm.clone();
            for j in 0..n_of(&child) {
                if child.fix[j] == Fix::Out {
                    child_warm.w[j] = 0.0;
                }
            }
            self.push(child, inherited, child_warm);
        }
    }

    /// Fixes free features whose inclusion (or exclusion) provably cannot
    /// beat the incumbent. Returns `None` when the whole node is closed.
    fn fix_by_reduced_cost(&mut self, mut state: NodeState, dual: Option<&DualPoint>) -> Option<NodeState> {
        let Some(dual) = dual else { return Some(state) };
        let a = self.p.scores(dual);
        for j in 0..self.p.n() {
            if state.fix[j] != Fix::Free {
                continue;
            }
            let threshold = self.threshold();
            let with = self
                .p
                .state_with(&state, j, Fix::In)
                .filter(|s| s.capacity >= 0.0 && self.p.costs[j] <= state.capacity);
            let bound_in = with
                .as_ref()
                .map_or(f64::INFINITY, |s| self.p.bound_with_scores(s, dual.entropy, &a).0);
            let without = self.p.state_with(&state, j, Fix::Out).expect("exclusion is feasible");
            let bound_out = self.p.bound_with_scores(&without, dual.entropy, &a).0;
            match (bound_in >= threshold, bound_out >= threshold) {
                (true, true) => {
                    self.prune(bound_in.min(bound_out));
                    return None;
                }
                (true, false) => {
                    if bound_in.is_finite() {
                        self.prune(bound_in);
                    }
                    state = without;
                }
                (false, true) => {
                    self.prune(bound_out);
                    state = with.expect("finite bound implies feasible inclusion");
                }
                (false, false) => {}
            }
        }
        Some(state)
    }

    fn emit(&self, trace: &mut impl FnMut(&TraceRecord), depth: usize, bound: f64) {
        let upper = self.upper();
        trace(&TraceRecord {
            depth,
            bound,
            incumbent: upper,
            gap: relative_gap(upper, bound.min(upper)),
        });
    }
}

fn n_of(s: &NodeState) -> usize {
    s.fix.len()
}
