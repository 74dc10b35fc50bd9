//! Bounded-variable primal simplex on a dense condensed tableau.
//!
//! Every row `lo <= a·x <= hi` gets a logical variable `s = a·x` with box
//! `[lo, hi]`, so the system is homogeneous and the tableau only stores the
//! nonbasic columns (`basic = T · nonbasic`). Phase 1 minimises the sum of
//! bound violations of the basic variables; phase 2 maximises the
//! objective. Nonbasic variables always sit at a finite bound, so the
//! returned point is a basic feasible solution.
//!
//! Pricing takes the strongest few reduced costs and picks the steepest
//! of them (reduced cost over column norm), falling back to Bland's
//! smallest-index rule after a run of degenerate pivots and staying there
//! until the objective moves again. [`Pricing::Bland`] uses Bland
//! throughout.

use crate::numeric::Scalar;

use super::{Certificate, LinearProgram};

/// Reduced-cost candidates whose column norms are compared each pivot.
const PRICING_CANDIDATES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pricing {
    Bland,
    /// Partial steepest edge with a Bland fallback on degenerate streaks.
    Hybrid,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Feasibility and optimality tolerance (ignored in exact mode).
    pub tol: f64,
    pub pricing: Pricing,
    /// Consecutive degenerate pivots before switching to Bland.
    pub degenerate_limit: usize,
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            pricing: Pricing::Hybrid,
            degenerate_limit: 30,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Outcome<S> {
    Optimal { values: Vec<S>, pivots: usize },
    Infeasible(Certificate),
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Basic(usize),
    NonBasic(usize),
}

struct Tableau<S: Scalar> {
    n_struct: usize,
    /// `t[r][c]`: coefficient of nonbasic column `c` in basic row `r`.
    t: Vec<Vec<S>>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    slot: Vec<Slot>,
    lower: Vec<Option<S>>,
    upper: Vec<Option<S>>,
    value: Vec<S>,
    cost: Vec<S>,
    tol: f64,
    pivot_tol: f64,
    pivots: usize,
}

fn finite<S: Scalar>(v: f64) -> Option<S> {
    if v.is_finite() {
        Some(S::from_f64(v))
    } else {
        None
    }
}

impl<S: Scalar> Tableau<S> {
    fn new(lp: &LinearProgram, rows: &[ActiveRow], tol: f64) -> Self {
        let n = lp.vars.len();
        let m = rows.len();
        let mut lower: Vec<Option<S>> = Vec::with_capacity(n + m);
        let mut upper: Vec<Option<S>> = Vec::with_capacity(n + m);
        for v in &lp.vars {
            lower.push(finite(v.lower));
            upper.push(finite(v.upper));
        }
        for r in rows {
            lower.push(finite(r.lower));
            upper.push(finite(r.upper));
        }
        let mut t = vec![vec![S::zero(); n]; m];
        for (i, r) in rows.iter().enumerate() {
            for &(j, a) in &lp.rows[r.index].coeffs {
                t[i][j] = t[i][j].clone() + S::from_f64(a);
            }
        }
        let mut value = Vec::with_capacity(n + m);
        for j in 0..n {
            value.push(match (&lower[j], &upper[j]) {
                (Some(l), _) => l.clone(),
                (None, Some(u)) => u.clone(),
                (None, None) => S::zero(),
            });
        }
        for row in t.iter() {
            let mut s = S::zero();
            for (c, coef) in row.iter().enumerate() {
                if !coef.near_zero(0.0) {
                    s = s + coef.clone() * value[c].clone();
                }
            }
            value.push(s);
        }
        let mut cost = vec![S::zero(); n + m];
        for (j, &c) in lp.objective.iter().enumerate() {
            cost[j] = S::from_f64(c);
        }
        let mut slot = Vec::with_capacity(n + m);
        slot.extend((0..n).map(Slot::NonBasic));
        slot.extend((0..m).map(Slot::Basic));
        Self {
            n_struct: n,
            t,
            basic: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            slot,
            lower,
            upper,
            value,
            cost,
            tol: if S::EXACT { 0.0 } else { tol },
            pivot_tol: if S::EXACT { 0.0 } else { 1e-9 },
            pivots: 0,
        }
    }

    fn below(&self, j: usize) -> bool {
        matches!(&self.lower[j], Some(l) if (l.clone() - self.value[j].clone()).is_pos(self.tol))
    }

    fn above(&self, j: usize) -> bool {
        matches!(&self.upper[j], Some(u) if (self.value[j].clone() - u.clone()).is_pos(self.tol))
    }

    fn infeasibility(&self) -> S {
        let mut s = S::zero();
        for &j in &self.basic {
            if self.below(j) {
                s = s + (self.lower[j].clone().unwrap() - self.value[j].clone());
            } else if self.above(j) {
                s = s + (self.value[j].clone() - self.upper[j].clone().unwrap());
            }
        }
        s
    }

    /// Reduced costs for the phase-1 objective (maximise the signed sum of
    /// violated basics moving toward feasibility).
    fn phase1_costs(&self) -> Vec<S> {
        let mut d = vec![S::zero(); self.nonbasic.len()];
        for (r, &j) in self.basic.iter().enumerate() {
            let sign = if self.below(j) {
                S::one()
            } else if self.above(j) {
                -S::one()
            } else {
                continue;
            };
            for (c, coef) in self.t[r].iter().enumerate() {
                if !coef.near_zero(0.0) {
                    d[c] = d[c].clone() + sign.clone() * coef.clone();
                }
            }
        }
        d
    }

    fn phase2_costs(&self) -> Vec<S> {
        let mut d: Vec<S> = self.nonbasic.iter().map(|&j| self.cost[j].clone()).collect();
        for (r, &j) in self.basic.iter().enumerate() {
            let cb = &self.cost[j];
            if cb.near_zero(0.0) {
                continue;
            }
            for (c, coef) in self.t[r].iter().enumerate() {
                if !coef.near_zero(0.0) {
                    d[c] = d[c].clone() + cb.clone() * coef.clone();
                }
            }
        }
        d
    }

    fn at_lower(&self, j: usize) -> bool {
        matches!(&self.lower[j], Some(l) if *l == self.value[j])
    }

    fn at_upper(&self, j: usize) -> bool {
        matches!(&self.upper[j], Some(u) if *u == self.value[j])
    }

    /// Picks the entering column and its direction (+1 increase, -1
    /// decrease) given reduced costs, or `None` at optimality.
    fn choose_entering(&self, d: &[S], bland: bool) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool)> = None;
        let mut best_score = S::zero();
        let mut candidates: Vec<(S, usize, bool)> = Vec::new();
        for (c, dc) in d.iter().enumerate() {
            let j = self.nonbasic[c];
            let fixed = matches!((&self.lower[j], &self.upper[j]), (Some(l), Some(u)) if l == u);
            if fixed {
                continue;
            }
            let can_up = !self.at_upper(j) && dc.is_pos(self.tol);
            let can_down = !self.at_lower(j) && dc.is_neg(self.tol);
            if !can_up && !can_down {
                continue;
            }
            if bland {
                let better = match best {
                    None => true,
                    Some((bc, _)) => j < self.nonbasic[bc],
                };
                if better {
                    best = Some((c, can_up));
                }
            } else {
                candidates.push((dc.abs(), c, can_up));
            }
        }
        if bland {
            return best;
        }
        // steepest edge over the strongest few reduced costs
        let keep = PRICING_CANDIDATES.min(candidates.len());
        if keep == 0 {
            return None;
        }
        if candidates.len() > keep {
            candidates.select_nth_unstable_by(keep - 1, |a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
            candidates.truncate(keep);
        }
        for (score, c, up) in candidates {
            let mut norm = S::one();
            for row in &self.t {
                let v = &row[c];
                if !v.near_zero(0.0) {
                    norm = norm + v.clone() * v.clone();
                }
            }
            let s = score.clone() * score / norm;
            if best.is_none() || s > best_score {
                best_score = s;
                best = Some((c, up));
            }
        }
        best
    }

    /// Ratio test. Returns `(step, leaving)`: `leaving = None` is a bound
    /// flip of the entering variable; `Err(())` means unbounded.
    fn ratio_test(&self, q: usize, up: bool, phase1: bool, bland: bool) -> Result<(S, Option<(usize, bool)>), ()> {
        let entering = self.nonbasic[q];
        let mut step: Option<S> = match (&self.lower[entering], &self.upper[entering]) {
            (Some(l), Some(u)) => Some(u.clone() - l.clone()),
            _ => None,
        };
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_pivot = S::zero();
        for (r, row) in self.t.iter().enumerate() {
            let coef = &row[q];
            if coef.near_zero(self.pivot_tol) {
                continue;
            }
            let rate = if up { coef.clone() } else { -coef.clone() };
            let j = self.basic[r];
            let increasing = rate > S::zero();
            let limit: Option<(S, bool)> = if phase1 && self.below(j) {
                if increasing {
                    Some(((self.lower[j].clone().unwrap() - self.value[j].clone()) / rate.clone(), false))
                } else {
                    None
                }
            } else if phase1 && self.above(j) {
                if increasing {
                    None
                } else {
                    Some(((self.value[j].clone() - self.upper[j].clone().unwrap()) / -rate.clone(), true))
                }
            } else if increasing {
                self.upper[j]
                    .as_ref()
                    .map(|u| ((u.clone() - self.value[j].clone()) / rate.clone(), true))
            } else {
                self.lower[j]
                    .as_ref()
                    .map(|l| ((self.value[j].clone() - l.clone()) / -rate.clone(), false))
            };
            let Some((mut lim, to_upper)) = limit else { continue };
            if lim < S::zero() {
                lim = S::zero();
            }
            let replace = match &step {
                None => true,
                Some(s) => {
                    let diff = lim.clone() - s.clone();
                    if diff.is_neg(self.tol) {
                        true
                    } else if diff.near_zero(self.tol) {
                        // tie: a pending bound flip wins; otherwise Bland
                        // prefers the smaller variable index and Dantzig the
                        // larger pivot
                        match leave {
                            None => false,
                            Some((lr, _)) => {
                                if bland {
                                    j < self.basic[lr]
                                } else {
                                    coef.abs() > leave_pivot
                                }
                            }
                        }
                    } else {
                        false
                    }
                }
            };
            if replace {
                step = Some(lim);
                leave = Some((r, to_upper));
                leave_pivot = coef.abs();
            }
        }
        match step {
            None => Err(()),
            Some(s) => Ok((s, leave)),
        }
    }

    fn pivot(&mut self, r: usize, q: usize, d: Option<&mut Vec<S>>) {
        let p = self.t[r][q].clone();
        let mut prow: Vec<(usize, S)> = Vec::new();
        for (c, v) in self.t[r].iter().enumerate() {
            if c != q && !v.near_zero(0.0) {
                prow.push((c, v.clone() / p.clone()));
            }
        }
        let chop = 1e-14;
        for i in 0..self.t.len() {
            if i == r {
                continue;
            }
            let f = self.t[i][q].clone();
            if f.near_zero(0.0) {
                continue;
            }
            let row = &mut self.t[i];
            for (c, v) in &prow {
                let nv = row[*c].clone() - f.clone() * v.clone();
                row[*c] = nv.chop(chop);
            }
            row[q] = (f / p.clone()).chop(chop);
        }
        if let Some(d) = d {
            let f = d[q].clone();
            if !f.near_zero(0.0) {
                for (c, v) in &prow {
                    let nv = d[*c].clone() - f.clone() * v.clone();
                    d[*c] = nv.chop(chop);
                }
                d[q] = f / p.clone();
            }
        }
        {
            let row = &mut self.t[r];
            for v in row.iter_mut() {
                if !v.near_zero(0.0) {
                    *v = -(v.clone() / p.clone());
                }
            }
            row[q] = S::one() / p;
        }
        let entering = self.nonbasic[q];
        let leaving = self.basic[r];
        self.basic[r] = entering;
        self.nonbasic[q] = leaving;
        self.slot[entering] = Slot::Basic(r);
        self.slot[leaving] = Slot::NonBasic(q);
        self.pivots += 1;
    }

    fn step(&mut self, q: usize, up: bool, theta: S, leave: Option<(usize, bool)>, d: Option<&mut Vec<S>>) {
        let entering = self.nonbasic[q];
        let delta = if up { theta.clone() } else { -theta.clone() };
        if !delta.near_zero(0.0) {
            self.value[entering] = self.value[entering].clone() + delta.clone();
            for r in 0..self.t.len() {
                let coef = &self.t[r][q];
                if !coef.near_zero(0.0) {
                    let j = self.basic[r];
                    self.value[j] = self.value[j].clone() + coef.clone() * delta.clone();
                }
            }
        }
        match leave {
            None => {
                // bound flip
                self.value[entering] = if up {
                    self.upper[entering].clone().unwrap()
                } else {
                    self.lower[entering].clone().unwrap()
                };
            }
            Some((r, to_upper)) => {
                let j = self.basic[r];
                self.value[j] = if to_upper {
                    self.upper[j].clone().unwrap()
                } else {
                    self.lower[j].clone().unwrap()
                };
                self.pivot(r, q, d);
            }
        }
    }

    /// Recomputes basic values from the nonbasic ones.
    fn refresh(&mut self) {
        for r in 0..self.t.len() {
            let mut s = S::zero();
            for (c, coef) in self.t[r].iter().enumerate() {
                if !coef.near_zero(0.0) {
                    s = s + coef.clone() * self.value[self.nonbasic[c]].clone();
                }
            }
            let j = self.basic[r];
            self.value[j] = s;
        }
    }

    fn run_phase(&mut self, phase1: bool, opts: &SimplexOptions, limit: usize) -> Result<(), Outcome<S>> {
        let mut degenerate = 0usize;
        let mut bland = opts.pricing == Pricing::Bland;
        let mut d = if phase1 { Vec::new() } else { self.phase2_costs() };
        let mut iterations = 0usize;
        loop {
            if iterations > limit {
                return Err(Outcome::IterationLimit);
            }
            if phase1 {
                if !self.infeasibility().is_pos(self.tol) {
                    return Ok(());
                }
                d = self.phase1_costs();
            }
            let Some((q, up)) = self.choose_entering(&d, bland) else {
                return Ok(());
            };
            let (theta, leave) = match self.ratio_test(q, up, phase1, bland) {
                Ok(v) => v,
                Err(()) => return Err(Outcome::Unbounded),
            };
            if theta.near_zero(self.tol) {
                degenerate += 1;
                if opts.pricing == Pricing::Hybrid && degenerate >= opts.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate = 0;
                if opts.pricing == Pricing::Hybrid {
                    bland = false;
                }
            }
            if phase1 {
                self.step(q, up, theta, leave, None);
            } else {
                self.step(q, up, theta, leave, Some(&mut d));
            }
            iterations += 1;
        }
    }
}

/// A row of the program kept by presolve, with the bounds that still bind.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ActiveRow {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Runs both phases. Rows must already be presolved (no empty rows, no
/// free rows).
///
/// With `prelude = Some((v, margin))` first maximises
/// variable `v`, raises its lower bound to `v* − margin` (or to its upper
/// bound when `v*` reaches it), and then maximises the objective of `lp`
/// from that basis. Also returns `v*`.
pub(crate) fn solve_staged<S: Scalar>(
    lp: &LinearProgram,
    rows: &[ActiveRow],
    opts: &SimplexOptions,
    prelude: Option<(usize, f64)>,
) -> (Outcome<S>, Option<S>) {
    let mut tab = Tableau::<S>::new(lp, rows, opts.tol);
    let size = tab.t.len() + tab.n_struct;
    let limit = opts.max_pivots.unwrap_or(200 * size + 10_000);
    let objective = tab.cost.clone();
    if let Some((v, _)) = prelude {
        tab.cost = vec![S::zero(); tab.cost.len()];
        tab.cost[v] = S::one();
    }
    if let Err(o) = tab.run_phase(true, opts, limit) {
        return (o, None);
    }
    tab.refresh();
    let infeas = tab.infeasibility();
    if infeas.is_pos(tab.tol * (1.0 + size as f64)) {
        let cert = Certificate::Phase1 {
            infeasibility: infeas.to_f64(),
        };
        return (Outcome::Infeasible(cert), None);
    }
    let mut staged = None;
    if let Some((v, margin)) = prelude {
        if let Err(o) = tab.run_phase(false, opts, limit) {
            return (o, None);
        }
        tab.refresh();
        let best = tab.value[v].clone();
        let floor = match &tab.upper[v] {
            Some(u) if !(u.clone() - best.clone()).is_pos(tab.tol) => u.clone(),
            _ => {
                let f = best.clone() - S::from_f64(margin);
                match &tab.lower[v] {
                    Some(l) if *l > f => l.clone(),
                    _ => f,
                }
            }
        };
        tab.lower[v] = Some(floor.clone());
        if matches!(tab.slot[v], Slot::NonBasic(_)) && floor > tab.value[v] {
            tab.value[v] = floor;
            tab.refresh();
        }
        tab.cost = objective;
        staged = Some(best);
    }
    if let Err(o) = tab.run_phase(false, opts, limit) {
        return (o, staged);
    }
    tab.refresh();
    let pivots = tab.pivots;
    let mut values = tab.value;
    values.truncate(tab.n_struct);
    (Outcome::Optimal { values, pivots }, staged)
}
