//! Linear programs over the edge variables and the vertex solver.
//!
//! Every builder returns a [`LinearProgram`] in maximisation form with one
//! `[0, 1]` variable per edge (in edge order) plus optional auxiliaries.
//! Rows are emitted in a fixed order: individual-fairness rows by
//! `(item, window)`, group rows by `(p, h)`, platform rows by `p`, then item
//! rows by item.

mod simplex;

use std::collections::BTreeMap;
use std::fmt::Write as _;


use crate::error::{Error, Result};
use crate::instance::{IfLabel, Instance, Window};
use crate::numeric::Scalar;

pub use simplex::{Pricing, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Edge(usize),
    /// Scalar auxiliary such as the feasibility multiplier or `μ`.
    Aux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Fairness { item: usize, label: IfLabel },
    /// Lower half of a fairness window scaled by an auxiliary.
    FairnessLower { item: usize, label: IfLabel },
    Group { platform: usize, group: usize },
    Platform(usize),
    Item(usize),
    Edge(usize),
    /// Total matching size floor.
    Size,
    /// Link between a group count and an auxiliary.
    GroupAux { platform: usize, group: usize },
    /// Link between an item's match probability and an auxiliary.
    ItemAux(usize),
}

/// `lower <= Σ coeff·var <= upper`; infinite bounds mean one-sided.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub kind: RowKind,
    pub coeffs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Maximised.
    pub objective: Vec<f64>,
    /// Hypothesis checks that failed while building (the LP is still valid).
    pub warnings: Vec<String>,
}

/// Integer windows for the group-fair matching LP and flow network.
///
/// `item` and `edge` are optional extra windows on per-item degree and on
/// single edges; the decomposition uses them to keep its iterates inside
/// the unit box.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GflpBounds {
    pub platform: Vec<Window>,
    pub group: BTreeMap<(usize, usize), Window>,
    pub item: Option<Vec<Window>>,
    pub edge: Option<Vec<Window>>,
}

impl GflpBounds {
    /// The instance's own windows (no item or edge windows).
    pub fn from_instance(instance: &Instance) -> Self {
        let platform = (0..instance.num_platforms())
            .map(|p| instance.platform_window(p))
            .collect();
        let group = instance
            .constrained_pairs()
            .into_iter()
            .map(|(p, h)| ((p, h), instance.group_window(p, h)))
            .collect();
        Self {
            platform,
            group,
            item: None,
            edge: None,
        }
    }

    /// Windows from float values, rejecting anything non-integral.
    pub fn from_f64(
        platform: &[(f64, f64)],
        group: &BTreeMap<(usize, usize), (f64, f64)>,
    ) -> Result<Self> {
        fn int(v: f64, what: &str) -> Result<i64> {
            if v.is_finite() && v.fract() == 0.0 {
                Ok(v as i64)
            } else {
                Err(Error::Input(format!("non-integer bound {v} in {what}")))
            }
        }
        let platform = platform
            .iter()
            .map(|&(l, u)| Ok(Window::new(int(l, "platform window")?, int(u, "platform window")?)))
            .collect::<Result<Vec<_>>>()?;
        let group = group
            .iter()
            .map(|(&k, &(l, u))| Ok((k, Window::new(int(l, "group window")?, int(u, "group window")?))))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self {
            platform,
            group,
            item: None,
            edge: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAssignment<S = f64> {
    /// One value per edge.
    pub x: Vec<S>,
    /// Value of the auxiliary variable, when the LP has one.
    pub aux: Option<S>,
    pub objective: S,
    /// Largest row or box violation after snapping.
    pub max_residual: f64,
    pub pivots: usize,
}

impl<S: Scalar> FractionalAssignment<S> {
    pub fn to_f64(&self) -> Vec<f64> {
        self.x.iter().map(|v| v.to_f64()).collect()
    }

    pub fn total(&self) -> S {
        self.x.iter().fold(S::zero(), |acc, v| acc + v.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// This row can never be satisfied (e.g. a positive lower bound on an
    /// empty sum).
    Row(usize),
    /// Phase 1 ended with this much total bound violation.
    Phase1 { infeasibility: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<S = f64> {
    Optimal(FractionalAssignment<S>),
    Infeasible(Certificate),
}

impl<S> LpOutcome<S> {
    pub fn status(&self) -> SolveStatus {
        match self {
            LpOutcome::Optimal(_) => SolveStatus::Optimal,
            LpOutcome::Infeasible(_) => SolveStatus::Infeasible,
        }
    }

    pub fn optimal(self) -> Option<FractionalAssignment<S>> {
        match self {
            LpOutcome::Optimal(a) => Some(a),
            LpOutcome::Infeasible(_) => None,
        }
    }

    /// The optimum, or [`Error::Infeasible`] describing the certificate.
    pub fn into_result(self, lp: &LinearProgram) -> Result<FractionalAssignment<S>> {
        match self {
            LpOutcome::Optimal(a) => Ok(a),
            LpOutcome::Infeasible(Certificate::Row(r)) => Err(Error::Infeasible(format!(
                "row {r} ({:?}) cannot be satisfied",
                lp.rows[r].kind
            ))),
            LpOutcome::Infeasible(Certificate::Phase1 { infeasibility }) => Err(Error::Infeasible(format!(
                "no feasible point (phase 1 stopped with violation {infeasibility:.3e})"
            ))),
        }
    }
}

impl LinearProgram {
    fn with_edges(instance: &Instance) -> Self {
        let vars = (0..instance.num_edges())
            .map(|e| Variable {
                kind: VarKind::Edge(e),
                lower: 0.0,
                upper: 1.0,
            })
            .collect();
        Self {
            vars,
            rows: Vec::new(),
            objective: vec![1.0; instance.num_edges()],
            warnings: Vec::new(),
        }
    }

    pub fn num_edge_vars(&self) -> usize {
        self.vars.iter().filter(|v| matches!(v.kind, VarKind::Edge(_))).count()
    }

    /// Appends an auxiliary variable and returns its index.
    pub fn add_aux(&mut self, lower: f64, upper: f64) -> usize {
        self.vars.push(Variable {
            kind: VarKind::Aux,
            lower,
            upper,
        });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    pub fn aux_index(&self) -> Option<usize> {
        self.vars.iter().position(|v| v.kind == VarKind::Aux)
    }

    pub fn rows_of<'a>(&'a self, pred: impl Fn(&RowKind) -> bool + 'a) -> impl Iterator<Item = (usize, &'a Row)> + 'a {
        self.rows.iter().enumerate().filter(move |(_, r)| pred(&r.kind))
    }

    fn push(&mut self, kind: RowKind, coeffs: Vec<(usize, f64)>, lower: f64, upper: f64) {
        self.rows.push(Row {
            kind,
            coeffs,
            lower,
            upper,
        });
    }

    fn push_fairness(&mut self, instance: &Instance) {
        let mut windows = instance.if_windows();
        windows.sort_by_key(|w| (w.item, w.label));
        for w in windows {
            let coeffs = w.edges.iter().map(|&e| (e, 1.0)).collect();
            self.push(
                RowKind::Fairness {
                    item: w.item,
                    label: w.label,
                },
                coeffs,
                w.lower,
                w.upper,
            );
        }
    }

    fn push_items(&mut self, instance: &Instance) {
        if !instance.item_capacity() {
            return;
        }
        for a in 0..instance.num_items() {
            let coeffs = instance.item_edges(a).iter().map(|&e| (e, 1.0)).collect();
            self.push(RowKind::Item(a), coeffs, f64::NEG_INFINITY, 1.0);
        }
    }

    fn push_group(&mut self, instance: &Instance, p: usize, h: usize, lower: f64, upper: f64) {
        let coeffs = instance.group_edges(p, h).into_iter().map(|e| (e, 1.0)).collect();
        self.push(RowKind::Group { platform: p, group: h }, coeffs, lower, upper);
    }

    fn push_windows(&mut self, instance: &Instance, bounds: &GflpBounds) {
        for (&(p, h), w) in &bounds.group {
            self.push_group(instance, p, h, w.lower as f64, w.upper as f64);
        }
        for (p, w) in bounds.platform.iter().enumerate() {
            let coeffs = instance.platform_edges(p).iter().map(|&e| (e, 1.0)).collect();
            self.push(RowKind::Platform(p), coeffs, w.lower as f64, w.upper as f64);
        }
        match &bounds.item {
            Some(items) => {
                for (a, w) in items.iter().enumerate() {
                    let coeffs = instance.item_edges(a).iter().map(|&e| (e, 1.0)).collect();
                    self.push(RowKind::Item(a), coeffs, w.lower as f64, w.upper as f64);
                }
            }
            None => self.push_items(instance),
        }
        if let Some(edges) = &bounds.edge {
            for (e, w) in edges.iter().enumerate() {
                self.push(RowKind::Edge(e), vec![(e, 1.0)], w.lower as f64, w.upper as f64);
            }
        }
    }

    /// Value of every row at `x` (which must cover all variables).
    pub fn row_values(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    /// Largest violation of any row or box bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xj) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xj).max(xj - v.upper);
        }
        for (r, s) in self.rows.iter().zip(self.row_values(x)) {
            worst = worst.max(r.lower - s).max(s - r.upper);
        }
        worst
    }

    /// CPLEX LP text, for cross-checking with external solvers.
    pub fn to_lp_text(&self) -> String {
        let name = |j: usize| match self.vars[j].kind {
            VarKind::Edge(e) => format!("x{e}"),
            VarKind::Aux => format!("aux{j}"),
        };
        let term_list = |coeffs: &mut dyn Iterator<Item = (usize, f64)>| {
            let mut s = String::new();
            for (i, (j, a)) in coeffs.enumerate() {
                let sign = if a < 0.0 { " -" } else if i == 0 { "" } else { " +" };
                let mag = a.abs();
                if mag == 1.0 {
                    let _ = write!(s, "{sign} {}", name(j));
                } else {
                    let _ = write!(s, "{sign} {mag} {}", name(j));
                }
            }
            if s.is_empty() {
                s.push_str(" 0 x0");
            }
            s
        };
        let mut out = String::from("\\ fair matching LP\nMaximize\n obj:");
        let mut obj = self.objective.iter().copied().enumerate().filter(|&(_, c)| c != 0.0);
        out.push_str(&term_list(&mut obj));
        out.push_str("\nSubject To\n");
        for (i, r) in self.rows.iter().enumerate() {
            let lhs = term_list(&mut r.coeffs.iter().copied());
            if r.lower == r.upper {
                let _ = writeln!(out, " r{i}:{lhs} = {}", r.lower);
                continue;
            }
            if r.lower.is_finite() {
                let _ = writeln!(out, " r{i}_lo:{lhs} >= {}", r.lower);
            }
            if r.upper.is_finite() {
                let _ = writeln!(out, " r{i}_hi:{lhs} <= {}", r.upper);
            }
        }
        out.push_str("Bounds\n");
        for (j, v) in self.vars.iter().enumerate() {
            let lo = if v.lower.is_finite() { v.lower.to_string() } else { "-inf".into() };
            let hi = if v.upper.is_finite() { v.upper.to_string() } else { "+inf".into() };
            let _ = writeln!(out, " {lo} <= {} <= {hi}", name(j));
        }
        out.push_str("End\n");
        out
    }
}

/// Individual-fairness rows, a group cap for every `(p, h)` pair and the
/// optional item rows.
pub fn build_primal_if(instance: &Instance) -> LinearProgram {
    let mut lp = LinearProgram::with_edges(instance);
    lp.push_fairness(instance);
    for p in 0..instance.num_platforms() {
        for h in 0..instance.num_groups() {
            let u = instance.group_window(p, h).upper as f64;
            lp.push_group(instance, p, h, f64::NEG_INFINITY, u);
        }
    }
    lp.push_items(instance);
    lp
}

/// Individual-fairness rows plus full group and platform windows.
pub fn build_disjoint(instance: &Instance) -> LinearProgram {
    let mut lp = LinearProgram::with_edges(instance);
    lp.push_fairness(instance);
    lp.push_windows(instance, &all_pair_bounds(instance));
    lp
}

/// Group and platform windows only, optionally overridden.
pub fn build_gflp(instance: &Instance, bounds: Option<&GflpBounds>) -> LinearProgram {
    let mut lp = LinearProgram::with_edges(instance);
    match bounds {
        Some(b) => lp.push_windows(instance, b),
        None => lp.push_windows(instance, &all_pair_bounds(instance)),
    }
    lp
}

fn all_pair_bounds(instance: &Instance) -> GflpBounds {
    let mut b = GflpBounds::from_instance(instance);
    for p in 0..instance.num_platforms() {
        for h in 0..instance.num_groups() {
            b.group.entry((p, h)).or_insert_with(|| instance.group_window(p, h));
        }
    }
    b
}

fn scaled_caps(instance: &Instance, g: usize, round: impl Fn(i64, i64) -> i64) -> Result<LinearProgram> {
    if g == 0 {
        return Err(Error::Precondition("g must be at least 1".into()));
    }
    let g = g as i64;
    let mut lp = LinearProgram::with_edges(instance);
    for (p, h) in instance.nonempty_pairs() {
        let u = instance.group_window(p, h).upper;
        if u < g {
            lp.warnings.push(format!("cap {u} at (p{p}, h{h}) is below g = {g}"));
        }
        lp.push_group(instance, p, h, f64::NEG_INFINITY, round(u, g) as f64);
    }
    lp.push_items(instance);
    Ok(lp)
}

/// Group caps `⌊u/g⌋` on a collapsed instance.
pub fn build_mod(instance: &Instance, g: usize) -> Result<LinearProgram> {
    scaled_caps(instance, g, |u, g| u.div_euclid(g))
}

/// Group caps `⌈u/g⌉` on a collapsed instance.
pub fn build_group_approx(instance: &Instance, g: usize) -> Result<LinearProgram> {
    scaled_caps(instance, g, |u, g| (u + g - 1).div_euclid(g))
}

/// Solves `lp` and returns a vertex optimum.
///
/// Float mode snaps values within `opts.tol` of an integer and then checks
/// every residual; a residual above `1e3·tol` is reported as a numerical
/// failure rather than returned.
pub fn solve_vertex<S: Scalar>(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpOutcome<S>> {
    Ok(solve_staged(lp, None, opts)?.0)
}

/// Maximises variable `var` first, then the objective of `lp` with `var`
/// held at least `var* − margin`; returns the final outcome and `var*`.
/// Starting the second stage from the first stage's basis avoids a second
/// feasibility search.
pub fn solve_vertex_staged<S: Scalar>(
    lp: &LinearProgram,
    var: usize,
    margin: f64,
    opts: &SimplexOptions,
) -> Result<(LpOutcome<S>, Option<S>)> {
    if var >= lp.vars.len() {
        return Err(Error::Input(format!("variable {var} out of range")));
    }
    solve_staged(lp, Some((var, margin)), opts)
}

fn solve_staged<S: Scalar>(
    lp: &LinearProgram,
    prelude: Option<(usize, f64)>,
    opts: &SimplexOptions,
) -> Result<(LpOutcome<S>, Option<S>)> {
    for (j, v) in lp.vars.iter().enumerate() {
        if v.lower > v.upper {
            return Err(Error::Input(format!("variable {j} has empty box")));
        }
    }
    // variable -> the item row containing it
    let mut cover = vec![usize::MAX; lp.vars.len()];
    for (i, r) in lp.rows.iter().enumerate() {
        if matches!(r.kind, RowKind::Item(_)) && r.coeffs.iter().all(|&(_, a)| a == 1.0) {
            for &(j, _) in &r.coeffs {
                cover[j] = i;
            }
        }
    }
    let mut active = Vec::with_capacity(lp.rows.len());
    for (i, r) in lp.rows.iter().enumerate() {
        if r.lower > r.upper {
            return Ok((LpOutcome::Infeasible(Certificate::Row(i)), None));
        }
        let nonzero = r.coeffs.iter().any(|&(_, a)| a != 0.0);
        if !nonzero {
            if r.lower > 0.0 || r.upper < 0.0 {
                return Ok((LpOutcome::Infeasible(Certificate::Row(i)), None));
            }
            continue;
        }
        // sides implied by the variable boxes never bind
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(j, a) in &r.coeffs {
            let (vl, vu) = (lp.vars[j].lower, lp.vars[j].upper);
            if a > 0.0 {
                lo += a * vl;
                hi += a * vu;
            } else {
                lo += a * vu;
                hi += a * vl;
            }
        }
        let lower = if lo >= r.lower { f64::NEG_INFINITY } else { r.lower };
        let mut upper = if hi <= r.upper { f64::INFINITY } else { r.upper };
        // nor does the upper side of a sum inside one item's capped edges
        if upper.is_finite() {
            let c = cover[r.coeffs[0].0];
            if c != usize::MAX
                && c != i
                && lp.rows[c].upper <= upper
                && r.coeffs.iter().all(|&(j, a)| a == 1.0 && cover[j] == c && lp.vars[j].lower >= 0.0)
            {
                upper = f64::INFINITY;
            }
        }
        if !lower.is_finite() && !upper.is_finite() {
            continue;
        }
        active.push(simplex::ActiveRow { index: i, lower, upper });
    }

    let (outcome, staged) = simplex::solve_staged::<S>(lp, &active, opts, prelude);
    let staged = staged.map(|v| v.snap(opts.tol));
    match outcome {
        simplex::Outcome::Optimal { values, pivots } => Ok((finish(lp, values, pivots, opts)?, staged)),
        simplex::Outcome::Infeasible(c) => Ok((LpOutcome::Infeasible(c), None)),
        simplex::Outcome::Unbounded => Err(Error::Numerical("objective unbounded on a bounded program".into())),
        simplex::Outcome::IterationLimit => Err(Error::Numerical("simplex iteration limit reached".into())),
    }
}

fn finish<S: Scalar>(lp: &LinearProgram, values: Vec<S>, pivots: usize, opts: &SimplexOptions) -> Result<LpOutcome<S>> {
    let values: Vec<S> = values.into_iter().map(|v| v.snap(opts.tol)).collect();
    let xf: Vec<f64> = values.iter().map(|v| v.to_f64()).collect();
    let max_residual = lp.max_violation(&xf).max(0.0);
    if !S::EXACT && max_residual > opts.tol * 1e3 {
        return Err(Error::Numerical(format!("residual {max_residual:.3e} after solve")));
    }
    let mut objective = S::zero();
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            objective = objective + S::from_f64(c) * values[j].clone();
        }
    }
    let mut x = Vec::new();
    let mut aux = None;
    for (v, val) in lp.vars.iter().zip(values) {
        match v.kind {
            VarKind::Edge(_) => x.push(val),
            VarKind::Aux => {
                if aux.is_none() {
                    aux = Some(val);
                }
            }
        }
    }
    Ok(LpOutcome::Optimal(FractionalAssignment {
        x,
        aux,
        objective,
        max_residual,
        pivots,
    }))
}

/// Solves in float mode with default options.
pub fn solve_f64(lp: &LinearProgram) -> Result<LpOutcome<f64>> {
    solve_vertex::<f64>(lp, &SimplexOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceDoc;
    use crate::numeric::Rational;

    fn d1(l: f64, u: f64) -> Instance {
        InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 0.0, 1.0)
            .with_default_preferences()
            .rank_window(0, 1, l, u)
            .rank_window(1, 1, l, u)
            .build()
            .unwrap()
    }

    fn optimum(lp: &LinearProgram) -> FractionalAssignment {
        solve_f64(lp).unwrap().optimal().expect("optimal")
    }

    #[test]
    fn single_box() {
        let mut lp = LinearProgram::default();
        lp.add_aux(0.0, 1.0);
        lp.objective[0] = 1.0;
        let sol = optimum(&lp);
        assert_eq!(sol.aux, Some(1.0));
    }

    #[test]
    fn single_edge_primal() {
        let inst = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0]])
            .group_bound(0, 0, 0.0, 1.0)
            .item_capacity(false)
            .build()
            .unwrap();
        let lp = build_primal_if(&inst);
        assert_eq!(lp.vars.len(), 1);
        assert_eq!(lp.rows.len(), 1);
        assert_eq!(optimum(&lp).x, vec![1.0]);
    }

    #[test]
    fn d1_half_half() {
        let lp = build_primal_if(&d1(0.5, 0.5));
        let sol = optimum(&lp);
        assert_eq!(sol.x, vec![0.5, 0.5]);
        assert_eq!(sol.objective, 1.0);
        let exact = solve_vertex::<Rational>(&lp, &SimplexOptions::default())
            .unwrap()
            .optimal()
            .unwrap();
        assert_eq!(exact.x, vec![Rational::from_f64(0.5); 2]);
    }

    #[test]
    fn row_count_formula() {
        // 3 items, 2 platforms, 2 groups, 2 windows per item
        let inst = InstanceDoc::new(3, 2, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 1)], vec![vec![0, 1], vec![2]])
            .with_default_preferences()
            .rank_window(0, 1, 0.0, 1.0)
            .rank_window(0, 2, 0.0, 1.0)
            .rank_window(1, 1, 0.0, 1.0)
            .rank_window(1, 2, 0.0, 1.0)
            .rank_window(2, 1, 0.0, 1.0)
            .build()
            .unwrap();
        let lp = build_primal_if(&inst);
        assert_eq!(lp.rows.len(), 5 + 2 * 2 + 3);
    }

    #[test]
    fn isolated_platform_with_lower_bound() {
        let inst = InstanceDoc::new(1, 2, &[(0, 0)], vec![vec![0]])
            .platform_bound(1, 1.0, 1.0)
            .build()
            .unwrap();
        let lp = build_disjoint(&inst);
        assert!(matches!(solve_f64(&lp).unwrap(), LpOutcome::Infeasible(Certificate::Row(_))));
    }

    #[test]
    fn disjoint_window_one() {
        let inst = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 1.0, 1.0)
            .build()
            .unwrap();
        assert_eq!(optimum(&build_disjoint(&inst)).objective, 1.0);
    }

    #[test]
    fn gflp_overrides() {
        let inst = d1(0.0, 1.0);
        let mut zero = GflpBounds::from_instance(&inst);
        zero.platform = vec![Window::new(0, 0)];
        for w in zero.group.values_mut() {
            *w = Window::new(0, 0);
        }
        assert_eq!(optimum(&build_gflp(&inst, Some(&zero))).objective, 0.0);
        assert_eq!(optimum(&build_gflp(&inst, None)).objective, 1.0);
        let mut one = zero.clone();
        one.platform = vec![Window::new(1, 1)];
        for w in one.group.values_mut() {
            *w = Window::new(1, 1);
        }
        assert_eq!(optimum(&build_gflp(&inst, Some(&one))).objective, 1.0);
        let bad = GflpBounds::from_f64(&[(0.0, 1.5)], &BTreeMap::new());
        assert!(bad.is_err());
    }

    #[test]
    fn scaled_cap_rounding() {
        for (u, floor, ceil) in [(2.0, 1.0, 1.0), (3.0, 1.0, 2.0), (1.0, 0.0, 1.0)] {
            let inst = InstanceDoc::new(3, 1, &[(0, 0), (1, 0), (2, 0)], vec![vec![0, 1, 2]])
                .group_bound(0, 0, 0.0, u)
                .build()
                .unwrap();
            let m = build_mod(&inst, 2).unwrap();
            let a = build_group_approx(&inst, 2).unwrap();
            assert_eq!(m.rows[0].upper, floor);
            assert_eq!(a.rows[0].upper, ceil);
            assert_eq!(m.warnings.is_empty(), u >= 2.0);
        }
        let inst = d1(0.0, 1.0);
        assert!(build_mod(&inst, 0).is_err());
    }

    #[test]
    fn lp_text_mentions_every_row() {
        let lp = build_primal_if(&d1(0.5, 0.5));
        let text = lp.to_lp_text();
        assert!(text.starts_with("\\"));
        assert!(text.contains("Maximize"));
        assert!(text.contains("r0: x0 = 0.5"));
        assert!(text.contains("End"));
    }
}
