//! Decomposing a fractional point into a distribution over integral
//! matchings.
//!
//! Each round rounds every window sum of the current point `x` down and up,
//! asks an [`IntegralSolver`] for a maximum matching `M` inside those
//! rounded windows, and peels off the largest multiple `α·M` that keeps
//! `(x − αM)/(1 − α)` inside the same windows. Windows are kept per
//! platform, per `(p, h)`, per item and per edge; the item and edge windows
//! keep the iterate inside the unit box and under item capacity.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{FlowSolver, IntegralSolver, Matching};
use crate::instance::{compute_stats, Instance, Window};
use crate::lp::{build_disjoint, solve_vertex, FractionalAssignment, GflpBounds, LpOutcome, SimplexOptions};
use crate::numeric::Scalar;
use crate::verify::{audit, FairnessReport};

/// Matchings with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingDistribution<S = f64> {
    pub entries: Vec<(Matching, S)>,
}

impl<S: Scalar> MatchingDistribution<S> {
    pub fn new(entries: Vec<(Matching, S)>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_weight(&self) -> S {
        self.entries.iter().fold(S::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// `Σ β M` per edge.
    pub fn marginals(&self, num_edges: usize) -> Vec<S> {
        let mut out = vec![S::zero(); num_edges];
        for (m, w) in &self.entries {
            for &e in &m.edges {
                out[e] = out[e].clone() + w.clone();
            }
        }
        out
    }

    /// Expected matching size `Σ β |M|`.
    pub fn expected_size(&self) -> S {
        self.entries
            .iter()
            .fold(S::zero(), |acc, (m, w)| acc + S::from_i64(m.len() as i64) * w.clone())
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, w)| w.to_f64()).collect()
    }

    pub fn to_f64(&self) -> MatchingDistribution<f64> {
        MatchingDistribution {
            entries: self.entries.iter().map(|(m, w)| (m.clone(), w.to_f64())).collect(),
        }
    }

    /// `{weights, matchings, trace_ref}`; weights are JSON numbers in float
    /// mode and `"p/q"` strings in exact mode.
    pub fn to_json(&self, trace_ref: Option<&str>) -> Value {
        let weights: Vec<Value> = self
            .entries
            .iter()
            .map(|(_, w)| if S::EXACT { Value::String(w.to_text()) } else { json!(w.to_f64()) })
            .collect();
        let matchings: Vec<&Vec<usize>> = self.entries.iter().map(|(m, _)| &m.edges).collect();
        json!({ "weights": weights, "matchings": matchings, "trace_ref": trace_ref })
    }
}

impl MatchingDistribution<f64> {
    /// Reads the JSON written by [`MatchingDistribution::to_json`]; string
    /// weights are converted to floats.
    pub fn from_json(instance: &Instance, value: &Value) -> Result<Self> {
        let bad = |msg: &str| Error::Input(format!("distribution: {msg}"));
        let weights = value["weights"].as_array().ok_or_else(|| bad("missing weights"))?;
        let matchings = value["matchings"].as_array().ok_or_else(|| bad("missing matchings"))?;
        if weights.len() != matchings.len() {
            return Err(bad("weights and matchings differ in length"));
        }
        let mut entries = Vec::with_capacity(weights.len());
        for (w, m) in weights.iter().zip(matchings) {
            let w = match w {
                Value::Number(n) => n.as_f64().ok_or_else(|| bad("weight out of range"))?,
                Value::String(s) => crate::numeric::parse_rational(s)
                    .map(|r| r.to_f64())
                    .ok_or_else(|| bad("unparsable weight"))?,
                _ => return Err(bad("weight must be a number or string")),
            };
            let edges = m
                .as_array()
                .ok_or_else(|| bad("matching must be an array"))?
                .iter()
                .map(|e| {
                    e.as_u64()
                        .map(|e| e as usize)
                        .filter(|&e| e < instance.num_edges())
                        .ok_or_else(|| bad("edge index out of range"))
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push((Matching::new(instance, edges), w));
        }
        Ok(Self { entries })
    }
}

/// What happened in one round, so the progress argument can be checked.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Event {
    EdgeZeroed(usize),
    /// A window sum that was fractional became integral.
    Tightened(WindowId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WindowId {
    Platform(usize),
    Group(usize, usize),
    Item(usize),
    Edge(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<S = f64> {
    pub platform_windows: Vec<Window>,
    pub group_windows: BTreeMap<(usize, usize), Window>,
    pub matching: Vec<usize>,
    pub alpha: S,
    pub beta: S,
    /// Γ after this round.
    pub gamma: S,
    /// `‖x‖₁` after this round.
    pub residual: S,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecompositionTrace<S = f64> {
    pub steps: Vec<TraceStep<S>>,
    /// Weight given to the empty matching when the point ran out before Γ
    /// did.
    pub empty_weight: Option<S>,
}

impl<S: Scalar> DecompositionTrace<S> {
    pub fn to_json(&self) -> Value {
        let num = |v: &S| if S::EXACT { Value::String(v.to_text()) } else { json!(v.to_f64()) };
        let steps: Vec<Value> = self
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let events: Vec<Value> = s
                    .events
                    .iter()
                    .map(|ev| match ev {
                        Event::EdgeZeroed(e) => json!({ "edge_zeroed": e }),
                        Event::Tightened(w) => json!({ "tightened": window_label(*w) }),
                    })
                    .collect();
                json!({
                    "iteration": i + 1,
                    "platform_windows": s.platform_windows.iter().map(|w| [w.lower, w.upper]).collect::<Vec<_>>(),
                    "group_windows": s.group_windows.iter().map(|(&(p, h), w)| json!([p, h, w.lower, w.upper])).collect::<Vec<_>>(),
                    "matching": s.matching,
                    "alpha": num(&s.alpha),
                    "beta": num(&s.beta),
                    "gamma": num(&s.gamma),
                    "residual": num(&s.residual),
                    "events": events,
                })
            })
            .collect();
        json!({ "steps": steps, "empty_weight": self.empty_weight.as_ref().map(num) })
    }
}

fn window_label(w: WindowId) -> String {
    match w {
        WindowId::Platform(p) => format!("platform {p}"),
        WindowId::Group(p, h) => format!("group ({p},{h})"),
        WindowId::Item(a) => format!("item {a}"),
        WindowId::Edge(e) => format!("edge {e}"),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecompOptions {
    /// Snapping tolerance for window sums (float mode).
    pub tol: f64,
    /// Values at or below this are treated as zero (float mode).
    pub zero_tol: f64,
    pub max_iterations: Option<usize>,
}

impl Default for DecompOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            zero_tol: 1e-12,
            max_iterations: None,
        }
    }
}

/// Window sums of `x` in a fixed order: platforms, `(p, h)` pairs, items,
/// edges.
struct Sums<S> {
    ids: Vec<WindowId>,
    values: Vec<S>,
}

impl<S: Scalar> Sums<S> {
    fn layout(instance: &Instance) -> (Vec<WindowId>, Vec<Vec<usize>>) {
        let mut ids = Vec::new();
        let mut members = Vec::new();
        for p in 0..instance.num_platforms() {
            ids.push(WindowId::Platform(p));
            members.push(instance.platform_edges(p).to_vec());
        }
        for (p, h) in instance.nonempty_pairs() {
            ids.push(WindowId::Group(p, h));
            members.push(instance.group_edges(p, h));
        }
        for a in 0..instance.num_items() {
            ids.push(WindowId::Item(a));
            members.push(instance.item_edges(a).to_vec());
        }
        for e in 0..instance.num_edges() {
            ids.push(WindowId::Edge(e));
            members.push(vec![e]);
        }
        (ids, members)
    }

    fn compute(ids: &[WindowId], members: &[Vec<usize>], x: &[S], tol: f64) -> Self {
        let values = members
            .iter()
            .map(|es| es.iter().fold(S::zero(), |acc, &e| acc + x[e].clone()).snap(tol))
            .collect();
        Self {
            ids: ids.to_vec(),
            values,
        }
    }

    /// A window sum that became integral stays integral in exact
    /// arithmetic; holding it there keeps float drift from loosening it.
    fn pin(&mut self, pinned: &mut [Option<S>], tol: f64) {
        for (v, p) in self.values.iter_mut().zip(pinned.iter_mut()) {
            match p {
                Some(k) => *v = k.clone(),
                None if v.is_integral(tol) => *p = Some(v.clone()),
                None => {}
            }
        }
    }

    fn window(&self, i: usize) -> Window {
        Window::new(self.values[i].floor().to_i64(), self.values[i].ceil().to_i64())
    }

    fn bounds(&self, instance: &Instance) -> GflpBounds {
        let mut b = GflpBounds {
            platform: Vec::with_capacity(instance.num_platforms()),
            group: BTreeMap::new(),
            item: Some(Vec::with_capacity(instance.num_items())),
            edge: Some(Vec::with_capacity(instance.num_edges())),
        };
        // the instance windows already hold in exact arithmetic; clamping
        // to them keeps amplified float drift from loosening a tight one
        let unit = Window::new(0, 1);
        for (i, id) in self.ids.iter().enumerate() {
            let w = self.window(i);
            match *id {
                WindowId::Platform(p) => b.platform.push(clamp(w, instance.platform_window(p))),
                WindowId::Group(p, h) => {
                    b.group.insert((p, h), clamp(w, instance.group_window(p, h)));
                }
                WindowId::Item(_) if instance.item_capacity() => b.item.as_mut().unwrap().push(clamp(w, unit)),
                WindowId::Item(_) => b.item.as_mut().unwrap().push(w),
                WindowId::Edge(_) => b.edge.as_mut().unwrap().push(clamp(w, unit)),
            }
        }
        b
    }
}

/// `w ∩ outer`, or `w` when they are disjoint.
fn clamp(w: Window, outer: Window) -> Window {
    let (lo, hi) = (w.lower.max(outer.lower), w.upper.min(outer.upper));
    if lo <= hi {
        Window::new(lo, hi)
    } else {
        w
    }
}

fn count_in(m: &Matching, members: &[usize]) -> i64 {
    members.iter().filter(|&&e| m.contains(e)).count() as i64
}

/// Largest `α` such that peeling `α·M` off `x` and renormalising keeps
/// every window: the minimum of the matched values and, for each window
/// whose sum `s` is fractional, `frac(s)` when `M` sits on `⌈s⌉` or
/// `⌈s⌉ − s` when it sits on `⌊s⌋`. Zero candidates are skipped.
///
/// `windows` holds `(edge set, snapped sum)` pairs.
pub fn find_coefficient<S: Scalar>(x: &[S], m: &Matching, windows: &[(&[usize], S)], tol: f64) -> Result<S> {
    if !x.iter().any(|v| v.is_pos(0.0)) {
        return Err(Error::Input("point has no positive entries".into()));
    }
    let mut alpha: Option<S> = None;
    let mut offer = |v: S| {
        if v.is_pos(0.0) && alpha.as_ref().is_none_or(|a| v < *a) {
            alpha = Some(v);
        }
    };
    for &e in &m.edges {
        offer(x[e].clone());
    }
    for (members, s) in windows {
        if s.is_integral(tol) {
            continue;
        }
        let lo = s.floor();
        let hi = s.ceil();
        let c = S::from_i64(count_in(m, members));
        if c == hi {
            offer(s.clone() - lo);
        } else if c == lo {
            offer(hi - s.clone());
        }
    }
    alpha.ok_or_else(|| Error::Numerical("no positive coefficient candidate".into()))
}

/// Decomposes `x` into a distribution over matchings from `solver`.
///
/// `x` must lie in the polytope cut out by the instance's windows (or by a
/// scaled variant of them); every produced matching satisfies the rounded
/// windows of the point it was drawn from. Fails with
/// [`Error::Infeasible`] when `x` is zero at entry.
pub fn distribution_calculator<S: Scalar>(
    instance: &Instance,
    x: &[S],
    solver: &dyn IntegralSolver,
    opts: &DecompOptions,
) -> Result<(MatchingDistribution<S>, DecompositionTrace<S>)> {
    if x.len() != instance.num_edges() {
        return Err(Error::Input(format!("point has {} entries for {} edges", x.len(), instance.num_edges())));
    }
    let zero_tol = if S::EXACT { 0.0 } else { opts.zero_tol };
    let tol = if S::EXACT { 0.0 } else { opts.tol };
    let clean = |v: S, zt: f64| if v.near_zero(zt) || v.is_neg(0.0) { S::zero() } else { v.chop(zt) };
    let mut x: Vec<S> = x.iter().cloned().map(|v| clean(v, zero_tol)).collect();
    // rescaling by 1/Γ amplifies roundoff, so float tolerances track the
    // iterate's noise floor; errors at that level cost only Γ·tol in the
    // reconstruction
    let noise = |gamma: &S| {
        if S::EXACT {
            0.0
        } else {
            8.0 * instance.num_edges().max(1) as f64 * f64::EPSILON / gamma.to_f64()
        }
    };
    if !x.iter().any(|v| v.is_pos(0.0)) {
        return Err(Error::Infeasible("the fractional point is zero; no matching to distribute".into()));
    }

    let (ids, members) = Sums::<S>::layout(instance);
    let limit = opts
        .max_iterations
        .unwrap_or(4 * (instance.num_edges() + 2 * ids.len()) + 16);
    let mut gamma = S::one();
    let mut entries = Vec::new();
    let mut trace = DecompositionTrace { steps: Vec::new(), empty_weight: None };
    let mut sums = Sums::compute(&ids, &members, &x, tol);
    let mut pinned: Vec<Option<S>> = vec![None; ids.len()];
    sums.pin(&mut pinned, tol);
    // leftover mass this small is LP error, not a further matching
    let residue = zero_tol.max(4.0 * tol);

    while x.iter().any(|v| v.is_pos(0.0)) {
        if trace.steps.len() >= limit {
            return Err(Error::Numerical(format!("decomposition did not finish in {limit} rounds")));
        }
        let floor = noise(&gamma);
        let (tol, zero_tol) = (tol.max(floor), zero_tol.max(floor));
        let bounds = sums.bounds(instance);
        let m = solver
            .solve(instance, &bounds)?
            .ok_or_else(|| Error::Numerical("no integral matching inside the rounded windows".into()))?;
        if m.is_empty() {
            return Err(Error::Numerical("integral solver returned an empty matching for a nonzero point".into()));
        }
        let windows: Vec<(&[usize], S)> = members
            .iter()
            .map(Vec::as_slice)
            .zip(sums.values.iter().cloned())
            .collect();
        let mut alpha = find_coefficient(&x, &m, &windows, tol)?;
        if alpha > S::one() || (S::one() - alpha.clone()).near_zero(tol) {
            alpha = S::one();
        }
        let beta = gamma.clone() * alpha.clone();
        let before: Vec<bool> = x.iter().map(|v| v.is_pos(0.0)).collect();
        let fractional_before: Vec<bool> = sums.values.iter().map(|s| !s.is_integral(tol)).collect();

        if alpha == S::one() {
            x.iter_mut().for_each(|v| *v = S::zero());
            gamma = S::zero();
        } else {
            let keep = S::one() - alpha.clone();
            for &e in &m.edges {
                x[e] = x[e].clone() - alpha.clone();
            }
            for v in x.iter_mut() {
                if !v.near_zero(0.0) {
                    *v = clean(v.clone() / keep.clone(), noise(&(gamma.clone() * keep.clone())).max(zero_tol));
                }
            }
            gamma = gamma * keep;
        }
        let tol = tol.max(noise(&gamma));
        sums = Sums::compute(&ids, &members, &x, tol);
        sums.pin(&mut pinned, tol);

        let mut events = Vec::new();
        for (e, was) in before.iter().enumerate() {
            if *was && !x[e].is_pos(0.0) {
                events.push(Event::EdgeZeroed(e));
            }
        }
        for (i, was) in fractional_before.iter().enumerate() {
            if *was && pinned[i].is_some() {
                events.push(Event::Tightened(ids[i]));
            }
        }
        let residual = x.iter().fold(S::zero(), |acc, v| acc + v.clone());
        trace.steps.push(TraceStep {
            platform_windows: bounds.platform.clone(),
            group_windows: bounds.group.clone(),
            matching: m.edges.clone(),
            alpha,
            beta: beta.clone(),
            gamma: gamma.clone(),
            residual,
            events,
        });
        entries.push((m, beta));
        // with almost no weight left, rescaling would only amplify
        // roundoff; the residue joins the last matching
        if !S::EXACT && gamma.is_pos(0.0) && !gamma.is_pos(residue) {
            let last = entries.last_mut().expect("just pushed");
            last.1 = last.1.clone() + gamma.clone();
            gamma = S::zero();
            break;
        }
    }
    if gamma.is_pos(zero_tol) {
        entries.push((Matching::empty(instance), gamma.clone()));
        trace.empty_weight = Some(gamma);
    }
    Ok((MatchingDistribution::new(merge_duplicates(entries)), trace))
}

/// Sums the weights of repeated matchings, keeping first-seen order.
fn merge_duplicates<S: Scalar>(entries: Vec<(Matching, S)>) -> Vec<(Matching, S)> {
    let mut index: std::collections::HashMap<Vec<usize>, usize> = std::collections::HashMap::new();
    let mut out: Vec<(Matching, S)> = Vec::with_capacity(entries.len());
    for (m, w) in entries {
        match index.get(&m.edges) {
            Some(&i) => out[i].1 = out[i].1.clone() + w,
            None => {
                index.insert(m.edges.clone(), out.len());
                out.push((m, w));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExactSolution<S = f64> {
    pub lp: FractionalAssignment<S>,
    pub distribution: MatchingDistribution<S>,
    pub trace: DecompositionTrace<S>,
    pub report: FairnessReport,
}

/// Solves the disjoint-group LP and decomposes its optimum with the flow
/// solver. Every support matching meets all group and platform windows and
/// every individual-fairness window holds exactly in expectation.
pub fn exact_disjoint_solve<S: Scalar>(instance: &Instance, opts: &SimplexOptions) -> Result<ExactSolution<S>> {
    exact_disjoint_solve_with(instance, opts, &FlowSolver)
}

pub fn exact_disjoint_solve_with<S: Scalar>(
    instance: &Instance,
    opts: &SimplexOptions,
    solver: &dyn IntegralSolver,
) -> Result<ExactSolution<S>> {
    require_disjoint(instance)?;
    let lp = build_disjoint(instance);
    let sol = match solve_vertex::<S>(&lp, opts)? {
        LpOutcome::Optimal(s) => s,
        other => return Err(other.into_result(&lp).unwrap_err()),
    };
    decompose_solution(instance, sol, solver)
}

pub(crate) fn decompose_solution<S: Scalar>(
    instance: &Instance,
    sol: FractionalAssignment<S>,
    solver: &dyn IntegralSolver,
) -> Result<ExactSolution<S>> {
    let (distribution, trace) = distribution_calculator(instance, &sol.x, solver, &DecompOptions::default())?;
    let tol = if S::EXACT { 0.0 } else { 1e-9 };
    let report = audit(instance, &distribution, &S::one(), &S::zero(), tol);
    Ok(ExactSolution {
        lp: sol,
        distribution,
        trace,
        report,
    })
}

pub(crate) fn require_disjoint(instance: &Instance) -> Result<()> {
    let stats = compute_stats(instance);
    if stats.delta > 1 || (0..instance.num_edges()).any(|e| instance.edge_groups(e).len() != 1) {
        return Err(Error::Precondition(format!(
            "the exact algorithm needs disjoint groups (found an item in {} groups)",
            stats.delta
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceDoc;
    use crate::numeric::Rational;

    fn single_platform(n: usize, cap: f64) -> Instance {
        let edges: Vec<(usize, usize)> = (0..n).map(|a| (a, 0)).collect();
        InstanceDoc::new(n, 1, &edges, vec![(0..n).collect()])
            .group_bound(0, 0, 0.0, cap)
            .with_default_preferences()
            .build()
            .unwrap()
    }

    fn platform_windows(inst: &Instance, x: &[f64]) -> Vec<(Vec<usize>, f64)> {
        (0..inst.num_platforms())
            .map(|p| {
                let es = inst.platform_edges(p).to_vec();
                let s = es.iter().map(|&e| x[e]).sum::<f64>();
                (es, s)
            })
            .collect()
    }

    #[test]
    fn coefficient_examples() {
        let inst = single_platform(1, 1.0);
        let m = Matching::new(&inst, vec![0]);
        assert_eq!(find_coefficient(&[1.0], &m, &[], 1e-9).unwrap(), 1.0);

        let inst = single_platform(2, 2.0);
        let both = Matching::new(&inst, vec![0, 1]);
        for (x, want) in [([0.7, 0.6], 0.3), ([0.2, 0.9], 0.1)] {
            let w = platform_windows(&inst, &x);
            let refs: Vec<(&[usize], f64)> = w.iter().map(|(es, s)| (es.as_slice(), *s)).collect();
            let got = find_coefficient(&x, &both, &refs, 1e-9).unwrap();
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(find_coefficient(&[0.0, 0.0], &both, &[], 1e-9).is_err());
    }

    #[test]
    fn integral_point_is_one_entry() {
        let inst = single_platform(2, 1.0);
        let (d, trace) = distribution_calculator(&inst, &[1.0, 0.0], &FlowSolver, &DecompOptions::default()).unwrap();
        assert_eq!(d.entries.len(), 1);
        assert_eq!(d.entries[0].0.edges, vec![0]);
        assert_eq!(d.entries[0].1, 1.0);
        assert_eq!(trace.steps[0].alpha, 1.0);
    }

    #[test]
    fn d1_halves() {
        let inst = single_platform(2, 1.0);
        let half = Rational::from_f64(0.5);
        let (d, _) =
            distribution_calculator(&inst, &[half.clone(), half.clone()], &FlowSolver, &DecompOptions::default())
                .unwrap();
        let mut got: Vec<(Vec<usize>, Rational)> = d.entries.iter().map(|(m, w)| (m.edges.clone(), w.clone())).collect();
        got.sort();
        assert_eq!(got, vec![(vec![0], half.clone()), (vec![1], half)]);
    }

    #[test]
    fn empty_matching_takes_leftover_weight() {
        let inst = single_platform(1, 1.0);
        let (d, trace) = distribution_calculator(&inst, &[0.5], &FlowSolver, &DecompOptions::default()).unwrap();
        assert_eq!(d.total_weight(), 1.0);
        assert_eq!(trace.empty_weight, Some(0.5));
        assert_eq!(d.marginals(1), vec![0.5]);
    }

    #[test]
    fn zero_point_is_infeasible() {
        let inst = single_platform(1, 1.0);
        let err = distribution_calculator(&inst, &[0.0], &FlowSolver, &DecompOptions::default()).unwrap_err();
        assert!(err.is_infeasible());
    }

    #[test]
    fn two_platform_trace() {
        // items 0 and 1 each on both platforms
        let inst = InstanceDoc::new(2, 2, &[(0, 0), (1, 0), (0, 1), (1, 1)], vec![vec![0, 1]])
            .build()
            .unwrap();
        let x = [0.7, 0.6, 0.3, 0.4];
        let (d, trace) = distribution_calculator(&inst, &x, &FlowSolver, &DecompOptions::default()).unwrap();
        let back = d.marginals(4);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((d.total_weight() - 1.0).abs() < 1e-12);
        assert!(trace.steps.iter().all(|s| !s.events.is_empty()));
    }

    #[test]
    fn exact_solver_d1() {
        let inst = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 0.0, 1.0)
            .with_default_preferences()
            .rank_window(0, 1, 0.5, 0.5)
            .rank_window(1, 1, 0.5, 0.5)
            .build()
            .unwrap();
        let sol = exact_disjoint_solve::<Rational>(&inst, &SimplexOptions::default()).unwrap();
        assert_eq!(sol.distribution.len(), 2);
        assert!(sol.distribution.entries.iter().all(|(_, w)| *w == Rational::from_f64(0.5)));
        assert!(sol.report.all_pass());
    }

    #[test]
    fn exact_solver_single_item_top_choice() {
        let inst = InstanceDoc::new(1, 2, &[(0, 0), (0, 1)], vec![vec![0]])
            .prefer(0, &[1, 0])
            .rank_window(0, 1, 1.0, 1.0)
            .build()
            .unwrap();
        let sol = exact_disjoint_solve::<f64>(&inst, &SimplexOptions::default()).unwrap();
        assert_eq!(sol.distribution.len(), 1);
        assert_eq!(sol.distribution.entries[0].0.edges, vec![inst.edge_id(0, 1).unwrap()]);
    }

    #[test]
    fn exact_solver_rejects_empty_pair_lower_bound() {
        let inst = InstanceDoc::new(1, 2, &[(0, 0)], vec![vec![0]])
            .group_bound(1, 0, 1.0, 1.0)
            .build()
            .unwrap();
        assert!(exact_disjoint_solve::<f64>(&inst, &SimplexOptions::default())
            .unwrap_err()
            .is_infeasible());
    }
}
