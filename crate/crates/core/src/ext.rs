//! Feasibility scaling and alternative fairness objectives, plus the
//! driver that runs any algorithm end to end.
//!
//! When the individual-fairness lower bounds cannot all be met,
//! [`feasibility_scale`] finds the largest `t ∈ [0, 1]` such that the
//! bounds multiplied by `t` can be; upper bounds are left alone.
//!
//! The objectives other than [`Variant::Standard`] add an auxiliary `μ`:
//! maximise the smallest `(p, h)` count (`MaxminGroup`), minimise the
//! largest (`MindomGroup`), or maximise the smallest per-item match
//! probability (`MaxminIndividual`), subject to a total size floor `ζ`.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::decomp::{decompose_solution, exact_disjoint_solve, require_disjoint, MatchingDistribution};
use crate::error::{Error, Result};
use crate::gapprox::{g_solve, gapprox_from_point, two_g_solve, GApproxResult, GMode};
use crate::greedy::{bicriteria_decompose, bicriteria_from_point, GreedyRunResult, ScanOrder};
use crate::instance::{GenericIfConstraint, Instance, Window};
use crate::lp::{
    build_disjoint, build_primal_if, solve_vertex, solve_vertex_staged, FractionalAssignment, LinearProgram, LpOutcome, RowKind,
    SimplexOptions, VarKind,
};
use crate::flow::FlowSolver;
use crate::numeric::Scalar;
use crate::verify::{audit, FairnessReport};

/// Safety margin subtracted from a fractional multiplier before scaling,
/// so that rounding in the scaled bounds cannot make the program
/// infeasible again.
const SCALE_MARGIN: f64 = 1e-10;

/// `lp` with every positive individual-fairness lower bound `L` moved into
/// a row `Σx − L·t ≥ 0` over a new auxiliary `t ∈ [0, 1]`; returns the
/// index of `t` and whether any bound was moved.
fn scale_probe(lp: &LinearProgram) -> (LinearProgram, usize, bool) {
    let mut probe = lp.clone();
    let t = probe.add_aux(0.0, 1.0);
    let mut extra = Vec::new();
    for row in &mut probe.rows {
        if let RowKind::Fairness { item, label } = row.kind {
            if row.lower > 0.0 {
                let mut coeffs = row.coeffs.clone();
                coeffs.push((t, -row.lower));
                extra.push(crate::lp::Row {
                    kind: RowKind::FairnessLower { item, label },
                    coeffs,
                    lower: 0.0,
                    upper: f64::INFINITY,
                });
                row.lower = f64::NEG_INFINITY;
            }
        }
    }
    let moved = !extra.is_empty();
    probe.rows.extend(extra);
    (probe, t, moved)
}

fn no_fair_matching() -> Error {
    Error::Infeasible("no group-fair matching exists even with every individual lower bound at zero".into())
}

/// Largest multiplier `t*` on the individual-fairness lower bounds of `lp`
/// that keeps it feasible, and `lp` with those bounds scaled by `t*`.
pub fn feasibility_scale(lp: &LinearProgram, opts: &SimplexOptions) -> Result<(f64, LinearProgram)> {
    let (mut probe, t, _) = scale_probe(lp);
    probe.objective.iter_mut().for_each(|c| *c = 0.0);
    let t_star = match solve_vertex_staged::<f64>(&probe, t, 0.0, opts)? {
        (LpOutcome::Optimal(_), Some(v)) => v.clamp(0.0, 1.0),
        _ => return Err(no_fair_matching()),
    };
    let mut scaled = lp.clone();
    for row in &mut scaled.rows {
        if matches!(row.kind, RowKind::Fairness { .. }) && row.lower > 0.0 {
            row.lower *= t_star;
        }
    }
    Ok((t_star, scaled))
}

/// An LP optimum, possibly after scaling individual lower bounds.
#[derive(Debug, Clone)]
pub struct ScaledSolve<S = f64> {
    /// The instance the LP was finally built from (lower bounds scaled).
    pub instance: Instance,
    pub lp: LinearProgram,
    pub solution: FractionalAssignment<S>,
    /// 1 when no scaling was needed.
    pub t_star: f64,
}

/// Builds and solves `build(instance)`. Individual lower bounds are
/// relaxed to `L·t`; the solver first maximises `t` and then the objective
/// with `t` held near its best value `t*`. If `t* < 1` the result is for
/// the instance with lower bounds scaled by `t*` (less a small margin), or
/// an infeasibility error when `auto` is off.
pub fn solve_scaled<S: Scalar>(
    instance: &Instance,
    build: impl Fn(&Instance) -> LinearProgram,
    auto: bool,
    opts: &SimplexOptions,
) -> Result<ScaledSolve<S>> {
    let lp = build(instance);
    let (probe, t, moved) = scale_probe(&lp);
    if !moved {
        return match solve_vertex::<S>(&lp, opts)? {
            LpOutcome::Optimal(solution) => Ok(ScaledSolve {
                instance: instance.clone(),
                lp,
                solution,
                t_star: 1.0,
            }),
            LpOutcome::Infeasible(_) => Err(no_fair_matching()),
        };
    }
    let margin = if S::EXACT { 0.0 } else { SCALE_MARGIN };
    let (outcome, best) = solve_vertex_staged::<S>(&probe, t, margin, opts)?;
    let (LpOutcome::Optimal(solution), Some(best)) = (outcome, best) else {
        return Err(no_fair_matching());
    };
    let t_star = best.to_f64().clamp(0.0, 1.0);
    if t_star >= 1.0 {
        return Ok(ScaledSolve {
            instance: instance.clone(),
            lp,
            solution,
            t_star: 1.0,
        });
    }
    if !auto {
        return Err(Error::Infeasible(format!(
            "the fairness windows cannot all be met; the individual lower bounds are satisfiable only \
             when scaled by {t_star:.6} (enable lower-bound scaling)"
        )));
    }
    let scaled = instance.with_scaled_if_lower(scaled_multiplier(t_star));
    let lp = build(&scaled);
    Ok(ScaledSolve {
        instance: scaled,
        lp,
        solution,
        t_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxSense {
    /// Maximise `μ`.
    Max,
    /// Maximise `−μ`.
    Min,
}

/// Replaces the objective of `lp` by `±μ` (its auxiliary variable) and adds
/// the size floor `Σ x ≥ ζ`.
pub fn update_lp(lp: &LinearProgram, sense: AuxSense, zeta: f64) -> Result<LinearProgram> {
    let aux = lp
        .aux_index()
        .ok_or_else(|| Error::Input("program has no auxiliary variable to optimise".into()))?;
    let mut out = lp.clone();
    out.objective.iter_mut().for_each(|c| *c = 0.0);
    out.objective[aux] = match sense {
        AuxSense::Max => 1.0,
        AuxSense::Min => -1.0,
    };
    let coeffs = out
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v.kind, VarKind::Edge(_)))
        .map(|(j, _)| (j, 1.0))
        .collect();
    out.rows.push(crate::lp::Row {
        kind: RowKind::Size,
        coeffs,
        lower: zeta,
        upper: f64::INFINITY,
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    #[default]
    Standard,
    MaxminGroup,
    MindomGroup,
    MaxminIndividual,
}

impl Variant {
    pub fn parse(text: &str) -> Result<Self> {
        match text.replace('-', "_").as_str() {
            "standard" => Ok(Variant::Standard),
            "maxmin_group" => Ok(Variant::MaxminGroup),
            "mindom_group" => Ok(Variant::MindomGroup),
            "maxmin_individual" => Ok(Variant::MaxminIndividual),
            other => Err(Error::Input(format!("unknown objective '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::MaxminGroup => "maxmin_group",
            Variant::MindomGroup => "mindom_group",
            Variant::MaxminIndividual => "maxmin_individual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FairnessObjective {
    pub variant: Variant,
    /// Floor on the total matching size.
    pub zeta: f64,
}

impl FairnessObjective {
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if !(self.zeta >= 0.0) {
            return Err(Error::Input(format!("zeta must be nonnegative, got {}", self.zeta)));
        }
        if instance.item_capacity() && self.zeta > instance.num_items() as f64 {
            return Err(Error::Input(format!(
                "zeta = {} exceeds the {} items",
                self.zeta,
                instance.num_items()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Exact,
    Greedy,
    TwoG,
    G,
}

impl Algorithm {
    pub fn parse(text: &str) -> Result<Self> {
        match text.replace('-', "_").as_str() {
            "exact" => Ok(Algorithm::Exact),
            "greedy" => Ok(Algorithm::Greedy),
            "two_g" | "2g" => Ok(Algorithm::TwoG),
            "g" => Ok(Algorithm::G),
            other => Err(Error::Input(format!("unknown algorithm '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::Greedy => "greedy",
            Algorithm::TwoG => "two_g",
            Algorithm::G => "g",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub epsilon: f64,
    pub order: ScanOrder,
    pub simplex: SimplexOptions,
    /// Scale individual lower bounds when the exact LP is infeasible (the
    /// approximate algorithms always scale).
    pub scale: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            order: ScanOrder::PreferenceRank,
            simplex: SimplexOptions::default(),
            scale: false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Details<S = f64> {
    Exact(crate::decomp::DecompositionTrace<S>),
    Greedy(GreedyRunResult<S>),
    GApprox(GApproxResult<S>),
}

/// A distribution with everything needed to audit it.
#[derive(Debug, Clone)]
pub struct Solution<S = f64> {
    pub algorithm: Algorithm,
    pub objective: FairnessObjective,
    pub distribution: MatchingDistribution<S>,
    /// LP optimum the distribution was built from.
    pub x: Vec<S>,
    /// LP objective value (`Σ x` for the standard objective).
    pub lp_value: S,
    pub mu: Option<S>,
    pub t_star: f64,
    /// Probability windows are checked as `[L/t − δ, U/t + δ]`.
    pub t: S,
    pub delta: S,
    /// The instance to audit against (bounds scaled or re-fixed).
    pub audit_instance: Instance,
    pub report: FairnessReport,
    pub details: Details<S>,
    pub warnings: Vec<String>,
}

impl<S: Scalar> Solution<S> {
    pub fn trace_json(&self) -> Value {
        match &self.details {
            Details::Exact(t) => t.to_json(),
            Details::GApprox(r) => r.trace.to_json(),
            Details::Greedy(r) => {
                let num = |v: &S| if S::EXACT { Value::String(v.to_text()) } else { serde_json::json!(v.to_f64()) };
                let steps: Vec<Value> = r
                    .steps
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        serde_json::json!({
                            "iteration": i + 1,
                            "matching": s.matching,
                            "alpha": num(&s.alpha),
                            "norm_before": num(&s.norm_before),
                            "certificate_value": s.certificate_value,
                        })
                    })
                    .collect();
                serde_json::json!({
                    "steps": steps,
                    "sum": num(&r.sum),
                    "f_epsilon": r.f_epsilon,
                    "epsilon": r.epsilon,
                    "delta": r.delta,
                })
            }
        }
    }

    fn finish(mut self, tol: f64) -> Self {
        self.report = audit(&self.audit_instance, &self.distribution, &self.t, &self.delta, tol);
        self
    }
}

fn audit_tol<S: Scalar>() -> f64 {
    if S::EXACT {
        0.0
    } else {
        1e-9
    }
}

fn empty_report() -> FairnessReport {
    // replaced by `finish` before anything sees it
    let inst = crate::instance::InstanceDoc::new(0, 0, &[], vec![]).build().expect("empty instance");
    audit::<f64>(&inst, &MatchingDistribution::new(Vec::new()), &1.0, &0.0, 0.0)
}

fn from_exact<S: Scalar>(
    objective: FairnessObjective,
    audit_instance: Instance,
    sol: crate::decomp::ExactSolution<S>,
    t_star: f64,
    mu: Option<S>,
) -> Solution<S> {
    Solution {
        algorithm: Algorithm::Exact,
        objective,
        lp_value: sol.lp.objective.clone(),
        x: sol.lp.x,
        mu,
        t_star,
        t: S::one(),
        delta: S::zero(),
        audit_instance,
        report: sol.report,
        distribution: sol.distribution,
        details: Details::Exact(sol.trace),
        warnings: Vec::new(),
    }
}

fn from_greedy<S: Scalar>(
    objective: FairnessObjective,
    audit_instance: Instance,
    run: GreedyRunResult<S>,
    mu: Option<S>,
) -> Solution<S> {
    let delta = S::from_f64(run.epsilon) / run.sum.clone();
    Solution {
        algorithm: Algorithm::Greedy,
        objective,
        distribution: run.distribution.clone(),
        x: run.x.clone(),
        lp_value: run.lp_value.clone(),
        mu,
        t_star: run.t_star,
        t: run.sum.clone(),
        delta,
        audit_instance,
        report: empty_report(),
        details: Details::Greedy(run),
        warnings: Vec::new(),
    }
}

fn from_gapprox<S: Scalar>(
    objective: FairnessObjective,
    audit_instance: Instance,
    run: GApproxResult<S>,
    mu: Option<S>,
) -> Solution<S> {
    let algorithm = match run.mode {
        GMode::TwoG => Algorithm::TwoG,
        GMode::G => Algorithm::G,
    };
    Solution {
        algorithm,
        objective,
        distribution: run.distribution.clone(),
        x: run.x.clone(),
        lp_value: run.lp_value.clone(),
        mu,
        t_star: run.t_star,
        t: S::from_i64(run.divisor as i64),
        delta: S::zero(),
        audit_instance,
        report: empty_report(),
        warnings: run.warnings.clone(),
        details: Details::GApprox(run),
    }
}

/// Runs `algorithm` with the standard objective.
pub fn solve<S: Scalar>(instance: &Instance, algorithm: Algorithm, opts: &RunOptions) -> Result<Solution<S>> {
    solve_extended(instance, FairnessObjective::default(), algorithm, opts)
}

/// Runs `algorithm` under `objective`. For the standard objective this is
/// exactly the plain pipeline; otherwise the LP is transformed, solved for
/// `(x*, μ*)`, bounds are re-fixed from `μ*`, and the pipeline continues
/// from `x*`.
pub fn solve_extended<S: Scalar>(
    instance: &Instance,
    objective: FairnessObjective,
    algorithm: Algorithm,
    opts: &RunOptions,
) -> Result<Solution<S>> {
    objective.validate(instance)?;
    let tol = audit_tol::<S>();
    match (objective.variant, algorithm) {
        (Variant::MaxminGroup, a) if a != Algorithm::Exact => {
            return Err(Error::Incompatible(
                "the max-min group objective is only supported by the exact algorithm".into(),
            ))
        }
        (_, Algorithm::Exact) => require_disjoint(instance)?,
        (_, Algorithm::G) if instance.has_lower_bounds() => {
            return Err(Error::Incompatible(
                "the g mode does not support group or platform lower bounds".into(),
            ))
        }
        _ => {}
    }

    if objective.variant == Variant::Standard {
        return match algorithm {
            Algorithm::Exact => {
                if opts.scale {
                    let scaled = solve_scaled::<S>(instance, build_disjoint, true, &opts.simplex)?;
                    let t_star = scaled.t_star;
                    let sol = decompose_solution(&scaled.instance, scaled.solution, &FlowSolver)?;
                    Ok(from_exact(objective, scaled.instance, sol, t_star, None))
                } else {
                    let sol = exact_disjoint_solve::<S>(instance, &opts.simplex)?;
                    Ok(from_exact(objective, instance.clone(), sol, 1.0, None))
                }
            }
            Algorithm::Greedy => {
                let (run, scaled) = bicriteria_decompose::<S>(instance, opts.epsilon, opts.order, &opts.simplex)?;
                Ok(from_greedy(objective, scaled.instance, run, None).finish(tol))
            }
            Algorithm::TwoG | Algorithm::G => {
                let run = if algorithm == Algorithm::TwoG {
                    two_g_solve::<S>(instance, &opts.simplex)?
                } else {
                    g_solve::<S>(instance, &opts.simplex)?
                };
                let audit_instance = instance.with_scaled_if_lower(scaled_multiplier(run.t_star));
                Ok(from_gapprox(objective, audit_instance, run, None).finish(tol))
            }
        };
    }

    let n = instance.num_items() as f64;
    let base = |inst: &Instance| -> LinearProgram {
        let mut lp = match algorithm {
            Algorithm::Exact => build_disjoint(inst),
            _ => build_primal_if(inst),
        };
        let mu = lp.add_aux(0.0, n);
        match objective.variant {
            Variant::MaxminGroup | Variant::MindomGroup => {
                for (p, h) in inst.nonempty_pairs() {
                    let mut coeffs: Vec<(usize, f64)> = inst.group_edges(p, h).into_iter().map(|e| (e, 1.0)).collect();
                    coeffs.push((mu, -1.0));
                    let (lower, upper) = if objective.variant == Variant::MaxminGroup {
                        (0.0, f64::INFINITY)
                    } else {
                        (f64::NEG_INFINITY, 0.0)
                    };
                    lp.rows.push(crate::lp::Row {
                        kind: RowKind::GroupAux { platform: p, group: h },
                        coeffs,
                        lower,
                        upper,
                    });
                }
            }
            Variant::MaxminIndividual => {
                lp.rows.retain(|r| !matches!(r.kind, RowKind::Fairness { .. }));
                for a in 0..inst.num_items() {
                    if inst.item_edges(a).is_empty() {
                        continue;
                    }
                    let mut coeffs: Vec<(usize, f64)> = inst.item_edges(a).iter().map(|&e| (e, 1.0)).collect();
                    coeffs.push((mu, -1.0));
                    lp.rows.push(crate::lp::Row {
                        kind: RowKind::ItemAux(a),
                        coeffs,
                        lower: 0.0,
                        upper: f64::INFINITY,
                    });
                }
            }
            Variant::Standard => unreachable!(),
        }
        let sense = if objective.variant == Variant::MindomGroup {
            AuxSense::Min
        } else {
            AuxSense::Max
        };
        update_lp(&lp, sense, objective.zeta).expect("auxiliary was just added")
    };
    let auto = opts.scale || algorithm != Algorithm::Exact;
    let scaled = solve_scaled::<S>(instance, base, auto, &opts.simplex)?;
    let mu = scaled.solution.aux.clone().expect("auxiliary present").snap(1e-9);
    let x = scaled.solution.x.clone();
    let inst = &scaled.instance;

    // re-fix bounds from μ*
    let refixed = match objective.variant {
        Variant::MaxminGroup => {
            let floor = mu.floor().to_i64();
            let windows: BTreeMap<(usize, usize), Window> = inst
                .nonempty_pairs()
                .into_iter()
                .map(|(p, h)| {
                    let w = inst.group_window(p, h);
                    ((p, h), Window::new(w.lower.max(floor), w.upper))
                })
                .collect();
            inst.with_group_windows(&windows)
        }
        Variant::MindomGroup => {
            let ceil = mu.ceil().to_i64();
            let windows: BTreeMap<(usize, usize), Window> = inst
                .nonempty_pairs()
                .into_iter()
                .map(|(p, h)| {
                    let w = inst.group_window(p, h);
                    ((p, h), Window::new(w.lower.min(ceil), w.upper.min(ceil)))
                })
                .collect();
            inst.with_group_windows(&windows)
        }
        Variant::MaxminIndividual => {
            let subsets = (0..inst.num_items())
                .filter(|&a| !inst.item_edges(a).is_empty())
                .map(|a| GenericIfConstraint {
                    item: a,
                    platforms: inst.item_edges(a).iter().map(|&e| inst.edge(e).1).collect(),
                    lower: mu.to_f64().min(1.0),
                    upper: 1.0,
                })
                .collect();
            inst.with_fairness(Vec::new(), subsets)?
        }
        Variant::Standard => unreachable!(),
    };

    let mut out = match algorithm {
        Algorithm::Exact => {
            let sol = decompose_solution(&refixed, scaled.solution, &FlowSolver)?;
            from_exact(objective, refixed, sol, scaled.t_star, Some(mu))
        }
        Algorithm::Greedy => {
            let mut run = bicriteria_from_point(&refixed, &x, opts.epsilon, opts.order)?;
            run.t_star = scaled.t_star;
            run.lp_value = scaled.solution.objective.clone();
            from_greedy(objective, refixed, run, Some(mu))
        }
        Algorithm::TwoG | Algorithm::G => {
            let mode = if algorithm == Algorithm::TwoG { GMode::TwoG } else { GMode::G };
            let mut run = gapprox_from_point(&refixed, &x, mode)?;
            run.t_star = scaled.t_star;
            run.lp_value = scaled.solution.objective.clone();
            from_gapprox(objective, refixed, run, Some(mu))
        }
    };
    out.lp_value = x.iter().fold(S::zero(), |acc, v| acc + v.clone());
    Ok(out.finish(tol))
}

fn scaled_multiplier(t_star: f64) -> f64 {
    if t_star >= 1.0 {
        1.0
    } else {
        (t_star - SCALE_MARGIN).max(0.0)
    }
}
