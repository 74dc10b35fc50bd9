//! Scaled decompositions for overlapping groups.
//!
//! Collapse every item (per platform) into its lowest-cap group, shrink the
//! fairness-LP optimum by `2g` or `g`, and decompose the shrunken point on
//! the collapsed instance. With `2g` every support matching keeps the
//! original caps; with `g` the caps may be exceeded by at most `Δ`.

use crate::decomp::{distribution_calculator, DecompOptions, DecompositionTrace, MatchingDistribution};
use crate::error::{Error, Result};
use crate::ext::solve_scaled;
use crate::flow::{FlowSolver, Matching};
use crate::instance::{collapse_groups, compute_stats, Instance};
use crate::lp::{build_group_approx, build_mod, build_primal_if, SimplexOptions};
use crate::numeric::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GMode {
    /// Shrink by `2g`; caps `⌊u/g⌋` on the collapsed instance.
    TwoG,
    /// Shrink by `g`; caps `⌈u/g⌉`.
    G,
}

impl GMode {
    pub fn name(self) -> &'static str {
        match self {
            GMode::TwoG => "two_g",
            GMode::G => "g",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GApproxResult<S = f64> {
    /// Matchings carry counts over the original groups.
    pub distribution: MatchingDistribution<S>,
    pub trace: DecompositionTrace<S>,
    pub mode: GMode,
    pub g: usize,
    pub delta: usize,
    /// Largest `count − u_{p,h}` over support matchings and original groups.
    pub max_violation: i64,
    /// `u_{p,h} ≥ g` on every nonempty pair.
    pub hypothesis_ok: bool,
    /// The shrunken point satisfied the scaled-cap LP before decomposing.
    pub scaled_point_feasible: bool,
    /// LP optimum before shrinking.
    pub x: Vec<S>,
    /// The shrink factor `2g` or `g`.
    pub divisor: usize,
    pub t_star: f64,
    pub lp_value: S,
    pub warnings: Vec<String>,
}

/// Decomposes `x / divisor` on the collapsed instance and measures cap
/// violations against the original groups.
pub fn gapprox_from_point<S: Scalar>(instance: &Instance, x: &[S], mode: GMode) -> Result<GApproxResult<S>> {
    let stats = compute_stats(instance);
    let g = stats.g;
    if g == 0 {
        return Err(Error::Infeasible("no platform has a neighbouring group".into()));
    }
    if mode == GMode::G && instance.has_lower_bounds() {
        return Err(Error::Incompatible(
            "the g mode does not support group or platform lower bounds".into(),
        ));
    }
    let mut warnings = Vec::new();
    let hypothesis_ok = instance
        .nonempty_pairs()
        .into_iter()
        .all(|(p, h)| instance.group_window(p, h).upper >= g as i64);
    if !hypothesis_ok {
        warnings.push(format!("some cap is below g = {g}; the size guarantee does not apply"));
    }
    if mode == GMode::TwoG && instance.has_lower_bounds() {
        warnings.push("lower bounds are not enforced by this mode".into());
    }

    let (collapsed, _map) = collapse_groups(instance)?;
    let divisor = match mode {
        GMode::TwoG => 2 * g,
        GMode::G => g,
    };
    let d = S::from_i64(divisor as i64);
    let y: Vec<S> = x.iter().map(|v| v.clone() / d.clone()).collect();

    let target = match mode {
        GMode::TwoG => build_mod(&collapsed, g)?,
        GMode::G => build_group_approx(&collapsed, g)?,
    };
    let yf: Vec<f64> = y.iter().map(|v| v.to_f64()).collect();
    let scaled_point_feasible = target.max_violation(&yf) <= 1e-9;
    if !scaled_point_feasible {
        warnings.push("the shrunken point violates a scaled cap".into());
    }

    let (dist, trace) = distribution_calculator(&collapsed, &y, &FlowSolver, &DecompOptions::default())?;
    let entries: Vec<(Matching, S)> = dist
        .entries
        .into_iter()
        .map(|(m, w)| (Matching::new(instance, m.edges), w))
        .collect();
    let distribution = MatchingDistribution::new(entries);
    let max_violation = max_cap_violation(instance, &distribution);
    let lp_value = x.iter().fold(S::zero(), |acc, v| acc + v.clone());
    Ok(GApproxResult {
        distribution,
        trace,
        mode,
        g,
        delta: stats.delta,
        max_violation,
        hypothesis_ok,
        scaled_point_feasible,
        x: x.to_vec(),
        divisor,
        t_star: 1.0,
        lp_value,
        warnings,
    })
}

/// Largest `count − u_{p,h}` (at least 0) over the support.
pub fn max_cap_violation<S: Scalar>(instance: &Instance, dist: &MatchingDistribution<S>) -> i64 {
    let pairs = instance.nonempty_pairs();
    let mut worst = 0;
    for (m, _) in &dist.entries {
        for &(p, h) in &pairs {
            worst = worst.max(m.group_count(p, h) as i64 - instance.group_window(p, h).upper);
        }
    }
    worst
}

fn solve_mode<S: Scalar>(instance: &Instance, mode: GMode, opts: &SimplexOptions) -> Result<GApproxResult<S>> {
    if mode == GMode::G && instance.has_lower_bounds() {
        return Err(Error::Incompatible(
            "the g mode does not support group or platform lower bounds".into(),
        ));
    }
    let scaled = solve_scaled::<S>(instance, build_primal_if, true, opts)?;
    let mut out = gapprox_from_point(instance, &scaled.solution.x, mode)?;
    out.t_star = scaled.t_star;
    out.lp_value = scaled.solution.objective;
    Ok(out)
}

/// Every support matching respects the original group caps.
pub fn two_g_solve<S: Scalar>(instance: &Instance, opts: &SimplexOptions) -> Result<GApproxResult<S>> {
    solve_mode(instance, GMode::TwoG, opts)
}

/// Caps may be exceeded by at most `Δ`; twice the expected size of
/// [`two_g_solve`] on the same point.
pub fn g_solve<S: Scalar>(instance: &Instance, opts: &SimplexOptions) -> Result<GApproxResult<S>> {
    solve_mode(instance, GMode::G, opts)
}
