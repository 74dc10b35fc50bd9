//! Greedy peeling for overlapping groups.
//!
//! Starting from an optimum `x` of the fairness LP, repeatedly take a
//! greedy maximal matching `M` among edges with positive value (respecting
//! every group cap), subtract `α·M` with `α` the smallest matched value, and
//! stop once `‖x‖₁ < ε`. Matchings are weighted `α/S` with `S = Σα`. A dual
//! certificate is built for every round: it bounds any cap-feasible point's
//! size by `(Δ + 1)·|M|`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decomp::MatchingDistribution;
use crate::error::{Error, Result};
use crate::ext::{solve_scaled, ScaledSolve};
use crate::flow::Matching;
use crate::instance::{compute_stats, Instance};
use crate::lp::{build_primal_if, SimplexOptions};
use crate::numeric::Scalar;

/// Order in which the greedy pass offers edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanOrder {
    /// By item, then by position in the item's preference list (unranked
    /// edges last, by platform).
    #[default]
    PreferenceRank,
    /// A seeded random permutation of the edges.
    Shuffled(u64),
}

/// Edge indices in scan order.
pub fn scan_order(instance: &Instance, order: ScanOrder) -> Vec<usize> {
    match order {
        ScanOrder::PreferenceRank => {
            let mut out = Vec::with_capacity(instance.num_edges());
            for a in 0..instance.num_items() {
                let prefs = instance.preferences(a);
                let mut edges: Vec<usize> = instance.item_edges(a).to_vec();
                edges.sort_by_key(|&e| {
                    let p = instance.edge(e).1;
                    (prefs.iter().position(|&q| q == p).unwrap_or(usize::MAX), p)
                });
                out.extend(edges);
            }
            out
        }
        ScanOrder::Shuffled(seed) => {
            let mut out: Vec<usize> = (0..instance.num_edges()).collect();
            out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            out
        }
    }
}

/// Greedy matching over the edges with `active[e]`, scanning `order`;
/// an edge is taken unless it would exceed a group cap or item capacity.
pub fn greedy_group_fair_maximal(instance: &Instance, active: &[bool], order: &[usize]) -> Matching {
    let mut group_count: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    let mut matched_item = vec![false; instance.num_items()];
    let mut chosen = Vec::new();
    for &e in order {
        if !active[e] {
            continue;
        }
        let (a, p) = instance.edge(e);
        if instance.item_capacity() && matched_item[a] {
            continue;
        }
        let fits = instance.edge_groups(e).iter().all(|&h| {
            let c = group_count.get(&(p, h)).copied().unwrap_or(0);
            c < instance.group_window(p, h).upper
        });
        if !fits {
            continue;
        }
        for &h in instance.edge_groups(e) {
            *group_count.entry((p, h)).or_insert(0) += 1;
        }
        matched_item[a] = true;
        chosen.push(e);
    }
    Matching::new(instance, chosen)
}

/// Dual solution built from a maximal matching: `w = 1` on every tight
/// cap, and either `y = 1` on matched edges or, with item capacity, `z = 1`
/// on matched items.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub y: Vec<bool>,
    /// Per-item duals (all false without item capacity).
    pub z: Vec<bool>,
    pub w: BTreeSet<(usize, usize)>,
    pub value: i64,
}

impl DualCertificate {
    /// Coverage of edge `e`: `Σ_h w_{p,h} + y_e + z_a`.
    pub fn coverage(&self, instance: &Instance, e: usize) -> usize {
        let (a, p) = instance.edge(e);
        instance
            .edge_groups(e)
            .iter()
            .filter(|&&h| self.w.contains(&(p, h)))
            .count()
            + usize::from(self.y[e])
            + usize::from(self.z[a])
    }
}

/// Builds the certificate for `m` and checks it covers every active edge.
/// An uncovered edge means `m` was not maximal.
pub fn dual_certificate(instance: &Instance, m: &Matching, active: &[bool]) -> Result<DualCertificate> {
    let mut w = BTreeSet::new();
    let mut value = 0i64;
    for (p, h) in instance.nonempty_pairs() {
        let u = instance.group_window(p, h).upper;
        if m.group_count(p, h) as i64 == u {
            w.insert((p, h));
            value += u;
        }
    }
    let mut y = vec![false; instance.num_edges()];
    let mut z = vec![false; instance.num_items()];
    for &e in &m.edges {
        if instance.item_capacity() {
            z[instance.edge(e).0] = true;
        } else {
            y[e] = true;
        }
    }
    value += m.len() as i64;
    let cert = DualCertificate { y, z, w, value };
    for (e, &on) in active.iter().enumerate() {
        if on && cert.coverage(instance, e) == 0 {
            return Err(Error::Numerical(format!("matching is not maximal: edge {e} could be added")));
        }
    }
    Ok(cert)
}

/// `2(Δ + 1)(log₂(n/ε) + 1)`.
pub fn f_epsilon(n: usize, epsilon: f64, delta: usize) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::Input("f_epsilon needs at least one item".into()));
    }
    Ok(2.0 * (delta as f64 + 1.0) * ((n as f64 / epsilon).log2() + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep<S = f64> {
    pub matching: Vec<usize>,
    pub alpha: S,
    /// `‖x‖₁` before this round.
    pub norm_before: S,
    pub certificate_value: i64,
}

#[derive(Debug, Clone)]
pub struct GreedyRunResult<S = f64> {
    pub distribution: MatchingDistribution<S>,
    pub steps: Vec<GreedyStep<S>>,
    pub f_epsilon: f64,
    pub epsilon: f64,
    pub delta: usize,
    /// The starting point.
    pub x: Vec<S>,
    /// What was left when the loop stopped.
    pub residual: Vec<S>,
    pub sum: S,
    /// Multiplier applied to individual-fairness lower bounds (1 if none).
    pub t_star: f64,
    /// LP objective (the bench's upper bound).
    pub lp_value: S,
}

/// Outcomes of the checks the analysis guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyChecks {
    pub sum_within_f: bool,
    pub residual_below_epsilon: bool,
    /// `|M| ≥ ‖x‖₁/(Δ+1)` every round.
    pub size_bound: bool,
    /// Certificate value `≤ (Δ+1)|M|` every round.
    pub certificate_bound: bool,
    /// `Σ_{j ≤ i_c} α_j ≤ 2c(Δ+1)` for every halving level `c` reached.
    pub halving_bound: bool,
    /// `max_e |x − x^{(k)} − Σ α M|`.
    pub reconstruction_error: f64,
    pub support_within_edges: bool,
}

impl GreedyChecks {
    pub fn all(&self, tol: f64) -> bool {
        self.sum_within_f
            && self.residual_below_epsilon
            && self.size_bound
            && self.certificate_bound
            && self.halving_bound
            && self.reconstruction_error <= tol
            && self.support_within_edges
    }
}

impl<S: Scalar> GreedyRunResult<S> {
    pub fn checks(&self, num_edges: usize) -> GreedyChecks {
        let d1 = (self.delta + 1) as f64;
        let tol = if S::EXACT { 0.0 } else { 1e-9 };
        let norm0 = self.x.iter().fold(0.0, |acc, v| acc + v.to_f64());
        let residual_norm = self.residual.iter().fold(0.0, |acc, v| acc + v.to_f64());

        let mut size_bound = true;
        let mut certificate_bound = true;
        for s in &self.steps {
            let m = s.matching.len() as f64;
            if m * d1 < s.norm_before.to_f64() - tol {
                size_bound = false;
            }
            if s.certificate_value as f64 > d1 * m {
                certificate_bound = false;
            }
        }

        let mut halving_bound = true;
        let mut prefix = 0.0;
        let mut level = 1u32;
        for (i, s) in self.steps.iter().enumerate() {
            prefix += s.alpha.to_f64();
            let after = self
                .steps
                .get(i + 1)
                .map(|n| n.norm_before.to_f64())
                .unwrap_or(residual_norm);
            while norm0 > 0.0 && after < norm0 / 2f64.powi(level as i32) && level < 200 {
                if prefix > 2.0 * level as f64 * d1 + tol {
                    halving_bound = false;
                }
                level += 1;
            }
        }

        let mut recon = self.residual.clone();
        for s in &self.steps {
            for &e in &s.matching {
                recon[e] = recon[e].clone() + s.alpha.clone();
            }
        }
        let reconstruction_error = recon
            .iter()
            .zip(&self.x)
            .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64())
            .fold(0.0, f64::max);

        GreedyChecks {
            sum_within_f: self.sum.to_f64() <= self.f_epsilon * (1.0 + 1e-12),
            residual_below_epsilon: residual_norm < self.epsilon,
            size_bound,
            certificate_bound,
            halving_bound,
            reconstruction_error,
            support_within_edges: self.distribution.len() <= num_edges.max(1),
        }
    }
}

/// Runs the peeling loop on a given point `x` (which must respect every
/// group cap and item capacity).
pub fn bicriteria_from_point<S: Scalar>(
    instance: &Instance,
    x: &[S],
    epsilon: f64,
    order: ScanOrder,
) -> Result<GreedyRunResult<S>> {
    let delta = compute_stats(instance).delta;
    let f = f_epsilon(instance.num_items().max(1), epsilon, delta)?;
    let zero_tol = if S::EXACT { 0.0 } else { 1e-12 };
    let eps = S::from_f64(epsilon);
    let scan = scan_order(instance, order);
    let start: Vec<S> = x
        .iter()
        .map(|v| if v.is_pos(zero_tol) { v.clone() } else { S::zero() })
        .collect();
    let mut cur = start.clone();
    let norm = |v: &[S]| v.iter().fold(S::zero(), |acc, x| acc + x.clone());
    let mut steps = Vec::new();
    let mut sum = S::zero();
    let mut entries: Vec<(Matching, S)> = Vec::new();
    let limit = instance.num_edges() + 1;

    loop {
        let before = norm(&cur);
        if before < eps {
            break;
        }
        if steps.len() >= limit {
            return Err(Error::Numerical("greedy peeling did not remove an edge every round".into()));
        }
        let active: Vec<bool> = cur.iter().map(|v| v.is_pos(0.0)).collect();
        let m = greedy_group_fair_maximal(instance, &active, &scan);
        if m.is_empty() {
            return Err(Error::Numerical("greedy matching is empty on a nonzero point".into()));
        }
        let cert = dual_certificate(instance, &m, &active)?;
        let alpha = m
            .edges
            .iter()
            .map(|&e| cur[e].clone())
            .reduce(S::min_of)
            .expect("nonempty matching");
        for &e in &m.edges {
            let v = cur[e].clone() - alpha.clone();
            cur[e] = if v.is_pos(zero_tol) { v } else { S::zero() };
        }
        sum = sum + alpha.clone();
        steps.push(GreedyStep {
            matching: m.edges.clone(),
            alpha: alpha.clone(),
            norm_before: before,
            certificate_value: cert.value,
        });
        entries.push((m, alpha));
    }
    if entries.is_empty() {
        return Err(Error::Infeasible(format!(
            "the fractional point has norm below epsilon = {epsilon}; nothing to distribute"
        )));
    }
    let mut merged: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut dist: Vec<(Matching, S)> = Vec::new();
    for (m, a) in entries {
        let w = a / sum.clone();
        match merged.get(&m.edges) {
            Some(&i) => dist[i].1 = dist[i].1.clone() + w,
            None => {
                merged.insert(m.edges.clone(), dist.len());
                dist.push((m, w));
            }
        }
    }
    let lp_value = norm(&start);
    Ok(GreedyRunResult {
        distribution: MatchingDistribution::new(dist),
        steps,
        f_epsilon: f,
        epsilon,
        delta,
        x: start,
        residual: cur,
        sum,
        t_star: 1.0,
        lp_value,
    })
}

/// Solves the fairness LP (scaling individual lower bounds first if it is
/// infeasible) and runs the peeling loop on its optimum.
pub fn bicriteria_decompose<S: Scalar>(
    instance: &Instance,
    epsilon: f64,
    order: ScanOrder,
    opts: &SimplexOptions,
) -> Result<(GreedyRunResult<S>, ScaledSolve<S>)> {
    f_epsilon(instance.num_items().max(1), epsilon, 0)?;
    let scaled = solve_scaled::<S>(instance, build_primal_if, true, opts)?;
    let mut run = bicriteria_from_point(instance, &scaled.solution.x, epsilon, order)?;
    run.t_star = scaled.t_star;
    run.lp_value = scaled.solution.objective.clone();
    Ok((run, scaled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceDoc;
    use crate::numeric::Rational;
    use crate::verify::audit;

    fn all_active(inst: &Instance) -> Vec<bool> {
        vec![true; inst.num_edges()]
    }

    #[test]
    fn single_edge_greedy() {
        let inst = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0]])
            .group_bound(0, 0, 0.0, 1.0)
            .build()
            .unwrap();
        let order = scan_order(&inst, ScanOrder::PreferenceRank);
        let m = greedy_group_fair_maximal(&inst, &all_active(&inst), &order);
        assert_eq!(m.edges, vec![0]);
        let cert = dual_certificate(&inst, &m, &all_active(&inst)).unwrap();
        // the cap of 1 is tight here, so w counts it as well
        assert_eq!(cert.value, 2);
    }

    #[test]
    fn slack_cap_certificate_is_matching_size() {
        let inst = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0]])
            .group_bound(0, 0, 0.0, 2.0)
            .item_capacity(false)
            .build()
            .unwrap();
        let m = greedy_group_fair_maximal(&inst, &all_active(&inst), &[0]);
        let cert = dual_certificate(&inst, &m, &all_active(&inst)).unwrap();
        assert!(cert.y[0] && cert.w.is_empty());
        assert_eq!(cert.value, 1);
    }

    #[test]
    fn two_groups_one_platform() {
        let inst = InstanceDoc::new(3, 1, &[(0, 0), (1, 0), (2, 0)], vec![vec![0, 1], vec![2]])
            .group_bound(0, 0, 0.0, 1.0)
            .group_bound(0, 1, 0.0, 1.0)
            .build()
            .unwrap();
        let order = scan_order(&inst, ScanOrder::PreferenceRank);
        let m = greedy_group_fair_maximal(&inst, &all_active(&inst), &order);
        assert_eq!(m.edges, vec![0, 2]);
        let cert = dual_certificate(&inst, &m, &all_active(&inst)).unwrap();
        assert_eq!(cert.w.len(), 2);
        assert_eq!(cert.value, 4);
        assert!(cert.value <= 2 * m.len() as i64);
    }

    #[test]
    fn zero_caps_block_everything() {
        let inst = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 0.0, 0.0)
            .build()
            .unwrap();
        let m = greedy_group_fair_maximal(&inst, &all_active(&inst), &[0, 1]);
        assert!(m.is_empty());
        let cert = dual_certificate(&inst, &m, &all_active(&inst)).unwrap();
        assert_eq!(cert.value, 0);
        assert!((0..2).all(|e| cert.coverage(&inst, e) >= 1));
    }

    #[test]
    fn non_maximal_matching_is_caught() {
        let inst = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 0.0, 2.0)
            .build()
            .unwrap();
        let m = Matching::new(&inst, vec![0]);
        assert!(dual_certificate(&inst, &m, &all_active(&inst)).is_err());
    }

    #[test]
    fn f_epsilon_values() {
        assert_eq!(f_epsilon(1, 1.0, 0).unwrap(), 2.0);
        let v = f_epsilon(1000, 1e-4, 3).unwrap();
        assert!((v - 194.03).abs() < 0.01, "{v}");
        assert!(f_epsilon(10, 0.0, 1).is_err());
    }

    #[test]
    fn integral_point_single_round() {
        let inst = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 0.0, 2.0)
            .build()
            .unwrap();
        let run = bicriteria_from_point(&inst, &[1.0, 1.0], 1e-6, ScanOrder::PreferenceRank).unwrap();
        assert_eq!(run.steps.len(), 1);
        assert_eq!(run.sum, 1.0);
        assert_eq!(run.distribution.entries[0].1, 1.0);
    }

    #[test]
    fn d1_two_rounds() {
        let inst = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 0.0, 1.0)
            .with_default_preferences()
            .rank_window(0, 1, 0.5, 0.5)
            .rank_window(1, 1, 0.5, 0.5)
            .build()
            .unwrap();
        let (run, _) =
            bicriteria_decompose::<Rational>(&inst, 1e-6, ScanOrder::PreferenceRank, &SimplexOptions::default())
                .unwrap();
        let half = Rational::from_f64(0.5);
        assert_eq!(run.steps.len(), 2);
        assert!(run.steps.iter().all(|s| s.alpha == half));
        assert_eq!(run.sum, Rational::from_i64(1));
        assert!(run.distribution.entries.iter().all(|(_, w)| *w == half));
        assert!(run.checks(inst.num_edges()).all(0.0));
        let eps = Rational::from_f64(1e-6) / run.sum.clone();
        let report = audit(&inst, &run.distribution, &run.sum, &eps, 0.0);
        assert!(report.individually_fair() && report.group_fair());
    }
}
