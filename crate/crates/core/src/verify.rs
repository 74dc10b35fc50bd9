//! Independent checks of a distribution: exact audit of every fairness
//! window, a brute-force oracle over all edge subsets, and seeded sampling
//! with Wilson intervals.
//!
//! Nothing here trusts the solvers; everything is recomputed from the
//! instance and the `(matching, weight)` pairs.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomp::MatchingDistribution;
use crate::error::{Error, Result};
use crate::flow::Matching;
use crate::instance::{IfLabel, Instance};
use crate::numeric::Scalar;

/// Largest edge count [`enumerate_group_fair`] accepts.
pub const ORACLE_EDGE_LIMIT: usize = 20;

/// Two-sided z value for a 99% normal interval.
pub const Z_99: f64 = 2.5758293035489;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountResidual {
    pub platform: usize,
    /// `None` for a platform row.
    pub group: Option<usize>,
    pub lower: i64,
    pub upper: i64,
    /// Smallest `upper − count` over the support (negative when violated).
    pub min_upper_slack: i64,
    /// Largest `count − upper`, clipped at zero.
    pub max_violation: i64,
    /// Largest `lower − count`, clipped at zero.
    pub max_lower_violation: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowCheck {
    pub item: usize,
    pub label: String,
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
    /// Bounds after scaling: `L/t − δ` and `U/t + δ`.
    pub scaled_lower: f64,
    pub scaled_upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub support_size: usize,
    pub expected_size: f64,
    pub weight_sum_deviation: f64,
    pub nonpositive_weights: usize,
    /// Support matchings giving some item two edges under item capacity.
    pub item_capacity_violations: usize,
    pub groups: Vec<CountResidual>,
    pub platforms: Vec<CountResidual>,
    pub windows: Vec<WindowCheck>,
    pub t: f64,
    pub delta: f64,
    weights_ok: bool,
}

impl FairnessReport {
    /// Weights positive and summing to one.
    pub fn weights_ok(&self) -> bool {
        self.weights_ok
    }

    /// Every support matching respects every group cap and item capacity.
    pub fn group_fair(&self) -> bool {
        self.item_capacity_violations == 0 && self.groups.iter().all(|g| g.max_violation == 0)
    }

    /// Additionally every group lower bound and platform window holds.
    pub fn strong_group_fair(&self) -> bool {
        self.group_fair()
            && self.groups.iter().all(|g| g.max_lower_violation == 0)
            && self
                .platforms
                .iter()
                .all(|p| p.max_violation == 0 && p.max_lower_violation == 0)
    }

    pub fn max_group_violation(&self) -> i64 {
        self.groups.iter().map(|g| g.max_violation).max().unwrap_or(0)
    }

    pub fn individually_fair(&self) -> bool {
        self.windows.iter().all(|w| w.pass)
    }

    pub fn all_pass(&self) -> bool {
        self.weights_ok() && self.strong_group_fair() && self.individually_fair()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One-line CSV summary with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "support_size,expected_size,weight_sum_deviation,max_group_violation,group_fair,strong_group_fair,individually_fair,failed_windows\n",
        );
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            self.support_size,
            self.expected_size,
            self.weight_sum_deviation,
            self.max_group_violation(),
            self.group_fair(),
            self.strong_group_fair(),
            self.individually_fair(),
            self.windows.iter().filter(|w| !w.pass).count()
        );
        out
    }
}

fn label_text(label: IfLabel) -> String {
    match label {
        IfLabel::Rank(k) => format!("top{k}"),
        IfLabel::Subset(i) => format!("subset{i}"),
    }
}

/// Exact audit. Probabilities are summed in `S`; a window passes when
/// `L/t − δ − tol ≤ Pr ≤ U/t + δ + tol` (`tol` is ignored in exact mode).
pub fn audit<S: Scalar>(
    instance: &Instance,
    dist: &MatchingDistribution<S>,
    t: &S,
    delta: &S,
    tol: f64,
) -> FairnessReport {
    let tol = if S::EXACT { 0.0 } else { tol };
    let total = dist.total_weight();
    let deviation = (total.clone() - S::one()).abs();
    let nonpositive = dist.entries.iter().filter(|(_, w)| !w.is_pos(0.0)).count();
    let weights_ok = nonpositive == 0 && !deviation.is_pos(if S::EXACT { 0.0 } else { 1e-9 });

    let residual = |platform: usize, group: Option<usize>, lower: i64, upper: i64, count: &dyn Fn(&Matching) -> i64| {
        let mut min_slack = i64::MAX;
        let mut over = 0;
        let mut under = 0;
        for (m, _) in &dist.entries {
            let c = count(m);
            min_slack = min_slack.min(upper - c);
            over = over.max(c - upper);
            under = under.max(lower - c);
        }
        if dist.entries.is_empty() {
            min_slack = upper;
        }
        CountResidual {
            platform,
            group,
            lower,
            upper,
            min_upper_slack: min_slack,
            max_violation: over,
            max_lower_violation: under,
        }
    };

    let groups = instance
        .constrained_pairs()
        .into_iter()
        .map(|(p, h)| {
            let w = instance.group_window(p, h);
            residual(p, Some(h), w.lower, w.upper, &|m: &Matching| m.group_count(p, h) as i64)
        })
        .collect();
    let platforms = (0..instance.num_platforms())
        .map(|p| {
            let w = instance.platform_window(p);
            residual(p, None, w.lower, w.upper, &|m: &Matching| m.platform_counts[p] as i64)
        })
        .collect();
    let item_capacity_violations = if instance.item_capacity() {
        dist.entries
            .iter()
            .filter(|(m, _)| m.item_degree.iter().any(|&d| d > 1))
            .count()
    } else {
        0
    };

    let marginals = dist.marginals(instance.num_edges());
    let windows = instance
        .if_windows()
        .into_iter()
        .map(|w| {
            let prob = w.edges.iter().fold(S::zero(), |acc, &e| acc + marginals[e].clone());
            let lo = S::from_f64(w.lower) / t.clone() - delta.clone();
            let hi = S::from_f64(w.upper) / t.clone() + delta.clone();
            let pass = !(lo.clone() - prob.clone()).is_pos(tol) && !(prob.clone() - hi.clone()).is_pos(tol);
            WindowCheck {
                item: w.item,
                label: label_text(w.label),
                probability: prob.to_f64(),
                lower: w.lower,
                upper: w.upper,
                scaled_lower: lo.to_f64(),
                scaled_upper: hi.to_f64(),
                pass,
            }
        })
        .collect();

    FairnessReport {
        support_size: dist.len(),
        expected_size: dist.expected_size().to_f64(),
        weight_sum_deviation: deviation.to_f64(),
        nonpositive_weights: nonpositive,
        item_capacity_violations,
        groups,
        platforms,
        windows,
        t: t.to_f64(),
        delta: delta.to_f64(),
        weights_ok,
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub strong: bool,
    /// Every qualifying matching, in increasing subset-bitmask order.
    pub matchings: Vec<Matching>,
    pub max_cardinality: usize,
    index: HashSet<Vec<usize>>,
}

impl OracleResult {
    pub fn contains(&self, m: &Matching) -> bool {
        self.index.contains(&m.edges)
    }

    /// For each individual-fairness window: whether some matching hits it
    /// and whether some matching misses it, i.e. which probabilities in
    /// `{0, 1}` are achievable.
    pub fn window_reach(&self, instance: &Instance) -> Vec<(bool, bool)> {
        instance
            .if_windows()
            .iter()
            .map(|w| {
                let hits = |m: &Matching| w.edges.iter().any(|&e| m.contains(e));
                (self.matchings.iter().any(hits), self.matchings.iter().any(|m| !hits(m)))
            })
            .collect()
    }
}

/// Whether `m` satisfies item capacity and every group cap, plus every
/// lower bound and platform window when `strong`.
pub fn is_group_fair(instance: &Instance, m: &Matching, strong: bool) -> bool {
    if instance.item_capacity() && m.item_degree.iter().any(|&d| d > 1) {
        return false;
    }
    for (p, h) in instance.constrained_pairs() {
        let w = instance.group_window(p, h);
        let c = m.group_count(p, h) as i64;
        if c > w.upper || (strong && c < w.lower) {
            return false;
        }
    }
    if strong {
        for p in 0..instance.num_platforms() {
            if !instance.platform_window(p).contains(m.platform_counts[p] as i64) {
                return false;
            }
        }
    }
    true
}

/// All group-fair (or strong group-fair) matchings by exhaustive search.
pub fn enumerate_group_fair(instance: &Instance, strong: bool) -> Result<OracleResult> {
    let n = instance.num_edges();
    if n > ORACLE_EDGE_LIMIT {
        return Err(Error::TooLarge(format!(
            "{n} edges; the oracle enumerates at most {ORACLE_EDGE_LIMIT}"
        )));
    }
    let mut matchings = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let edges: Vec<usize> = (0..n).filter(|&e| mask & (1 << e) != 0).collect();
        let m = Matching::new(instance, edges);
        if is_group_fair(instance, &m, strong) {
            matchings.push(m);
        }
    }
    let max_cardinality = matchings.iter().map(Matching::len).max().unwrap_or(0);
    let index = matchings.iter().map(|m| m.edges.clone()).collect();
    Ok(OracleResult {
        strong,
        matchings,
        max_cardinality,
        index,
    })
}

/// Wilson score interval for `successes` out of `trials` at normal
/// quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRow {
    pub weight: f64,
    pub count: usize,
    pub frequency: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowFrequency {
    pub item: usize,
    pub label: String,
    pub probability: f64,
    pub count: usize,
    pub frequency: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleTable {
    pub seed: u64,
    pub draws: usize,
    /// One row per support matching, in distribution order.
    pub matchings: Vec<FrequencyRow>,
    pub windows: Vec<WindowFrequency>,
}

impl SampleTable {
    /// Matchings whose exact weight falls outside their interval.
    pub fn outliers(&self) -> usize {
        self.matchings
            .iter()
            .filter(|r| r.weight < r.lower || r.weight > r.upper)
            .count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,index,exact,count,frequency,lower,upper\n");
        for (i, r) in self.matchings.iter().enumerate() {
            let _ = writeln!(out, "matching,{i},{},{},{},{},{}", r.weight, r.count, r.frequency, r.lower, r.upper);
        }
        for w in &self.windows {
            let _ = writeln!(
                out,
                "window,{}:{},{},{},{},{},{}",
                w.item, w.label, w.probability, w.count, w.frequency, w.lower, w.upper
            );
        }
        out
    }
}

/// Index drawn by inverting the cumulative weights at a uniform `u`.
fn draw(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().expect("nonempty distribution");
    let target = u * total;
    cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1)
}

/// Draws `count` matchings i.i.d. with a ChaCha8 generator seeded by
/// `seed` and tabulates frequencies with 99% Wilson intervals.
pub fn sample<S: Scalar>(
    instance: &Instance,
    dist: &MatchingDistribution<S>,
    seed: u64,
    count: usize,
) -> Result<SampleTable> {
    if count == 0 {
        return Err(Error::Input("sample count must be at least 1".into()));
    }
    if dist.is_empty() {
        return Err(Error::Input("cannot sample from an empty distribution".into()));
    }
    let weights = dist.weights_f64();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; weights.len()];
    for _ in 0..count {
        let u: f64 = rng.random();
        counts[draw(&cumulative, u)] += 1;
    }
    let rows = weights
        .iter()
        .zip(&counts)
        .map(|(&w, &c)| {
            let (lower, upper) = wilson_interval(c, count, Z_99);
            FrequencyRow {
                weight: w,
                count: c,
                frequency: c as f64 / count as f64,
                lower,
                upper,
            }
        })
        .collect();
    let marginals: Vec<f64> = dist.marginals(instance.num_edges()).iter().map(|v| v.to_f64()).collect();
    let windows = instance
        .if_windows()
        .into_iter()
        .map(|w| {
            let hits: usize = dist
                .entries
                .iter()
                .zip(&counts)
                .filter(|((m, _), _)| w.edges.iter().any(|&e| m.contains(e)))
                .map(|(_, &c)| c)
                .sum();
            let (lower, upper) = wilson_interval(hits, count, Z_99);
            WindowFrequency {
                item: w.item,
                label: label_text(w.label),
                probability: w.edges.iter().map(|&e| marginals[e]).sum(),
                count: hits,
                frequency: hits as f64 / count as f64,
                lower,
                upper,
            }
        })
        .collect();
    Ok(SampleTable {
        seed,
        draws: count,
        matchings: rows,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceDoc;

    fn d1() -> Instance {
        InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 0.0, 1.0)
            .build()
            .unwrap()
    }

    fn edges(r: &OracleResult) -> Vec<Vec<usize>> {
        r.matchings.iter().map(|m| m.edges.clone()).collect()
    }

    #[test]
    fn oracle_examples() {
        let one = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0]])
            .group_bound(0, 0, 0.0, 1.0)
            .build()
            .unwrap();
        assert_eq!(edges(&enumerate_group_fair(&one, true).unwrap()), vec![vec![], vec![0]]);
        assert_eq!(edges(&enumerate_group_fair(&d1(), false).unwrap()), vec![vec![], vec![0], vec![1]]);
        let strong = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 1.0, 1.0)
            .build()
            .unwrap();
        let r = enumerate_group_fair(&strong, true).unwrap();
        assert_eq!(edges(&r), vec![vec![0], vec![1]]);
        assert_eq!(r.max_cardinality, 1);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let edges: Vec<(usize, usize)> = (0..21).map(|a| (a, 0)).collect();
        let inst = InstanceDoc::new(21, 1, &edges, vec![(0..21).collect()]).build().unwrap();
        assert!(matches!(enumerate_group_fair(&inst, false), Err(Error::TooLarge(_))));
    }

    #[test]
    fn corrupted_weight_is_flagged() {
        let inst = d1();
        let good = MatchingDistribution::new(vec![
            (Matching::new(&inst, vec![0]), 0.5),
            (Matching::new(&inst, vec![1]), 0.5),
        ]);
        assert!(audit(&inst, &good, &1.0, &0.0, 1e-9).weights_ok());
        let bad = MatchingDistribution::new(vec![
            (Matching::new(&inst, vec![0]), 0.5),
            (Matching::new(&inst, vec![1]), 0.6),
        ]);
        let report = audit(&inst, &bad, &1.0, &0.0, 1e-9);
        assert!(!report.weights_ok());
        assert!((report.weight_sum_deviation - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wilson_matches_hand_value() {
        // 50 of 100 at z = 1.96: 0.5 ± 0.0962 (center stays 0.5)
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn sampling_single_matching_and_determinism() {
        let inst = d1();
        let single = MatchingDistribution::new(vec![(Matching::new(&inst, vec![0]), 1.0)]);
        let t = sample(&inst, &single, 7, 100).unwrap();
        assert_eq!(t.matchings[0].frequency, 1.0);

        let half = MatchingDistribution::new(vec![
            (Matching::new(&inst, vec![0]), 0.5),
            (Matching::new(&inst, vec![1]), 0.5),
        ]);
        let a = sample(&inst, &half, 42, 100_000).unwrap();
        let b = sample(&inst, &half, 42, 100_000).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        for r in &a.matchings {
            assert!((r.frequency - 0.5).abs() <= 0.012);
        }
        assert!(sample(&inst, &half, 1, 0).is_err());
    }

    #[test]
    fn draw_inverts_cumulative() {
        let c = [0.25, 0.5, 1.0];
        assert_eq!(draw(&c, 0.0), 0);
        assert_eq!(draw(&c, 0.2499), 0);
        assert_eq!(draw(&c, 0.25), 1);
        assert_eq!(draw(&c, 0.99), 2);
    }
}
