//! Seeded instance generators and recount oracles shared by the
//! integration tests. The oracles only read instance accessors and recount
//! from scratch; they never call the library's own checkers.

#![allow(dead_code)]

use std::collections::BTreeSet;

use fairmatch::decomp::MatchingDistribution;
use fairmatch::ext::feasibility_scale;
use fairmatch::instance::{Instance, InstanceDoc};
use fairmatch::lp::{build_disjoint, SimplexOptions};
use fairmatch::Error;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_items: usize,
    pub max_platforms: usize,
    pub max_groups: usize,
    /// Most groups per item; 1 gives disjoint groups.
    pub max_delta: usize,
    pub max_degree: usize,
    /// Draw positive group and platform lower bounds.
    pub lower_bounds: bool,
    /// Draw rank fairness windows.
    pub fairness: bool,
    /// Stop adding edges beyond this many.
    pub max_edges: usize,
}

impl Shape {
    pub fn disjoint(max_items: usize, max_platforms: usize) -> Self {
        Self {
            max_items,
            max_platforms,
            max_groups: 4,
            max_delta: 1,
            max_degree: 3,
            lower_bounds: true,
            fairness: true,
            max_edges: usize::MAX,
        }
    }
}

fn two_dp(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.random_range(lo..=hi);
    (v * 100.0).round() / 100.0
}

/// Random instance of the given shape: group memberships, edges, integer
/// windows no larger than the counts they bound, and rank windows.
pub fn random_instance(rng: &mut ChaCha8Rng, shape: &Shape) -> Instance {
    let n = rng.random_range(1..=shape.max_items);
    let m = rng.random_range(1..=shape.max_platforms);
    let chi = rng.random_range(1..=shape.max_groups.min(n));
    let platforms: Vec<usize> = (0..m).collect();
    let group_ids: Vec<usize> = (0..chi).collect();

    let mut groups = vec![Vec::new(); chi];
    let mut member: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut edges = Vec::new();
    for a in 0..n {
        let count = rng.random_range(1..=shape.max_delta.min(chi));
        let mut hs: Vec<usize> = if a < chi { vec![a] } else { Vec::new() };
        for &h in group_ids.choose_multiple(rng, count) {
            if hs.len() < count && !hs.contains(&h) {
                hs.push(h);
            }
        }
        for h in hs {
            groups[h].push(a);
            member[a].insert(h);
        }
        let d = rng.random_range(1..=shape.max_degree.min(m));
        let mut nb: Vec<usize> = platforms.choose_multiple(rng, d).copied().collect();
        nb.sort_unstable();
        for p in nb {
            if edges.len() < shape.max_edges {
                edges.push((a, p));
            }
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }

    let mut doc = InstanceDoc::new(n, m, &edges, groups).with_default_preferences();
    for p in 0..m {
        for h in 0..chi {
            let c = edges.iter().filter(|&&(a, q)| q == p && member[a].contains(&h)).count() as i64;
            if c == 0 || !rng.random_bool(0.6) {
                continue;
            }
            let l = if shape.lower_bounds && rng.random_bool(0.3) {
                rng.random_range(0..=c / 2)
            } else {
                0
            };
            let u = rng.random_range(l..=c);
            doc = doc.group_bound(p, h, l as f64, u as f64);
        }
        let deg = edges.iter().filter(|&&(_, q)| q == p).count() as i64;
        if deg > 0 && rng.random_bool(0.3) {
            let l = if shape.lower_bounds { rng.random_range(0..=deg / 3) } else { 0 };
            let u = rng.random_range(l.max(1)..=deg.max(1));
            doc = doc.platform_bound(p, l as f64, u as f64);
        }
    }
    if shape.fairness {
        for a in 0..n {
            let deg = edges.iter().filter(|&&(b, _)| b == a).count();
            if deg == 0 || !rng.random_bool(0.5) {
                continue;
            }
            let k = rng.random_range(1..=deg);
            let l = two_dp(rng, 0.0, 0.9);
            let u = two_dp(rng, l, 1.0);
            doc = doc.rank_window(a, k, l, u);
        }
    }
    doc.build().expect("generated instance is valid")
}

/// Disjoint instance whose rank windows are scaled until the exact LP is
/// feasible; `None` if even zero lower bounds are infeasible.
pub fn feasible_disjoint(seed: u64) -> Option<Instance> {
    let inst = random_instance(&mut rng(seed), &Shape::disjoint(30, 8));
    match feasibility_scale(&build_disjoint(&inst), &SimplexOptions::default()) {
        Ok((t, _)) if t >= 1.0 => Some(inst),
        Ok((t, _)) => Some(inst.with_scaled_if_lower(t * (1.0 - 1e-9))),
        Err(Error::Infeasible(_)) => None,
        Err(e) => panic!("seed {seed}: {e}"),
    }
}

/// Largest number of groups any item belongs to.
pub fn delta_of(inst: &Instance) -> usize {
    (0..inst.num_edges())
        .map(|e| inst.edge_groups(e).len())
        .max()
        .unwrap_or(0)
}

/// Per-(p,h) counts of a matching, recounted from the edge list.
pub fn pair_count(inst: &Instance, edges: &[usize], p: usize, h: usize) -> i64 {
    edges
        .iter()
        .filter(|&&e| inst.edge(e).1 == p && inst.edge_groups(e).contains(&h))
        .count() as i64
}

/// Caps on every pair and, if required, at most one edge per item.
pub fn recount_group_fair(inst: &Instance, edges: &[usize]) -> bool {
    if inst.item_capacity() {
        let mut seen = BTreeSet::new();
        if !edges.iter().all(|&e| seen.insert(inst.edge(e).0)) {
            return false;
        }
    }
    (0..inst.num_platforms())
        .all(|p| (0..inst.num_groups()).all(|h| pair_count(inst, edges, p, h) <= inst.group_window(p, h).upper))
}

/// Group-fair plus every group lower bound and every platform window.
pub fn recount_strong(inst: &Instance, edges: &[usize]) -> bool {
    recount_group_fair(inst, edges)
        && (0..inst.num_platforms()).all(|p| {
            (0..inst.num_groups()).all(|h| pair_count(inst, edges, p, h) >= inst.group_window(p, h).lower)
                && inst
                    .platform_window(p)
                    .contains(edges.iter().filter(|&&e| inst.edge(e).1 == p).count() as i64)
        })
}

/// Largest `count − u` over every pair.
pub fn cap_excess(inst: &Instance, edges: &[usize]) -> i64 {
    let mut worst = 0;
    for p in 0..inst.num_platforms() {
        for h in 0..inst.num_groups() {
            worst = worst.max(pair_count(inst, edges, p, h) - inst.group_window(p, h).upper);
        }
    }
    worst
}

/// `(lower, upper, probability)` for every rank window, with probabilities
/// summed directly over the support.
pub fn rank_probabilities(inst: &Instance, dist: &MatchingDistribution<f64>) -> Vec<(f64, f64, f64)> {
    inst.rank_constraints()
        .iter()
        .map(|c| {
            let top: BTreeSet<usize> = inst.preferences(c.item)[..c.k].iter().copied().collect();
            let prob = dist
                .entries
                .iter()
                .filter(|(m, _)| {
                    m.edges.iter().any(|&e| {
                        let (a, p) = inst.edge(e);
                        a == c.item && top.contains(&p)
                    })
                })
                .map(|(_, w)| *w)
                .sum();
            (c.lower, c.upper, prob)
        })
        .collect()
}

pub fn marginals(dist: &MatchingDistribution<f64>, num_edges: usize) -> Vec<f64> {
    let mut out = vec![0.0; num_edges];
    for (m, w) in &dist.entries {
        for &e in &m.edges {
            out[e] += w;
        }
    }
    out
}
