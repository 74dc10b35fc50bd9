//! Integral group-fair matchings for disjoint groups via max-flow with
//! lower bounds.
//!
//! Network: `source → item → (p,h) → p → sink`. Lower bounds are removed
//! with the usual excess/deficit construction (super source and sink plus a
//! `sink → source` arc); a feasible circulation is found first and then
//! augmented to a maximum `source → sink` flow. Augmenting paths are found
//! by BFS over arcs in insertion order, so results are deterministic.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Window};
use crate::lp::{build_gflp, solve_vertex, GflpBounds, LpOutcome, SimplexOptions};

/// A set of edges with its per-platform, per-`(p, h)` and per-item counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matching {
    /// Sorted edge indices.
    pub edges: Vec<usize>,
    #[serde(skip)]
    pub platform_counts: Vec<usize>,
    #[serde(skip)]
    pub group_counts: BTreeMap<(usize, usize), usize>,
    #[serde(skip)]
    pub item_degree: Vec<usize>,
}

impl Matching {
    pub fn new(instance: &Instance, mut edges: Vec<usize>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut platform_counts = vec![0; instance.num_platforms()];
        let mut item_degree = vec![0; instance.num_items()];
        let mut group_counts = BTreeMap::new();
        for &e in &edges {
            let (a, p) = instance.edge(e);
            platform_counts[p] += 1;
            item_degree[a] += 1;
            for &h in instance.edge_groups(e) {
                *group_counts.entry((p, h)).or_insert(0) += 1;
            }
        }
        Self {
            edges,
            platform_counts,
            group_counts,
            item_degree,
        }
    }

    pub fn empty(instance: &Instance) -> Self {
        Self::new(instance, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: usize) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn group_count(&self, p: usize, h: usize) -> usize {
        self.group_counts.get(&(p, h)).copied().unwrap_or(0)
    }

    /// Whether every count lies in `bounds` (and item degree is at most one
    /// when the instance has item capacity and `bounds` has no item windows).
    pub fn satisfies(&self, instance: &Instance, bounds: &GflpBounds) -> bool {
        let in_window = |w: &Window, v: usize| w.contains(v as i64);
        if !bounds
            .platform
            .iter()
            .zip(&self.platform_counts)
            .all(|(w, &c)| in_window(w, c))
        {
            return false;
        }
        if !bounds.group.iter().all(|(&(p, h), w)| in_window(w, self.group_count(p, h))) {
            return false;
        }
        match &bounds.item {
            Some(items) => {
                if !items.iter().zip(&self.item_degree).all(|(w, &c)| in_window(w, c)) {
                    return false;
                }
            }
            None => {
                if instance.item_capacity() && self.item_degree.iter().any(|&d| d > 1) {
                    return false;
                }
            }
        }
        if let Some(edges) = &bounds.edge {
            for (e, w) in edges.iter().enumerate() {
                if !in_window(w, usize::from(self.contains(e))) {
                    return false;
                }
            }
        }
        true
    }
}

/// Produces a maximum-cardinality integral matching within given windows.
pub trait IntegralSolver {
    /// `Ok(None)` when no matching meets the windows.
    fn solve(&self, instance: &Instance, bounds: &GflpBounds) -> Result<Option<Matching>>;
}

/// Max-flow solver (the default).
#[derive(Debug, Clone, Copy, Default)]
pub struct FlowSolver;

impl IntegralSolver for FlowSolver {
    fn solve(&self, instance: &Instance, bounds: &GflpBounds) -> Result<Option<Matching>> {
        solve_integral_gflp(instance, bounds)
    }
}

/// Solves the group-fair matching LP with the simplex and reads off the
/// vertex, which is integral for disjoint groups. Used as an independent
/// cross-check of [`FlowSolver`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LpVertexSolver;

impl IntegralSolver for LpVertexSolver {
    fn solve(&self, instance: &Instance, bounds: &GflpBounds) -> Result<Option<Matching>> {
        let lp = build_gflp(instance, Some(bounds));
        match solve_vertex::<f64>(&lp, &SimplexOptions::default())? {
            LpOutcome::Infeasible(_) => Ok(None),
            LpOutcome::Optimal(sol) => {
                let mut edges = Vec::new();
                for (e, &v) in sol.x.iter().enumerate() {
                    if v == 1.0 {
                        edges.push(e);
                    } else if v != 0.0 {
                        return Err(Error::Numerical(format!("fractional vertex value {v} on edge {e}")));
                    }
                }
                Ok(Some(Matching::new(instance, edges)))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
}

/// Residual network with paired arcs (`i ^ 1` is the reverse of `i`).
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    lower: Vec<i64>,
    upper: Vec<i64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            ..Self::default()
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    /// Adds `from → to` with capacity window `[lower, upper]`; returns the
    /// arc id. The arc starts carrying no flow beyond `lower`.
    pub fn add_arc(&mut self, from: usize, to: usize, lower: i64, upper: i64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap: upper - lower });
        self.arcs.push(Arc { to: from, cap: 0 });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        self.lower.push(lower);
        self.lower.push(0);
        self.upper.push(upper);
        self.upper.push(0);
        id
    }

    /// Flow on arc `id`, including its lower bound.
    pub fn flow(&self, id: usize) -> i64 {
        self.lower[id] + self.arcs[id ^ 1].cap
    }

    pub fn bounds(&self, id: usize) -> (i64, i64) {
        (self.lower[id], self.upper[id])
    }

    /// Arc ids of real (forward) arcs.
    pub fn arc_ids(&self) -> impl Iterator<Item = usize> {
        (0..self.arcs.len()).step_by(2)
    }

    pub fn head(&self, id: usize) -> usize {
        self.arcs[id].to
    }

    pub fn tail(&self, id: usize) -> usize {
        self.arcs[id ^ 1].to
    }

    fn augment(&mut self, s: usize, t: usize, limit: i64) -> i64 {
        let mut total = 0;
        while total < limit {
            let mut pred = vec![usize::MAX; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            'bfs: while let Some(v) = queue.pop_front() {
                for &id in &self.adj[v] {
                    let arc = &self.arcs[id];
                    if arc.cap > 0 && !seen[arc.to] {
                        seen[arc.to] = true;
                        pred[arc.to] = id;
                        if arc.to == t {
                            break 'bfs;
                        }
                        queue.push_back(arc.to);
                    }
                }
            }
            if !seen[t] {
                break;
            }
            let mut push = limit - total;
            let mut v = t;
            while v != s {
                let id = pred[v];
                push = push.min(self.arcs[id].cap);
                v = self.arcs[id ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let id = pred[v];
                self.arcs[id].cap -= push;
                self.arcs[id ^ 1].cap += push;
                v = self.arcs[id ^ 1].to;
            }
            total += push;
        }
        total
    }

    /// Maximum `s → t` flow honouring every lower bound, or `None` if no
    /// feasible flow exists. Returns the flow value.
    pub fn max_flow_with_lower_bounds(&mut self, s: usize, t: usize) -> Option<i64> {
        let n = self.adj.len();
        let mut excess = vec![0i64; n];
        for id in self.arc_ids().collect::<Vec<_>>() {
            let l = self.lower[id];
            if l != 0 {
                excess[self.head(id)] += l;
                excess[self.tail(id)] -= l;
            }
        }
        let big = self.upper.iter().fold(1i64, |acc, &u| acc.saturating_add(u.max(0)));
        let back = self.add_arc(t, s, 0, big);
        let ss = self.add_node();
        let tt = self.add_node();
        let mut need = 0;
        let mut helpers = Vec::new();
        for (v, &ex) in excess.iter().enumerate() {
            if ex > 0 {
                helpers.push(self.add_arc(ss, v, 0, ex));
                need += ex;
            } else if ex < 0 {
                helpers.push(self.add_arc(v, tt, 0, -ex));
            }
        }
        if self.augment(ss, tt, need) < need {
            return None;
        }
        // drop the helper arcs and the return arc, keeping their flow
        let mut value = self.arcs[back ^ 1].cap;
        for id in helpers.into_iter().chain([back]) {
            self.arcs[id].cap = 0;
            self.arcs[id ^ 1].cap = 0;
        }
        value += self.augment(s, t, i64::MAX);
        Some(value)
    }
}

/// Maximum-cardinality matching satisfying `bounds` on an instance whose
/// edges each count toward exactly one group. `Ok(None)` if infeasible.
pub fn solve_integral_gflp(instance: &Instance, bounds: &GflpBounds) -> Result<Option<Matching>> {
    let n = instance.num_items();
    let m = instance.num_platforms();
    if bounds.platform.len() != m {
        return Err(Error::Input(format!(
            "{} platform windows for {m} platforms",
            bounds.platform.len()
        )));
    }
    for e in 0..instance.num_edges() {
        if instance.edge_groups(e).len() != 1 {
            return Err(Error::Precondition(format!(
                "edge {e} counts toward {} groups; the flow solver needs disjoint groups",
                instance.edge_groups(e).len()
            )));
        }
    }
    let source = 0;
    let item_node = |a: usize| 1 + a;
    let mut net = FlowNetwork::new(1 + n);

    // (p, h) nodes for every pair with edges, in (p, h) order
    let mut pair_node: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (p, h) in instance.nonempty_pairs() {
        let v = net.add_node();
        pair_node.insert((p, h), v);
    }
    for (&(p, h), w) in &bounds.group {
        if !pair_node.contains_key(&(p, h)) && w.lower > 0 {
            return Ok(None);
        }
    }
    let platform_node: Vec<usize> = (0..m).map(|_| net.add_node()).collect();
    let sink = net.add_node();

    for a in 0..n {
        let deg = instance.item_edges(a).len() as i64;
        let w = match &bounds.item {
            Some(items) => items[a],
            None if instance.item_capacity() => Window::new(0, 1),
            None => Window::new(0, deg),
        };
        if w.lower > w.upper {
            return Ok(None);
        }
        net.add_arc(source, item_node(a), w.lower, w.upper);
    }
    let mut edge_arc = Vec::with_capacity(instance.num_edges());
    for (e, &(a, p)) in instance.edges().iter().enumerate() {
        let h = instance.edge_groups(e)[0];
        let w = match &bounds.edge {
            Some(edges) => edges[e],
            None => Window::new(0, 1),
        };
        if w.lower > w.upper {
            return Ok(None);
        }
        edge_arc.push(net.add_arc(item_node(a), pair_node[&(p, h)], w.lower, w.upper));
    }
    for (&(p, h), &v) in &pair_node {
        let w = bounds
            .group
            .get(&(p, h))
            .copied()
            .unwrap_or_else(|| Window::new(0, i64::MAX / 4));
        if w.lower > w.upper {
            return Ok(None);
        }
        net.add_arc(v, platform_node[p], w.lower, w.upper);
    }
    for (p, w) in bounds.platform.iter().enumerate() {
        if w.lower > w.upper {
            return Ok(None);
        }
        net.add_arc(platform_node[p], sink, w.lower, w.upper);
    }

    if net.max_flow_with_lower_bounds(source, sink).is_none() {
        return Ok(None);
    }
    let edges = edge_arc
        .iter()
        .enumerate()
        .filter(|(_, &id)| net.flow(id) > 0)
        .map(|(e, _)| e)
        .collect();
    Ok(Some(Matching::new(instance, edges)))
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

    #[test]
    fn zero_windows_give_empty_matching() {
        let inst = d1();
        let mut b = GflpBounds::from_instance(&inst);
        b.platform = vec![Window::new(0, 0)];
        b.group.insert((0, 0), Window::new(0, 0));
        let m = solve_integral_gflp(&inst, &b).unwrap().unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn rounded_window_gives_single_edge() {
        let inst = d1();
        let mut b = GflpBounds::from_instance(&inst);
        b.platform = vec![Window::new(1, 1)];
        b.group.insert((0, 0), Window::new(1, 1));
        let m = solve_integral_gflp(&inst, &b).unwrap().unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn one_item_per_group() {
        let inst = InstanceDoc::new(3, 1, &[(0, 0), (1, 0), (2, 0)], vec![vec![0, 1], vec![2]])
            .group_bound(0, 0, 0.0, 1.0)
            .group_bound(0, 1, 0.0, 1.0)
            .platform_bound(0, 0.0, 2.0)
            .build()
            .unwrap();
        let m = solve_integral_gflp(&inst, &GflpBounds::from_instance(&inst)).unwrap().unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.group_count(0, 0), 1);
        assert_eq!(m.group_count(0, 1), 1);
    }

    #[test]
    fn lower_bound_on_empty_pair_is_infeasible() {
        let inst = InstanceDoc::new(1, 2, &[(0, 0)], vec![vec![0]])
            .group_bound(1, 0, 1.0, 1.0)
            .build()
            .unwrap();
        assert!(solve_integral_gflp(&inst, &GflpBounds::from_instance(&inst)).unwrap().is_none());
    }

    #[test]
    fn lower_bounds_force_flow_through_the_tight_side() {
        // two platforms, each needs exactly one item; item 0 only fits p0
        let inst = InstanceDoc::new(2, 2, &[(0, 0), (1, 0), (1, 1)], vec![vec![0, 1]])
            .platform_bound(0, 1.0, 1.0)
            .platform_bound(1, 1.0, 1.0)
            .build()
            .unwrap();
        let m = solve_integral_gflp(&inst, &GflpBounds::from_instance(&inst)).unwrap().unwrap();
        assert_eq!(m.edges, vec![0, 2]);
    }

    #[test]
    fn overlapping_groups_rejected() {
        let inst = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0], vec![0]]).build().unwrap();
        assert!(matches!(
            solve_integral_gflp(&inst, &GflpBounds::from_instance(&inst)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn flow_conservation() {
        let mut net = FlowNetwork::new(4);
        let a = net.add_arc(0, 1, 1, 2);
        let b = net.add_arc(0, 2, 0, 2);
        let c = net.add_arc(1, 3, 0, 1);
        let d = net.add_arc(2, 3, 1, 3);
        let value = net.max_flow_with_lower_bounds(0, 3).unwrap();
        assert_eq!(value, 3);
        assert_eq!(net.flow(a), net.flow(c));
        assert_eq!(net.flow(b), net.flow(d));
        assert!(net.flow(a) >= 1 && net.flow(d) >= 1);
    }
}
