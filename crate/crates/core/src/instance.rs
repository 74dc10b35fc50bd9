//! Problem instances: the bipartite graph, group memberships, preference
//! lists and every fairness bound.
//!
//! An [`Instance`] is always valid. Raw input arrives as an [`InstanceDoc`]
//! (the JSON form); [`validate`] lists everything wrong with a document and
//! [`InstanceDoc::build`] turns a clean one into an `Instance`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer window `lower <= count <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub lower: i64,
    pub upper: i64,
}

impl Window {
    pub const fn new(lower: i64, upper: i64) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Probabilistic window on the event "item is matched into its top-`k`
/// platforms".
#[derive(Debug, Clone, PartialEq)]
pub struct RankConstraint {
    pub item: usize,
    /// Prefix length of the preference list, 1-based.
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Probabilistic window on the event "item is matched into `platforms`".
#[derive(Debug, Clone, PartialEq)]
pub struct GenericIfConstraint {
    pub item: usize,
    pub platforms: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
}

/// Either kind of individual-fairness window, resolved to edge indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IfWindow {
    pub item: usize,
    pub label: IfLabel,
    pub edges: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IfLabel {
    /// Top-`k` prefix of the preference list.
    Rank(usize),
    /// Index into the instance's generic subset constraints.
    Subset(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    items: Vec<String>,
    platforms: Vec<String>,
    edges: Vec<(usize, usize)>,
    groups: Vec<Vec<usize>>,
    /// Per-edge group label after a collapse that could not be expressed
    /// with item-level memberships.
    edge_labels: Option<Vec<usize>>,
    preferences: Vec<Vec<usize>>,
    platform_bounds: BTreeMap<usize, Window>,
    group_bounds: BTreeMap<(usize, usize), Window>,
    rank_constraints: Vec<RankConstraint>,
    subset_constraints: Vec<GenericIfConstraint>,
    item_capacity: bool,

    // derived
    edge_index: HashMap<(usize, usize), usize>,
    item_edges: Vec<Vec<usize>>,
    platform_edges: Vec<Vec<usize>>,
    item_groups: Vec<Vec<usize>>,
    edge_groups: Vec<Vec<usize>>,
}

impl Instance {
    pub fn num_items(&self) -> usize {
        self.items.len()
    }
    pub fn num_platforms(&self) -> usize {
        self.platforms.len()
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }
    pub fn item_label(&self, a: usize) -> &str {
        &self.items[a]
    }
    pub fn platform_label(&self, p: usize) -> &str {
        &self.platforms[p]
    }
    /// `(item, platform)` of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
    pub fn edge_id(&self, item: usize, platform: usize) -> Option<usize> {
        self.edge_index.get(&(item, platform)).copied()
    }
    pub fn item_edges(&self, a: usize) -> &[usize] {
        &self.item_edges[a]
    }
    pub fn platform_edges(&self, p: usize) -> &[usize] {
        &self.platform_edges[p]
    }
    /// Members of group `h` (item indices, ascending).
    pub fn group_members(&self, h: usize) -> &[usize] {
        &self.groups[h]
    }
    /// Groups containing item `a` (ascending).
    pub fn item_groups(&self, a: usize) -> &[usize] {
        &self.item_groups[a]
    }
    /// Groups an edge counts toward at its platform. Equal to the item's
    /// groups unless the instance carries per-edge labels.
    pub fn edge_groups(&self, e: usize) -> &[usize] {
        &self.edge_groups[e]
    }
    pub fn has_edge_labels(&self) -> bool {
        self.edge_labels.is_some()
    }
    pub fn preferences(&self, a: usize) -> &[usize] {
        &self.preferences[a]
    }
    pub fn item_capacity(&self) -> bool {
        self.item_capacity
    }
    pub fn rank_constraints(&self) -> &[RankConstraint] {
        &self.rank_constraints
    }
    pub fn subset_constraints(&self) -> &[GenericIfConstraint] {
        &self.subset_constraints
    }

    pub fn platform_window(&self, p: usize) -> Window {
        self.platform_bounds
            .get(&p)
            .copied()
            .unwrap_or(Window::new(0, self.platform_edges[p].len() as i64))
    }

    /// Window on `|E_{p,h} ∩ M|`; default `[0, |C_{p,h}|]`.
    pub fn group_window(&self, p: usize, h: usize) -> Window {
        self.group_bounds.get(&(p, h)).copied().unwrap_or_else(|| {
            let size = self.platform_edges[p]
                .iter()
                .filter(|&&e| self.edge_groups[e].contains(&h))
                .count();
            Window::new(0, size as i64)
        })
    }

    pub fn explicit_platform_bounds(&self) -> &BTreeMap<usize, Window> {
        &self.platform_bounds
    }
    pub fn explicit_group_bounds(&self) -> &BTreeMap<(usize, usize), Window> {
        &self.group_bounds
    }

    /// Edges of platform `p` counting toward group `h`, i.e. the set
    /// `E_{p,h}`; empty when `C_{p,h}` is empty.
    pub fn group_edges(&self, p: usize, h: usize) -> Vec<usize> {
        self.platform_edges[p]
            .iter()
            .copied()
            .filter(|&e| self.edge_groups[e].contains(&h))
            .collect()
    }

    /// All `(p, h)` pairs with nonempty `C_{p,h}`, ordered by `(p, h)`.
    pub fn nonempty_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (e, &(_, p)) in self.edges.iter().enumerate() {
            for &h in &self.edge_groups[e] {
                out.insert((p, h));
            }
        }
        out.into_iter().collect()
    }

    /// Every `(p, h)` pair that carries a constraint worth emitting: the
    /// nonempty ones plus empty ones with a positive lower bound.
    pub fn constrained_pairs(&self) -> Vec<(usize, usize)> {
        let mut set: BTreeSet<(usize, usize)> = self.nonempty_pairs().into_iter().collect();
        for (&(p, h), w) in &self.group_bounds {
            if w.lower > 0 {
                set.insert((p, h));
            }
        }
        set.into_iter().collect()
    }

    /// Individual-fairness windows with their edge sets, rank constraints
    /// first (in input order), then generic subsets.
    pub fn if_windows(&self) -> Vec<IfWindow> {
        let mut out = Vec::with_capacity(self.rank_constraints.len() + self.subset_constraints.len());
        for c in &self.rank_constraints {
            let edges = self.preferences[c.item][..c.k]
                .iter()
                .map(|&p| self.edge_index[&(c.item, p)])
                .collect();
            out.push(IfWindow {
                item: c.item,
                label: IfLabel::Rank(c.k),
                edges,
                lower: c.lower,
                upper: c.upper,
            });
        }
        for (i, c) in self.subset_constraints.iter().enumerate() {
            let edges = c
                .platforms
                .iter()
                .map(|&p| self.edge_index[&(c.item, p)])
                .collect();
            out.push(IfWindow {
                item: c.item,
                label: IfLabel::Subset(i),
                edges,
                lower: c.lower,
                upper: c.upper,
            });
        }
        out
    }

    pub fn has_lower_bounds(&self) -> bool {
        self.platform_bounds.values().any(|w| w.lower > 0)
            || self.group_bounds.values().any(|w| w.lower > 0)
    }

    /// Copy with every individual-fairness lower bound multiplied by `t`.
    pub fn with_scaled_if_lower(&self, t: f64) -> Instance {
        let mut out = self.clone();
        for c in &mut out.rank_constraints {
            c.lower *= t;
        }
        for c in &mut out.subset_constraints {
            c.lower *= t;
        }
        out
    }

    /// Copy with the given `(p, h)` windows replaced.
    pub fn with_group_windows(&self, windows: &BTreeMap<(usize, usize), Window>) -> Instance {
        let mut out = self.clone();
        for (&k, &w) in windows {
            out.group_bounds.insert(k, w);
        }
        out
    }

    /// Copy with the individual-fairness windows replaced.
    pub fn with_fairness(&self, rank: Vec<RankConstraint>, subsets: Vec<GenericIfConstraint>) -> Result<Instance> {
        let mut doc = self.to_doc();
        doc.individual_fairness = rank
            .into_iter()
            .map(FairnessDoc::from_rank)
            .chain(subsets.into_iter().map(FairnessDoc::from_subset))
            .collect();
        doc.build()
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            items: self.items.clone(),
            platforms: self.platforms.clone(),
            edges: self.edges.iter().map(|&(a, p)| [a, p]).collect(),
            groups: self.groups.clone(),
            platform_bounds: self
                .platform_bounds
                .iter()
                .map(|(&platform, w)| PlatformBoundDoc {
                    platform,
                    lower: w.lower as f64,
                    upper: w.upper as f64,
                })
                .collect(),
            group_bounds: self
                .group_bounds
                .iter()
                .map(|(&(platform, group), w)| GroupBoundDoc {
                    platform,
                    group,
                    lower: w.lower as f64,
                    upper: w.upper as f64,
                })
                .collect(),
            preferences: self.preferences.clone(),
            individual_fairness: self
                .rank_constraints
                .iter()
                .cloned()
                .map(FairnessDoc::from_rank)
                .chain(self.subset_constraints.iter().cloned().map(FairnessDoc::from_subset))
                .collect(),
            flags: FlagsDoc {
                item_capacity: self.item_capacity,
            },
            edge_groups: self.edge_labels.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.build()
    }
}

// ---------------------------------------------------------------------------
// JSON document form

fn int_if_integral<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        s.serialize_i64(*v as i64)
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformBoundDoc {
    pub platform: usize,
    #[serde(serialize_with = "int_if_integral")]
    pub lower: f64,
    #[serde(serialize_with = "int_if_integral")]
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBoundDoc {
    pub platform: usize,
    pub group: usize,
    #[serde(serialize_with = "int_if_integral")]
    pub lower: f64,
    #[serde(serialize_with = "int_if_integral")]
    pub upper: f64,
}

/// One individual-fairness entry: either a rank prefix (`k`) or an explicit
/// platform subset (`platforms`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessDoc {
    pub item: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platforms: Option<Vec<usize>>,
    pub lower: f64,
    pub upper: f64,
}

impl FairnessDoc {
    pub fn from_rank(c: RankConstraint) -> Self {
        Self {
            item: c.item,
            k: Some(c.k),
            platforms: None,
            lower: c.lower,
            upper: c.upper,
        }
    }
    pub fn from_subset(c: GenericIfConstraint) -> Self {
        Self {
            item: c.item,
            k: None,
            platforms: Some(c.platforms),
            lower: c.lower,
            upper: c.upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagsDoc {
    #[serde(default = "default_true")]
    pub item_capacity: bool,
}

fn default_true() -> bool {
    true
}

impl Default for FlagsDoc {
    fn default() -> Self {
        Self { item_capacity: true }
    }
}

/// Serialized instance. Key order is fixed by field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub items: Vec<String>,
    pub platforms: Vec<String>,
    pub edges: Vec<[usize; 2]>,
    pub groups: Vec<Vec<usize>>,
    #[serde(default)]
    pub platform_bounds: Vec<PlatformBoundDoc>,
    #[serde(default)]
    pub group_bounds: Vec<GroupBoundDoc>,
    #[serde(default)]
    pub preferences: Vec<Vec<usize>>,
    #[serde(default)]
    pub individual_fairness: Vec<FairnessDoc>,
    #[serde(default)]
    pub flags: FlagsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_groups: Option<Vec<usize>>,
}

impl InstanceDoc {
    /// Document with `n` items, `m` platforms, the given edges and groups,
    /// and every other field at its default.
    pub fn new(n: usize, m: usize, edges: &[(usize, usize)], groups: Vec<Vec<usize>>) -> Self {
        Self {
            items: (0..n).map(|a| format!("a{a}")).collect(),
            platforms: (0..m).map(|p| format!("p{p}")).collect(),
            edges: edges.iter().map(|&(a, p)| [a, p]).collect(),
            groups,
            platform_bounds: Vec::new(),
            group_bounds: Vec::new(),
            preferences: Vec::new(),
            individual_fairness: Vec::new(),
            flags: FlagsDoc::default(),
            edge_groups: None,
        }
    }

    pub fn group_bound(mut self, platform: usize, group: usize, lower: f64, upper: f64) -> Self {
        self.group_bounds.push(GroupBoundDoc {
            platform,
            group,
            lower,
            upper,
        });
        self
    }

    pub fn platform_bound(mut self, platform: usize, lower: f64, upper: f64) -> Self {
        self.platform_bounds.push(PlatformBoundDoc { platform, lower, upper });
        self
    }

    /// Sets the preference list of `item`, creating empty lists as needed.
    pub fn prefer(mut self, item: usize, platforms: &[usize]) -> Self {
        if self.preferences.len() < self.items.len() {
            self.preferences.resize(self.items.len(), Vec::new());
        }
        self.preferences[item] = platforms.to_vec();
        self
    }

    pub fn rank_window(mut self, item: usize, k: usize, lower: f64, upper: f64) -> Self {
        self.individual_fairness.push(FairnessDoc {
            item,
            k: Some(k),
            platforms: None,
            lower,
            upper,
        });
        self
    }

    pub fn subset_window(mut self, item: usize, platforms: &[usize], lower: f64, upper: f64) -> Self {
        self.individual_fairness.push(FairnessDoc {
            item,
            k: None,
            platforms: Some(platforms.to_vec()),
            lower,
            upper,
        });
        self
    }

    pub fn item_capacity(mut self, on: bool) -> Self {
        self.flags.item_capacity = on;
        self
    }

    /// Preference lists default to the item's neighbours in platform
    /// order when the document leaves them out entirely.
    pub fn with_default_preferences(mut self) -> Self {
        if self.preferences.is_empty() {
            let mut prefs = vec![Vec::new(); self.items.len()];
            let mut edges = self.edges.clone();
            edges.sort_by_key(|e| (e[0], e[1]));
            for [a, p] in edges {
                if a < prefs.len() {
                    prefs[a].push(p);
                }
            }
            self.preferences = prefs;
        }
        self
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    pub fn build(self) -> Result<Instance> {
        let violations = validate(&self);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        Ok(self.build_unchecked())
    }

    fn build_unchecked(self) -> Instance {
        let n = self.items.len();
        let m = self.platforms.len();
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut edge_index = HashMap::with_capacity(edges.len());
        let mut item_edges = vec![Vec::new(); n];
        let mut platform_edges = vec![Vec::new(); m];
        for (e, &(a, p)) in edges.iter().enumerate() {
            edge_index.insert((a, p), e);
            item_edges[a].push(e);
            platform_edges[p].push(e);
        }
        let mut groups = self.groups;
        for g in &mut groups {
            g.sort_unstable();
        }
        let mut item_groups = vec![Vec::new(); n];
        for (h, members) in groups.iter().enumerate() {
            for &a in members {
                item_groups[a].push(h);
            }
        }
        let edge_groups = match &self.edge_groups {
            Some(labels) => labels.iter().map(|&h| vec![h]).collect(),
            None => edges.iter().map(|&(a, _)| item_groups[a].clone()).collect(),
        };
        let mut preferences = self.preferences;
        if preferences.is_empty() {
            preferences = vec![Vec::new(); n];
        }
        let mut rank_constraints = Vec::new();
        let mut subset_constraints = Vec::new();
        for f in self.individual_fairness {
            match (f.k, f.platforms) {
                (Some(k), _) => rank_constraints.push(RankConstraint {
                    item: f.item,
                    k,
                    lower: f.lower,
                    upper: f.upper,
                }),
                (None, Some(platforms)) => subset_constraints.push(GenericIfConstraint {
                    item: f.item,
                    platforms,
                    lower: f.lower,
                    upper: f.upper,
                }),
                (None, None) => unreachable!("validated"),
            }
        }
        Instance {
            items: self.items,
            platforms: self.platforms,
            edges,
            groups,
            edge_labels: self.edge_groups,
            preferences,
            platform_bounds: self
                .platform_bounds
                .iter()
                .map(|b| (b.platform, Window::new(b.lower as i64, b.upper as i64)))
                .collect(),
            group_bounds: self
                .group_bounds
                .iter()
                .map(|b| ((b.platform, b.group), Window::new(b.lower as i64, b.upper as i64)))
                .collect(),
            rank_constraints,
            subset_constraints,
            item_capacity: self.flags.item_capacity,
            edge_index,
            item_edges,
            platform_edges,
            item_groups,
            edge_groups,
        }
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    UnknownItem,
    UnknownPlatform,
    UnknownGroup,
    DuplicateEdge,
    DuplicateEntry,
    ItemWithoutGroup,
    NotANeighbor,
    PreferenceLength,
    NonIntegerBound,
    NegativeBound,
    LowerAboveUpper,
    ProbabilityRange,
    RankOutOfRange,
    RankNotIncreasing,
    MissingTarget,
    EmptySubset,
    EdgeLabel,
}

impl Rule {
    fn text(self) -> &'static str {
        match self {
            Rule::UnknownItem => "unknown item",
            Rule::UnknownPlatform => "unknown platform",
            Rule::UnknownGroup => "unknown group",
            Rule::DuplicateEdge => "duplicate edge",
            Rule::DuplicateEntry => "duplicate entry",
            Rule::ItemWithoutGroup => "item in no group",
            Rule::NotANeighbor => "platform is not a neighbor",
            Rule::PreferenceLength => "preference list count differs from item count",
            Rule::NonIntegerBound => "non-integer bound",
            Rule::NegativeBound => "negative bound",
            Rule::LowerAboveUpper => "L>U",
            Rule::ProbabilityRange => "probability outside [0,1]",
            Rule::RankOutOfRange => "k outside preference list",
            Rule::RankNotIncreasing => "k not strictly increasing",
            Rule::MissingTarget => "neither k nor platforms given",
            Rule::EmptySubset => "empty platform subset",
            Rule::EdgeLabel => "edge label not a group of the item",
        }
    }
}

/// One broken invariant: which field, which entry, which rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub index: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {} in {}", self.rule.text(), self.index, self.field)
    }
}

fn check_bound(out: &mut Vec<Violation>, field: &'static str, index: String, lower: f64, upper: f64) {
    let mut integral = true;
    for v in [lower, upper] {
        if !v.is_finite() || v.fract() != 0.0 {
            integral = false;
        }
    }
    if !integral {
        out.push(Violation {
            field,
            index,
            rule: Rule::NonIntegerBound,
        });
        return;
    }
    if lower < 0.0 || upper < 0.0 {
        out.push(Violation {
            field,
            index: index.clone(),
            rule: Rule::NegativeBound,
        });
    }
    if lower > upper {
        out.push(Violation {
            field,
            index,
            rule: Rule::LowerAboveUpper,
        });
    }
}

/// Lists every invariant the document breaks; empty means it builds.
pub fn validate(doc: &InstanceDoc) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = doc.items.len();
    let m = doc.platforms.len();
    let chi = doc.groups.len();

    let mut seen = HashMap::new();
    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (e, &[a, p]) in doc.edges.iter().enumerate() {
        if a >= n {
            out.push(Violation {
                field: "edges",
                index: format!("{e}"),
                rule: Rule::UnknownItem,
            });
        }
        if p >= m {
            out.push(Violation {
                field: "edges",
                index: format!("{e}"),
                rule: Rule::UnknownPlatform,
            });
        }
        if seen.insert((a, p), e).is_some() {
            out.push(Violation {
                field: "edges",
                index: format!("{e}"),
                rule: Rule::DuplicateEdge,
            });
        }
        if a < n {
            neighbors[a].insert(p);
        }
    }

    let mut covered = vec![false; n];
    let mut item_groups: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (h, members) in doc.groups.iter().enumerate() {
        let mut inside = BTreeSet::new();
        for &a in members {
            if a >= n {
                out.push(Violation {
                    field: "groups",
                    index: format!("({h},{a})"),
                    rule: Rule::UnknownItem,
                });
                continue;
            }
            if !inside.insert(a) {
                out.push(Violation {
                    field: "groups",
                    index: format!("({h},{a})"),
                    rule: Rule::DuplicateEntry,
                });
            }
            covered[a] = true;
            item_groups[a].insert(h);
        }
    }
    for (a, c) in covered.iter().enumerate() {
        if !c {
            out.push(Violation {
                field: "groups",
                index: format!("{a}"),
                rule: Rule::ItemWithoutGroup,
            });
        }
    }

    let mut pref_len = vec![0usize; n];
    if !doc.preferences.is_empty() {
        if doc.preferences.len() != n {
            out.push(Violation {
                field: "preferences",
                index: format!("{}", doc.preferences.len()),
                rule: Rule::PreferenceLength,
            });
        }
        for (a, list) in doc.preferences.iter().enumerate().take(n) {
            pref_len[a] = list.len();
            let mut inside = BTreeSet::new();
            for &p in list {
                if !inside.insert(p) {
                    out.push(Violation {
                        field: "preferences",
                        index: format!("({a},{p})"),
                        rule: Rule::DuplicateEntry,
                    });
                } else if !neighbors[a].contains(&p) {
                    out.push(Violation {
                        field: "preferences",
                        index: format!("({a},{p})"),
                        rule: Rule::NotANeighbor,
                    });
                }
            }
        }
    }

    let mut seen_p = BTreeSet::new();
    for b in &doc.platform_bounds {
        let index = format!("{}", b.platform);
        if b.platform >= m {
            out.push(Violation {
                field: "platform_bounds",
                index,
                rule: Rule::UnknownPlatform,
            });
            continue;
        }
        if !seen_p.insert(b.platform) {
            out.push(Violation {
                field: "platform_bounds",
                index: index.clone(),
                rule: Rule::DuplicateEntry,
            });
        }
        check_bound(&mut out, "platform_bounds", index, b.lower, b.upper);
    }

    let mut seen_g = BTreeSet::new();
    for b in &doc.group_bounds {
        let index = format!("({},{})", b.platform, b.group);
        if b.platform >= m {
            out.push(Violation {
                field: "group_bounds",
                index,
                rule: Rule::UnknownPlatform,
            });
            continue;
        }
        if b.group >= chi {
            out.push(Violation {
                field: "group_bounds",
                index,
                rule: Rule::UnknownGroup,
            });
            continue;
        }
        if !seen_g.insert((b.platform, b.group)) {
            out.push(Violation {
                field: "group_bounds",
                index: index.clone(),
                rule: Rule::DuplicateEntry,
            });
        }
        check_bound(&mut out, "group_bounds", index, b.lower, b.upper);
    }

    let mut last_k: HashMap<usize, usize> = HashMap::new();
    for f in &doc.individual_fairness {
        if f.item >= n {
            out.push(Violation {
                field: "individual_fairness",
                index: format!("{}", f.item),
                rule: Rule::UnknownItem,
            });
            continue;
        }
        let index = match (&f.k, &f.platforms) {
            (Some(k), _) => format!("({},{})", f.item, k),
            (None, Some(ps)) => format!("({},{:?})", f.item, ps),
            (None, None) => {
                out.push(Violation {
                    field: "individual_fairness",
                    index: format!("{}", f.item),
                    rule: Rule::MissingTarget,
                });
                continue;
            }
        };
        if !(0.0..=1.0).contains(&f.lower) || !(0.0..=1.0).contains(&f.upper) {
            out.push(Violation {
                field: "individual_fairness",
                index: index.clone(),
                rule: Rule::ProbabilityRange,
            });
        }
        if f.lower > f.upper {
            out.push(Violation {
                field: "individual_fairness",
                index: index.clone(),
                rule: Rule::LowerAboveUpper,
            });
        }
        match (&f.k, &f.platforms) {
            (Some(k), _) => {
                if *k == 0 || *k > pref_len[f.item] {
                    out.push(Violation {
                        field: "individual_fairness",
                        index: index.clone(),
                        rule: Rule::RankOutOfRange,
                    });
                }
                if let Some(prev) = last_k.insert(f.item, *k) {
                    if *k <= prev {
                        out.push(Violation {
                            field: "individual_fairness",
                            index,
                            rule: Rule::RankNotIncreasing,
                        });
                    }
                }
            }
            (None, Some(ps)) => {
                if ps.is_empty() {
                    out.push(Violation {
                        field: "individual_fairness",
                        index: index.clone(),
                        rule: Rule::EmptySubset,
                    });
                }
                let mut inside = BTreeSet::new();
                for &p in ps {
                    if !inside.insert(p) {
                        out.push(Violation {
                            field: "individual_fairness",
                            index: index.clone(),
                            rule: Rule::DuplicateEntry,
                        });
                    } else if !neighbors[f.item].contains(&p) {
                        out.push(Violation {
                            field: "individual_fairness",
                            index: index.clone(),
                            rule: Rule::NotANeighbor,
                        });
                    }
                }
            }
            (None, None) => {}
        }
    }

    if let Some(labels) = &doc.edge_groups {
        if labels.len() != doc.edges.len() {
            out.push(Violation {
                field: "edge_groups",
                index: format!("{}", labels.len()),
                rule: Rule::DuplicateEntry,
            });
        } else {
            for (e, (&h, &[a, _])) in labels.iter().zip(&doc.edges).enumerate() {
                if h >= chi {
                    out.push(Violation {
                        field: "edge_groups",
                        index: format!("{e}"),
                        rule: Rule::UnknownGroup,
                    });
                } else if a < n && !item_groups[a].contains(&h) {
                    out.push(Violation {
                        field: "edge_groups",
                        index: format!("{e}"),
                        rule: Rule::EdgeLabel,
                    });
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Statistics and the group collapse

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceStats {
    /// Maximum number of groups any single edge counts toward.
    pub delta: usize,
    /// `max_p |C_p|`.
    pub g: usize,
    /// `C_{p,h}` for every nonempty pair, keyed by `(p, h)`.
    pub platform_groups: BTreeMap<(usize, usize), Vec<usize>>,
}

impl InstanceStats {
    pub fn groups_at(&self, p: usize) -> usize {
        self.platform_groups.range((p, 0)..(p + 1, 0)).count()
    }
}

pub fn compute_stats(instance: &Instance) -> InstanceStats {
    let mut platform_groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (e, &(a, p)) in instance.edges.iter().enumerate() {
        for &h in instance.edge_groups(e) {
            platform_groups.entry((p, h)).or_default().push(a);
        }
    }
    for v in platform_groups.values_mut() {
        v.sort_unstable();
    }
    let mut per_platform = vec![0usize; instance.num_platforms()];
    for &(p, _) in platform_groups.keys() {
        per_platform[p] += 1;
    }
    let g = per_platform.into_iter().max().unwrap_or(0);
    let mut delta = 0;
    for a in 0..instance.num_items() {
        let d = if instance.item_edges(a).is_empty() || !instance.has_edge_labels() {
            instance.item_groups(a).len()
        } else {
            instance
                .item_edges(a)
                .iter()
                .map(|&e| instance.edge_groups(e).len())
                .max()
                .unwrap_or(0)
        };
        delta = delta.max(d);
    }
    InstanceStats {
        delta,
        g,
        platform_groups,
    }
}

/// Which original group each edge was kept in by [`collapse_groups`].
///
/// The collapsed instance reuses the original group indices, so collapsed
/// group `h` is a subset of original group `h` and bounds carry over by
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseMap {
    pub edge_group: Vec<usize>,
}

/// Reduces an instance to disjoint groups at every platform.
///
/// At each edge `(a, p)` the item keeps the group with the smallest upper
/// bound `u_{p,h}` among its groups, ties going to the lowest group index.
/// When every item makes the same choice at all its platforms the result
/// uses plain item memberships; otherwise it carries per-edge labels.
pub fn collapse_groups(instance: &Instance) -> Result<(Instance, CollapseMap)> {
    for a in 0..instance.num_items() {
        if instance.item_groups(a).is_empty() {
            return Err(Error::Precondition(format!("item {a} belongs to no group")));
        }
    }
    let already_disjoint = (0..instance.num_edges()).all(|e| instance.edge_groups(e).len() == 1)
        && (0..instance.num_items())
            .all(|a| !instance.item_edges(a).is_empty() || instance.item_groups(a).len() == 1);
    let mut edge_group = Vec::with_capacity(instance.num_edges());
    for (e, &(_, p)) in instance.edges.iter().enumerate() {
        let best = instance
            .edge_groups(e)
            .iter()
            .copied()
            .min_by_key(|&h| (instance.group_window(p, h).upper, h))
            .expect("item has a group");
        edge_group.push(best);
    }
    if already_disjoint {
        return Ok((instance.clone(), CollapseMap { edge_group }));
    }

    let mut doc = instance.to_doc();
    // Explicit bounds for every pair so defaults computed from the original
    // memberships survive the membership change.
    let mut bounds: BTreeMap<(usize, usize), Window> = instance.group_bounds.clone();
    for (p, h) in instance.nonempty_pairs() {
        bounds.entry((p, h)).or_insert_with(|| instance.group_window(p, h));
    }
    doc.group_bounds = bounds
        .iter()
        .map(|(&(platform, group), w)| GroupBoundDoc {
            platform,
            group,
            lower: w.lower as f64,
            upper: w.upper as f64,
        })
        .collect();

    let mut per_item: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); instance.num_items()];
    for (e, &(a, _)) in instance.edges.iter().enumerate() {
        per_item[a].insert(edge_group[e]);
    }
    for (a, set) in per_item.iter_mut().enumerate() {
        if set.is_empty() {
            set.insert(instance.item_groups(a)[0]);
        }
    }
    let consistent = per_item.iter().all(|s| s.len() == 1);
    let mut groups = vec![Vec::new(); instance.num_groups()];
    for (a, set) in per_item.iter().enumerate() {
        for &h in set {
            groups[h].push(a);
        }
    }
    doc.groups = groups;
    doc.edge_groups = if consistent { None } else { Some(edge_group.clone()) };

    Ok((doc.build()?, CollapseMap { edge_group }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1() -> InstanceDoc {
        InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]]).group_bound(0, 0, 0.0, 1.0)
    }

    #[test]
    fn minimal_instance_is_valid() {
        let doc = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0]]);
        assert!(validate(&doc).is_empty());
        let inst = doc.build().unwrap();
        assert_eq!(inst.platform_window(0), Window::new(0, 1));
        assert_eq!(inst.group_window(0, 0), Window::new(0, 1));
    }

    #[test]
    fn inverted_probability_window_is_one_violation() {
        let doc = d1().prefer(0, &[0]).prefer(1, &[0]).rank_window(0, 1, 0.9, 0.5);
        let v = validate(&doc);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::LowerAboveUpper);
        assert_eq!(v[0].to_string(), "L>U at (0,1) in individual_fairness");
    }

    #[test]
    fn fractional_cap_is_one_violation() {
        let doc = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]]).group_bound(0, 0, 0.0, 2.5);
        let v = validate(&doc);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::NonIntegerBound);
        assert!(matches!(doc.build(), Err(Error::Invalid(_))));
    }

    #[test]
    fn structural_violations() {
        let doc = InstanceDoc::new(2, 1, &[(0, 0), (0, 0), (0, 3)], vec![vec![0]]);
        let rules: Vec<Rule> = validate(&doc).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::DuplicateEdge));
        assert!(rules.contains(&Rule::UnknownPlatform));
        assert!(rules.contains(&Rule::ItemWithoutGroup));

        let doc = d1().prefer(0, &[0]).rank_window(0, 1, 0.1, 0.5).rank_window(0, 1, 0.1, 0.5);
        let rules: Vec<Rule> = validate(&doc).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::RankNotIncreasing]);

        let doc = InstanceDoc::new(1, 2, &[(0, 0)], vec![vec![0]]).prefer(0, &[1]);
        let rules: Vec<Rule> = validate(&doc).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::NotANeighbor]);
    }

    #[test]
    fn stats_single() {
        let inst = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0]]).build().unwrap();
        let s = compute_stats(&inst);
        assert_eq!((s.delta, s.g), (1, 1));
    }

    #[test]
    fn stats_overlapping() {
        // a1 in {h1,h2}, a2 in {h2}, both adjacent to p
        let inst = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0], vec![0, 1]])
            .build()
            .unwrap();
        let s = compute_stats(&inst);
        assert_eq!(s.delta, 2);
        assert_eq!(s.g, 2);
        assert_eq!(s.platform_groups[&(0, 0)], vec![0]);
        assert_eq!(s.platform_groups[&(0, 1)], vec![0, 1]);
    }

    #[test]
    fn stats_without_edges() {
        let inst = InstanceDoc::new(2, 2, &[], vec![vec![0, 1]]).build().unwrap();
        assert_eq!(compute_stats(&inst).g, 0);
    }

    #[test]
    fn collapse_identity_on_disjoint() {
        let inst = d1().build().unwrap();
        let (c, map) = collapse_groups(&inst).unwrap();
        assert_eq!(c, inst);
        assert_eq!(map.edge_group, vec![0, 0]);
    }

    #[test]
    fn collapse_keeps_smallest_cap() {
        let inst = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0], vec![0]])
            .group_bound(0, 0, 0.0, 1.0)
            .group_bound(0, 1, 0.0, 3.0)
            .build()
            .unwrap();
        let (c, _) = collapse_groups(&inst).unwrap();
        assert_eq!(c.item_groups(0), &[0]);
        assert_eq!(compute_stats(&c).delta, 1);

        let inst = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0], vec![0]])
            .group_bound(0, 0, 0.0, 3.0)
            .group_bound(0, 1, 0.0, 1.0)
            .build()
            .unwrap();
        let (c, _) = collapse_groups(&inst).unwrap();
        assert_eq!(c.item_groups(0), &[1]);
    }

    #[test]
    fn collapse_tie_goes_to_lower_index() {
        let inst = InstanceDoc::new(1, 1, &[(0, 0)], vec![vec![0], vec![0]])
            .group_bound(0, 0, 0.0, 2.0)
            .group_bound(0, 1, 0.0, 2.0)
            .build()
            .unwrap();
        let (c, _) = collapse_groups(&inst).unwrap();
        assert_eq!(c.item_groups(0), &[0]);
    }

    #[test]
    fn collapse_per_platform_choice_uses_edge_labels() {
        // item 0 in {h0,h1}: h0 is tighter at p0, h1 is tighter at p1
        let inst = InstanceDoc::new(1, 2, &[(0, 0), (0, 1)], vec![vec![0], vec![0]])
            .group_bound(0, 0, 0.0, 1.0)
            .group_bound(0, 1, 0.0, 5.0)
            .group_bound(1, 0, 0.0, 5.0)
            .group_bound(1, 1, 0.0, 1.0)
            .build()
            .unwrap();
        let (c, map) = collapse_groups(&inst).unwrap();
        assert_eq!(map.edge_group, vec![0, 1]);
        assert!(c.has_edge_labels());
        assert_eq!(c.edge_groups(0), &[0]);
        assert_eq!(c.edge_groups(1), &[1]);
        assert_eq!(compute_stats(&c).delta, 1);
        let (again, _) = collapse_groups(&c).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn collapse_preserves_default_caps() {
        // default cap of (p0,h1) is |C_{p0,h1}| = 2 before the collapse
        let inst = InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0], vec![0, 1]])
            .group_bound(0, 0, 0.0, 1.0)
            .build()
            .unwrap();
        let (c, _) = collapse_groups(&inst).unwrap();
        assert_eq!(c.group_window(0, 1), Window::new(0, 2));
        assert_eq!(c.item_groups(0), &[0]);
    }

    #[test]
    fn json_round_trip() {
        let inst = d1()
            .prefer(0, &[0])
            .prefer(1, &[0])
            .rank_window(0, 1, 0.5, 0.5)
            .subset_window(1, &[0], 0.25, 1.0)
            .platform_bound(0, 0.0, 2.0)
            .build()
            .unwrap();
        let text = inst.to_json();
        assert!(text.contains("\"upper\": 1"));
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json(), text);
    }
}
