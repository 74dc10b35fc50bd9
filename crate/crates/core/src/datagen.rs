//! Instance construction from data: edge-list CSV ingestion, uniform cap
//! generation, rank-based individual-fairness generation, and seeded
//! synthetic instances.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{FairnessDoc, GroupBoundDoc, Instance, InstanceDoc, RankConstraint};

/// Default rank percentages for [`generate_if`].
pub const DEFAULT_RANK_PERCENTS: [f64; 4] = [25.0, 50.0, 75.0, 100.0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub item: String,
    pub platform: String,
    pub group: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            item: "item".into(),
            platform: "platform".into(),
            group: "group".into(),
        }
    }
}

/// Indexes labels by first appearance.
#[derive(Default)]
struct Interner {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn get(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }
}

fn is_null(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t.eq_ignore_ascii_case("null") || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Reads an edge list with one `(item, platform, group)` triple per row.
/// Duplicate edges collapse; an item joins every group named on any of its
/// rows; rows with a null field are dropped.
pub fn ingest_reader<R: Read>(reader: R, cols: &ColumnMap) -> Result<Instance> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("missing column '{name}'")))
    };
    let (ci, cp, cg) = (find(&cols.item)?, find(&cols.platform)?, find(&cols.group)?);

    let (mut items, mut platforms, mut groups) = (Interner::default(), Interner::default(), Interner::default());
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut members: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut any_row = false;
    for record in rdr.records() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let (fi, fp, fg) = (field(ci), field(cp), field(cg));
        if is_null(fi) || is_null(fp) {
            continue;
        }
        any_row = true;
        if is_null(fg) {
            continue;
        }
        let a = items.get(fi);
        let p = platforms.get(fp);
        let h = groups.get(fg);
        if seen.insert((a, p)) {
            edges.push((a, p));
        }
        members.entry(h).or_default().insert(a);
    }
    if groups.labels.is_empty() {
        return Err(Error::Input(if any_row {
            "empty groups: every row has a null group".into()
        } else {
            "empty result: no usable rows".into()
        }));
    }
    let n = items.labels.len();
    let m = platforms.labels.len();
    let group_lists: Vec<Vec<usize>> = (0..groups.labels.len())
        .map(|h| members.get(&h).map(|s| s.iter().copied().collect()).unwrap_or_default())
        .collect();
    let mut doc = InstanceDoc::new(n, m, &edges, group_lists).with_default_preferences();
    doc.items = items.labels;
    doc.platforms = platforms.labels;
    doc.build()
}

pub fn ingest(path: &std::path::Path, cols: &ColumnMap) -> Result<Instance> {
    ingest_reader(std::fs::File::open(path)?, cols)
}

/// The uniform cap `⌈k·n / (m·χ)⌉` with `k = ⌈m·χ / n⌉`.
pub fn uniform_cap(n: usize, m: usize, chi: usize) -> Result<i64> {
    if n == 0 || m == 0 || chi == 0 {
        return Err(Error::Input(format!(
            "bound generation needs n, m, and the group count to be positive (got {n}, {m}, {chi})"
        )));
    }
    let mc = m * chi;
    let k = mc.div_ceil(n);
    Ok((k * n).div_ceil(mc) as i64)
}

/// Sets the same integer cap on every `(p, h)` pair, lower bounds zero, and
/// removes explicit platform windows.
pub fn generate_bounds(instance: &Instance) -> Result<Instance> {
    let (n, m, chi) = (instance.num_items(), instance.num_platforms(), instance.num_groups());
    let u = uniform_cap(n, m, chi)? as f64;
    let mut doc = instance.to_doc();
    doc.platform_bounds.clear();
    doc.group_bounds = (0..m)
        .flat_map(|p| {
            (0..chi).map(move |h| GroupBoundDoc {
                platform: p,
                group: h,
                lower: 0.0,
                upper: u,
            })
        })
        .collect();
    doc.build()
}

/// Random global ranking of the platforms; each item's preference list is
/// its neighbours in that order. For each `r`, the item must land in its
/// top `k` with probability at least `r/200`, where `k` counts its
/// neighbours within the global top `⌈m·r/100⌉` (at least 1).
pub fn generate_if(instance: &Instance, seed: u64, rank_percents: &[f64]) -> Result<Instance> {
    if let Some(r) = rank_percents.iter().find(|&&r| !(r > 0.0 && r <= 100.0)) {
        return Err(Error::Input(format!("rank percentage {r} is outside (0, 100]")));
    }
    let m = instance.num_platforms();
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut pos = vec![0usize; m];
    for (i, &p) in perm.iter().enumerate() {
        pos[p] = i;
    }

    let mut doc = instance.to_doc();
    doc.preferences = (0..instance.num_items())
        .map(|a| {
            let mut nb: Vec<usize> = instance.item_edges(a).iter().map(|&e| instance.edge(e).1).collect();
            nb.sort_by_key(|&p| pos[p]);
            nb
        })
        .collect();

    let mut fairness = Vec::new();
    for (a, prefs) in doc.preferences.iter().enumerate() {
        if prefs.is_empty() {
            continue;
        }
        // k -> largest lower bound requested for that prefix
        let mut by_k: BTreeMap<usize, f64> = BTreeMap::new();
        for &r in rank_percents {
            let top = ((m as f64) * r / 100.0).ceil() as usize;
            let k = prefs.iter().filter(|&&p| pos[p] < top).count().max(1);
            let l = r / 200.0;
            let e = by_k.entry(k).or_insert(l);
            *e = e.max(l);
        }
        fairness.extend(by_k.into_iter().map(|(k, lower)| {
            FairnessDoc::from_rank(RankConstraint {
                item: a,
                k,
                lower,
                upper: 1.0,
            })
        }));
    }
    doc.individual_fairness = fairness;
    doc.build()
}

/// Shape of a seeded random instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub items: usize,
    pub platforms: usize,
    pub groups: usize,
    /// Most groups any item joins; some item joins exactly this many.
    pub max_groups_per_item: usize,
    /// Neighbours per item (capped at the platform count).
    pub degree: usize,
    pub seed: u64,
}

/// Random bipartite graph with overlapping groups; no bounds are set.
pub fn synthetic(cfg: &SyntheticConfig) -> Result<Instance> {
    let SyntheticConfig {
        items: n,
        platforms: m,
        groups: chi,
        max_groups_per_item: delta,
        degree,
        seed,
    } = *cfg;
    if n == 0 || m == 0 || chi == 0 || delta == 0 || degree == 0 {
        return Err(Error::Input("synthetic instances need every size positive".into()));
    }
    if delta > chi {
        return Err(Error::Input(format!("cannot put an item in {delta} of {chi} groups")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let platforms: Vec<usize> = (0..m).collect();
    let group_ids: Vec<usize> = (0..chi).collect();
    let mut edges = Vec::new();
    let mut groups = vec![Vec::new(); chi];
    for a in 0..n {
        let mut nb: Vec<usize> = platforms.choose_multiple(&mut rng, degree.min(m)).copied().collect();
        nb.sort_unstable();
        edges.extend(nb.into_iter().map(|p| (a, p)));
        let count = if a == 0 { delta } else { rng.random_range(1..=delta) };
        for &h in group_ids.choose_multiple(&mut rng, count) {
            groups[h].push(a);
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    InstanceDoc::new(n, m, &edges, groups).with_default_preferences().build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::compute_stats;

    fn cols() -> ColumnMap {
        ColumnMap {
            item: "emp".into(),
            platform: "res".into(),
            group: "field".into(),
        }
    }

    #[test]
    fn duplicate_edge_collapses() {
        let csv = "emp,res,field\ne1,r1,f1\ne1,r1,f1\ne2,r1,f1\n";
        let inst = ingest_reader(csv.as_bytes(), &cols()).unwrap();
        assert_eq!(inst.num_edges(), 2);
    }

    #[test]
    fn repeated_rows_join_groups() {
        let csv = "emp,res,field\ne1,r1,f1\ne1,r2,f2\n";
        let inst = ingest_reader(csv.as_bytes(), &cols()).unwrap();
        assert_eq!(inst.item_groups(0), &[0, 1]);
        assert_eq!(compute_stats(&inst).delta, 2);
        assert_eq!(inst.platform_label(1), "r2");
    }

    #[test]
    fn null_groups_rejected() {
        let csv = "emp,res,field\ne1,r1,\ne2,r1,NULL\n";
        let err = ingest_reader(csv.as_bytes(), &cols()).unwrap_err();
        assert!(err.to_string().contains("empty groups"));
    }

    #[test]
    fn missing_column_rejected() {
        let err = ingest_reader("emp,res\ne1,r1\n".as_bytes(), &cols()).unwrap_err();
        assert!(err.to_string().contains("field"));
    }

    #[test]
    fn cap_arithmetic() {
        assert_eq!(uniform_cap(1, 1, 1).unwrap(), 1);
        assert_eq!(uniform_cap(100, 10, 5).unwrap(), 2);
        assert_eq!(uniform_cap(10, 10, 5).unwrap(), 1);
        assert!(uniform_cap(0, 1, 1).is_err());
    }

    #[test]
    fn generated_if_magnitudes() {
        let base = InstanceDoc::new(1, 4, &[(0, 0), (0, 1), (0, 2), (0, 3)], vec![vec![0]])
            .build()
            .unwrap();
        let inst = generate_if(&base, 7, &[25.0, 100.0]).unwrap();
        let rc = inst.rank_constraints();
        assert_eq!(rc.len(), 2);
        assert_eq!((rc[0].k, rc[0].lower), (1, 0.125));
        assert_eq!((rc[1].k, rc[1].lower), (4, 0.5));
        let other = generate_if(&base, 8, &[25.0, 100.0]).unwrap();
        assert_eq!(other.rank_constraints(), rc);
        assert!(generate_if(&base, 1, &[0.0]).is_err());
    }

    #[test]
    fn synthetic_has_requested_overlap() {
        let cfg = SyntheticConfig {
            items: 50,
            platforms: 5,
            groups: 4,
            max_groups_per_item: 3,
            degree: 2,
            seed: 3,
        };
        let inst = synthetic(&cfg).unwrap();
        assert_eq!(inst.num_edges(), 100);
        assert_eq!(compute_stats(&inst).delta, 3);
        assert_eq!(synthetic(&cfg).unwrap(), inst);
    }
}
