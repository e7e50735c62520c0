//! Capacity transfers between opening vectors and the steps that turn a
//! fractional opening into an integral one.
//!
//! A vector `y'` is an `r`-transfer of `y` when every set `A` of nodes
//! satisfies `L(y(A)) <= L(y'(N_r(A)))`, which by max-flow/min-cut is the
//! same as shipping the demand `L·y` from the supplies `L·y'` along pairs at
//! distance at most `r`. Vectors hold integer numerators over a shared
//! denominator so that every check is exact.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::transportation_feasible;
use crate::model::{facility_distance_matrix, GraphInstance};

/// Denominator used for snapped fractional openings.
pub const DEN: i64 = 1_000_000_000;

/// Longest backbone edge, in hops of the graph.
pub const BACKBONE_MAX_HOPS: u32 = 10;

/// Candidates tried by the widest tree-rounding search before giving up.
pub const WIDE_SEARCH_BUDGET: usize = 100_000;

const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferVector {
    pub num: Vec<i64>,
    pub den: i64,
}

impl TransferVector {
    pub fn new(num: Vec<i64>, den: i64) -> Self {
        assert!(den > 0, "denominator must be positive");
        TransferVector { num, den }
    }

    pub fn zeros(n: usize, den: i64) -> Self {
        TransferVector::new(vec![0; n], den)
    }

    pub fn len(&self) -> usize {
        self.num.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num.is_empty()
    }

    pub fn total(&self) -> i64 {
        self.num.iter().sum()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.num[i] as f64 / self.den as f64
    }

    pub fn is_integral(&self) -> bool {
        self.num.iter().all(|v| v % self.den == 0)
    }

    /// Integer multiplicities, when every entry is integral.
    pub fn units(&self) -> Option<Vec<u64>> {
        self.is_integral()
            .then(|| self.num.iter().map(|&v| (v / self.den) as u64).collect())
    }

    /// Mass that left some entry between `self` and `other`.
    pub fn moved_to(&self, other: &TransferVector) -> i64 {
        self.num
            .iter()
            .zip(&other.num)
            .map(|(a, b)| (a - b).max(0))
            .sum()
    }
}

/// Nodes with capacities and pairwise hop distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostMetric {
    pub caps: Vec<u64>,
    /// `u32::MAX` marks unreachable pairs.
    pub dist: Vec<Vec<u32>>,
}

/// Outcome of a transfer check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransferVerdict {
    Holds,
    /// The two vectors carry different total mass.
    SumMismatch,
    /// Some set of nodes cannot be covered within the distance.
    Shortfall,
}

impl TransferVerdict {
    pub fn reason(self) -> Option<&'static str> {
        match self {
            TransferVerdict::Holds => None,
            TransferVerdict::SumMismatch => Some("condition 1 violated"),
            TransferVerdict::Shortfall => Some("condition 2 violated"),
        }
    }
}

/// Exact check that `to` is an `r`-transfer of `from` on `host`.
pub fn verify_transfer(
    host: &HostMetric,
    from: &TransferVector,
    to: &TransferVector,
    r: u32,
) -> Result<bool> {
    Ok(check_transfer(host, from, to, r)? == TransferVerdict::Holds)
}

/// Like [`verify_transfer`], reporting which condition failed.
fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs().max(1)
}

pub fn check_transfer(
    host: &HostMetric,
    from: &TransferVector,
    to: &TransferVector,
    r: u32,
) -> Result<TransferVerdict> {
    let n = host.caps.len();
    if from.len() != n || to.len() != n {
        return Err(Error::stage(
            "transfer",
            format!(
                "vectors of length {}/{} on a host of {n}",
                from.len(),
                to.len()
            ),
        ));
    }
    if from.num.iter().chain(&to.num).any(|&v| v < 0) {
        return Err(Error::stage("transfer", "negative entry"));
    }
    let overflow = || Error::Flow(crate::error::FlowError::Overflow);
    let scale = |cap: u64, v: i64, other_den: i64| -> Result<i64> {
        i64::try_from(cap)
            .ok()
            .and_then(|c| c.checked_mul(v))
            .and_then(|x| x.checked_mul(other_den))
            .ok_or_else(overflow)
    };
    if from.total() as i128 * to.den as i128 != to.total() as i128 * from.den as i128 {
        return Ok(TransferVerdict::SumMismatch);
    }
    let mut demands = Vec::with_capacity(n);
    let mut supplies = Vec::with_capacity(n);
    let g = gcd(from.den, to.den);
    for i in 0..n {
        demands.push(scale(host.caps[i], from.num[i], to.den / g)?);
        supplies.push(scale(host.caps[i], to.num[i], from.den / g)?);
    }
    let mut arcs = Vec::new();
    for (s, &sup) in supplies.iter().enumerate() {
        if sup == 0 {
            continue;
        }
        for (d, &dem) in demands.iter().enumerate() {
            if dem > 0 && host.dist[s][d] <= r {
                arcs.push((s, d));
            }
        }
    }
    Ok(if transportation_feasible(&supplies, &demands, &arcs)? {
        TransferVerdict::Holds
    } else {
        TransferVerdict::Shortfall
    })
}

/// A spanning tree over the skeleton whose edges are shortest paths in the
/// graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackboneTree {
    /// Edges as `(parent position, child position, hops)` in skeleton order.
    pub edges: Vec<(usize, usize, u32)>,
}

/// Grows the backbone from the first skeleton member, each time attaching
/// the outside member closest to the tree (smallest indices on ties).
pub fn build_backbone_tree(fdist: &[Vec<u32>], skeleton: &[usize]) -> Result<BackboneTree> {
    let mut in_tree = vec![false; skeleton.len()];
    let mut edges = Vec::new();
    if skeleton.is_empty() {
        return Ok(BackboneTree { edges });
    }
    in_tree[0] = true;
    for _ in 1..skeleton.len() {
        let mut best: Option<(u32, usize, usize)> = None;
        for b in (0..skeleton.len()).filter(|&b| !in_tree[b]) {
            for a in (0..skeleton.len()).filter(|&a| in_tree[a]) {
                let cand = (fdist[skeleton[a]][skeleton[b]], skeleton[b], skeleton[a]);
                if best.is_none_or(|bst| cand < (bst.0, skeleton[bst.1], skeleton[bst.2])) {
                    best = Some((cand.0, b, a));
                }
            }
        }
        let (d, b, a) = best.expect("an outside member exists");
        if d > BACKBONE_MAX_HOPS {
            return Err(Error::stage(
                "backbone",
                format!(
                    "closest skeleton pair is {} hops apart",
                    if d == UNREACHABLE {
                        "infinitely many".into()
                    } else {
                        d.to_string()
                    }
                ),
            ));
        }
        in_tree[b] = true;
        edges.push((a, b, d));
    }
    Ok(BackboneTree { edges })
}

/// How skeleton members are represented in the rounding tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TreeKind {
    /// A co-located duplicate `s'` per member, with the capacity of the
    /// largest facility near `s`; that facility leaves the tree.
    Duplicates,
    /// The member itself is the hub.
    InPlace,
}

/// The tree `T'` over facilities and (possibly) skeleton duplicates.
///
/// Node indices: facilities `0..nf` of the component, then duplicates
/// `nf + i` for skeleton position `i` when the kind is
/// [`TreeKind::Duplicates`].
#[derive(Debug, Clone)]
pub struct RoundingTree {
    pub kind: TreeKind,
    pub skeleton: Vec<usize>,
    /// Facility whose capacity each hub carries.
    pub anchors: Vec<usize>,
    pub caps: Vec<u64>,
    pub in_tree: Vec<bool>,
    pub adj: Vec<Vec<usize>>,
    /// Skeleton position a leaf hangs from.
    pub attached_to: Vec<Option<usize>>,
    pub backbone: BackboneTree,
    nf: usize,
    fdist: Vec<Vec<u32>>,
}

impl RoundingTree {
    pub fn build(g: &GraphInstance, skeleton: &[usize], kind: TreeKind) -> Result<Self> {
        let nf = g.facility_count();
        let fdist = facility_distance_matrix(g);
        let backbone = build_backbone_tree(&fdist, skeleton)?;
        let fd = &fdist;
        let near = |s: usize| (0..nf).filter(move |&f| fd[s][f] <= 2);
        let anchors: Vec<usize> = match kind {
            TreeKind::InPlace => skeleton.to_vec(),
            TreeKind::Duplicates => skeleton
                .iter()
                .map(|&s| {
                    near(s)
                        .max_by_key(|&f| (g.cap(f), std::cmp::Reverse(f)))
                        .expect("s is near itself")
                })
                .collect(),
        };
        let n = match kind {
            TreeKind::InPlace => nf,
            TreeKind::Duplicates => nf + skeleton.len(),
        };
        let mut caps: Vec<u64> = g.caps().to_vec();
        let mut in_tree = vec![true; n];
        if kind == TreeKind::Duplicates {
            caps.extend(anchors.iter().map(|&m| g.cap(m)));
            for &m in &anchors {
                in_tree[m] = false;
            }
        }
        let mut tree = RoundingTree {
            kind,
            skeleton: skeleton.to_vec(),
            anchors,
            caps,
            in_tree,
            adj: vec![Vec::new(); n],
            attached_to: vec![None; n],
            backbone,
            nf,
            fdist,
        };
        for &(a, b, _) in &tree.backbone.edges.clone() {
            let (ha, hb) = (tree.hub(a), tree.hub(b));
            tree.adj[ha].push(hb);
            tree.adj[hb].push(ha);
        }
        let hubs: Vec<usize> = (0..skeleton.len()).map(|i| tree.hub(i)).collect();
        for v in 0..nf {
            if !tree.in_tree[v] || hubs.contains(&v) {
                continue;
            }
            let (d, i) = (0..skeleton.len())
                .map(|i| (tree.fdist[skeleton[i]][v], i))
                .min_by_key(|&(d, i)| (d, skeleton[i]))
                .ok_or_else(|| Error::stage("tree", "empty skeleton"))?;
            if d > 4 {
                return Err(Error::stage(
                    "tree",
                    format!(
                        "facility {} is {d} hops from the skeleton",
                        g.facility_id(v)
                    ),
                ));
            }
            let h = hubs[i];
            tree.adj[h].push(v);
            tree.adj[v].push(h);
            tree.attached_to[v] = Some(i);
        }
        Ok(tree)
    }

    pub fn node_count(&self) -> usize {
        self.caps.len()
    }

    pub fn facility_count(&self) -> usize {
        self.nf
    }

    /// Tree node standing for skeleton position `i`.
    pub fn hub(&self, i: usize) -> usize {
        match self.kind {
            TreeKind::InPlace => self.skeleton[i],
            TreeKind::Duplicates => self.nf + i,
        }
    }

    /// The facility a tree node is located at.
    pub fn base(&self, w: usize) -> usize {
        if w < self.nf {
            w
        } else {
            self.skeleton[w - self.nf]
        }
    }

    /// Facilities within two hops of skeleton position `i`.
    pub fn near(&self, i: usize) -> Vec<usize> {
        let s = self.skeleton[i];
        (0..self.nf).filter(|&f| self.fdist[s][f] <= 2).collect()
    }

    /// Hop metric of the graph extended to duplicates (co-located with their member).
    pub fn graph_host(&self) -> HostMetric {
        let n = self.node_count();
        let dist = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| self.fdist[self.base(a)][self.base(b)])
                    .collect()
            })
            .collect();
        HostMetric {
            caps: self.caps.clone(),
            dist,
        }
    }

    /// Hop metric of the tree itself. Nodes outside the tree are isolated.
    pub fn tree_host(&self) -> HostMetric {
        let n = self.node_count();
        let mut dist = vec![vec![UNREACHABLE; n]; n];
        for (s, row) in dist.iter_mut().enumerate() {
            row[s] = 0;
            if !self.in_tree[s] {
                continue;
            }
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for &w in &self.adj[v] {
                    if row[w] == UNREACHABLE {
                        row[w] = row[v] + 1;
                        q.push_back(w);
                    }
                }
            }
        }
        HostMetric {
            caps: self.caps.clone(),
            dist,
        }
    }

    /// Pads a facility vector with zeros for the duplicates.
    pub fn lift(&self, y: &[i64], den: i64) -> TransferVector {
        let mut num = y.to_vec();
        num.resize(self.node_count(), 0);
        TransferVector::new(num, den)
    }

    /// Leaves hanging from each skeleton position, largest capacity first.
    pub fn leaf_groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.skeleton.len()];
        for (v, a) in self.attached_to.iter().enumerate() {
            if let Some(i) = a {
                groups[*i].push(v);
            }
        }
        for g in &mut groups {
            g.sort_by_key(|&v| (std::cmp::Reverse(self.caps[v]), v));
        }
        groups
    }
}

/// Builds `T'` for `skeleton` in `g`; see [`RoundingTree::build`].
pub fn build_rounding_tree(
    g: &GraphInstance,
    skeleton: &[usize],
    kind: TreeKind,
) -> Result<RoundingTree> {
    RoundingTree::build(g, skeleton, kind)
}

/// Puts one full unit on every hub, drawing from the anchor first and then
/// from the rest of the near set by decreasing capacity.
pub fn gather_step(tree: &RoundingTree, y: &TransferVector) -> Result<TransferVector> {
    let mut out = y.clone();
    for i in 0..tree.skeleton.len() {
        let hub = tree.hub(i);
        let mut need = out.den - out.num[hub];
        let mut order: Vec<usize> = tree
            .near(i)
            .into_iter()
            .filter(|&u| u != hub && u != tree.anchors[i])
            .collect();
        order.sort_by_key(|&u| (std::cmp::Reverse(tree.caps[u]), u));
        if tree.anchors[i] != hub {
            order.insert(0, tree.anchors[i]);
        }
        for u in order {
            let take = need.min(out.num[u]);
            out.num[u] -= take;
            out.num[hub] += take;
            need -= take;
        }
        if need > 0 {
            return Err(Error::stage(
                "gather",
                format!("near set of position {i} holds less than one unit"),
            ));
        }
    }
    Ok(out)
}

/// Moves all mass of each near set onto its skeleton member.
pub fn gather_all(tree: &RoundingTree, y: &TransferVector) -> Result<TransferVector> {
    if tree.kind != TreeKind::InPlace {
        return Err(Error::stage(
            "gather",
            "gathering everything needs an in-place tree",
        ));
    }
    let mut out = y.clone();
    for i in 0..tree.skeleton.len() {
        let hub = tree.hub(i);
        for u in tree.near(i) {
            if u != hub {
                out.num[hub] += out.num[u];
                out.num[u] = 0;
            }
        }
        if out.num[hub] < out.den {
            return Err(Error::stage(
                "gather",
                format!("near set of position {i} holds less than one unit"),
            ));
        }
    }
    Ok(out)
}

/// Which candidate family produced the integral tree opening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TreeSearch {
    /// Groups rounded up in order of unserved capacity.
    Greedy,
    /// Some other choice of floor/ceiling per group.
    FloorCeil,
    /// Counts outside floor/ceiling were needed.
    Wide,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeOutcome {
    pub vector: TransferVector,
    pub search: TreeSearch,
    pub candidates_checked: usize,
}

/// Rounds a gathered vector on the tree to an integral one that is a
/// 2-transfer of it on the tree metric.
///
/// Hubs stay open. Leaves under one hub share their tree neighbourhood, so
/// only the number opened per group matters and the largest capacities are
/// taken. The count per group is searched among floor/ceiling of the group
/// mass (greedy first), then over all counts with the same total.
pub fn tree_transfer(tree: &RoundingTree, y: &TransferVector) -> Result<TreeOutcome> {
    let den = y.den;
    let hubs: Vec<usize> = (0..tree.skeleton.len()).map(|i| tree.hub(i)).collect();
    for (v, &val) in y.num.iter().enumerate() {
        if !tree.in_tree[v] && val != 0 {
            return Err(Error::stage("tree", "mass outside the tree"));
        }
        if val < 0 || val > den {
            return Err(Error::stage("tree", "entry outside [0, 1]"));
        }
    }
    if hubs.iter().any(|&h| y.num[h] != den) {
        return Err(Error::stage("tree", "hubs must hold exactly one unit"));
    }
    let groups = tree.leaf_groups();
    let mass: Vec<i64> = groups
        .iter()
        .map(|g| g.iter().map(|&v| y.num[v]).sum())
        .collect();
    let total: i64 = mass.iter().sum();
    if total % den != 0 {
        return Err(Error::stage("tree", "leaf mass is not integral"));
    }
    let m = (total / den) as usize;
    let floor: Vec<usize> = mass.iter().map(|&x| (x / den) as usize).collect();
    let fractional: Vec<usize> = (0..groups.len()).filter(|&g| mass[g] % den != 0).collect();
    let ups = m - floor.iter().sum::<usize>();

    let host = tree.tree_host();
    let mut checked = 0usize;
    let build = |counts: &[usize]| {
        let mut out = TransferVector::zeros(y.len(), den);
        for &h in &hubs {
            out.num[h] = den;
        }
        for (g, &c) in groups.iter().zip(counts) {
            for &v in &g[..c] {
                out.num[v] = den;
            }
        }
        out
    };
    let attempt = |counts: &[usize], checked: &mut usize| -> Result<Option<TransferVector>> {
        *checked += 1;
        let cand = build(counts);
        Ok(verify_transfer(&host, y, &cand, 2)?.then_some(cand))
    };

    // Greedy: round up the groups whose floor leaves the most capacity unserved.
    let residual = |g: usize| -> i128 {
        let want: i128 = groups[g]
            .iter()
            .map(|&v| tree.caps[v] as i128 * y.num[v] as i128)
            .sum();
        let have: i128 = groups[g][..floor[g]]
            .iter()
            .map(|&v| tree.caps[v] as i128 * den as i128)
            .sum();
        want - have
    };
    let mut by_need = fractional.clone();
    by_need.sort_by_key(|&g| {
        (
            std::cmp::Reverse(residual(g)),
            std::cmp::Reverse(mass[g] % den),
            g,
        )
    });
    let mut counts = floor.clone();
    for &g in &by_need[..ups] {
        counts[g] += 1;
    }
    if let Some(v) = attempt(&counts, &mut checked)? {
        return Ok(TreeOutcome {
            vector: v,
            search: TreeSearch::Greedy,
            candidates_checked: checked,
        });
    }

    let mut combo: Vec<usize> = (0..ups).collect();
    loop {
        let mut counts = floor.clone();
        for &c in &combo {
            counts[fractional[c]] += 1;
        }
        if let Some(v) = attempt(&counts, &mut checked)? {
            return Ok(TreeOutcome {
                vector: v,
                search: TreeSearch::FloorCeil,
                candidates_checked: checked,
            });
        }
        if !next_combination(&mut combo, fractional.len()) {
            break;
        }
    }

    let limits: Vec<usize> = groups.iter().map(Vec::len).collect();
    let mut counts = vec![0usize; groups.len()];
    let mut found = None;
    let mut wide_checked = 0usize;
    enumerate_counts(&limits, m, 0, &mut counts, &mut |c| {
        if wide_checked >= WIDE_SEARCH_BUDGET {
            return Ok(true);
        }
        wide_checked += 1;
        if let Some(v) = attempt(c, &mut checked)? {
            found = Some(v);
            return Ok(true);
        }
        Ok(false)
    })?;
    match found {
        Some(v) => Ok(TreeOutcome {
            vector: v,
            search: TreeSearch::Wide,
            candidates_checked: checked,
        }),
        None => Err(Error::stage(
            "tree",
            format!("no integral 2-transfer found after {checked} candidates"),
        )),
    }
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Visits every vector below `limits` summing to `left`; stops when `visit` returns true.
fn enumerate_counts<F>(
    limits: &[usize],
    left: usize,
    at: usize,
    counts: &mut Vec<usize>,
    visit: &mut F,
) -> Result<bool>
where
    F: FnMut(&[usize]) -> Result<bool>,
{
    if at == limits.len() {
        return if left == 0 { visit(counts) } else { Ok(false) };
    }
    let rest: usize = limits[at + 1..].iter().sum();
    let lo = left.saturating_sub(rest);
    for c in lo..=limits[at].min(left) {
        counts[at] = c;
        if enumerate_counts(limits, left - c, at + 1, counts, visit)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Sends each duplicate's opening back to its anchor facility.
pub fn finalize_transfer(tree: &RoundingTree, y: &TransferVector) -> TransferVector {
    let mut out = y.clone();
    if tree.kind == TreeKind::Duplicates {
        for (i, &m) in tree.anchors.iter().enumerate() {
            let h = tree.hub(i);
            out.num[m] += out.num[h];
            out.num[h] = 0;
        }
    }
    out
}

/// Rounds by subtree sums on the tree rooted at the first skeleton member,
/// moving each subtree's fractional excess one hop towards the root. Needs
/// equal capacities on all tree nodes; the result may open a node more than once.
pub fn push_to_root(tree: &RoundingTree, y: &TransferVector) -> Result<TransferVector> {
    if tree.kind != TreeKind::InPlace {
        return Err(Error::stage("push", "needs an in-place tree"));
    }
    let nodes: Vec<usize> = (0..tree.node_count())
        .filter(|&v| tree.in_tree[v])
        .collect();
    if let Some(&first) = nodes.first() {
        if nodes.iter().any(|&v| tree.caps[v] != tree.caps[first]) {
            return Err(Error::Variant {
                variant: "uniform-soft",
                reason: "tree capacities differ".into(),
            });
        }
    }
    let den = y.den;
    let root = tree.hub(0);
    let n = tree.node_count();
    let mut parent = vec![usize::MAX; n];
    let mut order = vec![root];
    parent[root] = root;
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        i += 1;
        for &w in &tree.adj[v] {
            if parent[w] == usize::MAX {
                parent[w] = v;
                order.push(w);
            }
        }
    }
    if y.num
        .iter()
        .enumerate()
        .any(|(v, &x)| x != 0 && parent[v] == usize::MAX)
    {
        return Err(Error::stage("push", "mass outside the rooted tree"));
    }
    let mut sub = y.num.clone();
    for &v in order.iter().rev() {
        if v != root {
            sub[parent[v]] += sub[v];
        }
    }
    if sub[root] % den != 0 {
        return Err(Error::stage("push", "total mass is not integral"));
    }
    let mut out = TransferVector::zeros(n, den);
    for &v in &order {
        let excess = sub[v] % den;
        if excess > y.num[v] {
            return Err(Error::stage(
                "push",
                "subtree excess exceeds the node's own mass",
            ));
        }
        let children: i64 = tree.adj[v]
            .iter()
            .filter(|&&w| w != root && parent[w] == v)
            .map(|&w| sub[w] / den)
            .sum();
        out.num[v] = (sub[v] / den - children) * den;
    }
    Ok(out)
}

/// The three rounding pipelines and their distance bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RoundingScheme {
    General,
    UniformHard,
    UniformSoft,
}

/// One planned step: hops on its own host, and how many graph hops one host hop may span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlannedStep {
    pub name: &'static str,
    pub host: &'static str,
    pub distance: u32,
    pub stretch: u32,
}

impl RoundingScheme {
    pub fn plan(self) -> Vec<PlannedStep> {
        let step = |name, host, distance, stretch| PlannedStep {
            name,
            host,
            distance,
            stretch,
        };
        match self {
            RoundingScheme::General => vec![
                step("gather", "graph", 2, 1),
                step("tree", "tree", 2, BACKBONE_MAX_HOPS),
                step("finalize", "graph", 2, 1),
            ],
            RoundingScheme::UniformHard => {
                vec![
                    step("gather", "graph", 2, 1),
                    step("tree", "tree", 2, BACKBONE_MAX_HOPS),
                ]
            }
            RoundingScheme::UniformSoft => {
                vec![
                    step("gather", "graph", 2, 1),
                    step("push", "tree", 1, BACKBONE_MAX_HOPS),
                ]
            }
        }
    }

    /// Graph hops covered by the whole chain.
    pub fn chain_total(self) -> u32 {
        self.plan().iter().map(|s| s.distance * s.stretch).sum()
    }

    /// Hop radius at which clients are matched: one more than the chain.
    pub fn match_radius(self) -> u32 {
        self.chain_total() + 1
    }

    pub fn tree_kind(self) -> TreeKind {
        match self {
            RoundingScheme::General => TreeKind::Duplicates,
            _ => TreeKind::InPlace,
        }
    }
}

/// A step as executed, with its checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStep {
    pub name: &'static str,
    pub host: &'static str,
    pub distance: u32,
    /// Transfer check on the step's own host.
    pub verified: bool,
    /// Transfer check of the same step in the graph at `distance · stretch`.
    pub verified_in_graph: bool,
    pub moved: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferChain {
    pub scheme: RoundingScheme,
    pub steps: Vec<ChainStep>,
    /// Check from the snapped opening straight to the final one at the chain total.
    pub composite_verified: bool,
    pub tree_search: Option<TreeSearch>,
    pub tree_candidates: usize,
}

impl TransferChain {
    pub fn total(&self) -> u32 {
        self.scheme.chain_total()
    }

    pub fn all_verified(&self) -> bool {
        self.composite_verified && self.steps.iter().all(|s| s.verified && s.verified_in_graph)
    }
}

/// Runs the full chain from a snapped opening over the component's facilities
/// and returns the integral multiplicities per facility.
pub fn run_chain(
    g: &GraphInstance,
    skeleton: &[usize],
    y: &[i64],
    den: i64,
    scheme: RoundingScheme,
) -> Result<(Vec<u64>, TransferChain)> {
    let tree = RoundingTree::build(g, skeleton, scheme.tree_kind())?;
    let graph_host = tree.graph_host();
    let tree_host = tree.tree_host();
    let start = tree.lift(y, den);
    let plan = scheme.plan();
    let mut steps = Vec::new();
    let mut record = |idx: usize, from: &TransferVector, to: &TransferVector| -> Result<()> {
        let p = plan[idx];
        let own = if p.host == "tree" {
            &tree_host
        } else {
            &graph_host
        };
        steps.push(ChainStep {
            name: p.name,
            host: p.host,
            distance: p.distance,
            verified: verify_transfer(own, from, to, p.distance)?,
            verified_in_graph: verify_transfer(&graph_host, from, to, p.distance * p.stretch)?,
            moved: from.moved_to(to),
        });
        Ok(())
    };
    let (last, search, candidates) = match scheme {
        RoundingScheme::General | RoundingScheme::UniformHard => {
            let gathered = gather_step(&tree, &start)?;
            record(0, &start, &gathered)?;
            let rounded = tree_transfer(&tree, &gathered)?;
            record(1, &gathered, &rounded.vector)?;
            let last = if scheme == RoundingScheme::General {
                let fin = finalize_transfer(&tree, &rounded.vector);
                record(2, &rounded.vector, &fin)?;
                fin
            } else {
                rounded.vector
            };
            (last, Some(rounded.search), rounded.candidates_checked)
        }
        RoundingScheme::UniformSoft => {
            let gathered = gather_all(&tree, &start)?;
            record(0, &start, &gathered)?;
            let pushed = push_to_root(&tree, &gathered)?;
            record(1, &gathered, &pushed)?;
            (pushed, None, 0)
        }
    };
    let composite_verified = verify_transfer(&graph_host, &start, &last, scheme.chain_total())?;
    let chain = TransferChain {
        scheme,
        steps,
        composite_verified,
        tree_search: search,
        tree_candidates: candidates,
    };
    if !chain.all_verified() {
        return Err(Error::stage(
            "transfer",
            format!("chain check failed: {chain:?}"),
        ));
    }
    let units = last
        .units()
        .ok_or_else(|| Error::stage("transfer", "final opening is fractional"))?;
    if units[g.facility_count()..].iter().any(|&u| u != 0) {
        return Err(Error::stage("transfer", "duplicate left open"));
    }
    Ok((units[..g.facility_count()].to_vec(), chain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_gap;
    use crate::relaxation::{snap_openings, ComponentRelaxation, LpOptions};
    use crate::skeleton::cap_truncate;
    use proptest::prelude::*;

    fn line_host(caps: &[u64]) -> HostMetric {
        let n = caps.len();
        HostMetric {
            caps: caps.to_vec(),
            dist: (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| (a as i64 - b as i64).unsigned_abs() as u32)
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn identity_is_a_zero_transfer() {
        let h = line_host(&[1, 2, 3]);
        let y = TransferVector::new(vec![1, 2, 0], 2);
        assert!(verify_transfer(&h, &y, &y, 0).unwrap());
    }

    #[test]
    fn moving_mass_needs_distance() {
        let h = line_host(&[1, 1, 1]);
        let from = TransferVector::new(vec![1, 0, 0], 1);
        let to = TransferVector::new(vec![0, 0, 1], 1);
        assert!(!verify_transfer(&h, &from, &to, 1).unwrap());
        assert!(verify_transfer(&h, &from, &to, 2).unwrap());
    }

    #[test]
    fn capacity_weights_matter() {
        // Equal totals, but a unit at capacity 2 cannot cover a unit at capacity 4.
        let h = line_host(&[2, 4]);
        let small = TransferVector::new(vec![1, 0], 1);
        let large = TransferVector::new(vec![0, 1], 1);
        assert!(verify_transfer(&h, &small, &large, 1).unwrap());
        assert!(!verify_transfer(&h, &large, &small, 1).unwrap());
        let half = TransferVector::new(vec![1, 0], 2);
        assert_eq!(
            check_transfer(&h, &half, &large, 1).unwrap(),
            TransferVerdict::SumMismatch
        );
    }

    #[test]
    fn mismatched_denominators_compare_exactly() {
        let h = line_host(&[3]);
        assert!(verify_transfer(
            &h,
            &TransferVector::new(vec![1], 3),
            &TransferVector::new(vec![1], 3),
            0
        )
        .unwrap());
        assert!(verify_transfer(
            &h,
            &TransferVector::new(vec![2], 6),
            &TransferVector::new(vec![1], 3),
            0
        )
        .unwrap());
        assert!(!verify_transfer(
            &h,
            &TransferVector::new(vec![3], 6),
            &TransferVector::new(vec![1], 3),
            0
        )
        .unwrap());
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen.last().unwrap(), &vec![2, 3]);
    }

    #[test]
    fn backbone_rejects_far_members() {
        let fdist = vec![vec![0, 12], vec![12, 0]];
        assert!(build_backbone_tree(&fdist, &[0, 1]).is_err());
        let ok = build_backbone_tree(&[vec![0, 8], vec![8, 0]], &[0, 1]).unwrap();
        assert_eq!(ok.edges, vec![(0, 1, 8)]);
    }

    #[test]
    fn scheme_totals() {
        assert_eq!(RoundingScheme::General.chain_total(), 24);
        assert_eq!(RoundingScheme::UniformHard.chain_total(), 22);
        assert_eq!(RoundingScheme::UniformSoft.chain_total(), 12);
        assert_eq!(RoundingScheme::General.match_radius(), 25);
        assert_eq!(RoundingScheme::UniformHard.match_radius(), 23);
        assert_eq!(RoundingScheme::UniformSoft.match_radius(), 13);
    }

    fn gap_opening() -> (GraphInstance, Vec<usize>, Vec<i64>) {
        let gap = gen_gap(2).unwrap();
        let g = cap_truncate(&gap.graph);
        let mut rel = ComponentRelaxation::new(&g, &gap.skeleton, LpOptions::default());
        let pt = rel.point(3, 48).unwrap();
        let near: Vec<Vec<usize>> = gap
            .skeleton
            .iter()
            .map(|&s| crate::relaxation::near_set(&g, s))
            .collect();
        let y = snap_openings(&pt.y, &near, 3, DEN, true).unwrap();
        (g, gap.skeleton.clone(), y)
    }

    #[test]
    fn gap_chain_general() {
        let (g, s, y) = gap_opening();
        let (units, chain) = run_chain(&g, &s, &y, DEN, RoundingScheme::General).unwrap();
        assert_eq!(units.iter().sum::<u64>(), 3);
        assert!(units.iter().all(|&u| u <= 1));
        assert!(chain.all_verified());
        assert_eq!(chain.steps.len(), 3);
    }

    #[test]
    fn gap_chain_uniform() {
        let gap = gen_gap(2).unwrap();
        let (_, s, y) = gap_opening();
        let (units, chain) =
            run_chain(&gap.graph, &s, &y, DEN, RoundingScheme::UniformHard).unwrap();
        assert_eq!(units.iter().sum::<u64>(), 3);
        assert_eq!(chain.total(), 22);
        let (units, _) = run_chain(&gap.graph, &s, &y, DEN, RoundingScheme::UniformSoft).unwrap();
        assert_eq!(units.iter().sum::<u64>(), 3);
    }

    #[test]
    fn duplicates_take_the_anchor_capacity() {
        let (g, s, _) = gap_opening();
        let t = RoundingTree::build(&g, &s, TreeKind::Duplicates).unwrap();
        assert_eq!(t.node_count(), g.facility_count() + 2);
        for (i, &m) in t.anchors.iter().enumerate() {
            assert_eq!(t.caps[t.hub(i)], g.cap(m));
            assert!(!t.in_tree[m]);
            assert_eq!(t.graph_host().dist[t.hub(i)][s[i]], 0);
        }
    }

    #[test]
    fn push_conserves_integral_total() {
        let (_, s, y) = gap_opening();
        let gap = gen_gap(2).unwrap();
        let t = RoundingTree::build(&gap.graph, &s, TreeKind::InPlace).unwrap();
        let gathered = gather_all(&t, &t.lift(&y, DEN)).unwrap();
        let pushed = push_to_root(&t, &gathered).unwrap();
        assert!(pushed.is_integral());
        assert_eq!(pushed.total(), gathered.total());
        assert!(verify_transfer(&t.tree_host(), &gathered, &pushed, 1).unwrap());
    }

    proptest! {
        #[test]
        fn transfer_is_transitive_on_a_line(
            caps in proptest::collection::vec(1u64..4, 4),
            a in proptest::collection::vec(0i64..3, 4),
            b in proptest::collection::vec(0i64..3, 4),
            c in proptest::collection::vec(0i64..3, 4),
        ) {
            let h = line_host(&caps);
            let (a, b, c) = (TransferVector::new(a, 2), TransferVector::new(b, 2), TransferVector::new(c, 2));
            if verify_transfer(&h, &a, &b, 1).unwrap() && verify_transfer(&h, &b, &c, 1).unwrap() {
                prop_assert!(verify_transfer(&h, &a, &c, 2).unwrap());
            }
            // Monotone in the radius.
            if verify_transfer(&h, &a, &b, 1).unwrap() {
                prop_assert!(verify_transfer(&h, &a, &b, 2).unwrap());
            }
        }
    }
}
