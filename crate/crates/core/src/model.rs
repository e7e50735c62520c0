//! Instances, solutions and the checks shared by every other module.
//!
//! A [`MetricInstance`] stores its points sorted by id, so every dense index
//! handed out by this crate is reproducible from the ids alone. Clients and
//! facilities are lists of indices into that point set; in center mode both
//! lists cover every point.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Supplier,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CapacityMode {
    #[default]
    Hard,
    Soft,
}

/// A capacitated k-supplier (or k-center) instance with outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricInstance {
    pub mode: Mode,
    pub capacity_mode: CapacityMode,
    pub k: usize,
    pub p: usize,
    points: Vec<String>,
    clients: Vec<usize>,
    facilities: Vec<usize>,
    caps: Vec<u64>,
    dist: Vec<f64>,
    /// Client-facility edges when the metric came from an unweighted graph.
    graph_edges: Option<Vec<(usize, usize)>>,
}

/// Raw parts of an instance before index assignment.
#[derive(Debug, Clone, Default)]
pub struct InstanceParts {
    pub mode: Mode,
    pub capacity_mode: CapacityMode,
    pub k: usize,
    pub p: usize,
    pub clients: Vec<String>,
    pub facilities: Vec<(String, u64)>,
    pub metric: MetricParts,
}

#[derive(Debug, Clone)]
pub enum MetricParts {
    Matrix {
        order: Vec<String>,
        values: Vec<Vec<f64>>,
    },
    Graph {
        edges: Vec<(String, String)>,
    },
}

impl Default for MetricParts {
    fn default() -> Self {
        MetricParts::Graph { edges: Vec::new() }
    }
}

impl MetricInstance {
    pub fn new(parts: InstanceParts) -> Result<Self, ModelError> {
        let InstanceParts {
            mode,
            capacity_mode,
            k,
            p,
            mut clients,
            facilities,
            metric,
        } = parts;
        let mut fac_caps: BTreeMap<String, u64> = BTreeMap::new();
        for (id, cap) in &facilities {
            if fac_caps.insert(id.clone(), *cap).is_some() {
                return Err(ModelError::DuplicateId(id.clone()));
            }
        }
        if mode == Mode::Center {
            // Every point is a client and a facility.
            let fac_ids: BTreeSet<&String> = fac_caps.keys().collect();
            if clients.is_empty() {
                clients = fac_caps.keys().cloned().collect();
            } else {
                let cl: BTreeSet<&String> = clients.iter().collect();
                if cl != fac_ids {
                    return Err(ModelError::CenterMismatch);
                }
            }
        }
        let mut seen = BTreeSet::new();
        for c in &clients {
            if !seen.insert(c.clone()) {
                return Err(ModelError::DuplicateId(c.clone()));
            }
        }
        let point_set: BTreeSet<String> = clients
            .iter()
            .cloned()
            .chain(fac_caps.keys().cloned())
            .collect();
        let points: Vec<String> = point_set.into_iter().collect();
        let index: BTreeMap<&str, usize> = points
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut client_idx: Vec<usize> = clients.iter().map(|c| index[c.as_str()]).collect();
        client_idx.sort_unstable();
        let facility_idx: Vec<usize> = fac_caps.keys().map(|f| index[f.as_str()]).collect();
        let caps: Vec<u64> = fac_caps.values().copied().collect();
        let n = points.len();

        let (dist, graph_edges) = match metric {
            MetricParts::Matrix { order, values } => {
                if order.len() != n || values.len() != n || values.iter().any(|r| r.len() != n) {
                    return Err(ModelError::MatrixShape { expected: n });
                }
                let mut pos = Vec::with_capacity(n);
                for id in &order {
                    match index.get(id.as_str()) {
                        Some(&i) => pos.push(i),
                        None => return Err(ModelError::UnknownId(id.clone())),
                    }
                }
                let distinct: BTreeSet<usize> = pos.iter().copied().collect();
                if distinct.len() != n {
                    return Err(ModelError::MatrixShape { expected: n });
                }
                let mut dist = vec![0.0; n * n];
                for (a, row) in values.iter().enumerate() {
                    for (b, &v) in row.iter().enumerate() {
                        if v.is_nan() {
                            return Err(ModelError::BadDistance(
                                order[a].clone(),
                                order[b].clone(),
                            ));
                        }
                        dist[pos[a] * n + pos[b]] = v;
                    }
                }
                (dist, None)
            }
            MetricParts::Graph { edges } => {
                let client_set: BTreeSet<usize> = client_idx.iter().copied().collect();
                let fac_set: BTreeSet<usize> = facility_idx.iter().copied().collect();
                let mut adj = vec![Vec::new(); n];
                let mut edge_list = Vec::with_capacity(edges.len());
                for (c, f) in &edges {
                    let ci = *index
                        .get(c.as_str())
                        .ok_or_else(|| ModelError::UnknownId(c.clone()))?;
                    let fi = *index
                        .get(f.as_str())
                        .ok_or_else(|| ModelError::UnknownId(f.clone()))?;
                    if !client_set.contains(&ci) || !fac_set.contains(&fi) {
                        return Err(ModelError::NotBipartite(c.clone(), f.clone()));
                    }
                    adj[ci].push(fi);
                    adj[fi].push(ci);
                    edge_list.push((ci, fi));
                }
                edge_list.sort_unstable();
                edge_list.dedup();
                let mut dist = vec![f64::INFINITY; n * n];
                for s in 0..n {
                    let mut q = VecDeque::from([s]);
                    dist[s * n + s] = 0.0;
                    while let Some(v) = q.pop_front() {
                        let dv = dist[s * n + v];
                        for &w in &adj[v] {
                            if dist[s * n + w].is_infinite() {
                                dist[s * n + w] = dv + 1.0;
                                q.push_back(w);
                            }
                        }
                    }
                }
                (dist, Some(edge_list))
            }
        };

        if p > client_idx.len() {
            return Err(ModelError::OutliersOutOfRange {
                p,
                clients: client_idx.len(),
            });
        }
        let k_limit = match capacity_mode {
            CapacityMode::Hard => facility_idx.len(),
            CapacityMode::Soft => client_idx.len() + facility_idx.len(),
        };
        if k > k_limit {
            return Err(ModelError::TooManyFacilities { k, limit: k_limit });
        }
        Ok(MetricInstance {
            mode,
            capacity_mode,
            k,
            p,
            points,
            clients: client_idx,
            facilities: facility_idx,
            caps,
            dist,
            graph_edges,
        })
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn point_id(&self, a: usize) -> &str {
        &self.points[a]
    }

    pub fn point_index(&self, id: &str) -> Option<usize> {
        self.points.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }

    pub fn point_dist(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.points.len() + b]
    }

    pub fn client_count(&self) -> usize {
        self.clients.len()
    }

    pub fn facility_count(&self) -> usize {
        self.facilities.len()
    }

    /// Point index of the `i`-th client.
    pub fn client_point(&self, i: usize) -> usize {
        self.clients[i]
    }

    pub fn facility_point(&self, j: usize) -> usize {
        self.facilities[j]
    }

    pub fn client_id(&self, i: usize) -> &str {
        &self.points[self.clients[i]]
    }

    pub fn facility_id(&self, j: usize) -> &str {
        &self.points[self.facilities[j]]
    }

    pub fn client_index(&self, id: &str) -> Option<usize> {
        let pt = self.point_index(id)?;
        self.clients.binary_search(&pt).ok()
    }

    pub fn facility_index(&self, id: &str) -> Option<usize> {
        let pt = self.point_index(id)?;
        self.facilities.binary_search(&pt).ok()
    }

    pub fn cap(&self, j: usize) -> u64 {
        self.caps[j]
    }

    pub fn caps(&self) -> &[u64] {
        &self.caps
    }

    /// Distance between client `i` and facility `j`.
    pub fn cf_dist(&self, i: usize, j: usize) -> f64 {
        self.point_dist(self.clients[i], self.facilities[j])
    }

    /// `Some(L)` when every facility has the same capacity.
    pub fn uniform_capacity(&self) -> Option<u64> {
        let first = *self.caps.first()?;
        self.caps.iter().all(|&c| c == first).then_some(first)
    }

    /// True when the metric is the hop metric of an unweighted bipartite graph.
    pub fn is_graphic(&self) -> bool {
        self.graph_edges.is_some()
    }

    /// Client-facility edges as (point, point) pairs, for graphic instances.
    pub fn graph_edges(&self) -> Option<&[(usize, usize)]> {
        self.graph_edges.as_deref()
    }

    pub fn with_counts(&self, k: usize, p: usize) -> Result<Self, ModelError> {
        let mut parts = self.to_parts();
        parts.k = k;
        parts.p = p;
        MetricInstance::new(parts)
    }

    pub fn to_parts(&self) -> InstanceParts {
        let metric = match &self.graph_edges {
            Some(edges) => MetricParts::Graph {
                edges: edges
                    .iter()
                    .map(|&(c, f)| (self.points[c].clone(), self.points[f].clone()))
                    .collect(),
            },
            None => {
                let n = self.points.len();
                MetricParts::Matrix {
                    order: self.points.clone(),
                    values: (0..n)
                        .map(|a| (0..n).map(|b| self.point_dist(a, b)).collect())
                        .collect(),
                }
            }
        };
        InstanceParts {
            mode: self.mode,
            capacity_mode: self.capacity_mode,
            k: self.k,
            p: self.p,
            clients: (0..self.client_count())
                .map(|i| self.client_id(i).to_owned())
                .collect(),
            facilities: (0..self.facility_count())
                .map(|j| (self.facility_id(j).to_owned(), self.caps[j]))
                .collect(),
            metric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricViolation {
    NonzeroDiagonal {
        a: String,
        value: f64,
    },
    Negative {
        a: String,
        b: String,
        value: f64,
    },
    Asymmetric {
        a: String,
        b: String,
        ab: f64,
        ba: f64,
    },
    Triangle {
        a: String,
        b: String,
        c: String,
        ac: f64,
        ab_bc: f64,
    },
    UnequalCapacities,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<MetricViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks range, symmetry and the triangle inequality over every triple.
pub fn validate_metric(inst: &MetricInstance) -> ValidationReport {
    let n = inst.point_count();
    let mut violations = Vec::new();
    for a in 0..n {
        let daa = inst.point_dist(a, a);
        if daa != 0.0 {
            violations.push(MetricViolation::NonzeroDiagonal {
                a: inst.point_id(a).into(),
                value: daa,
            });
        }
        for b in 0..n {
            let ab = inst.point_dist(a, b);
            if ab < 0.0 {
                violations.push(MetricViolation::Negative {
                    a: inst.point_id(a).into(),
                    b: inst.point_id(b).into(),
                    value: ab,
                });
            }
            if a < b {
                let ba = inst.point_dist(b, a);
                if ab != ba {
                    violations.push(MetricViolation::Asymmetric {
                        a: inst.point_id(a).into(),
                        b: inst.point_id(b).into(),
                        ab,
                        ba,
                    });
                }
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            let ab = inst.point_dist(a, b);
            if ab.is_infinite() {
                continue;
            }
            for c in 0..n {
                let ac = inst.point_dist(a, c);
                let bc = inst.point_dist(b, c);
                if ac > ab + bc {
                    violations.push(MetricViolation::Triangle {
                        a: inst.point_id(a).into(),
                        b: inst.point_id(b).into(),
                        c: inst.point_id(c).into(),
                        ac,
                        ab_bc: ab + bc,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// A vertex of a bipartite [`GraphInstance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Client(usize),
    Facility(usize),
}

/// The unweighted bipartite form of the problem, where a distance-1 solution
/// serves every client from an adjacent facility.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInstance {
    client_ids: Vec<String>,
    facility_ids: Vec<String>,
    caps: Vec<u64>,
    client_adj: Vec<Vec<usize>>,
    facility_adj: Vec<Vec<usize>>,
    pub k: usize,
    pub p: usize,
    pub soft: bool,
}

impl GraphInstance {
    /// Builds a graph; ids must be sorted within each side.
    pub fn new(
        client_ids: Vec<String>,
        facilities: Vec<(String, u64)>,
        edges: &[(usize, usize)],
        k: usize,
        p: usize,
    ) -> Result<Self, ModelError> {
        let nc = client_ids.len();
        let nf = facilities.len();
        let mut client_adj = vec![Vec::new(); nc];
        let mut facility_adj = vec![Vec::new(); nf];
        for &(c, f) in edges {
            if c >= nc || f >= nf {
                return Err(ModelError::EdgeOutOfRange(c, f));
            }
            client_adj[c].push(f);
            facility_adj[f].push(c);
        }
        for l in client_adj.iter_mut().chain(facility_adj.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        let (facility_ids, caps) = facilities.into_iter().unzip();
        Ok(GraphInstance {
            client_ids,
            facility_ids,
            caps,
            client_adj,
            facility_adj,
            k,
            p,
            soft: false,
        })
    }

    pub fn client_count(&self) -> usize {
        self.client_ids.len()
    }

    pub fn facility_count(&self) -> usize {
        self.facility_ids.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.client_ids.len() + self.facility_ids.len()
    }

    pub fn client_id(&self, i: usize) -> &str {
        &self.client_ids[i]
    }

    pub fn facility_id(&self, j: usize) -> &str {
        &self.facility_ids[j]
    }

    pub fn vertex_id(&self, v: Vertex) -> &str {
        match v {
            Vertex::Client(i) => &self.client_ids[i],
            Vertex::Facility(j) => &self.facility_ids[j],
        }
    }

    pub fn client_index(&self, id: &str) -> Option<usize> {
        self.client_ids.iter().position(|c| c == id)
    }

    pub fn facility_index(&self, id: &str) -> Option<usize> {
        self.facility_ids.iter().position(|f| f == id)
    }

    pub fn cap(&self, j: usize) -> u64 {
        self.caps[j]
    }

    pub fn caps(&self) -> &[u64] {
        &self.caps
    }

    pub fn set_caps(&mut self, caps: Vec<u64>) {
        assert_eq!(caps.len(), self.caps.len());
        self.caps = caps;
    }

    pub fn facility_neighbors(&self, j: usize) -> &[usize] {
        &self.facility_adj[j]
    }

    pub fn client_neighbors(&self, i: usize) -> &[usize] {
        &self.client_adj[i]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.facility_adj[j].len()
    }

    pub fn edge_count(&self) -> usize {
        self.facility_adj.iter().map(Vec::len).sum()
    }

    /// Edges as (client, facility), ordered by facility then client.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.facility_adj
            .iter()
            .enumerate()
            .flat_map(|(f, cs)| cs.iter().map(move |&c| (c, f)))
    }

    pub fn has_edge(&self, c: usize, f: usize) -> bool {
        self.facility_adj[f].binary_search(&c).is_ok()
    }

    /// Dense index: clients first, then facilities.
    pub fn vertex_index(&self, v: Vertex) -> usize {
        match v {
            Vertex::Client(i) => i,
            Vertex::Facility(j) => self.client_ids.len() + j,
        }
    }

    pub fn vertex_at(&self, idx: usize) -> Vertex {
        if idx < self.client_ids.len() {
            Vertex::Client(idx)
        } else {
            Vertex::Facility(idx - self.client_ids.len())
        }
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        let (cs, fs): (&[usize], &[usize]) = match v {
            Vertex::Client(i) => (&[], &self.client_adj[i]),
            Vertex::Facility(j) => (&self.facility_adj[j], &[]),
        };
        cs.iter()
            .map(|&c| Vertex::Client(c))
            .chain(fs.iter().map(|&f| Vertex::Facility(f)))
    }

    /// Subgraph induced by the given (sorted) client and facility indices.
    pub fn induced(&self, clients: &[usize], facilities: &[usize]) -> (GraphInstance, VertexMap) {
        let mut cpos = vec![usize::MAX; self.client_count()];
        for (new, &old) in clients.iter().enumerate() {
            cpos[old] = new;
        }
        let mut edges = Vec::new();
        for (nf, &f) in facilities.iter().enumerate() {
            for &c in &self.facility_adj[f] {
                if cpos[c] != usize::MAX {
                    edges.push((cpos[c], nf));
                }
            }
        }
        let g = GraphInstance::new(
            clients
                .iter()
                .map(|&c| self.client_ids[c].clone())
                .collect(),
            facilities
                .iter()
                .map(|&f| (self.facility_ids[f].clone(), self.caps[f]))
                .collect(),
            &edges,
            self.k,
            self.p,
        )
        .expect("induced edges are in range");
        let map = VertexMap {
            clients: clients.to_vec(),
            facilities: facilities.to_vec(),
        };
        (
            GraphInstance {
                soft: self.soft,
                ..g
            },
            map,
        )
    }
}

/// Maps local indices of an induced subgraph back to its parent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VertexMap {
    pub clients: Vec<usize>,
    pub facilities: Vec<usize>,
}

/// Hop distances from a set of sources; `None` is unreachable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMap {
    nc: usize,
    dist: Vec<Option<u32>>,
}

impl DistanceMap {
    pub fn get(&self, v: Vertex) -> Option<u32> {
        match v {
            Vertex::Client(i) => self.dist[i],
            Vertex::Facility(j) => self.dist[self.nc + j],
        }
    }

    pub fn client(&self, i: usize) -> Option<u32> {
        self.dist[i]
    }

    pub fn facility(&self, j: usize) -> Option<u32> {
        self.dist[self.nc + j]
    }

    /// True when `v` is within `r` hops of the sources.
    pub fn within(&self, v: Vertex, r: u32) -> bool {
        self.get(v).is_some_and(|d| d <= r)
    }
}

/// Multi-source breadth-first search over the bipartite graph.
pub fn multi_source_distances(g: &GraphInstance, sources: &[Vertex]) -> DistanceMap {
    let nc = g.client_count();
    let mut dist = vec![None; g.vertex_count()];
    let mut queue = VecDeque::new();
    for &s in sources {
        let idx = g.vertex_index(s);
        if dist[idx].is_none() {
            dist[idx] = Some(0);
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        let dv = dist[g.vertex_index(v)].unwrap();
        for w in g.neighbors(v) {
            let wi = g.vertex_index(w);
            if dist[wi].is_none() {
                dist[wi] = Some(dv + 1);
                queue.push_back(w);
            }
        }
    }
    DistanceMap { nc, dist }
}

/// Facility-to-facility hop distances (`u32::MAX` when unreachable).
pub fn facility_distance_matrix(g: &GraphInstance) -> Vec<Vec<u32>> {
    (0..g.facility_count())
        .map(|j| {
            let dm = multi_source_distances(g, &[Vertex::Facility(j)]);
            (0..g.facility_count())
                .map(|f| dm.facility(f).unwrap_or(u32::MAX))
                .collect()
        })
        .collect()
}

/// A feasible assignment: `open` maps facility ids to multiplicities and
/// `assign` maps each served client to its facility.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Solution {
    pub radius: f64,
    pub open: BTreeMap<String, u64>,
    pub assign: BTreeMap<String, String>,
}

impl Solution {
    pub fn served(&self) -> impl Iterator<Item = &str> {
        self.assign.keys().map(String::as_str)
    }

    pub fn open_count(&self) -> u64 {
        self.open.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionViolation {
    UnknownClient {
        id: String,
    },
    UnknownFacility {
        id: String,
    },
    ServedCount {
        served: usize,
        p: usize,
    },
    OpenCount {
        open: u64,
        k: usize,
    },
    Multiplicity {
        id: String,
        mult: u64,
    },
    NotOpen {
        client: String,
        facility: String,
    },
    Capacity {
        facility: String,
        load: u64,
        capacity: u64,
    },
    Distance {
        client: String,
        facility: String,
        distance: f64,
        bound: f64,
    },
    RadiusMismatch {
        claimed: f64,
        actual: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub violations: Vec<SolutionViolation>,
    /// Largest client-facility distance actually used.
    pub actual_radius: f64,
}

impl VerifyReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for SolutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::to_string(self).unwrap_or_default())
    }
}

/// Anything a [`Solution`] can be checked against.
pub trait SolutionHost {
    fn client_lookup(&self, id: &str) -> Option<usize>;
    fn facility_lookup(&self, id: &str) -> Option<usize>;
    fn capacity(&self, j: usize) -> u64;
    fn required_k(&self) -> usize;
    fn required_p(&self) -> usize;
    fn allows_multiplicity(&self) -> bool;
    /// Distance from client `i` to facility `j`, computed lazily per facility.
    fn distances_from_facility(&self, j: usize) -> Vec<f64>;
}

impl SolutionHost for MetricInstance {
    fn client_lookup(&self, id: &str) -> Option<usize> {
        self.client_index(id)
    }
    fn facility_lookup(&self, id: &str) -> Option<usize> {
        self.facility_index(id)
    }
    fn capacity(&self, j: usize) -> u64 {
        self.cap(j)
    }
    fn required_k(&self) -> usize {
        self.k
    }
    fn required_p(&self) -> usize {
        self.p
    }
    fn allows_multiplicity(&self) -> bool {
        self.capacity_mode == CapacityMode::Soft
    }
    fn distances_from_facility(&self, j: usize) -> Vec<f64> {
        (0..self.client_count())
            .map(|i| self.cf_dist(i, j))
            .collect()
    }
}

impl SolutionHost for GraphInstance {
    fn client_lookup(&self, id: &str) -> Option<usize> {
        self.client_index(id)
    }
    fn facility_lookup(&self, id: &str) -> Option<usize> {
        self.facility_index(id)
    }
    fn capacity(&self, j: usize) -> u64 {
        self.cap(j)
    }
    fn required_k(&self) -> usize {
        self.k
    }
    fn required_p(&self) -> usize {
        self.p
    }
    fn allows_multiplicity(&self) -> bool {
        self.soft
    }
    fn distances_from_facility(&self, j: usize) -> Vec<f64> {
        let dm = multi_source_distances(self, &[Vertex::Facility(j)]);
        (0..self.client_count())
            .map(|i| dm.client(i).map_or(f64::INFINITY, f64::from))
            .collect()
    }
}

/// Checks every solution invariant and that all assignments lie within `r`.
pub fn verify_solution<H: SolutionHost + ?Sized>(host: &H, sol: &Solution, r: f64) -> VerifyReport {
    let mut violations = Vec::new();
    let mut open_idx = BTreeMap::new();
    for (id, &mult) in &sol.open {
        match host.facility_lookup(id) {
            Some(j) => {
                if mult > 1 && !host.allows_multiplicity() {
                    violations.push(SolutionViolation::Multiplicity {
                        id: id.clone(),
                        mult,
                    });
                }
                if mult > 0 {
                    open_idx.insert(id.as_str(), (j, mult));
                }
            }
            None => violations.push(SolutionViolation::UnknownFacility { id: id.clone() }),
        }
    }
    let open_total = sol.open_count();
    if open_total != host.required_k() as u64 {
        violations.push(SolutionViolation::OpenCount {
            open: open_total,
            k: host.required_k(),
        });
    }
    if sol.assign.len() != host.required_p() {
        violations.push(SolutionViolation::ServedCount {
            served: sol.assign.len(),
            p: host.required_p(),
        });
    }
    let mut load: BTreeMap<&str, u64> = BTreeMap::new();
    let mut dist_cache: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut actual = 0.0f64;
    for (c, f) in &sol.assign {
        let Some(ci) = host.client_lookup(c) else {
            violations.push(SolutionViolation::UnknownClient { id: c.clone() });
            continue;
        };
        let Some(&(fj, _)) = open_idx.get(f.as_str()) else {
            if host.facility_lookup(f).is_none() {
                violations.push(SolutionViolation::UnknownFacility { id: f.clone() });
            } else {
                violations.push(SolutionViolation::NotOpen {
                    client: c.clone(),
                    facility: f.clone(),
                });
            }
            continue;
        };
        *load.entry(f.as_str()).or_default() += 1;
        let d = dist_cache
            .entry(fj)
            .or_insert_with(|| host.distances_from_facility(fj))[ci];
        actual = actual.max(d);
        if d > r {
            violations.push(SolutionViolation::Distance {
                client: c.clone(),
                facility: f.clone(),
                distance: d,
                bound: r,
            });
        }
    }
    for (f, l) in load {
        let (j, mult) = open_idx[f];
        let capacity = host.capacity(j).saturating_mul(mult);
        if l > capacity {
            violations.push(SolutionViolation::Capacity {
                facility: f.to_owned(),
                load: l,
                capacity,
            });
        }
    }
    if sol.radius != actual {
        violations.push(SolutionViolation::RadiusMismatch {
            claimed: sol.radius,
            actual,
        });
    }
    VerifyReport {
        violations,
        actual_radius: actual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(ids: &[&str], values: Vec<Vec<f64>>) -> MetricParts {
        MetricParts::Matrix {
            order: ids.iter().map(|s| s.to_string()).collect(),
            values,
        }
    }

    fn single_pair(cap: u64, d: f64) -> MetricInstance {
        MetricInstance::new(InstanceParts {
            k: 1,
            p: 1,
            clients: vec!["c".into()],
            facilities: vec![("f".into(), cap)],
            metric: matrix(&["c", "f"], vec![vec![0.0, d], vec![d, 0.0]]),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn two_point_metric_is_valid() {
        assert!(validate_metric(&single_pair(1, 3.0)).is_valid());
    }

    #[test]
    fn triangle_violation_is_reported() {
        let inst = MetricInstance::new(InstanceParts {
            clients: vec!["a".into(), "c".into()],
            facilities: vec![("b".into(), 1)],
            metric: matrix(
                &["a", "b", "c"],
                vec![
                    vec![0.0, 1.0, 5.0],
                    vec![1.0, 0.0, 1.0],
                    vec![5.0, 1.0, 0.0],
                ],
            ),
            ..Default::default()
        })
        .unwrap();
        let report = validate_metric(&inst);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, MetricViolation::Triangle { ac, .. } if *ac == 5.0)));
    }

    #[test]
    fn asymmetry_is_reported() {
        let inst = MetricInstance::new(InstanceParts {
            clients: vec!["a".into()],
            facilities: vec![("b".into(), 1)],
            metric: matrix(&["a", "b"], vec![vec![0.0, 1.0], vec![2.0, 0.0]]),
            ..Default::default()
        })
        .unwrap();
        assert!(matches!(
            validate_metric(&inst).violations[0],
            MetricViolation::Asymmetric { .. }
        ));
    }

    fn one_edge_graph(cap: u64) -> GraphInstance {
        GraphInstance::new(vec!["c".into()], vec![("f".into(), cap)], &[(0, 0)], 1, 1).unwrap()
    }

    fn assign_cf() -> Solution {
        Solution {
            radius: 1.0,
            open: BTreeMap::from([("f".to_string(), 1)]),
            assign: BTreeMap::from([("c".to_string(), "f".to_string())]),
        }
    }

    #[test]
    fn single_assignment_verifies() {
        assert!(verify_solution(&one_edge_graph(1), &assign_cf(), 1.0).is_valid());
    }

    #[test]
    fn zero_capacity_is_a_violation() {
        let rep = verify_solution(&one_edge_graph(0), &assign_cf(), 1.0);
        assert!(matches!(
            rep.violations[..],
            [SolutionViolation::Capacity {
                load: 1,
                capacity: 0,
                ..
            }]
        ));
    }

    #[test]
    fn missing_client_is_a_cardinality_violation() {
        let mut sol = assign_cf();
        sol.assign.clear();
        sol.radius = 0.0;
        let rep = verify_solution(&one_edge_graph(1), &sol, 1.0);
        assert!(matches!(
            rep.violations[..],
            [SolutionViolation::ServedCount { served: 0, p: 1 }]
        ));
    }

    #[test]
    fn unknown_ids_are_reported() {
        let mut sol = assign_cf();
        sol.assign.insert("ghost".into(), "f".into());
        let rep = verify_solution(&one_edge_graph(1), &sol, 1.0);
        assert!(rep
            .violations
            .iter()
            .any(|v| matches!(v, SolutionViolation::UnknownClient { .. })));
    }

    #[test]
    fn path_distances() {
        // c - f - c'
        let g = GraphInstance::new(
            vec!["c".into(), "d".into()],
            vec![("f".into(), 1)],
            &[(0, 0), (1, 0)],
            1,
            1,
        )
        .unwrap();
        let dm = multi_source_distances(&g, &[Vertex::Facility(0)]);
        assert_eq!(dm.facility(0), Some(0));
        assert_eq!(dm.client(0), Some(1));
        assert_eq!(dm.client(1), Some(1));
    }

    #[test]
    fn disconnected_vertex_is_unreachable() {
        let g = GraphInstance::new(
            vec!["c".into(), "d".into()],
            vec![("f".into(), 1)],
            &[(0, 0)],
            1,
            1,
        )
        .unwrap();
        let dm = multi_source_distances(&g, &[Vertex::Facility(0)]);
        assert_eq!(dm.client(1), None);
        let empty = multi_source_distances(&g, &[]);
        assert!((0..2).all(|i| empty.client(i).is_none()));
    }

    #[test]
    fn star_leaves_at_distance_one() {
        let n = 7;
        let g = GraphInstance::new(
            (0..n).map(|i| format!("c{i}")).collect(),
            vec![("f".into(), 1)],
            &(0..n).map(|i| (i, 0)).collect::<Vec<_>>(),
            1,
            1,
        )
        .unwrap();
        let dm = multi_source_distances(&g, &[Vertex::Facility(0)]);
        assert!((0..n).all(|i| dm.client(i) == Some(1)));
    }

    #[test]
    fn graph_metric_uses_hop_distances() {
        let inst = MetricInstance::new(InstanceParts {
            k: 1,
            p: 1,
            clients: vec!["a".into(), "b".into()],
            facilities: vec![("f".into(), 1), ("g".into(), 1)],
            metric: MetricParts::Graph {
                edges: vec![
                    ("a".into(), "f".into()),
                    ("b".into(), "f".into()),
                    ("b".into(), "g".into()),
                ],
            },
            ..Default::default()
        })
        .unwrap();
        let a = inst.client_index("a").unwrap();
        let g = inst.facility_index("g").unwrap();
        assert_eq!(inst.cf_dist(a, g), 3.0);
        assert!(validate_metric(&inst).is_valid());
    }

    #[test]
    fn center_mode_makes_every_point_a_client() {
        let inst = MetricInstance::new(InstanceParts {
            mode: Mode::Center,
            k: 1,
            p: 2,
            facilities: vec![("a".into(), 2), ("b".into(), 0)],
            metric: matrix(&["a", "b"], vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(inst.client_count(), 2);
        assert_eq!(inst.facility_count(), 2);
    }

    #[test]
    fn out_of_range_counts_are_rejected() {
        let parts = single_pair(1, 1.0).to_parts();
        assert!(MetricInstance::new(InstanceParts {
            p: 2,
            ..parts.clone()
        })
        .is_err());
        assert!(MetricInstance::new(InstanceParts { k: 2, ..parts }).is_err());
    }
}
