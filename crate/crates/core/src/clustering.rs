//! Pruning far vertices, splitting into components, and distributing the
//! global budgets `(k, p)` over components.

use std::collections::VecDeque;

use crate::error::Result;
use crate::model::{multi_source_distances, GraphInstance, Vertex, VertexMap};

/// Vertices farther than this from the skeleton are discarded.
pub const PRUNE_RADIUS: u32 = 5;

#[derive(Debug, Clone)]
pub struct Component {
    pub graph: GraphInstance,
    /// Local indices back to the pruned-from graph.
    pub map: VertexMap,
    /// Skeleton members inside this component, as local facility indices,
    /// in the order they appear in the skeleton.
    pub skeleton: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ComponentDecomposition {
    pub components: Vec<Component>,
    pub pruned_clients: usize,
    pub pruned_facilities: usize,
}

/// Drops every vertex more than [`PRUNE_RADIUS`] hops from `skeleton` and
/// splits the remainder into connected components, ordered by the smallest
/// id they contain.
pub fn prune_and_split(g: &GraphInstance, skeleton: &[usize]) -> ComponentDecomposition {
    let sources: Vec<Vertex> = skeleton.iter().map(|&f| Vertex::Facility(f)).collect();
    let dm = multi_source_distances(g, &sources);
    let keep: Vec<bool> = (0..g.vertex_count())
        .map(|v| dm.within(g.vertex_at(v), PRUNE_RADIUS))
        .collect();
    let mut comp = vec![usize::MAX; g.vertex_count()];
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for start in 0..g.vertex_count() {
        if !keep[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let (mut cs, mut fs) = (Vec::new(), Vec::new());
        comp[start] = id;
        let mut q = VecDeque::from([start]);
        while let Some(v) = q.pop_front() {
            let vx = g.vertex_at(v);
            match vx {
                Vertex::Client(c) => cs.push(c),
                Vertex::Facility(f) => fs.push(f),
            }
            for w in g.neighbors(vx) {
                let wi = g.vertex_index(w);
                if keep[wi] && comp[wi] == usize::MAX {
                    comp[wi] = id;
                    q.push_back(wi);
                }
            }
        }
        cs.sort_unstable();
        fs.sort_unstable();
        groups.push((cs, fs));
    }
    let smallest = |(cs, fs): &(Vec<usize>, Vec<usize>)| -> String {
        let a = cs.first().map(|&c| g.client_id(c));
        let b = fs.first().map(|&f| g.facility_id(f));
        match (a, b) {
            (Some(a), Some(b)) => a.min(b).to_owned(),
            (a, b) => a.or(b).unwrap_or_default().to_owned(),
        }
    };
    groups.sort_by_cached_key(smallest);
    let kept_c: usize = groups.iter().map(|(c, _)| c.len()).sum();
    let kept_f: usize = groups.iter().map(|(_, f)| f.len()).sum();
    let components = groups
        .into_iter()
        .map(|(cs, fs)| {
            let (graph, map) = g.induced(&cs, &fs);
            let skeleton = skeleton
                .iter()
                .filter_map(|s| fs.binary_search(s).ok())
                .collect();
            Component {
                graph,
                map,
                skeleton,
            }
        })
        .collect();
    ComponentDecomposition {
        components,
        pruned_clients: g.client_count() - kept_c,
        pruned_facilities: g.facility_count() - kept_f,
    }
}

/// Admissible budgets for one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionRange {
    pub k_min: usize,
    pub k_max: usize,
    pub p_max: usize,
}

/// Finds `(k_i, p_i)` per component with `Σk_i = k`, `Σp_i = p`, each pair
/// inside its range and accepted by `feasible(i, k_i, p_i)`.
///
/// Dynamic programming over components; `feasible` is called at most once
/// per `(i, k_i, p_i)`. Returns `None` when no split exists.
pub fn partition_dp<F>(
    ranges: &[PartitionRange],
    k: usize,
    p: usize,
    mut feasible: F,
) -> Result<Option<Vec<(usize, usize)>>>
where
    F: FnMut(usize, usize, usize) -> Result<bool>,
{
    let cells = (k + 1) * (p + 1);
    let at = |kk: usize, pp: usize| kk * (p + 1) + pp;
    // reach[i][cell]: the choice for component i-1 that reaches this cell.
    let mut reach: Vec<Vec<Option<(usize, usize)>>> = vec![vec![None; cells]];
    reach[0][at(0, 0)] = Some((0, 0));
    for (i, r) in ranges.iter().enumerate() {
        let mut allowed = Vec::new();
        for ki in r.k_min..=r.k_max.min(k) {
            for pi in 0..=r.p_max.min(p) {
                if feasible(i, ki, pi)? {
                    allowed.push((ki, pi));
                }
            }
        }
        let mut next = vec![None; cells];
        for kk in 0..=k {
            for pp in 0..=p {
                if reach[i][at(kk, pp)].is_none() {
                    continue;
                }
                for &(ki, pi) in &allowed {
                    if kk + ki <= k && pp + pi <= p && next[at(kk + ki, pp + pi)].is_none() {
                        next[at(kk + ki, pp + pi)] = Some((ki, pi));
                    }
                }
            }
        }
        reach.push(next);
    }
    if reach[ranges.len()][at(k, p)].is_none() {
        return Ok(None);
    }
    let mut out = vec![(0, 0); ranges.len()];
    let (mut kk, mut pp) = (k, p);
    for i in (0..ranges.len()).rev() {
        let (ki, pi) = reach[i + 1][at(kk, pp)].expect("back-pointer on reachable cell");
        out[i] = (ki, pi);
        kk -= ki;
        pp -= pi;
    }
    Ok(Some(out))
}
