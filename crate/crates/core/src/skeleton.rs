//! Capacity truncation and the greedy family of candidate skeletons.

use crate::model::{multi_source_distances, GraphInstance, Vertex};

/// Minimum hop distance from the current skeleton for a facility to be
/// eligible as the next member.
pub const SEPARATION: u32 = 6;

/// Lowers every capacity to the facility's degree; a facility can never
/// serve more clients than it is adjacent to.
pub fn cap_truncate(g: &GraphInstance) -> GraphInstance {
    let mut out = g.clone();
    out.set_caps(
        (0..g.facility_count())
            .map(|f| g.cap(f).min(g.degree(f) as u64))
            .collect(),
    );
    out
}

/// Every prefix of the greedy skeleton, shortest first.
///
/// Starting from the empty set, the facility of largest capacity among those
/// at least [`SEPARATION`] hops from the chosen ones is added (smallest index
/// on ties). Unreachable facilities count as far. Stops at `k` members or
/// when nothing is eligible. Capacities are read from `g` as given, so pass
/// the truncated graph.
pub fn skeleton_candidates(g: &GraphInstance, k: usize) -> Vec<Vec<usize>> {
    let mut s: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    while s.len() < k {
        let sources: Vec<Vertex> = s.iter().map(|&f| Vertex::Facility(f)).collect();
        let dm = multi_source_distances(g, &sources);
        let next = (0..g.facility_count())
            .filter(|&f| dm.facility(f).is_none_or(|d| d >= SEPARATION))
            .max_by_key(|&f| (g.cap(f), std::cmp::Reverse(f)));
        let Some(f) = next else { break };
        s.push(f);
        out.push(s.clone());
    }
    out
}
