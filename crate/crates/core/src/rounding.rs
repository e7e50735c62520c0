//! Per-component rounding and the final capacitated matching.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{max_flow, FlowNetwork};
use crate::model::{multi_source_distances, GraphInstance, Vertex, VertexMap};
use crate::relaxation::{near_set, snap_openings, FractionalPoint};
use crate::transfer::{run_chain, RoundingScheme, TransferChain, DEN};

/// Clients assigned to open facilities, with the largest hop distance used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    /// `(client, facility)` pairs in client order.
    pub assign: Vec<(usize, usize)>,
    pub hops: u32,
}

/// Assigns exactly `p` clients to `open` facilities within `r + 1` hops,
/// at most `L(u) · mult(u)` per facility. `None` when the max-flow is below `p`.
pub fn match_clients(
    g: &GraphInstance,
    open: &[(usize, u64)],
    r: u32,
    p: usize,
) -> Result<Option<Matching>> {
    let nc = g.client_count();
    let nf = open.len();
    let source = nc + nf;
    let sink = source + 1;
    let mut net = FlowNetwork::new(nc + nf + 2, source, sink);
    let mut arc_pairs = Vec::new();
    let mut dists = Vec::with_capacity(nf);
    for (slot, &(f, mult)) in open.iter().enumerate() {
        let cap = g
            .cap(f)
            .checked_mul(mult)
            .and_then(|c| i64::try_from(c).ok());
        net.add_arc(
            source,
            nc + slot,
            cap.ok_or(crate::error::FlowError::Overflow)?,
        )?;
        let dm = multi_source_distances(g, &[Vertex::Facility(f)]);
        for c in 0..nc {
            if dm.client(c).is_some_and(|d| d <= r + 1) {
                let id = net.add_arc(nc + slot, c, 1)?;
                arc_pairs.push((id, c, slot));
            }
        }
        dists.push(dm);
    }
    for c in 0..nc {
        net.add_arc(c, sink, 1)?;
    }
    let flow = max_flow(&net)?;
    if flow.value < p as i64 {
        return Ok(None);
    }
    let mut chosen: Vec<(usize, usize)> = arc_pairs
        .iter()
        .filter(|&&(id, _, _)| flow.flows[id] > 0)
        .map(|&(_, c, slot)| (c, slot))
        .collect();
    chosen.sort_unstable();
    chosen.truncate(p);
    let hops = chosen
        .iter()
        .map(|&(c, slot)| dists[slot].client(c).unwrap())
        .max()
        .unwrap_or(0);
    let assign = chosen
        .into_iter()
        .map(|(c, slot)| (c, open[slot].0))
        .collect();
    Ok(Some(Matching { assign, hops }))
}

/// A rounded component in its own local indices.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentSolution {
    /// `(facility, multiplicity)` pairs.
    pub open: Vec<(usize, u64)>,
    pub matching: Matching,
    pub chain: TransferChain,
}

/// Rounds a feasible fractional point of one component to an integral
/// solution of `k` openings and `p` served clients.
///
/// Runs the transfer chain of `scheme` and matches clients one hop beyond
/// the chain total. Every failure names its stage.
pub fn round_component(
    g: &GraphInstance,
    skeleton: &[usize],
    k: usize,
    p: usize,
    point: &FractionalPoint,
    scheme: RoundingScheme,
) -> Result<ComponentSolution> {
    if skeleton.is_empty() {
        return Err(Error::stage("round", "component without skeleton"));
    }
    let near: Vec<Vec<usize>> = skeleton.iter().map(|&s| near_set(g, s)).collect();
    let y_upper = scheme != RoundingScheme::UniformSoft;
    let y = snap_openings(&point.y, &near, k, DEN, y_upper)?;
    let (units, chain) = run_chain(g, skeleton, &y, DEN, scheme)?;
    let open: Vec<(usize, u64)> = units
        .iter()
        .enumerate()
        .filter(|(_, &u)| u > 0)
        .map(|(f, &u)| (f, u))
        .collect();
    let matching = match_clients(g, &open, chain.total(), p)?.ok_or_else(|| {
        Error::stage(
            "match",
            format!(
                "fewer than {p} clients reachable within {} hops",
                chain.total() + 1
            ),
        )
    })?;
    Ok(ComponentSolution {
        open,
        matching,
        chain,
    })
}

/// A solution on the whole graph, in global indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct GraphSolution {
    pub open: BTreeMap<usize, u64>,
    pub assign: BTreeMap<usize, usize>,
    pub hops: u32,
}

impl GraphSolution {
    pub fn open_count(&self) -> u64 {
        self.open.values().sum()
    }
}

/// Merges component solutions, mapping local indices back through each map.
pub fn assemble(parts: &[(&ComponentSolution, &VertexMap)]) -> Result<GraphSolution> {
    let mut out = GraphSolution::default();
    for (part, map) in parts {
        for &(f, mult) in &part.open {
            if out.open.insert(map.facilities[f], mult).is_some() {
                return Err(Error::stage(
                    "assemble",
                    "facility opened by two components",
                ));
            }
        }
        for &(c, f) in &part.matching.assign {
            if out
                .assign
                .insert(map.clients[c], map.facilities[f])
                .is_some()
            {
                return Err(Error::stage("assemble", "client served by two components"));
            }
        }
        out.hops = out.hops.max(part.matching.hops);
    }
    Ok(out)
}
