//! Exact integral max-flow (Dinic) and the transportation feasibility check
//! built on it.
//!
//! Arcs are explored in insertion order, so the flow returned for a given
//! network is always the same.

use std::collections::VecDeque;

use crate::error::FlowError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub cap: i64,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    nodes: usize,
    source: usize,
    sink: usize,
    arcs: Vec<Arc>,
}

impl FlowNetwork {
    pub fn new(nodes: usize, source: usize, sink: usize) -> Self {
        assert!(source < nodes && sink < nodes && source != sink);
        FlowNetwork {
            nodes,
            source,
            sink,
            arcs: Vec::new(),
        }
    }

    /// Adds an arc and returns its id.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64) -> Result<usize, FlowError> {
        if from >= self.nodes {
            return Err(FlowError::NodeOutOfRange(from));
        }
        if to >= self.nodes {
            return Err(FlowError::NodeOutOfRange(to));
        }
        if cap < 0 {
            return Err(FlowError::NegativeCapacity(from, to));
        }
        if to == self.source || from == self.sink {
            return Err(FlowError::BadArc(from, to));
        }
        self.arcs.push(Arc { from, to, cap });
        Ok(self.arcs.len() - 1)
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    pub value: i64,
    /// Flow on each arc, indexed by arc id.
    pub flows: Vec<i64>,
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

pub fn max_flow(net: &FlowNetwork) -> Result<FlowResult, FlowError> {
    // Every flow value is bounded by the source's outgoing capacity.
    let mut bound: i64 = 0;
    for a in net.arcs.iter().filter(|a| a.from == net.source) {
        bound = bound.checked_add(a.cap).ok_or(FlowError::Overflow)?;
    }
    let mut res = Residual {
        head: Vec::with_capacity(2 * net.arcs.len()),
        cap: Vec::with_capacity(2 * net.arcs.len()),
        adj: vec![Vec::new(); net.nodes],
    };
    for a in &net.arcs {
        res.adj[a.from].push(res.head.len());
        res.head.push(a.to);
        res.cap.push(a.cap);
        res.adj[a.to].push(res.head.len());
        res.head.push(a.from);
        res.cap.push(0);
    }

    let mut value: i64 = 0;
    let mut level = vec![usize::MAX; net.nodes];
    let mut next = vec![0usize; net.nodes];
    loop {
        level.iter_mut().for_each(|l| *l = usize::MAX);
        level[net.source] = 0;
        let mut q = VecDeque::from([net.source]);
        while let Some(v) = q.pop_front() {
            for &e in &res.adj[v] {
                let w = res.head[e];
                if res.cap[e] > 0 && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
        if level[net.sink] == usize::MAX {
            break;
        }
        next.iter_mut().for_each(|n| *n = 0);
        loop {
            let pushed = augment(&mut res, &level, &mut next, net.source, net.sink, bound);
            if pushed == 0 {
                break;
            }
            value = value.checked_add(pushed).ok_or(FlowError::Overflow)?;
        }
    }
    let flows = (0..net.arcs.len()).map(|i| res.cap[2 * i + 1]).collect();
    Ok(FlowResult { value, flows })
}

fn augment(
    res: &mut Residual,
    level: &[usize],
    next: &mut [usize],
    v: usize,
    sink: usize,
    limit: i64,
) -> i64 {
    if v == sink {
        return limit;
    }
    while next[v] < res.adj[v].len() {
        let e = res.adj[v][next[v]];
        let w = res.head[e];
        if res.cap[e] > 0 && level[w] == level[v] + 1 {
            let pushed = augment(res, level, next, w, sink, limit.min(res.cap[e]));
            if pushed > 0 {
                res.cap[e] -= pushed;
                res.cap[e ^ 1] += pushed;
                return pushed;
            }
        }
        next[v] += 1;
    }
    0
}

/// Decides whether every demand can be met by supplies over the allowed
/// `(supplier, consumer)` arcs. Supplies need not cover the demand in total.
pub fn transportation_feasible(
    supplies: &[i64],
    demands: &[i64],
    arcs: &[(usize, usize)],
) -> Result<bool, FlowError> {
    let ns = supplies.len();
    let nd = demands.len();
    let source = ns + nd;
    let sink = source + 1;
    let mut total_demand: i64 = 0;
    for &d in demands {
        if d < 0 {
            return Err(FlowError::NegativeCapacity(source, sink));
        }
        total_demand = total_demand.checked_add(d).ok_or(FlowError::Overflow)?;
    }
    let mut total_supply: i64 = 0;
    for &s in supplies {
        total_supply = total_supply.checked_add(s).ok_or(FlowError::Overflow)?;
    }
    if total_supply < total_demand {
        return Ok(false);
    }
    let mut net = FlowNetwork::new(ns + nd + 2, source, sink);
    for (i, &s) in supplies.iter().enumerate() {
        if s > 0 {
            net.add_arc(source, i, s)?;
        }
    }
    for &(s, d) in arcs {
        if s >= ns || d >= nd {
            return Err(FlowError::NodeOutOfRange(s.max(d)));
        }
        let cap = supplies[s].min(demands[d]);
        if cap > 0 {
            net.add_arc(s, ns + d, cap)?;
        }
    }
    for (j, &d) in demands.iter().enumerate() {
        if d > 0 {
            net.add_arc(ns + j, sink, d)?;
        }
    }
    Ok(max_flow(&net)?.value == total_demand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_arc() {
        let mut net = FlowNetwork::new(2, 0, 1);
        net.add_arc(0, 1, 7).unwrap();
        let r = max_flow(&net).unwrap();
        assert_eq!(r.value, 7);
        assert_eq!(r.flows, vec![7]);
    }

    #[test]
    fn two_disjoint_unit_paths() {
        let mut net = FlowNetwork::new(4, 0, 3);
        for mid in [1, 2] {
            net.add_arc(0, mid, 1).unwrap();
            net.add_arc(mid, 3, 1).unwrap();
        }
        assert_eq!(max_flow(&net).unwrap().value, 2);
    }

    #[test]
    fn arcs_into_source_are_rejected() {
        let mut net = FlowNetwork::new(3, 0, 2);
        assert_eq!(net.add_arc(1, 0, 1), Err(FlowError::BadArc(1, 0)));
        assert_eq!(net.add_arc(2, 1, 1), Err(FlowError::BadArc(2, 1)));
        assert_eq!(
            net.add_arc(0, 1, -1),
            Err(FlowError::NegativeCapacity(0, 1))
        );
    }

    #[test]
    fn overflow_is_detected() {
        let mut net = FlowNetwork::new(3, 0, 2);
        net.add_arc(0, 1, i64::MAX).unwrap();
        net.add_arc(0, 1, 1).unwrap();
        net.add_arc(1, 2, 1).unwrap();
        assert_eq!(max_flow(&net), Err(FlowError::Overflow));
    }

    #[test]
    fn transportation_basics() {
        assert!(transportation_feasible(&[1], &[1], &[(0, 0)]).unwrap());
        assert!(!transportation_feasible(&[1, 1], &[1, 1], &[(0, 0), (1, 0)]).unwrap());
        assert!(transportation_feasible(&[0], &[0], &[]).unwrap());
    }

    fn brute_min_cut(n: usize, arcs: &[(usize, usize, i64)]) -> i64 {
        // source 0, sink n-1; enumerate every source side containing 0 but not n-1
        let mut best = i64::MAX;
        for mask in 0u32..(1 << n) {
            if mask & 1 == 0 || mask & (1 << (n - 1)) != 0 {
                continue;
            }
            let cut: i64 = arcs
                .iter()
                .filter(|&&(u, v, _)| mask & (1 << u) != 0 && mask & (1 << v) == 0)
                .map(|&(_, _, c)| c)
                .sum();
            best = best.min(cut);
        }
        best
    }

    fn brute_hall(supplies: &[i64], demands: &[i64], arcs: &[(usize, usize)]) -> bool {
        (0u32..(1 << demands.len())).all(|mask| {
            let need: i64 = (0..demands.len())
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| demands[j])
                .sum();
            let reach: i64 = (0..supplies.len())
                .filter(|&i| arcs.iter().any(|&(s, d)| s == i && mask & (1 << d) != 0))
                .map(|i| supplies[i])
                .sum();
            reach >= need
        })
    }

    proptest! {
        #[test]
        fn max_flow_equals_min_cut(
            n in 2usize..9,
            raw in proptest::collection::vec((0usize..9, 0usize..9, 0i64..6), 0..24),
        ) {
            let arcs: Vec<_> = raw
                .into_iter()
                .map(|(u, v, c)| (u % n, v % n, c))
                .filter(|&(u, v, _)| u != v && v != 0 && u != n - 1)
                .collect();
            let mut net = FlowNetwork::new(n, 0, n - 1);
            for &(u, v, c) in &arcs {
                net.add_arc(u, v, c).unwrap();
            }
            let r = max_flow(&net).unwrap();
            prop_assert_eq!(r.value, brute_min_cut(n, &arcs));
            // conservation and capacity
            let mut bal = vec![0i64; n];
            for (a, &f) in net.arcs().iter().zip(&r.flows) {
                prop_assert!(0 <= f && f <= a.cap);
                bal[a.from] -= f;
                bal[a.to] += f;
            }
            for (v, b) in bal.iter().enumerate().take(n - 1).skip(1) {
                prop_assert_eq!(*b, 0, "node {}", v);
            }
        }

        #[test]
        fn transportation_matches_hall(
            supplies in proptest::collection::vec(0i64..5, 1..6),
            demands in proptest::collection::vec(0i64..5, 1..6),
            mask in any::<u64>(),
        ) {
            let arcs: Vec<_> = (0..supplies.len())
                .flat_map(|i| (0..demands.len()).map(move |j| (i, j)))
                .filter(|&(i, j)| mask & (1 << (i * 6 + j)) != 0)
                .collect();
            prop_assert_eq!(
                transportation_feasible(&supplies, &demands, &arcs).unwrap(),
                brute_hall(&supplies, &demands, &arcs)
            );
        }
    }
}
