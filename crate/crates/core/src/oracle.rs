//! Exact optimum by enumerating facility sets, for checking the pipeline on
//! small instances.

use serde::Serialize;

use crate::error::{Error, FlowError, Result};
use crate::flow::{max_flow, FlowNetwork};
use crate::model::{CapacityMode, MetricInstance, Solution};
use crate::thresholding::distance_thresholds;

/// Default cap on the number of max-flow computations.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub budget: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// `None` when no solution exists at any radius.
    pub opt: Option<f64>,
    pub witness: Option<Solution>,
    pub flows: u64,
}

/// Serves exactly `p` clients from `open` (facility, multiplicity) pairs at
/// distance at most `r`, or `None` when the max-flow falls short.
pub fn metric_assignment(
    inst: &MetricInstance,
    open: &[(usize, u64)],
    r: f64,
    p: usize,
) -> Result<Option<Solution>> {
    let nc = inst.client_count();
    let nf = open.len();
    let (source, sink) = (nc + nf, nc + nf + 1);
    let mut net = FlowNetwork::new(nc + nf + 2, source, sink);
    let mut pairs = Vec::new();
    for (slot, &(f, mult)) in open.iter().enumerate() {
        let cap = inst
            .cap(f)
            .checked_mul(mult)
            .and_then(|c| i64::try_from(c).ok())
            .ok_or(FlowError::Overflow)?;
        net.add_arc(source, nc + slot, cap)?;
        for c in 0..nc {
            if inst.cf_dist(c, f) <= r {
                pairs.push((net.add_arc(nc + slot, c, 1)?, c, f));
            }
        }
    }
    for c in 0..nc {
        net.add_arc(c, sink, 1)?;
    }
    let flow = max_flow(&net)?;
    if flow.value < p as i64 {
        return Ok(None);
    }
    let mut chosen: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|&&(id, _, _)| flow.flows[id] > 0)
        .map(|&(_, c, f)| (c, f))
        .collect();
    chosen.sort_unstable();
    chosen.truncate(p);
    let radius = chosen
        .iter()
        .map(|&(c, f)| inst.cf_dist(c, f))
        .fold(0.0, f64::max);
    let mut sol = Solution {
        radius,
        ..Default::default()
    };
    for &(f, mult) in open {
        if mult > 0 {
            *sol.open.entry(inst.facility_id(f).to_owned()).or_default() += mult;
        }
    }
    for (c, f) in chosen {
        sol.assign
            .insert(inst.client_id(c).to_owned(), inst.facility_id(f).to_owned());
    }
    Ok(Some(sol))
}

/// The `k` largest-capacity facilities (smallest index on ties), repeating
/// the largest when multiplicity is allowed and distinct ones run out.
pub fn largest_facilities(inst: &MetricInstance, k: usize) -> Option<Vec<(usize, u64)>> {
    let mut order: Vec<usize> = (0..inst.facility_count()).collect();
    order.sort_by_key(|&f| (std::cmp::Reverse(inst.cap(f)), f));
    let soft = inst.capacity_mode == CapacityMode::Soft;
    if k > order.len() && (!soft || order.is_empty()) {
        return None;
    }
    let mut open: Vec<(usize, u64)> = order.iter().take(k).map(|&f| (f, 1)).collect();
    if k > order.len() {
        open[0].1 += (k - order.len()) as u64;
    }
    Some(open)
}

/// Feasible facility choices: `m`-subsets (hard) or `k`-multisets (soft) of
/// the positive-capacity facilities, in lexicographic order.
fn choices(
    pos: &[usize],
    size: usize,
    multiset: bool,
) -> Box<dyn Iterator<Item = Vec<usize>> + '_> {
    let n = pos.len();
    let mut cur: Option<Vec<usize>> = if multiset {
        (n > 0 || size == 0).then(|| vec![0; size])
    } else {
        (size <= n).then(|| (0..size).collect())
    };
    Box::new(std::iter::from_fn(move || {
        let out = cur.clone()?;
        let next = {
            let c = cur.as_mut().unwrap();
            let mut advanced = false;
            for i in (0..size).rev() {
                let limit = if multiset { n - 1 } else { n - size + i };
                if c[i] < limit {
                    c[i] += 1;
                    for j in i + 1..size {
                        c[j] = if multiset { c[i] } else { c[j - 1] + 1 };
                    }
                    advanced = true;
                    break;
                }
            }
            advanced
        };
        if !next {
            cur = None;
        }
        Some(out.into_iter().map(|i| pos[i]).collect())
    }))
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of facility choices the oracle enumerates.
pub fn choice_count(inst: &MetricInstance) -> u128 {
    let pos = (0..inst.facility_count())
        .filter(|&f| inst.cap(f) > 0)
        .count() as u64;
    let k = inst.k as u64;
    match inst.capacity_mode {
        CapacityMode::Soft if pos == 0 => 0,
        CapacityMode::Soft => binomial(pos + k - 1, k),
        CapacityMode::Hard => binomial(pos, k.min(pos)),
    }
}

fn as_open(set: &[usize], fillers: &[usize]) -> Vec<(usize, u64)> {
    let mut open: Vec<(usize, u64)> = Vec::new();
    for &f in set.iter().chain(fillers) {
        match open.last_mut() {
            Some((g, m)) if *g == f => *m += 1,
            _ => open.push((f, 1)),
        }
    }
    open
}

struct Enumeration {
    pos: Vec<usize>,
    fillers: Vec<usize>,
    size: usize,
    multiset: bool,
}

fn enumeration(inst: &MetricInstance) -> Option<Enumeration> {
    let soft = inst.capacity_mode == CapacityMode::Soft;
    let pos: Vec<usize> = (0..inst.facility_count())
        .filter(|&f| inst.cap(f) > 0)
        .collect();
    if soft {
        return (!pos.is_empty()).then_some(Enumeration {
            pos,
            fillers: Vec::new(),
            size: inst.k,
            multiset: true,
        });
    }
    let size = inst.k.min(pos.len());
    let fillers: Vec<usize> = (0..inst.facility_count())
        .filter(|&f| inst.cap(f) == 0)
        .take(inst.k - size)
        .collect();
    (size + fillers.len() == inst.k).then_some(Enumeration {
        pos,
        fillers,
        size,
        multiset: false,
    })
}

/// Smallest radius admitting a solution, with a witness.
///
/// For every facility choice the smallest feasible threshold is found by
/// binary search, each probe being one max-flow. Refuses with
/// [`Error::Budget`] before starting if the worst case exceeds the budget.
pub fn exact_opt(inst: &MetricInstance, opts: &OracleOptions) -> Result<OracleResult> {
    let infeasible = |flows| OracleResult {
        opt: None,
        witness: None,
        flows,
    };
    if inst.k == 0 {
        if inst.p > 0 {
            return Ok(infeasible(0));
        }
        return Ok(OracleResult {
            opt: Some(0.0),
            witness: Some(Solution::default()),
            flows: 0,
        });
    }
    if inst.p == 0 {
        let Some(open) = largest_facilities(inst, inst.k) else {
            return Ok(infeasible(0));
        };
        let witness = metric_assignment(inst, &open, 0.0, 0)?;
        return Ok(OracleResult {
            opt: Some(0.0),
            witness,
            flows: 1,
        });
    }
    let Some(en) = enumeration(inst) else {
        return Ok(infeasible(0));
    };
    let thresholds = distance_thresholds(inst);
    if thresholds.is_empty() {
        return Ok(infeasible(0));
    }
    let probes = (usize::BITS - thresholds.len().leading_zeros()) as u128 + 1;
    let needed = choice_count(inst).saturating_mul(probes);
    if needed > opts.budget as u128 {
        return Err(Error::Budget {
            budget: opts.budget,
            needed: needed.min(u64::MAX as u128) as u64,
        });
    }
    let mut flows = 0u64;
    let mut best: Option<(usize, Vec<(usize, u64)>)> = None;
    for set in choices(&en.pos, en.size, en.multiset) {
        let open = as_open(&set, &en.fillers);
        let hi = match &best {
            Some((0, _)) => break,
            Some((idx, _)) => idx - 1,
            None => thresholds.len() - 1,
        };
        flows += 1;
        if metric_assignment(inst, &open, thresholds[hi], inst.p)?.is_none() {
            continue;
        }
        let (mut lo, mut hi) = (0usize, hi);
        while lo < hi {
            let mid = (lo + hi) / 2;
            flows += 1;
            if metric_assignment(inst, &open, thresholds[mid], inst.p)?.is_some() {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        best = Some((lo, open));
    }
    match best {
        None => Ok(infeasible(flows)),
        Some((idx, open)) => {
            let witness = metric_assignment(inst, &open, thresholds[idx], inst.p)?;
            Ok(OracleResult {
                opt: Some(thresholds[idx]),
                witness,
                flows: flows + 1,
            })
        }
    }
}

/// Searches for any solution within distance `r`. Returns the first witness
/// and the number of facility choices examined.
pub fn feasible_at(
    inst: &MetricInstance,
    r: f64,
    opts: &OracleOptions,
) -> Result<(Option<Solution>, u64)> {
    if inst.k == 0 {
        return Ok(((inst.p == 0).then(Solution::default), 0));
    }
    let Some(en) = enumeration(inst) else {
        return Ok((None, 0));
    };
    let count = choice_count(inst);
    if count > opts.budget as u128 {
        return Err(Error::Budget {
            budget: opts.budget,
            needed: count.min(u64::MAX as u128) as u64,
        });
    }
    let mut checked = 0u64;
    for set in choices(&en.pos, en.size, en.multiset) {
        checked += 1;
        if let Some(sol) = metric_assignment(inst, &as_open(&set, &en.fillers), r, inst.p)? {
            return Ok((Some(sol), checked));
        }
    }
    Ok((None, checked))
}
