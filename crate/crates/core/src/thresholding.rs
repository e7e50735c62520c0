//! Thresholds, the graphs they induce, and the ascending-threshold driver
//! that runs the whole pipeline.

use serde::Serialize;

use crate::clustering::{partition_dp, prune_and_split, PartitionRange};
use crate::error::{Error, Result};
use crate::model::{verify_solution, CapacityMode, GraphInstance, MetricInstance, Solution};
use crate::oracle::{largest_facilities, metric_assignment};
use crate::relaxation::{ComponentRelaxation, LpOptions, OracleStrategy};
use crate::rounding::{assemble, round_component, ComponentSolution, GraphSolution};
use crate::skeleton::{cap_truncate, skeleton_candidates};
use crate::transfer::{RoundingScheme, TransferChain, TreeSearch};
use crate::variants::{pull_back_soft, soft_to_hard_with_copies, Variant};

/// Distinct finite client-facility distances, ascending.
pub fn distance_thresholds(inst: &MetricInstance) -> Vec<f64> {
    let mut t: Vec<f64> = (0..inst.client_count())
        .flat_map(|c| (0..inst.facility_count()).map(move |f| (c, f)))
        .map(|(c, f)| inst.cf_dist(c, f))
        .filter(|d| d.is_finite())
        .collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// The candidate radii. For a graphic instance this is the unit edge
/// length alone; otherwise every distinct client-facility distance.
pub fn candidate_thresholds(inst: &MetricInstance) -> Vec<f64> {
    if inst.is_graphic() {
        return if inst.graph_edges().is_some_and(|e| !e.is_empty()) {
            vec![1.0]
        } else {
            Vec::new()
        };
    }
    distance_thresholds(inst)
}

/// `G_{<=τ}` with the instance's capacities, untruncated.
pub fn threshold_graph(inst: &MetricInstance, tau: f64) -> GraphInstance {
    let mut edges = Vec::new();
    for c in 0..inst.client_count() {
        for f in 0..inst.facility_count() {
            if inst.cf_dist(c, f) <= tau {
                edges.push((c, f));
            }
        }
    }
    let clients = (0..inst.client_count())
        .map(|c| inst.client_id(c).to_owned())
        .collect();
    let facilities = (0..inst.facility_count())
        .map(|f| (inst.facility_id(f).to_owned(), inst.cap(f)))
        .collect();
    let mut g =
        GraphInstance::new(clients, facilities, &edges, inst.k, inst.p).expect("indices in range");
    g.soft = inst.capacity_mode == CapacityMode::Soft;
    g
}

/// `G_{<=τ}` with capacities truncated to degree.
pub fn graph_at_threshold(inst: &MetricInstance, tau: f64) -> GraphInstance {
    cap_truncate(&threshold_graph(inst, tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub variant: Variant,
    pub exact_lp: bool,
    pub strategy: OracleStrategy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            variant: Variant::Hard,
            exact_lp: false,
            strategy: OracleStrategy::ServiceBound,
        }
    }
}

/// What happened for one skeleton candidate.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateTrace {
    pub skeleton: Vec<String>,
    pub components: usize,
    /// `(k_i, p_i)` per component when the partition search succeeded.
    pub partition: Option<Vec<(usize, usize)>>,
    pub lp_solves: usize,
    pub chains: Vec<TransferChain>,
    pub succeeded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdTrace {
    pub tau: f64,
    pub candidates: Vec<CandidateTrace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub variant: Variant,
    pub factor: u32,
    pub thresholds: Vec<ThresholdTrace>,
    /// Threshold of the returned solution.
    pub tau: Option<f64>,
    pub radius: Option<f64>,
    /// Tree roundings that needed more than the greedy choice.
    pub tree_fallbacks: usize,
}

impl RunReport {
    fn new(variant: Variant) -> Self {
        RunReport {
            variant,
            factor: variant.factor(),
            thresholds: Vec::new(),
            tau: None,
            radius: None,
            tree_fallbacks: 0,
        }
    }

    /// Every transfer chain run during the solve.
    pub fn chains(&self) -> impl Iterator<Item = &TransferChain> {
        self.thresholds
            .iter()
            .flat_map(|t| t.candidates.iter().flat_map(|c| c.chains.iter()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    /// `None` means no solution exists at any radius.
    pub solution: Option<Solution>,
    pub report: RunReport,
}

/// Runs the pipeline on one threshold graph.
///
/// Skeleton candidates are taken from the truncated graph. The general
/// scheme also uses truncated capacities for the relaxation; the uniform
/// schemes keep the original, equal capacities.
pub fn solve_graphic(
    g_raw: &GraphInstance,
    variant: Variant,
    lp: LpOptions,
    trace: &mut ThresholdTrace,
) -> Result<Option<GraphSolution>> {
    let scheme = variant.scheme();
    let g_tr = cap_truncate(g_raw);
    let lp_graph = if scheme == RoundingScheme::General {
        &g_tr
    } else {
        g_raw
    };
    let (k, p) = (g_raw.k, g_raw.p);
    let soft = scheme == RoundingScheme::UniformSoft;
    for skeleton in skeleton_candidates(&g_tr, k) {
        let dec = prune_and_split(lp_graph, &skeleton);
        let mut ct = CandidateTrace {
            skeleton: skeleton
                .iter()
                .map(|&f| g_raw.facility_id(f).to_owned())
                .collect(),
            components: dec.components.len(),
            partition: None,
            lp_solves: 0,
            chains: Vec::new(),
            succeeded: false,
        };
        let mut ranges: Vec<PartitionRange> = dec
            .components
            .iter()
            .map(|c| {
                let g = &c.graph;
                let max_cap = g.caps().iter().copied().max().unwrap_or(0);
                let cap_bound = if soft {
                    max_cap.saturating_mul(k as u64)
                } else {
                    g.caps().iter().sum::<u64>()
                };
                PartitionRange {
                    k_min: c.skeleton.len(),
                    k_max: if soft { k } else { k.min(g.facility_count()) },
                    p_max: p
                        .min(g.client_count())
                        .min(cap_bound.min(usize::MAX as u64) as usize),
                }
            })
            .collect();
        // Openings outside every component serve nobody.
        let outside = if soft { k } else { dec.pruned_facilities };
        ranges.push(PartitionRange {
            k_min: 0,
            k_max: outside.min(k),
            p_max: 0,
        });
        let mut oracles: Vec<ComponentRelaxation> = dec
            .components
            .iter()
            .map(|c| ComponentRelaxation::new(&c.graph, &c.skeleton, lp))
            .collect();
        let n_comp = dec.components.len();
        let split = if ranges.iter().map(|r| r.k_min).sum::<usize>() > k
            || ranges.iter().map(|r| r.p_max).sum::<usize>() < p
        {
            None
        } else {
            partition_dp(&ranges, k, p, |i, ki, pi| {
                if i == n_comp {
                    Ok(true)
                } else {
                    oracles[i].feasible(ki, pi)
                }
            })?
        };
        ct.lp_solves = oracles.iter().map(|o| o.solves).sum();
        let Some(split) = split else {
            trace.candidates.push(ct);
            continue;
        };
        ct.partition = Some(split[..n_comp].to_vec());
        let mut parts: Vec<ComponentSolution> = Vec::with_capacity(n_comp);
        for (i, comp) in dec.components.iter().enumerate() {
            let (ki, pi) = split[i];
            let point = oracles[i].point(ki, pi)?;
            let sol = round_component(&comp.graph, &comp.skeleton, ki, pi, &point, scheme);
            let sol = match sol {
                Ok(s) => s,
                Err(e) => {
                    trace.candidates.push(ct);
                    return Err(e);
                }
            };
            ct.chains.push(sol.chain.clone());
            parts.push(sol);
        }
        ct.lp_solves = oracles.iter().map(|o| o.solves).sum();
        let pairs: Vec<_> = parts
            .iter()
            .zip(dec.components.iter().map(|c| &c.map))
            .collect();
        let mut merged = assemble(&pairs)?;
        let extra = split[n_comp].0 as u64;
        if extra > 0 {
            pad_openings(g_raw, &mut merged, extra, soft)?;
        }
        ct.succeeded = true;
        trace.candidates.push(ct);
        return Ok(Some(merged));
    }
    Ok(None)
}

fn pad_openings(
    g: &GraphInstance,
    sol: &mut GraphSolution,
    mut extra: u64,
    soft: bool,
) -> Result<()> {
    for f in 0..g.facility_count() {
        if extra == 0 {
            break;
        }
        if let std::collections::btree_map::Entry::Vacant(e) = sol.open.entry(f) {
            e.insert(1);
            extra -= 1;
        }
    }
    if extra > 0 {
        match sol.open.values_mut().next() {
            Some(m) if soft => *m += extra,
            _ if soft && g.facility_count() > 0 => {
                sol.open.insert(0, extra);
            }
            _ => return Err(Error::stage("assemble", "not enough facilities to fill k")),
        }
    }
    Ok(())
}

fn to_metric_solution(inst: &MetricInstance, gs: &GraphSolution) -> Solution {
    let radius = gs
        .assign
        .iter()
        .map(|(&c, &f)| inst.cf_dist(c, f))
        .fold(0.0, f64::max);
    Solution {
        radius,
        open: gs
            .open
            .iter()
            .map(|(&f, &m)| (inst.facility_id(f).to_owned(), m))
            .collect(),
        assign: gs
            .assign
            .iter()
            .map(|(&c, &f)| (inst.client_id(c).to_owned(), inst.facility_id(f).to_owned()))
            .collect(),
    }
}

/// Solves `inst` with the chosen variant: tries thresholds in ascending
/// order and returns the first solution found, re-verified at
/// `factor · τ`. A result without a solution means none exists.
pub fn solve_metric(inst: &MetricInstance, opts: &SolveOptions) -> Result<SolveResult> {
    let variant = opts.variant;
    variant.check(inst)?;
    if variant == Variant::Soft {
        return solve_soft(inst, opts);
    }
    let mut report = RunReport::new(variant);
    if let Some(sol) = degenerate(inst)? {
        report.radius = sol.as_ref().map(|s| s.radius);
        return Ok(SolveResult {
            solution: sol,
            report,
        });
    }
    let lp = LpOptions {
        y_upper: variant.scheme() != RoundingScheme::UniformSoft,
        exact: opts.exact_lp,
        strategy: opts.strategy,
    };
    for tau in distance_thresholds(inst) {
        let g = threshold_graph(inst, tau);
        let mut trace = ThresholdTrace {
            tau,
            candidates: Vec::new(),
        };
        let outcome = solve_graphic(&g, variant, lp, &mut trace);
        report.tree_fallbacks += trace
            .candidates
            .iter()
            .flat_map(|c| &c.chains)
            .filter(|ch| ch.tree_search.is_some_and(|s| s != TreeSearch::Greedy))
            .count();
        report.thresholds.push(trace);
        let Some(gs) = outcome? else { continue };
        let sol = to_metric_solution(inst, &gs);
        let bound = variant.factor() as f64 * tau;
        let check = verify_solution(inst, &sol, bound);
        if !check.is_valid() {
            let list: Vec<String> = check.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::stage("verify", list.join("; ")));
        }
        report.tau = Some(tau);
        report.radius = Some(sol.radius);
        return Ok(SolveResult {
            solution: Some(sol),
            report,
        });
    }
    Ok(SolveResult {
        solution: None,
        report,
    })
}

/// Handles `k = 0` and `p = 0`. `Ok(None)` means the general path applies.
fn degenerate(inst: &MetricInstance) -> Result<Option<Option<Solution>>> {
    if inst.k == 0 {
        return Ok(Some((inst.p == 0).then(Solution::default)));
    }
    if inst.p == 0 {
        return Ok(Some(match largest_facilities(inst, inst.k) {
            Some(open) => metric_assignment(inst, &open, 0.0, 0)?,
            None => None,
        }));
    }
    Ok(None)
}

fn solve_soft(inst: &MetricInstance, opts: &SolveOptions) -> Result<SolveResult> {
    if let Some(sol) = degenerate(inst)? {
        let mut report = RunReport::new(Variant::Soft);
        report.radius = sol.as_ref().map(|s| s.radius);
        return Ok(SolveResult {
            solution: sol,
            report,
        });
    }
    let copies = inst.client_count().min(inst.k);
    let (hard, witness) = soft_to_hard_with_copies(inst, copies)?;
    let inner = solve_metric(
        &hard,
        &SolveOptions {
            variant: Variant::Hard,
            ..*opts
        },
    )?;
    let mut report = inner.report;
    report.variant = Variant::Soft;
    let solution = match inner.solution {
        Some(s) => {
            let back = pull_back_soft(&witness, &s);
            let bound = Variant::Soft.factor() as f64 * report.tau.unwrap_or(0.0);
            let check = verify_solution(inst, &back, bound);
            if !check.is_valid() {
                return Err(Error::stage("verify", format!("{:?}", check.violations)));
            }
            Some(back)
        }
        None => None,
    };
    Ok(SolveResult { solution, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_gap, gen_random, RandomParams};
    use crate::model::{InstanceParts, MetricParts};

    fn one_facility(dists: &[f64], cap: u64, k: usize, p: usize) -> MetricInstance {
        let n = dists.len();
        let mut order: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        order.push("f".into());
        let mut values = vec![vec![0.0; n + 1]; n + 1];
        for (i, &d) in dists.iter().enumerate() {
            values[i][n] = d;
            values[n][i] = d;
            for j in 0..n {
                if i != j {
                    values[i][j] = d + dists[j];
                }
            }
        }
        MetricInstance::new(InstanceParts {
            k,
            p,
            clients: order[..n].to_vec(),
            facilities: vec![("f".into(), cap)],
            metric: MetricParts::Matrix { order, values },
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn thresholds_sorted_and_deduplicated() {
        assert_eq!(
            candidate_thresholds(&one_facility(&[1.0, 5.0, 2.0], 3, 1, 1)),
            vec![1.0, 2.0, 5.0]
        );
        assert_eq!(
            candidate_thresholds(&one_facility(&[3.0, 3.0], 1, 1, 1)),
            vec![3.0]
        );
    }

    #[test]
    fn graphic_threshold_is_unit() {
        assert_eq!(
            candidate_thresholds(&gen_gap(2).unwrap().instance),
            vec![1.0]
        );
    }

    #[test]
    fn threshold_graph_edges() {
        let inst = one_facility(&[1.0, 2.0, 3.0], 5, 1, 1);
        let g = graph_at_threshold(&inst, 2.0);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.cap(0), 2);
        assert_eq!(graph_at_threshold(&inst, 3.0).edge_count(), 3);
        assert_eq!(graph_at_threshold(&inst, 1.0).edge_count(), 1);
    }

    #[test]
    fn trivial_instance_radius_five() {
        let inst = one_facility(&[5.0], 1, 1, 1);
        let r = solve_metric(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(r.solution.unwrap().radius, 5.0);
    }

    #[test]
    fn too_many_clients_is_no() {
        let inst = one_facility(&[1.0, 1.0, 1.0], 2, 1, 3);
        assert!(solve_metric(&inst, &SolveOptions::default())
            .unwrap()
            .solution
            .is_none());
    }

    #[test]
    fn degenerate_counts() {
        let inst = one_facility(&[1.0, 1.0], 2, 1, 0);
        let s = solve_metric(&inst, &SolveOptions::default())
            .unwrap()
            .solution
            .unwrap();
        assert_eq!(s.open_count(), 1);
        assert!(s.assign.is_empty());
        let none = one_facility(&[1.0], 2, 0, 1);
        assert!(solve_metric(&none, &SolveOptions::default())
            .unwrap()
            .solution
            .is_none());
        let empty = one_facility(&[1.0], 2, 0, 0);
        assert_eq!(
            solve_metric(&empty, &SolveOptions::default())
                .unwrap()
                .solution,
            Some(Solution::default())
        );
    }

    #[test]
    fn gap_instance_solves_at_unit_threshold() {
        let gap = gen_gap(2).unwrap();
        let r = solve_metric(&gap.instance, &SolveOptions::default()).unwrap();
        let sol = r.solution.unwrap();
        assert!(sol.radius <= 25.0);
        assert_eq!(r.report.tau, Some(1.0));
    }

    #[test]
    fn random_instances_verify() {
        for seed in 0..10 {
            let inst = gen_random(&RandomParams {
                seed,
                ..Default::default()
            })
            .unwrap();
            let r = solve_metric(&inst, &SolveOptions::default()).unwrap();
            let sol = r.solution.expect("random default instances are feasible");
            assert!(verify_solution(&inst, &sol, sol.radius).is_valid());
            assert!(r.report.chains().all(|c| c.all_verified()));
        }
    }
}
