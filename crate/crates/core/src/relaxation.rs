//! The strengthened relaxation over a graphic instance.
//!
//! Variables are `y_u` per facility followed by `x_uv` per edge; pairs that are
//! not edges get no variable at all. Besides the usual open/serve/capacity
//! rows, every skeleton vertex `s` forces one unit of opening inside
//! `N²[s]`.

use std::collections::HashMap;

use num_rational::BigRational;

use crate::error::{Error, LpError, Result};
use crate::model::{multi_source_distances, GraphInstance, Vertex};
use crate::simplex::{self, LpModel, LpOutcome, Sense, EPS_FEAS};

/// Options shared by every relaxation built for one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpOptions {
    /// `false` drops `y <= 1` (soft capacities).
    pub y_upper: bool,
    /// Solve in exact rational arithmetic.
    pub exact: bool,
    pub strategy: OracleStrategy,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            y_upper: true,
            exact: false,
            strategy: OracleStrategy::ServiceBound,
        }
    }
}

/// How `(k, p)` feasibility queries are answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStrategy {
    /// One LP per `(k, p)` query.
    Direct,
    /// One LP per `k` maximizing the served mass; every `p` up to the optimum
    /// is feasible because scaling `x` down keeps all rows satisfied.
    ServiceBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpLayout {
    /// Variable of `y_u`, indexed by facility.
    pub y: Vec<usize>,
    /// `(client, facility)` for each `x` variable, in variable order after the `y` block.
    pub x: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationModel {
    pub lp: LpModel,
    pub layout: LpLayout,
}

/// Facilities within two hops of `s`, including `s`.
pub fn near_set(g: &GraphInstance, s: usize) -> Vec<usize> {
    let dm = multi_source_distances(g, &[Vertex::Facility(s)]);
    (0..g.facility_count())
        .filter(|&f| dm.facility(f).is_some_and(|d| d <= 2))
        .collect()
}

fn build(
    g: &GraphInstance,
    skeleton: &[usize],
    k: usize,
    p: Option<usize>,
    opts: LpOptions,
) -> RelaxationModel {
    let mut lp = LpModel::default();
    let y_upper = opts.y_upper.then_some(1);
    let y: Vec<usize> = (0..g.facility_count())
        .map(|f| lp.add_var(format!("y[{}]", g.facility_id(f)), y_upper))
        .collect();
    let x: Vec<(usize, usize)> = g.edges().collect();
    // x <= 1 follows from the client rows, so it is not a separate bound.
    let x_var: Vec<usize> = x
        .iter()
        .map(|&(c, f)| lp.add_var(format!("x[{},{}]", g.facility_id(f), g.client_id(c)), None))
        .collect();

    lp.add_constraint(
        "open".into(),
        y.iter().map(|&v| (v, 1)).collect(),
        Sense::Eq,
        k as i64,
    );
    let all_x: Vec<(usize, i64)> = x_var.iter().map(|&v| (v, 1)).collect();
    match p {
        Some(p) => lp.add_constraint("serve".into(), all_x, Sense::Eq, p as i64),
        None => lp.objective = all_x,
    }
    let mut by_facility: Vec<Vec<usize>> = vec![Vec::new(); g.facility_count()];
    let mut by_client: Vec<Vec<usize>> = vec![Vec::new(); g.client_count()];
    for (e, &(c, f)) in x.iter().enumerate() {
        by_facility[f].push(x_var[e]);
        by_client[c].push(x_var[e]);
        lp.add_constraint(
            format!("link[{},{}]", g.facility_id(f), g.client_id(c)),
            vec![(x_var[e], 1), (y[f], -1)],
            Sense::Le,
            0,
        );
    }
    for (f, xs) in by_facility.iter().enumerate() {
        if xs.is_empty() {
            continue;
        }
        let mut terms: Vec<(usize, i64)> = xs.iter().map(|&v| (v, 1)).collect();
        terms.push((y[f], -(g.cap(f) as i64)));
        lp.add_constraint(format!("cap[{}]", g.facility_id(f)), terms, Sense::Le, 0);
    }
    for (c, xs) in by_client.iter().enumerate() {
        if xs.is_empty() {
            continue;
        }
        lp.add_constraint(
            format!("client[{}]", g.client_id(c)),
            xs.iter().map(|&v| (v, 1)).collect(),
            Sense::Le,
            1,
        );
    }
    for &s in skeleton {
        let terms = near_set(g, s).into_iter().map(|f| (y[f], 1)).collect();
        lp.add_constraint(format!("near[{}]", g.facility_id(s)), terms, Sense::Ge, 1);
    }
    RelaxationModel {
        lp,
        layout: LpLayout { y, x },
    }
}

/// The relaxation for opening exactly `k` and serving exactly `p`.
pub fn build_lp(
    g: &GraphInstance,
    skeleton: &[usize],
    k: usize,
    p: usize,
    opts: LpOptions,
) -> RelaxationModel {
    build(g, skeleton, k, Some(p), opts)
}

/// The same rows without `Σx = p`, maximizing `Σx` instead.
pub fn build_service_lp(
    g: &GraphInstance,
    skeleton: &[usize],
    k: usize,
    opts: LpOptions,
) -> RelaxationModel {
    build(g, skeleton, k, None, opts)
}

/// A feasible point of the relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalPoint {
    pub y: Vec<f64>,
    /// Aligned with [`LpLayout::x`].
    pub x: Vec<f64>,
}

impl FractionalPoint {
    fn from_values(layout: &LpLayout, values: &[f64]) -> Self {
        let ny = layout.y.len();
        FractionalPoint {
            y: values[..ny].to_vec(),
            x: values[ny..].to_vec(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.y.iter().chain(&self.x).copied().collect()
    }
}

/// Decides feasibility of a model in floating point.
pub fn lp_feasible(m: &RelaxationModel) -> Result<Option<FractionalPoint>, LpError> {
    Ok(match simplex::solve_checked(&m.lp)? {
        LpOutcome::Optimal { values, .. } => Some(FractionalPoint::from_values(&m.layout, &values)),
        LpOutcome::Infeasible => None,
    })
}

/// Exact rational solve, for cross-checking.
pub fn lp_feasible_exact(m: &RelaxationModel) -> Result<Option<Vec<BigRational>>, LpError> {
    Ok(match simplex::solve::<BigRational>(&m.lp)? {
        LpOutcome::Optimal { values, .. } => Some(values),
        LpOutcome::Infeasible => None,
    })
}

fn solve_any(lp: &LpModel, exact: bool) -> Result<Option<(Vec<f64>, f64)>, LpError> {
    if exact {
        use crate::simplex::Field;
        Ok(match simplex::solve::<BigRational>(lp)? {
            LpOutcome::Optimal { values, objective } => Some((
                values.iter().map(Field::to_f64).collect(),
                Field::to_f64(&objective),
            )),
            LpOutcome::Infeasible => None,
        })
    } else {
        Ok(match simplex::solve_checked(lp)? {
            LpOutcome::Optimal { values, objective } => Some((values, objective)),
            LpOutcome::Infeasible => None,
        })
    }
}

#[derive(Debug, Clone)]
struct ServiceOptimum {
    served: f64,
    point: FractionalPoint,
}

/// Cached feasibility answers for one component and skeleton restriction.
#[derive(Debug)]
pub struct ComponentRelaxation<'a> {
    graph: &'a GraphInstance,
    skeleton: &'a [usize],
    opts: LpOptions,
    service: HashMap<usize, Option<ServiceOptimum>>,
    direct: HashMap<(usize, usize), Option<FractionalPoint>>,
    pub solves: usize,
}

impl<'a> ComponentRelaxation<'a> {
    pub fn new(graph: &'a GraphInstance, skeleton: &'a [usize], opts: LpOptions) -> Self {
        ComponentRelaxation {
            graph,
            skeleton,
            opts,
            service: HashMap::new(),
            direct: HashMap::new(),
            solves: 0,
        }
    }

    fn service(&mut self, k: usize) -> Result<Option<&ServiceOptimum>> {
        if !self.service.contains_key(&k) {
            let m = build_service_lp(self.graph, self.skeleton, k, self.opts);
            self.solves += 1;
            let opt = solve_any(&m.lp, self.opts.exact)?.map(|(values, served)| ServiceOptimum {
                served,
                point: FractionalPoint::from_values(&m.layout, &values),
            });
            self.service.insert(k, opt);
        }
        Ok(self.service[&k].as_ref())
    }

    fn direct(&mut self, k: usize, p: usize) -> Result<Option<&FractionalPoint>> {
        if !self.direct.contains_key(&(k, p)) {
            let m = build_lp(self.graph, self.skeleton, k, p, self.opts);
            self.solves += 1;
            let pt = solve_any(&m.lp, self.opts.exact)?
                .map(|(v, _)| FractionalPoint::from_values(&m.layout, &v));
            self.direct.insert((k, p), pt);
        }
        Ok(self.direct[&(k, p)].as_ref())
    }

    /// Is the relaxation with `k` openings and `p` served clients feasible?
    pub fn feasible(&mut self, k: usize, p: usize) -> Result<bool> {
        match self.opts.strategy {
            OracleStrategy::Direct => Ok(self.direct(k, p)?.is_some()),
            OracleStrategy::ServiceBound => {
                let slack = if self.opts.exact { 1e-12 } else { EPS_FEAS };
                Ok(self
                    .service(k)?
                    .is_some_and(|s| p as f64 <= s.served + slack))
            }
        }
    }

    /// A feasible point for `(k, p)`; errors if the pair is infeasible.
    pub fn point(&mut self, k: usize, p: usize) -> Result<FractionalPoint> {
        let missing = || Error::stage("relaxation", format!("no feasible point for k={k}, p={p}"));
        match self.opts.strategy {
            OracleStrategy::Direct => self.direct(k, p)?.cloned().ok_or_else(missing),
            OracleStrategy::ServiceBound => {
                let s = self.service(k)?.ok_or_else(missing)?;
                if p as f64 > s.served + EPS_FEAS {
                    return Err(missing());
                }
                let scale = if s.served > 0.0 {
                    (p as f64 / s.served).min(1.0)
                } else {
                    0.0
                };
                Ok(FractionalPoint {
                    y: s.point.y.clone(),
                    x: s.point.x.iter().map(|v| v * scale).collect(),
                })
            }
        }
    }
}

/// Rounds the openings to multiples of `1/den` while keeping `Σy = k`, the
/// bounds, and one full unit in every near set exactly.
///
/// The adjustment is limited to `max_shift` units per coordinate; larger
/// discrepancies mean the point was not feasible to begin with.
pub fn snap_openings(
    y: &[f64],
    near_sets: &[Vec<usize>],
    k: usize,
    den: i64,
    y_upper: bool,
) -> Result<Vec<i64>> {
    let upper = if y_upper { den } else { i64::MAX };
    let mut num: Vec<i64> = y
        .iter()
        .map(|&v| {
            let r = v.round();
            let v = if (v - r).abs() < EPS_FEAS { r } else { v };
            ((v * den as f64).round() as i64).clamp(0, upper)
        })
        .collect();
    let budget = (EPS_FEAS * 100.0 * den as f64).ceil() as i64 * (y.len() as i64 + 1);
    let mut moved = 0i64;
    let in_near: Vec<bool> = (0..y.len())
        .map(|u| near_sets.iter().any(|s| s.contains(&u)))
        .collect();

    for set in near_sets {
        let mut deficit = den - set.iter().map(|&u| num[u]).sum::<i64>();
        let mut order = set.clone();
        order.sort_by_key(|&u| std::cmp::Reverse(num[u]));
        for u in order {
            if deficit <= 0 {
                break;
            }
            let add = deficit.min(upper - num[u]);
            num[u] += add;
            deficit -= add;
            moved += add;
        }
        if deficit > 0 {
            return Err(Error::stage("snap", "near set cannot hold one unit"));
        }
    }

    let target = (k as i64) * den;
    let mut diff = num.iter().sum::<i64>() - target;
    if diff > 0 {
        // Remove from coordinates outside every near set first, then from near
        // sets holding more than one unit.
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by_key(|&u| (in_near[u], std::cmp::Reverse(num[u])));
        for u in order {
            if diff == 0 {
                break;
            }
            let free = if in_near[u] {
                let set = near_sets.iter().find(|s| s.contains(&u)).unwrap();
                (set.iter().map(|&w| num[w]).sum::<i64>() - den).min(num[u])
            } else {
                num[u]
            };
            let take = diff.min(free.max(0));
            num[u] -= take;
            diff -= take;
            moved += take;
        }
    } else if diff < 0 {
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by_key(|&u| std::cmp::Reverse(num[u]));
        for u in order {
            if diff == 0 {
                break;
            }
            let add = (-diff).min(upper - num[u]);
            num[u] += add;
            diff += add;
            moved += add;
        }
    }
    if diff != 0 {
        return Err(Error::stage("snap", format!("cannot reach total k={k}")));
    }
    if moved > budget {
        return Err(Error::stage(
            "snap",
            format!("point needed {moved} units of repair"),
        ));
    }
    Ok(num)
}
