//! Capacity variants and the reductions between problem forms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CapacityMode, InstanceParts, MetricInstance, MetricParts, Mode, Solution};
use crate::oracle::metric_assignment;
use crate::thresholding::{solve_metric, SolveOptions, SolveResult};
use crate::transfer::{push_to_root, RoundingScheme, RoundingTree, TransferVector};

/// Which algorithm runs, and therefore which factor is guaranteed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Hard,
    Soft,
    Uniform,
    UniformSoft,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Hard,
        Variant::Soft,
        Variant::Uniform,
        Variant::UniformSoft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hard => "hard",
            Variant::Soft => "soft",
            Variant::Uniform => "uniform",
            Variant::UniformSoft => "uniform-soft",
        }
    }

    /// Guaranteed ratio between the returned radius and the optimum.
    pub fn factor(self) -> u32 {
        self.scheme().match_radius()
    }

    pub fn scheme(self) -> RoundingScheme {
        match self {
            Variant::Hard | Variant::Soft => RoundingScheme::General,
            Variant::Uniform => RoundingScheme::UniformHard,
            Variant::UniformSoft => RoundingScheme::UniformSoft,
        }
    }

    pub fn capacity_mode(self) -> CapacityMode {
        match self {
            Variant::Hard | Variant::Uniform => CapacityMode::Hard,
            Variant::Soft | Variant::UniformSoft => CapacityMode::Soft,
        }
    }

    pub fn needs_uniform(self) -> bool {
        matches!(self, Variant::Uniform | Variant::UniformSoft)
    }

    /// Rejects instances this variant does not apply to.
    pub fn check(self, inst: &MetricInstance) -> Result<()> {
        if inst.capacity_mode != self.capacity_mode() {
            return Err(Error::Variant {
                variant: self.name(),
                reason: format!("instance has {:?} capacities", inst.capacity_mode).to_lowercase(),
            });
        }
        if self.needs_uniform() && inst.facility_count() > 0 && inst.uniform_capacity().is_none() {
            return Err(Error::Variant {
                variant: self.name(),
                reason: "capacities are not uniform".into(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                format!("unknown variant `{s}` (expected hard, soft, uniform or uniform-soft)")
            })
    }
}

/// Links ids of a transformed instance back to the original.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReductionWitness {
    /// Copies per original point.
    pub n: usize,
    /// New id to original id, for every renamed point.
    pub origin: BTreeMap<String, String>,
}

impl ReductionWitness {
    pub fn original<'a>(&'a self, id: &'a str) -> &'a str {
        self.origin.get(id).map_or(id, String::as_str)
    }
}

/// Id of the `i`-th copy of `id`.
pub fn copy_id(id: &str, i: usize, sep: char) -> String {
    format!("{id}{sep}{i}")
}

/// Replaces each facility by `|clients|` co-located hard copies.
pub fn soft_to_hard(inst: &MetricInstance) -> Result<(MetricInstance, ReductionWitness)> {
    soft_to_hard_with_copies(inst, inst.client_count())
}

/// Same, with a chosen number of copies. A solution never opens more than
/// `min(|clients|, k)` useful copies of one facility, so that many suffice.
pub fn soft_to_hard_with_copies(
    inst: &MetricInstance,
    copies: usize,
) -> Result<(MetricInstance, ReductionWitness)> {
    if inst.capacity_mode != CapacityMode::Soft {
        return Err(Error::Variant {
            variant: "soft",
            reason: "instance has hard capacities".into(),
        });
    }
    let mut origin = BTreeMap::new();
    let mut facilities = Vec::new();
    // (new id, original point index)
    let mut points: Vec<(String, usize)> = (0..inst.client_count())
        .map(|c| (inst.client_id(c).to_owned(), inst.client_point(c)))
        .collect();
    for f in 0..inst.facility_count() {
        let id = inst.facility_id(f);
        for i in 0..copies {
            let cid = copy_id(id, i, '#');
            if inst.point_index(&cid).is_some() {
                return Err(Error::stage(
                    "reduction",
                    format!("copy id `{cid}` collides with an existing id"),
                ));
            }
            origin.insert(cid.clone(), id.to_owned());
            facilities.push((cid.clone(), inst.cap(f)));
            points.push((cid, inst.facility_point(f)));
        }
    }
    let metric = match inst.graph_edges() {
        Some(edges) => MetricParts::Graph {
            edges: edges
                .iter()
                .flat_map(|&(c, f)| {
                    let (cid, fid) = (inst.point_id(c), inst.point_id(f));
                    (0..copies).map(move |i| (cid.to_owned(), copy_id(fid, i, '#')))
                })
                .collect(),
        },
        None => MetricParts::Matrix {
            order: points.iter().map(|(id, _)| id.clone()).collect(),
            values: points
                .iter()
                .map(|&(_, a)| points.iter().map(|&(_, b)| inst.point_dist(a, b)).collect())
                .collect(),
        },
    };
    let out = MetricInstance::new(InstanceParts {
        mode: Mode::Supplier,
        capacity_mode: CapacityMode::Hard,
        k: inst.k,
        p: inst.p,
        clients: (0..inst.client_count())
            .map(|c| inst.client_id(c).to_owned())
            .collect(),
        facilities,
        metric,
    })?;
    Ok((out, ReductionWitness { n: copies, origin }))
}

/// Counts opened copies as multiplicities of their original facility.
pub fn pull_back_soft(witness: &ReductionWitness, sol: &Solution) -> Solution {
    let mut out = Solution {
        radius: sol.radius,
        ..Default::default()
    };
    for (id, &m) in &sol.open {
        *out.open.entry(witness.original(id).to_owned()).or_default() += m;
    }
    for (c, f) in &sol.assign {
        out.assign.insert(c.clone(), witness.original(f).to_owned());
    }
    out
}

/// Center instance with `N = |facilities| + 1` zero-capacity copies of each
/// client and facility capacities scaled by `N`; `k' = k`, `p' = pN`.
/// Distances between points not explicitly related are the shortest-path
/// closure of the copy-facility distances.
pub fn supplier_to_center(inst: &MetricInstance) -> Result<(MetricInstance, ReductionWitness)> {
    if inst.mode != Mode::Supplier {
        return Err(Error::Variant {
            variant: "supplier-to-center",
            reason: "instance is in center mode".into(),
        });
    }
    let n = inst.facility_count() + 1;
    let mut origin = BTreeMap::new();
    let mut ids: Vec<String> = Vec::new();
    let mut client_of: Vec<Option<usize>> = Vec::new();
    for c in 0..inst.client_count() {
        for i in 0..n {
            let id = copy_id(inst.client_id(c), i, '~');
            if inst.point_index(&id).is_some() {
                return Err(Error::stage(
                    "reduction",
                    format!("copy id `{id}` collides with an existing id"),
                ));
            }
            origin.insert(id.clone(), inst.client_id(c).to_owned());
            ids.push(id);
            client_of.push(Some(c));
        }
    }
    let nf = inst.facility_count();
    let base = ids.len();
    ids.extend((0..nf).map(|f| inst.facility_id(f).to_owned()));
    client_of.extend(std::iter::repeat_n(None, nf));
    let total = ids.len();
    let mut d = vec![vec![f64::INFINITY; total]; total];
    for (a, row) in d.iter_mut().enumerate() {
        row[a] = 0.0;
    }
    for (a, c) in client_of.iter().enumerate() {
        if let Some(c) = *c {
            for f in 0..nf {
                let v = inst.cf_dist(c, f);
                d[a][base + f] = v;
                d[base + f][a] = v;
            }
        }
    }
    for m in 0..total {
        for a in 0..total {
            if d[a][m].is_infinite() {
                continue;
            }
            for b in 0..total {
                let via = d[a][m] + d[m][b];
                if via < d[a][b] {
                    d[a][b] = via;
                }
            }
        }
    }
    let n64 = n as u64;
    let mut facilities: Vec<(String, u64)> = ids[..base].iter().map(|id| (id.clone(), 0)).collect();
    for f in 0..nf {
        let cap = inst
            .cap(f)
            .checked_mul(n64)
            .ok_or_else(|| Error::stage("reduction", "capacity overflow"))?;
        facilities.push((inst.facility_id(f).to_owned(), cap));
    }
    let out = MetricInstance::new(InstanceParts {
        mode: Mode::Center,
        capacity_mode: inst.capacity_mode,
        k: inst.k,
        p: inst.p * n,
        clients: Vec::new(),
        facilities,
        metric: MetricParts::Matrix {
            order: ids,
            values: d,
        },
    })?;
    Ok((out, ReductionWitness { n, origin }))
}

/// Turns a center solution of the reduced instance into a supplier solution
/// at no larger radius.
///
/// Opened client copies are replaced by unopened facilities; clients are
/// then matched by max-flow within the center solution's radius.
pub fn pull_back_center(
    orig: &MetricInstance,
    witness: &ReductionWitness,
    sol: &Solution,
) -> Result<Solution> {
    let mut open: BTreeMap<usize, u64> = BTreeMap::new();
    let mut missing = 0u64;
    for (id, &m) in &sol.open {
        match (witness.origin.contains_key(id), orig.facility_index(id)) {
            (false, Some(f)) => *open.entry(f).or_default() += m,
            _ => missing += m,
        }
    }
    for f in 0..orig.facility_count() {
        if missing == 0 {
            break;
        }
        if let std::collections::btree_map::Entry::Vacant(e) = open.entry(f) {
            e.insert(1);
            missing -= 1;
        }
    }
    if missing > 0 {
        if orig.capacity_mode == CapacityMode::Soft && !open.is_empty() {
            *open.values_mut().next().unwrap() += missing;
        } else {
            return Err(Error::stage("pullback", "not enough facilities to reopen"));
        }
    }
    let open: Vec<(usize, u64)> = open.into_iter().collect();
    metric_assignment(orig, &open, sol.radius, orig.p)?.ok_or_else(|| {
        Error::stage(
            "pullback",
            format!("cannot serve {} clients within {}", orig.p, sol.radius),
        )
    })
}

/// The supplier instance with clients and facilities both equal to the point set.
pub fn center_to_supplier(inst: &MetricInstance) -> Result<MetricInstance> {
    if inst.mode != Mode::Center {
        return Err(Error::Variant {
            variant: "center-to-supplier",
            reason: "instance is in supplier mode".into(),
        });
    }
    let mut parts = inst.to_parts();
    parts.mode = Mode::Supplier;
    Ok(MetricInstance::new(parts)?)
}

/// Integral rounding on an in-place tree by pushing each subtree's
/// fractional excess to its parent; see [`push_to_root`].
pub fn uniform_soft_tree_transfer(
    tree: &RoundingTree,
    y: &TransferVector,
) -> Result<TransferVector> {
    push_to_root(tree, y)
}

/// Solves a hard instance with uniform capacities (factor 23).
pub fn uniform_solve(inst: &MetricInstance) -> Result<SolveResult> {
    solve_metric(
        inst,
        &SolveOptions {
            variant: Variant::Uniform,
            ..Default::default()
        },
    )
}

/// Solves a soft instance with uniform capacities (factor 13).
pub fn uniform_soft_solve(inst: &MetricInstance) -> Result<SolveResult> {
    solve_metric(
        inst,
        &SolveOptions {
            variant: Variant::UniformSoft,
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_random, RandomParams};
    use crate::model::verify_solution;
    use crate::oracle::{exact_opt, OracleOptions};
    use crate::transfer::{TreeKind, DEN};

    fn soft_instance(seed: u64) -> MetricInstance {
        gen_random(&RandomParams {
            clients: 5,
            facilities: 3,
            k: 2,
            p: 4,
            capacity_mode: CapacityMode::Soft,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!(Variant::Hard.factor(), 25);
        assert_eq!(Variant::Uniform.factor(), 23);
        assert_eq!(Variant::UniformSoft.factor(), 13);
    }

    #[test]
    fn one_facility_three_clients_gives_three_copies() {
        let inst = MetricInstance::new(InstanceParts {
            capacity_mode: CapacityMode::Soft,
            k: 2,
            p: 3,
            clients: vec!["a".into(), "b".into(), "c".into()],
            facilities: vec![("f".into(), 2)],
            metric: MetricParts::Matrix {
                order: vec!["a".into(), "b".into(), "c".into(), "f".into()],
                values: vec![
                    vec![0., 1., 1., 1.],
                    vec![1., 0., 1., 1.],
                    vec![1., 1., 0., 1.],
                    vec![1., 1., 1., 0.],
                ],
            },
            ..Default::default()
        })
        .unwrap();
        let (hard, w) = soft_to_hard(&inst).unwrap();
        assert_eq!(hard.facility_count(), 3);
        assert_eq!(w.n, 3);
        let sol = Solution {
            radius: 1.0,
            open: [("f#0".to_string(), 1), ("f#2".to_string(), 1)]
                .into_iter()
                .collect(),
            assign: [("a", "f#0"), ("b", "f#0"), ("c", "f#2")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        };
        let back = pull_back_soft(&w, &sol);
        assert_eq!(back.open["f"], 2);
        assert!(verify_solution(&inst, &back, 1.0).is_valid());
    }

    #[test]
    fn soft_reduction_preserves_opt() {
        for seed in 0..10 {
            let inst = soft_instance(seed);
            let (hard, _) = soft_to_hard(&inst).unwrap();
            let a = exact_opt(&inst, &OracleOptions::default()).unwrap().opt;
            let b = exact_opt(&hard, &OracleOptions::default()).unwrap().opt;
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn center_image_has_n_copies() {
        let inst = gen_random(&RandomParams {
            clients: 3,
            facilities: 2,
            k: 1,
            p: 2,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let (c, w) = supplier_to_center(&inst).unwrap();
        assert_eq!(w.n, 3);
        assert_eq!(c.point_count(), 3 * 3 + 2);
        assert_eq!(c.p, 6);
        assert_eq!(c.mode, Mode::Center);
    }

    #[test]
    fn center_to_supplier_shape() {
        let inst = gen_random(&RandomParams {
            clients: 4,
            facilities: 4,
            k: 2,
            p: 3,
            mode: Mode::Center,
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let s = center_to_supplier(&inst).unwrap();
        assert_eq!(s.client_count(), 4);
        assert_eq!(s.facility_count(), 4);
        assert_eq!(s.mode, Mode::Supplier);
    }

    #[test]
    fn wrong_variant_is_rejected() {
        let inst = soft_instance(0);
        assert!(Variant::Hard.check(&inst).is_err());
        assert!(Variant::Soft.check(&inst).is_ok());
    }

    #[test]
    fn star_push_moves_halves_to_root() {
        use crate::model::GraphInstance;
        // Root facility r with two leaf facilities a, b, all sharing client x.
        let g = GraphInstance::new(
            vec!["x".into()],
            vec![("a".into(), 2), ("b".into(), 2), ("r".into(), 2)],
            &[(0, 0), (0, 1), (0, 2)],
            2,
            1,
        )
        .unwrap();
        let tree = RoundingTree::build(&g, &[2], TreeKind::InPlace).unwrap();
        let y = TransferVector::new(vec![DEN / 2, DEN / 2, DEN], DEN);
        let out = uniform_soft_tree_transfer(&tree, &y).unwrap();
        assert_eq!(out.num, vec![0, 0, 2 * DEN]);
        let same = uniform_soft_tree_transfer(&tree, &out).unwrap();
        assert_eq!(same, out);
    }
}
