//! Instance generators: the connected integrality-gap family and seeded
//! random instances for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, ModelError, Result};
use crate::model::{CapacityMode, GraphInstance, InstanceParts, MetricInstance, MetricParts, Mode};
use crate::thresholding::threshold_graph;

/// The gap family for one `r`, in both metric and graphic form.
#[derive(Debug, Clone)]
pub struct GapInstance {
    pub r: usize,
    /// Path length parameter, `2r`.
    pub n: usize,
    pub instance: MetricInstance,
    pub graph: GraphInstance,
    /// Facility indices of `f_{1,1}` and `f_{2,1}` in `graph`.
    pub skeleton: Vec<usize>,
}

impl GapInstance {
    pub fn facility(&self, side: usize, j: usize) -> usize {
        self.graph
            .facility_index(&format!("f{side}_{j}"))
            .expect("gap facility")
    }

    pub fn leaf_client(&self, side: usize, j: usize) -> usize {
        self.graph
            .client_index(&format!("c{side}_{j:04}"))
            .expect("gap client")
    }
}

/// Builds the connected instance on which the relaxation is feasible but no
/// distance-`r` solution exists.
///
/// A path of `N + 1 = 2r + 1` vertices joins clients `c1` and `c2`, with
/// interior vertices alternating facility/client. Facilities `f{i}_1`,
/// `f{i}_2` hang off `c{i}` and share `6N` private clients `c{i}_{j}`. All
/// capacities are `4N`, `k = 3`, `p = 12N`.
pub fn gen_gap(r: usize) -> Result<GapInstance> {
    if r < 2 {
        return Err(Error::Model(ModelError::Format(format!(
            "gap instance needs r >= 2, got {r}"
        ))));
    }
    let n = 2 * r;
    let cap = 4 * n as u64;
    let mut clients = vec!["c1".to_string(), "c2".to_string()];
    let mut facilities = Vec::new();
    let mut edges = Vec::new();
    // Path vertices v_0 = c1, ..., v_N = c2.
    let path: Vec<String> = (0..=n)
        .map(|i| match i {
            0 => "c1".to_string(),
            _ if i == n => "c2".to_string(),
            _ if i % 2 == 1 => format!("fp{i:03}"),
            _ => format!("cp{i:03}"),
        })
        .collect();
    for (i, id) in path.iter().enumerate().take(n).skip(1) {
        if i % 2 == 1 {
            facilities.push((id.clone(), cap));
        } else {
            clients.push(id.clone());
        }
    }
    for w in path.windows(2) {
        // Odd positions are facilities.
        let (a, b) = (&w[0], &w[1]);
        if a.starts_with('f') {
            edges.push((b.clone(), a.clone()));
        } else {
            edges.push((a.clone(), b.clone()));
        }
    }
    for side in 1..=2 {
        for j in 1..=2 {
            let f = format!("f{side}_{j}");
            facilities.push((f.clone(), cap));
            edges.push((format!("c{side}"), f));
        }
        for j in 1..=6 * n {
            let c = format!("c{side}_{j:04}");
            clients.push(c.clone());
            for fj in 1..=2 {
                edges.push((c.clone(), format!("f{side}_{fj}")));
            }
        }
    }
    let instance = MetricInstance::new(InstanceParts {
        mode: Mode::Supplier,
        capacity_mode: CapacityMode::Hard,
        k: 3,
        p: 12 * n,
        clients,
        facilities,
        metric: MetricParts::Graph { edges },
    })?;
    let graph = threshold_graph(&instance, 1.0);
    let skeleton = ["f1_1", "f2_1"]
        .iter()
        .map(|id| graph.facility_index(id).unwrap())
        .collect();
    Ok(GapInstance {
        r,
        n,
        instance,
        graph,
        skeleton,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RandomModel {
    /// Points on a `grid x grid` lattice with L1 distances.
    Metric { grid: u32 },
    /// Random bipartite graph with hop distances.
    Graph { edge_prob: f64, connected: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomParams {
    pub clients: usize,
    pub facilities: usize,
    pub k: usize,
    pub p: usize,
    pub cap_range: (u64, u64),
    pub model: RandomModel,
    pub mode: Mode,
    pub capacity_mode: CapacityMode,
    pub seed: u64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            clients: 10,
            facilities: 5,
            k: 2,
            p: 6,
            cap_range: (1, 5),
            model: RandomModel::Metric { grid: 10 },
            mode: Mode::Supplier,
            capacity_mode: CapacityMode::Hard,
            seed: 0,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Model(ModelError::Format(msg.into()))
}

/// A reproducible random instance. The same parameters always give the same instance.
pub fn gen_random(params: &RandomParams) -> Result<MetricInstance> {
    let RandomParams {
        clients: nc,
        facilities: nf,
        k,
        p,
        cap_range,
        model,
        mode,
        capacity_mode,
        seed,
    } = params.clone();
    if cap_range.0 > cap_range.1 {
        return Err(bad("empty capacity range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Center mode draws one point set; clients and facilities coincide.
    let (client_ids, fac_ids): (Vec<String>, Vec<String>) = match mode {
        Mode::Supplier => (
            (0..nc).map(|i| format!("c{i:03}")).collect(),
            (0..nf).map(|j| format!("f{j:03}")).collect(),
        ),
        Mode::Center => {
            if nc != nf {
                return Err(bad("center mode needs clients == facilities"));
            }
            let ids: Vec<String> = (0..nc).map(|i| format!("v{i:03}")).collect();
            (ids.clone(), ids)
        }
    };
    let facilities: Vec<(String, u64)> = fac_ids
        .iter()
        .map(|id| (id.clone(), rng.gen_range(cap_range.0..=cap_range.1)))
        .collect();
    let metric = match model {
        RandomModel::Metric { grid } => {
            if grid == 0 {
                return Err(bad("grid must be positive"));
            }
            let mut order: Vec<String> = client_ids.clone();
            if mode == Mode::Supplier {
                order.extend(fac_ids.iter().cloned());
            }
            let pts: Vec<(i64, i64)> = order
                .iter()
                .map(|_| (rng.gen_range(0..grid) as i64, rng.gen_range(0..grid) as i64))
                .collect();
            let values = pts
                .iter()
                .map(|a| {
                    pts.iter()
                        .map(|b| ((a.0 - b.0).abs() + (a.1 - b.1).abs()) as f64)
                        .collect()
                })
                .collect();
            MetricParts::Matrix { order, values }
        }
        RandomModel::Graph {
            edge_prob,
            connected,
        } => {
            if mode == Mode::Center {
                return Err(bad("graph model is bipartite; use supplier mode"));
            }
            if connected && (nc == 0 || nf == 0) && nc + nf > 1 {
                return Err(bad("a connected bipartite graph needs both sides"));
            }
            let mut edges = Vec::new();
            if connected && nc + nf > 1 {
                // Random bipartite spanning tree: each vertex after the first
                // two attaches to an earlier vertex of the other side.
                let mut cs: Vec<usize> = (1..nc).collect();
                let mut fs: Vec<usize> = (1..nf).collect();
                cs.shuffle(&mut rng);
                fs.shuffle(&mut rng);
                let mut seen_c = vec![0usize];
                let mut seen_f = vec![0usize];
                edges.push((0, 0));
                let mut order: Vec<bool> = cs
                    .iter()
                    .map(|_| true)
                    .chain(fs.iter().map(|_| false))
                    .collect();
                order.shuffle(&mut rng);
                let (mut ci, mut fi) = (0, 0);
                for is_client in order {
                    if is_client {
                        let c = cs[ci];
                        ci += 1;
                        let f = *seen_f.choose(&mut rng).unwrap();
                        edges.push((c, f));
                        seen_c.push(c);
                    } else {
                        let f = fs[fi];
                        fi += 1;
                        let c = *seen_c.choose(&mut rng).unwrap();
                        edges.push((c, f));
                        seen_f.push(f);
                    }
                }
            }
            for c in 0..nc {
                for f in 0..nf {
                    if rng.gen_bool(edge_prob.clamp(0.0, 1.0)) {
                        edges.push((c, f));
                    }
                }
            }
            MetricParts::Graph {
                edges: edges
                    .into_iter()
                    .map(|(c, f)| (client_ids[c].clone(), fac_ids[f].clone()))
                    .collect(),
            }
        }
    };
    let client_list = if mode == Mode::Center {
        Vec::new()
    } else {
        client_ids
    };
    Ok(MetricInstance::new(InstanceParts {
        mode,
        capacity_mode,
        k,
        p,
        clients: client_list,
        facilities,
        metric,
    })?)
}
