//! JSON file formats for instances and solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, ModelError, Result};
use crate::model::{CapacityMode, InstanceParts, MetricInstance, MetricParts, Mode, Solution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityEntry {
    pub id: String,
    pub cap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MetricSpec {
    Matrix {
        order: Vec<String>,
        values: Vec<Vec<f64>>,
    },
    Graph {
        edges: Vec<(String, String)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub capacity_mode: CapacityMode,
    pub k: usize,
    pub p: usize,
    #[serde(default)]
    pub clients: Vec<String>,
    pub facilities: Vec<FacilityEntry>,
    pub metric: MetricSpec,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<MetricInstance> {
        let metric = match self.metric {
            MetricSpec::Matrix { order, values } => MetricParts::Matrix { order, values },
            MetricSpec::Graph { edges } => MetricParts::Graph { edges },
        };
        Ok(MetricInstance::new(InstanceParts {
            mode: self.mode,
            capacity_mode: self.capacity_mode,
            k: self.k,
            p: self.p,
            clients: self.clients,
            facilities: self.facilities.into_iter().map(|f| (f.id, f.cap)).collect(),
            metric,
        })?)
    }

    pub fn from_instance(inst: &MetricInstance) -> Self {
        let parts = inst.to_parts();
        let metric = match parts.metric {
            MetricParts::Matrix { order, values } => MetricSpec::Matrix { order, values },
            MetricParts::Graph { edges } => MetricSpec::Graph { edges },
        };
        // Center-mode clients are implied by the facility list.
        let clients = if parts.mode == Mode::Center {
            Vec::new()
        } else {
            parts.clients
        };
        InstanceFile {
            mode: parts.mode,
            capacity_mode: parts.capacity_mode,
            k: parts.k,
            p: parts.p,
            clients,
            facilities: parts
                .facilities
                .into_iter()
                .map(|(id, cap)| FacilityEntry { id, cap })
                .collect(),
            metric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenEntry {
    pub id: String,
    pub mult: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub radius: f64,
    pub open: Vec<OpenEntry>,
    pub assign: Vec<(String, String)>,
}

impl From<&Solution> for SolutionFile {
    fn from(s: &Solution) -> Self {
        SolutionFile {
            radius: s.radius,
            open: s
                .open
                .iter()
                .map(|(id, &mult)| OpenEntry {
                    id: id.clone(),
                    mult,
                })
                .collect(),
            assign: s
                .assign
                .iter()
                .map(|(c, f)| (c.clone(), f.clone()))
                .collect(),
        }
    }
}

impl SolutionFile {
    pub fn into_solution(self) -> Result<Solution> {
        let mut sol = Solution {
            radius: self.radius,
            ..Default::default()
        };
        for e in self.open {
            if sol.open.insert(e.id.clone(), e.mult).is_some() {
                return Err(ModelError::DuplicateId(e.id).into());
            }
        }
        for (c, f) in self.assign {
            if sol.assign.insert(c.clone(), f).is_some() {
                return Err(ModelError::DuplicateId(c).into());
            }
        }
        Ok(sol)
    }
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Model(ModelError::Format(e.to_string()))
}

pub fn parse_instance(json: &str) -> Result<MetricInstance> {
    serde_json::from_str::<InstanceFile>(json)
        .map_err(parse_err)?
        .into_instance()
}

pub fn instance_to_json(inst: &MetricInstance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("instance serializes")
}

pub fn parse_solution(json: &str) -> Result<Solution> {
    serde_json::from_str::<SolutionFile>(json)
        .map_err(parse_err)?
        .into_solution()
}

pub fn solution_to_json(sol: &Solution) -> String {
    serde_json::to_string_pretty(&SolutionFile::from(sol)).expect("solution serializes")
}
