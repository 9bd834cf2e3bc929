//! Grid descriptions and their JSON form.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::num::{format_rational, is_probability, parse_rational, rational_to_f64, Rational, RationalText};
use crate::scenario::parse_json;

pub const DEFAULT_PRUNE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GridNode {
    pub id: String,
    /// Positive for production, negative for consumption.
    pub balance: Rational,
    pub criticality_rate: f64,
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerEdge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub capacity: Rational,
    pub p_base: Rational,
    pub k: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoEdge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub p_f: Rational,
    /// Power edge switched off when this edge is compromised.
    pub kills: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nodes: Vec<GridNode>,
    pub power_edges: Vec<PowerEdge>,
    pub info_edges: Vec<InfoEdge>,
    pub cycle_length: Rational,
    pub initially_failed: BTreeSet<usize>,
    pub group_factors: BTreeMap<String, f64>,
    pub prune_floor: f64,
}

impl GridSpec {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.power_edges.iter().position(|e| e.id == id)
    }

    pub fn info_index(&self, id: &str) -> Option<usize> {
        self.info_edges.iter().position(|e| e.id == id)
    }

    pub fn is_producer(&self, node: usize) -> bool {
        self.nodes[node].balance > Rational::zero()
    }

    /// Non-producing nodes in the order their demand is routed.
    pub fn consumers(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.nodes.len()).filter(|v| !self.is_producer(*v)).collect();
        order.sort_by(|a, b| self.nodes[*a].id.cmp(&self.nodes[*b].id));
        order
    }

    /// Members of each correlation group, by group name.
    pub fn groups(&self) -> BTreeMap<String, Vec<usize>> {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(g) = &n.group {
                groups.entry(g.clone()).or_default().push(i);
            }
        }
        groups
    }

    pub fn to_json(&self) -> String {
        let text = |r: &Rational| RationalText(format_rational(r));
        let doc = GridDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    balance: text(&n.balance),
                    criticality_rate: RationalText(n.criticality_rate.to_string()),
                    group: n.group.clone(),
                })
                .collect(),
            power_edges: self
                .power_edges
                .iter()
                .map(|e| PowerEdgeDoc {
                    id: e.id.clone(),
                    from: self.nodes[e.from].id.clone(),
                    to: self.nodes[e.to].id.clone(),
                    capacity: text(&e.capacity),
                    p_base: text(&e.p_base),
                    k: text(&e.k),
                })
                .collect(),
            info_edges: self
                .info_edges
                .iter()
                .map(|f| InfoEdgeDoc {
                    id: f.id.clone(),
                    from: self.nodes[f.from].id.clone(),
                    to: self.nodes[f.to].id.clone(),
                    p_f: text(&f.p_f),
                    kills: self.power_edges[f.kills].id.clone(),
                })
                .collect(),
            cycle_length: text(&self.cycle_length),
            initially_failed: self
                .initially_failed
                .iter()
                .map(|e| self.power_edges[*e].id.clone())
                .collect(),
            group_factors: self
                .group_factors
                .iter()
                .map(|(g, f)| (g.clone(), RationalText(f.to_string())))
                .collect(),
            prune_floor: (self.prune_floor != DEFAULT_PRUNE_FLOOR).then(|| RationalText(self.prune_floor.to_string())),
        };
        serde_json::to_string_pretty(&doc).expect("grid serializes")
    }
}

/// Parses and validates a grid document; every problem is reported with
/// its element path.
pub fn load_grid(text: &str) -> Result<GridSpec> {
    let doc: GridDoc = parse_json(text)?;
    doc.into_spec()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    nodes: Vec<NodeDoc>,
    power_edges: Vec<PowerEdgeDoc>,
    #[serde(default)]
    info_edges: Vec<InfoEdgeDoc>,
    cycle_length: RationalText,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    initially_failed: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    group_factors: BTreeMap<String, RationalText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prune_floor: Option<RationalText>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    balance: RationalText,
    criticality_rate: RationalText,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerEdgeDoc {
    id: String,
    from: String,
    to: String,
    capacity: RationalText,
    p_base: RationalText,
    k: RationalText,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InfoEdgeDoc {
    id: String,
    from: String,
    to: String,
    p_f: RationalText,
    kills: String,
}

struct Checker {
    diagnostics: Vec<Diagnostic>,
}

impl Checker {
    fn push(&mut self, path: String, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic::new(path, message));
    }

    fn rational(&mut self, path: String, text: &RationalText) -> Rational {
        match parse_rational(&text.0) {
            Ok(r) => r,
            Err(e) => {
                self.push(path, e.0);
                Rational::zero()
            }
        }
    }

    fn probability(&mut self, path: String, text: &RationalText) -> Rational {
        let p = self.rational(path.clone(), text);
        if !is_probability(&p) {
            self.push(path, format!("probability {} outside [0, 1]", format_rational(&p)));
        }
        p
    }

    fn real(&mut self, path: String, text: &RationalText) -> f64 {
        let r = self.rational(path.clone(), text);
        if r < Rational::zero() {
            self.push(path, "must be non-negative");
        }
        rational_to_f64(&r)
    }

    fn node(&mut self, path: String, id: &str, index: &HashMap<&str, usize>) -> usize {
        match index.get(id) {
            Some(i) => *i,
            None => {
                self.push(path, format!("unknown node `{id}`"));
                0
            }
        }
    }
}

impl GridDoc {
    fn into_spec(self) -> Result<GridSpec> {
        let mut ck = Checker {
            diagnostics: Vec::new(),
        };
        let mut node_index = HashMap::new();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if node_index.insert(n.id.as_str(), i).is_some() {
                ck.push(format!("nodes[{i}].id"), format!("duplicate node `{}`", n.id));
            }
            nodes.push(GridNode {
                id: n.id.clone(),
                balance: ck.rational(format!("nodes[{i}].balance"), &n.balance),
                criticality_rate: ck.real(format!("nodes[{i}].criticality_rate"), &n.criticality_rate),
                group: n.group.clone(),
            });
        }
        if nodes.is_empty() {
            ck.push("nodes".into(), "a grid needs at least one node");
        }

        let mut edge_index = HashMap::new();
        let mut power_edges = Vec::with_capacity(self.power_edges.len());
        for (i, e) in self.power_edges.iter().enumerate() {
            if edge_index.insert(e.id.as_str(), i).is_some() {
                ck.push(format!("power_edges[{i}].id"), format!("duplicate edge `{}`", e.id));
            }
            let from = ck.node(format!("power_edges[{i}].from"), &e.from, &node_index);
            let to = ck.node(format!("power_edges[{i}].to"), &e.to, &node_index);
            if e.from == e.to {
                ck.push(format!("power_edges[{i}]"), "edge endpoints must differ");
            }
            let capacity = ck.rational(format!("power_edges[{i}].capacity"), &e.capacity);
            if capacity <= Rational::zero() {
                ck.push(format!("power_edges[{i}].capacity"), "capacity must be positive");
            }
            let k = ck.rational(format!("power_edges[{i}].k"), &e.k);
            if k < Rational::zero() {
                ck.push(format!("power_edges[{i}].k"), "overload slope must be non-negative");
            }
            power_edges.push(PowerEdge {
                id: e.id.clone(),
                from,
                to,
                capacity,
                p_base: ck.probability(format!("power_edges[{i}].p_base"), &e.p_base),
                k,
            });
        }

        let mut info_seen = BTreeSet::new();
        let mut info_edges = Vec::with_capacity(self.info_edges.len());
        for (i, f) in self.info_edges.iter().enumerate() {
            if !info_seen.insert(f.id.as_str()) || edge_index.contains_key(f.id.as_str()) {
                ck.push(format!("info_edges[{i}].id"), format!("duplicate edge `{}`", f.id));
            }
            let kills = match edge_index.get(f.kills.as_str()) {
                Some(e) => *e,
                None => {
                    ck.push(format!("info_edges[{i}].kills"), format!("unknown power edge `{}`", f.kills));
                    0
                }
            };
            info_edges.push(InfoEdge {
                id: f.id.clone(),
                from: ck.node(format!("info_edges[{i}].from"), &f.from, &node_index),
                to: ck.node(format!("info_edges[{i}].to"), &f.to, &node_index),
                p_f: ck.probability(format!("info_edges[{i}].p_f"), &f.p_f),
                kills,
            });
        }

        let cycle_length = ck.rational("cycle_length".into(), &self.cycle_length);
        if cycle_length <= Rational::zero() {
            ck.push("cycle_length".into(), "cycle length must be positive");
        }

        let mut initially_failed = BTreeSet::new();
        for (i, id) in self.initially_failed.iter().enumerate() {
            match edge_index.get(id.as_str()) {
                Some(e) => {
                    initially_failed.insert(*e);
                }
                None => ck.push(format!("initially_failed[{i}]"), format!("unknown power edge `{id}`")),
            }
        }

        let mut group_factors = BTreeMap::new();
        for (g, f) in &self.group_factors {
            let factor = ck.real(format!("group_factors.{g}"), f);
            if !nodes.iter().any(|n| n.group.as_deref() == Some(g.as_str())) {
                ck.push(format!("group_factors.{g}"), "no node belongs to this group");
            }
            group_factors.insert(g.clone(), factor);
        }
        for (i, n) in nodes.iter().enumerate() {
            if let Some(g) = &n.group {
                if !self.group_factors.contains_key(g) {
                    ck.push(format!("nodes[{i}].group"), format!("group `{g}` has no entry in group_factors"));
                }
            }
        }

        let prune_floor = match &self.prune_floor {
            Some(t) => {
                let r = ck.rational("prune_floor".into(), t);
                if r < Rational::zero() || r >= Rational::one() {
                    ck.push("prune_floor".into(), "must lie in [0, 1)");
                }
                rational_to_f64(&r)
            }
            None => DEFAULT_PRUNE_FLOOR,
        };

        if !ck.diagnostics.is_empty() {
            return Err(Error::Spec(ck.diagnostics));
        }
        Ok(GridSpec {
            nodes,
            power_edges,
            info_edges,
            cycle_length,
            initially_failed,
            group_factors,
            prune_floor,
        })
    }
}
