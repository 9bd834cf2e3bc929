//! Serializable assessment reports.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::ModelBehavior;
use crate::num::{format_rational, Rational};
use crate::path::SimulationPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Exact,
    Minimax,
    MonteCarlo,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "EXACT",
            Mode::Minimax => "MINIMAX",
            Mode::MonteCarlo => "MONTE_CARLO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub state: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<String>,
}

/// Renders a path as its initial state followed by one step per transition.
pub fn trace_of<B: ModelBehavior>(behavior: &B, path: &SimulationPath<B::State>) -> Vec<TraceStep> {
    std::iter::once(TraceStep {
        state: behavior.state_name(&path.initial),
        lifetime: None,
        events: Vec::new(),
    })
    .chain(path.elements.iter().map(|e| TraceStep {
        state: behavior.state_name(&e.state),
        lifetime: Some(format_rational(&e.lifetime)),
        events: e.events.names(),
    }))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contributor {
    /// Exact path probability as `p/q`.
    pub probability: String,
    pub criticality: f64,
    pub risk: f64,
    pub trace: Vec<TraceStep>,
    pub residual: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorBlock {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
    pub rng: String,
    pub min_criticality: f64,
    pub max_criticality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentEntry {
    pub node_trace: Vec<String>,
    pub role: String,
    pub chosen: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub total_risk: f64,
    pub horizon: String,
    pub mode: Mode,
    pub path_count: usize,
    pub criticality: String,
    /// Exact sum of enumerated path probabilities (EXACT mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability_mass: Option<String>,
    pub top_contributors: Vec<Contributor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<AssignmentEntry>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl RiskReport {
    pub fn new(mode: Mode, horizon: &Rational, criticality: String) -> Self {
        Self {
            total_risk: 0.0,
            horizon: format_rational(horizon),
            mode,
            path_count: 0,
            criticality,
            probability_mass: None,
            top_contributors: Vec::new(),
            estimator: None,
            assignment: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
