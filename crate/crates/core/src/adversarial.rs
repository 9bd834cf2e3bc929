//! Risk under intelligent deciders: attacker nodes maximize and defender
//! nodes minimize the expected criticality of the remaining tree, chance
//! nodes average over their distribution (expectiminimax). Each decision is
//! recorded as a 0/1 transition probability on the chosen successor.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{ModelBehavior, NodeRole};
use crate::num::{rational_to_f64, Rational};
use crate::par::Execution;
use crate::path::SimulationPath;
use crate::report::{AssignmentEntry, Mode, RiskReport};
use crate::risk::{leaf_criticalities, top_contributors, CriticalityFunction, Scored, DEFAULT_TOP_K};
use crate::tree::{Edge, Language, NodeId};

/// Chosen successor for every decision node of a tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecisionAssignment {
    choices: BTreeMap<NodeId, NodeId>,
}

impl DecisionAssignment {
    pub fn chosen(&self, node: NodeId) -> Option<NodeId> {
        self.choices.get(&node).copied()
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.choices.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxResult<S> {
    pub total_risk: f64,
    pub assignment: DecisionAssignment,
    /// Play following the decisions and, at chance nodes, the most likely
    /// successor.
    pub principal_path: SimulationPath<S>,
}

#[derive(Debug, Clone, Copy)]
pub struct MinimaxOptions {
    /// Attribute full-path criticality at the leaves when the criticality
    /// is not additive. When disabled, such criticalities are rejected on
    /// trees with decision nodes.
    pub leaf_attribution: bool,
    pub execution: Execution,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        Self {
            leaf_attribution: true,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub all_defender: f64,
    pub all_chance: f64,
    pub all_attacker: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Treatment {
    Weighted,
    Uniform,
    Max,
    Min,
}

struct Evaluation {
    values: Vec<f64>,
    choices: BTreeMap<NodeId, NodeId>,
}

/// Per-node accrued value on the incoming edge and at leaves.
struct Attribution {
    edge: Vec<f64>,
    leaf: Vec<f64>,
}

fn attribution<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
    options: &MinimaxOptions,
) -> Result<Attribution> {
    let n = language.node_count();
    let mut edge = vec![0.0; n];
    let mut leaf = vec![0.0; n];
    if c.is_additive() {
        let behavior = language.behavior();
        for id in language.node_ids() {
            let node = language.node(id);
            if let (Some(parent), Edge::Transition(_)) = (node.parent(), node.edge()) {
                let p = language.node(parent);
                edge[id.index()] = behavior.criticality(p.state(), &(node.entered_at() - p.entered_at()))?;
            }
            if node.is_leaf() {
                leaf[id.index()] =
                    behavior.criticality(node.state(), &(language.horizon() - node.entered_at()))?;
            }
        }
    } else {
        let has_decisions = language.node_ids().any(|id| language.node(id).is_decision());
        if has_decisions && !options.leaf_attribution {
            return Err(Error::NonAdditiveCriticalityUnsupported);
        }
        for (id, value) in leaf_criticalities(language, c, options.execution)? {
            leaf[id.index()] = value;
        }
    }
    Ok(Attribution { edge, leaf })
}

fn evaluate<B: ModelBehavior>(
    language: &Language<'_, B>,
    attribution: &Attribution,
    treat: impl Fn(NodeRole) -> Treatment,
) -> Evaluation {
    let mut values = vec![0.0; language.node_count()];
    let mut choices = BTreeMap::new();
    for id in language.node_ids().rev() {
        let node = language.node(id);
        if node.is_leaf() {
            values[id.index()] = attribution.leaf[id.index()];
            continue;
        }
        let kids = language.successors(id);
        let worth = |k: &NodeId| attribution.edge[k.index()] + values[k.index()];
        let treatment = if node.is_decision() {
            treat(node.role())
        } else {
            Treatment::Weighted
        };
        values[id.index()] = match treatment {
            Treatment::Weighted => kids
                .iter()
                .map(|k| rational_to_f64(language.node(*k).probability()) * worth(k))
                .sum(),
            Treatment::Uniform => kids.iter().map(worth).sum::<f64>() / kids.len() as f64,
            Treatment::Max | Treatment::Min => {
                let mut best = kids[0];
                for k in &kids[1..] {
                    let (v, bv) = (worth(k), worth(&best));
                    let better = if treatment == Treatment::Max { v > bv } else { v < bv };
                    let tie_break = v == bv && language.node(*k).state() < language.node(best).state();
                    if better || tie_break {
                        best = *k;
                    }
                }
                choices.insert(id, best);
                worth(&best)
            }
        };
    }
    Evaluation { values, choices }
}

fn principal_path<B: ModelBehavior>(
    language: &Language<'_, B>,
    choices: &BTreeMap<NodeId, NodeId>,
) -> SimulationPath<B::State> {
    let mut id = language.root();
    loop {
        let kids = language.successors(id);
        if kids.is_empty() {
            return language.path_to(id);
        }
        id = match choices.get(&id) {
            Some(chosen) => *chosen,
            None => {
                let mut best = kids[0];
                for k in &kids[1..] {
                    if language.node(*k).probability() > language.node(best).probability() {
                        best = *k;
                    }
                }
                best
            }
        };
    }
}

pub fn minimax_risk<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
) -> Result<MinimaxResult<B::State>> {
    minimax_risk_with(language, c, &MinimaxOptions::default())
}

/// Root value of the expectiminimax recursion. With additive criticality
/// each transition contributes the loss of the state it leaves; otherwise
/// full-path criticality is attributed at the leaves.
pub fn minimax_risk_with<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
    options: &MinimaxOptions,
) -> Result<MinimaxResult<B::State>> {
    let attribution = attribution(language, c, options)?;
    let eval = evaluate(language, &attribution, |role| match role {
        NodeRole::Attacker => Treatment::Max,
        NodeRole::Defender => Treatment::Min,
        NodeRole::Chance => Treatment::Weighted,
    });
    Ok(MinimaxResult {
        total_risk: eval.values[language.root().index()],
        principal_path: principal_path(language, &eval.choices),
        assignment: DecisionAssignment {
            choices: eval.choices,
        },
    })
}

/// Re-evaluates the tree with every decision node acting as a defender, as
/// a uniform chance node, and as an attacker.
pub fn bound_suite<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
) -> Result<Bounds> {
    let attribution = attribution(language, c, &MinimaxOptions::default())?;
    let root = language.root().index();
    Ok(Bounds {
        all_defender: evaluate(language, &attribution, |_| Treatment::Min).values[root],
        all_chance: evaluate(language, &attribution, |_| Treatment::Uniform).values[root],
        all_attacker: evaluate(language, &attribution, |_| Treatment::Max).values[root],
    })
}

/// Leaf probabilities with 0/1 substituted at decision nodes.
pub fn assigned_probabilities<B: ModelBehavior>(
    language: &Language<'_, B>,
    assignment: &DecisionAssignment,
) -> Vec<Rational> {
    let mut reach = vec![Rational::zero(); language.node_count()];
    reach[0] = Rational::one();
    for id in language.node_ids().skip(1) {
        let node = language.node(id);
        let parent = node.parent().expect("non-root has parent");
        let local = if language.node(parent).is_decision() {
            if assignment.chosen(parent) == Some(id) {
                Rational::one()
            } else {
                Rational::zero()
            }
        } else {
            node.probability().clone()
        };
        reach[id.index()] = &reach[parent.index()] * local;
    }
    reach
}

/// Aggregate risk of the tree with the assignment's 0/1 probabilities
/// substituted at decision nodes.
pub fn aggregate_under_assignment<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
    assignment: &DecisionAssignment,
) -> Result<f64> {
    let reach = assigned_probabilities(language, assignment);
    Ok(leaf_criticalities(language, c, Execution::default())?
        .into_iter()
        .map(|(leaf, crit)| rational_to_f64(&reach[leaf.index()]) * crit)
        .sum())
}

/// Report for a minimax evaluation: contributors are weighted by the
/// decision-substituted path probabilities.
pub fn minimax_report<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
    result: &MinimaxResult<B::State>,
    top_k: Option<usize>,
) -> Result<RiskReport> {
    let behavior = language.behavior();
    let reach = assigned_probabilities(language, &result.assignment);
    let scored: Vec<_> = leaf_criticalities(language, c, Execution::default())?
        .into_iter()
        .filter(|(leaf, _)| !reach[leaf.index()].is_zero())
        .map(|(leaf, criticality)| Scored {
            leaf,
            probability: reach[leaf.index()].clone(),
            criticality,
            risk: rational_to_f64(&reach[leaf.index()]) * criticality,
        })
        .collect();
    let mut report = RiskReport::new(Mode::Minimax, language.horizon(), c.descriptor());
    report.total_risk = result.total_risk;
    report.path_count = language.path_count();
    report.top_contributors = top_contributors(language, scored, top_k.unwrap_or(DEFAULT_TOP_K));
    report.assignment = Some(
        result
            .assignment
            .iter()
            .map(|(node, chosen)| AssignmentEntry {
                node_trace: language
                    .lineage(node)
                    .into_iter()
                    .map(|n| behavior.state_name(language.node(n).state()))
                    .collect(),
                role: language.node(node).role().to_string(),
                chosen: behavior.state_name(language.node(chosen).state()),
            })
            .collect(),
    );
    Ok(report)
}
