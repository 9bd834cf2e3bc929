//! Path probabilities, criticalities and the aggregate risk measure
//! `R(h) = Σ p(τ)·c(τ)` over all simulation paths up to the horizon.

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::model::ModelBehavior;
use crate::num::{format_rational, parse_rational, rational_to_f64, Rational, RationalText};
use crate::par::{self, Execution};
use crate::path::SimulationPath;
use crate::report::{trace_of, Contributor, Mode, RiskReport};
use crate::scenario::Scenario;
use crate::tree::{build_tree_with, Language, NodeId, TreeConfig};

pub const DEFAULT_TOP_K: usize = 20;

/// A state together with when it was entered and how long it was held.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Effect<S> {
    pub state: S,
    pub start: Rational,
    pub dwell: Rational,
}

/// Temporally ordered effects of one path; the last one is the residual
/// dwell up to the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectSequence<S> {
    pub effects: Vec<Effect<S>>,
}

impl<S> EffectSequence<S> {
    pub fn empty() -> Self {
        Self { effects: Vec::new() }
    }
}

/// Projects a path onto the states it visits with their actual dwell times.
pub fn effect_sequence<S: Clone + PartialEq + fmt::Debug>(path: &SimulationPath<S>) -> EffectSequence<S> {
    let mut effects = Vec::with_capacity(path.elements.len() + 1);
    let mut state = path.initial.clone();
    let mut start = Rational::zero();
    for e in &path.elements {
        effects.push(Effect {
            state: std::mem::replace(&mut state, e.state.clone()),
            start: start.clone(),
            dwell: e.lifetime.clone(),
        });
        start += &e.lifetime;
    }
    effects.push(Effect {
        state,
        start,
        dwell: path.residual.clone(),
    });
    EffectSequence { effects }
}

/// Non-negative loss attached to an effect sequence.
pub trait CriticalityFunction<S>: Sync {
    fn evaluate(&self, effects: &EffectSequence<S>) -> Result<f64>;

    fn descriptor(&self) -> String;

    /// True when the value is the plain sum of per-effect criticalities
    /// given by the model, which allows recursive evaluation on the tree.
    fn is_additive(&self) -> bool {
        false
    }
}

/// Uncorrelated baseline: `Σ_j criticality(q_j, t_j)`.
pub struct AdditiveCriticality<'b, B> {
    behavior: &'b B,
}

pub fn additive_criticality<B: ModelBehavior>(behavior: &B) -> AdditiveCriticality<'_, B> {
    AdditiveCriticality { behavior }
}

impl<B: ModelBehavior> CriticalityFunction<B::State> for AdditiveCriticality<'_, B> {
    fn evaluate(&self, effects: &EffectSequence<B::State>) -> Result<f64> {
        effects
            .effects
            .iter()
            .try_fold(0.0, |acc, e| Ok(acc + self.behavior.criticality(&e.state, &e.dwell)?))
    }

    fn descriptor(&self) -> String {
        "additive".to_string()
    }

    fn is_additive(&self) -> bool {
        true
    }
}

/// Where the labels of a correlation rule must co-occur.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleScope {
    /// All labels carried by one and the same effect.
    Simultaneous,
    /// Each label somewhere on the path (optionally within a time window).
    #[default]
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combinator {
    Multiply(f64),
    /// Adds a bonus (possibly negative); the result is clamped at zero.
    Add(f64),
}

impl Combinator {
    pub fn apply(self, value: f64) -> f64 {
        match self {
            Combinator::Multiply(f) => value * f,
            Combinator::Add(b) => (value + b).max(0.0),
        }
    }
}

/// Serializable correlation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationRuleSpec {
    pub labels: Vec<String>,
    #[serde(default)]
    pub scope: RuleScope,
    /// Maximum time separation between occurrences (`Path` scope only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within: Option<RationalText>,
    pub combinator: Combinator,
}

impl CorrelationRuleSpec {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Structural problems, independent of any model.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        if self.labels.is_empty() {
            diags.push(Diagnostic::new("labels", "rule needs at least one label"));
        }
        match self.combinator {
            Combinator::Multiply(f) if !(f >= 0.0 && f.is_finite()) => {
                diags.push(Diagnostic::new("combinator", format!("factor {f} must be a finite non-negative number")));
            }
            Combinator::Add(b) if !b.is_finite() => {
                diags.push(Diagnostic::new("combinator", "bonus must be finite"));
            }
            _ => {}
        }
        if let Some(w) = &self.within {
            match parse_rational(&w.0) {
                Ok(v) if v >= Rational::zero() => {
                    if self.scope == RuleScope::Simultaneous {
                        diags.push(Diagnostic::new("within", "window is only meaningful for path scope"));
                    }
                }
                Ok(_) => diags.push(Diagnostic::new("within", "window must be non-negative")),
                Err(e) => diags.push(Diagnostic::new("within", e.to_string())),
            }
        }
        diags
    }

    fn compile(&self) -> Result<CorrelationRule> {
        if let Some(d) = self.diagnostics().into_iter().next() {
            return Err(Error::InvalidRule(d.to_string()));
        }
        Ok(CorrelationRule {
            labels: self.labels.clone(),
            scope: self.scope,
            within: self.within.as_ref().map(|w| parse_rational(&w.0).expect("validated")),
            combinator: self.combinator,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRule {
    pub labels: Vec<String>,
    pub scope: RuleScope,
    pub within: Option<Rational>,
    pub combinator: Combinator,
}

impl CorrelationRule {
    pub fn new(labels: Vec<String>, scope: RuleScope, within: Option<Rational>, combinator: Combinator) -> Self {
        Self {
            labels,
            scope,
            within,
            combinator,
        }
    }

    fn matches(&self, labelled: &[(Vec<String>, &Rational, Rational)]) -> bool {
        match self.scope {
            RuleScope::Simultaneous => labelled
                .iter()
                .any(|(labels, _, _)| self.labels.iter().all(|l| labels.contains(l))),
            RuleScope::Path => {
                let occurrences: Vec<Vec<(&Rational, &Rational)>> = self
                    .labels
                    .iter()
                    .map(|l| {
                        labelled
                            .iter()
                            .filter(|(labels, _, _)| labels.contains(l))
                            .map(|(_, start, end)| (*start, end))
                            .collect()
                    })
                    .collect();
                if occurrences.iter().any(Vec::is_empty) {
                    return false;
                }
                match &self.within {
                    None => true,
                    Some(window) => within_window(&occurrences, 0, None, None, window),
                }
            }
        }
    }
}

/// Searches for one occurrence per label such that the latest start minus
/// the earliest end stays within `window` (pairwise interval gaps ≤ window).
fn within_window(
    occurrences: &[Vec<(&Rational, &Rational)>],
    index: usize,
    latest_start: Option<&Rational>,
    earliest_end: Option<&Rational>,
    window: &Rational,
) -> bool {
    if index == occurrences.len() {
        return true;
    }
    occurrences[index].iter().any(|(start, end)| {
        let ls = latest_start.map_or(*start, |s| s.max(*start));
        let ee = earliest_end.map_or(*end, |e| e.min(*end));
        if ls > ee && ls - ee > *window {
            return false;
        }
        within_window(occurrences, index + 1, Some(ls), Some(ee), window)
    })
}

/// A base criticality wrapped with correlation rules applied in order.
pub struct CorrelatedCriticality<'c, B: ModelBehavior> {
    base: Box<dyn CriticalityFunction<B::State> + 'c>,
    rules: Vec<CorrelationRule>,
    behavior: &'c B,
}

/// Wraps `base` with `rules`; rules must name labels the model knows.
pub fn correlated_criticality<'c, B: ModelBehavior>(
    behavior: &'c B,
    base: Box<dyn CriticalityFunction<B::State> + 'c>,
    rules: &[CorrelationRuleSpec],
) -> Result<CorrelatedCriticality<'c, B>> {
    let compiled = rules
        .iter()
        .map(CorrelationRuleSpec::compile)
        .collect::<Result<Vec<_>>>()?;
    for rule in &compiled {
        if let Some(unknown) = rule.labels.iter().find(|l| !behavior.is_known_label(l)) {
            return Err(Error::InvalidRule(format!("unknown state or label `{unknown}`")));
        }
    }
    Ok(CorrelatedCriticality {
        base,
        rules: compiled,
        behavior,
    })
}

impl<B: ModelBehavior> CorrelatedCriticality<'_, B> {
    pub fn rules(&self) -> &[CorrelationRule] {
        &self.rules
    }
}

impl<B: ModelBehavior> CriticalityFunction<B::State> for CorrelatedCriticality<'_, B> {
    fn evaluate(&self, effects: &EffectSequence<B::State>) -> Result<f64> {
        let mut value = self.base.evaluate(effects)?;
        if self.rules.is_empty() {
            return Ok(value);
        }
        let labelled = effects
            .effects
            .iter()
            .map(|e| Ok((self.behavior.labels(&e.state)?, &e.start, &e.start + &e.dwell)))
            .collect::<Result<Vec<_>>>()?;
        for rule in &self.rules {
            if rule.matches(&labelled) {
                value = rule.combinator.apply(value);
            }
        }
        Ok(value)
    }

    fn descriptor(&self) -> String {
        if self.rules.is_empty() {
            self.base.descriptor()
        } else {
            format!("{}+correlated({} rules)", self.base.descriptor(), self.rules.len())
        }
    }

    fn is_additive(&self) -> bool {
        self.rules.is_empty() && self.base.is_additive()
    }
}

/// Path probability and criticality, and their product.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRisk<S> {
    pub path: SimulationPath<S>,
    pub probability: Rational,
    pub criticality: f64,
    pub risk: f64,
}

/// Product of the local transition probabilities along `path`.
pub fn path_probability<B: ModelBehavior>(
    language: &Language<'_, B>,
    path: &SimulationPath<B::State>,
) -> Result<Rational> {
    let leaf = language.find_leaf(path).ok_or(Error::PathNotInLanguage)?;
    Ok(language.node(leaf).reach().clone())
}

pub fn path_risk<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    path: &SimulationPath<B::State>,
    c: &C,
) -> Result<PathRisk<B::State>> {
    let probability = path_probability(language, path)?;
    let criticality = c.evaluate(&effect_sequence(path))?;
    Ok(PathRisk {
        path: path.clone(),
        risk: rational_to_f64(&probability) * criticality,
        probability,
        criticality,
    })
}

/// Criticality of every leaf path, in enumeration order.
pub fn leaf_criticalities<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
    execution: Execution,
) -> Result<Vec<(NodeId, f64)>> {
    let leaves = language.leaves();
    par::map(execution, &leaves, |leaf| {
        let path = language.path_to(*leaf);
        Ok((*leaf, c.evaluate(&effect_sequence(&path))?))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct AggregateOptions {
    pub top_k: usize,
    pub execution: Execution,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            execution: Execution::default(),
        }
    }
}

/// Exact `R(h)`: sums `p(τ)·c(τ)` over every enumerated path.
pub fn aggregate_risk<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
) -> Result<RiskReport> {
    aggregate_risk_with(language, c, &AggregateOptions::default())
}

pub fn aggregate_risk_with<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    language: &Language<'_, B>,
    c: &C,
    options: &AggregateOptions,
) -> Result<RiskReport> {
    let leaves = leaf_criticalities(language, c, options.execution)?;
    let mut report = RiskReport::new(Mode::Exact, language.horizon(), c.descriptor());
    let mut mass = Rational::zero();
    let mut scored = Vec::with_capacity(leaves.len());
    for (leaf, criticality) in leaves {
        let p = language.node(leaf).reach();
        mass += p;
        let risk = rational_to_f64(p) * criticality;
        report.total_risk += risk;
        scored.push(Scored {
            leaf,
            probability: p.clone(),
            criticality,
            risk,
        });
    }
    report.path_count = scored.len();
    report.probability_mass = Some(format_rational(&mass));
    report.top_contributors = top_contributors(language, scored, options.top_k);
    Ok(report)
}

pub(crate) struct Scored {
    pub leaf: NodeId,
    pub probability: Rational,
    pub criticality: f64,
    pub risk: f64,
}

/// The `k` largest contributions; ties keep enumeration order.
pub(crate) fn top_contributors<B: ModelBehavior>(
    language: &Language<'_, B>,
    mut scored: Vec<Scored>,
    k: usize,
) -> Vec<Contributor> {
    scored.sort_by(|a, b| b.risk.total_cmp(&a.risk));
    scored
        .into_iter()
        .take(k)
        .map(|s| {
            let path = language.path_to(s.leaf);
            Contributor {
                probability: format_rational(&s.probability),
                criticality: s.criticality,
                risk: s.risk,
                trace: trace_of(language.behavior(), &path),
                residual: format_rational(&path.residual),
            }
        })
        .collect()
}

/// `R(q, h)`: the aggregate risk of the tree rooted at `q`.
pub fn initial_state_risk<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    behavior: &B,
    q: B::State,
    scenario: &Scenario,
    c: &C,
    config: &TreeConfig,
) -> Result<RiskReport> {
    let language = build_tree_with(behavior, q, scenario, config)?;
    aggregate_risk_with(
        &language,
        c,
        &AggregateOptions {
            execution: config.execution,
            ..AggregateOptions::default()
        },
    )
}
