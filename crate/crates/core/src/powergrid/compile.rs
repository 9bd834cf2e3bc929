//! The grid as a stochastic discrete-event model.
//!
//! An operating state lives for one cycle; at its end every surviving
//! power edge fails independently with its load-dependent probability.
//! Half-way through each cycle an occasion gives the information network a
//! chance to be compromised: stochastically with each edge's `p_f`, or, in
//! adversarial mode, by an attacker picking which edge to try. After a
//! topology change in adversarial mode, a defender picks among the
//! available equal-hop routings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{EventId, EventSet, ModelBehavior, NodeRole, TransitionDistribution};
use crate::num::{format_rational, rational_from_int, rational_to_f64, Duration, Rational};
use crate::risk::{
    additive_criticality, correlated_criticality, Combinator, CorrelatedCriticality, CorrelationRuleSpec, RuleScope,
};
use crate::scenario::{Scenario, ScheduledOccasion};
use crate::tree::{Branching, Language};

use super::flow::{failure_probability, routing_plans, solve_flow, FlowSolution};
use super::spec::GridSpec;

pub const ATTACK_WINDOW: &str = "attack_window";
pub const MAX_ROUTING_PLANS: usize = 8;
const MAX_STOCHASTIC_INFO_EDGES: usize = 16;

/// A set of newly failed power edges with its probability.
pub type FailureOutcome = (BTreeSet<usize>, Rational);

pub const FLOW_SOLVER_DESCRIPTION: &str =
    "shortest-hop demand routing in node-id order; equal-hop ties by smallest max load ratio, then edge-id sequence; no power-flow physics";
pub const FAILURE_MODEL_DESCRIPTION: &str =
    "p_e = min(1, p_base + k * max(0, load/capacity - 1)), independent per edge per cycle, permanent";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackMode {
    Stochastic,
    Adversarial,
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMode::Stochastic => "STOCHASTIC",
            AttackMode::Adversarial => "ADVERSARIAL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Operating,
    AttackerTurn,
    /// Attack on the given information edge under way.
    Attempt(usize),
    DefenderTurn,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct StateKey {
    phase: Phase,
    failed: BTreeSet<usize>,
    compromised: BTreeSet<usize>,
    /// Time already spent in the current cycle.
    offset: Rational,
    routing: Vec<u16>,
}

#[derive(Debug)]
struct Inner {
    key: StateKey,
    flow: FlowSolution,
}

/// A grid configuration together with its solved flow. Equality and order
/// consider only the configuration; the flow is derived from it.
#[derive(Debug, Clone)]
pub struct GridState(Arc<Inner>);

impl PartialEq for GridState {
    fn eq(&self, other: &Self) -> bool {
        self.0.key == other.0.key
    }
}

impl Eq for GridState {}

impl PartialOrd for GridState {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GridState {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.key.cmp(&other.0.key)
    }
}

impl std::hash::Hash for GridState {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.key.hash(state);
    }
}

impl GridState {
    pub fn phase(&self) -> Phase {
        self.0.key.phase
    }

    pub fn failed(&self) -> &BTreeSet<usize> {
        &self.0.key.failed
    }

    pub fn compromised(&self) -> &BTreeSet<usize> {
        &self.0.key.compromised
    }

    pub fn offset(&self) -> &Rational {
        &self.0.key.offset
    }

    pub fn routing(&self) -> &[u16] {
        &self.0.key.routing
    }

    pub fn flow(&self) -> &FlowSolution {
        &self.0.flow
    }

    pub fn loads(&self) -> &[Rational] {
        &self.0.flow.loads
    }

    pub fn served(&self) -> &[bool] {
        &self.0.flow.served
    }
}

/// A grid spec compiled into a model behavior.
#[derive(Debug, Clone)]
pub struct GridBehavior {
    spec: GridSpec,
    mode: AttackMode,
}

/// Compiles a validated grid. Pair it with [`GridBehavior::scenario`] and
/// [`GridBehavior::grid_criticality`] for an assessment.
pub fn compile_grid(spec: GridSpec, mode: AttackMode) -> Result<GridBehavior> {
    if mode == AttackMode::Stochastic {
        let active = spec.info_edges.iter().filter(|f| !f.p_f.is_zero()).count();
        if active > MAX_STOCHASTIC_INFO_EDGES {
            return Err(Error::InvalidConfig(format!(
                "{active} information edges with p_f > 0; at most {MAX_STOCHASTIC_INFO_EDGES} are supported"
            )));
        }
    }
    Ok(GridBehavior { spec, mode })
}

impl GridBehavior {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn mode(&self) -> AttackMode {
        self.mode
    }

    fn make(&self, key: StateKey) -> GridState {
        let flow = solve_flow(&self.spec, &key.failed, &key.routing);
        GridState(Arc::new(Inner { key, flow }))
    }

    /// The state a configuration settles into: a defender turn when the
    /// topology changed and several routings are possible (adversarial
    /// mode only), otherwise operation with the default routing.
    fn settle(&self, mut key: StateKey, topology_changed: bool) -> GridState {
        key.phase = Phase::Operating;
        if topology_changed {
            key.routing = Vec::new();
            if self.mode == AttackMode::Adversarial && routing_plans(&self.spec, &key.failed, 2).len() > 1 {
                key.phase = Phase::DefenderTurn;
            }
        }
        self.make(key)
    }

    fn compromise(&self, q: &GridState, infos: &[usize]) -> GridState {
        let mut key = q.0.key.clone();
        for f in infos {
            key.compromised.insert(*f);
            key.failed.insert(self.spec.info_edges[*f].kills);
        }
        let changed = key.failed != q.0.key.failed;
        self.settle(key, changed)
    }

    fn with_phase(&self, q: &GridState, phase: Phase, offset: Rational) -> GridState {
        let mut key = q.0.key.clone();
        key.phase = phase;
        key.offset = offset;
        self.make(key)
    }

    /// Current failure probability of every surviving power edge.
    pub fn failure_probabilities(&self, q: &GridState) -> Result<BTreeMap<usize, Rational>> {
        let mut out = BTreeMap::new();
        for (i, e) in self.spec.power_edges.iter().enumerate() {
            if !q.failed().contains(&i) {
                out.insert(i, failure_probability(&q.loads()[i], &e.capacity, &e.p_base, &e.k)?);
            }
        }
        Ok(out)
    }

    /// Sets of edges newly failing at the end of the cycle, with their
    /// renormalized probabilities, and the mass pruned below the floor
    /// before renormalization.
    pub fn cycle_outcomes(&self, q: &GridState) -> Result<(Vec<FailureOutcome>, Rational)> {
        let probs = self.failure_probabilities(q)?;
        let certain: BTreeSet<usize> = probs.iter().filter(|(_, p)| p.is_one()).map(|(e, _)| *e).collect();
        let branching: Vec<(usize, Rational)> = probs
            .into_iter()
            .filter(|(_, p)| !p.is_zero() && !p.is_one())
            .collect();
        let floor = self.spec.prune_floor;
        let mut outcomes = Vec::new();
        let mut stack = vec![(0usize, certain.clone(), Rational::one())];
        while let Some((i, set, p)) = stack.pop() {
            if floor > 0.0 && rational_to_f64(&p) < floor {
                continue;
            }
            if i == branching.len() {
                outcomes.push((set, p));
                continue;
            }
            let (e, pe) = &branching[i];
            let mut failed = set.clone();
            failed.insert(*e);
            stack.push((i + 1, failed, &p * pe));
            stack.push((i + 1, set, &p * (Rational::one() - pe)));
        }
        if outcomes.is_empty() {
            let mut set = certain;
            let mut p = Rational::one();
            for (e, pe) in &branching {
                if *pe > Rational::new(1.into(), 2.into()) {
                    set.insert(*e);
                    p *= pe;
                } else {
                    p *= Rational::one() - pe;
                }
            }
            outcomes.push((set, p));
        }
        outcomes.sort_by(|a, b| a.0.cmp(&b.0));
        let kept: Rational = outcomes.iter().map(|(_, p)| p.clone()).sum();
        let pruned = Rational::one() - &kept;
        if !pruned.is_zero() {
            for (_, p) in &mut outcomes {
                *p = &*p / &kept;
            }
        }
        Ok((outcomes, pruned))
    }

    fn available_attacks(&self, q: &GridState) -> Vec<usize> {
        (0..self.spec.info_edges.len())
            .filter(|f| !q.compromised().contains(f) && !self.spec.info_edges[*f].p_f.is_zero())
            .collect()
    }

    /// Occasions for a horizon: one per cycle, half-way through it.
    pub fn scenario(&self, horizon: Rational) -> Result<Scenario> {
        let alternatives = match self.mode {
            AttackMode::Stochastic => {
                let active: Vec<usize> = (0..self.spec.info_edges.len())
                    .filter(|f| !self.spec.info_edges[*f].p_f.is_zero())
                    .collect();
                let mut alts = Vec::new();
                for mask in 0u32..(1 << active.len()) {
                    let mut p = Rational::one();
                    let mut ids = Vec::new();
                    for (bit, f) in active.iter().enumerate() {
                        let edge = &self.spec.info_edges[*f];
                        if mask & (1 << bit) != 0 {
                            p *= &edge.p_f;
                            ids.push(edge.id.clone());
                        } else {
                            p *= Rational::one() - &edge.p_f;
                        }
                    }
                    if !p.is_zero() {
                        alts.push((EventSet::new(ids), p));
                    }
                }
                alts
            }
            AttackMode::Adversarial => {
                if self.spec.info_edges.iter().all(|f| f.p_f.is_zero()) {
                    Vec::new()
                } else {
                    vec![(EventSet::new([ATTACK_WINDOW]), Rational::one())]
                }
            }
        };
        let mut occasions = Vec::new();
        if !alternatives.is_empty() && !(alternatives.len() == 1 && alternatives[0].0.is_empty()) {
            let half = &self.spec.cycle_length / rational_from_int(2);
            let mut i = 0i64;
            loop {
                let at = &self.spec.cycle_length * rational_from_int(i) + &half;
                if at >= horizon {
                    break;
                }
                occasions.push(ScheduledOccasion {
                    at,
                    alternatives: alternatives.clone(),
                });
                i += 1;
            }
        }
        Scenario::new(occasions, horizon)
    }

    /// Rules for the correlation groups, in group-name order.
    pub fn group_rules(&self) -> Vec<CorrelationRuleSpec> {
        self.spec
            .groups()
            .into_iter()
            .map(|(g, members)| CorrelationRuleSpec {
                labels: members.iter().map(|v| out_label(&self.spec.nodes[*v].id)).collect(),
                scope: RuleScope::Simultaneous,
                within: None,
                combinator: Combinator::Multiply(self.spec.group_factors.get(&g).copied().unwrap_or(1.0)),
            })
            .collect()
    }

    /// Outage-time criticality with one multiplicative rule per group.
    pub fn grid_criticality(&self) -> Result<CorrelatedCriticality<'_, Self>> {
        correlated_criticality(self, Box::new(additive_criticality(self)), &self.group_rules())
    }

    /// Report metadata describing the solver, the failure model and the
    /// probability mass lost to pruning over the whole tree.
    pub fn metadata(&self, language: &Language<'_, Self>) -> Result<BTreeMap<String, serde_json::Value>> {
        Ok(BTreeMap::from([
            ("attack_mode".to_string(), json!(self.mode.to_string())),
            ("flow_solver".to_string(), json!(FLOW_SOLVER_DESCRIPTION)),
            ("failure_model".to_string(), json!(FAILURE_MODEL_DESCRIPTION)),
            ("prune_floor".to_string(), json!(self.spec.prune_floor)),
            ("pruned_mass".to_string(), json!(pruned_mass(language)?)),
        ]))
    }
}

fn out_label(node: &str) -> String {
    format!("out:{node}")
}

/// Tree-wide probability mass removed by pruning unlikely failure subsets.
pub fn pruned_mass(language: &Language<'_, GridBehavior>) -> Result<f64> {
    let behavior = language.behavior();
    let mut total = 0.0;
    for id in language.node_ids() {
        let node = language.node(id);
        if node.branching() == Branching::Internal && node.state().phase() == Phase::Operating {
            let (_, pruned) = behavior.cycle_outcomes(node.state())?;
            total += rational_to_f64(&(node.reach() * pruned));
        }
    }
    Ok(total)
}

fn uniform(targets: Vec<GridState>) -> Result<TransitionDistribution<GridState>> {
    let p = Rational::new(1.into(), targets.len().into());
    TransitionDistribution::new(targets.into_iter().map(|t| (t, p.clone())).collect())
}

impl ModelBehavior for GridBehavior {
    type State = GridState;

    fn initial_state(&self) -> GridState {
        self.make(StateKey {
            phase: Phase::Operating,
            failed: self.spec.initially_failed.clone(),
            compromised: BTreeSet::new(),
            offset: Rational::zero(),
            routing: Vec::new(),
        })
    }

    fn sigma(&self, q: &GridState) -> Result<Duration> {
        Ok(match q.phase() {
            Phase::Operating => Duration::Finite(&self.spec.cycle_length - q.offset()),
            _ => Duration::zero(),
        })
    }

    fn internal_dist(&self, q: &GridState) -> Result<TransitionDistribution<GridState>> {
        match q.phase() {
            Phase::Operating => {
                let (outcomes, _) = self.cycle_outcomes(q)?;
                let entries = outcomes
                    .into_iter()
                    .map(|(fresh, p)| {
                        let mut key = q.0.key.clone();
                        let changed = !fresh.is_empty();
                        key.failed.extend(fresh);
                        key.offset = Rational::zero();
                        (self.settle(key, changed), p)
                    })
                    .collect();
                TransitionDistribution::new(entries)
            }
            Phase::AttackerTurn => {
                let mut options = vec![self.with_phase(q, Phase::Operating, q.offset().clone())];
                options.extend(
                    self.available_attacks(q)
                        .into_iter()
                        .map(|f| self.with_phase(q, Phase::Attempt(f), q.offset().clone())),
                );
                uniform(options)
            }
            Phase::Attempt(f) => {
                let p = self.spec.info_edges[f].p_f.clone();
                let success = self.compromise(q, &[f]);
                if p.is_one() {
                    return Ok(TransitionDistribution::certain(success));
                }
                let failure = self.with_phase(q, Phase::Operating, q.offset().clone());
                TransitionDistribution::new(vec![(success, p.clone()), (failure, Rational::one() - p)])
            }
            Phase::DefenderTurn => uniform(
                routing_plans(&self.spec, q.failed(), MAX_ROUTING_PLANS)
                    .into_iter()
                    .map(|plan| {
                        let mut key = q.0.key.clone();
                        key.phase = Phase::Operating;
                        key.routing = plan;
                        self.make(key)
                    })
                    .collect(),
            ),
        }
    }

    fn external_dist(
        &self,
        q: &GridState,
        elapsed: &Rational,
        events: &EventSet,
    ) -> Result<Option<TransitionDistribution<GridState>>> {
        if q.phase() != Phase::Operating || events.is_empty() {
            return Ok(None);
        }
        let offset = q.offset() + elapsed;
        match self.mode {
            AttackMode::Stochastic => {
                let fresh: Vec<usize> = events
                    .iter()
                    .filter_map(|e| self.spec.info_index(e.as_str()))
                    .filter(|f| !q.compromised().contains(f))
                    .collect();
                if fresh.is_empty() {
                    return Ok(None);
                }
                let moved = self.with_phase(q, Phase::Operating, offset);
                Ok(Some(TransitionDistribution::certain(self.compromise(&moved, &fresh))))
            }
            AttackMode::Adversarial => {
                if !events.contains(&EventId::new(ATTACK_WINDOW)) || self.available_attacks(q).is_empty() {
                    return Ok(None);
                }
                Ok(Some(TransitionDistribution::certain(self.with_phase(
                    q,
                    Phase::AttackerTurn,
                    offset,
                ))))
            }
        }
    }

    fn role(&self, q: &GridState) -> Result<NodeRole> {
        Ok(match q.phase() {
            Phase::AttackerTurn => NodeRole::Attacker,
            Phase::DefenderTurn => NodeRole::Defender,
            _ => NodeRole::Chance,
        })
    }

    fn criticality(&self, q: &GridState, dwell: &Rational) -> Result<f64> {
        let rate: f64 = self
            .spec
            .nodes
            .iter()
            .zip(q.served())
            .filter(|(_, served)| !**served)
            .map(|(n, _)| n.criticality_rate)
            .sum();
        Ok(rate * rational_to_f64(dwell))
    }

    fn labels(&self, q: &GridState) -> Result<Vec<String>> {
        Ok(self
            .spec
            .nodes
            .iter()
            .zip(q.served())
            .filter(|(_, served)| !**served)
            .map(|(n, _)| out_label(&n.id))
            .collect())
    }

    fn is_known_label(&self, label: &str) -> bool {
        label
            .strip_prefix("out:")
            .is_some_and(|id| self.spec.node_index(id).is_some())
    }

    fn is_known_event(&self, event: &EventId) -> bool {
        match self.mode {
            AttackMode::Stochastic => self.spec.info_index(event.as_str()).is_some(),
            AttackMode::Adversarial => event.as_str() == ATTACK_WINDOW,
        }
    }

    fn state_name(&self, q: &GridState) -> String {
        let edges = |set: &BTreeSet<usize>, info: bool| {
            set.iter()
                .map(|i| {
                    if info {
                        self.spec.info_edges[*i].id.as_str()
                    } else {
                        self.spec.power_edges[*i].id.as_str()
                    }
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut name = match q.phase() {
            Phase::Operating => "operating".to_string(),
            Phase::AttackerTurn => "attacker".to_string(),
            Phase::Attempt(f) => format!("attempt:{}", self.spec.info_edges[f].id),
            Phase::DefenderTurn => "defender".to_string(),
        };
        let mut parts = Vec::new();
        if !q.failed().is_empty() {
            parts.push(format!("failed={{{}}}", edges(q.failed(), false)));
        }
        if !q.compromised().is_empty() {
            parts.push(format!("compromised={{{}}}", edges(q.compromised(), true)));
        }
        if !q.routing().is_empty() {
            let ranks: Vec<String> = q.routing().iter().map(u16::to_string).collect();
            parts.push(format!("routing={}", ranks.join(".")));
        }
        if !q.offset().is_zero() {
            parts.push(format!("offset={}", format_rational(q.offset())));
        }
        if !parts.is_empty() {
            name.push('(');
            name.push_str(&parts.join(";"));
            name.push(')');
        }
        name
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::ratio;
    use crate::powergrid::{cascade_depth, conservation_holds, load_grid};
    use crate::risk::{aggregate_risk, CriticalityFunction};
    use crate::tree::build_tree;

    fn fig3() -> GridSpec {
        load_grid(include_str!("../../fixtures/fig3.json")).unwrap()
    }

    fn chain(p: &str) -> GridSpec {
        load_grid(&format!(
            r#"{{
            "nodes": [
                {{"id": "P", "balance": 2, "criticality_rate": 0}},
                {{"id": "A", "balance": -1, "criticality_rate": 1}},
                {{"id": "B", "balance": -1, "criticality_rate": 1}}
            ],
            "power_edges": [
                {{"id": "e1", "from": "P", "to": "A", "capacity": 5, "p_base": "{p}", "k": 0}},
                {{"id": "e2", "from": "A", "to": "B", "capacity": 5, "p_base": "{p}", "k": 0}}
            ],
            "cycle_length": 1
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn reliable_grid_has_one_riskless_path() {
        let g = compile_grid(chain("0"), AttackMode::Stochastic).unwrap();
        let s = g.scenario(ratio(5, 1)).unwrap();
        let lang = build_tree(&g, g.initial_state(), &s).unwrap();
        assert_eq!(lang.path_count(), 1);
        let c = g.grid_criticality().unwrap();
        assert_eq!(aggregate_risk(&lang, &c).unwrap().total_risk, 0.0);
    }

    #[test]
    fn fig3_flows_and_rescheduling() {
        let g = compile_grid(fig3(), AttackMode::Stochastic).unwrap();
        let root = g.initial_state();
        assert!(root.served().iter().all(|s| *s));
        let e = |id: &str| g.spec().edge_index(id).unwrap();
        assert_eq!(root.loads()[e("e1")], ratio(11, 1));
        assert_eq!(root.loads()[e("e5")], ratio(6, 1));
        assert_eq!(g.failure_probabilities(&root).unwrap()[&e("e5")], ratio(1, 100));

        let s = g.scenario(ratio(1, 1)).unwrap();
        let lang = build_tree(&g, root.clone(), &s).unwrap();
        let attacked: Vec<_> = lang
            .successors(lang.root())
            .into_iter()
            .map(|id| lang.node(id).state().clone())
            .filter(|q| q.failed().contains(&e("e4")))
            .collect();
        assert_eq!(attacked.len(), 1);
        let after = &attacked[0];
        assert!(after.served().iter().all(|s| *s));
        assert_eq!(after.loads()[e("e5")], ratio(8, 1));
        assert!(conservation_holds(g.spec(), after.flow()));
        assert_eq!(
            g.failure_probabilities(after).unwrap()[&e("e5")],
            ratio(1, 100) + ratio(1, 6)
        );
        assert_eq!(g.state_name(after), "operating(failed={e4};compromised={f1};offset=1/2)");
    }

    #[test]
    fn cycle_outcomes_are_a_product_measure() {
        let g = compile_grid(chain("1/3"), AttackMode::Stochastic).unwrap();
        let (outcomes, pruned) = g.cycle_outcomes(&g.initial_state()).unwrap();
        assert!(pruned.is_zero());
        let p: BTreeMap<Vec<usize>, Rational> = outcomes
            .into_iter()
            .map(|(s, p)| (s.into_iter().collect(), p))
            .collect();
        assert_eq!(p[&vec![]], ratio(4, 9));
        assert_eq!(p[&vec![0]], ratio(2, 9));
        assert_eq!(p[&vec![0, 1]], ratio(1, 9));
    }

    #[test]
    fn pruning_renormalizes_and_reports_mass() {
        let mut spec = chain("1/1000");
        spec.prune_floor = 1e-5;
        let g = compile_grid(spec, AttackMode::Stochastic).unwrap();
        let (outcomes, pruned) = g.cycle_outcomes(&g.initial_state()).unwrap();
        assert_eq!(outcomes.len(), 3);
        assert_eq!(pruned, ratio(1, 1_000_000));
        let total: Rational = outcomes.iter().map(|(_, p)| p.clone()).sum();
        assert!(total.is_one());
    }

    #[test]
    fn hospital_group_triples_the_joint_outage() {
        let g = compile_grid(load_grid(include_str!("../../fixtures/hospitals.json")).unwrap(), AttackMode::Stochastic)
            .unwrap();
        let s = g.scenario(ratio(2, 1)).unwrap();
        let lang = build_tree(&g, g.initial_state(), &s).unwrap();
        assert_eq!(lang.path_count(), 4);
        let c = g.grid_criticality().unwrap();
        let plain = additive_criticality(&g);
        let with_rule = aggregate_risk(&lang, &c).unwrap().total_risk;
        let without = aggregate_risk(&lang, &plain).unwrap().total_risk;
        assert!((without - 2.0).abs() < 1e-12);
        assert!((with_rule - 2.4).abs() < 1e-12);
        for path in lang.paths() {
            let effects = crate::risk::effect_sequence(&path);
            if path.final_state().served().iter().filter(|s| !**s).count() == 2 {
                assert_eq!(c.evaluate(&effects).unwrap(), 3.0 * plain.evaluate(&effects).unwrap());
            }
        }
    }

    #[test]
    fn cascade_histogram_matches_enumeration() {
        let g = compile_grid(chain("1/2"), AttackMode::Stochastic).unwrap();
        let s = g.scenario(ratio(3, 1)).unwrap();
        let lang = build_tree(&g, g.initial_state(), &s).unwrap();
        let report = aggregate_risk(&lang, &g.grid_criticality().unwrap()).unwrap();
        let h = cascade_depth(&report, &lang).unwrap();
        assert_eq!(h, BTreeMap::from([(0, ratio(3, 4)), (1, ratio(1, 4))]));

        let mut mc = report.clone();
        mc.mode = crate::report::Mode::MonteCarlo;
        assert!(matches!(cascade_depth(&mc, &lang), Err(Error::ModeMismatch { .. })));
    }

    #[test]
    fn prefailed_e4_cascades() {
        let mut spec = fig3();
        spec.initially_failed.insert(spec.edge_index("e4").unwrap());
        let g = compile_grid(spec, AttackMode::Stochastic).unwrap();
        let s = g.scenario(ratio(2, 1)).unwrap();
        let lang = build_tree(&g, g.initial_state(), &s).unwrap();
        let report = aggregate_risk(&lang, &g.grid_criticality().unwrap()).unwrap();
        let h = cascade_depth(&report, &lang).unwrap();
        assert!(h.range(1..).any(|(_, m)| !m.is_zero()));
    }

    #[test]
    fn adversarial_mode_has_attacker_and_defender_nodes() {
        let g = compile_grid(fig3(), AttackMode::Adversarial).unwrap();
        let s = g.scenario(ratio(2, 1)).unwrap();
        assert_eq!(s.occasions().len(), 2);
        let lang = build_tree(&g, g.initial_state(), &s).unwrap();
        let roles: BTreeSet<_> = lang.node_ids().filter(|id| lang.node(*id).is_decision()).map(|id| lang.node(id).role()).collect();
        assert!(roles.contains(&NodeRole::Attacker));
        assert!(roles.contains(&NodeRole::Defender));
        for id in lang.node_ids() {
            assert!(conservation_holds(g.spec(), lang.node(id).state().flow()));
        }
    }

    #[test]
    fn group_factor_labels_are_known() {
        let g = compile_grid(load_grid(include_str!("../../fixtures/hospitals.json")).unwrap(), AttackMode::Stochastic)
            .unwrap();
        assert_eq!(g.group_rules()[0].labels, vec!["out:H1", "out:H2"]);
        assert!(g.is_known_label("out:H1"));
        assert!(!g.is_known_label("out:X"));
        assert!(!g.is_known_label("H1"));
    }
}
