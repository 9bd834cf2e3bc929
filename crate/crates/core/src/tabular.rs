//! Finite-state models given as transition tables, loaded from JSON.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::model::{
    rate_and_lump, EventId, EventSet, ModelBehavior, NodeRole, TransitionDistribution,
};
use crate::num::{format_rational, parse_rational, rational_to_f64, Duration, Rational, RationalText};
use crate::risk::CorrelationRuleSpec;
use crate::scenario::parse_json;

/// Index of a state in its [`TabularModel`]; ordered by declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    pub name: String,
    pub sigma: Duration,
    pub role: NodeRole,
    pub criticality_rate: f64,
    pub terminal_criticality: f64,
    pub output: Option<String>,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    states: Vec<StateSpec>,
    events: Vec<EventId>,
    initial: StateId,
    internal: Vec<Option<TransitionDistribution<StateId>>>,
    external: BTreeMap<(StateId, EventSet), TransitionDistribution<StateId>>,
    correlations: Vec<CorrelationRuleSpec>,
    by_name: HashMap<String, StateId>,
}

impl TabularModel {
    pub fn states(&self) -> &[StateSpec] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> Result<&StateSpec> {
        self.states
            .get(id.index())
            .ok_or_else(|| Error::UnknownState(id.to_string()))
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn lookup(&self, name: &str) -> Option<StateId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: StateId) -> &str {
        self.states
            .get(id.index())
            .map(|s| s.name.as_str())
            .unwrap_or("?")
    }

    pub fn events(&self) -> &[EventId] {
        &self.events
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn internal(&self, id: StateId) -> Option<&TransitionDistribution<StateId>> {
        self.internal.get(id.index()).and_then(Option::as_ref)
    }

    pub fn external(&self) -> &BTreeMap<(StateId, EventSet), TransitionDistribution<StateId>> {
        &self.external
    }

    pub fn external_for(&self, id: StateId, events: &EventSet) -> Option<&TransitionDistribution<StateId>> {
        self.external.get(&(id, events.clone()))
    }

    pub fn correlations(&self) -> &[CorrelationRuleSpec] {
        &self.correlations
    }

    /// States reachable from the initial state through any table entry.
    pub fn reachable(&self) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut stack = vec![self.initial];
        while let Some(q) = stack.pop() {
            let internal = self.internal(q).into_iter();
            let external = self
                .external
                .iter()
                .filter(|((from, _), _)| *from == q)
                .map(|(_, d)| d);
            for dist in internal.chain(external) {
                for (target, _) in dist.entries() {
                    if seen.insert(*target) {
                        stack.push(*target);
                    }
                }
            }
        }
        seen
    }

    /// Cycles among zero-lifetime states reachable through internal
    /// transitions, which would make the simulation tree infinite.
    pub fn zero_delay_cycles(&self) -> Vec<StateId> {
        let zero = |q: StateId| matches!(&self.states[q.index()].sigma, Duration::Finite(s) if num_traits::Zero::is_zero(s));
        let mut on_cycle = Vec::new();
        for start in self.state_ids().filter(|q| zero(*q)) {
            let mut seen = BTreeSet::new();
            let mut stack = vec![start];
            while let Some(q) = stack.pop() {
                let Some(dist) = self.internal(q) else { continue };
                for (t, p) in dist.entries() {
                    if num_traits::Zero::is_zero(p) {
                        continue;
                    }
                    if *t == start {
                        on_cycle.push(start);
                        stack.clear();
                        break;
                    }
                    if zero(*t) && seen.insert(*t) {
                        stack.push(*t);
                    }
                }
            }
        }
        on_cycle
    }

    pub fn to_json(&self) -> String {
        let dist_doc = |d: &TransitionDistribution<StateId>| {
            d.entries()
                .iter()
                .map(|(t, p)| TargetDoc {
                    target: self.name(*t).to_string(),
                    p: RationalText(format_rational(p)),
                })
                .collect::<Vec<_>>()
        };
        let doc = ModelDoc {
            states: self
                .states
                .iter()
                .map(|s| StateDoc {
                    id: s.name.clone(),
                    sigma: RationalText(s.sigma.to_string()),
                    role: s.role,
                    criticality_rate: Some(RationalText(s.criticality_rate.to_string())),
                    terminal_criticality: Some(RationalText(s.terminal_criticality.to_string())),
                    output: s.output.clone(),
                    tags: s.tags.clone(),
                })
                .collect(),
            events: self.events.iter().map(|e| e.as_str().to_string()).collect(),
            initial: self.name(self.initial).to_string(),
            internal: self
                .state_ids()
                .filter_map(|q| {
                    self.internal(q).map(|d| InternalDoc {
                        from: self.name(q).to_string(),
                        to: dist_doc(d),
                    })
                })
                .collect(),
            external: self
                .external
                .iter()
                .map(|((q, events), d)| ExternalDoc {
                    from: self.name(*q).to_string(),
                    events: events.names(),
                    to: dist_doc(d),
                })
                .collect(),
            correlations: self.correlations.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }
}

/// Parses and validates a model document.
pub fn load_model(text: &str) -> Result<TabularModel> {
    let doc: ModelDoc = parse_json(text)?;
    doc.into_model()
}

/// Adapts a table to the [`ModelBehavior`] contract.
pub fn behavior_of(model: &TabularModel) -> TabularBehavior<'_> {
    TabularBehavior { model }
}

#[derive(Debug, Clone, Copy)]
pub struct TabularBehavior<'m> {
    model: &'m TabularModel,
}

impl<'m> TabularBehavior<'m> {
    pub fn model(&self) -> &'m TabularModel {
        self.model
    }
}

impl ModelBehavior for TabularBehavior<'_> {
    type State = StateId;

    fn initial_state(&self) -> StateId {
        self.model.initial
    }

    fn sigma(&self, q: &StateId) -> Result<Duration> {
        Ok(self.model.state(*q)?.sigma.clone())
    }

    fn internal_dist(&self, q: &StateId) -> Result<TransitionDistribution<StateId>> {
        let spec = self.model.state(*q)?;
        self.model
            .internal(*q)
            .cloned()
            .ok_or_else(|| Error::NoInternalTransition(spec.name.clone()))
    }

    fn external_dist(
        &self,
        q: &StateId,
        _elapsed: &Rational,
        events: &EventSet,
    ) -> Result<Option<TransitionDistribution<StateId>>> {
        self.model.state(*q)?;
        if events.is_empty() {
            return Ok(None);
        }
        Ok(self.model.external_for(*q, events).cloned())
    }

    fn role(&self, q: &StateId) -> Result<NodeRole> {
        Ok(self.model.state(*q)?.role)
    }

    fn criticality(&self, q: &StateId, dwell: &Rational) -> Result<f64> {
        let s = self.model.state(*q)?;
        Ok(rate_and_lump(
            s.criticality_rate,
            s.terminal_criticality,
            &s.sigma,
            dwell,
        ))
    }

    fn labels(&self, q: &StateId) -> Result<Vec<String>> {
        let s = self.model.state(*q)?;
        let mut labels = vec![s.name.clone()];
        labels.extend(s.tags.iter().cloned());
        Ok(labels)
    }

    fn is_known_label(&self, label: &str) -> bool {
        self.model
            .states
            .iter()
            .any(|s| s.name == label || s.tags.iter().any(|t| t == label))
    }

    fn is_known_event(&self, event: &EventId) -> bool {
        self.model.events.contains(event)
    }

    fn state_name(&self, q: &StateId) -> String {
        self.model.name(*q).to_string()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    states: Vec<StateDoc>,
    #[serde(default)]
    events: Vec<String>,
    initial: String,
    #[serde(default)]
    internal: Vec<InternalDoc>,
    #[serde(default)]
    external: Vec<ExternalDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    correlations: Vec<CorrelationRuleSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    id: String,
    sigma: RationalText,
    #[serde(default)]
    role: NodeRole,
    #[serde(default)]
    criticality_rate: Option<RationalText>,
    #[serde(default)]
    terminal_criticality: Option<RationalText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tags: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetDoc {
    target: String,
    p: RationalText,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InternalDoc {
    from: String,
    to: Vec<TargetDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExternalDoc {
    from: String,
    events: Vec<String>,
    to: Vec<TargetDoc>,
}

fn parse_real(text: &RationalText, path: &str, diags: &mut Vec<Diagnostic>) -> f64 {
    match parse_rational(&text.0) {
        Ok(v) if v >= Rational::from_integer(0.into()) => rational_to_f64(&v),
        Ok(_) => {
            diags.push(Diagnostic::new(path, "must be non-negative"));
            0.0
        }
        Err(e) => {
            diags.push(Diagnostic::new(path, e.to_string()));
            0.0
        }
    }
}

impl ModelDoc {
    fn into_model(self) -> Result<TabularModel> {
        let mut diags = Vec::new();
        let mut by_name = HashMap::new();
        let mut states = Vec::with_capacity(self.states.len());
        for (i, s) in self.states.into_iter().enumerate() {
            let path = format!("states[{i}]");
            if by_name.insert(s.id.clone(), StateId(i as u32)).is_some() {
                diags.push(Diagnostic::new(format!("{path}.id"), format!("duplicate state `{}`", s.id)));
            }
            let sigma = Duration::parse(&s.sigma.0).unwrap_or_else(|e| {
                diags.push(Diagnostic::new(format!("{path}.sigma"), e.to_string()));
                Duration::Infinite
            });
            let rate = s
                .criticality_rate
                .as_ref()
                .map(|t| parse_real(t, &format!("{path}.criticality_rate"), &mut diags))
                .unwrap_or(0.0);
            let terminal = s
                .terminal_criticality
                .as_ref()
                .map(|t| parse_real(t, &format!("{path}.terminal_criticality"), &mut diags))
                .unwrap_or(0.0);
            states.push(StateSpec {
                name: s.id,
                sigma,
                role: s.role,
                criticality_rate: rate,
                terminal_criticality: terminal,
                output: s.output,
                tags: s.tags,
            });
        }

        let mut events = Vec::new();
        for (i, e) in self.events.iter().enumerate() {
            let id = EventId::new(e);
            if events.contains(&id) {
                diags.push(Diagnostic::new(format!("events[{i}]"), format!("duplicate event `{e}`")));
            }
            events.push(id);
        }

        let initial = by_name.get(&self.initial).copied().unwrap_or_else(|| {
            diags.push(Diagnostic::new("initial", format!("unknown state `{}`", self.initial)));
            StateId(0)
        });

        let resolve = |name: &str, path: String, diags: &mut Vec<Diagnostic>| {
            let id = by_name.get(name).copied();
            if id.is_none() {
                diags.push(Diagnostic::new(path, format!("unknown state `{name}`")));
            }
            id
        };
        let build_dist = |to: &[TargetDoc], path: &str, diags: &mut Vec<Diagnostic>| {
            let mut entries = Vec::new();
            let mut ok = true;
            for (j, t) in to.iter().enumerate() {
                let target = resolve(&t.target, format!("{path}[{j}].target"), diags);
                let p = parse_rational(&t.p.0);
                if let Err(e) = &p {
                    diags.push(Diagnostic::new(format!("{path}[{j}].p"), e.to_string()));
                }
                match (target, p) {
                    (Some(target), Ok(p)) => entries.push((target, p)),
                    _ => ok = false,
                }
            }
            if !ok {
                return None;
            }
            match TransitionDistribution::new(entries) {
                Ok(d) => Some(d),
                Err(Error::InvalidDistribution(msg)) => {
                    diags.push(Diagnostic::new(path, msg));
                    None
                }
                Err(e) => {
                    diags.push(Diagnostic::new(path, e.to_string()));
                    None
                }
            }
        };

        let mut internal: Vec<Option<TransitionDistribution<StateId>>> = vec![None; states.len()];
        let mut declared = vec![false; states.len()];
        for (i, entry) in self.internal.iter().enumerate() {
            let path = format!("internal[{i}]");
            let Some(from) = resolve(&entry.from, format!("{path}.from"), &mut diags) else {
                continue;
            };
            if std::mem::replace(&mut declared[from.index()], true) {
                diags.push(Diagnostic::new(
                    format!("{path}.from"),
                    format!("duplicate internal distribution for `{}`", entry.from),
                ));
                continue;
            }
            if states[from.index()].sigma.is_infinite() {
                diags.push(Diagnostic::new(
                    format!("{path}.from"),
                    format!("passive state `{}` (sigma = inf) cannot have an internal distribution", entry.from),
                ));
            }
            internal[from.index()] = build_dist(&entry.to, &format!("{path}.to"), &mut diags);
        }
        for (i, s) in states.iter().enumerate() {
            if !s.sigma.is_infinite() && !declared[i] {
                diags.push(Diagnostic::new(
                    format!("states[{i}].sigma"),
                    format!("state `{}` has finite sigma but no internal distribution", s.name),
                ));
            }
        }

        let mut external = BTreeMap::new();
        for (i, entry) in self.external.iter().enumerate() {
            let path = format!("external[{i}]");
            let from = resolve(&entry.from, format!("{path}.from"), &mut diags);
            let set = EventSet::new(entry.events.iter().map(String::as_str));
            if set.is_empty() {
                diags.push(Diagnostic::new(format!("{path}.events"), "event set must not be empty"));
            }
            for e in set.iter() {
                if !events.contains(e) {
                    diags.push(Diagnostic::new(format!("{path}.events"), format!("unknown event `{e}`")));
                }
            }
            let dist = build_dist(&entry.to, &format!("{path}.to"), &mut diags);
            if let (Some(from), Some(dist)) = (from, dist) {
                if external.insert((from, set.clone()), dist).is_some() {
                    diags.push(Diagnostic::new(
                        format!("{path}.events"),
                        format!("duplicate external entry for `{}` on {set}", entry.from),
                    ));
                }
            }
        }

        for (i, rule) in self.correlations.iter().enumerate() {
            for d in rule.diagnostics() {
                diags.push(Diagnostic::new(format!("correlations[{i}].{}", d.path), d.message));
            }
            for label in rule.labels() {
                let known = states.iter().any(|s| &s.name == label || s.tags.contains(label));
                if !known {
                    diags.push(Diagnostic::new(
                        format!("correlations[{i}].labels"),
                        format!("unknown state or tag `{label}`"),
                    ));
                }
            }
        }

        if states.is_empty() {
            diags.push(Diagnostic::new("states", "model has no states"));
        }
        if !diags.is_empty() {
            return Err(Error::Semantic(diags));
        }
        Ok(TabularModel {
            states,
            events,
            initial,
            internal,
            external,
            correlations: self.correlations,
            by_name,
        })
    }
}
