//! The stochastic DEVS model contract shared by every engine.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{format_rational, is_probability, rational_to_f64, Duration, Rational};

/// External event label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(Arc<str>);

impl EventId {
    pub fn new(name: impl AsRef<str>) -> Self {
        EventId(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Canonical (sorted, deduplicated) set of simultaneous events. Empty means
/// "no external event", i.e. an internal transition.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventSet(Vec<EventId>);

impl EventSet {
    pub fn empty() -> Self {
        EventSet(Vec::new())
    }

    pub fn new<I, E>(events: I) -> Self
    where
        I: IntoIterator<Item = E>,
        E: Into<EventId>,
    {
        let set: BTreeSet<EventId> = events.into_iter().map(Into::into).collect();
        EventSet(set.into_iter().collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventId> {
        self.0.iter()
    }

    pub fn contains(&self, event: &EventId) -> bool {
        self.0.binary_search(event).is_ok()
    }

    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(|e| e.as_str().to_string()).collect()
    }
}

impl From<&str> for EventId {
    fn from(value: &str) -> Self {
        EventId::new(value)
    }
}

impl From<String> for EventId {
    fn from(value: String) -> Self {
        EventId::new(value)
    }
}

impl fmt::Display for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(e.as_str())?;
        }
        f.write_str("}")
    }
}

/// Who resolves a state's internal branching.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NodeRole {
    #[default]
    Chance,
    Attacker,
    Defender,
}

impl NodeRole {
    pub fn is_decision(self) -> bool {
        !matches!(self, NodeRole::Chance)
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeRole::Chance => "CHANCE",
            NodeRole::Attacker => "ATTACKER",
            NodeRole::Defender => "DEFENDER",
        })
    }
}

/// A finite distribution over successor states with exact probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionDistribution<S> {
    entries: Vec<(S, Rational)>,
}

impl<S: Ord + Clone + fmt::Debug> TransitionDistribution<S> {
    /// Validates non-emptiness, per-entry range, distinct targets and an
    /// exact total of one.
    pub fn new(entries: Vec<(S, Rational)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("no entries".into()));
        }
        let mut seen = BTreeSet::new();
        let mut total = Rational::zero();
        for (target, p) in &entries {
            if !is_probability(p) {
                return Err(Error::InvalidDistribution(format!(
                    "probability {} of {:?} outside [0,1]",
                    format_rational(p),
                    target
                )));
            }
            if !seen.insert(target.clone()) {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate target {target:?}"
                )));
            }
            total += p;
        }
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {}, expected 1",
                format_rational(&total)
            )));
        }
        Ok(Self { entries })
    }

    pub fn certain(target: S) -> Self {
        Self {
            entries: vec![(target, Rational::one())],
        }
    }
}

impl<S> TransitionDistribution<S> {
    pub fn entries(&self) -> &[(S, Rational)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_entries(self) -> Vec<(S, Rational)> {
        self.entries
    }
}

/// A state paired with the time elapsed since it was entered.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TotalState<S> {
    pub state: S,
    pub elapsed: Rational,
}

/// Abstract STDEVS behavior: time advance, stochastic internal/external
/// transitions, decision roles and the loss rate attached to total states.
///
/// Implementations must be pure: equal arguments give equal answers.
pub trait ModelBehavior: Sync {
    type State: Clone + Ord + Hash + fmt::Debug + Send + Sync;

    fn initial_state(&self) -> Self::State;

    /// Lifetime σ(q).
    fn sigma(&self, q: &Self::State) -> Result<Duration>;

    /// Successor distribution when the lifetime expires.
    fn internal_dist(&self, q: &Self::State) -> Result<TransitionDistribution<Self::State>>;

    /// Successor distribution when `events` arrive after `elapsed` time in
    /// `q`; `None` means the state ignores the event set.
    fn external_dist(
        &self,
        q: &Self::State,
        elapsed: &Rational,
        events: &EventSet,
    ) -> Result<Option<TransitionDistribution<Self::State>>>;

    fn role(&self, q: &Self::State) -> Result<NodeRole>;

    /// Loss accrued by dwelling `dwell` time units in `q`.
    fn criticality(&self, q: &Self::State, dwell: &Rational) -> Result<f64>;

    /// Condition labels used by correlation rules.
    fn labels(&self, _q: &Self::State) -> Result<Vec<String>> {
        Ok(Vec::new())
    }

    fn is_known_label(&self, _label: &str) -> bool {
        true
    }

    fn is_known_event(&self, _event: &EventId) -> bool {
        true
    }

    fn state_name(&self, q: &Self::State) -> String;
}

/// Successor distribution entered when σ(q) expires.
pub fn step_internal<B: ModelBehavior>(
    behavior: &B,
    q: &B::State,
) -> Result<TransitionDistribution<B::State>> {
    if behavior.sigma(q)?.is_infinite() {
        return Err(Error::NoInternalTransition(behavior.state_name(q)));
    }
    behavior.internal_dist(q)
}

/// `rate * dwell`, plus the lump `terminal` once the dwell reaches a finite,
/// positive lifetime. A zero dwell never accrues anything.
pub fn rate_and_lump(rate: f64, terminal: f64, sigma: &Duration, dwell: &Rational) -> f64 {
    if dwell.is_zero() {
        return 0.0;
    }
    let mut value = rate * rational_to_f64(dwell);
    if let Duration::Finite(s) = sigma {
        if dwell >= s {
            value += terminal;
        }
    }
    value
}
