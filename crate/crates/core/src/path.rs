//! Simulation paths and the path algebra (concatenation, suffixes).

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::EventSet;
use crate::num::{format_rational, Rational};

/// One transition record: the state entered, the time spent in the
/// predecessor state, and the triggering events (empty for internal).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathElement<S> {
    pub state: S,
    pub lifetime: Rational,
    pub events: EventSet,
}

/// A transition together with its trigger; the unit that carries
/// probability.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cause<S> {
    pub from: S,
    pub lifetime: Rational,
    pub events: EventSet,
    pub to: S,
}

/// One evolution history. Lifetimes plus the trailing residual dwell sum to
/// the horizon exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimulationPath<S> {
    pub initial: S,
    pub elements: Vec<PathElement<S>>,
    pub residual: Rational,
}

impl<S: Clone + PartialEq + std::fmt::Debug> SimulationPath<S> {
    /// A path with no transitions that dwells `horizon` in `initial`.
    pub fn stationary(initial: S, horizon: Rational) -> Self {
        Self {
            initial,
            elements: Vec::new(),
            residual: horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn horizon(&self) -> Rational {
        self.elements
            .iter()
            .fold(self.residual.clone(), |acc, e| acc + &e.lifetime)
    }

    pub fn final_state(&self) -> &S {
        self.elements
            .last()
            .map(|e| &e.state)
            .unwrap_or(&self.initial)
    }

    /// Transition causes in path order.
    pub fn causes(&self) -> Vec<Cause<S>> {
        let mut from = self.initial.clone();
        self.elements
            .iter()
            .map(|e| Cause {
                from: std::mem::replace(&mut from, e.state.clone()),
                lifetime: e.lifetime.clone(),
                events: e.events.clone(),
                to: e.state.clone(),
            })
            .collect()
    }

    /// `self ∘ other`; requires `self` to end exactly where `other` begins,
    /// with no residual dwell left over.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.final_state() != &other.initial || !self.residual.is_zero() {
            return Err(Error::IncompatibleEndpoints {
                end: format!("{:?}", self.final_state()),
                residual: format_rational(&self.residual),
                start: format!("{:?}", other.initial),
            });
        }
        let mut elements = self.elements.clone();
        elements.extend(other.elements.iter().cloned());
        Ok(Self {
            initial: self.initial.clone(),
            elements,
            residual: other.residual.clone(),
        })
    }

    /// Prefix made of the first `count` elements, ending at the moment of
    /// the last included transition.
    pub fn prefix(&self, count: usize) -> Result<Self> {
        if count > self.elements.len() {
            return Err(Error::IndexOutOfRange {
                index: count,
                len: self.elements.len(),
            });
        }
        Ok(Self {
            initial: self.initial.clone(),
            elements: self.elements[..count].to_vec(),
            residual: Rational::zero(),
        })
    }

    /// Suffix starting with element `index` (1-based), rooted in the state
    /// entered by element `index - 1`; its horizon is the original horizon
    /// minus the lifetimes of elements `1..index`. Valid for
    /// `2 <= index <= len`.
    pub fn tau_post(&self, index: usize) -> Result<Self> {
        let len = self.elements.len();
        if index < 2 || index > len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        Ok(Self {
            initial: self.elements[index - 2].state.clone(),
            elements: self.elements[index - 1..].to_vec(),
            residual: self.residual.clone(),
        })
    }

    pub fn starts_with(&self, prefix: &Self) -> bool {
        self.initial == prefix.initial && self.elements.starts_with(&prefix.elements)
    }
}
