//! Finite schedules of external-event occasions up to a horizon.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::model::{EventSet, ModelBehavior};
use crate::num::{format_rational, is_probability, parse_rational, Duration, Rational, RationalText};

/// One point in time where an external event set may arrive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledOccasion {
    pub at: Rational,
    pub alternatives: Vec<(EventSet, Rational)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    occasions: Vec<ScheduledOccasion>,
    horizon: Rational,
}

impl Scenario {
    pub fn new(occasions: Vec<ScheduledOccasion>, horizon: Rational) -> Result<Self> {
        let scenario = Scenario { occasions, horizon };
        let diags = scenario.diagnostics();
        if diags.is_empty() {
            Ok(scenario)
        } else {
            Err(Error::Semantic(diags))
        }
    }

    /// A scenario without external events.
    pub fn empty(horizon: Rational) -> Result<Self> {
        Scenario::new(Vec::new(), horizon)
    }

    pub fn horizon(&self) -> &Rational {
        &self.horizon
    }

    pub fn occasions(&self) -> &[ScheduledOccasion] {
        &self.occasions
    }

    /// Replaces the horizon; occasions beyond the new horizon are dropped.
    pub fn with_horizon(&self, horizon: Rational) -> Result<Self> {
        let occasions = self
            .occasions
            .iter()
            .filter(|o| o.at <= horizon)
            .cloned()
            .collect();
        Scenario::new(occasions, horizon)
    }

    /// The scenario as seen from absolute time `offset`, keeping occasions
    /// from index `first` on, re-timed relative to `offset`.
    pub fn shifted(&self, offset: &Rational, first: usize) -> Result<Self> {
        if *offset > self.horizon {
            return Err(Error::semantic("horizon", "shift beyond horizon"));
        }
        let occasions = self.occasions[first.min(self.occasions.len())..]
            .iter()
            .map(|o| ScheduledOccasion {
                at: &o.at - offset,
                alternatives: o.alternatives.clone(),
            })
            .collect();
        Scenario::new(occasions, &self.horizon - offset)
    }

    fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        if self.horizon < Rational::zero() {
            diags.push(Diagnostic::new("horizon", "horizon must be non-negative"));
        }
        let mut previous: Option<&Rational> = None;
        for (i, occ) in self.occasions.iter().enumerate() {
            let path = format!("occasions[{i}]");
            if occ.at < Rational::zero() {
                diags.push(Diagnostic::new(format!("{path}.at"), "time must be non-negative"));
            }
            if occ.at > self.horizon {
                diags.push(Diagnostic::new(
                    format!("{path}.at"),
                    format!(
                        "occasion at {} lies beyond the horizon {}",
                        format_rational(&occ.at),
                        format_rational(&self.horizon)
                    ),
                ));
            }
            if let Some(prev) = previous {
                if occ.at <= *prev {
                    diags.push(Diagnostic::new(
                        format!("{path}.at"),
                        "occasion times must be strictly increasing",
                    ));
                }
            }
            previous = Some(&occ.at);
            if occ.alternatives.is_empty() {
                diags.push(Diagnostic::new(format!("{path}.alternatives"), "no alternatives"));
            }
            let mut total = Rational::zero();
            let mut seen = BTreeSet::new();
            for (j, (events, p)) in occ.alternatives.iter().enumerate() {
                if !is_probability(p) {
                    diags.push(Diagnostic::new(
                        format!("{path}.alternatives[{j}].p"),
                        "probability outside [0,1]",
                    ));
                }
                if !seen.insert(events.clone()) {
                    diags.push(Diagnostic::new(
                        format!("{path}.alternatives[{j}].events"),
                        format!("duplicate event set {events}"),
                    ));
                }
                total += p;
            }
            if !occ.alternatives.is_empty() && !total.is_one() {
                diags.push(Diagnostic::new(
                    format!("{path}.alternatives"),
                    format!("probabilities sum to {}, expected 1", format_rational(&total)),
                ));
            }
        }
        diags
    }

    /// Checks that every referenced event is known to `behavior`.
    pub fn check_events<B: ModelBehavior>(&self, behavior: &B) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        for (i, occ) in self.occasions.iter().enumerate() {
            for (j, (events, _)) in occ.alternatives.iter().enumerate() {
                for e in events.iter() {
                    if !behavior.is_known_event(e) {
                        diags.push(Diagnostic::new(
                            format!("occasions[{i}].alternatives[{j}].events"),
                            format!("unknown event `{e}`"),
                        ));
                    }
                }
            }
        }
        diags
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDoc = parse_json(text)?;
        doc.into_scenario()
    }

    pub fn to_json(&self) -> String {
        let doc = ScenarioDoc {
            horizon: RationalText(format_rational(&self.horizon)),
            occasions: self
                .occasions
                .iter()
                .map(|o| OccasionDoc {
                    at: RationalText(format_rational(&o.at)),
                    alternatives: o
                        .alternatives
                        .iter()
                        .map(|(events, p)| AlternativeDoc {
                            events: events.names(),
                            p: RationalText(format_rational(p)),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("scenario serializes")
    }
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(if path == "." {
            e.inner().to_string()
        } else {
            format!("{path}: {}", e.inner())
        })
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    horizon: RationalText,
    #[serde(default)]
    occasions: Vec<OccasionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OccasionDoc {
    at: RationalText,
    alternatives: Vec<AlternativeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlternativeDoc {
    #[serde(default)]
    events: Vec<String>,
    p: RationalText,
}

impl ScenarioDoc {
    fn into_scenario(self) -> Result<Scenario> {
        let mut diags = Vec::new();
        let horizon = match Duration::parse(&self.horizon.0) {
            Ok(Duration::Finite(h)) => h,
            Ok(Duration::Infinite) => {
                diags.push(Diagnostic::new("horizon", "horizon must be finite"));
                Rational::zero()
            }
            Err(e) => {
                diags.push(Diagnostic::new("horizon", e.to_string()));
                Rational::zero()
            }
        };
        let mut occasions = Vec::new();
        for (i, occ) in self.occasions.into_iter().enumerate() {
            let at = parse_rational(&occ.at.0).unwrap_or_else(|e| {
                diags.push(Diagnostic::new(format!("occasions[{i}].at"), e.to_string()));
                Rational::zero()
            });
            let mut alternatives = Vec::new();
            for (j, alt) in occ.alternatives.into_iter().enumerate() {
                let p = parse_rational(&alt.p.0).unwrap_or_else(|e| {
                    diags.push(Diagnostic::new(
                        format!("occasions[{i}].alternatives[{j}].p"),
                        e.to_string(),
                    ));
                    Rational::zero()
                });
                alternatives.push((EventSet::new(alt.events), p));
            }
            occasions.push(ScheduledOccasion { at, alternatives });
        }
        if !diags.is_empty() {
            return Err(Error::Semantic(diags));
        }
        Scenario::new(occasions, horizon)
    }
}
