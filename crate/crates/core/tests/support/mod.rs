//! Shared test helpers: a brute-force path enumerator that works directly
//! on a tabular model's tables, and seeded random model generation.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use riskdevs::num::{rational_to_f64, Duration};
use riskdevs::tabular::TabularModel;
use riskdevs::{load_model, EventSet, Rational, Scenario, StateId};

pub fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// One enumerated evolution: probability and `(state, dwell)` effects.
#[derive(Debug, Clone)]
pub struct OraclePath {
    pub probability: Rational,
    pub effects: Vec<(StateId, Rational)>,
}

/// Enumerates every evolution of `model` under `scenario` by direct
/// recursion over its tables. `choices` fixes the successor taken in
/// decision states (pure strategies); other states branch on their
/// distribution.
pub fn enumerate(model: &TabularModel, scenario: &Scenario, choices: &BTreeMap<StateId, StateId>) -> Vec<OraclePath> {
    let mut out = Vec::new();
    walk(
        model,
        scenario,
        choices,
        model.initial(),
        Rational::zero(),
        0,
        Rational::one(),
        Vec::new(),
        &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    model: &TabularModel,
    scenario: &Scenario,
    choices: &BTreeMap<StateId, StateId>,
    state: StateId,
    since: Rational,
    occasion: usize,
    probability: Rational,
    effects: Vec<(StateId, Rational)>,
    out: &mut Vec<OraclePath>,
) {
    let h = scenario.horizon().clone();
    let spec = &model.states()[state.index()];
    let expiry = match &spec.sigma {
        Duration::Finite(s) => Some(&since + s),
        Duration::Infinite => None,
    };
    let next = scenario.occasions().get(occasion).filter(|o| o.at < h);
    if let Some(o) = next {
        if expiry.as_ref().is_none_or(|x| o.at <= *x) {
            for (events, p) in &o.alternatives {
                if p.is_zero() {
                    continue;
                }
                let reaction = if events.is_empty() {
                    None
                } else {
                    model.external_for(state, events)
                };
                match reaction {
                    Some(dist) => {
                        for (target, pt) in dist.entries() {
                            let q = p * pt;
                            if q.is_zero() {
                                continue;
                            }
                            let mut e = effects.clone();
                            e.push((state, &o.at - &since));
                            walk(model, scenario, choices, *target, o.at.clone(), occasion + 1, &probability * q, e, out);
                        }
                    }
                    None => walk(
                        model,
                        scenario,
                        choices,
                        state,
                        since.clone(),
                        occasion + 1,
                        &probability * p,
                        effects.clone(),
                        out,
                    ),
                }
            }
            return;
        }
    }
    match expiry {
        Some(x) if x < h => {
            let dist = model.internal(state).expect("finite lifetime has a table entry");
            for (target, pt) in dist.entries() {
                let pt = match choices.get(&state) {
                    Some(chosen) if chosen == target => Rational::one(),
                    Some(_) => continue,
                    None => pt.clone(),
                };
                if pt.is_zero() {
                    continue;
                }
                let mut e = effects.clone();
                e.push((state, &x - &since));
                walk(model, scenario, choices, *target, x.clone(), occasion, &probability * pt, e, out);
            }
        }
        _ => {
            let mut e = effects;
            e.push((state, &h - &since));
            out.push(OraclePath { probability, effects: e });
        }
    }
}

/// Rate times dwell plus the terminal lump once a positive finite lifetime
/// is used up.
pub fn oracle_criticality(model: &TabularModel, effects: &[(StateId, Rational)]) -> f64 {
    effects
        .iter()
        .map(|(q, dwell)| {
            if dwell.is_zero() {
                return 0.0;
            }
            let s = &model.states()[q.index()];
            let lump = match &s.sigma {
                Duration::Finite(sigma) if dwell >= sigma => s.terminal_criticality,
                _ => 0.0,
            };
            s.criticality_rate * rational_to_f64(dwell) + lump
        })
        .sum()
}

pub fn oracle_risk(model: &TabularModel, scenario: &Scenario) -> f64 {
    enumerate(model, scenario, &BTreeMap::new())
        .iter()
        .map(|p| rational_to_f64(&p.probability) * oracle_criticality(model, &p.effects))
        .sum()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let w: Vec<u32> = (0..n).map(|_| rng.random_range(1..=6)).collect();
    let total: u32 = w.iter().sum();
    w.iter().map(|x| format!("{x}/{total}")).collect()
}

const LIFETIMES: [&str; 5] = ["1/2", "1", "3/2", "2", "inf"];
const EVENT_SETS: [&[&str]; 4] = [&[], &["x"], &["y"], &["x", "y"]];

/// Random tabular model and scenario: at most six states, two occasions
/// and a rational horizon in [1, 3]. With `decisions`, some states act as
/// attacker or defender.
pub fn random_case(seed: u64, decisions: bool) -> (TabularModel, Scenario) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6usize);
    let name = |i: usize| format!("S{i}");
    let mut states = Vec::new();
    let mut internal = Vec::new();
    let mut external = Vec::new();
    for i in 0..n {
        let sigma = LIFETIMES[rng.random_range(0..LIFETIMES.len())];
        let role = if decisions && sigma != "inf" {
            ["CHANCE", "ATTACKER", "DEFENDER"][rng.random_range(0..3)]
        } else {
            "CHANCE"
        };
        states.push(json!({
            "id": name(i),
            "sigma": sigma,
            "role": role,
            "criticality_rate": rng.random_range(0..=8) as f64 / 4.0,
            "terminal_criticality": rng.random_range(0..=2) as f64,
        }));
        if sigma != "inf" {
            let k = rng.random_range(1..=3.min(n));
            let mut targets: Vec<usize> = (0..n).collect();
            for j in 0..k {
                let pick = rng.random_range(j..n);
                targets.swap(j, pick);
            }
            let to: Vec<Value> = targets[..k]
                .iter()
                .zip(weights(&mut rng, k))
                .map(|(t, p)| json!({"target": name(*t), "p": p}))
                .collect();
            internal.push(json!({"from": name(i), "to": to}));
        }
        for events in &EVENT_SETS[1..] {
            if rng.random_bool(0.3) {
                let t = rng.random_range(0..n);
                external.push(json!({"from": name(i), "events": events, "to": [{"target": name(t), "p": "1"}]}));
            }
        }
    }
    let model = load_model(
        &json!({
            "states": states,
            "events": ["x", "y"],
            "initial": "S0",
            "internal": internal,
            "external": external,
        })
        .to_string(),
    )
    .expect("generated model is valid");

    let den = rng.random_range(1..=4i64);
    let horizon = Rational::new(rng.random_range(den..=3 * den).into(), den.into());
    let mut times: Vec<Rational> = (0..rng.random_range(0..=2))
        .map(|_| &horizon * Rational::new(rng.random_range(1..8i64).into(), 8.into()))
        .collect();
    times.sort();
    times.dedup();
    let occasions: Vec<Value> = times
        .iter()
        .map(|at| {
            let k = rng.random_range(1..=3usize);
            let mut sets: Vec<usize> = (0..EVENT_SETS.len()).collect();
            for j in 0..k {
                let pick = rng.random_range(j..sets.len());
                sets.swap(j, pick);
            }
            let alts: Vec<Value> = sets[..k]
                .iter()
                .zip(weights(&mut rng, k))
                .map(|(s, p)| json!({"events": EVENT_SETS[*s], "p": p}))
                .collect();
            json!({"at": riskdevs::num::format_rational(at), "alternatives": alts})
        })
        .collect();
    let scenario = Scenario::from_json(
        &json!({"horizon": riskdevs::num::format_rational(&horizon), "occasions": occasions}).to_string(),
    )
    .expect("generated scenario is valid");
    (model, scenario)
}

pub fn event_set(names: &[&str]) -> EventSet {
    EventSet::new(names.iter().copied())
}
