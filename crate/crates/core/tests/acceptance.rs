//! Acceptance criteria, one PASS/FAIL line each. Tolerances and time
//! limits are the constants below.

mod support;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration as Elapsed, Instant};

use num_traits::One;

use riskdevs::adversarial::{bound_suite, minimax_report, minimax_risk};
use riskdevs::montecarlo::{estimate, estimate_risk, SamplerConfig};
use riskdevs::num::{rational_to_f64, ratio};
use riskdevs::powergrid::{compile_grid, conservation_holds, load_grid, AttackMode, GridBehavior, Phase};
use riskdevs::risk::{
    additive_criticality, aggregate_risk, aggregate_risk_with, correlated_criticality, effect_sequence,
    initial_state_risk, AggregateOptions, CriticalityFunction,
};
use riskdevs::tree::{Branching, Edge};
use riskdevs::{build_tree, build_tree_with, load_model, Execution, ModelBehavior, Rational, Scenario, TreeConfig};

use support::{close, enumerate, fixture, oracle_criticality, oracle_risk, random_case};

const RANDOM_MODELS: u64 = 20;
const ORACLE_REL_TOL: f64 = 1e-12;
const DECOMPOSITION_REL_TOL: f64 = 1e-12;
const BRACKET_REL_TOL: f64 = 1e-12;
const MC_SAMPLES: u64 = 100_000;
const MC_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
const MC_STD_ERRORS: f64 = 3.0;
const MC_MIN_COVERED: usize = 9;
/// Hand enumeration of the 4-state model at h = 2: 1/10 * (1/4 * 5/2 + 3/8 * 3 + 3/8 * 5).
const FOUR_STATE_RISK: f64 = 0.3625;

const LIMIT_NORMALIZATION: Elapsed = Elapsed::from_secs(5);
const LIMIT_ORACLE: Elapsed = Elapsed::from_secs(10);
const LIMIT_MONTE_CARLO: Elapsed = Elapsed::from_secs(30);
const LIMIT_GRID: Elapsed = Elapsed::from_secs(60);

type Check = fn() -> Result<String, String>;

fn main() -> ExitCode {
    let checks: [(u32, &str, Check, Option<Elapsed>); 9] = [
        (1, "normalization", normalization, Some(LIMIT_NORMALIZATION)),
        (2, "oracle equivalence", oracle_equivalence, Some(LIMIT_ORACLE)),
        (3, "traditional-risk reduction", traditional_risk, None),
        (4, "monte carlo consistency", monte_carlo, Some(LIMIT_MONTE_CARLO)),
        (5, "minimax bracketing", minimax_bracketing, None),
        (6, "decomposition", decomposition, None),
        (7, "grid cascade coupling", grid_cascade, Some(LIMIT_GRID)),
        (8, "correlation superadditivity", superadditivity, None),
        (9, "reproducibility", reproducibility, None),
    ];
    let mut failed = 0;
    for (id, name, check, limit) in checks {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(detail), Some(limit)) if took > limit => Err(format!("{detail}; took {took:.2?}, limit {limit:?}")),
            (other, _) => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {id}. {name}: {detail} ({took:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {id}. {name}: {detail} ({took:.2?})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn four_state() -> (riskdevs::TabularModel, Scenario) {
    (
        load_model(&fixture("four_state.json")).unwrap(),
        Scenario::from_json(&fixture("four_state_scenario.json")).unwrap(),
    )
}

fn normalization() -> Result<String, String> {
    let mut paths = 0;
    for seed in 0..RANDOM_MODELS {
        let (m, s) = random_case(seed, false);
        let b = riskdevs::behavior_of(&m);
        let lang = build_tree(&b, m.initial(), &s).map_err(|e| e.to_string())?;
        let mass: Rational = lang.leaves().into_iter().map(|l| lang.node(l).reach().clone()).sum();
        if !mass.is_one() {
            return Err(format!("seed {seed}: path probabilities sum to {mass}"));
        }
        paths += lang.path_count();
    }
    Ok(format!("{RANDOM_MODELS} random models, {paths} paths, every sum exactly 1"))
}

fn oracle_equivalence() -> Result<String, String> {
    let (m, s) = four_state();
    let b = riskdevs::behavior_of(&m);
    let lang = build_tree(&b, m.initial(), &s).map_err(|e| e.to_string())?;
    let exact = aggregate_risk(&lang, &additive_criticality(&b)).map_err(|e| e.to_string())?.total_risk;
    let oracle = oracle_risk(&m, &s);
    if !close(exact, oracle, ORACLE_REL_TOL) || !close(oracle, FOUR_STATE_RISK, ORACLE_REL_TOL) {
        return Err(format!("4-state: engine {exact}, oracle {oracle}, hand {FOUR_STATE_RISK}"));
    }
    let mut worst: f64 = 0.0;
    for seed in 0..RANDOM_MODELS {
        let (m, s) = random_case(seed, false);
        let b = riskdevs::behavior_of(&m);
        let lang = build_tree(&b, m.initial(), &s).map_err(|e| e.to_string())?;
        let engine = aggregate_risk(&lang, &additive_criticality(&b)).map_err(|e| e.to_string())?.total_risk;
        let oracle = oracle_risk(&m, &s);
        if !close(engine, oracle, ORACLE_REL_TOL) {
            return Err(format!("seed {seed}: engine {engine}, oracle {oracle}"));
        }
        if oracle != 0.0 {
            worst = worst.max((engine - oracle).abs() / oracle.abs());
        }
    }
    Ok(format!("4-state R(2) = {exact}; {RANDOM_MODELS} random models, max rel. error {worst:.1e} <= {ORACLE_REL_TOL:e}"))
}

fn traditional_risk() -> Result<String, String> {
    let m = load_model(
        r#"{
        "states": [
            {"id": "RUN", "sigma": "1"},
            {"id": "LEAK", "sigma": "inf", "criticality_rate": 2},
            {"id": "FIRE", "sigma": "inf", "criticality_rate": 4},
            {"id": "STOP", "sigma": "inf", "criticality_rate": 8}
        ],
        "initial": "RUN",
        "internal": [{"from": "RUN", "to": [
            {"target": "LEAK", "p": "1/2"}, {"target": "FIRE", "p": "1/4"}, {"target": "STOP", "p": "1/4"}
        ]}]
    }"#,
    )
    .map_err(|e| e.to_string())?;
    let b = riskdevs::behavior_of(&m);
    let s = Scenario::empty(ratio(2, 1)).unwrap();
    let lang = build_tree(&b, m.initial(), &s).map_err(|e| e.to_string())?;
    let total = aggregate_risk(&lang, &additive_criticality(&b)).map_err(|e| e.to_string())?.total_risk;
    // Failure modes with probability p_i and consequence c_i = rate_i * 1.
    let hand = 0.5 * 2.0 + 0.25 * 4.0 + 0.25 * 8.0;
    if total != hand {
        return Err(format!("R(h) = {total}, hand sum {hand}"));
    }

    let (m4, _) = four_state();
    let b4 = riskdevs::behavior_of(&m4);
    let s4 = Scenario::empty(ratio(3, 2)).unwrap();
    let lang4 = build_tree(&b4, m4.initial(), &s4).map_err(|e| e.to_string())?;
    if lang4.leaves().iter().any(|l| lang4.node(*l).depth() > 1) {
        return Err("4-state model at h = 3/2 admits more than one transition".into());
    }
    let r4 = aggregate_risk(&lang4, &additive_criticality(&b4)).map_err(|e| e.to_string())?.total_risk;
    let hand4 = 0.9 * 0.0 + 0.1 * (5.0 * 0.5);
    if r4 != hand4 {
        return Err(format!("4-state R(3/2) = {r4}, hand sum {hand4}"));
    }
    Ok(format!("FMEA fixture R = {total} = sum p_i c_i; 4-state R(3/2) = {r4}"))
}

fn monte_carlo() -> Result<String, String> {
    let (m, s) = four_state();
    let b = riskdevs::behavior_of(&m);
    let c = additive_criticality(&b);
    let lang = build_tree(&b, m.initial(), &s).map_err(|e| e.to_string())?;
    let exact = aggregate_risk(&lang, &c).map_err(|e| e.to_string())?.total_risk;
    let mut covered = 0;
    let mut worst: f64 = 0.0;
    for seed in MC_SEEDS {
        let est = estimate(&b, m.initial(), &s, &c, &SamplerConfig::new(MC_SAMPLES, seed)).map_err(|e| e.to_string())?;
        let z = (est.mean - exact).abs() / est.standard_error;
        worst = worst.max(z);
        if z <= MC_STD_ERRORS {
            covered += 1;
        }
    }
    let detail = format!(
        "exact {exact}; {covered}/{} seeds within {MC_STD_ERRORS} s.e. (N = {MC_SAMPLES}, max |z| = {worst:.2})",
        MC_SEEDS.len()
    );
    if covered >= MC_MIN_COVERED {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn leq(a: f64, b: f64) -> bool {
    a <= b || close(a, b, BRACKET_REL_TOL)
}

fn minimax_bracketing() -> Result<String, String> {
    let mut decisions = 0;
    for seed in 0..RANDOM_MODELS {
        let (m, s) = random_case(1000 + seed, true);
        let b = riskdevs::behavior_of(&m);
        let lang = build_tree(&b, m.initial(), &s).map_err(|e| e.to_string())?;
        let c = additive_criticality(&b);
        let mixed = minimax_risk(&lang, &c).map_err(|e| e.to_string())?.total_risk;
        let bounds = bound_suite(&lang, &c).map_err(|e| e.to_string())?;
        if !(leq(bounds.all_defender, mixed) && leq(mixed, bounds.all_attacker)) {
            return Err(format!("seed {}: {bounds:?} vs minimax {mixed}", 1000 + seed));
        }
        decisions += lang.node_ids().filter(|id| lang.node(*id).is_decision()).count();
    }

    let m = load_model(
        r#"{
        "states": [
            {"id": "R", "sigma": "1", "role": "ATTACKER"},
            {"id": "DA", "sigma": "1", "role": "DEFENDER", "criticality_rate": 1},
            {"id": "DB", "sigma": "1", "role": "DEFENDER", "criticality_rate": 2},
            {"id": "L1", "sigma": "inf", "criticality_rate": 4},
            {"id": "L2", "sigma": "inf", "criticality_rate": 6},
            {"id": "L3", "sigma": "inf", "criticality_rate": 3},
            {"id": "L4", "sigma": "inf", "criticality_rate": 1}
        ],
        "initial": "R",
        "internal": [
            {"from": "R", "to": [{"target": "DA", "p": "1/2"}, {"target": "DB", "p": "1/2"}]},
            {"from": "DA", "to": [{"target": "L1", "p": "1/2"}, {"target": "L2", "p": "1/2"}]},
            {"from": "DB", "to": [{"target": "L3", "p": "1/2"}, {"target": "L4", "p": "1/2"}]}
        ]
    }"#,
    )
    .map_err(|e| e.to_string())?;
    let s = Scenario::empty(ratio(3, 1)).unwrap();
    let b = riskdevs::behavior_of(&m);
    let lang = build_tree(&b, m.initial(), &s).map_err(|e| e.to_string())?;
    let engine = minimax_risk(&lang, &additive_criticality(&b)).map_err(|e| e.to_string())?.total_risk;
    let id = |n: &str| m.lookup(n).unwrap();
    let value = |choices: BTreeMap<_, _>| -> f64 {
        enumerate(&m, &s, &choices)
            .iter()
            .map(|p| rational_to_f64(&p.probability) * oracle_criticality(&m, &p.effects))
            .sum()
    };
    let mut best = f64::NEG_INFINITY;
    for a in ["DA", "DB"] {
        let mut worst_for_attacker = f64::INFINITY;
        for da in ["L1", "L2"] {
            for db in ["L3", "L4"] {
                let v = value(BTreeMap::from([(id("R"), id(a)), (id("DA"), id(da)), (id("DB"), id(db))]));
                worst_for_attacker = worst_for_attacker.min(v);
            }
        }
        best = best.max(worst_for_attacker);
    }
    if engine != best {
        return Err(format!("depth-2 example: minimax {engine}, strategy enumeration {best}"));
    }
    Ok(format!(
        "{RANDOM_MODELS} random trees ({decisions} decision nodes) bracketed; depth-2 example {engine} = enumeration {best}"
    ))
}

fn decomposition() -> Result<String, String> {
    let check = |m: &riskdevs::TabularModel, s: &Scenario| -> Result<Option<(f64, f64)>, String> {
        let b = riskdevs::behavior_of(m);
        let root_spec = &m.states()[m.initial().index()];
        if root_spec.criticality_rate != 0.0 || root_spec.terminal_criticality != 0.0 {
            return Ok(None);
        }
        let lang = build_tree(&b, m.initial(), s).map_err(|e| e.to_string())?;
        if lang.node(lang.root()).branching() != Branching::Internal {
            return Ok(None);
        }
        let c = additive_criticality(&b);
        let total = aggregate_risk(&lang, &c).map_err(|e| e.to_string())?.total_risk;
        let mut sum = 0.0;
        for child in lang.successors(lang.root()) {
            let node = lang.node(child);
            assert!(matches!(node.edge(), Edge::Transition(_)));
            let sub = lang.scenario_from(child).map_err(|e| e.to_string())?;
            let r = initial_state_risk(&b, *node.state(), &sub, &c, &TreeConfig::default())
                .map_err(|e| e.to_string())?
                .total_risk;
            sum += rational_to_f64(node.probability()) * r;
        }
        Ok(Some((total, sum)))
    };
    let (m, s) = four_state();
    let (t4, s4) = check(&m, &s)?.ok_or("4-state root is not an internal branching")?;
    if !close(t4, s4, DECOMPOSITION_REL_TOL) {
        return Err(format!("4-state: root {t4}, successor sum {s4}"));
    }
    let mut used = 0;
    let mut seed = 2000;
    while used < RANDOM_MODELS {
        let (m, s) = random_case(seed, false);
        if let Some((total, sum)) = check(&m, &s)? {
            if !close(total, sum, DECOMPOSITION_REL_TOL) {
                return Err(format!("seed {seed}: root {total}, successor sum {sum}"));
            }
            used += 1;
        }
        seed += 1;
        if seed > 4000 {
            return Err(format!("only {used} eligible random models"));
        }
    }
    Ok(format!("4-state {t4} = {s4}; {used} random models within {DECOMPOSITION_REL_TOL:e}"))
}

fn grid_cascade() -> Result<String, String> {
    let spec = load_grid(&fixture("fig3.json")).map_err(|e| e.to_string())?;
    let e4 = spec.edge_index("e4").unwrap();
    let e5 = spec.edge_index("e5").unwrap();
    let cap5 = spec.power_edges[e5].capacity.clone();
    let mut states = 0;
    let mut e4_states = 0;
    for mode in [AttackMode::Stochastic, AttackMode::Adversarial] {
        let g = compile_grid(spec.clone(), mode).map_err(|e| e.to_string())?;
        let root = g.initial_state();
        let p_root = g.failure_probabilities(&root).map_err(|e| e.to_string())?[&e5].clone();
        let s = g.scenario(ratio(3, 1) * &spec.cycle_length).map_err(|e| e.to_string())?;
        let lang = build_tree(&g, root, &s).map_err(|e| e.to_string())?;
        for id in lang.node_ids() {
            let q = lang.node(id).state();
            states += 1;
            if !conservation_holds(g.spec(), q.flow()) {
                return Err(format!("flow not conserved in {}", g.state_name(q)));
            }
            if q.failed().len() == 1 && q.failed().contains(&e4) && q.phase() == Phase::Operating {
                e4_states += 1;
                let p = g.failure_probabilities(q).map_err(|e| e.to_string())?[&e5].clone();
                let overloaded = q.loads()[e5] > cap5;
                if p < p_root || (overloaded && p <= p_root) {
                    return Err(format!("p_e5 = {p} after e4 failure vs {p_root} before"));
                }
            }
        }
    }
    if e4_states == 0 {
        return Err("no state with only e4 failed was reached".into());
    }
    let g = compile_grid(spec, AttackMode::Stochastic).map_err(|e| e.to_string())?;
    let after = g
        .external_dist(&g.initial_state(), &ratio(1, 2), &support::event_set(&["f1"]))
        .map_err(|e| e.to_string())?
        .ok_or("f1 compromise ignored")?
        .into_entries()
        .remove(0)
        .0;
    let before = g.failure_probabilities(&g.initial_state()).unwrap()[&e5].clone();
    let now = g.failure_probabilities(&after).unwrap()[&e5].clone();
    Ok(format!(
        "p_e5 {before} -> {now} after e4 loss (load {} > capacity {cap5}); conservation in all {states} tree states; {e4_states} e4-only states checked",
        after.loads()[e5]
    ))
}

fn hospitals() -> GridBehavior {
    compile_grid(load_grid(&fixture("hospitals.json")).unwrap(), AttackMode::Stochastic).unwrap()
}

fn superadditivity() -> Result<String, String> {
    let g = hospitals();
    let s = g.scenario(ratio(2, 1)).map_err(|e| e.to_string())?;
    let lang = build_tree(&g, g.initial_state(), &s).map_err(|e| e.to_string())?;
    let correlated = g.grid_criticality().map_err(|e| e.to_string())?;
    let plain = additive_criticality(&g);
    let mut both_out = 0;
    for path in lang.paths() {
        if path.final_state().served().iter().filter(|x| !**x).count() == 2 {
            both_out += 1;
            let effects = effect_sequence(&path);
            let (with, base) = (
                correlated.evaluate(&effects).map_err(|e| e.to_string())?,
                plain.evaluate(&effects).map_err(|e| e.to_string())?,
            );
            if with != 3.0 * base || base <= 0.0 {
                return Err(format!("both-out criticality {with}, additive baseline {base}"));
            }
        }
    }
    if both_out == 0 {
        return Err("no both-out path".into());
    }
    let with = aggregate_risk(&lang, &correlated).map_err(|e| e.to_string())?.total_risk;
    let without = aggregate_risk(&lang, &plain).map_err(|e| e.to_string())?.total_risk;
    if with > without {
        Ok(format!("both-out path criticality = 3 x baseline; total {with} > rule-free {without}"))
    } else {
        Err(format!("total {with} not above rule-free {without}"))
    }
}

fn reports(execution: Execution) -> Result<Vec<String>, String> {
    let e = |x: riskdevs::Error| x.to_string();
    let config = TreeConfig {
        execution,
        ..TreeConfig::default()
    };
    let options = AggregateOptions {
        execution,
        ..AggregateOptions::default()
    };
    let mut out = Vec::new();
    for (model, scenario) in [
        ("two_path.json", "two_path_scenario.json"),
        ("four_state.json", "four_state_scenario.json"),
    ] {
        let m = load_model(&fixture(model)).map_err(e)?;
        let s = Scenario::from_json(&fixture(scenario)).map_err(e)?;
        let b = riskdevs::behavior_of(&m);
        let c = correlated_criticality(&b, Box::new(additive_criticality(&b)), m.correlations()).map_err(e)?;
        let lang = build_tree_with(&b, m.initial(), &s, &config).map_err(e)?;
        out.push(aggregate_risk_with(&lang, &c, &options).map_err(e)?.to_json());
        let mut sampler = SamplerConfig::new(20_000, 42);
        sampler.execution = execution;
        out.push(estimate_risk(&b, m.initial(), &s, &c, &sampler).map_err(e)?.to_json());
    }
    for (grid, mode) in [
        ("fig3.json", AttackMode::Stochastic),
        ("fig3.json", AttackMode::Adversarial),
        ("hospitals.json", AttackMode::Stochastic),
    ] {
        let g = compile_grid(load_grid(&fixture(grid)).map_err(e)?, mode).map_err(e)?;
        let s = g.scenario(ratio(2, 1)).map_err(e)?;
        let c = g.grid_criticality().map_err(e)?;
        let lang = build_tree_with(&g, g.initial_state(), &s, &config).map_err(e)?;
        let mut report = match mode {
            AttackMode::Stochastic => aggregate_risk_with(&lang, &c, &options).map_err(e)?,
            AttackMode::Adversarial => {
                let r = minimax_risk(&lang, &c).map_err(e)?;
                minimax_report(&lang, &c, &r, None).map_err(e)?
            }
        };
        report.metadata = g.metadata(&lang).map_err(e)?;
        out.push(report.to_json());
    }
    Ok(out)
}

fn reproducibility() -> Result<String, String> {
    let first = reports(Execution::default())?;
    let second = reports(Execution::default())?;
    let sequential = reports(Execution::Sequential)?;
    for (i, ((a, b), c)) in first.iter().zip(&second).zip(&sequential).enumerate() {
        if a != b {
            return Err(format!("report {i} differs between runs"));
        }
        if a != c {
            return Err(format!("report {i} differs between parallel and sequential execution"));
        }
    }
    Ok(format!(
        "{} reports byte-identical across two runs and across parallel/sequential execution",
        first.len()
    ))
}
