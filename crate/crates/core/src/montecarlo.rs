//! Monte Carlo estimation of `R(h)` by sampling paths with their own
//! probabilities: the mean sampled criticality is unbiased for
//! `Σ p(τ)·c(τ)`.
//!
//! Samples are drawn in fixed-size batches; batch `i` uses a ChaCha8
//! generator seeded with the configured seed and switched to stream `i`, so
//! the estimate is bit-identical regardless of how batches are scheduled
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelBehavior;
use crate::num::{rational_to_f64, Rational};
use crate::par::{self, Execution};
use crate::path::{PathElement, SimulationPath};
use crate::report::{EstimatorBlock, Mode, RiskReport};
use crate::risk::{effect_sequence, CriticalityFunction};
use crate::scenario::Scenario;
use crate::tree::{expand, Branching, Cursor, Edge, DEFAULT_MAX_ZERO_DELAY};

pub const BATCH_SIZE: u64 = 1024;
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64/stream-per-batch-1024";

#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub sample_count: u64,
    pub seed: u64,
    pub max_path_transitions: usize,
    pub execution: Execution,
}

impl SamplerConfig {
    pub fn new(sample_count: u64, seed: u64) -> Self {
        Self {
            sample_count,
            seed,
            max_path_transitions: 1_000_000,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
    pub sample_count: u64,
    pub min_criticality: f64,
    pub max_criticality: f64,
}

/// Rolls one path, drawing every chance branching from its local
/// distribution. Decision nodes cannot be sampled.
pub fn sample_path<B: ModelBehavior, R: Rng + ?Sized>(
    behavior: &B,
    initial: B::State,
    scenario: &Scenario,
    rng: &mut R,
    max_path_transitions: usize,
) -> Result<SimulationPath<B::State>> {
    let mut cursor = Cursor {
        state: initial.clone(),
        entered_at: Rational::from_integer(0.into()),
        time: Rational::from_integer(0.into()),
        next_occasion: 0,
        zero_run: 0,
    };
    let mut elements = Vec::new();
    loop {
        let expansion = expand(behavior, scenario, &cursor, DEFAULT_MAX_ZERO_DELAY)?;
        if expansion.branching == Branching::Internal && expansion.role.is_decision() {
            return Err(Error::DecisionNodeInSamplingMode(behavior.state_name(&cursor.state)));
        }
        let mut children = expansion.children;
        if children.is_empty() {
            break;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = children.len() - 1;
        for (i, child) in children.iter().enumerate() {
            acc += rational_to_f64(&child.probability);
            if u < acc {
                pick = i;
                break;
            }
        }
        let child = children.swap_remove(pick);
        if let Edge::Transition(events) = child.edge {
            if elements.len() >= max_path_transitions {
                return Err(Error::ZeroDelayCycle {
                    limit: max_path_transitions,
                    state: behavior.state_name(&cursor.state),
                });
            }
            elements.push(PathElement {
                state: child.cursor.state.clone(),
                lifetime: &child.cursor.entered_at - &cursor.entered_at,
                events,
            });
        }
        cursor = child.cursor;
    }
    Ok(SimulationPath {
        residual: scenario.horizon() - &cursor.entered_at,
        initial,
        elements,
    })
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Moments {
    fn empty() -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

/// Draws `config.sample_count` paths and summarizes their criticalities.
pub fn estimate<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    behavior: &B,
    initial: B::State,
    scenario: &Scenario,
    c: &C,
    config: &SamplerConfig,
) -> Result<Estimate> {
    if config.sample_count == 0 {
        return Err(Error::InvalidConfig("sample_count must be at least 1".into()));
    }
    let batches = config.sample_count.div_ceil(BATCH_SIZE) as usize;
    let results = par::map_range(config.execution, batches, |batch| -> Result<Moments> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(batch as u64);
        let start = batch as u64 * BATCH_SIZE;
        let count = BATCH_SIZE.min(config.sample_count - start);
        let mut moments = Moments::empty();
        for _ in 0..count {
            let path = sample_path(
                behavior,
                initial.clone(),
                scenario,
                &mut rng,
                config.max_path_transitions,
            )?;
            moments.push(c.evaluate(&effect_sequence(&path))?);
        }
        Ok(moments)
    });
    let mut total = Moments::empty();
    for r in results {
        total = total.merge(r?);
    }
    let variance = if total.n > 1 {
        total.m2 / (total.n - 1) as f64
    } else {
        0.0
    };
    Ok(Estimate {
        mean: total.mean,
        standard_error: (variance.max(0.0) / total.n as f64).sqrt(),
        sample_count: total.n,
        min_criticality: total.min,
        max_criticality: total.max,
    })
}

/// Monte Carlo counterpart of the exact aggregate, as a report.
pub fn estimate_risk<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    behavior: &B,
    initial: B::State,
    scenario: &Scenario,
    c: &C,
    config: &SamplerConfig,
) -> Result<RiskReport> {
    let est = estimate(behavior, initial, scenario, c, config)?;
    let mut report = RiskReport::new(Mode::MonteCarlo, scenario.horizon(), c.descriptor());
    report.total_risk = est.mean;
    report.path_count = est.sample_count as usize;
    report.estimator = Some(EstimatorBlock {
        mean: est.mean,
        std_error: est.standard_error,
        n: est.sample_count,
        seed: config.seed,
        rng: RNG_ALGORITHM.to_string(),
        min_criticality: est.min_criticality,
        max_criticality: est.max_criticality,
    });
    Ok(report)
}
