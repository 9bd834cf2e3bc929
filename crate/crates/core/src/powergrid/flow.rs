//! Demand routing over the surviving transmission network.
//!
//! Consumers are served one at a time in node-id order, each from a
//! producer with enough remaining supply along a minimum-hop path. Among
//! equal-hop paths the one with the smallest resulting maximum load ratio
//! wins, then the lexicographically smallest edge-id sequence. Loads are
//! not capped: overload is allowed and only raises failure probabilities.

use std::collections::{BTreeSet, VecDeque};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::num::{format_rational, Rational};

use super::spec::GridSpec;

/// Upper bound on the equal-hop candidate paths considered per consumer.
pub const MAX_CANDIDATES: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlowSolution {
    /// Total routed amount per power edge.
    pub loads: Vec<Rational>,
    /// Net flow per power edge, positive in its `from -> to` direction.
    pub flows: Vec<Rational>,
    pub served: Vec<bool>,
}

/// Per-edge failure probability for the next cycle given its load.
pub fn failure_probability(load: &Rational, capacity: &Rational, p_base: &Rational, k: &Rational) -> Result<Rational> {
    if *capacity <= Rational::zero() {
        return Err(Error::NonpositiveCapacity(format_rational(capacity)));
    }
    if load <= capacity {
        return Ok(p_base.clone());
    }
    let p = p_base + k * (load / capacity - Rational::one());
    Ok(p.min(Rational::one()))
}

struct Candidate {
    producer: usize,
    /// Edges from the producer to the consumer, with traversal direction
    /// (`true` when crossing `from -> to`).
    hops: Vec<(usize, bool)>,
}

struct Router<'s> {
    spec: &'s GridSpec,
    adjacency: Vec<Vec<(usize, usize)>>,
    loads: Vec<Rational>,
    flows: Vec<Rational>,
    remaining: Vec<Rational>,
    served: Vec<bool>,
}

impl<'s> Router<'s> {
    fn new(spec: &'s GridSpec, failed: &BTreeSet<usize>) -> Self {
        let mut adjacency = vec![Vec::new(); spec.nodes.len()];
        for (i, e) in spec.power_edges.iter().enumerate() {
            if !failed.contains(&i) {
                adjacency[e.from].push((i, e.to));
                adjacency[e.to].push((i, e.from));
            }
        }
        Self {
            spec,
            adjacency,
            loads: vec![Rational::zero(); spec.power_edges.len()],
            flows: vec![Rational::zero(); spec.power_edges.len()],
            remaining: spec
                .nodes
                .iter()
                .map(|n| n.balance.clone().max(Rational::zero()))
                .collect(),
            served: (0..spec.nodes.len()).map(|v| spec.is_producer(v)).collect(),
        }
    }

    /// Equal-hop candidates for routing `demand` to `consumer`, best first.
    fn candidates(&self, consumer: usize, demand: &Rational) -> Vec<Candidate> {
        let n = self.spec.nodes.len();
        let mut dist = vec![usize::MAX; n];
        dist[consumer] = 0;
        let mut queue = VecDeque::from([consumer]);
        while let Some(u) = queue.pop_front() {
            for &(_, w) in &self.adjacency[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        let eligible = |v: usize| self.spec.is_producer(v) && dist[v] != usize::MAX && self.remaining[v] >= *demand;
        let Some(best) = (0..n).filter(|v| eligible(*v)).map(|v| dist[v]).min() else {
            return Vec::new();
        };
        let mut found = Vec::new();
        for producer in (0..n).filter(|v| eligible(*v) && dist[*v] == best) {
            let mut hops = Vec::new();
            self.descend(producer, &dist, &mut hops, producer, &mut found);
        }
        let key = |c: &Candidate| {
            let ratio = c
                .hops
                .iter()
                .map(|(e, _)| (&self.loads[*e] + demand) / &self.spec.power_edges[*e].capacity)
                .max()
                .unwrap_or_else(Rational::zero);
            let ids: Vec<&str> = c.hops.iter().map(|(e, _)| self.spec.power_edges[*e].id.as_str()).collect();
            (ratio, ids)
        };
        let mut keyed: Vec<_> = found.into_iter().map(|c| (key(&c), c)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.into_iter().map(|(_, c)| c).collect()
    }

    fn descend(&self, at: usize, dist: &[usize], hops: &mut Vec<(usize, bool)>, producer: usize, out: &mut Vec<Candidate>) {
        if out.len() >= MAX_CANDIDATES {
            return;
        }
        if dist[at] == 0 {
            out.push(Candidate {
                producer,
                hops: hops.clone(),
            });
            return;
        }
        let mut next: Vec<_> = self.adjacency[at]
            .iter()
            .filter(|(_, w)| dist[*w] + 1 == dist[at])
            .copied()
            .collect();
        next.sort_by(|a, b| self.spec.power_edges[a.0].id.cmp(&self.spec.power_edges[b.0].id));
        for (e, w) in next {
            hops.push((e, self.spec.power_edges[e].from == at));
            self.descend(w, dist, hops, producer, out);
            hops.pop();
        }
    }

    fn route(&mut self, consumer: usize, demand: &Rational, candidate: &Candidate) {
        for (e, forward) in &candidate.hops {
            self.loads[*e] += demand;
            if *forward {
                self.flows[*e] += demand;
            } else {
                self.flows[*e] -= demand;
            }
        }
        self.remaining[candidate.producer] -= demand;
        self.served[consumer] = true;
    }

    fn finish(self) -> FlowSolution {
        FlowSolution {
            loads: self.loads,
            flows: self.flows,
            served: self.served,
        }
    }
}

/// Routes all demand given the failed edges. `routing[i]` selects the rank
/// of the candidate path used for the `i`-th consumer (default 0, the
/// preferred one).
pub fn solve_flow(spec: &GridSpec, failed: &BTreeSet<usize>, routing: &[u16]) -> FlowSolution {
    solve_traced(spec, failed, routing).0
}

fn solve_traced(spec: &GridSpec, failed: &BTreeSet<usize>, routing: &[u16]) -> (FlowSolution, Vec<usize>) {
    let mut router = Router::new(spec, failed);
    let mut options = Vec::new();
    for (i, v) in spec.consumers().into_iter().enumerate() {
        let demand = -spec.nodes[v].balance.clone();
        let candidates = router.candidates(v, &demand);
        options.push(candidates.len());
        if candidates.is_empty() {
            continue;
        }
        let rank = (routing.get(i).copied().unwrap_or(0) as usize).min(candidates.len() - 1);
        router.route(v, &demand, &candidates[rank]);
    }
    (router.finish(), options)
}

/// Distinct routings available on a topology: rank vectors (trailing
/// zeros trimmed) in lexicographic order, deduplicated by their loads and
/// capped at `cap`. The first is always the default routing.
pub fn routing_plans(spec: &GridSpec, failed: &BTreeSet<usize>, cap: usize) -> Vec<Vec<u16>> {
    let consumers = spec.consumers().len();
    let mut plans = Vec::new();
    let mut seen = Vec::new();
    let mut stack = vec![Vec::<u16>::new()];
    while let Some(prefix) = stack.pop() {
        if plans.len() >= cap {
            break;
        }
        let (solution, options) = solve_traced(spec, failed, &prefix);
        if prefix.len() == consumers {
            if !seen.contains(&solution) {
                seen.push(solution);
                let mut plan = prefix;
                while plan.last() == Some(&0) {
                    plan.pop();
                }
                plans.push(plan);
            }
            continue;
        }
        let count = options[prefix.len()].max(1);
        for rank in (0..count).rev() {
            let mut next = prefix.clone();
            next.push(rank as u16);
            stack.push(next);
        }
    }
    plans
}

/// Checks net flow balance: every served consumer receives its demand,
/// unserved consumers receive nothing, and producers emit what they ship.
pub fn conservation_holds(spec: &GridSpec, solution: &FlowSolution) -> bool {
    let mut net_in = vec![Rational::zero(); spec.nodes.len()];
    for (e, edge) in spec.power_edges.iter().enumerate() {
        net_in[edge.to] += &solution.flows[e];
        net_in[edge.from] -= &solution.flows[e];
    }
    let mut shipped = Rational::zero();
    let mut served_demand = Rational::zero();
    for (v, node) in spec.nodes.iter().enumerate() {
        if spec.is_producer(v) {
            if net_in[v] > Rational::zero() || -&net_in[v] > node.balance {
                return false;
            }
            shipped -= &net_in[v];
        } else {
            let expected = if solution.served[v] {
                -node.balance.clone()
            } else {
                Rational::zero()
            };
            if net_in[v] != expected {
                return false;
            }
            served_demand += expected;
        }
    }
    shipped == served_demand
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::ratio;
    use crate::powergrid::spec::load_grid;

    fn diamond() -> GridSpec {
        load_grid(
            r#"{
            "nodes": [
                {"id": "P", "balance": 4, "criticality_rate": 0},
                {"id": "X", "balance": 0, "criticality_rate": 0},
                {"id": "Y", "balance": 0, "criticality_rate": 0},
                {"id": "Z", "balance": -3, "criticality_rate": 1}
            ],
            "power_edges": [
                {"id": "a", "from": "P", "to": "X", "capacity": 2, "p_base": 0, "k": 1},
                {"id": "b", "from": "P", "to": "Y", "capacity": 4, "p_base": 0, "k": 1},
                {"id": "c", "from": "X", "to": "Z", "capacity": 2, "p_base": 0, "k": 1},
                {"id": "d", "from": "Z", "to": "Y", "capacity": 4, "p_base": 0, "k": 1}
            ],
            "cycle_length": 1
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn formula_boundaries() {
        let (c, p, k) = (ratio(10, 1), ratio(1, 100), ratio(1, 2));
        assert_eq!(failure_probability(&ratio(0, 1), &c, &p, &k).unwrap(), p);
        assert_eq!(failure_probability(&c, &c, &p, &k).unwrap(), p);
        assert_eq!(failure_probability(&ratio(14, 1), &c, &p, &k).unwrap(), ratio(21, 100));
        assert_eq!(failure_probability(&ratio(100, 1), &c, &p, &k).unwrap(), ratio(1, 1));
        assert!(matches!(
            failure_probability(&c, &ratio(0, 1), &p, &k),
            Err(Error::NonpositiveCapacity(_))
        ));
    }

    #[test]
    fn prefers_uncongested_equal_hop_path() {
        let spec = diamond();
        let s = solve_flow(&spec, &BTreeSet::new(), &[]);
        assert_eq!(s.loads, vec![ratio(0, 1), ratio(3, 1), ratio(0, 1), ratio(3, 1)]);
        assert_eq!(s.flows[3], ratio(-3, 1));
        assert!(s.served.iter().all(|x| *x));
        assert!(conservation_holds(&spec, &s));
    }

    #[test]
    fn overrides_select_other_ranks() {
        let spec = diamond();
        let s = solve_flow(&spec, &BTreeSet::new(), &[0, 0, 1]);
        assert_eq!(s.loads[0], ratio(3, 1));
        assert!(conservation_holds(&spec, &s));
        assert_eq!(routing_plans(&spec, &BTreeSet::new(), 8), vec![vec![], vec![0, 0, 1]]);
    }

    #[test]
    fn disconnection_leaves_nodes_unserved() {
        let spec = diamond();
        let all: BTreeSet<usize> = (0..4).collect();
        let s = solve_flow(&spec, &all, &[]);
        assert_eq!(s.served, vec![true, false, false, false]);
        assert!(s.loads.iter().all(Zero::is_zero));
        assert!(conservation_holds(&spec, &s));
    }

    #[test]
    fn insufficient_supply_is_unserved() {
        let mut spec = diamond();
        spec.nodes[0].balance = ratio(2, 1);
        let s = solve_flow(&spec, &BTreeSet::new(), &[]);
        assert!(!s.served[3]);
        assert!(s.served[1] && s.served[2]);
        assert!(conservation_holds(&spec, &s));
    }
}
