//! Enumeration of the simulation tree: every evolution of a model from an
//! initial state up to a horizon, as a finite tree of transitions.
//!
//! Stepping rules at a node in state `q`, entered at time `e`, now at `t`:
//!
//! * the next scheduled occasion at `o` is handled first if `o <= e + σ(q)`
//!   (ties go to the external event); each alternative either triggers
//!   `external_dist` or, when ignored, continues in `q` along a single
//!   merged *silent* edge;
//! * otherwise `q` expires at `e + σ(q)` and branches over `internal_dist`;
//! * nothing scheduled at or after the horizon is expanded, so every leaf's
//!   residual dwell ends exactly at the horizon.

use std::fmt::Write as _;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{EventSet, ModelBehavior, NodeRole};
use crate::num::{format_rational, Duration, Rational};
use crate::par::{self, Execution};
use crate::path::{PathElement, SimulationPath};
use crate::scenario::Scenario;

pub const DEFAULT_MAX_ZERO_DELAY: usize = 1000;
pub const DEFAULT_NODE_LIMIT: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// How a node was reached from its parent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Edge {
    Root,
    /// A state transition; an empty event set marks an internal one.
    Transition(EventSet),
    /// An occasion passed without affecting the state.
    Silent,
}

/// How a node branches into its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branching {
    Leaf,
    Internal,
    Occasion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Cursor<S> {
    pub state: S,
    pub entered_at: Rational,
    pub time: Rational,
    pub next_occasion: usize,
    pub zero_run: usize,
}

pub(crate) struct ChildSpec<S> {
    pub edge: Edge,
    pub probability: Rational,
    pub cursor: Cursor<S>,
}

pub(crate) struct Expansion<S> {
    pub branching: Branching,
    pub role: NodeRole,
    pub children: Vec<ChildSpec<S>>,
}

/// Computes the children of one cursor position.
pub(crate) fn expand<B: ModelBehavior>(
    behavior: &B,
    scenario: &Scenario,
    cursor: &Cursor<B::State>,
    max_zero_delay: usize,
) -> Result<Expansion<B::State>> {
    let horizon = scenario.horizon();
    let leaf = || Expansion {
        branching: Branching::Leaf,
        role: NodeRole::Chance,
        children: Vec::new(),
    };
    if cursor.time >= *horizon {
        return Ok(leaf());
    }
    let expiry = match behavior.sigma(&cursor.state)? {
        Duration::Finite(s) => Duration::Finite(&cursor.entered_at + s),
        Duration::Infinite => Duration::Infinite,
    };
    let occasion = scenario.occasions().get(cursor.next_occasion);
    let occasion_first = match (&occasion, &expiry) {
        (Some(o), Duration::Finite(x)) => o.at <= *x,
        (Some(_), Duration::Infinite) => true,
        (None, _) => false,
    };

    let child_cursor = |state: B::State, entered_at: Rational, time: Rational, next: usize| {
        let zero_run = if time == cursor.time { cursor.zero_run + 1 } else { 0 };
        if zero_run > max_zero_delay {
            return Err(Error::ZeroDelayCycle {
                limit: max_zero_delay,
                state: behavior.state_name(&cursor.state),
            });
        }
        Ok(Cursor {
            state,
            entered_at,
            time,
            next_occasion: next,
            zero_run,
        })
    };

    if occasion_first {
        let occ = occasion.expect("occasion present");
        if occ.at >= *horizon {
            return Ok(leaf());
        }
        let elapsed = &occ.at - &cursor.entered_at;
        let next = cursor.next_occasion + 1;
        let mut children = Vec::new();
        let mut silent = Rational::zero();
        for (events, p) in &occ.alternatives {
            if p.is_zero() {
                continue;
            }
            let dist = if events.is_empty() {
                None
            } else {
                behavior.external_dist(&cursor.state, &elapsed, events)?
            };
            match dist {
                None => silent += p,
                Some(dist) => {
                    for (target, pt) in dist.into_entries() {
                        let probability = p * pt;
                        if probability.is_zero() {
                            continue;
                        }
                        children.push(ChildSpec {
                            edge: Edge::Transition(events.clone()),
                            probability,
                            cursor: child_cursor(target, occ.at.clone(), occ.at.clone(), next)?,
                        });
                    }
                }
            }
        }
        if !silent.is_zero() {
            children.push(ChildSpec {
                edge: Edge::Silent,
                probability: silent,
                cursor: child_cursor(
                    cursor.state.clone(),
                    cursor.entered_at.clone(),
                    occ.at.clone(),
                    next,
                )?,
            });
        }
        return Ok(Expansion {
            branching: Branching::Occasion,
            role: NodeRole::Chance,
            children,
        });
    }

    let Duration::Finite(at) = expiry else {
        return Ok(leaf());
    };
    if at >= *horizon {
        return Ok(leaf());
    }
    let role = behavior.role(&cursor.state)?;
    let dist = behavior.internal_dist(&cursor.state)?;
    let mut children = Vec::with_capacity(dist.len());
    for (target, p) in dist.into_entries() {
        if p.is_zero() && !role.is_decision() {
            continue;
        }
        children.push(ChildSpec {
            edge: Edge::Transition(EventSet::empty()),
            probability: p,
            cursor: child_cursor(target, at.clone(), at.clone(), cursor.next_occasion)?,
        });
    }
    Ok(Expansion {
        branching: Branching::Internal,
        role,
        children,
    })
}

#[derive(Debug, Clone)]
pub struct TreeNode<S> {
    cursor: Cursor<S>,
    parent: Option<NodeId>,
    edge: Edge,
    probability: Rational,
    reach: Rational,
    depth: u32,
    branching: Branching,
    role: NodeRole,
    first_child: u32,
    child_count: u32,
}

impl<S> TreeNode<S> {
    pub fn state(&self) -> &S {
        &self.cursor.state
    }

    /// Absolute time at which the current state was entered.
    pub fn entered_at(&self) -> &Rational {
        &self.cursor.entered_at
    }

    /// Absolute model time of this node.
    pub fn time(&self) -> &Rational {
        &self.cursor.time
    }

    /// Time spent in the current state when this node is reached.
    pub fn elapsed(&self) -> Rational {
        &self.cursor.time - &self.cursor.entered_at
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn edge(&self) -> &Edge {
        &self.edge
    }

    /// Probability of the edge from the parent (1 at the root).
    pub fn probability(&self) -> &Rational {
        &self.probability
    }

    /// Product of edge probabilities from the root.
    pub fn reach(&self) -> &Rational {
        &self.reach
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn branching(&self) -> Branching {
        self.branching
    }

    /// Role of the state when the node branches internally; always
    /// `Chance` for occasion branching and leaves.
    pub fn role(&self) -> NodeRole {
        self.role
    }

    pub fn is_leaf(&self) -> bool {
        self.child_count == 0
    }

    pub fn is_decision(&self) -> bool {
        self.branching == Branching::Internal && self.role.is_decision()
    }

    /// Index of the next unprocessed scenario occasion.
    pub fn next_occasion(&self) -> usize {
        self.cursor.next_occasion
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    pub max_zero_delay: usize,
    pub node_limit: usize,
    pub execution: Execution,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_zero_delay: DEFAULT_MAX_ZERO_DELAY,
            node_limit: DEFAULT_NODE_LIMIT,
            execution: Execution::default(),
        }
    }
}

/// The finite tree of all simulation paths from one initial state.
pub struct Language<'b, B: ModelBehavior> {
    behavior: &'b B,
    scenario: Scenario,
    nodes: Vec<TreeNode<B::State>>,
}

pub fn build_tree<'b, B: ModelBehavior>(
    behavior: &'b B,
    initial: B::State,
    scenario: &Scenario,
) -> Result<Language<'b, B>> {
    build_tree_with(behavior, initial, scenario, &TreeConfig::default())
}

pub fn build_tree_with<'b, B: ModelBehavior>(
    behavior: &'b B,
    initial: B::State,
    scenario: &Scenario,
    config: &TreeConfig,
) -> Result<Language<'b, B>> {
    behavior.sigma(&initial)?;
    let root = TreeNode {
        cursor: Cursor {
            state: initial,
            entered_at: Rational::zero(),
            time: Rational::zero(),
            next_occasion: 0,
            zero_run: 0,
        },
        parent: None,
        edge: Edge::Root,
        probability: Rational::one(),
        reach: Rational::one(),
        depth: 0,
        branching: Branching::Leaf,
        role: NodeRole::Chance,
        first_child: 0,
        child_count: 0,
    };
    let mut nodes = vec![root];
    let mut frontier = 0..1usize;
    while !frontier.is_empty() {
        let expansions = par::map_range(config.execution, frontier.len(), |i| {
            expand(
                behavior,
                scenario,
                &nodes[frontier.start + i].cursor,
                config.max_zero_delay,
            )
        });
        let level_start = nodes.len();
        for (offset, expansion) in expansions.into_iter().enumerate() {
            let expansion = expansion?;
            let parent = frontier.start + offset;
            let count = expansion.children.len();
            if nodes.len() + count > config.node_limit {
                return Err(Error::ExplosionLimit {
                    limit: config.node_limit,
                });
            }
            let first = nodes.len() as u32;
            let (parent_reach, depth) = (nodes[parent].reach.clone(), nodes[parent].depth + 1);
            for child in expansion.children {
                nodes.push(TreeNode {
                    reach: &parent_reach * &child.probability,
                    cursor: child.cursor,
                    parent: Some(NodeId(parent as u32)),
                    edge: child.edge,
                    probability: child.probability,
                    depth,
                    branching: Branching::Leaf,
                    role: NodeRole::Chance,
                    first_child: 0,
                    child_count: 0,
                });
            }
            let node = &mut nodes[parent];
            node.first_child = first;
            node.child_count = count as u32;
            node.branching = if count == 0 {
                Branching::Leaf
            } else {
                expansion.branching
            };
            node.role = if count == 0 {
                NodeRole::Chance
            } else {
                expansion.role
            };
        }
        frontier = level_start..nodes.len();
    }
    Ok(Language {
        behavior,
        scenario: scenario.clone(),
        nodes,
    })
}

impl<'b, B: ModelBehavior> Language<'b, B> {
    pub fn behavior(&self) -> &'b B {
        self.behavior
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn horizon(&self) -> &Rational {
        self.scenario.horizon()
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn node(&self, id: NodeId) -> &TreeNode<B::State> {
        &self.nodes[id.index()]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node ids in breadth-first order; parents precede children.
    pub fn node_ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Children of `id`: every node reachable by one transition or one
    /// silently passed occasion. Empty for leaves.
    pub fn successors(&self, id: NodeId) -> Vec<NodeId> {
        let n = &self.nodes[id.index()];
        (n.first_child..n.first_child + n.child_count)
            .map(NodeId)
            .collect()
    }

    /// Leaves below `id` in depth-first, table order.
    pub fn leaves_under(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n.index()];
            if node.is_leaf() {
                out.push(n);
            } else {
                stack.extend(
                    (node.first_child..node.first_child + node.child_count)
                        .rev()
                        .map(NodeId),
                );
            }
        }
        out
    }

    /// All leaves in enumeration order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.leaves_under(NodeId::ROOT)
    }

    pub fn path_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Nodes from the root down to `id`, inclusive.
    pub fn lineage(&self, id: NodeId) -> Vec<NodeId> {
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur.index()].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    /// The simulation path ending at leaf (or inner node) `id`; the
    /// residual dwell runs to the horizon.
    pub fn path_to(&self, id: NodeId) -> SimulationPath<B::State> {
        let chain = self.lineage(id);
        let mut elements = Vec::new();
        let mut entered = Rational::zero();
        for pair in chain.windows(2) {
            let child = &self.nodes[pair[1].index()];
            if let Edge::Transition(events) = &child.edge {
                elements.push(PathElement {
                    state: child.cursor.state.clone(),
                    lifetime: &child.cursor.entered_at - &entered,
                    events: events.clone(),
                });
                entered = child.cursor.entered_at.clone();
            }
        }
        SimulationPath {
            initial: self.nodes[0].cursor.state.clone(),
            elements,
            residual: self.horizon() - &entered,
        }
    }

    /// Every root-to-leaf path exactly once, depth-first in table order.
    pub fn paths(&self) -> impl Iterator<Item = SimulationPath<B::State>> + '_ {
        self.leaves().into_iter().map(move |leaf| self.path_to(leaf))
    }

    /// Nodes reached after consuming all of `elements` from `start`,
    /// following silent edges freely.
    fn match_elements(&self, start: NodeId, elements: &[PathElement<B::State>]) -> Vec<NodeId> {
        let mut found = Vec::new();
        let mut stack = vec![(start, 0usize)];
        while let Some((id, consumed)) = stack.pop() {
            let node = &self.nodes[id.index()];
            if consumed == elements.len() {
                found.push(id);
                continue;
            }
            let want = &elements[consumed];
            for c in (node.first_child..node.first_child + node.child_count).rev() {
                let child = &self.nodes[c as usize];
                match &child.edge {
                    Edge::Silent => stack.push((NodeId(c), consumed)),
                    Edge::Transition(events) => {
                        if child.cursor.state == want.state
                            && *events == want.events
                            && &child.cursor.entered_at - &node.cursor.entered_at == want.lifetime
                        {
                            stack.push((NodeId(c), consumed + 1));
                        }
                    }
                    Edge::Root => {}
                }
            }
        }
        found
    }

    /// The leaf whose path equals `path`.
    pub fn find_leaf(&self, path: &SimulationPath<B::State>) -> Option<NodeId> {
        if path.initial != self.nodes[0].cursor.state {
            return None;
        }
        self.match_elements(NodeId::ROOT, &path.elements)
            .into_iter()
            .flat_map(|n| self.silent_leaves(n))
            .find(|leaf| self.horizon() - &self.nodes[leaf.index()].cursor.entered_at == path.residual)
    }

    fn silent_leaves(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n.index()];
            if node.is_leaf() {
                out.push(n);
            }
            for c in (node.first_child..node.first_child + node.child_count).rev() {
                if self.nodes[c as usize].edge == Edge::Silent {
                    stack.push(NodeId(c));
                }
            }
        }
        out
    }

    /// Nodes at which `prefix` has been fully consumed.
    pub fn prefix_nodes(&self, prefix: &SimulationPath<B::State>) -> Vec<NodeId> {
        if prefix.initial != self.nodes[0].cursor.state {
            return Vec::new();
        }
        self.match_elements(NodeId::ROOT, &prefix.elements)
    }

    /// All paths extending `prefix`, in enumeration order.
    pub fn subset_with_prefix(
        &self,
        prefix: &SimulationPath<B::State>,
    ) -> Result<Vec<SimulationPath<B::State>>> {
        let starts = self.prefix_nodes(prefix);
        if starts.is_empty() {
            return Err(Error::PrefixNotFound);
        }
        let mut leaves: Vec<NodeId> = starts.iter().flat_map(|s| self.leaves_under(*s)).collect();
        let order: std::collections::HashMap<NodeId, usize> = self
            .leaves()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        leaves.sort_by_key(|l| order[l]);
        leaves.dedup();
        Ok(leaves.into_iter().map(|l| self.path_to(l)).collect())
    }

    /// The scenario as seen from node `id`, for re-rooting the assessment
    /// there with the remaining horizon.
    pub fn scenario_from(&self, id: NodeId) -> Result<Scenario> {
        let node = &self.nodes[id.index()];
        self.scenario.shifted(&node.cursor.time, node.cursor.next_occasion)
    }

    /// Line-oriented dump, one node per line in depth-first order:
    /// `depth  state  elapsed  trigger  probability`, tab separated.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![NodeId::ROOT];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id.index()];
            let trigger = match &n.edge {
                Edge::Root => "-".to_string(),
                Edge::Silent => "pass".to_string(),
                Edge::Transition(ev) if ev.is_empty() => "internal".to_string(),
                Edge::Transition(ev) => ev.to_string(),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                n.depth,
                self.behavior.state_name(&n.cursor.state),
                format_rational(&n.elapsed()),
                trigger,
                format_rational(&n.probability)
            );
            stack.extend(
                (n.first_child..n.first_child + n.child_count)
                    .rev()
                    .map(NodeId),
            );
        }
        out
    }
}
