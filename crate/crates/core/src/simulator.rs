//! Synchronous radio channel with collision detection.
//!
//! Each global round runs in two steps: every awake, running node decides
//! from its history as of the start of the round, then the channel is
//! resolved and entries are appended. A node wakes spontaneously at its tag,
//! or earlier when exactly one neighbour transmits to it while it sleeps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Configuration};
use crate::drip::{Action, Drip, DripError, History, HistoryEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("round cap of {0} global rounds exceeded")]
    RoundCap(u64),
    #[error("node {node} failed in global round {round}: {source}")]
    Drip {
        node: usize,
        round: u64,
        source: DripError,
    },
}

/// Default cap: four times the canonical protocol's round bound.
pub fn default_round_cap(c: &Configuration) -> u64 {
    4 * canonical_round_bound(c)
}

/// `ceil(n/2) * (n(2 sigma + 1) + sigma) + 1`.
pub fn canonical_round_bound(c: &Configuration) -> u64 {
    let n = c.n() as u64;
    let sigma = c.sigma();
    n.div_ceil(2) * (n * (2 * sigma + 1) + sigma) + 1
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    pub round_cap: Option<u64>,
}

/// Per-node action slot for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundAction {
    Asleep,
    /// Terminated (or deciding to terminate this round): neither sends nor hears.
    Inactive,
    Listen,
    Transmit(String),
}

/// What the channel delivers to one node in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelOutcome {
    /// Entry appended to an active node's history.
    Heard(HistoryEntry),
    /// A sleeping node woken by a single transmitting neighbour.
    Woken(String),
    /// A sleeping node; `collided` when two or more neighbours transmitted.
    Asleep {
        collided: bool,
    },
    Inactive,
}

/// Resolves one round of the channel.
pub fn resolve_round(actions: &[RoundAction], c: &Configuration) -> Vec<ChannelOutcome> {
    (0..actions.len())
        .map(|v| {
            let mut senders = c.neighbours(v).iter().filter_map(|&w| match &actions[w] {
                RoundAction::Transmit(p) => Some(p),
                _ => None,
            });
            let first = senders.next();
            let collided = first.is_some() && senders.next().is_some();
            match (&actions[v], first) {
                (RoundAction::Inactive, _) => ChannelOutcome::Inactive,
                (RoundAction::Transmit(_), _) => ChannelOutcome::Heard(HistoryEntry::Silence),
                (RoundAction::Listen, None) => ChannelOutcome::Heard(HistoryEntry::Silence),
                (RoundAction::Listen, Some(_)) if collided => {
                    ChannelOutcome::Heard(HistoryEntry::Noise)
                }
                (RoundAction::Listen, Some(p)) => {
                    ChannelOutcome::Heard(HistoryEntry::Message(p.clone()))
                }
                (RoundAction::Asleep, Some(p)) if !collided => ChannelOutcome::Woken(p.clone()),
                (RoundAction::Asleep, _) => ChannelOutcome::Asleep { collided },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub node: usize,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub node: usize,
    pub local_round: u64,
    pub entry: HistoryEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub global_round: u64,
    pub transmitters: Vec<Transmission>,
    pub deliveries: Vec<Delivery>,
    /// Sleeping nodes that heard a collision and stayed asleep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collisions_while_asleep: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node: usize,
    pub tag: u64,
    pub wake_global_round: u64,
    pub forced_wakeup: bool,
    /// Local round of the first `Terminate`.
    pub done_round: u64,
    /// Entries for local rounds `0..done_round`.
    pub history: History,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub rounds: Vec<RoundRecord>,
    pub nodes: Vec<NodeSummary>,
    pub total_global_rounds: u64,
}

impl ExecutionTrace {
    /// Global round in which the last node terminated.
    pub fn last_termination_round(&self) -> u64 {
        self.nodes
            .iter()
            .map(|s| s.wake_global_round + s.done_round)
            .max()
            .unwrap_or(0)
    }

    pub fn history(&self, v: usize) -> &History {
        &self.nodes[v].history
    }

    pub fn all_spontaneous(&self) -> bool {
        self.nodes
            .iter()
            .all(|s| !s.forced_wakeup && s.wake_global_round == s.tag)
    }

    /// Transmissions in global rounds `0..=last`.
    pub fn transmissions_through(&self, last: u64) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.global_round <= last)
            .map(|r| r.transmitters.len())
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("trace serializes")
    }

    /// One DOT graph per round; transmitting nodes are filled.
    pub fn to_dot(&self, c: &Configuration) -> String {
        let mut out = String::new();
        for r in &self.rounds {
            let _ = writeln!(out, "graph round_{} {{", r.global_round);
            let _ = writeln!(out, "  label=\"global round {}\";", r.global_round);
            for v in 0..c.n() {
                let sending = r.transmitters.iter().find(|t| t.node == v);
                match sending {
                    Some(t) => {
                        let _ = writeln!(
                            out,
                            "  {v} [label=\"{v} t={} tx={}\", style=filled, fillcolor=orange];",
                            c.tag(v),
                            t.payload
                        );
                    }
                    None => {
                        let _ = writeln!(out, "  {v} [label=\"{v} t={}\"];", c.tag(v));
                    }
                }
            }
            for (a, b) in c.edges() {
                let _ = writeln!(out, "  {a} -- {b};");
            }
            out.push_str("}\n");
        }
        out
    }
}

struct NodeState {
    wake: Option<u64>,
    forced: bool,
    history: History,
    done: Option<u64>,
}

/// Runs `drip` on `c` from global round 0 until every node has terminated.
pub fn run<D: Drip + ?Sized>(
    c: &Configuration,
    drip: &D,
    options: SimOptions,
) -> Result<ExecutionTrace, SimError> {
    c.ensure_ready()?;
    let n = c.n();
    let cap = options.round_cap.unwrap_or_else(|| default_round_cap(c));
    let mut states: Vec<NodeState> = (0..n)
        .map(|_| NodeState {
            wake: None,
            forced: false,
            history: History::default(),
            done: None,
        })
        .collect();
    let mut rounds = Vec::new();

    let mut global = 0u64;
    loop {
        if global >= cap {
            return Err(SimError::RoundCap(cap));
        }
        let mut actions = Vec::with_capacity(n);
        for (v, s) in states.iter_mut().enumerate() {
            let action = match (s.wake, s.done) {
                (None, _) => RoundAction::Asleep,
                (Some(_), Some(_)) => RoundAction::Inactive,
                (Some(wake), None) => {
                    let local = global - wake;
                    match drip.decide(&s.history).map_err(|source| SimError::Drip {
                        node: v,
                        round: global,
                        source,
                    })? {
                        Action::Listen => RoundAction::Listen,
                        Action::Transmit(p) => RoundAction::Transmit(p),
                        Action::Terminate => {
                            s.done = Some(local);
                            RoundAction::Inactive
                        }
                    }
                }
            };
            actions.push(action);
        }

        let outcomes = resolve_round(&actions, c);
        let mut record = RoundRecord {
            global_round: global,
            transmitters: actions
                .iter()
                .enumerate()
                .filter_map(|(node, a)| match a {
                    RoundAction::Transmit(p) => Some(Transmission {
                        node,
                        payload: p.clone(),
                    }),
                    _ => None,
                })
                .collect(),
            deliveries: Vec::new(),
            collisions_while_asleep: Vec::new(),
        };
        for (v, outcome) in outcomes.into_iter().enumerate() {
            let s = &mut states[v];
            let entry = match outcome {
                ChannelOutcome::Inactive => continue,
                ChannelOutcome::Heard(e) => e,
                ChannelOutcome::Woken(p) => {
                    s.wake = Some(global);
                    s.forced = true;
                    HistoryEntry::Message(p)
                }
                ChannelOutcome::Asleep { collided } => {
                    if collided {
                        record.collisions_while_asleep.push(v);
                    }
                    if global != c.tag(v) {
                        continue;
                    }
                    s.wake = Some(global);
                    HistoryEntry::Silence
                }
            };
            record.deliveries.push(Delivery {
                node: v,
                local_round: global - s.wake.expect("node is awake"),
                entry: entry.clone(),
            });
            s.history.push(entry);
        }
        rounds.push(record);

        if states.iter().all(|s| s.done.is_some()) {
            break;
        }
        global += 1;
    }

    let nodes = states
        .into_iter()
        .enumerate()
        .map(|(node, s)| NodeSummary {
            node,
            tag: c.tag(node),
            wake_global_round: s.wake.expect("all nodes woke"),
            forced_wakeup: s.forced,
            done_round: s.done.expect("all nodes terminated"),
            history: s.history,
        })
        .collect();
    Ok(ExecutionTrace {
        rounds,
        nodes,
        total_global_rounds: global + 1,
    })
}
