//! Dedicated leader election on feasible configurations, and the oracle that
//! compares classifier partitions against simulated histories.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{classify, PartitionTrace, Verdict};
use crate::config::{ConfigError, Configuration};
use crate::drip::{build_canonical, CanonicalProtocol, DripError, History, PhasePosition};
use crate::simulator::{canonical_round_bound, run, ExecutionTrace, SimError, SimOptions};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElectionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("configuration is infeasible (classifier answered NO at iteration {iteration})")]
    Infeasible { iteration: usize },
    #[error(transparent)]
    Protocol(#[from] DripError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("designated leader {leader} shares its history with node {other}")]
    NotUnique { leader: usize, other: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionResult {
    /// Simulator-side index of the leader.
    pub leader: usize,
    pub leader_history: History,
    /// Global round in which the last node terminated.
    pub rounds_used: u64,
    pub per_node_decision: Vec<u8>,
    pub winning_class: u32,
    pub verdict_iteration: usize,
}

impl ElectionResult {
    /// The decision function: 1 exactly for the leader's terminal history.
    pub fn decide(&self, history: &History) -> u8 {
        u8::from(*history == self.leader_history)
    }
}

/// Everything one canonical run produces.
#[derive(Debug, Clone)]
pub struct CanonicalRun {
    pub trace: PartitionTrace,
    pub protocol: CanonicalProtocol,
    pub execution: ExecutionTrace,
}

/// Classifies `c`, builds its canonical protocol and simulates it.
pub fn run_canonical(
    c: &Configuration,
    options: SimOptions,
) -> Result<CanonicalRun, ElectionError> {
    let trace = classify(c)?;
    let protocol = build_canonical(&trace)?;
    let execution = run(c, &protocol, options)?;
    Ok(CanonicalRun {
        trace,
        protocol,
        execution,
    })
}

/// Elects the member of the smallest singleton class at the verdict iteration.
pub fn elect(c: &Configuration) -> Result<ElectionResult, ElectionError> {
    elect_with(c, SimOptions::default()).map(|(r, _)| r)
}

pub fn elect_with(
    c: &Configuration,
    options: SimOptions,
) -> Result<(ElectionResult, CanonicalRun), ElectionError> {
    let trace = classify(c)?;
    let (winning_class, verdict_iteration) = match trace.verdict {
        Verdict::Yes { class, iteration } => (class, iteration),
        Verdict::No { iteration } => return Err(ElectionError::Infeasible { iteration }),
    };
    let protocol = build_canonical(&trace)?;
    let execution = run(c, &protocol, options)?;
    let leader = trace.final_snapshot().rep(winning_class);
    let leader_history = execution.history(leader).clone();
    if let Some(other) =
        (0..c.n()).find(|&w| w != leader && *execution.history(w) == leader_history)
    {
        return Err(ElectionError::NotUnique { leader, other });
    }
    let result = ElectionResult {
        leader,
        rounds_used: execution.last_termination_round(),
        per_node_decision: (0..c.n())
            .map(|v| u8::from(*execution.history(v) == leader_history))
            .collect(),
        leader_history,
        winning_class,
        verdict_iteration,
    };
    Ok((
        result,
        CanonicalRun {
            trace,
            protocol,
            execution,
        },
    ))
}

/// A disagreement found by [`cross_check`] or [`audit_canonical_run`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mismatch {
    /// Classifier and simulated histories disagree on whether `v`, `w` belong together.
    Partition {
        phase: usize,
        v: usize,
        w: usize,
        same_class: bool,
        same_history: bool,
    },
    Verdict {
        classifier_yes: bool,
        unique_history: bool,
    },
    Leader {
        expected: usize,
    },
    Transmission {
        global_round: u64,
        node: usize,
        detail: String,
    },
    Patience {
        detail: String,
    },
    Termination {
        node: usize,
        done_round: u64,
        expected: u64,
    },
    RoundBound {
        rounds_used: u64,
        bound: u64,
    },
    Execution {
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub sigma: u64,
    pub verdict: String,
    pub phases_checked: usize,
    pub unique_history_exists: bool,
    pub rounds_used: u64,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Groups nodes by equality of `key(v)`; returns a class id per node.
fn partition_by<K: std::hash::Hash + Eq>(n: usize, key: impl Fn(usize) -> K) -> Vec<usize> {
    let mut ids = HashMap::new();
    (0..n)
        .map(|v| {
            let next = ids.len();
            *ids.entry(key(v)).or_insert(next)
        })
        .collect()
}

/// Compares the classifier's partition at every phase boundary with the
/// partition induced by equal simulated histories, plus the verdict.
pub fn cross_check(c: &Configuration) -> Result<OracleReport, ConfigError> {
    c.ensure_ready()?;
    let n = c.n();
    let trace = classify(c)?;
    let mut report = OracleReport {
        n,
        sigma: c.sigma(),
        verdict: trace.verdict.to_string(),
        phases_checked: 0,
        unique_history_exists: false,
        rounds_used: 0,
        mismatches: Vec::new(),
    };
    let protocol = match build_canonical(&trace) {
        Ok(p) => p,
        Err(e) => {
            report.mismatches.push(Mismatch::Execution {
                detail: e.to_string(),
            });
            return Ok(report);
        }
    };
    let execution = match run(c, &protocol, SimOptions::default()) {
        Ok(x) => x,
        Err(e) => {
            report.mismatches.push(Mismatch::Execution {
                detail: e.to_string(),
            });
            return Ok(report);
        }
    };
    report.rounds_used = execution.last_termination_round();

    for j in 1..=trace.snapshots.len() {
        let boundary = protocol.phase_end(j - 1) as usize;
        let classes = trace.classes_at_phase(j);
        let by_history = partition_by(n, |v| execution.history(v).through(boundary).to_vec());
        for v in 0..n {
            for w in v + 1..n {
                let same_class = classes[v] == classes[w];
                let same_history = by_history[v] == by_history[w];
                if same_class != same_history {
                    report.mismatches.push(Mismatch::Partition {
                        phase: j,
                        v,
                        w,
                        same_class,
                        same_history,
                    });
                }
            }
        }
        report.phases_checked += 1;
    }

    let final_ids = partition_by(n, |v| execution.history(v).clone());
    let mut counts = HashMap::new();
    for id in &final_ids {
        *counts.entry(*id).or_insert(0usize) += 1;
    }
    report.unique_history_exists = counts.values().any(|&k| k == 1);
    if trace.verdict.is_yes() != report.unique_history_exists {
        report.mismatches.push(Mismatch::Verdict {
            classifier_yes: trace.verdict.is_yes(),
            unique_history: report.unique_history_exists,
        });
    }
    if let Verdict::Yes { class, .. } = trace.verdict {
        let leader = trace.final_snapshot().rep(class);
        if counts[&final_ids[leader]] != 1 {
            report
                .mismatches
                .push(Mismatch::Leader { expected: leader });
        }
    }
    report
        .mismatches
        .extend(audit_canonical_run(c, &trace, &protocol, &execution));
    Ok(report)
}

/// Structural properties every canonical execution must have: patience,
/// the transmission offset law, block/class correspondence with exactly one
/// transmission per node per phase, uniform termination and the round bound.
pub fn audit_canonical_run(
    c: &Configuration,
    trace: &PartitionTrace,
    protocol: &CanonicalProtocol,
    execution: &ExecutionTrace,
) -> Vec<Mismatch> {
    let mut out = Vec::new();
    let n = c.n();
    let sigma = c.sigma();

    let early = execution.transmissions_through(sigma);
    if early != 0 {
        out.push(Mismatch::Patience {
            detail: format!("{early} transmissions in global rounds 0..={sigma}"),
        });
    }
    if !execution.all_spontaneous() {
        out.push(Mismatch::Patience {
            detail: "some node did not wake spontaneously at its tag".into(),
        });
    }

    let live_phases = protocol.num_phases() - 1;
    let mut sent = vec![vec![0usize; live_phases]; n];
    for record in &execution.rounds {
        let g = record.global_round;
        for t in &record.transmitters {
            let sender = t.node;
            let local = g - c.tag(sender);
            let PhasePosition::Block {
                phase,
                block,
                round,
            } = protocol.position(local)
            else {
                out.push(Mismatch::Transmission {
                    global_round: g,
                    node: sender,
                    detail: format!("transmitted outside a block at local round {local}"),
                });
                continue;
            };
            sent[sender][phase - 1] += 1;
            if round as u64 != sigma + 1 {
                out.push(Mismatch::Transmission {
                    global_round: g,
                    node: sender,
                    detail: format!("transmitted in block round {round}"),
                });
            }
            let class = trace.classes_at_phase(phase)[sender];
            if class != block {
                out.push(Mismatch::Transmission {
                    global_round: g,
                    node: sender,
                    detail: format!("used block {block} in phase {phase} but holds class {class}"),
                });
            }
            for &v in c.neighbours(sender) {
                let Some(v_local) = g.checked_sub(c.tag(v)) else {
                    continue;
                };
                let expected = sigma as i64 + 1 + c.tag(sender) as i64 - c.tag(v) as i64;
                match protocol.position(v_local) {
                    PhasePosition::Block { phase: p, block: b, round: h }
                        if p == phase && b == block && h as i64 == expected => {}
                    other => out.push(Mismatch::Transmission {
                        global_round: g,
                        node: sender,
                        detail: format!(
                            "neighbour {v} at {other:?}, expected phase {phase} block {block} round {expected}"
                        ),
                    }),
                }
            }
        }
    }
    for (v, per_phase) in sent.iter().enumerate() {
        for (j, &count) in per_phase.iter().enumerate() {
            if count != 1 {
                out.push(Mismatch::Transmission {
                    global_round: 0,
                    node: v,
                    detail: format!("{count} transmissions in phase {}", j + 1),
                });
            }
        }
    }

    let expected_done = protocol.termination_round();
    for s in &execution.nodes {
        if s.done_round != expected_done {
            out.push(Mismatch::Termination {
                node: s.node,
                done_round: s.done_round,
                expected: expected_done,
            });
        }
    }
    let bound = canonical_round_bound(c);
    let rounds_used = execution.last_termination_round();
    if rounds_used > bound || expected_done > bound {
        out.push(Mismatch::RoundBound { rounds_used, bound });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{gen_gm, gen_hm, gen_sm, gm_center};

    #[test]
    fn hm_elects_a_leader() {
        for m in 1..=4 {
            let r = elect(&gen_hm(m).unwrap()).unwrap();
            assert_eq!(
                r.per_node_decision.iter().map(|&d| d as u32).sum::<u32>(),
                1
            );
            assert!(r.rounds_used >= m);
            // All four nodes are singletons; class 1 belongs to node a.
            assert_eq!(r.leader, 0);
        }
    }

    #[test]
    fn gm_elects_center() {
        for m in 2..=4 {
            let r = elect(&gen_gm(m).unwrap()).unwrap();
            assert_eq!(r.leader, gm_center(m));
        }
    }

    #[test]
    fn single_node_elects_itself() {
        let c = Configuration::new(vec![0], vec![]).unwrap();
        let (r, run) = elect_with(&c, SimOptions::default()).unwrap();
        assert_eq!(r.leader, 0);
        assert_eq!(r.per_node_decision, vec![1]);
        assert_eq!(r.rounds_used, run.protocol.phase_end(1) + 1);
    }

    #[test]
    fn sm_is_infeasible() {
        assert_eq!(
            elect(&gen_sm(2).unwrap()),
            Err(ElectionError::Infeasible { iteration: 2 })
        );
    }

    #[test]
    fn decision_function_marks_only_leader() {
        let (r, run) = elect_with(&gen_hm(2).unwrap(), SimOptions::default()).unwrap();
        for v in 0..4 {
            assert_eq!(r.decide(run.execution.history(v)), u8::from(v == r.leader));
        }
    }

    #[test]
    fn oracle_examples() {
        let sm = cross_check(&gen_sm(3).unwrap()).unwrap();
        assert!(sm.is_clean(), "{:?}", sm.mismatches);
        assert!(!sm.unique_history_exists);
        let hm = cross_check(&gen_hm(2).unwrap()).unwrap();
        assert!(hm.is_clean(), "{:?}", hm.mismatches);
        assert!(hm.unique_history_exists);
        assert_eq!(hm.phases_checked, 2);
    }

    #[test]
    fn audit_flags_a_tampered_execution() {
        let c = gen_hm(1).unwrap();
        let mut run = run_canonical(&c, SimOptions::default()).unwrap();
        assert!(audit_canonical_run(&c, &run.trace, &run.protocol, &run.execution).is_empty());
        run.execution.nodes[2].done_round += 1;
        run.execution.rounds[1]
            .transmitters
            .push(crate::simulator::Transmission {
                node: 1,
                payload: "1".into(),
            });
        let found = audit_canonical_run(&c, &run.trace, &run.protocol, &run.execution);
        assert!(found.iter().any(|m| matches!(m, Mismatch::Patience { .. })));
        assert!(found
            .iter()
            .any(|m| matches!(m, Mismatch::Termination { node: 2, .. })));
    }
}
