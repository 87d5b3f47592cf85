//! Radio protocols as pure functions of a node's history, and the canonical
//! protocol derived from a classifier trace.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Flag, Label, PartitionTrace};

/// The payload every canonical transmission carries.
pub const CANONICAL_PAYLOAD: &str = "1";

/// What a node observed in one local round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryEntry {
    Silence,
    Message(String),
    Noise,
}

impl fmt::Display for HistoryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryEntry::Silence => write!(f, "-"),
            HistoryEntry::Message(m) => write!(f, "({m})"),
            HistoryEntry::Noise => write!(f, "*"),
        }
    }
}

/// Entries indexed by local round; entry 0 records how the node woke up.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History(pub Vec<HistoryEntry>);

impl History {
    pub fn spontaneous() -> Self {
        History(vec![HistoryEntry::Silence])
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, entry: HistoryEntry) {
        self.0.push(entry);
    }

    /// Entries for local rounds `0..=round`.
    pub fn through(&self, round: usize) -> &[HistoryEntry] {
        &self.0[..=round.min(self.0.len().saturating_sub(1))]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Listen,
    Transmit(String),
    Terminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DripError {
    #[error("history is empty; a node decides only after its wakeup round")]
    EmptyHistory,
    #[error("no entry of list {phase} matches the history (previous block {prev_block})")]
    NoMatch { phase: usize, prev_block: u32 },
    #[error("history covers {have} rounds but phase {phase} needs {need}")]
    HistoryTooShort {
        phase: usize,
        have: usize,
        need: usize,
    },
    #[error("phase {0} is out of range or terminal")]
    BadPhase(usize),
    #[error("classifier trace is malformed: {0}")]
    BadTrace(String),
    #[error("{0}")]
    Scripted(String),
}

/// A distributed radio protocol: the same pure function at every node.
pub trait Drip {
    /// Action for the next local round, given the rounds observed so far.
    fn decide(&self, history: &History) -> Result<Action, DripError>;
}

impl<D: Drip + ?Sized> Drip for &D {
    fn decide(&self, history: &History) -> Result<Action, DripError> {
        (**self).decide(history)
    }
}

/// Wraps a closure as a [`Drip`].
pub struct FnDrip<F>(pub F);

impl<F> Drip for FnDrip<F>
where
    F: Fn(&History) -> Action,
{
    fn decide(&self, history: &History) -> Result<Action, DripError> {
        Ok((self.0)(history))
    }
}

/// Listens until local round `terminate_at`, then terminates.
#[derive(Debug, Clone, Copy)]
pub struct ListenThenTerminate {
    pub terminate_at: usize,
}

impl Drip for ListenThenTerminate {
    fn decide(&self, history: &History) -> Result<Action, DripError> {
        if history.len() >= self.terminate_at {
            Ok(Action::Terminate)
        } else {
            Ok(Action::Listen)
        }
    }
}

/// One list entry: a class representative's previous class and its label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDescriptor {
    pub old_class: u32,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PhaseListRepr", into = "PhaseListRepr")]
pub enum PhaseList {
    Classes(Vec<ClassDescriptor>),
    Terminate,
}

const TERMINATE_MARKER: &str = "terminate";

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PhaseListRepr {
    Classes(Vec<ClassDescriptor>),
    Marker(String),
}

impl TryFrom<PhaseListRepr> for PhaseList {
    type Error = String;

    fn try_from(r: PhaseListRepr) -> Result<Self, Self::Error> {
        match r {
            PhaseListRepr::Classes(c) => Ok(PhaseList::Classes(c)),
            PhaseListRepr::Marker(m) if m == TERMINATE_MARKER => Ok(PhaseList::Terminate),
            PhaseListRepr::Marker(m) => Err(format!("unknown list marker {m:?}")),
        }
    }
}

impl From<PhaseList> for PhaseListRepr {
    fn from(l: PhaseList) -> Self {
        match l {
            PhaseList::Classes(c) => PhaseListRepr::Classes(c),
            PhaseList::Terminate => PhaseListRepr::Marker(TERMINATE_MARKER.to_string()),
        }
    }
}

impl PhaseList {
    pub fn is_terminate(&self) -> bool {
        matches!(self, PhaseList::Terminate)
    }

    pub fn len(&self) -> usize {
        match self {
            PhaseList::Classes(c) => c.len(),
            PhaseList::Terminate => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The hard-coded program every node runs: lists `L_1..L_J` and the local
/// rounds `r_0..r_J` at which phases end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalProtocol {
    pub lists: Vec<PhaseList>,
    pub sigma: u64,
    pub phase_ends: Vec<u64>,
}

/// Where a local round falls inside a non-terminal phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhasePosition {
    /// Round `round` (1-based) of transmission block `block`.
    Block {
        phase: usize,
        block: u32,
        round: u32,
    },
    /// One of the trailing listening rounds.
    Tail { phase: usize },
    /// At or after the start of the terminal phase.
    Terminated,
}

impl CanonicalProtocol {
    /// Number of phases `J`, the last of which terminates.
    pub fn num_phases(&self) -> usize {
        self.lists.len()
    }

    /// `L_j` for `1 <= j <= J`.
    pub fn list(&self, j: usize) -> Option<&PhaseList> {
        j.checked_sub(1).and_then(|i| self.lists.get(i))
    }

    /// `r_j`; `r_0 = 0`.
    pub fn phase_end(&self, j: usize) -> u64 {
        self.phase_ends[j]
    }

    pub fn block_len(&self) -> u64 {
        2 * self.sigma + 1
    }

    /// Local round in which every node terminates, `r_{J-1} + 1`.
    pub fn termination_round(&self) -> u64 {
        self.phase_ends[self.num_phases() - 1] + 1
    }

    pub fn num_classes_per_phase(&self) -> Vec<usize> {
        self.lists
            .iter()
            .filter_map(|l| match l {
                PhaseList::Classes(c) => Some(c.len()),
                PhaseList::Terminate => None,
            })
            .collect()
    }

    /// Local round at which a node with transmission block `block` sends in phase `j`.
    pub fn transmit_round(&self, j: usize, block: u32) -> u64 {
        self.phase_ends[j - 1] + (block as u64 - 1) * self.block_len() + self.sigma + 1
    }

    /// Locates local round `i >= 1` in the phase structure.
    pub fn position(&self, i: u64) -> PhasePosition {
        for j in 1..=self.num_phases() {
            let start = self.phase_ends[j - 1] + 1;
            match &self.lists[j - 1] {
                PhaseList::Terminate => return PhasePosition::Terminated,
                PhaseList::Classes(entries) => {
                    if i > self.phase_ends[j] {
                        continue;
                    }
                    let offset = i.saturating_sub(start);
                    let blocks = entries.len() as u64 * self.block_len();
                    if offset < blocks {
                        return PhasePosition::Block {
                            phase: j,
                            block: (offset / self.block_len()) as u32 + 1,
                            round: (offset % self.block_len()) as u32 + 1,
                        };
                    }
                    return PhasePosition::Tail { phase: j };
                }
            }
        }
        PhasePosition::Terminated
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("protocol serializes")
    }
}

/// Builds the canonical protocol for the configuration `trace` was computed on.
pub fn build_canonical(trace: &PartitionTrace) -> Result<CanonicalProtocol, DripError> {
    let verdict_iteration = trace.verdict.iteration();
    if verdict_iteration == 0 || trace.snapshots.len() != verdict_iteration + 1 {
        return Err(DripError::BadTrace(format!(
            "verdict at iteration {verdict_iteration} with {} snapshots",
            trace.snapshots.len()
        )));
    }
    let sigma = trace.sigma;
    let mut lists = vec![PhaseList::Classes(vec![ClassDescriptor {
        old_class: 1,
        label: Label::empty(),
    }])];
    // L_j for 2 <= j <= verdict_iteration describes the partition after iteration j-1.
    for j in 2..=verdict_iteration {
        let current = &trace.snapshots[j - 1];
        let previous = &trace.snapshots[j - 2];
        let entries = current
            .reps
            .iter()
            .map(|&rep| ClassDescriptor {
                old_class: previous.classes[rep],
                label: current.labels[rep].clone(),
            })
            .collect();
        lists.push(PhaseList::Classes(entries));
    }
    lists.push(PhaseList::Terminate);

    let mut phase_ends = vec![0u64];
    for list in &lists {
        let prev = *phase_ends.last().unwrap();
        let end = match list {
            PhaseList::Classes(c) => prev + c.len() as u64 * (2 * sigma + 1) + sigma,
            PhaseList::Terminate => prev + 1,
        };
        phase_ends.push(end);
    }
    Ok(CanonicalProtocol {
        lists,
        sigma,
        phase_ends,
    })
}

/// Recovers the transmission block for phase `j` from the history of phase `j - 1`.
///
/// Returns the first list entry whose previous class equals `prev_block` and
/// whose label agrees with every block round of the previous phase.
pub fn match_tblock(
    history: &History,
    protocol: &CanonicalProtocol,
    j: usize,
    prev_block: u32,
) -> Result<u32, DripError> {
    let Some(PhaseList::Classes(entries)) = protocol.list(j) else {
        return Err(DripError::BadPhase(j));
    };
    let block_len = protocol.block_len() as u32;
    let previous_blocks = if j >= 2 {
        match protocol.list(j - 1) {
            Some(PhaseList::Classes(prev)) => prev.len() as u32,
            _ => return Err(DripError::BadPhase(j - 1)),
        }
    } else {
        0
    };
    let phase_start = if j >= 2 { protocol.phase_end(j - 2) } else { 0 };
    if previous_blocks > 0 {
        let need = protocol.phase_end(j - 1) as usize + 1;
        if history.len() < need {
            return Err(DripError::HistoryTooShort {
                phase: j,
                have: history.len(),
                need,
            });
        }
    }

    'candidates: for (idx, entry) in entries.iter().enumerate() {
        if entry.old_class != prev_block {
            continue;
        }
        for a in 1..=previous_blocks {
            for b in 1..=block_len {
                let t = phase_start as usize + ((a - 1) * block_len + b) as usize;
                let expected = entry.label.flag_at(a, b);
                let agrees = match (&history.0[t], expected) {
                    (HistoryEntry::Message(m), Some(Flag::One)) => m == CANONICAL_PAYLOAD,
                    (HistoryEntry::Noise, Some(Flag::Star)) => true,
                    (HistoryEntry::Silence, None) => true,
                    _ => false,
                };
                if !agrees {
                    continue 'candidates;
                }
            }
        }
        return Ok(idx as u32 + 1);
    }
    Err(DripError::NoMatch {
        phase: j,
        prev_block,
    })
}

/// Transmission block of every phase that has started by local round
/// `history.len()`, recomputed from the history.
pub fn tblocks(history: &History, protocol: &CanonicalProtocol) -> Result<Vec<u32>, DripError> {
    let i = history.len() as u64;
    let mut blocks = Vec::new();
    let mut prev = 1;
    for j in 1..=protocol.num_phases() {
        if protocol.lists[j - 1].is_terminate() || i < protocol.phase_end(j - 1) + 1 {
            break;
        }
        prev = match_tblock(history, protocol, j, prev)?;
        blocks.push(prev);
    }
    Ok(blocks)
}

/// The canonical node automaton: transmit `"1"` in round `sigma + 1` of
/// the node's own block, terminate once the terminal list is reached, and
/// listen otherwise.
pub fn canonical_decision(
    history: &History,
    protocol: &CanonicalProtocol,
) -> Result<Action, DripError> {
    if history.is_empty() {
        return Err(DripError::EmptyHistory);
    }
    let i = history.len() as u64;
    match protocol.position(i) {
        PhasePosition::Terminated => Ok(Action::Terminate),
        PhasePosition::Tail { .. } => Ok(Action::Listen),
        PhasePosition::Block {
            phase,
            block,
            round,
        } => {
            if round as u64 != protocol.sigma + 1 {
                return Ok(Action::Listen);
            }
            let blocks = tblocks(history, protocol)?;
            if blocks.get(phase - 1) == Some(&block) {
                Ok(Action::Transmit(CANONICAL_PAYLOAD.to_string()))
            } else {
                Ok(Action::Listen)
            }
        }
    }
}

impl Drip for CanonicalProtocol {
    fn decide(&self, history: &History) -> Result<Action, DripError> {
        canonical_decision(history, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("global round {global} precedes wakeup tag {tag}")]
pub struct NotAwake {
    pub global: u64,
    pub tag: u64,
}

/// Global round of local round `local` at a node that woke spontaneously at `tag`.
pub fn local_to_global(local: u64, tag: u64) -> u64 {
    local + tag
}

pub fn global_to_local(global: u64, tag: u64) -> Result<u64, NotAwake> {
    global.checked_sub(tag).ok_or(NotAwake { global, tag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{classify, Triple};
    use crate::config::{gen_hm, gen_sm, Configuration};

    fn protocol_for(c: &Configuration) -> CanonicalProtocol {
        build_canonical(&classify(c).unwrap()).unwrap()
    }

    #[test]
    fn sm1_lists() {
        let p = protocol_for(&gen_sm(1).unwrap());
        assert_eq!(p.num_phases(), 3);
        assert_eq!(
            p.lists[0],
            PhaseList::Classes(vec![ClassDescriptor {
                old_class: 1,
                label: Label::empty()
            }])
        );
        // sigma = 1: a hears b at block round 1, b hears a at block round 3.
        assert_eq!(
            p.lists[1],
            PhaseList::Classes(vec![
                ClassDescriptor {
                    old_class: 1,
                    label: Label(vec![Triple::new(1, 1, Flag::One)])
                },
                ClassDescriptor {
                    old_class: 1,
                    label: Label(vec![Triple::new(1, 3, Flag::One)])
                },
            ])
        );
        assert!(p.lists[2].is_terminate());
        // r_1 = 0 + 1*3 + 1, r_2 = 4 + 2*3 + 1, r_3 = 11 + 1
        assert_eq!(p.phase_ends, vec![0, 4, 11, 12]);
        assert_eq!(p.num_classes_per_phase(), vec![1, 2]);
    }

    #[test]
    fn hm1_lists() {
        let p = protocol_for(&gen_hm(1).unwrap());
        assert_eq!(p.num_phases(), 2);
        assert!(p.lists[1].is_terminate());
        assert_eq!(p.phase_end(1), 7);
        assert_eq!(p.termination_round(), 8);
    }

    #[test]
    fn single_node_lists() {
        let p = protocol_for(&Configuration::new(vec![0], vec![]).unwrap());
        assert_eq!(p.num_phases(), 2);
        assert!(p.lists[1].is_terminate());
        assert_eq!(p.phase_ends, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_malformed_trace() {
        let mut trace = classify(&gen_sm(1).unwrap()).unwrap();
        trace.snapshots.pop();
        assert!(matches!(
            build_canonical(&trace),
            Err(DripError::BadTrace(_))
        ));
    }

    #[test]
    fn first_phase_always_matches_block_one() {
        let p = protocol_for(&gen_hm(3).unwrap());
        assert_eq!(match_tblock(&History::spontaneous(), &p, 1, 1), Ok(1));
        assert!(matches!(
            match_tblock(&History::spontaneous(), &p, 1, 2),
            Err(DripError::NoMatch { .. })
        ));
        assert_eq!(
            match_tblock(&History::spontaneous(), &p, 2, 1),
            Err(DripError::BadPhase(2))
        );
    }

    #[test]
    fn noise_against_single_labels_does_not_match() {
        let p = protocol_for(&gen_sm(1).unwrap());
        let mut h = History(vec![HistoryEntry::Silence; 5]);
        h.0[1] = HistoryEntry::Noise;
        assert_eq!(
            match_tblock(&h, &p, 2, 1),
            Err(DripError::NoMatch {
                phase: 2,
                prev_block: 1
            })
        );
        // Hearing "1" at block round 1 is what node a hears.
        h.0[1] = HistoryEntry::Message("1".into());
        assert_eq!(match_tblock(&h, &p, 2, 1), Ok(1));
        h.0[1] = HistoryEntry::Silence;
        h.0[3] = HistoryEntry::Message("1".into());
        assert_eq!(match_tblock(&h, &p, 2, 1), Ok(2));
        assert!(matches!(
            match_tblock(&History(vec![HistoryEntry::Silence; 3]), &p, 2, 1),
            Err(DripError::HistoryTooShort { .. })
        ));
    }

    #[test]
    fn decision_in_first_phase() {
        let p = protocol_for(&gen_hm(1).unwrap());
        // sigma = 2, so rounds 1 and 2 listen and round 3 transmits.
        for i in 1..=2 {
            let h = History(vec![HistoryEntry::Silence; i]);
            assert_eq!(canonical_decision(&h, &p), Ok(Action::Listen));
        }
        let h = History(vec![HistoryEntry::Silence; 3]);
        assert_eq!(canonical_decision(&h, &p), Ok(Action::Transmit("1".into())));
        for i in 4..=7 {
            let h = History(vec![HistoryEntry::Silence; i]);
            assert_eq!(canonical_decision(&h, &p), Ok(Action::Listen));
        }
        for i in 8..=12 {
            let h = History(vec![HistoryEntry::Silence; i]);
            assert_eq!(canonical_decision(&h, &p), Ok(Action::Terminate));
        }
        assert_eq!(
            canonical_decision(&History::default(), &p),
            Err(DripError::EmptyHistory)
        );
    }

    #[test]
    fn positions() {
        let p = protocol_for(&gen_sm(1).unwrap());
        assert_eq!(
            p.position(1),
            PhasePosition::Block {
                phase: 1,
                block: 1,
                round: 1
            }
        );
        assert_eq!(p.position(4), PhasePosition::Tail { phase: 1 });
        assert_eq!(
            p.position(5),
            PhasePosition::Block {
                phase: 2,
                block: 1,
                round: 1
            }
        );
        assert_eq!(
            p.position(10),
            PhasePosition::Block {
                phase: 2,
                block: 2,
                round: 3
            }
        );
        assert_eq!(p.position(11), PhasePosition::Tail { phase: 2 });
        assert_eq!(p.position(12), PhasePosition::Terminated);
        assert_eq!(p.transmit_round(2, 2), 9);
    }

    #[test]
    fn clock_conversion() {
        assert_eq!(local_to_global(3, 2), 5);
        // Local round 4 at v (tag 0) is local round 3 at w (tag 1).
        assert_eq!(global_to_local(local_to_global(4, 0), 1), Ok(3));
        assert_eq!(global_to_local(1, 2), Err(NotAwake { global: 1, tag: 2 }));
    }

    #[test]
    fn protocol_document_round_trip() {
        let p = protocol_for(&gen_sm(2).unwrap());
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"terminate\""));
        let back: CanonicalProtocol = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn history_entries_serialize() {
        let h = History(vec![
            HistoryEntry::Silence,
            HistoryEntry::Message("1".into()),
            HistoryEntry::Noise,
        ]);
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(json, r#"["silence",{"message":"1"},"noise"]"#);
    }
}
