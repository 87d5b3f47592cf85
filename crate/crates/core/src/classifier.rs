//! Centralized feasibility decision by iterated partition refinement.
//!
//! Each iteration replays one phase of the canonical protocol centrally:
//! every node records which class transmitted at which round of its local
//! block ([`Triple`]s), and classes are split by those records. The run ends
//! with YES as soon as some class is a singleton, or NO once an iteration
//! leaves the number of classes unchanged.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Configuration};

/// Whether a block round was heard from one neighbour or collided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Flag {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "*")]
    Star,
}

/// `(class, block round, flag)`: class `class` transmitted in round `round`
/// of the listener's block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(u32, u32, Flag)", into = "(u32, u32, Flag)")]
pub struct Triple {
    pub class: u32,
    pub round: u32,
    pub flag: Flag,
}

impl From<(u32, u32, Flag)> for Triple {
    fn from((class, round, flag): (u32, u32, Flag)) -> Self {
        Triple { class, round, flag }
    }
}

impl From<Triple> for (u32, u32, Flag) {
    fn from(t: Triple) -> Self {
        (t.class, t.round, t.flag)
    }
}

impl Triple {
    pub fn new(class: u32, round: u32, flag: Flag) -> Self {
        Triple { class, round, flag }
    }
}

/// Result of [`compare_triples`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistOrdering {
    Less,
    Greater,
    /// All three components equal.
    EqualKey,
}

/// The history ordering: by class, then block round, then `One` before `Star`.
pub fn compare_triples(x: &Triple, y: &Triple) -> HistOrdering {
    match (x.class, x.round, x.flag).cmp(&(y.class, y.round, y.flag)) {
        Ordering::Less => HistOrdering::Less,
        Ordering::Greater => HistOrdering::Greater,
        Ordering::Equal => HistOrdering::EqualKey,
    }
}

impl PartialOrd for Triple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Triple {
    fn cmp(&self, other: &Self) -> Ordering {
        match compare_triples(self, other) {
            HistOrdering::Less => Ordering::Less,
            HistOrdering::Greater => Ordering::Greater,
            HistOrdering::EqualKey => Ordering::Equal,
        }
    }
}

/// Sorted sequence of triples; empty stands for "heard nothing".
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub Vec<Triple>);

impl Label {
    pub fn empty() -> Self {
        Label(Vec::new())
    }

    pub fn triples(&self) -> &[Triple] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Flag recorded for `(class, round)`, if any.
    pub fn flag_at(&self, class: u32, round: u32) -> Option<Flag> {
        self.0
            .binary_search_by(|t| (t.class, t.round).cmp(&(class, round)))
            .ok()
            .map(|i| self.0[i].flag)
    }
}

/// Partition state after one iteration (classes are 1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub classes: Vec<u32>,
    pub labels: Vec<Label>,
    pub num_classes: u32,
    /// `reps[k - 1]` is the representative of class `k`.
    pub reps: Vec<usize>,
}

impl Snapshot {
    pub fn rep(&self, class: u32) -> usize {
        self.reps[class as usize - 1]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_classes as usize];
        for &c in &self.classes {
            sizes[c as usize - 1] += 1;
        }
        sizes
    }

    /// Smallest class number with exactly one member.
    pub fn smallest_singleton(&self) -> Option<u32> {
        self.class_sizes()
            .iter()
            .position(|&s| s == 1)
            .map(|i| i as u32 + 1)
    }

    pub fn member_of(&self, class: u32) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&v| self.classes[v] == class)
            .collect()
    }
}

/// A configuration together with the working partition state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugConfig {
    pub base: Configuration,
    pub state: Snapshot,
}

/// Counts basic steps (neighbour scans, triple and label comparisons).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub ops: u64,
}

impl OpCounter {
    fn tick(&mut self, n: u64) {
        self.ops += n;
    }
}

/// Every node in class 1 with an empty label; node 0 represents class 1.
pub fn init_aug(c: &Configuration) -> Result<AugConfig, ConfigError> {
    c.ensure_ready()?;
    let n = c.n();
    Ok(AugConfig {
        base: c.clone(),
        state: Snapshot {
            classes: vec![1; n],
            labels: vec![Label::empty(); n],
            num_classes: 1,
            reps: vec![0],
        },
    })
}

/// Splits classes by label; nodes stay together only if they shared a class
/// and carry equal labels.
pub fn refine(a: &AugConfig) -> AugConfig {
    let mut out = a.clone();
    refine_counted(&mut out.state, &mut OpCounter::default());
    out
}

fn refine_counted(s: &mut Snapshot, ops: &mut OpCounter) {
    let old = s.classes.clone();
    for v in 0..s.classes.len() {
        let mut assigned = false;
        // No early exit: at most one representative can match.
        for k in 1..=s.num_classes {
            let rep = s.reps[k as usize - 1];
            ops.tick(1 + s.labels[v].0.len().min(s.labels[rep].0.len()) as u64);
            if old[v] == old[rep] && s.labels[v] == s.labels[rep] {
                s.classes[v] = k;
                assigned = true;
            }
        }
        if !assigned {
            s.num_classes += 1;
            s.classes[v] = s.num_classes;
            s.reps.push(v);
        }
    }
}

/// Builds every node's label for the current partition, then refines once.
pub fn partitioner(a: &AugConfig) -> AugConfig {
    let mut out = a.clone();
    partitioner_counted(&out.base.clone(), &mut out.state, &mut OpCounter::default());
    out
}

/// The label node `v` receives under class assignment `classes`.
pub fn heard_label(c: &Configuration, classes: &[u32], v: usize) -> Label {
    heard_label_counted(c, c.sigma(), classes, v, &mut OpCounter::default())
}

fn heard_label_counted(
    c: &Configuration,
    sigma: u64,
    classes: &[u32],
    v: usize,
    ops: &mut OpCounter,
) -> Label {
    let sigma = sigma as i64;
    let tv = c.tag(v) as i64;
    let mut heard: Vec<Triple> = Vec::new();
    for &w in c.neighbours(v) {
        ops.tick(1);
        let tw = c.tag(w) as i64;
        if classes[w] == classes[v] && tw == tv {
            continue;
        }
        let class = classes[w];
        let round = (sigma + 1 + tw - tv) as u32;
        let mut fresh = true;
        for t in heard.iter_mut() {
            ops.tick(1);
            if t.class == class && t.round == round {
                fresh = false;
                t.flag = Flag::Star;
            }
        }
        if fresh {
            heard.push(Triple::new(class, round, Flag::One));
        }
    }
    heard.sort_by(|x, y| {
        ops.tick(1);
        x.cmp(y)
    });
    Label(heard)
}

fn partitioner_counted(c: &Configuration, s: &mut Snapshot, ops: &mut OpCounter) {
    let sigma = c.sigma();
    for v in 0..c.n() {
        s.labels[v] = heard_label_counted(c, sigma, &s.classes, v, ops);
    }
    refine_counted(s, ops);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// `class` is the smallest singleton class after `iteration`.
    Yes {
        class: u32,
        iteration: usize,
    },
    No {
        iteration: usize,
    },
}

impl Verdict {
    pub fn iteration(&self) -> usize {
        match *self {
            Verdict::Yes { iteration, .. } | Verdict::No { iteration } => iteration,
        }
    }

    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes { .. })
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Yes { class, iteration } => {
                write!(f, "YES class={class} iteration={iteration}")
            }
            Verdict::No { iteration } => write!(f, "NO iteration={iteration}"),
        }
    }
}

/// Snapshots `0..=verdict.iteration()`; snapshot 0 is the initial partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTrace {
    pub snapshots: Vec<Snapshot>,
    pub verdict: Verdict,
    pub sigma: u64,
}

impl PartitionTrace {
    /// Classes at the start of phase `j` (after iteration `j - 1`).
    pub fn classes_at_phase(&self, j: usize) -> &[u32] {
        &self.snapshots[j - 1].classes
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("trace always holds the initial snapshot")
    }

    pub fn to_document(&self) -> TraceDocument {
        let (verdict, winning_class) = match self.verdict {
            Verdict::Yes { class, .. } => ("YES".to_string(), Some(class)),
            Verdict::No { .. } => ("NO".to_string(), None),
        };
        TraceDocument {
            iterations: self
                .snapshots
                .iter()
                .enumerate()
                .map(|(i, s)| IterationRecord {
                    iteration: i,
                    classes: s.classes.clone(),
                    labels: s.labels.clone(),
                    reps: s.reps.clone(),
                    num_classes: s.num_classes,
                })
                .collect(),
            sigma: self.sigma,
            verdict,
            winning_class,
            verdict_iteration: self.verdict.iteration(),
        }
    }

    pub fn from_document(doc: &TraceDocument) -> Result<Self, String> {
        let verdict = match (doc.verdict.as_str(), doc.winning_class) {
            ("YES", Some(class)) => Verdict::Yes {
                class,
                iteration: doc.verdict_iteration,
            },
            ("NO", None) => Verdict::No {
                iteration: doc.verdict_iteration,
            },
            (v, w) => return Err(format!("inconsistent verdict record {v:?} / {w:?}")),
        };
        Ok(PartitionTrace {
            snapshots: doc
                .iterations
                .iter()
                .map(|r| Snapshot {
                    classes: r.classes.clone(),
                    labels: r.labels.clone(),
                    num_classes: r.num_classes,
                    reps: r.reps.clone(),
                })
                .collect(),
            verdict,
            sigma: doc.sigma,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub classes: Vec<u32>,
    pub labels: Vec<Label>,
    pub reps: Vec<usize>,
    pub num_classes: u32,
}

/// Serialized form of a [`PartitionTrace`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub iterations: Vec<IterationRecord>,
    pub sigma: u64,
    pub verdict: String,
    pub winning_class: Option<u32>,
    pub verdict_iteration: usize,
}

/// Runs the classifier on a valid, normalized configuration.
pub fn classify(c: &Configuration) -> Result<PartitionTrace, ConfigError> {
    classify_counted(c).map(|(trace, _)| trace)
}

/// [`classify`] plus the number of basic steps it took.
pub fn classify_counted(c: &Configuration) -> Result<(PartitionTrace, OpCounter), ConfigError> {
    let mut aug = init_aug(c)?;
    let mut ops = OpCounter::default();
    let mut snapshots = vec![aug.state.clone()];
    let max_iterations = c.n().div_ceil(2);
    for iteration in 1..=max_iterations {
        let old_count = aug.state.num_classes;
        partitioner_counted(&aug.base, &mut aug.state, &mut ops);
        snapshots.push(aug.state.clone());
        let verdict = if let Some(class) = aug.state.smallest_singleton() {
            Some(Verdict::Yes { class, iteration })
        } else if aug.state.num_classes == old_count {
            Some(Verdict::No { iteration })
        } else {
            None
        };
        if let Some(verdict) = verdict {
            return Ok((
                PartitionTrace {
                    snapshots,
                    verdict,
                    sigma: c.sigma(),
                },
                ops,
            ));
        }
    }
    unreachable!("classifier always reaches a verdict within ceil(n/2) iterations")
}
