//! Configurations: a connected simple graph whose nodes carry wakeup tags.
//!
//! The node list order is the fixed vertex ordering every other module
//! iterates in. Node indices are bookkeeping handles only; protocols never
//! see them.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Identifier of the pseudorandom generator behind [`gen_random`].
///
/// `ChaCha8Rng::seed_from_u64(seed)`; edges drawn for every pair `i < j` in
/// lexicographic order with `gen_bool(p)`, whole graph resampled until
/// connected, then one `gen_range(0..=max_tag)` per node in index order.
pub const RANDOM_GENERATOR_ID: &str = "chacha8-gnp-resample-v1";

/// Resampling budget for [`gen_random`].
pub const RANDOM_ATTEMPT_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("negative wakeup tag {value} for node {node}")]
    NegativeTag { node: usize, value: String },
    #[error("invalid configuration: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("wakeup tags are not normalized (minimum tag is {0}, expected 0)")]
    NotNormalized(u64),
    #[error("invalid generator parameter: {0}")]
    Parameter(String),
    #[error("no connected graph found after {0} attempts")]
    AttemptsExhausted(usize),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A single broken configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    SelfLoop(usize),
    DuplicateEdge(usize, usize),
    NodeOutOfRange(usize),
    Disconnected { components: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "configuration has no nodes"),
            Violation::SelfLoop(v) => write!(f, "self-loop on node {v}"),
            Violation::DuplicateEdge(a, b) => write!(f, "duplicate edge {a}-{b}"),
            Violation::NodeOutOfRange(v) => write!(f, "edge endpoint {v} out of range"),
            Violation::Disconnected { components } => {
                write!(f, "graph is disconnected ({components} components)")
            }
        }
    }
}

/// Outcome of [`validate`]: empty means every invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), ConfigError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(self.violations))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Configuration {
    tags: Vec<u64>,
    /// Raw edge list in declaration order; may break invariants until validated.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Configuration {
    /// Builds a configuration, rejecting self-loops, duplicate edges and
    /// out-of-range endpoints. Connectivity is left to [`validate`].
    pub fn new(tags: Vec<u64>, edges: Vec<(usize, usize)>) -> Result<Self, ConfigError> {
        let n = tags.len();
        let mut seen = BTreeSet::new();
        for &(a, b) in &edges {
            for x in [a, b] {
                if x >= n {
                    return Err(ConfigError::NodeOutOfRange { index: x, n });
                }
            }
            if a == b {
                return Err(ConfigError::SelfLoop(a));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(ConfigError::DuplicateEdge(a.min(b), a.max(b)));
            }
        }
        Ok(Self::from_parts(tags, edges))
    }

    /// Builds without structural checks, for feeding [`validate`] arbitrary input.
    pub fn from_parts(tags: Vec<u64>, edges: Vec<(usize, usize)>) -> Self {
        let n = tags.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if a < n && b < n && a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self {
            tags,
            edges,
            adjacency,
        }
    }

    /// A path `0 - 1 - ... - (k-1)` with the given tags.
    pub fn path(tags: Vec<u64>) -> Self {
        let edges = (1..tags.len()).map(|i| (i - 1, i)).collect();
        Self::from_parts(tags, edges)
    }

    pub fn n(&self) -> usize {
        self.tags.len()
    }

    pub fn tags(&self) -> &[u64] {
        &self.tags
    }

    pub fn tag(&self, v: usize) -> u64 {
        self.tags[v]
    }

    /// Neighbours of `v` in ascending index order.
    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn min_tag(&self) -> u64 {
        self.tags.iter().copied().min().unwrap_or(0)
    }

    /// Span: largest tag minus smallest tag.
    pub fn sigma(&self) -> u64 {
        self.tags.iter().copied().max().unwrap_or(0) - self.min_tag()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_normalized(&self) -> bool {
        self.min_tag() == 0
    }

    /// Fails unless the configuration is valid and its smallest tag is 0.
    pub fn ensure_ready(&self) -> Result<(), ConfigError> {
        validate(self).into_result()?;
        if !self.is_normalized() {
            return Err(ConfigError::NotNormalized(self.min_tag()));
        }
        Ok(())
    }

    /// Serializes in the line-oriented file format, edges sorted.
    pub fn to_text(&self) -> String {
        self.to_text_with_comments(&[])
    }

    /// As [`Configuration::to_text`], preceded by `# ` comment lines.
    pub fn to_text_with_comments(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&format!("nodes {}\n", self.n()));
        out.push_str("tags");
        for t in &self.tags {
            out.push_str(&format!(" {t}"));
        }
        out.push('\n');
        for (a, b) in self.edges() {
            out.push_str(&format!("edge {a} {b}\n"));
        }
        out
    }
}

/// Equal tags and equal edge sets; edge declaration order is ignored.
impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.tags == other.tags && self.edges() == other.edges()
    }
}

impl Eq for Configuration {}

impl std::str::FromStr for Configuration {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_configuration(s)
    }
}

/// Reports every broken invariant of `c`.
pub fn validate(c: &Configuration) -> ValidationReport {
    let mut violations = Vec::new();
    let n = c.n();
    if n == 0 {
        violations.push(Violation::Empty);
        return ValidationReport { violations };
    }
    let mut seen = BTreeSet::new();
    for &(a, b) in &c.edges {
        let mut in_range = true;
        for x in [a, b] {
            if x >= n {
                violations.push(Violation::NodeOutOfRange(x));
                in_range = false;
            }
        }
        if a == b {
            violations.push(Violation::SelfLoop(a));
        } else if in_range && !seen.insert((a.min(b), a.max(b))) {
            violations.push(Violation::DuplicateEdge(a.min(b), a.max(b)));
        }
    }
    let components = count_components(c);
    if components > 1 {
        violations.push(Violation::Disconnected { components });
    }
    ValidationReport { violations }
}

fn count_components(c: &Configuration) -> usize {
    let n = c.n();
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in c.neighbours(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}

/// Shifts all tags so the smallest is 0.
pub fn normalize_tags(c: &Configuration) -> Configuration {
    let min = c.min_tag();
    Configuration {
        tags: c.tags.iter().map(|t| t - min).collect(),
        edges: c.edges.clone(),
        adjacency: c.adjacency.clone(),
    }
}

/// Parses the line-oriented configuration format.
///
/// ```text
/// nodes <n>
/// tags <t_0> ... <t_{n-1}>
/// edge <i> <j>
/// ```
///
/// `#` starts a comment; blank lines are ignored. Tags are kept as written.
pub fn parse_configuration(text: &str) -> Result<Configuration, ConfigError> {
    let mut n: Option<usize> = None;
    let mut tags: Option<Vec<u64>> = None;
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();

    for (line_idx, raw) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(&(kw_col, keyword)) = tokens.first() else {
            continue;
        };
        let syntax = |column: usize, message: String| ConfigError::Syntax {
            line: line_no,
            column,
            message,
        };
        match (keyword, n.is_some(), tags.is_some()) {
            ("nodes", false, _) => {
                if tokens.len() != 2 {
                    return Err(syntax(kw_col, "expected `nodes <n>`".into()));
                }
                let (col, tok) = tokens[1];
                let value = tok
                    .parse::<usize>()
                    .map_err(|_| syntax(col, format!("invalid node count `{tok}`")))?;
                n = Some(value);
            }
            ("tags", true, false) => {
                let count = n.unwrap_or(0);
                let mut values = Vec::with_capacity(count);
                for (i, &(col, tok)) in tokens[1..].iter().enumerate() {
                    if tok.starts_with('-') && tok[1..].parse::<u64>().is_ok() {
                        return Err(ConfigError::NegativeTag {
                            node: i,
                            value: tok.to_string(),
                        });
                    }
                    let value = tok
                        .parse::<u64>()
                        .map_err(|_| syntax(col, format!("invalid wakeup tag `{tok}`")))?;
                    values.push(value);
                }
                if values.len() != count {
                    return Err(syntax(
                        kw_col,
                        format!("expected {count} tags, found {}", values.len()),
                    ));
                }
                tags = Some(values);
            }
            ("edge", true, true) => {
                if tokens.len() != 3 {
                    return Err(syntax(kw_col, "expected `edge <i> <j>`".into()));
                }
                let count = n.unwrap_or(0);
                let mut ends = [0usize; 2];
                for (slot, &(col, tok)) in ends.iter_mut().zip(&tokens[1..]) {
                    *slot = tok
                        .parse::<usize>()
                        .map_err(|_| syntax(col, format!("invalid node index `{tok}`")))?;
                    if *slot >= count {
                        return Err(ConfigError::NodeOutOfRange {
                            index: *slot,
                            n: count,
                        });
                    }
                }
                let [a, b] = ends;
                if a == b {
                    return Err(ConfigError::SelfLoop(a));
                }
                if !seen.insert((a.min(b), a.max(b))) {
                    return Err(ConfigError::DuplicateEdge(a.min(b), a.max(b)));
                }
                edges.push((a, b));
            }
            ("nodes", true, _) => return Err(syntax(kw_col, "duplicate `nodes` line".into())),
            ("tags", false, _) => return Err(syntax(kw_col, "`tags` before `nodes`".into())),
            ("tags", true, true) => return Err(syntax(kw_col, "duplicate `tags` line".into())),
            ("edge", _, _) => {
                return Err(syntax(kw_col, "`edge` before `nodes` and `tags`".into()))
            }
            (other, _, _) => return Err(syntax(kw_col, format!("unknown keyword `{other}`"))),
        }
    }

    let Some(tags) = tags else {
        let line = text.lines().count().max(1);
        let what = if n.is_none() { "`nodes`" } else { "`tags`" };
        return Err(ConfigError::Syntax {
            line,
            column: 1,
            message: format!("missing {what} line"),
        });
    };
    Ok(Configuration::from_parts(tags, edges))
}

/// Whitespace-separated tokens with 1-based character columns.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

/// `a_1..a_m, b_1..b_{2m+1}, c_m..c_1` as a path; `a`, `c` tagged 0, `b` tagged 1.
pub fn gen_gm(m: usize) -> Result<Configuration, ConfigError> {
    if m < 2 {
        return Err(ConfigError::Parameter(format!(
            "G_m requires m >= 2, got {m}"
        )));
    }
    let mut tags = vec![0; m];
    tags.extend(std::iter::repeat_n(1, 2 * m + 1));
    tags.extend(std::iter::repeat_n(0, m));
    Ok(Configuration::path(tags))
}

/// Index of the center node `b_{m+1}` in [`gen_gm`]'s output.
pub fn gm_center(m: usize) -> usize {
    2 * m
}

/// Path `a - b - c - d` with tags `(m, 0, 0, m+1)`.
pub fn gen_hm(m: u64) -> Result<Configuration, ConfigError> {
    if m < 1 {
        return Err(ConfigError::Parameter(format!(
            "H_m requires m >= 1, got {m}"
        )));
    }
    Ok(Configuration::path(vec![m, 0, 0, m + 1]))
}

/// Path `a - b - c - d` with tags `(m, 0, 0, m)`.
pub fn gen_sm(m: u64) -> Result<Configuration, ConfigError> {
    if m < 1 {
        return Err(ConfigError::Parameter(format!(
            "S_m requires m >= 1, got {m}"
        )));
    }
    Ok(Configuration::path(vec![m, 0, 0, m]))
}

/// Seeded random connected configuration; see [`RANDOM_GENERATOR_ID`].
/// The result is already normalized.
pub fn gen_random(
    n: usize,
    edge_prob: f64,
    max_tag: u64,
    seed: u64,
) -> Result<Configuration, ConfigError> {
    if n < 1 {
        return Err(ConfigError::Parameter(
            "random configuration needs n >= 1".into(),
        ));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(ConfigError::Parameter(format!(
            "edge probability must lie in (0, 1], got {edge_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_ATTEMPT_CAP {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(edge_prob) {
                    edges.push((i, j));
                }
            }
        }
        let candidate = Configuration::from_parts(vec![0; n], edges);
        if count_components(&candidate) != 1 {
            continue;
        }
        let tags = (0..n).map(|_| rng.gen_range(0..=max_tag)).collect();
        let c = Configuration::from_parts(tags, candidate.edges);
        return Ok(normalize_tags(&c));
    }
    Err(ConfigError::AttemptsExhausted(RANDOM_ATTEMPT_CAP))
}

/// Parameters of one instance drawn by [`random_batch`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomParams {
    pub n: usize,
    pub edge_prob: f64,
    pub max_tag: u64,
    pub seed: u64,
}

impl fmt::Display for RandomParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "generator={RANDOM_GENERATOR_ID} n={} edge_prob={} max_tag={} seed={}",
            self.n, self.edge_prob, self.max_tag, self.seed
        )
    }
}

/// Deterministic schedule of `count` random instances with `n <= n_max`,
/// tags `<= tag_max`, edge probability in `[0.3, 1.0]`.
pub fn random_batch(n_max: usize, tag_max: u64, count: usize, seed: u64) -> Vec<RandomParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| RandomParams {
            n: rng.gen_range(1..=n_max.max(1)),
            edge_prob: rng.gen_range(0.3..=1.0),
            max_tag: rng.gen_range(0..=tag_max),
            seed: rng.next_u64(),
        })
        .collect()
}

impl RandomParams {
    pub fn generate(&self) -> Result<Configuration, ConfigError> {
        gen_random(self.n, self.edge_prob, self.max_tag, self.seed)
    }
}
