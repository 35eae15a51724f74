//! Link-probability schedules and Bernoulli sampling of push-sum weights.
//!
//! `P_ij(t)` is the probability that node `j` reaches node `i` at time `t`
//! (same row = receiver, column = sender convention as [`crate::digraph`]).
//! Sampled weights are `W_ij(t) = R_ij(t) / Σ_k R_kj(t)` with independent
//! `R_ij(t) ~ Bernoulli(P_ij(t))`.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digraph::{self, DirectedGraph};
use crate::error::{Error, Result};
use crate::stochmat::{weight_from_graph, SquareMatrix, StochasticMatrix};

/// Per-trial random stream. Streams with the same `(seed, stream_id)` replay the
/// same draws; different stream ids select disjoint ChaCha streams.
///
/// Draw layout for one sampled round: for each sender column `j` in order, for
/// each receiver row `i != j` in order, one `f64` uniform `u` in `[0, 1)` is
/// consumed and `R_ij = (u < P_ij)`. A draw is consumed even when `P_ij` is 0 or 1.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Static,
    Periodic,
    Schedule,
}

/// A schedule of probability matrices satisfying (or not, see [`validate`])
/// the B-irreducibility assumption. `P(t) = phases[(t / dwell) % phases.len()]`,
/// a pure function of `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySequence {
    n: usize,
    block: usize,
    epsilon: f64,
    kind: FamilyKind,
    phases: Vec<SquareMatrix>,
    dwell: usize,
}

impl ProbabilitySequence {
    pub fn new(
        kind: FamilyKind,
        phases: Vec<SquareMatrix>,
        dwell: usize,
        block: usize,
        epsilon: f64,
    ) -> Result<Self> {
        let n = phases
            .first()
            .ok_or_else(|| Error::Argument("schedule needs at least one phase".into()))?
            .n();
        if phases.iter().any(|p| p.n() != n) {
            return Err(Error::Dimension("phases differ in size".into()));
        }
        if block == 0 || dwell == 0 {
            return Err(Error::Argument("B and phase dwell must be positive".into()));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Argument(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        Ok(Self {
            n,
            block,
            epsilon,
            kind,
            phases,
            dwell,
        })
    }

    pub fn static_matrix(p: SquareMatrix, block: usize, epsilon: f64) -> Result<Self> {
        Self::new(FamilyKind::Static, vec![p], 1, block, epsilon)
    }

    /// Static schedule where every off-diagonal link appears with probability `prob`.
    /// `B = 1`, `epsilon = prob`.
    pub fn complete(n: usize, prob: f64) -> Result<Self> {
        let mut p = SquareMatrix::filled(n, prob);
        for i in 0..n {
            p.set(i, i, 1.0);
        }
        Self::static_matrix(p, 1, prob)
    }

    /// Two alternating phases over the directed ring `i -> i+1`: phase 0 enables
    /// the ring edges leaving even nodes, phase 1 those leaving odd nodes, each
    /// with probability `prob`. No single phase is irreducible; every window of
    /// two consecutive phases is. `B = 2`, `epsilon = prob`.
    pub fn two_phase_ring(n: usize, prob: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument("two-phase ring needs n >= 2".into()));
        }
        let mut phases = vec![SquareMatrix::identity(n), SquareMatrix::identity(n)];
        for from in 0..n {
            let to = (from + 1) % n;
            if from == to {
                continue;
            }
            phases[from % 2].set(to, from, prob);
        }
        Self::new(FamilyKind::Periodic, phases, 1, 2, prob)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Irreducibility window length `B`.
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn phases(&self) -> &[SquareMatrix] {
        &self.phases
    }

    pub fn dwell(&self) -> usize {
        self.dwell
    }

    pub fn period(&self) -> usize {
        self.phases.len() * self.dwell
    }

    pub fn at(&self, t: usize) -> &SquareMatrix {
        &self.phases[(t / self.dwell) % self.phases.len()]
    }

    /// Reads a schedule file; see [`parse_schedule`] for the grammar.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read schedule {}: {e}", path.display())))?;
        parse_schedule(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValidationIssue {
    DiagonalNotOne { t: usize, i: usize, value: f64 },
    OutOfRange { t: usize, i: usize, j: usize, value: f64 },
    BelowEpsilon { t: usize, i: usize, j: usize, value: f64 },
    ReducibleWindow { start: usize, end: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::DiagonalNotOne { t, i, value } => {
                write!(f, "t={t}: P[{i}][{i}] = {value}, self-loops must have probability 1")
            }
            ValidationIssue::OutOfRange { t, i, j, value } => {
                write!(f, "t={t}: P[{i}][{j}] = {value} outside [0, 1]")
            }
            ValidationIssue::BelowEpsilon { t, i, j, value } => {
                write!(f, "t={t}: P[{i}][{j}] = {value} positive but below epsilon")
            }
            ValidationIssue::ReducibleWindow { start, end } => {
                write!(f, "window sum reducible over t in [{start}, {end}]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Times `0..checked_until` were examined.
    pub checked_until: usize,
    /// The examined range covers every distinct `P(t)` and window, so the
    /// verdict holds for all `t`.
    pub certifies_all_time: bool,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks entry ranges, unit self-loop probabilities, the epsilon floor and
/// irreducibility of every window sum `Σ_{t'=tB}^{(t+1)B-1} P(t')`.
///
/// Schedules are periodic pure functions of `t`, so one cycle of
/// `lcm(period, B)` rounds contains every distinct `P(t)` and every distinct
/// window; the examined range is `[0, max(horizon, cycle))` rounded up to whole
/// windows, so the verdict always holds for all `t`.
pub fn validate(ps: &ProbabilitySequence, horizon: usize) -> ValidationReport {
    let n = ps.n();
    let b = ps.block;
    let period = ps.period();
    let cycle = period / gcd(period, b) * b;
    let checked_until = cycle.max(horizon.div_ceil(b) * b);
    let certifies_all_time = checked_until >= cycle;

    let mut issues = Vec::new();
    for t in 0..checked_until.min(period) {
        let p = ps.at(t);
        for i in 0..n {
            for j in 0..n {
                let value = p.get(i, j);
                if i == j {
                    if value != 1.0 {
                        issues.push(ValidationIssue::DiagonalNotOne { t, i, value });
                    }
                } else if !(0.0..=1.0).contains(&value) {
                    issues.push(ValidationIssue::OutOfRange { t, i, j, value });
                } else if value > 0.0 && value < ps.epsilon {
                    issues.push(ValidationIssue::BelowEpsilon { t, i, j, value });
                }
            }
        }
    }
    for w in 0..checked_until / b {
        let (start, end) = (w * b, (w + 1) * b - 1);
        let mut union = DirectedGraph::self_loops(n).expect("n >= 1");
        for t in start..=end {
            let g = DirectedGraph::from_positive_pattern(ps.at(t), 0.0).expect("square");
            union.absorb(&g).expect("same size");
        }
        if !union.is_strongly_connected() {
            issues.push(ValidationIssue::ReducibleWindow { start, end });
        }
    }
    ValidationReport {
        checked_until,
        certifies_all_time,
        issues,
    }
}

/// Draws the communication graph of round `t`.
pub fn sample_graph(ps: &ProbabilitySequence, t: usize, rng: &mut RandomStream) -> DirectedGraph {
    let n = ps.n();
    let p = ps.at(t);
    let mut g = DirectedGraph::self_loops(n).expect("n >= 1");
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            if rng.bernoulli(p.get(i, j)) {
                g.add_edge(j, i).expect("in range");
            }
        }
    }
    g
}

/// Draws `W(t)`: column-stochastic, positive diagonal, positive entries >= 1/n.
pub fn sample_weight_matrix(
    ps: &ProbabilitySequence,
    t: usize,
    rng: &mut RandomStream,
) -> StochasticMatrix {
    weight_from_graph(&sample_graph(ps, t, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub window: usize,
    pub trials: usize,
    pub hits: usize,
    pub frequency: f64,
    /// `epsilon^(2(n-1))`
    pub lower_bound: f64,
    /// Binomial standard error of the empirical frequency.
    pub std_error: f64,
    pub passed: bool,
}

/// Monte Carlo frequency of the event "the union of the sampled graphs over
/// block `window` (times `[window*B, (window+1)*B)`) is strongly connected",
/// compared against `epsilon^(2(n-1)) - 3 sigma`.
pub fn edge_probability_check(
    ps: &ProbabilitySequence,
    window: usize,
    rng: &mut RandomStream,
    trials: usize,
) -> Result<FrequencyReport> {
    if trials == 0 {
        return Err(Error::Argument("trials must be >= 1".into()));
    }
    let b = ps.block();
    let mut hits = 0;
    for _ in 0..trials {
        let graphs: Vec<_> = (window * b..(window + 1) * b)
            .map(|t| sample_graph(ps, t, rng))
            .collect();
        if digraph::union(&graphs)?.is_strongly_connected() {
            hits += 1;
        }
    }
    let frequency = hits as f64 / trials as f64;
    let lower_bound = ps.epsilon().powi(2 * (ps.n() as i32 - 1));
    let std_error = (frequency * (1.0 - frequency) / trials as f64).sqrt();
    Ok(FrequencyReport {
        window,
        trials,
        hits,
        frequency,
        lower_bound,
        std_error,
        passed: frequency >= lower_bound - 3.0 * std_error,
    })
}

/// Parses the schedule text format.
///
/// ```text
/// # comments and blank lines are ignored
/// n 2
/// B 2
/// epsilon 0.5
/// period 2          # number of phases
/// dwell 1           # optional, rounds per phase (default 1)
/// phase
/// 1 0               # n rows of n decimals, row = receiver, column = sender
/// 0.5 1
/// phase
/// 1 0.5
/// 0 1
/// ```
///
/// With `period 1` the schedule is static.
pub fn parse_schedule(text: &str) -> Result<ProbabilitySequence> {
    let mut n = None;
    let mut block = None;
    let mut epsilon = None;
    let mut period = None;
    let mut dwell = 1usize;
    let mut phases: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut in_phase = false;

    fn number<T: std::str::FromStr>(line: usize, key: &str, raw: Option<&str>) -> Result<T> {
        raw.and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse {
            line,
            msg: format!("`{key}` needs a numeric value"),
        })
    }

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().expect("nonempty line");
        match head {
            "n" => n = Some(number::<usize>(line_no, head, parts.next())?),
            "B" => block = Some(number::<usize>(line_no, head, parts.next())?),
            "epsilon" => epsilon = Some(number::<f64>(line_no, head, parts.next())?),
            "period" => period = Some(number::<usize>(line_no, head, parts.next())?),
            "dwell" => dwell = number::<usize>(line_no, head, parts.next())?,
            "phase" => {
                phases.push(Vec::new());
                in_phase = true;
            }
            _ if in_phase => {
                let size = n.ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: "`n` must precede phase data".into(),
                })?;
                let row: Vec<f64> = line
                    .split_whitespace()
                    .map(|v| {
                        v.parse::<f64>().map_err(|_| Error::Parse {
                            line: line_no,
                            msg: format!("`{v}` is not a decimal probability"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if row.len() != size {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected {size} entries, found {}", row.len()),
                    });
                }
                let current = phases.last_mut().expect("inside a phase");
                if current.len() == size {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("phase {} has more than {size} rows", phases.len() - 1),
                    });
                }
                current.push(row);
            }
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
    }

    let missing = |key: &str| Error::Parse {
        line: 0,
        msg: format!("missing header field `{key}`"),
    };
    let n = n.ok_or_else(|| missing("n"))?;
    let block = block.ok_or_else(|| missing("B"))?;
    let epsilon = epsilon.ok_or_else(|| missing("epsilon"))?;
    let period = period.ok_or_else(|| missing("period"))?;
    if phases.len() != period {
        return Err(Error::Parse {
            line: 0,
            msg: format!("header declares {period} phases, file has {}", phases.len()),
        });
    }
    let matrices = phases
        .into_iter()
        .enumerate()
        .map(|(k, rows)| {
            if rows.len() != n {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("phase {k} has {} rows, expected {n}", rows.len()),
                });
            }
            SquareMatrix::from_rows(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    ProbabilitySequence::new(FamilyKind::Schedule, matrices, dwell, block, epsilon)
}

/// Writes a schedule in the format read by [`parse_schedule`].
pub fn format_schedule(ps: &ProbabilitySequence) -> String {
    let mut out = format!(
        "n {}\nB {}\nepsilon {}\nperiod {}\ndwell {}\n",
        ps.n(),
        ps.block(),
        ps.epsilon(),
        ps.phases().len(),
        ps.dwell()
    );
    for phase in ps.phases() {
        out.push_str("phase\n");
        for row in phase.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
    out
}
