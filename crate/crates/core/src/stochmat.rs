//! Dense square matrices, stochastic matrices and ordered products.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::digraph::DirectedGraph;
use crate::error::{Error, Result};

/// Tolerance on row/column sums when validating stochasticity.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Dense row-major `n x n` matrix of reals.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.n.max(1)).collect();
        f.debug_struct("SquareMatrix").field("rows", &rows).finish()
    }
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Dimension("matrix has no rows".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n} (matrix must be square)",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &SquareMatrix) -> Result<SquareMatrix> {
        if self.n != rhs.n {
            return Err(Error::Dimension(format!(
                "cannot multiply {n}x{n} by {m}x{m}",
                n = self.n,
                m = rhs.n
            )));
        }
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!(
                "vector of length {} against {n}x{n} matrix",
                v.len(),
                n = self.n
            )));
        }
        Ok(self
            .data
            .chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.data.chunks(self.n) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    RowStochastic,
    ColumnStochastic,
}

impl Orientation {
    pub fn transposed(self) -> Self {
        match self {
            Orientation::RowStochastic => Orientation::ColumnStochastic,
            Orientation::ColumnStochastic => Orientation::RowStochastic,
        }
    }
}

/// A nonnegative square matrix whose rows or columns (per `orientation`) sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    matrix: SquareMatrix,
    orientation: Orientation,
}

impl StochasticMatrix {
    /// Validates nonnegativity and the row/column sums within [`STOCHASTIC_TOL`].
    pub fn new(matrix: SquareMatrix, orientation: Orientation) -> Result<Self> {
        Self::with_tolerance(matrix, orientation, STOCHASTIC_TOL)
    }

    pub fn with_tolerance(matrix: SquareMatrix, orientation: Orientation, tol: f64) -> Result<Self> {
        if let Some(&bad) = matrix.entries().iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Argument(format!(
                "stochastic matrix entries must be nonnegative, found {bad}"
            )));
        }
        let sums = match orientation {
            Orientation::RowStochastic => matrix.row_sums(),
            Orientation::ColumnStochastic => matrix.column_sums(),
        };
        if let Some((k, s)) = sums.iter().enumerate().find(|(_, s)| (**s - 1.0).abs() > tol) {
            let what = match orientation {
                Orientation::RowStochastic => "row",
                Orientation::ColumnStochastic => "column",
            };
            return Err(Error::Protocol(format!("{what} {k} sums to {s}, expected 1")));
        }
        Ok(Self {
            matrix,
            orientation,
        })
    }

    /// Wraps a matrix known to be stochastic (products of stochastic matrices).
    pub(crate) fn from_trusted(matrix: SquareMatrix, orientation: Orientation) -> Self {
        Self {
            matrix,
            orientation,
        }
    }

    pub fn identity(n: usize, orientation: Orientation) -> Self {
        Self::from_trusted(SquareMatrix::identity(n), orientation)
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.matrix
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Transpose with the orientation tag flipped.
    pub fn transpose(&self) -> Self {
        Self::from_trusted(self.matrix.transpose(), self.orientation.transposed())
    }

    /// Graph of the positive entries.
    pub fn graph(&self) -> DirectedGraph {
        DirectedGraph::from_positive_pattern(&self.matrix, 0.0)
            .expect("stochastic matrices are square and nonempty")
    }

    /// `self * rhs`, both of the same orientation.
    pub fn compose(&self, rhs: &StochasticMatrix) -> Result<StochasticMatrix> {
        if self.orientation != rhs.orientation {
            return Err(Error::Argument(
                "cannot multiply row- and column-stochastic matrices".into(),
            ));
        }
        Ok(Self::from_trusted(
            self.matrix.matmul(&rhs.matrix)?,
            self.orientation,
        ))
    }
}

/// Push-sum weights for one communication round: `W[i][j] = 1 / d_out(j)` when
/// `j -> i`, zero otherwise. Columns sum to one and the diagonal is positive
/// because every [`DirectedGraph`] carries its self-loops.
pub fn weight_from_graph(g: &DirectedGraph) -> StochasticMatrix {
    let n = g.n();
    let degrees = g.out_degrees();
    let mut m = SquareMatrix::zeros(n);
    for (from, to) in g.edges() {
        m.set(to, from, 1.0 / degrees[from] as f64);
    }
    StochasticMatrix::from_trusted(m, Orientation::ColumnStochastic)
}

/// Ordered product `A(t:s) = A(t) A(t-1) ... A(s)` over a time-indexed sequence,
/// accumulated by left multiplication. `A(s:s) = A(s)`.
pub fn product_range(seq: &[StochasticMatrix], s: usize, t: usize) -> Result<StochasticMatrix> {
    if t < s {
        return Err(Error::Range { t, s });
    }
    if t >= seq.len() {
        return Err(Error::Argument(format!(
            "time {t} beyond sequence of length {}",
            seq.len()
        )));
    }
    let mut acc = seq[s].clone();
    for a in &seq[s + 1..=t] {
        if a.n() != acc.n() {
            return Err(Error::Dimension("sequence mixes matrix sizes".into()));
        }
        acc = a.compose(&acc)?;
    }
    Ok(acc)
}

/// `M_{S S̄} = Σ_{i ∈ S, j ∉ S} M_ij`: total weight flowing into `S` from its complement.
pub fn cut_flow(m: &SquareMatrix, subset: &[usize]) -> Result<f64> {
    let n = m.n();
    let mut inside = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::Argument(format!("node {i} outside 0..{n}")));
        }
        inside[i] = true;
    }
    let size = inside.iter().filter(|&&b| b).count();
    if size == 0 || size == n {
        return Err(Error::Argument("cut subset must be nonempty and proper".into()));
    }
    let mut flow = 0.0;
    for i in (0..n).filter(|&i| inside[i]) {
        for j in (0..n).filter(|&j| !inside[j]) {
            flow += m.get(i, j);
        }
    }
    Ok(flow)
}

/// Column-wise `max_i M_ij - min_i M_ij`.
pub fn max_min_column_gap(m: &SquareMatrix) -> Vec<f64> {
    let n = m.n();
    (0..n)
        .map(|j| {
            let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let v = m.get(i, j);
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .collect()
}

/// Every entry strictly above `tol`.
pub fn is_positive(m: &SquareMatrix, tol: f64) -> bool {
    m.entries().iter().all(|&v| v > tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EntryClause {
    /// Diagonal of the product.
    Diagonal,
    /// Entry positive in some factor of the window.
    SingleHop,
    /// `j -> k` at the first time of the window, `k -> i` later on.
    TwoHop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryViolation {
    pub clause: EntryClause,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Outcome of [`check_entry_bounds`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `gamma^(t - s + 1)`
    pub bound: f64,
    pub checked_entries: usize,
    pub violations: Vec<EntryViolation>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the entry lower bounds on `A(t:s)` that hold when every positive entry
/// of every factor is at least `gamma` and all self-loops are present:
///
/// * `[A(t:s)]_ii >= gamma^(t-s+1)`;
/// * `[A(r)]_ij > 0` for some `s <= r <= t` implies `[A(t:s)]_ij >= gamma^(t-s+1)`;
/// * `[A(s)]_kj > 0` and `[A(r)]_ik > 0` for some `s < r <= t` implies the same.
///
/// Windows long enough for `gamma^(t-s+1)` to underflow are rejected.
pub fn check_entry_bounds(
    seq: &[StochasticMatrix],
    s: usize,
    t: usize,
    gamma: f64,
) -> Result<BoundReport> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Argument(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let product = product_range(seq, s, t)?;
    let n = product.n();
    let window = &seq[s..=t];
    for (offset, a) in window.iter().enumerate() {
        for i in 0..n {
            if !(a.get(i, i) > 0.0) {
                return Err(Error::Argument(format!(
                    "factor at time {} lacks the self-loop at node {i}",
                    s + offset
                )));
            }
            for j in 0..n {
                let v = a.get(i, j);
                if v > 0.0 && v < gamma * (1.0 - 1e-12) {
                    return Err(Error::Argument(format!(
                        "entry ({i},{j}) = {v} at time {} is below gamma = {gamma}",
                        s + offset
                    )));
                }
            }
        }
    }
    let bound = gamma.powi((t - s + 1) as i32);
    if bound < f64::MIN_POSITIVE {
        return Err(Error::Argument(format!(
            "window of length {} underflows gamma^len for gamma = {gamma}",
            t - s + 1
        )));
    }
    let threshold = bound * (1.0 - 1e-12);

    let mut seen = SquareMatrix::zeros(n);
    let mut later = SquareMatrix::zeros(n);
    for (offset, a) in window.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                if a.get(i, j) > 0.0 {
                    seen.set(i, j, 1.0);
                    if offset > 0 {
                        later.set(i, j, 1.0);
                    }
                }
            }
        }
    }

    let mut violations = Vec::new();
    let mut checked = 0;
    let mut check = |clause, i: usize, j: usize, violations: &mut Vec<EntryViolation>| {
        checked += 1;
        let value = product.get(i, j);
        if value < threshold {
            violations.push(EntryViolation {
                clause,
                i,
                j,
                value,
            });
        }
    };
    let first = &window[0];
    for i in 0..n {
        check(EntryClause::Diagonal, i, i, &mut violations);
        for j in 0..n {
            if seen.get(i, j) > 0.0 {
                check(EntryClause::SingleHop, i, j, &mut violations);
            }
            if (0..n).any(|k| first.get(k, j) > 0.0 && later.get(i, k) > 0.0) {
                check(EntryClause::TwoHop, i, j, &mut violations);
            }
        }
    }
    Ok(BoundReport {
        bound,
        checked_entries: checked,
        violations,
    })
}
