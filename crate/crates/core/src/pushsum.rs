//! The push-sum engine.
//!
//! Each node keeps a value `x_i` and a weight `y_i` (initially 1) and in every
//! round pushes equal shares of both to its out-neighbours, i.e. `x <- W x`,
//! `y <- W y` with `W` column-stochastic. The ratio `z_i = x_i / y_i` estimates
//! the average of the initial values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stochmat::{Orientation, SquareMatrix, StochasticMatrix};

/// Column-sum tolerance accepted by [`PushSumState::step`].
pub const STEP_COLUMN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PushSumState {
    t: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    x0: Vec<f64>,
    average: f64,
    /// `W(t-1:0)`, identity at `t = 0`; only kept when requested.
    product: Option<SquareMatrix>,
}

/// One entry of the per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub consensus_error: f64,
    pub f: Option<f64>,
}

impl PushSumState {
    pub fn init(x0: Vec<f64>) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::Argument("initial vector must be nonempty".into()));
        }
        let n = x0.len();
        let average = x0.iter().sum::<f64>() / n as f64;
        Ok(Self {
            t: 0,
            x: x0.clone(),
            y: vec![1.0; n],
            x0,
            average,
            product: None,
        })
    }

    /// Also accumulate `W(t-1:0)` (O(n^3) per step).
    pub fn with_product_tracking(mut self) -> Self {
        if self.product.is_none() {
            self.product = Some(SquareMatrix::identity(self.n()));
        }
        self
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// Target of consensus, `(1/n) Σ x_i(0)`.
    pub fn average(&self) -> f64 {
        self.average
    }

    pub fn product(&self) -> Option<&SquareMatrix> {
        self.product.as_ref()
    }

    pub fn min_y(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Applies one round `x <- W x`, `y <- W y`.
    pub fn step(&mut self, w: &StochasticMatrix) -> Result<()> {
        let n = self.n();
        if w.n() != n {
            return Err(Error::Dimension(format!(
                "weight matrix is {m}x{m}, state has {n} nodes",
                m = w.n()
            )));
        }
        if w.orientation() != Orientation::ColumnStochastic {
            return Err(Error::Protocol("push-sum needs a column-stochastic matrix".into()));
        }
        let m = w.matrix();
        for (j, s) in m.column_sums().iter().enumerate() {
            if (s - 1.0).abs() > STEP_COLUMN_TOL {
                return Err(Error::Protocol(format!("column {j} sums to {s}")));
            }
        }
        if let Some(i) = (0..n).find(|&i| !(m.get(i, i) > 0.0)) {
            return Err(Error::Protocol(format!("node {i} has no self-loop weight")));
        }
        self.x = m.matvec(&self.x)?;
        self.y = m.matvec(&self.y)?;
        if let Some(p) = self.product.as_mut() {
            *p = m.matmul(p)?;
        }
        self.t += 1;
        Ok(())
    }

    /// `z = x ./ y`.
    pub fn estimates(&self) -> Result<Vec<f64>> {
        self.x
            .iter()
            .zip(&self.y)
            .enumerate()
            .map(|(i, (&x, &y))| {
                if y > 0.0 {
                    Ok(x / y)
                } else {
                    Err(Error::Invariant(format!("y[{i}] = {y} is not positive")))
                }
            })
            .collect()
    }

    /// `|z_i - x̄|` for every node.
    pub fn node_errors(&self) -> Result<Vec<f64>> {
        Ok(self
            .estimates()?
            .into_iter()
            .map(|z| (z - self.average).abs())
            .collect())
    }

    /// `max_i |z_i - x̄|`.
    pub fn consensus_error(&self) -> Result<f64> {
        Ok(self.node_errors()?.into_iter().fold(0.0, f64::max))
    }

    /// `f` evaluated on the tracked product, if tracking is on.
    pub fn f_value(&self) -> Result<Option<f64>> {
        self.product
            .as_ref()
            .map(|p| f_metric(p, &self.y))
            .transpose()
    }

    pub fn record(&self) -> Result<StepRecord> {
        let z = self.estimates()?;
        let consensus_error = z
            .iter()
            .map(|v| (v - self.average).abs())
            .fold(0.0, f64::max);
        Ok(StepRecord {
            t: self.t,
            x: self.x.clone(),
            y: self.y.clone(),
            z,
            consensus_error,
            f: self.f_value()?,
        })
    }
}

/// `f = max_i Σ_j |P_ij - (1/n) Σ_k P_ik| / y_i` for the accumulated product `P`
/// and `y = P 1`. Non-increasing along push-sum trajectories and bounds the
/// error: `‖z - x̄ 1‖_∞ <= ‖x(0)‖_∞ f`.
pub fn f_metric(product: &SquareMatrix, y: &[f64]) -> Result<f64> {
    let n = product.n();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "y has length {}, product is {n}x{n}",
            y.len()
        )));
    }
    let row_sums = product.row_sums();
    let drift = row_sums
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift > 1e-9 {
        return Err(Error::Consistency(format!(
            "y differs from the product's row sums by {drift}"
        )));
    }
    let mut f = 0.0f64;
    for (i, &yi) in y.iter().enumerate() {
        if !(yi > 0.0) {
            return Err(Error::Invariant(format!("y[{i}] = {yi} is not positive")));
        }
        let row = product.row(i);
        let mean = row_sums[i] / n as f64;
        let spread: f64 = row.iter().map(|v| (v - mean).abs()).sum();
        f = f.max(spread / yi);
    }
    Ok(f)
}

/// Checks `‖z - x̄ 1‖_∞ <= ‖x(0)‖_∞ f + tol`; returns `(lhs, rhs, holds)`.
pub fn f_bound(state: &PushSumState, f: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let lhs = state.consensus_error()?;
    let sup = state.x0().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rhs = sup * f;
    Ok((lhs, rhs, lhs <= rhs + tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::DirectedGraph;
    use crate::stochmat::weight_from_graph;
    use approx::assert_abs_diff_eq;

    fn complete_pair() -> StochasticMatrix {
        weight_from_graph(&DirectedGraph::complete(2).unwrap())
    }

    #[test]
    fn init_examples() {
        let s = PushSumState::init(vec![0.0, 2.0]).unwrap();
        assert_eq!(s.y(), &[1.0, 1.0]);
        assert_eq!(s.average(), 1.0);
        let s = PushSumState::init(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.y(), &[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(s.average(), 1.0 / 3.0);
        assert!(matches!(PushSumState::init(vec![]), Err(Error::Argument(_))));
    }

    #[test]
    fn single_node_stays_put() {
        let mut s = PushSumState::init(vec![5.0]).unwrap();
        let w = weight_from_graph(&DirectedGraph::self_loops(1).unwrap());
        for _ in 0..10 {
            s.step(&w).unwrap();
            assert_eq!(s.estimates().unwrap(), vec![5.0]);
            assert_eq!(s.consensus_error().unwrap(), 0.0);
        }
    }

    #[test]
    fn identity_step_only_advances_time() {
        let mut s = PushSumState::init(vec![3.0, -1.0, 2.0]).unwrap();
        s.step(&StochasticMatrix::identity(3, Orientation::ColumnStochastic))
            .unwrap();
        assert_eq!(s.t(), 1);
        assert_eq!(s.x(), &[3.0, -1.0, 2.0]);
        assert_eq!(s.y(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn complete_pair_reaches_consensus_in_one_step() {
        let mut s = PushSumState::init(vec![0.0, 2.0]).unwrap();
        s.step(&complete_pair()).unwrap();
        assert_eq!(s.x(), &[1.0, 1.0]);
        assert_eq!(s.y(), &[1.0, 1.0]);
        assert_eq!(s.estimates().unwrap(), vec![1.0, 1.0]);
        assert_eq!(s.consensus_error().unwrap(), 0.0);
    }

    #[test]
    fn cycle_step_by_hand() {
        let w = weight_from_graph(&DirectedGraph::ring(3).unwrap());
        let mut s = PushSumState::init(vec![1.0, 0.0, 0.0]).unwrap();
        s.step(&w).unwrap();
        assert_eq!(s.x(), &[0.5, 0.5, 0.0]);
        assert_eq!(s.y(), &[1.0, 1.0, 1.0]);
        assert_eq!(s.estimates().unwrap(), vec![0.5, 0.5, 0.0]);
        assert_abs_diff_eq!(s.consensus_error().unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn estimates_divide_elementwise() {
        let mut s = PushSumState::init(vec![0.0, 0.0]).unwrap();
        s.x = vec![0.3, 0.9];
        s.y = vec![0.6, 1.4];
        let z = s.estimates().unwrap();
        assert_abs_diff_eq!(z[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(z[1], 0.9 / 1.4, epsilon = 1e-15);
        s.y[1] = 0.0;
        assert!(matches!(s.estimates(), Err(Error::Invariant(_))));
    }

    #[test]
    fn step_rejects_bad_weights() {
        let mut s = PushSumState::init(vec![1.0, 2.0]).unwrap();
        let three = StochasticMatrix::identity(3, Orientation::ColumnStochastic);
        assert!(matches!(s.step(&three), Err(Error::Dimension(_))));
        let row = StochasticMatrix::identity(2, Orientation::RowStochastic);
        assert!(matches!(s.step(&row), Err(Error::Protocol(_))));
        let loose = StochasticMatrix::with_tolerance(
            SquareMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.6]]).unwrap(),
            Orientation::ColumnStochastic,
            0.2,
        )
        .unwrap();
        assert!(matches!(s.step(&loose), Err(Error::Protocol(_))));
        let no_loop = StochasticMatrix::new(
            SquareMatrix::from_rows(vec![vec![0.0, 0.5], vec![1.0, 0.5]]).unwrap(),
            Orientation::ColumnStochastic,
        )
        .unwrap();
        assert!(matches!(s.step(&no_loop), Err(Error::Protocol(_))));
        assert_eq!(s.t(), 0);
    }

    #[test]
    fn f_metric_examples() {
        assert_eq!(f_metric(&SquareMatrix::filled(3, 1.0 / 3.0), &[1.0; 3]).unwrap(), 0.0);
        assert_eq!(f_metric(&SquareMatrix::identity(2), &[1.0, 1.0]).unwrap(), 1.0);

        let mut s = PushSumState::init(vec![0.0, 2.0])
            .unwrap()
            .with_product_tracking();
        s.step(&complete_pair()).unwrap();
        let f = s.f_value().unwrap().unwrap();
        assert_eq!(f, 0.0);
        let (lhs, rhs, ok) = f_bound(&s, f, 1e-9).unwrap();
        assert_eq!((lhs, rhs, ok), (0.0, 0.0, true));
    }

    #[test]
    fn f_metric_rejects_inconsistent_y() {
        assert!(matches!(
            f_metric(&SquareMatrix::identity(2), &[1.0, 0.5]),
            Err(Error::Consistency(_))
        ));
        assert!(matches!(
            f_metric(&SquareMatrix::identity(2), &[1.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn tracked_product_reproduces_state() {
        let w1 = weight_from_graph(&DirectedGraph::ring(3).unwrap());
        let w2 = weight_from_graph(&DirectedGraph::from_edges(3, [(2, 0)]).unwrap());
        let mut s = PushSumState::init(vec![1.0, 4.0, -2.0])
            .unwrap()
            .with_product_tracking();
        s.step(&w1).unwrap();
        s.step(&w2).unwrap();
        let p = s.product().unwrap();
        let x = p.matvec(&[1.0, 4.0, -2.0]).unwrap();
        for (a, b) in x.iter().zip(s.x()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        for (a, b) in p.row_sums().iter().zip(s.y()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }
}
