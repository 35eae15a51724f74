//! Realized mixing structure of a matrix sequence.
//!
//! A renewal time `k_q` is the first time after `k_{q-1}` at which the union of
//! the graphs of `A(k_{q-1}), ..., A(k_q - 1)` is strongly connected, which is the
//! same as every nontrivial cut having received positive flow over that stretch.
//! Every `n` renewals close a mixing window of length
//! `ℓ_q = k_{qn} - k_{(q-1)n}` with contraction factor `λ_q = 1 - n^{-ℓ_q}`, and
//! `Λ_{t,s}` is the product of `λ_q` over the windows lying inside `[s, t]`
//! (`s <= k_{(q-1)n}` and `k_{qn} <= t`).
//!
//! A single node has no nontrivial cut and therefore no renewals; its timeline
//! is empty and `Λ ≡ 1`.

use serde::Serialize;

use crate::digraph::{DirectedGraph, MAX_CUT_ENUMERATION_NODES};
use crate::error::{Error, Result};
use crate::stochmat::{Orientation, SquareMatrix, StochasticMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenewalMode {
    /// Strong connectivity of the incremental union graph.
    Scc,
    /// Per-cut flow accumulators over all `2^n - 2` nontrivial cuts.
    BruteCut,
}

/// One closed mixing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingWindow {
    /// 1-based window index `q`.
    pub q: usize,
    /// `k_{(q-1)n}`
    pub start: usize,
    /// `k_{qn}`
    pub end: usize,
    /// `ℓ_q = end - start`
    pub length: usize,
    /// `λ_q = 1 - n^{-ℓ_q}`
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingTimeline {
    pub n: usize,
    /// Number of matrices examined.
    pub horizon: usize,
    /// Renewal times, `k[0] = 0`.
    pub k: Vec<usize>,
    pub windows: Vec<MixingWindow>,
    /// The horizon was reached with a renewal window still open.
    pub truncated: bool,
    // prefix sums of ln λ_q; log_prefix[q] = Σ_{r <= q} ln λ_r
    #[serde(skip)]
    log_prefix: Vec<f64>,
}

fn lambda_for(n: usize, length: usize) -> (f64, f64) {
    let inverse_power = (-(length as f64) * (n as f64).ln()).exp();
    (1.0 - inverse_power, (-inverse_power).ln_1p())
}

impl MixingTimeline {
    fn empty(n: usize) -> Self {
        Self {
            n,
            horizon: 0,
            k: vec![0],
            windows: Vec::new(),
            truncated: false,
            log_prefix: vec![0.0],
        }
    }

    fn push_renewal(&mut self, k: usize) {
        self.k.push(k);
        let renewals = self.k.len() - 1;
        if renewals.is_multiple_of(self.n) {
            let q = renewals / self.n;
            let start = self.k[(q - 1) * self.n];
            let length = k - start;
            let (lambda, log_lambda) = lambda_for(self.n, length);
            self.windows.push(MixingWindow {
                q,
                start,
                end: k,
                length,
                lambda,
            });
            let last = *self.log_prefix.last().expect("prefix starts at 0");
            self.log_prefix.push(last + log_lambda);
        }
    }

    /// Renewal times after `k_0`.
    pub fn renewals(&self) -> &[usize] {
        &self.k[1..]
    }

    /// `ℓ_q` for the closed windows.
    pub fn lengths(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.length).collect()
    }

    /// `ln Λ_{t,0}`.
    pub fn log_lambda_product_from_zero(&self, t: usize) -> f64 {
        let closed = self.windows.partition_point(|w| w.end <= t);
        self.log_prefix[closed]
    }

    /// `Λ_{t,s} = Π_{q ∈ ℚ_{t,s}} λ_q`; the empty product is 1.
    pub fn lambda_product(&self, s: usize, t: usize) -> Result<f64> {
        if t < s {
            return Err(Error::Range { t, s });
        }
        let first = self.windows.partition_point(|w| w.start < s);
        let last = self.windows.partition_point(|w| w.end <= t);
        if last <= first {
            return Ok(1.0);
        }
        Ok((self.log_prefix[last] - self.log_prefix[first]).exp())
    }

    /// Partial sum `Σ_q n^{-ℓ_q}` over closed windows.
    pub fn inverse_power_sum(&self) -> f64 {
        self.windows
            .iter()
            .map(|w| (-(w.length as f64) * (self.n as f64).ln()).exp())
            .sum()
    }

    /// Growth of [`Self::inverse_power_sum`] per unit time: partial sum divided by
    /// the end of the last closed window (0 when no window closed).
    pub fn inverse_power_growth(&self) -> f64 {
        match self.windows.last() {
            Some(w) => self.inverse_power_sum() / w.end as f64,
            None => 0.0,
        }
    }
}

/// Incremental renewal detection, fed one matrix graph per time step.
#[derive(Debug, Clone)]
pub struct RenewalTracker {
    mode: RenewalMode,
    timeline: MixingTimeline,
    union: DirectedGraph,
    cut_flows: Vec<f64>,
}

impl RenewalTracker {
    pub fn new(n: usize, mode: RenewalMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("n must be >= 1".into()));
        }
        let cut_flows = match mode {
            RenewalMode::Scc => Vec::new(),
            RenewalMode::BruteCut => {
                if n > MAX_CUT_ENUMERATION_NODES {
                    return Err(Error::Capability(format!(
                        "brute-cut mode limited to n <= {MAX_CUT_ENUMERATION_NODES}, got {n}"
                    )));
                }
                vec![0.0; 1 << n]
            }
        };
        Ok(Self {
            mode,
            timeline: MixingTimeline::empty(n),
            union: DirectedGraph::self_loops(n)?,
            cut_flows,
        })
    }

    pub fn n(&self) -> usize {
        self.timeline.n
    }

    /// Number of matrices consumed so far.
    pub fn time(&self) -> usize {
        self.timeline.horizon
    }

    pub fn timeline(&self) -> &MixingTimeline {
        &self.timeline
    }

    /// Consumes the next matrix `A(t)`; returns the renewal time `t + 1` if
    /// this matrix closed a renewal window.
    pub fn push(&mut self, a: &SquareMatrix) -> Result<Option<usize>> {
        let n = self.n();
        if a.n() != n {
            return Err(Error::Dimension(format!("expected {n}x{n} matrix")));
        }
        self.timeline.horizon += 1;
        if n == 1 {
            return Ok(None);
        }
        let renewed = match self.mode {
            RenewalMode::Scc => {
                let mut added = false;
                for i in 0..n {
                    for j in 0..n {
                        if a.get(i, j) > 0.0 && self.union.add_edge(j, i)? {
                            added = true;
                        }
                    }
                }
                added && self.union.is_strongly_connected()
            }
            RenewalMode::BruteCut => {
                let full = (1usize << n) - 1;
                let mut all_positive = true;
                for mask in 1..full {
                    let mut flow = 0.0;
                    for i in (0..n).filter(|i| mask & (1 << i) != 0) {
                        for j in (0..n).filter(|j| mask & (1 << j) == 0) {
                            flow += a.get(i, j);
                        }
                    }
                    self.cut_flows[mask] += flow;
                    all_positive &= self.cut_flows[mask] > 0.0;
                }
                all_positive
            }
        };
        if !renewed {
            return Ok(None);
        }
        let k = self.timeline.horizon;
        self.timeline.push_renewal(k);
        self.union = DirectedGraph::self_loops(n)?;
        self.cut_flows.iter_mut().for_each(|f| *f = 0.0);
        Ok(Some(k))
    }

    /// Timeline with the truncation flag set for the current horizon.
    pub fn finish(mut self) -> MixingTimeline {
        let last = *self.timeline.k.last().expect("k_0 present");
        self.timeline.truncated = self.timeline.n > 1 && last < self.timeline.horizon;
        self.timeline
    }

    pub fn snapshot(&self) -> MixingTimeline {
        self.clone().finish()
    }
}

/// Greedy renewal times over `seq[0..T]`.
pub fn compute_k_sequence(seq: &[StochasticMatrix], mode: RenewalMode) -> Result<MixingTimeline> {
    let first = seq
        .first()
        .ok_or_else(|| Error::Argument("empty matrix sequence".into()))?;
    let mut tracker = RenewalTracker::new(first.n(), mode)?;
    for a in seq {
        tracker.push(a.matrix())?;
    }
    Ok(tracker.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiReport {
    pub phi: Vec<f64>,
    /// Largest `|entry - φ|` over the product.
    pub max_deviation: f64,
}

/// Limit-vector candidate of a product and its deviation.
///
/// Row-stochastic products `A(t:s)`: `φ_j = min_i A_ij`, deviation
/// `max_{i,j} |A_ij - φ_j|`. Column-stochastic products `W(t:s)`:
/// `φ_i = min_j W_ij`, deviation `max_{i,j} |W_ij - φ_i|`. The caller fixes the
/// analysis horizon `t` by choosing which product to pass.
pub fn phi_vector(product: &SquareMatrix, orientation: Orientation) -> PhiReport {
    let n = product.n();
    let m = match orientation {
        Orientation::RowStochastic => product.transpose(),
        Orientation::ColumnStochastic => product.clone(),
    };
    // rows of `m` now carry the index φ is attached to
    let mut phi = Vec::with_capacity(n);
    let mut max_deviation = 0.0f64;
    for i in 0..n {
        let row = m.row(i);
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        phi.push(lo);
        max_deviation = max_deviation.max(hi - lo);
    }
    PhiReport { phi, max_deviation }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeFlowReport {
    pub horizon: usize,
    /// Cumulative flow into each cut, indexed by the subset bitmask
    /// (entries 0 and `2^n - 1` are unused and zero).
    pub per_cut: Vec<f64>,
    pub min_flow: f64,
    pub min_cut: usize,
    /// Least-squares slope of the minimum cumulative flow against time.
    pub min_flow_slope: f64,
}

/// Finite-horizon infinite-flow diagnostic: cumulative `A_{S S̄}` per cut.
/// The property itself is asymptotic; this only reports the prefix.
pub fn infinite_flow_report(seq: &[SquareMatrix]) -> Result<CumulativeFlowReport> {
    let n = seq
        .first()
        .ok_or_else(|| Error::Argument("empty matrix sequence".into()))?
        .n();
    if n > MAX_CUT_ENUMERATION_NODES {
        return Err(Error::Capability(format!(
            "cut enumeration limited to n <= {MAX_CUT_ENUMERATION_NODES}, got {n}"
        )));
    }
    if n == 1 {
        return Ok(CumulativeFlowReport {
            horizon: seq.len(),
            per_cut: vec![0.0; 2],
            min_flow: 0.0,
            min_cut: 0,
            min_flow_slope: 0.0,
        });
    }
    let full = (1usize << n) - 1;
    let mut per_cut = vec![0.0; full + 1];
    let mut min_series = Vec::with_capacity(seq.len());
    for a in seq {
        if a.n() != n {
            return Err(Error::Dimension("sequence mixes matrix sizes".into()));
        }
        let mut current_min = f64::INFINITY;
        for (mask, acc) in per_cut.iter_mut().enumerate().take(full).skip(1) {
            for i in (0..n).filter(|i| mask & (1 << i) != 0) {
                for j in (0..n).filter(|j| mask & (1 << j) == 0) {
                    *acc += a.get(i, j);
                }
            }
            current_min = current_min.min(*acc);
        }
        min_series.push(current_min);
    }
    let (min_cut, min_flow) = per_cut[1..full]
        .iter()
        .enumerate()
        .fold((1, f64::INFINITY), |(bm, bv), (k, &v)| {
            if v < bv {
                (k + 1, v)
            } else {
                (bm, bv)
            }
        });
    Ok(CumulativeFlowReport {
        horizon: seq.len(),
        per_cut,
        min_flow,
        min_cut,
        min_flow_slope: regression_slope(&min_series),
    })
}

fn regression_slope(series: &[f64]) -> f64 {
    let len = series.len();
    if len < 2 {
        return 0.0;
    }
    let mean_t = (len as f64 + 1.0) / 2.0;
    let mean_v = series.iter().sum::<f64>() / len as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, v) in series.iter().enumerate() {
        let dt = (k + 1) as f64 - mean_t;
        num += dt * (v - mean_v);
        den += dt * dt;
    }
    num / den
}
