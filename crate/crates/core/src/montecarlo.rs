//! Seeded multi-trial experiments.
//!
//! Trial `k` of an experiment with master seed `s` draws all of its randomness
//! from `RandomStream::new(s, k)`, so a trial is a pure function of
//! `(s, k, config)` and may run on any worker. Aggregation always folds trial
//! results in trial-id order, which makes summaries independent of the worker
//! count and of how trials are batched.
//!
//! Time indexing: the trace record for state time `τ >= 1` (after `τ` rounds)
//! carries `Λ_{τ-1,0}` and the per-node errors `|z_i(τ) - x̄|`; the rate bound
//! for that record is evaluated at `t = τ - 1`.

use serde::{Deserialize, Serialize};

use crate::bounds::{self, RateConstants, DEFAULT_SIGMA_SLACK};
use crate::digraph::DirectedGraph;
use crate::ergodicity::{MixingTimeline, RenewalMode, RenewalTracker};
use crate::error::{Error, Result};
use crate::pushsum::{f_bound, PushSumState};
use crate::randgen::{self, ProbabilitySequence, RandomStream};
use crate::stochmat::weight_from_graph;

/// Absolute slack on the pathwise bound, the conservation laws and the f bound.
pub const PATHWISE_TOL: f64 = 1e-9;
/// Slack on the monotonicity of `f`.
pub const F_MONOTONE_TOL: f64 = 1e-12;
/// Slack on the `y` floor at renewals.
pub const Y_FLOOR_TOL: f64 = 1e-12;
/// Errors below this are replaced by it before taking logarithms.
pub const DEFAULT_LN_FLOOR: f64 = 1e-300;
/// Trials folded per batch; batches run concurrently under the `parallel` feature.
const BATCH: usize = 64;

/// How trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon worker pool; `None` uses rayon's default size.
    #[cfg(feature = "parallel")]
    Parallel { workers: Option<usize> },
}

#[allow(clippy::derivable_impls)]
impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel { workers: None }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Diagnostics {
    /// Track `W(t:0)` and check the monotone `f` metric and its error bound.
    pub f_metric: bool,
    /// Track `W(t:0)` even without the f checks.
    pub products: bool,
    /// Run the cut-enumeration renewal detector next to the SCC one and flag
    /// any disagreement.
    pub brute_cut: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub family: ProbabilitySequence,
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub diagnostics: Diagnostics,
    pub ln_floor: f64,
    pub sigma_slack: f64,
    /// Consensus threshold for the convergence statistics.
    pub threshold: f64,
    /// Reject schedules failing [`randgen::validate`] before any trial runs.
    pub enforce_validation: bool,
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(family: ProbabilitySequence, x0: Vec<f64>, horizon: usize, trials: usize, seed: u64) -> Self {
        Self {
            family,
            x0,
            horizon,
            trials,
            seed,
            diagnostics: Diagnostics::default(),
            ln_floor: DEFAULT_LN_FLOOR,
            sigma_slack: DEFAULT_SIGMA_SLACK,
            threshold: 1e-8,
            enforce_validation: true,
            execution: Execution::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.family.n()
    }

    pub fn x0_l1norm(&self) -> f64 {
        self.x0.iter().map(|v| v.abs()).sum()
    }

    /// Structural checks plus, when enforced, schedule validation.
    pub fn check(&self) -> Result<()> {
        if self.x0.len() != self.n() {
            return Err(Error::Config(format!(
                "x0 has length {}, schedule has n = {}",
                self.x0.len(),
                self.n()
            )));
        }
        if self.horizon == 0 || self.trials == 0 {
            return Err(Error::Config("horizon and trials must be >= 1".into()));
        }
        if !(self.ln_floor > 0.0) {
            return Err(Error::Config("ln floor must be positive".into()));
        }
        if self.enforce_validation {
            let report = randgen::validate(&self.family, self.horizon);
            if let Some(issue) = report.issues.first() {
                return Err(Error::Config(format!(
                    "schedule fails validation ({} issues), first: {issue}",
                    report.issues.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    ValueMass,
    WeightMass,
    PathwiseBound,
    YFloor,
    FMonotone,
    FBound,
    RenewalOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// State time at which the check failed.
    pub t: usize,
    pub node: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub node_errors: Vec<f64>,
    pub consensus_error: f64,
    pub min_y: f64,
    /// `Λ_{t-1,0}`
    pub lambda: f64,
    pub f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialTrace {
    pub trial: u64,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    pub timeline: MixingTimeline,
    pub violations: Vec<Violation>,
    /// Number of renewal windows (n consecutive irreducible B-blocks) at which
    /// the `y` floor was checked.
    pub floor_checks: usize,
    pub mean: f64,
}

impl TrialTrace {
    pub fn conforming(&self) -> bool {
        self.violations.is_empty()
    }
}

struct TrialRun {
    trace: TrialTrace,
    graphs: Vec<DirectedGraph>,
}

fn simulate_trial(cfg: &ExperimentConfig, trial: u64, keep_graphs: bool) -> Result<TrialRun> {
    let ps = &cfg.family;
    let n = ps.n();
    let block = ps.block();
    let l1 = cfg.x0_l1norm();
    let sum_x0: f64 = cfg.x0.iter().sum();
    let floor = bounds::y_floor(n, block);
    let track = cfg.diagnostics.f_metric || cfg.diagnostics.products;

    let mut rng = RandomStream::new(cfg.seed, trial);
    let mut state = PushSumState::init(cfg.x0.clone())?;
    if track {
        state = state.with_product_tracking();
    }
    let mut tracker = RenewalTracker::new(n, RenewalMode::Scc)?;
    let mut oracle = if cfg.diagnostics.brute_cut {
        Some(RenewalTracker::new(n, RenewalMode::BruteCut)?)
    } else {
        None
    };
    let mut block_union = DirectedGraph::self_loops(n)?;
    let mut irreducible_run = 0usize;
    let mut floor_checks = 0usize;
    let mut previous_f = if cfg.diagnostics.f_metric {
        state.f_value()?
    } else {
        None
    };

    let mut records = Vec::with_capacity(cfg.horizon);
    let mut violations = Vec::new();
    let mut graphs = Vec::new();

    for t in 0..cfg.horizon {
        let lambda = tracker.timeline().log_lambda_product_from_zero(t).exp();
        let g = randgen::sample_graph(ps, t, &mut rng);
        let w = weight_from_graph(&g);
        let renewal = tracker.push(w.matrix())?;
        if let Some(o) = oracle.as_mut() {
            let other = o.push(w.matrix())?;
            if other != renewal {
                violations.push(Violation {
                    kind: ViolationKind::RenewalOracle,
                    t: t + 1,
                    node: None,
                    lhs: renewal.map_or(-1.0, |k| k as f64),
                    rhs: other.map_or(-1.0, |k| k as f64),
                });
            }
        }
        state.step(&w)?;
        let tau = t + 1;

        let sum_x: f64 = state.x().iter().sum();
        if (sum_x - sum_x0).abs() > PATHWISE_TOL {
            violations.push(Violation {
                kind: ViolationKind::ValueMass,
                t: tau,
                node: None,
                lhs: sum_x,
                rhs: sum_x0,
            });
        }
        let sum_y: f64 = state.y().iter().sum();
        if (sum_y - n as f64).abs() > PATHWISE_TOL {
            violations.push(Violation {
                kind: ViolationKind::WeightMass,
                t: tau,
                node: None,
                lhs: sum_y,
                rhs: n as f64,
            });
        }

        let z = state.estimates()?;
        let node_errors: Vec<f64> = z.iter().map(|v| (v - state.average()).abs()).collect();
        for (i, (&err, &yi)) in node_errors.iter().zip(state.y()).enumerate() {
            let rhs = bounds::pathwise_bound(l1, yi, lambda)?;
            if err > rhs + PATHWISE_TOL {
                violations.push(Violation {
                    kind: ViolationKind::PathwiseBound,
                    t: tau,
                    node: Some(i),
                    lhs: err,
                    rhs,
                });
            }
        }

        block_union.absorb(&g)?;
        if tau.is_multiple_of(block) {
            if block_union.is_strongly_connected() {
                irreducible_run += 1;
            } else {
                irreducible_run = 0;
            }
            block_union = DirectedGraph::self_loops(n)?;
            if irreducible_run >= n {
                floor_checks += 1;
                let min_y = state.min_y();
                if min_y < floor - Y_FLOOR_TOL {
                    violations.push(Violation {
                        kind: ViolationKind::YFloor,
                        t: tau,
                        node: None,
                        lhs: min_y,
                        rhs: floor,
                    });
                }
            }
        }

        let f = state.f_value()?;
        if cfg.diagnostics.f_metric {
            let current = f.expect("product tracked");
            if let Some(prev) = previous_f {
                if current > prev + F_MONOTONE_TOL {
                    violations.push(Violation {
                        kind: ViolationKind::FMonotone,
                        t: tau,
                        node: None,
                        lhs: current,
                        rhs: prev,
                    });
                }
            }
            let (lhs, rhs, holds) = f_bound(&state, current, PATHWISE_TOL)?;
            if !holds {
                violations.push(Violation {
                    kind: ViolationKind::FBound,
                    t: tau,
                    node: None,
                    lhs,
                    rhs,
                });
            }
            previous_f = Some(current);
        }

        let consensus_error = node_errors.iter().copied().fold(0.0, f64::max);
        records.push(TraceRecord {
            t: tau,
            x: state.x().to_vec(),
            y: state.y().to_vec(),
            z,
            node_errors,
            consensus_error,
            min_y: state.min_y(),
            lambda,
            f,
        });
        if keep_graphs {
            graphs.push(g);
        }
    }

    Ok(TrialRun {
        trace: TrialTrace {
            trial,
            seed: cfg.seed,
            records,
            timeline: tracker.finish(),
            violations,
            floor_checks,
            mean: state.average(),
        },
        graphs,
    })
}

fn wrap(cfg: &ExperimentConfig, trial: u64, e: Error) -> Error {
    Error::Trial {
        trial,
        seed: cfg.seed,
        source: Box::new(e),
    }
}

/// Runs one trial: samples `W(0..horizon)`, evolves the state, tracks the
/// mixing timeline and checks conservation, the pathwise bound, the `y` floor
/// at renewals and (when enabled) the `f` metric and the renewal oracle.
///
/// The configuration is not validated here; see [`ExperimentConfig::check`].
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialTrace> {
    simulate_trial(cfg, trial, false)
        .map(|r| r.trace)
        .map_err(|e| wrap(cfg, trial, e))
}

/// [`run_trial`] that also returns the sampled communication graphs, one per round.
pub fn run_trial_with_graphs(cfg: &ExperimentConfig, trial: u64) -> Result<(TrialTrace, Vec<DirectedGraph>)> {
    simulate_trial(cfg, trial, true)
        .map(|r| (r.trace, r.graphs))
        .map_err(|e| wrap(cfg, trial, e))
}

/// Maps `f` over trial ids `start..end`, preserving order.
fn map_trials<T, F>(exec: Execution, start: u64, end: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    match exec {
        Execution::Sequential => (start..end).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel { workers } => {
            use rayon::prelude::*;
            let run = || (start..end).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
            match workers {
                Some(k) => rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
                    .install(run),
                None => run(),
            }
        }
    }
}

/// Runs `trials` trials in batches and folds each batch in trial order.
fn for_each_trial<T, F, G>(cfg: &ExperimentConfig, run: F, mut fold: G) -> Result<()>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
    G: FnMut(T),
{
    let total = cfg.trials as u64;
    let mut start = 0u64;
    while start < total {
        let end = (start + BATCH as u64).min(total);
        for item in map_trials(cfg.execution, start, end, &run)? {
            fold(item);
        }
        start = end;
    }
    Ok(())
}

/// Running mean and variance, fed in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// Per-record aggregate over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Time index of the rate bound, `t = τ - 1` for state time `τ`.
    pub t: usize,
    pub mean_ln_err: Vec<f64>,
    pub se_ln_err: Vec<f64>,
    pub mean_ln_err_max: f64,
    pub se_ln_err_max: f64,
    pub mean_lambda: f64,
    pub se_lambda: f64,
    pub mean_ln_inv_y: Vec<f64>,
    pub se_ln_inv_y: Vec<f64>,
    pub mean_ln_inv_y_max: f64,
    /// `c0 - c1 t` when `t >= t_min` (and `n >= 2`).
    pub rate_bound: Option<f64>,
    /// `rate_bound - max_i mean_ln_err_i`.
    pub margin: Option<f64>,
    /// `mean_ln_err_max <= rate_bound + slack * se`.
    pub rate_ok: Option<bool>,
    /// Every node's mean is at most `rate_bound + slack * se`.
    pub rate_ok_per_node: Option<bool>,
    pub lambda_bound: Option<f64>,
    pub lambda_ok: Option<bool>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: u64,
    pub seed: u64,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStats {
    pub threshold: f64,
    pub converged: usize,
    pub fraction: f64,
    /// First state time at which the max error fell below the threshold, per trial.
    pub crossing_times: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub n: usize,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub block: usize,
    pub epsilon: f64,
    pub x0: Vec<f64>,
    pub sigma_slack: f64,
    pub ln_floor: f64,
    /// Log-error samples that hit exactly zero (or fell below the floor) and were floored.
    pub floored_samples: u64,
    pub rate: Option<RateConstants>,
    /// `ln(n)(nB/p + B)`
    pub ln_inv_y_bound: Option<f64>,
    pub rows: Vec<SummaryRow>,
    pub total_violations: usize,
    pub failures: Vec<TrialFailure>,
    pub truncated_timelines: usize,
    pub floor_checks: usize,
    pub convergence: ConvergenceStats,
}

impl ExperimentSummary {
    /// Rows where the rate bound applies.
    pub fn rate_rows(&self) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().filter(|r| r.rate_bound.is_some())
    }

    /// No pathwise violations and every valid row within the rate bound.
    pub fn passed(&self) -> bool {
        self.total_violations == 0 && self.rate_rows().all(|r| r.rate_ok == Some(true))
    }
}

/// Compact per-trial data needed by the aggregates.
struct TrialContribution {
    trial: u64,
    ln_err: Vec<Vec<f64>>,
    ln_err_max: Vec<f64>,
    lambda: Vec<f64>,
    ln_inv_y: Vec<Vec<f64>>,
    floored: u64,
    violations: Vec<Violation>,
    crossing: Option<usize>,
    truncated: bool,
    floor_checks: usize,
}

fn contribution(cfg: &ExperimentConfig, trace: TrialTrace) -> TrialContribution {
    let mut floored = 0;
    let mut ln = |e: f64| {
        if e < cfg.ln_floor {
            floored += 1;
            cfg.ln_floor.ln()
        } else {
            e.ln()
        }
    };
    let mut ln_err = Vec::with_capacity(trace.records.len());
    let mut ln_err_max = Vec::with_capacity(trace.records.len());
    for r in &trace.records {
        ln_err.push(r.node_errors.iter().map(|&e| ln(e)).collect());
        ln_err_max.push(ln(r.consensus_error));
    }
    TrialContribution {
        trial: trace.trial,
        ln_err,
        ln_err_max,
        lambda: trace.records.iter().map(|r| r.lambda).collect(),
        ln_inv_y: trace
            .records
            .iter()
            .map(|r| r.y.iter().map(|y| -y.ln()).collect())
            .collect(),
        floored,
        crossing: trace
            .records
            .iter()
            .find(|r| r.consensus_error < cfg.threshold)
            .map(|r| r.t),
        truncated: trace.timeline.truncated,
        floor_checks: trace.floor_checks,
        violations: trace.violations,
    }
}

/// Runs every trial and aggregates per-time statistics, bound comparisons and
/// violation accounting. Fails before any trial when the configuration is
/// invalid; a failing trial aborts with its id and seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.check()?;
    let n = cfg.n();
    let block = cfg.family.block();
    let rate = if n >= 2 && cfg.x0_l1norm() > 0.0 {
        Some(bounds::rate_constants(n, block, cfg.family.epsilon(), cfg.x0_l1norm())?)
    } else {
        None
    };

    let h = cfg.horizon;
    let mut ln_err = vec![vec![Moments::default(); n]; h];
    let mut ln_err_max = vec![Moments::default(); h];
    let mut lambda = vec![Moments::default(); h];
    let mut ln_inv_y = vec![vec![Moments::default(); n]; h];
    let mut violations_at = vec![0usize; h];
    let mut floored_samples = 0;
    let mut failures = Vec::new();
    let mut total_violations = 0;
    let mut truncated_timelines = 0;
    let mut floor_checks = 0;
    let mut crossing_times = Vec::with_capacity(cfg.trials);

    for_each_trial(
        cfg,
        |trial| run_trial(cfg, trial).map(|trace| contribution(cfg, trace)),
        |c| {
            for k in 0..h {
                for i in 0..n {
                    ln_err[k][i].push(c.ln_err[k][i]);
                    ln_inv_y[k][i].push(c.ln_inv_y[k][i]);
                }
                ln_err_max[k].push(c.ln_err_max[k]);
                lambda[k].push(c.lambda[k]);
            }
            for v in &c.violations {
                violations_at[v.t - 1] += 1;
            }
            floored_samples += c.floored;
            total_violations += c.violations.len();
            truncated_timelines += usize::from(c.truncated);
            floor_checks += c.floor_checks;
            crossing_times.push(c.crossing);
            if !c.violations.is_empty() {
                failures.push(TrialFailure {
                    trial: c.trial,
                    seed: cfg.seed,
                    violations: c.violations,
                });
            }
        },
    )?;

    let rows = (0..h)
        .map(|k| {
            let t = k;
            let mean_ln_err: Vec<f64> = ln_err[k].iter().map(|m| m.mean).collect();
            let se_ln_err: Vec<f64> = ln_err[k].iter().map(Moments::std_error).collect();
            let mean_ln_inv_y: Vec<f64> = ln_inv_y[k].iter().map(|m| m.mean).collect();
            let valid = rate.filter(|rc| rc.is_valid_time(t as f64));
            let rate_bound = valid.map(|rc| rc.bound_at(t as f64));
            let worst = mean_ln_err.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let rate_ok = rate_bound
                .map(|b| ln_err_max[k].mean <= b + cfg.sigma_slack * ln_err_max[k].std_error());
            let rate_ok_per_node = rate_bound.map(|b| {
                mean_ln_err
                    .iter()
                    .zip(&se_ln_err)
                    .all(|(m, se)| *m <= b + cfg.sigma_slack * se)
            });
            let lambda_bound = valid.and_then(|rc| {
                bounds::expected_lambda_bound(t as f64, n, block, rc.p).ok()
            });
            SummaryRow {
                t,
                mean_ln_err,
                se_ln_err,
                mean_ln_err_max: ln_err_max[k].mean,
                se_ln_err_max: ln_err_max[k].std_error(),
                mean_lambda: lambda[k].mean,
                se_lambda: lambda[k].std_error(),
                se_ln_inv_y: ln_inv_y[k].iter().map(Moments::std_error).collect(),
                mean_ln_inv_y_max: mean_ln_inv_y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_ln_inv_y,
                rate_bound,
                margin: rate_bound.map(|b| b - worst),
                rate_ok,
                rate_ok_per_node,
                lambda_ok: lambda_bound
                    .map(|b| lambda[k].mean <= b + cfg.sigma_slack * lambda[k].std_error()),
                lambda_bound,
                violations: violations_at[k],
            }
        })
        .collect();

    let converged = crossing_times.iter().filter(|c| c.is_some()).count();
    Ok(ExperimentSummary {
        n,
        horizon: h,
        trials: cfg.trials,
        seed: cfg.seed,
        block,
        epsilon: cfg.family.epsilon(),
        x0: cfg.x0.clone(),
        sigma_slack: cfg.sigma_slack,
        ln_floor: cfg.ln_floor,
        floored_samples,
        ln_inv_y_bound: rate.map(|rc| bounds::expected_log_inv_y_bound(n, block, rc.p)),
        rate,
        rows,
        total_violations,
        failures,
        truncated_timelines,
        floor_checks,
        convergence: ConvergenceStats {
            threshold: cfg.threshold,
            converged,
            fraction: converged as f64 / cfg.trials as f64,
            crossing_times,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusRecord {
    pub threshold: f64,
    pub trials: usize,
    pub horizon: usize,
    pub converged: usize,
    pub fraction: f64,
    pub crossing_times: Vec<Option<usize>>,
    /// Sorted crossing times of the converged trials.
    pub crossing_distribution: Vec<usize>,
    /// `(trial, seed)` of the trials that never crossed.
    pub shortfalls: Vec<(u64, u64)>,
}

impl CensusRecord {
    pub fn median_crossing(&self) -> Option<usize> {
        let d = &self.crossing_distribution;
        (!d.is_empty()).then(|| d[d.len() / 2])
    }
}

fn first_crossing(cfg: &ExperimentConfig, trial: u64, threshold: f64) -> Result<Option<usize>> {
    let mut rng = RandomStream::new(cfg.seed, trial);
    let mut state = PushSumState::init(cfg.x0.clone())?;
    for t in 0..cfg.horizon {
        let w = randgen::sample_weight_matrix(&cfg.family, t, &mut rng);
        state.step(&w)?;
        if state.consensus_error()? < threshold {
            return Ok(Some(t + 1));
        }
    }
    Ok(None)
}

/// Fraction of trials whose max error drops below `threshold` within the
/// horizon, with the first-crossing times. Uses the same random streams as
/// [`run_trial`], so crossing times agree with full traces.
pub fn convergence_census(cfg: &ExperimentConfig, threshold: f64) -> Result<CensusRecord> {
    if !(threshold > 0.0) {
        return Err(Error::Argument(format!("threshold must be positive, got {threshold}")));
    }
    cfg.check()?;
    let mut crossing_times = Vec::with_capacity(cfg.trials);
    for_each_trial(
        cfg,
        |trial| first_crossing(cfg, trial, threshold).map_err(|e| wrap(cfg, trial, e)),
        |c| crossing_times.push(c),
    )?;
    let mut crossing_distribution: Vec<usize> = crossing_times.iter().flatten().copied().collect();
    crossing_distribution.sort_unstable();
    let shortfalls = crossing_times
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(k, _)| (k as u64, cfg.seed))
        .collect();
    let converged = crossing_distribution.len();
    Ok(CensusRecord {
        threshold,
        trials: cfg.trials,
        horizon: cfg.horizon,
        converged,
        fraction: converged as f64 / cfg.trials as f64,
        crossing_times,
        crossing_distribution,
        shortfalls,
    })
}
