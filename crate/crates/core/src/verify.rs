//! Property suites behind `verify-bounds`.

use serde::Serialize;

use crate::bounds;
use crate::digraph::DirectedGraph;
use crate::ergodicity::{compute_k_sequence, phi_vector, RenewalMode};
use crate::error::Result;
use crate::montecarlo::{run_experiment, Diagnostics, Execution, ExperimentConfig, ViolationKind};
use crate::randgen::{self, ProbabilitySequence, RandomStream};
use crate::stochmat::{
    check_entry_bounds, is_positive, max_min_column_gap, product_range, weight_from_graph, Orientation,
    SquareMatrix, StochasticMatrix,
};

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    pub execution: Execution,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            horizon: 1000,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: u64,
    pub failures: u64,
    /// First few failures, human readable.
    pub examples: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            checks: 0,
            failures: 0,
            examples: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.examples.len() < 10 {
                self.examples.push(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

/// Static ring, two-phase ring and three complete Bernoulli families on `n` nodes.
pub fn default_families(n: usize) -> Result<Vec<(String, ProbabilitySequence)>> {
    let mut ring = SquareMatrix::identity(n);
    for from in 0..n {
        let to = (from + 1) % n;
        ring.set(to, from, 1.0);
    }
    let mut out = vec![
        (format!("static-ring-n{n}"), ProbabilitySequence::static_matrix(ring, 1, 1.0)?),
        (format!("two-phase-ring-n{n}"), ProbabilitySequence::two_phase_ring(n, 0.5)?),
    ];
    for eps in [0.3, 0.5, 1.0] {
        out.push((format!("bernoulli-n{n}-eps{eps}"), ProbabilitySequence::complete(n, eps)?));
    }
    Ok(out)
}

/// [`default_families`] for `n = 2..=6`.
pub fn default_matrix() -> Result<Vec<(String, ProbabilitySequence)>> {
    let mut out = Vec::new();
    for n in 2..=6 {
        out.extend(default_families(n)?);
    }
    Ok(out)
}

/// `x0` with entries in `[-1, 1)` drawn from `rng`.
pub fn random_x0(n: usize, rng: &mut RandomStream) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect()
}

/// Weight matrix of a uniformly drawn strongly connected graph (rejection
/// sampling over Bernoulli(1/2) edge sets).
pub fn random_irreducible_weight(n: usize, rng: &mut RandomStream) -> Result<StochasticMatrix> {
    loop {
        let mut g = DirectedGraph::self_loops(n)?;
        for from in 0..n {
            for to in 0..n {
                if from != to && rng.bernoulli(0.5) {
                    g.add_edge(from, to)?;
                }
            }
        }
        if g.is_strongly_connected() {
            return Ok(weight_from_graph(&g));
        }
    }
}

fn sample_sequence(ps: &ProbabilitySequence, len: usize, rng: &mut RandomStream) -> Vec<StochasticMatrix> {
    (0..len).map(|t| randgen::sample_weight_matrix(ps, t, rng)).collect()
}

/// Conservation, pathwise bound and `y` floor over the default matrix.
pub fn trial_suites(opts: &VerifyOptions) -> Result<Vec<SuiteReport>> {
    let mut conservation = SuiteReport::new("conservation");
    let mut pathwise = SuiteReport::new("pathwise-bound");
    let mut floor = SuiteReport::new("y-floor");
    let mut x0_rng = RandomStream::new(opts.seed, u64::MAX);
    for (name, family) in default_matrix()? {
        let n = family.n();
        let mut cfg = ExperimentConfig::new(family, random_x0(n, &mut x0_rng), opts.horizon, opts.trials, opts.seed);
        cfg.execution = opts.execution;
        let summary = run_experiment(&cfg)?;
        let count = |kinds: &[ViolationKind]| {
            summary
                .failures
                .iter()
                .flat_map(|f| f.violations.iter().map(move |v| (f.trial, v)))
                .filter(|(_, v)| kinds.contains(&v.kind))
                .collect::<Vec<_>>()
        };
        let steps = (opts.trials * opts.horizon) as u64;
        for (suite, kinds, checks) in [
            (
                &mut conservation,
                &[ViolationKind::ValueMass, ViolationKind::WeightMass][..],
                2 * steps,
            ),
            (&mut pathwise, &[ViolationKind::PathwiseBound][..], steps * n as u64),
            (&mut floor, &[ViolationKind::YFloor][..], summary.floor_checks as u64),
        ] {
            let bad = count(kinds);
            suite.checks += checks;
            suite.failures += bad.len() as u64;
            for (trial, v) in bad.iter().take(3) {
                suite.examples.push(format!("{name} trial {trial}: {v:?}"));
            }
        }
    }
    Ok(vec![conservation, pathwise, floor])
}

/// Monotonicity of `f` and `‖z - x̄‖∞ <= ‖x0‖∞ f` on product-tracking runs.
pub fn f_metric_suite(opts: &VerifyOptions, horizon: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("f-metric");
    let mut x0_rng = RandomStream::new(opts.seed, u64::MAX - 1);
    for n in 2..=4 {
        for (name, family) in default_families(n)? {
            let mut cfg = ExperimentConfig::new(family, random_x0(n, &mut x0_rng), horizon, opts.trials, opts.seed);
            cfg.execution = opts.execution;
            cfg.diagnostics = Diagnostics {
                f_metric: true,
                ..Diagnostics::default()
            };
            let summary = run_experiment(&cfg)?;
            report.checks += 2 * (opts.trials * horizon) as u64;
            for f in &summary.failures {
                for v in &f.violations {
                    report.failures += 1;
                    if report.examples.len() < 10 {
                        report.examples.push(format!("{name} trial {}: {v:?}", f.trial));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Products of `n - 1` irreducible weight matrices are positive with entries
/// at least `n^{-(n-1)}`.
pub fn positivity_suite(rng: &mut RandomStream, sequences: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("irreducible-product-positivity");
    for k in 0..sequences {
        let n = 2 + k % 5;
        let seq = (0..n - 1)
            .map(|_| random_irreducible_weight(n, rng))
            .collect::<Result<Vec<_>>>()?;
        let product = product_range(&seq, 0, n - 2)?;
        let floor = (n as f64).powi(-(n as i32 - 1));
        let min = product.matrix().min_entry();
        report.record(is_positive(product.matrix(), 0.0) && min >= floor - 1e-12, || {
            format!("n={n}: min entry {min} < {floor}")
        });
    }
    Ok(report)
}

/// All three entry clauses with `gamma = 1/n` on windows of Bernoulli(1/2) weight matrices.
pub fn entry_bound_suite(rng: &mut RandomStream, windows: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("entry-lower-bounds");
    for k in 0..windows {
        let n = 2 + k % 5;
        let len = 1 + (rng.uniform() * 8.0) as usize;
        let seq = sample_sequence(&ProbabilitySequence::complete(n, 0.5)?, len, rng);
        let r = check_entry_bounds(&seq, 0, len - 1, 1.0 / n as f64)?;
        report.record(r.passed(), || format!("n={n} len={len}: {:?}", r.violations));
    }
    Ok(report)
}

/// Contraction of row-stochastic and column-stochastic products by `Λ_{t,0}`.
pub fn contraction_suite(rng: &mut RandomStream, trials: usize, horizon: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("ergodic-contraction");
    for k in 0..trials {
        let n = 2 + k % 4;
        let family = if k % 2 == 0 {
            ProbabilitySequence::complete(n, 0.3)?
        } else {
            ProbabilitySequence::two_phase_ring(n, 0.5)?
        };
        let seq = sample_sequence(&family, horizon, rng);
        let timeline = compute_k_sequence(&seq, RenewalMode::Scc)?;
        let mut col = SquareMatrix::identity(n);
        let mut row = SquareMatrix::identity(n);
        for (t, w) in seq.iter().enumerate() {
            col = w.matrix().matmul(&col)?;
            row = w.matrix().transpose().matmul(&row)?;
            let lambda = timeline.lambda_product(0, t)?;
            let dev = phi_vector(&col, Orientation::ColumnStochastic).max_deviation;
            report.record(dev <= lambda + 1e-12, || {
                format!("column n={n} t={t}: deviation {dev} > {lambda}")
            });
            let gap = max_min_column_gap(&row).into_iter().fold(0.0, f64::max);
            report.record(gap <= lambda + 1e-12, || format!("row n={n} t={t}: gap {gap} > {lambda}"));
        }
    }
    Ok(report)
}

/// SCC and cut-enumeration renewal detection agree exactly.
pub fn oracle_suite(rng: &mut RandomStream, sequences: usize, horizon: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("renewal-oracle-equivalence");
    for k in 0..sequences {
        let n = 2 + k % 5;
        let prob = [0.1, 0.3, 0.6][k % 3];
        let seq = sample_sequence(&ProbabilitySequence::complete(n, prob)?, horizon, rng);
        let a = compute_k_sequence(&seq, RenewalMode::Scc)?;
        let b = compute_k_sequence(&seq, RenewalMode::BruteCut)?;
        report.record(a == b, || format!("n={n} p={prob}: {:?} vs {:?}", a.k, b.k));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoeffdingExperiment {
    pub frequency: f64,
    pub std_error: f64,
    pub bound: f64,
}

impl HoeffdingExperiment {
    pub fn passed(&self, sigma: f64) -> bool {
        self.frequency <= self.bound + sigma * self.std_error
    }
}

/// Frequency of `Σ (X_i - p) <= -α count` over Bernoulli(`p`) replicates.
pub fn hoeffding_experiment(
    rng: &mut RandomStream,
    p: f64,
    count: usize,
    alpha: f64,
    replicates: usize,
) -> Result<HoeffdingExperiment> {
    let bound = bounds::hoeffding_bound(count, alpha)?;
    let mut hits = 0usize;
    for _ in 0..replicates {
        let ones = (0..count).filter(|_| rng.bernoulli(p)).count();
        if ones as f64 - p * count as f64 <= -alpha * count as f64 {
            hits += 1;
        }
    }
    let frequency = hits as f64 / replicates as f64;
    // binomial SE at the bound, the largest frequency the test tolerates
    let std_error = (bound * (1.0 - bound) / replicates as f64).sqrt();
    Ok(HoeffdingExperiment {
        frequency,
        std_error,
        bound,
    })
}

pub fn product_max_suite(rng: &mut RandomStream, tuples: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("product-maximization");
    for _ in 0..tuples {
        let q = 1 + (rng.uniform() * 8.0) as usize;
        let n = 2 + (rng.uniform() * 4.0) as usize;
        let ls: Vec<u32> = (0..q).map(|_| (rng.uniform() * 11.0) as u32).collect();
        let c = bounds::product_max_check(&ls, n)?;
        report.record(c.ok, || format!("n={n} ls={ls:?}: {} > {}", c.lhs, c.rhs));
    }
    Ok(report)
}

pub fn simplification_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("rate-simplification-chain");
    for n in 2..=6 {
        for block in 1..=3 {
            for eps in [0.3, 0.5, 1.0] {
                let t_min = bounds::rate_constants(n, block, eps, 1.0)?.t_min;
                for scale in [1.0, 1.5, 2.0, 5.0, 10.0, 100.0] {
                    let t = (t_min * scale).ceil();
                    let c = bounds::simplification_check(n, block, eps, t)?;
                    report.record(c.passed(), || format!("{c:?}"));
                }
            }
        }
    }
    Ok(report)
}

/// Every suite at the sizes used by `verify-bounds`.
pub fn run_all(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = RandomStream::new(opts.seed, 1 << 32);
    let mut suites = trial_suites(opts)?;
    suites.push(f_metric_suite(opts, opts.horizon.min(200))?);
    suites.push(positivity_suite(&mut rng, 500)?);
    suites.push(entry_bound_suite(&mut rng, 200)?);
    suites.push(contraction_suite(&mut rng, 50, opts.horizon.min(500))?);
    suites.push(oracle_suite(&mut rng, 200, opts.horizon.min(100))?);
    let h = hoeffding_experiment(&mut rng, 0.5, 100, 0.1, 100_000)?;
    let mut hoeffding = SuiteReport::new("hoeffding");
    hoeffding.record(h.passed(bounds::DEFAULT_SIGMA_SLACK), || format!("{h:?}"));
    suites.push(hoeffding);
    suites.push(product_max_suite(&mut rng, 10_000)?);
    suites.push(simplification_suite()?);
    Ok(VerifyReport { suites })
}
