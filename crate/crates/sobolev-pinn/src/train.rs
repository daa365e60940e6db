//! Training harness: collocation sampling, the training loop, test-error
//! metrics, threshold bookkeeping, and multi-seed sweeps.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{total_loss, BoundarySamples, Field, LossVariant, SampleBatch};
use crate::network::{Architecture, MlpParams};
use crate::optimizer::{AdamParams, AdamState};
use crate::problems::{BoundaryKind, ProblemDef, ProblemKind};
use crate::reference::{self, ReferenceGrid};
use crate::tape::Tape;

/// Decouples the sampling RNG stream from the initialization stream.
const SAMPLE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
/// A run whose test error exceeds this is recorded as diverged.
const DIVERGENCE_ERROR: f64 = 1e6;
/// Test error is evaluated every epoch once it falls within this factor of
/// the threshold.
const DENSE_EVAL_FACTOR: f64 = 1.2;

/// How collocation points are drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    /// One grid drawn before training and reused every epoch.
    FixedGrid {
        n_t: usize,
        n_x: usize,
        n_b: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_v: Option<usize>,
    },
    /// A fresh uniform draw every epoch.
    Iterative {
        points_per_epoch: usize,
        boundary_per_epoch: usize,
    },
}

/// Test-error metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `max_t ‖u − u_nn‖_{L²(Ω)}` over the test times.
    LinfL2,
    /// `‖u − u_nn‖_{L²} / ‖u‖_{L²}` over the test set.
    RelativeL2,
}

/// Everything a single training run needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub problem: String,
    pub loss: LossVariant,
    /// Hidden layer widths (the input width comes from the problem).
    pub hidden: Vec<usize>,
    pub optimizer: AdamParams,
    pub sampling: SamplingMode,
    pub epochs: u64,
    pub threshold: f64,
    /// Test-error evaluation stride in epochs.
    pub eval_stride: u64,
    pub metric: Metric,
    pub seed: u64,
    /// Path to a reference grid file (kinetic problems); solved on the fly
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
}

impl TrainConfig {
    /// Sensible defaults for a problem/variant pair: hidden `64-64`, learning
    /// rate `1e-3` (`1e-4` for Poisson), fixed 31-grids for time problems,
    /// iterative 500-point sampling for Poisson, 100 fixed points for toys.
    pub fn new(problem: &str, loss: LossVariant) -> Result<TrainConfig> {
        let def = ProblemDef::by_name(problem)?;
        let (sampling, lr, metric) = match def.kind() {
            ProblemKind::Heat { .. } | ProblemKind::Burgers { .. } => (
                SamplingMode::FixedGrid {
                    n_t: 31,
                    n_x: 31,
                    n_b: 31,
                    n_v: None,
                },
                1e-3,
                Metric::LinfL2,
            ),
            ProblemKind::FokkerPlanck { .. } => (
                SamplingMode::FixedGrid {
                    n_t: 31,
                    n_x: 31,
                    n_b: 31,
                    n_v: Some(31),
                },
                1e-3,
                Metric::LinfL2,
            ),
            ProblemKind::Poisson { .. } => (
                SamplingMode::Iterative {
                    points_per_epoch: 500,
                    boundary_per_epoch: 500,
                },
                1e-4,
                Metric::RelativeL2,
            ),
            ProblemKind::Toy { .. } => (
                SamplingMode::FixedGrid {
                    n_t: 1,
                    n_x: 100,
                    n_b: 0,
                    n_v: None,
                },
                1e-3,
                Metric::RelativeL2,
            ),
        };
        Ok(TrainConfig {
            problem: problem.to_string(),
            loss,
            hidden: vec![64, 64],
            optimizer: AdamParams::with_lr(lr),
            sampling,
            epochs: 3000,
            threshold: 1e-3,
            eval_stride: 10,
            metric,
            seed: 0,
            reference: None,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epoch budget must be ≥ 1".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("threshold must be > 0".into()));
        }
        if self.eval_stride == 0 {
            return Err(Error::InvalidConfig("eval stride must be ≥ 1".into()));
        }
        if self.hidden.is_empty() {
            return Err(Error::InvalidConfig("need at least one hidden layer".into()));
        }
        match &self.sampling {
            SamplingMode::FixedGrid { n_t, n_x, .. } => {
                if *n_t == 0 || *n_x == 0 {
                    return Err(Error::InvalidConfig("grid counts must be ≥ 1".into()));
                }
            }
            SamplingMode::Iterative {
                points_per_epoch, ..
            } => {
                if *points_per_epoch == 0 {
                    return Err(Error::InvalidConfig(
                        "points per epoch must be ≥ 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-run trajectory and outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    pub config: TrainConfig,
    /// Training loss at every epoch (1-based epochs; index 0 is epoch 1).
    pub loss_series: Vec<f64>,
    /// `(epoch, test error)` at evaluation epochs.
    pub error_series: Vec<(u64, f64)>,
    /// First evaluation epoch whose test error is ≤ threshold.
    pub epochs_to_threshold: Option<u64>,
    /// Last evaluated test error (infinite if never evaluated).
    pub final_error: f64,
    pub wall_seconds: f64,
    pub diverged: bool,
    /// Checkpoint file name, set when the record is written to a directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

fn draw_uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.random_range(range.0..range.1)
}

/// A time coordinate uniform on `(0, T]`.
fn draw_time(rng: &mut ChaCha8Rng, t_end: f64) -> f64 {
    t_end - rng.random_range(0.0..t_end)
}

/// Draws the fixed collocation grid: i.i.d. uniform interior points (counts
/// multiply: `n_t·n_x` or `n_t·n_x·n_v`), an initial slice at `t = 0`, and
/// boundary samples. Deterministic per seed.
pub fn make_fixed_grid(
    problem: &ProblemDef,
    n_t: usize,
    n_x: usize,
    n_b: usize,
    n_v: Option<usize>,
    seed: u64,
) -> Result<SampleBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = problem.input_dim();
    let ranges = problem.spatial_ranges();
    match problem.kind() {
        ProblemKind::Heat { t_end, .. } | ProblemKind::Burgers { t_end, .. } => {
            let n_int = n_t * n_x;
            let mut interior = Vec::with_capacity(n_int * 2);
            for _ in 0..n_int {
                interior.push(draw_time(&mut rng, *t_end));
                interior.push(draw_uniform(&mut rng, ranges[0]));
            }
            let mut initial = Vec::with_capacity(n_x * 2);
            for _ in 0..n_x {
                initial.push(0.0);
                initial.push(draw_uniform(&mut rng, ranges[0]));
            }
            // Per endpoint, n_b fresh time draws.
            let mut boundary = Vec::with_capacity(2 * n_b * 2);
            for endpoint in [ranges[0].0, ranges[0].1] {
                for _ in 0..n_b {
                    boundary.push(draw_time(&mut rng, *t_end));
                    boundary.push(endpoint);
                }
            }
            let omega = problem.interior_measure();
            Ok(SampleBatch::new(
                dim,
                interior,
                initial,
                BoundarySamples::Dirichlet(boundary),
                t_end * omega / n_int as f64,
                omega / n_x as f64,
                t_end * problem.boundary_measure() / (2 * n_b) as f64,
            ))
        }
        ProblemKind::FokkerPlanck { t_end, .. } => {
            let n_vv = n_v.unwrap_or(n_x);
            let n_int = n_t * n_x * n_vv;
            let mut interior = Vec::with_capacity(n_int * 3);
            for _ in 0..n_int {
                interior.push(draw_time(&mut rng, *t_end));
                interior.push(draw_uniform(&mut rng, ranges[0]));
                interior.push(draw_uniform(&mut rng, ranges[1]));
            }
            let n_ic = n_x * n_vv;
            let mut initial = Vec::with_capacity(n_ic * 3);
            for _ in 0..n_ic {
                initial.push(0.0);
                initial.push(draw_uniform(&mut rng, ranges[0]));
                initial.push(draw_uniform(&mut rng, ranges[1]));
            }
            // (t, v) pairs evaluated at both x-edges.
            let n_bc = n_t * n_b;
            let mut left = Vec::with_capacity(n_bc * 3);
            let mut right = Vec::with_capacity(n_bc * 3);
            for _ in 0..n_bc {
                let t = draw_time(&mut rng, *t_end);
                let v = draw_uniform(&mut rng, ranges[1]);
                left.extend_from_slice(&[t, ranges[0].0, v]);
                right.extend_from_slice(&[t, ranges[0].1, v]);
            }
            let omega = problem.interior_measure();
            Ok(SampleBatch::new(
                dim,
                interior,
                initial,
                BoundarySamples::PeriodicPairs { left, right },
                t_end * omega / n_int as f64,
                omega / n_ic as f64,
                t_end * problem.boundary_measure() / n_bc as f64,
            ))
        }
        ProblemKind::Poisson { d, .. } => {
            let n_int = n_x;
            let mut interior = Vec::with_capacity(n_int * d);
            for _ in 0..n_int {
                for _ in 0..*d {
                    interior.push(rng.random_range(0.0..1.0));
                }
            }
            let boundary = draw_poisson_boundary(&mut rng, *d, n_b);
            Ok(SampleBatch::new(
                dim,
                interior,
                Vec::new(),
                BoundarySamples::Dirichlet(boundary),
                problem.interior_measure() / n_int as f64,
                1.0,
                problem.boundary_measure() / n_b.max(1) as f64,
            ))
        }
        ProblemKind::Toy { .. } => {
            let mut interior = Vec::with_capacity(n_x);
            for _ in 0..n_x {
                interior.push(draw_uniform(&mut rng, ranges[0]));
            }
            Ok(SampleBatch::new(
                dim,
                interior,
                Vec::new(),
                BoundarySamples::Dirichlet(Vec::new()),
                1.0,
                1.0,
                1.0,
            ))
        }
    }
}

/// Uniform draws on the faces of `(0,1)^d`: a face is chosen uniformly, the
/// remaining coordinates uniformly inside.
fn draw_poisson_boundary(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        let face = rng.random_range(0..2 * d);
        let (axis, side) = (face / 2, face % 2);
        for i in 0..d {
            if i == axis {
                out.push(side as f64);
            } else {
                out.push(rng.random_range(0.0..1.0));
            }
        }
    }
    out
}

/// A fresh uniform batch for iterative sampling: `n_points` interior draws
/// and `n_boundary` boundary draws (time problems also redraw `n_boundary`
/// initial points).
pub fn resample_uniform(
    problem: &ProblemDef,
    n_points: usize,
    n_boundary: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SampleBatch> {
    let dim = problem.input_dim();
    let ranges = problem.spatial_ranges();
    match problem.kind() {
        ProblemKind::Poisson { d, .. } => {
            let mut interior = Vec::with_capacity(n_points * d);
            for _ in 0..n_points {
                for _ in 0..*d {
                    interior.push(rng.random_range(0.0..1.0));
                }
            }
            let boundary = draw_poisson_boundary(rng, *d, n_boundary);
            Ok(SampleBatch::new(
                dim,
                interior,
                Vec::new(),
                BoundarySamples::Dirichlet(boundary),
                problem.interior_measure() / n_points as f64,
                1.0,
                problem.boundary_measure() / n_boundary.max(1) as f64,
            ))
        }
        ProblemKind::Toy { .. } => {
            let mut interior = Vec::with_capacity(n_points);
            for _ in 0..n_points {
                interior.push(draw_uniform(rng, ranges[0]));
            }
            Ok(SampleBatch::new(
                dim,
                interior,
                Vec::new(),
                BoundarySamples::Dirichlet(Vec::new()),
                1.0,
                1.0,
                1.0,
            ))
        }
        ProblemKind::Heat { t_end, .. } | ProblemKind::Burgers { t_end, .. } => {
            let mut interior = Vec::with_capacity(n_points * 2);
            for _ in 0..n_points {
                interior.push(draw_time(rng, *t_end));
                interior.push(draw_uniform(rng, ranges[0]));
            }
            let mut initial = Vec::with_capacity(n_boundary * 2);
            for _ in 0..n_boundary {
                initial.push(0.0);
                initial.push(draw_uniform(rng, ranges[0]));
            }
            let mut boundary = Vec::with_capacity(2 * n_boundary * 2);
            for endpoint in [ranges[0].0, ranges[0].1] {
                for _ in 0..n_boundary {
                    boundary.push(draw_time(rng, *t_end));
                    boundary.push(endpoint);
                }
            }
            let omega = problem.interior_measure();
            Ok(SampleBatch::new(
                dim,
                interior,
                initial,
                BoundarySamples::Dirichlet(boundary),
                t_end * omega / n_points as f64,
                omega / n_boundary.max(1) as f64,
                t_end * problem.boundary_measure() / (2 * n_boundary.max(1)) as f64,
            ))
        }
        ProblemKind::FokkerPlanck { t_end, .. } => {
            let mut interior = Vec::with_capacity(n_points * 3);
            for _ in 0..n_points {
                interior.push(draw_time(rng, *t_end));
                interior.push(draw_uniform(rng, ranges[0]));
                interior.push(draw_uniform(rng, ranges[1]));
            }
            let mut initial = Vec::with_capacity(n_boundary * 3);
            for _ in 0..n_boundary {
                initial.push(0.0);
                initial.push(draw_uniform(rng, ranges[0]));
                initial.push(draw_uniform(rng, ranges[1]));
            }
            let mut left = Vec::with_capacity(n_boundary * 3);
            let mut right = Vec::with_capacity(n_boundary * 3);
            for _ in 0..n_boundary {
                let t = draw_time(rng, *t_end);
                let v = draw_uniform(rng, ranges[1]);
                left.extend_from_slice(&[t, ranges[0].0, v]);
                right.extend_from_slice(&[t, ranges[0].1, v]);
            }
            let omega = problem.interior_measure();
            Ok(SampleBatch::new(
                dim,
                interior,
                initial,
                BoundarySamples::PeriodicPairs { left, right },
                t_end * omega / n_points as f64,
                omega / n_boundary.max(1) as f64,
                t_end * problem.boundary_measure() / n_boundary.max(1) as f64,
            ))
        }
    }
}

/// A prebuilt test set with cached reference values.
pub struct TestGrid {
    kind: TestGridKind,
}

enum TestGridKind {
    /// Time-slice structure for `L∞(0,T;L²)`: per slice, points and trapezoid
    /// weights.
    TimeSpace {
        times: Vec<f64>,
        xs: Vec<f64>,
        /// Exact values, time-major.
        exact: Vec<f64>,
        /// Trapezoid weights per x node.
        weights: Vec<f64>,
    },
    /// Fokker–Planck: the reference grid's own cells.
    Fp {
        grid: Arc<ReferenceGrid>,
    },
    /// A flat point set (Poisson, toys) for relative L².
    Points {
        dim: usize,
        points: Vec<f64>,
        exact: Vec<f64>,
    },
}

/// Fixed seed of the Poisson random test set.
const POISSON_TEST_SEED: u64 = 0x7E57_0123;

impl TestGrid {
    /// Builds the standard test set for a problem: 101×101 time-space nodes
    /// (heat/Burgers), the reference grid's cells (Fokker–Planck), 10 000
    /// fixed uniform points (Poisson), 1001 uniform points (toys).
    pub fn for_problem(
        problem: &ProblemDef,
        reference: Option<Arc<ReferenceGrid>>,
    ) -> Result<TestGrid> {
        let kind = match problem.kind() {
            ProblemKind::Heat { t_end, x_range } => {
                Self::time_space(*t_end, *x_range, |t, x| Ok(reference::heat_exact(t, x)))?
            }
            ProblemKind::Burgers { t_end, x_range, nu } => {
                Self::time_space(*t_end, *x_range, |t, x| {
                    reference::burgers_exact(t, x, *nu, 128)
                })?
            }
            ProblemKind::FokkerPlanck { .. } => {
                let grid = reference.ok_or_else(|| Error::InvalidConfig(
                    "kinetic problems need a reference grid for test error".into(),
                ))?;
                TestGridKind::Fp { grid }
            }
            ProblemKind::Poisson { d, k_freq } => {
                let mut rng = ChaCha8Rng::seed_from_u64(POISSON_TEST_SEED);
                let n = 10_000;
                let mut points = Vec::with_capacity(n * d);
                for _ in 0..n * d {
                    points.push(rng.random_range(0.0..1.0));
                }
                let exact = points
                    .chunks(*d)
                    .map(|x| reference::poisson_exact(x, *k_freq))
                    .collect();
                TestGridKind::Points {
                    dim: *d,
                    points,
                    exact,
                }
            }
            ProblemKind::Toy { target } => {
                let (a, b) = target.domain();
                let n = 1001;
                let points: Vec<f64> = (0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect();
                let exact = points.iter().map(|&x| target.y(x)).collect();
                TestGridKind::Points {
                    dim: 1,
                    points,
                    exact,
                }
            }
        };
        Ok(TestGrid { kind })
    }

    fn time_space(
        t_end: f64,
        x_range: (f64, f64),
        exact_fn: impl Fn(f64, f64) -> Result<f64>,
    ) -> Result<TestGridKind> {
        let n = 101;
        let times: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        let xs: Vec<f64> = (0..n)
            .map(|i| x_range.0 + (x_range.1 - x_range.0) * i as f64 / (n - 1) as f64)
            .collect();
        let mut exact = Vec::with_capacity(n * n);
        for &t in &times {
            for &x in &xs {
                exact.push(exact_fn(t, x)?);
            }
        }
        let dx = (x_range.1 - x_range.0) / (n - 1) as f64;
        let mut weights = vec![dx; n];
        weights[0] = 0.5 * dx;
        weights[n - 1] = 0.5 * dx;
        Ok(TestGridKind::TimeSpace {
            times,
            xs,
            exact,
            weights,
        })
    }
}

/// Test error of `params` against the problem's reference solution.
pub fn test_error(
    params: &MlpParams,
    _problem: &ProblemDef,
    metric: Metric,
    grid: &TestGrid,
) -> Result<f64> {
    match (&grid.kind, metric) {
        (
            TestGridKind::TimeSpace {
                times,
                xs,
                exact,
                weights,
            },
            Metric::LinfL2,
        ) => {
            let mut points = Vec::with_capacity(times.len() * xs.len() * 2);
            for &t in times {
                for &x in xs {
                    points.push(t);
                    points.push(x);
                }
            }
            let u = params.eval_batch(&points)?;
            let mut worst = 0.0f64;
            for (k, _) in times.iter().enumerate() {
                let mut acc = 0.0;
                for (j, w) in weights.iter().enumerate() {
                    let diff = u[k * xs.len() + j] - exact[k * xs.len() + j];
                    acc += w * diff * diff;
                }
                worst = worst.max(acc.sqrt());
            }
            Ok(worst)
        }
        (TestGridKind::Fp { grid }, Metric::LinfL2) => {
            let (nx, nv) = (grid.x_axis.len(), grid.v_axis.len());
            let dx = 1.0 / nx as f64;
            let dv = grid.v_axis[1] - grid.v_axis[0];
            let mut worst = 0.0f64;
            let mut points = Vec::with_capacity(nx * nv * 3);
            for (k, &t) in grid.t_axis.iter().enumerate() {
                points.clear();
                for &x in &grid.x_axis {
                    for &v in &grid.v_axis {
                        points.extend_from_slice(&[t, x, v]);
                    }
                }
                let u = params.eval_batch(&points)?;
                let slice = grid.slice(k);
                let mut acc = 0.0;
                for (uu, rr) in u.iter().zip(slice) {
                    let diff = uu - rr;
                    acc += diff * diff;
                }
                worst = worst.max((acc * dx * dv).sqrt());
            }
            Ok(worst)
        }
        (
            TestGridKind::Points {
                dim,
                points,
                exact,
            },
            Metric::RelativeL2,
        ) => {
            let _ = dim;
            let u = params.eval_batch(points)?;
            let (mut num, mut den) = (0.0, 0.0);
            for (uu, ee) in u.iter().zip(exact) {
                num += (uu - ee) * (uu - ee);
                den += ee * ee;
            }
            if den == 0.0 {
                return Err(Error::InvalidConfig(
                    "relative error undefined: zero reference norm".into(),
                ));
            }
            Ok((num / den).sqrt())
        }
        _ => Err(Error::InvalidConfig(
            "metric does not match the test grid layout".into(),
        )),
    }
}

/// Resolves the reference grid a config needs (kinetic problems only).
pub fn resolve_reference(
    problem: &ProblemDef,
    config: &TrainConfig,
) -> Result<Option<Arc<ReferenceGrid>>> {
    if problem.boundary_kind() != BoundaryKind::Periodic {
        return Ok(None);
    }
    match &config.reference {
        Some(path) => Ok(Some(Arc::new(ReferenceGrid::load(path)?))),
        None => {
            let n_t = reference::fp_suggested_steps(problem, 128, 256)?;
            Ok(Some(Arc::new(reference::fp_solve(
                problem,
                (128, 256, n_t),
                31,
            )?)))
        }
    }
}

/// Trains one run per its config. Returns the record and the final
/// parameters.
pub fn train(config: &TrainConfig) -> Result<(TrainRecord, MlpParams)> {
    let problem = ProblemDef::by_name(&config.problem)?;
    let reference = resolve_reference(&problem, config)?;
    train_with_reference(config, reference)
}

/// [`train`] with a pre-resolved reference grid (shared across sweep runs).
pub fn train_with_reference(
    config: &TrainConfig,
    reference: Option<Arc<ReferenceGrid>>,
) -> Result<(TrainRecord, MlpParams)> {
    config.validate()?;
    let problem = ProblemDef::by_name(&config.problem)?;
    if !config.loss.compatible_with(problem.kind()) {
        return Err(Error::IncompatibleVariant {
            variant: config.loss.name().to_string(),
            kind: problem.name().to_string(),
        });
    }
    let start = Instant::now();
    let test_grid = TestGrid::for_problem(&problem, reference)?;
    let arch = Architecture::new(problem.input_dim(), &config.hidden)?;
    let mut params = MlpParams::init_uniform(&arch, config.seed);
    let mut adam = AdamState::new(config.optimizer, arch.n_params());

    let sample_seed = config.seed ^ SAMPLE_SEED_SALT;
    let mut sample_rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let fixed_batch = match &config.sampling {
        SamplingMode::FixedGrid { n_t, n_x, n_b, n_v } => Some(make_fixed_grid(
            &problem,
            *n_t,
            *n_x,
            *n_b,
            *n_v,
            sample_seed,
        )?),
        SamplingMode::Iterative { .. } => None,
    };

    let mut record = TrainRecord {
        config: config.clone(),
        loss_series: Vec::with_capacity(config.epochs as usize),
        error_series: Vec::new(),
        epochs_to_threshold: None,
        final_error: f64::INFINITY,
        wall_seconds: 0.0,
        diverged: false,
        checkpoint: None,
    };

    let mut dense_eval = false;
    'epochs: for epoch in 1..=config.epochs {
        let batch = match (&config.sampling, &fixed_batch) {
            (_, Some(b)) => b.clone(),
            (
                SamplingMode::Iterative {
                    points_per_epoch,
                    boundary_per_epoch,
                },
                None,
            ) => resample_uniform(
                &problem,
                *points_per_epoch,
                *boundary_per_epoch,
                &mut sample_rng,
            )?,
            _ => unreachable!("fixed batch prepared above"),
        };

        let params_arc = Arc::new(params.clone());
        let mut tape = Tape::new();
        let loss_var = total_loss(
            &mut tape,
            &Field::Network(&params_arc),
            &problem,
            &batch,
            config.loss,
        )?;
        let loss = tape.value(loss_var);
        record.loss_series.push(loss);
        if !loss.is_finite() {
            record.diverged = true;
            break 'epochs;
        }
        let grad = tape.param_gradient(loss_var)?;
        let mut flat = params.flatten();
        match adam.step(&mut flat, &grad) {
            Ok(()) => params = MlpParams::from_flat(&arch, &flat)?,
            Err(Error::NonFinite { .. }) => {
                record.diverged = true;
                break 'epochs;
            }
            Err(e) => return Err(e),
        }

        let due = epoch % config.eval_stride == 0 || dense_eval || epoch == config.epochs;
        if due {
            let err = test_error(&params, &problem, config.metric, &test_grid)?;
            record.error_series.push((epoch, err));
            record.final_error = err;
            if !err.is_finite() || err > DIVERGENCE_ERROR {
                record.diverged = true;
                break 'epochs;
            }
            if err <= config.threshold {
                record.epochs_to_threshold = Some(epoch);
                break 'epochs;
            }
            dense_eval = err <= DENSE_EVAL_FACTOR * config.threshold;
        }
    }
    record.wall_seconds = start.elapsed().as_secs_f64();
    Ok((record, params))
}

/// Aggregate statistics over a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n_runs: usize,
    pub n_diverged: usize,
    pub n_unreached: usize,
    /// Mean/std of epochs-to-threshold over runs that reached it.
    pub mean_epochs: Option<f64>,
    pub std_epochs: Option<f64>,
    pub mean_final_error: f64,
    pub std_final_error: f64,
    /// `(bin_left, bin_right, count)` over epochs-to-threshold.
    pub histogram: Vec<(f64, f64, usize)>,
}

/// Sample mean and standard deviation (std is 0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Builds the aggregate summary from individual records.
pub fn summarize(records: &[TrainRecord]) -> SweepSummary {
    let n_diverged = records.iter().filter(|r| r.diverged).count();
    let completed: Vec<&TrainRecord> = records.iter().filter(|r| !r.diverged).collect();
    let reached: Vec<f64> = completed
        .iter()
        .filter_map(|r| r.epochs_to_threshold.map(|e| e as f64))
        .collect();
    let n_unreached = completed.len() - reached.len();
    let errors: Vec<f64> = completed.iter().map(|r| r.final_error).collect();
    let (mean_err, std_err) = mean_std(&errors);
    let (mean_epochs, std_epochs) = if reached.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&reached);
        (Some(m), Some(s))
    };
    SweepSummary {
        n_runs: records.len(),
        n_diverged,
        n_unreached,
        mean_epochs,
        std_epochs,
        mean_final_error: mean_err,
        std_final_error: std_err,
        histogram: histogram(&reached, 10),
    }
}

/// Equal-width bins over the observed range.
fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((max - min) / bins as f64).max(1.0);
    let mut out: Vec<(f64, f64, usize)> = (0..bins)
        .map(|b| (min + b as f64 * width, min + (b + 1) as f64 * width, 0))
        .collect();
    for &v in values {
        let b = (((v - min) / width) as usize).min(bins - 1);
        out[b].2 += 1;
    }
    out
}

/// Runs `n_seeds` independent runs (seeds `base..base+n`), optionally in
/// parallel; per-run numeric content is independent of the parallelism.
/// Returns each run's record and final parameters.
pub fn sweep_full(
    config: &TrainConfig,
    n_seeds: usize,
    jobs: usize,
) -> Result<(Vec<(TrainRecord, MlpParams)>, SweepSummary)> {
    use rayon::prelude::*;
    if n_seeds == 0 {
        return Err(Error::InvalidConfig("need at least one seed".into()));
    }
    let problem = ProblemDef::by_name(&config.problem)?;
    let reference = resolve_reference(&problem, config)?;
    let configs: Vec<TrainConfig> = (0..n_seeds)
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed + i as u64;
            c
        })
        .collect();
    let results: Vec<Result<(TrainRecord, MlpParams)>> = if jobs <= 1 {
        configs
            .iter()
            .map(|c| train_with_reference(c, reference.clone()))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| {
            configs
                .par_iter()
                .map(|c| train_with_reference(c, reference.clone()))
                .collect()
        })
    };
    let mut runs = Vec::with_capacity(n_seeds);
    for r in results {
        runs.push(r?);
    }
    let summary = summarize(&runs.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>());
    Ok((runs, summary))
}

/// [`sweep_full`] without the parameter sets.
pub fn sweep(
    config: &TrainConfig,
    n_seeds: usize,
    jobs: usize,
) -> Result<(Vec<TrainRecord>, SweepSummary)> {
    let (runs, summary) = sweep_full(config, n_seeds, jobs)?;
    Ok((runs.into_iter().map(|(r, _)| r).collect(), summary))
}

/// Writes `NNN.json` (the record), `NNN.csv` (epoch, loss, test error at
/// evaluation epochs) and `NNN.net.json` (final parameter checkpoint) into
/// `out_dir`. Returns the updated record (with the checkpoint name).
pub fn write_record_files(
    record: &TrainRecord,
    params: &MlpParams,
    out_dir: &Path,
    index: usize,
) -> Result<TrainRecord> {
    std::fs::create_dir_all(out_dir)?;
    let stem = format!("{index:03}");
    let mut record = record.clone();
    let net_name = format!("{stem}.net.json");
    params.save_checkpoint(&out_dir.join(&net_name), Some(record.config.seed))?;
    record.checkpoint = Some(net_name);
    let json = serde_json::to_string_pretty(&record)?;
    std::fs::write(out_dir.join(format!("{stem}.json")), json)?;
    let mut csv = String::from("epoch,loss,test_error\n");
    for &(epoch, err) in &record.error_series {
        let loss = record.loss_series[(epoch - 1) as usize];
        csv.push_str(&format!("{epoch},{loss},{err}\n"));
    }
    std::fs::write(out_dir.join(format!("{stem}.csv")), csv)?;
    Ok(record)
}

/// Writes `LABEL_summary.csv` (per-seed outcomes) and `LABEL_hist.csv`
/// (epochs-to-threshold histogram) into `out_dir`.
pub fn write_sweep_files(
    records: &[TrainRecord],
    summary: &SweepSummary,
    out_dir: &Path,
    label: &str,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("seed,epochs_to_threshold,final_error,seconds\n");
    for r in records {
        let epochs = r
            .epochs_to_threshold
            .map(|e| e.to_string())
            .unwrap_or_else(|| "unreached".into());
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.config.seed, epochs, r.final_error, r.wall_seconds
        ));
    }
    std::fs::write(out_dir.join(format!("{label}_summary.csv")), csv)?;
    let mut hist = String::from("bin_left,bin_right,count\n");
    for &(l, r, c) in &summary.histogram {
        hist.push_str(&format!("{l},{r},{c}\n"));
    }
    std::fs::write(out_dir.join(format!("{label}_hist.csv")), hist)?;
    Ok(())
}
