//! Sobolev loss functionals and their Monte-Carlo discretizations.
//!
//! The residual, initial and boundary penalties are weighted sums of squared
//! derivative mismatches over sampled points. Every sum is accumulated in a
//! fixed order — residual term first, then extra derivative terms; points in
//! batch order; the domain-measure weight applied last — so that a
//! higher-order variant's loss is bounded below by the lower-order variant's
//! loss on the same batch, not just mathematically but in floating point.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{DerivRequest, MultiIndex, SmoothField};
use crate::network::MlpParams;
use crate::problems::{BoundaryKind, ProblemDef, ProblemKind, ToyTarget};
use crate::tape::{EntryBlock, Tape, Var};

/// The `(k,p)` time, `(l,q)` space and optional `(m,r)` velocity orders of a
/// Sobolev loss functional. Only exponent 2 is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SobolevOrders {
    pub time: (usize, usize),
    pub space: (usize, usize),
    pub velocity: Option<(usize, usize)>,
}

impl SobolevOrders {
    /// Validates orders (`k,l,m ≤ 2`) and exponents (`p = q = r = 2`).
    pub fn new(
        time: (usize, usize),
        space: (usize, usize),
        velocity: Option<(usize, usize)>,
    ) -> Result<SobolevOrders> {
        for (ord, exp) in [time, space, velocity.unwrap_or((0, 2))] {
            if ord > 2 {
                return Err(Error::UnsupportedOrder { order: ord, max: 2 });
            }
            if exp != 2 {
                return Err(Error::InvalidConfig(format!(
                    "only exponent 2 is supported, got {exp}"
                )));
            }
        }
        Ok(SobolevOrders {
            time,
            space,
            velocity,
        })
    }

    /// Time derivative order `k`.
    pub fn k(&self) -> usize {
        self.time.0
    }

    /// Spatial derivative order `l`.
    pub fn l(&self) -> usize {
        self.space.0
    }

    /// Velocity derivative order `m` (zero when absent).
    pub fn m(&self) -> usize {
        self.velocity.map_or(0, |(m, _)| m)
    }
}

/// Named total-loss variants.
///
/// `Hb*` apply to heat/Burgers, `Fp*` to the kinetic Fokker–Planck equation,
/// `Po*` to the Poisson family, `Toy*` to regression targets. Increasing the
/// index adds derivative-matching terms; index 0 is the traditional L² loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossVariant {
    Hb0,
    Hb1,
    Hb2,
    Fp0,
    Fp1,
    Po0,
    Po1,
    Po2,
    ToyL2,
    ToyH1,
    ToyH2,
}

impl LossVariant {
    /// All variants, in family order.
    pub fn all() -> [LossVariant; 11] {
        use LossVariant::*;
        [Hb0, Hb1, Hb2, Fp0, Fp1, Po0, Po1, Po2, ToyL2, ToyH1, ToyH2]
    }

    /// Orders of the residual (GE) term.
    pub fn ge_orders(&self) -> SobolevOrders {
        use LossVariant::*;
        let (time, space, velocity) = match self {
            Hb0 | Hb1 => ((0, 2), (0, 2), None),
            Hb2 => ((1, 2), (0, 2), None),
            Fp0 => ((0, 2), (0, 2), Some((0, 2))),
            Fp1 => ((0, 2), (1, 2), Some((1, 2))),
            Po0 => ((0, 2), (0, 2), None),
            Po1 | Po2 => ((0, 2), (1, 2), None),
            ToyL2 | ToyH1 | ToyH2 => ((0, 2), (0, 2), None),
        };
        SobolevOrders {
            time,
            space,
            velocity,
        }
    }

    /// Orders of the initial-condition term, when the variant has one.
    pub fn ic_orders(&self) -> Option<SobolevOrders> {
        use LossVariant::*;
        let (space, velocity) = match self {
            Hb0 => ((0, 2), None),
            Hb1 => ((1, 2), None),
            Hb2 => ((2, 2), None),
            Fp0 => ((0, 2), Some((0, 2))),
            Fp1 => ((1, 2), Some((1, 2))),
            Po0 | Po1 | Po2 | ToyL2 | ToyH1 | ToyH2 => return None,
        };
        Some(SobolevOrders {
            time: (0, 2),
            space,
            velocity,
        })
    }

    /// Orders of the boundary term (ignored by periodic boundaries, which
    /// always match derivatives of order ≤ 1).
    pub fn bc_orders(&self) -> Option<SobolevOrders> {
        use LossVariant::*;
        let space = match self {
            Hb0 | Hb1 | Hb2 | Fp0 | Fp1 | Po0 | Po1 => (0, 2),
            Po2 => (1, 2),
            ToyL2 | ToyH1 | ToyH2 => return None,
        };
        Some(SobolevOrders {
            time: (0, 2),
            space,
            velocity: match self {
                Fp0 | Fp1 => Some((0, 2)),
                _ => None,
            },
        })
    }

    /// The derivative-matching order of a toy loss.
    pub fn toy_order(&self) -> Option<usize> {
        match self {
            LossVariant::ToyL2 => Some(0),
            LossVariant::ToyH1 => Some(1),
            LossVariant::ToyH2 => Some(2),
            _ => None,
        }
    }

    /// Whether this variant applies to the given problem kind.
    pub fn compatible_with(&self, kind: &ProblemKind) -> bool {
        use LossVariant::*;
        matches!(
            (self, kind),
            (Hb0 | Hb1 | Hb2, ProblemKind::Heat { .. })
                | (Hb0 | Hb1 | Hb2, ProblemKind::Burgers { .. })
                | (Fp0 | Fp1, ProblemKind::FokkerPlanck { .. })
                | (Po0 | Po1 | Po2, ProblemKind::Poisson { .. })
                | (ToyL2 | ToyH1 | ToyH2, ProblemKind::Toy { .. })
        )
    }

    /// Catalog name, e.g. `hb2` or `toy-h1`.
    pub fn name(&self) -> &'static str {
        use LossVariant::*;
        match self {
            Hb0 => "hb0",
            Hb1 => "hb1",
            Hb2 => "hb2",
            Fp0 => "fp0",
            Fp1 => "fp1",
            Po0 => "po0",
            Po1 => "po1",
            Po2 => "po2",
            ToyL2 => "toy-l2",
            ToyH1 => "toy-h1",
            ToyH2 => "toy-h2",
        }
    }

    /// Parses a catalog name.
    pub fn parse(name: &str) -> Result<LossVariant> {
        Self::all()
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::InvalidConfig(format!(
                "unknown loss variant {name:?}; known: {}",
                Self::all().map(|v| v.name()).join(", ")
            )))
    }
}

impl std::fmt::Display for LossVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for LossVariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for LossVariant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        LossVariant::parse(&name).map_err(serde::de::Error::custom)
    }
}

/// Boundary samples: plain points for Dirichlet problems, paired `(x=0, x=1)`
/// evaluation points for periodic ones.
#[derive(Debug, Clone)]
pub enum BoundarySamples {
    Dirichlet(Vec<f64>),
    /// `left` holds points with `x` at the lower edge, `right` the same
    /// points with `x` at the upper edge; both are full-coordinate rows.
    PeriodicPairs { left: Vec<f64>, right: Vec<f64> },
}

/// Collocation samples and their Monte-Carlo weights.
///
/// Weights are `measure/count` for each term's integration domain, so each
/// discretized loss is an unbiased estimate of its continuous functional.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    dim: usize,
    /// Interior points, row-major `n × dim`.
    pub interior: Vec<f64>,
    /// Initial-slice points (`t = 0`), row-major; empty for stationary
    /// problems.
    pub initial: Vec<f64>,
    /// Boundary samples.
    pub boundary: BoundarySamples,
    /// Per-point weight of the residual term.
    pub ge_weight: f64,
    /// Per-point weight of the initial term.
    pub ic_weight: f64,
    /// Per-point weight of the boundary term.
    pub bc_weight: f64,
}

impl SampleBatch {
    /// Builds a batch; `dim` is the full input dimension.
    pub fn new(
        dim: usize,
        interior: Vec<f64>,
        initial: Vec<f64>,
        boundary: BoundarySamples,
        ge_weight: f64,
        ic_weight: f64,
        bc_weight: f64,
    ) -> SampleBatch {
        SampleBatch {
            dim,
            interior,
            initial,
            boundary,
            ge_weight,
            ic_weight,
            bc_weight,
        }
    }

    /// Full input dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of interior points.
    pub fn n_interior(&self) -> usize {
        self.interior.len() / self.dim
    }

    /// Number of initial-slice points.
    pub fn n_initial(&self) -> usize {
        self.initial.len() / self.dim
    }

    /// Number of boundary points (pairs count once).
    pub fn n_boundary(&self) -> usize {
        match &self.boundary {
            BoundarySamples::Dirichlet(pts) => pts.len() / self.dim,
            BoundarySamples::PeriodicPairs { left, .. } => left.len() / self.dim,
        }
    }
}

/// The scalar field a loss is evaluated on: the tape-differentiable network,
/// or a closed-form smooth field (entering the tape as constants).
#[derive(Clone, Copy)]
pub enum Field<'a> {
    Network(&'a Arc<MlpParams>),
    Smooth(&'a dyn SmoothField),
}

impl<'a> Field<'a> {
    fn record(
        &self,
        tape: &mut Tape,
        points: &[f64],
        request: &DerivRequest,
    ) -> Result<EntryBlock> {
        match self {
            Field::Network(params) => tape.record_network_jets(params, points, request),
            Field::Smooth(field) => tape.record_smooth_jets(*field, points, request),
        }
    }
}

/// Which first-derivative terms a GE loss adds beyond the residual itself.
struct GeDerivPlan {
    time: bool,
    /// Indices into the `residual_space_derivatives` output.
    space_components: Vec<usize>,
}

fn ge_plan(problem: &ProblemDef, orders: &SobolevOrders) -> Result<GeDerivPlan> {
    if orders.k() > 1 || orders.l() > 1 || orders.m() > 1 {
        return Err(Error::UnsupportedOrder {
            order: orders.k().max(orders.l()).max(orders.m()),
            max: 1,
        });
    }
    let mut space_components = Vec::new();
    match problem.kind() {
        ProblemKind::FokkerPlanck { .. } => {
            if orders.l() >= 1 {
                space_components.push(0);
            }
            if orders.m() >= 1 {
                space_components.push(1);
            }
        }
        ProblemKind::Poisson { d, .. } => {
            if orders.l() >= 1 {
                space_components.extend(0..*d);
            }
        }
        _ => {
            if orders.l() >= 1 || orders.m() >= 1 {
                return Err(Error::Unsupported {
                    problem: problem.name().to_string(),
                    what: "spatial residual derivatives in the GE term".into(),
                });
            }
        }
    }
    Ok(GeDerivPlan {
        time: orders.k() >= 1,
        space_components,
    })
}

/// Residual (governing-equation) loss: the Monte-Carlo `W^{k,2}`-in-time,
/// `W^{l,2}`-in-space norm of `P u − f` over the interior samples.
///
/// For `k = 1` the time term is the per-sample squared time derivative of the
/// residual, entering the same weighted sum.
pub fn loss_ge(
    tape: &mut Tape,
    field: &Field,
    problem: &ProblemDef,
    batch: &SampleBatch,
    orders: &SobolevOrders,
) -> Result<Var> {
    let plan = ge_plan(problem, orders)?;
    let dim = problem.input_dim();
    let request = match (plan.time, plan.space_components.is_empty()) {
        (false, true) => problem.residual_request()?,
        (true, true) => problem.residual_dt_request()?,
        (false, false) => problem.residual_space_request()?,
        (true, false) => {
            let dt = problem.residual_dt_request()?;
            let sp = problem.residual_space_request()?;
            DerivRequest::new(
                dim,
                dt.indices().iter().chain(sp.indices()).cloned(),
            )?
        }
    };
    let n = batch.interior.len() / dim;
    let block = field.record(tape, &batch.interior, &request)?;
    let mut point_terms = Vec::with_capacity(n);
    // The residual formulas query jet entries in a fixed order per problem;
    // resolve the entry positions once on the first point, then replay the
    // sequence for the rest of the batch instead of searching the request.
    let mut entry_seq: Vec<usize> = Vec::new();
    for p in 0..n {
        let point = &batch.interior[p * dim..(p + 1) * dim];
        let mut replay_at = 0usize;
        let recording = p == 0;
        let mut get = |idx: &MultiIndex| -> Result<Var> {
            let e = if recording {
                let e = request.position(idx).ok_or_else(|| Error::MissingJetEntry {
                    index: idx.to_string(),
                })?;
                entry_seq.push(e);
                e
            } else {
                let e = entry_seq[replay_at];
                replay_at += 1;
                e
            };
            Ok(block.var(p, e))
        };
        let r = problem.residual_alg(tape, &mut get, point)?;
        let mut acc = tape.square(r);
        if plan.time {
            let rt = problem.residual_dt_alg(tape, &mut get, point)?;
            let sq = tape.square(rt);
            acc = tape.add(acc, sq);
        }
        if !plan.space_components.is_empty() {
            let derivs = problem.residual_space_alg(tape, &mut get, point)?;
            for &c in &plan.space_components {
                let sq = tape.square(derivs[c]);
                acc = tape.add(acc, sq);
            }
        }
        point_terms.push(acc);
    }
    let total = tape.sum(&point_terms);
    Ok(tape.scale(total, batch.ge_weight))
}

/// Spatial multi-index lists for initial-condition matching, in canonical
/// (prefix-compatible) order.
fn ic_indices(problem: &ProblemDef, orders: &SobolevOrders) -> Result<Vec<MultiIndex>> {
    let dim = problem.input_dim();
    match problem.kind() {
        ProblemKind::Heat { .. } | ProblemKind::Burgers { .. } => {
            // α ∈ {∅, x, xx}[..=l], as full (t,x) indices with zero t order.
            Ok((0..=orders.l())
                .map(|o| MultiIndex::new(&[0, o]).expect("order ≤ 2"))
                .collect())
        }
        ProblemKind::FokkerPlanck { .. } => {
            let mut v = vec![MultiIndex::zero(dim)];
            if orders.m() >= 1 {
                v.push(MultiIndex::first(dim, 2));
            }
            if orders.l() >= 1 {
                v.push(MultiIndex::first(dim, 1));
            }
            // canonical order: value, then ∂x before ∂v? Multi-index sort puts
            // (0,0,1) before (0,1,0); keep that order for prefix stability.
            v.sort();
            Ok(v)
        }
        _ => Err(Error::Unsupported {
            problem: problem.name().to_string(),
            what: "initial-condition loss".into(),
        }),
    }
}

/// Initial-condition loss: weighted squared mismatch of `D^α u(0,·)` against
/// the initial data's derivatives, `|α| ≤ l` (and `≤ m` in velocity).
pub fn loss_ic(
    tape: &mut Tape,
    field: &Field,
    problem: &ProblemDef,
    batch: &SampleBatch,
    orders: &SobolevOrders,
) -> Result<Var> {
    let dim = problem.input_dim();
    let indices = ic_indices(problem, orders)?;
    let request = DerivRequest::new(dim, indices.iter().cloned())?;
    let n = batch.initial.len() / dim;
    let block = field.record(tape, &batch.initial, &request)?;
    let positions: Vec<usize> = indices
        .iter()
        .map(|idx| request.position(idx).expect("requested"))
        .collect();
    let mut point_terms = Vec::with_capacity(n);
    for p in 0..n {
        let point = &batch.initial[p * dim..(p + 1) * dim];
        let spatial = &point[1..];
        let mut acc: Option<Var> = None;
        for (idx, &e) in indices.iter().zip(&positions) {
            let u = block.var(p, e);
            let spatial_idx = MultiIndex::new(
                &(1..dim).map(|i| idx.component(i)).collect::<Vec<_>>(),
            )
            .expect("order ≤ 2");
            let g = problem.initial_data(spatial, &spatial_idx)?;
            let gv = tape.constant(g);
            let diff = tape.sub(u, gv);
            let sq = tape.square(diff);
            acc = Some(match acc {
                None => sq,
                Some(a) => tape.add(a, sq),
            });
        }
        point_terms.push(acc.expect("at least the value index"));
    }
    let total = tape.sum(&point_terms);
    Ok(tape.scale(total, batch.ic_weight))
}

/// Boundary loss. Dirichlet: weighted squared mismatch of `u` (and for
/// spatial order ≥ 1 all first partials) against the boundary data. Periodic:
/// weighted squared mismatch of `∂^α u` between the two edges for `|α| ≤ 1`,
/// regardless of the variant's orders.
pub fn loss_bc(
    tape: &mut Tape,
    field: &Field,
    problem: &ProblemDef,
    batch: &SampleBatch,
    orders: &SobolevOrders,
) -> Result<Var> {
    let dim = problem.input_dim();
    match (&batch.boundary, problem.boundary_kind()) {
        (BoundarySamples::Dirichlet(points), BoundaryKind::Dirichlet) => {
            let mut indices = vec![MultiIndex::zero(dim)];
            if orders.l() >= 1 {
                match problem.kind() {
                    ProblemKind::Poisson { d, .. } => {
                        indices.extend((0..*d).map(|i| MultiIndex::first(dim, i)));
                    }
                    _ => {
                        return Err(Error::Unsupported {
                            problem: problem.name().to_string(),
                            what: "derivative boundary matching".into(),
                        })
                    }
                }
            }
            let request = DerivRequest::new(dim, indices.iter().cloned())?;
            let n = points.len() / dim;
            let block = field.record(tape, points, &request)?;
            let positions: Vec<usize> = indices
                .iter()
                .map(|idx| request.position(idx).expect("requested"))
                .collect();
            let mut point_terms = Vec::with_capacity(n);
            for p in 0..n {
                let point = &points[p * dim..(p + 1) * dim];
                let mut acc: Option<Var> = None;
                for (idx, &e) in indices.iter().zip(&positions) {
                    let u = block.var(p, e);
                    let h = problem.dirichlet_data(point, idx)?;
                    let hv = tape.constant(h);
                    let diff = tape.sub(u, hv);
                    let sq = tape.square(diff);
                    acc = Some(match acc {
                        None => sq,
                        Some(a) => tape.add(a, sq),
                    });
                }
                point_terms.push(acc.expect("value index"));
            }
            let total = tape.sum(&point_terms);
            Ok(tape.scale(total, batch.bc_weight))
        }
        (BoundarySamples::PeriodicPairs { left, right }, BoundaryKind::Periodic) => {
            let indices: Vec<MultiIndex> = (0..=0)
                .map(|_| MultiIndex::zero(dim))
                .chain((0..dim).map(|i| MultiIndex::first(dim, i)))
                .collect();
            let request = DerivRequest::new(dim, indices.iter().cloned())?;
            let n = left.len() / dim;
            let lblock = field.record(tape, left, &request)?;
            let rblock = field.record(tape, right, &request)?;
            let positions: Vec<usize> = (0..request.len()).collect();
            let mut point_terms = Vec::with_capacity(n);
            for p in 0..n {
                let mut acc: Option<Var> = None;
                for &e in &positions {
                    let ul = lblock.var(p, e);
                    let ur = rblock.var(p, e);
                    let diff = tape.sub(ur, ul);
                    let sq = tape.square(diff);
                    acc = Some(match acc {
                        None => sq,
                        Some(a) => tape.add(a, sq),
                    });
                }
                point_terms.push(acc.expect("value index"));
            }
            let total = tape.sum(&point_terms);
            Ok(tape.scale(total, batch.bc_weight))
        }
        _ => Err(Error::InvalidConfig(
            "boundary sample kind does not match the problem's boundary".into(),
        )),
    }
}

/// Toy regression loss: plain (unweighted) sum over the point set of squared
/// deviations of value and derivatives up to `order`.
pub fn toy_loss(
    tape: &mut Tape,
    field: &Field,
    target: &ToyTarget,
    points: &[f64],
    order: usize,
) -> Result<Var> {
    if order > 2 {
        return Err(Error::UnsupportedOrder { order, max: 2 });
    }
    let request = DerivRequest::new(1, (0..=order).map(|o| MultiIndex::new(&[o]).unwrap()))?;
    let n = points.len();
    let block = field.record(tape, points, &request)?;
    let positions: Vec<usize> = (0..=order)
        .map(|o| {
            request
                .position(&MultiIndex::new(&[o]).unwrap())
                .expect("requested")
        })
        .collect();
    let mut point_terms = Vec::with_capacity(n);
    for (p, &x) in points.iter().enumerate() {
        let mut acc: Option<Var> = None;
        for o in 0..=order {
            let e = positions[o];
            let u = block.var(p, e);
            let y = target.deriv(x, o)?;
            let yv = tape.constant(y);
            let diff = tape.sub(u, yv);
            let sq = tape.square(diff);
            acc = Some(match acc {
                None => sq,
                Some(a) => tape.add(a, sq),
            });
        }
        point_terms.push(acc.expect("order 0 always present"));
    }
    Ok(tape.sum(&point_terms))
}

/// The named total loss: `GE + IC + BC` with the variant's orders (Poisson
/// variants have no IC term; toy variants are plain derivative-matching
/// sums).
pub fn total_loss(
    tape: &mut Tape,
    field: &Field,
    problem: &ProblemDef,
    batch: &SampleBatch,
    variant: LossVariant,
) -> Result<Var> {
    if !variant.compatible_with(problem.kind()) {
        return Err(Error::IncompatibleVariant {
            variant: variant.name().to_string(),
            kind: problem.name().to_string(),
        });
    }
    if let Some(order) = variant.toy_order() {
        let target = problem.toy_target().expect("compatibility checked");
        return toy_loss(tape, field, target, &batch.interior, order);
    }
    let ge = loss_ge(tape, field, problem, batch, &variant.ge_orders())?;
    let mut total = ge;
    if let Some(ic_orders) = variant.ic_orders() {
        let ic = loss_ic(tape, field, problem, batch, &ic_orders)?;
        total = tape.add(total, ic);
    }
    if let Some(bc_orders) = variant.bc_orders() {
        let bc = loss_bc(tape, field, problem, batch, &bc_orders)?;
        total = tape.add(total, bc);
    }
    Ok(total)
}

/// Convenience: evaluates the total loss on a fresh tape and returns its
/// value.
pub fn total_loss_value(
    field: &Field,
    problem: &ProblemDef,
    batch: &SampleBatch,
    variant: LossVariant,
) -> Result<f64> {
    let mut tape = Tape::new();
    let var = total_loss(&mut tape, field, problem, batch, variant)?;
    Ok(tape.value(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Jet, JetSpec};
    use std::sync::Arc as StdArc;

    /// `u(t,x) = x²` as a smooth field.
    struct XSquared;

    impl SmoothField for XSquared {
        fn dim(&self) -> usize {
            2
        }
        fn jet(&self, point: &[f64], spec: &StdArc<JetSpec>) -> Jet {
            let x = Jet::variable(spec, 1, point[1]);
            x.mul(&x)
        }
    }

    fn single_point_batch() -> SampleBatch {
        SampleBatch::new(
            2,
            vec![0.5, 0.5],
            vec![],
            BoundarySamples::Dirichlet(vec![]),
            1.0,
            1.0,
            1.0,
        )
    }

    #[test]
    fn ge_single_term_sum() {
        // u = x² on the heat problem: residual ≡ −2, single point, unit
        // weight → loss = 4.
        let problem = ProblemDef::by_name("heat").unwrap();
        let batch = single_point_batch();
        let mut tape = Tape::new();
        let orders = SobolevOrders::new((0, 2), (0, 2), None).unwrap();
        let v = loss_ge(&mut tape, &Field::Smooth(&XSquared), &problem, &batch, &orders).unwrap();
        assert_eq!(tape.value(v), 4.0);
    }

    #[test]
    fn ic_closed_form_example() {
        // heat g = sin, field ≡ 0, one point at x = π/2, |Ω| = π, l = 1:
        // π·(|0−1|² + |0−0|²) = π.
        struct ZeroField;
        impl SmoothField for ZeroField {
            fn dim(&self) -> usize {
                2
            }
            fn jet(&self, _point: &[f64], spec: &StdArc<JetSpec>) -> Jet {
                Jet::constant(spec, 0.0)
            }
        }
        let problem = ProblemDef::by_name("heat").unwrap();
        let pi = std::f64::consts::PI;
        let batch = SampleBatch::new(
            2,
            vec![],
            vec![0.0, pi / 2.0],
            BoundarySamples::Dirichlet(vec![]),
            1.0,
            pi,
            1.0,
        );
        let mut tape = Tape::new();
        let orders = SobolevOrders::new((0, 2), (1, 2), None).unwrap();
        let v = loss_ic(&mut tape, &Field::Smooth(&ZeroField), &problem, &batch, &orders).unwrap();
        assert!((tape.value(v) - pi).abs() < 1e-15);
    }

    #[test]
    fn bc_constant_field_example() {
        // Dirichlet h = 0, field ≡ c, 2 boundary points (one per endpoint),
        // weight T·|∂Ω|/2 = 10 → loss = 10·2·c².
        struct ConstField(f64);
        impl SmoothField for ConstField {
            fn dim(&self) -> usize {
                2
            }
            fn jet(&self, _point: &[f64], spec: &StdArc<JetSpec>) -> Jet {
                Jet::constant(spec, self.0)
            }
        }
        let problem = ProblemDef::by_name("heat").unwrap();
        let pi = std::f64::consts::PI;
        let c = 0.7;
        let batch = SampleBatch::new(
            2,
            vec![],
            vec![],
            BoundarySamples::Dirichlet(vec![3.0, 0.0, 3.0, pi]),
            1.0,
            1.0,
            10.0 * 2.0 / 2.0,
        );
        let mut tape = Tape::new();
        let orders = SobolevOrders::new((0, 2), (0, 2), None).unwrap();
        let v = loss_bc(
            &mut tape,
            &Field::Smooth(&ConstField(c)),
            &problem,
            &batch,
            &orders,
        )
        .unwrap();
        assert!((tape.value(v) - 10.0 * 2.0 * c * c).abs() < 1e-12);
    }

    #[test]
    fn periodic_field_has_zero_bc_loss() {
        // any function of sin(2πx) is exactly periodic in x.
        struct Periodic;
        impl SmoothField for Periodic {
            fn dim(&self) -> usize {
                3
            }
            fn jet(&self, point: &[f64], spec: &StdArc<JetSpec>) -> Jet {
                let two_pi = 2.0 * std::f64::consts::PI;
                let x = Jet::variable(spec, 1, point[1]).scale(two_pi).sin();
                let v = Jet::variable(spec, 2, point[2]);
                let t = Jet::variable(spec, 0, point[0]);
                x.mul(&v).add(&t)
            }
        }
        let problem = ProblemDef::by_name("fp-f1").unwrap();
        let left = vec![0.5, 0.0, 1.0, 1.5, 0.0, -2.0];
        let right = vec![0.5, 1.0, 1.0, 1.5, 1.0, -2.0];
        let batch = SampleBatch::new(
            3,
            vec![],
            vec![],
            BoundarySamples::PeriodicPairs { left, right },
            1.0,
            1.0,
            1.0,
        );
        let mut tape = Tape::new();
        let orders = SobolevOrders::new((0, 2), (0, 2), Some((0, 2))).unwrap();
        let v = loss_bc(&mut tape, &Field::Smooth(&Periodic), &problem, &batch, &orders).unwrap();
        assert!(tape.value(v).abs() < 1e-24, "{}", tape.value(v));
    }

    #[test]
    fn toy_loss_examples() {
        struct ZeroField1;
        impl SmoothField for ZeroField1 {
            fn dim(&self) -> usize {
                1
            }
            fn jet(&self, _point: &[f64], spec: &StdArc<JetSpec>) -> Jet {
                Jet::constant(spec, 0.0)
            }
        }
        // y = sin, single point x = 0, order 1 → |0−0|² + |0−1|² = 1.
        let sin_target = ToyTarget {
            family: crate::problems::ToyFamily::Sin,
            k: 1.0,
        };
        let mut tape = Tape::new();
        let v = toy_loss(&mut tape, &Field::Smooth(&ZeroField1), &sin_target, &[0.0], 1).unwrap();
        assert_eq!(tape.value(v), 1.0);
        // y = ReLU(3x), points {−1, 1}, order 0 → 0 + 9 = 9.
        let relu_target = ToyTarget {
            family: crate::problems::ToyFamily::Relu,
            k: 3.0,
        };
        let mut tape = Tape::new();
        let v = toy_loss(
            &mut tape,
            &Field::Smooth(&ZeroField1),
            &relu_target,
            &[-1.0, 1.0],
            0,
        )
        .unwrap();
        assert_eq!(tape.value(v), 9.0);
    }

    #[test]
    fn incompatible_variant_is_rejected() {
        let problem = ProblemDef::by_name("heat").unwrap();
        let batch = single_point_batch();
        let err = total_loss_value(&Field::Smooth(&XSquared), &problem, &batch, LossVariant::Fp1);
        assert!(matches!(err, Err(Error::IncompatibleVariant { .. })));
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in LossVariant::all() {
            assert_eq!(LossVariant::parse(v.name()).unwrap(), v);
        }
        assert!(LossVariant::parse("h3").is_err());
    }
}
