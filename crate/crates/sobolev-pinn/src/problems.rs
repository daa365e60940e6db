//! Problem catalog: PDE instances and toy regression targets.
//!
//! Coordinate conventions: heat and Burgers fields take `(t, x)`; the kinetic
//! Fokker–Planck field takes `(t, x, v)`; the Poisson field takes
//! `(x_1, …, x_d)`; toy targets take a single `x`.

use crate::error::{Error, Result};
use crate::jet::{DerivRequest, JetValue, MultiIndex};
use crate::quad;
use crate::tape::{Tape, Var};

/// Minimal scalar algebra so residual formulas are written once and evaluated
/// either on plain floats or as tape nodes.
pub(crate) trait Alg {
    type V: Copy;
    fn konst(&mut self, c: f64) -> Self::V;
    fn add(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn scale(&mut self, a: Self::V, c: f64) -> Self::V;
}

pub(crate) struct F64Alg;

impl Alg for F64Alg {
    type V = f64;
    fn konst(&mut self, c: f64) -> f64 {
        c
    }
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn scale(&mut self, a: f64, c: f64) -> f64 {
        a * c
    }
}

impl Alg for Tape {
    type V = Var;
    fn konst(&mut self, c: f64) -> Var {
        self.constant(c)
    }
    fn add(&mut self, a: Var, b: Var) -> Var {
        Tape::add(self, a, b)
    }
    fn sub(&mut self, a: Var, b: Var) -> Var {
        Tape::sub(self, a, b)
    }
    fn mul(&mut self, a: Var, b: Var) -> Var {
        Tape::mul(self, a, b)
    }
    fn scale(&mut self, a: Var, c: f64) -> Var {
        Tape::scale(self, a, c)
    }
}

/// Which initial distribution a Fokker–Planck instance starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpInit {
    /// `f₁(x,v) = exp(−v²)/∫exp(−v²)dv` — spatially uniform.
    F1,
    /// `f₂(x,v) = (1+cos 2πx)·exp(−v²)/Z` — spatially modulated.
    F2,
}

/// Toy regression target family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyFamily {
    Sin,
    Relu,
}

/// A toy regression target `y(x)` with analytic first and second derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ToyTarget {
    pub family: ToyFamily,
    pub k: f64,
}

impl ToyTarget {
    /// `y(x)`.
    pub fn y(&self, x: f64) -> f64 {
        match self.family {
            ToyFamily::Sin => (self.k * x).sin(),
            ToyFamily::Relu => (self.k * x).max(0.0),
        }
    }

    /// `y′(x)`. The ReLU kink uses the convention `y′(0) = 0`.
    pub fn y1(&self, x: f64) -> f64 {
        match self.family {
            ToyFamily::Sin => self.k * (self.k * x).cos(),
            ToyFamily::Relu => {
                if x > 0.0 {
                    self.k
                } else {
                    0.0
                }
            }
        }
    }

    /// `y″(x)`; identically zero for ReLU (including at the kink).
    pub fn y2(&self, x: f64) -> f64 {
        match self.family {
            ToyFamily::Sin => -self.k * self.k * (self.k * x).sin(),
            ToyFamily::Relu => 0.0,
        }
    }

    /// Derivative of any order 0..=2.
    pub fn deriv(&self, x: f64, order: usize) -> Result<f64> {
        match order {
            0 => Ok(self.y(x)),
            1 => Ok(self.y1(x)),
            2 => Ok(self.y2(x)),
            o => Err(Error::UnsupportedOrder { order: o, max: 2 }),
        }
    }

    /// Training domain: `[0, 2π]` for sine targets, `[−1, 1]` for ReLU.
    pub fn domain(&self) -> (f64, f64) {
        match self.family {
            ToyFamily::Sin => (0.0, 2.0 * std::f64::consts::PI),
            ToyFamily::Relu => (-1.0, 1.0),
        }
    }
}

/// Problem-kind payloads.
#[derive(Debug, Clone)]
pub enum ProblemKind {
    /// `u_t − u_xx = 0` on `(0,T]×[0,π]`, `u(0,x)=sin x`, zero Dirichlet.
    Heat { t_end: f64, x_range: (f64, f64) },
    /// `u_t + u·u_x − ν·u_xx = 0` on `(0,T]×[0,1]`, `u(0,x)=−sin πx`, zero
    /// Dirichlet.
    Burgers {
        t_end: f64,
        x_range: (f64, f64),
        nu: f64,
    },
    /// `u_t + v·u_x − β(vu)_v − q·u_vv = 0` on `(0,T]×[0,1]×[−V,V]`, periodic
    /// in `x`.
    FokkerPlanck {
        t_end: f64,
        x_range: (f64, f64),
        v_max: f64,
        beta: f64,
        q_diff: f64,
        init: FpInit,
    },
    /// `−Δu = (kπ)²/4·Σ sin(kπxᵢ/2)` on `(0,1)^d` with the matching Dirichlet
    /// data.
    Poisson { d: usize, k_freq: f64 },
    /// Toy regression target (no PDE).
    Toy { target: ToyTarget },
}

/// How the boundary penalty is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Match `u` (and optionally its first partials) against given data.
    Dirichlet,
    /// Match `∂^α u` at `x = 1` against `x = 0` for `|α| ≤ 1`.
    Periodic,
}

/// How the exact solution is provided for test-error computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactKind {
    HeatClosedForm,
    BurgersColeHopf,
    PoissonClosedForm,
    /// Needs a finite-difference reference grid.
    FpGrid,
    ToyClosedForm,
}

/// A PDE instance (or toy target): domain, residual operator, initial and
/// boundary data, and the exact-solution hook.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    name: String,
    kind: ProblemKind,
}

impl ProblemDef {
    /// Looks up a problem by catalog name.
    ///
    /// Known names: `heat`, `burgers`, `fp-f1`, `fp-f2`, `poisson-d{D}-k{K}`,
    /// `toy-sin-k{K}`, `toy-relu-k{K}`.
    pub fn by_name(name: &str) -> Result<ProblemDef> {
        let kind = match name {
            "heat" => Some(ProblemKind::Heat {
                t_end: 10.0,
                x_range: (0.0, std::f64::consts::PI),
            }),
            "burgers" => Some(ProblemKind::Burgers {
                t_end: 0.01,
                x_range: (0.0, 1.0),
                nu: 0.2,
            }),
            "fp-f1" | "fp-f2" => Some(ProblemKind::FokkerPlanck {
                t_end: 3.0,
                x_range: (0.0, 1.0),
                v_max: 5.0,
                beta: 0.1,
                q_diff: 0.1,
                init: if name.ends_with("f1") { FpInit::F1 } else { FpInit::F2 },
            }),
            _ => None,
        };
        let kind = match kind {
            Some(k) => k,
            None => Self::parse_parametric(name).ok_or_else(|| Error::UnknownProblem {
                name: name.to_string(),
                known: Self::catalog_summary(),
            })?,
        };
        Ok(ProblemDef {
            name: name.to_string(),
            kind,
        })
    }

    fn parse_parametric(name: &str) -> Option<ProblemKind> {
        if let Some(rest) = name.strip_prefix("poisson-d") {
            let (d, k) = rest.split_once("-k")?;
            return Some(ProblemKind::Poisson {
                d: d.parse().ok()?,
                k_freq: k.parse().ok()?,
            });
        }
        if let Some(rest) = name.strip_prefix("toy-sin-k") {
            return Some(ProblemKind::Toy {
                target: ToyTarget {
                    family: ToyFamily::Sin,
                    k: rest.parse().ok()?,
                },
            });
        }
        if let Some(rest) = name.strip_prefix("toy-relu-k") {
            return Some(ProblemKind::Toy {
                target: ToyTarget {
                    family: ToyFamily::Relu,
                    k: rest.parse().ok()?,
                },
            });
        }
        None
    }

    /// One-line summary of valid catalog names.
    pub fn catalog_summary() -> String {
        "heat, burgers, fp-f1, fp-f2, poisson-d{D}-k{K} (e.g. poisson-d10-k1), \
         toy-sin-k{K}, toy-relu-k{K}"
            .to_string()
    }

    /// Builds a problem directly from a kind (mainly for tests).
    pub fn from_kind(name: &str, kind: ProblemKind) -> ProblemDef {
        ProblemDef {
            name: name.to_string(),
            kind,
        }
    }

    /// Catalog name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Kind payload.
    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    /// Network input dimension: 2 for heat/Burgers `(t,x)`, 3 for
    /// Fokker–Planck `(t,x,v)`, `d` for Poisson, 1 for toy targets.
    pub fn input_dim(&self) -> usize {
        match &self.kind {
            ProblemKind::Heat { .. } | ProblemKind::Burgers { .. } => 2,
            ProblemKind::FokkerPlanck { .. } => 3,
            ProblemKind::Poisson { d, .. } => *d,
            ProblemKind::Toy { .. } => 1,
        }
    }

    /// Final time `T`, when the problem has a time axis.
    pub fn t_end(&self) -> Option<f64> {
        match &self.kind {
            ProblemKind::Heat { t_end, .. }
            | ProblemKind::Burgers { t_end, .. }
            | ProblemKind::FokkerPlanck { t_end, .. } => Some(*t_end),
            _ => None,
        }
    }

    /// Spatial ranges, one per non-time coordinate (for Fokker–Planck this is
    /// `[x_range, (−V, V)]`).
    pub fn spatial_ranges(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            ProblemKind::Heat { x_range, .. } | ProblemKind::Burgers { x_range, .. } => {
                vec![*x_range]
            }
            ProblemKind::FokkerPlanck { x_range, v_max, .. } => {
                vec![*x_range, (-*v_max, *v_max)]
            }
            ProblemKind::Poisson { d, .. } => vec![(0.0, 1.0); *d],
            ProblemKind::Toy { target } => vec![target.domain()],
        }
    }

    /// Product measure of the spatial domain (including velocity for
    /// Fokker–Planck).
    pub fn interior_measure(&self) -> f64 {
        self.spatial_ranges().iter().map(|(a, b)| b - a).product()
    }

    /// Measure of the boundary penalty domain: `2` for one spatial interval,
    /// `2d` for the unit cube surface, `2V` for the periodic `(t,v)` slices.
    pub fn boundary_measure(&self) -> f64 {
        match &self.kind {
            ProblemKind::Heat { .. } | ProblemKind::Burgers { .. } => 2.0,
            ProblemKind::FokkerPlanck { v_max, .. } => 2.0 * v_max,
            ProblemKind::Poisson { d, .. } => 2.0 * *d as f64,
            ProblemKind::Toy { .. } => 0.0,
        }
    }

    /// Boundary penalty kind.
    pub fn boundary_kind(&self) -> BoundaryKind {
        match &self.kind {
            ProblemKind::FokkerPlanck { .. } => BoundaryKind::Periodic,
            _ => BoundaryKind::Dirichlet,
        }
    }

    /// How the exact solution is obtained.
    pub fn exact_kind(&self) -> ExactKind {
        match &self.kind {
            ProblemKind::Heat { .. } => ExactKind::HeatClosedForm,
            ProblemKind::Burgers { .. } => ExactKind::BurgersColeHopf,
            ProblemKind::Poisson { .. } => ExactKind::PoissonClosedForm,
            ProblemKind::FokkerPlanck { .. } => ExactKind::FpGrid,
            ProblemKind::Toy { .. } => ExactKind::ToyClosedForm,
        }
    }

    fn unsupported(&self, what: &str) -> Error {
        Error::Unsupported {
            problem: self.name.clone(),
            what: what.to_string(),
        }
    }

    // ------------------------------------------------------------------
    // Residual operators
    // ------------------------------------------------------------------

    /// Multi-indices of `u` needed by [`residual`](Self::residual).
    pub fn residual_request(&self) -> Result<DerivRequest> {
        let dim = self.input_dim();
        let idx = |v: &[usize]| MultiIndex::new(v).expect("order ≤ 3");
        let indices = match &self.kind {
            ProblemKind::Heat { .. } => vec![idx(&[1, 0]), idx(&[0, 2])],
            ProblemKind::Burgers { .. } => {
                vec![idx(&[1, 0]), idx(&[0, 1]), idx(&[0, 2])]
            }
            ProblemKind::FokkerPlanck { .. } => vec![
                idx(&[1, 0, 0]),
                idx(&[0, 1, 0]),
                idx(&[0, 0, 1]),
                idx(&[0, 0, 2]),
            ],
            ProblemKind::Poisson { d, .. } => {
                (0..*d).map(|j| MultiIndex::pure(*d, j, 2)).collect()
            }
            ProblemKind::Toy { .. } => return Err(self.unsupported("PDE residual")),
        };
        DerivRequest::new(dim, indices)
    }

    /// Additional multi-indices needed by
    /// [`residual_time_derivative`](Self::residual_time_derivative).
    pub fn residual_dt_request(&self) -> Result<DerivRequest> {
        let idx = |v: &[usize]| MultiIndex::new(v).expect("order ≤ 3");
        let base = self.residual_request()?;
        let extra = match &self.kind {
            ProblemKind::Heat { .. } => vec![idx(&[2, 0]), idx(&[1, 2])],
            ProblemKind::Burgers { .. } => {
                vec![idx(&[2, 0]), idx(&[1, 1]), idx(&[1, 2])]
            }
            _ => return Err(self.unsupported("residual time derivative")),
        };
        DerivRequest::new(
            self.input_dim(),
            base.indices().iter().cloned().chain(extra),
        )
    }

    /// Additional multi-indices needed by
    /// [`residual_space_derivatives`](Self::residual_space_derivatives).
    pub fn residual_space_request(&self) -> Result<DerivRequest> {
        let idx = |v: &[usize]| MultiIndex::new(v).expect("order ≤ 3");
        let base = self.residual_request()?;
        let extra = match &self.kind {
            ProblemKind::FokkerPlanck { .. } => vec![
                idx(&[1, 1, 0]),
                idx(&[0, 2, 0]),
                idx(&[0, 1, 1]),
                idx(&[1, 0, 1]),
                idx(&[0, 1, 2]),
                idx(&[0, 0, 3]),
            ],
            ProblemKind::Poisson { d, .. } => {
                let mut v = Vec::new();
                for i in 0..*d {
                    for j in 0..*d {
                        let mut orders = vec![0usize; *d];
                        orders[i] += 1;
                        orders[j] += 2;
                        v.push(idx(&orders));
                    }
                }
                v
            }
            _ => return Err(self.unsupported("residual space derivatives")),
        };
        DerivRequest::new(
            self.input_dim(),
            base.indices().iter().cloned().chain(extra),
        )
    }

    pub(crate) fn residual_alg<A: Alg>(
        &self,
        alg: &mut A,
        get: &mut dyn FnMut(&MultiIndex) -> Result<A::V>,
        point: &[f64],
    ) -> Result<A::V> {
        let idx = |v: &[usize]| MultiIndex::new(v).expect("order ≤ 3");
        match &self.kind {
            ProblemKind::Heat { .. } => {
                let ut = get(&idx(&[1, 0]))?;
                let uxx = get(&idx(&[0, 2]))?;
                Ok(alg.sub(ut, uxx))
            }
            ProblemKind::Burgers { nu, .. } => {
                let ut = get(&idx(&[1, 0]))?;
                let u = get(&idx(&[0, 0]))?;
                let ux = get(&idx(&[0, 1]))?;
                let uxx = get(&idx(&[0, 2]))?;
                let adv = alg.mul(u, ux);
                let s = alg.add(ut, adv);
                let diff = alg.scale(uxx, *nu);
                Ok(alg.sub(s, diff))
            }
            ProblemKind::FokkerPlanck { beta, q_diff, .. } => {
                let v = point[2];
                let ut = get(&idx(&[1, 0, 0]))?;
                let u = get(&idx(&[0, 0, 0]))?;
                let ux = get(&idx(&[0, 1, 0]))?;
                let uv = get(&idx(&[0, 0, 1]))?;
                let uvv = get(&idx(&[0, 0, 2]))?;
                // u_t + v·u_x − β(u + v·u_v) − q·u_vv
                let transport = alg.scale(ux, v);
                let s = alg.add(ut, transport);
                let vuv = alg.scale(uv, v);
                let drift_inner = alg.add(u, vuv);
                let drift = alg.scale(drift_inner, *beta);
                let s = alg.sub(s, drift);
                let diffv = alg.scale(uvv, *q_diff);
                Ok(alg.sub(s, diffv))
            }
            ProblemKind::Poisson { d, k_freq } => {
                // −Σ u_jj − f, f = (kπ)²/4·Σ sin(kπxᵢ/2)
                let mut lap = get(&MultiIndex::pure(*d, 0, 2))?;
                for j in 1..*d {
                    let ujj = get(&MultiIndex::pure(*d, j, 2))?;
                    lap = alg.add(lap, ujj);
                }
                let f = poisson_source(*k_freq, point);
                let fv = alg.konst(f);
                let neg_lap = alg.scale(lap, -1.0);
                Ok(alg.sub(neg_lap, fv))
            }
            ProblemKind::Toy { .. } => Err(self.unsupported("PDE residual")),
        }
    }

    pub(crate) fn residual_dt_alg<A: Alg>(
        &self,
        alg: &mut A,
        get: &mut dyn FnMut(&MultiIndex) -> Result<A::V>,
        _point: &[f64],
    ) -> Result<A::V> {
        let idx = |v: &[usize]| MultiIndex::new(v).expect("order ≤ 3");
        match &self.kind {
            ProblemKind::Heat { .. } => {
                let utt = get(&idx(&[2, 0]))?;
                let uxxt = get(&idx(&[1, 2]))?;
                Ok(alg.sub(utt, uxxt))
            }
            ProblemKind::Burgers { nu, .. } => {
                // ∂_t(u_t + u·u_x − ν·u_xx) = u_tt + u_t·u_x + u·u_xt − ν·u_xxt
                let utt = get(&idx(&[2, 0]))?;
                let ut = get(&idx(&[1, 0]))?;
                let u = get(&idx(&[0, 0]))?;
                let ux = get(&idx(&[0, 1]))?;
                let uxt = get(&idx(&[1, 1]))?;
                let uxxt = get(&idx(&[1, 2]))?;
                let a = alg.mul(ut, ux);
                let b = alg.mul(u, uxt);
                let s = alg.add(utt, a);
                let s = alg.add(s, b);
                let diff = alg.scale(uxxt, *nu);
                Ok(alg.sub(s, diff))
            }
            _ => Err(self.unsupported("residual time derivative")),
        }
    }

    pub(crate) fn residual_space_alg<A: Alg>(
        &self,
        alg: &mut A,
        get: &mut dyn FnMut(&MultiIndex) -> Result<A::V>,
        point: &[f64],
    ) -> Result<Vec<A::V>> {
        let idx = |v: &[usize]| MultiIndex::new(v).expect("order ≤ 3");
        match &self.kind {
            ProblemKind::FokkerPlanck { beta, q_diff, .. } => {
                let v = point[2];
                // ∂_x r = u_tx + v·u_xx − β(u_x + v·u_xv) − q·u_xvv
                let utx = get(&idx(&[1, 1, 0]))?;
                let uxx = get(&idx(&[0, 2, 0]))?;
                let ux = get(&idx(&[0, 1, 0]))?;
                let uxv = get(&idx(&[0, 1, 1]))?;
                let uxvv = get(&idx(&[0, 1, 2]))?;
                let t1 = alg.scale(uxx, v);
                let s = alg.add(utx, t1);
                let vuxv = alg.scale(uxv, v);
                let inner = alg.add(ux, vuxv);
                let drift = alg.scale(inner, *beta);
                let s = alg.sub(s, drift);
                let diff = alg.scale(uxvv, *q_diff);
                let dx = alg.sub(s, diff);
                // ∂_v r = u_tv + u_x + v·u_xv − β(2u_v + v·u_vv) − q·u_vvv
                let utv = get(&idx(&[1, 0, 1]))?;
                let uv = get(&idx(&[0, 0, 1]))?;
                let uvv = get(&idx(&[0, 0, 2]))?;
                let uvvv = get(&idx(&[0, 0, 3]))?;
                let s = alg.add(utv, ux);
                let t2 = alg.scale(uxv, v);
                let s = alg.add(s, t2);
                let two_uv = alg.scale(uv, 2.0);
                let vuvv = alg.scale(uvv, v);
                let inner = alg.add(two_uv, vuvv);
                let drift = alg.scale(inner, *beta);
                let s = alg.sub(s, drift);
                let diff = alg.scale(uvvv, *q_diff);
                let dv = alg.sub(s, diff);
                Ok(vec![dx, dv])
            }
            ProblemKind::Poisson { d, k_freq } => {
                let mut out = Vec::with_capacity(*d);
                for i in 0..*d {
                    let mut lap_i = {
                        let mut orders = vec![0usize; *d];
                        orders[i] += 1;
                        orders[0] += 2;
                        get(&idx(&orders))?
                    };
                    for j in 1..*d {
                        let mut orders = vec![0usize; *d];
                        orders[i] += 1;
                        orders[j] += 2;
                        let uijj = get(&idx(&orders))?;
                        lap_i = alg.add(lap_i, uijj);
                    }
                    let df = poisson_source_grad(*k_freq, point, i);
                    let dfv = alg.konst(df);
                    let neg = alg.scale(lap_i, -1.0);
                    out.push(alg.sub(neg, dfv));
                }
                Ok(out)
            }
            _ => Err(self.unsupported("residual space derivatives")),
        }
    }

    /// PDE residual `P u − f` at one point, from the field's jet there.
    pub fn residual(&self, jet: &JetValue, point: &[f64]) -> Result<f64> {
        self.residual_alg(&mut F64Alg, &mut |idx| jet.require(idx), point)
    }

    /// Time derivative of the residual (heat/Burgers only; needs third-order
    /// entries such as `u_xxt`).
    pub fn residual_time_derivative(&self, jet: &JetValue, point: &[f64]) -> Result<f64> {
        self.residual_dt_alg(&mut F64Alg, &mut |idx| jet.require(idx), point)
    }

    /// Spatial (and velocity) first derivatives of the residual, one per
    /// differentiated coordinate (Fokker–Planck: `[∂x r, ∂v r]`; Poisson:
    /// `[∂₁ r, …, ∂_d r]`).
    pub fn residual_space_derivatives(&self, jet: &JetValue, point: &[f64]) -> Result<Vec<f64>> {
        self.residual_space_alg(&mut F64Alg, &mut |idx| jet.require(idx), point)
    }

    // ------------------------------------------------------------------
    // Initial and boundary data
    // ------------------------------------------------------------------

    /// `D^α g` of the initial data at a spatial point (`x` or `(x,v)`), for
    /// spatial multi-indices of total order ≤ 2.
    pub fn initial_data(&self, spatial: &[f64], order: &MultiIndex) -> Result<f64> {
        if order.order() > 2 {
            return Err(Error::UnsupportedOrder {
                order: order.order(),
                max: 2,
            });
        }
        match &self.kind {
            ProblemKind::Heat { .. } => {
                let x = spatial[0];
                Ok(match order.component(0) {
                    0 => x.sin(),
                    1 => x.cos(),
                    2 => -x.sin(),
                    _ => unreachable!(),
                })
            }
            ProblemKind::Burgers { .. } => {
                let pi = std::f64::consts::PI;
                let x = spatial[0];
                Ok(match order.component(0) {
                    0 => -(pi * x).sin(),
                    1 => -pi * (pi * x).cos(),
                    2 => pi * pi * (pi * x).sin(),
                    _ => unreachable!(),
                })
            }
            ProblemKind::FokkerPlanck { init, .. } => {
                let (x, v) = (spatial[0], spatial[1]);
                let (ox, ov) = (order.component(0), order.component(1));
                let z = fp_gaussian_norm();
                // Gaussian factor e^{−v²} derivatives in v.
                let g = (-v * v).exp();
                let gv = match ov {
                    0 => g,
                    1 => -2.0 * v * g,
                    2 => (4.0 * v * v - 2.0) * g,
                    _ => unreachable!(),
                };
                let two_pi = 2.0 * std::f64::consts::PI;
                let sx = match init {
                    FpInit::F1 => match ox {
                        0 => 1.0,
                        _ => 0.0,
                    },
                    FpInit::F2 => match ox {
                        0 => 1.0 + (two_pi * x).cos(),
                        1 => -two_pi * (two_pi * x).sin(),
                        2 => -two_pi * two_pi * (two_pi * x).cos(),
                        _ => unreachable!(),
                    },
                };
                Ok(sx * gv / z)
            }
            _ => Err(self.unsupported("initial data")),
        }
    }

    /// Dirichlet boundary data `D^α h` at a full-coordinate boundary point.
    /// Heat/Burgers use `h ≡ 0`; Poisson uses the exact trace
    /// `h = Σ sin(kπxᵢ/2)` with its first partials.
    pub fn dirichlet_data(&self, point: &[f64], order: &MultiIndex) -> Result<f64> {
        match &self.kind {
            ProblemKind::Heat { .. } | ProblemKind::Burgers { .. } => Ok(0.0),
            ProblemKind::Poisson { d, k_freq } => {
                let a = k_freq * std::f64::consts::PI / 2.0;
                if order.is_zero() {
                    Ok((0..*d).map(|i| (a * point[i]).sin()).sum())
                } else if order.order() == 1 {
                    let i = (0..*d)
                        .find(|&i| order.component(i) == 1)
                        .expect("order-1 index");
                    Ok(a * (a * point[i]).cos())
                } else {
                    Err(Error::UnsupportedOrder {
                        order: order.order(),
                        max: 1,
                    })
                }
            }
            _ => Err(self.unsupported("Dirichlet data")),
        }
    }

    /// The toy target, when this is a toy problem.
    pub fn toy_target(&self) -> Option<&ToyTarget> {
        match &self.kind {
            ProblemKind::Toy { target } => Some(target),
            _ => None,
        }
    }
}

/// Poisson source `f(x) = (kπ)²/4 · Σ sin(kπxᵢ/2)`.
pub fn poisson_source(k_freq: f64, x: &[f64]) -> f64 {
    let a = k_freq * std::f64::consts::PI / 2.0;
    let amp = a * a;
    amp * x.iter().map(|&xi| (a * xi).sin()).sum::<f64>()
}

/// `∂f/∂xᵢ` of the Poisson source.
pub fn poisson_source_grad(k_freq: f64, x: &[f64], i: usize) -> f64 {
    let a = k_freq * std::f64::consts::PI / 2.0;
    a * a * a * (a * x[i]).cos()
}

/// `∫_{−5}^{5} exp(−v²) dv`, computed once by Gauss–Legendre quadrature.
pub fn fp_gaussian_norm() -> f64 {
    use std::sync::OnceLock;
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| quad::integrate_gl(|v| (-v * v).exp(), -5.0, 5.0, 64))
}
