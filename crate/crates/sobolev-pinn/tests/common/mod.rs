//! Shared test oracles, independent of the library's computation paths:
//! Richardson-extrapolated finite differences, a Crank–Nicolson Burgers
//! solver, and naive double-loop re-summations of the discretized losses.

#![allow(dead_code)]

use sobolev_pinn::jet::{DerivRequest, MultiIndex};
use sobolev_pinn::loss::{BoundarySamples, SampleBatch};
use sobolev_pinn::network::MlpParams;

/// Central finite difference of the mixed partial `alpha` of `f` at `x`,
/// recursing one differentiated axis at a time with step `h`.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], alpha: &[usize], h: f64) -> f64 {
    match alpha.iter().position(|&a| a > 0) {
        None => f(x),
        Some(axis) => {
            let mut lower = alpha.to_vec();
            lower[axis] -= 1;
            let mut xp = x.to_vec();
            xp[axis] += h;
            let mut xm = x.to_vec();
            xm[axis] -= h;
            (fd_partial(f, &xp, &lower, h) - fd_partial(f, &xm, &lower, h)) / (2.0 * h)
        }
    }
}

/// Richardson-extrapolated central difference: `(4·D(h/2) − D(h))/3`,
/// cancelling the leading `O(h²)` truncation term.
pub fn richardson_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], alpha: &[usize], h: f64) -> f64 {
    let coarse = fd_partial(f, x, alpha, h);
    let fine = fd_partial(f, x, alpha, h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Step sizes from the validation protocol: `1e-3` for total order ≤ 2,
/// `1e-2` for order 3 (balancing truncation against rounding).
pub fn fd_step(total_order: usize) -> f64 {
    if total_order >= 3 {
        1e-2
    } else {
        1e-3
    }
}

/// Relative-with-absolute-floor comparison: `|a − b| ≤ tol·(1 + |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

// ---------------------------------------------------------------------
// Crank–Nicolson Burgers oracle
// ---------------------------------------------------------------------

/// Burgers solution snapshots from a Strang-split scheme: Crank–Nicolson
/// half-steps for the diffusion, an explicit midpoint step for the
/// advection, on a uniform node grid with zero Dirichlet ends.
pub struct BurgersCnOracle {
    pub xs: Vec<f64>,
    /// Snapshot times (every `snap_every` steps, starting at t=0).
    pub times: Vec<f64>,
    /// `snapshots[k][j]` = u(times[k], xs[j]).
    pub snapshots: Vec<Vec<f64>>,
}

impl BurgersCnOracle {
    pub fn solve(nu: f64, t_end: f64, nx: usize, dt: f64, snap_every: usize) -> BurgersCnOracle {
        let n = nx + 1;
        let dx = 1.0 / nx as f64;
        let xs: Vec<f64> = (0..n).map(|j| j as f64 * dx).collect();
        let mut u: Vec<f64> = xs
            .iter()
            .map(|&x| -(std::f64::consts::PI * x).sin())
            .collect();
        let n_steps = (t_end / dt).round() as usize;
        let mut times = vec![0.0];
        let mut snapshots = vec![u.clone()];

        // CN half-step matrices: (I − r·D₂)u' = (I + r·D₂)u with r = ν·dt/4.
        let r = nu * dt / (4.0 * dx * dx);
        let advect = |u: &[f64], out: &mut [f64]| {
            out[0] = 0.0;
            out[n - 1] = 0.0;
            for j in 1..n - 1 {
                out[j] = -u[j] * (u[j + 1] - u[j - 1]) / (2.0 * dx);
            }
        };
        let mut rhs = vec![0.0; n];
        let mut k1 = vec![0.0; n];
        let mut mid = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        for step in 1..=n_steps {
            cn_half_step(&mut u, r, &mut rhs, &mut scratch);
            // midpoint rule for advection over the full dt
            advect(&u, &mut k1);
            for j in 0..n {
                mid[j] = u[j] + 0.5 * dt * k1[j];
            }
            advect(&mid, &mut k1);
            for j in 1..n - 1 {
                u[j] += dt * k1[j];
            }
            cn_half_step(&mut u, r, &mut rhs, &mut scratch);
            if step % snap_every == 0 {
                times.push(step as f64 * dt);
                snapshots.push(u.clone());
            }
        }
        BurgersCnOracle {
            xs,
            times,
            snapshots,
        }
    }

    /// Bilinear interpolation in `(t, x)`.
    pub fn interpolate(&self, t: f64, x: f64) -> f64 {
        let nt = self.times.len();
        let dt = self.times[1] - self.times[0];
        let ft = (t / dt).clamp(0.0, (nt - 1) as f64);
        let k0 = (ft.floor() as usize).min(nt - 2);
        let wt = ft - k0 as f64;
        let nx = self.xs.len();
        let dx = self.xs[1] - self.xs[0];
        let fx = (x / dx).clamp(0.0, (nx - 1) as f64);
        let j0 = (fx.floor() as usize).min(nx - 2);
        let wx = fx - j0 as f64;
        let g = |k: usize, j: usize| self.snapshots[k][j];
        (1.0 - wt) * ((1.0 - wx) * g(k0, j0) + wx * g(k0, j0 + 1))
            + wt * ((1.0 - wx) * g(k0 + 1, j0) + wx * g(k0 + 1, j0 + 1))
    }
}

/// One Crank–Nicolson diffusion half-step via the Thomas algorithm.
fn cn_half_step(u: &mut [f64], r: f64, rhs: &mut [f64], scratch: &mut [f64]) {
    let n = u.len();
    rhs[0] = 0.0;
    rhs[n - 1] = 0.0;
    for j in 1..n - 1 {
        rhs[j] = u[j] + r * (u[j + 1] - 2.0 * u[j] + u[j - 1]);
    }
    // tridiagonal (−r, 1+2r, −r) on interior nodes, Dirichlet zero ends
    let (a, b, c) = (-r, 1.0 + 2.0 * r, -r);
    let cp = scratch;
    cp[1] = c / b;
    u[0] = 0.0;
    u[n - 1] = 0.0;
    let mut d_prev = rhs[1] / b;
    let mut d_store = vec![0.0; n];
    d_store[1] = d_prev;
    for j in 2..n - 1 {
        let m = b - a * cp[j - 1];
        cp[j] = c / m;
        d_prev = (rhs[j] - a * d_prev) / m;
        d_store[j] = d_prev;
    }
    u[n - 2] = d_store[n - 2];
    for j in (1..n - 2).rev() {
        u[j] = d_store[j] - cp[j] * u[j + 1];
    }
}

// ---------------------------------------------------------------------
// Naive double-loop loss re-summations (independent of the loss module)
// ---------------------------------------------------------------------

/// Which PDE family (with its constants) the naive oracle sums for.
pub enum NaiveProblem {
    Heat,
    Burgers { nu: f64 },
    Fp { beta: f64, q: f64, f2_init: bool },
    Poisson { d: usize, k: f64 },
}

fn idx(orders: &[usize]) -> MultiIndex {
    MultiIndex::new(orders).expect("low order")
}

fn derivs(params: &MlpParams, point: &[f64], orders: &[&[usize]]) -> Vec<f64> {
    let dim = point.len();
    let request = DerivRequest::new(dim, orders.iter().map(|o| idx(o))).unwrap();
    let jet = params.eval_derivs(point, &request).unwrap();
    orders.iter().map(|o| jet.get(&idx(o)).unwrap()).collect()
}

/// Naive heat/Burgers total loss of order 0, 1 or 2: a literal double loop
/// over the Monte-Carlo sums with hand-coded residuals and data.
pub fn naive_hb_loss(
    params: &MlpParams,
    problem: &NaiveProblem,
    batch: &SampleBatch,
    order: usize,
) -> f64 {
    let pi = std::f64::consts::PI;
    let mut ge = 0.0;
    for p in 0..batch.n_interior() {
        let pt = &batch.interior[p * 2..(p + 1) * 2];
        let d = derivs(
            params,
            pt,
            &[
                &[0, 0],
                &[1, 0],
                &[0, 1],
                &[0, 2],
                &[2, 0],
                &[1, 1],
                &[1, 2],
            ],
        );
        let (u, ut, ux, uxx, utt, uxt, uxxt) = (d[0], d[1], d[2], d[3], d[4], d[5], d[6]);
        let (res, res_t) = match problem {
            NaiveProblem::Heat => (ut - uxx, utt - uxxt),
            NaiveProblem::Burgers { nu } => (
                ut + u * ux - nu * uxx,
                utt + ut * ux + u * uxt - nu * uxxt,
            ),
            _ => panic!("heat/burgers oracle"),
        };
        ge += res * res;
        if order >= 2 {
            ge += res_t * res_t;
        }
    }
    ge *= batch.ge_weight;

    let mut ic = 0.0;
    for p in 0..batch.n_initial() {
        let pt = &batch.initial[p * 2..(p + 1) * 2];
        let x = pt[1];
        let d = derivs(params, pt, &[&[0, 0], &[0, 1], &[0, 2]]);
        let (g0, g1, g2) = match problem {
            NaiveProblem::Heat => (x.sin(), x.cos(), -x.sin()),
            NaiveProblem::Burgers { .. } => (
                -(pi * x).sin(),
                -pi * (pi * x).cos(),
                pi * pi * (pi * x).sin(),
            ),
            _ => panic!("heat/burgers oracle"),
        };
        ic += (d[0] - g0) * (d[0] - g0);
        if order >= 1 {
            ic += (d[1] - g1) * (d[1] - g1);
        }
        if order >= 2 {
            ic += (d[2] - g2) * (d[2] - g2);
        }
    }
    ic *= batch.ic_weight;

    let mut bc = 0.0;
    let BoundarySamples::Dirichlet(points) = &batch.boundary else {
        panic!("dirichlet oracle");
    };
    for p in 0..points.len() / 2 {
        let pt = &points[p * 2..(p + 1) * 2];
        let u = params.eval(pt).unwrap();
        bc += u * u;
    }
    bc *= batch.bc_weight;

    ge + ic + bc
}

/// Naive Fokker–Planck total loss of order 0 or 1.
pub fn naive_fp_loss(
    params: &MlpParams,
    problem: &NaiveProblem,
    batch: &SampleBatch,
    order: usize,
) -> f64 {
    let NaiveProblem::Fp { beta, q, f2_init } = problem else {
        panic!("fp oracle")
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let z: f64 = {
        // trapezoid on a fine grid — independent of the library quadrature
        let n = 200_001;
        let h = 10.0 / (n - 1) as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let v: f64 = -5.0 + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * (-v * v).exp();
        }
        acc * h
    };

    let mut ge = 0.0;
    for p in 0..batch.n_interior() {
        let pt = &batch.interior[p * 3..(p + 1) * 3];
        let v = pt[2];
        let d = derivs(
            params,
            pt,
            &[
                &[0, 0, 0],
                &[1, 0, 0],
                &[0, 1, 0],
                &[0, 0, 1],
                &[0, 0, 2],
                &[1, 1, 0],
                &[0, 2, 0],
                &[0, 1, 1],
                &[1, 0, 1],
                &[0, 1, 2],
                &[0, 0, 3],
            ],
        );
        let (u, ut, ux, uv, uvv) = (d[0], d[1], d[2], d[3], d[4]);
        let (utx, uxx, uxv, utv, uxvv, uvvv) = (d[5], d[6], d[7], d[8], d[9], d[10]);
        let res = ut + v * ux - beta * (u + v * uv) - q * uvv;
        ge += res * res;
        if order >= 1 {
            let rx = utx + v * uxx - beta * (ux + v * uxv) - q * uxvv;
            let rv = utv + ux + v * uxv - beta * (2.0 * uv + v * uvv) - q * uvvv;
            ge += rx * rx + rv * rv;
        }
    }
    ge *= batch.ge_weight;

    let mut ic = 0.0;
    for p in 0..batch.n_initial() {
        let pt = &batch.initial[p * 3..(p + 1) * 3];
        let (x, v) = (pt[1], pt[2]);
        let d = derivs(params, pt, &[&[0, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        let gauss = (-v * v).exp() / z;
        let (g0, gx, gv) = if *f2_init {
            (
                (1.0 + (two_pi * x).cos()) * gauss,
                -two_pi * (two_pi * x).sin() * gauss,
                (1.0 + (two_pi * x).cos()) * (-2.0 * v) * gauss,
            )
        } else {
            (gauss, 0.0, -2.0 * v * gauss)
        };
        ic += (d[0] - g0) * (d[0] - g0);
        if order >= 1 {
            ic += (d[2] - gv) * (d[2] - gv) + (d[1] - gx) * (d[1] - gx);
        }
    }
    ic *= batch.ic_weight;

    let mut bc = 0.0;
    let BoundarySamples::PeriodicPairs { left, right } = &batch.boundary else {
        panic!("periodic oracle")
    };
    for p in 0..left.len() / 3 {
        let lp = &left[p * 3..(p + 1) * 3];
        let rp = &right[p * 3..(p + 1) * 3];
        let orders: [&[usize]; 4] = [&[0, 0, 0], &[1, 0, 0], &[0, 1, 0], &[0, 0, 1]];
        let dl = derivs(params, lp, &orders);
        let dr = derivs(params, rp, &orders);
        for (a, b) in dl.iter().zip(&dr) {
            bc += (b - a) * (b - a);
        }
    }
    bc *= batch.bc_weight;

    ge + ic + bc
}

/// Naive Poisson total loss of order 0, 1 or 2.
pub fn naive_po_loss(
    params: &MlpParams,
    problem: &NaiveProblem,
    batch: &SampleBatch,
    order: usize,
) -> f64 {
    let NaiveProblem::Poisson { d, k } = problem else {
        panic!("poisson oracle")
    };
    let a = k * std::f64::consts::PI / 2.0;
    let dim = *d;

    let mut ge = 0.0;
    for p in 0..batch.n_interior() {
        let pt = &batch.interior[p * dim..(p + 1) * dim];
        // residual: −Σ u_jj − f
        let mut lap = 0.0;
        for j in 0..dim {
            let mut o = vec![0usize; dim];
            o[j] = 2;
            lap += derivs(params, pt, &[&o])[0];
        }
        let f: f64 = a * a * pt.iter().map(|&xi| (a * xi).sin()).sum::<f64>();
        let res = -lap - f;
        ge += res * res;
        if order >= 1 {
            for i in 0..dim {
                let mut gi = 0.0;
                for j in 0..dim {
                    let mut o = vec![0usize; dim];
                    o[i] += 1;
                    o[j] += 2;
                    gi += derivs(params, pt, &[&o])[0];
                }
                let df = a * a * a * (a * pt[i]).cos();
                let ri = -gi - df;
                ge += ri * ri;
            }
        }
    }
    ge *= batch.ge_weight;

    let mut bc = 0.0;
    let BoundarySamples::Dirichlet(points) = &batch.boundary else {
        panic!("dirichlet oracle")
    };
    for p in 0..points.len() / dim {
        let pt = &points[p * dim..(p + 1) * dim];
        let u = params.eval(pt).unwrap();
        let h: f64 = pt.iter().map(|&xi| (a * xi).sin()).sum();
        bc += (u - h) * (u - h);
        if order >= 2 {
            for i in 0..dim {
                let mut o = vec![0usize; dim];
                o[i] = 1;
                let ui = derivs(params, pt, &[&o])[0];
                let hi = a * (a * pt[i]).cos();
                bc += (ui - hi) * (ui - hi);
            }
        }
    }
    bc *= batch.bc_weight;

    ge + bc
}

/// Naive toy loss (sin target) of order 0, 1 or 2: plain sums.
pub fn naive_toy_sin_loss(params: &MlpParams, k: f64, points: &[f64], order: usize) -> f64 {
    let mut acc = 0.0;
    for &x in points {
        let d = derivs(params, &[x], &[&[0], &[1], &[2]]);
        let y = [
            (k * x).sin(),
            k * (k * x).cos(),
            -k * k * (k * x).sin(),
        ];
        for o in 0..=order {
            acc += (d[o] - y[o]) * (d[o] - y[o]);
        }
    }
    acc
}
