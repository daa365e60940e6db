//! Ground-truth solution providers for test-error computation: closed forms
//! for the heat and Poisson problems, Cole–Hopf quadrature for Burgers'
//! equation, and a conservative finite-difference solver for the kinetic
//! Fokker–Planck equation.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpec, MultiIndex, SmoothField};
use crate::problems::{ProblemDef, ProblemKind};
use crate::quad;

/// Exact heat solution `u(t,x) = sin(x)·e^{−t}`.
pub fn heat_exact(t: f64, x: f64) -> f64 {
    x.sin() * (-t).exp()
}

/// Exact Poisson solution `u(x) = Σ sin(k_freq·π·xᵢ/2)`.
pub fn poisson_exact(x: &[f64], k_freq: f64) -> f64 {
    let a = k_freq * std::f64::consts::PI / 2.0;
    x.iter().map(|&xi| (a * xi).sin()).sum()
}

/// The heat solution as a jet-capable field on `(t, x)`.
pub struct HeatExactField;

impl SmoothField for HeatExactField {
    fn dim(&self) -> usize {
        2
    }
    fn jet(&self, point: &[f64], spec: &Arc<JetSpec>) -> Jet {
        let t = Jet::variable(spec, 0, point[0]);
        let x = Jet::variable(spec, 1, point[1]);
        x.sin().mul(&t.scale(-1.0).exp())
    }
}

/// The Poisson solution as a jet-capable field on `(x_1, …, x_d)`.
pub struct PoissonExactField {
    pub d: usize,
    pub k_freq: f64,
}

impl SmoothField for PoissonExactField {
    fn dim(&self) -> usize {
        self.d
    }
    fn jet(&self, point: &[f64], spec: &Arc<JetSpec>) -> Jet {
        let a = self.k_freq * std::f64::consts::PI / 2.0;
        let mut acc = Jet::constant(spec, 0.0);
        for i in 0..self.d {
            let xi = Jet::variable(spec, i, point[i]).scale(a);
            acc = acc.add(&xi.sin());
        }
        acc
    }
}

/// Cole–Hopf evaluation of Burgers' equation with initial data `−sin(πx)`:
///
/// `u(t,x) = −∫ sin(π(x−η))·F(x−η)·e^{−η²/(4νt)} dη / ∫ F(x−η)·e^{−η²/(4νt)} dη`
///
/// with `F(y) = exp(−cos(πy)/(2πν))`, evaluated by Gauss–Hermite quadrature
/// after substituting `η = 2√(νt)·s`. At `t = 0` the initial data is returned
/// directly.
pub fn burgers_exact(t: f64, x: f64, nu: f64, n_nodes: usize) -> Result<f64> {
    let pi = std::f64::consts::PI;
    if t == 0.0 {
        return Ok(-(pi * x).sin());
    }
    let rule = quad::gauss_hermite(n_nodes);
    let scale = 2.0 * (nu * t).sqrt();
    let fcoef = -1.0 / (2.0 * pi * nu);
    let (mut num, mut den) = (0.0, 0.0);
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let y = x - scale * s;
        let f = (fcoef * (pi * y).cos()).exp();
        num += w * (pi * y).sin() * f;
        den += w * f;
    }
    let u = -num / den;
    if u.is_finite() {
        Ok(u)
    } else {
        Err(Error::NonFinite {
            context: format!("Cole–Hopf ratio at t={t}, x={x}"),
        })
    }
}

/// The Cole–Hopf Burgers solution as a jet-capable field on `(t, x)`.
///
/// Jets are exact derivatives of the quadrature approximation, valid for
/// `t > 0`; at `t = 0` the jet of the initial data is returned (spatial
/// derivatives only — time entries are not meaningful there).
pub struct BurgersExactField {
    pub nu: f64,
    pub n_nodes: usize,
}

impl Default for BurgersExactField {
    fn default() -> Self {
        BurgersExactField {
            nu: 0.2,
            n_nodes: 128,
        }
    }
}

impl SmoothField for BurgersExactField {
    fn dim(&self) -> usize {
        2
    }
    fn jet(&self, point: &[f64], spec: &Arc<JetSpec>) -> Jet {
        let pi = std::f64::consts::PI;
        let (t0, x0) = (point[0], point[1]);
        if t0 == 0.0 {
            let x = Jet::variable(spec, 1, x0);
            return x.scale(pi).sin().scale(-1.0);
        }
        let rule = quad::gauss_hermite(self.n_nodes);
        let t = Jet::variable(spec, 0, t0);
        let x = Jet::variable(spec, 1, x0);
        let scale = t.scale(self.nu).sqrt().scale(2.0);
        let fcoef = -1.0 / (2.0 * pi * self.nu);
        let mut num = Jet::constant(spec, 0.0);
        let mut den = Jet::constant(spec, 0.0);
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let y = x.sub(&scale.scale(s)).scale(pi);
            let f = y.cos().scale(fcoef).exp();
            num = num.add(&y.sin().mul(&f).scale(w));
            den = den.add(&f.scale(w));
        }
        num.div(&den).scale(-1.0)
    }
}

/// A tensor-grid reference solution with metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGrid {
    pub problem: String,
    /// Snapshot times.
    pub t_axis: Vec<f64>,
    /// Cell-center `x` coordinates.
    pub x_axis: Vec<f64>,
    /// Cell-center `v` coordinates.
    pub v_axis: Vec<f64>,
    /// Values indexed `[t][x][v]`, flattened row-major.
    pub values: Vec<f64>,
    /// Total integration steps taken.
    pub n_steps: usize,
    /// Relative mass drift `|m(T) − m(0)|/m(0)` of the scheme.
    pub mass_drift_rel: f64,
}

impl ReferenceGrid {
    /// The value at snapshot `ti`, cell `(xi, vi)`.
    pub fn value(&self, ti: usize, xi: usize, vi: usize) -> f64 {
        let (nx, nv) = (self.x_axis.len(), self.v_axis.len());
        self.values[(ti * nx + xi) * nv + vi]
    }

    /// One snapshot as a flat `x`-major slice.
    pub fn slice(&self, ti: usize) -> &[f64] {
        let (nx, nv) = (self.x_axis.len(), self.v_axis.len());
        &self.values[ti * nx * nv..(ti + 1) * nx * nv]
    }

    /// Total mass `Σ u·Δx·Δv` at snapshot `ti` (x-domain `[0,1]`).
    pub fn mass(&self, ti: usize) -> f64 {
        let dx = 1.0 / self.x_axis.len() as f64;
        let dv = self.v_axis[1] - self.v_axis[0];
        self.slice(ti).iter().sum::<f64>() * dx * dv
    }

    /// Bilinear interpolation at `(x, v)` on snapshot `ti` (periodic in `x`,
    /// clamped in `v`).
    pub fn interpolate(&self, ti: usize, x: f64, v: f64) -> f64 {
        let nx = self.x_axis.len();
        let nv = self.v_axis.len();
        let dx = 1.0 / nx as f64;
        let dv = self.v_axis[1] - self.v_axis[0];
        // x: cell centers at (i+0.5)dx, periodic
        let fx = x / dx - 0.5;
        let ix = fx.floor();
        let wx = fx - ix;
        let i0 = ((ix as i64).rem_euclid(nx as i64)) as usize;
        let i1 = (i0 + 1) % nx;
        // v: clamped
        let fv = (v - self.v_axis[0]) / dv;
        let iv = fv.floor();
        let wv = (fv - iv).clamp(0.0, 1.0);
        let j0 = (iv.max(0.0) as usize).min(nv - 1);
        let j1 = (j0 + 1).min(nv - 1);
        let g = |i: usize, j: usize| self.value(ti, i, j);
        (1.0 - wx) * ((1.0 - wv) * g(i0, j0) + wv * g(i0, j1))
            + wx * ((1.0 - wv) * g(i1, j0) + wv * g(i1, j1))
    }

    const MAGIC: &'static [u8; 8] = b"SPGRID01";

    /// Writes the grid as a flat little-endian binary file. Re-running the
    /// solver with the same inputs reproduces the file bitwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(Self::MAGIC)?;
        let header = serde_json::json!({
            "problem": self.problem,
            "nt": self.t_axis.len(),
            "nx": self.x_axis.len(),
            "nv": self.v_axis.len(),
            "n_steps": self.n_steps,
            "mass_drift_rel": self.mass_drift_rel,
        })
        .to_string();
        file.write_all(&(header.len() as u64).to_le_bytes())?;
        file.write_all(header.as_bytes())?;
        for series in [&self.t_axis, &self.x_axis, &self.v_axis, &self.values] {
            for v in series.iter() {
                file.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a grid written by [`save`](Self::save).
    pub fn load(path: &Path) -> Result<ReferenceGrid> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::MalformedFile {
                path: path.display().to_string(),
                reason: "bad magic".into(),
            });
        }
        let mut len8 = [0u8; 8];
        file.read_exact(&mut len8)?;
        let hlen = u64::from_le_bytes(len8) as usize;
        let mut hbuf = vec![0u8; hlen];
        file.read_exact(&mut hbuf)?;
        let header: serde_json::Value = serde_json::from_slice(&hbuf)?;
        let get = |k: &str| -> Result<usize> {
            header[k]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::MalformedFile {
                    path: path.display().to_string(),
                    reason: format!("missing {k}"),
                })
        };
        let (nt, nx, nv) = (get("nt")?, get("nx")?, get("nv")?);
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count);
            let mut buf = [0u8; 8];
            for _ in 0..count {
                file.read_exact(&mut buf)?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let t_axis = read_f64s(nt)?;
        let x_axis = read_f64s(nx)?;
        let v_axis = read_f64s(nv)?;
        let values = read_f64s(nt * nx * nv)?;
        Ok(ReferenceGrid {
            problem: header["problem"].as_str().unwrap_or("").to_string(),
            t_axis,
            x_axis,
            v_axis,
            values,
            n_steps: get("n_steps")?,
            mass_drift_rel: header["mass_drift_rel"].as_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Stability-bounded step count for [`fp_solve`] at the given resolution.
pub fn fp_suggested_steps(problem: &ProblemDef, n_x: usize, n_v: usize) -> Result<usize> {
    let ProblemKind::FokkerPlanck {
        t_end,
        v_max,
        beta,
        q_diff,
        ..
    } = problem.kind()
    else {
        return Err(Error::Unsupported {
            problem: problem.name().to_string(),
            what: "finite-difference solve".into(),
        });
    };
    let dx = 1.0 / n_x as f64;
    let dv = 2.0 * v_max / n_v as f64;
    // RK4 stability: imaginary-axis radius ≈ 2.82, real-axis ≈ 2.78; combine
    // the advective and diffusive rates linearly with a 0.7 safety factor.
    let rate = v_max / dx / 2.82 + beta * v_max / dv / 2.82 + 4.0 * q_diff / (dv * dv) / 2.78;
    let dt = 0.7 / rate;
    Ok((t_end / dt).ceil() as usize)
}

/// Solves the truncated kinetic Fokker–Planck equation on `[0,T]×[0,1]×[−V,V]`
/// with a second-order conservative scheme: centered fluxes (`v·u` in `x`,
/// `βvu + q·u_v` in `v`), periodic in `x`, zero flux at `v = ±V`, RK4 in
/// time. Total mass is conserved to rounding.
///
/// `resolution` is `(n_x, n_v, n_t)`; `n_t` below the stability bound is
/// rejected with a suggested count. Snapshots are taken at `n_snapshots`
/// uniform times including both ends.
pub fn fp_solve(
    problem: &ProblemDef,
    resolution: (usize, usize, usize),
    n_snapshots: usize,
) -> Result<ReferenceGrid> {
    let ProblemKind::FokkerPlanck {
        t_end,
        v_max,
        beta,
        q_diff,
        ..
    } = problem.kind()
    else {
        return Err(Error::Unsupported {
            problem: problem.name().to_string(),
            what: "finite-difference solve".into(),
        });
    };
    let (n_x, n_v, n_t) = resolution;
    if n_snapshots < 2 {
        return Err(Error::InvalidConfig("need at least 2 snapshots".into()));
    }
    let suggested = fp_suggested_steps(problem, n_x, n_v)?;
    if n_t < suggested {
        return Err(Error::CflViolation {
            n_t,
            suggested,
        });
    }
    let (t_end, v_max, beta, q_diff) = (*t_end, *v_max, *beta, *q_diff);
    let dx = 1.0 / n_x as f64;
    let dv = 2.0 * v_max / n_v as f64;
    let x_axis: Vec<f64> = (0..n_x).map(|i| (i as f64 + 0.5) * dx).collect();
    let v_axis: Vec<f64> = (0..n_v).map(|j| -v_max + (j as f64 + 0.5) * dv).collect();

    let mut u = vec![0.0; n_x * n_v];
    for i in 0..n_x {
        for j in 0..n_v {
            u[i * n_v + j] = problem.initial_data(&[x_axis[i], v_axis[j]], &MultiIndex::zero(2))?;
        }
    }

    let rhs = |u: &[f64], out: &mut [f64]| {
        for i in 0..n_x {
            let ip = (i + 1) % n_x;
            let im = (i + n_x - 1) % n_x;
            for j in 0..n_v {
                let c = u[i * n_v + j];
                // x-flux: F = v·u, centered, periodic.
                let fxp = v_axis[j] * 0.5 * (u[ip * n_v + j] + c);
                let fxm = v_axis[j] * 0.5 * (c + u[im * n_v + j]);
                // v-flux: G = βvu + q·u_v at faces; zero at the ends.
                let gp = if j + 1 < n_v {
                    let up = u[i * n_v + j + 1];
                    let vf = -v_max + (j as f64 + 1.0) * dv;
                    beta * vf * 0.5 * (up + c) + q_diff * (up - c) / dv
                } else {
                    0.0
                };
                let gm = if j > 0 {
                    let um = u[i * n_v + j - 1];
                    let vf = -v_max + j as f64 * dv;
                    beta * vf * 0.5 * (c + um) + q_diff * (c - um) / dv
                } else {
                    0.0
                };
                out[i * n_v + j] = -(fxp - fxm) / dx + (gp - gm) / dv;
            }
        }
    };

    let n_seg = n_snapshots - 1;
    let steps_per_seg = n_t.div_ceil(n_seg);
    let t_axis: Vec<f64> = (0..n_snapshots)
        .map(|k| t_end * k as f64 / n_seg as f64)
        .collect();

    let mut values = Vec::with_capacity(n_snapshots * n_x * n_v);
    values.extend_from_slice(&u);
    let mass0: f64 = u.iter().sum::<f64>() * dx * dv;

    let mut k1 = vec![0.0; n_x * n_v];
    let mut k2 = vec![0.0; n_x * n_v];
    let mut k3 = vec![0.0; n_x * n_v];
    let mut k4 = vec![0.0; n_x * n_v];
    let mut tmp = vec![0.0; n_x * n_v];
    let mut total_steps = 0usize;
    for seg in 0..n_seg {
        let h = (t_axis[seg + 1] - t_axis[seg]) / steps_per_seg as f64;
        for _ in 0..steps_per_seg {
            rhs(&u, &mut k1);
            for (t, (uu, kk)) in tmp.iter_mut().zip(u.iter().zip(&k1)) {
                *t = uu + 0.5 * h * kk;
            }
            rhs(&tmp, &mut k2);
            for (t, (uu, kk)) in tmp.iter_mut().zip(u.iter().zip(&k2)) {
                *t = uu + 0.5 * h * kk;
            }
            rhs(&tmp, &mut k3);
            for (t, (uu, kk)) in tmp.iter_mut().zip(u.iter().zip(&k3)) {
                *t = uu + h * kk;
            }
            rhs(&tmp, &mut k4);
            for (i, uu) in u.iter_mut().enumerate() {
                *uu += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            total_steps += 1;
        }
        values.extend_from_slice(&u);
    }
    let mass_t: f64 = u.iter().sum::<f64>() * dx * dv;
    let mass_drift_rel = ((mass_t - mass0) / mass0).abs();

    Ok(ReferenceGrid {
        problem: problem.name().to_string(),
        t_axis,
        x_axis,
        v_axis,
        values,
        n_steps: total_steps,
        mass_drift_rel,
    })
}
