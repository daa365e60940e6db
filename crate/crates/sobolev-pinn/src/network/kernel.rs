//! Batched jet propagation through the network, with a hand-derived adjoint
//! pass for parameter gradients.
//!
//! Activations are stored neuron-major as `(width, ncoef·n)` arrays: row `k`
//! holds all Taylor coefficients of neuron `k`, blocked by coefficient —
//! columns `c·n..(c+1)·n` are coefficient `c` across the batch. Affine layers
//! are then a single large GEMM per direction, and every jet operation
//! (products, tanh composition, adjoints) is a loop over contiguous
//! point-vectors within one neuron's row, whose working set stays cache
//! resident.
//!
//! Large buffers come from a thread-local pool and are never zeroed on
//! reuse: every consumer either overwrites its buffer completely or
//! multiplies into it with `beta = 0`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::jet::JetSpec;
use crate::network::MlpParams;

thread_local! {
    static BUFFER_POOL: RefCell<HashMap<usize, Vec<Vec<f64>>>> = RefCell::new(HashMap::new());
}

pub(crate) fn acquire(rows: usize, cols: usize) -> Array2<f64> {
    let len = rows * cols;
    let vec = BUFFER_POOL.with(|pool| {
        pool.borrow_mut()
            .get_mut(&len)
            .and_then(|stack| stack.pop())
    });
    let vec = vec.unwrap_or_else(|| vec![0.0; len]);
    Array2::from_shape_vec((rows, cols), vec).expect("length matches shape")
}

pub(crate) fn release(arr: Array2<f64>) {
    let len = arr.len();
    if len == 0 {
        return;
    }
    let (vec, _) = arr.into_raw_vec_and_offset();
    BUFFER_POOL.with(|pool| {
        pool.borrow_mut().entry(len).or_default().push(vec);
    });
}

/// Point-chunk size: keeps one neuron's coefficient row (`ncoef·chunk`
/// values) L2-resident during the jet passes.
fn chunk_len(nc: usize) -> usize {
    (32768 / nc).clamp(128, 8192)
}

/// Forward state of one point chunk.
struct ChunkCache {
    /// Input jets, `(dim, ncoef·len)`.
    input: Array2<f64>,
    /// Pre-activation jets per hidden layer, `(width, ncoef·len)`.
    zs: Vec<Array2<f64>>,
    /// Post-tanh jets per hidden layer.
    acts: Vec<Array2<f64>>,
    start: usize,
    len: usize,
}

impl Drop for ChunkCache {
    fn drop(&mut self) {
        let empty = Array2::zeros((0, 0));
        release(std::mem::replace(&mut self.input, empty));
        for z in self.zs.drain(..) {
            release(z);
        }
        for a in self.acts.drain(..) {
            release(a);
        }
    }
}

/// Cached forward state for the adjoint pass.
pub(crate) struct ForwardCache {
    chunks: Vec<ChunkCache>,
    n_points: usize,
}

/// Builds the input jet array for `n` points (row-major `n × dim`).
fn input_jets(points: &[f64], n: usize, dim: usize, spec: &Arc<JetSpec>) -> Array2<f64> {
    let nc = spec.len();
    let mut x = acquire(dim, nc * n);
    x.fill(0.0);
    for j in 0..dim {
        let row = x.row_mut(j).into_slice().expect("contiguous");
        for (p, chunk) in points.chunks_exact(dim).enumerate() {
            row[p] = chunk[j];
        }
        if let Some(pos) = spec.position(&crate::jet::MultiIndex::first(dim, j)) {
            row[pos * n..(pos + 1) * n].fill(1.0);
        }
    }
    x
}

/// `out = W·in` over the whole coefficient-blocked batch, plus bias on the
/// value block.
fn affine_forward(
    w: &Array2<f64>,
    bias: &ndarray::Array1<f64>,
    input: &Array2<f64>,
    n: usize,
    out: &mut Array2<f64>,
) {
    general_mat_mul(1.0, w, input, 0.0, out);
    for (k, row) in out.rows_mut().into_iter().enumerate() {
        let b = bias[k];
        let row = row.into_slice().expect("contiguous");
        for v in &mut row[..n] {
            *v += b;
        }
    }
}

/// Element-wise fused accumulate `acc[p] += a[p]·b[p]`.
#[inline]
fn vec_fma(acc: &mut [f64], a: &[f64], b: &[f64]) {
    for ((acc, &x), &y) in acc.iter_mut().zip(a).zip(b) {
        *acc += x * y;
    }
}

/// tanh of every jet in `z`, written into `out`; both `(width, nc·n)`.
fn tanh_layer(spec: &JetSpec, z: &Array2<f64>, out: &mut Array2<f64>, n: usize) {
    let nc = spec.len();
    let mut p2 = acquire(nc, n);
    let mut p3 = acquire(nc, n);
    let mut c1 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    let mut c3 = vec![0.0; n];
    for (zrow, orow) in z.rows().into_iter().zip(out.rows_mut()) {
        let zrow = zrow.to_slice().expect("contiguous");
        let orow = orow.into_slice().expect("contiguous");
        for p in 0..n {
            let t = zrow[p].tanh();
            let s = 1.0 - t * t;
            orow[p] = t;
            c1[p] = s;
            c2[p] = -t * s;
            c3[p] = s * (4.0 * t * t - 2.0 * s) / 6.0;
        }
        if nc == 1 {
            continue;
        }
        // p2 = w ⊛ w, p3 = p2 ⊛ w over the non-zero tables (slot 0 of w is
        // never read, so the z row stands in for w).
        p2.fill(0.0);
        for &(kk, i, j) in spec.nz_triples() {
            vec_fma(
                p2.row_mut(kk as usize).into_slice().expect("contiguous"),
                &zrow[i as usize * n..(i as usize + 1) * n],
                &zrow[j as usize * n..(j as usize + 1) * n],
            );
        }
        p3.fill(0.0);
        for &(kk, i, j) in spec.nz_triples() {
            let p2i = p2.row(i as usize);
            vec_fma(
                p3.row_mut(kk as usize).into_slice().expect("contiguous"),
                p2i.to_slice().expect("contiguous"),
                &zrow[j as usize * n..(j as usize + 1) * n],
            );
        }
        for c in 1..nc {
            let p2c = p2.row(c);
            let p2c = p2c.to_slice().expect("contiguous");
            let p3c = p3.row(c);
            let p3c = p3c.to_slice().expect("contiguous");
            let zc = &zrow[c * n..(c + 1) * n];
            let oc = &mut orow[c * n..(c + 1) * n];
            for p in 0..n {
                oc[p] = c1[p] * zc[p] + c2[p] * p2c[p] + c3[p] * p3c[p];
            }
        }
    }
    release(p2);
    release(p3);
}

/// Adjoint of [`tanh_layer`]: consumes `delta_a`, the cached `z` and the
/// cached outputs `a` (value blocks carry `tanh(z₀)`), producing `delta_z`.
fn tanh_layer_backward(
    spec: &JetSpec,
    z: &Array2<f64>,
    a: &Array2<f64>,
    delta_a: &Array2<f64>,
    delta_z: &mut Array2<f64>,
    n: usize,
) {
    let nc = spec.len();
    let mut p2 = acquire(nc, n);
    let mut p3 = acquire(nc, n);
    // dw/dp2/dp3 rows 1..nc are assigned (not accumulated) per neuron before
    // any read; row 0 is never touched, so no zeroing is needed.
    let mut dw = acquire(nc, n);
    let mut dp2 = acquire(nc, n);
    let mut dp3 = acquire(nc, n);
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut f3 = vec![0.0; n];
    let mut f4 = vec![0.0; n];
    let mut df1 = vec![0.0; n];
    let mut df2 = vec![0.0; n];
    let mut df3 = vec![0.0; n];
    for ((zrow, arow), (darow, dzrow)) in z
        .rows()
        .into_iter()
        .zip(a.rows())
        .zip(delta_a.rows().into_iter().zip(delta_z.rows_mut()))
    {
        let zrow = zrow.to_slice().expect("contiguous");
        let arow = arow.to_slice().expect("contiguous");
        let darow = darow.to_slice().expect("contiguous");
        let dzrow = dzrow.into_slice().expect("contiguous");
        for p in 0..n {
            let t = arow[p];
            let s = 1.0 - t * t;
            f1[p] = s;
            f2[p] = -2.0 * t * s;
            f3[p] = s * (4.0 * t * t - 2.0 * s);
            f4[p] = 8.0 * t * s * (2.0 * s - t * t);
        }
        if nc == 1 {
            for p in 0..n {
                dzrow[p] = darow[p] * f1[p];
            }
            continue;
        }
        p2.fill(0.0);
        for &(kk, i, j) in spec.nz_triples() {
            vec_fma(
                p2.row_mut(kk as usize).into_slice().expect("contiguous"),
                &zrow[i as usize * n..(i as usize + 1) * n],
                &zrow[j as usize * n..(j as usize + 1) * n],
            );
        }
        p3.fill(0.0);
        for &(kk, i, j) in spec.nz_triples() {
            let p2i = p2.row(i as usize);
            vec_fma(
                p3.row_mut(kk as usize).into_slice().expect("contiguous"),
                p2i.to_slice().expect("contiguous"),
                &zrow[j as usize * n..(j as usize + 1) * n],
            );
        }
        df1.fill(0.0);
        df2.fill(0.0);
        df3.fill(0.0);
        for c in 1..nc {
            let dac = &darow[c * n..(c + 1) * n];
            let zc = &zrow[c * n..(c + 1) * n];
            let p2c = p2.row(c);
            let p2c = p2c.to_slice().expect("contiguous");
            let p3c = p3.row(c);
            let p3c = p3c.to_slice().expect("contiguous");
            let dwc = dw.row_mut(c).into_slice().expect("contiguous");
            let dp2c = dp2.row_mut(c).into_slice().expect("contiguous");
            let dp3c = dp3.row_mut(c).into_slice().expect("contiguous");
            for p in 0..n {
                let d = dac[p];
                df1[p] += d * zc[p];
                df2[p] += d * p2c[p];
                df3[p] += d * p3c[p];
                dwc[p] = d * f1[p];
                dp2c[p] = d * 0.5 * f2[p];
                dp3c[p] = d * f3[p] / 6.0;
            }
        }
        // p3 = p2 ⊛ w
        for &(kk, i, j) in spec.nz_triples() {
            let dp3k = dp3.row(kk as usize);
            let dp3k = dp3k.to_slice().expect("contiguous");
            vec_fma(
                dp2.row_mut(i as usize).into_slice().expect("contiguous"),
                dp3k,
                &zrow[j as usize * n..(j as usize + 1) * n],
            );
            let p2i = p2.row(i as usize);
            vec_fma(
                dw.row_mut(j as usize).into_slice().expect("contiguous"),
                dp3k,
                p2i.to_slice().expect("contiguous"),
            );
        }
        // p2 = w ⊛ w (both factor roles)
        for &(kk, i, j) in spec.nz_triples() {
            let dp2k = dp2.row(kk as usize);
            let dp2k = dp2k.to_slice().expect("contiguous");
            vec_fma(
                dw.row_mut(i as usize).into_slice().expect("contiguous"),
                dp2k,
                &zrow[j as usize * n..(j as usize + 1) * n],
            );
            vec_fma(
                dw.row_mut(j as usize).into_slice().expect("contiguous"),
                dp2k,
                &zrow[i as usize * n..(i as usize + 1) * n],
            );
        }
        for p in 0..n {
            dzrow[p] =
                darow[p] * f1[p] + df1[p] * f2[p] + 0.5 * df2[p] * f3[p] + df3[p] * f4[p] / 6.0;
        }
        for c in 1..nc {
            let dwc = dw.row(c);
            let dwc = dwc.to_slice().expect("contiguous");
            dzrow[c * n..(c + 1) * n].copy_from_slice(dwc);
        }
    }
    release(p2);
    release(p3);
    release(dw);
    release(dp2);
    release(dp3);
}

/// Forward over one chunk of points.
fn forward_chunk(
    params: &MlpParams,
    points: &[f64],
    start: usize,
    len: usize,
    spec: &Arc<JetSpec>,
) -> ChunkCache {
    let dim = params.arch().input_dim();
    let nc = spec.len();
    let layers = params.layers();
    let n_hidden = layers.len() - 1;
    let x = input_jets(&points[start * dim..(start + len) * dim], len, dim, spec);
    let mut zs = Vec::with_capacity(n_hidden);
    let mut acts = Vec::with_capacity(n_hidden);
    let mut current: &Array2<f64> = &x;
    for layer in layers.iter().take(n_hidden) {
        let width = layer.bias.len();
        let mut z = acquire(width, nc * len);
        affine_forward(&layer.weights, &layer.bias, current, len, &mut z);
        let mut a = acquire(width, nc * len);
        tanh_layer(spec, &z, &mut a, len);
        zs.push(z);
        acts.push(a);
        current = acts.last().expect("just pushed");
    }
    ChunkCache {
        input: x,
        zs,
        acts,
        start,
        len,
    }
}

/// Jet forward pass for a batch of points. Returns the output jets as an
/// `(n, ncoef)` array of Taylor coefficients, plus the cache for
/// [`jet_backward`] when requested.
pub(crate) fn jet_forward(
    params: &MlpParams,
    points: &[f64],
    spec: &Arc<JetSpec>,
    want_cache: bool,
) -> (Array2<f64>, Option<ForwardCache>) {
    let dim = params.arch().input_dim();
    let nc = spec.len();
    debug_assert_eq!(points.len() % dim, 0);
    let n = points.len() / dim;
    let layers = params.layers();
    let n_hidden = layers.len() - 1;
    let out_layer = &layers[n_hidden];
    let chunk = chunk_len(nc);

    let mut out = Array2::zeros((n, nc));
    let mut chunks = Vec::with_capacity(n.div_ceil(chunk));
    let mut start = 0;
    while start < n {
        let len = chunk.min(n - start);
        let cc = forward_chunk(params, points, start, len, spec);
        let last: &Array2<f64> = if n_hidden == 0 {
            &cc.input
        } else {
            &cc.acts[n_hidden - 1]
        };
        let mut out_cm = acquire(1, nc * len);
        affine_forward(&out_layer.weights, &out_layer.bias, last, len, &mut out_cm);
        {
            let row = out_cm.row(0);
            let row = row.to_slice().expect("contiguous");
            for c in 0..nc {
                let src = &row[c * len..(c + 1) * len];
                for p in 0..len {
                    out[[start + p, c]] = src[p];
                }
            }
        }
        release(out_cm);
        if want_cache {
            chunks.push(cc);
        }
        start += len;
    }
    let cache = want_cache.then_some(ForwardCache {
        chunks,
        n_points: n,
    });
    (out, cache)
}

/// Offsets of each layer's weights and bias in the flat gradient layout.
fn grad_offsets(params: &MlpParams) -> Vec<(usize, usize)> {
    let mut offsets = Vec::with_capacity(params.layers().len());
    let mut off = 0;
    for w in params.arch().widths().windows(2) {
        offsets.push((off, off + w[0] * w[1]));
        off += w[0] * w[1] + w[1];
    }
    offsets
}

/// Accumulates `δz·prevᵀ` into the weight gradient and the value-block sums
/// into the bias gradient; optionally propagates `δprev = Wᵀ·δz`.
#[allow(clippy::too_many_arguments)]
fn affine_backward(
    w: &Array2<f64>,
    delta_z: &Array2<f64>,
    prev: &Array2<f64>,
    n: usize,
    grad: &mut [f64],
    w_off: usize,
    b_off: usize,
    delta_prev: Option<&mut Array2<f64>>,
) {
    let (out_w, in_w) = (w.nrows(), w.ncols());
    {
        let mut gw =
            ArrayViewMut2::from_shape((out_w, in_w), &mut grad[w_off..w_off + out_w * in_w])
                .expect("gradient slice shape");
        general_mat_mul(1.0, delta_z, &prev.t(), 1.0, &mut gw);
    }
    for (k, row) in delta_z.rows().into_iter().enumerate() {
        let row = row.to_slice().expect("contiguous");
        grad[b_off + k] += row[..n].iter().sum::<f64>();
    }
    if let Some(dprev) = delta_prev {
        general_mat_mul(1.0, &w.t(), delta_z, 0.0, dprev);
    }
}

/// Adjoint pass: given `delta_out` (adjoints of the output Taylor
/// coefficients, `(n, ncoef)`), accumulates parameter gradients into `grad`
/// (flat layout of [`MlpParams::flatten`]).
pub(crate) fn jet_backward(
    params: &MlpParams,
    spec: &Arc<JetSpec>,
    cache: &ForwardCache,
    delta_out: &Array2<f64>,
    grad: &mut [f64],
) {
    let nc = spec.len();
    debug_assert_eq!(cache.n_points, delta_out.nrows());
    let layers = params.layers();
    let n_hidden = layers.len() - 1;
    let offsets = grad_offsets(params);
    let widths = params.arch().widths();

    for cc in &cache.chunks {
        let (start, len) = (cc.start, cc.len);
        // transpose this chunk's δ_out into the coefficient-blocked layout
        let mut delta = acquire(1, nc * len);
        {
            let row = delta.row_mut(0).into_slice().expect("contiguous");
            for c in 0..nc {
                let dst = &mut row[c * len..(c + 1) * len];
                for p in 0..len {
                    dst[p] = delta_out[[start + p, c]];
                }
            }
        }

        let prev: &Array2<f64> = if n_hidden == 0 {
            &cc.input
        } else {
            &cc.acts[n_hidden - 1]
        };
        let (w_off, b_off) = offsets[n_hidden];
        let mut delta_a = acquire(widths[n_hidden], nc * len);
        affine_backward(
            &layers[n_hidden].weights,
            &delta,
            prev,
            len,
            grad,
            w_off,
            b_off,
            Some(&mut delta_a),
        );
        release(delta);

        for l in (0..n_hidden).rev() {
            let width = widths[l + 1];
            let mut delta_z = acquire(width, nc * len);
            tanh_layer_backward(
                spec,
                &cc.zs[l],
                &cc.acts[l],
                &delta_a,
                &mut delta_z,
                len,
            );
            let prev: &Array2<f64> = if l == 0 {
                &cc.input
            } else {
                &cc.acts[l - 1]
            };
            let (w_off, b_off) = offsets[l];
            if l > 0 {
                let mut next_delta = acquire(widths[l], nc * len);
                affine_backward(
                    &layers[l].weights,
                    &delta_z,
                    prev,
                    len,
                    grad,
                    w_off,
                    b_off,
                    Some(&mut next_delta),
                );
                release(std::mem::replace(&mut delta_a, next_delta));
            } else {
                affine_backward(
                    &layers[l].weights,
                    &delta_z,
                    prev,
                    len,
                    grad,
                    w_off,
                    b_off,
                    None,
                );
            }
            release(delta_z);
        }
        release(delta_a);
    }
}

/// Plain batched evaluation (no jets): `points` is row-major `n × dim`.
pub(crate) fn eval_batch(params: &MlpParams, points: &[f64]) -> Result<Vec<f64>> {
    let dim = params.arch().input_dim();
    if points.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: points.len(),
        });
    }
    let n = points.len() / dim;
    let mut x = acquire(dim, n);
    for j in 0..dim {
        let row = x.row_mut(j).into_slice().expect("contiguous");
        for (p, chunk) in points.chunks_exact(dim).enumerate() {
            row[p] = chunk[j];
        }
    }
    let layers = params.layers();
    let n_hidden = layers.len() - 1;
    let mut act = x;
    for layer in layers.iter().take(n_hidden) {
        let mut z = acquire(layer.bias.len(), n);
        general_mat_mul(1.0, &layer.weights, &act, 0.0, &mut z);
        for (k, mut row) in z.rows_mut().into_iter().enumerate() {
            let b = layer.bias[k];
            row.mapv_inplace(|v| (v + b).tanh());
        }
        release(std::mem::replace(&mut act, z));
    }
    let out_layer = &layers[n_hidden];
    let mut out = acquire(1, n);
    general_mat_mul(1.0, &out_layer.weights, &act, 0.0, &mut out);
    release(act);
    let b = out_layer.bias[0];
    let result = out.row(0).iter().map(|v| v + b).collect();
    release(out);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::DerivRequest;
    use crate::network::{forward_jet, random_test_net, MlpParams};

    #[test]
    fn batched_jets_match_single_point_path() {
        let params = random_test_net(2, 12, 7);
        let req = DerivRequest::up_to_order(2, 3).unwrap();
        let spec = JetSpec::closure(&req);
        let points = [0.3, 0.5, -0.2, 0.9, 1.4, -1.1];
        let (out, _) = jet_forward(&params, &points, &spec, false);
        for p in 0..3 {
            let jv = forward_jet(&params, &points[p * 2..(p + 1) * 2], &req).unwrap();
            for (k, idx) in spec.indices().iter().enumerate() {
                let batched = out[[p, k]] * spec.factorial(k);
                let single = jv.get(idx).unwrap();
                assert!(
                    (batched - single).abs() <= 1e-12 * (1.0 + single.abs()),
                    "point {p}, index {idx}: batched {batched} vs single {single}"
                );
            }
        }
    }

    #[test]
    fn eval_batch_matches_eval() {
        let params = random_test_net(3, 10, 5);
        let points = [0.1, 0.2, 0.3, -0.5, 0.7, 0.0];
        let batch = eval_batch(&params, &points).unwrap();
        for p in 0..2 {
            let single = params.eval(&points[p * 3..(p + 1) * 3]).unwrap();
            assert!((batch[p] - single).abs() <= 1e-13 * (1.0 + single.abs()));
        }
    }

    #[test]
    fn backward_matches_finite_differences_on_jet_entries() {
        // d/dθ of (sum of all output jet coefficients) against central
        // differences — exercises both the affine and tanh adjoints.
        let params = random_test_net(2, 6, 21);
        let req = DerivRequest::up_to_order(2, 3).unwrap();
        let spec = JetSpec::closure(&req);
        let points = [0.4, -0.3, 0.1, 0.8];
        let n = 2;

        let loss = |p: &MlpParams| -> f64 {
            let (out, _) = jet_forward(p, &points, &spec, false);
            out.iter().sum()
        };

        let (_, cache) = jet_forward(&params, &points, &spec, true);
        let mut grad = vec![0.0; params.n_params()];
        let delta = Array2::from_elem((n, spec.len()), 1.0);
        jet_backward(&params, &spec, &cache.unwrap(), &delta, &mut grad);

        let flat = params.flatten();
        let h = 1e-6;
        for i in (0..flat.len()).step_by(7) {
            let mut up = flat.clone();
            up[i] += h;
            let mut dn = flat.clone();
            dn[i] -= h;
            let arch = params.arch().clone();
            let fd = (loss(&MlpParams::from_flat(&arch, &up).unwrap())
                - loss(&MlpParams::from_flat(&arch, &dn).unwrap()))
                / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() <= 5e-6 * (1.0 + fd.abs()),
                "param {i}: adjoint {} vs fd {fd}",
                grad[i]
            );
        }
    }
}
