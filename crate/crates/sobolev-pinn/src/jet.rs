//! Truncated multivariate Taylor arithmetic ("jets") for exact mixed partial
//! derivatives up to total order three.
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = D^α u / α!` of a smooth
//! scalar function at a point, restricted to a downward-closed set of
//! multi-indices described by a [`JetSpec`]. Arithmetic on jets (sums,
//! products, smooth elementary functions) propagates every coefficient in the
//! set exactly, up to floating-point rounding. Downward closure is what makes
//! truncated products exact: the coefficient of `γ` in `a·b` only involves
//! indices `α ≤ γ`, all of which are present.
//!
//! The derivative order is capped at [`MAX_ORDER`]: no loss functional in this
//! crate needs more than third derivatives (`u_xxt` for the residual time
//! derivative, `u_vvv` for kinetic problems).

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Maximum supported total derivative order.
pub const MAX_ORDER: usize = 3;

/// Per-coordinate derivative counts, e.g. `(1,2)` for `∂_t ∂_x²`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(SmallVec<[u8; 8]>);

impl MultiIndex {
    /// Builds a multi-index from per-coordinate orders.
    ///
    /// Fails if the total order exceeds [`MAX_ORDER`].
    pub fn new(orders: &[usize]) -> Result<Self> {
        let total: usize = orders.iter().sum();
        if total > MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                order: total,
                max: MAX_ORDER,
            });
        }
        Ok(MultiIndex(orders.iter().map(|&o| o as u8).collect()))
    }

    /// The zero index (plain evaluation) in `dim` coordinates.
    pub fn zero(dim: usize) -> Self {
        MultiIndex(std::iter::repeat(0).take(dim).collect())
    }

    /// First derivative along coordinate `i`.
    pub fn first(dim: usize, i: usize) -> Self {
        Self::pure(dim, i, 1)
    }

    /// Pure derivative of the given order along coordinate `i`.
    pub fn pure(dim: usize, i: usize, order: usize) -> Self {
        assert!(i < dim && order <= MAX_ORDER);
        let mut v: SmallVec<[u8; 8]> = std::iter::repeat(0).take(dim).collect();
        v[i] = order as u8;
        MultiIndex(v)
    }

    /// Number of coordinates.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total derivative order (sum of the entries).
    pub fn order(&self) -> usize {
        self.0.iter().map(|&o| o as usize).sum()
    }

    /// Per-coordinate order.
    pub fn component(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    /// True for the zero index.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&o| o == 0)
    }

    /// `α! = Π αᵢ!` as a float (at most `3! = 6` here).
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&o| match o {
                0 | 1 => 1.0,
                2 => 2.0,
                3 => 6.0,
                _ => unreachable!("order capped at 3"),
            })
            .product()
    }

    /// Componentwise `self ≤ other`.
    pub fn leq(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Componentwise sum, if the total stays within [`MAX_ORDER`].
    pub fn checked_add(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.0.len() != other.0.len() {
            return None;
        }
        let sum: SmallVec<[u8; 8]> = self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect();
        if sum.iter().map(|&o| o as usize).sum::<usize>() > MAX_ORDER {
            None
        } else {
            Some(MultiIndex(sum))
        }
    }

    /// Raises the order along coordinate `i` by one, if allowed.
    pub fn raised(&self, i: usize) -> Option<MultiIndex> {
        if self.order() >= MAX_ORDER {
            return None;
        }
        let mut v = self.0.clone();
        v[i] += 1;
        Some(MultiIndex(v))
    }

    /// All indices `β ≤ self` (componentwise), including zero and `self`.
    fn down_set(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(std::iter::repeat(0).take(self.dim()).collect())];
        for i in 0..self.dim() {
            let k = self.0[i];
            if k == 0 {
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * (k as usize + 1));
            for base in &out {
                for o in 0..=k {
                    let mut v = base.0.clone();
                    v[i] = o;
                    next.push(MultiIndex(v));
                }
            }
            out = next;
        }
        out
    }

    /// Sort key: total order first, then lexicographic.
    fn sort_key(&self) -> (usize, SmallVec<[u8; 8]>) {
        (self.order(), self.0.clone())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, o) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o}")?;
        }
        write!(f, ")")
    }
}

/// An ordered, duplicate-free set of multi-indices to evaluate, always
/// containing the zero index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivRequest {
    dim: usize,
    indices: Vec<MultiIndex>,
}

impl DerivRequest {
    /// Builds a request from the given indices, inserting the zero index when
    /// absent, deduplicating, and sorting canonically (total order, then
    /// lexicographic).
    pub fn new(dim: usize, indices: impl IntoIterator<Item = MultiIndex>) -> Result<Self> {
        let mut set: Vec<MultiIndex> = vec![MultiIndex::zero(dim)];
        for idx in indices {
            if idx.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: idx.dim(),
                });
            }
            if idx.order() > MAX_ORDER {
                return Err(Error::UnsupportedOrder {
                    order: idx.order(),
                    max: MAX_ORDER,
                });
            }
            set.push(idx);
        }
        set.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        set.dedup();
        Ok(DerivRequest { dim, indices: set })
    }

    /// The request containing only the zero index (plain evaluation).
    pub fn value_only(dim: usize) -> Self {
        DerivRequest {
            dim,
            indices: vec![MultiIndex::zero(dim)],
        }
    }

    /// Every multi-index of total order at most `max_order`.
    pub fn up_to_order(dim: usize, max_order: usize) -> Result<Self> {
        if max_order > MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                order: max_order,
                max: MAX_ORDER,
            });
        }
        let mut indices = Vec::new();
        let mut stack = vec![(MultiIndex::zero(dim), 0usize)];
        while let Some((idx, coord)) = stack.pop() {
            if coord == dim {
                indices.push(idx);
                continue;
            }
            let used = idx.order();
            for o in 0..=(max_order - used) {
                let mut v = idx.clone();
                v.0[coord] = o as u8;
                stack.push((v, coord + 1));
            }
        }
        Self::new(dim, indices)
    }

    /// Number of coordinates the indices refer to.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The canonical index list (zero index first).
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Number of requested indices.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// Always false: the zero index is always present.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of `idx` in the canonical ordering.
    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|i| i == idx)
    }
}

/// A downward-closed set of multi-indices with precomputed product tables.
///
/// Shared (via `Arc`) between every jet that uses the same coefficient
/// layout. Building a spec is `O(n²)` in the number of indices and done once
/// per request shape.
#[derive(Debug)]
pub struct JetSpec {
    dim: usize,
    indices: Vec<MultiIndex>,
    pos: HashMap<MultiIndex, u32>,
    /// Flattened multiplication table: for output slot `k`, the ordered pairs
    /// `(i, j)` with `indices[i] + indices[j] == indices[k]`.
    pair_data: Vec<(u32, u32)>,
    pair_offsets: Vec<u32>,
    /// Same table restricted to `i != 0 && j != 0`, for products of jets with
    /// zero constant coefficient.
    pair_nz_data: Vec<(u32, u32)>,
    pair_nz_offsets: Vec<u32>,
    /// The non-zero table flattened as `(k, i, j)` triples — one linear pass
    /// instead of a slice lookup per output slot (the hot path).
    nz_triples: Vec<(u32, u32, u32)>,
    factorials: Vec<f64>,
    max_order: usize,
}

impl JetSpec {
    /// Downward closure of the requested indices.
    pub fn closure(request: &DerivRequest) -> Arc<JetSpec> {
        Self::from_indices(request.dim(), request.indices().iter().cloned())
    }

    /// Builds a spec from arbitrary indices by closing them downward.
    pub fn from_indices(dim: usize, indices: impl IntoIterator<Item = MultiIndex>) -> Arc<JetSpec> {
        let mut all: Vec<MultiIndex> = vec![MultiIndex::zero(dim)];
        for idx in indices {
            all.extend(idx.down_set());
        }
        all.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        all.dedup();

        let pos: HashMap<MultiIndex, u32> = all
            .iter()
            .enumerate()
            .map(|(k, idx)| (idx.clone(), k as u32))
            .collect();
        let n = all.len();
        let max_order = all.iter().map(|i| i.order()).max().unwrap_or(0);

        let mut pair_data = Vec::new();
        let mut pair_offsets = Vec::with_capacity(n + 1);
        let mut pair_nz_data = Vec::new();
        let mut pair_nz_offsets = Vec::with_capacity(n + 1);
        pair_offsets.push(0);
        pair_nz_offsets.push(0);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if let Some(sum) = all[i].checked_add(&all[j]) {
                        if sum == all[k] {
                            pair_data.push((i as u32, j as u32));
                            if i != 0 && j != 0 {
                                pair_nz_data.push((i as u32, j as u32));
                            }
                        }
                    }
                }
            }
            pair_offsets.push(pair_data.len() as u32);
            pair_nz_offsets.push(pair_nz_data.len() as u32);
        }

        let mut nz_triples = Vec::with_capacity(pair_nz_data.len());
        for k in 0..n {
            for &(i, j) in
                &pair_nz_data[pair_nz_offsets[k] as usize..pair_nz_offsets[k + 1] as usize]
            {
                nz_triples.push((k as u32, i, j));
            }
        }

        let factorials = all.iter().map(|i| i.factorial()).collect();
        Arc::new(JetSpec {
            dim,
            indices: all,
            pos,
            pair_data,
            pair_offsets,
            pair_nz_data,
            pair_nz_offsets,
            nz_triples,
            factorials,
            max_order,
        })
    }

    /// Number of coordinates.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of coefficients a jet on this spec carries.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// True only for a degenerate spec, which cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest total order present.
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// The canonical index list.
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Slot of `idx` within jets on this spec.
    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        self.pos.get(idx).map(|&p| p as usize)
    }

    /// `α!` for slot `k`.
    pub fn factorial(&self, k: usize) -> f64 {
        self.factorials[k]
    }

    fn pairs(&self, k: usize) -> &[(u32, u32)] {
        &self.pair_data[self.pair_offsets[k] as usize..self.pair_offsets[k + 1] as usize]
    }

    /// The non-zero product table as flat `(out, left, right)` triples.
    pub(crate) fn nz_triples(&self) -> &[(u32, u32, u32)] {
        &self.nz_triples
    }

    fn pairs_nz(&self, k: usize) -> &[(u32, u32)] {
        &self.pair_nz_data[self.pair_nz_offsets[k] as usize..self.pair_nz_offsets[k + 1] as usize]
    }

    /// `out = a ⊛ b` (truncated product) over raw coefficient slices.
    pub fn mul_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for k in 0..self.len() {
            let mut acc = 0.0;
            for &(i, j) in self.pairs(k) {
                acc += a[i as usize] * b[j as usize];
            }
            out[k] = acc;
        }
    }

    /// `out = a ⊛ b` assuming `a[0] == 0 && b[0] == 0`; skips zero pairs.
    pub(crate) fn mul_nz_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(k, i, j) in &self.nz_triples {
            out[k as usize] += a[i as usize] * b[j as usize];
        }
    }

    /// Adjoint of [`mul_nz_into`](Self::mul_nz_into): given `δout`, accumulates
    /// `δa[i] += δout[k]·b[j]` and `δb[j] += δout[k]·a[i]` over the non-zero
    /// pair table.
    pub(crate) fn mul_nz_backward(
        &self,
        delta_out: &[f64],
        a: &[f64],
        b: &[f64],
        delta_a: &mut [f64],
        delta_b: &mut [f64],
    ) {
        for &(k, i, j) in &self.nz_triples {
            let d = delta_out[k as usize];
            delta_a[i as usize] += d * b[j as usize];
            delta_b[j as usize] += d * a[i as usize];
        }
    }

    /// Adjoint of the square `out = a ⊛ a` (non-zero table): both factor roles
    /// accumulate into the same adjoint slice.
    pub(crate) fn mul_nz_backward_sym(&self, delta_out: &[f64], a: &[f64], delta_a: &mut [f64]) {
        for &(k, i, j) in &self.nz_triples {
            let d = delta_out[k as usize];
            delta_a[i as usize] += d * a[j as usize];
            delta_a[j as usize] += d * a[i as usize];
        }
    }

    /// Composition `out = f(z)` from the Taylor coefficients of `z` and the
    /// derivatives `f_derivs = [f, f′, f″, f‴]` of `f` at `z[0]`.
    ///
    /// Uses `f(z) = f(z₀) + f′·w + f″/2·w² + f‴/6·w³` with `w = z − z₀`, which
    /// is exact on a downward-closed spec of order ≤ 3.
    pub fn compose_into(
        &self,
        z: &[f64],
        f_derivs: &[f64; 4],
        out: &mut [f64],
        scratch: &mut ComposeScratch,
    ) {
        let n = self.len();
        scratch.resize(n);
        let w = &mut scratch.w;
        w.copy_from_slice(z);
        w[0] = 0.0;
        self.mul_nz_into(w, w, &mut scratch.p2);
        self.mul_nz_into(&scratch.p2, w, &mut scratch.p3);
        let (f0, f1, f2, f3) = (f_derivs[0], f_derivs[1], f_derivs[2], f_derivs[3]);
        out[0] = f0;
        for k in 1..n {
            out[k] = f1 * w[k] + 0.5 * f2 * scratch.p2[k] + (f3 / 6.0) * scratch.p3[k];
        }
    }
}

/// Reusable buffers for [`JetSpec::compose_into`].
#[derive(Debug, Default)]
pub struct ComposeScratch {
    w: Vec<f64>,
    p2: Vec<f64>,
    p3: Vec<f64>,
}

impl ComposeScratch {
    fn resize(&mut self, n: usize) {
        self.w.resize(n, 0.0);
        self.p2.resize(n, 0.0);
        self.p3.resize(n, 0.0);
    }
}

/// A function value together with selected mixed partial derivatives.
///
/// `JetValue` stores actual derivative values `D^α u` (not Taylor
/// coefficients) keyed by multi-index, containing exactly the indices of the
/// request that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct JetValue {
    entries: Vec<(MultiIndex, f64)>,
}

impl JetValue {
    pub(crate) fn from_entries(entries: Vec<(MultiIndex, f64)>) -> Self {
        JetValue { entries }
    }

    /// The plain function value (zero index entry).
    pub fn value(&self) -> f64 {
        self.entries[0].1
    }

    /// The derivative `D^α u`, if `α` was requested.
    pub fn get(&self, idx: &MultiIndex) -> Option<f64> {
        self.entries
            .iter()
            .find(|(i, _)| i == idx)
            .map(|&(_, v)| v)
    }

    /// Like [`get`](Self::get) but returns a descriptive error.
    pub fn require(&self, idx: &MultiIndex) -> Result<f64> {
        self.get(idx).ok_or_else(|| Error::MissingJetEntry {
            index: idx.to_string(),
        })
    }

    /// All `(multi-index, derivative)` entries in canonical order.
    pub fn entries(&self) -> &[(MultiIndex, f64)] {
        &self.entries
    }
}

/// An owned jet: Taylor coefficients on a shared [`JetSpec`].
#[derive(Debug, Clone)]
pub struct Jet {
    spec: Arc<JetSpec>,
    c: Vec<f64>,
}

impl Jet {
    /// The constant `v` (all derivatives zero).
    pub fn constant(spec: &Arc<JetSpec>, v: f64) -> Jet {
        let mut c = vec![0.0; spec.len()];
        c[0] = v;
        Jet {
            spec: Arc::clone(spec),
            c,
        }
    }

    /// The coordinate variable `xᵢ` at value `v`: unit first derivative along
    /// coordinate `i`, when the spec tracks it.
    pub fn variable(spec: &Arc<JetSpec>, i: usize, v: f64) -> Jet {
        assert!(i < spec.dim(), "coordinate out of range");
        let mut c = vec![0.0; spec.len()];
        c[0] = v;
        if let Some(p) = spec.position(&MultiIndex::first(spec.dim(), i)) {
            c[p] = 1.0;
        }
        Jet {
            spec: Arc::clone(spec),
            c,
        }
    }

    /// The spec this jet's coefficients live on.
    pub fn spec(&self) -> &Arc<JetSpec> {
        &self.spec
    }

    /// Raw Taylor coefficients in spec order.
    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// The function value.
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Derivative `D^α = α!·c_α`, if the spec tracks `α`.
    pub fn derivative(&self, idx: &MultiIndex) -> Option<f64> {
        self.spec
            .position(idx)
            .map(|p| self.c[p] * self.spec.factorial(p))
    }

    /// Extracts the requested derivatives as a [`JetValue`].
    pub fn to_jet_value(&self, request: &DerivRequest) -> Result<JetValue> {
        let mut entries = Vec::with_capacity(request.len());
        for idx in request.indices() {
            let v = self.derivative(idx).ok_or_else(|| Error::MissingJetEntry {
                index: idx.to_string(),
            })?;
            entries.push((idx.clone(), v));
        }
        Ok(JetValue::from_entries(entries))
    }

    fn same_spec(&self, other: &Jet) {
        debug_assert!(
            Arc::ptr_eq(&self.spec, &other.spec),
            "jets from different specs"
        );
    }

    /// Sum of two jets.
    pub fn add(&self, other: &Jet) -> Jet {
        self.same_spec(other);
        let c = self.c.iter().zip(&other.c).map(|(a, b)| a + b).collect();
        Jet {
            spec: Arc::clone(&self.spec),
            c,
        }
    }

    /// Difference of two jets.
    pub fn sub(&self, other: &Jet) -> Jet {
        self.same_spec(other);
        let c = self.c.iter().zip(&other.c).map(|(a, b)| a - b).collect();
        Jet {
            spec: Arc::clone(&self.spec),
            c,
        }
    }

    /// Negation.
    pub fn neg(&self) -> Jet {
        Jet {
            spec: Arc::clone(&self.spec),
            c: self.c.iter().map(|a| -a).collect(),
        }
    }

    /// Scales every coefficient.
    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            spec: Arc::clone(&self.spec),
            c: self.c.iter().map(|a| a * s).collect(),
        }
    }

    /// Adds a constant to the value.
    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut c = self.c.clone();
        c[0] += s;
        Jet {
            spec: Arc::clone(&self.spec),
            c,
        }
    }

    /// Truncated product.
    pub fn mul(&self, other: &Jet) -> Jet {
        self.same_spec(other);
        let mut c = vec![0.0; self.spec.len()];
        self.spec.mul_into(&self.c, &other.c, &mut c);
        Jet {
            spec: Arc::clone(&self.spec),
            c,
        }
    }

    /// Composition with a smooth scalar function given its derivatives
    /// `[f, f′, f″, f‴]` evaluated at this jet's value.
    pub fn compose(&self, f_derivs: &[f64; 4]) -> Jet {
        let mut out = vec![0.0; self.spec.len()];
        let mut scratch = ComposeScratch::default();
        self.spec
            .compose_into(&self.c, f_derivs, &mut out, &mut scratch);
        Jet {
            spec: Arc::clone(&self.spec),
            c: out,
        }
    }

    /// `sin` of the jet.
    pub fn sin(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.compose(&[s, c, -s, -c])
    }

    /// `cos` of the jet.
    pub fn cos(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.compose(&[c, -s, -c, s])
    }

    /// `exp` of the jet.
    pub fn exp(&self) -> Jet {
        let e = self.c[0].exp();
        self.compose(&[e, e, e, e])
    }

    /// `tanh` of the jet.
    pub fn tanh(&self) -> Jet {
        self.compose(&tanh_derivs(self.c[0]))
    }

    /// `sqrt` of the jet (value must be positive).
    pub fn sqrt(&self) -> Jet {
        let z = self.c[0];
        let r = z.sqrt();
        self.compose(&[r, 0.5 / r, -0.25 / (r * z), 0.375 / (r * z * z)])
    }

    /// Reciprocal `1/z` (value must be nonzero).
    pub fn recip(&self) -> Jet {
        let z = self.c[0];
        let iz = 1.0 / z;
        self.compose(&[iz, -iz * iz, 2.0 * iz * iz * iz, -6.0 * iz * iz * iz * iz])
    }

    /// Quotient `self / other`.
    pub fn div(&self, other: &Jet) -> Jet {
        self.mul(&other.recip())
    }
}

/// `[tanh, tanh′, tanh″, tanh‴]` at `z`.
pub fn tanh_derivs(z: f64) -> [f64; 4] {
    let t = z.tanh();
    let s = 1.0 - t * t;
    [t, s, -2.0 * t * s, s * (4.0 * t * t - 2.0 * s)]
}

/// `[tanh, …, tanh⁗]` at `z`; the fourth derivative is needed by adjoint
/// passes through jet compositions.
pub fn tanh_derivs5(z: f64) -> [f64; 5] {
    tanh_derivs5_from_value(z.tanh())
}

/// [`tanh_derivs5`] given the already-computed tanh value — the whole chain
/// is algebraic in `t`.
pub fn tanh_derivs5_from_value(t: f64) -> [f64; 5] {
    let s = 1.0 - t * t;
    [
        t,
        s,
        -2.0 * t * s,
        s * (4.0 * t * t - 2.0 * s),
        8.0 * t * s * (2.0 * s - t * t),
    ]
}

/// A scalar field smooth enough to produce exact jets at any point.
///
/// Implemented by closed-form reference solutions; used to evaluate loss
/// functionals on exact solutions and in oracle tests.
pub trait SmoothField: Sync {
    /// Input dimension of the field.
    fn dim(&self) -> usize;

    /// The field's jet at `point` on the given spec.
    fn jet(&self, point: &[f64], spec: &Arc<JetSpec>) -> Jet;
}
