//! Reverse-mode tape for scalar expressions built from network jet entries.
//!
//! The tape records two kinds of leaves: constants, and *entries* — the
//! requested partial derivatives of a field at sample points. Entries produced
//! by the network carry a cached forward state; during the reverse sweep their
//! adjoints are routed into the network's hand-derived adjoint kernel, which
//! accumulates gradients with respect to every parameter. Entries produced by
//! closed-form fields are plain constants with no parameter dependence.
//!
//! Replaying a tape re-executes the recorded operations from the leaf values
//! and reproduces every node value bitwise.

use std::sync::Arc;



use crate::error::{Error, Result};
use crate::jet::{DerivRequest, JetSpec, SmoothField};
use crate::network::kernel::{self, ForwardCache};
use crate::network::MlpParams;

/// Handle to a scalar node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Const,
    Entry,
    Add,
    Sub,
    Mul,
    Neg,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    a: u32,
    b: u32,
}

enum CallBackend {
    Network {
        spec: Arc<JetSpec>,
        cache: ForwardCache,
        /// Spec slot of each requested entry.
        positions: Vec<usize>,
        /// `α!` per requested entry (derivative ↔ Taylor-coefficient scale).
        factorials: Vec<f64>,
    },
    /// Closed-form field: entries are constants.
    Constant,
}

struct FieldCall {
    backend: CallBackend,
    entry_start: u32,
    n_points: usize,
    n_entries: usize,
}

/// A contiguous block of entry nodes from one field evaluation call.
#[derive(Debug, Clone, Copy)]
pub struct EntryBlock {
    start: u32,
    n_points: usize,
    n_entries: usize,
}

impl EntryBlock {
    /// Number of evaluated points.
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of entries per point (the request length).
    pub fn n_entries(&self) -> usize {
        self.n_entries
    }

    /// The entry var for `point` and requested index `entry` (request order).
    pub fn var(&self, point: usize, entry: usize) -> Var {
        debug_assert!(point < self.n_points && entry < self.n_entries);
        Var(self.start + (point * self.n_entries + entry) as u32)
    }
}

/// Recorded scalar computation with parameter slots.
pub struct Tape {
    nodes: Vec<Node>,
    vals: Vec<f64>,
    params: Option<Arc<MlpParams>>,
    calls: Vec<FieldCall>,
}

impl Tape {
    /// An empty tape without parameters (values only; no gradients).
    pub fn new() -> Tape {
        Tape {
            nodes: Vec::new(),
            vals: Vec::new(),
            params: None,
            calls: Vec::new(),
        }
    }

    /// An empty tape whose network entries differentiate with respect to
    /// `params`.
    pub fn with_params(params: Arc<MlpParams>) -> Tape {
        Tape {
            nodes: Vec::new(),
            vals: Vec::new(),
            params: Some(params),
            calls: Vec::new(),
        }
    }

    /// The registered parameter set, if any.
    pub fn params(&self) -> Option<&Arc<MlpParams>> {
        self.params.as_ref()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when nothing has been recorded.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, a: u32, b: u32, val: f64) -> Var {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { op, a, b });
        self.vals.push(val);
        Var(id)
    }

    /// Records a constant leaf.
    pub fn constant(&mut self, v: f64) -> Var {
        self.push(Op::Const, 0, 0, v)
    }

    /// `a + b`.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0 as usize] + self.vals[b.0 as usize];
        self.push(Op::Add, a.0, b.0, v)
    }

    /// `a − b`.
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0 as usize] - self.vals[b.0 as usize];
        self.push(Op::Sub, a.0, b.0, v)
    }

    /// `a · b`.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0 as usize] * self.vals[b.0 as usize];
        self.push(Op::Mul, a.0, b.0, v)
    }

    /// `−a`.
    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.vals[a.0 as usize];
        self.push(Op::Neg, a.0, 0, v)
    }

    /// `a²`.
    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    /// `a · c` for a constant `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let k = self.constant(c);
        self.mul(a, k)
    }

    /// Left-fold sum of `vars` (deterministic order); zero for an empty list.
    pub fn sum(&mut self, vars: &[Var]) -> Var {
        match vars.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => {
                let mut acc = first;
                for &v in rest {
                    acc = self.add(acc, v);
                }
                acc
            }
        }
    }

    /// Current value of a node.
    pub fn value(&self, v: Var) -> f64 {
        self.vals[v.0 as usize]
    }

    /// Records the requested partials of the network at a batch of points
    /// (`points` is row-major `n × dim`). Returns the entry block; entry
    /// values are derivative values `D^α u`.
    ///
    /// The first network call binds the tape to `params`; later calls must
    /// pass the same parameter set.
    pub fn record_network_jets(
        &mut self,
        params: &Arc<MlpParams>,
        points: &[f64],
        request: &DerivRequest,
    ) -> Result<EntryBlock> {
        match &self.params {
            None => self.params = Some(Arc::clone(params)),
            Some(existing) => {
                if !Arc::ptr_eq(existing, params) {
                    return Err(Error::InvalidConfig(
                        "tape is already bound to a different parameter set".into(),
                    ));
                }
            }
        }
        let params = Arc::clone(params);
        let dim = params.arch().input_dim();
        if request.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: request.dim(),
            });
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len(),
            });
        }
        let n = points.len() / dim;
        let spec = JetSpec::closure(request);
        let positions: Vec<usize> = request
            .indices()
            .iter()
            .map(|idx| spec.position(idx).expect("request index is in its closure"))
            .collect();
        let factorials: Vec<f64> = positions.iter().map(|&p| spec.factorial(p)).collect();

        let (out, cache) = kernel::jet_forward(&params, points, &spec, true);
        let start = self.nodes.len() as u32;
        for p in 0..n {
            for (e, &pos) in positions.iter().enumerate() {
                let val = out[[p, pos]] * factorials[e];
                self.push(Op::Entry, 0, 0, val);
            }
        }
        self.calls.push(FieldCall {
            backend: CallBackend::Network {
                spec,
                cache: cache.expect("cache requested"),
                positions,
                factorials,
            },
            entry_start: start,
            n_points: n,
            n_entries: request.len(),
        });
        Ok(EntryBlock {
            start,
            n_points: n,
            n_entries: request.len(),
        })
    }

    /// Records the requested partials of a closed-form field at a batch of
    /// points. The entries are constants on the tape.
    pub fn record_smooth_jets(
        &mut self,
        field: &dyn SmoothField,
        points: &[f64],
        request: &DerivRequest,
    ) -> Result<EntryBlock> {
        let dim = field.dim();
        if request.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: request.dim(),
            });
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len(),
            });
        }
        let n = points.len() / dim;
        let spec = JetSpec::closure(request);
        let start = self.nodes.len() as u32;
        for p in 0..n {
            let jet = field.jet(&points[p * dim..(p + 1) * dim], &spec);
            let jv = jet.to_jet_value(request)?;
            for &(_, val) in jv.entries() {
                self.push(Op::Entry, 0, 0, val);
            }
        }
        self.calls.push(FieldCall {
            backend: CallBackend::Constant,
            entry_start: start,
            n_points: n,
            n_entries: request.len(),
        });
        Ok(EntryBlock {
            start,
            n_points: n,
            n_entries: request.len(),
        })
    }

    /// Re-executes every recorded operation from the stored leaf values.
    /// Reproduces the forward values bitwise.
    pub fn replay(&mut self) {
        for i in 0..self.nodes.len() {
            let Node { op, a, b } = self.nodes[i];
            let v = match op {
                Op::Const | Op::Entry => continue,
                Op::Add => self.vals[a as usize] + self.vals[b as usize],
                Op::Sub => self.vals[a as usize] - self.vals[b as usize],
                Op::Mul => self.vals[a as usize] * self.vals[b as usize],
                Op::Neg => -self.vals[a as usize],
            };
            self.vals[i] = v;
        }
    }

    /// Gradient of the scalar `loss` with respect to every registered
    /// parameter, in [`MlpParams::flatten`] order.
    ///
    /// The scalar sweep visits each node exactly once; entry adjoints are then
    /// pushed through the network adjoint kernel call by call.
    pub fn param_gradient(&self, loss: Var) -> Result<Vec<f64>> {
        let params = self.params.as_ref().ok_or(Error::NoParams)?;
        if loss.0 as usize >= self.nodes.len() {
            return Err(Error::InvalidHandle {
                handle: loss.0 as usize,
                len: self.nodes.len(),
            });
        }
        let mut adjoint = vec![0.0; self.nodes.len()];
        adjoint[loss.0 as usize] = 1.0;
        for i in (0..self.nodes.len()).rev() {
            let d = adjoint[i];
            if d == 0.0 {
                continue;
            }
            let Node { op, a, b } = self.nodes[i];
            match op {
                Op::Const | Op::Entry => {}
                Op::Add => {
                    adjoint[a as usize] += d;
                    adjoint[b as usize] += d;
                }
                Op::Sub => {
                    adjoint[a as usize] += d;
                    adjoint[b as usize] -= d;
                }
                Op::Mul => {
                    adjoint[a as usize] += d * self.vals[b as usize];
                    adjoint[b as usize] += d * self.vals[a as usize];
                }
                Op::Neg => {
                    adjoint[a as usize] -= d;
                }
            }
        }

        let mut grad = vec![0.0; params.n_params()];
        for call in &self.calls {
            let CallBackend::Network {
                spec,
                cache,
                positions,
                factorials,
            } = &call.backend
            else {
                continue;
            };
            let mut delta = kernel::acquire(call.n_points, spec.len());
            delta.fill(0.0);
            let mut any = false;
            for p in 0..call.n_points {
                for (e, &pos) in positions.iter().enumerate() {
                    let d =
                        adjoint[call.entry_start as usize + p * call.n_entries + e];
                    if d != 0.0 {
                        delta[[p, pos]] = d * factorials[e];
                        any = true;
                    }
                }
            }
            if any {
                kernel::jet_backward(params, spec, cache, &delta, &mut grad);
            }
            kernel::release(delta);
        }
        Ok(grad)
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Architecture, MlpParams};

    fn single_neuron(w: f64, b: f64) -> MlpParams {
        let arch = Architecture::new(1, &[1]).unwrap();
        let mut p = MlpParams::zeros(&arch);
        p.layers_mut()[0].weights[[0, 0]] = w;
        p.layers_mut()[0].bias[0] = b;
        p.layers_mut()[1].weights[[0, 0]] = 1.0;
        p
    }

    #[test]
    fn gradient_of_square_matches_chain_rule() {
        // loss = u(x₀)² for u = tanh(w·x + b), w=1, b=0, x₀=1:
        // ∂loss/∂w = 2·tanh(1)·(1−tanh²(1))·1 ≈ 0.640051.
        let params = Arc::new(single_neuron(1.0, 0.0));
        let mut tape = Tape::new();
        let req = DerivRequest::value_only(1);
        let block = tape.record_network_jets(&params, &[1.0], &req).unwrap();
        let u = block.var(0, 0);
        let loss = tape.square(u);
        let grad = tape.param_gradient(loss).unwrap();
        let t = 1.0f64.tanh();
        let expected = 2.0 * t * (1.0 - t * t);
        assert!((grad[0] - expected).abs() < 1e-12, "{} vs {expected}", grad[0]);
        assert!((expected - 0.6397).abs() < 1e-4);
        // bias gradient: same chain rule without the ·x factor (x=1 so equal)
        assert!((grad[1] - expected).abs() < 1e-12);
        // output layer bias gradient: 2·u·1
        let n = grad.len();
        assert!((grad[n - 1] - 2.0 * t).abs() < 1e-12);
    }

    #[test]
    fn unused_parameters_get_zero_gradient() {
        let params = Arc::new(crate::network::random_test_net(1, 8, 5));
        let mut tape = Tape::with_params(params);
        let c = tape.constant(3.0);
        let loss = tape.mul(c, c);
        let grad = tape.param_gradient(loss).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_is_repeatable_on_same_tape() {
        let params = Arc::new(crate::network::random_test_net(2, 8, 17));
        let mut tape = Tape::new();
        let req = DerivRequest::up_to_order(2, 2).unwrap();
        let block = tape
            .record_network_jets(&params, &[0.3, 0.4, -0.5, 0.2], &req)
            .unwrap();
        let mut terms = Vec::new();
        for p in 0..2 {
            for e in 0..block.n_entries() {
                let v = block.var(p, e);
                terms.push(tape.square(v));
            }
        }
        let loss = tape.sum(&terms);
        let g1 = tape.param_gradient(loss).unwrap();
        let g2 = tape.param_gradient(loss).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn replay_reproduces_values_bitwise() {
        let params = Arc::new(crate::network::random_test_net(1, 6, 2));
        let mut tape = Tape::new();
        let req = DerivRequest::up_to_order(1, 2).unwrap();
        let block = tape.record_network_jets(&params, &[0.7], &req).unwrap();
        let a = block.var(0, 1);
        let b = tape.constant(2.5);
        let c = tape.mul(a, b);
        let d = tape.square(c);
        let _e = tape.neg(d);
        let before = tape.vals.clone();
        tape.replay();
        assert_eq!(before, tape.vals);
    }

    #[test]
    fn foreign_handle_is_rejected() {
        let params = Arc::new(crate::network::random_test_net(1, 4, 0));
        let mut tape = Tape::with_params(params);
        let _ = tape.constant(1.0);
        let bogus = Var(100);
        assert!(matches!(
            tape.param_gradient(bogus),
            Err(Error::InvalidHandle { .. })
        ));
    }

    #[test]
    fn gradient_without_params_is_rejected() {
        let mut tape = Tape::new();
        let c = tape.constant(1.0);
        assert!(matches!(tape.param_gradient(c), Err(Error::NoParams)));
    }
}
