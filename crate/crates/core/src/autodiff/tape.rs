//! Reverse-mode record over jet-valued nodes.
//!
//! A node's value is a whole truncated Taylor expansion and its adjoint is a
//! cotangent of the same shape, so the chain rule runs as truncated-product
//! transposes. Network evaluations sit on the tape as bridge nodes whose
//! backward is the batched layer-by-layer transpose in `network`.

use super::index::{
    derive_table, mi_factorial, mul_table, n_coeffs, MultiIndex, MAX_COEFFS, MAX_DIM, MAX_ORDER,
};
use super::jetops::{compose, mul_adjoint_acc, Activation};
use crate::network::{BatchRecord, LayerSpec};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("jet order {0} unsupported (max {MAX_ORDER})")]
    OrderUnsupported(usize),
    #[error("input dimension {0} unsupported (max {MAX_DIM})")]
    DimUnsupported(usize),
    #[error("jets belong to different tapes")]
    TapeMismatch,
    #[error("jet orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("seed does not belong to this tape")]
    SeedNotOnTape,
    #[error("cannot differentiate an order-0 jet")]
    DeriveOrderZero,
    #[error("parameter slot {slot} out of range ({n_params} parameters)")]
    ParamSlotOutOfRange { slot: usize, n_params: usize },
    #[error("truncation order {target} exceeds jet order {have}")]
    TruncateAboveOrder { target: usize, have: usize },
}

/// Handle to a jet-valued node. Carries its shape so misuse fails fast.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub(crate) id: u32,
    pub(crate) order: u8,
    pub(crate) tape: u64,
}

impl Jet {
    pub fn order(&self) -> usize {
        self.order as usize
    }
}

/// A scalar on the tape: an order-0 jet plus its cached value.
#[derive(Debug, Clone, Copy)]
pub struct DualScalar {
    pub value: f64,
    pub(crate) jet: Jet,
}

impl From<DualScalar> for Jet {
    fn from(d: DualScalar) -> Jet {
        d.jet
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Op {
    Input,
    Param { slot: u32 },
    Add { a: u32, b: u32 },
    Sub { a: u32, b: u32 },
    Mul { a: u32, b: u32 },
    ScalarMul { a: u32, k: f64 },
    AddConst { a: u32 },
    Compose { a: u32, act: Activation },
    Derive { a: u32, axis: u8 },
    Truncate { a: u32 },
    Sum { start: u32, len: u32 },
    NetOut { bridge: u32, row: u32 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) order: u8,
}

/// One batched network evaluation recorded on the tape.
pub(crate) struct Bridge {
    pub(crate) spec: LayerSpec,
    pub(crate) params: Vec<f64>,
    pub(crate) param_offset: usize,
    pub(crate) record: BatchRecord,
    pub(crate) input_ids: Vec<u32>,
    pub(crate) inputs_need_adjoint: bool,
    pub(crate) n_points: usize,
    pub(crate) nc: usize,
}

static TAPE_COUNTER: AtomicU64 = AtomicU64::new(1);

/// Append-only reverse-mode record. Single-writer; rebuilt per evaluation.
pub struct Tape {
    pub(crate) tape_id: u64,
    pub(crate) dim: usize,
    pub(crate) n_params: usize,
    pub(crate) nodes: Vec<Node>,
    pub(crate) vals: Vec<[f64; MAX_COEFFS]>,
    pub(crate) aux: Vec<u32>,
    pub(crate) bridges: Vec<Bridge>,
}

impl Tape {
    pub fn new(dim: usize, n_params: usize) -> Result<Self, AutodiffError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(AutodiffError::DimUnsupported(dim));
        }
        Ok(Tape {
            tape_id: TAPE_COUNTER.fetch_add(1, Ordering::Relaxed),
            dim,
            n_params,
            nodes: Vec::new(),
            vals: Vec::new(),
            aux: Vec::new(),
            bridges: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn push(&mut self, op: Op, order: usize, coeffs: [f64; MAX_COEFFS]) -> Jet {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { op, order: order as u8 });
        self.vals.push(coeffs);
        Jet { id, order: order as u8, tape: self.tape_id }
    }

    fn check(&self, jet: &Jet) -> Result<(), AutodiffError> {
        if jet.tape != self.tape_id {
            return Err(AutodiffError::TapeMismatch);
        }
        Ok(())
    }

    fn check_pair(&self, a: &Jet, b: &Jet) -> Result<usize, AutodiffError> {
        self.check(a)?;
        self.check(b)?;
        if a.order != b.order {
            return Err(AutodiffError::OrderMismatch(a.order(), b.order()));
        }
        Ok(a.order())
    }

    fn nc(&self, order: usize) -> usize {
        n_coeffs(self.dim, order)
    }

    // ── Leaves ───────────────────────────────────────────────────────

    /// Jet with explicitly given coefficients (a constant wrt parameters).
    pub fn input_jet(&mut self, order: usize, coeffs: &[f64]) -> Result<Jet, AutodiffError> {
        if order > MAX_ORDER {
            return Err(AutodiffError::OrderUnsupported(order));
        }
        let nc = self.nc(order);
        assert_eq!(coeffs.len(), nc, "coefficient count mismatch");
        let mut v = [0.0; MAX_COEFFS];
        v[..nc].copy_from_slice(coeffs);
        Ok(self.push(Op::Input, order, v))
    }

    /// Jet holding a constant value, all derivative coefficients zero.
    pub fn constant_jet(&mut self, order: usize, value: f64) -> Result<Jet, AutodiffError> {
        if order > MAX_ORDER {
            return Err(AutodiffError::OrderUnsupported(order));
        }
        let mut v = [0.0; MAX_COEFFS];
        v[0] = value;
        Ok(self.push(Op::Input, order, v))
    }

    /// Seed jets for a point: one per coordinate, unit first-order
    /// coefficient in its own direction.
    pub fn lift_input(&mut self, point: &[f64], order: usize) -> Result<Vec<Jet>, AutodiffError> {
        if order > MAX_ORDER {
            return Err(AutodiffError::OrderUnsupported(order));
        }
        if point.len() != self.dim {
            return Err(AutodiffError::DimUnsupported(point.len()));
        }
        let nc = self.nc(order);
        let mut jets = Vec::with_capacity(point.len());
        for (axis, &x) in point.iter().enumerate() {
            let mut v = [0.0; MAX_COEFFS];
            v[0] = x;
            if order >= 1 {
                // first-order coefficients sit right after the value
                v[1 + axis] = 1.0;
            }
            let _ = nc;
            jets.push(self.push(Op::Input, order, v));
        }
        Ok(jets)
    }

    /// Scalar bound to a parameter slot; backward accumulates into it.
    pub fn param(&mut self, slot: usize, value: f64) -> Result<DualScalar, AutodiffError> {
        if slot >= self.n_params {
            return Err(AutodiffError::ParamSlotOutOfRange { slot, n_params: self.n_params });
        }
        let mut v = [0.0; MAX_COEFFS];
        v[0] = value;
        let jet = self.push(Op::Param { slot: slot as u32 }, 0, v);
        Ok(DualScalar { value, jet })
    }

    pub fn scalar_const(&mut self, value: f64) -> DualScalar {
        let jet = self.constant_jet(0, value).expect("order 0 is always valid");
        DualScalar { value, jet }
    }

    // ── Jet arithmetic ───────────────────────────────────────────────

    pub fn add(&mut self, a: Jet, b: Jet) -> Result<Jet, AutodiffError> {
        let order = self.check_pair(&a, &b)?;
        let nc = self.nc(order);
        let mut v = [0.0; MAX_COEFFS];
        for c in 0..nc {
            v[c] = self.vals[a.id as usize][c] + self.vals[b.id as usize][c];
        }
        Ok(self.push(Op::Add { a: a.id, b: b.id }, order, v))
    }

    pub fn sub(&mut self, a: Jet, b: Jet) -> Result<Jet, AutodiffError> {
        let order = self.check_pair(&a, &b)?;
        let nc = self.nc(order);
        let mut v = [0.0; MAX_COEFFS];
        for c in 0..nc {
            v[c] = self.vals[a.id as usize][c] - self.vals[b.id as usize][c];
        }
        Ok(self.push(Op::Sub { a: a.id, b: b.id }, order, v))
    }

    pub fn mul(&mut self, a: Jet, b: Jet) -> Result<Jet, AutodiffError> {
        let order = self.check_pair(&a, &b)?;
        let nc = self.nc(order);
        let table = mul_table(self.dim, order);
        let mut v = [0.0; MAX_COEFFS];
        {
            let (va, vb) = (&self.vals[a.id as usize], &self.vals[b.id as usize]);
            super::jetops::mul_acc(table, &va[..nc], &vb[..nc], &mut v[..nc]);
        }
        Ok(self.push(Op::Mul { a: a.id, b: b.id }, order, v))
    }

    pub fn scalar_mul(&mut self, a: Jet, k: f64) -> Result<Jet, AutodiffError> {
        self.check(&a)?;
        let nc = self.nc(a.order());
        let mut v = [0.0; MAX_COEFFS];
        for c in 0..nc {
            v[c] = k * self.vals[a.id as usize][c];
        }
        Ok(self.push(Op::ScalarMul { a: a.id, k }, a.order(), v))
    }

    pub fn add_const(&mut self, a: Jet, k: f64) -> Result<Jet, AutodiffError> {
        self.check(&a)?;
        let mut v = self.vals[a.id as usize];
        v[0] += k;
        Ok(self.push(Op::AddConst { a: a.id }, a.order(), v))
    }

    pub fn compose_smooth(&mut self, a: Jet, act: Activation) -> Result<Jet, AutodiffError> {
        self.check(&a)?;
        let order = a.order();
        let nc = self.nc(order);
        let derivs = act.derivs(self.vals[a.id as usize][0]);
        let mut v = [0.0; MAX_COEFFS];
        {
            let va = self.vals[a.id as usize];
            compose(self.dim, order, &va[..nc], &derivs, &mut v[..nc]);
        }
        Ok(self.push(Op::Compose { a: a.id, act }, order, v))
    }

    pub fn tanh(&mut self, a: Jet) -> Result<Jet, AutodiffError> {
        self.compose_smooth(a, Activation::Tanh)
    }

    pub fn exp(&mut self, a: Jet) -> Result<Jet, AutodiffError> {
        self.compose_smooth(a, Activation::Exp)
    }

    pub fn sin(&mut self, a: Jet) -> Result<Jet, AutodiffError> {
        self.compose_smooth(a, Activation::Sin)
    }

    pub fn cos(&mut self, a: Jet) -> Result<Jet, AutodiffError> {
        self.compose_smooth(a, Activation::Cos)
    }

    /// d/dx_axis as a jet of one lower order.
    pub fn derive(&mut self, a: Jet, axis: usize) -> Result<Jet, AutodiffError> {
        self.check(&a)?;
        let order = a.order();
        if order == 0 {
            return Err(AutodiffError::DeriveOrderZero);
        }
        assert!(axis < self.dim, "derivative axis out of range");
        let table = derive_table(self.dim, order, axis);
        let mut v = [0.0; MAX_COEFFS];
        for &(src, dst, factor) in table {
            v[dst as usize] = factor * self.vals[a.id as usize][src as usize];
        }
        Ok(self.push(Op::Derive { a: a.id, axis: axis as u8 }, order - 1, v))
    }

    /// Drop coefficients above `target` order (prefix slice of the layout).
    pub fn truncate(&mut self, a: Jet, target: usize) -> Result<Jet, AutodiffError> {
        self.check(&a)?;
        if target > a.order() {
            return Err(AutodiffError::TruncateAboveOrder { target, have: a.order() });
        }
        if target == a.order() {
            return Ok(a);
        }
        let nc = self.nc(target);
        let mut v = [0.0; MAX_COEFFS];
        v[..nc].copy_from_slice(&self.vals[a.id as usize][..nc]);
        Ok(self.push(Op::Truncate { a: a.id }, target, v))
    }

    /// The value coefficient as a scalar node.
    pub fn value(&mut self, a: Jet) -> Result<DualScalar, AutodiffError> {
        let jet = self.truncate(a, 0)?;
        Ok(DualScalar { value: self.vals[jet.id as usize][0], jet })
    }

    // ── Scalar helpers used by loss assembly ─────────────────────────

    pub fn dadd(&mut self, a: DualScalar, b: DualScalar) -> DualScalar {
        let jet = self.add(a.jet, b.jet).expect("scalar add");
        DualScalar { value: self.vals[jet.id as usize][0], jet }
    }

    pub fn dsub(&mut self, a: DualScalar, b: DualScalar) -> DualScalar {
        let jet = self.sub(a.jet, b.jet).expect("scalar sub");
        DualScalar { value: self.vals[jet.id as usize][0], jet }
    }

    pub fn dmul(&mut self, a: DualScalar, b: DualScalar) -> DualScalar {
        let jet = self.mul(a.jet, b.jet).expect("scalar mul");
        DualScalar { value: self.vals[jet.id as usize][0], jet }
    }

    pub fn dscale(&mut self, a: DualScalar, k: f64) -> DualScalar {
        let jet = self.scalar_mul(a.jet, k).expect("scalar scale");
        DualScalar { value: self.vals[jet.id as usize][0], jet }
    }

    pub fn dadd_const(&mut self, a: DualScalar, k: f64) -> DualScalar {
        let jet = self.add_const(a.jet, k).expect("scalar add_const");
        DualScalar { value: self.vals[jet.id as usize][0], jet }
    }

    pub fn dsquare(&mut self, a: DualScalar) -> DualScalar {
        self.dmul(a, a)
    }

    /// Sum of scalars as a single node; empty input yields constant 0.
    pub fn dsum(&mut self, parts: &[DualScalar]) -> DualScalar {
        if parts.is_empty() {
            return self.scalar_const(0.0);
        }
        let start = self.aux.len() as u32;
        let mut total = 0.0;
        for p in parts {
            debug_assert_eq!(p.jet.tape, self.tape_id);
            debug_assert_eq!(p.jet.order, 0);
            self.aux.push(p.jet.id);
            total += self.vals[p.jet.id as usize][0];
        }
        let mut v = [0.0; MAX_COEFFS];
        v[0] = total;
        let jet = self.push(Op::Sum { start, len: parts.len() as u32 }, 0, v);
        DualScalar { value: total, jet }
    }

    /// Mean of scalars; empty input yields constant 0.
    pub fn dmean(&mut self, parts: &[DualScalar]) -> DualScalar {
        if parts.is_empty() {
            return self.scalar_const(0.0);
        }
        let s = self.dsum(parts);
        self.dscale(s, 1.0 / parts.len() as f64)
    }

    // ── Reading values ───────────────────────────────────────────────

    pub fn value_of(&self, jet: Jet) -> f64 {
        debug_assert_eq!(jet.tape, self.tape_id);
        self.vals[jet.id as usize][0]
    }

    pub fn coeffs_of(&self, jet: Jet) -> &[f64] {
        debug_assert_eq!(jet.tape, self.tape_id);
        &self.vals[jet.id as usize][..self.nc(jet.order())]
    }

    /// Raw Taylor coefficient for a multi-index.
    pub fn coeff(&self, jet: Jet, mi: MultiIndex) -> f64 {
        let idx = super::index::index_of(self.dim, jet.order(), mi);
        self.vals[jet.id as usize][idx]
    }

    /// Input derivative d^mi u (coefficient times mi!).
    pub fn derivative(&self, jet: Jet, mi: MultiIndex) -> f64 {
        self.coeff(jet, mi) * mi_factorial(mi)
    }

    // ── Reverse sweep ────────────────────────────────────────────────

    /// Accumulates d(seed)/d(theta_k) for every parameter slot.
    pub fn backward(&self, seed: &DualScalar) -> Result<Vec<f64>, AutodiffError> {
        if seed.jet.tape != self.tape_id {
            return Err(AutodiffError::SeedNotOnTape);
        }
        let mut grad = vec![0.0; self.n_params];
        self.backward_into(seed, &mut grad)?;
        Ok(grad)
    }

    /// Like [`backward`](Self::backward) but accumulating into `grad`.
    pub fn backward_into(&self, seed: &DualScalar, grad: &mut [f64]) -> Result<(), AutodiffError> {
        if seed.jet.tape != self.tape_id {
            return Err(AutodiffError::SeedNotOnTape);
        }
        assert_eq!(grad.len(), self.n_params, "gradient buffer length mismatch");
        let mut adj = vec![[0.0f64; MAX_COEFFS]; self.nodes.len()];
        adj[seed.jet.id as usize][0] = 1.0;
        let mut bridge_adj: Vec<Vec<f64>> = self
            .bridges
            .iter()
            .map(|b| vec![0.0; b.n_points * b.nc])
            .collect();

        for id in (0..self.nodes.len()).rev() {
            let node = self.nodes[id];
            let order = node.order as usize;
            let nc = self.nc(order);
            let a_out = adj[id];
            if !matches!(node.op, Op::NetOut { .. }) && a_out[..nc].iter().all(|&x| x == 0.0) {
                continue;
            }
            match node.op {
                Op::Input => {}
                Op::Param { slot } => grad[slot as usize] += a_out[0],
                Op::Add { a, b } => {
                    for c in 0..nc {
                        adj[a as usize][c] += a_out[c];
                        adj[b as usize][c] += a_out[c];
                    }
                }
                Op::Sub { a, b } => {
                    for c in 0..nc {
                        adj[a as usize][c] += a_out[c];
                        adj[b as usize][c] -= a_out[c];
                    }
                }
                Op::Mul { a, b } => {
                    let table = mul_table(self.dim, order);
                    let va = self.vals[a as usize];
                    let vb = self.vals[b as usize];
                    let mut adj_a = [0.0; MAX_COEFFS];
                    let mut adj_b = [0.0; MAX_COEFFS];
                    mul_adjoint_acc(table, &a_out[..nc], &vb[..nc], &mut adj_a[..nc]);
                    mul_adjoint_acc(table, &a_out[..nc], &va[..nc], &mut adj_b[..nc]);
                    for c in 0..nc {
                        adj[a as usize][c] += adj_a[c];
                        adj[b as usize][c] += adj_b[c];
                    }
                }
                Op::ScalarMul { a, k } => {
                    for c in 0..nc {
                        adj[a as usize][c] += k * a_out[c];
                    }
                }
                Op::AddConst { a } => {
                    for c in 0..nc {
                        adj[a as usize][c] += a_out[c];
                    }
                }
                Op::Compose { a, act } => {
                    // dc = g * da with g the composition of the derivative,
                    // so the adjoint is the transposed truncated product by g.
                    let derivs = act.derivs(self.vals[a as usize][0]);
                    let mut g = [0.0; MAX_COEFFS];
                    compose(self.dim, order, &self.vals[a as usize][..nc], &derivs[1..], &mut g[..nc]);
                    let table = mul_table(self.dim, order);
                    let mut adj_a = [0.0; MAX_COEFFS];
                    mul_adjoint_acc(table, &a_out[..nc], &g[..nc], &mut adj_a[..nc]);
                    for c in 0..nc {
                        adj[a as usize][c] += adj_a[c];
                    }
                }
                Op::Derive { a, axis } => {
                    let table = derive_table(self.dim, order + 1, axis as usize);
                    for &(src, dst, factor) in table {
                        adj[a as usize][src as usize] += factor * a_out[dst as usize];
                    }
                }
                Op::Truncate { a } => {
                    for c in 0..nc {
                        adj[a as usize][c] += a_out[c];
                    }
                }
                Op::Sum { start, len } => {
                    for i in start..start + len {
                        let p = self.aux[i as usize] as usize;
                        for c in 0..nc {
                            adj[p][c] += a_out[c];
                        }
                    }
                }
                Op::NetOut { bridge, row } => {
                    let b = &self.bridges[bridge as usize];
                    let dst = &mut bridge_adj[bridge as usize][row as usize * b.nc..];
                    dst[..b.nc].copy_from_slice(&a_out[..b.nc]);
                    if row == 0 {
                        // All consumers of this bridge live above; run its VJP.
                        let mut input_adj = if b.inputs_need_adjoint {
                            Some(vec![0.0; b.input_ids.len() * b.nc])
                        } else {
                            None
                        };
                        crate::network::backward_jet_batch(
                            &b.spec,
                            &b.params,
                            &b.record,
                            &bridge_adj[bridge as usize],
                            &mut grad[b.param_offset..b.param_offset + b.spec.param_len()],
                            input_adj.as_deref_mut(),
                        );
                        if let Some(ia) = input_adj {
                            for (slot, &input_id) in b.input_ids.iter().enumerate() {
                                for c in 0..b.nc {
                                    adj[input_id as usize][c] += ia[slot * b.nc + c];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lift_seeds_match_definition() {
        let mut tape = Tape::new(2, 0).unwrap();
        let jets = tape.lift_input(&[0.5, -0.25], 2).unwrap();
        assert_eq!(tape.coeffs_of(jets[0]), &[0.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(tape.coeffs_of(jets[1]), &[-0.25, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn lift_scalar_order_zero() {
        let mut tape = Tape::new(1, 0).unwrap();
        let jets = tape.lift_input(&[3.0], 0).unwrap();
        assert_eq!(jets.len(), 1);
        assert_eq!(tape.coeffs_of(jets[0]), &[3.0]);
    }

    #[test]
    fn lift_rejects_unsupported_shapes() {
        let mut tape = Tape::new(2, 0).unwrap();
        assert!(matches!(
            tape.lift_input(&[0.0, 0.0], 4),
            Err(AutodiffError::OrderUnsupported(4))
        ));
        assert!(Tape::new(3, 0).is_err());
    }

    #[test]
    fn product_rule_on_lifted_pair() {
        // f(x, y) = x * y at (2, 3), order 2
        let mut tape = Tape::new(2, 0).unwrap();
        let jets = tape.lift_input(&[2.0, 3.0], 2).unwrap();
        let prod = tape.mul(jets[0], jets[1]).unwrap();
        assert_eq!(tape.value_of(prod), 6.0);
        assert_eq!(tape.derivative(prod, [1, 0]), 3.0);
        assert_eq!(tape.derivative(prod, [0, 1]), 2.0);
        assert_eq!(tape.derivative(prod, [1, 1]), 1.0);
        assert_eq!(tape.derivative(prod, [2, 0]), 0.0);
        assert_eq!(tape.derivative(prod, [0, 2]), 0.0);
    }

    #[test]
    fn burgers_nonlinearity_from_square() {
        // u(x) = x^2 at x = 1: the jet for u * u_x has value 2 = 2x^3 there.
        let mut tape = Tape::new(1, 0).unwrap();
        let x = tape.lift_input(&[1.0], 3).unwrap()[0];
        let u = tape.mul(x, x).unwrap();
        let ux = tape.derive(u, 0).unwrap();
        let u2 = tape.truncate(u, 2).unwrap();
        let conv = tape.mul(u2, ux).unwrap();
        assert_relative_eq!(tape.value_of(conv), 2.0, epsilon = 1e-14);
        // d(u u_x)/dx = 6x^2 = 6
        assert_relative_eq!(tape.derivative(conv, [1, 0]), 6.0, epsilon = 1e-13);
    }

    #[test]
    fn mixing_tapes_is_rejected() {
        let mut t1 = Tape::new(1, 0).unwrap();
        let mut t2 = Tape::new(1, 0).unwrap();
        let a = t1.lift_input(&[1.0], 1).unwrap()[0];
        let b = t2.lift_input(&[1.0], 1).unwrap()[0];
        assert!(matches!(t1.add(a, b), Err(AutodiffError::TapeMismatch)));
    }

    #[test]
    fn backward_square() {
        // L = theta0^2 at theta0 = 3 -> dL/dtheta0 = 6
        let mut tape = Tape::new(1, 1).unwrap();
        let th = tape.param(0, 3.0).unwrap();
        let loss = tape.dmul(th, th);
        let grad = tape.backward(&loss).unwrap();
        assert_eq!(grad, vec![6.0]);
    }

    #[test]
    fn backward_linear_neuron_by_hand() {
        // u = w * x + b, loss (u - 1)^2 at w = 0, b = 0, x = 2
        let mut tape = Tape::new(1, 2).unwrap();
        let w = tape.param(0, 0.0).unwrap();
        let b = tape.param(1, 0.0).unwrap();
        let u = tape.dscale(w, 2.0);
        let u = tape.dadd(u, b);
        let diff = tape.dadd_const(u, -1.0);
        let loss = tape.dsquare(diff);
        let grad = tape.backward(&loss).unwrap();
        assert_eq!(grad, vec![-4.0, -2.0]);
    }

    #[test]
    fn backward_rejects_foreign_seed() {
        let mut t1 = Tape::new(1, 1).unwrap();
        let mut t2 = Tape::new(1, 1).unwrap();
        let _ = t1.param(0, 1.0).unwrap();
        let s = t2.param(0, 1.0).unwrap();
        assert!(matches!(t1.backward(&s), Err(AutodiffError::SeedNotOnTape)));
    }

    #[test]
    fn backward_is_bit_deterministic() {
        let run = || {
            let mut tape = Tape::new(2, 3).unwrap();
            let jets = tape.lift_input(&[0.3, -0.7], 2).unwrap();
            let p0 = tape.param(0, 0.11).unwrap();
            let p1 = tape.param(1, -0.42).unwrap();
            let p2 = tape.param(2, 0.97).unwrap();
            let sx = tape.sin(jets[0]).unwrap();
            let ey = tape.exp(jets[1]).unwrap();
            let prod = tape.mul(sx, ey).unwrap();
            let dxx = {
                let dx = tape.derive(prod, 0).unwrap();
                tape.derive(dx, 0).unwrap()
            };
            let v = tape.value(dxx).unwrap();
            let t0 = tape.dmul(p0, v);
            let t1 = tape.dmul(p1, t0);
            let t2 = tape.dadd(t1, p2);
            let loss = tape.dsquare(t2);
            tape.backward(&loss).unwrap()
        };
        let g1 = run();
        let g2 = run();
        assert_eq!(g1.len(), 3);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn derive_shifts_coefficients() {
        // u = sin(x) * exp(y): check u_x value against cos(x) e^y.
        let mut tape = Tape::new(2, 0).unwrap();
        let (x0, y0) = (0.4, -0.2);
        let jets = tape.lift_input(&[x0, y0], 3).unwrap();
        let sx = tape.sin(jets[0]).unwrap();
        let ey = tape.exp(jets[1]).unwrap();
        let u = tape.mul(sx, ey).unwrap();
        let ux = tape.derive(u, 0).unwrap();
        assert_relative_eq!(tape.value_of(ux), x0.cos() * y0.exp(), epsilon = 1e-14);
        let uxy = tape.derive(ux, 1).unwrap();
        assert_relative_eq!(tape.value_of(uxy), x0.cos() * y0.exp(), epsilon = 1e-13);
        let uxx = tape.derive(ux, 0).unwrap();
        assert_relative_eq!(tape.value_of(uxx), -x0.sin() * y0.exp(), epsilon = 1e-13);
    }

    #[test]
    fn exp_of_zero_seed_keeps_pattern() {
        let mut tape = Tape::new(1, 0).unwrap();
        let x = tape.lift_input(&[0.0], 3).unwrap()[0];
        let e = tape.exp(x).unwrap();
        let c = tape.coeffs_of(e);
        assert_relative_eq!(c[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(c[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(c[2], 0.5, epsilon = 1e-15);
        assert_relative_eq!(c[3], 1.0 / 6.0, epsilon = 1e-15);
    }
}
