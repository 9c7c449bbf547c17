//! Dense feed-forward field approximator: tanh hidden layers, affine output.
//!
//! Two evaluation paths share the same parameters: a plain-real forward for
//! prediction grids, and a batched jet forward whose layer-by-layer transpose
//! supplies parameter gradients to the tape (see `autodiff::tape`).

mod batch;
mod checkpoint;
pub(crate) mod vmath;

pub use batch::{backward_jet_batch, forward_jet_batch, forward_values, BatchRecord};
pub use checkpoint::{load_checkpoint, save_checkpoint};

use crate::autodiff::index::{n_coeffs, MAX_DIM, MAX_ORDER};
use crate::autodiff::tape::{AutodiffError, DualScalar, Jet, Op, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
    #[error("input dimension mismatch: spec expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("checkpoint i/o: {0}")]
    CheckpointIo(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),
}

/// Layer widths including input and output: `[n, N_1, ..., N_L, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    sizes: Vec<usize>,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self, NetworkError> {
        if sizes.len() < 3 {
            return Err(NetworkError::InvalidSpec(
                "need at least one hidden layer".into(),
            ));
        }
        if sizes[0] == 0 || sizes[0] > MAX_DIM {
            return Err(NetworkError::InvalidSpec(format!(
                "input width {} outside 1..={MAX_DIM}",
                sizes[0]
            )));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(NetworkError::InvalidSpec("output width must be 1".into()));
        }
        if sizes.iter().any(|&w| w == 0) {
            return Err(NetworkError::InvalidSpec("zero-width layer".into()));
        }
        Ok(LayerSpec { sizes })
    }

    /// `[n, width, width, ..., 1]` with `hidden` tanh layers.
    pub fn uniform(input_dim: usize, hidden: usize, width: usize) -> Result<Self, NetworkError> {
        let mut sizes = vec![input_dim];
        sizes.extend(std::iter::repeat(width).take(hidden));
        sizes.push(1);
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn hidden_layers(&self) -> usize {
        self.sizes.len() - 2
    }

    /// Total parameter count: sum of N_l * N_{l-1} + N_l over all layers.
    pub fn param_len(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// (weight offset, bias offset, n_in, n_out) per affine layer.
    pub(crate) fn layer_offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut offs = Vec::with_capacity(self.sizes.len() - 1);
        let mut cursor = 0;
        for w in self.sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            offs.push((cursor, cursor + n_in * n_out, n_in, n_out));
            cursor += n_in * n_out + n_out;
        }
        offs
    }
}

/// Flat parameter storage: per layer, row-major `W^l` then `b^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(spec: &LayerSpec) -> Self {
        ParameterVector {
            values: vec![0.0; spec.param_len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Split into per-layer (weights, biases) views.
    pub fn unpack<'a>(&'a self, spec: &LayerSpec) -> Vec<(&'a [f64], &'a [f64])> {
        spec.layer_offsets()
            .iter()
            .map(|&(w_off, b_off, n_in, n_out)| {
                (
                    &self.values[w_off..w_off + n_in * n_out],
                    &self.values[b_off..b_off + n_out],
                )
            })
            .collect()
    }

    /// Inverse of [`unpack`](Self::unpack).
    pub fn pack(spec: &LayerSpec, layers: &[(Vec<f64>, Vec<f64>)]) -> Self {
        let mut values = Vec::with_capacity(spec.param_len());
        for ((w, b), (_, _, n_in, n_out)) in layers.iter().zip(spec.layer_offsets()) {
            assert_eq!(w.len(), n_in * n_out);
            assert_eq!(b.len(), n_out);
            values.extend_from_slice(w);
            values.extend_from_slice(b);
        }
        ParameterVector { values }
    }
}

/// Glorot-uniform weights, zero biases; reproducible per seed.
pub fn init_xavier(spec: &LayerSpec, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; spec.param_len()];
    for (w_off, _, n_in, n_out) in spec.layer_offsets() {
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        for w in &mut values[w_off..w_off + n_in * n_out] {
            *w = (2.0 * rng.gen::<f64>() - 1.0) * bound;
        }
    }
    ParameterVector { values }
}

/// Plain-real forward pass for one point.
pub fn forward(spec: &LayerSpec, params: &[f64], input: &[f64]) -> Result<f64, NetworkError> {
    if input.len() != spec.input_dim() {
        return Err(NetworkError::DimensionMismatch {
            expected: spec.input_dim(),
            got: input.len(),
        });
    }
    debug_assert_eq!(params.len(), spec.param_len());
    let offsets = spec.layer_offsets();
    let n_layers = offsets.len();
    let mut cur = input.to_vec();
    let mut next = Vec::new();
    for (l, &(w_off, b_off, n_in, n_out)) in offsets.iter().enumerate() {
        next.clear();
        next.resize(n_out, 0.0);
        for i in 0..n_out {
            let row = &params[w_off + i * n_in..w_off + (i + 1) * n_in];
            let mut acc = params[b_off + i];
            for (w, x) in row.iter().zip(&cur) {
                acc += w * x;
            }
            next[i] = if l + 1 < n_layers { vmath::tanh_scalar(acc)[0] } else { acc };
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur[0])
}

// ── Tape integration ──────────────────────────────────────────────────

impl Tape {
    /// Evaluate one network on a batch of lifted points; returns one output
    /// jet per point. The forward record is kept on the tape and replayed
    /// (transposed) during `backward`.
    ///
    /// `inputs` is row-major per point: `n_points * spec.input_dim()` jets of
    /// equal order.
    pub fn network_batch(
        &mut self,
        spec: &LayerSpec,
        params: &[f64],
        param_offset: usize,
        inputs: &[Jet],
        order: usize,
    ) -> Result<Vec<Jet>, AutodiffError> {
        let dim = spec.input_dim();
        assert_eq!(
            dim,
            self.dim,
            "network input width must match the tape dimension"
        );
        assert_eq!(params.len(), spec.param_len(), "parameter slice length");
        if order > MAX_ORDER {
            return Err(AutodiffError::OrderUnsupported(order));
        }
        assert_eq!(inputs.len() % dim, 0, "inputs must be n_points * dim jets");
        let n_points = inputs.len() / dim;
        let nc = n_coeffs(self.dim, order);

        let mut packed = vec![0.0; n_points * dim * nc];
        let mut inputs_need_adjoint = false;
        for (slot, jet) in inputs.iter().enumerate() {
            if jet.tape != self.tape_id {
                return Err(AutodiffError::TapeMismatch);
            }
            if jet.order() != order {
                return Err(AutodiffError::OrderMismatch(jet.order(), order));
            }
            packed[slot * nc..(slot + 1) * nc]
                .copy_from_slice(&self.vals[jet.id as usize][..nc]);
            if !matches!(self.nodes[jet.id as usize].op, Op::Input) {
                inputs_need_adjoint = true;
            }
        }

        let record = forward_jet_batch(spec, params, &packed, n_points, order);
        debug_assert!(
            record.output.iter().all(|v| v.is_finite()),
            "non-finite jet coefficient out of network forward"
        );

        let bridge_idx = self.bridges.len() as u32;
        let mut outs = Vec::with_capacity(n_points);
        let mut out_coeffs = [0.0; crate::autodiff::index::MAX_COEFFS];
        for row in 0..n_points {
            out_coeffs[..nc].copy_from_slice(&record.output[row * nc..(row + 1) * nc]);
            outs.push(self.push(
                Op::NetOut {
                    bridge: bridge_idx,
                    row: row as u32,
                },
                order,
                out_coeffs,
            ));
        }

        self.bridges.push(crate::autodiff::tape::Bridge {
            spec: spec.clone(),
            params: params.to_vec(),
            param_offset,
            record,
            input_ids: inputs.iter().map(|j| j.id).collect(),
            inputs_need_adjoint,
            n_points,
            nc,
        });
        Ok(outs)
    }

    /// Single-point variant of [`network_batch`](Self::network_batch).
    pub fn network_eval(
        &mut self,
        spec: &LayerSpec,
        params: &[f64],
        param_offset: usize,
        input_jets: &[Jet],
        order: usize,
    ) -> Result<Jet, AutodiffError> {
        let outs = self.network_batch(spec, params, param_offset, input_jets, order)?;
        Ok(outs[0])
    }

    /// Network output value as a scalar node (order-0 evaluation).
    pub fn network_value(
        &mut self,
        spec: &LayerSpec,
        params: &[f64],
        param_offset: usize,
        point: &[f64],
    ) -> Result<DualScalar, AutodiffError> {
        let jets = self.lift_input(point, 0)?;
        let out = self.network_eval(spec, params, param_offset, &jets, 0)?;
        self.value(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn param_len_small() {
        let spec = LayerSpec::new(vec![2, 20, 1]).unwrap();
        assert_eq!(spec.param_len(), (2 * 20 + 20) + (20 + 1));
        assert_eq!(spec.param_len(), 81);
    }

    #[test]
    fn param_len_five_hidden_55() {
        // (2*55+55) + 4*(55*55+55) + (55+1)
        let spec = LayerSpec::uniform(2, 5, 55).unwrap();
        assert_eq!(spec.param_len(), 165 + 4 * 3080 + 56);
        assert_eq!(spec.param_len(), 12541);
    }

    #[test]
    fn xavier_is_reproducible_and_bounded() {
        let spec = LayerSpec::new(vec![2, 20, 1]).unwrap();
        let a = init_xavier(&spec, 42);
        let b = init_xavier(&spec, 42);
        assert_eq!(a, b);
        let c = init_xavier(&spec, 43);
        assert_ne!(a, c);
        // biases zero, weights inside the Glorot bound
        let layers = a.unpack(&spec);
        for (w, b) in layers {
            assert!(b.iter().all(|&x| x == 0.0));
            assert!(!w.is_empty());
        }
        let bound0 = (6.0f64 / 22.0).sqrt();
        for &w in &a.values[..40] {
            assert!(w.abs() <= bound0);
        }
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let spec = LayerSpec::new(vec![2, 7, 3, 1]).unwrap();
        let p = init_xavier(&spec, 5);
        let layers: Vec<(Vec<f64>, Vec<f64>)> = p
            .unpack(&spec)
            .into_iter()
            .map(|(w, b)| (w.to_vec(), b.to_vec()))
            .collect();
        let packed = ParameterVector::pack(&spec, &layers);
        assert_eq!(packed, p);
    }

    #[test]
    fn zero_parameters_map_everything_to_zero() {
        let spec = LayerSpec::new(vec![2, 8, 8, 1]).unwrap();
        let p = ParameterVector::zeros(&spec);
        for input in [[0.0, 0.0], [1.0, -1.0], [0.3, 9.0]] {
            assert_eq!(forward(&spec, &p.values, &input).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_hidden_neuron_by_hand() {
        let spec = LayerSpec::new(vec![2, 1, 1]).unwrap();
        let p = ParameterVector::pack(
            &spec,
            &[(vec![1.0, 0.0], vec![0.0]), (vec![1.0], vec![0.0])],
        );
        let out = forward(&spec, &p.values, &[0.3, 9.0]).unwrap();
        assert_relative_eq!(out, 0.3f64.tanh(), epsilon = 1e-15);
        assert_relative_eq!(out, 0.291313, max_relative = 1e-5);
    }

    #[test]
    fn forward_rejects_bad_dimension() {
        let spec = LayerSpec::new(vec![2, 4, 1]).unwrap();
        let p = ParameterVector::zeros(&spec);
        assert!(matches!(
            forward(&spec, &p.values, &[1.0]),
            Err(NetworkError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(LayerSpec::new(vec![2, 1]).is_err());
        assert!(LayerSpec::new(vec![3, 5, 1]).is_err());
        assert!(LayerSpec::new(vec![2, 5, 2]).is_err());
        assert!(LayerSpec::new(vec![2, 0, 1]).is_err());
    }
}
