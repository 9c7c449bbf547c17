//! Batched jet propagation through the network and its transpose.
//!
//! Activations live in point-blocked layout `[block][neuron][coeff][PB]`:
//! eight points share the innermost axis, so every multiply-add in the affine
//! and tanh kernels is an independent full-width vector op with a broadcast
//! weight. Blocks are processed in fixed-size chunks and chunk-local
//! gradients merged in chunk order: results are bit-identical for any worker
//! count. Row-major jets are packed/unpacked only at the batch boundary.

use super::LayerSpec;
use crate::autodiff::index::{mul_table, n_coeffs, MulEntry, MAX_COEFFS};
use crate::autodiff::jetops::{compose, mul_adjoint_acc, Activation};
use rayon::prelude::*;

/// Points per vector lane block.
const PB: usize = 8;
/// Blocks per parallel work item (512 points).
const CHUNK_BLOCKS: usize = 64;

/// Saved forward state of one batched jet evaluation (blocked layout).
pub struct BatchRecord {
    pub(crate) order: usize,
    pub(crate) nc: usize,
    pub(crate) n_points: usize,
    pub(crate) n_blocks: usize,
    /// `[n_blocks][input_dim][nc][PB]`
    pub(crate) inputs: Vec<f64>,
    /// Per hidden layer, pre-activation `[n_blocks][width][nc][PB]`.
    pub(crate) pre: Vec<Vec<f64>>,
    /// Per hidden layer, tanh output `[n_blocks][width][nc][PB]`.
    pub(crate) post: Vec<Vec<f64>>,
    /// Row-major output jets `[n_points][nc]`.
    pub(crate) output: Vec<f64>,
}

impl BatchRecord {
    pub fn output_coeffs(&self, row: usize) -> &[f64] {
        &self.output[row * self.nc..(row + 1) * self.nc]
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }
}

macro_rules! with_nc {
    ($nc:expr, $f:ident ( $($args:expr),* $(,)? )) => {
        match $nc {
            1 => $f::<1>($($args),*),
            2 => $f::<2>($($args),*),
            3 => $f::<3>($($args),*),
            4 => $f::<4>($($args),*),
            6 => $f::<6>($($args),*),
            10 => $f::<10>($($args),*),
            other => panic!("unsupported coefficient count {other}"),
        }
    };
}

fn n_blocks(n_points: usize) -> usize {
    n_points.div_ceil(PB)
}

/// Row-major `[p][width][nc]` -> blocked `[b][width][nc][PB]`, zero padded.
fn block_pack(src: &[f64], n_points: usize, width: usize, nc: usize) -> Vec<f64> {
    let nb = n_blocks(n_points);
    let mut dst = vec![0.0; nb * width * nc * PB];
    for p in 0..n_points {
        let (b, pb) = (p / PB, p % PB);
        for w in 0..width {
            for c in 0..nc {
                dst[((b * width + w) * nc + c) * PB + pb] = src[(p * width + w) * nc + c];
            }
        }
    }
    dst
}

/// Blocked -> row-major, discarding padding lanes.
fn block_unpack(src: &[f64], n_points: usize, width: usize, nc: usize) -> Vec<f64> {
    let mut dst = vec![0.0; n_points * width * nc];
    for p in 0..n_points {
        let (b, pb) = (p / PB, p % PB);
        for w in 0..width {
            for c in 0..nc {
                dst[(p * width + w) * nc + c] = src[((b * width + w) * nc + c) * PB + pb];
            }
        }
    }
    dst
}

// ── Affine kernels ────────────────────────────────────────────────────

fn affine_forward<const NC: usize>(
    w: &[f64],
    b: &[f64],
    n_in: usize,
    n_out: usize,
    inp: &[f64],
    out: &mut [f64],
) {
    let in_blk = n_in * NC * PB;
    let out_blk = n_out * NC * PB;
    out.par_chunks_mut(CHUNK_BLOCKS * out_blk)
        .zip(inp.par_chunks(CHUNK_BLOCKS * in_blk))
        .for_each(|(o, ib)| {
            let nb = ib.len() / in_blk;
            for blk in 0..nb {
                let it = &ib[blk * in_blk..(blk + 1) * in_blk];
                let ot = &mut o[blk * out_blk..(blk + 1) * out_blk];
                for i in 0..n_out {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    let mut acc = [[0.0f64; PB]; NC];
                    for (j, &wij) in row.iter().enumerate() {
                        let tile = &it[j * NC * PB..(j + 1) * NC * PB];
                        for c in 0..NC {
                            let lane: &[f64; PB] =
                                tile[c * PB..(c + 1) * PB].try_into().unwrap();
                            for pb in 0..PB {
                                acc[c][pb] += wij * lane[pb];
                            }
                        }
                    }
                    let bi = b[i];
                    for pb in 0..PB {
                        acc[0][pb] += bi;
                    }
                    let dst = &mut ot[i * NC * PB..(i + 1) * NC * PB];
                    for c in 0..NC {
                        dst[c * PB..(c + 1) * PB].copy_from_slice(&acc[c]);
                    }
                }
            }
        });
}

/// adj_in[j] = sum_i w[i,j] * adj_out[i]  (overwrites adj_in)
fn affine_adjoint_input<const NC: usize>(
    w: &[f64],
    n_in: usize,
    n_out: usize,
    adj_out: &[f64],
    adj_in: &mut [f64],
) {
    let in_blk = n_in * NC * PB;
    let out_blk = n_out * NC * PB;
    adj_in
        .par_chunks_mut(CHUNK_BLOCKS * in_blk)
        .zip(adj_out.par_chunks(CHUNK_BLOCKS * out_blk))
        .for_each(|(ai, ao)| {
            let nb = ao.len() / out_blk;
            for blk in 0..nb {
                let at = &ao[blk * out_blk..(blk + 1) * out_blk];
                let it = &mut ai[blk * in_blk..(blk + 1) * in_blk];
                for j in 0..n_in {
                    let mut acc = [[0.0f64; PB]; NC];
                    for i in 0..n_out {
                        let wij = w[i * n_in + j];
                        let tile = &at[i * NC * PB..(i + 1) * NC * PB];
                        for c in 0..NC {
                            let lane: &[f64; PB] =
                                tile[c * PB..(c + 1) * PB].try_into().unwrap();
                            for pb in 0..PB {
                                acc[c][pb] += wij * lane[pb];
                            }
                        }
                    }
                    let dst = &mut it[j * NC * PB..(j + 1) * NC * PB];
                    for c in 0..NC {
                        dst[c * PB..(c + 1) * PB].copy_from_slice(&acc[c]);
                    }
                }
            }
        });
}

/// Accumulates dW and db from blocked activations and adjoints.
fn affine_param_grads<const NC: usize>(
    n_in: usize,
    n_out: usize,
    inp: &[f64],
    adj_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) {
    let in_blk = n_in * NC * PB;
    let out_blk = n_out * NC * PB;
    let partials: Vec<(Vec<f64>, Vec<f64>)> = inp
        .par_chunks(CHUNK_BLOCKS * in_blk)
        .zip(adj_out.par_chunks(CHUNK_BLOCKS * out_blk))
        .map(|(ib, ao)| {
            let mut gw = vec![0.0; n_in * n_out];
            let mut gb = vec![0.0; n_out];
            let nb = ib.len() / in_blk;
            for blk in 0..nb {
                let it = &ib[blk * in_blk..(blk + 1) * in_blk];
                let at = &ao[blk * out_blk..(blk + 1) * out_blk];
                for i in 0..n_out {
                    let atile = &at[i * NC * PB..(i + 1) * NC * PB];
                    gb[i] += atile[..PB].iter().sum::<f64>();
                    let grow = &mut gw[i * n_in..(i + 1) * n_in];
                    for j in 0..n_in {
                        let itile = &it[j * NC * PB..(j + 1) * NC * PB];
                        let mut acc = [0.0f64; PB];
                        for c in 0..NC {
                            let a: &[f64; PB] =
                                atile[c * PB..(c + 1) * PB].try_into().unwrap();
                            let v: &[f64; PB] =
                                itile[c * PB..(c + 1) * PB].try_into().unwrap();
                            for pb in 0..PB {
                                acc[pb] += a[pb] * v[pb];
                            }
                        }
                        grow[j] += acc.iter().sum::<f64>();
                    }
                }
            }
            (gw, gb)
        })
        .collect();
    // Merge in chunk order so the sum is schedule-independent.
    for (gw, gb) in partials {
        for (dst, src) in grad_w.iter_mut().zip(&gw) {
            *dst += src;
        }
        for (dst, src) in grad_b.iter_mut().zip(&gb) {
            *dst += src;
        }
    }
}

// ── tanh kernels ──────────────────────────────────────────────────────
//
// Closed-form truncated composition for 2-D jets, lane-parallel over the
// point block. All tanh derivatives are polynomials in the activation value,
// so the backward pass needs no transcendentals. 1-D jets (test nets) take
// the generic table path per lane.

#[inline(always)]
fn lane<const N: usize>(buf: &[f64], c: usize) -> [f64; N] {
    buf[c * N..(c + 1) * N].try_into().unwrap()
}

#[inline(always)]
fn tanh_fwd_2d_tile<const ORDER: usize>(src: &[f64], dst: &mut [f64]) {
    let s0: [f64; PB] = lane(src, 0);
    let t = super::vmath::tanh_lanes(&s0);
    dst[..PB].copy_from_slice(&t);
    if ORDER == 0 {
        return;
    }
    let mut f1 = [0.0f64; PB];
    for p in 0..PB {
        f1[p] = 1.0 - t[p] * t[p];
    }
    let a1: [f64; PB] = lane(src, 1);
    let a2: [f64; PB] = lane(src, 2);
    for p in 0..PB {
        dst[PB + p] = f1[p] * a1[p];
        dst[2 * PB + p] = f1[p] * a2[p];
    }
    if ORDER == 1 {
        return;
    }
    let mut f2 = [0.0f64; PB];
    for p in 0..PB {
        f2[p] = -2.0 * t[p] * f1[p];
    }
    let a3: [f64; PB] = lane(src, 3);
    let a4: [f64; PB] = lane(src, 4);
    let a5: [f64; PB] = lane(src, 5);
    for p in 0..PB {
        dst[3 * PB + p] = f1[p] * a3[p] + 0.5 * f2[p] * a1[p] * a1[p];
        dst[4 * PB + p] = f1[p] * a4[p] + f2[p] * a1[p] * a2[p];
        dst[5 * PB + p] = f1[p] * a5[p] + 0.5 * f2[p] * a2[p] * a2[p];
    }
    if ORDER == 2 {
        return;
    }
    for p in 0..PB {
        let f3 = -2.0 * (f1[p] * f1[p] + t[p] * f2[p]);
        let s3 = f3 / 6.0;
        dst[6 * PB + p] =
            f1[p] * src[6 * PB + p] + f2[p] * a1[p] * a3[p] + s3 * a1[p] * a1[p] * a1[p];
        dst[7 * PB + p] = f1[p] * src[7 * PB + p]
            + f2[p] * (a1[p] * a4[p] + a2[p] * a3[p])
            + 3.0 * s3 * a1[p] * a1[p] * a2[p];
        dst[8 * PB + p] = f1[p] * src[8 * PB + p]
            + f2[p] * (a1[p] * a5[p] + a2[p] * a4[p])
            + 3.0 * s3 * a1[p] * a2[p] * a2[p];
        dst[9 * PB + p] =
            f1[p] * src[9 * PB + p] + f2[p] * a2[p] * a5[p] + s3 * a2[p] * a2[p] * a2[p];
    }
}

/// g = jet of tanh' along the saved pre-activation, from the stored output
/// value (no tanh call); then adj := g^T (x) adj in place, lane-parallel.
#[inline(always)]
fn tanh_bwd_2d_tile<const ORDER: usize>(src: &[f64], post: &[f64], adj: &mut [f64]) {
    let nc = n_coeffs(2, ORDER);
    let mut g = [[0.0f64; PB]; MAX_COEFFS];
    let t: [f64; PB] = lane(post, 0);
    let mut f1 = [0.0f64; PB];
    let mut f2 = [0.0f64; PB];
    for p in 0..PB {
        f1[p] = 1.0 - t[p] * t[p];
        f2[p] = -2.0 * t[p] * f1[p];
    }
    g[0] = f1;
    if ORDER >= 1 {
        let a1: [f64; PB] = lane(src, 1);
        let a2: [f64; PB] = lane(src, 2);
        for p in 0..PB {
            g[1][p] = f2[p] * a1[p];
            g[2][p] = f2[p] * a2[p];
        }
        if ORDER >= 2 {
            let a3: [f64; PB] = lane(src, 3);
            let a4: [f64; PB] = lane(src, 4);
            let a5: [f64; PB] = lane(src, 5);
            let mut f3 = [0.0f64; PB];
            for p in 0..PB {
                f3[p] = -2.0 * (f1[p] * f1[p] + t[p] * f2[p]);
                g[3][p] = f2[p] * a3[p] + 0.5 * f3[p] * a1[p] * a1[p];
                g[4][p] = f2[p] * a4[p] + f3[p] * a1[p] * a2[p];
                g[5][p] = f2[p] * a5[p] + 0.5 * f3[p] * a2[p] * a2[p];
            }
            if ORDER >= 3 {
                for p in 0..PB {
                    let f4 = -2.0 * (3.0 * f1[p] * f2[p] + t[p] * f3[p]);
                    let s4 = f4 / 6.0;
                    g[6][p] = f2[p] * src[6 * PB + p]
                        + f3[p] * a1[p] * a3[p]
                        + s4 * a1[p] * a1[p] * a1[p];
                    g[7][p] = f2[p] * src[7 * PB + p]
                        + f3[p] * (a1[p] * a4[p] + a2[p] * a3[p])
                        + 3.0 * s4 * a1[p] * a1[p] * a2[p];
                    g[8][p] = f2[p] * src[8 * PB + p]
                        + f3[p] * (a1[p] * a5[p] + a2[p] * a4[p])
                        + 3.0 * s4 * a1[p] * a2[p] * a2[p];
                    g[9][p] = f2[p] * src[9 * PB + p]
                        + f3[p] * a2[p] * a5[p]
                        + s4 * a2[p] * a2[p] * a2[p];
                }
            }
        }
    }
    // transposed truncated product by g
    let mut w = [[0.0f64; PB]; MAX_COEFFS];
    for c in 0..nc {
        w[c] = lane(adj, c);
    }
    match ORDER {
        0 => {
            for p in 0..PB {
                adj[p] = w[0][p] * g[0][p];
            }
        }
        1 => {
            for p in 0..PB {
                adj[p] = w[0][p] * g[0][p] + w[1][p] * g[1][p] + w[2][p] * g[2][p];
                adj[PB + p] = w[1][p] * g[0][p];
                adj[2 * PB + p] = w[2][p] * g[0][p];
            }
        }
        2 => {
            for p in 0..PB {
                adj[p] = (0..6).map(|c| w[c][p] * g[c][p]).sum();
                adj[PB + p] = w[1][p] * g[0][p] + w[3][p] * g[1][p] + w[4][p] * g[2][p];
                adj[2 * PB + p] = w[2][p] * g[0][p] + w[4][p] * g[1][p] + w[5][p] * g[2][p];
                adj[3 * PB + p] = w[3][p] * g[0][p];
                adj[4 * PB + p] = w[4][p] * g[0][p];
                adj[5 * PB + p] = w[5][p] * g[0][p];
            }
        }
        3 => {
            for p in 0..PB {
                adj[p] = (0..10).map(|c| w[c][p] * g[c][p]).sum();
                adj[PB + p] = w[1][p] * g[0][p]
                    + w[3][p] * g[1][p]
                    + w[4][p] * g[2][p]
                    + w[6][p] * g[3][p]
                    + w[7][p] * g[4][p]
                    + w[8][p] * g[5][p];
                adj[2 * PB + p] = w[2][p] * g[0][p]
                    + w[4][p] * g[1][p]
                    + w[5][p] * g[2][p]
                    + w[7][p] * g[3][p]
                    + w[8][p] * g[4][p]
                    + w[9][p] * g[5][p];
                adj[3 * PB + p] = w[3][p] * g[0][p] + w[6][p] * g[1][p] + w[7][p] * g[2][p];
                adj[4 * PB + p] = w[4][p] * g[0][p] + w[7][p] * g[1][p] + w[8][p] * g[2][p];
                adj[5 * PB + p] = w[5][p] * g[0][p] + w[8][p] * g[1][p] + w[9][p] * g[2][p];
                adj[6 * PB + p] = w[6][p] * g[0][p];
                adj[7 * PB + p] = w[7][p] * g[0][p];
                adj[8 * PB + p] = w[8][p] * g[0][p];
                adj[9 * PB + p] = w[9][p] * g[0][p];
            }
        }
        _ => unreachable!(),
    }
}

fn tanh_forward_2d<const ORDER: usize>(pre: &[f64], post: &mut [f64]) {
    let tile = n_coeffs(2, ORDER) * PB;
    post.par_chunks_mut(CHUNK_BLOCKS * 8 * tile)
        .zip(pre.par_chunks(CHUNK_BLOCKS * 8 * tile))
        .for_each(|(po, pr)| {
            for (dst, src) in po.chunks_exact_mut(tile).zip(pr.chunks_exact(tile)) {
                tanh_fwd_2d_tile::<ORDER>(src, dst);
            }
        });
}

fn tanh_backward_2d<const ORDER: usize>(pre: &[f64], post: &[f64], adj: &mut [f64]) {
    let tile = n_coeffs(2, ORDER) * PB;
    adj.par_chunks_mut(CHUNK_BLOCKS * 8 * tile)
        .zip(
            pre.par_chunks(CHUNK_BLOCKS * 8 * tile)
                .zip(post.par_chunks(CHUNK_BLOCKS * 8 * tile)),
        )
        .for_each(|(ad, (pr, po))| {
            for ((a, src), out) in ad
                .chunks_exact_mut(tile)
                .zip(pr.chunks_exact(tile))
                .zip(po.chunks_exact(tile))
            {
                tanh_bwd_2d_tile::<ORDER>(src, out, a);
            }
        });
}

/// Gather one lane's jet, run the table-driven composition, scatter back.
fn tanh_forward_generic(dim: usize, order: usize, pre: &[f64], post: &mut [f64]) {
    let nc = n_coeffs(dim, order);
    let tile = nc * PB;
    for (dst, src) in post.chunks_exact_mut(tile).zip(pre.chunks_exact(tile)) {
        let mut a = [0.0f64; MAX_COEFFS];
        let mut out = [0.0f64; MAX_COEFFS];
        for p in 0..PB {
            for c in 0..nc {
                a[c] = src[c * PB + p];
            }
            let derivs = Activation::Tanh.derivs(a[0]);
            compose(dim, order, &a[..nc], &derivs, &mut out[..nc]);
            for c in 0..nc {
                dst[c * PB + p] = out[c];
            }
        }
    }
}

fn tanh_backward_generic(
    dim: usize,
    order: usize,
    table: &[MulEntry],
    pre: &[f64],
    adj: &mut [f64],
) {
    let nc = n_coeffs(dim, order);
    let tile = nc * PB;
    for (a, src) in adj.chunks_exact_mut(tile).zip(pre.chunks_exact(tile)) {
        let mut z = [0.0f64; MAX_COEFFS];
        let mut w = [0.0f64; MAX_COEFFS];
        let mut g = [0.0f64; MAX_COEFFS];
        let mut out = [0.0f64; MAX_COEFFS];
        for p in 0..PB {
            for c in 0..nc {
                z[c] = src[c * PB + p];
                w[c] = a[c * PB + p];
            }
            let derivs = Activation::Tanh.derivs(z[0]);
            compose(dim, order, &z[..nc], &derivs[1..], &mut g[..nc]);
            out[..nc].fill(0.0);
            mul_adjoint_acc(table, &w[..nc], &g[..nc], &mut out[..nc]);
            for c in 0..nc {
                a[c * PB + p] = out[c];
            }
        }
    }
}

fn tanh_forward(dim: usize, order: usize, pre: &[f64], post: &mut [f64]) {
    if dim == 2 {
        match order {
            0 => tanh_forward_2d::<0>(pre, post),
            1 => tanh_forward_2d::<1>(pre, post),
            2 => tanh_forward_2d::<2>(pre, post),
            3 => tanh_forward_2d::<3>(pre, post),
            _ => unreachable!(),
        }
    } else {
        tanh_forward_generic(dim, order, pre, post);
    }
}

fn tanh_backward(
    dim: usize,
    order: usize,
    table: &[MulEntry],
    pre: &[f64],
    post: &[f64],
    adj: &mut [f64],
) {
    if dim == 2 {
        match order {
            0 => tanh_backward_2d::<0>(pre, post, adj),
            1 => tanh_backward_2d::<1>(pre, post, adj),
            2 => tanh_backward_2d::<2>(pre, post, adj),
            3 => tanh_backward_2d::<3>(pre, post, adj),
            _ => unreachable!(),
        }
    } else {
        tanh_backward_generic(dim, order, table, pre, adj);
    }
}

// ── Drivers ───────────────────────────────────────────────────────────

/// Propagate a batch of input jets through the network, keeping every
/// intermediate activation for the transpose pass.
///
/// `inputs` is row-major `[n_points][input_dim][nc]`.
pub fn forward_jet_batch(
    spec: &LayerSpec,
    params: &[f64],
    inputs: &[f64],
    n_points: usize,
    order: usize,
) -> BatchRecord {
    let dim = spec.input_dim();
    let nc = n_coeffs(dim, order);
    assert_eq!(inputs.len(), n_points * dim * nc, "packed input length");
    assert_eq!(params.len(), spec.param_len());

    let nb = n_blocks(n_points);
    let blocked_inputs = block_pack(inputs, n_points, dim, nc);

    let offsets = spec.layer_offsets();
    let n_affine = offsets.len();
    let n_hidden = n_affine - 1;
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_hidden);
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(n_hidden);

    for (l, &(w_off, b_off, n_in, n_out)) in offsets.iter().enumerate().take(n_hidden) {
        let src: &[f64] = if l == 0 { &blocked_inputs } else { &post[l - 1] };
        let mut z = vec![0.0; nb * n_out * nc * PB];
        with_nc!(nc, affine_forward(
            &params[w_off..w_off + n_in * n_out],
            &params[b_off..b_off + n_out],
            n_in,
            n_out,
            src,
            &mut z,
        ));
        let mut h = vec![0.0; nb * n_out * nc * PB];
        tanh_forward(dim, order, &z, &mut h);
        pre.push(z);
        post.push(h);
    }

    let (w_off, b_off, n_in, n_out) = offsets[n_affine - 1];
    debug_assert_eq!(n_out, 1);
    let src: &[f64] = if n_hidden == 0 {
        &blocked_inputs
    } else {
        &post[n_hidden - 1]
    };
    let mut out_blocked = vec![0.0; nb * n_out * nc * PB];
    with_nc!(nc, affine_forward(
        &params[w_off..w_off + n_in * n_out],
        &params[b_off..b_off + n_out],
        n_in,
        n_out,
        src,
        &mut out_blocked,
    ));
    let output = block_unpack(&out_blocked, n_points, 1, nc);

    BatchRecord {
        order,
        nc,
        n_points,
        n_blocks: nb,
        inputs: blocked_inputs,
        pre,
        post,
        output,
    }
}

/// Transpose pass: accumulates d(sum_p sum_c out_adj[p,c] * out[p,c])/d(params)
/// into `grad`. When `input_adj` is given it is overwritten with the adjoint
/// of the row-major input jets.
pub fn backward_jet_batch(
    spec: &LayerSpec,
    params: &[f64],
    rec: &BatchRecord,
    out_adj: &[f64],
    grad: &mut [f64],
    mut input_adj: Option<&mut [f64]>,
) {
    let dim = spec.input_dim();
    let (order, nc, n) = (rec.order, rec.nc, rec.n_points);
    assert_eq!(out_adj.len(), n * nc);
    assert_eq!(grad.len(), spec.param_len());
    let table = mul_table(dim, order);
    let nb = rec.n_blocks;

    let offsets = spec.layer_offsets();
    let n_affine = offsets.len();
    let mut adj_cur = block_pack(out_adj, n, 1, nc);

    for l in (0..n_affine).rev() {
        let (w_off, b_off, n_in, n_out) = offsets[l];
        let input_acts: &[f64] = if l == 0 { &rec.inputs } else { &rec.post[l - 1] };
        let (gw, gb) = grad[w_off..b_off + n_out].split_at_mut(n_in * n_out);
        with_nc!(nc, affine_param_grads(n_in, n_out, input_acts, &adj_cur, gw, gb));

        let want_input_adj = l > 0 || input_adj.is_some();
        if !want_input_adj {
            break;
        }
        let mut adj_in = vec![0.0; nb * n_in * nc * PB];
        with_nc!(nc, affine_adjoint_input(
            &params[w_off..w_off + n_in * n_out],
            n_in,
            n_out,
            &adj_cur,
            &mut adj_in,
        ));
        if l == 0 {
            if let Some(ia) = input_adj.take() {
                ia.copy_from_slice(&block_unpack(&adj_in, n, dim, nc));
            }
            break;
        }
        tanh_backward(dim, order, table, &rec.pre[l - 1], &rec.post[l - 1], &mut adj_in);
        adj_cur = adj_in;
    }
}

/// Plain-real forward over many points (prediction grids, slices).
pub fn forward_values(spec: &LayerSpec, params: &[f64], points: &[[f64; 2]]) -> Vec<f64> {
    assert_eq!(spec.input_dim(), 2, "grid evaluation expects 2-D inputs");
    let mut out = vec![0.0; points.len()];
    let widest = spec.sizes().iter().copied().max().unwrap();
    out.par_chunks_mut(CHUNK_BLOCKS * PB)
        .zip(points.par_chunks(CHUNK_BLOCKS * PB))
        .for_each(|(o, pts)| {
            let offsets = spec.layer_offsets();
            let mut cur = vec![[0.0f64; PB]; widest];
            let mut nxt = vec![[0.0f64; PB]; widest];
            for (od, pd) in o.chunks_mut(PB).zip(pts.chunks(PB)) {
                for (p, pt) in pd.iter().enumerate() {
                    cur[0][p] = pt[0];
                    cur[1][p] = pt[1];
                }
                for (l, &(w_off, b_off, n_in, n_out)) in offsets.iter().enumerate() {
                    let hidden = l + 1 < offsets.len();
                    for i in 0..n_out {
                        let row = &params[w_off + i * n_in..w_off + (i + 1) * n_in];
                        let mut acc = [params[b_off + i]; PB];
                        for (j, &wij) in row.iter().enumerate() {
                            let lane = &cur[j];
                            for p in 0..PB {
                                acc[p] += wij * lane[p];
                            }
                        }
                        nxt[i] = if hidden { super::vmath::tanh_lanes(&acc) } else { acc };
                    }
                    std::mem::swap(&mut cur, &mut nxt);
                }
                for (p, dst) in od.iter_mut().enumerate() {
                    *dst = cur[0][p];
                }
            }
        });
    out
}
