//! Multi-index bookkeeping for truncated Taylor jets.
//!
//! Coefficients are stored in graded-lexicographic order, so truncating a jet
//! to a lower order is a prefix slice. For two inputs the layout is
//! `(0,0) | (1,0) (0,1) | (2,0) (1,1) (0,2) | (3,0) (2,1) (1,2) (0,3)`.

use std::sync::OnceLock;

/// Highest input-derivative order the engine supports.
pub const MAX_ORDER: usize = 3;
/// Highest input dimension the engine supports.
pub const MAX_DIM: usize = 2;
/// Coefficient count of the largest supported jet (dim 2, order 3).
pub const MAX_COEFFS: usize = 10;

/// Exponent vector of one coefficient; the second entry is 0 for 1-D jets.
pub type MultiIndex = [u8; 2];

/// Number of coefficients in a jet of the given shape.
pub fn n_coeffs(dim: usize, order: usize) -> usize {
    match dim {
        1 => order + 1,
        2 => (order + 1) * (order + 2) / 2,
        _ => panic!("unsupported jet dimension {dim}"),
    }
}

/// Canonical multi-index list for a jet shape.
pub fn multi_indices(dim: usize, order: usize) -> &'static [MultiIndex] {
    assert!(dim >= 1 && dim <= MAX_DIM && order <= MAX_ORDER);
    static TABLES: OnceLock<Vec<Vec<MultiIndex>>> = OnceLock::new();
    let all = TABLES.get_or_init(|| {
        let mut per_shape = Vec::new();
        for dim in 1..=MAX_DIM {
            for order in 0..=MAX_ORDER {
                let mut list = Vec::new();
                for deg in 0..=order as u8 {
                    if dim == 1 {
                        list.push([deg, 0]);
                    } else {
                        for ax in (0..=deg).rev() {
                            list.push([ax, deg - ax]);
                        }
                    }
                }
                per_shape.push(list);
            }
        }
        per_shape
    });
    &all[(dim - 1) * (MAX_ORDER + 1) + order]
}

/// Position of a multi-index within the canonical layout.
pub fn index_of(dim: usize, order: usize, mi: MultiIndex) -> usize {
    multi_indices(dim, order)
        .iter()
        .position(|&m| m == mi)
        .unwrap_or_else(|| panic!("multi-index {mi:?} not present at dim {dim} order {order}"))
}

/// alpha! for converting a stored coefficient into the derivative it encodes.
pub fn mi_factorial(mi: MultiIndex) -> f64 {
    const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
    FACT[mi[0] as usize] * FACT[mi[1] as usize]
}

/// One `out[k] += a[i] * b[j]` entry of a truncated product.
pub type MulEntry = (u16, u16, u16);

/// Truncated-product table: all coefficient pairs whose degrees still fit.
pub fn mul_table(dim: usize, order: usize) -> &'static [MulEntry] {
    static TABLES: OnceLock<Vec<Vec<MulEntry>>> = OnceLock::new();
    let all = TABLES.get_or_init(|| {
        let mut per_shape = Vec::new();
        for dim in 1..=MAX_DIM {
            for order in 0..=MAX_ORDER {
                let mis = multi_indices(dim, order);
                let mut entries = Vec::new();
                for (i, a) in mis.iter().enumerate() {
                    for (j, b) in mis.iter().enumerate() {
                        let sum = [a[0] + b[0], a[1] + b[1]];
                        if (sum[0] + sum[1]) as usize <= order {
                            let k = index_of(dim, order, sum);
                            entries.push((i as u16, j as u16, k as u16));
                        }
                    }
                }
                per_shape.push(entries);
            }
        }
        per_shape
    });
    &all[(dim - 1) * (MAX_ORDER + 1) + order]
}

/// One `out[dst] += factor * a[src]` entry of the derivative operator.
pub type DeriveEntry = (u16, u16, f64);

/// Table for d/dx_axis: maps an order-`order` jet onto an order-`order-1` jet.
pub fn derive_table(dim: usize, order: usize, axis: usize) -> &'static [DeriveEntry] {
    assert!(order >= 1, "cannot differentiate an order-0 jet");
    assert!(axis < dim);
    static TABLES: OnceLock<Vec<Vec<DeriveEntry>>> = OnceLock::new();
    let all = TABLES.get_or_init(|| {
        let mut per_shape = Vec::new();
        for dim in 1..=MAX_DIM {
            for order in 1..=MAX_ORDER {
                for axis in 0..dim {
                    let out_mis = multi_indices(dim, order - 1);
                    let mut entries = Vec::new();
                    for (dst, beta) in out_mis.iter().enumerate() {
                        let mut src_mi = *beta;
                        src_mi[axis] += 1;
                        let src = index_of(dim, order, src_mi);
                        entries.push((src as u16, dst as u16, (beta[axis] + 1) as f64));
                    }
                    per_shape.push(entries);
                }
            }
        }
        per_shape
    });
    // dim 1 contributes MAX_ORDER tables (one axis), dim 2 contributes 2 per order.
    let base = if dim == 1 { 0 } else { MAX_ORDER };
    let idx = base + (order - 1) * dim + axis;
    &all[idx]
}
