//! Rough throughput probe for the batched jet kernels.
//!
//! ```sh
//! cargo run --release -p idpinn-core --example kernel_probe
//! ```

use idpinn_core::autodiff::index::n_coeffs;
use idpinn_core::network::{backward_jet_batch, forward_jet_batch, init_xavier, LayerSpec};
use std::time::Instant;

fn main() {
    for (hidden, width, n_pts, order) in [(5usize, 55usize, 6000usize, 2usize), (4, 20, 1300, 2), (9, 20, 4400, 2)] {
        let spec = LayerSpec::uniform(2, hidden, width).unwrap();
        let params = init_xavier(&spec, 0);
        let nc = n_coeffs(2, order);
        let mut packed = vec![0.0; n_pts * 2 * nc];
        for p in 0..n_pts {
            for axis in 0..2 {
                let base = (p * 2 + axis) * nc;
                packed[base] = (p as f64 * 0.37 + axis as f64).sin();
                packed[base + 1 + axis] = 1.0;
            }
        }
        let macs: usize = spec
            .sizes()
            .windows(2)
            .map(|w| w[0] * w[1])
            .sum();
        let flops_per_iter = (3 * macs * nc * 2 * n_pts) as f64;

        // warmup + timed loop
        let mut grad = vec![0.0; spec.param_len()];
        let out_adj = vec![1.0; n_pts * nc];
        let reps = 10;
        let t0 = Instant::now();
        for _ in 0..reps {
            let rec = forward_jet_batch(&spec, &params.values, &packed, n_pts, order);
            grad.iter_mut().for_each(|g| *g = 0.0);
            backward_jet_batch(&spec, &params.values, &rec, &out_adj, &mut grad, None);
        }
        let dt = t0.elapsed().as_secs_f64() / reps as f64;
        println!(
            "net [2,{width}x{hidden},1]  pts={n_pts} order={order}: {:.1} ms/iter  ~{:.1} Gflop/s",
            dt * 1e3,
            flops_per_iter / dt / 1e9
        );
    }
}
