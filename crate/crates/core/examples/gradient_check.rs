//! Compares the analytic collaborative gradients with central finite
//! differences of the cost each gradient mode descends.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucrdnet::crrbm::{self, GradientMode, RbmParams, VisibleKind};
use ucrdnet::lsh::BlockPartition;

fn cost(p: &RbmParams, v: &Array2<f64>, vr: &Array2<f64>, part: &BlockPartition, mode: GradientMode) -> f64 {
    let h = crrbm::hidden_probs(p, v.view()).unwrap();
    let hr = crrbm::hidden_probs(p, vr.view()).unwrap();
    let c = crrbm::collaborative_cost(h.view(), hr.view(), part).unwrap();
    match mode {
        GradientMode::RowGroupCentered => c.data_surrogate + c.recon_surrogate,
        GradientMode::ExactBlockCost => c.data + c.recon,
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, m) = (6, 4);
    let mut p = RbmParams::init(m, m, VisibleKind::Binary, &mut rng);
    p.weights.mapv_inplace(|_| rng.random::<f64>() - 0.5);
    let v = Array2::from_shape_fn((n, m), |_| f64::from(u8::from(rng.random::<bool>())));
    let vr = Array2::from_shape_fn((n, m), |_| rng.random::<f64>());
    let part = BlockPartition::new(vec![vec![0, 2, 4], vec![1, 3, 5]], vec![vec![0, 1], vec![2, 3]], n, m).unwrap();

    for mode in [GradientMode::RowGroupCentered, GradientMode::ExactBlockCost] {
        let h = crrbm::hidden_probs(&p, v.view()).unwrap();
        let hr = crrbm::hidden_probs(&p, vr.view()).unwrap();
        let gw = crrbm::grad_collab_w(v.view(), h.view(), vr.view(), hr.view(), &part, mode).unwrap();
        let gb = crrbm::grad_collab_b(h.view(), hr.view(), &part, mode).unwrap();

        let delta = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let mut q = p.clone();
                q.weights[[i, j]] += delta;
                let up = cost(&q, &v, &vr, &part, mode);
                q.weights[[i, j]] -= 2.0 * delta;
                let down = cost(&q, &v, &vr, &part, mode);
                let fd = (up - down) / (2.0 * delta);
                worst = worst.max((fd - gw[[i, j]]).abs() / fd.abs().max(1e-8));
            }
        }
        for j in 0..m {
            let mut q = p.clone();
            q.hidden_bias[j] += delta;
            let up = cost(&q, &v, &vr, &part, mode);
            q.hidden_bias[j] -= 2.0 * delta;
            let down = cost(&q, &v, &vr, &part, mode);
            let fd = (up - down) / (2.0 * delta);
            worst = worst.max((fd - gb[j]).abs() / fd.abs().max(1e-8));
        }
        println!("{mode:?}: worst relative error {worst:.2e}");
    }
}
