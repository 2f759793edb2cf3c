//! Scratch pilot: est1 flow with the update direction left unmasked.
use resmatch::criterion::{default_weights, spectral_loss_from_singulars, working_sigma};
use resmatch::decomp::{matmul, matmul_at, matmul_bt, reconstruct_scaled, svd};
use resmatch::experiments::*;
use resmatch::matrix::{project_mask, DenseMatrix};
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let eta: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let iters: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(300);
    let n = m / 2;
    let (p, sigma) = (0.2, 1.0f64);
    let case = CaseId::Case1;
    let r = case.rank();
    let seed = 0u64;
    let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
    let truth = gen_truth(&spec);
    let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
    let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
    let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights = default_weights(n, r).unwrap();

    let f0 = svd(&y.scale(1.0 / mask.p_hat())).unwrap();
    let mut left = DenseMatrix::from_fn(m, r, |i, j| f0.u.get(i, j) * f0.s[j].sqrt());
    let mut right = DenseMatrix::from_fn(n, r, |i, j| f0.v.get(i, j) * f0.s[j].sqrt());
    let mut current = matmul_bt(&left, &right).unwrap();
    let mut best = f64::INFINITY;

    for it in 0..=iters {
        let resid = y.sub(&project_mask(&current, &mask).unwrap()).unwrap();
        let fr = svd(&resid).unwrap();
        let sig = working_sigma(&fr.s, &reference).unwrap();
        let ef = metrics(&current, &truth).unwrap().e_f;
        best = best.min(ef);
        if it % (iters / 12).max(1) == 0 {
            let loss = spectral_loss_from_singulars(&fr.s, &reference, &weights, mask.p_hat())
                .map(|b| b.loss)
                .unwrap_or(f64::NAN);
            println!("it {it:3} e_f={ef:.4} loss={loss:.5} sig={sig:.4}");
        }
        // unmasked pseudo-gradient direction
        let sqrt_m = (m as f64).sqrt();
        let coefs: Vec<f64> = (0..n)
            .map(|i| {
                weights.values()[i] * (fr.s[i] - sqrt_m * sig * reference.lambda_hat()[i])
                    / (sqrt_m * sig)
            })
            .collect();
        let g = reconstruct_scaled(&fr.u, &coefs, &fr.v, n);
        let gl = matmul(&g, &right).unwrap();
        let gr = matmul_at(&g, &left).unwrap();
        left = DenseMatrix::from_fn(m, r, |i, j| left.get(i, j) + eta * gl.get(i, j));
        right = DenseMatrix::from_fn(n, r, |i, j| right.get(i, j) + eta * gr.get(i, j));
        current = matmul_bt(&left, &right).unwrap();
    }
    println!("unmasked eta={eta}: path-min e_f = {best:.4}");
}
