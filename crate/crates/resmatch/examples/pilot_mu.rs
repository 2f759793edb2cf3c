//! Scratch pilot: incoherence along the est1 path from spectral init.
use resmatch::criterion::{default_weights, spectral_loss_from_singulars, working_sigma};
use resmatch::decomp::{incoherence, matmul, matmul_at, matmul_bt, svd};
use resmatch::experiments::*;
use resmatch::matrix::{project_mask, DenseMatrix};
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::pseudo_gradient;

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let eta: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let iters: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(200);
    let dense_ref: bool = args.get(4).map(|s| s == "dense").unwrap_or(false);
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
    let reference = estimate_reference(m, n, if dense_ref { 1.0 } else { p }, 32, 777).unwrap();
    let weights = default_weights(n, r).unwrap();
    println!("mu(truth) = {:.2}", incoherence(&truth, r).unwrap().mu);

    let f0 = svd(&y.scale(1.0 / mask.p_hat())).unwrap();
    let mut left = DenseMatrix::from_fn(m, r, |i, j| f0.u.get(i, j) * f0.s[j].sqrt());
    let mut right = DenseMatrix::from_fn(n, r, |i, j| f0.v.get(i, j) * f0.s[j].sqrt());
    let mut current = matmul_bt(&left, &right).unwrap();

    for it in 0..=iters {
        let resid = y.sub(&project_mask(&current, &mask).unwrap()).unwrap();
        let fr = svd(&resid).unwrap();
        let sig = working_sigma(&fr.s, &reference).unwrap();
        if it % (iters / 12).max(1) == 0 {
            let loss = spectral_loss_from_singulars(&fr.s, &reference, &weights, mask.p_hat())
                .unwrap()
                .loss;
            let ef = metrics(&current, &truth).unwrap().e_f;
            let mu = incoherence(&current, r).unwrap().mu;
            println!("it {it:3} e_f={ef:.4} loss={loss:.5} sig={sig:.4} mu={mu:.2}");
        }
        let g = pseudo_gradient(&fr, sig, &reference, &weights, &mask).unwrap();
        let gl = matmul(&g, &right).unwrap();
        let gr = matmul_at(&g, &left).unwrap();
        left = DenseMatrix::from_fn(m, r, |i, j| left.get(i, j) + eta * gl.get(i, j));
        right = DenseMatrix::from_fn(n, r, |i, j| right.get(i, j) + eta * gr.get(i, j));
        current = matmul_bt(&left, &right).unwrap();
    }
}
