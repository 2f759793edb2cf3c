//! Scratch pilot: top-only weight support for est1.
use resmatch::criterion::{spectral_loss_from_singulars, working_sigma, WeightVector};
use resmatch::decomp::{matmul, matmul_at, matmul_bt, svd};
use resmatch::experiments::*;
use resmatch::matrix::{project_mask, DenseMatrix};
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::pseudo_gradient;

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let k_top: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20);
    let eta: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let iters: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(200);
    let seeds: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(3);
    let n = m / 2;
    let (p, sigma) = (0.2, 1.0f64);
    let case = CaseId::Case1;
    let r = case.rank();
    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights =
        WeightVector::new((0..n).map(|i| if i < k_top { 1.0 / k_top as f64 } else { 0.0 }).collect())
            .unwrap();

    let mut finals = vec![];
    for seed in 0..seeds as u64 {
        let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
        let truth = gen_truth(&spec);
        let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
        let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
        let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
        let f0 = svd(&y.scale(1.0 / mask.p_hat())).unwrap();
        let mut left = DenseMatrix::from_fn(m, r, |i, j| f0.u.get(i, j) * f0.s[j].sqrt());
        let mut right = DenseMatrix::from_fn(n, r, |i, j| f0.v.get(i, j) * f0.s[j].sqrt());
        let mut current = matmul_bt(&left, &right).unwrap();
        for it in 0..=iters {
            let resid = y.sub(&project_mask(&current, &mask).unwrap()).unwrap();
            let fr = svd(&resid).unwrap();
            let sig = working_sigma(&fr.s, &reference).unwrap();
            if seed == 0 && it % (iters / 10).max(1) == 0 {
                let loss = spectral_loss_from_singulars(&fr.s, &reference, &weights, mask.p_hat())
                    .unwrap()
                    .loss;
                let ef = metrics(&current, &truth).unwrap().e_f;
                println!("it {it:3} e_f={ef:.4} loss={loss:.6} sig={sig:.4}");
            }
            let g = pseudo_gradient(&fr, sig, &reference, &weights, &mask).unwrap();
            let gl = matmul(&g, &right).unwrap();
            let gr = matmul_at(&g, &left).unwrap();
            left = DenseMatrix::from_fn(m, r, |i, j| left.get(i, j) + eta * gl.get(i, j));
            right = DenseMatrix::from_fn(n, r, |i, j| right.get(i, j) + eta * gr.get(i, j));
            current = matmul_bt(&left, &right).unwrap();
        }
        finals.push(metrics(&current, &truth).unwrap().e_f);
    }
    println!(
        "m={m} k_top={k_top} eta={eta} iters={iters}: mean_ef={:.4}",
        finals.iter().sum::<f64>() / finals.len() as f64
    );
}
