//! Scratch pilot: does the spectral-matching factor iteration improve or
//! degrade when started from a good point (LS solution / truth)?
use resmatch::baselines::{baseline_factorized, BaselineConfig};
use resmatch::criterion::{default_weights, spectral_loss_from_singulars, working_sigma};
use resmatch::decomp::{matmul, matmul_at, matmul_bt, singular_values, svd};
use resmatch::experiments::*;
use resmatch::matrix::{project_mask, DenseMatrix};
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::pseudo_gradient;

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let start = args.get(2).map(|s| s.as_str()).unwrap_or("base1").to_string();
    let eta: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let iters: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(120);
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

    let init: DenseMatrix = match start.as_str() {
        "truth" => truth.clone(),
        "base1" => {
            let cfg = BaselineConfig::factorized(r);
            let rep = baseline_factorized(&y, &mask, &cfg, None).unwrap();
            println!("base1 e_f = {:.4}", metrics(&rep.estimate, &truth).unwrap().e_f);
            rep.estimate
        }
        _ => panic!(),
    };

    // split factors of the starting point
    let f = svd(&init).unwrap();
    let mut left = DenseMatrix::from_fn(m, r, |i, j| f.u.get(i, j) * f.s[j].sqrt());
    let mut right = DenseMatrix::from_fn(n, r, |i, j| f.v.get(i, j) * f.s[j].sqrt());
    let mut current = matmul_bt(&left, &right).unwrap();

    for it in 0..=iters {
        let resid = y.sub(&project_mask(&current, &mask).unwrap()).unwrap();
        let fr = svd(&resid).unwrap();
        let sig = working_sigma(&fr.s, &reference).unwrap();
        let loss = spectral_loss_from_singulars(&fr.s, &reference, &weights, mask.p_hat())
            .unwrap()
            .loss;
        if it % (iters / 12).max(1) == 0 {
            let ef = metrics(&current, &truth).unwrap().e_f;
            // alignment of the step direction with the error direction
            let g = pseudo_gradient(&fr, sig, &reference, &weights, &mask).unwrap();
            let err_dir = truth.sub(&current).unwrap();
            let dot: f64 = g
                .data()
                .iter()
                .zip(err_dir.data())
                .map(|(a, b)| a * b)
                .sum();
            let align = dot / (g.frobenius_norm() * err_dir.frobenius_norm()).max(1e-30);
            println!(
                "it {it:3} e_f={ef:.4} loss={loss:.5} sig={sig:.4} align(G,M0-M)={align:+.3}"
            );
        }
        let g = pseudo_gradient(&fr, sig, &reference, &weights, &mask).unwrap();
        let gl = matmul(&g, &right).unwrap();
        let gr = matmul_at(&g, &left).unwrap();
        let new_left = DenseMatrix::from_fn(m, r, |i, j| left.get(i, j) + eta * gl.get(i, j));
        let new_right = DenseMatrix::from_fn(n, r, |i, j| right.get(i, j) + eta * gr.get(i, j));
        left = new_left;
        right = new_right;
        current = matmul_bt(&left, &right).unwrap();
        let _ = singular_values(&current);
    }
}
