//! Scratch pilot: soft-impute with top-edge spectral tempering.
use resmatch::criterion::working_sigma;
use resmatch::decomp::{reconstruct_scaled, singular_values, soft_threshold, svd};
use resmatch::experiments::*;
use resmatch::matrix::{project_mask, DenseMatrix};
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let deflation: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.93);
    let k_top: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(20);
    let n = m / 2;
    let (p, sigma) = (0.2, 1.0f64);
    let case = CaseId::Case1;
    let seed = 0u64;
    let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
    let truth = gen_truth(&spec);
    let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
    let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
    let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
    let (train_mask, val) = split_mask(&mask, 0.8, derive_seed(seed, stream::SPLIT)).unwrap();
    let y_train = project_mask(&y, &train_mask).unwrap();
    let p_train = train_mask.p_hat();
    let reference = estimate_reference(m, n, p_train, 32, 777).unwrap();
    let sqrt_m = (m as f64).sqrt();

    for k in 0..12 {
        let lambda = 0.5 * 10f64.powf(-1.0 + 2.5 * k as f64 / 11.0) * (m as f64 * p_train).sqrt();
        let f0 = svd(&y_train.scale(1.0 / p_train)).unwrap();
        let mut current = soft_threshold(&f0, lambda / 2.0);
        let mut iters = 0;
        for _ in 0..200 {
            iters += 1;
            let resid = y_train
                .sub(&project_mask(&current, &train_mask).unwrap())
                .unwrap();
            let fr = svd(&resid).unwrap();
            let sig = match working_sigma(&fr.s, &reference) {
                Ok(s) => s,
                Err(_) => break,
            };
            let coefs: Vec<f64> = (0..n)
                .map(|i| {
                    if i < k_top {
                        fr.s[i] - deflation * sig * sqrt_m * reference.lambda_hat()[i]
                    } else {
                        fr.s[i]
                    }
                })
                .collect();
            let mut step = reconstruct_scaled(&fr.u, &coefs, &fr.v, n);
            for i in 0..m {
                for j in 0..n {
                    if !train_mask.is_observed(i, j) {
                        step.set(i, j, 0.0);
                    }
                }
            }
            let stepped = current.add(&step).unwrap();
            let fs = svd(&stepped).unwrap();
            let cand = soft_threshold(&fs, lambda / 2.0);
            let change = cand.sub(&current).unwrap().frobenius_norm()
                / current.frobenius_norm().max(1e-30);
            current = cand;
            if change < 1e-4 {
                break;
            }
        }
        let ef = metrics(&current, &truth).unwrap().e_f;
        let mut mse = 0.0;
        for &(i, j) in &val {
            let d = current.get(i, j) - y.get(i, j);
            mse += d * d;
        }
        mse /= val.len() as f64;
        let rank = singular_values(&current)
            .unwrap()
            .iter()
            .filter(|&&s| s > 1e-6)
            .count();
        println!(
            "lambda={lambda:8.3} e_f={ef:8.4} val_mse={mse:8.4} rank={rank:3} iters={iters}"
        );
    }
}
