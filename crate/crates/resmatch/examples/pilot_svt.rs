//! Scratch pilot: one-shot SVT of p^-1 Y as the nuclear baseline candidate.
use resmatch::decomp::{soft_threshold, svd};
use resmatch::experiments::*;
use resmatch::matrix::project_mask;
use resmatch::seeding::{derive_seed, stream};

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
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
    let f = svd(&y_train.scale(1.0 / train_mask.p_hat())).unwrap();
    println!("top svals of p^-1 Y_train: {:?}", &f.s[..8].iter().map(|x| (x*10.0).round()/10.0).collect::<Vec<_>>());
    for k in 0..18 {
        let lambda = 10.0 * 10f64.powf(1.5 * k as f64 / 17.0); // 10 .. ~316
        let est = soft_threshold(&f, lambda / 2.0);
        let ef = metrics(&est, &truth).unwrap().e_f;
        let mut mse = 0.0;
        for &(i, j) in &val {
            let d = est.get(i, j) - y.get(i, j);
            mse += d * d;
        }
        mse /= val.len() as f64;
        let kept = f.s.iter().filter(|&&s| s > lambda / 2.0).count();
        println!("lambda={lambda:7.2} kept={kept:3} e_f={ef:.4} val_mse={mse:.4}");
    }
}
