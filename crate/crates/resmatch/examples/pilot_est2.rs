//! Scratch pilot: est2 landscape at criterion-scale lambda.
use resmatch::criterion::default_weights;
use resmatch::experiments::*;
use resmatch::matrix::project_mask;
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::{solve_nuclear, SolverConfig};

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let gamma: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.25);
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
    let (train_mask, val) = split_mask(&mask, 0.8, derive_seed(seed, stream::SPLIT)).unwrap();
    let y_train = project_mask(&y, &train_mask).unwrap();
    let p_train = train_mask.p_hat();
    let reference = estimate_reference(m, n, p_train, 32, 777).unwrap();
    let weights = default_weights(n, r).unwrap();
    let omega_max = weights.values().iter().cloned().fold(0.0, f64::max);
    let eta = gamma * (m as f64).sqrt() * sigma / (p_train * omega_max);
    println!("eta = {eta:.1} (gamma={gamma})");

    for k in 0..16 {
        let lambda = 0.25 * 10f64.powf(-2.5 + 4.0 * k as f64 / 15.0);
        let cfg = SolverConfig::nuclear(lambda, weights.clone(), reference.clone())
            .with_eta0(eta);
        let rep = solve_nuclear(&y_train, &train_mask, &cfg, None).unwrap();
        let ef = metrics(&rep.estimate, &truth).unwrap().e_f;
        let mut mse = 0.0;
        for &(i, j) in &val {
            let d = rep.estimate.get(i, j) - y.get(i, j);
            mse += d * d;
        }
        mse /= val.len() as f64;
        let rank = resmatch::decomp::singular_values(&rep.estimate)
            .unwrap()
            .iter()
            .filter(|&&s| s > 1e-6)
            .count();
        println!(
            "lambda={lambda:9.5} e_f={ef:.4} val_mse={mse:.4} rank={rank} iters={} conv={}",
            rep.iters_run, rep.converged
        );
    }
}
