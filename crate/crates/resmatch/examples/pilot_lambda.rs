//! Scratch pilot: error and validation-MSE landscape over lambda for the
//! nuclear methods, one replicate.
use resmatch::baselines::{baseline_nuclear, BaselineConfig};
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
    let which = args.get(2).map(|s| s.as_str()).unwrap_or("base2").to_string();
    let eta: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.0);
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

    // noise edge scale of the step matrix for orientation
    let edge = (p_train).sqrt() * sigma * (1.0 + (n as f64 / m as f64).sqrt()) * (m as f64).sqrt();
    println!("approx noise edge of P(H): {edge:.2}; lambda* guess ~ {:.2}", 2.0 * edge);

    for k in 0..15 {
        let lambda = 2.0 * edge * 10f64.powf(-1.0 + 2.0 * k as f64 / 14.0);
        let (est, iters, conv) = match which.as_str() {
            "base2" => {
                let cfg = BaselineConfig::nuclear(lambda);
                let rep = baseline_nuclear(&y_train, &train_mask, &cfg, None).unwrap();
                (rep.estimate, rep.iters_run, rep.converged)
            }
            _ => {
                let mut cfg = SolverConfig::nuclear(lambda, weights.clone(), reference.clone());
                if eta > 0.0 {
                    cfg = cfg.with_eta0(eta);
                }
                let rep = solve_nuclear(&y_train, &train_mask, &cfg, None).unwrap();
                (rep.estimate, rep.iters_run, rep.converged)
            }
        };
        let ef = metrics(&est, &truth).unwrap().e_f;
        let mut mse = 0.0;
        for &(i, j) in &val {
            let d = est.get(i, j) - y.get(i, j);
            mse += d * d;
        }
        mse /= val.len() as f64;
        println!(
            "lambda={lambda:8.3} e_f={ef:.4} val_mse={mse:.4} iters={iters} conv={conv}"
        );
    }
}
