//! Scratch pilot: inspect est1 trajectory with truth-tracked errors.
use resmatch::criterion::default_weights;
use resmatch::experiments::*;
use resmatch::matrix::project_mask;
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::{solve_factorized, SolverConfig};

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let eta_mult: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let iters: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(200);
    let n = m / 2;
    let (p, sigma) = (0.2, 1.0);
    let case = CaseId::Case1;
    let r = case.rank();
    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights = default_weights(n, r).unwrap();
    let seed = 0u64;
    let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
    let truth = gen_truth(&spec);
    let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
    let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
    let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
    let auto = 0.5 * p * m as f64 / n as f64; // sigma ~ 1
    let cfg = SolverConfig::factorized(r, weights, reference)
        .with_eta0(auto * eta_mult)
        .with_max_iters(iters)
        .with_tol(1e-7);
    let rep = solve_factorized(&y, &mask, &cfg, Some(&truth)).unwrap();
    println!("iters={} conv={}", rep.iters_run, rep.converged);
    for (k, rec) in rep.trace.iter().enumerate() {
        if k % (iters / 20).max(1) == 0 || k + 1 == rep.trace.len() {
            println!(
                "it {:3} loss={:.5} sig={:.4} step={:.3e} rel={:.2e} e_f={:.4}",
                rec.iter, rec.loss, rec.sigma_hat, rec.step, rec.rel_change,
                rec.e_f.unwrap()
            );
        }
    }
}
