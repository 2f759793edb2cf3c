//! Scratch pilot: factorized solver behavior on the Case-1 completion cell.
//! Run: cargo run --release -p resmatch --example pilot_fac [m] [sigma] [eta_mult] [seeds]

use resmatch::baselines::{baseline_factorized, BaselineConfig};
use resmatch::criterion::default_weights;
use resmatch::experiments::{gen_mask, gen_noise, gen_truth, metrics, noise_ratio, CaseId, SimulationSpec};
use resmatch::matrix::project_mask;
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::{init_spectral, solve_factorized, SolverConfig};

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(500);
    let sigma: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let eta_mult: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let n_seeds: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(5);
    let n = m / 2;
    let p = 0.2;
    let case = CaseId::Case1;
    let r = case.rank();

    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights = default_weights(n, r).unwrap();

    let mut e1 = vec![];
    let mut b1 = vec![];
    let mut inits = vec![];
    for seed in 0..n_seeds as u64 {
        let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
        let truth = gen_truth(&spec);
        let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
        let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
        let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
        let rr = noise_ratio(&noise, spec.sigma_r(), p).unwrap();

        let m0 = init_spectral(&y, &mask, r).unwrap();
        let init_ef = metrics(&m0, &truth).unwrap().e_f;
        inits.push(init_ef);

        // auto eta0 computed inside; override with multiplier via eta0 field
        let sigma0_guess = sigma; // close enough for the pilot multiplier
        let auto = 0.5 * p * m as f64 * sigma0_guess * sigma0_guess / n as f64;
        let mut cfg = SolverConfig::factorized(r, weights.clone(), reference.clone());
        if (eta_mult - 1.0).abs() > 1e-12 {
            cfg = cfg.with_eta0(auto * eta_mult);
        }
        let t0 = std::time::Instant::now();
        let rep = solve_factorized(&y, &mask, &cfg, None).unwrap();
        let ef = metrics(&rep.estimate, &truth).unwrap().e_f;
        e1.push(ef);
        if seed == 0 {
            println!(
                "seed0: R={rr:.3} init_ef={init_ef:.4} est1_ef={ef:.4} iters={} conv={} time={:.2}s",
                rep.iters_run,
                rep.converged,
                t0.elapsed().as_secs_f64()
            );
            for (k, rec) in rep.trace.iter().enumerate() {
                if k % 20 == 0 || k + 1 == rep.trace.len() {
                    println!(
                        "  it {:3} loss={:.5} sig={:.4} step={:.3e} rel={:.2e}",
                        rec.iter, rec.loss, rec.sigma_hat, rec.step, rec.rel_change
                    );
                }
            }
        }

        let bcfg = BaselineConfig::factorized(r);
        let brep = baseline_factorized(&y, &mask, &bcfg, None).unwrap();
        let bf = metrics(&brep.estimate, &truth).unwrap().e_f;
        b1.push(bf);
        if seed == 0 {
            println!(
                "seed0: base1_ef={bf:.4} iters={} conv={} last_step={:.3e}",
                brep.iters_run,
                brep.converged,
                brep.trace.last().map(|r| r.step).unwrap_or(0.0)
            );
        }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "m={m} sigma={sigma} eta_mult={eta_mult}: init={:.4} est1={:.4} base1={:.4} over {n_seeds} seeds",
        mean(&inits),
        mean(&e1),
        mean(&b1)
    );
}
