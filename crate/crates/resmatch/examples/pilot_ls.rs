//! Scratch pilot: line search on/off for the tempered solver.
use resmatch::criterion::uniform_weights;
use resmatch::experiments::*;
use resmatch::matrix::project_mask;
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::{solve_factorized, SolverConfig};

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let ls: bool = args.get(2).map(|s| s == "on").unwrap_or(true);
    let seeds: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(3);
    let n = m / 2;
    let (p, sigma) = (0.2, 1.0f64);
    let case = CaseId::Case1;
    let r = case.rank();
    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights = uniform_weights(n).unwrap();
    let mut efs = vec![];
    let t0 = std::time::Instant::now();
    for seed in 0..seeds {
        let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
        let truth = gen_truth(&spec);
        let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
        let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
        let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
        let cfg = SolverConfig::factorized(r, weights.clone(), reference.clone())
            .with_line_search(ls);
        let rep = solve_factorized(&y, &mask, &cfg, None).unwrap();
        let ef = metrics(&rep.estimate, &truth).unwrap().e_f;
        if seed == 0 {
            println!(
                "seed0: e_f={ef:.4} iters={} conv={} last_step={:.2e} last_rel={:.2e}",
                rep.iters_run,
                rep.converged,
                rep.trace.last().map(|t| t.step).unwrap_or(0.0),
                rep.trace.last().map(|t| t.rel_change).unwrap_or(0.0)
            );
        }
        efs.push(ef);
    }
    println!(
        "ls={ls}: mean e_f = {:.4} ({:.1}s)",
        efs.iter().sum::<f64>() / efs.len() as f64,
        t0.elapsed().as_secs_f64()
    );
}
