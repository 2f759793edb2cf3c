//! Scratch pilot: deflation constant vs cell quality.
use resmatch::criterion::uniform_weights;
use resmatch::experiments::*;
use resmatch::matrix::project_mask;
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::{solve_factorized, SolverConfig};
use rayon::prelude::*;

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let c: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.93);
    let reps: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(24);
    let n = m / 2;
    let (p, sigma) = (0.2, 1.0f64);
    let case = CaseId::Case1;
    let r = case.rank();
    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights = uniform_weights(n).unwrap();
    let efs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|seed| {
            let spec =
                SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
            let truth = gen_truth(&spec);
            let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
            let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
            let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
            let cfg = SolverConfig::factorized(r, weights.clone(), reference.clone())
                .with_target_deflation(c);
            let rep = solve_factorized(&y, &mask, &cfg, None).unwrap();
            metrics(&rep.estimate, &truth).unwrap().e_f
        })
        .collect();
    let mean = efs.iter().sum::<f64>() / efs.len() as f64;
    println!("m={m} c={c}: est1 mean e_f = {mean:.4} ({reps} reps)");
}
