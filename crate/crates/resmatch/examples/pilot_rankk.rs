//! Scratch pilot: tempered factor flow at various ranks, full data.
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
    let seeds: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let n = m / 2;
    let (p, sigma) = (0.2, 1.0f64);
    let case = CaseId::Case1;
    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights = uniform_weights(n).unwrap();
    for s_used in [4usize, 5, 6, 7, 8, 10, 12] {
        let mut efs = vec![];
        for seed in 0..seeds {
            let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
            let truth = gen_truth(&spec);
            let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
            let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
            let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
            let cfg = SolverConfig::factorized(s_used, weights.clone(), reference.clone());
            let rep = solve_factorized(&y, &mask, &cfg, None).unwrap();
            efs.push(metrics(&rep.estimate, &truth).unwrap().e_f);
        }
        println!(
            "s={s_used:2}: mean e_f = {:.4}",
            efs.iter().sum::<f64>() / efs.len() as f64
        );
    }
}
