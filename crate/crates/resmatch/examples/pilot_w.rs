//! Scratch pilot: weight-shape variants for est1.
use resmatch::criterion::{default_weights, uniform_weights, WeightVector};
use resmatch::experiments::*;
use resmatch::matrix::project_mask;
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::{solve_factorized, SolverConfig};

fn weight_variant(kind: &str, n: usize, r: usize) -> WeightVector {
    match kind {
        "default" => default_weights(n, r).unwrap(),
        "uniform" => uniform_weights(n).unwrap(),
        // half the mass on the top r indices, half uniform on the rest
        "topr" => {
            let head = 0.5 / r as f64;
            let tail = 0.5 / (n - r) as f64;
            WeightVector::new((0..n).map(|i| if i < r { head } else { tail }).collect()).unwrap()
        }
        // top r only, tiny tail
        "sharp" => {
            let head = 0.9 / r as f64;
            let tail = 0.1 / (n - r) as f64;
            WeightVector::new((0..n).map(|i| if i < r { head } else { tail }).collect()).unwrap()
        }
        _ => panic!("unknown kind"),
    }
}

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let kind = args.get(2).map(|s| s.as_str()).unwrap_or("default").to_string();
    let eta_mult: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let iters: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(200);
    let seeds: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(5);
    let n = m / 2;
    let (p, sigma) = (0.2, 1.0f64);
    let case = CaseId::Case1;
    let r = case.rank();
    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights = weight_variant(&kind, n, r);

    let mut efs = vec![];
    for seed in 0..seeds as u64 {
        let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
        let truth = gen_truth(&spec);
        let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
        let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
        let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
        let auto = 0.5 * p * m as f64 / n as f64;
        let cfg = SolverConfig::factorized(r, weights.clone(), reference.clone())
            .with_eta0(auto * eta_mult)
            .with_max_iters(iters);
        let rep = solve_factorized(&y, &mask, &cfg, Some(&truth)).unwrap();
        let ef = rep.trace.last().unwrap().e_f.unwrap();
        // also the minimum along the path, to see if the path ever dips low
        let min_ef = rep
            .trace
            .iter()
            .map(|t| t.e_f.unwrap())
            .fold(f64::INFINITY, f64::min);
        efs.push(ef);
        if seed == 0 {
            println!("seed0 {kind}: final={ef:.4} path_min={min_ef:.4} iters={}", rep.iters_run);
        }
    }
    let mean = efs.iter().sum::<f64>() / efs.len() as f64;
    println!("m={m} kind={kind} mult={eta_mult} iters={iters}: mean_ef={mean:.4} ({seeds} seeds)");
}
