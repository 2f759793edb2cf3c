//! Scratch pilot: full completion cell with all four methods.
use resmatch::experiments::*;

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let reps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(10);
    let sigma: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let case = CaseId::Case1;
    let spec = SimulationSpec::new(case, m, m / 2, 0.2, sigma, 0).unwrap();
    let opts = HarnessOptions {
        replicates: reps,
        master_seed: 99,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let cell = completion_cell(spec, case.rank(), &Method::ALL, &opts).unwrap();
    println!("R={:.3} time={:.1}s", cell.mean_noise_ratio, t0.elapsed().as_secs_f64());
    for ms in &cell.methods {
        println!(
            "{:<11} e_f={:.4} (±{:.4})",
            ms.method.as_str(),
            ms.e_f.mean,
            ms.e_f.stderr
        );
    }
}
