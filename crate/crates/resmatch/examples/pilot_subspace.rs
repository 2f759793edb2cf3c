//! Scratch pilot: subspace misalignment accounting for the 0.76 plateau.
use resmatch::baselines::{baseline_factorized, BaselineConfig};
use resmatch::criterion::{default_weights, working_sigma};
use resmatch::decomp::{matmul, matmul_at, matmul_bt, svd};
use resmatch::experiments::*;
use resmatch::matrix::{project_mask, DenseMatrix};
use resmatch::reference::estimate_reference;
use resmatch::seeding::{derive_seed, stream};
use resmatch::solvers::pseudo_gradient;

fn dist(u: &DenseMatrix, u0: &DenseMatrix, r: usize) -> f64 {
    // || (I - U0 U0^T) U ||_F over the first r columns
    let ur = DenseMatrix::from_fn(u.rows(), r, |i, j| u.get(i, j));
    let u0r = DenseMatrix::from_fn(u0.rows(), r, |i, j| u0.get(i, j));
    let proj = matmul(&u0r, &matmul_at(&u0r, &ur).unwrap()).unwrap();
    ur.sub(&proj).unwrap().frobenius_norm()
}

fn values(m_mat: &DenseMatrix, r: usize) -> Vec<f64> {
    svd(m_mat).unwrap().s[..r].iter().map(|x| (x * 10.0).round() / 10.0).collect()
}

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let m = 300usize;
    let n = 150usize;
    let (p, sigma) = (0.2, 1.0f64);
    let case = CaseId::Case1;
    let r = case.rank();
    let seed = 0u64;
    let spec = SimulationSpec::new(case, m, n, p, sigma, derive_seed(seed, stream::TRUTH)).unwrap();
    let truth = gen_truth(&spec);
    let noise = gen_noise(m, n, sigma, derive_seed(seed, stream::NOISE));
    let mask = gen_mask(m, n, p, derive_seed(seed, stream::MASK)).unwrap();
    let y = project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
    let reference = estimate_reference(m, n, p, 32, 777).unwrap();
    let weights = default_weights(n, r).unwrap();
    let ft = svd(&truth).unwrap();
    println!("truth values: {:?}", values(&truth, r));

    let f0 = svd(&y.scale(1.0 / mask.p_hat())).unwrap();
    let init = matmul_bt(
        &DenseMatrix::from_fn(m, r, |i, j| f0.u.get(i, j) * f0.s[j].sqrt()),
        &DenseMatrix::from_fn(n, r, |i, j| f0.v.get(i, j) * f0.s[j].sqrt()),
    )
    .unwrap();
    let fi = svd(&init).unwrap();
    println!(
        "init:  e_f={:.4} dU={:.3} dV={:.3} values={:?}",
        metrics(&init, &truth).unwrap().e_f,
        dist(&fi.u, &ft.u, r),
        dist(&fi.v, &ft.v, r),
        values(&init, r)
    );

    // est1 flow, eta 0.2, 300 its
    let mut left = DenseMatrix::from_fn(m, r, |i, j| f0.u.get(i, j) * f0.s[j].sqrt());
    let mut right = DenseMatrix::from_fn(n, r, |i, j| f0.v.get(i, j) * f0.s[j].sqrt());
    let mut current = matmul_bt(&left, &right).unwrap();
    for _ in 0..300 {
        let resid = y.sub(&project_mask(&current, &mask).unwrap()).unwrap();
        let fr = svd(&resid).unwrap();
        let sig = working_sigma(&fr.s, &reference).unwrap();
        let g = pseudo_gradient(&fr, sig, &reference, &weights, &mask).unwrap();
        let gl = matmul(&g, &right).unwrap();
        let gr = matmul_at(&g, &left).unwrap();
        left = DenseMatrix::from_fn(m, r, |i, j| left.get(i, j) + 0.2 * gl.get(i, j));
        right = DenseMatrix::from_fn(n, r, |i, j| right.get(i, j) + 0.2 * gr.get(i, j));
        current = matmul_bt(&left, &right).unwrap();
    }
    let fe = svd(&current).unwrap();
    println!(
        "est1:  e_f={:.4} dU={:.3} dV={:.3} values={:?}",
        metrics(&current, &truth).unwrap().e_f,
        dist(&fe.u, &ft.u, r),
        dist(&fe.v, &ft.v, r),
        values(&current, r)
    );

    let brep = baseline_factorized(&y, &mask, &BaselineConfig::factorized(r), None).unwrap();
    let fb = svd(&brep.estimate).unwrap();
    println!(
        "base1: e_f={:.4} dU={:.3} dV={:.3} values={:?}",
        metrics(&brep.estimate, &truth).unwrap().e_f,
        dist(&fb.u, &ft.u, r),
        dist(&fb.v, &ft.v, r),
        values(&brep.estimate, r)
    );
}
