//! Sparse Gaussian reference spectra and random-matrix-theory formulas.
//!
//! The spectral matching criterion compares residual singular values against
//! the expected spectrum of the sparse Gaussian ensemble: entries are
//! `N(0, 1/m)` Gaussians masked by independent Bernoulli(p) coins. The
//! expectation has no convenient closed form, so it is estimated once by
//! Monte Carlo ([`estimate_reference`]) and reused across solver iterations
//! and replicates. This module also carries the Marchenko-Pastur density and
//! the spiked-model signal recovery formula used by the RMT denoiser.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::singular_values;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::seeding::rng_from_seed;

/// Monte Carlo estimate of the expected ordered singular values of the
/// sparse Gaussian ensemble, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReference {
    lambda_hat: Vec<f64>,
    m: usize,
    n: usize,
    p: f64,
    ell: usize,
    seed: u64,
    bulk_sum: f64,
}

impl SpectralReference {
    #[inline]
    pub fn lambda_hat(&self) -> &[f64] {
        &self.lambda_hat
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn ell(&self) -> usize {
        self.ell
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sum of `lambda_hat` over the bulk index range.
    #[inline]
    pub fn bulk_sum(&self) -> f64 {
        self.bulk_sum
    }

    fn validate(&self) -> Result<()> {
        let sorted = self.lambda_hat.windows(2).all(|w| w[0] >= w[1]);
        let nonneg = self.lambda_hat.iter().all(|&x| x >= 0.0);
        if !sorted || !nonneg {
            return Err(Error::InvalidConfig(
                "reference spectrum must be nonincreasing and nonnegative".into(),
            ));
        }
        let rho = self.n as f64 / self.m as f64;
        let ceiling = 2.0 * (1.0 + rho.sqrt()) * self.p.sqrt() + 1.0;
        if self.lambda_hat[0] > ceiling {
            return Err(Error::InvalidConfig(format!(
                "reference edge {:.4} exceeds the sanity ceiling {:.4}",
                self.lambda_hat[0], ceiling
            )));
        }
        if !(self.bulk_sum > 0.0) {
            return Err(Error::InvalidConfig(
                "reference bulk sum must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Bulk index range of an n-point spectrum as 0-based indices:
/// the 1-based inclusive range `ceil(n/3) ..= floor(2n/3)`.
pub fn bulk_range(n: usize) -> std::ops::Range<usize> {
    let lo = n.div_ceil(3); // 1-based start
    let hi = 2 * n / 3; // 1-based end, inclusive
    lo - 1..hi
}

/// One draw from the sparse Gaussian ensemble: `N(0, 1/m)` entries kept with
/// probability `p`, zero otherwise. Deterministic in the seed.
pub fn sample_sparse_gaussian(m: usize, n: usize, p: f64, seed: u64) -> Result<DenseMatrix> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let sd = 1.0 / (m as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        let g: f64 = rng.sample(StandardNormal);
        let keep = p >= 1.0 || rng.random::<f64>() < p;
        data.push(if keep { g * sd } else { 0.0 });
    }
    DenseMatrix::from_vec(m, n, data)
}

/// Default number of Monte Carlo replicates for reference spectra.
pub const DEFAULT_ELL: usize = 32;

/// Monte Carlo estimate of the expected sparse Gaussian spectrum.
///
/// Replicate `i` draws its sample at seed `seed + i`, so parallel and serial
/// runs agree exactly: spectra are accumulated in replicate index order.
pub fn estimate_reference(
    m: usize,
    n: usize,
    p: f64,
    ell: usize,
    seed: u64,
) -> Result<SpectralReference> {
    if n > m || n < 2 {
        return Err(Error::InvalidDimensions(format!(
            "reference requires 2 <= n <= m, got m={m}, n={n}"
        )));
    }
    if ell == 0 {
        return Err(Error::InvalidConfig("ell must be at least 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let spectra: Vec<Result<Vec<f64>>> = (0..ell)
        .into_par_iter()
        .map(|i| {
            let sample = sample_sparse_gaussian(m, n, p, seed + i as u64)?;
            singular_values(&sample)
        })
        .collect();
    let mut lambda_hat = vec![0.0f64; n];
    for spectrum in spectra {
        let spectrum = spectrum?;
        for (acc, s) in lambda_hat.iter_mut().zip(&spectrum) {
            *acc += s;
        }
    }
    for v in &mut lambda_hat {
        *v /= ell as f64;
    }
    let bulk_sum = bulk_range(n).map(|i| lambda_hat[i]).sum();
    let reference = SpectralReference {
        lambda_hat,
        m,
        n,
        p,
        ell,
        seed,
        bulk_sum,
    };
    reference.validate()?;
    Ok(reference)
}

/// Marchenko-Pastur support parameters for singular values of `H/sqrt(m)`
/// when `H` has iid variance-`sigma^2` entries and `rho = n/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpParams {
    pub sigma: f64,
    pub rho: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

impl MpParams {
    pub fn new(sigma: f64, rho: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho must lie in (0, 1], got {rho}"
            )));
        }
        Ok(Self {
            sigma,
            rho,
            lambda_minus: sigma * (1.0 - rho.sqrt()),
            lambda_plus: sigma * (1.0 + rho.sqrt()),
        })
    }
}

/// Limiting density of singular values of `H/sqrt(m)`:
/// `nu(x) = sqrt((l+^2 - x^2)(x^2 - l-^2)) / (pi sigma^2 rho x)` on the
/// support, zero outside.
pub fn mp_density(x: f64, params: &MpParams) -> f64 {
    if x < params.lambda_minus || x > params.lambda_plus || x <= 0.0 {
        return 0.0;
    }
    let lp2 = params.lambda_plus * params.lambda_plus;
    let lm2 = params.lambda_minus * params.lambda_minus;
    let x2 = x * x;
    let inside = (lp2 - x2) * (x2 - lm2);
    if inside <= 0.0 {
        return 0.0;
    }
    inside.sqrt() / (std::f64::consts::PI * params.sigma * params.sigma * params.rho * x)
}

/// CDF of [`mp_density`] by quadrature on the support.
///
/// The density has square-root edges; substituting
/// `x = l- + (l+ - l-) sin^2(t)` makes the integrand smooth in `t`, so a
/// plain Simpson rule converges fast.
pub fn mp_cdf(x: f64, params: &MpParams) -> f64 {
    if x <= params.lambda_minus {
        return 0.0;
    }
    if x >= params.lambda_plus {
        return 1.0;
    }
    mp_mass(params.lambda_minus, x, params).min(1.0)
}

/// Integral of [`mp_density`] over `[a, b]` (clipped to the support), with
/// the edge-desingularizing substitution.
pub fn mp_mass(a: f64, b: f64, params: &MpParams) -> f64 {
    let lo = a.max(params.lambda_minus);
    let hi = b.min(params.lambda_plus);
    if hi <= lo {
        return 0.0;
    }
    let width = params.lambda_plus - params.lambda_minus;
    let to_t = |x: f64| (((x - params.lambda_minus) / width).clamp(0.0, 1.0)).sqrt().asin();
    let (t0, t1) = (to_t(lo), to_t(hi));
    simpson(
        |t| {
            let x = params.lambda_minus + width * t.sin().powi(2);
            mp_density(x, params) * width * (2.0 * t).sin()
        },
        t0,
        t1,
        2000,
    )
}

pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let steps = intervals.max(2) & !1usize; // even
    let h = (b - a) / steps as f64;
    let mut acc = f(a) + f(b);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Recovered signal strength of a spiked singular value.
///
/// Given an observed singular value `sigma_obs` of signal-plus-noise data and
/// a noise-scale estimate `sigma_hat`, inverts the spiked-model forward map.
/// Below the detection edge `sigma_hat (1 + sqrt(rho)) sqrt(m)` (where the
/// inversion turns complex) the recovered value is clamped to zero.
pub fn rmt_signal_value(sigma_obs: f64, sigma_hat: f64, rho: f64, m: usize) -> f64 {
    if sigma_obs <= 0.0 {
        return 0.0;
    }
    let mf = m as f64;
    let s2 = sigma_hat * sigma_hat;
    let edge_sq = s2 * (1.0 + rho.sqrt()).powi(2) * mf;
    let a = sigma_obs * sigma_obs;
    // ulp slack so an input sitting exactly on the edge is not clamped away
    if a < edge_sq * (1.0 - 1e-12) {
        return 0.0;
    }
    let b = s2 * (1.0 + rho) * mf;
    let disc = ((b - a) * (b - a) - 4.0 * s2 * s2 * rho * mf * mf).max(0.0);
    (0.5 * ((a - b) + disc.sqrt())).max(0.0).sqrt()
}

// --- on-disk cache -------------------------------------------------------

/// Serializes a reference spectrum as CSV: a `# m,n,p,ell,seed` header line
/// followed by one `index,lambda_hat` row per singular value.
pub fn write_reference_csv(reference: &SpectralReference, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    out.push_str(&format!(
        "# {},{},{},{},{}\n",
        reference.m, reference.n, reference.p, reference.ell, reference.seed
    ));
    for (i, v) in reference.lambda_hat.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_reference_csv(path: &std::path::Path) -> Result<SpectralReference> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: display.clone(),
        line: 1,
        msg: "empty reference file".into(),
    })?;
    let header = header.trim_start_matches('#').trim();
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 5 {
        return Err(Error::Parse {
            path: display,
            line: 1,
            msg: "expected header `# m,n,p,ell,seed`".into(),
        });
    }
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let m: usize = fields[0]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad m: {e}")))?;
    let n: usize = fields[1]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad n: {e}")))?;
    let p: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad p: {e}")))?;
    let ell: usize = fields[3]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad ell: {e}")))?;
    let seed: u64 = fields[4]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad seed: {e}")))?;
    let mut lambda_hat = vec![0.0f64; n];
    let mut seen = 0usize;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let idx: usize = parts
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno + 1, format!("bad index: {e}")))?;
        let val: f64 = parts
            .next()
            .ok_or_else(|| parse_err(lineno + 1, "missing lambda_hat value".into()))?
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno + 1, format!("bad value: {e}")))?;
        if idx >= n {
            return Err(parse_err(lineno + 1, format!("index {idx} out of range")));
        }
        lambda_hat[idx] = val;
        seen += 1;
    }
    if seen != n {
        return Err(parse_err(0, format!("expected {n} rows, found {seen}")));
    }
    let bulk_sum = bulk_range(n).map(|i| lambda_hat[i]).sum();
    let reference = SpectralReference {
        lambda_hat,
        m,
        n,
        p,
        ell,
        seed,
        bulk_sum,
    };
    reference.validate()?;
    Ok(reference)
}

/// Directory-backed reference cache keyed by `(m, n, round(p, 4), ell, seed)`.
pub struct ReferenceCache {
    dir: std::path::PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<std::path::PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn key_path(&self, m: usize, n: usize, p: f64, ell: usize, seed: u64) -> std::path::PathBuf {
        let p4 = (p * 1e4).round() as i64;
        self.dir
            .join(format!("ref_m{m}_n{n}_p{p4}_ell{ell}_seed{seed}.csv"))
    }

    /// Loads the cached spectrum or computes and stores it.
    pub fn load_or_compute(
        &self,
        m: usize,
        n: usize,
        p: f64,
        ell: usize,
        seed: u64,
    ) -> Result<SpectralReference> {
        let path = self.key_path(m, n, p, ell, seed);
        if path.exists() {
            if let Ok(reference) = read_reference_csv(&path) {
                return Ok(reference);
            }
        }
        let reference = estimate_reference(m, n, p, ell, seed)?;
        std::fs::create_dir_all(&self.dir)?;
        write_reference_csv(&reference, &path)?;
        Ok(reference)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bulk_range_examples() {
        // n = 250: 1-based 84..=166
        assert_eq!(bulk_range(250), 83..166);
        assert_eq!(bulk_range(3), 0..2);
        assert_eq!(bulk_range(2), 0..1);
        assert_eq!(bulk_range(12), 3..8);
    }

    #[test]
    fn sparse_sample_is_deterministic() {
        let a = sample_sparse_gaussian(40, 30, 0.3, 99).unwrap();
        let b = sample_sparse_gaussian(40, 30, 0.3, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_sparse_gaussian(40, 30, 0.3, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sparse_sample_moments() {
        // dense case: empirical entry variance close to 1/m
        let m = 1000;
        let a = sample_sparse_gaussian(m, 1000, 1.0, 1).unwrap();
        let var = a.data().iter().map(|v| v * v).sum::<f64>() / (a.data().len() as f64);
        assert!(var > 0.9 / m as f64 && var < 1.1 / m as f64, "var={var}");

        // sparse case: observed fraction concentrates near p
        let s = sample_sparse_gaussian(1000, 1000, 0.2, 2).unwrap();
        let frac = s.data().iter().filter(|&&v| v != 0.0).count() as f64 / 1e6;
        assert!(frac > 0.19 && frac < 0.21, "frac={frac}");
    }

    #[test]
    fn sparse_sample_rejects_bad_p() {
        assert!(sample_sparse_gaussian(4, 4, 0.0, 1).is_err());
        assert!(sample_sparse_gaussian(4, 4, 1.2, 1).is_err());
    }

    #[test]
    fn reference_ell_one_equals_single_sample() {
        let reference = estimate_reference(30, 20, 0.5, 1, 7).unwrap();
        let sample = sample_sparse_gaussian(30, 20, 0.5, 7).unwrap();
        let s = singular_values(&sample).unwrap();
        for (a, b) in reference.lambda_hat().iter().zip(&s) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn reference_is_deterministic_and_sorted() {
        let a = estimate_reference(40, 20, 0.4, 4, 3).unwrap();
        let b = estimate_reference(40, 20, 0.4, 4, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.lambda_hat().windows(2).all(|w| w[0] >= w[1]));
        assert!(a.bulk_sum() > 0.0);
    }

    #[test]
    fn dense_reference_edge_near_mp_value() {
        // rho = 1: edge at 2; rho = 0.25: edge at 1.5
        let square = estimate_reference(300, 300, 1.0, 8, 5).unwrap();
        assert!(
            (square.lambda_hat()[0] - 2.0).abs() < 0.1,
            "edge {}",
            square.lambda_hat()[0]
        );
        let rect = estimate_reference(400, 100, 1.0, 8, 5).unwrap();
        assert!((rect.lambda_hat()[0] - 1.5).abs() < 0.08);
    }

    #[test]
    fn mp_density_support_and_mass() {
        let params = MpParams::new(1.0, 0.5).unwrap();
        assert_eq!(mp_density(params.lambda_plus, &params), 0.0);
        assert_eq!(mp_density(params.lambda_minus, &params), 0.0);
        assert_eq!(mp_density(params.lambda_plus + 0.1, &params), 0.0);
        let mass = mp_mass(params.lambda_minus, params.lambda_plus, &params);
        assert!((mass - 1.0).abs() < 1e-6, "mass={mass}");

        // square case integrates to 1 over [0, 2]
        let sq = MpParams::new(1.0, 1.0).unwrap();
        let mass_sq = mp_mass(0.0, 2.0, &sq);
        assert!((mass_sq - 1.0).abs() < 1e-6, "mass={mass_sq}");
        assert!((mp_cdf(2.5, &sq) - 1.0).abs() < 1e-12);
        assert!(mp_cdf(params.lambda_minus, &params) == 0.0);
    }

    #[test]
    fn mp_density_plug_in_value() {
        // sigma = 1, rho = 0.5, x = 1
        let params = MpParams::new(1.0, 0.5).unwrap();
        let lp2 = params.lambda_plus.powi(2);
        let lm2 = params.lambda_minus.powi(2);
        let expected = ((lp2 - 1.0) * (1.0 - lm2)).sqrt() / (std::f64::consts::PI * 0.5);
        assert!((mp_density(1.0, &params) - expected).abs() < 1e-14);
    }

    #[test]
    fn rmt_value_at_edge_and_below() {
        let (sigma_hat, rho, m): (f64, f64, usize) = (1.3, 0.5, 400);
        let edge = sigma_hat * (1.0 + rho.sqrt()) * (m as f64).sqrt();
        let at_edge = rmt_signal_value(edge, sigma_hat, rho, m);
        let expected = sigma_hat * rho.powf(0.25) * (m as f64).sqrt();
        assert!(
            (at_edge - expected).abs() < 1e-8 * expected,
            "{at_edge} vs {expected}"
        );
        assert_eq!(rmt_signal_value(edge * 0.999, sigma_hat, rho, m), 0.0);
        assert_eq!(rmt_signal_value(0.0, sigma_hat, rho, m), 0.0);
    }

    #[test]
    fn rmt_value_monotone_and_continuous() {
        let (sigma_hat, rho, m): (f64, f64, usize) = (0.8, 0.25, 300);
        let edge = sigma_hat * (1.0 + rho.sqrt()) * (m as f64).sqrt();
        let mut prev = 0.0;
        for k in 0..200 {
            let x = edge * (0.9 + 0.002 * k as f64);
            let v = rmt_signal_value(x, sigma_hat, rho, m);
            assert!(v + 1e-12 >= prev, "not monotone at x={x}");
            prev = v;
        }
        // continuity at the clamp: value just above the edge stays near the edge value
        let just_above = rmt_signal_value(edge * 1.0001, sigma_hat, rho, m);
        let at_edge = sigma_hat * rho.powf(0.25) * (m as f64).sqrt();
        assert!((just_above - at_edge).abs() < 0.05 * at_edge);
    }

    #[test]
    fn reference_csv_round_trip() {
        let reference = estimate_reference(25, 15, 0.7, 3, 11).unwrap();
        let dir = std::env::temp_dir().join("resmatch_ref_cache_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        write_reference_csv(&reference, &path).unwrap();
        let back = read_reference_csv(&path).unwrap();
        assert_eq!(reference, back);
    }

    #[test]
    fn cache_hits_are_identical() {
        let dir = std::env::temp_dir().join("resmatch_ref_cache_test2");
        let _ = std::fs::remove_dir_all(&dir);
        let cache = ReferenceCache::new(&dir);
        let a = cache.load_or_compute(20, 10, 0.5, 2, 3).unwrap();
        let b = cache.load_or_compute(20, 10, 0.5, 2, 3).unwrap();
        assert_eq!(a, b);
    }
}
