//! File formats and the rating-data protocol.
//!
//! Formats are deliberately plain: a matrix CSV starts with a `rows,cols`
//! line followed by one comma-separated line per row; a triplet CSV has an
//! `i,j,value` header and 0-based indices. Values are written with Rust's
//! shortest round-trip float formatting, so write-then-read is lossless.
//!
//! The rating protocol mirrors the benchmark design: observed triples split
//! uniformly into train/validation/test, hyperparameters tuned by validation
//! RMSE, and the train-fit model at the winning grid point returned as is.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::experiments::{Method, WeightKind};
use crate::matrix::{DenseMatrix, ObservationMask};
use crate::reference::{estimate_reference, SpectralReference};
use crate::seeding::rng_from_seed;
use crate::solvers::SolverReport;

/// Sparse rating data: user x item triples with explicit dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTriplets {
    pub rows: usize,
    pub cols: usize,
    pub triples: Vec<(usize, usize, f64)>,
}

impl RatingTriplets {
    pub fn new(rows: usize, cols: usize, triples: Vec<(usize, usize, f64)>) -> Result<Self> {
        if triples.is_empty() {
            return Err(Error::InvalidDimensions(
                "triplet set must contain at least one entry".into(),
            ));
        }
        let mut seen = std::collections::HashSet::with_capacity(triples.len());
        for &(i, j, _) in &triples {
            if i >= rows || j >= cols {
                return Err(Error::InvalidDimensions(format!(
                    "triple index ({i}, {j}) out of range for {rows}x{cols}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidDimensions(format!(
                    "duplicate triple index ({i}, {j})"
                )));
            }
        }
        Ok(Self { rows, cols, triples })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Dense observation view: zero-filled matrix plus the mask.
    pub fn to_matrix(&self) -> Result<(DenseMatrix, ObservationMask)> {
        let mut y = DenseMatrix::zeros(self.rows, self.cols);
        let mut indices = Vec::with_capacity(self.triples.len());
        for &(i, j, v) in &self.triples {
            y.set(i, j, v);
            indices.push((i, j));
        }
        let mask = ObservationMask::from_indices(self.rows, self.cols, &indices)?;
        Ok((y, mask))
    }
}

/// Train/validation/test fractions; must be positive and sum to one.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        if train_frac <= 0.0 || val_frac <= 0.0 || test_frac <= 0.0 {
            return Err(Error::InvalidConfig(
                "every split fraction must be positive".into(),
            ));
        }
        if (train_frac + val_frac + test_frac - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must sum to 1, got {}",
                train_frac + val_frac + test_frac
            )));
        }
        Ok(Self {
            train_frac,
            val_frac,
            test_frac,
            seed,
        })
    }

    /// The 4:1:1 protocol of the rating experiments.
    pub fn four_one_one(seed: u64) -> Self {
        Self::new(4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, seed).expect("fractions are valid")
    }
}

/// Disjoint uniform partition of the observed triples. Sizes follow a
/// floor-then-distribute rule: each part gets the floor of its share, then
/// the remaining triples go one each to train, validation, test in order.
pub fn split_triplets(
    data: &RatingTriplets,
    spec: &SplitSpec,
) -> Result<(RatingTriplets, RatingTriplets, RatingTriplets)> {
    let n = data.triples.len();
    if n < 3 {
        return Err(Error::InvalidDimensions(
            "need at least 3 triples to split".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(spec.seed);
    for k in (1..n).rev() {
        let j = rng.random_range(0..=k);
        order.swap(k, j);
    }
    let mut sizes = [
        (n as f64 * spec.train_frac).floor() as usize,
        (n as f64 * spec.val_frac).floor() as usize,
        (n as f64 * spec.test_frac).floor() as usize,
    ];
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut part = 0;
    while leftover > 0 {
        sizes[part % 3] += 1;
        part += 1;
        leftover -= 1;
    }
    for (idx, &s) in sizes.iter().enumerate() {
        if s == 0 {
            return Err(Error::InvalidConfig(format!(
                "split part {idx} is empty for {n} triples"
            )));
        }
    }
    let take = |range: std::ops::Range<usize>| -> Result<RatingTriplets> {
        RatingTriplets::new(
            data.rows,
            data.cols,
            order[range].iter().map(|&k| data.triples[k]).collect(),
        )
    };
    let train = take(0..sizes[0])?;
    let val = take(sizes[0]..sizes[0] + sizes[1])?;
    let test = take(sizes[0] + sizes[1]..n)?;
    Ok((train, val, test))
}

// --- file formats -----------------------------------------------------------

/// Matrix CSV: first line `rows,cols`, then one comma-separated line per row.
pub fn write_matrix_csv(matrix: &DenseMatrix, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = String::with_capacity(matrix.rows() * matrix.cols() * 8);
    out.push_str(&format!("{},{}\n", matrix.rows(), matrix.cols()));
    for i in 0..matrix.rows() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: display.clone(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty matrix file".into()))?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(parse_err(1, "expected header `rows,cols`".into()));
    }
    let rows: usize = dims[0]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad row count: {e}")))?;
    let cols: usize = dims[1]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad column count: {e}")))?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut row_count = 0usize;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(parse_err(
                lineno + 1,
                format!("expected {cols} values, found {}", fields.len()),
            ));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno + 1, format!("bad value `{f}`: {e}")))?;
            data.push(v);
        }
        row_count += 1;
    }
    if row_count != rows {
        return Err(parse_err(
            0,
            format!("header declares {rows} rows, body has {row_count}"),
        ));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

/// Triplet CSV: header `i,j,value`, 0-based indices, one triple per line.
pub fn write_triplets(data: &RatingTriplets, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = String::from("i,j,value\n");
    for &(i, j, v) in &data.triples {
        out.push_str(&format!("{i},{j},{v}\n"));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a triplet CSV; dimensions are inferred as `max index + 1` unless
/// explicit dimensions are given.
pub fn read_triplets(path: &Path) -> Result<RatingTriplets> {
    read_triplets_with_dims(path, None)
}

pub fn read_triplets_with_dims(
    path: &Path,
    dims: Option<(usize, usize)>,
) -> Result<RatingTriplets> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: display.clone(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty triplet file".into()))?;
    if header.trim() != "i,j,value" {
        return Err(parse_err(1, "expected header `i,j,value`".into()));
    }
    let mut triples = Vec::new();
    let mut seen = std::collections::HashMap::new();
    let mut max_i = 0usize;
    let mut max_j = 0usize;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(lineno + 1, "expected `i,j,value`".into()));
        }
        let i: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno + 1, format!("bad row index: {e}")))?;
        let j: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno + 1, format!("bad column index: {e}")))?;
        let v: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno + 1, format!("bad value: {e}")))?;
        if let Some(first_line) = seen.insert((i, j), lineno + 1) {
            let _ = first_line;
            return Err(Error::DuplicateEntry {
                path: display,
                line: lineno + 1,
                i,
                j,
            });
        }
        if let Some((rows, cols)) = dims {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange {
                    path: display,
                    line: lineno + 1,
                    i,
                    j,
                    rows,
                    cols,
                });
            }
        }
        max_i = max_i.max(i);
        max_j = max_j.max(j);
        triples.push((i, j, v));
    }
    if triples.is_empty() {
        return Err(parse_err(0, "no triples in file".into()));
    }
    let (rows, cols) = dims.unwrap_or((max_i + 1, max_j + 1));
    RatingTriplets::new(rows, cols, triples)
}

// --- prediction utilities ----------------------------------------------------

/// Entrywise clamp to `[lo, hi]`.
pub fn clip_predictions(matrix: &DenseMatrix, lo: f64, hi: f64) -> Result<DenseMatrix> {
    if !(lo <= hi) {
        return Err(Error::InvalidConfig(format!(
            "clip range [{lo}, {hi}] is empty"
        )));
    }
    Ok(DenseMatrix::from_fn(matrix.rows(), matrix.cols(), |i, j| {
        matrix.get(i, j).clamp(lo, hi)
    }))
}

/// Root mean squared error of an estimate over a triple set.
pub fn rmse_on_triples(est: &DenseMatrix, triples: &RatingTriplets) -> Result<f64> {
    if est.shape() != (triples.rows, triples.cols) {
        return Err(Error::ShapeMismatch {
            expected_rows: triples.rows,
            expected_cols: triples.cols,
            found_rows: est.rows(),
            found_cols: est.cols(),
        });
    }
    let mut acc = 0.0;
    for &(i, j, v) in &triples.triples {
        let d = est.get(i, j) - v;
        acc += d * d;
    }
    Ok((acc / triples.triples.len() as f64).sqrt())
}

/// Reference spectrum matching the solver's internal orientation (the solver
/// transposes when rows < cols).
pub fn reference_for_problem(
    rows: usize,
    cols: usize,
    p: f64,
    ell: usize,
    seed: u64,
    dense: bool,
) -> Result<SpectralReference> {
    let (m, n) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    estimate_reference(m, n, if dense { 1.0 } else { p }, ell, seed)
}

// --- hyperparameter tuning ---------------------------------------------------

/// One point of a hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperPoint {
    Rank(usize),
    Lambda(f64),
}

impl std::fmt::Display for HyperPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HyperPoint::Rank(s) => write!(f, "s={s}"),
            HyperPoint::Lambda(l) => write!(f, "lambda={l}"),
        }
    }
}

/// Settings of one tuning run.
#[derive(Debug, Clone)]
pub struct TuneConfig {
    pub method: Method,
    pub ell: usize,
    pub seed: u64,
    pub dense_reference: bool,
    pub weights: WeightKind,
    pub max_iters: usize,
    pub tol: f64,
}

impl TuneConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            ell: crate::reference::DEFAULT_ELL,
            seed,
            dense_reference: false,
            weights: WeightKind::Default,
            max_iters: 200,
            tol: 1e-4,
        }
    }
}

/// Result of [`tune_and_fit`]: the winning grid point, the train-fit model at
/// that point (no refit), and the validation RMSE of every grid point.
pub struct TuneOutcome {
    pub best: HyperPoint,
    pub best_report: SolverReport,
    pub grid_rmse: Vec<(HyperPoint, f64)>,
}

/// Fits the configured method on the training triples at every grid point,
/// scores each fit by validation RMSE, and returns the train-fit model at
/// the best point.
pub fn tune_and_fit(
    train: &RatingTriplets,
    val: &RatingTriplets,
    cfg: &TuneConfig,
    grid: &[HyperPoint],
) -> Result<TuneOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("hyperparameter grid is empty".into()));
    }
    if (train.rows, train.cols) != (val.rows, val.cols) {
        return Err(Error::ShapeMismatch {
            expected_rows: train.rows,
            expected_cols: train.cols,
            found_rows: val.rows,
            found_cols: val.cols,
        });
    }
    let (y, mask) = train.to_matrix()?;
    let reference_seed = crate::seeding::derive_seed(cfg.seed, crate::seeding::stream::REFERENCE);
    let reference = reference_for_problem(
        train.rows,
        train.cols,
        mask.p_hat(),
        cfg.ell,
        reference_seed,
        cfg.dense_reference,
    )?;
    let spectrum_len = train.rows.min(train.cols);

    let mut grid_rmse = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, HyperPoint, SolverReport)> = None;
    for &point in grid {
        let report = fit_one(&y, &mask, &reference, spectrum_len, cfg, point)?;
        let rmse = rmse_on_triples(&report.estimate, val)?;
        grid_rmse.push((point, rmse));
        let better = match &best {
            None => true,
            Some((b, _, _)) => rmse < *b,
        };
        if better {
            best = Some((rmse, point, report));
        }
    }
    let (_, best_point, best_report) = best.expect("grid is nonempty");
    Ok(TuneOutcome {
        best: best_point,
        best_report,
        grid_rmse,
    })
}

fn fit_one(
    y: &DenseMatrix,
    mask: &ObservationMask,
    reference: &SpectralReference,
    spectrum_len: usize,
    cfg: &TuneConfig,
    point: HyperPoint,
) -> Result<SolverReport> {
    use crate::baselines::{baseline_factorized, baseline_nuclear, BaselineConfig};
    use crate::solvers::{solve_factorized, solve_nuclear, SolverConfig};
    match (cfg.method, point) {
        (Method::Estimator1, HyperPoint::Rank(s)) => {
            let weights = cfg.weights.build(spectrum_len, s)?;
            let solver_cfg = SolverConfig::factorized(s, weights, reference.clone())
                .with_max_iters(cfg.max_iters)
                .with_tol(cfg.tol)
                .with_seed(cfg.seed);
            solve_factorized(y, mask, &solver_cfg, None)
        }
        (Method::Estimator2, HyperPoint::Lambda(l)) => {
            // weight shape for the nuclear path: scale-free default tied to
            // the spectrum length
            let s_shape = (spectrum_len / 50).max(1);
            let weights = cfg.weights.build(spectrum_len, s_shape)?;
            let solver_cfg = SolverConfig::nuclear(l, weights, reference.clone())
                .with_max_iters(cfg.max_iters)
                .with_tol(cfg.tol)
                .with_seed(cfg.seed);
            solve_nuclear(y, mask, &solver_cfg, None)
        }
        (Method::Baseline1, HyperPoint::Rank(s)) => {
            let bcfg = BaselineConfig::factorized(s)
                .with_max_iters(cfg.max_iters)
                .with_tol(cfg.tol);
            baseline_factorized(y, mask, &bcfg, None)
        }
        (Method::Baseline2, HyperPoint::Lambda(l)) => {
            let bcfg = BaselineConfig::nuclear(l)
                .with_max_iters(cfg.max_iters)
                .with_tol(cfg.tol);
            baseline_nuclear(y, mask, &bcfg, None)
        }
        (m, p) => Err(Error::InvalidConfig(format!(
            "method {} cannot use grid point {p}",
            m.as_str()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("resmatch_io_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn matrix_csv_round_trip_is_bit_exact() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_from_seed(3);
        let a = DenseMatrix::from_fn(5, 4, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) * 1e3
        });
        let path = tmp("roundtrip_matrix.csv");
        write_matrix_csv(&a, &path).unwrap();
        let b = read_matrix_csv(&path).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn matrix_csv_dimension_mismatch_errors() {
        let path = tmp("bad_dims.csv");
        std::fs::write(&path, "3,2\n1,2\n3,4\n").unwrap();
        match read_matrix_csv(&path) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("3 rows")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn triplet_round_trip_and_duplicate_detection() {
        let t = RatingTriplets::new(4, 3, vec![(0, 0, 4.5), (2, 1, 1.0), (3, 2, 3.25)]).unwrap();
        let path = tmp("triples.csv");
        write_triplets(&t, &path).unwrap();
        let back = read_triplets(&path).unwrap();
        assert_eq!(t, back);

        let dup = tmp("dup.csv");
        std::fs::write(&dup, "i,j,value\n2,3,1.0\n0,0,2.0\n2,3,4.0\n").unwrap();
        match read_triplets(&dup) {
            Err(Error::DuplicateEntry { line, i: 2, j: 3, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_sizes_follow_four_one_one() {
        let triples: Vec<(usize, usize, f64)> = (0..600).map(|k| (k / 30, k % 30, 1.0)).collect();
        let data = RatingTriplets::new(20, 30, triples).unwrap();
        let spec = SplitSpec::four_one_one(9);
        let (train, val, test) = split_triplets(&data, &spec).unwrap();
        assert_eq!(train.len(), 400);
        assert_eq!(val.len(), 100);
        assert_eq!(test.len(), 100);

        // union equals the original set
        let mut all: Vec<(usize, usize)> = train
            .triples
            .iter()
            .chain(&val.triples)
            .chain(&test.triples)
            .map(|&(i, j, _)| (i, j))
            .collect();
        all.sort_unstable();
        let mut orig: Vec<(usize, usize)> = data.triples.iter().map(|&(i, j, _)| (i, j)).collect();
        orig.sort_unstable();
        assert_eq!(all, orig);

        // deterministic in the seed
        let (train2, _, _) = split_triplets(&data, &spec).unwrap();
        assert_eq!(train, train2);
    }

    #[test]
    fn clip_behaviour() {
        let a = DenseMatrix::from_vec(1, 4, vec![0.5, 3.0, 6.2, -1.0]).unwrap();
        let c = clip_predictions(&a, 1.0, 5.0).unwrap();
        assert_eq!(c.data(), &[1.0, 3.0, 5.0, 1.0]);
        let inside = DenseMatrix::from_vec(1, 3, vec![1.5, 2.0, 4.9]).unwrap();
        assert_eq!(clip_predictions(&inside, 1.0, 5.0).unwrap(), inside);
    }

    #[test]
    fn tune_single_point_grid_returns_it() {
        // tiny synthetic problem through the triplet path
        let spec = crate::experiments::SimulationSpec::new(
            crate::experiments::CaseId::Case1,
            30,
            20,
            0.7,
            0.5,
            5,
        )
        .unwrap();
        let truth = crate::experiments::gen_truth(&spec);
        let noise = crate::experiments::gen_noise(30, 20, 0.5, 6);
        let mask = crate::experiments::gen_mask(30, 20, 0.7, 7).unwrap();
        let y = crate::matrix::project_mask(&truth.add(&noise).unwrap(), &mask).unwrap();
        let mut triples = Vec::new();
        for i in 0..30 {
            for j in 0..20 {
                if mask.is_observed(i, j) {
                    triples.push((i, j, y.get(i, j)));
                }
            }
        }
        let data = RatingTriplets::new(30, 20, triples).unwrap();
        let (train, val, _test) = split_triplets(&data, &SplitSpec::four_one_one(1)).unwrap();
        let cfg = TuneConfig {
            ell: 4,
            max_iters: 30,
            ..TuneConfig::new(Method::Estimator1, 3)
        };
        let outcome = tune_and_fit(&train, &val, &cfg, &[HyperPoint::Rank(5)]).unwrap();
        assert_eq!(outcome.best, HyperPoint::Rank(5));
        assert_eq!(outcome.grid_rmse.len(), 1);
        // best RMSE is minimal over the grid by construction
        let best_rmse = outcome.grid_rmse[0].1;
        assert!(outcome.grid_rmse.iter().all(|&(_, r)| r >= best_rmse));
    }
}
