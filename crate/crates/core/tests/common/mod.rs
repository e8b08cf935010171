//! Shared helpers and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hfee::linalg::Matrix;
use hfee::{Gender, SubjectProfile};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Intercept column plus Gaussian regressors, and `y = Hθ + noise` with
/// coefficients bounded away from zero.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Matrix, Vec<f64>) {
    let mut h = Matrix::zeros(n, p);
    for i in 0..n {
        h[(i, 0)] = 1.0;
        for j in 1..p {
            h[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let theta: Vec<f64> = (0..p)
        .map(|_| {
            let mag = rng.random_range(0.5..2.0);
            if rng.random_bool(0.5) { mag } else { -mag }
        })
        .collect();
    let y = (0..n)
        .map(|i| h.row(i).iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (h, y)
}

fn to_na(h: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(h.rows(), h.cols(), h.as_slice())
}

/// `(HᵀH)⁻¹Hᵀy` evaluated literally.
pub fn pinv_solve(h: &Matrix, y: &[f64]) -> Vec<f64> {
    let h = to_na(h);
    let ht = h.transpose();
    let inv = (&ht * &h).try_inverse().expect("HᵀH invertible");
    (inv * ht * DVector::from_column_slice(y)).iter().copied().collect()
}

pub fn sse(h: &Matrix, y: &[f64], theta: &[f64]) -> f64 {
    (0..h.rows()).map(|i| (y[i] - h.row(i).iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()).powi(2)).sum()
}

/// `‖Hᵀ(y − Hθ)‖∞` and `‖Hᵀy‖∞`.
pub fn normal_equation_residual(h: &Matrix, y: &[f64], theta: &[f64]) -> (f64, f64) {
    let r: Vec<f64> = (0..h.rows()).map(|i| y[i] - h.row(i).iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()).collect();
    let inf = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (inf(h.tr_mul_vec(&r)), inf(h.tr_mul_vec(y)))
}

pub fn random_profile(rng: &mut ChaCha8Rng, id: String) -> SubjectProfile {
    SubjectProfile {
        subject_id: id,
        age: rng.random_range(18.0..70.0),
        gender: if rng.random_bool(0.5) { Gender::Male } else { Gender::Female },
        height_cm: rng.random_range(150.0..200.0),
        weight_kg: rng.random_range(45.0..120.0),
        activity_level: rng.random_range(1..=10),
    }
}

pub struct PcaOracle {
    pub loading: [f64; 5],
    pub top_eigenvalue: f64,
}

/// Standardize with the sample SD, eigen-decompose the 5×5 covariance with
/// nalgebra, and apply the non-negative weight sign rule.
pub fn pca_oracle(profiles: &[SubjectProfile]) -> PcaOracle {
    let n = profiles.len();
    let x = DMatrix::from_fn(n, 5, |i, j| {
        let p = &profiles[i];
        [p.age, if p.gender == Gender::Male { 0.0 } else { 1.0 }, p.height_cm, p.weight_kg, p.activity_level as f64][j]
    });
    let mut z = x.clone();
    for j in 0..5 {
        let col = x.column(j);
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        for i in 0..n {
            z[(i, j)] = if sd > 0.0 { (x[(i, j)] - mean) / sd } else { 0.0 };
        }
    }
    let cov = z.transpose() * &z / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let mut v: [f64; 5] = std::array::from_fn(|j| eig.eigenvectors[(j, k)]);
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let pivot = if v[3] != 0.0 { v[3] } else { v.iter().copied().find(|a| *a != 0.0).unwrap_or(1.0) };
    let s = (if pivot < 0.0 { -1.0 } else { 1.0 }) / norm;
    v.iter_mut().for_each(|a| *a *= s);
    PcaOracle { loading: v, top_eigenvalue: eig.eigenvalues[k] }
}

pub fn sample_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Relative path → file bytes, for every file below `root`.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Runs the CLI in-process, returning stdout on success.
pub fn cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hfee").chain(args.iter().copied());
    hfee::cli::run(argv, &mut out, &mut err).map_err(|e| e.to_string())?;
    Ok(String::from_utf8(out).unwrap())
}
