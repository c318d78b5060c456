#![allow(dead_code)]

use dressed_resolvent::multi::EmitterArraySpec;
use dressed_resolvent::oracle::Eigensystem;
use dressed_resolvent::{BathSpec, Complex64, Hopping};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

/// Connected random bath: a chain backbone with complex hoppings plus random extra edges.
pub fn random_bath<R: Rng>(rng: &mut R, n: usize) -> BathSpec {
    let freqs = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut hops = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if b == a + 1 || rng.gen_bool(0.2) {
                let mag = rng.gen_range(0.3..1.2);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                hops.push(Hopping::new(a, b, Complex64::from_polar(mag, phase)));
            }
        }
    }
    BathSpec::new(freqs, hops).unwrap()
}

pub fn random_sites<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(m);
    all
}

pub fn random_array<R: Rng>(rng: &mut R, n: usize, m: usize, lo: f64, hi: f64) -> EmitterArraySpec {
    EmitterArraySpec::new(
        rng.gen_range(lo..hi),
        rng.gen_range(0.1..1.0),
        random_sites(rng, n, m),
    )
    .unwrap()
}

/// Random complex energy with `|Im z|` in `[0.05, 1]`.
pub fn random_z<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Complex64 {
    let im = rng.gen_range(0.05..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Complex64::new(rng.gen_range(lo..hi), im)
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `max |(z - A) G - I|`.
pub fn identity_residual(a: &DMatrix<Complex64>, g: &DMatrix<Complex64>, z: Complex64) -> f64 {
    let n = a.nrows();
    let lhs = (DMatrix::<Complex64>::identity(n, n) * z - a) * g;
    max_abs_diff(&lhs, &DMatrix::identity(n, n))
}

/// `|<u|v>|^2 / (|u|^2 |v|^2)`.
pub fn fidelity(u: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    u.dotc(v).norm_sqr() / (u.norm_squared() * v.norm_squared())
}

/// Distance between two unit vectors after removing the relative global phase.
pub fn phase_distance(u: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    let o = u.dotc(v);
    let phase = if o.norm() > 0.0 { o / o.norm() } else { Complex64::from(1.0) };
    (u * phase - v).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Oracle eigenvalues within `window` of `center`.
pub fn eigenvalues_near(e: &Eigensystem, center: f64, window: f64) -> Vec<f64> {
    e.values
        .iter()
        .copied()
        .filter(|v| (v - center).abs() < window)
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
