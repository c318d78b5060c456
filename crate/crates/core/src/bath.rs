//! Photonic baths: finite Hermitian hopping Hamiltonians over coupled cavities.
//!
//! A bath is diagonalized once into [`SpectralData`]; every Green-function element is then a mode
//! sum `sum_k <x|k><k|x'> / (z - w_k)^p`. The limit `w + i0+` is always represented by
//! `z = w + i delta` with `delta` supplied by the caller, defaulting to
//! [`SpectralData::default_delta`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg;

/// A point `z = w + i w'` of the complex energy plane.
pub type ComplexEnergy = Complex64;

/// Fraction of the spectral width used as the default `i0+` regularizer.
pub const DEFAULT_DELTA_FRACTION: f64 = 1e-8;

/// `|z - w_k|` below this counts as sitting on the eigenvalue.
pub(crate) const ON_SHELL: f64 = 1e-12;

/// `|<x|k><k|x'>|` below this lets an on-shell mode be dropped (0/0 regularization).
const NULL_WEIGHT: f64 = 1e-12;

/// Directed hopping `J` from site `to` into site `from`, i.e. the matrix entry `(from, to)`.
/// The Hermitian partner `(to, from) = conj(J)` is implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hopping {
    pub from: usize,
    pub to: usize,
    pub amplitude: Complex64,
}

impl Hopping {
    pub fn new(from: usize, to: usize, amplitude: impl Into<Complex64>) -> Self {
        Hopping {
            from,
            to,
            amplitude: amplitude.into(),
        }
    }
}

/// Site frequencies plus Hermitian hopping edges.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    frequencies: Vec<f64>,
    hoppings: Vec<Hopping>,
}

impl BathSpec {
    /// Validates indices, rejects self-loops and duplicate unordered pairs.
    pub fn new(frequencies: Vec<f64>, hoppings: Vec<Hopping>) -> Result<Self> {
        let n = frequencies.len();
        if n == 0 {
            return Err(Error::InvalidArgument("a bath needs at least one site".into()));
        }
        if let Some(w) = frequencies.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite site frequency {w}")));
        }
        let mut seen = HashSet::new();
        for h in &hoppings {
            check_edge(h, n)?;
            let key = (h.from.min(h.to), h.from.max(h.to));
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge between sites {} and {}",
                    key.0, key.1
                )));
            }
        }
        Ok(BathSpec {
            frequencies,
            hoppings,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn hoppings(&self) -> &[Hopping] {
        &self.hoppings
    }

    /// Dense `H_B` in the site basis.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.n_sites();
        let mut h = DMatrix::<Complex64>::zeros(n, n);
        for (x, &w) in self.frequencies.iter().enumerate() {
            h[(x, x)] = Complex64::from(w);
        }
        for e in &self.hoppings {
            h[(e.from, e.to)] += e.amplitude;
            h[(e.to, e.from)] += e.amplitude.conj();
        }
        h
    }
}

pub(crate) fn check_edge(h: &Hopping, n: usize) -> Result<()> {
    if h.from >= n || h.to >= n {
        return Err(Error::InvalidArgument(format!(
            "edge ({}, {}) references a site outside [0, {n})",
            h.from, h.to
        )));
    }
    if h.from == h.to {
        return Err(Error::InvalidArgument(
            "self-loop; use frequencies for on-site terms".into(),
        ));
    }
    if !h.amplitude.re.is_finite() || !h.amplitude.im.is_finite() {
        return Err(Error::InvalidArgument("non-finite hopping amplitude".into()));
    }
    Ok(())
}

/// Open chain of `n` identical cavities with nearest-neighbour hopping `j`.
pub fn build_uniform_chain(n: usize, omega_c: f64, j: f64) -> Result<BathSpec> {
    if n == 0 {
        return Err(Error::InvalidArgument("chain length must be >= 1".into()));
    }
    let hoppings = (0..n.saturating_sub(1))
        .map(|x| Hopping::new(x, x + 1, j))
        .collect();
    BathSpec::new(vec![omega_c; n], hoppings)
}

/// Su-Schrieffer-Heeger chain: `2 n_cells` sites, intracell hopping `j1`, intercell `j2`.
pub fn build_ssh_chain(n_cells: usize, omega_c: f64, j1: f64, j2: f64) -> Result<BathSpec> {
    if n_cells == 0 {
        return Err(Error::InvalidArgument("an SSH chain needs at least one cell".into()));
    }
    let n = 2 * n_cells;
    let hoppings = (0..n - 1)
        .map(|x| Hopping::new(x, x + 1, if x % 2 == 0 { j1 } else { j2 }))
        .collect();
    BathSpec::new(vec![omega_c; n], hoppings)
}

/// Normal modes of a bath. Immutable once built; all evaluations are pure.
#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: DVector<f64>,
    /// Column `k` holds `<x|k>`.
    eigenvectors: DMatrix<Complex64>,
    source: BathSpec,
}

/// Dense diagonalization of `H_B`. Eigenvalues ascend; each eigenvector has its first
/// non-negligible component real and positive.
pub fn diagonalize_bath(spec: &BathSpec) -> SpectralData {
    let (eigenvalues, eigenvectors) = linalg::hermitian_eigen(&spec.matrix());
    SpectralData {
        eigenvalues,
        eigenvectors,
        source: spec.clone(),
    }
}

impl SpectralData {
    pub fn n_sites(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    pub fn source(&self) -> &BathSpec {
        &self.source
    }

    /// `<x|k>`.
    pub fn amplitude(&self, x: usize, k: usize) -> Complex64 {
        self.eigenvectors[(x, k)]
    }

    /// Mode `|k>` as a site vector.
    pub fn mode(&self, k: usize) -> DVector<Complex64> {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn spectral_width(&self) -> f64 {
        let n = self.n_sites();
        self.eigenvalues[n - 1] - self.eigenvalues[0]
    }

    /// `1e-8` times the spectral width (or times the energy scale for a flat spectrum).
    pub fn default_delta(&self) -> f64 {
        let width = self.spectral_width();
        let scale = if width > 0.0 {
            width
        } else {
            self.eigenvalues[0].abs().max(1.0)
        };
        DEFAULT_DELTA_FRACTION * scale
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.eigenvectors)
    }

    /// `max |U diag(w) U^dagger - H_B|`.
    pub fn reconstruction_residual(&self) -> f64 {
        let d = DMatrix::from_diagonal(&self.eigenvalues.map(Complex64::from));
        let rebuilt = &self.eigenvectors * d * self.eigenvectors.adjoint();
        linalg::max_abs_diff(&rebuilt, &self.source.matrix())
    }

    pub(crate) fn check_site(&self, x: usize) -> Result<()> {
        if x >= self.n_sites() {
            return Err(Error::InvalidArgument(format!(
                "site {x} outside bath of {} sites",
                self.n_sites()
            )));
        }
        Ok(())
    }

    fn pole_error(&self, z: Complex64, k: usize) -> Error {
        Error::Pole {
            z,
            eigenvalue: self.eigenvalues[k],
            mode: k,
        }
    }

    /// `<x|G_B(z)^power|x'>`.
    pub fn green_power(&self, z: Complex64, x: usize, xp: usize, power: i32) -> Result<Complex64> {
        self.check_site(x)?;
        self.check_site(xp)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &w) in self.eigenvalues.iter().enumerate() {
            let weight = self.eigenvectors[(x, k)] * self.eigenvectors[(xp, k)].conj();
            let d = z - w;
            if d.norm() < ON_SHELL {
                if weight.norm() < NULL_WEIGHT {
                    continue;
                }
                return Err(self.pole_error(z, k));
            }
            acc += weight / d.powi(power);
        }
        Ok(acc)
    }

    /// `<x|G_B(z)|x'>`.
    pub fn green(&self, z: Complex64, x: usize, xp: usize) -> Result<Complex64> {
        self.green_power(z, x, xp, 1)
    }

    /// `<x|G_B(z)^2|x'>`, equal to `-d/dz <x|G_B(z)|x'>`.
    pub fn green_squared(&self, z: Complex64, x: usize, xp: usize) -> Result<Complex64> {
        self.green_power(z, x, xp, 2)
    }

    /// Mode weights `1/(z - w_k)^power`, with on-shell modes that carry no weight on `sites`
    /// set to zero.
    fn mode_denominators(&self, z: Complex64, x: usize, power: i32) -> Result<DVector<Complex64>> {
        let n = self.n_sites();
        let mut out = DVector::<Complex64>::zeros(n);
        for (k, &w) in self.eigenvalues.iter().enumerate() {
            let d = z - w;
            if d.norm() < ON_SHELL {
                let ax = self.eigenvectors[(x, k)].norm();
                let amax = self
                    .eigenvectors
                    .column(k)
                    .iter()
                    .map(|c| c.norm())
                    .fold(0.0, f64::max);
                if ax * amax < NULL_WEIGHT {
                    continue;
                }
                return Err(self.pole_error(z, k));
            }
            out[k] = Complex64::from(1.0) / d.powi(power);
        }
        Ok(out)
    }

    /// Column `G_B(z)^power |x>`, i.e. entries `<y|G_B^power|x>` for every site `y`.
    pub fn green_column_power(
        &self,
        z: Complex64,
        x: usize,
        power: i32,
    ) -> Result<DVector<Complex64>> {
        self.check_site(x)?;
        let mut w = self.mode_denominators(z, x, power)?;
        for (k, wk) in w.iter_mut().enumerate() {
            *wk *= self.eigenvectors[(x, k)].conj();
        }
        Ok(&self.eigenvectors * w)
    }

    /// `G_B(z)|x>`.
    pub fn green_column(&self, z: Complex64, x: usize) -> Result<DVector<Complex64>> {
        self.green_column_power(z, x, 1)
    }

    /// Row `<x|G_B(z)` as a vector over `y`: entries `<x|G_B(z)|y>`.
    ///
    /// For real symmetric baths this is the transpose of [`Self::green_column`]; with complex
    /// hoppings the two differ away from the real axis.
    pub fn green_row(&self, z: Complex64, x: usize) -> Result<DVector<Complex64>> {
        self.check_site(x)?;
        let mut w = self.mode_denominators(z, x, 1)?;
        for (k, wk) in w.iter_mut().enumerate() {
            *wk *= self.eigenvectors[(x, k)];
        }
        Ok(self.eigenvectors.conjugate() * w)
    }

    /// Full `G_B(z)`. Fails if `z` sits on any eigenvalue.
    pub fn green_matrix(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.n_sites();
        let mut scaled = self.eigenvectors.clone();
        for (k, &w) in self.eigenvalues.iter().enumerate() {
            let d = z - w;
            if d.norm() < ON_SHELL {
                return Err(self.pole_error(z, k));
            }
            let inv = Complex64::from(1.0) / d;
            for x in 0..n {
                scaled[(x, k)] *= inv;
            }
        }
        Ok(scaled * self.eigenvectors.adjoint())
    }
}

/// `<x|G_B(z)|x'> = sum_k <x|k><k|x'> / (z - w_k)`.
///
/// On the real axis a mode with `|z - w_k| < 1e-12` is dropped when `|<x|k><k|x'>| < 1e-12`
/// (0/0 regularization); otherwise the call fails with [`Error::Pole`].
pub fn bath_green_element(
    s: &SpectralData,
    z: ComplexEnergy,
    x: usize,
    xp: usize,
) -> Result<Complex64> {
    s.green(z, x, xp)
}

/// `<x|G_B(z)^2|x'>`, same regularization as [`bath_green_element`].
pub fn bath_green_squared_element(
    s: &SpectralData,
    z: ComplexEnergy,
    x: usize,
    xp: usize,
) -> Result<Complex64> {
    s.green_squared(z, x, xp)
}

/// Closed real interval; infinite endpoints mark the semi-infinite gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains_closed(&self, w: f64) -> bool {
        w >= self.lower && w <= self.upper
    }

    pub fn contains_open(&self, w: f64) -> bool {
        w > self.lower && w < self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Bands of a finite spectrum and the gaps between and around them.
///
/// Finite lattices have no true continua: bands are groups of eigenvalues whose consecutive
/// spacing stays below `gap_factor` times the median spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub bands: Vec<Interval>,
    /// Open intervals, ascending; the first and last are semi-infinite.
    pub gaps: Vec<Interval>,
}

impl BandStructure {
    pub fn in_band(&self, w: f64) -> bool {
        self.bands.iter().any(|b| b.contains_closed(w))
    }

    pub fn gap_containing(&self, w: f64) -> Option<Interval> {
        self.gaps.iter().copied().find(|g| g.contains_open(w))
    }

    pub fn band_containing(&self, w: f64) -> Option<Interval> {
        self.bands.iter().copied().find(|b| b.contains_closed(w))
    }

    /// Distance from `w` to the nearest band edge (zero inside a band).
    pub fn detuning(&self, w: f64) -> f64 {
        self.bands
            .iter()
            .map(|b| {
                if b.contains_closed(w) {
                    0.0
                } else {
                    (w - b.lower).abs().min((w - b.upper).abs())
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Groups the bath spectrum into bands. `gap_factor` must exceed 1.
pub fn detect_bands(s: &SpectralData, gap_factor: f64) -> Result<BandStructure> {
    if !(gap_factor > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gap_factor must be > 1, got {gap_factor}"
        )));
    }
    let w = s.eigenvalues();
    let spacings: Vec<f64> = w.windows(2).map(|p| p[1] - p[0]).collect();
    let mut nondegenerate: Vec<f64> = spacings.iter().copied().filter(|&d| d > ON_SHELL).collect();
    nondegenerate.sort_by(f64::total_cmp);
    let median = if nondegenerate.is_empty() {
        0.0
    } else {
        let m = nondegenerate.len();
        if m % 2 == 1 {
            nondegenerate[m / 2]
        } else {
            0.5 * (nondegenerate[m / 2 - 1] + nondegenerate[m / 2])
        }
    };
    let threshold = gap_factor * median;

    let mut bands = Vec::new();
    let mut lower = w[0];
    for (i, &d) in spacings.iter().enumerate() {
        if d > threshold && d > ON_SHELL {
            bands.push(Interval {
                lower,
                upper: w[i],
            });
            lower = w[i + 1];
        }
    }
    bands.push(Interval {
        lower,
        upper: w[w.len() - 1],
    });

    let mut gaps = Vec::with_capacity(bands.len() + 1);
    let mut prev = f64::NEG_INFINITY;
    for b in &bands {
        gaps.push(Interval {
            lower: prev,
            upper: b.lower,
        });
        prev = b.upper;
    }
    gaps.push(Interval {
        lower: prev,
        upper: f64::INFINITY,
    });
    Ok(BandStructure { bands, gaps })
}

/// `<x|G(z)|x+d>` of the infinite uniform chain: `y^|d| / (j (1/y - y))`, with `y` the root of
/// `j y^2 - (z - w_c) y + j = 0` inside the unit circle.
pub fn analytic_chain_green(z: ComplexEnergy, omega_c: f64, j: f64, d: i64) -> Result<Complex64> {
    let e = z - omega_c;
    if j == 0.0 {
        return Ok(if d == 0 {
            Complex64::from(1.0) / e
        } else {
            Complex64::new(0.0, 0.0)
        });
    }
    if z.im == 0.0 && e.re.abs() <= 2.0 * j.abs() {
        return Err(Error::BranchCut { z });
    }
    let disc = (e * e - 4.0 * j * j).sqrt();
    let r1 = (e + disc) / (2.0 * j);
    let r2 = (e - disc) / (2.0 * j);
    // the larger root is free of cancellation; its reciprocal is the small one
    let large = if r1.norm() >= r2.norm() { r1 } else { r2 };
    let y = Complex64::from(1.0) / large;
    Ok(y.powi(d.unsigned_abs() as i32) / (j * (large - y)))
}
