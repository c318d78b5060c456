//! Brute-force ground truth.
//!
//! The full single-excitation Hamiltonian is assembled straight from the bath edges and the
//! emitter list, then diagonalized or inverted densely. Nothing here goes through the
//! mode-sum Green functions, so agreement with the resolvent routes is a real check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bath::{detect_bands, diagonalize_bath, BandStructure, BathSpec};
use crate::dressed::{self, VdsKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::multi::{self, EmitterArraySpec};

pub use crate::linalg::subspace_fidelity;

/// Largest `||A||_1 ||A^-1||_1` accepted by the dense inverses.
pub const MAX_CONDITION: f64 = 1e14;

/// Eigenvalues closer than this are treated as one eigenspace.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FullHamiltonian {
    matrix: DMatrix<Complex64>,
    bath: BathSpec,
    emitters: EmitterArraySpec,
}

impl FullHamiltonian {
    /// Basis `[e_1, .., e_M, x_0, .., x_{N-1}]`.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_emitters(&self) -> usize {
        self.emitters.m()
    }

    pub fn bath(&self) -> &BathSpec {
        &self.bath
    }

    pub fn emitters(&self) -> &EmitterArraySpec {
        &self.emitters
    }
}

fn bath_block(bath: &BathSpec) -> DMatrix<Complex64> {
    let n = bath.n_sites();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for (x, &w) in bath.frequencies().iter().enumerate() {
        h[(x, x)] = Complex64::from(w);
    }
    for e in bath.hoppings() {
        h[(e.from, e.to)] += e.amplitude;
        h[(e.to, e.from)] += e.amplitude.conj();
    }
    h
}

pub fn build_full_hamiltonian(bath: &BathSpec, arr: &EmitterArraySpec) -> Result<FullHamiltonian> {
    let n = bath.n_sites();
    let m = arr.m();
    for (i, &x) in arr.sites.iter().enumerate() {
        if x >= n {
            return Err(Error::InvalidArgument(format!(
                "emitter {i} sits on site {x}, outside the {n}-site bath"
            )));
        }
        if arr.sites[..i].contains(&x) {
            return Err(Error::InvalidArgument(format!("two emitters share site {x}")));
        }
    }
    let mut h = DMatrix::<Complex64>::zeros(m + n, m + n);
    h.view_mut((m, m), (n, n)).copy_from(&bath_block(bath));
    for (i, &x) in arr.sites.iter().enumerate() {
        h[(i, i)] = Complex64::from(arr.omega0);
        h[(i, m + x)] = Complex64::from(arr.g);
        h[(m + x, i)] = Complex64::from(arr.g);
    }
    Ok(FullHamiltonian {
        matrix: h,
        bath: bath.clone(),
        emitters: arr.clone(),
    })
}

/// Ascending eigenvalues with unit eigenvectors as columns, phases fixed as for the bath.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> DVector<Complex64> {
        self.vectors.column(k).into_owned()
    }

    /// Indices of eigenvalues outside every band.
    pub fn in_gaps(&self, bands: &BandStructure) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&k| !bands.in_band(self.values[k]))
            .collect()
    }

    /// Orthonormal basis of the eigenspace within `tol` of `energy`.
    pub fn eigenspace(&self, energy: f64, tol: f64) -> Vec<DVector<Complex64>> {
        (0..self.values.len())
            .filter(|&k| (self.values[k] - energy).abs() <= tol)
            .map(|k| self.vector(k))
            .collect()
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.vectors)
    }

    /// `max |U diag(w) U^dagger - A|`.
    pub fn reconstruction_residual(&self, a: &DMatrix<Complex64>) -> f64 {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| Complex64::from(v)),
        ));
        linalg::max_abs_diff(&(&self.vectors * d * self.vectors.adjoint()), a)
    }
}

pub fn hermitian_eigensystem(a: &DMatrix<Complex64>) -> Eigensystem {
    let (values, vectors) = linalg::hermitian_eigen(a);
    Eigensystem {
        values: values.iter().copied().collect(),
        vectors,
    }
}

pub fn exact_eigensystem(h: &FullHamiltonian) -> Eigensystem {
    hermitian_eigensystem(&h.matrix)
}

/// `(z - A)^-1` by LU.
pub fn dense_resolvent(a: &DMatrix<Complex64>, z: Complex64) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let shifted = DMatrix::<Complex64>::identity(n, n) * z - a;
    let inv = shifted
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::AtPole(format!("z = {z} is an eigenvalue")))?;
    let cond = linalg::norm_one(&shifted) * linalg::norm_one(&inv);
    if !(cond < MAX_CONDITION) {
        return Err(Error::AtPole(format!(
            "z = {z} is too close to the spectrum (condition {cond:.3e})"
        )));
    }
    Ok(inv)
}

pub fn direct_resolvent(h: &FullHamiltonian, z: Complex64) -> Result<DMatrix<Complex64>> {
    dense_resolvent(&h.matrix, z)
}

/// `H_B + eps |x><x|`.
pub fn impurity_hamiltonian(bath: &BathSpec, site: usize, eps: f64) -> Result<DMatrix<Complex64>> {
    check_site(bath, site)?;
    let mut h = bath_block(bath);
    h[(site, site)] += Complex64::from(eps);
    Ok(h)
}

fn check_site(bath: &BathSpec, site: usize) -> Result<()> {
    if site >= bath.n_sites() {
        return Err(Error::InvalidArgument(format!(
            "site {site} outside the {}-site bath",
            bath.n_sites()
        )));
    }
    Ok(())
}

/// The bath with `site` deleted, as a dense matrix over the remaining sites in order.
fn vacancy_block(bath: &BathSpec, site: usize) -> Result<(DMatrix<Complex64>, Vec<usize>)> {
    check_site(bath, site)?;
    let keep: Vec<usize> = (0..bath.n_sites()).filter(|&x| x != site).collect();
    let full = bath_block(bath);
    let h = DMatrix::from_fn(keep.len(), keep.len(), |i, j| full[(keep[i], keep[j])]);
    Ok((h, keep))
}

/// Resolvent of the bath with `site` removed, embedded with a zero row and column at `site`.
pub fn vacancy_resolvent(bath: &BathSpec, site: usize, z: Complex64) -> Result<DMatrix<Complex64>> {
    let n = bath.n_sites();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    let (h, keep) = vacancy_block(bath, site)?;
    if keep.is_empty() {
        return Ok(out);
    }
    let g = dense_resolvent(&h, z)?;
    for (i, &a) in keep.iter().enumerate() {
        for (j, &b) in keep.iter().enumerate() {
            out[(a, b)] = g[(i, j)];
        }
    }
    Ok(out)
}

/// Eigenpairs of the bath with `site` removed; eigenvectors embedded over all `N` sites with a
/// zero at `site`.
pub fn vacancy_eigensystem(bath: &BathSpec, site: usize) -> Result<Eigensystem> {
    let n = bath.n_sites();
    let (h, keep) = vacancy_block(bath, site)?;
    if keep.is_empty() {
        return Ok(Eigensystem {
            values: Vec::new(),
            vectors: DMatrix::zeros(n, 0),
        });
    }
    let e = hermitian_eigensystem(&h);
    let mut vectors = DMatrix::<Complex64>::zeros(n, keep.len());
    for (i, &a) in keep.iter().enumerate() {
        vectors.set_row(a, &e.vectors.row(i));
    }
    Ok(Eigensystem {
        values: e.values,
        vectors,
    })
}

/// One named comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

impl ComparisonReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Which cross-checks `compare` runs and how.
#[derive(Debug, Clone)]
pub struct Suite {
    /// Random complex energies per resolvent check.
    pub z_samples: usize,
    pub seed: u64,
    pub gap_factor: f64,
    /// `i0+` regularizer for scattering states; `None` uses the bath default.
    pub delta: Option<f64>,
    /// Tolerance on resolvent entries.
    pub resolvent_tol: f64,
    /// Tolerance on bound-state energies and `1 - fidelity`.
    pub state_tol: f64,
    pub scattering_tol: f64,
    /// Test hook: added to `F_11` before assembling the resolvent.
    pub corrupt_f: Option<f64>,
}

impl Default for Suite {
    fn default() -> Self {
        Suite {
            z_samples: 20,
            seed: 0,
            gap_factor: 5.0,
            delta: None,
            resolvent_tol: 1e-9,
            state_tol: 1e-9,
            scattering_tol: 1e-6,
            corrupt_f: None,
        }
    }
}

struct Collector {
    checks: Vec<Check>,
}

impl Collector {
    fn push(&mut self, name: &str, err: f64, tol: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            max_abs_error: err,
            tolerance: tol,
            passed: err <= tol,
        });
    }

    /// An evaluation that errored is a failed check, never a skipped one.
    fn push_result(&mut self, name: &str, r: Result<f64>, tol: f64) {
        match r {
            Ok(err) => self.push(name, err, tol),
            Err(_) => self.push(name, f64::MAX, tol),
        }
    }
}

/// Runs every applicable cross-check for one bath + emitter instance.
pub fn compare(bath: &BathSpec, arr: &EmitterArraySpec, suite: &Suite) -> ComparisonReport {
    let mut out = Collector { checks: Vec::new() };
    let s = diagonalize_bath(bath);
    let h = match build_full_hamiltonian(bath, arr) {
        Ok(h) => h,
        Err(_) => {
            out.push("full_hamiltonian", f64::MAX, 0.0);
            return finish(out);
        }
    };
    let exact = exact_eigensystem(&h);
    let m = arr.m();

    out.push("bath_unitarity", s.unitarity_residual(), 1e-10);
    out.push("bath_reconstruction", s.reconstruction_residual(), 1e-10);
    out.push(
        "oracle_reconstruction",
        exact.reconstruction_residual(h.matrix()),
        1e-10,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let w = s.eigenvalues();
    let (lo, hi) = (w[0].min(arr.omega0) - 1.0, w[w.len() - 1].max(arr.omega0) + 1.0);
    let zs: Vec<Complex64> = (0..suite.z_samples)
        .map(|_| {
            let im = rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Complex64::new(rng.gen_range(lo..hi), im)
        })
        .collect();

    let resolvent = (|| -> Result<f64> {
        let mut err: f64 = 0.0;
        for &z in &zs {
            let mut f = multi::f_matrix(&s, arr, z)?.entries;
            if let Some(c) = suite.corrupt_f {
                f[(0, 0)] += Complex64::from(c);
            }
            let g = multi::multi_green_with(&s, arr, z, &f)?.matrix;
            err = err.max(linalg::max_abs_diff(&g, &direct_resolvent(&h, z)?));
        }
        Ok(err)
    })();
    out.push_result("resolvent_identity", resolvent, suite.resolvent_tol);

    if m == 1 {
        let e = arr.emitter(0);
        let dg = (|| -> Result<f64> {
            let mut err: f64 = 0.0;
            for &z in &zs {
                let g = dressed::dressed_green(&s, &e, z)?;
                err = err.max(linalg::max_abs_diff(&g, &direct_resolvent(&h, z)?));
            }
            Ok(err)
        })();
        out.push_result("dressed_green", dg, suite.resolvent_tol);
    }

    let bands = match detect_bands(&s, suite.gap_factor) {
        Ok(b) => b,
        Err(_) => {
            out.push("band_detection", f64::MAX, 0.0);
            return finish(out);
        }
    };
    bound_state_checks(&mut out, &s, arr, &bands, &exact, suite);

    if m == 1 {
        let e = arr.emitter(0);
        let delta = suite.delta.unwrap_or_else(|| s.default_delta());
        let sc = dressed::dressed_scattering_states(&s, &e, delta)
            .map(|v| v.iter().map(|st| st.residual).fold(0.0, f64::max));
        out.push_result("scattering_residual", sc, suite.scattering_tol);

        match dressed::classify_vds(&s, &e, &bands, delta) {
            Ok(c) if c.kind == VdsKind::Bound => {
                let vac = (|| -> Result<f64> {
                    let witness = c.witness.clone().ok_or_else(|| {
                        Error::InvalidArgument("bound VDS without witness".into())
                    })?;
                    let ve = vacancy_eigensystem(bath, e.site)?;
                    let space = ve.eigenspace(e.omega0, DEGENERACY_TOL);
                    Ok(1.0 - subspace_fidelity(&space, &witness))
                })();
                out.push_result("vds_vacancy", vac, suite.state_tol);
                out.push("vds_node", c.node, dressed::NODE_CHECK);
            }
            Ok(c) if c.kind == VdsKind::Unbound => {
                out.push("vds_node", c.node, 1e-8);
            }
            Ok(_) => {}
            Err(_) => out.push("vds_classification", f64::MAX, 0.0),
        }
    }

    if m >= 2 && !bands.in_band(arr.omega0) {
        let herm = multi::effective_hamiltonian_many(&s, arr, &bands)
            .map(|k| linalg::max_abs_diff(&k.matrix, &k.matrix.adjoint()));
        out.push_result("effective_hermiticity", herm, 1e-12);
    }
    finish(out)
}

fn bound_state_checks(
    out: &mut Collector,
    s: &crate::bath::SpectralData,
    arr: &EmitterArraySpec,
    bands: &BandStructure,
    exact: &Eigensystem,
    suite: &Suite,
) {
    let found: Result<Vec<(f64, DVector<Complex64>)>> = if arr.m() == 1 {
        dressed::solve_dressed_bound_states(s, &arr.emitter(0), bands)
            .map(|v| v.into_iter().map(|b| (b.energy, b.vector())).collect())
    } else {
        multi::solve_multi_bound_states(s, arr, bands)
            .map(|v| v.into_iter().map(|b| (b.energy, b.vector)).collect())
    };
    let found = match found {
        Ok(f) => f,
        Err(_) => {
            out.push("bound_state_count", f64::MAX, 0.0);
            return;
        }
    };
    let in_gap: Vec<&(f64, DVector<Complex64>)> =
        found.iter().filter(|(w, _)| !bands.in_band(*w)).collect();
    let oracle_gap = exact.in_gaps(bands);
    let diff = (in_gap.len() as f64 - oracle_gap.len() as f64).abs();
    out.push("bound_state_count", diff, 0.0);
    if diff != 0.0 {
        return;
    }
    let mut energy_err: f64 = 0.0;
    let mut fidelity_err: f64 = 0.0;
    for ((w, v), &k) in in_gap.iter().zip(&oracle_gap) {
        energy_err = energy_err.max((w - exact.values[k]).abs());
        let space = exact.eigenspace(exact.values[k], DEGENERACY_TOL);
        fidelity_err = fidelity_err.max(1.0 - subspace_fidelity(&space, v));
    }
    // bound states inside a band (regularized VDS) against the oracle eigenspace
    for (w, v) in found.iter().filter(|(w, _)| bands.in_band(*w)) {
        let space = exact.eigenspace(*w, DEGENERACY_TOL);
        fidelity_err = fidelity_err.max(1.0 - subspace_fidelity(&space, v));
    }
    out.push("bound_state_energy", energy_err, suite.state_tol);
    out.push("bound_state_fidelity", fidelity_err, suite.state_tol);
}

fn finish(out: Collector) -> ComparisonReport {
    let all_passed = out.checks.iter().all(|c| c.passed);
    ComparisonReport {
        checks: out.checks,
        all_passed,
    }
}
