//! Several identical emitters (shared `w0`, `g`) on distinct bath sites.
//!
//! With `|Psi_i(z)> = |e_i>/g + G_B(z)|x_i>` and
//! `F_ij(z) = (z - w0)/g^2 delta_ij - <x_i|G_B(z)|x_j>`, the resolvent over
//! `[e_1, .., e_M, x_0, .., x_{N-1}]` is `G(z) = G_B(z) + sum_ij (F^-1)_ij |Psi_i><Psi~_j|`.
//!
//! In a gap and at weak coupling, the emitters see each other through the effective Hamiltonian
//! `K = w0 + g^2 gamma_B(w0)` written over the normalized single-emitter bound states, where
//! `gamma_B(z)_ij = <x_i|G_B(z)|x_j>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::bath::{BandStructure, ComplexEnergy, SpectralData};
use crate::dressed::EmitterSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::roots;

/// `F(z)` with a condition number above this is treated as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Roots closer than this are handled as one degenerate cluster when building states.
pub const CLUSTER_TOL: f64 = 1e-8;

/// `min |beta| / max |beta|` below which the residue route replaces the lambda route.
pub const BETA_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmitterArraySpec {
    pub omega0: f64,
    pub g: f64,
    pub sites: Vec<usize>,
}

impl EmitterArraySpec {
    pub fn new(omega0: f64, g: f64, sites: Vec<usize>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("at least one emitter is required".into()));
        }
        if !omega0.is_finite() || !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "emitters need finite omega0 and g >= 0, got omega0 = {omega0}, g = {g}"
            )));
        }
        for (i, a) in sites.iter().enumerate() {
            if sites[..i].contains(a) {
                return Err(Error::InvalidArgument(format!(
                    "two emitters share site {a}"
                )));
            }
        }
        Ok(EmitterArraySpec { omega0, g, sites })
    }

    /// Groups single emitters; all must share `omega0` and `g`.
    pub fn from_emitters(emitters: &[EmitterSpec]) -> Result<Self> {
        let first = emitters
            .first()
            .ok_or_else(|| Error::InvalidArgument("at least one emitter is required".into()))?;
        if emitters
            .iter()
            .any(|e| e.omega0 != first.omega0 || e.g != first.g)
        {
            return Err(Error::InvalidArgument(
                "all emitters must share omega0 and g".into(),
            ));
        }
        Self::new(first.omega0, first.g, emitters.iter().map(|e| e.site).collect())
    }

    pub fn m(&self) -> usize {
        self.sites.len()
    }

    pub fn emitter(&self, i: usize) -> EmitterSpec {
        EmitterSpec {
            omega0: self.omega0,
            g: self.g,
            site: self.sites[i],
        }
    }

    fn check(&self, s: &SpectralData) -> Result<()> {
        for &x in &self.sites {
            s.check_site(x)?;
        }
        if self.g == 0.0 {
            return Err(Error::InvalidArgument(
                "g = 0: the emitters are decoupled".into(),
            ));
        }
        Ok(())
    }
}

/// Two-emitter scalars of `F(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoEmitterScalars {
    /// `A(z) = g^2/2 (F_22 - F_11)`.
    pub asymmetry: Complex64,
    /// `delta(z) = sqrt(g^4 F_12 F_21 + A^2)`.
    pub splitting: Complex64,
    /// `w0 + g^2/2 (<x_1|G_B|x_1> + <x_2|G_B|x_2>)`.
    pub shifted_center: Complex64,
}

#[derive(Debug, Clone)]
pub struct FMatrix {
    pub z: ComplexEnergy,
    pub entries: DMatrix<Complex64>,
    pub two: Option<TwoEmitterScalars>,
}

/// `G(z)` with the condition number of `F(z)`.
#[derive(Debug, Clone)]
pub struct MultiGreen {
    pub matrix: DMatrix<Complex64>,
    pub f_condition: f64,
}

/// Truncated T-matrix series and how it compares with the closed form.
#[derive(Debug, Clone)]
pub struct SeriesReport {
    pub matrix: DMatrix<Complex64>,
    /// Spectral radius of `g^2 gamma_e(z) gamma_B(z)`.
    pub spectral_radius: f64,
    pub converges: bool,
    /// `max |G_k - G|` after each order `k = 0..=k_max`.
    pub order_errors: Vec<f64>,
}

impl SeriesReport {
    pub fn final_error(&self) -> f64 {
        *self.order_errors.last().expect("at least order 0")
    }
}

/// A bound state of the full Hamiltonian found from `det F(w) = 0`.
#[derive(Debug, Clone)]
pub struct MultiBoundState {
    pub energy: f64,
    /// Unit vector over `[e_1.., x_0..]`.
    pub vector: DVector<Complex64>,
    /// Number of roots sharing this energy cluster.
    pub cluster_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StateRoute {
    /// Rank-one residue `g^2/beta Psi adj(F) Psi^dagger`.
    Residue,
    /// Null space of `F`, orthonormalized; used for clustered roots.
    NullSpace,
}

#[derive(Debug, Clone)]
pub struct TwoAtomPole {
    pub energy: f64,
    pub state: DVector<Complex64>,
    /// Trace of the residue; 1 for a simple pole.
    pub residue_trace: f64,
    pub det_f: Complex64,
    pub route: StateRoute,
}

#[derive(Debug, Clone)]
pub struct TwoAtomPoles {
    /// Every real in-gap root, ascending.
    pub poles: Vec<TwoAtomPole>,
}

impl TwoAtomPoles {
    /// The two poles nearest to `w`, as `(lower, upper)`.
    pub fn doublet_near(&self, w: f64) -> Option<(&TwoAtomPole, &TwoAtomPole)> {
        let mut idx: Vec<usize> = (0..self.poles.len()).collect();
        idx.sort_by(|&a, &b| {
            (self.poles[a].energy - w)
                .abs()
                .total_cmp(&(self.poles[b].energy - w).abs())
        });
        if idx.len() < 2 {
            return None;
        }
        let (a, b) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
        Some((&self.poles[a], &self.poles[b]))
    }

    pub fn omega_minus(&self, w: f64) -> Option<f64> {
        self.doublet_near(w).map(|(lo, _)| lo.energy)
    }

    pub fn omega_plus(&self, w: f64) -> Option<f64> {
        self.doublet_near(w).map(|(_, hi)| hi.energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EffectiveRoute {
    /// `lambda_s`, `lambda_a`, `Omega_i` assembly.
    Lambda,
    /// Sum of weak-coupling residues `sum w_pm / beta_pm (...)`.
    Residue,
    /// Both `delta` and `A` vanish: uncoupled identical emitters.
    Direct,
}

/// Weak-coupling pieces of the two-emitter effective Hamiltonian, all at `z = w0`.
#[derive(Debug, Clone)]
pub struct TwoEmitterPieces {
    pub lambda_s: f64,
    pub lambda_a: f64,
    /// `delta^2 / w~0 +- A`; infinite when `w~0 = 0`, where only the product `lambda_a Omega_i`
    /// is finite.
    pub omega: [f64; 2],
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub asymmetry: f64,
    pub splitting: f64,
    pub shifted_center: f64,
    /// `<Psi_i|Psi_i>`.
    pub norms: [f64; 2],
    pub f12: Complex64,
    /// Symmetric and asymmetric parts over the normalized basis.
    pub h_s: DMatrix<Complex64>,
    pub h_a: DMatrix<Complex64>,
    /// Coefficients over the unnormalized `|Psi_i>` from the lambda and residue assemblies.
    pub lambda_coefficients: DMatrix<Complex64>,
    pub residue_coefficients: DMatrix<Complex64>,
    /// `H_s + H_a` over the normalized basis, from the route below. Equals the compact form for
    /// equivalent sites; otherwise it differs from it at order `g^2`.
    pub assembled: DMatrix<Complex64>,
    pub route: EffectiveRoute,
}

#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    /// Normalized `|Psi~_i>` over `[e_1.., x_0..]`.
    pub basis: Vec<DVector<Complex64>>,
    /// Coefficients over `basis`: `w_BS^(i)` on the diagonal, `-g^2 F_ij(w0)` off it.
    pub matrix: DMatrix<Complex64>,
    /// `w0 + g^2 <x_i|G_B(w0)|x_i>`.
    pub bs_energies: Vec<f64>,
    /// `w0 + g^2 gamma_i` from the eigenvalues of `gamma_B(w0)`, ascending.
    pub gamma_energies: Vec<f64>,
    /// `|w_BS^(i) - w0| / Delta`, with `Delta` the distance of `w0` to the nearest band.
    pub detuning_ratio: Vec<f64>,
    pub pieces: Option<TwoEmitterPieces>,
}

impl EffectiveHamiltonian {
    /// Eigenvalues of the coefficient matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.matrix).0.iter().copied().collect()
    }

    /// `sum_ij C_ij |Psi~_i><Psi~_j|` on the full space.
    pub fn operator(&self) -> DMatrix<Complex64> {
        let b = basis_matrix(&self.basis);
        &b * &self.matrix * b.adjoint()
    }

    /// Overlaps `<Psi~_i|Psi~_j>`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        let b = basis_matrix(&self.basis);
        b.adjoint() * b
    }
}

fn basis_matrix(basis: &[DVector<Complex64>]) -> DMatrix<Complex64> {
    DMatrix::from_columns(basis)
}

fn cx(v: f64) -> Complex64 {
    Complex64::from(v)
}

/// `gamma_B(z)_ij = <x_i|G_B(z)|x_j>` and the columns `G_B(z)|x_j>`.
fn gamma_and_columns(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    z: ComplexEnergy,
) -> Result<(DMatrix<Complex64>, Vec<DVector<Complex64>>)> {
    let cols = arr
        .sites
        .iter()
        .map(|&x| s.green_column(z, x))
        .collect::<Result<Vec<_>>>()?;
    let m = arr.m();
    let mut gamma = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            gamma[(i, j)] = s.green(z, arr.sites[i], arr.sites[j])?;
        }
    }
    Ok((gamma, cols))
}

pub fn gamma_b(s: &SpectralData, arr: &EmitterArraySpec, z: ComplexEnergy) -> Result<DMatrix<Complex64>> {
    arr.check(s)?;
    Ok(gamma_and_columns(s, arr, z)?.0)
}

fn f_from_gamma(arr: &EmitterArraySpec, z: ComplexEnergy, gamma: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let m = arr.m();
    let diag = (z - arr.omega0) / (arr.g * arr.g);
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            diag - gamma[(i, j)]
        } else {
            -gamma[(i, j)]
        }
    })
}

fn two_scalars(arr: &EmitterArraySpec, f: &DMatrix<Complex64>, gamma: &DMatrix<Complex64>) -> TwoEmitterScalars {
    let g2 = arr.g * arr.g;
    let asymmetry = (f[(1, 1)] - f[(0, 0)]) * (0.5 * g2);
    let splitting = (f[(0, 1)] * f[(1, 0)] * (g2 * g2) + asymmetry * asymmetry).sqrt();
    let shifted_center = (gamma[(0, 0)] + gamma[(1, 1)]) * (0.5 * g2) + arr.omega0;
    TwoEmitterScalars {
        asymmetry,
        splitting,
        shifted_center,
    }
}

pub fn f_matrix(s: &SpectralData, arr: &EmitterArraySpec, z: ComplexEnergy) -> Result<FMatrix> {
    arr.check(s)?;
    let (gamma, _) = gamma_and_columns(s, arr, z)?;
    let entries = f_from_gamma(arr, z, &gamma);
    let two = (arr.m() == 2).then(|| two_scalars(arr, &entries, &gamma));
    Ok(FMatrix { z, entries, two })
}

/// Columns `|Psi_i(z)>` over `[e_1.., x_0..]`.
fn psi_kets(arr: &EmitterArraySpec, cols: &[DVector<Complex64>]) -> DMatrix<Complex64> {
    let m = arr.m();
    let n = cols[0].len();
    let mut p = DMatrix::<Complex64>::zeros(m + n, m);
    for (i, col) in cols.iter().enumerate() {
        p[(i, i)] = cx(1.0 / arr.g);
        p.view_mut((m, i), (n, 1)).copy_from(col);
    }
    p
}

fn condition(f: &DMatrix<Complex64>) -> f64 {
    let sv = f.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn multi_green(s: &SpectralData, arr: &EmitterArraySpec, z: ComplexEnergy) -> Result<MultiGreen> {
    arr.check(s)?;
    let (gamma, _) = gamma_and_columns(s, arr, z)?;
    let f = f_from_gamma(arr, z, &gamma);
    multi_green_with(s, arr, z, &f)
}

/// [`multi_green`] with a caller-supplied `F(z)`. Exists so consistency checks can be fed a
/// deliberately wrong `F`.
pub(crate) fn multi_green_with(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    z: ComplexEnergy,
    f: &DMatrix<Complex64>,
) -> Result<MultiGreen> {
    arr.check(s)?;
    let f_condition = condition(f);
    if !(f_condition < MAX_CONDITION) {
        return Err(Error::AtPole(format!(
            "F(z) is singular at z = {z} (condition {f_condition:.3e})"
        )));
    }
    let finv = f
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::AtPole(format!("F(z) is singular at z = {z}")))?;
    let m = arr.m();
    let n = s.n_sites();
    let kets = psi_kets(arr, &arr.sites.iter().map(|&x| s.green_column(z, x)).collect::<Result<Vec<_>>>()?);
    let bras = psi_kets(arr, &arr.sites.iter().map(|&x| s.green_row(z, x)).collect::<Result<Vec<_>>>()?);
    let mut g = DMatrix::<Complex64>::zeros(m + n, m + n);
    g.view_mut((m, m), (n, n)).copy_from(&s.green_matrix(z)?);
    g += kets * finv * bras.transpose();
    Ok(MultiGreen {
        matrix: g,
        f_condition,
    })
}

/// Eigenvalues of a general complex square matrix from its Schur form.
fn complex_eigenvalues(a: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (_, t) = a.clone().schur().unpack();
    t.diagonal().iter().copied().collect()
}

/// Resolvent from the geometric series `h = sum_k (g^2 gamma_e gamma_B)^k` truncated at
/// `k_max`, with `gamma_e = 1/(z - w0)`. Divergence is reported, not raised.
pub fn t_matrix_series_green(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    z: ComplexEnergy,
    k_max: usize,
) -> Result<SeriesReport> {
    arr.check(s)?;
    let m = arr.m();
    let n = s.n_sites();
    let g = arr.g;
    let d = z - arr.omega0;
    if d.norm() == 0.0 {
        return Err(Error::AtPole(format!("bare emitter pole at z = {z}")));
    }
    let gamma_e = Complex64::from(1.0) / d;
    let (gamma, cols) = gamma_and_columns(s, arr, z)?;
    let rows = arr
        .sites
        .iter()
        .map(|&x| s.green_row(z, x))
        .collect::<Result<Vec<_>>>()?;
    let psi = DMatrix::from_columns(&cols);
    let psi_bar = DMatrix::from_columns(&rows);
    let x = &gamma * (gamma_e * g * g);
    let spectral_radius = complex_eigenvalues(&x)
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);

    let closed = multi_green(s, arr, z)?.matrix;
    let gb = s.green_matrix(z)?;

    let assemble = |h: &DMatrix<Complex64>| -> DMatrix<Complex64> {
        let gee = h * gamma_e;
        let mut out = DMatrix::<Complex64>::zeros(m + n, m + n);
        out.view_mut((0, 0), (m, m)).copy_from(&gee);
        out.view_mut((m, 0), (n, m)).copy_from(&(&psi * &gee * cx(g)));
        out.view_mut((0, m), (m, n)).copy_from(&(&gee * psi_bar.transpose() * cx(g)));
        out.view_mut((m, m), (n, n))
            .copy_from(&(&gb + &psi * &gee * psi_bar.transpose() * cx(g * g)));
        out
    };

    let mut h = DMatrix::<Complex64>::identity(m, m);
    let mut term = DMatrix::<Complex64>::identity(m, m);
    let mut order_errors = Vec::with_capacity(k_max + 1);
    let mut matrix = assemble(&h);
    order_errors.push(linalg::max_abs_diff(&matrix, &closed));
    for _ in 0..k_max {
        term = &term * &x;
        h += &term;
        matrix = assemble(&h);
        order_errors.push(linalg::max_abs_diff(&matrix, &closed));
    }
    Ok(SeriesReport {
        matrix,
        spectral_radius,
        converges: spectral_radius < 1.0,
        order_errors,
    })
}

fn root_bounds(s: &SpectralData, arr: &EmitterArraySpec) -> (f64, f64) {
    let w = s.eigenvalues();
    (
        w[0].min(arr.omega0) - arr.g - 1.0,
        w[w.len() - 1].max(arr.omega0) + arr.g + 1.0,
    )
}

/// Number of positive eigenvalues of the Hermitian `F(w)`; nondecreasing across a gap.
fn positive_count(s: &SpectralData, arr: &EmitterArraySpec, w: f64) -> Result<usize> {
    let z = cx(w);
    let (gamma, _) = gamma_and_columns(s, arr, z)?;
    let f = f_from_gamma(arr, z, &gamma);
    let (vals, _) = linalg::hermitian_eigen(&f);
    Ok(vals.iter().filter(|&&v| v > 0.0).count())
}

/// All in-gap roots of `det F(w) = 0`, with multiplicity, ascending.
pub fn det_f_roots(s: &SpectralData, arr: &EmitterArraySpec, bands: &BandStructure) -> Result<Vec<f64>> {
    arr.check(s)?;
    let (floor, ceil) = root_bounds(s, arr);
    let count = |w: f64| positive_count(s, arr, w);
    let mut r = roots::roots_in_gaps(bands, floor, ceil, &count)?;
    r.sort_by(f64::total_cmp);
    Ok(r)
}

fn clusters(roots: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &r in roots {
        match out.last_mut() {
            Some(c) if r - c[c.len() - 1] < CLUSTER_TOL => c.push(r),
            _ => out.push(vec![r]),
        }
    }
    out
}

/// Orthonormal states for a cluster of `size` roots near `w`, from the near-null space of `F(w)`.
fn null_space_states(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    w: f64,
    size: usize,
) -> Result<Vec<DVector<Complex64>>> {
    let z = cx(w);
    let (gamma, cols) = gamma_and_columns(s, arr, z)?;
    let f = f_from_gamma(arr, z, &gamma);
    let (vals, vecs) = linalg::hermitian_eigen(&f);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()));
    let kets = psi_kets(arr, &cols);
    let mut states: Vec<DVector<Complex64>> = Vec::with_capacity(size);
    for &k in order.iter().take(size) {
        let mut v = &kets * vecs.column(k);
        for u in &states {
            let p = u.dotc(&v);
            v -= u * p;
        }
        let norm = v.norm();
        states.push(fix_phase(v / cx(norm)));
    }
    Ok(states)
}

fn fix_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    if let Some(p) = v.iter().find(|c| c.norm() > 1e-10).copied() {
        v *= p.conj() / p.norm();
    }
    v
}

/// Bound states of `M` emitters in the gaps of `bands`. Clustered roots share an orthonormalized
/// null-space basis.
pub fn solve_multi_bound_states(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    bands: &BandStructure,
) -> Result<Vec<MultiBoundState>> {
    let roots = det_f_roots(s, arr, bands)?;
    let mut out = Vec::with_capacity(roots.len());
    for c in clusters(&roots) {
        let mid = c.iter().sum::<f64>() / c.len() as f64;
        let states = null_space_states(s, arr, mid, c.len())?;
        for (&energy, vector) in c.iter().zip(states) {
            out.push(MultiBoundState {
                energy,
                vector,
                cluster_size: c.len(),
            });
        }
    }
    Ok(out)
}

fn require_two(arr: &EmitterArraySpec) -> Result<()> {
    if arr.m() != 2 {
        return Err(Error::InvalidArgument(format!(
            "two emitters required, got {}",
            arr.m()
        )));
    }
    Ok(())
}

fn det2(f: &DMatrix<Complex64>) -> Complex64 {
    f[(0, 0)] * f[(1, 1)] - f[(0, 1)] * f[(1, 0)]
}

/// `det F`, its derivative `d/dw det F` and the residue at `w`.
fn residue_parts(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    w: f64,
) -> Result<(Complex64, Complex64, DMatrix<Complex64>)> {
    let z = cx(w);
    let (gamma, cols) = gamma_and_columns(s, arr, z)?;
    let f = f_from_gamma(arr, z, &gamma);
    let kets = psi_kets(arr, &cols);
    // dF/dw is the Gram matrix of the |Psi_i>
    let gram = kets.adjoint() * &kets;
    let ddet = gram[(0, 0)] * f[(1, 1)] + f[(0, 0)] * gram[(1, 1)]
        - gram[(0, 1)] * f[(1, 0)]
        - f[(0, 1)] * gram[(1, 0)];
    let adj = DMatrix::from_row_slice(2, 2, &[f[(1, 1)], -f[(0, 1)], -f[(1, 0)], f[(0, 0)]]);
    let residue = &kets * adj * kets.adjoint() / ddet;
    Ok((det2(&f), ddet, residue))
}

/// Real in-gap roots of `det F = 0` for two emitters, each with its normalized residue state.
pub fn solve_two_atom_poles(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    bands: &BandStructure,
) -> Result<TwoAtomPoles> {
    require_two(arr)?;
    let roots = det_f_roots(s, arr, bands)?;
    let mut poles = Vec::with_capacity(roots.len());
    for c in clusters(&roots) {
        if c.len() == 1 {
            let mut w = c[0];
            let (mut det, ddet, mut residue) = residue_parts(s, arr, w)?;
            // one Newton polish; kept only if it improves |det F|
            if ddet.norm() > 0.0 {
                let step = (det / ddet).re;
                if step.abs() < roots::ROOT_TOL * 10.0 {
                    let cand = w - step;
                    let (d2, _, r2) = residue_parts(s, arr, cand)?;
                    if d2.norm() < det.norm() {
                        w = cand;
                        det = d2;
                        residue = r2;
                    }
                }
            }
            let trace = residue.trace().re;
            let j = (0..residue.nrows())
                .max_by(|&a, &b| residue[(a, a)].re.total_cmp(&residue[(b, b)].re))
                .expect("non-empty residue");
            let state = residue.column(j) / cx(residue[(j, j)].re.max(f64::MIN_POSITIVE).sqrt());
            let state = fix_phase(&state / cx(state.norm()));
            poles.push(TwoAtomPole {
                energy: w,
                state,
                residue_trace: trace,
                det_f: det,
                route: StateRoute::Residue,
            });
        } else {
            let mid = c.iter().sum::<f64>() / c.len() as f64;
            let states = null_space_states(s, arr, mid, c.len())?;
            for (&energy, state) in c.iter().zip(states) {
                let (gamma, _) = gamma_and_columns(s, arr, cx(energy))?;
                let det_f = det2(&f_from_gamma(arr, cx(energy), &gamma));
                poles.push(TwoAtomPole {
                    energy,
                    state,
                    residue_trace: 1.0,
                    det_f,
                    route: StateRoute::NullSpace,
                });
            }
        }
    }
    Ok(TwoAtomPoles { poles })
}

/// Gram matrix `<Psi_i(w0)|Psi_j(w0)>` of the unnormalized single-emitter states.
pub fn overlap_matrix(s: &SpectralData, arr: &EmitterArraySpec) -> Result<DMatrix<Complex64>> {
    arr.check(s)?;
    let (_, cols) = gamma_and_columns(s, arr, cx(arr.omega0))?;
    let kets = psi_kets(arr, &cols);
    Ok(kets.adjoint() * kets)
}

struct GapData {
    gamma: DMatrix<Complex64>,
    kets: DMatrix<Complex64>,
    norms: Vec<f64>,
    delta_gap: f64,
}

fn gap_data(s: &SpectralData, arr: &EmitterArraySpec, bands: &BandStructure) -> Result<GapData> {
    arr.check(s)?;
    if bands.in_band(arr.omega0) {
        return Err(Error::InvalidRegime(format!(
            "w0 = {} lies inside a band; the effective Hamiltonian needs w0 in a gap",
            arr.omega0
        )));
    }
    let (gamma, cols) = gamma_and_columns(s, arr, cx(arr.omega0))?;
    let kets = psi_kets(arr, &cols);
    let norms = (0..arr.m()).map(|i| kets.column(i).norm_squared()).collect();
    Ok(GapData {
        gamma,
        kets,
        norms,
        delta_gap: bands.detuning(arr.omega0),
    })
}

fn normalized_basis(d: &GapData) -> Vec<DVector<Complex64>> {
    (0..d.norms.len())
        .map(|i| d.kets.column(i) / cx(d.norms[i].sqrt()))
        .collect()
}

fn normalize_coefficients(c: &DMatrix<Complex64>, norms: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * (norms[i] * norms[j]).sqrt())
}

/// `K = w0 + g^2 gamma_B(w0)`.
fn k_matrix(arr: &EmitterArraySpec, gamma: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let m = arr.m();
    let k = gamma * cx(arr.g * arr.g) + DMatrix::<Complex64>::identity(m, m) * cx(arr.omega0);
    linalg::hermitian_part(&k)
}

fn common(arr: &EmitterArraySpec, d: &GapData) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let g2 = arr.g * arr.g;
    let bs: Vec<f64> = (0..arr.m())
        .map(|i| arr.omega0 + g2 * d.gamma[(i, i)].re)
        .collect();
    let (gvals, _) = linalg::hermitian_eigen(&d.gamma);
    let gamma_energies = gvals.iter().map(|&v| arr.omega0 + g2 * v).collect();
    let ratio = bs
        .iter()
        .map(|&w| (w - arr.omega0).abs() / d.delta_gap)
        .collect();
    (bs, gamma_energies, ratio)
}

/// Effective Hamiltonian of two emitters with `w0` in a gap, with the symmetric/asymmetric
/// decomposition built from the weak-coupling residues.
pub fn effective_hamiltonian_two(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    bands: &BandStructure,
) -> Result<EffectiveHamiltonian> {
    require_two(arr)?;
    let d = gap_data(s, arr, bands)?;
    let (bs_energies, gamma_energies, detuning_ratio) = common(arr, &d);
    let g2 = arr.g * arr.g;

    let f = f_from_gamma(arr, cx(arr.omega0), &d.gamma);
    let sc = two_scalars(arr, &f, &d.gamma);
    let a = sc.asymmetry.re;
    let delta = sc.splitting.re;
    let wt = sc.shifted_center.re;
    let n1 = d.norms[0];
    let n2 = d.norms[1];
    let dn = n1 - n2;
    let sn = n1 + n2;
    let beta_plus = a * dn + delta * sn;
    let beta_minus = a * dn - delta * sn;
    let bb = beta_plus * beta_minus;
    let f12 = f[(0, 1)];
    let f21 = f[(1, 0)];
    let off12 = -f12 * g2;
    let off21 = -f21 * g2;

    let lambda_s = -2.0 * delta * delta * sn / bb;
    let lambda_a = 2.0 * wt * a * dn / bb;
    let omega = [delta * delta / wt + a, delta * delta / wt - a];
    // lambda_a Omega_i, written without dividing by w~0
    let la_omega = [
        2.0 * a * dn * (delta * delta + wt * a) / bb,
        2.0 * a * dn * (delta * delta - wt * a) / bb,
    ];

    let c_s = DMatrix::from_row_slice(
        2,
        2,
        &[
            cx(lambda_s * bs_energies[0]),
            off12 * lambda_s,
            off21 * lambda_s,
            cx(lambda_s * bs_energies[1]),
        ],
    );
    let c_a = DMatrix::from_row_slice(
        2,
        2,
        &[cx(la_omega[0]), off12 * lambda_a, off21 * lambda_a, cx(la_omega[1])],
    );
    let lambda_coefficients = &c_s + &c_a;

    let mut residue_coefficients = DMatrix::<Complex64>::zeros(2, 2);
    for sign in [1.0, -1.0] {
        let beta = a * dn + sign * delta * sn;
        let w = wt + sign * delta;
        let block = DMatrix::from_row_slice(
            2,
            2,
            &[cx(a + sign * delta), off12, off21, cx(-a + sign * delta)],
        );
        residue_coefficients += block * cx(w / beta);
    }

    let k = k_matrix(arr, &d.gamma);
    let route = if bb == 0.0 || !bb.is_finite() {
        EffectiveRoute::Direct
    } else if beta_plus.abs().min(beta_minus.abs())
        < BETA_RATIO * beta_plus.abs().max(beta_minus.abs())
    {
        EffectiveRoute::Residue
    } else {
        EffectiveRoute::Lambda
    };
    let assembled = match route {
        EffectiveRoute::Lambda => normalize_coefficients(&lambda_coefficients, &d.norms),
        EffectiveRoute::Residue => normalize_coefficients(&residue_coefficients, &d.norms),
        EffectiveRoute::Direct => k.clone(),
    };

    let pieces = TwoEmitterPieces {
        lambda_s,
        lambda_a,
        omega,
        beta_plus,
        beta_minus,
        asymmetry: a,
        splitting: delta,
        shifted_center: wt,
        norms: [n1, n2],
        f12,
        h_s: normalize_coefficients(&c_s, &d.norms),
        h_a: normalize_coefficients(&c_a, &d.norms),
        lambda_coefficients,
        residue_coefficients,
        assembled,
        route,
    };
    Ok(EffectiveHamiltonian {
        basis: normalized_basis(&d),
        matrix: k,
        bs_energies,
        gamma_energies,
        detuning_ratio,
        pieces: Some(pieces),
    })
}

/// `M`-emitter effective Hamiltonian `K = w0 + g^2 gamma_B(w0)` over the normalized
/// single-emitter bound states, with `w0` in a gap.
pub fn effective_hamiltonian_many(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    bands: &BandStructure,
) -> Result<EffectiveHamiltonian> {
    let d = gap_data(s, arr, bands)?;
    let (bs_energies, gamma_energies, detuning_ratio) = common(arr, &d);
    Ok(EffectiveHamiltonian {
        basis: normalized_basis(&d),
        matrix: k_matrix(arr, &d.gamma),
        bs_energies,
        gamma_energies,
        detuning_ratio,
        pieces: None,
    })
}
