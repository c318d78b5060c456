//! One emitter coupled to the bath at a single site.
//!
//! Seen from the field, the emitter is an impurity with energy-dependent strength
//! `eps(z) = g^2 / (z - w0)`. The full resolvent over `[e, x_0, .., x_{N-1}]` is
//! `G(z) = G_B(z) + |Psi(z)><Psi~(z)| / F(z)` with `|Psi(z)> = |e>/g + G_B(z)|x>` and
//! `F(z) = (z - w0)/g^2 - <x|G_B(z)|x>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bath::{BandStructure, ComplexEnergy, SpectralData, ON_SHELL};
use crate::error::{Error, Result};
use crate::impurity::{vacancy_bound_state_at, NODE_TOL, SCATTERING_POLE_TOL};
use crate::multi::EmitterArraySpec;
use crate::oracle;
use crate::roots;

/// `|F(z)|` below this is a pole of the dressed resolvent.
pub const AT_POLE: f64 = 1e-13;

/// `|<x|G_B(w0)|x>|` below this marks a vacancy-like dressed state.
pub const VDS_TOL: f64 = 1e-10;

/// Largest `|<x|Psi>|` (normalized state) accepted as a node.
pub const NODE_CHECK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterSpec {
    pub omega0: f64,
    pub g: f64,
    pub site: usize,
}

impl EmitterSpec {
    /// `g = 0` is accepted and treated as a decoupled emitter.
    pub fn new(omega0: f64, g: f64, site: usize) -> Result<Self> {
        if !omega0.is_finite() || !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "emitter needs finite omega0 and g >= 0, got omega0 = {omega0}, g = {g}"
            )));
        }
        Ok(EmitterSpec { omega0, g, site })
    }

    fn decoupled(&self) -> bool {
        self.g == 0.0
    }

    fn require_coupled(&self) -> Result<()> {
        if self.decoupled() {
            return Err(Error::InvalidArgument(
                "g = 0: the emitter is decoupled and has no dressed-state function".into(),
            ));
        }
        Ok(())
    }
}

/// `|Psi(z)>` split into its atomic and photonic parts, with `F(z)`.
#[derive(Debug, Clone)]
pub struct DressedStateFunction {
    pub z: ComplexEnergy,
    /// `1/g`.
    pub atomic_amplitude: Complex64,
    /// `G_B(z)|x>`.
    pub photonic: DVector<Complex64>,
    pub f_value: Complex64,
}

impl DressedStateFunction {
    /// `[atomic, photonic...]`.
    pub fn vector(&self) -> DVector<Complex64> {
        stack(self.atomic_amplitude, &self.photonic)
    }
}

#[derive(Debug, Clone)]
pub struct BoundState {
    pub energy: f64,
    /// `N`, real and positive.
    pub atomic_amplitude: Complex64,
    /// `N g G_B(w_BS)|x>`.
    pub photonic: DVector<Complex64>,
    /// `N = (1 + g^2 <x|G_B^2(w_BS)|x>)^(-1/2)`.
    pub norm_factor: f64,
    pub is_vds: bool,
    /// Energy inside a band: a bound state in the continuum.
    pub in_band: bool,
}

impl BoundState {
    /// The state over `[e, x_0, ..]`.
    pub fn vector(&self) -> DVector<Complex64> {
        stack(self.atomic_amplitude, &self.photonic)
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringState {
    pub energy: f64,
    pub mode: usize,
    /// Over `[e, x_0, ..]`.
    pub vector: DVector<Complex64>,
    /// False on the untouched branch, where the vector is `|k>` with no atomic weight.
    pub regular: bool,
    /// `||(H - w_k) Psi_k||`.
    pub residual: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdsKind {
    Bound,
    Unbound,
    None,
}

#[derive(Debug, Clone)]
pub struct VdsClassification {
    pub is_vds: bool,
    pub kind: VdsKind,
    /// Unit-norm photonic wavefunction at `w0` when a candidate exists.
    pub witness: Option<DVector<Complex64>>,
    /// `|<x|Psi>|` of the normalized full state at `w0`.
    pub node: f64,
}

fn stack(atomic: Complex64, photonic: &DVector<Complex64>) -> DVector<Complex64> {
    let n = photonic.len();
    DVector::from_iterator(n + 1, std::iter::once(atomic).chain(photonic.iter().copied()))
}

/// `eps(z) = g^2 / (z - w0)`.
pub fn self_potential(e: &EmitterSpec, z: ComplexEnergy) -> Result<Complex64> {
    let d = z - e.omega0;
    if d.norm() == 0.0 {
        return Err(Error::AtPole(format!(
            "self-potential diverges at z = w0 = {}",
            e.omega0
        )));
    }
    Ok(e.g * e.g / d)
}

/// `Sigma(z) = g^2 <x|G_B(z)|x>`.
pub fn self_energy(s: &SpectralData, e: &EmitterSpec, z: ComplexEnergy) -> Result<Complex64> {
    s.check_site(e.site)?;
    if e.decoupled() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(e.g * e.g * s.green(z, e.site, e.site)?)
}

/// `F(z) = (z - w0)/g^2 - <x|G_B(z)|x>`.
#[allow(non_snake_case)]
pub fn pole_function_F(s: &SpectralData, e: &EmitterSpec, z: ComplexEnergy) -> Result<Complex64> {
    e.require_coupled()?;
    Ok((z - e.omega0) / (e.g * e.g) - s.green(z, e.site, e.site)?)
}

pub fn dressed_state_function(
    s: &SpectralData,
    e: &EmitterSpec,
    z: ComplexEnergy,
) -> Result<DressedStateFunction> {
    e.require_coupled()?;
    let photonic = s.green_column(z, e.site)?;
    let f_value = (z - e.omega0) / (e.g * e.g) - s.green(z, e.site, e.site)?;
    Ok(DressedStateFunction {
        z,
        atomic_amplitude: Complex64::from(1.0 / e.g),
        photonic,
        f_value,
    })
}

/// Full `(N+1) x (N+1)` resolvent over `[e, x_0, ..]`.
pub fn dressed_green(
    s: &SpectralData,
    e: &EmitterSpec,
    z: ComplexEnergy,
) -> Result<DMatrix<Complex64>> {
    s.check_site(e.site)?;
    let n = s.n_sites();
    let mut g = DMatrix::<Complex64>::zeros(n + 1, n + 1);
    g.view_mut((1, 1), (n, n)).copy_from(&s.green_matrix(z)?);
    if e.decoupled() {
        g[(0, 0)] = bare_atom(e, z)?;
        return Ok(g);
    }
    let f = checked_f(s, e, z)?;
    let inv_g = Complex64::from(1.0 / e.g);
    let ket = stack(inv_g, &s.green_column(z, e.site)?);
    let bra = stack(inv_g, &s.green_row(z, e.site)?);
    g += (ket * bra.transpose()) / f;
    Ok(g)
}

fn bare_atom(e: &EmitterSpec, z: ComplexEnergy) -> Result<Complex64> {
    let d = z - e.omega0;
    if d.norm() < AT_POLE {
        return Err(Error::AtPole(format!("bare emitter pole at z = {z}")));
    }
    Ok(Complex64::from(1.0) / d)
}

fn checked_f(s: &SpectralData, e: &EmitterSpec, z: ComplexEnergy) -> Result<Complex64> {
    let f = pole_function_F(s, e, z)?;
    if f.norm() < AT_POLE {
        return Err(Error::AtPole(format!("F(z) vanishes at z = {z}")));
    }
    Ok(f)
}

/// `<e|G(z)|e> = 1 / (z - w0 - Sigma(z))`.
pub fn excitonic_green(s: &SpectralData, e: &EmitterSpec, z: ComplexEnergy) -> Result<Complex64> {
    let d = z - e.omega0 - self_energy(s, e, z)?;
    if d.norm() < AT_POLE * (e.g * e.g).max(f64::MIN_POSITIVE) {
        return Err(Error::AtPole(format!("excitonic resolvent pole at z = {z}")));
    }
    Ok(Complex64::from(1.0) / d)
}

/// Site block of [`dressed_green`]: the bath seen through an impurity of strength `eps(z)`.
pub fn field_green(
    s: &SpectralData,
    e: &EmitterSpec,
    z: ComplexEnergy,
) -> Result<DMatrix<Complex64>> {
    s.check_site(e.site)?;
    let mut g = s.green_matrix(z)?;
    if e.decoupled() {
        return Ok(g);
    }
    let f = checked_f(s, e, z)?;
    let ket = s.green_column(z, e.site)?;
    let bra = s.green_row(z, e.site)?;
    g += (ket * bra.transpose()) / f;
    Ok(g)
}

fn bound_state_at(s: &SpectralData, e: &EmitterSpec, energy: f64, in_band: bool) -> Result<BoundState> {
    let z = Complex64::from(energy);
    let psi = s.green_column(z, e.site)?;
    let g2 = s.green_squared(z, e.site, e.site)?.re;
    let norm_factor = (1.0 + e.g * e.g * g2).powf(-0.5);
    let photonic = psi * Complex64::from(norm_factor * e.g);
    let is_vds = photonic[e.site].norm() < NODE_CHECK;
    Ok(BoundState {
        energy,
        atomic_amplitude: Complex64::from(norm_factor),
        photonic,
        norm_factor,
        is_vds,
        in_band,
    })
}

/// Search window `[floor, ceil]` that contains every real root of `F`.
fn root_bounds(s: &SpectralData, e: &EmitterSpec) -> (f64, f64) {
    let w = s.eigenvalues();
    (
        w[0].min(e.omega0) - e.g - 1.0,
        w[w.len() - 1].max(e.omega0) + e.g + 1.0,
    )
}

/// All real roots of `F(w) = 0` in the gaps of `bands`, plus a bound state in the continuum at
/// `w0` when [`classify_vds`] finds the regularized in-band case.
///
/// `F` rises strictly between bath poles and runs from `-inf` to `+inf` across the spectrum, so
/// a finite bath always has at least one root outside its spectrum.
pub fn solve_dressed_bound_states(
    s: &SpectralData,
    e: &EmitterSpec,
    bands: &BandStructure,
) -> Result<Vec<BoundState>> {
    s.check_site(e.site)?;
    if e.decoupled() {
        if bands.gap_containing(e.omega0).is_none() {
            return Ok(Vec::new());
        }
        return Ok(vec![BoundState {
            energy: e.omega0,
            atomic_amplitude: Complex64::from(1.0),
            photonic: DVector::zeros(s.n_sites()),
            norm_factor: 1.0,
            is_vds: false,
            in_band: false,
        }]);
    }
    let (floor, ceil) = root_bounds(s, e);
    let count = |w: f64| -> Result<usize> {
        Ok((pole_function_F(s, e, Complex64::from(w))?.re > 0.0) as usize)
    };
    let mut states = roots::roots_in_gaps(bands, floor, ceil, &count)?
        .into_iter()
        .map(|w| bound_state_at(s, e, w, false))
        .collect::<Result<Vec<_>>>()?;

    if bands.in_band(e.omega0) {
        let vds = classify_vds(s, e, bands, s.default_delta())?;
        if vds.kind == VdsKind::Bound {
            states.push(bound_state_at(s, e, e.omega0, true)?);
        }
    }
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(states)
}

/// Dressed scattering state grown from bath mode `k` at `w_k + i delta`:
/// `|k> + <x|k>/F(w_k+) |Psi(w_k+)>`, or the untouched `|k>` when the mode has a node at the
/// emitter or `F(w_k+)` vanishes.
pub fn dressed_scattering_state(
    s: &SpectralData,
    e: &EmitterSpec,
    k: usize,
    delta: f64,
) -> Result<ScatteringState> {
    let h = full_hamiltonian(s, e)?;
    scattering_with(s, e, k, delta, &h)
}

/// [`dressed_scattering_state`] for every bath mode, sharing one Hamiltonian build.
pub fn dressed_scattering_states(
    s: &SpectralData,
    e: &EmitterSpec,
    delta: f64,
) -> Result<Vec<ScatteringState>> {
    let h = full_hamiltonian(s, e)?;
    (0..s.n_sites())
        .map(|k| scattering_with(s, e, k, delta, &h))
        .collect()
}

fn full_hamiltonian(s: &SpectralData, e: &EmitterSpec) -> Result<DMatrix<Complex64>> {
    s.check_site(e.site)?;
    let arr = EmitterArraySpec::new(e.omega0, e.g, vec![e.site])?;
    Ok(oracle::build_full_hamiltonian(s.source(), &arr)?.matrix().clone())
}

fn scattering_with(
    s: &SpectralData,
    e: &EmitterSpec,
    k: usize,
    delta: f64,
    h: &DMatrix<Complex64>,
) -> Result<ScatteringState> {
    if k >= s.n_sites() {
        return Err(Error::InvalidArgument(format!("mode index {k} out of range")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")));
    }
    let energy = s.eigenvalues()[k];
    let bare = stack(Complex64::new(0.0, 0.0), &s.mode(k));
    let overlap = s.amplitude(e.site, k);

    let mut regular = false;
    let mut vector = bare.clone();
    if !e.decoupled() && overlap.norm() >= NODE_TOL {
        let z = Complex64::new(energy, delta);
        let f = pole_function_F(s, e, z)?;
        if f.norm() >= SCATTERING_POLE_TOL {
            let psi = stack(Complex64::from(1.0 / e.g), &s.green_column(z, e.site)?);
            vector = bare + psi * (overlap / f);
            regular = true;
        }
    }
    let shifted = h * &vector - &vector * Complex64::from(energy);
    Ok(ScatteringState {
        energy,
        mode: k,
        residual: shifted.norm(),
        norm: vector.norm(),
        vector,
        regular,
    })
}

/// Decides whether a stationary state at `w = w0` with a node at the emitter site exists.
///
/// * bound: `<x|G_B(w0)|x> = 0` with `w0` in a gap, or in a band exactly on a bath eigenvalue
///   whose mode has a node at `x` (the regularized 0/0 case);
/// * unbound: `w0` in a band otherwise; the scattering state built from the nearest mode at
///   `w0 + i delta` has the node by construction, which is checked numerically;
/// * none: `w0` in a gap with `<x|G_B(w0)|x> != 0`, or `w0` on a bath pole.
pub fn classify_vds(
    s: &SpectralData,
    e: &EmitterSpec,
    bands: &BandStructure,
    delta: f64,
) -> Result<VdsClassification> {
    s.check_site(e.site)?;
    let none = VdsClassification {
        is_vds: false,
        kind: VdsKind::None,
        witness: None,
        node: f64::NAN,
    };
    if e.decoupled() {
        return Ok(none);
    }
    let w0 = Complex64::from(e.omega0);
    let g00 = match s.green(w0, e.site, e.site) {
        Ok(v) => v,
        Err(Error::Pole { .. }) => return Ok(none),
        Err(other) => return Err(other),
    };

    if bands.in_band(e.omega0) {
        let on_null_mode = s
            .eigenvalues()
            .iter()
            .any(|&w| (w - e.omega0).abs() < ON_SHELL);
        if on_null_mode && g00.norm() < VDS_TOL {
            return bound_witness(s, e);
        }
        return unbound_witness(s, e, delta);
    }
    if g00.norm() < VDS_TOL {
        return bound_witness(s, e);
    }
    Ok(none)
}

fn bound_witness(s: &SpectralData, e: &EmitterSpec) -> Result<VdsClassification> {
    let bs = bound_state_at(s, e, e.omega0, false)?;
    let full = bs.vector();
    let node = full[1 + e.site].norm() / full.norm();
    let pn = bs.photonic.norm();
    let witness = (pn > 0.0).then(|| &bs.photonic / Complex64::from(pn));
    Ok(VdsClassification {
        is_vds: node < NODE_CHECK,
        kind: VdsKind::Bound,
        witness,
        node,
    })
}

fn unbound_witness(s: &SpectralData, e: &EmitterSpec, delta: f64) -> Result<VdsClassification> {
    let k0 = s
        .eigenvalues()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - e.omega0).abs().total_cmp(&(b.1 - e.omega0).abs()))
        .map(|(k, _)| k)
        .expect("bath has at least one mode");
    let z = Complex64::new(e.omega0, delta);
    let col = s.green_column(z, e.site)?;
    // Reuse the column entry as <x|G_B|x> so the node cancels to rounding.
    let g00 = col[e.site];
    let overlap = s.amplitude(e.site, k0);
    let psi = stack(Complex64::from(1.0 / e.g), &col);
    let full = stack(Complex64::new(0.0, 0.0), &s.mode(k0)) - psi * (overlap / g00);
    let norm = full.norm();
    let photonic = full.rows(1, s.n_sites()).into_owned();
    let pn = photonic.norm();
    if !(norm > 0.0) || !(pn > 1e-12 * norm) {
        return Ok(VdsClassification {
            is_vds: false,
            kind: VdsKind::None,
            witness: None,
            node: f64::NAN,
        });
    }
    let node = full[1 + e.site].norm() / norm;
    Ok(VdsClassification {
        is_vds: node < NODE_CHECK,
        kind: if node < NODE_CHECK {
            VdsKind::Unbound
        } else {
            VdsKind::None
        },
        witness: Some(photonic / Complex64::from(pn)),
        node,
    })
}

/// Normalized vacancy bound state at `w0`, for comparison against a bound VDS witness.
pub fn vacancy_reference(s: &SpectralData, e: &EmitterSpec) -> Result<DVector<Complex64>> {
    Ok(vacancy_bound_state_at(s, e.site, e.omega0)?.wavefunction)
}
