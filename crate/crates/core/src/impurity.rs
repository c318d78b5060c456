//! Static contact impurity `V = eps |0><0|` on one bath site.
//!
//! The perturbed resolvent is the rank-one update
//! `G(z) = G_B(z) + |psi(z)><psi~(z)| / f(z)` with `|psi(z)> = G_B(z)|0>`,
//! `<psi~(z)| = <0|G_B(z)` and `f(z) = 1/eps - <0|G_B(z)|0>`. A vacancy is the `eps -> inf`
//! limit, where `1/eps` drops out.
//!
//! The closed form holds everywhere off the poles; the T-matrix series it sums only converges for
//! `|eps <0|G_B(z)|0>| < 1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bath::{BandStructure, ComplexEnergy, SpectralData};
use crate::error::{Error, Result};
use crate::roots;

/// `|f(z)|` below this is treated as sitting on a pole of the impurity resolvent.
pub const AT_POLE: f64 = 1e-13;

/// `|<0|k>|` below this is a node of mode `k` at the impurity.
pub const NODE_TOL: f64 = 1e-10;

/// `|f(w_k+)|` below this selects the untouched-mode branch of a scattering state.
pub const SCATTERING_POLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    Finite(f64),
    /// Infinite potential: the site is removed from the lattice.
    Vacancy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpuritySpec {
    pub site: usize,
    pub strength: Strength,
}

impl ImpuritySpec {
    pub fn new(site: usize, eps: f64) -> Result<Self> {
        if !eps.is_finite() {
            return Err(Error::InvalidArgument(
                "impurity strength must be finite; use ImpuritySpec::vacancy".into(),
            ));
        }
        Ok(ImpuritySpec {
            site,
            strength: Strength::Finite(eps),
        })
    }

    pub fn vacancy(site: usize) -> Self {
        ImpuritySpec {
            site,
            strength: Strength::Vacancy,
        }
    }

    /// `1/eps`, zero for a vacancy, infinite for `eps = 0`.
    fn inverse_strength(&self) -> f64 {
        match self.strength {
            Strength::Finite(e) => 1.0 / e,
            Strength::Vacancy => 0.0,
        }
    }
}

/// Photonic bound state of the impurity (or vacancy) problem.
#[derive(Debug, Clone)]
pub struct ImpurityBoundState {
    pub energy: f64,
    /// Normalized `N |psi(w_BS)>`.
    pub wavefunction: DVector<Complex64>,
    /// `N = <0|G_B^2(w_BS)|0>^(-1/2)`.
    pub norm_factor: f64,
    /// Trace of the residue of `G` at the pole; 1 for a non-degenerate bound state.
    pub residue_trace: f64,
}

/// `|psi(z)> = G_B(z)|0>` (unnormalized).
pub fn impurity_state(
    s: &SpectralData,
    spec: &ImpuritySpec,
    z: ComplexEnergy,
) -> Result<DVector<Complex64>> {
    s.green_column(z, spec.site)
}

/// `f(z) = 1/eps - <0|G_B(z)|0>`.
pub fn impurity_pole_function(
    s: &SpectralData,
    spec: &ImpuritySpec,
    z: ComplexEnergy,
) -> Result<Complex64> {
    if spec.strength == Strength::Vacancy {
        return Err(Error::InvalidArgument(
            "vacancy has no finite pole function; use vacancy_green / solve_vacancy_bound_states"
                .into(),
        ));
    }
    Ok(spec.inverse_strength() - s.green(z, spec.site, spec.site)?)
}

/// Resolvent of `H_B + eps|0><0|`. A vacancy spec is forwarded to [`vacancy_green`].
pub fn impurity_green(
    s: &SpectralData,
    spec: &ImpuritySpec,
    z: ComplexEnergy,
) -> Result<DMatrix<Complex64>> {
    match spec.strength {
        Strength::Vacancy => vacancy_green(s, spec.site, z),
        Strength::Finite(eps) if eps == 0.0 => {
            s.check_site(spec.site)?;
            s.green_matrix(z)
        }
        Strength::Finite(_) => {
            let f = impurity_pole_function(s, spec, z)?;
            if f.norm() < AT_POLE {
                return Err(Error::AtPole(format!(
                    "impurity pole function vanishes at z = {z}"
                )));
            }
            rank_one_update(s, spec.site, z, f)
        }
    }
}

/// `G_B(z) + |psi><psi~| / denom`.
fn rank_one_update(
    s: &SpectralData,
    site: usize,
    z: ComplexEnergy,
    denom: Complex64,
) -> Result<DMatrix<Complex64>> {
    let ket = s.green_column(z, site)?;
    let bra = s.green_row(z, site)?;
    let mut g = s.green_matrix(z)?;
    g += (ket * bra.transpose()) / denom;
    Ok(g)
}

/// Resolvent with site `site` removed: `G_B - |psi><psi~| / <0|G_B|0>`. The row and column of the
/// removed site vanish.
pub fn vacancy_green(s: &SpectralData, site: usize, z: ComplexEnergy) -> Result<DMatrix<Complex64>> {
    let g00 = s.green(z, site, site)?;
    if g00.norm() < AT_POLE {
        return Err(Error::AtPole(format!(
            "<0|G_B(z)|0> vanishes at z = {z}: vacancy bound state"
        )));
    }
    rank_one_update(s, site, z, -g00)
}

fn bound_state_at(s: &SpectralData, site: usize, energy: f64) -> Result<ImpurityBoundState> {
    let z = Complex64::from(energy);
    let psi = s.green_column(z, site)?;
    let g2 = s.green_squared(z, site, site)?.re;
    let norm_factor = g2.powf(-0.5);
    let residue_trace = psi.norm_squared() / g2;
    Ok(ImpurityBoundState {
        energy,
        wavefunction: psi * Complex64::from(norm_factor),
        norm_factor,
        residue_trace,
    })
}

/// All real roots of `f(w) = 0` inside the gaps of `bands`, each with its normalized state.
///
/// `f` increases strictly between bath poles, so each gap holds at most one root (plus one in
/// a semi-infinite tail when `eps` has the matching sign). A vacancy spec is forwarded to
/// [`solve_vacancy_bound_states`].
pub fn solve_impurity_bound_state(
    s: &SpectralData,
    spec: &ImpuritySpec,
    bands: &BandStructure,
) -> Result<Vec<ImpurityBoundState>> {
    let eps = match spec.strength {
        Strength::Vacancy => return solve_vacancy_bound_states(s, spec.site, bands),
        Strength::Finite(e) => e,
    };
    s.check_site(spec.site)?;
    if eps == 0.0 {
        return Ok(Vec::new());
    }
    let w = s.eigenvalues();
    let floor = w[0] + eps.min(0.0) - 1.0;
    let ceil = w[w.len() - 1] + eps.max(0.0) + 1.0;
    let count = |x: f64| -> Result<usize> {
        Ok((impurity_pole_function(s, spec, Complex64::from(x))?.re > 0.0) as usize)
    };
    roots::roots_in_gaps(bands, floor, ceil, &count)?
        .into_iter()
        .map(|e| bound_state_at(s, spec.site, e))
        .collect()
}

/// Zeros of `<0|G_B(w)|0>` in the gaps: the bound states left behind by a vacancy at `site`.
pub fn solve_vacancy_bound_states(
    s: &SpectralData,
    site: usize,
    bands: &BandStructure,
) -> Result<Vec<ImpurityBoundState>> {
    s.check_site(site)?;
    let w = s.eigenvalues();
    let count = |x: f64| -> Result<usize> {
        Ok((s.green(Complex64::from(x), site, site)?.re < 0.0) as usize)
    };
    roots::roots_in_gaps(bands, w[0] - 1.0, w[w.len() - 1] + 1.0, &count)?
        .into_iter()
        .map(|e| bound_state_at(s, site, e))
        .collect()
}

/// Normalized vacancy bound state at a known zero of `<0|G_B|0>`: the residue of
/// [`vacancy_green`] there, `|psi><psi| / <0|G_B^2|0>`, written as a ket.
pub fn vacancy_bound_state_at(
    s: &SpectralData,
    site: usize,
    energy: f64,
) -> Result<ImpurityBoundState> {
    let g00 = s.green(Complex64::from(energy), site, site)?;
    if g00.norm() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "no vacancy bound state at {energy}: <0|G_B|0> = {g00}"
        )));
    }
    bound_state_at(s, site, energy)
}

/// Lippmann-Schwinger state grown from bath mode `k`, evaluated at `w_k + i delta`:
/// `|k> + <0|k>/f(w_k+) |psi(w_k+)>`, or `|k>` itself when the mode has a node at the impurity or
/// `f(w_k+)` vanishes.
pub fn impurity_scattering_state(
    s: &SpectralData,
    spec: &ImpuritySpec,
    k: usize,
    delta: f64,
) -> Result<DVector<Complex64>> {
    if k >= s.n_sites() {
        return Err(Error::InvalidArgument(format!("mode index {k} out of range")));
    }
    s.check_site(spec.site)?;
    let mode = s.mode(k);
    let overlap = s.amplitude(spec.site, k);
    if overlap.norm() < NODE_TOL {
        return Ok(mode);
    }
    if spec.strength == Strength::Finite(0.0) {
        return Ok(mode);
    }
    let z = Complex64::new(s.eigenvalues()[k], delta);
    let f = spec.inverse_strength() - s.green(z, spec.site, spec.site)?;
    if f.norm() < SCATTERING_POLE_TOL {
        return Ok(mode);
    }
    let psi = s.green_column(z, spec.site)?;
    Ok(mode + psi * (overlap / f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{build_uniform_chain, detect_bands, diagonalize_bath};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_site_scalars() {
        let s = diagonalize_bath(&build_uniform_chain(1, 0.0, 0.0).unwrap());
        let spec = ImpuritySpec::new(0, 2.0).unwrap();
        let psi = impurity_state(&s, &spec, c(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(psi[0].re, 0.5, epsilon = 1e-15);

        // f(w) = 1/2 - 1/w
        let f = impurity_pole_function(&s, &spec, c(3.0, 0.0)).unwrap();
        assert_abs_diff_eq!(f.re, 0.5 - 1.0 / 3.0, epsilon = 1e-15);
        let f = impurity_pole_function(&s, &spec, c(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(f.norm(), 0.0, epsilon = 1e-15);

        let g = impurity_green(&s, &ImpuritySpec::new(0, 1.0).unwrap(), c(0.0, 2.0)).unwrap();
        let expected = Complex64::from(1.0) / c(-1.0, 2.0);
        assert_abs_diff_eq!((g[(0, 0)] - expected).norm(), 0.0, epsilon = 1e-15);

        let bands = detect_bands(&s, 5.0).unwrap();
        let bs = solve_impurity_bound_state(&s, &spec, &bands).unwrap();
        assert_eq!(bs.len(), 1);
        assert_abs_diff_eq!(bs[0].energy, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bs[0].wavefunction[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bs[0].residue_trace, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn large_strength_approaches_minus_g00() {
        let s = diagonalize_bath(&build_uniform_chain(4, 0.0, 1.0).unwrap());
        let z = c(0.3, 0.4);
        let g00 = s.green(z, 1, 1).unwrap();
        let f = impurity_pole_function(&s, &ImpuritySpec::new(1, 1e12).unwrap(), z).unwrap();
        assert_abs_diff_eq!((f + g00).norm(), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn zero_strength_is_bare_bath() {
        let s = diagonalize_bath(&build_uniform_chain(4, 0.0, 1.0).unwrap());
        let z = c(0.3, 0.4);
        let g = impurity_green(&s, &ImpuritySpec::new(2, 0.0).unwrap(), z).unwrap();
        assert_eq!(g, s.green_matrix(z).unwrap());
    }

    #[test]
    fn vacancy_rejected_by_pole_function() {
        let s = diagonalize_bath(&build_uniform_chain(3, 0.0, 1.0).unwrap());
        assert!(matches!(
            impurity_pole_function(&s, &ImpuritySpec::vacancy(1), c(0.0, 1.0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(ImpuritySpec::new(0, f64::INFINITY).is_err());
    }

    #[test]
    fn chain_center_state_at_zero() {
        let s = diagonalize_bath(&build_uniform_chain(3, 0.0, 1.0).unwrap());
        let spec = ImpuritySpec::new(1, 1.0).unwrap();
        let psi = impurity_state(&s, &spec, c(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(psi[0].re, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(psi[1].norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(psi[2].re, -0.5, epsilon = 1e-14);

        // the antisymmetric mode has a node at the center and is left untouched
        let k = impurity_scattering_state(&s, &spec, 1, 1e-8).unwrap();
        assert_eq!(k, s.mode(1));
    }

    #[test]
    fn vacancy_on_single_site_is_zero() {
        let s = diagonalize_bath(&build_uniform_chain(1, 0.0, 0.0).unwrap());
        let g = vacancy_green(&s, 0, c(0.5, 1.0)).unwrap();
        assert_abs_diff_eq!(g[(0, 0)].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn vacancy_pole_is_reported() {
        // <0|G_B(0)|0> = 0 at the center of the 3-site chain
        let s = diagonalize_bath(&build_uniform_chain(3, 0.0, 1.0).unwrap());
        assert!(matches!(
            vacancy_green(&s, 1, c(0.0, 0.0)),
            Err(Error::AtPole(_))
        ));
        let st = vacancy_bound_state_at(&s, 1, 0.0).unwrap();
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(st.wavefunction[0].re, -r, epsilon = 1e-14);
        assert_abs_diff_eq!(st.wavefunction[2].re, -r, epsilon = 1e-14);
    }
}
