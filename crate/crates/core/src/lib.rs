//! Resolvent (Green-function) toolkit for quantum emitters coupled to photonic lattices.
//!
//! The bath is a finite Hermitian hopping Hamiltonian over coupled cavities. Everything else is
//! expressed through its Green function `G_B(z) = (z - H_B)^-1`:
//!
//! * [`bath`]: bath construction, diagonalization, Green-function elements and band detection.
//! * [`impurity`]: the static contact-impurity problem (rank-one resolvent, bound and scattering
//!   states, vacancies).
//! * [`dressed`]: a single emitter seen as an energy-dependent impurity; dressed bound states,
//!   scattering states and vacancy-like dressed states.
//! * [`multi`]: several emitters, the `F(z)` matrix, T-matrix series, two-atom poles and
//!   weak-coupling effective Hamiltonians.
//! * [`oracle`]: brute-force ground truth from dense diagonalization/inversion of the full
//!   single-excitation Hamiltonian.
//!
//! All computations live in the single-excitation sector. The basis of the full space is ordered
//! as `[e_1, .., e_M, x_0, .., x_{N-1}]`.

pub mod bath;
pub mod dressed;
pub mod error;
pub mod format;
pub mod impurity;
mod linalg;
pub mod multi;
pub mod oracle;
mod roots;

pub use bath::{
    analytic_chain_green, bath_green_element, bath_green_squared_element, build_ssh_chain,
    build_uniform_chain, detect_bands, diagonalize_bath, BandStructure, BathSpec, ComplexEnergy,
    Hopping, Interval, SpectralData,
};
pub use error::{Error, Result};
pub use format::load_bath_spec;
pub use num_complex::Complex64;
