mod common;

use common::*;
use dressed_resolvent::dressed::{
    classify_vds, dressed_green, dressed_scattering_state, pole_function_F,
    solve_dressed_bound_states, EmitterSpec, VdsKind,
};
use dressed_resolvent::impurity::{
    impurity_green, impurity_scattering_state, solve_impurity_bound_state, vacancy_green,
    ImpuritySpec,
};
use dressed_resolvent::multi::{
    det_f_roots, effective_hamiltonian_many, effective_hamiltonian_two, multi_green,
    overlap_matrix, solve_two_atom_poles, EffectiveRoute, EmitterArraySpec,
};
use dressed_resolvent::oracle::{
    build_full_hamiltonian, compare, dense_resolvent, direct_resolvent, exact_eigensystem,
    hermitian_eigensystem, impurity_hamiltonian, Suite,
};
use dressed_resolvent::{
    build_ssh_chain, build_uniform_chain, detect_bands, diagonalize_bath, BandStructure, Complex64,
    SpectralData,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAP_FACTOR: f64 = 5.0;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cx(x: f64) -> Complex64 {
    Complex64::from(x)
}

/// `w` inside a random gap of `bands`, at least 10% of the gap width (or 0.05) from its edges.
fn in_gap<R: Rng>(rng: &mut R, bands: &BandStructure) -> f64 {
    let gap = bands.gaps[rng.gen_range(0..bands.gaps.len())];
    if gap.lower == f64::NEG_INFINITY {
        gap.upper - rng.gen_range(0.05..1.5)
    } else if gap.upper == f64::INFINITY {
        gap.lower + rng.gen_range(0.05..1.5)
    } else {
        gap.lower + gap.width() * rng.gen_range(0.1..0.9)
    }
}

fn in_gap_values(h: &DMatrix<Complex64>, bands: &BandStructure) -> Vec<f64> {
    let e = hermitian_eigensystem(h);
    e.in_gaps(bands).iter().map(|&k| e.values[k]).collect()
}

fn bath_green_dense(s: &SpectralData, z: Complex64) -> DMatrix<Complex64> {
    let n = s.n_sites();
    DMatrix::from_fn(n, n, |x, y| s.green(z, x, y).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn bath_resolvent_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=12);
        let bath = random_bath(&mut r, n);
        let s = diagonalize_bath(&bath);
        for _ in 0..20 {
            let z = random_z(&mut r, -4.0, 4.0);
            prop_assert!(identity_residual(&bath.matrix(), &bath_green_dense(&s, z), z) < 1e-9);
        }
    }

    #[test]
    fn bath_green_hermitian_on_real_axis(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=12);
        let s = diagonalize_bath(&random_bath(&mut r, n));
        let w = s.eigenvalues();
        let z = cx(if r.gen_bool(0.5) {
            w[n - 1] + r.gen_range(0.1..2.0)
        } else {
            w[0] - r.gen_range(0.1..2.0)
        });
        let g = bath_green_dense(&s, z);
        prop_assert!(max_abs_diff(&g, &g.adjoint()) < 1e-12);
    }

    #[test]
    fn green_squared_is_minus_derivative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=12);
        let s = diagonalize_bath(&random_bath(&mut r, n));
        let z = random_z(&mut r, -3.0, 3.0);
        let (x, y) = (r.gen_range(0..n), r.gen_range(0..n));
        let h = 1e-6;
        let fd = (s.green(z + h, x, y).unwrap() - s.green(z - h, x, y).unwrap()) / (2.0 * h);
        prop_assert!((s.green_squared(z, x, y).unwrap() + fd).norm() < 1e-5);
    }

    #[test]
    fn impurity_green_matches_dense(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=12);
        let bath = random_bath(&mut r, n);
        let s = diagonalize_bath(&bath);
        let site = r.gen_range(0..n);
        let eps = r.gen_range(-3.0..3.0);
        let spec = ImpuritySpec::new(site, eps).unwrap();
        let h = impurity_hamiltonian(&bath, site, eps).unwrap();
        for _ in 0..20 {
            let z = random_z(&mut r, -5.0, 5.0);
            let dense = dense_resolvent(&h, z).unwrap();
            prop_assert!(max_abs_diff(&impurity_green(&s, &spec, z).unwrap(), &dense) < 1e-9);
        }
    }

    #[test]
    fn impurity_bound_state_count(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=12);
        let bath = random_bath(&mut r, n);
        let s = diagonalize_bath(&bath);
        let bands = detect_bands(&s, GAP_FACTOR).unwrap();
        let site = r.gen_range(0..n);
        let eps = r.gen_range(0.2..3.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let states = solve_impurity_bound_state(&s, &ImpuritySpec::new(site, eps).unwrap(), &bands)
            .unwrap();
        let oracle = in_gap_values(&impurity_hamiltonian(&bath, site, eps).unwrap(), &bands);
        prop_assert_eq!(states.len(), oracle.len());
        for (b, w) in states.iter().zip(&oracle) {
            prop_assert!((b.energy - w).abs() < 1e-9);
        }
    }

    #[test]
    fn impurity_scattering_residual_shrinks(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=12);
        let bath = random_bath(&mut r, n);
        let s = diagonalize_bath(&bath);
        let site = r.gen_range(0..n);
        let eps = r.gen_range(-2.0..2.0);
        let spec = ImpuritySpec::new(site, eps).unwrap();
        let h = impurity_hamiltonian(&bath, site, eps).unwrap();
        let residual = |k: usize, delta: f64| {
            let psi = impurity_scattering_state(&s, &spec, k, delta).unwrap();
            let w = s.eigenvalues()[k];
            (&h * &psi - psi * cx(w)).norm()
        };
        for k in 0..n {
            let coarse = residual(k, 1e-6);
            let fine = residual(k, 1e-8);
            prop_assert!(fine <= coarse || fine < 1e-13, "k {}: {} -> {}", k, coarse, fine);
        }
    }

    #[test]
    fn vacancy_is_strong_impurity_limit(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=12);
        let s = diagonalize_bath(&random_bath(&mut r, n));
        let site = r.gen_range(0..n);
        let strong = ImpuritySpec::new(site, 1e8).unwrap();
        for _ in 0..5 {
            let z = random_z(&mut r, -3.0, 3.0);
            let v = vacancy_green(&s, site, z).unwrap();
            prop_assert!(max_abs_diff(&impurity_green(&s, &strong, z).unwrap(), &v) < 1e-6);
        }
    }

    #[test]
    fn dressed_green_resolvent_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=12);
        let bath = random_bath(&mut r, n);
        let s = diagonalize_bath(&bath);
        let arr = random_array(&mut r, n, 1, -2.0, 2.0);
        let h = build_full_hamiltonian(&bath, &arr).unwrap();
        for _ in 0..20 {
            let z = random_z(&mut r, -3.0, 3.0);
            let g = dressed_green(&s, &arr.emitter(0), z).unwrap();
            prop_assert!(identity_residual(h.matrix(), &g, z) < 1e-9);
        }
    }

    #[test]
    fn dressed_bound_states_are_complete_and_normalized(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=12);
        let bath = random_bath(&mut r, n);
        let s = diagonalize_bath(&bath);
        let bands = detect_bands(&s, GAP_FACTOR).unwrap();
        let w0 = in_gap(&mut r, &bands);
        let e = EmitterSpec::new(w0, r.gen_range(0.1..1.0), r.gen_range(0..n)).unwrap();
        let arr = EmitterArraySpec::new(w0, e.g, vec![e.site]).unwrap();
        let states = solve_dressed_bound_states(&s, &e, &bands).unwrap();
        let oracle = in_gap_values(build_full_hamiltonian(&bath, &arr).unwrap().matrix(), &bands);
        prop_assert_eq!(states.len(), oracle.len());
        for (b, w) in states.iter().zip(&oracle) {
            prop_assert!((b.energy - w).abs() < 1e-9);
            let mut raw = DVector::zeros(n + 1);
            raw[0] = cx(1.0);
            let col = s.green_column(cx(b.energy), e.site).unwrap() * cx(e.g);
            raw.rows_mut(1, n).copy_from(&col);
            prop_assert!((1.0 / raw.norm() - b.norm_factor).abs() < 1e-10);
            prop_assert!((b.vector().norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn multi_green_resolvent_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.gen_range(1..=3);
        let n = r.gen_range(m.max(2)..=12);
        let bath = random_bath(&mut r, n);
        let s = diagonalize_bath(&bath);
        let arr = random_array(&mut r, n, m, -2.0, 2.0);
        let h = build_full_hamiltonian(&bath, &arr).unwrap();
        for _ in 0..20 {
            let z = random_z(&mut r, -3.0, 3.0);
            let g = multi_green(&s, &arr, z).unwrap().matrix;
            prop_assert!(identity_residual(h.matrix(), &g, z) < 1e-9);
            prop_assert!(max_abs_diff(&g, &direct_resolvent(&h, z).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn det_f_roots_match_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=12);
        let bath = random_bath(&mut r, n);
        let s = diagonalize_bath(&bath);
        let bands = detect_bands(&s, GAP_FACTOR).unwrap();
        let w0 = in_gap(&mut r, &bands);
        let arr = EmitterArraySpec::new(w0, r.gen_range(0.1..1.0), random_sites(&mut r, n, 2))
            .unwrap();
        let roots = det_f_roots(&s, &arr, &bands).unwrap();
        let oracle = in_gap_values(build_full_hamiltonian(&bath, &arr).unwrap().matrix(), &bands);
        prop_assert_eq!(roots.len(), oracle.len());
        for (a, b) in roots.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gram_matrix_is_positive_semidefinite(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.gen_range(1..=3);
        let n = r.gen_range(m.max(2)..=12);
        let s = diagonalize_bath(&random_bath(&mut r, n));
        let w = s.eigenvalues();
        let w0 = w[n - 1] + r.gen_range(0.2..2.0);
        let arr = EmitterArraySpec::new(w0, r.gen_range(0.1..1.0), random_sites(&mut r, n, m))
            .unwrap();
        let gram = overlap_matrix(&s, &arr).unwrap();
        prop_assert!(max_abs_diff(&gram, &gram.adjoint()) < 1e-12);
        let e = hermitian_eigensystem(&gram);
        prop_assert!(e.values[0] > -1e-12 * e.values[m - 1]);
        for i in 0..m {
            let x = arr.sites[i];
            let expected = 1.0 / (arr.g * arr.g) + s.green_squared(cx(w0), x, x).unwrap().re;
            prop_assert!((gram[(i, i)].re - expected).abs() < 1e-10 * expected);
        }
    }
}

/// Staggered SSH chain (inequivalent sublattices) or a uniform chain; two emitters in a gap.
fn two_emitter_instance<R: Rng>(r: &mut R) -> (SpectralData, BandStructure, EmitterArraySpec) {
    let n = 2 * r.gen_range(10..=25);
    let stagger = r.gen_range(0.0..0.4);
    let freqs = (0..n).map(|x| if x % 2 == 0 { stagger } else { -stagger }).collect();
    let (j1, j2) = (r.gen_range(0.8..1.2), r.gen_range(0.3..0.7));
    let hops = (0..n - 1)
        .map(|x| dressed_resolvent::Hopping::new(x, x + 1, if x % 2 == 0 { j1 } else { j2 }))
        .collect();
    let bath = dressed_resolvent::BathSpec::new(freqs, hops).unwrap();
    let s = diagonalize_bath(&bath);
    let bands = detect_bands(&s, GAP_FACTOR).unwrap();
    let w0 = in_gap(r, &bands);
    let x1 = r.gen_range(n / 4..n / 2);
    let x2 = x1 + r.gen_range(1..6);
    let arr = EmitterArraySpec::new(w0, r.gen_range(0.02..0.2), vec![x1, x2]).unwrap();
    (s, bands, arr)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn decomposition_matches_residue_projectors(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (s, bands, arr) = two_emitter_instance(&mut r);
        let k = effective_hamiltonian_two(&s, &arr, &bands).unwrap();
        let p = k.pieces.unwrap();
        let scale = p.residue_coefficients.camax().max(1.0);
        if p.route == EffectiveRoute::Lambda {
            prop_assert!(
                max_abs_diff(&p.lambda_coefficients, &p.residue_coefficients) < 1e-10 * scale
            );
        }
        let sum = &p.h_s + &p.h_a;
        if p.route == EffectiveRoute::Lambda {
            prop_assert!(max_abs_diff(&sum, &p.assembled) < 1e-10 * scale);
        }
    }

    #[test]
    fn effective_hamiltonian_is_hermitian(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (s, bands, arr) = two_emitter_instance(&mut r);
        let two = effective_hamiltonian_two(&s, &arr, &bands).unwrap();
        prop_assert!(max_abs_diff(&two.matrix, &two.matrix.adjoint()) < 1e-12);
        let p = two.pieces.unwrap();
        prop_assert!(max_abs_diff(&p.assembled, &p.assembled.adjoint()) < 1e-12);
        let many = effective_hamiltonian_many(&s, &arr, &bands).unwrap();
        prop_assert!(max_abs_diff(&many.matrix, &two.matrix) < 1e-12);
    }

    #[test]
    fn two_atom_poles_match_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (s, bands, arr) = two_emitter_instance(&mut r);
        let poles = solve_two_atom_poles(&s, &arr, &bands).unwrap();
        let exact = exact_eigensystem(&build_full_hamiltonian(s.source(), &arr).unwrap());
        let oracle: Vec<f64> = exact.in_gaps(&bands).iter().map(|&k| exact.values[k]).collect();
        prop_assert_eq!(poles.poles.len(), oracle.len());
        for (p, w) in poles.poles.iter().zip(&oracle) {
            prop_assert!((p.energy - w).abs() < 1e-9);
            let space = exact.eigenspace(*w, 1e-9);
            let fid = dressed_resolvent::oracle::subspace_fidelity(&space, &p.state);
            prop_assert!(fid > 1.0 - 1e-8, "fidelity {}", fid);
        }
    }

    #[test]
    fn mirror_pairs_commute_with_swap(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(10..=60);
        let s = diagonalize_bath(&build_uniform_chain(n, 0.0, 1.0).unwrap());
        let bands = detect_bands(&s, GAP_FACTOR).unwrap();
        let x = r.gen_range(0..n / 2);
        let w0 = 2.0 + r.gen_range(0.1..1.0);
        let arr = EmitterArraySpec::new(w0, r.gen_range(0.01..0.3), vec![x, n - 1 - x]).unwrap();
        let k = effective_hamiltonian_two(&s, &arr, &bands).unwrap();
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]).map(cx);
        prop_assert!(max_abs_diff(&(&swap * &k.matrix), &(&k.matrix * &swap)) < 1e-10);
        prop_assert!(k.pieces.unwrap().h_a.camax() < 1e-12);
    }

    #[test]
    fn oracle_decompositions_are_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.gen_range(1..=3);
        let n = r.gen_range(m.max(2)..=40);
        let bath = random_bath(&mut r, n);
        let arr = random_array(&mut r, n, m, -2.0, 2.0);
        let h = build_full_hamiltonian(&bath, &arr).unwrap();
        let e = exact_eigensystem(&h);
        prop_assert!(e.unitarity_residual() < 1e-10);
        prop_assert!(e.reconstruction_residual(h.matrix()) < 1e-10);
        prop_assert!(max_abs_diff(h.matrix(), &h.matrix().adjoint()) < 1e-14);
    }

    #[test]
    fn default_compare_suite_passes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.gen_range(1..=2);
        let n = r.gen_range(4..=12);
        let bath = random_bath(&mut r, n);
        let arr = random_array(&mut r, n, m, -2.0, 2.0);
        let report = compare(&bath, &arr, &Suite::default());
        prop_assert!(report.all_passed, "{:?}", report.checks);
    }
}

#[test]
fn corrupted_f_fails_its_check() {
    let bath = build_uniform_chain(12, 0.0, 1.0).unwrap();
    let arr = EmitterArraySpec::new(2.5, 0.4, vec![3, 8]).unwrap();
    let suite = Suite {
        corrupt_f: Some(1e-3),
        ..Suite::default()
    };
    let report = compare(&bath, &arr, &suite);
    assert!(!report.all_passed);
    assert!(!report.check("resolvent_identity").unwrap().passed);
    assert!(report.check("bath_unitarity").unwrap().passed);
}

/// Trivial SSH chains with the emitter at the chiral point host a bound VDS at every site.
#[test]
fn bound_vds_is_a_vacancy_state() {
    let mut r = rng(11);
    let mut seen = 0;
    while seen < 20 {
        let cells = r.gen_range(4..=12);
        let bath = build_ssh_chain(cells, 0.0, r.gen_range(1.0..1.5), r.gen_range(0.2..0.6)).unwrap();
        let s = diagonalize_bath(&bath);
        let bands = detect_bands(&s, GAP_FACTOR).unwrap();
        if bands.gap_containing(0.0).is_none() {
            continue;
        }
        let site = r.gen_range(0..2 * cells);
        let e = EmitterSpec::new(0.0, r.gen_range(0.1..1.0), site).unwrap();
        let c = classify_vds(&s, &e, &bands, s.default_delta()).unwrap();
        assert_eq!(c.kind, VdsKind::Bound);
        let psi = c.witness.unwrap();
        let psi = &psi / cx(psi.norm());
        assert!(psi[site].norm() < 1e-9);
        let residual = bath.matrix() * &psi;
        for x in (0..2 * cells).filter(|&x| x != site) {
            assert!(residual[x].norm() < 1e-9, "site {x}: {}", residual[x]);
        }
        seen += 1;
    }
}

/// A mode with a node at the emitter on a bath eigenvalue equal to `w0` is never excited.
#[test]
fn bic_mode_is_not_excited() {
    for j in 0..5 {
        let n = 4 * j + 3;
        let s = diagonalize_bath(&build_uniform_chain(n, 0.0, 1.0).unwrap());
        let e = EmitterSpec::new(0.0, 0.7, n / 2).unwrap();
        let k = s.eigenvalues().iter().position(|w| w.abs() < 1e-12).unwrap();
        let st = dressed_scattering_state(&s, &e, k, s.default_delta()).unwrap();
        assert!(!st.regular);
        assert_eq!(st.vector[0], cx(0.0));
        assert!(phase_distance(&st.vector.rows(1, n).into_owned(), &s.mode(k)) < 1e-15);
    }
}

/// `Im <x|G_B(w + i delta)|x>` vanishes with `delta` exactly when every mode at `w` has a node
/// at `x`.
#[test]
fn imaginary_part_tracks_nodes() {
    let s = diagonalize_bath(&build_uniform_chain(7, 0.0, 1.0).unwrap());
    for site in 0..7 {
        let node = s.amplitude(site, 3).norm() < 1e-12;
        let im = |delta: f64| s.green(Complex64::new(0.0, delta), site, site).unwrap().im.abs();
        if node {
            assert!(im(1e-8) < 1e-6 && im(1e-10) < im(1e-8) * 1.01);
        } else {
            assert!(im(1e-8) > 1e6 && im(1e-10) > 10.0 * im(1e-8));
        }
    }
}

#[test]
fn pole_function_rises_between_poles() {
    let s = diagonalize_bath(&build_uniform_chain(9, 0.0, 1.0).unwrap());
    let e = EmitterSpec::new(0.3, 0.5, 2).unwrap();
    let w = s.eigenvalues();
    for p in w.windows(2) {
        let grid: Vec<f64> = (1..50).map(|i| p[0] + (p[1] - p[0]) * i as f64 / 50.0).collect();
        let f: Vec<f64> = grid
            .iter()
            .map(|&x| pole_function_F(&s, &e, cx(x)).unwrap().re)
            .collect();
        assert!(f.windows(2).all(|q| q[1] > q[0]));
    }
}
