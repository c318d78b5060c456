use std::path::{Path, PathBuf};

use dressed_resolvent::dressed::{dressed_scattering_states, solve_dressed_bound_states};
use dressed_resolvent::impurity::NODE_TOL;
use dressed_resolvent::multi::{
    effective_hamiltonian_many, effective_hamiltonian_two, solve_multi_bound_states,
    EffectiveHamiltonian, EmitterArraySpec,
};
use dressed_resolvent::oracle::{build_full_hamiltonian, compare, exact_eigensystem, Suite};
use dressed_resolvent::{detect_bands, diagonalize_bath, BandStructure, Complex64, SpectralData};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{col, complex_matrix, num, write_csv, write_json};
use crate::CliError;

/// Default oracle tolerance for `bound-states`.
const BOUND_STATE_TOL: f64 = 1e-9;
/// Default residual tolerance for `scattering`.
const SCATTERING_TOL: f64 = 1e-6;

pub struct Options {
    pub out: PathBuf,
    pub delta: Option<f64>,
    pub tol: Option<f64>,
}

/// Whether every check a command ran stayed within tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Options {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn delta(&self, cfg: &RunConfig, s: &SpectralData) -> f64 {
        self.delta.or(cfg.delta).unwrap_or_else(|| s.default_delta())
    }

    fn tol(&self, cfg: &RunConfig, default: f64) -> f64 {
        self.tol.or(cfg.tol).unwrap_or(default)
    }
}

fn setup(cfg: &RunConfig) -> Result<(SpectralData, BandStructure), CliError> {
    let s = diagonalize_bath(&cfg.bath);
    let bands = detect_bands(&s, cfg.gap_factor)?;
    Ok((s, bands))
}

fn report(path: &Path, rows: usize) {
    println!("wrote {} ({rows} rows)", path.display());
}

pub fn spectrum(cfg: &RunConfig, opts: &Options) -> Result<Status, CliError> {
    let (s, bands) = setup(cfg)?;
    let u = cfg.energy_unit;

    let rows: Vec<Vec<String>> = s
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, w)| vec![k.to_string(), num(*w)])
        .collect();
    let path = opts.path("spectrum.csv");
    write_csv(&path, &["mode".into(), col("energy", u)], &rows)?;
    report(&path, rows.len());

    let mut rows = Vec::new();
    for (i, gap) in bands.gaps.iter().enumerate() {
        rows.push(vec!["gap".into(), num(gap.lower), num(gap.upper)]);
        if let Some(b) = bands.bands.get(i) {
            rows.push(vec!["band".into(), num(b.lower), num(b.upper)]);
        }
    }
    let path = opts.path("bands.csv");
    write_csv(&path, &["kind".into(), col("lower", u), col("upper", u)], &rows)?;
    report(&path, rows.len());

    if let Some(sp) = &cfg.spectrum {
        let [x, xp] = sp.sites;
        let mut rows = Vec::with_capacity(sp.points);
        for i in 0..sp.points {
            let re = sp.re_min + (sp.re_max - sp.re_min) * i as f64 / (sp.points - 1) as f64;
            let z = Complex64::new(re, sp.im);
            let (gr, gi) = match s.green(z, x, xp) {
                Ok(g) => (num(g.re), num(g.im)),
                Err(_) => ("nan".into(), "nan".into()),
            };
            rows.push(vec![num(re), num(sp.im), gr, gi]);
        }
        let inv = format!("1/{u}");
        let path = opts.path("green.csv");
        write_csv(
            &path,
            &[col("re_z", u), col("im_z", u), col("re_green", &inv), col("im_green", &inv)],
            &rows,
        )?;
        report(&path, rows.len());
    }
    Ok(Status::Pass)
}

/// Distance from `w` to the nearest oracle eigenvalue.
fn oracle_distance(values: &[f64], w: f64) -> f64 {
    values.iter().map(|v| (v - w).abs()).fold(f64::INFINITY, f64::min)
}

pub fn bound_states(cfg: &RunConfig, opts: &Options) -> Result<Status, CliError> {
    if cfg.emitters.is_empty() {
        return Err(CliError::Config("emitters: bound-states needs at least one emitter".into()));
    }
    let arr = cfg.array()?;
    let (s, bands) = setup(cfg)?;
    let exact = exact_eigensystem(&build_full_hamiltonian(&cfg.bath, &arr)?);
    let tol = opts.tol(cfg, BOUND_STATE_TOL);
    let u = cfg.energy_unit;
    let m = arr.m();
    let n = s.n_sites();

    let mut rows = Vec::new();
    let mut photonic = Vec::new();
    let mut worst: f64 = 0.0;
    let header: Vec<String>;
    if m == 1 {
        header = vec![
            "state".into(),
            col("energy", u),
            col("norm_factor", "1"),
            col("atomic_re", "1"),
            col("atomic_im", "1"),
            "is_vds".into(),
            "in_band".into(),
            col("oracle_error", u),
        ];
        for (i, b) in solve_dressed_bound_states(&s, &arr.emitter(0), &bands)?.iter().enumerate() {
            let err = oracle_distance(&exact.values, b.energy);
            worst = worst.max(err);
            rows.push(vec![
                i.to_string(),
                num(b.energy),
                num(b.norm_factor),
                num(b.atomic_amplitude.re),
                num(b.atomic_amplitude.im),
                b.is_vds.to_string(),
                b.in_band.to_string(),
                num(err),
            ]);
            for x in 0..n {
                let c = b.photonic[x];
                photonic.push(vec![i.to_string(), x.to_string(), num(c.re), num(c.im)]);
            }
        }
    } else {
        header = vec![
            "state".into(),
            col("energy", u),
            "cluster_size".into(),
            col("atomic_weight", "1"),
            col("oracle_error", u),
        ];
        for (i, b) in solve_multi_bound_states(&s, &arr, &bands)?.iter().enumerate() {
            let err = oracle_distance(&exact.values, b.energy);
            worst = worst.max(err);
            let atomic: f64 = b.vector.rows(0, m).norm_squared();
            rows.push(vec![
                i.to_string(),
                num(b.energy),
                b.cluster_size.to_string(),
                num(atomic),
                num(err),
            ]);
            for x in 0..n {
                let c = b.vector[m + x];
                photonic.push(vec![i.to_string(), x.to_string(), num(c.re), num(c.im)]);
            }
        }
    }
    let path = opts.path("bound_states.csv");
    write_csv(&path, &header, &rows)?;
    report(&path, rows.len());
    let path = opts.path("bound_states_photonic.csv");
    write_csv(
        &path,
        &["state".into(), "site".into(), col("re", "1"), col("im", "1")],
        &photonic,
    )?;
    report(&path, photonic.len());

    if worst > tol {
        eprintln!("oracle error {worst:.3e} exceeds tolerance {tol:.1e}");
        return Ok(Status::Fail);
    }
    Ok(Status::Pass)
}

pub fn scattering(cfg: &RunConfig, opts: &Options) -> Result<Status, CliError> {
    let e = cfg.single_emitter()?;
    let (s, _) = setup(cfg)?;
    let delta = opts.delta(cfg, &s);
    let tol = opts.tol(cfg, SCATTERING_TOL);
    let u = cfg.energy_unit;

    let states = dressed_scattering_states(&s, &e, delta)?;
    let mut worst: f64 = 0.0;
    let rows: Vec<Vec<String>> = states
        .iter()
        .map(|st| {
            worst = worst.max(st.residual);
            let node = s.amplitude(e.site, st.mode).norm() < NODE_TOL;
            vec![
                st.mode.to_string(),
                num(st.energy),
                num(st.vector[0].re),
                num(st.vector[0].im),
                node.to_string(),
                st.regular.to_string(),
                num(st.residual),
            ]
        })
        .collect();
    let path = opts.path("scattering.csv");
    write_csv(
        &path,
        &[
            "mode".into(),
            col("energy", u),
            col("atomic_re", "1"),
            col("atomic_im", "1"),
            "node_at_site".into(),
            "regular".into(),
            col("residual", u),
        ],
        &rows,
    )?;
    report(&path, rows.len());

    if worst > tol {
        eprintln!("scattering residual {worst:.3e} exceeds tolerance {tol:.1e}");
        return Ok(Status::Fail);
    }
    Ok(Status::Pass)
}

fn effective_for(
    s: &SpectralData,
    arr: &EmitterArraySpec,
    bands: &BandStructure,
) -> Result<EffectiveHamiltonian, CliError> {
    let h = if arr.m() == 2 {
        effective_hamiltonian_two(s, arr, bands)?
    } else {
        effective_hamiltonian_many(s, arr, bands)?
    };
    Ok(h)
}

/// The `M` oracle eigenvalues closest to `w0`, ascending, and the largest gap to `eigs`.
fn oracle_multiplet(cfg: &RunConfig, arr: &EmitterArraySpec, eigs: &[f64]) -> Result<(Vec<f64>, f64), CliError> {
    let exact = exact_eigensystem(&build_full_hamiltonian(&cfg.bath, arr)?);
    let mut near = exact.values.clone();
    near.sort_by(|a, b| (a - arr.omega0).abs().total_cmp(&(b - arr.omega0).abs()));
    near.truncate(arr.m());
    near.sort_by(f64::total_cmp);
    let err = eigs
        .iter()
        .zip(&near)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((near, err))
}

pub fn effective(cfg: &RunConfig, opts: &Options) -> Result<Status, CliError> {
    if cfg.emitters.is_empty() {
        return Err(CliError::Config("emitters: effective needs at least one emitter".into()));
    }
    let arr = cfg.array()?;
    let (s, bands) = setup(cfg)?;
    let h = effective_for(&s, &arr, &bands)?;
    let eigs = h.eigenvalues();
    let (oracle, oracle_error) = oracle_multiplet(cfg, &arr, &eigs)?;

    let pieces = h.pieces.as_ref().map(|p| {
        json!({
            "route": p.route,
            "lambda_s": p.lambda_s,
            "lambda_a": p.lambda_a,
            "omega": p.omega,
            "beta_plus": p.beta_plus,
            "beta_minus": p.beta_minus,
            "asymmetry": p.asymmetry,
            "splitting": p.splitting,
            "shifted_center": p.shifted_center,
            "norms": p.norms,
            "h_s": complex_matrix(&p.h_s),
            "h_a": complex_matrix(&p.h_a),
            "assembled": complex_matrix(&p.assembled),
        })
    });
    let doc = json!({
        "energy_unit": cfg.energy_unit,
        "omega0": arr.omega0,
        "g": arr.g,
        "sites": arr.sites,
        "matrix": complex_matrix(&h.matrix),
        "eigenvalues": eigs,
        "bs_energies": h.bs_energies,
        "gamma_energies": h.gamma_energies,
        "detuning_ratio": h.detuning_ratio,
        "oracle_eigenvalues": oracle,
        "oracle_error": oracle_error,
        "pieces": pieces,
    });
    let path = opts.path("effective.json");
    write_json(&path, &doc)?;
    println!("wrote {}", path.display());

    if let Some(sweep) = &cfg.sweep {
        let u = cfg.energy_unit;
        let mut rows = Vec::with_capacity(sweep.g_values.len());
        for &g in &sweep.g_values {
            let a = EmitterArraySpec::new(arr.omega0, g, arr.sites.clone())?;
            let h = effective_for(&s, &a, &bands)?;
            let eigs = h.eigenvalues();
            let (_, err) = oracle_multiplet(cfg, &a, &eigs)?;
            let m = a.m();
            let off = (0..m)
                .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|ij| h.matrix[ij].norm())
                .fold(0.0, f64::max);
            rows.push(vec![num(g), num(err), num(off)]);
        }
        let path = opts.path("effective_sweep.csv");
        write_csv(
            &path,
            &[col("g", u), col("eigenvalue_error", u), col("max_offdiag_abs", u)],
            &rows,
        )?;
        report(&path, rows.len());
    }
    Ok(Status::Pass)
}

pub fn compare_cmd(cfg: &RunConfig, opts: &Options) -> Result<Status, CliError> {
    if cfg.emitters.is_empty() {
        return Err(CliError::Config("emitters: compare needs at least one emitter".into()));
    }
    let arr = cfg.array()?;
    let mut suite = Suite {
        seed: cfg.seed,
        gap_factor: cfg.gap_factor,
        delta: opts.delta.or(cfg.delta),
        corrupt_f: cfg.compare.corrupt_f,
        ..Suite::default()
    };
    if let Some(z) = cfg.compare.z_samples {
        suite.z_samples = z;
    }
    if let Some(t) = opts.tol.or(cfg.tol) {
        suite.resolvent_tol = t;
        suite.state_tol = t;
    }
    let report = compare(&cfg.bath, &arr, &suite);
    let path = opts.path("compare.json");
    write_json(&path, &report)?;
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {:.3e} (tol {:.1e})", c.name, c.max_abs_error, c.tolerance);
    }
    println!("wrote {}", path.display());
    Ok(if report.all_passed { Status::Pass } else { Status::Fail })
}
