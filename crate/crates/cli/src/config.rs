//! Run configuration documents.
//!
//! ```toml
//! # the bath: exactly one of [builder], [bath] or bath_file
//! [builder]
//! kind = "uniform_chain"   # or "ssh_chain" with n_cells, j1, j2
//! n = 50
//! omega_c = 0.0
//! j = 1.0
//!
//! [[emitters]]
//! omega0 = 2.5
//! g = 0.3
//! site = 25
//!
//! gap_factor = 5.0
//! seed = 0
//! ```
//!
//! Optional tables: `[spectrum]` (a z-grid for `<x|G_B(z)|x'>`), `[sweep]` (g values for
//! `effective`) and `[compare]` (suite settings). Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use dressed_resolvent::dressed::EmitterSpec;
use dressed_resolvent::format::{line_of, BathDocument};
use dressed_resolvent::multi::EmitterArraySpec;
use dressed_resolvent::{build_ssh_chain, build_uniform_chain, load_bath_spec, BathSpec};
use serde::Deserialize;
use toml::Spanned;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    builder: Option<Spanned<Builder>>,
    bath: Option<BathDocument>,
    bath_file: Option<Spanned<String>>,
    #[serde(default)]
    emitters: Vec<Spanned<EmitterEntry>>,
    gap_factor: Option<Spanned<f64>>,
    #[serde(default)]
    seed: u64,
    delta: Option<Spanned<f64>>,
    tol: Option<Spanned<f64>>,
    spectrum: Option<SpectrumSection>,
    sweep: Option<SweepSection>,
    compare: Option<CompareSection>,
}

/// Builder parameters. Kept flat so unknown keys are reported at their own line.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Builder {
    kind: Spanned<String>,
    n: Option<usize>,
    n_cells: Option<usize>,
    #[serde(default)]
    omega_c: f64,
    j: Option<f64>,
    j1: Option<f64>,
    j2: Option<f64>,
}

impl Builder {
    fn build(&self) -> Result<BathSpec, String> {
        let reject = |present: bool, key: &str| {
            if present {
                Err(format!("builder: key `{key}` does not apply to kind `{}`", self.kind.get_ref()))
            } else {
                Ok(())
            }
        };
        let need = |v: Option<usize>, key: &str| v.ok_or_else(|| format!("builder: missing key `{key}`"));
        let needf = |v: Option<f64>, key: &str| v.ok_or_else(|| format!("builder: missing key `{key}`"));
        match self.kind.get_ref().as_str() {
            "uniform_chain" => {
                reject(self.n_cells.is_some(), "n_cells")?;
                reject(self.j1.is_some(), "j1")?;
                reject(self.j2.is_some(), "j2")?;
                build_uniform_chain(need(self.n, "n")?, self.omega_c, self.j.unwrap_or(1.0))
            }
            "ssh_chain" => {
                reject(self.n.is_some(), "n")?;
                reject(self.j.is_some(), "j")?;
                build_ssh_chain(
                    need(self.n_cells, "n_cells")?,
                    self.omega_c,
                    needf(self.j1, "j1")?,
                    needf(self.j2, "j2")?,
                )
            }
            other => {
                return Err(format!(
                    "builder: unknown kind `{other}`, expected `uniform_chain` or `ssh_chain`"
                ))
            }
        }
        .map_err(|e| format!("builder: {e}"))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmitterEntry {
    omega0: f64,
    g: f64,
    site: usize,
}

/// `<x|G_B(z)|x'>` on `z = re + i im`, `re` on a uniform grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub re_min: f64,
    pub re_max: f64,
    pub points: usize,
    pub im: f64,
    pub sites: [usize; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub g_values: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub z_samples: Option<usize>,
    pub corrupt_f: Option<f64>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub bath: BathSpec,
    /// Energies are in units of the chain hopping when a builder made the bath.
    pub energy_unit: &'static str,
    pub emitters: Vec<EmitterSpec>,
    pub gap_factor: f64,
    pub seed: u64,
    pub delta: Option<f64>,
    pub tol: Option<f64>,
    pub spectrum: Option<SpectrumSection>,
    pub sweep: Option<SweepSection>,
    pub compare: CompareSection,
}

impl RunConfig {
    /// All emitters as one array; they must share `omega0` and `g`.
    pub fn array(&self) -> Result<EmitterArraySpec, CliError> {
        EmitterArraySpec::from_emitters(&self.emitters).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn single_emitter(&self) -> Result<EmitterSpec, CliError> {
        match self.emitters.as_slice() {
            [e] => Ok(*e),
            [] => Err(CliError::Config("emitters: this command needs one emitter, none given".into())),
            more => Err(CliError::Config(format!(
                "emitters: this command needs exactly one emitter, {} given",
                more.len()
            ))),
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new("."))).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}:{m}", path.display())),
        other => other,
    })
}

/// Parses and validates a config document; relative `bath_file` paths resolve against `dir`.
/// Error messages start with the offending line number.
pub fn parse(text: &str, dir: &Path) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
        CliError::Config(format!("{line}: {}", e.message().trim_end()))
    })?;
    let at = |span: std::ops::Range<usize>, message: String| {
        CliError::Config(format!("{}: {message}", line_of(text, span.start)))
    };

    let sources = raw.builder.is_some() as usize
        + raw.bath.is_some() as usize
        + raw.bath_file.is_some() as usize;
    if sources != 1 {
        return Err(CliError::Config(format!(
            "1: exactly one of [builder], [bath] or bath_file is required, found {sources}"
        )));
    }
    let (bath, energy_unit) = if let Some(b) = raw.builder {
        let bath = b.get_ref().build().map_err(|m| at(b.get_ref().kind.span(), m))?;
        (bath, "J")
    } else if let Some(doc) = raw.bath {
        let bath = doc.into_spec(text).map_err(|e| CliError::Config(bath_error(e)))?;
        (bath, "E")
    } else {
        let file = raw.bath_file.expect("one source");
        let path: PathBuf = dir.join(file.get_ref());
        let bath_text = std::fs::read_to_string(&path)
            .map_err(|e| at(file.span(), format!("bath_file {}: {e}", path.display())))?;
        let bath = load_bath_spec(&bath_text).map_err(|e| {
            at(file.span(), format!("bath_file {}:{}", path.display(), bath_error(e)))
        })?;
        (bath, "E")
    };

    let n = bath.n_sites();
    let mut emitters = Vec::with_capacity(raw.emitters.len());
    for entry in &raw.emitters {
        let e = entry.get_ref();
        if e.site >= n {
            return Err(at(
                entry.span(),
                format!("emitters: site {} out of range for {n} bath sites", e.site),
            ));
        }
        let spec = EmitterSpec::new(e.omega0, e.g, e.site)
            .map_err(|err| at(entry.span(), format!("emitters: {err}")))?;
        emitters.push(spec);
    }
    if let Some(first) = raw.emitters.first() {
        for (i, entry) in raw.emitters.iter().enumerate() {
            let e = entry.get_ref();
            if e.omega0 != first.get_ref().omega0 || e.g != first.get_ref().g {
                return Err(at(
                    entry.span(),
                    "emitters: all emitters must share omega0 and g".into(),
                ));
            }
            if raw.emitters[..i].iter().any(|p| p.get_ref().site == e.site) {
                return Err(at(entry.span(), format!("emitters: site {} used twice", e.site)));
            }
        }
    }

    let gap_factor = match raw.gap_factor {
        Some(f) if !(*f.get_ref() > 1.0) => {
            return Err(at(f.span(), format!("gap_factor must exceed 1, got {}", f.get_ref())))
        }
        Some(f) => f.into_inner(),
        None => 5.0,
    };
    let positive = |v: Option<Spanned<f64>>, key: &str| -> Result<Option<f64>, CliError> {
        match v {
            Some(d) if !(*d.get_ref() > 0.0) => {
                Err(at(d.span(), format!("{key} must be positive, got {}", d.get_ref())))
            }
            other => Ok(other.map(Spanned::into_inner)),
        }
    };
    let delta = positive(raw.delta, "delta")?;
    let tol = positive(raw.tol, "tol")?;

    if let Some(sp) = &raw.spectrum {
        if sp.points < 2 || !(sp.re_max > sp.re_min) || sp.sites.iter().any(|&x| x >= n) {
            return Err(CliError::Config(
                "spectrum: need points >= 2, re_max > re_min and sites inside the bath".into(),
            ));
        }
    }
    if let Some(sw) = &raw.sweep {
        if sw.g_values.is_empty() || sw.g_values.iter().any(|g| !(*g > 0.0)) {
            return Err(CliError::Config("sweep: g_values must be a nonempty list of positive numbers".into()));
        }
    }

    Ok(RunConfig {
        bath,
        energy_unit,
        emitters,
        gap_factor,
        seed: raw.seed,
        delta,
        tol,
        spectrum: raw.spectrum,
        sweep: raw.sweep,
        compare: raw.compare.unwrap_or_default(),
    })
}

fn bath_error(e: dressed_resolvent::Error) -> String {
    match e {
        dressed_resolvent::Error::Parse { line, message } => format!("{line}: bath: {message}"),
        other => format!("1: bath: {other}"),
    }
}
