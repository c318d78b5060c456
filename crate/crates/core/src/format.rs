//! Bath-spec documents.
//!
//! A document is a TOML table with exactly these keys:
//!
//! ```toml
//! n_sites = 3
//! frequencies = 0.0            # or one value per site: [0.0, 0.1, 0.0]
//! hoppings = [[0, 1, 1.0, 0.0], # [x, x', Re J, Im J]
//!             [1, 2, 1.0, 0.0]]
//! ```
//!
//! Each edge `(x, x', J)` also implies the Hermitian partner `(x', x, conj J)`. Unknown keys,
//! self-loops, duplicate edges and out-of-range sites are rejected with the offending line.

use num_complex::Complex64;
use serde::Deserialize;
use std::collections::HashMap;
use toml::Spanned;

use crate::bath::{check_edge, BathSpec, Hopping};
use crate::error::{Error, Result};

/// Either one frequency for every site or an explicit per-site list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Frequencies {
    Uniform(f64),
    PerSite(Vec<f64>),
}

/// One `[x, x', re, im]` quadruple.
pub type RawEdge = (i64, i64, f64, f64);

/// The bath keys of a document, kept with their source spans so later validation can point at
/// a line. Front-ends that embed a bath in a larger config reuse this.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathDocument {
    pub n_sites: Spanned<i64>,
    pub frequencies: Spanned<Frequencies>,
    #[serde(default)]
    pub hoppings: Vec<Spanned<RawEdge>>,
}

/// 1-based line of a byte offset.
pub fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub(crate) fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let line = err.span().map(|s| line_of(text, s.start)).unwrap_or(1);
    Error::Parse {
        line,
        message: err.message().to_string(),
    }
}

impl BathDocument {
    /// Validates and converts; `text` is the source the spans refer to.
    pub fn into_spec(self, text: &str) -> Result<BathSpec> {
        let at = |span: std::ops::Range<usize>, message: String| Error::Parse {
            line: line_of(text, span.start),
            message,
        };

        let n = *self.n_sites.get_ref();
        if n < 1 {
            return Err(at(self.n_sites.span(), format!("n_sites must be >= 1, got {n}")));
        }
        let n = n as usize;

        let frequencies = match self.frequencies.get_ref() {
            Frequencies::Uniform(w) => vec![*w; n],
            Frequencies::PerSite(ws) => {
                if ws.len() != n {
                    return Err(at(
                        self.frequencies.span(),
                        format!("expected {n} frequencies, found {}", ws.len()),
                    ));
                }
                ws.clone()
            }
        };
        if frequencies.iter().any(|w| !w.is_finite()) {
            return Err(at(self.frequencies.span(), "non-finite frequency".into()));
        }

        let mut first_seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut hoppings = Vec::with_capacity(self.hoppings.len());
        for edge in &self.hoppings {
            let (x, xp, re, im) = *edge.get_ref();
            let line = line_of(text, edge.span().start);
            if x < 0 || xp < 0 {
                return Err(Error::Parse {
                    line,
                    message: format!("negative site index in edge ({x}, {xp})"),
                });
            }
            let h = Hopping::new(x as usize, xp as usize, Complex64::new(re, im));
            check_edge(&h, n).map_err(|e| Error::Parse {
                line,
                message: match e {
                    Error::InvalidArgument(m) => m,
                    other => other.to_string(),
                },
            })?;
            let key = (h.from.min(h.to), h.from.max(h.to));
            if let Some(prev) = first_seen.insert(key, line) {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "duplicate edge between sites {} and {} (first given on line {prev})",
                        key.0, key.1
                    ),
                });
            }
            hoppings.push(h);
        }
        BathSpec::new(frequencies, hoppings)
    }
}

/// Parses a bath-spec document.
pub fn load_bath_spec(text: &str) -> Result<BathSpec> {
    let doc: BathDocument = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    doc.into_spec(text)
}
