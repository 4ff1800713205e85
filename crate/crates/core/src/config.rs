//! Curve configuration files.
//!
//! ```text
//! # comments and blank lines are ignored
//! label = serre
//! a = 6
//! b = -2
//! serre_curve = true
//! m_E = 6
//! cm_discriminant = -27      # optional; must agree with the j-invariant
//! trace_counts = image.csv   # optional; path relative to this file
//! ```
//!
//! A trace-count file holds `residue,count` lines for every residue mod
//! `m_E` and one `total,<order>` line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::arith::squarefree_part;
use crate::curve::{CmClass, RationalCurve};
use crate::error::{Error, Result};
use crate::galois::{serre_image, serre_level, CmOrder, GaloisImage};

#[derive(Debug, Clone)]
pub struct CurveConfig {
    pub curve: RationalCurve,
    pub m_e: u64,
    pub cm_order: Option<CmOrder>,
    /// Explicit level-`m_E` image supplied by the user.
    pub trace_counts: Option<GaloisImage>,
    pub path: PathBuf,
}

impl CurveConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Parses config text; `path` locates relative trace-count files and labels errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |msg: String| Error::Config {
            path: path.to_path_buf(),
            msg,
        };
        let mut label = None;
        let mut a = None;
        let mut b = None;
        let mut cm_disc = None;
        let mut serre = false;
        let mut m_e = None;
        let mut counts_file = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| {
                v.parse::<i64>()
                    .map_err(|_| err(format!("line {}: {key} is not an integer: {v:?}", lineno + 1)))
            };
            match key {
                "label" => label = Some(value.to_owned()),
                "a" => a = Some(int(value)?),
                "b" => b = Some(int(value)?),
                "cm_discriminant" => cm_disc = Some(int(value)?),
                "m_E" | "m_e" => {
                    let m = int(value)?;
                    if m < 1 {
                        return Err(err(format!("m_E must be positive, got {m}")));
                    }
                    m_e = Some(m as u64);
                }
                "serre_curve" => {
                    serre = value
                        .parse::<bool>()
                        .map_err(|_| err(format!("serre_curve must be true or false, got {value:?}")))?
                }
                "trace_counts" => counts_file = Some(value.to_owned()),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }

        let a = a.ok_or_else(|| err("missing key a".into()))?;
        let b = b.ok_or_else(|| err("missing key b".into()))?;
        let label = label.unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "curve".into())
        });
        let curve = RationalCurve::new(label, a, b)
            .map_err(|e| err(e.to_string()))?
            .with_serre_curve(serre);

        let cm_order = match (curve.cm, cm_disc) {
            (CmClass::Cm { disc }, Some(given)) if given != disc => {
                return Err(err(format!(
                    "cm_discriminant {given} disagrees with j-invariant (CM discriminant {disc})"
                )))
            }
            (CmClass::NonCm, Some(given)) => {
                return Err(err(format!("cm_discriminant {given} given for a curve without CM")))
            }
            (CmClass::Cm { disc }, _) => Some(CmOrder::new(disc).map_err(|e| err(e.to_string()))?),
            (CmClass::NonCm, None) => None,
        };
        if serre && cm_order.is_some() {
            return Err(err("a CM curve cannot be a Serre curve".into()));
        }

        let m_e = match (m_e, serre) {
            (Some(m), _) => m,
            (None, true) => serre_level(squarefree_part(curve.delta) as i64),
            (None, false) => return Err(err("missing key m_E".into())),
        };
        if serre {
            let level = serre_level(squarefree_part(curve.delta) as i64);
            if m_e % level != 0 {
                return Err(err(format!("m_E = {m_e} is not a multiple of the Serre level {level}")));
            }
        }
        if let Some(order) = &cm_order {
            let need = 4 * order.ramified_primes().iter().filter(|&&l| l != 2).product::<u64>();
            if m_e % need != 0 {
                return Err(err(format!("m_E = {m_e} must be divisible by {need} for CM discriminant {}", order.disc)));
            }
        }

        let trace_counts = match counts_file {
            None => None,
            Some(rel) => {
                let file = path.parent().unwrap_or(Path::new(".")).join(rel);
                let text = fs::read_to_string(&file)?;
                Some(parse_trace_counts(&text, m_e).map_err(|msg| Error::Config {
                    path: file.clone(),
                    msg,
                })?)
            }
        };

        Ok(CurveConfig {
            curve,
            m_e,
            cm_order,
            trace_counts,
            path: path.to_path_buf(),
        })
    }

    pub fn is_cm(&self) -> bool {
        self.cm_order.is_some()
    }

    /// The exact level-`m_E` image when one is known.
    pub fn exact_image(&self) -> Result<Option<GaloisImage>> {
        if let Some(img) = &self.trace_counts {
            return Ok(Some(img.clone()));
        }
        if self.curve.serre_curve {
            let d = squarefree_part(self.curve.delta) as i64;
            return Ok(Some(serre_image(d, self.m_e)?));
        }
        Ok(None)
    }
}

/// Parses `residue,count` lines plus a `total,<order>` line.
pub fn parse_trace_counts(text: &str, level: u64) -> std::result::Result<GaloisImage, String> {
    let mut counts = vec![None; level as usize];
    let mut total = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.eq_ignore_ascii_case("residue,count") {
            continue;
        }
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| format!("line {}: expected two comma-separated fields", lineno + 1))?;
        let v: u64 = v
            .trim()
            .parse()
            .map_err(|_| format!("line {}: bad count {:?}", lineno + 1, v.trim()))?;
        let k = k.trim();
        if k == "total" {
            total = Some(v);
            continue;
        }
        let residue: i64 = k.parse().map_err(|_| format!("line {}: bad residue {k:?}", lineno + 1))?;
        let idx = residue.rem_euclid(level as i64) as usize;
        if counts[idx].replace(v).is_some() {
            return Err(format!("residue {idx} listed twice"));
        }
    }
    let counts: Vec<u64> = counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| format!("residue {i} missing")))
        .collect::<std::result::Result<_, _>>()?;
    let total = total.ok_or("missing total line")?;
    GaloisImage::from_trace_counts(level, counts, total).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<CurveConfig> {
        CurveConfig::parse(text, Path::new("test.curve"))
    }

    #[test]
    fn serre_config() {
        let c = parse("label = serre\na = 6\nb = -2 # comment\nserre_curve = true\nm_E = 6\n").unwrap();
        assert_eq!(c.m_e, 6);
        assert!(c.curve.serre_curve && !c.is_cm());
        let img = c.exact_image().unwrap().unwrap();
        assert_eq!(img.order, 144);
        // the level defaults to the Serre level
        assert_eq!(parse("a = 6\nb = -2\nserre_curve = true").unwrap().m_e, 6);
    }

    #[test]
    fn cm_config() {
        let c = parse("a = -768108000\nb = 8194304162000\ncm_discriminant = -27\nm_E = 12").unwrap();
        assert_eq!(c.cm_order.unwrap().disc, -27);
        assert!(c.exact_image().unwrap().is_none());
        assert!(parse("a = -768108000\nb = 8194304162000\nm_E = 6").is_err());
        assert!(parse("a = -768108000\nb = 8194304162000\ncm_discriminant = -3\nm_E = 12").is_err());
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "a = 6",
            "a = 6\nb = x\nm_E = 6",
            "a = 6\nb = -2\nm_E = 4\nserre_curve = true",
            "a = 6\nb = -2\nm_E = 0",
            "a = 6\nb = -2\nm_E = 6\ncolour = red",
            "a = 0\nb = 0\nm_E = 1",
            "a = 6 b = -2",
        ] {
            assert!(matches!(parse(bad), Err(Error::Config { .. })), "{bad}");
        }
    }

    #[test]
    fn trace_count_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("g2.csv"), "residue,count\n0,4\n1,2\ntotal,6\n").unwrap();
        let cfg = dir.path().join("c.curve");
        fs::write(&cfg, "a = 6\nb = -2\nm_E = 2\ntrace_counts = g2.csv\n").unwrap();
        let c = CurveConfig::load(&cfg).unwrap();
        let img = c.exact_image().unwrap().unwrap();
        assert_eq!((img.trace_counts.clone(), img.order), (vec![4, 2], 6));

        assert!(parse_trace_counts("0,4\ntotal,6", 2).is_err());
        assert!(parse_trace_counts("0,4\n1,2\ntotal,7", 2).is_err());
        assert!(parse_trace_counts("0,4\n0,4\n1,2\ntotal,6", 2).is_err());
    }
}
