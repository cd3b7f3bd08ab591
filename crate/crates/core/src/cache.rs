//! Plain-text gap records.
//!
//! One gap per line, space separated:
//!
//! ```text
//! p q r e1 e2 sigma s status winding_raw
//! ```
//!
//! Floats carry 12 significant digits and `status` is one of `E`, `S`, `U`.
//! A line `# flux p q` precedes the records of every completed flux, so that
//! fluxes without any processed gap are still known to be done. Other lines
//! starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::bulk::GapRecord;
use crate::error::{Error, Result};
use crate::flux::{reduce_flux, ChernResult, ChernStatus, Flux};

const MARKER: &str = "# flux";

/// Serialize one decided record.
pub fn format_record(rec: &GapRecord<f64>) -> String {
    let chern = rec.chern.unwrap_or(ChernResult {
        sigma: 0,
        s: 0,
        status: ChernStatus::Undecided,
        winding_raw: f64::NAN,
    });
    format!(
        "{} {} {} {:.11e} {:.11e} {} {} {} {:.11e}",
        rec.flux.p(),
        rec.flux.q(),
        rec.r,
        rec.e1,
        rec.e2,
        chern.sigma,
        chern.s,
        chern.status.code(),
        chern.winding_raw,
    )
}

/// Parse one record line.
///
/// Decided records are re-validated against `r = sigma p + s q`.
pub fn parse_record(line: &str) -> std::result::Result<GapRecord<f64>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [p, q, r, e1, e2, sigma, s, status, raw] = fields.as_slice() else {
        return Err(format!("expected 9 fields, found {}", fields.len()));
    };
    let int = |x: &str, name: &str| x.parse::<i64>().map_err(|_| format!("bad {name} {x:?}"));
    let float = |x: &str, name: &str| x.parse::<f64>().map_err(|_| format!("bad {name} {x:?}"));
    let (p, q) = (int(p, "p")?, int(q, "q")?);
    let flux = reduce_flux(p, q).map_err(|e| e.to_string())?;
    if (flux.p() as i64, flux.q() as i64) != (p, q) {
        return Err(format!("flux {p}/{q} is not reduced"));
    }
    let r = u32::try_from(int(r, "r")?).map_err(|_| "negative r".to_string())?;
    if !flux.is_gap_index(r) {
        return Err(format!("gap index {r} out of range for {flux}"));
    }
    let (e1, e2) = (float(e1, "e1")?, float(e2, "e2")?);
    if !(e1 < e2) {
        return Err(format!("empty gap [{e1}, {e2}]"));
    }
    let status = ChernStatus::from_code(status).ok_or_else(|| format!("bad status {status:?}"))?;
    let chern = ChernResult {
        sigma: int(sigma, "sigma")?,
        s: int(s, "s")?,
        status,
        winding_raw: float(raw, "winding_raw")?,
    };
    if status.is_decided() && !chern.satisfies_diophantine(r, flux) {
        return Err(format!("sigma {} does not solve r = sigma p + s q", chern.sigma));
    }
    Ok(GapRecord { flux, r, e1, e2, chern: Some(chern) })
}

/// Records grouped by completed flux.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordSet {
    pub fluxes: BTreeMap<Flux, Vec<GapRecord<f64>>>,
}

impl RecordSet {
    pub fn insert_flux(&mut self, flux: Flux, mut records: Vec<GapRecord<f64>>) {
        records.sort_by_key(|r| r.r);
        self.fluxes.insert(flux, records);
    }

    pub fn contains(&self, flux: Flux) -> bool {
        self.fluxes.contains_key(&flux)
    }

    pub fn records(&self) -> impl Iterator<Item = &GapRecord<f64>> {
        self.fluxes.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.fluxes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Render in file order: by `(q, p)`, then `r`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (flux, records) in &self.fluxes {
            let _ = writeln!(out, "{MARKER} {} {}", flux.p(), flux.q());
            for rec in records {
                out.push_str(&format_record(rec));
                out.push('\n');
            }
        }
        out
    }

    /// Parse a file body. `path` is used for error messages only.
    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let corrupt = |line_no: usize, line: &str, reason: String| Error::CacheCorrupt {
            path: path.to_path_buf(),
            line_no,
            line: line.to_string(),
            reason,
        };
        let mut set = RecordSet::default();
        let mut current: Option<Flux> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix(MARKER) {
                let nums: Vec<&str> = rest.split_whitespace().collect();
                let flux = match nums.as_slice() {
                    [p, q] => match (p.parse::<i64>(), q.parse::<i64>()) {
                        (Ok(p), Ok(q)) => reduce_flux(p, q).map_err(|e| corrupt(line_no, line, e.to_string()))?,
                        _ => return Err(corrupt(line_no, line, "bad flux marker".into())),
                    },
                    _ => return Err(corrupt(line_no, line, "bad flux marker".into())),
                };
                set.fluxes.entry(flux).or_default();
                current = Some(flux);
                continue;
            }
            if trimmed.starts_with('#') {
                continue;
            }
            let rec = parse_record(trimmed).map_err(|reason| corrupt(line_no, line, reason))?;
            match current {
                Some(flux) if flux == rec.flux => {}
                _ => return Err(corrupt(line_no, line, "record outside its flux section".into())),
            }
            let records = set.fluxes.get_mut(&rec.flux).expect("section exists");
            if records.iter().any(|r| r.r == rec.r) {
                return Err(corrupt(line_no, line, format!("duplicate gap {}", rec.r)));
            }
            records.push(rec);
        }
        for records in set.fluxes.values_mut() {
            records.sort_by_key(|r| r.r);
        }
        Ok(set)
    }

    /// Load a file; a missing file is an empty set.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_text(&text, path),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(RecordSet::default()),
            Err(e) => Err(e.into()),
        }
    }

    /// Write atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GapRecord<f64> {
        GapRecord {
            flux: reduce_flux(2, 5).unwrap(),
            r: 1,
            e1: -2.123456789012345,
            e2: -1.5,
            chern: Some(ChernResult { sigma: 3, s: -1, status: ChernStatus::Exact, winding_raw: 3.0000000001 }),
        }
    }

    #[test]
    fn record_round_trip() {
        let line = format_record(&sample());
        assert_eq!(line, "2 5 1 -2.12345678901e0 -1.50000000000e0 3 -1 E 3.00000000010e0");
        let back = parse_record(&line).unwrap();
        assert_eq!(format_record(&back), line);
    }

    #[test]
    fn rejects_non_solution() {
        let err = parse_record("2 5 1 -2.0e0 -1.5e0 2 -1 E 2.0e0").unwrap_err();
        assert!(err.contains("does not solve"), "{err}");
        // Undecided records are not held to the equation.
        assert!(parse_record("2 5 1 -2.0e0 -1.5e0 2 -1 U NaN").is_ok());
    }

    #[test]
    fn corrupt_line_is_named() {
        let text = "# flux 2 5\n2 5 1 -2.0e0 -1.5e0 3 -1 E 3.0e0\n2 5 2 garbage\n";
        match RecordSet::from_text(text, Path::new("c.txt")) {
            Err(Error::CacheCorrupt { line_no, line, .. }) => {
                assert_eq!(line_no, 3);
                assert_eq!(line, "2 5 2 garbage");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn set_round_trip_with_empty_flux() {
        let mut set = RecordSet::default();
        set.insert_flux(reduce_flux(1, 2).unwrap(), Vec::new());
        set.insert_flux(reduce_flux(2, 5).unwrap(), vec![sample()]);
        let text = set.to_text();
        let back = RecordSet::from_text(&text, Path::new("x")).unwrap();
        assert_eq!(back.to_text(), text);
        assert!(back.contains(reduce_flux(1, 2).unwrap()));
        assert_eq!(back.len(), 1);
    }
}
