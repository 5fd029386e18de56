//! Plain-text scheme files.
//!
//! ```text
//! # comment
//! order 2 name strang
//! 5.0000000000000000e-1 0.0000000000000000e0 1.0000000000000000e0 0.0000000000000000e0
//! 5.0000000000000000e-1 0.0000000000000000e0 0.0000000000000000e0 0.0000000000000000e0
//! ```
//!
//! Each stage line holds `Re(a) Im(a) Re(b) Im(b)` with 17 significant
//! digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{Scheme, SchemeError, SchemeSource, Stage, CONSTRUCTED_SUM_TOL, LOADED_SUM_TOL};

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Accept stages with negative real parts (reported as warnings).
    pub allow_inadmissible: bool,
}

#[derive(Clone, Debug)]
pub struct LoadedScheme {
    pub scheme: Scheme,
    pub warnings: Vec<String>,
}

pub fn format_scheme(scheme: &Scheme) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# sum(a) = {:.17e} {:+.17e}i", scheme.sum_a().re, scheme.sum_a().im);
    let _ = writeln!(out, "# sum(b) = {:.17e} {:+.17e}i", scheme.sum_b().re, scheme.sum_b().im);
    let _ = writeln!(out, "order {} name {}", scheme.nominal_order, scheme.name);
    for s in &scheme.stages {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e} {:.16e}", s.a.re, s.a.im, s.b.re, s.b.im);
    }
    out
}

pub fn save_scheme(scheme: &Scheme, path: &Path) -> Result<(), SchemeError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io_err = |source| SchemeError::Io { path: path.to_path_buf(), source };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    std::io::Write::write_all(&mut tmp, format_scheme(scheme).as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn parse_scheme(text: &str, options: LoadOptions) -> Result<LoadedScheme, SchemeError> {
    let mut header: Option<(u32, String)> = None;
    let mut stages = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| SchemeError::Parse { line: line_no, message };
        if let Some(after_keyword) = line.strip_prefix("order") {
            if header.is_some() {
                return Err(parse_err("duplicate header".into()));
            }
            let mut parts = line.splitn(4, char::is_whitespace).filter(|s| !s.is_empty());
            parts.next();
            let order = parts
                .next()
                .ok_or_else(|| parse_err("missing order".into()))?
                .parse::<u32>()
                .map_err(|e| parse_err(format!("bad order: {e}")))?;
            let rest = after_keyword.trim_start();
            let rest = rest[rest.find(char::is_whitespace).unwrap_or(rest.len())..].trim_start();
            let name = rest
                .strip_prefix("name")
                .ok_or_else(|| parse_err("expected 'name' after the order".into()))?
                .trim();
            if name.is_empty() {
                return Err(parse_err("empty scheme name".into()));
            }
            header = Some((order, name.to_string()));
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 numbers, found {}", fields.len())));
        }
        let mut v = [0.0f64; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|e| parse_err(format!("'{f}': {e}")))?;
            if !slot.is_finite() {
                return Err(parse_err(format!("non-finite coefficient '{f}'")));
            }
        }
        if header.is_none() {
            return Err(parse_err("stage line before the 'order N name TEXT' header".into()));
        }
        stages.push(Stage::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])));
    }
    let (order, name) = header.ok_or(SchemeError::Parse { line: 0, message: "missing header".into() })?;
    if stages.is_empty() {
        return Err(SchemeError::Empty);
    }
    let scheme = Scheme::new(name, order, stages);
    scheme.check_consistency(LOADED_SUM_TOL)?;
    let mut warnings = Vec::new();
    if scheme.consistency_defect() > CONSTRUCTED_SUM_TOL {
        warnings.push(format!("coefficient sums deviate from 1 by {:e}", scheme.consistency_defect()));
    }
    if let Err(e) = scheme.check_admissible() {
        if !options.allow_inadmissible {
            return Err(e);
        }
        warnings.push(e.to_string());
    }
    Ok(LoadedScheme { scheme, warnings })
}

pub fn load_scheme(path: &Path, options: LoadOptions) -> Result<LoadedScheme, SchemeError> {
    let text = fs::read_to_string(path).map_err(|source| SchemeError::Io { path: path.to_path_buf(), source })?;
    let mut loaded = parse_scheme(&text, options)?;
    loaded.scheme.source = SchemeSource::Loaded(path.to_path_buf());
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositions::{build_order, strang};

    #[test]
    fn strang_text_loads_as_strang() {
        let text = "# two stages\norder 2 name strang\n0.5 0 1 0\n0.5 0 0 0\n";
        let loaded = parse_scheme(text, LoadOptions::default()).unwrap();
        assert_eq!(loaded.scheme, strang());
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn deficit_is_named() {
        let text = "order 1 name short\n0.9 0 1 0\n";
        let err = parse_scheme(text, LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("deficit"), "{err}");
        assert!(matches!(err, SchemeError::Consistency { which: 'a', .. }));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "order 2 name x\n0.5 0 1\n";
        assert!(matches!(parse_scheme(text, LoadOptions::default()), Err(SchemeError::Parse { line: 2, .. })));
        let text = "0.5 0 1 0\n";
        assert!(matches!(parse_scheme(text, LoadOptions::default()), Err(SchemeError::Parse { line: 1, .. })));
        let text = "order 2 name x\n0.5 0 abc 0\n";
        assert!(matches!(parse_scheme(text, LoadOptions::default()), Err(SchemeError::Parse { line: 2, .. })));
        assert!(matches!(parse_scheme("order 2 name x\n", LoadOptions::default()), Err(SchemeError::Empty)));
    }

    #[test]
    fn negative_real_parts_need_override() {
        let g1 = 1.0 / (2.0 - 2f64.powf(1.0 / 3.0));
        let g2 = 1.0 - 2.0 * g1;
        let text = format!(
            "order 4 name yoshida\n{} 0 {} 0\n{} 0 {} 0\n{} 0 {} 0\n{} 0 0 0\n",
            g1 / 2.0,
            g1,
            (g1 + g2) / 2.0,
            g2,
            (g1 + g2) / 2.0,
            g1,
            g1 / 2.0
        );
        assert!(matches!(parse_scheme(&text, LoadOptions::default()), Err(SchemeError::Inadmissible { .. })));
        let loaded = parse_scheme(&text, LoadOptions { allow_inadmissible: true }).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
    }

    #[test]
    fn save_then_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for order in [2, 4, 6, 8] {
            let s = build_order(order).unwrap();
            let path = dir.path().join(format!("o{order}.txt"));
            save_scheme(&s, &path).unwrap();
            let back = load_scheme(&path, LoadOptions::default()).unwrap().scheme;
            assert_eq!(back.stages, s.stages);
            assert_eq!(back.name, s.name);
            assert_eq!(back.source, SchemeSource::Loaded(path));
        }
    }
}
