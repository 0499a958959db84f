//! Plain-text instance files.
//!
//! ```text
//! # Kodaira–Thurston
//! name kt4
//! dim 4
//! bracket          # i j k value: [e_i, e_j] ∋ value·e_k (1-based)
//! 1 2 4 -1
//! J                # dim rows of dim numbers
//! 0 -1 0 0
//! ...
//! g
//! ...
//! ```
//!
//! Bracket lines are completed by antisymmetry and repeated lines add up.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::catalog::{InstanceSpec, Provenance};
use crate::error::{Error, Result};
use crate::liealg::LieAlgebra;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    None,
    Bracket,
    J,
    G,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| err(line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(err(line, format!("`{tok}` is not finite")));
    }
    Ok(v)
}

/// Parses an instance file. Only the syntax and shapes are checked here; use
/// [`InstanceSpec::hermitian`] for the geometric validation.
pub fn parse_instance(text: &str) -> Result<InstanceSpec> {
    let mut name: Option<String> = None;
    let mut dim: Option<usize> = None;
    let mut section = Section::None;
    let mut seen = [false; 3];
    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut j_rows: Vec<Vec<f64>> = Vec::new();
    let mut g_rows: Vec<Vec<f64>> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let header = match toks[0] {
            "name" => {
                if toks.len() < 2 {
                    return Err(err(line, "`name` needs a value"));
                }
                name = Some(toks[1..].join(" "));
                continue;
            }
            "dim" => {
                if dim.is_some() {
                    return Err(err(line, "`dim` given twice"));
                }
                if toks.len() != 2 {
                    return Err(err(line, "expected `dim N`"));
                }
                let d: usize = toks[1]
                    .parse()
                    .map_err(|_| err(line, format!("`{}` is not a dimension", toks[1])))?;
                if d == 0 || d % 2 != 0 {
                    return Err(err(line, format!("dimension must be even and positive, got {d}")));
                }
                dim = Some(d);
                continue;
            }
            "bracket" => Some(Section::Bracket),
            "J" => Some(Section::J),
            "g" => Some(Section::G),
            _ => None,
        };
        if let Some(next) = header {
            if toks.len() != 1 {
                return Err(err(line, format!("unexpected text after `{}`", toks[0])));
            }
            let slot = match next {
                Section::Bracket => 0,
                Section::J => 1,
                _ => 2,
            };
            if seen[slot] {
                return Err(err(line, format!("section `{}` given twice", toks[0])));
            }
            if dim.is_none() {
                return Err(err(line, "`dim` must precede the sections"));
            }
            check_rows_done(section, &j_rows, &g_rows, dim, line)?;
            seen[slot] = true;
            section = next;
            continue;
        }
        let n = dim.ok_or_else(|| err(line, "`dim` must come first"))?;
        match section {
            Section::None => return Err(err(line, format!("unexpected `{}` outside a section", toks[0]))),
            Section::Bracket => {
                if toks.len() != 4 {
                    return Err(err(line, "expected `i j k value`"));
                }
                let mut ix = [0usize; 3];
                for (slot, tok) in ix.iter_mut().zip(&toks[..3]) {
                    let v: usize = tok
                        .parse()
                        .map_err(|_| err(line, format!("`{tok}` is not an index")))?;
                    if v == 0 || v > n {
                        return Err(err(line, format!("index {v} outside 1..={n}")));
                    }
                    *slot = v - 1;
                }
                let v = number(toks[3], line)?;
                if ix[0] == ix[1] && v != 0.0 {
                    return Err(err(line, "bracket of a basis vector with itself must vanish"));
                }
                entries.push((ix[0], ix[1], ix[2], v));
            }
            Section::J | Section::G => {
                let rows = if section == Section::J { &mut j_rows } else { &mut g_rows };
                if rows.len() == n {
                    return Err(err(line, format!("more than {n} rows")));
                }
                if toks.len() != n {
                    return Err(err(line, format!("expected {n} numbers, found {}", toks.len())));
                }
                rows.push(toks.iter().map(|t| number(t, line)).collect::<Result<_>>()?);
            }
        }
    }

    let eof = last_line + 1;
    let n = dim.ok_or_else(|| err(eof, "missing `dim`"))?;
    check_rows_done(section, &j_rows, &g_rows, dim, eof)?;
    if !seen[1] {
        return Err(err(eof, "missing section `J`"));
    }
    if !seen[2] {
        return Err(err(eof, "missing section `g`"));
    }
    let algebra = LieAlgebra::from_brackets(n, &entries)?;
    let to_mat = |rows: &[Vec<f64>]| DMatrix::from_fn(n, n, |r, c| rows[r][c]);
    Ok(InstanceSpec {
        name: name.unwrap_or_else(|| "unnamed".into()),
        algebra,
        j: to_mat(&j_rows),
        g: to_mat(&g_rows),
        provenance: Provenance::File,
    })
}

fn check_rows_done(
    section: Section,
    j_rows: &[Vec<f64>],
    g_rows: &[Vec<f64>],
    dim: Option<usize>,
    line: usize,
) -> Result<()> {
    let n = dim.unwrap_or(0);
    let (label, rows) = match section {
        Section::J => ("J", j_rows),
        Section::G => ("g", g_rows),
        _ => return Ok(()),
    };
    if rows.len() != n {
        return Err(err(
            line,
            format!("section `{label}` has {} of {n} rows", rows.len()),
        ));
    }
    Ok(())
}

/// Shortest round-trip decimal form.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn to_instance_string(spec: &InstanceSpec) -> String {
    let n = spec.dim();
    let mut s = String::new();
    match spec.provenance {
        Provenance::Generated(seed) => {
            let _ = writeln!(s, "# generated, seed {seed}");
        }
        Provenance::Published | Provenance::Constructed => {
            let _ = writeln!(s, "# built-in");
        }
        Provenance::File => {}
    }
    let _ = writeln!(s, "name {}", spec.name);
    let _ = writeln!(s, "dim {n}");
    let _ = writeln!(s, "bracket");
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                let v = spec.algebra.c(i, j, k);
                if v != 0.0 {
                    let _ = writeln!(s, "{} {} {} {}", i + 1, j + 1, k + 1, num(v));
                }
            }
        }
    }
    for (label, m) in [("J", &spec.j), ("g", &spec.g)] {
        let _ = writeln!(s, "{label}");
        for r in 0..n {
            let row: Vec<String> = (0..n).map(|c| num(m[(r, c)])).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<InstanceSpec> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: impl AsRef<Path>, spec: &InstanceSpec) -> Result<()> {
    std::fs::write(path, to_instance_string(spec))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog;

    const KT4: &str = "\
# Kodaira–Thurston
name kt4
dim 4
bracket
1 2 4 -1
J
0 -1 0 0
1 0 0 0
0 0 0 -1
0 0 1 0
g
1 0 0 0
0 1 0 0
0 0 1 0
0 0 0 1
";

    #[test]
    fn parses_kt4() {
        let s = parse_instance(KT4).unwrap();
        assert_eq!(s.algebra, catalog("kt4").unwrap().algebra);
        assert_eq!(s.j, catalog("kt4").unwrap().j);
        assert_eq!(s.name, "kt4");
        s.hermitian().unwrap();
    }

    #[test]
    fn round_trip_is_exact() {
        for name in ["example1", "example2", "kt4", "abelian6"] {
            let spec = catalog(name).unwrap();
            let back = parse_instance(&to_instance_string(&spec)).unwrap();
            assert_eq!(back.algebra, spec.algebra, "{name}");
            assert_eq!(back.j, spec.j);
            assert_eq!(back.g, spec.g);
        }
    }

    #[test]
    fn truncated_file_reports_a_line() {
        let cut: String = KT4.lines().take(13).collect::<Vec<_>>().join("\n");
        match parse_instance(&cut) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 14);
                assert!(msg.contains("`g`"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_tokens_are_located() {
        let bad = KT4.replace("1 2 4 -1", "1 2 9 -1");
        assert!(matches!(parse_instance(&bad), Err(Error::Parse { line: 5, .. })));
        let bad = KT4.replace("0 0 1 0\ng", "0 0 x 0\ng");
        assert!(matches!(parse_instance(&bad), Err(Error::Parse { line: 10, .. })));
        assert!(matches!(parse_instance("bracket\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_instance("dim 3\n"), Err(Error::Parse { line: 1, .. })));
    }
}
