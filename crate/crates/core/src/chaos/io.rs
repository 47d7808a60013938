//! CSV serialization of chaos variables and processes.
//!
//! One row per coefficient, `mode,slot,multi_index,coeff`, preceded by a
//! `# schema=1` line. Modes are 1-based; `slot` is the number of increments
//! the value depends on (the time index for a process); the multi-index is
//! dash-joined and empty for the empty tuple.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::index::{Catalog, MultiIndex};
use super::variable::{ChaosRandomVariable, ChaosVector};
use crate::{Error, Result};

pub const SCHEMA: &str = "# schema=1";
const HEADER: &str = "mode,slot,multi_index,coeff";

fn write_rows(w: &mut impl Write, v: &ChaosRandomVariable) -> std::io::Result<()> {
    let space = v.catalog().space(v.slots());
    for l in 0..v.modes() {
        for (i, c) in v.mode(l).iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{:.16e}",
                l + 1,
                v.slots(),
                space.multi_index(i).to_field(),
                c
            )?;
        }
    }
    Ok(())
}

pub fn write_variable(w: &mut impl Write, v: &ChaosRandomVariable) -> Result<()> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "{HEADER}")?;
    write_rows(w, v)?;
    Ok(())
}

pub fn write_vector(w: &mut impl Write, v: &ChaosVector) -> Result<()> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "{HEADER}")?;
    for x in v.iter() {
        write_rows(w, x)?;
    }
    Ok(())
}

struct Row {
    mode: usize,
    slot: usize,
    index: MultiIndex,
    coeff: f64,
}

fn read_rows(r: impl BufRead, origin: &str) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let loc = || format!("{origin}:{}", n + 1);
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(s) = comment.strip_prefix("schema=") {
                if s.trim() != "1" {
                    return Err(Error::parse(loc(), format!("unsupported schema {s}")));
                }
            }
            continue;
        }
        if !header_seen {
            if line != HEADER {
                return Err(Error::parse(loc(), format!("expected header {HEADER:?}")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(loc(), "expected 4 fields"));
        }
        let mode: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| Error::parse(loc(), format!("mode: {e}")))?;
        if mode == 0 {
            return Err(Error::parse(loc(), "modes are 1-based"));
        }
        let slot: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| Error::parse(loc(), format!("slot: {e}")))?;
        let index = MultiIndex::parse_field(fields[2]).map_err(|e| Error::parse(loc(), e))?;
        if index.len() != slot {
            return Err(Error::parse(
                loc(),
                format!(
                    "multi-index length {} differs from slot {slot}",
                    index.len()
                ),
            ));
        }
        let coeff: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|e| Error::parse(loc(), format!("coeff: {e}")))?;
        rows.push(Row {
            mode,
            slot,
            index,
            coeff,
        });
    }
    if !header_seen {
        return Err(Error::parse(origin, "missing header"));
    }
    Ok(rows)
}

fn fill(
    target: &mut ChaosRandomVariable,
    row: &Row,
    seen: &mut HashSet<(usize, usize, usize)>,
    origin: &str,
) -> Result<()> {
    let o = target
        .catalog()
        .space(row.slot)
        .ordinal(&row.index)
        .ok_or_else(|| {
            Error::parse(
                origin,
                format!("multi-index {} exceeds the catalog degree", row.index),
            )
        })?;
    if !seen.insert((row.mode, row.slot, o)) {
        return Err(Error::parse(
            origin,
            format!(
                "duplicate coefficient for mode {} index {}",
                row.mode, row.index
            ),
        ));
    }
    target.mode_mut(row.mode - 1)[o] = row.coeff;
    Ok(())
}

/// Reads a single variable; omitted coefficients are zero.
pub fn read_variable(
    r: impl BufRead,
    catalog: &Arc<Catalog>,
    origin: &str,
) -> Result<ChaosRandomVariable> {
    let rows = read_rows(r, origin)?;
    let slot = rows.first().map_or(0, |r| r.slot);
    if rows.iter().any(|r| r.slot != slot) {
        return Err(Error::parse(
            origin,
            "a variable file must use a single slot value",
        ));
    }
    if slot > catalog.n_slots() {
        return Err(Error::parse(
            origin,
            format!("slot {slot} exceeds catalog size {}", catalog.n_slots()),
        ));
    }
    let modes = rows.iter().map(|r| r.mode).max().unwrap_or(0);
    let mut v = ChaosRandomVariable::zeros(catalog, slot, modes)?;
    let mut seen = HashSet::new();
    for row in &rows {
        fill(&mut v, row, &mut seen, origin)?;
    }
    Ok(v)
}

/// Reads a process with values at `t_0..t_{N-1}`.
pub fn read_vector(
    r: impl BufRead,
    catalog: &Arc<Catalog>,
    degree: usize,
    origin: &str,
) -> Result<ChaosVector> {
    let rows = read_rows(r, origin)?;
    let modes = rows.iter().map(|r| r.mode).max().unwrap_or(0);
    let mut out = ChaosVector::zeros(catalog, modes, degree)?;
    let mut seen = HashSet::new();
    for row in &rows {
        if row.slot >= catalog.n_slots() {
            return Err(Error::parse(
                origin,
                format!("time index {} out of range", row.slot),
            ));
        }
        if row.index.degree() > degree {
            return Err(Error::parse(
                origin,
                format!("{} exceeds degree bound {degree}", row.index),
            ));
        }
        fill(out.get_mut(row.slot), row, &mut seen, origin)?;
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub schema: u32,
    pub horizon: f64,
    pub steps: usize,
    pub modes: usize,
    pub files: Vec<String>,
}

/// Writes `values[k]` (the state at `t_k`) to `dir/t{k}.csv` plus `index.json`.
pub fn write_trajectory(dir: &Path, horizon: f64, values: &[ChaosRandomVariable]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (k, v) in values.iter().enumerate() {
        let name = format!("t{k:04}.csv");
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(&name))?);
        write_variable(&mut f, v)?;
        f.flush()?;
        files.push(name);
    }
    let index = TrajectoryIndex {
        schema: 1,
        horizon,
        steps: values.len().saturating_sub(1),
        modes: values.first().map_or(0, |v| v.modes()),
        files,
    };
    std::fs::write(
        dir.join("index.json"),
        serde_json::to_string_pretty(&index)? + "\n",
    )?;
    Ok(())
}

pub fn read_trajectory(dir: &Path, catalog: &Arc<Catalog>) -> Result<Vec<ChaosRandomVariable>> {
    let index: TrajectoryIndex =
        serde_json::from_str(&std::fs::read_to_string(dir.join("index.json"))?)?;
    index
        .files
        .iter()
        .map(|name| {
            let f = std::io::BufReader::new(std::fs::File::open(dir.join(name))?);
            read_variable(f, catalog, name)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_round_trip_is_bitwise() {
        let c = Catalog::new(3, 2).unwrap();
        let mut v =
            ChaosRandomVariable::affine_brownian(&c, 3, 0.1, &[1.0 / 3.0, -2.5], &[0.7, 1e-300])
                .unwrap();
        v.coeffs_mut()[4] = std::f64::consts::PI;
        let mut buf = Vec::new();
        write_variable(&mut buf, &v).unwrap();
        let back = read_variable(&buf[..], &c, "mem").unwrap();
        assert_eq!(back.coeffs(), v.coeffs());
    }

    #[test]
    fn empty_index_field() {
        let c = Catalog::new(2, 1).unwrap();
        let v = ChaosRandomVariable::constant(&c, &[2.0]);
        let mut buf = Vec::new();
        write_variable(&mut buf, &v).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\n1,0,,2.0000000000000000e0\n"), "{text}");
    }

    #[test]
    fn rejects_out_of_catalog_index() {
        let c = Catalog::new(2, 1).unwrap();
        let text = "mode,slot,multi_index,coeff\n1,2,2-0,1.0\n";
        assert!(matches!(
            read_variable(text.as_bytes(), &c, "mem"),
            Err(Error::Parse { .. })
        ));
    }
}
