//! `buses.csv` and `lines.csv`.
//!
//! ```text
//! id,voltage_kv,shunt_re,shunt_im,current_re,current_im
//! from_id,to_id,adm_re,adm_im
//! ```
//!
//! Saved tables are canonical: buses by id, lines by endpoint pair, floats
//! in shortest round-trip form.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Bus, BusId, Network, RawLine, RawNetwork};

pub const BUSES_FILE: &str = "buses.csv";
pub const LINES_FILE: &str = "lines.csv";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}:{line}: duplicate bus id {id}", path.display())]
    DuplicateBus { path: PathBuf, line: u64, id: BusId },
    #[error("{}:{line}: line references unknown bus {id}", path.display())]
    UnknownBus { path: PathBuf, line: u64, id: BusId },
}

#[derive(Debug, Serialize, Deserialize)]
struct BusRow {
    id: String,
    voltage_kv: f64,
    shunt_re: f64,
    shunt_im: f64,
    current_re: f64,
    current_im: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRow {
    from_id: String,
    to_id: String,
    adm_re: f64,
    adm_im: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(u64, T)>, TableError> {
    let file = std::fs::File::open(path).map_err(|source| TableError::Io { path: path.to_owned(), source })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse = |line: u64, message: String| TableError::Parse { path: path.to_owned(), line, message };
    let headers = reader.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record.deserialize(Some(&headers)).map_err(|e| {
            let message = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            };
            parse(line, message)
        })?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn check_id(path: &Path, line: u64, id: &str) -> Result<BusId, TableError> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(TableError::Parse { path: path.to_owned(), line, message: format!("bus id {id:?} must be a non-empty token") });
    }
    Ok(BusId::new(id))
}

fn check_finite(path: &Path, line: u64, values: &[f64]) -> Result<(), TableError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TableError::Parse { path: path.to_owned(), line, message: "numbers must be finite".into() })
    }
}

/// Reads the two tables without any preprocessing.
pub fn load_network(buses: &Path, lines: &Path) -> Result<RawNetwork, TableError> {
    let mut raw = RawNetwork::default();
    let mut seen = BTreeSet::new();
    for (line, row) in read_rows::<BusRow>(buses)? {
        let id = check_id(buses, line, &row.id)?;
        check_finite(buses, line, &[row.voltage_kv, row.shunt_re, row.shunt_im, row.current_re, row.current_im])?;
        if !seen.insert(id.clone()) {
            return Err(TableError::DuplicateBus { path: buses.to_owned(), line, id });
        }
        raw.buses.push(
            Bus::new(id, row.voltage_kv)
                .with_shunt(Complex64::new(row.shunt_re, row.shunt_im))
                .with_current(Complex64::new(row.current_re, row.current_im)),
        );
    }
    for (line, row) in read_rows::<LineRow>(lines)? {
        let from = check_id(lines, line, &row.from_id)?;
        let to = check_id(lines, line, &row.to_id)?;
        check_finite(lines, line, &[row.adm_re, row.adm_im])?;
        for end in [&from, &to] {
            if !seen.contains(end) {
                return Err(TableError::UnknownBus { path: lines.to_owned(), line, id: end.clone() });
            }
        }
        raw.lines.push(RawLine { from, to, admittance: Complex64::new(row.adm_re, row.adm_im) });
    }
    Ok(raw)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), TableError> {
    let io_err = |source: std::io::Error| TableError::Io { path: path.to_owned(), source };
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_err(e.into()))?;
    for row in rows {
        writer.serialize(row).map_err(|e| io_err(e.into()))?;
    }
    writer.flush().map_err(io_err)
}

/// Writes both tables in canonical order.
pub fn save_network(net: &Network, buses: &Path, lines: &Path) -> Result<(), TableError> {
    write_rows(
        buses,
        net.buses().map(|b| BusRow {
            id: b.id.to_string(),
            voltage_kv: b.nominal_voltage,
            shunt_re: b.shunt_admittance.re,
            shunt_im: b.shunt_admittance.im,
            current_re: b.injected_current.re,
            current_im: b.injected_current.im,
        }),
    )?;
    write_rows(lines, net.lines().map(|(k, y)| LineRow { from_id: k.a.to_string(), to_id: k.b.to_string(), adm_re: y.re, adm_im: y.im }))
}

/// [`load_network`] on `dir/buses.csv` and `dir/lines.csv`.
pub fn load_dir(dir: &Path) -> Result<RawNetwork, TableError> {
    load_network(&dir.join(BUSES_FILE), &dir.join(LINES_FILE))
}

/// [`save_network`] into `dir`, creating it if needed.
pub fn save_dir(net: &Network, dir: &Path) -> Result<(), TableError> {
    std::fs::create_dir_all(dir).map_err(|source| TableError::Io { path: dir.to_owned(), source })?;
    save_network(net, &dir.join(BUSES_FILE), &dir.join(LINES_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::preprocess_degree_zero;

    fn write(dir: &Path, buses: &str, lines: &str) {
        std::fs::write(dir.join(BUSES_FILE), buses).unwrap();
        std::fs::write(dir.join(LINES_FILE), lines).unwrap();
    }

    const HEAD_B: &str = "id,voltage_kv,shunt_re,shunt_im,current_re,current_im\n";
    const HEAD_L: &str = "from_id,to_id,adm_re,adm_im\n";

    #[test]
    fn two_bus_tables() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), &format!("{HEAD_B}a,69,0,-1,0,0\nb,69,0,0,1,0\n"), &format!("{HEAD_L}a,b,0,-2\n"));
        let net = preprocess_degree_zero(&load_dir(dir.path()).unwrap()).unwrap();
        assert_eq!(net.bus_count(), 2);
        assert_eq!(net.line(&"a".into(), &"b".into()), Some(Complex64::new(0.0, -2.0)));

        let out = tempfile::tempdir().unwrap();
        save_dir(&net, out.path()).unwrap();
        let again = preprocess_degree_zero(&load_dir(out.path()).unwrap()).unwrap();
        assert_eq!(again, net);
        let text = std::fs::read_to_string(out.path().join(BUSES_FILE)).unwrap();
        assert_eq!(text, format!("{HEAD_B}a,69.0,0.0,-1.0,0.0,0.0\nb,69.0,0.0,0.0,1.0,0.0\n"));
    }

    #[test]
    fn bad_tables_name_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), &format!("{HEAD_B}a,69,0,-1,0,0\na,69,0,0,0,0\n"), HEAD_L);
        match load_dir(dir.path()) {
            Err(TableError::DuplicateBus { line, id, .. }) => assert_eq!((line, id.as_str()), (3, "a")),
            other => panic!("{other:?}"),
        }
        write(dir.path(), &format!("{HEAD_B}a,69,0,-1,0,0\n"), &format!("{HEAD_L}a,zz,0,-1\n"));
        assert!(matches!(load_dir(dir.path()), Err(TableError::UnknownBus { line: 2, .. })));
        write(dir.path(), &format!("{HEAD_B}a,sixty,0,-1,0,0\n"), HEAD_L);
        let err = load_dir(dir.path()).unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("buses.csv:2"));
        write(dir.path(), &format!("{HEAD_B}a,inf,0,-1,0,0\n"), HEAD_L);
        assert!(matches!(load_dir(dir.path()), Err(TableError::Parse { .. })));
        assert!(matches!(load_dir(&dir.path().join("missing")), Err(TableError::Io { .. })));
    }
}
