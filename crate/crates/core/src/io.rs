//! CSV formats for data, draws and chains.
//!
//! Two input schemas are accepted. Counts tables use the header
//! `x,z,n_y0_r1,n_y1_r1,n_r0` with one line per cell; row-level data uses
//! `x,z,r,y` with `y` empty on missing rows. Parse errors carry the 1-based
//! line number of the offending record.

use std::io::Read;

use crate::error::{Error, Result};
use crate::heckman::HeckmanFit;
use crate::model::{CellCounts, CellIndex, CountsTable, ObservedCellParams, PosteriorDraws, Row};

pub const COUNTS_HEADER: &str = "x,z,n_y0_r1,n_y1_r1,n_r0";
pub const ROWS_HEADER: &str = "x,z,r,y";
pub const QTABLE_HEADER: &str = "x,z,q10,q11,q0dot";

/// Parsed input file in either schema.
#[derive(Debug, Clone, PartialEq)]
pub enum DataInput {
    Counts(CountsTable),
    Rows(Vec<Row>),
}

impl DataInput {
    pub fn counts(&self) -> CountsTable {
        match self {
            DataInput::Counts(c) => *c,
            DataInput::Rows(r) => CountsTable::from_rows(r),
        }
    }

    pub fn rows(&self) -> Option<&[Row]> {
        match self {
            DataInput::Rows(r) => Some(r),
            DataInput::Counts(_) => None,
        }
    }
}

fn reader<R: Read>(src: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(src)
}

fn header_of<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<String>> {
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

fn expect_header(got: &[String], want: &str) -> Result<()> {
    let want: Vec<&str> = want.split(',').collect();
    if got.iter().map(String::as_str).eq(want.iter().copied()) {
        Ok(())
    } else {
        Err(Error::Parse { row: 1, msg: format!("expected header `{}`, found `{}`", want.join(","), got.join(",")) })
    }
}

fn line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).unwrap_or("");
    raw.parse::<T>().map_err(|e| Error::Parse { row: line(rec), msg: format!("{name} = `{raw}`: {e}") })
}

fn binary(rec: &csv::StringRecord, i: usize, name: &str) -> Result<u8> {
    let v: u8 = field(rec, i, name)?;
    if v > 1 {
        return Err(Error::Parse { row: line(rec), msg: format!("{name} must be 0 or 1, got {v}") });
    }
    Ok(v)
}

fn records<R: Read>(rdr: &mut csv::Reader<R>) -> impl Iterator<Item = Result<csv::StringRecord>> + '_ {
    rdr.records().map(|r| {
        r.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { row, msg: e.to_string() }
        })
    })
}

fn counts_body<R: Read>(rdr: &mut csv::Reader<R>) -> Result<CountsTable> {
    let mut seen = [false; 4];
    let mut t = CountsTable::zeros();
    for rec in records(rdr) {
        let rec = rec?;
        let (x, z) = (binary(&rec, 0, "x")?, binary(&rec, 1, "z")?);
        let i = CellIndex { x, z }.ordinal();
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Parse { row: line(&rec), msg: format!("cell ({x},{z}) listed twice") });
        }
        t.cells[i] = CellCounts {
            n10: field(&rec, 2, "n_y0_r1")?,
            n11: field(&rec, 3, "n_y1_r1")?,
            n0dot: field(&rec, 4, "n_r0")?,
        };
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        let c = CellIndex::ALL[i];
        return Err(Error::Parse { row: 0, msg: format!("cell ({},{}) missing", c.x, c.z) });
    }
    Ok(t)
}

fn rows_body<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for rec in records(rdr) {
        let rec = rec?;
        let (x, z) = (binary(&rec, 0, "x")?, binary(&rec, 1, "z")?);
        let r = binary(&rec, 2, "r")? == 1;
        let raw_y = rec.get(3).unwrap_or("");
        let y = match (r, raw_y) {
            (false, "" | "NA") => None,
            (true, _) => Some(binary(&rec, 3, "y")? == 1),
            (false, _) => {
                return Err(Error::Parse { row: line(&rec), msg: "y must be empty when r = 0".into() });
            }
        };
        rows.push(Row { x, z, r, y });
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 0, msg: "no data rows".into() });
    }
    Ok(rows)
}

pub fn read_counts_csv<R: Read>(src: R) -> Result<CountsTable> {
    let mut rdr = reader(src);
    expect_header(&header_of(&mut rdr)?, COUNTS_HEADER)?;
    counts_body(&mut rdr)
}

pub fn read_rows_csv<R: Read>(src: R) -> Result<Vec<Row>> {
    let mut rdr = reader(src);
    expect_header(&header_of(&mut rdr)?, ROWS_HEADER)?;
    rows_body(&mut rdr)
}

/// Reads either schema, chosen by the header.
pub fn read_input<R: Read>(src: R) -> Result<DataInput> {
    let mut rdr = reader(src);
    let header = header_of(&mut rdr)?;
    if expect_header(&header, COUNTS_HEADER).is_ok() {
        return counts_body(&mut rdr).map(DataInput::Counts);
    }
    if expect_header(&header, ROWS_HEADER).is_ok() {
        return rows_body(&mut rdr).map(DataInput::Rows);
    }
    Err(Error::Parse {
        row: 1,
        msg: format!("unrecognised header `{}`; expected `{COUNTS_HEADER}` or `{ROWS_HEADER}`", header.join(",")),
    })
}

pub fn counts_csv(t: &CountsTable) -> String {
    let mut s = format!("{COUNTS_HEADER}\n");
    for (c, n) in CellIndex::ALL.iter().zip(&t.cells) {
        s += &format!("{},{},{},{},{}\n", c.x, c.z, n.n10, n.n11, n.n0dot);
    }
    s
}

pub fn rows_csv(rows: &[Row]) -> String {
    let mut s = format!("{ROWS_HEADER}\n");
    for r in rows {
        let y = r.y.map_or(String::new(), |y| u8::from(y).to_string());
        s += &format!("{},{},{},{}\n", r.x, r.z, u8::from(r.r), y);
    }
    s
}

/// Observed-cell probabilities, one line per cell; each line must sum to 1
/// within `1e-9`.
pub fn read_qtable_csv<R: Read>(src: R) -> Result<[ObservedCellParams<f64>; 4]> {
    read_qtable_csv_with_tolerance(src, 1e-9)
}

/// As [`read_qtable_csv`] with a caller-chosen tolerance on the row sums,
/// for tables rounded to two places.
pub fn read_qtable_csv_with_tolerance<R: Read>(src: R, tol: f64) -> Result<[ObservedCellParams<f64>; 4]> {
    let mut rdr = reader(src);
    expect_header(&header_of(&mut rdr)?, QTABLE_HEADER)?;
    let mut out: [Option<ObservedCellParams<f64>>; 4] = [None; 4];
    for rec in records(&mut rdr) {
        let rec = rec?;
        let (x, z) = (binary(&rec, 0, "x")?, binary(&rec, 1, "z")?);
        let v: [f64; 3] = [field(&rec, 2, "q10")?, field(&rec, 3, "q11")?, field(&rec, 4, "q0dot")?];
        if v.iter().any(|p| !(0.0..=1.0).contains(p)) || (v.iter().sum::<f64>() - 1.0).abs() > tol {
            return Err(Error::Parse { row: line(&rec), msg: format!("cell probabilities must lie in [0,1] and sum to 1 within {tol}") });
        }
        let i = CellIndex { x, z }.ordinal();
        if out[i].replace(ObservedCellParams::new_unchecked(v[0], v[1], v[2])).is_some() {
            return Err(Error::Parse { row: line(&rec), msg: format!("cell ({x},{z}) listed twice") });
        }
    }
    let mut q = [ObservedCellParams::new_unchecked(0.0, 0.0, 0.0); 4];
    for i in 0..4 {
        let c = CellIndex::ALL[i];
        q[i] = out[i].ok_or_else(|| Error::Parse { row: 0, msg: format!("cell ({},{}) missing", c.x, c.z) })?;
    }
    Ok(q)
}

pub fn qtable_csv(q: &[ObservedCellParams<f64>; 4]) -> String {
    let mut s = format!("{QTABLE_HEADER}\n");
    for (c, p) in CellIndex::ALL.iter().zip(q) {
        s += &format!("{},{},{},{},{}\n", c.x, c.z, p.q10, p.q11, p.q0dot);
    }
    s
}

/// One line per joint draw with every cell parameter, `omega`, `qz` and `Psi`.
pub fn draws_csv(d: &PosteriorDraws) -> String {
    let mut s = String::from("draw,psi");
    for c in CellIndex::ALL {
        let l = format!("{}{}", c.x, c.z);
        s += &format!(",q{l}_10,q{l}_11,q{l}_0dot");
    }
    for c in CellIndex::ALL {
        s += &format!(",omega_{}{}", c.x, c.z);
    }
    s += ",qz\n";
    for (k, (draw, psi)) in d.draws.iter().zip(d.psi()).enumerate() {
        s += &format!("{k},{psi}");
        for c in &draw.cells {
            s += &format!(",{},{},{}", c.q.q10, c.q.q11, c.q.q0dot);
        }
        for c in &draw.cells {
            s += &format!(",{}", c.omega.0);
        }
        s += &format!(",{}\n", draw.qz.0);
    }
    s
}

/// Kept Gibbs iterations, numbered from the first post-burn-in sweep.
pub fn chain_csv(fit: &HeckmanFit) -> String {
    let mut s = String::from("iter,gamma0,gamma1,gamma2,beta0,beta1,rho,psi\n");
    for (k, (p, psi)) in fit.params.iter().zip(&fit.psi).enumerate() {
        s += &format!(
            "{k},{},{},{},{},{},{},{psi}\n",
            p.gamma[0], p.gamma[1], p.gamma[2], p.beta[0], p.beta[1], p.rho
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_round_trip_and_errors() {
        let t = CountsTable::new([
            CellCounts { n10: 1, n11: 2, n0dot: 3 },
            CellCounts { n10: 4, n11: 5, n0dot: 6 },
            CellCounts { n10: 7, n11: 8, n0dot: 9 },
            CellCounts { n10: 10, n11: 11, n0dot: 12 },
        ]);
        let text = counts_csv(&t);
        assert_eq!(read_counts_csv(text.as_bytes()).unwrap(), t);
        assert_eq!(read_input(text.as_bytes()).unwrap(), DataInput::Counts(t));
        let bad = text.replace("4,5,6", "4,x,6");
        match read_counts_csv(bad.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let dup = text.replace("1,1,10", "0,0,10");
        assert!(matches!(read_counts_csv(dup.as_bytes()), Err(Error::Parse { row: 5, .. })));
        assert!(read_input("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn rows_schema() {
        let text = "x,z,r,y\n0,1,1,0\n1,0,0,\n1,1,1,1\n";
        let rows = read_rows_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].y, None);
        assert_eq!(rows_csv(&rows), text);
        assert!(matches!(read_rows_csv("x,z,r,y\n0,1,0,1\n".as_bytes()), Err(Error::Parse { row: 2, .. })));
        assert!(matches!(read_rows_csv("x,z,r,y\n0,2,1,1\n".as_bytes()), Err(Error::Parse { row: 2, .. })));
        let c = read_input(text.as_bytes()).unwrap().counts();
        assert_eq!(c.total(), 3);
        assert_eq!(c.missing(), 1);
    }

    #[test]
    fn qtable_checks_sums() {
        let text = "x,z,q10,q11,q0dot\n0,0,0.5,0.25,0.25\n0,1,0.5,0.25,0.25\n1,0,0.5,0.25,0.25\n1,1,0.5,0.25,0.25\n";
        let q = read_qtable_csv(text.as_bytes()).unwrap();
        assert_eq!(qtable_csv(&q), text);
        let bad = text.replacen("0.5,0.25,0.25", "0.5,0.25,0.5", 1);
        assert!(matches!(read_qtable_csv(bad.as_bytes()), Err(Error::Parse { row: 2, .. })));
    }

    proptest! {
        #[test]
        fn rows_round_trip(raw in proptest::collection::vec((0u8..2, 0u8..2, any::<bool>(), any::<bool>()), 1..60)) {
            let rows: Vec<Row> = raw.into_iter().map(|(x, z, r, y)| Row { x, z, r, y: r.then_some(y) }).collect();
            let back = read_rows_csv(rows_csv(&rows).as_bytes()).unwrap();
            prop_assert_eq!(back, rows);
        }
    }
}
