//! Versioned column-table serialisation of fibred forms: plain text, a
//! version line, a header row, and one `degree backend base_index cell_index
//! value` row per entry with 17 significant digits.

use crate::complex::FibreComplex;
use crate::error::{Error, Result};
use crate::forms::{CochainForm, FieldForm};
use crate::grid::BaseGrid;
use std::io::{BufRead, Write};
use std::sync::Arc;

pub const FORMAT_VERSION: &str = "weinfib-form-table v1";

pub fn write_cochain<W: Write>(w: &mut W, form: &CochainForm, delimiter: char) -> Result<()> {
    writeln!(w, "{FORMAT_VERSION}")?;
    writeln!(
        w,
        "degree{d}backend{d}base_index{d}cell_index{d}value",
        d = delimiter
    )?;
    for (s, slice) in form.values.iter().enumerate() {
        for (cell, v) in slice.iter().enumerate() {
            writeln!(
                w,
                "{}{d}cochain{d}{}{d}{}{d}{:.16e}",
                form.degree,
                s,
                cell,
                v,
                d = delimiter
            )?;
        }
    }
    Ok(())
}

/// Field forms are written as point samples: for each base sample and each
/// component, the value at every 0-cell of the sampling complex. The cell
/// index is `component * node_count + node`.
pub fn write_field_samples<W: Write>(
    w: &mut W,
    form: &FieldForm,
    base: &BaseGrid,
    complex: &FibreComplex,
    delimiter: char,
) -> Result<()> {
    writeln!(w, "{FORMAT_VERSION}")?;
    writeln!(
        w,
        "degree{d}backend{d}base_index{d}cell_index{d}value",
        d = delimiter
    )?;
    let nodes = complex.cell_count(0);
    for (s, &b) in base.samples().iter().enumerate() {
        for node in 0..nodes {
            let x = complex.cell_center(0, node);
            let comps = form.components(b, &x);
            for (ci, v) in comps.iter().enumerate() {
                writeln!(
                    w,
                    "{}{d}field{d}{}{d}{}{d}{:.16e}",
                    form.degree,
                    s,
                    ci * nodes + node,
                    v,
                    d = delimiter
                )?;
            }
        }
    }
    Ok(())
}

pub fn read_cochain<R: BufRead>(
    r: &mut R,
    complex: Arc<FibreComplex>,
    base_samples: usize,
) -> Result<CochainForm> {
    let mut lines = r.lines();
    let version = lines
        .next()
        .ok_or_else(|| Error::Table("empty table".into()))??;
    if version.trim() != FORMAT_VERSION {
        return Err(Error::Table(format!(
            "unrecognised version line {version:?}"
        )));
    }
    let _header = lines
        .next()
        .ok_or_else(|| Error::Table("missing header row".into()))??;
    let mut degree: Option<usize> = None;
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == '\t' || c == ',' || c == ' ')
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 5 {
            return Err(Error::Table(format!(
                "row {}: expected 5 columns, got {}",
                ln + 3,
                fields.len()
            )));
        }
        let deg: usize = fields[0]
            .parse()
            .map_err(|_| Error::Table(format!("row {}: bad degree", ln + 3)))?;
        if fields[1] != "cochain" {
            return Err(Error::Table(format!(
                "row {}: expected cochain backend, got {}",
                ln + 3,
                fields[1]
            )));
        }
        match degree {
            None => {
                let n = complex.cell_count(deg);
                values = vec![vec![0.0; n]; base_samples];
                degree = Some(deg);
            }
            Some(d) if d != deg => {
                return Err(Error::Table(format!("row {}: mixed degrees", ln + 3)));
            }
            _ => {}
        }
        let s: usize = fields[2]
            .parse()
            .map_err(|_| Error::Table(format!("row {}: bad base index", ln + 3)))?;
        let cell: usize = fields[3]
            .parse()
            .map_err(|_| Error::Table(format!("row {}: bad cell index", ln + 3)))?;
        let v: f64 = fields[4]
            .parse()
            .map_err(|_| Error::Table(format!("row {}: bad value", ln + 3)))?;
        if s >= base_samples || cell >= values[s].len() {
            return Err(Error::Table(format!("row {}: index out of range", ln + 3)));
        }
        values[s][cell] = v;
    }
    let degree = degree.ok_or_else(|| Error::Table("no data rows".into()))?;
    CochainForm::from_values(complex, degree, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn cochain_round_trip_is_bit_exact(seed in 0u64..1000) {
            let cx = Arc::new(FibreComplex::torus(&[4, 5]).unwrap());
            let mut state = seed;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            };
            let values: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..cx.cell_count(1)).map(|_| next()).collect())
                .collect();
            let form = CochainForm::from_values(cx.clone(), 1, values).unwrap();
            let mut buf = Vec::new();
            write_cochain(&mut buf, &form, '\t').unwrap();
            let mut cursor = std::io::Cursor::new(buf);
            let back = read_cochain(&mut cursor, cx, 3).unwrap();
            prop_assert_eq!(form.values, back.values);
        }
    }

    #[test]
    fn rejects_unknown_version() {
        let cx = Arc::new(FibreComplex::torus(&[4]).unwrap());
        let mut cursor = std::io::Cursor::new(b"bogus v9\nheader\n".to_vec());
        assert!(matches!(
            read_cochain(&mut cursor, cx, 1),
            Err(Error::Table(_))
        ));
    }
}
