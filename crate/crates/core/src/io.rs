//! Binary field dumps and CSV export.
//!
//! Layout, little endian: magic `BDK1`, `u32` dimension, `u32` points per
//! axis, `f64` extents, `u8` boundary mask, `u8` kind (0 real, 1 complex),
//! then the values in row-major order (`re` or `re, im` pairs).

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{coordinates, ScalarField};
use crate::grid::{GridSpec, MAX_DIM};

const MAGIC: &[u8; 4] = b"BDK1";

pub fn write_field<W: Write>(f: &ScalarField, mut out: W) -> Result<()> {
    let g = f.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(g.dim() as u32).to_le_bytes())?;
    for n in g.points() {
        out.write_all(&(*n as u32).to_le_bytes())?;
    }
    for e in g.extents() {
        out.write_all(&e.to_le_bytes())?;
    }
    let complex = !f.is_real();
    out.write_all(&[g.boundary_mask(), complex as u8])?;
    for v in f.values() {
        out.write_all(&v.re.to_le_bytes())?;
        if complex {
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated field dump: {e}")))?;
    Ok(b)
}

pub fn read_field<R: Read>(mut r: R) -> Result<ScalarField> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Format("not a field dump".into()));
    }
    let d = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if d == 0 || d > MAX_DIM {
        return Err(Error::Format(format!("dimension {d} out of range")));
    }
    let mut points = Vec::with_capacity(d);
    for _ in 0..d {
        points.push(u32::from_le_bytes(read_array(&mut r)?) as usize);
    }
    let mut extents = Vec::with_capacity(d);
    for _ in 0..d {
        extents.push(f64::from_le_bytes(read_array(&mut r)?));
    }
    let [mask, kind] = read_array::<2, _>(&mut r)?;
    if kind > 1 {
        return Err(Error::Format(format!("unknown scalar kind {kind}")));
    }
    let grid = GridSpec::from_boundary_mask(&extents, &points, mask)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = f64::from_le_bytes(read_array(&mut r)?);
        let im = if kind == 1 { f64::from_le_bytes(read_array(&mut r)?) } else { 0.0 };
        values.push(Complex64::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after field values".into()));
    }
    ScalarField::new(grid, values)
}

/// One row per grid point: indices, coordinates, then `re` (and `im` for
/// complex fields) of each named field.
pub fn write_fields_csv<W: Write>(fields: &[(&str, &ScalarField)], mut out: W) -> Result<()> {
    let Some((_, first)) = fields.first() else {
        return Err(Error::InvalidArgument("no fields to export".into()));
    };
    let g = first.grid();
    for (_, f) in fields {
        f.check_same_grid(first)?;
    }
    let d = g.dim();
    let mut header: Vec<String> = (0..d).map(|k| format!("i{k}")).collect();
    header.extend((0..d).map(|k| format!("x{k}")));
    for (name, f) in fields {
        header.push(name.to_string());
        if !f.is_real() {
            header.push(format!("{name}_im"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for idx in 0..g.len() {
        let (m, x) = coordinates(g, idx);
        let mut row: Vec<String> = m[..d].iter().map(|v| v.to_string()).collect();
        row.extend(x[..d].iter().map(|v| format!("{v:e}")));
        for (_, f) in fields {
            let v = f.values()[idx];
            row.push(format!("{:e}", v.re));
            if !f.is_real() {
                row.push(format!("{:e}", v.im));
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
