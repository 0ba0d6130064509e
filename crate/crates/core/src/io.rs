//! Sweep files: UTF-8 CSV with an `x,y[,sigma_y]` header. Extra columns are
//! ignored on read, so plot tables written by the CLI read back as sweeps.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fitkit::SweepRecord;

/// Reads a sweep. `sigma_y` is optional but must then be present on every row.
pub fn read_sweep_csv<R: Read>(r: R) -> Result<SweepRecord> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (ix, iy) = match (col("x"), col("y")) {
        (Some(ix), Some(iy)) => (ix, iy),
        _ => return Err(Error::config(format!("sweep CSV needs x and y columns, found [{}]", headers.iter().collect::<Vec<_>>().join(", ")))),
    };
    let is = col("sigma_y");
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("");
            field.parse().map_err(|_| Error::config(format!("row {}: '{field}' is not a number", line + 2)))
        };
        x.push(num(ix)?);
        y.push(num(iy)?);
        if let Some(i) = is {
            s.push(num(i)?);
        }
    }
    if is.is_some() {
        SweepRecord::with_sigma(x, y, s)
    } else {
        SweepRecord::new(x, y)
    }
}

/// Writes `x,y` or `x,y,sigma_y`.
pub fn write_sweep_csv<W: Write>(sweep: &SweepRecord, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    match &sweep.sigma_y {
        Some(s) => {
            wtr.write_record(["x", "y", "sigma_y"])?;
            for ((x, y), s) in sweep.x.iter().zip(&sweep.y).zip(s) {
                wtr.write_record([x.to_string(), y.to_string(), s.to_string()])?;
            }
        }
        None => {
            wtr.write_record(["x", "y"])?;
            for (x, y) in sweep.x.iter().zip(&sweep.y) {
                wtr.write_record([x.to_string(), y.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
