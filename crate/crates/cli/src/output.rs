//! CSV artifacts. Every real value is written with 17 significant digits so
//! that it parses back to the same double.

use std::path::Path;

use qcollide::analysis::RatioRow;

use crate::error::CliError;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header row, then one row per step: the step index followed by `values`.
pub fn write_rows<I>(path: &Path, header: &[String], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = (usize, Vec<f64>)>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (n, values) in rows {
        let mut record = Vec::with_capacity(values.len() + 1);
        record.push(n.to_string());
        record.extend(values.into_iter().map(fmt));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ratio(path: &Path, rows: &[RatioRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["N", "beta", "ratio"])?;
    for r in rows {
        w.write_record([r.n_sites.to_string(), fmt(r.beta), fmt(r.ratio)])?;
    }
    w.flush()?;
    Ok(())
}
