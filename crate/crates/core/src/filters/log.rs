use std::io::Write;

use crate::error::Result;

use super::runner::LogRow;
use super::Mode;

/// Writes a filter log as CSV: `k`, `mode`, state entries `c1..cN`,
/// estimate entries `theta{i}_{m}` (canonical order; empty when inversion
/// failed), then the `complex` and `ill_conditioned` flags.
pub fn write_log_csv<W: Write>(rows: &[LogRow], mode: Mode, l: usize, d: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n_coef = rows.first().map_or(0, |r| r.coefficients.len());
    let mut header = vec!["k".to_string(), "mode".to_string()];
    header.extend((1..=n_coef).map(|i| format!("c{i}")));
    for i in 1..=l {
        for m in 1..=d {
            header.push(format!("theta{i}_{m}"));
        }
    }
    header.push("complex".into());
    header.push("ill_conditioned".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.k.to_string(), mode.to_string()];
        rec.extend(r.coefficients.iter().map(|c| c.to_string()));
        match &r.estimate {
            Some(e) => rec.extend(e.iter().map(|x| x.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), l * d)),
        }
        rec.push(r.complex.to_string());
        rec.push(r.ill_conditioned.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
