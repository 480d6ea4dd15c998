use std::io::Write;

use crate::error::Result;

use super::trajectory::ObservationRecord;

fn joined<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes records as CSV: `k`, `psi` (row-major, `;`-joined), then one
/// column per observation entry `y{l}_{m}`. With `reveal`, appends the
/// permutation, its index, the noise matrix and the true parameters
/// (row-major, `;`-joined).
pub fn write_trajectory_csv<W: Write>(
    records: &[ObservationRecord],
    reveal: bool,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = records.first() else {
        w.flush()?;
        return Ok(());
    };
    let (l, d) = (first.y.len(), first.psi.nrows());
    let mut header = vec!["k".to_string(), "psi".to_string()];
    for i in 1..=l {
        for m in 1..=d {
            header.push(format!("y{i}_{m}"));
        }
    }
    if reveal {
        header.extend(["perm", "perm_index", "noise", "theta"].map(String::from));
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.k.to_string(), joined(r.psi.transpose().iter())];
        row.extend(r.y.iter().flatten().map(|v| v.to_string()));
        if reveal {
            if let Some(h) = &r.hidden {
                row.push(h.perm.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";"));
                row.push(h.perm_index.to_string());
                row.push(joined(h.noise.transpose().iter()));
                row.push(joined(h.theta.transpose().iter()));
            } else {
                row.extend(std::iter::repeat_n(String::new(), 4));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
