//! CSV and JSON trajectory files.
//!
//! CSV columns are `t, M0, M1, norm_w, norm_wtilde, leakage, min_component,
//! picard_iters`, followed by `u_n` columns at the dump stride. Numbers are
//! written with 17 significant digits so re-reading is exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trajectory::MomentRow;

pub const CSV_COLUMNS: [&str; 8] = [
    "t",
    "M0",
    "M1",
    "norm_w",
    "norm_wtilde",
    "leakage",
    "min_component",
    "picard_iters",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(rows: &[MomentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let sizes: Vec<usize> = rows.first().map_or(Vec::new(), |r| r.components.iter().map(|c| c.0).collect());
    let mut header: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(sizes.iter().map(|n| format!("u_{n}")));
    w.write_record(&header)?;
    for r in rows {
        if r.components.len() != sizes.len() {
            return Err(Error::Schema("rows dump different component sets".into()));
        }
        let mut rec = vec![
            num(r.t),
            num(r.m0),
            num(r.m1),
            num(r.norm_w),
            num(r.norm_wtilde),
            num(r.leakage),
            num(r.min_component),
            r.picard_iters.map_or(String::new(), |k| k.to_string()),
        ];
        rec.extend(r.components.iter().map(|c| num(c.1)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<MomentRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.len() < CSV_COLUMNS.len() || header.iter().zip(CSV_COLUMNS).any(|(a, b)| a != b) {
        return Err(Error::Schema(format!(
            "expected leading columns {}, found {}",
            CSV_COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let sizes: Vec<usize> = header
        .iter()
        .skip(CSV_COLUMNS.len())
        .map(|h| {
            h.strip_prefix("u_")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Schema(format!("unexpected column `{h}`")))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Schema(format!("row {}: column {} is not a number", line + 1, header.get(i).unwrap_or("?"))))
        };
        let iters = match rec.get(7).map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.parse().map_err(|_| Error::Schema(format!("row {}: bad picard_iters `{s}`", line + 1)))?),
        };
        let components = sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| Ok((n, field(CSV_COLUMNS.len() + k)?)))
            .collect::<Result<_>>()?;
        rows.push(MomentRow {
            t: field(0)?,
            m0: field(1)?,
            m1: field(2)?,
            norm_w: field(3)?,
            norm_wtilde: field(4)?,
            leakage: field(5)?,
            min_component: field(6)?,
            picard_iters: iters,
            components,
        });
    }
    if rows.windows(2).any(|p| !(p[1].t > p[0].t)) {
        return Err(Error::Schema("times are not strictly increasing".into()));
    }
    Ok(rows)
}

pub fn write_json<W: Write>(rows: &[MomentRow], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}

/// Reads a trajectory file, choosing the format by extension (`.json` or CSV).
pub fn read_rows(path: &Path) -> Result<Vec<MomentRow>> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    } else {
        read_csv(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, iters: Option<usize>) -> MomentRow {
        MomentRow {
            t,
            m0: 1.0 / 3.0,
            m1: std::f64::consts::PI,
            norm_w: 1e-300,
            norm_wtilde: 7.0,
            leakage: 0.1,
            min_component: -0.0,
            picard_iters: iters,
            components: vec![(1, 0.25), (4, 1.0 / 7.0)],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![row(0.0, None), row(0.1, Some(4))];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,M0,M1,norm_w,norm_wtilde,leakage,min_component,picard_iters,u_1,u_4\n"));
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(read_csv("a,b\n1,2\n".as_bytes()), Err(Error::Schema(_))));
        let bad = "t,M0,M1,norm_w,norm_wtilde,leakage,min_component,picard_iters,v_1\n";
        assert!(matches!(read_csv(bad.as_bytes()), Err(Error::Schema(_))));
        let bad = "t,M0,M1,norm_w,norm_wtilde,leakage,min_component,picard_iters\n1,x,1,1,1,1,1,\n";
        assert!(matches!(read_csv(bad.as_bytes()), Err(Error::Schema(_))));
    }
}
