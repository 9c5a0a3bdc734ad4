//! Sweep tables `(t, value ± sigma, n)` and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Result;
use crate::error::EstimateError;

pub const SWEEP_HEADER: [&str; 4] = ["t_us", "value", "sigma", "n"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Seconds.
    pub t: f64,
    pub value: f64,
    pub sigma: f64,
    pub n: u64,
}

/// Round to `digits` significant digits and print the shortest form.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("valid float");
    rounded.to_string()
}

pub fn write_sweep<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| EstimateError::Csv(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(err)?;
    for p in points {
        w.write_record([
            format_sig(p.t * 1e6, 6),
            format_sig(p.value, 6),
            format_sig(p.sigma, 6),
            p.n.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| EstimateError::Csv(e.to_string()))
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepPoint>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| EstimateError::Csv(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != SWEEP_HEADER {
        return Err(EstimateError::Csv(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| EstimateError::Csv(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|e| EstimateError::Csv(format!("column {}: {e}", SWEEP_HEADER[i])))
        };
        out.push(SweepPoint {
            t: num(0)? * 1e-6,
            value: num(1)?,
            sigma: num(2)?,
            n: row[3].parse().map_err(|e| EstimateError::Csv(format!("column n: {e}")))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig(0.123456789, 6), "0.123457");
        assert_eq!(format_sig(-98765432.1, 6), "-98765400");
        assert_eq!(format_sig(1.0, 6), "1");
        assert_eq!(format_sig(f64::INFINITY, 6), "inf");
    }

    #[test]
    fn round_trip() {
        let pts = vec![
            SweepPoint {
                t: 2e-6,
                value: 0.9,
                sigma: 0.01,
                n: 120,
            },
            SweepPoint {
                t: 103.5e-6,
                value: -0.25,
                sigma: 0.0312345678,
                n: 7,
            },
        ];
        let mut buf = Vec::new();
        write_sweep(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_us,value,sigma,n\n2,0.9,0.01,120\n"));
        let back = read_sweep(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[1].t - 103.5e-6).abs() < 1e-15);
        assert_eq!(back[1].sigma, 0.0312346);
        assert!(read_sweep("a,b\n1,2\n".as_bytes()).is_err());
    }
}
