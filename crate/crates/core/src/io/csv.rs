use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::sim::{Channel, Waveform};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Writes `t` followed by every recorded channel. Numbers use the shortest
/// decimal form that reads back to the same `f64`.
pub fn write_waveform_csv<W: Write>(w: &Waveform, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    write!(out, "t")?;
    for ch in &w.channels {
        write!(out, ",{}", ch.name())?;
    }
    writeln!(out)?;
    for (i, t) in w.t.iter().enumerate() {
        write!(out, "{t}")?;
        for col in &w.data {
            write!(out, ",{}", col[i])?;
        }
        writeln!(out)?;
    }
    out.flush()
}

pub fn read_waveform_csv<R: BufRead>(input: R) -> Result<Waveform, CsvError> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(CsvError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let mut names = header.trim_end().split(',');
    if names.next() != Some("t") {
        return Err(CsvError::Parse {
            line: 1,
            message: "first column must be `t`".into(),
        });
    }
    let channels = names
        .map(|n| {
            n.parse::<Channel>()
                .map_err(|e| CsvError::Parse { line: 1, message: e })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = Waveform::new(channels);
    let mut row = Vec::with_capacity(w.channels.len());
    for (k, line) in lines.enumerate() {
        let line = line?;
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.trim_end().split(',').map(|f| {
            f.parse::<f64>().map_err(|e| CsvError::Parse {
                line: lineno,
                message: format!("`{f}`: {e}"),
            })
        });
        let t = fields.next().ok_or(CsvError::Parse {
            line: lineno,
            message: "empty row".into(),
        })??;
        row.clear();
        for f in fields {
            row.push(f?);
        }
        if row.len() != w.channels.len() {
            return Err(CsvError::Parse {
                line: lineno,
                message: format!("expected {} values, found {}", w.channels.len() + 1, row.len() + 1),
            });
        }
        w.push_row(t, &row);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut w = Waveform::new(Channel::ALL.to_vec());
        let awkward = [0.1, 1.0 / 3.0, -2.5e-9, 1e-300, 123456.789e10, -0.0, 7.0];
        for (i, &a) in awkward.iter().enumerate() {
            let row: Vec<f64> = (0..8).map(|k| a * (k as f64 + 0.5)).collect();
            w.push_row(i as f64 * 1e-7 + 1e-9 / 3.0, &row);
        }
        let mut buf = Vec::new();
        write_waveform_csv(&w, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,vsw,iLr,vCr,iLm,vOut,iOut,gateHS,gateLS\n"));
        let back = read_waveform_csv(buf.as_slice()).unwrap();
        assert_eq!(back.channels, w.channels);
        assert_eq!(back.t, w.t);
        for (a, b) in back.data.iter().zip(&w.data) {
            let a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bad_rows_name_the_line() {
        let text = "t,vOut\n0,1\n1e-6,abc\n";
        match read_waveform_csv(text.as_bytes()) {
            Err(CsvError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_waveform_csv("t,bogus\n".as_bytes()).is_err());
        assert!(read_waveform_csv("t,vOut\n0,1,2\n".as_bytes()).is_err());
    }
}
