//! CSV ingestion and emission for sample streams.
//!
//! Format: header `t,ax,ay,az` with an optional trailing `label` column,
//! decimal point, UTF-8, LF or CRLF line endings. Values are written with 9
//! significant digits so 32-bit floats round-trip exactly.

use crate::dataio::{Label, Sample};
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub fn read_csv(path: &Path) -> Result<(Vec<Sample>, Option<Label>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_csv_from(BufReader::new(file))
}

/// Reads a stream from any reader. Returns the samples and, when the file
/// carries a `label` column, the (uniform) stream label.
pub fn read_csv_from<R: Read>(reader: R) -> Result<(Vec<Sample>, Option<Label>)> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate();

    let (_, first) = lines.next().ok_or_else(|| Error::CsvParse {
        line: 1,
        message: "missing header".into(),
    })?;
    let header = first.map_err(|e| Error::CsvParse {
        line: 1,
        message: e.to_string(),
    })?;
    let header = header.trim_end_matches('\r');

    let has_label = match header {
        "t,ax,ay,az" => false,
        "t,ax,ay,az,label" => true,
        other => {
            return Err(Error::CsvParse {
                line: 1,
                message: format!("unexpected header {other:?}"),
            })
        }
    };

    let mut samples = Vec::new();
    let mut label: Option<Label> = None;
    let mut prev_t = f64::NEG_INFINITY;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::CsvParse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if has_label { 5 } else { 4 };
        if fields.len() != expected {
            return Err(Error::CsvParse {
                line: lineno,
                message: format!("expected {} fields, got {}", expected, fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].trim().parse::<f64>().map_err(|_| Error::CsvParse {
                line: lineno,
                message: format!("bad number {:?}", fields[i]),
            })
        };
        let t = num(0)?;
        if t <= prev_t {
            return Err(Error::NonMonotoneTimestamps { line: lineno });
        }
        prev_t = t;
        samples.push(Sample {
            t,
            ax: num(1)? as f32,
            ay: num(2)? as f32,
            az: num(3)? as f32,
        });
        if has_label {
            let l = Label::parse(fields[4].trim()).ok_or_else(|| Error::CsvParse {
                line: lineno,
                message: format!("unknown label {:?}", fields[4]),
            })?;
            if let Some(existing) = label {
                if existing != l {
                    return Err(Error::CsvParse {
                        line: lineno,
                        message: "mixed labels within one stream".into(),
                    });
                }
            }
            label = Some(l);
        }
    }
    Ok((samples, label))
}

pub fn write_csv(path: &Path, samples: &[Sample], label: Option<Label>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    write_csv_to(BufWriter::new(file), samples, label).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn write_csv_to<W: Write>(mut w: W, samples: &[Sample], label: Option<Label>) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: "<writer>".into(),
        source: e,
    };
    if label.is_some() {
        writeln!(w, "t,ax,ay,az,label").map_err(io_err)?;
    } else {
        writeln!(w, "t,ax,ay,az").map_err(io_err)?;
    }
    for s in samples {
        // {:.8e} = 9 significant digits, enough for exact f32 round-trip.
        match label {
            Some(l) => writeln!(
                w,
                "{},{:.8e},{:.8e},{:.8e},{}",
                s.t,
                s.ax,
                s.ay,
                s.az,
                l.name()
            )
            .map_err(io_err)?,
            None => {
                writeln!(w, "{},{:.8e},{:.8e},{:.8e}", s.t, s.ax, s.ay, s.az).map_err(io_err)?
            }
        }
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn parses_simple_row() {
        let csv = "t,ax,ay,az\n0.05,0.01,-0.02,1.00\n";
        let (samples, label) = read_csv_from(csv.as_bytes()).unwrap();
        assert_eq!(label, None);
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].t, 0.05);
        assert_eq!(samples[0].ax, 0.01);
        assert_eq!(samples[0].ay, -0.02);
        assert_eq!(samples[0].az, 1.00);
    }

    #[test]
    fn empty_file_with_header() {
        let (samples, _) = read_csv_from("t,ax,ay,az\n".as_bytes()).unwrap();
        assert!(samples.is_empty());
    }

    #[test]
    fn crlf_and_label_column() {
        let csv = "t,ax,ay,az,label\r\n0.0,1,2,3,Truck\r\n0.05,4,5,6,Truck\r\n";
        let (samples, label) = read_csv_from(csv.as_bytes()).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(label, Some(Label::Truck));
    }

    #[test]
    fn malformed_row_names_line() {
        let csv = "t,ax,ay,az\n0.0,1,2,3\n0.05,x,2,3\n";
        match read_csv_from(csv.as_bytes()) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_rejected() {
        let csv = "t,ax,ay,az\n0.10,1,2,3\n0.05,1,2,3\n";
        match read_csv_from(csv.as_bytes()) {
            Err(Error::NonMonotoneTimestamps { line }) => assert_eq!(line, 3),
            other => panic!("expected monotonicity error, got {other:?}"),
        }
    }

    #[test]
    fn roundtrip_random_samples() {
        let mut rng = crate::rng::seeded(99);
        let samples: Vec<Sample> = (0..1000)
            .map(|i| Sample {
                t: i as f64 * 0.05,
                ax: rng.random_range(-10.0f32..10.0),
                ay: rng.random_range(-10.0f32..10.0),
                az: rng.random_range(-10.0f32..10.0),
            })
            .collect();
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &samples, Some(Label::Forklift)).unwrap();
        let (back, label) = read_csv_from(buf.as_slice()).unwrap();
        assert_eq!(label, Some(Label::Forklift));
        assert_eq!(samples, back);
    }
}
