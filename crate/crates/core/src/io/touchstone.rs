//! Touchstone version 1 reader and writer for one- and two-port data.
//!
//! The option line `# <unit> <parameter> <format> R <ohms>` defaults to
//! `# GHz S MA R 50`. Two-port rows are ordered N11 N21 N12 N22. Z and Y data
//! are stored in the file normalized to R and returned in ohms and siemens.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{IoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parameter {
    S,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    /// Real and imaginary parts.
    Ri,
    /// Magnitude and angle in degrees.
    Ma,
    /// Magnitude in dB and angle in degrees.
    Db,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkData {
    pub ports: usize,
    pub parameter: Parameter,
    /// Reference resistance (Ω).
    pub reference: f64,
    /// Frequencies in Hz.
    pub frequencies: Vec<f64>,
    /// Per frequency, ports² values in row-major order (N11, N12, N21, N22),
    /// in absolute units.
    pub values: Vec<Vec<Complex64>>,
}

impl NetworkData {
    /// Entry (i, j), zero-based.
    pub fn entry(&self, i: usize, j: usize) -> Vec<(f64, Complex64)> {
        self.frequencies
            .iter()
            .zip(&self.values)
            .map(|(&f, v)| (f, v[i * self.ports + j]))
            .collect()
    }

    /// S11 of a one-port file or S21 of a two-port file: the trace a
    /// resonance fit consumes.
    pub fn resonance_trace(&self) -> Vec<(f64, Complex64)> {
        if self.ports == 1 {
            self.entry(0, 0)
        } else {
            self.entry(1, 0)
        }
    }
}

fn unit_scale(token: &str) -> Option<f64> {
    match token {
        "hz" => Some(1.0),
        "khz" => Some(1e3),
        "mhz" => Some(1e6),
        "ghz" => Some(1e9),
        _ => None,
    }
}

fn decode(format: Format, a: f64, b: f64) -> Complex64 {
    match format {
        Format::Ri => Complex64::new(a, b),
        Format::Ma => Complex64::from_polar(a, b * PI / 180.0),
        Format::Db => Complex64::from_polar(10f64.powf(a / 20.0), b * PI / 180.0),
    }
}

/// Port count implied by a `.sNp` extension.
pub fn ports_from_path(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    let digits = ext.strip_prefix('s')?.strip_suffix('p')?;
    digits.parse().ok()
}

/// Parses Touchstone v1 text with a known port count (1 or 2).
pub fn parse(text: &str, ports: usize) -> Result<NetworkData> {
    if !(1..=2).contains(&ports) {
        return Err(IoError::Invalid(format!("only 1- and 2-port data supported, got {ports}")));
    }
    let mut scale = 1e9;
    let mut parameter = Parameter::S;
    let mut format = Format::Ma;
    let mut reference = 50.0;
    let mut seen_option = false;
    let mut numbers: Vec<(usize, f64)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if seen_option {
                continue;
            }
            seen_option = true;
            let tokens: Vec<String> = opts.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
            let mut k = 0;
            while k < tokens.len() {
                let t = tokens[k].as_str();
                if let Some(s) = unit_scale(t) {
                    scale = s;
                } else {
                    match t {
                        "s" => parameter = Parameter::S,
                        "y" => parameter = Parameter::Y,
                        "z" => parameter = Parameter::Z,
                        "ri" => format = Format::Ri,
                        "ma" => format = Format::Ma,
                        "db" => format = Format::Db,
                        "r" => {
                            k += 1;
                            reference = tokens
                                .get(k)
                                .and_then(|v| v.parse().ok())
                                .filter(|r: &f64| *r > 0.0)
                                .ok_or(IoError::Parse {
                                    line: n + 1,
                                    message: "R must be followed by a positive resistance".into(),
                                })?;
                        }
                        other => {
                            return Err(IoError::Parse {
                                line: n + 1,
                                message: format!("unsupported option {other:?}"),
                            })
                        }
                    }
                }
                k += 1;
            }
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| IoError::Parse {
                line: n + 1,
                message: format!("not a number: {tok:?}"),
            })?;
            numbers.push((n + 1, v));
        }
    }
    let per_row = 1 + 2 * ports * ports;
    if numbers.is_empty() || numbers.len() % per_row != 0 {
        return Err(IoError::Invalid(format!(
            "expected a multiple of {per_row} numbers for {ports}-port data, found {}",
            numbers.len()
        )));
    }
    let norm = match parameter {
        Parameter::S => 1.0,
        Parameter::Z => reference,
        Parameter::Y => 1.0 / reference,
    };
    let mut frequencies = Vec::new();
    let mut values = Vec::new();
    for row in numbers.chunks(per_row) {
        let f = row[0].1 * scale;
        if let Some(&last) = frequencies.last() {
            if !(f > last) {
                return Err(IoError::Parse {
                    line: row[0].0,
                    message: "frequencies must increase".into(),
                });
            }
        }
        let file_order: Vec<Complex64> =
            row[1..].chunks(2).map(|p| decode(format, p[0].1, p[1].1) * norm).collect();
        // Two-port files list N11 N21 N12 N22; store row-major.
        let v = if ports == 2 {
            vec![file_order[0], file_order[2], file_order[1], file_order[3]]
        } else {
            file_order
        };
        frequencies.push(f);
        values.push(v);
    }
    Ok(NetworkData { ports, parameter, reference, frequencies, values })
}

/// Reads a `.s1p` or `.s2p` file.
pub fn read(path: &Path) -> Result<NetworkData> {
    let ports = ports_from_path(path).ok_or_else(|| {
        IoError::Invalid(format!("{}: expected a .s1p or .s2p extension", path.display()))
    })?;
    parse(&super::read_to_string(path)?, ports)
}

/// Renders Touchstone v1 text in RI format with frequencies in Hz.
pub fn render(data: &NetworkData) -> Result<String> {
    let n = data.ports;
    if !(1..=2).contains(&n) || data.frequencies.len() != data.values.len() {
        return Err(IoError::Invalid("inconsistent network data".into()));
    }
    let (param, norm) = match data.parameter {
        Parameter::S => ("S", 1.0),
        Parameter::Z => ("Z", 1.0 / data.reference),
        Parameter::Y => ("Y", data.reference),
    };
    let mut out = String::new();
    writeln!(out, "! kerrkit {}-port data", n).unwrap();
    writeln!(out, "# Hz {param} RI R {}", data.reference).unwrap();
    for (f, v) in data.frequencies.iter().zip(&data.values) {
        if v.len() != n * n {
            return Err(IoError::Invalid("value count does not match port count".into()));
        }
        let order: Vec<Complex64> = if n == 2 { vec![v[0], v[2], v[1], v[3]] } else { v.clone() };
        write!(out, "{f:.6}").unwrap();
        for z in order {
            let z = z * norm;
            write!(out, " {:.12e} {:.12e}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// One-port S data from (f, Γ) pairs.
pub fn one_port(trace: &[(f64, Complex64)], reference: f64) -> NetworkData {
    NetworkData {
        ports: 1,
        parameter: Parameter::S,
        reference,
        frequencies: trace.iter().map(|p| p.0).collect(),
        values: trace.iter().map(|p| vec![p.1]).collect(),
    }
}

/// Symmetric reciprocal two-port S data of a hanger from (f, S21) pairs, with
/// S11 = S22 = S21 − 1.
pub fn hanger_two_port(trace: &[(f64, Complex64)], reference: f64) -> NetworkData {
    let one = Complex64::new(1.0, 0.0);
    NetworkData {
        ports: 2,
        parameter: Parameter::S,
        reference,
        frequencies: trace.iter().map(|p| p.0).collect(),
        values: trace.iter().map(|p| vec![p.1 - one, p.1, p.1, p.1 - one]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_options_are_ghz_ma() {
        let d = parse("! c\n7.5 0.5 90\n7.6 1 0\n", 1).unwrap();
        assert_eq!(d.frequencies, vec![7.5e9, 7.6e9]);
        assert!((d.values[0][0] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        assert_eq!(d.parameter, Parameter::S);
    }

    #[test]
    fn db_and_impedance_normalization() {
        let d = parse("# MHz Z DB R 25\n100 -6.020599913 180\n", 1).unwrap();
        assert!((d.values[0][0] - Complex64::new(-12.5, 0.0)).norm() < 1e-9);
        assert_eq!(d.frequencies[0], 1e8);
    }

    #[test]
    fn two_port_order_round_trip() {
        let data = NetworkData {
            ports: 2,
            parameter: Parameter::S,
            reference: 50.0,
            frequencies: vec![1e9, 2e9],
            values: vec![
                vec![
                    Complex64::new(0.1, 0.2),
                    Complex64::new(0.3, 0.4),
                    Complex64::new(0.5, 0.6),
                    Complex64::new(0.7, 0.8),
                ];
                2
            ],
        };
        let text = render(&data).unwrap();
        let back = parse(&text, 2).unwrap();
        assert_eq!(back.frequencies, data.frequencies);
        for (a, b) in back.values.iter().flatten().zip(data.values.iter().flatten()) {
            assert!((a - b).norm() < 1e-12);
        }
        // S21 is the second pair on each data line.
        let first = text.lines().nth(2).unwrap();
        assert!(first.split_whitespace().nth(3).unwrap().starts_with("5.0"));
        assert_eq!(back.resonance_trace()[0].1, Complex64::new(0.5, 0.6));
    }

    #[test]
    fn rejects_ragged_rows_and_bad_tokens() {
        assert!(parse("# Hz S RI\n1 0.1\n", 1).is_err());
        assert!(parse("# Hz S RI\n1 0.1 x\n", 1).is_err());
        assert!(parse("# Hz S RI\n2 0 0\n1 0 0\n", 1).is_err());
        assert!(parse("# Hz S RI R\n1 0 0\n", 1).is_err());
    }

    #[test]
    fn extension_ports() {
        assert_eq!(ports_from_path(Path::new("a/b.S2P")), Some(2));
        assert_eq!(ports_from_path(Path::new("x.s1p")), Some(1));
        assert_eq!(ports_from_path(Path::new("x.csv")), None);
    }
}
