//! Matrix and scenario file formats.
//!
//! Matrices are CSV (optional header, rows are observations) or the raw
//! binary layout: `b"UHDM"`, `n: u32 LE`, `p: u32 LE`, then `n * p` f64 LE
//! values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use uhdtest::simharness::{CaseId, Hypothesis, Innovation, Scenario};
use uhdtest::{DataMatrix, Error, Result};

pub const MAGIC: &[u8; 4] = b"UHDM";

pub fn read_matrix(path: &Path) -> Result<DataMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        parse_csv(&bytes).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<DataMatrix> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Parse("binary matrix header is missing or truncated".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let p = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() != n * p * 8 {
        return Err(Error::Parse(format!("binary matrix declares {n}x{p} but carries {} bytes of data", body.len())));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    DataMatrix::new(n, p, values)
}

pub fn encode_binary(m: &DataMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * m.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.n() as u32).to_le_bytes());
    out.extend_from_slice(&(m.p() as u32).to_le_bytes());
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// CSV with an optional header row: the first record is a header exactly
/// when some field in it is not a number.
pub fn parse_csv(bytes: &[u8]) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("no numeric rows".into()));
    }
    DataMatrix::from_rows(&rows)
}

pub fn write_csv<W: Write>(m: &DataMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..m.n() {
        w.write_record(m.row(i).iter().map(|v| v.to_string())).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Population eigenvalues: numbers separated by commas, whitespace or newlines.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{}: '{s}': {e}", path.display()))))
        .collect()
}

/// Flat `key = value` (or `key: value`) lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value'", i + 1)))?;
        out.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Parse(format!("{key}: '{v}': {e}")))
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut case = None;
    let mut p = None;
    let (mut n1, mut n2) = (None, None);
    let mut dist = Innovation::Gaussian;
    let mut hypothesis = None;
    let mut param = None;
    let mut seed = 0u64;
    for (k, v) in parse_pairs(text)? {
        match k.as_str() {
            "case" => case = Some(v.parse::<CaseId>()?),
            "p" => p = Some(number(&k, &v)?),
            "n1" => n1 = Some(number(&k, &v)?),
            "n2" => n2 = Some(number(&k, &v)?),
            "dist" | "distribution" => dist = v.parse()?,
            "hypothesis" => hypothesis = Some(v.parse::<Hypothesis>()?),
            "theta" | "epsilon" | "eps" | "param" => param = Some(number(&k, &v)?),
            "seed" | "scenario_seed" => seed = number(&k, &v)?,
            other => return Err(Error::Parse(format!("unknown scenario key '{other}'"))),
        }
    }
    let missing = |what: &str| Error::Parse(format!("scenario is missing '{what}'"));
    let scenario = Scenario {
        case: case.ok_or_else(|| missing("case"))?,
        p: p.ok_or_else(|| missing("p"))?,
        n1: n1.ok_or_else(|| missing("n1"))?,
        n2: n2.ok_or_else(|| missing("n2"))?,
        dist,
        hypothesis: hypothesis.ok_or_else(|| missing("hypothesis"))?,
        param,
        seed,
    };
    scenario.validate().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_header() {
        let a = parse_csv(b"a,b\n1,2\n3,4\n5,6\n").unwrap();
        let b = parse_csv(b"1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.p()), (3, 2));
        assert!(parse_csv(b"1,2\n3,x\n").is_err());
        assert!(parse_csv(b"1,2\n3\n").is_err());
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let m = DataMatrix::new(3, 2, vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0, 8.0, f64::MAX]).unwrap();
        let bytes = encode_binary(&m);
        assert_eq!(&bytes[..4], b"UHDM");
        assert_eq!(bytes.len(), 12 + 6 * 8);
        assert_eq!(decode_binary(&bytes).unwrap(), m);
        assert!(decode_binary(&bytes[..20]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DataMatrix::new(2, 2, vec![0.1, 1.0 / 3.0, -1e-17, 12345.678]).unwrap();
        let mut buf = Vec::new();
        write_csv(&m, &mut buf).unwrap();
        assert_eq!(parse_csv(&buf).unwrap(), m);
    }

    #[test]
    fn scenario_file() {
        let s = parse_scenario("# case III\ncase = III\np = 100\nn1 = 40\nn2 = 40\ndist = two_point\nhypothesis = alternative\nepsilon = 1\nseed = 9\n").unwrap();
        assert_eq!(s.case, CaseId::III);
        assert_eq!(s.dist, Innovation::TwoPoint);
        assert_eq!(s.param, Some(1.0));
        assert!(parse_scenario("case = IV\np = 1\nn1 = 5\nn2 = 5\nhypothesis = null\n").is_err());
        assert!(parse_scenario("case = III\np = 10\nn1 = 5\nn2 = 5\nhypothesis = alternative\n").is_err());
    }
}
