use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A univariate regression sample: covariates `x` and responses `y`.
///
/// Both vectors are finite, the same length, with n ≥ 3.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl DesignSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "x has {} entries, y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "need at least 3 observations, got {}",
                x.len()
            )));
        }
        if let Some(v) = x.iter().chain(y.iter()).find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite entry {v}")));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Subsample at the given indices. Indices must be in range and leave
    /// at least 3 observations.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let x = indices.iter().map(|&i| self.x[i]).collect();
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Self::new(x, y)
    }

    /// Read a sample from CSV with header `x,y`, one observation per row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        {
            let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?;
            if headers.len() < 2 {
                return Err(Error::Csv(format!(
                    "expected header `x,y`, got {:?}",
                    headers
                )));
            }
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            if rec.len() < 2 {
                return Err(Error::Csv(format!("row {}: expected 2 fields", row + 2)));
            }
            let parse = |s: &str, col: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Csv(format!("row {}: bad {col} value {s:?}", row + 2)))
            };
            x.push(parse(&rec[0], "x")?);
            y.push(parse(&rec[1], "y")?);
        }
        Self::new(x, y)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y")?;
        for (xi, yi) in self.x.iter().zip(&self.y) {
            writeln!(w, "{xi},{yi}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch_and_short_samples() {
        assert!(matches!(
            DesignSample::new(vec![0.0, 1.0], vec![0.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            DesignSample::new(vec![0.0, 1.0], vec![0.0, 1.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DesignSample::new(vec![0.0, 0.5, f64::NAN], vec![0.0; 3]).is_err());
        assert!(DesignSample::new(vec![0.0, 0.5, 1.0], vec![0.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = DesignSample::new(vec![0.0, 0.5, 1.0], vec![1.0, -2.5, 0.25]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = DesignSample::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn csv_rejects_empty_and_malformed() {
        assert!(DesignSample::from_csv_reader("".as_bytes()).is_err());
        assert!(DesignSample::from_csv_reader("x,y\n1.0,2.0\n".as_bytes()).is_err()); // n < 3
        assert!(DesignSample::from_csv_reader("x,y\na,b\nc,d\ne,f\n".as_bytes()).is_err());
    }
}
