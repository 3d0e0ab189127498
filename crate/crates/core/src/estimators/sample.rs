use std::io::{Read, Write};

use crate::error::{NpivError, Result};
use crate::numerics::Mat;

/// Observations `(Y1, Y2, X)` with `Y2 ∈ [0,1]^d` and `X ∈ [0,1]^{d_x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    y1: Vec<f64>,
    y2: Mat,
    x: Mat,
}

fn check_unit_cube(m: &Mat, name: &str) -> Result<()> {
    if let Some((i, v)) = m
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(NpivError::Domain(format!(
            "{name} row {} has value {v} outside [0, 1]",
            i / m.cols().max(1)
        )));
    }
    Ok(())
}

impl Sample {
    pub fn new(y1: Vec<f64>, y2: Mat, x: Mat) -> Result<Self> {
        let n = y1.len();
        if n == 0 {
            return Err(NpivError::Domain("sample is empty".into()));
        }
        if y2.rows() != n || x.rows() != n {
            return Err(NpivError::Domain(format!(
                "row counts differ: y1 {n}, y2 {}, x {}",
                y2.rows(),
                x.rows()
            )));
        }
        if y2.cols() == 0 || x.cols() == 0 {
            return Err(NpivError::Domain("y2 and x need at least one column".into()));
        }
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(NpivError::Domain("y1 has non-finite values".into()));
        }
        check_unit_cube(&y2, "y2")?;
        check_unit_cube(&x, "x")?;
        Ok(Self { y1, y2, x })
    }

    /// Regression sample: the regressor plays both roles (`Y2 = X`).
    pub fn regression(y: Vec<f64>, x: Mat) -> Result<Self> {
        Self::new(y, x.clone(), x)
    }

    pub fn n(&self) -> usize {
        self.y1.len()
    }

    /// Dimension of `Y2`.
    pub fn d(&self) -> usize {
        self.y2.cols()
    }

    pub fn dx(&self) -> usize {
        self.x.cols()
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn y2(&self) -> &Mat {
        &self.y2
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    /// Same regressors and instruments with a different outcome vector.
    pub fn with_y1(&self, y1: Vec<f64>) -> Result<Self> {
        Self::new(y1, self.y2.clone(), self.x.clone())
    }

    pub fn header(d: usize, dx: usize) -> Vec<String> {
        let mut h = vec!["y1".to_string()];
        h.extend((1..=d).map(|i| format!("y2_{i}")));
        h.extend((1..=dx).map(|i| format!("x_{i}")));
        h
    }

    /// Reads the CSV layout `y1, y2_1..y2_d, x_1..x_dx`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let d = header.iter().filter(|h| h.starts_with("y2_")).count();
        let dx = header.iter().filter(|h| h.starts_with("x_")).count();
        if d == 0 || dx == 0 || header != Self::header(d, dx) {
            let expected = Self::header(d.max(1), dx.max(1));
            let missing: Vec<&str> = expected
                .iter()
                .filter(|c| !header.contains(c))
                .map(String::as_str)
                .collect();
            let unexpected: Vec<&str> = header
                .iter()
                .filter(|c| !expected.contains(c))
                .map(String::as_str)
                .collect();
            return Err(NpivError::Schema(format!(
                "expected header y1,y2_1..y2_d,x_1..x_dx, got `{}`; missing columns [{}]; unexpected columns [{}]",
                header.join(","),
                missing.join(", "),
                unexpected.join(", ")
            )));
        }
        let mut y1 = Vec::new();
        let mut y2 = Vec::new();
        let mut x = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        NpivError::Schema(format!("data row {}: `{s}` is not a number", line + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != 1 + d + dx {
                return Err(NpivError::Schema(format!("data row {} has wrong arity", line + 1)));
            }
            y1.push(vals[0]);
            y2.extend_from_slice(&vals[1..1 + d]);
            x.extend_from_slice(&vals[1 + d..]);
        }
        let n = y1.len();
        Self::new(y1, Mat::new(n, d, y2)?, Mat::new(n, dx, x)?)
    }

    /// Writes the CSV layout read by [`Sample::read_csv`], with shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::header(self.d(), self.dx()))?;
        let mut rec = Vec::with_capacity(1 + self.d() + self.dx());
        for i in 0..self.n() {
            rec.clear();
            rec.push(self.y1[i].to_string());
            rec.extend(self.y2.row(i).iter().map(f64::to_string));
            rec.extend(self.x.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
