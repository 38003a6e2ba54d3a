//! On-disk formats.
//!
//! - Dataset CSV: header `k,u,y` or `k,u,y,p`, one row per sample, `k` a
//!   1-based index, reals written with 17 significant digits.
//! - Model JSON: `{degree, n_taps, grid, H, sigma}` with `H` as a list of rows.
//! - Result JSON: `H`, `A` (lists of rows), `pi`, `sigma2`, `path`,
//!   `loglik_trace`, `chosen_degree` plus the grid and bookkeeping needed to
//!   decode new records.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hmm::{HmmParams, InitialDist, TransitionMatrix};
use crate::model::{CoeffMatrix, Dataset, LpvFirModel, SchedulingGrid};
use crate::qsvbw::{DegreeScore, IdentifiedModel, QsvbwResult};

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn dataset_to_csv(data: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    if data.p_true.is_some() {
        w.write_record(["k", "u", "y", "p"])?;
    } else {
        w.write_record(["k", "u", "y"])?;
    }
    for k in 0..data.len() {
        let mut row = vec![(k + 1).to_string(), fmt_real(data.u[k]), fmt_real(data.y[k])];
        if let Some(p) = &data.p_true {
            row.push(fmt_real(p[k]));
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn dataset_from_csv(bytes: &[u8]) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let has_p = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["k", "u", "y"] => false,
        ["k", "u", "y", "p"] => true,
        other => return Err(invalid(format!("unexpected dataset header {other:?}"))),
    };
    let (mut u, mut y, mut p) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| invalid(format!("row {}: missing column {i}", row + 1)))
        };
        let k: usize = field(0)?
            .parse()
            .map_err(|_| invalid(format!("row {}: bad sample index", row + 1)))?;
        if k != row + 1 {
            return Err(invalid(format!("row {}: sample index {k} out of sequence", row + 1)));
        }
        let real = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|_| invalid(format!("row {}: column {i} is not a number", row + 1)))
        };
        u.push(real(1)?);
        y.push(real(2)?);
        if has_p {
            p.push(real(3)?);
        }
    }
    let data = Dataset::new(u, y)?;
    if has_p {
        data.with_truth(p)
    } else {
        Ok(data)
    }
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, dataset_to_csv(data)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_csv(&fs::read(path)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub degree: usize,
    pub n_taps: usize,
    pub grid: SchedulingGrid,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl From<&LpvFirModel> for ModelFile {
    fn from(m: &LpvFirModel) -> Self {
        Self {
            degree: m.coeffs.degree(),
            n_taps: m.coeffs.n_taps(),
            grid: m.grid.clone(),
            h: m.coeffs.rows(),
            sigma: m.noise_std(),
        }
    }
}

impl TryFrom<ModelFile> for LpvFirModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let coeffs = CoeffMatrix::from_rows(&f.h)?;
        if coeffs.degree() != f.degree || coeffs.n_taps() != f.n_taps {
            return Err(invalid("model H does not match its declared degree and n_taps"));
        }
        LpvFirModel::new(coeffs, f.grid, f.sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
    pub sigma2: f64,
    pub path: Vec<f64>,
    pub loglik_trace: Vec<f64>,
    pub chosen_degree: usize,
    pub iterations_run: usize,
    pub n_taps: usize,
    pub grid: SchedulingGrid,
    /// Training-prefix length used by the pipeline, when the record was split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(default)]
    pub degree_scores: Vec<DegreeScore>,
}

impl ResultFile {
    pub fn from_result(r: &QsvbwResult, n_train: Option<usize>) -> Self {
        Self {
            h: r.coeffs().rows(),
            a: r.hmm().a.rows(),
            pi: r.hmm().pi.probs().to_vec(),
            sigma2: r.hmm().sigma2(),
            path: r.path.clone(),
            loglik_trace: r.loglik_trace.clone(),
            chosen_degree: r.chosen_degree,
            iterations_run: r.iterations_run,
            n_taps: r.n_taps,
            grid: r.model.grid.clone(),
            n_train,
            degree_scores: r.degree_scores.clone(),
        }
    }

    pub fn model(&self) -> Result<IdentifiedModel> {
        let coeffs = CoeffMatrix::from_rows(&self.h)?;
        if coeffs.degree() != self.chosen_degree || coeffs.n_taps() != self.n_taps {
            return Err(invalid("result H does not match chosen_degree and n_taps"));
        }
        let hmm = HmmParams::new(
            TransitionMatrix::from_rows(&self.a)?,
            InitialDist::new(self.pi.clone())?,
            self.sigma2,
        )?;
        if hmm.n_states() != self.grid.len() {
            return Err(invalid("result chain size does not match the grid"));
        }
        Ok(IdentifiedModel {
            coeffs,
            hmm,
            grid: self.grid.clone(),
        })
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_bytes(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let data = Dataset::new(vec![0.5, -1.0], vec![1.0, 2.0]).unwrap();
        let text = String::from_utf8(dataset_to_csv(&data).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,u,y");
        assert_eq!(lines[1], "1,5.0000000000000000e-1,1.0000000000000000e0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(dataset_from_csv(b"k,u\n1,2\n").is_err());
        assert!(dataset_from_csv(b"k,u,y\n2,1,1\n").is_err());
        assert!(dataset_from_csv(b"k,u,y\n1,abc,1\n").is_err());
        assert!(dataset_from_csv(b"k,u,y\n").is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let h = CoeffMatrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.25]]).unwrap();
        let model = LpvFirModel::new(h, SchedulingGrid::benchmark(), 0.1).unwrap();
        let json = serde_json::to_string(&ModelFile::from(&model)).unwrap();
        assert!(json.contains("\"H\":[[1.0,2.0],[-0.5,0.25]]"));
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(LpvFirModel::try_from(back).unwrap(), model);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6, -10.0f64..10.0), 1..40),
            with_p in any::<bool>(),
        ) {
            let u: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.1 * 1e-7).collect();
            let mut data = Dataset::new(u, y).unwrap();
            if with_p {
                data = data.with_truth(rows.iter().map(|r| r.2).collect()).unwrap();
            }
            let back = dataset_from_csv(&dataset_to_csv(&data).unwrap()).unwrap();
            prop_assert_eq!(back, data);
        }
    }
}
