//! Readers and writers for count tables, dataset metadata, states and reports.
//!
//! Count CSV columns: `theta, phi, beta, n_f2_apd1, n_f2_apd2, n_f1_apd1,
//! n_f1_apd2`, optionally followed by `photon_basis` (`linear` or `circular`,
//! default `linear`) and `label`. For circular rows `beta` is left empty.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{
    AtomSetting, CountRecord, Dataset, DatasetMeta, MeasurementSetting, PhotonSetting,
};
use crate::qmath::{ComplexMatrix, DensityMatrix, BASIS_LABEL};
use crate::tomography::FitReport;

pub const CSV_COLUMNS: [&str; 9] = [
    "theta",
    "phi",
    "beta",
    "n_f2_apd1",
    "n_f2_apd2",
    "n_f1_apd1",
    "n_f1_apd2",
    "photon_basis",
    "label",
];

fn angle(x: f64) -> String {
    // 17 significant digits: parses back to the same f64
    format!("{x:.16e}")
}

pub fn write_counts_csv<W: Write>(w: W, records: &[CountRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in records {
        let (basis, beta) = match r.setting.photon {
            PhotonSetting::Linear { beta } => ("linear", angle(beta)),
            PhotonSetting::Circular => ("circular", String::new()),
        };
        let mut row = vec![angle(r.setting.atom.theta), angle(r.setting.atom.phi), beta];
        row.extend(r.counts.iter().map(|c| c.to_string()));
        row.push(basis.to_string());
        row.push(r.setting.label.clone().unwrap_or_default());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_counts_csv<R: Read>(r: R) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 7];
    let mut missing = Vec::new();
    for (k, name) in CSV_COLUMNS[..7].iter().enumerate() {
        match col(name) {
            Some(i) => idx[k] = i,
            None => missing.push(*name),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Invalid(format!(
            "CSV lacks columns: {}",
            missing.join(", ")
        )));
    }
    let basis_col = col("photon_basis");
    let label_col = col("label");
    let mut records = Vec::new();
    for (row_no, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row_no + 2;
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize, name: &str| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                Error::Invalid(format!(
                    "row {line}: `{name}` = `{}` is not a number",
                    field(i)
                ))
            })
        };
        let atom = AtomSetting::new(num(idx[0], "theta")?, num(idx[1], "phi")?)
            .map_err(|e| Error::Invalid(format!("row {line}: {e}")))?;
        let basis = basis_col
            .map(field)
            .filter(|s| !s.is_empty())
            .unwrap_or("linear");
        let photon = match basis {
            "linear" => PhotonSetting::linear(num(idx[2], "beta")?)?,
            "circular" => PhotonSetting::Circular,
            other => {
                return Err(Error::Invalid(format!(
                    "row {line}: photon_basis `{other}` is neither linear nor circular"
                )))
            }
        };
        let mut counts = [0.0; 4];
        for (k, c) in counts.iter_mut().enumerate() {
            *c = num(idx[3 + k], CSV_COLUMNS[3 + k])?;
        }
        let mut setting = MeasurementSetting::new(atom, photon);
        if let Some(l) = label_col.map(field).filter(|s| !s.is_empty()) {
            setting = setting.with_label(l);
        }
        records.push(
            CountRecord::new(setting, counts)
                .map_err(|e| Error::Invalid(format!("row {line}: {e}")))?,
        );
    }
    Ok(records)
}

/// Sidecar path: `x.counts.csv` -> `x.counts.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the CSV and its JSON metadata sidecar.
pub fn write_dataset(csv_path: &Path, ds: &Dataset) -> Result<()> {
    write_counts_csv(BufWriter::new(File::create(csv_path)?), &ds.records)?;
    write_json(&sidecar_path(csv_path), &ds.meta)
}

/// Reads the CSV; metadata comes from the sidecar if one exists, otherwise
/// the data is marked as ingested.
pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let records = read_counts_csv(BufReader::new(File::open(csv_path)?))?;
    let side = sidecar_path(csv_path);
    let meta = if side.exists() {
        read_json(&side)?
    } else {
        DatasetMeta::ingested()
    };
    Dataset::new(records, meta)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Serialized density matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub basis: String,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
}

impl StateFile {
    pub fn new(rho: &ComplexMatrix, fit: Option<FitReport>) -> Self {
        let (real, imag) = rho.to_parts();
        Self {
            basis: BASIS_LABEL.to_string(),
            real,
            imag,
            fit,
        }
    }

    pub fn matrix(&self) -> Result<ComplexMatrix> {
        ComplexMatrix::from_parts(&self.real, &self.imag)
    }

    pub fn state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.matrix()?)
    }
}

/// Fixed-width table of the real part, one row per line.
pub fn real_part_table(rho: &ComplexMatrix) -> String {
    let n = rho.dim();
    let mut s = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:>8.4}", rho[(i, j)].re)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}
