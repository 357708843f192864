//! On-disk formats: raw little-endian `f64` arrays with a JSON sidecar, CSV
//! series, JSON documents, and the wave-train family directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Field, PeriodicGrid};
use crate::wavetrain::{FamilyDerivatives, WaveTrain, WaveTrainFamily};

/// Sidecar of a raw array: `shape = [components, points]`, component-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayMeta {
    pub dtype: String,
    pub order: String,
    pub shape: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PeriodicGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

impl ArrayMeta {
    pub fn new(data: &[Vec<f64>]) -> Self {
        Self {
            dtype: "float64-le".into(),
            order: "component-major".into(),
            shape: [data.len(), data.first().map_or(0, Vec::len)],
            time: None,
            grid: None,
            k: None,
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_array(path: &Path, data: &[Vec<f64>], meta: &ArrayMeta) -> Result<()> {
    if data.iter().any(|c| c.len() != meta.shape[1]) || data.len() != meta.shape[0] {
        return Err(Error::Validation("array shape does not match its sidecar".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in data.iter().flatten() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_array(path: &Path) -> Result<(Vec<Vec<f64>>, ArrayMeta)> {
    let meta: ArrayMeta = read_json(&sidecar_path(path))?;
    let bytes = fs::read(path)?;
    let [rows, cols] = meta.shape;
    if bytes.len() != rows * cols * 8 {
        return Err(Error::Validation(format!(
            "{} holds {} bytes, sidecar expects {rows}x{cols} doubles",
            path.display(),
            bytes.len()
        )));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Ok((flat.chunks(cols.max(1)).take(rows).map(<[f64]>::to_vec).collect(), meta))
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    let mut meta = ArrayMeta::new(&field.values);
    meta.time = Some(field.time);
    meta.grid = Some(field.grid);
    write_array(path, &field.values, &meta)
}

pub fn read_field(path: &Path) -> Result<Field> {
    let (values, meta) = read_array(path)?;
    let grid = meta
        .grid
        .ok_or_else(|| Error::Validation(format!("{} has no grid in its sidecar", path.display())))?;
    Field::new(grid, values, meta.time.unwrap_or(0.0))
}

/// `stem_TTTTTT.f64` for snapshot index `i`.
pub fn indexed_name(stem: &str, i: usize) -> String {
    format!("{stem}_{i:06}.f64")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Validation("csv row width does not match header".into()));
        }
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns by header name.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, v) in cols.iter_mut().zip(rec.iter()) {
            c.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Validation(format!("bad number {v:?} in {}: {e}", path.display())))?,
            );
        }
    }
    Ok((header, cols))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FamilyMeta {
    k0: f64,
    omega0: f64,
    dk: f64,
    r0: f64,
    base_index: usize,
    k_table: Vec<f64>,
    omega_table: Vec<f64>,
    residuals: Vec<f64>,
    base_residual: f64,
    base_newton_steps: usize,
    omega_p: Option<f64>,
    omega_pp: Option<f64>,
    derivative_residuals: Option<[f64; 2]>,
    failure: Option<String>,
    failure_last_good_k: Option<f64>,
}

const DERIVATIVE_FILES: [&str; 4] = ["dk_profile", "dzk_profile", "dzzk_profile", "dkk_profile"];

pub fn write_family(dir: &Path, fam: &WaveTrainFamily) -> Result<()> {
    fs::create_dir_all(dir)?;
    let der = fam.derivatives.as_ref();
    let meta = FamilyMeta {
        k0: fam.base.k,
        omega0: fam.base.omega,
        dk: fam.dk,
        r0: fam.r0,
        base_index: fam.base_index,
        k_table: fam.k_table.clone(),
        omega_table: fam.omega_table.clone(),
        residuals: fam.residuals.clone(),
        base_residual: fam.base.residual_norm,
        base_newton_steps: fam.base.newton_steps,
        omega_p: der.map(|d| d.omega_p),
        omega_pp: der.map(|d| d.omega_pp),
        derivative_residuals: der.map(|d| d.residuals),
        failure: fam.failure.as_ref().map(|f| f.message.clone()),
        failure_last_good_k: fam.failure.as_ref().map(|f| f.last_good_k),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    for (i, (p, k)) in fam.profiles.iter().zip(&fam.k_table).enumerate() {
        let mut m = ArrayMeta::new(p);
        m.k = Some(*k);
        write_array(&dir.join(indexed_name("profile", i)), p, &m)?;
    }
    write_array(
        &dir.join("adjoint_zero.f64"),
        &fam.adjoint_zero,
        &ArrayMeta::new(&fam.adjoint_zero),
    )?;
    if let Some(d) = der {
        let arrays = [&d.dk_profile, &d.dzk_profile, &d.dzzk_profile, &d.dkk_profile];
        for (name, a) in DERIVATIVE_FILES.iter().zip(arrays) {
            write_array(&dir.join(format!("{name}.f64")), a, &ArrayMeta::new(a))?;
        }
    }
    Ok(())
}

pub fn read_family(dir: &Path) -> Result<WaveTrainFamily> {
    let meta: FamilyMeta = read_json(&dir.join("meta.json"))?;
    let profiles = (0..meta.k_table.len())
        .map(|i| read_array(&dir.join(indexed_name("profile", i))).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    let base_profile = profiles
        .get(meta.base_index)
        .cloned()
        .ok_or_else(|| Error::Validation("family base index out of range".into()))?;
    let derivatives = match (meta.omega_p, meta.omega_pp, meta.derivative_residuals) {
        (Some(omega_p), Some(omega_pp), Some(residuals)) => {
            let mut arrays = DERIVATIVE_FILES
                .iter()
                .map(|n| read_array(&dir.join(format!("{n}.f64"))).map(|a| a.0))
                .collect::<Result<Vec<_>>>()?
                .into_iter();
            let mut next = || arrays.next().expect("four derivative arrays");
            Some(FamilyDerivatives {
                dk_profile: next(),
                dzk_profile: next(),
                dzzk_profile: next(),
                dkk_profile: next(),
                omega_p,
                omega_pp,
                residuals,
            })
        }
        _ => None,
    };
    Ok(WaveTrainFamily {
        base: WaveTrain {
            k: meta.k0,
            omega: meta.omega0,
            profile: base_profile,
            residual_norm: meta.base_residual,
            newton_steps: meta.base_newton_steps,
        },
        r0: meta.r0,
        dk: meta.dk,
        k_table: meta.k_table,
        omega_table: meta.omega_table,
        residuals: meta.residuals,
        profiles,
        base_index: meta.base_index,
        adjoint_zero: read_array(&dir.join("adjoint_zero.f64"))?.0,
        derivatives,
        failure: meta.failure.map(|message| crate::wavetrain::ContinuationFailure {
            last_good_k: meta.failure_last_good_k.unwrap_or(meta.k0),
            message,
        }),
    })
}
