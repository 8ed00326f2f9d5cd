//! Tensor and factor file formats.
//!
//! Tensor JSON: `{"dims":[d1,d2,d3],"data":[...],"meta":{...}}` with `data`
//! row-major and `meta` optional. Tensor binary: the magic `TKR1`, three
//! little-endian `u64` dims, then `d1·d2·d3` little-endian `f64`.
//! Factor JSON: `{"r":..,"d":..,"S":{tensor},"A":[[..]],"B":[[..]],"C":[[..]]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tucker_core::{FactorPoint, Matrix, Tensor3};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"TKR1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDoc {
    pub dims: [usize; 3],
    pub data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

impl TensorDoc {
    pub fn new(t: &Tensor3, meta: Option<Value>) -> Self {
        Self {
            dims: t.dims(),
            data: t.data().to_vec(),
            meta,
        }
    }

    pub fn to_tensor(&self) -> tucker_core::Result<Tensor3> {
        Tensor3::from_vec(self.dims, self.data.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorDoc {
    pub r: usize,
    pub d: usize,
    #[serde(rename = "S")]
    pub s: TensorDoc,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

impl FactorDoc {
    pub fn new(p: &FactorPoint) -> Self {
        Self {
            r: p.r(),
            d: p.d(),
            s: TensorDoc::new(p.s(), None),
            a: p.a().to_rows(),
            b: p.b().to_rows(),
            c: p.c().to_rows(),
        }
    }

    pub fn to_point(&self) -> tucker_core::Result<FactorPoint> {
        let m = |rows: &[Vec<f64>], cols: usize| {
            if rows.is_empty() {
                Ok(Matrix::zeros(0, cols))
            } else {
                Matrix::from_rows(rows)
            }
        };
        FactorPoint::new(self.s.to_tensor()?, m(&self.a, self.d)?, m(&self.b, self.d)?, m(&self.c, self.d)?)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Read {
        path: path.into(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.into(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.into(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })
}

pub fn encode_binary(t: &Tensor3) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 24 + 8 * t.len());
    out.extend_from_slice(MAGIC);
    for d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> std::result::Result<Tensor3, String> {
    if bytes.len() < 28 || &bytes[..4] != MAGIC {
        return Err("missing TKR1 header".into());
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let raw = u64::from_le_bytes(bytes[4 + 8 * i..12 + 8 * i].try_into().expect("8 bytes"));
        *d = usize::try_from(raw).map_err(|_| format!("dimension {raw} too large"))?;
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("dimension product overflows")?;
    let body = &bytes[28..];
    if Some(body.len()) != n.checked_mul(8) {
        return Err(format!("expected {n} values for dims {dims:?}, found {} bytes", body.len()));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor3::from_vec(dims, data).map_err(|e| e.to_string())
}

/// Reads a tensor in either format, detected by the `TKR1` magic.
/// Returns the JSON `meta` field when present.
pub fn read_tensor(path: &Path) -> Result<(Tensor3, Option<Value>)> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(MAGIC) {
        let t = decode_binary(&bytes).map_err(|msg| CliError::Format {
            path: path.into(),
            msg,
        })?;
        return Ok((t, None));
    }
    let doc: TensorDoc = parse_json(path, &bytes)?;
    let t = doc.to_tensor().map_err(|e| CliError::Format {
        path: path.into(),
        msg: e.to_string(),
    })?;
    Ok((t, doc.meta))
}

pub fn write_tensor_json(path: &Path, t: &Tensor3, meta: Option<Value>) -> Result<()> {
    write_bytes(path, &to_json_bytes(&TensorDoc::new(t, meta)))
}

pub fn write_tensor_binary(path: &Path, t: &Tensor3) -> Result<()> {
    write_bytes(path, &encode_binary(t))
}

pub fn read_factors(path: &Path) -> Result<FactorPoint> {
    let doc: FactorDoc = parse_json(path, &read_bytes(path)?)?;
    doc.to_point().map_err(|e| CliError::Format {
        path: path.into(),
        msg: e.to_string(),
    })
}

pub fn write_factors(path: &Path, p: &FactorPoint) -> Result<()> {
    write_bytes(path, &to_json_bytes(&FactorDoc::new(p)))
}
