//! Self-describing parameter file.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "SICNET01"
//! 8       4     array count N (u32 LE)
//! then N records:
//!         4     name length L (u32 LE)
//!         L     name, UTF-8
//!         4     rows (u32 LE)
//!         4     cols (u32 LE)
//!         8*r*c values, f64 LE, row-major
//! ```
//!
//! A single network is stored as arrays `W1 b1 W2 b2 W3 b3`; biases are
//! `1 x n`. Files holding several networks prefix the names, e.g. `i.W1`.

use std::path::Path;

use super::{Matrix, MlpParams};
use crate::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 8] = b"SICNET01";

pub fn encode_arrays(arrays: &[(String, Matrix)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for (name, m) in arrays {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(m.rows as u32).to_le_bytes());
        out.extend_from_slice(&(m.cols as u32).to_le_bytes());
        for v in &m.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {} (wanted {n} more)", self.pos)),
        }
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }
}

pub fn decode_arrays(bytes: &[u8]) -> std::result::Result<Vec<(String, Matrix)>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != PARAMS_MAGIC {
        return Err("bad magic".into());
    }
    let count = r.u32()?;
    let mut arrays = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| "array name is not UTF-8".to_string())?
            .to_string();
        let rows = r.u32()?;
        let cols = r.u32()?;
        let n = rows.checked_mul(cols).ok_or("array size overflows")?;
        let raw = r.take(n.checked_mul(8).ok_or("array size overflows")?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        arrays.push((name, Matrix { rows, cols, data }));
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(arrays)
}

pub fn write_arrays(path: &Path, arrays: &[(String, Matrix)]) -> Result<()> {
    std::fs::write(path, encode_arrays(arrays)).map_err(|e| Error::io(path, e))
}

pub fn read_arrays(path: &Path) -> Result<Vec<(String, Matrix)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_arrays(&bytes).map_err(|reason| Error::CorruptFile {
        path: path.to_path_buf(),
        reason,
    })
}

impl MlpParams {
    /// Named arrays `{prefix}W1 .. {prefix}b3`.
    pub fn to_arrays(&self, prefix: &str) -> Vec<(String, Matrix)> {
        let bias = |b: &[f64]| Matrix {
            rows: 1,
            cols: b.len(),
            data: b.to_vec(),
        };
        vec![
            (format!("{prefix}W1"), self.w1.clone()),
            (format!("{prefix}b1"), bias(&self.b1)),
            (format!("{prefix}W2"), self.w2.clone()),
            (format!("{prefix}b2"), bias(&self.b2)),
            (format!("{prefix}W3"), self.w3.clone()),
            (format!("{prefix}b3"), bias(&self.b3)),
        ]
    }

    /// Inverse of [`MlpParams::to_arrays`]. `expected_in_dim`, when given,
    /// must match the stored `W1` row count.
    pub fn from_arrays(arrays: &[(String, Matrix)], prefix: &str, path: &Path, expected_in_dim: Option<usize>) -> Result<Self> {
        let find = |name: &str| -> Result<&Matrix> {
            let full = format!("{prefix}{name}");
            arrays
                .iter()
                .find(|(n, _)| *n == full)
                .map(|(_, m)| m)
                .ok_or_else(|| Error::CorruptFile {
                    path: path.to_path_buf(),
                    reason: format!("missing array {full}"),
                })
        };
        let w1 = find("W1")?.clone();
        if let Some(expected) = expected_in_dim {
            if w1.rows != expected {
                return Err(Error::ShapeMismatch {
                    name: format!("{prefix}W1"),
                    expected: format!("{expected} input rows"),
                    found: format!("{} input rows", w1.rows),
                });
            }
        }
        let params = MlpParams {
            in_dim: w1.rows,
            w1,
            b1: find("b1")?.data.clone(),
            w2: find("W2")?.clone(),
            b2: find("b2")?.data.clone(),
            w3: find("W3")?.clone(),
            b3: find("b3")?.data.clone(),
        };
        params.check_shapes()?;
        Ok(params)
    }
}

pub fn save_params(params: &MlpParams, path: &Path) -> Result<()> {
    write_arrays(path, &params.to_arrays(""))
}

pub fn load_params(path: &Path, expected_in_dim: Option<usize>) -> Result<MlpParams> {
    let arrays = read_arrays(path)?;
    MlpParams::from_arrays(&arrays, "", path, expected_in_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnn::init_params;
    use rand::SeedableRng;

    fn params() -> MlpParams {
        init_params(6, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let mut p = params();
        p.b2[3] = -0.0;
        p.b1[0] = f64::MIN_POSITIVE / 3.0;
        save_params(&p, &path).unwrap();
        let q = load_params(&path, Some(6)).unwrap();
        for (a, b) in p.slices().iter().zip(q.slices()) {
            let abits: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bbits: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(abits, bbits);
        }
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        assert!(matches!(load_params(&path, None), Err(Error::Io { .. })));

        save_params(&params(), &path).unwrap();
        assert!(matches!(load_params(&path, Some(8)), Err(Error::ShapeMismatch { .. })));

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_params(&path, None), Err(Error::CorruptFile { .. })));

        std::fs::write(&path, b"NOTANET!\0\0\0\0").unwrap();
        assert!(matches!(load_params(&path, None), Err(Error::CorruptFile { .. })));
    }

    #[test]
    fn inconsistent_hidden_shape_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let mut arrays = params().to_arrays("");
        arrays[2].1 = Matrix::zeros(20, 4);
        write_arrays(&path, &arrays).unwrap();
        assert!(matches!(load_params(&path, None), Err(Error::ShapeMismatch { .. })));
    }
}
