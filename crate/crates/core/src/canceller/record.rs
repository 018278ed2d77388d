//! Sample record files.
//!
//! A record is a text header followed by raw samples:
//!
//! ```text
//! SICREC 1
//! samples=<count>
//! sps=<samples per symbol>
//! scheme=<qpsk|16psk|64psk>
//! seed=<u64>
//! end
//! <count x 16 bytes: re f64 LE, im f64 LE>
//! ```
//!
//! Header lines end with `\n`; the binary payload starts right after the
//! `end\n` line.

use std::path::Path;

use crate::modem::PskScheme;
use crate::{ComplexSample, Error, Result};

const HEADER_MAGIC: &str = "SICREC 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub samples: Vec<ComplexSample>,
    pub sps: usize,
    pub scheme: PskScheme,
    pub seed: u64,
}

impl Record {
    pub fn encode(&self) -> Vec<u8> {
        let header = format!(
            "{HEADER_MAGIC}\nsamples={}\nsps={}\nscheme={}\nseed={}\nend\n",
            self.samples.len(),
            self.sps,
            self.scheme,
            self.seed
        );
        let mut out = header.into_bytes();
        out.reserve(self.samples.len() * 16);
        for s in &self.samples {
            out.extend_from_slice(&s.re.to_le_bytes());
            out.extend_from_slice(&s.im.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Record, String> {
        let mut pos = 0;
        let mut next_line = || -> std::result::Result<&str, String> {
            let rest = &bytes[pos..];
            let end = rest.iter().position(|&b| b == b'\n').ok_or("unterminated header")?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| "header is not UTF-8".to_string())
        };
        if next_line()? != HEADER_MAGIC {
            return Err("bad magic".into());
        }
        let mut field = |key: &str| -> std::result::Result<String, String> {
            let line = next_line()?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| format!("expected {key}=..., found {line:?}"))
        };
        let count: usize = field("samples")?.parse().map_err(|e| format!("samples: {e}"))?;
        let sps: usize = field("sps")?.parse().map_err(|e| format!("sps: {e}"))?;
        let scheme: PskScheme = field("scheme")?.parse().map_err(|e: Error| e.to_string())?;
        let seed: u64 = field("seed")?.parse().map_err(|e| format!("seed: {e}"))?;
        if next_line()? != "end" {
            return Err("missing end of header".into());
        }
        let payload = &bytes[pos..];
        if Some(payload.len()) != count.checked_mul(16) {
            return Err(format!("expected {count} samples, payload holds {} bytes", payload.len()));
        }
        let samples = payload
            .chunks_exact(16)
            .map(|c| {
                ComplexSample::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Record {
            samples,
            sps,
            scheme,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Record> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Record::decode(&bytes).map_err(|reason| Error::CorruptFile {
            path: path.to_path_buf(),
            reason,
        })
    }
}
