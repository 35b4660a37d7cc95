//! Raster field files.
//!
//! ```text
//! FIELD2D
//! <nx> <ny> <kind> <ascii|binary-le>
//! <payload>
//! ```
//!
//! The payload holds `nx·ny` values, x fastest, rows from the bottom (y = 0)
//! upward. ASCII payloads are whitespace separated; binary payloads are
//! little-endian `f64` directly after the header's newline.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &str = "FIELD2D";

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    Ascii,
    BinaryLe,
}

impl Encoding {
    fn tag(self) -> &'static str {
        match self {
            Encoding::Ascii => "ascii",
            Encoding::BinaryLe => "binary-le",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub nx: usize,
    pub ny: usize,
    /// Free-form label such as `kappa` or `pressure` (no whitespace).
    pub kind: String,
    pub values: Vec<f64>,
}

impl FieldFile {
    pub fn new(nx: usize, ny: usize, kind: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::Internal(format!(
                "field {kind}: {} values for a {nx}×{ny} raster",
                values.len()
            )));
        }
        if kind.is_empty() || kind.chars().any(char::is_whitespace) {
            return Err(Error::Internal(format!("invalid field kind {kind:?}")));
        }
        Ok(FieldFile {
            nx,
            ny,
            kind: kind.to_string(),
            values,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn to_bytes(&self, encoding: Encoding) -> Vec<u8> {
        let mut out = format!(
            "{MAGIC}\n{} {} {} {}\n",
            self.nx,
            self.ny,
            self.kind,
            encoding.tag()
        )
        .into_bytes();
        match encoding {
            Encoding::Ascii => {
                for row in self.values.chunks(self.nx.max(1)) {
                    let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                    out.extend_from_slice(line.join(" ").as_bytes());
                    out.push(b'\n');
                }
            }
            Encoding::BinaryLe => {
                for v in &self.values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = bytes.splitn(3, |&b| b == b'\n');
        let magic = lines.next().unwrap_or_default();
        if std::str::from_utf8(magic).map(str::trim) != Ok(MAGIC) {
            return Err(bad(format!("missing {MAGIC} magic line")));
        }
        let header = lines
            .next()
            .and_then(|h| std::str::from_utf8(h).ok())
            .ok_or_else(|| bad("missing header line".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [nx, ny, kind, enc] = fields[..] else {
            return Err(bad(format!(
                "header {header:?} must read `nx ny kind encoding`"
            )));
        };
        let nx: usize = nx.parse().map_err(|_| bad(format!("bad nx {nx:?}")))?;
        let ny: usize = ny.parse().map_err(|_| bad(format!("bad ny {ny:?}")))?;
        if nx == 0 || ny == 0 {
            return Err(bad("empty raster".into()));
        }
        let payload = lines.next().unwrap_or_default();
        let count = nx * ny;
        let values: Vec<f64> = match enc {
            "ascii" => {
                let text = std::str::from_utf8(payload)
                    .map_err(|_| bad("ascii payload is not UTF-8".into()))?;
                text.split_whitespace()
                    .enumerate()
                    .map(|(k, t)| {
                        t.parse::<f64>()
                            .map_err(|_| bad(format!("value {k} ({t:?}) is not a number")))
                    })
                    .collect::<Result<_>>()?
            }
            "binary-le" => {
                if payload.len() != 8 * count {
                    return Err(bad(format!(
                        "binary payload has {} bytes, expected {}",
                        payload.len(),
                        8 * count
                    )));
                }
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            }
            other => return Err(bad(format!("unknown encoding {other:?}"))),
        };
        if values.len() != count {
            return Err(bad(format!(
                "{} values, header announces {count}",
                values.len()
            )));
        }
        Ok(FieldFile {
            nx,
            ny,
            kind: kind.to_string(),
            values,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, path)
    }

    pub fn write(&self, path: &Path, encoding: Encoding) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes(encoding))
            .map_err(|e| Error::io(path, e))
    }

    /// Nearest-cell resampling onto an `n × n` raster of the unit square.
    pub fn resample(&self, n: usize) -> Vec<f64> {
        let pick =
            |k: usize, m: usize| (((k as f64 + 0.5) * m as f64 / n as f64) as usize).min(m - 1);
        (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| self.at(pick(i, self.nx), pick(j, self.ny)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_encodings() {
        let f = FieldFile::new(3, 2, "kappa", vec![1.0, 2.5, 1e-4, 7.0, 0.125, 3.0]).unwrap();
        for enc in [Encoding::Ascii, Encoding::BinaryLe] {
            let back = FieldFile::parse(&f.to_bytes(enc), Path::new("mem")).unwrap();
            assert_eq!(back, f);
        }
    }

    #[test]
    fn upsampling_replicates_cells() {
        let f = FieldFile::new(2, 2, "k", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = f.resample(4);
        assert_eq!(&r[0..4], &[1.0, 1.0, 2.0, 2.0]);
        assert_eq!(&r[12..16], &[3.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn malformed_headers_are_format_errors() {
        for bytes in [
            &b"FIELD\n1 1 k ascii\n1"[..],
            b"FIELD2D\n1 k ascii\n1",
            b"FIELD2D\n2 1 k ascii\n1",
        ] {
            let e = FieldFile::parse(bytes, Path::new("x")).unwrap_err();
            assert_eq!(e.exit_code(), 3, "{e}");
        }
    }
}
