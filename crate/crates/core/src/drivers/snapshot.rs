//! Trajectory files: a short text header followed by one record of
//! little-endian `f64` per step.
//!
//! ```text
//! cda-snap v1
//! n_dofs <n> degree <k> components <c> mesh <hex>
//! dt <dt> steps <count>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::SpaceFingerprint;

const MAGIC: &str = "cda-snap v1";

pub struct SnapshotWriter {
    out: BufWriter<File>,
    path: PathBuf,
    n: usize,
    expected: usize,
    written: usize,
}

impl SnapshotWriter {
    /// `records` is the number of states that will be written.
    pub fn create(path: &Path, fp: &SpaceFingerprint, dt: f64, records: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        write!(
            out,
            "{MAGIC}\nn_dofs {} degree {} components {} mesh {:016x}\ndt {:e} steps {}\n",
            fp.n_dofs, fp.degree, fp.components, fp.mesh_hash, dt, records
        )
        .map_err(|e| Error::io(path, e))?;
        Ok(SnapshotWriter {
            out,
            path: path.to_path_buf(),
            n: fp.n_dofs,
            expected: records,
            written: 0,
        })
    }

    pub fn write(&mut self, state: &[f64]) -> Result<()> {
        if state.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: state.len(),
            });
        }
        if self.written == self.expected {
            return Err(Error::Snapshot(format!("more than the declared {} records", self.expected)));
        }
        for v in state {
            self.out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&self.path, e))?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.expected {
            return Err(Error::Snapshot(format!(
                "declared {} records, wrote {}",
                self.expected, self.written
            )));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub struct SnapshotReader {
    input: BufReader<File>,
    path: PathBuf,
    fingerprint: SpaceFingerprint,
    dt: f64,
    records: usize,
    read: usize,
}

fn header_fields<'a>(line: &'a str, keys: &[&str]) -> Result<Vec<&'a str>> {
    let words: Vec<&str> = line.split_whitespace().collect();
    if words.len() != 2 * keys.len() || words.iter().step_by(2).zip(keys).any(|(w, k)| w != k) {
        return Err(Error::Snapshot(format!("malformed header line `{line}`")));
    }
    Ok(words.iter().skip(1).step_by(2).copied().collect())
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Snapshot(format!("bad header value `{s}`")))
}

impl SnapshotReader {
    /// Opens a trajectory and rejects it unless it was written for a space
    /// with fingerprint `expected`.
    pub fn open(path: &Path, expected: &SpaceFingerprint) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let mut lines = Vec::new();
        for _ in 0..3 {
            let mut l = String::new();
            input.read_line(&mut l).map_err(|e| Error::io(path, e))?;
            lines.push(l.trim_end().to_string());
        }
        if lines[0] != MAGIC {
            return Err(Error::Snapshot(format!("not a trajectory file: {}", path.display())));
        }
        let f = header_fields(&lines[1], &["n_dofs", "degree", "components", "mesh"])?;
        let fingerprint = SpaceFingerprint {
            n_dofs: parse(f[0])?,
            degree: parse(f[1])?,
            components: parse(f[2])?,
            mesh_hash: u64::from_str_radix(f[3], 16).map_err(|_| Error::Snapshot("bad mesh hash".into()))?,
        };
        if fingerprint != *expected {
            return Err(Error::Snapshot(format!(
                "space mismatch: file has {fingerprint:?}, run uses {expected:?}"
            )));
        }
        let g = header_fields(&lines[2], &["dt", "steps"])?;
        Ok(SnapshotReader {
            input,
            path: path.to_path_buf(),
            fingerprint,
            dt: parse(g[0])?,
            records: parse(g[1])?,
            read: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn next_state(&mut self) -> Result<Option<Vec<f64>>> {
        if self.read == self.records {
            return Ok(None);
        }
        let mut buf = vec![0u8; 8 * self.fingerprint.n_dofs];
        self.input.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Snapshot(format!("truncated at record {}", self.read))
            } else {
                Error::io(&self.path, e)
            }
        })?;
        self.read += 1;
        Ok(Some(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect(),
        ))
    }

    pub fn read_all(mut self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.records);
        while let Some(s) = self.next_state()? {
            out.push(s);
        }
        Ok(out)
    }
}
