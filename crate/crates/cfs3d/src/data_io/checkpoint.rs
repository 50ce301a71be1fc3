//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "CFS3DCKP" | version u16 | config_len u32 | config utf-8 bytes
//! | param_count u32
//! | per parameter: name_len u16, name bytes, rank u8, dims u32 x rank,
//!                  values f64 x prod(dims)
//! | step u64
//! | moments flag u8, then per parameter m then v (f64 x prod(dims) each)
//! ```
//!
//! Values are stored as raw 64-bit floats, so a save/load round-trip is
//! bitwise exact.

use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use std::path::Path;

const MAGIC: &[u8; 8] = b"CFS3DCKP";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// The full run configuration, verbatim key=value text.
    pub config_text: String,
    /// Named parameters in canonical model order.
    pub params: Vec<(String, Tensor)>,
    pub step: u64,
    /// Optimizer first/second moments per parameter, in `params` order.
    pub moments: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(m) = &ckpt.moments {
        if m.len() != ckpt.params.len() {
            return Err(Error::Dimension(format!(
                "{} moment pairs for {} parameters",
                m.len(),
                ckpt.params.len()
            )));
        }
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ckpt.config_text.len() as u32).to_le_bytes());
    buf.extend_from_slice(ckpt.config_text.as_bytes());
    buf.extend_from_slice(&(ckpt.params.len() as u32).to_le_bytes());
    for (name, tensor) in &ckpt.params {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        push_f64s(&mut buf, tensor.values());
    }
    buf.extend_from_slice(&ckpt.step.to_le_bytes());
    match &ckpt.moments {
        None => buf.push(0),
        Some(moments) => {
            buf.push(1);
            for ((name, tensor), (m, v)) in ckpt.params.iter().zip(moments) {
                if m.len() != tensor.len() || v.len() != tensor.len() {
                    return Err(Error::Dimension(format!(
                        "moments for {name:?} have {} / {} values, parameter has {}",
                        m.len(),
                        v.len(),
                        tensor.len()
                    )));
                }
                push_f64s(&mut buf, m);
                push_f64s(&mut buf, v);
            }
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, count: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + count > self.bytes.len() {
            return Err(Error::format(
                self.path,
                format!(
                    "truncated: needed {count} bytes for {what} at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + count];
        self.pos += count;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(count * 8, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };

    if r.take(8, "magic")? != MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic bytes)".to_string()));
    }
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!("checkpoint version {version} not supported (reader supports {CHECKPOINT_VERSION})"),
        ));
    }
    let config_len = r.u32("config length")? as usize;
    let config_text = String::from_utf8(r.take(config_len, "config text")?.to_vec())
        .map_err(|e| Error::format(path, format!("config text not utf-8: {e}")))?;

    let param_count = r.u32("parameter count")? as usize;
    let mut params = Vec::with_capacity(param_count);
    for i in 0..param_count {
        let name_len = r.u16("name length")? as usize;
        let name = String::from_utf8(r.take(name_len, "parameter name")?.to_vec())
            .map_err(|e| Error::format(path, format!("parameter {i} name not utf-8: {e}")))?;
        let rank = r.u8("rank")? as usize;
        if rank > 2 {
            return Err(Error::format(path, format!("parameter {name:?} has rank {rank} > 2")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let len: usize = shape.iter().product();
        let values = r.f64s(len, "parameter values")?;
        params.push((
            name,
            Tensor::new(shape, values).map_err(|e| Error::format(path, e.to_string()))?,
        ));
    }
    let step = r.u64("step")?;
    let moments = match r.u8("moments flag")? {
        0 => None,
        1 => {
            let mut moments = Vec::with_capacity(param_count);
            for (name, tensor) in &params {
                let m = r.f64s(tensor.len(), "first moment")?;
                let v = r.f64s(tensor.len(), "second moment")?;
                let _ = name;
                moments.push((m, v));
            }
            Some(moments)
        }
        other => {
            return Err(Error::format(path, format!("moments flag must be 0 or 1, got {other}")));
        }
    };
    if r.pos != bytes.len() {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after checkpoint data", bytes.len() - r.pos),
        ));
    }
    Ok(Checkpoint { config_text, params, step, moments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            config_text: "l_p=32\nvariant=3dcfs\n".to_string(),
            params: vec![
                ("enc0.w".into(), Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 1.5e-300, -0.0, 7.0]).unwrap()),
                ("enc0.b".into(), Tensor::vector(vec![0.25, f64::MIN_POSITIVE, 3.75])),
            ],
            step: 12345,
            moments: Some(vec![
                (vec![0.0; 6], vec![1e-9; 6]),
                (vec![0.5; 3], vec![0.25; 3]),
            ]),
        }
    }

    #[test]
    fn round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = sample();
        save_checkpoint(&ckpt, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);

        let without_moments = Checkpoint { moments: None, ..ckpt };
        save_checkpoint(&without_moments, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), without_moments);
    }

    #[test]
    fn file_size_matches_the_layout_accounting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = sample();
        save_checkpoint(&ckpt, &path).unwrap();
        let len = std::fs::metadata(&path).unwrap().len() as usize;
        let value_count: usize = ckpt.params.iter().map(|(_, t)| t.len()).sum();
        let header = 8 + 2 + 4 + ckpt.config_text.len() + 4;
        let per_param: usize = ckpt
            .params
            .iter()
            .map(|(n, t)| 2 + n.len() + 1 + 4 * t.shape().len())
            .sum();
        let expected = header + per_param + 8 * value_count + 8 + 1 + 16 * value_count;
        assert_eq!(len, expected);
    }

    #[test]
    fn unsupported_version_is_named_in_the_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("future.ckpt");
        save_checkpoint(&sample(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 2; // version low byte
        std::fs::write(&path, bytes).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Format { msg, .. }) => assert!(msg.contains("version 2")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.ckpt");
        save_checkpoint(&sample(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Format { msg, .. }) => assert!(msg.contains("truncated")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_trailing_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        save_checkpoint(&sample(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));

        bytes[0] = b'C';
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Format { msg, .. }) => assert!(msg.contains("trailing")),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
