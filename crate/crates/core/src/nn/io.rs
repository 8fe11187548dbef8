//! Binary model files.
//!
//! All integers are little-endian `u32`, all reals little-endian `f64`:
//!
//! ```text
//! magic       8 bytes  "RNNCACHE"
//! version     u32      1
//! input_dim   u32
//! n_layers    u32, then n_layers × hidden_dim (u32)
//! n_heads     u32, then n_heads × classes (u32)
//! parameters  f64[]    per layer: w_input, w_recurrent, bias;
//!                      per head: weights, bias (row-major)
//! accumulators f64[]   RMSProp state, same order and sizes
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{ModelShape, Parameters, RnnModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"RNNCACHE";
pub const MODEL_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::ModelFormat(format!("dimension {v} too large")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn write_model(model: &RnnModel, mut out: impl Write) -> Result<()> {
    let shape = model.shape();
    let mut buf = Vec::with_capacity(32 + 16 * model.params.num_scalars());
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    put_u32(&mut buf, shape.input_dim)?;
    put_u32(&mut buf, shape.hidden.len())?;
    for &h in &shape.hidden {
        put_u32(&mut buf, h)?;
    }
    put_u32(&mut buf, shape.heads.len())?;
    for &c in &shape.heads {
        put_u32(&mut buf, c)?;
    }
    for t in model.params.tensors().into_iter().chain(model.accumulators.tensors()) {
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)
        .map_err(|e| Error::ModelFormat(format!("write failed: {e}")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::ModelFormat("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn fill(&mut self, dst: &mut [f64]) -> Result<()> {
        let b = self.take(dst.len() * 8)?;
        for (v, chunk) in dst.iter_mut().zip(b.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        Ok(())
    }
}

const MAX_DIM: usize = 1 << 16;

pub fn read_model(mut input: impl Read) -> Result<RnnModel> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::ModelFormat(format!("read failed: {e}")))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8)? != MODEL_MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != MODEL_VERSION as usize {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let input_dim = cur.u32()?;
    let read_dims = |cur: &mut Cursor| -> Result<Vec<usize>> {
        let n = cur.u32()?;
        if n > MAX_DIM {
            return Err(Error::ModelFormat(format!("implausible count {n}")));
        }
        (0..n)
            .map(|_| {
                let d = cur.u32()?;
                if d > MAX_DIM {
                    Err(Error::ModelFormat(format!("implausible dimension {d}")))
                } else {
                    Ok(d)
                }
            })
            .collect()
    };
    let hidden = read_dims(&mut cur)?;
    let heads = read_dims(&mut cur)?;
    if input_dim > MAX_DIM {
        return Err(Error::ModelFormat(format!("implausible input width {input_dim}")));
    }
    let shape = ModelShape::new(input_dim, hidden, heads)
        .map_err(|e| Error::ModelFormat(e.to_string()))?;

    let mut params = Parameters::zeros(&shape);
    let mut accumulators = Parameters::zeros(&shape);
    for t in params.tensors_mut().into_iter().chain(accumulators.tensors_mut()) {
        cur.fill(t)?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::ModelFormat("trailing bytes".into()));
    }
    Ok(RnnModel {
        params,
        accumulators,
    })
}

pub fn save_model(model: &RnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RnnModel> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{rmsprop_step, TrainConfig};

    #[test]
    fn round_trip_with_optimizer_state() {
        let shape = ModelShape::new(6, vec![5, 4], vec![2, 3]).unwrap();
        let mut m = RnnModel::new(&shape, 21);
        let mut g = m.params.zeros_like();
        g.tensors_mut().into_iter().for_each(|t| t.fill(0.5));
        rmsprop_step(&mut m, &g, &TrainConfig::default());

        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(&buf[..8], MODEL_MAGIC);
        let header = 8 + 4 * (1 + 1 + 1 + 2 + 1 + 2);
        assert_eq!(buf.len(), header + 16 * m.params.num_scalars());
        assert_eq!(read_model(&buf[..]).unwrap(), m);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn corrupt_files_rejected() {
        let m = RnnModel::zeros(&ModelShape::new(2, vec![2], vec![2]).unwrap());
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert!(read_model(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_model(&extra[..]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_model(&bad[..]).is_err());
        let mut future = buf;
        future[8] = 2;
        assert!(read_model(&future[..]).unwrap_err().to_string().contains("version"));
    }
}
