//! Binary checkpoint files for named tensor sets.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"SGNN"
//! format  u32 (currently 1)
//! count   u64           number of tensors
//! then per tensor:
//!   name_len u64, name bytes (utf-8)
//!   rank     u64, dims u64 × rank
//!   values   f64 × Π dims
//! ```
//!
//! Values are stored as `f64` regardless of the in-memory scalar type.
//! Callers keep hyperparameters and normalization statistics in a JSON
//! sidecar next to the binary file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Scalar, Tensor, TensorError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SGNN";
pub const CHECKPOINT_FORMAT: u32 = 1;

pub fn write_checkpoint<T: Scalar, P: AsRef<Path>>(
    path: P,
    tensors: &[(String, Tensor<T>)],
) -> Result<(), TensorError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_FORMAT.to_le_bytes())?;
    w.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for (name, tensor) in tensors {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u64).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(tensor.shape().len() as u64).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in tensor.values() {
            w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar, P: AsRef<Path>>(
    path: P,
) -> Result<Vec<(String, Tensor<T>)>, TensorError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(TensorError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let format = read_u32(&mut r)?;
    if format != CHECKPOINT_FORMAT {
        return Err(TensorError::Checkpoint(format!(
            "unsupported format {format}, expected {CHECKPOINT_FORMAT}"
        )));
    }
    let count = read_u64(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u64(&mut r)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|e| TensorError::Checkpoint(format!("invalid tensor name: {e}")))?;
        let rank = read_u64(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            let v = f64::from_le_bytes(buf);
            values.push(T::from_f64(v).unwrap());
        }
        tensors.push((name, Tensor::from_vec(&shape, values)?));
    }
    Ok(tensors)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, TensorError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, TensorError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
