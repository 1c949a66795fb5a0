//! Versioned parameter archive.
//!
//! Layout (all integers little-endian):
//!   magic "MCHN", format version u32,
//!   element precision u8 (32 | 64), vocabulary hash u64,
//!   config JSON (u32 length + bytes),
//!   array count u32, then per array:
//!     name (u16 length + UTF-8), ndim u8, dims (u32 each), raw LE values.
//!
//! Round-trips are bit-exact.

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::DenseArray;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MCHN";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ArchiveHeader {
    pub version: u32,
    pub precision_bits: u8,
    pub vocab_hash: u64,
    pub config: ModelConfig,
}

pub fn write_params<F: Real>(
    path: &Path,
    cfg: &ModelConfig,
    params: &ModelParams<F>,
    vocab_hash: u64,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&[F::BITS])?;
    out.write_all(&vocab_hash.to_le_bytes())?;
    let cfg_json = serde_json::to_vec(cfg)?;
    out.write_all(&(cfg_json.len() as u32).to_le_bytes())?;
    out.write_all(&cfg_json)?;

    let named = params.named();
    out.write_all(&(named.len() as u32).to_le_bytes())?;
    for (name, arr) in named {
        let name_bytes = name.as_bytes();
        out.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        out.write_all(name_bytes)?;
        out.write_all(&[arr.shape().len() as u8])?;
        for &d in arr.shape() {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in arr.iter() {
            out.write_all(&v.to_le_bytes_vec())?;
        }
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.bytes(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.bytes(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(&b);
        Ok(u64::from_le_bytes(a))
    }
}

fn read_header_from<R: Read>(cur: &mut Cursor<R>) -> Result<ArchiveHeader> {
    let magic = cur.bytes(4)?;
    if magic != MAGIC {
        return Err(Error::Incompatible("not a parameter archive (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "archive format version {version}, this build reads {FORMAT_VERSION}"
        )));
    }
    let precision_bits = cur.u8()?;
    if precision_bits != 32 && precision_bits != 64 {
        return Err(Error::Incompatible(format!("unknown element precision {precision_bits}")));
    }
    let vocab_hash = cur.u64()?;
    let cfg_len = cur.u32()? as usize;
    let cfg_bytes = cur.bytes(cfg_len)?;
    let config: ModelConfig = serde_json::from_slice(&cfg_bytes)?;
    Ok(ArchiveHeader { version, precision_bits, vocab_hash, config })
}

/// Header only, e.g. to learn a checkpoint's precision before choosing the
/// instantiation to load it with.
pub fn read_header(path: &Path) -> Result<ArchiveHeader> {
    let mut cur = Cursor { inner: std::io::BufReader::new(std::fs::File::open(path)?) };
    read_header_from(&mut cur)
}

pub fn read_params<F: Real>(path: &Path) -> Result<(ArchiveHeader, ModelParams<F>)> {
    let mut cur = Cursor { inner: std::io::BufReader::new(std::fs::File::open(path)?) };
    let header = read_header_from(&mut cur)?;
    if header.precision_bits != F::BITS {
        return Err(Error::Incompatible(format!(
            "archive stores {}-bit values, loader instantiated at {}-bit",
            header.precision_bits,
            F::BITS
        )));
    }
    header.config.validate()?;
    let n_arrays = cur.u32()? as usize;
    let elem_bytes = (F::BITS / 8) as usize;

    let mut params = ModelParams::zeros(&header.config);
    let mut expected: std::collections::BTreeMap<String, &mut DenseArray<F>> =
        params.named_mut().into_iter().collect();
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..n_arrays {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.bytes(name_len)?)
            .map_err(|_| Error::Incompatible("array name is not UTF-8".into()))?;
        let ndim = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cur.u32()? as usize);
        }
        let count: usize = shape.iter().product();
        let raw = cur.bytes(count * elem_bytes)?;
        let data: Vec<F> =
            raw.chunks_exact(elem_bytes).map(F::from_le_slice).collect();
        let slot = expected.get_mut(&name).ok_or_else(|| {
            Error::Incompatible(format!("archive carries unknown array {name:?}"))
        })?;
        if slot.shape() != shape.as_slice() {
            return Err(Error::Incompatible(format!(
                "array {name:?} has shape {shape:?}, config wants {:?}",
                slot.shape()
            )));
        }
        **slot = DenseArray::new(shape, data)?;
        seen.insert(name);
    }
    if seen.len() != expected.len() {
        let missing: Vec<&String> =
            expected.keys().filter(|k| !seen.contains(*k)).collect();
        return Err(Error::Incompatible(format!("archive is missing arrays {missing:?}")));
    }
    drop(expected);
    Ok((header, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn roundtrip_params<F: Real>(seed: u64) -> (ModelConfig, ModelParams<F>) {
        let cfg = super::super::ModelConfig::small(6, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tied: Vec<Vec<F>> = vec![[0.5, -0.25, 1.0, 0.0, 0.125, 2.0]
            .iter()
            .map(|&x| F::from_f64(x))
            .collect()];
        let params = init_params::<F>(&cfg, &tied, &mut rng).unwrap();
        (cfg, params)
    }

    #[test]
    fn round_trip_is_bit_exact_f64() {
        let (cfg, params) = roundtrip_params::<f64>(1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        write_params(&path, &cfg, &params, 0xdeadbeef).unwrap();
        let (header, back) = read_params::<f64>(&path).unwrap();
        assert_eq!(header.vocab_hash, 0xdeadbeef);
        assert_eq!(header.precision_bits, 64);
        for ((an, a), (bn, b)) in params.named().iter().zip(back.named().iter()) {
            assert_eq!(an, bn);
            let abits: Vec<u64> = a.iter().map(|x| x.to_bits()).collect();
            let bbits: Vec<u64> = b.iter().map(|x| x.to_bits()).collect();
            assert_eq!(abits, bbits, "array {an}");
        }
    }

    #[test]
    fn round_trip_is_bit_exact_f32() {
        let (cfg, params) = roundtrip_params::<f32>(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        write_params(&path, &cfg, &params, 7).unwrap();
        let (header, back) = read_params::<f32>(&path).unwrap();
        assert_eq!(header.precision_bits, 32);
        for ((_, a), (_, b)) in params.named().iter().zip(back.named().iter()) {
            let abits: Vec<u32> = a.iter().map(|x| x.to_bits()).collect();
            let bbits: Vec<u32> = b.iter().map(|x| x.to_bits()).collect();
            assert_eq!(abits, bbits);
        }
    }

    #[test]
    fn precision_mismatch_is_incompatible() {
        let (cfg, params) = roundtrip_params::<f32>(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        write_params(&path, &cfg, &params, 7).unwrap();
        assert!(matches!(read_params::<f64>(&path), Err(Error::Incompatible(_))));
        // but the header reads fine either way
        assert_eq!(read_header(&path).unwrap().precision_bits, 32);
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not an archive at all").unwrap();
        assert!(matches!(read_header(&path), Err(Error::Incompatible(_))));
    }
}
