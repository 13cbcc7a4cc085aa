//! LIF feature files: a fixed 24-byte header followed by the layer-major
//! f32 payload of one stack.
//!
//! Layout (all integers little-endian):
//!   bytes 0..4   magic "LIF1"
//!   bytes 4..8   version u32 = 1
//!   bytes 8..12  L
//!   bytes 12..16 T
//!   bytes 16..20 D
//!   bytes 20..24 dtype u32 = 1 (f32)
//!   bytes 24..   L*T*D f32 values, layer-major (l outer, t middle, d inner)

use crate::error::{Error, Result};
use crate::interface::LayerStack;
use crate::numerics::Tensor;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"LIF1";
const VERSION: u32 = 1;
const DTYPE_F32: u32 = 1;

/// Serialize a stack, narrowing values to f32.
pub fn write_lif(stack: &LayerStack, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(stack.num_layers() as u32).to_le_bytes())?;
    w.write_all(&(stack.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(stack.dim() as u32).to_le_bytes())?;
    w.write_all(&DTYPE_F32.to_le_bytes())?;
    for &v in stack.values().data() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a stack back, widening the payload to f64.
pub fn read_lif(path: &Path) -> Result<LayerStack> {
    let file_len = std::fs::metadata(path)?.len();
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header_from(&mut r, path)?;
    // validate the declared size against the file before allocating
    let count64 = (header.num_layers as u64)
        .checked_mul(header.num_frames as u64)
        .and_then(|v| v.checked_mul(header.dim as u64))
        .ok_or_else(|| Error::Format(format!("{}: header extents overflow", path.display())))?;
    let expected_len = 24 + count64.checked_mul(4).ok_or_else(|| {
        Error::Format(format!("{}: header extents overflow", path.display()))
    })?;
    if file_len < expected_len {
        return Err(Error::Format(format!(
            "{}: truncated payload, wanted {count64} f32 values",
            path.display()
        )));
    }
    if file_len > expected_len {
        return Err(Error::Format(format!(
            "{}: trailing bytes after {count64} payload values",
            path.display()
        )));
    }
    let count = count64 as usize;
    let mut payload = vec![0u8; count * 4];
    r.read_exact(&mut payload).map_err(|_| {
        Error::Format(format!(
            "{}: truncated payload, wanted {count} f32 values",
            path.display()
        ))
    })?;
    let mut data = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(Error::Format(format!(
                "{}: non-finite value in payload",
                path.display()
            )));
        }
        data.push(f64::from(v));
    }
    let tensor = Tensor::new(
        vec![header.num_layers, header.num_frames, header.dim],
        data,
    )?;
    LayerStack::new(tensor)
}

/// Header fields of a LIF file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifHeader {
    pub num_layers: usize,
    pub num_frames: usize,
    pub dim: usize,
}

/// Read and validate just the header (cheap manifest-consistency checks).
pub fn read_lif_header(path: &Path) -> Result<LifHeader> {
    let mut r = BufReader::new(File::open(path)?);
    read_header_from(&mut r, path)
}

fn read_header_from(r: &mut impl Read, path: &Path) -> Result<LifHeader> {
    let mut head = [0u8; 24];
    r.read_exact(&mut head)
        .map_err(|_| Error::Format(format!("{}: file shorter than the header", path.display())))?;
    if &head[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}",
            path.display(),
            &head[0..4]
        )));
    }
    let field = |i: usize| u32::from_le_bytes([head[i], head[i + 1], head[i + 2], head[i + 3]]);
    if field(4) != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {}",
            path.display(),
            field(4)
        )));
    }
    if field(20) != DTYPE_F32 {
        return Err(Error::Format(format!(
            "{}: unsupported dtype {}",
            path.display(),
            field(20)
        )));
    }
    let (l, t, d) = (field(8) as usize, field(12) as usize, field(16) as usize);
    if l == 0 || t == 0 || d == 0 {
        return Err(Error::Format(format!(
            "{}: zero extent in header ({l}, {t}, {d})",
            path.display()
        )));
    }
    Ok(LifHeader {
        num_layers: l,
        num_frames: t,
        dim: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Prng;

    #[test]
    fn round_trip_is_bit_exact_at_f32() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Prng::new(77);
        let stack = LayerStack::random_normal(&mut rng, 3, 4, 5);
        let a = dir.path().join("a.lif");
        let b = dir.path().join("b.lif");
        write_lif(&stack, &a).unwrap();
        let loaded = read_lif(&a).unwrap();
        // widened values equal the f32-narrowed originals exactly
        for (orig, got) in stack.values().data().iter().zip(loaded.values().data()) {
            assert_eq!(f64::from(*orig as f32).to_bits(), got.to_bits());
        }
        // a second write reproduces identical bytes
        write_lif(&loaded, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.lif");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"XXXX");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&0f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_lif(&path), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.lif");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes()); // L=2
        bytes.extend_from_slice(&3u32.to_le_bytes()); // T=3
        bytes.extend_from_slice(&4u32.to_le_bytes()); // D=4
        bytes.extend_from_slice(&1u32.to_le_bytes());
        for _ in 0..23 {
            bytes.extend_from_slice(&1.5f32.to_le_bytes()); // 23 of 24 values
        }
        std::fs::write(&path, bytes).unwrap();
        let err = read_lif(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Prng::new(1);
        let stack = LayerStack::random_normal(&mut rng, 1, 1, 2);
        let path = dir.path().join("extra.lif");
        write_lif(&stack, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_lif(&path), Err(Error::Format(_))));
    }

    #[test]
    fn wrong_version_and_dtype_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Prng::new(2);
        let stack = LayerStack::random_normal(&mut rng, 1, 1, 1);
        let path = dir.path().join("v.lif");
        write_lif(&stack, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_lif(&path), Err(Error::Format(_))));
        bytes[4] = 1;
        bytes[20] = 7;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_lif(&path), Err(Error::Format(_))));
    }
}
