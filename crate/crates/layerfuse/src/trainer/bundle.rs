//! LIM model bundles: magic "LIM1", u32 version, a length-prefixed JSON
//! config blob, then every parameter tensor as little-endian f64 in
//! declaration order (interface trainables, PCA buffers when fitted, head
//! tensors).

use crate::error::{Error, Result};
use crate::heads::{HeadParams, HeadSpec};
use crate::interface::{InterfaceParams, InterfaceSpec, PcaBuffers};
use crate::numerics::{Prng, Tensor};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"LIM1";
const VERSION: u32 = 1;

/// A trained interface + head pair.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub interface: InterfaceParams,
    pub head: HeadParams,
}

#[derive(Serialize, Deserialize)]
struct BundleConfig {
    interface: InterfaceSpec,
    num_layers: usize,
    dim: usize,
    head: HeadSpec,
    pca_fitted: bool,
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let config = BundleConfig {
        interface: bundle.interface.spec().clone(),
        num_layers: bundle.interface.num_layers(),
        dim: bundle.interface.dim(),
        head: bundle.head.spec().clone(),
        pca_fitted: bundle.interface.pca_buffers().is_some(),
    };
    let blob = serde_json::to_vec(&config).map_err(|e| Error::Data(e.to_string()))?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(blob.len() as u32).to_le_bytes())?;
    w.write_all(&blob)?;
    for (_, tensor) in bundle.interface.trainable() {
        write_tensor(&mut w, tensor)?;
    }
    if let Some(buffers) = bundle.interface.pca_buffers() {
        write_tensor(&mut w, buffers.mean())?;
        write_tensor(&mut w, buffers.basis())?;
        write_tensor(&mut w, buffers.eigenvalues())?;
    }
    for (_, tensor) in bundle.head.trainable() {
        write_tensor(&mut w, tensor)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut head4 = [0u8; 4];
    r.read_exact(&mut head4)
        .map_err(|_| Error::Format(format!("{}: shorter than the header", path.display())))?;
    if &head4 != MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {head4:?}",
            path.display()
        )));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    r.read_exact(&mut word)?;
    let blob_len = u32::from_le_bytes(word) as usize;
    let mut blob = vec![0u8; blob_len];
    r.read_exact(&mut blob)
        .map_err(|_| Error::Format(format!("{}: truncated config blob", path.display())))?;
    let config: BundleConfig =
        serde_json::from_slice(&blob).map_err(|e| Error::Format(e.to_string()))?;

    // tensors are read positionally over freshly shaped parameters
    let mut throwaway = Prng::new(0);
    let mut interface = InterfaceParams::init(
        config.interface.clone(),
        config.num_layers,
        config.dim,
        &mut throwaway,
    )?;
    for (_, tensor) in interface.trainable_mut() {
        read_tensor_into(&mut r, tensor, path)?;
    }
    if config.pca_fitted {
        let k = config
            .interface
            .pca_components(config.num_layers, config.dim);
        let mut mean = Tensor::zeros(&[config.num_layers, config.dim]);
        let mut basis = Tensor::zeros(&[config.num_layers, config.dim, k]);
        let mut eigenvalues = Tensor::zeros(&[config.num_layers, config.dim]);
        read_tensor_into(&mut r, &mut mean, path)?;
        read_tensor_into(&mut r, &mut basis, path)?;
        read_tensor_into(&mut r, &mut eigenvalues, path)?;
        interface.set_pca_buffers(PcaBuffers::new(mean, basis, eigenvalues)?)?;
    }
    let mut head = HeadParams::init(config.head, &mut throwaway)?;
    for (_, tensor) in head.trainable_mut() {
        read_tensor_into(&mut r, tensor, path)?;
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(format!(
            "{}: trailing bytes after the last tensor",
            path.display()
        )));
    }
    Ok(ModelBundle { interface, head })
}

fn write_tensor(w: &mut impl Write, tensor: &Tensor) -> Result<()> {
    for &v in tensor.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_tensor_into(r: &mut impl Read, tensor: &mut Tensor, path: &Path) -> Result<()> {
    let mut buf = vec![0u8; tensor.numel() * 8];
    r.read_exact(&mut buf).map_err(|_| {
        Error::Format(format!(
            "{}: truncated tensor payload ({} values wanted)",
            path.display(),
            tensor.numel()
        ))
    })?;
    for (slot, chunk) in tensor.data_mut().iter_mut().zip(buf.chunks_exact(8)) {
        *slot = f64::from_le_bytes([
            chunk[0], chunk[1], chunk[2], chunk[3], chunk[4], chunk[5], chunk[6], chunk[7],
        ]);
    }
    Ok(())
}
