//! Flat binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "EANNET1\n"
//! n_layers   u32
//! per layer: in_dim u32, out_dim u32, activation u8
//! per layer: weights (out_dim*in_dim f64, row-major), biases (out_dim f64)
//! ```
//!
//! `save_mlp` additionally writes a JSON sidecar (`<file>.json`) with the
//! layer dims, activations, and parameter count. Loading round-trips bitwise.

use super::{Activation, Layer, Mlp};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 8] = b"EANNET1\n";

/// Sidecar path for a checkpoint: the same filename with `.json` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Serialize a network into any writer.
pub fn write_mlp<W: Write>(w: &mut W, mlp: &Mlp) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(mlp.layers().len() as u32).to_le_bytes())?;
    for layer in mlp.layers() {
        w.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        w.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
        w.write_all(&[layer.activation().code()])?;
    }
    for layer in mlp.layers() {
        for v in layer.weights().iter().chain(layer.biases()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Deserialize a network written by [`write_mlp`].
pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidConfig("bad checkpoint magic".into()));
    }
    let mut u32_buf = [0u8; 4];
    r.read_exact(&mut u32_buf)?;
    let n_layers = u32::from_le_bytes(u32_buf) as usize;
    if n_layers == 0 {
        return Err(Error::InvalidConfig("checkpoint has no layers".into()));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        r.read_exact(&mut u32_buf)?;
        let in_dim = u32::from_le_bytes(u32_buf) as usize;
        r.read_exact(&mut u32_buf)?;
        let out_dim = u32::from_le_bytes(u32_buf) as usize;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        shapes.push((in_dim, out_dim, Activation::from_code(code[0])?));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut f64_buf = [0u8; 8];
    for (in_dim, out_dim, activation) in shapes {
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim * out_dim {
            r.read_exact(&mut f64_buf)?;
            weights.push(f64::from_le_bytes(f64_buf));
        }
        let mut biases = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            r.read_exact(&mut f64_buf)?;
            biases.push(f64::from_le_bytes(f64_buf));
        }
        layers.push(Layer {
            in_dim,
            out_dim,
            weights,
            biases,
            activation,
        });
    }
    Ok(Mlp::from_layers(layers))
}

/// Write a checkpoint file plus its JSON sidecar.
pub fn save_mlp(path: &Path, mlp: &Mlp) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_mlp(&mut file, mlp)?;
    file.flush()?;
    let sidecar = serde_json::json!({
        "format": "ean-mlp-checkpoint-v1",
        "layer_dims": mlp.layer_dims(),
        "activations": mlp.layers().iter().map(|l| l.activation()).collect::<Vec<_>>(),
        "parameter_count": mlp.parameter_count(),
    });
    let mut side = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut side, &sidecar)?;
    side.write_all(b"\n")?;
    side.flush()?;
    Ok(())
}

/// Load a checkpoint written by [`save_mlp`].
pub fn load_mlp(path: &Path) -> Result<Mlp> {
    let mut file = BufReader::new(File::open(path)?);
    read_mlp(&mut file)
}
