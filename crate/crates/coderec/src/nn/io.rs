//! Versioned binary weight files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//!     magic "CRNN" | u32 version | architecture | arrays | manifest
//! ```
//!
//! The architecture block encodes [`ModelConfig`] field by field; the array
//! block holds every persistent array (parameters and batch-norm running
//! statistics) as `u32 length + f32 values` in network declaration order;
//! the manifest records the training seed, the digest of the dataset the
//! weights were fitted to, and a human-readable shape listing.

use std::fs;
use std::path::Path;

use super::layers::Activation;
use super::{ConvBlockConfig, ModelConfig, Network};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CRNN";
const VERSION: u32 = 1;

/// Provenance stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightManifest {
    /// Seed the training run was launched with.
    pub training_seed: u64,
    /// Digest of the dataset the network was trained on.
    pub dataset_digest: String,
    /// One `name: length` line per stored array.
    pub layer_shapes: String,
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_text(out: &mut Vec<u8>, text: &str) {
    push_u32(out, text.len() as u32);
    out.extend_from_slice(text.as_bytes());
}

fn encode_config(out: &mut Vec<u8>, config: &ModelConfig) {
    push_u32(out, config.input_side as u32);
    push_u32(out, config.input_channels as u32);
    push_u32(out, config.conv.len() as u32);
    for block in &config.conv {
        push_u32(out, block.kernel as u32);
        push_u32(out, block.channels as u32);
        push_u32(out, block.pool as u32);
    }
    push_u32(out, config.dense.len() as u32);
    for &width in &config.dense {
        push_u32(out, width as u32);
    }
    push_f64(out, config.dropout);
    out.push(match config.activation {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    });
}

/// Writes `net` with its provenance to `path`.
pub fn save_network(
    path: &Path,
    net: &Network<f32>,
    training_seed: u64,
    dataset_digest: &str,
) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, VERSION);
    encode_config(&mut out, net.config());

    let arrays = net.state_arrays();
    push_u32(&mut out, arrays.len() as u32);
    for array in &arrays {
        push_u32(&mut out, array.len() as u32);
        for &v in array.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    push_u64(&mut out, training_seed);
    push_text(&mut out, dataset_digest);
    let shapes: String = net
        .state_names()
        .iter()
        .zip(&arrays)
        .map(|(name, array)| format!("{name}: {}\n", array.len()))
        .collect();
    push_text(&mut out, &shapes);

    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// Byte cursor that reports the offset of the first malformed field.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::format(format!(
                "weight file truncated at byte {} (needed {len} more)",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn text(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::format("weight file manifest is not valid UTF-8"))
    }
}

fn decode_config(r: &mut Reader<'_>) -> Result<ModelConfig> {
    let input_side = r.u32()? as usize;
    let input_channels = r.u32()? as usize;
    let conv_count = r.u32()? as usize;
    if conv_count > 1024 {
        return Err(Error::format(format!("implausible conv block count {conv_count}")));
    }
    let mut conv = Vec::with_capacity(conv_count);
    for _ in 0..conv_count {
        conv.push(ConvBlockConfig {
            kernel: r.u32()? as usize,
            channels: r.u32()? as usize,
            pool: r.u32()? as usize,
        });
    }
    let dense_count = r.u32()? as usize;
    if dense_count > 1024 {
        return Err(Error::format(format!("implausible dense layer count {dense_count}")));
    }
    let mut dense = Vec::with_capacity(dense_count);
    for _ in 0..dense_count {
        dense.push(r.u32()? as usize);
    }
    let dropout = r.f64()?;
    let activation = match r.u8()? {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        other => {
            return Err(Error::format(format!("unknown activation code {other} in weight file")))
        }
    };
    Ok(ModelConfig { input_side, input_channels, conv, dense, dropout, activation })
}

/// Reads a weight file back into a ready-to-run network.
pub fn load_network(path: &Path) -> Result<(Network<f32>, WeightManifest)> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };

    if r.take(4)? != MAGIC {
        return Err(Error::format("weight file magic is not \"CRNN\""));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "weight file version {version} is not supported (expected {VERSION})"
        )));
    }
    let config = decode_config(&mut r)?;
    config
        .validate()
        .map_err(|e| Error::format(format!("weight file architecture is invalid: {e}")))?;

    let array_count = r.u32()? as usize;
    let mut state: Vec<Vec<f32>> = Vec::with_capacity(array_count.min(4096));
    for _ in 0..array_count {
        let len = r.u32()? as usize;
        let raw = r.take(len * 4)?;
        let mut array = Vec::with_capacity(len);
        for chunk in raw.chunks_exact(4) {
            array.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        state.push(array);
    }

    let training_seed = r.u64()?;
    let dataset_digest = r.text()?;
    let layer_shapes = r.text()?;
    if r.pos != bytes.len() {
        return Err(Error::format(format!(
            "weight file has {} trailing bytes after the manifest",
            bytes.len() - r.pos
        )));
    }

    let mut net = Network::<f32>::new(&config, 0)?;
    net.import_state(&state)
        .map_err(|e| Error::format(format!("weight arrays do not match the architecture: {e}")))?;
    Ok((net, WeightManifest { training_seed, dataset_digest, layer_shapes }))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::super::layers::Mode;
    use super::super::ConvBlockConfig;
    use super::*;
    use crate::rng;

    fn sample_net() -> Network<f32> {
        let config = ModelConfig {
            input_side: 5,
            input_channels: 2,
            conv: vec![ConvBlockConfig { kernel: 2, channels: 3, pool: 2 }],
            dense: vec![6, 3],
            dropout: 0.25,
            activation: Activation::Tanh,
        };
        let mut net = Network::<f32>::new(&config, 9).unwrap();
        // Push one training batch through so the running statistics move off
        // their initial values and the round trip exercises them.
        let x: Vec<f32> = (0..2 * config.input_len()).map(|i| (i as f32) * 0.07 - 1.0).collect();
        let mut rng = rng::chacha(1);
        net.forward(&x, 2, Mode::Train, &mut rng).unwrap();
        net
    }

    #[test]
    fn weight_files_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.crnn");
        let mut net = sample_net();
        save_network(&path, &net, 77, "digest:abc123").unwrap();

        let (mut loaded, manifest) = load_network(&path).unwrap();
        assert_eq!(loaded.config(), net.config());
        assert_eq!(loaded.export_state(), net.export_state());
        assert_eq!(manifest.training_seed, 77);
        assert_eq!(manifest.dataset_digest, "digest:abc123");
        assert!(manifest.layer_shapes.contains("conv1.weight: 24"));
        assert!(manifest.layer_shapes.contains("norm1.running_var: 3"));
        assert!(manifest.layer_shapes.contains("dense2.bias: 3"));

        let x: Vec<f32> = (0..net.input_len()).map(|i| (i as f32) * 0.11 - 2.0).collect();
        assert_eq!(
            net.predict_probs(&x, 1).unwrap(),
            loaded.predict_probs(&x, 1).unwrap()
        );
    }

    #[test]
    fn malformed_files_are_rejected_with_specific_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.crnn");
        let net = sample_net();
        save_network(&path, &net, 0, "d").unwrap();
        let good = std::fs::read(&path).unwrap();

        // Wrong magic.
        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        let err = load_network(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");

        // Unsupported version.
        let mut bad = good.clone();
        bad[4] = 99;
        std::fs::write(&path, &bad).unwrap();
        let err = load_network(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");

        // Truncation.
        std::fs::write(&path, &good[..good.len() / 2]).unwrap();
        let err = load_network(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        // Trailing garbage.
        let mut bad = good.clone();
        bad.push(0);
        std::fs::write(&path, &bad).unwrap();
        let err = load_network(&path).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }
}
