//! The TINR container: bit-exact serialization of trained networks.
//!
//! Weights are stored as little-endian 32-bit floats — the compressed texture
//! asset — while training keeps 64-bit precision. Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TINR"
//! 4       2     format version (currently 1)
//! 6       1     input_dim (2 or 3)
//! 7       2     hidden_width
//! 9       1     hidden_count (>= 1)
//! 10      1     output_dim (3)
//! 11      1     activation (0 relu, 1 sine, 2 identity)
//! 12      8     omega0 (f64)
//! 20      1     encoder (0 identity, 1 fourier, 2 hash)
//! 21      ...   encoder params:
//!                 fourier: n_f u16, then n_f f64 frequencies
//!                 hash: levels u16, table_size u32, features u16,
//!                       base_resolution u32, growth f64
//! ...     4*P   payload: per layer W row-major then b, as f32;
//!               then the hash table if present
//! end-4   4     CRC-32 (IEEE) of all preceding bytes
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{
    ActivationKind, EncoderConfig, HashTable, InrModel, Layer, NetworkSpec,
};
use crate::tensor::{Matrix, Vector};

pub const MAGIC: [u8; 4] = *b"TINR";
pub const FORMAT_VERSION: u16 = 1;

// ── CRC-32 (IEEE, reflected) ─────────────────────────────────────────

const fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

const CRC_TABLE: [u32; 256] = crc32_table();

pub fn crc32(bytes: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = CRC_TABLE[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    !c
}

// ── Encoding helpers ─────────────────────────────────────────────────

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: self.pos + n - self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn activation_code(kind: ActivationKind) -> u8 {
    match kind {
        ActivationKind::Relu => 0,
        ActivationKind::Sine => 1,
        ActivationKind::Identity => 2,
    }
}

fn activation_from_code(code: u8) -> Result<ActivationKind> {
    match code {
        0 => Ok(ActivationKind::Relu),
        1 => Ok(ActivationKind::Sine),
        2 => Ok(ActivationKind::Identity),
        _ => Err(Error::Malformed(format!("unknown activation code {code}"))),
    }
}

fn encode_spec(spec: &NetworkSpec, out: &mut Vec<u8>) {
    out.push(spec.input_dim as u8);
    out.extend_from_slice(&(spec.hidden_width as u16).to_le_bytes());
    out.push(spec.hidden_count as u8);
    out.push(spec.output_dim as u8);
    out.push(activation_code(spec.activation));
    out.extend_from_slice(&spec.omega0.to_le_bytes());
    match &spec.encoder {
        EncoderConfig::Identity => out.push(0),
        EncoderConfig::Fourier { frequencies } => {
            out.push(1);
            out.extend_from_slice(&(frequencies.len() as u16).to_le_bytes());
            for f in frequencies {
                out.extend_from_slice(&f.to_le_bytes());
            }
        }
        EncoderConfig::Hash {
            levels,
            table_size,
            features_per_entry,
            base_resolution,
            growth,
        } => {
            out.push(2);
            out.extend_from_slice(&(*levels as u16).to_le_bytes());
            out.extend_from_slice(&(*table_size as u32).to_le_bytes());
            out.extend_from_slice(&(*features_per_entry as u16).to_le_bytes());
            out.extend_from_slice(&(*base_resolution as u32).to_le_bytes());
            out.extend_from_slice(&growth.to_le_bytes());
        }
    }
}

fn decode_spec(r: &mut Reader<'_>) -> Result<NetworkSpec> {
    let input_dim = r.u8()? as usize;
    let hidden_width = r.u16()? as usize;
    let hidden_count = r.u8()? as usize;
    let output_dim = r.u8()? as usize;
    let activation = activation_from_code(r.u8()?)?;
    let omega0 = r.f64()?;
    let encoder = match r.u8()? {
        0 => EncoderConfig::Identity,
        1 => {
            let n_f = r.u16()? as usize;
            let mut frequencies = Vec::with_capacity(n_f);
            for _ in 0..n_f {
                frequencies.push(r.f64()?);
            }
            EncoderConfig::Fourier { frequencies }
        }
        2 => EncoderConfig::Hash {
            levels: r.u16()? as usize,
            table_size: r.u32()? as usize,
            features_per_entry: r.u16()? as usize,
            base_resolution: r.u32()? as usize,
            growth: r.f64()?,
        },
        code => return Err(Error::Malformed(format!("unknown encoder code {code}"))),
    };
    let spec = NetworkSpec {
        input_dim,
        hidden_width,
        hidden_count,
        output_dim,
        activation,
        encoder,
        omega0,
    };
    if spec.hidden_count == 0 {
        return Err(Error::Malformed("model has no hidden layers".into()));
    }
    spec.validate()
        .map_err(|e| Error::Malformed(format!("invalid spec block: {e}")))?;
    Ok(spec)
}

// ── Save / load ──────────────────────────────────────────────────────

/// Serializes the model. Rejects degenerate (no hidden layer) or non-finite
/// models; writes atomically via a sibling temp file.
pub fn save(model: &InrModel, path: impl AsRef<Path>) -> Result<()> {
    let bytes = to_bytes(model)?;
    let path = path.as_ref();
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn to_bytes(model: &InrModel) -> Result<Vec<u8>> {
    if model.spec.hidden_count == 0 {
        return Err(Error::Config(
            "refusing to serialize a degenerate model with no hidden layers".into(),
        ));
    }
    model.spec.validate()?;
    if !model.is_finite() {
        return Err(Error::NonFinite("model parameters".into()));
    }

    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    encode_spec(&model.spec, &mut out);
    for layer in &model.layers {
        for &w in layer.weight.data() {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        for &b in layer.bias.data() {
            out.extend_from_slice(&(b as f32).to_le_bytes());
        }
    }
    if let Some(table) = &model.hash_table {
        for &v in &table.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn load(path: impl AsRef<Path>) -> Result<InrModel> {
    from_bytes(&fs::read(path.as_ref())?)
}

pub fn from_bytes(bytes: &[u8]) -> Result<InrModel> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let spec = decode_spec(&mut r)?;

    let mut layers = Vec::with_capacity(spec.hidden_count + 1);
    for (d_in, d_out) in spec.layer_dims() {
        let mut w = Vec::with_capacity(d_in * d_out);
        for _ in 0..d_in * d_out {
            w.push(r.f32()? as f64);
        }
        let mut b = Vec::with_capacity(d_out);
        for _ in 0..d_out {
            b.push(r.f32()? as f64);
        }
        layers.push(Layer {
            weight: Matrix::from_vec(d_in, d_out, w)?,
            bias: Vector::from_vec(b),
        });
    }
    let hash_table = match &spec.encoder {
        EncoderConfig::Hash {
            levels,
            table_size,
            features_per_entry,
            ..
        } => {
            let n = levels * table_size * features_per_entry;
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(r.f32()? as f64);
            }
            Some(HashTable { data })
        }
        _ => None,
    };

    let stored = r.u32()?;
    if r.pos != bytes.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after CRC",
            bytes.len() - r.pos
        )));
    }
    let computed = crc32(&bytes[..bytes.len() - 4]);
    if stored != computed {
        return Err(Error::CrcMismatch { stored, computed });
    }

    let model = InrModel {
        spec,
        layers,
        hash_table,
    };
    if !model.is_finite() {
        return Err(Error::Malformed("non-finite parameters in payload".into()));
    }
    Ok(model)
}

/// Rounds every parameter through 32-bit precision, mirroring what one
/// save/load cycle does to the weights.
pub fn quantize_to_f32(model: &InrModel) -> InrModel {
    let mut out = model.clone();
    for layer in &mut out.layers {
        for w in layer.weight.data_mut() {
            *w = *w as f32 as f64;
        }
        for b in layer.bias.data_mut() {
            *b = *b as f32 as f64;
        }
    }
    if let Some(table) = &mut out.hash_table {
        for v in &mut table.data {
            *v = *v as f32 as f64;
        }
    }
    out
}

/// Payload size in bits (`32 * param_count`), the numerator of the paper-style
/// bitrate. Header and CRC bytes are deliberately excluded.
pub fn asset_size_bits(path: impl AsRef<Path>) -> Result<u64> {
    let model = load(path)?;
    Ok(model.param_count() as u64 * 32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init;
    use crate::tensor::Matrix as M;

    fn sample_model(encoder: EncoderConfig, seed: u64) -> InrModel {
        let spec = NetworkSpec::new(2, 8, 2, ActivationKind::Relu, encoder).unwrap();
        init(&spec, seed).unwrap()
    }

    #[test]
    fn crc32_known_vector() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn round_trip_matches_quantized_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tinr");
        let model = sample_model(EncoderConfig::fourier_octaves(4), 3);
        save(&model, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded, quantize_to_f32(&model));

        // forward outputs agree bit-exactly with the quantized source
        let pts = M::from_rows(&[&[0.1, 0.7], &[0.9, 0.4]]);
        let a = loaded.forward(&pts).unwrap();
        let b = quantize_to_f32(&model).forward(&pts).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn resave_is_byte_identical() {
        let model = sample_model(EncoderConfig::Identity, 10);
        let bytes = to_bytes(&model).unwrap();
        let reloaded = from_bytes(&bytes).unwrap();
        assert_eq!(to_bytes(&reloaded).unwrap(), bytes);
    }

    #[test]
    fn hash_model_round_trip() {
        let model = sample_model(
            EncoderConfig::Hash {
                levels: 3,
                table_size: 64,
                features_per_entry: 2,
                base_resolution: 4,
                growth: 1.6,
            },
            4,
        );
        let bytes = to_bytes(&model).unwrap();
        let loaded = from_bytes(&bytes).unwrap();
        assert_eq!(loaded, quantize_to_f32(&model));
    }

    #[test]
    fn file_size_is_header_plus_payload_plus_crc() {
        let spec =
            NetworkSpec::new(2, 128, 1, ActivationKind::Relu, EncoderConfig::Identity).unwrap();
        let model = init(&spec, 0).unwrap();
        assert_eq!(model.param_count(), 771);
        let bytes = to_bytes(&model).unwrap();
        // fixed header for the identity encoder is 21 bytes
        assert_eq!(bytes.len(), 21 + 771 * 4 + 4);
    }

    #[test]
    fn asset_size_counts_payload_bits_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tinr");
        let spec =
            NetworkSpec::new(2, 128, 1, ActivationKind::Relu, EncoderConfig::Identity).unwrap();
        let model = init(&spec, 0).unwrap();
        save(&model, &path).unwrap();
        assert_eq!(asset_size_bits(&path).unwrap(), 771 * 32);
    }

    #[test]
    fn degenerate_model_rejected_at_save() {
        let spec =
            NetworkSpec::new(2, 0, 0, ActivationKind::Identity, EncoderConfig::Identity).unwrap();
        let model = init(&spec, 0).unwrap();
        assert!(matches!(to_bytes(&model), Err(Error::Config(_))));
    }

    #[test]
    fn each_failure_mode_is_distinct() {
        let model = sample_model(EncoderConfig::Identity, 1);
        let good = to_bytes(&model).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            from_bytes(&bad_magic),
            Err(Error::BadMagic { .. })
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 99;
        assert!(matches!(
            from_bytes(&bad_version),
            Err(Error::VersionMismatch { found: 99, .. })
        ));

        let mut flipped = good.clone();
        let mid = 21 + (good.len() - 25) / 2;
        flipped[mid] ^= 0x40;
        assert!(matches!(
            from_bytes(&flipped),
            Err(Error::CrcMismatch { .. })
        ));

        let truncated = &good[..good.len() - 10];
        assert!(matches!(
            from_bytes(truncated),
            Err(Error::Truncated { .. })
        ));
    }
}
