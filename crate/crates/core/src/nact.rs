//! NACT activation files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "NACT"
//! 4       4     u32 LE version (1)
//! 8       8     u64 LE T (tokens)
//! 16      4     u32 LE L (layers)
//! 20      4     u32 LE H (layer size)
//! 24      4     u32 LE name_len
//! 28      n     UTF-8 model name
//! 28+n    ...   L*T*H f32 LE, layer-major, then token-major, then offset
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::activation::ActivationSet;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NACT";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

pub fn load_activations(path: impl AsRef<Path>) -> Result<ActivationSet> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

pub fn save_activations(set: &ActivationSet, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode(set))?;
    file.flush()?;
    Ok(())
}

pub fn encode(set: &ActivationSet) -> Vec<u8> {
    let name = set.model_name().as_bytes();
    let mut out = Vec::with_capacity(HEADER_LEN + name.len() + set.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(set.num_tokens() as u64).to_le_bytes());
    out.extend_from_slice(&(set.num_layers() as u32).to_le_bytes());
    out.extend_from_slice(&(set.layer_size() as u32).to_le_bytes());
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name);
    for v in set.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<ActivationSet> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let tokens = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let layers = u32_at(bytes, 16) as u64;
    let layer_size = u32_at(bytes, 20) as u64;
    let name_len = u32_at(bytes, 24) as usize;

    let payload_start = HEADER_LEN + name_len;
    let expected = tokens
        .checked_mul(layers)
        .and_then(|v| v.checked_mul(layer_size))
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(payload_start as u64))
        .ok_or_else(|| Error::GeometryMismatch("header geometry overflows".into()))?;
    if bytes.len() as u64 != expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let name = std::str::from_utf8(&bytes[HEADER_LEN..payload_start])
        .map_err(|_| Error::GeometryMismatch("model name is not UTF-8".into()))?
        .to_string();

    let data: Vec<f32> = bytes[payload_start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ActivationSet::new(
        name,
        tokens as usize,
        layers as usize,
        layer_size as usize,
        data,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ActivationSet {
        ActivationSet::new("tiny", 2, 1, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap()
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = encode(&fixture());
        assert_eq!(&bytes[0..4], b"NACT");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &3u32.to_le_bytes());
        assert_eq!(&bytes[24..28], &4u32.to_le_bytes());
        assert_eq!(&bytes[28..32], b"tiny");
        assert_eq!(bytes.len(), 32 + 6 * 4);
        assert_eq!(&bytes[32..36], &1.0f32.to_le_bytes());
    }

    #[test]
    fn readback_places_first_token() {
        let a = decode(&encode(&fixture())).unwrap();
        let z: Vec<f32> = (0..3).map(|o| a.value(0, 0, o)).collect();
        assert_eq!(z, vec![1.0, 2.0, 3.0]);
        assert_eq!(a.model_name(), "tiny");
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = encode(&fixture());
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(
            decode(&bytes),
            Err(Error::TruncatedPayload {
                expected: 56,
                actual: 52
            })
        ));
        let mut longer = encode(&fixture());
        longer.push(0);
        assert!(matches!(
            decode(&longer),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode(&fixture());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::BadMagic)));
        let mut bytes = encode(&fixture());
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(Error::UnsupportedVersion(2))));
        assert!(matches!(decode(b"NA"), Err(Error::BadMagic)));
    }

    #[test]
    fn non_finite_reports_first_offset() {
        let mut bytes = encode(&fixture());
        let at = 32 + 4 * 4;
        bytes[at..at + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(
            decode(&bytes),
            Err(Error::NonFiniteValue { offset: 4 })
        ));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.nact");
        save_activations(&fixture(), &path).unwrap();
        let a = load_activations(&path).unwrap();
        assert_eq!(a, fixture());
        assert_eq!(fs::read(&path).unwrap(), encode(&a));
    }
}
