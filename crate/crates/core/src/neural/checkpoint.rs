//! Flat binary parameter files: `RFNN`, a version byte, a little-endian
//! `u32` count, then that many little-endian `f64` values.

use std::io::{Read, Write};

use super::NeuralError;
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"RFNN";
pub const VERSION: u8 = 1;

pub fn encode_parameters<T: Scalar>(parameters: &[T]) -> Result<Vec<u8>, NeuralError> {
    let n = u32::try_from(parameters.len()).map_err(|_| NeuralError::Checkpoint("too many parameters".into()))?;
    let mut out = Vec::with_capacity(9 + 8 * parameters.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&n.to_le_bytes());
    for p in parameters {
        out.extend_from_slice(&p.as_f64().to_le_bytes());
    }
    Ok(out)
}

pub fn decode_parameters<T: Scalar>(bytes: &[u8]) -> Result<Vec<T>, NeuralError> {
    let bad = |m: &str| NeuralError::Checkpoint(m.to_string());
    if bytes.len() < 9 || &bytes[..4] != MAGIC {
        return Err(bad("missing RFNN header"));
    }
    if bytes[4] != VERSION {
        return Err(bad(&format!("unsupported version {}", bytes[4])));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let body = &bytes[9..];
    if body.len() != 8 * n {
        return Err(bad(&format!("expected {} values, found {} bytes", n, body.len())));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect())
}

pub fn write_parameters<T: Scalar>(mut w: impl Write, parameters: &[T]) -> Result<(), NeuralError> {
    w.write_all(&encode_parameters(parameters)?).map_err(|e| NeuralError::Checkpoint(e.to_string()))
}

pub fn read_parameters<T: Scalar>(mut r: impl Read) -> Result<Vec<T>, NeuralError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    decode_parameters(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = vec![0.5f64, -1.25, f64::MIN_POSITIVE, 3e10];
        let bytes = encode_parameters(&p).unwrap();
        assert_eq!(&bytes[..5], b"RFNN\x01");
        assert_eq!(&bytes[5..9], &4u32.to_le_bytes());
        assert_eq!(bytes.len(), 9 + 32);
        assert_eq!(decode_parameters::<f64>(&bytes).unwrap(), p);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_parameters(&[1.0f64, 2.0]).unwrap();
        assert!(decode_parameters::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_parameters::<f64>(&wrong).is_err());
        let mut ver = bytes;
        ver[4] = 9;
        assert!(decode_parameters::<f64>(&ver).is_err());
    }
}
