//! Feature dumps: `N` and `d` as little-endian u64, then `N·d` row-major
//! little-endian f32 values, then `N` label bytes.

use std::path::Path;

use nalgebra::DMatrix;

use super::DaError;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDump {
    pub features: DMatrix<f64>,
    pub labels: Vec<u8>,
}

pub fn encode_features(dump: &FeatureDump) -> Vec<u8> {
    let (n, d) = dump.features.shape();
    let mut out = Vec::with_capacity(16 + 4 * n * d + n);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for r in 0..n {
        for c in 0..d {
            out.extend_from_slice(&(dump.features[(r, c)] as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&dump.labels);
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureDump, DaError> {
    let header = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    if bytes.len() < 16 {
        return Err(DaError::Parse(format!(
            "feature dump is {} bytes, shorter than its header",
            bytes.len()
        )));
    }
    let (n, d) = (header(0), header(1));
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(n))
        .and_then(|v| v.checked_add(16));
    if expected != Some(bytes.len() as u64) {
        return Err(DaError::Parse(format!(
            "feature dump header says {n}×{d} but the payload is {} bytes",
            bytes.len()
        )));
    }
    let (n, d) = (n as usize, d as usize);
    let body = &bytes[16..16 + 4 * n * d];
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DaError::Parse(format!("non-finite feature at row {}", i / d.max(1))));
    }
    Ok(FeatureDump {
        features: DMatrix::from_row_slice(n, d, &values),
        labels: bytes[16 + 4 * n * d..].to_vec(),
    })
}

pub fn write_features(path: &Path, dump: &FeatureDump) -> Result<(), DaError> {
    std::fs::write(path, encode_features(dump)).map_err(|source| DaError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_features(path: &Path) -> Result<FeatureDump, DaError> {
    let bytes = std::fs::read(path).map_err(|source| DaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_features(&bytes).map_err(|e| match e {
        DaError::Parse(m) => DaError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dump = FeatureDump {
            features: DMatrix::from_row_slice(3, 2, &[0.5, -1.0, 2.25, 0.0, 1e-3, 7.0]),
            labels: vec![1, 0, 1],
        };
        let bytes = encode_features(&dump);
        assert_eq!(bytes.len(), 16 + 24 + 3);
        let back = decode_features(&bytes).unwrap();
        assert_eq!(back.labels, dump.labels);
        assert!((back.features.clone() - dump.features.clone()).abs().max() < 1e-7);
    }

    #[test]
    fn malformed_dumps_are_rejected() {
        assert!(matches!(decode_features(&[0; 7]), Err(DaError::Parse(_))));
        let mut bytes = encode_features(&FeatureDump {
            features: DMatrix::zeros(2, 2),
            labels: vec![0, 1],
        });
        bytes.pop();
        assert!(matches!(decode_features(&bytes), Err(DaError::Parse(_))));
        let mut huge = vec![0u8; 16];
        huge[..8].copy_from_slice(&u64::MAX.to_le_bytes());
        huge[8..].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_features(&huge).is_err());
    }
}
