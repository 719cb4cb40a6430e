//! Binary window interchange format.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "DIAW"
//!      4     2  format version (u16, currently 1)
//!      6     1  channel count (u8)
//!      7     4  window length (u32)
//!     11     4  window count (u32)
//!     15     1  label set size (u8)
//!     16     …  per window: length·channels f32 values (row-major), then 1 label byte
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{self, Read, Write};
use std::path::Path;

use crate::windows::Window;

pub const MAGIC: [u8; 4] = *b"DIAW";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum WindowFileError {
    #[error("bad magic {0:?}, expected \"DIAW\"")]
    BadMagic([u8; 4]),
    #[error("unsupported window file version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated window file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("trailing bytes: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: u64, actual: u64 },
    #[error("window {index}: {reason}")]
    BadWindow { index: usize, reason: String },
    #[error("header field out of range: {0}")]
    HeaderOverflow(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowFileHeader {
    pub version: u16,
    pub channels: u8,
    pub window_length: u32,
    pub window_count: u32,
    pub label_set_size: u8,
}

impl WindowFileHeader {
    pub fn record_len(&self) -> u64 {
        self.window_length as u64 * self.channels as u64 * 4 + 1
    }

    /// Exact file size implied by the header.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN as u64 + self.window_count as u64 * self.record_len()
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6] = self.channels;
        b[7..11].copy_from_slice(&self.window_length.to_le_bytes());
        b[11..15].copy_from_slice(&self.window_count.to_le_bytes());
        b[15] = self.label_set_size;
        b
    }

    fn decode(b: &[u8]) -> Result<Self, WindowFileError> {
        if b.len() < HEADER_LEN {
            return Err(WindowFileError::Truncated {
                expected: HEADER_LEN as u64,
                actual: b.len() as u64,
            });
        }
        let magic: [u8; 4] = b[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(WindowFileError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(WindowFileError::UnsupportedVersion(version));
        }
        Ok(Self {
            version,
            channels: b[6],
            window_length: u32::from_le_bytes(b[7..11].try_into().unwrap()),
            window_count: u32::from_le_bytes(b[11..15].try_into().unwrap()),
            label_set_size: b[15],
        })
    }
}

/// Decoded window file. Subject ids and start indices are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub header: WindowFileHeader,
    /// `window_count × window_length × channels`, row-major per window.
    pub values: Vec<f32>,
    pub labels: Vec<u8>,
}

impl WindowSet {
    pub fn window(&self, index: usize) -> Option<(&[f32], u8)> {
        let width = self.header.window_length as usize * self.header.channels as usize;
        let label = *self.labels.get(index)?;
        Some((&self.values[index * width..(index + 1) * width], label))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Encodes windows that all share `window_length` and `channels`.
pub fn encode_windows(
    windows: &[Window],
    window_length: usize,
    channels: usize,
    label_set_size: u8,
) -> Result<Vec<u8>, WindowFileError> {
    let header = WindowFileHeader {
        version: VERSION,
        channels: u8::try_from(channels).map_err(|_| WindowFileError::HeaderOverflow("channels"))?,
        label_set_size,
        window_length: u32::try_from(window_length).map_err(|_| WindowFileError::HeaderOverflow("window length"))?,
        window_count: u32::try_from(windows.len()).map_err(|_| WindowFileError::HeaderOverflow("window count"))?,
    };
    let mut out = Vec::with_capacity(header.file_len() as usize);
    out.extend_from_slice(&header.encode());
    let width = window_length * channels;
    for (index, w) in windows.iter().enumerate() {
        let bad = |reason: String| WindowFileError::BadWindow { index, reason };
        if w.values.len() != width {
            return Err(bad(format!("{} values, expected {width}", w.values.len())));
        }
        if w.label >= label_set_size {
            return Err(bad(format!(
                "label {} outside label set of size {label_set_size}",
                w.label
            )));
        }
        if let Some(v) = w.values.iter().find(|v| !v.is_finite()) {
            return Err(bad(format!("non-finite value {v}")));
        }
        for v in &w.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(w.label);
    }
    Ok(out)
}

pub fn decode_windows(bytes: &[u8]) -> Result<WindowSet, WindowFileError> {
    let header = WindowFileHeader::decode(bytes)?;
    let expected = header.file_len();
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(WindowFileError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(WindowFileError::TrailingBytes { expected, actual });
    }
    let record = header.record_len() as usize;
    let width = record - 1;
    let count = header.window_count as usize;
    let mut values = Vec::with_capacity(count * width / 4);
    let mut labels = Vec::with_capacity(count);
    for (index, rec) in bytes[HEADER_LEN..].chunks_exact(record).enumerate() {
        for chunk in rec[..width].chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(WindowFileError::BadWindow {
                    index,
                    reason: format!("non-finite value {v}"),
                });
            }
            values.push(v);
        }
        let label = rec[width];
        if label >= header.label_set_size {
            return Err(WindowFileError::BadWindow {
                index,
                reason: format!("label {label} outside label set of size {}", header.label_set_size),
            });
        }
        labels.push(label);
    }
    Ok(WindowSet { header, values, labels })
}

pub fn write_window_file<W: Write>(
    mut out: W,
    windows: &[Window],
    window_length: usize,
    channels: usize,
    label_set_size: u8,
) -> Result<(), WindowFileError> {
    out.write_all(&encode_windows(windows, window_length, channels, label_set_size)?)?;
    Ok(())
}

pub fn read_window_file<R: Read>(mut input: R) -> Result<WindowSet, WindowFileError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_windows(&bytes)
}

pub fn load_window_file(path: impl AsRef<Path>) -> Result<WindowSet, WindowFileError> {
    decode_windows(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(values: Vec<f32>, label: u8) -> Window {
        Window {
            subject_id: "s".into(),
            start_index: 0,
            label,
            length: values.len() / 2,
            channels: 2,
            values,
        }
    }

    #[test]
    fn round_trip() {
        let ws = vec![
            window(vec![0.0, 0.25, 0.5, 1.0], 3),
            window(vec![0.1, 0.2, 0.3, 0.4], 0),
        ];
        let bytes = encode_windows(&ws, 2, 2, 5).unwrap();
        assert_eq!(bytes.len(), 16 + 2 * (2 * 2 * 4 + 1));
        assert_eq!(&bytes[..HEADER_LEN], b"DIAW\x01\x00\x02\x02\x00\x00\x00\x02\x00\x00\x00\x05");
        let set = decode_windows(&bytes).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.window(0), Some((&[0.0f32, 0.25, 0.5, 1.0][..], 3)));
        assert_eq!(set.window(1).unwrap().1, 0);
        assert!(set.window(2).is_none());
    }

    #[test]
    fn empty_file_is_valid() {
        let bytes = encode_windows(&[], 25, 1, 5).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        let set = decode_windows(&bytes).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.header.window_length, 25);
    }

    #[test]
    fn rejects_truncation_and_garbage() {
        let bytes = encode_windows(&[window(vec![0.0; 4], 1)], 2, 2, 5).unwrap();
        assert!(matches!(
            decode_windows(&bytes[..bytes.len() - 1]),
            Err(WindowFileError::Truncated {
                expected: 33,
                actual: 32
            })
        ));
        assert!(matches!(
            decode_windows(&bytes[..10]),
            Err(WindowFileError::Truncated { .. })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            decode_windows(&extra),
            Err(WindowFileError::TrailingBytes { .. })
        ));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_windows(&magic), Err(WindowFileError::BadMagic(_))));
        let mut version = bytes.clone();
        version[4] = 2;
        assert!(matches!(
            decode_windows(&version),
            Err(WindowFileError::UnsupportedVersion(2))
        ));
        let mut label = bytes;
        *label.last_mut().unwrap() = 9;
        assert!(matches!(decode_windows(&label), Err(WindowFileError::BadWindow { .. })));
    }

    #[test]
    fn writer_validates_windows() {
        assert!(encode_windows(&[window(vec![f32::NAN, 0.0, 0.0, 0.0], 0)], 2, 2, 5).is_err());
        assert!(encode_windows(&[window(vec![0.0; 4], 5)], 2, 2, 5).is_err());
        assert!(encode_windows(&[window(vec![0.0; 2], 0)], 2, 2, 5).is_err());
    }
}
