//! Binary dataset files.
//!
//! Little-endian layout:
//!
//! ```text
//! "CVSEI" version:u8 ('1')
//! count:u32  length:u32  sample_rate:f64  class_count:u16  role:u8
//! count x { label:u16  length x (i:f32, q:f32) }
//! [provenance_len:u32  provenance:utf8]      optional trailer
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex32;

use super::dataset::{ComplexSignal, DatasetRole, LabeledDataset};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 5] = b"CVSEI";
pub const DATASET_VERSION: u8 = b'1';

pub fn write_dataset(d: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset_to(d, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_dataset_to<W: Write>(d: &LabeledDataset, mut w: W) -> Result<()> {
    let length = d.signal_len();
    for (i, s) in d.signals.iter().enumerate() {
        if s.len() != length {
            return Err(Error::ShapeMismatch(format!("signal {i} has length {} but signal 0 has {length}", s.len())));
        }
    }
    if d.labels.len() != d.signals.len() {
        return Err(Error::LengthMismatch { left: d.signals.len(), right: d.labels.len() });
    }
    let count = u32::try_from(d.len()).map_err(|_| Error::InvalidConfig("too many records".into()))?;
    let length32 = u32::try_from(length).map_err(|_| Error::InvalidConfig("signal too long".into()))?;
    let classes = u16::try_from(d.class_count).map_err(|_| Error::InvalidConfig("too many classes".into()))?;

    let mut buf = Vec::with_capacity(24 + d.len() * (2 + 8 * length));
    buf.extend_from_slice(DATASET_MAGIC);
    buf.push(DATASET_VERSION);
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&length32.to_le_bytes());
    buf.extend_from_slice(&d.sample_rate_hz().to_le_bytes());
    buf.extend_from_slice(&classes.to_le_bytes());
    buf.push(d.role.code());
    for (s, &label) in d.signals.iter().zip(&d.labels) {
        if label >= d.class_count {
            return Err(Error::LabelOutOfRange { label, classes: d.class_count });
        }
        buf.extend_from_slice(&(label as u16).to_le_bytes());
        for v in &s.samples {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    if !d.provenance.is_empty() {
        buf.extend_from_slice(&(d.provenance.len() as u32).to_le_bytes());
        buf.extend_from_slice(d.provenance.as_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let bytes = fs::read(path)?;
    read_dataset_from(&bytes[..])
}

pub fn read_dataset_from<R: Read>(mut r: R) -> Result<LabeledDataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    let magic = cur.take(5, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(Error::CorruptFile("bad magic, not a dataset file".into()));
    }
    let version = cur.take(1, "version")?[0];
    if version != DATASET_VERSION {
        return Err(Error::CorruptFile(format!(
            "unsupported dataset version {version} (expected {DATASET_VERSION})"
        )));
    }
    let count = cur.u32("record count")? as usize;
    let length = cur.u32("signal length")? as usize;
    let sample_rate = f64::from_le_bytes(cur.array("sample rate")?);
    let class_count = u16::from_le_bytes(cur.array("class count")?) as usize;
    let role_code = cur.take(1, "role")?[0];
    let role = DatasetRole::from_code(role_code)
        .ok_or_else(|| Error::CorruptFile(format!("unknown role code {role_code}")))?;

    let record = 2 + 8 * length;
    if cur.remaining() < count.saturating_mul(record) {
        return Err(Error::CorruptFile(format!(
            "truncated body: {count} records need {} bytes, {} present",
            count * record,
            cur.remaining()
        )));
    }
    let mut signals = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = u16::from_le_bytes(cur.array("label")?) as usize;
        if label >= class_count {
            return Err(Error::CorruptFile(format!("record {i} has label {label} >= class count {class_count}")));
        }
        let raw = cur.take(8 * length, "samples")?;
        let samples = raw
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect();
        signals.push(ComplexSignal::new(samples, sample_rate));
        labels.push(label);
    }
    let provenance = if cur.remaining() == 0 {
        String::new()
    } else {
        let n = cur.u32("provenance length")? as usize;
        let raw = cur.take(n, "provenance")?;
        if cur.remaining() != 0 {
            return Err(Error::CorruptFile(format!("{} trailing bytes after provenance", cur.remaining())));
        }
        String::from_utf8(raw.to_vec()).map_err(|_| Error::CorruptFile("provenance is not utf-8".into()))?
    };
    LabeledDataset::new(signals, labels, class_count, role, provenance)
        .map_err(|e| Error::CorruptFile(format!("inconsistent contents: {e}")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::CorruptFile(format!("truncated while reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N, what)?);
        Ok(a)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_sim::{generate_dataset, make_emitter_profile, BurstConfig};

    fn sample() -> LabeledDataset {
        let profiles: Vec<_> = (0..3).map(|s| make_emitter_profile(s, 0.5)).collect();
        let cfg = BurstConfig { length: 64, ..BurstConfig::default() };
        generate_dataset(&profiles, 10, 20.0, 3, &cfg, DatasetRole::Auxiliary).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let d = sample();
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf).unwrap();
        let back = read_dataset_from(&buf[..]).unwrap();
        assert_eq!(back.labels, d.labels);
        assert_eq!(back.class_count, d.class_count);
        assert_eq!(back.role, d.role);
        assert_eq!(back.provenance, d.provenance);
        assert_eq!(back.sample_rate_hz().to_bits(), d.sample_rate_hz().to_bits());
        for (a, b) in back.signals.iter().zip(&d.signals) {
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert_eq!((x.re.to_bits(), x.im.to_bits()), (y.re.to_bits(), y.im.to_bits()));
            }
        }
    }

    #[test]
    fn header_layout() {
        let d = sample();
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf).unwrap();
        assert_eq!(&buf[..6], b"CVSEI1");
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 30);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 64);
        assert_eq!(f64::from_le_bytes(buf[14..22].try_into().unwrap()), 4e6);
        assert_eq!(u16::from_le_bytes(buf[22..24].try_into().unwrap()), 3);
        assert_eq!(buf[24], 0);
        assert_eq!(u16::from_le_bytes(buf[25..27].try_into().unwrap()), 0);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let d = sample();
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf).unwrap();
        for cut in [3, 20, 100, buf.len() - d.provenance.len() - 5] {
            let err = read_dataset_from(&buf[..cut]).unwrap_err();
            assert!(matches!(err, Error::CorruptFile(_)), "cut {cut}: {err}");
        }
    }

    #[test]
    fn bad_version_is_reported() {
        let d = sample();
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf).unwrap();
        buf[5] = 99;
        match read_dataset_from(&buf[..]).unwrap_err() {
            Error::CorruptFile(msg) => assert!(msg.contains("version 99"), "{msg}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn mismatched_signal_lengths_rejected_at_write() {
        let mut d = sample();
        d.signals[4].samples.pop();
        let err = write_dataset_to(&d, Vec::new()).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }
}
