//! The `.ptt` time-tag file format and its CSV alternative.
//!
//! A `.ptt` file is the 8-byte magic `PTTAG\0\0\x01`, a little-endian `u16`
//! channel id, a little-endian `u64` record count and then that many
//! little-endian `u64` picosecond timestamps in strictly ascending order.
//! The CSV alternative is a single `timestamp_ps` column.

use crate::error::{CliError, Result};
use photonlab::{Error as CoreError, TimeTagStream};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 8] = *b"PTTAG\0\0\x01";
pub const HEADER_LEN: usize = 18;

pub fn encode(stream: &TimeTagStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * stream.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&stream.channel.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for t in stream.tags() {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<TimeTagStream> {
    if bytes.len() < HEADER_LEN || bytes[..8] != MAGIC {
        return Err(CliError::Format("not a .ptt file (bad magic or truncated header)".into()));
    }
    let channel = u16::from_le_bytes([bytes[8], bytes[9]]);
    let count = u64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    if body.len() as u128 != 8 * count as u128 {
        return Err(CliError::Format(format!(
            ".ptt header declares {count} records but the file holds {} bytes of data",
            body.len()
        )));
    }
    let tags: Vec<u64> = body.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    TimeTagStream::new(channel, tags).map_err(|e| match e {
        CoreError::Unsorted { index, previous, value } => CliError::Format(format!(
            "time tags not ascending at record {index} (byte offset {}): {value} ps after {previous} ps",
            HEADER_LEN + 8 * index
        )),
        other => other.into(),
    })
}

pub fn write(path: &Path, stream: &TimeTagStream) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(&encode(stream)).map_err(|e| CliError::io(path, e))
}

/// Reads a `.ptt` file, or a `timestamp_ps` CSV when the extension is `.csv`.
pub fn read(path: &Path, default_channel: u16) -> Result<TimeTagStream> {
    let mut bytes = Vec::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| CliError::io(path, e))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let parsed = if is_csv { decode_csv(&bytes, default_channel) } else { decode(&bytes) };
    parsed.map_err(|e| match e {
        CliError::Format(msg) => CliError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn decode_csv(bytes: &[u8], channel: u16) -> Result<TimeTagStream> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers().map_err(|e| CliError::Format(e.to_string()))?;
    if header.len() != 1 || &header[0] != "timestamp_ps" {
        return Err(CliError::Format(format!(
            "expected a single `timestamp_ps` column, found {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut tags = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Format(e.to_string()))?;
        let t = rec[0]
            .parse::<u64>()
            .map_err(|_| CliError::Format(format!("row {}: {:?} is not a non-negative integer", row + 1, &rec[0])))?;
        tags.push(t);
    }
    TimeTagStream::new(channel, tags).map_err(|e| match e {
        CoreError::Unsorted { index, previous, value } => {
            CliError::Format(format!("time tags not ascending at row {}: {value} ps after {previous} ps", index + 1))
        }
        other => other.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_pinned() {
        let s = TimeTagStream::new(1, vec![5, 0x0102_0304_0506_0708]).unwrap();
        let bytes = encode(&s);
        let mut expect = b"PTTAG\0\0\x01".to_vec();
        expect.extend([1, 0]);
        expect.extend([2, 0, 0, 0, 0, 0, 0, 0]);
        expect.extend([5, 0, 0, 0, 0, 0, 0, 0]);
        expect.extend([8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(bytes, expect);
    }

    #[test]
    fn empty_stream_is_a_header() {
        let bytes = encode(&TimeTagStream::new(0, vec![]).unwrap());
        assert_eq!(bytes.len(), HEADER_LEN);
        assert!(decode(&bytes).unwrap().is_empty());
    }

    #[test]
    fn unsorted_records_name_the_offset() {
        let mut bytes = encode(&TimeTagStream::new(0, vec![1, 2, 3]).unwrap());
        bytes[HEADER_LEN + 16..].copy_from_slice(&1u64.to_le_bytes());
        let err = decode(&bytes).unwrap_err().to_string();
        assert!(err.contains("record 2") && err.contains("byte offset 34"), "{err}");
    }

    #[test]
    fn truncated_or_foreign_files_are_rejected() {
        let bytes = encode(&TimeTagStream::new(0, vec![1, 2, 3]).unwrap());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&bytes[..10]).is_err());
        let mut bad = bytes.clone();
        bad[7] = 2;
        assert!(decode(&bad).is_err());
    }

    #[test]
    fn csv_tags() {
        let s = decode_csv(b"timestamp_ps\n10\n20\n", 3).unwrap();
        assert_eq!((s.channel, s.tags()), (3, &[10u64, 20][..]));
        assert!(decode_csv(b"timestamp_ps\n20\n10\n", 0).unwrap_err().to_string().contains("row 2"));
        assert!(decode_csv(b"t\n10\n", 0).is_err());
        assert!(decode_csv(b"timestamp_ps\n-1\n", 0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(channel: u16, mut tags in proptest::collection::vec(any::<u64>(), 0..200)) {
            tags.sort_unstable();
            tags.dedup();
            let s = TimeTagStream::new(channel, tags).unwrap();
            prop_assert_eq!(decode(&encode(&s)).unwrap(), s);
        }
    }
}
