//! Versioned binary caches for parsed datasets and co-occurrence stats.
//!
//! Layout: 4-byte magic, little-endian `u16` format version, then a JSON
//! payload.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cooccur::CooccurrenceStats;
use crate::error::{Error, Result};
use crate::ingest::PredictionDataset;

pub const FORMAT_VERSION: u16 = 1;
const DATASET_MAGIC: &[u8; 4] = b"HTDS";
const STATS_MAGIC: &[u8; 4] = b"HTST";

fn write_tagged<T: Serialize, W: Write>(magic: &[u8; 4], value: &T, mut out: W) -> Result<()> {
    out.write_all(magic)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    serde_json::to_writer(&mut out, value)?;
    out.flush()?;
    Ok(())
}

fn read_tagged<T: DeserializeOwned, R: Read>(magic: &[u8; 4], mut input: R) -> Result<T> {
    let mut header = [0u8; 6];
    input.read_exact(&mut header).map_err(|_| Error::Format("file too short for a cache header".into()))?;
    if &header[..4] != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&header[..4])
        )));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version} (this build reads {FORMAT_VERSION})")));
    }
    Ok(serde_json::from_reader(input)?)
}

pub fn write_dataset<W: Write>(ds: &PredictionDataset, out: W) -> Result<()> {
    write_tagged(DATASET_MAGIC, ds, out)
}

pub fn read_dataset<R: Read>(input: R) -> Result<PredictionDataset> {
    let ds: PredictionDataset = read_tagged(DATASET_MAGIC, input)?;
    let short = ds.records.iter().any(|r| r.top.len() < ds.k);
    ds.validate(short)?;
    Ok(ds)
}

pub fn write_stats<W: Write>(stats: &CooccurrenceStats, out: W) -> Result<()> {
    write_tagged(STATS_MAGIC, stats, out)
}

pub fn read_stats<R: Read>(input: R) -> Result<CooccurrenceStats> {
    read_tagged(STATS_MAGIC, input)
}

pub fn load_dataset(path: &Path) -> Result<PredictionDataset> {
    read_dataset(fs::File::open(path)?)
}

pub fn load_stats(path: &Path) -> Result<CooccurrenceStats> {
    read_stats(fs::File::open(path)?)
}
