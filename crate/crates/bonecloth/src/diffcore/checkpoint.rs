//! `BNCK` checkpoint format: magic, version, then repeated records of
//! (name length, UTF-8 name, rank, dims, little-endian f32 payload).

use std::path::Path;

use crate::error::FormatError;
use crate::io::{read_file, write_atomic, Reader, Writer};

const MAGIC: [u8; 4] = *b"BNCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn encode(records: &[Record]) -> Vec<u8> {
    let mut w = Writer::new();
    w.magic(MAGIC).u32(VERSION);
    for r in records {
        w.string(&r.name);
        w.u32(r.shape.len() as u32);
        for &d in &r.shape {
            w.u32(d as u32);
        }
        w.f32_slice(&r.data);
    }
    w.finish()
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Record>, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let mut out = Vec::new();
    while !r.is_empty() {
        let name = r.string("record name")?;
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dim")? as usize);
        }
        let count: usize = shape.iter().product();
        let data = r.f32_vec(count, "payload")?;
        out.push(Record { name, shape, data });
    }
    Ok(out)
}

pub fn save(records: &[Record], path: &Path) -> Result<(), FormatError> {
    write_atomic(path, &encode(records))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<Record>, FormatError> {
    decode(&read_file(path)?)
}

/// Look up records by name against an expected (name, shape) list; every
/// expected entry must be present with the right shape.
pub fn validate<'a>(
    records: &'a [Record],
    expected: &[(String, Vec<usize>)],
) -> Result<Vec<&'a Record>, FormatError> {
    let mut out = Vec::with_capacity(expected.len());
    for (name, shape) in expected {
        let rec = records
            .iter()
            .find(|r| &r.name == name)
            .ok_or_else(|| FormatError::MissingParameter(name.clone()))?;
        if &rec.shape != shape {
            return Err(FormatError::ParameterShape {
                name: name.clone(),
                got: rec.shape.clone(),
                expected: shape.clone(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
