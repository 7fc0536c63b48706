//! On-disk parameter format.
//!
//! A parameter file is:
//!
//! 1. the 8-byte ASCII magic `PROXIMA1` (no terminator),
//! 2. one ASCII header line ending in `\n`: decimal integers separated by
//!    single spaces — `<n_sections>`, then for each section
//!    `<n_dims> <dims…>`,
//! 3. the sections' data back to back, each a little-endian IEEE-754 f64
//!    array.
//!
//! A section with two or more dims is an MLP parameter vector in the layout
//! of [`crate::nn`] (data length `Σ (in+1)·out`); a section with one dim is
//! a bare vector of that length (used for state-independent distribution
//! parameters).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{MlpSpec, ParamVector};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PROXIMA1";

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSection {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamSection {
    pub fn mlp(spec: &MlpSpec, params: &ParamVector) -> Result<Self> {
        if params.len() != spec.param_count() {
            return Err(Error::Config("params do not match spec".into()));
        }
        Ok(ParamSection { dims: spec.dims(), data: params.0.clone() })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        ParamSection { dims: vec![data.len()], data }
    }

    fn expected_len(dims: &[usize]) -> Result<usize> {
        match dims.len() {
            0 => Err(Error::Format("empty section dims".into())),
            1 => Ok(dims[0]),
            _ => Ok(MlpSpec::from_dims(dims)?.param_count()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub sections: Vec<ParamSection>,
}

pub fn write_param_block(path: &Path, block: &ParamBlock) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    let mut header = format!("{}", block.sections.len());
    for s in &block.sections {
        header.push_str(&format!(" {}", s.dims.len()));
        for d in &s.dims {
            header.push_str(&format!(" {d}"));
        }
    }
    header.push('\n');
    buf.extend_from_slice(header.as_bytes());
    for s in &block.sections {
        let expect = ParamSection::expected_len(&s.dims)?;
        if s.data.len() != expect {
            return Err(Error::Format(format!(
                "section data length {} does not match dims (expected {})",
                s.data.len(),
                expect
            )));
        }
        for x in &s.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_param_block(path: &Path) -> Result<ParamBlock> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let nl = bytes[8..]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format(format!("{}: missing header line", path.display())))?;
    let header = std::str::from_utf8(&bytes[8..8 + nl])
        .map_err(|_| Error::Format(format!("{}: non-ascii header", path.display())))?;
    let nums: Vec<usize> = header
        .split(' ')
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Format(format!("{}: bad header token '{t}'", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut cursor = nums.iter().copied();
    let mut next = || cursor.next().ok_or_else(|| Error::Format("truncated header".into()));
    let n_sections = next()?;
    let mut dims_list = Vec::with_capacity(n_sections);
    for _ in 0..n_sections {
        let nd = next()?;
        let mut dims = Vec::with_capacity(nd);
        for _ in 0..nd {
            dims.push(next()?);
        }
        dims_list.push(dims);
    }
    drop(next);
    let mut off = 8 + nl + 1;
    let mut sections = Vec::with_capacity(n_sections);
    for dims in dims_list {
        let len = ParamSection::expected_len(&dims)?;
        let span = len * 8;
        if off + span > bytes.len() {
            return Err(Error::Format(format!("{}: truncated data", path.display())));
        }
        let mut data = Vec::with_capacity(len);
        for i in 0..len {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[off + i * 8..off + i * 8 + 8]);
            data.push(f64::from_le_bytes(b));
        }
        off += span;
        sections.push(ParamSection { dims, data });
    }
    if off != bytes.len() {
        return Err(Error::Format(format!("{}: trailing bytes", path.display())));
    }
    Ok(ParamBlock { sections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;

    #[test]
    fn roundtrip() {
        let spec = MlpSpec::new(3, vec![8], 2).unwrap();
        let p = init_params(&spec, 5, 0.01).unwrap();
        let block = ParamBlock {
            sections: vec![
                ParamSection::mlp(&spec, &p).unwrap(),
                ParamSection::vector(vec![-0.7, 0.3]),
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.params");
        write_param_block(&path, &block).unwrap();
        let back = read_param_block(&path).unwrap();
        assert_eq!(block, back);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.params");
        std::fs::write(&path, b"NOTMAGIC1 1 2\n").unwrap();
        assert!(read_param_block(&path).is_err());
    }
}
