//! Reading and writing arrays in the NPY v1.0 format.
//!
//! Only what the toolkit exchanges is supported: little-endian `f4`/`f8`
//! element types in C order. Version 2.0+ headers, Fortran order and every
//! other dtype are rejected with a format error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Header blocks are padded so the payload starts on this boundary.
const ALIGN: usize = 64;

/// On-disk element type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn descr(self) -> &'static str {
        match self {
            DType::F32 => "<f4",
            DType::F64 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    fn from_descr(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(DType::F32),
            "<f8" => Ok(DType::F64),
            other => Err(Error::Format(format!(
                "unsupported dtype '{other}', expected '<f4' or '<f8'"
            ))),
        }
    }
}

/// An array of arbitrary rank, widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub data: Vec<f64>,
}

impl NpyArray {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, PartialEq)]
struct Header {
    dtype: DType,
    fortran_order: bool,
    shape: Vec<usize>,
}

pub fn read_npy(path: &Path) -> Result<NpyArray> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    parse_npy(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses a complete NPY byte buffer.
pub fn parse_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic string".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(Error::Format(format!(
            "unsupported NPY version {major}.{minor}, only 1.0 is accepted"
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body_start = 10 + header_len;
    if bytes.len() < body_start {
        return Err(Error::Format("truncated NPY header".into()));
    }
    let header_text = std::str::from_utf8(&bytes[10..body_start])
        .map_err(|_| Error::Format("NPY header is not ASCII".into()))?;
    let header = parse_header(header_text)?;
    if header.fortran_order {
        return Err(Error::Format("Fortran-order arrays are not supported".into()));
    }

    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("NPY shape overflows".into()))?;
    let payload = &bytes[body_start..];
    let expected = count * header.dtype.size();
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload holds {} bytes, shape {:?} of {} needs {expected}",
            payload.len(),
            header.shape,
            header.dtype.descr()
        )));
    }
    let data = match header.dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        DType::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    Ok(NpyArray {
        shape: header.shape,
        dtype: header.dtype,
        data,
    })
}

/// Parses the Python-literal header dictionary, e.g.
/// `{'descr': '<f8', 'fortran_order': False, 'shape': (3, 4), }`.
fn parse_header(text: &str) -> Result<Header> {
    let body = text
        .trim_end_matches(['\n', ' ', '\0'])
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| Error::Format("NPY header is not a dictionary".into()))?;

    let mut descr = None;
    let mut fortran_order = None;
    let mut shape = None;
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after_key) = take_quoted(rest)?;
        let after_colon = after_key
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| Error::Format(format!("expected ':' after '{key}'")))?
            .trim_start();
        let after_value = match key {
            "descr" => {
                let (value, r) = take_quoted(after_colon)?;
                descr = Some(DType::from_descr(value)?);
                r
            }
            "fortran_order" => {
                if let Some(r) = after_colon.strip_prefix("False") {
                    fortran_order = Some(false);
                    r
                } else if let Some(r) = after_colon.strip_prefix("True") {
                    fortran_order = Some(true);
                    r
                } else {
                    return Err(Error::Format("fortran_order must be True or False".into()));
                }
            }
            "shape" => {
                let inner = after_colon
                    .strip_prefix('(')
                    .ok_or_else(|| Error::Format("shape must be a tuple".into()))?;
                let close = inner
                    .find(')')
                    .ok_or_else(|| Error::Format("unterminated shape tuple".into()))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.trim_end_matches('L').parse::<usize>().map_err(|_| {
                            Error::Format(format!("invalid shape dimension '{s}'"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(Error::Format(format!("unexpected header key '{other}'"))),
        };
        let r = after_value.trim_start();
        rest = r.strip_prefix(',').unwrap_or(r).trim_start();
        if !r.starts_with(',') && !rest.is_empty() {
            return Err(Error::Format("expected ',' between header entries".into()));
        }
    }

    match (descr, fortran_order, shape) {
        (Some(dtype), Some(fortran_order), Some(shape)) => Ok(Header {
            dtype,
            fortran_order,
            shape,
        }),
        _ => Err(Error::Format(
            "header must define descr, fortran_order and shape".into(),
        )),
    }
}

fn take_quoted(s: &str) -> Result<(&str, &str)> {
    let quote = s
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| Error::Format(format!("expected quoted string at '{s}'")))?;
    let inner = &s[1..];
    let end = inner
        .find(quote)
        .ok_or_else(|| Error::Format("unterminated string in header".into()))?;
    Ok((&inner[..end], &inner[end + 1..]))
}

/// Serializes `data` with the given shape into an NPY v1.0 byte buffer.
///
/// Values are narrowed to `f32` when `dtype` is [`DType::F32`].
pub fn encode_npy(shape: &[usize], dtype: DType, data: &[f64]) -> Result<Vec<u8>> {
    let count: usize = shape.iter().product();
    if count != data.len() {
        return Err(Error::Shape(format!(
            "{} values do not match shape {shape:?}",
            data.len()
        )));
    }
    let shape_text = match shape {
        [d] => format!("({d},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {shape_text}, }}",
        dtype.descr()
    );
    let unpadded = MAGIC.len() + 4 + header.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.extend(std::iter::repeat_n(' ', padding));
    header.push('\n');
    let header_len = u16::try_from(header.len())
        .map_err(|_| Error::Format("NPY header too long for version 1.0".into()))?;

    let mut out = Vec::with_capacity(10 + header.len() + count * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match dtype {
        DType::F32 => data
            .iter()
            .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        DType::F64 => data
            .iter()
            .for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(out)
}

pub fn write_npy(path: &Path, shape: &[usize], dtype: DType, data: &[f64]) -> Result<()> {
    let bytes = encode_npy(shape, dtype, data)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writer
        .write_all(&bytes)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io(path, e))
}
