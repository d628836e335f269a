// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal `.npy` (format version 1.0) codec for 2-D little-endian `float32`
//! arrays in C order.
//!
//! Writing always emits version 1.0 with the header padded by spaces so that
//! the payload starts on a 64-byte boundary. Reading also accepts versions
//! 2.0 and 3.0, whose only difference is a 4-byte header length.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

/// A decoded 2-D `float32` array.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

fn header_dict(rows: usize, cols: usize) -> String {
    format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({rows}, {cols}), }}")
}

/// Encode a row-major `rows × cols` array as `.npy` bytes.
pub fn encode(rows: usize, cols: usize, data: &[f32]) -> Vec<u8> {
    assert_eq!(data.len(), rows * cols, "payload length must match shape");
    let dict = header_dict(rows, cols);
    // magic + version + u16 length + dict + '\n'
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    let header_len = dict.len() + pad + 1;

    let mut out = Vec::with_capacity(unpadded + pad + data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', pad));
    out.push(b'\n');
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Offset of the first payload byte in a well-formed file.
pub fn payload_offset(bytes: &[u8]) -> Result<usize> {
    parse_preamble(bytes).map(|(offset, _)| offset)
}

fn parse_preamble(bytes: &[u8]) -> Result<(usize, &str)> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NUMPY magic bytes".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated header length".into()));
            }
            let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
            (len, 12)
        }
        _ => {
            return Err(Error::Format(format!(
                "unsupported format version {major}.{minor}"
            )))
        }
    };
    let end = header_start + header_len;
    if bytes.len() < end {
        return Err(Error::Format("header extends past end of file".into()));
    }
    let header = std::str::from_utf8(&bytes[header_start..end])
        .map_err(|_| Error::Format("header is not valid text".into()))?;
    Ok((end, header))
}

#[derive(Debug, PartialEq)]
enum Value {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parse the python-literal dict in the header. Only the subset numpy emits
/// is supported: string keys mapping to strings, booleans, or integer tuples.
fn parse_dict(header: &str) -> Result<Vec<(String, Value)>> {
    let bad = |msg: &str| Error::Format(format!("bad header dict: {msg}"));
    let s = header.trim();
    let s = s
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| bad("not enclosed in braces"))?;
    let mut chars = s.char_indices().peekable();
    let mut entries = Vec::new();

    let read_quoted = |s: &str, start: usize| -> Result<(String, usize)> {
        let quote = s[start..].chars().next().ok_or_else(|| bad("eof"))?;
        let rest = &s[start + 1..];
        let close = rest.find(quote).ok_or_else(|| bad("unterminated string"))?;
        Ok((rest[..close].to_string(), start + 1 + close + 1))
    };

    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() || c == ',' {
            chars.next();
            continue;
        }
        if c != '\'' && c != '"' {
            return Err(bad("expected quoted key"));
        }
        let (key, after_key) = read_quoted(s, i)?;
        let rest = &s[after_key..];
        let colon = rest.find(':').ok_or_else(|| bad("missing ':'"))?;
        let value_start = after_key + colon + 1;
        let vs = s[value_start..].trim_start();
        let value_start = s.len() - vs.len();
        let (value, next) = if vs.starts_with('\'') || vs.starts_with('"') {
            let (v, n) = read_quoted(s, value_start)?;
            (Value::Str(v), n)
        } else if let Some(r) = vs.strip_prefix("True") {
            (Value::Bool(true), s.len() - r.len())
        } else if let Some(r) = vs.strip_prefix("False") {
            (Value::Bool(false), s.len() - r.len())
        } else if vs.starts_with('(') {
            let close = vs.find(')').ok_or_else(|| bad("unterminated tuple"))?;
            let dims = vs[1..close]
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<usize>().map_err(|_| bad("non-integer dimension")))
                .collect::<Result<Vec<_>>>()?;
            (Value::Tuple(dims), value_start + close + 1)
        } else {
            return Err(bad("unsupported value"));
        };
        entries.push((key, value));
        while chars.peek().is_some_and(|&(j, _)| j < next) {
            chars.next();
        }
    }
    Ok(entries)
}

/// Decode `.npy` bytes holding a 2-D `<f4` C-order array.
pub fn decode(bytes: &[u8]) -> Result<NpyArray> {
    let (offset, header) = parse_preamble(bytes)?;
    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    for (key, value) in parse_dict(header)? {
        match (key.as_str(), value) {
            ("descr", Value::Str(s)) => descr = Some(s),
            ("fortran_order", Value::Bool(b)) => fortran = Some(b),
            ("shape", Value::Tuple(t)) => shape = Some(t),
            (k, _) => return Err(Error::Format(format!("unexpected header entry '{k}'"))),
        }
    }
    let descr = descr.ok_or_else(|| Error::Format("header lacks 'descr'".into()))?;
    let fortran = fortran.ok_or_else(|| Error::Format("header lacks 'fortran_order'".into()))?;
    let shape = shape.ok_or_else(|| Error::Format("header lacks 'shape'".into()))?;

    if descr != "<f4" {
        return Err(Error::UnsupportedDtype(format!(
            "dtype '{descr}' (only '<f4' is supported)"
        )));
    }
    if fortran {
        return Err(Error::UnsupportedDtype("Fortran-ordered arrays".into()));
    }
    let [rows, cols] = shape[..] else {
        return Err(Error::UnsupportedDtype(format!(
            "{}-D array (only 2-D is supported)",
            shape.len()
        )));
    };
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("shape overflows".into()))?;
    let payload = &bytes[offset..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes but shape ({rows}, {cols}) requires {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(NpyArray { rows, cols, data })
}

pub fn write(path: &Path, rows: usize, cols: usize, data: &[f32]) -> Result<()> {
    fs::write(path, encode(rows, cols, data)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<NpyArray> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
