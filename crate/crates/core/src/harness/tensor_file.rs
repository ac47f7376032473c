//! Plain-text tensor files.
//!
//! ```text
//! vdo-tensor-v1
//! shape 2 3
//! scale 65536
//! 0.5
//! -1.25
//! ...
//! ```
//!
//! One value per line, row-major. Values are written in Rust's shortest
//! round-trip form, so reading back yields identical `f64`s.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quantize::{FloatTensor, DEFAULT_SCALE};

pub const TENSOR_MAGIC: &str = "vdo-tensor-v1";

#[derive(Clone, Debug, PartialEq)]
pub struct TensorFile {
    pub tensor: FloatTensor,
    pub scale: u32,
}

pub fn format_tensor(tensor: &FloatTensor, scale: u32) -> String {
    let mut out = String::with_capacity(32 + tensor.len() * 12);
    out.push_str(TENSOR_MAGIC);
    out.push_str("\nshape");
    for d in tensor.shape() {
        write!(out, " {d}").unwrap();
    }
    writeln!(out, "\nscale {scale}").unwrap();
    for v in tensor.data() {
        writeln!(out, "{v:?}").unwrap();
    }
    out
}

pub fn parse_tensor(text: &str) -> Result<TensorFile> {
    let bad = |msg: String| Error::Malformed(format!("tensor file: {msg}"));
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some(TENSOR_MAGIC) {
        return Err(bad(format!("missing `{TENSOR_MAGIC}` header")));
    }
    let shape_line = lines.next().ok_or_else(|| bad("missing shape line".into()))?;
    let shape = shape_line
        .strip_prefix("shape")
        .ok_or_else(|| bad(format!("expected `shape ...`, got `{shape_line}`")))?
        .split_whitespace()
        .map(|d| d.parse::<usize>().map_err(|e| bad(format!("dimension `{d}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut scale = DEFAULT_SCALE;
    let mut data = Vec::new();
    for (i, line) in lines.enumerate() {
        if i == 0 {
            if let Some(s) = line.strip_prefix("scale") {
                scale = s.trim().parse().map_err(|e| bad(format!("scale `{s}`: {e}")))?;
                continue;
            }
        }
        let v: f64 = line.parse().map_err(|e| bad(format!("value `{line}`: {e}")))?;
        data.push(v);
    }
    Ok(TensorFile {
        tensor: FloatTensor::new(shape, data)?,
        scale,
    })
}

pub fn read_tensor(path: &Path) -> Result<TensorFile> {
    parse_tensor(&std::fs::read_to_string(path)?)
}

pub fn write_tensor(path: &Path, tensor: &FloatTensor, scale: u32) -> Result<()> {
    std::fs::write(path, format_tensor(tensor, scale))?;
    Ok(())
}
