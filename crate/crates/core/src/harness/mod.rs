//! Tooling around the protocol: file formats, the tamper harness, the
//! benchmark runner and golden conformance vectors.

pub mod bench;
pub mod keyfile;
pub mod tamper;
pub mod tensor_file;
pub mod vectors;
