#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relsynth::write_dataset;
use relsynth_core::fixtures::toy_fidelity;

/// Writes the toy dataset into `dir` and returns its schema path.
pub fn write_toy(dir: &Path, seed: u64) -> PathBuf {
    write_dataset(&toy_fidelity(seed), dir, "toy").unwrap()
}

pub fn relsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relsynth")).args(args).output().unwrap()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
