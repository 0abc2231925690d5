//! Bundled configs and reduced copies of them for short runs.

use std::fs;
use std::path::{Path, PathBuf};

use beam_core::experiment::RunOptions;

pub const BUNDLED: [&str; 5] = ["bimodal", "ring", "grid", "mnist_continuous", "mnist_binary"];

pub fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.cfg"))
}

/// Copy of a bundled config in `dir` with some keys replaced. A relative
/// `dataset.path` is made absolute so it still resolves from `dir`.
pub fn derived(name: &str, dir: &Path, overrides: &[(&str, &str)]) -> PathBuf {
    let src = bundled(name);
    let base = src.parent().unwrap().canonicalize().unwrap();
    let mut out = String::new();
    for line in fs::read_to_string(&src).unwrap().lines() {
        let key = line.split('=').next().unwrap().trim();
        if overrides.iter().any(|(k, _)| *k == key) {
            continue;
        }
        if key == "dataset.path" {
            let rel = line.split_once('=').unwrap().1.trim();
            out.push_str(&format!("dataset.path = {}\n", base.join(rel).display()));
        } else {
            out.push_str(line);
            out.push('\n');
        }
    }
    for (k, v) in overrides {
        out.push_str(&format!("{k} = {v}\n"));
    }
    let path = dir.join(format!("{name}.cfg"));
    fs::write(&path, out).unwrap();
    path
}

/// Shrinks a bundled config to a few seconds of work: fewer rows, two epochs,
/// a checkpoint after the first. Model, sampler and critic settings are kept.
pub fn reduced(name: &str, dir: &Path) -> (PathBuf, &'static str) {
    let mut overrides = vec![("output.checkpoint_every", "1"), ("output.sample_every", "1")];
    let epochs = if name.starts_with("mnist") {
        overrides.push(("dataset.limit", "1000"));
        overrides.push(("monitor.minibatch", "100"));
        "1+1"
    } else {
        if name == "grid" {
            overrides.push(("dataset.samples", "5000"));
        }
        "2"
    };
    (derived(name, dir, &overrides), epochs)
}

pub fn opts(out: &Path, epochs: &str) -> RunOptions {
    RunOptions {
        out_dir: Some(out.to_path_buf()),
        epochs_override: Some(epochs.to_string()),
        ..RunOptions::default()
    }
}

pub fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}
