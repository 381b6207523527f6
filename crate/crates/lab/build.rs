//! Embeds a content digest of the workspace sources into the binary so run
//! manifests can record exactly which code version produced them.

use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            collect(&path, out);
        } else if path.extension().is_some_and(|e| e == "rs" || e == "toml") {
            out.push(path);
        }
    }
}

fn main() {
    let mut files = Vec::new();
    for root in ["src", "tests", "../core/src", "../core/tests"] {
        collect(Path::new(root), &mut files);
    }
    for extra in ["build.rs", "Cargo.toml", "../core/Cargo.toml", "../../Cargo.toml"] {
        let p = PathBuf::from(extra);
        if p.is_file() {
            files.push(p);
        }
    }
    files.sort();

    let mut hasher = Sha256::new();
    for file in &files {
        hasher.update(file.to_string_lossy().as_bytes());
        hasher.update([0u8]);
        hasher.update(fs::read(file).unwrap_or_default());
        hasher.update([0u8]);
        println!("cargo:rerun-if-changed={}", file.display());
    }
    let digest = hasher.finalize();
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    println!("cargo:rustc-env=DGPO_SOURCE_DIGEST={hex}");
}
