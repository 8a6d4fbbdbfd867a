//! Content-hash keyed stage caching. Every expensive artifact is written next
//! to a `.key` sidecar holding the hash of everything that produced it; a
//! matching sidecar lets a rerun skip the work.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::hex_digest;

/// Hash of ordered string parts plus upstream file contents.
pub fn cache_key(parts: &[&str], upstream: &[&Path]) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    for path in upstream {
        hasher.update(std::fs::read(path)?);
        hasher.update([1u8]);
    }
    Ok(hex_digest(&hasher.finalize()))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".key");
    PathBuf::from(s)
}

/// True when `path` exists and its sidecar matches `key`.
pub fn is_fresh(path: &Path, key: &str) -> bool {
    path.exists()
        && std::fs::read_to_string(sidecar(path))
            .map(|k| k.trim() == key)
            .unwrap_or(false)
}

/// Records the key after the artifact has been written.
pub fn mark(path: &Path, key: &str) -> std::io::Result<()> {
    std::fs::write(sidecar(path), key)
}
