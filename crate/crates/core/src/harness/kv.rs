//! Tiny line-oriented key-value files: `key = value`, sorted, with a schema
//! header. Used for manifests, metrics, fragments and reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::config::SCHEMA_VERSION;

pub fn write_kv(path: &Path, pairs: &BTreeMap<String, String>) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&format!("schema = {SCHEMA_VERSION}\n"));
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())
}

pub fn read_kv(path: &Path) -> std::io::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            let key = k.trim();
            if key != "schema" {
                pairs.insert(key.to_string(), v.trim().to_string());
            }
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip_is_sorted_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.kv");
        let mut pairs = BTreeMap::new();
        pairs.insert("zeta".to_string(), "1".to_string());
        pairs.insert("alpha".to_string(), "two words".to_string());
        write_kv(&path, &pairs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("schema = 1\nalpha = two words\nzeta = 1\n"));
        assert_eq!(read_kv(&path).unwrap(), pairs);
        write_kv(&path, &pairs).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }
}
