//! Writing perturbed stimuli to disk: one `{condition}/{doc_id}.txt` per
//! condition plus a manifest recording spec, seed, and content hash per
//! file. The rendered-page pipeline consumes these files; rendering itself
//! is out of scope here.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::perturb::{condition_spec, perturb, suite_conditions, PerturbSpec};

/// Manifest line for one written file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub condition: String,
    pub doc_id: String,
    pub spec: PerturbSpec,
    pub sha256: String,
    pub path: String,
}

/// Top-level manifest written next to the condition directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub entries: Vec<ManifestEntry>,
}

/// Generate the full condition suite for every document and write it under
/// `out_dir`, returning the manifest (also written as `manifest.json`).
pub fn write_perturbation_suite(
    docs: &[(String, String)],
    master_seed: u64,
    out_dir: &Path,
) -> Result<Manifest> {
    let mut entries = Vec::new();
    for condition in suite_conditions() {
        let spec = condition_spec(&condition, master_seed).expect("known condition");
        let dir = out_dir.join(&condition);
        fs::create_dir_all(&dir)?;
        for (doc_id, text) in docs {
            let output = perturb(text, &spec);
            let rel = format!("{condition}/{doc_id}.txt");
            fs::write(out_dir.join(&rel), &output)?;
            entries.push(ManifestEntry {
                condition: condition.clone(),
                doc_id: doc_id.clone(),
                spec,
                sha256: hex_digest(&output),
                path: rel,
            });
        }
    }
    let manifest = Manifest { master_seed, entries };
    let file = fs::File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(file, &manifest)?;
    Ok(manifest)
}

fn hex_digest(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_writes_all_conditions_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let docs = vec![
            ("doc1".to_string(), "καὶ νῦν ὁ θεός.".to_string()),
            ("doc2".to_string(), "ὁ λόγος ἦν.".to_string()),
        ];
        let manifest = write_perturbation_suite(&docs, 7, dir.path()).unwrap();
        assert_eq!(manifest.entries.len(), 19 * 2);
        assert!(dir.path().join("original/doc1.txt").exists());
        assert!(dir.path().join("test2_random/doc2.txt").exists());
        assert!(dir.path().join("manifest.json").exists());

        // Hashes match the written content.
        for entry in &manifest.entries {
            let content = fs::read_to_string(dir.path().join(&entry.path)).unwrap();
            assert_eq!(hex_digest(&content), entry.sha256);
        }

        // Rerun with the same seed reproduces byte-identical stimuli.
        let dir2 = tempfile::tempdir().unwrap();
        let manifest2 = write_perturbation_suite(&docs, 7, dir2.path()).unwrap();
        assert_eq!(manifest, manifest2);
    }
}
