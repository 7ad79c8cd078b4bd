//! Corpus ingestion: one UTF-8 ground-truth text file per page plus
//! line-delimited JSON prediction files (`{page_id, system_id, text}` per
//! line). An optional `pages.jsonl` in the ground-truth directory supplies
//! per-page edition ids and layout flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Page layout flag; two-column pages are excluded from perturbation
/// scoring because column reading order confounds grounding. The flag comes
/// from metadata, never from text inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    SingleColumn,
    TwoColumn,
    #[default]
    Unknown,
}

/// One page: identifier, reference transcription, and per-system
/// predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRecord {
    pub page_id: String,
    pub edition_id: String,
    pub gt_text: String,
    pub predictions: BTreeMap<String, String>,
    pub layout: Layout,
}

/// Pages sorted by page id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pages: Vec<PageRecord>,
}

impl Corpus {
    /// Build a corpus from records; page ids must be unique and ground
    /// truth non-empty.
    pub fn from_pages(mut pages: Vec<PageRecord>) -> Result<Self> {
        pages.sort_by(|a, b| a.page_id.cmp(&b.page_id));
        for pair in pages.windows(2) {
            if pair[0].page_id == pair[1].page_id {
                return Err(Error::DuplicatePage(pair[0].page_id.clone()));
            }
        }
        for page in &pages {
            if page.gt_text.trim().is_empty() {
                return Err(Error::EmptyGroundTruth(page.page_id.clone()));
            }
        }
        Ok(Corpus { pages })
    }

    pub fn pages(&self) -> &[PageRecord] {
        &self.pages
    }

    pub fn page(&self, page_id: &str) -> Option<&PageRecord> {
        self.pages
            .binary_search_by(|p| p.page_id.as_str().cmp(page_id))
            .ok()
            .map(|i| &self.pages[i])
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    /// All system ids appearing in any prediction.
    pub fn systems(&self) -> BTreeSet<String> {
        self.pages
            .iter()
            .flat_map(|p| p.predictions.keys().cloned())
            .collect()
    }

    /// Pages that carry a prediction for `system_id`.
    pub fn pages_with<'a>(&'a self, system_id: &'a str) -> impl Iterator<Item = &'a PageRecord> {
        self.pages
            .iter()
            .filter(move |p| p.predictions.contains_key(system_id))
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub page_id: String,
    pub system_id: String,
    pub text: String,
}

/// Optional per-page metadata, one JSON object per line of `pages.jsonl`.
#[derive(Debug, Clone, Deserialize)]
pub struct PageMeta {
    pub page_id: String,
    #[serde(default)]
    pub edition_id: String,
    #[serde(default)]
    pub layout: Layout,
}

/// Name of the optional metadata file inside the ground-truth directory.
pub const PAGE_META_FILE: &str = "pages.jsonl";

/// Load ground truth and predictions into a corpus.
///
/// Ground truth is one `.txt` file per page (the file stem is the page id).
/// Duplicate page ids and encoding errors are hard errors; pages missing a
/// prediction for some system are only reported in the returned warnings,
/// since they are excluded from paired analyses but usable elsewhere.
pub fn ingest_corpus(gt_dir: &Path, prediction_files: &[PathBuf]) -> Result<(Corpus, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut pages: BTreeMap<String, PageRecord> = BTreeMap::new();

    let mut entries: Vec<PathBuf> = fs::read_dir(gt_dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    entries.sort();

    for path in entries {
        let page_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::MissingInput(format!("unreadable file name {path:?}")))?
            .to_string();
        let text = read_utf8(&path)?;
        if text.trim().is_empty() {
            return Err(Error::EmptyGroundTruth(page_id));
        }
        if pages.contains_key(&page_id) {
            return Err(Error::DuplicatePage(page_id));
        }
        pages.insert(
            page_id.clone(),
            PageRecord {
                page_id,
                edition_id: String::new(),
                gt_text: text,
                predictions: BTreeMap::new(),
                layout: Layout::Unknown,
            },
        );
    }

    let meta_path = gt_dir.join(PAGE_META_FILE);
    if meta_path.exists() {
        let text = read_utf8(&meta_path)?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let meta: PageMeta = serde_json::from_str(line).map_err(|e| Error::JsonLine {
                line: i + 1,
                path: Some(meta_path.display().to_string()),
                message: e.to_string(),
            })?;
            match pages.get_mut(&meta.page_id) {
                Some(page) => {
                    page.edition_id = meta.edition_id;
                    page.layout = meta.layout;
                }
                None => warnings.push(format!(
                    "metadata for unknown page {} ignored",
                    meta.page_id
                )),
            }
        }
    }

    for path in prediction_files {
        let text = read_utf8(path)?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let pred: PredictionLine = serde_json::from_str(line).map_err(|e| Error::JsonLine {
                line: i + 1,
                path: Some(path.display().to_string()),
                message: e.to_string(),
            })?;
            match pages.get_mut(&pred.page_id) {
                Some(page) => {
                    if page.predictions.contains_key(&pred.system_id) {
                        return Err(Error::DuplicatePrediction {
                            page: pred.page_id,
                            system: pred.system_id,
                        });
                    }
                    page.predictions.insert(pred.system_id, pred.text);
                }
                None => warnings.push(format!(
                    "prediction for unknown page {} (system {}) ignored",
                    pred.page_id, pred.system_id
                )),
            }
        }
    }

    let corpus = Corpus::from_pages(pages.into_values().collect())?;

    for system in corpus.systems() {
        let missing: Vec<&str> = corpus
            .pages()
            .iter()
            .filter(|p| !p.predictions.contains_key(&system))
            .map(|p| p.page_id.as_str())
            .collect();
        if !missing.is_empty() {
            warnings.push(format!(
                "system {system} missing on {} page(s) ({}); those pages are \
                 excluded from its paired analyses",
                missing.len(),
                missing.join(", ")
            ));
        }
    }

    Ok((corpus, warnings))
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    String::from_utf8(bytes).map_err(|e| Error::Encoding {
        offset: e.utf8_error().valid_up_to(),
        path: Some(path.display().to_string()),
    })
}
