//! I/O contract for external post-OCR text correction. The harness emits a
//! request file (one JSON object per page with the fixed few-shot
//! exemplars); the corrector — any text-only model — rewrites `text` and
//! returns standard prediction lines, which are then scored like any other
//! intervention.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::corpus::{Corpus, PredictionLine};

/// One fixed few-shot exemplar: a noisy transcription and its corrected
/// form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionExemplar {
    pub input: String,
    pub output: String,
}

/// One correction request line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRequest {
    pub system_id: String,
    pub page_id: String,
    pub text: String,
    pub exemplars: Vec<CorrectionExemplar>,
}

/// Emit one request per page carrying a prediction for `system_id`.
/// Returns the number of requests written.
pub fn emit_correction_requests<W: Write>(
    corpus: &Corpus,
    system_id: &str,
    exemplars: &[CorrectionExemplar],
    mut writer: W,
) -> Result<usize> {
    let mut n = 0;
    for page in corpus.pages_with(system_id) {
        let request = CorrectionRequest {
            system_id: system_id.to_string(),
            page_id: page.page_id.clone(),
            text: page.predictions[system_id].clone(),
            exemplars: exemplars.to_vec(),
        };
        serde_json::to_writer(&mut writer, &request)?;
        writer.write_all(b"\n")?;
        n += 1;
    }
    Ok(n)
}

/// Read corrected transcriptions (standard prediction lines) grouped by
/// system then page.
pub fn read_corrected<R: BufRead>(
    reader: R,
) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut corrected: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pred: PredictionLine = serde_json::from_str(&line).map_err(|e| Error::JsonLine {
            line: i + 1,
            path: None,
            message: e.to_string(),
        })?;
        let by_page = corrected.entry(pred.system_id.clone()).or_default();
        if by_page.contains_key(&pred.page_id) {
            return Err(Error::DuplicatePrediction {
                page: pred.page_id,
                system: pred.system_id,
            });
        }
        by_page.insert(pred.page_id, pred.text);
    }
    Ok(corrected)
}
