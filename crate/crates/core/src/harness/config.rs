//! Run configuration and end-to-end report orchestration.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::correction::{emit_correction_requests, CorrectionExemplar};
use crate::harness::corpus::{ingest_corpus, Corpus, PredictionLine};
use crate::harness::lock::RunLock;
use crate::harness::rq1::run_rq1;
use crate::harness::rq2::run_rq2;
use crate::harness::rq3::{run_length_abstain, run_rq3, Rq3Cell};
use crate::interventions::{calibrate_abstention_threshold, ContrastiveParams};
use crate::taxonomy::{Classifier, Lexicon};
use crate::textnorm::NormProfile;

/// Scoring profile in a config: a preset name (`raw`, `no-diac`, `rq2`) or
/// a full inline profile object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileChoice {
    Preset(String),
    Inline(NormProfile),
}

impl ProfileChoice {
    pub fn resolve(&self) -> Result<NormProfile> {
        match self {
            ProfileChoice::Preset(name) => NormProfile::preset(name)
                .ok_or_else(|| Error::Config(format!("unknown profile preset {name:?}"))),
            ProfileChoice::Inline(profile) => Ok(profile.clone()),
        }
    }
}

/// Full configuration of a report run, loaded from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Profile used for intervention scoring: a preset name or an inline
    /// profile object.
    #[serde(default = "default_profile")]
    pub profile: ProfileChoice,
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "ContrastiveParams::vcd_default")]
    pub vcd: ContrastiveParams,
    #[serde(default = "ContrastiveParams::m3id_default")]
    pub m3id: ContrastiveParams,
    #[serde(default = "default_abstain_threshold")]
    pub abstain_threshold: f64,
    pub rq1: Option<Rq1Config>,
    pub rq2: Option<Rq2Config>,
    pub rq3: Option<Rq3Config>,
}

fn default_profile() -> ProfileChoice {
    ProfileChoice::Preset("raw".to_string())
}

fn default_abstain_threshold() -> f64 {
    1.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rq1Config {
    pub gt_dir: PathBuf,
    pub predictions: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rq2Config {
    /// Condition name (e.g. `original`, `test2_random`) to its inputs.
    pub conditions: BTreeMap<String, ConditionInput>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionInput {
    pub gt_dir: PathBuf,
    pub predictions: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rq3Config {
    pub gt_dir: PathBuf,
    #[serde(default)]
    pub interventions: Vec<InterventionInput>,
    #[serde(default)]
    pub abstain: Vec<AbstainInput>,
    #[serde(default)]
    pub correction_requests: Option<CorrectionEmitConfig>,
}

/// One (system, intervention) cell: treated predictions and the matched
/// baseline from the same engine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterventionInput {
    pub name: String,
    pub system_id: String,
    pub baseline: PathBuf,
    pub treated: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbstainInput {
    pub system_id: String,
    pub predictions: PathBuf,
    /// Fixed threshold; when absent, `target_rate` calibrates one.
    pub threshold: Option<f64>,
    pub target_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionEmitConfig {
    pub system_id: String,
    pub predictions: PathBuf,
    #[serde(default)]
    pub exemplars: Vec<CorrectionExemplar>,
}

/// Load and validate a config: every referenced input path must exist.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let file = fs::File::open(path)?;
    let config: RunConfig = serde_json::from_reader(BufReader::new(file))?;
    validate_config(&config)?;
    Ok(config)
}

fn validate_config(config: &RunConfig) -> Result<()> {
    config.profile.resolve()?;
    let mut paths: Vec<&Path> = Vec::new();
    if let Some(p) = &config.lexicon {
        paths.push(p);
    }
    if let Some(rq1) = &config.rq1 {
        paths.push(&rq1.gt_dir);
        paths.extend(rq1.predictions.iter().map(PathBuf::as_path));
    }
    if let Some(rq2) = &config.rq2 {
        for input in rq2.conditions.values() {
            paths.push(&input.gt_dir);
            paths.extend(input.predictions.iter().map(PathBuf::as_path));
        }
    }
    if let Some(rq3) = &config.rq3 {
        paths.push(&rq3.gt_dir);
        for i in &rq3.interventions {
            paths.push(&i.baseline);
            paths.push(&i.treated);
        }
        for a in &rq3.abstain {
            paths.push(&a.predictions);
        }
        if let Some(c) = &rq3.correction_requests {
            paths.push(&c.predictions);
        }
    }
    for p in paths {
        if !p.exists() {
            return Err(Error::Config(format!("referenced path does not exist: {}", p.display())));
        }
    }
    Ok(())
}

/// Load a predictions file and keep only one system's lines as a page map.
pub fn load_predictions(path: &Path, system_id: &str) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pred: PredictionLine = serde_json::from_str(line).map_err(|e| Error::JsonLine {
            line: i + 1,
            path: Some(path.display().to_string()),
            message: e.to_string(),
        })?;
        if pred.system_id != system_id {
            continue;
        }
        if map.contains_key(&pred.page_id) {
            return Err(Error::DuplicatePrediction { page: pred.page_id, system: pred.system_id });
        }
        map.insert(pred.page_id, pred.text);
    }
    Ok(map)
}

/// Run every configured analysis into the locked output directory. Returns
/// ingestion warnings; any error aborts the run with a non-zero exit at the
/// CLI layer.
pub fn run_report(config: &RunConfig) -> Result<Vec<String>> {
    let _lock = RunLock::acquire(&config.out_dir)?;
    let mut warnings = Vec::new();
    let profile = config.profile.resolve()?;

    if let Some(rq1) = &config.rq1 {
        let lexicon_path = config
            .lexicon
            .as_ref()
            .ok_or_else(|| Error::Config("rq1 requires a lexicon".to_string()))?;
        let lexicon = Lexicon::from_reader(fs::File::open(lexicon_path)?)?;
        let classifier = Classifier::new(lexicon);
        let (corpus, mut w) = ingest_corpus(&rq1.gt_dir, &rq1.predictions)?;
        warnings.append(&mut w);
        run_rq1(&corpus, &classifier, Some(&config.out_dir))?;
    }

    if let Some(rq2) = &config.rq2 {
        let mut conditions: BTreeMap<String, Corpus> = BTreeMap::new();
        for (name, input) in &rq2.conditions {
            let (corpus, mut w) = ingest_corpus(&input.gt_dir, &input.predictions)?;
            warnings.append(&mut w);
            conditions.insert(name.clone(), corpus);
        }
        run_rq2(&conditions, &NormProfile::rq2(), Some(&config.out_dir))?;
    }

    if let Some(rq3) = &config.rq3 {
        let (corpus, mut w) = ingest_corpus(&rq3.gt_dir, &[])?;
        warnings.append(&mut w);

        let mut cells = Vec::new();
        for input in &rq3.interventions {
            cells.push(Rq3Cell {
                system_id: input.system_id.clone(),
                intervention: input.name.clone(),
                baseline: load_predictions(&input.baseline, &input.system_id)?,
                treated: load_predictions(&input.treated, &input.system_id)?,
            });
        }
        if !cells.is_empty() {
            run_rq3(&corpus, &cells, &profile, Some(&config.out_dir))?;
        }

        let mut abstain_reports = Vec::new();
        for input in &rq3.abstain {
            let predictions = load_predictions(&input.predictions, &input.system_id)?;
            let threshold = match (input.threshold, input.target_rate) {
                (Some(t), _) => t,
                (None, Some(rate)) => {
                    let ratios = crate::harness::rq3::length_ratios(&corpus, &predictions)?;
                    calibrate_abstention_threshold(&ratios, rate)
                }
                (None, None) => config.abstain_threshold,
            };
            abstain_reports.push(run_length_abstain(
                &corpus,
                &input.system_id,
                &predictions,
                threshold,
                &profile,
            )?);
        }
        if !abstain_reports.is_empty() {
            let file = fs::File::create(config.out_dir.join("rq3_abstain.json"))?;
            serde_json::to_writer_pretty(file, &abstain_reports)?;
        }

        if let Some(emit) = &rq3.correction_requests {
            let (pred_corpus, mut w) =
                ingest_corpus(&rq3.gt_dir, std::slice::from_ref(&emit.predictions))?;
            warnings.append(&mut w);
            let file = fs::File::create(config.out_dir.join("correction_requests.jsonl"))?;
            emit_correction_requests(&pred_corpus, &emit.system_id, &emit.exemplars, file)?;
        }
    }

    if !warnings.is_empty() {
        fs::write(config.out_dir.join("warnings.txt"), warnings.join("\n"))?;
    }
    Ok(warnings)
}
