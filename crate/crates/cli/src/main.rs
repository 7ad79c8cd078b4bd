//! Command-line front end: every subcommand is a thin wrapper over the
//! library.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ocrprobe::grounding::{analyze_page, gain_summary, read_token_log, TokenGainRecord};
use ocrprobe::harness::config::load_predictions;
use ocrprobe::harness::correction::read_corrected;
use ocrprobe::harness::rq3::{length_ratios, run_length_abstain};
use ocrprobe::harness::stimuli::write_perturbation_suite;
use ocrprobe::harness::{ingest_corpus, load_config, run_report};
use ocrprobe::interventions::{
    build_script_mask, calibrate_abstention_threshold, contrast_replay, read_replay, read_vocab,
    write_mask_bits, ContrastMethod, ContrastiveParams, MaskSummary, DEFAULT_MASK_PUNCTUATION,
};
use ocrprobe::metrics::{cer, summarize, wer};
use ocrprobe::stats::{delta_table, Direction};
use ocrprobe::taxonomy::{category_shares, write_error_csv, Classifier, Lexicon};
use ocrprobe::textnorm::{normalize_page_logged, tokenize_words, NormProfile};

#[derive(Parser)]
#[command(name = "ocrprobe", version, about = "Grounding analysis toolkit for OCR transcriptions of polytonic Greek")]
struct Cli {
    /// Normalization profile preset: raw, no-diac, or rq2.
    #[arg(long, global = true, default_value = "raw")]
    profile: String,

    /// Master seed for seeded operations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory for subcommands that write files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run configuration (JSON), used by the report subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize text from a file (or stdin) to stdout.
    Normalize {
        /// Input file; stdin when omitted.
        input: Option<PathBuf>,
    },
    /// Score predictions against ground truth: per-page CER/WER plus
    /// per-system summaries.
    Score {
        /// Directory with one UTF-8 .txt file per page.
        #[arg(long)]
        gt: PathBuf,
        /// Prediction files (JSONL: page_id, system_id, text). Repeatable.
        #[arg(long = "pred", required = true)]
        predictions: Vec<PathBuf>,
    },
    /// Classify every mismatch into the eight error categories.
    Classify {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long = "pred", required = true)]
        predictions: Vec<PathBuf>,
        /// Lexicon file: UTF-8, one surface form per line.
        #[arg(long)]
        lexicon: PathBuf,
    },
    /// Generate the full perturbation condition suite for documents.
    Perturb {
        /// Plain-text documents, one paragraph per line; the file stem is
        /// the document id.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Token-level image-gain attribution from an exported token log.
    Gain {
        #[arg(long)]
        gt: PathBuf,
        /// Token log (JSONL), possibly covering many pages.
        #[arg(long)]
        log: PathBuf,
    },
    /// Build the script-restriction mask for a vocabulary.
    Mask {
        /// Vocabulary file (JSONL: token_id, decoded, is_special).
        #[arg(long)]
        vocab: PathBuf,
        /// Optional punctuation override: UTF-8 file, one character per
        /// line.
        #[arg(long)]
        punctuation: Option<PathBuf>,
    },
    /// Length-abstention report for one system's predictions.
    Abstain {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long = "pred")]
        predictions: PathBuf,
        #[arg(long)]
        system: String,
        /// Fixed threshold for the prediction/reference length ratio.
        #[arg(long)]
        threshold: Option<f64>,
        /// Calibrate the threshold to approximately this abstention rate.
        #[arg(long)]
        target_rate: Option<f64>,
    },
    /// Replay exported per-step logit pairs through a contrastive
    /// transform.
    ContrastReplay {
        /// Replay file (JSONL: step, primary, contrast).
        #[arg(long)]
        replay: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Apply the script mask built from this vocabulary.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Paired delta table from two per-page rate CSVs (columns
    /// page_id,rate).
    Stats {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        treated: PathBuf,
        #[arg(long, value_enum, default_value_t = DirectionArg::TreatedLess)]
        direction: DirectionArg,
    },
    /// Run every analysis configured in the JSON config file passed via
    /// the global --config flag.
    Report,
    /// Emit or score the external post-OCR correction contract.
    Correct {
        #[command(subcommand)]
        action: CorrectAction,
    },
}

#[derive(Subcommand)]
enum CorrectAction {
    /// Emit correction requests for one system.
    Emit {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long = "pred")]
        predictions: PathBuf,
        #[arg(long)]
        system: String,
        /// JSON file with the fixed few-shot exemplars
        /// ([{"input":..,"output":..}, ..]).
        #[arg(long)]
        exemplars: Option<PathBuf>,
    },
    /// Score corrected output against its baseline.
    Score {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        corrected: PathBuf,
        #[arg(long)]
        system: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Vcd,
    M3id,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    TreatedGreater,
    TreatedLess,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::TreatedGreater => Direction::TreatedGreater,
            DirectionArg::TreatedLess => Direction::TreatedLess,
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let profile = NormProfile::preset(&cli.profile)
        .with_context(|| format!("unknown profile preset {:?}", cli.profile))?;

    match cli.command {
        Command::Normalize { input } => {
            let text = match input {
                Some(path) => fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?,
                None => {
                    let mut buf = String::new();
                    std::io::stdin().read_to_string(&mut buf)?;
                    buf
                }
            };
            let (normalized, warnings) = normalize_page_logged(&text, &profile);
            for w in warnings {
                eprintln!("warning: byte {}: {}", w.offset, w.message);
            }
            print!("{normalized}");
            Ok(())
        }

        Command::Score { gt, predictions } => {
            let out = require_out(&cli.out)?;
            let (corpus, warnings) = ingest_corpus(&gt, &predictions)?;
            print_warnings(&warnings);
            fs::create_dir_all(&out)?;

            let mut w = csv::Writer::from_path(out.join("per_page.csv"))?;
            w.write_record(["page_id", "system_id", "cer", "wer"])?;
            let mut summaries = BTreeMap::new();
            for system in corpus.systems() {
                let mut cers = Vec::new();
                let mut wers = Vec::new();
                for page in corpus.pages_with(&system) {
                    let hyp = &page.predictions[&system];
                    let c = cer(&page.gt_text, hyp, &profile)?;
                    let r = wer(&page.gt_text, hyp, &profile)?;
                    w.write_record([
                        page.page_id.as_str(),
                        system.as_str(),
                        &c.to_string(),
                        &r.to_string(),
                    ])?;
                    cers.push(c);
                    wers.push(r);
                }
                summaries.insert(
                    system.clone(),
                    serde_json::json!({
                        "profile": cli.profile,
                        "cer": summarize(&cers)?,
                        "wer": summarize(&wers)?,
                    }),
                );
            }
            w.flush()?;
            let file = fs::File::create(out.join("summary.json"))?;
            serde_json::to_writer_pretty(file, &summaries)?;
            println!(
                "scored {} systems over {} pages -> {}",
                summaries.len(),
                corpus.len(),
                out.display()
            );
            Ok(())
        }

        Command::Classify { gt, predictions, lexicon } => {
            let out = require_out(&cli.out)?;
            let lexicon = Lexicon::from_reader(fs::File::open(&lexicon)?)?;
            println!("lexicon: {} bare forms", lexicon.len());
            let classifier = Classifier::new(lexicon);
            let (corpus, warnings) = ingest_corpus(&gt, &predictions)?;
            print_warnings(&warnings);
            fs::create_dir_all(&out)?;

            let mut records = Vec::new();
            let mut shares_rows = Vec::new();
            for system in corpus.systems() {
                let mut sys_records = Vec::new();
                let mut gt_words = 0usize;
                for page in corpus.pages_with(&system) {
                    let gt_norm = ocrprobe::textnorm::normalize_page(&page.gt_text, &profile);
                    let hyp_norm = ocrprobe::textnorm::normalize_page(
                        &page.predictions[&system],
                        &profile,
                    );
                    gt_words += tokenize_words(&gt_norm).len();
                    let ops = ocrprobe::align::align_words(
                        &tokenize_words(&gt_norm),
                        &tokenize_words(&hyp_norm),
                    );
                    sys_records.extend(classifier.classify_page(&ops, &page.page_id, &system));
                }
                for share in category_shares(&sys_records, gt_words)? {
                    shares_rows.push((system.clone(), gt_words, share));
                }
                records.extend(sys_records);
            }

            let file = fs::File::create(out.join("errors.csv"))?;
            write_error_csv(&records, file)?;

            let mut w = csv::Writer::from_path(out.join("category_shares.csv"))?;
            w.write_record([
                "system_id",
                "gt_words",
                "category",
                "count",
                "share",
                "rate_per_1000",
            ])?;
            for (system, gt_words, share) in shares_rows {
                w.write_record([
                    system.as_str(),
                    &gt_words.to_string(),
                    share.kind.as_str(),
                    &share.count.to_string(),
                    &share.share.to_string(),
                    &share.rate_per_1000.to_string(),
                ])?;
            }
            w.flush()?;
            println!("classified {} errors -> {}", records.len(), out.display());
            Ok(())
        }

        Command::Perturb { inputs } => {
            let out = require_out(&cli.out)?;
            let mut docs = Vec::new();
            for path in inputs {
                let doc_id = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .with_context(|| format!("unreadable file name {}", path.display()))?
                    .to_string();
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                docs.push((doc_id, text));
            }
            let manifest = write_perturbation_suite(&docs, cli.seed, &out)?;
            println!(
                "wrote {} files across {} conditions -> {}",
                manifest.entries.len(),
                ocrprobe::perturb::suite_conditions().len(),
                out.display()
            );
            Ok(())
        }

        Command::Gain { gt, log } => {
            let out = require_out(&cli.out)?;
            fs::create_dir_all(&out)?;
            let records = read_token_log(BufReader::new(fs::File::open(&log)?))?;
            let mut by_page: BTreeMap<String, Vec<_>> = BTreeMap::new();
            for r in records {
                by_page.entry(r.page_id.clone()).or_default().push(r);
            }

            let mut all: Vec<(String, TokenGainRecord)> = Vec::new();
            for (page_id, page_log) in &by_page {
                let gt_path = gt.join(format!("{page_id}.txt"));
                let gt_text = fs::read_to_string(&gt_path)
                    .with_context(|| format!("reading {}", gt_path.display()))?;
                for record in analyze_page(&gt_text, page_log)? {
                    all.push((page_id.clone(), record));
                }
            }

            let mut w = csv::Writer::from_path(out.join("gain_records.csv"))?;
            w.write_record([
                "page_id",
                "token_index",
                "token_text",
                "label",
                "subtype",
                "within_greek",
                "valid",
                "logp_cond",
                "logp_free",
                "gain",
                "top1_prob",
                "entropy",
            ])?;
            for (page_id, r) in &all {
                w.write_record([
                    page_id.as_str(),
                    &r.token_index.to_string(),
                    r.token_text.as_str(),
                    &format!("{:?}", r.label).to_lowercase(),
                    &r.subtype.map(|s| format!("{s:?}").to_lowercase()).unwrap_or_default(),
                    &r.within_greek.to_string(),
                    &r.valid.to_string(),
                    &r.logp_cond.to_string(),
                    &r.logp_free.to_string(),
                    &r.gain.to_string(),
                    &r.top1_prob.to_string(),
                    &r.entropy.to_string(),
                ])?;
            }
            w.flush()?;

            // Summaries merge page records by concatenation before the
            // median.
            let pooled: Vec<TokenGainRecord> = all.into_iter().map(|(_, r)| r).collect();
            let summary = gain_summary(&pooled);
            let file = fs::File::create(out.join("gain_summary.json"))?;
            serde_json::to_writer_pretty(file, &summary)?;
            let calibration = ocrprobe::grounding::calibration_summary(&pooled);
            let file = fs::File::create(out.join("calibration_summary.json"))?;
            serde_json::to_writer_pretty(file, &calibration)?;
            println!(
                "analyzed {} tokens on {} pages -> {}",
                pooled.len(),
                by_page.len(),
                out.display()
            );
            Ok(())
        }

        Command::Mask { vocab, punctuation } => {
            let out = require_out(&cli.out)?;
            fs::create_dir_all(&out)?;
            let vocab = read_vocab(BufReader::new(fs::File::open(&vocab)?))?;
            let punct: Vec<char> = match punctuation {
                Some(path) => fs::read_to_string(&path)?
                    .lines()
                    .filter_map(|l| l.chars().next())
                    .collect(),
                None => DEFAULT_MASK_PUNCTUATION.to_vec(),
            };
            let mask = build_script_mask(&vocab, &punct);
            let file = fs::File::create(out.join("mask.bits"))?;
            write_mask_bits(&mask, file)?;
            let summary = MaskSummary::of(&mask);
            let file = fs::File::create(out.join("mask_summary.json"))?;
            serde_json::to_writer_pretty(file, &summary)?;
            println!(
                "mask over {} tokens: {} allowed, {} masked -> {}",
                summary.total,
                summary.allowed,
                summary.masked,
                out.display()
            );
            Ok(())
        }

        Command::Abstain { gt, predictions, system, threshold, target_rate } => {
            let (corpus, warnings) = ingest_corpus(&gt, &[])?;
            print_warnings(&warnings);
            let preds = load_predictions(&predictions, &system)?;
            if preds.is_empty() {
                bail!("no predictions for system {system} in {}", predictions.display());
            }
            let threshold = match (threshold, target_rate) {
                (Some(t), _) => t,
                (None, Some(rate)) => {
                    calibrate_abstention_threshold(&length_ratios(&corpus, &preds)?, rate)
                }
                (None, None) => 1.5,
            };
            let report = run_length_abstain(&corpus, &system, &preds, threshold, &profile)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }

        Command::ContrastReplay { replay, method, alpha, beta, gamma, vocab } => {
            let steps = read_replay(BufReader::new(fs::File::open(&replay)?))?;
            let (method, mut params) = match method {
                MethodArg::Vcd => (ContrastMethod::Vcd, ContrastiveParams::vcd_default()),
                MethodArg::M3id => (ContrastMethod::M3id, ContrastiveParams::m3id_default()),
            };
            if let Some(a) = alpha {
                params.alpha = a;
            }
            if let Some(b) = beta {
                params.beta = b;
            }
            if let Some(g) = gamma {
                params.gamma = g;
            }
            let mask = match &vocab {
                Some(path) => {
                    let vocab = read_vocab(BufReader::new(fs::File::open(path)?))?;
                    Some(build_script_mask(&vocab, &DEFAULT_MASK_PUNCTUATION))
                }
                None => None,
            };
            let choices = contrast_replay(&steps, method, &params, mask.as_deref())?;
            let mut stdout = std::io::stdout().lock();
            for choice in &choices {
                serde_json::to_writer(&mut stdout, choice)?;
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }

        Command::Stats { baseline, treated, direction } => {
            let base = read_rate_csv(&baseline)?;
            let treat = read_rate_csv(&treated)?;
            let summary = delta_table(&base, &treat, direction.into())?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }

        Command::Report => {
            let config_path = cli
                .config
                .context("report needs a configuration; pass --config <file>")?;
            let config = load_config(&config_path)?;
            let warnings = run_report(&config)?;
            print_warnings(&warnings);
            println!("report complete -> {}", config.out_dir.display());
            Ok(())
        }

        Command::Correct { action } => match action {
            CorrectAction::Emit { gt, predictions, system, exemplars } => {
                let out = require_out(&cli.out)?;
                fs::create_dir_all(&out)?;
                let (corpus, warnings) = ingest_corpus(&gt, &[predictions])?;
                print_warnings(&warnings);
                let exemplars = match exemplars {
                    Some(path) => serde_json::from_reader(fs::File::open(&path)?)?,
                    None => Vec::new(),
                };
                let file = fs::File::create(out.join("correction_requests.jsonl"))?;
                let n = ocrprobe::harness::correction::emit_correction_requests(
                    &corpus, &system, &exemplars, file,
                )?;
                println!("emitted {n} correction requests -> {}", out.display());
                Ok(())
            }
            CorrectAction::Score { gt, baseline, corrected, system } => {
                let (corpus, warnings) = ingest_corpus(&gt, &[])?;
                print_warnings(&warnings);
                let base = load_predictions(&baseline, &system)?;
                let corrected = read_corrected(BufReader::new(fs::File::open(&corrected)?))?;
                let treated = corrected
                    .get(&system)
                    .with_context(|| format!("no corrected output for system {system}"))?;
                let cells = vec![ocrprobe::harness::rq3::Rq3Cell {
                    system_id: system.clone(),
                    intervention: "lm-correct".to_string(),
                    baseline: base,
                    treated: treated.clone(),
                }];
                let rows = ocrprobe::harness::rq3::run_rq3(&corpus, &cells, &profile, None)?;
                println!("{}", serde_json::to_string_pretty(&rows)?);
                Ok(())
            }
        },
    }
}

fn require_out(out: &Option<PathBuf>) -> Result<PathBuf> {
    out.clone().context("this subcommand writes files; pass --out <dir>")
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn read_rate_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let page = record
            .get(0)
            .with_context(|| format!("{}: missing page_id column", path.display()))?;
        let rate: f64 = record
            .get(1)
            .with_context(|| format!("{}: missing rate column", path.display()))?
            .parse()
            .with_context(|| format!("{}: bad rate for page {page}", path.display()))?;
        map.insert(page.to_string(), rate);
    }
    Ok(map)
}
