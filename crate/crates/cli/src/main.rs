//! Command-line surface: every pipeline stage standalone, the full batch
//! run, the evaluation harnesses, and corpus preparation.
//!
//! Machine-readable output (JSON) goes to stdout, diagnostics to stderr.
//! Exit codes: 0 success, 1 run-level error, 2 usage error.

mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use scanlate_core::detect::{
    detection_report, load_detection_fixture, nms, CommandDetector, DetectorAdapter,
    EmptyImagePolicy, FixtureDetector, GroundTruthSet, PanelMeta,
};
use scanlate_core::geometry::BBox;
use scanlate_core::ocr::{
    eval::{load_transcripts, ocr_report, pair_transcripts, Averaging},
    preprocess_crop, recognize, CropId, FixtureOcr, OcrAdapter, OcrConfig, TesseractCli,
};
use scanlate_core::pipeline::{run_batch, FontChoice};
use scanlate_core::translate::{
    load_corpus_inputs, mt_report, prepare_corpus, translate, write_splits, CommandTranslator,
    DictTranslator, HttpTranslator, SplitRatios, TranslatorAdapter,
};
use scanlate_core::typeset::{
    clear_region, estimate_bubble_mask, fit_text, render_plan, FitConstraints, MaskOptions,
    PixelFont, TextFace, VectorFont,
};

use config::{load_config, parse_font_choice, PipelineOverrides};

#[derive(Parser)]
#[command(
    name = "scanlate",
    version,
    about = "Comic panel translation pipeline: bubble detection postprocessing, OCR, MT, typesetting, and metric harnesses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect speech bubbles in panel images (filtered + NMS), print detection JSON
    Detect(DetectArgs),
    /// Recognize text in one bubble crop
    Ocr(OcrArgs),
    /// Translate text through the configured backend
    Translate(TranslateArgs),
    /// Fit (and optionally render) text into a box on an image
    Typeset(TypesetArgs),
    /// Run the full pipeline over a directory of panels
    Run(RunArgs),
    /// Score detections against ground-truth annotations
    EvalDetect(EvalDetectArgs),
    /// Score OCR output with CER/WER
    EvalOcr(EvalOcrArgs),
    /// Score translations with BLEU/METEOR
    EvalMt(EvalMtArgs),
    /// Merge, dedupe, shuffle and split a parallel corpus
    CorpusPrep(CorpusPrepArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Panel images to run detection on
    #[arg(required = true, value_name = "IMAGE")]
    images: Vec<PathBuf>,
    /// External detector program given the panel image path (prints detection JSON)
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Detection fixture JSON replayed by the stub detector
    #[arg(long, value_name = "PATH", conflicts_with = "model")]
    fixture: Option<PathBuf>,
    #[arg(
        long,
        default_value_t = 0.25,
        value_name = "TAU",
        help = "Confidence threshold in [0,1]"
    )]
    conf: f64,
    #[arg(
        long = "iou-nms",
        default_value_t = 0.45,
        value_name = "TAU",
        help = "Non-maximum-suppression IoU threshold in [0,1]"
    )]
    iou_nms: f64,
    /// Human-readable output instead of JSON
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct OcrArgs {
    /// Bubble crop image
    #[arg(value_name = "IMAGE")]
    image: PathBuf,
    /// OCR language code
    #[arg(long, default_value = "ind", value_name = "LANG")]
    lang: String,
    /// OCR engine mode (0-3)
    #[arg(long, default_value_t = 3, value_name = "N")]
    oem: u8,
    /// OCR page segmentation mode (0-13)
    #[arg(long, default_value_t = 6, value_name = "N")]
    psm: u8,
    /// OCR fixture TSV replayed instead of the real engine
    #[arg(long = "ocr-stub", value_name = "PATH")]
    ocr_stub: Option<PathBuf>,
}

#[derive(Args)]
struct TranslateArgs {
    /// Text to translate
    #[arg(long, value_name = "TEXT", conflicts_with = "input")]
    text: Option<String>,
    /// File of lines to translate
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    #[arg(
        long = "mt-dict",
        value_name = "PATH",
        help = "Dictionary translator TSV (source<TAB>target, identity fallback)"
    )]
    mt_dict: Option<PathBuf>,
    /// Translation HTTP endpoint: POST {"text"} -> {"translation"}
    #[arg(long = "mt-url", value_name = "URL", conflicts_with = "mt_dict")]
    mt_url: Option<String>,
    /// External translator program: source on stdin, translation on stdout
    #[arg(long = "mt-model", value_name = "PATH", conflicts_with_all = ["mt_dict", "mt_url"])]
    mt_model: Option<PathBuf>,
}

#[derive(Args)]
struct TypesetArgs {
    /// Image to typeset onto
    #[arg(long, value_name = "IMAGE")]
    input: PathBuf,
    /// Target box as x1,y1,x2,y2 in pixels
    #[arg(long = "box", value_name = "X1,Y1,X2,Y2", value_parser = parse_box)]
    bbox: BBox,
    /// Text to fit
    #[arg(long, value_name = "TEXT")]
    text: String,
    /// Render font: "builtin" or a .ttf/.otf path; omit to print the plan only
    #[arg(long, value_name = "FONT")]
    font: Option<String>,
    /// Output image path (required when rendering)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Inner margin in pixels
    #[arg(long, default_value_t = 4.0, value_name = "PX")]
    margin: f32,
    /// Smallest font size tried
    #[arg(long = "min-size", default_value_t = 10.0, value_name = "PT")]
    min_size: f32,
    /// Largest font size tried
    #[arg(long = "max-size", default_value_t = 48.0, value_name = "PT")]
    max_size: f32,
    /// Fit search step
    #[arg(long = "size-step", default_value_t = 1.0, value_name = "PT")]
    size_step: f32,
}

#[derive(Args)]
struct RunArgs {
    /// Directory of panel images (png/jpg)
    #[arg(value_name = "INPUT_DIR")]
    input: PathBuf,
    /// Pipeline config file (TOML, one section per stage)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: PipelineOverrides,
    /// Human-readable summary instead of JSON
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct EvalDetectArgs {
    /// Predictions JSON: {"panel_id": [{x1,y1,x2,y2,conf}, ...], ...}
    #[arg(long, value_name = "PATH")]
    pred: PathBuf,
    /// Directory of YOLO-style annotation files (class cx cy w h, normalized)
    #[arg(long, value_name = "DIR")]
    gt: PathBuf,
    /// Directory of the annotated images (for de-normalizing boxes)
    #[arg(long, value_name = "DIR")]
    images: PathBuf,
    #[arg(
        long,
        default_value_t = 0.25,
        value_name = "TAU",
        help = "Confidence threshold for the precision/recall operating point"
    )]
    conf: f64,
    /// Non-maximum-suppression IoU threshold
    #[arg(long = "iou-nms", default_value_t = 0.45, value_name = "TAU")]
    iou_nms: f64,
    /// Leave images with no boxes and no detections out of the P/R means
    #[arg(long = "skip-empty-images")]
    skip_empty_images: bool,
    /// Human-readable table instead of JSON
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct EvalOcrArgs {
    #[arg(
        long = "ref",
        value_name = "PATH",
        help = "Reference transcripts: TSV (crop_id<TAB>text) or a directory of <id>.txt"
    )]
    reference: PathBuf,
    /// Hypothesis transcripts, same formats
    #[arg(long, value_name = "PATH")]
    hyp: PathBuf,
    /// Lowercase both sides before scoring
    #[arg(long)]
    casefold: bool,
    /// Mean of per-line rates instead of length-weighted rates
    #[arg(long = "macro-average")]
    macro_average: bool,
    /// Human-readable output instead of JSON
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct EvalMtArgs {
    /// Reference translations, one segment per line
    #[arg(long = "ref", value_name = "PATH")]
    reference: PathBuf,
    /// Hypothesis translations, line-aligned with the references
    #[arg(long, value_name = "PATH")]
    hyp: PathBuf,
    /// Human-readable output instead of JSON
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct CorpusPrepArgs {
    /// Corpus inputs: source/target file pairs (x.id x.en ...) or .tsv files
    #[arg(long, num_args = 1.., required = true, value_name = "FILE")]
    inputs: Vec<PathBuf>,
    /// Shuffle seed (SplitMix64 + Fisher-Yates; same seed, same split)
    #[arg(long, default_value_t = 0, value_name = "N")]
    seed: u64,
    /// Train/valid/test fractions, must sum to 1
    #[arg(long, num_args = 3, default_values_t = [0.8, 0.1, 0.1], value_name = "R")]
    ratios: Vec<f64>,
    /// Output directory for train/valid/test files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn parse_box(value: &str) -> Result<BBox, String> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 4 {
        return Err("expected x1,y1,x2,y2".into());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    BBox::new(nums[0], nums[1], nums[2], nums[3]).map_err(|e| e.to_string())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Detect(args) => cmd_detect(args),
        Command::Ocr(args) => cmd_ocr(args),
        Command::Translate(args) => cmd_translate(args),
        Command::Typeset(args) => cmd_typeset(args),
        Command::Run(args) => cmd_run(args),
        Command::EvalDetect(args) => cmd_eval_detect(args),
        Command::EvalOcr(args) => cmd_eval_ocr(args),
        Command::EvalMt(args) => cmd_eval_mt(args),
        Command::CorpusPrep(args) => cmd_corpus_prep(args),
    }
}

#[derive(Serialize)]
struct WireDetection {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    conf: f64,
    class_id: u32,
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let adapter: Box<dyn DetectorAdapter> = match (&args.fixture, &args.model) {
        (Some(f), _) => Box::new(FixtureDetector::from_path(f)?),
        (None, Some(m)) => Box::new(CommandDetector::new(m)),
        (None, None) => bail!("pass --fixture <json> or --model <program>"),
    };

    let mut output: BTreeMap<String, Vec<WireDetection>> = BTreeMap::new();
    for path in &args.images {
        let meta = PanelMeta::from_path(path);
        let image = image::open(path)
            .with_context(|| format!("reading {}", path.display()))?
            .to_rgba8();
        let raw = adapter.detect(&image, &meta)?;
        let kept = scanlate_core::detect::filter_confidence(&raw, args.conf);
        let dets = nms(&kept, args.iou_nms);
        output.insert(
            meta.id,
            dets.iter()
                .map(|d| WireDetection {
                    x1: d.bbox.x1,
                    y1: d.bbox.y1,
                    x2: d.bbox.x2,
                    y2: d.bbox.y2,
                    conf: d.confidence,
                    class_id: d.class_id,
                })
                .collect(),
        );
    }

    if args.pretty {
        for (id, dets) in &output {
            println!("{id}: {} bubble(s)", dets.len());
            for d in dets {
                println!(
                    "  ({:.1}, {:.1}) - ({:.1}, {:.1})  conf {:.3}",
                    d.x1, d.y1, d.x2, d.y2, d.conf
                );
            }
        }
    } else {
        println!("{}", serde_json::to_string_pretty(&output)?);
    }
    Ok(())
}

fn cmd_ocr(args: OcrArgs) -> Result<()> {
    let cfg = OcrConfig {
        language: args.lang,
        engine_mode: args.oem,
        page_seg_mode: args.psm,
    };
    let adapter: Box<dyn OcrAdapter> = match &args.ocr_stub {
        Some(path) => {
            cfg.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
            Box::new(FixtureOcr::from_tsv(path)?)
        }
        None => Box::new(TesseractCli::new(cfg)?),
    };

    let stem = args
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let crop = image::open(&args.image)
        .with_context(|| format!("reading {}", args.image.display()))?
        .to_rgba8();
    let gray = preprocess_crop(&crop)?;
    let result = recognize(&gray, adapter.as_ref(), &CropId::new(stem, 0))?;

    #[derive(Serialize)]
    struct Output {
        raw: String,
        text: String,
        conf: Option<f64>,
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&Output {
            raw: result.raw_text,
            text: result.text,
            conf: result.mean_confidence,
        })?
    );
    Ok(())
}

fn cmd_translate(args: TranslateArgs) -> Result<()> {
    let adapter: Box<dyn TranslatorAdapter> = if let Some(d) = &args.mt_dict {
        Box::new(DictTranslator::from_tsv(d)?)
    } else if let Some(u) = &args.mt_url {
        Box::new(HttpTranslator::new(u.clone()))
    } else if let Some(m) = &args.mt_model {
        Box::new(CommandTranslator::new(m))
    } else {
        bail!("pass --mt-dict <tsv>, --mt-url <url> or --mt-model <program>")
    };

    #[derive(Serialize)]
    struct Output {
        src: String,
        tgt: String,
    }
    let lines: Vec<String> = match (&args.text, &args.input) {
        (Some(t), None) => vec![t.clone()],
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(|l| l.to_string())
            .collect(),
        _ => bail!("pass exactly one of --text or --input"),
    };
    for (i, line) in lines.iter().enumerate() {
        let unit =
            translate(line, adapter.as_ref(), i).map_err(|e| anyhow::anyhow!(e.to_string()))?;
        println!(
            "{}",
            serde_json::to_string(&Output {
                src: unit.source_text,
                tgt: unit.target_text
            })?
        );
    }
    Ok(())
}

fn cmd_typeset(args: TypesetArgs) -> Result<()> {
    let constraints = FitConstraints {
        margin: args.margin,
        min_size: args.min_size,
        max_size: args.max_size,
        size_step: args.size_step,
    };
    if !(constraints.min_size > 0.0 && constraints.min_size <= constraints.max_size) {
        bail!("sizes must satisfy 0 < min-size <= max-size");
    }

    let mut image = image::open(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?
        .to_rgba8();
    let bbox = args
        .bbox
        .clamp_to(image.width() as f64, image.height() as f64)
        .context("box lies outside the image")?;

    match &args.font {
        None => {
            // Plan-only: fit with the built-in face's metrics.
            let plan = fit_text(&args.text, &bbox, &PixelFont, &constraints);
            println!("{}", serde_json::to_string_pretty(&plan)?);
        }
        Some(font) => {
            let out = args
                .out
                .as_ref()
                .context("--out is required when rendering")?;
            let face: Box<dyn TextFace> = match parse_font_choice(font) {
                FontChoice::Builtin => Box::new(PixelFont),
                FontChoice::File(path) => Box::new(VectorFont::from_file(&path)?),
                FontChoice::None => unreachable!("parse_font_choice never returns None"),
            };
            let plan = fit_text(&args.text, &bbox, face.as_ref(), &constraints);
            let (rx, ry, rw, rh) =
                scanlate_core::geometry::pixel_rect(&bbox, image.width(), image.height());
            let crop = image::imageops::crop_imm(&image, rx, ry, rw, rh).to_image();
            let mask = estimate_bubble_mask(&crop, MaskOptions::default());
            clear_region(&mut image, &bbox, &mask)?;
            render_plan(&mut image, &plan, face.as_ref());
            image
                .save(out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("{}", serde_json::to_string_pretty(&plan)?);
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let summary = run_batch(&args.input, &cfg)?;
    if args.pretty {
        println!("panels     {}", summary.panels);
        println!("ok         {}", summary.ok);
        println!("failed     {}", summary.failed);
        println!("bubbles    {}", summary.bubbles);
        for (stage, count) in &summary.stage_failures {
            println!("{stage} failures: {count}");
        }
        for failure in &summary.panel_failures {
            println!("FAILED {}: {}", failure.panel, failure.error);
        }
        println!("wall time  {} ms", summary.wall_ms);
    } else {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    }
    if summary.failed > 0 {
        eprintln!("{} panel(s) failed", summary.failed);
    }
    Ok(())
}

fn cmd_eval_detect(args: EvalDetectArgs) -> Result<()> {
    let gts = GroundTruthSet::from_yolo_dir(&args.gt, &args.images)?;
    let predictions = load_detection_fixture(&args.pred)?;
    let policy = if args.skip_empty_images {
        EmptyImagePolicy::Skip
    } else {
        EmptyImagePolicy::CountAsPerfect
    };
    let report = detection_report(&predictions, &gts, args.conf, args.iou_nms, policy)?;
    let vacuous = report
        .per_image
        .iter()
        .filter(|c| c.tp == 0 && c.fp == 0 && c.missed == 0)
        .count();
    if vacuous > 0 {
        let treatment = if args.skip_empty_images {
            "skipped"
        } else {
            "counted as P=R=1"
        };
        eprintln!("note: {vacuous} image(s) with no boxes and no detections ({treatment})");
    }
    if args.pretty {
        println!("mean precision  {:6.2}%", report.mean_precision * 100.0);
        println!("mean recall     {:6.2}%", report.mean_recall * 100.0);
        println!("f1              {:6.2}%", report.f1 * 100.0);
        println!("mAP@0.5         {:6.2}%", report.map_50 * 100.0);
        println!("mAP@[.5:.95]    {:6.2}%", report.map_50_95 * 100.0);
    } else {
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}

fn cmd_eval_ocr(args: EvalOcrArgs) -> Result<()> {
    let references = load_transcripts(&args.reference)?;
    let hypotheses = load_transcripts(&args.hyp)?;
    let pairs = pair_transcripts(&references, &hypotheses)?;
    let averaging = if args.macro_average {
        Averaging::Macro
    } else {
        Averaging::Micro
    };
    let report = ocr_report(&pairs, args.casefold, averaging)?;
    if args.pretty {
        println!("CER  {:6.2}%  ({} lines)", report.cer * 100.0, report.lines);
        println!("WER  {:6.2}%", report.wer * 100.0);
    } else {
        println!("{}", serde_json::to_string(&report)?);
    }
    Ok(())
}

fn cmd_eval_mt(args: EvalMtArgs) -> Result<()> {
    let refs = std::fs::read_to_string(&args.reference)
        .with_context(|| format!("reading {}", args.reference.display()))?;
    let hyps = std::fs::read_to_string(&args.hyp)
        .with_context(|| format!("reading {}", args.hyp.display()))?;
    let ref_lines: Vec<&str> = refs.lines().collect();
    let hyp_lines: Vec<&str> = hyps.lines().collect();
    if ref_lines.len() != hyp_lines.len() {
        bail!(
            "line counts differ: {} has {}, {} has {}",
            args.reference.display(),
            ref_lines.len(),
            args.hyp.display(),
            hyp_lines.len()
        );
    }
    let pairs: Vec<(&str, &str)> = hyp_lines
        .iter()
        .copied()
        .zip(ref_lines.iter().copied())
        .collect();
    let report = mt_report(&pairs).map_err(|e| anyhow::anyhow!(e.to_string()))?;
    if args.pretty {
        println!("BLEU    {:.4}  ({} segments)", report.bleu, report.segments);
        println!("METEOR  {:.4}", report.meteor);
    } else {
        println!("{}", serde_json::to_string(&report)?);
    }
    Ok(())
}

fn cmd_corpus_prep(args: CorpusPrepArgs) -> Result<()> {
    let ratios = SplitRatios::new(args.ratios[0], args.ratios[1], args.ratios[2])
        .map_err(|e| anyhow::anyhow!(e.to_string()))?;
    let pairs = load_corpus_inputs(&args.inputs)?;
    let loaded = pairs.len();
    let splits = prepare_corpus(pairs, args.seed, ratios);
    write_splits(&args.out, &splits)?;

    #[derive(Serialize)]
    struct Output {
        pairs: usize,
        unique: usize,
        train: usize,
        valid: usize,
        test: usize,
        out: String,
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&Output {
            pairs: loaded,
            unique: splits.train.len() + splits.valid.len() + splits.test.len(),
            train: splits.train.len(),
            valid: splits.valid.len(),
            test: splits.test.len(),
            out: args.out.display().to_string(),
        })?
    );
    Ok(())
}
