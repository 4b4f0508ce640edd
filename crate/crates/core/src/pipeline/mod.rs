//! Panel orchestration: detect, filter, suppress, order, crop,
//! preprocess, recognize, normalize, translate, mask, clear, fit and
//! render, with a sidecar record of every intermediate. Batch runs
//! parallelize over panels; stage failures stay confined to one bubble.

pub mod sidecar;

pub use sidecar::{read_sidecar, write_sidecar, PanelRecord};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use image::RgbaImage;
use serde::Serialize;
use thiserror::Error;

use crate::detect::{
    crop_bubbles, filter_confidence, nms, CommandDetector, DetectorAdapter, FixtureDetector,
    PanelMeta,
};
use crate::ocr::{
    preprocess_crop, recognize, CropId, FixtureOcr, OcrAdapter, OcrConfig, TesseractCli,
};
use crate::translate::{
    translate, CommandTranslator, DictTranslator, HttpTranslator, TranslatorAdapter,
};
use crate::typeset::{
    clear_region, estimate_bubble_mask, fit_text, render_plan, FitConstraints, MaskOptions,
    PixelFont, TextFace, VectorFont,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no input images in {0}")]
    NoInputImages(String),
    #[error("unreadable image {path}: {message}")]
    UnreadableImage { path: String, message: String },
    #[error("writing {path}: {message}")]
    WriteOutput { path: String, message: String },
    #[error("adapter construction: {0}")]
    AdapterConstruction(String),
    #[error("detection: {0}")]
    Detect(String),
    #[error("sidecar {path}: {message}")]
    SidecarParse { path: String, message: String },
    #[error("sidecar schema version mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: u32, found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which detector backs the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DetectorBackend {
    /// JSON fixture replay (tests, offline runs).
    Fixture(PathBuf),
    /// External program bridging to a trained model.
    Command(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorSettings {
    pub backend: DetectorBackend,
    pub conf_tau: f64,
    pub nms_tau: f64,
    pub pad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OcrBackend {
    /// The external `tesseract` binary.
    Tesseract,
    /// TSV fixture replay keyed by `panel#index`.
    Fixture(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcrSettings {
    pub backend: OcrBackend,
    pub config: OcrConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MtBackend {
    /// `source<TAB>target` dictionary with identity fallback.
    Dict(PathBuf),
    /// HTTP endpoint speaking `{"text"} -> {"translation"}`.
    Http(String),
    /// External program: source on stdin, translation on stdout.
    Command(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MtSettings {
    pub backend: MtBackend,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FontChoice {
    /// Plan-only dry run: plans are computed (with the built-in face's
    /// metrics) but nothing is drawn.
    None,
    /// The built-in pixel face; no font file needed.
    Builtin,
    /// A .ttf/.otf on disk.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypesetSettings {
    pub font: FontChoice,
    pub constraints: FitConstraints,
}

/// Everything a run needs. `out_dir` and `workers` steer execution but
/// not content, so they stay outside the config hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub detector: DetectorSettings,
    pub ocr: OcrSettings,
    pub mt: MtSettings,
    pub typeset: TypesetSettings,
    pub out_dir: PathBuf,
    pub workers: usize,
}

/// FNV-1a, 64-bit.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hash of the content-affecting settings (detector, ocr, mt, typeset).
/// Stored in every sidecar so records are traceable to their settings.
pub fn config_hash(cfg: &PipelineConfig) -> String {
    #[derive(Serialize)]
    struct Hashed<'a> {
        detector: &'a DetectorSettings,
        ocr: &'a OcrSettings,
        mt: &'a MtSettings,
        typeset: &'a TypesetSettings,
    }
    let json = serde_json::to_string(&Hashed {
        detector: &cfg.detector,
        ocr: &cfg.ocr,
        mt: &cfg.mt,
        typeset: &cfg.typeset,
    })
    .expect("config serializes");
    format!("{:016x}", fnv1a64(json.as_bytes()))
}

/// One worker's set of backends. Each worker owns its own.
pub struct AdapterSet {
    pub detector: Box<dyn DetectorAdapter>,
    pub ocr: Box<dyn OcrAdapter>,
    pub translator: Box<dyn TranslatorAdapter>,
    /// Face used for fit metrics and (when `render`) drawing.
    pub face: Box<dyn TextFace>,
    /// False in plan-only dry runs.
    pub render: bool,
}

/// Construct the configured backends. Fails fast on missing files,
/// unreachable binaries, or bad fixtures.
pub fn build_adapters(cfg: &PipelineConfig) -> Result<AdapterSet, PipelineError> {
    let err = |e: String| PipelineError::AdapterConstruction(e);

    let detector: Box<dyn DetectorAdapter> = match &cfg.detector.backend {
        DetectorBackend::Fixture(path) => {
            Box::new(FixtureDetector::from_path(path).map_err(|e| err(e.to_string()))?)
        }
        DetectorBackend::Command(program) => Box::new(CommandDetector::new(program)),
    };

    let ocr: Box<dyn OcrAdapter> = match &cfg.ocr.backend {
        OcrBackend::Tesseract => {
            Box::new(TesseractCli::new(cfg.ocr.config.clone()).map_err(|e| err(e.to_string()))?)
        }
        OcrBackend::Fixture(path) => {
            cfg.ocr.config.validate().map_err(|e| err(e.to_string()))?;
            Box::new(FixtureOcr::from_tsv(path).map_err(|e| err(e.to_string()))?)
        }
    };

    let translator: Box<dyn TranslatorAdapter> = match &cfg.mt.backend {
        MtBackend::Dict(path) => {
            Box::new(DictTranslator::from_tsv(path).map_err(|e| err(e.to_string()))?)
        }
        MtBackend::Http(url) => Box::new(HttpTranslator::new(url.clone())),
        MtBackend::Command(program) => Box::new(CommandTranslator::new(program)),
    };

    let (face, render): (Box<dyn TextFace>, bool) = match &cfg.typeset.font {
        FontChoice::None => (Box::new(PixelFont), false),
        FontChoice::Builtin => (Box::new(PixelFont), true),
        FontChoice::File(path) => (
            Box::new(VectorFont::from_file(path).map_err(|e| err(e.to_string()))?),
            true,
        ),
    };

    Ok(AdapterSet {
        detector,
        ocr,
        translator,
        face,
        render,
    })
}

/// Run the full stage chain on one panel.
///
/// Returns the retypeset image and the sidecar record. A stage failure
/// on one bubble lands in that bubble's `errors` and leaves its pixels
/// untouched; the other bubbles proceed.
pub fn process_panel(
    image: &RgbaImage,
    meta: &PanelMeta,
    cfg: &PipelineConfig,
    adapters: &AdapterSet,
) -> Result<(RgbaImage, PanelRecord), PipelineError> {
    let raw = adapters
        .detector
        .detect(image, meta)
        .map_err(|e| PipelineError::Detect(e.to_string()))?;
    let kept = filter_confidence(&raw, cfg.detector.conf_tau);
    let suppressed = nms(&kept, cfg.detector.nms_tau);
    let crops = crop_bubbles(image, &suppressed, cfg.detector.pad);

    let mut output = image.clone();
    let mut bubbles = Vec::with_capacity(crops.len());

    for (index, crop) in crops.iter().enumerate() {
        let mut errors: Vec<String> = Vec::new();
        let det = crop.detection;
        let mut ocr_entry = sidecar::OcrEntry {
            raw: String::new(),
            text: String::new(),
            conf: None,
        };
        let mut mt_entry = sidecar::MtEntry {
            src: String::new(),
            tgt: String::new(),
        };
        let mut typeset_entry = sidecar::TypesetEntry {
            font_size: 0.0,
            lines: Vec::new(),
            overflow: false,
        };

        if let Some(warning) = &crop.warning {
            errors.push(format!("crop: {warning}"));
        }

        if let Some(crop_image) = &crop.image {
            // OCR.
            let text = match preprocess_crop(crop_image) {
                Ok(gray) => {
                    let id = CropId::new(meta.id.clone(), index);
                    match recognize(&gray, adapters.ocr.as_ref(), &id) {
                        Ok(result) => {
                            ocr_entry.raw = result.raw_text;
                            ocr_entry.text = result.text.clone();
                            ocr_entry.conf = result.mean_confidence;
                            result.text
                        }
                        Err(e) => {
                            errors.push(format!("ocr: {e}"));
                            String::new()
                        }
                    }
                }
                Err(e) => {
                    errors.push(format!("ocr: {e}"));
                    String::new()
                }
            };

            // Translation; on failure the source text passes through.
            let target = match translate(&text, adapters.translator.as_ref(), index) {
                Ok(unit) => {
                    mt_entry.src = unit.source_text;
                    mt_entry.tgt = unit.target_text.clone();
                    unit.target_text
                }
                Err(e) => {
                    errors.push(format!("mt: {e}"));
                    mt_entry.src = text.clone();
                    mt_entry.tgt = text.clone();
                    text.clone()
                }
            };

            // Typeset and render only clean, non-empty bubbles; anything
            // else keeps its original pixels.
            if errors.is_empty() && !target.is_empty() {
                let plan = fit_text(
                    &target,
                    &det.bbox,
                    adapters.face.as_ref(),
                    &cfg.typeset.constraints,
                );
                typeset_entry.font_size = plan.font_size;
                typeset_entry.lines = plan.lines.clone();
                typeset_entry.overflow = plan.overflow;
                if adapters.render {
                    let mask = estimate_bubble_mask(crop_image, MaskOptions::default());
                    if let Err(e) = clear_region(&mut output, &crop.region, &mask) {
                        errors.push(format!("typeset: {e}"));
                    } else {
                        render_plan(&mut output, &plan, adapters.face.as_ref());
                    }
                }
            }
        }

        bubbles.push(sidecar::BubbleEntry {
            index,
            det: sidecar::DetEntry {
                x1: det.bbox.x1,
                y1: det.bbox.y1,
                x2: det.bbox.x2,
                y2: det.bbox.y2,
                conf: det.confidence,
            },
            crop: sidecar::CropEntry {
                x1: crop.region.x1,
                y1: crop.region.y1,
                x2: crop.region.x2,
                y2: crop.region.y2,
            },
            ocr: ocr_entry,
            mt: mt_entry,
            typeset: typeset_entry,
            errors,
        });
    }

    let record = PanelRecord {
        schema: sidecar::SCHEMA_VERSION,
        panel_id: meta.id.clone(),
        width: image.width(),
        height: image.height(),
        config_hash: config_hash(cfg),
        bubbles,
    };
    Ok((output, record))
}

/// Outcome of a batch run.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub panels: usize,
    pub ok: usize,
    pub failed: usize,
    pub bubbles: usize,
    /// Bubble-level failure counts keyed by stage (`crop`, `ocr`, `mt`,
    /// `typeset`).
    pub stage_failures: BTreeMap<String, usize>,
    pub panel_failures: Vec<PanelFailure>,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelFailure {
    pub panel: String,
    pub error: String,
}

fn is_supported_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

/// Process every panel image in a directory.
///
/// Outputs land in `cfg.out_dir` as `<stem>.translated.png` and
/// `<stem>.sidecar.json`. Panels fan out across `cfg.workers` threads,
/// each owning its own adapter instances; outputs are deterministic for
/// deterministic adapters regardless of the worker count.
pub fn run_batch(input_dir: &Path, cfg: &PipelineConfig) -> Result<BatchSummary, PipelineError> {
    let start = std::time::Instant::now();
    let mut files: Vec<PathBuf> = std::fs::read_dir(input_dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| is_supported_image(p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PipelineError::NoInputImages(
            input_dir.display().to_string(),
        ));
    }

    std::fs::create_dir_all(&cfg.out_dir)?;
    // Validate the configuration once before fanning out.
    build_adapters(cfg)?;

    struct Tally {
        ok: usize,
        bubbles: usize,
        stage_failures: BTreeMap<String, usize>,
        panel_failures: Vec<PanelFailure>,
        run_error: Option<PipelineError>,
    }
    let tally = Mutex::new(Tally {
        ok: 0,
        bubbles: 0,
        stage_failures: BTreeMap::new(),
        panel_failures: Vec::new(),
        run_error: None,
    });
    let next = AtomicUsize::new(0);
    let workers = cfg.workers.max(1).min(files.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let adapters = match build_adapters(cfg) {
                    Ok(a) => a,
                    Err(e) => {
                        tally.lock().unwrap().run_error.get_or_insert(e);
                        return;
                    }
                };
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= files.len() {
                        break;
                    }
                    let path = &files[i];
                    let meta = PanelMeta::from_path(path);
                    let result = image::open(path)
                        .map_err(|e| PipelineError::UnreadableImage {
                            path: path.display().to_string(),
                            message: e.to_string(),
                        })
                        .and_then(|img| {
                            let rgba = img.to_rgba8();
                            let (out, record) = process_panel(&rgba, &meta, cfg, &adapters)?;
                            let stem = meta.id.clone();
                            out.save(cfg.out_dir.join(format!("{stem}.translated.png")))
                                .map_err(|e| PipelineError::WriteOutput {
                                    path: format!("{stem}.translated.png"),
                                    message: e.to_string(),
                                })?;
                            write_sidecar(
                                &record,
                                &cfg.out_dir.join(format!("{stem}.sidecar.json")),
                            )?;
                            Ok(record)
                        });
                    let mut tally = tally.lock().unwrap();
                    match result {
                        Ok(record) => {
                            tally.ok += 1;
                            tally.bubbles += record.bubbles.len();
                            for bubble in &record.bubbles {
                                for error in &bubble.errors {
                                    let stage =
                                        error.split(':').next().unwrap_or("unknown").to_string();
                                    *tally.stage_failures.entry(stage).or_insert(0) += 1;
                                }
                            }
                        }
                        Err(e) => tally.panel_failures.push(PanelFailure {
                            panel: meta.id,
                            error: e.to_string(),
                        }),
                    }
                }
            });
        }
    });

    let tally = tally.into_inner().unwrap();
    if let Some(e) = tally.run_error {
        return Err(e);
    }
    Ok(BatchSummary {
        panels: files.len(),
        ok: tally.ok,
        failed: tally.panel_failures.len(),
        bubbles: tally.bubbles,
        stage_failures: tally.stage_failures,
        panel_failures: tally.panel_failures,
        wall_ms: start.elapsed().as_millis(),
    })
}
