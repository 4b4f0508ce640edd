//! Pipeline configuration: a TOML file with one section per stage,
//! overridable field-by-field from command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use scanlate_core::ocr::OcrConfig;
use scanlate_core::pipeline::{
    DetectorBackend, DetectorSettings, FontChoice, MtBackend, MtSettings, OcrBackend, OcrSettings,
    PipelineConfig, TypesetSettings,
};
use scanlate_core::typeset::FitConstraints;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub ocr: OcrSection,
    #[serde(default)]
    pub mt: MtSection,
    #[serde(default)]
    pub typeset: TypesetSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    /// External detector program (trained-model bridge).
    pub model: Option<PathBuf>,
    /// Detection fixture JSON (stub backend).
    pub fixture: Option<PathBuf>,
    pub conf: Option<f64>,
    pub iou_nms: Option<f64>,
    pub pad: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcrSection {
    /// "tesseract" (default) or "stub".
    pub backend: Option<String>,
    /// Fixture TSV for the stub backend.
    pub stub: Option<PathBuf>,
    pub lang: Option<String>,
    pub oem: Option<u8>,
    pub psm: Option<u8>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtSection {
    pub dict: Option<PathBuf>,
    pub url: Option<String>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypesetSection {
    /// "builtin", or a .ttf/.otf path. Absent: plan-only dry run.
    pub font: Option<String>,
    pub margin: Option<f32>,
    pub min_size: Option<f32>,
    pub max_size: Option<f32>,
    pub size_step: Option<f32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Flag-level overrides; every field beats the config file when set.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct PipelineOverrides {
    /// External detector program given the panel image path (prints detection JSON)
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Detection fixture JSON replayed by the stub detector
    #[arg(long, value_name = "PATH", conflicts_with = "model")]
    pub fixture: Option<PathBuf>,
    #[arg(long, value_name = "TAU", help = "Confidence threshold in [0,1]")]
    pub conf: Option<f64>,
    #[arg(
        long = "iou-nms",
        value_name = "TAU",
        help = "Non-maximum-suppression IoU threshold in [0,1]"
    )]
    pub iou_nms: Option<f64>,
    /// Crop padding in pixels before OCR
    #[arg(long, value_name = "PX")]
    pub pad: Option<f64>,
    /// OCR language code
    #[arg(long, value_name = "LANG")]
    pub lang: Option<String>,
    /// OCR engine mode (0-3)
    #[arg(long, value_name = "N")]
    pub oem: Option<u8>,
    /// OCR page segmentation mode (0-13)
    #[arg(long, value_name = "N")]
    pub psm: Option<u8>,
    #[arg(
        long = "ocr-stub",
        value_name = "PATH",
        help = "OCR fixture TSV (crop_id<TAB>text) replayed by the stub engine"
    )]
    pub ocr_stub: Option<PathBuf>,
    #[arg(
        long = "mt-dict",
        value_name = "PATH",
        help = "Dictionary translator TSV (source<TAB>target, identity fallback)"
    )]
    pub mt_dict: Option<PathBuf>,
    /// Translation HTTP endpoint: POST {"text"} -> {"translation"}
    #[arg(long = "mt-url", value_name = "URL", conflicts_with = "mt_dict")]
    pub mt_url: Option<String>,
    /// External translator program: source on stdin, translation on stdout
    #[arg(long = "mt-model", value_name = "PATH", conflicts_with_all = ["mt_dict", "mt_url"])]
    pub mt_model: Option<PathBuf>,
    /// Render font: "builtin" or a .ttf/.otf path; omit for a plan-only dry run
    #[arg(long, value_name = "FONT")]
    pub font: Option<String>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Parallel panel workers
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

pub fn parse_font_choice(value: &str) -> FontChoice {
    if value == "builtin" {
        FontChoice::Builtin
    } else {
        FontChoice::File(PathBuf::from(value))
    }
}

/// Read the config file (all sections optional), apply defaults, then
/// apply flag overrides. Validates every range and names the field in
/// the error.
pub fn load_config(path: Option<&Path>, overrides: &PipelineOverrides) -> Result<PipelineConfig> {
    let file: FileConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => FileConfig::default(),
    };

    // Detector backend: flag first, then file; fixture and model are
    // mutually exclusive within a source.
    let backend = match (&overrides.fixture, &overrides.model) {
        (Some(f), _) => Some(DetectorBackend::Fixture(f.clone())),
        (None, Some(m)) => Some(DetectorBackend::Command(m.clone())),
        (None, None) => match (&file.detector.fixture, &file.detector.model) {
            (Some(_), Some(_)) => {
                bail!("config sets both detector.fixture and detector.model; pick one")
            }
            (Some(f), None) => Some(DetectorBackend::Fixture(f.clone())),
            (None, Some(m)) => Some(DetectorBackend::Command(m.clone())),
            (None, None) => None,
        },
    };
    let backend = backend.context(
        "no detector backend: set detector.fixture or detector.model in the config, or pass --fixture/--model",
    )?;

    let conf_tau = overrides.conf.or(file.detector.conf).unwrap_or(0.25);
    if !(0.0..=1.0).contains(&conf_tau) {
        bail!("conf_tau must be in [0,1], got {conf_tau}");
    }
    let nms_tau = overrides.iou_nms.or(file.detector.iou_nms).unwrap_or(0.45);
    if !(0.0..=1.0).contains(&nms_tau) {
        bail!("nms_tau must be in [0,1], got {nms_tau}");
    }
    let pad = overrides.pad.or(file.detector.pad).unwrap_or(4.0);
    if pad.is_nan() || pad < 0.0 {
        bail!("pad must be >= 0, got {pad}");
    }

    let ocr_config = OcrConfig {
        language: overrides
            .lang
            .clone()
            .or(file.ocr.lang)
            .unwrap_or_else(|| "ind".into()),
        engine_mode: overrides.oem.or(file.ocr.oem).unwrap_or(3),
        page_seg_mode: overrides.psm.or(file.ocr.psm).unwrap_or(6),
    };
    ocr_config
        .validate()
        .map_err(|e| anyhow::anyhow!(e.to_string()))?;

    let ocr_backend = if let Some(stub) = overrides.ocr_stub.clone() {
        OcrBackend::Fixture(stub)
    } else {
        match file.ocr.backend.as_deref() {
            None | Some("tesseract") => OcrBackend::Tesseract,
            Some("stub") => OcrBackend::Fixture(
                file.ocr
                    .stub
                    .clone()
                    .context("ocr.backend = \"stub\" needs ocr.stub = \"<fixture.tsv>\"")?,
            ),
            Some(other) => bail!("unknown ocr.backend {other:?}; use \"tesseract\" or \"stub\""),
        }
    };

    let mt_backend = if let Some(d) = overrides.mt_dict.clone() {
        Some(MtBackend::Dict(d))
    } else if let Some(u) = overrides.mt_url.clone() {
        Some(MtBackend::Http(u))
    } else if let Some(m) = overrides.mt_model.clone() {
        Some(MtBackend::Command(m))
    } else {
        match (&file.mt.dict, &file.mt.url, &file.mt.model) {
            (Some(d), None, None) => Some(MtBackend::Dict(d.clone())),
            (None, Some(u), None) => Some(MtBackend::Http(u.clone())),
            (None, None, Some(m)) => Some(MtBackend::Command(m.clone())),
            (None, None, None) => None,
            _ => bail!("config sets more than one of mt.dict, mt.url, mt.model; pick one"),
        }
    };
    let mt_backend = mt_backend.context(
        "no translator backend: set mt.dict, mt.url or mt.model in the config, or pass --mt-dict/--mt-url/--mt-model",
    )?;

    let font = match overrides.font.as_deref().or(file.typeset.font.as_deref()) {
        None => FontChoice::None,
        Some(value) => parse_font_choice(value),
    };
    let constraints = FitConstraints {
        margin: file.typeset.margin.unwrap_or(4.0),
        min_size: file.typeset.min_size.unwrap_or(10.0),
        max_size: file.typeset.max_size.unwrap_or(48.0),
        size_step: file.typeset.size_step.unwrap_or(1.0),
    };
    if constraints.margin < 0.0 {
        bail!("typeset.margin must be >= 0, got {}", constraints.margin);
    }
    if !(constraints.min_size > 0.0 && constraints.min_size <= constraints.max_size) {
        bail!(
            "typeset sizes must satisfy 0 < min_size <= max_size, got {} and {}",
            constraints.min_size,
            constraints.max_size
        );
    }
    if constraints.size_step <= 0.0 {
        bail!(
            "typeset.size_step must be > 0, got {}",
            constraints.size_step
        );
    }

    let out_dir = overrides
        .out
        .clone()
        .or(file.output.dir)
        .unwrap_or_else(|| PathBuf::from("out"));
    let workers = overrides.workers.or(file.output.workers).unwrap_or(1);
    if workers == 0 {
        bail!("workers must be >= 1");
    }

    Ok(PipelineConfig {
        detector: DetectorSettings {
            backend,
            conf_tau,
            nms_tau,
            pad,
        },
        ocr: OcrSettings {
            backend: ocr_backend,
            config: ocr_config,
        },
        mt: MtSettings {
            backend: mt_backend,
        },
        typeset: TypesetSettings { font, constraints },
        out_dir,
        workers,
    })
}
