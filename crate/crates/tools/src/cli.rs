//! The `aop` command line.
//!
//! Exit codes: 0 success, 1 I/O or file format, 2 geometric failure,
//! 3 unpaired cases in `eval`, 64 usage.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use aop_core::metrics::{self, CaseMetrics};
use aop_core::phantom::Corruption;
use aop_core::raster::argmax_labels;
use aop_core::tta::{self, AdaptParams, TrainableMask, TtaConfig, TtaSample};
use aop_core::{compute_aop, Class, PixelSpacing};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::case::{self, CaseMeta};
use crate::error::ToolError;
use crate::{report, svg};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_GEOMETRY: i32 = 2;
pub const EXIT_UNPAIRED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "aop", version, about = "Angle of progression measurement and test-time adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure the angle and its confidence from a mask and a confidence map.
    Measure(MeasureArgs),
    /// Adapt the logit head on one image and measure before and after.
    Adapt(AdaptArgs),
    /// Segmentation and angle metrics over paired case directories.
    Eval(EvalArgs),
    /// Write a seeded suite of synthetic cases.
    Phantom(PhantomArgs),
    /// Draw the measured geometry as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    pub mask: PathBuf,
    pub conf: PathBuf,
    /// Pixel spacing in mm, `S` or `ROW,COL`.
    #[arg(long, default_value = "1.0", value_parser = parse_spacing)]
    pub spacing: PixelSpacing,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render the geometry to this SVG file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Group {
    Gamma,
    Beta,
    Mix,
}

#[derive(Debug, Args)]
pub struct TtaArgs {
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_ent: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_tv: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_aop: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub fd_step: f64,
    /// Parameter groups to keep fixed (repeatable or comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub freeze: Vec<Group>,
}

impl TtaArgs {
    pub fn config(&self) -> TtaConfig {
        TtaConfig {
            lambda_ent: self.lambda_ent,
            lambda_tv: self.lambda_tv,
            lambda_aop: self.lambda_aop,
            lr: self.lr,
            steps: self.steps,
            epsilon: self.epsilon,
            fd_step: self.fd_step,
        }
    }

    pub fn trainable(&self) -> TrainableMask {
        TrainableMask {
            gamma: !self.freeze.contains(&Group::Gamma),
            beta: !self.freeze.contains(&Group::Beta),
            mix: !self.freeze.contains(&Group::Mix),
        }
    }
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    pub logits: PathBuf,
    pub conf: PathBuf,
    #[command(flatten)]
    pub tta: TtaArgs,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the per-step trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted cases (`pred.pgm`, else `mask.pgm`).
    pub pred_dir: PathBuf,
    /// Directory of ground-truth cases (`mask.pgm`, optional `meta.json`).
    pub gt_dir: PathBuf,
    /// Pixel spacing in mm, `S` or `ROW,COL`.
    #[arg(long, default_value = "1.0", value_parser = parse_spacing)]
    pub spacing: PixelSpacing,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Number of cases.
    #[arg(long, short)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// `none`, `noise:SIGMA`, `bias:CLASS:DELTA` or `erode:ITERATIONS`.
    #[arg(long, default_value = "none", value_parser = parse_corruption)]
    pub corruption: Corruption,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub mask: PathBuf,
    pub conf: PathBuf,
    /// SVG output file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_spacing(s: &str) -> Result<PixelSpacing, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad spacing {t:?}: {e}"));
    let (r, c) = match parts.as_slice() {
        [v] => (num(v)?, num(v)?),
        [r, c] => (num(r)?, num(c)?),
        _ => return Err("spacing is S or ROW,COL".into()),
    };
    PixelSpacing::new(r, c).map_err(|e| e.to_string())
}

pub fn parse_corruption(s: &str) -> Result<Corruption, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
    match parts.as_slice() {
        ["none"] => Ok(Corruption::None),
        ["noise", sigma] => {
            let sigma = num(sigma)?;
            if sigma >= 0.0 && sigma.is_finite() {
                Ok(Corruption::LogitNoise { sigma })
            } else {
                Err("noise sigma must be finite and >= 0".into())
            }
        }
        ["bias", class, delta] => {
            let class = match *class {
                "bg" | "background" => Class::Background,
                "ps" => Class::Ps,
                "fh" => Class::Fh,
                other => return Err(format!("unknown class {other:?}")),
            };
            let delta = num(delta)?;
            if !delta.is_finite() {
                return Err("bias must be finite".into());
            }
            Ok(Corruption::LogitBias { class, delta })
        }
        ["erode", k] => {
            k.parse().map(|iterations| Corruption::BoundaryErosion { iterations }).map_err(|e| format!("{e}"))
        }
        _ => Err(format!("unknown corruption {s:?}")),
    }
}

/// Where a subcommand's main output goes.
struct Io<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn emit(&mut self, out: Option<&Path>, text: &str) -> Result<(), ToolError> {
        match out {
            Some(p) => case::write_bytes(p, text.as_bytes()),
            None => self.stdout.write_all(text.as_bytes()).map_err(|e| ToolError::io("<stdout>", e)),
        }
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(self.stderr, "{text}");
    }
}

fn exit_for(err: &ToolError) -> i32 {
    match err {
        ToolError::Usage(_) => EXIT_USAGE,
        ToolError::Core(_) => EXIT_GEOMETRY,
        _ => EXIT_IO,
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut io = Io { stdout, stderr };
    let result = match &cli.command {
        Command::Measure(a) => measure(a, &mut io),
        Command::Adapt(a) => adapt(a, &mut io),
        Command::Eval(a) => eval(a, &mut io),
        Command::Phantom(a) => phantom(a, &mut io),
        Command::Render(a) => render(a, &mut io),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            io.note(&report::tool_error_json(&e).to_string());
            exit_for(&e)
        }
    }
}

fn require_file(path: &Path) -> Result<(), ToolError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ToolError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")))
    }
}

fn measure(a: &MeasureArgs, io: &mut Io) -> Result<i32, ToolError> {
    require_file(&a.mask)?;
    require_file(&a.conf)?;
    let mask = case::read_mask(&a.mask)?;
    let conf = case::read_conf(&a.conf)?;
    match compute_aop(&mask, &conf, a.spacing) {
        Ok(res) => {
            io.emit(a.out.as_deref(), &report::to_json_pretty(&report::aop_json(&res)))?;
            if let Some(p) = &a.svg {
                case::write_bytes(p, svg::render(&mask, &res).as_bytes())?;
            }
            io.note(&format!("AoP {:.2}°  C_AoP {:.4}", res.aop_deg, res.c_aop));
            Ok(EXIT_OK)
        }
        Err(e) => {
            io.emit(a.out.as_deref(), &report::to_json_pretty(&report::stage_error_json(&e)))?;
            if let Some(p) = &a.svg {
                case::write_bytes(p, svg::render_failure(&mask, &e.to_string()).as_bytes())?;
            }
            io.note(&format!("measurement failed at {}: {}", e.stage.name(), e.error));
            Ok(EXIT_GEOMETRY)
        }
    }
}

fn adapt(a: &AdaptArgs, io: &mut Io) -> Result<i32, ToolError> {
    let config = a.tta.config();
    config.validate().map_err(|e| ToolError::Usage(e.to_string()))?;
    require_file(&a.logits)?;
    require_file(&a.conf)?;
    let logits = case::read_logits(&a.logits)?;
    let conf = case::read_conf(&a.conf)?;
    let sample = TtaSample::new(logits, conf)?;
    let params = AdaptParams::identity().with_trainable(a.tta.trainable());

    let measure_with = |p: &AdaptParams| -> Result<_, ToolError> {
        let labels = argmax_labels(&tta::apply_head(&sample.logits, p)?);
        Ok(compute_aop(&labels, &sample.conf, PixelSpacing::default()))
    };
    let pre = measure_with(&params)?;
    let (adapted, trace) = tta::adapt(std::slice::from_ref(&sample), &params, &config)?;
    let post = measure_with(&adapted)?;

    let trace_lines = report::trace_jsonl(&trace);
    let records: Vec<Value> = trace.records.iter().map(|r| report::record_json(r, &config)).collect();
    let out = json!({
        "pre": report::outcome_json(&pre),
        "post": report::outcome_json(&post),
        "config": report::to_value(&config),
        "params_before": report::to_value(&trace.params_before),
        "params_after": report::to_value(&trace.params_after),
        "trace": records,
    });
    io.emit(a.out.as_deref(), &report::to_json_pretty(&out))?;
    if let Some(p) = &a.trace {
        case::write_bytes(p, trace_lines.as_bytes())?;
    }
    let show = |r: &Result<aop_core::AopResult, aop_core::StageError>| match r {
        Ok(r) => format!("{:.2}° (C_AoP {:.4})", r.aop_deg, r.c_aop),
        Err(e) => format!("failed at {}", e.stage.name()),
    };
    io.note(&format!("before {}  after {}", show(&pre), show(&post)));
    Ok(if post.is_ok() { EXIT_OK } else { EXIT_GEOMETRY })
}

/// Angle error of a predicted mask against the ground truth in `meta.json`,
/// when a confidence map and the metadata are available.
fn case_aop_error(pred_dir: &Path, gt_dir: &Path, pred: &aop_core::LabelMask, spacing: PixelSpacing) -> Result<Option<f64>, ToolError> {
    let meta_path = gt_dir.join(case::META_FILE);
    if !meta_path.is_file() {
        return Ok(None);
    }
    let meta: CaseMeta = case::read_json(&meta_path)?;
    let conf_path = [pred_dir.join(case::CONF_FILE), gt_dir.join(case::CONF_FILE)].into_iter().find(|p| p.is_file());
    let Some(conf_path) = conf_path else { return Ok(None) };
    let conf = case::read_conf(&conf_path)?;
    // Angles do not depend on the scale, only on the spacing being square.
    let spacing = if spacing.is_isotropic() { spacing } else { PixelSpacing::default() };
    Ok(compute_aop(pred, &conf, spacing).ok().map(|r| metrics::aop_abs_error(r.aop_deg, meta.gt_aop_deg)))
}

fn eval(a: &EvalArgs, io: &mut Io) -> Result<i32, ToolError> {
    for dir in [&a.pred_dir, &a.gt_dir] {
        if !dir.is_dir() {
            return Err(ToolError::io(dir.as_path(), std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory")));
        }
    }
    let preds: BTreeMap<String, PathBuf> =
        case::case_dirs(&a.pred_dir, &[case::PRED_FILE, case::MASK_FILE])?.into_iter().collect();
    let gts: BTreeMap<String, PathBuf> = case::case_dirs(&a.gt_dir, &[case::MASK_FILE])?.into_iter().collect();

    let mut unpaired = Vec::new();
    for id in preds.keys().filter(|id| !gts.contains_key(*id)) {
        unpaired.push(json!({ "case_id": id, "missing": "gt" }));
    }
    for id in gts.keys().filter(|id| !preds.contains_key(*id)) {
        unpaired.push(json!({ "case_id": id, "missing": "pred" }));
    }
    unpaired.sort_by(|x, y| x["case_id"].as_str().cmp(&y["case_id"].as_str()));

    let mut cases: Vec<CaseMetrics> = Vec::new();
    for (id, pred_dir) in &preds {
        let Some(gt_dir) = gts.get(id) else { continue };
        let pred_file = [pred_dir.join(case::PRED_FILE), pred_dir.join(case::MASK_FILE)]
            .into_iter()
            .find(|p| p.is_file())
            .expect("listed case directories hold a mask");
        let pred = case::read_mask(&pred_file)?;
        let gt = case::read_mask(&gt_dir.join(case::MASK_FILE))?;
        if !pred.same_extent(gt.height(), gt.width()) {
            return Err(ToolError::Format {
                path: pred_file,
                source: crate::error::FormatError::new(0, format!("extent differs from ground truth of {id}")),
            });
        }
        let err = case_aop_error(pred_dir, gt_dir, &pred, a.spacing)?;
        cases.push(metrics::case_metrics(id.clone(), &pred, &gt, a.spacing, err)?);
    }

    let (case_values, summary) = if cases.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let r = metrics::aggregate(cases)?;
        (r.cases, r.summary)
    };
    let report_struct = metrics::MetricsReport { cases: case_values, summary };
    let text = match a.format {
        Format::Json => {
            let mut v = report::to_value(&report_struct);
            v["unpaired"] = Value::Array(unpaired.clone());
            report::to_json_pretty(&v)
        }
        Format::Csv => report::metrics_csv(&report_struct),
    };
    io.emit(a.out.as_deref(), &text)?;
    for u in &unpaired {
        io.note(&format!("unpaired case {} (no {})", u["case_id"].as_str().unwrap_or(""), u["missing"].as_str().unwrap_or("")));
    }
    Ok(if unpaired.is_empty() { EXIT_OK } else { EXIT_UNPAIRED })
}

fn phantom(a: &PhantomArgs, io: &mut Io) -> Result<i32, ToolError> {
    if a.n == 0 {
        return Err(ToolError::Usage("--n must be at least 1".into()));
    }
    let manifest = case::write_suite(&a.out, a.n, a.seed, a.corruption)?;
    io.note(&format!("wrote {} cases to {}", manifest.cases.len(), a.out.display()));
    Ok(EXIT_OK)
}

fn render(a: &RenderArgs, io: &mut Io) -> Result<i32, ToolError> {
    require_file(&a.mask)?;
    require_file(&a.conf)?;
    let mask = case::read_mask(&a.mask)?;
    let conf = case::read_conf(&a.conf)?;
    match compute_aop(&mask, &conf, PixelSpacing::default()) {
        Ok(res) => {
            case::write_bytes(&a.out, svg::render(&mask, &res).as_bytes())?;
            io.note(&format!("AoP {:.2}°  C_AoP {:.4}", res.aop_deg, res.c_aop));
            Ok(EXIT_OK)
        }
        Err(e) => {
            case::write_bytes(&a.out, svg::render_failure(&mask, &e.to_string()).as_bytes())?;
            io.note(&report::stage_error_json(&e).to_string());
            Ok(EXIT_GEOMETRY)
        }
    }
}
