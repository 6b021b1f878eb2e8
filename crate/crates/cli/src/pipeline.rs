//! The five pipeline commands.
//!
//! Every random choice is seeded from the master seed through
//! [`derive_seed`] with a fixed component name:
//!
//! | component                      | name                          |
//! |--------------------------------|-------------------------------|
//! | scene `i`                      | `scene/{i}`                   |
//! | smooth-noise distortion        | `prediction/{i}`              |
//! | pattern `j` of prior `name`    | `prior/{name}/{j}/scene/{i}`  |
//! | noise of prior `name`          | `noise/{name}/scene/{i}`      |
//!
//! so any cell of a benchmark can be replayed in isolation.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use priorfill::align::{
    build_index, global_align, prefill_interpolation, prefill_with_index, FillConfig, Filled, Weighting,
};
use priorfill::io::{
    read_depth_png16, read_mask_png, read_pfm, write_depth_png16, write_gray_png, write_pfm, write_report,
    ReportDocument, ResultRow, StageTimings,
};
use priorfill::metrics::{error_map, evaluate, MetricsReport};
use priorfill::scenegen::{derive_prediction, generate_scene, Distortion, SceneSpec};
use priorfill::seed::derive_seed;
use priorfill::synth::{apply, perturb, prior_from_confidence, Pattern, PriorSpec};
use priorfill::{DepthMap, Grid, RelativePrediction, ValidityMask};
use rayon::prelude::*;

use crate::config::{InputConfig, Method, PatternConfig, PipelineConfig, PriorConfig, Region};
use crate::error::{CliError, CliResult, Context};

pub const REPORT_FILE: &str = "report.json";
/// Name used for the prior, method or scene that comes from `[inputs]` files.
pub const INPUT_LABEL: &str = "input";

pub fn scene_seed(master: u64, scene: usize) -> u64 {
    derive_seed(master, &format!("scene/{scene}"))
}

pub fn prediction_seed(master: u64, scene: usize) -> u64 {
    derive_seed(master, &format!("prediction/{scene}"))
}

pub fn pattern_seed(master: u64, prior: &str, pattern: usize, scene: usize) -> u64 {
    derive_seed(master, &format!("prior/{prior}/{pattern}/scene/{scene}"))
}

pub fn noise_seed(master: u64, prior: &str, scene: usize) -> u64 {
    derive_seed(master, &format!("noise/{prior}/scene/{scene}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Scene,
    Synth,
    Prefill,
    Eval,
    Bench,
}

/// A loaded configuration together with where it reads from and writes to.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    /// Relative input paths resolve against this directory.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

/// The data one scene contributes to a run.
#[derive(Debug, Clone)]
pub struct Case {
    pub index: usize,
    pub gt: Option<DepthMap>,
    pub pred: Option<RelativePrediction>,
    pub confidence: Option<Grid>,
    pub measured_prior: Option<DepthMap>,
    pub filled: Option<DepthMap>,
    /// Fallback outlier range for noise.
    pub depth_range: Option<(f64, f64)>,
}

/// A named prior, before and after optional perturbation.
#[derive(Debug, Clone)]
pub struct Prior {
    pub name: String,
    pub clean: DepthMap,
    pub noisy: Option<DepthMap>,
}

impl Prior {
    /// The prior handed to the fill methods.
    pub fn effective(&self) -> &DepthMap {
        self.noisy.as_ref().unwrap_or(&self.clean)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Timings {
    synth: f64,
    index: f64,
    prefill: f64,
    metrics: f64,
}

impl Timings {
    fn add(self, o: Self) -> Self {
        Self {
            synth: self.synth + o.synth,
            index: self.index + o.index,
            prefill: self.prefill + o.prefill,
            metrics: self.metrics + o.metrics,
        }
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// One evaluated (scene, prior, method) cell.
#[derive(Debug, Clone)]
struct Record {
    prior: String,
    method: String,
    metrics: MetricsReport,
    clamped: usize,
}

#[derive(Debug, Default)]
struct CaseOutcome {
    records: Vec<Record>,
    clamped: usize,
    timings: Timings,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, base_dir: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            config,
            base_dir,
            out_dir,
        }
    }

    pub fn run(&self, cmd: Command) -> CliResult<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        match cmd {
            Command::Scene => self.cmd_scene(),
            Command::Synth => self.cmd_synth(),
            Command::Prefill => self.cmd_prefill(),
            Command::Eval => self.cmd_eval(),
            Command::Bench => self.cmd_bench(),
        }
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn case_count(&self) -> usize {
        self.config.scene.map_or(1, |s| s.count)
    }

    fn case_dir(&self, index: usize) -> PathBuf {
        if self.case_count() == 1 {
            self.out_dir.clone()
        } else {
            self.out_dir.join(format!("scene_{index:03}"))
        }
    }

    fn inputs(&self) -> CliResult<&InputConfig> {
        self.config
            .inputs
            .as_ref()
            .ok_or_else(|| CliError::Config("either [scene] or [inputs] is required".into()))
    }

    /// Generates scene `index`, or loads the input files.
    pub fn load_case(&self, index: usize) -> CliResult<Case> {
        let master = self.config.seed;
        if let Some(scene) = &self.config.scene {
            let mut spec = SceneSpec::new(
                scene.kind,
                scene.width,
                scene.height,
                scene.depth_range,
                scene_seed(master, index),
            );
            spec.steps = scene.steps;
            let gt = generate_scene(&spec).context(|| format!("scene {index}"))?;
            let mut pspec = scene.prediction;
            if let Distortion::SmoothNoise { seed, .. } = &mut pspec.distortion {
                *seed = prediction_seed(master, index);
            }
            let pred = derive_prediction(&gt, &pspec).context(|| format!("prediction for scene {index}"))?;
            return Ok(Case {
                index,
                gt: Some(gt),
                pred: Some(pred),
                confidence: None,
                measured_prior: None,
                filled: None,
                depth_range: Some(scene.depth_range),
            });
        }
        let inputs = self.inputs()?;
        let scale = inputs.png_scale;
        let load_depth = |p: &Option<PathBuf>| p.as_ref().map(|p| self.read_depth(p, scale)).transpose();
        let load_grid = |p: &Option<PathBuf>| p.as_ref().map(|p| self.read_grid(p)).transpose();
        let gt = load_depth(&inputs.gt)?;
        let depth_range = gt
            .as_ref()
            .and_then(DepthMap::value_range)
            .map(|(lo, hi)| (lo as f64, hi as f64));
        Ok(Case {
            index,
            gt,
            pred: load_grid(&inputs.pred)?.map(RelativePrediction::new),
            confidence: load_grid(&inputs.confidence)?,
            measured_prior: load_depth(&inputs.prior)?,
            filled: load_depth(&inputs.filled)?,
            depth_range,
        })
    }

    fn read_bytes(&self, path: &Path) -> CliResult<(PathBuf, Vec<u8>)> {
        let path = self.resolve(path);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        Ok((path, bytes))
    }

    fn read_grid(&self, path: &Path) -> CliResult<Grid> {
        let (path, bytes) = self.read_bytes(path)?;
        read_pfm(&bytes).context(|| path.display().to_string())
    }

    fn read_depth(&self, path: &Path, scale: f64) -> CliResult<DepthMap> {
        let (path, bytes) = self.read_bytes(path)?;
        let ctx = || path.display().to_string();
        if is_png(&path) {
            read_depth_png16(&bytes, scale).context(ctx)
        } else {
            DepthMap::from_sentinel_grid(read_pfm(&bytes).context(ctx)?).context(ctx)
        }
    }

    fn read_mask(&self, path: &Path) -> CliResult<ValidityMask> {
        let (path, bytes) = self.read_bytes(path)?;
        read_mask_png(&bytes).context(|| path.display().to_string())
    }

    /// Builds every configured prior for `case`, or wraps the measured one.
    pub fn build_priors(&self, case: &Case) -> CliResult<Vec<Prior>> {
        if let Some(prior) = &case.measured_prior {
            if !self.config.priors.is_empty() {
                return Err(CliError::Config(
                    "inputs.prior and [[priors]] are mutually exclusive".into(),
                ));
            }
            return Ok(vec![Prior {
                name: INPUT_LABEL.to_string(),
                clean: prior.clone(),
                noisy: None,
            }]);
        }
        if self.config.priors.is_empty() {
            return Err(CliError::Config(
                "at least one [[priors]] entry or inputs.prior is required".into(),
            ));
        }
        let gt = case
            .gt
            .as_ref()
            .ok_or_else(|| CliError::Config("inputs.gt is required".into()))?;
        self.config
            .priors
            .iter()
            .map(|p| self.build_prior(p, gt, case))
            .collect()
    }

    fn build_prior(&self, cfg: &PriorConfig, gt: &DepthMap, case: &Case) -> CliResult<Prior> {
        let master = self.config.seed;
        let ctx = || format!("prior {:?}", cfg.name);
        let mut map = gt.clone();
        for (j, pattern) in cfg.patterns.iter().enumerate() {
            let seed = pattern_seed(master, &cfg.name, j, case.index);
            map = match pattern {
                PatternConfig::Confidence { top_fraction } => {
                    let conf = case.confidence.as_ref().ok_or_else(|| {
                        CliError::Config(format!(
                            "prior {:?}: confidence pattern needs inputs.confidence",
                            cfg.name
                        ))
                    })?;
                    prior_from_confidence(&map, conf, *top_fraction).context(ctx)?
                }
                other => {
                    let spec = PriorSpec::new(self.pattern(other)?, seed);
                    apply(&map, &spec).context(ctx)?
                }
            };
        }
        let noisy = match &cfg.noise {
            Some(noise) => {
                let range = noise
                    .outlier_range
                    .or(case.depth_range)
                    .ok_or_else(|| CliError::Config(format!("prior {:?}: noise needs an outlier_range", cfg.name)))?;
                let spec = noise.to_spec(range, noise_seed(master, &cfg.name, case.index));
                Some(perturb(&map, &spec).context(ctx)?)
            }
            None => None,
        };
        Ok(Prior {
            name: cfg.name.clone(),
            clean: map,
            noisy,
        })
    }

    fn pattern(&self, p: &PatternConfig) -> CliResult<Pattern> {
        Ok(match *p {
            PatternConfig::SparseRandom { n } => Pattern::SparseRandom { n },
            PatternConfig::SparseKeypoint { n } => Pattern::SparseKeypoint { n },
            PatternConfig::LidarLines { lines } => Pattern::LidarLines { lines },
            PatternConfig::LowRes { factor } => Pattern::LowRes { factor },
            PatternConfig::RangeMask { threshold_m } => Pattern::RangeMask { threshold_m },
            PatternConfig::SquareMask { side_px, center } => Pattern::SquareMask { side_px, center },
            PatternConfig::MaskFile { ref path } => Pattern::MaskFile(Arc::new(self.read_mask(path)?)),
            PatternConfig::Confidence { .. } => unreachable!("handled by the caller"),
        })
    }

    fn cmd_scene(&self) -> CliResult<()> {
        if self.config.scene.is_none() {
            return Err(CliError::Config("the scene command needs a [scene] table".into()));
        }
        for i in 0..self.case_count() {
            let case = self.load_case(i)?;
            let dir = self.case_dir(i);
            write_file(
                &dir.join("gt.pfm"),
                &write_pfm(case.gt.as_ref().expect("generated").depth()),
            )?;
            write_file(
                &dir.join("pred.pfm"),
                &write_pfm(
                    &case
                        .pred
                        .as_ref()
                        .expect("generated")
                        .to_grid()
                        .context(|| "prediction".into())?,
                ),
            )?;
        }
        Ok(())
    }

    fn cmd_synth(&self) -> CliResult<()> {
        if self.config.scene.is_none() && self.inputs()?.gt.is_none() {
            return Err(CliError::Config("inputs.gt is required".into()));
        }
        let scale = self.png_scale();
        for i in 0..self.case_count() {
            let case = self.load_case(i)?;
            let dir = self.case_dir(i);
            for prior in self.build_priors(&case)? {
                let stem = file_stem(&prior.name);
                self.write_depth(&dir, &format!("prior_{stem}"), &prior.clean, scale)?;
                if let Some(noisy) = &prior.noisy {
                    self.write_depth(&dir, &format!("prior_{stem}_noisy"), noisy, scale)?;
                }
                info!(
                    "{}: prior {} has {} valid pixels",
                    dir.display(),
                    prior.name,
                    prior.clean.count_valid()
                );
            }
        }
        Ok(())
    }

    fn png_scale(&self) -> f64 {
        self.config.inputs.as_ref().map_or(1.0, |i| i.png_scale)
    }

    fn write_depth(&self, dir: &Path, stem: &str, map: &DepthMap, scale: f64) -> CliResult<()> {
        write_file(&dir.join(format!("{stem}.pfm")), &write_pfm(map.depth()))?;
        let png = write_depth_png16(map, scale).context(|| stem.to_string())?;
        if png.clamped > 0 {
            warn!("{stem}.png: {} values clamped to the 16-bit range", png.clamped);
        }
        write_file(&dir.join(format!("{stem}.png")), &png.bytes)
    }

    fn cmd_prefill(&self) -> CliResult<()> {
        let mut clamped = 0;
        let mut timings = Timings::default();
        for i in 0..self.case_count() {
            let start = Instant::now();
            let case = self.load_case(i)?;
            let pred = case
                .pred
                .as_ref()
                .ok_or_else(|| CliError::Config("inputs.pred is required".into()))?;
            let priors = self.build_priors(&case)?;
            timings.synth += elapsed_ms(start);
            let dir = self.case_dir(i);
            for prior in &priors {
                for &method in &self.config.methods {
                    let (filled, t) = run_method(method, prior.effective(), Some(pred), &self.config.fill)
                        .context(|| format!("{} on prior {:?}", method.name(), prior.name))?;
                    timings = timings.add(t);
                    clamped += filled.report.clamped;
                    info!(
                        "{}: {} on {}: {} filled, {} clamped",
                        dir.display(),
                        method.name(),
                        prior.name,
                        filled.report.filled,
                        filled.report.clamped
                    );
                    let name = format!("filled_{}_{}.pfm", file_stem(&prior.name), method.name());
                    write_file(&dir.join(name), &write_pfm(filled.map.depth()))?;
                }
            }
        }
        let mut doc = self.document(Vec::new(), clamped, timings);
        doc.timings_ms.metrics = None;
        self.write_report(&doc)
    }

    fn cmd_eval(&self) -> CliResult<()> {
        let inputs_filled = self.config.inputs.as_ref().is_some_and(|i| i.filled.is_some());
        let outcomes = if inputs_filled {
            vec![self.eval_filled_input()?]
        } else {
            self.run_matrix(self.config.metrics.error_maps)?
        };
        self.finish(outcomes)
    }

    fn cmd_bench(&self) -> CliResult<()> {
        if self.config.scene.is_none() {
            return Err(CliError::Config("the bench command needs a [scene] table".into()));
        }
        let outcomes = self.run_matrix(false)?;
        self.finish(outcomes)
    }

    /// Evaluates `inputs.filled` against `inputs.gt`.
    fn eval_filled_input(&self) -> CliResult<CaseOutcome> {
        let case = self.load_case(0)?;
        let gt = case
            .gt
            .as_ref()
            .ok_or_else(|| CliError::Config("inputs.gt is required".into()))?;
        let filled = case.filled.as_ref().expect("checked by caller");
        let region = match self.config.metrics.regions {
            Region::All => None,
            Region::Holes => Some(
                case.measured_prior
                    .as_ref()
                    .ok_or_else(|| CliError::Config("holes-only evaluation needs inputs.prior".into()))?
                    .mask()
                    .not(),
            ),
        };
        let start = Instant::now();
        let metrics =
            evaluate(filled, gt, region.as_ref(), self.config.metrics.lambda).context(|| "evaluation".into())?;
        if self.config.metrics.error_maps {
            self.write_error_maps(&self.out_dir, INPUT_LABEL, INPUT_LABEL, filled, gt)?;
        }
        let prior = if case.measured_prior.is_some() {
            INPUT_LABEL
        } else {
            "-"
        };
        Ok(CaseOutcome {
            records: vec![Record {
                prior: prior.to_string(),
                method: INPUT_LABEL.to_string(),
                metrics,
                clamped: 0,
            }],
            clamped: 0,
            timings: Timings {
                metrics: elapsed_ms(start),
                ..Timings::default()
            },
        })
    }

    /// Runs every (scene, prior, method) cell. Scenes run in parallel; results
    /// come back in scene order and the first failing scene's error wins.
    fn run_matrix(&self, error_maps: bool) -> CliResult<Vec<CaseOutcome>> {
        let results: Vec<CliResult<CaseOutcome>> = (0..self.case_count())
            .into_par_iter()
            .map(|i| self.run_case(i, error_maps))
            .collect();
        results.into_iter().collect()
    }

    fn run_case(&self, index: usize, error_maps: bool) -> CliResult<CaseOutcome> {
        let start = Instant::now();
        let case = self.load_case(index)?;
        let gt = case
            .gt
            .as_ref()
            .ok_or_else(|| CliError::Config("inputs.gt is required".into()))?;
        let pred = case.pred.as_ref();
        let priors = self.build_priors(&case)?;
        let mut out = CaseOutcome {
            timings: Timings {
                synth: elapsed_ms(start),
                ..Timings::default()
            },
            ..CaseOutcome::default()
        };
        let lambda = self.config.metrics.lambda;
        for prior in &priors {
            let region = match self.config.metrics.regions {
                Region::All => None,
                Region::Holes => Some(prior.clean.mask().not()),
            };
            for &method in &self.config.methods {
                let ctx = || format!("scene {index}, prior {:?}, {}", prior.name, method.name());
                let (filled, t) = run_method(method, prior.effective(), pred, &self.config.fill).context(ctx)?;
                let start = Instant::now();
                let metrics = evaluate(&filled.map, gt, region.as_ref(), lambda).context(ctx)?;
                if error_maps {
                    self.write_error_maps(&self.case_dir(index), &prior.name, method.name(), &filled.map, gt)?;
                }
                out.timings = out.timings.add(t).add(Timings {
                    metrics: elapsed_ms(start),
                    ..Timings::default()
                });
                out.clamped += filled.report.clamped;
                out.records.push(Record {
                    prior: prior.name.clone(),
                    method: method.name().to_string(),
                    metrics,
                    clamped: filled.report.clamped,
                });
            }
        }
        Ok(out)
    }

    fn write_error_maps(&self, dir: &Path, prior: &str, method: &str, pred: &DepthMap, gt: &DepthMap) -> CliResult<()> {
        let (err, _) = error_map(pred, gt).context(|| "error map".into())?;
        let stem = format!("error_{}_{method}", file_stem(prior));
        let max = err.values().iter().copied().fold(0.0f32, f32::max);
        let png = write_gray_png(&err, if max > 0.0 { max } else { 1.0 }).context(|| stem.clone())?;
        write_file(&dir.join(format!("{stem}.pfm")), &write_pfm(&err))?;
        write_file(&dir.join(format!("{stem}.png")), &png)
    }

    fn finish(&self, outcomes: Vec<CaseOutcome>) -> CliResult<()> {
        let clamped = outcomes.iter().map(|o| o.clamped).sum();
        let timings = outcomes.iter().fold(Timings::default(), |acc, o| acc.add(o.timings));
        let records: Vec<Record> = outcomes.into_iter().flat_map(|o| o.records).collect();
        let doc = self.document(aggregate(&records), clamped, timings);
        self.write_report(&doc)
    }

    fn document(&self, results: Vec<ResultRow>, clamped: usize, t: Timings) -> ReportDocument {
        let mut doc = ReportDocument::new(env!("CARGO_PKG_VERSION"), self.config.echo());
        doc.results = results;
        doc.clamped_fill_count = clamped;
        if self.config.report.timings {
            doc.timings_ms = StageTimings {
                synth: Some(t.synth),
                index: Some(t.index),
                prefill: Some(t.prefill),
                metrics: Some(t.metrics),
            };
        }
        doc
    }

    fn write_report(&self, doc: &ReportDocument) -> CliResult<()> {
        write_file(&self.out_dir.join(REPORT_FILE), &write_report(doc))
    }
}

/// Runs one method and reports its index and fill time separately.
fn run_method(
    method: Method,
    prior: &DepthMap,
    pred: Option<&RelativePrediction>,
    fill: &FillConfig,
) -> priorfill::Result<(Filled, Timings)> {
    let need_pred =
        || pred.ok_or_else(|| priorfill::Error::BadSpec(format!("method {} needs a prediction", method.name())));
    let mut t = Timings::default();
    let filled = match method {
        Method::Prefill | Method::PrefillUniform => {
            let pred = need_pred()?;
            let cfg = match method {
                Method::PrefillUniform => fill.with_weighting(Weighting::Uniform),
                _ => *fill,
            };
            let start = Instant::now();
            let index = build_index(prior)?;
            t.index = elapsed_ms(start);
            let start = Instant::now();
            let filled = prefill_with_index(prior, pred, &index, &cfg)?;
            t.prefill = elapsed_ms(start);
            filled
        }
        Method::Interpolation => {
            let start = Instant::now();
            let filled = prefill_interpolation(prior, fill.k)?;
            t.prefill = elapsed_ms(start);
            filled
        }
        Method::GlobalAlign => {
            let pred = need_pred()?;
            let start = Instant::now();
            let filled = global_align(prior, pred)?;
            t.prefill = elapsed_ms(start);
            filled
        }
    };
    Ok((filled, t))
}

/// Mean and population standard deviation of AbsRel per (prior, method) cell,
/// ordered by cell name.
fn aggregate(records: &[Record]) -> Vec<ResultRow> {
    let mut keys: Vec<(&str, &str)> = records.iter().map(|r| (r.prior.as_str(), r.method.as_str())).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|(prior, method)| {
            let cell: Vec<&Record> = records
                .iter()
                .filter(|r| r.prior == prior && r.method == method)
                .collect();
            let n = cell.len() as f64;
            let mean = |f: fn(&MetricsReport) -> f64| cell.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
            let absrel_mean = mean(|m| m.absrel);
            let var = cell
                .iter()
                .map(|r| (r.metrics.absrel - absrel_mean).powi(2))
                .sum::<f64>()
                / n;
            ResultRow {
                pattern: prior.to_string(),
                method: method.to_string(),
                scenes: cell.len(),
                absrel_mean,
                absrel_std: var.sqrt(),
                rmse_mean: mean(|m| m.rmse),
                silog_mean: mean(|m| m.silog),
                evaluated_pixels: cell.iter().map(|r| r.metrics.evaluated_pixels).sum(),
                clamped_fills: cell.iter().map(|r| r.clamped).sum(),
            }
        })
        .collect()
}

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Prior names as file-name fragments.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "+-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
