//! `kwskit` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Every command
//! that writes files also writes a JSON [`RunLog`] next to its outputs.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use crate::audio::{load_wav_with, save_wav, AudioClip, LoadOptions, SAMPLE_RATE};
use crate::augment::{mix_noise, spec_augment, MaskFill, MaskPolicy};
use crate::cleaner::{clean_clip, CleanOutcome, CleanerConfig, ClipScorer, ModelScorer, SubprocessScorer, TargetClass};
use crate::cssm::{make_silence, make_unknown, prepare_keyword, slice_background, synthesize_with, CssmParams, PadMode, SynthRecipe, Windows};
use crate::dataset::{load_manifest, speaker_disjointness, validate_counts, ClassId, Split, NUM_KEYWORDS};
use crate::error::{Error, Result};
use crate::frontend::{FeatureMap, FrontendConfig, Mfcc};
use crate::model::{
    count_flops, count_params, forward, param_report, resolve_arch, toggle_report, Architecture, ParamConventions,
    WeightSet, REFERENCE_FLOPS, REFERENCE_PARAMS,
};
use crate::runlog::RunLog;
use crate::scaling::{apply_scaling, consistency_probe, enumerate_candidates, Decimal, SearchSpec};

/// Candidate count reported for the scaling search.
const REFERENCE_CANDIDATES: usize = 75;

#[derive(Parser, Debug)]
#[command(name = "kwskit", version, about = "Keyword-spotting data toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalOptions,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalOptions {
    /// Global seed; sample `i` uses `seed ^ i`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run-log path (default: next to the outputs).
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Embed keywords into continuous-speech backgrounds.
    Synth(SynthArgs),
    /// Compute MFCC feature maps for a directory of WAVs.
    Features(FeaturesArgs),
    /// SpecAugment feature maps and mix noise into WAVs.
    Augment(AugmentArgs),
    /// Keep the most confident window of each raw recording.
    Clean(CleanArgs),
    /// Enumerate compound scaling candidates.
    ScaleSearch(ScaleArgs),
    /// Stage table, parameter and MAC counts.
    ModelInfo(ModelInfoArgs),
    /// Class distribution for WAVs or feature maps.
    Infer(InferArgs),
    /// Check a manifest against the reference class counts.
    Validate(ValidateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Features(_) => "features",
            Command::Augment(_) => "augment",
            Command::Clean(_) => "clean",
            Command::ScaleSearch(_) => "scale-search",
            Command::ModelInfo(_) => "model-info",
            Command::Infer(_) => "infer",
            Command::Validate(_) => "validate",
        }
    }

    fn params(&self) -> serde_json::Value {
        let v = match self {
            Command::Synth(a) => serde_json::to_value(a),
            Command::Features(a) => serde_json::to_value(a),
            Command::Augment(a) => serde_json::to_value(a),
            Command::Clean(a) => serde_json::to_value(a),
            Command::ScaleSearch(a) => serde_json::to_value(a),
            Command::ModelInfo(a) => serde_json::to_value(a),
            Command::Infer(a) => serde_json::to_value(a),
            Command::Validate(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PadModeArg {
    Literal,
    Ramp,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    /// Directory of keyword WAVs (searched recursively).
    #[arg(long)]
    keywords: PathBuf,
    /// Directory of background WAVs, each at least 2 s long.
    #[arg(long)]
    backgrounds: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of keyword samples (default: one per keyword file).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    bound: usize,
    #[arg(long, value_enum, default_value = "literal")]
    pad_mode: PadModeArg,
    /// Noise WAVs for silence and unknown samples.
    #[arg(long)]
    noises: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    silence: usize,
    #[arg(long, default_value_t = 0)]
    unknown: usize,
    /// Noise multiplier N for unknown samples.
    #[arg(long, default_value_t = 0.12)]
    noise_n: f64,
    /// Resample inputs that are not 16 kHz instead of rejecting them.
    #[arg(long)]
    resample: bool,
}

#[derive(Args, Debug, Serialize)]
struct FeaturesArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write CSV instead of the binary `.feat` format.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    resample: bool,
}

#[derive(Args, Debug, Serialize)]
struct AugmentArgs {
    /// Directory of `.feat` maps and/or WAVs.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Maximum frequency-mask width.
    #[arg(long, default_value_t = 5)]
    sa_f: usize,
    /// Maximum time-mask width.
    #[arg(long, default_value_t = 8)]
    sa_t: usize,
    /// Per-axis mask probability.
    #[arg(long, default_value_t = 0.5)]
    sa_p: f64,
    /// Fill masks with the map mean instead of zero.
    #[arg(long)]
    mean_fill: bool,
    /// Noise WAVs mixed into WAV inputs.
    #[arg(long)]
    noises: Option<PathBuf>,
    #[arg(long, default_value_t = 0.12)]
    noise_n: f64,
    #[arg(long)]
    resample: bool,
}

#[derive(Args, Debug, Serialize)]
struct CleanArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.97)]
    threshold: f64,
    #[arg(long, default_value = "1.25s", value_parser = parse_duration)]
    win: usize,
    #[arg(long, default_value = "0.1s", value_parser = parse_duration)]
    stride: usize,
    /// Audit CSV: clip, offset, prob, accepted.
    #[arg(long)]
    audit: Option<PathBuf>,
    /// External scorer command speaking newline-delimited JSON.
    #[arg(long, conflicts_with_all = ["weights", "init_seed"])]
    scorer_cmd: Option<String>,
    #[arg(long, default_value = "a0")]
    arch: String,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Use seeded random weights.
    #[arg(long)]
    init_seed: Option<u64>,
    /// `keyword` (best of the 18 keywords), a class name or an index.
    #[arg(long, default_value = "keyword")]
    target: String,
    #[arg(long)]
    resample: bool,
}

#[derive(Args, Debug, Serialize)]
struct ScaleArgs {
    #[arg(long, default_value = "0.05")]
    target: Decimal,
    #[arg(long, default_value = "0.003")]
    tol: Decimal,
    #[arg(long, default_value = "0.25")]
    lo: Decimal,
    #[arg(long, default_value = "0.6")]
    hi: Decimal,
    #[arg(long, default_value = "0.01")]
    step: Decimal,
    /// Architecture to scale: `b0`, `a0` or a JSON file.
    #[arg(long, default_value = "b0")]
    base: String,
    /// Stage table the scaled channels are compared against.
    #[arg(long, default_value = "a0")]
    reference: String,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ModelInfoArgs {
    #[arg(long, default_value = "a0")]
    arch: String,
    /// Show totals under alternative counting conventions.
    #[arg(long)]
    toggles: bool,
    /// Input frames for MAC counting.
    #[arg(long, default_value_t = 198)]
    frames: usize,
    /// Print a JSON report instead of tables.
    #[arg(long)]
    json: bool,
    /// Write seeded random weights to this file.
    #[arg(long)]
    emit_weights: Option<PathBuf>,
    #[arg(long)]
    init_seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["wav", "features", "input"])))]
struct InferArgs {
    #[arg(long, default_value = "a0")]
    arch: String,
    #[arg(long, conflicts_with = "init_seed")]
    weights: Option<PathBuf>,
    /// Seeded random weights (default: the global seed).
    #[arg(long)]
    init_seed: Option<u64>,
    #[arg(long)]
    wav: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Directory of WAVs and/or `.feat` maps.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// JSON-lines destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    resample: bool,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Check that every manifest path exists under this directory.
    #[arg(long)]
    root: Option<PathBuf>,
    /// JSON report destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `1.25s`, `250ms` or a bare sample count.
pub fn parse_duration(s: &str) -> std::result::Result<usize, String> {
    let t = s.trim();
    let secs = if let Some(v) = t.strip_suffix("ms") {
        v.parse::<f64>().map(|v| v / 1000.0)
    } else if let Some(v) = t.strip_suffix('s') {
        v.parse::<f64>()
    } else {
        return t.parse::<usize>().map_err(|_| format!("'{s}' is not a duration like 1.25s"));
    };
    let secs = secs.map_err(|_| format!("'{s}' is not a duration like 1.25s"))?;
    if !(secs.is_finite() && secs > 0.0) {
        return Err(format!("duration '{s}' must be positive"));
    }
    Ok((secs * f64::from(SAMPLE_RATE)).round() as usize)
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Run(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn report_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match cli.global.threads {
        Some(0) => {
            report_error("usage", "--threads must be at least 1");
            return 2;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            report_error("runtime", &e.to_string());
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            report_error("usage", &m);
            2
        }
        Err(CliError::Run(e)) => {
            report_error("runtime", &e.to_string());
            1
        }
    }
}

struct Ctx<'a> {
    global: &'a GlobalOptions,
    log: RunLog,
}

impl Ctx<'_> {
    fn note(&self, msg: impl AsRef<str>) {
        if self.global.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// Writes the run-log to `--log` or `default`; with neither, no log.
    fn finish(self, default: Option<PathBuf>) -> Result<()> {
        match self.global.log.clone().or(default) {
            Some(p) => self.log.finish(&p),
            None => Ok(()),
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let mut ctx = Ctx {
        global: &cli.global,
        log: RunLog::start(cli.command.name(), cli.global.seed, cli.command.params()),
    };
    ctx.log.params["global"] = serde_json::to_value(&cli.global).expect("options serialize");
    match &cli.command {
        Command::Synth(a) => synth(a, ctx),
        Command::Features(a) => features(a, ctx),
        Command::Augment(a) => augment(a, ctx),
        Command::Clean(a) => clean(a, ctx),
        Command::ScaleSearch(a) => scale_search(a, ctx),
        Command::ModelInfo(a) => model_info(a, ctx),
        Command::Infer(a) => infer(a, ctx),
        Command::Validate(a) => validate(a, ctx),
    }
}

fn sample_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

/// Files under `dir` with one of `exts`, as paths relative to `dir`, sorted.
fn list_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let ext = entry.path().extension().and_then(|e| e.to_str()).unwrap_or("");
        if exts.iter().any(|x| x.eq_ignore_ascii_case(ext)) {
            out.push(entry.path().strip_prefix(dir).expect("walk stays under dir").to_path_buf());
        }
    }
    Ok(out)
}

fn id_of(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn sidecar_log(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".runlog.json");
    PathBuf::from(s)
}

fn load_all(dir: &Path, rels: &[PathBuf], opts: LoadOptions) -> Result<Vec<AudioClip>> {
    rels.par_iter().map(|r| load_wav_with(dir.join(r), opts)).collect()
}

fn require_nonempty(what: &str, dir: &Path, files: &[PathBuf]) -> CliResult<()> {
    if files.is_empty() {
        return usage(format!("no {what} found in {}", dir.display()));
    }
    Ok(())
}

#[derive(Serialize)]
struct ExtraRecipe {
    kind: &'static str,
    output: String,
    seed: u64,
    noise_id: String,
    background_id: Option<String>,
}

fn synth(a: &SynthArgs, mut ctx: Ctx) -> CliResult<()> {
    let params = CssmParams {
        bound: a.bound,
        pad_mode: match a.pad_mode {
            PadModeArg::Literal => PadMode::Literal,
            PadModeArg::Ramp => PadMode::Ramp,
        },
        ..CssmParams::default()
    };
    params.validate()?;
    if (a.silence > 0 || a.unknown > 0) && a.noises.is_none() {
        return usage("--silence and --unknown need --noises");
    }
    let opts = LoadOptions { resample: a.resample };
    let kw_files = list_files(&a.keywords, &["wav"])?;
    let bg_files = list_files(&a.backgrounds, &["wav"])?;
    require_nonempty("keyword WAVs", &a.keywords, &kw_files)?;
    require_nonempty("background WAVs", &a.backgrounds, &bg_files)?;
    let keywords = load_all(&a.keywords, &kw_files, opts)?;
    let backgrounds = load_all(&a.backgrounds, &bg_files, opts)?;
    for r in &kw_files {
        ctx.log.input(a.keywords.join(r));
    }
    for r in &bg_files {
        ctx.log.input(a.backgrounds.join(r));
    }
    let windows = Windows::new(&params)?;
    let count = a.count.unwrap_or(keywords.len());
    let seed = ctx.global.seed;
    let made: Vec<(AudioClip, SynthRecipe)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = sample_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let ki = i % keywords.len();
            let (kw, keyword_offset) = prepare_keyword(&keywords[ki], params.kw_len)?;
            let bi = rng.gen_range(0..backgrounds.len());
            let (bg, background_offset) = slice_background(&backgrounds[bi], &mut rng, params.out_len)?;
            let k = params.sample_k(&mut rng);
            let out = synthesize_with(&kw, &bg, k, &params, &windows)?;
            let recipe = SynthRecipe {
                keyword_id: id_of(&kw_files[ki]),
                background_id: id_of(&bg_files[bi]),
                background_offset,
                keyword_offset,
                k,
                seed: s,
                params,
                clamped_samples: out.clamped_samples,
            };
            Ok((out.clip, recipe))
        })
        .collect::<Result<_>>()?;
    ensure_dir(&a.out)?;
    let mut recipes = String::new();
    let mut clamped = 0;
    for (i, (clip, recipe)) in made.iter().enumerate() {
        let path = a.out.join(format!("{i:05}.wav"));
        save_wav(clip, &path)?;
        ctx.log.output(&path);
        clamped += usize::from(recipe.clamped_samples > 0);
        recipes.push_str(&serde_json::to_string(recipe).map_err(Error::from)?);
        recipes.push('\n');
    }
    let recipe_path = a.out.join("recipes.jsonl");
    write_text(&recipe_path, &recipes)?;
    ctx.log.output(&recipe_path);
    ctx.note(format!("{count} samples, {clamped} clamped"));

    if let Some(noise_dir) = &a.noises {
        let noise_files = list_files(noise_dir, &["wav"])?;
        require_nonempty("noise WAVs", noise_dir, &noise_files)?;
        let noises = load_all(noise_dir, &noise_files, opts)?;
        for r in &noise_files {
            ctx.log.input(noise_dir.join(r));
        }
        let jobs: Vec<(usize, bool)> = (0..a.silence).map(|j| (j, true)).chain((0..a.unknown).map(|j| (j, false))).collect();
        let extras: Vec<(AudioClip, ExtraRecipe)> = jobs
            .par_iter()
            .enumerate()
            .map(|(n, &(j, silence))| {
                let s = sample_seed(seed, count + n);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let ni = rng.gen_range(0..noises.len());
                let (clip, kind, background_id) = if silence {
                    (make_silence(&noises[ni], &mut rng)?, "silence", None)
                } else {
                    let bi = rng.gen_range(0..backgrounds.len());
                    let clip = make_unknown(&backgrounds[bi], &noises[ni], a.noise_n, &mut rng)?;
                    (clip, "unknown", Some(id_of(&bg_files[bi])))
                };
                Ok((
                    clip,
                    ExtraRecipe {
                        kind,
                        output: format!("{kind}_{j:05}.wav"),
                        seed: s,
                        noise_id: id_of(&noise_files[ni]),
                        background_id,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        let mut lines = String::new();
        for (clip, recipe) in &extras {
            let path = a.out.join(&recipe.output);
            save_wav(clip, &path)?;
            ctx.log.output(&path);
            lines.push_str(&serde_json::to_string(recipe).map_err(Error::from)?);
            lines.push('\n');
        }
        let extra_path = a.out.join("extras.jsonl");
        write_text(&extra_path, &lines)?;
        ctx.log.output(&extra_path);
    }
    let default = a.out.join("runlog.json");
    ctx.finish(Some(default))?;
    Ok(())
}

fn features(a: &FeaturesArgs, mut ctx: Ctx) -> CliResult<()> {
    let mfcc = Mfcc::new(FrontendConfig::default())?;
    let files = list_files(&a.input, &["wav"])?;
    require_nonempty("WAVs", &a.input, &files)?;
    let opts = LoadOptions { resample: a.resample };
    let ext = if a.csv { "csv" } else { "feat" };
    let outputs: Vec<PathBuf> = files
        .par_iter()
        .map(|rel| {
            let clip = load_wav_with(a.input.join(rel), opts)?;
            let fm = mfcc.compute(&clip)?;
            let path = a.out.join(rel).with_extension(ext);
            ensure_parent(&path)?;
            if a.csv {
                write_text(&path, &fm.to_csv())?;
            } else {
                fm.save(&path)?;
            }
            Ok(path)
        })
        .collect::<Result<_>>()?;
    for rel in &files {
        ctx.log.input(a.input.join(rel));
    }
    for p in outputs {
        ctx.log.output(p);
    }
    ctx.note(format!("{} feature maps", files.len()));
    ctx.finish(Some(a.out.join("runlog.json")))?;
    Ok(())
}

#[derive(Serialize)]
struct AugmentRecord {
    input: String,
    output: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    masks: Option<crate::augment::MaskDraw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<crate::augment::NoiseDraw>,
}

fn is_wav(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn augment(a: &AugmentArgs, mut ctx: Ctx) -> CliResult<()> {
    let policy = MaskPolicy {
        max_freq_width: a.sa_f,
        max_time_width: a.sa_t,
        p_freq: a.sa_p,
        p_time: a.sa_p,
        fill: if a.mean_fill { MaskFill::Mean } else { MaskFill::Zero },
    };
    if !(0.0..=1.0).contains(&a.sa_p) {
        return usage(format!("--sa-p {} outside [0, 1]", a.sa_p));
    }
    if !(a.noise_n.is_finite() && a.noise_n >= 0.0) {
        return usage(format!("--noise-n {} must be non-negative", a.noise_n));
    }
    let files = list_files(&a.input, &["wav", "feat"])?;
    require_nonempty("WAVs or .feat maps", &a.input, &files)?;
    let has_wav = files.iter().any(|f| is_wav(f));
    let (noise_files, noises) = match (&a.noises, has_wav) {
        (Some(dir), true) => {
            let nf = list_files(dir, &["wav"])?;
            require_nonempty("noise WAVs", dir, &nf)?;
            let n = load_all(dir, &nf, LoadOptions { resample: a.resample })?;
            for r in &nf {
                ctx.log.input(dir.join(r));
            }
            (nf, n)
        }
        (None, true) => return usage("WAV inputs need --noises"),
        _ => (Vec::new(), Vec::new()),
    };
    let seed = ctx.global.seed;
    let records: Vec<AugmentRecord> = files
        .par_iter()
        .enumerate()
        .map(|(i, rel)| {
            let s = sample_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let src = a.input.join(rel);
            let dst = a.out.join(rel);
            ensure_parent(&dst)?;
            let mut rec = AugmentRecord {
                input: id_of(rel),
                output: id_of(rel),
                seed: s,
                masks: None,
                noise_id: None,
                noise: None,
            };
            if is_wav(rel) {
                let clip = load_wav_with(&src, LoadOptions { resample: a.resample })?;
                let ni = rng.gen_range(0..noises.len());
                let (mixed, draw) = mix_noise(&clip, &noises[ni], a.noise_n, &mut rng)?;
                save_wav(&mixed, &dst)?;
                rec.noise_id = Some(id_of(&noise_files[ni]));
                rec.noise = Some(draw);
            } else {
                let fm = FeatureMap::load(&src)?;
                let (masked, draw) = spec_augment(&fm, &policy, &mut rng)?;
                masked.save(&dst)?;
                rec.masks = Some(draw);
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    let mut lines = String::new();
    for (rel, rec) in files.iter().zip(&records) {
        ctx.log.input(a.input.join(rel));
        ctx.log.output(a.out.join(rel));
        lines.push_str(&serde_json::to_string(rec).map_err(Error::from)?);
        lines.push('\n');
    }
    let rec_path = a.out.join("augment.jsonl");
    write_text(&rec_path, &lines)?;
    ctx.log.output(&rec_path);
    ctx.finish(Some(a.out.join("runlog.json")))?;
    Ok(())
}

fn parse_target(s: &str) -> CliResult<TargetClass> {
    if s.eq_ignore_ascii_case("keyword") {
        return Ok(TargetClass::MaxOfFirst(NUM_KEYWORDS));
    }
    if let Ok(i) = s.parse::<usize>() {
        return Ok(TargetClass::Index(ClassId::new(i).map_err(|e| CliError::Usage(e.to_string()))?.index()));
    }
    s.parse::<ClassId>()
        .map(|c| TargetClass::Index(c.index()))
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn load_model(arch: &str, weights: Option<&Path>, init_seed: u64) -> Result<(Architecture, WeightSet)> {
    let arch = resolve_arch(arch)?;
    arch.validate()?;
    let ws = match weights {
        Some(p) => WeightSet::load(p)?,
        None => WeightSet::init_seeded(&arch, init_seed),
    };
    ws.check(&arch)?;
    Ok((arch, ws))
}

#[derive(Serialize)]
struct AuditRow<'a> {
    clip: &'a str,
    offset: usize,
    prob: f64,
    accepted: bool,
}

fn clean(a: &CleanArgs, mut ctx: Ctx) -> CliResult<()> {
    let cfg = CleanerConfig {
        win_len: a.win,
        stride: a.stride,
        threshold: a.threshold,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let target = parse_target(&a.target)?;
    let files = list_files(&a.input, &["wav"])?;
    require_nonempty("WAVs", &a.input, &files)?;
    let opts = LoadOptions { resample: a.resample };
    let one = |rel: &PathBuf, scorer: &mut dyn ClipScorer| -> Result<CleanOutcome> {
        let clip = load_wav_with(a.input.join(rel), opts)?;
        clean_clip(&clip, scorer, target, &cfg)
    };
    let outcomes: Vec<CleanOutcome> = if let Some(cmd) = &a.scorer_cmd {
        let mut parts = cmd.split_whitespace();
        let Some(program) = parts.next() else {
            return usage("--scorer-cmd is empty");
        };
        let args: Vec<String> = parts.map(String::from).collect();
        let mut scorer = SubprocessScorer::spawn(program, &args)?;
        files.iter().map(|rel| one(rel, &mut scorer)).collect::<Result<_>>()?
    } else {
        let Some(seed) = a.init_seed.or(a.weights.as_ref().map(|_| 0)) else {
            return usage("clean needs --scorer-cmd, --weights or --init-seed");
        };
        let (arch, ws) = load_model(&a.arch, a.weights.as_deref(), seed)?;
        if let Some(w) = &a.weights {
            ctx.log.input(w);
        }
        let mfcc = Mfcc::new(FrontendConfig::default())?;
        files
            .par_iter()
            .map(|rel| {
                let mut scorer = ModelScorer {
                    arch: &arch,
                    weights: &ws,
                    frontend: &mfcc,
                };
                one(rel, &mut scorer)
            })
            .collect::<Result<_>>()?
    };
    ensure_dir(&a.out)?;
    let mut audit = a.audit.as_ref().map(|_| csv::Writer::from_writer(Vec::new()));
    let mut kept = 0;
    for (rel, o) in files.iter().zip(&outcomes) {
        ctx.log.input(a.input.join(rel));
        let id = id_of(rel);
        if let Some(w) = audit.as_mut() {
            w.serialize(AuditRow {
                clip: &id,
                offset: o.best.offset,
                prob: o.best.prob,
                accepted: o.accepted,
            })?;
        }
        if let Some(win) = o.accepted_window() {
            let path = a.out.join(rel);
            ensure_parent(&path)?;
            save_wav(win, &path)?;
            ctx.log.output(path);
            kept += 1;
        }
    }
    if let (Some(path), Some(w)) = (&a.audit, audit) {
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        ensure_parent(path)?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        ctx.log.output(path);
    }
    ctx.note(format!("kept {kept} of {}", files.len()));
    ctx.finish(Some(a.out.join("runlog.json")))?;
    Ok(())
}

fn scale_search(a: &ScaleArgs, mut ctx: Ctx) -> CliResult<()> {
    let spec = SearchSpec {
        range_lo: a.lo,
        range_hi: a.hi,
        step: a.step,
        target: a.target,
        tol: a.tol,
        gamma: Decimal::ONE,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let base = resolve_arch(&a.base)?;
    let reference = resolve_arch(&a.reference)?;
    let cands = enumerate_candidates(&spec)?;
    let probes = consistency_probe(&base, &reference, &cands);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "beta", "gamma", "product", "params", "max_channel_dev"])?;
    for (c, p) in cands.iter().zip(&probes) {
        let params = count_params(&apply_scaling(&base, c));
        w.write_record([
            c.alpha.to_string(),
            c.beta.to_string(),
            c.gamma.to_string(),
            format!("{:.6}", c.product()),
            params.to_string(),
            p.max_channel_dev.to_string(),
        ])?;
    }
    let csv_bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    let delta = cands.len() as i64 - REFERENCE_CANDIDATES as i64;
    let count_line = format!("candidates: {} (reference {REFERENCE_CANDIDATES}, delta {delta:+})", cands.len());
    let close = probes.iter().filter(|p| p.within_one_step()).count();
    let probe_line = format!("within one rounding step of {}: {close}", reference.name);
    match &a.out {
        Some(path) => {
            ensure_parent(path)?;
            fs::write(path, &csv_bytes).map_err(|e| Error::io(path, e))?;
            ctx.log.output(path);
            println!("{count_line}");
            println!("{probe_line}");
        }
        None => {
            std::io::stdout()
                .write_all(&csv_bytes)
                .map_err(|e| Error::io("<stdout>", e))?;
            eprintln!("{count_line}");
            eprintln!("{probe_line}");
        }
    }
    ctx.log.params["candidates"] = cands.len().into();
    ctx.finish(a.out.as_deref().map(sidecar_log))?;
    Ok(())
}

#[derive(Serialize)]
struct ModelInfoReport {
    arch: Architecture,
    params: crate::model::ParamReport,
    reference_params: u64,
    input: (usize, usize),
    macs: u64,
    flops: u64,
    reference_flops: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    toggles: Option<crate::model::ToggleReport>,
}

fn pct(actual: u64, reference: u64) -> f64 {
    100.0 * (actual as f64 - reference as f64) / reference as f64
}

fn model_info(a: &ModelInfoArgs, mut ctx: Ctx) -> CliResult<()> {
    let arch = resolve_arch(&a.arch)?;
    arch.validate()?;
    if a.frames == 0 {
        return usage("--frames must be positive");
    }
    let params = param_report(&arch, &ParamConventions::default());
    let input = (a.frames, arch.in_coeffs);
    let flops = count_flops(&arch, input);
    let toggles = a.toggles.then(|| toggle_report(&arch, REFERENCE_PARAMS));
    if a.json {
        let report = ModelInfoReport {
            arch: arch.clone(),
            params,
            reference_params: REFERENCE_PARAMS,
            input,
            macs: flops.macs,
            flops: flops.flops,
            reference_flops: REFERENCE_FLOPS,
            toggles,
        };
        println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    } else {
        println!("{}", arch.name);
        println!(
            "{:>5}  {:<18} {:>6} {:>8} {:>6} {:>6} {:>10}",
            "stage", "operator", "kernel", "channels", "layers", "stride", "params"
        );
        for (s, c) in arch.stages.iter().zip(&params.stages) {
            println!(
                "{:>5}  {:<18} {:>6} {:>8} {:>6} {:>6} {:>10}",
                c.stage,
                s.operator.to_string(),
                format!("{k}x{k}", k = s.kernel),
                s.channels,
                s.repeats,
                s.stride,
                c.params
            );
        }
        println!(
            "params: {} (reference {REFERENCE_PARAMS}, {:+.1}%)",
            params.total,
            pct(params.total, REFERENCE_PARAMS)
        );
        println!(
            "input {}x{}: MACs {}, FLOPs (2xMACs) {} (reference {REFERENCE_FLOPS})",
            input.0, input.1, flops.macs, flops.flops
        );
        if let Some(t) = &toggles {
            println!("convention toggles (reference {}):", t.reference);
            for r in t.conventions.iter().chain(&t.one_layer_fewer) {
                println!("  {:<46} {:>8} {:>+8}", r.label, r.total, r.delta);
            }
        }
    }
    let mut log_path = None;
    if let Some(path) = &a.emit_weights {
        let ws = WeightSet::init_seeded(&arch, a.init_seed.unwrap_or(ctx.global.seed));
        ensure_parent(path)?;
        ws.save(path)?;
        ctx.log.output(path);
        log_path = Some(sidecar_log(path));
    }
    ctx.finish(log_path)?;
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    input: &'a str,
    top: &'static str,
    probs: Vec<f64>,
}

fn infer(a: &InferArgs, mut ctx: Ctx) -> CliResult<()> {
    let (arch, ws) = load_model(&a.arch, a.weights.as_deref(), a.init_seed.unwrap_or(ctx.global.seed))?;
    if let Some(w) = &a.weights {
        ctx.log.input(w);
    }
    let mfcc = Mfcc::new(FrontendConfig::default())?;
    let opts = LoadOptions { resample: a.resample };
    let inputs: Vec<(PathBuf, String)> = match (&a.wav, &a.features, &a.input) {
        (Some(p), _, _) | (_, Some(p), _) => vec![(p.clone(), p.to_string_lossy().into_owned())],
        (_, _, Some(dir)) => {
            let files = list_files(dir, &["wav", "feat"])?;
            require_nonempty("WAVs or .feat maps", dir, &files)?;
            files.into_iter().map(|r| (dir.join(&r), id_of(&r))).collect()
        }
        _ => return usage("infer needs --wav, --features or --in"),
    };
    let force_features = a.features.is_some();
    let preds: Vec<Vec<f64>> = inputs
        .par_iter()
        .map(|(path, _)| {
            let fm = if force_features || !is_wav(path) {
                FeatureMap::load(path)?
            } else {
                mfcc.compute(&load_wav_with(path, opts)?)?
            };
            forward(&arch, &ws, &fm)
        })
        .collect::<Result<_>>()?;
    let mut lines = String::new();
    for ((path, id), probs) in inputs.iter().zip(preds) {
        ctx.log.input(path);
        let top = probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &p)| if p > b.1 { (i, p) } else { b })
            .0;
        let top = ClassId::new(top).map(|c| c.info().name).unwrap_or("?");
        lines.push_str(&serde_json::to_string(&Prediction { input: id, top, probs }).map_err(Error::from)?);
        lines.push('\n');
    }
    match &a.out {
        Some(path) => {
            write_text(path, &lines)?;
            ctx.log.output(path);
        }
        None => print!("{lines}"),
    }
    ctx.finish(a.out.as_deref().map(sidecar_log))?;
    Ok(())
}

#[derive(Serialize)]
struct ValidationReport {
    counts: crate::dataset::CountReport,
    speakers: crate::dataset::SpeakerReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    missing_files: Option<Vec<String>>,
}

fn validate(a: &ValidateArgs, mut ctx: Ctx) -> CliResult<()> {
    let manifest = load_manifest(&a.manifest)?;
    ctx.log.input(&a.manifest);
    let report = ValidationReport {
        counts: validate_counts(&manifest),
        speakers: speaker_disjointness(&manifest),
        missing_files: a.root.as_deref().map(|r| manifest.missing_files(r)),
    };
    for split in Split::ALL {
        let s = report.counts.split(split);
        println!(
            "{:<5} {:>6} of {:>6} (delta {:+})",
            split.as_str(),
            s.total,
            s.reference_total,
            s.delta
        );
    }
    if let Some(m) = &report.missing_files {
        println!("missing files: {}", m.len());
    }
    if let Some(path) = &a.out {
        let mut text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        text.push('\n');
        write_text(path, &text)?;
        ctx.log.output(path);
    }
    ctx.finish(a.out.as_deref().map(sidecar_log))?;
    Ok(())
}
