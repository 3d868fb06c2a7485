//! `bintemp`: fit, apply and evaluate temperature-scaling calibration maps.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bintemp::augment::{apply_random, AugmentKind, AugmentOp};
use bintemp::binning::{bins_by_count_with_threshold, bins_confidence_interval, DEFAULT_HIGH_CONF_THRESHOLD};
use bintemp::btsfit::{augmented_id, DEFAULT_AUG_CUTOFF};
use bintemp::diagram::reliability_svg;
use bintemp::io::{self, InputDigest, MapFile, Provenance};
use bintemp::metrics::{accuracy, nll_per_sample_temperature, DEFAULT_ECE_BINS};
use bintemp::tempfit::DEFAULT_MIN_BIN_SAMPLES;
use bintemp::{
    fit_abts, fit_bts, fit_ts, generate, pnm, reliability, select_for_augmentation, CalibrationMap, FitConfig,
    LogitDataset, SynthConfig, TemperatureProfile,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "bintemp", version, about = "Temperature, bin-wise and augmentation-based bin-wise temperature scaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a calibration map on validation logits.
    Fit(FitArgs),
    /// Calibrate logits with a fitted map.
    Apply(ApplyArgs),
    /// Report ECE, NLL and accuracy, optionally after calibration.
    Eval(EvalArgs),
    /// List validation samples whose confidence is below the augmentation cutoff.
    SelectAugment(SelectArgs),
    /// Generate synthetic logits with a known miscalibration.
    Synth(SynthArgs),
    /// Write randomly augmented copies of PPM/PGM images.
    Augment(AugmentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ts,
    Bts,
    Abts,
}

#[derive(Clone, Copy, ValueEnum)]
enum Binning {
    /// Equal-width bins over [0, 1].
    Interval,
    /// Equal validation counts plus a bin for confidences above the threshold.
    Count,
}

#[derive(Args)]
struct FitConfigArgs {
    #[arg(long, default_value_t = 0.05)]
    t_min: f64,
    #[arg(long, default_value_t = 20.0)]
    t_max: f64,
    /// Golden-section tolerance on the inverse temperature.
    #[arg(long = "tol", default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Bins with fewer validation samples use the global temperature.
    #[arg(long, default_value_t = DEFAULT_MIN_BIN_SAMPLES)]
    min_bin_samples: usize,
}

impl FitConfigArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            t_min: self.t_min,
            t_max: self.t_max,
            tolerance: self.tolerance,
            max_iterations: self.max_iter,
            min_bin_samples: self.min_bin_samples,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, value_enum, default_value = "count")]
    binning: Binning,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Confidence above which samples share the top bin (count binning).
    #[arg(long, default_value_t = DEFAULT_HIGH_CONF_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    val: PathBuf,
    /// Logits of augmented validation samples, IDs `<source>__aug<k>` (abts only).
    #[arg(long)]
    aug: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_AUG_CUTOFF)]
    cutoff: f64,
    #[command(flatten)]
    fit: FitConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ECE_BINS)]
    ece_bins: usize,
    /// Write the reliability report as CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write a reliability diagram as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    val: PathBuf,
    #[arg(long, default_value_t = DEFAULT_AUG_CUTOFF)]
    cutoff: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// `const:T` or `piecewise:CUTOFF,T_LOW,T_HIGH`.
    #[arg(long)]
    profile: String,
    #[arg(long, default_value_t = SynthConfig::DEFAULT_LOGIT_SCALE)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    in_dir: PathBuf,
    /// One sample ID per line; images are `<id>.ppm` or `<id>.pgm`.
    #[arg(long)]
    ids: PathBuf,
    /// `shift:LO,HI`, `bright:LO,HI`, `contrast:ALPHA` or `blur:LO,HI`.
    #[arg(long, allow_hyphen_values = true)]
    op: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Augmentation pass number k in the output name `<id>__aug<k>`.
    #[arg(long, default_value_t = 1)]
    pass: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Writes to a sibling temporary file and renames, so a failed run never
/// leaves a partial artifact behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

fn load_logits(path: &Path) -> Result<LogitDataset> {
    io::load_logits(path).with_context(|| format!("reading logits from {}", path.display()))
}

fn load_map(path: &Path) -> Result<MapFile> {
    MapFile::load(path).with_context(|| format!("reading calibration map {}", path.display()))
}

fn digest(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(InputDigest {
        role: role.into(),
        path: path.display().to_string(),
        sha256,
    })
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let config = args.fit.config();
    config.validate()?;
    let val = load_logits(&args.val)?;
    if args.aug.is_some() && !matches!(args.method, Method::Abts) {
        bail!("--aug is only used with --method abts");
    }
    let spec = || -> Result<_> {
        Ok(match args.binning {
            Binning::Interval => bins_confidence_interval(args.bins)?,
            Binning::Count => bins_by_count_with_threshold(&val.raw_confidences(), args.bins, args.threshold)
                .context("building equal-count bins on the validation set")?,
        })
    };
    let mut inputs = vec![digest("validation", &args.val)?];
    let map = match args.method {
        Method::Ts => fit_ts(&val, &config)?,
        Method::Bts => fit_bts(&val, &spec()?, &config)?,
        Method::Abts => {
            let selection = select_for_augmentation(&val, args.cutoff)?;
            let aug = match &args.aug {
                Some(path) => {
                    inputs.push(digest("augmented", path)?);
                    load_logits(path)?
                }
                None => LogitDataset::new(val.num_classes(), vec![], vec![], None)?,
            };
            fit_abts(&val, &aug, &selection, &spec()?, &config)?
        }
    };

    let file = MapFile {
        map,
        provenance: Provenance {
            num_classes: val.num_classes(),
            inputs,
            seed: None,
        },
    };
    write_atomic(&args.out, file.to_json()?.as_bytes())?;

    let map = &file.map;
    println!("method {}  bins {}", map.method, map.n_bins());
    println!("global temperature {:.6}", map.fallback_temperature);
    for j in 0..map.n_bins() {
        let (lo, hi) = map.spec.bounds(j);
        let note = if map.is_fallback(j) { "  (fallback)" } else { "" };
        println!(
            "bin {j:>3} [{lo:.6}, {hi:.6}]  n={:<7} t={:.6}{note}",
            map.per_bin_counts[j], map.temperatures[j]
        );
    }
    let before = bintemp::nll(&val, 1.0, None)?;
    let after = nll_per_sample_temperature(&val, &map.sample_temperatures(&val))?;
    println!("validation NLL before {before:.6}  after {after:.6}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn check_classes(map: &MapFile, data: &LogitDataset) -> Result<()> {
    let expected = map.provenance.num_classes;
    if expected != 0 && expected != data.num_classes() {
        bail!(
            "class-count mismatch: map was fitted on {expected} classes, input has {}",
            data.num_classes()
        );
    }
    Ok(())
}

fn cmd_apply(args: &ApplyArgs) -> Result<()> {
    let file = load_map(&args.map)?;
    let data = load_logits(&args.input)?;
    check_classes(&file, &data)?;
    let applied = file.map.apply_detailed(&data);
    let mut out = Vec::new();
    io::write_applied(&mut out, &data, &applied)?;
    write_atomic(&args.out, &out)?;
    println!("calibrated {} samples, wrote {}", data.len(), args.out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let data = load_logits(&args.input)?;
    if data.is_empty() {
        bail!("{} has no samples", args.input.display());
    }
    let (map, label) = match &args.map {
        Some(path) => {
            let file = load_map(path)?;
            check_classes(&file, &data)?;
            let label = format!("{} calibrated", file.map.method);
            (file.map, label)
        }
        None => (CalibrationMap::identity_with_temperature(1.0, FitConfig::default())?, "uncalibrated".into()),
    };
    let preds = map.apply(&data);
    let pairs: Vec<(f64, bool)> = preds
        .iter()
        .zip(data.labels())
        .map(|(p, &y)| (p.confidence, p.predicted_class == y))
        .collect();
    let report = reliability(&pairs, args.ece_bins)?;
    let ece = report.ece()?;
    let nll = nll_per_sample_temperature(&data, &map.sample_temperatures(&data))?;

    println!("{label}");
    println!("samples  {}", data.len());
    println!("accuracy {:.4}", accuracy(&data)?);
    println!("NLL      {nll:.4}");
    println!("ECE      {ece:.4}  ({} bins)", args.ece_bins);

    if let Some(path) = &args.report {
        let mut out = Vec::new();
        io::write_report(&mut out, &report)?;
        write_atomic(path, &out)?;
    }
    if let Some(path) = &args.svg {
        let title = format!("Reliability diagram ({label})");
        write_atomic(path, reliability_svg(&report, ece, &title).as_bytes())?;
    }
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let val = load_logits(&args.val)?;
    let selection = select_for_augmentation(&val, args.cutoff)
        .with_context(|| format!("selecting from {}", args.val.display()))?;
    let mut out = Vec::new();
    io::write_id_list(&mut out, &selection.selected_ids)?;
    write_atomic(&args.out, &out)?;
    println!(
        "selected {} of {} samples with confidence < {}",
        selection.selected_ids.len(),
        val.len(),
        args.cutoff
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let profile: TemperatureProfile = args.profile.parse()?;
    let config = SynthConfig {
        n_samples: args.n,
        n_classes: args.classes,
        logit_scale: args.scale,
        profile,
        seed: args.seed,
    };
    let data = generate(&config)?;
    let mut out = Vec::new();
    io::write_logits(&mut out, &data)?;
    write_atomic(&args.out, &out)?;
    println!("wrote {} samples to {}", data.len(), args.out.display());
    Ok(())
}

fn cmd_augment(args: &AugmentArgs) -> Result<()> {
    let op = AugmentOp {
        kind: args.op.parse::<AugmentKind>()?,
        seed: args.seed,
    };
    let ids_file = fs::File::open(&args.ids).with_context(|| format!("opening {}", args.ids.display()))?;
    let ids = io::read_id_list(BufReader::new(ids_file))?;
    fs::create_dir_all(&args.out_dir)?;
    for (i, id) in ids.iter().enumerate() {
        let source = ["ppm", "pgm"]
            .iter()
            .map(|ext| args.in_dir.join(format!("{id}.{ext}")))
            .find(|p| p.is_file())
            .with_context(|| format!("no image {id}.ppm or {id}.pgm in {} for id {id:?}", args.in_dir.display()))?;
        let img = pnm::read(&source).with_context(|| format!("reading image for id {id:?}"))?;
        let out = apply_random(&img, &op, i as u64).with_context(|| format!("augmenting id {id:?}"))?;
        let name = format!("{}.{}", augmented_id(id, args.pass), pnm::extension(&out));
        write_atomic(&args.out_dir.join(name), &pnm::encode(&out))?;
    }
    println!("augmented {} images into {}", ids.len(), args.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Apply(a) => cmd_apply(a),
        Command::Eval(a) => cmd_eval(a),
        Command::SelectAugment(a) => cmd_select(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Augment(a) => cmd_augment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
