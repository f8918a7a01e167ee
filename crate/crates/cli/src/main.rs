use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use retinexgan::config::RunConfig;
use retinexgan::dataset::{build_dataset, load_manifest, synth, Manifest, Split, MANIFEST_FILE};
use retinexgan::evalharness::{ablation_markdown, emit_report, run_ablation, run_level_sweep, AblationRow, CurveSeries};
use retinexgan::imgcore::{load_png, save_png, ImageTensor};
use retinexgan::losses::LossConfig;
use retinexgan::metrics::{crop, enhance_image, evaluate, pad_reflect, Enhancer, Identity, Labeled};
use retinexgan::model::{Generator, Strategy};
use retinexgan::tensor::Tensor;
use retinexgan::trainer::{latest_checkpoint, load_checkpoint, train, TrainOptions};
use retinexgan::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "retinexgan", version, about = "Low-light image enhancement with a Retinex-decomposing GAN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize low-light/reference pairs and write a manifest.
    DatasetBuild(DatasetBuildArgs),
    /// Train on a manifest, writing a log and checkpoints.
    Train(TrainArgs),
    /// Enhance one image with a trained checkpoint.
    Infer(InferArgs),
    /// Write the reflectance and illumination factors of one image.
    Decompose(DecomposeArgs),
    /// Score a checkpoint and the identity baseline on a manifest split.
    Eval(EvalArgs),
    /// Train and score the five-rung ablation ladder.
    Ablate(AblateArgs),
    /// Render tables and charts from saved ablation rows and curves.
    Report(ReportArgs),
}

/// Configuration file plus flag overrides; flags win.
#[derive(Args, Debug, Clone, Default)]
struct ConfigArgs {
    /// JSON run configuration. Missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the small desk-scale preset instead of the full-size defaults.
    #[arg(long, conflicts_with = "config")]
    desk: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Brightness levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    base_width: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Tie and regularize the same factor.
    #[arg(long)]
    analysis_consistent: bool,
    #[arg(long)]
    no_smooth_l1: bool,
    #[arg(long)]
    no_ssim: bool,
    #[arg(long)]
    no_gan: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None if self.desk => RunConfig::desk(),
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.strategy {
            cfg.model.strategy = v;
        }
        if let Some(v) = &self.levels {
            cfg.dataset.levels = v.clone();
        }
        if let Some(v) = self.height {
            cfg.dataset.height = v;
        }
        if let Some(v) = self.width {
            cfg.dataset.width = v;
        }
        if let Some(v) = self.depth {
            cfg.model.depth = v;
        }
        if let Some(v) = self.base_width {
            cfg.model.base_width = v;
        }
        if let Some(v) = self.steps {
            cfg.optim.max_steps = v;
        }
        if let Some(v) = self.batch_size {
            cfg.optim.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.optim.lr = v;
        }
        if let Some(v) = self.checkpoint_every {
            cfg.optim.checkpoint_every = v;
        }
        if self.analysis_consistent {
            let keep = (cfg.loss.weights, cfg.loss.flags);
            cfg.loss = LossConfig::analysis_consistent();
            (cfg.loss.weights, cfg.loss.flags) = keep;
        }
        cfg.loss.flags.use_smooth_l1 &= !self.no_smooth_l1;
        cfg.loss.flags.use_ssim &= !self.no_ssim;
        cfg.loss.flags.use_gan &= !self.no_gan;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct DatasetBuildArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Directory of reference PNGs.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    source: Option<PathBuf>,
    /// Generate this many synthetic reference scenes instead of reading `--source`.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Manifest file, or the dataset directory holding it.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Continue from this checkpoint.
    #[arg(long, conflicts_with = "resume_latest")]
    resume: Option<PathBuf>,
    /// Continue from the newest checkpoint under `--out`, if any.
    #[arg(long)]
    resume_latest: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutputKind {
    /// Reflectance times enhanced illumination.
    Composite,
    /// The enhanced illumination alone.
    Illumination,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "composite")]
    output: OutputKind,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// JSON list of ablation rows written by `ablate`.
    #[arg(long)]
    ablation: PathBuf,
    /// JSON curve series written by `eval`.
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn echo_digest(cfg: &RunConfig) {
    println!("config digest: {}", cfg.digest());
}

fn open_manifest(path: &Path) -> Result<Manifest> {
    if path.is_dir() {
        load_manifest(path.join(MANIFEST_FILE))
    } else {
        load_manifest(path)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<S: serde::Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn load_input(path: &Path) -> Result<ImageTensor<f32>> {
    load_png::<f32>(path)?.to_rgb().to_network()
}

fn dataset_build(a: DatasetBuildArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    echo_digest(&cfg);
    create_dir(&a.out)?;
    let source = match (a.source, a.synthetic) {
        (Some(s), _) => s,
        (None, Some(n)) => {
            let dir = a.out.join("sources");
            synth::write_sources(&dir, n, cfg.dataset.height, cfg.dataset.width, cfg.seed)?;
            dir
        }
        (None, None) => unreachable!("clap requires one of --source and --synthetic"),
    };
    let m = build_dataset(&source, &a.out, &cfg.dataset)?;
    cfg.save(a.out.join("config.json"))?;
    let train = m.split(Split::Train).count();
    println!("{} pairs ({} train, {} test) -> {}", m.records.len(), train, m.records.len() - train, a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    echo_digest(&cfg);
    let manifest = open_manifest(&a.manifest)?;
    let resume = if a.resume_latest { latest_checkpoint(&a.out) } else { a.resume };
    create_dir(&a.out)?;
    cfg.save(a.out.join("config.json"))?;
    let out = train::<f32>(&cfg, &manifest, &TrainOptions { out_dir: a.out.clone(), resume })?;
    if let Some(last) = out.history.last() {
        println!("step {} total {:.5}", last.step, last.losses.total);
    }
    if let Some(hash) = &out.first_batch {
        println!("first batch {hash}");
    }
    for c in &out.checkpoints {
        println!("checkpoint {}", c.display());
    }
    Ok(())
}

/// Enhancer returning the enhanced illumination instead of the composite.
struct IlluminationOutput<'a>(&'a Generator<f32>);

impl Enhancer<f32> for IlluminationOutput<'_> {
    fn label(&self) -> String {
        "illumination".into()
    }

    fn enhance(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        Ok(self.0.forward(x, None)?.i_x_enh)
    }

    fn size_multiple(&self) -> usize {
        self.0.config.size_multiple()
    }
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn infer(a: InferArgs) -> Result<()> {
    let (cfg, state) = load_checkpoint::<f32>(&a.checkpoint)?;
    echo_digest(&cfg);
    let x = load_input(&a.input)?;
    let (img, suffix) = match a.output {
        OutputKind::Composite => {
            let model = Labeled { label: "model".into(), generator: &state.gen };
            (enhance_image(&model, &x)?, "enhanced")
        }
        OutputKind::Illumination => (enhance_image(&IlluminationOutput(&state.gen), &x)?, "illumination"),
    };
    create_dir(&a.out)?;
    let path = a.out.join(format!("{}_{suffix}.png", file_stem(&a.input)));
    save_png(&img.to_rgb(), &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn decompose(a: DecomposeArgs) -> Result<()> {
    let (cfg, state) = load_checkpoint::<f32>(&a.checkpoint)?;
    echo_digest(&cfg);
    let x = load_input(&a.input)?;
    let (h, w) = (x.height(), x.width());
    let m = cfg.model.size_multiple();
    let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
    let batch = pad_reflect(&x.tensor().clone().reshape(&[1, 3, h, w])?, ph, pw);
    let d = state.gen.decompose(&batch)?;
    create_dir(&a.out)?;
    for (name, t) in [("R.png", d.r), ("I.png", d.i)] {
        let c = t.dims()[1];
        let view = crop(&t, h, w).reshape(&[c, h, w])?;
        let path = a.out.join(name);
        save_png(&ImageTensor::from_network_tensor(view)?.from_network()?, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let (cfg, state) = load_checkpoint::<f32>(&a.checkpoint)?;
    echo_digest(&cfg);
    let manifest = open_manifest(&a.manifest)?;
    let model = Labeled { label: "model".into(), generator: &state.gen };
    create_dir(&a.out)?;
    let models: [&dyn Enhancer<f32>; 2] = [&model, &Identity];
    for m in models {
        let report = evaluate(m, &manifest, a.split)?;
        let label = report.label.clone();
        report.write_csv(&a.out.join(format!("metrics_{label}.csv")))?;
        report.write_json(&a.out.join(format!("metrics_{label}.json")))?;
        println!(
            "{label}: PSNR {:.2} dB, MSE {:.2}, SSIM {:.4} over {} images",
            report.overall.psnr_db, report.overall.mse, report.overall.ssim, report.overall.count
        );
    }
    if manifest.levels().len() >= 2 {
        let curves = run_level_sweep(&models, &manifest, a.split)?;
        let path = a.out.join("curves.json");
        write_json(&path, &curves)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    echo_digest(&cfg);
    let manifest = open_manifest(&a.manifest)?;
    create_dir(&a.out)?;
    let runs = run_ablation::<f32>(&manifest, &cfg, &cfg.optim, cfg.seed, &a.out.join("runs"))?;
    let rows: Vec<AblationRow> = runs.iter().map(|r| r.row.clone()).collect();
    write_json(&a.out.join("ablation.json"), &rows)?;
    let mut prov = String::from("label,first_batch,checkpoint\n");
    for r in &runs {
        prov.push_str(&format!("{},{},{}\n", r.row.label, r.first_batch, r.checkpoint.display()));
    }
    let path = a.out.join("ablation_runs.csv");
    fs::write(&path, prov).map_err(|e| Error::io(&path, e))?;
    print!("{}", ablation_markdown(&rows));
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    echo_digest(&a.cfg.resolve()?);
    let rows: Vec<AblationRow> = read_json(&a.ablation)?;
    let curves: Vec<CurveSeries> = read_json(&a.curves)?;
    let files = emit_report(&rows, &curves, &a.out)?;
    for p in [&files.ablation_csv, &files.ablation_md].into_iter().chain(&files.curve_csv).chain(&files.curve_png) {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DatasetBuild(a) => dataset_build(a),
        Command::Train(a) => train_cmd(a),
        Command::Infer(a) => infer(a),
        Command::Decompose(a) => decompose(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
