//! `morphnet` command-line front end.
//!
//! Verbs: `gen-circles`, `gen-hinge-grid`, `train`, `eval`, `decision-grid`,
//! `simplify`, `construct`, `filter2d`, `dehaze-toy`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 verification failure. Output
//! files are written atomically (temp file + rename). Every verb is
//! deterministic given `--seed`; `MORPHNET_THREADS` caps internal workers.

mod arch;
mod io_util;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use morphnet::constructor::{build_two_layer, certify, hinge_json, CompactBox};
use morphnet::dataset::{gen_hinge_grid, gen_two_circles, Dataset};
use morphnet::hinge::{enumerate_regions, hyperplane_bounds};
use morphnet::morph2d::{
    dehaze_reconstruct, dilate2d, erode2d, soft_dilate2d, soft_erode2d, ImageGrid, Padding,
    StructuringElement2D,
};
use morphnet::network::{
    classification_accuracy, load_json, mean_loss, save_json, train, BetaAnneal,
    DilationErosionLayer, InitScheme, Layer, LinearLayer, LossKind, Mode, Network, Optimizer,
    TrainConfig,
};
use morphnet::pgm::{load_pgm, save_pgm, PgmFormat};
use morphnet::rewrite::simplify;
use morphnet::tropical::Hardness;

pub use io_util::atomic_save;

/// Errors split by exit code: input problems (1) vs failed verification (2).
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Verification(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "{msg}"),
            CliError::Verification(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl From<morphnet::Error> for CliError {
    fn from(e: morphnet::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "morphnet",
    about = "Trainable morphological networks: datasets, training, hinge analysis, layer fusion, 2D filtering",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the two-concentric-circles classification dataset.
    GenCircles(GenCirclesArgs),
    /// Generate the max(x+y, 0) regression grid.
    GenHingeGrid(GenHingeGridArgs),
    /// Train a network described by the architecture mini-language.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Export the linear-region decision map of a model's first block.
    DecisionGrid(DecisionGridArgs),
    /// Fuse pure dilation/erosion chains in a saved model.
    Simplify(SimplifyArgs),
    /// Build the exact two-layer network for a hinge-sum JSON and certify it.
    Construct(ConstructArgs),
    /// Apply a 2D morphological operator to a PGM image.
    Filter2d(Filter2dArgs),
    /// Synthesize haze over an image and verify the reconstruction formula.
    DehazeToy(DehazeToyArgs),
}

#[derive(Args)]
struct GenCirclesArgs {
    #[arg(long, default_value_t = 500)]
    n_per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    r_inner: f64,
    #[arg(long, default_value_t = 2.0)]
    r_outer: f64,
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenHingeGridArgs {
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    hi: f64,
    #[arg(long, default_value_t = 41)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// e.g. "de:2+bias,linear:1,sigmoid"; see the README for the grammar.
    #[arg(long)]
    arch: String,
    #[arg(long)]
    data: PathBuf,
    /// "mse", "bce", or "dssim:<h>x<w>:<patch>:<stride>".
    #[arg(long, default_value = "mse")]
    loss: String,
    /// "adam" or "sgd".
    #[arg(long, default_value = "adam")]
    opt: String,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// "default", "zeros", or "uniform:<lo>:<hi>".
    #[arg(long, default_value = "default")]
    init: String,
    /// Multiply soft-layer beta by 1.5 every 50 epochs (cap 200).
    #[arg(long, default_value_t = false)]
    anneal: bool,
    #[arg(long)]
    out: PathBuf,
    /// Loss-trace CSV ("epoch,loss").
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args)]
struct DecisionGridArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    hi: f64,
    #[arg(long, default_value_t = 512)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimplifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConstructArgs {
    /// Hinge-sum JSON: [{"alpha": 1, "planes": [{"w": [...], "b": 0.0}, ...]}, ...]
    #[arg(long)]
    hinges: PathBuf,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    hi: f64,
    #[arg(long, default_value_t = 10000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-9, allow_negative_numbers = true)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Filter2dArgs {
    /// "dilate", "erode", "soft-dilate", or "soft-erode".
    #[arg(long)]
    op: String,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Flat (all-zero) square structuring element of this odd size.
    #[arg(long, default_value_t = 3)]
    se_size: usize,
    /// Structuring element from a CSV grid instead of a flat one.
    #[arg(long)]
    se_csv: Option<PathBuf>,
    /// "replicate" or "infinite".
    #[arg(long, default_value = "replicate")]
    padding: String,
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    /// Write ASCII (P2) instead of binary (P5).
    #[arg(long, default_value_t = false)]
    ascii: bool,
}

#[derive(Args)]
struct DehazeToyArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    t_min: f64,
    #[arg(long, default_value_t = 0.9)]
    t_max: f64,
    #[arg(long, default_value_t = 0.8)]
    airlight: f64,
}

pub fn main_impl() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep the exit-code contract: usage problems are input errors (1),
            // --help/--version are successes
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::GenCircles(a) => gen_circles_cmd(a),
        Command::GenHingeGrid(a) => gen_hinge_grid_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::DecisionGrid(a) => decision_grid_cmd(a),
        Command::Simplify(a) => simplify_cmd(a),
        Command::Construct(a) => construct_cmd(a),
        Command::Filter2d(a) => filter2d_cmd(a),
        Command::DehazeToy(a) => dehaze_toy_cmd(a),
    }
}

fn gen_circles_cmd(a: GenCirclesArgs) -> CliResult {
    let ds: Dataset<f64> =
        gen_two_circles(a.n_per_class, a.r_inner, a.r_outer, a.noise_sd, a.seed)?;
    atomic_save(&a.out, |tmp| ds.save_csv(tmp))?;
    println!("wrote {} rows to {}", ds.len(), a.out.display());
    Ok(())
}

fn gen_hinge_grid_cmd(a: GenHingeGridArgs) -> CliResult {
    let ds: Dataset<f64> = gen_hinge_grid(a.lo, a.hi, a.resolution)?;
    atomic_save(&a.out, |tmp| ds.save_csv(tmp))?;
    println!("wrote {} rows to {}", ds.len(), a.out.display());
    Ok(())
}

fn parse_loss(spec: &str) -> Result<LossKind, CliError> {
    match spec {
        "mse" => Ok(LossKind::Mse),
        "bce" => Ok(LossKind::Bce),
        other => {
            let rest = other
                .strip_prefix("dssim:")
                .ok_or_else(|| CliError::Input(format!("unknown loss '{other}'")))?;
            let parts: Vec<&str> = rest.split(':').collect();
            let bad = || CliError::Input(format!("dssim loss needs <h>x<w>:<patch>:<stride>, got '{other}'"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let (h, w) = parts[0].split_once('x').ok_or_else(bad)?;
            Ok(LossKind::Dssim {
                height: h.parse().map_err(|_| bad())?,
                width: w.parse().map_err(|_| bad())?,
                patch: parts[1].parse().map_err(|_| bad())?,
                stride: parts[2].parse().map_err(|_| bad())?,
            })
        }
    }
}

fn parse_init(spec: &str) -> Result<InitScheme, CliError> {
    match spec {
        "default" => Ok(InitScheme::Default),
        "zeros" => Ok(InitScheme::Zeros),
        other => {
            let rest = other
                .strip_prefix("uniform:")
                .ok_or_else(|| CliError::Input(format!("unknown init '{other}'")))?;
            let (lo, hi) = rest
                .split_once(':')
                .ok_or_else(|| CliError::Input("uniform init needs uniform:<lo>:<hi>".into()))?;
            let lo: f64 = lo.parse().map_err(|_| CliError::Input(format!("bad init bound '{lo}'")))?;
            let hi: f64 = hi.parse().map_err(|_| CliError::Input(format!("bad init bound '{hi}'")))?;
            Ok(InitScheme::Uniform { lo, hi })
        }
    }
}

fn train_cmd(a: TrainArgs) -> CliResult {
    let data = Dataset::<f64>::load_csv(&a.data)?;
    let net = arch::build_network(data.dim(), &a.arch)?;
    let optimizer = match a.opt.as_str() {
        "adam" => Optimizer::adam(a.lr),
        "sgd" => Optimizer::Sgd { lr: a.lr },
        other => return Err(CliError::Input(format!("unknown optimizer '{other}'"))),
    };
    let cfg = TrainConfig {
        loss: parse_loss(&a.loss)?,
        optimizer,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        init: Some(parse_init(&a.init)?),
        beta_anneal: a.anneal.then(BetaAnneal::default),
    };
    let report = train(&net, &data, &cfg)?;
    atomic_save(&a.out, |tmp| save_json(&report.network, tmp))?;
    if let Some(trace_path) = &a.trace {
        atomic_save(trace_path, |tmp| {
            let mut text = String::from("epoch,loss\n");
            for (epoch, loss) in report.loss_trace.iter().enumerate() {
                text.push_str(&format!("{epoch},{loss}\n"));
            }
            std::fs::write(tmp, text)?;
            Ok(())
        })?;
    }
    let final_loss = report.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!("final_loss {final_loss}");
    if report.network.output_dim() == 1 && data.label_dim() == 1 && labels_binary(&data) {
        let acc = classification_accuracy(&report.network, &data, 0.5)?;
        println!("accuracy {acc}");
    }
    println!("model {}", a.out.display());
    Ok(())
}

fn labels_binary(data: &Dataset<f64>) -> bool {
    data.rows()
        .iter()
        .all(|(_, y)| y[0] == 0.0 || y[0] == 1.0)
}

fn eval_cmd(a: EvalArgs) -> CliResult {
    let net: Network<f64> = load_json(&a.model)?;
    let data = Dataset::<f64>::load_csv(&a.data)?;
    let mse = mean_loss(&net, &data, LossKind::Mse)?;
    println!("mse {mse}");
    if net.output_dim() == 1 && data.label_dim() == 1 && labels_binary(&data) {
        let acc = classification_accuracy(&net, &data, a.threshold)?;
        println!("accuracy {acc}");
    }
    Ok(())
}

/// First dilation-erosion layer plus the following linear layer, hardened.
fn leading_block(net: &Network<f64>) -> Result<(DilationErosionLayer<f64>, LinearLayer<f64>), CliError> {
    let mut layers = net.layers().iter();
    let de = match layers.next() {
        Some(Layer::DilationErosion(de)) => de.clone(),
        _ => {
            return Err(CliError::Input(
                "model must start with a dilation-erosion layer".into(),
            ))
        }
    };
    let lin = match layers.next() {
        Some(Layer::Linear(lin)) if lin.out_dim() == 1 => lin.clone(),
        _ => {
            return Err(CliError::Input(
                "second layer must be a 1-output linear combination".into(),
            ))
        }
    };
    let mut de = de;
    de.set_mode(Mode::Hard);
    Ok((de, lin))
}

fn decision_grid_cmd(a: DecisionGridArgs) -> CliResult {
    let net: Network<f64> = load_json(&a.model)?;
    let (de, lin) = leading_block(&net)?;
    let lin_for_regions = LinearLayer::new(lin.weights().clone(), None)?;
    let bx = CompactBox::new(vec![a.lo, a.lo], vec![a.hi, a.hi])?;
    let regions = enumerate_regions(&de, &lin_for_regions, &bx, a.resolution)?;
    atomic_save(&a.out, |tmp| {
        let file = std::fs::File::create(tmp)?;
        regions.write_csv(std::io::BufWriter::new(file))
    })?;
    let l = de.n_dilation() + de.n_erosion();
    let bounds = hyperplane_bounds(2, l, de.with_bias())?;
    println!("regions {}", regions.region_count());
    println!("signatures {}", regions.signature_count());
    println!("hyperplane_bound {}", bounds.total);
    println!("grid {}", a.out.display());
    Ok(())
}

fn simplify_cmd(a: SimplifyArgs) -> CliResult {
    let net: Network<f64> = load_json(&a.model)?;
    let outcome = simplify(&net)?;
    for line in &outcome.log {
        println!("{line}");
    }
    println!(
        "layers {} -> {}",
        net.layers().len(),
        outcome.network.layers().len()
    );
    atomic_save(&a.out, |tmp| save_json(&outcome.network, tmp))?;
    Ok(())
}

fn construct_cmd(a: ConstructArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.hinges).map_err(|e| {
        CliError::Input(format!("cannot read {}: {e}", a.hinges.display()))
    })?;
    let hinges = hinge_json::from_str::<f64>(&text)?;
    let dim = hinges
        .first()
        .map(|h| h.dim())
        .ok_or_else(|| CliError::Input("hinge list is empty".into()))?;
    let bx = CompactBox::new(vec![a.lo; dim], vec![a.hi; dim])?;
    if bx.is_degenerate() {
        eprintln!("note: box has zero volume on some axis");
    }
    let built = build_two_layer(&hinges, &bx)?;
    let report = certify(&built.network, &hinges, &bx, a.samples, a.tol, a.seed)?;
    atomic_save(&a.out, |tmp| save_json(&built.network, tmp))?;
    println!("max_abs_err {}", report.max_abs_err);
    println!(
        "argmax_point {}",
        report
            .argmax_point
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    println!("model {}", a.out.display());
    if !report.passed {
        return Err(CliError::Verification(format!(
            "max_abs_err {} exceeds tol {}",
            report.max_abs_err, a.tol
        )));
    }
    Ok(())
}

fn load_se(a: &Filter2dArgs) -> Result<StructuringElement2D<f64>, CliError> {
    match &a.se_csv {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let row: Vec<f64> = line
                    .split(',')
                    .map(|tok| {
                        tok.trim().parse::<f64>().map_err(|_| {
                            CliError::Input(format!("bad SE value '{tok}' on line {}", i + 1))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                rows.push(row);
            }
            let height = rows.len();
            let width = rows.first().map(|r| r.len()).unwrap_or(0);
            if height == 0 || width == 0 || rows.iter().any(|r| r.len() != width) {
                return Err(CliError::Input("SE CSV must be a non-empty rectangle".into()));
            }
            Ok(StructuringElement2D::new(height, width, rows.concat())?)
        }
        None => {
            if a.se_size == 0 {
                return Err(CliError::Input("se-size must be >= 1".into()));
            }
            Ok(StructuringElement2D::flat(a.se_size, a.se_size))
        }
    }
}

fn filter2d_cmd(a: Filter2dArgs) -> CliResult {
    let image: ImageGrid<f64> = load_pgm(&a.image)?;
    let se = load_se(&a)?;
    let padding = match a.padding.as_str() {
        "replicate" => Padding::Replicate,
        "infinite" => Padding::Infinite,
        other => return Err(CliError::Input(format!("unknown padding '{other}'"))),
    };
    let out = match a.op.as_str() {
        "dilate" => dilate2d(&image, &se, padding)?,
        "erode" => erode2d(&image, &se, padding)?,
        "soft-dilate" => soft_dilate2d(&image, &se, Hardness::new(a.beta)?, padding)?,
        "soft-erode" => soft_erode2d(&image, &se, Hardness::new(a.beta)?, padding)?,
        other => return Err(CliError::Input(format!("unknown op '{other}'"))),
    };
    let format = if a.ascii { PgmFormat::Ascii } else { PgmFormat::Binary };
    atomic_save(&a.out, |tmp| save_pgm(&out, format, tmp))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn dehaze_toy_cmd(a: DehazeToyArgs) -> CliResult {
    if !(a.t_min > 0.0 && a.t_min <= a.t_max && a.t_max <= 1.0) {
        return Err(CliError::Input(
            "need 0 < t-min <= t-max <= 1 for a valid transmittance ramp".into(),
        ));
    }
    if !(0.0..=1.0).contains(&a.airlight) {
        return Err(CliError::Input("airlight must lie in [0,1]".into()));
    }
    let clean: ImageGrid<f64> = load_pgm(&a.image)?;
    let (h, w) = (clean.height(), clean.width());

    // vertical transmittance ramp: haze thickens toward the top of the frame
    let t = ImageGrid::from_fn(h, w, |i, _| {
        a.t_min + (a.t_max - a.t_min) * (i as f64) / ((h - 1).max(1) as f64)
    })?;
    // airlight map K = (1 - t) A keeps the hazy image inside [0,1]
    let k = ImageGrid::from_fn(h, w, |i, j| (1.0 - t.get(0, i, j)) * a.airlight)?;
    let hazy = ImageGrid::from_fn(h, w, |i, j| {
        t.get(0, i, j) * clean.get(0, i, j) + k.get(0, i, j)
    })?;
    let recovered = dehaze_reconstruct(&hazy, &t, &k)?;

    let max_err = clean
        .data()
        .iter()
        .zip(recovered.data())
        .map(|(&a, &b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let dssim = morphnet::network::loss_dssim(&clean, &recovered, 8.min(h).min(w), 4)?;

    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", a.out_dir.display())))?;
    for (name, img) in [
        ("hazy.pgm", &hazy),
        ("transmittance.pgm", &t),
        ("airlight.pgm", &k),
        ("recovered.pgm", &recovered),
    ] {
        let path = a.out_dir.join(name);
        atomic_save(&path, |tmp| save_pgm(img, PgmFormat::Binary, tmp))?;
    }
    println!("max_abs_err {max_err}");
    println!("dssim {dssim}");
    println!("outputs {}", a.out_dir.display());
    if max_err > 1e-9 {
        return Err(CliError::Verification(format!(
            "reconstruction error {max_err} exceeds 1e-9"
        )));
    }
    Ok(())
}
