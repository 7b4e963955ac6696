//! The `cpwc` command line.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 schema or data format,
//! 5 computational failure. Errors are printed to stderr as one line,
//! `error[<kind>]: <message>`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpwc_analyzer::{builtin_spec, compare_counts, count_network, parse_spec, surgery, NetworkSpec};
use cpwc_core::{
    finite_difference_check, init_params, plan_groups, CheckReport, CpwcVariant, GroupCase, Precision, Shape, Tensor,
};
use cpwc_train::{
    compare_variants, load_cifar, synth_context_dataset, train_fresh, CifarFlavor, Dataset, Hyper, ModelConfig, Split,
    StepSchedule, TrainError, DESK_CHANNELS, DESK_CLASSES, DESK_TRAIN_EXAMPLES, DESK_VAL_EXAMPLES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const RESULTS_DIR_ENV: &str = "CPWC_RESULTS_DIR";
pub const CLI_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "cpwc", version, about = "Contextual pointwise convolution: planning, cost accounting, gradient checks and training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Show how C input channels are grouped for Z stage-1 filters.
    Plan(PlanArgs),
    /// Count parameters and MACs of a network spec.
    Count(CountArgs),
    /// Replace every 1×1 convolution of a spec with a CPWC node.
    Surgery(SurgeryArgs),
    /// Finite-difference gradient checks on random CPWC blocks.
    CheckGrad(CheckGradArgs),
    /// Train one toy model.
    Train(TrainArgs),
    /// Train every requested variant over several seeds and tabulate accuracy.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Print machine-readable JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Input channels C.
    #[arg(long = "in", value_name = "C")]
    pub in_channels: usize,
    /// Output channels Z.
    #[arg(long = "out", value_name = "Z")]
    pub out_channels: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct SpecSource {
    /// JSON network spec file.
    #[arg(long, value_name = "FILE", group = "source")]
    pub spec: Option<PathBuf>,
    /// Builtin network: resnet164 or resnet50.
    #[arg(long, value_name = "NAME", group = "source")]
    pub builtin: Option<String>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub source: SpecSource,
    /// Apply this CPWC variant to every 1×1 convolution before counting.
    #[arg(long, value_name = "VARIANT")]
    pub cpwc: Option<CpwcVariant>,
    /// List every node, not just totals.
    #[arg(long)]
    pub per_node: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SurgeryArgs {
    #[command(flatten)]
    pub source: SpecSource,
    /// CPWC variant to install.
    #[arg(long, value_name = "VARIANT")]
    pub cpwc: CpwcVariant,
    /// Where to write the modified spec ("-" for stdout).
    #[arg(long, value_name = "FILE")]
    pub emit: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    /// Number of random block configurations.
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Maximum relative error.
    #[arg(long = "tol", default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Central-difference step.
    #[arg(long = "eps", default_value_t = 1e-3)]
    pub epsilon: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Synth,
    Cifar10,
    Cifar100,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Single,
    Double,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset to train on.
    #[arg(long, value_enum, default_value_t = DatasetKind::Synth)]
    pub dataset: DatasetKind,
    /// Directory with the CIFAR binary files.
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Training examples (generated, or the first N of the CIFAR train split).
    #[arg(long, default_value_t = DESK_TRAIN_EXAMPLES)]
    pub train_size: usize,
    /// Validation examples.
    #[arg(long, default_value_t = DESK_VAL_EXAMPLES)]
    pub val_size: usize,
    /// Classes of the synthetic dataset.
    #[arg(long, default_value_t = DESK_CLASSES)]
    pub classes: usize,
    /// Seed of the synthetic dataset (the validation set uses seed + 1).
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Base width of the toy model.
    #[arg(long, default_value_t = DESK_CHANNELS)]
    pub channels: usize,
    /// Stem kernel size (1 or 3).
    #[arg(long, default_value_t = 3)]
    pub stem_kernel: usize,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Multiplicative learning-rate decay factor.
    #[arg(long)]
    pub lr_decay: Option<f64>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    pub lr_every: Option<usize>,
    /// SGD momentum.
    #[arg(long)]
    pub momentum: Option<f64>,
    /// L2 weight decay.
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Arithmetic precision.
    #[arg(long, value_enum, default_value_t = PrecisionArg::Single)]
    pub precision: PrecisionArg,
    /// Random crops and flips (for CIFAR).
    #[arg(long)]
    pub augment: bool,
    /// Start from the full-budget CIFAR recipe instead of the desk default.
    #[arg(long)]
    pub cifar_recipe: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Directory for JSON reports (defaults to $CPWC_RESULTS_DIR when set).
    #[arg(long, value_name = "DIR")]
    pub results_dir: Option<PathBuf>,
    /// Include wall-clock time in the JSON output.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// CPWC variant of the model.
    #[arg(long, default_value_t = CpwcVariant::Full)]
    pub variant: CpwcVariant,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated variants (default: all five).
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<CpwcVariant>,
    /// Comma-separated seeds (default: three seeds starting at --seed).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub common: Common,
}

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Usage(String),
    Io(String),
    Schema(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Schema(_) => 4,
            CliError::Compute(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Schema(_) => "schema",
            CliError::Compute(_) => "compute",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Schema(m) | CliError::Compute(m) => m,
        }
    }

    /// The single stderr line.
    pub fn line(&self) -> String {
        let flat = self.message().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {flat}", self.kind())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let m = e.to_string();
        match e {
            TrainError::MissingFile(_) | TrainError::Io { .. } => CliError::Io(m),
            TrainError::Truncated { .. } | TrainError::LabelOutOfRange { .. } => CliError::Schema(m),
            TrainError::InvalidConfig(_) | TrainError::Core(_) => CliError::Usage(m),
            TrainError::Diverged { .. } => CliError::Compute(m),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `argv` (including the program name), runs the command and returns
/// the exit status.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = writeln!(err, "{}", CliError::Usage("a subcommand is required (see cpwc --help)".into()).line());
                return 2;
            }
            let text = e.to_string();
            let body = text.split("\n\n").next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(err, "{}", CliError::Usage(body.to_string()).line());
            return 2;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.line());
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Plan(a) => plan(a, out),
        Command::Count(a) => count(a, out),
        Command::Surgery(a) => surgery_cmd(a, out),
        Command::CheckGrad(a) => check_grad(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Compare(a) => compare_cmd(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("cannot write output: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("outputs always serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct PlanOutput {
    schema_version: u32,
    in_channels: usize,
    out_channels: usize,
    case: u8,
    summary: String,
    group_sizes: Vec<usize>,
    groups: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    share_counts: Option<Vec<usize>>,
}

fn plan(a: PlanArgs, out: &mut dyn Write) -> CliResult {
    let p = plan_groups(a.in_channels, a.out_channels).map_err(|e| CliError::Usage(e.to_string()))?;
    let share = (p.case() == GroupCase::Expand).then(|| p.share_counts());
    let sizes = p.group_sizes();
    if a.common.json {
        return emit(
            out,
            &to_json(&PlanOutput {
                schema_version: CLI_SCHEMA_VERSION,
                in_channels: a.in_channels,
                out_channels: a.out_channels,
                case: p.case().number(),
                summary: p.to_string(),
                group_sizes: sizes,
                groups: p.groups().to_vec(),
                share_counts: share,
            }),
        );
    }
    let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let mut text = format!("{p}\nr_i: {}\n", list(&sizes));
    if let Some(s) = share {
        text.push_str(&format!("shares: {}\n", list(&s)));
    }
    emit(out, &text)
}

fn load_spec(src: &SpecSource) -> CliResult<NetworkSpec> {
    match (&src.spec, &src.builtin) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            parse_spec(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => builtin_spec(name).map_err(|e| CliError::Usage(e.to_string())),
        _ => Err(CliError::Usage("exactly one of --spec or --builtin is required".into())),
    }
}

fn count(a: CountArgs, out: &mut dyn Write) -> CliResult {
    let spec = load_spec(&a.source)?;
    let schema = |e: cpwc_analyzer::ParseError| CliError::Schema(e.to_string());
    let base = count_network(&spec).map_err(schema)?;
    let Some(variant) = a.cpwc else {
        let text = if a.common.json { base.to_json() + "\n" } else { base.render_table(a.per_node) };
        return emit(out, &text);
    };
    let modified = count_network(&surgery(&spec, variant)).map_err(schema)?;
    if a.common.json {
        return emit(out, &(modified.to_json() + "\n"));
    }
    let cmp = compare_counts(&base, &modified, variant);
    let mut text = modified.render_table(a.per_node);
    text.push('\n');
    text.push_str(&cmp.render_table());
    emit(out, &text)
}

fn surgery_cmd(a: SurgeryArgs, out: &mut dyn Write) -> CliResult {
    let spec = load_spec(&a.source)?;
    let modified = surgery(&spec, a.cpwc);
    let schema = |e: cpwc_analyzer::ParseError| CliError::Schema(e.to_string());
    let cmp = compare_counts(&count_network(&spec).map_err(schema)?, &count_network(&modified).map_err(schema)?, a.cpwc);
    let doc = modified.to_json() + "\n";
    if a.emit.as_os_str() == "-" {
        return emit(out, &doc);
    }
    write_file(&a.emit, &doc)?;
    if a.common.json {
        emit(out, &to_json(&cmp))
    } else {
        emit(out, &format!("wrote {}\n{}", a.emit.display(), cmp.render_table()))
    }
}

fn write_file(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct TrialResult {
    trial: usize,
    in_channels: usize,
    out_channels: usize,
    case: u8,
    stride: usize,
    variant: CpwcVariant,
    input: Shape,
    report: CheckReport,
}

#[derive(Debug, Serialize)]
struct CheckGradOutput {
    schema_version: u32,
    seed: u64,
    trials: Vec<TrialResult>,
    failed: usize,
    passed: bool,
}

/// Channel pair for trial `i`, cycling through the three grouping cases.
fn trial_channels(i: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    match i % 3 {
        0 => {
            let c = rng.random_range(1..=8);
            (c, c)
        }
        1 => {
            let z = rng.random_range(1..=5);
            (rng.random_range(z + 1..=12), z)
        }
        _ => {
            let c = rng.random_range(1..=5);
            (c, rng.random_range(c + 1..=12))
        }
    }
}

fn check_grad(a: CheckGradArgs, out: &mut dyn Write) -> CliResult {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if !(a.tolerance > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let mut trials = Vec::with_capacity(a.trials);
    for i in 0..a.trials {
        let (c, z) = trial_channels(i, &mut rng);
        let variant = CpwcVariant::ALL[i % 5];
        let stride = 1 + (i / 5) % 2;
        let shape = Shape::new(rng.random_range(1..=2), c, rng.random_range(3..=7), rng.random_range(3..=7))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let plan = plan_groups(c, z).map_err(|e| CliError::Usage(e.to_string()))?;
        let p = init_params::<f64>(&plan, variant, stride, rng.random()).map_err(|e| CliError::Usage(e.to_string()))?;
        let x = Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0));
        let report = finite_difference_check(&p, &x, a.epsilon, a.tolerance).map_err(|e| CliError::Usage(e.to_string()))?;
        trials.push(TrialResult {
            trial: i,
            in_channels: c,
            out_channels: z,
            case: plan.case().number(),
            stride,
            variant,
            input: shape,
            report,
        });
    }
    let failed = trials.iter().filter(|t| !t.report.passed).count();
    let result = CheckGradOutput { schema_version: CLI_SCHEMA_VERSION, seed: a.common.seed, failed, passed: failed == 0, trials };
    if a.common.json {
        emit(out, &to_json(&result))?;
    } else {
        let mut text = format!("{:>5}  {:>3} {:>3}  {:>4}  {:>6}  {:<16}  {:>10}  {}\n", "trial", "C", "Z", "case", "stride", "variant", "max rel", "");
        for t in &result.trials {
            text.push_str(&format!(
                "{:>5}  {:>3} {:>3}  {:>4}  {:>6}  {:<16}  {:>10.3e}  {}\n",
                t.trial,
                t.in_channels,
                t.out_channels,
                t.case,
                t.stride,
                t.variant.name(),
                t.report.max_rel_err(),
                if t.report.passed { "ok" } else { "FAIL" }
            ));
        }
        let worst = result.trials.iter().map(|t| t.report.max_rel_err()).fold(0.0, f64::max);
        text.push_str(&format!(
            "{} of {} trials passed (eps {:e}, tol {:e}, worst {:.3e})\n",
            a.trials - failed,
            a.trials,
            a.epsilon,
            a.tolerance,
            worst
        ));
        emit(out, &text)?;
    }
    if failed > 0 {
        return Err(CliError::Compute(format!("{failed} of {} gradient checks failed", a.trials)));
    }
    Ok(())
}

fn datasets(d: &DataArgs) -> CliResult<(Dataset, Dataset)> {
    if d.train_size == 0 || d.val_size == 0 {
        return Err(CliError::Usage("--train-size and --val-size must be positive".into()));
    }
    match d.dataset {
        DatasetKind::Synth => {
            let train = synth_context_dataset(d.data_seed, d.train_size, d.classes)?;
            let mut val = synth_context_dataset(d.data_seed.wrapping_add(1), d.val_size, d.classes)?;
            val.split = Split::Val;
            Ok((train, val))
        }
        DatasetKind::Cifar10 | DatasetKind::Cifar100 => {
            let dir = d
                .data_dir
                .as_ref()
                .ok_or_else(|| CliError::Usage("--data-dir is required for CIFAR datasets".into()))?;
            let flavor = if d.dataset == DatasetKind::Cifar10 { CifarFlavor::Cifar10 } else { CifarFlavor::Cifar100 };
            let (train, val) = load_cifar(dir, flavor)?;
            Ok((train.take(d.train_size)?, val.take(d.val_size)?))
        }
    }
}

fn hyper(h: &HyperArgs, seed: u64) -> CliResult<Hyper> {
    let mut hp = if h.cifar_recipe { Hyper::cifar_recipe() } else { Hyper::desk_default() };
    let s = &mut hp.schedule;
    *s = StepSchedule {
        lr: h.lr.unwrap_or(s.lr),
        factor: h.lr_decay.unwrap_or(s.factor),
        every: h.lr_every.unwrap_or(s.every),
    };
    hp.epochs = h.epochs.unwrap_or(hp.epochs);
    hp.momentum = h.momentum.unwrap_or(hp.momentum);
    hp.weight_decay = h.weight_decay.unwrap_or(hp.weight_decay);
    hp.batch_size = h.batch_size.unwrap_or(hp.batch_size);
    hp.precision = match h.precision {
        PrecisionArg::Single => Precision::Single,
        PrecisionArg::Double => Precision::Double,
    };
    hp.augment = h.augment;
    hp.seed = seed;
    hp.validate()?;
    Ok(hp)
}

fn model_config(variant: CpwcVariant, m: &ModelArgs, train: &Dataset, seed: u64) -> ModelConfig {
    ModelConfig {
        stem_kernel: m.stem_kernel,
        seed,
        ..ModelConfig::new(variant, train.images.shape().c, m.channels, train.classes)
    }
}

fn results_dir(o: &OutputArgs) -> Option<PathBuf> {
    o.results_dir.clone().or_else(|| std::env::var_os(RESULTS_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> CliResult {
    let (train, val) = datasets(&a.data)?;
    let hp = hyper(&a.hyper, a.common.seed)?;
    let cfg = model_config(a.variant, &a.model, &train, a.common.seed);
    let report = train_fresh(cfg, &hp, &train, &val)?;
    let shown = if a.output.timing { report.clone() } else { report.deterministic() };
    let doc = to_json(&shown);
    if let Some(dir) = results_dir(&a.output) {
        write_file(&dir.join(format!("train-{}-seed{}.json", a.variant.name(), a.common.seed)), &doc)?;
    }
    emit(out, &if a.common.json { doc } else { shown.render_table() })
}

fn compare_cmd(a: CompareArgs, out: &mut dyn Write) -> CliResult {
    let (train, val) = datasets(&a.data)?;
    let hp = hyper(&a.hyper, a.common.seed)?;
    let variants = if a.variants.is_empty() { CpwcVariant::ALL.to_vec() } else { a.variants.clone() };
    let s = a.common.seed;
    let seeds = if a.seeds.is_empty() { vec![s, s + 1, s + 2] } else { a.seeds.clone() };
    let base = model_config(CpwcVariant::Full, &a.model, &train, a.common.seed);
    let start = std::time::Instant::now();
    let table = compare_variants(&train, &val, base, &variants, &hp, &seeds)?;
    let mut doc = serde_json::to_value(&table).expect("tables always serialize");
    if a.output.timing {
        doc["metadata"] = serde_json::json!({ "wall_time_secs": start.elapsed().as_secs_f64() });
    }
    let doc = to_json(&doc);
    if let Some(dir) = results_dir(&a.output) {
        write_file(&dir.join("compare.json"), &doc)?;
    }
    emit(out, &if a.common.json { doc } else { table.render_table() })
}
