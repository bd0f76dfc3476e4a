//! Command-line front end: `celebbasis <command>`. Every command writes a
//! JSON run manifest next to its outputs; `replay` re-runs one and checks the
//! outputs are byte-identical.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use celebbasis::backends::{BackendConfig, Backends, Registry, SamplerParams};
use celebbasis::basis::{interpolate_pair, load_basis, save_basis, CelebBasis};
use celebbasis::dictionary::{
    build_pooled_set, build_sets, compose_names, compose_to_pair, embed_name, load_names,
    EmbeddingPair,
};
use celebbasis::eval::{
    display_prompt, evaluate_run, generate, generate_from_pairs, EvalItem, EvalManifest,
    GenerationRequest,
};
use celebbasis::image::{contact_sheet, load_image, save_png, Image};
use celebbasis::io::{read_file, write_atomic};
use celebbasis::mapper::{load_identity, save_identity, FingerprintPolicy, IdentityCheckpoint};
use celebbasis::trainer::{
    train_joint, AugmentConfig, LogEntry, PromptTemplate, TrainConfig, TrainMode, TrainOutcome,
};
use celebbasis::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::FileConfig;
pub use manifest::RunManifest;

pub const CHECKPOINT_EXTENSION: &str = "celbid";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Parse(#[from] clap::Error),
    #[error("replay mismatch in {}", .0.join(", "))]
    ReplayMismatch(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self.kind() {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Adapter => 4,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Parse(_) => ErrorKind::Usage,
            CliError::ReplayMismatch(_) => ErrorKind::Data,
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self.kind() {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Adapter => "adapter",
        }
    }

    pub fn one_line(&self) -> String {
        let text = match self {
            CliError::Parse(e) => e
                .to_string()
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string(),
            other => other.to_string(),
        };
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    /// Help and version requests surface as parse errors carrying the text
    /// to print.
    pub fn display_text(&self) -> Option<String> {
        match self {
            CliError::Parse(e)
                if matches!(
                    e.kind(),
                    clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
                ) =>
            {
                Some(e.to_string())
            }
            _ => None,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "celebbasis", version, about = "Personalize a text-to-image model with a celeb basis")]
pub struct Cli {
    /// JSON config file with optional `backend`, `train` and `sampler` sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Backend set to load from the registry.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a basis from a name list.
    BuildBasis(BuildBasisArgs),
    /// Fit one identity from a single image.
    Fit(FitArgs),
    /// Fit several identities with one shared mapping network.
    FitJoint(FitJointArgs),
    /// Generate images from a prompt with `{ID}` markers.
    Generate(GenerateArgs),
    /// Interpolate between two names' embeddings.
    Interpolate(InterpolateArgs),
    /// Score images listed in an evaluation manifest.
    Eval(EvalArgs),
    /// Re-run a recorded command and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct BuildBasisArgs {
    #[arg(long)]
    pub names: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub p: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Backend whose text encoder embeds the names.
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long)]
    pub encoder_seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// One shared component over both slots.
    #[arg(long)]
    pub flatten: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<TrainMode>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Train on the unmodified image.
    #[arg(long)]
    pub no_augment: bool,
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the image file stem.
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct FitJointArgs {
    /// Directory of PNG images; each file stem is a label.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub basis: PathBuf,
    /// Output directory for checkpoints, log and manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub prompt: String,
    /// `MARKER=PATH`, e.g. `ID1=ada.celbid`.
    #[arg(long = "identity")]
    pub identities: Vec<String>,
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub guidance: Option<f64>,
    /// Also write a contact sheet of all images.
    #[arg(long)]
    pub grid: bool,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub name_a: String,
    #[arg(long)]
    pub name_b: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "A photo of {ID}")]
    pub prompt: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Take backend seed and width from this basis.
    #[arg(long)]
    pub basis: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Parse and execute `argv` (without the program name).
pub fn run(argv: &[String]) -> CliResult {
    let cli = Cli::try_parse_from(std::iter::once("celebbasis".to_string()).chain(argv.iter().cloned()))?;
    let file = FileConfig::load(cli.config.as_deref())?;
    let ctx = Context { cli: &cli, file, argv };
    match &cli.command {
        Command::BuildBasis(a) => build_basis(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::FitJoint(a) => fit_joint(&ctx, a),
        Command::Generate(a) => generate_cmd(&ctx, a),
        Command::Interpolate(a) => interpolate_cmd(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::Replay(a) => replay(a),
    }
}

struct Context<'a> {
    cli: &'a Cli,
    file: FileConfig,
    argv: &'a [String],
}

impl Context<'_> {
    fn manifest(&self, command: &str) -> CliResult<RunManifest> {
        let mut m = RunManifest::new(command, self.argv);
        if let Some(path) = &self.cli.config {
            m.input(path)?;
        }
        Ok(m)
    }

    fn backend_config(&self, basis: Option<&CelebBasis>) -> BackendConfig {
        let mut cfg = self.file.backend.clone();
        if let Some(name) = &self.cli.backend {
            cfg.name = name.clone();
        }
        if let Some(b) = basis {
            let prov = b.provenance();
            if cfg.seed != prov.build_seed || cfg.embed_dim != b.dim() {
                log::info!(
                    "using encoder seed {} and width {} recorded in the basis",
                    prov.build_seed,
                    b.dim()
                );
            }
            cfg.seed = prov.build_seed;
            cfg.embed_dim = b.dim();
        }
        cfg
    }

    fn backends(&self, cfg: &BackendConfig) -> CliResult<Backends> {
        Ok(Registry::default().build(cfg)?)
    }

    fn train_config(&self, args: &TrainArgs, basis: &CelebBasis, joint: bool) -> TrainConfig {
        let mut cfg = self.file.train.clone();
        if joint && cfg == TrainConfig::default() {
            cfg = TrainConfig::joint();
        }
        cfg.p = basis.p();
        if let Some(v) = args.steps {
            cfg.steps = v;
        }
        if let Some(v) = args.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = args.batch {
            cfg.batch_size = v;
        }
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.mode {
            cfg.mode = v;
        }
        if let Some(v) = args.momentum {
            cfg.momentum = v;
        }
        if args.no_augment {
            cfg.augmentation = AugmentConfig::none();
        }
        cfg
    }

    fn sampler_params(&self, steps: Option<usize>, guidance: Option<f64>) -> SamplerParams {
        let mut p = self.file.sampler.clone();
        if let Some(s) = steps {
            p.steps = s;
        }
        if let Some(g) = guidance {
            p.guidance = g;
        }
        p
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn load_basis_checked(path: &Path, manifest: &mut RunManifest) -> CliResult<CelebBasis> {
    manifest.input(path)?;
    let basis = load_basis(path)?;
    manifest.basis_fingerprint = Some(format!("{:016x}", basis.fingerprint()));
    Ok(basis)
}

fn build_basis(ctx: &Context, a: &BuildBasisArgs) -> CliResult {
    let mut manifest = ctx.manifest("build-basis")?;
    let mut cfg = ctx.backend_config(None);
    if let Some(name) = &a.encoder {
        cfg.name = name.clone();
    }
    if let Some(seed) = a.encoder_seed {
        cfg.seed = seed;
    }
    if let Some(dim) = a.dim {
        cfg.embed_dim = dim;
    }
    let backends = ctx.backends(&cfg)?;
    manifest.input(&a.names)?;
    let names = load_names(&a.names)?;
    let composed = compose_names(&names, backends.text.as_ref())?;
    let basis = if a.flatten {
        CelebBasis::build_flattened(&build_pooled_set(&composed)?, a.p, cfg.seed)?
    } else {
        let (first, second) = build_sets(&composed)?;
        CelebBasis::build(&first, &second, a.p, cfg.seed)?
    };
    save_basis(&basis, &a.out)?;
    log::info!(
        "basis d={} p={} from {} names ({} composed)",
        basis.dim(),
        basis.p(),
        names.len(),
        composed.len()
    );
    manifest.config = json!({ "backend": cfg, "p": a.p, "flatten": a.flatten });
    manifest.seeds.insert("encoder".into(), cfg.seed);
    manifest.adapters.insert("text_encoder".into(), backends.text.id());
    manifest.basis_fingerprint = Some(format!("{:016x}", basis.fingerprint()));
    manifest.output(&a.out)?;
    manifest.save(&sidecar(&a.out, ".manifest.json"))
}

fn write_log(log: &[LogEntry], path: &Path) -> CliResult {
    let mut text = String::from("step\tloss\tlabel\n");
    for e in log {
        text.push_str(&e.line());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn record_training(
    manifest: &mut RunManifest,
    cfg: &TrainConfig,
    backend: &BackendConfig,
    backends: &Backends,
) {
    manifest.config = json!({ "backend": backend, "train": cfg });
    manifest.seeds.insert("train".into(), cfg.seed);
    manifest.seeds.insert("backend".into(), backend.seed);
    manifest.adapters = backends.identifiers();
}

fn fit(ctx: &Context, a: &FitArgs) -> CliResult {
    let mut manifest = ctx.manifest("fit")?;
    let basis = load_basis_checked(&a.basis, &mut manifest)?;
    let backend = ctx.backend_config(Some(&basis));
    let mut backends = ctx.backends(&backend)?;
    let cfg = ctx.train_config(&a.train, &basis, false);
    manifest.input(&a.image)?;
    let image = load_image(&a.image)?;
    let label = a.label.clone().unwrap_or_else(|| file_stem(&a.image));
    let outcome = train_joint(&[(label.clone(), image)], &basis, &mut backends, &cfg)?;
    record_training(&mut manifest, &cfg, &backend, &backends);

    let trained = &outcome.identities[0];
    let ckpt = IdentityCheckpoint::new(&trained.coefficients, basis.fingerprint(), &label)?;
    save_identity(&ckpt, &a.out)?;
    manifest.output(&a.out)?;
    let log_path = sidecar(&a.out, ".log");
    write_log(&outcome.log, &log_path)?;
    manifest.output(&log_path)?;
    report_probe(&outcome);
    manifest.save(&sidecar(&a.out, ".manifest.json"))
}

fn report_probe(outcome: &TrainOutcome) {
    for id in &outcome.identities {
        log::info!(
            "{}: probe loss {:.5} -> {:.5}",
            id.label,
            id.initial_probe_loss,
            id.final_probe_loss
        );
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "identity".into())
}

fn fit_joint(ctx: &Context, a: &FitJointArgs) -> CliResult {
    let mut manifest = ctx.manifest("fit-joint")?;
    let basis = load_basis_checked(&a.basis, &mut manifest)?;
    let backend = ctx.backend_config(Some(&basis));
    let mut backends = ctx.backends(&backend)?;
    let cfg = ctx.train_config(&a.train, &basis, true);

    let mut paths: Vec<PathBuf> = fs::read_dir(&a.images)
        .map_err(|e| Error::io(&a.images, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "joint training needs at least 2 images in {}",
            a.images.display()
        ))
        .into());
    }
    let mut images = Vec::with_capacity(paths.len());
    for p in &paths {
        manifest.input(p)?;
        images.push((file_stem(p), load_image(p)?));
    }
    let outcome = train_joint(&images, &basis, &mut backends, &cfg)?;
    record_training(&mut manifest, &cfg, &backend, &backends);

    ensure_dir(&a.out)?;
    for id in &outcome.identities {
        let ckpt = IdentityCheckpoint::new(&id.coefficients, basis.fingerprint(), &id.label)?;
        let path = a.out.join(format!("{}.{CHECKPOINT_EXTENSION}", id.label));
        save_identity(&ckpt, &path)?;
        manifest.output(&path)?;
    }
    let log_path = a.out.join("train.log");
    write_log(&outcome.log, &log_path)?;
    manifest.output(&log_path)?;
    report_probe(&outcome);
    manifest.save(&a.out.join("manifest.json"))
}

fn parse_binding(s: &str) -> CliResult<(String, PathBuf)> {
    let (key, path) = s.split_once('=').ok_or_else(|| {
        Error::InvalidArgument(format!("identity binding '{s}' is not MARKER=PATH"))
    })?;
    if key.is_empty() || path.is_empty() {
        return Err(Error::InvalidArgument(format!("identity binding '{s}' is not MARKER=PATH")).into());
    }
    Ok((key.to_string(), PathBuf::from(path)))
}

fn write_images(
    images: &[(String, Image)],
    out: &Path,
    grid: bool,
    manifest: &mut RunManifest,
) -> CliResult {
    ensure_dir(out)?;
    for (name, img) in images {
        let path = out.join(name);
        save_png(img, &path)?;
        manifest.output(&path)?;
    }
    if grid && !images.is_empty() {
        let all: Vec<Image> = images.iter().map(|(_, i)| i.clone()).collect();
        let sheet = contact_sheet(&all, (all.len() as u32).min(4))?;
        let path = out.join("grid.png");
        save_png(&sheet, &path)?;
        manifest.output(&path)?;
    }
    Ok(())
}

fn generate_cmd(ctx: &Context, a: &GenerateArgs) -> CliResult {
    let mut manifest = ctx.manifest("generate")?;
    let basis = load_basis_checked(&a.basis, &mut manifest)?;
    let backend = ctx.backend_config(Some(&basis));
    let backends = ctx.backends(&backend)?;
    let mut identities = BTreeMap::new();
    for binding in &a.identities {
        let (marker, path) = parse_binding(binding)?;
        manifest.input(&path)?;
        let ckpt = load_identity(&path, Some(basis.fingerprint()), FingerprintPolicy::Error)?;
        identities.insert(marker, ckpt);
    }
    let req = GenerationRequest {
        template: PromptTemplate::new(a.prompt.clone()),
        identities,
        seed: a.seed,
        count: a.count,
        params: ctx.sampler_params(a.steps, a.guidance),
    };
    let images = generate(&req, &basis, &backends)?;
    let named: Vec<(String, Image)> = images
        .into_iter()
        .enumerate()
        .map(|(i, g)| (format!("{i:03}_seed{}.png", g.seed), g.image))
        .collect();
    write_images(&named, &a.out, a.grid, &mut manifest)?;
    manifest.config = json!({
        "backend": backend,
        "sampler": req.params,
        "prompt": a.prompt,
        "display_prompt": display_prompt(&req),
        "count": a.count,
    });
    manifest.seeds.insert("generate".into(), a.seed);
    manifest.adapters = backends.identifiers();
    manifest.save(&a.out.join("manifest.json"))
}

fn name_pair(name: &str, backends: &Backends) -> CliResult<EmbeddingPair> {
    let group = embed_name(name, backends.text.as_ref())?;
    Ok(compose_to_pair(&group)?.pair)
}

fn interpolate_cmd(ctx: &Context, a: &InterpolateArgs) -> CliResult {
    let mut manifest = ctx.manifest("interpolate")?;
    let basis = load_basis_checked(&a.basis, &mut manifest)?;
    let backend = ctx.backend_config(Some(&basis));
    let backends = ctx.backends(&backend)?;
    let pa = name_pair(&a.name_a, &backends)?;
    let pb = name_pair(&a.name_b, &backends)?;
    let template = PromptTemplate::new(a.prompt.clone());
    let markers = template.markers();
    if markers.is_empty() {
        return Err(Error::MissingMarker.into());
    }
    let params = ctx.sampler_params(a.steps, None);
    ensure_dir(&a.out)?;
    let mut images = Vec::with_capacity(a.lambdas.len());
    for (i, &lambda) in a.lambdas.iter().enumerate() {
        let pair = interpolate_pair(&pa, &pb, lambda)?;
        let record = json!({ "lambda": lambda, "first": pair.first, "second": pair.second });
        let path = a.out.join(format!("lambda_{i:02}.json"));
        let text = serde_json::to_string_pretty(&record).map_err(Error::from)?;
        write_atomic(&path, text.as_bytes())?;
        manifest.output(&path)?;
        let bound: BTreeMap<String, EmbeddingPair> =
            markers.iter().map(|m| (m.clone(), pair.clone())).collect();
        let img = generate_from_pairs(&template, &bound, a.seed, 1, &params, &backends)?
            .remove(0)
            .image;
        images.push((format!("lambda_{i:02}.png"), img));
    }
    write_images(&images, &a.out, false, &mut manifest)?;
    manifest.config = json!({
        "backend": backend,
        "sampler": params,
        "names": [a.name_a, a.name_b],
        "lambdas": a.lambdas,
        "prompt": a.prompt,
    });
    manifest.seeds.insert("generate".into(), a.seed);
    manifest.adapters = backends.identifiers();
    manifest.save(&a.out.join("manifest.json"))
}

fn eval_cmd(ctx: &Context, a: &EvalArgs) -> CliResult {
    let mut manifest = ctx.manifest("eval")?;
    let basis = match &a.basis {
        Some(p) => Some(load_basis_checked(p, &mut manifest)?),
        None => None,
    };
    let backend = ctx.backend_config(basis.as_ref());
    let backends = ctx.backends(&backend)?;
    manifest.input(&a.manifest)?;
    let bytes = read_file(&a.manifest)?;
    let list: EvalManifest = serde_json::from_slice(&bytes).map_err(Error::from)?;
    if list.entries.is_empty() {
        return Err(Error::InvalidArgument("evaluation manifest has no entries".into()).into());
    }
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let mut references = BTreeMap::new();
    for (label, rel) in &list.references {
        let path = base.join(rel);
        manifest.input(&path)?;
        references.insert(label.clone(), backends.face.extract(&load_image(&path)?)?);
    }
    let mut items = Vec::with_capacity(list.entries.len());
    for entry in &list.entries {
        let path = base.join(&entry.image);
        manifest.input(&path)?;
        items.push(EvalItem {
            path: entry.image.clone(),
            image: load_image(&path)?,
            prompt: entry.prompt.clone(),
            identity: entry.identity.clone(),
        });
    }
    let report = evaluate_run(&items, &references, &backends)?;
    report.save(&a.out)?;
    manifest.config = json!({ "backend": backend });
    manifest.seeds.insert("backend".into(), backend.seed);
    manifest.adapters = backends.identifiers();
    manifest.output(&a.out)?;
    manifest.save(&sidecar(&a.out, ".manifest.json"))
}

/// Re-run the recorded command from its working directory and compare every
/// recorded output hash.
fn replay(a: &ReplayArgs) -> CliResult {
    let recorded = RunManifest::load(&a.manifest)?;
    if recorded.command == "replay" {
        return Err(Error::InvalidArgument("cannot replay a replay".into()).into());
    }
    let previous = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    std::env::set_current_dir(&recorded.cwd).map_err(|e| Error::io(&recorded.cwd, e))?;
    let result = run(&recorded.argv);
    std::env::set_current_dir(&previous).map_err(|e| Error::io(&previous, e))?;
    result?;
    let changed = recorded.changed_outputs(&recorded.cwd);
    if changed.is_empty() {
        log::info!("replay matched {} outputs", recorded.outputs.len());
        Ok(())
    } else {
        Err(CliError::ReplayMismatch(changed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(args: &[&str]) -> Vec<String> {
        std::iter::once("celebbasis").chain(args.iter().copied()).map(String::from).collect()
    }

    #[test]
    fn exit_codes_by_kind() {
        let usage: CliError = Error::UnboundMarker("ID2".into()).into();
        assert_eq!((usage.exit_code(), usage.kind_label()), (2, "usage"));
        let data: CliError = Error::Format("bad magic".into()).into();
        assert_eq!(data.exit_code(), 3);
        assert_eq!(CliError::ReplayMismatch(vec!["x".into()]).exit_code(), 3);
    }

    #[test]
    fn parse_errors_are_one_line_usage() {
        let err = run(&argv(&["fit", "--image"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!err.one_line().contains('\n'));
    }

    #[test]
    fn lambdas_parse_as_a_list() {
        let cli = Cli::try_parse_from(argv(&[
            "interpolate", "--name-a", "a b", "--name-b", "c d", "--lambdas", "0,0.5,1", "--basis", "b", "--out", "o",
        ]))
        .unwrap();
        match cli.command {
            Command::Interpolate(a) => assert_eq!(a.lambdas, vec![0.0, 0.5, 1.0]),
            other => panic!("parsed {other:?}"),
        }
    }
}
