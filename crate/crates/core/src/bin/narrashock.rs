use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use narrashock::causality::read_results;
use narrashock::config::PipelineConfig;
use narrashock::features::AlignedPanel;
use narrashock::ingest::write_shocks;
use narrashock::pipeline;
use narrashock::report::emit_reports;
use narrashock::synth::{self, Coupling, CouplingDirection, SyntheticKind, SyntheticSpec};
use narrashock::{Error, Result};

/// Granger-style evaluation of news semantic shifts against market shocks.
#[derive(Parser)]
#[command(name = "narrashock", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and filter articles; write per-outlet coverage.
    Ingest,
    /// Build the aligned feature panel.
    Features,
    /// Read or identify the four shock series.
    Shocks,
    /// Run the base/enhanced grid on a panel.
    Grid(PanelArgs),
    /// Group tests, Bonferroni selection, feedback and confounders.
    Infer(ResultArgs),
    /// Write all report tables from a result table.
    Report(ResultArgs),
    /// Generate a synthetic panel with known structure.
    Synth(SynthArgs),
    /// Run every stage end to end.
    Pipeline,
}

#[derive(Args)]
struct PanelArgs {
    /// Panel values CSV; built from the config when absent.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Panel column metadata CSV (defaults to `<panel>_meta.csv`).
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct ResultArgs {
    /// Result table written by `grid`.
    #[arg(long)]
    results: PathBuf,
    #[command(flatten)]
    panel: PanelArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "coupled")]
    kind: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    lag: usize,
    #[arg(long, default_value = "linear")]
    coupling: String,
    #[arg(long, default_value_t = 1.0)]
    strength: f64,
    #[arg(long, default_value = "econ_to_text")]
    direction: String,
    /// Series count for null panels.
    #[arg(long, default_value_t = 10)]
    n_series: usize,
    #[arg(long)]
    confounder: bool,
    #[arg(long, default_value_t = 0)]
    distractors: usize,
    #[arg(long)]
    onset: Option<usize>,
    /// Write an article corpus with shocks and a config instead of a panel.
    #[arg(long)]
    corpus: bool,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io { path: path.into(), source: e })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })
}

fn panel_from(args: &PanelArgs, cfg: &PipelineConfig) -> Result<AlignedPanel> {
    match &args.panel {
        Some(p) => {
            let meta = args.meta.clone().unwrap_or_else(|| {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("panel");
                p.with_file_name(format!("{stem}_meta.csv"))
            });
            AlignedPanel::read_files(p, &meta)
        }
        None => {
            let ingest = pipeline::ingest_stage(cfg).map_err(|e| e.in_stage("ingest"))?;
            let shocks = pipeline::shock_stage(cfg).map_err(|e| e.in_stage("svar"))?;
            pipeline::feature_stage(cfg, &ingest, &shocks).map_err(|e| e.in_stage("features"))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = cfg.out_dir.clone();
    // the pipeline checks its inputs before creating anything
    if !matches!(cli.command, Command::Pipeline) {
        ensure_dir(&out)?;
    }
    match &cli.command {
        Command::Ingest => {
            let ingest = pipeline::ingest_stage(&cfg)?;
            let mut w = csv::Writer::from_writer(create(&out.join("coverage.csv"))?);
            w.write_record(["outlet", "orientation", "active_days", "days", "kept"])?;
            for s in &ingest.outlets {
                w.write_record([
                    s.outlet_id.clone(),
                    s.orientation.to_string(),
                    s.active_days().to_string(),
                    s.len().to_string(),
                    "true".into(),
                ])?;
            }
            for id in &ingest.dropped {
                w.write_record([id.as_str(), "", "", "", "false"])?;
            }
            w.flush().map_err(|e| Error::Io { path: out.join("coverage.csv"), source: e })?;
            println!("{} relevant articles, {} outlets kept", ingest.articles.len(), ingest.outlets.len());
        }
        Command::Features => {
            let panel = panel_from(&PanelArgs { panel: None, meta: None }, &cfg)?;
            pipeline::write_panel(&panel, &out)?;
            println!("panel: {} rows x {} columns", panel.len(), panel.columns.len());
        }
        Command::Shocks => {
            let shocks = pipeline::shock_stage(&cfg)?;
            write_shocks(&shocks, create(&out.join("shocks.csv"))?)?;
            println!("shocks: {} days", shocks.len());
        }
        Command::Grid(args) => {
            let panel = panel_from(args, &cfg)?;
            let results = pipeline::grid_stage(&cfg, &panel)?;
            narrashock::causality::write_results(&results, create(&out.join("results.csv"))?)?;
            println!("{} evaluations", results.len());
        }
        Command::Infer(args) | Command::Report(args) => {
            let f = File::open(&args.results).map_err(|e| Error::Io { path: args.results.clone(), source: e })?;
            let results = read_results(f)?;
            let panel = match &args.panel.panel {
                Some(_) => Some(panel_from(&args.panel, &cfg)?),
                None => None,
            };
            let mut reports = pipeline::inference_stage(&cfg, results, panel.as_ref())?;
            if let (Command::Report(_), Some(panel)) = (&cli.command, &panel) {
                reports.deviations = pipeline::rolling_stage(&cfg, panel)?;
            }
            let bundle = emit_reports(&reports, &out)?;
            println!(
                "{} results, {} Bonferroni-significant, {} feedback loops; {} files in {}",
                reports.results.len(),
                reports.selected.len(),
                reports.feedback.len(),
                bundle.files.len(),
                out.display()
            );
        }
        Command::Synth(a) => {
            let seed = cli.seed.unwrap_or(cfg.seed);
            if a.corpus {
                let path = synth::write_fixture_corpus(&out, a.n, seed)?;
                println!("corpus config: {}", path.display());
                return Ok(());
            }
            let spec = SyntheticSpec {
                kind: a.kind.parse::<SyntheticKind>()?,
                n: a.n,
                lag: a.lag,
                coupling: a.coupling.parse::<Coupling>()?,
                strength: a.strength,
                seed,
                n_series: a.n_series,
                direction: a.direction.parse::<CouplingDirection>()?,
                confounder: a.confounder,
                distractors: a.distractors,
                onset: a.onset,
            };
            let s = synth::gen_synthetic(&spec)?;
            pipeline::write_panel(&s.panel, &out)?;
            let truth = serde_json::to_string_pretty(&s.truth).map_err(|e| Error::Input(e.to_string()))?;
            let p = out.join("truth.json");
            std::fs::write(&p, truth + "\n").map_err(|e| Error::Io { path: p, source: e })?;
            println!("{} rows, {} planted edges", s.panel.len(), s.truth.edges.len());
        }
        Command::Pipeline => {
            let bundle = pipeline::run_pipeline(&cfg)?;
            println!("wrote {} files to {}", bundle.files.len(), bundle.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
