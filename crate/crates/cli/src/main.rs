use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sbm_mpc::eval::{emit_plotdata, read_report_csv, run_experiment_with, Algorithm, Cell, ExperimentConfig, ReportRow};
use sbm_mpc::sbm::{generate_sbm, regime_check, write_edge_list, write_truth};

/// Exact SBM recovery experiments on a simulated MPC cluster.
#[derive(Parser)]
#[command(name = "sbm-mpc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write every instance of the grid as an edge list plus truth labels.
    Generate(Common),
    /// Run the sweep and write the report, plot data and optional ledgers.
    Run {
        #[command(flatten)]
        common: Common,
        /// Algorithm to run, overriding the config.
        #[arg(long, value_parser = parse_algo)]
        algo: Option<Algorithm>,
        /// Also write each MPC cell's round ledger.
        #[arg(long)]
        ledgers: bool,
    },
    /// Summarize an existing report and rewrite its plot data.
    Report {
        /// Config whose output paths to use; defaults apply without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Added to every seed in the grid.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

fn parse_algo(name: &str) -> std::result::Result<Algorithm, String> {
    Algorithm::parse(name).ok_or_else(|| {
        let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

/// A problem with the config file; exits with status 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn cell_name(algorithm: Algorithm, cell: &Cell) -> String {
    let p = &cell.params;
    let mut name = format!("{}_n{}_k{}_p{}_q{}_seed{}", algorithm.name(), p.n, p.k, p.p, p.q, p.seed);
    if let Some(r) = cell.r {
        name.push_str(&format!("_r{r}"));
    }
    if let Some(s) = cell.s {
        let s = match s {
            sbm_mpc::eval::SChoice::Words(w) => w.to_string(),
            sbm_mpc::eval::SChoice::Rule(rule) => format!("{rule:?}").to_lowercase(),
        };
        name.push_str(&format!("_s{s}"));
    }
    name
}

fn generate(common: &Common) -> Result<()> {
    let config = load_config(&common.config)?;
    let dir = common.out.join("instances");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut seen = std::collections::BTreeSet::new();
    for cell in config.cells(common.seed_offset) {
        let p = cell.params;
        let stem = format!("sbm_n{}_k{}_p{}_q{}_seed{}", p.n, p.k, p.p, p.q, p.seed);
        if !seen.insert(stem.clone()) {
            continue;
        }
        let instance = generate_sbm(p)?;
        write_edge_list(&instance, BufWriter::new(File::create(dir.join(format!("{stem}.edges")))?))?;
        write_truth(&instance.truth, BufWriter::new(File::create(dir.join(format!("{stem}.truth")))?))?;
        let regime = regime_check(&p, cell.r.unwrap_or(3), &config.regime);
        let flags: Vec<String> = regime
            .conditions
            .iter()
            .map(|c| format!("{}={} ({:.3e} vs {:.3e})", c.name, c.holds, c.left, c.right))
            .collect();
        println!("{stem}: {} edges; {}", instance.edges.len(), flags.join(", "));
        for note in &regime.notes {
            println!("  note: {note}");
        }
    }
    Ok(())
}

fn run(common: &Common, algo: Option<Algorithm>, ledgers: bool) -> Result<()> {
    let mut config = load_config(&common.config)?;
    if let Some(a) = algo {
        config.algorithm = a;
    }
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    let report_path = common.out.join(&config.output.report);
    let out = BufWriter::new(File::create(&report_path).with_context(|| format!("creating {}", report_path.display()))?);
    let ledger_dir = common.out.join("ledgers");
    if ledgers {
        fs::create_dir_all(&ledger_dir)?;
    }
    let algorithm = config.algorithm;
    let report = run_experiment_with(&config, common.seed_offset, out, |cell, ledger| {
        if ledgers {
            let path = ledger_dir.join(format!("{}.csv", cell_name(algorithm, cell)));
            ledger.write_csv(File::create(path)?)?;
        }
        Ok(())
    })?;
    for c in &report.cells {
        let outcome = match (&c.fail_stage, c.recovered) {
            (Some(stage), _) => format!("failed at {stage}"),
            (None, true) => "recovered".to_string(),
            (None, false) => format!("{} misclassified", c.misclassified.unwrap_or(0)),
        };
        let mpc = match (c.rounds, c.peak_words) {
            (Some(r), Some(p)) => format!(" rounds={r} peak={p}"),
            _ => String::new(),
        };
        println!(
            "{} n={} k={} p={} q={} seed={}: {outcome}{mpc} regime_ok={} ({} ms)",
            c.algorithm, c.n, c.k, c.p, c.q, c.seed, c.regime_ok, c.wall_ms
        );
    }
    let rows: Vec<ReportRow> = report.cells.iter().map(ReportRow::from).collect();
    let plots = common.out.join(&config.output.plots);
    emit_plotdata(&rows, &plots)?;
    println!(
        "{} cells, {:.0}% recovered; report in {}, plot data in {}",
        report.cells.len(),
        100.0 * report.recovery_rate(),
        report_path.display(),
        plots.display()
    );
    Ok(())
}

fn report(config: Option<&Path>, out: &Path) -> Result<()> {
    let outputs = match config {
        Some(path) => load_config(path)?.output,
        None => Default::default(),
    };
    let path = out.join(&outputs.report);
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let rows = read_report_csv(BufReader::new(file))?;

    #[derive(Default)]
    struct Group {
        cells: usize,
        recovered: usize,
        failed: usize,
        rounds: Vec<usize>,
        peak: usize,
    }
    let mut groups: BTreeMap<(String, usize, usize, String, String), Group> = BTreeMap::new();
    for row in &rows {
        let g = groups
            .entry((row.algorithm.clone(), row.n, row.k, row.p.to_string(), row.q.to_string()))
            .or_default();
        g.cells += 1;
        g.recovered += usize::from(row.recovered);
        g.failed += usize::from(row.fail_stage.is_some());
        g.rounds.extend(row.rounds);
        g.peak = g.peak.max(row.peak_words.unwrap_or(0));
    }
    println!("algorithm        n     k  p       q       recovered  failed  rounds      peak_words");
    for ((algorithm, n, k, p, q), g) in &groups {
        let rounds = match (g.rounds.iter().min(), g.rounds.iter().max()) {
            (Some(lo), Some(hi)) if lo == hi => lo.to_string(),
            (Some(lo), Some(hi)) => format!("{lo}-{hi}"),
            _ => "-".into(),
        };
        let peak = if g.peak > 0 { g.peak.to_string() } else { "-".into() };
        println!(
            "{algorithm:<16} {n:<5} {k:<2} {p:<7} {q:<7} {:>4}/{:<4}  {:<6}  {rounds:<10}  {peak}",
            g.recovered, g.cells, g.failed
        );
    }
    let plots = out.join(&outputs.plots);
    emit_plotdata(&rows, &plots)?;
    println!("plot data in {}", plots.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(common) => generate(common),
        Command::Run { common, algo, ledgers } => run(common, *algo, *ledgers),
        Command::Report { config, out } => report(config.as_deref(), out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
