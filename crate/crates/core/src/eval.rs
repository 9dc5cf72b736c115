//! Experiment sweeps: scoring, CSV reports and plot data.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algos::{
    comm_nbr_words, mpc_comm_nbr, mpc_power_iteration, mpc_power_iteration_parallel, power_words, prepare_run,
    MpcSetup,
};
use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::mpc::{BudgetMode, Ledger, MpcConfig};
use crate::sbm::{
    generate_sbm, regime_check, RegimeConstants, SbmParams, COND_MPC_COMMNBR, COND_POWER, COND_POWER_SIDE,
    COND_THEOREM4,
};
use crate::seq::{comm_nbr, power_iteration, CommNbrOptions, DeltaRule, PowerParams, PowerThreshold};

/// Largest k scored by exact search.
pub const EXACT_MATCH_MAX_K: usize = 8;

/// Agreement of a clustering with the planted partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Accuracy {
    pub exact: bool,
    pub misclassified: usize,
    /// Greedy matching was used, so `misclassified` may be too high.
    pub lower_bound: bool,
    /// The clustering has a different number of groups than the truth.
    pub label_mismatch: bool,
}

/// Scores `c` against `truth` under the best matching of labels.
///
/// Each group of `c` is mapped to at most one true cluster and vice versa.
/// Up to [`EXACT_MATCH_MAX_K`] true clusters the matching is optimal (a
/// subset DP over the true labels); beyond that it is greedy by overlap.
pub fn accuracy(c: &Clustering, truth: &[usize]) -> Result<Accuracy> {
    if c.vertex_count() != truth.len() {
        return Err(Error::Param(format!(
            "clustering covers {} vertices, truth {}",
            c.vertex_count(),
            truth.len()
        )));
    }
    let k = truth.iter().max().map_or(0, |&m| m + 1);
    let g = c.group_count();
    let mut overlap = vec![vec![0usize; k]; g];
    for (&l, &t) in c.labels().iter().zip(truth) {
        overlap[l][t] += 1;
    }
    let (agree, lower_bound) = if k <= EXACT_MATCH_MAX_K {
        (best_matching(&overlap, k), false)
    } else {
        (greedy_matching(&overlap, k), true)
    };
    let misclassified = truth.len() - agree;
    Ok(Accuracy {
        exact: misclassified == 0 && g == k,
        misclassified,
        lower_bound,
        label_mismatch: g != k,
    })
}

fn best_matching(overlap: &[Vec<usize>], k: usize) -> usize {
    // best[mask] = largest agreement with the true labels in `mask` taken.
    let mut best = vec![None; 1 << k];
    best[0] = Some(0usize);
    for row in overlap {
        let prev = best.clone();
        for (mask, value) in prev.iter().enumerate() {
            let Some(value) = *value else { continue };
            for (t, &count) in row.iter().enumerate() {
                if mask & (1 << t) == 0 {
                    let next = &mut best[mask | (1 << t)];
                    *next = Some(next.map_or(value + count, |v: usize| v.max(value + count)));
                }
            }
        }
    }
    best.into_iter().flatten().max().unwrap_or(0)
}

fn greedy_matching(overlap: &[Vec<usize>], k: usize) -> usize {
    let mut cells: Vec<(usize, usize, usize)> = overlap
        .iter()
        .enumerate()
        .flat_map(|(l, row)| row.iter().enumerate().map(move |(t, &c)| (c, l, t)))
        .filter(|&(c, _, _)| c > 0)
        .collect();
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_l = vec![false; overlap.len()];
    let mut used_t = vec![false; k];
    let mut agree = 0;
    for (c, l, t) in cells {
        if !used_l[l] && !used_t[t] {
            used_l[l] = true;
            used_t[t] = true;
            agree += c;
        }
    }
    agree
}

/// Algorithm run by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "commnbr")]
    CommNbr,
    #[serde(rename = "power")]
    Power,
    #[serde(rename = "mpc-commnbr")]
    MpcCommNbr,
    #[serde(rename = "mpc-power")]
    MpcPower,
    #[serde(rename = "mpc-power-par")]
    MpcPowerPar,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::CommNbr,
        Algorithm::Power,
        Algorithm::MpcCommNbr,
        Algorithm::MpcPower,
        Algorithm::MpcPowerPar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CommNbr => "commnbr",
            Algorithm::Power => "power",
            Algorithm::MpcCommNbr => "mpc-commnbr",
            Algorithm::MpcPower => "mpc-power",
            Algorithm::MpcPowerPar => "mpc-power-par",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn is_mpc(self) -> bool {
        matches!(self, Algorithm::MpcCommNbr | Algorithm::MpcPower | Algorithm::MpcPowerPar)
    }

    pub fn uses_r(self) -> bool {
        matches!(self, Algorithm::Power | Algorithm::MpcPower | Algorithm::MpcPowerPar)
    }

    fn default_budget(self) -> BudgetMode {
        match self {
            Algorithm::MpcPowerPar => BudgetMode::KTimes,
            _ => BudgetMode::Linear,
        }
    }
}

/// Words per machine for MPC cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SChoice {
    Words(usize),
    Rule(SRule),
}

/// s as a function of N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SRule {
    /// `c_s·⌈log₂ N⌉`, the smallest s the model allows.
    Log,
    /// ⌈N^{1/4}⌉, raised to the floor if needed.
    QuarterPower,
    /// ⌈N^{1/2}⌉, raised to the floor if needed.
    Sqrt,
}

impl SChoice {
    pub fn resolve(self, vertex_count: usize, config: &MpcConfig) -> usize {
        let floor = config.min_s(vertex_count);
        match self {
            SChoice::Words(s) => s,
            SChoice::Rule(SRule::Log) => config.default_s(vertex_count),
            SChoice::Rule(SRule::QuarterPower) => ((vertex_count as f64).powf(0.25).ceil() as usize).max(floor),
            SChoice::Rule(SRule::Sqrt) => ((vertex_count as f64).sqrt().ceil() as usize).max(floor),
        }
    }
}

/// The SBM parameter grid; every combination is a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmGrid {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Output locations, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub report: String,
    pub plots: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            report: "report.csv".into(),
            plots: "plots".into(),
        }
    }
}

/// A sweep over SBM parameters, walk lengths, machine sizes and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub grid: SbmGrid,
    /// Walk lengths; only used by the power-iteration algorithms.
    #[serde(default = "default_r")]
    pub r: Vec<usize>,
    /// Machine sizes; only used by the MPC algorithms.
    #[serde(default = "default_s")]
    pub s: Vec<SChoice>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub threshold: PowerThreshold,
    #[serde(default = "default_delta_rule")]
    pub delta_rule: DeltaRule,
    /// Defaults to Õ(m), or Õ(km) for the parallel power iteration.
    #[serde(default)]
    pub budget: Option<BudgetMode>,
    #[serde(default)]
    pub constants: MpcConfig,
    #[serde(default)]
    pub commnbr: CommNbrOptions,
    #[serde(default)]
    pub regime: RegimeConstants,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_r() -> Vec<usize> {
    vec![3]
}

fn default_s() -> Vec<SChoice> {
    vec![SChoice::Rule(SRule::Log)]
}

fn default_delta_rule() -> DeltaRule {
    DeltaRule::Gap
}

impl ExperimentConfig {
    /// A config with one value per grid axis.
    pub fn single(algorithm: Algorithm, params: SbmParams) -> Self {
        ExperimentConfig {
            algorithm,
            grid: SbmGrid {
                n: vec![params.n],
                k: vec![params.k],
                p: vec![params.p],
                q: vec![params.q],
            },
            r: default_r(),
            s: default_s(),
            seeds: vec![params.seed],
            threshold: PowerThreshold::Gap,
            delta_rule: default_delta_rule(),
            budget: None,
            constants: MpcConfig::default(),
            commnbr: CommNbrOptions::default(),
            regime: RegimeConstants::default(),
            output: OutputPaths::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        for (name, empty) in [
            ("grid.n", g.n.is_empty()),
            ("grid.k", g.k.is_empty()),
            ("grid.p", g.p.is_empty()),
            ("grid.q", g.q.is_empty()),
            ("r", self.r.is_empty()),
            ("s", self.s.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(Error::Param(format!("{name} must not be empty")));
            }
        }
        self.constants.validate()?;
        for &n in &g.n {
            for &k in &g.k {
                for &p in &g.p {
                    for &q in &g.q {
                        SbmParams::new(n, k, p, q, 0).validate_model()?;
                    }
                }
            }
        }
        if self.r.contains(&0) {
            return Err(Error::Param("r must be positive".into()));
        }
        Ok(())
    }

    /// Cells in grid order: n, k, p, q, r, s, seed (outermost first).
    pub fn cells(&self, seed_offset: u64) -> Vec<Cell> {
        let rs: Vec<Option<usize>> = if self.algorithm.uses_r() {
            self.r.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let ss: Vec<Option<SChoice>> = if self.algorithm.is_mpc() {
            self.s.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut out = Vec::new();
        for &n in &self.grid.n {
            for &k in &self.grid.k {
                for &p in &self.grid.p {
                    for &q in &self.grid.q {
                        for &r in &rs {
                            for &s in &ss {
                                for &seed in &self.seeds {
                                    out.push(Cell {
                                        params: SbmParams::new(n, k, p, q, seed.wrapping_add(seed_offset)),
                                        r,
                                        s,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// One run of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub params: SbmParams,
    pub r: Option<usize>,
    pub s: Option<SChoice>,
}

/// Outcome of one cell. The first fourteen fields are the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub algorithm: &'static str,
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub q: f64,
    pub r: Option<usize>,
    pub s: Option<usize>,
    pub seed: u64,
    pub recovered: bool,
    pub misclassified: Option<usize>,
    pub rounds: Option<usize>,
    pub peak_words: Option<usize>,
    pub regime_ok: bool,
    pub fail_stage: Option<String>,
    #[serde(skip)]
    pub wall_ms: u128,
    #[serde(skip)]
    pub budget: Option<usize>,
    #[serde(skip)]
    pub violations: usize,
    #[serde(skip)]
    pub accuracy_lower_bound: bool,
    /// Realized edge count of the instance.
    #[serde(skip)]
    pub edges: usize,
    #[serde(skip)]
    pub labels: Option<Vec<usize>>,
    #[serde(skip)]
    pub ledger_digest: Option<u64>,
}

/// Every cell of a sweep, in grid order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub cells: Vec<CellReport>,
}

impl RunReport {
    /// Fraction of cells with exact recovery.
    pub fn recovery_rate(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|c| c.recovered).count() as f64 / self.cells.len() as f64
    }

    pub fn total_violations(&self) -> usize {
        self.cells.iter().map(|c| c.violations).sum()
    }
}

pub const CSV_COLUMNS: [&str; 14] = [
    "algorithm",
    "n",
    "k",
    "p",
    "q",
    "r",
    "s",
    "seed",
    "recovered",
    "misclassified",
    "rounds",
    "peak_words",
    "regime_ok",
    "fail_stage",
];

/// Short name of an error kind, used when a cell fails outside a recovery
/// stage.
fn error_kind(e: &Error) -> String {
    match e {
        Error::Recovery { stage, .. } => stage.clone(),
        Error::Param(_) => "param".into(),
        Error::Capacity { .. } => "capacity".into(),
        Error::Model(_) => "model".into(),
        Error::SendCap { .. } => "send_cap".into(),
        Error::ReceiveCap { .. } => "receive_cap".into(),
        Error::MemoryCap { .. } => "memory_cap".into(),
        Error::Capability(_) => "capability".into(),
        Error::Contract(_) => "contract".into(),
        Error::Parse(_) => "parse".into(),
        Error::Io(_) => "io".into(),
    }
}

/// Runs one cell. Failures of any kind are reported in the row.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> CellReport {
    run_cell_with(config, cell, &mut |_| Ok(()))
}

/// [`run_cell`], handing the round ledger of an MPC cell to `ledger` before
/// the cluster is dropped. An error from `ledger` is recorded as the cell's
/// failure.
pub fn run_cell_with(config: &ExperimentConfig, cell: &Cell, ledger: &mut dyn FnMut(&Ledger) -> Result<()>) -> CellReport {
    // No clock on wasm32-unknown-unknown; wall_ms stays 0 there.
    let started = (!cfg!(target_arch = "wasm32")).then(std::time::Instant::now);
    let params = cell.params;
    let algorithm = config.algorithm;
    let regime = regime_check(&params, cell.r.unwrap_or(3), &config.regime);
    let regime_ok = match algorithm {
        Algorithm::CommNbr => regime.holds(COND_THEOREM4),
        Algorithm::MpcCommNbr => regime.holds(COND_MPC_COMMNBR),
        _ => regime.holds(COND_POWER) && regime.holds(COND_POWER_SIDE),
    };
    let mut report = CellReport {
        algorithm: algorithm.name(),
        n: params.n,
        k: params.k,
        p: params.p,
        q: params.q,
        r: cell.r,
        s: None,
        seed: params.seed,
        recovered: false,
        misclassified: None,
        rounds: None,
        peak_words: None,
        regime_ok,
        fail_stage: None,
        wall_ms: 0,
        budget: None,
        violations: 0,
        accuracy_lower_bound: false,
        edges: 0,
        labels: None,
        ledger_digest: None,
    };
    let outcome = (|| -> Result<(Clustering, Vec<usize>)> {
        let instance = generate_sbm(params)?;
        let graph = instance.graph();
        let n = graph.vertex_count();
        let m = instance.edges.len();
        report.edges = m;
        let seed = params.seed;
        let opts = CommNbrOptions {
            delta_rule: config.delta_rule,
            samples: None,
            ..config.commnbr.clone()
        };
        let power = PowerParams {
            k: params.k,
            r: cell.r.unwrap_or(3),
            p: params.p,
            q: params.q,
        };
        let clustering = if algorithm.is_mpc() {
            let s = cell.s.unwrap_or(SChoice::Rule(SRule::Log)).resolve(n, &config.constants);
            report.s = Some(s);
            let setup = MpcSetup {
                s: Some(s),
                config: config.constants.clone(),
                ..MpcSetup::default()
            };
            let mode = config.budget.unwrap_or(algorithm.default_budget());
            let words = match algorithm {
                Algorithm::MpcCommNbr => comm_nbr_words(n, m, params.k, &opts),
                Algorithm::MpcPower => power_words(n, m, params.k, power.r, false, opts.c_sel, &config.constants),
                _ => power_words(n, m, params.k, power.r, true, opts.c_sel, &config.constants),
            };
            let mut run = prepare_run(&instance, &setup, words, mode)?;
            let edges = run.placement.region;
            let result = match algorithm {
                Algorithm::MpcCommNbr => {
                    mpc_comm_nbr(&mut run.cluster, &graph, edges, params.k, seed, &opts).map(|o| o.clustering)
                }
                Algorithm::MpcPower => {
                    mpc_power_iteration(&mut run.cluster, &graph, edges, &power, config.threshold).map(|o| o.clustering)
                }
                _ => mpc_power_iteration_parallel(
                    &mut run.cluster,
                    &graph,
                    edges,
                    &power,
                    config.threshold,
                    seed,
                    opts.c_sel,
                )
                .map(|o| o.clustering),
            };
            report.rounds = Some(run.cluster.round());
            report.peak_words = Some(run.cluster.peak_total());
            report.budget = run.cluster.budget();
            report.violations = run.cluster.ledger().violations().len();
            report.ledger_digest = Some(run.cluster.ledger().digest());
            ledger(run.cluster.ledger())?;
            result?
        } else if algorithm == Algorithm::CommNbr {
            comm_nbr(&graph, params.k, seed, &opts)?
        } else {
            power_iteration(&graph, &power, config.threshold)?.clustering
        };
        Ok((clustering, instance.truth))
    })();
    match outcome.and_then(|(c, truth)| {
        report.labels = Some(c.labels().to_vec());
        accuracy(&c, &truth)
    }) {
        Ok(acc) => {
            report.recovered = acc.exact;
            report.misclassified = Some(acc.misclassified);
            report.accuracy_lower_bound = acc.lower_bound;
        }
        Err(e) => report.fail_stage = Some(error_kind(&e)),
    }
    report.wall_ms = started.map_or(0, |t| t.elapsed().as_millis());
    report
}

/// Runs every cell in grid order and writes one CSV row per cell as soon
/// as it finishes. Cell failures become rows; only I/O errors and invalid
/// configs abort.
pub fn run_experiment(config: &ExperimentConfig, seed_offset: u64, out: impl Write) -> Result<RunReport> {
    run_experiment_with(config, seed_offset, out, |_, _| Ok(()))
}

/// [`run_experiment`], passing each MPC cell's ledger to `ledger` along with
/// the cell.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    seed_offset: u64,
    out: impl Write,
    mut ledger: impl FnMut(&Cell, &Ledger) -> Result<()>,
) -> Result<RunReport> {
    config.validate()?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_COLUMNS).map_err(csv_error)?;
    let mut report = RunReport::default();
    for cell in config.cells(seed_offset) {
        let row = run_cell_with(config, &cell, &mut |l| ledger(&cell, l));
        writer.serialize(&row).map_err(csv_error)?;
        writer.flush()?;
        report.cells.push(row);
    }
    Ok(report)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Report rows as CSV text.
pub fn report_csv(report: &RunReport) -> Result<String> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS).map_err(csv_error)?;
    for row in &report.cells {
        writer.serialize(row).map_err(csv_error)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Reads rows written by [`run_experiment`].
pub fn read_report_csv(input: impl std::io::Read) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse(format!("unexpected report columns: {:?}", headers)));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

/// A report row as read back from CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub q: f64,
    pub r: Option<usize>,
    pub s: Option<usize>,
    pub seed: u64,
    pub recovered: bool,
    pub misclassified: Option<usize>,
    pub rounds: Option<usize>,
    pub peak_words: Option<usize>,
    pub regime_ok: bool,
    pub fail_stage: Option<String>,
}

impl From<&CellReport> for ReportRow {
    fn from(c: &CellReport) -> Self {
        ReportRow {
            algorithm: c.algorithm.to_string(),
            n: c.n,
            k: c.k,
            p: c.p,
            q: c.q,
            r: c.r,
            s: c.s,
            seed: c.seed,
            recovered: c.recovered,
            misclassified: c.misclassified,
            rounds: c.rounds,
            peak_words: c.peak_words,
            regime_ok: c.regime_ok,
            fail_stage: c.fail_stage.clone(),
        }
    }
}

/// One (x, y, series) point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

/// The three plot-data tables derived from report rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotData {
    /// Recovery rate over seeds against (p − q)/√p.
    pub recovery: Vec<PlotPoint>,
    /// Rounds of every completed MPC cell against log_s N.
    pub rounds: Vec<PlotPoint>,
    /// Mean peak words of completed MPC cells against k.
    pub space: Vec<PlotPoint>,
}

pub const PLOT_FILES: [&str; 3] = ["recovery_vs_gap.csv", "rounds_vs_log_s_n.csv", "peak_space_vs_k.csv"];

fn series_name(row: &ReportRow) -> String {
    let mut name = format!("{} n={}", row.algorithm, row.n);
    if let Some(r) = row.r {
        name.push_str(&format!(" r={r}"));
    }
    name
}

pub fn plot_data(rows: &[ReportRow]) -> PlotData {
    let mut recovery: BTreeMap<(String, u64), (usize, usize)> = BTreeMap::new();
    let mut space: BTreeMap<(String, usize), (usize, usize)> = BTreeMap::new();
    let mut rounds = Vec::new();
    for row in rows {
        let gap = (row.p - row.q) / row.p.sqrt();
        let series = format!("{} k={}", series_name(row), row.k);
        let entry = recovery.entry((series, gap.to_bits())).or_default();
        entry.0 += usize::from(row.recovered);
        entry.1 += 1;
        let completed = row.fail_stage.is_none();
        if let (Some(r), Some(s), true) = (row.rounds, row.s, completed) {
            let vertices = (row.n * row.k) as f64;
            rounds.push(PlotPoint {
                x: vertices.ln() / (s as f64).ln(),
                y: r as f64,
                series: format!("{} k={}", series_name(row), row.k),
            });
        }
        if let (Some(peak), true) = (row.peak_words, completed) {
            let entry = space.entry((series_name(row), row.k)).or_default();
            entry.0 += peak;
            entry.1 += 1;
        }
    }
    PlotData {
        recovery: recovery
            .into_iter()
            .map(|((series, x), (ok, total))| PlotPoint {
                x: f64::from_bits(x),
                y: ok as f64 / total as f64,
                series,
            })
            .collect(),
        rounds,
        space: space
            .into_iter()
            .map(|((series, k), (sum, count))| PlotPoint {
                x: k as f64,
                y: sum as f64 / count as f64,
                series,
            })
            .collect(),
    }
}

/// Writes the plot-data files into `dir`, one `x,y,series` table each.
pub fn emit_plotdata(rows: &[ReportRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let data = plot_data(rows);
    for (name, points) in PLOT_FILES.iter().zip([&data.recovery, &data.rounds, &data.space]) {
        let mut writer = csv::Writer::from_path(dir.join(name)).map_err(csv_error)?;
        writer.write_record(["x", "y", "series"]).map_err(csv_error)?;
        for p in points {
            writer
                .write_record([p.x.to_string(), p.y.to_string(), p.series.clone()])
                .map_err(csv_error)?;
        }
        writer.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Provenance;

    fn clustering(labels: &[usize]) -> Clustering {
        Clustering::from_labels(
            labels,
            Provenance {
                algorithm: "t".into(),
                params: String::new(),
                seed: 0,
            },
        )
    }

    #[test]
    fn accuracy_examples() {
        let truth = [0, 0, 1, 1, 2, 2];
        let same = accuracy(&clustering(&truth), &truth).unwrap();
        assert!(same.exact && same.misclassified == 0);
        let swapped = accuracy(&clustering(&[2, 2, 0, 0, 1, 1]), &truth).unwrap();
        assert!(swapped.exact);
        let flipped = accuracy(&clustering(&[0, 0, 1, 1, 2, 1]), &truth).unwrap();
        assert_eq!((flipped.exact, flipped.misclassified), (false, 1));
    }

    #[test]
    fn label_count_mismatch_is_flagged() {
        let truth = [0, 0, 1, 1];
        let merged = accuracy(&clustering(&[0, 0, 0, 0]), &truth).unwrap();
        assert_eq!(merged.misclassified, 2);
        assert!(merged.label_mismatch && !merged.exact);
        let split = accuracy(&clustering(&[0, 1, 2, 2]), &truth).unwrap();
        assert_eq!(split.misclassified, 1);
        assert!(split.label_mismatch);
    }

    #[test]
    fn large_k_is_greedy() {
        let truth: Vec<usize> = (0..20).map(|v| v / 2).collect();
        let acc = accuracy(&clustering(&truth), &truth).unwrap();
        assert!(acc.exact && acc.lower_bound);
    }

    #[test]
    fn cells_follow_grid_order() {
        let mut config = ExperimentConfig::single(Algorithm::MpcPower, SbmParams::new(10, 2, 0.5, 0.1, 0));
        config.seeds = vec![0, 1];
        config.r = vec![2, 3];
        let cells = config.cells(5);
        let keys: Vec<(Option<usize>, u64)> = cells.iter().map(|c| (c.r, c.params.seed)).collect();
        assert_eq!(keys, vec![(Some(2), 5), (Some(2), 6), (Some(3), 5), (Some(3), 6)]);

        config.algorithm = Algorithm::CommNbr;
        assert_eq!(config.cells(0).len(), 2, "r and s do not apply");
    }

    #[test]
    fn empty_grids_are_rejected() {
        let mut config = ExperimentConfig::single(Algorithm::Power, SbmParams::new(10, 2, 0.5, 0.1, 0));
        config.seeds.clear();
        assert!(matches!(config.validate(), Err(Error::Param(_))));
    }

    #[test]
    fn empty_report_gives_header_only_plots() {
        let data = plot_data(&[]);
        assert!(data.recovery.is_empty() && data.rounds.is_empty() && data.space.is_empty());
    }

    #[test]
    fn s_rules() {
        let c = MpcConfig::default();
        assert_eq!(SChoice::Rule(SRule::Sqrt).resolve(4096, &c), 64);
        assert_eq!(SChoice::Rule(SRule::Log).resolve(4096, &c), c.default_s(4096));
        assert_eq!(SChoice::Rule(SRule::QuarterPower).resolve(4096, &c), c.min_s(4096).max(8));
    }
}
