//! Command-line front end: `gapcast <verb> --config <file> [--set key=value]...`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    cleanse, fetch_http_report, load_csv, merge_on_datetime, parse_datetime, read_canonical, synthesize,
    write_canonical, ColumnSchema, FetchConfig, SynthConfig, TimeSeriesTable, DAM_COLUMN, DEFAULT_FILL,
};
use crate::error::{Error, ErrorClass, Result};
use crate::eval::{describe, DescriptiveStats};
use crate::features::{add_derived_columns, FeatureConfig, GAP_COLUMN, RTM_HOURLY_COLUMN};
use crate::forest::{important_features, ForestParams};
use crate::lasso::LassoParams;
use crate::learner::{LearnerKind, LearnerParams, TrainedModel};
use crate::lstm::TrainConfig;
use crate::pipeline::{self, distribution_csv, forecast_window_csv, ModelBundle, Rows};
use crate::svr::SvrParams;
use crate::tune::{CvOptions, ParamGrid};

pub const TABLE_FILE: &str = "table.csv";
pub const MODEL_FILE: &str = "model.json";
pub const RUN_CONFIG_FILE: &str = "run_config.toml";

#[derive(Debug, Parser)]
#[command(name = "gapcast", version, about = "Forecast the day-ahead/real-time electricity price gap")]
pub struct Cli {
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, merge and cleanse input CSVs into a canonical table.
    Ingest(Common),
    /// Write a seeded synthetic table.
    Synth(Common),
    /// Download a report over HTTP (requires GAPCAST_NETWORK=1).
    Fetch(Common),
    /// Grid search with k-fold cross-validation on the training split.
    Tune(Common),
    /// Train one learner and write a model bundle.
    Train(Common),
    /// Forecast with a trained model.
    Predict(Common),
    /// Metrics, descriptive statistics and forecast exports for several models.
    Evaluate(Common),
    /// Forest feature importance ranking.
    Importance(Common),
    /// Tree-output distributions for the direct and difference gap methods.
    Distribution(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `learner.kind=svr`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub features: FeatureConfig,
    pub learner: LearnerConfig,
    pub tune: TuneConfig,
    pub predict: PredictConfig,
    pub evaluate: EvaluateConfig,
    pub importance: ImportanceConfig,
    pub distribution: DistributionConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fetch: Option<FetchSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("gapcast-out"),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            features: FeatureConfig::default(),
            learner: LearnerConfig::default(),
            tune: TuneConfig::default(),
            predict: PredictConfig::default(),
            evaluate: EvaluateConfig::default(),
            importance: ImportanceConfig::default(),
            distribution: DistributionConfig::default(),
            fetch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Canonical table read by every modelling command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    pub inputs: Vec<InputSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<String>,
    pub fill: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { table: None, inputs: Vec::new(), start: None, end: None, fill: DEFAULT_FILL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    pub columns: Vec<ColumnSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Parameters written by `tune`; overrides the per-learner sections.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params_file: Option<PathBuf>,
    pub lasso: LassoParams,
    pub svr: SvrParams,
    pub forest: ForestParams,
    pub lstm: TrainConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Lasso,
            params_file: None,
            lasso: LassoParams::default(),
            svr: SvrParams::default(),
            forest: ForestParams::default(),
            lstm: TrainConfig::default(),
        }
    }
}

impl LearnerConfig {
    pub fn params(&self, seed: u64) -> Result<LearnerParams> {
        if let Some(path) = &self.params_file {
            let p: LearnerParams = serde_json::from_str(&read_text(path)?)?;
            return Ok(p);
        }
        let p = match self.kind {
            LearnerKind::Lasso => LearnerParams::Lasso(self.lasso),
            LearnerKind::Svr => LearnerParams::Svr(self.svr),
            LearnerKind::Forest => LearnerParams::Forest(self.forest),
            LearnerKind::Lstm => LearnerParams::Lstm(self.lstm),
        };
        Ok(p.with_seed(seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub folds: usize,
    pub shuffle: bool,
    /// Shipped grid for the learner when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<ParamGrid>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self { folds: crate::tune::DEFAULT_FOLDS, shuffle: false, grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    pub rows: Rows,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { model: None, rows: Rows::Test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub models: Vec<PathBuf>,
    pub rows: Rows,
    pub window_hours: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { models: Vec::new(), rows: Rows::Test, window_hours: 96 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top: Option<usize>,
    /// Minimum score for the `important_features` list.
    pub cutoff: f64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self { model: None, top: None, cutoff: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionConfig {
    /// Hour to chart; the first test hour when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub delta: f64,
    pub bins: usize,
    pub forest: ForestParams,
    /// Test hours sampled for the aggregate comparison.
    pub samples: usize,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        Self {
            timestamp: None,
            delta: crate::eval::DEFAULT_DELTA,
            bins: 20,
            forest: ForestParams::new(100, 0),
            samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchSection {
    pub endpoint: String,
    #[serde(default)]
    pub query: std::collections::BTreeMap<String, String>,
    #[serde(default = "default_fetch_timeout")]
    pub timeout_secs: u64,
    /// Validates the body as CSV with these columns when present.
    #[serde(default)]
    pub columns: Vec<ColumnSchema>,
    #[serde(default = "default_fetch_file")]
    pub file: String,
}

fn default_fetch_timeout() -> u64 {
    30
}

fn default_fetch_file() -> String {
    "fetched.csv".into()
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

/// Sets `path` (dot separated) in `root` to `raw`, parsed as a TOML value
/// when possible and as a string otherwise.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override `{assignment}` is not KEY=VALUE")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("bad override key `{key}`")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Usage(format!("override `{key}` descends into a non-table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut root = match path {
        Some(p) => toml::from_str::<toml::Table>(&read_text(p)?)
            .map_err(|e| Error::BadConfig(format!("{}: {e}", p.display())))?,
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    RunConfig::deserialize(toml::Value::Table(root)).map_err(|e| Error::BadConfig(e.to_string()))
}

struct Run {
    config: RunConfig,
}

impl Run {
    fn out(&self, file: &str) -> PathBuf {
        self.config.output_dir.join(file)
    }

    fn begin(&self) -> Result<()> {
        fs::create_dir_all(&self.config.output_dir)?;
        let text = toml::to_string(&self.config).map_err(|e| Error::BadConfig(e.to_string()))?;
        fs::write(self.out(RUN_CONFIG_FILE), text)?;
        Ok(())
    }

    fn write(&self, file: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.out(file);
        fs::write(&path, contents)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(file, text)
    }

    fn table(&self) -> Result<TimeSeriesTable> {
        let path = self
            .config
            .data
            .table
            .clone()
            .ok_or_else(|| Error::BadConfig("data.table is not set".into()))?;
        Ok(read_canonical(&path)?.0)
    }

    fn bundle(path: Option<&PathBuf>, what: &str) -> Result<ModelBundle> {
        let path = path.ok_or_else(|| Error::BadConfig(format!("{what} is not set")))?;
        Ok(serde_json::from_str(&read_text(path)?)?)
    }
}

fn parse_hour(s: &str) -> Result<chrono::NaiveDateTime> {
    parse_datetime(s).ok_or_else(|| Error::BadConfig(format!("cannot parse datetime `{s}`")))
}

fn cmd_ingest(run: &Run) -> Result<()> {
    let data = &run.config.data;
    if data.inputs.is_empty() {
        return Err(Error::BadConfig("data.inputs is empty".into()));
    }
    let tables = data
        .inputs
        .iter()
        .map(|i| load_csv(&i.path, &i.columns))
        .collect::<Result<Vec<_>>>()?;
    let merged = merge_on_datetime(&tables)?;
    let first = merged.timestamps.first().copied().ok_or(Error::EmptySpan)?;
    let last = merged.timestamps.last().copied().ok_or(Error::EmptySpan)?;
    let start = data.start.as_deref().map(parse_hour).transpose()?.unwrap_or(first);
    let end = data.end.as_deref().map(parse_hour).transpose()?.unwrap_or(last);
    let clean = cleanse(&merged, data.fill, start, end)?;
    write_canonical(&clean, &run.out(TABLE_FILE), data.fill)?;
    Ok(())
}

fn cmd_synth(run: &Run) -> Result<()> {
    let table = synthesize(&run.config.synth)?;
    write_canonical(&table, &run.out(TABLE_FILE), run.config.data.fill)
}

fn cmd_fetch(run: &Run) -> Result<()> {
    let section = run.config.fetch.as_ref().ok_or_else(|| Error::BadConfig("[fetch] section missing".into()))?;
    let request = FetchConfig {
        endpoint: section.endpoint.clone(),
        query: section.query.clone(),
        timeout_secs: section.timeout_secs,
        network_enabled: std::env::var("GAPCAST_NETWORK").map_or(false, |v| v == "1"),
    };
    let path = fetch_http_report(&request, &run.out(&section.file))?;
    if !section.columns.is_empty() {
        load_csv(&path, &section.columns)?;
    }
    Ok(())
}

fn cmd_tune(run: &Run) -> Result<()> {
    let cfg = &run.config;
    let table = run.table()?;
    let base = cfg.learner.params(cfg.seed)?;
    let grid = cfg.tune.grid.clone().unwrap_or_else(|| ParamGrid::default_for(base.kind()));
    let candidates = grid.candidates(Some(&base))?;
    let options = CvOptions { folds: cfg.tune.folds, seed: cfg.seed, shuffle: cfg.tune.shuffle };
    let result = pipeline::tune(&table, &cfg.features, &candidates, &options)?;
    run.write("cv_results.csv", result.to_csv())?;
    run.write_json("cv_result.json", &result)?;
    run.write_json("best_params.json", &result.best_params)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainingLog<'a> {
    learner: LearnerKind,
    params: &'a LearnerParams,
    n_features: usize,
    n_train: usize,
    n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_history: Option<&'a [f64]>,
}

fn cmd_train(run: &Run) -> Result<()> {
    let cfg = &run.config;
    let table = run.table()?;
    let params = cfg.learner.params(cfg.seed)?;
    let (bundle, prepared) = pipeline::train(&table, &cfg.features, &params)?;
    run.write_json(MODEL_FILE, &bundle)?;
    let history = match &bundle.model {
        TrainedModel::Lstm(m) => {
            run.write("loss_history.csv", m.loss_csv())?;
            Some(m.loss_history.as_slice())
        }
        _ => None,
    };
    run.write_json(
        "training_log.json",
        &TrainingLog {
            learner: bundle.learner,
            params: &bundle.params,
            n_features: bundle.feature_names.len(),
            n_train: prepared.n_train,
            n_test: prepared.dataset.len() - prepared.n_train,
            loss_history: history,
        },
    )?;
    Ok(())
}

fn cmd_predict(run: &Run) -> Result<()> {
    let table = run.table()?;
    let bundle = Run::bundle(run.config.predict.model.as_ref(), "predict.model")?;
    let forecast = bundle.forecast(&table, run.config.predict.rows)?;
    run.write("forecast.csv", forecast.to_csv())?;
    Ok(())
}

#[derive(Serialize)]
struct MarketStats {
    dam: DescriptiveStats,
    rtm: DescriptiveStats,
    gap: DescriptiveStats,
}

fn market_stats(table: &TimeSeriesTable) -> Result<MarketStats> {
    let t = add_derived_columns(table)?;
    Ok(MarketStats {
        dam: describe(t.values(DAM_COLUMN)?)?,
        rtm: describe(t.values(RTM_HOURLY_COLUMN)?)?,
        gap: describe(t.values(GAP_COLUMN)?)?,
    })
}

fn cmd_evaluate(run: &Run) -> Result<()> {
    let cfg = &run.config.evaluate;
    if cfg.models.is_empty() {
        return Err(Error::BadConfig("evaluate.models is empty".into()));
    }
    let table = run.table()?;
    let mut forecasts = Vec::new();
    let mut metrics = serde_json::Map::new();
    let mut long = String::from("timestamp,actual,predicted,model\n");
    for (i, path) in cfg.models.iter().enumerate() {
        let bundle = Run::bundle(Some(path), "evaluate.models")?;
        if i == 0 && cfg.rows == Rows::Test {
            let prepared = pipeline::prepare(&table, &bundle.features, bundle.learner)?;
            metrics.insert("baseline_train_mean".into(), serde_json::to_value(pipeline::mean_baseline(&prepared)?)?);
        }
        let f = bundle.forecast(&table, cfg.rows)?;
        let report = f.metrics(bundle.features.target)?;
        metrics.insert(f.model.clone(), serde_json::to_value(report)?);
        long.push_str(f.to_csv().split_once('\n').map_or("", |(_, body)| body));
        forecasts.push(f);
    }
    run.write("forecast.csv", long)?;
    run.write_json("metrics.json", &metrics)?;
    run.write(&format!("forecast_{}h.csv", cfg.window_hours), forecast_window_csv(&forecasts, cfg.window_hours)?)?;
    run.write_json("stats.json", &market_stats(&table)?)?;
    Ok(())
}

fn cmd_importance(run: &Run) -> Result<()> {
    let cfg = &run.config.importance;
    let bundle = Run::bundle(cfg.model.as_ref(), "importance.model")?;
    let TrainedModel::Forest(forest) = &bundle.model else {
        return Err(Error::Usage(format!("importance needs a forest model, got {}", bundle.learner)));
    };
    let ranking = forest.feature_importance();
    let shown = cfg.top.map_or(ranking.len(), |n| n.min(ranking.len()));
    let mut csv = String::from("rank,feature,score\n");
    for (i, (name, score)) in ranking.iter().take(shown).enumerate() {
        csv.push_str(&format!("{},{},{}\n", i + 1, name, score));
    }
    run.write("importance.csv", csv)?;
    run.write_json("important_features.json", &important_features(&ranking, cfg.cutoff))?;
    Ok(())
}

#[derive(Serialize)]
struct ComparisonReport {
    timestamp: String,
    actual_gap: f64,
    delta: f64,
    prob_direct: f64,
    prob_difference: f64,
    point_direct: f64,
    point_difference: f64,
    summary: crate::eval::ComparisonSummary,
}

fn cmd_distribution(run: &Run) -> Result<()> {
    let cfg = &run.config;
    let d = &cfg.distribution;
    let table = run.table()?;
    let forests = pipeline::fit_market_forests(&table, &cfg.features, &d.forest)?;
    let row = match &d.timestamp {
        Some(ts) => forests.row_of(parse_hour(ts)?)?,
        None => forests.n_train,
    };
    let x = forests.features.row(row);
    let c = forests.compare_row(row, d.delta, d.bins)?;
    run.write("dam_distribution.csv", distribution_csv(&forests.dam.predict_distribution(x, d.bins)?))?;
    run.write("rtm_distribution.csv", distribution_csv(&forests.rtm.predict_distribution(x, d.bins)?))?;
    run.write("direct_distribution.csv", distribution_csv(&c.direct))?;
    run.write("difference_distribution.csv", distribution_csv(&c.difference))?;
    let rows = forests.sample_test_rows(d.samples, cfg.seed);
    let (_, summary) = forests.study(&rows, d.delta, d.bins)?;
    run.write_json(
        "comparison.json",
        &ComparisonReport {
            timestamp: crate::dataset::format_datetime(forests.timestamps[row]),
            actual_gap: c.actual_gap,
            delta: c.delta,
            prob_direct: c.prob_direct,
            prob_difference: c.prob_difference,
            point_direct: c.direct.point_estimate,
            point_difference: c.difference.point_estimate,
            summary,
        },
    )?;
    Ok(())
}

/// Runs one parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Ingest(c)
        | Command::Synth(c)
        | Command::Fetch(c)
        | Command::Tune(c)
        | Command::Train(c)
        | Command::Predict(c)
        | Command::Evaluate(c)
        | Command::Importance(c)
        | Command::Distribution(c) => c,
    };
    let config = load_config(common.config.as_deref(), &common.set)?;
    let run = Run { config };
    run.begin()?;
    let work = || match &cli.command {
        Command::Ingest(_) => cmd_ingest(&run),
        Command::Synth(_) => cmd_synth(&run),
        Command::Fetch(_) => cmd_fetch(&run),
        Command::Tune(_) => cmd_tune(&run),
        Command::Train(_) => cmd_train(&run),
        Command::Predict(_) => cmd_predict(&run),
        Command::Evaluate(_) => cmd_evaluate(&run),
        Command::Importance(_) => cmd_importance(&run),
        Command::Distribution(_) => cmd_distribution(&run),
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::BadConfig(e.to_string()))?
            .install(work),
        None => work(),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

/// Machine-readable error line for stderr.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "error": err.kind(),
        "class": format!("{:?}", err.class()).to_lowercase(),
        "message": err.to_string(),
    })
    .to_string()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
