//! Hourly market, weather and solar tables: CSV ingestion, merging on the
//! date-hour key, cleansing, a seeded synthetic generator, and the canonical
//! on-disk form (CSV plus a JSON schema sidecar).
//!
//! Missing cells are carried as `NaN` until [`cleanse`] replaces them with
//! the run's fill constant.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{Datelike, Duration as ChronoDuration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FILL: f64 = -999.0;
pub const DATETIME_COLUMN: &str = "datetime";
pub const DAM_COLUMN: &str = "dam_lmp";
/// Number of 5-minute real-time intervals per hour.
pub const RTM_INTERVALS: usize = 12;

const CANONICAL_FORMAT: &str = "%Y-%m-%dT%H:%M";
const ACCEPTED_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
];

pub fn rtm_interval_column(k: usize) -> String {
    format!("rtm_lmp_{k}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Datetime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCode {
    pub label: String,
    pub code: u32,
}

/// Declared column of an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_map: Option<Vec<CategoryCode>>,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Numeric, category_map: None }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Categorical, category_map: Some(Vec::new()) }
    }

    pub fn datetime(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Datetime, category_map: None }
    }

    /// Code for `label`, assigning the next consecutive code on first sight.
    pub fn encode(&mut self, label: &str) -> u32 {
        let map = self.category_map.get_or_insert_with(Vec::new);
        if let Some(c) = map.iter().find(|c| c.label == label) {
            return c.code;
        }
        let code = map.len() as u32;
        map.push(CategoryCode { label: label.to_owned(), code });
        code
    }

    pub fn decode(&self, code: u32) -> Option<&str> {
        self.category_map
            .as_ref()?
            .iter()
            .find(|c| c.code == code)
            .map(|c| c.label.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub provenance: String,
    /// Present for categorical columns; values hold the codes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_map: Option<Vec<CategoryCode>>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>, provenance: impl Into<String>) -> Self {
        Self { name: name.into(), values, provenance: provenance.into(), category_map: None }
    }

    pub fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            name: self.name.clone(),
            kind: if self.category_map.is_some() {
                ColumnKind::Categorical
            } else {
                ColumnKind::Numeric
            },
            category_map: self.category_map.clone(),
        }
    }
}

/// Hourly, timestamp-indexed numeric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: Vec<Column>,
}

impl TimeSeriesTable {
    pub fn new(timestamps: Vec<NaiveDateTime>, columns: Vec<Column>) -> Result<Self> {
        for c in &columns {
            if c.values.len() != timestamps.len() {
                return Err(Error::ShapeMismatch(format!(
                    "column `{}` has {} values for {} timestamps",
                    c.name,
                    c.values.len(),
                    timestamps.len()
                )));
            }
        }
        Ok(Self { timestamps, columns })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn push_column(&mut self, column: Column) -> Result<()> {
        if self.column(&column.name).is_some() {
            return Err(Error::DuplicateColumn(column.name));
        }
        if column.values.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "column `{}` has {} values for {} timestamps",
                column.name,
                column.values.len(),
                self.len()
            )));
        }
        self.columns.push(column);
        Ok(())
    }

    /// Row index of `ts`, if present.
    pub fn position(&self, ts: NaiveDateTime) -> Option<usize> {
        self.timestamps.iter().position(|t| *t == ts)
    }

    /// Fails unless timestamps advance by exactly one hour per row.
    pub fn ensure_hourly(&self) -> Result<()> {
        for (i, w) in self.timestamps.windows(2).enumerate() {
            if w[1] - w[0] != ChronoDuration::hours(1) {
                return Err(Error::NotHourly(i + 1));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Vec<ColumnSchema> {
        self.columns.iter().map(Column::schema).collect()
    }
}

pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ACCEPTED_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(floor_hour)
}

pub fn format_datetime(t: NaiveDateTime) -> String {
    t.format(CANONICAL_FORMAT).to_string()
}

fn floor_hour(t: NaiveDateTime) -> NaiveDateTime {
    t.date().and_hms_opt(t.hour(), 0, 0).expect("valid hour")
}

fn parse_cell(s: &str) -> f64 {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => v,
        _ => f64::NAN,
    }
}

fn provenance_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads `path` according to `schema`. Exactly one schema entry must be of
/// kind datetime; file columns absent from the schema are ignored.
pub fn load_csv(path: &Path, schema: &[ColumnSchema]) -> Result<TimeSeriesTable> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    let bytes = fs::read(path)?;
    load_csv_bytes(&bytes, schema, &provenance_of(path), path)
}

fn load_csv_bytes(
    bytes: &[u8],
    schema: &[ColumnSchema],
    provenance: &str,
    path: &Path,
) -> Result<TimeSeriesTable> {
    let dt_schema: Vec<&ColumnSchema> =
        schema.iter().filter(|s| s.kind == ColumnKind::Datetime).collect();
    if dt_schema.len() != 1 {
        return Err(Error::BadConfig(format!(
            "schema needs exactly one datetime column, found {}",
            dt_schema.len()
        )));
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(bytes);
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].trim().is_empty()) => h.clone(),
        Ok(_) => return Err(Error::EmptyFile(path.to_owned())),
        Err(e) => return Err(e.into()),
    };
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let dt_idx = index_of(&dt_schema[0].name)?;
    let mut value_cols: Vec<(usize, ColumnSchema)> = Vec::new();
    for s in schema.iter().filter(|s| s.kind != ColumnKind::Datetime) {
        value_cols.push((index_of(&s.name)?, s.clone()));
    }

    let mut timestamps = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); value_cols.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(dt_idx).unwrap_or("");
        let ts = parse_datetime(raw)
            .ok_or_else(|| Error::BadDatetime { row, value: raw.to_owned() })?;
        timestamps.push(ts);
        for ((idx, s), out) in value_cols.iter_mut().zip(values.iter_mut()) {
            let cell = rec.get(*idx).unwrap_or("").trim();
            let v = match s.kind {
                ColumnKind::Categorical if cell.is_empty() => f64::NAN,
                ColumnKind::Categorical => f64::from(s.encode(cell)),
                _ => parse_cell(cell),
            };
            out.push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::EmptyFile(path.to_owned()));
    }
    let columns = value_cols
        .into_iter()
        .zip(values)
        .map(|((_, s), v)| Column {
            name: s.name,
            values: v,
            provenance: provenance.to_owned(),
            category_map: if s.kind == ColumnKind::Categorical { s.category_map } else { None },
        })
        .collect();
    TimeSeriesTable::new(timestamps, columns)
}

/// Aligns tables on the hourly key over the union of their hours. Cells a
/// source does not cover are missing. A single table passes through as-is.
pub fn merge_on_datetime(tables: &[TimeSeriesTable]) -> Result<TimeSeriesTable> {
    match tables {
        [] => return Err(Error::EmptyInput),
        [only] => return Ok(only.clone()),
        _ => {}
    }
    let mut seen = BTreeSet::new();
    for c in tables.iter().flat_map(|t| &t.columns) {
        if !seen.insert(c.name.as_str()) {
            return Err(Error::DuplicateColumn(c.name.clone()));
        }
    }
    let hours: Vec<NaiveDateTime> = tables
        .iter()
        .flat_map(|t| t.timestamps.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slot: HashMap<NaiveDateTime, usize> =
        hours.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    let mut columns = Vec::new();
    for t in tables {
        // first occurrence of a duplicated hour wins
        let mut first_row: Vec<Option<usize>> = vec![None; hours.len()];
        for (row, ts) in t.timestamps.iter().enumerate() {
            let s = slot[ts];
            if first_row[s].is_none() {
                first_row[s] = Some(row);
            }
        }
        for c in &t.columns {
            let values = first_row
                .iter()
                .map(|r| r.map_or(f64::NAN, |r| c.values[r]))
                .collect();
            columns.push(Column { values, ..c.clone() });
        }
    }
    TimeSeriesTable::new(hours, columns)
}

/// Dedupes (first row kept), restricts to the inclusive `[start, end]` span,
/// materializes every hour of the span and replaces every missing or
/// non-finite cell with `fill_constant`.
pub fn cleanse(
    table: &TimeSeriesTable,
    fill_constant: f64,
    start: NaiveDateTime,
    end: NaiveDateTime,
) -> Result<TimeSeriesTable> {
    if start >= end {
        return Err(Error::BadConfig("cleanse span must satisfy start < end".into()));
    }
    if floor_hour(start) != start || floor_hour(end) != end {
        return Err(Error::BadConfig("cleanse span endpoints must be whole hours".into()));
    }
    if !fill_constant.is_finite() {
        return Err(Error::BadConfig("fill constant must be finite".into()));
    }
    let n_hours = ((end - start).num_hours() + 1) as usize;
    let mut source_row: Vec<Option<usize>> = vec![None; n_hours];
    let mut any = false;
    for (row, ts) in table.timestamps.iter().enumerate() {
        if *ts < start || *ts > end {
            continue;
        }
        let offset = (*ts - start).num_hours() as usize;
        if source_row[offset].is_none() {
            source_row[offset] = Some(row);
            any = true;
        }
    }
    if !any {
        return Err(Error::EmptySpan);
    }
    let timestamps = (0..n_hours)
        .map(|h| start + ChronoDuration::hours(h as i64))
        .collect();
    let columns = table
        .columns
        .iter()
        .map(|c| {
            let values = source_row
                .iter()
                .map(|r| match r.map(|r| c.values[r]) {
                    Some(v) if v.is_finite() => v,
                    _ => fill_constant,
                })
                .collect();
            Column { values, ..c.clone() }
        })
        .collect();
    TimeSeriesTable::new(timestamps, columns)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaSidecar {
    datetime_column: String,
    fill_constant: f64,
    columns: Vec<ColumnSchema>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".schema.json");
    PathBuf::from(s)
}

/// Canonical CSV text: `datetime` then every column in table order, missing
/// cells left blank, floats in shortest round-trip form.
pub fn to_canonical_csv(table: &TimeSeriesTable) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec![DATETIME_COLUMN.to_owned()];
    header.extend(table.columns.iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for (i, ts) in table.timestamps.iter().enumerate() {
        let mut rec = vec![format_datetime(*ts)];
        for c in &table.columns {
            let v = c.values[i];
            rec.push(if v.is_nan() { String::new() } else { format!("{v}") });
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes the canonical CSV plus its `<csv>.schema.json` sidecar.
pub fn write_canonical(table: &TimeSeriesTable, csv_path: &Path, fill_constant: f64) -> Result<()> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(csv_path, to_canonical_csv(table)?)?;
    let sidecar = SchemaSidecar {
        datetime_column: DATETIME_COLUMN.into(),
        fill_constant,
        columns: table.schema(),
    };
    fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}

/// Reads a table written by [`write_canonical`]. Returns the table and the
/// recorded fill constant.
pub fn read_canonical(csv_path: &Path) -> Result<(TimeSeriesTable, f64)> {
    let side = sidecar_path(csv_path);
    if !side.exists() {
        return Err(Error::MissingFile(side));
    }
    let sidecar: SchemaSidecar = serde_json::from_str(&fs::read_to_string(&side)?)?;
    // categorical cells are already codes in canonical form
    let mut schema = vec![ColumnSchema::datetime(sidecar.datetime_column.clone())];
    schema.extend(sidecar.columns.iter().map(|c| ColumnSchema::numeric(c.name.clone())));
    let mut table = load_csv(csv_path, &schema)?;
    for (col, s) in table.columns.iter_mut().zip(&sidecar.columns) {
        col.category_map = s.category_map.clone();
        col.provenance = "canonical".into();
    }
    Ok((table, sidecar.fill_constant))
}

// ---------------------------------------------------------------------------
// synthetic data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub hours: usize,
    pub seed: u64,
    pub start: NaiveDateTime,
    pub dam_base: f64,
    pub rtm_base: f64,
    pub daily_amplitude: f64,
    pub spike_rate: f64,
    pub spike_scale: f64,
    pub weather_coupling: f64,
    pub missing_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            hours: 8760,
            seed: 2017,
            start: NaiveDate::from_ymd_opt(2017, 1, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            dam_base: 39.0,
            rtm_base: 36.0,
            daily_amplitude: 12.0,
            spike_rate: 0.01,
            spike_scale: 40.0,
            weather_coupling: 1.0,
            missing_rate: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hours < 48 {
            return Err(Error::BadConfig(format!("hours must be >= 48, got {}", self.hours)));
        }
        for (name, r) in [("spike_rate", self.spike_rate), ("missing_rate", self.missing_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::BadConfig(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if self.spike_scale < 0.0 || !self.spike_scale.is_finite() {
            return Err(Error::BadConfig("spike_scale must be a finite nonnegative value".into()));
        }
        if floor_hour(self.start) != self.start {
            return Err(Error::BadConfig("start must be a whole hour".into()));
        }
        Ok(())
    }
}

/// Ground truth retained by the generator, for tests and benchmarks.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    /// Hours at which a real-time price spike was injected.
    pub spike_hours: Vec<usize>,
}

/// Seeded synthetic market, weather and solar table.
pub fn synthesize(config: &SynthConfig) -> Result<TimeSeriesTable> {
    synthesize_with_truth(config).map(|(t, _)| t)
}

const SYNTH_COLUMNS: [&str; 12] = [
    "demand_forecast_da",
    "demand_forecast_2d",
    "temperature",
    "relative_humidity",
    "dew_point",
    "wind_speed",
    "wind_direction",
    "solar_zenith",
    "ghi",
    "dni",
    "dhi",
    "cloud_layer",
];

pub fn synthesize_with_truth(config: &SynthConfig) -> Result<(TimeSeriesTable, SynthTruth)> {
    config.validate()?;
    let n = config.hours;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let spike_size = Exp::new(1.0).expect("unit exponential");
    let latitude = 32.7_f64.to_radians();
    let tau = std::f64::consts::TAU;

    let mut dam = Vec::with_capacity(n);
    let mut rtm: Vec<Vec<f64>> = vec![Vec::with_capacity(n); RTM_INTERVALS];
    let mut exo: Vec<Vec<f64>> = vec![Vec::with_capacity(n); SYNTH_COLUMNS.len()];
    let mut spikes = Vec::new();

    let (mut temp_noise, mut wind, mut wind_dir, mut cloud) = (0.0_f64, 4.0_f64, 270.0_f64, 1.0_f64);
    let (mut dam_noise, mut gap_state) = (0.0_f64, 0.0_f64);
    let mut timestamps = Vec::with_capacity(n);

    for h in 0..n {
        let ts = config.start + ChronoDuration::hours(h as i64);
        timestamps.push(ts);
        let hod = f64::from(ts.hour());
        let doy = f64::from(ts.ordinal());

        // weather
        temp_noise = 0.9 * temp_noise + 0.6 * unit.sample(&mut rng);
        let temperature = 18.0
            + 6.0 * (tau * (doy - 100.0) / 365.0).sin()
            + 5.0 * (tau * (hod - 9.0) / 24.0).sin()
            + temp_noise;
        let humidity = (65.0 - 1.5 * (temperature - 18.0) + 4.0 * unit.sample(&mut rng)).clamp(5.0, 100.0);
        let dew_point = temperature - (100.0 - humidity) / 5.0;
        wind = (0.85 * wind + 0.15 * 4.0 + 0.7 * unit.sample(&mut rng)).max(0.0);
        wind_dir = (wind_dir + 20.0 * unit.sample(&mut rng)).rem_euclid(360.0);
        if rng.gen::<f64>() < 0.08 {
            cloud = f64::from(rng.gen_range(0..4u8));
        }

        // solar geometry and irradiance
        let declination = 23.44_f64.to_radians() * (tau * (284.0 + doy) / 365.0).sin();
        let hour_angle = (15.0 * (hod - 12.0)).to_radians();
        let cos_z = latitude.sin() * declination.sin()
            + latitude.cos() * declination.cos() * hour_angle.cos();
        let zenith = cos_z.clamp(-1.0, 1.0).acos().to_degrees();
        let sun = cos_z.max(0.0);
        let cloud_factor = 1.0 - 0.2 * cloud;
        let ghi = 1000.0 * sun.powf(1.2) * cloud_factor;
        let dni = if sun > 0.0 { 900.0 * sun.powf(0.3) * (1.0 - 0.25 * cloud) } else { 0.0 };
        let dhi = (ghi - dni * sun).max(0.0);

        // demand
        let daily = (tau * (hod - 14.0) / 24.0).cos();
        let demand = 2500.0 + 450.0 * daily + 35.0 * (temperature - 18.0).abs() + 40.0 * unit.sample(&mut rng);
        let demand_2d = demand + 60.0 * unit.sample(&mut rng);

        // prices
        dam_noise = 0.8 * dam_noise + 1.5 * unit.sample(&mut rng);
        let shape = (tau * (hod - 19.0) / 24.0).cos() + 0.5 * (tau * (hod - 8.0) / 12.0).cos();
        let dam_price = config.dam_base
            + config.daily_amplitude * shape
            + 0.012 * (demand - 2500.0)
            + config.weather_coupling * 0.6 * (temperature - 18.0)
            + dam_noise;

        // the gap: persistent state plus a solar over-supply term
        gap_state = 0.97 * gap_state + 0.8 * unit.sample(&mut rng);
        let solar_push = config.weather_coupling * 10.0 * (ghi / 1000.0);
        let wind_push = config.weather_coupling * 0.8 * (wind - 4.0);
        let mut structural_gap = (config.dam_base - config.rtm_base) + solar_push + wind_push + gap_state;
        if rng.gen::<f64>() < config.spike_rate {
            spikes.push(h);
            let sign = if rng.gen::<f64>() < 0.75 { -1.0 } else { 1.0 };
            structural_gap += sign * config.spike_scale * (0.5 + spike_size.sample(&mut rng));
        }
        let rtm_hour = dam_price - structural_gap;
        dam.push(dam_price);
        for series in rtm.iter_mut() {
            series.push(rtm_hour + 2.5 * unit.sample(&mut rng));
        }

        for (series, v) in exo.iter_mut().zip([
            demand, demand_2d, temperature, humidity, dew_point, wind, wind_dir, zenith, ghi, dni,
            dhi, cloud,
        ]) {
            series.push(v);
        }
    }

    let mut columns = vec![Column::new(DAM_COLUMN, dam, "synthetic")];
    for (k, series) in rtm.into_iter().enumerate() {
        columns.push(Column::new(rtm_interval_column(k + 1), series, "synthetic"));
    }
    for (name, series) in SYNTH_COLUMNS.iter().zip(exo) {
        columns.push(Column::new(*name, series, "synthetic"));
    }
    if config.missing_rate > 0.0 {
        for c in columns.iter_mut() {
            for v in c.values.iter_mut() {
                if rng.gen::<f64>() < config.missing_rate {
                    *v = f64::NAN;
                }
            }
        }
    }
    let table = TimeSeriesTable::new(timestamps, columns)?;
    Ok((table, SynthTruth { spike_hours: spikes }))
}

// ---------------------------------------------------------------------------
// HTTP report fetcher

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchConfig {
    pub endpoint: String,
    #[serde(default)]
    pub query: BTreeMap<String, String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub network_enabled: bool,
}

fn default_timeout() -> u64 {
    30
}

/// Plain parameterized GET; the body is written verbatim to `out`.
pub fn fetch_http_report(config: &FetchConfig, out: &Path) -> Result<PathBuf> {
    if !config.network_enabled {
        return Err(Error::NetworkDisabled);
    }
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs(config.timeout_secs.max(1)))
        .build();
    let mut req = agent.get(&config.endpoint);
    for (k, v) in &config.query {
        req = req.query(k, v);
    }
    let resp = match req.call() {
        Ok(r) => r,
        Err(ureq::Error::Status(code, _)) => return Err(Error::HttpStatus(code)),
        Err(ureq::Error::Transport(t)) => {
            let timed_out = std::error::Error::source(&t)
                .and_then(|s| s.downcast_ref::<std::io::Error>())
                .is_some_and(|io| {
                    matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock)
                });
            return Err(if timed_out { Error::Timeout } else { Error::Transport(t.to_string()) });
        }
    };
    let mut body = Vec::new();
    resp.into_reader().read_to_end(&mut body).map_err(|e| match e.kind() {
        std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock => Error::Timeout,
        _ => Error::Io(e),
    })?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, body)?;
    Ok(out.to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_datetime(s).unwrap()
    }

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn hourly(start: &str, n: usize, cols: &[(&str, f64)]) -> TimeSeriesTable {
        let t0 = ts(start);
        let stamps = (0..n).map(|h| t0 + ChronoDuration::hours(h as i64)).collect();
        let columns = cols
            .iter()
            .map(|(name, base)| Column::new(*name, (0..n).map(|h| base + h as f64).collect(), "t"))
            .collect();
        TimeSeriesTable::new(stamps, columns).unwrap()
    }

    #[test]
    fn load_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "lmp.csv",
            "datetime,lmp\n2017-01-01T00:00,40.5\n2017-01-01T01:00,41\n2017-01-01 02:00,39.25\n",
        );
        let schema = [ColumnSchema::datetime("datetime"), ColumnSchema::numeric("lmp")];
        let t = load_csv(&p, &schema).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.columns.len(), 1);
        assert_eq!(t.values("lmp").unwrap(), &[40.5, 41.0, 39.25]);
        assert_eq!(t.columns[0].provenance, "lmp");
    }

    #[test]
    fn categorical_first_appearance_codes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "wx.csv",
            "datetime,condition\n2017-01-01T00:00,Clear\n2017-01-01T01:00,Fog\n2017-01-01T02:00,Clear\n",
        );
        let schema = [ColumnSchema::datetime("datetime"), ColumnSchema::categorical("condition")];
        let t = load_csv(&p, &schema).unwrap();
        assert_eq!(t.values("condition").unwrap(), &[0.0, 1.0, 0.0]);
        let s = t.columns[0].schema();
        assert_eq!(s.decode(0), Some("Clear"));
        assert_eq!(s.decode(1), Some("Fog"));
    }

    #[test]
    fn blank_cell_is_missing_then_filled() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "lmp.csv",
            "datetime,lmp\n2017-01-01T00:00,40\n2017-01-01T01:00,\n2017-01-01T02:00,abc\n",
        );
        let schema = [ColumnSchema::datetime("datetime"), ColumnSchema::numeric("lmp")];
        let t = load_csv(&p, &schema).unwrap();
        let v = t.values("lmp").unwrap();
        assert!(v[1].is_nan() && v[2].is_nan());
        let c = cleanse(&t, DEFAULT_FILL, ts("2017-01-01T00:00"), ts("2017-01-01T02:00")).unwrap();
        assert_eq!(c.values("lmp").unwrap(), &[40.0, DEFAULT_FILL, DEFAULT_FILL]);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let schema = [ColumnSchema::datetime("datetime"), ColumnSchema::numeric("lmp")];
        let p = write_tmp(&dir, "a.csv", "datetime,other\n2017-01-01T00:00,1\n");
        assert!(matches!(load_csv(&p, &schema), Err(Error::MissingColumn(c)) if c == "lmp"));
        let p = write_tmp(&dir, "b.csv", "datetime,lmp\n2017-01-01T00:00,1\nyesterday,2\n");
        assert!(matches!(load_csv(&p, &schema), Err(Error::BadDatetime { row: 1, .. })));
        let p = write_tmp(&dir, "c.csv", "");
        assert!(matches!(load_csv(&p, &schema), Err(Error::EmptyFile(_))));
        let p = write_tmp(&dir, "d.csv", "datetime,lmp\n");
        assert!(matches!(load_csv(&p, &schema), Err(Error::EmptyFile(_))));
        assert!(matches!(
            load_csv(&dir.path().join("nope.csv"), &schema),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn merge_single_is_identity() {
        let t = hourly("2017-01-01T00:00", 5, &[("a", 0.0)]);
        assert_eq!(merge_on_datetime(std::slice::from_ref(&t)).unwrap(), t);
    }

    #[test]
    fn merge_same_hours() {
        let a = hourly("2017-01-01T00:00", 24, &[("a", 0.0), ("b", 1.0)]);
        let b = hourly("2017-01-01T00:00", 24, &[("c", 0.0), ("d", 1.0), ("e", 2.0)]);
        let m = merge_on_datetime(&[a, b]).unwrap();
        assert_eq!(m.len(), 24);
        assert_eq!(m.column_names(), vec!["a", "b", "c", "d", "e"]);
    }

    #[test]
    fn merge_overlapping_spans() {
        let a = hourly("2017-01-01T00:00", 10, &[("a", 0.0)]);
        let b = hourly("2017-01-01T05:00", 10, &[("b", 100.0)]);
        let m = merge_on_datetime(&[a, b]).unwrap();
        assert_eq!(m.len(), 15);
        let va = m.values("a").unwrap();
        let vb = m.values("b").unwrap();
        // enumerated by hand: a covers 0..=9, b covers 5..=14
        for h in 0..15 {
            assert_eq!(va[h].is_nan(), h > 9, "a at {h}");
            assert_eq!(vb[h].is_nan(), h < 5, "b at {h}");
        }
        assert_eq!(va[9], 9.0);
        assert_eq!(vb[5], 100.0);
        assert_eq!(vb[14], 109.0);
    }

    #[test]
    fn merge_rejects_duplicate_column() {
        let a = hourly("2017-01-01T00:00", 3, &[("a", 0.0)]);
        assert!(matches!(
            merge_on_datetime(&[a.clone(), a]),
            Err(Error::DuplicateColumn(c)) if c == "a"
        ));
    }

    #[test]
    fn cleanse_drops_duplicate_keeps_first() {
        let mut t = hourly("2017-01-01T00:00", 3, &[("a", 0.0)]);
        t.timestamps.push(ts("2017-01-01T01:00"));
        t.columns[0].values.push(77.0);
        let c = cleanse(&t, DEFAULT_FILL, ts("2017-01-01T00:00"), ts("2017-01-01T02:00")).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.values("a").unwrap(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn cleanse_clean_table_unchanged() {
        let t = hourly("2017-01-01T00:00", 6, &[("a", 3.0)]);
        let c = cleanse(&t, DEFAULT_FILL, t.timestamps[0], t.timestamps[5]).unwrap();
        assert_eq!(c, t);
    }

    #[test]
    fn cleanse_two_year_span_materializes_every_hour() {
        // a sparse table over the 2017-01-01 00:00 .. 2018-12-30 23:00 window
        let t0 = ts("2017-01-01T00:00");
        let end = ts("2018-12-30T23:00");
        let stamps: Vec<_> = (0..17496).step_by(7).map(|h| t0 + ChronoDuration::hours(h)).collect();
        let vals = vec![1.0; stamps.len()];
        let t = TimeSeriesTable::new(stamps, vec![Column::new("x", vals, "t")]).unwrap();
        let c = cleanse(&t, DEFAULT_FILL, t0, end).unwrap();
        assert_eq!(c.len(), 17496);
        c.ensure_hourly().unwrap();
        // the reference data set kept 16566 usable hours of this window
        assert!(16566 < c.len());
    }

    #[test]
    fn cleanse_empty_span() {
        let t = hourly("2017-01-01T00:00", 3, &[("a", 0.0)]);
        assert!(matches!(
            cleanse(&t, DEFAULT_FILL, ts("2018-01-01T00:00"), ts("2018-01-02T00:00")),
            Err(Error::EmptySpan)
        ));
        assert!(matches!(
            cleanse(&t, DEFAULT_FILL, ts("2017-01-01T02:00"), ts("2017-01-01T00:00")),
            Err(Error::BadConfig(_))
        ));
    }

    #[test]
    fn synth_smooth_without_spikes_or_gaps() {
        let cfg = SynthConfig { hours: 500, spike_rate: 0.0, missing_rate: 0.0, ..Default::default() };
        let (t, truth) = synthesize_with_truth(&cfg).unwrap();
        assert!(truth.spike_hours.is_empty());
        assert!(t.columns.iter().all(|c| c.values.iter().all(|v| v.is_finite())));
        t.ensure_hourly().unwrap();
        assert!(t.column("rtm_lmp_12").is_some());
        assert_eq!(t.columns.len(), 1 + RTM_INTERVALS + SYNTH_COLUMNS.len());
    }

    #[test]
    fn synth_is_deterministic() {
        let cfg = SynthConfig { hours: 300, missing_rate: 0.05, ..Default::default() };
        let a = to_canonical_csv(&synthesize(&cfg).unwrap()).unwrap();
        let b = to_canonical_csv(&synthesize(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = to_canonical_csv(&synthesize(&SynthConfig { seed: 1, ..cfg }).unwrap()).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn synth_spike_count_within_binomial_bound() {
        let cfg = SynthConfig { hours: 10_000, spike_rate: 0.01, ..Default::default() };
        let (_, truth) = synthesize_with_truth(&cfg).unwrap();
        let (n, p) = (10_000.0_f64, 0.01_f64);
        let (mean, sd) = (n * p, (n * p * (1.0 - p)).sqrt());
        let k = truth.spike_hours.len() as f64;
        assert!((k - mean).abs() <= 3.0 * sd, "{k} spikes vs {mean} ± {}", 3.0 * sd);
    }

    #[test]
    fn synth_rejects_bad_config() {
        for cfg in [
            SynthConfig { hours: 10, ..Default::default() },
            SynthConfig { spike_rate: 1.5, ..Default::default() },
            SynthConfig { missing_rate: -0.1, ..Default::default() },
        ] {
            assert!(matches!(synthesize(&cfg), Err(Error::BadConfig(_))));
        }
    }

    #[test]
    fn canonical_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig { hours: 72, missing_rate: 0.1, ..Default::default() };
        let t = synthesize(&cfg).unwrap();
        let c = cleanse(&t, DEFAULT_FILL, t.timestamps[0], *t.timestamps.last().unwrap()).unwrap();
        let p = dir.path().join("table.csv");
        write_canonical(&c, &p, DEFAULT_FILL).unwrap();
        let (back, fill) = read_canonical(&p).unwrap();
        assert_eq!(fill, DEFAULT_FILL);
        assert_eq!(back.timestamps, c.timestamps);
        for (a, b) in back.columns.iter().zip(&c.columns) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn fetch_refuses_without_network_flag() {
        let cfg = FetchConfig {
            endpoint: "http://127.0.0.1:9/".into(),
            query: BTreeMap::new(),
            timeout_secs: 1,
            network_enabled: false,
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            fetch_http_report(&cfg, &dir.path().join("x.csv")),
            Err(Error::NetworkDisabled)
        ));
    }
}
