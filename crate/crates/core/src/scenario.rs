//! Park time series: data model, CSV ingestion, price configuration and
//! synthetic scenario generation.
//!
//! Renewable columns are stored on disk in per-unit of installed capacity and
//! scaled to kW when a scenario is built. The per-unit series is kept next to
//! the kW series so that a loaded scenario can be written back out and
//! re-read without any rounding drift.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when checking generation against installed capacity.
pub const CAPACITY_TOLERANCE: f64 = 1e-6;

/// Header every scenario CSV must carry, in this order.
pub const SCENARIO_HEADER: [&str; 4] = ["hour", "load_kw", "pv_pu", "wind_pu"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    step_hours: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, step_hours: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("time series must hold at least one value"));
        }
        if !(step_hours.is_finite() && step_hours > 0.0) {
            return Err(Error::validation(format!(
                "step_hours must be positive, got {step_hours}"
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::validation(format!(
                "time series value at step {i} must be finite and non-negative, got {v}"
            )));
        }
        Ok(Self { values, step_hours })
    }

    /// Hourly series.
    pub fn hourly(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Energy in kWh assuming the values are average kW over each step.
    pub fn energy_kwh(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step_hours
    }
}

/// Load, PV and wind series of one park plus its installed renewable capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParkScenario {
    park_id: String,
    load: TimeSeries,
    pv: TimeSeries,
    wind: TimeSeries,
    pv_pu: Vec<f64>,
    wind_pu: Vec<f64>,
    pv_capacity_kw: f64,
    wind_capacity_kw: f64,
}

impl ParkScenario {
    /// Builds a scenario from kW series. Per-unit values are derived by
    /// dividing by capacity (zero when the capacity is zero).
    pub fn new(
        park_id: impl Into<String>,
        load: TimeSeries,
        pv: TimeSeries,
        wind: TimeSeries,
        pv_capacity_kw: f64,
        wind_capacity_kw: f64,
    ) -> Result<Self> {
        let pv_pu = to_per_unit(pv.values(), pv_capacity_kw);
        let wind_pu = to_per_unit(wind.values(), wind_capacity_kw);
        let scenario = Self {
            park_id: park_id.into(),
            load,
            pv,
            wind,
            pv_pu,
            wind_pu,
            pv_capacity_kw,
            wind_capacity_kw,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Builds a scenario from per-unit renewable series scaled by capacity.
    pub fn from_per_unit(
        park_id: impl Into<String>,
        load: TimeSeries,
        pv_pu: Vec<f64>,
        wind_pu: Vec<f64>,
        pv_capacity_kw: f64,
        wind_capacity_kw: f64,
    ) -> Result<Self> {
        check_capacity("pv_capacity_kw", pv_capacity_kw)?;
        check_capacity("wind_capacity_kw", wind_capacity_kw)?;
        for (name, series) in [("pv_pu", &pv_pu), ("wind_pu", &wind_pu)] {
            if let Some((i, v)) = series
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v >= 0.0 && **v <= 1.0 + CAPACITY_TOLERANCE))
            {
                return Err(Error::validation(format!(
                    "{name} at step {i} must lie in [0, 1], got {v}"
                )));
            }
        }
        let step = load.step_hours();
        let pv = TimeSeries::new(pv_pu.iter().map(|p| p * pv_capacity_kw).collect(), step)?;
        let wind = TimeSeries::new(wind_pu.iter().map(|p| p * wind_capacity_kw).collect(), step)?;
        let scenario = Self {
            park_id: park_id.into(),
            load,
            pv,
            wind,
            pv_pu,
            wind_pu,
            pv_capacity_kw,
            wind_capacity_kw,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<()> {
        check_capacity("pv_capacity_kw", self.pv_capacity_kw)?;
        check_capacity("wind_capacity_kw", self.wind_capacity_kw)?;
        let n = self.load.len();
        let step = self.load.step_hours();
        for (name, series) in [("pv", &self.pv), ("wind", &self.wind)] {
            if series.len() != n {
                return Err(Error::validation(format!(
                    "{name} series has {} steps but load has {n}",
                    series.len()
                )));
            }
            if series.step_hours() != step {
                return Err(Error::validation(format!(
                    "{name} step of {} h differs from load step of {step} h",
                    series.step_hours()
                )));
            }
        }
        for (name, series, cap) in [
            ("pv", &self.pv, self.pv_capacity_kw),
            ("wind", &self.wind, self.wind_capacity_kw),
        ] {
            let limit = cap * (1.0 + CAPACITY_TOLERANCE);
            if let Some((i, v)) = series.values().iter().enumerate().find(|(_, v)| **v > limit) {
                return Err(Error::validation(format!(
                    "{name} output {v} kW at step {i} exceeds installed capacity {cap} kW"
                )));
            }
        }
        Ok(())
    }

    pub fn park_id(&self) -> &str {
        &self.park_id
    }

    pub fn load(&self) -> &TimeSeries {
        &self.load
    }

    pub fn pv(&self) -> &TimeSeries {
        &self.pv
    }

    pub fn wind(&self) -> &TimeSeries {
        &self.wind
    }

    pub fn pv_pu(&self) -> &[f64] {
        &self.pv_pu
    }

    pub fn wind_pu(&self) -> &[f64] {
        &self.wind_pu
    }

    pub fn pv_capacity_kw(&self) -> f64 {
        self.pv_capacity_kw
    }

    pub fn wind_capacity_kw(&self) -> f64 {
        self.wind_capacity_kw
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn step_hours(&self) -> f64 {
        self.load.step_hours()
    }

    pub fn horizon_hours(&self) -> f64 {
        self.len() as f64 * self.step_hours()
    }

    /// Horizon expressed in days; daily indicators divide by this.
    pub fn days(&self) -> f64 {
        self.horizon_hours() / 24.0
    }

    pub fn max_load_kw(&self) -> f64 {
        self.load.max()
    }

    /// Writes the scenario in the on-disk CSV schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SCENARIO_HEADER)?;
        for t in 0..self.len() {
            w.write_record([
                t.to_string(),
                self.load.values()[t].to_string(),
                self.pv_pu[t].to_string(),
                self.wind_pu[t].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(file)
    }
}

fn check_capacity(name: &str, cap: f64) -> Result<()> {
    if !(cap.is_finite() && cap >= 0.0) {
        return Err(Error::validation(format!(
            "{name} must be finite and non-negative, got {cap}"
        )));
    }
    Ok(())
}

fn to_per_unit(values: &[f64], cap: f64) -> Vec<f64> {
    if cap > 0.0 {
        values.iter().map(|v| v / cap).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Loads a scenario CSV. The park id is the file stem.
pub fn load_scenario(
    path: impl AsRef<Path>,
    pv_capacity_kw: f64,
    wind_capacity_kw: f64,
) -> Result<ParkScenario> {
    load_scenario_expecting(path, pv_capacity_kw, wind_capacity_kw, None)
}

/// Like [`load_scenario`], additionally requiring exactly `expected_rows` data rows.
pub fn load_scenario_expecting(
    path: impl AsRef<Path>,
    pv_capacity_kw: f64,
    wind_capacity_kw: f64,
    expected_rows: Option<usize>,
) -> Result<ParkScenario> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let park_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "park".to_string());
    read_scenario(
        file,
        path,
        park_id,
        pv_capacity_kw,
        wind_capacity_kw,
        expected_rows,
    )
}

/// Parses scenario CSV from any reader; `source` only labels error messages.
pub fn read_scenario<R: Read>(
    reader: R,
    source: &Path,
    park_id: impl Into<String>,
    pv_capacity_kw: f64,
    wind_capacity_kw: f64,
    expected_rows: Option<usize>,
) -> Result<ParkScenario> {
    let parse_err = |row: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        row,
        message,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != SCENARIO_HEADER {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                SCENARIO_HEADER.join(","),
                found.join(",")
            ),
        ));
    }

    let mut load = Vec::new();
    let mut pv_pu = Vec::new();
    let mut wind_pu = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // Data rows start on line 2 of the file.
        let line = i + 2;
        let record = record?;
        if record.len() != SCENARIO_HEADER.len() {
            return Err(parse_err(
                line,
                format!(
                    "expected {} fields, found {}",
                    SCENARIO_HEADER.len(),
                    record.len()
                ),
            ));
        }
        let hour: usize = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("hour `{}` is not a non-negative integer", &record[0])))?;
        if hour != i {
            return Err(parse_err(
                line,
                format!("hour index {hour} out of sequence, expected {i}"),
            ));
        }
        let field = |col: usize| -> Result<f64> {
            let name = SCENARIO_HEADER[col];
            let v: f64 = record[col]
                .parse()
                .map_err(|_| parse_err(line, format!("{name} `{}` is not a number", &record[col])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{name} must be finite, got {v}")));
            }
            if v < 0.0 {
                return Err(parse_err(line, format!("{name} must be non-negative, got {v}")));
            }
            if col >= 2 && v > 1.0 + CAPACITY_TOLERANCE {
                return Err(parse_err(
                    line,
                    format!("{name} {v} exceeds 1 p.u. of installed capacity"),
                ));
            }
            Ok(v)
        };
        load.push(field(1)?);
        pv_pu.push(field(2)?);
        wind_pu.push(field(3)?);
    }

    if load.is_empty() {
        return Err(parse_err(2, "file contains no data rows".to_string()));
    }
    if let Some(expected) = expected_rows {
        if load.len() != expected {
            return Err(parse_err(
                load.len() + 1,
                format!(
                    "row count mismatch: found {} data rows, expected {expected}",
                    load.len()
                ),
            ));
        }
    }

    ParkScenario::from_per_unit(
        park_id,
        TimeSeries::hourly(load)?,
        pv_pu,
        wind_pu,
        pv_capacity_kw,
        wind_capacity_kw,
    )
}

/// Shape of a synthetic park.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// PV only; generation confined to 07:00-19:00.
    SolarHeavy,
    /// Wind only, stronger at night.
    WindHeavy,
    /// Both sources.
    Mixed,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::SolarHeavy => "solar-heavy",
            Profile::WindHeavy => "wind-heavy",
            Profile::Mixed => "mixed",
        }
    }

    /// (peak load kW, PV capacity kW, wind capacity kW)
    fn sizing(self) -> (f64, f64, f64) {
        match self {
            Profile::SolarHeavy => (350.0, 600.0, 0.0),
            Profile::WindHeavy => (300.0, 0.0, 500.0),
            Profile::Mixed => (320.0, 350.0, 300.0),
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solar-heavy" => Ok(Profile::SolarHeavy),
            "wind-heavy" => Ok(Profile::WindHeavy),
            "mixed" => Ok(Profile::Mixed),
            other => Err(Error::invalid(format!(
                "unknown profile `{other}` (expected solar-heavy, wind-heavy or mixed)"
            ))),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn gaussian_bump(x: f64, centre: f64, width: f64) -> f64 {
    (-((x - centre) / width).powi(2)).exp()
}

/// Clear-sky PV shape in p.u.; exactly zero outside 07:00-19:00.
fn solar_shape(hour_of_day: usize) -> f64 {
    if (7..=19).contains(&hour_of_day) {
        (std::f64::consts::PI * (hour_of_day as f64 - 7.0) / 12.0).sin().max(0.0)
    } else {
        0.0
    }
}

/// Wind shape in p.u., peaking around 02:00 and bottoming out mid-afternoon.
fn wind_shape(hour_of_day: usize) -> f64 {
    0.4 + 0.3 * (2.0 * std::f64::consts::PI * (hour_of_day as f64 - 2.0) / 24.0).cos()
}

fn load_shape(hour_of_day: usize) -> f64 {
    let h = hour_of_day as f64;
    0.45 + 0.35 * gaussian_bump(h, 11.0, 3.5) + 0.3 * gaussian_bump(h, 19.0, 2.5)
}

/// Generates a deterministic hourly scenario for desk-scale experiments.
pub fn synth_scenario(seed: u64, hours: usize, profile: Profile) -> Result<ParkScenario> {
    if hours == 0 {
        return Err(Error::invalid("hours must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).expect("valid normal");
    let (peak_load, pv_cap, wind_cap) = profile.sizing();

    let mut load = Vec::with_capacity(hours);
    let mut pv_pu = Vec::with_capacity(hours);
    let mut wind_pu = Vec::with_capacity(hours);
    let mut clearness = 1.0;
    let mut windiness = 1.0;
    for t in 0..hours {
        let hod = t % 24;
        if hod == 0 {
            clearness = rng.random_range(0.7..1.0);
            windiness = rng.random_range(0.75..1.15);
        }
        let l = peak_load * load_shape(hod) * (1.0 + noise.sample(&mut rng));
        load.push(l.max(0.0));

        let sun = solar_shape(hod);
        let p = if sun > 0.0 {
            (sun * clearness * (1.0 + noise.sample(&mut rng))).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let w = (wind_shape(hod) * windiness + noise.sample(&mut rng)).clamp(0.0, 1.0);
        match profile {
            Profile::SolarHeavy => {
                pv_pu.push(p);
                wind_pu.push(0.0);
            }
            Profile::WindHeavy => {
                pv_pu.push(0.0);
                wind_pu.push(w);
            }
            Profile::Mixed => {
                pv_pu.push(p);
                wind_pu.push(w);
            }
        }
    }

    ParkScenario::from_per_unit(
        format!("synthetic-{}-{seed}", profile.as_str()),
        TimeSeries::hourly(load)?,
        pv_pu,
        wind_pu,
        pv_cap,
        wind_cap,
    )
}

/// Grid tariff by hour of day plus unit costs of renewable energy used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSchedule {
    grid_price: [f64; 24],
    wind_unit_cost: f64,
    solar_unit_cost: f64,
}

impl PriceSchedule {
    pub fn new(grid_price: [f64; 24], wind_unit_cost: f64, solar_unit_cost: f64) -> Result<Self> {
        for (h, p) in grid_price.iter().enumerate() {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::validation(format!(
                    "grid price for hour {h:02} must be finite and non-negative, got {p}"
                )));
            }
        }
        for (name, v) in [
            ("wind_unit_cost", wind_unit_cost),
            ("solar_unit_cost", solar_unit_cost),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            grid_price,
            wind_unit_cost,
            solar_unit_cost,
        })
    }

    pub fn flat(grid_price: f64, wind_unit_cost: f64, solar_unit_cost: f64) -> Result<Self> {
        Self::new([grid_price; 24], wind_unit_cost, solar_unit_cost)
    }

    /// Example configuration: flat grid tariff 1.0 CNY/kWh, wind 0.5, solar 0.4.
    /// These are illustrative values, not measured tariffs.
    pub fn example() -> Self {
        Self::flat(1.0, 0.5, 0.4).expect("example prices are valid")
    }

    pub fn grid_prices(&self) -> &[f64; 24] {
        &self.grid_price
    }

    pub fn grid_price_at_hour(&self, hour_of_day: usize) -> f64 {
        self.grid_price[hour_of_day % 24]
    }

    /// Grid price for step `t` of a series with the given step length.
    pub fn grid_price_at_step(&self, t: usize, step_hours: f64) -> f64 {
        let hour = (t as f64 * step_hours).floor() as usize;
        self.grid_price_at_hour(hour)
    }

    pub fn wind_unit_cost(&self) -> f64 {
        self.wind_unit_cost
    }

    pub fn solar_unit_cost(&self) -> f64 {
        self.solar_unit_cost
    }

    /// Returns a copy with one hour's grid price replaced.
    pub fn with_grid_price(&self, hour_of_day: usize, price: f64) -> Result<Self> {
        let mut grid = self.grid_price;
        grid[hour_of_day % 24] = price;
        Self::new(grid, self.wind_unit_cost, self.solar_unit_cost)
    }

    /// Parses the `key = value` configuration format.
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let config_err = |message: String| Error::Config {
            path: source.to_path_buf(),
            message,
        };
        let table: BTreeMap<String, toml::Value> =
            toml::from_str(text).map_err(|e| config_err(e.to_string()))?;

        let mut grid = [f64::NAN; 24];
        let mut wind = None;
        let mut solar = None;
        for (key, value) in &table {
            let v = match value {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                other => {
                    return Err(config_err(format!(
                        "key `{key}` must be numeric, found {}",
                        other.type_str()
                    )))
                }
            };
            if let Some(h) = key.strip_prefix("grid_price_hour_") {
                let hour = (h.len() == 2)
                    .then(|| h.parse::<usize>().ok())
                    .flatten()
                    .filter(|h| *h < 24)
                    .ok_or_else(|| config_err(format!("unknown key `{key}`")))?;
                grid[hour] = v;
            } else if key == "wind_unit_cost" {
                wind = Some(v);
            } else if key == "solar_unit_cost" {
                solar = Some(v);
            } else {
                return Err(config_err(format!("unknown key `{key}`")));
            }
        }
        if let Some(h) = grid.iter().position(|p| p.is_nan()) {
            return Err(config_err(format!("missing key `grid_price_hour_{h:02}`")));
        }
        let wind = wind.ok_or_else(|| config_err("missing key `wind_unit_cost`".into()))?;
        let solar = solar.ok_or_else(|| config_err("missing key `solar_unit_cost`".into()))?;
        Self::new(grid, wind, solar).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: PathBuf::from(path),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Renders the schedule in the configuration format accepted by [`PriceSchedule::parse`].
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (h, p) in self.grid_price.iter().enumerate() {
            out.push_str(&format!("grid_price_hour_{h:02} = {p:?}\n"));
        }
        out.push_str(&format!("wind_unit_cost = {:?}\n", self.wind_unit_cost));
        out.push_str(&format!("solar_unit_cost = {:?}\n", self.solar_unit_cost));
        out
    }
}
