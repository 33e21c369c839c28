//! Command implementations behind the `parkgrid` binary.
//!
//! Every command writes plain CSV / JSON files into `--out`. Outputs contain no
//! timestamps or host data, so identical inputs and `--seed` give
//! byte-identical files.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use parkgrid::costing::{step_costs, write_indicator_table, CostBreakdown, CostReport, EconomicIndicators};
use parkgrid::forest::{
    fit_forest, fit_linear, permutation_importance, write_importance_csv, Dataset, FeatureImportance,
    LinearModel, TrainConfig,
};
use parkgrid::ga::{grid_axis, grid_search, optimize, Bounds, FitnessMode, GaConfig, GaResult, Individual};
use parkgrid::scenario::{load_scenario_expecting, synth_scenario, ParkScenario, PriceSchedule, Profile};
use parkgrid::storage::{simulate, DispatchTrace, StorageSpec};

#[derive(Debug, Parser)]
#[command(name = "parkgrid", version, about = "Park microgrid storage simulation, sizing and cost analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dispatch one storage configuration and report its daily economics.
    Simulate(SimulateArgs),
    /// Side-by-side indicators without storage and with the given storage.
    Compare(SimulateArgs),
    /// Size storage with the genetic algorithm.
    Optimize(OptimizeArgs),
    /// Explain hourly cost with a random forest and a linear model.
    Analyze(AnalyzeArgs),
    /// Write a synthetic scenario CSV and an example price file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario CSV with columns hour,load_kw,pv_pu,wind_pu.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Installed PV capacity used to scale pv_pu (kW).
    #[arg(long, default_value_t = 0.0)]
    pub pv_kw: f64,
    /// Installed wind capacity used to scale wind_pu (kW).
    #[arg(long, default_value_t = 0.0)]
    pub wind_kw: f64,
    /// Reject the scenario unless it has exactly this many rows.
    #[arg(long)]
    pub expect_hours: Option<usize>,
    /// Price configuration file; the built-in example tariff is used when omitted.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: ScenarioArgs,
    #[arg(long, default_value_t = 50.0)]
    pub power_kw: f64,
    #[arg(long, default_value_t = 100.0)]
    pub capacity_kwh: f64,
    /// Initial SOC as a fraction of capacity.
    #[arg(long, default_value_t = 0.5)]
    pub initial_soc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitnessArg {
    SupplyCost,
    CapitalProxy,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub input: ScenarioArgs,
    #[arg(long, default_value = "0:100")]
    pub power_bounds: Bounds,
    #[arg(long, default_value = "0:200")]
    pub capacity_bounds: Bounds,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub population: usize,
    #[arg(long, default_value_t = 60)]
    pub generations: usize,
    #[arg(long, default_value_t = 0.9)]
    pub crossover_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    pub mutation_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub elitism: usize,
    #[arg(long, default_value_t = 2)]
    pub tournament: usize,
    #[arg(long, value_enum, default_value_t = FitnessArg::SupplyCost)]
    pub fitness: FitnessArg,
    /// Also run an exhaustive search over a discretised grid of the bounds.
    #[arg(long)]
    pub grid_oracle: bool,
    #[arg(long, default_value_t = 10.0)]
    pub grid_power_step: f64,
    #[arg(long, default_value_t = 25.0)]
    pub grid_capacity_step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: ScenarioArgs,
    /// Storage power for the simulated run (0 analyses the park without storage).
    #[arg(long, default_value_t = 0.0)]
    pub power_kw: f64,
    #[arg(long, default_value_t = 0.0)]
    pub capacity_kwh: f64,
    #[arg(long, default_value_t = 0.5)]
    pub initial_soc: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub min_leaf: usize,
    /// Features sampled per split; defaults to ceil(features / 3).
    #[arg(long)]
    pub features_per_split: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 24)]
    pub hours: usize,
    #[arg(long, default_value = "mixed")]
    pub profile: Profile,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Optimize(args) => cmd_optimize(&args),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Synth(args) => cmd_synth(&args),
    }
}

/// Derives a sub-seed for one consumer of randomness from the run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What a run was asked to do; written alongside its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub scenario: PathBuf,
    pub prices: Option<PathBuf>,
    pub pv_capacity_kw: f64,
    pub wind_capacity_kw: f64,
    pub storage: Option<StorageSpec>,
    pub power_bounds: Option<Bounds>,
    pub capacity_bounds: Option<Bounds>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl RunManifest {
    fn new(command: &'static str, input: &ScenarioArgs) -> Self {
        Self {
            command,
            scenario: input.scenario.clone(),
            prices: input.prices.clone(),
            pv_capacity_kw: input.pv_kw,
            wind_capacity_kw: input.wind_kw,
            storage: None,
            power_bounds: None,
            capacity_bounds: None,
            seed: None,
            out: input.out.clone(),
        }
    }
}

struct Inputs {
    scenario: ParkScenario,
    prices: PriceSchedule,
}

fn prepare(input: &ScenarioArgs) -> Result<Inputs> {
    if !input.scenario.exists() {
        bail!("scenario file {} does not exist", input.scenario.display());
    }
    if let Some(p) = &input.prices {
        if !p.exists() {
            bail!("price file {} does not exist", p.display());
        }
    }
    let scenario = load_scenario_expecting(&input.scenario, input.pv_kw, input.wind_kw, input.expect_hours)
        .with_context(|| format!("loading scenario {}", input.scenario.display()))?;
    let prices = match &input.prices {
        Some(p) => PriceSchedule::load(p).with_context(|| format!("loading prices {}", p.display()))?,
        None => {
            eprintln!("note: no --prices given, using the example tariff (flat grid 1.0, wind 0.5, solar 0.4 CNY/kWh)");
            PriceSchedule::example()
        }
    };
    fs::create_dir_all(&input.out)
        .with_context(|| format!("creating output directory {}", input.out.display()))?;
    Ok(Inputs { scenario, prices })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn storage_spec(power_kw: f64, capacity_kwh: f64) -> Result<StorageSpec> {
    let spec = StorageSpec::sized(power_kw, capacity_kwh);
    spec.validate()?;
    Ok(spec)
}

fn write_load_balance(path: &Path, scenario: &ParkScenario, trace: &DispatchTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "t",
        "load_kw",
        "pv_kw",
        "wind_kw",
        "grid_import_kw",
        "charge_kw",
        "discharge_kw",
        "curtailment_kw",
    ])?;
    for s in &trace.steps {
        w.write_record([
            s.t.to_string(),
            scenario.load().values()[s.t].to_string(),
            scenario.pv().values()[s.t].to_string(),
            scenario.wind().values()[s.t].to_string(),
            s.grid_import_kw.to_string(),
            s.charge_kw.to_string(),
            s.discharge_kw.to_string(),
            s.curtailment_kw.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace(path: &Path, trace: &DispatchTrace) -> Result<()> {
    trace.write_csv(create(path)?)?;
    Ok(())
}

/// Writes `trace.csv`, `load_balance.csv`, `report.json` and `manifest.json`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let Inputs { scenario, prices } = prepare(&args.input)?;
    let spec = storage_spec(args.power_kw, args.capacity_kwh)?;
    let trace = simulate(&scenario, &spec, args.initial_soc)?;
    let report = CostReport::build(&trace, &scenario, &prices)?;

    let out = &args.input.out;
    write_trace(&out.join("trace.csv"), &trace)?;
    write_load_balance(&out.join("load_balance.csv"), &scenario, &trace)?;
    write_json(&out.join("report.json"), &report)?;
    let mut manifest = RunManifest::new("simulate", &args.input);
    manifest.storage = Some(spec);
    write_json(&out.join("manifest.json"), &manifest)?;

    let ind = &report.indicators;
    println!(
        "{}: {} kW / {} kWh -> {:.2} CNY/day, {:.2} kWh/day purchased, {:.2} kW/day curtailed",
        scenario.park_id(),
        spec.power_kw,
        spec.capacity_kwh,
        ind.total_cost_cny_per_day,
        ind.purchased_kwh_per_day,
        ind.curtailment_kw_per_day
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareReport {
    without_storage: CostReport,
    with_storage: CostReport,
}

fn column_label(spec: &StorageSpec) -> String {
    format!("{}kW/{}kWh", spec.power_kw, spec.capacity_kwh)
}

/// Writes `compare.csv` (indicator rows, no-storage and configured columns)
/// and `compare.json`.
pub fn cmd_compare(args: &SimulateArgs) -> Result<()> {
    let Inputs { scenario, prices } = prepare(&args.input)?;
    let spec = storage_spec(args.power_kw, args.capacity_kwh)?;
    let baseline_trace = simulate(&scenario, &StorageSpec::none(), args.initial_soc)?;
    let trace = simulate(&scenario, &spec, args.initial_soc)?;
    let without = CostReport::build(&baseline_trace, &scenario, &prices)?;
    let with = CostReport::build(&trace, &scenario, &prices)?;

    let out = &args.input.out;
    let label = column_label(&spec);
    write_indicator_table(
        create(&out.join("compare.csv"))?,
        &[("no storage", &without.indicators), (label.as_str(), &with.indicators)],
    )?;
    write_json(
        &out.join("compare.json"),
        &CompareReport {
            without_storage: without.clone(),
            with_storage: with.clone(),
        },
    )?;
    let mut manifest = RunManifest::new("compare", &args.input);
    manifest.storage = Some(spec);
    write_json(&out.join("manifest.json"), &manifest)?;

    println!(
        "{}: cost {:.2} -> {:.2} CNY/day, curtailment {:.2} -> {:.2} kW/day",
        scenario.park_id(),
        without.indicators.total_cost_cny_per_day,
        with.indicators.total_cost_cny_per_day,
        without.indicators.curtailment_kw_per_day,
        with.indicators.curtailment_kw_per_day
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct GridOracleReport {
    pub best: Individual,
    pub best_cost_cny_per_day: f64,
    pub evaluations: usize,
    pub power_step: f64,
    pub capacity_step: f64,
    /// (GA cost - grid cost) / grid cost, in percent.
    pub ga_gap_percent: f64,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct OptimizeReport {
    pub park_id: String,
    pub best: Individual,
    /// GA objective value of `best`; for the supply-cost mode this is CNY/day.
    pub best_cost_cny_per_day: f64,
    pub fitness_mode: FitnessMode,
    pub indicators: EconomicIndicators,
    pub breakdown: CostBreakdown,
    pub generations: usize,
    pub evaluations: usize,
    pub grid_oracle: Option<GridOracleReport>,
}

/// Writes `optimize.json`, `convergence.csv`, `optimized_trace.csv` and `manifest.json`.
pub fn cmd_optimize(args: &OptimizeArgs) -> Result<()> {
    let Inputs { scenario, prices } = prepare(&args.input)?;
    let config = GaConfig {
        population_size: args.population,
        generations: args.generations,
        crossover_rate: args.crossover_rate,
        mutation_rate: args.mutation_rate,
        power_bounds: args.power_bounds,
        capacity_bounds: args.capacity_bounds,
        elitism_count: args.elitism,
        tournament_size: args.tournament,
        seed: derive_seed(args.seed, 1),
        fitness_mode: match args.fitness {
            FitnessArg::SupplyCost => FitnessMode::SupplyCost,
            FitnessArg::CapitalProxy => FitnessMode::CapitalProxy,
        },
    };
    let result: GaResult = optimize(&scenario, &prices, &config)?;

    let trace = simulate(
        &scenario,
        &result.best.spec(),
        parkgrid::storage::DEFAULT_INITIAL_SOC_FRAC,
    )?;
    let report = CostReport::build(&trace, &scenario, &prices)?;

    let grid_oracle = if args.grid_oracle {
        let powers = grid_axis(args.power_bounds, args.grid_power_step)?;
        let caps = grid_axis(args.capacity_bounds, args.grid_capacity_step)?;
        let grid = grid_search(&scenario, &prices, &powers, &caps, config.fitness_mode)?;
        let gap = if grid.best_fitness != 0.0 {
            (result.best_fitness - grid.best_fitness) / grid.best_fitness.abs() * 100.0
        } else {
            0.0
        };
        Some(GridOracleReport {
            best: grid.best,
            best_cost_cny_per_day: grid.best_fitness,
            evaluations: grid.evaluations,
            power_step: args.grid_power_step,
            capacity_step: args.grid_capacity_step,
            ga_gap_percent: gap,
        })
    } else {
        None
    };

    let out = &args.input.out;
    let summary = OptimizeReport {
        park_id: scenario.park_id().to_string(),
        best: result.best,
        best_cost_cny_per_day: result.best_fitness,
        fitness_mode: config.fitness_mode,
        indicators: report.indicators,
        breakdown: report.breakdown,
        generations: result.history.len(),
        evaluations: result.evaluations,
        grid_oracle: grid_oracle.clone(),
    };
    write_json(&out.join("optimize.json"), &summary)?;
    result.write_history_csv(create(&out.join("convergence.csv"))?)?;
    write_trace(&out.join("optimized_trace.csv"), &trace)?;
    let mut manifest = RunManifest::new("optimize", &args.input);
    manifest.power_bounds = Some(args.power_bounds);
    manifest.capacity_bounds = Some(args.capacity_bounds);
    manifest.seed = Some(args.seed);
    write_json(&out.join("manifest.json"), &manifest)?;

    println!(
        "{}: best {:.2} kW / {:.2} kWh at {:.2} CNY/day",
        scenario.park_id(),
        result.best.storage_power_kw,
        result.best.storage_capacity_kwh,
        result.best_fitness
    );
    if let Some(g) = &grid_oracle {
        println!(
            "grid oracle: {} kW / {} kWh at {:.2} CNY/day (GA gap {:+.3} %)",
            g.best.storage_power_kw, g.best.storage_capacity_kwh, g.best_cost_cny_per_day, g.ga_gap_percent
        );
    }
    Ok(())
}

pub const ANALYZE_FEATURES: [&str; 3] = ["pv_output_pu", "purchased_kw", "curtailment_kw"];

/// Per-step dataset: PV output (p.u.), grid purchase (kW) and curtailment (kW)
/// against the step's total supply cost including the storage slice.
pub fn hourly_dataset(
    scenario: &ParkScenario,
    trace: &DispatchTrace,
    prices: &PriceSchedule,
) -> Result<Dataset> {
    let costs = step_costs(trace, scenario, prices)?;
    let features: Vec<Vec<f64>> = trace
        .steps
        .iter()
        .map(|s| vec![scenario.pv_pu()[s.t], s.grid_import_kw, s.curtailment_kw])
        .collect();
    let target: Vec<f64> = costs.iter().map(|c| c.total).collect();
    Ok(Dataset::new(
        features,
        target,
        ANALYZE_FEATURES.iter().map(|s| s.to_string()).collect(),
    )?)
}

#[derive(Debug, Serialize)]
struct LinearReport {
    feature_names: Vec<String>,
    intercept: Option<f64>,
    coefficients: Option<Vec<f64>>,
    residual_std: Option<f64>,
    note: Option<String>,
}

impl From<LinearModel> for LinearReport {
    fn from(m: LinearModel) -> Self {
        Self {
            feature_names: m.feature_names,
            intercept: Some(m.intercept),
            coefficients: Some(m.coefficients),
            residual_std: Some(m.residual_std),
            note: None,
        }
    }
}

/// Writes `dataset.csv`, `importance.csv`, `linear.json` and `manifest.json`.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let Inputs { scenario, prices } = prepare(&args.input)?;
    let spec = storage_spec(args.power_kw, args.capacity_kwh)?;
    let trace = simulate(&scenario, &spec, args.initial_soc)?;
    let data = hourly_dataset(&scenario, &trace, &prices)?;

    let config = TrainConfig {
        n_trees: args.trees,
        max_depth: args.max_depth,
        min_samples_leaf: args.min_leaf,
        features_per_split: args.features_per_split,
        bootstrap: true,
        seed: derive_seed(args.seed, 2),
    };
    let importance: Vec<FeatureImportance> = if data.is_target_constant() {
        eprintln!("warning: hourly cost is constant; every importance is zero");
        data.feature_names()
            .iter()
            .map(|f| FeatureImportance {
                feature: f.clone(),
                importance: 0.0,
            })
            .collect()
    } else {
        let forest = fit_forest(&data, &config)?;
        permutation_importance(&forest, &data, args.repeats, derive_seed(args.seed, 3))?
    };

    let linear = match fit_linear(&data) {
        Ok(m) => LinearReport::from(m),
        Err(e) => {
            eprintln!("warning: linear model not fitted: {e}");
            LinearReport {
                feature_names: data.feature_names().to_vec(),
                intercept: None,
                coefficients: None,
                residual_std: None,
                note: Some(e.to_string()),
            }
        }
    };

    let out = &args.input.out;
    data.write_csv(create(&out.join("dataset.csv"))?)?;
    write_importance_csv(create(&out.join("importance.csv"))?, &importance)?;
    write_json(&out.join("linear.json"), &linear)?;
    let mut manifest = RunManifest::new("analyze", &args.input);
    manifest.storage = Some(spec);
    manifest.seed = Some(args.seed);
    write_json(&out.join("manifest.json"), &manifest)?;

    println!("{}: permutation importance (MSE increase)", scenario.park_id());
    for fi in &importance {
        println!("  {:<16} {:.6}", fi.feature, fi.importance);
    }
    Ok(())
}

/// Writes `scenario.csv` and an example `prices.toml`.
pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let scenario = synth_scenario(args.seed, args.hours, args.profile)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    scenario.save(args.out.join("scenario.csv"))?;
    fs::write(args.out.join("prices.toml"), PriceSchedule::example().to_config_string())?;
    println!(
        "--pv-kw {} --wind-kw {}",
        scenario.pv_capacity_kw(),
        scenario.wind_capacity_kw()
    );
    Ok(())
}
