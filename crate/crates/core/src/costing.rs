//! Storage capital cost, total supply cost and daily economic indicators.
//!
//! Total supply cost is the sum of grid purchases at the hourly tariff, the
//! renewable energy actually used (curtailed energy is not paid for) at its unit
//! cost, and the storage capital cost amortized evenly over the battery life.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ParkScenario, PriceSchedule};
use crate::storage::{DispatchTrace, StorageSpec};

pub const HOURS_PER_YEAR: f64 = 365.0 * 24.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub grid_cost: f64,
    pub wind_cost: f64,
    pub solar_cost: f64,
    pub storage_cost: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(grid_cost: f64, wind_cost: f64, solar_cost: f64, storage_cost: f64) -> Self {
        Self {
            grid_cost,
            wind_cost,
            solar_cost,
            storage_cost,
            total: grid_cost + wind_cost + solar_cost + storage_cost,
        }
    }

    fn accumulate(&mut self, other: &CostBreakdown) {
        self.grid_cost += other.grid_cost;
        self.wind_cost += other.wind_cost;
        self.solar_cost += other.solar_cost;
        self.storage_cost += other.storage_cost;
    }

    fn finish(mut self) -> Self {
        self.total = self.grid_cost + self.wind_cost + self.solar_cost + self.storage_cost;
        self
    }

    /// Scales every component, e.g. to convert a horizon total to a daily figure.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.grid_cost * factor,
            self.wind_cost * factor,
            self.solar_cost * factor,
            self.storage_cost * factor,
        )
    }
}

/// Daily indicators in the row order of the with/without-storage comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicIndicators {
    pub purchased_kwh_per_day: f64,
    /// Sum of hourly average-kW curtailment per day (kWh/day at 1 h steps).
    pub curtailment_kw_per_day: f64,
    pub total_cost_cny_per_day: f64,
    pub avg_unit_cost_cny_per_kwh: f64,
    /// Load energy served per day; denominator of the average unit cost.
    pub load_kwh_per_day: f64,
}

/// Row labels of the comparison table, in order.
pub const INDICATOR_LABELS: [&str; 4] = [
    "Electricity Purchased (kWh/day)",
    "Wind and Solar Energy Waste (kW/day)",
    "Total Power Supply Cost (CNY/day)",
    "Average Unit Cost of Electricity Supply (CNY/kWh)",
];

/// Footer explaining the curtailment unit in comparison tables.
pub const CURTAILMENT_UNIT_NOTE: &str =
    "curtailment kW/day is the sum of hourly average kW over a day (numerically kWh/day at 1 h steps)";

impl EconomicIndicators {
    pub fn values(&self) -> [f64; 4] {
        [
            self.purchased_kwh_per_day,
            self.curtailment_kw_per_day,
            self.total_cost_cny_per_day,
            self.avg_unit_cost_cny_per_kwh,
        ]
    }
}

/// Capital cost of the power rating in CNY.
pub fn power_cost(spec: &StorageSpec) -> f64 {
    spec.power_kw * spec.power_unit_cost
}

/// Capital cost of the energy capacity in CNY.
pub fn energy_cost(spec: &StorageSpec) -> f64 {
    spec.capacity_kwh * spec.energy_unit_cost
}

/// Capital cost spread uniformly over `lifetime_years * 365 * 24` hours.
pub fn amortized_storage_cost_per_hour(spec: &StorageSpec) -> f64 {
    (power_cost(spec) + energy_cost(spec)) / (spec.lifetime_years * HOURS_PER_YEAR)
}

fn check_horizon(trace: &DispatchTrace, scenario: &ParkScenario) -> Result<()> {
    if trace.len() != scenario.len() {
        return Err(Error::validation(format!(
            "trace has {} steps but scenario has {}",
            trace.len(),
            scenario.len()
        )));
    }
    if trace.step_hours != scenario.step_hours() {
        return Err(Error::validation(format!(
            "trace step of {} h differs from scenario step of {} h",
            trace.step_hours,
            scenario.step_hours()
        )));
    }
    Ok(())
}

/// Splits used renewable energy between PV and wind in proportion to output.
fn renewable_used(pv_kw: f64, wind_kw: f64, curtailment_kw: f64) -> (f64, f64) {
    let generation = pv_kw + wind_kw;
    if generation <= 0.0 {
        return (0.0, 0.0);
    }
    let used = (generation - curtailment_kw).max(0.0);
    (pv_kw * used / generation, wind_kw * used / generation)
}

/// Cost of every step of the trace, storage slice included.
pub fn step_costs(
    trace: &DispatchTrace,
    scenario: &ParkScenario,
    prices: &PriceSchedule,
) -> Result<Vec<CostBreakdown>> {
    check_horizon(trace, scenario)?;
    let dt = scenario.step_hours();
    let storage_per_step = amortized_storage_cost_per_hour(&trace.spec) * dt;
    let pv = scenario.pv().values();
    let wind = scenario.wind().values();
    Ok(trace
        .steps
        .iter()
        .map(|s| {
            let (pv_used, wind_used) = renewable_used(pv[s.t], wind[s.t], s.curtailment_kw);
            CostBreakdown::new(
                s.grid_import_kw * dt * prices.grid_price_at_step(s.t, dt),
                wind_used * dt * prices.wind_unit_cost(),
                pv_used * dt * prices.solar_unit_cost(),
                storage_per_step,
            )
        })
        .collect())
}

/// Total supply cost over the trace horizon.
pub fn supply_cost(
    trace: &DispatchTrace,
    scenario: &ParkScenario,
    prices: &PriceSchedule,
) -> Result<CostBreakdown> {
    let mut total = CostBreakdown::default();
    for step in step_costs(trace, scenario, prices)? {
        total.accumulate(&step);
    }
    Ok(total.finish())
}

/// Supply cost without any storage, computed straight from the scenario:
/// every deficit is bought, every surplus is curtailed.
pub fn no_storage_cost(scenario: &ParkScenario, prices: &PriceSchedule) -> CostBreakdown {
    let dt = scenario.step_hours();
    let (mut grid, mut wind_cost, mut solar_cost) = (0.0, 0.0, 0.0);
    let load = scenario.load().values();
    let pv = scenario.pv().values();
    let wind = scenario.wind().values();
    for t in 0..scenario.len() {
        let generation = pv[t] + wind[t];
        grid += (load[t] - generation).max(0.0) * dt * prices.grid_price_at_step(t, dt);
        if generation > 0.0 {
            let used = load[t].min(generation);
            solar_cost += used * (pv[t] / generation) * dt * prices.solar_unit_cost();
            wind_cost += used * (wind[t] / generation) * dt * prices.wind_unit_cost();
        }
    }
    CostBreakdown::new(grid, wind_cost, solar_cost, 0.0)
}

/// Daily indicators for a dispatched scenario.
pub fn indicators(
    trace: &DispatchTrace,
    scenario: &ParkScenario,
    prices: &PriceSchedule,
) -> Result<EconomicIndicators> {
    let cost = supply_cost(trace, scenario, prices)?;
    indicators_from_cost(trace, scenario, &cost)
}

/// Same as [`indicators`] when the supply cost is already known.
pub fn indicators_from_cost(
    trace: &DispatchTrace,
    scenario: &ParkScenario,
    cost: &CostBreakdown,
) -> Result<EconomicIndicators> {
    check_horizon(trace, scenario)?;
    let days = scenario.days();
    let load_kwh_per_day = scenario.load().energy_kwh() / days;
    if load_kwh_per_day <= 0.0 {
        return Err(Error::validation(
            "scenario has zero total load: average unit cost is undefined",
        ));
    }
    let total_cost_cny_per_day = cost.total / days;
    Ok(EconomicIndicators {
        purchased_kwh_per_day: trace.total_grid_import_kwh() / days,
        curtailment_kw_per_day: trace.total_curtailment_kw() / days,
        total_cost_cny_per_day,
        avg_unit_cost_cny_per_kwh: total_cost_cny_per_day / load_kwh_per_day,
        load_kwh_per_day,
    })
}

/// Indicators plus the cost components behind them, as exported to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub park_id: String,
    pub storage: StorageSpec,
    pub horizon_hours: f64,
    pub indicators: EconomicIndicators,
    /// Cost over the whole horizon.
    pub breakdown: CostBreakdown,
}

impl CostReport {
    pub fn build(
        trace: &DispatchTrace,
        scenario: &ParkScenario,
        prices: &PriceSchedule,
    ) -> Result<Self> {
        let breakdown = supply_cost(trace, scenario, prices)?;
        let indicators = indicators_from_cost(trace, scenario, &breakdown)?;
        Ok(Self {
            park_id: scenario.park_id().to_string(),
            storage: trace.spec,
            horizon_hours: scenario.horizon_hours(),
            indicators,
            breakdown,
        })
    }

    /// Recomputes the fields derived from the breakdown and load energy.
    pub fn recompute_derived(&self) -> (f64, f64, f64) {
        let b = &self.breakdown;
        let total = b.grid_cost + b.wind_cost + b.solar_cost + b.storage_cost;
        let per_day = total / (self.horizon_hours / 24.0);
        (total, per_day, per_day / self.indicators.load_kwh_per_day)
    }
}

/// Writes a comparison table: one row per indicator, one column per configuration.
pub fn write_indicator_table<W: Write>(
    writer: W,
    columns: &[(&str, &EconomicIndicators)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["indicator"];
    header.extend(columns.iter().map(|(label, _)| *label));
    w.write_record(&header)?;
    for (row, label) in INDICATOR_LABELS.iter().enumerate() {
        let mut record = vec![label.to_string()];
        record.extend(columns.iter().map(|(_, ind)| ind.values()[row].to_string()));
        w.write_record(&record)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    writeln!(inner, "# {CURTAILMENT_UNIT_NOTE}").map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::TimeSeries;
    use crate::storage::simulate;
    use approx::assert_abs_diff_eq;

    #[test]
    fn capital_costs() {
        assert_eq!(power_cost(&StorageSpec::sized(50.0, 0.0)), 40_000.0);
        assert_eq!(power_cost(&StorageSpec::sized(0.0, 0.0)), 0.0);
        assert_eq!(power_cost(&StorageSpec::sized(60.0, 0.0)), 48_000.0);
        assert_eq!(energy_cost(&StorageSpec::sized(0.0, 100.0)), 180_000.0);
        assert_eq!(energy_cost(&StorageSpec::sized(0.0, 0.0)), 0.0);
        assert_eq!(energy_cost(&StorageSpec::sized(0.0, 140.0)), 252_000.0);
    }

    #[test]
    fn amortization() {
        let a = amortized_storage_cost_per_hour(&StorageSpec::sized(50.0, 100.0));
        assert_abs_diff_eq!(a, 220_000.0 / 87_600.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a, 2.5114, epsilon = 1e-4);
        assert_eq!(amortized_storage_cost_per_hour(&StorageSpec::none()), 0.0);
        let b = amortized_storage_cost_per_hour(&StorageSpec::sized(40.0, 140.0));
        assert_abs_diff_eq!(b, 284_000.0 / 87_600.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 3.2420, epsilon = 1e-4);
    }

    fn scenario(load: Vec<f64>, pv: Vec<f64>, wind: Vec<f64>) -> ParkScenario {
        ParkScenario::new(
            "t",
            TimeSeries::hourly(load).unwrap(),
            TimeSeries::hourly(pv).unwrap(),
            TimeSeries::hourly(wind).unwrap(),
            1000.0,
            1000.0,
        )
        .unwrap()
    }

    #[test]
    fn grid_only_day() {
        let sc = scenario(vec![100.0; 24], vec![0.0; 24], vec![0.0; 24]);
        let prices = PriceSchedule::flat(1.0, 0.5, 0.4).unwrap();
        let trace = simulate(&sc, &StorageSpec::none(), 0.5).unwrap();
        let cost = supply_cost(&trace, &sc, &prices).unwrap();
        assert_abs_diff_eq!(cost.grid_cost, 2400.0, epsilon = 1e-9);
        assert_eq!(cost.total, cost.grid_cost);
    }

    #[test]
    fn single_step_pv_and_grid() {
        let sc = scenario(vec![100.0], vec![40.0], vec![0.0]);
        let prices = PriceSchedule::flat(1.0, 0.5, 0.4).unwrap();
        let trace = simulate(&sc, &StorageSpec::none(), 0.5).unwrap();
        let cost = supply_cost(&trace, &sc, &prices).unwrap();
        assert_abs_diff_eq!(cost.grid_cost, 60.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cost.solar_cost, 16.0, epsilon = 1e-12);
        assert_eq!(cost.wind_cost, 0.0);
        assert_abs_diff_eq!(cost.total, 76.0, epsilon = 1e-12);
    }

    #[test]
    fn curtailed_energy_split_pro_rata() {
        // 150 kW generation (100 pv / 50 wind) against 60 kW load, no storage:
        // 60 kW used, 40 from pv and 20 from wind.
        let sc = scenario(vec![60.0], vec![100.0], vec![50.0]);
        let prices = PriceSchedule::flat(1.0, 0.5, 0.4).unwrap();
        let trace = simulate(&sc, &StorageSpec::none(), 0.5).unwrap();
        let cost = supply_cost(&trace, &sc, &prices).unwrap();
        assert_abs_diff_eq!(cost.solar_cost, 40.0 * 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(cost.wind_cost, 20.0 * 0.5, epsilon = 1e-12);
        assert_eq!(cost.grid_cost, 0.0);
    }

    #[test]
    fn storage_slice_over_horizon() {
        let sc = scenario(vec![10.0; 48], vec![0.0; 48], vec![0.0; 48]);
        let prices = PriceSchedule::flat(0.0, 0.0, 0.0).unwrap();
        let spec = StorageSpec::sized(50.0, 100.0);
        let trace = simulate(&sc, &spec, 0.5).unwrap();
        let cost = supply_cost(&trace, &sc, &prices).unwrap();
        assert_abs_diff_eq!(
            cost.storage_cost,
            48.0 * 220_000.0 / 87_600.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let sc = scenario(vec![10.0; 3], vec![0.0; 3], vec![0.0; 3]);
        let short = scenario(vec![10.0; 2], vec![0.0; 2], vec![0.0; 2]);
        let trace = simulate(&short, &StorageSpec::none(), 0.5).unwrap();
        let prices = PriceSchedule::example();
        assert!(supply_cost(&trace, &sc, &prices).is_err());
        assert!(indicators(&trace, &sc, &prices).is_err());
    }

    #[test]
    fn indicator_purchases_per_day() {
        let sc = scenario(vec![10.0; 24], vec![0.0; 24], vec![0.0; 24]);
        let trace = simulate(&sc, &StorageSpec::none(), 0.5).unwrap();
        let ind = indicators(&trace, &sc, &PriceSchedule::example()).unwrap();
        assert_abs_diff_eq!(ind.purchased_kwh_per_day, 240.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ind.avg_unit_cost_cny_per_kwh, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn multi_day_normalisation() {
        let sc = scenario(vec![10.0; 72], vec![0.0; 72], vec![0.0; 72]);
        let trace = simulate(&sc, &StorageSpec::none(), 0.5).unwrap();
        let ind = indicators(&trace, &sc, &PriceSchedule::example()).unwrap();
        assert_abs_diff_eq!(ind.purchased_kwh_per_day, 240.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ind.total_cost_cny_per_day, 240.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_load_is_an_error() {
        let sc = scenario(vec![0.0; 24], vec![0.0; 24], vec![0.0; 24]);
        let trace = simulate(&sc, &StorageSpec::none(), 0.5).unwrap();
        assert!(indicators(&trace, &sc, &PriceSchedule::example()).is_err());
    }

    #[test]
    fn table_layout() {
        // Park A reference record, used here only to pin the output layout.
        let park_a = EconomicIndicators {
            purchased_kwh_per_day: 4874.13,
            curtailment_kw_per_day: 951.20,
            total_cost_cny_per_day: 5609.27,
            avg_unit_cost_cny_per_kwh: 0.81,
            load_kwh_per_day: 5609.27 / 0.81,
        };
        let mut buf = Vec::new();
        write_indicator_table(&mut buf, &[("Park A", &park_a)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "indicator,Park A");
        assert_eq!(lines[1], "Electricity Purchased (kWh/day),4874.13");
        assert_eq!(lines[2], "Wind and Solar Energy Waste (kW/day),951.2");
        assert_eq!(lines[3], "Total Power Supply Cost (CNY/day),5609.27");
        assert_eq!(lines[4], "Average Unit Cost of Electricity Supply (CNY/kWh),0.81");
        assert!(lines[5].starts_with("# curtailment"));
    }
}
