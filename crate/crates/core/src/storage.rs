//! Battery model and greedy dispatch.
//!
//! Each step the net load (load minus PV minus wind) is served first from the
//! battery, limited by its power rating and by the energy above the SOC floor;
//! any remaining deficit is imported from the grid. Surplus charges the battery
//! up to the rating and the SOC ceiling, and whatever is left is curtailed.
//!
//! Losses are applied on the battery side of the terminals: delivering `d` kW
//! for `dt` hours drains `d * dt / eta` kWh, absorbing `c` kW deposits
//! `c * dt * eta` kWh. The bus therefore balances exactly and all losses show
//! up as lost state of charge.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ParkScenario;

/// Slack allowed on SOC bound checks.
pub const SOC_TOLERANCE: f64 = 1e-9;

/// Initial SOC used when none is given: midpoint of the default 10-90 % band.
pub const DEFAULT_INITIAL_SOC_FRAC: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec {
    pub power_kw: f64,
    pub capacity_kwh: f64,
    pub soc_min_frac: f64,
    pub soc_max_frac: f64,
    pub efficiency: f64,
    pub lifetime_years: f64,
    /// CNY per kW of power rating.
    pub power_unit_cost: f64,
    /// CNY per kWh of energy capacity.
    pub energy_unit_cost: f64,
}

impl Default for StorageSpec {
    /// 50 kW / 100 kWh lithium iron phosphate system: SOC band 10-90 %,
    /// 95 % efficiency per leg, 10-year life, 800 CNY/kW and 1800 CNY/kWh.
    fn default() -> Self {
        Self {
            power_kw: 50.0,
            capacity_kwh: 100.0,
            soc_min_frac: 0.10,
            soc_max_frac: 0.90,
            efficiency: 0.95,
            lifetime_years: 10.0,
            power_unit_cost: 800.0,
            energy_unit_cost: 1800.0,
        }
    }
}

impl StorageSpec {
    /// Default battery parameters with the given rating.
    pub fn sized(power_kw: f64, capacity_kwh: f64) -> Self {
        Self {
            power_kw,
            capacity_kwh,
            ..Self::default()
        }
    }

    /// Storage that never acts.
    pub fn none() -> Self {
        Self::sized(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "{name} must be finite and non-negative, got {v}"
                )))
            }
        };
        finite_nonneg("power_kw", self.power_kw)?;
        finite_nonneg("capacity_kwh", self.capacity_kwh)?;
        finite_nonneg("power_unit_cost", self.power_unit_cost)?;
        finite_nonneg("energy_unit_cost", self.energy_unit_cost)?;
        if !(0.0..1.0).contains(&self.soc_min_frac) {
            return Err(Error::validation(format!(
                "soc_min_frac must lie in [0, 1), got {}",
                self.soc_min_frac
            )));
        }
        if !(self.soc_max_frac > 0.0 && self.soc_max_frac <= 1.0) {
            return Err(Error::validation(format!(
                "soc_max_frac must lie in (0, 1], got {}",
                self.soc_max_frac
            )));
        }
        if self.soc_min_frac >= self.soc_max_frac {
            return Err(Error::validation(format!(
                "soc_min_frac {} must be below soc_max_frac {}",
                self.soc_min_frac, self.soc_max_frac
            )));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::validation(format!(
                "efficiency must lie in (0, 1], got {}",
                self.efficiency
            )));
        }
        if !(self.lifetime_years.is_finite() && self.lifetime_years > 0.0) {
            return Err(Error::validation(format!(
                "lifetime_years must be positive, got {}",
                self.lifetime_years
            )));
        }
        Ok(())
    }

    pub fn soc_min_kwh(&self) -> f64 {
        self.soc_min_frac * self.capacity_kwh
    }

    pub fn soc_max_kwh(&self) -> f64 {
        self.soc_max_frac * self.capacity_kwh
    }

    pub fn is_inert(&self) -> bool {
        self.power_kw == 0.0 || self.capacity_kwh == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchStep {
    pub t: usize,
    /// Net load before the battery acts; positive is a deficit.
    pub net_load_kw: f64,
    pub charge_kw: f64,
    pub discharge_kw: f64,
    pub soc_kwh_after: f64,
    pub grid_import_kw: f64,
    pub curtailment_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchTrace {
    pub steps: Vec<DispatchStep>,
    pub initial_soc_kwh: f64,
    pub spec: StorageSpec,
    pub step_hours: f64,
}

pub const TRACE_HEADER: [&str; 7] = [
    "t",
    "net_load_kw",
    "charge_kw",
    "discharge_kw",
    "soc_kwh",
    "grid_import_kw",
    "curtailment_kw",
];

impl DispatchTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_grid_import_kwh(&self) -> f64 {
        self.steps.iter().map(|s| s.grid_import_kw).sum::<f64>() * self.step_hours
    }

    /// Sum of per-step curtailment in kW (equal to kWh at hourly resolution).
    pub fn total_curtailment_kw(&self) -> f64 {
        self.steps.iter().map(|s| s.curtailment_kw).sum()
    }

    pub fn soc_series(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.soc_kwh_after)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRACE_HEADER)?;
        for s in &self.steps {
            w.write_record([
                s.t.to_string(),
                s.net_load_kw.to_string(),
                s.charge_kw.to_string(),
                s.discharge_kw.to_string(),
                s.soc_kwh_after.to_string(),
                s.grid_import_kw.to_string(),
                s.curtailment_kw.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

pub fn net_load(load_kw: f64, pv_kw: f64, wind_kw: f64) -> f64 {
    load_kw - pv_kw - wind_kw
}

/// One dispatch decision for step `t`.
pub fn step_dispatch(
    t: usize,
    net_load_kw: f64,
    soc_kwh: f64,
    spec: &StorageSpec,
    step_hours: f64,
) -> Result<DispatchStep> {
    if !net_load_kw.is_finite() || !soc_kwh.is_finite() {
        return Err(Error::invalid(format!(
            "step {t}: net load {net_load_kw} kW and SOC {soc_kwh} kWh must be finite"
        )));
    }
    if !(step_hours.is_finite() && step_hours > 0.0) {
        return Err(Error::invalid(format!(
            "step_hours must be positive, got {step_hours}"
        )));
    }
    let soc_min = spec.soc_min_kwh();
    let soc_max = spec.soc_max_kwh();
    if soc_kwh < soc_min - SOC_TOLERANCE || soc_kwh > soc_max + SOC_TOLERANCE {
        return Err(Error::invalid(format!(
            "step {t}: SOC {soc_kwh} kWh outside [{soc_min}, {soc_max}]"
        )));
    }
    let eta = spec.efficiency;

    let mut step = DispatchStep {
        t,
        net_load_kw,
        charge_kw: 0.0,
        discharge_kw: 0.0,
        soc_kwh_after: soc_kwh,
        grid_import_kw: 0.0,
        curtailment_kw: 0.0,
    };

    if net_load_kw > 0.0 {
        let deliverable = ((soc_kwh - soc_min).max(0.0)) * eta / step_hours;
        let discharge = net_load_kw.min(spec.power_kw).min(deliverable);
        step.discharge_kw = discharge;
        step.soc_kwh_after = (soc_kwh - discharge * step_hours / eta).max(soc_min);
        step.grid_import_kw = net_load_kw - discharge;
    } else if net_load_kw < 0.0 {
        let surplus = -net_load_kw;
        let absorbable = ((soc_max - soc_kwh).max(0.0)) / (eta * step_hours);
        let charge = surplus.min(spec.power_kw).min(absorbable);
        step.charge_kw = charge;
        step.soc_kwh_after = (soc_kwh + charge * step_hours * eta).min(soc_max);
        step.curtailment_kw = surplus - charge;
    }
    Ok(step)
}

/// Runs the greedy dispatch over the whole scenario horizon.
pub fn simulate(
    scenario: &ParkScenario,
    spec: &StorageSpec,
    initial_soc_frac: f64,
) -> Result<DispatchTrace> {
    spec.validate()?;
    if !(initial_soc_frac >= spec.soc_min_frac && initial_soc_frac <= spec.soc_max_frac) {
        return Err(Error::validation(format!(
            "initial SOC fraction {initial_soc_frac} outside [{}, {}]",
            spec.soc_min_frac, spec.soc_max_frac
        )));
    }
    let step_hours = scenario.step_hours();
    let initial_soc_kwh = initial_soc_frac * spec.capacity_kwh;

    let load = scenario.load().values();
    let pv = scenario.pv().values();
    let wind = scenario.wind().values();

    let mut soc = initial_soc_kwh;
    let mut steps = Vec::with_capacity(scenario.len());
    for t in 0..scenario.len() {
        let step = step_dispatch(t, net_load(load[t], pv[t], wind[t]), soc, spec, step_hours)?;
        soc = step.soc_kwh_after;
        steps.push(step);
    }
    Ok(DispatchTrace {
        steps,
        initial_soc_kwh,
        spec: *spec,
        step_hours,
    })
}
