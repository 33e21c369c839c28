//! Genetic search over storage power and capacity.
//!
//! An individual is a (power kW, capacity kWh) pair. Its fitness is the daily
//! total supply cost after dispatching the scenario with that battery, so lower
//! is better. Offspring come from arithmetic blend crossover
//! `c1 = a*p1 + (1-a)*p2`, `c2 = (1-a)*p1 + a*p2` with a fresh `a ~ U[0,1]` per
//! pair, and mutation redraws exactly one gene uniformly within its bounds.
//! Source material calls the blend a single-point crossover; the formula is
//! what is implemented.
//!
//! The loop itself ([`optimize_with`]) is objective-agnostic. All random draws
//! happen on one ChaCha stream before a generation is evaluated, and evaluation
//! results are collected in population order, so results do not depend on how
//! many threads rayon uses.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costing::supply_cost;
use crate::error::{Error, Result};
use crate::scenario::{ParkScenario, PriceSchedule};
use crate::storage::{simulate, StorageSpec, DEFAULT_INITIAL_SOC_FRAC};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub storage_power_kw: f64,
    pub storage_capacity_kwh: f64,
}

impl Individual {
    pub fn new(storage_power_kw: f64, storage_capacity_kwh: f64) -> Self {
        Self {
            storage_power_kw,
            storage_capacity_kwh,
        }
    }

    /// Battery with this rating and default parameters otherwise.
    pub fn spec(&self) -> StorageSpec {
        StorageSpec::sized(self.storage_power_kw, self.storage_capacity_kwh)
    }
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn point(v: f64) -> Self {
        Self { min: v, max: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min < 0.0 || self.min > self.max {
            return Err(Error::validation(format!(
                "{name} bounds must satisfy 0 <= min <= max, got {}:{}",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for Bounds {
    type Err = Error;

    /// Parses `min:max`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("bounds `{s}` must be written as min:max")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bounds `{s}`: `{v}` is not a number")))
        };
        Ok(Bounds::new(parse(a)?, parse(b)?))
    }
}

/// What the GA minimises.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessMode {
    /// Daily total supply cost from the dispatch and cost pipeline.
    #[default]
    SupplyCost,
    /// `power * 100 + capacity * 100`, ignoring operation altogether. Kept for
    /// comparison only: it is always minimised by the smallest allowed battery.
    CapitalProxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub power_bounds: Bounds,
    pub capacity_bounds: Bounds,
    pub elitism_count: usize,
    pub tournament_size: usize,
    pub seed: u64,
    pub fitness_mode: FitnessMode,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            generations: 60,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            power_bounds: Bounds::new(0.0, 100.0),
            capacity_bounds: Bounds::new(0.0, 200.0),
            elitism_count: 1,
            tournament_size: 2,
            seed: 0,
            fitness_mode: FitnessMode::SupplyCost,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::validation("population_size must be at least 2"));
        }
        if self.generations < 1 {
            return Err(Error::validation("generations must be at least 1"));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::validation(format!("{name} must lie in [0, 1], got {rate}")));
            }
        }
        if self.elitism_count >= self.population_size {
            return Err(Error::validation(format!(
                "elitism_count {} must be below population_size {}",
                self.elitism_count, self.population_size
            )));
        }
        if self.tournament_size < 2 {
            return Err(Error::validation("tournament_size must be at least 2"));
        }
        self.power_bounds.validate("power")?;
        self.capacity_bounds.validate("capacity")?;
        Ok(())
    }

    pub fn contains(&self, ind: &Individual) -> bool {
        self.power_bounds.contains(ind.storage_power_kw)
            && self.capacity_bounds.contains(ind.storage_capacity_kwh)
    }

    fn clamp(&self, ind: Individual) -> Individual {
        Individual::new(
            self.power_bounds.clamp(ind.storage_power_kw),
            self.capacity_bounds.clamp(ind.storage_capacity_kwh),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: Individual,
    /// Daily cost of `best` (CNY/day) under the configured fitness mode.
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
}

impl GaResult {
    /// `generation,best_cost,mean_cost` convergence CSV.
    pub fn write_history_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["generation", "best_cost", "mean_cost"])?;
        for g in &self.history {
            w.write_record([
                g.generation.to_string(),
                g.best_cost.to_string(),
                g.mean_cost.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Daily total supply cost of a battery sized by `individual`.
pub fn fitness(individual: &Individual, scenario: &ParkScenario, prices: &PriceSchedule) -> Result<f64> {
    let trace = simulate(scenario, &individual.spec(), DEFAULT_INITIAL_SOC_FRAC)?;
    let cost = supply_cost(&trace, scenario, prices)?;
    Ok(cost.total / scenario.days())
}

pub fn capital_proxy_fitness(individual: &Individual) -> f64 {
    individual.storage_power_kw * 100.0 + individual.storage_capacity_kwh * 100.0
}

fn evaluate(
    mode: FitnessMode,
    individual: &Individual,
    scenario: &ParkScenario,
    prices: &PriceSchedule,
) -> Result<f64> {
    match mode {
        FitnessMode::SupplyCost => fitness(individual, scenario, prices),
        FitnessMode::CapitalProxy => Ok(capital_proxy_fitness(individual)),
    }
}

/// Blend crossover with weight `alpha` on the first parent for the first child.
pub fn crossover(p1: &Individual, p2: &Individual, alpha: f64) -> Result<(Individual, Individual)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("crossover alpha must lie in [0, 1], got {alpha}")));
    }
    let blend = |a: f64, b: f64| (alpha * a + (1.0 - alpha) * b, (1.0 - alpha) * a + alpha * b);
    let (c1p, c2p) = blend(p1.storage_power_kw, p2.storage_power_kw);
    let (c1c, c2c) = blend(p1.storage_capacity_kwh, p2.storage_capacity_kwh);
    Ok((Individual::new(c1p, c1c), Individual::new(c2p, c2c)))
}

/// Replaces either the power or the capacity gene, with equal probability,
/// by a uniform draw from its bounds.
pub fn mutate<R: Rng>(individual: &Individual, rng: &mut R, config: &GaConfig) -> Individual {
    let mut out = *individual;
    if rng.random_bool(0.5) {
        out.storage_power_kw = config.power_bounds.sample(rng);
    } else {
        out.storage_capacity_kwh = config.capacity_bounds.sample(rng);
    }
    out
}

/// Tournament selection; ties go to the lower population index.
fn tournament<R: Rng>(fitness: &[f64], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

fn evaluate_all<F>(objective: &F, population: &[Individual]) -> Result<Vec<f64>>
where
    F: Fn(&Individual) -> Result<f64> + Sync,
{
    population.par_iter().map(objective).collect()
}

fn stats(generation: usize, fitness: &[f64]) -> GenerationStats {
    GenerationStats {
        generation,
        best_cost: fitness.iter().copied().fold(f64::INFINITY, f64::min),
        mean_cost: fitness.iter().sum::<f64>() / fitness.len() as f64,
    }
}

/// Runs the GA against an arbitrary objective. `seeds` are placed at the
/// front of the initial population; the rest is drawn uniformly within bounds.
pub fn optimize_with<F>(objective: F, config: &GaConfig, seeds: &[Individual]) -> Result<GaResult>
where
    F: Fn(&Individual) -> Result<f64> + Sync,
{
    config.validate()?;
    if let Some(s) = seeds.iter().find(|s| !config.contains(s)) {
        return Err(Error::validation(format!("seed individual {s:?} lies outside the bounds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.population_size;

    let mut population: Vec<Individual> = seeds.iter().take(n).copied().collect();
    while population.len() < n {
        population.push(Individual::new(
            config.power_bounds.sample(&mut rng),
            config.capacity_bounds.sample(&mut rng),
        ));
    }
    let mut scores = evaluate_all(&objective, &population)?;
    let mut evaluations = n;
    let mut history = vec![stats(0, &scores)];

    let argmin = |scores: &[f64]| {
        (0..scores.len())
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)))
            .expect("non-empty population")
    };
    let i = argmin(&scores);
    let (mut best, mut best_fitness) = (population[i], scores[i]);

    for generation in 1..config.generations {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

        let mut next: Vec<Individual> = order[..config.elitism_count]
            .iter()
            .map(|&i| population[i])
            .collect();
        let elite_scores: Vec<f64> = order[..config.elitism_count]
            .iter()
            .map(|&i| scores[i])
            .collect();

        while next.len() < n {
            let p1 = population[tournament(&scores, config.tournament_size, &mut rng)];
            let p2 = population[tournament(&scores, config.tournament_size, &mut rng)];
            let (c1, c2) = if rng.random_bool(config.crossover_rate) {
                let alpha: f64 = rng.random_range(0.0..=1.0);
                crossover(&p1, &p2, alpha)?
            } else {
                (p1, p2)
            };
            for child in [c1, c2] {
                if next.len() == n {
                    break;
                }
                let child = if rng.random_bool(config.mutation_rate) {
                    mutate(&child, &mut rng, config)
                } else {
                    child
                };
                // Convex blends can land an ulp outside the box.
                next.push(config.clamp(child));
            }
        }

        let offspring_scores = evaluate_all(&objective, &next[config.elitism_count..])?;
        evaluations += offspring_scores.len();
        population = next;
        scores = elite_scores;
        scores.extend(offspring_scores);

        history.push(stats(generation, &scores));
        let i = argmin(&scores);
        if scores[i] < best_fitness {
            best = population[i];
            best_fitness = scores[i];
        }
    }

    Ok(GaResult {
        best,
        best_fitness,
        history,
        evaluations,
    })
}

/// Sizes storage for `scenario` by minimising the configured fitness.
pub fn optimize(scenario: &ParkScenario, prices: &PriceSchedule, config: &GaConfig) -> Result<GaResult> {
    optimize_seeded(scenario, prices, config, &[])
}

/// [`optimize`] with caller-supplied members of the initial population.
pub fn optimize_seeded(
    scenario: &ParkScenario,
    prices: &PriceSchedule,
    config: &GaConfig,
    seeds: &[Individual],
) -> Result<GaResult> {
    let mode = config.fitness_mode;
    optimize_with(|ind| evaluate(mode, ind, scenario, prices), config, seeds)
}

/// Evenly spaced axis `min, min + step, ...` up to and including `max`.
pub fn grid_axis(bounds: Bounds, step: f64) -> Result<Vec<f64>> {
    bounds.validate("grid")?;
    if bounds.min == bounds.max {
        return Ok(vec![bounds.min]);
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("grid step must be positive, got {step}")));
    }
    let count = ((bounds.max - bounds.min) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| bounds.min + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: Individual,
    pub best_fitness: f64,
    pub evaluations: usize,
}

/// Exhaustive search over the Cartesian product of two axes. Ties go to the
/// first point in power-major order.
pub fn grid_search(
    scenario: &ParkScenario,
    prices: &PriceSchedule,
    powers: &[f64],
    capacities: &[f64],
    mode: FitnessMode,
) -> Result<GridSearchResult> {
    if powers.is_empty() || capacities.is_empty() {
        return Err(Error::invalid("grid axes must be non-empty"));
    }
    let points: Vec<Individual> = powers
        .iter()
        .flat_map(|&p| capacities.iter().map(move |&c| Individual::new(p, c)))
        .collect();
    let scores = evaluate_all(&|ind: &Individual| evaluate(mode, ind, scenario, prices), &points)?;
    let mut best = 0;
    for i in 1..points.len() {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    Ok(GridSearchResult {
        best: points[best],
        best_fitness: scores[best],
        evaluations: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{synth_scenario, Profile};

    #[test]
    fn crossover_examples() {
        let a = Individual::new(40.0, 140.0);
        let b = Individual::new(60.0, 100.0);
        let (c1, c2) = crossover(&a, &b, 0.5).unwrap();
        assert_eq!(c1, Individual::new(50.0, 120.0));
        assert_eq!(c2, Individual::new(50.0, 120.0));
        assert_eq!(crossover(&a, &b, 1.0).unwrap(), (a, b));
        assert_eq!(crossover(&a, &b, 0.0).unwrap(), (b, a));
        assert!(crossover(&a, &b, 1.5).is_err());
        assert!(crossover(&a, &b, -0.1).is_err());
    }

    #[test]
    fn mutation_changes_one_gene() {
        let cfg = GaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = Individual::new(33.0, 77.0);
        for _ in 0..1000 {
            let m = mutate(&start, &mut rng, &cfg);
            let changed = (m.storage_power_kw != start.storage_power_kw) as u8
                + (m.storage_capacity_kwh != start.storage_capacity_kwh) as u8;
            assert!(changed <= 1);
            assert!(cfg.contains(&m));
        }
    }

    #[test]
    fn mutation_in_point_bounds_is_identity() {
        let cfg = GaConfig {
            power_bounds: Bounds::point(20.0),
            capacity_bounds: Bounds::point(80.0),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ind = Individual::new(20.0, 80.0);
        for _ in 0..50 {
            assert_eq!(mutate(&ind, &mut rng, &cfg), ind);
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            GaConfig { population_size: 1, ..Default::default() },
            GaConfig { generations: 0, ..Default::default() },
            GaConfig { crossover_rate: 1.5, ..Default::default() },
            GaConfig { mutation_rate: -0.1, ..Default::default() },
            GaConfig { elitism_count: 40, ..Default::default() },
            GaConfig { tournament_size: 1, ..Default::default() },
            GaConfig { power_bounds: Bounds::new(10.0, 5.0), ..Default::default() },
            GaConfig { capacity_bounds: Bounds::new(-1.0, 5.0), ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn bounds_parse() {
        assert_eq!("0:100".parse::<Bounds>().unwrap(), Bounds::new(0.0, 100.0));
        assert_eq!(" 5 : 7.5".parse::<Bounds>().unwrap(), Bounds::new(5.0, 7.5));
        assert!("100".parse::<Bounds>().is_err());
        assert!("a:b".parse::<Bounds>().is_err());
    }

    #[test]
    fn grid_axis_spacing() {
        assert_eq!(grid_axis(Bounds::new(0.0, 100.0), 10.0).unwrap().len(), 11);
        assert_eq!(grid_axis(Bounds::new(0.0, 200.0), 25.0).unwrap().len(), 9);
        assert_eq!(grid_axis(Bounds::point(3.0), 0.0).unwrap(), vec![3.0]);
        assert_eq!(grid_axis(Bounds::new(0.0, 1.0), 0.3).unwrap().len(), 4);
    }

    #[test]
    fn zero_individual_is_the_no_storage_cost() {
        let sc = synth_scenario(1, 24, Profile::Mixed).unwrap();
        let prices = PriceSchedule::example();
        let f = fitness(&Individual::new(0.0, 0.0), &sc, &prices).unwrap();
        let direct = crate::costing::no_storage_cost(&sc, &prices).total / sc.days();
        assert!((f - direct).abs() < 1e-9);
    }

    #[test]
    fn capital_proxy_prefers_smallest_battery() {
        let sc = synth_scenario(1, 24, Profile::Mixed).unwrap();
        let cfg = GaConfig {
            fitness_mode: FitnessMode::CapitalProxy,
            power_bounds: Bounds::new(10.0, 100.0),
            capacity_bounds: Bounds::new(20.0, 200.0),
            generations: 40,
            seed: 3,
            ..Default::default()
        };
        let r = optimize(&sc, &PriceSchedule::example(), &cfg).unwrap();
        assert!(r.best.storage_power_kw < 15.0 && r.best.storage_capacity_kwh < 30.0, "{r:?}");
        assert_eq!(capital_proxy_fitness(&Individual::new(1.0, 2.0)), 300.0);
    }

    #[test]
    fn seeds_outside_bounds_rejected() {
        let cfg = GaConfig::default();
        let r = optimize_with(|_| Ok(0.0), &cfg, &[Individual::new(500.0, 0.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn history_csv_layout() {
        let cfg = GaConfig { generations: 3, population_size: 4, ..Default::default() };
        let r = optimize_with(|i| Ok(i.storage_power_kw), &cfg, &[]).unwrap();
        let mut buf = Vec::new();
        r.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("generation,best_cost,mean_cost\n0,"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(r.evaluations, 4 + 2 * 3);
    }
}
