#![allow(dead_code)]

use parkgrid::scenario::{ParkScenario, TimeSeries};
use parkgrid::storage::StorageSpec;
use proptest::prelude::*;

/// Random 24-step scenario with both surplus and deficit hours likely.
pub fn scenario_24() -> impl Strategy<Value = ParkScenario> {
    (
        prop::collection::vec(0.0f64..400.0, 24),
        prop::collection::vec(0.0f64..=1.0, 24),
        prop::collection::vec(0.0f64..=1.0, 24),
        0.0f64..400.0,
        0.0f64..300.0,
    )
        .prop_map(|(load, pv_pu, wind_pu, pv_cap, wind_cap)| {
            ParkScenario::from_per_unit(
                "prop",
                TimeSeries::hourly(load).unwrap(),
                pv_pu,
                wind_pu,
                pv_cap,
                wind_cap,
            )
            .unwrap()
        })
}

/// Random valid storage spec with the default SOC band and an initial SOC inside it.
pub fn spec_and_soc() -> impl Strategy<Value = (StorageSpec, f64)> {
    (0.0f64..150.0, 0.0f64..300.0, 0.5f64..=1.0, 0.1f64..=0.9).prop_map(
        |(power, capacity, eta, soc)| {
            let spec = StorageSpec {
                efficiency: eta,
                ..StorageSpec::sized(power, capacity)
            };
            (spec, soc)
        },
    )
}
