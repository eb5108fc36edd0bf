//! Scenarios shipped with the engine. Each is also available as a JSON file
//! under `crates/core/scenarios/`.

use crate::power::Scenario;

const TWO_CUSTOMER: &str = include_str!("../scenarios/two_customer.json");
const THREE_CUSTOMER: &str = include_str!("../scenarios/three_customer.json");
const SEVEN_CUSTOMER: &str = include_str!("../scenarios/seven_customer.json");
const FIG7_BASE: &str = include_str!("../scenarios/fig7_base.json");
const ALL_BELOW: &str = include_str!("../scenarios/all_below.json");

/// `(file name, contents)` of every bundled scenario.
pub const BUNDLED: &[(&str, &str)] = &[
    ("two_customer.json", TWO_CUSTOMER),
    ("three_customer.json", THREE_CUSTOMER),
    ("seven_customer.json", SEVEN_CUSTOMER),
    ("fig7_base.json", FIG7_BASE),
    ("all_below.json", ALL_BELOW),
];

fn parse(text: &str) -> Scenario {
    serde_json::from_str(text).expect("bundled scenario is valid JSON")
}

/// Bundled scenario by file name, with or without the `.json` suffix.
pub fn bundled(name: &str) -> Option<Scenario> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED
        .iter()
        .find(|(file, _)| file.strip_suffix(".json") == Some(stem))
        .map(|(_, text)| parse(text))
}

/// Two customers, actions {0.8, 0.9}, standard PF 0.85.
pub fn two_customer() -> Scenario {
    parse(TWO_CUSTOMER)
}

/// Three customers over six actions from 0.8 to 0.9.
pub fn three_customer() -> Scenario {
    parse(THREE_CUSTOMER)
}

/// Seven identical-power customers over {0.86, 0.87, 0.88} with penalty `tau`.
pub fn seven_customer(tau: f64) -> Scenario {
    parse(SEVEN_CUSTOMER).map_customers(|c| c.tau = tau)
}

/// Single base customer cloned by customer-count sweeps.
pub fn fig7_base() -> Scenario {
    parse(FIG7_BASE)
}

/// Two customers whose every action stays below the standard PF.
pub fn all_below() -> Scenario {
    parse(ALL_BELOW)
}
