//! Scenario files on disk.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::power::Scenario;
use crate::scenarios;

/// Parses without validating.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    serde_json::from_str(text).map_err(|source| Error::Parse {
        origin: origin.to_string(),
        source,
    })
}

/// Reads, parses and validates a scenario file. Omitted FP settings take
/// their defaults.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let s = parse_scenario(&text, &path.display().to_string())?;
    s.ensure_valid()?;
    Ok(s)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(s).expect("scenario serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A file path if one exists, otherwise the name of a bundled scenario.
pub fn resolve_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return load_scenario(path);
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or(arg);
    match scenarios::bundled(name) {
        Some(s) => {
            s.ensure_valid()?;
            Ok(s)
        }
        None => Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or bundled scenario"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::{FpSettings, UpdateOrder};
    use crate::power::{CustomerSpec, ModeSet, PowerFactor, ReferenceMode};
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{"customers": [
        {"id": "a", "p": 1.0, "phi_init": 0.7, "phi_std": 0.85, "tau": 0.5, "actions": [0.8, 0.9]}
    ]}"#;

    #[test]
    fn omitted_blocks_take_defaults() {
        let s = parse_scenario(MINIMAL, "inline").unwrap();
        assert_eq!(s.fp, FpSettings::default());
        assert_eq!(s.fp.stop_tol, 1e-4);
        assert_eq!(s.fp.update_order, UpdateOrder::Simultaneous);
        assert_eq!(s.mode, ModeSet::Both);
        let c = &s.customers[0];
        assert_eq!((c.alpha, c.beta, c.k), (1.0, 1.0, 1.0));
        assert_eq!(c.reference, ReferenceMode::StandardProfile);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_scenario("{\n  \"customers\": [\n    {\"id\": 3}\n  ]\n}", "bad.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn out_of_range_power_factor_is_a_parse_error() {
        let text = MINIMAL.replace("0.85", "1.5");
        assert!(matches!(parse_scenario(&text, "x"), Err(Error::Parse { .. })));
    }

    #[test]
    fn unsorted_actions_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        fs::write(&path, MINIMAL.replace("[0.8, 0.9]", "[0.9, 0.8]")).unwrap();
        match load_scenario(&path) {
            Err(Error::Validation(r)) => assert!(r.mentions("strictly increasing")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_scenario("/nonexistent/s.json"), Err(Error::Io { .. })));
        assert!(matches!(resolve_scenario("no_such_scenario"), Err(Error::Io { .. })));
    }

    #[test]
    fn bundled_names_resolve() {
        let s = resolve_scenario("two_customer.json").unwrap();
        assert_eq!(s.customers[0].p, 2.0);
        assert_eq!(s.customers[1].p, 3.0);
        assert_eq!(resolve_scenario("seven_customer").unwrap().n_customers(), 7);
    }

    fn customer() -> impl Strategy<Value = CustomerSpec> {
        (
            0.01f64..100.0,
            0.3f64..0.79,
            0.8f64..0.99,
            0.0f64..=1.0,
            proptest::collection::btree_set(800u32..1000, 1..4),
            (0.05f64..=1.0, 0.05f64..=1.0, 0.05f64..5.0),
            prop_oneof![
                Just(ReferenceMode::StandardProfile),
                Just(ReferenceMode::Zero),
                (-1.0f64..1.0).prop_map(ReferenceMode::Explicit)
            ],
            any::<bool>(),
        )
            .prop_map(
                |(p, phi, std, tau, acts, (alpha, beta, k), reference, unverified)| CustomerSpec {
                    id: String::new(),
                    p,
                    phi_init: PowerFactor::new(phi).unwrap(),
                    phi_std: PowerFactor::new(std).unwrap(),
                    tau,
                    actions: acts
                        .into_iter()
                        .map(|a| PowerFactor::new(a as f64 / 1000.0).unwrap())
                        .collect(),
                    alpha,
                    beta,
                    k,
                    reference,
                    unverified,
                },
            )
    }

    proptest! {
        #[test]
        fn save_then_load_is_identity(
            mut customers in proptest::collection::vec(customer(), 1..4),
            stop_tol in 1e-8f64..1e-2,
            round_robin in any::<bool>(),
        ) {
            for (n, c) in customers.iter_mut().enumerate() {
                c.id = format!("c{n}");
            }
            let mut s = Scenario::new(customers);
            s.fp.stop_tol = stop_tol;
            if round_robin {
                s.fp.update_order = UpdateOrder::RoundRobin;
            }
            s.notes.push("round trip".into());
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.json");
            save_scenario(&s, &path).unwrap();
            prop_assert_eq!(load_scenario(&path).unwrap(), s);
        }
    }
}
