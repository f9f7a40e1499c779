//! JSON specification files:
//!
//! ```json
//! {"input_box": [[-1, 1], [-1, 1]],
//!  "assertions": [{"name": "P1", "in_coeffs": [0, 0], "out_coeffs": [-1, 1], "const": 0,
//!                  "restrict_box": [[-0.25, 0.25], [-1, 1]]}]}
//! ```
//!
//! Each assertion states `in·x + out·y + const ≥ 0`; empty coefficient
//! lists stand for zeros.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbox::Hyperbox;
use crate::network::Network;
use crate::spec_check::LinearAssertion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub input_box: Hyperbox,
    #[serde(default)]
    pub assertions: Vec<LinearAssertion>,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SpecFile = serde_json::from_str(text)?;
        for a in &spec.assertions {
            a.validate()?;
        }
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks every dimension against the network.
    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.input_box.dim() != net.inputs() {
            return Err(Error::InvalidSpec(format!(
                "input box has {} dimensions, network has {} inputs",
                self.input_box.dim(),
                net.inputs()
            )));
        }
        for a in &self.assertions {
            let bad = |v: &[f64], n: usize| !v.is_empty() && v.len() != n;
            let restrict_bad = a.restrict.as_ref().is_some_and(|r| r.dim() != net.inputs());
            if bad(&a.in_coeffs, net.inputs()) || bad(&a.out_coeffs, net.outputs()) || restrict_bad {
                return Err(Error::InvalidSpec(format!("assertion '{}' does not match the network", a.name)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::sherlock;

    #[test]
    fn parses_restriction_and_constant() {
        let s = SpecFile::parse(
            r#"{"input_box": [[-1, 1], [-1, 1]],
                "assertions": [
                  {"name": "P1", "in_coeffs": [0, 0], "out_coeffs": [-1, 1], "const": 0},
                  {"name": "P2", "in_coeffs": [], "out_coeffs": [-1, 0], "const": 0.5,
                   "restrict_box": [[-0.25, 0.25], [-1, 1]]}]}"#,
        )
        .unwrap();
        assert_eq!(s.assertions.len(), 2);
        let r = s.assertions[1].restrict.as_ref().unwrap();
        assert_eq!((r[0].lo, r[0].hi), (-0.25, 0.25));
        assert_eq!(SpecFile::parse(&s.to_json().unwrap()).unwrap(), s);
        let net = sherlock::parse("# relu-output\n2 2 0 1 -1 -1 1 1 1").unwrap();
        s.validate(&net).unwrap();
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SpecFile::parse(r#"{"input_box": [[1, -1]]}"#).is_err());
        assert!(SpecFile::parse(r#"{"input_box": [[0, 1]], "extra": 1}"#).is_err());
        assert!(SpecFile::parse(r#"{"input_box": [[0, 1]], "assertions": [{"name": "a", "in_coeffs": [], "out_coeffs": [], "const": 1}]}"#).is_err());
        let s = SpecFile::parse(r#"{"input_box": [[0, 1]]}"#).unwrap();
        let net = sherlock::parse("2 1 0 1 1 0").unwrap();
        assert!(matches!(s.validate(&net), Err(Error::InvalidSpec(_))));
    }
}
