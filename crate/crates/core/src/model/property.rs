//! JSON property files: `{"box": [[lo, hi], ...], "halfspaces": [{"a": [...], "b": r}], "threshold": c}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Halfspace, Network, VerificationProblem};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyFile {
    #[serde(rename = "box")]
    pub input_box: Vec<[f64; 2]>,
    #[serde(default)]
    pub halfspaces: Vec<Halfspace>,
    pub threshold: f64,
}

impl PropertyFile {
    pub fn from_problem(problem: &VerificationProblem) -> PropertyFile {
        PropertyFile {
            input_box: problem.input_box.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            halfspaces: problem.halfspaces.clone(),
            threshold: problem.threshold,
        }
    }

    pub fn into_problem(self, network: Network) -> Result<VerificationProblem> {
        VerificationProblem::new(
            network,
            self.input_box.into_iter().map(|[lo, hi]| (lo, hi)).collect(),
            self.halfspaces,
            self.threshold,
        )
    }
}

pub fn parse_property(text: &str, name: &str) -> Result<PropertyFile> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        source_name: name.to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn load_property(path: impl AsRef<Path>) -> Result<PropertyFile> {
    let path = path.as_ref();
    parse_property(&std::fs::read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_fields() {
        let p = parse_property(
            r#"{"box": [[0, 1], [-1, 2]], "halfspaces": [{"a": [1, 1], "b": 1.5}], "threshold": 3}"#,
            "p",
        )
        .unwrap();
        assert_eq!(p.input_box, vec![[0.0, 1.0], [-1.0, 2.0]]);
        assert_eq!(p.halfspaces[0].b, 1.5);
        assert_eq!(p.threshold, 3.0);
    }

    #[test]
    fn halfspaces_are_optional() {
        let p = parse_property(r#"{"box": [[0, 1]], "threshold": 0}"#, "p").unwrap();
        assert!(p.halfspaces.is_empty());
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse_property("{\n\"box\": [[0, 1]],\n\"threshold\": }", "p").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
