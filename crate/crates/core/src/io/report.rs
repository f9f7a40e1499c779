//! Machine-readable JSON report. Keys appear in declaration order, so equal
//! inputs give byte-identical reports once timings are left out.

use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::network::{AnalysisResult, ChainMode, Diagnostics, Domain, Network, Options, Track};
use crate::spec_check::{Method, Status, Verdict};

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub network: NetworkSummary,
    pub config: ConfigEcho,
    pub verdicts: Vec<VerdictEntry>,
    pub bounds: Vec<BoundEntry>,
    pub generators: GeneratorDump,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetworkSummary {
    pub inputs: usize,
    /// Neurons per layer, output layer last.
    pub layers: Vec<usize>,
    pub relu_output: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub mode: ChainMode,
    pub domain: Domain,
    pub track: Track,
    pub subdivision: Option<Vec<usize>>,
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub status: Status,
    #[serde(serialize_with = "extended_real")]
    pub witness: f64,
    pub method: Method,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundEntry {
    pub node: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorDump {
    pub slots: Vec<String>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Timings {
    pub analysis_ms: f64,
    pub check_ms: f64,
}

/// JSON has no infinities; they are written as the strings `"inf"` and
/// `"-inf"`.
fn extended_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

impl Report {
    pub fn build(net: &Network, opts: &Options, res: &AnalysisResult, verdicts: &[Verdict], timings: Option<Timings>) -> Self {
        Report {
            network: NetworkSummary {
                inputs: net.inputs(),
                layers: net.layers().iter().map(|l| l.outputs()).collect(),
                relu_output: net.layers().last().is_some_and(|l| l.relu),
            },
            config: ConfigEcho {
                mode: opts.mode,
                domain: opts.domain,
                track: opts.track,
                subdivision: opts.subdivision.as_ref().map(|s| s.counts.clone()),
                eps: opts.eps,
            },
            verdicts: verdicts
                .iter()
                .map(|v| VerdictEntry {
                    name: v.name.clone(),
                    status: v.status,
                    witness: v.witness,
                    method: v.method,
                })
                .collect(),
            bounds: res
                .node_bounds
                .iter()
                .map(|(n, iv)| BoundEntry {
                    node: net.label(*n),
                    // no negative zeros in the output
                    lo: iv.lo + 0.0,
                    hi: iv.hi + 0.0,
                })
                .collect(),
            generators: GeneratorDump {
                slots: res.slots.iter().map(|&s| net.slot_label(s)).collect(),
                points: res.internal.generators().to_vec(),
            },
            diagnostics: res.diagnostics.clone(),
            timings,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
