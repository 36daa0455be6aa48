//! Machine-readable experiment reports.
//!
//! Reports are plain JSON built from the structs below. Everything a
//! verdict refers to is a number in the same report, and serialization is
//! byte-stable for a fixed config and seed (timing is deliberately kept
//! out of the file and printed to stderr instead).

use crate::config::ExperimentConfig;
use serde::Serialize;
use weblab_core::quartic::QuarticReport;
use weblab_core::rank::RankReport;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeIdentityResult {
    pub identity: String,
    pub points: usize,
    pub max_residual: f64,
    pub min_order: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlResult {
    pub name: String,
    pub order_estimate: f64,
    pub final_residual: f64,
    /// A control passes when it correctly fails to converge.
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeSuite {
    pub sampling_margin: f64,
    pub step_for_residual: f64,
    pub identities: Vec<PdeIdentityResult>,
    pub controls: Vec<ControlResult>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubwebHexagon {
    pub foliations: Vec<String>,
    pub indices: Vec<usize>,
    pub centers: usize,
    pub max_defect: f64,
    pub order_estimate_at_first_center: f64,
    /// None = no expectation asserted for this subweb.
    pub expected_hexagonal: Option<bool>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HexagonSuite {
    pub epsilon: f64,
    pub subwebs: Vec<SubwebHexagon>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubwebRank {
    pub foliations: Vec<String>,
    pub detected_rank: usize,
    pub gap_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankSuite {
    pub sampling_box: [f64; 4],
    pub degrees: Vec<usize>,
    pub report: RankReport,
    pub subwebs: Vec<SubwebRank>,
    /// Held-out residuals of the extracted relations.
    pub basis_residuals: Vec<f64>,
    /// Projection residuals of independently known relations onto the
    /// extracted basis.
    pub projections: Vec<NamedValue>,
    /// Worst mismatch between tangent-pair bisectors and the net
    /// directions (tangent webs only).
    pub bisector_mismatch: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArcSample {
    pub foliation: usize,
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuarticSuite {
    pub pattern: String,
    pub source: String,
    pub report: QuarticReport,
    pub moving_line_checks: Vec<NamedValue>,
    pub arcs: Vec<ArcSample>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemLoops {
    pub system: String,
    pub loop_defects: Vec<f64>,
    pub max_defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrobeniusSuite {
    pub loops: usize,
    pub perimeter: f64,
    pub systems: Vec<SystemLoops>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config: ExperimentConfig,
    pub pde: Option<PdeSuite>,
    pub hexagon: Option<HexagonSuite>,
    pub rank: Option<RankSuite>,
    pub quartic: Option<QuarticSuite>,
    pub frobenius: Option<FrobeniusSuite>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, config: ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config,
            pde: None,
            hexagon: None,
            rank: None,
            quartic: None,
            frobenius: None,
            verdicts: Vec::new(),
            pass: true,
        }
    }

    pub fn add_verdict(&mut self, name: &str, value: f64, pass: bool) {
        self.verdicts.push(Verdict {
            name: name.to_string(),
            value,
            pass,
        });
        self.pass &= pass;
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Comma-separated arc samples: foliation index, first-integral value
    /// and the normalized projective coordinates.
    pub fn arcs_csv(&self) -> Result<String, String> {
        let q = self
            .quartic
            .as_ref()
            .ok_or_else(|| "no arcs: the quartic suite did not run".to_string())?;
        if q.arcs.is_empty() {
            return Err("no arcs".to_string());
        }
        let mut out = String::from("foliation,s,X,Y,Z\n");
        for a in &q.arcs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                a.foliation, a.s, a.x, a.y, a.z
            ));
        }
        Ok(out)
    }

    /// Human-oriented one-line-per-verdict summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            out.push_str(&format!(
                "{}  {} (value {:.3e})\n",
                if v.pass { "PASS" } else { "FAIL" },
                v.name,
                v.value
            ));
        }
        out.push_str(&format!(
            "overall: {}\n",
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}
