//! JSON documents for nets and PERT networks, and the analysis report.
//!
//! A net document looks like
//!
//! ```json
//! {
//!   "version": 1,
//!   "places": ["i", "p", "o"],
//!   "transitions": [
//!     {"id": "a", "pre": ["i"], "post": ["p"], "weight": "1", "time": 2},
//!     {"id": "b", "pre": ["p"], "post": ["o"], "weight": "1/5", "time": 0}
//!   ],
//!   "initial": "i",
//!   "final": "o"
//! }
//! ```
//!
//! Weights are strings holding a fraction `a/b`, an integer or a decimal;
//! bare JSON integers are accepted too.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{Analysis, ExpectedTime, Timings};
use crate::net::{NetError, TransitionDef, WorkflowNet};
use crate::pert::{PertEdge, PertNetwork, PertViolation};
use crate::scalar::{format_decimal, format_rational, parse_rational};
use crate::structure::{check_workflow_shape, Diagnostic, ShapeViolation, StructuralReport};
use crate::Rational;

pub const FORMAT_VERSION: u32 = 1;

/// Significant digits of the decimal rendering in reports.
pub const DECIMAL_DIGITS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IoError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid document at line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("`{id}`: bad number `{value}`: {message}")]
    Number { id: String, value: String, message: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("not a workflow net: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Shape(Vec<ShapeViolation>),
    #[error("invalid PERT network: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Pert(Vec<PertViolation>),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let (line, column) = (e.line(), e.column());
        // serde_json appends the position to the message; keep it once.
        let message = e.to_string();
        let message = match message.rfind(" at line ") {
            Some(idx) => message[..idx].to_string(),
            None => message,
        };
        match e.classify() {
            Category::Data => IoError::Schema { line, column, message },
            _ => IoError::Syntax { line, column, message },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum NumberText {
    Text(String),
    Integer(u64),
}

impl NumberText {
    fn parse(&self, id: &str) -> Result<Rational, IoError> {
        match self {
            NumberText::Integer(n) => Ok(Rational::from_integer((*n).into())),
            NumberText::Text(s) => parse_rational(s).map_err(|e| IoError::Number {
                id: id.to_string(),
                value: s.clone(),
                message: e.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDocument {
    id: String,
    pre: Vec<String>,
    post: Vec<String>,
    weight: NumberText,
    time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetDocument {
    #[serde(default = "default_version")]
    version: u32,
    places: Vec<String>,
    transitions: Vec<TransitionDocument>,
    initial: String,
    #[serde(rename = "final")]
    final_place: String,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

/// Parses a net without checking the workflow shape.
pub fn parse_net_lenient(text: &str) -> Result<WorkflowNet, IoError> {
    let doc: NetDocument = serde_json::from_str(text)?;
    if doc.version != FORMAT_VERSION {
        return Err(IoError::Version(doc.version));
    }
    let transitions = doc
        .transitions
        .into_iter()
        .map(|t| {
            Ok(TransitionDef {
                weight: t.weight.parse(&t.id)?,
                id: t.id,
                pre: t.pre,
                post: t.post,
                duration: t.time,
            })
        })
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok(WorkflowNet::new(doc.places, transitions, &doc.initial, &doc.final_place)?)
}

/// Parses a net and requires the workflow shape.
pub fn parse_net(text: &str) -> Result<WorkflowNet, IoError> {
    let net = parse_net_lenient(text)?;
    check_workflow_shape(&net).map_err(IoError::Shape)?;
    Ok(net)
}

pub fn emit_net(net: &WorkflowNet) -> String {
    let doc = NetDocument {
        version: FORMAT_VERSION,
        places: net.places().to_vec(),
        transitions: net
            .transition_defs()
            .into_iter()
            .map(|t| TransitionDocument {
                weight: NumberText::Text(format_rational(&t.weight)),
                id: t.id,
                pre: t.pre,
                post: t.post,
                time: t.duration,
            })
            .collect(),
        initial: net.place_name(net.initial_place()).to_string(),
        final_place: net.place_name(net.final_place()).to_string(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("serializable");
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PertEdgeDocument {
    id: String,
    from: String,
    to: String,
    p: NumberText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PertDocument {
    vertices: Vec<String>,
    source: String,
    sink: String,
    edges: Vec<PertEdgeDocument>,
}

/// Parses and validates a PERT network.
pub fn parse_pert(text: &str) -> Result<PertNetwork, IoError> {
    let doc: PertDocument = serde_json::from_str(text)?;
    let edges = doc
        .edges
        .into_iter()
        .map(|e| {
            Ok(PertEdge { p: e.p.parse(&e.id)?, id: e.id, from: e.from, to: e.to })
        })
        .collect::<Result<Vec<_>, IoError>>()?;
    let pn = PertNetwork { vertices: doc.vertices, source: doc.source, sink: doc.sink, edges };
    pn.validate().map_err(IoError::Pert)?;
    Ok(pn)
}

pub fn emit_pert(pn: &PertNetwork) -> String {
    let doc = PertDocument {
        vertices: pn.vertices.clone(),
        source: pn.source.clone(),
        sink: pn.sink.clone(),
        edges: pn
            .edges
            .iter()
            .map(|e| PertEdgeDocument {
                id: e.id.clone(),
                from: e.from.clone(),
                to: e.to.clone(),
                p: NumberText::Text(format_rational(&e.p)),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("serializable");
    out.push('\n');
    out
}

/// Machine-readable outcome of `expected-time`. Field order and names are
/// stable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    /// `"a/b"`, an integer, or `"infinite"`.
    pub expected_time: String,
    /// The exact value rounded half-to-even to ten significant digits.
    pub decimal: Option<String>,
    pub witness: Option<Diagnostic>,
    pub chain_states: Option<usize>,
    pub structure: Option<StructuralReport>,
    pub timings_ms: Timings,
}

impl AnalysisReport {
    pub fn new(analysis: &Analysis) -> Self {
        let (expected_time, decimal, witness) = match &analysis.expected_time {
            ExpectedTime::Finite(v) => {
                (format_rational(v), Some(format_decimal(v, DECIMAL_DIGITS)), None)
            }
            ExpectedTime::Infinite { witness } => ("infinite".to_string(), None, Some(witness.clone())),
        };
        AnalysisReport {
            expected_time,
            decimal,
            witness,
            chain_states: analysis.chain_states,
            structure: analysis.structure.clone(),
            timings_ms: analysis.timings,
        }
    }

    /// `"47/5 (= 9.4)"`, or `"infinite"`.
    pub fn headline(&self) -> String {
        match &self.decimal {
            Some(d) => format!("{} (= {d})", self.expected_time),
            None => self.expected_time.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
