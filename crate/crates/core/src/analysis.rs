//! The full pipeline: structural gates, chain construction, exact solve.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::chain::{build_chain, ChainError, ChainOptions, SchedulerChain, DEFAULT_CHAIN_CAP};
use crate::linear::{SolveError, SolveStats};
use crate::net::WorkflowNet;
use crate::scalar::Scalar;
use crate::structure::{analyze_structure, Diagnostic, StructuralReport, DEFAULT_MARKING_CAP};
use crate::timing::TieBreak;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpectedTime {
    Finite(Rational),
    /// The net is unsound; the witness names a marking from which the final
    /// marking is unreachable.
    Infinite { witness: Diagnostic },
}

impl ExpectedTime {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExpectedTime::Finite(v) => Some(v),
            ExpectedTime::Infinite { .. } => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExpectedTime::Infinite { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    /// The net is outside the class the analysis handles (not 1-safe, not
    /// confusion-free, or too large to decide).
    #[error("{0}")]
    Rejected(Diagnostic),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("linear system: {0}")]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisOptions {
    /// Skip reachability exploration and trust that the net is a sound
    /// TPWN. Wrong assumptions surface as chain or solver errors.
    pub assume_sound: bool,
    pub max_markings: usize,
    pub max_states: usize,
    pub tie: TieBreak,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            assume_sound: false,
            max_markings: DEFAULT_MARKING_CAP,
            max_states: DEFAULT_CHAIN_CAP,
            tie: TieBreak::LeastIndex,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Timings {
    #[serde(with = "millis")]
    pub structure: Duration,
    #[serde(with = "millis")]
    pub construction: Duration,
    #[serde(with = "millis")]
    pub solving: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.structure + self.construction + self.solving
    }
}

mod millis {
    use serde::Serializer;
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    /// Absent when `assume_sound` skipped exploration.
    pub structure: Option<StructuralReport>,
    pub expected_time: ExpectedTime,
    /// Absent for unsound nets, where no chain is built.
    pub chain_states: Option<usize>,
    pub solve_stats: Option<SolveStats>,
    pub timings: Timings,
}

/// Expected time with default options.
pub fn expected_time(net: &WorkflowNet) -> Result<ExpectedTime, AnalysisError> {
    analyze(net, AnalysisOptions::default()).map(|a| a.expected_time)
}

pub fn analyze(net: &WorkflowNet, options: AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let mut timings = Timings::default();
    let structure = if options.assume_sound {
        None
    } else {
        let start = Instant::now();
        let (report, _) = analyze_structure(net, options.max_markings);
        timings.structure = start.elapsed();
        if let Some(d) = gate(&report) {
            return Err(AnalysisError::Rejected(d));
        }
        if !report.is_sound {
            let witness = report
                .diagnostics
                .iter()
                .find(|d| matches!(d, Diagnostic::Unsound { .. }))
                .cloned()
                .expect("unsound nets carry a witness");
            return Ok(Analysis {
                structure: Some(report),
                expected_time: ExpectedTime::Infinite { witness },
                chain_states: None,
                solve_stats: None,
                timings,
            });
        }
        Some(report)
    };

    let start = Instant::now();
    let chain = build_chain(net, ChainOptions { max_states: options.max_states, tie: options.tie })?;
    timings.construction = start.elapsed();

    let start = Instant::now();
    let system = chain.assemble_system::<Rational>();
    let solution = system.solve()?;
    timings.solving = start.elapsed();

    Ok(Analysis {
        structure,
        expected_time: ExpectedTime::Finite(solution.values[SchedulerChain::INITIAL].clone()),
        chain_states: Some(chain.len()),
        solve_stats: Some(solution.stats),
        timings,
    })
}

/// The blocking diagnostic, if any. Workflow shape and free-choice are
/// reported but do not block: the chain only needs 1-safety and
/// confusion-freeness, and soundness decides finiteness.
fn gate(report: &StructuralReport) -> Option<Diagnostic> {
    report
        .diagnostics
        .iter()
        .find(|d| {
            matches!(
                d,
                Diagnostic::NotOneSafe { .. }
                    | Diagnostic::StateExplosion { .. }
                    | Diagnostic::Confusion { .. }
            )
        })
        .cloned()
}

/// Value of the initial chain state in any scalar type.
pub fn chain_value<S: Scalar>(chain: &SchedulerChain) -> Result<S, SolveError> {
    let mut solution = chain.assemble_system::<S>().solve()?;
    Ok(solution.values.swap_remove(SchedulerChain::INITIAL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio;
    use crate::samples::*;

    #[test]
    fn example_is_47_fifths() {
        assert_eq!(expected_time(&example_net()).unwrap(), ExpectedTime::Finite(ratio(47, 5)));
    }

    #[test]
    fn trivial() {
        assert_eq!(expected_time(&trivial_net(7)).unwrap(), ExpectedTime::Finite(ratio(7, 1)));
    }

    #[test]
    fn deleting_t5_is_infinite() {
        let et = expected_time(&example_without_t5()).unwrap();
        let ExpectedTime::Infinite { witness } = et else { panic!("{et:?}") };
        assert_eq!(witness, Diagnostic::Unsound { marking: vec!["p2".into(), "p4".into()] });
    }

    #[test]
    fn confused_net_is_rejected() {
        assert!(matches!(expected_time(&n1_net()), Err(AnalysisError::Rejected(Diagnostic::Confusion { .. }))));
    }

    #[test]
    fn tie_break_does_not_matter() {
        for tie in [TieBreak::LeastIndex, TieBreak::GreatestIndex] {
            let a = analyze(&example_net(), AnalysisOptions { tie, ..Default::default() }).unwrap();
            assert_eq!(a.expected_time, ExpectedTime::Finite(ratio(47, 5)));
        }
    }

    #[test]
    fn assume_sound_on_unsound_net_reports_deadlock() {
        let opts = AnalysisOptions { assume_sound: true, ..Default::default() };
        assert!(matches!(analyze(&example_without_t5(), opts), Err(AnalysisError::Chain(ChainError::Deadlock { .. }))));
    }

    #[test]
    fn float_solution_agrees() {
        let chain = build_chain(&example_net(), ChainOptions::default()).unwrap();
        let v: f64 = chain_value(&chain).unwrap();
        assert!((v - 9.4).abs() < 1e-12);
        let v: f32 = chain_value(&chain).unwrap();
        assert!((v - 9.4).abs() < 1e-5);
    }
}
