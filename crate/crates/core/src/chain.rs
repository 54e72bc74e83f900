//! The finite Markov chain induced by the earliest-first scheduler over
//! abstract states, and the reward equations whose solution at the initial
//! state is the expected time.

use std::fmt::Write as _;

use indexmap::IndexSet;
use num_traits::Zero;
use thiserror::Error;

use crate::linear::LinearSystem;
use crate::net::{TransitionId, WorkflowNet};
use crate::scalar::{format_rational, Scalar};
use crate::timing::{
    abstract_update, earliest_first_choice, reward, AbstractState, TieBreak, TimestampVector,
    TimingError,
};
use crate::Rational;

/// Default cap on the number of chain states.
pub const DEFAULT_CHAIN_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("deadlock: abstract state {state} enables nothing and is not final")]
    Deadlock { state: String },
    #[error("more than {cap} chain states")]
    StateExplosion { cap: usize },
    #[error(transparent)]
    Timing(#[from] TimingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainOptions {
    pub max_states: usize,
    pub tie: TieBreak,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { max_states: DEFAULT_CHAIN_CAP, tie: TieBreak::LeastIndex }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Successor {
    pub transition: TransitionId,
    pub probability: Rational,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateKind {
    /// Support is exactly the final place; carries the largest entry.
    Final { value: u64 },
    Transient {
        conflict_set: Vec<TransitionId>,
        reward: u64,
        successors: Vec<Successor>,
    },
}

/// States are indexed in discovery order; index 0 is `{i: 0}`.
#[derive(Debug, Clone)]
pub struct SchedulerChain {
    pub states: IndexSet<AbstractState>,
    pub kinds: Vec<StateKind>,
}

impl SchedulerChain {
    pub const INITIAL: usize = 0;

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, idx: usize) -> &AbstractState {
        &self.states[idx]
    }

    pub fn index_of(&self, state: &AbstractState) -> Option<usize> {
        self.states.get_index_of(state)
    }

    /// Equations `X_x = r(x) + Σ p·X_f(x,t)` for transient states and
    /// `X_x = max_p x_p` for final ones, written as `A X = b`.
    pub fn assemble_system<S: Scalar>(&self) -> LinearSystem<S> {
        let mut rows = Vec::with_capacity(self.len());
        let mut rhs = Vec::with_capacity(self.len());
        for (idx, kind) in self.kinds.iter().enumerate() {
            match kind {
                StateKind::Final { value } => {
                    rows.push(vec![(idx, S::one())]);
                    rhs.push(S::from_u64(*value));
                }
                StateKind::Transient { reward, successors, .. } => {
                    let mut coeffs: Vec<(usize, Rational)> = vec![(idx, Rational::from_integer(1.into()))];
                    for s in successors {
                        match coeffs.iter_mut().find(|c| c.0 == s.target) {
                            Some(c) => c.1 -= &s.probability,
                            None => coeffs.push((s.target, -s.probability.clone())),
                        }
                    }
                    coeffs.sort_by_key(|c| c.0);
                    rows.push(
                        coeffs
                            .into_iter()
                            .filter(|c| !c.1.is_zero())
                            .map(|(j, v)| (j, S::from_rational(&v)))
                            .collect(),
                    );
                    rhs.push(S::from_u64(*reward));
                }
            }
        }
        LinearSystem { rows, rhs }
    }

    /// Graphviz rendering: nodes show the abstract state and its reward,
    /// edges the transition and its probability.
    pub fn to_dot(&self, net: &WorkflowNet) -> String {
        let mut out = String::from("digraph chain {\n  rankdir=TB;\n  node [shape=box];\n");
        for (idx, kind) in self.kinds.iter().enumerate() {
            let stamps = self.states[idx].display(net).to_string();
            let (label, extra) = match kind {
                StateKind::Final { value } => (format!("{stamps} r={value}"), ", peripheries=2"),
                StateKind::Transient { reward, .. } => (format!("{stamps} r={reward}"), ""),
            };
            let _ = writeln!(out, "  s{idx} [label=\"{}\"{extra}];", escape(&label));
        }
        for (idx, kind) in self.kinds.iter().enumerate() {
            if let StateKind::Transient { successors, .. } = kind {
                for s in successors {
                    let _ = writeln!(
                        out,
                        "  s{idx} -> s{} [label=\"{} {}\"];",
                        s.target,
                        escape(net.transition_name(s.transition)),
                        format_rational(&s.probability)
                    );
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Worklist closure from `{i: 0}` under the earliest-first scheduler.
pub fn build_chain(net: &WorkflowNet, options: ChainOptions) -> Result<SchedulerChain, ChainError> {
    let final_place = net.final_place();
    let mut states: IndexSet<AbstractState> = IndexSet::new();
    let mut kinds = Vec::new();
    states.insert(TimestampVector::initial(net));

    let mut next = 0;
    while next < states.len() {
        let x = states[next].clone();
        let kind = if x.support_is(final_place) {
            StateKind::Final { value: x.max_entry().unwrap_or(0) }
        } else {
            let conflict_set = match earliest_first_choice(net, &x, options.tie) {
                Ok(c) => c,
                Err(TimingError::NoEnabledTransition) => {
                    return Err(ChainError::Deadlock { state: x.display(net).to_string() })
                }
                Err(e) => return Err(e.into()),
            };
            let reward = reward(net, &x)?;
            let total = net.weight_of(&conflict_set);
            let mut successors = Vec::with_capacity(conflict_set.len());
            for &t in &conflict_set {
                let y = abstract_update(net, &x, t)?;
                let (target, fresh) = states.insert_full(y);
                if fresh && states.len() > options.max_states {
                    return Err(ChainError::StateExplosion { cap: options.max_states });
                }
                successors.push(Successor {
                    transition: t,
                    probability: &net.transition(t).weight / &total,
                    target,
                });
            }
            StateKind::Transient { conflict_set, reward, successors }
        };
        kinds.push(kind);
        next += 1;
    }
    Ok(SchedulerChain { states, kinds })
}
