//! Token arrival times along firing sequences, their finite abstraction, and
//! the earliest-first scheduler.
//!
//! A [`TimestampVector`] maps every marked place to the arrival time of its
//! token; unmarked places are `⊥`, which is absorbing under addition, fixed
//! under [`ominus`] and ordered below every number. The abstraction shifts
//! times so that they are relative to the start of the last fired
//! transition, which bounds every entry by the largest duration `H`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{Marking, PlaceId, TransitionId, WorkflowNet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimingError {
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("transition `{transition}` at position {position} is not firable")]
    NotFirable { position: usize, transition: String },
    #[error("firing `{transition}` puts a second token on `{place}`")]
    Unsafe { transition: String, place: String },
    #[error("no transition is enabled")]
    NoEnabledTransition,
    #[error("timestamp overflow while firing `{0}`")]
    Overflow(String),
}

/// Arrival time per marked place; places absent from the vector are `⊥`.
///
/// Entries are kept sorted by place, so equal vectors are structurally equal
/// and hash alike.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct TimestampVector {
    entries: Vec<(PlaceId, u64)>,
}

/// A timestamp vector whose entries all lie in `{⊥, 0, .., H}`; the states of
/// the scheduler chain.
pub type AbstractState = TimestampVector;

impl TimestampVector {
    /// `{i: 0}`.
    pub fn initial(net: &WorkflowNet) -> Self {
        TimestampVector { entries: vec![(net.initial_place(), 0)] }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (PlaceId, u64)>) -> Self {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_unstable();
        entries.dedup_by_key(|e| e.0);
        TimestampVector { entries }
    }

    /// Builds a vector from place names, panicking on unknown names.
    pub fn named(net: &WorkflowNet, entries: &[(&str, u64)]) -> Self {
        Self::from_entries(entries.iter().map(|&(name, v)| {
            (net.place_id(name).unwrap_or_else(|| panic!("unknown place {name}")), v)
        }))
    }

    pub fn entries(&self) -> &[(PlaceId, u64)] {
        &self.entries
    }

    /// `None` is `⊥`.
    pub fn get(&self, p: PlaceId) -> Option<u64> {
        self.entries
            .binary_search_by_key(&p, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn support(&self, place_count: usize) -> Marking {
        Marking::from_places(place_count, self.entries.iter().map(|e| e.0))
    }

    pub fn support_is(&self, p: PlaceId) -> bool {
        self.entries.len() == 1 && self.entries[0].0 == p
    }

    /// Largest entry, `None` when every place is `⊥`.
    pub fn max_entry(&self) -> Option<u64> {
        self.entries.iter().map(|e| e.1).max()
    }

    /// Largest entry over `places`; `None` if any of them is `⊥`.
    fn max_over(&self, places: &[PlaceId]) -> Option<u64> {
        places.iter().try_fold(0u64, |acc, &p| self.get(p).map(|v| acc.max(v)))
    }

    /// `{p1:4,p4:5}` rendering.
    pub fn display<'a>(&'a self, net: &'a WorkflowNet) -> impl fmt::Display + 'a {
        DisplayStamps { stamps: self, net }
    }
}

impl fmt::Debug for TimestampVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter().map(|(p, v)| (p, v))).finish()
    }
}

struct DisplayStamps<'a> {
    stamps: &'a TimestampVector,
    net: &'a WorkflowNet,
}

impl fmt::Display for DisplayStamps<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (p, v)) in self.stamps.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", self.net.place_name(*p), v)?;
        }
        f.write_str("}")
    }
}

fn not_enabled(net: &WorkflowNet, t: TransitionId) -> TimingError {
    TimingError::NotEnabled(net.transition_name(t).to_string())
}

/// Start of `t` under `x`: the latest arrival over its preset.
pub fn preset_start(net: &WorkflowNet, x: &TimestampVector, t: TransitionId) -> Result<u64, TimingError> {
    x.max_over(&net.transition(t).preset)
        .ok_or_else(|| not_enabled(net, t))
}

/// Postset places receive the preset's latest arrival plus `τ(t)`, preset
/// places not refilled become `⊥`, all others keep their time.
pub fn upd(net: &WorkflowNet, x: &TimestampVector, t: TransitionId) -> Result<TimestampVector, TimingError> {
    let rec = net.transition(t);
    let start = preset_start(net, x, t)?;
    let arrival = start
        .checked_add(rec.duration)
        .ok_or_else(|| TimingError::Overflow(rec.id.clone()))?;
    let mut entries: Vec<(PlaceId, u64)> = x
        .entries
        .iter()
        .copied()
        .filter(|(p, _)| rec.preset.binary_search(p).is_err())
        .collect();
    for &p in &rec.postset {
        if entries.iter().any(|e| e.0 == p) {
            return Err(TimingError::Unsafe {
                transition: rec.id.clone(),
                place: net.place_name(p).to_string(),
            });
        }
        entries.push((p, arrival));
    }
    entries.sort_unstable();
    Ok(TimestampVector { entries })
}

/// Arrival times after firing `seq` from `{i: 0}`.
pub fn mu(net: &WorkflowNet, seq: &[TransitionId]) -> Result<TimestampVector, TimingError> {
    seq.iter()
        .enumerate()
        .try_fold(TimestampVector::initial(net), |x, (position, &t)| {
            upd(net, &x, t).map_err(|e| match e {
                TimingError::NotEnabled(transition) => TimingError::NotFirable { position, transition },
                other => other,
            })
        })
}

/// Time needed to fire `seq`: the latest arrival after it.
pub fn time_of(net: &WorkflowNet, seq: &[TransitionId]) -> Result<u64, TimingError> {
    Ok(mu(net, seq)?.max_entry().unwrap_or(0))
}

/// Earliest start of `t` after `seq`.
pub fn start_time(net: &WorkflowNet, seq: &[TransitionId], t: TransitionId) -> Result<u64, TimingError> {
    preset_start(net, &mu(net, seq)?, t)
}

/// Subtracts `n` from every entry, clamping at 0; `⊥` stays `⊥`.
pub fn ominus(x: &TimestampVector, n: u64) -> TimestampVector {
    TimestampVector {
        entries: x.entries.iter().map(|&(p, v)| (p, v.saturating_sub(n))).collect(),
    }
}

/// Abstract successor: `upd(x, t) ⊖ start(t)`.
pub fn abstract_update(net: &WorkflowNet, x: &AbstractState, t: TransitionId) -> Result<AbstractState, TimingError> {
    let start = preset_start(net, x, t)?;
    Ok(ominus(&upd(net, x, t)?, start))
}

/// Start of a conflict set: the latest arrival over the union of presets.
pub fn set_start(net: &WorkflowNet, x: &TimestampVector, set: &[TransitionId]) -> Result<u64, TimingError> {
    set.iter()
        .try_fold(0u64, |acc, &t| preset_start(net, x, t).map(|s| acc.max(s)))
}

/// Conflict sets of `supp(x)` paired with their start under `x`.
fn timed_conflict_sets(
    net: &WorkflowNet,
    x: &TimestampVector,
) -> Result<Vec<(u64, Vec<TransitionId>)>, TimingError> {
    let sets = net.conflict_sets(&x.support(net.place_count()));
    if sets.is_empty() {
        return Err(TimingError::NoEnabledTransition);
    }
    sets.into_iter()
        .map(|c| set_start(net, x, &c).map(|s| (s, c)))
        .collect()
}

/// Earliest local start over the conflict sets of `supp(x)`; the reward of
/// the abstract state `x`.
pub fn reward(net: &WorkflowNet, x: &AbstractState) -> Result<u64, TimingError> {
    Ok(timed_conflict_sets(net, x)?
        .into_iter()
        .map(|(s, _)| s)
        .min()
        .expect("non-empty"))
}

/// How the earliest-first scheduler picks among conflict sets with equal
/// start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// The set containing the smallest transition index.
    #[default]
    LeastIndex,
    /// The set whose smallest transition index is largest.
    GreatestIndex,
}

/// Every conflict set with minimal start, ordered by least transition.
pub fn earliest_first_candidates(
    net: &WorkflowNet,
    x: &TimestampVector,
) -> Result<Vec<Vec<TransitionId>>, TimingError> {
    let timed = timed_conflict_sets(net, x)?;
    let best = timed.iter().map(|(s, _)| *s).min().expect("non-empty");
    Ok(timed
        .into_iter()
        .filter(|(s, _)| *s == best)
        .map(|(_, c)| c)
        .collect())
}

/// The conflict set the earliest-first scheduler fires next.
pub fn earliest_first_choice(
    net: &WorkflowNet,
    x: &TimestampVector,
    tie: TieBreak,
) -> Result<Vec<TransitionId>, TimingError> {
    let mut candidates = earliest_first_candidates(net, x)?;
    // candidates are sorted by their first element
    Ok(match tie {
        TieBreak::LeastIndex => candidates.swap_remove(0),
        TieBreak::GreatestIndex => candidates.pop().expect("non-empty"),
    })
}

/// Finite abstraction through full timestamps:
/// `ν(σt) = μ(σt) ⊖ start(σt)`, `ν(ε) = μ(ε)`.
pub fn nu(net: &WorkflowNet, seq: &[TransitionId]) -> Result<AbstractState, TimingError> {
    match seq.split_last() {
        None => Ok(TimestampVector::initial(net)),
        Some((&t, prefix)) => {
            let before = mu(net, prefix)?;
            let start = preset_start(net, &before, t).map_err(|_| TimingError::NotFirable {
                position: prefix.len(),
                transition: net.transition_name(t).to_string(),
            })?;
            Ok(ominus(&upd(net, &before, t)?, start))
        }
    }
}

/// Finite abstraction by folding [`abstract_update`]; agrees with [`nu`] on
/// sequences compatible with the earliest-first scheduler.
pub fn nu_folded(net: &WorkflowNet, seq: &[TransitionId]) -> Result<AbstractState, TimingError> {
    seq.iter()
        .enumerate()
        .try_fold(TimestampVector::initial(net), |x, (position, &t)| {
            abstract_update(net, &x, t).map_err(|e| match e {
                TimingError::NotEnabled(transition) => TimingError::NotFirable { position, transition },
                other => other,
            })
        })
}
