//! 1-safe workflow nets: structure, markings, firing and conflict sets.

use std::collections::HashMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::Rational;

/// Dense index of a place.
pub type PlaceId = usize;
/// Dense index of a transition.
pub type TransitionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("transition `{transition}` refers to unknown place `{place}`")]
    UnknownPlace { transition: String, place: String },
    #[error("unknown place `{0}`")]
    UnknownPlaceId(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("transition `{0}` has an empty preset")]
    EmptyPreset(String),
    #[error("transition `{0}` has a non-positive weight")]
    NonPositiveWeight(String),
    #[error("initial and final place are both `{0}`")]
    InitialIsFinal(String),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("firing `{transition}` puts a second token on `{place}`")]
    UnsafeFiring { transition: String, place: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    /// Sorted, duplicate-free.
    pub preset: Vec<PlaceId>,
    /// Sorted, duplicate-free.
    pub postset: Vec<PlaceId>,
    pub weight: Rational,
    pub duration: u64,
}

/// A set of marked places. 1-safe markings are identified with sets.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(FixedBitSet);

impl Marking {
    pub fn empty(place_count: usize) -> Self {
        Marking(FixedBitSet::with_capacity(place_count))
    }

    pub fn from_places(place_count: usize, places: impl IntoIterator<Item = PlaceId>) -> Self {
        let mut bits = FixedBitSet::with_capacity(place_count);
        for p in places {
            bits.insert(p);
        }
        Marking(bits)
    }

    pub fn contains(&self, place: PlaceId) -> bool {
        self.0.contains(place)
    }

    pub fn insert(&mut self, place: PlaceId) {
        self.0.insert(place);
    }

    pub fn remove(&mut self, place: PlaceId) {
        self.0.set(place, false);
    }

    pub fn places(&self) -> impl Iterator<Item = PlaceId> + '_ {
        self.0.ones()
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.0
    }
}

impl fmt::Debug for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.ones()).finish()
    }
}

/// A workflow net with per-transition weight and duration.
///
/// Construction checks identifiers and transition records; the workflow
/// shape itself (source/sink places, strong connectivity) is a separate
/// structural check so that malformed nets can still be analysed and
/// reported on.
#[derive(Debug, Clone)]
pub struct WorkflowNet {
    places: Vec<String>,
    transitions: Vec<Transition>,
    place_index: HashMap<String, PlaceId>,
    transition_index: HashMap<String, TransitionId>,
    initial: PlaceId,
    final_place: PlaceId,
    consumers: Vec<Vec<TransitionId>>,
    producers: Vec<Vec<TransitionId>>,
    preset_bits: Vec<FixedBitSet>,
}

/// Transition record keyed by place names, used to build nets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionDef {
    pub id: String,
    pub pre: Vec<String>,
    pub post: Vec<String>,
    pub weight: Rational,
    pub duration: u64,
}

impl WorkflowNet {
    pub fn new(
        places: Vec<String>,
        transitions: Vec<TransitionDef>,
        initial: &str,
        final_place: &str,
    ) -> Result<Self, NetError> {
        let mut place_index = HashMap::with_capacity(places.len());
        for (idx, p) in places.iter().enumerate() {
            if place_index.insert(p.clone(), idx).is_some() {
                return Err(NetError::DuplicateId(p.clone()));
            }
        }
        let mut transition_index = HashMap::with_capacity(transitions.len());
        let mut records = Vec::with_capacity(transitions.len());
        for (idx, def) in transitions.into_iter().enumerate() {
            if place_index.contains_key(&def.id)
                || transition_index.insert(def.id.clone(), idx).is_some()
            {
                return Err(NetError::DuplicateId(def.id));
            }
            let resolve = |names: &[String]| -> Result<Vec<PlaceId>, NetError> {
                let mut ids = names
                    .iter()
                    .map(|n| {
                        place_index.get(n).copied().ok_or_else(|| NetError::UnknownPlace {
                            transition: def.id.clone(),
                            place: n.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ids.sort_unstable();
                ids.dedup();
                Ok(ids)
            };
            let preset = resolve(&def.pre)?;
            let postset = resolve(&def.post)?;
            if preset.is_empty() {
                return Err(NetError::EmptyPreset(def.id));
            }
            if def.weight <= Rational::zero() {
                return Err(NetError::NonPositiveWeight(def.id));
            }
            records.push(Transition {
                id: def.id,
                preset,
                postset,
                weight: def.weight,
                duration: def.duration,
            });
        }
        let initial_idx = *place_index
            .get(initial)
            .ok_or_else(|| NetError::UnknownPlaceId(initial.to_string()))?;
        let final_idx = *place_index
            .get(final_place)
            .ok_or_else(|| NetError::UnknownPlaceId(final_place.to_string()))?;
        if initial_idx == final_idx {
            return Err(NetError::InitialIsFinal(initial.to_string()));
        }

        let mut consumers = vec![Vec::new(); places.len()];
        let mut producers = vec![Vec::new(); places.len()];
        let mut preset_bits = Vec::with_capacity(records.len());
        for (t, rec) in records.iter().enumerate() {
            let mut bits = FixedBitSet::with_capacity(places.len());
            for &p in &rec.preset {
                consumers[p].push(t);
                bits.insert(p);
            }
            for &p in &rec.postset {
                producers[p].push(t);
            }
            preset_bits.push(bits);
        }

        Ok(WorkflowNet {
            places,
            transitions: records,
            place_index,
            transition_index,
            initial: initial_idx,
            final_place: final_idx,
            consumers,
            producers,
            preset_bits,
        })
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, t: TransitionId) -> &Transition {
        &self.transitions[t]
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial_place(&self) -> PlaceId {
        self.initial
    }

    pub fn final_place(&self) -> PlaceId {
        self.final_place
    }

    pub fn place_name(&self, p: PlaceId) -> &str {
        &self.places[p]
    }

    pub fn transition_name(&self, t: TransitionId) -> &str {
        &self.transitions[t].id
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.place_index.get(name).copied()
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transition_index.get(name).copied()
    }

    /// Transitions consuming from `p` (the postset of a place).
    pub fn consumers(&self, p: PlaceId) -> &[TransitionId] {
        &self.consumers[p]
    }

    /// Transitions producing into `p` (the preset of a place).
    pub fn producers(&self, p: PlaceId) -> &[TransitionId] {
        &self.producers[p]
    }

    /// Largest transition duration `H`.
    pub fn max_duration(&self) -> u64 {
        self.transitions.iter().map(|t| t.duration).max().unwrap_or(0)
    }

    pub fn initial_marking(&self) -> Marking {
        Marking::from_places(self.places.len(), [self.initial])
    }

    pub fn final_marking(&self) -> Marking {
        Marking::from_places(self.places.len(), [self.final_place])
    }

    /// Marking from place names.
    pub fn marking(&self, names: &[&str]) -> Result<Marking, NetError> {
        let ids = names
            .iter()
            .map(|n| self.place_id(n).ok_or_else(|| NetError::UnknownPlaceId(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Marking::from_places(self.places.len(), ids))
    }

    /// Transition ids from names.
    pub fn transition_ids(&self, names: &[&str]) -> Result<Vec<TransitionId>, NetError> {
        names
            .iter()
            .map(|n| {
                self.transition_id(n)
                    .ok_or_else(|| NetError::UnknownTransition(n.to_string()))
            })
            .collect()
    }

    pub fn transition_names(&self, ts: &[TransitionId]) -> Vec<&str> {
        ts.iter().map(|&t| self.transition_name(t)).collect()
    }

    /// `{p1,p3}` rendering of a marking.
    pub fn format_marking(&self, m: &Marking) -> String {
        let names: Vec<&str> = m.places().map(|p| self.place_name(p)).collect();
        format!("{{{}}}", names.join(","))
    }

    pub fn is_enabled(&self, m: &Marking, t: TransitionId) -> bool {
        self.preset_bits[t].is_subset(m.bits())
    }

    /// All transitions whose preset is contained in `m`, ascending.
    pub fn enabled_transitions(&self, m: &Marking) -> Vec<TransitionId> {
        let mut out: Vec<TransitionId> = m
            .places()
            .flat_map(|p| self.consumers[p].iter().copied())
            .filter(|&t| self.is_enabled(m, t))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `(m \ preset(t)) ∪ postset(t)`, rejecting firings that would put a
    /// second token on a place.
    pub fn fire(&self, m: &Marking, t: TransitionId) -> Result<Marking, NetError> {
        if !self.is_enabled(m, t) {
            return Err(NetError::NotEnabled(self.transition_name(t).to_string()));
        }
        let rec = &self.transitions[t];
        let mut next = m.clone();
        for &p in &rec.preset {
            next.remove(p);
        }
        for &p in &rec.postset {
            if next.contains(p) {
                return Err(NetError::UnsafeFiring {
                    transition: rec.id.clone(),
                    place: self.places[p].clone(),
                });
            }
            next.insert(p);
        }
        Ok(next)
    }

    /// Presets are disjoint.
    pub fn independent(&self, t1: TransitionId, t2: TransitionId) -> bool {
        self.preset_bits[t1].is_disjoint(&self.preset_bits[t2])
    }

    /// `t` together with every transition enabled at `m` sharing an input
    /// place with it, ascending.
    pub fn conflict_set(&self, m: &Marking, t: TransitionId) -> Result<Vec<TransitionId>, NetError> {
        if !self.is_enabled(m, t) {
            return Err(NetError::NotEnabled(self.transition_name(t).to_string()));
        }
        Ok(self.conflict_set_among(&self.enabled_transitions(m), t))
    }

    fn conflict_set_among(&self, enabled: &[TransitionId], t: TransitionId) -> Vec<TransitionId> {
        enabled
            .iter()
            .copied()
            .filter(|&u| u == t || !self.independent(t, u))
            .collect()
    }

    /// Distinct conflict sets of `m`, ordered by their least transition.
    pub fn conflict_sets(&self, m: &Marking) -> Vec<Vec<TransitionId>> {
        let enabled = self.enabled_transitions(m);
        let mut sets: Vec<Vec<TransitionId>> = enabled
            .iter()
            .map(|&t| self.conflict_set_among(&enabled, t))
            .collect();
        sets.sort();
        sets.dedup();
        sets
    }

    /// Union of the presets of `set`, ascending.
    pub fn preset_of_set(&self, set: &[TransitionId]) -> Vec<PlaceId> {
        let mut places: Vec<PlaceId> = set
            .iter()
            .flat_map(|&t| self.transitions[t].preset.iter().copied())
            .collect();
        places.sort_unstable();
        places.dedup();
        places
    }

    /// Sum of the weights of `set`.
    pub fn weight_of(&self, set: &[TransitionId]) -> Rational {
        set.iter()
            .fold(Rational::zero(), |acc, &t| acc + &self.transitions[t].weight)
    }

    /// `w(t) / w(set)`.
    pub fn probability_in(&self, set: &[TransitionId], t: TransitionId) -> Rational {
        let total = self.weight_of(set);
        if total.is_zero() {
            return Rational::one();
        }
        &self.transitions[t].weight / total
    }

    /// Name-keyed definitions, in index order.
    pub fn transition_defs(&self) -> Vec<TransitionDef> {
        self.transitions
            .iter()
            .map(|t| TransitionDef {
                id: t.id.clone(),
                pre: t.preset.iter().map(|&p| self.places[p].clone()).collect(),
                post: t.postset.iter().map(|&p| self.places[p].clone()).collect(),
                weight: t.weight.clone(),
                duration: t.duration,
            })
            .collect()
    }
}

/// Incremental construction of a [`WorkflowNet`] from names.
///
/// Places mentioned by transitions are declared on first use, after the
/// explicitly declared ones.
#[derive(Debug, Clone)]
pub struct NetBuilder {
    initial: String,
    final_place: String,
    places: Vec<String>,
    transitions: Vec<TransitionDef>,
}

impl NetBuilder {
    pub fn new(initial: &str, final_place: &str) -> Self {
        NetBuilder {
            initial: initial.to_string(),
            final_place: final_place.to_string(),
            places: vec![initial.to_string()],
            transitions: Vec::new(),
        }
    }

    pub fn from_net(net: &WorkflowNet) -> Self {
        NetBuilder {
            initial: net.place_name(net.initial_place()).to_string(),
            final_place: net.place_name(net.final_place()).to_string(),
            places: net.places().to_vec(),
            transitions: net.transition_defs(),
        }
    }

    fn declare(&mut self, name: &str) {
        if !self.places.iter().any(|p| p == name) {
            self.places.push(name.to_string());
        }
    }

    pub fn place(mut self, name: &str) -> Self {
        self.declare(name);
        self
    }

    pub fn transition(
        mut self,
        id: &str,
        pre: &[&str],
        post: &[&str],
        weight: Rational,
        duration: u64,
    ) -> Self {
        self.add_transition(id, pre, post, weight, duration);
        self
    }

    pub fn add_transition(
        &mut self,
        id: &str,
        pre: &[&str],
        post: &[&str],
        weight: Rational,
        duration: u64,
    ) {
        for p in pre.iter().chain(post) {
            self.declare(p);
        }
        self.transitions.push(TransitionDef {
            id: id.to_string(),
            pre: pre.iter().map(|s| s.to_string()).collect(),
            post: post.iter().map(|s| s.to_string()).collect(),
            weight,
            duration,
        });
    }

    /// Drops a transition and all its arcs.
    pub fn remove_transition(mut self, id: &str) -> Self {
        self.transitions.retain(|t| t.id != id);
        self
    }

    /// Mutable access to a transition record by id.
    pub fn transition_mut(&mut self, id: &str) -> Option<&mut TransitionDef> {
        self.transitions.iter_mut().find(|t| t.id == id)
    }

    pub fn build(mut self) -> Result<WorkflowNet, NetError> {
        let fin = self.final_place.clone();
        self.declare(&fin);
        WorkflowNet::new(self.places, self.transitions, &self.initial, &self.final_place)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{example_net, n1_net};
    use crate::ratio;

    fn ids(net: &WorkflowNet, names: &[&str]) -> Vec<TransitionId> {
        net.transition_ids(names).unwrap()
    }

    #[test]
    fn enabled_at_example_markings() {
        let net = example_net();
        let m = net.marking(&["p1", "p3"]).unwrap();
        assert_eq!(net.enabled_transitions(&m), ids(&net, &["t2", "t3", "t4"]));
        let m = net.marking(&["p2", "p4"]).unwrap();
        assert_eq!(net.enabled_transitions(&m), ids(&net, &["t5"]));
        assert!(net.enabled_transitions(&Marking::empty(net.place_count())).is_empty());
    }

    #[test]
    fn firing_example() {
        let net = example_net();
        let t = |n| net.transition_id(n).unwrap();
        let m = net.fire(&net.initial_marking(), t("t1")).unwrap();
        assert_eq!(m, net.marking(&["p1", "p3"]).unwrap());
        assert_eq!(net.fire(&m, t("t2")).unwrap(), m);
        let m = net.marking(&["p2", "p4"]).unwrap();
        assert_eq!(net.fire(&m, t("t5")).unwrap(), net.final_marking());
        assert!(matches!(
            net.fire(&net.initial_marking(), t("t5")),
            Err(NetError::NotEnabled(_))
        ));
    }

    #[test]
    fn unsafe_firing_is_reported() {
        let net = NetBuilder::new("i", "o")
            .transition("a", &["i"], &["p", "q"], ratio(1, 1), 0)
            .transition("b", &["q"], &["p"], ratio(1, 1), 0)
            .transition("c", &["p"], &["o"], ratio(1, 1), 0)
            .build()
            .unwrap();
        let m = net.fire(&net.initial_marking(), 0).unwrap();
        assert_eq!(
            net.fire(&m, 1),
            Err(NetError::UnsafeFiring { transition: "b".into(), place: "p".into() })
        );
    }

    #[test]
    fn independence() {
        let net = example_net();
        let t = |n| net.transition_id(n).unwrap();
        assert!(net.independent(t("t2"), t("t4")));
        assert!(!net.independent(t("t2"), t("t3")));
        for u in 0..net.transition_count() {
            assert!(!net.independent(u, u));
        }
    }

    #[test]
    fn conflict_sets_example() {
        let net = example_net();
        let m = net.marking(&["p1", "p3"]).unwrap();
        let t = |n| net.transition_id(n).unwrap();
        assert_eq!(net.conflict_set(&m, t("t2")).unwrap(), ids(&net, &["t2", "t3"]));
        assert_eq!(net.conflict_set(&m, t("t4")).unwrap(), ids(&net, &["t4"]));
        assert_eq!(
            net.conflict_sets(&m),
            vec![ids(&net, &["t2", "t3"]), ids(&net, &["t4"])]
        );
        let m = net.marking(&["p2", "p3"]).unwrap();
        assert_eq!(net.conflict_sets(&m), vec![ids(&net, &["t4"])]);
        assert!(net.conflict_sets(&Marking::empty(net.place_count())).is_empty());
        assert!(matches!(
            net.conflict_set(&m, t("t2")),
            Err(NetError::NotEnabled(_))
        ));
    }

    #[test]
    fn conflict_sets_overlap_in_confused_net() {
        // N1 at {p1,p2}: C(t2)={t2,t3}, C(t4)={t3,t4}, C(t3)={t2,t3,t4}
        let net = n1_net();
        let m = net.marking(&["p1", "p2"]).unwrap();
        let t = |n| net.transition_id(n).unwrap();
        assert_eq!(net.conflict_set(&m, t("t2")).unwrap(), ids(&net, &["t2", "t3"]));
        assert_eq!(net.conflict_set(&m, t("t4")).unwrap(), ids(&net, &["t3", "t4"]));
        assert_eq!(
            net.conflict_set(&m, t("t3")).unwrap(),
            ids(&net, &["t2", "t3", "t4"])
        );
    }

    #[test]
    fn construction_errors() {
        let one = ratio(1, 1);
        let dup = NetBuilder::new("i", "o")
            .transition("i", &["i"], &["o"], one.clone(), 0)
            .build();
        assert_eq!(dup.unwrap_err(), NetError::DuplicateId("i".into()));
        let zero = NetBuilder::new("i", "o")
            .transition("t", &["i"], &["o"], ratio(0, 1), 0)
            .build();
        assert_eq!(zero.unwrap_err(), NetError::NonPositiveWeight("t".into()));
        let empty = NetBuilder::new("i", "o")
            .transition("t", &[], &["o"], one.clone(), 0)
            .build();
        assert_eq!(empty.unwrap_err(), NetError::EmptyPreset("t".into()));
        let same = WorkflowNet::new(vec!["i".into()], vec![], "i", "i");
        assert!(matches!(same, Err(NetError::InitialIsFinal(_))));
    }
}
