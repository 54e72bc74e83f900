//! Structural and behavioural preconditions: workflow shape, 1-safeness,
//! soundness, free-choice and confusion-freeness.

use std::collections::VecDeque;
use std::fmt;

use indexmap::IndexSet;
use serde::Serialize;
use thiserror::Error;

use crate::net::{Marking, PlaceId, TransitionId, WorkflowNet};

/// Default cap on the number of reachable markings explored.
pub const DEFAULT_MARKING_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("net is not 1-safe: firing {} puts a second token on `{place}`", .sequence.join(" "))]
    Unsafe1 {
        /// Firing sequence from the initial marking whose last transition
        /// violates 1-safeness.
        sequence: Vec<String>,
        place: String,
    },
    #[error("more than {cap} reachable markings")]
    StateExplosion { cap: usize },
}

/// Explicit reachable-marking graph.
#[derive(Debug, Clone)]
pub struct ReachabilityGraph {
    pub states: IndexSet<Marking>,
    pub edges: Vec<(usize, TransitionId, usize)>,
    pub initial: usize,
}

impl ReachabilityGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn successors(&self) -> Vec<Vec<(TransitionId, usize)>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for &(from, t, to) in &self.edges {
            out[from].push((t, to));
        }
        out
    }

    /// True when the graph has no cycle (self-loops included).
    pub fn is_acyclic(&self) -> bool {
        let n = self.states.len();
        let mut indegree = vec![0usize; n];
        for &(_, _, to) in &self.edges {
            indegree[to] += 1;
        }
        let succ = self.successors();
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| indegree[s] == 0).collect();
        let mut seen = 0;
        while let Some(s) = queue.pop_front() {
            seen += 1;
            for &(_, to) in &succ[s] {
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    queue.push_back(to);
                }
            }
        }
        seen == n
    }
}

/// Breadth-first closure of `fire` from the initial marking. Transitions are
/// tried in index order, so state numbering is deterministic.
pub fn explore(net: &WorkflowNet, cap: usize) -> Result<ReachabilityGraph, ExploreError> {
    let mut states = IndexSet::new();
    let mut parent: Vec<Option<(usize, TransitionId)>> = Vec::new();
    let mut edges = Vec::new();
    states.insert(net.initial_marking());
    parent.push(None);

    let mut next = 0;
    while next < states.len() {
        let m = states[next].clone();
        for t in net.enabled_transitions(&m) {
            let succ = match net.fire(&m, t) {
                Ok(s) => s,
                Err(crate::net::NetError::UnsafeFiring { place, .. }) => {
                    let mut sequence = vec![net.transition_name(t).to_string()];
                    let mut cur = next;
                    while let Some((p, pt)) = parent[cur] {
                        sequence.push(net.transition_name(pt).to_string());
                        cur = p;
                    }
                    sequence.reverse();
                    return Err(ExploreError::Unsafe1 { sequence, place });
                }
                Err(e) => unreachable!("enabled transition failed to fire: {e}"),
            };
            let (idx, fresh) = states.insert_full(succ);
            if fresh {
                if states.len() > cap {
                    return Err(ExploreError::StateExplosion { cap });
                }
                parent.push(Some((next, t)));
            }
            edges.push((next, t, idx));
        }
        next += 1;
    }
    Ok(ReachabilityGraph { states, edges, initial: 0 })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeViolation {
    InitialHasInput { transition: String },
    FinalHasOutput { transition: String },
    NotStronglyConnected { node: String },
}

impl fmt::Display for ShapeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeViolation::InitialHasInput { transition } => {
                write!(f, "initial place has input transition `{transition}`")
            }
            ShapeViolation::FinalHasOutput { transition } => {
                write!(f, "final place has output transition `{transition}`")
            }
            ShapeViolation::NotStronglyConnected { node } => {
                write!(f, "`{node}` is not on a cycle through the final-to-initial arc")
            }
        }
    }
}

/// Initial place without inputs, final place without outputs, and the graph
/// with an extra arc from the final to the initial place strongly connected.
pub fn check_workflow_shape(net: &WorkflowNet) -> Result<(), Vec<ShapeViolation>> {
    let mut problems = Vec::new();
    let (i, o) = (net.initial_place(), net.final_place());
    for &t in net.producers(i) {
        problems.push(ShapeViolation::InitialHasInput {
            transition: net.transition_name(t).to_string(),
        });
    }
    for &t in net.consumers(o) {
        problems.push(ShapeViolation::FinalHasOutput {
            transition: net.transition_name(t).to_string(),
        });
    }

    // Nodes: places 0..P, transitions P..P+T.
    let places = net.place_count();
    let total = places + net.transition_count();
    let search = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; total];
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(node) = stack.pop() {
            let mut push = |n: usize, seen: &mut Vec<bool>| {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if node < places {
                let next = if forward { net.consumers(node) } else { net.producers(node) };
                for &t in next {
                    push(places + t, &mut seen);
                }
                if forward && node == o {
                    push(i, &mut seen);
                }
                if !forward && node == i {
                    push(o, &mut seen);
                }
            } else {
                let rec = net.transition(node - places);
                let next = if forward { &rec.postset } else { &rec.preset };
                for &p in next {
                    push(p, &mut seen);
                }
            }
        }
        seen
    };
    let fwd = search(true);
    let bwd = search(false);
    for node in 0..total {
        if !(fwd[node] && bwd[node]) {
            let name = if node < places {
                net.place_name(node)
            } else {
                net.transition_name(node - places)
            };
            problems.push(ShapeViolation::NotStronglyConnected { node: name.to_string() });
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}

/// `{o}` reachable from every reachable marking. On failure returns a
/// marking that cannot reach `{o}`, preferring a deadlock.
pub fn check_soundness(net: &WorkflowNet, rg: &ReachabilityGraph) -> Result<(), Marking> {
    let n = rg.len();
    let mut reaches = vec![false; n];
    if let Some(fin) = rg.states.get_index_of(&net.final_marking()) {
        let mut preds = vec![Vec::new(); n];
        for &(from, _, to) in &rg.edges {
            preds[to].push(from);
        }
        let mut stack = vec![fin];
        reaches[fin] = true;
        while let Some(s) = stack.pop() {
            for &p in &preds[s] {
                if !reaches[p] {
                    reaches[p] = true;
                    stack.push(p);
                }
            }
        }
    }
    let mut has_succ = vec![false; n];
    for &(from, _, _) in &rg.edges {
        has_succ[from] = true;
    }
    let stuck = (0..n).filter(|&s| !reaches[s]);
    let witness = stuck
        .clone()
        .find(|&s| !has_succ[s])
        .or_else(|| stuck.clone().next());
    match witness {
        None => Ok(()),
        Some(s) => Err(rg.states[s].clone()),
    }
}

/// Places with overlapping postsets have identical postsets. On failure
/// returns the offending pair of places.
pub fn check_free_choice(net: &WorkflowNet) -> Result<(), (PlaceId, PlaceId)> {
    let mut postsets: Vec<Vec<TransitionId>> =
        (0..net.place_count()).map(|p| net.consumers(p).to_vec()).collect();
    for ps in &mut postsets {
        ps.sort_unstable();
    }
    // Overlapping postsets share a transition, so it suffices to compare the
    // places within each preset.
    for t in net.transitions() {
        let first = t.preset[0];
        for &p in &t.preset[1..] {
            if postsets[p] != postsets[first] {
                return Err((first, p));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionWitness {
    pub marking: Marking,
    pub fired: TransitionId,
    pub concurrent: TransitionId,
}

/// For every reachable `M`, enabled `t` and `u` concurrent with `t`:
/// `C(u,M) = C(u, M∖•t) = C(u, (M∖•t)∪t•)`.
pub fn check_confusion_free(
    net: &WorkflowNet,
    rg: &ReachabilityGraph,
) -> Result<(), ConfusionWitness> {
    for m in &rg.states {
        let enabled = net.enabled_transitions(m);
        for &u in &enabled {
            let here = net.conflict_set(m, u).expect("u enabled at M");
            for &t in &enabled {
                if u == t || !net.independent(t, u) {
                    continue;
                }
                let rec = net.transition(t);
                let mut removed = m.clone();
                for &p in &rec.preset {
                    removed.remove(p);
                }
                let mut added = removed.clone();
                for &p in &rec.postset {
                    added.insert(p);
                }
                let after_removal = net.conflict_set(&removed, u).expect("u stays enabled");
                let after_firing = net.conflict_set(&added, u).expect("u stays enabled");
                if here != after_removal || here != after_firing {
                    return Err(ConfusionWitness { marking: m.clone(), fired: t, concurrent: u });
                }
            }
        }
    }
    Ok(())
}

/// Anything that makes a net fall outside the analysable class, rendered
/// with place and transition names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    Shape { problems: Vec<String> },
    NotOneSafe { sequence: Vec<String>, place: String },
    StateExplosion { cap: usize },
    Unsound { marking: Vec<String> },
    NotFreeChoice { places: [String; 2] },
    Confusion { marking: Vec<String>, fired: String, concurrent: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Shape { problems } => write!(f, "not a workflow net: {}", problems.join("; ")),
            Diagnostic::NotOneSafe { sequence, place } => write!(
                f,
                "not 1-safe: `{place}` receives a second token after {}",
                sequence.join(" ")
            ),
            Diagnostic::StateExplosion { cap } => {
                write!(f, "reachability exploration stopped at {cap} markings")
            }
            Diagnostic::Unsound { marking } => write!(
                f,
                "unsound: the final marking is unreachable from {{{}}}",
                marking.join(",")
            ),
            Diagnostic::NotFreeChoice { places } => write!(
                f,
                "not free-choice: `{}` and `{}` have overlapping but different postsets",
                places[0], places[1]
            ),
            Diagnostic::Confusion { marking, fired, concurrent } => write!(
                f,
                "confusion at {{{}}}: firing `{fired}` changes the conflict set of `{concurrent}`",
                marking.join(",")
            ),
        }
    }
}

/// Summary of every structural check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralReport {
    pub is_workflow_shape: bool,
    pub is_1safe: bool,
    pub is_sound: bool,
    pub is_free_choice: bool,
    pub is_confusion_free: bool,
    /// Markings explored; when exploration aborted, the count at that point.
    pub reachable_marking_count: usize,
    pub exploration_complete: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl StructuralReport {
    /// Workflow-shaped, 1-safe, confusion-free and sound.
    pub fn is_valid(&self) -> bool {
        self.is_workflow_shape && self.is_1safe && self.is_confusion_free && self.is_sound
    }

    /// First diagnostic, in check order.
    pub fn witness(&self) -> Option<&Diagnostic> {
        self.diagnostics.first()
    }
}

pub(crate) fn marking_names(net: &WorkflowNet, m: &Marking) -> Vec<String> {
    m.places().map(|p| net.place_name(p).to_string()).collect()
}

/// Runs every check. The reachability graph is returned when exploration
/// completed.
pub fn analyze_structure(
    net: &WorkflowNet,
    marking_cap: usize,
) -> (StructuralReport, Option<ReachabilityGraph>) {
    let mut diagnostics = Vec::new();
    let shape = check_workflow_shape(net);
    if let Err(problems) = &shape {
        diagnostics.push(Diagnostic::Shape {
            problems: problems.iter().map(|p| p.to_string()).collect(),
        });
    }
    let free_choice = check_free_choice(net);
    let free_choice_diag = free_choice.err().map(|(a, b)| Diagnostic::NotFreeChoice {
        places: [net.place_name(a).to_string(), net.place_name(b).to_string()],
    });

    let mut report = StructuralReport {
        is_workflow_shape: shape.is_ok(),
        is_1safe: false,
        is_sound: false,
        is_free_choice: free_choice.is_ok(),
        // Free-choice implies confusion-free structurally; refined below once
        // the reachable markings are known.
        is_confusion_free: free_choice.is_ok(),
        reachable_marking_count: 0,
        exploration_complete: false,
        diagnostics: Vec::new(),
    };

    let rg = match explore(net, marking_cap) {
        Ok(rg) => rg,
        Err(ExploreError::Unsafe1 { sequence, place }) => {
            diagnostics.push(Diagnostic::NotOneSafe { sequence, place });
            diagnostics.extend(free_choice_diag);
            report.diagnostics = diagnostics;
            return (report, None);
        }
        Err(ExploreError::StateExplosion { cap }) => {
            report.is_1safe = true;
            report.reachable_marking_count = cap;
            diagnostics.push(Diagnostic::StateExplosion { cap });
            diagnostics.extend(free_choice_diag);
            report.diagnostics = diagnostics;
            return (report, None);
        }
    };
    report.is_1safe = true;
    report.exploration_complete = true;
    report.reachable_marking_count = rg.len();

    // Free-choice already settles confusion-freeness; the marking-level
    // check is only needed for the remaining nets.
    match if report.is_free_choice { Ok(()) } else { check_confusion_free(net, &rg) } {
        Ok(()) => report.is_confusion_free = true,
        Err(w) => {
            report.is_confusion_free = false;
            diagnostics.push(Diagnostic::Confusion {
                marking: marking_names(net, &w.marking),
                fired: net.transition_name(w.fired).to_string(),
                concurrent: net.transition_name(w.concurrent).to_string(),
            });
        }
    }
    match check_soundness(net, &rg) {
        Ok(()) => report.is_sound = true,
        Err(m) => diagnostics.push(Diagnostic::Unsound { marking: marking_names(net, &m) }),
    }
    diagnostics.extend(free_choice_diag);
    report.diagnostics = diagnostics;
    (report, Some(rg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetBuilder;
    use crate::ratio;
    use crate::samples::*;

    fn names(net: &WorkflowNet, m: &Marking) -> Vec<String> {
        marking_names(net, m)
    }

    #[test]
    fn example_explores_six_markings() {
        let net = example_net();
        let rg = explore(&net, DEFAULT_MARKING_CAP).unwrap();
        let expected = [
            vec!["i"],
            vec!["p1", "p3"],
            vec!["p1", "p4"],
            vec!["p2", "p3"],
            vec!["p2", "p4"],
            vec!["o"],
        ];
        assert_eq!(rg.len(), 6);
        for m in expected {
            assert!(rg.states.contains(&net.marking(&m).unwrap()), "{m:?}");
        }
        assert!(!rg.is_acyclic());
    }

    #[test]
    fn exploration_is_deterministic() {
        let net = example_net();
        let a = explore(&net, 100).unwrap();
        let b = explore(&net, 100).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.edges, b.edges);
        for &(from, t, to) in &a.edges {
            assert_eq!(net.fire(&a.states[from], t).unwrap(), a.states[to]);
        }
    }

    #[test]
    fn single_transition_net() {
        let net = trivial_net(7);
        let rg = explore(&net, 10).unwrap();
        assert_eq!(rg.len(), 2);
        assert!(rg.is_acyclic());
        assert!(check_workflow_shape(&net).is_ok());
        assert!(check_soundness(&net, &rg).is_ok());
    }

    #[test]
    fn state_cap() {
        let net = example_net();
        assert_eq!(explore(&net, 3).unwrap_err(), ExploreError::StateExplosion { cap: 3 });
    }

    #[test]
    fn unsafe_net_reports_sequence() {
        // Adding an arc t7 -> p1 to N4 keeps soundness but breaks 1-safeness.
        let mut b = NetBuilder::from_net(&n4_net());
        b.transition_mut("t7").unwrap().post.push("p1".into());
        let net = b.build().unwrap();
        match explore(&net, 1000) {
            Err(ExploreError::Unsafe1 { sequence, place }) => {
                assert!(place == "p1" || place == "o", "{place}");
                assert!(net.transition_ids(
                    &sequence.iter().map(String::as_str).collect::<Vec<_>>()
                ).is_ok());
            }
            other => panic!("expected Unsafe1, got {other:?}"),
        }
        let (report, rg) = analyze_structure(&net, 1000);
        assert!(!report.is_1safe);
        assert!(rg.is_none());
        assert!(matches!(report.witness(), Some(Diagnostic::NotOneSafe { .. })));
    }

    #[test]
    fn workflow_shape() {
        assert!(check_workflow_shape(&example_net()).is_ok());
        let isolated = NetBuilder::from_net(&example_net()).place("lonely").build().unwrap();
        let err = check_workflow_shape(&isolated).unwrap_err();
        assert_eq!(
            err,
            vec![ShapeViolation::NotStronglyConnected { node: "lonely".into() }]
        );
        let mut b = NetBuilder::from_net(&example_net());
        b.add_transition("back", &["o"], &["p1"], ratio(1, 1), 0);
        let err = check_workflow_shape(&b.build().unwrap()).unwrap_err();
        assert!(err.contains(&ShapeViolation::FinalHasOutput { transition: "back".into() }));
    }

    #[test]
    fn soundness() {
        let net = example_net();
        let rg = explore(&net, 100).unwrap();
        assert!(check_soundness(&net, &rg).is_ok());

        let broken = example_without_t5();
        let rg = explore(&broken, 100).unwrap();
        let witness = check_soundness(&broken, &rg).unwrap_err();
        assert_eq!(names(&broken, &witness), vec!["p2", "p4"]);

        // N4 with an extra arc p4 -> t6 is unsound.
        let mut b = NetBuilder::from_net(&n4_net());
        b.transition_mut("t6").unwrap().pre.push("p4".into());
        let net = b.build().unwrap();
        let rg = explore(&net, 100).unwrap();
        assert_eq!(names(&net, &check_soundness(&net, &rg).unwrap_err()), vec!["p1"]);
    }

    #[test]
    fn small_sample_nets_are_sound_and_safe() {
        for net in [n1_net(), n2_net(), n3_net(), n4_net()] {
            let (report, _) = analyze_structure(&net, 1000);
            assert!(report.is_workflow_shape && report.is_1safe && report.is_sound, "{report:?}");
        }
    }

    #[test]
    fn free_choice() {
        assert!(check_free_choice(&example_net()).is_ok());
        assert!(check_free_choice(&n4_net()).is_ok());
        let n3 = n3_net();
        let (a, b) = check_free_choice(&n3).unwrap_err();
        let mut pair = [n3.place_name(a), n3.place_name(b)];
        pair.sort();
        assert_eq!(pair, ["p3", "p4"]);
    }

    #[test]
    fn confusion() {
        let n1 = n1_net();
        let rg = explore(&n1, 100).unwrap();
        let w = check_confusion_free(&n1, &rg).unwrap_err();
        assert_eq!(names(&n1, &w.marking), vec!["p1", "p2"]);
        assert_eq!(n1.transition_name(w.fired), "t4");
        assert_eq!(n1.transition_name(w.concurrent), "t2");

        let m = n1.marking(&["p1", "p2"]).unwrap();
        let t2 = n1.transition_id("t2").unwrap();
        let reduced = n1.marking(&["p1"]).unwrap();
        assert_eq!(n1.conflict_set(&reduced, t2).unwrap(), vec![t2]);
        assert_ne!(n1.conflict_set(&m, t2).unwrap(), vec![t2]);

        assert!(check_confusion_free(&n2_net(), &explore(&n2_net(), 100).unwrap()).is_err());
        for net in [example_net(), n3_net(), n4_net()] {
            let rg = explore(&net, 100).unwrap();
            assert!(check_confusion_free(&net, &rg).is_ok());
        }
    }

    #[test]
    fn marked_graph_is_confusion_free() {
        let net = NetBuilder::new("i", "o")
            .transition("split", &["i"], &["a", "b"], ratio(1, 1), 1)
            .transition("left", &["a"], &["c"], ratio(1, 1), 2)
            .transition("right", &["b"], &["d"], ratio(1, 1), 3)
            .transition("join", &["c", "d"], &["o"], ratio(1, 1), 0)
            .build()
            .unwrap();
        let (report, _) = analyze_structure(&net, 100);
        assert!(report.is_valid() && report.is_free_choice);
    }

    #[test]
    fn report_for_unsound_net() {
        let (report, rg) = analyze_structure(&example_without_t5(), 100);
        assert!(rg.is_some());
        assert!(!report.is_valid());
        assert!(!report.is_sound && !report.is_workflow_shape);
        assert!(report
            .diagnostics
            .contains(&Diagnostic::Unsound { marking: vec!["p2".into(), "p4".into()] }));
    }
}
