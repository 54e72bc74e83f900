//! Small nets used throughout the documentation and tests.

use crate::net::{NetBuilder, WorkflowNet};
use crate::ratio;

fn one() -> crate::Rational {
    ratio(1, 1)
}

/// The running example: `t1` forks into a loop-or-exit choice on `p1`
/// (`t2` weight 1 loops, `t3` weight 4 exits) and a single task `t4` on
/// `p3`; `t5` joins. Its expected time is 47/5.
pub fn example_net() -> WorkflowNet {
    NetBuilder::new("i", "o")
        .place("p1")
        .place("p2")
        .place("p3")
        .place("p4")
        .place("o")
        .transition("t1", &["i"], &["p1", "p3"], one(), 1)
        .transition("t2", &["p1"], &["p1"], ratio(1, 1), 4)
        .transition("t3", &["p1"], &["p2"], ratio(4, 1), 2)
        .transition("t4", &["p3"], &["p4"], one(), 5)
        .transition("t5", &["p2", "p4"], &["o"], one(), 3)
        .build()
        .expect("valid net")
}

/// The running example without its join, which deadlocks at `{p2,p4}`.
pub fn example_without_t5() -> WorkflowNet {
    NetBuilder::from_net(&example_net())
        .remove_transition("t5")
        .build()
        .expect("valid net")
}

/// `i -> t -> o` with duration `tau`.
pub fn trivial_net(tau: u64) -> WorkflowNet {
    NetBuilder::new("i", "o")
        .transition("t", &["i"], &["o"], one(), tau)
        .build()
        .expect("valid net")
}

/// Confused: firing `t4` shrinks the conflict set of `t2`.
pub fn n1_net() -> WorkflowNet {
    NetBuilder::new("i", "o")
        .transition("t1", &["i"], &["p1", "p2"], one(), 1)
        .transition("t2", &["p1"], &["p3"], one(), 1)
        .transition("t3", &["p1", "p2"], &["p3", "p4"], one(), 1)
        .transition("t4", &["p2"], &["p4"], one(), 1)
        .transition("t5", &["p3"], &["p3"], one(), 1)
        .transition("t6", &["p3", "p4"], &["o"], one(), 1)
        .build()
        .expect("valid net")
}

pub fn n2_net() -> WorkflowNet {
    NetBuilder::new("i", "o")
        .transition("t1", &["i"], &["p1", "p2"], one(), 1)
        .transition("t2", &["p1"], &["p3"], one(), 1)
        .transition("t3", &["p1"], &["p1"], one(), 1)
        .transition("t4", &["p2"], &["p2"], one(), 1)
        .transition("t5", &["p2", "p3"], &["o"], one(), 1)
        .build()
        .expect("valid net")
}

/// Confusion-free but not free-choice.
pub fn n3_net() -> WorkflowNet {
    NetBuilder::new("i", "o")
        .transition("t1", &["i"], &["p1", "p3"], one(), 1)
        .transition("t2", &["i"], &["p1", "p2"], one(), 1)
        .transition("t3", &["p1"], &["p4"], one(), 1)
        .transition("t5", &["p3", "p4"], &["o"], one(), 1)
        .transition("t6", &["p2", "p4"], &["o"], one(), 1)
        .build()
        .expect("valid net")
}

/// Free-choice with a loop back through `t5`.
pub fn n4_net() -> WorkflowNet {
    NetBuilder::new("i", "o")
        .transition("t1", &["i"], &["p1"], one(), 1)
        .transition("t2", &["i"], &["p2", "p3"], one(), 1)
        .transition("t3", &["p2"], &["p4"], one(), 1)
        .transition("t4", &["p3"], &["p5"], one(), 1)
        .transition("t5", &["p4", "p5"], &["p2", "p3"], one(), 1)
        .transition("t6", &["p1"], &["o"], one(), 1)
        .transition("t7", &["p4", "p5"], &["o"], one(), 1)
        .build()
        .expect("valid net")
}

/// A PERT network with three source-to-sink paths; every edge has
/// probability `p`.
pub fn sample_pert(p: crate::Rational) -> crate::pert::PertNetwork {
    use crate::pert::{PertEdge, PertNetwork};
    let edges = [
        ("e1", "s", "v1"),
        ("e2", "s", "v2"),
        ("e3", "v1", "v3"),
        ("e4", "v1", "v4"),
        ("e5", "v2", "v4"),
        ("e6", "v3", "t"),
        ("e7", "v4", "t"),
    ];
    PertNetwork {
        vertices: ["s", "v1", "v2", "v3", "v4", "t"].map(String::from).to_vec(),
        source: "s".into(),
        sink: "t".into(),
        edges: edges
            .iter()
            .map(|&(id, from, to)| PertEdge { id: id.into(), from: from.into(), to: to.into(), p: p.clone() })
            .collect(),
    }
}
