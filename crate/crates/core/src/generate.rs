//! Random sound free-choice nets.
//!
//! Generation starts from `i -> t -> o` and repeatedly refines a task (a
//! transition with one input and one output place) by a block with a single
//! entry and a single exit:
//!
//! - sequence: `a -> t1 -> m -> t2 -> b` (one new place)
//! - choice: a second task `a -> b` (no new place)
//! - parallel: a split, two tasks and a join (four new places)
//! - loop: entry, body, then a choice between exit and a back edge to the
//!   body's input (two new places)
//!
//! Each block is sound and free-choice on its own, so the result is sound,
//! 1-safe and free-choice.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{NetBuilder, WorkflowNet};
use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorParams {
    /// Target place count, including `i` and `o`. Values below 3 give the
    /// single-transition net.
    pub places: usize,
    /// Inclusive range of transition durations.
    pub times: (u64, u64),
    /// Inclusive range of integer transition weights; the lower end is
    /// raised to 1.
    pub weights: (u64, u64),
    pub allow_loops: bool,
    /// Upper bound on choice refinements, which add no places.
    pub max_choices: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams { places: 10, times: (1, 10), weights: (1, 10), allow_loops: true, max_choices: 8 }
    }
}

struct Task {
    pre: String,
    post: String,
}

struct Draft {
    places: usize,
    tasks: Vec<Task>,
    /// Splits and joins: (preset, postset).
    fixed: Vec<(Vec<String>, Vec<String>)>,
}

impl Draft {
    fn fresh(&mut self) -> String {
        self.places += 1;
        format!("p{}", self.places - 2)
    }
}

pub fn generate_net(params: &GeneratorParams, seed: u64) -> WorkflowNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Draft {
        places: 2,
        tasks: vec![Task { pre: "i".into(), post: "o".into() }],
        fixed: Vec::new(),
    };
    let mut choices = 0;
    while d.places < params.places {
        let budget = params.places - d.places;
        let mut ops = vec![0u8];
        if choices < params.max_choices {
            ops.push(1);
        }
        if budget >= 4 {
            ops.push(2);
        }
        if budget >= 2 && params.allow_loops {
            ops.push(3);
        }
        let k = rng.gen_range(0..d.tasks.len());
        let Task { pre: a, post: b } = d.tasks.swap_remove(k);
        match *ops.choose(&mut rng).expect("non-empty") {
            0 => {
                let m = d.fresh();
                d.tasks.push(Task { pre: a, post: m.clone() });
                d.tasks.push(Task { pre: m, post: b });
            }
            1 => {
                choices += 1;
                d.tasks.push(Task { pre: a.clone(), post: b.clone() });
                d.tasks.push(Task { pre: a, post: b });
            }
            2 => {
                let (c1, c2, e1, e2) = (d.fresh(), d.fresh(), d.fresh(), d.fresh());
                d.fixed.push((vec![a], vec![c1.clone(), c2.clone()]));
                d.fixed.push((vec![e1.clone(), e2.clone()], vec![b]));
                d.tasks.push(Task { pre: c1, post: e1 });
                d.tasks.push(Task { pre: c2, post: e2 });
            }
            _ => {
                let (m1, m2) = (d.fresh(), d.fresh());
                d.tasks.push(Task { pre: a, post: m1.clone() });
                d.tasks.push(Task { pre: m1.clone(), post: m2.clone() });
                d.tasks.push(Task { pre: m2.clone(), post: b });
                d.tasks.push(Task { pre: m2, post: m1 });
            }
        }
    }

    let (wlo, whi) = (params.weights.0.max(1), params.weights.1.max(params.weights.0.max(1)));
    let (tlo, thi) = (params.times.0, params.times.1.max(params.times.0));
    let mut builder = NetBuilder::new("i", "o");
    for p in 1..=d.places - 2 {
        builder = builder.place(&format!("p{p}"));
    }
    builder = builder.place("o");
    let arcs = d
        .tasks
        .iter()
        .map(|t| (vec![t.pre.clone()], vec![t.post.clone()]))
        .chain(d.fixed);
    for (n, (pre, post)) in arcs.enumerate() {
        let pre: Vec<&str> = pre.iter().map(String::as_str).collect();
        let post: Vec<&str> = post.iter().map(String::as_str).collect();
        let w = Rational::from_integer(rng.gen_range(wlo..=whi).into());
        builder.add_transition(&format!("t{}", n + 1), &pre, &post, w, rng.gen_range(tlo..=thi));
    }
    builder.build().expect("generated net is well formed")
}

/// `width` branches of `length` stages between a split and a join. Every
/// stage is a weighted choice between two tasks; only on branch 0 do the two
/// tasks differ in duration. The reachable markings number
/// `(length + 1)^width + 2`, while timing uncertainty stays confined to one
/// branch.
pub fn parallel_pipelines(width: usize, length: usize, seed: u64) -> WorkflowNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NetBuilder::new("i", "o");
    let place = |j: usize, s: usize| format!("b{j}s{s}");
    let firsts: Vec<String> = (0..width).map(|j| place(j, 0)).collect();
    let lasts: Vec<String> = (0..width).map(|j| place(j, length)).collect();
    let one = Rational::from_integer(1.into());
    let three = Rational::from_integer(3.into());
    b.add_transition("split", &["i"], &firsts.iter().map(String::as_str).collect::<Vec<_>>(), one.clone(), 0);
    for j in 0..width {
        for s in 0..length {
            let (from, to) = (place(j, s), place(j, s + 1));
            let fast = rng.gen_range(1..=3);
            let slow = if j == 0 { fast + 1 } else { fast };
            b.add_transition(&format!("f{j}_{s}"), &[&from], &[&to], three.clone(), fast);
            b.add_transition(&format!("s{j}_{s}"), &[&from], &[&to], one.clone(), slow);
        }
    }
    b.add_transition("join", &lasts.iter().map(String::as_str).collect::<Vec<_>>(), &["o"], one, 0);
    b.build().expect("well formed")
}

/// Makes a sound net unsound: removes every consumer of one reachable
/// internal place, so a token placed there is stuck. Returns the net and the
/// place name, or `None` if the net has no internal place.
pub fn break_net(net: &WorkflowNet, seed: u64) -> Option<(WorkflowNet, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let internal: Vec<usize> = (0..net.place_count())
        .filter(|&p| p != net.initial_place() && p != net.final_place() && !net.producers(p).is_empty())
        .collect();
    let &p = internal.choose(&mut rng)?;
    let mut builder = NetBuilder::from_net(net);
    for &t in net.consumers(p) {
        builder = builder.remove_transition(net.transition_name(t));
    }
    Some((builder.build().expect("still well formed"), net.place_name(p).to_string()))
}
