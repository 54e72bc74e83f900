//! Ground-truth engines that share no code with the chain construction:
//! run enumeration on concrete timestamps, Monte Carlo simulation under a
//! random scheduler, and random Mazurkiewicz rewriting of runs.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::net::{Marking, TransitionId, WorkflowNet};
use crate::timing::{set_start, upd, TimestampVector, TimingError};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("deadlock after {sequence:?}")]
    Deadlock { sequence: Vec<String> },
    #[error("run longer than {cap} transitions; the net is probably unsound")]
    NonTermination { cap: usize },
    #[error(transparent)]
    Timing(#[from] TimingError),
}

/// How the enumeration picks among the conflict sets enabled at a marking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerRule {
    /// Minimal start time on concrete timestamps, ties to the set holding
    /// the smallest transition index.
    #[default]
    Earliest,
    /// The set holding the smallest transition index.
    Leftmost,
    /// The set holding the largest transition index.
    Rightmost,
}

impl std::str::FromStr for SchedulerRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "earliest" => Ok(SchedulerRule::Earliest),
            "leftmost" => Ok(SchedulerRule::Leftmost),
            "rightmost" => Ok(SchedulerRule::Rightmost),
            other => Err(format!("unknown scheduler `{other}` (earliest|leftmost|rightmost)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedRun {
    pub sequence: Vec<TransitionId>,
    pub probability: Rational,
    pub time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Estimate {
    Exact(Rational),
    /// Sum over completed runs, and the probability mass they cover.
    Bounds { lower: Rational, covered_mass: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationResult {
    pub estimate: Estimate,
    pub runs_explored: usize,
    pub branches_pruned: usize,
}

impl EnumerationResult {
    pub fn lower(&self) -> &Rational {
        match &self.estimate {
            Estimate::Exact(v) => v,
            Estimate::Bounds { lower, .. } => lower,
        }
    }

    pub fn covered_mass(&self) -> Rational {
        match &self.estimate {
            Estimate::Exact(_) => Rational::one(),
            Estimate::Bounds { covered_mass, .. } => covered_mass.clone(),
        }
    }

    pub fn exact(&self) -> Option<&Rational> {
        match &self.estimate {
            Estimate::Exact(v) => Some(v),
            Estimate::Bounds { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationOptions {
    pub rule: SchedulerRule,
    /// Branches whose probability falls below this are dropped. Zero
    /// disables truncation.
    pub mass_epsilon: Rational,
    pub max_depth: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            rule: SchedulerRule::Earliest,
            mass_epsilon: Rational::zero(),
            max_depth: 10_000,
        }
    }
}

fn chosen_set(
    net: &WorkflowNet,
    x: &TimestampVector,
    rule: SchedulerRule,
) -> Result<Option<Vec<TransitionId>>, TimingError> {
    let mut sets = net.conflict_sets(&x.support(net.place_count()));
    if sets.is_empty() {
        return Ok(None);
    }
    // `conflict_sets` lists sets sorted by their smallest member.
    Ok(Some(match rule {
        SchedulerRule::Leftmost => sets.swap_remove(0),
        SchedulerRule::Rightmost => {
            let idx = (0..sets.len()).max_by_key(|&i| sets[i].iter().max().copied()).expect("non-empty");
            sets.swap_remove(idx)
        }
        SchedulerRule::Earliest => {
            let mut best = 0;
            let mut best_start = u64::MAX;
            for (i, c) in sets.iter().enumerate() {
                let s = set_start(net, x, c)?;
                if s < best_start {
                    best = i;
                    best_start = s;
                }
            }
            sets.swap_remove(best)
        }
    }))
}

/// Depth-first walk of the scheduler's run tree, calling `visit` on every
/// completed run. Returns the number of pruned branches.
pub fn for_each_run(
    net: &WorkflowNet,
    options: &EnumerationOptions,
    mut visit: impl FnMut(&[TransitionId], &Rational, u64),
) -> Result<usize, OracleError> {
    struct Frame {
        stamps: TimestampVector,
        probability: Rational,
        depth: usize,
        via: Option<TransitionId>,
    }
    let final_place = net.final_place();
    let mut sequence: Vec<TransitionId> = Vec::new();
    let mut stack = vec![Frame {
        stamps: TimestampVector::initial(net),
        probability: Rational::one(),
        depth: 0,
        via: None,
    }];
    let mut pruned = 0;
    while let Some(frame) = stack.pop() {
        sequence.truncate(frame.depth.saturating_sub(1));
        if let Some(t) = frame.via {
            sequence.push(t);
        }
        if frame.stamps.support_is(final_place) {
            visit(&sequence, &frame.probability, frame.stamps.max_entry().unwrap_or(0));
            continue;
        }
        if frame.depth >= options.max_depth {
            return Err(OracleError::NonTermination { cap: options.max_depth });
        }
        let Some(set) = chosen_set(net, &frame.stamps, options.rule)? else {
            return Err(OracleError::Deadlock {
                sequence: net.transition_names(&sequence).iter().map(|s| s.to_string()).collect(),
            });
        };
        let total = net.weight_of(&set);
        // Reverse so the smallest transition is explored first.
        for &t in set.iter().rev() {
            let p = &frame.probability * &net.transition(t).weight / &total;
            if !options.mass_epsilon.is_zero() && p < options.mass_epsilon {
                pruned += 1;
                continue;
            }
            stack.push(Frame {
                stamps: upd(net, &frame.stamps, t)?,
                probability: p,
                depth: frame.depth + 1,
                via: Some(t),
            });
        }
    }
    Ok(pruned)
}

/// `Σ time(σ)·P(σ)` over the runs compatible with the chosen rule.
pub fn enumerate_expected_time(
    net: &WorkflowNet,
    options: &EnumerationOptions,
) -> Result<EnumerationResult, OracleError> {
    let mut value = Rational::zero();
    let mut mass = Rational::zero();
    let mut runs = 0;
    let pruned = for_each_run(net, options, |_, p, time| {
        value += p * Rational::from_integer(time.into());
        mass += p;
        runs += 1;
    })?;
    let estimate = if pruned == 0 {
        Estimate::Exact(value)
    } else {
        Estimate::Bounds { lower: value, covered_mass: mass }
    };
    Ok(EnumerationResult { estimate, runs_explored: runs, branches_pruned: pruned })
}

/// Every run of the chosen scheduler, or an error past `max_runs`.
pub fn enumerate_runs(
    net: &WorkflowNet,
    options: &EnumerationOptions,
    max_runs: usize,
) -> Result<Vec<WeightedRun>, OracleError> {
    let mut out = Vec::new();
    let mut overflow = false;
    for_each_run(net, options, |seq, p, time| {
        if out.len() < max_runs {
            out.push(WeightedRun { sequence: seq.to_vec(), probability: p.clone(), time });
        } else {
            overflow = true;
        }
    })?;
    if overflow {
        return Err(OracleError::NonTermination { cap: max_runs });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Simulation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationOptions {
    pub runs: u64,
    pub seed: u64,
    pub step_cap: u64,
    pub batch_size: u64,
}

impl SimulationOptions {
    pub fn new(runs: u64, seed: u64) -> Self {
        SimulationOptions { runs, seed, step_cap: 1_000_000, batch_size: 1 << 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub mean: f64,
    pub std_error: f64,
    /// Runs that reached the final marking.
    pub samples: u64,
    pub step_cap_exceeded: u64,
    pub deadlocked: u64,
    pub unsafe_firings: u64,
}

/// Flat copy of the net tuned for the sampling loop.
struct Compiled {
    pre: Vec<Vec<usize>>,
    post: Vec<Vec<usize>>,
    duration: Vec<u64>,
    consumers: Vec<Vec<usize>>,
    /// Weights scaled to integers with a common denominator.
    weight: Vec<BigInt>,
    initial: usize,
    final_place: usize,
}

impl Compiled {
    fn new(net: &WorkflowNet) -> Self {
        let lcm = net
            .transitions()
            .iter()
            .fold(BigInt::one(), |acc, t| acc.lcm(t.weight.denom()));
        Compiled {
            pre: net.transitions().iter().map(|t| t.preset.clone()).collect(),
            post: net.transitions().iter().map(|t| t.postset.clone()).collect(),
            duration: net.transitions().iter().map(|t| t.duration).collect(),
            consumers: (0..net.place_count()).map(|p| net.consumers(p).to_vec()).collect(),
            weight: net
                .transitions()
                .iter()
                .map(|t| t.weight.numer() * (&lcm / t.weight.denom()))
                .collect(),
            initial: net.initial_place(),
            final_place: net.final_place(),
        }
    }

    /// `thresholds[k]` is the least 64-bit draw that selects a later member
    /// than `k`: draw `u` picks the first `k` with `u < ceil(cum_k·2^64/W)`.
    fn thresholds(&self, set: &[usize]) -> Vec<u128> {
        let total: BigInt = set.iter().map(|&t| &self.weight[t]).sum();
        let scale = BigInt::one() << 64;
        let mut cum = BigInt::zero();
        set.iter()
            .map(|&t| {
                cum += &self.weight[t];
                let scaled: BigInt = &cum * &scale;
                let (q, r) = scaled.div_rem(&total);
                let q = if r.is_zero() { q } else { q + 1 };
                q.to_u128().expect("at most 2^64")
            })
            .collect()
    }
}

enum Outcome {
    Done(u64),
    Capped,
    Deadlock,
    Unsafe,
}

struct Sampler<'a> {
    net: &'a Compiled,
    marked: Vec<bool>,
    marked_count: usize,
    stamps: Vec<u64>,
    seen: Vec<u64>,
    tick: u64,
    enabled: Vec<usize>,
    group: Vec<usize>,
    set_starts: Vec<usize>,
    set_members: Vec<usize>,
    cache: HashMap<Vec<usize>, Vec<u128>>,
}

impl<'a> Sampler<'a> {
    fn new(net: &'a Compiled) -> Self {
        let places = net.consumers.len();
        Sampler {
            net,
            marked: vec![false; places],
            marked_count: 0,
            stamps: vec![0; places],
            seen: vec![0; net.pre.len()],
            tick: 0,
            enabled: Vec::new(),
            group: vec![usize::MAX; net.pre.len()],
            set_starts: Vec::new(),
            set_members: Vec::new(),
            cache: HashMap::new(),
        }
    }

    fn run(&mut self, rng: &mut ChaCha8Rng, step_cap: u64) -> Outcome {
        let net = self.net;
        self.marked.iter_mut().for_each(|m| *m = false);
        self.marked[net.initial] = true;
        self.marked_count = 1;
        self.stamps[net.initial] = 0;
        let mut steps = 0;
        loop {
            if self.marked_count == 1 && self.marked[net.final_place] {
                return Outcome::Done(self.stamps[net.final_place]);
            }
            if steps == step_cap {
                return Outcome::Capped;
            }
            steps += 1;

            // Enabled transitions, each once.
            self.tick += 1;
            self.enabled.clear();
            for p in 0..self.marked.len() {
                if !self.marked[p] {
                    continue;
                }
                for &t in &net.consumers[p] {
                    if self.seen[t] != self.tick {
                        self.seen[t] = self.tick;
                        if net.pre[t].iter().all(|&q| self.marked[q]) {
                            self.enabled.push(t);
                        }
                    }
                }
            }
            if self.enabled.is_empty() {
                return Outcome::Deadlock;
            }
            self.enabled.sort_unstable();

            // Group into conflict sets C(t, M) keyed by their first member.
            for &t in &self.enabled {
                self.group[t] = usize::MAX;
            }
            self.set_starts.clear();
            self.set_members.clear();
            for i in 0..self.enabled.len() {
                let t = self.enabled[i];
                if self.group[t] != usize::MAX {
                    continue;
                }
                self.set_starts.push(self.set_members.len());
                for &u in &self.enabled {
                    if u == t || net.pre[u].iter().any(|p| net.pre[t].contains(p)) {
                        self.group[u] = t;
                        self.set_members.push(u);
                    }
                }
            }
            let k = rng.gen_range(0..self.set_starts.len());
            let lo = self.set_starts[k];
            let hi = self.set_starts.get(k + 1).copied().unwrap_or(self.set_members.len());
            let set = &self.set_members[lo..hi];
            let t = if set.len() == 1 {
                set[0]
            } else {
                let thresholds = match self.cache.get(set) {
                    Some(th) => th,
                    None => self.cache.entry(set.to_vec()).or_insert_with(|| net.thresholds(set)),
                };
                let u = rng.next_u64() as u128;
                set[thresholds.iter().position(|&th| u < th).expect("last threshold is 2^64")]
            };

            let start = net.pre[t].iter().map(|&p| self.stamps[p]).max().unwrap_or(0);
            for &p in &net.pre[t] {
                self.marked[p] = false;
            }
            self.marked_count -= net.pre[t].len();
            let end = start.saturating_add(net.duration[t]);
            for &p in &net.post[t] {
                if self.marked[p] {
                    return Outcome::Unsafe;
                }
                self.marked[p] = true;
                self.stamps[p] = end;
            }
            self.marked_count += net.post[t].len();
        }
    }
}

#[derive(Default)]
struct Tally {
    n: u64,
    sum: u128,
    sum_sq: BigInt,
    capped: u64,
    deadlocked: u64,
    unsafe_firings: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.capped += other.capped;
        self.deadlocked += other.deadlocked;
        self.unsafe_firings += other.unsafe_firings;
        self
    }
}

/// Samples runs under a scheduler that picks an enabled conflict set
/// uniformly at random and resolves it by weight. Batch `b` draws from
/// ChaCha8 seeded with `seed` on stream `b`, so results do not depend on the
/// thread count.
pub fn simulate(net: &WorkflowNet, options: SimulationOptions) -> SimulationResult {
    let compiled = Compiled::new(net);
    let batch = options.batch_size.max(1);
    let batches = options.runs.div_ceil(batch);
    let tally = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(b);
            let mut sampler = Sampler::new(&compiled);
            let count = batch.min(options.runs - b * batch);
            let mut tally = Tally::default();
            let mut sum_sq: u128 = 0;
            for _ in 0..count {
                match sampler.run(&mut rng, options.step_cap) {
                    Outcome::Done(t) => {
                        tally.n += 1;
                        tally.sum += t as u128;
                        let sq = (t as u128) * (t as u128);
                        match sum_sq.checked_add(sq) {
                            Some(s) => sum_sq = s,
                            None => {
                                tally.sum_sq += BigInt::from(sum_sq);
                                sum_sq = sq;
                            }
                        }
                    }
                    Outcome::Capped => tally.capped += 1,
                    Outcome::Deadlock => tally.deadlocked += 1,
                    Outcome::Unsafe => tally.unsafe_firings += 1,
                }
            }
            tally.sum_sq += BigInt::from(sum_sq);
            tally
        })
        .reduce(Tally::default, Tally::merge);

    let (mean, std_error) = if tally.n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let n = BigInt::from(tally.n);
        let sum = BigInt::from(tally.sum);
        let mean = Rational::new(sum.clone(), n.clone());
        let std_error = if tally.n < 2 {
            0.0
        } else {
            // Sample variance (n·Σt² − (Σt)²) / (n(n−1)), exact until the
            // final square root.
            let num = &n * &tally.sum_sq - &sum * &sum;
            let var = Rational::new(num, &n * (&n - 1));
            (var.to_f64().unwrap_or(f64::INFINITY) / tally.n as f64).sqrt()
        };
        (mean.to_f64().unwrap_or(f64::NAN), std_error)
    };
    SimulationResult {
        mean,
        std_error,
        samples: tally.n,
        step_cap_exceeded: tally.capped,
        deadlocked: tally.deadlocked,
        unsafe_firings: tally.unsafe_firings,
    }
}

// ---------------------------------------------------------------------------
// Mazurkiewicz rewriting

fn firable(net: &WorkflowNet, m: &Marking, a: TransitionId, b: TransitionId) -> bool {
    net.fire(m, a).and_then(|m2| net.fire(&m2, b)).is_ok()
}

/// Starting from `run`, repeatedly swaps a random adjacent pair of
/// independent transitions. Returns `run` followed by the sequence after
/// each swap; stops early if no swap applies.
pub fn mazurkiewicz_swaps(
    net: &WorkflowNet,
    run: &[TransitionId],
    swaps: usize,
    seed: u64,
) -> Result<Vec<Vec<TransitionId>>, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = run.to_vec();
    let mut out = vec![current.clone()];
    for _ in 0..swaps {
        let mut markings = Vec::with_capacity(current.len() + 1);
        let mut m = net.initial_marking();
        markings.push(m.clone());
        for &t in &current {
            m = net.fire(&m, t).map_err(|_| OracleError::Deadlock {
                sequence: net.transition_names(&current).iter().map(|s| s.to_string()).collect(),
            })?;
            markings.push(m.clone());
        }
        let candidates: Vec<usize> = (0..current.len().saturating_sub(1))
            .filter(|&i| {
                let (a, b) = (current[i], current[i + 1]);
                a != b && net.independent(a, b) && firable(net, &markings[i], b, a)
            })
            .collect();
        if candidates.is_empty() {
            break;
        }
        let i = candidates[rng.gen_range(0..candidates.len())];
        current.swap(i, i + 1);
        out.push(current.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio;
    use crate::samples::*;
    use crate::timing::time_of;

    fn ids(net: &WorkflowNet, names: &[&str]) -> Vec<TransitionId> {
        net.transition_ids(names).unwrap()
    }

    #[test]
    fn trivial_enumeration() {
        let res = enumerate_expected_time(&trivial_net(5), &EnumerationOptions::default()).unwrap();
        assert_eq!(res.estimate, Estimate::Exact(ratio(5, 1)));
        assert_eq!(res.runs_explored, 1);
    }

    #[test]
    fn example_truncated_enumeration_brackets_the_value() {
        let opts = EnumerationOptions { mass_epsilon: ratio(1, 1_000_000_000), ..Default::default() };
        let res = enumerate_expected_time(&example_net(), &opts).unwrap();
        let Estimate::Bounds { lower, covered_mass } = &res.estimate else { panic!() };
        assert!(*lower < ratio(47, 5));
        assert!(ratio(47, 5) - lower < ratio(1, 10_000_000));
        assert!(Rational::one() - covered_mass < ratio(1, 1_000_000_000));
    }

    #[test]
    fn untruncated_cycle_hits_depth_cap() {
        let opts = EnumerationOptions { max_depth: 50, ..Default::default() };
        assert_eq!(
            enumerate_expected_time(&example_net(), &opts),
            Err(OracleError::NonTermination { cap: 50 })
        );
    }

    #[test]
    fn deadlock_is_reported() {
        let opts = EnumerationOptions { mass_epsilon: ratio(1, 1000), ..Default::default() };
        assert!(matches!(
            enumerate_expected_time(&example_without_t5(), &opts),
            Err(OracleError::Deadlock { .. })
        ));
    }

    #[test]
    fn simulate_trivial_is_exact() {
        let res = simulate(&trivial_net(7), SimulationOptions::new(1000, 3));
        assert_eq!(res.mean, 7.0);
        assert_eq!(res.std_error, 0.0);
        assert_eq!(res.samples, 1000);
    }

    #[test]
    fn simulate_is_deterministic() {
        let opts = SimulationOptions { batch_size: 100, ..SimulationOptions::new(1000, 42) };
        assert_eq!(simulate(&example_net(), opts), simulate(&example_net(), opts));
    }

    #[test]
    fn simulate_example_near_value() {
        let res = simulate(&example_net(), SimulationOptions::new(100_000, 1));
        assert!((res.mean - 9.4).abs() < 5.0 * res.std_error, "{res:?}");
    }

    #[test]
    fn thresholds_split_exactly() {
        let net = example_net();
        let c = Compiled::new(&net);
        let set = ids(&net, &["t2", "t3"]);
        // 1/5 of 2^64, rounded up, then the full range.
        let fifth = (1u128 << 64).div_ceil(5);
        assert_eq!(c.thresholds(&set), vec![fifth, 1u128 << 64]);
    }

    #[test]
    fn n1_swap_reaches_reordering() {
        let net = n1_net();
        let run = ids(&net, &["t1", "t2", "t4", "t6"]);
        let target = ids(&net, &["t1", "t4", "t2", "t6"]);
        let outs = mazurkiewicz_swaps(&net, &run, 1, 0).unwrap();
        assert!(outs.contains(&target));
        assert_eq!(mazurkiewicz_swaps(&net, &run, 0, 0).unwrap(), vec![run]);
    }

    #[test]
    fn swaps_preserve_time() {
        let net = example_net();
        let run = ids(&net, &["t1", "t2", "t2", "t4", "t3", "t5"]);
        let t = time_of(&net, &run).unwrap();
        for s in mazurkiewicz_swaps(&net, &run, 200, 9).unwrap() {
            assert_eq!(time_of(&net, &s).unwrap(), t);
        }
    }

    #[test]
    fn scheduler_rules_parse() {
        assert_eq!("rightmost".parse::<SchedulerRule>(), Ok(SchedulerRule::Rightmost));
        assert!("x".parse::<SchedulerRule>().is_err());
    }
}
