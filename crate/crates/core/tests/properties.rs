use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tpwn_core::analysis::{analyze, AnalysisOptions};
use tpwn_core::chain::{build_chain, ChainOptions, SchedulerChain, StateKind};
use tpwn_core::generate::{generate_net, GeneratorParams};
use tpwn_core::io::{emit_net, parse_net};
use tpwn_core::oracle::{enumerate_expected_time, EnumerationOptions, SchedulerRule};
use tpwn_core::pert::{expected_project_duration, random_network, reduce_rational, reduce_unit_weights};
use tpwn_core::structure::{explore, DEFAULT_MARKING_CAP};
use tpwn_core::timing::{time_of, TieBreak};
use tpwn_core::{ExpectedTime, Rational, WorkflowNet};

fn params(places: usize, loops: bool) -> GeneratorParams {
    GeneratorParams { places, times: (0, 6), weights: (1, 5), allow_loops: loops, max_choices: 4 }
}

fn finite(net: &WorkflowNet, tie: TieBreak) -> Rational {
    let a = analyze(net, AnalysisOptions { tie, ..Default::default() }).unwrap();
    match a.expected_time {
        ExpectedTime::Finite(v) => v,
        other => panic!("{other:?}"),
    }
}

/// Walks the chain at random, recording transitions, rewards and the
/// terminal value.
fn sample_path(chain: &SchedulerChain, rng: &mut ChaCha8Rng) -> Option<(Vec<usize>, u64)> {
    let mut at = SchedulerChain::INITIAL;
    let mut seq = Vec::new();
    let mut total = 0u64;
    for _ in 0..200 {
        match &chain.kinds[at] {
            StateKind::Final { value } => return Some((seq, total + value)),
            StateKind::Transient { reward, successors, .. } => {
                total += reward;
                let s = &successors[rng.gen_range(0..successors.len())];
                seq.push(s.transition);
                at = s.target;
            }
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_probabilities_and_residuals(seed in any::<u64>(), places in 2usize..12) {
        let net = generate_net(&params(places, true), seed);
        let chain = build_chain(&net, ChainOptions::default()).unwrap();
        for kind in &chain.kinds {
            if let StateKind::Transient { successors, .. } = kind {
                let total = successors.iter().fold(Rational::zero(), |a, s| a + &s.probability);
                prop_assert!(total.is_one());
            }
        }
        let sys = chain.assemble_system::<Rational>();
        let sol = sys.solve().unwrap();
        prop_assert!(sys.residuals(&sol.values).iter().all(|r| r.is_zero()));
    }

    #[test]
    fn tie_breaking_does_not_change_the_value(seed in any::<u64>(), places in 2usize..12) {
        let net = generate_net(&params(places, true), seed);
        prop_assert_eq!(finite(&net, TieBreak::LeastIndex), finite(&net, TieBreak::GreatestIndex));
    }

    #[test]
    fn acyclic_nets_match_enumeration(seed in any::<u64>(), places in 2usize..11) {
        let net = generate_net(&params(places, false), seed);
        let et = finite(&net, TieBreak::LeastIndex);
        for rule in [SchedulerRule::Earliest, SchedulerRule::Leftmost, SchedulerRule::Rightmost] {
            let res = enumerate_expected_time(&net, &EnumerationOptions { rule, ..Default::default() }).unwrap();
            prop_assert_eq!(res.exact(), Some(&et));
        }
    }

    #[test]
    fn reward_path_identity(seed in any::<u64>(), places in 2usize..12) {
        let net = generate_net(&params(places, true), seed);
        let chain = build_chain(&net, ChainOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            if let Some((seq, total)) = sample_path(&chain, &mut rng) {
                prop_assert_eq!(time_of(&net, &seq).unwrap(), total);
            }
        }
    }

    #[test]
    fn net_documents_round_trip(seed in any::<u64>(), places in 2usize..16) {
        let net = generate_net(&params(places, true), seed);
        let text = emit_net(&net);
        let back = parse_net(&text).unwrap();
        prop_assert_eq!(back.transition_defs(), net.transition_defs());
        prop_assert_eq!(back.places(), net.places());
        prop_assert_eq!(emit_net(&back), text);
    }

    #[test]
    fn conflict_sets_partition_enabled_transitions(seed in any::<u64>(), places in 2usize..12) {
        let net = generate_net(&params(places, true), seed);
        let rg = explore(&net, DEFAULT_MARKING_CAP).unwrap();
        for m in &rg.states {
            let mut all: Vec<usize> = net.conflict_sets(m).concat();
            all.sort_unstable();
            prop_assert_eq!(all, net.enabled_transitions(m));
        }
    }

    #[test]
    fn pert_reductions_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=4);
        let pn = random_network(&mut rng, n, 6, 8);
        let brute = expected_project_duration(&pn, 24).unwrap();
        let rational = finite(&reduce_rational(&pn).unwrap(), TieBreak::LeastIndex);
        let unit = finite(&reduce_unit_weights(&pn).unwrap(), TieBreak::LeastIndex);
        prop_assert_eq!(&rational, &brute);
        prop_assert_eq!(&unit, &brute);
    }
}
