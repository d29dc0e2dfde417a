use mdvi_core::algorithms::{
    boltzmann_policy, mdvi_run, q_learning_run, soft_value, Beta, MdviConfig, QLearningConfig,
};
use mdvi_core::bellman::{
    bellman_backup, compose_transitions, exact_optimal, policy_evaluation, pvar_sigma,
};
use mdvi_core::diagnostics::{a_gamma_k, compute_eps_and_e, LemmaContext};
use mdvi_core::garnet::{generate, GarnetParams};
use mdvi_core::harness::{run_all_seeds, ExperimentSpec, SweepResult};
use mdvi_core::{ActionDistribution, DetPolicy, QTable, TabularMdp, VTable};
use proptest::prelude::*;

fn garnet() -> impl Strategy<Value = TabularMdp> {
    (1usize..7, 1usize..4, 0.0f64..0.97, any::<u64>())
        .prop_flat_map(|(x, a, g, seed)| (Just(x), Just(a), 1..=x, Just(g), Just(seed)))
        .prop_map(|(x, a, b, g, seed)| generate(&GarnetParams::new(x, a, b, g, seed)).unwrap())
}

fn policy_for(mdp: &TabularMdp, code: u64) -> DetPolicy {
    let a = mdp.num_actions() as u64;
    let mut c = code;
    let actions = (0..mdp.num_states())
        .map(|_| {
            let act = (c % a) as usize;
            c = (c / a) ^ c.rotate_left(17);
            act
        })
        .collect();
    DetPolicy::new(actions, mdp.num_actions()).unwrap()
}

fn table(mdp: &TabularMdp, vals: &[f64]) -> QTable {
    let n = mdp.num_states() * mdp.num_actions();
    QTable::from_vec(mdp.num_states(), mdp.num_actions(), vals.iter().cycle().take(n).copied().collect()).unwrap()
}

fn vtable(n: usize, vals: &[f64]) -> VTable {
    VTable::new(vals.iter().cycle().take(n).copied().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_operator_contracts(mdp in garnet(), code in any::<u64>(),
                                  q1 in prop::collection::vec(-10.0f64..10.0, 1..40),
                                  q2 in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let pi = policy_for(&mdp, code);
        let (a, b) = (table(&mdp, &q1), table(&mdp, &q2));
        let ta = bellman_backup(&mdp, &pi, &a).unwrap();
        let tb = bellman_backup(&mdp, &pi, &b).unwrap();
        prop_assert!((&ta - &tb).sup_norm() <= mdp.discount() * (&a - &b).sup_norm() + 1e-12);
    }

    #[test]
    fn policy_evaluation_is_a_fixed_point(mdp in garnet(), code in any::<u64>()) {
        let pi = policy_for(&mdp, code);
        let v = policy_evaluation(&mdp, &pi).unwrap();
        let q = mdvi_core::bellman::backup(&mdp, &v).unwrap();
        prop_assert!((&v - &pi.select(&q)).sup_norm() <= 1e-9);
        prop_assert!(v.sup_norm() <= mdp.horizon() + 1e-9);
    }

    #[test]
    fn optimal_values_dominate_policies(mdp in garnet(), codes in prop::collection::vec(any::<u64>(), 100)) {
        let tol = 1e-9;
        let opt = exact_optimal(&mdp, tol).unwrap();
        for code in codes {
            let v = policy_evaluation(&mdp, &policy_for(&mdp, code)).unwrap();
            prop_assert!(v.iter().zip(opt.v_star.iter()).all(|(v, s)| *s >= v - tol));
        }
    }

    #[test]
    fn predictive_variance_bounds(mdp in garnet(), vals in prop::collection::vec(-5.0f64..5.0, 1..10),
                                  other in prop::collection::vec(-5.0f64..5.0, 1..10)) {
        let v = vtable(mdp.num_states(), &vals);
        let u = vtable(mdp.num_states(), &other);
        let (pvar, sigma) = pvar_sigma(&mdp, &v).unwrap();
        let sup = v.sup_norm();
        for (p, s) in pvar.values().iter().zip(sigma.values()) {
            prop_assert!(*p >= 0.0 && *p <= sup * sup + 1e-12);
            prop_assert!((s * s - p).abs() <= 1e-12);
            prop_assert!(*s <= sup + 1e-12);
        }
        let (_, s_diff) = pvar_sigma(&mdp, &(&v - &u)).unwrap();
        let (_, s_u) = pvar_sigma(&mdp, &u).unwrap();
        for i in 0..sigma.values().len() {
            prop_assert!(sigma.values()[i] <= s_diff.values()[i] + s_u.values()[i] + 1e-10);
        }
    }

    #[test]
    fn transition_products_stay_stochastic(mdp in garnet(), codes in prop::collection::vec(any::<u64>(), 1..50)) {
        let policies: Vec<DetPolicy> = codes.iter().map(|c| policy_for(&mdp, *c)).collect();
        let m = compose_transitions(&mdp, &policies, 0, policies.len() - 1).unwrap();
        for row in m.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-10);
            prop_assert!(row.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn garnet_rows_have_branching_support(x in 1usize..12, a in 1usize..4, b_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let b = 1 + ((x - 1) as f64 * b_frac) as usize;
        let params = GarnetParams::new(x, a, b, 0.9, seed);
        let mdp = generate(&params).unwrap();
        prop_assert_eq!(&mdp, &generate(&params).unwrap());
        for s in 0..x {
            for act in 0..a {
                let row = mdp.transition_row(s, act);
                prop_assert!(row.iter().filter(|p| **p > 0.0).count() <= b);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert_eq!(mdp.reward(s, act), mdp.reward(s, 0));
            }
        }
    }

    #[test]
    fn soft_value_sandwich(vals in prop::collection::vec(-50.0f64..50.0, 1..24), actions in 1usize..6,
                           beta in prop::sample::select(vec![1.0, 10.0, 100.0, 1e4])) {
        let states = vals.len().div_ceil(actions);
        let data: Vec<f64> = vals.iter().cycle().take(states * actions).copied().collect();
        let s = QTable::from_vec(states, actions, data).unwrap();
        let soft = soft_value(&s, Beta::Finite(beta));
        let hard = s.row_max();
        for x in 0..states {
            prop_assert!(soft[x] >= hard[x] - 1e-12);
            prop_assert!(soft[x] <= hard[x] + (actions as f64).ln() / beta + 1e-12);
        }
    }

    #[test]
    fn large_beta_concentrates_on_greedy(vals in prop::collection::vec(-5.0f64..5.0, 2..6)) {
        let mut row = vals.clone();
        row.sort_by(f64::total_cmp);
        row.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        prop_assume!(row.len() >= 2);
        let s = QTable::from_rows(&[row.clone()]).unwrap();
        let p = boltzmann_policy(&s, Beta::Finite(1e6));
        let best = DetPolicy::greedy(&s).action(0);
        prop_assert!(p.prob(0, best) >= 1.0 - 1e-6);
    }

    #[test]
    fn a_gamma_k_closed_form_matches_sum(alpha in 0.0f64..0.999, gamma in 0.0f64..0.999, k in 0usize..=100, same in any::<bool>()) {
        let alpha = if same { gamma } else { alpha };
        let direct: f64 = (0..k).map(|j| gamma.powi((k - j) as i32) * alpha.powi(j as i32)).sum();
        prop_assert!((a_gamma_k(alpha, gamma, k) - direct).abs() <= 1e-12 * direct.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mdvi_runs_are_reproducible_and_accounted(mdp in garnet(), alpha in 0.0f64..1.0, k in 1usize..15, m in 1usize..4, seed in any::<u64>()) {
        let config = MdviConfig::greedy(alpha, k, m, seed);
        let a = mdvi_run(&mdp, &config).unwrap();
        let b = mdvi_run(&mdp, &config).unwrap();
        prop_assert_eq!(&a.trace, &b.trace);
        let xa = (mdp.num_states() * mdp.num_actions()) as u64;
        prop_assert_eq!(a.trace.last().unwrap().samples_used, (k * m) as u64 * xa);
        for t in 1..a.trace.len() {
            let expected = &a.trace[t].eps + &(&a.trace[t - 1].big_e * alpha);
            prop_assert!((&a.trace[t].big_e - &expected).sup_norm() <= 1e-12);
        }
        prop_assert!(a.trace[1].eps.sup_norm() == 0.0 && a.trace[1].big_e.sup_norm() == 0.0);
        let recomputed = compute_eps_and_e(&mdp, &a.trace, alpha).unwrap();
        prop_assert_eq!(&recomputed, &a.trace);
    }

    #[test]
    fn q_learning_accounting(mdp in garnet(), k in 0usize..15, m in 1usize..4, seed in any::<u64>()) {
        let config = QLearningConfig { iterations: k, samples_per_update: m, rate_exponent: 0.7, seed };
        let run = q_learning_run(&mdp, &config).unwrap();
        let xa = (mdp.num_states() * mdp.num_actions()) as u64;
        prop_assert_eq!(run.trace.last().unwrap().samples_used, (k * m) as u64 * xa);
        prop_assert_eq!(&run, &q_learning_run(&mdp, &config).unwrap());
    }

    #[test]
    fn checkers_are_deterministic(seed in 0u64..1000, alpha in 0.5f64..0.99) {
        let mdp = generate(&GarnetParams::new(5, 2, 2, 0.9, seed)).unwrap();
        let opt = exact_optimal(&mdp, 1e-12).unwrap();
        let run = mdvi_run(&mdp, &MdviConfig::greedy(alpha, 8, 2, seed)).unwrap();
        let ctx = LemmaContext::new(&mdp, &opt, &run.trace, alpha).unwrap();
        for k in 1..=8 {
            prop_assert_eq!(ctx.check_last_policy_bound(k).unwrap(), ctx.check_last_policy_bound(k).unwrap());
            prop_assert_eq!(ctx.check_delta_and_v_bounds(k).unwrap(), ctx.check_delta_and_v_bounds(k).unwrap());
        }
    }

    #[test]
    fn crossings_are_monotone_in_epsilon(seeds in prop::collection::vec(0u64..500, 1..4), alpha in 0.5f64..=1.0) {
        let text = format!(
            "errors = [1.0, 0.3, 0.1, 0.03, 0.01]\nseeds = {seeds:?}\n\
             [mdp]\nsource = \"garnet\"\nstates = 6\nactions = 2\nbranching = 2\ndiscount = 0.9\n\
             [algorithm]\nkind = \"mdvi\"\nalpha = {alpha}\niterations = 60\n"
        );
        let spec = ExperimentSpec::from_toml_str(&text).unwrap();
        let outcomes = run_all_seeds(&spec, std::path::Path::new(".")).unwrap();
        let sweep = SweepResult::from_outcomes(&spec, &outcomes);
        for o in &outcomes {
            let mut prev = 0u64;
            let mut censored = false;
            for c in &o.crossings {
                match c {
                    Some(c) => {
                        prop_assert!(!censored && c.samples >= prev);
                        prev = c.samples;
                    }
                    None => censored = true,
                }
            }
            prop_assert!(o.records.windows(2).all(|w| w[0].samples <= w[1].samples));
            prop_assert!(o.records.iter().all(|r| r.sup_error_last >= 0.0));
        }
        prop_assert_eq!(SweepResult::from_json_str(&sweep.to_json_string().unwrap()).unwrap(), sweep);
    }

    #[test]
    fn resolved_config_round_trips(alpha in 0.0f64..=1.0, m in 1usize..20, every in 1usize..5, ns in any::<bool>(),
                                    errors in prop::collection::vec(1e-4f64..2.0, 1..5)) {
        let text = format!(
            "errors = {errors:?}\nseeds = [3, 1]\nrecord_every = {every}\nnonstationary = {ns}\n\
             [mdp]\nsource = \"garnet\"\nstates = 4\nactions = 2\nbranching = 2\ndiscount = 0.9\n\
             [algorithm]\nkind = \"mdvi\"\nalpha = {alpha}\niterations = 5\nsamples_per_update = {m}\n"
        );
        let spec = ExperimentSpec::from_toml_str(&text).unwrap();
        prop_assert!(spec.errors.windows(2).all(|w| w[0] > w[1]));
        let echoed = spec.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentSpec::from_toml_str(&echoed).unwrap(), spec);
    }
}
