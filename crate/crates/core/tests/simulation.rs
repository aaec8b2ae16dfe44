mod support {
    pub mod conservation;
}

use proptest::prelude::*;
use vnfsim_core::config::ScenarioConfig;
use vnfsim_core::harness::{
    compare_algorithms, evaluate_bestfit, evaluate_pi, evaluate_ql, run_episode,
    PiPolicy, RejectAll, ResultRow, RunLabel,
};
use vnfsim_core::mdp::{policy_iteration, PolicyArtifact, TransitionTable, DEFAULT_STATE_CAP};
use vnfsim_core::qlearning::train;
use vnfsim_core::tracegen::generate_file_set;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn episodes_conserve_requests(case in support::conservation::case()) {
        if let Err(e) = support::conservation::check(&case) {
            prop_assert!(false, "{}", e);
        }
    }
}

fn label() -> RunLabel<'static> {
    RunLabel {
        experiment: "t",
        sweep_param: "base",
        sweep_value: 1.0,
    }
}

#[test]
fn pi_replay_covers_every_visited_state_and_beats_reject_all() {
    let cfg = ScenarioConfig::preset("table1").unwrap();
    let s = cfg.scenario().unwrap();
    let table = TransitionTable::build(&s, DEFAULT_STATE_CAP).unwrap();
    let solution = policy_iteration(&table, &cfg.pi_config()).unwrap();
    let artifact = PolicyArtifact::new(&s, &table, &solution, &cfg.pi_config());
    let policy = PiPolicy::from_artifact(&artifact, &s).unwrap();
    let eval = generate_file_set(&cfg.vnf_types, 20, 500, cfg.eval_base_seed()).unwrap();

    let mut rows = Vec::new();
    for t in &eval {
        let pi = run_episode(&mut policy.clone(), t, &s).unwrap();
        let none = run_episode(&mut RejectAll, t, &s).unwrap();
        for (name, r) in [("pi", &pi), ("reject", &none)] {
            rows.push(ResultRow {
                experiment: "t".into(),
                algorithm: name.into(),
                sweep_param: "base".into(),
                sweep_value: 1.0,
                trace_seed: t.seed,
                total: r.total_arrivals,
                accepted: r.accepted,
                rejected: r.rejected,
                rejection_ratio: r.rejection_ratio(),
            });
        }
    }
    let summary = compare_algorithms(&rows).unwrap();
    assert!(summary.delta("reject", "pi", 1.0).unwrap() > 0.0);
}

#[test]
fn pi_artifact_rejects_other_scenarios() {
    let cfg = ScenarioConfig::preset("table1").unwrap();
    let s = cfg.scenario().unwrap();
    let table = TransitionTable::build(&s, DEFAULT_STATE_CAP).unwrap();
    let solution = policy_iteration(&table, &cfg.pi_config()).unwrap();
    let artifact = PolicyArtifact::new(&s, &table, &solution, &cfg.pi_config());
    let other = ScenarioConfig::preset("table3_sim2").unwrap().scenario().unwrap();
    assert!(PiPolicy::from_artifact(&artifact, &other).is_err());
}

#[test]
fn ql_beats_best_fit_on_default_scenario() {
    let cfg = ScenarioConfig::preset("table1").unwrap();
    let s = cfg.scenario().unwrap();
    let f = &cfg.files;
    let train_set = generate_file_set(&cfg.vnf_types, f.n_train, f.n_requests, cfg.train_base_seed()).unwrap();
    let eval = generate_file_set(&cfg.vnf_types, f.n_eval, f.n_requests, cfg.eval_base_seed()).unwrap();
    let mut rows = evaluate_ql(&s, &cfg, &train_set, &eval, &[cfg.ql.seed], &label()).unwrap();
    rows.extend(evaluate_bestfit(&s, &cfg, &eval, &label()).unwrap());
    rows.extend(evaluate_pi(&s, &cfg, &eval, DEFAULT_STATE_CAP, &label()).unwrap());
    let summary = compare_algorithms(&rows).unwrap();
    assert!(summary.delta("bestfit", "ql", 1.0).unwrap() >= 0.0);
    assert_eq!(summary.rows.len(), 3);
    assert!(rows.iter().all(|r| r.total == 500));
}

/// With α = 0 nothing is learned, so every ε gives the uniform random policy.
#[test]
fn agent_without_learning_matches_random_baseline() {
    let cfg = ScenarioConfig::preset("table1").unwrap();
    let s = cfg.scenario().unwrap();
    let traces = generate_file_set(&cfg.vnf_types, 10, 500, cfg.train_base_seed()).unwrap();
    let mut frozen = cfg.agent_config();
    frozen.alpha = 0.0;
    let mut random = frozen.clone();
    random.schedule.eps_min = 1.0;
    random.schedule.eps_max = 1.0;
    let a = train(&s, &traces, 100, &frozen).unwrap().curve;
    let b = train(&s, &traces, 100, &random).unwrap().curve;
    let mean = |c: &[f64]| c.iter().sum::<f64>() / c.len() as f64;
    assert!((mean(&a) - mean(&b)).abs() < 0.01, "{} vs {}", mean(&a), mean(&b));
}
