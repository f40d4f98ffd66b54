use propel::drl::{
    bellman_residual, bellman_target, infer, learn_step, partition_fix_set, train_rl, var_periods,
    Action, QLearner, ReplayBuffer, RlEnv, RlHyper, Transition,
};
use propel::learn::{build_reduced_mip, FixSet};
use propel::metrics::primal_gap;
use propel::scp::{build_mip, generate_snapshots, ScpTopology};
use propel::solve::{solve_lp, solve_mip, SolveLimits};

fn env(seed: u64, fix_share: usize, start_ticks: f64) -> RlEnv {
    let topo = ScpTopology::random(8, 5, 6, seed).unwrap();
    let inst = generate_snapshots(&topo, 1, seed).unwrap().remove(0);
    let mip = build_mip(&inst).unwrap();
    let lp_star = solve_lp(&mip).unwrap().objective;
    let ints = mip.integer_indices();
    let fix = FixSet::new(
        ints.iter()
            .copied()
            .filter(|j| j % fix_share == 0)
            .collect(),
    );
    let start = solve_mip(
        &build_reduced_mip(&mip, &fix).unwrap(),
        &SolveLimits::ticks(start_ticks),
    )
    .unwrap();
    let partition = partition_fix_set(&fix, 3, &var_periods(&mip).unwrap(), 6).unwrap();
    RlEnv {
        inst,
        mip,
        lp_star,
        fix,
        partition,
        start,
        normalizer: 100.0,
    }
}

fn hyper() -> RlHyper {
    RlHyper {
        m: 3,
        hidden: 16,
        episodes: 6,
        t_max: 3,
        alpha: 0.5,
        seed: 4,
        ..RlHyper::default()
    }
}

fn step_lim() -> SolveLimits {
    SolveLimits::ticks(40.0)
}

#[test]
fn final_transitions_target_their_reward() {
    let q = QLearner::new(&hyper()).qnet;
    let t = Transition {
        state: vec![0.0; 13],
        actions: vec![Action::Insert(0)],
        reward: -0.7,
        next_state: vec![0.3; 13],
        next_available: vec![1, 2],
        terminal: true,
    };
    assert_eq!(bellman_target(&t, &q, 0.99), -0.7);
    let open = Transition {
        terminal: false,
        ..t.clone()
    };
    let qs = q.q(&open.next_state);
    let best = [qs[1], qs[2], qs[4], qs[5]]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((bellman_target(&open, &q, 0.99) - (-0.7 + 0.99 * best)).abs() < 1e-12);
}

#[test]
fn residual_falls_over_repeated_passes() {
    let h = RlHyper {
        lr: 0.01,
        ..hyper()
    };
    let mut learner = QLearner::new(&h);
    let mut buf = ReplayBuffer::new(100);
    for k in 0..10 {
        let x = k as f64 / 10.0;
        buf.push(Transition {
            state: (0..13).map(|i| (x + i as f64 * 0.07).sin()).collect(),
            actions: vec![Action::Insert(k % 3), Action::Exclude((k + 1) % 3)],
            reward: -x,
            next_state: vec![0.0; 13],
            next_available: vec![],
            terminal: true,
        });
    }
    let before = bellman_residual(&buf, &learner.qnet, &learner.qnet, h.gamma);
    for _ in 0..100 {
        learn_step(&buf, &mut learner, &h);
    }
    let after = bellman_residual(&buf, &learner.qnet, &learner.qnet, h.gamma);
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn episodes_repeat_under_one_seed() {
    let envs = vec![env(11, 2, 30.0), env(12, 2, 30.0)];
    let (a, log_a) = train_rl(&envs, &hyper(), &step_lim()).unwrap();
    let (b, log_b) = train_rl(&envs, &hyper(), &step_lim()).unwrap();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    assert!(!log_a.is_empty());
}

#[test]
fn solved_start_produces_no_transitions() {
    let mut e = env(13, 1_000_000, 30.0);
    let opt = solve_mip(&e.mip, &SolveLimits::ticks(500.0)).unwrap();
    e.lp_star = opt.best_objective;
    e.start = opt;
    assert!(primal_gap(e.start.best_objective, e.lp_star) <= hyper().eps_tolerance);
    let (_, log) = train_rl(&[e], &hyper(), &step_lim()).unwrap();
    assert!(log.is_empty());
}

#[test]
fn inference_keeps_a_good_start() {
    let mut e = env(14, 1_000_000, 30.0);
    let opt = solve_mip(&e.mip, &SolveLimits::ticks(500.0)).unwrap();
    e.lp_star = opt.best_objective;
    e.start = opt.clone();
    let q = QLearner::new(&hyper()).qnet;
    let (res, steps) = infer(&e, &q, &hyper(), &step_lim(), 0.0).unwrap();
    assert!(steps.is_empty());
    assert_eq!(res.best_objective, opt.best_objective);
    assert_eq!(res.best_solution, opt.best_solution);
}

#[test]
fn inference_never_loses_the_start_incumbent() {
    for seed in 20..24 {
        let e = env(seed, 2, 15.0);
        let q = QLearner::new(&hyper()).qnet;
        let (res, _) = infer(&e, &q, &hyper(), &step_lim(), e.start.elapsed).unwrap();
        if e.start.has_incumbent() {
            assert!(res.best_objective <= e.start.best_objective);
        }
        for w in res.trace.windows(2) {
            assert!(w[1].time >= w[0].time && w[1].objective < w[0].objective);
        }
    }
}
