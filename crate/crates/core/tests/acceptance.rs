//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;

use propel::config::{Method, RunConfig};
use propel::drl::{
    partition_fix_set, residual_grad, state_dim, state_mip, transition, var_periods, Action, QNet,
    RlState, Transition,
};
use propel::features::{build_directed_graph, extract_feature_spec, two_period_example};
use propel::learn::{build_reduced_mip, compute_weights, normalized_rc, weighted_ce_loss, FixSet};
use propel::metrics::{gap_at, primal_gap, primal_integral, GapTrace};
use propel::mip::MipInstance;
use propel::nn::{max_rel_error, numeric_grad, Grads, Mlp};
use propel::pipeline::{self, ResultRow};
use propel::rng::rng;
use propel::scp::{build_mip, integer_domain_size, random_micro_instance};
use propel::solve::{brute_force, solve_mip, MipStatus, SolveLimits, TraceEntry};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

fn exact(mip: &MipInstance) -> Option<f64> {
    let r = solve_mip(mip, &SolveLimits::exact()).ok()?;
    (r.status == MipStatus::Optimal).then_some(r.best_objective)
}

fn micro_mip(seed: u64) -> MipInstance {
    build_mip(&random_micro_instance(seed, 1e4)).expect("micro instance builds")
}

fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let n = 120;
    for seed in 0..n {
        let mip = micro_mip(seed);
        assert!(integer_domain_size(&mip) <= 1e4);
        let bf = brute_force(&mip, 10_000).expect("domain fits");
        match exact(&mip) {
            Some(v) if (v - bf.best_objective).abs() <= 1e-6 => {}
            v => bad.push((seed, v, bf.best_objective)),
        }
    }
    let el = t0.elapsed();
    outcome(
        bad.is_empty() && within(el, 60),
        format!(
            "{n} instances, {} mismatches {:?}, {:.1?}",
            bad.len(),
            bad.first(),
            el
        ),
    )
}

fn random_fix(mip: &MipInstance, r: &mut impl Rng) -> FixSet {
    let p = r.random_range(0.1..0.9);
    FixSet::new(
        mip.integer_indices()
            .into_iter()
            .filter(|_| r.random_bool(p))
            .collect(),
    )
}

fn restriction_bound() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(2);
    let mut checked = 0;
    let mut bad = 0;
    for seed in 0..50 {
        let mip = micro_mip(1000 + seed);
        let full = exact(&mip).expect("micro solves");
        for _ in 0..20 {
            let red = build_reduced_mip(&mip, &random_fix(&mip, &mut r)).expect("integer columns");
            let v = exact(&red).expect("idle plan keeps it feasible");
            checked += 1;
            if v < full - 1e-6 {
                bad += 1;
            }
        }
    }
    let el = t0.elapsed();
    outcome(
        bad == 0 && within(el, 120),
        format!("{checked} fix sets, {bad} violations, {el:.1?}"),
    )
}

fn unfix_monotonicity() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(3);
    let mut pairs = 0;
    let mut bad = 0;
    let mut seed = 2000;
    let mut used = 0;
    while used < 25 {
        seed += 1;
        let inst = random_micro_instance(seed, 1e4);
        if inst.topology.periods < 2 {
            continue;
        }
        used += 1;
        let mip = build_mip(&inst).expect("micro instance builds");
        let fix = FixSet::new(mip.integer_indices());
        let m = inst.topology.periods;
        let p =
            partition_fix_set(&fix, m, &var_periods(&mip).expect("scp names"), m).expect("m > 0");
        let mut s = RlState::initial(1.0, 0.0);
        let mut prev = exact(&state_mip(&s, &fix, &p, &mip).expect("valid")).expect("solves");
        let mut order: Vec<usize> = (0..m).collect();
        if r.random_bool(0.5) {
            order.reverse();
        }
        for k in order {
            s = transition(&s, Action::Insert(k), m).expect("fresh subset");
            let cur = exact(&state_mip(&s, &fix, &p, &mip).expect("valid")).expect("solves");
            pairs += 1;
            if cur > prev + 1e-6 {
                bad += 1;
            }
            prev = cur;
        }
    }
    let el = t0.elapsed();
    outcome(
        bad == 0 && within(el, 60),
        format!("{used} instances, {pairs} nested pairs, {bad} violations, {el:.1?}"),
    )
}

fn trace(lp: f64, pts: &[(f64, f64)], h: f64) -> GapTrace {
    GapTrace::new(
        lp,
        pts.iter()
            .map(|&(time, objective)| TraceEntry { time, objective })
            .collect(),
        h,
    )
    .expect("sorted")
}

/// Integral of `gap_at` on a fine grid, refining each cell that contains a
/// jump by bisection down to 1e-13.
fn quadrature(tr: &GapTrace) -> f64 {
    let g = |t: f64| gap_at(tr, t).expect("in range");
    let cells = 20_000;
    let h = tr.horizon / cells as f64;
    let mut sum = 0.0;
    for k in 0..cells {
        let (a, b) = (k as f64 * h, ((k + 1) as f64 * h).min(tr.horizon));
        let (ga, gb) = (g(a), g(b));
        if ga == gb {
            sum += ga * (b - a);
            continue;
        }
        let (mut lo, mut hi) = (a, b);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if g(mid) == ga {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let inner = g(0.5 * (hi + b));
        if inner != gb {
            // two jumps in one cell: fall back to a much finer sweep
            let n = 100_000;
            let dh = (b - a) / n as f64;
            sum += (0..n)
                .map(|i| g(a + (i as f64 + 0.5) * dh) * dh)
                .sum::<f64>();
            continue;
        }
        sum += ga * (lo - a) + gb * (b - lo);
    }
    sum
}

fn metric_identities() -> Outcome {
    let mut fails: Vec<&str> = Vec::new();
    let mut check = |ok: bool, what: &'static str| {
        if !ok {
            fails.push(what);
        }
    };
    check(primal_gap(0.0, 0.0) == 0.0, "gap both zero");
    check(primal_gap(-5.0, 3.0) == 1.0, "gap opposite signs");
    check(primal_gap(110.0, 100.0) == 10.0 / 110.0, "gap 110/100");
    let empty = trace(5.0, &[], 10.0);
    check(
        (0..=10).all(|t| gap_at(&empty, t as f64) == Ok(1.0)),
        "empty trace gap",
    );
    check(primal_integral(&empty, 10.0) == Ok(10.0), "empty integral");
    let exact0 = trace(5.0, &[(0.0, 5.0)], 10.0);
    check(
        (0..=10).all(|t| gap_at(&exact0, t as f64) == Ok(0.0)),
        "optimal at zero gap",
    );
    check(
        primal_integral(&exact0, 10.0) == Ok(0.0),
        "optimal at zero integral",
    );
    let step = trace(1.0, &[(2.0, 2.0)], 4.0);
    check(primal_integral(&step, 4.0) == Ok(3.0), "piecewise 2 + 1");
    let two = trace(10.0, &[(1.0, 20.0), (3.0, 12.5)], 5.0);
    check(
        gap_at(&two, 1.0) == Ok(0.5)
            && gap_at(&two, 2.9) == Ok(0.5)
            && gap_at(&two, 3.0) == Ok(0.2),
        "step behaviour",
    );
    check(gap_at(&two, 5.5).is_err(), "out of range rejected");

    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let horizon = r.random_range(1.0..100.0);
        let lp = r.random_range(-50.0..50.0);
        let n = r.random_range(0..8);
        let mut times: Vec<f64> = (0..n).map(|_| r.random_range(0.0..horizon)).collect();
        times.sort_by(f64::total_cmp);
        let pts: Vec<(f64, f64)> = times
            .into_iter()
            .map(|t| (t, r.random_range(-80.0..80.0)))
            .collect();
        let tr = trace(lp, &pts, horizon);
        let pi = primal_integral(&tr, horizon).expect("valid horizon");
        worst = worst.max((pi - quadrature(&tr)).abs());
    }
    check(worst <= 1e-6, "integral vs quadrature");
    outcome(
        fails.is_empty(),
        format!("failed {fails:?}; max |PI - quadrature| = {worst:.2e} on 100 traces"),
    )
}

/// Every parameter, biases included, uniform in [-1, 1].
fn randomize(net: &mut Mlp, r: &mut impl Rng) {
    let p: Vec<f64> = (0..net.num_params())
        .map(|_| r.random_range(-1.0..1.0))
        .collect();
    net.set_params(&p);
}

fn gradient_checks() -> Outcome {
    let mut r = rng(5);
    let mut worst_mlp: f64 = 0.0;
    for _ in 0..20 {
        let depth = r.random_range(1..4);
        let mut sizes = vec![r.random_range(1..7)];
        sizes.extend((0..depth).map(|_| r.random_range(2..9)));
        sizes.push(r.random_range(1..4));
        let mut net = Mlp::new(&sizes, &mut r);
        randomize(&mut net, &mut r);
        let x: Vec<f64> = (0..sizes[0]).map(|_| r.random_range(-1.5..1.5)).collect();
        let y: Vec<f64> = (0..*sizes.last().unwrap())
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        let loss = |n: &Mlp| {
            n.forward(&x)
                .iter()
                .zip(&y)
                .map(|(o, t)| 0.5 * (o - t).powi(2))
                .sum::<f64>()
        };
        let tr = net.forward_trace(&x);
        let dout: Vec<f64> = tr.output.iter().zip(&y).map(|(o, t)| o - t).collect();
        let mut g = Grads::zeros_like(&net);
        net.backward(&tr, &dout, &mut g);
        worst_mlp = worst_mlp.max(max_rel_error(
            &g.flat(),
            &numeric_grad(&net, 1e-5, loss),
            1e-6,
        ));
    }
    let mut worst_q: f64 = 0.0;
    for k in 0..20 {
        let m = r.random_range(1..6);
        let mut q = QNet::new(m, r.random_range(2..12), 100 + k);
        randomize(&mut q.net, &mut r);
        let batch: Vec<(Transition, f64)> = (0..r.random_range(1..4))
            .map(|_| {
                let mut actions = Vec::new();
                for i in 0..m {
                    match r.random_range(0..3) {
                        0 => actions.push(Action::Insert(i)),
                        1 => actions.push(Action::Exclude(i)),
                        _ => {}
                    }
                }
                let t = Transition {
                    state: (0..state_dim(m))
                        .map(|_| r.random_range(-1.0..1.0))
                        .collect(),
                    actions,
                    reward: r.random_range(-1.0..0.0),
                    next_state: vec![0.0; state_dim(m)],
                    next_available: vec![],
                    terminal: true,
                };
                (t, r.random_range(-1.0..1.0))
            })
            .collect();
        let refs: Vec<(&Transition, f64)> = batch.iter().map(|(t, y)| (t, *y)).collect();
        let (_, g) = residual_grad(&q, &refs);
        let num = numeric_grad(&q.net, 1e-5, |n| {
            residual_grad(&QNet { m, net: n.clone() }, &refs).0
        });
        worst_q = worst_q.max(max_rel_error(&g.flat(), &num, 1e-6));
    }
    outcome(
        worst_mlp <= 1e-4 && worst_q <= 1e-4,
        format!("max relative error: MLP {worst_mlp:.2e}, Q-net {worst_q:.2e} (20 configs each)"),
    )
}

fn formula_checks() -> Outcome {
    let mut r = rng(6);
    let mut rc_ok = true;
    for _ in 0..1000 {
        let rcs: Vec<f64> = (0..r.random_range(1..20))
            .map(|_| r.random_range(-1e3..1e3))
            .collect();
        let s = rcs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for &rc in &rcs {
            let v = normalized_rc(rc, s).expect("s > 0");
            rc_ok &= (-0.25..=0.25).contains(&v);
        }
    }
    rc_ok &=
        normalized_rc(1.0, 1.0).ok() == Some(-0.25) && normalized_rc(-1.0, 1.0).ok() == Some(0.25);

    let mut ce_ok = true;
    for _ in 0..1000 {
        let p: f64 = r.random_range(1e-9..1.0 - 1e-9);
        ce_ok &= weighted_ce_loss(p, 1, 1.0, 1.0) == -p.ln();
        ce_ok &= weighted_ce_loss(p, 0, 1.0, 1.0) == -(1.0 - p).ln();
    }

    let mut w_ok = true;
    for _ in 0..200 {
        let psis: Vec<u8> = (0..r.random_range(1..30))
            .map(|_| u8::from(r.random_bool(0.4)))
            .collect();
        let k = psis.iter().filter(|&&p| p == 1).count();
        let (w_fp, w_fn) = compute_weights(&psis);
        w_ok &= w_fp.iter().all(|&w| w == 1.0);
        for (p, w) in psis.iter().zip(&w_fn) {
            let want = if *p == 1 { (1.0 / k as f64).exp() } else { 1.0 };
            w_ok &= (w - want).abs() <= 1e-15;
        }
    }
    outcome(
        rc_ok && ce_ok && w_ok,
        format!("rc bounds {rc_ok}, unit-weight loss {ce_ok}, FN weights {w_ok}"),
    )
}

fn worked_example() -> Outcome {
    let (mip, topo) = two_period_example();
    let g = build_directed_graph(&mip, &topo).expect("fixture is an scp model");
    // products a=0, b=1, c=2; periods t=1, t+1=2
    let listed: [(&str, Vec<(usize, usize)>); 7] = [
        ("z[0,1]", vec![(0, 1), (1, 2), (2, 2)]),
        ("x[0,1]", vec![(0, 1)]),
        ("z[0,2]", vec![(0, 2), (1, 2), (2, 2)]),
        ("x[1,2]", vec![(1, 2)]),
        ("x[0,2]", vec![]),
        ("x[1,2]", vec![(1, 2)]),
        ("x[2,2]", vec![(2, 2)]),
    ];
    let mut wrong = Vec::new();
    for (var, want) in &listed {
        let got = extract_feature_spec(&g, var)
            .map(|s| s.demand_refs)
            .unwrap_or_default();
        let (mut a, mut b) = (got.clone(), want.clone());
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            wrong.push(format!("{var}: got {got:?}, listed {want:?}"));
        }
    }
    outcome(
        wrong.is_empty(),
        format!("{}/7 sets match; {}", 7 - wrong.len(), wrong.join("; ")),
    )
}

fn benchmark_config() -> RunConfig {
    RunConfig {
        seed: 1,
        scale: 0.05,
        extra_test: 20,
        layers: vec![3],
        hiddens: vec![32],
        epochs: 400,
        ..RunConfig::default()
    }
}

fn run_pipeline(cfg: &RunConfig, root: &Path) -> Vec<ResultRow> {
    let data = root.join("data");
    let models = root.join("models");
    let eval = root.join("eval");
    pipeline::generate(cfg, &data, false).expect("generate");
    pipeline::train(cfg, &data, &models).expect("train");
    pipeline::evaluate(cfg, &data, Some(&models), &eval)
        .expect("evaluate")
        .rows
}

fn by_instance(rows: &[ResultRow], m: Method) -> HashMap<&str, &ResultRow> {
    rows.iter()
        .filter(|r| r.method == m)
        .map(|r| (r.instance.as_str(), r))
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn scaled_benchmark(rows: &[ResultRow], el: Duration) -> Outcome {
    let opt = by_instance(rows, Method::Opt);
    let prop = by_instance(rows, Method::Prop);
    let pi_opt = mean(opt.values().map(|r| r.pi));
    let pi_prop = mean(prop.values().map(|r| r.pi));
    let pi_red = 1.0 - pi_prop / pi_opt;
    let per_inst = mean(
        prop.iter()
            .filter_map(|(k, p)| pipeline::reduction(opt[k].pi, p.pi)),
    );
    let fixed = mean(prop.values().map(|r| r.n_fixed as f64 / r.n_int as f64));
    outcome(
        prop.len() == opt.len() && pi_red >= 0.20 && fixed >= 0.25 && within(el, 15 * 60),
        format!(
            "{} test instances; mean PI OPT {pi_opt:.3} PROP {pi_prop:.3} ({:.1}% lower, per-instance avg {:.1}%); fixed {:.1}% of integers; {el:.0?}",
            prop.len(),
            100.0 * pi_red,
            100.0 * per_inst,
            100.0 * fixed
        ),
    )
}

fn drl_value(rows: &[ResultRow], tolerance: f64) -> Outcome {
    let prop = by_instance(rows, Method::Prop);
    let propel = by_instance(rows, Method::Propel);
    if propel.is_empty() {
        return outcome(false, "no PROPEL rows (Q-network was not trained)");
    }
    let missed: Vec<&str> = prop
        .iter()
        .filter(|(_, r)| r.pg > tolerance)
        .map(|(k, _)| *k)
        .collect();
    let not_worse = missed
        .iter()
        .filter(|k| propel[**k].pg <= prop[**k].pg)
        .count();
    let improved = missed
        .iter()
        .filter(|k| propel[**k].pg < prop[**k].pg)
        .count();
    let never_worse = prop.iter().all(|(k, p)| propel[k].pg <= p.pg);
    let share = not_worse as f64 / missed.len().max(1) as f64;
    outcome(
        !missed.is_empty() && share >= 0.8 && never_worse,
        format!(
            "{} instances miss tolerance; PROPEL gap <= PROP in {not_worse} ({:.0}%), strictly better in {improved}; never worse: {never_worse}",
            missed.len(),
            100.0 * share
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = RunConfig {
        seed: 7,
        scale: 0.05,
        layers: vec![2],
        hiddens: vec![16],
        lrs: vec![0.01],
        epochs: 30,
        ..RunConfig::default()
    };
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    run_pipeline(&cfg, a.path());
    run_pipeline(&cfg, b.path());
    let read = |d: &Path| std::fs::read(d.join("eval").join(pipeline::RESULTS)).expect("results");
    let (ra, rb) = (read(a.path()), read(b.path()));
    let rep = |d: &Path| {
        let rows = pipeline::read_results(&d.join("eval").join(pipeline::RESULTS)).expect("parse");
        let traces = pipeline::read_traces(&d.join("eval").join(pipeline::TRACES)).expect("traces");
        pipeline::render_report(&pipeline::report(&rows, Some(&traces)).expect("report"))
    };
    outcome(
        ra == rb && rep(a.path()) == rep(b.path()),
        format!("results.csv {} bytes, identical: {}", ra.len(), ra == rb),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let o = f();
        println!(
            "{} criterion {id:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o));
    };
    run(1, "oracle equivalence", &oracle_equivalence);
    run(2, "restriction bound", &restriction_bound);
    run(3, "unfix monotonicity", &unfix_monotonicity);
    run(4, "metric identities", &metric_identities);
    run(5, "gradient checks", &gradient_checks);
    run(6, "formula checks", &formula_checks);
    run(7, "worked-example fidelity", &worked_example);

    let cfg = benchmark_config();
    let dir = tempfile::tempdir().expect("tempdir");
    let t0 = Instant::now();
    let rows = run_pipeline(&cfg, dir.path());
    let el = t0.elapsed();
    run(8, "scaled benchmark", &|| scaled_benchmark(&rows, el));
    run(9, "DRL value", &|| drl_value(&rows, cfg.eps_tolerance));
    run(10, "determinism", &determinism);

    let failed: Vec<u32> = results
        .iter()
        .filter(|(_, _, o)| !o.pass)
        .map(|(id, _, _)| *id)
        .collect();
    println!(
        "acceptance: {} passed, {} failed {failed:?}",
        results.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
