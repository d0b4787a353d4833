//! Acceptance suite: ten release-gate checks covering worked metric values,
//! gradient correctness, aggregation properties, distributivity, metric
//! ranges, filter behavior, the end-to-end desk-scale experiment, and
//! pipeline determinism. Each check prints one `[PASS]`/`[FAIL]` line
//! (visible with `--nocapture`).

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wstl_core::agg::{agg_conj, agg_disj, agg_event, agg_glob};
use wstl_core::formula::{distribute_weights, robustness as formula_robustness};
use wstl_core::metrics::{
    conciseness, consistency, stl_counterpart, strictness, ClauseView,
};
use wstl_core::simplify::filter_predicates;
use wstl_core::template::{
    loss_tape, template_forward, to_formula, total_loss, TrainData,
};
use wstl_core::trajectory::{literal_channels, precompute_robustness};
use wstl_core::{
    to_canonical_string, AggregationConfig, Clause, Feature, Formula, Interval, Literal,
    PredicateSpec, PredicateTable, SimplifyConfig, TemplateParams, TrainConfig, Trajectory,
};
use wstl_explain::generator::{generate_reach_avoid, reach_avoid_schema, GeneratorConfig};
use wstl_explain::runner::{evaluate_runs, run_seeds, RunConfig};

fn report(criterion: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] {criterion}: {detail}");
    assert!(passed, "{criterion}: {detail}");
}

fn unit_table(n: usize) -> PredicateTable {
    PredicateTable::new(
        (0..n)
            .map(|i| {
                PredicateSpec::new(format!("p{i}"), Feature::Coord { index: i }, 0.0, 1.0, -1.0)
                    .unwrap()
            })
            .collect(),
    )
}

#[test]
fn c01_strictness_worked_example() {
    // F[(0.5 psi0 v 0.25 psi1) ^ 0.25 psi2] with P = 6: two clauses give
    // C = 1 conjunction, D = 1 disjunction, so 1 / (6 - 1 + 1) = 1/6.
    let clause1 = Formula::or(
        vec![2.0 / 3.0, 1.0 / 3.0],
        vec![
            Formula::Literal(Literal::pos(0)),
            Formula::Literal(Literal::pos(1)),
        ],
    )
    .unwrap();
    let inner = Formula::and(
        vec![0.75, 0.25],
        vec![clause1, Formula::Literal(Literal::pos(2))],
    )
    .unwrap();
    let phi = Formula::eventually_uniform(Interval::new(0, 5).unwrap(), inner);
    let (f_view, _) = stl_counterpart(&phi).unwrap();
    let s = strictness(&[f_view], 6).unwrap();
    let expected = 1.0 / 6.0;
    report(
        "criterion 1 (strictness worked example)",
        (s - expected).abs() < 1e-15,
        &format!("clause strictness {s:.6}, expected {expected:.6}"),
    );
}

#[test]
fn c02_stl_counterpart_worked_example() {
    // G(0.1 psi1 ^ 0.9 psi2) strips to G(psi1 ^ psi2); the F slot is empty.
    let inner = Formula::and(
        vec![0.1, 0.9],
        vec![
            Formula::Literal(Literal::pos(1)),
            Formula::Literal(Literal::pos(2)),
        ],
    )
    .unwrap();
    let phi = Formula::globally_uniform(Interval::new(0, 3).unwrap(), inner);
    let (f_view, g_view) = stl_counterpart(&phi).unwrap();
    let mut expected = std::collections::BTreeSet::new();
    expected.insert([Literal::pos(1)].into_iter().collect());
    expected.insert([Literal::pos(2)].into_iter().collect());
    let ok = !f_view.present && g_view.present && g_view.literal_clauses == expected;
    report(
        "criterion 2 (STL counterpart worked example)",
        ok,
        "G(0.1 psi1 ^ 0.9 psi2) strips to G(psi1 ^ psi2) with empty F slot",
    );
}

fn random_train_data(
    rng: &mut ChaCha8Rng,
    n_ap: usize,
    horizon: usize,
    n_traj: usize,
) -> (PredicateTable, TrainData) {
    let table = unit_table(n_ap);
    let mut trajs = Vec::new();
    for i in 0..n_traj {
        let states: Vec<Vec<f64>> = (0..=horizon)
            .map(|_| (0..n_ap).map(|_| rng.gen_range(-0.9..0.9)).collect())
            .collect();
        let label = if rng.gen_bool(0.5) { 1 } else { -1 };
        trajs.push(Trajectory::new(format!("t{i}"), label, states).unwrap());
    }
    let predicates: Vec<usize> = (0..n_ap).collect();
    let lits = literal_channels(&predicates);
    let tensor = precompute_robustness(&trajs, &table, &lits).unwrap();
    let labels: Vec<i8> = trajs.iter().map(Trajectory::label).collect();
    (table, TrainData::new(tensor, labels).unwrap())
}

#[test]
fn c03_gradient_matches_finite_differences() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n_ap = rng.gen_range(2..=4);
        let horizon = rng.gen_range(2..=10);
        let (_, data) = random_train_data(&mut rng, n_ap, horizon, 6);
        let predicates: Vec<usize> = (0..n_ap).collect();
        let mut params = TemplateParams::init(predicates, 1000 + case).unwrap();
        for clause in [Clause::F, Clause::G] {
            for s in params.scores_mut(clause) {
                *s = rng.gen_range(-0.5..0.5);
            }
        }
        let cfg = TrainConfig {
            epochs: 1,
            seed: case,
            ..TrainConfig::default()
        };
        let indices: Vec<usize> = (0..data.len()).collect();
        let (tape, loss, layout) = loss_tape(&params, &data, &indices, &cfg).unwrap();
        let analytic = tape.gradient(loss);
        let h = 1e-5;
        for (g, &(clause, k)) in analytic.iter().zip(&layout.entries) {
            let mut plus = params.clone();
            plus.scores_mut(clause)[k] += h;
            let mut minus = params.clone();
            minus.scores_mut(clause)[k] -= h;
            let numeric = (total_loss(&plus, &data, &indices, &cfg).unwrap()
                - total_loss(&minus, &data, &indices, &cfg).unwrap())
                / (2.0 * h);
            let rel = (g - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    let elapsed = started.elapsed();
    report(
        "criterion 3 (gradient correctness)",
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        &format!(
            "100 instances, worst relative error {worst:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c04_smooth_aggregation_limit() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let smooth = AggregationConfig::smooth(1e-3).unwrap();
    let exact = AggregationConfig::exact();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=8);
        let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // force a winner-runner-up gap of at least 0.1 at both extremes
        let (mut lo, mut hi) = (0usize, 0usize);
        for (i, &v) in values.iter().enumerate() {
            if v < values[lo] {
                lo = i;
            }
            if v > values[hi] {
                hi = i;
            }
        }
        values[lo] -= 0.15;
        values[hi] += 0.15;
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let dc = (agg_conj(&weights, &values, &smooth).unwrap()
            - agg_conj(&weights, &values, &exact).unwrap())
        .abs();
        let dd = (agg_disj(&weights, &values, &smooth).unwrap()
            - agg_disj(&weights, &values, &exact).unwrap())
        .abs();
        worst = worst.max(dc).max(dd);
    }
    let elapsed = started.elapsed();
    report(
        "criterion 4 (sigma -> 0 aggregation limit)",
        worst < 1e-2 && elapsed < Duration::from_secs(10),
        &format!(
            "10k vectors, worst deviation from exact min/max {worst:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c05_weight_scale_invariance() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let cfg = AggregationConfig::smooth(0.5).unwrap();
    let aggs: [fn(&[f64], &[f64], &AggregationConfig) -> wstl_core::error::Result<f64>; 4] =
        [agg_conj, agg_disj, agg_glob, agg_event];
    let mut worst = 0.0f64;
    for case in 0..10_000 {
        let n = rng.gen_range(2..=6);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let agg = aggs[case % 4];
        let base = agg(&weights, &values, &cfg).unwrap();
        for c in [1e-3, 1.0, 1e3] {
            let scaled: Vec<f64> = weights.iter().map(|w| w * c).collect();
            worst = worst.max((agg(&scaled, &values, &cfg).unwrap() - base).abs());
        }
    }
    let elapsed = started.elapsed();
    report(
        "criterion 5 (weight scale invariance)",
        worst < 1e-12 && elapsed < Duration::from_secs(10),
        &format!(
            "10k cases x c in {{1e-3, 1, 1e3}}, worst change {worst:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn random_nested_cnf(rng: &mut ChaCha8Rng, n_preds: usize) -> Formula {
    let k = rng.gen_range(1..=3);
    let mut clauses = Vec::with_capacity(k);
    for _ in 0..k {
        let m = rng.gen_range(1..=3);
        let lits: Vec<Formula> = (0..m)
            .map(|_| {
                let p = rng.gen_range(0..n_preds);
                if rng.gen_bool(0.5) {
                    Formula::Literal(Literal::pos(p))
                } else {
                    Formula::Literal(Literal::neg(p))
                }
            })
            .collect();
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        clauses.push(Formula::or(weights, lits).unwrap());
    }
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    Formula::and(weights, clauses).unwrap()
}

#[test]
fn c06_distributivity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);

    // syntactic: distributed weights over the CNF sum back to 1
    let mut worst_sum = 0.0f64;
    for _ in 0..1000 {
        let phi = random_nested_cnf(&mut rng, 4);
        let cnf = distribute_weights(&phi).unwrap();
        worst_sum = worst_sum.max((cnf.total_weight() - 1.0).abs());
    }

    // semantic: template robustness equals the robustness of the rendered
    // nested-CNF formula
    let mut worst_sem = 0.0f64;
    let agg = AggregationConfig::smooth(0.5).unwrap();
    for case in 0..1000 {
        let n_ap = rng.gen_range(2..=4);
        let horizon = rng.gen_range(2..=8);
        let table = unit_table(n_ap);
        let mut params = TemplateParams::init((0..n_ap).collect(), 600 + case).unwrap();
        for clause in [Clause::F, Clause::G] {
            for s in params.scores_mut(clause) {
                *s = rng.gen_range(-1.0..1.0);
            }
        }
        let states: Vec<Vec<f64>> = (0..=horizon)
            .map(|_| (0..n_ap).map(|_| rng.gen_range(-0.9..0.9)).collect())
            .collect();
        let tau = Trajectory::new("t".into(), 1, states).unwrap();
        let direct = template_forward(&params, &table, &tau, &agg).unwrap();
        let phi = to_formula(&params, horizon).unwrap();
        let nested = formula_robustness(&phi, &table, &tau, 0, &agg).unwrap();
        worst_sem = worst_sem.max((direct - nested).abs());
    }

    let elapsed = started.elapsed();
    report(
        "criterion 6 (distributivity)",
        worst_sum < 1e-9 && worst_sem < 1e-10 && elapsed < Duration::from_secs(30),
        &format!(
            "1000 CNFs: weight-sum error {worst_sum:.2e}; 1000 instances: \
             semantic gap {worst_sem:.2e}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c07_metric_ranges() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut in_range = true;
    let mut views_pool: Vec<Vec<ClauseView>> = Vec::new();
    for case in 0..10_000 {
        let n_ap = rng.gen_range(1..=4);
        let mut params = TemplateParams::init((0..n_ap).collect(), 700 + case).unwrap();
        for clause in [Clause::F, Clause::G] {
            for s in params.scores_mut(clause) {
                *s = rng.gen_range(-2.0..2.0);
            }
            for m in params.mask_mut(clause) {
                *m = rng.gen_bool(0.7);
            }
        }
        if params.active_count(Clause::F) + params.active_count(Clause::G) == 0 {
            continue;
        }
        let phi = to_formula(&params, 4).unwrap();
        let (f_view, g_view) = stl_counterpart(&phi).unwrap();
        let views = vec![f_view, g_view];
        let c = conciseness(&views);
        let s = strictness(&views, 2 * params.n_ap()).unwrap();
        in_range &= (0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&s);
        views_pool.push(views);
    }
    // consistency over random run groupings stays in range
    for chunk in views_pool.chunks(8).take(500) {
        let k = consistency(chunk, 2);
        in_range &= (0.0..=1.0).contains(&k);
    }
    // = 1 exactly for identical complete runs
    let complete = views_pool
        .iter()
        .find(|v| v[0].present && v[1].present)
        .unwrap()
        .clone();
    let identical = vec![complete.clone(); 5];
    let one = consistency(&identical, 2);
    // < 1 for identical but incomplete runs
    let incomplete_views = views_pool
        .iter()
        .find(|v| v[0].present != v[1].present)
        .unwrap()
        .clone();
    let incomplete = vec![incomplete_views; 5];
    let below_incomplete = consistency(&incomplete, 2);
    // < 1 for structurally different runs
    let other = views_pool
        .iter()
        .find(|v| {
            v[0].present && v[1].present && v[0].literal_clauses != complete[0].literal_clauses
        })
        .unwrap()
        .clone();
    let mixed = vec![complete, other];
    let below_mixed = consistency(&mixed, 2);
    let elapsed = started.elapsed();
    report(
        "criterion 7 (metric ranges)",
        in_range
            && (one - 1.0).abs() < 1e-15
            && below_incomplete < 1.0
            && below_mixed < 1.0
            && elapsed < Duration::from_secs(10),
        &format!(
            "10k fuzz cases in [0,1]; consistency 1 iff identical+complete \
             ({one:.3} / {below_incomplete:.3} / {below_mixed:.3}); {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c08_filter_behavior() {
    let started = Instant::now();
    let simp = SimplifyConfig::default(); // S_th = 0.99
    let mut all_ok = true;
    for seed in 0..10 {
        let gen_cfg = GeneratorConfig {
            n_positive: 200,
            n_negative: 200,
            seed,
            ..GeneratorConfig::default()
        };
        let (data, _) = generate_reach_avoid(&gen_cfg).unwrap();
        let schema = reach_avoid_schema(&gen_cfg);
        let (table, _) = schema.build_table(&data).unwrap();
        let predicates: Vec<usize> = (0..table.len()).collect();
        let rep = filter_predicates(&data, &table, &predicates, &simp).unwrap();
        let goal = table.index_of("goal").unwrap();
        let hazard = table.index_of("hazard").unwrap();
        let constant = table.index_of("in_arena_x").unwrap();
        let ok = rep.retained.contains(&goal)
            && rep.retained.contains(&hazard)
            && !rep.retained.contains(&constant);
        all_ok &= ok;
    }
    let elapsed = started.elapsed();
    report(
        "criterion 8 (predicate filter behavior)",
        all_ok && elapsed < Duration::from_secs(60),
        &format!(
            "10 seeds: constant predicate removed, goal/hazard retained, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

struct Execution {
    canonical: Vec<String>,
    report_json: String,
    accuracies: Vec<f64>,
    conciseness_mean: f64,
    strictness_mean: f64,
    modal_ok: bool,
}

struct Experiment {
    first: Execution,
    second: Execution,
    first_runtime: Duration,
}

fn run_experiment_once(
    data: &[Trajectory],
    table: &PredicateTable,
    cfg: &RunConfig,
) -> Execution {
    let seeds: Vec<u64> = (0..10).collect();
    let runs = run_seeds(data, table, &[], cfg, &seeds, None, 1).unwrap();
    let report = evaluate_runs(data, table, cfg, &runs).unwrap();
    let canonical: Vec<String> = runs
        .iter()
        .map(|r| to_canonical_string(&r.explanation.formula, table, 6))
        .collect();

    // modal explanation: most frequent weight-stripped (F, G) structure
    let mut groups: Vec<(Vec<ClauseView>, usize)> = Vec::new();
    for run in &runs {
        let (f, g) = stl_counterpart(&run.explanation.formula).unwrap();
        let views = vec![f, g];
        match groups.iter_mut().find(|(v, _)| {
            v[0].literal_clauses == views[0].literal_clauses
                && v[1].literal_clauses == views[1].literal_clauses
                && v[0].present == views[0].present
                && v[1].present == views[1].present
        }) {
            Some((_, c)) => *c += 1,
            None => groups.push((views, 1)),
        }
    }
    let modal = &groups.iter().max_by_key(|(_, c)| *c).unwrap().0;
    let goal = table.index_of("goal").unwrap();
    let hazard = table.index_of("hazard").unwrap();
    let modal_ok = modal[0].present
        && modal[1].present
        && modal[0]
            .literal_clauses
            .iter()
            .any(|cl| cl.contains(&Literal::pos(goal)))
        && modal[1]
            .literal_clauses
            .iter()
            .any(|cl| cl.contains(&Literal::neg(hazard)));

    Execution {
        canonical,
        report_json: serde_json::to_string_pretty(&report).unwrap(),
        accuracies: report.per_seed.iter().map(|m| m.test_accuracy).collect(),
        conciseness_mean: report.conciseness.mean,
        strictness_mean: report.strictness.mean,
        modal_ok,
    }
}

fn experiment() -> &'static Experiment {
    static EXPERIMENT: OnceLock<Experiment> = OnceLock::new();
    EXPERIMENT.get_or_init(|| {
        let gen_cfg = GeneratorConfig::default(); // 500 + 500, seed 0
        let (data, _) = generate_reach_avoid(&gen_cfg).unwrap();
        let schema = reach_avoid_schema(&gen_cfg);
        let (table, _) = schema.build_table(&data).unwrap();
        let cfg = RunConfig::default(); // Table-defaults, N_pr = 20, 80/20 split
        let started = Instant::now();
        let first = run_experiment_once(&data, &table, &cfg);
        let first_runtime = started.elapsed();
        let second = run_experiment_once(&data, &table, &cfg);
        Experiment {
            first,
            second,
            first_runtime,
        }
    })
}

#[test]
fn c09_end_to_end_experiment() {
    let exp = experiment();
    let e = &exp.first;
    let high_acc = e.accuracies.iter().filter(|&&a| a >= 0.95).count();
    let ok = high_acc >= 8
        && e.modal_ok
        && e.conciseness_mean >= 0.35
        && e.strictness_mean >= 0.08
        && exp.first_runtime < Duration::from_secs(20 * 60);
    report(
        "criterion 9 (end-to-end experiment)",
        ok,
        &format!(
            "{high_acc}/10 seeds with accuracy >= 0.95; modal F contains goal and \
             G contains not-hazard: {}; conciseness {:.3}; strictness {:.3}; {:.0}s",
            e.modal_ok,
            e.conciseness_mean,
            e.strictness_mean,
            exp.first_runtime.as_secs_f64()
        ),
    );
}

#[test]
fn c10_pipeline_determinism() {
    let exp = experiment();
    let strings_equal = exp.first.canonical == exp.second.canonical;
    let reports_equal = exp.first.report_json == exp.second.report_json;
    report(
        "criterion 10 (pipeline determinism)",
        strings_equal && reports_equal,
        &format!(
            "two executions: canonical strings identical = {strings_equal}, \
             metric reports byte-identical = {reports_equal}"
        ),
    );
}
