//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runtime budgets are part of each criterion.

mod common;

use std::time::{Duration, Instant};

use common::{projected_gradient, random_box_qp};
use ddpc::bench::{run_table1, RunConfig};
use ddpc::data::{check_assumptions, collect_sequences, DataMatrices, DataShape, ExcitationSpec};
use ddpc::equivalence::{
    scenario_window, verify_kernel_inclusion, verify_lemma2, verify_theorem1_with, verify_theorem2, EquivalenceReport,
    Theorem1Options,
};
use ddpc::error::Error;
use ddpc::lti::{NoiseSpec, StateSpaceModel};
use ddpc::ocp::{
    explicit_deepc_unconstrained, explicit_spc_unconstrained, solve_deepc_regularized, solve_spc_regularized, BoxConstraints,
    RegWeights, RegulationObjective,
};
use ddpc::plant::{build_benchmark_model, random_stable_minimal, BenchmarkParams};
use ddpc::predictor::identify;
use ddpc::qp::{solve_qp, QpOptions};
use rand::SeedableRng;

const T_INI: usize = 4;
const HORIZON: usize = 40;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn bench() -> StateSpaceModel {
    build_benchmark_model(&BenchmarkParams::default()).expect("benchmark plant")
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.3e}"))
}

fn describe(r: &EquivalenceReport) -> String {
    let failed: Vec<usize> = r.evaluated().filter(|s| !r.scenario_passed(s)).map(|s| s.index).collect();
    if failed.is_empty() {
        String::new()
    } else {
        format!(", failing scenarios {failed:?}")
    }
}

fn deterministic_equivalence() -> Outcome {
    let model = bench();
    let shape = DataShape::for_model(&model, 150, T_INI, HORIZON).unwrap();
    let opts = Theorem1Options {
        closed_loop: true,
        ..Theorem1Options::default()
    };
    let mut passed = true;
    let mut detail = String::new();
    match verify_theorem1_with(&model, shape, 25, 0, &opts) {
        Ok(r) => {
            let d = r.max_deviations();
            passed &= r.passed() && r.evaluated().count() == 25;
            detail += &format!(
                "benchmark: 25 scenarios, max |du| {}, max closed-loop |du| {}, max cost gap {}{}",
                fmt(d.u),
                fmt(d.closed_loop_u),
                fmt(d.closed_loop_cost),
                describe(&r)
            );
        }
        Err(e) => {
            passed = false;
            detail += &format!("benchmark: {e}");
        }
    }
    for k in 0..5u64 {
        let (n, m, p) = (2 + (k as usize % 5), 1 + (k as usize % 2), 1 + ((k as usize + 1) % 2));
        let plant = random_stable_minimal(n, m, p, 100 + k).unwrap();
        let t_ini = plant.system_lag().unwrap() + 1;
        let l = t_ini + 10;
        let shape = DataShape::for_model(&plant, l * m + n + 30, t_ini, 10).unwrap();
        match verify_theorem1_with(&plant, shape, 5, 100 + k, &opts) {
            Ok(r) => {
                let d = r.max_deviations();
                passed &= r.passed() && r.evaluated().count() == 5;
                detail += &format!(
                    "; plant {k} (n={n}, m={m}, p={p}): |du| {}, cost gap {}{}",
                    fmt(d.u),
                    fmt(d.closed_loop_cost),
                    describe(&r)
                );
            }
            Err(e) => {
                passed = false;
                detail += &format!("; plant {k}: {e}");
            }
        }
    }
    Outcome::new(passed, detail)
}

fn regularized_equivalence() -> Outcome {
    match verify_theorem2(&bench(), T_INI, HORIZON, 0) {
        Ok(r) => {
            let d = r.max_deviations();
            let evaluated = r.evaluated().count();
            Outcome::new(
                r.passed() && evaluated + r.n_skipped() == 25 && evaluated > 0,
                format!(
                    "T={}, {evaluated} evaluated, {} skipped, max |dv| {}, max cost gap {}{}",
                    r.descriptor.t,
                    r.n_skipped(),
                    fmt(d.v),
                    fmt(d.objective),
                    describe(&r)
                ),
            )
        }
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

fn predictor_exactness() -> Outcome {
    let model = bench();
    let shape = DataShape::for_model(&model, 150, T_INI, HORIZON).unwrap();
    match verify_lemma2(&model, shape, 100, 0) {
        Ok(r) => Outcome::new(
            r.passed() && r.evaluated().count() == 100,
            format!("100 windows, max prediction error {} (tol 1e-8){}", fmt(r.max_deviations().prediction), describe(&r)),
        ),
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

fn kernel_inclusion() -> Outcome {
    let model = bench();
    let shape = DataShape::for_model(&model, 150, T_INI, HORIZON).unwrap();
    let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 0).unwrap();
    match verify_kernel_inclusion(&data) {
        Ok(r) => {
            let ratio = r.checks.iter().find(|c| c.name == "kernel_ratio").map(|c| c.value);
            let ratio_ok = ratio.is_some_and(|v| v <= 1e-8);
            let (rank, dim) = (r.rank.unwrap_or(0), r.nullspace_dim.unwrap_or(0));
            let formula_ok = dim == shape.t - rank;
            let literal_ok = dim == 50;
            Outcome::new(
                ratio_ok && formula_ok && literal_ok,
                format!(
                    "|Y_N K|_F / |Y_N|_F = {} (tol 1e-8), rank(M) = {rank}, dim = {dim}, T - rank = {}, required dim 50",
                    fmt(ratio),
                    shape.t - rank
                ),
            )
        }
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

fn explicit_and_oracle() -> Outcome {
    let model = bench();
    let obj = RegulationObjective::scaled_identity(3, 2, 1.0, 0.1).unwrap();
    let free = BoxConstraints::unbounded(2, 3);
    let base = DataShape::for_model(&model, 150, T_INI, HORIZON).unwrap();
    let mut worst: f64 = 0.0;
    let mut problems = Vec::new();
    let mut instances = 0;
    for seed in 0..5u64 {
        let noise = NoiseSpec::new(1e-2, seed).unwrap();
        let (win, _) = scenario_window(&model, T_INI, 1000 + seed, 1e-2).unwrap();
        for (t, lambda_g) in [(150, 1.0), (base.square_t(), 0.0)] {
            let data = collect_sequences(&model, base.with_t(t), &ExcitationSpec::default(), Some(&noise), seed).unwrap();
            let w = RegWeights::new(lambda_g, 1e4, 1e4).unwrap();
            let pred = identify(&data).unwrap();
            let pairs = [
                ("deepc", explicit_deepc_unconstrained(&data, &win, &obj, &w), solve_deepc_regularized(&data, &win, &obj, &w, &free)),
                ("spc", explicit_spc_unconstrained(&pred, &win, &obj, &w), solve_spc_regularized(&pred, &win, &obj, &w, &free)),
            ];
            for (name, ex, qp) in pairs {
                instances += 1;
                match (ex, qp) {
                    (Ok(ex), Ok(qp)) => {
                        let v = qp.v().expect("regularized solution has slacks");
                        let gap = (&ex.v - v).amax().max((ex.objective - qp.objective).abs() / (1.0 + ex.objective.abs()));
                        worst = worst.max(gap);
                        if gap > 1e-6 {
                            problems.push(format!("{name} T={t} seed {seed}: gap {gap:.3e}"));
                        }
                    }
                    (ex, qp) => problems.push(format!(
                        "{name} T={t} seed {seed}: explicit {:?}, qp {:?}",
                        ex.err().map(|e| e.to_string()),
                        qp.err().map(|e| e.to_string())
                    )),
                }
            }
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut worst_box: f64 = 0.0;
    for k in 0..50 {
        let p = random_box_qp(&mut rng, 2 + k % 12);
        match solve_qp(&p, &QpOptions::default()) {
            Ok(sol) => {
                let gap = (&sol.z - projected_gradient(&p)).amax();
                worst_box = worst_box.max(gap);
                if gap > 1e-6 {
                    problems.push(format!("box QP {k}: gap {gap:.3e}"));
                }
            }
            Err(e) => problems.push(format!("box QP {k}: {e}")),
        }
    }
    Outcome::new(
        problems.is_empty(),
        format!(
            "{instances} explicit/QP pairs, max gap {worst:.3e}; 50 box QPs, max gap to projected gradient {worst_box:.3e}{}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn table_trends() -> Outcome {
    let cfg = RunConfig::default();
    match run_table1(&cfg) {
        Ok(table) => {
            let tr = table.trends("deepc_regularized", "spc_regularized", &[150, 200]);
            let failures = table.cells.iter().filter(|c| c.error.is_some()).count();
            Outcome::new(
                tr.spc_cost_not_above_deepc && tr.cost_non_increasing_in_t && tr.spc_faster && failures == 0,
                format!(
                    "(a) {} (b) {} (c) {}, failed cells {failures}; {}",
                    tr.spc_cost_not_above_deepc,
                    tr.cost_non_increasing_in_t,
                    tr.spc_faster,
                    tr.details.join("; ")
                ),
            )
        }
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

fn singularity_detection() -> Outcome {
    let model = bench();
    let obj = RegulationObjective::scaled_identity(3, 2, 1.0, 0.1).unwrap();
    let shape = DataShape::for_model(&model, 150, T_INI, HORIZON).unwrap();
    let (w0, w1) = (RegWeights::new(0.0, 1e4, 1e4).unwrap(), RegWeights::new(1.0, 1e4, 1e4).unwrap());
    let (mut flagged, mut solved) = (0, 0);
    for seed in 0..10u64 {
        let noise = NoiseSpec::new(1e-2, seed).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), Some(&noise), seed).unwrap();
        let (win, _) = scenario_window(&model, T_INI, 500 + seed, 1e-2).unwrap();
        if matches!(explicit_deepc_unconstrained(&data, &win, &obj, &w0), Err(Error::SingularInnerMatrix { .. })) {
            flagged += 1;
        }
        if explicit_deepc_unconstrained(&data, &win, &obj, &w1).is_ok_and(|s| s.v.iter().all(|v| v.is_finite())) {
            solved += 1;
        }
    }
    Outcome::new(
        flagged == 10 && solved == 10,
        format!("lambda_g=0 flagged singular on {flagged}/10, lambda_g=1 solved on {solved}/10"),
    )
}

type Block = nalgebra::DMatrix<f64>;

fn degrade(data: &DataMatrices, edit: impl Fn(&mut Block, &mut Block, &mut Block)) -> DataMatrices {
    let mut u = data.u_l().clone();
    let mut y = data.y_l().clone();
    let mut x = data.x1().expect("generated data records X1").clone();
    edit(&mut u, &mut y, &mut x);
    DataMatrices::new(data.shape(), u, y, Some(x), data.seed(), data.noise()).unwrap()
}

fn assumption_machinery() -> Outcome {
    let model = bench();
    let shape = DataShape::for_model(&model, 150, T_INI, HORIZON).unwrap();
    let mut good = 0;
    for seed in 0..10u64 {
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, seed).unwrap();
        let r = check_assumptions(&data, Some(&model), None);
        if r.all_pass() && r.pe_order_l.required == Some(88) && r.t_lower_bound.required == Some(96) {
            good += 1;
        }
    }

    // At the minimal column count a single lost column breaks the
    // stacked rank and nothing else.
    let tight = collect_sequences(&model, shape.with_t(96), &ExcitationSpec::default(), None, 3).unwrap();
    let zero = degrade(&tight, |u, y, x| {
        u.column_mut(17).fill(0.0);
        y.column_mut(17).fill(0.0);
        x.column_mut(17).fill(0.0);
    });
    let dup = degrade(&tight, |u, y, x| {
        for m in [u, y, x] {
            let c = m.column(4).into_owned();
            m.set_column(5, &c);
        }
    });
    let intended = vec!["stacked_x1_ul_full_rank"];
    let f_zero = check_assumptions(&zero, Some(&model), None).failures();
    let f_dup = check_assumptions(&dup, Some(&model), None).failures();
    Outcome::new(
        good == 10 && f_zero == intended && f_dup == intended,
        format!("clean data passes on {good}/10 seeds; zero column fails {f_zero:?}; duplicated column fails {f_dup:?}"),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("deterministic DeePC equals SPC", Duration::from_secs(60), deterministic_equivalence),
        ("regularized DeePC equals SPC on square data", Duration::from_secs(30), regularized_equivalence),
        ("predictor exactness", Duration::from_secs(10), predictor_exactness),
        ("kernel inclusion", Duration::from_secs(5), kernel_inclusion),
        ("explicit solutions and QP oracle", Duration::from_secs(60), explicit_and_oracle),
        ("closed-loop table trends", Duration::from_secs(600), table_trends),
        ("singularity detection", Duration::from_secs(60), singularity_detection),
        ("assumption machinery", Duration::from_secs(60), assumption_machinery),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let ok = out.passed && took <= *budget;
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} [{:.1} s of {} s] {}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
