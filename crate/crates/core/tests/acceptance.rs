//! Acceptance suite. Each test prints one PASS line with its headline
//! numbers; tolerances are fixed in the assertions.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfp::bench::{run_plan, ExperimentPlan, Strategy, StrategyKind};
use cfp::controls::{InnerStrategy, OuterSchedule};
use cfp::linalg::{dist, norm, norm_sq};
use cfp::problem::{generate_equality_problem, generate_problem, ProblemInstance};
use cfp::rates::{
    estimate_kappa, linear_system_constants, q_general, q_method, Method, Provenance,
    RateReport, RegularityConstants,
};
use cfp::sets::{
    distance_oracle, project_ball, project_halfspace, subgradient_project, Ball, Cutter,
    HalfSpace, Hyperplane, SublevelSet,
};
use cfp::solver::{
    run, run_from, run_lopping, AlphaPolicy, SolverConfig, StoppingRule, TerminalStatus,
    TraceVerbosity, WeightPolicy,
};

// ---------------------------------------------------------------------
// criterion 1: closed-form projections vs a boundary grid search
// ---------------------------------------------------------------------

/// Grid resolution the boundary search refines down to.
const SEARCH_RESOLUTION: f64 = 1e-4;
const GRID_POINTS: usize = 13;

/// Nearest boundary point of the hyperplane `⟨a, y⟩ = b`, found by grid
/// search over all coordinates but the one with the largest |a_j|, which
/// is eliminated through the constraint. Refines until the grid spacing
/// drops below `SEARCH_RESOLUTION`.
fn search_hyperplane_boundary(a: &[f64], b: f64, x: &[f64]) -> Vec<f64> {
    let d = a.len();
    let pivot = (0..d)
        .max_by(|&i, &j| a[i].abs().partial_cmp(&a[j].abs()).unwrap())
        .unwrap();
    let assemble = |free: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; d];
        let mut fi = 0;
        let mut partial = 0.0;
        for j in 0..d {
            if j != pivot {
                y[j] = free[fi];
                partial += a[j] * free[fi];
                fi += 1;
            }
        }
        y[pivot] = (b - partial) / a[pivot];
        y
    };
    if d == 1 {
        return vec![b / a[0]];
    }
    let mut center: Vec<f64> = (0..d).filter(|&j| j != pivot).map(|j| x[j]).collect();
    let mut best = assemble(&center);
    let mut half_width = dist(&best, x) + 1.0;
    loop {
        let spacing = 2.0 * half_width / (GRID_POINTS - 1) as f64;
        let mut idx = vec![0usize; d - 1];
        let mut best_dist = dist(&best, x);
        let mut best_free = center.clone();
        loop {
            let free: Vec<f64> = idx
                .iter()
                .zip(&center)
                .map(|(&i, &c)| c - half_width + spacing * i as f64)
                .collect();
            let y = assemble(&free);
            let dy = dist(&y, x);
            if dy < best_dist {
                best_dist = dy;
                best_free = free;
                best = y;
            }
            // odometer over the (d−1)-dimensional grid
            let mut carry = 0;
            while carry < idx.len() {
                idx[carry] += 1;
                if idx[carry] < GRID_POINTS {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == idx.len() {
                break;
            }
        }
        center = best_free;
        if spacing < SEARCH_RESOLUTION {
            return best;
        }
        half_width = 3.0 * spacing;
    }
}

/// Nearest point of the sphere `‖y − c‖ = r`, via a coarse direction scan
/// followed by refinement on a hemisphere chart (the pivot coordinate is
/// reconstructed from the unit-norm constraint).
fn search_sphere_boundary(c: &[f64], r: f64, x: &[f64]) -> Vec<f64> {
    let d = c.len();
    let point_of = |u: &[f64]| -> Vec<f64> {
        c.iter().zip(u).map(|(&ci, &ui)| ci + r * ui).collect()
    };
    if d == 1 {
        let lo = vec![c[0] - r];
        let hi = vec![c[0] + r];
        return if dist(&lo, x) < dist(&hi, x) { lo } else { hi };
    }
    // coarse scan over direction space
    let coarse = [-1.0, -0.5, 0.5, 1.0];
    let mut best_u = vec![0.0; d];
    best_u[0] = 1.0;
    let mut best_dist = dist(&point_of(&best_u), x);
    let mut idx = vec![0usize; d];
    loop {
        let g: Vec<f64> = idx.iter().map(|&i| coarse[i]).collect();
        let len = norm(&g);
        if len > 1e-9 {
            let u: Vec<f64> = g.iter().map(|v| v / len).collect();
            let dy = dist(&point_of(&u), x);
            if dy < best_dist {
                best_dist = dy;
                best_u = u;
            }
        }
        let mut carry = 0;
        while carry < d {
            idx[carry] += 1;
            if idx[carry] < coarse.len() {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == d {
            break;
        }
    }
    // hemisphere chart refinement around the current best direction
    let mut half_width = 0.6;
    loop {
        let pivot = (0..d)
            .max_by(|&i, &j| best_u[i].abs().partial_cmp(&best_u[j].abs()).unwrap())
            .unwrap();
        let sign = best_u[pivot].signum();
        let center: Vec<f64> =
            (0..d).filter(|&j| j != pivot).map(|j| best_u[j]).collect();
        let spacing = 2.0 * half_width / (GRID_POINTS - 1) as f64;
        let mut idx = vec![0usize; d - 1];
        loop {
            let z: Vec<f64> = idx
                .iter()
                .zip(&center)
                .map(|(&i, &zc)| zc - half_width + spacing * i as f64)
                .collect();
            let zz = norm_sq(&z);
            if zz < 1.0 {
                let mut u = vec![0.0; d];
                let mut zi = 0;
                for j in 0..d {
                    if j != pivot {
                        u[j] = z[zi];
                        zi += 1;
                    }
                }
                u[pivot] = sign * (1.0 - zz).sqrt();
                let dy = dist(&point_of(&u), x);
                if dy < best_dist {
                    best_dist = dy;
                    best_u = u;
                }
            }
            let mut carry = 0;
            while carry < idx.len() {
                idx[carry] += 1;
                if idx[carry] < GRID_POINTS {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == idx.len() {
                break;
            }
        }
        if spacing < SEARCH_RESOLUTION {
            return point_of(&best_u);
        }
        half_width = (3.0 * spacing).min(0.6);
    }
}

enum TestSet {
    Half(HalfSpace),
    Hyper(Hyperplane),
    Sphere(Ball),
}

impl TestSet {
    fn cutter(&self) -> &dyn Cutter {
        match self {
            TestSet::Half(h) => h,
            TestSet::Hyper(h) => h,
            TestSet::Sphere(b) => b,
        }
    }

    fn closed_form(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TestSet::Half(h) => project_halfspace(h, x).unwrap(),
            TestSet::Hyper(h) => h.apply(x).unwrap(),
            TestSet::Sphere(b) => project_ball(b, x).unwrap(),
        }
    }

    fn brute_force(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TestSet::Half(h) => {
                if h.residual(x) <= 0.0 {
                    x.to_vec()
                } else {
                    search_hyperplane_boundary(h.normal(), h.offset(), x)
                }
            }
            TestSet::Hyper(h) => {
                if h.residual(x) == 0.0 {
                    x.to_vec()
                } else {
                    search_hyperplane_boundary(h.normal(), h.offset(), x)
                }
            }
            TestSet::Sphere(b) => {
                if dist(x, b.center()) <= b.radius() {
                    x.to_vec()
                } else {
                    search_sphere_boundary(b.center(), b.radius(), x)
                }
            }
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect()
}

#[test]
fn criterion_1_projection_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut checked = 0;
    let mut max_mismatch = 0.0f64;
    let mut worst_cutter = f64::NEG_INFINITY;
    while checked < 1000 {
        let dim = 1 + (checked % 5);
        let set = match checked % 3 {
            0 => {
                let a = loop {
                    let a = random_vec(&mut rng, dim, 2.0);
                    if norm(&a) > 0.1 {
                        break a;
                    }
                };
                TestSet::Half(HalfSpace::new(a, rng.random::<f64>() * 4.0 - 2.0).unwrap())
            }
            1 => {
                let a = loop {
                    let a = random_vec(&mut rng, dim, 2.0);
                    if norm(&a) > 0.1 {
                        break a;
                    }
                };
                TestSet::Hyper(Hyperplane::new(a, rng.random::<f64>() * 4.0 - 2.0).unwrap())
            }
            _ => {
                let c = random_vec(&mut rng, dim, 2.0);
                let r = 0.3 + rng.random::<f64>() * 2.5;
                TestSet::Sphere(Ball::new(c, r).unwrap())
            }
        };
        let x = random_vec(&mut rng, dim, 5.0);
        let closed = set.closed_form(&x);
        let brute = set.brute_force(&x);
        let mismatch = dist(&closed, &brute);
        max_mismatch = max_mismatch.max(mismatch);
        assert!(
            mismatch <= 1e-3,
            "projection mismatch {mismatch} on pair {checked} (dim {dim})"
        );

        // cutter inequality against sampled members
        let cutter = set.cutter();
        let ux = cutter.apply(&x).unwrap();
        for _ in 0..3 {
            let z = set.closed_form(&random_vec(&mut rng, dim, 4.0));
            assert!(cutter.proximity(&z) <= 1e-10 * (1.0 + norm(&z)));
            let mut inner = 0.0;
            for j in 0..dim {
                inner += (x[j] - ux[j]) * (z[j] - ux[j]);
            }
            worst_cutter = worst_cutter.max(inner);
            assert!(inner <= 1e-10, "cutter inequality violated: {inner}");
        }
        checked += 1;
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "criterion 1 took {elapsed:?}");
    println!(
        "criterion 1: PASS — 1000 pairs, worst projection mismatch {max_mismatch:.3e}, \
         worst cutter inner product {worst_cutter:.3e}, {elapsed:.2?}"
    );
}

// ---------------------------------------------------------------------
// criterion 2: Fejér monotonicity across the strategy matrix
// ---------------------------------------------------------------------

fn example_strategy_matrix() -> Vec<Strategy> {
    vec![
        Strategy::new(StrategyKind::Cyclic, 1),
        Strategy::new(StrategyKind::Simultaneous, 100),
        Strategy::new(StrategyKind::Active, 100),
        Strategy::new(StrategyKind::MaxProx, 25),
        Strategy::new(StrategyKind::Top(5), 25),
        Strategy::new(StrategyKind::Threshold(0.5), 25),
    ]
}

#[test]
fn criterion_2_fejer_suite() {
    let started = Instant::now();
    let strategies = example_strategy_matrix();
    let mut runs = 0;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..50 {
        let problem = generate_problem(100, 20, 0xFE0 + trial).unwrap();
        let cutters = problem.cutters().unwrap();
        for strategy in &strategies {
            let sched = strategy.schedule(problem.m()).unwrap();
            for alpha in [0.5, 1.0, 1.5] {
                let config = SolverConfig {
                    alpha: AlphaPolicy::Constant(alpha),
                    ..SolverConfig::default()
                };
                let trace =
                    run(&problem, &cutters, &sched, &strategy.inner(), &config).unwrap();
                let dists = trace.dist_witness_series();
                for w in dists.windows(2) {
                    let violation = w[1] - w[0];
                    worst = worst.max(violation);
                    assert!(
                        violation <= 1e-10,
                        "Fejér violation {violation} (trial {trial}, {}, alpha {alpha})",
                        strategy.label()
                    );
                }
                runs += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "criterion 2 took {elapsed:?}");
    println!(
        "criterion 2: PASS — {runs} runs, worst distance increase {worst:.3e}, {elapsed:.2?}"
    );
}

// ---------------------------------------------------------------------
// criterion 3: bitwise equivalence with directly coded classics
// ---------------------------------------------------------------------

/// Reference implementations, coded directly from the classical method
/// definitions with the documented summation order (ascending index,
/// single accumulation pass, weights applied per term).
mod reference {
    /// Residual ⟨a, x⟩ − b: ascending-index dot product, offset
    /// subtracted last.
    fn residual(a: &[f64], b: f64, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..a.len() {
            s += a[j] * x[j];
        }
        s - b
    }

    pub fn project_row(a: &[f64], b: f64, x: &[f64]) -> Vec<f64> {
        let r = residual(a, b, x);
        if r <= 0.0 {
            return x.to_vec();
        }
        let mut aa = 0.0;
        for &v in a {
            aa += v * v;
        }
        let scale = r / aa;
        x.iter().zip(a).map(|(&xj, &aj)| xj - scale * aj).collect()
    }

    pub fn max_prox(rows: &[Vec<f64>], rhs: &[f64], x: &[f64]) -> f64 {
        let mut best = 0.0f64;
        for (a, &b) in rows.iter().zip(rhs) {
            let p = residual(a, b, x).max(0.0);
            if p > best {
                best = p;
            }
        }
        best
    }

    /// Cyclic projections x ← P_{C_(k mod m)} x under the periodic global
    /// stopping check.
    pub fn cyclic(
        rows: &[Vec<f64>],
        rhs: &[f64],
        x0: &[f64],
        eps: f64,
        check_every: usize,
        max_iters: usize,
    ) -> Vec<Vec<f64>> {
        let mut xs = vec![x0.to_vec()];
        let mut x = x0.to_vec();
        for k in 0.. {
            if (k % check_every == 0 && max_prox(rows, rhs, &x) <= eps) || k == max_iters {
                break;
            }
            let i = k % rows.len();
            x = project_row(&rows[i], rhs[i], &x);
            xs.push(x.clone());
        }
        xs
    }

    /// Simultaneous method x ← Σ (1/m)·P_i x, accumulated ascending.
    pub fn simultaneous(
        rows: &[Vec<f64>],
        rhs: &[f64],
        x0: &[f64],
        eps: f64,
        check_every: usize,
        max_iters: usize,
    ) -> Vec<Vec<f64>> {
        let w = 1.0 / rows.len() as f64;
        let mut xs = vec![x0.to_vec()];
        let mut x = x0.to_vec();
        for k in 0.. {
            if (k % check_every == 0 && max_prox(rows, rhs, &x) <= eps) || k == max_iters {
                break;
            }
            let mut acc = project_row(&rows[0], rhs[0], &x);
            for v in acc.iter_mut() {
                *v *= w;
            }
            for i in 1..rows.len() {
                let u = project_row(&rows[i], rhs[i], &x);
                for (aj, uj) in acc.iter_mut().zip(&u) {
                    *aj += w * uj;
                }
            }
            x = acc;
            xs.push(x.clone());
        }
        xs
    }
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn criterion_3_special_case_equivalence() {
    let mut config = SolverConfig::default();
    config.verbosity = TraceVerbosity::Iterates;
    config.stopping.max_iters = 2000;
    for trial in 0..10 {
        let problem = generate_problem(30, 8, 0x3C0 + trial).unwrap();
        let rows: Vec<Vec<f64>> =
            (0..problem.m()).map(|i| problem.a().row(i).to_vec()).collect();
        let cutters = problem.cutters().unwrap();
        let stopping = config.stopping;

        // b = 1, All, α = 1 against the cyclic projection method
        let sched = OuterSchedule::singletons(problem.m()).unwrap();
        let trace = run(&problem, &cutters, &sched, &InnerStrategy::All, &config).unwrap();
        let expected = reference::cyclic(
            &rows,
            problem.rhs(),
            problem.x0(),
            stopping.epsilon,
            stopping.check_every,
            stopping.max_iters,
        );
        assert_eq!(trace.records.len(), expected.len(), "cyclic trace length");
        for (r, e) in trace.records.iter().zip(&expected) {
            assert!(
                bitwise_eq(r.x.as_ref().unwrap(), e),
                "cyclic iterate differs at k = {} (trial {trial})",
                r.k
            );
        }

        // s = 1, All, α = 1 against the simultaneous method
        let sched = OuterSchedule::single_block(problem.m()).unwrap();
        let trace = run(&problem, &cutters, &sched, &InnerStrategy::All, &config).unwrap();
        let expected = reference::simultaneous(
            &rows,
            problem.rhs(),
            problem.x0(),
            stopping.epsilon,
            stopping.check_every,
            stopping.max_iters,
        );
        assert_eq!(trace.records.len(), expected.len(), "simultaneous trace length");
        for (r, e) in trace.records.iter().zip(&expected) {
            assert!(
                bitwise_eq(r.x.as_ref().unwrap(), e),
                "simultaneous iterate differs at k = {} (trial {trial})",
                r.k
            );
        }
    }
    println!("criterion 3: PASS — 10 instances, cyclic and simultaneous traces bitwise equal");
}

// ---------------------------------------------------------------------
// criterion 4: qualitative reproduction of the benchmark orderings
// ---------------------------------------------------------------------

fn median_usize(values: &[usize]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cfp::bench::percentile(&v, 0.5)
}

fn median_f64(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cfp::bench::percentile(&v, 0.5)
}

#[test]
fn criterion_4_benchmark_orderings() {
    let started = Instant::now();
    let mut strategies = vec![Strategy::new(StrategyKind::Cyclic, 1)];
    for b in [2, 3, 5, 10, 25, 100] {
        strategies.push(Strategy::new(StrategyKind::MaxProx, b));
    }
    for t in [1, 5, 10, 15, 25] {
        strategies.push(Strategy::new(StrategyKind::Top(t), 25));
    }
    for t in [0.0, 0.25, 0.5, 0.75] {
        strategies.push(Strategy::new(StrategyKind::Threshold(t), 25));
    }
    strategies.push(Strategy::new(StrategyKind::Simultaneous, 100));

    let plan = ExperimentPlan {
        m: 100,
        n: 20,
        trials: 100,
        base_seed: 0xBE0,
        strategies,
        config: SolverConfig::default(),
    };
    let agg = run_plan(&plan).unwrap();
    let median_curve = |label: &str| -> Vec<f64> {
        agg.summary(label).unwrap().rows.iter().map(|r| r.median).collect()
    };
    let curve_at = |curve: &[f64], k: usize| -> f64 {
        *curve.get(k).unwrap_or_else(|| curve.last().unwrap())
    };

    // (a) the max-proximity method over the full block dominates every
    // strategy at every checkpoint
    let champion = median_curve("maxprox-b100");
    let max_len = agg.strategies.iter().map(|s| s.rows.len()).max().unwrap();
    for s in &agg.strategies {
        if s.label == "maxprox-b100" {
            continue;
        }
        let other: Vec<f64> = s.rows.iter().map(|r| r.median).collect();
        let mut k = 100;
        while k < max_len + 100 {
            let champ = curve_at(&champion, k);
            let them = curve_at(&other, k);
            assert!(
                champ <= them,
                "(a) maxprox-b100 not dominant at k = {k} vs {}: {champ} > {them}",
                s.label
            );
            k += 100;
        }
    }

    // (b) the simultaneous method has the worst median terminal metric
    let terminal_median = |label: &str| -> f64 {
        median_f64(&agg.summary(label).unwrap().terminal_metrics)
    };
    let simultaneous = terminal_median("all-b100");
    for s in &agg.strategies {
        if s.label != "all-b100" {
            assert!(
                terminal_median(&s.label) <= simultaneous,
                "(b) {} ended above the simultaneous method",
                s.label
            );
        }
    }

    // (c) max-proximity: median iterations-to-convergence nonincreasing
    // in b, with b = 25 within 10% of b = 100
    let conv_median = |label: &str| -> f64 {
        median_usize(&agg.summary(label).unwrap().terminal_iters)
    };
    let maxprox_labels =
        ["cyclic", "maxprox-b2", "maxprox-b3", "maxprox-b5", "maxprox-b10", "maxprox-b25", "maxprox-b100"];
    let meds: Vec<f64> = maxprox_labels.iter().map(|l| conv_median(l)).collect();
    for w in meds.windows(2) {
        assert!(w[1] <= w[0], "(c) maxprox medians not nonincreasing: {meds:?}");
    }
    let b25 = conv_median("maxprox-b25");
    let b100 = conv_median("maxprox-b100");
    assert!(
        (b25 - b100).abs() <= 0.1 * b100,
        "(c) b=25 not within 10% of b=100: {b25} vs {b100}"
    );

    // (d) top-t: nondecreasing in t
    let top_meds: Vec<f64> = ["top1-b25", "top5-b25", "top10-b25", "top15-b25", "top25-b25"]
        .iter()
        .map(|l| conv_median(l))
        .collect();
    for w in top_meds.windows(2) {
        assert!(w[0] <= w[1], "(d) top-t medians not nondecreasing: {top_meds:?}");
    }

    // (e) threshold: nonincreasing in t
    let thr_meds: Vec<f64> = ["thr0-b25", "thr0.25-b25", "thr0.5-b25", "thr0.75-b25"]
        .iter()
        .map(|l| conv_median(l))
        .collect();
    for w in thr_meds.windows(2) {
        assert!(w[1] <= w[0], "(e) threshold medians not nonincreasing: {thr_meds:?}");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "criterion 4 took {elapsed:?}");
    println!(
        "criterion 4: PASS — maxprox medians {meds:?}, top {top_meds:?}, thr {thr_meds:?}, \
         simultaneous terminal {simultaneous:.3}, {elapsed:.2?}"
    );
}

// ---------------------------------------------------------------------
// criterion 5: rate formula specializations and monotonicity
// ---------------------------------------------------------------------

#[test]
fn criterion_5_rate_formula_checks() {
    let mut points = 0;
    for &m in &[4usize, 12, 24, 60, 100] {
        for &ratio in &[0.2, 0.6, 1.0] {
            for &kappa in &[1.0, 3.0] {
                let c =
                    RegularityConstants::new(2.0 * ratio, 2.0, kappa, Provenance::ClosedForm)
                        .unwrap();
                // cyclic ↔ general with s = m, ω⁻ = 1
                let lhs = q_method(Method::Cyclic, m, 1, None, &c).unwrap();
                let rhs = q_general(1.0, 1.0, 1.0, m, &c).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12, "cyclic mismatch at m={m}");
                points += 1;

                let divisors: Vec<usize> = (1..=m).filter(|b| m % b == 0).collect();
                let mut prev_maxprox = f64::INFINITY;
                for &b in &divisors {
                    let s = m / b;
                    // simultaneous ↔ general with ω⁻ = 1/b
                    let lhs = q_method(Method::Simultaneous, m, b, None, &c).unwrap();
                    let rhs = q_general(1.0 / b as f64, 1.0, 1.0, s, &c).unwrap();
                    assert!((lhs - rhs).abs() <= 1e-12, "simultaneous mismatch m={m} b={b}");
                    // maxprox ↔ general with ω⁻ = 1
                    let lhs_mp = q_method(Method::MaxProx, m, b, None, &c).unwrap();
                    let rhs_mp = q_general(1.0, 1.0, 1.0, s, &c).unwrap();
                    assert!((lhs_mp - rhs_mp).abs() <= 1e-12, "maxprox mismatch m={m} b={b}");
                    // top-t ↔ general with ω⁻ = 1/t
                    for t in [1, b.div_ceil(2), b] {
                        let lhs_t = q_method(Method::TopT, m, b, Some(t), &c).unwrap();
                        let rhs_t = q_general(1.0 / t as f64, 1.0, 1.0, s, &c).unwrap();
                        assert!((lhs_t - rhs_t).abs() <= 1e-12, "top mismatch m={m} b={b} t={t}");
                        points += 1;
                    }
                    // strict monotonicity in b (all else fixed)
                    assert!(
                        lhs_mp < prev_maxprox,
                        "maxprox q not strictly decreasing at m={m} b={b}"
                    );
                    prev_maxprox = lhs_mp;
                    points += 2;

                    // strict monotonicity in t
                    let mut prev_top = 0.0;
                    for t in 1..=b.min(12) {
                        let q = q_method(Method::TopT, m, b, Some(t), &c).unwrap();
                        assert!(q > prev_top || t == 1, "top q not strictly increasing");
                        prev_top = q;
                    }
                }

                // single-block closed form agrees with the b = m case
                let eq58 = (1.0
                    - (c.delta / (c.kappa * c.big_delta)).powi(2))
                .sqrt();
                let eq56 = q_method(Method::MaxProx, m, m, None, &c).unwrap();
                assert!((eq58 - eq56).abs() <= 1e-12, "b = m closed form mismatch");
                points += 1;
            }
        }
    }
    assert!(points >= 200, "grid too small: {points}");
    println!("criterion 5: PASS — {points} grid points within 1e-12");
}

// ---------------------------------------------------------------------
// criterion 6: proximity envelope with heuristic regularity constant
// ---------------------------------------------------------------------

#[test]
fn criterion_6_error_bound_envelope() {
    let started = Instant::now();
    let mut holds = 0;
    let total = 20;
    for trial in 0..total {
        let problem = generate_problem(100, 20, 0x6E0 + trial).unwrap();
        let (delta, big_delta) = linear_system_constants(problem.a()).unwrap();
        let kappa_hat = estimate_kappa(&problem, 12, 0xABC + trial).unwrap();
        let constants = RegularityConstants::new(
            delta,
            big_delta,
            (2.0 * kappa_hat).max(1.0),
            Provenance::Empirical,
        )
        .unwrap();

        let cutters = problem.cutters().unwrap();
        let (d0, d0_upper) = match distance_oracle(&cutters, problem.x0()) {
            Ok(d) => (d, false),
            Err(_) => (dist(problem.x0(), problem.witness()), true),
        };
        let report =
            RateReport::new(Method::MaxProx, 100, 25, None, constants, d0, d0_upper).unwrap();

        let sched = OuterSchedule::contiguous(100, 25).unwrap();
        let trace = run(
            &problem,
            &cutters,
            &sched,
            &InnerStrategy::MaxProx,
            &SolverConfig::default(),
        )
        .unwrap();

        let ok = trace
            .max_prox_series()
            .iter()
            .enumerate()
            .all(|(k, &p)| p <= report.envelope(k));
        if ok {
            holds += 1;
        }
    }
    assert!(holds >= 18, "envelope held in only {holds}/{total} runs");
    println!(
        "criterion 6: PASS — envelope held in {holds}/{total} runs, {:.2?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------
// criterion 7: lopping equivalence at ε = 0 and certification at ε > 0
// ---------------------------------------------------------------------

#[test]
fn criterion_7_lopping_and_flagging() {
    // ε = 0 must reproduce the plain cyclic run bit for bit. The window
    // is kept short enough that no block is fully satisfied, which is the
    // regime where the flagging bookkeeping must stay invisible.
    let mut config = SolverConfig::default();
    config.verbosity = TraceVerbosity::Iterates;
    config.stopping.epsilon = 0.0;
    config.stopping.max_iters = 150;
    for trial in 0..10 {
        let problem = generate_problem(100, 20, 0x7E0 + trial).unwrap();
        let cutters = problem.cutters().unwrap();
        let sched = OuterSchedule::contiguous(100, 25).unwrap();
        let plain = run(&problem, &cutters, &sched, &InnerStrategy::All, &config).unwrap();
        let lopped =
            run_lopping(&problem, &cutters, &sched, &InnerStrategy::All, &config, 2).unwrap();
        assert_eq!(plain.records.len(), lopped.records.len(), "trace length (trial {trial})");
        for (p, l) in plain.records.iter().zip(&lopped.records) {
            assert_eq!(p.block_id, l.block_id, "block sequence diverged at k = {}", p.k);
            assert_eq!(p.inner, l.inner, "selection diverged at k = {}", p.k);
            assert!(
                bitwise_eq(p.x.as_ref().unwrap(), l.x.as_ref().unwrap()),
                "iterates diverged at k = {}",
                p.k
            );
            assert_eq!(p.max_prox_all.to_bits(), l.max_prox_all.to_bits());
            assert_eq!(p.step_norm.to_bits(), l.step_norm.to_bits());
        }
    }

    // ε = 1e-6: finite termination with an independently verified
    // certificate
    let mut config = SolverConfig::default();
    config.stopping.epsilon = 1e-6;
    config.stopping.max_iters = 50_000;
    for trial in 0..10 {
        let problem = generate_problem(100, 20, 0x7F0 + trial).unwrap();
        let cutters = problem.cutters().unwrap();
        let sched = OuterSchedule::contiguous(100, 25).unwrap();
        let trace =
            run_lopping(&problem, &cutters, &sched, &InnerStrategy::MaxProx, &config, 2)
                .unwrap();
        assert_eq!(
            trace.status,
            TerminalStatus::LoppingCertified,
            "no certificate on trial {trial}"
        );
        // post-hoc check straight from the problem data
        let residual_max = problem.max_proximity(&trace.final_x);
        assert!(
            residual_max <= 1e-6,
            "certificate violated: max residual {residual_max} (trial {trial})"
        );
    }
    println!("criterion 7: PASS — ε=0 bitwise equal on 10 instances, ε=1e-6 certified on 10");
}

// ---------------------------------------------------------------------
// criterion 8: affine limit against a least-squares oracle
// ---------------------------------------------------------------------

/// Minimum-norm correction `x0 − A⁺(A x0 − b)` for a consistent system,
/// computed with dense least squares.
fn least_squares_projection(problem: &ProblemInstance) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let (m, n) = (problem.m(), problem.n());
    let mut data = Vec::with_capacity(m * n);
    for i in 0..m {
        data.extend_from_slice(problem.a().row(i));
    }
    let a = DMatrix::from_row_slice(m, n, &data);
    let x0 = DVector::from_column_slice(problem.x0());
    let b = DVector::from_column_slice(problem.rhs());
    let r = &a * &x0 - b;
    let correction = if m >= n {
        // overdetermined consistent: unique solution of A c = r
        let ata = a.transpose() * &a;
        let atr = a.transpose() * r;
        ata.cholesky().expect("A^T A positive definite").solve(&atr)
    } else {
        // underdetermined: minimum-norm c = Aᵀ(AAᵀ)⁻¹ r
        let aat = &a * a.transpose();
        let lam = aat.cholesky().expect("A Aᵀ positive definite").solve(&r);
        a.transpose() * lam
    };
    (x0 - correction).data.as_vec().clone()
}

#[test]
fn criterion_8_affine_limit() {
    let mut config = SolverConfig::default();
    config.stopping.epsilon = 1e-10;
    config.stopping.check_every = 100;
    config.stopping.max_iters = 200_000;
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let problem = generate_equality_problem(50, 20, 0x8E0 + trial).unwrap();
        let cutters = problem.cutters().unwrap();
        let sched = OuterSchedule::single_block(problem.m()).unwrap();
        let trace = run(&problem, &cutters, &sched, &InnerStrategy::All, &config).unwrap();
        assert_eq!(trace.status, TerminalStatus::Converged, "no convergence on trial {trial}");
        let oracle = least_squares_projection(&problem);
        let err = dist(&trace.final_x, &oracle);
        worst = worst.max(err);
        assert!(err <= 1e-5, "affine limit off by {err} on trial {trial}");
    }

    // underdetermined case: the limit is the nontrivial projection of x0,
    // not the generator witness
    for trial in 0..5 {
        let problem = generate_equality_problem(5, 20, 0x8F0 + trial).unwrap();
        let cutters = problem.cutters().unwrap();
        let sched = OuterSchedule::single_block(problem.m()).unwrap();
        let trace = run(&problem, &cutters, &sched, &InnerStrategy::All, &config).unwrap();
        let oracle = least_squares_projection(&problem);
        assert!(dist(&trace.final_x, &oracle) <= 1e-5);
        assert!(dist(&oracle, problem.witness()) > 1e-3, "degenerate underdetermined case");
    }
    println!("criterion 8: PASS — 20 overdetermined + 5 underdetermined systems, worst error {worst:.3e}");
}

// ---------------------------------------------------------------------
// criterion 9: mixed half-space / sublevel-set runs
// ---------------------------------------------------------------------

struct MixedProblem {
    cutters: Vec<Box<dyn Cutter>>,
    balls: Vec<(usize, Ball)>,
    sublevels: Vec<(usize, SublevelSet)>,
    x0: Vec<f64>,
    witness: Vec<f64>,
}

fn build_mixed_problem(seed: u64) -> MixedProblem {
    let base = generate_problem(40, 10, seed).unwrap();
    let witness = base.witness().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let mut cutters = base.cutters().unwrap();
    let mut balls = Vec::new();
    let mut sublevels = Vec::new();
    for _ in 0..4 {
        let offset: Vec<f64> =
            (0..10).map(|_| rng.random::<f64>() * 1.0 - 0.5).collect();
        let center: Vec<f64> = witness.iter().zip(&offset).map(|(&w, &o)| w + o).collect();
        let radius = norm(&offset) * 1.5 + 0.3;
        let quad_center = center.clone();
        let sublevel = SublevelSet::new(Arc::new(move |x: &[f64]| {
            let diff: Vec<f64> =
                x.iter().zip(&quad_center).map(|(&xi, &ci)| xi - ci).collect();
            (norm_sq(&diff) - radius * radius, diff.iter().map(|d| 2.0 * d).collect())
        }));
        let idx = cutters.len();
        balls.push((idx, Ball::new(center, radius).unwrap()));
        sublevels.push((idx, sublevel.clone()));
        cutters.push(Box::new(sublevel));
    }
    MixedProblem { cutters, balls, sublevels, x0: base.x0().to_vec(), witness }
}

#[test]
fn criterion_9_subgradient_path() {
    for trial in 0..20 {
        let mixed = build_mixed_problem(0x9E0 + trial);
        let m = mixed.cutters.len();
        let sched = OuterSchedule::contiguous(m, 11).unwrap();
        let config = SolverConfig {
            stopping: StoppingRule { epsilon: 1e-6, check_every: 100, max_iters: 20_000 },
            verbosity: TraceVerbosity::Iterates,
            alpha: AlphaPolicy::Constant(1.0),
            weights: WeightPolicy::Uniform,
        };
        let trace = run_from(
            &mixed.x0,
            &mixed.witness,
            &mixed.cutters,
            &sched,
            &InnerStrategy::MaxProx,
            &config,
        )
        .unwrap();
        assert_eq!(
            trace.status,
            TerminalStatus::Converged,
            "trial {trial} did not converge within 20000 iterations"
        );
        let final_prox: f64 = mixed
            .cutters
            .iter()
            .map(|c| c.proximity(&trace.final_x))
            .fold(0.0, f64::max);
        assert!(final_prox <= 1e-6);

        // the subgradient projection must differ from the metric ball
        // projection on at least one visited iterate
        let mut distinguished = false;
        'outer: for r in &trace.records {
            let x = r.x.as_ref().unwrap();
            for ((_, ball), (_, sub)) in mixed.balls.iter().zip(&mixed.sublevels) {
                if sub.value(x) > 1e-9 {
                    let pf = subgradient_project(sub, x).unwrap();
                    let pc = project_ball(ball, x).unwrap();
                    if dist(&pf, &pc) > 1e-9 {
                        distinguished = true;
                        break 'outer;
                    }
                }
            }
        }
        assert!(distinguished, "P_f never differed from P_C on trial {trial}");
    }
    println!("criterion 9: PASS — 20 mixed runs converged; subgradient and metric projections distinguished");
}
