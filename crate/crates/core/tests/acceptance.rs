//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Run with `cargo test --release --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::Instant;

use num_bigint::BigUint;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use matconc::bounds::{hw19_deviation, main_deviation, BoundParams};
use matconc::distributions::MatrixDistribution;
use matconc::martingale::{certify_bounds, decompose, increment_bound, BOUND_RTOL};
use matconc::matrix::{loewner_leq, matrix_exp, op_norm};
use matconc::montecarlo::lowerbound::{exact_exp_form_prob, rademacher_floor};
use matconc::montecarlo::{
    compare_bounds, default_t_grid, estimate_tail, lower_bound_experiment, DEFAULT_C_VALUES,
    DEFAULT_L_VALUES,
};
use matconc::oracle;
use matconc::products::{expected_product, normalized_product, ProductInstance};
use matconc::rng::RandomStream;
use matconc::ComplexMatrix;

type Check = fn() -> Verdict;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn sample_instance(dist: &MatrixDistribution, n: usize, seed: u64, trial: u64) -> ProductInstance {
    let mut rng = RandomStream::new(seed, trial);
    ProductInstance::new((0..n).map(|_| dist.sample(&mut rng)).collect()).unwrap()
}

fn telescoping() -> Verdict {
    let dist = MatrixDistribution::hermitian_bounded_default(4, 1.0, 0.5).unwrap();
    let mu = dist.mean();
    let n = 100;
    let mean_product = expected_product(&mu, n).unwrap();
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|trial| {
            let inst = sample_instance(&dist, n, 1, trial);
            let trace = decompose(&inst, &mu, dist.norm_bound()).unwrap();
            let gap = &normalized_product(&inst) - &mean_product;
            op_norm(&(&trace.partial_sums[n - 1] - &gap)).unwrap()
        })
        .reduce(|| 0.0, f64::max);
    verdict(
        worst <= 1e-10,
        format!("max ‖ΣY_k − (f − E f)‖ = {worst:.3e} over 1000 instances (tol 1e-10)"),
    )
}

fn doob_oracle() -> Verdict {
    let dists = [
        MatrixDistribution::two_point_scalar(1.0).unwrap(),
        MatrixDistribution::diagonal_rademacher(1, 1.0).unwrap(),
    ];
    let (mut identity, mut mean): (f64, f64) = (0.0, 0.0);
    for dist in &dists {
        for n in 1..=8 {
            identity = identity.max(oracle::doob_identity_error(dist, n).unwrap());
            mean = mean.max(oracle::martingale_mean_error(dist, n).unwrap());
        }
    }
    verdict(
        identity <= 1e-13 && mean <= 1e-13,
        format!("max |Y_k − ΔE| = {identity:.3e}, max |E[Y_k | prefix]| = {mean:.3e} for n ≤ 8 (tol 1e-13)"),
    )
}

fn increment_bound_sweep() -> Verdict {
    let mut instances = 0u64;
    let mut violations = 0usize;
    let mut worst_ratio: f64 = 0.0;
    let combos: Vec<(usize, f64)> = [10usize, 100, 1000]
        .iter()
        .flat_map(|&n| [0.5, 1.0, 2.0].map(move |l| (n, l)))
        .collect();
    for (i, &(n, l)) in combos.iter().enumerate() {
        let per_combo =
            10_000 / combos.len() as u64 + u64::from((i as u64) < 10_000 % combos.len() as u64);
        let dists = [
            MatrixDistribution::hermitian_bounded_default(3, l, 0.5).unwrap(),
            MatrixDistribution::ginibre_clipped(3, l, None).unwrap(),
            MatrixDistribution::diagonal_rademacher(3, l).unwrap(),
        ];
        let (v, r) = (0..per_combo)
            .into_par_iter()
            .map(|trial| {
                let dist = &dists[(trial % 3) as usize];
                let inst = sample_instance(dist, n, 3 + i as u64, trial);
                let trace = decompose(&inst, &dist.mean(), dist.norm_bound()).unwrap();
                let report = certify_bounds(&trace);
                (
                    report.increment_violations,
                    report.max_increment_norm / increment_bound(l, n),
                )
            })
            .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
        instances += per_combo;
        violations += v;
        worst_ratio = worst_ratio.max(r);
    }
    verdict(
        violations == 0 && instances == 10_000,
        format!(
            "{violations} violations of ‖Y_k‖ ≤ 2Le^L/n over {instances} instances; max ratio {worst_ratio:.4} (rtol {BOUND_RTOL:e})"
        ),
    )
}

fn variation_bound() -> Verdict {
    let mut violations = 0;
    let mut traces = 0;
    for l in [0.25, 0.5, 1.0, 2.0] {
        let dist = MatrixDistribution::two_point_scalar(l).unwrap();
        for n in 1..=8 {
            violations += oracle::variation_violations(&dist, n).unwrap();
            traces += 1usize << n;
        }
    }
    verdict(
        violations == 0,
        format!("{violations} violations of the YY* and Y*Y variation bounds over {traces} exhaustive traces"),
    )
}

fn random_hermitian<R: Rng>(rng: &mut R, d: usize, norm: f64) -> ComplexMatrix {
    let data = (0..d * d)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let h = ComplexMatrix::new(d, data).unwrap().hermitian_part();
    h.scale(norm / op_norm(&h).unwrap())
}

fn mean_product_order() -> Verdict {
    let mut rng = RandomStream::new(5, 0);
    let mut order_failures = 0;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..100 {
        let d = [2, 4, 8][i % 3];
        let norm = 2.0 * (1.0 - rng.random::<f64>());
        let mu = random_hermitian(&mut rng, d, norm);
        let exp_mu = matrix_exp(&mu).unwrap();
        for n in 1..=100 {
            if !loewner_leq(&expected_product(&mu, n).unwrap(), &exp_mu, 1e-10).unwrap() {
                order_failures += 1;
            }
        }
        let n = 10_000usize;
        let gap = op_norm(&(&expected_product(&mu, n).unwrap() - &exp_mu)).unwrap();
        worst_ratio = worst_ratio.max(gap / (10.0 * norm * norm * norm.exp() / n as f64));
    }
    verdict(
        order_failures == 0 && worst_ratio <= 1.0,
        format!(
            "{order_failures} Loewner failures over 100 μ × n ≤ 100; max ‖(I+μ/n)ⁿ − e^μ‖ / (10‖μ‖²e^‖μ‖/n) at n = 1e4: {worst_ratio:.4}"
        ),
    )
}

fn exact_expectation() -> Verdict {
    let mut worst: f64 = 0.0;
    for l in [0.5, 1.0, 2.0] {
        let dist = MatrixDistribution::two_point_scalar(l).unwrap();
        let enumerated = oracle::conditional_expectation(&dist, &[], 8).unwrap();
        worst =
            worst.max((enumerated[(0, 0)] - Complex64::new((1.0 + l / 8.0).powi(8), 0.0)).norm());
    }
    verdict(
        worst <= 1e-14,
        format!("max |Σ p·f − (1 + L/8)⁸| = {worst:.3e} over 2⁸ outcomes (tol 1e-14)"),
    )
}

fn empirical_concentration() -> Verdict {
    let dist = MatrixDistribution::hermitian_bounded_default(4, 1.0, 0.5).unwrap();
    let fits: Vec<f64> = [100usize, 400]
        .iter()
        .map(|&n| {
            let grid = default_t_grid(1.0, 4, n);
            let est = estimate_tail(&dist, n, 100_000, &grid, 7).unwrap();
            compare_bounds(&est, &BoundParams::new(n as u64, 4, 1.0))
                .unwrap()
                .admissible_c
        })
        .collect();
    let stable =
        fits.iter().all(|c| c.is_finite()) && fits[0].max(fits[1]) <= 2.0 * fits[0].min(fits[1]);
    let c = fits[0].min(fits[1]);
    let ratios: Vec<f64> = [10_000u64, 100_000, 1_000_000, 100_000_000]
        .iter()
        .map(|&n| {
            let p = BoundParams::new(n, 4, 1.0).with_delta(0.01).with_c(c);
            hw19_deviation(&p).value / main_deviation(&p)
        })
        .collect();
    let loses = ratios.iter().all(|&r| r > 3.0);
    verdict(
        stable && loses,
        format!(
            "fitted c = {:.4} (n=100), {:.4} (n=400), ratio {:.3}; hw19/main deviation at δ=0.01, n=1e4..1e8: {}",
            fits[0],
            fits[1],
            fits[0].max(fits[1]) / fits[0].min(fits[1]),
            ratios.iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn exact_floor(n: u64, m: u64) -> f64 {
    let choose = |k: u64| (0..k).fold(BigUint::from(1u32), |acc, i| acc * (n - i) / (i + 1));
    let num: BigUint = (m..=n).map(choose).sum();
    // num / 2ⁿ with 60 bits kept.
    let shifted: BigUint = (num << 60u32) >> n as usize;
    let digits = shifted.to_u64_digits();
    let head = digits
        .iter()
        .rev()
        .fold(0.0, |acc, &w| acc * 2f64.powi(64) + w as f64);
    head * 2f64.powi(-60)
}

fn lower_bound() -> Verdict {
    let floor = rademacher_floor(0.1, 100);
    let independent = exact_floor(100, 55);
    let floor_ok = (floor - independent).abs() <= 1e-12 && (floor - 0.184).abs() < 5e-4;
    let dominates = DEFAULT_L_VALUES
        .iter()
        .all(|&l| exact_exp_form_prob(l, 0.1, 100) >= floor);

    let (n, trials) = (10_000u64, 100_000u64);
    let mut worst: f64 = 0.0;
    for &c in &DEFAULT_C_VALUES {
        let report = lower_bound_experiment(&DEFAULT_L_VALUES, c, n, trials, 8).unwrap();
        for row in report.rows() {
            let half_width = (row.ci_high - row.ci_low) / 2.0;
            worst = worst
                .max((row.empirical_product_prob - row.exact_exp_form_prob).abs() / half_width);
        }
    }
    verdict(
        floor_ok && dominates && worst <= 3.0,
        format!(
            "floor(100, 0.1) = {floor:.15} vs exact {independent:.15}; exp-form ≥ floor: {dominates}; \
             max |empirical − exp-form| = {worst:.3} CP half-widths at n = 1e4, c ∈ {{0.05, 0.1, 0.2}}"
        ),
    )
}

fn determinism() -> Verdict {
    let base = [
        "simulate",
        "--kind",
        "hermitian",
        "--d",
        "4",
        "--L",
        "1",
        "--n",
        "100",
        "--trials",
        "2000",
        "--seed",
        "2024",
    ];
    let outputs: Vec<Vec<u8>> = ["1", "2", "4"]
        .iter()
        .map(|w| {
            let out = Command::new(env!("CARGO_BIN_EXE_matconc"))
                .args(base)
                .args(["--workers", w])
                .output()
                .unwrap();
            assert!(out.status.success());
            out.stdout
        })
        .collect();
    let same = !outputs[0].is_empty() && outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        same,
        format!("simulate CSV bitwise identical across --workers 1, 2, 4: {same}"),
    )
}

fn regression() -> Verdict {
    use matconc::bounds::{bernstein_tail, freedman_tail, hw19_tail, main_tail};
    let table: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(include_str!("data/bounds_regression.json")).unwrap();
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for (name, cases) in &table {
        let cases = cases.as_array().unwrap();
        counts.push(cases.len());
        for case in cases {
            let p: BoundParams = serde_json::from_value(case["params"].clone()).unwrap();
            let want = case["value"].as_f64().unwrap();
            let got = match name.as_str() {
                "bernstein_tail" => bernstein_tail(&p).value,
                "main_tail" => main_tail(&p).value,
                "main_deviation" => main_deviation(&p),
                "hw19_deviation" => hw19_deviation(&p).value,
                "hw19_tail" => hw19_tail(&p).value,
                "freedman_tail" => freedman_tail(&p).value,
                other => panic!("unknown evaluator {other}"),
            };
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    let complete = counts.len() == 6 && counts.iter().all(|&c| c == 20);
    verdict(
        complete && worst <= 1e-12,
        format!(
            "{} evaluators × 20 pinned values, max relative error {worst:.3e} (tol 1e-12)",
            counts.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("telescoping identity", telescoping),
        ("exact Doob oracle", doob_oracle),
        ("increment bound", increment_bound_sweep),
        ("variation bound", variation_bound),
        ("mean product below e^μ", mean_product_order),
        ("exact expectation", exact_expectation),
        ("empirical concentration", empirical_concentration),
        ("scalar lower bound", lower_bound),
        ("determinism", determinism),
        ("bound regression", regression),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        failures += usize::from(!v.passed);
        println!(
            "criterion {:>2} {}: {}: {} [{:.1}s]",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            name,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/10 passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
