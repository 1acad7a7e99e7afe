//! Library results against independent references: nalgebra decompositions,
//! exact rational binomial sums, and brute-force scalar expectations.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use matconc::distributions::MatrixDistribution;
use matconc::martingale::doob_increment;
use matconc::matrix::{
    frobenius_norm, hermitian_eigenvalues, loewner_leq, matrix_exp, matrix_power, op_norm,
};
use matconc::montecarlo::binomial_upper_tail;
use matconc::products::{expected_product, normalized_product, ProductInstance};
use matconc::rng::RandomStream;
use matconc::ComplexMatrix;

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(m.dim(), m.dim(), m.entries())
}

fn random_matrix<R: Rng>(rng: &mut R, d: usize, scale: f64) -> ComplexMatrix {
    let data = (0..d * d)
        .map(|_| {
            Complex64::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            )
        })
        .collect();
    ComplexMatrix::new(d, data).unwrap()
}

fn random_hermitian<R: Rng>(rng: &mut R, d: usize, scale: f64) -> ComplexMatrix {
    random_matrix(rng, d, scale).hermitian_part()
}

#[test]
fn op_norm_matches_svd() {
    let mut rng = RandomStream::new(11, 0);
    for trial in 0..300 {
        let d = 1 + trial % 9;
        let m = random_matrix(&mut rng, d, 1.0 + trial as f64 / 50.0);
        let svd = to_nalgebra(&m).singular_values().max();
        let ours = op_norm(&m).unwrap();
        assert!((ours - svd).abs() <= 1e-10 * svd, "d={d}: {ours} vs {svd}");
    }
}

#[test]
fn op_norm_of_rank_one_and_clustered_spectra() {
    // Rank one: ‖u v*‖ = ‖u‖‖v‖. Two nearly equal top singular values slow power iteration.
    let u = [1.0, -2.0, 0.5];
    let v = [0.3, 0.0, 4.0];
    let rank_one: Vec<f64> = (0..9).map(|k| u[k / 3] * v[k % 3]).collect();
    let m = ComplexMatrix::from_real(3, &rank_one).unwrap();
    let expect = (1.0f64 + 4.0 + 0.25).sqrt() * (0.09f64 + 16.0).sqrt();
    assert!((op_norm(&m).unwrap() - expect).abs() < 1e-12 * expect);

    let clustered = ComplexMatrix::from_real_diag(&[1.0, 1.0 - 1e-9, -1.0 + 1e-12, 0.2]);
    assert!((op_norm(&clustered).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut rng = RandomStream::new(12, 0);
    for d in 1..=8 {
        let h = random_hermitian(&mut rng, d, 2.0);
        let mut reference: Vec<f64> = to_nalgebra(&h)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        reference.sort_by(f64::total_cmp);
        let ours = hermitian_eigenvalues(&h).unwrap();
        for (a, b) in ours.iter().zip(&reference) {
            assert!(
                (a - b).abs() < 1e-12 * (1.0 + b.abs()),
                "d={d}: {ours:?} vs {reference:?}"
            );
        }
    }
}

#[test]
fn matrix_exp_matches_nalgebra() {
    let mut rng = RandomStream::new(13, 0);
    for trial in 0..60 {
        let d = 1 + trial % 6;
        let m = random_matrix(&mut rng, d, 0.2 + trial as f64 / 15.0);
        let reference = to_nalgebra(&m).exp();
        let ours = to_nalgebra(&matrix_exp(&m).unwrap());
        let err = (&ours - &reference).norm() / reference.norm();
        assert!(err < 1e-12, "trial {trial}: relative error {err:e}");
    }
}

/// `num / den` as `f64`, correct to within an ulp or two.
fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    if num.bits() == 0 {
        return 0.0;
    }
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        (num >> (-shift) as u64) / den
    };
    let mantissa = q
        .to_u64_digits()
        .iter()
        .enumerate()
        .map(|(i, &w)| w as f64 * 2f64.powi(64 * i as i32))
        .sum::<f64>();
    // Two steps so that 2^-shift never underflows on its own.
    let half = shift as i32 / 2;
    mantissa * 2f64.powi(-half) * 2f64.powi(half - shift as i32)
}

fn choose(n: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::from(1u32), |acc, i| acc * (n - i) / (i + 1))
}

/// `Pr[Bin(n, a/b) ≥ m]` as an exact rational.
fn exact_tail(n: u64, a: u64, b: u64, m: u64) -> f64 {
    let num: BigUint = (m..=n)
        .map(|k| {
            choose(n, k) * BigUint::from(a).pow(k as u32) * BigUint::from(b - a).pow((n - k) as u32)
        })
        .sum();
    ratio(&num, &BigUint::from(b).pow(n as u32))
}

#[test]
fn binomial_tail_matches_exact_rationals() {
    for (n, a, b) in [
        (1, 1, 2),
        (10, 1, 2),
        (100, 1, 2),
        (1000, 1, 2),
        (57, 3, 10),
        (400, 1, 20),
    ] {
        for m in [0, 1, n / 4, n / 2, n / 2 + 1, 3 * n / 4, n] {
            let exact = exact_tail(n, a, b, m);
            let ours = binomial_upper_tail(n, a as f64 / b as f64, m);
            let tol = 1e-13 * exact.max(1e-300);
            assert!(
                (ours - exact).abs() <= tol,
                "n={n} p={a}/{b} m={m}: {ours:e} vs {exact:e}"
            );
        }
    }
}

#[test]
fn expected_product_is_scalar_power_for_scalars() {
    for &(mu, n) in &[(0.5, 1usize), (1.0, 8), (-0.7, 33), (2.0, 1000)] {
        let got = expected_product(&ComplexMatrix::scalar(mu), n).unwrap();
        let want = (1.0 + mu / n as f64).powi(n as i32);
        assert!((got[(0, 0)].re - want).abs() <= 1e-13 * want.abs());
    }
}

/// Scalar two-point with values `{0, 2a}`: `E[f | prefix] = ∏(1 + xᵢ/n)·(1 + a/n)^(n−k)`,
/// so Doob increments have a closed form independent of the matrix code.
#[test]
fn scalar_doob_increments_match_conditional_expectations() {
    let a = 0.8;
    let dist = MatrixDistribution::two_point_scalar(a).unwrap();
    let mu = dist.mean();
    for n in 1..=10usize {
        for bits in 0u32..(1 << n) {
            let xs: Vec<f64> = (0..n)
                .map(|i| if bits >> i & 1 == 1 { 2.0 * a } else { 0.0 })
                .collect();
            let inst = ProductInstance::new(xs.iter().map(|&x| ComplexMatrix::scalar(x)).collect())
                .unwrap();
            let cond = |k: usize| {
                xs[..k].iter().map(|x| 1.0 + x / n as f64).product::<f64>()
                    * (1.0 + a / n as f64).powi((n - k) as i32)
            };
            for k in 1..=n {
                let y = doob_increment(k, &inst, &mu).unwrap()[(0, 0)].re;
                assert!((y - (cond(k) - cond(k - 1))).abs() < 1e-14, "n={n} k={k}");
            }
            let f = normalized_product(&inst)[(0, 0)].re;
            assert!((f - cond(n)).abs() < 1e-14);
        }
    }
}

#[test]
fn samples_respect_the_norm_bound_almost_surely() {
    let kinds = [
        MatrixDistribution::two_point_scalar(1.5).unwrap(),
        MatrixDistribution::diagonal_rademacher(3, 1.5).unwrap(),
        MatrixDistribution::hermitian_bounded_default(3, 1.5, 0.5).unwrap(),
        MatrixDistribution::ginibre_clipped(3, 1.5, Some(2.0)).unwrap(),
    ];
    for dist in &kinds {
        let mut rng = RandomStream::new(21, 0);
        let bound = dist.norm_bound();
        let worst = (0..1_000_000)
            .map(|_| op_norm(&dist.sample(&mut rng)).unwrap())
            .fold(0.0, f64::max);
        assert!(worst <= bound + 1e-12, "{}: {worst} > {bound}", dist.kind());
    }
}

#[test]
fn sample_means_match_declared_means() {
    let kinds = [
        MatrixDistribution::two_point_scalar(0.7).unwrap(),
        MatrixDistribution::diagonal_rademacher(3, 1.0).unwrap(),
        MatrixDistribution::hermitian_bounded_default(3, 1.0, 0.5).unwrap(),
        MatrixDistribution::ginibre_clipped(3, 1.0, None).unwrap(),
    ];
    let draws = 100_000;
    for dist in &kinds {
        let mut rng = RandomStream::new(22, 0);
        let mut sum = ComplexMatrix::zeros(dist.dim());
        for _ in 0..draws {
            sum = &sum + &dist.sample(&mut rng);
        }
        let err = sum.scale(1.0 / draws as f64).max_abs_diff(&dist.mean());
        // Entries are bounded by L, so 5 standard errors is at most 5L/√draws.
        assert!(
            err < 5.0 * dist.norm_bound() / (draws as f64).sqrt(),
            "{}: {err}",
            dist.kind()
        );
    }
}

fn matrix_strategy(d: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), d * d).prop_map(move |v| {
        ComplexMatrix::new(
            d,
            v.into_iter()
                .map(|(re, im)| Complex64::new(re, im))
                .collect(),
        )
        .unwrap()
    })
}

fn pair_strategy() -> impl Strategy<Value = (ComplexMatrix, ComplexMatrix)> {
    (1usize..6).prop_flat_map(|d| (matrix_strategy(d), matrix_strategy(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn op_norm_is_a_submultiplicative_norm((a, b) in pair_strategy()) {
        let (na, nb) = (op_norm(&a).unwrap(), op_norm(&b).unwrap());
        let slack = 1e-10 * (1.0 + na * nb);
        prop_assert!(op_norm(&a.matmul(&b)).unwrap() <= na * nb + slack);
        prop_assert!(op_norm(&(&a + &b)).unwrap() <= na + nb + slack);
        prop_assert!((op_norm(&a.adjoint()).unwrap() - na).abs() <= slack);
        let fro = frobenius_norm(&a);
        prop_assert!(na <= fro + slack && fro <= (a.dim() as f64).sqrt() * na + slack);
    }

    #[test]
    fn exp_of_negation_is_inverse(a in (1usize..5).prop_flat_map(matrix_strategy)) {
        let a = a.scale(0.3);
        let prod = matrix_exp(&a).unwrap().matmul(&matrix_exp(&a.scale(-1.0)).unwrap());
        prop_assert!(prod.max_abs_diff(&ComplexMatrix::identity(a.dim())) < 1e-11);
    }

    #[test]
    fn matrix_power_adds_exponents(a in (1usize..5).prop_flat_map(matrix_strategy), j in 0u64..9, k in 0u64..9) {
        let a = a.scale(0.25);
        let lhs = matrix_power(&a, j + k).unwrap();
        let rhs = matrix_power(&a, j).unwrap().matmul(&matrix_power(&a, k).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10 * (1.0 + frobenius_norm(&lhs)));
    }

    #[test]
    fn adding_a_gram_matrix_raises_loewner_order((a, b) in pair_strategy()) {
        let h = a.hermitian_part();
        let psd = b.matmul(&b.adjoint()).hermitian_part();
        prop_assert!(loewner_leq(&h, &(&h + &psd), 1e-9).unwrap());
    }
}
