use super::{frobenius_norm, ComplexMatrix};
use crate::error::Result;

const SCALED_NORM_TARGET: f64 = 0.5;
const TERM_TOL: f64 = 1e-16;
const MAX_TERMS: usize = 64;

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// `M` is scaled by `2^-s` until its Frobenius norm (an upper bound on the
/// operator norm) is at most 0.5, the series is summed until a term's norm
/// falls below 1e-16, and the result is squared `s` times.
pub fn matrix_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    m.check_finite()?;
    let norm = frobenius_norm(m);
    let mut squarings = 0u32;
    if norm > SCALED_NORM_TARGET {
        squarings = (norm / SCALED_NORM_TARGET).log2().ceil() as u32;
        // log2 rounding can land one short.
        while norm / 2f64.powi(squarings as i32) > SCALED_NORM_TARGET {
            squarings += 1;
        }
    }
    let scaled = m.scale(1.0 / 2f64.powi(squarings as i32));

    let d = m.dim();
    let mut sum = ComplexMatrix::identity(d);
    let mut term = ComplexMatrix::identity(d);
    for k in 1..=MAX_TERMS {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        sum = &sum + &term;
        if frobenius_norm(&term) < TERM_TOL {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum.check_finite()?;
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(
            matrix_exp(&ComplexMatrix::zeros(3)).unwrap(),
            ComplexMatrix::identity(3)
        );
    }

    #[test]
    fn nilpotent_series_terminates() {
        let n = ComplexMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let want = ComplexMatrix::from_real(2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matrix_exp(&n).unwrap().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn scalar_matches_std_exp() {
        for x in [-3.0, -0.1, 0.0, 0.3, 1.0, 2.5, 4.0] {
            let got = matrix_exp(&ComplexMatrix::scalar(x)).unwrap().entries()[0];
            assert!(
                (got.re - f64::exp(x)).abs() <= 1e-14 * f64::exp(x.abs()),
                "x = {x}"
            );
            assert_eq!(got.im, 0.0);
        }
    }
}
