use super::ComplexMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of the Hermitian part of `m`, ascending.
///
/// `H = A + iB` is embedded as the real symmetric `[[A, −B], [B, A]]`,
/// whose spectrum is the spectrum of `H` with every eigenvalue doubled.
/// The embedding is diagonalized with cyclic Jacobi rotations.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    m.check_finite()?;
    let h = m.hermitian_part();
    let d = h.dim();
    let n = 2 * d;
    let mut a = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            a[i * n + j] = z.re;
            a[(i + d) * n + (j + d)] = z.re;
            a[i * n + (j + d)] = -z.im;
            a[(i + d) * n + j] = z.im;
        }
    }
    let mut eigs = symmetric_jacobi_eigenvalues(&mut a, n)?;
    eigs.sort_by(|x, y| x.total_cmp(y));
    // Pairs are equal up to rounding; average each pair.
    Ok(eigs.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// Cyclic Jacobi on a dense symmetric `n × n` matrix stored row-major.
/// Destroys `a`; returns the (unsorted) diagonal after convergence.
fn symmetric_jacobi_eigenvalues(a: &mut [f64], n: usize) -> Result<Vec<f64>> {
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if total == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    Err(Error::InvalidInput(
        "Jacobi eigensolver did not converge".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn diagonal_spectrum() {
        let m = ComplexMatrix::from_real_diag(&[3.0, -4.0, 0.5]);
        let e = hermitian_eigenvalues(&m).unwrap();
        assert_eq!(e.len(), 3);
        for (got, want) in e.iter().zip([-4.0, 0.5, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn pauli_y_has_eigenvalues_plus_minus_one() {
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        let y = ComplexMatrix::new(2, vec![z, -i, i, z]).unwrap();
        let e = hermitian_eigenvalues(&y).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trace_is_preserved() {
        let m = ComplexMatrix::new(
            3,
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(1.0, 0.5),
                Complex64::new(0.0, -0.3),
                Complex64::new(1.0, -0.5),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.7, 0.0),
                Complex64::new(0.0, 0.3),
                Complex64::new(0.7, 0.0),
                Complex64::new(0.25, 0.0),
            ],
        )
        .unwrap();
        let e = hermitian_eigenvalues(&m).unwrap();
        let sum: f64 = e.iter().sum();
        assert!((sum - 1.25).abs() < 1e-13);
    }
}
