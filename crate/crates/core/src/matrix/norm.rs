use num_complex::Complex64;

use super::{hermitian_eigenvalues, ComplexMatrix};
use crate::error::Result;

const RAYLEIGH_RTOL: f64 = 1e-12;
const RESIDUAL_RTOL: f64 = 1e-10;

/// Spectral norm (largest singular value).
///
/// Power iteration on the Gram matrix `M*M` from a fixed start vector,
/// stopping once the Rayleigh quotient moves by less than 1e-12 relative
/// and the eigen-residual is below 1e-10 relative. If that has not happened
/// within `10·d` iterations the norm comes from a full Hermitian eigensolve
/// of `M*M` instead.
pub fn op_norm(m: &ComplexMatrix) -> Result<f64> {
    m.check_finite()?;
    let d = m.dim();
    if d == 1 {
        return Ok(m.entries()[0].norm());
    }
    let scale = m.entries().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    // Work with M/scale so the Gram matrix cannot overflow.
    let scaled = m.scale(1.0 / scale);
    let gram = scaled.adjoint().matmul(&scaled);

    if let Some(lambda) = power_iteration(&gram, 10 * d) {
        return Ok(scale * lambda.sqrt());
    }
    let eigs = hermitian_eigenvalues(&gram)?;
    Ok(scale * eigs[d - 1].max(0.0).sqrt())
}

/// Spectral norm from a full eigensolve of `M*M`, skipping power iteration.
/// Used where the norm certifies a bound and must not be underestimated.
pub(crate) fn op_norm_eigensolve(m: &ComplexMatrix) -> Result<f64> {
    m.check_finite()?;
    let scale = m.entries().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let scaled = m.scale(1.0 / scale);
    let gram = scaled.adjoint().matmul(&scaled);
    let eigs = hermitian_eigenvalues(&gram)?;
    Ok(scale * eigs[m.dim() - 1].max(0.0).sqrt())
}

/// Frobenius norm, an upper bound for [`op_norm`].
pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn power_iteration(gram: &ComplexMatrix, max_iter: usize) -> Option<f64> {
    let d = gram.dim();
    // Irregular deterministic start so no structured input is orthogonal to it.
    let mut v: Vec<Complex64> = (0..d)
        .map(|j| {
            let x = (j as f64 + 1.0) * 0.618_033_988_749_894_9;
            Complex64::new(1.0 + x.fract(), 0.25 * (x * 1.7).fract())
        })
        .collect();
    normalize(&mut v)?;
    let mut rayleigh = 0.0;
    for _ in 0..max_iter {
        let w = gram.apply(&v);
        let next: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - vi * next).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if next > 0.0
            && (next - rayleigh).abs() <= RAYLEIGH_RTOL * next
            && residual <= RESIDUAL_RTOL * next
        {
            return Some(next);
        }
        rayleigh = next;
        v = w;
        normalize(&mut v)?;
    }
    None
}

fn normalize(v: &mut [Complex64]) -> Option<()> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    Some(())
}
