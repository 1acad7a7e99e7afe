//! Random-matrix distributions with a certified almost-sure norm bound and an
//! analytically known mean.
//!
//! | kind                 | sample                                  | mean | norm bound |
//! |----------------------|-----------------------------------------|------|------------|
//! | `TwoPointScalar`     | `[0]` or `[2L]`, each with prob. 1/2     | `[L]`| `2L`       |
//! | `DiagonalRademacher` | `diag(±L, …, ±L)`, independent signs    | `0`  | `L`        |
//! | `HermitianBounded`   | `C + (L − ‖C‖)·U D U*`                  | `C`  | `L`        |
//! | `GinibreClipped`     | `G · min(1, L/‖G‖)`                     | `0`  | `L`        |
//!
//! `TwoPointScalar` follows the scalar lower-bound construction, where `L` is
//! the mean and the samples reach `2L`; its certified bound is therefore `2L`.
//! For `HermitianBounded`, `U` is Haar-unitary and `D` is diagonal with
//! independent Uniform[−1, 1] entries, so `E[U D U*] = 0`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{op_norm_eigensolve, ComplexMatrix};

/// Largest number of outcome sequences [`MatrixDistribution::enumerate_outcomes`]
/// will produce.
pub const MAX_ENUMERATION: u64 = 1 << 20;

/// Default `HermitianBounded` center: `center_scale · L · diag(1, 1 − 2/d, …)`.
pub const DEFAULT_CENTER_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistributionKind {
    TwoPointScalar,
    HermitianBounded,
    DiagonalRademacher,
    GinibreClipped,
}

impl DistributionKind {
    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::TwoPointScalar => "TwoPointScalar",
            DistributionKind::HermitianBounded => "HermitianBounded",
            DistributionKind::DiagonalRademacher => "DiagonalRademacher",
            DistributionKind::GinibreClipped => "GinibreClipped",
        }
    }

    pub fn is_finitely_supported(self) -> bool {
        matches!(
            self,
            DistributionKind::TwoPointScalar | DistributionKind::DiagonalRademacher
        )
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match key.to_ascii_lowercase().as_str() {
            "twopointscalar" | "twopoint" => Ok(DistributionKind::TwoPointScalar),
            "hermitianbounded" | "hermitian" => Ok(DistributionKind::HermitianBounded),
            "diagonalrademacher" | "rademacher" => Ok(DistributionKind::DiagonalRademacher),
            "ginibreclipped" | "ginibre" => Ok(DistributionKind::GinibreClipped),
            _ => Err(Error::Config(format!("unknown distribution kind '{s}'"))),
        }
    }
}

/// Kind-specific parameters. Unused fields must be absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionParams {
    /// `HermitianBounded`: scale of the default diagonal center, in units of L.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_scale: Option<f64>,
    /// `GinibreClipped`: standard deviation of each complex entry before clipping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_std: Option<f64>,
}

/// JSON form: `{"kind": str, "d": int, "L": float, "params": {...}, "mean_file": path}`.
///
/// `mean_file` (HermitianBounded only) names a matrix JSON file used as the
/// center `C`, overriding `params.center_scale`. Relative paths resolve
/// against the directory passed to [`DistributionConfig::build_in`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    pub kind: DistributionKind,
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default)]
    pub params: DistributionParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_file: Option<PathBuf>,
}

impl DistributionConfig {
    pub fn new(kind: DistributionKind, d: usize, l: f64) -> Self {
        DistributionConfig {
            kind,
            d,
            l,
            params: DistributionParams::default(),
            mean_file: None,
        }
    }

    pub fn build(&self) -> Result<MatrixDistribution> {
        self.build_in(Path::new("."))
    }

    pub fn build_in(&self, base: &Path) -> Result<MatrixDistribution> {
        let p = &self.params;
        let reject = |field: &str| {
            Err(Error::Config(format!(
                "parameter '{field}' does not apply to {}",
                self.kind
            )))
        };
        match self.kind {
            DistributionKind::TwoPointScalar | DistributionKind::DiagonalRademacher => {
                if p.center_scale.is_some() {
                    return reject("center_scale");
                }
                if p.entry_std.is_some() {
                    return reject("entry_std");
                }
                if self.mean_file.is_some() {
                    return reject("mean_file");
                }
                if self.kind == DistributionKind::TwoPointScalar {
                    if self.d != 1 {
                        return Err(Error::Config("TwoPointScalar requires d = 1".into()));
                    }
                    MatrixDistribution::two_point_scalar(self.l)
                } else {
                    MatrixDistribution::diagonal_rademacher(self.d, self.l)
                }
            }
            DistributionKind::HermitianBounded => {
                if p.entry_std.is_some() {
                    return reject("entry_std");
                }
                match &self.mean_file {
                    Some(path) => {
                        if p.center_scale.is_some() {
                            return Err(Error::Config(
                                "give either mean_file or center_scale, not both".into(),
                            ));
                        }
                        let path = if path.is_absolute() {
                            path.clone()
                        } else {
                            base.join(path)
                        };
                        let text = std::fs::read_to_string(&path).map_err(|e| {
                            Error::Config(format!("cannot read mean file {}: {e}", path.display()))
                        })?;
                        let center: ComplexMatrix = serde_json::from_str(&text)?;
                        if center.dim() != self.d {
                            return Err(Error::Config(format!(
                                "mean file has d = {}, distribution has d = {}",
                                center.dim(),
                                self.d
                            )));
                        }
                        MatrixDistribution::hermitian_bounded(self.l, center)
                    }
                    None => MatrixDistribution::hermitian_bounded_default(
                        self.d,
                        self.l,
                        p.center_scale.unwrap_or(DEFAULT_CENTER_SCALE),
                    ),
                }
            }
            DistributionKind::GinibreClipped => {
                if p.center_scale.is_some() {
                    return reject("center_scale");
                }
                if self.mean_file.is_some() {
                    return reject("mean_file");
                }
                MatrixDistribution::ginibre_clipped(self.d, self.l, p.entry_std)
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    TwoPointScalar,
    DiagonalRademacher,
    HermitianBounded { center: ComplexMatrix, spread: f64 },
    GinibreClipped { entry_std: f64 },
}

/// An immutable, shareable sampler of `d × d` matrices.
#[derive(Clone, Debug)]
pub struct MatrixDistribution {
    kind: DistributionKind,
    dim: usize,
    l: f64,
    shape: Shape,
}

fn check_scale(l: f64) -> Result<()> {
    if l.is_finite() && l >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "L must be finite and nonnegative, got {l}"
        )))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d >= 1 {
        Ok(())
    } else {
        Err(Error::Config("d must be at least 1".into()))
    }
}

impl MatrixDistribution {
    /// `[0]` or `[2L]` with equal probability; mean `[L]`.
    pub fn two_point_scalar(l: f64) -> Result<Self> {
        check_scale(l)?;
        Ok(MatrixDistribution {
            kind: DistributionKind::TwoPointScalar,
            dim: 1,
            l,
            shape: Shape::TwoPointScalar,
        })
    }

    /// Diagonal with independent uniform `±L` entries.
    pub fn diagonal_rademacher(d: usize, l: f64) -> Result<Self> {
        check_dim(d)?;
        check_scale(l)?;
        Ok(MatrixDistribution {
            kind: DistributionKind::DiagonalRademacher,
            dim: d,
            l,
            shape: Shape::DiagonalRademacher,
        })
    }

    /// `C + (L − ‖C‖)·U D U*` with an explicit center. `‖C‖ > L` is a
    /// hypothesis error: no distribution with that mean can satisfy the bound.
    pub fn hermitian_bounded(l: f64, center: ComplexMatrix) -> Result<Self> {
        check_scale(l)?;
        let center_norm = op_norm_eigensolve(&center)?;
        if center_norm > l {
            return Err(Error::Hypothesis(format!(
                "center norm {center_norm} exceeds the bound L = {l}"
            )));
        }
        Ok(MatrixDistribution {
            kind: DistributionKind::HermitianBounded,
            dim: center.dim(),
            l,
            shape: Shape::HermitianBounded {
                spread: l - center_norm,
                center,
            },
        })
    }

    /// Center `center_scale · L · diag(1 − 2j/d)` for `j = 0..d`.
    pub fn hermitian_bounded_default(d: usize, l: f64, center_scale: f64) -> Result<Self> {
        check_dim(d)?;
        if !(0.0..=1.0).contains(&center_scale) {
            return Err(Error::Config(format!(
                "center_scale must lie in [0, 1], got {center_scale}"
            )));
        }
        let diag: Vec<f64> = (0..d)
            .map(|j| center_scale * l * (1.0 - 2.0 * j as f64 / d as f64))
            .collect();
        Self::hermitian_bounded(l, ComplexMatrix::from_real_diag(&diag))
    }

    /// Complex Gaussian entries (default standard deviation `1/√d`), rescaled
    /// onto the ball of radius `L` when they land outside it.
    pub fn ginibre_clipped(d: usize, l: f64, entry_std: Option<f64>) -> Result<Self> {
        check_dim(d)?;
        check_scale(l)?;
        let entry_std = entry_std.unwrap_or(1.0 / (d as f64).sqrt());
        if !(entry_std.is_finite() && entry_std > 0.0) {
            return Err(Error::Config(format!(
                "entry_std must be positive, got {entry_std}"
            )));
        }
        Ok(MatrixDistribution {
            kind: DistributionKind::GinibreClipped,
            dim: d,
            l,
            shape: Shape::GinibreClipped { entry_std },
        })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `L` parameter the distribution was built with.
    pub fn scale(&self) -> f64 {
        self.l
    }

    /// Certified almost-sure bound on `op_norm` of every sample.
    pub fn norm_bound(&self) -> f64 {
        match self.kind {
            DistributionKind::TwoPointScalar => 2.0 * self.l,
            _ => self.l,
        }
    }

    /// The exact mean `E[X]`.
    pub fn mean(&self) -> ComplexMatrix {
        match &self.shape {
            Shape::TwoPointScalar => ComplexMatrix::scalar(self.l),
            Shape::HermitianBounded { center, .. } => center.clone(),
            Shape::DiagonalRademacher | Shape::GinibreClipped { .. } => {
                ComplexMatrix::zeros(self.dim)
            }
        }
    }

    /// One draw; advances `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        match &self.shape {
            Shape::TwoPointScalar => {
                let hit = rng.random::<bool>();
                ComplexMatrix::scalar(if hit { 2.0 * self.l } else { 0.0 })
            }
            Shape::DiagonalRademacher => {
                let diag: Vec<f64> = (0..self.dim)
                    .map(|_| {
                        if rng.random::<bool>() {
                            self.l
                        } else {
                            -self.l
                        }
                    })
                    .collect();
                ComplexMatrix::from_real_diag(&diag)
            }
            Shape::HermitianBounded { center, spread } => {
                let u = haar_unitary(self.dim, rng);
                let d: Vec<f64> = (0..self.dim)
                    .map(|_| rng.random_range(-1.0..=1.0))
                    .collect();
                // U·D·U*, column j of U scaled by d_j.
                let mut ud = u.clone();
                let n = self.dim;
                for i in 0..n {
                    for j in 0..n {
                        ud[(i, j)] *= d[j] * spread;
                    }
                }
                center + &ud.matmul(&u.adjoint())
            }
            Shape::GinibreClipped { entry_std } => {
                let s = entry_std / std::f64::consts::SQRT_2;
                let data = (0..self.dim * self.dim)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                let g = ComplexMatrix::new(self.dim, data).expect("gaussian entries are finite");
                let norm = op_norm_eigensolve(&g).expect("finite matrix");
                if norm > self.l {
                    // The eigensolve is accurate to a few ulps; shave a little
                    // more so the bound holds exactly.
                    g.scale(self.l / norm * (1.0 - 1e-14))
                } else {
                    g
                }
            }
        }
    }

    /// Support points with their probabilities, for finitely supported kinds.
    pub fn support(&self) -> Result<Vec<(f64, ComplexMatrix)>> {
        match self.shape {
            Shape::TwoPointScalar => Ok(vec![
                (0.5, ComplexMatrix::scalar(0.0)),
                (0.5, ComplexMatrix::scalar(2.0 * self.l)),
            ]),
            Shape::DiagonalRademacher => {
                if self.dim > 20 {
                    return Err(Error::Size(format!(
                        "support of size 2^{} is too large",
                        self.dim
                    )));
                }
                let count = 1usize << self.dim;
                let p = 1.0 / count as f64;
                Ok((0..count)
                    .map(|mask| {
                        let diag: Vec<f64> = (0..self.dim)
                            .map(|j| if mask >> j & 1 == 1 { self.l } else { -self.l })
                            .collect();
                        (p, ComplexMatrix::from_real_diag(&diag))
                    })
                    .collect())
            }
            _ => Err(Error::Unsupported(format!(
                "{} is not finitely supported",
                self.kind
            ))),
        }
    }

    /// Every length-`n` outcome sequence with its exact probability.
    /// Sequences are ordered lexicographically by support index, first draw
    /// most significant.
    pub fn enumerate_outcomes(&self, n: usize) -> Result<Vec<(f64, Vec<ComplexMatrix>)>> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        let support = self.support()?;
        let size = (support.len() as u64)
            .checked_pow(n as u32)
            .filter(|&s| s <= MAX_ENUMERATION);
        let Some(size) = size else {
            return Err(Error::Size(format!(
                "{} outcomes^{n} exceeds the enumeration limit {MAX_ENUMERATION}",
                support.len()
            )));
        };
        let base = support.len();
        let mut out = Vec::with_capacity(size as usize);
        let mut digits = vec![0usize; n];
        for _ in 0..size {
            let prob = digits.iter().map(|&i| support[i].0).product();
            let seq = digits.iter().map(|&i| support[i].1.clone()).collect();
            out.push((prob, seq));
            for slot in digits.iter_mut().rev() {
                *slot += 1;
                if *slot < base {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(out)
    }
}

/// Haar-distributed unitary: Gram–Schmidt on a complex Gaussian matrix. The
/// implied R factor has a positive diagonal, which is what makes Q Haar.
fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    loop {
        let mut cols: Vec<Vec<Complex64>> = (0..d)
            .map(|_| {
                (0..d)
                    .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect()
            })
            .collect();
        let mut ok = true;
        for j in 0..d {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj: Complex64 = done[k]
                    .iter()
                    .zip(&rest[0])
                    .map(|(q, v)| q.conj() * v)
                    .sum();
                for (v, q) in rest[0].iter_mut().zip(&done[k]) {
                    *v -= proj * q;
                }
            }
            let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|z| *z /= norm);
        }
        if ok {
            let mut u = ComplexMatrix::zeros(d);
            for (j, col) in cols.iter().enumerate() {
                for (i, &z) in col.iter().enumerate() {
                    u[(i, j)] = z;
                }
            }
            return u;
        }
    }
}
