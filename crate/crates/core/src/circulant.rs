//! Circular convolution, circulant matrices and their DFT diagonalization.
//!
//! Everything here lives on a single period `d`: indices are taken mod `d` and
//! a filter is the generator of a `d × d` circulant matrix with entries
//! `C[i][k] = w[(i - k) mod d]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite real filter `(w_0, …, w_M)` acting on `d`-periodic sequences.
///
/// Trailing exact zeros are trimmed on construction, so the last stored
/// coefficient is nonzero unless the filter is identically zero (in which case
/// no coefficients are stored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterRepr", into = "FilterRepr")]
pub struct Filter {
    coefficients: Vec<f64>,
    period: usize,
}

#[derive(Serialize, Deserialize)]
struct FilterRepr {
    coefficients: Vec<f64>,
    period: usize,
}

impl TryFrom<FilterRepr> for Filter {
    type Error = Error;

    fn try_from(repr: FilterRepr) -> Result<Self> {
        Filter::new(repr.coefficients, repr.period)
    }
}

impl From<Filter> for FilterRepr {
    fn from(f: Filter) -> Self {
        FilterRepr {
            coefficients: f.coefficients,
            period: f.period,
        }
    }
}

impl Filter {
    pub fn new(mut coefficients: Vec<f64>, period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::ZeroPeriod);
        }
        if let Some(bad) = coefficients.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("filter coefficient {bad}")));
        }
        while coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.len() > period {
            return Err(Error::SupportExceedsPeriod {
                support: coefficients.len(),
                period,
            });
        }
        Ok(Filter {
            coefficients,
            period,
        })
    }

    /// The identity filter `δ_0`.
    pub fn delta(period: usize) -> Result<Self> {
        Filter::new(vec![1.0], period)
    }

    /// Pure shift by `k` positions.
    pub fn shift(k: usize, period: usize) -> Result<Self> {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Filter::new(c, period)
    }

    pub fn zero(period: usize) -> Result<Self> {
        Filter::new(Vec::new(), period)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Number of stored coefficients, `M + 1`.
    pub fn support_size(&self) -> usize {
        self.coefficients.len()
    }

    /// Polynomial degree `M`, or `None` for the zero filter.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Coefficient at offset `k mod d`.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coefficients
            .get(k % self.period)
            .copied()
            .unwrap_or(0.0)
    }

    /// Same coefficients on a different period.
    pub fn with_period(&self, period: usize) -> Result<Self> {
        Filter::new(self.coefficients.clone(), period)
    }

    /// Coefficients padded with zeros to length `d`.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.period];
        out[..self.coefficients.len()].copy_from_slice(&self.coefficients);
        out
    }

    /// `ℓ¹` norm of the coefficients.
    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.abs()).sum()
    }
}

/// `out_i = Σ_k w[(i - k) mod d] x_k`.
pub fn circular_convolve(w: &Filter, x: &[f64]) -> Result<Vec<f64>> {
    let d = w.period;
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: x.len(),
        });
    }
    let mut out = vec![0.0; d];
    for (m, &wm) in w.coefficients.iter().enumerate() {
        if wm == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += wm * x[(i + d - m) % d];
        }
    }
    Ok(out)
}

/// Dense `d × d` circulant matrix generated by a filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantMatrix {
    generator: Filter,
    dimension: usize,
}

impl CirculantMatrix {
    pub fn generator(&self) -> &Filter {
        &self.generator
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entry(&self, i: usize, k: usize) -> f64 {
        let d = self.dimension;
        self.generator.coeff((i % d + d - k % d) % d)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dimension)
            .map(|i| (0..self.dimension).map(|k| self.entry(i, k)).collect())
            .collect()
    }

    /// Dense matrix-vector product; deliberately not routed through
    /// [`circular_convolve`].
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: x.len(),
            });
        }
        Ok((0..self.dimension)
            .map(|i| {
                x.iter()
                    .enumerate()
                    .map(|(k, xk)| self.entry(i, k) * xk)
                    .sum()
            })
            .collect())
    }

    /// Complex matrix-vector product, used for eigen-residual checks.
    pub fn matvec_complex(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: v.len(),
            });
        }
        Ok((0..self.dimension)
            .map(|i| {
                v.iter()
                    .enumerate()
                    .map(|(k, vk)| vk * self.entry(i, k))
                    .sum()
            })
            .collect())
    }
}

/// Circulant matrix of `w` at dimension `d`.
pub fn as_matrix(w: &Filter, d: usize) -> Result<CirculantMatrix> {
    let generator = w.with_period(d)?;
    Ok(CirculantMatrix {
        generator,
        dimension: d,
    })
}

/// Eigenvalues `ŵ(ℓ) = Σ_m w_m ω^{-mℓ}`, `ω = e^{2πi/d}`, of the circulant
/// matrix of a filter.
#[derive(Debug, Clone, PartialEq)]
pub struct DftMultipliers {
    pub values: Vec<Complex64>,
}

impl DftMultipliers {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise product; the multipliers of a composed filter.
    pub fn pointwise(&self, other: &DftMultipliers) -> Result<DftMultipliers> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(DftMultipliers {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &DftMultipliers) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Reassemble the dense circulant matrix `F · diag(ŵ) · F* / d`, where the
    /// columns of `F` are the eigenvectors [`fourier_mode`].
    pub fn reconstruct(&self) -> Vec<Vec<Complex64>> {
        let d = self.values.len();
        let modes: Vec<Vec<Complex64>> = (0..d).map(|l| fourier_mode(l, d)).collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|k| {
                        modes
                            .iter()
                            .zip(&self.values)
                            .map(|(v, w)| v[i] * w * v[k].conj())
                            .sum::<Complex64>()
                            / d as f64
                    })
                    .collect()
            })
            .collect()
    }
}

/// `v^(ℓ) = (1, ω^ℓ, ω^{2ℓ}, …, ω^{(d-1)ℓ})`.
pub fn fourier_mode(l: usize, d: usize) -> Vec<Complex64> {
    (0..d)
        .map(|n| Complex64::from_polar(1.0, 2.0 * PI * ((n * l) % d) as f64 / d as f64))
        .collect()
}

/// Direct `O(d²)` evaluation of the DFT multipliers. This is the reference.
pub fn dft_multipliers(w: &Filter, d: usize) -> Result<DftMultipliers> {
    if w.period != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: w.period,
        });
    }
    let values = (0..d)
        .map(|l| {
            w.coefficients
                .iter()
                .enumerate()
                .map(|(m, &wm)| {
                    Complex64::from_polar(wm, -2.0 * PI * ((m * l) % d) as f64 / d as f64)
                })
                .sum()
        })
        .collect();
    Ok(DftMultipliers { values })
}

/// FFT evaluation of the DFT multipliers; must agree with
/// [`dft_multipliers`].
pub fn dft_multipliers_fft(w: &Filter) -> DftMultipliers {
    let d = w.period;
    let mut buf: Vec<Complex64> = w.dense().into_iter().map(Complex64::from).collect();
    FftPlanner::new().plan_fft_forward(d).process(&mut buf);
    DftMultipliers { values: buf }
}

/// Filter of the composition `a ∗ b` on the common period: the polynomial
/// product with exponents reduced mod `d`.
pub fn compose_filters(a: &Filter, b: &Filter) -> Result<Filter> {
    if a.period != b.period {
        return Err(Error::DimensionMismatch {
            expected: a.period,
            actual: b.period,
        });
    }
    let d = a.period;
    if a.is_zero() || b.is_zero() {
        return Filter::zero(d);
    }
    let len = (a.coefficients.len() + b.coefficients.len() - 1).min(d);
    let mut out = vec![0.0; len];
    for (i, &ai) in a.coefficients.iter().enumerate() {
        for (j, &bj) in b.coefficients.iter().enumerate() {
            out[(i + j) % d] += ai * bj;
        }
    }
    Filter::new(out, d)
}
