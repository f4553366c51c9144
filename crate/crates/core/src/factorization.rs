//! Factor a long filter into a chain of short ones.
//!
//! A filter `W = (W_0, …, W_M)` is read as the polynomial `Σ W_k z^k`.
//! Convolution of filters is polynomial multiplication, so a factorization
//! `W = w^(J) ∗ … ∗ w^(1)` with every `w^(j)` supported on `{0, …, s}` is a
//! grouping of the roots of that polynomial into real factors of degree at
//! most `s`. Roots come from the eigenvalues of the companion matrix, refined
//! by simultaneous Aberth iteration; conjugate pairs are kept together so
//! every factor has real coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circulant::{compose_filters, Filter};
use crate::error::{Error, Result};

/// A root is treated as real when its imaginary part is below this.
pub const REAL_ROOT_TOLERANCE: f64 = 1e-9;

/// Conjugate pairs closer than this to the real axis are split into a double
/// real root. The coefficient perturbation is `Im²`, far below any tolerance
/// used here.
const NEAR_REAL_PAIR: f64 = 1e-6;

const ABERTH_ITERATIONS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationResult {
    /// Factors in application order: `factors[0]` is `w^(1)`.
    pub factors: Vec<Filter>,
    pub depth: usize,
    /// Max coefficient error of the reconvolved factors against the input.
    pub residual: f64,
}

impl FactorizationResult {
    /// Coefficient arrays only, as written by the CLI.
    pub fn factor_coefficients(&self) -> Vec<Vec<f64>> {
        self.factors
            .iter()
            .map(|f| f.coefficients().to_vec())
            .collect()
    }
}

/// Left fold of [`compose_filters`] over the factors.
pub fn reconvolve(factors: &[Filter]) -> Result<Filter> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::invalid("cannot reconvolve an empty factor list"))?;
    rest.iter()
        .try_fold(first.clone(), |acc, f| compose_filters(f, &acc))
}

/// Depth bound `J < M/(s-1) + 1` for a degree-`M` filter.
pub fn depth_bound_holds(depth: usize, degree: usize, s: usize) -> bool {
    if degree == 0 {
        // a nonzero constant always needs one factor
        return depth == 1;
    }
    ((depth - 1) * (s - 1)) < degree
}

/// Factor `w` into filters supported on `{0, …, s}`.
pub fn factorize(w: &Filter, s: usize, tolerance: f64) -> Result<FactorizationResult> {
    if s < 2 {
        return Err(Error::invalid(format!("filter size s must be at least 2, got {s}")));
    }
    if w.is_zero() {
        return Err(Error::invalid("cannot factor the zero filter"));
    }
    let period = w.period();
    let coeffs = w.coefficients();
    let degree = coeffs.len() - 1;
    let lead = coeffs[degree];

    // exact roots at zero
    let zeros = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let reduced = &coeffs[zeros..];

    let roots = polynomial_roots(reduced);
    let mut items: Vec<Vec<f64>> = group_roots(&roots);
    items.extend(std::iter::repeat_n(vec![0.0, 1.0], zeros));

    let mut polys = pack(items, s);
    if polys.is_empty() {
        polys.push(vec![1.0]);
    }
    if let Some(last) = polys.last_mut() {
        last.iter_mut().for_each(|c| *c *= lead);
    }

    let factors = polys
        .into_iter()
        .map(|p| Filter::new(p, period))
        .collect::<Result<Vec<_>>>()?;
    let product = reconvolve(&factors)?;
    let residual = max_coeff_diff(product.coefficients(), coeffs);
    if residual.is_nan() || residual > tolerance {
        return Err(Error::FactorizationFailed {
            residual,
            tolerance,
        });
    }
    let depth = factors.len();
    debug_assert!(depth_bound_holds(depth, degree, s));
    log::debug!("factorized degree {degree} filter into {depth} factors, residual {residual:e}");
    Ok(FactorizationResult {
        factors,
        depth,
        residual,
    })
}

fn max_coeff_diff(a: &[f64], b: &[f64]) -> f64 {
    (0..a.len().max(b.len()))
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Roots of `Σ c_k z^k` (lowest degree first). `c` must have a nonzero last
/// entry; a constant polynomial has no roots.
pub fn polynomial_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let companion = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -c[n - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let initial: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();
    let polished = aberth_polish(c, initial.clone());
    if reconstruction_error(c, &polished) <= reconstruction_error(c, &initial) {
        polished
    } else {
        initial
    }
}

fn horner(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

fn aberth_polish(c: &[f64], mut roots: Vec<Complex64>) -> Vec<Complex64> {
    for _ in 0..ABERTH_ITERATIONS {
        let mut max_step: f64 = 0.0;
        for i in 0..roots.len() {
            let z = roots[i];
            let (p, dp) = horner(c, z);
            if p.norm() == 0.0 || dp.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = roots
                .iter()
                .enumerate()
                .filter(|&(j, zj)| j != i && (z - zj).norm() > 0.0)
                .map(|(_, zj)| (z - zj).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                roots[i] = z - step;
                max_step = max_step.max(step.norm());
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    roots
}

/// Max coefficient error of `lead · Π (z - r)` against `c`.
fn reconstruction_error(c: &[f64], roots: &[Complex64]) -> f64 {
    let mut poly = vec![Complex64::new(c[c.len() - 1], 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (k, pk) in poly.iter().enumerate() {
            next[k + 1] += pk;
            next[k] -= pk * r;
        }
        poly = next;
    }
    poly.iter()
        .zip(c)
        .map(|(p, ck)| (p - ck).norm())
        .fold(0.0, f64::max)
}

/// Turn roots into monic real items: `[-r, 1]` for real roots and
/// `[|z|², -2 Re z, 1]` for conjugate pairs. Quadratics come first.
fn group_roots(roots: &[Complex64]) -> Vec<Vec<f64>> {
    let mut real = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for &r in roots {
        if r.im.abs() <= REAL_ROOT_TOLERANCE {
            real.push(r.re);
        } else if r.im > 0.0 {
            upper.push(r);
        } else {
            lower.push(r);
        }
    }

    let mut quadratics = Vec::new();
    for z in upper {
        let partner = lower
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (**a - z.conj())
                    .norm()
                    .total_cmp(&(**b - z.conj()).norm())
            })
            .map(|(i, _)| i);
        match partner {
            Some(i) => {
                let w = lower.swap_remove(i);
                if z.im.abs().max(w.im.abs()) <= NEAR_REAL_PAIR {
                    real.push(z.re);
                    real.push(w.re);
                } else {
                    let sum = z + w;
                    let prod = z * w;
                    quadratics.push(vec![prod.re, -sum.re, 1.0]);
                }
            }
            None => real.push(z.re),
        }
    }
    real.extend(lower.iter().map(|w| w.re));
    real.sort_by(f64::total_cmp);

    quadratics
        .into_iter()
        .chain(real.into_iter().map(|r| vec![-r, 1.0]))
        .collect()
}

/// Next-fit packing into factors of degree at most `s`. A linear item only
/// joins a factor whose degree stays at most `s - 1`, a quadratic item one
/// whose degree stays at most `s`. Every closed factor therefore has degree
/// at least `s - 1`, which gives `J < M/(s-1) + 1`.
fn pack(items: Vec<Vec<f64>>, s: usize) -> Vec<Vec<f64>> {
    let mut bins: Vec<Vec<f64>> = Vec::new();
    let mut open: Option<Vec<f64>> = None;
    for item in items {
        let size = item.len() - 1;
        let cap = if size == 1 { s - 1 } else { s };
        open = Some(match open.take() {
            Some(cur) if cur.len() - 1 + size <= cap => poly_mul(&cur, &item),
            Some(cur) => {
                bins.push(cur);
                item
            }
            None => item,
        });
    }
    bins.extend(open);
    bins
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}
