//! Fourier side of the obstruction: spectra on the torus `T^d`, projections
//! onto a frequency lattice, the `L²` floor for off-lattice ridges, and a
//! grid-based check that ReLU layers do not leave the lattice.
//!
//! Functions live on `T^d = [0, 1)^d` with the normalized measure, so
//! `f(x) = Σ_k f̂(k) e^{2πi k·x}` and `‖f‖² = Σ_k |f̂(k)|²`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::FrequencyLattice;
use crate::network::PeriodicCnn;
use crate::par;

/// Coefficients at or below this magnitude are dropped by [`SpectralVector::normalize`].
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Largest grid (total points) the sampling routines will allocate.
pub const MAX_GRID_POINTS: usize = 1 << 24;

/// Sparse map from integer frequencies to complex coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralVector {
    dim: usize,
    entries: BTreeMap<Vec<i64>, Complex64>,
    /// Grid size when the spectrum was estimated from samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

impl SpectralVector {
    pub fn new(dim: usize) -> Self {
        SpectralVector {
            dim,
            entries: BTreeMap::new(),
            grid: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> Option<usize> {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Add `c` to the coefficient at `k`.
    pub fn add(&mut self, k: Vec<i64>, c: Complex64) -> Result<()> {
        if k.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: k.len(),
            });
        }
        *self.entries.entry(k).or_default() += c;
        Ok(())
    }

    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.entries.get(k).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.entries.iter()
    }

    /// `Σ |c_k|²`.
    pub fn energy(&self) -> f64 {
        self.entries.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Drop coefficients with magnitude at or below [`DROP_TOLERANCE`].
    pub fn normalize(&mut self) {
        self.entries.retain(|_, c| c.norm() > DROP_TOLERANCE);
    }

    /// Whether `c(-k) = conj(c(k))` for every stored `k` (indices taken
    /// modulo the grid for sampled spectra).
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.entries.iter().all(|(k, c)| {
            let neg: Vec<i64> = match self.grid {
                Some(n) => k
                    .iter()
                    .map(|&v| signed_frequency((-v).rem_euclid(n as i64) as usize, n))
                    .collect(),
                None => k.iter().map(|v| -v).collect(),
            };
            (self.coeff(&neg) - c.conj()).norm() <= tol
        })
    }

    /// Whether every component satisfies `|k_i| < N/2` for the sampling grid.
    /// Analytic spectra resolve everything.
    pub fn resolvable(&self, k: &[i64]) -> bool {
        match self.grid {
            None => true,
            Some(n) => k.iter().all(|&v| 2 * v.unsigned_abs() < n as u64),
        }
    }

    /// Orthogonal split into the part supported on `lattice` and the rest.
    pub fn project(&self, lattice: &FrequencyLattice) -> Result<(SpectralVector, SpectralVector)> {
        self.check_dim(lattice)?;
        let mut on = SpectralVector {
            grid: self.grid,
            ..SpectralVector::new(self.dim)
        };
        let mut off = on.clone();
        for (k, c) in &self.entries {
            if lattice.member(k)? {
                on.entries.insert(k.clone(), *c);
            } else {
                off.entries.insert(k.clone(), *c);
            }
        }
        Ok((on, off))
    }

    /// `Σ_{k ∉ Λ} |c_k|²`.
    pub fn off_lattice_energy(&self, lattice: &FrequencyLattice) -> Result<f64> {
        Ok(self.project(lattice)?.1.energy())
    }

    /// Energy split by lattice membership and resolvability.
    pub fn energy_partition(&self, lattice: &FrequencyLattice) -> Result<EnergyPartition> {
        self.check_dim(lattice)?;
        let mut p = EnergyPartition::default();
        for (k, c) in &self.entries {
            let e = c.norm_sqr();
            p.total += e;
            if !self.resolvable(k) {
                p.unresolved += e;
            } else if !lattice.member(k)? {
                p.off_lattice += e;
            }
        }
        Ok(p)
    }

    /// `self − other`, coefficient-wise.
    pub fn difference(&self, other: &SpectralVector) -> Result<SpectralVector> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let mut out = self.clone();
        for (k, c) in &other.entries {
            *out.entries.entry(k.clone()).or_default() -= c;
        }
        Ok(out)
    }

    fn check_dim(&self, lattice: &FrequencyLattice) -> Result<()> {
        if lattice.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: lattice.dim(),
            });
        }
        Ok(())
    }
}

/// Energy bookkeeping for a (possibly sampled) spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyPartition {
    pub total: f64,
    /// Resolvable energy outside the lattice.
    pub off_lattice: f64,
    /// Energy at Nyquist frequencies, where the sign of `k` is ambiguous.
    pub unresolved: f64,
}

impl EnergyPartition {
    pub fn off_lattice_fraction(&self) -> f64 {
        if self.total > 0.0 {
            self.off_lattice / self.total
        } else {
            0.0
        }
    }

    pub fn unresolved_fraction(&self) -> f64 {
        if self.total > 0.0 {
            self.unresolved / self.total
        } else {
            0.0
        }
    }

    fn accumulate(&mut self, other: &EnergyPartition) {
        self.total += other.total;
        self.off_lattice += other.off_lattice;
        self.unresolved += other.unresolved;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileCoefficient {
    pub m: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ProfileCoefficient {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Ridge `f(x) = φ(u·x)` on the torus with integer direction `u` and a
/// finite Fourier series `φ(t) = Σ_m c_m e^{2πimt}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusRidge {
    pub direction: Vec<i64>,
    pub coefficients: Vec<ProfileCoefficient>,
}

impl TorusRidge {
    pub fn new(direction: Vec<i64>, coefficients: Vec<ProfileCoefficient>) -> Result<Self> {
        if direction.is_empty() {
            return Err(Error::invalid("ridge direction has no components"));
        }
        if coefficients
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::NonFinite("profile coefficient".into()));
        }
        Ok(TorusRidge {
            direction,
            coefficients,
        })
    }

    /// `φ(t) = Σ a_m cos(2π m t)` for the listed `(m, a_m)`, `m ≥ 1`.
    pub fn cosine_sum(direction: Vec<i64>, terms: &[(i64, f64)]) -> Result<Self> {
        let coefficients = terms
            .iter()
            .flat_map(|&(m, a)| {
                [
                    ProfileCoefficient { m, re: a / 2.0, im: 0.0 },
                    ProfileCoefficient { m: -m, re: a / 2.0, im: 0.0 },
                ]
            })
            .collect();
        TorusRidge::new(direction, coefficients)
    }

    /// `φ(t) = cos(2πt) + cos(4πt)` along `u = e_1 + 2e_2` in `Z^dim`.
    pub fn counterexample(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("the counterexample needs dimension at least 2"));
        }
        let mut u = vec![0; dim];
        u[0] = 1;
        u[1] = 2;
        TorusRidge::cosine_sum(u, &[(1, 1.0), (2, 1.0)])
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// Real part of `Σ_m c_m e^{2πi m (u·x)}`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let t: f64 = self
            .direction
            .iter()
            .zip(x)
            .map(|(&u, &xi)| u as f64 * xi)
            .sum();
        self.coefficients
            .iter()
            .map(|c| (c.value() * Complex64::from_polar(1.0, 2.0 * PI * c.m as f64 * t)).re)
            .sum()
    }
}

/// Exact spectrum `{m·u ↦ c_m}` of a torus ridge. For `u = 0` the function is
/// constant and every coefficient lands on `k = 0`.
pub fn ridge_spectrum(ridge: &TorusRidge) -> Result<SpectralVector> {
    let dim = ridge.dim();
    let mut s = SpectralVector::new(dim);
    let degenerate = ridge.direction.iter().all(|&v| v == 0);
    for c in &ridge.coefficients {
        let k = if degenerate {
            vec![0; dim]
        } else {
            ridge
                .direction
                .iter()
                .map(|&u| u.checked_mul(c.m).ok_or(Error::Overflow))
                .collect::<Result<Vec<_>>>()?
        };
        s.add(k, c.value())?;
    }
    s.normalize();
    Ok(s)
}

/// `ε = (Σ_{k ∉ Λ} |f̂(k)|²)^{1/2}`: no function with spectrum in `Λ` comes
/// closer than `ε` to the ridge in `L²`.
pub fn lower_bound(ridge: &TorusRidge, lattice: &FrequencyLattice) -> Result<f64> {
    Ok(ridge_spectrum(ridge)?.off_lattice_energy(lattice)?.sqrt())
}

fn check_grid(dim: usize, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 points per axis, got {n}")));
    }
    if dim == 0 {
        return Err(Error::invalid("torus dimension must be positive"));
    }
    let total = (0..dim)
        .try_fold(1usize, |acc, _| acc.checked_mul(n))
        .filter(|&t| t <= MAX_GRID_POINTS)
        .ok_or_else(|| Error::invalid(format!("grid {n}^{dim} exceeds {MAX_GRID_POINTS} points")))?;
    Ok(total)
}

/// Grid point `j/N` for flat index `idx`, last axis fastest.
pub fn grid_point(idx: usize, dim: usize, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    let mut r = idx;
    for a in (0..dim).rev() {
        x[a] = (r % n) as f64 / n as f64;
        r /= n;
    }
    x
}

/// Sample `f` at every point of the `N^dim` grid.
pub fn sample_grid<F>(f: F, dim: usize, n: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let total = check_grid(dim, n)?;
    let values = par::map_range(total, |i| f(&grid_point(i, dim, n)));
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "sample {} at {:?}",
            values[i],
            grid_point(i, dim, n)
        )));
    }
    Ok(values)
}

/// Discrete estimate of `f̂(k)` from samples on the `N^dim` grid.
///
/// Coefficients are `(1/N^dim) Σ_x f(x) e^{-2πi k·x}` with `k_i` in
/// `[-N/2, N/2)`. Frequencies beyond that range alias onto it, so the estimate
/// is exact only for trigonometric polynomials with `|k_i| < N/2`.
pub fn empirical_spectrum<F>(f: F, dim: usize, n: usize) -> Result<SpectralVector>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let samples = sample_grid(f, dim, n)?;
    spectrum_from_samples(&samples, dim, n)
}

/// Spectrum of samples already laid out as by [`sample_grid`].
pub fn spectrum_from_samples(samples: &[f64], dim: usize, n: usize) -> Result<SpectralVector> {
    let total = check_grid(dim, n)?;
    if samples.len() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            actual: samples.len(),
        });
    }
    let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            par::for_each_chunk_mut(&mut data, n, |line| fft.process(line));
            continue;
        }
        // lines along `axis`: start indices with a zero digit at that axis
        let starts: Vec<usize> = (0..total / n)
            .map(|l| (l / stride) * stride * n + l % stride)
            .collect();
        let lines = par::map(&starts, |&s| {
            let mut line: Vec<Complex64> = (0..n).map(|j| data[s + j * stride]).collect();
            fft.process(&mut line);
            line
        });
        for (s, line) in starts.iter().zip(lines) {
            for (j, v) in line.into_iter().enumerate() {
                data[s + j * stride] = v;
            }
        }
    }
    let scale = 1.0 / total as f64;
    let mut out = SpectralVector {
        grid: Some(n),
        ..SpectralVector::new(dim)
    };
    for (idx, c) in data.into_iter().enumerate() {
        let mut k = vec![0i64; dim];
        let mut r = idx;
        for a in (0..dim).rev() {
            k[a] = signed_frequency(r % n, n);
            r /= n;
        }
        out.entries.insert(k, c * scale);
    }
    Ok(out)
}

fn signed_frequency(j: usize, n: usize) -> i64 {
    if 2 * j < n {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// `(mean_x (f(x) − g(x))²)^{1/2}` over the `N^dim` grid.
pub fn grid_l2_distance<F, G>(f: F, g: G, dim: usize, n: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    let total = check_grid(dim, n)?;
    let sq = sample_grid(|x| (f(x) - g(x)).powi(2), dim, n)?;
    Ok((sq.iter().sum::<f64>() / total as f64).sqrt())
}

/// Trigonometric input features for a network acting on torus points:
/// for each mode `k`, the pair `cos(2πk·x), sin(2πk·x)`, zero-padded to the
/// network width. Every feature has its spectrum at `±k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFeatures {
    pub dim: usize,
    pub modes: Vec<Vec<i64>>,
}

impl ModeFeatures {
    pub fn new(dim: usize, modes: Vec<Vec<i64>>) -> Result<Self> {
        if let Some(m) = modes.iter().find(|m| m.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: m.len(),
            });
        }
        Ok(ModeFeatures { dim, modes })
    }

    pub fn feature_count(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn max_entry(&self) -> i64 {
        self.modes.iter().flatten().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn features(&self, x: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; width];
        for (i, k) in self.modes.iter().enumerate() {
            let phase: f64 = 2.0 * PI * k.iter().zip(x).map(|(&kj, &xj)| kj as f64 * xj).sum::<f64>();
            out[2 * i] = phase.cos();
            out[2 * i + 1] = phase.sin();
        }
        out
    }
}

/// Per-layer energy report of [`verify_relu_closure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEnergy {
    /// `0` is the input features; `J + 1` is the readout.
    pub layer: usize,
    pub total_energy: f64,
    pub off_lattice_fraction: f64,
    pub unresolved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub grid: usize,
    pub required_grid: usize,
    pub layers: Vec<LayerEnergy>,
}

impl ClosureReport {
    pub fn max_off_lattice_fraction(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.off_lattice_fraction)
            .fold(0.0, f64::max)
    }

    /// `layer,fraction` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,fraction\n");
        for l in &self.layers {
            s.push_str(&format!("{},{}\n", l.layer, l.off_lattice_fraction));
        }
        s
    }
}

/// Smallest grid accepted by [`verify_relu_closure`]: four times the largest
/// generator or input-mode entry, and at least 2.
pub fn required_grid(lattice: &FrequencyLattice, modes: &ModeFeatures) -> usize {
    let top = lattice.max_generator_entry().max(modes.max_entry());
    (4 * top as usize).max(2)
}

/// Feed trigonometric inputs with frequencies `modes` through `net` on the
/// `N^dim` torus grid and report, for every layer, the fraction of spectral
/// energy that sits at resolvable frequencies outside `lattice`.
///
/// ReLU of a trigonometric polynomial has infinite spectrum, so this is a
/// necessary check on aliased data: harmonics beyond `N/2` fold back onto the
/// grid and are counted where they land.
pub fn verify_relu_closure(
    net: &PeriodicCnn,
    lattice: &FrequencyLattice,
    n: usize,
    modes: &ModeFeatures,
) -> Result<ClosureReport> {
    let dim = modes.dim;
    if lattice.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: lattice.dim(),
        });
    }
    if modes.feature_count() > net.width() {
        return Err(Error::invalid(format!(
            "{} input features do not fit in width {}",
            modes.feature_count(),
            net.width()
        )));
    }
    let required = required_grid(lattice, modes);
    if n < required {
        return Err(Error::UnderResolvedGrid { given: n, required });
    }
    let total = check_grid(dim, n)?;
    let width = net.width();
    let depth = net.depth();

    // traces[point][layer][coordinate], readout appended as an extra layer
    let traces = par::map_range(total, |i| -> Result<Vec<Vec<f64>>> {
        let x = grid_point(i, dim, n);
        let mut t = net.forward_trace(&modes.features(&x, width))?;
        let out: f64 = net
            .readout()
            .iter()
            .zip(t.last().expect("trace has input"))
            .map(|(c, h)| c * h)
            .sum();
        t.push(vec![out]);
        Ok(t)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut layers = Vec::with_capacity(depth + 2);
    for layer in 0..=depth + 1 {
        let coords = traces[0][layer].len();
        let mut part = EnergyPartition::default();
        for c in 0..coords {
            let samples: Vec<f64> = traces.iter().map(|t| t[layer][c]).collect();
            let spec = spectrum_from_samples(&samples, dim, n)?;
            part.accumulate(&spec.energy_partition(lattice)?);
        }
        layers.push(LayerEnergy {
            layer,
            total_energy: part.total,
            off_lattice_fraction: part.off_lattice_fraction(),
            unresolved_fraction: part.unresolved_fraction(),
        });
    }
    Ok(ClosureReport {
        grid: n,
        required_grid: required,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circulant::Filter;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn counterexample_spectrum() {
        let r = TorusRidge::counterexample(3).unwrap();
        let s = ridge_spectrum(&r).unwrap();
        assert_eq!(s.len(), 4);
        for k in [[1, 2, 0], [-1, -2, 0], [2, 4, 0], [-2, -4, 0]] {
            assert_eq!(s.coeff(&k), c(0.5, 0.0));
        }
        assert_eq!(s.energy(), 1.0);
        assert!(s.is_conjugate_symmetric(0.0));
    }

    #[test]
    fn constant_and_sine_profiles() {
        let one = TorusRidge::new(vec![3, 1], vec![ProfileCoefficient { m: 0, re: 1.0, im: 0.0 }]).unwrap();
        let s = ridge_spectrum(&one).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coeff(&[0, 0]), c(1.0, 0.0));

        // sin(2πt) = (e^{2πit} - e^{-2πit}) / 2i
        let sine = TorusRidge::new(
            vec![1, 0],
            vec![
                ProfileCoefficient { m: 1, re: 0.0, im: -0.5 },
                ProfileCoefficient { m: -1, re: 0.0, im: 0.5 },
            ],
        )
        .unwrap();
        let s = ridge_spectrum(&sine).unwrap();
        assert_eq!(s.coeff(&[1, 0]), c(0.0, -0.5));
        assert_eq!(s.coeff(&[-1, 0]), c(0.0, 0.5));
        assert!((sine.evaluate(&[0.25, 0.7]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_direction_collapses_to_constant() {
        let r = TorusRidge::cosine_sum(vec![0, 0, 0], &[(1, 1.0), (3, 2.0)]).unwrap();
        let s = ridge_spectrum(&r).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coeff(&[0, 0, 0]), c(3.0, 0.0));
    }

    #[test]
    fn lower_bound_examples() {
        let axis = FrequencyLattice::axes(3, &[0]).unwrap();
        assert_eq!(lower_bound(&TorusRidge::counterexample(3).unwrap(), &axis).unwrap(), 1.0);

        let inside = TorusRidge::cosine_sum(vec![2, 0, 0], &[(1, 1.0), (5, 0.3)]).unwrap();
        assert_eq!(lower_bound(&inside, &axis).unwrap(), 0.0);

        let mut v = SpectralVector::new(2);
        v.add(vec![1, 0], c(1.0, 0.0)).unwrap();
        v.add(vec![1, 2], c(1.0, 0.0)).unwrap();
        let e1 = FrequencyLattice::axes(2, &[0]).unwrap();
        assert_eq!(v.off_lattice_energy(&e1).unwrap().sqrt(), 1.0);
    }

    #[test]
    fn pure_mode_dft() {
        let s = empirical_spectrum(|x| (2.0 * PI * x[0]).cos(), 2, 16).unwrap();
        for (k, v) in s.iter() {
            let expect = if k == &vec![1, 0] || k == &vec![-1, 0] { 0.5 } else { 0.0 };
            assert!((v - c(expect, 0.0)).norm() <= 1e-12, "{k:?} {v}");
        }
    }

    #[test]
    fn empirical_matches_direct_dft() {
        let f = |x: &[f64]| (2.0 * PI * (x[0] + 2.0 * x[1] - x[2])).sin() + x[0] * x[2] - 0.3 * x[1];
        let n = 6;
        let s = empirical_spectrum(f, 3, n).unwrap();
        let total = n * n * n;
        for k in [[0, 0, 0], [1, 2, -1], [-1, 0, 2], [2, -3, 1]] {
            let direct: Complex64 = (0..total)
                .map(|i| {
                    let x = grid_point(i, 3, n);
                    let ph: f64 = k.iter().zip(&x).map(|(&kj, xj)| kj as f64 * xj).sum();
                    Complex64::from_polar(f(&x), -2.0 * PI * ph)
                })
                .sum::<Complex64>()
                / total as f64;
            assert!((s.coeff(&k) - direct).norm() < 1e-12, "{k:?}");
        }
    }

    #[test]
    fn rejects_bad_grids_and_samples() {
        assert!(empirical_spectrum(|_| 1.0, 2, 1).is_err());
        assert!(empirical_spectrum(|_| f64::NAN, 1, 4).is_err());
        assert!(empirical_spectrum(|_| 1.0, 5, 64).is_err());
    }

    #[test]
    fn nyquist_is_unresolved() {
        let s = empirical_spectrum(|x| (PI * 4.0 * x[0]).cos(), 1, 4).unwrap();
        let lat = FrequencyLattice::trivial(1);
        let p = s.energy_partition(&lat).unwrap();
        assert!((p.unresolved - 1.0).abs() < 1e-12);
        assert!(p.off_lattice < 1e-24);
    }

    #[test]
    fn under_resolved_grid_is_refused() {
        let net = PeriodicCnn::linear(2, 2, vec![Filter::delta(2).unwrap()], vec![1.0, 0.0], 1.0).unwrap();
        let lat = FrequencyLattice::axes(2, &[0]).unwrap();
        let modes = ModeFeatures::new(2, vec![vec![3, 0]]).unwrap();
        match verify_relu_closure(&net, &lat, 8, &modes) {
            Err(Error::UnderResolvedGrid { required, .. }) => assert_eq!(required, 12),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn projection_is_orthogonal() {
        let r = TorusRidge::cosine_sum(vec![1, 1], &[(1, 0.7), (2, -0.4), (3, 0.1)]).unwrap();
        let mut s = ridge_spectrum(&r).unwrap();
        s.add(vec![3, 0], c(0.2, 0.1)).unwrap();
        s.add(vec![-3, 0], c(0.2, -0.1)).unwrap();
        let lat = FrequencyLattice::from_generators(2, vec![vec![2, 2], vec![3, 0]]).unwrap();
        let (on, off) = s.project(&lat).unwrap();
        assert!((on.energy() + off.energy() - s.energy()).abs() < 1e-15);
        assert!(on.iter().all(|(k, _)| lat.member(k).unwrap()));
        assert!(off.iter().all(|(k, _)| !lat.member(k).unwrap()));
    }
}
