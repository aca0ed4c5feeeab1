//! Fractional Dirichlet forms, their generators and spectra.
//!
//! On a finite space the generator of order `s` is
//!
//! ```text
//! (Δ_s f)(x) = Σ_{y≠x} (f(x) − f(y)) w_y / d(x,y)^{d_f + 2s}
//! ```
//!
//! which is self-adjoint for the μ-weighted inner product. The symmetric
//! conjugate `S = W^{1/2} Δ_s W^{-1/2}` is handed to a dense eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::spaces::FiniteSpace;
use crate::Scalar;

/// Default cap on the matrix order handed to the eigensolver.
pub const SPECTRUM_GUARD: usize = 4096;
const EIGEN_MAX_ITER: usize = 0;
const RESIDUAL_TOL: f64 = 1e-8;

/// Dense kernel table of `Δ_s` plus the measure atoms.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    s: f64,
    n: usize,
    /// `k(x,y) = d(x,y)^{-(d_f+2s)}`, zero on the diagonal, row-major.
    kernel: Vec<f64>,
    weights: Vec<f64>,
    ultrametric: bool,
}

impl GeneratorMatrix {
    pub fn assemble(space: &FiniteSpace, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::param(format!("order s must be positive, got {s}")));
        }
        Ok(Self::with_exponent(space, space.d_f() + 2.0 * s, s))
    }

    /// Kernel `d^{-exponent}` without a regime check; `s` is recorded as given.
    pub(crate) fn with_exponent(space: &FiniteSpace, exponent: f64, s: f64) -> Self {
        let n = space.len();
        let mut kernel = vec![0.0; n * n];
        for x in 0..n {
            for y in (x + 1)..n {
                let k = space.dist(x, y).powf(-exponent);
                kernel[x * n + y] = k;
                kernel[y * n + x] = k;
            }
        }
        GeneratorMatrix { s, n, kernel, weights: space.weights().to_vec(), ultrametric: space.is_ultrametric() }
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn kernel(&self, x: usize, y: usize) -> f64 {
        self.kernel[x * self.n + y]
    }

    pub fn kernel_table(&self) -> &[f64] {
        &self.kernel
    }

    /// `Δ_s f`.
    pub fn apply<T: Scalar>(&self, f: &[T]) -> Result<Vec<T>> {
        check_len(self.n, f.len())?;
        Ok((0..self.n).map(|x| self.apply_at(f, x)).collect())
    }

    pub(crate) fn apply_at<T: Scalar>(&self, f: &[T], x: usize) -> T {
        let row = &self.kernel[x * self.n..(x + 1) * self.n];
        let mut acc = T::zero();
        for y in 0..self.n {
            if y != x {
                acc += (f[x] - f[y]) * T::from_real(self.weights[y] * row[y]);
            }
        }
        acc
    }

    /// `E_s(f,g) = ½ ΣΣ conj(f(x)−f(y)) (g(x)−g(y)) w_x w_y k(x,y)`.
    pub fn energy<T: Scalar>(&self, f: &[T], g: &[T]) -> Result<T> {
        check_len(self.n, f.len())?;
        check_len(self.n, g.len())?;
        let mut acc = T::zero();
        for x in 0..self.n {
            for y in (x + 1)..self.n {
                let c = self.weights[x] * self.weights[y] * self.kernel(x, y);
                acc += (f[x] - f[y]).conjugate() * (g[x] - g[y]) * T::from_real(c);
            }
        }
        Ok(acc)
    }

    // Sum of nonnegative terms; free of the cancellation in hᵀBh.
    fn energy_diag(&self, h: &[f64]) -> f64 {
        let mut acc = 0.0;
        for x in 0..self.n {
            let row = &self.kernel[x * self.n..(x + 1) * self.n];
            let mut inner = 0.0;
            for y in (x + 1)..self.n {
                let d = h[x] - h[y];
                inner += d * d * self.weights[y] * row[y];
            }
            acc += self.weights[x] * inner;
        }
        acc
    }

    /// Symmetric matrix `S = W^{1/2} Δ_s W^{-1/2}`.
    pub fn symmetric_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let sq: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        DMatrix::from_fn(n, n, |x, y| {
            if x == y {
                (0..n).filter(|&z| z != x).map(|z| self.weights[z] * self.kernel(x, z)).sum()
            } else {
                -sq[x] * sq[y] * self.kernel(x, y)
            }
        })
    }

    /// Energy matrix `B = W Δ_s`, so that `E_s(f,g) = f^* B g`.
    pub fn energy_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |x, y| {
            if x == y {
                self.weights[x] * (0..n).filter(|&z| z != x).map(|z| self.weights[z] * self.kernel(x, z)).sum::<f64>()
            } else {
                -self.weights[x] * self.weights[y] * self.kernel(x, y)
            }
        })
    }

    /// Full eigendecomposition with the default size guard.
    pub fn spectrum(&self) -> Result<SpectralData> {
        self.spectrum_with_guard(SPECTRUM_GUARD)
    }

    pub fn spectrum_with_guard(&self, guard: usize) -> Result<SpectralData> {
        let n = self.n;
        if n > guard {
            return Err(Error::param(format!("matrix order {n} exceeds the eigensolver guard {guard}")));
        }
        let s = self.symmetric_matrix();
        let eig = SymmetricEigen::try_new(s, f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| Error::NonConvergence {
            what: "symmetric eigensolver".into(),
            residual: f64::NAN,
        })?;
        let inv_sqrt: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
            .map(|j| {
                let mut h: Vec<f64> = (0..n).map(|x| eig.eigenvectors[(x, j)] * inv_sqrt[x]).collect();
                fix_sign(&mut h);
                let lambda = self.energy_diag(&h) / weighted_norm2(&self.weights, &h);
                (lambda, h)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let vectors = DMatrix::from_fn(n, n, |x, j| pairs[j].1[x]);
        let residual = self.max_residual(&eigenvalues, &vectors);
        if residual > RESIDUAL_TOL {
            return Err(Error::NonConvergence { what: "eigenpair residual".into(), residual });
        }
        Ok(SpectralData {
            eigenvalues,
            basis: Eigenbasis::Real(vectors),
            residual,
            source: SpectralSource::Numeric,
            ultrametric: self.ultrametric,
            weights: self.weights.clone(),
        })
    }

    /// `max_n ‖Δh_n − λ_n h_n‖_μ / max(1, λ_n)`.
    fn max_residual(&self, eigenvalues: &[f64], vectors: &DMatrix<f64>) -> f64 {
        let n = self.n;
        let k = DMatrix::from_row_slice(n, n, &self.kernel);
        let wh = DMatrix::from_fn(n, n, |x, j| self.weights[x] * vectors[(x, j)]);
        let kwh = &k * wh;
        let deg: Vec<f64> = (0..n).map(|x| (0..n).map(|y| self.weights[y] * self.kernel(x, y)).sum()).collect();
        (0..n)
            .map(|j| {
                let r2: f64 = (0..n)
                    .map(|x| {
                        let r = deg[x] * vectors[(x, j)] - kwh[(x, j)] - eigenvalues[j] * vectors[(x, j)];
                        self.weights[x] * r * r
                    })
                    .sum();
                r2.sqrt() / eigenvalues[j].abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Complexified energy `E_s(f,g)` on `space`.
pub fn dirichlet_energy<T: Scalar>(space: &FiniteSpace, s: f64, f: &[T], g: &[T]) -> Result<T> {
    GeneratorMatrix::assemble(space, s)?.energy(f, g)
}

/// Single-point principal-value sum `(Δ_s f)(x)`.
pub fn pv_apply<T: Scalar>(space: &FiniteSpace, s: f64, f: &[T], point: &str) -> Result<T> {
    if !(s > 0.0) {
        return Err(Error::param(format!("order s must be positive, got {s}")));
    }
    let x = space.point_index(point)?;
    space.check_len(f.len())?;
    let e = space.d_f() + 2.0 * s;
    let w = space.weights();
    Ok((0..space.len())
        .filter(|&y| y != x)
        .fold(T::zero(), |acc, y| acc + (f[x] - f[y]) * T::from_real(w[y] * space.dist(x, y).powf(-e))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralSource {
    Numeric,
    CantorExact,
}

/// Eigenfunctions as columns, μ-orthonormal.
#[derive(Clone, Debug)]
pub enum Eigenbasis {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub basis: Eigenbasis,
    pub residual: f64,
    pub source: SpectralSource,
    pub ultrametric: bool,
    pub weights: Vec<f64>,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenfunction `j` as complex values.
    pub fn eigenfunction(&self, j: usize) -> Vec<Complex64> {
        match &self.basis {
            Eigenbasis::Real(m) => m.column(j).iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            Eigenbasis::Complex(m) => m.column(j).iter().copied().collect(),
        }
    }

    /// `⟨f, h_j⟩_μ = Σ w_x conj(h_j(x)) f(x)` for every `j`.
    pub fn coefficients(&self, f: &[Complex64]) -> Vec<Complex64> {
        (0..self.len())
            .map(|j| {
                self.eigenfunction(j)
                    .iter()
                    .zip(f)
                    .zip(&self.weights)
                    .map(|((h, v), &w)| h.conj() * v * w)
                    .sum()
            })
            .collect()
    }

    /// `max |⟨h_i,h_j⟩_μ − δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.len();
        let cols: Vec<Vec<Complex64>> = (0..n).map(|j| self.eigenfunction(j)).collect();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let ip: Complex64 = cols[i].iter().zip(&cols[j]).zip(&self.weights).map(|((a, b), &w)| a.conj() * b * w).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }

    /// Default Weyl window: the middle half on ultrametric spaces, the
    /// lower three quarters elsewhere.
    pub fn default_weyl_window(&self) -> (f64, f64) {
        if self.ultrametric || self.source == SpectralSource::CantorExact {
            (0.25, 0.75)
        } else {
            (0.0, 0.75)
        }
    }

    /// Fit on the nonzero eigenvalues `λ_1, λ_2, …`.
    pub fn weyl_fit(&self, window: Option<(f64, f64)>) -> Result<WeylFit> {
        weyl_fit(&self.eigenvalues[1..], window.unwrap_or_else(|| self.default_weyl_window()))
    }

    pub fn kernel_check(&self) -> KernelReport {
        let l0 = self.eigenvalues[0];
        let l1 = self.eigenvalues.get(1).copied().unwrap_or(f64::NAN);
        let h0 = self.eigenfunction(0);
        let mean = h0.iter().sum::<Complex64>() / h0.len() as f64;
        let variation = h0.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max) / mean.norm().max(f64::MIN_POSITIVE);
        KernelReport {
            lambda0: l0,
            lambda1: l1,
            constant_variation: variation,
            pass: l0.abs() <= 1e-10 * l1 && l1 > 0.0 && variation <= 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelReport {
    pub lambda0: f64,
    pub lambda1: f64,
    pub constant_variation: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeylFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares fit of `ln λ_n` on `ln n` for `λ_1, λ_2, …` (given in
/// order) over the indices `n` with `a·m < n ≤ b·m`, `m = values.len()`.
pub fn weyl_fit(values: &[f64], window: (f64, f64)) -> Result<WeylFit> {
    let m = values.len();
    if m < 16 {
        return Err(Error::param(format!("Weyl fit needs at least 16 nonzero eigenvalues, got {m}")));
    }
    let (a, b) = window;
    if !(0.0..1.0).contains(&a) || !(b > a && b <= 1.0) {
        return Err(Error::param(format!("bad Weyl window ({a}, {b})")));
    }
    let lo = (a * m as f64).floor() as usize + 1;
    let hi = ((b * m as f64).floor() as usize).max(lo);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=hi)
        .filter(|&n| values[n - 1] > 0.0)
        .map(|n| ((n as f64).ln(), values[n - 1].ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::param("Weyl window selects fewer than two eigenvalues"));
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(WeylFit { slope, intercept, r2, points: xs.len() })
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns `(slope, intercept, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Closed-form eigenvalue of the level-`level` Haar wavelets of `cantor(N, λ, ·)`
/// for a unit-mass space.
pub fn cantor_eigenvalue(branching: usize, lambda: f64, s: f64, level: usize) -> f64 {
    let n = branching as f64;
    let q = lambda.powf(2.0 * s);
    let top = q.powi(level as i32);
    top + (n - 1.0) / (n * (q - 1.0)) * (top - 1.0)
}

/// The exact spectrum of `Δ_s` on `cantor(N, λ, L)`, with the Haar wavelets
/// as eigenfunctions.
pub fn cantor_exact_spectrum(branching: usize, lambda: f64, s: f64, depth: usize) -> Result<SpectralData> {
    let space = FiniteSpace::cantor(branching, lambda, depth)?;
    cantor_exact_for(&space, s)
}

/// Exact spectrum for a Cantor space, honouring its total mass.
pub fn cantor_exact_for(space: &FiniteSpace, s: f64) -> Result<SpectralData> {
    if !(s > 0.0) {
        return Err(Error::param(format!("order s must be positive, got {s}")));
    }
    let (branching, lambda, _) = space
        .cantor_params()
        .ok_or_else(|| Error::Unsupported("exact spectrum exists only for cantor spaces".into()))?;
    let system = DyadicSystem::build(space)?;
    let basis = system.haar_basis();
    let n = space.len();
    let mass = space.total_mass();
    let mut cols: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(n);
    cols.push((0.0, vec![Complex64::new(1.0 / mass.sqrt(), 0.0); n]));
    for w in &basis.wavelets {
        let level = system.cube(w.cube).level;
        cols.push((mass * cantor_eigenvalue(branching, lambda, s, level), system.wavelet_vector(w)));
    }
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SpectralData {
        eigenvalues: cols.iter().map(|c| c.0).collect(),
        basis: Eigenbasis::Complex(DMatrix::from_fn(n, n, |x, j| cols[j].1[x])),
        residual: 0.0,
        source: SpectralSource::CantorExact,
        ultrametric: true,
        weights: space.weights().to_vec(),
    })
}

fn fix_sign(h: &mut [f64]) {
    let peak = h.iter().map(|v| v.abs()).fold(0.0, f64::max);
    // First entry within rounding of the peak decides, for reproducibility.
    if let Some(&v) = h.iter().find(|v| v.abs() >= peak * (1.0 - 1e-9)) {
        if v < 0.0 {
            h.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn weighted_norm2(w: &[f64], h: &[f64]) -> f64 {
    w.iter().zip(h).map(|(w, v)| w * v * v).sum()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::WalkDimension;
    use approx::assert_relative_eq;

    fn two_point() -> FiniteSpace {
        FiniteSpace::custom(vec!["a".into(), "b".into()], vec![0.5, 0.5], vec![0.0, 1.0, 1.0, 0.0], 0.7, WalkDimension::Infinite)
            .unwrap()
    }

    #[test]
    fn two_point_generator() {
        let g = GeneratorMatrix::assemble(&two_point(), 0.3).unwrap();
        let out = g.apply(&[3.0, 1.0]).unwrap();
        assert_relative_eq!(out[0], 1.0);
        let spec = g.spectrum().unwrap();
        assert_relative_eq!(spec.eigenvalues[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(spec.eigenvalues[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g.energy(&[1.0, -1.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert_relative_eq!(pv_apply(&two_point(), 0.3, &[1.0, 0.0], "a").unwrap(), 0.5);
        assert!(pv_apply(&two_point(), 0.3, &[1.0, 0.0], "c").is_err());
        assert!(GeneratorMatrix::assemble(&two_point(), 0.0).is_err());
    }

    #[test]
    fn top_wavelet_is_eigenfunction() {
        let s = FiniteSpace::cantor(2, 2.0, 3).unwrap();
        let g = GeneratorMatrix::assemble(&s, 0.75).unwrap();
        let h: Vec<f64> = (0..8).map(|x| if x < 4 { 1.0 } else { -1.0 }).collect();
        let out = g.apply(&h).unwrap();
        for (a, b) in out.iter().zip(&h) {
            assert_relative_eq!(*a, *b, max_relative = 1e-13);
        }
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(cantor_eigenvalue(2, 2.0, 0.4, 0), 1.0);
        assert_relative_eq!(cantor_eigenvalue(2, 2.0, 0.75, 1), 3.328_427_124_746_19, max_relative = 1e-14);
        let spec = cantor_exact_spectrum(3, 2.0, 0.5, 3).unwrap();
        let l2 = cantor_eigenvalue(3, 2.0, 0.5, 2);
        let mult = spec.eigenvalues.iter().filter(|&&v| (v - l2).abs() < 1e-12 * l2).count();
        assert_eq!(mult, 9 * 2);
        assert_eq!(spec.len(), 27);
        assert!(spec.orthonormality_error() < 1e-12);
    }

    #[test]
    fn shift_off_constants() {
        let space = FiniteSpace::circle(9).unwrap();
        let g = GeneratorMatrix::assemble(&space, 0.4).unwrap();
        let base = g.spectrum().unwrap();
        let c = 2.5;
        let sq: Vec<f64> = space.weights().iter().map(|w| w.sqrt()).collect();
        let p = DMatrix::from_fn(9, 9, |i, j| sq[i] * sq[j]);
        let shifted = g.symmetric_matrix() + (DMatrix::identity(9, 9) - p) * c;
        let mut ev: Vec<f64> = shifted.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-10);
        for (a, b) in ev.iter().zip(&base.eigenvalues).skip(1) {
            assert_relative_eq!(*a, b + c, max_relative = 1e-10);
        }
    }

    #[test]
    fn exact_power_law_fit() {
        let vals: Vec<f64> = (1..=64).map(|n| (n as f64).powf(0.7)).collect();
        let fit = weyl_fit(&vals, (0.25, 0.75)).unwrap();
        assert_relative_eq!(fit.slope, 0.7, epsilon = 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-10);
        assert!(weyl_fit(&vals[..10], (0.25, 0.75)).is_err());
    }

    #[test]
    fn kernel_report_two_point() {
        let spec = GeneratorMatrix::assemble(&two_point(), 0.5).unwrap().spectrum().unwrap();
        let k = spec.kernel_check();
        assert!(k.pass);
        assert_relative_eq!(k.lambda1 - k.lambda0, 1.0, epsilon = 1e-14);
    }
}
