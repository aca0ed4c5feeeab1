//! Commutator kernels `K_{α,h}` and their Schatten norms.
//!
//! `K(x,y) = (h(x) − h(y)) / d(x,y)^{d_f+2α}` acts on `L²(X,μ)` by
//! `(Kf)(x) = Σ_y K(x,y) f(y) w_y`. Singular values are those of the
//! unitarily equivalent matrix `W^{1/2} K W^{1/2}`.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::Serialize;

use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::laplacian::{linear_fit, GeneratorMatrix};
use crate::rng;
use crate::spaces::{FiniteSpace, SpaceKind};
use crate::Scalar;

const SVD_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct CommutatorOp<T: Scalar> {
    alpha: f64,
    n: usize,
    kernel: Vec<T>,
    weights: Vec<f64>,
    singular: Vec<f64>,
}

impl<T: Scalar> CommutatorOp<T> {
    pub fn new(space: &FiniteSpace, alpha: f64, h: &[T]) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::param(format!("α must be positive, got {alpha}")));
        }
        Self::truncated_kernel(space, alpha, h, 0.0)
    }

    fn truncated_kernel(space: &FiniteSpace, alpha: f64, h: &[T], r: f64) -> Result<Self> {
        space.check_len(h.len())?;
        let n = space.len();
        let e = space.d_f() + 2.0 * alpha;
        let cut = r * (1.0 - 1e-12);
        let mut kernel = vec![T::zero(); n * n];
        for x in 0..n {
            for y in (x + 1)..n {
                let d = space.dist(x, y);
                if d < cut {
                    continue;
                }
                let k = (h[x] - h[y]) * T::from_real(d.powf(-e));
                kernel[x * n + y] = k;
                kernel[y * n + x] = -k;
            }
        }
        let mut op = CommutatorOp { alpha, n, kernel, weights: space.weights().to_vec(), singular: Vec::new() };
        op.singular = op.compute_singular_values()?;
        Ok(op)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
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
    pub fn kernel(&self, x: usize, y: usize) -> T {
        self.kernel[x * self.n + y]
    }

    pub fn kernel_table(&self) -> &[T] {
        &self.kernel
    }

    /// Descending singular values.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    /// `(Kf)(x) = Σ_y K(x,y) f(y) w_y`.
    pub fn apply(&self, f: &[T]) -> Result<Vec<T>> {
        if f.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: f.len() });
        }
        Ok((0..self.n)
            .map(|x| (0..self.n).fold(T::zero(), |acc, y| acc + self.kernel(x, y) * f[y] * T::from_real(self.weights[y])))
            .collect())
    }

    /// `W^{1/2} K W^{1/2}`.
    pub fn symmetrized(&self) -> DMatrix<T> {
        let sq: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        DMatrix::from_fn(self.n, self.n, |x, y| self.kernel(x, y) * T::from_real(sq[x] * sq[y]))
    }

    /// Full SVD `(U, σ, V^*)` of the symmetrized matrix, σ descending.
    pub fn svd_factors(&self) -> Result<(DMatrix<T>, Vec<f64>, DMatrix<T>)> {
        let m = self.symmetrized();
        let svd = m.clone().try_svd(true, true, f64::EPSILON, 0).ok_or_else(|| Error::NonConvergence {
            what: "singular value decomposition".into(),
            residual: f64::NAN,
        })?;
        let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^*"));
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sigma: Vec<f64> = order.iter().map(|&j| svd.singular_values[j]).collect();
        let u = DMatrix::from_fn(self.n, self.n, |i, j| u[(i, order[j])]);
        let v_t = DMatrix::from_fn(self.n, self.n, |i, j| v_t[(order[i], j)]);
        let recon = &u * DMatrix::from_fn(self.n, self.n, |i, j| if i == j { T::from_real(sigma[i]) } else { T::zero() }) * &v_t;
        let residual = (recon - &m).iter().map(|z| z.modulus()).fold(0.0, f64::max) / sigma.first().copied().unwrap_or(0.0).max(1.0);
        if residual > SVD_RESIDUAL_TOL {
            return Err(Error::NonConvergence { what: "SVD reconstruction".into(), residual });
        }
        Ok((u, sigma, v_t))
    }

    fn compute_singular_values(&self) -> Result<Vec<f64>> {
        let m = self.symmetrized();
        let mut sv: Vec<f64> = m
            .try_svd(false, false, f64::EPSILON, 0)
            .ok_or_else(|| Error::NonConvergence { what: "singular values".into(), residual: f64::NAN })?
            .singular_values
            .iter()
            .copied()
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        Ok(sv)
    }

    /// `‖K‖_{S_p}`; `p = ∞` gives the operator norm.
    pub fn schatten_norm(&self, p: f64) -> Result<f64> {
        schatten_of(&self.singular, p)
    }

    /// `(ΣΣ |K(x,y)|² w_x w_y)^{1/2}`.
    pub fn raw_hs_norm(&self) -> f64 {
        let mut acc = 0.0;
        for x in 0..self.n {
            for y in 0..self.n {
                acc += self.kernel(x, y).modulus_squared() * self.weights[x] * self.weights[y];
            }
        }
        acc.sqrt()
    }

    /// `(Σ_y w_y (Σ_x w_x |K(x,y)|^q)^{p/q})^{1/p}` with `q = p/(p−1)`.
    pub fn gof_bound(&self, p: f64) -> Result<f64> {
        if !(p >= 2.0) {
            return Err(Error::param(format!("mixed-norm bound needs p ≥ 2, got {p}")));
        }
        if p.is_infinite() {
            return Ok((0..self.n)
                .map(|y| (0..self.n).map(|x| self.weights[x] * self.kernel(x, y).modulus()).sum::<f64>())
                .fold(0.0, f64::max));
        }
        let q = p / (p - 1.0);
        let total: f64 = (0..self.n)
            .map(|y| {
                let inner: f64 = (0..self.n).map(|x| self.weights[x] * self.kernel(x, y).modulus().powf(q)).sum();
                self.weights[y] * inner.powf(p / q)
            })
            .sum();
        Ok(total.powf(1.0 / p))
    }

    pub fn report(&self, p: f64) -> Result<SchattenReport> {
        Ok(SchattenReport {
            p,
            norm: self.schatten_norm(p)?,
            operator_norm: self.singular.first().copied().unwrap_or(0.0),
            raw_hs: self.raw_hs_norm(),
            gof_bound: if p >= 2.0 { Some(self.gof_bound(p)?) } else { None },
            singular_values: self.singular.clone(),
        })
    }
}

/// ℓ^p norm of a singular value list.
pub fn schatten_of(sv: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param(format!("Schatten exponent must be ≥ 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(sv.iter().copied().fold(0.0, f64::max));
    }
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0.0);
    }
    Ok(top * sv.iter().map(|s| (s / top).powf(p)).sum::<f64>().powf(1.0 / p))
}

#[derive(Clone, Debug, Serialize)]
pub struct SchattenReport {
    pub p: f64,
    pub norm: f64,
    pub operator_norm: f64,
    pub raw_hs: f64,
    pub gof_bound: Option<f64>,
    pub singular_values: Vec<f64>,
}

/// The summability exponent `p(α,β) = ℓ d_f / (β − 2α)`.
pub fn p_threshold(alpha: f64, beta: f64, d_f: f64) -> Result<f64> {
    if !(alpha > 0.0 && 2.0 * alpha < beta && beta <= 1.0) {
        return Err(Error::regime(format!("need 0 < 2α < β ≤ 1, got α = {alpha}, β = {beta}")));
    }
    if !(d_f > 0.0) {
        return Err(Error::param(format!("d_f must be positive, got {d_f}")));
    }
    let base = d_f / (beta - 2.0 * alpha);
    let ell = if base >= 2.0 { 1.0 } else { (d_f / beta).ceil() + 1.0 };
    Ok(ell * base)
}

/// `β(α) = d_f/2 + 2α`.
pub fn beta_of_alpha(d_f: f64, alpha: f64) -> f64 {
    d_f / 2.0 + 2.0 * alpha
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergySeminorm {
    /// `E_{β(α)}(h,h)^{1/2}`.
    pub energy_norm: f64,
    /// `(ΣΣ |K|² w w)^{1/2}`.
    pub raw_hs: f64,
    pub ratio: f64,
}

pub fn l2_energy_seminorm<T: Scalar>(space: &FiniteSpace, alpha: f64, h: &[T]) -> Result<EnergySeminorm> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("α must be positive, got {alpha}")));
    }
    let energy = energy_beta(space, alpha, h)?;
    let op = raw_kernel_hs(space, alpha, h)?;
    let energy_norm = energy.max(0.0).sqrt();
    Ok(EnergySeminorm { energy_norm, raw_hs: op, ratio: op / energy_norm })
}

/// `E_{β(α)}(h,h)`, permitted for any `β(α) > 0`.
pub(crate) fn energy_beta<T: Scalar>(space: &FiniteSpace, alpha: f64, h: &[T]) -> Result<f64> {
    let beta = beta_of_alpha(space.d_f(), alpha);
    GeneratorMatrix::assemble(space, beta)?.energy(h, h).map(|e| e.real())
}

fn raw_kernel_hs<T: Scalar>(space: &FiniteSpace, alpha: f64, h: &[T]) -> Result<f64> {
    space.check_len(h.len())?;
    let e = 2.0 * (space.d_f() + 2.0 * alpha);
    let w = space.weights();
    let mut acc = 0.0;
    for x in 0..space.len() {
        for y in 0..space.len() {
            if x != y {
                acc += (h[x] - h[y]).modulus_squared() * w[x] * w[y] * space.dist(x, y).powf(-e);
            }
        }
    }
    Ok(acc.sqrt())
}

/// The kernel zeroed on pairs closer than `r`, with `‖K − K_r‖_{op}`.
pub fn truncated_commutator<T: Scalar>(
    space: &FiniteSpace,
    alpha: f64,
    h: &[T],
    r: f64,
) -> Result<(CommutatorOp<T>, f64)> {
    if !(r > 0.0 && r <= space.diam() * (1.0 + 1e-12)) {
        return Err(Error::param(format!("truncation radius {r} outside (0, diam = {}]", space.diam())));
    }
    let full = CommutatorOp::new(space, alpha, h)?;
    let cut = CommutatorOp::truncated_kernel(space, alpha, h, r)?;
    let diff = CommutatorOp {
        alpha,
        n: full.n,
        kernel: full.kernel.iter().zip(&cut.kernel).map(|(a, b)| *a - *b).collect(),
        weights: full.weights.clone(),
        singular: Vec::new(),
    };
    let dist = diff.compute_singular_values()?.first().copied().unwrap_or(0.0);
    Ok((cut, dist))
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationFit {
    pub radii: Vec<f64>,
    pub distances: Vec<f64>,
    pub slope: f64,
    pub r2: f64,
}

/// Fit `ln ‖K − K_r‖` against `ln r`; radii with zero distance are dropped.
pub fn truncation_fit<T: Scalar>(space: &FiniteSpace, alpha: f64, h: &[T], radii: &[f64]) -> Result<TruncationFit> {
    let mut kept_r = Vec::new();
    let mut kept_d = Vec::new();
    let mut all_d = Vec::new();
    for &r in radii {
        let (_, d) = truncated_commutator(space, alpha, h, r)?;
        all_d.push(d);
        if d > 1e-14 {
            kept_r.push(r);
            kept_d.push(d);
        }
    }
    if kept_r.len() < 2 {
        return Err(Error::param("truncation fit needs two radii with nonzero error"));
    }
    let xs: Vec<f64> = kept_r.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = kept_d.iter().map(|d| d.ln()).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok(TruncationFit { radii: radii.to_vec(), distances: all_d, slope, r2 })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HolderBound {
    pub hol_2alpha: f64,
    pub schatten: f64,
    pub hol_beta: f64,
    /// `‖K‖_{S_p} / Höl_{2α}(h)`.
    pub lower_ratio: f64,
    /// `‖K‖_{S_p} / Höl_β(h)`.
    pub upper_ratio: f64,
}

pub fn holder_bound_report<T: Scalar>(
    space: &FiniteSpace,
    alpha: f64,
    beta: f64,
    p: f64,
    h: &[T],
) -> Result<HolderBound> {
    let threshold = p_threshold(alpha, beta, space.d_f())?;
    if !(p > threshold.max(1.0)) {
        return Err(Error::regime(format!("p = {p} must exceed p(α,β) = {threshold}")));
    }
    let hol_2alpha = space.holder_seminorm(h, 2.0 * alpha)?;
    let hol_beta = space.holder_seminorm(h, beta)?;
    let schatten = CommutatorOp::new(space, alpha, h)?.schatten_norm(p)?;
    Ok(HolderBound {
        hol_2alpha,
        schatten,
        hol_beta,
        lower_ratio: schatten / hol_2alpha,
        upper_ratio: schatten / hol_beta,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioBracket {
    pub lower_min: f64,
    pub lower_max: f64,
    pub upper_min: f64,
    pub upper_max: f64,
    pub count: usize,
}

/// Min/max of both ratios over a batch of non-constant symbols.
pub fn holder_bracket(space: &FiniteSpace, alpha: f64, beta: f64, p: f64, symbols: &[Vec<f64>]) -> Result<RatioBracket> {
    let mut b = RatioBracket {
        lower_min: f64::INFINITY,
        lower_max: 0.0,
        upper_min: f64::INFINITY,
        upper_max: 0.0,
        count: 0,
    };
    for h in symbols {
        let r = holder_bound_report(space, alpha, beta, p, h)?;
        if r.hol_beta == 0.0 {
            continue;
        }
        b.lower_min = b.lower_min.min(r.lower_ratio);
        b.lower_max = b.lower_max.max(r.lower_ratio);
        b.upper_min = b.upper_min.min(r.upper_ratio);
        b.upper_max = b.upper_max.max(r.upper_ratio);
        b.count += 1;
    }
    Ok(b)
}

/// Seeded batch of real symbols: half random combinations of the Haar
/// wavelets on the top three levels, half coordinate-threshold indicators.
pub fn random_symbols(space: &FiniteSpace, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::seeded(seed);
    let n = space.len();
    let system = DyadicSystem::build(space).ok();
    let low: Vec<Vec<f64>> = match &system {
        Some(sys) => {
            let basis = sys.haar_basis();
            basis
                .wavelets
                .iter()
                .filter(|w| sys.cube(w.cube).level < 3)
                .flat_map(|w| {
                    let v = sys.wavelet_vector(w);
                    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
                    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
                    [re, im]
                })
                .filter(|v| v.iter().any(|x| x.abs() > 1e-12))
                .collect()
        }
        None => Vec::new(),
    };
    (0..count)
        .map(|i| {
            if i % 2 == 0 && !low.is_empty() {
                let mut h = vec![0.0; n];
                for v in &low {
                    let c: f64 = r.random_range(-1.0..1.0);
                    h.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
                }
                h
            } else {
                threshold_symbol(space, &mut r)
            }
        })
        .collect()
}

fn threshold_symbol(space: &FiniteSpace, r: &mut rng::Rng) -> Vec<f64> {
    let n = space.len();
    match space.kind() {
        SpaceKind::Cantor => {
            let (branching, _, depth) = space.cantor_params().expect("cantor");
            let k = r.random_range(0..depth.min(3));
            let t = r.random_range(2..=branching) as u8;
            let scale: f64 = r.random_range(0.5..2.0);
            (0..n).map(|x| if space.word(x).expect("cantor")[k] >= t { scale } else { 0.0 }).collect()
        }
        _ => {
            let a = r.random_range(0..n);
            let len = r.random_range(1..n);
            let scale: f64 = r.random_range(0.5..2.0);
            (0..n).map(|x| if (x + n - a) % n < len { scale } else { 0.0 }).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::WalkDimension;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn two_point() -> FiniteSpace {
        FiniteSpace::custom(vec!["a".into(), "b".into()], vec![0.5, 0.5], vec![0.0, 1.0, 1.0, 0.0], 1.0, WalkDimension::Infinite)
            .unwrap()
    }

    #[test]
    fn two_point_norms() {
        let op = CommutatorOp::new(&two_point(), 0.3, &[1.0, -1.0]).unwrap();
        assert_relative_eq!(op.raw_hs_norm(), 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(op.schatten_norm(2.0).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        let e = l2_energy_seminorm(&two_point(), 0.3, &[1.0, -1.0]).unwrap();
        assert_relative_eq!(e.energy_norm, 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.ratio, 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(op.gof_bound(2.0).unwrap(), op.raw_hs_norm(), epsilon = 1e-14);
        assert!(op.schatten_norm(0.5).is_err());
        assert!(op.gof_bound(1.5).is_err());
    }

    #[test]
    fn constant_symbol_vanishes() {
        let s = FiniteSpace::cantor(2, 2.0, 3).unwrap();
        let op = CommutatorOp::new(&s, 0.2, &[3.0; 8]).unwrap();
        assert!(op.singular_values().iter().all(|&v| v == 0.0));
        assert_eq!(op.gof_bound(3.0).unwrap(), 0.0);
    }

    #[test]
    fn thresholds() {
        assert_relative_eq!(p_threshold(0.25, 1.0, 1.0).unwrap(), 2.0);
        assert_relative_eq!(p_threshold(0.4, 1.0, 1.0).unwrap(), 5.0, epsilon = 1e-12);
        assert_relative_eq!(p_threshold(0.05, 1.0, 0.5).unwrap(), 1.0 / 0.9, epsilon = 1e-12);
        assert!(p_threshold(0.5, 1.0, 1.0).is_err());
        assert!(p_threshold(0.1, 1.2, 1.0).is_err());
    }

    #[test]
    fn k_one_is_generator() {
        let s = FiniteSpace::circle(11).unwrap();
        let h: Vec<f64> = (0..11).map(|i| ((i * i) % 7) as f64).collect();
        let op = CommutatorOp::new(&s, 0.3, &h).unwrap();
        let k1 = op.apply(&[1.0; 11]).unwrap();
        let dh = GeneratorMatrix::assemble(&s, 0.3).unwrap().apply(&h).unwrap();
        for (a, b) in k1.iter().zip(&dh) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn complex_symbol_star_invariance() {
        let s = FiniteSpace::cantor(3, 2.0, 2).unwrap();
        let h: Vec<Complex64> = (0..9).map(|i| Complex64::new(i as f64, (i % 4) as f64)).collect();
        let hb: Vec<Complex64> = h.iter().map(|z| z.conj()).collect();
        let a = CommutatorOp::new(&s, 0.2, &h).unwrap();
        let b = CommutatorOp::new(&s, 0.2, &hb).unwrap();
        for (x, y) in a.singular_values().iter().zip(b.singular_values()) {
            assert!((x - y).abs() < 1e-10 * x.max(1.0));
        }
        let (u, sigma, vt) = a.svd_factors().unwrap();
        assert_eq!(u.nrows(), 9);
        assert_eq!(vt.ncols(), 9);
        assert_relative_eq!(sigma[0], a.singular_values()[0], max_relative = 1e-12);
    }

    #[test]
    fn truncation_extremes() {
        let s = FiniteSpace::cantor(2, 2.0, 4).unwrap();
        let h: Vec<f64> = (0..16).map(|i| (i as f64).sqrt()).collect();
        let (_, d) = truncated_commutator(&s, 0.1, &h, 0.125).unwrap();
        assert_eq!(d, 0.0);
        let (k1, _) = truncated_commutator(&s, 0.1, &h, 1.0).unwrap();
        for x in 0..16 {
            for y in 0..16 {
                if s.dist(x, y) < 1.0 {
                    assert_eq!(k1.kernel(x, y), 0.0);
                }
            }
        }
        assert!(truncated_commutator(&s, 0.1, &h, 2.0).is_err());
    }
}
