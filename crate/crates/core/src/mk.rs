//! Monge–Kantorovich distances between states.
//!
//! For the order `β(α) = d_f/2 + 2α` generator with eigenpairs `(λ_n, h_n)`,
//!
//! ```text
//! ρ(φ,ψ)² = Σ_{n≥1} λ_n^{-1} |Σ_x (φ_x − ψ_x) h_n(x)|²
//! ```
//!
//! which is also `cᵀ B⁺ c` for `c = φ − ψ` and the energy matrix `B`. Three
//! independent paths compute it: the spectral sum, a grounded Cholesky solve,
//! and a constrained ascent that also handles Schatten-`p` constraints.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::commutator::{beta_of_alpha, CommutatorOp};
use crate::error::{Error, Result};
use crate::laplacian::{cantor_exact_for, GeneratorMatrix, SpectralData};
use crate::spaces::{FiniteSpace, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MkMethod {
    Closed,
    Linsolve,
    SupOracle,
}

#[derive(Clone, Debug, Serialize)]
pub struct MkResult {
    pub distance: f64,
    pub method: MkMethod,
    /// `λ_n^{-1} |c·h_n|²` per mode (closed method).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<Vec<f64>>,
    /// Objective value after each accepted step (sup method).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_level: Option<usize>,
}

impl MkResult {
    fn exact(distance: f64, method: MkMethod, breakdown: Option<Vec<f64>>) -> Self {
        MkResult { distance, method, breakdown, trace: None, iterations: 0, converged: true, truncation_level: None }
    }
}

/// Spectral data of `Δ_{β(α)}`; the closed Haar form on Cantor spaces when `exact`.
pub fn mk_spectrum(space: &FiniteSpace, alpha: f64, exact: bool) -> Result<SpectralData> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("α must be positive, got {alpha}")));
    }
    let beta = beta_of_alpha(space.d_f(), alpha);
    if exact {
        cantor_exact_for(space, beta)
    } else {
        GeneratorMatrix::assemble(space, beta)?.spectrum()
    }
}

fn difference(phi: &State, psi: &State, n: usize) -> Result<Vec<f64>> {
    if phi.len() != n || psi.len() != n {
        return Err(Error::Dimension { expected: n, got: if phi.len() != n { phi.len() } else { psi.len() } });
    }
    Ok(phi.probs().iter().zip(psi.probs()).map(|(a, b)| a - b).collect())
}

/// The spectral sum over the nonzero modes of `spec`.
pub fn mk_closed(spec: &SpectralData, phi: &State, psi: &State) -> Result<MkResult> {
    let c = difference(phi, psi, spec.len())?;
    if spec.len() < 2 || !(spec.eigenvalues[1] > 0.0) {
        return Err(Error::Singular("spectral data has no positive gap λ_1".into()));
    }
    let breakdown: Vec<f64> = (1..spec.len())
        .map(|j| {
            let h = spec.eigenfunction(j);
            let t: Complex64 = c.iter().zip(&h).map(|(a, b)| b * *a).sum();
            t.norm_sqr() / spec.eigenvalues[j]
        })
        .collect();
    let rho = breakdown.iter().sum::<f64>().sqrt();
    Ok(MkResult::exact(rho, MkMethod::Closed, Some(breakdown)))
}

/// `ρ² = cᵀ g` with `B g = c`, solved by Cholesky on `B` with the last
/// point grounded.
pub fn mk_linsolve(space: &FiniteSpace, alpha: f64, phi: &State, psi: &State) -> Result<MkResult> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("α must be positive, got {alpha}")));
    }
    let n = space.len();
    let c = difference(phi, psi, n)?;
    if c.iter().all(|v| *v == 0.0) {
        return Ok(MkResult::exact(0.0, MkMethod::Linsolve, None));
    }
    let b = GeneratorMatrix::assemble(space, beta_of_alpha(space.d_f(), alpha))?.energy_matrix();
    let m = n - 1;
    let reduced = DMatrix::from_fn(m, m, |i, j| b[(i, j)]);
    let chol = reduced
        .cholesky()
        .ok_or_else(|| Error::Singular("grounded energy matrix is not positive definite".into()))?;
    let rhs = DVector::from_iterator(m, c[..m].iter().copied());
    let g = chol.solve(&rhs);
    let rho2: f64 = g.iter().zip(&c).map(|(a, b)| a * b).sum();
    Ok(MkResult::exact(rho2.max(0.0).sqrt(), MkMethod::Linsolve, None))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SupConfig {
    pub max_iter: usize,
    /// Stop once the tangential gradient falls below `tol · ‖c‖`.
    pub tol: f64,
    /// Radius of the constraint ball.
    pub radius: f64,
}

impl Default for SupConfig {
    fn default() -> Self {
        SupConfig { max_iter: 5000, tol: 1e-9, radius: 1.0 }
    }
}

enum Constraint {
    Energy(DMatrix<f64>),
    Schatten { space: FiniteSpace, alpha: f64, p: f64, s: Vec<f64> },
}

impl Constraint {
    fn norm_and_grad(&self, f: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            Constraint::Energy(b) => {
                let v = DVector::from_column_slice(f);
                let bf = b * &v;
                let norm = f.iter().zip(bf.iter()).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
                if norm == 0.0 {
                    return Ok((0.0, vec![0.0; f.len()]));
                }
                Ok((norm, bf.iter().map(|x| x / norm).collect()))
            }
            Constraint::Schatten { space, alpha, p, s } => {
                let n = f.len();
                let op = CommutatorOp::new(space, *alpha, f)?;
                let norm = op.schatten_norm(*p)?;
                if norm == 0.0 {
                    return Ok((0.0, vec![0.0; n]));
                }
                let (u, sigma, v_t) = op.svd_factors()?;
                let d = DMatrix::from_fn(n, n, |i, j| {
                    if i == j && sigma[i] > 0.0 {
                        (sigma[i] / norm).powf(p - 1.0)
                    } else {
                        0.0
                    }
                });
                let g = &u * d * &v_t;
                let grad = (0..n)
                    .map(|z| (0..n).map(|y| g[(z, y)] * s[z * n + y] - g[(y, z)] * s[y * n + z]).sum())
                    .collect();
                Ok((norm, grad))
            }
        }
    }
}

/// Constrained ascent of `Σ_x (φ_x − ψ_x) f(x)` over
/// `{f : N(f) ≤ radius}`, with `N` the energy seminorm `E_{β(α)}^{1/2}` for
/// `p = 2` and `‖[Δ_α, m_f]‖_{S_p}` otherwise.
///
/// Iterates stay on the sphere `N = radius`, so every recorded value is
/// attained by a feasible `f` and is a lower bound for the supremum.
pub fn mk_sup(
    space: &FiniteSpace,
    alpha: f64,
    p: f64,
    phi: &State,
    psi: &State,
    config: &SupConfig,
) -> Result<MkResult> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("α must be positive, got {alpha}")));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param(format!("sup oracle needs finite p ≥ 1, got {p}")));
    }
    if !(config.radius > 0.0) {
        return Err(Error::param(format!("constraint radius must be positive, got {}", config.radius)));
    }
    let n = space.len();
    let c = difference(phi, psi, n)?;
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let result = |value: f64, trace: Vec<f64>, iterations: usize, converged: bool| MkResult {
        distance: value,
        method: MkMethod::SupOracle,
        breakdown: None,
        trace: Some(trace),
        iterations,
        converged,
        truncation_level: None,
    };
    if c_norm == 0.0 {
        return Ok(result(0.0, vec![0.0], 0, true));
    }
    let constraint = if p == 2.0 {
        Constraint::Energy(GeneratorMatrix::assemble(space, beta_of_alpha(space.d_f(), alpha))?.energy_matrix())
    } else {
        let e = space.d_f() + 2.0 * alpha;
        let w = space.weights();
        let s = (0..n * n)
            .map(|i| {
                let (x, y) = (i / n, i % n);
                if x == y {
                    0.0
                } else {
                    (w[x] * w[y]).sqrt() * space.dist(x, y).powf(-e)
                }
            })
            .collect();
        Constraint::Schatten { space: space.clone(), alpha, p, s }
    };
    let w = space.weights();
    let mass = space.total_mass();
    let center = |f: &mut [f64]| {
        let m = f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / mass;
        f.iter_mut().for_each(|v| *v -= m);
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut u = c.clone();
    center(&mut u);
    let (n0, _) = constraint.norm_and_grad(&u)?;
    if n0 == 0.0 {
        return Err(Error::Singular("constraint seminorm vanishes on the objective direction".into()));
    }
    u.iter_mut().for_each(|v| *v /= n0);
    let (_, mut grad) = constraint.norm_and_grad(&u)?;
    let mut val = dot(&c, &u);
    let mut trace = vec![val * config.radius];
    let mut step = 1.0 / c_norm;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let mut d: Vec<f64> = c.iter().zip(&grad).map(|(ci, gi)| ci - val * gi).collect();
        center(&mut d);
        let dn = dot(&d, &d).sqrt();
        if dn <= config.tol * c_norm {
            converged = true;
            break;
        }
        iterations += 1;
        let mut cand: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + step * b).collect();
        center(&mut cand);
        let (nc, _) = constraint.norm_and_grad(&cand)?;
        if nc > 0.0 {
            cand.iter_mut().for_each(|v| *v /= nc);
            let cv = dot(&c, &cand);
            if cv > val {
                u = cand;
                val = cv;
                grad = constraint.norm_and_grad(&u)?.1;
                trace.push(val * config.radius);
                step *= 1.5;
                continue;
            }
        }
        step *= 0.5;
        if step * dn < 1e-17 * dot(&u, &u).sqrt() {
            converged = true;
            break;
        }
    }
    Ok(result(val * config.radius, trace, iterations, converged))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiracRow {
    pub x: usize,
    pub y: usize,
    pub dist: f64,
    pub rho: f64,
    pub ratio_2alpha: f64,
    pub ratio_beta: f64,
}

/// Empirical Dirac-pair constants: `max ρ/d^{2α}` and `min ρ/d^β`.
#[derive(Clone, Debug, Serialize)]
pub struct DiracScan {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub rows: Vec<DiracRow>,
    pub upper_constant: f64,
    pub lower_constant: f64,
}

/// `ρ(δ_x, δ_y)` for all pairs `x < y`: the spectral sum for `p = 2`,
/// the sup oracle otherwise.
pub fn dirac_scan(
    space: &FiniteSpace,
    alpha: f64,
    beta: f64,
    p: f64,
    spec: Option<&SpectralData>,
    config: &SupConfig,
) -> Result<DiracScan> {
    if !(alpha > 0.0 && 2.0 * alpha < beta && beta <= 1.0) {
        return Err(Error::regime(format!("need 0 < 2α < β ≤ 1, got α = {alpha}, β = {beta}")));
    }
    let n = space.len();
    let owned;
    let spec = match (p == 2.0, spec) {
        (true, Some(s)) => Some(s),
        (true, None) => {
            owned = mk_spectrum(space, alpha, false)?;
            Some(&owned)
        }
        (false, _) => None,
    };
    // Mode table `t[j][x] = h_j(x) / √λ_j` for the spectral path.
    let table: Option<Vec<Vec<Complex64>>> = spec.map(|s| {
        (1..s.len()).map(|j| s.eigenfunction(j).into_iter().map(|h| h / s.eigenvalues[j].sqrt()).collect()).collect()
    });
    let mut rows = Vec::with_capacity(n * (n - 1) / 2);
    for x in 0..n {
        for y in (x + 1)..n {
            let rho = match &table {
                Some(t) => t.iter().map(|m| (m[x] - m[y]).norm_sqr()).sum::<f64>().sqrt(),
                None => mk_sup(space, alpha, p, &State::dirac(n, x)?, &State::dirac(n, y)?, config)?.distance,
            };
            let d = space.dist(x, y);
            rows.push(DiracRow { x, y, dist: d, rho, ratio_2alpha: rho / d.powf(2.0 * alpha), ratio_beta: rho / d.powf(beta) });
        }
    }
    let upper_constant = rows.iter().map(|r| r.ratio_2alpha).fold(0.0, f64::max);
    let lower_constant = rows.iter().map(|r| r.ratio_beta).fold(f64::INFINITY, f64::min);
    Ok(DiracScan { alpha, beta, p, rows, upper_constant, lower_constant })
}

/// A state on `cantor(N, λ, L)` defined for every depth `L` at least as
/// long as its prefix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RefinableState {
    /// Dirac mass at the word `prefix` followed by repeats of `fill`.
    Point { prefix: Vec<u8>, fill: u8 },
    /// Uniform mass on the cylinder of `word`.
    Cylinder { word: Vec<u8> },
}

impl RefinableState {
    pub fn at_depth(&self, space: &FiniteSpace) -> Result<State> {
        let (branching, _, depth) = space
            .cantor_params()
            .ok_or_else(|| Error::Unsupported("refinable states live on cantor spaces".into()))?;
        let n = space.len();
        let bad = |w: &[u8]| w.iter().any(|&d| d == 0 || d as usize > branching);
        match self {
            RefinableState::Point { prefix, fill } => {
                if prefix.len() > depth || bad(prefix) || bad(&[*fill]) {
                    return Err(Error::param(format!("point state {prefix:?}+{fill} not expressible at depth {depth}")));
                }
                let mut word = prefix.clone();
                word.resize(depth, *fill);
                State::dirac(n, space.index_of_word(&word).expect("valid word"))
            }
            RefinableState::Cylinder { word } => {
                if word.len() > depth || bad(word) {
                    return Err(Error::param(format!("cylinder {word:?} not expressible at depth {depth}")));
                }
                let members: Vec<usize> =
                    (0..n).filter(|&x| space.word(x).expect("cantor")[..word.len()] == word[..]).collect();
                let mut probs = vec![0.0; n];
                for &x in &members {
                    probs[x] = 1.0 / members.len() as f64;
                }
                State::new(probs)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub depth: usize,
    pub rho: f64,
    /// `|ρ_L − ρ_{L−1}| / ρ_L`; absent at the first depth.
    pub relative_change: Option<f64>,
}

/// `ρ_L` on `cantor(N, λ, L)` from the exact spectrum, for each depth.
pub fn truncation_convergence(
    branching: usize,
    lambda: f64,
    alpha: f64,
    phi: &RefinableState,
    psi: &RefinableState,
    depths: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(depths.len());
    for &depth in depths {
        let space = FiniteSpace::cantor(branching, lambda, depth)?;
        let spec = mk_spectrum(&space, alpha, true)?;
        let mut r = mk_closed(&spec, &phi.at_depth(&space)?, &psi.at_depth(&space)?)?;
        r.truncation_level = Some(depth);
        let relative_change = rows.last().map(|prev| {
            if r.distance == 0.0 {
                0.0
            } else {
                (r.distance - prev.rho).abs() / r.distance
            }
        });
        rows.push(ConvergenceRow { depth, rho: r.distance, relative_change });
    }
    Ok(rows)
}
