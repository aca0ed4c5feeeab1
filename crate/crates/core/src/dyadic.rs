//! Dyadic cube systems, expectations, Haar wavelets and maximal functions.
//!
//! Cantor spaces use their cylinder sets; circles with `2^L` points use
//! nested binary arcs. In both cases every cube is a contiguous range of
//! point indices, and all cubes at one level have the same size.

use std::ops::Range;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spaces::{FiniteSpace, SpaceKind};
use crate::Scalar;

const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cube {
    pub id: String,
    pub level: usize,
    /// Member point indices.
    pub members: Range<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub center: usize,
    pub mass: f64,
}

impl Cube {
    pub fn contains(&self, x: usize) -> bool {
        self.members.contains(&x)
    }
}

/// Geometry constants of a dyadic system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DyadicConstants {
    pub theta: f64,
    pub c1: f64,
    pub big_c1: f64,
    pub max_children: usize,
    pub count_constant: f64,
}

#[derive(Clone, Debug)]
pub struct DyadicSystem {
    cubes: Vec<Cube>,
    levels: Vec<Vec<usize>>,
    weights: Vec<f64>,
    d_f: f64,
    constants: DyadicConstants,
    kind: SpaceKind,
}

impl DyadicSystem {
    pub fn build(space: &FiniteSpace) -> Result<Self> {
        let (branch_per_level, theta, c1, big_c1, labels): (Vec<usize>, f64, f64, f64, Labeler) = match space.kind() {
            SpaceKind::Cantor => {
                let (n, lambda, depth) = space.cantor_params().expect("cantor space");
                (vec![n; depth], 1.0 / lambda, 1.0, 1.0, Labeler::Cantor(n))
            }
            SpaceKind::Circle => {
                let n = space.circle_size().expect("circle space");
                if !n.is_power_of_two() {
                    return Err(Error::Unsupported(format!(
                        "dyadic arcs on circle({n}) need a power-of-two point count"
                    )));
                }
                (vec![2; n.trailing_zeros() as usize], 0.5, 0.25, 0.5, Labeler::Circle)
            }
            SpaceKind::Custom => {
                return Err(Error::Unsupported("dyadic systems exist only for cantor and circle spaces".into()))
            }
        };
        let n = space.len();
        let mut cubes = vec![Cube {
            id: labels.label(0, 0),
            level: 0,
            members: 0..n,
            parent: None,
            children: Vec::new(),
            center: center_of(space.kind(), 0..n),
            mass: space.total_mass(),
        }];
        let mut levels = vec![vec![0]];
        for (lvl, &b) in branch_per_level.iter().enumerate() {
            let mut next = Vec::new();
            for &parent in &levels[lvl] {
                let range = cubes[parent].members.clone();
                let size = range.len() / b;
                for k in 0..b {
                    let members = range.start + k * size..range.start + (k + 1) * size;
                    let idx = cubes.len();
                    cubes.push(Cube {
                        id: labels.label(lvl + 1, members.start / size),
                        level: lvl + 1,
                        center: center_of(space.kind(), members.clone()),
                        mass: members.clone().map(|x| space.weights()[x]).sum(),
                        members,
                        parent: Some(parent),
                        children: Vec::new(),
                    });
                    cubes[parent].children.push(idx);
                    next.push(idx);
                }
            }
            levels.push(next);
        }
        let d_f = space.d_f();
        let count_constant = levels
            .iter()
            .enumerate()
            .map(|(lvl, cs)| cs.len() as f64 * theta.powf(d_f * lvl as f64))
            .fold(0.0, f64::max);
        let max_children = cubes.iter().map(|c| c.children.len()).max().unwrap_or(0);
        Ok(DyadicSystem {
            cubes,
            levels,
            weights: space.weights().to_vec(),
            d_f,
            constants: DyadicConstants { theta, c1, big_c1, max_children, count_constant },
            kind: space.kind(),
        })
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn cube(&self, idx: usize) -> &Cube {
        &self.cubes[idx]
    }

    pub fn level(&self, n: usize) -> &[usize] {
        &self.levels[n]
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn constants(&self) -> DyadicConstants {
        self.constants
    }

    pub fn theta(&self) -> f64 {
        self.constants.theta
    }

    pub fn d_f(&self) -> f64 {
        self.d_f
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    /// Index of the level-`n` cube containing point `x`.
    pub fn cube_of(&self, n: usize, x: usize) -> usize {
        let cs = &self.levels[n];
        let size = self.cubes[cs[0]].members.len();
        cs[x / size]
    }

    /// `E_n f`: weighted cube averages at level `n`.
    pub fn expectation<T: Scalar>(&self, n: usize, f: &[T]) -> Result<Vec<T>> {
        if n > self.max_level() {
            return Err(Error::param(format!("level {n} above max level {}", self.max_level())));
        }
        self.check_len(f.len())?;
        let mut out = vec![T::zero(); f.len()];
        for &c in &self.levels[n] {
            let cube = &self.cubes[c];
            let avg = self.average(cube, f);
            for x in cube.members.clone() {
                out[x] = avg;
            }
        }
        Ok(out)
    }

    fn average<T: Scalar>(&self, cube: &Cube, f: &[T]) -> T {
        let s = cube
            .members
            .clone()
            .fold(T::zero(), |acc, x| acc + f[x] * T::from_real(self.weights[x]));
        s / T::from_real(cube.mass)
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n_points() {
            return Err(Error::Dimension { expected: self.n_points(), got });
        }
        Ok(())
    }

    /// Check axioms (i)–(vi) exhaustively against `space`.
    pub fn validate(&self, space: &FiniteSpace) -> Vec<String> {
        let mut issues = Vec::new();
        let n = space.len();
        let k = self.constants;
        if self.levels[0].len() != 1 || self.cubes[self.levels[0][0]].members != (0..n) {
            issues.push("level 0 is not the whole space".into());
        }
        for (lvl, cs) in self.levels.iter().enumerate() {
            let mut owner = vec![usize::MAX; n];
            for &c in cs {
                for x in self.cubes[c].members.clone() {
                    if owner[x] != usize::MAX {
                        issues.push(format!("level {lvl}: point {x} lies in two cubes"));
                    }
                    owner[x] = c;
                }
            }
            if let Some(x) = owner.iter().position(|&o| o == usize::MAX) {
                issues.push(format!("level {lvl}: point {x} is not covered"));
            }
            let bound = k.count_constant * k.theta.powf(-self.d_f * lvl as f64);
            if cs.len() as f64 > bound * (1.0 + GEOM_TOL) {
                issues.push(format!("level {lvl}: {} cubes exceed the count bound {bound}", cs.len()));
            }
        }
        for (idx, cube) in self.cubes.iter().enumerate() {
            let leaf = cube.level == self.max_level();
            if !leaf && !(2..=k.max_children).contains(&cube.children.len()) {
                issues.push(format!("cube {}: {} children", cube.id, cube.children.len()));
            }
            if !cube.children.is_empty() {
                let mut covered: Vec<usize> =
                    cube.children.iter().flat_map(|&c| self.cubes[c].members.clone()).collect();
                covered.sort_unstable();
                if covered != cube.members.clone().collect::<Vec<_>>() {
                    issues.push(format!("cube {}: children do not partition it", cube.id));
                }
                for &c in &cube.children {
                    if self.cubes[c].parent != Some(idx) || self.cubes[c].level != cube.level + 1 {
                        issues.push(format!("cube {}: broken parent link", self.cubes[c].id));
                    }
                }
            }
            let scale = k.theta.powi(cube.level as i32);
            let outer = k.big_c1 * scale * (1.0 + GEOM_TOL);
            let inner = k.c1 * scale;
            for y in 0..n {
                let d = space.dist(cube.center, y);
                if cube.contains(y) && d > outer {
                    issues.push(format!("cube {}: member {y} at distance {d} > C1·θ^n = {outer}", cube.id));
                }
                if !cube.contains(y) && d <= inner {
                    issues.push(format!("cube {}: outside point {y} at distance {d} ≤ c1·θ^n = {inner}", cube.id));
                }
            }
            let mass: f64 = cube.members.clone().map(|x| space.weights()[x]).sum();
            if (mass - cube.mass).abs() > GEOM_TOL * cube.mass {
                issues.push(format!("cube {}: stored mass {} ≠ {mass}", cube.id, cube.mass));
            }
        }
        issues
    }

    /// The Haar wavelet basis (complex exponentials on Cantor, real on circles).
    pub fn haar_basis(&self) -> HaarBasis {
        let total: f64 = self.weights.iter().sum();
        let mut wavelets = Vec::new();
        for (idx, cube) in self.cubes.iter().enumerate() {
            let b = cube.children.len();
            if b == 0 {
                continue;
            }
            match self.kind {
                SpaceKind::Cantor => {
                    let amp = (total / cube.mass).sqrt() / total.sqrt();
                    for u in 1..b {
                        let values = (0..b)
                            .map(|k| {
                                let phase = 2.0 * std::f64::consts::PI * (u * k) as f64 / b as f64;
                                Complex64::from_polar(amp, phase)
                            })
                            .collect();
                        wavelets.push(Wavelet { cube: idx, u, values });
                    }
                }
                _ => {
                    let masses: Vec<f64> = cube.children.iter().map(|&c| self.cubes[c].mass).collect();
                    for (u, values) in gram_schmidt_children(&masses).into_iter().enumerate() {
                        wavelets.push(Wavelet {
                            cube: idx,
                            u: u + 1,
                            values: values.into_iter().map(Complex64::from).collect(),
                        });
                    }
                }
            }
        }
        HaarBasis { wavelets, total_mass: total }
    }

    /// Full point vector of a wavelet.
    pub fn wavelet_vector(&self, w: &Wavelet) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_points()];
        for (k, &c) in self.cubes[w.cube].children.iter().enumerate() {
            for x in self.cubes[c].members.clone() {
                out[x] = w.values[k];
            }
        }
        out
    }

    /// `⟨f, h⟩ = Σ w_x conj(h(x)) f(x)` for a wavelet `h`.
    pub fn wavelet_coefficient(&self, w: &Wavelet, f: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in self.cubes[w.cube].children.iter().enumerate() {
            let s: Complex64 = self.cubes[c].members.clone().map(|x| f[x] * self.weights[x]).sum();
            acc += w.values[k].conj() * s;
        }
        acc
    }

    /// Properties of the basis: orthonormality, mean zero, completeness
    /// (wavelet count per cube), and `‖h‖_p / mass^{1/p−1/2}` constants.
    pub fn haar_report(&self, basis: &HaarBasis, p: f64) -> HaarReport {
        let vecs: Vec<Vec<Complex64>> = basis.wavelets.iter().map(|w| self.wavelet_vector(w)).collect();
        let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).zip(&self.weights).map(|((x, y), &w)| x.conj() * y * w).sum()
        };
        let mut norm_err = 0.0f64;
        let mut orth_err = 0.0f64;
        let mut mean_err = 0.0f64;
        for (i, v) in vecs.iter().enumerate() {
            norm_err = norm_err.max((inner(v, v).re - 1.0).abs());
            let mean: Complex64 = v.iter().zip(&self.weights).map(|(x, &w)| x * w).sum();
            mean_err = mean_err.max(mean.norm());
            for u in &vecs[i + 1..] {
                orth_err = orth_err.max(inner(v, u).norm());
            }
        }
        let mut span_ok = true;
        for cube in &self.cubes {
            let expected = cube.children.len().saturating_sub(1);
            let got = basis.wavelets.iter().filter(|w| self.cubes[w.cube].id == cube.id).count();
            span_ok &= got == expected;
        }
        let ratios: Vec<f64> = basis
            .wavelets
            .iter()
            .zip(&vecs)
            .map(|(w, v)| {
                let lp = v.iter().zip(&self.weights).map(|(x, &wt)| wt * x.norm().powf(p)).sum::<f64>().powf(1.0 / p);
                lp / self.cubes[w.cube].mass.powf(1.0 / p - 0.5)
            })
            .collect();
        HaarReport {
            count: vecs.len(),
            max_norm_error: norm_err,
            max_orthogonality_error: orth_err,
            max_mean: mean_err,
            span_complete: span_ok && vecs.len() + 1 == self.n_points(),
            lp_exponent: p,
            lp_ratio_min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            lp_ratio_max: ratios.iter().copied().fold(0.0, f64::max),
        }
    }

    /// `M_e f(x) = max_{D∋x} |⟨f, e_D⟩| / mass(D)^{1/2}`; `e` is indexed by cube.
    pub fn nwo_maximal<T: Scalar>(&self, e: &[Vec<T>], f: &[T]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        if e.len() != self.cubes.len() {
            return Err(Error::param(format!(
                "family has {} entries, the system has {} cubes",
                e.len(),
                self.cubes.len()
            )));
        }
        let mut out = vec![0.0f64; f.len()];
        for (cube, ed) in self.cubes.iter().zip(e) {
            self.check_len(ed.len())?;
            let c = ed
                .iter()
                .zip(f)
                .zip(&self.weights)
                .fold(T::zero(), |acc, ((a, b), &w)| acc + a.conjugate() * *b * T::from_real(w));
            let v = c.modulus() / cube.mass.sqrt();
            for x in cube.members.clone() {
                out[x] = out[x].max(v);
            }
        }
        Ok(out)
    }

    /// The prototype family `e_D = mass(D)^{-1/2} χ_D`.
    pub fn prototype_family(&self) -> Vec<Vec<f64>> {
        self.cubes
            .iter()
            .map(|c| {
                let mut v = vec![0.0; self.n_points()];
                let a = c.mass.powf(-0.5);
                for x in c.members.clone() {
                    v[x] = a;
                }
                v
            })
            .collect()
    }

    /// `Σ_{n<L} θ^{-γpn} ‖E_{n+1}h − E_n h‖_p^p` with `γ = 2α + d_f/p`.
    pub fn martingale_lhs<T: Scalar>(&self, h: &[T], alpha: f64, p: f64) -> Result<MartingaleSum> {
        if !(p > 1.0) {
            return Err(Error::param(format!("p must exceed 1, got {p}")));
        }
        self.check_len(h.len())?;
        let gamma = 2.0 * alpha + self.d_f / p;
        let mut per_level = Vec::with_capacity(self.max_level());
        let mut prev = self.expectation(0, h)?;
        for n in 0..self.max_level() {
            let next = self.expectation(n + 1, h)?;
            let norm_p: f64 = next
                .iter()
                .zip(&prev)
                .zip(&self.weights)
                .map(|((a, b), &w)| w * (*a - *b).modulus().powf(p))
                .sum();
            per_level.push(self.theta().powf(-gamma * p * n as f64) * norm_p);
            prev = next;
        }
        Ok(MartingaleSum { total: per_level.iter().sum(), per_level, gamma })
    }
}

/// `M f(x) = max_r avg_{B̄(x,r)} |f|` over the radii `r ∈ {d(x,y)}`.
pub fn hl_maximal<T: Scalar>(space: &FiniteSpace, f: &[T]) -> Result<Vec<f64>> {
    space.check_len(f.len())?;
    let n = space.len();
    let w = space.weights();
    let abs: Vec<f64> = f.iter().map(|v| v.modulus()).collect();
    let mut out = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for (x, slot) in out.iter_mut().enumerate() {
        order.sort_by(|&a, &b| space.dist(x, a).total_cmp(&space.dist(x, b)));
        let (mut mass, mut integral, mut best) = (0.0, 0.0, 0.0f64);
        for (i, &y) in order.iter().enumerate() {
            mass += w[y];
            integral += w[y] * abs[y];
            let closes_ball = order.get(i + 1).is_none_or(|&z| space.dist(x, z) > space.dist(x, y));
            if closes_ball {
                best = best.max(integral / mass);
            }
        }
        *slot = best;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Wavelet {
    pub cube: usize,
    pub u: usize,
    /// Value on each child, in child order.
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HaarBasis {
    pub wavelets: Vec<Wavelet>,
    pub total_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HaarReport {
    pub count: usize,
    pub max_norm_error: f64,
    pub max_orthogonality_error: f64,
    pub max_mean: f64,
    pub span_complete: bool,
    pub lp_exponent: f64,
    pub lp_ratio_min: f64,
    pub lp_ratio_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleSum {
    pub total: f64,
    pub per_level: Vec<f64>,
    pub gamma: f64,
}

enum Labeler {
    Cantor(usize),
    Circle,
}

impl Labeler {
    fn label(&self, level: usize, index: usize) -> String {
        match *self {
            Labeler::Cantor(n) => {
                let mut digits = vec![0usize; level];
                let mut i = index;
                for d in digits.iter_mut().rev() {
                    *d = i % n + 1;
                    i /= n;
                }
                let sep = if n <= 9 { "" } else { "." };
                let word = digits.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(sep);
                format!("C{word}")
            }
            Labeler::Circle => format!("A{level}:{index}"),
        }
    }
}

fn center_of(kind: SpaceKind, members: Range<usize>) -> usize {
    match kind {
        SpaceKind::Circle => members.start + members.len() / 2,
        _ => members.start,
    }
}

// Orthonormal basis, orthogonal to constants, of functions constant on
// children with the given masses (inner product Σ m_k a_k b_k).
fn gram_schmidt_children(masses: &[f64]) -> Vec<Vec<f64>> {
    let b = masses.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).zip(masses).map(|((x, y), m)| x * y * m).sum::<f64>();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0; b]];
    let s = dot(&basis[0], &basis[0]).sqrt();
    basis[0].iter_mut().for_each(|v| *v /= s);
    for k in 0..b - 1 {
        let mut v = vec![0.0; b];
        v[k] = 1.0;
        for e in &basis {
            let c = dot(&v, e);
            v.iter_mut().zip(e).for_each(|(a, ei)| *a -= c * ei);
        }
        let s = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|a| *a /= s);
        basis.push(v);
    }
    basis.remove(0);
    basis
}
