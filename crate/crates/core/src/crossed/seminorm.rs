use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use serde::Serialize;

use super::group::GroupModel;
use super::length::LengthFunction;
use crate::commutator::{beta_of_alpha, schatten_of};
use crate::error::{Error, Result};
use crate::laplacian::GeneratorMatrix;
use crate::rng;
use crate::spaces::{FiniteSpace, SpaceKind};

/// How the group moves base points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Trivial,
    /// Coordinatewise addition mod `N` on Cantor words.
    CantorTranslation,
    /// `z ↦ z + k mod n` on `circle(n)`.
    CircleRotation,
}

/// Seminorm applied to each coefficient for the horizontal part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseSeminorm {
    /// `Höl_β`.
    Holder(f64),
    /// `E_{β(α)}(a,a)^{1/2}` for the given `α`.
    Energy(f64),
}

/// A finitely supported `γ ↦ f(γ)`, each `f(γ)` a vector over the base
/// points (length one for a point base).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CrossedElement {
    pub terms: BTreeMap<usize, Vec<Complex64>>,
}

impl CrossedElement {
    pub fn single(gamma: usize, coeff: Vec<Complex64>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(gamma, coeff);
        CrossedElement { terms }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        CrossedElement { terms: self.terms.iter().map(|(&g, v)| (g, v.iter().map(|z| z * c).collect())).collect() }
    }
}

/// A truncated crossed product `C(Z) ⋊ Γ` with its length function.
#[derive(Clone, Debug)]
pub struct CrossedSystem {
    pub length: LengthFunction,
    pub base: Option<FiniteSpace>,
    pub action: Action,
    energy: Option<(f64, GeneratorMatrix)>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GroupSeminorm {
    pub value: f64,
    /// Share of `Σ_γ |f(γ)|² · #ball` lost to translates leaving the ball.
    pub discarded_fraction: f64,
    /// The same seminorm on the ball of twice the radius, when affordable.
    pub doubled: Option<f64>,
}

/// Largest doubled truncation used for the sensitivity value.
pub const SENSITIVITY_GUARD: usize = 1025;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CombinedSeminorm {
    pub vertical: f64,
    pub horizontal: f64,
    pub horizontal_star: f64,
    pub value: f64,
    pub discarded_fraction: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EvaluationReport {
    pub at_g: f64,
    pub horizontal: f64,
    pub holds: bool,
}

impl CrossedSystem {
    pub fn new(length: LengthFunction, base: Option<FiniteSpace>, action: Action) -> Result<Self> {
        match (action, &length.group, &base) {
            (Action::Trivial, _, _) => {}
            (Action::CantorTranslation, GroupModel::CantorDual { branching, .. }, Some(s)) if s.kind() == SpaceKind::Cantor => {
                let (n, _, _) = s.cantor_params().expect("cantor");
                if n != *branching {
                    return Err(Error::param(format!("group ℤ/{branching} cannot translate words over {n} letters")));
                }
            }
            (Action::CircleRotation, GroupModel::Integers { .. }, Some(s)) if s.kind() == SpaceKind::Circle => {}
            _ => return Err(Error::param(format!("{action:?} does not fit this group and base"))),
        }
        Ok(CrossedSystem { length, base, action, energy: None })
    }

    pub fn group(&self) -> &GroupModel {
        &self.length.group
    }

    pub fn base_len(&self) -> usize {
        self.base.as_ref().map_or(1, |s| s.len())
    }

    /// `γ·z`.
    pub fn act(&self, gamma: usize, z: usize) -> usize {
        let g = self.group();
        match self.action {
            Action::Trivial => z,
            Action::CantorTranslation => {
                let space = self.base.as_ref().expect("base");
                let (n, _, _) = space.cantor_params().expect("cantor");
                let c = g.coords(gamma).expect("cantor");
                let mut word = space.word(z).expect("cantor");
                for (x, ci) in word.iter_mut().zip(&c) {
                    *x = ((*x as usize - 1 + *ci as usize) % n + 1) as u8;
                }
                space.index_of_word(&word).expect("translated word")
            }
            Action::CircleRotation => {
                let n = self.base_len() as i64;
                (z as i64 + g.integer(gamma).expect("integer")).rem_euclid(n) as usize
            }
        }
    }

    fn check_element(&self, f: &CrossedElement) -> Result<()> {
        let g = self.group();
        for (&gamma, coeff) in &f.terms {
            if gamma >= g.len() {
                return Err(Error::param(format!("element index {gamma} outside the truncation")));
            }
            if coeff.len() != self.base_len() {
                return Err(Error::Dimension { expected: self.base_len(), got: coeff.len() });
            }
            if let GroupModel::Integers { radius } = *g {
                if 2 * g.norm(gamma) > radius {
                    return Err(Error::param(format!(
                        "support element {} exceeds the margin R/2 = {}",
                        g.label(gamma),
                        radius as f64 / 2.0
                    )));
                }
            }
        }
        Ok(())
    }

    /// `[M_ℓ, π_z(f)]` on `ℓ²(ball)`, entry `(ζ, η) = (ℓ(ζ) − ℓ(η)) f(ζη^{-1})(ζ·z)`.
    pub fn commutator_matrix(&self, f: &CrossedElement, z: usize) -> Result<(DMatrix<Complex64>, f64)> {
        self.check_element(f)?;
        let g = self.group();
        let n = g.len();
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        let (mut kept, mut lost) = (0.0, 0.0);
        for (&gamma, coeff) in &f.terms {
            let weight: f64 = coeff.iter().map(|c| c.norm_sqr()).sum();
            for eta in 0..n {
                match g.compose(gamma, eta) {
                    Some(zeta) => {
                        kept += weight;
                        let d = self.length.values[zeta] - self.length.values[eta];
                        m[(zeta, eta)] += coeff[self.act(zeta, z)] * d;
                    }
                    None => lost += weight,
                }
            }
        }
        let total = kept + lost;
        Ok((m, if total > 0.0 { lost / total } else { 0.0 }))
    }

    fn schatten(m: DMatrix<Complex64>, p: f64) -> Result<f64> {
        let sv: Vec<f64> = m
            .try_svd(false, false, f64::EPSILON, 0)
            .ok_or_else(|| Error::NonConvergence { what: "crossed-product SVD".into(), residual: f64::NAN })?
            .singular_values
            .iter()
            .copied()
            .collect();
        schatten_of(&sv, p)
    }

    /// `‖[M_ℓ, π(f)]‖_{S_p}` for coefficients read at base point 0, with the
    /// value on the doubled ball for a point base.
    pub fn group_seminorm(&self, f: &CrossedElement, p: f64) -> Result<GroupSeminorm> {
        let (m, discarded_fraction) = self.commutator_matrix(f, 0)?;
        let value = Self::schatten(m, p)?;
        let doubled = if self.base.is_none() { self.doubled_value(f, p)? } else { None };
        Ok(GroupSeminorm { value, discarded_fraction, doubled })
    }

    fn doubled_value(&self, f: &CrossedElement, p: f64) -> Result<Option<f64>> {
        let g = self.group();
        let radius = 2 * g.radius();
        let affordable = match *g {
            GroupModel::Integers { .. } => 2 * radius < SENSITIVITY_GUARD,
            GroupModel::CantorDual { branching, .. } => {
                (branching as u64).checked_pow(radius as u32).is_some_and(|n| n as usize <= SENSITIVITY_GUARD)
            }
        };
        if !affordable {
            return Ok(None);
        }
        let Some(ell) = self.length.with_radius(radius)? else {
            return Ok(None);
        };
        let big = CrossedSystem::new(ell, None, Action::Trivial)?;
        let mut lifted = CrossedElement::default();
        for (&gamma, coeff) in &f.terms {
            lifted.terms.insert(big.group().parse_label(&g.label(gamma))?, coeff.clone());
        }
        let (m, _) = big.commutator_matrix(&lifted, 0)?;
        Self::schatten(m, p).map(Some)
    }

    /// Reads `label, point, re, im` rows; `point` is a base point id or `pt`.
    /// Blank lines, `#` comments and a header row starting with `gamma` are skipped.
    pub fn parse_element(&self, text: &str) -> Result<CrossedElement> {
        let g = self.group();
        let mut f = CrossedElement::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("gamma") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
            if cols.len() != 4 {
                return Err(bad("expected `label, point, re, im`"));
            }
            let gamma = g.parse_label(cols[0])?;
            let re: f64 = cols[2].parse().map_err(|_| bad("bad real part"))?;
            let im: f64 = cols[3].parse().map_err(|_| bad("bad imaginary part"))?;
            let coeff = f.terms.entry(gamma).or_insert_with(|| vec![Complex64::new(0.0, 0.0); self.base_len()]);
            let z = match (&self.base, cols[1]) {
                (None, "pt") => 0,
                (None, other) => return Err(bad(&format!("point base expects `pt`, got `{other}`"))),
                (Some(space), id) => space.point_index(id)?,
            };
            coeff[z] = Complex64::new(re, im);
        }
        self.check_element(&f)?;
        Ok(f)
    }

    /// `sup_z ‖[M_ℓ, π_z(f)]‖_{S_p}` over `samples` (all base points by default).
    pub fn vertical_seminorm(&self, f: &CrossedElement, p: f64, samples: Option<&[usize]>) -> Result<GroupSeminorm> {
        let all: Vec<usize> = (0..self.base_len()).collect();
        let samples = samples.unwrap_or(&all);
        let mut out = GroupSeminorm { value: 0.0, discarded_fraction: 0.0, doubled: None };
        for &z in samples {
            if z >= self.base_len() {
                return Err(Error::param(format!("sample point {z} outside the base")));
            }
            let (m, d) = self.commutator_matrix(f, z)?;
            out.value = out.value.max(Self::schatten(m, p)?);
            out.discarded_fraction = d;
        }
        Ok(out)
    }

    fn base_value(&mut self, a: &[Complex64], base: BaseSeminorm) -> Result<f64> {
        let Some(space) = &self.base else {
            return Ok(0.0);
        };
        match base {
            BaseSeminorm::Holder(beta) => space.holder_seminorm(a, beta),
            BaseSeminorm::Energy(alpha) => {
                if self.energy.as_ref().is_none_or(|(a0, _)| *a0 != alpha) {
                    let gen = GeneratorMatrix::assemble(space, beta_of_alpha(space.d_f(), alpha))?;
                    self.energy = Some((alpha, gen));
                }
                let (_, gen) = self.energy.as_ref().expect("cached");
                Ok(gen.energy(a, a)?.re.max(0.0).sqrt())
            }
        }
    }

    /// `L_H(f) = max_γ L(f(γ))`.
    pub fn horizontal_seminorm(&mut self, f: &CrossedElement, base: BaseSeminorm) -> Result<f64> {
        let mut best = 0.0f64;
        for coeff in f.terms.values() {
            best = best.max(self.base_value(coeff, base)?);
        }
        Ok(best)
    }

    /// `f*(γ)(z) = conj(f(γ^{-1})(γ^{-1}·z))`.
    pub fn star(&self, f: &CrossedElement) -> CrossedElement {
        let g = self.group();
        let terms = f
            .terms
            .iter()
            .map(|(&gamma, coeff)| {
                let target = g.inverse(gamma);
                let values = (0..self.base_len()).map(|z| coeff[self.act(gamma, z)].conj()).collect();
                (target, values)
            })
            .collect();
        CrossedElement { terms }
    }

    /// `max{L_V, L_H(f), L_H(f*)}`.
    pub fn combined_seminorm(&mut self, f: &CrossedElement, p: f64, base: BaseSeminorm) -> Result<CombinedSeminorm> {
        let v = self.vertical_seminorm(f, p, None)?;
        let horizontal = self.horizontal_seminorm(f, base)?;
        let horizontal_star = self.horizontal_seminorm(&self.star(f), base)?;
        Ok(CombinedSeminorm {
            vertical: v.value,
            horizontal,
            horizontal_star,
            value: v.value.max(horizontal).max(horizontal_star),
            discarded_fraction: v.discarded_fraction,
        })
    }

    /// `β_F(f)(γ) = (#(F ∩ γF)/#F) f(γ)`.
    pub fn berezin(&self, f: &CrossedElement, set: &[usize]) -> Result<CrossedElement> {
        if set.is_empty() {
            return Err(Error::param("Berezin transform needs a nonempty set F"));
        }
        let g = self.group();
        if let Some(&bad) = set.iter().find(|&&a| a >= g.len()) {
            return Err(Error::param(format!("F element {bad} outside the truncation")));
        }
        let mut uniq = set.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        let size = uniq.len() as f64;
        let terms = f
            .terms
            .iter()
            .map(|(&gamma, coeff)| {
                let factor = g.overlap(gamma, &uniq) as f64 / size;
                (gamma, coeff.iter().map(|c| c * factor).collect())
            })
            .collect();
        Ok(CrossedElement { terms })
    }

    /// `L(f(g)) ≤ L_H(f)`.
    pub fn evaluation_check(&mut self, f: &CrossedElement, g: usize, base: BaseSeminorm) -> Result<EvaluationReport> {
        let at_g = match f.terms.get(&g) {
            Some(c) => self.base_value(&c.clone(), base)?,
            None => 0.0,
        };
        let horizontal = self.horizontal_seminorm(f, base)?;
        Ok(EvaluationReport { at_g, horizontal, holds: at_g <= horizontal })
    }

    /// A seeded random element supported in the margin ball, with at most
    /// `terms` group elements.
    pub fn random_element(&self, terms: usize, r: &mut rng::Rng) -> CrossedElement {
        let g = self.group();
        let pool: Vec<usize> = (0..g.len())
            .filter(|&i| match g {
                GroupModel::Integers { radius } => 2 * g.norm(i) <= *radius,
                GroupModel::CantorDual { .. } => true,
            })
            .collect();
        let count = r.random_range(1..=terms.max(1));
        let mut f = CrossedElement::default();
        for _ in 0..count {
            let gamma = pool[r.random_range(0..pool.len())];
            let coeff = (0..self.base_len())
                .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
                .collect();
            f.terms.insert(gamma, coeff);
        }
        f
    }

    /// A seeded random nonempty subset of the margin ball.
    pub fn random_set(&self, max_size: usize, r: &mut rng::Rng) -> Vec<usize> {
        let g = self.group();
        let radius = g.radius() as i64;
        let size = r.random_range(1..=max_size.max(1));
        (0..size)
            .map(|_| match g {
                GroupModel::Integers { .. } => {
                    let k = r.random_range(-radius / 2..=radius / 2);
                    g.index_of_integer(k).expect("inside")
                }
                GroupModel::CantorDual { .. } => r.random_range(0..g.len()),
            })
            .collect()
    }
}
