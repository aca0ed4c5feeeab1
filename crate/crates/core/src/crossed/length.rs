use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use super::group::GroupModel;
use crate::commutator::p_threshold;
use crate::error::{Error, Result};
use crate::laplacian::{cantor_eigenvalue, linear_fit};

pub const DEFAULT_QUADRATURE_NODES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthSource {
    CircleQuadrature,
    CantorExact,
    Custom,
}

/// A length function on a truncated group.
#[derive(Clone, Debug, Serialize)]
pub struct LengthFunction {
    pub group: GroupModel,
    pub values: Vec<f64>,
    pub source: LengthSource,
    pub alpha: f64,
    /// Fractal dimension of the space the group is dual to.
    pub d_f: f64,
    /// `λ` for Cantor lengths, the node count for circle lengths.
    #[serde(skip)]
    param: f64,
}

impl LengthFunction {
    pub fn custom(group: GroupModel, values: Vec<f64>, alpha: f64, d_f: f64) -> Result<Self> {
        if values.len() != group.len() {
            return Err(Error::Dimension { expected: group.len(), got: values.len() });
        }
        Ok(LengthFunction { group, values, source: LengthSource::Custom, alpha, d_f, param: f64::NAN })
    }

    /// The same length function on a ball of another radius; `None` for custom lengths.
    pub fn with_radius(&self, radius: usize) -> Result<Option<LengthFunction>> {
        match (self.source, &self.group) {
            (LengthSource::CircleQuadrature, _) => circle_dual_length(self.alpha, radius, self.param as usize).map(Some),
            (LengthSource::CantorExact, GroupModel::CantorDual { branching, .. }) => {
                cantor_dual_length(*branching, self.param, self.alpha, radius).map(Some)
            }
            _ => Ok(None),
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `ℓ_γ(η) = |ℓ(η) − ℓ(γ^{-1}η)|`, `None` when `γ^{-1}η` leaves the truncation.
    pub fn increment(&self, gamma: usize, eta: usize) -> Option<f64> {
        let shifted = self.group.compose(self.group.inverse(gamma), eta)?;
        Some((self.values[eta] - self.values[shifted]).abs())
    }

    /// Positivity off the identity, symmetry, and properness on the
    /// truncation (every sublevel set `{ℓ ≤ ℓ(γ)}` lies in the ball of radius `|γ|`).
    pub fn check_axioms(&self) -> Vec<String> {
        let g = &self.group;
        let e = g.identity();
        let mut issues = Vec::new();
        if self.values[e] != 0.0 {
            issues.push(format!("ℓ(e) = {} ≠ 0", self.values[e]));
        }
        for i in 0..g.len() {
            if i != e && !(self.values[i] > 0.0) {
                issues.push(format!("ℓ({}) = {} is not positive", g.label(i), self.values[i]));
            }
            let inv = g.inverse(i);
            if self.values[i] != self.values[inv] {
                issues.push(format!("ℓ({}) ≠ ℓ({})", g.label(i), g.label(inv)));
            }
        }
        let radius = g.radius();
        let mut shell_max = vec![0.0f64; radius + 1];
        let mut shell_min = vec![f64::INFINITY; radius + 1];
        for i in 0..g.len() {
            let r = g.norm(i);
            shell_max[r] = shell_max[r].max(self.values[i]);
            shell_min[r] = shell_min[r].min(self.values[i]);
        }
        for r in 1..=radius {
            if !(shell_min[r] > shell_max[r - 1]) {
                issues.push(format!("properness: shell {r} reaches below shell {}", r - 1));
            }
        }
        issues
    }
}

/// `ℓ^α(k) = 2 ∫_0^{1/2} (1 − cos 2πkt) / t^{1+2α} dt` for `|k| ≤ R`.
pub fn circle_dual_length(alpha: f64, radius: usize, nodes: usize) -> Result<LengthFunction> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::param(format!("circle dual length needs 0 < α < 1/2, got {alpha}")));
    }
    let group = GroupModel::integers(radius)?;
    let gl = GaussLegendre::new(NonZeroUsize::new(nodes.max(2)).expect("nonzero"));
    let half: Vec<f64> = (0..=radius).map(|k| circle_length_value(alpha, k as u64, &gl)).collect();
    let values = (0..group.len()).map(|i| half[group.norm(i)]).collect();
    Ok(LengthFunction { group, values, source: LengthSource::CircleQuadrature, alpha, d_f: 1.0, param: nodes.max(2) as f64 })
}

/// One value of the circle length function.
///
/// `[0, δ]` with `δ = 1/(2πk)` is integrated from the cosine series term by
/// term; the rest uses Gauss–Legendre panels no longer than their distance to
/// the origin or a quarter period.
pub fn circle_length_value(alpha: f64, k: u64, gl: &GaussLegendre) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let omega = 2.0 * std::f64::consts::PI * k as f64;
    let delta = (1.0 / omega).min(0.5);
    let e = 2.0 * alpha;
    let mut head = 0.0;
    let mut term = 1.0;
    for j in 1..=20 {
        // term = (ωδ)^{2j} / (2j)!
        term *= (omega * delta).powi(2) / ((2 * j - 1) * (2 * j)) as f64;
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        head += sign * term * delta.powf(-e) / (2.0 * j as f64 - e);
        if term < 1e-18 {
            break;
        }
    }
    let quarter = 0.25 / k as f64;
    let mut tail = 0.0;
    let mut a = delta;
    while a < 0.5 {
        let h = a.min(quarter).min(0.5 - a);
        tail += gl.integrate(a, a + h, |t| (1.0 - (omega * t).cos()) * t.powf(-1.0 - e));
        a += h;
    }
    2.0 * (head + tail)
}

/// `ℓ^α(χ)` on characters of depth ≤ R of `(ℤ/N)^ℕ`: the closed-form
/// eigenvalue at level `depth(χ) − 1`.
pub fn cantor_dual_length(branching: usize, lambda: f64, alpha: f64, radius: usize) -> Result<LengthFunction> {
    if !(lambda > 1.0) || !(alpha > 0.0) {
        return Err(Error::param(format!("cantor dual length needs λ > 1, α > 0; got λ = {lambda}, α = {alpha}")));
    }
    let group = GroupModel::cantor_dual(branching, radius)?;
    let per_depth: Vec<f64> = (0..=radius)
        .map(|m| if m == 0 { 0.0 } else { cantor_eigenvalue(branching, lambda, alpha, m - 1) })
        .collect();
    let values = (0..group.len()).map(|i| per_depth[group.norm(i)]).collect();
    let d_f = (branching as f64).ln() / lambda.ln();
    Ok(LengthFunction { group, values, source: LengthSource::CantorExact, alpha, d_f, param: lambda })
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub gamma: String,
    pub p: f64,
    /// `(R', Σ_{|η| ≤ R'} ℓ_γ(η)^p)`.
    pub partial_sums: Vec<(usize, f64)>,
    /// Fitted exponent of `ℓ_γ(η) ~ |η|^a` (integer groups).
    pub decay_exponent: Option<f64>,
    /// Shell beyond which the partial sums are exactly constant (Cantor groups).
    pub stable_from: Option<usize>,
    pub summability_supported: bool,
    /// The sufficient exponent `p(α, 1)`, when defined.
    pub sufficient_p: Option<f64>,
}

pub fn translation_tail_report(ell: &LengthFunction, gamma: usize, p: f64) -> Result<TailReport> {
    let g = &ell.group;
    if gamma >= g.len() {
        return Err(Error::param(format!("γ index {gamma} outside the truncation")));
    }
    if !(p >= 1.0) {
        return Err(Error::param(format!("p must be ≥ 1, got {p}")));
    }
    let radius = g.radius();
    let mut shell = vec![0.0; radius + 1];
    let mut by_norm: Vec<(usize, f64)> = Vec::new();
    for eta in 0..g.len() {
        if let Some(v) = ell.increment(gamma, eta) {
            shell[g.norm(eta)] += v.powf(p);
            if let Some(k) = g.integer(eta) {
                if k > 0 {
                    by_norm.push((k as usize, v));
                }
            }
        }
    }
    let mut acc = 0.0;
    let partial_sums: Vec<(usize, f64)> = shell
        .iter()
        .enumerate()
        .map(|(r, s)| {
            acc += s;
            (r, acc)
        })
        .collect();
    let sufficient_p = p_threshold(ell.alpha, 1.0, ell.d_f).ok();
    let (decay_exponent, stable_from, supported) = match g {
        GroupModel::Integers { .. } => {
            let gnorm = g.norm(gamma);
            let lo = (radius / 4).max(2 * gnorm).max(1);
            let hi = radius.saturating_sub(gnorm);
            let (xs, ys): (Vec<f64>, Vec<f64>) = by_norm
                .iter()
                .filter(|(k, v)| *k >= lo && *k <= hi && *v > 0.0)
                .map(|(k, v)| ((*k as f64).ln(), v.ln()))
                .unzip();
            if gnorm == 0 {
                (None, Some(0), true)
            } else if xs.len() >= 2 {
                let slope = linear_fit(&xs, &ys).0;
                (Some(slope), None, slope * p < -1.0)
            } else {
                (None, None, false)
            }
        }
        GroupModel::CantorDual { .. } => {
            let last = partial_sums.last().map_or(0.0, |s| s.1);
            let from = partial_sums.iter().find(|s| s.1 == last).map(|s| s.0);
            (None, from, from.is_some_and(|f| f <= g.norm(gamma)))
        }
    };
    Ok(TailReport {
        gamma: g.label(gamma),
        p,
        partial_sums,
        decay_exponent,
        stable_from,
        summability_supported: supported,
        sufficient_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // 30-digit reference values of 2∫_0^{1/2}(1−cos 2πkt)t^{−1−2α}dt.
    #[allow(clippy::excessive_precision)]
    const REFERENCE: [(f64, u64, f64); 12] = [
        (0.1, 1, 4.309_913_736_292_182_197_7),
        (0.1, 2, 6.943_169_894_540_049_468_6),
        (0.1, 7, 12.106_775_001_691_300_262),
        (0.1, 40, 21.955_247_488_489_384_684),
        (0.2, 1, 5.718_314_129_998_243_864_7),
        (0.2, 2, 10.061_958_591_079_571_241),
        (0.2, 7, 20.759_573_826_825_248_296),
        (0.2, 40, 48.353_537_359_395_654_108),
        (0.4, 1, 10.692_884_068_563_637_644),
        (0.4, 2, 22.642_937_055_111_647_539),
        (0.4, 7, 68.822_106_442_182_154_924),
        (0.4, 40, 290.773_166_122_693_183_14),
    ];

    #[test]
    fn circle_quadrature_reference() {
        let gl = GaussLegendre::new(NonZeroUsize::new(DEFAULT_QUADRATURE_NODES).unwrap());
        for (alpha, k, want) in REFERENCE {
            let got = circle_length_value(alpha, k, &gl);
            assert!((got - want).abs() <= 1e-10 * want, "α={alpha} k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn circle_axioms() {
        let ell = circle_dual_length(0.2, 16, DEFAULT_QUADRATURE_NODES).unwrap();
        assert!(ell.check_axioms().is_empty(), "{:?}", ell.check_axioms());
        assert!(circle_dual_length(0.5, 4, 20).is_err());
    }

    #[test]
    fn cantor_values() {
        let ell = cantor_dual_length(2, 2.0, 0.3, 4).unwrap();
        assert!(ell.check_axioms().is_empty());
        assert_eq!(ell.value(1), 1.0);
        assert_eq!(ell.value(0), 0.0);
    }

    #[test]
    fn identity_tail_is_zero() {
        let ell = circle_dual_length(0.2, 8, 20).unwrap();
        let rep = translation_tail_report(&ell, ell.group.identity(), 2.0).unwrap();
        assert!(rep.partial_sums.iter().all(|s| s.1 == 0.0));
    }
}
