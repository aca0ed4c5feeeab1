//! Finite models of Ahlfors regular compact metric-measure spaces.
//!
//! A [`FiniteSpace`] is a finite point set carrying a metric, positive
//! measure atoms and the declared fractal and walk dimensions. Atoms stand
//! for the masses of the cells of the continuum space, so every integral is a
//! weighted sum over points.
//!
//! Three families are supported:
//!
//! * `cantor(N, λ, L)`: words of length `L` over `{1..N}` with the ultrametric
//!   `λ^{-(k-1)}` (`k` the first differing coordinate) and Bernoulli atoms;
//! * `circle(n)`: `n` equispaced points with the normalised arc metric;
//! * custom spaces with an explicit distance table, read from file.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::Scalar;

/// Upper bound on `N^L` for Cantor spaces.
pub const MAX_CANTOR_POINTS: usize = 100_000;

/// Spaces up to this size get an exhaustive triangle check.
const EXHAUSTIVE_TRIPLE_LIMIT: usize = 200;
const RANDOM_TRIPLES: usize = 100_000;
const MASS_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WalkDimension {
    Finite(f64),
    Infinite,
}

impl WalkDimension {
    pub fn value(self) -> f64 {
        match self {
            WalkDimension::Finite(v) => v,
            WalkDimension::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for WalkDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WalkDimension::Finite(v) => write!(f, "{v}"),
            WalkDimension::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Cantor,
    Circle,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
enum Geometry {
    Cantor { branching: usize, lambda: f64, depth: usize, scale: Vec<f64> },
    Circle { n: usize },
    Custom { dist: Vec<f64> },
}

/// A finite metric-measure space.
///
/// Immutable after construction. Distances for the Cantor and circle
/// families are computed on demand from their parameters; custom spaces keep
/// a dense table.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSpace {
    ids: Vec<String>,
    weights: Vec<f64>,
    total_mass: f64,
    d_f: f64,
    d_w: WalkDimension,
    diam: f64,
    geometry: Geometry,
}

impl FiniteSpace {
    /// The depth-`depth` approximation of `{1..N}^ℕ` with the `λ`-ultrametric
    /// and the Bernoulli measure.
    pub fn cantor(branching: usize, lambda: f64, depth: usize) -> Result<Self> {
        if branching < 2 {
            return Err(Error::param(format!("cantor: N must be ≥ 2, got {branching}")));
        }
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::param(format!("cantor: λ must be > 1, got {lambda}")));
        }
        if depth < 1 {
            return Err(Error::param("cantor: depth L must be ≥ 1"));
        }
        let n = checked_pow(branching, depth)
            .filter(|&n| n <= MAX_CANTOR_POINTS)
            .ok_or_else(|| {
                Error::param(format!(
                    "cantor: N^L = {branching}^{depth} exceeds the {MAX_CANTOR_POINTS}-point guard"
                ))
            })?;
        let ids = (0..n).map(|i| word_label(&cantor_word(branching, depth, i), branching)).collect();
        // scale[k] = λ^{-k}: distance when the first differing coordinate is k+1.
        let scale = (0..depth).map(|k| lambda.powi(-(k as i32))).collect();
        Ok(FiniteSpace {
            ids,
            weights: vec![1.0 / n as f64; n],
            total_mass: 1.0,
            d_f: (branching as f64).ln() / lambda.ln(),
            d_w: WalkDimension::Infinite,
            diam: 1.0,
            geometry: Geometry::Cantor { branching, lambda, depth, scale },
        })
    }

    /// `n` equispaced points on the unit-length circle with the arc metric.
    pub fn circle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::param(format!("circle: n must be ≥ 3, got {n}")));
        }
        Ok(FiniteSpace {
            ids: (0..n).map(|i| i.to_string()).collect(),
            weights: vec![1.0 / n as f64; n],
            total_mass: 1.0,
            d_f: 1.0,
            d_w: WalkDimension::Finite(2.0),
            diam: (n / 2) as f64 / n as f64,
            geometry: Geometry::Circle { n },
        })
    }

    /// A space with an explicit row-major distance table, validated.
    pub fn custom(
        ids: Vec<String>,
        weights: Vec<f64>,
        dist: Vec<f64>,
        d_f: f64,
        d_w: WalkDimension,
    ) -> Result<Self> {
        let n = ids.len();
        if weights.len() != n {
            return Err(Error::Dimension { expected: n, got: weights.len() });
        }
        if dist.len() != n * n {
            return Err(Error::Dimension { expected: n * n, got: dist.len() });
        }
        let total_mass = weights.iter().sum();
        let diam = dist.iter().copied().fold(0.0, f64::max);
        let space = FiniteSpace {
            ids,
            weights,
            total_mass,
            d_f,
            d_w,
            diam,
            geometry: Geometry::Custom { dist },
        };
        space.ensure_valid()?;
        Ok(space)
    }

    /// Rescale the atoms so that they sum to `mass`.
    pub fn with_total_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::param(format!("total_mass must be positive, got {mass}")));
        }
        let factor = mass / self.total_mass;
        for w in &mut self.weights {
            *w *= factor;
        }
        self.total_mass = mass;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn d_f(&self) -> f64 {
        self.d_f
    }

    pub fn d_w(&self) -> WalkDimension {
        self.d_w
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    pub fn kind(&self) -> SpaceKind {
        match self.geometry {
            Geometry::Cantor { .. } => SpaceKind::Cantor,
            Geometry::Circle { .. } => SpaceKind::Circle,
            Geometry::Custom { .. } => SpaceKind::Custom,
        }
    }

    pub fn is_ultrametric(&self) -> bool {
        self.kind() == SpaceKind::Cantor
    }

    /// `(N, λ, L)` for Cantor spaces.
    pub fn cantor_params(&self) -> Option<(usize, f64, usize)> {
        match self.geometry {
            Geometry::Cantor { branching, lambda, depth, .. } => Some((branching, lambda, depth)),
            _ => None,
        }
    }

    pub fn circle_size(&self) -> Option<usize> {
        match self.geometry {
            Geometry::Circle { n } => Some(n),
            _ => None,
        }
    }

    pub fn point_index(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    /// Digits (in `1..=N`) of point `i` of a Cantor space.
    pub fn word(&self, i: usize) -> Option<Vec<u8>> {
        match self.geometry {
            Geometry::Cantor { branching, depth, .. } => Some(cantor_word(branching, depth, i)),
            _ => None,
        }
    }

    /// Index of the Cantor point with the given digits.
    pub fn index_of_word(&self, word: &[u8]) -> Option<usize> {
        let (branching, _, depth) = self.cantor_params()?;
        if word.len() != depth || word.iter().any(|&d| d == 0 || d as usize > branching) {
            return None;
        }
        Some(word.iter().fold(0, |acc, &d| acc * branching + (d as usize - 1)))
    }

    /// First coordinate (1-based) where two Cantor points differ.
    pub fn first_difference(&self, i: usize, j: usize) -> Option<usize> {
        let (branching, _, depth) = self.cantor_params()?;
        if i == j {
            return None;
        }
        let mut block = checked_pow(branching, depth - 1).unwrap_or(1);
        for k in 1..=depth {
            if i / block != j / block {
                return Some(k);
            }
            block /= branching;
        }
        None
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.geometry {
            Geometry::Cantor { scale, .. } => {
                let k = self.first_difference(i, j).expect("distinct points differ somewhere");
                scale[k - 1]
            }
            Geometry::Circle { n } => {
                let d = i.abs_diff(j);
                d.min(n - d) as f64 / *n as f64
            }
            Geometry::Custom { dist } => dist[i * self.len() + j],
        }
    }

    /// Row-major dense distance table.
    pub fn dist_table(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.dist(i, j);
            }
        }
        out
    }

    /// The snowflaked space `(X, d^ε, μ)`.
    ///
    /// Cantor spaces stay Cantor (with `λ ↦ λ^ε`); other spaces become custom.
    pub fn snowflake(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::param(format!("snowflake exponent must lie in (0,1), got {eps}")));
        }
        let d_w = match self.d_w {
            WalkDimension::Finite(v) => WalkDimension::Finite(v / eps),
            WalkDimension::Infinite => WalkDimension::Infinite,
        };
        let geometry = match &self.geometry {
            Geometry::Cantor { branching, lambda, depth, scale } => Geometry::Cantor {
                branching: *branching,
                lambda: lambda.powf(eps),
                depth: *depth,
                scale: scale.iter().map(|s| s.powf(eps)).collect(),
            },
            _ => Geometry::Custom { dist: self.dist_table().into_iter().map(|d| d.powf(eps)).collect() },
        };
        Ok(FiniteSpace {
            ids: self.ids.clone(),
            weights: self.weights.clone(),
            total_mass: self.total_mass,
            d_f: self.d_f / eps,
            d_w,
            diam: self.diam.powf(eps),
            geometry,
        })
    }

    /// Mass of the closed ball `B̄(x, r)`.
    pub fn ball_mass(&self, x: usize, r: f64) -> f64 {
        let cut = r * (1.0 + 1e-12);
        (0..self.len()).filter(|&y| self.dist(x, y) <= cut).map(|y| self.weights[y]).sum()
    }

    /// Ratios `μ(B̄(x,r)) / r^{d_f}` for every point and radius.
    pub fn ahlfors_report(&self, radii: &[f64]) -> Result<AhlforsReport> {
        if radii.is_empty() {
            return Err(Error::param("ahlfors_report: empty radius list"));
        }
        if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r <= self.diam * (1.0 + 1e-12))) {
            return Err(Error::param(format!("radius {r} outside (0, diam = {}]", self.diam)));
        }
        let mut rows = Vec::with_capacity(radii.len() * self.len());
        for x in 0..self.len() {
            for &r in radii {
                let mass = self.ball_mass(x, r);
                rows.push(AhlforsRow { point: x, radius: r, mass, ratio: mass / r.powf(self.d_f) });
            }
        }
        let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        Ok(AhlforsReport { rows, min_ratio, max_ratio })
    }

    /// `max_{x≠y} |f(x) − f(y)| / d(x,y)^β`.
    pub fn holder_seminorm<T: Scalar>(&self, f: &[T], beta: f64) -> Result<f64> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::param(format!("Hölder exponent must lie in (0,1], got {beta}")));
        }
        self.check_len(f.len())?;
        let mut best = 0.0f64;
        for x in 0..self.len() {
            for y in (x + 1)..self.len() {
                let q = (f[x] - f[y]).modulus() / self.dist(x, y).powf(beta);
                best = best.max(q);
            }
        }
        Ok(best)
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::Dimension { expected: self.len(), got });
        }
        Ok(())
    }

    /// μ-weighted inner product `Σ w_x conj(f(x)) g(x)`.
    pub fn inner<T: Scalar>(&self, f: &[T], g: &[T]) -> T {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .fold(T::zero(), |acc, ((a, b), &w)| acc + a.conjugate() * *b * T::from_real(w))
    }

    pub fn norm<T: Scalar>(&self, f: &[T]) -> f64 {
        self.inner(f, f).real().max(0.0).sqrt()
    }

    pub fn mean<T: Scalar>(&self, f: &[T]) -> T {
        let s = f.iter().zip(&self.weights).fold(T::zero(), |acc, (a, &w)| acc + *a * T::from_real(w));
        s / T::from_real(self.total_mass)
    }

    /// Every violated axiom; empty when the space is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let n = self.len();
        if n < 2 {
            issues.push(format!("a space needs at least 2 points, got {n}"));
        }
        let mut seen = HashMap::new();
        for (i, id) in self.ids.iter().enumerate() {
            if let Some(j) = seen.insert(id.as_str(), i) {
                issues.push(format!("duplicate point id `{id}` (records {j} and {i})"));
            }
        }
        for (i, &w) in self.weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                issues.push(format!("weight of `{}` must be positive, got {w}", self.ids[i]));
            }
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - self.total_mass).abs() > MASS_RTOL * self.total_mass.abs().max(f64::MIN_POSITIVE) {
            issues.push(format!("weights sum to {sum}, expected total_mass {}", self.total_mass));
        }
        if !(self.d_f > 0.0) || !self.d_f.is_finite() {
            issues.push(format!("d_f must be positive, got {}", self.d_f));
        }
        if let WalkDimension::Finite(v) = self.d_w {
            if !(v > 0.0) {
                issues.push(format!("d_w must be positive or inf, got {v}"));
            }
        }
        issues.extend(self.metric_violations());
        issues
    }

    fn ensure_valid(&self) -> Result<()> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpace(issues))
        }
    }

    fn metric_violations(&self) -> Vec<String> {
        const MAX_REPORTED: usize = 10;
        let n = self.len();
        let mut issues = Vec::new();
        let push = |issues: &mut Vec<String>, counter: &mut usize, msg: String| {
            *counter += 1;
            if *counter <= MAX_REPORTED {
                issues.push(msg);
            }
        };
        let (mut diag, mut sym, mut pos, mut tri, mut ultra) = (0, 0, 0, 0, 0);
        for i in 0..n {
            if self.raw_dist(i, i) != 0.0 {
                push(&mut issues, &mut diag, format!("dist({0},{0}) = {1} ≠ 0", self.ids[i], self.raw_dist(i, i)));
            }
            for j in (i + 1)..n {
                let (a, b) = (self.raw_dist(i, j), self.raw_dist(j, i));
                if a != b {
                    push(&mut issues, &mut sym, format!("symmetry: dist({},{}) = {a} ≠ dist({},{}) = {b}", self.ids[i], self.ids[j], self.ids[j], self.ids[i]));
                }
                if !(a > 0.0) || !a.is_finite() {
                    push(&mut issues, &mut pos, format!("positivity: dist({},{}) = {a} must be > 0", self.ids[i], self.ids[j]));
                }
            }
        }
        let ultrametric = self.is_ultrametric();
        let mut check = |x: usize, y: usize, z: usize, issues: &mut Vec<String>| {
            let (xy, yz, xz) = (self.raw_dist(x, y), self.raw_dist(y, z), self.raw_dist(x, z));
            let slack = 1e-12 * (xy + yz).max(1e-300);
            if xz > xy + yz + slack {
                push(issues, &mut tri, format!("triangle: dist({},{}) = {xz} > {xy} + {yz}", self.ids[x], self.ids[z]));
            }
            if ultrametric && xz > xy.max(yz) + slack {
                push(issues, &mut ultra, format!("ultrametric: dist({},{}) = {xz} > max({xy}, {yz})", self.ids[x], self.ids[z]));
            }
        };
        if n <= EXHAUSTIVE_TRIPLE_LIMIT {
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        check(x, y, z, &mut issues);
                    }
                }
            }
        } else {
            let mut r = rng::seeded(rng::DEFAULT_SEED);
            for _ in 0..RANDOM_TRIPLES {
                let (x, y, z) = (r.random_range(0..n), r.random_range(0..n), r.random_range(0..n));
                check(x, y, z, &mut issues);
            }
        }
        for (count, what) in [(diag, "diagonal"), (sym, "symmetry"), (pos, "positivity"), (tri, "triangle"), (ultra, "ultrametric")] {
            if count > MAX_REPORTED {
                issues.push(format!("... {} further {what} violations", count - MAX_REPORTED));
            }
        }
        issues
    }

    // Table lookup without the i == j shortcut, so validation sees stored diagonals.
    fn raw_dist(&self, i: usize, j: usize) -> f64 {
        match &self.geometry {
            Geometry::Custom { dist } => dist[i * self.len() + j],
            _ => self.dist(i, j),
        }
    }

    /// Serialise to the text space schema.
    pub fn to_toml(&self) -> String {
        let d_w = match self.d_w {
            WalkDimension::Finite(v) => DwField::Number(v),
            WalkDimension::Infinite => DwField::Text("inf".into()),
        };
        let mut file = SpaceFile {
            kind: self.kind(),
            d_f: Some(self.d_f),
            d_w: Some(d_w),
            total_mass: Some(self.total_mass),
            branching: None,
            lambda: None,
            depth: None,
            n: None,
            point: Vec::new(),
            dist: Vec::new(),
        };
        match &self.geometry {
            Geometry::Cantor { branching, lambda, depth, .. } => {
                file.branching = Some(*branching);
                file.lambda = Some(*lambda);
                file.depth = Some(*depth);
            }
            Geometry::Circle { n } => file.n = Some(*n),
            Geometry::Custom { .. } => {
                file.point = self
                    .ids
                    .iter()
                    .zip(&self.weights)
                    .map(|(id, &weight)| PointRecord { id: id.clone(), weight })
                    .collect();
                for i in 0..self.len() {
                    for j in (i + 1)..self.len() {
                        file.dist.push(DistRecord { a: self.ids[i].clone(), b: self.ids[j].clone(), value: self.dist(i, j) });
                    }
                }
            }
        }
        toml::to_string(&file).expect("space schema serialises")
    }
}

impl FromStr for FiniteSpace {
    type Err = Error;

    /// Parse the text space schema.
    fn from_str(text: &str) -> Result<Self> {
        let file: SpaceFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_space()
    }
}

/// Read and validate a space file.
pub fn load_space(path: impl AsRef<Path>) -> Result<FiniteSpace> {
    let text = std::fs::read_to_string(path)?;
    text.parse()
}

/// Resolve `cantor:N,λ,L`, `circle:n` or a path to a space file.
pub fn resolve_space(spec: &str) -> Result<FiniteSpace> {
    if let Some(rest) = spec.strip_prefix("cantor:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected cantor:N,λ,L, got `{spec}`")));
        }
        let n = parse_num::<usize>(parts[0], spec)?;
        let lambda = parse_num::<f64>(parts[1], spec)?;
        let depth = parse_num::<usize>(parts[2], spec)?;
        FiniteSpace::cantor(n, lambda, depth)
    } else if let Some(rest) = spec.strip_prefix("circle:") {
        FiniteSpace::circle(parse_num::<usize>(rest.trim(), spec)?)
    } else {
        load_space(spec)
    }
}

fn parse_num<T: FromStr>(s: &str, whole: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad number `{s}` in `{whole}`")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AhlforsRow {
    pub point: usize,
    pub radius: f64,
    pub mass: f64,
    pub ratio: f64,
}

/// Empirical Ahlfors bracket: `min_ratio ≤ μ(B̄(x,r))/r^{d_f} ≤ max_ratio`.
#[derive(Clone, Debug, Serialize)]
pub struct AhlforsReport {
    pub rows: Vec<AhlforsRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl AhlforsReport {
    pub fn bracket_factor(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }
}

/// A probability vector over the points of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    probs: Vec<f64>,
}

impl State {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::param("state: empty probability vector"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::param(format!("state: negative or non-finite entry {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("state: probabilities sum to {sum}, expected 1")));
        }
        Ok(State { probs })
    }

    pub fn dirac(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::param(format!("state: point {at} out of range for {n} points")));
        }
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Ok(State { probs })
    }

    pub fn uniform(n: usize) -> Self {
        State { probs: vec![1.0 / n as f64; n] }
    }

    /// A random state with exponential(1) masses, normalised.
    pub fn random(n: usize, rng: &mut rng::Rng) -> Self {
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let sum: f64 = raw.iter().sum();
        State { probs: raw.into_iter().map(|p| p / sum).collect() }
    }

    /// Parse `id,prob` lines (a header line and `#` comments are skipped).
    /// Points not listed get probability 0.
    pub fn from_csv(space: &FiniteSpace, text: &str) -> Result<Self> {
        let mut probs = vec![0.0; space.len()];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (Some(id), Some(p)) = (parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("state line {}: expected `id,prob`", lineno + 1)));
            };
            let Ok(p) = p.parse::<f64>() else {
                if lineno == 0 {
                    continue;
                }
                return Err(Error::Parse(format!("state line {}: bad probability `{p}`", lineno + 1)));
            };
            probs[space.point_index(id)?] += p;
        }
        State::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `φ(f) = Σ_x φ_x f(x)`.
    pub fn apply<T: Scalar>(&self, f: &[T]) -> T {
        self.probs.iter().zip(f).fold(T::zero(), |acc, (&p, &v)| acc + v * T::from_real(p))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum DwField {
    Number(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct PointRecord {
    id: String,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DistRecord {
    a: String,
    b: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    kind: SpaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d_w: Option<DwField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    total_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branching: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    point: Vec<PointRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    dist: Vec<DistRecord>,
}

impl SpaceFile {
    fn d_w(&self) -> Result<Option<WalkDimension>> {
        match &self.d_w {
            None => Ok(None),
            Some(DwField::Number(v)) => Ok(Some(WalkDimension::Finite(*v))),
            Some(DwField::Text(t)) if matches!(t.as_str(), "inf" | "infinite" | "infinity") => {
                Ok(Some(WalkDimension::Infinite))
            }
            Some(DwField::Text(t)) => Err(Error::Parse(format!("d_w must be a number or \"inf\", got `{t}`"))),
        }
    }

    fn into_space(self) -> Result<FiniteSpace> {
        let d_w = self.d_w()?;
        let space = match self.kind {
            SpaceKind::Cantor => {
                let (Some(branching), Some(lambda), Some(depth)) = (self.branching, self.lambda, self.depth) else {
                    return Err(Error::Parse("cantor space needs `branching`, `lambda` and `depth`".into()));
                };
                FiniteSpace::cantor(branching, lambda, depth)?
            }
            SpaceKind::Circle => {
                let Some(n) = self.n else {
                    return Err(Error::Parse("circle space needs `n`".into()));
                };
                FiniteSpace::circle(n)?
            }
            SpaceKind::Custom => return self.into_custom(d_w),
        };
        let mut issues = Vec::new();
        if let Some(d_f) = self.d_f {
            if (d_f - space.d_f).abs() > 1e-9 * space.d_f {
                issues.push(format!("declared d_f {d_f} disagrees with the family's {}", space.d_f));
            }
        }
        if let Some(d_w) = d_w {
            if d_w != space.d_w {
                issues.push(format!("declared d_w {d_w} disagrees with the family's {}", space.d_w));
            }
        }
        if !issues.is_empty() {
            return Err(Error::InvalidSpace(issues));
        }
        match self.total_mass {
            Some(m) => space.with_total_mass(m),
            None => Ok(space),
        }
    }

    fn into_custom(self, d_w: Option<WalkDimension>) -> Result<FiniteSpace> {
        let mut issues = Vec::new();
        let d_f = self.d_f.unwrap_or_else(|| {
            issues.push("custom space needs `d_f`".into());
            1.0
        });
        let d_w = d_w.unwrap_or_else(|| {
            issues.push("custom space needs `d_w`".into());
            WalkDimension::Infinite
        });
        let n = self.point.len();
        let index: HashMap<&str, usize> = self.point.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
        let mut table = vec![f64::NAN; n * n];
        let mut listed = HashSet::new();
        for i in 0..n {
            table[i * n + i] = 0.0;
        }
        for rec in &self.dist {
            match (index.get(rec.a.as_str()), index.get(rec.b.as_str())) {
                (Some(&i), Some(&j)) => {
                    if i == j {
                        table[i * n + i] = rec.value;
                        continue;
                    }
                    // A record fills both directions unless the reverse is listed separately.
                    if !listed.contains(&(j, i)) {
                        table[j * n + i] = rec.value;
                    }
                    table[i * n + j] = rec.value;
                    listed.insert((i, j));
                }
                _ => issues.push(format!("distance record ({}, {}) names an unknown point", rec.a, rec.b)),
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if table[i * n + j].is_nan() {
                    issues.push(format!("missing distance record for ({}, {})", self.point[i].id, self.point[j].id));
                }
            }
        }
        let ids: Vec<String> = self.point.iter().map(|p| p.id.clone()).collect();
        let weights: Vec<f64> = self.point.iter().map(|p| p.weight).collect();
        let total_mass = self.total_mass.unwrap_or_else(|| weights.iter().sum());
        let diam = table.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        let space = FiniteSpace {
            ids,
            weights,
            total_mass,
            d_f,
            d_w,
            diam,
            geometry: Geometry::Custom { dist: table },
        };
        if issues.is_empty() {
            issues = space.validate();
        }
        if issues.is_empty() {
            Ok(space)
        } else {
            Err(Error::InvalidSpace(issues))
        }
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

fn cantor_word(branching: usize, depth: usize, mut i: usize) -> Vec<u8> {
    let mut word = vec![0u8; depth];
    for slot in word.iter_mut().rev() {
        *slot = (i % branching + 1) as u8;
        i /= branching;
    }
    word
}

fn word_label(word: &[u8], branching: usize) -> String {
    if branching <= 9 {
        word.iter().map(|d| char::from(b'0' + d)).collect()
    } else {
        word.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(".")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_point(d: f64) -> FiniteSpace {
        FiniteSpace::custom(
            vec!["a".into(), "b".into()],
            vec![0.5, 0.5],
            vec![0.0, d, d, 0.0],
            1.0,
            WalkDimension::Infinite,
        )
        .unwrap()
    }

    #[test]
    fn cantor_two_points() {
        let s = FiniteSpace::cantor(2, 2.0, 1).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dist(0, 1), 1.0);
        assert_eq!(s.weights(), &[0.5, 0.5]);
        assert_relative_eq!(s.d_f(), 1.0);
        assert_eq!(s.d_w(), WalkDimension::Infinite);
    }

    #[test]
    fn cantor_first_difference_metric() {
        let s = FiniteSpace::cantor(2, 2.0, 3).unwrap();
        let x = s.point_index("111").unwrap();
        let y = s.point_index("112").unwrap();
        assert_eq!(s.dist(x, y), 0.25);
        assert_eq!(s.dist(x, x), 0.0);
        assert_eq!(s.dist(s.point_index("121").unwrap(), s.point_index("211").unwrap()), 1.0);
        assert_eq!(s.word(y).unwrap(), vec![1, 1, 2]);
        assert_eq!(s.index_of_word(&[1, 1, 2]), Some(y));
    }

    #[test]
    fn cantor_rejects_bad_parameters() {
        assert!(FiniteSpace::cantor(1, 2.0, 3).is_err());
        assert!(FiniteSpace::cantor(2, 1.0, 3).is_err());
        assert!(FiniteSpace::cantor(2, 2.0, 0).is_err());
        assert!(FiniteSpace::cantor(10, 2.0, 6).is_err());
        assert!(FiniteSpace::cantor(10, 2.0, 5).is_ok());
    }

    #[test]
    fn circle_points() {
        let s = FiniteSpace::circle(4).unwrap();
        assert_eq!(s.dist(0, 2), 0.5);
        assert!(s.weights().iter().all(|&w| w == 0.25));
        assert_eq!(FiniteSpace::circle(6).unwrap().dist(0, 5), 1.0 / 6.0);
        assert!(FiniteSpace::circle(2).is_err());
    }

    #[test]
    fn built_spaces_satisfy_axioms() {
        for s in [
            FiniteSpace::cantor(2, 2.0, 4).unwrap(),
            FiniteSpace::cantor(3, 2.5, 3).unwrap(),
            FiniteSpace::circle(17).unwrap(),
            FiniteSpace::cantor(2, 2.0, 8).unwrap(),
        ] {
            assert!(s.validate().is_empty(), "{:?}", s.validate());
        }
    }

    #[test]
    fn snowflake_scales_distances_and_dimension() {
        assert_eq!(two_point(4.0).snowflake(0.5).unwrap().dist(0, 1), 2.0);
        let c = FiniteSpace::cantor(2, 2.0, 4).unwrap().snowflake(0.5).unwrap();
        assert_relative_eq!(c.d_f(), 2.0, epsilon = 1e-12);
        assert!(c.validate().is_empty());
        assert!(two_point(1.0).snowflake(1.0).is_err());
        assert!(two_point(1.0).snowflake(0.0).is_err());
    }

    #[test]
    fn snowflake_of_circle_is_a_metric() {
        let s = FiniteSpace::circle(12).unwrap().snowflake(0.3).unwrap();
        assert_eq!(s.kind(), SpaceKind::Custom);
        assert!(s.validate().is_empty());
    }

    #[test]
    fn ahlfors_full_ball() {
        let s = FiniteSpace::cantor(3, 2.0, 3).unwrap();
        let rep = s.ahlfors_report(&[s.diam()]).unwrap();
        let expect = 1.0 / s.diam().powf(s.d_f());
        assert!(rep.rows.iter().all(|r| (r.ratio - expect).abs() < 1e-12));
        assert!(s.ahlfors_report(&[]).is_err());
        assert!(s.ahlfors_report(&[2.0]).is_err());
    }

    #[test]
    fn ahlfors_circle_quarter() {
        // The closed arc ball of radius 1/4 on circle(64) holds 33 atoms.
        let s = FiniteSpace::circle(64).unwrap();
        let rep = s.ahlfors_report(&[0.25]).unwrap();
        for r in &rep.rows {
            assert_relative_eq!(r.ratio, 33.0 / 64.0 / 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn holder_examples() {
        let s = two_point(1.0);
        assert_eq!(s.holder_seminorm(&[0.0, 3.0], 1.0).unwrap(), 3.0);
        assert_eq!(s.holder_seminorm(&[2.0, 2.0], 0.5).unwrap(), 0.0);
        assert!(s.holder_seminorm(&[0.0, 1.0], 0.0).is_err());
        assert!(s.holder_seminorm(&[0.0], 1.0).is_err());
    }

    #[test]
    fn states() {
        assert!(State::new(vec![0.5, 0.5]).is_ok());
        assert!(State::new(vec![0.5, 0.6]).is_err());
        assert!(State::new(vec![-0.5, 1.5]).is_err());
        let s = FiniteSpace::cantor(2, 2.0, 2).unwrap();
        let st = State::from_csv(&s, "id,prob\n11,0.25\n22,0.75\n").unwrap();
        assert_eq!(st.probs(), &[0.25, 0.0, 0.0, 0.75]);
        assert!(State::from_csv(&s, "33,1.0").is_err());
        let mut r = rng::seeded(1);
        let st = State::random(10, &mut r);
        assert_relative_eq!(st.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}
