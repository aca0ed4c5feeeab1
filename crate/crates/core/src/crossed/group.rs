use serde::Serialize;

use crate::error::{Error, Result};

/// Truncations of the discrete groups acting in the crossed products.
///
/// `Integers { radius }` is the ball `[−R, R] ⊂ ℤ`, the dual of the circle;
/// composition leaving the ball is reported as `None`. `CantorDual` is the
/// subgroup of `⊕ ℤ/N` supported on the first `depth` coordinates, a finite
/// group, so nothing ever leaves it.
///
/// Cantor characters are indexed little-endian, `c ↦ Σ c_k N^{k−1}`, so the
/// characters of depth at most `m` occupy the first `N^m` indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GroupModel {
    Integers { radius: usize },
    CantorDual { branching: usize, depth: usize },
}

impl GroupModel {
    pub fn integers(radius: usize) -> Result<Self> {
        if radius < 1 {
            return Err(Error::param("integer truncation radius must be ≥ 1"));
        }
        Ok(GroupModel::Integers { radius })
    }

    pub fn cantor_dual(branching: usize, depth: usize) -> Result<Self> {
        if branching < 2 || depth < 1 {
            return Err(Error::param(format!("cantor dual needs N ≥ 2, R ≥ 1; got N = {branching}, R = {depth}")));
        }
        match branching.checked_pow(depth as u32) {
            Some(n) if n <= crate::spaces::MAX_CANTOR_POINTS => Ok(GroupModel::CantorDual { branching, depth }),
            _ => Err(Error::param(format!("cantor dual N^R = {branching}^{depth} is too large"))),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            GroupModel::Integers { radius } => 2 * radius + 1,
            GroupModel::CantorDual { branching, depth } => branching.pow(depth as u32),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radius(&self) -> usize {
        match *self {
            GroupModel::Integers { radius } => radius,
            GroupModel::CantorDual { depth, .. } => depth,
        }
    }

    pub fn identity(&self) -> usize {
        match *self {
            GroupModel::Integers { radius } => radius,
            GroupModel::CantorDual { .. } => 0,
        }
    }

    /// The integer `k` behind index `i` of an integer ball.
    pub fn integer(&self, i: usize) -> Option<i64> {
        match *self {
            GroupModel::Integers { radius } => Some(i as i64 - radius as i64),
            _ => None,
        }
    }

    pub fn index_of_integer(&self, k: i64) -> Option<usize> {
        match *self {
            GroupModel::Integers { radius } if k.unsigned_abs() as usize <= radius => Some((k + radius as i64) as usize),
            _ => None,
        }
    }

    /// Coordinates `(c_1, …, c_R)` in `0..N` of a Cantor character.
    pub fn coords(&self, i: usize) -> Option<Vec<u8>> {
        match *self {
            GroupModel::CantorDual { branching, depth } => {
                let mut out = vec![0u8; depth];
                let mut r = i;
                for c in out.iter_mut() {
                    *c = (r % branching) as u8;
                    r /= branching;
                }
                Some(out)
            }
            _ => None,
        }
    }

    pub fn index_of_coords(&self, c: &[u8]) -> Option<usize> {
        match *self {
            GroupModel::CantorDual { branching, depth } => {
                let trimmed_len = c.iter().rposition(|&d| d != 0).map_or(0, |p| p + 1);
                if trimmed_len > depth || c.iter().any(|&d| d as usize >= branching) {
                    return None;
                }
                Some(c[..trimmed_len].iter().rev().fold(0, |acc, &d| acc * branching + d as usize))
            }
            _ => None,
        }
    }

    /// `|k|` on integers, the deepest nonzero coordinate on Cantor characters.
    pub fn norm(&self, i: usize) -> usize {
        match *self {
            GroupModel::Integers { .. } => self.integer(i).expect("integer").unsigned_abs() as usize,
            GroupModel::CantorDual { branching, .. } => {
                let (mut m, mut r) = (0, i);
                while r > 0 {
                    r /= branching;
                    m += 1;
                }
                m
            }
        }
    }

    /// `a·b`, or `None` when it leaves the truncation.
    pub fn compose(&self, a: usize, b: usize) -> Option<usize> {
        match *self {
            GroupModel::Integers { .. } => self.index_of_integer(self.integer(a)? + self.integer(b)?),
            GroupModel::CantorDual { branching, .. } => {
                let (ca, cb) = (self.coords(a)?, self.coords(b)?);
                let sum: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| ((*x as usize + *y as usize) % branching) as u8).collect();
                self.index_of_coords(&sum)
            }
        }
    }

    pub fn inverse(&self, a: usize) -> usize {
        match *self {
            GroupModel::Integers { radius } => 2 * radius - a,
            GroupModel::CantorDual { branching, .. } => {
                let c: Vec<u8> = self.coords(a).expect("cantor").iter().map(|&d| ((branching - d as usize) % branching) as u8).collect();
                self.index_of_coords(&c).expect("inverse stays inside")
            }
        }
    }

    /// `#(F ∩ γF)` computed in the whole group, not the truncation.
    pub fn overlap(&self, gamma: usize, set: &[usize]) -> usize {
        match *self {
            GroupModel::Integers { .. } => {
                let g = self.integer(gamma).expect("integer");
                let members: std::collections::HashSet<i64> = set.iter().map(|&a| self.integer(a).expect("integer")).collect();
                members.iter().filter(|&&a| members.contains(&(a + g))).count()
            }
            GroupModel::CantorDual { .. } => {
                let members: std::collections::HashSet<usize> = set.iter().copied().collect();
                members.iter().filter(|&&a| self.compose(gamma, a).is_some_and(|b| members.contains(&b))).count()
            }
        }
    }

    pub fn label(&self, i: usize) -> String {
        match *self {
            GroupModel::Integers { .. } => self.integer(i).expect("integer").to_string(),
            GroupModel::CantorDual { .. } => {
                let c = self.coords(i).expect("cantor");
                let m = self.norm(i);
                if m == 0 {
                    "e".into()
                } else {
                    c[..m].iter().map(|d| d.to_string()).collect::<Vec<_>>().join(".")
                }
            }
        }
    }

    pub fn parse_label(&self, s: &str) -> Result<usize> {
        let s = s.trim();
        let bad = || Error::Parse(format!("`{s}` is not an element of the truncated group"));
        match self {
            GroupModel::Integers { .. } => self.index_of_integer(s.parse().map_err(|_| bad())?).ok_or_else(bad),
            GroupModel::CantorDual { .. } => {
                if s == "e" {
                    return Ok(0);
                }
                let c: Vec<u8> = s.split('.').map(|d| d.parse::<u8>().map_err(|_| bad())).collect::<Result<_>>()?;
                self.index_of_coords(&c).ok_or_else(bad)
            }
        }
    }

    /// Associativity on in-truncation triples, identity, involutive inverse.
    pub fn check_axioms(&self) -> Vec<String> {
        let n = self.len();
        let e = self.identity();
        let mut issues = Vec::new();
        for a in 0..n {
            if self.compose(e, a) != Some(a) || self.compose(a, e) != Some(a) {
                issues.push(format!("identity fails on {}", self.label(a)));
            }
            if self.inverse(self.inverse(a)) != a {
                issues.push(format!("inverse not involutive on {}", self.label(a)));
            }
            if self.compose(a, self.inverse(a)) != Some(e) {
                issues.push(format!("{} · {}^-1 ≠ e", self.label(a), self.label(a)));
            }
        }
        // Sample evenly when the exhaustive cube is too large.
        let stride = ((n * n * n) as f64 / 2e6).cbrt().ceil().max(1.0) as usize;
        for a in (0..n).step_by(stride) {
            for b in (0..n).step_by(stride) {
                for c in (0..n).step_by(stride) {
                    let left = self.compose(a, b).and_then(|ab| self.compose(ab, c));
                    let right = self.compose(b, c).and_then(|bc| self.compose(a, bc));
                    if let (Some(l), Some(r)) = (left, right) {
                        if l != r {
                            issues.push(format!("associativity fails on ({a}, {b}, {c})"));
                        }
                    }
                }
            }
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_ball() {
        let g = GroupModel::integers(3).unwrap();
        assert_eq!(g.len(), 7);
        let (two, two_b) = (g.index_of_integer(2).unwrap(), g.index_of_integer(2).unwrap());
        assert_eq!(g.compose(two, two_b), None);
        assert_eq!(g.integer(g.inverse(two)), Some(-2));
        assert!(g.check_axioms().is_empty());
        assert_eq!(g.parse_label("-3").unwrap(), 0);
    }

    #[test]
    fn cantor_characters() {
        let g = GroupModel::cantor_dual(3, 3).unwrap();
        assert_eq!(g.len(), 27);
        let a = g.index_of_coords(&[1, 2]).unwrap();
        assert_eq!(g.norm(a), 2);
        assert_eq!(g.label(a), "1.2");
        assert_eq!(g.parse_label("1.2").unwrap(), a);
        assert_eq!(g.coords(g.inverse(a)).unwrap(), vec![2, 1, 0]);
        assert!(g.check_axioms().is_empty());
        assert_eq!(g.label(0), "e");
    }

    #[test]
    fn overlaps() {
        let g = GroupModel::integers(4).unwrap();
        let f: Vec<usize> = [0, 1, 2].iter().map(|&k| g.index_of_integer(k).unwrap()).collect();
        assert_eq!(g.overlap(g.identity(), &f), 3);
        assert_eq!(g.overlap(g.index_of_integer(1).unwrap(), &f), 2);
        assert_eq!(g.overlap(g.index_of_integer(-4).unwrap(), &f), 0);
    }
}
