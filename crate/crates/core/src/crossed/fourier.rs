use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::length::{cantor_dual_length, circle_dual_length, DEFAULT_QUADRATURE_NODES};
use crate::error::Result;
use crate::laplacian::GeneratorMatrix;
use crate::spaces::FiniteSpace;

#[derive(Clone, Debug, Serialize)]
pub struct FourierReport {
    /// `max_{c≠c'} |(UΔU^*)_{cc'}|`.
    pub max_offdiag: f64,
    /// `max_c |(UΔU^*)_{cc} − ℓ(c)| / max(1, ℓ(c))`.
    pub max_diag_error: f64,
    pub diagonal: Vec<f64>,
    pub expected: Vec<f64>,
}

/// `D_{cc'} = Σ_x w_x conj(χ_c(x)) (Δ χ_{c'})(x)` for the given characters.
fn conjugate(space: &FiniteSpace, gen: &GeneratorMatrix, chars: &[Vec<Complex64>]) -> Result<DMatrix<Complex64>> {
    let n = chars.len();
    let w = space.weights();
    let images: Vec<Vec<Complex64>> = chars.iter().map(|c| gen.apply(c)).collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |a, b| chars[a].iter().zip(&images[b]).zip(w).map(|((x, y), &wt)| x.conj() * y * wt).sum()))
}

fn offdiag(d: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            if i != j {
                worst = worst.max(d[(i, j)].norm());
            }
        }
    }
    worst
}

/// Conjugate `Δ_α` on `cantor(N, λ, L)` by the character transform.
pub fn cantor_fourier_check(branching: usize, lambda: f64, alpha: f64, depth: usize) -> Result<FourierReport> {
    let space = FiniteSpace::cantor(branching, lambda, depth)?;
    let gen = GeneratorMatrix::assemble(&space, alpha)?;
    let ell = cantor_dual_length(branching, lambda, alpha, depth)?;
    let g = &ell.group;
    let chars: Vec<Vec<Complex64>> = (0..g.len())
        .map(|c| {
            let coords = g.coords(c).expect("cantor");
            (0..space.len())
                .map(|x| {
                    let word = space.word(x).expect("cantor");
                    let phase: usize = coords.iter().zip(&word).map(|(ci, xi)| *ci as usize * (*xi as usize - 1)).sum();
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (phase % branching) as f64 / branching as f64)
                })
                .collect()
        })
        .collect();
    let d = conjugate(&space, &gen, &chars)?;
    let diagonal: Vec<f64> = (0..g.len()).map(|c| d[(c, c)].re).collect();
    let max_diag_error = diagonal
        .iter()
        .zip(&ell.values)
        .map(|(a, b)| (a - b).abs() / b.max(1.0))
        .fold(0.0, f64::max);
    Ok(FourierReport { max_offdiag: offdiag(&d), max_diag_error, diagonal, expected: ell.values.clone() })
}

#[derive(Clone, Debug, Serialize)]
pub struct CircleFourierReport {
    pub max_offdiag: f64,
    pub frequencies: Vec<i64>,
    /// Eigenvalues of the circulant generator on `circle(n)`.
    pub discrete: Vec<f64>,
    /// The continuum length function at the same frequencies.
    pub continuum: Vec<f64>,
    pub max_relative_gap: f64,
}

/// DFT diagonalisation of `Δ_α` on `circle(n)`, compared with `ℓ^α(k)`.
pub fn circle_fourier_check(n: usize, alpha: f64) -> Result<CircleFourierReport> {
    let space = FiniteSpace::circle(n)?;
    let gen = GeneratorMatrix::assemble(&space, alpha)?;
    let lo = -(((n - 1) / 2) as i64);
    let frequencies: Vec<i64> = (lo..lo + n as i64).collect();
    let chars: Vec<Vec<Complex64>> = frequencies
        .iter()
        .map(|&k| {
            (0..n)
                .map(|x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((k * x as i64).rem_euclid(n as i64)) as f64 / n as f64))
                .collect()
        })
        .collect();
    let d = conjugate(&space, &gen, &chars)?;
    let discrete: Vec<f64> = (0..n).map(|i| d[(i, i)].re).collect();
    let radius = frequencies.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(1).max(1);
    let ell = circle_dual_length(alpha, radius, DEFAULT_QUADRATURE_NODES)?;
    let continuum: Vec<f64> =
        frequencies.iter().map(|&k| ell.values[ell.group.index_of_integer(k).expect("inside")]).collect();
    let max_relative_gap = discrete
        .iter()
        .zip(&continuum)
        .filter(|(_, c)| **c > 0.0)
        .map(|(a, c)| (a - c).abs() / c)
        .fold(0.0, f64::max);
    Ok(CircleFourierReport { max_offdiag: offdiag(&d), frequencies, discrete, continuum, max_relative_gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_small() {
        let r = cantor_fourier_check(2, 2.0, 0.2, 3).unwrap();
        assert!(r.max_offdiag <= 1e-10, "{}", r.max_offdiag);
        assert!(r.max_diag_error <= 1e-10);
        assert!(r.diagonal[0].abs() < 1e-12);
    }

    #[test]
    fn circle_small() {
        let r = circle_fourier_check(16, 0.2).unwrap();
        assert!(r.max_offdiag <= 1e-10);
        assert!(r.max_relative_gap.is_finite());
    }
}
