//! The acceptance suite, shared by the `verify-all` command and the test
//! target of the same purpose.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng as _;
use serde::Serialize;

use crate::commutator::{l2_energy_seminorm, random_symbols, truncation_fit, CommutatorOp};
use crate::crossed::{
    cantor_dual_length, cantor_fourier_check, circle_dual_length, Action, BaseSeminorm, CrossedElement,
    CrossedSystem, DEFAULT_QUADRATURE_NODES,
};
use crate::dyadic::DyadicSystem;
use crate::error::Result;
use crate::laplacian::{cantor_exact_for, GeneratorMatrix};
use crate::mk::{dirac_scan, mk_closed, mk_linsolve, mk_spectrum, mk_sup, truncation_convergence, RefinableState, SupConfig};
use crate::rng;
use crate::spaces::{FiniteSpace, State, WalkDimension};

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
    pub elapsed_s: f64,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}: {} ({:.2} s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.summary,
            self.elapsed_s
        )
    }
}

struct Builder {
    id: u8,
    title: &'static str,
    start: Instant,
    metrics: BTreeMap<String, f64>,
}

impl Builder {
    fn new(id: u8, title: &'static str) -> Self {
        Builder { id, title, start: Instant::now(), metrics: BTreeMap::new() }
    }

    fn metric(&mut self, key: impl Into<String>, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    fn finish(self, pass: bool, summary: String) -> Result<Criterion> {
        Ok(Criterion {
            id: self.id,
            title: self.title,
            pass,
            summary,
            metrics: self.metrics,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        })
    }
}

fn relative_spectrum_error(numeric: &[f64], exact: &[f64]) -> f64 {
    let floor = exact.get(1).copied().unwrap_or(1.0).abs();
    numeric.iter().zip(exact).map(|(a, b)| (a - b).abs() / b.abs().max(floor)).fold(0.0, f64::max)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

const C1_CONFIGS: [(usize, f64); 4] = [(2, 2.0), (2, 3.0), (3, 2.0), (3, 3.0)];
const C1_ORDERS: [f64; 3] = [0.25, 0.75, 1.25];
const C1_DEPTH: usize = 6;

/// Numeric eigenvalues of the assembled generator against the closed form.
pub fn criterion_1() -> Result<Criterion> {
    let mut b = Builder::new(1, "exact Cantor spectrum");
    let mut worst = 0.0f64;
    for (n, lambda) in C1_CONFIGS {
        let space = FiniteSpace::cantor(n, lambda, C1_DEPTH)?;
        for s in C1_ORDERS {
            let numeric = GeneratorMatrix::assemble(&space, s)?.spectrum()?;
            let exact = cantor_exact_for(&space, s)?;
            let err = relative_spectrum_error(&sorted(numeric.eigenvalues), &sorted(exact.eigenvalues));
            b.metric(format!("rel_err_N{n}_l{lambda}_s{s}"), err);
            worst = worst.max(err);
        }
    }
    b.metric("max_rel_err", worst);
    let elapsed = b.start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && elapsed < 60.0;
    b.finish(pass, format!("max relative error {worst:.2e} over 12 configurations (≤ 1e-10), {elapsed:.1} s (< 60 s)"))
}

/// Cantor order and circle order used for the Weyl exponent.
pub const WEYL_CANTOR_S: f64 = 0.75;
pub const WEYL_CIRCLE_S: f64 = 0.25;

pub fn criterion_2() -> Result<Criterion> {
    let mut b = Builder::new(2, "Weyl exponent");
    let cantor = FiniteSpace::cantor(2, 2.0, 8)?;
    let fit_c = cantor_exact_for(&cantor, WEYL_CANTOR_S)?.weyl_fit(None)?;
    let target_c = 2.0 * WEYL_CANTOR_S / cantor.d_f();
    let circle = FiniteSpace::circle(256)?;
    let fit_o = GeneratorMatrix::assemble(&circle, WEYL_CIRCLE_S)?.spectrum()?.weyl_fit(None)?;
    let target_o = 2.0 * WEYL_CIRCLE_S / circle.d_f();
    let (rc, ro) = ((fit_c.slope - target_c).abs() / target_c, (fit_o.slope - target_o).abs() / target_o);
    b.metric("cantor_slope", fit_c.slope);
    b.metric("cantor_target", target_c);
    b.metric("circle_slope", fit_o.slope);
    b.metric("circle_target", target_o);
    let elapsed = b.start.elapsed().as_secs_f64();
    let pass = rc <= 0.10 && ro <= 0.15 && elapsed < 30.0;
    b.finish(
        pass,
        format!(
            "cantor(2,2,8) slope {:.4} vs {target_c} ({:.1}% ≤ 10%), circle(256) slope {:.4} vs {target_o} ({:.1}% ≤ 15%)",
            fit_c.slope,
            100.0 * rc,
            fit_o.slope,
            100.0 * ro
        ),
    )
}

/// Kernel checks on every generator of criteria 1 and 2, plus `extra`.
pub fn criterion_3(extra: &[FiniteSpace]) -> Result<Criterion> {
    let mut b = Builder::new(3, "kernel decomposition");
    let mut spaces: Vec<(FiniteSpace, Vec<f64>)> = Vec::new();
    for (n, lambda) in C1_CONFIGS {
        spaces.push((FiniteSpace::cantor(n, lambda, C1_DEPTH)?, C1_ORDERS.to_vec()));
    }
    spaces.push((FiniteSpace::circle(256)?, vec![0.25, 0.75]));
    spaces.push((FiniteSpace::circle(64)?, vec![0.25, 0.75, 1.25]));
    for s in extra {
        spaces.push((s.clone(), vec![0.25, 0.75]));
    }
    let (mut count, mut failures, mut worst_ratio, mut worst_var) = (0, 0, 0.0f64, 0.0f64);
    for (space, orders) in &spaces {
        for &s in orders {
            let spec = GeneratorMatrix::assemble(space, s)?.spectrum()?;
            // λ_0 ≤ 1e-10·λ_1 with λ_1 > 0 also makes the zero eigenvalue simple.
            let k = spec.kernel_check();
            count += 1;
            if !k.pass {
                failures += 1;
            }
            worst_ratio = worst_ratio.max(k.lambda0.abs() / k.lambda1);
            worst_var = worst_var.max(k.constant_variation);
        }
    }
    b.metric("generators", count as f64);
    b.metric("max_lambda0_over_lambda1", worst_ratio);
    b.metric("max_constant_variation", worst_var);
    b.finish(
        failures == 0,
        format!("{count} generators, {failures} failures; max |λ0|/λ1 = {worst_ratio:.1e} (≤ 1e-10), eigenvector variation {worst_var:.1e}"),
    )
}

pub fn criterion_4(seed: u64) -> Result<Criterion> {
    let mut b = Builder::new(4, "MK triple agreement");
    let alpha = 0.125;
    let space = FiniteSpace::cantor(2, 2.0, 6)?;
    let n = space.len();
    let spec = mk_spectrum(&space, alpha, true)?;
    let mut r = rng::substream(seed, 4);
    let mut worst_lin = 0.0f64;
    for _ in 0..50 {
        let (phi, psi) = (State::random(n, &mut r), State::random(n, &mut r));
        let c = mk_closed(&spec, &phi, &psi)?.distance;
        let l = mk_linsolve(&space, alpha, &phi, &psi)?.distance;
        worst_lin = worst_lin.max((c - l).abs() / c);
    }
    let mut worst_sup = 0.0f64;
    let mut all_converged = true;
    for _ in 0..10 {
        let x = r.random_range(0..n);
        let y = (x + r.random_range(1..n)) % n;
        let (phi, psi) = (State::dirac(n, x)?, State::dirac(n, y)?);
        let c = mk_closed(&spec, &phi, &psi)?.distance;
        let s = mk_sup(&space, alpha, 2.0, &phi, &psi, &SupConfig::default())?;
        all_converged &= s.converged;
        worst_sup = worst_sup.max((s.distance - c).abs() / c);
    }
    let two = FiniteSpace::custom(
        vec!["a".into(), "b".into()],
        vec![0.5, 0.5],
        vec![0.0, 1.0, 1.0, 0.0],
        1.0,
        WalkDimension::Infinite,
    )?;
    let (a, bb) = (State::dirac(2, 0)?, State::dirac(2, 1)?);
    let two_spec = mk_spectrum(&two, alpha, false)?;
    let values = [
        mk_closed(&two_spec, &a, &bb)?.distance,
        mk_linsolve(&two, alpha, &a, &bb)?.distance,
        mk_sup(&two, alpha, 2.0, &a, &bb, &SupConfig::default())?.distance,
    ];
    let two_err = values.iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max);
    b.metric("max_rel_closed_linsolve", worst_lin);
    b.metric("max_rel_closed_sup", worst_sup);
    b.metric("two_point_max_abs_err", two_err);
    let elapsed = b.start.elapsed().as_secs_f64();
    let pass = worst_lin <= 1e-8 && worst_sup <= 0.01 && two_err <= 1e-6 && elapsed < 300.0;
    b.finish(
        pass,
        format!(
            "closed/linsolve {worst_lin:.1e} (≤ 1e-8, 50 pairs); closed/sup {worst_sup:.1e} (≤ 1%, 10 Dirac pairs{}); two-point ρ = {:.6}, {:.6}, {:.6}",
            if all_converged { "" } else { ", some unconverged" },
            values[0],
            values[1],
            values[2]
        ),
    )
}

pub fn criterion_5(seed: u64) -> Result<Criterion> {
    let mut b = Builder::new(5, "HS factor resolution");
    let space = FiniteSpace::cantor(2, 2.0, 6)?;
    let mut r = rng::substream(seed, 5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let h: Vec<f64> = (0..space.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let e = l2_energy_seminorm(&space, 0.125, &h)?;
        worst = worst.max((e.ratio * e.ratio - 2.0).abs());
    }
    b.metric("max_abs_deviation", worst);
    b.finish(worst <= 1e-9, format!("max |raw-HS²/E − 2| = {worst:.1e} over 100 random h (≤ 1e-9)"))
}

pub fn criterion_6() -> Result<Criterion> {
    let mut b = Builder::new(6, "Dirac-pair sandwich diagnostics");
    let space = FiniteSpace::cantor(2, 2.0, 6)?;
    let scan = dirac_scan(&space, 0.125, 0.75, 2.0, None, &SupConfig::default())?;
    let ok = |v: f64| v.is_finite() && v > 0.0;
    b.metric("min_rho_over_d_beta", scan.lower_constant);
    b.metric("max_rho_over_d_2alpha", scan.upper_constant);
    b.metric("pairs", scan.rows.len() as f64);
    b.finish(
        ok(scan.lower_constant) && ok(scan.upper_constant),
        format!(
            "{} pairs: min ρ/d^β = {:.4}, max ρ/d^{{2α}} = {:.4}",
            scan.rows.len(),
            scan.lower_constant,
            scan.upper_constant
        ),
    )
}

pub fn criterion_7(seed: u64) -> Result<Criterion> {
    let mut b = Builder::new(7, "Schatten diagnostics");
    let (alpha, beta) = (0.125, 0.75);
    let space = FiniteSpace::cantor(2, 2.0, 6)?;
    let system = DyadicSystem::build(&space)?;
    let symbols = random_symbols(&space, 100, seed);
    let mut violations = 0;
    let mut ratio = (f64::INFINITY, 0.0f64);
    for h in &symbols {
        let op = CommutatorOp::new(&space, alpha, h)?;
        for p in [2.0, 3.0, 4.0] {
            let norm = op.schatten_norm(p)?;
            if op.gof_bound(p)? < norm - 1e-9 {
                violations += 1;
            }
            if norm > 0.0 {
                let m = system.martingale_lhs(h, alpha, p)?.total.powf(1.0 / p) / norm;
                ratio = (ratio.0.min(m), ratio.1.max(m));
            }
        }
    }
    // h(x) = d(x, x_0)^β has Höl_β(h) = 1 on an ultrametric space.
    let h: Vec<f64> = (0..space.len()).map(|x| space.dist(x, 0).powf(beta)).collect();
    let radii: Vec<f64> = (1..6).map(|k| system.theta().powi(k)).collect();
    let fit = truncation_fit(&space, alpha, &h, &radii)?;
    let floor = 0.9 * (beta - 2.0 * alpha);
    b.metric("gof_violations", violations as f64);
    b.metric("martingale_ratio_min", ratio.0);
    b.metric("martingale_ratio_max", ratio.1);
    b.metric("truncation_slope", fit.slope);
    b.metric("truncation_slope_floor", floor);
    let bounded = ratio.1.is_finite() && ratio.1 > 0.0;
    b.finish(
        violations == 0 && bounded && fit.slope >= floor,
        format!(
            "{violations} mixed-norm violations in 300 checks; martingale/S_p ratio in [{:.4}, {:.4}]; truncation slope {:.4} (≥ {floor:.3})",
            ratio.0, ratio.1, fit.slope
        ),
    )
}

fn random_field(n: usize, r: &mut rng::Rng) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect()
}

pub fn criterion_8(seed: u64) -> Result<Criterion> {
    let mut b = Builder::new(8, "Haar/dyadic exactness");
    let mut r = rng::substream(seed, 8);
    let mut issues: Vec<String> = Vec::new();
    let (mut parseval, mut nesting, mut basis_err) = (0.0f64, 0.0f64, 0.0f64);
    for space in [FiniteSpace::cantor(3, 2.0, 4)?, FiniteSpace::circle(64)?] {
        let sys = DyadicSystem::build(&space)?;
        issues.extend(sys.validate(&space));
        let basis = sys.haar_basis();
        let rep = sys.haar_report(&basis, 4.0);
        basis_err = basis_err.max(rep.max_norm_error).max(rep.max_orthogonality_error).max(rep.max_mean);
        if !rep.span_complete {
            issues.push(format!("{:?}: Haar family does not span", space.kind()));
        }
        for w in &basis.wavelets {
            let cube = sys.cube(w.cube);
            let v = sys.wavelet_vector(w);
            if (0..space.len()).any(|x| !cube.contains(x) && v[x] != Complex64::new(0.0, 0.0)) {
                issues.push(format!("wavelet on {} leaks outside its cube", cube.id));
            }
            for &c in &cube.children {
                let members = sys.cube(c).members.clone();
                let first = v[members.start];
                if members.clone().any(|x| (v[x] - first).norm() > 1e-14) {
                    issues.push(format!("wavelet on {} is not constant on child {}", cube.id, sys.cube(c).id));
                }
            }
        }
        let w = space.weights();
        let mass = space.total_mass();
        for _ in 0..100 {
            let f = random_field(space.len(), &mut r);
            let norm2: f64 = f.iter().zip(w).map(|(z, &wt)| z.norm_sqr() * wt).sum();
            let mean: Complex64 = f.iter().zip(w).map(|(z, &wt)| z * wt).sum::<Complex64>() / mass.sqrt();
            let coeffs: f64 = basis.wavelets.iter().map(|h| sys.wavelet_coefficient(h, &f).norm_sqr()).sum();
            parseval = parseval.max((coeffs + mean.norm_sqr() - norm2).abs() / norm2);
        }
        for _ in 0..10 {
            let f = random_field(space.len(), &mut r);
            let levels = sys.max_level();
            let e: Vec<Vec<Complex64>> = (0..=levels).map(|n| sys.expectation(n, &f)).collect::<Result<_>>()?;
            for n in 0..=levels {
                for m in 0..=levels {
                    let nested = sys.expectation(n, &e[m])?;
                    let want = &e[n.min(m)];
                    nesting = nesting.max(nested.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
                }
            }
        }
    }
    b.metric("axiom_issues", issues.len() as f64);
    b.metric("max_basis_error", basis_err);
    b.metric("max_parseval_rel_err", parseval);
    b.metric("max_nesting_err", nesting);
    let pass = issues.is_empty() && basis_err <= 1e-10 && parseval <= 1e-10 && nesting <= 1e-12;
    let mut summary = format!(
        "cantor(3,2,4) and circle(64): {} axiom/wavelet issues, basis error {basis_err:.1e}, Parseval {parseval:.1e} (≤ 1e-10), nesting {nesting:.1e} (≤ 1e-12)",
        issues.len()
    );
    if let Some(first) = issues.first() {
        summary.push_str(&format!("; first issue: {first}"));
    }
    b.finish(pass, summary)
}

/// Berezin contraction trials: returns (trials, failures).
pub fn berezin_trials(system: &mut CrossedSystem, p: f64, base: BaseSeminorm, trials: usize, r: &mut rng::Rng) -> Result<(usize, usize)> {
    let mut failures = 0;
    for _ in 0..trials {
        let f = system.random_element(6, r);
        let set = system.random_set(6, r);
        let before = system.combined_seminorm(&f, p, base)?.value;
        let damped = system.berezin(&f, &set)?;
        let after = system.combined_seminorm(&damped, p, base)?.value;
        if after > before + 1e-9 {
            failures += 1;
        }
    }
    Ok((trials, failures))
}

pub fn criterion_9(seed: u64) -> Result<Criterion> {
    let mut b = Builder::new(9, "crossed-product suite");
    let alpha = 0.2;
    let circle = circle_dual_length(alpha, 32, DEFAULT_QUADRATURE_NODES)?;
    let cantor = cantor_dual_length(2, 2.0, alpha, 6)?;
    let cantor3 = cantor_dual_length(3, 2.0, alpha, 4)?;
    let axiom_issues = circle.check_axioms().len() + cantor.check_axioms().len() + cantor3.check_axioms().len();

    let mut single = 0.0f64;
    for ell in [&circle, &cantor] {
        let sys = CrossedSystem::new(ell.clone(), None, Action::Trivial)?;
        let g = sys.group();
        for gamma in 0..g.len() {
            if matches!(g, crate::crossed::GroupModel::Integers { radius } if 2 * g.norm(gamma) > *radius) {
                continue;
            }
            for p in [2.0, 4.0] {
                let got = sys.group_seminorm(&CrossedElement::single(gamma, vec![Complex64::new(1.0, 0.0)]), p)?.value;
                let want = (0..g.len()).filter_map(|eta| ell.increment(gamma, eta)).map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
                let err = if want == 0.0 { got } else { (got - want).abs() / want };
                single = single.max(err);
            }
        }
    }

    let mut r = rng::substream(seed, 9);
    let mut point = CrossedSystem::new(circle_dual_length(alpha, 16, DEFAULT_QUADRATURE_NODES)?, None, Action::Trivial)?;
    let mut translated = CrossedSystem::new(
        cantor_dual_length(2, 2.0, alpha, 4)?,
        Some(FiniteSpace::cantor(2, 2.0, 4)?),
        Action::CantorTranslation,
    )?;
    let (mut trials, mut failures) = (0, 0);
    for p in [2.0, 4.0] {
        let (t, f) = berezin_trials(&mut point, p, BaseSeminorm::Holder(0.5), 50, &mut r)?;
        let (t2, f2) = berezin_trials(&mut translated, p, BaseSeminorm::Holder(0.5), 50, &mut r)?;
        trials += t + t2;
        failures += f + f2;
    }

    let fourier = cantor_fourier_check(2, 2.0, alpha, 6)?;
    b.metric("length_axiom_issues", axiom_issues as f64);
    b.metric("single_element_rel_err", single);
    b.metric("berezin_trials", trials as f64);
    b.metric("berezin_failures", failures as f64);
    b.metric("fourier_offdiag", fourier.max_offdiag);
    b.metric("fourier_diag_err", fourier.max_diag_error);
    let pass = axiom_issues == 0
        && single <= 1e-10
        && failures == 0
        && fourier.max_offdiag <= 1e-8
        && fourier.max_diag_error <= 1e-8;
    b.finish(
        pass,
        format!(
            "{axiom_issues} length-axiom issues; λ_γ seminorm error {single:.1e} (≤ 1e-10); Berezin {}/{trials} contractive; Fourier off-diagonal {:.1e}, diagonal error {:.1e} (≤ 1e-8)",
            trials - failures,
            fourier.max_offdiag,
            fourier.max_diag_error
        ),
    )
}

/// The Dirac pair whose distances are followed in depth: the points
/// `1 1 1 …` and `2 1 1 …` of the binary Cantor set.
pub fn convergence_pair() -> (RefinableState, RefinableState) {
    (RefinableState::Point { prefix: vec![1], fill: 1 }, RefinableState::Point { prefix: vec![2], fill: 1 })
}

pub fn criterion_10() -> Result<Criterion> {
    let mut b = Builder::new(10, "truncation convergence");
    let (phi, psi) = convergence_pair();
    let depths: Vec<usize> = (2..=8).collect();
    let rows = truncation_convergence(2, 2.0, 0.125, &phi, &psi, &depths)?;
    let last = rows.last().and_then(|r| r.relative_change).unwrap_or(f64::INFINITY);
    for row in &rows {
        b.metric(format!("rho_L{}", row.depth), row.rho);
    }
    b.metric("relative_change_L8", last);
    b.finish(last <= 0.05, format!("ρ_8 = {:.6}, relative change at depth 8 = {last:.4} (≤ 5%)", rows.last().map_or(f64::NAN, |r| r.rho)))
}

/// Runs all ten criteria; `extra` spaces join the kernel check.
pub fn run_all(seed: u64, extra: &[FiniteSpace]) -> Vec<Result<Criterion>> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(extra),
        criterion_4(seed),
        criterion_5(seed),
        criterion_6(),
        criterion_7(seed),
        criterion_8(seed),
        criterion_9(seed),
        criterion_10(),
    ]
}
