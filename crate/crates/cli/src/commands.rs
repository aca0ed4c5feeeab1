use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fraclap_core::commutator::{
    beta_of_alpha, holder_bound_report, l2_energy_seminorm, p_threshold, random_symbols, truncation_fit, CommutatorOp,
};
use fraclap_core::dyadic::DyadicSystem;
use fraclap_core::laplacian::{cantor_exact_for, Eigenbasis, GeneratorMatrix, SpectralData};
use fraclap_core::mk::{dirac_scan, mk_closed, mk_linsolve, mk_spectrum, mk_sup, SupConfig};
use fraclap_core::spaces::resolve_space;
use fraclap_core::{rng, verify, FiniteSpace, SpaceKind, State};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::output::{Meta, Output};
use crate::svg::{Plot, Series};
use crate::{fail, Cli, Cmd, DyadicCmd, MethodArg, EXIT_NONCONVERGENCE, EXIT_VALIDATION};

/// Arguments that enter the config hash: everything but the output directory.
fn hashed_args(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--out-dir" {
            skip = true;
        } else if !a.starts_with("--out-dir=") {
            out.push(a.clone());
        }
    }
    out
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::SpaceValidate(_) => "space-validate",
        Cmd::Dyadic(DyadicCmd::Validate { .. }) => "dyadic validate",
        Cmd::Dyadic(DyadicCmd::Wavelets { .. }) => "dyadic wavelets",
        Cmd::Spectrum(_) => "spectrum",
        Cmd::Weyl(_) => "weyl",
        Cmd::Commutator(_) => "commutator",
        Cmd::Mk(_) => "mk",
        Cmd::DiracScan(_) => "dirac-scan",
        Cmd::Crossed(c) => crate::crossed_cmd::name(c),
        Cmd::VerifyAll(_) => "verify-all",
    }
}

pub fn run(cli: Cli, args: &[String]) -> Result<()> {
    let meta = Meta::new(command_name(&cli.cmd), &hashed_args(args), cli.seed);
    let out = Output::new(cli.out_dir.clone(), meta);
    let seed = cli.seed;
    match cli.cmd {
        Cmd::SpaceValidate(a) => space_validate(&out, a),
        Cmd::Dyadic(c) => dyadic(&out, c),
        Cmd::Spectrum(a) => spectrum(&out, a),
        Cmd::Weyl(a) => weyl(&out, a),
        Cmd::Commutator(a) => commutator(&out, a, seed),
        Cmd::Mk(a) => mk(&out, a, seed),
        Cmd::DiracScan(a) => scan(&out, a),
        Cmd::Crossed(c) => crate::crossed_cmd::run(&out, c, seed),
        Cmd::VerifyAll(a) => verify_all(&out, a, seed),
    }
}

pub fn load(spec: &str) -> Result<FiniteSpace> {
    resolve_space(spec).with_context(|| format!("loading space `{spec}`"))
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Common regime check: names each violated inequality of `0 < 2α < β ≤ 1`.
pub fn check_regime(alpha: f64, beta: f64) -> Result<()> {
    let mut broken = Vec::new();
    if !(alpha > 0.0) {
        broken.push(format!("α > 0 (α = {alpha})"));
    }
    if !(2.0 * alpha < beta) {
        broken.push(format!("2α < β (2α = {}, β = {beta})", 2.0 * alpha));
    }
    if !(beta <= 1.0) {
        broken.push(format!("β ≤ 1 (β = {beta})"));
    }
    if broken.is_empty() {
        Ok(())
    } else {
        Err(fail(EXIT_VALIDATION, format!("parameter regime violated: {}", broken.join("; "))))
    }
}

#[derive(Serialize)]
struct SpaceSummary {
    kind: SpaceKind,
    points: usize,
    d_f: f64,
    d_w: String,
    diam: f64,
    total_mass: f64,
    ultrametric: bool,
    violations: Vec<String>,
    ahlfors_min_ratio: f64,
    ahlfors_max_ratio: f64,
    ahlfors_radii: Vec<f64>,
}

fn default_radii(space: &FiniteSpace) -> Vec<f64> {
    let n = space.len();
    let mut d: Vec<f64> = (0..n).flat_map(|y| (0..n).map(move |x| (x, y))).filter(|(x, y)| x != y).map(|(x, y)| space.dist(x, y)).collect();
    d.sort_by(f64::total_cmp);
    d.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    if d.len() > 12 {
        let step = d.len() as f64 / 12.0;
        d = (0..12).map(|i| d[((i as f64 + 0.5) * step) as usize]).collect();
    }
    d
}

fn space_validate(out: &Output, a: crate::SpaceValidateArgs) -> Result<()> {
    let space = load(&a.space.space)?;
    let violations = space.validate();
    let radii = a.radii.unwrap_or_else(|| default_radii(&space));
    let ahl = space.ahlfors_report(&radii)?;
    let summary = SpaceSummary {
        kind: space.kind(),
        points: space.len(),
        d_f: space.d_f(),
        d_w: space.d_w().to_string(),
        diam: space.diam(),
        total_mass: space.total_mass(),
        ultrametric: space.is_ultrametric(),
        violations: violations.clone(),
        ahlfors_min_ratio: ahl.min_ratio,
        ahlfors_max_ratio: ahl.max_ratio,
        ahlfors_radii: radii,
    };
    out.json(&a.out, &summary)?;
    if let Some(path) = a.export {
        out.write_text(&path, &space.to_toml())?;
    }
    println!(
        "{} points, d_f = {}, Ahlfors ratios in [{:.4}, {:.4}], {} violations",
        space.len(),
        space.d_f(),
        ahl.min_ratio,
        ahl.max_ratio,
        violations.len()
    );
    if !violations.is_empty() {
        return Err(fail(EXIT_VALIDATION, format!("space validation failed:\n  - {}", violations.join("\n  - "))));
    }
    Ok(())
}

fn dyadic(out: &Output, c: DyadicCmd) -> Result<()> {
    match c {
        DyadicCmd::Validate { space, out: path } => {
            let space = load(&space.space)?;
            let sys = DyadicSystem::build(&space)?;
            let issues = sys.validate(&space);
            let basis = sys.haar_basis();
            let report = sys.haar_report(&basis, 4.0);
            let counts: Vec<usize> = (0..=sys.max_level()).map(|n| sys.level(n).len()).collect();
            out.json(
                &path,
                &json!({ "constants": sys.constants(), "level_counts": counts, "issues": issues, "haar": report }),
            )?;
            println!("levels {:?}, {} axiom issues, Haar count {}", counts, issues.len(), report.count);
            let basis_ok = report.span_complete && report.max_norm_error <= 1e-10 && report.max_orthogonality_error <= 1e-10;
            if !issues.is_empty() || !basis_ok {
                return Err(fail(EXIT_VALIDATION, format!("dyadic validation failed ({} axiom issues)", issues.len())));
            }
            Ok(())
        }
        DyadicCmd::Wavelets { space, out: path } => {
            let space = load(&space.space)?;
            let sys = DyadicSystem::build(&space)?;
            let basis = sys.haar_basis();
            let mut rows = Vec::new();
            for w in &basis.wavelets {
                let cube = sys.cube(w.cube);
                let v = sys.wavelet_vector(w);
                for x in cube.members.clone() {
                    rows.push(vec![cube.id.clone(), w.u.to_string(), space.ids()[x].clone(), num(v[x].re), num(v[x].im)]);
                }
            }
            out.csv(&path, &["cube_id", "u", "point_id", "re", "im"], &rows)?;
            println!("{} wavelets", basis.wavelets.len());
            Ok(())
        }
    }
}

fn spectral(space: &FiniteSpace, s: f64, exact: bool, guard: usize) -> Result<SpectralData> {
    if exact {
        Ok(cantor_exact_for(space, s)?)
    } else {
        Ok(GeneratorMatrix::assemble(space, s)?.spectrum_with_guard(guard)?)
    }
}

fn spectrum(out: &Output, a: crate::SpectrumArgs) -> Result<()> {
    let space = load(&a.space.space)?;
    let spec = spectral(&space, a.s, a.exact, a.guard)?;
    let mut header: Vec<String> = vec!["index".into(), "eigenvalue".into()];
    let complex = matches!(spec.basis, Eigenbasis::Complex(_));
    for id in space.ids() {
        if complex {
            header.push(format!("re_{id}"));
            header.push(format!("im_{id}"));
        } else {
            header.push(format!("v_{id}"));
        }
    }
    let rows: Vec<Vec<String>> = (0..spec.len())
        .map(|j| {
            let mut r = vec![j.to_string(), num(spec.eigenvalues[j])];
            for v in spec.eigenfunction(j) {
                r.push(num(v.re));
                if complex {
                    r.push(num(v.im));
                }
            }
            r
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(&a.out, &header_refs, &rows)?;
    let k = spec.kernel_check();
    println!(
        "{} eigenvalues, λ_1 = {:.6e}, λ_max = {:.6e}, residual {:.1e}, kernel check {}",
        spec.len(),
        k.lambda1,
        spec.eigenvalues.last().copied().unwrap_or(0.0),
        spec.residual,
        if k.pass { "passed" } else { "FAILED" }
    );
    Ok(())
}

fn weyl(out: &Output, a: crate::WeylArgs) -> Result<()> {
    let space = load(&a.space.space)?;
    let spec = spectral(&space, a.s, a.exact, fraclap_core::laplacian::SPECTRUM_GUARD)?;
    let window = match a.window.as_deref() {
        Some(&[lo, hi]) => (lo, hi),
        Some(_) => return Err(fail(EXIT_VALIDATION, "--window takes two fractions `a,b`")),
        None => spec.default_weyl_window(),
    };
    let fit = spec.weyl_fit(Some(window))?;
    let target = 2.0 * a.s / space.d_f();
    out.json(
        &a.out,
        &json!({ "fit": fit, "window": [window.0, window.1], "target_slope": target,
                 "relative_deviation": (fit.slope - target).abs() / target }),
    )?;
    if let Some(plot) = a.plot {
        let pts: Vec<(f64, f64)> = spec.eigenvalues[1..].iter().enumerate().map(|(i, &l)| ((i + 1) as f64, l)).collect();
        let m = pts.len() as f64;
        let line: Vec<(f64, f64)> = [window.0 * m + 1.0, window.1 * m]
            .iter()
            .map(|&n| (n, (fit.intercept + fit.slope * n.ln()).exp()))
            .collect();
        out.svg(
            &plot,
            &Plot {
                title: format!("eigenvalue growth, s = {}", a.s),
                x_label: "n".into(),
                y_label: "λ_n".into(),
                log_x: true,
                log_y: true,
                series: vec![
                    Series { name: "eigenvalues".into(), points: pts, line: false },
                    Series { name: format!("slope {:.4}", fit.slope), points: line, line: true },
                ],
            },
        )?;
    }
    println!("slope {:.6} (2s/d_f = {target:.6}), r² = {:.6}, {} points", fit.slope, fit.r2, fit.points);
    Ok(())
}

fn read_symbol(space: &FiniteSpace, spec: &str, seed: u64) -> Result<Vec<Complex64>> {
    let (name, arg) = spec.split_once(':').map_or((spec, None), |(a, b)| (a, Some(b)));
    let real = |v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    match name {
        "dist" => {
            let x0 = match arg {
                Some(id) => space.point_index(id)?,
                None => 0,
            };
            Ok(real((0..space.len()).map(|x| space.dist(x, x0)).collect()))
        }
        "haar" => {
            let k: usize = arg.unwrap_or("0").parse().context("haar:<k> needs an integer")?;
            let sys = DyadicSystem::build(space)?;
            let basis = sys.haar_basis();
            let w = basis.wavelets.get(k).with_context(|| format!("only {} wavelets", basis.wavelets.len()))?;
            Ok(sys.wavelet_vector(w))
        }
        "random" => {
            let k: usize = arg.unwrap_or("0").parse().context("random:<k> needs an integer")?;
            Ok(real(random_symbols(space, k + 1, seed).pop().expect("nonempty")))
        }
        _ => {
            let text = std::fs::read_to_string(spec).with_context(|| format!("reading symbol file {spec}"))?;
            let mut h = vec![Complex64::new(0.0, 0.0); space.len()];
            let mut seen = BTreeSet::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with("id") {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if !(2..=3).contains(&cols.len()) {
                    bail!("{spec}:{}: expected `id,value[,im]`", i + 1);
                }
                let x = space.point_index(cols[0])?;
                let re: f64 = cols[1].parse().with_context(|| format!("{spec}:{}", i + 1))?;
                let im: f64 = cols.get(2).map_or(Ok(0.0), |c| c.parse()).with_context(|| format!("{spec}:{}", i + 1))?;
                h[x] = Complex64::new(re, im);
                seen.insert(x);
            }
            if seen.len() != space.len() {
                bail!("{spec}: values given for {} of {} points", seen.len(), space.len());
            }
            Ok(h)
        }
    }
}

fn commutator(out: &Output, a: crate::CommutatorArgs, seed: u64) -> Result<()> {
    let space = load(&a.space.space)?;
    if let Some(beta) = a.beta {
        check_regime(a.alpha, beta)?;
        let threshold = p_threshold(a.alpha, beta, space.d_f())?;
        if !(a.p > threshold.max(1.0)) {
            eprintln!("warning: p = {} does not exceed p(α,β) = {threshold:.4}; Hölder comparison skipped", a.p);
        }
    }
    let h = read_symbol(&space, &a.h, seed)?;
    let op = CommutatorOp::new(&space, a.alpha, &h)?;
    let report = op.report(a.p)?;
    let energy = l2_energy_seminorm(&space, a.alpha, &h)?;
    let holder = match a.beta {
        Some(beta) if a.p > p_threshold(a.alpha, beta, space.d_f())?.max(1.0) => {
            Some(holder_bound_report(&space, a.alpha, beta, a.p, &h)?)
        }
        _ => None,
    };
    let truncation = match a.radii {
        Some(radii) => Some(truncation_fit(&space, a.alpha, &h, &radii)?),
        None => None,
    };
    out.json(
        &a.out,
        &json!({
            "alpha": a.alpha,
            "beta_of_alpha": beta_of_alpha(space.d_f(), a.alpha),
            "schatten": report,
            "energy": energy,
            "holder": holder,
            "truncation": truncation,
        }),
    )?;
    println!(
        "‖K‖_S{} = {:.6e}, raw HS = {:.6e}, E^(1/2) = {:.6e}, ratio² = {:.12}",
        a.p,
        report.norm,
        report.raw_hs,
        energy.energy_norm,
        energy.ratio * energy.ratio
    );
    Ok(())
}

fn read_state(space: &FiniteSpace, spec: &str, r: &mut rng::Rng) -> Result<State> {
    let n = space.len();
    if let Some(id) = spec.strip_prefix("dirac:") {
        return Ok(State::dirac(n, space.point_index(id)?)?);
    }
    match spec {
        "uniform" => Ok(State::uniform(n)),
        "random" => Ok(State::random(n, r)),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading state file {path}"))?;
            Ok(State::from_csv(space, &text)?)
        }
    }
}

fn mk(out: &Output, a: crate::MkArgs, seed: u64) -> Result<()> {
    let space = load(&a.space.space)?;
    let mut r = rng::seeded(seed);
    let phi = read_state(&space, &a.phi, &mut r)?;
    let psi = read_state(&space, &a.psi, &mut r)?;
    if a.p != 2.0 && a.method != MethodArg::Sup {
        return Err(fail(EXIT_VALIDATION, format!("the {:?} method computes the p = 2 distance; use --method sup for p = {}", a.method, a.p)));
    }
    let result = match a.method {
        MethodArg::Closed => mk_closed(&mk_spectrum(&space, a.alpha, a.exact)?, &phi, &psi)?,
        MethodArg::Linsolve => mk_linsolve(&space, a.alpha, &phi, &psi)?,
        MethodArg::Sup => {
            let config = SupConfig { max_iter: a.max_iter, tol: a.tol, ..SupConfig::default() };
            mk_sup(&space, a.alpha, a.p, &phi, &psi, &config)?
        }
    };
    out.json(&a.out, &result)?;
    println!("ρ = {:.12} ({:?}, {} iterations)", result.distance, result.method, result.iterations);
    if !result.converged {
        return Err(fail(EXIT_NONCONVERGENCE, format!("sup oracle stopped after {} iterations without converging", result.iterations)));
    }
    Ok(())
}

fn scan(out: &Output, a: crate::DiracScanArgs) -> Result<()> {
    check_regime(a.alpha, a.beta)?;
    let space = load(&a.space.space)?;
    let spec = if a.p == 2.0 { Some(mk_spectrum(&space, a.alpha, a.exact)?) } else { None };
    let result = dirac_scan(&space, a.alpha, a.beta, a.p, spec.as_ref(), &SupConfig::default())?;
    let ids = space.ids();
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| vec![ids[r.x].clone(), ids[r.y].clone(), num(r.dist), num(r.rho), num(r.ratio_2alpha), num(r.ratio_beta)])
        .collect();
    out.csv(&a.out, &["x", "y", "dist", "rho", "rho_over_d_2alpha", "rho_over_d_beta"], &rows)?;
    out.json(
        &a.summary,
        &json!({ "alpha": a.alpha, "beta": a.beta, "p": a.p, "pairs": result.rows.len(),
                 "max_rho_over_d_2alpha": result.upper_constant, "min_rho_over_d_beta": result.lower_constant }),
    )?;
    if let Some(plot) = a.plot {
        out.svg(
            &plot,
            &Plot {
                title: format!("ρ(δ_x, δ_y) against d(x, y), α = {}", a.alpha),
                x_label: "d(x,y)".into(),
                y_label: "ρ".into(),
                log_x: true,
                log_y: true,
                series: vec![Series {
                    name: "pairs".into(),
                    points: result.rows.iter().map(|r| (r.dist, r.rho)).collect(),
                    line: false,
                }],
            },
        )?;
    }
    println!(
        "{} pairs: max ρ/d^(2α) = {:.6}, min ρ/d^β = {:.6}",
        result.rows.len(),
        result.upper_constant,
        result.lower_constant
    );
    Ok(())
}

fn verify_all(out: &Output, a: crate::VerifyArgs, seed: u64) -> Result<()> {
    let extra = match &a.space {
        Some(s) => vec![load(s)?],
        None => Vec::new(),
    };
    let mut records = Vec::new();
    let mut failed = 0;
    for (i, c) in verify::run_all(seed, &extra).into_iter().enumerate() {
        match c {
            Ok(c) => {
                println!("{}", c.line());
                failed += usize::from(!c.pass);
                records.push(serde_json::to_value(&c)?);
            }
            Err(e) => {
                println!("criterion {:>2} [FAIL] error: {e}", i + 1);
                failed += 1;
                records.push(json!({ "id": i + 1, "pass": false, "error": e.to_string() }));
            }
        }
    }
    println!("{} of {} criteria passed", records.len() - failed, records.len());
    out.json(Path::new(&a.out), &json!({ "criteria": records, "failed": failed }))?;
    if failed > 0 {
        return Err(fail(EXIT_VALIDATION, format!("{failed} acceptance criteria failed")));
    }
    Ok(())
}
