use anyhow::{bail, Context, Result};
use fraclap_core::crossed::{
    cantor_dual_length, cantor_fourier_check, circle_dual_length, circle_fourier_check, translation_tail_report, Action,
    BaseSeminorm, CrossedSystem, LengthFunction,
};
use fraclap_core::{rng, SpaceKind};
use serde_json::json;

use crate::commands::load;
use crate::output::Output;
use crate::{fail, BaseArgs, CrossedCmd, GroupArgs, GroupKind, EXIT_VALIDATION};

pub fn name(c: &CrossedCmd) -> &'static str {
    match c {
        CrossedCmd::Length { .. } => "crossed length",
        CrossedCmd::Tail { .. } => "crossed tail",
        CrossedCmd::Seminorm { .. } => "crossed seminorm",
        CrossedCmd::BerezinTest { .. } => "crossed berezin-test",
        CrossedCmd::Fourier { .. } => "crossed fourier",
    }
}

fn length(g: &GroupArgs) -> Result<LengthFunction> {
    Ok(match g.kind {
        GroupKind::Circle => circle_dual_length(g.alpha, g.radius, g.nodes)?,
        GroupKind::Cantor => cantor_dual_length(g.branching, g.lambda, g.alpha, g.radius)?,
    })
}

fn base_seminorm(s: &str) -> Result<BaseSeminorm> {
    let (kind, v) = s.split_once(':').with_context(|| format!("`{s}`: expected holder:<β> or energy:<α>"))?;
    let v: f64 = v.parse().with_context(|| format!("`{s}`: bad exponent"))?;
    match kind {
        "holder" => Ok(BaseSeminorm::Holder(v)),
        "energy" => Ok(BaseSeminorm::Energy(v)),
        _ => bail!("`{s}`: expected holder:<β> or energy:<α>"),
    }
}

fn system(g: &GroupArgs, b: &BaseArgs) -> Result<(CrossedSystem, BaseSeminorm)> {
    let ell = length(g)?;
    let base = b.base.as_deref().map(load).transpose()?;
    let action = match (&base, g.kind) {
        (None, _) => Action::Trivial,
        (Some(s), GroupKind::Cantor) if s.kind() == SpaceKind::Cantor => Action::CantorTranslation,
        (Some(s), GroupKind::Circle) if s.kind() == SpaceKind::Circle => Action::CircleRotation,
        (Some(s), k) => {
            return Err(fail(EXIT_VALIDATION, format!("a {k:?} group does not act on a {:?} base", s.kind())));
        }
    };
    Ok((CrossedSystem::new(ell, base, action)?, base_seminorm(&b.base_seminorm)?))
}

pub fn run(out: &Output, c: CrossedCmd, seed: u64) -> Result<()> {
    match c {
        CrossedCmd::Length { group, out: path } => {
            let ell = length(&group)?;
            let g = &ell.group;
            let rows: Vec<Vec<String>> = (0..g.len())
                .map(|i| vec![g.label(i), g.norm(i).to_string(), ell.values[i].to_string()])
                .collect();
            out.csv(&path, &["element", "norm", "length"], &rows)?;
            let issues = ell.check_axioms();
            println!("{} elements, {} axiom issues", g.len(), issues.len());
            if !issues.is_empty() {
                return Err(fail(EXIT_VALIDATION, format!("length axioms failed:\n  - {}", issues.join("\n  - "))));
            }
            Ok(())
        }
        CrossedCmd::Tail { group, gamma, p, out: path } => {
            let ell = length(&group)?;
            let idx = ell.group.parse_label(&gamma)?;
            let rep = translation_tail_report(&ell, idx, p)?;
            out.json(&path, &rep)?;
            println!(
                "γ = {}: decay exponent {:?}, stable from {:?}, summability {}, sufficient p {:?}",
                rep.gamma,
                rep.decay_exponent,
                rep.stable_from,
                if rep.summability_supported { "supported" } else { "not supported" },
                rep.sufficient_p
            );
            Ok(())
        }
        CrossedCmd::Seminorm { group, base, f, p, out: path } => {
            let (mut sys, base_norm) = system(&group, &base)?;
            let text = std::fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
            let element = sys.parse_element(&text)?;
            let group_norm = sys.group_seminorm(&element, p)?;
            let combined = sys.combined_seminorm(&element, p, base_norm)?;
            out.json(&path, &json!({ "group": group_norm, "combined": combined, "p": p, "base_seminorm": base_norm,
                                     "doubled_radius_note": "heuristic truncation sensitivity" }))?;
            println!(
                "L_V = {:.6e}, L_H = {:.6e}, L_H(f*) = {:.6e}, L = {:.6e}; discarded {:.3}; doubled-radius value {:?}",
                combined.vertical,
                combined.horizontal,
                combined.horizontal_star,
                combined.value,
                combined.discarded_fraction,
                group_norm.doubled
            );
            Ok(())
        }
        CrossedCmd::BerezinTest { group, base, trials, p, out: path } => {
            let (mut sys, base_norm) = system(&group, &base)?;
            let mut r = rng::substream(seed, 0xbe2e);
            let mut per_p = Vec::new();
            let mut failures = 0;
            for &pp in &p {
                let (t, f) = fraclap_core::verify::berezin_trials(&mut sys, pp, base_norm, trials, &mut r)?;
                failures += f;
                per_p.push(json!({ "p": pp, "trials": t, "failures": f }));
                println!("p = {pp}: {}/{t} contractive", t - f);
            }
            out.json(&path, &json!({ "results": per_p }))?;
            if failures > 0 {
                return Err(fail(EXIT_VALIDATION, format!("{failures} Berezin trials increased the seminorm")));
            }
            Ok(())
        }
        CrossedCmd::Fourier { group, n, out: path } => match group.kind {
            GroupKind::Cantor => {
                let rep = cantor_fourier_check(group.branching, group.lambda, group.alpha, group.radius)?;
                out.json(&path, &rep)?;
                println!("off-diagonal {:.3e}, diagonal error {:.3e}", rep.max_offdiag, rep.max_diag_error);
                if rep.max_offdiag > 1e-8 || rep.max_diag_error > 1e-8 {
                    return Err(fail(EXIT_VALIDATION, "conjugated generator is not diagonal to 1e-8"));
                }
                Ok(())
            }
            GroupKind::Circle => {
                let rep = circle_fourier_check(n, group.alpha)?;
                out.json(&path, &rep)?;
                println!(
                    "off-diagonal {:.3e}; discrete vs continuum gap {:.4}",
                    rep.max_offdiag, rep.max_relative_gap
                );
                Ok(())
            }
        },
    }
}
