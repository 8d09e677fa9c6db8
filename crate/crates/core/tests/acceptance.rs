//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdicts are always printed.
//! A FAIL is reported, not turned into a panic; set
//! `CDA_ACCEPTANCE_STRICT=1` to exit non-zero on any FAIL.
//! `CDA_ACCEPTANCE_ONLY=4,5,9` restricts the run to some criteria.

use std::collections::BTreeMap;
use std::time::Instant;

use cda_core::harness::experiments::{
    heat_cda, HeatCase, KhSetup, KhWorld, ProjectionKind, ProjectionSummary, ProjectionSweep, TransportSetup, TransportWorld,
};
use cda_core::harness::{convergence_rates, decay_analysis, verify_all, ErrorSeries};
use cda_core::observation::NudgingMode;
use cda_core::Result;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn fmt(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", s.join(", "))
}

fn fmt_e(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", s.join(", "))
}

/// Heat runs shared by criteria 1, 3 and 6, keyed by `(n, μ label)`.
#[derive(Default)]
struct HeatRuns(BTreeMap<(usize, String), ErrorSeries>);

impl HeatRuns {
    fn get(&mut self, n: usize, mu: f64) -> Result<&ErrorSeries> {
        let key = (n, format!("{mu:e}"));
        if !self.0.contains_key(&key) {
            let case = HeatCase { mu, ..HeatCase::spatial(n) };
            self.0.insert(key.clone(), heat_cda(&case)?);
        }
        Ok(&self.0[&key])
    }

    fn final_l2(&mut self, n: usize, mu: f64) -> Result<f64> {
        Ok(self.get(n, mu)?.last().map(|r| r.l2_error).unwrap_or(f64::NAN))
    }
}

fn heat_space(heat: &mut HeatRuns) -> Result<Verdict> {
    let reference = [4.690e-4, 4.947e-5, 5.865e-6];
    let ns = [32, 64, 128];
    let mut errors = Vec::new();
    for n in ns {
        errors.push(heat.final_l2(n, f64::INFINITY)?);
    }
    let rows: Vec<(f64, f64)> = ns.iter().map(|&n| 1.0 / n as f64).zip(errors.iter().copied()).collect();
    let rates = convergence_rates(&rows)?.rates();
    let ratios: Vec<f64> = errors.iter().zip(&reference).map(|(e, p)| e / p).collect();
    let mag_ok = ratios.iter().all(|r| (1.0 / 1.5..=1.5).contains(r));
    let rate_ok = within(rates[0], 3.25, 0.15) && within(rates[1], 3.08, 0.15);
    verdict(
        mag_ok && rate_ok,
        format!(
            "errors {}, ratio to reference {} (need within x1.5), rates {} (need 3.25, 3.08 +- 0.15)",
            fmt_e(&errors),
            fmt(&ratios),
            fmt(&rates)
        ),
    )
}

fn heat_time() -> Result<Verdict> {
    let dts = [0.2, 0.1, 0.05];
    let mut rows = Vec::new();
    for dt in dts {
        let case = HeatCase {
            dt,
            t_final: 1.0,
            ..HeatCase::spatial(128)
        };
        let s = heat_cda(&case)?;
        rows.push((dt, s.last().map(|r| r.l2_error).unwrap_or(f64::NAN)));
    }
    let rates = convergence_rates(&rows)?.rates();
    let errors: Vec<f64> = rows.iter().map(|r| r.1).collect();
    verdict(
        within(rates[0], 1.90, 0.2) && within(rates[1], 1.99, 0.2),
        format!("errors {}, rates {} (need 1.90, 1.99 +- 0.2)", fmt_e(&errors), fmt(&rates)),
    )
}

fn mu_independence(heat: &mut HeatRuns) -> Result<Verdict> {
    let mus = [1e5, 1e8, f64::INFINITY];
    let mut e = Vec::new();
    for mu in mus {
        e.push(heat.final_l2(32, mu)?);
    }
    let worst = [(0, 1), (0, 2), (1, 2)].iter().map(|&(i, j)| rel(e[i], e[j])).fold(0.0, f64::max);
    verdict(
        worst <= 1e-3,
        format!(
            "final L2 for mu 1e5, 1e8, direct {}; worst pairwise relative gap {worst:.3e} (need <= 1e-3)",
            fmt_e(&e)
        ),
    )
}

fn projection(kind: ProjectionKind) -> Result<Verdict> {
    let rows = ProjectionSweep::standard(kind).run()?;
    let s = ProjectionSummary::new(&rows)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for (mu, l2, h1) in &s.rates {
        ok &= l2.iter().all(|r| within(*r, 3.0, 0.2)) && h1.iter().all(|r| within(*r, 2.0, 0.2));
        detail.push(format!("mu {mu:e}: L2 {} H1 {}", fmt(l2), fmt(h1)));
    }
    let spread: Vec<f64> = s.spread.iter().map(|p| p.1).collect();
    ok &= spread.iter().all(|r| *r <= 2.0);
    detail.push(format!("max/min L2 over mu per h {} (need <= 2)", fmt(&spread)));
    verdict(ok, detail.join("; "))
}

fn decay_plateau(heat: &mut HeatRuns) -> Result<Verdict> {
    let coarse = decay_analysis(heat.get(32, f64::INFINITY)?)?;
    let fine = decay_analysis(heat.get(64, f64::INFINITY)?)?;
    let ratio = fine.plateau / coarse.plateau;
    verdict(
        coarse.log_slope < 0.0 && fine.log_slope < 0.0 && (1.0 / 12.0..=1.0 / 5.0).contains(&ratio),
        format!(
            "log-slopes {:.3}, {:.3}; plateaus {:.3e}, {:.3e}; ratio {ratio:.4} (need in [1/12, 1/5])",
            coarse.log_slope, fine.log_slope, coarse.plateau, fine.plateau
        ),
    )
}

fn transport() -> Result<Verdict> {
    let world = TransportWorld::new(TransportSetup::default())?;
    let truth = world.dns()?;
    let mut ok = true;
    let mut detail = Vec::new();
    let mut curves = Vec::new();
    for (label, mu) in [("0.1", 0.1), ("1", 1.0), ("1e4", 1e4), ("direct", f64::INFINITY)] {
        let s = world.cda(mu, NudgingMode::Galerkin, &truth)?;
        let peak = s.l2().into_iter().fold(0.0, f64::max);
        let end = s.at_time(5.0).map(|r| r.l2_error).unwrap_or(f64::NAN);
        let drop = peak / end;
        ok &= drop >= 100.0;
        detail.push(format!("mu {label}: peak/final {drop:.1}"));
        curves.push(s);
    }
    let gap = curves[2]
        .records
        .iter()
        .zip(&curves[3].records)
        .filter(|(a, _)| a.step > 10)
        .map(|(a, b)| rel(a.l2_error, b.l2_error))
        .fold(0.0, f64::max);
    ok &= gap <= 0.05;
    detail.push(format!("mu 1e4 vs direct after step 10: max relative gap {gap:.3e} (need <= 0.05)"));
    verdict(ok, format!("{} (need peak/final >= 100)", detail.join("; ")))
}

fn kelvin_helmholtz() -> Result<Verdict> {
    let world = KhWorld::new(KhSetup::reduced())?;
    let truth = world.dns()?;
    let mut finals = Vec::new();
    let mut drop = f64::NAN;
    for (i, h) in [1.0 / 25.0, 1.0 / 20.0, 1.0 / 15.0].into_iter().enumerate() {
        let s = world.cda(h, f64::INFINITY, NudgingMode::Galerkin, &truth)?;
        let end = s.at_time(8.0).map(|r| r.l2_error).unwrap_or(f64::NAN);
        if i == 0 {
            drop = s.at_time(0.1).map(|r| r.l2_error).unwrap_or(f64::NAN) / end;
        }
        finals.push(end);
    }
    let ordered = finals[0] <= 1.1 * finals[1] && finals[1] <= 1.1 * finals[2];
    verdict(
        drop >= 100.0 && ordered,
        format!(
            "N=25^2: e(0.1)/e(8) = {drop:.1} (need >= 100); e(8) for N=25^2, 20^2, 15^2 {} (need ordered, 10% slack)",
            fmt_e(&finals)
        ),
    )
}

fn identities() -> Result<Verdict> {
    let checks = verify_all(2024)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    verdict(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks hold", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("CDA_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let strict = std::env::var("CDA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let selected = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));

    let mut heat = HeatRuns::default();
    let (mut passed, mut failed) = (0, 0);
    for k in 1..=10 {
        if !selected(k) {
            continue;
        }
        let start = Instant::now();
        let (name, result) = match k {
            1 => ("heat spatial convergence table", heat_space(&mut heat)),
            2 => ("heat temporal convergence table", heat_time()),
            3 => ("heat results independent of mu", mu_independence(&mut heat)),
            4 => ("Poisson projection rates uniform in mu", projection(ProjectionKind::Poisson)),
            5 => ("Stokes projection rates uniform in mu", projection(ProjectionKind::Stokes)),
            6 => ("heat exponential decay to an h^3 plateau", decay_plateau(&mut heat)),
            7 => ("transport assimilation in the sheared channel", transport()),
            8 => ("reduced Kelvin-Helmholtz assimilation", kelvin_helmholtz()),
            9 => ("exact identities and structural properties", identities()),
            _ => {
                println!("criterion 10: PASS (statement) Cahn-Hilliard results are not reproduced and no check covers them");
                continue;
            }
        };
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(v) => {
                if v.passed {
                    passed += 1;
                } else {
                    failed += 1;
                }
                let tag = if v.passed { "PASS" } else { "FAIL" };
                println!("criterion {k}: {tag} {name} [{secs:.1}s] {}", v.detail);
            }
            Err(e) => {
                failed += 1;
                println!("criterion {k}: FAIL {name} [{secs:.1}s] error: {e}");
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
