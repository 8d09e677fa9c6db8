//! Config-driven runs and their artifacts.
//!
//! Output directory layout: one `series_<tag>.csv` per run, `summary.csv`,
//! `rates_<axis>_<group>.csv` for every sweep axis with more than one value,
//! `mu_report.csv` for μ sweeps, and `manifest.json`, written last.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ProblemKind};
use super::experiments::{heat_cda, HeatCase, KhSetup, KhWorld, ProjectionKind, ProjectionSweep, TransportSetup, TransportWorld};
use super::norms::ErrorSeries;
use super::rates::{convergence_rates, RateTable};
use crate::drivers::{SnapshotReader, SnapshotWriter};
use crate::error::{Error, Result};
use crate::fem::FeSpace;

/// `inf` for direct enforcement, otherwise the shortest exact form.
pub fn mu_label(mu: f64) -> String {
    if mu.is_infinite() {
        "inf".into()
    } else {
        format!("{mu:e}")
    }
}

pub fn parse_mu(s: &str) -> Result<f64> {
    match s {
        "inf" | "direct" => Ok(f64::INFINITY),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|m| *m >= 0.0)
            .ok_or_else(|| Error::Config(format!("cda.mu: cannot parse `{s}`"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tag: String,
    /// Cells per unit length; absent for the channel.
    pub resolution: Option<usize>,
    pub dt: Option<f64>,
    pub mu: String,
    pub coarse_width: Option<f64>,
    pub final_l2: f64,
    pub final_h1: f64,
    pub series: String,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn mu_value(&self) -> f64 {
        parse_mu(&self.mu).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuPair {
    pub mu_a: String,
    pub mu_b: String,
    pub final_rel_diff: f64,
    /// Largest relative gap between the two L2 curves after step 10.
    pub max_rel_diff_after_10: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTable {
    pub name: String,
    pub file: String,
    pub table: RateTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub label: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub rate_tables: Vec<NamedTable>,
    pub mu_report: Vec<MuPair>,
    pub wall_seconds: f64,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }
}

struct Collector {
    dir: PathBuf,
    runs: Vec<RunRecord>,
    series: Vec<ErrorSeries>,
}

impl Collector {
    fn add(&mut self, resolution: Option<usize>, dt: Option<f64>, mu: f64, coarse: Option<f64>, series: ErrorSeries) -> Result<()> {
        let mut tag = String::new();
        if let Some(n) = resolution {
            tag.push_str(&format!("n{n}_"));
        }
        if let Some(dt) = dt {
            tag.push_str(&format!("dt{dt}_"));
        }
        if let Some(h) = coarse {
            tag.push_str(&format!("H{}_", (1.0 / h).round()));
        }
        tag.push_str(&format!("mu{}", mu_label(mu)));
        let file = format!("series_{tag}.csv");
        series.write_csv(&self.dir.join(&file))?;
        let last = series.last().ok_or_else(|| Error::InvalidInput("empty error series".into()))?;
        self.runs.push(RunRecord {
            tag,
            resolution,
            dt,
            mu: mu_label(mu),
            coarse_width: coarse,
            final_l2: last.l2_error,
            final_h1: last.h1_error,
            series: file,
            wall_seconds: series.wall_seconds,
        });
        self.series.push(series);
        Ok(())
    }
}

/// Reference trajectory from `snapshot` if that file exists, otherwise
/// computed by `compute` and, when a path is given, stored there.
fn reference(
    snapshot: Option<&Path>,
    space: &FeSpace,
    dt: f64,
    steps: usize,
    compute: impl FnOnce() -> Result<Vec<Vec<f64>>>,
) -> Result<Vec<Vec<f64>>> {
    let fp = space.fingerprint();
    if let Some(path) = snapshot.filter(|p| p.exists()) {
        let reader = SnapshotReader::open(path, &fp)?;
        if (reader.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::Config(format!(
                "truth.snapshot: stored dt {} differs from time.dt {dt}",
                reader.dt()
            )));
        }
        if reader.records() < steps + 1 {
            return Err(Error::Config(format!(
                "truth.snapshot: {} records cannot cover {steps} steps",
                reader.records()
            )));
        }
        return reader.read_all();
    }
    let states = compute()?;
    if let Some(path) = snapshot {
        let mut w = SnapshotWriter::create(path, &fp, dt, states.len())?;
        for s in &states {
            w.write(s)?;
        }
        w.finish()?;
    }
    Ok(states)
}

/// Runs every point of the config's sweep and writes the artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    // a stale manifest would mark a half-written directory as complete
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    }
    let mut col = Collector {
        dir: dir.clone(),
        runs: Vec::new(),
        series: Vec::new(),
    };
    let coef = cfg.coefficient()?;
    let (cda, time) = (&cfg.cda, &cfg.time);
    match cfg.problem {
        ProblemKind::Heat => {
            for &n in &cfg.mesh.resolutions {
                for &dt in &time.dt {
                    for &h in &cda.coarse_width {
                        for &mu in &cda.mu {
                            let case = HeatCase {
                                n,
                                barycentric: cfg.mesh.barycentric,
                                degree: cfg.space.degree,
                                kappa: coef,
                                dt,
                                t_final: time.t_final,
                                mu,
                                mode: cda.mode,
                                coarse_width: h,
                            };
                            col.add(Some(n), Some(dt), mu, Some(h), heat_cda(&case)?)?;
                        }
                    }
                }
            }
        }
        ProblemKind::Transport => {
            for &dt in &time.dt {
                let world = TransportWorld::new(TransportSetup {
                    channel: cfg.mesh.channel,
                    degree: cfg.space.degree,
                    kappa: coef,
                    dt,
                    t_final: time.t_final,
                    coarse_counts: cda.coarse_counts,
                    ..TransportSetup::default()
                })?;
                let truth = reference(cfg.truth.snapshot.as_deref(), &world.space, dt, world.steps()?, || world.dns())?;
                for &mu in &cda.mu {
                    col.add(None, Some(dt), mu, None, world.cda(mu, cda.mode, &truth)?)?;
                }
            }
        }
        ProblemKind::Nse => {
            for &n in &cfg.mesh.resolutions {
                for &dt in &time.dt {
                    let world = KhWorld::new(KhSetup {
                        n,
                        nu: coef,
                        dt,
                        t_final: time.t_final,
                    })?;
                    let truth = reference(cfg.truth.snapshot.as_deref(), &world.vspace, dt, world.steps()?, || world.dns())?;
                    for &h in &cda.coarse_width {
                        for &mu in &cda.mu {
                            col.add(Some(n), Some(dt), mu, Some(h), world.cda(h, mu, cda.mode, &truth)?)?;
                        }
                    }
                }
            }
        }
        ProblemKind::PoissonProj | ProblemKind::StokesProj => {
            let kind = if cfg.problem == ProblemKind::PoissonProj {
                ProjectionKind::Poisson
            } else {
                ProjectionKind::Stokes
            };
            for &h in &cda.coarse_width {
                let sweep = ProjectionSweep {
                    kind,
                    resolutions: cfg.mesh.resolutions.clone(),
                    mus: cda.mu.clone(),
                    coefficient: coef,
                    coarse_width: h,
                    mode: cda.mode,
                    barycentric: cfg.mesh.barycentric,
                };
                for row in sweep.run()? {
                    let mut s = ErrorSeries::default();
                    s.push(0, 0.0, row.l2, row.h1)?;
                    col.add(Some(row.n), None, row.mu, Some(h), s)?;
                }
            }
        }
    }

    let summary = summary_csv(&col.runs);
    write(&dir.join("summary.csv"), &summary)?;
    let rate_tables = rate_tables(cfg, &col.runs)?;
    for t in &rate_tables {
        write(&dir.join(&t.file), &t.table.to_csv())?;
    }
    let mu_report = mu_report(&col.runs, &col.series);
    if !mu_report.is_empty() {
        let mut text = String::from("mu_a,mu_b,final_rel_diff,max_rel_diff_after_10\n");
        for p in &mu_report {
            text.push_str(&format!(
                "{},{},{:.16e},{:.16e}\n",
                p.mu_a, p.mu_b, p.final_rel_diff, p.max_rel_diff_after_10
            ));
        }
        write(&dir.join("mu_report.csv"), &text)?;
    }
    let manifest = Manifest {
        label: cfg.label(),
        config: cfg.clone(),
        runs: col.runs,
        rate_tables,
        mu_report,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
    write(&manifest_path, &json)?;
    Ok(manifest)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn summary_csv(runs: &[RunRecord]) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut out = String::from("tag,resolution,dt,mu,coarse_width,final_l2,final_h1,wall_seconds\n");
    for r in runs {
        out.push_str(&format!(
            "{},{},{},{},{},{:.16e},{:.16e},{:.3}\n",
            r.tag,
            opt(r.resolution.map(|n| n.to_string())),
            opt(r.dt.map(|d| d.to_string())),
            r.mu,
            opt(r.coarse_width.map(|h| format!("{h:e}"))),
            r.final_l2,
            r.final_h1,
            r.wall_seconds
        ));
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    Space,
    Time,
}

/// Tables along each axis with more than one value, one per combination of
/// the remaining parameters. Projections also get H1 tables.
pub fn rate_tables(cfg: &ExperimentConfig, runs: &[RunRecord]) -> Result<Vec<NamedTable>> {
    let mut out = Vec::new();
    for axis in [Axis::Space, Axis::Time] {
        let key = |r: &RunRecord| match axis {
            Axis::Space => format!("dt{}_H{}_mu{}", opt_str(r.dt), opt_str(r.coarse_width.map(|h| (1.0 / h).round())), r.mu),
            Axis::Time => format!("n{}_H{}_mu{}", opt_str(r.resolution), opt_str(r.coarse_width.map(|h| (1.0 / h).round())), r.mu),
        };
        let res = |r: &RunRecord| match axis {
            Axis::Space => r.resolution.map(|n| 1.0 / n as f64),
            Axis::Time => r.dt,
        };
        let mut groups: Vec<(String, Vec<&RunRecord>)> = Vec::new();
        for r in runs.iter().filter(|r| res(r).is_some()) {
            let k = key(r);
            match groups.iter_mut().find(|g| g.0 == k) {
                Some(g) => g.1.push(r),
                None => groups.push((k, vec![r])),
            }
        }
        let name = if axis == Axis::Space { "h" } else { "dt" };
        for (k, mut rs) in groups {
            if rs.len() < 2 {
                continue;
            }
            rs.sort_by(|a, b| res(b).unwrap_or(0.0).total_cmp(&res(a).unwrap_or(0.0)));
            let mut norms = vec![("l2", rs.iter().map(|r| (res(r).unwrap_or(0.0), r.final_l2)).collect::<Vec<_>>())];
            if cfg.is_projection() {
                norms.push(("h1", rs.iter().map(|r| (res(r).unwrap_or(0.0), r.final_h1)).collect()));
            }
            for (norm, rows) in norms {
                let table = convergence_rates(&rows)?;
                let file = format!("rates_{name}_{norm}_{k}.csv");
                out.push(NamedTable {
                    name: format!("{norm} vs {name} ({k})"),
                    file,
                    table,
                });
            }
        }
    }
    Ok(out)
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

/// Pairwise comparison of runs that differ only in μ.
fn mu_report(runs: &[RunRecord], series: &[ErrorSeries]) -> Vec<MuPair> {
    let mut out = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let (a, b) = (&runs[i], &runs[j]);
            if a.resolution != b.resolution || a.dt != b.dt || a.coarse_width != b.coarse_width || a.mu == b.mu {
                continue;
            }
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
            let curve = series[i]
                .records
                .iter()
                .zip(&series[j].records)
                .filter(|(r, _)| r.step > 10)
                .map(|(r, s)| rel(r.l2_error, s.l2_error))
                .fold(0.0, f64::max);
            out.push(MuPair {
                mu_a: a.mu.clone(),
                mu_b: b.mu.clone(),
                final_rel_diff: rel(a.final_l2, b.final_l2),
                max_rel_diff_after_10: curve,
            });
        }
    }
    out
}

/// Rate table from the final L2 errors of earlier run directories, along
/// whichever of `h` and `dt` varies across them. `mu` selects one nudging
/// parameter when the runs contain several.
pub fn table_from_runs(dirs: &[PathBuf], mu: Option<f64>) -> Result<RateTable> {
    let mut rows = Vec::new();
    for d in dirs {
        for r in Manifest::read(d)?.runs {
            if mu.is_none_or(|m| r.mu == mu_label(m)) {
                rows.push(r);
            }
        }
    }
    let distinct = |f: &dyn Fn(&RunRecord) -> Option<f64>| {
        let mut v: Vec<f64> = rows.iter().filter_map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    let by_h = |r: &RunRecord| r.resolution.map(|n| 1.0 / n as f64);
    let by_dt = |r: &RunRecord| r.dt;
    let key: &dyn Fn(&RunRecord) -> Option<f64> = match (distinct(&by_h) > 1, distinct(&by_dt) > 1) {
        (true, false) => &by_h,
        (false, true) => &by_dt,
        _ => {
            return Err(Error::InvalidInput(
                "runs must differ in exactly one of resolution and dt".into(),
            ))
        }
    };
    let mut pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| key(r).map(|x| (x, r.final_l2))).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidInput(
            "several runs share a resolution; select one nudging parameter".into(),
        ));
    }
    convergence_rates(&pts)
}
