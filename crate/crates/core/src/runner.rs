//! Staged experiment runs: construct, verify, lyapunov, manifolds,
//! ergodicity. Every stage writes into one output directory and the
//! manifest lists each file with its digest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConeScope, ContrastWith, ExperimentConfig};
use crate::construction::{build, Construction};
use crate::ergodicity::{dispersion_ladder, ergodicity_contrast, DispersionReport};
use crate::error::{Error, Result};
use crate::geometry::{TorusPoint, Vec3};
use crate::lyapunov::{cs_birkhoff_average, exponent_survey, Histogram};
use crate::manifolds::{
    bad_set_estimate, phc_plus_coverage, unstable_box_coverage, BoxCoverage, CoverageReport, CoverageSettings,
    DiskCertificate, StableDisk,
};
use crate::sampling::Halton;
use crate::verification::{
    check_cone_invariance, check_support, check_v_membership, check_volume, composite, fixed_point_spectrum,
    map_samples, Region, RegionSpec, Verdict, VerificationReport,
};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    /// Ran, and every check it makes passed.
    Passed,
    /// Ran, and a check failed or was inconclusive.
    Failed,
    /// Returned an error before finishing.
    Error,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Top-level checks made by the stage and their verdicts.
    pub checks: Vec<CheckSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    pub verdict: Verdict,
    pub worst: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    /// `None` for the manifest itself.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    pub stage_errors: usize,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    pub summary: Summary,
}

impl RunManifest {
    /// Process exit code: 0 when every enabled check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.summary.all_passed {
            0
        } else {
            1
        }
    }

    /// Digest of every file except the manifest.
    pub fn digest_of(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).and_then(|f| f.sha256.as_deref())
    }
}

/// What a stage hands back: its checks and the points it flags.
#[derive(Default)]
struct StageOutput {
    checks: Vec<VerificationReport>,
    failures: Vec<(String, [f64; 3])>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.into());
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: &[R], header: &[&str]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(rows.is_empty()).from_writer(Vec::new());
        if rows.is_empty() {
            w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
        }
        for r in rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.write(name, &bytes)
    }
}

fn digest_file(path: &Path) -> Result<(u64, String)> {
    let bytes = std::fs::read(path)?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Runs the enabled stages of `cfg` and writes all outputs into `out`.
///
/// Invalid configs are rejected with [`Error::Config`] before anything is
/// written. Stage errors are recorded in the manifest rather than returned.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.check()?;
    std::fs::create_dir_all(out)?;
    let mut w = Writer {
        dir: out.to_path_buf(),
        files: Vec::new(),
    };
    w.write("config.toml", cfg.to_toml().as_bytes())?;

    let mut stages = Vec::new();
    let t = Instant::now();
    let construction = build(&cfg.construction);
    let record = |name: &str, t: Instant, r: &Result<StageOutput>| StageRecord {
        name: name.into(),
        status: match r {
            Err(_) => StageStatus::Error,
            Ok(o) if o.checks.iter().all(|c| c.passed()) => StageStatus::Passed,
            Ok(_) => StageStatus::Failed,
        },
        wall_seconds: t.elapsed().as_secs_f64(),
        error: r.as_ref().err().map(|e| e.to_string()),
        checks: r
            .as_ref()
            .map(|o| {
                o.checks
                    .iter()
                    .map(|c| CheckSummary {
                        check: c.check.clone(),
                        verdict: c.verdict,
                        worst: c.worst,
                        witness: c.witness,
                    })
                    .collect()
            })
            .unwrap_or_default(),
    };
    let mut failures = Vec::new();
    match construction {
        Err(e) => {
            let r: Result<StageOutput> = Err(e);
            stages.push(record("construct", t, &r));
            for name in ["verify", "lyapunov", "manifolds", "ergodicity"] {
                stages.push(skipped(name));
            }
        }
        Ok(c) => {
            let drift_after_build = c.max_drift();
            w.json("construction_report.json", &c.report)?;
            stages.push(record("construct", t, &Ok(StageOutput::default())));
            let plan: [(&str, bool, StageFn); 4] = [
                ("verify", cfg.verification.enabled, verify_stage),
                ("lyapunov", cfg.lyapunov.enabled, lyapunov_stage),
                ("manifolds", cfg.manifolds.enabled, manifolds_stage),
                ("ergodicity", cfg.ergodicity.enabled, ergodicity_stage),
            ];
            let ctx = Ctx {
                cfg,
                c: &c,
                drift_after_build,
            };
            for (name, enabled, stage) in plan {
                if !enabled {
                    stages.push(skipped(name));
                    continue;
                }
                let t = Instant::now();
                let r = stage(&ctx, &mut w);
                stages.push(record(name, t, &r));
                if let Ok(o) = r {
                    failures.extend(o.failures);
                }
            }
        }
    }
    if cfg.verification.enabled || cfg.manifolds.enabled {
        let rows: Vec<FailureRow> = failures
            .into_iter()
            .map(|(source, p)| FailureRow {
                source,
                x: p[0],
                y: p[1],
                z: p[2],
            })
            .collect();
        w.csv("failure_cloud.csv", &rows, &["source", "x", "y", "z"])?;
    }

    let mut files = Vec::new();
    for name in &w.files {
        let (bytes, sha) = digest_file(&out.join(name))?;
        files.push(FileRecord {
            name: name.clone(),
            bytes,
            sha256: Some(sha),
        });
    }
    files.push(FileRecord {
        name: MANIFEST.into(),
        bytes: 0,
        sha256: None,
    });
    let count = |v: Verdict| {
        stages
            .iter()
            .flat_map(|s| &s.checks)
            .filter(|c| c.verdict == v)
            .count()
    };
    let stage_errors = stages.iter().filter(|s| s.status == StageStatus::Error).count();
    let summary = Summary {
        passed: count(Verdict::Pass),
        failed: count(Verdict::Fail),
        inconclusive: count(Verdict::Inconclusive),
        stage_errors,
        all_passed: count(Verdict::Fail) == 0 && count(Verdict::Inconclusive) == 0 && stage_errors == 0,
    };
    let manifest = RunManifest {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config_sha256: cfg.digest(),
        stages,
        files,
        summary,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(out.join(MANIFEST), text)?;
    Ok(manifest)
}

fn skipped(name: &str) -> StageRecord {
    StageRecord {
        name: name.into(),
        status: StageStatus::Skipped,
        wall_seconds: 0.0,
        error: None,
        checks: Vec::new(),
    }
}

#[derive(Serialize)]
struct FailureRow {
    source: String,
    x: f64,
    y: f64,
    z: f64,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    c: &'a Construction,
    drift_after_build: f64,
}

type StageFn = fn(&Ctx, &mut Writer) -> Result<StageOutput>;

/// The region `U_f` for the membership test.
pub fn membership_region(cfg: &ExperimentConfig, c: &Construction) -> Result<Region> {
    let surgery = c.report.deformation.as_ref().map(|d| 1.04 * d.surgery_radius);
    let pick = |v: Option<f64>, field: &str| {
        v.or(surgery)
            .ok_or_else(|| Error::config(format!("verification.{field}"), "needed without a deformation"))
    };
    Region::new(
        &RegionSpec {
            center: c.point.coords(),
            tube: pick(cfg.verification.tube, "tube")?,
            radius: pick(cfg.verification.region_radius, "region_radius")?,
        },
        c.frame,
    )
}

/// The local stable disk at the periodic point.
pub fn stable_disk(cfg: &ExperimentConfig, c: &Construction) -> StableDisk {
    let radius = cfg.verification.disk_radius.unwrap_or_else(|| match &c.report.index_adjust {
        Some(ia) => 0.95 * ia.core_radius,
        None => 0.45,
    });
    StableDisk {
        center: c.point,
        frame: c.frame,
        radius,
    }
}

/// Cone apertures `(gamma, xi)`: overrides first, then the construction certificate.
pub fn cone_apertures(cfg: &ExperimentConfig, c: &Construction) -> Result<(f64, f64)> {
    let d = c.report.deformation.as_ref();
    let gamma = cfg
        .verification
        .gamma
        .or(c.params.deformation.map(|d| d.gamma))
        .ok_or_else(|| Error::config("verification.gamma", "needed without a deformation"))?;
    let xi = cfg
        .verification
        .xi
        .or(d.map(|d| d.rotation.xi_prime))
        .ok_or_else(|| Error::config("verification.xi", "needed without a deformation"))?;
    Ok((gamma, xi))
}

/// Eigenvalues of `Df^n(p)` against the target `{mu, mu^(-1/2) e^(+-i theta)}`.
pub fn spectrum_check(c: &Construction) -> Result<VerificationReport> {
    let s = fixed_point_spectrum(&c.map, &c.point, c.period as usize)?;
    let witness = Some(&c.point);
    let r = match (&c.report.deformation, &c.params.deformation) {
        (Some(d), Some(p)) => {
            let mu = d.triple.mu;
            let target = [mu, mu.powf(-0.5), mu.powf(-0.5)];
            let modulus_err = s
                .moduli
                .iter()
                .zip(target)
                .map(|(m, t)| (m - t).abs())
                .fold(0.0, f64::max);
            let arg_err = (s.arguments[1].abs() - p.theta).abs().max((s.arguments[2].abs() - p.theta).abs());
            let ok = s.complex_stable_pair && modulus_err <= 1e-6 && arg_err <= 1e-6;
            VerificationReport::new(
                "fixed_point_spectrum",
                if ok { Verdict::Pass } else { Verdict::Fail },
                modulus_err.max(arg_err),
                witness,
                1,
            )
            .tol("modulus", 1e-6)
            .tol("argument", 1e-6)
            .detail("modulus_error", modulus_err)
            .detail("argument_error", arg_err)
            .detail("complex_stable_pair", s.complex_stable_pair as u8 as f64)
            .detail("stable_argument", s.arguments[1].abs())
        }
        _ => {
            // without a deformation only hyperbolicity is expected
            let gap = s.moduli.iter().map(|m| (m - 1.0).abs()).fold(f64::INFINITY, f64::min);
            VerificationReport::new(
                "fixed_point_spectrum",
                if gap > 1e-9 { Verdict::Pass } else { Verdict::Fail },
                gap,
                witness,
                1,
            )
            .tol("hyperbolicity_gap", 1e-9)
            .detail("complex_stable_pair", s.complex_stable_pair as u8 as f64)
        }
    };
    Ok(s.moduli.iter().enumerate().fold(r, |r, (i, m)| r.detail(&format!("modulus_{i}"), *m)))
}

fn flagged(reports: &[VerificationReport]) -> Vec<(String, [f64; 3])> {
    let mut out = Vec::new();
    for r in reports {
        if !r.passed() {
            if let Some(w) = r.witness {
                out.push((r.check.clone(), w));
            }
        }
        out.extend(flagged(&r.children));
    }
    out
}

fn verify_stage(ctx: &Ctx, w: &mut Writer) -> Result<StageOutput> {
    let (cfg, c) = (&ctx.cfg, ctx.c);
    let v = &cfg.verification;
    let mut checks = Vec::new();
    checks.push(check_volume(&c.map, &map_samples(&c.map, v.samples, cfg.seed), v.volume_tol));
    checks.push(check_support(
        &c.map,
        &c.base,
        c.map.support().perturbations(),
        v.support_samples,
        cfg.seed,
    ));
    if v.spectrum {
        checks.push(spectrum_check(c)?);
    }
    if v.cone {
        let (gamma, xi) = cone_apertures(cfg, c)?;
        let points = match (v.cone_scope, &c.surgery_ball) {
            (ConeScope::Deformation, Some(ball)) => Halton::new(cfg.seed).ball_points(ball, v.samples),
            (ConeScope::Deformation, None) => {
                return Err(Error::config("verification.cone_scope", "no deformation ball to sample"))
            }
            (ConeScope::Global, _) => map_samples(&c.map, v.samples, cfg.seed),
        };
        let mut r = check_cone_invariance(&c.map, &c.frame, gamma, xi, &points, v.n_boundary)?;
        if v.cone_scope == ConeScope::Deformation {
            r.check = "cone_invariance_deformation_ball".into();
        }
        checks.push(r);
    }
    if let Some(m) = &v.membership {
        let region = membership_region(cfg, c)?;
        let (gamma, xi) = cone_apertures(cfg, c)?;
        checks.push(check_v_membership(&c.map, &region, &stable_disk(cfg, c), gamma, xi, m, cfg.seed)?);
    }
    // last, so it covers every trajectory integrated so far
    let drift = c.max_drift();
    checks.push(
        VerificationReport::new(
            "hamiltonian_drift",
            if drift <= v.drift_tol { Verdict::Pass } else { Verdict::Fail },
            drift,
            None,
            c.flows().len(),
        )
        .tol("relative_drift", v.drift_tol)
        .detail("after_construction", ctx.drift_after_build),
    );
    let report = composite("verification", checks.clone());
    w.json("verification_report.json", &report)?;
    Ok(StageOutput {
        failures: flagged(&checks),
        checks,
    })
}

#[derive(Serialize)]
struct TraceRow {
    member: usize,
    n: usize,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
}

#[derive(Serialize)]
struct LyapunovReport {
    horizon: usize,
    ensemble_size: usize,
    seed: u64,
    mean: [f64; 3],
    max_abs_sum: f64,
    delta_nuh: f64,
    nuh_fraction: f64,
    histograms: [Histogram; 3],
    starts: Vec<[f64; 3]>,
    exponents: Vec<[f64; 3]>,
    cs_horizon: usize,
    cs_starts: Vec<[f64; 3]>,
    cs_averages: Vec<f64>,
    cs_mean: f64,
    cs_max: f64,
    check: VerificationReport,
}

fn lyapunov_stage(ctx: &Ctx, w: &mut Writer) -> Result<StageOutput> {
    let (cfg, c) = (&ctx.cfg, ctx.c);
    let l = &cfg.lyapunov;
    let survey = exponent_survey(&c.map, l.ensemble, l.horizon, cfg.seed)?;
    let rows: Vec<TraceRow> = survey
        .members
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            m.trace.iter().map(move |(n, e)| TraceRow {
                member: i,
                n: *n,
                lambda1: e[0],
                lambda2: e[1],
                lambda3: e[2],
            })
        })
        .collect();
    w.csv("lyapunov.csv", &rows, &["member", "n", "lambda1", "lambda2", "lambda3"])?;

    let (i, max_abs_sum) = survey
        .members
        .iter()
        .map(|m| m.sum().abs())
        .enumerate()
        .fold((0, 0.0), |a, (i, s)| if s > a.1 { (i, s) } else { a });
    let check = VerificationReport::new(
        "exponent_sum",
        if max_abs_sum <= l.sum_tol { Verdict::Pass } else { Verdict::Fail },
        max_abs_sum,
        survey.members.get(i).map(|m| TorusPoint::from_lift(Vec3::from(m.x0))).as_ref(),
        survey.members.len(),
    )
    .tol("sum", l.sum_tol);

    let cs_starts = Halton::new(cfg.seed.wrapping_add(17)).torus_points(l.cs_ensemble);
    let cs_averages: Vec<f64> = {
        use rayon::prelude::*;
        cs_starts
            .par_iter()
            .map(|x| cs_birkhoff_average(&c.map, x, l.cs_horizon))
            .collect::<Result<_>>()?
    };
    let report = LyapunovReport {
        horizon: l.horizon,
        ensemble_size: l.ensemble,
        seed: cfg.seed,
        mean: survey.mean,
        max_abs_sum,
        delta_nuh: survey.delta_nuh,
        nuh_fraction: survey.nuh_fraction,
        histograms: survey.histograms.clone(),
        starts: survey.members.iter().map(|m| m.x0).collect(),
        exponents: survey.members.iter().map(|m| m.exponents).collect(),
        cs_horizon: l.cs_horizon,
        cs_starts: cs_starts.iter().map(|p| p.coords()).collect(),
        cs_mean: cs_averages.iter().sum::<f64>() / cs_averages.len() as f64,
        cs_max: cs_averages.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        cs_averages,
        check: check.clone(),
    };
    w.json("lyapunov_report.json", &report)?;
    Ok(StageOutput {
        failures: Vec::new(),
        checks: vec![check],
    })
}

#[derive(Serialize)]
struct CoverageRow {
    ladder: &'static str,
    horizon: usize,
    length: f64,
    coverage: f64,
    samples: usize,
    failures: usize,
}

impl CoverageRow {
    fn of(ladder: &'static str, r: &CoverageReport) -> Self {
        CoverageRow {
            ladder,
            horizon: r.settings.horizon,
            length: r.settings.length,
            coverage: r.coverage,
            samples: r.samples,
            failures: r.failures.len(),
        }
    }
}

#[derive(Serialize)]
struct ManifoldReport {
    disk: DiskCertificate,
    settings: CoverageSettings,
    coverage: f64,
    by_horizon: Vec<f64>,
    horizon_ladder: Vec<(usize, f64)>,
    length_ladder: Vec<(f64, f64)>,
    nested: bool,
    refinement_warning: bool,
    saturation_probed: usize,
    saturation_held: usize,
    unstable_boxes: BoxCoverage,
    checks: Vec<VerificationReport>,
}

fn manifolds_stage(ctx: &Ctx, w: &mut Writer) -> Result<StageOutput> {
    let (cfg, c) = (&ctx.cfg, ctx.c);
    let m = &cfg.manifolds;
    let disk = stable_disk(cfg, c);
    let cert = disk.certify(&c.map, m.disk_rings, m.disk_steps);
    let s = CoverageSettings {
        grid: m.grid,
        horizon: m.horizon,
        length: m.length,
        h_max: m.h_max,
        angle_min: m.angle_min,
    };
    let mut horizons = m.horizon_ladder.clone();
    if horizons.last() != Some(&m.horizon) {
        horizons.push(m.horizon);
    }
    let bad = bad_set_estimate(&c.map, &disk, &s, &horizons, m.saturation_probes)?;
    let main = bad.reports.last().expect("at least one horizon").clone();

    let mut lengths: Vec<f64> = m.length_ladder.iter().copied().filter(|l| *l < m.length).collect();
    lengths.sort_by(f64::total_cmp);
    lengths.dedup();
    let mut by_length = Vec::new();
    for &length in &lengths {
        by_length.push(phc_plus_coverage(&c.map, &disk, &CoverageSettings { length, ..s })?);
    }
    by_length.push(main.clone());

    let mut rows: Vec<CoverageRow> = bad.reports.iter().map(|r| CoverageRow::of("horizon", r)).collect();
    rows.extend(by_length.iter().map(|r| CoverageRow::of("length", r)));
    w.csv("coverage.csv", &rows, &["ladder", "horizon", "length", "coverage", "samples", "failures"])?;

    let monotone = |v: &[f64]| v.windows(2).all(|p| p[0] <= p[1]);
    let h_cov: Vec<f64> = bad.reports.iter().map(|r| r.coverage).collect();
    let l_cov: Vec<f64> = by_length.iter().map(|r| r.coverage).collect();
    let ok = main.coverage >= m.min_coverage && monotone(&h_cov) && monotone(&l_cov);
    let coverage_check = VerificationReport::new(
        "unstable_coverage",
        if ok { Verdict::Pass } else { Verdict::Fail },
        1.0 - main.coverage,
        main.failures.first().map(|p| TorusPoint::from_lift(Vec3::from(*p))).as_ref(),
        main.samples,
    )
    .tol("min_coverage", m.min_coverage)
    .detail("coverage", main.coverage)
    .detail("monotone_in_horizon", monotone(&h_cov) as u8 as f64)
    .detail("monotone_in_length", monotone(&l_cov) as u8 as f64);
    let disk_check = VerificationReport::new(
        "stable_disk",
        if cert.certified { Verdict::Pass } else { Verdict::Fail },
        cert.max_offplane,
        Some(&c.point),
        cert.samples,
    )
    .tol("offplane", 1e-12)
    .detail("radius", cert.radius)
    .detail("max_radius", cert.max_radius)
    .detail("final_radius", cert.final_radius);

    let direction = c.frame.basis().column(0).into_owned();
    let boxes = unstable_box_coverage(&c.map, &c.point, &direction, m.box_length, m.h_max, m.boxes)?;
    let checks = vec![disk_check, coverage_check];
    let report = ManifoldReport {
        disk: cert,
        settings: s,
        coverage: main.coverage,
        by_horizon: main.by_horizon.clone(),
        horizon_ladder: bad.reports.iter().map(|r| (r.settings.horizon, r.coverage)).collect(),
        length_ladder: by_length.iter().map(|r| (r.settings.length, r.coverage)).collect(),
        nested: bad.nested,
        refinement_warning: bad.refinement_warning,
        saturation_probed: bad.saturation_probed,
        saturation_held: bad.saturation_held,
        unstable_boxes: boxes,
        checks: checks.clone(),
    };
    w.json("manifolds_report.json", &report)?;
    Ok(StageOutput {
        failures: main.failures.iter().map(|p| ("coverage".to_string(), *p)).collect(),
        checks,
    })
}

#[derive(Serialize)]
struct DispersionRow<'a> {
    map: &'a str,
    observable: &'a str,
    horizon: usize,
    ensemble_size: usize,
    mean: f64,
    std_dev: f64,
    space_average: f64,
}

#[derive(Serialize)]
struct ContrastSummary {
    observable: String,
    horizons: Vec<usize>,
    base_std: Vec<f64>,
    deformed_std: Vec<f64>,
    ratio: Vec<f64>,
    /// Deformed dispersion below the base at every horizon.
    below_base: bool,
    /// Deformed dispersion strictly decreasing along the horizons.
    decreasing: bool,
}

#[derive(Serialize)]
struct ErgodicityReport {
    ensemble_size: usize,
    seed: u64,
    horizons: Vec<usize>,
    contrast: Vec<ContrastSummary>,
    /// Reading of the deformed map's dispersion at the longest horizon.
    notes: Vec<String>,
}

fn ergodicity_stage(ctx: &Ctx, w: &mut Writer) -> Result<StageOutput> {
    let (cfg, c) = (&ctx.cfg, ctx.c);
    let e = &cfg.ergodicity;
    let (base, deformed): (Option<Vec<DispersionReport>>, Vec<DispersionReport>) = match e.contrast {
        ContrastWith::Base => {
            let r = ergodicity_contrast(&c.base, &c.map, &e.observables, e.ensemble, &e.horizons, cfg.seed)?;
            (Some(r.base), r.deformed)
        }
        ContrastWith::None => (None, dispersion_ladder(&c.map, &e.observables, e.ensemble, &e.horizons, cfg.seed)?),
    };
    let row = |map: &'static str| {
        move |r: &DispersionReport| (map, r.clone())
    };
    let all: Vec<(&str, DispersionReport)> = base
        .iter()
        .flatten()
        .map(row("base"))
        .chain(deformed.iter().map(row("deformed")))
        .collect();
    let rows: Vec<DispersionRow> = all
        .iter()
        .map(|(m, r)| DispersionRow {
            map: m,
            observable: &r.observable,
            horizon: r.horizon,
            ensemble_size: r.ensemble_size,
            mean: r.mean,
            std_dev: r.std_dev,
            space_average: r.space_average,
        })
        .collect();
    w.csv(
        "dispersion.csv",
        &rows,
        &["map", "observable", "horizon", "ensemble_size", "mean", "std_dev", "space_average"],
    )?;

    let mut contrast = Vec::new();
    let mut notes = Vec::new();
    let last = *e.horizons.last().expect("validated");
    for o in &e.observables {
        let label = o.label();
        let pick = |v: &[DispersionReport]| -> Vec<f64> {
            v.iter().filter(|r| r.observable == label).map(|r| r.std_dev).collect()
        };
        let d = pick(&deformed);
        if let Some(b) = &base {
            let b = pick(b);
            contrast.push(ContrastSummary {
                observable: label.clone(),
                horizons: e.horizons.clone(),
                ratio: d.iter().zip(&b).map(|(d, b)| if *b == 0.0 && *d == 0.0 { 1.0 } else { d / b }).collect(),
                below_base: d.iter().zip(&b).all(|(d, b)| d < b),
                decreasing: d.windows(2).all(|w| w[1] < w[0]),
                base_std: b,
                deformed_std: d.clone(),
            });
        }
        let mut note = String::new();
        let bound = 2.0 / (e.ensemble as f64).sqrt();
        let std = *d.last().expect("one horizon at least");
        let _ = write!(note, "{label}: dispersion {std:.4} at n = {last}; ");
        if std <= bound {
            note.push_str("consistent with ergodicity at this horizon");
        } else {
            note.push_str("not yet consistent with ergodicity at this horizon");
        }
        notes.push(note);
    }
    w.json(
        "ergodicity_report.json",
        &ErgodicityReport {
            ensemble_size: e.ensemble,
            seed: cfg.seed,
            horizons: e.horizons.clone(),
            contrast,
            notes,
        },
    )?;
    Ok(StageOutput::default())
}
