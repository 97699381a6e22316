//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line and then
//! asserts it.

use std::sync::OnceLock;
use std::time::Instant;

use torus_deform::config::ExperimentConfig;
use torus_deform::construction::{build, Construction};
use torus_deform::ergodicity::{dispersion_ladder, Observable};
use torus_deform::geometry::{Spectrum, TorusPoint};
use torus_deform::lyapunov::{benettin_exponents, cs_birkhoff_average};
use torus_deform::manifolds::{bad_set_estimate, phc_plus_coverage, CoverageSettings, ANGLE_MIN};
use torus_deform::maps::{product_with_identity, IntegerMatrixSpec};
use torus_deform::sampling::Halton;
use torus_deform::verification::{
    check_cone_invariance, check_support, check_v_membership, check_volume, fixed_point_spectrum, map_samples,
    MembershipSettings,
};
use torus_deform::{presets, runner};

fn preset(name: &str) -> ExperimentConfig {
    presets::get(name).unwrap()
}

fn bv() -> &'static Construction {
    static C: OnceLock<Construction> = OnceLock::new();
    C.get_or_init(|| build(&preset("bv-t3").construction).unwrap())
}

fn catxid() -> &'static Construction {
    static C: OnceLock<Construction> = OnceLock::new();
    C.get_or_init(|| build(&preset("catxid").construction).unwrap())
}

fn report(n: u32, title: &str, ok: bool, detail: String, t: Instant) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {n} ({title}): {detail} [{:.1}s]", t.elapsed().as_secs_f64());
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_fixed_point_eigenvalues() {
    let t = Instant::now();
    let cfg = preset("bv-t3");
    let c = build(&cfg.construction).unwrap();
    let theta = cfg.construction.deformation.unwrap().theta;
    let mu = c.report.deformation.as_ref().unwrap().triple.mu;
    // independent oracle: the base matrix's own spectrum
    let base_mu = Spectrum::of(&c.base.differential(&c.point)).moduli()[0];
    let s = fixed_point_spectrum(&c.map, &c.point, 1).unwrap();
    let target = [base_mu, base_mu.powf(-0.5), base_mu.powf(-0.5)];
    let modulus_err = s.moduli.iter().zip(target).map(|(m, t)| (m - t).abs()).fold(0.0, f64::max);
    let arg_err = [s.arguments[0].abs(), (s.arguments[1].abs() - theta).abs(), (s.arguments[2].abs() - theta).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let ok = modulus_err <= 1e-6 && arg_err <= 1e-6 && s.complex_stable_pair && (mu - base_mu).abs() <= 1e-9;
    report(
        1,
        "construction exactness",
        ok,
        format!("modulus error {modulus_err:.2e}, argument error {arg_err:.2e}, moduli {:?}", s.moduli),
        t,
    );
}

#[test]
fn criterion_02_volume_preservation() {
    let t = Instant::now();
    let mut worst = Vec::new();
    for (name, c) in [("bv-t3", bv()), ("catxid", catxid())] {
        let r = check_volume(&c.map, &map_samples(&c.map, 10_000, 1), 1e-8);
        worst.push((name, r.worst, r.passed(), r.samples));
    }
    let ok = worst.iter().all(|w| w.2 && w.3 == 10_000);
    let detail = worst.iter().map(|w| format!("{} max |det - 1| {:.2e}", w.0, w.1)).collect::<Vec<_>>().join(", ");
    report(2, "volume preservation", ok, detail, t);
}

#[test]
fn criterion_03_support_exactness() {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, c) in [("bv-t3", bv()), ("catxid", catxid())] {
        let r = check_support(&c.map, &c.base, c.map.support().perturbations(), 10_000, 1);
        ok &= r.worst == 0.0 && r.samples == 10_000;
        parts.push(format!("{name} max distance {:e} on {} points", r.worst, r.samples));
    }
    report(3, "support exactness", ok, parts.join(", "), t);
}

#[test]
fn criterion_04_cone_certificate() {
    let t = Instant::now();
    let c = bv();
    let d = c.report.deformation.as_ref().unwrap();
    let points = map_samples(&c.map, 10_000, 1);
    let r = check_cone_invariance(&c.map, &c.frame, d.cone.gamma, d.rotation.xi_prime, &points, 64).unwrap();
    let ok = r.passed() && r.worst >= 0.05 && r.samples == 10_000;
    report(
        4,
        "cone certificate",
        ok,
        format!(
            "gamma {} xi' {:.4}: worst aperture {:.4}, margin {:.3}",
            d.cone.gamma, d.rotation.xi_prime, r.details["worst_aperture"], r.worst
        ),
        t,
    );
}

#[test]
fn criterion_05_hamiltonian_sentinel() {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["bv-t3", "catxid"] {
        let c = build(&preset(name).construction).unwrap();
        let after_build = c.max_drift();
        // exercise the flows on the perturbation balls as the checks do
        let pts = map_samples(&c.map, 10_000, 2);
        let _ = check_volume(&c.map, &pts, 1e-8);
        let drift = c.max_drift();
        ok &= drift <= 1e-9 && !c.flows().is_empty();
        parts.push(format!("{name} drift {after_build:.2e} after construction, {drift:.2e} after sampling"));
    }
    report(5, "hamiltonian sentinel", ok, parts.join(", "), t);
}

#[test]
fn criterion_06_lyapunov_oracles() {
    let t = Instant::now();
    let c = bv();
    let logs = Spectrum::of(&c.base.differential(&c.point)).moduli().map(f64::ln);
    let x0 = TorusPoint::wrap([0.123, 0.456, 0.789]).unwrap();
    let e = benettin_exponents(&c.base, &x0, 10_000, 1).unwrap();
    let base_err = e.exponents.iter().zip(logs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let starts = Halton::new(6).torus_points(4);
    let sums: Vec<f64> = starts
        .iter()
        .chain([c.point.translate(&torus_deform::geometry::Vec3::new(0.01, 0.02, -0.01))].iter())
        .map(|x| benettin_exponents(&c.map, x, 100_000, 1).unwrap().sum().abs())
        .collect();
    let worst_sum = sums.iter().copied().fold(0.0, f64::max);
    let ok = base_err <= 1e-6 && worst_sum <= 1e-3;
    report(
        6,
        "lyapunov oracle equivalence",
        ok,
        format!("base error {base_err:.2e} at n = 1e4, deformed max |sum| {worst_sum:.2e} at n = 1e5 over 5 starts"),
        t,
    );
}

#[test]
fn criterion_07_non_partial_hyperbolicity_and_membership() {
    let t = Instant::now();
    let cfg = preset("bv-t3");
    let c = bv();
    let s = fixed_point_spectrum(&c.map, &c.point, 1).unwrap();
    let settings = MembershipSettings::default();
    assert_eq!((settings.grid, settings.n_time), (32, 30));
    let region = runner::membership_region(&cfg, c).unwrap();
    let disk = runner::stable_disk(&cfg, c);
    let (gamma, xi) = runner::cone_apertures(&cfg, c).unwrap();
    let v = check_v_membership(&c.map, &region, &disk, gamma, xi, &settings, cfg.seed).unwrap();
    let parts: Vec<String> = v.children.iter().map(|r| format!("{} {:?}", r.check, r.verdict)).collect();
    report(
        7,
        "non-partial-hyperbolicity witness and membership",
        s.complex_stable_pair && v.passed(),
        format!("complex stable pair {}, {}", s.complex_stable_pair, parts.join(", ")),
        t,
    );
}

#[test]
fn criterion_08_unstable_coverage() {
    let t = Instant::now();
    let cfg = preset("bv-t3");
    let c = bv();
    let disk = runner::stable_disk(&cfg, c);
    let s = CoverageSettings {
        grid: 32,
        horizon: 30,
        length: 50.0,
        h_max: 0.02,
        angle_min: ANGLE_MIN,
    };
    let bad = bad_set_estimate(&c.map, &disk, &s, &[0, 5, 10, 20, 30], 0).unwrap();
    let by_n: Vec<f64> = bad.reports.iter().map(|r| r.coverage).collect();
    let mut by_l: Vec<f64> = [1.0, 5.0]
        .iter()
        .map(|&length| phc_plus_coverage(&c.map, &disk, &CoverageSettings { length, ..s }).unwrap().coverage)
        .collect();
    let full = *by_n.last().unwrap();
    by_l.push(full);
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
    let ok = full >= 0.99 && monotone(&by_n) && monotone(&by_l) && bad.reports[0].samples == 32 * 32 * 32;
    report(
        8,
        "unstable coverage",
        ok,
        format!("coverage {full:.4}; N ladder {by_n:.4?}; L ladder (1, 5, 50) {by_l:.4?}"),
        t,
    );
}

#[test]
fn criterion_09_mostly_contracting_oracles() {
    let t = Instant::now();
    let c = bv();
    let rho = Spectrum::of(&c.base.differential(&c.point)).moduli()[1];
    let x0 = TorusPoint::wrap([0.31, 0.72, 0.15]).unwrap();
    let linear = cs_birkhoff_average(&c.base, &x0, 10_000).unwrap();
    let cat = product_with_identity(&IntegerMatrixSpec::new(vec![vec![2, 1], vec![1, 1]]).unwrap()).unwrap();
    let product = cs_birkhoff_average(&cat, &x0, 10_000).unwrap();
    let ok = (linear - rho.ln()).abs() <= 1e-6 && product.abs() <= 1e-3;
    report(
        9,
        "mostly-contracting oracles",
        ok,
        format!("linear base {linear:.9} vs log rho {:.9}; cat x Id {product:.2e}", rho.ln()),
        t,
    );
}

#[test]
fn criterion_10_ergodicity_contrast() {
    let t = Instant::now();
    let c = catxid();
    let obs = [Observable::cos([0, 0, 1])];
    let horizons = [1_000, 10_000, 100_000];
    let base = dispersion_ladder(&c.base, &obs, 1000, &horizons, 1).unwrap();
    let deformed = dispersion_ladder(&c.map, &obs, 1000, &horizons, 1).unwrap();
    let b: Vec<f64> = base.iter().map(|r| r.std_dev).collect();
    let d: Vec<f64> = deformed.iter().map(|r| r.std_dev).collect();
    let oracle = 0.5f64.sqrt();
    let ok = (b[1] - oracle).abs() <= 0.05
        && d.iter().zip(&b).all(|(d, b)| d < b)
        && d.windows(2).all(|w| w[1] < w[0]);
    report(
        10,
        "ergodicity contrast",
        ok,
        format!("base {b:.4?} (oracle {oracle:.4} at n = 1e4), deformed {d:.4?}"),
        t,
    );
}

#[test]
fn criterion_11_reproducibility() {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for name in presets::names() {
        let mut cfg = preset(name);
        // reduced budgets; the code paths are those of the full run
        cfg.verification.samples = 2000;
        cfg.verification.support_samples = 2000;
        if let Some(m) = cfg.verification.membership.as_mut() {
            m.grid = 8;
            m.avoid_grid = 16;
            m.cone_points = 2000;
            m.domination_points = 200;
        }
        cfg.lyapunov.ensemble = 10;
        cfg.lyapunov.horizon = 2000;
        cfg.lyapunov.cs_ensemble = 4;
        cfg.lyapunov.cs_horizon = 1000;
        cfg.manifolds.grid = 6;
        cfg.manifolds.box_length = 100.0;
        cfg.ergodicity.ensemble = 50;
        cfg.ergodicity.horizons = vec![100, 1000];
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let runs: Vec<runner::RunManifest> = dirs.iter().map(|d| runner::run(&cfg, d.path()).unwrap()).collect();
        let files: Vec<&str> =
            runs[0].files.iter().filter(|f| f.sha256.is_some()).map(|f| f.name.as_str()).collect();
        let same = runs[0].files.len() == runs[1].files.len()
            && files.iter().all(|f| runs[0].digest_of(f) == runs[1].digest_of(f))
            && runs[0].config_sha256 == runs[1].config_sha256;
        ok &= same && files.len() >= 8;
        parts.push(format!("{name} {} files {}", files.len(), if same { "identical" } else { "differ" }));
    }
    report(11, "reproducibility", ok, parts.join(", "), t);
}
