//! Experiment configuration: TOML in, field-path errors and feasibility
//! diagnostics out.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::construction::{build, ConstructionParams};
use crate::ergodicity::Observable;
use crate::error::{Error, Result};
use crate::verification::MembershipSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub construction: ConstructionParams,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub manifolds: ManifoldConfig,
    #[serde(default)]
    pub ergodicity: ErgodicityConfig,
}

/// Where cone invariance is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConeScope {
    /// The whole torus, weighted towards the perturbation balls.
    #[default]
    Global,
    /// Only the surgery ball of the shear deformation.
    Deformation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationConfig {
    pub enabled: bool,
    pub samples: usize,
    pub volume_tol: f64,
    pub support_samples: usize,
    pub drift_tol: f64,
    pub n_boundary: usize,
    pub cone: bool,
    pub cone_scope: ConeScope,
    /// Cone apertures; default to the construction's certificate.
    pub gamma: Option<f64>,
    pub xi: Option<f64>,
    pub spectrum: bool,
    /// Membership test for the class `V`; `None` skips it.
    pub membership: Option<MembershipSettings>,
    /// Half-widths of the region `U_f`; default to 4% beyond the surgery radius.
    pub tube: Option<f64>,
    pub region_radius: Option<f64>,
    /// Radius of the local stable disk; defaults to 0.45, or inside the
    /// linear core of an index adjustment.
    pub disk_radius: Option<f64>,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            enabled: true,
            samples: 10_000,
            volume_tol: 1e-8,
            support_samples: 10_000,
            drift_tol: 1e-9,
            n_boundary: 64,
            cone: true,
            cone_scope: ConeScope::Global,
            gamma: None,
            xi: None,
            spectrum: true,
            membership: None,
            tube: None,
            region_radius: None,
            disk_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub enabled: bool,
    pub ensemble: usize,
    pub horizon: usize,
    pub renorm_every: usize,
    pub cs_ensemble: usize,
    pub cs_horizon: usize,
    /// Bound on `|sum of exponents|` per member.
    pub sum_tol: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            enabled: true,
            ensemble: 20,
            horizon: 100_000,
            renorm_every: 1,
            cs_ensemble: 20,
            cs_horizon: 10_000,
            sum_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldConfig {
    pub enabled: bool,
    pub grid: usize,
    pub horizon: usize,
    pub length: f64,
    pub h_max: f64,
    pub angle_min: f64,
    /// Extra curve-length budgets reported at the full horizon.
    pub length_ladder: Vec<f64>,
    /// Horizons of the bad-set sequence, increasing, ending at or below `horizon`.
    pub horizon_ladder: Vec<usize>,
    pub saturation_probes: usize,
    pub disk_rings: usize,
    pub disk_steps: usize,
    /// Length of the unstable curve of the periodic point for the box-visit proxy.
    pub box_length: f64,
    pub boxes: usize,
    /// Coverage required at the full horizon and length.
    pub min_coverage: f64,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        ManifoldConfig {
            enabled: true,
            grid: 32,
            horizon: 30,
            length: 50.0,
            h_max: 0.02,
            angle_min: crate::manifolds::ANGLE_MIN,
            length_ladder: vec![1.0, 5.0],
            horizon_ladder: vec![0, 5, 10, 20, 30],
            saturation_probes: 16,
            disk_rings: 12,
            disk_steps: 60,
            box_length: 2000.0,
            boxes: 32,
            min_coverage: 0.99,
        }
    }
}

/// What the deformed map's dispersion is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContrastWith {
    /// The unadjusted, undeformed base automorphism.
    #[default]
    Base,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErgodicityConfig {
    pub enabled: bool,
    pub ensemble: usize,
    pub horizons: Vec<usize>,
    pub observables: Vec<Observable>,
    pub contrast: ContrastWith,
}

impl Default for ErgodicityConfig {
    fn default() -> Self {
        ErgodicityConfig {
            enabled: true,
            ensemble: 1000,
            horizons: vec![1_000, 10_000, 100_000],
            observables: Observable::default_set(),
            contrast: ContrastWith::Base,
        }
    }
}

/// A problem found by [`validate`], anchored at a config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl ExperimentConfig {
    /// Parses TOML, reporting the path of the offending field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().message().to_string())
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Enables exactly the listed stages (`construct` is always on).
    pub fn select_stages(&mut self, list: &str) -> Result<()> {
        let mut on = [false; 4];
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "construct" => {}
                "verify" => on[0] = true,
                "lyapunov" => on[1] = true,
                "manifolds" => on[2] = true,
                "ergodicity" => on[3] = true,
                other => {
                    return Err(Error::config(
                        "stages",
                        format!("unknown stage `{other}`; expected construct, verify, lyapunov, manifolds or ergodicity"),
                    ))
                }
            }
        }
        self.verification.enabled = on[0];
        self.lyapunov.enabled = on[1];
        self.manifolds.enabled = on[2];
        self.ergodicity.enabled = on[3];
        Ok(())
    }

    /// The first diagnostic as an error, if any.
    pub fn check(&self) -> Result<()> {
        match validate(self).into_iter().next() {
            None => Ok(()),
            Some(d) => Err(Error::config(d.path, d.message)),
        }
    }
}

fn push(out: &mut Vec<Diagnostic>, path: &str, message: impl Into<String>) {
    out.push(Diagnostic {
        path: path.into(),
        message: message.into(),
    });
}

fn positive(out: &mut Vec<Diagnostic>, path: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        push(out, path, format!("must be positive, got {v}"));
    }
}

fn core_below(out: &mut Vec<Diagnostic>, path: &str, core: f64, support: f64) {
    if core >= support {
        push(out, path, format!("core {core} must be below the support {support}"));
    }
}

/// Static checks, then a trial construction whose failures are mapped to the
/// responsible fields. Returns no diagnostics for a feasible config.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let c = &cfg.construction;
    if cfg.name.trim().is_empty() {
        push(&mut out, "name", "must not be empty");
    }
    if c.period == 0 {
        push(&mut out, "construction.period", "must be positive");
    }
    if let Some(ia) = &c.index_adjust {
        for (k, v) in [
            ("flow_support", ia.flow_support),
            ("flow_core", ia.flow_core),
            ("ramp_support", ia.ramp_support),
            ("ramp_core", ia.ramp_core),
            ("psi_bound", ia.psi_bound),
        ] {
            positive(&mut out, &format!("construction.index_adjust.{k}"), v);
        }
        core_below(&mut out, "construction.index_adjust.flow_core", ia.flow_core, ia.flow_support);
        core_below(&mut out, "construction.index_adjust.ramp_core", ia.ramp_core, ia.ramp_support);
    }
    if let Some(d) = &c.deformation {
        for (k, v) in [
            ("flow_support", d.flow_support),
            ("flow_core", d.flow_core),
            ("psi_bound", d.psi_bound),
            ("ramp_support", d.ramp_support),
            ("ramp_core", d.ramp_core),
            ("scale", d.scale),
            ("gamma", d.gamma),
            ("rotation_plateau", d.rotation_plateau),
            ("rotation_support", d.rotation_support),
        ] {
            positive(&mut out, &format!("construction.deformation.{k}"), v);
        }
        core_below(&mut out, "construction.deformation.flow_core", d.flow_core, d.flow_support);
        core_below(&mut out, "construction.deformation.ramp_core", d.ramp_core, d.ramp_support);
        core_below(
            &mut out,
            "construction.deformation.rotation_plateau",
            d.rotation_plateau,
            d.rotation_support,
        );
        if let Some(r) = d.surgery_radius {
            positive(&mut out, "construction.deformation.surgery_radius", r);
        }
    }
    if let Err(e) = c.integrator.validate() {
        push(&mut out, "construction.integrator", e.to_string());
    }
    let v = &cfg.verification;
    positive(&mut out, "verification.volume_tol", v.volume_tol);
    positive(&mut out, "verification.drift_tol", v.drift_tol);
    for (k, n) in [("samples", v.samples), ("support_samples", v.support_samples)] {
        if n == 0 {
            push(&mut out, &format!("verification.{k}"), "must be positive");
        }
    }
    if v.n_boundary < 8 {
        push(&mut out, "verification.n_boundary", "need at least 8 boundary vectors");
    }
    for (k, r) in [("tube", v.tube), ("region_radius", v.region_radius), ("disk_radius", v.disk_radius)] {
        if let Some(r) = r {
            positive(&mut out, &format!("verification.{k}"), r);
            if r >= 0.5 {
                push(&mut out, &format!("verification.{k}"), "must be below 0.5");
            }
        }
    }
    if let (Some(g), Some(x)) = (v.gamma, v.xi) {
        if !(0.0 < x && x < g) {
            push(&mut out, "verification.xi", format!("need 0 < xi < gamma, got xi = {x}, gamma = {g}"));
        }
    }
    if v.enabled && v.cone && c.deformation.is_none() && (v.gamma.is_none() || v.xi.is_none()) {
        push(&mut out, "verification.xi", "cone check without a deformation needs gamma and xi");
    }
    if v.membership.is_some() && c.deformation.is_none() && (v.tube.is_none() || v.region_radius.is_none()) {
        push(&mut out, "verification.tube", "membership without a deformation needs tube and region_radius");
    }
    if let Some(m) = &v.membership {
        if m.n_time == 0 || m.grid == 0 || m.avoid_grid == 0 || m.cone_points == 0 || m.domination_points == 0 {
            push(&mut out, "verification.membership", "budgets must be positive");
        }
        positive(&mut out, "verification.membership.local_length", m.local_length);
        positive(&mut out, "verification.membership.h_max", m.h_max);
        positive(&mut out, "verification.membership.angle_min", m.angle_min);
    }
    let l = &cfg.lyapunov;
    if l.horizon < 100 {
        push(&mut out, "lyapunov.horizon", "need at least 100 steps");
    }
    if l.ensemble < 10 {
        push(&mut out, "lyapunov.ensemble", "need at least 10 members");
    }
    if l.renorm_every == 0 {
        push(&mut out, "lyapunov.renorm_every", "must be positive");
    }
    positive(&mut out, "lyapunov.sum_tol", l.sum_tol);
    if l.cs_horizon == 0 || l.cs_ensemble == 0 {
        push(&mut out, "lyapunov.cs_horizon", "budgets must be positive");
    }
    let m = &cfg.manifolds;
    if m.grid == 0 || m.boxes == 0 || m.disk_steps == 0 || m.disk_rings == 0 {
        push(&mut out, "manifolds.grid", "budgets must be positive");
    }
    positive(&mut out, "manifolds.length", m.length);
    positive(&mut out, "manifolds.h_max", m.h_max);
    positive(&mut out, "manifolds.angle_min", m.angle_min);
    positive(&mut out, "manifolds.box_length", m.box_length);
    if !(0.0..=1.0).contains(&m.min_coverage) {
        push(&mut out, "manifolds.min_coverage", "must lie in [0, 1]");
    }
    for (i, l) in m.length_ladder.iter().enumerate() {
        positive(&mut out, &format!("manifolds.length_ladder[{i}]"), *l);
    }
    if m.horizon_ladder.windows(2).any(|w| w[0] >= w[1]) || m.horizon_ladder.last().is_some_and(|h| *h > m.horizon) {
        push(&mut out, "manifolds.horizon_ladder", "must be increasing and end at or below the horizon");
    }
    let e = &cfg.ergodicity;
    if e.ensemble < 30 {
        push(&mut out, "ergodicity.ensemble", "need at least 30 members");
    }
    if e.horizons.is_empty() || e.horizons[0] == 0 || e.horizons.windows(2).any(|w| w[0] >= w[1]) {
        push(&mut out, "ergodicity.horizons", "must be positive and increasing");
    }
    if e.observables.is_empty() {
        push(&mut out, "ergodicity.observables", "need at least one observable");
    }
    if out.is_empty() {
        if let Err(err) = build(c) {
            let path = match &err {
                Error::ScaleTooLarge { .. } => "construction.deformation.scale",
                Error::ConeGapInfeasible { .. } => "construction.deformation.gamma",
                Error::RotationTooLarge { .. } => "construction.deformation.theta",
                Error::BoundInfeasible { .. } => "construction.deformation.psi_bound",
                Error::BallsNotDisjoint { .. } => "construction.deformation.surgery_radius",
                Error::AdjustmentBreaksOrder { .. } => "construction.index_adjust.sigma",
                Error::NotPeriodic { .. } => "construction.point",
                Error::NotHyperbolic { .. } | Error::NotVolumePreserving { .. } => "construction.base",
                _ => "construction",
            };
            let message = match &err {
                Error::ScaleTooLarge { .. } => format!("ScaleTooLarge predicted: {err}"),
                _ => err.to_string(),
            };
            push(&mut out, path, message);
        }
    }
    out
}
