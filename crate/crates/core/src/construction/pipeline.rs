//! End-to-end construction: base automorphism, optional index adjustment,
//! rescaled shear, rotation, surgery and periodic adaptation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::flow::{IntegratorSettings, ShearFlow};
use super::index_adjust::{index_adjust, IndexAdjustLocal, IndexAdjustParams};
use super::local::{
    build_f1, compose_rotation, derive_cone_parameters, solve_eta, ConeCertificate,
    RotatedDeformation, RotationCertificate, SpectrumTriple,
};
use super::periodic::periodic_adaptation;
use super::profiles::{build_bump, TimeRamp};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Frame, Mat3, Spectrum, TorusPoint};
use crate::maps::{
    apply_surgery, linear_anosov, product_with_identity, IntegerMatrixSpec, LinearTorusMap,
    LocalMap, LocalSurgerySpec, SmoothMap,
};

/// The base automorphism.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSpec {
    /// A 3x3 hyperbolic integer matrix.
    Matrix { rows: IntegerMatrixSpec },
    /// `B x Id` for a hyperbolic 2x2 block `B`.
    ProductWithIdentity { rows: IntegerMatrixSpec },
}

impl BaseSpec {
    pub fn build(&self) -> Result<SmoothMap> {
        match self {
            BaseSpec::Matrix { rows } => linear_anosov(rows, true),
            BaseSpec::ProductWithIdentity { rows } => product_with_identity(rows),
        }
    }
}

/// Shape of the shear deformation and rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationParams {
    /// Support half-width of the profiles `psi1`, `psi2`.
    pub flow_support: f64,
    /// Requested linear core of the profiles (may be halved to meet `psi_bound`).
    pub flow_core: f64,
    pub psi_bound: f64,
    pub ramp_support: f64,
    pub ramp_core: f64,
    /// Rescaling `a`.
    pub scale: f64,
    /// Aperture of the unstable cone.
    pub gamma: f64,
    pub theta: f64,
    pub rotation_plateau: f64,
    pub rotation_support: f64,
    /// Chart radius of the surgery ball; defaults to 5% beyond the support.
    #[serde(default)]
    pub surgery_radius: Option<f64>,
}

/// Everything needed to build a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionParams {
    pub base: BaseSpec,
    /// The periodic point, in `[0, 1)^3`.
    pub point: [f64; 3],
    #[serde(default = "one")]
    pub period: u32,
    #[serde(default)]
    pub index_adjust: Option<IndexAdjustParams>,
    /// `None` leaves the (possibly adjusted) base unchanged.
    #[serde(default)]
    pub deformation: Option<DeformationParams>,
    #[serde(default)]
    pub integrator: IntegratorSettings,
}

fn one() -> u32 {
    1
}

/// Summary of a construction, serialized into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub base: String,
    pub label: String,
    pub point: [f64; 3],
    pub period: u32,
    pub base_eigenvalues: [f64; 3],
    pub index_adjust: Option<IndexAdjustReport>,
    pub deformation: Option<DeformationReport>,
    /// Eigenvalues of `Df^n(p)` as `(re, im)`.
    pub point_eigenvalues: Vec<[f64; 2]>,
    pub support: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexAdjustReport {
    pub sigma: f64,
    pub core_diagonal: [f64; 3],
    pub support_radius: f64,
    pub core_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationReport {
    pub triple: SpectrumTriple,
    pub eta: f64,
    pub slope: f64,
    pub flow_core: f64,
    pub flow_core_halvings: u32,
    pub k_bound: f64,
    pub a_k: f64,
    pub cone: ConeCertificate,
    pub rotation: RotationCertificate,
    pub support_radius: f64,
    pub surgery_radius: f64,
    pub core_radius: Option<f64>,
}

/// A built map with the pieces the verification stages need.
#[derive(Clone)]
pub struct Construction {
    pub params: ConstructionParams,
    pub base: SmoothMap,
    /// The index-adjusted base, when an adjustment was applied.
    pub adjusted: Option<SmoothMap>,
    /// The final map `f`.
    pub map: SmoothMap,
    pub point: TorusPoint,
    pub period: u32,
    /// Chart frame at `p`: expanding, weak stable, strong stable.
    pub frame: Frame,
    pub local: Option<Arc<RotatedDeformation>>,
    pub adjust_local: Option<Arc<IndexAdjustLocal>>,
    /// Chart ball outside which `f^n` agrees with its linearization near `p`.
    pub surgery_ball: Option<Ball>,
    pub report: ConstructionReport,
}

impl Construction {
    /// Shear flows used by the construction, for energy drift readings.
    pub fn flows(&self) -> Vec<&ShearFlow> {
        let mut out = Vec::new();
        if let Some(l) = &self.adjust_local {
            out.push(&l.flow);
        }
        if let Some(l) = &self.local {
            out.push(&l.f1.flow);
        }
        out
    }

    /// Largest relative energy drift recorded so far.
    pub fn max_drift(&self) -> f64 {
        self.flows()
            .iter()
            .map(|f| f.drift().max())
            .fold(0.0, f64::max)
    }

    /// `Df^n(p)`.
    pub fn point_differential(&self) -> Mat3 {
        self.map.differential_power(&self.point, self.period as usize)
    }
}

fn eigen_pairs(m: &Mat3) -> Vec<[f64; 2]> {
    Spectrum::of(m).values.iter().map(|v| [v.re, v.im]).collect()
}

/// Build the map described by `params`.
pub fn build(params: &ConstructionParams) -> Result<Construction> {
    params.integrator.validate()?;
    let base = params.base.build()?;
    let point = TorusPoint::wrap(params.point)?;
    let n = params.period;
    if n == 0 {
        return Err(Error::InvalidInput("period must be positive".into()));
    }
    let base_lin = LinearTorusMap::of(&base).expect("base maps are integral automorphisms");
    let base_eigs = Spectrum::of(base_lin.matrix()).values.map(|v| v.re);

    let (working, adjusted, adjust_local, adjust_frame) = match &params.index_adjust {
        Some(ia) => {
            if n != 1 {
                return Err(Error::InvalidInput(
                    "index adjustment is only supported at fixed points".into(),
                ));
            }
            let (g, local, frame) = index_adjust(&base, &point, ia, params.integrator)?;
            let adj = local.as_ref().map(|_| g.clone());
            (g, adj, local, Some(frame))
        }
        None => (base.clone(), None, None, None),
    };
    let index_report = adjust_local.as_ref().map(|l| IndexAdjustReport {
        sigma: l.sigma,
        core_diagonal: l.core_diagonal().into(),
        support_radius: l.support_radius(),
        core_radius: l.core().map(|c| c.0).unwrap_or(0.0),
    });

    let power = if n == 1 {
        working.clone()
    } else {
        SmoothMap::new(base_lin.power(n))
    };
    let back = power.eval(&point);
    let distance = crate::geometry::distance(&point, &back);
    if distance > 1e-9 {
        return Err(Error::NotPeriodic { distance });
    }
    let dn = power.differential(&point);
    let frame = match adjust_frame {
        Some(f) => f,
        None => Frame::eigenframe(&dn)?,
    };

    let mut local = None;
    let mut surgery_ball = None;
    let mut deformation_report = None;
    let map = match &params.deformation {
        None => working.clone(),
        Some(d) => {
            let triple = SpectrumTriple::from_diagonal(&frame.conjugate(&dn))?;
            let eta = solve_eta(&triple);
            let slope = eta.ln().sqrt();
            let b1 = build_bump(d.flow_support, d.flow_core, -slope, d.psi_bound)?;
            let b2 = build_bump(d.flow_support, d.flow_core, slope, d.psi_bound)?;
            let flow = ShearFlow::new(b1.profile, b2.profile, params.integrator)?;
            let ramp = TimeRamp::new(d.ramp_core, d.ramp_support)?;
            let f1 = build_f1(triple, flow, ramp, d.scale)?;
            let cone = derive_cone_parameters(&f1, d.gamma)?;
            let k_bound = f1.k_bound;
            let (rotated, rotation) = compose_rotation(
                Arc::new(f1),
                &cone,
                d.theta,
                d.rotation_plateau,
                d.rotation_support,
            )?;
            let rotated = Arc::new(rotated);
            let support_radius = rotated.support_radius();
            let radius = d.surgery_radius.unwrap_or(1.05 * support_radius);
            let spec = LocalSurgerySpec {
                point,
                frame,
                radius,
                local: rotated.clone(),
            };
            let fn_map = apply_surgery(&power, &spec)?;
            // for n = 1 this is the surgery on the working base itself
            let map = periodic_adaptation(&base_lin, fn_map, spec.ball(), n)?;
            deformation_report = Some(DeformationReport {
                triple,
                eta,
                slope,
                flow_core: b1.profile.core(),
                flow_core_halvings: b1.halvings.max(b2.halvings),
                k_bound,
                a_k: d.scale * k_bound,
                cone,
                rotation,
                support_radius,
                surgery_radius: radius,
                core_radius: rotated.core().map(|c| c.0),
            });
            surgery_ball = Some(spec.ball());
            local = Some(rotated);
            map
        }
    };

    let pd = map.differential_power(&point, n as usize);
    let report = ConstructionReport {
        base: base.label(),
        label: map.label(),
        point: point.coords(),
        period: n,
        base_eigenvalues: base_eigs,
        index_adjust: index_report,
        deformation: deformation_report,
        point_eigenvalues: eigen_pairs(&pd),
        support: map.support().describe(),
    };
    Ok(Construction {
        params: params.clone(),
        base,
        adjusted,
        map,
        point,
        period: n,
        frame,
        local,
        adjust_local,
        surgery_ball,
        report,
    })
}
