//! Acoustic forward solvers: modal series for spheres, Lippmann–Schwinger for media.

pub mod medium;
pub mod sphere;

use crate::error::{Error, Result};
use crate::Vec3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::PI;

pub use medium::{solve_medium_ls, LsMethod, LsSolver, MediumSample, VolumePotential};
pub use sphere::{solve_sphere_plane_wave, solve_sphere_point_source, ModalSeries};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcousticConfig {
    pub k: f64,
    pub r1: f64,
    pub r2: f64,
}

impl AcousticConfig {
    pub fn new(k: f64, r1: f64, r2: f64) -> Result<Self> {
        let c = AcousticConfig { k, r1, r2 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Domain(format!("wavenumber must be positive, got {}", self.k)));
        }
        if !(self.r1 > 0.0 && self.r1 < self.r2) {
            return Err(Error::Domain(format!(
                "need 0 < R1 < R2, got R1 = {}, R2 = {}",
                self.r1, self.r2
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundaryCondition {
    SoundSoft,
    /// ∂w/∂ν + η w = 0 with constant η.
    Impedance { eta: Complex64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereScatterer {
    pub radius: f64,
    pub bc: BoundaryCondition,
}

impl SphereScatterer {
    pub fn sound_soft(radius: f64) -> Self {
        SphereScatterer { radius, bc: BoundaryCondition::SoundSoft }
    }

    pub fn impedance(radius: f64, eta: Complex64) -> Self {
        SphereScatterer { radius, bc: BoundaryCondition::Impedance { eta } }
    }

    pub fn validate(&self, cfg: &AcousticConfig) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Domain(format!("sphere radius must be positive, got {}", self.radius)));
        }
        if self.radius >= cfg.r1 {
            return Err(Error::Domain(format!(
                "scatterer radius {} does not fit inside B_R1 (R1 = {})",
                self.radius, cfg.r1
            )));
        }
        if let BoundaryCondition::Impedance { eta } = self.bc {
            if eta.im < 0.0 || !eta.re.is_finite() || !eta.im.is_finite() {
                return Err(Error::Inadmissible(format!("impedance needs Im eta >= 0, got {eta}")));
            }
        }
        Ok(())
    }
}

/// Any scatterer the acoustic solvers handle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scatterer {
    Sphere(SphereScatterer),
    Medium(MediumSample),
}

impl Scatterer {
    pub fn tag(&self) -> ScattererTag {
        match self {
            Scatterer::Sphere(s) => ScattererTag::Sphere(*s),
            Scatterer::Medium(m) => ScattererTag::Medium(m.fingerprint()),
        }
    }

    /// Radius of a ball centred at the origin that contains the scatterer.
    pub fn extent(&self) -> f64 {
        match self {
            Scatterer::Sphere(s) => s.radius,
            Scatterer::Medium(m) => m.support_radius(),
        }
    }

    pub fn summary(&self) -> serde_json::Value {
        match self {
            Scatterer::Sphere(s) => json!({ "type": "sphere", "radius": s.radius, "bc": s.bc }),
            Scatterer::Medium(m) => json!({ "type": "medium", "n_side": m.n_side, "spacing": m.spacing,
                                            "support_radius": m.support_radius(),
                                            "fingerprint": format!("{:016x}", m.fingerprint()) }),
        }
    }
}

/// Forward solver bound to one (k, scatterer) pair. The LS operator is assembled once.
pub struct ForwardModel {
    pub cfg: AcousticConfig,
    pub scatterer: Scatterer,
    ls: Option<LsSolver>,
}

impl ForwardModel {
    pub fn new(cfg: &AcousticConfig, scatterer: &Scatterer) -> Result<Self> {
        cfg.validate()?;
        let ls = match scatterer {
            Scatterer::Sphere(s) => {
                s.validate(cfg)?;
                None
            }
            Scatterer::Medium(m) => Some(LsSolver::new(cfg, m)?),
        };
        Ok(ForwardModel { cfg: *cfg, scatterer: scatterer.clone(), ls })
    }

    pub fn point_source(&self, y: &Vec3) -> Result<AcousticField> {
        match (&self.scatterer, &self.ls) {
            (Scatterer::Sphere(s), _) => solve_sphere_point_source(&self.cfg, s, y),
            (_, Some(ls)) => ls.solve_point_source(y),
            _ => unreachable!("medium model always carries an LS operator"),
        }
    }

    pub fn plane_wave(&self, d: &Vec3) -> Result<AcousticField> {
        match (&self.scatterer, &self.ls) {
            (Scatterer::Sphere(s), _) => solve_sphere_plane_wave(&self.cfg, s, d),
            (_, Some(ls)) => ls.solve_plane_wave(d),
            _ => unreachable!("medium model always carries an LS operator"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Source {
    Point { y: Vec3 },
    PlaneWave { d: Vec3 },
}

/// Φ_k(x, y) = e^{ik|x−y|} / (4π|x−y|).
pub fn fundamental_solution(k: f64, x: &Vec3, y: &Vec3) -> Result<Complex64> {
    let r = x.dist(y);
    if r == 0.0 {
        return Err(Error::Singular("fundamental solution at x = y".into()));
    }
    Ok(phi_r(k, r))
}

#[inline]
pub(crate) fn phi_r(k: f64, r: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * r), k * r)
}

/// Gradient of Φ_k(·, y) at x.
pub(crate) fn grad_phi(k: f64, x: &Vec3, y: &Vec3) -> [Complex64; 3] {
    let d = *x - *y;
    let r = d.norm();
    let f = phi_r(k, r) * (I * k - 1.0 / r) / r;
    [f * d[0], f * d[1], f * d[2]]
}

#[derive(Clone, Debug)]
pub enum Representation {
    ModalSeries(ModalSeries),
    VolumePotential(VolumePotential),
    /// No scattering (e.g. a medium with n ≡ 1).
    Zero,
}

/// Identifies the scatterer a field was computed for, so superpositions can be checked.
#[derive(Clone, Debug, PartialEq)]
pub enum ScattererTag {
    Sphere(SphereScatterer),
    Medium(u64),
}

#[derive(Clone, Debug)]
pub struct AcousticField {
    pub k: f64,
    pub source: Source,
    pub scatterer: ScattererTag,
    pub repr: Representation,
}

impl AcousticField {
    pub fn incident(&self, x: &Vec3) -> Result<Complex64> {
        match self.source {
            Source::Point { y } => fundamental_solution(self.k, x, &y),
            Source::PlaneWave { d } => Ok(Complex64::from_polar(1.0, self.k * x.dot(&d))),
        }
    }

    pub fn scattered(&self, x: &Vec3) -> Result<Complex64> {
        match &self.repr {
            Representation::ModalSeries(s) => s.eval(self.k, x),
            Representation::VolumePotential(v) => Ok(v.eval(x)),
            Representation::Zero => Ok(Complex64::new(0.0, 0.0)),
        }
    }

    /// Radial derivative ∂w^s/∂r at x.
    pub fn scattered_dr(&self, x: &Vec3) -> Result<Complex64> {
        match &self.repr {
            Representation::ModalSeries(s) => s.eval_dr(self.k, x),
            Representation::VolumePotential(v) => Ok(v.eval_dr(x)),
            Representation::Zero => Ok(Complex64::new(0.0, 0.0)),
        }
    }

    pub fn total(&self, x: &Vec3) -> Result<Complex64> {
        Ok(self.incident(x)? + self.scattered(x)?)
    }

    /// ∂w/∂r of the total field at x.
    pub fn total_dr(&self, x: &Vec3) -> Result<Complex64> {
        let xh = x.normalized();
        let di = match self.source {
            Source::Point { y } => {
                if x.dist(&y) == 0.0 {
                    return Err(Error::Singular("radial derivative at the source".into()));
                }
                let g = grad_phi(self.k, x, &y);
                g[0] * xh[0] + g[1] * xh[1] + g[2] * xh[2]
            }
            Source::PlaneWave { d } => I * self.k * d.dot(&xh) * Complex64::from_polar(1.0, self.k * x.dot(&d)),
        };
        Ok(di + self.scattered_dr(x)?)
    }

    /// Largest |w| (sound-soft) or |∂w/∂r + ηw| (impedance) over `points` on the sphere surface.
    pub fn boundary_residual(&self, sc: &SphereScatterer, points: &[Vec3]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in points {
            let r = match sc.bc {
                BoundaryCondition::SoundSoft => self.total(x)?,
                BoundaryCondition::Impedance { eta } => self.total_dr(x)? + eta * self.total(x)?,
            };
            worst = worst.max(r.norm());
        }
        Ok(worst)
    }

    pub fn far_field(&self, xhat: &Vec3) -> Complex64 {
        far_field(self, xhat)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, payload, cert) = match &self.repr {
            Representation::ModalSeries(s) => (
                "modal_series",
                json!({ "coefficients": s.coeffs.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
                        "radius": s.radius, "axis": s.axis.0 }),
                Some(s.certificate),
            ),
            Representation::VolumePotential(v) => (
                "volume_potential",
                json!({ "density": v.weights.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
                        "points": v.points.iter().map(|p| p.0).collect::<Vec<_>>(),
                        "ls_residual": v.residual, "method": v.method }),
                None,
            ),
            Representation::Zero => ("zero", json!({}), None),
        };
        json!({ "kind": kind, "k": self.k, "source": self.source,
                "payload": payload, "trunc_certificate": cert })
    }
}

/// w(x; y₁, y₂) = τ₁ w(x, y₁) + τ₂ w(x, y₂) with activations τ ∈ {0, 1}.
pub fn total_field_superposed_tau(
    f1: &AcousticField,
    f2: &AcousticField,
    tau: (bool, bool),
    x: &Vec3,
) -> Result<Complex64> {
    if f1.k != f2.k || f1.scatterer != f2.scatterer {
        return Err(Error::Domain("superposed fields must share k and scatterer".into()));
    }
    let mut w = Complex64::new(0.0, 0.0);
    if tau.0 {
        w += f1.total(x)?;
    }
    if tau.1 {
        w += f2.total(x)?;
    }
    Ok(w)
}

pub fn total_field_superposed(f1: &AcousticField, f2: &AcousticField, x: &Vec3) -> Result<Complex64> {
    total_field_superposed_tau(f1, f2, (true, true), x)
}

pub fn far_field(f: &AcousticField, xhat: &Vec3) -> Complex64 {
    let xh = xhat.normalized();
    match &f.repr {
        Representation::ModalSeries(s) => s.far_field(f.k, &xh),
        Representation::VolumePotential(v) => v.far_field(&xh),
        Representation::Zero => Complex64::new(0.0, 0.0),
    }
}

/// |r(∂w^s/∂r − ik w^s)| at r·x̂.
pub fn radiation_residual(f: &AcousticField, r: f64, xhat: &Vec3) -> Result<f64> {
    let x = xhat.normalized() * r;
    let w = f.scattered(&x)?;
    let dw = f.scattered_dr(&x)?;
    Ok((r * (dw - I * f.k * w)).norm())
}

/// Same residual for the free point-source field Φ_k(·, y).
pub fn point_source_radiation_residual(k: f64, y: &Vec3, r: f64, xhat: &Vec3) -> Result<f64> {
    let xh = xhat.normalized();
    let x = xh * r;
    let w = fundamental_solution(k, &x, y)?;
    let g = grad_phi(k, &x, y);
    let dw = g[0] * xh[0] + g[1] * xh[1] + g[2] * xh[2];
    Ok((r * (dw - I * k * w)).norm())
}
