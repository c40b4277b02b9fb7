//! Modal series for a sphere centred at the origin.
//!
//! Both incident fields reduce to Legendre series about a single axis, so the
//! scattered field is w^s(x) = Σ c_n h_n(k|x|) P_n(x̂·axis).

use super::{AcousticConfig, AcousticField, BoundaryCondition, Representation, ScattererTag, SphereScatterer, Source};
use crate::error::{Error, Result};
use crate::specfun::{legendre, modal_table};
use crate::{ModalTable, Vec3};
use num_complex::Complex64;
use std::f64::consts::PI;

const I: Complex64 = Complex64::new(0.0, 1.0);
pub const CERTIFICATE_TOL: f64 = 1e-12;
const MAX_ORDER: usize = 1500;

#[derive(Clone, Debug)]
pub struct ModalSeries {
    pub radius: f64,
    pub axis: Vec3,
    pub coeffs: Vec<Complex64>,
    /// |c_N h_N(ka)| / max_n |c_n h_n(ka)|.
    pub certificate: f64,
}

impl ModalSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn check_outside(&self, x: &Vec3) -> Result<f64> {
        let r = x.norm();
        if r < self.radius * (1.0 - 1e-12) {
            return Err(Error::Domain(format!(
                "evaluation point |x| = {r} lies inside the obstacle (a = {})",
                self.radius
            )));
        }
        Ok(r)
    }

    fn cos_angle(&self, x: &Vec3, r: f64) -> f64 {
        (x.dot(&self.axis) / r).clamp(-1.0, 1.0)
    }

    pub fn eval(&self, k: f64, x: &Vec3) -> Result<Complex64> {
        let r = self.check_outside(x)?;
        let n = self.order();
        let tab = modal_table(n, k * r)?;
        let p = legendre(n, self.cos_angle(x, r))?;
        Ok((0..=n).map(|m| self.coeffs[m] * tab.h(m) * p[m]).sum())
    }

    pub fn eval_dr(&self, k: f64, x: &Vec3) -> Result<Complex64> {
        let r = self.check_outside(x)?;
        let n = self.order();
        let tab = modal_table(n, k * r)?;
        let p = legendre(n, self.cos_angle(x, r))?;
        Ok((0..=n).map(|m| self.coeffs[m] * tab.hp(m) * (k * p[m])).sum())
    }

    pub fn far_field(&self, k: f64, xhat: &Vec3) -> Complex64 {
        let n = self.order();
        let p = legendre(n, xhat.dot(&self.axis).clamp(-1.0, 1.0)).expect("clamped");
        let mut phase = -I / k;
        let mut s = Complex64::new(0.0, 0.0);
        for m in 0..=n {
            s += self.coeffs[m] * phase * p[m];
            phase *= -I;
        }
        s
    }
}

fn reflection(bc: &BoundaryCondition, k: f64, ta: &ModalTable, n: usize) -> Complex64 {
    match bc {
        BoundaryCondition::SoundSoft => -Complex64::from(ta.j[n]) / ta.h(n),
        BoundaryCondition::Impedance { eta } => {
            -(k * ta.jp[n] + eta * ta.j[n]) / (ta.hp(n) * k + eta * ta.h(n))
        }
    }
}

fn initial_order(k: f64, a: f64, rho: f64) -> usize {
    (k * a.max(rho)).ceil() as usize + 12 + (4.0 * (k * a).cbrt()).ceil() as usize
}

fn build_series<F>(k: f64, sc: &SphereScatterer, axis: Vec3, n0: usize, coeff: F) -> Result<ModalSeries>
where
    F: Fn(usize, Complex64) -> Result<Vec<Complex64>>,
{
    let a = sc.radius;
    let mut n = n0;
    loop {
        let ta = modal_table(n, k * a)?;
        let refl: Vec<Complex64> = (0..=n).map(|m| reflection(&sc.bc, k, &ta, m)).collect();
        let coeffs = coeff(n, Complex64::new(0.0, 0.0))?
            .into_iter()
            .zip(&refl)
            .map(|(c, r)| c * r)
            .collect::<Vec<_>>();
        let terms: Vec<f64> = (0..=n).map(|m| (coeffs[m] * ta.h(m)).norm()).collect();
        if terms.iter().any(|t| !t.is_finite()) || coeffs.iter().any(|c| !c.norm().is_finite()) {
            return Err(Error::Overflow(format!(
                "modal terms overflow at order {n} (ka = {})",
                k * a
            )));
        }
        let max = terms.iter().cloned().fold(0.0, f64::max);
        let certificate = if max == 0.0 { 0.0 } else { terms[n] / max };
        if certificate < CERTIFICATE_TOL {
            return Ok(ModalSeries { radius: a, axis, coeffs, certificate });
        }
        n += 8;
        if n > MAX_ORDER {
            return Err(Error::Overflow(format!(
                "truncation certificate {certificate:e} not reached by order {MAX_ORDER}"
            )));
        }
    }
}

/// Scattered field of Φ_k(·, y) by the sphere.
pub fn solve_sphere_point_source(cfg: &AcousticConfig, sc: &SphereScatterer, y: &Vec3) -> Result<AcousticField> {
    cfg.validate()?;
    sc.validate(cfg)?;
    let k = cfg.k;
    let ry = y.norm();
    if ry <= sc.radius {
        return Err(Error::Domain(format!(
            "source |y| = {ry} must lie outside the obstacle (a = {})",
            sc.radius
        )));
    }
    let axis = *y * (1.0 / ry);
    let n0 = initial_order(k, sc.radius, ry);
    let series = build_series(k, sc, axis, n0, |n, _| {
        let ty = modal_table(n, k * ry)?;
        Ok((0..=n)
            .map(|m| I * k / (4.0 * PI) * (2 * m + 1) as f64 * ty.h(m))
            .collect())
    })?;
    Ok(AcousticField {
        k,
        source: Source::Point { y: *y },
        scatterer: ScattererTag::Sphere(*sc),
        repr: Representation::ModalSeries(series),
    })
}

/// Scattered field of the plane wave e^{ik x·d}.
pub fn solve_sphere_plane_wave(cfg: &AcousticConfig, sc: &SphereScatterer, d: &Vec3) -> Result<AcousticField> {
    cfg.validate()?;
    sc.validate(cfg)?;
    if (d.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("direction must be a unit vector, |d| = {}", d.norm())));
    }
    let k = cfg.k;
    let n0 = initial_order(k, sc.radius, 0.0);
    let series = build_series(k, sc, *d, n0, |n, _| {
        let mut ph = Complex64::new(1.0, 0.0);
        let mut out = Vec::with_capacity(n + 1);
        for m in 0..=n {
            out.push(ph * (2 * m + 1) as f64);
            ph *= I;
        }
        Ok(out)
    })?;
    Ok(AcousticField {
        k,
        source: Source::PlaneWave { d: *d },
        scatterer: ScattererTag::Sphere(*sc),
        repr: Representation::ModalSeries(series),
    })
}
