//! Spherical chart, tangent frames and pole-free measurement grids.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::gauss_legendre;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Index, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Real> Vec3<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Vec3([a, b, c])
    }

    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    pub fn dot(&self, o: &Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Self) -> Self {
        let (a, b) = (self.0, o.0);
        Vec3([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(&self) -> Self {
        *self * self.norm().recip()
    }

    pub fn dist(&self, o: &Self) -> T {
        (*self - *o).norm()
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// A point given in the chart x = r(sinθ cosφ, sinθ sinφ, cosθ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint<T> {
    pub r: T,
    pub theta: T,
    pub phi: T,
    pub cart: Vec3<T>,
}

impl<T: Real> SpherePoint<T> {
    pub fn new(r: T, theta: T, phi: T) -> Result<Self> {
        if !(r > T::zero()) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        if theta < T::zero() || theta > T::PI() {
            return Err(Error::Domain(format!("theta = {theta} outside [0, pi]")));
        }
        let tau = T::TAU();
        let mut phi = phi % tau;
        if phi < T::zero() {
            phi = phi + tau;
        }
        if phi >= tau {
            phi = T::zero();
        }
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Ok(SpherePoint { r, theta, phi, cart: Vec3([r * st * cp, r * st * sp, r * ct]) })
    }

    pub fn from_cart(v: Vec3<T>) -> Result<Self> {
        let r = v.norm();
        if !(r > T::zero()) {
            return Err(Error::Domain("origin has no spherical coordinates".into()));
        }
        let theta = (v[2] / r).max(-T::one()).min(T::one()).acos();
        let mut phi = v[1].atan2(v[0]);
        if phi < T::zero() {
            phi = phi + T::TAU();
        }
        if phi >= T::TAU() {
            phi = T::zero();
        }
        Ok(SpherePoint { r, theta, phi, cart: v })
    }

    /// Outward unit normal x̂.
    pub fn unit(&self) -> Vec3<T> {
        self.cart * self.r.recip()
    }

    pub fn is_pole(&self) -> bool {
        self.theta.sin().abs() <= T::epsilon() * T::lit(8.0)
    }
}

/// Orthonormal frame at a non-pole point. Orientation: e_phi × nu = e_theta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentFrame<T> {
    pub e_phi: Vec3<T>,
    pub e_theta: Vec3<T>,
    pub nu: Vec3<T>,
}

pub fn tangent_frame<T: Real>(p: &SpherePoint<T>) -> Result<TangentFrame<T>> {
    if p.is_pole() {
        return Err(Error::Pole { theta: p.theta.to_f64().unwrap_or(f64::NAN) });
    }
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    Ok(TangentFrame {
        e_phi: Vec3([-sp, cp, T::zero()]),
        e_theta: Vec3([ct * cp, ct * sp, -st]),
        nu: Vec3([st * cp, st * sp, ct]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    GaussLegendre,
    UniformOffset,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereGrid<T> {
    pub radius: T,
    pub n_theta: usize,
    pub n_phi: usize,
    pub scheme: GridScheme,
    /// Azimuth offset as a fraction of one φ step.
    pub phi_shift: T,
    /// Theta-major: index = i_theta * n_phi + i_phi.
    pub points: Vec<SpherePoint<T>>,
    pub quadrature_weights: Option<Vec<T>>,
}

impl<T: Real> SphereGrid<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn thetas(&self) -> Vec<T> {
        (0..self.n_theta).map(|i| self.points[i * self.n_phi].theta).collect()
    }
}

pub fn sphere_grid<T: Real>(
    radius: T,
    n_theta: usize,
    n_phi: usize,
    scheme: GridScheme,
) -> Result<SphereGrid<T>> {
    sphere_grid_shifted(radius, n_theta, n_phi, scheme, T::zero())
}

pub fn sphere_grid_shifted<T: Real>(
    radius: T,
    n_theta: usize,
    n_phi: usize,
    scheme: GridScheme,
    phi_shift: T,
) -> Result<SphereGrid<T>> {
    if n_theta < 2 || n_phi < 4 {
        return Err(Error::Domain(format!(
            "sphere grid needs n_theta >= 2 and n_phi >= 4, got {n_theta} x {n_phi}"
        )));
    }
    if !(radius > T::zero()) {
        return Err(Error::Domain(format!("grid radius must be positive, got {radius}")));
    }
    let dphi = T::TAU() / T::of_usize(n_phi);
    let (thetas, tw): (Vec<T>, Option<Vec<T>>) = match scheme {
        GridScheme::GaussLegendre => {
            let (x, w) = gauss_legendre::<T>(n_theta);
            // descending nodes give ascending theta
            let th = x.iter().rev().map(|t| t.acos()).collect();
            let w = w.iter().rev().map(|w| *w * dphi * radius * radius).collect();
            (th, Some(w))
        }
        GridScheme::UniformOffset => {
            let step = T::PI() / T::of_usize(n_theta);
            ((0..n_theta).map(|i| (T::of_usize(i) + T::lit(0.5)) * step).collect(), None)
        }
    };
    let mut points = Vec::with_capacity(n_theta * n_phi);
    let mut weights = tw.as_ref().map(|_| Vec::with_capacity(n_theta * n_phi));
    for (i, th) in thetas.iter().enumerate() {
        for l in 0..n_phi {
            let phi = (T::of_usize(l) + phi_shift) * dphi;
            points.push(SpherePoint::new(radius, *th, phi)?);
            if let (Some(ws), Some(tw)) = (weights.as_mut(), tw.as_ref()) {
                ws.push(tw[i]);
            }
        }
    }
    Ok(SphereGrid { radius, n_theta, n_phi, scheme, phi_shift, points, quadrature_weights: weights })
}

/// Point at arc angle `s` along the great circle through `center` lying in the
/// plane {(x − center)·normal = 0}.
pub fn great_circle_point<T: Real>(
    center: &SpherePoint<T>,
    normal: &Vec3<T>,
    s: T,
) -> Result<SpherePoint<T>> {
    let nu = center.unit();
    let nn = normal.norm();
    if !(nn > T::zero()) || normal.dot(&nu).abs() > T::lit(1e-10) * nn {
        return Err(Error::Domain("great_circle normal is not tangent at the center".into()));
    }
    let t = nu.cross(&(*normal * nn.recip())).normalized();
    let (ss, cs) = s.sin_cos();
    SpherePoint::from_cart((nu * cs + t * ss) * center.r)
}

/// `n_samples` points at arc angles max_angle·i/n_samples, i = 1..=n_samples.
pub fn great_circle<T: Real>(
    center: &SpherePoint<T>,
    normal: &Vec3<T>,
    n_samples: usize,
    max_angle: T,
) -> Result<Vec<SpherePoint<T>>> {
    (1..=n_samples)
        .map(|i| {
            let s = max_angle * T::of_usize(i) / T::of_usize(n_samples);
            great_circle_point(center, normal, s)
        })
        .collect()
}
