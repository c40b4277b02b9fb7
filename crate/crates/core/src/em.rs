//! Electric dipole fields and PEC-sphere scattering with vector spherical wave functions.
//!
//! With M_n^m = curl{x z_n Y_n^m} and N_n^m = (1/k) curl M_n^m,
//!
//!   E^i(x, y) = −k² Σ_{n≥1} Σ_m [M^j(x) ⊗ M̄^h(y) + N^j(x) ⊗ N̄^h(y)] / (n(n+1)),  |x| < |y|,
//!
//! where the bar conjugates the angular part only. The m-sums are done in closed form
//! through F_n(t) = (2n+1)/(4π) P_n(t), t = x̂·ŷ, so no (n, m) loop is needed at runtime.

use crate::error::{Error, Result};
use crate::geometry::{great_circle_point, tangent_frame};
use crate::specfun::{assoc_legendre_normalized, legendre_derivs, modal_table};
use crate::{SpherePoint, TangentFrame, Vec3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::PI;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const CERTIFICATE_TOL: f64 = 1e-12;
const MAX_ORDER: usize = 800;

pub type CVec3 = [Complex64; 3];
pub type Mat3 = [[Complex64; 3]; 3];

pub fn mat_zero() -> Mat3 {
    [[ZERO; 3]; 3]
}

pub fn mat_transpose(m: &Mat3) -> Mat3 {
    let mut t = mat_zero();
    for (r, row) in m.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            t[c][r] = *v;
        }
    }
    t
}

pub fn mat_vec(m: &Mat3, p: &Vec3) -> CVec3 {
    let mut out = [ZERO; 3];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
    }
    out
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = mat_zero();
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|t| a[r][t] * b[t][c]).sum();
        }
    }
    out
}

fn mat_add_scaled(acc: &mut Mat3, m: &Mat3, s: Complex64) {
    for r in 0..3 {
        for c in 0..3 {
            acc[r][c] += m[r][c] * s;
        }
    }
}

fn outer(u: &Vec3, v: &Vec3) -> Mat3 {
    let mut m = mat_zero();
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = Complex64::from(u[r] * v[c]);
        }
    }
    m
}

/// Matrix of w ↦ v × w.
fn cross_mat(v: &Vec3) -> Mat3 {
    let z = ZERO;
    let c = |a: f64| Complex64::from(a);
    [[z, c(-v[2]), c(v[1])], [c(v[2]), z, c(-v[0])], [c(-v[1]), c(v[0]), z]]
}

pub fn cdot(a: &Vec3, e: &CVec3) -> Complex64 {
    a[0] * e[0] + a[1] * e[1] + a[2] * e[2]
}

pub fn cnorm(e: &CVec3) -> f64 {
    e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn cadd(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// E^i(x, y) with its magnetic companion H^i(x, y) = curl_x(Φ_k(x, y) ·)/1.
#[derive(Clone, Copy, Debug)]
pub struct DipoleMatrix {
    pub value: Mat3,
    pub magnetic: Mat3,
}

/// f(r) = 3/r² − 3ik/r − k².
pub fn dipole_f(k: f64, r: f64) -> Complex64 {
    Complex64::new(3.0 / (r * r) - k * k, -3.0 * k / r)
}

pub fn dipole_matrix(k: f64, x: &Vec3, y: &Vec3) -> Result<DipoleMatrix> {
    let d = *x - *y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Singular("dipole matrix at x = y".into()));
    }
    let w = d * (1.0 / r);
    let phi = Complex64::from_polar(1.0 / (4.0 * PI * r), k * r);
    let diag = (I / k) * (Complex64::from(k * k) + (I * k - 1.0 / r) / r) * phi;
    let ww = (I / k) * dipole_f(k, r) * phi;
    let mut value = outer(&w, &w);
    for (rr, row) in value.iter_mut().enumerate() {
        for (cc, v) in row.iter_mut().enumerate() {
            *v *= ww;
            if rr == cc {
                *v += diag;
            }
        }
    }
    let dphi = phi * (I * k - 1.0 / r);
    let mut magnetic = cross_mat(&w);
    for row in magnetic.iter_mut() {
        for v in row.iter_mut() {
            *v *= dphi;
        }
    }
    Ok(DipoleMatrix { value, magnetic })
}

/// Radial factors of M (m), the x̂ Y part of N (a) and the surface-gradient part of N (b).
#[derive(Clone, Debug)]
struct Slot {
    m: Vec<Complex64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

#[derive(Clone, Copy)]
enum Radial {
    /// j_n slots, used by the expansion tests against the free dyadic.
    #[cfg(test)]
    Regular,
    Outgoing,
}

fn slot_radial(n_max: usize, rho: f64, kind: Radial) -> Result<Slot> {
    let tab = modal_table(n_max, rho)?;
    let (mut m, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
    for n in 0..=n_max {
        let (z, zp) = match kind {
            #[cfg(test)]
            Radial::Regular => (Complex64::from(tab.j[n]), Complex64::from(tab.jp[n])),
            Radial::Outgoing => (tab.h(n), tab.hp(n)),
        };
        m.push(z);
        a.push(z * ((n * (n + 1)) as f64 / rho));
        b.push(z / rho + zp);
    }
    Ok(Slot { m, a, b })
}

/// Asymptotic factors of an outgoing slot as |·| → ∞, scaled by `scale`.
fn slot_far(n_max: usize, k: f64, scale: f64) -> Slot {
    let mut ph = Complex64::new(scale / k, 0.0);
    let (mut m, mut b) = (Vec::new(), Vec::new());
    for _ in 0..=n_max {
        b.push(ph);
        ph *= -I;
        m.push(ph);
    }
    Slot { m, a: vec![ZERO; n_max + 1], b }
}

/// E-dyadic −k² Σ c_n [wm_n M_x M̄_yᵀ + wn_n N_x N̄_yᵀ] and its curl partner
/// H = ik² Σ c_n [wm_n N_x M̄_yᵀ + wn_n M_x N̄_yᵀ].
fn assemble(k: f64, n_max: usize, xh: &Vec3, yh: &Vec3, sx: &Slot, sy: &Slot, wm: &[Complex64], wn: &[Complex64]) -> Result<(Mat3, Mat3)> {
    let t = xh.dot(yh).clamp(-1.0, 1.0);
    let (p, d1, d2) = legendre_derivs(n_max, t)?;
    let mut alpha = [ZERO; 2];
    let mut beta = [ZERO; 5];
    let mut hm = [ZERO; 3];
    let mut hn = [ZERO; 3];
    for n in 1..=n_max {
        let c = (2 * n + 1) as f64 / (4.0 * PI * (n * (n + 1)) as f64);
        let (f0, f1, f2) = (p[n] * c, d1[n] * c, d2[n] * c);
        let mm = wm[n] * sx.m[n] * sy.m[n];
        alpha[0] += mm * f2;
        alpha[1] += mm * f1;
        beta[0] += wn[n] * sx.a[n] * sy.a[n] * f0;
        beta[1] += wn[n] * sx.a[n] * sy.b[n] * f1;
        beta[2] += wn[n] * sx.b[n] * sy.a[n] * f1;
        let bb = wn[n] * sx.b[n] * sy.b[n];
        beta[3] += bb * f2;
        beta[4] += bb * f1;
        // N_x M̄_y: −m_y [a_x F' x̂ vᵀ + b_x (F'' u vᵀ + F' W)] C_yᵀ
        let nm = wm[n] * sy.m[n];
        hm[0] += nm * sx.a[n] * f1;
        hm[1] += nm * sx.b[n] * f2;
        hm[2] += nm * sx.b[n] * f1;
        // M_x N̄_y: −m_x C_x [a_y F' u ŷᵀ + b_y (F'' u vᵀ + F' W)]
        let mn = wn[n] * sx.m[n];
        hn[0] += mn * sy.a[n] * f1;
        hn[1] += mn * sy.b[n] * f2;
        hn[2] += mn * sy.b[n] * f1;
    }
    let u = *yh - *xh * t;
    let v = *xh - *yh * t;
    let mut w = outer(xh, yh);
    for row in w.iter_mut() {
        for e in row.iter_mut() {
            *e *= t;
        }
    }
    let xx = outer(xh, xh);
    let yy = outer(yh, yh);
    for r in 0..3 {
        w[r][r] += ONE;
        for c in 0..3 {
            w[r][c] -= xx[r][c] + yy[r][c];
        }
    }
    let uv = outer(&u, &v);
    let cx = cross_mat(xh);
    let cyt = mat_transpose(&cross_mat(yh));

    let mut inner = mat_zero();
    mat_add_scaled(&mut inner, &uv, alpha[0]);
    mat_add_scaled(&mut inner, &w, alpha[1]);
    let mut e = mat_mul(&mat_mul(&cx, &inner), &cyt);
    mat_add_scaled(&mut e, &outer(xh, yh), beta[0]);
    mat_add_scaled(&mut e, &outer(xh, &v), beta[1]);
    mat_add_scaled(&mut e, &outer(&u, yh), beta[2]);
    mat_add_scaled(&mut e, &uv, beta[3]);
    mat_add_scaled(&mut e, &w, beta[4]);
    for row in e.iter_mut() {
        for x in row.iter_mut() {
            *x *= -k * k;
        }
    }

    let mut a1 = mat_zero();
    mat_add_scaled(&mut a1, &outer(xh, &v), hm[0]);
    mat_add_scaled(&mut a1, &uv, hm[1]);
    mat_add_scaled(&mut a1, &w, hm[2]);
    let mut h = mat_mul(&a1, &cyt);
    let mut a2 = mat_zero();
    mat_add_scaled(&mut a2, &outer(&u, yh), hn[0]);
    mat_add_scaled(&mut a2, &uv, hn[1]);
    mat_add_scaled(&mut a2, &w, hn[2]);
    let h2 = mat_mul(&cx, &a2);
    for r in 0..3 {
        for c in 0..3 {
            h[r][c] = (h[r][c] + h2[r][c]) * (-I * k * k);
        }
    }
    Ok((e, h))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleSource {
    pub y: Vec3,
    pub p: Vec3,
    pub tau: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EmSource {
    Dipole(DipoleSource),
    /// E^i(x, d)p = ik (I − ddᵀ)p e^{ik x·d}.
    PlaneWave { d: Vec3, p: Vec3 },
}

#[derive(Clone, Debug)]
pub struct EmField {
    pub k: f64,
    pub radius: f64,
    pub source: EmSource,
    /// Mie coefficients R^M_n, R^N_n for n = 0..=N (index 0 unused).
    pub rm: Vec<Complex64>,
    pub rn: Vec<Complex64>,
    pub certificate: f64,
}

fn mie(n_max: usize, ka: f64) -> Result<(Vec<Complex64>, Vec<Complex64>, Slot)> {
    let tab = modal_table(n_max, ka)?;
    let sa = slot_radial(n_max, ka, Radial::Outgoing)?;
    let mut rm = vec![ZERO; n_max + 1];
    let mut rn = vec![ZERO; n_max + 1];
    for n in 1..=n_max {
        rm[n] = -Complex64::from(tab.j[n]) / tab.h(n);
        rn[n] = -Complex64::from(tab.j[n] + ka * tab.jp[n]) / (tab.h(n) + tab.hp(n) * ka);
    }
    Ok((rm, rn, sa))
}

fn build(k: f64, a: f64, source: EmSource) -> Result<EmField> {
    if !(k > 0.0) || !(a > 0.0) {
        return Err(Error::Domain(format!("need k > 0 and a > 0, got k = {k}, a = {a}")));
    }
    let ry = match &source {
        EmSource::Dipole(s) => s.y.norm(),
        EmSource::PlaneWave { .. } => 0.0,
    };
    let mut n_max = (k * a.max(ry)).ceil() as usize + 12 + (4.0 * (k * a).cbrt()).ceil() as usize;
    loop {
        let (rm, rn, sa) = mie(n_max, k * a)?;
        let sy = match &source {
            EmSource::Dipole(_) => slot_radial(n_max, k * ry, Radial::Outgoing)?,
            EmSource::PlaneWave { .. } => slot_far(n_max, k, 4.0 * PI),
        };
        let terms: Vec<f64> = (0..=n_max)
            .map(|n| {
                if n == 0 {
                    return 0.0;
                }
                let c = (2 * n + 1) as f64 / (n * (n + 1)) as f64;
                let tm = (rm[n] * sa.m[n] * sy.m[n]).norm();
                let tb = (rn[n] * sa.b[n] * sy.b[n]).norm();
                let ta = (rn[n] * sa.a[n] * sy.a[n]).norm();
                c * tm.max(tb).max(ta)
            })
            .collect();
        if terms.iter().any(|t| !t.is_finite()) {
            return Err(Error::Overflow(format!("vector modal terms overflow at order {n_max}")));
        }
        let max = terms.iter().cloned().fold(0.0, f64::max);
        let certificate = if max == 0.0 { 0.0 } else { terms[n_max] / max };
        if certificate < CERTIFICATE_TOL {
            return Ok(EmField { k, radius: a, source, rm, rn, certificate });
        }
        n_max += 8;
        if n_max > MAX_ORDER {
            return Err(Error::Overflow(format!("certificate {certificate:e} not reached by order {MAX_ORDER}")));
        }
    }
}

pub fn solve_pec_sphere_dipole(k: f64, radius: f64, src: &DipoleSource) -> Result<EmField> {
    if !src.tau {
        return Err(Error::Domain("dipole source must be active (tau = 1) to be solved".into()));
    }
    if src.y.norm() <= radius {
        return Err(Error::Domain(format!(
            "dipole at |y| = {} must lie outside the obstacle (a = {radius})",
            src.y.norm()
        )));
    }
    if src.p.norm() == 0.0 {
        return Err(Error::Domain("active dipole needs p != 0".into()));
    }
    build(k, radius, EmSource::Dipole(*src))
}

pub fn solve_pec_sphere_plane_wave(k: f64, radius: f64, d: &Vec3, p: &Vec3) -> Result<EmField> {
    if (d.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("direction must be a unit vector, |d| = {}", d.norm())));
    }
    build(k, radius, EmSource::PlaneWave { d: *d, p: *p })
}

impl EmField {
    pub fn order(&self) -> usize {
        self.rm.len() - 1
    }

    fn source_slot(&self) -> Result<(Vec3, Slot)> {
        let n = self.order();
        match &self.source {
            EmSource::Dipole(s) => {
                let ry = s.y.norm();
                Ok((s.y * (1.0 / ry), slot_radial(n, self.k * ry, Radial::Outgoing)?))
            }
            EmSource::PlaneWave { d, .. } => Ok((-*d, slot_far(n, self.k, 4.0 * PI))),
        }
    }

    fn polarization(&self) -> Vec3 {
        match &self.source {
            EmSource::Dipole(s) => s.p,
            EmSource::PlaneWave { p, .. } => *p,
        }
    }

    fn check_outside(&self, x: &Vec3) -> Result<f64> {
        let r = x.norm();
        if r < self.radius * (1.0 - 1e-12) {
            return Err(Error::Domain(format!("|x| = {r} lies inside the obstacle (a = {})", self.radius)));
        }
        Ok(r)
    }

    /// Scattered dyadics (E^s(x, ·), H^s(x, ·)) acting on the source polarization.
    pub fn scattered_dyadics(&self, x: &Vec3) -> Result<(Mat3, Mat3)> {
        let r = self.check_outside(x)?;
        let n = self.order();
        let sx = slot_radial(n, self.k * r, Radial::Outgoing)?;
        let (yh, sy) = self.source_slot()?;
        assemble(self.k, n, &(*x * (1.0 / r)), &yh, &sx, &sy, &self.rm, &self.rn)
    }

    pub fn scattered_matrix(&self, x: &Vec3) -> Result<Mat3> {
        Ok(self.scattered_dyadics(x)?.0)
    }

    pub fn scattered(&self, x: &Vec3) -> Result<CVec3> {
        Ok(mat_vec(&self.scattered_matrix(x)?, &self.polarization()))
    }

    pub fn scattered_magnetic(&self, x: &Vec3) -> Result<CVec3> {
        Ok(mat_vec(&self.scattered_dyadics(x)?.1, &self.polarization()))
    }

    pub fn incident(&self, x: &Vec3) -> Result<CVec3> {
        match &self.source {
            EmSource::Dipole(s) => Ok(mat_vec(&dipole_matrix(self.k, x, &s.y)?.value, &s.p)),
            EmSource::PlaneWave { d, p } => {
                let q = *p - *d * d.dot(p);
                let ph = I * self.k * Complex64::from_polar(1.0, self.k * x.dot(d));
                Ok([ph * q[0], ph * q[1], ph * q[2]])
            }
        }
    }

    pub fn total(&self, x: &Vec3) -> Result<CVec3> {
        Ok(cadd(&self.incident(x)?, &self.scattered(x)?))
    }

    /// E^∞(x̂) as a matrix acting on the source polarization.
    pub fn far_field_matrix(&self, xhat: &Vec3) -> Result<Mat3> {
        let n = self.order();
        let sx = slot_far(n, self.k, 1.0);
        let (yh, sy) = self.source_slot()?;
        Ok(assemble(self.k, n, &xhat.normalized(), &yh, &sx, &sy, &self.rm, &self.rn)?.0)
    }

    pub fn far_field(&self, xhat: &Vec3) -> Result<CVec3> {
        Ok(mat_vec(&self.far_field_matrix(xhat)?, &self.polarization()))
    }

    /// |H^s × x − r E^s| at r·x̂.
    pub fn silver_muller_residual(&self, r: f64, xhat: &Vec3) -> Result<f64> {
        let x = xhat.normalized() * r;
        let (e, h) = self.scattered_dyadics(&x)?;
        let p = self.polarization();
        let (e, h) = (mat_vec(&e, &p), mat_vec(&h, &p));
        let hx = [
            h[1] * x[2] - h[2] * x[1],
            h[2] * x[0] - h[0] * x[2],
            h[0] * x[1] - h[1] * x[0],
        ];
        Ok(cnorm(&[hx[0] - e[0] * r, hx[1] - e[1] * r, hx[2] - e[2] * r]))
    }

    /// Per-(n, m) coefficients of the outgoing M and N functions in E^s (dipole sources).
    pub fn modal_coefficients(&self) -> Result<(Vec<(usize, i64, Complex64)>, Vec<(usize, i64, Complex64)>)> {
        let s = match &self.source {
            EmSource::Dipole(s) => s,
            EmSource::PlaneWave { .. } => {
                return Err(Error::Domain("per-mode coefficients are exported for dipole sources".into()))
            }
        };
        let n_max = self.order();
        let ry = s.y.norm();
        let tab = modal_table(n_max, self.k * ry)?;
        let sp = SpherePoint::from_cart(s.y)?;
        let (mut cm, mut cn) = (Vec::new(), Vec::new());
        for n in 1..=n_max {
            let c = -self.k * self.k / (n * (n + 1)) as f64;
            let rho = self.k * ry;
            let (a, b) = (tab.h(n) * ((n * (n + 1)) as f64 / rho), tab.h(n) / rho + tab.hp(n));
            for m in -(n as i64)..=(n as i64) {
                let (y, g) = vsh(n, m, sp.theta, sp.phi)?;
                let (yb, gb) = (y.conj(), g.map(|v| v.conj()));
                // M̄(y) = −h ŷ × ∇Ȳ, N̄(y) = a Ȳ ŷ + b ∇Ȳ
                let yh = sp.unit();
                let mbar = ccross_real(&yh, &gb).map(|v| -v * tab.h(n));
                let nbar = [0, 1, 2].map(|i| yb * a * yh[i] + gb[i] * b);
                cm.push((n, m, self.rm[n] * c * cdot(&s.p, &mbar)));
                cn.push((n, m, self.rn[n] * c * cdot(&s.p, &nbar)));
            }
        }
        Ok((cm, cn))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs = self.modal_coefficients().ok();
        let pack = |v: &Vec<(usize, i64, Complex64)>| v.iter().map(|(n, m, c)| json!([n, m, c.re, c.im])).collect::<Vec<_>>();
        json!({
            "k": self.k, "a": self.radius, "source": self.source,
            "M_coeffs": coeffs.as_ref().map(|c| pack(&c.0)),
            "N_coeffs": coeffs.as_ref().map(|c| pack(&c.1)),
            "mie_M": self.rm.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
            "mie_N": self.rn.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
            "trunc_certificate": self.certificate,
        })
    }
}

fn ccross_real(v: &Vec3, w: &CVec3) -> CVec3 {
    [v[1] * w[2] - v[2] * w[1], v[2] * w[0] - v[0] * w[2], v[0] * w[1] - v[1] * w[0]]
}

/// Y_n^m(θ, φ) and its surface gradient e_θ ∂_θY + e_φ (im / sin θ) Y. Not defined at the poles.
pub fn vsh(n: usize, m: i64, theta: f64, phi: f64) -> Result<(Complex64, CVec3)> {
    let sp = SpherePoint::new(1.0, theta, phi)?;
    let fr = tangent_frame(&sp)?;
    let ma = m.unsigned_abs() as usize;
    if ma > n {
        return Err(Error::Domain(format!("|m| = {ma} exceeds n = {n}")));
    }
    let t = theta.cos();
    let st = theta.sin();
    let pl = assoc_legendre_normalized(n, t)?;
    let pn = pl[n][ma];
    let pnm1 = if n >= 1 && ma <= n - 1 { pl[n - 1][ma] } else { 0.0 };
    let nf = n as f64;
    let mf = ma as f64;
    let coef = if n >= 1 { ((2.0 * nf + 1.0) * (nf * nf - mf * mf) / (2.0 * nf - 1.0)).sqrt() } else { 0.0 };
    let dtheta = (nf * t * pn - coef * pnm1) / st;
    let e = Complex64::from_polar(1.0, mf * phi);
    let (mut y, mut dy) = (e * pn, e * dtheta);
    if m < 0 {
        let sgn = if ma % 2 == 0 { 1.0 } else { -1.0 };
        y = y.conj() * sgn;
        dy = dy.conj() * sgn;
    }
    let im_over_s = I * (m as f64) / st;
    let g = [0, 1, 2].map(|i| dy * fr.e_theta[i] + y * im_over_s * fr.e_phi[i]);
    Ok((y, g))
}

/// Superposed total field τ₁E(x, y₁)p₁ + τ₂E(x, y₂)p₂ (plane-wave fields count as active).
pub fn superposed_electric_total(f1: &EmField, f2: &EmField, x: &Vec3) -> Result<CVec3> {
    if f1.k != f2.k || f1.radius != f2.radius {
        return Err(Error::Domain("superposed EM fields must share k and obstacle".into()));
    }
    let active = |f: &EmField| match &f.source {
        EmSource::Dipole(s) => s.tau,
        EmSource::PlaneWave { .. } => true,
    };
    let mut e = [ZERO; 3];
    for f in [f1, f2] {
        if active(f) {
            e = cadd(&e, &f.total(x)?);
        }
    }
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tangent {
    Phi,
    Theta,
}

impl Tangent {
    pub fn vector(&self, f: &TangentFrame) -> Vec3 {
        match self {
            Tangent::Phi => f.e_phi,
            Tangent::Theta => f.e_theta,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Tangent::Phi => "phi",
            Tangent::Theta => "theta",
        }
    }
}

/// e_m(x) · E (no conjugation).
pub fn tangential_measurement(e_total: &CVec3, frame: &TangentFrame, m: Tangent) -> Complex64 {
    cdot(&m.vector(frame), e_total)
}

pub fn em_far_field(f: &EmField, xhat: &Vec3) -> Result<CVec3> {
    f.far_field(xhat)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    PhiPhi,
    PhiTheta,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRow {
    pub angle: f64,
    pub r: f64,
    pub measured: Complex64,
    pub predicted: Complex64,
    pub ratio: Complex64,
    /// |measured|·4πr³.
    pub scaled: f64,
    pub scattered_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeTable {
    pub kind: ProbeKind,
    pub rows: Vec<ProbeRow>,
    /// Least-squares slope of log|measured| against log r.
    pub slope: f64,
    pub notice: Option<String>,
}

/// Approaches y along C_{e_φ(y)} (phi_phi) or C_{e_φ(y)+e_θ(y)} (phi_theta) and tabulates
/// e_φ(x)·E(x, y)e_φ(y) or e_φ(x)·E(x, y)e_θ(y) against the leading singular term.
/// With an obstacle the total field is probed; the scattered part is reported separately.
pub fn singularity_probe(
    kind: ProbeKind,
    k: f64,
    y: &SpherePoint,
    approach_angles: &[f64],
    obstacle_radius: Option<f64>,
) -> Result<ProbeTable> {
    let fy = tangent_frame(y)?;
    let (normal, pol) = match kind {
        ProbeKind::PhiPhi => (fy.e_phi, fy.e_phi),
        ProbeKind::PhiTheta => ((fy.e_phi + fy.e_theta).normalized(), fy.e_theta),
    };
    let scat = match obstacle_radius {
        Some(a) => Some(solve_pec_sphere_dipole(k, a, &DipoleSource { y: y.cart, p: pol, tau: true })?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut notice = None;
    for &s in approach_angles {
        let x = great_circle_point(y, &normal, s)?;
        let r = x.cart.dist(&y.cart);
        if r < 1e-8 * y.r {
            notice = Some(format!("table truncated at angle {s:e}: |x - y| below 1e-8 radius"));
            break;
        }
        let fx = tangent_frame(&x)?;
        let mut e = mat_vec(&dipole_matrix(k, &x.cart, &y.cart)?.value, &pol);
        let mut scattered_abs = 0.0;
        if let Some(f) = &scat {
            let es = f.scattered(&x.cart)?;
            scattered_abs = cdot(&fx.e_phi, &es).norm();
            e = cadd(&e, &es);
        }
        let measured = cdot(&fx.e_phi, &e);
        let phi = Complex64::from_polar(1.0 / (4.0 * PI * r), k * r);
        let predicted = match kind {
            ProbeKind::PhiPhi => (I / k) * (Complex64::from(k * k) + (I * k - 1.0 / r) / r) * phi,
            ProbeKind::PhiTheta => phi / (r * r),
        };
        rows.push(ProbeRow {
            angle: s,
            r,
            measured,
            predicted,
            ratio: measured / predicted,
            scaled: measured.norm() * 4.0 * PI * r * r * r,
            scattered_abs,
        });
    }
    let slope = log_log_slope(&rows);
    Ok(ProbeTable { kind, rows, slope, notice })
}

fn log_log_slope(rows: &[ProbeRow]) -> f64 {
    let n = rows.len() as f64;
    if rows.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.r.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.measured.norm().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sphere_grid, GridScheme};

    fn mat_close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        let scale = b.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).norm() <= tol * scale)
    }

    #[test]
    fn f_value() {
        assert_eq!(dipole_f(1.0, 1.0), Complex64::new(2.0, -3.0));
    }

    #[test]
    fn dipole_transpose_symmetry() {
        let x = Vec3::new(0.3, -1.2, 0.8);
        let y = Vec3::new(-0.4, 0.5, 1.9);
        let a = dipole_matrix(1.3, &x, &y).unwrap().value;
        let b = mat_transpose(&dipole_matrix(1.3, &y, &x).unwrap().value);
        assert!(a.iter().flatten().zip(b.iter().flatten()).all(|(p, q)| p == q));
        assert!(dipole_matrix(1.0, &x, &x).is_err());
    }

    fn fd_curl(f: &dyn Fn(Vec3) -> CVec3, x: Vec3, h: f64) -> CVec3 {
        let d = |i: usize, j: usize| {
            let mut e = Vec3::zero();
            e.0[j] = h;
            (f(x + e)[i] - f(x - e)[i]) / (2.0 * h)
        };
        [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]
    }

    #[test]
    fn dipole_matches_curl_curl() {
        let k = 1.1;
        let y = Vec3::new(0.2, 0.1, -0.3);
        let p = Vec3::new(0.3, -0.7, 0.5);
        let x = Vec3::new(1.0, 0.4, 0.6);
        let a = |v: Vec3| {
            let phi = crate::acoustic::fundamental_solution(k, &v, &y).unwrap();
            [phi * p[0], phi * p[1], phi * p[2]]
        };
        let err = |h: f64| {
            let c1 = |v: Vec3| fd_curl(&a, v, h);
            let cc = fd_curl(&c1, x, h);
            let e = mat_vec(&dipole_matrix(k, &x, &y).unwrap().value, &p);
            cnorm(&[0, 1, 2].map(|i| cc[i] * (I / k) - e[i]))
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 < 1e-3 && (e1 / e2 - 4.0).abs() < 0.3, "{e1} {e2}");
    }

    #[test]
    fn dipole_columns_divergence_free() {
        let (k, y) = (1.7, Vec3::new(0.0, 0.0, 0.5));
        let x = Vec3::new(0.8, -0.3, 1.1);
        for c in 0..3 {
            let mut p = Vec3::zero();
            p.0[c] = 1.0;
            let div = |h: f64| {
                let mut s = ZERO;
                for i in 0..3 {
                    let mut e = Vec3::zero();
                    e.0[i] = h;
                    let fp = mat_vec(&dipole_matrix(k, &(x + e), &y).unwrap().value, &p);
                    let fm = mat_vec(&dipole_matrix(k, &(x - e), &y).unwrap().value, &p);
                    s += (fp[i] - fm[i]) / (2.0 * h);
                }
                s.norm()
            };
            assert!(div(1e-3) < 1e-5);
            assert!((div(2e-3) / div(1e-3) - 4.0).abs() < 0.3);
        }
    }

    #[test]
    fn regular_expansion_reproduces_dipole_matrix() {
        let k = 1.4;
        let x = Vec3::new(0.3, -0.5, 0.4);
        let y = Vec3::new(-1.1, 0.9, 1.3);
        let n = 40;
        let sx = slot_radial(n, k * x.norm(), Radial::Regular).unwrap();
        let sy = slot_radial(n, k * y.norm(), Radial::Outgoing).unwrap();
        let ones = vec![ONE; n + 1];
        let (e, h) = assemble(k, n, &x.normalized(), &y.normalized(), &sx, &sy, &ones, &ones).unwrap();
        let dm = dipole_matrix(k, &x, &y).unwrap();
        assert!(mat_close(&e, &dm.value, 1e-10));
        // H^i p = (1/ik) curl E^i p = ∇Φ × p
        assert!(mat_close(&h, &dm.magnetic, 1e-10));
    }

    #[test]
    fn plane_wave_slot_reproduces_incident() {
        let k = 2.0;
        let d = Vec3::new(0.0, 0.6, 0.8);
        let p = Vec3::new(1.0, 0.0, 0.0);
        let x = Vec3::new(0.4, 0.2, -0.3);
        let n = 40;
        let sx = slot_radial(n, k * x.norm(), Radial::Regular).unwrap();
        let sy = slot_far(n, k, 4.0 * PI);
        let ones = vec![ONE; n + 1];
        let (e, _) = assemble(k, n, &x.normalized(), &(-d), &sx, &sy, &ones, &ones).unwrap();
        let f = solve_pec_sphere_plane_wave(k, 0.1, &d, &p).unwrap();
        let want = f.incident(&x).unwrap();
        let got = mat_vec(&e, &p);
        assert!(cnorm(&[0, 1, 2].map(|i| got[i] - want[i])) < 1e-10 * cnorm(&want));
    }

    #[test]
    fn explicit_mode_sum_matches_closed_form() {
        let k = 1.0;
        let src = DipoleSource { y: Vec3::new(0.4, 1.1, 0.7), p: Vec3::new(0.2, -0.5, 0.9), tau: true };
        let f = solve_pec_sphere_dipole(k, 0.5, &src).unwrap();
        let (cm, cn) = f.modal_coefficients().unwrap();
        let x = SpherePoint::new(1.3, 1.1, 2.3).unwrap();
        let n_max = f.order();
        let tab = modal_table(n_max, k * x.r).unwrap();
        let xh = x.unit();
        let mut e = [ZERO; 3];
        for ((n, m, a), (_, _, b)) in cm.iter().zip(&cn) {
            let (y, g) = vsh(*n, *m, x.theta, x.phi).unwrap();
            let h = tab.h(*n);
            let rho = k * x.r;
            let mm = ccross_real(&xh, &g).map(|v| -v * h);
            let (aa, bb) = (h * ((n * (n + 1)) as f64 / rho), h / rho + tab.hp(*n));
            for i in 0..3 {
                e[i] += a * mm[i] + b * (y * aa * xh[i] + g[i] * bb);
            }
        }
        let want = f.scattered(&x.cart).unwrap();
        assert!(cnorm(&[0, 1, 2].map(|i| e[i] - want[i])) < 1e-10 * cnorm(&want));
    }

    #[test]
    fn surface_gradient_matches_differences() {
        let (n, m, th, ph) = (4usize, -3i64, 0.9, 0.4);
        let (_, g) = vsh(n, m, th, ph).unwrap();
        let h = 1e-6;
        let dth = (crate::specfun::sph_harmonic(n, m, th + h, ph).unwrap()
            - crate::specfun::sph_harmonic(n, m, th - h, ph).unwrap())
            / (2.0 * h);
        let fr = tangent_frame(&SpherePoint::new(1.0, th, ph).unwrap()).unwrap();
        assert!((cdot(&fr.e_theta, &g) - dth).norm() < 1e-8);
    }

    fn boundary_residual(f: &EmField) -> f64 {
        let g = sphere_grid(f.radius, 10, 20, GridScheme::GaussLegendre).unwrap();
        g.points
            .iter()
            .map(|p| {
                let e = f.total(&p.cart).unwrap();
                cnorm(&ccross_real(&p.unit(), &e))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn pec_boundary_condition() {
        let src = DipoleSource { y: Vec3::new(0.0, 0.9, 1.2), p: Vec3::new(1.0, 0.5, -0.2), tau: true };
        let f = solve_pec_sphere_dipole(1.0, 0.5, &src).unwrap();
        assert!(boundary_residual(&f) < 1e-7);
        let f = solve_pec_sphere_plane_wave(3.0, 0.8, &Vec3::new(0.0, 0.0, 1.0), &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(boundary_residual(&f) < 1e-7);
    }

    #[test]
    fn pec_reciprocity() {
        let pts = [Vec3::new(1.0, 0.2, -0.3), Vec3::new(-0.4, 1.6, 0.5), Vec3::new(0.1, -0.2, -1.9)];
        let k = 1.2;
        for (i, x) in pts.iter().enumerate() {
            for y in pts.iter().skip(i + 1) {
                let f = |src: Vec3| solve_pec_sphere_dipole(k, 0.6, &DipoleSource { y: src, p: Vec3::new(1.0, 0.0, 0.0), tau: true }).unwrap();
                let a = f(*y).scattered_matrix(x).unwrap();
                let b = mat_transpose(&f(*x).scattered_matrix(y).unwrap());
                assert!(mat_close(&a, &b, 1e-8));
            }
        }
    }

    #[test]
    fn rayleigh_limit() {
        let k = 1.0;
        let a = 1e-3 * 2.0 * PI / k;
        let src = DipoleSource { y: Vec3::new(1.0, 0.0, 0.0), p: Vec3::new(0.0, 0.0, 1.0), tau: true };
        let f = solve_pec_sphere_dipole(k, a, &src).unwrap();
        let x = Vec3::new(0.0, 1.0, 0.0);
        assert!(cnorm(&f.incident(&x).unwrap()) > 1e4 * cnorm(&f.scattered(&x).unwrap()));
    }

    #[test]
    fn far_field_transverse_and_extrapolated() {
        let src = DipoleSource { y: Vec3::new(0.0, 0.0, 1.5), p: Vec3::new(1.0, 1.0, 0.0), tau: true };
        let a = 0.5;
        let f = solve_pec_sphere_dipole(1.0, a, &src).unwrap();
        let xh = Vec3::new(0.6, 0.0, 0.8);
        let ff = f.far_field(&xh).unwrap();
        assert!(cdot(&xh, &ff).norm() < 1e-10 * cnorm(&ff));
        let g = |r: f64| f.scattered(&(xh * r)).unwrap().map(|v| v * r * Complex64::from_polar(1.0, -r));
        let rs = [1e2 * a, 1e3 * a, 1e4 * a];
        let gs = rs.map(g);
        let s: Vec<f64> = rs.iter().map(|r| 1.0 / r).collect();
        let rich = [0, 1, 2].map(|i| crate::verify::extrapolate_to_zero(&s, &gs.map(|v| v[i])));
        let err = cnorm(&[0, 1, 2].map(|i| rich[i] - ff[i])) / cnorm(&ff);
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn silver_muller_decay() {
        let src = DipoleSource { y: Vec3::new(0.7, 0.0, 0.9), p: Vec3::new(0.0, 1.0, 0.0), tau: true };
        let f = solve_pec_sphere_dipole(1.0, 0.5, &src).unwrap();
        let xh = Vec3::new(0.0, 0.6, -0.8);
        let r1 = f.silver_muller_residual(10.0, &xh).unwrap();
        let r2 = f.silver_muller_residual(100.0, &xh).unwrap();
        assert!(r1 / r2 > 10.0 / 1.5, "{r1} {r2}");
    }

    #[test]
    fn magnetic_dyadic_is_curl_of_electric() {
        let src = DipoleSource { y: Vec3::new(0.7, 0.0, 0.9), p: Vec3::new(0.3, 1.0, 0.0), tau: true };
        let k = 1.3;
        let f = solve_pec_sphere_dipole(k, 0.5, &src).unwrap();
        let x = Vec3::new(0.4, -0.9, 0.5);
        let es = |v: Vec3| f.scattered(&v).unwrap();
        let c = fd_curl(&es, x, 1e-4);
        let h = f.scattered_magnetic(&x).unwrap();
        let want = c.map(|v| v / (I * k));
        assert!(cnorm(&[0, 1, 2].map(|i| h[i] - want[i])) < 1e-6 * cnorm(&h));
    }

    #[test]
    fn maxwell_residuals_are_second_order() {
        let k = 1.0;
        let src = DipoleSource { y: Vec3::new(0.0, 1.2, 0.3), p: Vec3::new(1.0, 0.0, 0.5), tau: true };
        let f = solve_pec_sphere_dipole(k, 0.5, &src).unwrap();
        let x = Vec3::new(0.9, 0.2, -0.4);
        let es = |v: Vec3| f.scattered(&v).unwrap();
        let curlcurl = |h: f64| {
            let c1 = |v: Vec3| fd_curl(&es, v, h);
            let cc = fd_curl(&c1, x, h);
            let e = es(x);
            cnorm(&[0, 1, 2].map(|i| cc[i] - e[i] * (k * k)))
        };
        let div = |h: f64| {
            let mut s = ZERO;
            for i in 0..3 {
                let mut e = Vec3::zero();
                e.0[i] = h;
                s += (es(x + e)[i] - es(x - e)[i]) / (2.0 * h);
            }
            s.norm()
        };
        assert!((curlcurl(2e-2) / curlcurl(1e-2) - 4.0).abs() < 0.4);
        assert!((div(2e-2) / div(1e-2) - 4.0).abs() < 0.4);
    }

    #[test]
    fn superposition_and_measurement() {
        let s1 = DipoleSource { y: Vec3::new(1.0, 0.0, 0.3), p: Vec3::new(0.0, 1.0, 0.0), tau: true };
        let s2 = DipoleSource { y: Vec3::new(0.0, -1.0, 0.2), p: Vec3::new(0.0, 0.0, 1.0), tau: false };
        let f1 = solve_pec_sphere_dipole(1.0, 0.4, &s1).unwrap();
        let f2 = solve_pec_sphere_dipole(1.0, 0.4, &DipoleSource { tau: true, ..s2 }).unwrap();
        let f2_off = EmField { source: EmSource::Dipole(s2), ..f2.clone() };
        let x = Vec3::new(0.2, 0.3, 1.8);
        let e1 = f1.total(&x).unwrap();
        assert_eq!(superposed_electric_total(&f1, &f2_off, &x).unwrap(), e1);
        assert_eq!(superposed_electric_total(&f1, &f1, &x).unwrap(), e1.map(|v| v * 2.0));
        let fr = tangent_frame(&SpherePoint::from_cart(x).unwrap()).unwrap();
        let e2 = f2.total(&x).unwrap();
        let es = superposed_electric_total(&f1, &f2, &x).unwrap();
        for m in [Tangent::Phi, Tangent::Theta] {
            let (a, b, s) = (
                tangential_measurement(&e1, &fr, m),
                tangential_measurement(&e2, &fr, m),
                tangential_measurement(&es, &fr, m),
            );
            assert!((s.norm_sqr() - a.norm_sqr() - b.norm_sqr() - 2.0 * (a * b.conj()).re).abs() < 1e-12 * s.norm_sqr());
        }
        let parseval = tangential_measurement(&e1, &fr, Tangent::Phi).norm_sqr()
            + tangential_measurement(&e1, &fr, Tangent::Theta).norm_sqr()
            + cdot(&fr.nu, &e1).norm_sqr();
        assert!((parseval - cnorm(&e1).powi(2)).abs() < 1e-12 * parseval);
        let radial = fr.nu.0.map(Complex64::from);
        assert_eq!(tangential_measurement(&radial, &fr, Tangent::Phi).norm() < 1e-15, true);
        let ephi = fr.e_phi.0.map(Complex64::from);
        assert!((tangential_measurement(&ephi, &fr, Tangent::Phi) - 1.0).norm() < 1e-15);
        assert!(tangential_measurement(&ephi, &fr, Tangent::Theta).norm() < 1e-15);
        let other = solve_pec_sphere_dipole(1.0, 0.5, &s1).unwrap();
        assert!(superposed_electric_total(&f1, &other, &x).is_err());
    }

    #[test]
    fn probes() {
        let y = SpherePoint::new(2.0, 1.0, 0.7).unwrap();
        let angles: Vec<f64> = (0..16).map(|i| 1e-2 / 2f64.powi(i)).collect();
        let t = singularity_probe(ProbeKind::PhiPhi, 1.0, &y, &angles, Some(0.5)).unwrap();
        let last = t.rows.last().unwrap();
        assert!((last.ratio - 1.0).norm() < 1e-3);
        assert!((t.slope + 3.0).abs() < 0.05);
        let t = singularity_probe(ProbeKind::PhiTheta, 1.0, &y, &angles, Some(0.5)).unwrap();
        assert!((t.rows.last().unwrap().scaled - 1.5).abs() < 1e-3);
        assert!((t.slope + 3.0).abs() < 0.05);
        assert!(t.rows.iter().all(|r| r.scattered_abs < 10.0));
        let t = singularity_probe(ProbeKind::PhiPhi, 1.0, &y, &[1e-3, 1e-12], None).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.notice.is_some());
    }
}
