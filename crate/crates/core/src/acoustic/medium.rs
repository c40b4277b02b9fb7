//! Lippmann–Schwinger solver for a gridded refractive index.
//!
//! w = w^i + k² ∫ Φ_k(·, z) (n(z) − 1) w(z) dz is discretized by the voxel midpoint rule.
//! The self-voxel integral is replaced by the integral of Φ_k over the ball of equal
//! volume. The grid matrix is Toeplitz, so the matvec runs through a zero-padded FFT.

use super::{phi_r, AcousticConfig, AcousticField, Representation, ScattererTag, Source, grad_phi};
use crate::error::{Error, Result};
use crate::Vec3;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Largest support size for which the dense LU fallback is attempted.
pub const DENSE_LIMIT: usize = 4096;
const GMRES_TOL: f64 = 1e-12;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 600;

/// Refractive index on a uniform cubic voxel grid. Index (i·N + j)·N + l, voxel centre
/// center + (i + ½ − N/2, j + ½ − N/2, l + ½ − N/2)·spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumSample {
    pub n_side: usize,
    pub spacing: f64,
    pub center: Vec3,
    pub n_values: Vec<Complex64>,
}

impl MediumSample {
    fn from_profile(half_width: f64, n_side: usize, f: impl Fn(&Vec3) -> Complex64) -> Self {
        let spacing = 2.0 * half_width / n_side as f64;
        let mut m = MediumSample {
            n_side,
            spacing,
            center: Vec3::zero(),
            n_values: vec![Complex64::new(1.0, 0.0); n_side * n_side * n_side],
        };
        for idx in 0..m.n_values.len() {
            let c = m.voxel_center(idx);
            m.n_values[idx] = Complex64::new(1.0, 0.0) + f(&c);
        }
        m
    }

    /// Homogeneous ball n = 1 + contrast, staircased onto the grid.
    pub fn ball(radius: f64, contrast: Complex64, n_side: usize) -> Self {
        Self::from_profile(radius, n_side, |c| if c.norm() < radius { contrast } else { ZERO })
    }

    /// Smooth bump n − 1 = contrast·(1 − |x|²/ρ²)² for |x| < ρ.
    pub fn bump(radius: f64, contrast: Complex64, n_side: usize) -> Self {
        Self::from_profile(radius, n_side, |c| {
            let s = c.dot(c) / (radius * radius);
            if s < 1.0 {
                contrast * (1.0 - s) * (1.0 - s)
            } else {
                ZERO
            }
        })
    }

    pub fn voxel_center(&self, idx: usize) -> Vec3 {
        let n = self.n_side;
        let (i, j, l) = (idx / (n * n), (idx / n) % n, idx % n);
        let off = |a: usize| (a as f64 + 0.5 - n as f64 / 2.0) * self.spacing;
        self.center + Vec3::new(off(i), off(j), off(l))
    }

    pub fn contrast(&self) -> Vec<Complex64> {
        self.n_values.iter().map(|n| n - 1.0).collect()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n_values.len()).filter(|&i| self.n_values[i] != Complex64::new(1.0, 0.0)).collect()
    }

    /// Radius of the smallest origin-centred ball containing every voxel with n ≠ 1.
    pub fn support_radius(&self) -> f64 {
        let half_diag = self.spacing * 3f64.sqrt() / 2.0;
        self.support().iter().map(|&i| self.voxel_center(i).norm() + half_diag).fold(0.0, f64::max)
    }

    pub fn validate(&self, cfg: &AcousticConfig) -> Result<()> {
        let n = self.n_side;
        if n == 0 || self.n_values.len() != n * n * n || !(self.spacing > 0.0) {
            return Err(Error::Domain("medium grid has inconsistent dimensions".into()));
        }
        for v in &self.n_values {
            if !(v.re > 0.0) || v.im < 0.0 || !v.im.is_finite() || !v.re.is_finite() {
                return Err(Error::Inadmissible(format!("refractive index needs Re n > 0, Im n >= 0, got {v}")));
            }
        }
        let rs = self.support_radius();
        if rs >= cfg.r1 {
            return Err(Error::Domain(format!(
                "medium support radius {rs} does not fit inside B_R1 (R1 = {})",
                cfg.r1
            )));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n_side.hash(&mut h);
        self.spacing.to_bits().hash(&mut h);
        for c in self.center.0 {
            c.to_bits().hash(&mut h);
        }
        for v in &self.n_values {
            v.re.to_bits().hash(&mut h);
            v.im.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// ∫_{|z|<ρ} Φ_k(0, z) dz for the ball with the voxel's volume.
pub fn self_term(k: f64, h: f64) -> Complex64 {
    let rho = (3.0 / (4.0 * PI)).cbrt() * h;
    if k * rho < 0.5 {
        // Σ (ikρ)^n ρ² / (n! (n + 2)), avoiding cancellation in the closed form
        let mut term = Complex64::new(rho * rho, 0.0);
        let mut s = term / 2.0;
        for n in 1..30 {
            term *= I * k * rho / n as f64;
            s += term / (n + 2) as f64;
        }
        return s;
    }
    (Complex64::from_polar(1.0, k * rho) * (Complex64::new(1.0, 0.0) - I * k * rho) - 1.0) / (k * k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsMethod {
    Gmres,
    DenseLu,
}

#[derive(Clone, Debug)]
pub struct VolumePotential {
    pub k: f64,
    pub points: Vec<Vec3>,
    /// h³ (n_j − 1) w_j at each support voxel.
    pub weights: Vec<Complex64>,
    pub self_over_volume: Complex64,
    pub spacing: f64,
    /// Relative residual of the discrete equation.
    pub residual: f64,
    pub iterations: usize,
    pub method: LsMethod,
}

impl VolumePotential {
    pub fn eval(&self, x: &Vec3) -> Complex64 {
        let k = self.k;
        let tiny = 1e-12 * self.spacing;
        let s: Complex64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                let r = x.dist(p);
                if r < tiny {
                    w * self.self_over_volume
                } else {
                    w * phi_r(k, r)
                }
            })
            .sum();
        s * (k * k)
    }

    pub fn eval_dr(&self, x: &Vec3) -> Complex64 {
        let xh = x.normalized();
        let s: Complex64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                let g = grad_phi(self.k, x, p);
                w * (g[0] * xh[0] + g[1] * xh[1] + g[2] * xh[2])
            })
            .sum();
        s * (self.k * self.k)
    }

    pub fn far_field(&self, xhat: &Vec3) -> Complex64 {
        let k = self.k;
        let s: Complex64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * Complex64::from_polar(1.0, -k * xhat.dot(p)))
            .sum();
        s * (k * k / (4.0 * PI))
    }
}

/// Reusable LS operator for one (k, medium) pair.
pub struct LsSolver {
    pub k: f64,
    pub medium: MediumSample,
    q: Vec<Complex64>,
    support: Vec<usize>,
    centers: Vec<Vec3>,
    self_term: Complex64,
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// k² max|n−1| (diam/2)²/2, an upper bound for ‖k²GQ‖ on balls.
    pub neumann_bound: f64,
    dense: OnceLock<std::result::Result<nalgebra::linalg::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>, String>>,
}

impl LsSolver {
    pub fn new(cfg: &AcousticConfig, medium: &MediumSample) -> Result<Self> {
        cfg.validate()?;
        medium.validate(cfg)?;
        let k = cfg.k;
        let n = medium.n_side;
        let m = 2 * n;
        let h = medium.spacing;
        let h3 = h * h * h;
        let st = self_term(k, h);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut kernel = vec![ZERO; m * m * m];
        let off = |a: usize| -> Option<f64> {
            if a < n {
                Some(a as f64)
            } else if a > n {
                Some(a as f64 - m as f64)
            } else {
                None
            }
        };
        let scale = 1.0 / (m * m * m) as f64;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    if let (Some(x), Some(y), Some(z)) = (off(a), off(b), off(c)) {
                        let r = (x * x + y * y + z * z).sqrt() * h;
                        let g = if r == 0.0 { st } else { phi_r(k, r) * h3 };
                        kernel[(a * m + b) * m + c] = g * scale;
                    }
                }
            }
        }
        fft3(&mut kernel, m, &fwd);
        let q = medium.contrast();
        let support = medium.support();
        let centers = (0..q.len()).map(|i| medium.voxel_center(i)).collect();
        let qmax = q.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let rs = medium.support_radius();
        Ok(LsSolver {
            k,
            medium: medium.clone(),
            q,
            support,
            centers,
            self_term: st,
            kernel_hat: kernel,
            fwd,
            inv,
            neumann_bound: k * k * qmax * rs * rs / 2.0,
            dense: OnceLock::new(),
        })
    }

    /// (G Q w) on the full grid, G including h³ and the self term.
    fn apply_gq(&self, w: &[Complex64]) -> Vec<Complex64> {
        let n = self.medium.n_side;
        let m = 2 * n;
        let mut buf = vec![ZERO; m * m * m];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let s = (i * n + j) * n + l;
                    buf[(i * m + j) * m + l] = self.q[s] * w[s];
                }
            }
        }
        fft3(&mut buf, m, &self.fwd);
        for (b, kh) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= kh;
        }
        fft3(&mut buf, m, &self.inv);
        let mut out = vec![ZERO; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    out[(i * n + j) * n + l] = buf[(i * m + j) * m + l];
                }
            }
        }
        out
    }

    /// A w = w − k² G Q w.
    pub fn apply(&self, w: &[Complex64]) -> Vec<Complex64> {
        let k2 = self.k * self.k;
        self.apply_gq(w).iter().zip(w).map(|(g, w)| w - g * k2).collect()
    }

    fn dense_lu(&self) -> std::result::Result<&nalgebra::linalg::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>, String> {
        self.dense
            .get_or_init(|| {
                let s = &self.support;
                if s.len() > DENSE_LIMIT {
                    return Err(format!("support size {} exceeds dense limit {DENSE_LIMIT}", s.len()));
                }
                let h = self.medium.spacing;
                let h3 = h * h * h;
                let k2 = self.k * self.k;
                let a = DMatrix::from_fn(s.len(), s.len(), |r, c| {
                    let g = if r == c {
                        self.self_term
                    } else {
                        phi_r(self.k, self.centers[s[r]].dist(&self.centers[s[c]])) * h3
                    };
                    let d = if r == c { Complex64::new(1.0, 0.0) } else { ZERO };
                    d - g * self.q[s[c]] * k2
                });
                Ok(a.lu())
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn solve_dense(&self, winc: &[Complex64]) -> Result<Vec<Complex64>> {
        let lu = self.dense_lu().map_err(Error::Solver)?;
        let s = &self.support;
        let rhs = DVector::from_iterator(s.len(), s.iter().map(|&i| winc[i]));
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Solver("dense LS matrix is singular".into()))?;
        // exterior voxels follow from the potential
        let mut full = vec![ZERO; winc.len()];
        for (t, &i) in s.iter().enumerate() {
            full[i] = sol[t];
        }
        let gq = self.apply_gq(&full);
        let k2 = self.k * self.k;
        let mut w: Vec<Complex64> = winc.iter().zip(&gq).map(|(a, g)| a + g * k2).collect();
        for (t, &i) in s.iter().enumerate() {
            w[i] = sol[t];
        }
        Ok(w)
    }

    /// Solves A w = w^i on the grid and reports which path produced the result.
    pub fn solve_grid(&self, winc: &[Complex64]) -> Result<(Vec<Complex64>, LsMethod, usize, f64)> {
        let prefer_dense = self.neumann_bound >= 1.0 && self.support.len() <= DENSE_LIMIT;
        let residual_of = |w: &[Complex64]| {
            let aw = self.apply(w);
            norm(&aw.iter().zip(winc).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(winc).max(f64::MIN_POSITIVE)
        };
        if !prefer_dense {
            let g = gmres(|v| self.apply(v), winc, GMRES_TOL, GMRES_RESTART, GMRES_MAX_ITER);
            let res = residual_of(&g.x);
            if g.converged && res < 1e-8 {
                return Ok((g.x, LsMethod::Gmres, g.iterations, res));
            }
            if self.support.len() > DENSE_LIMIT {
                return Err(Error::Solver(format!(
                    "GMRES stalled at relative residual {res:.3e} after {} iterations; \
                     support {} voxels exceeds dense limit; Neumann bound {:.3e}",
                    g.iterations,
                    self.support.len(),
                    self.neumann_bound
                )));
            }
        }
        let w = self.solve_dense(winc)?;
        let res = residual_of(&w);
        if !(res < 1e-8) {
            return Err(Error::Solver(format!(
                "dense LS solve residual {res:.3e}; Neumann bound {:.3e}",
                self.neumann_bound
            )));
        }
        Ok((w, LsMethod::DenseLu, 0, res))
    }

    fn field(&self, source: Source, winc: Vec<Complex64>) -> Result<AcousticField> {
        let tag = ScattererTag::Medium(self.medium.fingerprint());
        if self.support.is_empty() {
            return Ok(AcousticField { k: self.k, source, scatterer: tag, repr: Representation::Zero });
        }
        let (w, method, iterations, residual) = self.solve_grid(&winc)?;
        let h = self.medium.spacing;
        let h3 = h * h * h;
        let vp = VolumePotential {
            k: self.k,
            points: self.support.iter().map(|&i| self.centers[i]).collect(),
            weights: self.support.iter().map(|&i| self.q[i] * w[i] * h3).collect(),
            self_over_volume: self.self_term / h3,
            spacing: h,
            residual,
            iterations,
            method,
        };
        Ok(AcousticField { k: self.k, source, scatterer: tag, repr: Representation::VolumePotential(vp) })
    }

    fn check_source(&self, y: &Vec3) -> Result<()> {
        let h = self.medium.spacing;
        for &i in &self.support {
            if self.centers[i].dist(y) < 0.5 * h * 3f64.sqrt() {
                return Err(Error::Domain(format!("source {:?} lies inside the medium support", y.0)));
            }
        }
        Ok(())
    }

    pub fn solve_point_source(&self, y: &Vec3) -> Result<AcousticField> {
        self.check_source(y)?;
        let winc = self.centers.iter().map(|c| phi_r(self.k, c.dist(y))).collect();
        self.field(Source::Point { y: *y }, winc)
    }

    pub fn solve_plane_wave(&self, d: &Vec3) -> Result<AcousticField> {
        if (d.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("direction must be a unit vector, |d| = {}", d.norm())));
        }
        let winc = self.centers.iter().map(|c| Complex64::from_polar(1.0, self.k * c.dot(d))).collect();
        self.field(Source::PlaneWave { d: *d }, winc)
    }
}

pub fn solve_medium_ls(cfg: &AcousticConfig, med: &MediumSample, y: &Vec3) -> Result<AcousticField> {
    LsSolver::new(cfg, med)?.solve_point_source(y)
}

/// Single-scattering approximation k² Σ_j h³ (n_j − 1) w^i(x_j) Φ_k(x, x_j) by direct summation.
pub fn born_scattered(k: f64, med: &MediumSample, source: &Source, x: &Vec3) -> Complex64 {
    let h = med.spacing;
    let h3 = h * h * h;
    let mut s = ZERO;
    for (i, n) in med.n_values.iter().enumerate() {
        let q = n - 1.0;
        if q == ZERO {
            continue;
        }
        let c = med.voxel_center(i);
        let wi = match source {
            Source::Point { y } => phi_r(k, c.dist(y)),
            Source::PlaneWave { d } => Complex64::from_polar(1.0, k * c.dot(d)),
        };
        s += q * wi * phi_r(k, x.dist(&c)) * h3;
    }
    s * (k * k)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn fft3(data: &mut [Complex64], m: usize, fft: &Arc<dyn Fft<f64>>) {
    fft.process(data);
    let mut tmp = vec![ZERO; data.len()];
    // middle axis
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                tmp[(i * m + l) * m + j] = data[(i * m + j) * m + l];
            }
        }
    }
    fft.process(&mut tmp);
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                data[(i * m + j) * m + l] = tmp[(i * m + l) * m + j];
            }
        }
    }
    // slowest axis
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                tmp[(j * m + l) * m + i] = data[(i * m + j) * m + l];
            }
        }
    }
    fft.process(&mut tmp);
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                data[(i * m + j) * m + l] = tmp[(j * m + l) * m + i];
            }
        }
    }
}

pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations, x₀ = 0.
pub fn gmres<F>(op: F, b: &[Complex64], tol: f64, restart: usize, max_iter: usize) -> GmresOutcome
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    let mut history = vec![1.0];
    if bnorm == 0.0 {
        return GmresOutcome { x, iterations: 0, converged: true, residual_history: history };
    }
    let mut total = 0;
    while total < max_iter {
        let ax = op(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta / bnorm < tol {
            return GmresOutcome { x, iterations: total, converged: true, residual_history: history };
        }
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut hcols: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<Complex64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut inner = 0;
        while inner < restart && total < max_iter {
            let mut w = op(&v[inner]);
            let mut hcol = vec![ZERO; inner + 2];
            for (t, vt) in v.iter().enumerate() {
                let dot: Complex64 = vt.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                hcol[t] = dot;
                for (wi, vi) in w.iter_mut().zip(vt) {
                    *wi -= dot * vi;
                }
            }
            let wn = norm(&w);
            hcol[inner + 1] = Complex64::new(wn, 0.0);
            for t in 0..inner {
                let a = hcol[t];
                let b = hcol[t + 1];
                hcol[t] = cs[t].conj() * a + sn[t].conj() * b;
                hcol[t + 1] = -sn[t] * a + cs[t] * b;
            }
            let a = hcol[inner];
            let b = hcol[inner + 1];
            let den = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c, s) = if den == 0.0 {
                (Complex64::new(1.0, 0.0), ZERO)
            } else {
                (a / den, b / den)
            };
            hcol[inner] = Complex64::new(den, 0.0);
            hcol[inner + 1] = ZERO;
            cs.push(c);
            sn.push(s);
            let gi = g[inner];
            g[inner] = c.conj() * gi;
            g.push(-s * gi);
            hcols.push(hcol);
            inner += 1;
            total += 1;
            let rel = g[inner].norm() / bnorm;
            history.push(rel);
            if wn > 0.0 {
                v.push(w.iter().map(|c| c / wn).collect());
            }
            if rel < tol || wn == 0.0 {
                break;
            }
        }
        // back substitution
        let mut yk = vec![ZERO; inner];
        for t in (0..inner).rev() {
            let mut s = g[t];
            for u in (t + 1)..inner {
                s -= hcols[u][t] * yk[u];
            }
            yk[t] = s / hcols[t][t];
        }
        for (t, yt) in yk.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[t]) {
                *xi += yt * vi;
            }
        }
        if history.last().copied().unwrap_or(1.0) < tol {
            let ax = op(&x);
            let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            if norm(&r) / bnorm < tol * 10.0 {
                return GmresOutcome { x, iterations: total, converged: true, residual_history: history };
            }
        }
    }
    GmresOutcome { x, iterations: total, converged: false, residual_history: history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::{far_field, fundamental_solution};

    fn cfg() -> AcousticConfig {
        AcousticConfig::new(1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn self_term_limits() {
        // small kρ: ρ²/2 − k²ρ⁴/8 + O(ρ⁶)
        let h = 1e-3;
        let rho = (3.0 / (4.0 * PI)).cbrt() * h;
        let st = self_term(1.0, h);
        assert!((st.re - rho * rho / 2.0 * (1.0 - rho * rho / 4.0)).abs() < 1e-12 * rho * rho);
        assert!((st.im - rho.powi(3) / 3.0).abs() < 1e-6 * rho.powi(3));
        // series and closed form agree where both are accurate
        let k = 0.5 / rho * 0.999;
        let closed = (Complex64::from_polar(1.0, k * rho) * (Complex64::new(1.0, 0.0) - I * k * rho) - 1.0) / (k * k);
        assert!((self_term(k, h) - closed).norm() < 1e-9 * closed.norm());
    }

    #[test]
    fn fft_matvec_matches_direct_sum() {
        let med = MediumSample::bump(0.4, Complex64::new(0.3, 0.1), 6);
        let s = LsSolver::new(&cfg(), &med).unwrap();
        let n3 = 216;
        let w: Vec<Complex64> = (0..n3).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let fast = s.apply(&w);
        let h3 = med.spacing.powi(3);
        for i in [0usize, 17, 100, 215] {
            let mut acc = ZERO;
            for j in 0..n3 {
                let g = if i == j { s.self_term } else { phi_r(1.0, s.centers[i].dist(&s.centers[j])) * h3 };
                acc += g * s.q[j] * w[j];
            }
            let direct = w[i] - acc;
            assert!((fast[i] - direct).norm() < 1e-13, "i={i}");
        }
    }

    #[test]
    fn vacuum_medium_scatters_nothing() {
        let med = MediumSample::ball(0.5, ZERO, 8);
        let f = solve_medium_ls(&cfg(), &med, &Vec3::new(1.5, 0.0, 0.0)).unwrap();
        let x = Vec3::new(0.0, 1.2, 0.3);
        assert_eq!(f.scattered(&x).unwrap(), ZERO);
        assert_eq!(far_field(&f, &Vec3::new(1.0, 0.0, 0.0)), ZERO);
    }

    #[test]
    fn gmres_and_dense_agree() {
        let med = MediumSample::ball(0.45, Complex64::new(0.5, 0.2), 8);
        let s = LsSolver::new(&cfg(), &med).unwrap();
        let y = Vec3::new(0.3, -1.4, 0.2);
        let winc: Vec<Complex64> = s.centers.iter().map(|c| fundamental_solution(1.0, c, &y).unwrap()).collect();
        let g = gmres(|v| s.apply(v), &winc, 1e-12, 30, 300);
        assert!(g.converged);
        let d = s.solve_dense(&winc).unwrap();
        let diff = norm(&g.x.iter().zip(&d).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(diff < 1e-9 * norm(&d), "diff {diff}");
    }

    #[test]
    fn discrete_reciprocity() {
        let med = MediumSample::bump(0.5, Complex64::new(0.4, 0.05), 10);
        let s = LsSolver::new(&cfg(), &med).unwrap();
        let x = Vec3::new(0.2, 0.9, -0.5);
        let y = Vec3::new(-1.7, 0.1, 0.8);
        let a = s.solve_point_source(&y).unwrap().scattered(&x).unwrap();
        let b = s.solve_point_source(&x).unwrap().scattered(&y).unwrap();
        assert!((a - b).norm() < 1e-9 * a.norm(), "{a} vs {b}");
    }

    #[test]
    fn born_regime_second_order() {
        let y = Vec3::new(0.0, 0.0, 1.6);
        let x = Vec3::new(1.1, 0.3, 0.0);
        let dev = |c: f64| {
            let med = MediumSample::ball(0.5, Complex64::new(c, 0.0), 10);
            let f = solve_medium_ls(&cfg(), &med, &y).unwrap();
            let born = born_scattered(1.0, &med, &f.source, &x);
            ((f.scattered(&x).unwrap() - born) / born).norm()
        };
        let (d1, d2) = (dev(1e-3), dev(2e-3));
        assert!(d1 < 1e-3);
        assert!((d2 / d1 - 2.0).abs() < 0.05, "ratio {}", d2 / d1);
    }

    #[test]
    fn strong_contrast_uses_dense_path() {
        let med = MediumSample::ball(0.45, Complex64::new(8.0, 0.0), 6);
        let c = AcousticConfig::new(2.0, 1.0, 2.0).unwrap();
        let s = LsSolver::new(&c, &med).unwrap();
        assert!(s.neumann_bound > 1.0);
        let f = s.solve_point_source(&Vec3::new(1.5, 0.0, 0.0)).unwrap();
        match f.repr {
            Representation::VolumePotential(v) => {
                assert_eq!(v.method, LsMethod::DenseLu);
                assert!(v.residual < 1e-8);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn validation() {
        let mut med = MediumSample::ball(0.5, Complex64::new(0.1, 0.0), 4);
        assert!(med.validate(&AcousticConfig::new(1.0, 0.6, 2.0).unwrap()).is_err());
        med.n_values[0] = Complex64::new(1.0, -0.5);
        assert!(matches!(med.validate(&cfg()), Err(Error::Inadmissible(_))));
        let med = MediumSample::ball(0.5, Complex64::new(0.1, 0.0), 8);
        let s = LsSolver::new(&cfg(), &med).unwrap();
        assert!(s.solve_point_source(&Vec3::new(0.05, 0.0, 0.0)).is_err());
    }
}
