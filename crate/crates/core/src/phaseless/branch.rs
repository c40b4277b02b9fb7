use super::TOL_AMP_REL;
use crate::acoustic::{phi_r, AcousticConfig, ForwardModel};
use crate::eigencheck::{certify_eigenvalue_free, EigenKind, ShellSpec, TOL_CERT};
use crate::error::{Error, Result};
use crate::geometry::{sphere_grid_shifted, GridScheme};
use crate::specfun::{assoc_legendre_normalized, modal_table};
use crate::{SphereGrid, Vec3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const I: Complex64 = Complex64::new(0.0, 1.0);
pub const TOL_MATCH: f64 = 1e-8;
/// Residual-growth factor above which an implied field is declared non-radiating.
pub const GROWTH_REJECT: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Identity,
    Conjugate,
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub branch: Branch,
    /// max|w₁ − w₂| / max|w₁| over usable samples.
    pub identity_residual: f64,
    /// max|w₁ − conj w₂| / max|w₁|.
    pub conjugate_residual: f64,
    /// Losing residual over winning residual (for `Neither`: smaller residual over tol).
    pub margin_ratio: f64,
    pub usable: usize,
}

pub fn classify_branch(candidate: &[Complex64], reference: &[Complex64]) -> Result<BranchReport> {
    classify_branch_with_tol(candidate, reference, TOL_MATCH)
}

pub fn classify_branch_with_tol(candidate: &[Complex64], reference: &[Complex64], tol_match: f64) -> Result<BranchReport> {
    if candidate.len() != reference.len() {
        return Err(Error::Domain(format!(
            "sample sets differ in length ({} vs {})",
            candidate.len(),
            reference.len()
        )));
    }
    let scale = reference.iter().chain(candidate).filter(|w| w.is_finite()).map(|w| w.norm()).fold(0.0, f64::max);
    let floor = TOL_AMP_REL * scale;
    let pairs: Vec<_> = reference
        .iter()
        .zip(candidate)
        .filter(|(a, b)| a.is_finite() && b.is_finite() && a.norm() > floor && b.norm() > floor)
        .collect();
    if pairs.len() < 8 {
        return Err(Error::Insufficient(format!("{} usable sample pairs, need at least 8", pairs.len())));
    }
    let w1max = pairs.iter().map(|(a, _)| a.norm()).fold(0.0, f64::max);
    let id = pairs.iter().map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max) / w1max;
    let cj = pairs.iter().map(|(a, b)| (*a - b.conj()).norm()).fold(0.0, f64::max) / w1max;
    let eps = f64::EPSILON;
    let (branch, margin_ratio) = if id < tol_match && id <= cj {
        (Branch::Identity, cj / id.max(eps))
    } else if cj < tol_match {
        (Branch::Conjugate, id / cj.max(eps))
    } else {
        (Branch::Neither, id.min(cj) / tol_match)
    };
    Ok(BranchReport { branch, identity_residual: id, conjugate_residual: cj, margin_ratio, usable: pairs.len() })
}

/// Gauss–Legendre grids on both spheres, azimuth shifted by half a step so that grid points
/// of the unshifted data grids (and y₀ in particular) are never sampled.
#[derive(Clone, Debug)]
pub struct DiscriminatorGrids {
    pub g1: SphereGrid,
    pub g2: SphereGrid,
    pub l_max: usize,
}

pub fn discriminator_grids(cfg: &AcousticConfig, n_theta: usize) -> Result<DiscriminatorGrids> {
    cfg.validate()?;
    let g1 = sphere_grid_shifted(cfg.r1, n_theta, 2 * n_theta, GridScheme::GaussLegendre, 0.5)?;
    let g2 = sphere_grid_shifted(cfg.r2, n_theta, 2 * n_theta, GridScheme::GaussLegendre, 0.5)?;
    Ok(DiscriminatorGrids { g1, g2, l_max: n_theta - 1 })
}

/// Samples of one field on the two discriminator grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellTraces {
    pub r1: Vec<Complex64>,
    pub r2: Vec<Complex64>,
}

impl ShellTraces {
    pub fn conj(&self) -> Self {
        ShellTraces { r1: self.r1.iter().map(|w| w.conj()).collect(), r2: self.r2.iter().map(|w| w.conj()).collect() }
    }

    fn zip_with(&self, o: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        ShellTraces {
            r1: self.r1.iter().zip(&o.r1).map(|(a, b)| f(*a, *b)).collect(),
            r2: self.r2.iter().zip(&o.r2).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    fn max_abs(&self) -> f64 {
        self.r1.iter().chain(&self.r2).map(|w| w.norm()).fold(0.0, f64::max)
    }
}

/// Total field w(·, y₀) on both discriminator grids.
pub fn shell_traces(model: &ForwardModel, grids: &DiscriminatorGrids, y0: &Vec3) -> Result<ShellTraces> {
    let f = model.point_source(y0)?;
    let eval = |g: &SphereGrid| g.points.iter().map(|p| f.total(&p.cart)).collect::<Result<Vec<_>>>();
    Ok(ShellTraces { r1: eval(&grids.g1)?, r2: eval(&grids.g2)? })
}

#[inline]
fn lm(n: usize, m: i64) -> usize {
    ((n * n + n) as i64 + m) as usize
}

/// Y_n^m at every grid point, `out[lm(n, m)][i]`.
fn harmonics(g: &SphereGrid, l_max: usize) -> Result<Vec<Vec<Complex64>>> {
    let mut out = vec![vec![Complex64::new(0.0, 0.0); g.len()]; (l_max + 1) * (l_max + 1)];
    for (i, p) in g.points.iter().enumerate() {
        let pl = assoc_legendre_normalized(l_max, p.theta.cos())?;
        for n in 0..=l_max {
            for m in 0..=n {
                let y = Complex64::from_polar(pl[n][m], m as f64 * p.phi);
                out[lm(n, m as i64)][i] = y;
                if m > 0 {
                    let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                    out[lm(n, -(m as i64))][i] = y.conj() * s;
                }
            }
        }
    }
    Ok(out)
}

fn project(g: &SphereGrid, y: &[Vec<Complex64>], data: &[Complex64]) -> Result<Vec<Complex64>> {
    let w = g
        .quadrature_weights
        .as_ref()
        .ok_or_else(|| Error::Domain("projection needs a quadrature grid".into()))?;
    let r2 = g.radius * g.radius;
    Ok(y.iter()
        .map(|ynm| data.iter().zip(ynm).zip(w).map(|((f, y), w)| f * y.conj() * *w).sum::<Complex64>() / r2)
        .collect())
}

/// u = Σ (a_nm j_n(kr) + b_nm y_n(kr)) Y_n^m on the shell.
#[derive(Clone, Debug)]
pub struct ShellExpansion {
    pub k: f64,
    pub l_max: usize,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

/// Solves the shell Dirichlet problem mode by mode from traces on both grids.
pub fn shell_dirichlet_solve(k: f64, grids: &DiscriminatorGrids, data: &ShellTraces) -> Result<ShellExpansion> {
    let l = grids.l_max;
    let c1 = project(&grids.g1, &harmonics(&grids.g1, l)?, &data.r1)?;
    let c2 = project(&grids.g2, &harmonics(&grids.g2, l)?, &data.r2)?;
    let ta = modal_table(l, k * grids.g1.radius)?;
    let tb = modal_table(l, k * grids.g2.radius)?;
    let mut a = vec![Complex64::new(0.0, 0.0); c1.len()];
    let mut b = a.clone();
    for n in 0..=l {
        let det = ta.j[n] * tb.y[n] - ta.y[n] * tb.j[n];
        for m in -(n as i64)..=(n as i64) {
            let i = lm(n, m);
            a[i] = (c1[i] * tb.y[n] - c2[i] * ta.y[n]) / det;
            b[i] = (c2[i] * ta.j[n] - c1[i] * tb.j[n]) / det;
        }
    }
    Ok(ShellExpansion { k, l_max: l, a, b })
}

impl ShellExpansion {
    /// Value and radial derivative at x, summing orders up to `n_top`.
    fn eval_upto(&self, x: &Vec3, n_top: usize, outgoing_split: bool) -> Result<(Complex64, Complex64)> {
        let r = x.norm();
        let t = modal_table(n_top, self.k * r)?;
        let th = (x[2] / r).clamp(-1.0, 1.0);
        let phi = x[1].atan2(x[0]);
        let pl = assoc_legendre_normalized(n_top, th)?;
        let (mut u, mut du) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for n in 0..=n_top {
            for m in -(n as i64)..=(n as i64) {
                let ma = m.unsigned_abs() as usize;
                let mut y = Complex64::from_polar(pl[n][ma], m as f64 * phi);
                if m < 0 && ma % 2 == 1 {
                    y = -y;
                }
                let i = lm(n, m);
                let (f, df) = if outgoing_split {
                    let (al, be) = ((self.a[i] - I * self.b[i]) * 0.5, (self.a[i] + I * self.b[i]) * 0.5);
                    (al * t.h(n) + be * t.h(n).conj(), al * t.hp(n) + be * t.hp(n).conj())
                } else {
                    (self.a[i] * t.j[n] + self.b[i] * t.y[n], self.a[i] * t.jp[n] + self.b[i] * t.yp[n])
                };
                u += f * y;
                du += df * y * self.k;
            }
        }
        Ok((u, du))
    }

    pub fn eval(&self, x: &Vec3) -> Result<Complex64> {
        Ok(self.eval_upto(x, self.l_max, false)?.0)
    }

    /// Highest order whose split into h and conj(h) parts is resolvable from shell data:
    /// |j_n(kR2)| ≥ 1e-6 |y_n(kR2)|.
    pub fn resolvable_order(&self, r2: f64) -> Result<usize> {
        let t = modal_table(self.l_max, self.k * r2)?;
        Ok((0..=self.l_max).take_while(|&n| t.j[n].abs() >= 1e-6 * t.y[n].abs()).last().unwrap_or(0))
    }

    /// max over directions of r|∂_r u − ik u| at radius r, using the extension outside the shell.
    pub fn radiation_residual(&self, r: f64, dirs: &[Vec3], n_top: usize) -> Result<f64> {
        let mut out: f64 = 0.0;
        for d in dirs {
            let (u, du) = self.eval_upto(&(*d * r), n_top, true)?;
            out = out.max((r * (du - I * self.k * u)).norm());
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentRadiating,
    ConjugateBranchRejected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Identity,
    Conjugate,
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorReport {
    pub verdict: Verdict,
    pub hypothesis: Hypothesis,
    /// Largest residual growth factor of w_j − Φ(·, y₀), j = 1, 2, between r0 = 10 R2 and
    /// r1 = 1000 R2, relative to the 1/r envelope (≈ 1 radiating, ≈ r1/r0 incoming).
    pub margin: f64,
    /// max|w₁ − w₂| and max|w₁ − conj w₂| on both spheres, relative to max|w₁|.
    pub identity_trace: f64,
    pub conjugate_trace: f64,
    /// max|v| on the mid-shell sphere for v = w₁ minus the hypothesised branch of w₂.
    pub v_shell_max: f64,
    pub eig_margin: f64,
    pub modes_used: usize,
    pub note: Option<String>,
}

/// Tests the conjugate branch w₁(·,y₀) = conj w₂(·,y₀) from shell traces: v = w₁ − conj w₂ must
/// vanish in the shell, and then w₁ − Φ and w₂ − Φ cannot both radiate.
pub fn conjugate_discriminator(
    cfg: &AcousticConfig,
    grids: &DiscriminatorGrids,
    y0: &Vec3,
    w1: &ShellTraces,
    w2: &ShellTraces,
) -> Result<DiscriminatorReport> {
    cfg.validate()?;
    let n = (grids.g1.len(), grids.g2.len());
    if (w1.r1.len(), w1.r2.len()) != n || (w2.r1.len(), w2.r2.len()) != n {
        return Err(Error::Domain("traces do not match the discriminator grids".into()));
    }
    if grids.g1.points.iter().any(|p| p.cart.dist(y0) < 1e-9 * cfg.r1) {
        return Err(Error::Domain("y0 coincides with a discriminator grid point".into()));
    }
    let spec = ShellSpec { r1: cfg.r1, r2: cfg.r2, k: cfg.k, n_max: 0 };
    let spec = ShellSpec { n_max: spec.min_order().max(grids.l_max), ..spec };
    let cert = certify_eigenvalue_free(&spec, EigenKind::Dirichlet)?;
    if cert.margin < TOL_CERT {
        return Err(Error::IllPosed {
            k: cfg.k,
            margin: cert.margin,
            detail: format!("shell Dirichlet determinant of order {}", cert.worst_n),
        });
    }
    let scale = w1.max_abs();
    let identity_trace = w1.zip_with(w2, |a, b| a - b).max_abs() / scale;
    let conjugate_trace = w1.zip_with(w2, |a, b| a - b.conj()).max_abs() / scale;
    let hypothesis = if conjugate_trace < TOL_MATCH && conjugate_trace <= identity_trace {
        Hypothesis::Conjugate
    } else if identity_trace < TOL_MATCH {
        Hypothesis::Identity
    } else {
        Hypothesis::Vacuous
    };
    let branch_of_w2 = if hypothesis == Hypothesis::Conjugate { w2.conj() } else { w2.clone() };

    let v = shell_dirichlet_solve(cfg.k, grids, &w1.zip_with(&branch_of_w2, |a, b| a - b))?;
    let rm = 0.5 * (cfg.r1 + cfg.r2);
    let mut v_shell_max: f64 = 0.0;
    for p in &grids.g1.points {
        v_shell_max = v_shell_max.max(v.eval(&(p.unit() * rm))?.norm());
    }

    // both data sets claim to be physical, so w_j − Φ(·, y₀) must radiate for j = 1, 2;
    // under the conjugate branch one of them is a conjugated (incoming) field
    let step = (grids.g1.len() / 16).max(1);
    let dirs: Vec<Vec3> = grids.g1.points.iter().step_by(step).map(|p| p.unit()).collect();
    let (r0, r1) = (10.0 * cfg.r2, 1000.0 * cfg.r2);
    let mut growth: f64 = 0.0;
    let mut n_top = 0;
    for w in [w1, w2] {
        let sub_phi = |g: &SphereGrid, w: &[Complex64]| -> Vec<Complex64> {
            g.points.iter().zip(w).map(|(p, w)| w - phi_r(cfg.k, p.cart.dist(y0))).collect()
        };
        let traces = ShellTraces { r1: sub_phi(&grids.g1, &w.r1), r2: sub_phi(&grids.g2, &w.r2) };
        let u = shell_dirichlet_solve(cfg.k, grids, &traces)?;
        n_top = u.resolvable_order(cfg.r2)?;
        let res0 = u.radiation_residual(r0, &dirs, n_top)?;
        let res1 = u.radiation_residual(r1, &dirs, n_top)?;
        if res0 > 0.0 {
            growth = growth.max((res1 * r1) / (res0 * r0));
        }
    }

    let (verdict, note) = match hypothesis {
        Hypothesis::Conjugate if growth >= GROWTH_REJECT => (Verdict::ConjugateBranchRejected, None),
        Hypothesis::Conjugate => (
            Verdict::ConsistentRadiating,
            Some("conjugate traces match and both fields radiate".to_string()),
        ),
        Hypothesis::Identity if growth >= GROWTH_REJECT => {
            (Verdict::ConsistentRadiating, Some("data fields do not radiate".to_string()))
        }
        Hypothesis::Identity => (Verdict::ConsistentRadiating, None),
        Hypothesis::Vacuous => (Verdict::ConsistentRadiating, Some("hypothesis vacuous".to_string())),
    };
    Ok(DiscriminatorReport {
        verdict,
        hypothesis,
        margin: growth,
        identity_trace,
        conjugate_trace,
        v_shell_max: v_shell_max / scale,
        eig_margin: cert.margin,
        modes_used: n_top,
        note,
    })
}
