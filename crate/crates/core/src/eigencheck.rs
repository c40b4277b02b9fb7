//! Radial determinants of the spherical shell R1 < |x| < R2 and eigenvalue-freeness
//! certificates built from them.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::modal_table;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec<T> {
    pub r1: T,
    pub r2: T,
    pub k: T,
    pub n_max: usize,
}

impl<T: Real> ShellSpec<T> {
    /// Uses the default scan depth ⌈kR2⌉ + 10.
    pub fn new(r1: T, r2: T, k: T) -> Result<Self> {
        let s = ShellSpec { r1, r2, k, n_max: 0 };
        s.validate()?;
        Ok(ShellSpec { n_max: s.min_order(), ..s })
    }

    pub fn min_order(&self) -> usize {
        (self.k * self.r2).ceil().to_usize().unwrap_or(0) + 10
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > T::zero()) || !(self.r1 > T::zero()) || !(self.r1 < self.r2) {
            return Err(Error::Domain(format!(
                "shell needs k > 0 and 0 < R1 < R2, got k = {}, R1 = {}, R2 = {}",
                self.k, self.r1, self.r2
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenKind {
    Dirichlet,
    Maxwell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootKind {
    Dirichlet,
    MaxwellM,
    MaxwellN,
}

/// Amplitude of an oscillatory radial function: hypot(f, x f'/(n+1)). Unlike |f| it does not
/// vanish at zeros of f, and for n >> x it tracks |f|.
fn envelope<T: Real>(n: usize, x: T, f: T, fp: T) -> T {
    f.hypot(x * fp / T::of_usize(n + 1))
}

/// det [[j_n(kR1), y_n(kR1)], [j_n(kR2), y_n(kR2)]] and the envelope scale of its two products.
fn det_j_y<T: Real>(n: usize, k: T, r1: T, r2: T) -> Result<(T, T)> {
    let (x1, x2) = (k * r1, k * r2);
    let a = modal_table(n, x1)?;
    let b = modal_table(n, x2)?;
    let (ja, ya) = (envelope(n, x1, a.j[n], a.jp[n]), envelope(n, x1, a.y[n], a.yp[n]));
    let (jb, yb) = (envelope(n, x2, b.j[n], b.jp[n]), envelope(n, x2, b.y[n], b.yp[n]));
    Ok((a.j[n] * b.y[n] - a.y[n] * b.j[n], ja * yb + ya * jb))
}

/// Same determinant for ψ(z) = z_n(x) + x z'_n(x), using ψ' = −(x − n(n+1)/x) z.
fn det_psi<T: Real>(n: usize, k: T, r1: T, r2: T) -> Result<(T, T)> {
    let (x1, x2) = (k * r1, k * r2);
    let a = modal_table(n, x1)?;
    let b = modal_table(n, x2)?;
    let nn = T::of_usize(n * (n + 1));
    let psi = |z: T, zp: T, x: T| (z + x * zp, -(x - nn / x) * z);
    let (ja, jpa) = psi(a.j[n], a.jp[n], x1);
    let (ya, ypa) = psi(a.y[n], a.yp[n], x1);
    let (jb, jpb) = psi(b.j[n], b.jp[n], x2);
    let (yb, ypb) = psi(b.y[n], b.yp[n], x2);
    let scale = envelope(n, x1, ja, jpa) * envelope(n, x2, yb, ypb)
        + envelope(n, x1, ya, ypa) * envelope(n, x2, jb, jpb);
    Ok((ja * yb - ya * jb, scale))
}

pub fn dirichlet_determinant<T: Real>(n: usize, k: T, r1: T, r2: T) -> Result<T> {
    Ok(det_j_y(n, k, r1, r2)?.0)
}

/// (d_M, d_N) for n ≥ 1.
pub fn maxwell_determinants<T: Real>(n: usize, k: T, r1: T, r2: T) -> Result<(T, T)> {
    if n == 0 {
        return Err(Error::Domain("Maxwell determinants are defined for n >= 1".into()));
    }
    Ok((det_j_y(n, k, r1, r2)?.0, det_psi(n, k, r1, r2)?.0))
}

/// |det| over the sum of the envelope products; lies in [0, 1] and is comparable across orders.
pub fn scaled_determinant<T: Real>(kind: RootKind, n: usize, k: T, r1: T, r2: T) -> Result<T> {
    let (d, s) = match kind {
        RootKind::Dirichlet | RootKind::MaxwellM => det_j_y(n, k, r1, r2)?,
        RootKind::MaxwellN => det_psi(n, k, r1, r2)?,
    };
    Ok(if s > T::zero() { d.abs() / s } else { T::zero() })
}

pub const TOL_CERT: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: EigenKind,
    pub k: f64,
    pub r1: f64,
    pub r2: f64,
    pub n_max: usize,
    pub free: bool,
    pub margin: f64,
    pub worst_n: usize,
    /// Which determinant attained the margin ("dirichlet", "maxwell_m", "maxwell_n").
    pub worst_family: RootKind,
    /// |det| increases strictly over the last five scanned orders.
    pub tail_monotone: bool,
}

pub fn certify_eigenvalue_free<T: Real>(spec: &ShellSpec<T>, kind: EigenKind) -> Result<Certificate> {
    certify_with_tol(spec, kind, T::lit(TOL_CERT))
}

pub fn certify_with_tol<T: Real>(spec: &ShellSpec<T>, kind: EigenKind, tol: T) -> Result<Certificate> {
    spec.validate()?;
    let n_max = spec.n_max.max(spec.min_order());
    let families: &[RootKind] = match kind {
        EigenKind::Dirichlet => &[RootKind::Dirichlet],
        EigenKind::Maxwell => &[RootKind::MaxwellM, RootKind::MaxwellN],
    };
    let start = if kind == EigenKind::Dirichlet { 0 } else { 1 };
    let mut margin = T::infinity();
    let mut worst = (start, families[0]);
    let mut tail_ok = true;
    for &fam in families {
        let mut raw = Vec::new();
        for n in start..=n_max {
            let s = scaled_determinant(fam, n, spec.k, spec.r1, spec.r2)?;
            if s < margin {
                margin = s;
                worst = (n, fam);
            }
            let (d, _) = match fam {
                RootKind::MaxwellN => det_psi(n, spec.k, spec.r1, spec.r2)?,
                _ => det_j_y(n, spec.k, spec.r1, spec.r2)?,
            };
            raw.push(d.abs());
        }
        let tail = &raw[raw.len().saturating_sub(5)..];
        tail_ok &= tail.windows(2).all(|w| w[1] > w[0]);
    }
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    Ok(Certificate {
        kind,
        k: f(spec.k),
        r1: f(spec.r1),
        r2: f(spec.r2),
        n_max,
        free: margin > tol,
        margin: f(margin),
        worst_n: worst.0,
        worst_family: worst.1,
        tail_monotone: tail_ok,
    })
}

fn signed_det<T: Real>(kind: RootKind, n: usize, k: T, r1: T, r2: T) -> Result<T> {
    Ok(match kind {
        RootKind::Dirichlet | RootKind::MaxwellM => det_j_y(n, k, r1, r2)?.0,
        RootKind::MaxwellN => det_psi(n, k, r1, r2)?.0,
    })
}

/// Roots of the chosen determinant in (k_lo, k_hi): a fine sign-change scan refined by bisection.
pub fn find_eigen_k<T: Real>(n: usize, r1: T, r2: T, kind: RootKind, bracket: (T, T)) -> Result<Vec<T>> {
    let (lo, hi) = bracket;
    if !(lo > T::zero()) || !(hi > lo) {
        return Err(Error::Domain(format!("bracket must satisfy 0 < k_lo < k_hi, got ({lo}, {hi})")));
    }
    if kind != RootKind::Dirichlet && n == 0 {
        return Err(Error::Domain("Maxwell determinants are defined for n >= 1".into()));
    }
    // roots of a shell determinant are spaced roughly π/(R2 − R1) apart
    let spacing = T::PI() / (r2 - r1);
    let steps = (((hi - lo) / spacing) * T::lit(64.0)).ceil().to_usize().unwrap_or(64).max(64);
    let dk = (hi - lo) / T::of_usize(steps);
    let mut roots = Vec::new();
    let mut k0 = lo;
    let mut d0 = signed_det(kind, n, k0, r1, r2)?;
    for i in 1..=steps {
        let k1 = if i == steps { hi } else { lo + dk * T::of_usize(i) };
        let d1 = signed_det(kind, n, k1, r1, r2)?;
        if d0 == T::zero() {
            roots.push(k0);
        } else if d0 * d1 < T::zero() {
            let (mut a, mut b, mut da) = (k0, k1, d0);
            for _ in 0..200 {
                let m = (a + b) / T::lit(2.0);
                if m <= a || m >= b {
                    break;
                }
                let dm = signed_det(kind, n, m, r1, r2)?;
                if dm == T::zero() {
                    a = m;
                    b = m;
                    break;
                }
                if da * dm < T::zero() {
                    b = m;
                } else {
                    a = m;
                    da = dm;
                }
            }
            let ra = signed_det(kind, n, a, r1, r2)?.abs();
            let rb = signed_det(kind, n, b, r1, r2)?.abs();
            roots.push(if ra <= rb { a } else { b });
        }
        k0 = k1;
        d0 = d1;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn n0_reduces_to_sine() {
        for k in [0.7, 1.9, 4.4] {
            let d = dirichlet_determinant(0, k, 1.0, 2.0).unwrap();
            let want = (k * 1.0f64).sin() / (k * k * 2.0);
            assert!((d - want).abs() < 1e-14);
        }
        assert!(dirichlet_determinant(0, PI, 1.0, 2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn generic_k_is_free() {
        let s = ShellSpec::new(1.0f64, 2.0, 1.0).unwrap();
        for n in 0..=s.n_max {
            assert!(dirichlet_determinant(n, 1.0f64, 1.0, 2.0).unwrap().abs() > 1e-3);
        }
        let c = certify_eigenvalue_free(&ShellSpec::new(1.0, 2.0, 1.3).unwrap(), EigenKind::Maxwell).unwrap();
        assert!(c.free && c.margin > 1e-3 && c.tail_monotone);
        for n in 1..=c.n_max {
            let (m, nn) = maxwell_determinants(n, 1.3, 1.0, 2.0).unwrap();
            assert!(m != 0.0 && nn != 0.0);
        }
    }

    #[test]
    fn pi_is_refused() {
        let c = certify_eigenvalue_free(&ShellSpec::new(1.0, 2.0, PI).unwrap(), EigenKind::Dirichlet).unwrap();
        assert!(!c.free);
        assert_eq!(c.worst_n, 0);
    }

    #[test]
    fn maxwell_needs_n_at_least_one() {
        assert!(maxwell_determinants(0, 1.0, 1.0, 2.0).is_err());
        let (dm, _) = maxwell_determinants(3, 1.7, 1.0, 2.0).unwrap();
        assert_eq!(dm, dirichlet_determinant(3, 1.7, 1.0, 2.0).unwrap());
    }

    #[test]
    fn dirichlet_roots() {
        let r = find_eigen_k(0, 1.0, 2.0, RootKind::Dirichlet, (3.0, 4.0)).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - PI).abs() < 1e-12);
        let r = find_eigen_k(0, 1.0, 2.0, RootKind::Dirichlet, (0.5, 7.0)).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[1] - 2.0 * PI).abs() < 1e-12);
        assert!(find_eigen_k(0, 1.0, 2.0, RootKind::Dirichlet, (3.3, 3.5)).unwrap().is_empty());
    }

    #[test]
    fn maxwell_n_root_is_simple() {
        let roots = find_eigen_k(1, 1.0, 2.0, RootKind::MaxwellN, (0.5, 6.0)).unwrap();
        assert!(!roots.is_empty());
        for r in roots {
            let d = |k: f64| maxwell_determinants(1, k, 1.0, 2.0).unwrap().1;
            assert!(d(r).abs() < 1e-10);
            assert!(d(r - 1e-8) * d(r + 1e-8) < 0.0);
            let slope = (d(r + 1e-6) - d(r - 1e-6)) / 2e-6;
            assert!(slope.abs() > 1e-6);
        }
    }

    #[test]
    fn roots_scale_with_radii() {
        let a = find_eigen_k(2, 1.0, 2.0, RootKind::MaxwellM, (1.0, 9.0)).unwrap();
        let b = find_eigen_k(2, 2.0f64, 4.0, RootKind::MaxwellM, (0.5, 4.5)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x / 2.0 - y).abs() < 1e-12);
        }
    }

    #[test]
    fn margin_is_continuous() {
        let m = |k: f64| certify_eigenvalue_free(&ShellSpec::new(1.0, 2.0, k).unwrap(), EigenKind::Maxwell).unwrap().margin;
        assert!((m(1.3) - m(1.3 + 1e-9)).abs() < 1e-6);
    }

    #[test]
    fn psi_derivative_identity() {
        let n = 3;
        let psi = |x: f64| {
            let t = modal_table(n, x).unwrap();
            t.y[n] + x * t.yp[n]
        };
        let x = 2.3;
        let t = modal_table(n, x).unwrap();
        let fd = (psi(x + 1e-5) - psi(x - 1e-5)) / 2e-5;
        let exact = -(x - 12.0 / x) * t.y[n];
        assert!((fd - exact).abs() < 1e-7 * exact.abs().max(1.0));
    }

    #[test]
    fn margin_profile() {
        let m = |k: f64, kind| certify_eigenvalue_free(&ShellSpec::new(1.0, 2.0, k).unwrap(), kind).unwrap();
        let c = m(1.3, EigenKind::Maxwell);
        assert!(c.margin > 1e-3, "{c:?}");
        assert!(m(PI + 1e-3, EigenKind::Dirichlet).margin < 1e-2);
        assert!(m(2.0 * PI, EigenKind::Dirichlet).margin < 1e-12);
    }

    #[test]
    fn certificate_json_fields() {
        let c = certify_eigenvalue_free(&ShellSpec::new(1.0, 2.0, 1.3).unwrap(), EigenKind::Dirichlet).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        for key in ["kind", "k", "r1", "r2", "n_max", "free", "margin", "worst_n"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn single_precision_scan() {
        let c = certify_eigenvalue_free(&ShellSpec::new(1.0f32, 2.0, 1.3).unwrap(), EigenKind::Dirichlet).unwrap();
        assert!(c.free);
    }

    proptest! {
        #[test]
        fn exact_power_of_two_scaling(n in 1usize..20, k in 0.2f64..8.0, e in -3i32..4) {
            let lam = 2f64.powi(e);
            let a = maxwell_determinants(n, k, 1.0, 2.0).unwrap();
            let b = maxwell_determinants(n, lam * k, 1.0 / lam, 2.0 / lam).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
