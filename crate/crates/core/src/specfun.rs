//! Spherical Bessel/Neumann/Hankel tables, Legendre polynomials, spherical
//! harmonics and Gauss–Legendre rules.

use crate::error::{Error, Result};
use crate::scalar::Real;
use num_complex::Complex;

/// Per-order values of j_n, y_n and their derivatives at a single real argument.
#[derive(Debug, Clone)]
pub struct ModalTable<T> {
    pub order_max: usize,
    pub argument: T,
    pub j: Vec<T>,
    pub y: Vec<T>,
    pub jp: Vec<T>,
    pub yp: Vec<T>,
    /// Set when some j_n underflowed to zero (y_n then overflows as well).
    /// The values are still returned; callers needing h_n must check.
    pub underflow: bool,
}

impl<T: Real> ModalTable<T> {
    /// Spherical Hankel function of the first kind.
    #[inline]
    pub fn h(&self, n: usize) -> Complex<T> {
        Complex::new(self.j[n], self.y[n])
    }

    #[inline]
    pub fn hp(&self, n: usize) -> Complex<T> {
        Complex::new(self.jp[n], self.yp[n])
    }

    /// j_n y'_n − j'_n y_n, which should equal 1/x².
    pub fn wronskian(&self, n: usize) -> T {
        self.j[n] * self.yp[n] - self.jp[n] * self.y[n]
    }
}

pub fn modal_table<T: Real>(n_max: usize, x: T) -> Result<ModalTable<T>> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("modal_table needs x > 0, got {x}")));
    }
    let top = n_max + 1;
    let (j, underflow) = sph_j_all(top, x);
    let y = sph_y_all(top, x);
    let deriv = |z: &[T]| -> Vec<T> {
        let mut d = Vec::with_capacity(n_max + 1);
        d.push(-z[1]);
        for n in 1..=n_max {
            d.push(z[n - 1] - T::of_usize(n + 1) / x * z[n]);
        }
        d
    };
    let jp = deriv(&j);
    let yp = deriv(&y);
    Ok(ModalTable {
        order_max: n_max,
        argument: x,
        j: j[..=n_max].to_vec(),
        y: y[..=n_max].to_vec(),
        jp,
        yp,
        underflow: (underflow && j[..=n_max].iter().any(|v| *v == T::zero()))
            || y[..=n_max].iter().any(|v| !v.is_finite()),
    })
}

fn sph_j_all<T: Real>(top: usize, x: T) -> (Vec<T>, bool) {
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let mut out = vec![T::zero(); top + 1];
    if T::of_usize(top) <= x {
        out[0] = j0;
        if top >= 1 {
            out[1] = j1;
        }
        for n in 1..top {
            out[n + 1] = T::of_usize(2 * n + 1) / x * out[n] - out[n - 1];
        }
        return (out, false);
    }
    // Miller: downward from well above max(top, x), rescaling to stay finite.
    let big = top.max(x.ceil().to_usize().unwrap_or(top));
    let start = big + 20 + (40.0 * big as f64).sqrt().ceil() as usize;
    let limit = T::max_value().sqrt();
    let mut above = T::zero();
    let mut cur = T::min_positive_value().sqrt();
    for n in (1..=start).rev() {
        if n <= top {
            out[n] = cur;
        }
        let below = T::of_usize(2 * n + 1) / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > limit {
            let s = limit.recip();
            cur = cur * s;
            above = above * s;
            for v in out.iter_mut().skip(n.min(top + 1)) {
                *v = *v * s;
            }
        }
    }
    out[0] = cur;
    let scale = if j0.abs() >= j1.abs() {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    let mut underflow = false;
    for v in out.iter_mut() {
        *v = *v * scale;
        if *v == T::zero() {
            underflow = true;
        }
    }
    (out, underflow)
}

fn sph_y_all<T: Real>(top: usize, x: T) -> Vec<T> {
    let (s, c) = x.sin_cos();
    let mut out = vec![T::zero(); top + 1];
    out[0] = -c / x;
    if top >= 1 {
        out[1] = -c / (x * x) - s / x;
    }
    for n in 1..top {
        out[n + 1] = T::of_usize(2 * n + 1) / x * out[n] - out[n - 1];
    }
    out
}

fn check_unit<T: Real>(t: T) -> Result<()> {
    if t.abs() > T::one() || t.is_nan() {
        return Err(Error::Domain(format!("Legendre argument {t} outside [-1, 1]")));
    }
    Ok(())
}

/// P_0..P_{n_max} at t.
pub fn legendre<T: Real>(n_max: usize, t: T) -> Result<Vec<T>> {
    check_unit(t)?;
    let mut p = Vec::with_capacity(n_max + 1);
    p.push(T::one());
    if n_max >= 1 {
        p.push(t);
    }
    for n in 1..n_max {
        let nf = T::of_usize(n);
        let v = ((nf + nf + T::one()) * t * p[n] - nf * p[n - 1]) / (nf + T::one());
        p.push(v);
    }
    Ok(p)
}

/// P_n, P'_n and P''_n for n = 0..n_max. Valid at the endpoints t = ±1 as well.
pub fn legendre_derivs<T: Real>(n_max: usize, t: T) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let p = legendre(n_max, t)?;
    let mut d1 = vec![T::zero(); n_max + 1];
    let mut d2 = vec![T::zero(); n_max + 1];
    if n_max >= 1 {
        d1[1] = T::one();
    }
    for n in 1..n_max {
        let c = T::of_usize(2 * n + 1);
        d1[n + 1] = d1[n - 1] + c * p[n];
        d2[n + 1] = d2[n - 1] + c * d1[n];
    }
    Ok((p, d1, d2))
}

/// Fully normalized associated Legendre values, `out[n][m]` for 0 ≤ m ≤ n, such that
/// Y_n^m(θ, φ) = out[n][m] · e^{imφ} at t = cos θ (Condon–Shortley phase included).
pub fn assoc_legendre_normalized<T: Real>(n_max: usize, t: T) -> Result<Vec<Vec<T>>> {
    check_unit(t)?;
    let s = (T::one() - t * t).max(T::zero()).sqrt();
    let mut out: Vec<Vec<T>> = (0..=n_max).map(|n| vec![T::zero(); n + 1]).collect();
    out[0][0] = (T::lit(4.0) * T::PI()).sqrt().recip();
    for m in 1..=n_max {
        let mf = T::of_usize(m);
        out[m][m] = -((mf + mf + T::one()) / (mf + mf)).sqrt() * s * out[m - 1][m - 1];
    }
    for m in 0..n_max {
        out[m + 1][m] = T::of_usize(2 * m + 3).sqrt() * t * out[m][m];
    }
    for m in 0..=n_max {
        for n in (m + 2)..=n_max {
            let a = |n: usize| {
                let (nf, mf) = (T::of_usize(n), T::of_usize(m));
                ((T::lit(4.0) * nf * nf - T::one()) / (nf * nf - mf * mf)).sqrt()
            };
            out[n][m] = a(n) * (t * out[n - 1][m] - out[n - 2][m] / a(n - 1));
        }
    }
    Ok(out)
}

/// Orthonormal spherical harmonic Y_n^m(θ, φ) with Condon–Shortley phase.
pub fn sph_harmonic<T: Real>(n: usize, m: i64, theta: T, phi: T) -> Result<Complex<T>> {
    if m.unsigned_abs() as usize > n {
        return Err(Error::Domain(format!("|m| = {} exceeds n = {n}", m.abs())));
    }
    if theta < T::zero() || theta > T::PI() {
        return Err(Error::Domain(format!("theta = {theta} outside [0, pi]")));
    }
    let ma = m.unsigned_abs() as usize;
    let table = assoc_legendre_normalized(n, theta.cos())?;
    let mphi = T::of_usize(ma) * phi;
    let y = Complex::new(mphi.cos(), mphi.sin()) * table[n][ma];
    if m >= 0 {
        Ok(y)
    } else if ma % 2 == 0 {
        Ok(y.conj())
    } else {
        Ok(-y.conj())
    }
}

/// Gauss–Legendre nodes (ascending) and weights on [-1, 1].
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf = T::of_usize(n);
    for i in 0..(n + 1) / 2 {
        let mut z = (T::PI() * (T::of_usize(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), z);
            for k in 1..n {
                let kf = T::of_usize(k);
                let p2 = ((kf + kf + T::one()) * z * p1 - kf * p0) / (kf + T::one());
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { T::one() } else { p1 };
            let pnm1 = if n == 0 { T::zero() } else { p0 };
            dp = nf * (z * pn - pnm1) / (z * z - T::one());
            let dz = pn / dp;
            z = z - dz;
            if dz.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let wi = T::lit(2.0) / ((T::one() - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
