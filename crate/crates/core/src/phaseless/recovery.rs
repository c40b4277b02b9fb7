use super::dataset::{PhaselessDataset, PointRef, Pol};
use crate::em::Tangent;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Re{a·conj(b)} from |a + b|, |a| and |b|.
pub fn recover_real_cross(m_sup: f64, m1: f64, m2: f64) -> f64 {
    0.5 * (m_sup * m_sup - m1 * m1 - m2 * m2)
}

/// Tangential-component version; the arithmetic is identical.
pub fn em_recover_real_cross(m_sup: f64, m_phiphi: f64, m_phitheta: f64) -> f64 {
    recover_real_cross(m_sup, m_phiphi, m_phitheta)
}

/// cos(arg a − arg b) from the cross term, or `None` when r_a·r_b ≤ tol_amp.
pub fn recover_cos_delta(r_a: f64, r_b: f64, real_cross: f64, tol_amp: f64) -> Result<Option<f64>> {
    let rr = r_a * r_b;
    if !(rr > tol_amp) {
        return Ok(None);
    }
    if real_cross.abs() > rr * (1.0 + 1e-6) {
        return Err(Error::Inconsistent(format!(
            "|Re cross| = {:e} exceeds the amplitude product {rr:e}",
            real_cross.abs()
        )));
    }
    Ok(Some((real_cross / rr).clamp(-1.0, 1.0)))
}

pub fn em_recover_cos_delta(r_phiphi: f64, r_phitheta: f64, real_cross: f64, tol_amp: f64) -> Result<Option<f64>> {
    recover_cos_delta(r_phiphi, r_phitheta, real_cross, tol_amp)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiffRecord {
    pub x: PointRef,
    pub y: PointRef,
    /// Partner source: y₀ for acoustic data, y₂ for EM data.
    pub y_ref: PointRef,
    pub pol: Option<Pol>,
    pub r_xy: f64,
    pub r_xy0: f64,
    pub real_cross: f64,
    pub cos_delta: Option<f64>,
    pub defined: bool,
}

type Key = (PointRef, PointRef, Option<Tangent>, Option<Tangent>);

/// Pairs every superposed record with the two single-source records sharing x and its
/// sources, then recovers the cross term and the phase-difference cosine.
pub fn phase_differences(ds: &PhaselessDataset) -> Result<Vec<PhaseDiffRecord>> {
    let tol_amp = ds.tol_amp();
    let mut single: HashMap<Key, f64> = HashMap::new();
    for r in ds.records.iter().filter(|r| !r.is_superposed()) {
        let (slot, src) = match r.sources {
            [Some(s), None] => (0, s),
            [None, Some(s)] => (1, s),
            _ => continue,
        };
        let (m, p) = match r.pol {
            Some(p) => (Some(p.m), if slot == 0 { p.n } else { p.l }),
            None => (None, None),
        };
        single.insert((r.x, src, m, p), r.modulus);
    }
    let mut out = Vec::new();
    for r in ds.records.iter().filter(|r| r.is_superposed()) {
        let (y1, y2) = (r.sources[0].unwrap(), r.sources[1].unwrap());
        let (m, n, l) = match r.pol {
            Some(p) => (Some(p.m), p.n, p.l),
            None => (None, None, None),
        };
        let look = |y: PointRef, p: Option<Tangent>| {
            single.get(&(r.x, y, m, p)).copied().ok_or_else(|| {
                Error::Insufficient(format!("no single-source record for x = {:?}, y = {:?}", r.x, y))
            })
        };
        let (r1, r2) = (look(y1, n)?, look(y2, l)?);
        let real_cross = recover_real_cross(r.modulus, r1, r2);
        let cos_delta = recover_cos_delta(r1, r2, real_cross, tol_amp)?;
        out.push(PhaseDiffRecord {
            x: r.x,
            y: y1,
            y_ref: y2,
            pol: r.pol,
            r_xy: r1,
            r_xy0: r2,
            real_cross,
            cos_delta,
            defined: cos_delta.is_some(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn collinear_and_cancelling() {
        assert_eq!(recover_real_cross(2.0, 1.0, 1.0), 1.0);
        assert_eq!(recover_real_cross(0.0, 1.0, 1.0), -1.0);
        assert_eq!(recover_cos_delta(2.0, 3.0, 6.0, 1e-10).unwrap(), Some(1.0));
        assert_eq!(recover_cos_delta(2.0, 3.0, 0.0, 1e-10).unwrap(), Some(0.0));
        assert_eq!(em_recover_cos_delta(1.0, 1.0, 1.0, 0.0).unwrap(), Some(1.0));
        assert_eq!(em_recover_cos_delta(1.0, 1.0, 0.0, 0.0).unwrap(), Some(0.0));
    }

    #[test]
    fn small_amplitudes_are_undefined() {
        assert_eq!(recover_cos_delta(1e-6, 1e-6, 0.0, 1e-10).unwrap(), None);
    }

    #[test]
    fn corrupted_cross_term_is_rejected() {
        assert!(matches!(recover_cos_delta(1.0, 1.0, 1.1, 1e-10), Err(Error::Inconsistent(_))));
        // rounding-level excess is clamped
        assert_eq!(recover_cos_delta(1.0, 1.0, 1.0 + 1e-9, 1e-10).unwrap(), Some(1.0));
    }

    proptest! {
        #[test]
        fn cross_term_from_moduli(ar in 0.01f64..10.0, ap in -3.2f64..3.2, br in 0.01f64..10.0, bp in -3.2f64..3.2) {
            let a = Complex64::from_polar(ar, ap);
            let b = Complex64::from_polar(br, bp);
            let rc = recover_real_cross((a + b).norm(), ar, br);
            prop_assert!((rc - (a * b.conj()).re).abs() < 1e-12 * (ar * br).max(1.0) * 10.0);
            let c = recover_cos_delta(ar, br, rc, 1e-10).unwrap().unwrap();
            prop_assert!((c - (ap - bp).cos()).abs() < 1e-9 / (ar * br).min(1.0));
        }
    }
}
