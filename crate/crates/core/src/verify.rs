//! Executable identity checks: reciprocity, mixed reciprocity, phase recovery, nonvanishing
//! witnesses and distinctness of data sets. Every check returns a [`CheckReport`].

use crate::acoustic::medium::born_scattered;
use crate::acoustic::{solve_sphere_point_source, AcousticConfig, ForwardModel, LsSolver, MediumSample, Scatterer, SphereScatterer};
use crate::eigencheck::{certify_eigenvalue_free, EigenKind, ShellSpec, TOL_CERT};
use crate::em::{self, DipoleSource, Mat3, Tangent};
use crate::error::{Error, Result};
use crate::phaseless::{
    acoustic_dataset, acoustic_tables, classify_branch, conjugate_discriminator, discriminator_grids, em_dataset, em_records,
    em_tables, phase_differences, shell_traces, AcousticTables, Branch, EmConfig, EmTables, GridSpec, Mode,
    PhaselessDataset, PointRef, Verdict, TOL_MATCH,
};
use crate::{SphereGrid, Vec3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub config: Value,
    pub max_abs_error: f64,
    pub tolerance: f64,
    /// `max_abs_error <= tolerance`; NaN never passes.
    pub pass: bool,
    pub sample_count: usize,
    pub details: Value,
}

impl CheckReport {
    pub fn new(name: &str, config: Value, err: f64, tol: f64, samples: usize, details: Value) -> Self {
        CheckReport {
            check_name: name.to_string(),
            config,
            max_abs_error: err,
            tolerance: tol,
            pass: err <= tol,
            sample_count: samples,
            details,
        }
    }

    /// A check that could not run: reported as failed with a NaN error.
    pub fn errored(name: &str, config: Value, tol: f64, e: &Error) -> Self {
        CheckReport::new(name, config, f64::NAN, tol, 0, json!({ "error": e.to_string() }))
    }
}

/// Radical inverse of `i` in base `b`.
pub fn halton(mut i: u64, b: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// `count` unit vectors from the (2, 3) Halton sequence, starting at an index fixed by `seed`.
pub fn probe_directions(count: usize, seed: u64) -> Vec<Vec3> {
    let start = 1 + seed % (1 << 20);
    (0..count as u64)
        .map(|i| {
            let (u, v) = (halton(start + i, 2), halton(start + i, 3));
            let ct: f64 = 1.0 - 2.0 * u;
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            let ph = 2.0 * PI * v;
            Vec3::new(st * ph.cos(), st * ph.sin(), ct)
        })
        .collect()
}

pub fn probe_points(radius: f64, count: usize, seed: u64) -> Vec<Vec3> {
    probe_directions(count, seed).into_iter().map(|d| d * radius).collect()
}

fn max_rel(diffs: &[f64], scale: f64) -> f64 {
    diffs.iter().cloned().fold(0.0, f64::max) / scale
}

/// w^s(x, y) = w^s(y, x) over all pairs of `count` probe points on ∂B_{R1}. The error is
/// max |difference| relative to max |w^s| over the probe set.
pub fn check_acoustic_reciprocity(model: &ForwardModel, count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let pts = probe_points(model.cfg.r1, count, seed);
    let fields = pts.par_iter().map(|y| model.point_source(y)).collect::<Result<Vec<_>>>()?;
    let mut diffs = Vec::new();
    let mut scale: f64 = 0.0;
    for i in 0..count {
        for j in i + 1..count {
            let a = fields[j].scattered(&pts[i])?;
            let b = fields[i].scattered(&pts[j])?;
            scale = scale.max(a.norm()).max(b.norm());
            diffs.push((a - b).norm());
        }
    }
    let err = max_rel(&diffs, scale);
    Ok(CheckReport::new(
        "acoustic_reciprocity",
        json!({ "k": model.cfg.k, "r1": model.cfg.r1, "scatterer": model.scatterer.summary(), "points": count, "seed": seed }),
        err,
        tol,
        diffs.len(),
        json!({ "max_scattered": scale }),
    ))
}

/// u^s(z, d) = 4π w^∞(−d, z) for `count` directions d and `count` points z on ∂B_{R1}.
pub fn check_mixed_reciprocity_acoustic(model: &ForwardModel, count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let dirs = probe_directions(count, seed);
    let zs = probe_points(model.cfg.r1, count, seed.wrapping_add(7919));
    let plane = dirs.par_iter().map(|d| model.plane_wave(d)).collect::<Result<Vec<_>>>()?;
    let point = zs.par_iter().map(|z| model.point_source(z)).collect::<Result<Vec<_>>>()?;
    let mut diffs = Vec::new();
    let mut scale: f64 = 0.0;
    for (d, u) in dirs.iter().zip(&plane) {
        for (z, w) in zs.iter().zip(&point) {
            let lhs = w.far_field(&(-*d)) * (4.0 * PI);
            let rhs = u.scattered(z)?;
            scale = scale.max(rhs.norm());
            diffs.push((lhs - rhs).norm());
        }
    }
    // a transparent medium gives 0 = 0
    let err = if scale == 0.0 { max_rel(&diffs, 1.0) } else { max_rel(&diffs, scale) };
    Ok(CheckReport::new(
        "acoustic_mixed_reciprocity",
        json!({ "k": model.cfg.k, "r1": model.cfg.r1, "scatterer": model.scatterer.summary(), "directions": count, "points": count, "seed": seed }),
        err,
        tol,
        diffs.len(),
        json!({ "max_scattered": scale }),
    ))
}

fn mat_diff_norm(a: &Mat3, b: &Mat3) -> f64 {
    let mut m: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            m = m.max((a[r][c] - b[r][c]).norm());
        }
    }
    m
}

fn mat_max(a: &Mat3) -> f64 {
    a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

fn em_dipole(cfg: &EmConfig, y: &Vec3) -> Result<em::EmField> {
    em::solve_pec_sphere_dipole(cfg.k, cfg.radius, &DipoleSource { y: *y, p: Vec3::new(1.0, 0.0, 0.0), tau: true })
}

/// E^s(x, y) = [E^s(y, x)]^⊤ on ∂B_{R1}.
pub fn check_em_reciprocity(cfg: &EmConfig, count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    cfg.validate()?;
    let pts = probe_points(cfg.r1, count, seed);
    let fields = pts.par_iter().map(|y| em_dipole(cfg, y)).collect::<Result<Vec<_>>>()?;
    let mut diffs = Vec::new();
    let mut scale: f64 = 0.0;
    for i in 0..count {
        for j in i + 1..count {
            let a = fields[j].scattered_matrix(&pts[i])?;
            let b = em::mat_transpose(&fields[i].scattered_matrix(&pts[j])?);
            scale = scale.max(mat_max(&a));
            diffs.push(mat_diff_norm(&a, &b));
        }
    }
    Ok(CheckReport::new(
        "em_reciprocity",
        json!({ "k": cfg.k, "r1": cfg.r1, "radius": cfg.radius, "points": count, "seed": seed }),
        max_rel(&diffs, scale),
        tol,
        diffs.len(),
        json!({ "max_scattered": scale }),
    ))
}

/// 4π E^∞(−d, x) = [E^s(x, d)]^⊤, far field of a dipole at x against the plane-wave solve.
pub fn check_em_mixed_reciprocity(cfg: &EmConfig, count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    cfg.validate()?;
    let dirs = probe_directions(count, seed);
    let xs = probe_points(cfg.r1, count, seed.wrapping_add(7919));
    let plane = dirs
        .par_iter()
        .map(|d| em::solve_pec_sphere_plane_wave(cfg.k, cfg.radius, d, &Vec3::new(0.0, 0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    let point = xs.par_iter().map(|x| em_dipole(cfg, x)).collect::<Result<Vec<_>>>()?;
    let mut diffs = Vec::new();
    let mut scale: f64 = 0.0;
    for (d, u) in dirs.iter().zip(&plane) {
        for (x, w) in xs.iter().zip(&point) {
            let mut lhs = w.far_field_matrix(&(-*d))?;
            lhs.iter_mut().flatten().for_each(|z| *z *= 4.0 * PI);
            let rhs = em::mat_transpose(&u.scattered_matrix(x)?);
            scale = scale.max(mat_max(&rhs));
            diffs.push(mat_diff_norm(&lhs, &rhs));
        }
    }
    Ok(CheckReport::new(
        "em_mixed_reciprocity",
        json!({ "k": cfg.k, "r1": cfg.r1, "radius": cfg.radius, "directions": count, "points": count, "seed": seed }),
        max_rel(&diffs, scale),
        tol,
        diffs.len(),
        json!({ "max_scattered": scale }),
    ))
}

fn curl_fd<F: Fn(&Vec3) -> [Complex64; 3]>(f: &F, x: &Vec3, h: f64) -> [Complex64; 3] {
    let mut jac = [[Complex64::new(0.0, 0.0); 3]; 3]; // jac[i][j] = ∂_j F_i
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = h;
        let e = Vec3::new(e[0], e[1], e[2]);
        let (fp, fm) = (f(&(*x + e)), f(&(*x - e)));
        for i in 0..3 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    [jac[2][1] - jac[1][2], jac[0][2] - jac[2][0], jac[1][0] - jac[0][1]]
}

/// (i/k) curl curl (p e^{ik x·d}) by nested central differences, against ik(d×p)×d e^{ik x·d}
/// and against the incident field of the plane-wave solver. Fails unless the error drops at
/// second order under halving of h.
pub fn check_plane_wave_curl_curl(k: f64, count: usize, seed: u64, h: f64, tol: f64) -> Result<CheckReport> {
    let dirs = probe_directions(count, seed);
    let pols = probe_directions(count, seed.wrapping_add(104_729));
    let xs = probe_points(1.0, count, seed.wrapping_add(7919));
    let i = Complex64::new(0.0, 1.0);
    let mut errs = [0.0f64; 2];
    let mut solver_gap: f64 = 0.0;
    let mut parallel_max: f64 = 0.0;
    for ((d, p), x) in dirs.iter().zip(&pols).zip(&xs) {
        let (d, p) = (*d, *p);
        let f = move |y: &Vec3| {
            let e = Complex64::from_polar(1.0, k * y.dot(&d));
            [e * p[0], e * p[1], e * p[2]]
        };
        let q = d.cross(&p).cross(&d);
        let ph = i * k * Complex64::from_polar(1.0, k * x.dot(&d));
        let exact = [ph * q[0], ph * q[1], ph * q[2]];
        for (slot, hh) in [h, h / 2.0].into_iter().enumerate() {
            let c = |y: &Vec3| curl_fd(&f, y, hh);
            let cc = curl_fd(&c, x, hh);
            let approx = cc.map(|z| z * (i / k));
            let e = (0..3).map(|j| (approx[j] - exact[j]).norm()).fold(0.0, f64::max) / k;
            errs[slot] = errs[slot].max(e);
        }
        let sol = em::solve_pec_sphere_plane_wave(k, 0.1, &d, &p)?.incident(&(*x * 3.0))?;
        let ph3 = i * k * Complex64::from_polar(1.0, k * (*x * 3.0).dot(&d));
        solver_gap = solver_gap.max((0..3).map(|j| (sol[j] - ph3 * q[j]).norm()).fold(0.0, f64::max) / k);
        let par = em::solve_pec_sphere_plane_wave(k, 0.1, &d, &(d * 2.0))?.incident(x)?;
        parallel_max = parallel_max.max(em::cnorm(&par));
    }
    let order = (errs[0] / errs[1]).log2();
    let ok_order = (1.7..=2.3).contains(&order);
    let err = if ok_order { errs[1].max(solver_gap).max(parallel_max) } else { f64::INFINITY };
    Ok(CheckReport::new(
        "plane_wave_curl_curl",
        json!({ "k": k, "h": h, "samples": count, "seed": seed }),
        err,
        tol,
        count,
        json!({ "error_h": errs[0], "error_h_half": errs[1], "observed_order": order,
                "solver_incident_gap": solver_gap, "parallel_polarization_max": parallel_max }),
    ))
}

/// Grid points within ρ steps of π/n_θ (great-circle angle) of `center`.
pub fn grid_disc(g: &SphereGrid, center: usize, rho: usize) -> Vec<usize> {
    let step = PI / g.n_theta as f64;
    let c = g.points[center].cart * (1.0 / g.radius);
    g.points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let u = p.cart * (1.0 / g.radius);
            c.dot(&u).clamp(-1.0, 1.0).acos() <= rho as f64 * step + 1e-12
        })
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscWitness {
    pub shell: u8,
    pub center: usize,
    /// Radius in grid steps; `size` is the number of grid points inside.
    pub rho: usize,
    pub size: usize,
    pub min_modulus: f64,
}

type Moduli = HashMap<(PointRef, PointRef), f64>;

fn single_moduli(ds: &PhaselessDataset) -> Moduli {
    let mut out: Moduli = HashMap::new();
    for r in ds.records.iter().filter(|r| !r.is_superposed()) {
        let y = r.sources.iter().flatten().next().copied().expect("single record has a source");
        let e = out.entry((r.x, y)).or_insert(0.0);
        *e = e.max(r.modulus);
    }
    out
}

fn region_max(m: &Moduli, pred: impl Fn(&PointRef, &PointRef) -> bool) -> (f64, usize) {
    m.iter().filter(|((x, y), _)| pred(x, y)).fold((0.0, 0), |(a, n), (_, v)| (a.max(*v), n + 1))
}

/// Largest disc around some grid point where `f(i)` exceeds `floor` for every member.
fn single_disc(g: &SphereGrid, shell: u8, floor: f64, f: impl Fn(usize) -> Option<f64>) -> Option<DiscWitness> {
    let mut best: Option<DiscWitness> = None;
    for rho in 0..=g.n_theta {
        let mut found = None;
        for c in 0..g.len() {
            let disc = grid_disc(g, c, rho);
            let vals: Option<Vec<f64>> = disc.iter().map(|&i| f(i)).collect();
            if let Some(v) = vals {
                let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                if min > floor {
                    found = Some(DiscWitness { shell, center: c, rho, size: disc.len(), min_modulus: min });
                    break;
                }
            }
        }
        match found {
            Some(w) => best = Some(w),
            None => break,
        }
    }
    best
}

/// Largest equal-radius disjoint discs U₁ ∋ c₁, U₂ ∋ c₂ with `f(x, y) > floor` on U₁×U₂ and
/// `extra(x) > floor` on U₁.
fn pair_discs(
    g: &SphereGrid,
    shell: u8,
    floor: f64,
    f: impl Fn(usize, usize) -> Option<f64>,
    extra: impl Fn(usize) -> Option<f64>,
) -> Option<(DiscWitness, DiscWitness)> {
    let mut best = None;
    for rho in 0..=g.n_theta / 2 {
        let discs: Vec<Vec<usize>> = (0..g.len()).map(|c| grid_disc(g, c, rho)).collect();
        let mut found = None;
        'search: for c1 in 0..g.len() {
            let u1 = &discs[c1];
            let Some(e1) = u1.iter().map(|&i| extra(i)).collect::<Option<Vec<f64>>>() else { continue };
            let e1 = e1.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(e1 > floor) {
                continue;
            }
            for c2 in 0..g.len() {
                let u2 = &discs[c2];
                if u2.iter().any(|i| u1.contains(i)) {
                    continue;
                }
                let mut min = f64::INFINITY;
                for &x in u1 {
                    for &y in u2 {
                        match f(x, y) {
                            Some(v) if v > floor => min = min.min(v),
                            _ => min = f64::NAN,
                        }
                    }
                    if min.is_nan() {
                        break;
                    }
                }
                if min > floor {
                    found = Some((
                        DiscWitness { shell, center: c1, rho, size: u1.len(), min_modulus: min.min(e1) },
                        DiscWitness { shell, center: c2, rho, size: u2.len(), min_modulus: min },
                    ));
                    break 'search;
                }
            }
        }
        match found {
            Some(w) => best = Some(w),
            None => break,
        }
    }
    best
}

/// Largest modulus on each region where the total field must not vanish identically, and
/// disc witnesses for the open sets where it is nonzero. The error counts failed
/// conditions (tolerance 0).
pub fn check_nonvanishing(ds: &PhaselessDataset) -> Result<CheckReport> {
    let tol_amp = ds.tol_amp();
    let m = single_moduli(ds);
    let mut regions: Vec<(&str, (f64, usize))> = Vec::new();
    let mut witnesses: Vec<(&str, Option<DiscWitness>)> = Vec::new();
    let get = |x: PointRef, y: PointRef| m.get(&(x, y)).copied();
    let all = |_| Some(f64::INFINITY);
    match ds.header.mode {
        Mode::Acoustic => {
            let y0 = ds.header.y0.ok_or_else(|| Error::Inconsistent("acoustic dataset without y0".into()))?;
            regions.push(("x_r1_y0", region_max(&m, |x, y| x.shell == 1 && *y == y0)));
            regions.push(("x_r2_y0", region_max(&m, |x, y| x.shell == 2 && *y == y0)));
            regions.push(("x_r2_y_r2", region_max(&m, |x, y| x.shell == 2 && y.shell == 2)));
            let (g1, g2) = (&ds.grid1, &ds.grid2);
            let inner = pair_discs(g1, 1, tol_amp, |x, y| get(PointRef::r1(x), PointRef::r1(y)), all);
            let outer = pair_discs(g2, 2, tol_amp, |x, y| get(PointRef::r2(x), PointRef::r2(y)), |x| get(PointRef::r2(x), y0));
            witnesses.push(("u1", inner.as_ref().map(|w| w.0.clone())));
            witnesses.push(("u2", inner.map(|w| w.1)));
            witnesses.push(("u_prime", single_disc(g2, 2, tol_amp, |x| get(PointRef::r2(x), y0))));
            witnesses.push(("u1_prime", outer.as_ref().map(|w| w.0.clone())));
            witnesses.push(("u2_prime", outer.map(|w| w.1)));
        }
        Mode::Em => {
            regions.push(("x_r1_y_r1", region_max(&m, |x, y| x.shell == 1 && y.shell == 1)));
            regions.push(("x_r1_y_r2", region_max(&m, |x, y| x.shell == 1 && y.shell == 2)));
            let inner = pair_discs(&ds.grid1, 1, tol_amp, |x, y| get(PointRef::r1(x), PointRef::r1(y)), all);
            witnesses.push(("u1", inner.as_ref().map(|w| w.0.clone())));
            witnesses.push(("u2", inner.map(|w| w.1)));
        }
    }
    let failed = regions.iter().filter(|(_, (max, _))| !(*max > tol_amp)).count()
        + witnesses.iter().filter(|(_, w)| w.is_none()).count();
    let regions: BTreeMap<_, _> =
        regions.into_iter().map(|(k, (max, n))| (k, json!({ "max_modulus": max, "samples": n }))).collect();
    let witnesses: BTreeMap<_, _> = witnesses.into_iter().map(|(k, w)| (k, json!(w))).collect();
    Ok(CheckReport::new(
        "nonvanishing",
        json!({ "mode": ds.header.mode, "k": ds.header.k, "scatterer": ds.header.scatterer,
                "grid1": ds.header.grid1, "grid2": ds.header.grid2 }),
        failed as f64,
        0.0,
        m.len(),
        json!({ "tol_amp": tol_amp, "regions": regions, "witnesses": witnesses }),
    ))
}

/// Harness constant: distinct scatterers must give data sets at least this far apart.
pub const DISTINCTNESS_FLOOR: f64 = 1e-4;

/// Max pointwise difference of two data sets on identical index sets; passes when the
/// difference reaches `floor` (error = max(0, floor − difference), tolerance 0).
pub fn uniqueness_premise_witness(a: &PhaselessDataset, b: &PhaselessDataset, floor: f64) -> Result<CheckReport> {
    let diff = a.max_difference(b)?;
    Ok(CheckReport::new(
        "uniqueness_premise",
        json!({ "scatterer_a": a.header.scatterer, "scatterer_b": b.header.scatterer, "floor": floor }),
        (floor - diff).max(0.0),
        0.0,
        a.records.len(),
        json!({ "max_difference": diff }),
    ))
}

/// Sanity inversion: the same scatterer must reproduce its data set.
pub fn check_datasets_identical(a: &PhaselessDataset, b: &PhaselessDataset, tol: f64) -> Result<CheckReport> {
    let diff = a.max_difference(b)?;
    Ok(CheckReport::new(
        "identical_scatterers",
        json!({ "scatterer": a.header.scatterer }),
        diff,
        tol,
        a.records.len(),
        json!({}),
    ))
}

/// Complex field value behind a single-source record: (x, source, m, source label).
pub type Oracle<'a> = Box<dyn Fn(PointRef, PointRef, Option<Tangent>, Option<Tangent>) -> Complex64 + Sync + 'a>;

pub fn acoustic_oracle(t: &AcousticTables) -> Oracle<'_> {
    Box::new(move |x, y, _, _| match (x.shell, y.shell) {
        (1, _) => t.w11[y.index as usize][x.index as usize],
        (_, 1) => t.w2y0[x.index as usize],
        _ => t.w22[y.index as usize][x.index as usize],
    })
}

pub fn em_oracle(t: &EmTables) -> Oracle<'_> {
    Box::new(move |x, y, m, p| {
        let key = (m.expect("EM label"), p.expect("EM label"));
        let table = if y.shell == 1 { &t.s11 } else { &t.s12 };
        table[&key][y.index as usize][x.index as usize]
    })
}

/// Recovered Re{w(x,y)·conj w(x,y_ref)} and cos Δ against the complex oracle, over the
/// defined records. Returns three reports: the cross term (relative to |w(x,y)||w(x,y_ref)|),
/// the cosine (absolute) and the defined fraction (error = max(0, min_defined − fraction)).
pub fn check_phase_recovery(
    ds: &PhaselessDataset,
    oracle: &Oracle<'_>,
    tol_cross: f64,
    tol_cos: f64,
    min_defined: f64,
) -> Result<Vec<CheckReport>> {
    let recs = phase_differences(ds)?;
    let mut cross_err: f64 = 0.0;
    let mut cos_err: f64 = 0.0;
    let mut defined = 0usize;
    for r in &recs {
        let (m, n, l) = match r.pol {
            Some(p) => (Some(p.m), p.n, p.l),
            None => (None, None, None),
        };
        let a = oracle(r.x, r.y, m, n);
        let b = oracle(r.x, r.y_ref, m, l);
        let rr = a.norm() * b.norm();
        let exact = (a * b.conj()).re;
        if let Some(c) = r.cos_delta {
            defined += 1;
            cross_err = cross_err.max((r.real_cross - exact).abs() / rr);
            cos_err = cos_err.max((c - exact / rr).abs());
        }
    }
    let frac = if recs.is_empty() { 0.0 } else { defined as f64 / recs.len() as f64 };
    let prefix = match ds.header.mode {
        Mode::Acoustic => "phase_recovery",
        Mode::Em => "em_phase_recovery",
    };
    let cfg = json!({ "mode": ds.header.mode, "k": ds.header.k, "scatterer": ds.header.scatterer,
                      "grid1": ds.header.grid1, "grid2": ds.header.grid2 });
    Ok(vec![
        CheckReport::new(&format!("{prefix}_real_cross"), cfg.clone(), cross_err, tol_cross, defined, json!({})),
        CheckReport::new(&format!("{prefix}_cos_delta"), cfg.clone(), cos_err, tol_cos, defined, json!({})),
        CheckReport::new(
            &format!("{prefix}_defined_fraction"),
            cfg,
            (min_defined - frac).max(0.0),
            0.0,
            recs.len(),
            json!({ "defined": defined, "fraction": frac, "required": min_defined }),
        ),
    ])
}

/// classify_branch on the inner-sphere table: the table against itself must come out as
/// identity and its conjugate as conjugate, both with margin ratio above `min_margin`.
/// The error is the larger winning residual.
pub fn check_branch_dichotomy(t: &AcousticTables, min_margin: f64, tol: f64) -> Result<CheckReport> {
    let w: Vec<Complex64> = t.w11.iter().flatten().copied().filter(|z| z.is_finite()).collect();
    let wc: Vec<Complex64> = w.iter().map(|z| z.conj()).collect();
    let id = classify_branch(&w, &w)?;
    let cj = classify_branch(&wc, &w)?;
    let ok = id.branch == Branch::Identity && cj.branch == Branch::Conjugate && id.margin_ratio > min_margin && cj.margin_ratio > min_margin;
    let err = if ok { id.identity_residual.max(cj.conjugate_residual) } else { f64::INFINITY };
    Ok(CheckReport::new(
        "branch_dichotomy",
        json!({ "min_margin": min_margin }),
        err,
        tol,
        w.len(),
        json!({ "identity": id, "conjugated": cj }),
    ))
}

/// The true pair must be accepted and the conjugated pair rejected. Error 0 when both
/// verdicts are right, 1 per wrong verdict.
pub fn check_conjugate_discriminator(model: &ForwardModel, n_theta: usize, y0: &Vec3) -> Result<CheckReport> {
    let grids = discriminator_grids(&model.cfg, n_theta)?;
    let w = shell_traces(model, &grids, y0)?;
    let truth = conjugate_discriminator(&model.cfg, &grids, y0, &w, &w)?;
    let conj = conjugate_discriminator(&model.cfg, &grids, y0, &w, &w.conj())?;
    let wrong = (truth.verdict != Verdict::ConsistentRadiating) as usize + (conj.verdict != Verdict::ConjugateBranchRejected) as usize;
    Ok(CheckReport::new(
        "conjugate_discriminator",
        json!({ "k": model.cfg.k, "scatterer": model.scatterer.summary(), "n_theta": n_theta }),
        wrong as f64,
        0.0,
        grids.g1.len() + grids.g2.len(),
        json!({ "true_pair": truth, "conjugated_pair": conj }),
    ))
}

/// The configured k must be certified free of Dirichlet and Maxwell shell eigenvalues.
/// Error = max(0, TOL_CERT − margin).
pub fn check_eigen_certificate(cfg: &AcousticConfig) -> Result<CheckReport> {
    let spec = ShellSpec::new(cfg.r1, cfg.r2, cfg.k)?;
    let d = certify_eigenvalue_free(&spec, EigenKind::Dirichlet)?;
    let m = certify_eigenvalue_free(&spec, EigenKind::Maxwell)?;
    let margin = d.margin.min(m.margin);
    Ok(CheckReport::new(
        "eigen_certificate",
        json!({ "k": cfg.k, "r1": cfg.r1, "r2": cfg.r2, "n_max": spec.n_max }),
        (TOL_CERT - margin).max(0.0),
        0.0,
        2 * (spec.n_max + 1),
        json!({ "dirichlet": d, "maxwell": m }),
    ))
}

/// Boundary condition of a sphere scatterer at `count` surface probes for point sources at
/// `count` probes on ∂B_{R1} (absolute residual; fields are O(1) there).
pub fn check_boundary_condition(cfg: &AcousticConfig, sc: &SphereScatterer, count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let surface = probe_points(sc.radius, count, seed);
    let ys = probe_points(cfg.r1, count, seed.wrapping_add(7919));
    let mut worst: f64 = 0.0;
    for y in &ys {
        let f = solve_sphere_point_source(cfg, sc, y)?;
        worst = worst.max(f.boundary_residual(sc, &surface)?);
    }
    Ok(CheckReport::new(
        "boundary_condition",
        json!({ "k": cfg.k, "radius": sc.radius, "bc": sc.bc, "sources": count, "points": count, "seed": seed }),
        worst,
        tol,
        count * count,
        json!({}),
    ))
}

/// LS solution against the single-scattering sum for the same support at weak contrast.
/// The error is max |w^s_LS − w^s_Born| relative to max |w^i| at the probes: the gap itself is
/// second order in the contrast, so relative to the Born value it stays at O(contrast).
pub fn check_born_agreement(cfg: &AcousticConfig, med: &MediumSample, contrast: f64, count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let qmax = med.contrast().iter().map(|q| q.norm()).fold(0.0, f64::max);
    let weak = if qmax == 0.0 {
        med.clone()
    } else {
        MediumSample { n_values: med.contrast().iter().map(|q| 1.0 + q * (contrast / qmax)).collect(), ..med.clone() }
    };
    let solver = LsSolver::new(cfg, &weak)?;
    let ys = probe_points(cfg.r1, count, seed);
    let xs = probe_points(cfg.r1, count, seed.wrapping_add(7919));
    let mut gap: f64 = 0.0;
    let mut inc: f64 = 0.0;
    let mut born_max: f64 = 0.0;
    for y in &ys {
        let f = solver.solve_point_source(y)?;
        for x in xs.iter().filter(|x| x.dist(y) > 1e-9) {
            let b = born_scattered(cfg.k, &weak, &f.source, x);
            gap = gap.max((f.scattered(x)? - b).norm());
            inc = inc.max(f.incident(x)?.norm());
            born_max = born_max.max(b.norm());
        }
    }
    Ok(CheckReport::new(
        "born_agreement",
        json!({ "k": cfg.k, "contrast": contrast, "n_side": med.n_side, "points": count, "seed": seed }),
        gap / inc,
        tol,
        count * count,
        json!({ "max_gap": gap, "max_born": born_max, "gap_over_born": gap / born_max }),
    ))
}

/// Seven-point Laplacian residual |Δ_h w^s + k² w^s| of the scattered field between the
/// scatterer and ∂B_{R1}, at steps h and h/2. Error = |ratio − 4|.
pub fn check_helmholtz_order(model: &ForwardModel, count: usize, seed: u64, h: f64, tol: f64) -> Result<CheckReport> {
    let rad = 0.5 * (model.scatterer.extent() + model.cfg.r1);
    let xs = probe_points(rad, count, seed);
    let ys = probe_points(model.cfg.r2, count, seed.wrapping_add(7919));
    let k2 = model.cfg.k * model.cfg.k;
    let mut res = [0.0f64; 2];
    for (x, y) in xs.iter().zip(&ys) {
        let f = model.point_source(y)?;
        for (slot, hh) in [h, h / 2.0].into_iter().enumerate() {
            let w0 = f.scattered(x)?;
            let mut s = w0 * (-6.0);
            for e in 0..3 {
                let mut d = [0.0; 3];
                d[e] = hh;
                let d = Vec3::new(d[0], d[1], d[2]);
                s += f.scattered(&(*x + d))? + f.scattered(&(*x - d))?;
            }
            res[slot] = res[slot].max((s / (hh * hh) + w0 * k2).norm());
        }
    }
    let ratio = res[0] / res[1];
    Ok(CheckReport::new(
        "helmholtz_residual_order",
        json!({ "k": model.cfg.k, "scatterer": model.scatterer.summary(), "h": h, "points": count, "seed": seed }),
        (ratio - 4.0).abs(),
        tol,
        count,
        json!({ "residual_h": res[0], "residual_h_half": res[1], "ratio": ratio }),
    ))
}

/// Acoustic part of a suite: forward model and a second scatterer for the distinctness check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcousticSuite {
    pub cfg: AcousticConfig,
    pub scatterer: Scatterer,
    pub alternative: Scatterer,
    pub grid1: GridSpec,
    pub grid2: GridSpec,
    pub y0: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Absent for EM-only runs.
    pub acoustic: Option<AcousticSuite>,
    pub em: EmConfig,
    /// Obstacle radius of the second PEC sphere for the EM distinctness check.
    pub em_alternative_radius: f64,
    pub pols: Vec<Tangent>,
    pub em_grid1: GridSpec,
    pub em_grid2: GridSpec,
    pub seed: u64,
    pub pair_count: usize,
    pub probe_count: usize,
    pub discriminator_n_theta: usize,
    pub distinctness_floor: f64,
    /// Overrides keyed by check name.
    pub tolerances: BTreeMap<String, f64>,
}

/// Default tolerance of every check in the suite. Reciprocity bounds for gridded media
/// follow the LS solver accuracy rather than the series truncation.
pub fn default_tolerances(medium: bool) -> BTreeMap<String, f64> {
    let mut t = BTreeMap::new();
    t.insert("acoustic_reciprocity".into(), if medium { 1e-6 } else { 1e-10 });
    t.insert("acoustic_mixed_reciprocity".into(), if medium { 1e-6 } else { 1e-8 });
    t.insert("boundary_condition".into(), 1e-8);
    t.insert("born_agreement".into(), 1e-6);
    t.insert("born_contrast".into(), 1e-4);
    t.insert("helmholtz_residual_order".into(), 0.5);
    t.insert("em_reciprocity".into(), 1e-8);
    t.insert("em_mixed_reciprocity".into(), 1e-7);
    t.insert("plane_wave_curl_curl".into(), 1e-5);
    t.insert("phase_recovery_real_cross".into(), 1e-10);
    t.insert("phase_recovery_cos_delta".into(), 1e-9);
    t.insert("em_phase_recovery_real_cross".into(), 1e-10);
    t.insert("em_phase_recovery_cos_delta".into(), 1e-9);
    t.insert("min_defined_fraction".into(), 0.8);
    t.insert("branch_dichotomy".into(), TOL_MATCH);
    t.insert("branch_margin".into(), 1e4);
    t.insert("identical_scatterers".into(), 1e-12);
    t
}

impl SuiteConfig {
    fn is_medium(&self) -> bool {
        matches!(self.acoustic.as_ref().map(|a| &a.scatterer), Some(Scatterer::Medium(_)))
    }

    pub fn tol(&self, name: &str) -> f64 {
        match self.tolerances.get(name) {
            Some(t) => *t,
            None => default_tolerances(self.is_medium()).get(name).copied().unwrap_or(0.0),
        }
    }

    /// Names accepted as tolerance overrides.
    pub fn tolerance_keys() -> Vec<String> {
        default_tolerances(false).into_keys().collect()
    }
}

type Job<'a> = Box<dyn Fn() -> Vec<CheckReport> + Send + Sync + 'a>;

fn guard(name: &str, tol: f64, r: Result<CheckReport>) -> Vec<CheckReport> {
    vec![r.unwrap_or_else(|e| CheckReport::errored(name, json!({}), tol, &e))]
}

fn guard_many(name: &str, tol: f64, r: Result<Vec<CheckReport>>) -> Vec<CheckReport> {
    r.unwrap_or_else(|e| vec![CheckReport::errored(name, json!({}), tol, &e)])
}

struct AcousticData {
    model: ForwardModel,
    tables: AcousticTables,
    ds: PhaselessDataset,
    ds_alt: PhaselessDataset,
    y0: Vec3,
}

fn acoustic_data(a: &AcousticSuite) -> Result<AcousticData> {
    let (g1, g2) = (a.grid1.build()?, a.grid2.build()?);
    let model = ForwardModel::new(&a.cfg, &a.scatterer)?;
    let alt = ForwardModel::new(&a.cfg, &a.alternative)?;
    let (tables, alt_tables) =
        rayon::join(|| acoustic_tables(&model, &g1, &g2, a.y0), || acoustic_tables(&alt, &g1, &g2, a.y0));
    let (tables, alt_tables) = (tables?, alt_tables?);
    let ds = acoustic_dataset(&model, &g1, &g2, &tables);
    let ds_alt = acoustic_dataset(&alt, &g1, &g2, &alt_tables);
    let y0 = g1.points[a.y0].cart;
    Ok(AcousticData { model, tables, ds, ds_alt, y0 })
}

/// Runs every check concurrently. Failures to run become failed reports; the output order
/// is fixed.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    cfg.em.validate()?;
    let alt_em = EmConfig { radius: cfg.em_alternative_radius, ..cfg.em };
    alt_em.validate()?;
    let (eg1, eg2) = (cfg.em_grid1.build()?, cfg.em_grid2.build()?);
    let mut pols = cfg.pols.clone();
    pols.sort();
    pols.dedup();
    let ac = match &cfg.acoustic {
        Some(a) => {
            a.cfg.validate()?;
            Some(acoustic_data(a)?)
        }
        None => None,
    };
    let (em_t, em_alt) = rayon::join(|| em_tables(&cfg.em, &eg1, &eg2), || em_tables(&alt_em, &eg1, &eg2));
    let em_ds = em_t.as_ref().ok().map(|t| em_dataset(&cfg.em, &eg1, &eg2, &pols, em_records(t, &pols)));
    let em_alt_ds = em_alt.as_ref().ok().map(|t| em_dataset(&alt_em, &eg1, &eg2, &pols, em_records(t, &pols)));
    let (seed, pairs, probes) = (cfg.seed, cfg.pair_count, cfg.probe_count);

    let mut jobs: Vec<Job> = Vec::new();
    if let (Some(a), Some(d)) = (&cfg.acoustic, &ac) {
        let m = &d.model;
        jobs.push(Box::new(|| guard("eigen_certificate", 0.0, check_eigen_certificate(&a.cfg))));
        jobs.push(Box::new(move || {
            let t = cfg.tol("acoustic_reciprocity");
            guard("acoustic_reciprocity", t, check_acoustic_reciprocity(m, pairs, seed, t))
        }));
        jobs.push(Box::new(move || {
            let t = cfg.tol("acoustic_mixed_reciprocity");
            guard("acoustic_mixed_reciprocity", t, check_mixed_reciprocity_acoustic(m, probes, seed, t))
        }));
        match &a.scatterer {
            Scatterer::Sphere(sc) => jobs.push(Box::new(move || {
                let t = cfg.tol("boundary_condition");
                guard("boundary_condition", t, check_boundary_condition(&a.cfg, sc, probes, seed, t))
            })),
            Scatterer::Medium(med) => jobs.push(Box::new(move || {
                let t = cfg.tol("born_agreement");
                let c = cfg.tol("born_contrast");
                guard("born_agreement", t, check_born_agreement(&a.cfg, med, c, probes.min(6), seed, t))
            })),
        }
        jobs.push(Box::new(move || {
            let t = cfg.tol("helmholtz_residual_order");
            let h = 0.02 * (a.cfg.r1 - m.scatterer.extent());
            guard("helmholtz_residual_order", t, check_helmholtz_order(m, probes.min(4), seed, h, t))
        }));
        jobs.push(Box::new(move || guard("nonvanishing", 0.0, check_nonvanishing(&d.ds))));
        jobs.push(Box::new(move || {
            let name = "phase_recovery_real_cross";
            let r = check_phase_recovery(
                &d.ds,
                &acoustic_oracle(&d.tables),
                cfg.tol(name),
                cfg.tol("phase_recovery_cos_delta"),
                cfg.tol("min_defined_fraction"),
            );
            guard_many(name, cfg.tol(name), r)
        }));
        jobs.push(Box::new(move || {
            let t = cfg.tol("branch_dichotomy");
            guard("branch_dichotomy", t, check_branch_dichotomy(&d.tables, cfg.tol("branch_margin"), t))
        }));
        jobs.push(Box::new(move || {
            guard("conjugate_discriminator", 0.0, check_conjugate_discriminator(m, cfg.discriminator_n_theta, &d.y0))
        }));
        jobs.push(Box::new(move || {
            guard("uniqueness_premise", 0.0, uniqueness_premise_witness(&d.ds, &d.ds_alt, cfg.distinctness_floor))
        }));
        jobs.push(Box::new(move || {
            let t = cfg.tol("identical_scatterers");
            let again = acoustic_data(a).map(|x| x.ds);
            guard("identical_scatterers", t, again.and_then(|b| check_datasets_identical(&d.ds, &b, t)))
        }));
    } else {
        jobs.push(Box::new(|| {
            let c = AcousticConfig { k: cfg.em.k, r1: cfg.em.r1, r2: cfg.em.r2 };
            guard("eigen_certificate", 0.0, check_eigen_certificate(&c))
        }));
    }
    jobs.push(Box::new(|| {
        let t = cfg.tol("em_reciprocity");
        guard("em_reciprocity", t, check_em_reciprocity(&cfg.em, pairs, seed, t))
    }));
    jobs.push(Box::new(|| {
        let t = cfg.tol("em_mixed_reciprocity");
        guard("em_mixed_reciprocity", t, check_em_mixed_reciprocity(&cfg.em, probes, seed, t))
    }));
    jobs.push(Box::new(|| {
        let t = cfg.tol("plane_wave_curl_curl");
        guard("plane_wave_curl_curl", t, check_plane_wave_curl_curl(cfg.em.k, probes, seed, 2e-3, t))
    }));
    jobs.push(Box::new(|| {
        let name = "em_phase_recovery_real_cross";
        let run = || -> Result<Vec<CheckReport>> {
            let t = em_t.as_ref().map_err(|e| Error::Solver(e.to_string()))?;
            let ds = em_ds.as_ref().expect("built with the tables");
            let mut v = check_phase_recovery(
                ds,
                &em_oracle(t),
                cfg.tol(name),
                cfg.tol("em_phase_recovery_cos_delta"),
                cfg.tol("min_defined_fraction"),
            )?;
            let mut nv = check_nonvanishing(ds)?;
            nv.check_name = "em_nonvanishing".into();
            v.push(nv);
            Ok(v)
        };
        guard_many(name, cfg.tol(name), run())
    }));
    jobs.push(Box::new(|| {
        let r = match (&em_ds, &em_alt_ds) {
            (Some(a), Some(b)) => uniqueness_premise_witness(a, b, cfg.distinctness_floor).map(|mut r| {
                r.check_name = "em_uniqueness_premise".into();
                r
            }),
            _ => Err(Error::Solver("EM tables failed".into())),
        };
        guard("em_uniqueness_premise", 0.0, r)
    }));
    Ok(jobs.par_iter().map(|j| j()).collect::<Vec<_>>().into_iter().flatten().collect())
}

/// Fixed-width table of the reports, one line each.
pub fn format_table(reports: &[CheckReport]) -> String {
    let w = reports.iter().map(|r| r.check_name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<w$}  {:>12}  {:>10}  {:>8}  {}\n", "check", "error", "tol", "samples", "result");
    for r in reports {
        s.push_str(&format!(
            "{:<w$}  {:>12.3e}  {:>10.1e}  {:>8}  {}\n",
            r.check_name,
            r.max_abs_error,
            r.tolerance,
            r.sample_count,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    s
}

/// Value at s = 0 of the polynomial interpolating (s_i, g_i) (Neville).
pub fn extrapolate_to_zero(s: &[f64], g: &[Complex64]) -> Complex64 {
    let mut p: Vec<Complex64> = g.to_vec();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (p[i + 1] * s[i] - p[i] * s[i + m]) / (s[i] - s[i + m]);
        }
    }
    p[0]
}
