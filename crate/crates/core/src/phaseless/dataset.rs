use super::TOL_AMP_REL;
use crate::acoustic::ForwardModel;
use crate::em::{self, DipoleSource, Tangent};
use crate::error::{Error, Result};
use crate::geometry::{sphere_grid_shifted, tangent_frame, GridScheme};
use crate::{SphereGrid, SpherePoint, Vec3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Grid point reference: `shell` is 1 or 2, `index` is the theta-major grid index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointRef {
    pub shell: u8,
    pub index: u32,
}

impl PointRef {
    pub fn r1(i: usize) -> Self {
        PointRef { shell: 1, index: i as u32 }
    }

    pub fn r2(i: usize) -> Self {
        PointRef { shell: 2, index: i as u32 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Acoustic,
    Em,
}

/// Tangential labels (m, n, l): e_m(x) is measured, e_n(y₁) and e_l(y₂) polarize the sources.
/// A label is `None` when its source is inactive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pol {
    pub m: Tangent,
    pub n: Option<Tangent>,
    pub l: Option<Tangent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub x: PointRef,
    /// (y₁, y₂); `None` marks τ = 0. Acoustic superposed records carry y₀ in the second slot.
    pub sources: [Option<PointRef>; 2],
    pub pol: Option<Pol>,
    pub modulus: f64,
}

impl Record {
    pub fn tau(&self) -> [bool; 2] {
        [self.sources[0].is_some(), self.sources[1].is_some()]
    }

    pub fn is_superposed(&self) -> bool {
        self.sources[0].is_some() && self.sources[1].is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub scheme: GridScheme,
    pub phi_shift: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<SphereGrid> {
        sphere_grid_shifted(self.radius, self.n_theta, self.n_phi, self.scheme, self.phi_shift)
    }

    pub fn of(g: &SphereGrid) -> Self {
        GridSpec { radius: g.radius, n_theta: g.n_theta, n_phi: g.n_phi, scheme: g.scheme, phi_shift: g.phi_shift }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub single: usize,
    pub superposed: usize,
    /// Index pairs removed because x coincides with an active source.
    pub dropped: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.single + self.superposed
    }
}

/// Closed-form record counts for the acoustic index sets with n1, n2 grid points.
pub fn acoustic_census(n1: usize, n2: usize) -> Census {
    let single = n1 * (n1 - 1) + n2 + n2 * (n2 - 1);
    let superposed = (n1 - 1) * (n1 - 1) + n2 * (n2 - 1);
    let dropped = n1 + n2 + (n1 * n1 - (n1 - 1) * (n1 - 1)) + n2;
    Census { single, superposed, dropped }
}

/// Closed-form record counts for the EM index sets with `p` tangential labels per slot.
pub fn em_census(n1: usize, n2: usize, p: usize) -> Census {
    let off = n1 * (n1 - 1);
    let single = p * 2 * off + p * p * n1 * n2;
    let superposed = p * off * (n1 - 1) + p * p * p * off * n2;
    let dropped = p * 2 * n1 + p * (n1 * n1 * n1 - off * (n1 - 1)) + p * p * p * n1 * n2;
    Census { single, superposed, dropped }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub mode: Mode,
    pub k: f64,
    pub r1: f64,
    pub r2: f64,
    pub scatterer: serde_json::Value,
    pub grid1: GridSpec,
    pub grid2: GridSpec,
    /// Reference source of the acoustic data sets.
    pub y0: Option<PointRef>,
    /// Superposed pairs on the outer sphere use y₀ ∈ ∂B_{R1} as partner.
    pub y0_partner_on_r2: bool,
    pub census: Census,
    pub degenerate_channels: Vec<String>,
    pub record_count: usize,
}

#[derive(Clone, Debug)]
pub struct PhaselessDataset {
    pub header: DatasetHeader,
    pub grid1: SphereGrid,
    pub grid2: SphereGrid,
    pub records: Vec<Record>,
}

impl PhaselessDataset {
    pub fn point(&self, p: PointRef) -> &SpherePoint {
        match p.shell {
            1 => &self.grid1.points[p.index as usize],
            _ => &self.grid2.points[p.index as usize],
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.records.iter().map(|r| r.modulus).fold(0.0, f64::max)
    }

    pub fn tol_amp(&self) -> f64 {
        TOL_AMP_REL * self.max_modulus()
    }

    /// Max |a − b| over records present in both sets with the same indices.
    pub fn max_difference(&self, other: &PhaselessDataset) -> Result<f64> {
        if self.records.len() != other.records.len() {
            return Err(Error::Inconsistent("datasets have different record sets".into()));
        }
        let mut d: f64 = 0.0;
        for (a, b) in self.records.iter().zip(&other.records) {
            if a.x != b.x || a.sources != b.sources || a.pol != b.pol {
                return Err(Error::Inconsistent("datasets are indexed differently".into()));
            }
            d = d.max((a.modulus - b.modulus).abs());
        }
        Ok(d)
    }
}

/// Total fields on the two grids: `w11[y][x] = w(x, y)` with x, y on ∂B_{R1};
/// `w22[y][x]` on ∂B_{R2}; `w2y0[x] = w(x, y₀)` for x on ∂B_{R2}. Collisions hold NaN.
#[derive(Clone, Debug)]
pub struct AcousticTables {
    pub y0: usize,
    pub w11: Vec<Vec<Complex64>>,
    pub w22: Vec<Vec<Complex64>>,
    pub w2y0: Vec<Complex64>,
}

const NAN: Complex64 = Complex64::new(f64::NAN, f64::NAN);

fn column(model: &ForwardModel, y: &Vec3, grid: &SphereGrid, skip: Option<usize>) -> Result<Vec<Complex64>> {
    let f = model.point_source(y)?;
    grid.points
        .iter()
        .enumerate()
        .map(|(i, p)| if Some(i) == skip { Ok(NAN) } else { f.total(&p.cart) })
        .collect()
}

fn check_grids(model: &ForwardModel, g1: &SphereGrid, g2: &SphereGrid) -> Result<()> {
    let cfg = &model.cfg;
    if (g1.radius - cfg.r1).abs() > 1e-12 * cfg.r1 || (g2.radius - cfg.r2).abs() > 1e-12 * cfg.r2 {
        return Err(Error::Domain(format!(
            "grid radii ({}, {}) do not match R1 = {}, R2 = {}",
            g1.radius, g2.radius, cfg.r1, cfg.r2
        )));
    }
    if model.scatterer.extent() >= cfg.r1 {
        return Err(Error::Domain("scatterer is not strictly inside B_R1".into()));
    }
    Ok(())
}

pub fn acoustic_tables(model: &ForwardModel, g1: &SphereGrid, g2: &SphereGrid, y0: usize) -> Result<AcousticTables> {
    check_grids(model, g1, g2)?;
    if y0 >= g1.len() {
        return Err(Error::Domain(format!("y0 index {y0} outside the inner grid ({} points)", g1.len())));
    }
    let w11 = (0..g1.len())
        .into_par_iter()
        .map(|j| column(model, &g1.points[j].cart, g1, Some(j)))
        .collect::<Result<Vec<_>>>()?;
    let w22 = (0..g2.len())
        .into_par_iter()
        .map(|j| column(model, &g2.points[j].cart, g2, Some(j)))
        .collect::<Result<Vec<_>>>()?;
    let w2y0 = column(model, &g1.points[y0].cart, g2, None)?;
    Ok(AcousticTables { y0, w11, w22, w2y0 })
}

/// Moduli over the index sets |w(x,y)| on (∂B_{R1}×∂B_{R1}) ∪ (∂B_{R2}×({y₀}∪∂B_{R2})) and
/// |w(x;y,y₀)| on (∂B_{R1}×∂B_{R1}) ∪ (∂B_{R2}×∂B_{R2}), x ≠ y, y₀.
pub fn acoustic_records(t: &AcousticTables) -> Vec<Record> {
    let (n1, n2, y0) = (t.w11.len(), t.w22.len(), t.y0);
    let y0r = Some(PointRef::r1(y0));
    let rec = |x: PointRef, a: PointRef, b: Option<PointRef>, w: Complex64| Record {
        x,
        sources: [Some(a), b],
        pol: None,
        modulus: w.norm(),
    };
    let mut out = Vec::with_capacity(acoustic_census(n1, n2).total());
    for x in 0..n1 {
        for y in (0..n1).filter(|&y| y != x) {
            out.push(rec(PointRef::r1(x), PointRef::r1(y), None, t.w11[y][x]));
        }
    }
    for x in 0..n2 {
        out.push(rec(PointRef::r2(x), PointRef::r1(y0), None, t.w2y0[x]));
        for y in (0..n2).filter(|&y| y != x) {
            out.push(rec(PointRef::r2(x), PointRef::r2(y), None, t.w22[y][x]));
        }
    }
    for x in (0..n1).filter(|&x| x != y0) {
        for y in (0..n1).filter(|&y| y != x) {
            out.push(rec(PointRef::r1(x), PointRef::r1(y), y0r, t.w11[y][x] + t.w11[y0][x]));
        }
    }
    for x in 0..n2 {
        for y in (0..n2).filter(|&y| y != x) {
            out.push(rec(PointRef::r2(x), PointRef::r2(y), y0r, t.w22[y][x] + t.w2y0[x]));
        }
    }
    out
}

pub fn synthesize_acoustic(model: &ForwardModel, g1: &SphereGrid, g2: &SphereGrid, y0: usize) -> Result<PhaselessDataset> {
    let tables = acoustic_tables(model, g1, g2, y0)?;
    Ok(acoustic_dataset(model, g1, g2, &tables))
}

pub fn acoustic_dataset(model: &ForwardModel, g1: &SphereGrid, g2: &SphereGrid, t: &AcousticTables) -> PhaselessDataset {
    let records = acoustic_records(t);
    let header = DatasetHeader {
        mode: Mode::Acoustic,
        k: model.cfg.k,
        r1: model.cfg.r1,
        r2: model.cfg.r2,
        scatterer: model.scatterer.summary(),
        grid1: GridSpec::of(g1),
        grid2: GridSpec::of(g2),
        y0: Some(PointRef::r1(t.y0)),
        y0_partner_on_r2: true,
        census: acoustic_census(g1.len(), g2.len()),
        degenerate_channels: Vec::new(),
        record_count: records.len(),
    };
    PhaselessDataset { header, grid1: g1.clone(), grid2: g2.clone(), records }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub k: f64,
    pub r1: f64,
    pub r2: f64,
    /// Radius of the perfectly conducting sphere.
    pub radius: f64,
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        crate::acoustic::AcousticConfig::new(self.k, self.r1, self.r2)?;
        if !(self.radius > 0.0 && self.radius < self.r1) {
            return Err(Error::Domain(format!(
                "obstacle radius {} must lie in (0, R1 = {})",
                self.radius, self.r1
            )));
        }
        Ok(())
    }
}

/// e_m(x)·E(x,y)e_p(y) for every label pair: `s[(m, p)][y][x]`, with x on ∂B_{R1}
/// and y on the grid named by the table.
#[derive(Clone, Debug)]
pub struct EmTables {
    pub s11: BTreeMap<(Tangent, Tangent), Vec<Vec<Complex64>>>,
    pub s12: BTreeMap<(Tangent, Tangent), Vec<Vec<Complex64>>>,
}

fn reject_poles(g: &SphereGrid) -> Result<()> {
    if let Some(p) = g.points.iter().find(|p| p.is_pole()) {
        return Err(Error::Pole { theta: p.theta });
    }
    Ok(())
}

const LABELS: [Tangent; 2] = [Tangent::Phi, Tangent::Theta];

fn em_columns(cfg: &EmConfig, xs: &SphereGrid, ys: &SphereGrid, same: bool) -> Result<Vec<[[Vec<Complex64>; 2]; 2]>> {
    (0..ys.len())
        .into_par_iter()
        .map(|j| {
            let yp = &ys.points[j];
            let fy = tangent_frame(yp)?;
            let f = em::solve_pec_sphere_dipole(cfg.k, cfg.radius, &DipoleSource { y: yp.cart, p: fy.e_phi, tau: true })?;
            let mut col: [[Vec<Complex64>; 2]; 2] = Default::default();
            for (i, xp) in xs.points.iter().enumerate() {
                let fx = tangent_frame(xp)?;
                let e = if same && i == j {
                    None
                } else {
                    let mut m = f.scattered_matrix(&xp.cart)?;
                    let inc = em::dipole_matrix(cfg.k, &xp.cart, &yp.cart)?.value;
                    for r in 0..3 {
                        for c in 0..3 {
                            m[r][c] += inc[r][c];
                        }
                    }
                    Some(m)
                };
                for (a, m) in LABELS.iter().enumerate() {
                    for (b, p) in LABELS.iter().enumerate() {
                        let v = match &e {
                            None => NAN,
                            Some(e) => em::cdot(&m.vector(&fx), &em::mat_vec(e, &p.vector(&fy))),
                        };
                        col[a][b].push(v);
                    }
                }
            }
            Ok(col)
        })
        .collect()
}

fn regroup(cols: Vec<[[Vec<Complex64>; 2]; 2]>) -> BTreeMap<(Tangent, Tangent), Vec<Vec<Complex64>>> {
    let mut out = BTreeMap::new();
    for (a, m) in LABELS.iter().enumerate() {
        for (b, p) in LABELS.iter().enumerate() {
            out.insert((*m, *p), cols.iter().map(|c| c[a][b].clone()).collect());
        }
    }
    out
}

pub fn em_tables(cfg: &EmConfig, g1: &SphereGrid, g2: &SphereGrid) -> Result<EmTables> {
    cfg.validate()?;
    reject_poles(g1)?;
    reject_poles(g2)?;
    Ok(EmTables { s11: regroup(em_columns(cfg, g1, g1, true)?), s12: regroup(em_columns(cfg, g1, g2, false)?) })
}

/// Records for the two EM index sets. The first uses e_φ(y₁), e_θ(y₂) with y₁, y₂ on ∂B_{R1};
/// the second uses y₂ on ∂B_{R2} and all label triples. Inactive sources are dropped from
/// the record instead of being enumerated.
pub fn em_records(t: &EmTables, pols: &[Tangent]) -> Vec<Record> {
    let n1 = t.s11[&(Tangent::Phi, Tangent::Phi)].len();
    let n2 = t.s12[&(Tangent::Phi, Tangent::Phi)].len();
    let (phi, theta) = (Tangent::Phi, Tangent::Theta);
    let mut out = Vec::new();
    for &m in pols {
        let a = &t.s11[&(m, phi)];
        let b = &t.s11[&(m, theta)];
        for x in 0..n1 {
            for y in (0..n1).filter(|&y| y != x) {
                let pol = Some(Pol { m, n: Some(phi), l: None });
                out.push(Record { x: PointRef::r1(x), sources: [Some(PointRef::r1(y)), None], pol, modulus: a[y][x].norm() });
                let pol = Some(Pol { m, n: None, l: Some(theta) });
                out.push(Record { x: PointRef::r1(x), sources: [None, Some(PointRef::r1(y))], pol, modulus: b[y][x].norm() });
            }
        }
        for x in 0..n1 {
            for y1 in (0..n1).filter(|&y| y != x) {
                for y2 in (0..n1).filter(|&y| y != x) {
                    out.push(Record {
                        x: PointRef::r1(x),
                        sources: [Some(PointRef::r1(y1)), Some(PointRef::r1(y2))],
                        pol: Some(Pol { m, n: Some(phi), l: Some(theta) }),
                        modulus: (a[y1][x] + b[y2][x]).norm(),
                    });
                }
            }
        }
    }
    for &m in pols {
        for &l in pols {
            let c = &t.s12[&(m, l)];
            for x in 0..n1 {
                for y2 in 0..n2 {
                    out.push(Record {
                        x: PointRef::r1(x),
                        sources: [None, Some(PointRef::r2(y2))],
                        pol: Some(Pol { m, n: None, l: Some(l) }),
                        modulus: c[y2][x].norm(),
                    });
                }
            }
            for &n in pols {
                let a = &t.s11[&(m, n)];
                for x in 0..n1 {
                    for y1 in (0..n1).filter(|&y| y != x) {
                        for y2 in 0..n2 {
                            out.push(Record {
                                x: PointRef::r1(x),
                                sources: [Some(PointRef::r1(y1)), Some(PointRef::r2(y2))],
                                pol: Some(Pol { m, n: Some(n), l: Some(l) }),
                                modulus: (a[y1][x] + c[y2][x]).norm(),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

fn channel_label(r: &Record) -> String {
    let set = if r.sources.iter().flatten().any(|s| s.shell == 2) { "outer" } else { "inner" };
    let tau = r.tau();
    let lab = |t: Option<Tangent>| t.map(|t| t.label()).unwrap_or("-");
    let p = r.pol.expect("EM records carry labels");
    format!(
        "{set} tau=({},{}) m={} n={} l={}",
        tau[0] as u8,
        tau[1] as u8,
        p.m.label(),
        lab(p.n),
        lab(p.l)
    )
}

/// Channels whose moduli all fall below the amplitude floor.
pub fn degenerate_channels(records: &[Record]) -> Vec<String> {
    let max = records.iter().map(|r| r.modulus).fold(0.0, f64::max);
    let mut peak: BTreeMap<String, f64> = BTreeMap::new();
    for r in records {
        let e = peak.entry(channel_label(r)).or_insert(0.0);
        *e = e.max(r.modulus);
    }
    peak.into_iter().filter(|(_, v)| *v <= TOL_AMP_REL * max).map(|(k, _)| k).collect()
}

pub fn synthesize_em(cfg: &EmConfig, g1: &SphereGrid, g2: &SphereGrid, pols: &[Tangent]) -> Result<PhaselessDataset> {
    if pols.is_empty() {
        return Err(Error::Domain("polarization set is empty".into()));
    }
    let mut pols = pols.to_vec();
    pols.sort();
    pols.dedup();
    if (g1.radius - cfg.r1).abs() > 1e-12 * cfg.r1 || (g2.radius - cfg.r2).abs() > 1e-12 * cfg.r2 {
        return Err(Error::Domain("grid radii do not match R1, R2".into()));
    }
    let t = em_tables(cfg, g1, g2)?;
    Ok(em_dataset(cfg, g1, g2, &pols, em_records(&t, &pols)))
}

/// Wraps EM records built by [`em_records`] with `pols` into a data set.
pub fn em_dataset(cfg: &EmConfig, g1: &SphereGrid, g2: &SphereGrid, pols: &[Tangent], records: Vec<Record>) -> PhaselessDataset {
    let header = DatasetHeader {
        mode: Mode::Em,
        k: cfg.k,
        r1: cfg.r1,
        r2: cfg.r2,
        scatterer: serde_json::json!({ "type": "pec_sphere", "radius": cfg.radius }),
        grid1: GridSpec::of(g1),
        grid2: GridSpec::of(g2),
        y0: None,
        y0_partner_on_r2: false,
        census: em_census(g1.len(), g2.len(), pols.len()),
        degenerate_channels: degenerate_channels(&records),
        record_count: records.len(),
    };
    PhaselessDataset { header, grid1: g1.clone(), grid2: g2.clone(), records }
}
