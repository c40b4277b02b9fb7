//! TOML run configuration. Lengths share one unit (R1, R2, radii); k is in inverse units.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use twosphere_core::acoustic::{AcousticConfig, MediumSample, Scatterer, SphereScatterer};
use twosphere_core::em::Tangent;
use twosphere_core::geometry::GridScheme;
use twosphere_core::phaseless::{EmConfig, GridSpec, Mode};
use twosphere_core::verify::{AcousticSuite, SuiteConfig, DISTINCTNESS_FLOOR};
use twosphere_core::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub k: f64,
    pub r1: f64,
    pub r2: f64,
    #[serde(default)]
    pub seed: u64,
    /// Index of y₀ in the inner grid.
    #[serde(default)]
    pub y0: usize,
    pub scatterer: ScattererSpec,
    /// Second scatterer for the distinctness check; derived from `scatterer` when absent.
    #[serde(default)]
    pub alternative: Option<ScattererSpec>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub em: EmSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory of the config file, for relative medium paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    SoundSoft,
    Impedance,
    /// Perfect conductor, EM mode only.
    Pec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Ball,
    Bump,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScattererSpec {
    Sphere {
        radius: f64,
        #[serde(default = "default_bc")]
        bc: Bc,
        /// [Re η, Im η] for `impedance`.
        #[serde(default)]
        eta: Option<[f64; 2]>,
    },
    Medium {
        profile: Profile,
        #[serde(default)]
        radius: Option<f64>,
        /// [Re, Im] of n − 1 (peak value for `bump`).
        #[serde(default)]
        contrast: Option<[f64; 2]>,
        #[serde(default)]
        n_side: Option<usize>,
        /// JSON MediumSample for `file`.
        #[serde(default)]
        path: Option<PathBuf>,
    },
}

fn default_bc() -> Bc {
    Bc::SoundSoft
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_theta: usize,
    pub n_phi: usize,
    #[serde(default = "default_scheme")]
    pub scheme: GridScheme,
    /// Azimuth offset in units of one φ step.
    #[serde(default)]
    pub phi_shift: f64,
}

fn default_scheme() -> GridScheme {
    GridScheme::GaussLegendre
}

impl GridSection {
    fn spec(&self, radius: f64) -> GridSpec {
        GridSpec { radius, n_theta: self.n_theta, n_phi: self.n_phi, scheme: self.scheme, phi_shift: self.phi_shift }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default = "default_grid")]
    pub inner: GridSection,
    #[serde(default = "default_grid")]
    pub outer: GridSection,
}

fn default_grid() -> GridSection {
    GridSection { n_theta: 6, n_phi: 12, scheme: GridScheme::GaussLegendre, phi_shift: 0.0 }
}

impl Default for Grids {
    fn default() -> Self {
        Grids { inner: default_grid(), outer: default_grid() }
    }
}

/// EM settings. `grid` is used for the EM checks of acoustic-mode suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmSection {
    #[serde(default = "default_pols")]
    pub pols: Vec<Tangent>,
    /// PEC radius for the EM checks in acoustic mode; defaults to half of R1.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub alternative_radius: Option<f64>,
    #[serde(default = "default_em_grid")]
    pub grid: GridSection,
}

fn default_pols() -> Vec<Tangent> {
    vec![Tangent::Phi, Tangent::Theta]
}

fn default_em_grid() -> GridSection {
    GridSection { n_theta: 4, n_phi: 7, scheme: GridScheme::GaussLegendre, phi_shift: 0.0 }
}

impl Default for EmSection {
    fn default() -> Self {
        EmSection { pols: default_pols(), radius: None, alternative_radius: None, grid: default_em_grid() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub pair_count: usize,
    pub probe_count: usize,
    pub discriminator_n_theta: usize,
    pub distinctness_floor: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { pair_count: 10, probe_count: 8, discriminator_n_theta: 16, distinctness_floor: DISTINCTNESS_FLOOR }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub stem: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), stem: "dataset".into() }
    }
}

/// Tolerance keys that are not suite checks.
pub const EXTRA_TOL_KEYS: [&str; 2] = ["tol_cert", "distinctness_floor"];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.acoustic()?;
        for (key, v) in &self.tolerances {
            check_tol_key(key)?;
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::Config(format!("tolerance {key} must be a finite non-negative number")));
            }
        }
        let n1 = self.grids.inner.n_theta * self.grids.inner.n_phi;
        if self.y0 >= n1 {
            return Err(Error::Config(format!("y0 = {} outside the inner grid ({n1} points)", self.y0)));
        }
        match (self.mode, &self.scatterer) {
            (Mode::Em, ScattererSpec::Sphere { bc: Bc::Pec, .. }) => self.em_config()?.validate(),
            (Mode::Em, _) => Err(Error::Config("em mode needs a sphere scatterer with bc = \"pec\"".into())),
            (Mode::Acoustic, ScattererSpec::Sphere { bc: Bc::Pec, .. }) => {
                Err(Error::Config("bc = \"pec\" is only valid in em mode".into()))
            }
            (Mode::Acoustic, _) => Ok(()),
        }
    }

    pub fn acoustic(&self) -> Result<AcousticConfig> {
        AcousticConfig::new(self.k, self.r1, self.r2)
    }

    pub fn grid_specs(&self) -> (GridSpec, GridSpec) {
        (self.grids.inner.spec(self.r1), self.grids.outer.spec(self.r2))
    }

    pub fn scatterer(&self) -> Result<Scatterer> {
        build_scatterer(&self.scatterer, &self.base_dir)
    }

    pub fn alternative(&self) -> Result<Scatterer> {
        match &self.alternative {
            Some(s) => build_scatterer(s, &self.base_dir),
            None => Ok(match self.scatterer()? {
                Scatterer::Sphere(s) => {
                    let r = if s.radius * 1.1 < self.r1 { s.radius * 1.1 } else { s.radius * 0.9 };
                    Scatterer::Sphere(SphereScatterer { radius: r, ..s })
                }
                Scatterer::Medium(m) => Scatterer::Medium(MediumSample {
                    n_values: vec![Complex64::new(1.0, 0.0); m.n_values.len()],
                    ..m
                }),
            }),
        }
    }

    pub fn em_config(&self) -> Result<EmConfig> {
        let radius = match (&self.mode, &self.scatterer) {
            (Mode::Em, ScattererSpec::Sphere { radius, .. }) => *radius,
            _ => self.em.radius.unwrap_or(0.5 * self.r1),
        };
        let c = EmConfig { k: self.k, r1: self.r1, r2: self.r2, radius };
        c.validate()?;
        Ok(c)
    }

    pub fn tol(&self, key: &str) -> Option<f64> {
        self.tolerances.get(key).copied()
    }

    pub fn suite(&self) -> Result<SuiteConfig> {
        let em = self.em_config()?;
        let alt_r = self.em.alternative_radius.unwrap_or(if em.radius * 1.1 < self.r1 { em.radius * 1.1 } else { em.radius * 0.9 });
        let (g1, g2) = self.grid_specs();
        let (acoustic, eg1, eg2) = match self.mode {
            Mode::Acoustic => (
                Some(AcousticSuite {
                    cfg: self.acoustic()?,
                    scatterer: self.scatterer()?,
                    alternative: self.alternative()?,
                    grid1: g1,
                    grid2: g2,
                    y0: self.y0,
                }),
                self.em.grid.spec(self.r1),
                self.em.grid.spec(self.r2),
            ),
            Mode::Em => (None, g1, g2),
        };
        let mut tolerances = self.tolerances.clone();
        let floor = tolerances.remove("distinctness_floor").unwrap_or(self.verify.distinctness_floor);
        tolerances.remove("tol_cert");
        Ok(SuiteConfig {
            acoustic,
            em,
            em_alternative_radius: alt_r,
            pols: self.em.pols.clone(),
            em_grid1: eg1,
            em_grid2: eg2,
            seed: self.seed,
            pair_count: self.verify.pair_count,
            probe_count: self.verify.probe_count,
            discriminator_n_theta: self.verify.discriminator_n_theta,
            distinctness_floor: floor,
            tolerances,
        })
    }
}

pub fn check_tol_key(key: &str) -> Result<()> {
    if SuiteConfig::tolerance_keys().iter().any(|k| k == key) || EXTRA_TOL_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown tolerance key {key:?}; known keys: {}, {}",
            SuiteConfig::tolerance_keys().join(", "),
            EXTRA_TOL_KEYS.join(", ")
        )))
    }
}

fn complex(v: Option<[f64; 2]>, what: &str) -> Result<Complex64> {
    v.map(|[re, im]| Complex64::new(re, im)).ok_or_else(|| Error::Config(format!("{what} is required")))
}

fn build_scatterer(spec: &ScattererSpec, base: &Path) -> Result<Scatterer> {
    match spec {
        ScattererSpec::Sphere { radius, bc, eta } => Ok(Scatterer::Sphere(match bc {
            Bc::SoundSoft => SphereScatterer::sound_soft(*radius),
            Bc::Impedance => SphereScatterer::impedance(*radius, complex(*eta, "eta")?),
            Bc::Pec => SphereScatterer::sound_soft(*radius),
        })),
        ScattererSpec::Medium { profile, radius, contrast, n_side, path } => {
            let need_r = || radius.ok_or_else(|| Error::Config("medium radius is required".into()));
            let n = n_side.unwrap_or(12);
            Ok(Scatterer::Medium(match profile {
                Profile::Ball => MediumSample::ball(need_r()?, complex(*contrast, "contrast")?, n),
                Profile::Bump => MediumSample::bump(need_r()?, complex(*contrast, "contrast")?, n),
                Profile::File => {
                    let p = path.as_ref().ok_or_else(|| Error::Config("medium file path is required".into()))?;
                    let p = if p.is_absolute() { p.clone() } else { base.join(p) };
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                    MediumSample::from_json_str(&text)?
                }
            }))
        }
    }
}
