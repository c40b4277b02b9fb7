//! The verification suite on every scatterer family, at the default tolerances.

use num_complex::Complex64;
use twosphere_core::acoustic::{AcousticConfig, MediumSample, Scatterer, SphereScatterer};
use twosphere_core::em::Tangent;
use twosphere_core::geometry::GridScheme;
use twosphere_core::phaseless::{EmConfig, GridSpec};
use twosphere_core::verify::{format_table, run_suite, AcousticSuite, SuiteConfig, DISTINCTNESS_FLOOR};

fn grid(radius: f64, n_theta: usize, n_phi: usize) -> GridSpec {
    GridSpec { radius, n_theta, n_phi, scheme: GridScheme::GaussLegendre, phi_shift: 0.0 }
}

fn suite(acoustic: Option<(Scatterer, Scatterer)>) -> SuiteConfig {
    SuiteConfig {
        acoustic: acoustic.map(|(scatterer, alternative)| AcousticSuite {
            cfg: AcousticConfig::new(1.3, 1.0, 2.0).unwrap(),
            scatterer,
            alternative,
            grid1: grid(1.0, 6, 12),
            grid2: grid(2.0, 6, 12),
            y0: 5,
        }),
        em: EmConfig { k: 1.3, r1: 1.0, r2: 2.0, radius: 0.5 },
        em_alternative_radius: 0.55,
        pols: vec![Tangent::Phi, Tangent::Theta],
        em_grid1: grid(1.0, 4, 7),
        em_grid2: grid(2.0, 4, 7),
        seed: 3,
        pair_count: 10,
        probe_count: 8,
        discriminator_n_theta: 16,
        distinctness_floor: DISTINCTNESS_FLOOR,
        tolerances: Default::default(),
    }
}

fn assert_all_pass(cfg: &SuiteConfig, expected: usize) {
    let reports = run_suite(cfg).unwrap();
    let table = format_table(&reports);
    assert_eq!(reports.len(), expected, "{table}");
    assert!(reports.iter().all(|r| r.pass), "{table}");
}

#[test]
fn sound_soft_sphere() {
    let s = |r| Scatterer::Sphere(SphereScatterer::sound_soft(r));
    assert_all_pass(&suite(Some((s(0.5), s(0.55)))), 21);
}

#[test]
fn impedance_against_soft() {
    let imp = Scatterer::Sphere(SphereScatterer::impedance(0.5, Complex64::new(1.0, 0.5)));
    let soft = Scatterer::Sphere(SphereScatterer::sound_soft(0.5));
    assert_all_pass(&suite(Some((imp, soft))), 21);
}

#[test]
fn medium_ball() {
    let ball = |q| Scatterer::Medium(MediumSample::ball(0.5, Complex64::new(q, 0.0), 12));
    let mut cfg = suite(Some((ball(0.1), ball(0.0))));
    cfg.tolerances.insert("acoustic_reciprocity".into(), 1e-6);
    assert_all_pass(&cfg, 21);
}

#[test]
fn em_only() {
    assert_all_pass(&suite(None), 9);
}

#[test]
fn seed_changes_probes_not_verdicts() {
    let s = |r| Scatterer::Sphere(SphereScatterer::sound_soft(r));
    let mut a = suite(Some((s(0.5), s(0.55))));
    let ra = run_suite(&a).unwrap();
    a.seed = 11;
    let rb = run_suite(&a).unwrap();
    let find = |rs: &[twosphere_core::verify::CheckReport]| {
        rs.iter().find(|r| r.check_name == "acoustic_reciprocity").unwrap().config.clone()
    };
    assert_ne!(find(&ra), find(&rb));
    assert!(rb.iter().all(|r| r.pass));
    assert_eq!(ra.len(), rb.len());
}
