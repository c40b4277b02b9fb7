//! Synthesis through the JSONL writer and reader.

use std::io::Cursor;
use twosphere_core::acoustic::{AcousticConfig, ForwardModel, Scatterer, SphereScatterer};
use twosphere_core::em::Tangent;
use twosphere_core::geometry::{sphere_grid, GridScheme};
use twosphere_core::phaseless::{
    acoustic_census, em_census, phase_differences, read_jsonl, synthesize_acoustic, synthesize_em, write_csv,
    write_jsonl, EmConfig,
};

fn model() -> ForwardModel {
    let cfg = AcousticConfig::new(1.3, 1.0, 2.0).unwrap();
    ForwardModel::new(&cfg, &Scatterer::Sphere(SphereScatterer::sound_soft(0.5))).unwrap()
}

#[test]
fn acoustic_jsonl_reads_back() {
    let g1 = sphere_grid(1.0, 4, 8, GridScheme::GaussLegendre).unwrap();
    let g2 = sphere_grid(2.0, 3, 6, GridScheme::UniformOffset).unwrap();
    let ds = synthesize_acoustic(&model(), &g1, &g2, 3).unwrap();
    assert_eq!(ds.header.census, acoustic_census(32, 18));
    assert_eq!(ds.records.len(), ds.header.census.total());

    let mut buf = Vec::new();
    write_jsonl(&ds, &mut buf).unwrap();
    let back = read_jsonl(Cursor::new(&buf)).unwrap();
    assert_eq!(back.header, ds.header);
    assert_eq!(back.records, ds.records);
    assert_eq!(back.max_difference(&ds).unwrap(), 0.0);
    assert_eq!(phase_differences(&back).unwrap().len(), phase_differences(&ds).unwrap().len());

    let text = String::from_utf8(buf).unwrap();
    let cut: String = text.lines().take(ds.records.len() / 2).map(|l| format!("{l}\n")).collect();
    assert!(read_jsonl(Cursor::new(cut.as_bytes())).is_err());
    assert!(read_jsonl(Cursor::new(&b"{\"header\": 3}\n"[..])).is_err());
    assert!(read_jsonl(Cursor::new(&b""[..])).is_err());

    let mut csv = Vec::new();
    write_csv(&ds, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), ds.records.len() + 1);
}

#[test]
fn em_census_and_output_are_stable() {
    let cfg = EmConfig { k: 1.3, r1: 1.0, r2: 2.0, radius: 0.5 };
    let g1 = sphere_grid(1.0, 3, 5, GridScheme::GaussLegendre).unwrap();
    let g2 = sphere_grid(2.0, 3, 5, GridScheme::GaussLegendre).unwrap();
    let pols = [Tangent::Theta, Tangent::Phi];
    let a = synthesize_em(&cfg, &g1, &g2, &pols).unwrap();
    let b = synthesize_em(&cfg, &g1, &g2, &pols[..]).unwrap();
    assert_eq!(a.header.census, em_census(15, 15, 2));
    let (mut wa, mut wb) = (Vec::new(), Vec::new());
    write_jsonl(&a, &mut wa).unwrap();
    write_jsonl(&b, &mut wb).unwrap();
    assert_eq!(wa, wb);
    let back = read_jsonl(Cursor::new(&wa)).unwrap();
    assert_eq!(back.records, a.records);
}
