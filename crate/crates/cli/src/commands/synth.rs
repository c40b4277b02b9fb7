use super::{create, io_err, write_json, Context};
use crate::config::RunConfig;
use crate::CliResult;
use serde_json::{json, Value};
use std::io::Write;
use twosphere_core::acoustic::ForwardModel;
use twosphere_core::eigencheck::Certificate;
use twosphere_core::phaseless::{synthesize_acoustic, synthesize_em, write_csv, write_jsonl, Mode, PhaselessDataset};

pub fn synthesize(c: &RunConfig) -> CliResult<PhaselessDataset> {
    let (s1, s2) = c.grid_specs();
    let (g1, g2) = (s1.build()?, s2.build()?);
    Ok(match c.mode {
        Mode::Acoustic => {
            let model = ForwardModel::new(&c.acoustic()?, &c.scatterer()?)?;
            synthesize_acoustic(&model, &g1, &g2, c.y0)?
        }
        Mode::Em => synthesize_em(&c.em_config()?, &g1, &g2, &c.em.pols)?,
    })
}

pub fn summary(ds: &PhaselessDataset, cert: &Certificate, seed: u64) -> Value {
    let (lo, hi) = ds
        .records
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| (lo.min(r.modulus), hi.max(r.modulus)));
    let superposed = ds.records.iter().filter(|r| r.is_superposed()).count();
    json!({
        "mode": ds.header.mode,
        "k": ds.header.k,
        "r1": ds.header.r1,
        "r2": ds.header.r2,
        "seed": seed,
        "scatterer": ds.header.scatterer,
        "grid_points": [ds.grid1.len(), ds.grid2.len()],
        "census": ds.header.census,
        "record_count": ds.records.len(),
        "single": ds.records.len() - superposed,
        "superposed": superposed,
        "min_modulus": lo,
        "max_modulus": hi,
        "degenerate_channels": ds.header.degenerate_channels,
        "certificate": cert,
    })
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let c = ctx.config()?;
    let cert = ctx.certify(c)?;
    let ds = synthesize(c)?;
    let stem = &c.output.stem;

    let jsonl = ctx.path(&format!("{stem}.jsonl"))?;
    let mut w = create(&jsonl)?;
    write_jsonl(&ds, &mut w)?;
    w.flush().map_err(io_err)?;
    let csv_path = ctx.path(&format!("{stem}.csv"))?;
    write_csv(&ds, create(&csv_path)?)?;
    let sum = summary(&ds, &cert, c.seed);
    write_json(&ctx.path(&format!("{stem}_summary.json"))?, &sum)?;

    println!(
        "{} dataset: {} records ({} single, {} superposed), grids {} x {} points",
        match c.mode {
            Mode::Acoustic => "acoustic",
            Mode::Em => "em",
        },
        sum["record_count"],
        sum["single"],
        sum["superposed"],
        ds.grid1.len(),
        ds.grid2.len()
    );
    println!("moduli in [{:.6e}, {:.6e}]", sum["min_modulus"].as_f64().unwrap_or(f64::NAN), sum["max_modulus"].as_f64().unwrap_or(f64::NAN));
    println!("eigen margin {:.3e} (n_max {})", cert.margin, cert.n_max);
    if !ds.header.degenerate_channels.is_empty() {
        println!("degenerate channels: {}", ds.header.degenerate_channels.join(", "));
    }
    println!("wrote {}", jsonl.display());
    Ok(())
}
