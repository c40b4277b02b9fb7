use super::synth::synthesize;
use super::{write_json, Context};
use crate::config::RunConfig;
use crate::{CliResult, Fail};
use serde_json::json;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use twosphere_core::phaseless::{read_jsonl, GridSpec, PhaselessDataset};
use twosphere_core::verify::{check_datasets_identical, check_nonvanishing, format_table, run_suite, CheckReport};

fn same_grid(a: &GridSpec, b: &GridSpec) -> bool {
    a.n_theta == b.n_theta
        && a.n_phi == b.n_phi
        && a.scheme == b.scheme
        && (a.radius - b.radius).abs() <= 1e-12 * b.radius
        && (a.phi_shift - b.phi_shift).abs() <= 1e-12
}

/// Header fields that disagree with the config.
fn header_mismatches(ds: &PhaselessDataset, c: &RunConfig) -> Vec<&'static str> {
    let h = &ds.header;
    let (g1, g2) = c.grid_specs();
    let mut bad = Vec::new();
    if h.mode != c.mode {
        bad.push("mode");
    }
    for (name, a, b) in [("k", h.k, c.k), ("r1", h.r1, c.r1), ("r2", h.r2, c.r2)] {
        if (a - b).abs() > 1e-12 * b.abs() {
            bad.push(name);
        }
    }
    if !same_grid(&h.grid1, &g1) {
        bad.push("grid1");
    }
    if !same_grid(&h.grid2, &g2) {
        bad.push("grid2");
    }
    bad
}

fn load(path: &Path) -> CliResult<PhaselessDataset> {
    let file = File::open(path).map_err(|e| Fail::usage(format!("cannot open {}: {e}", path.display())))?;
    read_jsonl(BufReader::new(file)).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn dataset_checks(c: &RunConfig, path: &Path, ds: &PhaselessDataset) -> CliResult<Vec<CheckReport>> {
    let cfg = json!({ "dataset": path.display().to_string() });
    let bad = header_mismatches(ds, c);
    let mut reports = vec![CheckReport::new(
        "dataset_header",
        cfg.clone(),
        bad.len() as f64,
        0.0,
        1,
        json!({ "mismatched": bad }),
    )];
    let mut nv = check_nonvanishing(ds)?;
    nv.check_name = format!("dataset_{}", nv.check_name);
    reports.push(nv);
    if bad.is_empty() {
        let tol = c.tol("identical_scatterers").unwrap_or(1e-12);
        let fresh = synthesize(c)?;
        let mut r = check_datasets_identical(ds, &fresh, tol)?;
        r.check_name = "dataset_matches_synthesis".into();
        r.config = cfg;
        reports.push(r);
    }
    Ok(reports)
}

pub fn run(ctx: &Context, dataset: Option<&Path>) -> CliResult<()> {
    let c = ctx.config()?;
    // parse errors come before certification and the suite run
    let ds = dataset.map(|p| load(p).map(|d| (p, d))).transpose()?;
    ctx.certify(c)?;
    let ds_reports = match &ds {
        Some((p, d)) => dataset_checks(c, p, d)?,
        None => Vec::new(),
    };
    let mut reports = run_suite(&c.suite()?)?;
    reports.extend(ds_reports);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.check_name.as_str()).collect();
    write_json(
        &ctx.path("verify_report.json")?,
        &json!({ "seed": c.seed, "all_pass": failed.is_empty(), "reports": reports }),
    )?;
    print!("{}", format_table(&reports));
    if failed.is_empty() {
        println!("all {} checks passed", reports.len());
        Ok(())
    } else {
        Err(Fail::checks(format!("{} of {} checks failed: {}", failed.len(), reports.len(), failed.join(", "))))
    }
}
