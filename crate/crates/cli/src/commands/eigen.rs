use super::Context;
use crate::{CliResult, Fail};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use twosphere_core::eigencheck::{certify_with_tol, find_eigen_k, EigenKind, RootKind, ShellSpec};
use twosphere_core::phaseless::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Dirichlet,
    Maxwell,
}

#[derive(Args, Debug)]
pub struct EigenArgs {
    /// Defaults to maxwell for em configs, else dirichlet.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long)]
    pub k_min: f64,
    #[arg(long)]
    pub k_max: f64,
    /// Scan intervals; the scan has steps + 1 rows.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Inner radius; defaults to the config value, else 1.
    #[arg(long)]
    pub r1: Option<f64>,
    /// Outer radius; defaults to the config value, else 2.
    #[arg(long)]
    pub r2: Option<f64>,
    /// Highest order scanned; defaults to ⌈k_max R2⌉ + 10.
    #[arg(long)]
    pub n_max: Option<usize>,
}

fn family_name(f: RootKind) -> &'static str {
    match f {
        RootKind::Dirichlet => "dirichlet",
        RootKind::MaxwellM => "maxwell_m",
        RootKind::MaxwellN => "maxwell_n",
    }
}

pub fn run(ctx: &Context, a: &EigenArgs) -> CliResult<()> {
    let cfg = ctx.config.as_ref();
    let kind = match (a.kind, cfg.map(|c| c.mode)) {
        (Some(KindArg::Maxwell), _) | (None, Some(Mode::Em)) => EigenKind::Maxwell,
        _ => EigenKind::Dirichlet,
    };
    let r1 = a.r1.or(cfg.map(|c| c.r1)).unwrap_or(1.0);
    let r2 = a.r2.or(cfg.map(|c| c.r2)).unwrap_or(2.0);
    if !(r1 > 0.0 && r1 < r2 && r2.is_finite()) {
        return Err(Fail::usage(format!("need 0 < R1 < R2, got R1 = {r1}, R2 = {r2}")));
    }
    if !(a.k_min.is_finite() && a.k_max.is_finite()) {
        return Err(Fail::usage("k range must be finite"));
    }
    let empty = a.k_max <= a.k_min || a.steps == 0;
    if !empty && a.k_min <= 0.0 {
        return Err(Fail::usage(format!("k range must be positive, got k_min = {}", a.k_min)));
    }
    let n_max = a.n_max.unwrap_or_else(|| (a.k_max.max(0.0) * r2).ceil() as usize + 10);

    let scan = if empty {
        Vec::new()
    } else {
        (0..=a.steps)
            .into_par_iter()
            .map(|i| {
                let k = a.k_min + (a.k_max - a.k_min) * i as f64 / a.steps as f64;
                certify_with_tol(&ShellSpec { r1, r2, k, n_max }, kind, ctx.tol_cert)
            })
            .collect::<Result<Vec<_>, _>>()?
    };

    let families: &[RootKind] = match kind {
        EigenKind::Dirichlet => &[RootKind::Dirichlet],
        EigenKind::Maxwell => &[RootKind::MaxwellM, RootKind::MaxwellN],
    };
    let start = if kind == EigenKind::Dirichlet { 0 } else { 1 };
    let mut roots: Vec<(usize, RootKind, f64)> = Vec::new();
    if !empty {
        let jobs: Vec<(usize, RootKind)> =
            families.iter().flat_map(|&f| (start..=n_max).map(move |n| (n, f))).collect();
        let found = jobs
            .par_iter()
            .map(|&(n, f)| find_eigen_k(n, r1, r2, f, (a.k_min, a.k_max)).map(|ks| (n, f, ks)))
            .collect::<Result<Vec<_>, _>>()?;
        for (n, f, ks) in found {
            roots.extend(ks.into_iter().map(|k| (n, f, k)));
        }
        roots.sort_by(|x, y| x.2.total_cmp(&y.2).then(x.0.cmp(&y.0)));
    }

    let scan_path = ctx.path("eigencheck_scan.csv")?;
    let mut w = csv::Writer::from_path(&scan_path)?;
    w.write_record(["k", "margin", "worst_n", "worst_family", "free"])?;
    for c in &scan {
        w.write_record([
            format!("{:.17e}", c.k),
            format!("{:.17e}", c.margin),
            c.worst_n.to_string(),
            family_name(c.worst_family).to_string(),
            c.free.to_string(),
        ])?;
    }
    w.flush().map_err(super::io_err)?;
    let roots_path = ctx.path("eigencheck_roots.csv")?;
    let mut w = csv::Writer::from_path(&roots_path)?;
    w.write_record(["n", "family", "k"])?;
    for (n, f, k) in &roots {
        w.write_record([n.to_string(), family_name(*f).to_string(), format!("{k:.17e}")])?;
    }
    w.flush().map_err(super::io_err)?;

    println!(
        "{} scan of R1 = {r1}, R2 = {r2}: {} points, {} not free, n_max {n_max}",
        if kind == EigenKind::Dirichlet { "dirichlet" } else { "maxwell" },
        scan.len(),
        scan.iter().filter(|c| !c.free).count()
    );
    for (n, f, k) in roots.iter().take(20) {
        println!("  root n = {n:<3} {:<10} k = {k:.12}", family_name(*f));
    }
    if roots.len() > 20 {
        println!("  ... {} roots in total", roots.len());
    }
    println!("wrote {} and {}", scan_path.display(), roots_path.display());
    Ok(())
}
