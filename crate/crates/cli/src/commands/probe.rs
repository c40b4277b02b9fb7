use super::Context;
use crate::{CliResult, Fail};
use clap::{Args, ValueEnum};
use twosphere_core::acoustic::{
    point_source_radiation_residual, radiation_residual, AcousticConfig, ForwardModel, Scatterer, SphereScatterer,
};
use twosphere_core::em::{singularity_probe, ProbeKind};
use twosphere_core::phaseless::Mode;
use twosphere_core::verify::probe_directions;
use twosphere_core::{SpherePoint, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbeArg {
    PhiPhi,
    PhiTheta,
    Radiation,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(value_enum)]
    pub kind: ProbeArg,
    /// Wavenumber; defaults to the config value, else 1.3.
    #[arg(long)]
    pub k: Option<f64>,
    /// Source position (r, θ, φ). Singularity probes only; radiation probes with a config
    /// use the y0 grid point.
    #[arg(long, default_value_t = 1.0)]
    pub source_r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.3)]
    pub phi: f64,
    /// PEC (singularity) or sound-soft (radiation, no config) sphere radius.
    #[arg(long)]
    pub obstacle_radius: Option<f64>,
    /// Table rows: approach angles 1e-1 … 1e-5 or radii 2R2 … 1000R2, log-spaced.
    #[arg(long, default_value_t = 9)]
    pub points: usize,
}

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn e(v: f64) -> String {
    format!("{v:.17e}")
}

fn singularity(ctx: &Context, a: &ProbeArgs, kind: ProbeKind, k: f64) -> CliResult<()> {
    let y = SpherePoint::new(a.source_r, a.theta, a.phi)?;
    let obstacle = a.obstacle_radius.or_else(|| {
        ctx.config.as_ref().filter(|c| c.mode == Mode::Em).and_then(|c| c.em_config().ok()).map(|c| c.radius)
    });
    let angles = geometric(1e-1, 1e-5, a.points);
    let t = singularity_probe(kind, k, &y, &angles, obstacle)?;
    let name = match kind {
        ProbeKind::PhiPhi => "phi_phi",
        ProbeKind::PhiTheta => "phi_theta",
    };
    let path = ctx.path(&format!("probe_{name}.csv"))?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "angle", "r", "measured_re", "measured_im", "predicted_re", "predicted_im", "ratio_re", "ratio_im",
        "ratio_abs", "scaled", "scattered_abs",
    ])?;
    for r in &t.rows {
        w.write_record([
            e(r.angle),
            e(r.r),
            e(r.measured.re),
            e(r.measured.im),
            e(r.predicted.re),
            e(r.predicted.im),
            e(r.ratio.re),
            e(r.ratio.im),
            e(r.ratio.norm()),
            e(r.scaled),
            e(r.scattered_abs),
        ])?;
    }
    w.flush().map_err(super::io_err)?;
    println!("{name} probe at k = {k}, y = ({}, {}, {}), log-log slope {:.4}", y.r, y.theta, y.phi, t.slope);
    if let Some(last) = t.rows.last() {
        println!("closest row: r = {:.3e}, |ratio| = {:.9}, scaled = {:.9}", last.r, last.ratio.norm(), last.scaled);
    }
    if let Some(n) = &t.notice {
        println!("note: {n}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn radiation(ctx: &Context, a: &ProbeArgs, k: f64) -> CliResult<()> {
    let (model, y) = match &ctx.config {
        Some(c) if c.mode == Mode::Acoustic => {
            let (g1, _) = c.grid_specs();
            let y = g1.build()?.points[c.y0].cart;
            (ForwardModel::new(&AcousticConfig::new(k, c.r1, c.r2)?, &c.scatterer()?)?, y)
        }
        Some(_) => return Err(Fail::usage("the radiation probe needs an acoustic config")),
        None => {
            let y = SpherePoint::new(a.source_r, a.theta, a.phi)?;
            let cfg = AcousticConfig::new(k, a.source_r, 2.0 * a.source_r)?;
            let sc = SphereScatterer::sound_soft(a.obstacle_radius.unwrap_or(0.5 * a.source_r));
            (ForwardModel::new(&cfg, &Scatterer::Sphere(sc))?, y.cart)
        }
    };
    let r2 = model.cfg.r2;
    let field = model.point_source(&y)?;
    let dirs: Vec<Vec3> = probe_directions(6, ctx.config.as_ref().map_or(0, |c| c.seed));
    let radii = geometric(2.0 * r2, 1000.0 * r2, a.points);
    let mut rows = Vec::with_capacity(radii.len());
    for &r in &radii {
        let mut res: f64 = 0.0;
        let mut free: f64 = 0.0;
        for d in &dirs {
            res = res.max(radiation_residual(&field, r, d)?);
            free = free.max(point_source_radiation_residual(k, &y, r, d)?);
        }
        rows.push((r, res, free));
    }
    let path = ctx.path("probe_radiation.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["r", "residual", "free_residual"])?;
    for (r, res, free) in &rows {
        w.write_record([e(*r), e(*res), e(*free)])?;
    }
    w.flush().map_err(super::io_err)?;
    let s = slope(&radii, &rows.iter().map(|r| r.1).collect::<Vec<_>>());
    println!("radiation probe at k = {k}: residual log-log slope {s:.4} over r in [{:.3e}, {:.3e}]", radii[0], radii[radii.len() - 1]);
    println!("wrote {}", path.display());
    Ok(())
}

pub fn run(ctx: &Context, a: &ProbeArgs) -> CliResult<()> {
    let k = a.k.or(ctx.config.as_ref().map(|c| c.k)).unwrap_or(1.3);
    if !(k > 0.0 && k.is_finite()) {
        return Err(Fail::usage(format!("k must be positive, got {k}")));
    }
    match a.kind {
        ProbeArg::PhiPhi => singularity(ctx, a, ProbeKind::PhiPhi, k),
        ProbeArg::PhiTheta => singularity(ctx, a, ProbeKind::PhiTheta, k),
        ProbeArg::Radiation => radiation(ctx, a, k),
    }
}
