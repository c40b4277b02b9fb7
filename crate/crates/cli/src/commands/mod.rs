pub mod discriminate;
pub mod eigen;
pub mod probe;
pub mod synth;
pub mod verify;

use crate::config::{check_tol_key, RunConfig};
use crate::{CliResult, Fail, Global};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use twosphere_core::eigencheck::{certify_with_tol, Certificate, EigenKind, ShellSpec, TOL_CERT};
use twosphere_core::phaseless::Mode;
use twosphere_core::Error;

pub const OUT_DIR_ENV: &str = "TWOSPHERE_OUT_DIR";

pub struct Context {
    pub config: Option<RunConfig>,
    pub out_dir: PathBuf,
    pub tol_cert: f64,
}

fn parse_override(s: &str) -> CliResult<(String, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Fail::usage(format!("--tol-override expects KEY=VAL, got {s:?}")))?;
    let k = k.trim();
    check_tol_key(k)?;
    let v: f64 = v.trim().parse().map_err(|_| Fail::usage(format!("--tol-override {k}: {v:?} is not a number")))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Fail::usage(format!("--tol-override {k}: value must be finite and non-negative")));
    }
    Ok((k.to_string(), v))
}

impl Context {
    pub fn new(g: &Global) -> CliResult<Self> {
        let overrides = g.tol_override.iter().map(|s| parse_override(s)).collect::<CliResult<Vec<_>>>()?;
        let mut config = match &g.config {
            Some(p) => Some(RunConfig::load(p)?),
            None => None,
        };
        let mut tol_cert = TOL_CERT;
        if let Some(c) = &mut config {
            if let Some(s) = g.seed {
                c.seed = s;
            }
            c.tolerances.extend(overrides.iter().cloned());
            tol_cert = c.tol("tol_cert").unwrap_or(TOL_CERT);
        } else if let Some((_, v)) = overrides.iter().rev().find(|(k, _)| k == "tol_cert") {
            tol_cert = *v;
        }
        let out_dir = match (&g.out, std::env::var_os(OUT_DIR_ENV)) {
            (Some(d), _) => d.clone(),
            (None, Some(d)) if !d.is_empty() => PathBuf::from(d),
            _ => config.as_ref().map(|c| c.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out")),
        };
        Ok(Context { config, out_dir, tol_cert })
    }

    pub fn config(&self) -> CliResult<&RunConfig> {
        self.config.as_ref().ok_or_else(|| Fail::usage("this command needs --config PATH"))
    }

    pub fn path(&self, name: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| Fail::usage(format!("cannot create {}: {e}", self.out_dir.display())))?;
        Ok(self.out_dir.join(name))
    }

    /// Refuses k when k² is within the certificate margin of a shell eigenvalue (exit 3).
    pub fn certify(&self, c: &RunConfig) -> CliResult<Certificate> {
        let kind = match c.mode {
            Mode::Acoustic => EigenKind::Dirichlet,
            Mode::Em => EigenKind::Maxwell,
        };
        let cert = certify_with_tol(&ShellSpec::new(c.r1, c.r2, c.k)?, kind, self.tol_cert)?;
        if !cert.free {
            return Err(Error::IllPosed {
                k: c.k,
                margin: cert.margin,
                detail: format!("{:?} family, order {}", cert.worst_family, cert.worst_n).to_lowercase(),
            }
            .into());
        }
        Ok(cert)
    }
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Fail::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(Error::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(Error::from)?;
    Ok(())
}

pub fn io_err(e: impl Into<Error>) -> Fail {
    Fail::from(e.into())
}

impl From<csv::Error> for Fail {
    fn from(e: csv::Error) -> Self {
        Fail::usage(format!("csv output: {e}"))
    }
}
