use super::{write_json, Context};
use crate::{BranchArg, CliResult, Fail};
use clap::{ArgGroup, Args};
use serde::Deserialize;
use serde_json::json;
use std::path::PathBuf;
use twosphere_core::acoustic::ForwardModel;
use twosphere_core::phaseless::{
    classify_branch, conjugate_discriminator, discriminator_grids, shell_traces, Mode, ShellTraces, Verdict,
};

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["branch", "candidate"])))]
pub struct DiscriminateArgs {
    /// Build the candidate from the true traces: unchanged or conjugated.
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
    /// Candidate traces as JSON: {"r1": [[re, im], ...], "r2": [...]}, or a traces.json
    /// written by this command (its "candidate" entry is used).
    #[arg(long, value_name = "FILE")]
    pub candidate: Option<PathBuf>,
    /// Discriminator grid size; defaults to `[verify].discriminator_n_theta`.
    #[arg(long)]
    pub n_theta: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CandidateFile {
    Bare(ShellTraces),
    Written { candidate: ShellTraces },
}

fn read_candidate(p: &PathBuf) -> CliResult<ShellTraces> {
    let text = std::fs::read_to_string(p).map_err(|e| Fail::usage(format!("cannot read {}: {e}", p.display())))?;
    match serde_json::from_str(&text) {
        Ok(CandidateFile::Bare(t)) | Ok(CandidateFile::Written { candidate: t }) => Ok(t),
        Err(e) => Err(Fail::usage(format!("{}: not a trace file ({e})", p.display()))),
    }
}

pub fn run(ctx: &Context, a: &DiscriminateArgs) -> CliResult<()> {
    let c = ctx.config()?;
    if c.mode != Mode::Acoustic {
        return Err(Fail::usage("discriminate works on acoustic configs"));
    }
    let candidate_file = a.candidate.as_ref().map(read_candidate).transpose()?;
    ctx.certify(c)?;
    let cfg = c.acoustic()?;
    let model = ForwardModel::new(&cfg, &c.scatterer()?)?;
    let grids = discriminator_grids(&cfg, a.n_theta.unwrap_or(c.verify.discriminator_n_theta))?;
    let (g1, _) = c.grid_specs();
    let y0 = g1.build()?.points[c.y0].cart;
    let reference = shell_traces(&model, &grids, &y0)?;
    let candidate = match (a.branch, candidate_file) {
        (_, Some(t)) => t,
        (Some(BranchArg::Conjugate), None) => reference.conj(),
        _ => reference.clone(),
    };
    if candidate.r1.len() != reference.r1.len() || candidate.r2.len() != reference.r2.len() {
        return Err(Fail::usage(format!(
            "candidate has {} + {} samples, the discriminator grids have {} + {}",
            candidate.r1.len(),
            candidate.r2.len(),
            reference.r1.len(),
            reference.r2.len()
        )));
    }
    let report = conjugate_discriminator(&cfg, &grids, &y0, &reference, &candidate)?;
    let flat = |t: &ShellTraces| t.r1.iter().chain(&t.r2).copied().collect::<Vec<_>>();
    let branch = classify_branch(&flat(&candidate), &flat(&reference))?;

    write_json(&ctx.path("traces.json")?, &json!({ "y0": y0, "reference": reference, "candidate": candidate }))?;
    write_json(&ctx.path("discriminator.json")?, &json!({ "report": report, "branch": branch }))?;
    let verdict = match report.verdict {
        Verdict::ConsistentRadiating => "consistent_radiating",
        Verdict::ConjugateBranchRejected => "conjugate_branch_rejected",
    };
    println!("verdict: {verdict}");
    println!(
        "hypothesis {:?}, growth factor {:.4e}, identity trace {:.3e}, conjugate trace {:.3e}",
        report.hypothesis, report.margin, report.identity_trace, report.conjugate_trace
    );
    println!("branch {:?}, margin ratio {:.3e}", branch.branch, branch.margin_ratio);
    if let Some(n) = &report.note {
        println!("note: {n}");
    }
    Ok(())
}
