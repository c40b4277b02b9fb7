use super::dataset::{DatasetHeader, PhaselessDataset, PointRef, Pol, Record};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::io::{BufRead, Write};

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: DatasetHeader,
}

#[derive(Deserialize)]
struct RecordLine {
    xi: PointRef,
    si: [Option<PointRef>; 2],
    pol: Option<Pol>,
    modulus: f64,
}

/// One header line, then one line per record with coordinates (r, θ, φ) and grid indices.
pub fn write_jsonl<W: Write>(ds: &PhaselessDataset, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &HeaderLine { header: ds.header.clone() })?;
    writeln!(w)?;
    let coords = |p: PointRef| {
        let s = ds.point(p);
        [s.r, s.theta, s.phi]
    };
    for r in &ds.records {
        let tau = r.tau().map(u8::from);
        let line = json!({
            "x": coords(r.x),
            "xi": r.x,
            "sources": r.sources.map(|s| s.map(coords)),
            "si": r.sources,
            "tau": tau,
            "pol": r.pol,
            "modulus": r.modulus,
        });
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<PhaselessDataset> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| Error::Config("empty dataset file".into()))??;
    let header: HeaderLine = serde_json::from_str(&first)?;
    let header = header.header;
    let grid1 = header.grid1.build()?;
    let grid2 = header.grid2.build()?;
    let mut records = Vec::with_capacity(header.record_count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rl: RecordLine = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("record {} is malformed: {e}", i + 1)))?;
        for p in std::iter::once(Some(rl.xi)).chain(rl.si).flatten() {
            let n = if p.shell == 1 { grid1.len() } else { grid2.len() };
            if !(p.shell == 1 || p.shell == 2) || p.index as usize >= n {
                return Err(Error::Config(format!("record {} references missing grid point {p:?}", i + 1)));
            }
        }
        records.push(Record { x: rl.xi, sources: rl.si, pol: rl.pol, modulus: rl.modulus });
    }
    if records.len() != header.record_count {
        return Err(Error::Config(format!(
            "dataset truncated: header announces {} records, found {}",
            header.record_count,
            records.len()
        )));
    }
    Ok(PhaselessDataset { header, grid1, grid2, records })
}

/// Flat CSV: one row per record, empty cells for inactive sources and absent labels.
pub fn write_csv<W: Write>(ds: &PhaselessDataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec!["x_shell", "x_index", "x_r", "x_theta", "x_phi"];
    head.extend(["y1_shell", "y1_index", "y1_r", "y1_theta", "y1_phi"]);
    head.extend(["y2_shell", "y2_index", "y2_r", "y2_theta", "y2_phi"]);
    head.extend(["tau1", "tau2", "m", "n", "l", "modulus"]);
    out.write_record(&head).map_err(csv_err)?;
    let point = |p: Option<PointRef>| -> Vec<String> {
        match p {
            None => vec![String::new(); 5],
            Some(p) => {
                let s = ds.point(p);
                vec![p.shell.to_string(), p.index.to_string(), s.r.to_string(), s.theta.to_string(), s.phi.to_string()]
            }
        }
    };
    for r in &ds.records {
        let mut row = point(Some(r.x));
        row.extend(point(r.sources[0]));
        row.extend(point(r.sources[1]));
        let tau = r.tau();
        row.push(u8::from(tau[0]).to_string());
        row.push(u8::from(tau[1]).to_string());
        let lab = |t: Option<crate::em::Tangent>| t.map(|t| t.label().to_string()).unwrap_or_default();
        row.push(lab(r.pol.map(|p| p.m)));
        row.push(lab(r.pol.and_then(|p| p.n)));
        row.push(lab(r.pol.and_then(|p| p.l)));
        row.push(r.modulus.to_string());
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
