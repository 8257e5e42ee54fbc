//! Run artifacts: `ticks.csv` and `summary.json`.
//!
//! Floats are written in shortest round-trip form, so reading a log back
//! reproduces every value bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::safety_controller::ControlTick;
use crate::sim_harness::Summary;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(format!("ticks.csv: {e}"))
}

/// Header for a log of workspace dimension `dim`.
pub fn tick_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["k", "t", "active_region", "alpha"].iter().map(|s| s.to_string()).collect();
    for name in ["f_des", "f_c", "f_e"] {
        h.extend((0..dim).map(|i| format!("{name}_{i}")));
    }
    h.extend(
        ["b", "b_guard", "p_ext", "tank_T", "epsilon", "h_est", "h_truth"]
            .iter()
            .map(|s| s.to_string()),
    );
    for name in ["x", "xdot"] {
        h.extend((0..dim).map(|i| format!("{name}_{i}")));
    }
    h
}

fn tick_record(t: &ControlTick) -> Vec<String> {
    let mut r = vec![t.k.to_string(), t.t.to_string(), t.active_region.clone(), t.alpha.to_string()];
    for v in [&t.f_des, &t.f_c, &t.f_e] {
        r.extend(v.iter().map(f64::to_string));
    }
    for v in [t.b, t.b_guard, t.p_ext, t.tank_energy, t.epsilon, t.h_est, t.h_truth] {
        r.push(v.to_string());
    }
    for v in [&t.x, &t.xdot] {
        r.extend(v.iter().map(f64::to_string));
    }
    r
}

pub fn write_ticks<W: Write>(ticks: &[ControlTick], writer: W) -> Result<()> {
    let dim = ticks.first().map_or(0, |t| t.f_des.len());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(tick_header(dim)).map_err(csv_err)?;
    for t in ticks {
        if t.f_des.len() != dim {
            return Err(Error::Io("ticks.csv: mixed workspace dimensions".into()));
        }
        w.write_record(tick_record(t)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ticks<R: Read>(reader: R) -> Result<Vec<ControlTick>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    let dim = header.iter().filter(|h| h.starts_with("f_des_")).count();
    let expected = tick_header(dim);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Io("ticks.csv: unexpected column set".into()));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |col: usize| Error::Io(format!("ticks.csv: row {}: bad value in column {}", line + 1, expected[col]));
        let num = |col: usize| rec[col].parse::<f64>().map_err(|_| bad(col));
        let vec = |start: usize| (start..start + dim).map(num).collect::<Result<Vec<f64>>>();
        let mut c = 4;
        let f_des = vec(c)?;
        c += dim;
        let f_c = vec(c)?;
        c += dim;
        let f_e = vec(c)?;
        c += dim;
        out.push(ControlTick {
            k: rec[0].parse().map_err(|_| bad(0))?,
            t: num(1)?,
            active_region: rec[2].to_string(),
            alpha: num(3)?,
            f_des,
            f_c,
            f_e,
            b: num(c)?,
            b_guard: num(c + 1)?,
            p_ext: num(c + 2)?,
            tank_energy: num(c + 3)?,
            epsilon: num(c + 4)?,
            h_est: num(c + 5)?,
            h_truth: num(c + 6)?,
            x: vec(c + 7)?,
            xdot: vec(c + 7 + dim)?,
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(summary: &Summary, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, summary).map_err(|e| Error::Io(format!("summary.json: {e}")))?;
    writeln!(writer)?;
    Ok(())
}

pub fn read_summary<R: Read>(reader: R) -> Result<Summary> {
    serde_json::from_reader(reader).map_err(|e| Error::Io(format!("summary.json: {e}")))
}

/// Write `ticks.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_run(dir: &Path, ticks: &[ControlTick], summary: &Summary) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let ticks_file = std::fs::File::create(dir.join("ticks.csv"))?;
    write_ticks(ticks, std::io::BufWriter::new(ticks_file))?;
    let summary_file = std::fs::File::create(dir.join("summary.json"))?;
    write_summary(summary, std::io::BufWriter::new(summary_file))
}
