//! CSV snapshots and time series, PGM heatmaps.
//!
//! Floats are written with 17 significant digits so that a snapshot read
//! back reproduces the fields bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{FieldSet, Grid};
use crate::timestepper::StepDiagnostics;

/// `<scenario>_t<value>.csv`, with the shortest round-trip rendering of `t`.
pub fn snapshot_file_name(scenario: &str, t: f64) -> String {
    format!("{scenario}_t{t}.csv")
}

#[inline]
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_snapshot(grid: &Grid, fields: &FieldSet, path: &Path) -> Result<()> {
    fields.check(grid)?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let two_d = grid.dim() == 2;
    writeln!(w, "{}", if two_d { "x,y,c1,c2,h" } else { "x,c1,c2,h" }).map_err(io)?;
    for (k, (x, y)) in grid.coordinates().enumerate() {
        let values = [fields.c1[k], fields.c2[k], fields.h[k]].map(num).join(",");
        if two_d {
            writeln!(w, "{},{},{}", num(x), num(y), values).map_err(io)?;
        } else {
            writeln!(w, "{},{}", num(x), values).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads a snapshot written by [`write_snapshot`]; returns node coordinates
/// (y = 0 in 1D) and the fields.
pub fn read_snapshot(path: &Path) -> Result<(Vec<(f64, f64)>, FieldSet)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty snapshot"))?
        .map_err(|e| Error::io(path, e))?;
    let two_d = match header.trim() {
        "x,c1,c2,h" => false,
        "x,y,c1,c2,h" => true,
        other => return Err(parse_err(path, &format!("unexpected header `{other}`"))),
    };
    let mut coords = Vec::new();
    let mut fields = FieldSet {
        c1: Vec::new(),
        c2: Vec::new(),
        h: Vec::new(),
    };
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, &e.to_string()))?;
        let expected = if two_d { 5 } else { 4 };
        if vals.len() != expected {
            return Err(parse_err(path, &format!("expected {expected} columns, got {}", vals.len())));
        }
        let off = if two_d { 2 } else { 1 };
        coords.push((vals[0], if two_d { vals[1] } else { 0.0 }));
        fields.c1.push(vals[off]);
        fields.c2.push(vals[off + 1]);
        fields.h.push(vals[off + 2]);
    }
    Ok((coords, fields))
}

fn parse_err(path: &Path, msg: &str) -> Error {
    Error::Parse {
        key: path.display().to_string(),
        message: msg.to_string(),
    }
}

pub const TIMESERIES_HEADER: &str = "t,min_c1,min_c2,min_h,mass_c1,mass_c2,max_h";

pub fn write_timeseries(diagnostics: &[StepDiagnostics], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{TIMESERIES_HEADER}").map_err(io)?;
    for d in diagnostics {
        let row = [d.t, d.min_c1, d.min_c2, d.min_h, d.mass_c1, d.mass_c2, d.max_h].map(num).join(",");
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Gray level of `u` under linear min–max scaling to `0..=255`;
/// a constant field maps to mid-gray.
pub fn gray_levels(u: &[f64]) -> (Vec<u8>, f64, f64) {
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels = if max > min {
        u.iter()
            .map(|v| ((v - min) / (max - min) * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    } else {
        vec![128; u.len()]
    };
    (levels, min, max)
}

/// Plain PGM (P2) heatmap, rows from `y_min` upwards, plus a `.meta`
/// sidecar with field name, time and the scaling range. Returns both paths.
pub fn write_heatmap(grid: &Grid, u: &[f64], field: &str, t: f64, path: &Path) -> Result<(PathBuf, PathBuf)> {
    grid.check_shape(u)?;
    let (levels, min, max) = gray_levels(u);
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "P2\n{} {}\n255", grid.nx(), grid.ny()).map_err(io)?;
    for row in levels.chunks(grid.nx()) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        writeln!(w, "{}", line.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let meta = path.with_extension("meta");
    let mut m = create(&meta)?;
    let io = |e| Error::io(&meta, e);
    writeln!(m, "field={field}\nt={t}\nmin={}\nmax={}", num(min), num(max)).map_err(io)?;
    m.flush().map_err(io)?;
    Ok((path.to_path_buf(), meta))
}
