//! Plain-text and binary exports for geometry, channels, hop traces, latency
//! breakdowns and SE summaries. Column order is fixed.

use std::io::{self, BufRead, Read, Write};

use num_complex::Complex64;

use crate::chain::HopRecord;
use crate::equalize::EqualizerKind;
use crate::error::{LisError, Result};
use crate::latency::LatencyBreakdown;
use crate::linalg::CMatrix;
use crate::metrics::PointResult;
use crate::scenario::AntennaArray;

pub const GEOMETRY_HEADER: &str = "antenna_id,panel_id,x,y,z,nx,ny,nz";
pub const HOP_HEADER: &str = "hop,from_panel,to_panel,payload_complex_values,payload_bytes,cumulative_us";
pub const LATENCY_HEADER: &str = "kind,N,K,P,wait_us,frontend_us,local_us,fronthaul_us,cpu_us,total_us";
pub const SUMMARY_HEADER: &str = "config,P,N,M,K,kind,mean_se,p5_se,p50_se,n_samples,singular_draws";

pub fn write_geometry_csv<W: Write>(mut out: W, array: &AntennaArray) -> io::Result<()> {
    writeln!(out, "{GEOMETRY_HEADER}")?;
    for (i, ((p, n), panel)) in array.positions.iter().zip(&array.normals).zip(&array.panel_index).enumerate() {
        writeln!(out, "{i},{panel},{},{},{},{},{},{}", p.x, p.y, p.z, n.x, n.y, n.z)?;
    }
    Ok(())
}

/// Matrix as CSV: a `M,K` header line, the dimensions, then one line per row
/// with interleaved `re,im` pairs.
pub fn write_matrix_csv<W: Write>(mut out: W, h: &CMatrix) -> io::Result<()> {
    writeln!(out, "M,K")?;
    writeln!(out, "{},{}", h.nrows(), h.ncols())?;
    for r in 0..h.nrows() {
        let mut line = String::new();
        for c in 0..h.ncols() {
            if c > 0 {
                line.push(',');
            }
            let v = h[(r, c)];
            line.push_str(&format!("{},{}", v.re, v.im));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> LisError {
    LisError::Wire(msg.into())
}

pub fn read_matrix_csv<R: BufRead>(input: R) -> Result<CMatrix> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| parse_err("unexpected end of matrix file"))?
            .map_err(|e| parse_err(e.to_string()))
    };
    if next()?.trim() != "M,K" {
        return Err(parse_err("missing M,K header"));
    }
    let dims = next()?;
    let (m, k) = dims
        .trim()
        .split_once(',')
        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
        .ok_or_else(|| parse_err("bad dimension line"))?;
    let mut h = CMatrix::zeros(m, k);
    for r in 0..m {
        let line = next()?;
        let vals: Vec<f64> = line
            .trim()
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(format!("row {r}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() != 2 * k {
            return Err(parse_err(format!("row {r}: expected {} values, got {}", 2 * k, vals.len())));
        }
        for c in 0..k {
            h[(r, c)] = Complex64::new(vals[2 * c], vals[2 * c + 1]);
        }
    }
    Ok(h)
}

/// Binary matrix: `u64 M`, `u64 K`, then row-major `f64 re, f64 im`, all little-endian.
pub fn write_matrix_bin<W: Write>(mut out: W, h: &CMatrix) -> io::Result<()> {
    out.write_all(&(h.nrows() as u64).to_le_bytes())?;
    out.write_all(&(h.ncols() as u64).to_le_bytes())?;
    for r in 0..h.nrows() {
        for c in 0..h.ncols() {
            let v = h[(r, c)];
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_bin<R: Read>(mut input: R) -> Result<CMatrix> {
    let mut word = [0u8; 8];
    let mut read_word = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word).map_err(|e| parse_err(e.to_string()))?;
        Ok(word)
    };
    let m = u64::from_le_bytes(read_word(&mut input)?) as usize;
    let k = u64::from_le_bytes(read_word(&mut input)?) as usize;
    let mut h = CMatrix::zeros(m, k);
    for r in 0..m {
        for c in 0..k {
            let re = f64::from_le_bytes(read_word(&mut input)?);
            let im = f64::from_le_bytes(read_word(&mut input)?);
            h[(r, c)] = Complex64::new(re, im);
        }
    }
    Ok(h)
}

pub fn write_hops_csv<W: Write>(mut out: W, hops: &[HopRecord]) -> io::Result<()> {
    writeln!(out, "{HOP_HEADER}")?;
    for (i, h) in hops.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            h.from_panel,
            h.to_panel,
            h.payload_complex_values,
            h.message_bytes,
            h.cumulative_latency_us
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyRow {
    pub kind: EqualizerKind,
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub breakdown: LatencyBreakdown,
}

pub fn write_latency_csv<W: Write>(mut out: W, rows: &[LatencyRow]) -> io::Result<()> {
    writeln!(out, "{LATENCY_HEADER}")?;
    for r in rows {
        let b = &r.breakdown;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.kind, r.n, r.k, r.p, b.wait_us, b.lpu_frontend_us, b.lpu_local_us, b.fronthaul_us, b.cpu_us, b.total_us
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut out: W, users: usize, points: &[PointResult]) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for pr in points {
        for (kind, s) in &pr.summaries {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                pr.point.label,
                pr.point.panel_count,
                pr.antennas_per_panel,
                pr.point.total_antennas,
                users,
                kind,
                s.mean_user_se,
                s.percentile(5.0).unwrap_or(f64::NAN),
                s.percentile(50.0).unwrap_or(f64::NAN),
                s.n_samples,
                s.singular_draws
            )?;
        }
    }
    Ok(())
}
