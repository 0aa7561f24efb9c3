//! CSV readers and writers for every file the tools exchange. Numbers are
//! written with Rust's shortest round-trip `Display` formatting, which is
//! locale independent.

use std::io::{Read, Write};

use crate::clockgen::AClkTrace;
use crate::device::{CharacterizationPoint, StaircaseSample};
use crate::error::{Error, Result};
use crate::pipeline::{FrameRow, SummaryRow};
use crate::scaling::{PublishedRow, ReportRow, ScalingEntry};
use crate::signals::{MeasurementSet, SparseSignal};
use crate::sre::Calibration;

pub const CHARACTERIZATION_HEADER: [&str; 3] = ["vin_volts", "probability", "n_samples"];
pub const STAIRCASE_HEADER: [&str; 4] = ["cycle", "time_ns", "vin_volts", "bit"];
pub const CALIBRATION_HEADER: [&str; 2] = ["vin_volts", "probability"];
pub const TRACE_HEADER: [&str; 2] = ["frame_id", "cycle_index"];
pub const SIGNAL_HEADER: [&str; 2] = ["index", "x"];
pub const MEASUREMENT_HEADER: [&str; 2] = ["instant", "value"];
pub const RESULT_HEADER: [&str; 6] = [
    "trial",
    "algorithm",
    "sparsity_rate",
    "m",
    "normalized_error",
    "iterations",
];
pub const FRAME_HEADER: [&str; 14] = [
    "trial",
    "frame",
    "algorithm",
    "sparsity_rate",
    "s_true",
    "s_hat",
    "p_target",
    "v_sr",
    "m",
    "k",
    "normalized_error",
    "iterations",
    "warmup",
    "failed",
];
pub const SUMMARY_HEADER: [&str; 7] = [
    "algorithm",
    "sparsity_rate",
    "mean_normalized_error",
    "std_error",
    "mean_m",
    "frames",
    "trials",
];
pub const ENTRIES_HEADER: [&str; 5] = ["name", "node_nm", "v_nominal", "power_watts", "area"];
pub const PUBLISHED_HEADER: [&str; 5] = ["name", "node_nm", "v_nominal", "power_factor", "area_factor"];
pub const BACK_SOLVED_HEADER: [&str; 6] = ["name", "node_nm", "v_nominal", "power_watts", "area", "provenance"];
pub const REPORT_HEADER: [&str; 4] = ["design", "technology", "power_norm", "area_norm"];

pub const BACK_SOLVED_NOTE: &str = "back-solved from published normalized factor";

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(header)?;
    Ok(wtr)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_characterization<W: Write>(w: W, points: &[CharacterizationPoint]) -> Result<()> {
    let mut wtr = writer(w, &CHARACTERIZATION_HEADER)?;
    for p in points {
        wtr.write_record([p.vin.to_string(), p.probability.to_string(), p.n_samples.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_staircase<W: Write>(w: W, samples: &[StaircaseSample], f_clk: f64) -> Result<()> {
    let mut wtr = writer(w, &STAIRCASE_HEADER)?;
    for s in samples {
        wtr.write_record([
            s.cycle.to_string(),
            (s.cycle as f64 * 1e9 / f_clk).to_string(),
            s.vin.to_string(),
            (s.bit as u8).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_calibration<W: Write>(w: W, cal: &Calibration) -> Result<()> {
    let mut wtr = writer(w, &CALIBRATION_HEADER)?;
    for &(v, p) in cal.points() {
        wtr.write_record([v.to_string(), p.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

fn reader<R: Read>(r: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let got = rdr.headers()?.clone();
    if !got.is_empty() && !got.iter().eq(header.iter().copied()) {
        return Err(Error::InvalidParams(format!(
            "unexpected CSV header {:?}, expected {:?}",
            got.iter().collect::<Vec<_>>(),
            header
        )));
    }
    Ok(rdr)
}

fn parse_f64(field: &str, what: &'static str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::InvalidParams(format!("cannot parse {what} from '{field}'")))
}

fn parse_opt(field: &str, what: &'static str) -> Result<Option<f64>> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("n/a") {
        Ok(None)
    } else {
        parse_f64(f, what).map(Some)
    }
}

pub fn read_calibration<R: Read>(r: R) -> Result<Calibration> {
    let mut rdr = reader(r, &CALIBRATION_HEADER)?;
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        pts.push((parse_f64(&rec[0], "vin_volts")?, parse_f64(&rec[1], "probability")?));
    }
    Calibration::new(pts)
}

pub fn write_traces<W: Write>(w: W, traces: &[AClkTrace]) -> Result<()> {
    let mut wtr = writer(w, &TRACE_HEADER)?;
    for t in traces {
        for &k in t.instants() {
            wtr.write_record([t.frame_id.to_string(), k.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_signal<W: Write>(w: W, sig: &SparseSignal) -> Result<()> {
    let mut wtr = writer(w, &SIGNAL_HEADER)?;
    for (i, x) in sig.x.iter().enumerate() {
        wtr.write_record([i.to_string(), x.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_measurements<W: Write>(w: W, y: &MeasurementSet) -> Result<()> {
    let mut wtr = writer(w, &MEASUREMENT_HEADER)?;
    for (t, v) in y.instants.iter().zip(&y.values) {
        wtr.write_record([t.to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Steady-state recovery results only.
pub fn write_results<W: Write>(w: W, rows: &[FrameRow]) -> Result<()> {
    let mut wtr = writer(w, &RESULT_HEADER)?;
    for r in rows.iter().filter(|r| !r.warmup) {
        wtr.write_record([
            r.trial.to_string(),
            r.algorithm.to_string(),
            r.sparsity_rate.to_string(),
            r.m.to_string(),
            r.normalized_error.to_string(),
            r.iterations.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_frames<W: Write>(w: W, rows: &[FrameRow]) -> Result<()> {
    let mut wtr = writer(w, &FRAME_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.trial.to_string(),
            r.frame.to_string(),
            r.algorithm.to_string(),
            r.sparsity_rate.to_string(),
            r.s_true.to_string(),
            r.s_hat.to_string(),
            r.p_target.to_string(),
            r.v_sr.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.normalized_error.to_string(),
            r.iterations.to_string(),
            r.warmup.to_string(),
            r.failed.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut wtr = writer(w, &SUMMARY_HEADER)?;
    for s in rows {
        wtr.write_record([
            s.algorithm.to_string(),
            s.sparsity_rate.to_string(),
            s.mean_normalized_error.to_string(),
            s.std_error.to_string(),
            s.mean_m.to_string(),
            s.frames.to_string(),
            s.trials.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_entries<R: Read>(r: R) -> Result<Vec<ScalingEntry>> {
    let mut rdr = reader(r, &ENTRIES_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != ENTRIES_HEADER.len() {
            return Err(Error::InvalidParams(format!("entry row has {} fields", rec.len())));
        }
        let e = ScalingEntry {
            name: rec[0].to_string(),
            node_nm: parse_f64(&rec[1], "node_nm")?,
            v_nominal: parse_f64(&rec[2], "v_nominal")?,
            power_watts: parse_opt(&rec[3], "power_watts")?,
            area: parse_opt(&rec[4], "area")?,
        };
        e.validate()?;
        out.push(e);
    }
    Ok(out)
}

pub fn write_entries<W: Write>(w: W, entries: &[ScalingEntry]) -> Result<()> {
    let mut wtr = writer(w, &ENTRIES_HEADER)?;
    for e in entries {
        wtr.write_record([
            e.name.clone(),
            e.node_nm.to_string(),
            e.v_nominal.to_string(),
            opt(e.power_watts),
            opt(e.area),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_published<R: Read>(r: R) -> Result<Vec<PublishedRow>> {
    let mut rdr = reader(r, &PUBLISHED_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != PUBLISHED_HEADER.len() {
            return Err(Error::InvalidParams(format!("published row has {} fields", rec.len())));
        }
        out.push(PublishedRow {
            name: rec[0].to_string(),
            node_nm: parse_f64(&rec[1], "node_nm")?,
            v_nominal: parse_f64(&rec[2], "v_nominal")?,
            power_factor: parse_opt(&rec[3], "power_factor")?,
            area_factor: parse_opt(&rec[4], "area_factor")?,
        });
    }
    Ok(out)
}

pub fn write_published<W: Write>(w: W, rows: &[PublishedRow]) -> Result<()> {
    let mut wtr = writer(w, &PUBLISHED_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.name.clone(),
            r.node_nm.to_string(),
            r.v_nominal.to_string(),
            opt(r.power_factor),
            opt(r.area_factor),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_back_solved<W: Write>(w: W, entries: &[ScalingEntry]) -> Result<()> {
    let mut wtr = writer(w, &BACK_SOLVED_HEADER)?;
    for e in entries {
        wtr.write_record([
            e.name.clone(),
            e.node_nm.to_string(),
            e.v_nominal.to_string(),
            opt(e.power_watts),
            opt(e.area),
            BACK_SOLVED_NOTE.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Normalized factors at full precision; missing values are written as `N/A`.
pub fn write_report<W: Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let mut wtr = writer(w, &REPORT_HEADER)?;
    let f = |v: Option<f64>| v.map_or_else(|| "N/A".to_string(), |x| x.to_string());
    for r in rows {
        wtr.write_record([r.name.clone(), r.technology.clone(), f(r.power_norm), f(r.area_norm)])?;
    }
    wtr.flush()?;
    Ok(())
}
