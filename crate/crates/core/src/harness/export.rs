//! Delimited output files and their parsers.
//!
//! Traces are wide CSV, one row per slot. The header names the per-user
//! columns `u{k}_x, u{k}_y, u{k}_mode, u{k}_los, u{k}_b, u{k}_p, u{k}_s,
//! u{k}_r` after the slot columns `slot, uav_x, uav_y, sum_rate, reward,
//! status`. Floats are written in scientific notation with 12 significant
//! digits; since traces are quantized to that precision on creation, a
//! written trace parses back to the identical in-memory trace.
//!
//! Grids, series and curves are long-format CSV with one value per row.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::MetricsSummary;
use super::runner::{EpisodeTrace, SlotRecord, UserRecord};
use crate::allocation::{AllocParams, AllocStatus};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::mobility::Mode;

const SLOT_COLUMNS: [&str; 6] = ["slot", "uav_x", "uav_y", "sum_rate", "reward", "status"];
const USER_COLUMNS: [&str; 8] = ["x", "y", "mode", "los", "b", "p", "s", "r"];

pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

fn mode_str(m: Mode) -> String {
    match m {
        Mode::Individual => "individual".into(),
        Mode::Member(g) => format!("group:{g}"),
    }
}

fn parse_mode(s: &str) -> Result<Mode> {
    if s == "individual" {
        return Ok(Mode::Individual);
    }
    s.strip_prefix("group:")
        .and_then(|g| g.parse().ok())
        .map(Mode::Member)
        .ok_or_else(|| Error::Parse(format!("bad mode `{s}`")))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("bad number `{s}` in column {what}")))
}

pub fn trace_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = SLOT_COLUMNS.iter().map(|s| s.to_string()).collect();
    for i in 0..k {
        h.extend(USER_COLUMNS.iter().map(|c| format!("u{i}_{c}")));
    }
    h
}

/// Writes a trace after re-checking every row against the budget and QoS
/// invariants.
pub fn write_trace(path: &Path, trace: &EpisodeTrace, params: &AllocParams) -> Result<()> {
    for row in &trace.rows {
        row.allocation()
            .check_invariants(params)
            .map_err(|e| Error::Parse(format!("slot {} violates allocation invariants: {e}", row.slot)))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(trace.num_users))?;
    for row in &trace.rows {
        let mut rec = vec![
            row.slot.to_string(),
            fmt12(row.uav.x),
            fmt12(row.uav.y),
            fmt12(row.sum_rate),
            fmt12(row.reward),
            row.status.as_str().to_string(),
        ];
        for u in &row.users {
            rec.extend([
                fmt12(u.position.x),
                fmt12(u.position.y),
                mode_str(u.mode),
                u8::from(u.los).to_string(),
                fmt12(u.bandwidth),
                fmt12(u.power),
                fmt12(u.slack),
                fmt12(u.rate),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<EpisodeTrace> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let extra = header.len().checked_sub(SLOT_COLUMNS.len()).unwrap_or(usize::MAX);
    if extra == usize::MAX || extra % USER_COLUMNS.len() != 0 {
        return Err(Error::Parse(format!("unexpected trace header with {} columns", header.len())));
    }
    let k = extra / USER_COLUMNS.len();
    if header.iter().map(String::from).collect::<Vec<_>>() != trace_header(k) {
        return Err(Error::Parse("trace header does not match the documented schema".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| parse_f64(&rec[i], &header[i]);
        let mut users = Vec::with_capacity(k);
        for u in 0..k {
            let o = SLOT_COLUMNS.len() + u * USER_COLUMNS.len();
            users.push(UserRecord {
                position: Point2::new(f(o)?, f(o + 1)?),
                mode: parse_mode(&rec[o + 2])?,
                los: match &rec[o + 3] {
                    "1" => true,
                    "0" => false,
                    other => return Err(Error::Parse(format!("bad LoS flag `{other}`"))),
                },
                bandwidth: f(o + 4)?,
                power: f(o + 5)?,
                slack: f(o + 6)?,
                rate: f(o + 7)?,
            });
        }
        rows.push(SlotRecord {
            slot: rec[0].parse().map_err(|_| Error::Parse(format!("bad slot `{}`", &rec[0])))?,
            uav: Point2::new(f(1)?, f(2)?),
            sum_rate: f(3)?,
            reward: f(4)?,
            status: AllocStatus::parse(&rec[5]).ok_or_else(|| Error::Parse(format!("bad status `{}`", &rec[5])))?,
            users,
        });
    }
    Ok(EpisodeTrace { num_users: k, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub seed: u64,
    pub mean_sum_rate: f64,
    pub jain_index: f64,
    pub qos_violation_fraction: f64,
    pub los_fraction: f64,
    pub fronthaul_binding_fraction: f64,
    pub infeasible_slots: usize,
    pub episode_length: usize,
    pub total_reward: f64,
}

impl SummaryRow {
    pub fn new(label: impl Into<String>, seed: u64, m: &MetricsSummary) -> Self {
        Self {
            label: label.into(),
            seed,
            mean_sum_rate: m.mean_sum_rate,
            jain_index: m.jain_index,
            qos_violation_fraction: m.qos_violation_fraction,
            los_fraction: m.los_fraction,
            fronthaul_binding_fraction: m.fronthaul_binding_fraction,
            infeasible_slots: m.infeasible_slots,
            episode_length: m.episode_length,
            total_reward: m.total_reward,
        }
    }
}

/// One cell of the altitude/speed sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub altitude: f64,
    pub v_max: f64,
    /// Mean sum rate over slots and seeds, bit/s.
    pub mean_throughput: f64,
    pub seeds: usize,
}

/// One slot of one allocator arm in the fronthaul comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocatorPoint {
    pub c_fronthaul: f64,
    pub allocator: String,
    pub slot: usize,
    /// Sum rate averaged over the episodes that reached this slot.
    pub mean_sum_rate: f64,
    pub episodes: usize,
    /// Episodes whose allocation was infeasible in this slot.
    pub infeasible: usize,
}

/// One slot of a throughput-versus-time curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    /// `altitude` or `users`.
    pub variable: String,
    pub value: f64,
    pub slot: usize,
    pub mean_sum_rate: f64,
    pub episodes: usize,
}

/// One training iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_length: f64,
}

/// Writes rows with a header; an empty slice yields a header-only file.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub const SUMMARY_HEADER: &[&str] = &[
    "label",
    "seed",
    "mean_sum_rate",
    "jain_index",
    "qos_violation_fraction",
    "los_fraction",
    "fronthaul_binding_fraction",
    "infeasible_slots",
    "episode_length",
    "total_reward",
];
pub const GRID_HEADER: &[&str] = &["altitude", "v_max", "mean_throughput", "seeds"];
pub const ALLOCATOR_HEADER: &[&str] = &["c_fronthaul", "allocator", "slot", "mean_sum_rate", "episodes", "infeasible"];
pub const TIME_HEADER: &[&str] = &["variable", "value", "slot", "mean_sum_rate", "episodes"];
pub const CURVE_HEADER: &[&str] = &["iteration", "mean_reward", "mean_length"];
