//! `alloc-bench`: every allocator on slot instances from a TOML file.
//!
//! ```toml
//! [[instance]]
//! a = [2.0e9, 5.0e8, 7.5e10]   # Hz/W, one entry per user
//!
//! [[instance]]
//! a = [1.0e9, 1.0e9]
//! [instance.params]            # optional, defaults to the scenario's
//! b_total = 20e6
//! p_total = 2.0
//! r_min = 1e6
//! c_fronthaul = 200e6
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use uavqos::allocation::{allocate_slot, concave_oracle, dual_ascent_with, AllocParams, SlotAllocation};
use uavqos::harness::export::write_rows;
use uavqos::harness::ScenarioConfig;
use uavqos::Error;

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Instance file.
    #[arg(long)]
    instances: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    instance: Vec<Instance>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Instance {
    /// Optional user count, checked against `a`.
    k: Option<usize>,
    a: Vec<f64>,
    params: Option<AllocParams>,
}

#[derive(Debug, Serialize)]
struct BenchRow {
    instance: usize,
    k: usize,
    allocator: &'static str,
    status: &'static str,
    sum_rate: f64,
    min_rate: f64,
    micros: u128,
}

const HEADER: &[&str] = &["instance", "k", "allocator", "status", "sum_rate", "min_rate", "micros"];

fn row(instance: usize, allocator: &'static str, f: impl FnOnce() -> uavqos::Result<SlotAllocation>) -> uavqos::Result<BenchRow> {
    let t = Instant::now();
    let out = f()?;
    let micros = t.elapsed().as_micros();
    Ok(BenchRow {
        instance,
        k: out.rate.len(),
        allocator,
        status: out.status.as_str(),
        sum_rate: out.sum_rate(),
        min_rate: out.rate.iter().copied().fold(f64::INFINITY, f64::min),
        micros,
    })
}

pub fn run(cfg: &ScenarioConfig, out_dir: &Path, args: &BenchArgs) -> uavqos::Result<()> {
    let src = std::fs::read_to_string(&args.instances)?;
    let file: InstanceFile = toml::from_str(&src).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, inst) in file.instance.iter().enumerate() {
        if let Some(k) = inst.k {
            if k != inst.a.len() {
                return Err(Error::Config {
                    field: format!("instance[{i}].k"),
                    reason: format!("k = {k} but a has {} entries", inst.a.len()),
                });
            }
        }
        let params = inst.params.clone().unwrap_or_else(|| cfg.allocation.clone());
        params.validate()?;
        let a = &inst.a;
        rows.push(row(i, "heuristic", || allocate_slot(a, &params))?);
        rows.push(row(i, "dual-ascent", || dual_ascent_with(a, &params, &cfg.dual_ascent))?);
        rows.push(row(i, "oracle", || concave_oracle(a, &params, &vec![0.0; a.len()]))?);
    }
    for r in &rows {
        eprintln!(
            "instance {} ({} users) {:<11} {:<10} {:.3} Mbit/s in {} us",
            r.instance,
            r.k,
            r.allocator,
            r.status,
            r.sum_rate / 1e6,
            r.micros
        );
    }
    write_rows(&out_dir.join("alloc_bench.csv"), &rows, HEADER)
}
