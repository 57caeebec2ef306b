//! Experiment sweeps: altitude/speed grids, allocator comparison under
//! several fronthaul capacities, and throughput-versus-time curves.
//!
//! Every sweep is a set of independent seeded episodes. With the `parallel`
//! feature they run on the rayon pool; results are sorted by cell key, so
//! the output does not depend on scheduling.

use super::export::{AllocatorPoint, GridCell, TimePoint};
use super::runner::{run_episode, EpisodeTrace, OnInfeasible, PolicyChoice};
use super::scenario::{AllocatorKind, ScenarioConfig};
use crate::allocation::AllocStatus;
use crate::error::{Error, Result};

fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

fn check_policy(cfg: &ScenarioConfig, policy: PolicyChoice) -> Result<()> {
    if let PolicyChoice::Trained(p) = policy {
        let want = 2 + 2 * cfg.num_users();
        if p.layout.state_dim != want {
            return Err(Error::config(
                "policy",
                format!("policy expects {} users, scenario has {}", (p.layout.state_dim - 2) / 2, cfg.num_users()),
            ));
        }
    }
    Ok(())
}

/// Mean sum rate per `(altitude, v_max)` cell, averaged over slots and then
/// over seeds. Cells come out sorted by altitude, then speed.
pub fn sweep_altitude_speed(
    cfg: &ScenarioConfig,
    altitudes: &[f64],
    speeds: &[f64],
    seeds: &[u64],
    policy: PolicyChoice,
) -> Result<Vec<GridCell>> {
    check_policy(cfg, policy)?;
    let mut cells = Vec::new();
    for &h in altitudes {
        for &v in speeds {
            let mut c = cfg.clone();
            c.uav.altitude = h;
            c.uav.v_max = v;
            c.validate()?;
            cells.push(c);
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let results = par_map(&jobs, |&(i, seed)| {
        run_episode(&cells[i], policy, seed, OnInfeasible::Terminate).map(|(_, m)| (i, m.mean_sum_rate))
    });
    let mut sums = vec![0.0; cells.len()];
    for r in results {
        let (i, rate) = r?;
        sums[i] += rate;
    }
    let mut grid: Vec<GridCell> = cells
        .iter()
        .zip(sums)
        .map(|(c, s)| GridCell {
            altitude: c.uav.altitude,
            v_max: c.uav.v_max,
            mean_throughput: if seeds.is_empty() { 0.0 } else { s / seeds.len() as f64 },
            seeds: seeds.len(),
        })
        .collect();
    grid.sort_by(|a, b| a.altitude.total_cmp(&b.altitude).then(a.v_max.total_cmp(&b.v_max)));
    Ok(grid)
}

/// Per-episode tallies from the allocator comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocatorRun {
    pub c_fronthaul: f64,
    pub allocator: AllocatorKind,
    pub seed: u64,
    pub infeasible_slots: usize,
    pub relaxed_slots: usize,
    pub trace: EpisodeTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocatorComparison {
    /// Per-slot mean sum rate, sorted by capacity, allocator, slot.
    pub series: Vec<AllocatorPoint>,
    /// Sorted by capacity, allocator, seed.
    pub runs: Vec<AllocatorRun>,
}

/// Runs the same seeded episodes once with each allocator. Infeasible slots
/// are recorded and the episode continues, so both arms span the full
/// horizon and see identical user motion and fading.
pub fn compare_allocators(
    cfg: &ScenarioConfig,
    capacities: &[f64],
    seeds: &[u64],
    policy: PolicyChoice,
) -> Result<AllocatorComparison> {
    check_policy(cfg, policy)?;
    let arms = [AllocatorKind::Heuristic, AllocatorKind::DualAscent];
    let mut jobs = Vec::new();
    for &c_f in capacities {
        for kind in arms {
            for &seed in seeds {
                jobs.push((c_f, kind, seed));
            }
        }
    }
    let results = par_map(&jobs, |&(c_f, kind, seed)| -> Result<AllocatorRun> {
        let mut c = cfg.clone();
        c.allocation.c_fronthaul = c_f;
        c.allocator = kind;
        c.validate()?;
        let (trace, _) = run_episode(&c, policy, seed, OnInfeasible::Continue)?;
        let count = |s| trace.rows.iter().filter(|r| r.status == s).count();
        Ok(AllocatorRun {
            c_fronthaul: c_f,
            allocator: kind,
            seed,
            infeasible_slots: count(AllocStatus::Infeasible),
            relaxed_slots: count(AllocStatus::Relaxed),
            trace,
        })
    });
    let mut runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| {
        a.c_fronthaul
            .total_cmp(&b.c_fronthaul)
            .then(a.allocator.as_str().cmp(b.allocator.as_str()))
            .then(a.seed.cmp(&b.seed))
    });

    let mut series = Vec::new();
    for group in runs.chunk_by(|a, b| a.c_fronthaul == b.c_fronthaul && a.allocator == b.allocator) {
        let horizon = group.iter().map(|r| r.trace.rows.len()).max().unwrap_or(0);
        for slot in 0..horizon {
            let rows: Vec<_> = group.iter().filter_map(|r| r.trace.rows.get(slot)).collect();
            series.push(AllocatorPoint {
                c_fronthaul: group[0].c_fronthaul,
                allocator: group[0].allocator.as_str().to_string(),
                slot: slot + 1,
                mean_sum_rate: rows.iter().map(|r| r.sum_rate).sum::<f64>() / rows.len() as f64,
                episodes: rows.len(),
                infeasible: rows.iter().filter(|r| r.status == AllocStatus::Infeasible).count(),
            });
        }
    }
    Ok(AllocatorComparison { series, runs })
}

/// The quantity varied by [`sweep_time_series`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeVariable {
    Altitude,
    Users,
}

impl TimeVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeVariable::Altitude => "altitude",
            TimeVariable::Users => "users",
        }
    }
}

/// Per-slot sum rate averaged over seeds, for each altitude or user count.
/// Episodes stop at an infeasible slot, so later slots may average fewer
/// episodes.
pub fn sweep_time_series(
    cfg: &ScenarioConfig,
    variable: TimeVariable,
    values: &[f64],
    seeds: &[u64],
    policy: PolicyChoice,
) -> Result<Vec<TimePoint>> {
    let mut cells = Vec::with_capacity(values.len());
    for &v in values {
        let c = match variable {
            TimeVariable::Altitude => {
                let mut c = cfg.clone();
                c.uav.altitude = v;
                c
            }
            TimeVariable::Users => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::config("users", format!("user count must be a positive integer, got {v}")));
                }
                cfg.with_users(v as usize)
            }
        };
        c.validate()?;
        check_policy(&c, policy)?;
        cells.push(c);
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let results = par_map(&jobs, |&(i, seed)| {
        run_episode(&cells[i], policy, seed, OnInfeasible::Terminate).map(|(t, _)| (i, t))
    });
    let mut totals: Vec<Vec<(f64, usize)>> = cells.iter().map(|c| vec![(0.0, 0); c.time.horizon]).collect();
    for r in results {
        let (i, trace) = r?;
        for (acc, row) in totals[i].iter_mut().zip(&trace.rows) {
            acc.0 += row.sum_rate;
            acc.1 += 1;
        }
    }
    let mut points = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        for (slot, &(sum, n)) in totals[i].iter().enumerate() {
            if n > 0 {
                points.push(TimePoint {
                    variable: variable.as_str().to_string(),
                    value: v,
                    slot: slot + 1,
                    mean_sum_rate: sum / n as f64,
                    episodes: n,
                });
            }
        }
    }
    points.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.slot.cmp(&b.slot)));
    Ok(points)
}
