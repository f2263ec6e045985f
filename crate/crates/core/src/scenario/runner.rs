//! Drives realizations of a [`ScenarioConfig`]: cluster-count logs over
//! the run horizon and per-instant statistics.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::log::RunLog;
use super::rng::RngStreams;
use crate::channel::ChannelModel;
use crate::cir::ChannelSnapshot;
use crate::error::Result;
use crate::stats::{self, PdpMatrix, PdpRow, StationaryInterval};

/// Evolution stream of realization `index` under `config`.
pub fn streams(config: &ScenarioConfig) -> RngStreams {
    RngStreams::new(config.run.seed)
}

/// One realization over the run horizon. Cluster counts are logged at
/// `t = 0` and every `log_spacing_m` of travel (every step when the Rx is
/// at rest). The step grid is split at log points and at every requested
/// instant, where a snapshot digest is logged; snapshots are returned when
/// `capture` is set.
pub fn cluster_log(
    config: &ScenarioConfig,
    model: &ChannelModel,
    index: u64,
    capture: bool,
) -> Result<(RunLog, Vec<ChannelSnapshot>)> {
    let step = config.run.step_ms * 1e-3;
    let horizon = config.run.duration_s;
    let speed = config.speed();
    let log_period = if speed > 0.0 { config.run.log_spacing_m / speed } else { step };
    let mut instants: Vec<f64> = config.run.instants_s.iter().copied().filter(|t| *t <= horizon).collect();
    instants.sort_by(f64::total_cmp);
    instants.dedup();

    let mut r = model.realize(streams(config).stream(index));
    let mut log = RunLog::new(index);
    let mut snaps = Vec::new();
    let mut next_instant = instants.iter().peekable();
    log.push(r.record())?;
    let (mut k_step, mut k_log) = (1u64, 1u64);
    loop {
        while let Some(&&t) = next_instant.peek() {
            if t > r.time() + 1e-12 {
                break;
            }
            let snap = r.snapshot();
            log.push_snapshot(&snap)?;
            if capture {
                snaps.push(snap);
            }
            next_instant.next();
        }
        if r.time() + 1e-12 >= horizon {
            break;
        }
        let step_end = (k_step as f64 * step).min(horizon);
        let log_point = k_log as f64 * log_period;
        let mut target = step_end.min(log_point);
        if let Some(&&t) = next_instant.peek() {
            target = target.min(t);
        }
        r.step(target - r.time());
        if target >= step_end {
            k_step += 1;
        }
        if target >= log_point {
            k_log += 1;
            log.push(r.record())?;
        }
    }
    Ok((log, snaps))
}

/// Logs of every realization, in index order.
pub fn cluster_logs(config: &ScenarioConfig) -> Result<Vec<RunLog>> {
    let model = config.channel_model()?;
    (0..config.run.realizations as u64)
        .into_par_iter()
        .map(|i| cluster_log(config, &model, i, false).map(|(log, _)| log))
        .collect()
}

/// Statistics of one realization anchored at one instant.
#[derive(Debug, Clone)]
pub struct RealizationStats {
    pub acf: Vec<Complex64>,
    pub ccf: Vec<Complex64>,
    pub fcf: Vec<Complex64>,
    pub pdp: PdpRow,
    pub interval: StationaryInterval,
}

/// Ensemble statistics at one instant: correlation functions and PDP
/// averaged over realizations, one stationary interval per realization.
#[derive(Debug, Clone)]
pub struct InstantStats {
    pub time: f64,
    pub dt_grid: Vec<f64>,
    pub delta_grid_lambda: Vec<f64>,
    pub df_grid: Vec<f64>,
    pub acf: Vec<Complex64>,
    pub ccf: Vec<Complex64>,
    pub fcf: Vec<Complex64>,
    pub pdp: PdpRow,
    pub intervals: Vec<StationaryInterval>,
}

/// The realization is evolved to `t` on the run step grid, the closed-form
/// correlations of element pair (0, 0) are taken there, and it is then
/// stepped across the stationary-interval window.
pub fn realization_stats(
    config: &ScenarioConfig,
    model: &ChannelModel,
    index: u64,
    t: f64,
) -> Result<RealizationStats> {
    let mut r = model.realize(streams(config).stream(index));
    r.advance_to(t, config.run.step_ms * 1e-3);
    let f = 0.0;
    let tx = model.tx_array.element_positions[0];
    let rx = r.rx_array().element_positions[0];
    let lam = model.wavelength();
    let deltas: Vec<f64> = config.delta_grid_lambda().iter().map(|d| d * lam).collect();
    let view = r.view();
    let acf = stats::acf(&view, tx, rx, r.time(), f, &config.dt_grid());
    let ccf = stats::spatial_ccf(&view, tx, rx, r.time(), f, &deltas);
    let fcf = stats::fcf(&view, tx, rx, r.time(), f, &config.df_grid());

    let bin = config.delay_bin();
    let start = r.time();
    let mut rows = Vec::new();
    for (k, offset) in config.si_grid().iter().enumerate() {
        if k > 0 {
            r.advance_to(start + offset, config.stats.si_step_us * 1e-6);
        }
        let mut row = r.pdp(bin)?;
        row.time = start + offset;
        rows.push(row);
    }
    let pdp = rows[0].clone();
    let matrix = PdpMatrix::from_rows(&rows)?;
    let interval = stats::stationary_interval(&matrix, start, config.stats.si_threshold)?;
    Ok(RealizationStats {
        acf,
        ccf,
        fcf,
        pdp,
        interval,
    })
}

pub fn instant_stats(config: &ScenarioConfig, t: f64) -> Result<InstantStats> {
    let model = config.channel_model()?;
    let per: Vec<RealizationStats> = (0..config.run.realizations as u64)
        .into_par_iter()
        .map(|i| realization_stats(config, &model, i, t))
        .collect::<Result<_>>()?;
    let collect = |f: fn(&RealizationStats) -> &Vec<Complex64>| {
        let rows: Vec<Vec<Complex64>> = per.iter().map(|p| f(p).clone()).collect();
        stats::mean_series(&rows)
    };
    Ok(InstantStats {
        time: t,
        dt_grid: config.dt_grid(),
        delta_grid_lambda: config.delta_grid_lambda(),
        df_grid: config.df_grid(),
        acf: collect(|p| &p.acf),
        ccf: collect(|p| &p.ccf),
        fcf: collect(|p| &p.fcf),
        pdp: mean_pdp(per.iter().map(|p| &p.pdp), t),
        intervals: per.iter().map(|p| p.interval).collect(),
    })
}

fn mean_pdp<'a>(rows: impl Iterator<Item = &'a PdpRow>, time: f64) -> PdpRow {
    let mut bins: BTreeMap<i64, stats::CompensatedSum> = BTreeMap::new();
    let mut n = 0usize;
    let mut width = 0.0;
    for row in rows {
        n += 1;
        width = row.bin_width;
        for (i, p) in row.power.iter().enumerate() {
            bins.entry(row.first_bin + i as i64).or_default().add(*p);
        }
    }
    let first = bins.keys().next().copied().unwrap_or(0);
    let last = bins.keys().next_back().copied().unwrap_or(-1);
    let mut power = vec![0.0; (last - first + 1).max(0) as usize];
    for (k, s) in bins {
        power[(k - first) as usize] = s.value() / n.max(1) as f64;
    }
    PdpRow {
        time,
        bin_width: width,
        first_bin: first,
        power,
    }
}
