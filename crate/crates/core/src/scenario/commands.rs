//! The `run`, `stats`, `compare` and `sweep` drivers behind the command
//! line. Each writes its output tree under [`Invocation::out`]; results are
//! merged in realization order before a single writer touches the files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{canonical_key, load_config_with, parse_override, ConfigError, ScenarioConfig, PRESETS};
use super::output::{fmt_f64, write_snapshot_json, Provenance, Table};
use super::runner::{cluster_log, cluster_logs, instant_stats};
use crate::error::{Error, Result};
use crate::stats::{empirical_ccdf, first_crossing_below, mean_cluster_counts, median, CountPoint};

/// Everything a command needs besides its own arguments. Configuration is
/// layered as preset, then `config_text`, then the flag overrides
/// (`seed`, `realizations`, `instants`), then `overrides` in order.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub preset: Option<String>,
    pub config_text: Option<String>,
    /// `key=value` pairs.
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    /// Comma-separated instants, s.
    pub instants: Option<String>,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ScenarioConfig,
    pub provenance: Provenance,
}

impl Invocation {
    pub fn load(&self) -> Result<Loaded> {
        self.load_with(None, &[])
    }

    fn load_with(&self, preset: Option<&str>, extra: &[(String, String)]) -> Result<Loaded> {
        let preset = preset.or(self.preset.as_deref());
        if preset.is_none() && self.config_text.is_none() {
            return Err(ConfigError::Validation {
                key: "preset".into(),
                constraint: format!("give a preset or a config file; known presets: {}", PRESETS.join(", ")),
            }
            .into());
        }
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(s) = self.seed {
            pairs.push(("run.seed".into(), s.to_string()));
        }
        if let Some(n) = self.realizations {
            pairs.push(("run.realizations".into(), n.to_string()));
        }
        if let Some(i) = &self.instants {
            pairs.push(("run.instants_s".into(), i.clone()));
        }
        let mut shown = Vec::new();
        let parsed: Vec<(String, String)> = self
            .overrides
            .iter()
            .map(|o| parse_override(o))
            .collect::<std::result::Result<_, _>>()?;
        for (k, v) in parsed.iter().chain(extra) {
            let full = canonical_key(k)?;
            shown.push(format!("{full}={v}"));
            pairs.push((full.to_string(), v.clone()));
        }
        let config = load_config_with(self.config_text.as_deref().unwrap_or(""), preset, &pairs)?;
        let provenance = Provenance {
            seed: config.run.seed,
            config_sha256: config.digest(),
            overrides: shown,
        };
        Ok(Loaded { config, provenance })
    }
}

fn write_config(dir: &Path, config: &ScenarioConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), config.to_text())?;
    Ok(())
}

fn counts_table(points: &[CountPoint]) -> Table {
    let mut table = Table::new(&["t_s", "distance_m", "count"]);
    for p in points {
        table.push_numbers(&[p.time, p.distance, p.count]);
    }
    table
}

/// Ensemble-mean `clusters.csv` over the run horizon, and the snapshot of
/// realization 0 at each instant (`snapshot.json`, or `snapshot_<i>.json`
/// when there are several).
pub fn run(loaded: &Loaded, dir: &Path) -> Result<()> {
    let config = &loaded.config;
    let model = config.channel_model()?;
    eprintln!("run: {} realizations over {} s", config.run.realizations, config.run.duration_s);
    let results: Vec<_> = (0..config.run.realizations as u64)
        .into_par_iter()
        .map(|i| cluster_log(config, &model, i, i == 0))
        .collect::<Result<_>>()?;
    let logs: Vec<_> = results.iter().map(|(l, _)| l.clone()).collect();
    write_config(dir, config)?;
    counts_table(&mean_cluster_counts(&logs)?).write(&dir.join("clusters.csv"), &loaded.provenance)?;
    let snaps = &results[0].1;
    for (i, snap) in snaps.iter().enumerate() {
        let name = if snaps.len() == 1 {
            "snapshot.json".to_string()
        } else {
            format!("snapshot_{i}.json")
        };
        write_snapshot_json(&dir.join(name), snap, &loaded.provenance)?;
    }
    eprintln!("run: wrote {}", dir.display());
    Ok(())
}

/// What `stats` found, besides the files it wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsSummary {
    /// Stationary intervals pooled over instants and realizations, s.
    pub intervals: Vec<f64>,
    /// First lag with |ACF| < 0.5 at the first instant.
    pub acf_half_lag: Option<f64>,
}

/// acf.csv, ccf.csv, fcf.csv, pdp.csv and si_ccdf.csv at every instant.
pub fn stats(loaded: &Loaded, dir: &Path) -> Result<StatsSummary> {
    let config = &loaded.config;
    let mut acf = Table::new(&["t_s", "dt_s", "re", "im", "abs"]);
    let mut ccf = Table::new(&["t_s", "delta_over_lambda", "re", "im", "abs"]);
    let mut fcf = Table::new(&["t_s", "df_hz", "re", "im", "abs"]);
    let mut pdp = Table::new(&["t_s", "tau_s", "power"]);
    let mut intervals = Vec::new();
    let mut half = None;
    for (k, &t) in config.run.instants_s.iter().enumerate() {
        eprintln!("stats: t = {t} s, {} realizations", config.run.realizations);
        let s = instant_stats(config, t)?;
        for (dt, z) in s.dt_grid.iter().zip(&s.acf) {
            acf.push_complex(t, *dt, *z);
        }
        for (d, z) in s.delta_grid_lambda.iter().zip(&s.ccf) {
            ccf.push_complex(t, *d, *z);
        }
        for (df, z) in s.df_grid.iter().zip(&s.fcf) {
            fcf.push_complex(t, *df, *z);
        }
        for (i, p) in s.pdp.power.iter().enumerate() {
            let tau = (s.pdp.first_bin + i as i64) as f64 * s.pdp.bin_width;
            pdp.push_numbers(&[t, tau, *p]);
        }
        if k == 0 {
            half = first_crossing_below(&s.dt_grid, &s.acf, 0.5);
        }
        intervals.extend(s.intervals.iter().map(|i| i.seconds));
    }
    write_config(dir, config)?;
    acf.write(&dir.join("acf.csv"), &loaded.provenance)?;
    ccf.write(&dir.join("ccf.csv"), &loaded.provenance)?;
    fcf.write(&dir.join("fcf.csv"), &loaded.provenance)?;
    pdp.write(&dir.join("pdp.csv"), &loaded.provenance)?;
    ccdf_table(&intervals)?.write(&dir.join("si_ccdf.csv"), &loaded.provenance)?;
    eprintln!("stats: wrote {}", dir.display());
    Ok(StatsSummary {
        intervals,
        acf_half_lag: half,
    })
}

fn ccdf_table(samples: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["interval_s", "ccdf"]);
    if !samples.is_empty() {
        let c = empirical_ccdf(samples)?;
        for (v, p) in c.values.iter().zip(&c.ccdf) {
            t.push_numbers(&[*v, *p]);
        }
    }
    Ok(t)
}

/// Every preset under the same seed and overrides: per-preset `stats` and
/// `clusters.csv` in subdirectories, joined `clusters.csv` and
/// `si_ccdf.csv` at the top.
pub fn compare(inv: &Invocation) -> Result<()> {
    let mut counts: Vec<Vec<CountPoint>> = Vec::new();
    let mut si = Table::new(&["preset", "interval_s", "ccdf"]);
    let mut provenances = Vec::new();
    for preset in PRESETS {
        let loaded = inv.load_with(Some(preset), &[])?;
        eprintln!("compare: {preset}");
        let dir = inv.out.join(preset);
        let summary = stats(&loaded, &dir)?;
        let mean = mean_cluster_counts(&cluster_logs(&loaded.config)?)?;
        counts_table(&mean).write(&dir.join("clusters.csv"), &loaded.provenance)?;
        counts.push(mean);
        for row in ccdf_table(&summary.intervals)?.rows {
            let mut r = vec![preset.to_string()];
            r.extend(row);
            si.push(r);
        }
        provenances.push(loaded.provenance);
    }
    let provenance = Provenance::combined(&provenances);
    let mut joined = Table::new(&["t_s", "distance_m", "tube", "tunnel", "open_hst_approx"]);
    let rows = counts.iter().map(Vec::len).min().unwrap_or(0);
    for i in 0..rows {
        let base = counts[0][i];
        joined.push_numbers(&[base.time, base.distance, counts[0][i].count, counts[1][i].count, counts[2][i].count]);
    }
    joined.write(&inv.out.join("clusters.csv"), &provenance)?;
    si.write(&inv.out.join("si_ccdf.csv"), &provenance)?;
    eprintln!("compare: wrote {}", inv.out.display());
    Ok(())
}

/// `stats` and `run` for each value of `key`, in `<key>=<value>`
/// subdirectories, plus a `sweep.csv` summary.
pub fn sweep(inv: &Invocation, key: &str, values: &[String]) -> Result<()> {
    let key = canonical_key(key)?;
    if values.is_empty() {
        return Err(Error::Config(ConfigError::Validation {
            key: key.into(),
            constraint: "sweep needs at least one value".into(),
        }));
    }
    let mut summary = Table::new(&["value", "acf_half_lag_s", "si_median_s"]);
    let mut provenances = Vec::new();
    for v in values {
        let loaded = inv.load_with(None, &[(key.to_string(), v.clone())])?;
        let dir = inv.out.join(format!("{key}={v}"));
        eprintln!("sweep: {key} = {v}");
        let s = stats(&loaded, &dir)?;
        run(&loaded, &dir)?;
        let text = |x: Option<f64>| x.map(fmt_f64).unwrap_or_else(|| "nan".into());
        summary.push(vec![v.clone(), text(s.acf_half_lag), text(median(&s.intervals))]);
        provenances.push(loaded.provenance);
    }
    summary.write(&inv.out.join("sweep.csv"), &Provenance::combined(&provenances))?;
    Ok(())
}
