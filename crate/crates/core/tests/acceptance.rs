//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use tubechan::cir::transfer_at;
use tubechan::evolution::{
    eam_discretize, mean_new_clusters, scattering_coefficient, survival_probability, update_ray_power,
    update_virtual_delay,
};
use tubechan::geometry::wall_point_from_angles;
use tubechan::scenario::commands::{self, Invocation};
use tubechan::scenario::{cluster_logs, instant_stats, streams, RngStreams, ScenarioConfig, DOMAIN_PHASES};
use tubechan::stats::{self, mean_cluster_counts, median, CorrelationQuery};
use tubechan::{Forcing, PathKind};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn tube() -> ScenarioConfig {
    ScenarioConfig::preset("tube").expect("preset")
}

fn rms(a: &[Complex64], b: &[Complex64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    (s / a.len() as f64).sqrt()
}

fn ensemble_agreement() -> Outcome {
    const REALIZATIONS: usize = 10_000;
    const TOLERANCE: f64 = 0.05;
    let config = tube();
    let model = config.channel_model().expect("model");
    let lam = model.wavelength();
    let seeds = streams(&config);
    let mut worst = 0.0f64;
    let mut states = 0;
    for index in 0..64u64 {
        let r = model.realize(seeds.stream(index));
        if r.clusters().is_empty() {
            continue;
        }
        let view = r.view();
        let tx = model.tx_array.element_positions[0];
        let rx = r.rx_array().element_positions[0];
        let mut queries: Vec<CorrelationQuery> = config
            .dt_grid()
            .iter()
            .map(|&dt| CorrelationQuery::temporal(0.0, 0.0, dt))
            .collect();
        let n_dt = queries.len();
        queries.extend(
            config
                .delta_grid_lambda()
                .iter()
                .map(|&d| CorrelationQuery::spatial_rx(0.0, 0.0, d * lam)),
        );
        let closed = stats::stfcf_closed_series(&view, tx, rx, &queries);
        let phases = RngStreams::new(config.run.seed + index).with_domain(DOMAIN_PHASES);
        let mc = stats::stfcf_ensemble(&view, tx, rx, &queries, REALIZATIONS, &phases).expect("ensemble");
        worst = worst.max(rms(&closed[..n_dt], &mc[..n_dt]));
        worst = worst.max(rms(&closed[n_dt..], &mc[n_dt..]));
        states += 1;
        if states == 3 {
            break;
        }
    }
    outcome(
        states == 3 && worst <= TOLERANCE,
        format!("{states} cluster states, {REALIZATIONS} realizations, worst RMS {worst:.4} (limit {TOLERANCE})"),
    )
}

fn speed_ordering() -> Outcome {
    let mut lags = Vec::new();
    for v in [540.0, 1080.0, 2160.0] {
        let mut config = tube();
        config.set("motion.v_kmh", &v.to_string()).expect("v");
        config.set("stats.dt_step_us", "0.25").expect("step");
        config.set("stats.dt_span_ms", "0.1").expect("span");
        config.run.realizations = 100;
        let model = config.channel_model().expect("model");
        let grid = config.dt_grid();
        let seeds = streams(&config);
        let series: Vec<Vec<Complex64>> = (0..config.run.realizations as u64)
            .map(|i| {
                let r = model.realize(seeds.stream(i));
                let tx = model.tx_array.element_positions[0];
                let rx = r.rx_array().element_positions[0];
                stats::acf(&r.view(), tx, rx, 0.0, 0.0, &grid)
            })
            .collect();
        lags.push(stats::first_crossing_below(&grid, &stats::mean_series(&series), 0.5));
    }
    let shown: Vec<String> = lags
        .iter()
        .map(|l| l.map_or("none".into(), |x| format!("{:.2} us", x * 1e6)))
        .collect();
    let pass = match (lags[0], lags[1], lags[2]) {
        (Some(a), Some(b), Some(c)) => a > b && b > c,
        _ => false,
    };
    outcome(pass, format!("|ACF|<0.5 at 540/1080/2160 km/h: {}", shown.join(", ")))
}

fn si_median(v_kmh: f64) -> Option<f64> {
    let mut config = tube();
    config.set("motion.v_kmh", &v_kmh.to_string()).expect("v");
    config.run.realizations = 100;
    let s = instant_stats(&config, 0.0).expect("stats");
    let samples: Vec<f64> = s.intervals.iter().map(|i| i.seconds).collect();
    median(&samples)
}

fn stationary_interval() -> Outcome {
    let fast = si_median(1080.0);
    let slow = si_median(360.0);
    let pass = match (fast, slow) {
        (Some(f), Some(s)) => (1e-5..=2e-4).contains(&f) && s > f,
        _ => false,
    };
    let ms = |x: Option<f64>| x.map_or("none".into(), |x| format!("{:.4} ms", x * 1e3));
    outcome(
        pass,
        format!(
            "median at 1080 km/h {} (range [0.01, 0.2] ms), at 360 km/h {}",
            ms(fast),
            ms(slow)
        ),
    )
}

fn roughness_ordering() -> Outcome {
    let mut means = BTreeMap::new();
    for preset in ["tube", "tunnel", "open-hst-approx"] {
        let mut config = ScenarioConfig::preset(preset).expect("preset");
        config.run.realizations = 100;
        let logs = cluster_logs(&config).expect("logs");
        means.insert(preset, mean_cluster_counts(&logs).expect("means"));
    }
    let (tube, tunnel, open) = (&means["tube"], &means["tunnel"], &means["open-hst-approx"]);
    let n = tube.len().min(tunnel.len()).min(open.len());
    let mut violations = 0;
    for i in 0..n {
        let (a, b, c) = (tube[i].count, tunnel[i].count, open[i].count);
        if !(b < a && a < c && b < c) {
            violations += 1;
        }
    }
    let pass = n > 0 && violations == 0 && tube.len() == tunnel.len() && tube.len() == open.len();
    outcome(pass, format!("{n} logged distances, {violations} with tunnel < tube < open-hst-approx violated"))
}

fn invariants() -> Outcome {
    let mut failures: Vec<&str> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let radius = 2.0;

    let mut wall = 0.0f64;
    for _ in 0..10_000 {
        let az = rng.random_range(-PI..PI);
        let el = rng.random_range(-PI / 2.0..PI / 2.0);
        if let Ok(p) = wall_point_from_angles(az, el, radius) {
            wall = wall.max((p.y * p.y + p.z * p.z - radius * radius).abs());
        }
    }
    let config = tube();
    let model = config.channel_model().expect("model");
    let axis = model.scene.axis_height;
    let vmax = model.velocity.norm() / model.wavelength();
    let (mut power_err, mut doppler_excess) = (0.0f64, 0.0f64);
    for index in 0..10u64 {
        let mut r = model.realize(streams(&config).stream(index));
        for _ in 0..40 {
            for c in r.clusters() {
                for p in c.rays.iter().flat_map(|ray| [ray.tx_wall, ray.rx_wall]) {
                    let dz = p.z - axis;
                    wall = wall.max((p.y * p.y + dz * dz - radius * radius).abs());
                }
            }
            for e in &r.snapshot().entries {
                power_err = power_err.max((e.total_power() - 1.0).abs());
                for c in &e.components {
                    doppler_excess = doppler_excess.max(c.doppler.abs() - vmax);
                }
            }
            r.step(0.02);
        }
    }
    if wall >= 1e-9 * radius * radius {
        failures.push("wall placement");
    }
    if power_err > 1e-9 {
        failures.push("tap-power sum");
    }
    if doppler_excess > 1e-9 * vmax {
        failures.push("Doppler bound");
    }

    for _ in 0..1000 {
        let w = rng.random_range(0.01..1.0);
        let tau = rng.random_range(1e-7..3e-6);
        let off = rng.random_range(0.0..5e-8);
        if update_ray_power(w, tau, tau, off) != w {
            failures.push("power recursion identity");
            break;
        }
    }
    let (vd, fresh, relax) = (4e-8, 1e-8, 1e-3);
    if update_virtual_delay(vd, 0.0, relax, fresh) != vd {
        failures.push("virtual delay at zero step");
    }
    if (update_virtual_delay(vd, 1e3 * relax, relax, fresh) - fresh).abs() > 1e-12 * fresh {
        failures.push("virtual delay at long step");
    }

    let lam = model.wavelength();
    let rho: Vec<f64> = (0..50)
        .map(|i| scattering_coefficient(i as f64 * 1e-4, 0.3, lam))
        .collect();
    if rho[0] != 1.0 || rho.windows(2).any(|w| w[1] > w[0]) {
        failures.push("scattering coefficient");
    }

    let params = model.params.clone();
    let d0 = model.scene.initial_distance();
    if mean_new_clusters(1.0, 100.0, d0, 1.0, &params) != 0.0
        || mean_new_clusters(survival_probability(0.01, 300.0, &params), d0, d0, 1.0, &params) != 0.0
    {
        failures.push("birth mean boundary zeros");
    }

    let detail = format!(
        "wall residual {wall:.2e}, power error {power_err:.2e}, Doppler excess {doppler_excess:.2e} Hz{}",
        if failures.is_empty() {
            String::new()
        } else {
            format!("; failed: {}", failures.join(", "))
        }
    );
    outcome(failures.is_empty(), detail)
}

fn birth_death_oracle() -> (bool, String) {
    const SURVIVAL: f64 = 0.9;
    const BIRTHS: f64 = 2.0;
    const STEPS: usize = 20_000;
    const BURN_IN: usize = 200;
    let mut config = tube();
    config.set("motion.v_kmh", "0").expect("v");
    let model = config.channel_model().expect("model");
    let mut r = model.realize(ChaCha8Rng::seed_from_u64(5)).with_forcing(Forcing {
        survival: Some(SURVIVAL),
        birth_mean: Some(BIRTHS),
    });
    let mut full = 0.0;
    for k in 0..STEPS {
        r.step(1e-4);
        if k >= BURN_IN {
            full += r.clusters().len() as f64;
        }
    }
    full /= (STEPS - BURN_IN) as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let births = Poisson::new(BIRTHS).expect("mean");
    let mut n = 0u64;
    let mut scalar = 0.0;
    for k in 0..STEPS {
        n = Binomial::new(n, SURVIVAL).expect("p").sample(&mut rng) + births.sample(&mut rng) as u64;
        if k >= BURN_IN {
            scalar += n as f64;
        }
    }
    scalar /= (STEPS - BURN_IN) as f64;
    let stationary = BIRTHS / (1.0 - SURVIVAL);
    let rel = (full - scalar).abs() / stationary;
    (rel <= 0.10, format!("cluster count {full:.2} vs scalar {scalar:.2} ({:.1}% of {stationary:.1})", rel * 100.0))
}

fn phase_slope_oracle() -> (bool, String) {
    let config = tube();
    let model = config.channel_model().expect("model");
    let r = model.realize(streams(&config).stream(0));
    let snap = r.snapshot();
    let df = 1e3;
    let f0 = 1e8;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for e in &snap.entries {
        for c in e.components.iter().take(40) {
            let one = [c.clone()];
            let lo = transfer_at(&one, f0 - df);
            let hi = transfer_at(&one, f0 + df);
            let slope = (hi * lo.conj()).arg() / (2.0 * df);
            let expected = -2.0 * PI * c.delay;
            worst = worst.max(((slope - expected) / expected).abs());
            checked += 1;
        }
    }
    let los_only: Vec<_> = snap.entries[0]
        .components
        .iter()
        .filter(|c| matches!(c.kind, PathKind::Los))
        .cloned()
        .collect();
    let lo = transfer_at(&los_only, f0 - df);
    let hi = transfer_at(&los_only, f0 + df);
    let slope = (hi * lo.conj()).arg() / (2.0 * df);
    worst = worst.max(((slope + 2.0 * PI * los_only[0].delay) / (2.0 * PI * los_only[0].delay)).abs());
    (worst <= 1e-3, format!("{checked} components, worst phase-slope error {:.2e}", worst))
}

fn von_mises_pdf(x: f64, kappa: f64) -> f64 {
    (kappa * (x.cos() - 1.0)).exp()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn numeric_quantile(p: f64, kappa: f64) -> f64 {
    let total = simpson(|x| von_mises_pdf(x, kappa), -PI, PI, 20_000);
    let cdf = |x: f64| simpson(|y| von_mises_pdf(y, kappa), -PI, x, 20_000) / total;
    let (mut lo, mut hi) = (-PI, PI);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn eam_oracle() -> (bool, String) {
    let mut worst = 0.0f64;
    for (count, kappa) in [(10usize, 6.0), (7, 2.0), (20, 15.0)] {
        let offsets = eam_discretize(count, kappa);
        let mut sorted = offsets.to_vec();
        sorted.sort_by(f64::total_cmp);
        for (l, q) in sorted.iter().enumerate() {
            let p = (l as f64 + 0.5) / count as f64;
            worst = worst.max((q - numeric_quantile(p, kappa)).abs());
        }
    }
    (worst <= 1e-8, format!("worst EAM quantile error {worst:.2e} rad"))
}

fn oracles() -> Outcome {
    let parts = [birth_death_oracle(), phase_slope_oracle(), eam_oracle()];
    let pass = parts.iter().all(|(p, _)| *p);
    let detail: Vec<String> = parts.into_iter().map(|(_, d)| d).collect();
    outcome(pass, detail.join("; "))
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("read dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).expect("prefix").to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).expect("read"));
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().expect("tmp"), tempfile::tempdir().expect("tmp")];
    for d in &dirs {
        let inv = Invocation {
            seed: Some(7),
            out: d.path().to_path_buf(),
            ..Invocation::default()
        };
        if let Err(e) = commands::compare(&inv) {
            return outcome(false, format!("compare failed: {e}"));
        }
    }
    let (a, b) = (tree(dirs[0].path()), tree(dirs[1].path()));
    let bytes: usize = a.values().map(Vec::len).sum();
    outcome(
        !a.is_empty() && a == b,
        format!("{} files, {bytes} bytes, identical: {}", a.len(), a == b),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("ensemble vs closed-form ACF/CCF", ensemble_agreement),
        ("ACF decay ordering by speed", speed_ordering),
        ("stationary interval magnitude", stationary_interval),
        ("cluster count ordering by roughness", roughness_ordering),
        ("invariant suite", invariants),
        ("oracle equivalence", oracles),
        ("compare determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {} [{:.1} s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
