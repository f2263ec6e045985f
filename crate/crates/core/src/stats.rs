//! Channel statistics: correlation functions, power delay profiles,
//! stationary intervals, cluster-count series and empirical CCDFs.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cir::{BareComponent, ChannelSnapshot, ChannelView, PathKind};
use crate::error::{Error, Result};
use crate::geometry::Vector3;
use crate::scenario::{RngStreams, RunLog};

const TWO_PI: f64 = 2.0 * PI;

/// Realizations per ensemble work unit. Fixed so that the reduction order
/// does not depend on the thread count.
const ENSEMBLE_CHUNK: usize = 64;

/// One point of the space-time-frequency correlation function. Antenna
/// separations are measured along the array (tube) axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationQuery {
    pub delta_tx: f64,
    pub delta_rx: f64,
    pub df: f64,
    pub dt: f64,
    pub t: f64,
    pub f: f64,
}

impl CorrelationQuery {
    pub fn zero(t: f64, f: f64) -> Self {
        Self {
            t,
            f,
            ..Self::default()
        }
    }

    pub fn temporal(t: f64, f: f64, dt: f64) -> Self {
        Self { dt, ..Self::zero(t, f) }
    }

    pub fn spatial_rx(t: f64, f: f64, delta: f64) -> Self {
        Self {
            delta_rx: delta,
            ..Self::zero(t, f)
        }
    }

    pub fn frequency(t: f64, f: f64, df: f64) -> Self {
        Self { df, ..Self::zero(t, f) }
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn merge(&mut self, other: &ComplexSum) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

fn along_axis(p: Vector3, delta: f64) -> Vector3 {
    p + Vector3::new(delta, 0.0, 0.0)
}

/// Memoised bare components by link endpoints and time. Queries on one
/// grid share most of their ends.
struct EndCache<'v, 'a> {
    view: &'v ChannelView<'a>,
    map: HashMap<[u64; 7], Rc<[BareComponent]>>,
}

impl<'v, 'a> EndCache<'v, 'a> {
    fn new(view: &'v ChannelView<'a>) -> Self {
        Self {
            view,
            map: HashMap::new(),
        }
    }

    fn get(&mut self, tx: Vector3, rx: Vector3, t: f64) -> Rc<[BareComponent]> {
        let key = [tx.x, tx.y, tx.z, rx.x, rx.y, rx.z, t].map(f64::to_bits);
        self.map
            .entry(key)
            .or_insert_with(|| self.view.bare_components(tx, rx, t).into())
            .clone()
    }

    fn ends(&mut self, tx: Vector3, rx: Vector3, q: &CorrelationQuery) -> (Rc<[BareComponent]>, Rc<[BareComponent]>) {
        let a = self.get(tx, rx, q.t);
        let b = self.get(along_axis(tx, q.delta_tx), along_axis(rx, q.delta_rx), q.t + q.dt);
        (a, b)
    }
}

fn at_frequency(c: &BareComponent, f: f64) -> Complex64 {
    if f == 0.0 {
        c.amplitude
    } else {
        c.amplitude * Complex64::from_polar(1.0, -TWO_PI * c.delay * f)
    }
}

fn closed_form_from_ends(a: &[BareComponent], b: &[BareComponent], q: &CorrelationQuery) -> Complex64 {
    let mut cross = ComplexSum::default();
    let (mut pa, mut pb) = (CompensatedSum::default(), CompensatedSum::default());
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (at_frequency(x, q.f), at_frequency(y, q.f + q.df));
        cross.add(x * y.conj());
        pa.add(x.norm_sqr());
        pb.add(y.norm_sqr());
    }
    normalized(cross.value(), pa.value(), pb.value())
}

/// Closed-form STFCF of a frozen cluster state: LoS term plus the sum of
/// per-ray products, the random initial phases averaging out of every cross
/// term. Normalised by the endpoint powers so the zero query is 1.
pub fn stfcf_closed_form(view: &ChannelView<'_>, tx: Vector3, rx: Vector3, query: &CorrelationQuery) -> Complex64 {
    let (a, b) = EndCache::new(view).ends(tx, rx, query);
    closed_form_from_ends(&a, &b, query)
}

fn normalized(cross: Complex64, pa: f64, pb: f64) -> Complex64 {
    let denom = (pa * pb).sqrt();
    if denom > 0.0 {
        cross / denom
    } else {
        Complex64::new(0.0, 0.0)
    }
}

pub fn stfcf_closed_series(
    view: &ChannelView<'_>,
    tx: Vector3,
    rx: Vector3,
    queries: &[CorrelationQuery],
) -> Vec<Complex64> {
    let mut cache = EndCache::new(view);
    queries
        .iter()
        .map(|q| {
            let (a, b) = cache.ends(tx, rx, q);
            closed_form_from_ends(&a, &b, q)
        })
        .collect()
}

/// Monte Carlo STFCF: the cluster structure is held fixed and the initial
/// phases are redrawn for every realization from `streams`. Averages
/// `H(t, f) H*(t + Δt, f + Δf)` and normalises by the endpoint powers.
pub fn stfcf_ensemble(
    view: &ChannelView<'_>,
    tx: Vector3,
    rx: Vector3,
    queries: &[CorrelationQuery],
    realizations: usize,
    streams: &RngStreams,
) -> Result<Vec<Complex64>> {
    if realizations < 2 {
        return Err(Error::Empty("ensemble needs at least two realizations"));
    }
    let mut cache = EndCache::new(view);
    let with_phase = |comps: &[BareComponent], f: f64| -> Vec<BareComponent> {
        comps
            .iter()
            .map(|c| BareComponent {
                amplitude: at_frequency(c, f),
                ..*c
            })
            .collect()
    };
    let ends: Vec<_> = queries
        .iter()
        .map(|q| {
            let (a, b) = cache.ends(tx, rx, q);
            (with_phase(&a, q.f), with_phase(&b, q.f + q.df))
        })
        .collect();
    let rays = view.ray_count();

    let accumulate = |range: std::ops::Range<usize>| {
        let mut acc = vec![(ComplexSum::default(), CompensatedSum::default(), CompensatedSum::default()); ends.len()];
        let mut rot = vec![Complex64::new(1.0, 0.0); rays];
        for i in range {
            let mut rng = streams.stream(i as u64);
            for r in rot.iter_mut() {
                *r = Complex64::from_polar(1.0, rng.random::<f64>() * TWO_PI);
            }
            for ((a, b), slot) in ends.iter().zip(acc.iter_mut()) {
                let h1 = sum_with_phases(a, &rot);
                let h2 = sum_with_phases(b, &rot);
                slot.0.add(h1 * h2.conj());
                slot.1.add(h1.norm_sqr());
                slot.2.add(h2.norm_sqr());
            }
        }
        acc
    };

    let chunks: Vec<_> = (0..realizations.div_ceil(ENSEMBLE_CHUNK))
        .into_par_iter()
        .map(|c| accumulate(c * ENSEMBLE_CHUNK..((c + 1) * ENSEMBLE_CHUNK).min(realizations)))
        .collect();
    let mut total = vec![(ComplexSum::default(), CompensatedSum::default(), CompensatedSum::default()); ends.len()];
    for chunk in &chunks {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.0.merge(&c.0);
            t.1.merge(&c.1);
            t.2.merge(&c.2);
        }
    }
    Ok(total
        .iter()
        .map(|(x, a, b)| normalized(x.value(), a.value(), b.value()))
        .collect())
}

fn sum_with_phases(components: &[BareComponent], rot: &[Complex64]) -> Complex64 {
    let mut h = Complex64::new(0.0, 0.0);
    let mut k = 0;
    for c in components {
        match c.kind {
            PathKind::Los => h += c.amplitude,
            PathKind::Nlos { .. } => {
                h += c.amplitude * rot[k];
                k += 1;
            }
        }
    }
    h
}

/// Time-variant ACF at anchor `(t, f)` over a lag grid.
pub fn acf(view: &ChannelView<'_>, tx: Vector3, rx: Vector3, t: f64, f: f64, dt_grid: &[f64]) -> Vec<Complex64> {
    let qs: Vec<_> = dt_grid.iter().map(|&dt| CorrelationQuery::temporal(t, f, dt)).collect();
    stfcf_closed_series(view, tx, rx, &qs)
}

/// Rx-side spatial CCF over a separation grid (meters).
pub fn spatial_ccf(view: &ChannelView<'_>, tx: Vector3, rx: Vector3, t: f64, f: f64, delta_grid: &[f64]) -> Vec<Complex64> {
    let qs: Vec<_> = delta_grid.iter().map(|&d| CorrelationQuery::spatial_rx(t, f, d)).collect();
    stfcf_closed_series(view, tx, rx, &qs)
}

pub fn fcf(view: &ChannelView<'_>, tx: Vector3, rx: Vector3, t: f64, f: f64, df_grid: &[f64]) -> Vec<Complex64> {
    let qs: Vec<_> = df_grid.iter().map(|&df| CorrelationQuery::frequency(t, f, df)).collect();
    stfcf_closed_series(view, tx, rx, &qs)
}

/// Element-wise mean of equally long complex series, summed in index order.
pub fn mean_series(series: &[Vec<Complex64>]) -> Vec<Complex64> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let n = series.len() as f64;
    (0..first.len())
        .map(|i| {
            let mut s = ComplexSum::default();
            for row in series {
                s.add(row[i]);
            }
            s.value() / n
        })
        .collect()
}

/// Smallest grid abscissa where `|series|` drops below `level`.
pub fn first_crossing_below(grid: &[f64], series: &[Complex64], level: f64) -> Option<f64> {
    grid.iter().zip(series).find(|(_, z)| z.norm() < level).map(|(x, _)| *x)
}

/// A power delay profile sampled on uniform delay bins starting at
/// `first_bin · bin_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpRow {
    pub time: f64,
    pub bin_width: f64,
    pub first_bin: i64,
    pub power: Vec<f64>,
}

impl PdpRow {
    pub fn total(&self) -> f64 {
        let mut s = CompensatedSum::default();
        self.power.iter().for_each(|p| s.add(*p));
        s.value()
    }
}

/// Pair-averaged PDP of a snapshot: component powers accumulated into
/// delay bins.
pub fn pdp(snapshot: &ChannelSnapshot, bin_width: f64) -> Result<PdpRow> {
    let taps = snapshot
        .entries
        .iter()
        .flat_map(|e| e.components.iter().map(|c| (c.delay, c.amplitude.norm_sqr())));
    bin_taps(snapshot.time, snapshot.entries.len(), taps, bin_width)
}

/// Same as [`pdp`] of the snapshot the view would assemble at `time`, taken
/// from tap powers directly.
pub fn pdp_of_view(
    view: &ChannelView<'_>,
    tx_elements: &[Vector3],
    rx_elements: &[Vector3],
    time: f64,
    bin_width: f64,
) -> Result<PdpRow> {
    let mut taps = Vec::new();
    for tx in tx_elements {
        for rx in rx_elements {
            taps.extend(view.tap_powers(*tx, *rx, time));
        }
    }
    bin_taps(time, tx_elements.len() * rx_elements.len(), taps.into_iter(), bin_width)
}

fn bin_taps(time: f64, pairs: usize, taps: impl Iterator<Item = (f64, f64)>, bin_width: f64) -> Result<PdpRow> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidParameter {
            name: "bin_width",
            reason: format!("must be positive, got {bin_width}"),
        });
    }
    let pairs = pairs.max(1) as f64;
    let mut bins: BTreeMap<i64, CompensatedSum> = BTreeMap::new();
    for (delay, power) in taps {
        let idx = (delay / bin_width).floor() as i64;
        bins.entry(idx).or_default().add(power / pairs);
    }
    let (Some(&first), Some(&last)) = (bins.keys().next(), bins.keys().next_back()) else {
        return Ok(PdpRow {
            time,
            bin_width,
            first_bin: 0,
            power: Vec::new(),
        });
    };
    let mut power = vec![0.0; (last - first + 1) as usize];
    for (k, v) in bins {
        power[(k - first) as usize] = v.value();
    }
    Ok(PdpRow {
        time,
        bin_width,
        first_bin: first,
        power,
    })
}

/// PDPs over a time grid, aligned on a common set of delay bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpMatrix {
    pub times: Vec<f64>,
    pub bin_width: f64,
    pub first_bin: i64,
    pub power: Vec<Vec<f64>>,
}

impl PdpMatrix {
    pub fn from_rows(rows: &[PdpRow]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("no PDP rows"))?;
        let bin_width = first.bin_width;
        if rows.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "PDP rows must have strictly increasing times".into(),
            });
        }
        let lo = rows.iter().filter(|r| !r.power.is_empty()).map(|r| r.first_bin).min().unwrap_or(0);
        let hi = rows
            .iter()
            .filter(|r| !r.power.is_empty())
            .map(|r| r.first_bin + r.power.len() as i64)
            .max()
            .unwrap_or(0);
        let width = (hi - lo).max(0) as usize;
        let power = rows
            .iter()
            .map(|r| {
                let mut row = vec![0.0; width];
                let off = (r.first_bin - lo) as usize;
                row[off..off + r.power.len()].copy_from_slice(&r.power);
                row
            })
            .collect();
        Ok(Self {
            times: rows.iter().map(|r| r.time).collect(),
            bin_width,
            first_bin: lo,
            power,
        })
    }

    /// Start of each delay bin, s.
    pub fn delay_bins(&self) -> Vec<f64> {
        let n = self.power.first().map_or(0, Vec::len);
        (0..n).map(|i| (self.first_bin + i as i64) as f64 * self.bin_width).collect()
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        let (start, end) = (self.times[0], *self.times.last().expect("non-empty"));
        let step = if self.times.len() > 1 {
            (end - start) / (self.times.len() - 1) as f64
        } else {
            1.0
        };
        let tol = 1e-12 + 1e-6 * step;
        let i = self.times.partition_point(|&x| x < t - tol);
        if i < self.times.len() && (self.times[i] - t).abs() <= tol {
            Ok(i)
        } else {
            Err(Error::OutOfRange { time: t, start, end })
        }
    }
}

/// `Σ Λ(t)Λ(t+Δt) / max(Σ Λ(t)², Σ Λ(t+Δt)²)` over delay bins.
pub fn pdp_acf(matrix: &PdpMatrix, t: f64, dt: f64) -> Result<f64> {
    let i = matrix.index_of(t)?;
    let j = matrix.index_of(t + dt)?;
    Ok(pdp_row_correlation(&matrix.power[i], &matrix.power[j]))
}

fn pdp_row_correlation(a: &[f64], b: &[f64]) -> f64 {
    let (mut cross, mut ea, mut eb) = (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
    for (x, y) in a.iter().zip(b) {
        cross.add(x * y);
        ea.add(x * x);
        eb.add(y * y);
    }
    let denom = ea.value().max(eb.value());
    if denom > 0.0 {
        (cross.value() / denom).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryInterval {
    pub seconds: f64,
    /// The PDP correlation never fell to the threshold inside the window;
    /// `seconds` is the window length.
    pub censored: bool,
}

/// Smallest grid lag with `pdp_acf ≤ threshold`.
pub fn stationary_interval(matrix: &PdpMatrix, t: f64, threshold: f64) -> Result<StationaryInterval> {
    let i = matrix.index_of(t)?;
    for j in i + 1..matrix.times.len() {
        if pdp_row_correlation(&matrix.power[i], &matrix.power[j]) <= threshold {
            return Ok(StationaryInterval {
                seconds: matrix.times[j] - matrix.times[i],
                censored: false,
            });
        }
    }
    Ok(StationaryInterval {
        seconds: matrix.times.last().expect("non-empty") - matrix.times[i],
        censored: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPoint {
    pub time: f64,
    pub distance: f64,
    pub count: f64,
}

/// Per-step `(time, distance, count)` of one run.
pub fn cluster_count_series(log: &RunLog) -> Vec<CountPoint> {
    log.records
        .iter()
        .map(|r| CountPoint {
            time: r.time,
            distance: r.distance,
            count: r.cluster_count as f64,
        })
        .collect()
}

/// Ensemble mean over runs logged on the same step grid. Time and distance
/// are taken from the first run.
pub fn mean_cluster_counts(logs: &[RunLog]) -> Result<Vec<CountPoint>> {
    let first = logs.first().ok_or(Error::Empty("no run logs"))?;
    let len = first.records.len();
    if logs.iter().any(|l| l.records.len() != len) {
        return Err(Error::InvalidParameter {
            name: "run_log",
            reason: "runs were logged on different step grids".into(),
        });
    }
    let n = logs.len() as f64;
    Ok((0..len)
        .map(|i| CountPoint {
            time: first.records[i].time,
            distance: first.records[i].distance,
            count: logs.iter().map(|l| l.records[i].cluster_count as f64).sum::<f64>() / n,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfSeries {
    pub values: Vec<f64>,
    pub ccdf: Vec<f64>,
}

/// Fraction of samples strictly greater than each sorted sample value.
pub fn empirical_ccdf(samples: &[f64]) -> Result<CcdfSeries> {
    if samples.is_empty() {
        return Err(Error::Empty("CCDF of an empty sample"));
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let ccdf = values
        .iter()
        .map(|v| {
            let above = n - values.partition_point(|x| x <= v);
            above as f64 / n as f64
        })
        .collect();
    Ok(CcdfSeries { values, ccdf })
}

impl CcdfSeries {
    /// CCDF evaluated at an arbitrary point.
    pub fn at(&self, x: f64) -> f64 {
        let above = self.values.len() - self.values.partition_point(|v| *v <= x);
        above as f64 / self.values.len() as f64
    }
}

pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
