//! Complex channel synthesis: LoS and NLoS coefficients, per-pair impulse
//! responses, the time-variant transfer function and the large-scale
//! gain hook.
//!
//! Distance phases are evaluated at each component's reference epoch (the
//! start of the run for the LoS path, the birth instant for a cluster) and
//! motion enters through the Doppler term only. Evaluating both at the
//! current instant would count the displacement twice.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Cluster;
use crate::geometry::{los_doppler, Vector3, SPEED_OF_LIGHT};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PathKind {
    Los,
    Nlos { cluster: u64, ray: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub amplitude: Complex64,
    pub delay: f64,
    pub doppler: f64,
    pub kind: PathKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResponse {
    pub p: usize,
    pub q: usize,
    pub components: Vec<PathComponent>,
}

impl PairResponse {
    pub fn total_power(&self) -> f64 {
        self.components.iter().map(|c| c.amplitude.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    pub time: f64,
    pub tx_elements: usize,
    pub rx_elements: usize,
    /// Row-major over `(p, q)`.
    pub entries: Vec<PairResponse>,
}

impl ChannelSnapshot {
    pub fn pair(&self, p: usize, q: usize) -> &PairResponse {
        &self.entries[p * self.rx_elements + q]
    }
}

/// Rician K factor, either constant or linear in dB over the LoS distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianModel {
    pub k_db: f64,
    /// dB per meter of LoS distance beyond `reference_distance`.
    pub slope_db_per_m: f64,
    pub reference_distance: f64,
}

impl RicianModel {
    pub fn constant_db(k_db: f64) -> Self {
        Self {
            k_db,
            slope_db_per_m: 0.0,
            reference_distance: 0.0,
        }
    }

    /// Linear K at the given LoS distance.
    pub fn k_linear(&self, los_distance: f64) -> f64 {
        let db = self.k_db + self.slope_db_per_m * (los_distance - self.reference_distance);
        10f64.powf(db / 10.0)
    }
}

/// Large-scale terms in dB, reported separately from the small-scale
/// channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LargeScaleGain {
    pub pl_db: f64,
    pub sh_db: f64,
    pub bl_db: f64,
    pub ol_db: f64,
}

impl LargeScaleGain {
    pub fn total_db(&self) -> f64 {
        self.pl_db + self.sh_db + self.bl_db + self.ol_db
    }

    /// Amplitude factor applied uniformly to every entry.
    pub fn amplitude_factor(&self) -> f64 {
        10f64.powf(-self.total_db() / 20.0)
    }
}

/// Large-scale model selector. Blockage and absorption are unity stubs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GainModel {
    FreeSpace { shadow_sigma_db: f64 },
}

impl Default for GainModel {
    fn default() -> Self {
        GainModel::FreeSpace { shadow_sigma_db: 0.0 }
    }
}

pub fn composite_gain<R: Rng + ?Sized>(
    model: GainModel,
    distance: f64,
    wavelength: f64,
    rng: &mut R,
) -> Result<LargeScaleGain> {
    if !(distance > 0.0) {
        return Err(Error::DegenerateGeometry("zero link distance in path loss".into()));
    }
    match model {
        GainModel::FreeSpace { shadow_sigma_db } => {
            let pl_db = 20.0 * (4.0 * PI * distance / wavelength).log10();
            let sh_db = if shadow_sigma_db > 0.0 {
                Normal::new(0.0, shadow_sigma_db)
                    .map_err(|e| Error::InvalidParameter {
                        name: "shadow_sigma_db",
                        reason: e.to_string(),
                    })?
                    .sample(rng)
            } else {
                0.0
            };
            Ok(LargeScaleGain {
                pl_db,
                sh_db,
                bl_db: 0.0,
                ol_db: 0.0,
            })
        }
    }
}

/// `sqrt(K/(K+1)) e^{-j2π|d|/λ} e^{j2π f_LoS t}`; `K = ∞` gives unit
/// magnitude.
pub fn los_coefficient(k: f64, d_los: Vector3, v: Vector3, wavelength: f64, t: f64) -> Result<Complex64> {
    let f = los_doppler(d_los, v, wavelength)?;
    Ok(los_coefficient_with(k, d_los.norm(), f, wavelength, t))
}

fn los_coefficient_with(k: f64, distance: f64, doppler: f64, wavelength: f64, t: f64) -> Complex64 {
    let mag = if k.is_infinite() { 1.0 } else { (k / (k + 1.0)).sqrt() };
    Complex64::from_polar(mag, TWO_PI * (doppler * t - distance / wavelength))
}

/// `sqrt(P/(K+1)) e^{j(φ - 2π D/λ)} e^{j2π f t}`.
pub fn nlos_coefficient(
    power: f64,
    k: f64,
    phase: f64,
    total_distance: f64,
    doppler: f64,
    wavelength: f64,
    t: f64,
) -> Complex64 {
    let mag = (power.max(0.0) / (k + 1.0)).sqrt();
    Complex64::from_polar(mag, phase - TWO_PI * total_distance / wavelength + TWO_PI * doppler * t)
}

/// Frozen channel state at `epoch` used to evaluate components at any
/// later instant, holding the cluster set fixed.
#[derive(Debug, Clone, Copy)]
pub struct ChannelView<'a> {
    pub clusters: &'a [Cluster],
    pub tx_center: Vector3,
    /// Rx array center at `epoch`.
    pub rx_center: Vector3,
    pub velocity: Vector3,
    pub wavelength: f64,
    pub rician: RicianModel,
    pub epoch: f64,
}

/// One component without its random initial phase, for ensemble work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BareComponent {
    /// Coefficient divided by `e^{jφ}` (the LoS coefficient as is).
    pub amplitude: Complex64,
    pub delay: f64,
    pub doppler: f64,
    pub kind: PathKind,
}

impl ChannelView<'_> {
    pub fn ray_count(&self) -> usize {
        self.clusters.iter().map(|c| c.rays.len()).sum()
    }

    /// Effective K: with no scattered rays the LoS carries all the power.
    pub fn k_at(&self, rx_center: Vector3) -> f64 {
        if self.ray_count() == 0 {
            f64::INFINITY
        } else {
            self.rician.k_linear(self.tx_center.distance(&rx_center))
        }
    }

    /// Components of the link between `tx_element` and an Rx element that
    /// sits at `rx_element` at `epoch`, evaluated at `time`. The initial
    /// phases are not applied.
    pub fn bare_components(&self, tx_element: Vector3, rx_element: Vector3, time: f64) -> Vec<BareComponent> {
        let shift = time - self.epoch;
        let rx_now = rx_element + self.velocity * shift;
        let rx_center_now = self.rx_center + self.velocity * shift;
        let k = self.k_at(rx_center_now);
        let lam = self.wavelength;
        let mut out = Vec::with_capacity(1 + self.ray_count());

        let d_los = rx_now - tx_element;
        let d_ref = (rx_now - self.velocity * time) - tx_element;
        let f_los = los_doppler(d_los, self.velocity, lam).unwrap_or(0.0);
        out.push(BareComponent {
            amplitude: los_coefficient_with(k, d_ref.norm(), f_los, lam, time),
            delay: d_los.norm() / SPEED_OF_LIGHT,
            doppler: f_los,
            kind: PathKind::Los,
        });

        for cluster in self.clusters {
            let cluster_delay = cluster.geometric_length(self.tx_center, rx_center_now) / SPEED_OF_LIGHT
                + cluster.virtual_delay;
            let rx_at_birth = rx_now - self.velocity * (time - cluster.birth_time);
            let virtual_length = cluster.virtual_delay_at_birth * SPEED_OF_LIGHT;
            for (l, ray) in cluster.rays.iter().enumerate() {
                let d_tx = ray.tx_wall - tx_element;
                let d_rx = ray.rx_wall - rx_now;
                let f = los_doppler(d_rx, self.velocity, lam).unwrap_or(0.0);
                let ref_length = d_tx.norm() + ray.rx_wall.distance(&rx_at_birth) + virtual_length;
                out.push(BareComponent {
                    amplitude: nlos_coefficient(ray.power, k, 0.0, ref_length, f, lam, time - cluster.birth_time),
                    delay: cluster_delay + ray.delay_offset,
                    doppler: f,
                    kind: PathKind::Nlos {
                        cluster: cluster.id,
                        ray: l,
                    },
                });
            }
        }
        out
    }

    /// `(delay, |amplitude|²)` of every component of one link, in the order
    /// of [`bare_components`](Self::bare_components), without forming the
    /// complex coefficients.
    pub fn tap_powers(&self, tx_element: Vector3, rx_element: Vector3, time: f64) -> Vec<(f64, f64)> {
        let shift = time - self.epoch;
        let rx_now = rx_element + self.velocity * shift;
        let rx_center_now = self.rx_center + self.velocity * shift;
        let k = self.k_at(rx_center_now);
        let mut out = Vec::with_capacity(1 + self.ray_count());
        let los = if k.is_infinite() { 1.0 } else { k / (k + 1.0) };
        out.push(((rx_now - tx_element).norm() / SPEED_OF_LIGHT, los));
        for cluster in self.clusters {
            let cluster_delay = cluster.geometric_length(self.tx_center, rx_center_now) / SPEED_OF_LIGHT
                + cluster.virtual_delay;
            for ray in &cluster.rays {
                out.push((cluster_delay + ray.delay_offset, ray.power.max(0.0) / (k + 1.0)));
            }
        }
        out
    }

    /// Initial phases in the same order as the NLoS entries of
    /// [`bare_components`](Self::bare_components).
    pub fn phases(&self) -> impl Iterator<Item = f64> + '_ {
        self.clusters.iter().flat_map(|c| c.rays.iter().map(|r| r.initial_phase))
    }

    pub fn components(&self, tx_element: Vector3, rx_element: Vector3, time: f64) -> Vec<PathComponent> {
        let bare = self.bare_components(tx_element, rx_element, time);
        let mut phases = self.phases();
        bare.into_iter()
            .map(|b| {
                let amplitude = match b.kind {
                    PathKind::Los => b.amplitude,
                    PathKind::Nlos { .. } => b.amplitude * Complex64::from_polar(1.0, phases.next().unwrap_or(0.0)),
                };
                PathComponent {
                    amplitude,
                    delay: b.delay,
                    doppler: b.doppler,
                    kind: b.kind,
                }
            })
            .collect()
    }
}

/// Impulse response for every `(p, q)` pair at `time`. Element positions
/// are those at the view's epoch.
pub fn assemble_cir(
    view: &ChannelView<'_>,
    tx_elements: &[Vector3],
    rx_elements: &[Vector3],
    time: f64,
) -> ChannelSnapshot {
    let mut entries = Vec::with_capacity(tx_elements.len() * rx_elements.len());
    for (p, tx) in tx_elements.iter().enumerate() {
        for (q, rx) in rx_elements.iter().enumerate() {
            entries.push(PairResponse {
                p,
                q,
                components: view.components(*tx, *rx, time),
            });
        }
    }
    ChannelSnapshot {
        time,
        tx_elements: tx_elements.len(),
        rx_elements: rx_elements.len(),
        entries,
    }
}

/// `H(f) = Σ a e^{-j2π τ f}` for one set of components.
pub fn transfer_at(components: &[PathComponent], f: f64) -> Complex64 {
    components
        .iter()
        .map(|c| c.amplitude * Complex64::from_polar(1.0, -TWO_PI * c.delay * f))
        .sum()
}

/// Transfer function of every pair on the given frequency grid; rows follow
/// `snapshot.entries`.
pub fn transfer_function(snapshot: &ChannelSnapshot, frequencies: &[f64]) -> Vec<Vec<Complex64>> {
    snapshot
        .entries
        .iter()
        .map(|e| frequencies.iter().map(|&f| transfer_at(&e.components, f)).collect())
        .collect()
}
