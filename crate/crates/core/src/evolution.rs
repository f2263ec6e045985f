//! Cluster lifecycle: survival, waveguide- and roughness-modulated births,
//! parameter sampling for new clusters and the per-step delay and power
//! updates of survivors.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wall_point_in_frame, Angles, TubeScene, Vector3, SPEED_OF_LIGHT};
use crate::vonmises::{centered_quantile, VonMises};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    /// Cluster generation rate λ_G, 1/m.
    pub birth_rate: f64,
    /// Cluster recombination rate λ_R, 1/m.
    pub death_rate: f64,
    /// Correlation distance D_c of the survival law, m.
    pub correlation_distance: f64,
    /// Relaxation time ς of the virtual-delay recursion, s.
    pub delay_relaxation: f64,
    /// Wall roughness σ_h, m.
    pub roughness: f64,
    /// Scattering coefficient of a smooth wall.
    pub rho_s0: f64,
    pub von_mises_k_tx: f64,
    pub von_mises_k_rx: f64,
    pub mean_rays_per_cluster: f64,
    pub mean_virtual_delay: f64,
    pub mean_intra_delay: f64,
    /// Intra-cluster delay/power proportionality r_τ, > 1.
    pub intra_power_decay: f64,
    /// Per-ray log-normal shadowing, dB. Zero disables it.
    pub per_ray_shadow_sigma: f64,
    /// Multiplier on the mean number of births (1 for the tube model).
    pub birth_scale: f64,
    /// Whether births are modulated by the waveguide distance factor.
    pub waveguide_factor: bool,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            birth_rate: 80.0,
            death_rate: 4.0,
            correlation_distance: 0.25,
            delay_relaxation: 1e-3,
            roughness: 0.0,
            rho_s0: 1.0,
            von_mises_k_tx: 6.0,
            von_mises_k_rx: 6.0,
            mean_rays_per_cluster: 10.0,
            mean_virtual_delay: 30e-9,
            mean_intra_delay: 5e-9,
            intra_power_decay: 2.3,
            per_ray_shadow_sigma: 0.0,
            birth_scale: 1.0,
            waveguide_factor: true,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("birth_rate", self.birth_rate),
            ("death_rate", self.death_rate),
            ("correlation_distance", self.correlation_distance),
            ("delay_relaxation", self.delay_relaxation),
            ("von_mises_k_tx", self.von_mises_k_tx),
            ("von_mises_k_rx", self.von_mises_k_rx),
            ("mean_rays_per_cluster", self.mean_rays_per_cluster),
            ("mean_virtual_delay", self.mean_virtual_delay),
            ("mean_intra_delay", self.mean_intra_delay),
            ("birth_scale", self.birth_scale),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be strictly positive, got {value}"),
                });
            }
        }
        if !(self.rho_s0 > 0.0 && self.rho_s0 <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "rho_s0",
                reason: format!("must lie in (0, 1], got {}", self.rho_s0),
            });
        }
        if !(self.intra_power_decay > 1.0) {
            return Err(Error::InvalidParameter {
                name: "intra_power_decay",
                reason: format!("must exceed 1, got {}", self.intra_power_decay),
            });
        }
        if !(self.roughness >= 0.0) || !(self.per_ray_shadow_sigma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "roughness",
                reason: "roughness and shadowing must be non-negative".into(),
            });
        }
        Ok(())
    }

    /// Mean cluster count a fresh draw starts from.
    pub fn cold_start_mean(&self, rho_s: f64) -> f64 {
        self.birth_rate / self.death_rate * (rho_s / self.rho_s0) * self.birth_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub tx_offset: Angles,
    pub rx_offset: Angles,
    /// Intra-cluster delay τ_l, static for the life of the cluster, s.
    pub delay_offset: f64,
    /// Un-normalised mean power P̃ carried by the power recursion.
    pub weight: f64,
    /// Power normalised over every ray of every cluster.
    pub power: f64,
    pub initial_phase: f64,
    /// Absolute wall points of the first and last bounce.
    pub tx_wall: Vector3,
    pub rx_wall: Vector3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: u64,
    pub tx_angles: Angles,
    pub rx_angles: Angles,
    /// Virtual delay τ̃_n, s.
    pub virtual_delay: f64,
    /// Cluster delay τ_n, s.
    pub delay: f64,
    pub rays: Vec<Ray>,
    pub birth_time: f64,
    /// Rx array center when the cluster was born; the reference epoch of its
    /// distance phase.
    pub rx_center_at_birth: Vector3,
    /// Virtual delay at birth, used in the distance phase.
    pub virtual_delay_at_birth: f64,
    pub tx_wall: Vector3,
    pub rx_wall: Vector3,
}

impl Cluster {
    /// Geometric two-leg path length from the array centers via the cluster.
    pub fn geometric_length(&self, tx_center: Vector3, rx_center: Vector3) -> f64 {
        self.tx_wall.distance(&tx_center) + self.rx_wall.distance(&rx_center)
    }

    pub fn total_power(&self) -> f64 {
        self.rays.iter().map(|r| r.power).sum()
    }
}

/// Link geometry at the instant a step lands on.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub scene: &'a TubeScene,
    pub tx_center: Vector3,
    pub rx_center: Vector3,
    pub velocity: Vector3,
    pub wavelength: f64,
    pub time: f64,
}

impl StepContext<'_> {
    pub fn los_distance(&self) -> f64 {
        self.tx_center.distance(&self.rx_center)
    }
}

/// Test hooks that pin the stochastic rates of a step.
#[derive(Debug, Clone, Copy, Default)]
pub struct Forcing {
    pub survival: Option<f64>,
    pub birth_mean: Option<f64>,
}

/// Monotone id source; ids are never reused within a realization.
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }
}

/// `exp(-λ_R · speed · Δt / D_c)`.
pub fn survival_probability(dt: f64, speed: f64, params: &EvolutionParams) -> f64 {
    (-params.death_rate * speed * dt.max(0.0) / params.correlation_distance).exp()
}

/// `exp(-8 (π σ_h cos β̄ / λ)²)`.
pub fn scattering_coefficient(roughness: f64, mean_elevation: f64, wavelength: f64) -> f64 {
    let g = PI * roughness * mean_elevation.cos() / wavelength;
    (-8.0 * g * g).exp()
}

/// Poisson mean of the number of new clusters in a step.
pub fn mean_new_clusters(
    survival: f64,
    los_distance: f64,
    initial_distance: f64,
    rho_s: f64,
    params: &EvolutionParams,
) -> f64 {
    let waveguide = if params.waveguide_factor {
        (1.0 - los_distance / initial_distance).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let mean = params.birth_rate / params.death_rate
        * (1.0 - survival)
        * waveguide
        * (rho_s / params.rho_s0)
        * params.birth_scale;
    mean.max(0.0)
}

/// `e^{-Δt/ς} τ̃ + (1 - e^{-Δt/ς}) X`.
pub fn update_virtual_delay(virtual_delay: f64, dt: f64, relaxation: f64, fresh: f64) -> f64 {
    let a = (-dt / relaxation).exp();
    a * virtual_delay + (1.0 - a) * fresh
}

/// Two-leg geometric delay plus the (already updated) virtual delay.
pub fn update_cluster_delay(rx_leg: f64, tx_leg: f64, virtual_delay_next: f64) -> f64 {
    (rx_leg + tx_leg) / SPEED_OF_LIGHT + virtual_delay_next
}

/// `P̃ (3τ_n - 2τ_n' + τ_l) / (τ_n + τ_l)`, clamped at zero.
pub fn update_ray_power(weight: f64, delay_old: f64, delay_new: f64, delay_offset: f64) -> f64 {
    let factor = 1.0 + 2.0 * (delay_old - delay_new) / (delay_old + delay_offset);
    (weight * factor).max(0.0)
}

/// Pre-normalisation ray weights from the intra-cluster delays.
pub fn ray_powers<R: Rng + ?Sized>(delays: &[f64], params: &EvolutionParams, rng: &mut R) -> Vec<f64> {
    let r = params.intra_power_decay;
    let slope = (r - 1.0) / (r * params.mean_intra_delay);
    let shadow = (params.per_ray_shadow_sigma > 0.0)
        .then(|| Normal::new(0.0, params.per_ray_shadow_sigma).expect("finite sigma"));
    delays
        .iter()
        .map(|&tau| {
            let z = shadow.as_ref().map_or(0.0, |n| n.sample(rng));
            (-tau * slope).exp() * 10f64.powf(-z / 10.0)
        })
        .collect()
}

thread_local! {
    static EAM_CACHE: RefCell<HashMap<(usize, u64), Rc<[f64]>>> = RefCell::new(HashMap::new());
}

/// Equal-area discretisation: offsets at the `(l - 0.5)/L` quantiles of a
/// zero-mean Von Mises(k) law. Sorted and symmetric about zero.
pub fn eam_discretize(ray_count: usize, concentration: f64) -> Rc<[f64]> {
    let key = (ray_count, concentration.to_bits());
    if let Some(hit) = EAM_CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return hit;
    }
    let n = ray_count as f64;
    let mut offsets: Vec<f64> = vec![0.0; ray_count];
    for l in 0..ray_count.div_ceil(2) {
        let q = centered_quantile((l as f64 + 0.5) / n, concentration);
        offsets[l] = q;
        offsets[ray_count - 1 - l] = -q;
    }
    if ray_count % 2 == 1 {
        offsets[ray_count / 2] = 0.0;
    }
    let offsets: Rc<[f64]> = offsets.into();
    EAM_CACHE.with(|c| c.borrow_mut().insert(key, offsets.clone()));
    offsets
}

/// Folds an elevation back into [-π/2, π/2], turning the azimuth around
/// when it crosses a pole.
fn fold_direction(a: Angles) -> Angles {
    let mut el = (a.elevation + PI).rem_euclid(2.0 * PI) - PI;
    let mut az = a.azimuth;
    if el > FRAC_PI_2 {
        el = PI - el;
        az += PI;
    } else if el < -FRAC_PI_2 {
        el = -PI - el;
        az += PI;
    }
    Angles::new((az + PI).rem_euclid(2.0 * PI) - PI, el)
}

fn draw_angles<R: Rng + ?Sized>(mean: Angles, kappa: f64, rng: &mut R) -> Angles {
    let az = VonMises::new(mean.azimuth, kappa).expect("validated concentration");
    let el = VonMises::new(mean.elevation, kappa).expect("validated concentration");
    fold_direction(Angles::new(az.sample(rng), el.sample(rng)))
}

fn ray_offsets<R: Rng + ?Sized>(count: usize, kappa: f64, rng: &mut R) -> Vec<(f64, f64)> {
    let az = eam_discretize(count, kappa);
    let mut el: Vec<f64> = az.to_vec();
    el.shuffle(rng);
    az.iter().copied().zip(el).collect()
}

/// Draws a new cluster around the current LoS directions.
pub fn sample_new_cluster<R: Rng + ?Sized>(
    ctx: &StepContext<'_>,
    params: &EvolutionParams,
    id: u64,
    rng: &mut R,
) -> Cluster {
    let (tx_az, tx_el) = (ctx.rx_center - ctx.tx_center).azimuth_elevation();
    let (rx_az, rx_el) = (ctx.tx_center - ctx.rx_center).azimuth_elevation();
    let tx_frame = ctx.scene.frame_at(ctx.tx_center);
    let rx_frame = ctx.scene.frame_at(ctx.rx_center);
    let radius = ctx.scene.radius;
    let virtual_delay = Exp::new(1.0 / params.mean_virtual_delay)
        .expect("validated mean")
        .sample(rng);
    let ray_count = Poisson::new(params.mean_rays_per_cluster)
        .map(|p| p.sample(rng) as usize)
        .unwrap_or(1)
        .max(1);
    let intra = Exp::new(1.0 / params.mean_intra_delay).expect("validated mean");
    let delay_offsets: Vec<f64> = (0..ray_count).map(|_| intra.sample(rng)).collect();
    let weights = ray_powers(&delay_offsets, params, rng);
    let phases: Vec<f64> = (0..ray_count).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let tx_offsets = ray_offsets(ray_count, params.von_mises_k_tx, rng);
    let rx_offsets = ray_offsets(ray_count, params.von_mises_k_rx, rng);

    // Redraw mean angles until every ray reaches the wall.
    loop {
        let tx_angles = draw_angles(Angles::new(tx_az, tx_el), params.von_mises_k_tx, rng);
        let rx_angles = draw_angles(Angles::new(rx_az, rx_el), params.von_mises_k_rx, rng);
        let centers = (
            wall_point_in_frame(tx_angles, radius, tx_frame),
            wall_point_in_frame(rx_angles, radius, rx_frame),
        );
        let (Ok(tx_wall), Ok(rx_wall)) = centers else {
            continue;
        };
        let rays: Option<Vec<Ray>> = (0..ray_count)
            .map(|l| {
                let tx_offset = Angles::new(tx_offsets[l].0, tx_offsets[l].1);
                let rx_offset = Angles::new(rx_offsets[l].0, rx_offsets[l].1);
                let tw = wall_point_in_frame(
                    fold_direction(tx_angles.offset(tx_offset.azimuth, tx_offset.elevation)),
                    radius,
                    tx_frame,
                )
                .ok()?;
                let rw = wall_point_in_frame(
                    fold_direction(rx_angles.offset(rx_offset.azimuth, rx_offset.elevation)),
                    radius,
                    rx_frame,
                )
                .ok()?;
                Some(Ray {
                    tx_offset,
                    rx_offset,
                    delay_offset: delay_offsets[l],
                    weight: weights[l],
                    power: 0.0,
                    initial_phase: phases[l],
                    tx_wall: tw,
                    rx_wall: rw,
                })
            })
            .collect();
        let Some(rays) = rays else {
            continue;
        };
        let legs = tx_wall.distance(&ctx.tx_center) + rx_wall.distance(&ctx.rx_center);
        return Cluster {
            id,
            tx_angles,
            rx_angles,
            virtual_delay,
            delay: legs / SPEED_OF_LIGHT + virtual_delay,
            rays,
            birth_time: ctx.time,
            rx_center_at_birth: ctx.rx_center,
            virtual_delay_at_birth: virtual_delay,
            tx_wall,
            rx_wall,
        };
    }
}

/// Mean Rx elevation of the given clusters, zero when there are none.
pub fn mean_rx_elevation(clusters: &[Cluster]) -> f64 {
    if clusters.is_empty() {
        0.0
    } else {
        clusters.iter().map(|c| c.rx_angles.elevation).sum::<f64>() / clusters.len() as f64
    }
}

/// Renormalises ray powers to a unit total. Clusters whose weight has
/// been driven to zero are dropped.
pub fn normalize_powers(clusters: &mut Vec<Cluster>) {
    clusters.retain(|c| c.rays.iter().any(|r| r.weight > 0.0));
    let total: f64 = clusters.iter().flat_map(|c| c.rays.iter()).map(|r| r.weight).sum();
    if total > 0.0 {
        for ray in clusters.iter_mut().flat_map(|c| c.rays.iter_mut()) {
            ray.power = ray.weight / total;
        }
    }
}

/// Initial cluster set, drawn around the steady state of the process.
pub fn cold_start<R: Rng + ?Sized>(
    ctx: &StepContext<'_>,
    params: &EvolutionParams,
    ids: &mut IdAllocator,
    rng: &mut R,
) -> Vec<Cluster> {
    let rho_s = scattering_coefficient(params.roughness, 0.0, ctx.wavelength);
    let mean = params.cold_start_mean(rho_s);
    let count = poisson_draw(mean, rng);
    let mut clusters: Vec<Cluster> = (0..count)
        .map(|_| sample_new_cluster(ctx, params, ids.next_id(), rng))
        .collect();
    normalize_powers(&mut clusters);
    clusters
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    }
}

/// One birth–death step of length `dt`. `ctx` describes the geometry at
/// the end of the step (Rx already advanced).
pub fn evolve_step<R: Rng + ?Sized>(
    clusters: Vec<Cluster>,
    dt: f64,
    ctx: &StepContext<'_>,
    params: &EvolutionParams,
    ids: &mut IdAllocator,
    rng: &mut R,
) -> Vec<Cluster> {
    evolve_step_with(clusters, dt, ctx, params, ids, rng, Forcing::default())
}

pub fn evolve_step_with<R: Rng + ?Sized>(
    clusters: Vec<Cluster>,
    dt: f64,
    ctx: &StepContext<'_>,
    params: &EvolutionParams,
    ids: &mut IdAllocator,
    rng: &mut R,
    forcing: Forcing,
) -> Vec<Cluster> {
    let survival = forcing
        .survival
        .unwrap_or_else(|| survival_probability(dt, ctx.velocity.norm(), params));
    let fresh = Exp::new(1.0 / params.mean_virtual_delay).expect("validated mean");

    let mut next: Vec<Cluster> = Vec::with_capacity(clusters.len() + 4);
    for mut cluster in clusters {
        if rng.random::<f64>() >= survival {
            continue;
        }
        let x = fresh.sample(rng);
        cluster.virtual_delay = update_virtual_delay(cluster.virtual_delay, dt, params.delay_relaxation, x);
        let rx_leg = cluster.rx_wall.distance(&ctx.rx_center);
        let tx_leg = cluster.tx_wall.distance(&ctx.tx_center);
        let delay_new = update_cluster_delay(rx_leg, tx_leg, cluster.virtual_delay);
        for ray in cluster.rays.iter_mut() {
            ray.weight = update_ray_power(ray.weight, cluster.delay, delay_new, ray.delay_offset);
        }
        cluster.delay = delay_new;
        next.push(cluster);
    }

    let birth_mean = forcing.birth_mean.unwrap_or_else(|| {
        let rho_s = scattering_coefficient(params.roughness, mean_rx_elevation(&next), ctx.wavelength);
        mean_new_clusters(survival, ctx.los_distance(), ctx.scene.initial_distance(), rho_s, params)
    });
    for _ in 0..poisson_draw(birth_mean, rng) {
        let cluster = sample_new_cluster(ctx, params, ids.next_id(), rng);
        next.push(cluster);
    }
    normalize_powers(&mut next);
    next
}
