//! One channel realization evolving in time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cir::{assemble_cir, ChannelSnapshot, ChannelView, RicianModel};
use crate::error::{Error, Result};
use crate::evolution::{cold_start, evolve_step_with, Cluster, EvolutionParams, Forcing, IdAllocator, StepContext};
use crate::geometry::{AntennaArray, TubeScene, Vector3, SPEED_OF_LIGHT};
use crate::scenario::{ClusterRecord, StepRecord};

/// Everything that is fixed across realizations of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub scene: TubeScene,
    pub tx_array: AntennaArray,
    /// Rx array at `t = 0`.
    pub rx_array: AntennaArray,
    pub velocity: Vector3,
    pub carrier_hz: f64,
    pub rician: RicianModel,
    pub params: EvolutionParams,
}

impl ChannelModel {
    /// Standard layout: uniform linear arrays along the axis, centered on the
    /// scene's Tx reference and Rx initial position.
    pub fn new(
        scene: TubeScene,
        tx_elements: usize,
        rx_elements: usize,
        spacing: f64,
        velocity: Vector3,
        carrier_hz: f64,
        rician: RicianModel,
        params: EvolutionParams,
    ) -> Result<Self> {
        scene.validate()?;
        params.validate()?;
        if !(carrier_hz > 0.0) {
            return Err(Error::InvalidParameter {
                name: "carrier_hz",
                reason: format!("must be positive, got {carrier_hz}"),
            });
        }
        if tx_elements == 0 || rx_elements == 0 {
            return Err(Error::InvalidParameter {
                name: "elements",
                reason: "arrays need at least one element".into(),
            });
        }
        let tx_array = AntennaArray::uniform_linear(scene.tx_reference, tx_elements, spacing);
        let rx_array = AntennaArray::uniform_linear(scene.rx_initial, rx_elements, spacing);
        for p in tx_array.element_positions.iter().chain(&rx_array.element_positions) {
            if !scene.contains(p) {
                return Err(Error::Geometry(format!(
                    "array element ({}, {}, {}) lies outside the tube",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(Self {
            scene,
            tx_array,
            rx_array,
            velocity,
            carrier_hz,
            rician,
            params,
        })
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn realize<R: Rng>(&self, rng: R) -> Realization<'_, R> {
        Realization::new(self, rng)
    }
}

pub struct Realization<'m, R> {
    model: &'m ChannelModel,
    time: f64,
    rx_array: AntennaArray,
    clusters: Vec<Cluster>,
    ids: IdAllocator,
    rng: R,
    forcing: Forcing,
}

impl<'m, R: Rng> Realization<'m, R> {
    pub fn new(model: &'m ChannelModel, rng: R) -> Self {
        let mut r = Self {
            model,
            time: 0.0,
            rx_array: model.rx_array.clone(),
            clusters: Vec::new(),
            ids: IdAllocator::default(),
            rng,
            forcing: Forcing::default(),
        };
        let ctx = r.context();
        r.clusters = cold_start(&ctx, &model.params, &mut r.ids, &mut r.rng);
        r
    }

    /// Pins survival and/or birth mean for the remaining steps.
    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn model(&self) -> &ChannelModel {
        self.model
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn rx_array(&self) -> &AntennaArray {
        &self.rx_array
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn los_distance(&self) -> f64 {
        self.model.tx_array.center().distance(&self.rx_array.center())
    }

    fn context(&self) -> StepContext<'m> {
        StepContext {
            scene: &self.model.scene,
            tx_center: self.model.tx_array.center(),
            rx_center: self.rx_array.center(),
            velocity: self.model.velocity,
            wavelength: self.model.wavelength(),
            time: self.time,
        }
    }

    /// Advances the Rx and the cluster set by `dt`.
    pub fn step(&mut self, dt: f64) {
        self.rx_array = self.rx_array.advanced(self.model.velocity, dt);
        self.time += dt;
        let ctx = self.context();
        let clusters = std::mem::take(&mut self.clusters);
        self.clusters = evolve_step_with(
            clusters,
            dt,
            &ctx,
            &self.model.params,
            &mut self.ids,
            &mut self.rng,
            self.forcing,
        );
    }

    /// Steps with stride `dt` until `time >= target` (to within 1e-12 s).
    pub fn advance_to(&mut self, target: f64, dt: f64) {
        while self.time + 1e-12 < target {
            let h = dt.min(target - self.time);
            self.step(h);
        }
    }

    pub fn view(&self) -> ChannelView<'_> {
        ChannelView {
            clusters: &self.clusters,
            tx_center: self.model.tx_array.center(),
            rx_center: self.rx_array.center(),
            velocity: self.model.velocity,
            wavelength: self.model.wavelength(),
            rician: self.model.rician,
            epoch: self.time,
        }
    }

    pub fn snapshot(&self) -> ChannelSnapshot {
        assemble_cir(
            &self.view(),
            &self.model.tx_array.element_positions,
            &self.rx_array.element_positions,
            self.time,
        )
    }

    /// Pair-averaged PDP of the current snapshot.
    pub fn pdp(&self, bin_width: f64) -> Result<crate::stats::PdpRow> {
        crate::stats::pdp_of_view(
            &self.view(),
            &self.model.tx_array.element_positions,
            &self.rx_array.element_positions,
            self.time,
            bin_width,
        )
    }

    pub fn record(&self) -> StepRecord {
        StepRecord {
            time: self.time,
            distance: self.los_distance(),
            cluster_count: self.clusters.len(),
            clusters: self
                .clusters
                .iter()
                .map(|c| ClusterRecord {
                    id: c.id,
                    delay: c.delay,
                    power: c.total_power(),
                })
                .collect(),
        }
    }
}
