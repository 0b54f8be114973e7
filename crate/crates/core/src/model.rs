//! Per-slot rate and harvest coefficients shared by every stage.

use serde::{Deserialize, Serialize};

use crate::channel::{LargeScaleState, SlotGeometry};
use crate::energy::{avg_harvest_bound, harvest_gain, panel_threshold, EnergyError};
use crate::rate::{optimal_rate, LogQuadratic};
use crate::scenario::Scenario;

/// Shares at or below this value are treated as unscheduled by the SCA stages.
pub const ACTIVE_SHARE: f64 = 1e-6;

/// Which parts of the system model are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSwitches {
    /// When false the panel contributes nothing to rates or harvest.
    pub use_irs: bool,
    /// When false the harvest constraint is dropped.
    pub enforce_harvest: bool,
}

impl Default for ModelSwitches {
    fn default() -> Self {
        Self { use_irs: true, enforce_harvest: true }
    }
}

/// A scenario together with the derived constants the stages need.
#[derive(Clone, Debug)]
pub struct Model<'a> {
    pub scenario: &'a Scenario,
    pub switches: ModelSwitches,
    /// Input-energy threshold `e_k` for the panel.
    pub threshold: f64,
}

impl<'a> Model<'a> {
    pub fn new(scenario: &'a Scenario, switches: ModelSwitches) -> Result<Self, EnergyError> {
        let threshold = panel_threshold(&scenario.eh, scenario.num_elements())?;
        Ok(Self { scenario, switches, threshold })
    }

    pub fn num_users(&self) -> usize {
        self.scenario.num_users()
    }

    pub fn num_slots(&self) -> usize {
        self.scenario.num_slots
    }

    /// Elements seen by the rate and harvest expressions.
    pub fn elements(&self) -> usize {
        if self.switches.use_irs {
            self.scenario.num_elements()
        } else {
            0
        }
    }

    pub fn snr(&self, k: usize) -> f64 {
        self.scenario.transmit_power[k] / self.scenario.noise_power
    }

    /// True when the harvest constraint is present and not vacuous.
    pub fn harvest_active(&self) -> bool {
        self.switches.enforce_harvest && self.switches.use_irs && self.threshold > 0.0
    }

    pub fn rate_active(&self, k: usize) -> bool {
        self.scenario.min_rate[k] > 0.0
    }

    /// Rate per unit share at optimal phases.
    pub fn unit_rate_at(&self, g: &SlotGeometry, beta_kb: f64, rho: f64, k: usize) -> f64 {
        let s = self.scenario;
        optimal_rate(g.beta_bu, g.users[k].gain, beta_kb, rho, self.elements(), &s.rician, self.snr(k))
    }

    pub fn unit_rate(&self, ls: &LargeScaleState, rho: &[f64], k: usize, n: usize) -> f64 {
        self.unit_rate_at(&ls.slots[n], ls.beta_kb[k], rho[n], k)
    }

    /// Link gain and efficiency of the harvest expression for user `k`.
    pub fn harvest_link(&self, g: &SlotGeometry, k: usize) -> (f64, f64) {
        let s = self.scenario;
        harvest_gain(s.eh_mode, g.beta_bu, g.users[k].gain, s.eh.efficiency)
    }

    /// Average harvest per unit share, `P·(1−ρ̄²)·M·β·η`.
    pub fn unit_harvest_at(&self, g: &SlotGeometry, rho: f64, k: usize) -> f64 {
        let (beta, eta) = self.harvest_link(g, k);
        avg_harvest_bound(1.0, self.scenario.transmit_power[k], rho, self.elements(), beta, eta)
    }

    pub fn unit_harvest(&self, ls: &LargeScaleState, rho: &[f64], k: usize, n: usize) -> f64 {
        self.unit_harvest_at(&ls.slots[n], rho[n], k)
    }

    /// The rate of one pair as a function of `ρ̄`.
    pub fn rate_in_rho(&self, ls: &LargeScaleState, share: f64, k: usize, n: usize) -> LogQuadratic {
        let g = &ls.slots[n];
        LogQuadratic::in_rho(
            g.beta_bu,
            g.users[k].gain,
            ls.beta_kb[k],
            &self.scenario.rician,
            self.elements(),
            share,
            self.snr(k),
        )
    }

    /// Horizon rate of every user for the given shares.
    pub fn total_rates(&self, ls: &LargeScaleState, rho: &[f64], share: &[Vec<f64>]) -> Vec<f64> {
        (0..self.num_users())
            .map(|k| (0..self.num_slots()).map(|n| share[k][n] * self.unit_rate(ls, rho, k, n)).sum())
            .collect()
    }

    /// Horizon harvest of every user for the given shares.
    pub fn total_harvest(&self, ls: &LargeScaleState, rho: &[f64], share: &[Vec<f64>]) -> Vec<f64> {
        (0..self.num_users())
            .map(|k| (0..self.num_slots()).map(|n| share[k][n] * self.unit_harvest(ls, rho, k, n)).sum())
            .collect()
    }

    /// Largest per-user horizon energy, `max_k Σ_n s_k[n]·E_k`.
    pub fn max_energy(&self, share: &[Vec<f64>]) -> f64 {
        (0..self.num_users())
            .map(|k| share[k].iter().sum::<f64>() * self.scenario.slot_energy(k))
            .fold(0.0, f64::max)
    }
}
