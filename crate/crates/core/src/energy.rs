//! Linear and logistic energy harvesting at the IRS.

use thiserror::Error;

use crate::scenario::{EhMode, EhParams};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("panel energy {e_min} outside (0, {saturation})")]
    BadThreshold { e_min: f64, saturation: f64 },
}

/// Harvested energy of one slot under the linear model.
pub fn linear_harvest(efficiency: f64, s_k: f64, p_k: f64, rho: f64, gain_sq: f64) -> f64 {
    efficiency * s_k * p_k * (1.0 - rho * rho) * gain_sq
}

/// Zero-offset constant `Ω = 1 / (1 + e^{cν})`.
pub fn omega(p: &EhParams) -> f64 {
    1.0 / (1.0 + (p.steepness * p.midpoint).exp())
}

fn logistic(p: &EhParams, e_in: f64) -> f64 {
    p.saturation / (1.0 + (-p.steepness * (e_in - p.midpoint)).exp())
}

/// Logistic harvester output shifted so that zero input yields zero output.
pub fn nonlinear_harvest(e_in: f64, p: &EhParams) -> f64 {
    if e_in <= 0.0 {
        return 0.0;
    }
    let om = omega(p);
    ((logistic(p, e_in) - p.saturation * om) / (1.0 - om)).max(0.0)
}

/// Input energy at which [`nonlinear_harvest`] reaches `e_min`.
///
/// Inverts the shifted logistic exactly, so the result also absorbs the
/// `Ω` offset.
pub fn min_input_threshold(p: &EhParams, e_min: f64) -> Result<f64, EnergyError> {
    if !(e_min > 0.0 && e_min < p.saturation) {
        return Err(EnergyError::BadThreshold { e_min, saturation: p.saturation });
    }
    let om = omega(p);
    let upsilon = e_min + om * (p.saturation - e_min);
    let rest = (p.saturation - e_min) * (1.0 - om);
    Ok(p.midpoint - (rest / upsilon).ln() / p.steepness)
}

/// Threshold for the whole panel of `num_elements` elements.
pub fn panel_threshold(p: &EhParams, num_elements: usize) -> Result<f64, EnergyError> {
    min_input_threshold(p, p.panel_energy(num_elements))
}

/// Average harvest of one slot: `s·P·(1−ρ̄²)·M·β·η` with the gain chosen by the caller.
pub fn avg_harvest_bound(s_k: f64, p_k: f64, rho: f64, num_elements: usize, beta_link: f64, efficiency: f64) -> f64 {
    s_k * p_k * (1.0 - rho * rho) * num_elements as f64 * beta_link * efficiency
}

/// Link gain and efficiency factor used by the average-harvest expression.
pub fn harvest_gain(mode: EhMode, beta_bu: f64, beta_ku: f64, efficiency: f64) -> (f64, f64) {
    match mode {
        EhMode::BsLink => (beta_bu, 1.0),
        EhMode::UserLink => (beta_ku, efficiency),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EhParams {
        EhParams { efficiency: 0.8, steepness: 6400.0, midpoint: 0.003, saturation: 0.02, element_energy: 2e-4 }
    }

    #[test]
    fn linear_examples() {
        assert_eq!(linear_harvest(0.8, 1.0, 0.1, 1.0, 1.0), 0.0);
        assert_eq!(linear_harvest(0.8, 0.0, 0.1, 0.3, 1.0), 0.0);
        let v = linear_harvest(0.8, 1.0, 0.1, 0.6, 2e-6);
        assert!((v - 1.024e-7).abs() < 1e-20);
    }

    #[test]
    fn logistic_examples() {
        let p = table();
        assert_eq!(nonlinear_harvest(0.0, &p), 0.0);
        assert!((nonlinear_harvest(p.midpoint, &p) - 0.01).abs() < 1e-9);
        assert!((nonlinear_harvest(10.0 * p.midpoint, &p) - 0.02).abs() < 1e-6);
    }

    #[test]
    fn threshold_examples() {
        let p = table();
        let mid = min_input_threshold(&p, p.saturation / 2.0).unwrap();
        assert!((mid - p.midpoint).abs() < 1e-9);
        let e = min_input_threshold(&p, 0.005).unwrap();
        assert!((e - (0.003 - 3f64.ln() / 6400.0)).abs() < 1e-9);
        assert!((nonlinear_harvest(e, &p) - 0.005).abs() <= 1e-9 * 0.005);
        assert!(min_input_threshold(&p, 0.02).is_err());
        assert!(min_input_threshold(&p, 0.0).is_err());
    }

    #[test]
    fn harvest_modes() {
        assert_eq!(avg_harvest_bound(1.0, 0.1, 1.0, 25, 1e-5, 1.0), 0.0);
        assert_eq!(harvest_gain(EhMode::BsLink, 2.0, 3.0, 0.8), (2.0, 1.0));
        assert_eq!(harvest_gain(EhMode::UserLink, 2.0, 3.0, 0.8), (3.0, 0.8));
    }
}
