//! JSON scenario documents.
//!
//! Every field is optional and falls back to the diagonal reference
//! instance. Noise and Rician factors may be given in dB, and the rate demand
//! as a payload and bandwidth; each conversion is recorded in
//! [`LoadedScenario::conversions`]. The layout is described by
//! `scenario.schema.json` at the repository root.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{
    db_to_linear, dbm_to_watts, free_space_gain, Corridor, EhMode, EhParams, LinkTriple, LoopSettings, NoFlyZone, Scenario,
    Vec3,
};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot parse scenario document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("field `{0}` given both in linear units and in dB")]
    Conflict(&'static str),
    #[error("per-user list `{field}` has {got} entries for {users} users")]
    Length { field: &'static str, got: usize, users: usize },
}

/// A value given once for all users or once per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    All(f64),
    Each(Vec<f64>),
}

impl PerUser {
    fn expand(&self, field: &'static str, users: usize) -> Result<Vec<f64>, ScenarioFileError> {
        match self {
            Self::All(v) => Ok(vec![*v; users]),
            Self::Each(v) if v.len() == users => Ok(v.clone()),
            Self::Each(v) => Err(ScenarioFileError::Length { field, got: v.len(), users }),
        }
    }
}

/// Per-link values with an optional common default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLink {
    All(f64),
    Each(LinkTriple),
}

impl PerLink {
    fn triple(self) -> LinkTriple {
        match self {
            Self::All(v) => LinkTriple::uniform(v),
            Self::Each(t) => t,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Reference corridor supplying the defaults (`diagonal` when absent).
    pub reference: Option<Corridor>,
    pub bs_position: Option<Vec3>,
    pub user_positions: Option<Vec<Vec3>>,
    pub start_position: Option<Vec3>,
    pub end_position: Option<Vec3>,
    pub num_slots: Option<usize>,
    pub slot_duration: Option<f64>,
    pub v_max: Option<f64>,
    pub a_max: Option<f64>,
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub fading_blocks: Option<usize>,
    pub transmit_power: Option<PerUser>,
    /// Horizon rate demand in bits/Hz.
    pub min_rate: Option<PerUser>,
    /// Payload in bits, converted with `bandwidth` to bits/Hz.
    pub payload_bits: Option<PerUser>,
    /// Bandwidth in Hz for `payload_bits`.
    pub bandwidth: Option<f64>,
    pub noise_power: Option<f64>,
    pub noise_power_dbm: Option<f64>,
    pub carrier_frequency: Option<f64>,
    pub element_spacing: Option<f64>,
    pub panel_x: Option<usize>,
    pub panel_y: Option<usize>,
    pub rician: Option<PerLink>,
    pub rician_db: Option<PerLink>,
    pub pathloss: Option<PerLink>,
    pub reference_gain: Option<f64>,
    pub eh: Option<EhParams>,
    pub eh_mode: Option<EhMode>,
    pub nofly_zones: Option<Vec<NoFlyZone>>,
    pub node_clearance: Option<f64>,
    pub sca: Option<LoopSettings>,
    pub ao: Option<LoopSettings>,
    pub init_reflection: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// One line per unit conversion applied at load time.
    pub conversions: Vec<String>,
}

macro_rules! take {
    ($s:ident, $f:ident, $($field:ident),*) => {
        $(if let Some(v) = $f.$field.clone() { $s.$field = v; })*
    };
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioFileError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves defaults and converts every field to linear SI units.
    pub fn into_scenario(self) -> Result<LoadedScenario, ScenarioFileError> {
        let mut s = Scenario::reference(self.reference.unwrap_or(Corridor::Diagonal));
        let mut conversions = Vec::new();
        let f = &self;
        take!(s, f, bs_position, user_positions, start_position, end_position, num_slots, slot_duration);
        take!(s, f, v_max, a_max, h_min, h_max, fading_blocks, element_spacing, panel_x, panel_y);
        take!(s, f, eh, eh_mode, nofly_zones, node_clearance, sca, ao, init_reflection);
        let users = s.num_users();
        if let Some(fc) = f.carrier_frequency {
            s.carrier_frequency = fc;
            if f.element_spacing.is_none() {
                s.element_spacing = crate::scenario::LIGHT_SPEED / fc / 2.0;
                conversions.push(format!("element_spacing = half wavelength at {fc} Hz = {} m", s.element_spacing));
            }
            if f.reference_gain.is_none() {
                s.reference_gain = free_space_gain(fc);
                conversions.push(format!("reference_gain = (c/(4π·{fc}))² = {:e}", s.reference_gain));
            }
        }
        if let Some(g) = f.reference_gain {
            s.reference_gain = g;
        }
        s.transmit_power = match &f.transmit_power {
            Some(p) => p.expand("transmit_power", users)?,
            None => vec![s.transmit_power[0]; users],
        };
        match (&f.min_rate, &f.payload_bits) {
            (Some(_), Some(_)) => return Err(ScenarioFileError::Conflict("min_rate")),
            (Some(r), None) => s.min_rate = r.expand("min_rate", users)?,
            (None, Some(bits)) => {
                let b = f.bandwidth.unwrap_or(1e6);
                s.min_rate = bits.expand("payload_bits", users)?.iter().map(|x| x / (b * s.slot_duration)).collect();
                conversions.push(format!(
                    "min_rate = payload_bits / ({b} Hz · {} s) = {:?} bits/Hz",
                    s.slot_duration, s.min_rate
                ));
            }
            (None, None) => s.min_rate = vec![s.min_rate[0]; users],
        }
        match (f.noise_power, f.noise_power_dbm) {
            (Some(_), Some(_)) => return Err(ScenarioFileError::Conflict("noise_power")),
            (Some(w), None) => s.noise_power = w,
            (None, Some(dbm)) => {
                s.noise_power = dbm_to_watts(dbm);
                conversions.push(format!("noise_power = {dbm} dBm = {:e} W", s.noise_power));
            }
            (None, None) => {}
        }
        match (f.rician, f.rician_db) {
            (Some(_), Some(_)) => return Err(ScenarioFileError::Conflict("rician")),
            (Some(r), None) => s.rician = r.triple(),
            (None, Some(db)) => {
                let t = db.triple();
                s.rician = LinkTriple { bu: db_to_linear(t.bu), ku: db_to_linear(t.ku), kb: db_to_linear(t.kb) };
                conversions.push(format!(
                    "rician = ({}, {}, {}) dB = ({}, {}, {}) linear",
                    t.bu, t.ku, t.kb, s.rician.bu, s.rician.ku, s.rician.kb
                ));
            }
            (None, None) => {}
        }
        if let Some(a) = f.pathloss {
            s.pathloss = a.triple();
        }
        Ok(LoadedScenario { scenario: s, conversions })
    }
}

/// Parses a scenario document and resolves it.
pub fn load_scenario(text: &str) -> Result<LoadedScenario, ScenarioFileError> {
    ScenarioFile::from_json(text)?.into_scenario()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_reference() {
        let l = load_scenario("{}").unwrap();
        assert_eq!(l.scenario, Scenario::reference(Corridor::Diagonal));
        assert!(l.conversions.is_empty());
    }

    #[test]
    fn db_fields_are_converted() {
        let l = load_scenario(r#"{"noise_power_dbm": -80, "rician_db": 0, "payload_bits": 5e6}"#).unwrap();
        assert!((l.scenario.noise_power - 1e-11).abs() < 1e-24);
        assert_eq!(l.scenario.rician, LinkTriple::uniform(1.0));
        assert_eq!(l.scenario.min_rate, vec![10.0; 3]);
        assert_eq!(l.conversions.len(), 3);
    }

    #[test]
    fn conflicting_units_are_rejected() {
        let e = load_scenario(r#"{"noise_power": 1e-17, "noise_power_dbm": -140}"#).unwrap_err();
        assert!(matches!(e, ScenarioFileError::Conflict("noise_power")));
    }

    #[test]
    fn per_user_lists_follow_the_user_count() {
        let e = load_scenario(r#"{"transmit_power": [0.1, 0.2]}"#).unwrap_err();
        assert!(matches!(e, ScenarioFileError::Length { got: 2, users: 3, .. }));
        let l = load_scenario(r#"{"user_positions": [[0,0,1]], "min_rate": 5}"#).unwrap();
        assert_eq!(l.scenario.min_rate, vec![5.0]);
        assert_eq!(l.scenario.transmit_power, vec![0.1]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(load_scenario(r#"{"noise": 1}"#).is_err());
    }
}
