//! Closed-form IRS phase shifts aligning the cascaded and direct paths.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::channel::{Angles, LargeScaleState, SlotGeometry};
use crate::scenario::Scenario;

/// Geometric phase index `ϑ` of element `(m_i, m_j)`, both 1-based.
pub fn theta_geometry(bs: &Angles, user: &Angles, m_i: usize, m_j: usize) -> f64 {
    let i = (m_i - 1) as f64;
    let j = (m_j - 1) as f64;
    i * bs.x_dir() + j * bs.y_dir() + i * user.x_dir() + j * user.y_dir()
}

pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Phases of every element for user `k` at one UAV position, wrapped to `[0, 2π)`.
pub fn optimal_phases_at(g: &SlotGeometry, d_kb: f64, s: &Scenario, k: usize) -> Vec<f64> {
    let lambda = s.wavelength();
    let link = &g.users[k];
    let path = TAU * (g.d_bu / lambda).fract() - TAU * (link.distance / lambda).fract() - TAU * (d_kb / lambda).fract();
    let w = s.wave_factor();
    let mut out = Vec::with_capacity(s.num_elements());
    for i in 1..=s.panel_x {
        for j in 1..=s.panel_y {
            out.push(wrap_phase(path + w * theta_geometry(&g.bs, &link.angles, i, j)));
        }
    }
    out
}

pub fn optimal_phases(ls: &LargeScaleState, s: &Scenario, k: usize, n: usize) -> Vec<f64> {
    optimal_phases_at(&ls.slots[n], ls.d_kb[k], s, k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotPhases {
    pub user: usize,
    pub phases: Vec<f64>,
}

/// Phases for the users holding a nonzero share of each slot.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub slots: Vec<Vec<SlotPhases>>,
}

impl PhaseConfig {
    /// `share[k][n]` is the scheduled fraction of slot `n` for user `k`.
    pub fn for_schedule(ls: &LargeScaleState, s: &Scenario, share: &[Vec<f64>]) -> Self {
        let slots = (0..ls.num_slots())
            .map(|n| {
                (0..s.num_users())
                    .filter(|&k| share[k][n] > 0.0)
                    .map(|k| SlotPhases { user: k, phases: optimal_phases(ls, s, k, n) })
                    .collect()
            })
            .collect();
        Self { slots }
    }

    pub fn get(&self, k: usize, n: usize) -> Option<&[f64]> {
        self.slots.get(n)?.iter().find(|p| p.user == k).map(|p| p.phases.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_examples() {
        let a = Angles { sin_vert: 0.4, sin_horiz: 0.6, cos_horiz: 0.8 };
        assert_eq!(theta_geometry(&a, &a, 1, 1), 0.0);
        let z = Angles { sin_vert: 0.0, sin_horiz: 0.0, cos_horiz: 1.0 };
        assert_eq!(theta_geometry(&z, &z, 3, 2), 0.0);
        let b = Angles { sin_vert: -0.3, sin_horiz: 0.28, cos_horiz: -0.96 };
        let got = theta_geometry(&a, &b, 2, 3);
        let want = 0.4 * 0.8 + 2.0 * 0.4 * 0.6 + (-0.3) * (-0.96) + 2.0 * (-0.3) * 0.28;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn wrap_stays_in_range() {
        for x in [-TAU, -1e-18, 0.0, TAU, 3.0 * TAU + 0.5, -7.0] {
            let w = wrap_phase(x);
            assert!((0.0..TAU).contains(&w), "{x} -> {w}");
        }
    }
}
