//! Large-scale gains, departure angles, UPA steering vectors and Rician samples.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{clearance_nodes, Kinematics, Scenario, Vec3};

/// Closest the UAV may come to a node before angles are considered undefined (m).
pub const DEGENERATE_DISTANCE: f64 = 1e-3;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("UAV within {distance:e} m of node {node} at slot {slot}")]
    DegenerateGeometry { slot: usize, node: usize, distance: f64 },
}

/// Vertical sine and horizontal sine/cosine of one link.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub sin_vert: f64,
    pub sin_horiz: f64,
    pub cos_horiz: f64,
}

impl Angles {
    /// Phase slope along the x axis of the panel, `sin·cos`.
    pub fn x_dir(&self) -> f64 {
        self.sin_vert * self.cos_horiz
    }

    /// Phase slope along the y axis of the panel, `sin·sin`.
    pub fn y_dir(&self) -> f64 {
        self.sin_vert * self.sin_horiz
    }
}

fn horizontal(dx: f64, dy: f64) -> (f64, f64) {
    let h = dx.hypot(dy);
    if h > 0.0 {
        (dx / h, dy / h)
    } else {
        (0.0, 0.0)
    }
}

/// BS-to-IRS angles `(sin θ, sin φ, cos φ)`.
pub fn bs_angles(q_u: Vec3, q_b: Vec3, d_bu: f64) -> Angles {
    let (s, c) = horizontal(q_u.x - q_b.x, q_u.y - q_b.y);
    Angles { sin_vert: (q_b.z - q_u.z) / d_bu, sin_horiz: s, cos_horiz: c }
}

/// User-to-IRS angles `(sin ω, sin ζ, cos ζ)`, with ω measured from the user's altitude.
pub fn user_angles(q_u: Vec3, q_k: Vec3, d_ku: f64) -> Angles {
    let (s, c) = horizontal(q_k.x - q_u.x, q_k.y - q_u.y);
    Angles { sin_vert: (q_u.z - q_k.z) / d_ku, sin_horiz: s, cos_horiz: c }
}

pub fn path_gain(reference_gain: f64, d: f64, alpha: f64) -> f64 {
    reference_gain / d.powf(alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserLink {
    pub distance: f64,
    pub gain: f64,
    pub angles: Angles,
}

/// Geometry of one UAV position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotGeometry {
    pub position: Vec3,
    pub d_bu: f64,
    pub beta_bu: f64,
    pub bs: Angles,
    pub users: Vec<UserLink>,
}

impl SlotGeometry {
    pub fn at(q_u: Vec3, s: &Scenario) -> Self {
        let d_bu = (s.bs_position - q_u).norm();
        let users = s
            .user_positions
            .iter()
            .map(|q_k| {
                let d = (*q_k - q_u).norm();
                UserLink { distance: d, gain: path_gain(s.reference_gain, d, s.pathloss.ku), angles: user_angles(q_u, *q_k, d) }
            })
            .collect();
        Self {
            position: q_u,
            d_bu,
            beta_bu: path_gain(s.reference_gain, d_bu, s.pathloss.bu),
            bs: bs_angles(q_u, s.bs_position, d_bu),
            users,
        }
    }
}

/// Per-slot distances, gains and angles derived from a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleState {
    pub slots: Vec<SlotGeometry>,
    pub d_kb: Vec<f64>,
    pub beta_kb: Vec<f64>,
}

impl LargeScaleState {
    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn beta_ku(&self, k: usize, n: usize) -> f64 {
        self.slots[n].users[k].gain
    }
}

/// Direct BS–user distances and gains.
pub fn direct_links(s: &Scenario) -> (Vec<f64>, Vec<f64>) {
    s.user_positions
        .iter()
        .map(|q| {
            let d = (s.bs_position - *q).norm();
            (d, path_gain(s.reference_gain, d, s.pathloss.kb))
        })
        .unzip()
}

/// Geometry of every slot, evaluated at the slot's starting position.
pub fn compute_large_scale(k: &Kinematics, s: &Scenario) -> Result<LargeScaleState, ChannelError> {
    let nodes = clearance_nodes(s);
    for (slot, q) in k.slot_positions().iter().enumerate() {
        for (node, p) in nodes.iter().enumerate() {
            let distance = (*q - *p).norm();
            if distance < DEGENERATE_DISTANCE {
                return Err(ChannelError::DegenerateGeometry { slot, node, distance });
            }
        }
    }
    let (d_kb, beta_kb) = direct_links(s);
    Ok(LargeScaleState { slots: k.slot_positions().iter().map(|q| SlotGeometry::at(*q, s)).collect(), d_kb, beta_kb })
}

/// UPA response with entry `(m_x, m_y)` at index `m_x·M_y + m_y`.
pub fn steering_vector(x_dir: f64, y_dir: f64, mx: usize, my: usize, wave_factor: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(mx * my);
    for i in 0..mx {
        for j in 0..my {
            let phase = -wave_factor * (i as f64 * x_dir + j as f64 * y_dir);
            out.push(Complex64::from_polar(1.0, phase));
        }
    }
    out
}

/// Weights `(√(K/(K+1)), √(1/(K+1)))`, with an infinite factor meaning pure LoS.
pub fn rician_weights(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    }
}

/// `K/(K+1)` and `1/(K+1)` with the infinite limit handled.
pub fn rician_split(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        (k / (k + 1.0), 1.0 / (k + 1.0))
    }
}

fn distance_phase(d: f64, wavelength: f64) -> Complex64 {
    let turns = (d / wavelength).fract();
    Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * turns)
}

/// Deterministic parts of the three links seen by one user in one slot.
///
/// The BS–IRS LoS vector carries the propagation phase `e^{−j2πd_bu/λ}`. The
/// user–IRS LoS vector is the conjugate arrival response times
/// `e^{−j2πd_ku/λ}`, so that `h_kuᴴ Θ h_bu` has per-element phase
/// `−2π(d_bu − d_ku)/λ − ϱϑ_m + β_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkModel {
    pub beta_bu: f64,
    pub beta_ku: f64,
    pub beta_kb: f64,
    pub k_bu: f64,
    pub k_ku: f64,
    pub k_kb: f64,
    pub h_bu_los: Vec<Complex64>,
    pub h_ku_los: Vec<Complex64>,
    pub h_kb_los: Complex64,
}

impl LinkModel {
    pub fn new(ls: &LargeScaleState, s: &Scenario, k: usize, n: usize) -> Self {
        Self::from_geometry(&ls.slots[n], ls.d_kb[k], ls.beta_kb[k], s, k)
    }

    pub fn from_geometry(g: &SlotGeometry, d_kb: f64, beta_kb: f64, s: &Scenario, k: usize) -> Self {
        let lambda = s.wavelength();
        let w = s.wave_factor();
        let link = &g.users[k];
        let rot_bu = distance_phase(g.d_bu, lambda);
        let rot_ku = distance_phase(link.distance, lambda);
        let h_bu_los =
            steering_vector(g.bs.x_dir(), g.bs.y_dir(), s.panel_x, s.panel_y, w).into_iter().map(|a| a * rot_bu).collect();
        let h_ku_los = steering_vector(link.angles.x_dir(), link.angles.y_dir(), s.panel_x, s.panel_y, w)
            .into_iter()
            .map(|a| a.conj() * rot_ku)
            .collect();
        Self {
            beta_bu: g.beta_bu,
            beta_ku: link.gain,
            beta_kb,
            k_bu: s.rician.bu,
            k_ku: s.rician.ku,
            k_kb: s.rician.kb,
            h_bu_los,
            h_ku_los,
            h_kb_los: distance_phase(d_kb, lambda),
        }
    }

    pub fn num_elements(&self) -> usize {
        self.h_bu_los.len()
    }

    /// Draws one Rician realization of all three links.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelSample {
        let (lb, nb) = rician_weights(self.k_bu);
        let (lu, nu) = rician_weights(self.k_ku);
        let (ld, nd) = rician_weights(self.k_kb);
        let sb = self.beta_bu.sqrt();
        let su = self.beta_ku.sqrt();
        let h_bu = self.h_bu_los.iter().map(|l| (*l * lb + complex_normal(rng) * nb) * sb).collect();
        let h_ku = self.h_ku_los.iter().map(|l| (*l * lu + complex_normal(rng) * nu) * su).collect();
        let h_kb = (self.h_kb_los * ld + complex_normal(rng) * nd) * self.beta_kb.sqrt();
        ChannelSample { h_bu, h_ku, h_kb }
    }
}

/// One fading realization of the links of one user in one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSample {
    pub h_bu: Vec<Complex64>,
    pub h_ku: Vec<Complex64>,
    pub h_kb: Complex64,
}

/// Circularly symmetric complex Gaussian with unit total variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Samples every user's channels in slot `n`.
pub fn sample_channels<R: Rng + ?Sized>(ls: &LargeScaleState, s: &Scenario, n: usize, rng: &mut R) -> Vec<ChannelSample> {
    (0..s.num_users()).map(|k| LinkModel::new(ls, s, k, n).sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Corridor, Scenario};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vertical_alignment() {
        let a = user_angles(Vec3::new(0.0, 0.0, 10.0), Vec3::ZERO, 10.0);
        assert_eq!(a.sin_vert, 1.0);
    }

    #[test]
    fn bs_horizontal_angles_match_atan2() {
        let b = Vec3::new(5.0, -2.0, 8.0);
        let q = b + Vec3::new(3.0, 4.0, 0.0);
        let a = bs_angles(q, b, 5.0);
        assert!((a.sin_horiz - 0.6).abs() < 1e-15 && (a.cos_horiz - 0.8).abs() < 1e-15);
        let phi = (3.0f64).atan2(4.0);
        assert!((a.sin_horiz - phi.sin()).abs() < 1e-12 && (a.cos_horiz - phi.cos()).abs() < 1e-12);
        assert_eq!(a.sin_vert, 0.0);
    }

    #[test]
    fn reference_distance_gives_reference_gain() {
        for alpha in [2.0, 2.4, 3.7] {
            assert_eq!(path_gain(4.2e-5, 1.0, alpha), 4.2e-5);
        }
    }

    #[test]
    fn steering_examples() {
        assert!(steering_vector(0.0, 0.0, 3, 4, 2.0).iter().all(|c| *c == Complex64::new(1.0, 0.0)));
        assert_eq!(steering_vector(0.3, -0.2, 1, 1, 2.0), vec![Complex64::new(1.0, 0.0)]);
        let v = steering_vector(0.5, 0.0, 2, 2, std::f64::consts::PI);
        let q = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_2);
        let want = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), q, q];
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn infinite_rician_factor_is_pure_los() {
        let mut s = Scenario::reference(Corridor::Level);
        s.rician = crate::scenario::LinkTriple::uniform(1e12);
        let k = crate::scenario::straight_line_kinematics(&s).unwrap();
        let ls = compute_large_scale(&k, &s).unwrap();
        let link = LinkModel::new(&ls, &s, 1, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = link.sample(&mut rng);
        for (h, l) in sample.h_bu.iter().zip(&link.h_bu_los) {
            assert!((h - l * link.beta_bu.sqrt()).norm() <= 1e-4 * link.beta_bu.sqrt());
        }
        assert!((sample.h_kb - link.h_kb_los * link.beta_kb.sqrt()).norm() <= 1e-4 * link.beta_kb.sqrt());
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = Scenario::reference(Corridor::Diagonal);
        let k = crate::scenario::straight_line_kinematics(&s).unwrap();
        let ls = compute_large_scale(&k, &s).unwrap();
        let a = sample_channels(&ls, &s, 4, &mut ChaCha8Rng::seed_from_u64(11));
        let b = sample_channels(&ls, &s, 4, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let mut s = Scenario::reference(Corridor::Level);
        s.start_position = s.bs_position;
        s.end_position = s.bs_position;
        let k = crate::scenario::straight_line_kinematics(&s).unwrap();
        assert!(matches!(compute_large_scale(&k, &s), Err(ChannelError::DegenerateGeometry { node: 0, .. })));
    }
}
