//! Problem instances, time discretization and UAV kinematic feasibility.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in m/s.
pub const LIGHT_SPEED: f64 = 3.0e8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Positions share the vector type.
pub type Position3D = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

/// One value per link: BS–IRS, user–IRS and user–BS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkTriple {
    pub bu: f64,
    pub ku: f64,
    pub kb: f64,
}

impl LinkTriple {
    pub const fn uniform(v: f64) -> Self {
        Self { bu: v, ku: v, kb: v }
    }
}

/// Which link gain feeds the average-harvest expression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EhMode {
    /// BS–IRS gain, no conversion efficiency.
    #[default]
    BsLink,
    /// User–IRS gain scaled by the conversion efficiency.
    UserLink,
}

/// Logistic energy-harvesting parameters shared by all users.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EhParams {
    /// Linear conversion efficiency η.
    pub efficiency: f64,
    /// Logistic steepness c (1/J).
    pub steepness: f64,
    /// Logistic midpoint ν (J).
    pub midpoint: f64,
    /// Saturation level M_k (J).
    pub saturation: f64,
    /// Energy drawn by one element per slot p_m (J).
    pub element_energy: f64,
}

impl EhParams {
    /// Energy the whole panel needs per slot, `E_min = M·p_m`.
    pub fn panel_energy(&self, num_elements: usize) -> f64 {
        num_elements as f64 * self.element_energy
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZoneShape {
    #[default]
    Sphere,
    /// Vertical cylinder, distance measured in the horizontal plane.
    Cylinder,
    /// Cylinder when the center sits at the altitude ceiling, sphere otherwise.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoFlyZone {
    pub center: Vec3,
    pub radius: f64,
    #[serde(default)]
    pub shape: ZoneShape,
}

impl NoFlyZone {
    pub fn is_cylinder(&self, h_max: f64) -> bool {
        match self.shape {
            ZoneShape::Sphere => false,
            ZoneShape::Cylinder => true,
            ZoneShape::Auto => (self.center.z - h_max).abs() <= 1e-9,
        }
    }

    /// Offset from the zone axis or center used by the exclusion test.
    pub fn offset(&self, q: Vec3, h_max: f64) -> Vec3 {
        let d = q - self.center;
        if self.is_cylinder(h_max) {
            Vec3::new(d.x, d.y, 0.0)
        } else {
            d
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

/// A validated-or-not problem instance in linear SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_position: Vec3,
    pub user_positions: Vec<Vec3>,
    pub start_position: Vec3,
    pub end_position: Vec3,
    pub num_slots: usize,
    pub slot_duration: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub fading_blocks: usize,
    /// Transmit power per user (W).
    pub transmit_power: Vec<f64>,
    /// Minimum horizon rate per user (bits/Hz summed over slots).
    pub min_rate: Vec<f64>,
    /// Noise power σ² (W).
    pub noise_power: f64,
    pub carrier_frequency: f64,
    pub element_spacing: f64,
    pub panel_x: usize,
    pub panel_y: usize,
    pub rician: LinkTriple,
    pub pathloss: LinkTriple,
    /// Channel power gain at 1 m.
    pub reference_gain: f64,
    pub eh: EhParams,
    pub eh_mode: EhMode,
    pub nofly_zones: Vec<NoFlyZone>,
    /// Minimum UAV distance to the BS and to every user (m).
    pub node_clearance: f64,
    pub sca: LoopSettings,
    pub ao: LoopSettings,
    /// Initial common reflection coefficient.
    pub init_reflection: f64,
}

/// Which of the two reference flight corridors to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corridor {
    /// (0, 30, 10) → (300, 65, 10)
    Diagonal,
    /// (0, 45, 10) → (300, 45, 10)
    Level,
}

impl Scenario {
    /// The pinned three-user reference instance.
    pub fn reference(corridor: Corridor) -> Self {
        let (start, end) = match corridor {
            Corridor::Diagonal => (Vec3::new(0.0, 30.0, 10.0), Vec3::new(300.0, 65.0, 10.0)),
            Corridor::Level => (Vec3::new(0.0, 45.0, 10.0), Vec3::new(300.0, 45.0, 10.0)),
        };
        let fc = 3.4e9;
        let bandwidth = 1e6;
        let payload = 1e7;
        let slot = 0.5;
        let k = 3;
        Self {
            bs_position: Vec3::new(150.0, 50.0, 8.0),
            user_positions: vec![
                Vec3::new(20.0, 50.0, 1.0),
                Vec3::new(120.0, 40.0, 1.0),
                Vec3::new(240.0, 55.0, 1.0),
            ],
            start_position: start,
            end_position: end,
            num_slots: 60,
            slot_duration: slot,
            v_max: 20.0,
            a_max: 4.0,
            h_min: 1.0,
            h_max: 20.0,
            fading_blocks: 100,
            transmit_power: vec![0.1; k],
            min_rate: vec![payload / (bandwidth * slot); k],
            noise_power: dbm_to_watts(-140.0),
            carrier_frequency: fc,
            element_spacing: LIGHT_SPEED / fc / 2.0,
            panel_x: 5,
            panel_y: 5,
            rician: LinkTriple::uniform(db_to_linear(10.0)),
            pathloss: LinkTriple::uniform(2.4),
            reference_gain: free_space_gain(fc),
            eh: EhParams {
                efficiency: 0.8,
                steepness: 6400.0,
                midpoint: 0.003,
                saturation: 0.02,
                element_energy: DEFAULT_ELEMENT_ENERGY,
            },
            eh_mode: EhMode::BsLink,
            nofly_zones: vec![
                NoFlyZone { center: Vec3::new(80.0, 44.0, 20.0), radius: 4.0, shape: ZoneShape::Sphere },
                NoFlyZone { center: Vec3::new(200.0, 50.0, 20.0), radius: 4.0, shape: ZoneShape::Sphere },
            ],
            node_clearance: 1.0,
            sca: LoopSettings { tolerance: 1e-4, max_iterations: 30 },
            ao: LoopSettings { tolerance: 1e-4, max_iterations: 30 },
            init_reflection: 0.5,
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn num_elements(&self) -> usize {
        self.panel_x * self.panel_y
    }

    pub fn horizon(&self) -> f64 {
        self.num_slots as f64 * self.slot_duration
    }

    /// Per-slot transmit energy `E_k = δ_T·P_k`.
    pub fn slot_energy(&self, k: usize) -> f64 {
        self.slot_duration * self.transmit_power[k]
    }

    pub fn wavelength(&self) -> f64 {
        LIGHT_SPEED / self.carrier_frequency
    }

    /// `ϱ = 2π f_c d / c`.
    pub fn wave_factor(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.element_spacing / self.wavelength()
    }

    /// Replaces the panel by the most square `M_x × M_y` factorization of `m`.
    pub fn set_num_elements(&mut self, m: usize) {
        let mut mx = (m as f64).sqrt().floor() as usize;
        while mx > 1 && m % mx != 0 {
            mx -= 1;
        }
        self.panel_x = mx.max(1);
        self.panel_y = m / self.panel_x.max(1);
    }

    /// Checks every invariant and reports all failures at once.
    pub fn validate(self) -> Result<ValidatedScenario, ScenarioError> {
        let mut issues = Vec::new();
        let mut bad = |name: &str, reason: String| {
            issues.push(ScenarioIssue::BadParameter { name: name.to_string(), reason })
        };
        let positive = [
            ("slot_duration", self.slot_duration),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("h_min", self.h_min),
            ("noise_power", self.noise_power),
            ("carrier_frequency", self.carrier_frequency),
            ("element_spacing", self.element_spacing),
            ("reference_gain", self.reference_gain),
            ("eh.steepness", self.eh.steepness),
            ("eh.midpoint", self.eh.midpoint),
            ("eh.saturation", self.eh.saturation),
            ("eh.element_energy", self.eh.element_energy),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                bad(name, format!("must be positive and finite, got {v}"));
            }
        }
        if self.num_slots < 2 {
            bad("num_slots", format!("need at least 2, got {}", self.num_slots));
        }
        if self.h_min > self.h_max {
            bad("h_max", format!("{} below h_min {}", self.h_max, self.h_min));
        }
        if self.fading_blocks < 1 {
            bad("fading_blocks", "must be at least 1".into());
        }
        if self.num_elements() < 1 {
            bad("panel", "needs at least one element".into());
        }
        let k = self.num_users();
        if k < 1 {
            bad("user_positions", "need at least one user".into());
        }
        if self.transmit_power.len() != k || self.transmit_power.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            bad("transmit_power", format!("need {k} positive values"));
        }
        if self.min_rate.len() != k || self.min_rate.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            bad("min_rate", format!("need {k} nonnegative values"));
        }
        for (name, v) in [("rician.bu", self.rician.bu), ("rician.ku", self.rician.ku), ("rician.kb", self.rician.kb)] {
            if !(v >= 0.0) || v.is_nan() {
                bad(name, format!("must be nonnegative, got {v}"));
            }
        }
        for (name, v) in [("pathloss.bu", self.pathloss.bu), ("pathloss.ku", self.pathloss.ku), ("pathloss.kb", self.pathloss.kb)] {
            if !(v.is_finite() && v >= 2.0) {
                bad(name, format!("must be at least 2, got {v}"));
            }
        }
        if !(self.eh.efficiency > 0.0 && self.eh.efficiency <= 1.0) {
            bad("eh.efficiency", format!("must lie in (0, 1], got {}", self.eh.efficiency));
        }
        let e_min = self.eh.panel_energy(self.num_elements());
        if !(e_min > 0.0 && e_min < self.eh.saturation) {
            bad("eh.element_energy", format!("panel energy {e_min} must lie in (0, {})", self.eh.saturation));
        } else if let Ok(e) = crate::energy::min_input_threshold(&self.eh, e_min) {
            if e > THRESHOLD_CAP * self.eh.midpoint {
                bad("eh.element_energy", format!("input threshold {e} exceeds {THRESHOLD_CAP}·ν"));
            }
        }
        if !(self.init_reflection >= 0.0 && self.init_reflection <= 1.0) {
            bad("init_reflection", "must lie in [0, 1]".into());
        }
        if !(self.node_clearance >= 0.0) {
            bad("node_clearance", "must be nonnegative".into());
        }
        for (name, l) in [("sca", self.sca), ("ao", self.ao)] {
            if !(l.tolerance > 0.0) || l.max_iterations < 1 {
                bad(name, "needs positive tolerance and at least one iteration".into());
            }
        }
        let points = std::iter::once(self.bs_position)
            .chain(self.user_positions.iter().copied())
            .chain([self.start_position, self.end_position]);
        if points.clone().any(|p| !p.is_finite()) {
            bad("positions", "all coordinates must be finite".into());
        }
        for (name, p) in [("start_position", self.start_position), ("end_position", self.end_position)] {
            if p.z < self.h_min - KIN_TOL || p.z > self.h_max + KIN_TOL {
                bad(name, format!("altitude {} outside [{}, {}]", p.z, self.h_min, self.h_max));
            }
            for (i, z) in self.nofly_zones.iter().enumerate() {
                if z.offset(p, self.h_max).norm() < z.radius {
                    bad(name, format!("inside no-fly zone {i}"));
                }
            }
        }
        let reach = self.horizon() * self.v_max;
        let distance = (self.end_position - self.start_position).norm();
        if distance > reach {
            issues.push(ScenarioIssue::Unreachable { distance, reach });
        }
        if issues.is_empty() {
            Ok(ValidatedScenario(self))
        } else {
            Err(ScenarioError { issues })
        }
    }
}

/// Largest admissible harvest threshold as a multiple of the logistic midpoint.
pub const THRESHOLD_CAP: f64 = 10.0;

/// Default per-element energy draw (J per slot).
pub const DEFAULT_ELEMENT_ENERGY: f64 = 4.0e-14;

/// Absolute tolerance for kinematic inequalities (m, m/s).
pub const KIN_TOL: f64 = 1e-6;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

/// Free-space power gain at 1 m, `(c / (4π f_c))²`.
pub fn free_space_gain(fc: f64) -> f64 {
    (LIGHT_SPEED / (4.0 * std::f64::consts::PI * fc)).powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedScenario(Scenario);

impl ValidatedScenario {
    pub fn into_inner(self) -> Scenario {
        self.0
    }
}

impl std::ops::Deref for ValidatedScenario {
    type Target = Scenario;
    fn deref(&self) -> &Scenario {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioIssue {
    Unreachable { distance: f64, reach: f64 },
    BadParameter { name: String, reason: String },
}

impl fmt::Display for ScenarioIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unreachable { distance, reach } => {
                write!(f, "end position {distance:.3} m away but only {reach:.3} m reachable")
            }
            Self::BadParameter { name, reason } => write!(f, "{name}: {reason}"),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("invalid scenario: {}", .issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ScenarioError {
    pub issues: Vec<ScenarioIssue>,
}

impl ScenarioError {
    /// True when the only problem is that the end point cannot be reached.
    pub fn is_infeasible_instance(&self) -> bool {
        self.issues.iter().any(|i| matches!(i, ScenarioIssue::Unreachable { .. }))
    }
}

/// UAV positions at the `N + 1` slot boundaries and velocities over the `N` slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
}

impl Kinematics {
    /// Positions used for the channel in each slot (start of the slot).
    pub fn slot_positions(&self) -> &[Vec3] {
        &self.positions[..self.velocities.len()]
    }

    /// Positions rebuilt from the start point and the velocities.
    pub fn integrate(start: Vec3, velocities: &[Vec3], dt: f64) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(velocities.len() + 1);
        out.push(start);
        for v in velocities {
            let last = *out.last().unwrap();
            out.push(last + *v * dt);
        }
        out
    }

    pub fn path_length(&self) -> f64 {
        self.positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

pub fn straight_line_kinematics(s: &Scenario) -> Result<Kinematics, ScenarioError> {
    let n = s.num_slots;
    let delta = s.end_position - s.start_position;
    let v = delta * (1.0 / s.horizon());
    if v.norm() > s.v_max {
        return Err(ScenarioError {
            issues: vec![ScenarioIssue::Unreachable { distance: delta.norm(), reach: s.horizon() * s.v_max }],
        });
    }
    let positions = (0..=n)
        .map(|i| s.start_position + delta * (i as f64 / n as f64))
        .collect();
    Ok(Kinematics { positions, velocities: vec![v; n] })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KinematicConstraint {
    /// First position differs from the start point.
    Start,
    /// Last position differs from the end point.
    End,
    /// Position step disagrees with the slot velocity.
    Dynamics,
    Acceleration,
    Speed,
    AltitudeMin,
    AltitudeMax,
    NoFly(usize),
    /// Too close to a node: 0 is the BS, `k + 1` is user `k`.
    Clearance(usize),
    Dimensions,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicViolation {
    pub constraint: KinematicConstraint,
    pub slot: usize,
    pub magnitude: f64,
}

/// Nodes the UAV must keep `node_clearance` away from, BS first.
pub fn clearance_nodes(s: &Scenario) -> Vec<Vec3> {
    std::iter::once(s.bs_position).chain(s.user_positions.iter().copied()).collect()
}

/// Lists every violated kinematic constraint; empty when the trajectory is feasible.
pub fn check_kinematics(k: &Kinematics, s: &Scenario) -> Vec<KinematicViolation> {
    use KinematicConstraint as C;
    let n = s.num_slots;
    let mut out = Vec::new();
    let mut flag = |constraint, slot, magnitude: f64| {
        out.push(KinematicViolation { constraint, slot, magnitude });
    };
    if k.positions.len() != n + 1 || k.velocities.len() != n {
        flag(C::Dimensions, 0, (k.positions.len() as f64 - (n + 1) as f64).abs());
        return out;
    }
    let start_gap = (k.positions[0] - s.start_position).norm();
    if start_gap > KIN_TOL {
        flag(C::Start, 0, start_gap);
    }
    let end_gap = (k.positions[n] - s.end_position).norm();
    if end_gap > KIN_TOL {
        flag(C::End, n, end_gap);
    }
    let dyn_tol = KIN_TOL * n as f64;
    for i in 0..n {
        let gap = (k.positions[i + 1] - k.positions[i] - k.velocities[i] * s.slot_duration).norm();
        if gap > dyn_tol {
            flag(C::Dynamics, i, gap);
        }
        let speed = k.velocities[i].norm();
        if speed > s.v_max + KIN_TOL {
            flag(C::Speed, i, speed - s.v_max);
        }
        if i + 1 < n {
            let acc = (k.velocities[i + 1] - k.velocities[i]).norm();
            let cap = s.a_max * s.slot_duration;
            if acc > cap + KIN_TOL {
                flag(C::Acceleration, i, acc - cap);
            }
        }
    }
    let nodes = clearance_nodes(s);
    for (i, q) in k.positions.iter().enumerate() {
        if q.z < s.h_min - KIN_TOL {
            flag(C::AltitudeMin, i, s.h_min - q.z);
        }
        if q.z > s.h_max + KIN_TOL {
            flag(C::AltitudeMax, i, q.z - s.h_max);
        }
        for (z, zone) in s.nofly_zones.iter().enumerate() {
            let d = zone.offset(*q, s.h_max).norm();
            if d < zone.radius - KIN_TOL {
                flag(C::NoFly(z), i, zone.radius - d);
            }
        }
        for (j, node) in nodes.iter().enumerate() {
            let d = (*q - *node).norm();
            if d < s.node_clearance - KIN_TOL {
                flag(C::Clearance(j), i, s.node_clearance - d);
            }
        }
    }
    out
}
