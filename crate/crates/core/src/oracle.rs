//! Monte-Carlo estimates of the rate, the received-power decomposition and
//! the harvested energy, used to check the analytic bounds.
//!
//! Samples are drawn in shards of [`SHARD_SIZE`]. Shard `i` of job `j` uses
//! `ChaCha8Rng::seed_from_u64(seed)` with stream `(j << 32) | i`. Shards run in
//! parallel and are merged in index order, so results depend only on the
//! seed and the sample count.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_normal, compute_large_scale, rician_split, ChannelError, LinkModel};
use crate::energy::linear_harvest;
use crate::orchestrator::DecisionState;
use crate::phase::optimal_phases;
use crate::rate::{b_k, rate_bound};
use crate::scenario::Scenario;

pub const SHARD_SIZE: usize = 10_000;
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Streaming mean and second central moment.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Self) -> Self {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Self { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }

    fn estimate(self) -> Estimate {
        let var = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { 0.0 };
        Estimate { mean: self.mean, std_err: (var / self.n.max(1.0)).sqrt(), samples: self.n as usize }
    }
}

/// Sum of independent estimates, with standard errors added in quadrature.
fn sum_estimates(items: impl IntoIterator<Item = Estimate>) -> Estimate {
    let mut mean = 0.0;
    let mut comp = 0.0;
    let mut var = 0.0;
    let mut samples = 0;
    for e in items {
        let t = mean + e.mean;
        comp += if f64::abs(mean) >= e.mean.abs() { (mean - t) + e.mean } else { (e.mean - t) + mean };
        mean = t;
        var += e.std_err * e.std_err;
        samples = samples.max(e.samples);
    }
    Estimate { mean: mean + comp, std_err: var.sqrt(), samples }
}

fn shard_rng(seed: u64, job: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((job << 32) | shard);
    rng
}

/// Runs `draw` `samples` times, each call returning `W` values, and estimates their means.
fn sharded<const W: usize, F>(samples: usize, seed: u64, job: u64, draw: F) -> [Estimate; W]
where
    F: Fn(&mut ChaCha8Rng) -> [f64; W] + Sync,
{
    let shards = samples.div_ceil(SHARD_SIZE);
    let parts: Vec<[Moments; W]> = (0..shards)
        .into_par_iter()
        .map(|i| {
            let mut rng = shard_rng(seed, job, i as u64);
            let count = SHARD_SIZE.min(samples - i * SHARD_SIZE);
            let mut acc = [Moments::default(); W];
            for _ in 0..count {
                for (a, x) in acc.iter_mut().zip(draw(&mut rng)) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = [Moments::default(); W];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t = t.merge(p);
        }
    }
    total.map(Moments::estimate)
}

fn cascade(hu: &[Complex64], hb: &[Complex64], phases: &[f64]) -> Complex64 {
    hu.iter().zip(hb).zip(phases).map(|((u, b), beta)| u.conj() * Complex64::from_polar(1.0, *beta) * b).sum()
}

/// Empirical `E[s·log₂(1 + P|h_kb + ρ̄ h_kuᴴ Θ h_bu|²/σ²)]` for one link.
pub fn mc_rate_link(
    link: &LinkModel,
    rho: f64,
    phases: &[f64],
    s_k: f64,
    snr: f64,
    samples: usize,
    seed: u64,
    job: u64,
) -> Estimate {
    let [e] = sharded(samples, seed, job, |rng| {
        let h = link.sample(rng);
        let g = (h.h_kb + cascade(&h.h_ku, &h.h_bu, phases) * rho).norm_sqr();
        [s_k * (snr * g).ln_1p() / std::f64::consts::LN_2]
    });
    e
}

/// Monte-Carlo and closed-form values of the five received-power terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `E|a|²`, scattered direct link.
    pub a: Estimate,
    /// `|b|²`, deterministic.
    pub b: f64,
    /// `E|c|²`, scattered user–IRS with LoS BS–IRS.
    pub c: Estimate,
    /// `E|d|²`, LoS user–IRS with scattered BS–IRS.
    pub d: Estimate,
    /// `E|e|²`, both cascaded links scattered.
    pub e: Estimate,
    /// `E|a+b+c+d+e|²`.
    pub total: Estimate,
    /// Per-sample `|a+b+c+d+e|² − Σ|term|²`, zero in expectation.
    pub cross: Estimate,
    /// Closed forms in the order a, b, c, d, e.
    pub closed: [f64; 5],
}

impl Decomposition {
    pub fn terms(&self) -> [Estimate; 5] {
        let b = Estimate { mean: self.b, std_err: 0.0, samples: self.a.samples };
        [self.a, b, self.c, self.d, self.e]
    }
}

/// Splits the received power of one link into its five independent terms.
pub fn mc_decomposition_link(link: &LinkModel, rho: f64, phases: &[f64], samples: usize, seed: u64, job: u64) -> Decomposition {
    let m = link.num_elements();
    let (lb, nb) = rician_split(link.k_bu);
    let (lu, nu) = rician_split(link.k_ku);
    let (_, nd) = rician_split(link.k_kb);
    let bb = link.beta_bu * link.beta_ku;
    let b = b_k(link, rho, phases);
    let wa = (link.beta_kb * nd).sqrt();
    let wc = (bb * lb * nu).sqrt() * rho;
    let wd = (bb * lu * nb).sqrt() * rho;
    let we = (bb * nu * nb).sqrt() * rho;
    let [a, c, d, e, total, cross] = sharded(samples, seed, job, |rng| {
        let n_kb = complex_normal(rng);
        let n_ku: Vec<Complex64> = (0..m).map(|_| complex_normal(rng)).collect();
        let n_bu: Vec<Complex64> = (0..m).map(|_| complex_normal(rng)).collect();
        let ta = n_kb * wa;
        let tc = cascade(&n_ku, &link.h_bu_los, phases) * wc;
        let td = cascade(&link.h_ku_los, &n_bu, phases) * wd;
        let te = cascade(&n_ku, &n_bu, phases) * we;
        let parts = [ta.norm_sqr(), tc.norm_sqr(), td.norm_sqr(), te.norm_sqr()];
        let g = (ta + b + tc + td + te).norm_sqr();
        let cross = g - parts.iter().sum::<f64>() - b.norm_sqr();
        [parts[0], parts[1], parts[2], parts[3], g, cross]
    });
    let mf = m as f64;
    let r2 = rho * rho;
    Decomposition {
        a,
        b: b.norm_sqr(),
        c,
        d,
        e,
        total,
        cross,
        closed: [link.beta_kb * nd, b.norm_sqr(), r2 * mf * bb * lb * nu, r2 * mf * bb * lu * nb, r2 * mf * bb * nu * nb],
    }
}

/// Empirical linear harvest `η·s·P·(1−ρ̄²)·‖h_ku‖²` for one link.
pub fn mc_harvest_link(link: &LinkModel, rho: f64, s_k: f64, p_k: f64, efficiency: f64, samples: usize, seed: u64, job: u64) -> Estimate {
    let (lu, nu) = crate::channel::rician_weights(link.k_ku);
    let su = link.beta_ku.sqrt();
    let [e] = sharded(samples, seed, job, |rng| {
        let g: f64 = link.h_ku_los.iter().map(|l| ((*l * lu + complex_normal(rng) * nu) * su).norm_sqr()).sum();
        [linear_harvest(efficiency, s_k, p_k, rho, g)]
    });
    e
}

/// Monte-Carlo check of one user's horizon quantity against its analytic value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub kind: String,
    pub user: usize,
    pub estimate: Estimate,
    pub analytic: f64,
    pub seed: u64,
}

impl OracleRecord {
    /// One-sided check `estimate ≤ analytic + 3σ`.
    pub fn below_bound(&self) -> bool {
        self.estimate.mean <= self.analytic + 3.0 * self.estimate.std_err
    }

    /// Two-sided check `|estimate − analytic| ≤ 3σ`.
    pub fn agrees(&self) -> bool {
        (self.estimate.mean - self.analytic).abs() <= 3.0 * self.estimate.std_err
    }
}

fn pairs(state: &DecisionState, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let share = state.schedule.effective();
    (0..share[k].len()).filter_map(move |n| (share[k][n] > 0.0).then_some((n, share[k][n])))
}

fn phases_for(state: &DecisionState, ls: &crate::channel::LargeScaleState, s: &Scenario, k: usize, n: usize) -> Vec<f64> {
    state.phases.get(k, n).map(<[f64]>::to_vec).unwrap_or_else(|| optimal_phases(ls, s, k, n))
}

/// Horizon rate of every user: Monte-Carlo mean against the analytic bound.
pub fn mc_rate(state: &DecisionState, s: &Scenario, samples: usize, seed: u64) -> Result<Vec<OracleRecord>, ChannelError> {
    let ls = compute_large_scale(&state.kinematics, s)?;
    Ok((0..s.num_users())
        .map(|k| {
            let snr = s.transmit_power[k] / s.noise_power;
            let mut bound = 0.0;
            let est = sum_estimates(pairs(state, k).map(|(n, sh)| {
                let link = LinkModel::new(&ls, s, k, n);
                let ph = phases_for(state, &ls, s, k, n);
                bound += rate_bound(&link, state.rho[n], &ph, sh, s.transmit_power[k], s.noise_power);
                mc_rate_link(&link, state.rho[n], &ph, sh, snr, samples, seed, (k * s.num_slots + n) as u64)
            }));
            OracleRecord { kind: "rate".into(), user: k, estimate: est, analytic: bound, seed }
        })
        .collect())
}

/// Received-power decomposition of every scheduled pair, as `(k, n, terms)`.
pub fn mc_decomposition(
    state: &DecisionState,
    s: &Scenario,
    samples: usize,
    seed: u64,
) -> Result<Vec<(usize, usize, Decomposition)>, ChannelError> {
    let ls = compute_large_scale(&state.kinematics, s)?;
    let mut out = Vec::new();
    for k in 0..s.num_users() {
        for (n, _) in pairs(state, k) {
            let link = LinkModel::new(&ls, s, k, n);
            let ph = phases_for(state, &ls, s, k, n);
            out.push((k, n, mc_decomposition_link(&link, state.rho[n], &ph, samples, seed, (k * s.num_slots + n) as u64)));
        }
    }
    Ok(out)
}

/// Horizon harvest of every user with sampled user–IRS channels, against
/// `Σ s·P·(1−ρ̄²)·M·β_ku·η`.
pub fn mc_harvest(state: &DecisionState, s: &Scenario, samples: usize, seed: u64) -> Result<Vec<OracleRecord>, ChannelError> {
    let ls = compute_large_scale(&state.kinematics, s)?;
    let m = s.num_elements() as f64;
    let eta = s.eh.efficiency;
    Ok((0..s.num_users())
        .map(|k| {
            let p = s.transmit_power[k];
            let mut analytic = 0.0;
            let est = sum_estimates(pairs(state, k).map(|(n, sh)| {
                let link = LinkModel::new(&ls, s, k, n);
                let rho = state.rho[n];
                analytic += sh * p * (1.0 - rho * rho) * m * link.beta_ku * eta;
                mc_harvest_link(&link, rho, sh, p, eta, samples, seed, (k * s.num_slots + n) as u64)
            }));
            OracleRecord { kind: "harvest".into(), user: k, estimate: est, analytic, seed }
        })
        .collect())
}
