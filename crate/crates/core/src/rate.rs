//! Average-rate upper bound and the surrogates built on it.
//!
//! All rates are in bits/Hz. The expected received power is
//! `g = |b|² + β_kb/(K_kb+1) + ρ̄²·M·β_bu·β_ku·(K_ku+K_bu+1)/((K_ku+1)(K_bu+1))`
//! and the rate bound is `s·log₂(1 + P·g/σ²)`.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{rician_split, LinkModel};
use crate::scenario::LinkTriple;

/// Deterministic received amplitude `b_k` for given phases.
pub fn b_k(link: &LinkModel, rho: f64, phases: &[f64]) -> Complex64 {
    let (kd, _) = rician_split(link.k_kb);
    let (ku, _) = rician_split(link.k_ku);
    let (kb, _) = rician_split(link.k_bu);
    let direct = link.h_kb_los * (kd * link.beta_kb).sqrt();
    let cascade: Complex64 = link
        .h_ku_los
        .iter()
        .zip(&link.h_bu_los)
        .zip(phases)
        .map(|((hu, hb), beta)| hu.conj() * Complex64::from_polar(1.0, *beta) * hb)
        .sum();
    direct + cascade * ((ku * kb * link.beta_bu * link.beta_ku).sqrt() * rho)
}

/// Power of the scattered cascaded components, `ρ̄²·M·β_bu·β_ku·(1 − K_ku K_bu/((K_ku+1)(K_bu+1)))`.
pub fn scattered_cascade(beta_bu: f64, beta_ku: f64, rho: f64, m: usize, rician: &LinkTriple) -> f64 {
    let (ku, _) = rician_split(rician.ku);
    let (kb, _) = rician_split(rician.bu);
    rho * rho * m as f64 * beta_bu * beta_ku * (1.0 - ku * kb)
}

/// Expected received channel power `g_k` at the given phases.
pub fn mean_gain(link: &LinkModel, rho: f64, phases: &[f64]) -> f64 {
    let rician = LinkTriple { bu: link.k_bu, ku: link.k_ku, kb: link.k_kb };
    let (_, nd) = rician_split(link.k_kb);
    b_k(link, rho, phases).norm_sqr()
        + link.beta_kb * nd
        + scattered_cascade(link.beta_bu, link.beta_ku, rho, link.num_elements(), &rician)
}

/// Upper bound on the average rate of user `k` in one slot.
pub fn rate_bound(link: &LinkModel, rho: f64, phases: &[f64], s_k: f64, p_k: f64, noise: f64) -> f64 {
    s_k * (p_k / noise * mean_gain(link, rho, phases)).ln_1p() / LN_2
}

/// `|b_k|²` when the phases align every cascaded path with the direct one.
pub fn b_squared_optimal(beta_bu: f64, beta_ku: f64, beta_kb: f64, rho: f64, m: usize, rician: &LinkTriple) -> f64 {
    let (kd, _) = rician_split(rician.kb);
    let (ku, _) = rician_split(rician.ku);
    let (kb, _) = rician_split(rician.bu);
    let m = m as f64;
    let casc = ku * kb * beta_bu * beta_ku * rho * rho;
    kd * beta_kb + m * m * casc + 2.0 * m * (kd * beta_kb * casc).sqrt()
}

/// Expected received power at optimal phases.
pub fn optimal_gain(beta_bu: f64, beta_ku: f64, beta_kb: f64, rho: f64, m: usize, rician: &LinkTriple) -> f64 {
    let (_, nd) = rician_split(rician.kb);
    b_squared_optimal(beta_bu, beta_ku, beta_kb, rho, m, rician)
        + nd * beta_kb
        + scattered_cascade(beta_bu, beta_ku, rho, m, rician)
}

/// Rate bound per unit of scheduled share at optimal phases.
pub fn optimal_rate(beta_bu: f64, beta_ku: f64, beta_kb: f64, rho: f64, m: usize, rician: &LinkTriple, snr: f64) -> f64 {
    (snr * optimal_gain(beta_bu, beta_ku, beta_kb, rho, m, rician)).ln_1p() / LN_2
}

/// Coefficients of the rate bound as a function of `β_bu·β_ku`.
///
/// `psi5` carries the scattered direct-link power `1/(K_kb+1)`, so the
/// ψ-form equals [`rate_bound`] at optimal phases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiCoefficients {
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
    pub psi4: f64,
    pub psi5: f64,
}

impl PsiCoefficients {
    /// `ψ₄ + ψ₅`, the weight of `β_kb`.
    pub fn direct(&self) -> f64 {
        self.psi4 + self.psi5
    }
}

pub fn psi(beta_kb: f64, rho: f64, rician: &LinkTriple, m: usize) -> PsiCoefficients {
    let (kd, nd) = rician_split(rician.kb);
    let (ku, _) = rician_split(rician.ku);
    let (kb, _) = rician_split(rician.bu);
    let m = m as f64;
    let r2 = rho * rho;
    PsiCoefficients {
        psi1: ku * kb * m * m * r2,
        psi2: r2 * (1.0 - ku * kb) * m,
        psi3: 2.0 * m * (kd * ku * kb * beta_kb * r2).sqrt(),
        psi4: kd,
        psi5: nd,
    }
}

/// ψ-form of the rate with the product `β_bu·β_ku` written as `u·r`.
pub fn gamma(psi: &PsiCoefficients, u: f64, r: f64, beta_kb: f64, s_k: f64, snr: f64) -> f64 {
    let g = (psi.psi1 + psi.psi2) * u * r + psi.psi3 * (u * r).sqrt() + psi.direct() * beta_kb;
    s_k * (snr * g).ln_1p() / LN_2
}

/// `x ↦ scale·log₂(1 + snr·(a x² + b x + c))` for `x ≥ 0`.
///
/// Both the rate in the substituted slack `t` and the rate in `ρ̄` take this
/// form, so the tangent and the minorant are shared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogQuadratic {
    pub scale: f64,
    pub snr: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LogQuadratic {
    /// The rate as a function of `t = √(u·r)`.
    pub fn in_t(psi: &PsiCoefficients, beta_kb: f64, s_k: f64, snr: f64) -> Self {
        Self { scale: s_k, snr, a: psi.psi1 + psi.psi2, b: psi.psi3, c: psi.direct() * beta_kb }
    }

    /// The rate as a function of `ρ̄` with the geometry fixed.
    pub fn in_rho(beta_bu: f64, beta_ku: f64, beta_kb: f64, rician: &LinkTriple, m: usize, s_k: f64, snr: f64) -> Self {
        let unit = psi(beta_kb, 1.0, rician, m);
        let ur = beta_bu * beta_ku;
        Self { scale: s_k, snr, a: (unit.psi1 + unit.psi2) * ur, b: unit.psi3 * ur.sqrt(), c: unit.direct() * beta_kb }
    }

    /// `1 + snr·(a x² + b x + c)`.
    pub fn power(&self, x: f64) -> f64 {
        1.0 + self.snr * ((self.a * x + self.b) * x + self.c)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.scale * (self.snr * ((self.a * x + self.b) * x + self.c)).ln_1p() / LN_2
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.scale * self.snr * (2.0 * self.a * x + self.b) / (self.power(x) * LN_2)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let w = self.power(x);
        let w1 = self.snr * (2.0 * self.a * x + self.b);
        let w2 = 2.0 * self.snr * self.a;
        self.scale * (w2 * w - w1 * w1) / (w * w * LN_2)
    }

    /// First-order expansion at `x0`.
    pub fn tangent(&self, x: f64, x0: f64) -> f64 {
        self.value(x0) + self.derivative(x0) * (x - x0)
    }

    /// Power with `x²` replaced by its tangent `2x₀x − x₀²`; affine in `x`, never above [`Self::power`].
    pub fn linearized_power(&self, x: f64, x0: f64) -> f64 {
        1.0 + self.snr * (self.a * (2.0 * x0 * x - x0 * x0) + self.b * x + self.c)
    }

    /// Global lower bound tight at `x0` with matching slope.
    ///
    /// Uses `x² ≥ 2x₀x − x₀²` inside the logarithm and then
    /// `ln w ≥ ln w₀ + 1 − w₀/w`. Returns `−∞` where the linearized power is
    /// not positive.
    pub fn minorant(&self, x: f64, x0: f64) -> f64 {
        let w0 = self.power(x0);
        let w = self.linearized_power(x, x0);
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.scale * (w0.ln() + 1.0 - w0 / w) / LN_2
    }

    /// Slope of the minorant at `x`.
    pub fn minorant_derivative(&self, x: f64, x0: f64) -> f64 {
        let w0 = self.power(x0);
        let w = self.linearized_power(x, x0);
        let dw = self.snr * (2.0 * self.a * x0 + self.b);
        self.scale * w0 * dw / (w * w * LN_2)
    }
}

/// Rate in the substituted slack `t`.
pub fn gamma_bar(t: f64, beta_kb: f64, psi: &PsiCoefficients, s_k: f64, p_k: f64, noise: f64) -> f64 {
    LogQuadratic::in_t(psi, beta_kb, s_k, p_k / noise).value(t)
}

pub fn gamma_bar_derivative(t: f64, beta_kb: f64, psi: &PsiCoefficients, s_k: f64, p_k: f64, noise: f64) -> f64 {
    LogQuadratic::in_t(psi, beta_kb, s_k, p_k / noise).derivative(t)
}

/// First-order expansion of [`gamma_bar`] at `t_prev`.
pub fn psi_linearized(t: f64, t_prev: f64, beta_kb: f64, psi: &PsiCoefficients, s_k: f64, p_k: f64, noise: f64) -> f64 {
    LogQuadratic::in_t(psi, beta_kb, s_k, p_k / noise).tangent(t, t_prev)
}

/// Minorant of [`gamma_bar`] used by the trajectory subproblem.
pub fn gamma_bar_minorant(t: f64, t_prev: f64, beta_kb: f64, psi: &PsiCoefficients, s_k: f64, p_k: f64, noise: f64) -> f64 {
    LogQuadratic::in_t(psi, beta_kb, s_k, p_k / noise).minorant(t, t_prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> LinkTriple {
        LinkTriple::uniform(10.0)
    }

    #[test]
    fn psi_without_reflection() {
        let p = psi(3e-10, 0.0, &table(), 25);
        assert_eq!((p.psi1, p.psi2, p.psi3), (0.0, 0.0, 0.0));
        assert!((p.psi4 - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn psi_without_los() {
        let p = psi(3e-10, 0.7, &LinkTriple::uniform(0.0), 25);
        assert_eq!(p.psi1, 0.0);
        assert_eq!(p.psi3, 0.0);
        assert!((p.psi2 - 0.49 * 25.0).abs() < 1e-12);
    }

    #[test]
    fn psi_form_matches_closed_form() {
        let (bu, ku, kb) = (2e-6, 7e-7, 4e-10);
        for rho in [0.0, 0.3, 1.0] {
            let p = psi(kb, rho, &table(), 25);
            let direct = optimal_rate(bu, ku, kb, rho, 25, &table(), 1e16);
            let form = gamma(&p, bu, ku, kb, 1.0, 1e16);
            assert!((direct - form).abs() <= 1e-9 * direct, "{direct} {form}");
            let t = (bu * ku).sqrt();
            assert!((gamma_bar(t, kb, &p, 1.0, 0.1, 1e-17) - form).abs() <= 1e-9 * form);
        }
    }

    #[test]
    fn minorant_touches_and_stays_below() {
        let p = psi(4e-10, 0.8, &table(), 25);
        let f = LogQuadratic::in_t(&p, 4e-10, 1.0, 1e16);
        let t0 = 1e-6;
        assert!((f.minorant(t0, t0) - f.value(t0)).abs() < 1e-12);
        assert!((f.minorant_derivative(t0, t0) - f.derivative(t0)).abs() <= 1e-12 * f.derivative(t0));
        for i in 0..200 {
            let t = i as f64 * 2e-8;
            assert!(f.minorant(t, t0) <= f.value(t) + 1e-12);
        }
    }

    #[test]
    fn rate_in_rho_matches_psi_form() {
        let (bu, ku, kb) = (2e-6, 7e-7, 4e-10);
        let f = LogQuadratic::in_rho(bu, ku, kb, &table(), 16, 0.5, 1e16);
        for rho in [0.0, 0.25, 0.9] {
            let want = gamma(&psi(kb, rho, &table(), 16), bu, ku, kb, 0.5, 1e16);
            assert!((f.value(rho) - want).abs() <= 1e-12 * want);
        }
    }
}
