mod common;

use std::f64::consts::TAU;

use irsuav_core::channel::{direct_links, LinkModel, SlotGeometry};
use irsuav_core::energy::{min_input_threshold, nonlinear_harvest};
use irsuav_core::phase::{optimal_phases_at, wrap_phase};
use irsuav_core::rate::{b_k, b_squared_optimal, psi, LogQuadratic};
use irsuav_core::scenario::{EhParams, Vec3};
use irsuav_core::scheduling::round_slot;
use irsuav_core::trajectory::{distance_sq_minorant, gain_minorant};
use proptest::prelude::*;

fn eh_params() -> impl Strategy<Value = (EhParams, f64)> {
    (-4.0..-1.0f64, 1.0..40.0f64, -3.0..0.0f64, 0.1..=1.0f64, 0.01..0.99f64).prop_map(|(mid, cv, sat, eta, frac)| {
        let midpoint = 10f64.powf(mid);
        let saturation = 10f64.powf(sat);
        let p = EhParams { efficiency: eta, steepness: cv / midpoint, midpoint, saturation, element_energy: 1e-14 };
        (p, saturation * frac)
    })
}

fn point() -> impl Strategy<Value = Vec3> {
    (0.0..300.0f64, 20.0..80.0f64, 0.0..20.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn log_quadratic() -> impl Strategy<Value = (LogQuadratic, f64)> {
    (-8.0..-5.0f64, -8.0..-5.0f64, -11.0..-9.0f64, 0.0..=1.0f64, 0..3usize, 0.1..=1.0f64, any::<bool>()).prop_map(
        |(bu, ku, kb, rho, m, share, in_t)| {
            let s = common::reference();
            let (bu, ku, kb) = (10f64.powf(bu), 10f64.powf(ku), 10f64.powf(kb));
            let m = [4, 25, 100][m];
            let snr = s.transmit_power[0] / s.noise_power;
            if in_t {
                (LogQuadratic::in_t(&psi(kb, rho, &s.rician, m), kb, share, snr), (bu * ku).sqrt())
            } else {
                (LogQuadratic::in_rho(bu, ku, kb, &s.rician, m, share, snr), 1.0)
            }
        },
    )
}

proptest! {
    #[test]
    fn harvest_inverts_the_threshold((p, e_min) in eh_params()) {
        let x = min_input_threshold(&p, e_min).unwrap();
        prop_assert!((nonlinear_harvest(x, &p) - e_min).abs() <= 1e-9 * e_min);
        prop_assert_eq!(nonlinear_harvest(0.0, &p), 0.0);
    }

    #[test]
    fn harvest_is_nondecreasing((p, _) in eh_params(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = (a.min(b) * 2.0 * p.midpoint, a.max(b) * 2.0 * p.midpoint);
        prop_assert!(nonlinear_harvest(lo, &p) <= nonlinear_harvest(hi, &p));
        prop_assert!(nonlinear_harvest(hi, &p) <= p.saturation * (1.0 + 1e-12));
    }

    #[test]
    fn thresholds_outside_the_range_are_rejected((p, _) in eh_params(), over in 1.0..10.0f64) {
        prop_assert!(min_input_threshold(&p, p.saturation * over).is_err());
        prop_assert!(min_input_threshold(&p, 0.0).is_err());
    }

    #[test]
    fn gain_minorant_is_a_tangent(d in 1.0..1e5f64, d0 in 1.0..1e5f64, alpha in 2.0..4.0f64) {
        let exact = (d / d0).powf(-alpha / 2.0);
        prop_assert!(gain_minorant(d, d0, alpha) <= exact + 1e-12);
        prop_assert!((gain_minorant(d0, d0, alpha) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn exclusion_minorant_is_a_tangent(q in point(), c in point(), p0 in point()) {
        let exact = (q - c).norm_sq();
        prop_assert!(distance_sq_minorant(q, c, p0) <= exact + 1e-9 * exact.max(1.0));
        let at = distance_sq_minorant(p0, c, p0);
        prop_assert!((at - (p0 - c).norm_sq()).abs() <= 1e-9 * at.max(1.0));
    }

    #[test]
    fn rate_minorant_stays_below((f, span) in log_quadratic(), x in 0.0..2.0f64, x0 in 0.01..2.0f64) {
        let (x, x0) = (x * span, x0 * span);
        let exact = f.value(x);
        prop_assert!(f.minorant(x, x0) <= exact + 1e-9 * exact.abs().max(1.0));
        prop_assert!((f.minorant(x0, x0) - f.value(x0)).abs() <= 1e-9 * f.value(x0).max(1.0));
        prop_assert!(f.linearized_power(x, x0) <= f.power(x) * (1.0 + 1e-15));
    }

    #[test]
    fn rounding_never_exceeds_the_budget(
        shares in prop::collection::vec(0.0..=1.0f64, 1..5),
        l in 1..=100usize,
        ceil_bits in any::<u8>(),
    ) {
        let ceil: Vec<bool> = (0..shares.len()).map(|k| ceil_bits >> k & 1 == 1).collect();
        let out = round_slot(&shares, l, &ceil);
        prop_assert!(out.iter().sum::<u32>() as usize <= l);
        for (k, &b) in out.iter().enumerate() {
            let x = shares[k] * l as f64;
            let want = if ceil[k] { (x - 1e-9).ceil().max(0.0) } else { x.round() };
            prop_assert!(b as f64 <= want);
        }
    }

    #[test]
    fn shares_summing_to_one_round_within_budget(a in 0.0..=1.0f64, l in 1..=100usize) {
        let out = round_slot(&[a, 1.0 - a], l, &[false, false]);
        prop_assert!(out[0] + out[1] <= l as u32);
        prop_assert!(out[0] + out[1] + 1 >= l as u32);
    }

    #[test]
    fn closed_form_phases_beat_perturbations(
        q in point(),
        k in 0..3usize,
        rho in 0.05..=1.0f64,
        m in prop::sample::select(vec![4usize, 9, 25]),
        bump in prop::collection::vec(-0.5..0.5f64, 25),
    ) {
        let mut s = common::reference();
        s.set_num_elements(m);
        let q = Vec3::new(q.x, q.y, q.z.max(s.h_min + 1.0));
        let g = SlotGeometry::at(q, &s);
        let (d_kb, beta_kb) = direct_links(&s);
        let link = LinkModel::from_geometry(&g, d_kb[k], beta_kb[k], &s, k);
        let phases = optimal_phases_at(&g, d_kb[k], &s, k);
        prop_assert!(phases.iter().all(|b| (0.0..TAU).contains(b)));
        let best = b_k(&link, rho, &phases).norm_sqr();
        let closed = b_squared_optimal(link.beta_bu, link.beta_ku, link.beta_kb, rho, m, &s.rician);
        prop_assert!((best - closed).abs() <= 1e-9 * closed);
        let moved: Vec<f64> = phases.iter().zip(&bump).map(|(b, d)| wrap_phase(b + d)).collect();
        prop_assert!(b_k(&link, rho, &moved).norm_sqr() <= best * (1.0 + 1e-12));
        let shifted: Vec<f64> = phases.iter().map(|b| b + TAU).collect();
        prop_assert!((b_k(&link, rho, &shifted).norm_sqr() - best).abs() <= 1e-9 * best);
    }
}
