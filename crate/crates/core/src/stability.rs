//! Local and string (asymptotic) stability margins of the cascade law,
//! evaluated from its partial derivatives at equilibrium.

use serde::Serialize;

use crate::dcpid::CascadeGains;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityPartials {
    /// ∂f/∂v
    pub f_v: f64,
    /// ∂f/∂(v_leader - v)
    pub f_ex_dot: f64,
    /// ∂f/∂d
    pub f_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub local: bool,
    pub asymptotic: bool,
    /// `f_v - f_ex_dot`, must be negative.
    pub margin_local: f64,
    /// `f_v²/2 - f_v f_ex_dot - f_d`, must be positive.
    pub margin_asymptotic: f64,
}

impl StabilityVerdict {
    pub fn stable(&self) -> bool {
        self.local && self.asymptotic
    }
}

/// Partial derivatives for the given gains, headway `ht`, sample time `ts`,
/// inertial lag `tau` and evaluation time `t`.
pub fn partials(
    gains: &CascadeGains,
    ht: f64,
    ts: f64,
    tau: f64,
    t: f64,
) -> Result<StabilityPartials> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    if !(ts > 0.0) {
        return Err(Error::Domain(format!(
            "sample time must be positive, got {ts}"
        )));
    }
    let g = gains;
    let r = ts / tau;
    let quad = 0.5 * g.kix * g.kiv * t * t
        + (g.kix * g.kpv + g.kpx * g.kiv) * t
        + g.kpx * g.kpv
        + g.kix * g.kdv;
    Ok(StabilityPartials {
        f_v: -r * ht * quad,
        f_ex_dot: -r * (g.kiv * t + g.kpv),
        f_d: r * (g.kix * t + g.kpx),
    })
}

/// Margins exactly at zero are reported unstable.
pub fn check_stability(p: &StabilityPartials) -> StabilityVerdict {
    let margin_local = p.f_v - p.f_ex_dot;
    let margin_asymptotic = 0.5 * p.f_v * p.f_v - p.f_v * p.f_ex_dot - p.f_d;
    StabilityVerdict {
        local: margin_local < 0.0,
        asymptotic: margin_asymptotic > 0.0,
        margin_local,
        margin_asymptotic,
    }
}

/// Inertial lags of the seven followers of the reference platoon.
pub const REFERENCE_TAUS: [f64; 7] = [0.51, 0.75, 0.78, 0.70, 0.73, 0.72, 0.62];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn group2_partials_and_margins() {
        let p = partials(&CascadeGains::GROUP_2, 0.8, 0.02, 0.7, 0.0).unwrap();
        // hand evaluation: (0.02/0.7) * {-0.8*40, -5, 8}
        assert_relative_eq!(p.f_v, -0.914285714, epsilon = 1e-8);
        assert_relative_eq!(p.f_ex_dot, -0.142857143, epsilon = 1e-8);
        assert_relative_eq!(p.f_d, 0.228571429, epsilon = 1e-8);
        let v = check_stability(&p);
        assert!(v.local && v.asymptotic);
        assert_relative_eq!(v.margin_local, -0.771428571, epsilon = 1e-8);
        assert_relative_eq!(v.margin_asymptotic, 0.058775510, epsilon = 1e-8);
    }

    #[test]
    fn zero_gains_sit_on_the_boundary() {
        let zero = CascadeGains::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let p = partials(&zero, 0.8, 0.02, 0.7, 3.0).unwrap();
        assert_eq!((p.f_v, p.f_ex_dot, p.f_d), (0.0, 0.0, 0.0));
        let v = check_stability(&p);
        assert!(!v.local && !v.asymptotic);
    }

    #[test]
    fn unit_parameters() {
        let g = CascadeGains::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let p = partials(&g, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!((p.f_v, p.f_ex_dot, p.f_d), (-1.0, -1.0, 1.0));
        let v = check_stability(&p);
        assert_eq!(v.margin_local, 0.0);
        assert!(!v.local);
        assert_relative_eq!(v.margin_asymptotic, -1.5);
        assert!(!v.asymptotic);
    }

    #[test]
    fn rejects_non_positive_tau() {
        assert!(matches!(
            partials(&CascadeGains::GROUP_2, 0.8, 0.02, 0.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn group2_is_stable_for_every_reference_lag() {
        for tau in REFERENCE_TAUS {
            let v =
                check_stability(&partials(&CascadeGains::GROUP_2, 0.8, 0.02, tau, 0.0).unwrap());
            assert!(v.stable(), "tau = {tau}: {v:?}");
        }
    }

    #[test]
    fn t_does_not_matter_without_integral_gains() {
        for g in [CascadeGains::GROUP_1, CascadeGains::GROUP_2] {
            let p0 = partials(&g, 0.8, 0.02, 0.7, 0.0).unwrap();
            for t in [1.0, 100.0] {
                assert_eq!(p0, partials(&g, 0.8, 0.02, 0.7, t).unwrap());
            }
        }
    }

    #[test]
    fn integral_gains_bring_in_time() {
        let g = CascadeGains::new(1.0, 0.5, 0.0, 1.0, 0.25, 0.0);
        let p = partials(&g, 1.0, 1.0, 1.0, 2.0).unwrap();
        // 0.5*0.125*4 + (0.5 + 0.25)*2 + 1 + 0
        assert_relative_eq!(p.f_v, -2.75);
        assert_relative_eq!(p.f_ex_dot, -1.5);
        assert_relative_eq!(p.f_d, 2.0);
    }

    proptest! {
        #[test]
        fn tau_scaling(c in 0.1f64..10.0, kpx in 0.0f64..20.0, kpv in 0.0f64..20.0, kdv in 0.0f64..5.0) {
            let g = CascadeGains::new(kpx, 0.0, 0.0, kpv, 0.0, kdv);
            let p = partials(&g, 0.8, 0.02, 0.7, 0.0).unwrap();
            let q = partials(&g, 0.8, 0.02, 0.7 * c, 0.0).unwrap();
            prop_assert!((q.f_v - p.f_v / c).abs() <= 1e-12 * (1.0 + p.f_v.abs()));
            prop_assert!((q.f_ex_dot - p.f_ex_dot / c).abs() <= 1e-12 * (1.0 + p.f_ex_dot.abs()));
            prop_assert!((q.f_d - p.f_d / c).abs() <= 1e-12 * (1.0 + p.f_d.abs()));
            let (vp, vq) = (check_stability(&p), check_stability(&q));
            if vp.margin_local.abs() > 1e-12 {
                prop_assert_eq!(vp.local, vq.local);
            }
            let expect = 0.5 * q.f_v * q.f_v - q.f_v * q.f_ex_dot - q.f_d;
            prop_assert_eq!(vq.margin_asymptotic, expect);
        }
    }
}
