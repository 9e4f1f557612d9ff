//! Model parameters, the coefficient upscaling from the kinetic level, the
//! homogeneous steady state and the pointwise reaction terms.
//!
//! The simulated system is
//!
//! ```text
//! c1_t = a1 Δc1 − ∇·(b c1 ∇h) − α c1 + δ c2 + β c1 (1 − c1/Kc1 − c2/Kc1)
//! c2_t = a2 Δc2 + α c1 − δ c2
//! h_t  = −γ1 h c2 + γ2 c2 / (Kc2 + c2)
//! ```
//!
//! with homogeneous Neumann conditions for all three fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::ParamDomain {
            name,
            value,
            reason: "must be finite",
        });
    }
    if value <= 0.0 {
        return Err(Error::ParamDomain {
            name,
            value,
            reason: "must be strictly positive",
        });
    }
    Ok(())
}

/// Mesoscopic (kinetic-level) cell parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MesoParams {
    /// ADSC speed.
    pub s1: f64,
    /// Chondrocyte speed.
    pub s2: f64,
    /// ADSC baseline turning rate.
    pub lambda0: f64,
    /// Chondrocyte turning rate.
    pub lambda2: f64,
    /// Orientation bias towards ∇h. Zero is allowed and gives pure diffusion.
    pub phi: f64,
    /// Spatial dimension.
    pub n: u32,
}

impl MesoParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("s1", self.s1)?;
        require_positive("s2", self.s2)?;
        require_positive("lambda0", self.lambda0)?;
        require_positive("lambda2", self.lambda2)?;
        if !self.phi.is_finite() || self.phi < 0.0 {
            return Err(Error::ParamDomain {
                name: "phi",
                value: self.phi,
                reason: "must be finite and nonnegative",
            });
        }
        if !(1..=3).contains(&self.n) {
            return Err(Error::ParamDomain {
                name: "n",
                value: f64::from(self.n),
                reason: "spatial dimension must be 1, 2 or 3",
            });
        }
        Ok(())
    }
}

/// Macroscopic diffusion and taxis coefficients obtained by parabolic upscaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotilityCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
}

/// Maps speeds, turning rates and orientation bias to `(a1, a2, b)`:
/// `a1 = s1²/(n λ0)`, `a2 = s2²/(n λ2)`, `b = s1² φ / n`.
pub fn upscale_coefficients(meso: &MesoParams) -> Result<MotilityCoefficients> {
    meso.validate()?;
    let n = f64::from(meso.n);
    Ok(MotilityCoefficients {
        a1: meso.s1 * meso.s1 / (n * meso.lambda0),
        a2: meso.s2 * meso.s2 / (n * meso.lambda2),
        b: meso.s1 * meso.s1 * meso.phi / n,
    })
}

/// Macroscopic rate and motility constants. The taxis sensitivity `b` is kept
/// separate because it is the bifurcation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(rename = "Kc1", alias = "kc1")]
    pub kc1: f64,
    #[serde(rename = "Kc2", alias = "kc2")]
    pub kc2: f64,
    /// Use `c2/Kc2` instead of `c2/Kc1` inside the ADSC logistic factor.
    #[serde(default)]
    pub logistic_k2_variant: bool,
}

impl Default for ModelParams {
    /// The reference parameter set used for every built-in scenario,
    /// with unit carrying capacities.
    fn default() -> Self {
        Self {
            a1: 0.015,
            a2: 0.007,
            alpha: 0.15,
            delta: 0.6,
            beta: 0.05,
            gamma1: 0.1,
            gamma2: 0.3,
            kc1: 1.0,
            kc2: 1.0,
            logistic_k2_variant: false,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("a1", self.a1)?;
        require_positive("a2", self.a2)?;
        require_positive("alpha", self.alpha)?;
        require_positive("delta", self.delta)?;
        require_positive("beta", self.beta)?;
        require_positive("gamma1", self.gamma1)?;
        require_positive("gamma2", self.gamma2)?;
        require_positive("Kc1", self.kc1)?;
        require_positive("Kc2", self.kc2)?;
        Ok(())
    }

    /// Like [`validate`](Self::validate) but lets the rate constants vanish,
    /// which the simulator handles fine (pure diffusion, no growth, ...).
    pub fn validate_relaxed(&self) -> Result<()> {
        require_positive("a1", self.a1)?;
        require_positive("a2", self.a2)?;
        require_positive("Kc1", self.kc1)?;
        require_positive("Kc2", self.kc2)?;
        for (name, v) in [
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("beta", self.beta),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::ParamDomain {
                    name,
                    value: v,
                    reason: "rate constants must be finite and nonnegative",
                });
            }
        }
        Ok(())
    }

    /// Carrying capacity dividing `c2` in the logistic factor.
    #[inline]
    pub fn logistic_c2_capacity(&self) -> f64 {
        if self.logistic_k2_variant {
            self.kc2
        } else {
            self.kc1
        }
    }

    #[inline]
    pub fn logistic_factor(&self, c1: f64, c2: f64) -> f64 {
        1.0 - c1 / self.kc1 - c2 / self.logistic_c2_capacity()
    }

    /// Upper bound that `h` can never exceed once it starts below it:
    /// `h_t ≤ 0` whenever `h ≥ γ2/(γ1 Kc2)`.
    pub fn h_ceiling(&self) -> f64 {
        self.gamma2 / (self.gamma1 * self.kc2)
    }
}

pub fn validate_sensitivity(b: f64) -> Result<()> {
    if !b.is_finite() || b < 0.0 {
        return Err(Error::ParamDomain {
            name: "b",
            value: b,
            reason: "taxis sensitivity must be finite and nonnegative",
        });
    }
    Ok(())
}

/// The unique positive spatially homogeneous equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub c1_star: f64,
    pub c2_star: f64,
    pub h_star: f64,
}

impl SteadyState {
    /// Largest absolute reaction residual at the equilibrium.
    pub fn residual(&self, p: &ModelParams) -> f64 {
        let r = reaction_rhs(p, self.c1_star, self.c2_star, self.h_star);
        r.dc1.abs().max(r.dc2.abs()).max(r.dh.abs())
    }
}

/// Positive equilibrium of the kinetics:
/// `c1* = Kc1 δ/(δ+α)`, `c2* = (α/δ) c1*`, `h* = γ2 / (γ1 (Kc2 + c2*))`.
///
/// Growth may be switched off (`β = 0`); the remaining rates must be positive.
pub fn steady_state(p: &ModelParams) -> Result<SteadyState> {
    p.validate_relaxed()?;
    require_positive("alpha", p.alpha)?;
    require_positive("delta", p.delta)?;
    require_positive("gamma1", p.gamma1)?;
    require_positive("gamma2", p.gamma2)?;
    let ratio = p.alpha / p.delta;
    // logistic factor vanishes: c1/Kc1 + ratio c1/K = 1
    let c1_star = if p.logistic_k2_variant {
        1.0 / (1.0 / p.kc1 + ratio / p.kc2)
    } else {
        p.kc1 * p.delta / (p.delta + p.alpha)
    };
    let c2_star = ratio * c1_star;
    let h_star = p.gamma2 / (p.gamma1 * (p.kc2 + c2_star));
    Ok(SteadyState {
        c1_star,
        c2_star,
        h_star,
    })
}

/// Pointwise time derivatives from the source terms (motility dropped).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionRates {
    pub dc1: f64,
    pub dc2: f64,
    pub dh: f64,
}

#[inline]
pub fn reaction_rhs(p: &ModelParams, c1: f64, c2: f64, h: f64) -> ReactionRates {
    ReactionRates {
        dc1: reaction_c1(p, c1, c2),
        dc2: reaction_c2(p, c1, c2),
        dh: reaction_h(p, c2, h),
    }
}

#[inline]
pub fn reaction_c1(p: &ModelParams, c1: f64, c2: f64) -> f64 {
    -p.alpha * c1 + p.delta * c2 + p.beta * c1 * p.logistic_factor(c1, c2)
}

#[inline]
pub fn reaction_c2(p: &ModelParams, c1: f64, c2: f64) -> f64 {
    p.alpha * c1 - p.delta * c2
}

#[inline]
pub fn reaction_h(p: &ModelParams, c2: f64, h: f64) -> f64 {
    -p.gamma1 * h * c2 + p.gamma2 * c2 / (p.kc2 + c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn meso(s1: f64, s2: f64, lambda0: f64, lambda2: f64, phi: f64, n: u32) -> MesoParams {
        MesoParams {
            s1,
            s2,
            lambda0,
            lambda2,
            phi,
            n,
        }
    }

    #[test]
    fn upscaling_identity_case() {
        let c = upscale_coefficients(&meso(1.0, 1.0, 1.0, 1.0, 1.0, 1)).unwrap();
        assert_eq!((c.a1, c.a2, c.b), (1.0, 1.0, 1.0));
    }

    #[test]
    fn upscaling_mixed_case() {
        let c = upscale_coefficients(&meso(2.0, 1.0, 1.0, 2.0, 0.5, 2)).unwrap();
        assert_relative_eq!(c.a1, 2.0);
        assert_relative_eq!(c.a2, 0.25);
        assert_relative_eq!(c.b, 1.0);
    }

    #[test]
    fn zero_bias_means_no_taxis() {
        let c = upscale_coefficients(&meso(3.0, 1.0, 2.0, 2.0, 0.0, 3)).unwrap();
        assert_eq!(c.b, 0.0);
    }

    #[test]
    fn upscaling_rejects_bad_input() {
        assert!(upscale_coefficients(&meso(0.0, 1.0, 1.0, 1.0, 1.0, 2)).is_err());
        assert!(upscale_coefficients(&meso(1.0, 1.0, f64::NAN, 1.0, 1.0, 2)).is_err());
        assert!(upscale_coefficients(&meso(1.0, 1.0, 1.0, 1.0, -0.1, 2)).is_err());
        assert!(upscale_coefficients(&meso(1.0, 1.0, 1.0, 1.0, 0.1, 4)).is_err());
    }

    #[test]
    fn reference_steady_state() {
        let p = ModelParams::default();
        let s = steady_state(&p).unwrap();
        assert_relative_eq!(s.c1_star, 0.8, max_relative = 1e-14);
        assert_relative_eq!(s.c2_star, 0.2, max_relative = 1e-14);
        assert_relative_eq!(s.h_star, 2.5, max_relative = 1e-14);
        assert!(s.residual(&p) <= 1e-12);
    }

    #[test]
    fn symmetric_rates_split_capacity() {
        let p = ModelParams {
            alpha: 0.4,
            delta: 0.4,
            ..ModelParams::default()
        };
        let s = steady_state(&p).unwrap();
        assert_relative_eq!(s.c1_star, 0.5, max_relative = 1e-15);
        assert_relative_eq!(s.c2_star, 0.5, max_relative = 1e-15);
        assert_relative_eq!(s.h_star, 2.0 * p.gamma2 / (3.0 * p.gamma1), max_relative = 1e-14);
    }

    #[test]
    fn steady_state_rejects_negative_diffusivity() {
        let p = ModelParams {
            a1: -1.0,
            ..ModelParams::default()
        };
        assert!(matches!(
            steady_state(&p),
            Err(Error::ParamDomain { name: "a1", .. })
        ));
    }

    #[test]
    fn logistic_variant_steady_state_is_an_equilibrium() {
        let p = ModelParams {
            kc1: 1.3,
            kc2: 0.7,
            logistic_k2_variant: true,
            ..ModelParams::default()
        };
        let s = steady_state(&p).unwrap();
        assert!(s.residual(&p) <= 1e-12);
    }

    #[test]
    fn extinction_is_invariant() {
        let p = ModelParams::default();
        for h in [0.0, 1.0, 7.5] {
            let r = reaction_rhs(&p, 0.0, 0.0, h);
            assert_eq!((r.dc1, r.dc2, r.dh), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn pure_differentiation_substitution() {
        let p = ModelParams {
            beta: 0.0,
            ..ModelParams::default()
        };
        let r = reaction_rhs(&p, 1.0, 0.0, 0.0);
        assert_relative_eq!(r.dc1, -0.15);
        assert_relative_eq!(r.dc2, 0.15);
        assert_eq!(r.dh, 0.0);
    }

    #[test]
    fn doubling_kc1_scales_steady_state() {
        let p = ModelParams {
            kc1: 1.7,
            kc2: 0.9,
            ..ModelParams::default()
        };
        let q = ModelParams { kc1: 3.4, ..p };
        let s = steady_state(&p).unwrap();
        let t = steady_state(&q).unwrap();
        assert_relative_eq!(t.c1_star, 2.0 * s.c1_star, max_relative = 1e-14);
        assert_relative_eq!(t.c2_star, 2.0 * s.c2_star, max_relative = 1e-14);
        let factor = (p.kc2 + s.c2_star) / (q.kc2 + t.c2_star);
        assert_relative_eq!(t.h_star, s.h_star * factor, max_relative = 1e-14);
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (
            0.01f64..2.0,
            0.01f64..2.0,
            0.01f64..1.0,
            0.01f64..1.0,
            0.01f64..1.0,
            0.1f64..3.0,
            0.1f64..3.0,
        )
            .prop_map(|(alpha, delta, beta, gamma1, gamma2, kc1, kc2)| ModelParams {
                alpha,
                delta,
                beta,
                gamma1,
                gamma2,
                kc1,
                kc2,
                ..ModelParams::default()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn exchange_terms_cancel(p in arb_params(), c1 in 0.0f64..10.0, c2 in 0.0f64..10.0, h in 0.0f64..10.0) {
            let r = reaction_rhs(&p, c1, c2, h);
            let logistic = p.beta * c1 * p.logistic_factor(c1, c2);
            let scale = 1.0 + (p.alpha * c1).abs() + (p.delta * c2).abs() + logistic.abs();
            prop_assert!((r.dc1 + r.dc2 - logistic).abs() <= 1e-14 * scale);
        }

        #[test]
        fn steady_state_invariants(p in arb_params()) {
            let s = steady_state(&p).unwrap();
            prop_assert!(s.c1_star > 0.0 && s.c2_star > 0.0 && s.h_star > 0.0);
            prop_assert!((s.c2_star - p.alpha / p.delta * s.c1_star).abs() <= 1e-12 * s.c2_star);
            prop_assert!(s.residual(&p) <= 1e-12);
        }

        #[test]
        fn hyaluron_rate_sign(p in arb_params(), c2 in 0.0f64..5.0, h in 0.0f64..20.0) {
            let dh = reaction_h(&p, c2, h);
            let driver = (p.gamma2 / (p.kc2 + c2) - p.gamma1 * h) * c2;
            prop_assert!((dh - driver).abs() <= 1e-13 * (1.0 + driver.abs() + p.gamma1 * h * c2));
            if h >= p.h_ceiling() {
                prop_assert!(dh <= 1e-15 * c2);
            }
        }
    }
}
