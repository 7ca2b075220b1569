use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cutoff below which the logarithmic gauges take their `r / log^b(1/r)` form.
pub const LOG_CUTOFF: f64 = 0.36787944117144233; // e^{-1}

/// Increasing gauge `h` with `h(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureFunction {
    /// `r^s`.
    Power { s: f64 },
    /// `r / log(1/r)` below `e^{-1}`, `r` above.
    Phi,
    /// `r / log^2(1/r)` below `e^{-1}`, `r` above.
    Psi,
    /// `r / log^beta(1/r)` below `e^{-1}`, `r` above.
    LogPower { beta: f64 },
}

impl MeasureFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MeasureFunction::Power { s } if !(s.is_finite() && s > 0.0) => {
                Err(Error::invalid("power gauge needs a positive finite exponent"))
            }
            MeasureFunction::LogPower { beta } if !(beta.is_finite() && beta >= 0.0) => {
                Err(Error::invalid("log-power gauge needs a finite exponent >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// Exponent of the logarithmic factor, `None` for pure powers.
    fn log_exponent(&self) -> Option<f64> {
        match *self {
            MeasureFunction::Power { .. } => None,
            MeasureFunction::Phi => Some(1.0),
            MeasureFunction::Psi => Some(2.0),
            MeasureFunction::LogPower { beta } => Some(beta),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match (*self, self.log_exponent()) {
            (MeasureFunction::Power { s }, _) => r.powf(s),
            (_, Some(beta)) if r <= LOG_CUTOFF => r / (1.0 / r).ln().powf(beta),
            _ => r,
        }
    }

    /// `ln h(e^{-ell})`, usable far below the smallest positive double.
    pub fn ln_eval_at_log_scale(&self, ell: f64) -> f64 {
        match (*self, self.log_exponent()) {
            (MeasureFunction::Power { s }, _) => -s * ell,
            (_, Some(beta)) if ell >= 1.0 => -ell - beta * ell.ln(),
            _ => -ell,
        }
    }

    /// `h(2r) / h(r)`.
    pub fn doubling_ratio(&self, r: f64) -> f64 {
        let ell = -r.ln();
        (self.ln_eval_at_log_scale(ell - std::f64::consts::LN_2) - self.ln_eval_at_log_scale(ell)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_e_inverse() {
        assert_eq!(LOG_CUTOFF, (-1.0f64).exp());
    }

    #[test]
    fn log_gauges_are_continuous_at_cutoff() {
        for h in [MeasureFunction::Phi, MeasureFunction::Psi, MeasureFunction::LogPower { beta: 0.5 }] {
            let below = h.eval(LOG_CUTOFF * (1.0 - 1e-12));
            let above = h.eval(LOG_CUTOFF * (1.0 + 1e-12));
            assert!((below - above).abs() < 1e-11);
        }
    }

    #[test]
    fn phi_and_psi_match_log_power() {
        for r in [1e-6, 1e-3, 0.2, 0.9] {
            assert_eq!(MeasureFunction::Phi.eval(r), MeasureFunction::LogPower { beta: 1.0 }.eval(r));
            assert_eq!(MeasureFunction::Psi.eval(r), MeasureFunction::LogPower { beta: 2.0 }.eval(r));
        }
        assert!((MeasureFunction::Phi.eval(0.01) - 0.01 / 100f64.ln()).abs() < 1e-17);
    }

    #[test]
    fn log_scale_evaluation_agrees_with_direct() {
        let hs = [
            MeasureFunction::Power { s: 0.5 },
            MeasureFunction::Phi,
            MeasureFunction::LogPower { beta: 0.5 },
        ];
        for h in hs {
            for r in [1e-9, 1e-4, 0.3, 0.5, 2.0] {
                let direct = h.eval(r).ln();
                let logs = h.ln_eval_at_log_scale(-r.ln());
                assert!((direct - logs).abs() < 1e-12, "{h:?} at {r}");
            }
        }
    }

    #[test]
    fn doubling_ratio_below_four_for_log_power() {
        let h = MeasureFunction::LogPower { beta: 0.5 };
        for k in 2..60 {
            let r = 2f64.powi(-k);
            let ratio = h.doubling_ratio(r);
            assert!(ratio < 4.0 && ratio > 2.0);
        }
        assert!((MeasureFunction::Power { s: 2.0 }.doubling_ratio(0.01) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MeasureFunction::Power { s: 0.0 }.validate().is_err());
        assert!(MeasureFunction::LogPower { beta: f64::NAN }.validate().is_err());
        assert!(MeasureFunction::Psi.validate().is_ok());
    }
}
