//! Scenario constants and the quantities derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Physical and noise constants of one inter-satellite link scenario.
///
/// The JSON form uses the field names `f_c`, `T_coh`, `sigma_D`, `sigma_R`,
/// `beta`, `h0`, `h_m2`, `sigma_a`, `c` and `p0_diag`; any key left out takes
/// its Ka-band default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct ScenarioParams<T> {
    /// Carrier frequency [Hz].
    pub f_c: T,
    /// Coherent integration interval, also the filter step [s].
    #[serde(rename = "T_coh")]
    pub t_coh: T,
    /// Doppler noise standard deviation in range-rate units [m/s].
    #[serde(rename = "sigma_D")]
    pub sigma_d: T,
    /// Pseudorange noise standard deviation [m].
    #[serde(rename = "sigma_R")]
    pub sigma_r: T,
    /// Oscillator 3-dB phase linewidth [Hz].
    pub beta: T,
    /// White frequency-noise Allan coefficient.
    pub h0: T,
    /// Random-walk frequency-noise Allan coefficient [1/s].
    pub h_m2: T,
    /// Random relative acceleration standard deviation [m/s²].
    pub sigma_a: T,
    /// Speed of light [m/s]; only overridden in scaling tests.
    pub c: T,
    /// Initial covariance diagonal for (R, Ṙ, b, u, θ).
    pub p0_diag: [T; 5],
}

impl<T: Real> Default for ScenarioParams<T> {
    fn default() -> Self {
        Self {
            f_c: lit(26e9),
            t_coh: lit(0.1),
            sigma_d: lit(0.03),
            sigma_r: lit(0.03),
            beta: lit(100.0),
            h0: lit(2.2e-25),
            h_m2: lit(1.6e-24),
            sigma_a: lit(0.1),
            c: lit(SPEED_OF_LIGHT),
            p0_diag: [lit(100.0), lit(1.0), lit(100.0), lit(1.0), lit(1.0)],
        }
    }
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() && v >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

impl<T: Real> ScenarioParams<T> {
    pub fn validate(&self) -> Result<()> {
        positive("f_c", self.f_c)?;
        positive("T_coh", self.t_coh)?;
        positive("sigma_D", self.sigma_d)?;
        positive("sigma_R", self.sigma_r)?;
        positive("c", self.c)?;
        non_negative("beta", self.beta)?;
        non_negative("h0", self.h0)?;
        non_negative("h_m2", self.h_m2)?;
        non_negative("sigma_a", self.sigma_a)?;
        for &p in &self.p0_diag {
            positive("p0_diag", p)?;
        }
        Ok(())
    }

    /// Phase random-walk variance per step, `2π β T` [rad²].
    pub fn q_theta(&self) -> T {
        T::two_pi() * self.beta * self.t_coh
    }

    /// Converts every field to another scalar type.
    pub fn cast<U: Real>(&self) -> ScenarioParams<U> {
        let c = |v: T| lit::<U>(crate::scalar::to_f64(v));
        ScenarioParams {
            f_c: c(self.f_c),
            t_coh: c(self.t_coh),
            sigma_d: c(self.sigma_d),
            sigma_r: c(self.sigma_r),
            beta: c(self.beta),
            h0: c(self.h0),
            h_m2: c(self.h_m2),
            sigma_a: c(self.sigma_a),
            c: c(self.c),
            p0_diag: self.p0_diag.map(c),
        }
    }
}

impl ScenarioParams<f64> {
    /// Parses a JSON object; absent keys keep their defaults.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Phase-to-range-rate coupling coefficient `c / (2π f_c T_coh)` [m/s/rad].
pub fn kappa_theta<T: Real>(params: &ScenarioParams<T>) -> Result<T> {
    positive("f_c", params.f_c)?;
    positive("T_coh", params.t_coh)?;
    Ok(params.c / (T::two_pi() * params.f_c * params.t_coh))
}

/// Allan power-law coefficients mapped to `(S_f, S_g)`: white frequency
/// `h0 / 2` and random-walk frequency `2π² h₋₂`.
pub fn allan_spectral<T: Real>(params: &ScenarioParams<T>) -> Result<(T, T)> {
    non_negative("h0", params.h0)?;
    non_negative("h_m2", params.h_m2)?;
    let s_f = params.h0 / lit(2.0);
    let s_g = lit::<T>(2.0) * T::pi() * T::pi() * params.h_m2;
    Ok((s_f, s_g))
}
