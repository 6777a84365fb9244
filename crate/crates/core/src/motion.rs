//! Quadratic radial motion, the exact two-way delay and its per-pulse
//! cruise-and-go linearization.

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

/// System constants of a pulsed radar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarParams {
    /// Carrier frequency, Hz.
    pub fc: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Pulse repetition interval, s.
    pub tpri: f64,
    /// Pulse length, s.
    pub tp: f64,
    /// Pulses per CPI.
    pub np: usize,
    /// Complex sample rate, Hz.
    pub fs: f64,
    /// Propagation speed, m/s.
    pub c0: f64,
}

impl RadarParams {
    /// Checked constructor with `c0` set to the vacuum speed of light.
    pub fn new(fc: f64, bandwidth: f64, tpri: f64, tp: f64, np: usize, fs: f64) -> Result<Self> {
        let rp = RadarParams { fc, bandwidth, tpri, tp, np, fs, c0: C0 };
        rp.validate()?;
        Ok(rp)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        let checks = [
            (finite_pos(self.fc), "carrier frequency must be positive"),
            (finite_pos(self.bandwidth), "bandwidth must be positive"),
            (finite_pos(self.tp), "pulse length must be positive"),
            (finite_pos(self.c0), "propagation speed must be positive"),
            (self.tpri.is_finite() && self.tp < self.tpri, "pulse length must be shorter than the PRI"),
            (self.np >= 1, "at least one pulse is required"),
            (self.fs.is_finite() && self.fs >= self.bandwidth, "sample rate must be at least the bandwidth"),
            (self.fc > self.bandwidth / 2.0, "carrier must exceed half the bandwidth"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Parameter((*msg).to_string())),
            None => Ok(()),
        }
    }

    /// Carrier wavelength, m.
    pub fn wavelength(&self) -> f64 {
        self.c0 / self.fc
    }

    /// CPI duration `Np · Tpri`, s.
    pub fn tcpi(&self) -> f64 {
        self.np as f64 * self.tpri
    }

    /// Transmit time of pulse `m` (1-based), s.
    pub fn pulse_time(&self, m: usize) -> f64 {
        self.tpri * (m as f64 - 1.0)
    }

    /// Samples per pulse, `round(Tp · fs)`.
    pub fn pulse_samples(&self) -> usize {
        (self.tp * self.fs).round() as usize
    }

    /// Velocity step that resolves the CPI, `λ / (2 Tcpi)`.
    pub fn velocity_resolution(&self) -> f64 {
        self.wavelength() / (2.0 * self.tcpi())
    }

    /// Acceleration step `λ / Tcpi²`.
    pub fn acceleration_resolution(&self) -> f64 {
        self.wavelength() / (self.tcpi() * self.tcpi())
    }

    /// Blind-velocity interval `λ / (2 Tpri)`.
    pub fn ambiguous_velocity(&self) -> f64 {
        self.wavelength() / (2.0 * self.tpri)
    }
}

/// Initial range, radial velocity and radial acceleration of a point target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTruth {
    pub r0: f64,
    pub v0: f64,
    pub a0: f64,
}

impl TargetTruth {
    pub fn new(r0: f64, v0: f64, a0: f64) -> Self {
        TargetTruth { r0, v0, a0 }
    }

    pub fn range_at(&self, t: f64) -> f64 {
        self.r0 + self.v0 * t + 0.5 * self.a0 * t * t
    }

    pub fn velocity_at(&self, t: f64) -> f64 {
        self.v0 + self.a0 * t
    }
}

/// `r0 + v0 t + a0 t² / 2`.
pub fn range_at(tgt: &TargetTruth, t: f64) -> f64 {
    tgt.range_at(t)
}

/// Two-way delay `τ` of the echo received at time `t`, i.e. the root of
/// `(c0/2) τ = r(t - τ/2)` that tends to `2r(t)/(c0 + v(t))` as `a0 → 0`.
pub fn exact_delay(tgt: &TargetTruth, t: f64, c0: f64) -> Result<f64> {
    let v = tgt.velocity_at(t);
    if !(v.abs() < c0) {
        return Err(Error::Kinematics(format!("speed {v} m/s at t = {t} s is not below c0")));
    }
    let c = tgt.range_at(t);
    let tau = if tgt.a0 == 0.0 {
        2.0 * (tgt.r0 + tgt.v0 * t) / (c0 + tgt.v0)
    } else {
        // a0/8 τ² + b τ + c = 0 with b = -(c0 + v(t))/2 < 0.
        let a = tgt.a0 / 8.0;
        let b = -0.5 * (c0 + v);
        let disc = b * b - 4.0 * a * c;
        if !(disc >= 0.0) {
            return Err(Error::Kinematics(format!("no real delay at t = {t} s")));
        }
        let q = 0.5 * (-b + disc.sqrt());
        c / q
    };
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Kinematics(format!(
            "non-positive delay at t = {t} s (range {c} m)"
        )));
    }
    Ok(tau)
}

/// Per-pulse coefficients of the cruise-and-go model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseKinematics {
    /// Pulse index, 1-based.
    pub m: usize,
    pub t_m: f64,
    pub r_m: f64,
    pub v_m: f64,
    /// Delay intercept `2 r_m / (c0 + v_m)`.
    pub phi_m: f64,
    /// Time scaling `2 v_m / (c0 + v_m)`.
    pub gamma_m: f64,
    /// Frequency scaling `(c0 - v_m) / c0`.
    pub rho_m: f64,
    /// Motion offset `2 (v0 T_m + a0 T_m² / 2) / (c0 - v_m)`.
    pub zeta_m: f64,
}

impl PulseKinematics {
    /// `α = φ / (1 - γ) = τ0 / ρ + ζ` for `τ0 = 2 r0 / c0`.
    pub fn alpha(&self) -> f64 {
        self.phi_m / (1.0 - self.gamma_m)
    }
}

/// Coefficients for the velocity/acceleration pair alone; `r_m` and `phi_m`
/// assume `r0 = 0`.
pub(crate) fn motion_terms(v0: f64, a0: f64, m: usize, rp: &RadarParams) -> Result<PulseKinematics> {
    pulse_kinematics(&TargetTruth::new(0.0, v0, a0), m, rp)
}

/// Cruise-and-go coefficients of pulse `m` (1-based).
pub fn pulse_kinematics(tgt: &TargetTruth, m: usize, rp: &RadarParams) -> Result<PulseKinematics> {
    if m == 0 || m > rp.np {
        return Err(Error::Parameter(format!("pulse index {m} outside 1..={}", rp.np)));
    }
    let c0 = rp.c0;
    let t_m = rp.pulse_time(m);
    let v_m = tgt.velocity_at(t_m);
    if !(v_m.abs() < c0) {
        return Err(Error::Kinematics(format!("speed {v_m} m/s at pulse {m} is not below c0")));
    }
    let r_m = tgt.range_at(t_m);
    let travelled = tgt.v0 * t_m + 0.5 * tgt.a0 * t_m * t_m;
    Ok(PulseKinematics {
        m,
        t_m,
        r_m,
        v_m,
        phi_m: 2.0 * r_m / (c0 + v_m),
        gamma_m: 2.0 * v_m / (c0 + v_m),
        rho_m: (c0 - v_m) / c0,
        zeta_m: 2.0 * travelled / (c0 - v_m),
    })
}

/// `φ_m + γ_m Δt`, the linearized delay at fast time `dt` of pulse `m`.
pub fn cago_delay(tgt: &TargetTruth, m: usize, dt: f64, rp: &RadarParams) -> Result<f64> {
    let k = pulse_kinematics(tgt, m, rp)?;
    Ok(k.phi_m + k.gamma_m * dt)
}

/// Upper bounds on the three parts of the cruise-and-go delay error.
///
/// The error at fast time `Δt` of pulse `m` is exactly
/// `a0 (Δt - τ/2)² / (c0 + v_m)`. Expanding `(Δt - τ/2)²` splits it into a
/// term in `τ²` (`eps1`), a cross term (`eps2`) and a term in `Δt²` (`eps3`).
/// The bounds take `Δt ≤ Tp + τ_max` and the extremes of range and speed over
/// the CPI plus the echo travel time. `eps3` alone already dominates the
/// total error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBounds {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// `1 / fc`.
    pub threshold: f64,
    pub pass: bool,
}

impl EpsilonBounds {
    pub fn total(&self) -> f64 {
        self.eps1 + self.eps2 + self.eps3
    }
}

/// Bounds with the default sufficiency fraction of 0.1 carrier periods.
pub fn epsilon_bounds(tgt: &TargetTruth, rp: &RadarParams) -> Result<EpsilonBounds> {
    epsilon_bounds_with(tgt, rp, 0.1)
}

/// Extremes of `|f|` for the quadratic `f(t) = p + q t + s t²` on `[lo, hi]`.
fn quad_abs_max(p: f64, q: f64, s: f64, lo: f64, hi: f64) -> f64 {
    let f = |t: f64| p + q * t + s * t * t;
    let mut best = f(lo).abs().max(f(hi).abs());
    if s != 0.0 {
        let tv = -q / (2.0 * s);
        if tv > lo && tv < hi {
            best = best.max(f(tv).abs());
        }
    }
    best
}

/// Bounds where `pass` requires every term below `fraction / fc`.
pub fn epsilon_bounds_with(tgt: &TargetTruth, rp: &RadarParams, fraction: f64) -> Result<EpsilonBounds> {
    let c0 = rp.c0;
    let end0 = rp.pulse_time(rp.np) + rp.tp;
    let rmax_on = |lo: f64, hi: f64| quad_abs_max(tgt.r0, tgt.v0, 0.5 * tgt.a0, lo, hi);
    let vmax_on = |lo: f64, hi: f64| quad_abs_max(tgt.v0, tgt.a0, 0.0, lo, hi);
    // The echo window reaches τ_max past the last pulse and reflection times
    // go back to -τ_max/2; iterate to a fixed point.
    let mut tau_max = 2.0 * rmax_on(0.0, end0) / c0;
    for _ in 0..4 {
        let lo = -0.5 * tau_max;
        let hi = end0 + tau_max;
        tau_max = 2.0 * rmax_on(lo, hi) / c0;
    }
    let (lo, hi) = (-0.5 * tau_max, end0 + tau_max);
    let r_max = rmax_on(lo, hi);
    let v_max = vmax_on(lo, hi);
    if !(v_max < c0) {
        return Err(Error::Kinematics(format!("peak speed {v_max} m/s is not below c0")));
    }
    let a = tgt.a0.abs();
    let dt_max = rp.tp + tau_max;
    let eps1 = a * tau_max * tau_max / (4.0 * (c0 - v_max));
    let eps2 = 2.0 * a * dt_max * r_max / ((c0 - v_max) * (c0 - v_max));
    let eps3 = a * dt_max * dt_max / (c0 - v_max);
    let threshold = 1.0 / rp.fc;
    let pass = eps1.max(eps2).max(eps3) < fraction * threshold;
    Ok(EpsilonBounds { eps1, eps2, eps3, threshold, pass })
}

/// `Υ = a Tp (Tp + τ) / λ` with `λ = c0 / fc`.
pub fn acceleration_ratio(a: f64, tp: f64, tau: f64, fc: f64, c0: f64) -> f64 {
    a * tp * (tp + tau) * fc / c0
}

/// Normalized sinc, `sin(πx) / (πx)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// `10 log10 sinc²(Υ)` in dB; `-∞` at the nulls.
pub fn predicted_loss(upsilon: f64) -> f64 {
    if upsilon >= 1.0 && upsilon.fract() == 0.0 {
        return f64::NEG_INFINITY;
    }
    let s = sinc(upsilon);
    10.0 * (s * s).log10()
}
