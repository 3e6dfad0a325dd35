//! Behavioral charge model of a 3T NMOS gain-cell storage node.
//!
//! A stored '1' leaks toward 0 V with a single-pole exponential; a stored '0'
//! is the stable state. Logic evaluation is a conditional discharge of a
//! precharged output node whose depth depends on how much gate overdrive the
//! selected input cells still have.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Nanoseconds since simulation start.
pub type Ns = u64;

/// Nominal model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig<S> {
    pub vdd: S,
    /// Sense-amp decision level referred to the storage node.
    pub v_sa_read: S,
    /// Minimum input SN voltage that opens a discharge path.
    pub v_t_drive: S,
    /// Output level left behind by one fresh full-strength input.
    pub v_residual_floor: S,
    pub drt_read_ns: Ns,
    pub drt_logic_ns: Ns,
    pub tau_ns: S,
}

impl<S: Scalar> ModelConfig<S> {
    /// 0.9 V supply, SA at VDD/2, drive threshold 0.2 VDD, floor 0.05 VDD,
    /// 15 us read retention and 5 us logic retention. `tau_ns` is calibrated.
    pub fn nominal() -> Self {
        let vdd = S::of(0.9);
        let mut cfg = ModelConfig {
            vdd,
            v_sa_read: vdd * S::of(0.5),
            v_t_drive: vdd * S::of(0.2),
            v_residual_floor: vdd * S::of(0.05),
            drt_read_ns: 15_000,
            drt_logic_ns: 5_000,
            tau_ns: S::one(),
        };
        cfg.tau_ns = calibrate_tau(&cfg).expect("nominal constants are consistent");
        cfg
    }

    /// Returns a copy with `tau_ns` recalibrated to the read retention time.
    pub fn calibrated(mut self) -> Result<Self> {
        self.tau_ns = calibrate_tau(&self)?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let zero = S::zero();
        if !(zero < self.v_residual_floor
            && self.v_residual_floor < self.v_sa_read
            && self.v_sa_read < self.vdd)
        {
            return Err(Error::Config(format!(
                "need 0 < v_residual_floor ({}) < v_sa_read ({}) < vdd ({})",
                self.v_residual_floor, self.v_sa_read, self.vdd
            )));
        }
        if !(zero <= self.v_t_drive && self.v_t_drive < self.v_sa_read) {
            return Err(Error::Config(format!(
                "need 0 <= v_t_drive ({}) < v_sa_read ({})",
                self.v_t_drive, self.v_sa_read
            )));
        }
        if !(self.tau_ns > zero) || !self.tau_ns.is_finite() {
            return Err(Error::Config(format!("tau_ns must be positive, got {}", self.tau_ns)));
        }
        if self.drt_logic_ns > self.drt_read_ns {
            return Err(Error::Config(format!(
                "drt_logic_ns ({}) exceeds drt_read_ns ({})",
                self.drt_logic_ns, self.drt_read_ns
            )));
        }
        Ok(())
    }
}

impl<S: Scalar> Default for ModelConfig<S> {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Per-cell variation parameters. Nominal is `tau_scale = 1`, `drive_offset = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams<S> {
    pub tau_scale: S,
    pub drive_offset: S,
}

impl<S: Scalar> CellParams<S> {
    pub fn nominal() -> Self {
        CellParams {
            tau_scale: S::one(),
            drive_offset: S::zero(),
        }
    }
}

impl<S: Scalar> Default for CellParams<S> {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Storage-node voltage as of `last_update`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState<S> {
    pub voltage: S,
    pub last_update: Ns,
}

impl<S: Scalar> CellState<S> {
    pub fn empty() -> Self {
        CellState {
            voltage: S::zero(),
            last_update: 0,
        }
    }

    /// Voltage at `t`, which must not precede `last_update`.
    pub fn voltage_at(&self, t: Ns, params: &CellParams<S>, cfg: &ModelConfig<S>) -> S {
        debug_assert!(t >= self.last_update);
        decay(self.voltage, t - self.last_update, params, cfg)
    }

    /// Moves the state forward to `t` without changing the charge otherwise.
    pub fn advance(&mut self, t: Ns, params: &CellParams<S>, cfg: &ModelConfig<S>) {
        if t > self.last_update {
            self.voltage = self.voltage_at(t, params, cfg);
            self.last_update = t;
        }
    }

    pub fn set(&mut self, voltage: S, t: Ns) {
        debug_assert!(t >= self.last_update);
        self.voltage = voltage;
        self.last_update = t;
    }
}

impl<S: Scalar> Default for CellState<S> {
    fn default() -> Self {
        Self::empty()
    }
}

/// `voltage * exp(-dt / (tau_ns * tau_scale))`.
#[inline]
pub fn decay<S: Scalar>(voltage: S, dt: Ns, params: &CellParams<S>, cfg: &ModelConfig<S>) -> S {
    if dt == 0 {
        return voltage;
    }
    voltage * (-S::ns(dt) / (cfg.tau_ns * params.tau_scale)).exp()
}

/// Time constant for which a full '1' decays to exactly the sense level at
/// `drt_read_ns`: `tau = drt / ln(vdd / v_sa)`.
///
/// The closed form is nudged up by whole ulps until the retention endpoint
/// itself still senses as '1' in the working precision.
pub fn calibrate_tau<S: Scalar>(cfg: &ModelConfig<S>) -> Result<S> {
    if !(cfg.v_sa_read > S::zero() && cfg.vdd > cfg.v_sa_read) {
        return Err(Error::Config(format!(
            "tau calibration needs vdd ({}) > v_sa_read ({}) > 0",
            cfg.vdd, cfg.v_sa_read
        )));
    }
    if cfg.drt_read_ns == 0 {
        return Err(Error::Config("drt_read_ns must be positive".into()));
    }
    let drt = S::ns(cfg.drt_read_ns);
    let mut tau = drt / (cfg.vdd / cfg.v_sa_read).ln();
    let nominal = CellParams::nominal();
    for _ in 0..64 {
        let probe = ModelConfig { tau_ns: tau, ..*cfg };
        if sense(decay(cfg.vdd, cfg.drt_read_ns, &nominal, &probe), cfg.v_sa_read) {
            return Ok(tau);
        }
        tau = tau + tau * S::epsilon();
    }
    Err(Error::Config("tau calibration did not reach the sense level".into()))
}

/// Latch decision: '1' iff `voltage >= threshold`.
#[inline]
pub fn sense<S: Scalar>(voltage: S, threshold: S) -> bool {
    voltage >= threshold
}

/// Output SN level after the evaluation phase of a logic pulse.
///
/// Each input contributes overdrive `max(0, v - (v_t_drive + drive_offset))`;
/// parallel pull-downs add, and the discharge saturates at
/// `vdd - v_residual_floor`.
pub fn residual_after_discharge<S: Scalar>(
    inputs: &[(S, CellParams<S>)],
    cfg: &ModelConfig<S>,
) -> Result<S> {
    if inputs.is_empty() {
        return Err(Error::Usage("logic evaluation needs at least one input".into()));
    }
    let overdrive: S = inputs
        .iter()
        .map(|(v, p)| (*v - (cfg.v_t_drive + p.drive_offset)).max(S::zero()))
        .sum();
    if overdrive <= S::zero() {
        return Ok(cfg.vdd);
    }
    let strength = (overdrive / (cfg.vdd - cfg.v_t_drive)).min(S::one());
    Ok(cfg.vdd - (cfg.vdd - cfg.v_residual_floor) * strength)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ModelConfig<f64> {
        ModelConfig::nominal()
    }

    /// Bisection on f(tau) = vdd * exp(-drt / tau) - v_sa, independent of the
    /// closed form.
    fn tau_by_bisection(vdd: f64, v_sa: f64, drt: f64) -> f64 {
        let f = |tau: f64| vdd * (-drt / tau).exp() - v_sa;
        let (mut lo, mut hi) = (1.0, 1e9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn nominal_config_is_valid() {
        cfg().validate().unwrap();
        ModelConfig::<f32>::nominal().validate().unwrap();
    }

    #[test]
    fn decay_identity_and_zero() {
        let c = cfg();
        let p = CellParams::nominal();
        assert_eq!(decay(0.9, 0, &p, &c), 0.9);
        assert_eq!(decay(0.0, 5_000, &p, &c), 0.0);
    }

    #[test]
    fn decay_reaches_sense_level_at_drt() {
        let c = cfg();
        let v = decay(c.vdd, 15_000, &CellParams::nominal(), &c);
        assert!((v - c.v_sa_read).abs() < 1e-12);
        assert!(v >= c.v_sa_read);
    }

    #[test]
    fn tau_matches_root_finder() {
        let c = cfg();
        let oracle = tau_by_bisection(0.9, 0.45, 15_000.0);
        assert!((oracle - 21_640.425613334453).abs() < 1e-6);
        assert!((c.tau_ns - oracle).abs() / oracle < 1e-12);
    }

    #[test]
    fn tau_with_unit_log_ratio() {
        let c = ModelConfig {
            v_sa_read: 0.9 * (-1.0f64).exp(),
            ..cfg()
        };
        let tau = calibrate_tau(&c).unwrap();
        assert!((tau - 15_000.0).abs() < 1e-6);
    }

    #[test]
    fn tau_rejects_degenerate_threshold() {
        let c = ModelConfig { v_sa_read: 0.9, ..cfg() };
        assert!(matches!(calibrate_tau(&c), Err(Error::Config(_))));
    }

    #[test]
    fn sense_tie_reads_one() {
        assert!(sense(0.9, 0.45));
        assert!(!sense(0.0, 0.45));
        assert!(sense(0.45, 0.45));
    }

    #[test]
    fn residual_cases() {
        let c = cfg();
        let p = CellParams::nominal();
        assert_eq!(residual_after_discharge(&[(0.0, p)], &c).unwrap(), 0.9);
        let one = residual_after_discharge(&[(0.9, p)], &c).unwrap();
        assert!((one - c.v_residual_floor).abs() < 1e-15);
        let two = residual_after_discharge(&[(0.9, p), (0.9, p)], &c).unwrap();
        assert!(two <= one);
        assert!(residual_after_discharge::<f64>(&[], &c).is_err());
    }

    #[test]
    fn residual_matches_direct_formula() {
        // brute-force grid against the formula written out longhand
        let c = cfg();
        let p = CellParams::nominal();
        for i in 0..=18 {
            for j in 0..=18 {
                let (a, b) = (i as f64 * 0.05, j as f64 * 0.05);
                let d = (a - 0.18).max(0.0) + (b - 0.18).max(0.0);
                let expect = if d == 0.0 {
                    0.9
                } else {
                    0.9 - (0.9 - 0.045) * (d / 0.72).min(1.0)
                };
                let got = residual_after_discharge(&[(a, p), (b, p)], &c).unwrap();
                assert!((got - expect).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn nominal_truth_tables() {
        let c = cfg();
        let p = CellParams::nominal();
        let level = |b: bool| if b { c.vdd } else { 0.0 };
        for a in [false, true] {
            let out = residual_after_discharge(&[(level(a), p)], &c).unwrap();
            assert_eq!(sense(out, c.v_sa_read), !a);
            for b in [false, true] {
                let out = residual_after_discharge(&[(level(a), p), (level(b), p)], &c).unwrap();
                assert_eq!(sense(out, c.v_sa_read), !(a || b));
            }
        }
    }

    #[test]
    fn residual_rises_with_input_age() {
        let c = cfg();
        let p = CellParams::nominal();
        let mut prev = 0.0;
        for k in 0..=50u64 {
            let v = decay(c.vdd, k * 100, &p, &c);
            let r = residual_after_discharge(&[(v, p)], &c).unwrap();
            assert!(r >= prev);
            assert!(r < c.v_sa_read);
            prev = r;
        }
    }

    proptest! {
        #[test]
        fn decay_is_multiplicative(v in 0.0f64..0.9, t1 in 0u64..40_000, t2 in 0u64..40_000) {
            let c = cfg();
            let p = CellParams::nominal();
            let split = decay(decay(v, t1, &p, &c), t2, &p, &c);
            let whole = decay(v, t1 + t2, &p, &c);
            prop_assert!((split - whole).abs() <= 1e-12 * whole.abs().max(f64::MIN_POSITIVE));
            prop_assert!(whole <= v);
        }

        #[test]
        fn retention_is_a_step_at_drt(t in 0u64..40_000) {
            let c = cfg();
            let v = decay(c.vdd, t, &CellParams::nominal(), &c);
            prop_assert_eq!(sense(v, c.v_sa_read), t <= c.drt_read_ns);
        }

        #[test]
        fn residual_monotone_in_each_input(
            vs in proptest::collection::vec(0.0f64..=0.9, 1..5),
            idx in 0usize..5,
            bump in 0.0f64..0.9,
        ) {
            let c = cfg();
            let p = CellParams::nominal();
            let base: Vec<_> = vs.iter().map(|&v| (v, p)).collect();
            let mut raised = base.clone();
            let i = idx % raised.len();
            raised[i].0 = (raised[i].0 + bump).min(0.9);
            let r0 = residual_after_discharge(&base, &c).unwrap();
            let r1 = residual_after_discharge(&raised, &c).unwrap();
            prop_assert!(r1 <= r0);
            // adding another above-threshold input never raises the output
            let mut more = base.clone();
            more.push((0.9, p));
            prop_assert!(residual_after_discharge(&more, &c).unwrap() <= r0);
        }
    }

    #[test]
    fn f32_retention_step() {
        let c = ModelConfig::<f32>::nominal();
        let p = CellParams::nominal();
        assert!(sense(decay(c.vdd, 15_000, &p, &c), c.v_sa_read));
        assert!(!sense(decay(c.vdd, 15_001, &p, &c), c.v_sa_read));
    }
}
