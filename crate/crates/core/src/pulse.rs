//! Time-dependent control schedules.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::ControlVector;

/// What a channel drives: the bulk rungs of a domain (1-based) or a wall rung
/// (0 and N are the ends).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlTarget {
    Domain(usize),
    Wall(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    /// `sin²` ramp up over `ramp`, plateau, `sin²` ramp down over `ramp`.
    Transfer { ramp: f64 },
    /// `cos²(π τ / T)` over the window: full at both ends, zero at the middle.
    Well,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseChannel {
    pub target: ControlTarget,
    pub amplitude: f64,
    pub start: f64,
    pub end: f64,
    pub envelope: Envelope,
}

impl PulseChannel {
    /// Channel value at absolute time `t`. Transfer channels vanish outside
    /// their window; wells stay at full depth outside theirs.
    pub fn value(&self, t: f64) -> f64 {
        let len = self.end - self.start;
        let tau = t - self.start;
        match self.envelope {
            Envelope::Transfer { ramp } => self.amplitude * transfer_shape(tau, ramp, len),
            Envelope::Well => {
                if !(0.0..=len).contains(&tau) || len <= 0.0 {
                    self.amplitude
                } else {
                    self.amplitude * (PI * tau / len).cos().powi(2)
                }
            }
        }
    }
}

/// Unit transfer pulse of length `len` with ramps of length `ramp`.
pub fn transfer_shape(tau: f64, ramp: f64, len: f64) -> f64 {
    if !(0.0..=len).contains(&tau) {
        return 0.0;
    }
    if ramp <= 0.0 {
        return 1.0;
    }
    let omega = PI / (2.0 * ramp);
    if tau < ramp {
        (omega * tau).sin().powi(2)
    } else if tau > len - ramp {
        (omega * (tau - len)).sin().powi(2)
    } else {
        1.0
    }
}

/// Sum of channels on top of a static base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub base: ControlVector,
    pub channels: Vec<PulseChannel>,
    pub duration: f64,
}

impl PulseSchedule {
    pub fn new(domains: usize, duration: f64) -> Self {
        PulseSchedule {
            base: ControlVector::zeros(domains),
            channels: Vec::new(),
            duration,
        }
    }

    pub fn add(&mut self, target: ControlTarget, amplitude: f64, start: f64, end: f64, envelope: Envelope) {
        self.channels.push(PulseChannel {
            target,
            amplitude,
            start,
            end,
            envelope,
        });
    }

    /// Standard transfer: every domain pulsed with its peak value, the two
    /// end rungs following the outermost domains, inner walls balanced.
    pub fn transfer(peaks: &[f64], t_prep: f64, t_tr: f64) -> Result<Self> {
        check_window(t_prep, t_tr)?;
        let n = peaks.len();
        let mut s = PulseSchedule::new(n, t_tr);
        let env = Envelope::Transfer { ramp: t_prep };
        for (d, &c) in peaks.iter().enumerate() {
            s.add(ControlTarget::Domain(d + 1), c, 0.0, t_tr, env);
        }
        s.add(ControlTarget::Wall(0), peaks[0], 0.0, t_tr, env);
        s.add(ControlTarget::Wall(n), peaks[n - 1], 0.0, t_tr, env);
        Ok(s)
    }

    /// End-site wells `-mu0 cos²(π t / t_tr)` of the trivial protocols.
    pub fn wells(mu0: f64, t_tr: f64) -> Result<Self> {
        if !(mu0 > 0.0) {
            return invalid("well depth must be positive");
        }
        if !(t_tr >= 0.0) {
            return invalid("transfer time must be non-negative");
        }
        let mut s = PulseSchedule::new(1, t_tr);
        s.add(ControlTarget::Wall(0), -mu0, 0.0, t_tr, Envelope::Well);
        s.add(ControlTarget::Wall(1), -mu0, 0.0, t_tr, Envelope::Well);
        Ok(s)
    }

    pub fn controls_at(&self, t: f64) -> ControlVector {
        let mut c = self.base.clone();
        for ch in &self.channels {
            let v = ch.value(t);
            match ch.target {
                ControlTarget::Domain(d) => c.per_domain[d - 1] += v,
                ControlTarget::Wall(w) => c.walls[w] += v,
            }
        }
        c
    }
}

pub(crate) fn check_window(t_prep: f64, t_tr: f64) -> Result<()> {
    if !(t_prep >= 0.0 && t_tr.is_finite()) {
        return invalid("preparation time must be non-negative");
    }
    if t_tr < 2.0 * t_prep - 1e-9 {
        return invalid(format!(
            "transfer time {t_tr} shorter than two preparation times ({t_prep})"
        ));
    }
    Ok(())
}

/// Value of the pulse driving the bulk of domain `d` (1-based) at time `t`.
pub fn pulse_value(schedule: &PulseSchedule, d: usize, t: f64) -> f64 {
    schedule.base.per_domain.get(d.wrapping_sub(1)).copied().unwrap_or(0.0)
        + schedule
            .channels
            .iter()
            .filter(|ch| ch.target == ControlTarget::Domain(d))
            .map(|ch| ch.value(t))
            .sum::<f64>()
}
