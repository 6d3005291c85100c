//! Observables, acquired-phase formulas, disorder sweeps and scaling fits.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticeSpec, ModelKind};
use crate::linalg::C64;
use crate::timescan::TimeScanResult;

pub fn fidelity(psi: &DVector<C64>, target: &DVector<C64>) -> f64 {
    target.dotc(psi).norm_sqr()
}

/// Occupation per rung for ladders, per site for chains.
pub fn rung_occupation(psi: &DVector<C64>, spec: &LatticeSpec) -> Vec<f64> {
    if spec.kind.is_ladder() {
        psi.as_slice()
            .chunks(2)
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    } else {
        psi.iter().map(|z| z.norm_sqr()).collect()
    }
}

pub fn topological_occupation(psi: &DVector<C64>, states: &[DVector<C64>]) -> Vec<f64> {
    states.iter().map(|s| s.dotc(psi).norm_sqr()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseModel {
    CreutzImbalanced,
    CreutzRunged,
    Ssh,
}

impl PhaseModel {
    pub fn of(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::CreutzImbalanced => Ok(PhaseModel::CreutzImbalanced),
            ModelKind::CreutzRunged => Ok(PhaseModel::CreutzRunged),
            ModelKind::Ssh => Ok(PhaseModel::Ssh),
            other => Err(Error::Capability(format!("no phase formula for {other:?}"))),
        }
    }
}

/// `x` is the chirality of the leftmost transferred state, `direction` is
/// +1 for left-to-right. Both are ignored for SSH chains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseQuery {
    pub model: PhaseModel,
    pub ell: usize,
    pub n_w: usize,
    pub x: i32,
    pub direction: i32,
}

fn sign(e: i64) -> f64 {
    if e.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn zeta_formula(q: &PhaseQuery) -> C64 {
    let ell = q.ell as i64;
    let nw = q.n_w as i64;
    let even = nw % 2 == 0;
    match q.model {
        PhaseModel::CreutzImbalanced => {
            if even {
                let delta = i64::from(q.x == q.direction);
                let unit = C64::new(0.0, sign(delta));
                unit.powi(ell as i32) * sign(nw / 2 + delta)
            } else {
                C64::new(sign((nw - 1) / 2), 0.0)
            }
        }
        PhaseModel::CreutzRunged => {
            if even {
                let delta = i64::from(-q.x == q.direction);
                C64::new(sign(ell + nw / 2 + delta), 0.0)
            } else {
                C64::new(sign((nw - 1) / 2), 0.0)
            }
        }
        PhaseModel::Ssh => {
            if even {
                C64::new(sign((nw + ell) / 2), 0.0)
            } else {
                C64::new(0.0, sign((nw + 1) / 2))
            }
        }
    }
}

/// `arg <target|psi>`; refused below fidelity 1/2.
pub fn acquired_phase(psi: &DVector<C64>, target: &DVector<C64>) -> Result<f64> {
    let overlap = target.dotc(psi);
    let f = overlap.norm_sqr();
    if f <= 0.5 {
        return Err(Error::UnreliablePhase { fidelity: f });
    }
    Ok(overlap.arg())
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// `sqrt(2 (1 - R))` with `R = |Σ e^{iζ}| / M`.
pub fn circular_std(phases: &[f64]) -> Result<f64> {
    if phases.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: C64 = phases.iter().map(|&p| C64::from_polar(1.0, p)).sum();
    let r = (sum.norm() / phases.len() as f64).min(1.0);
    Ok((2.0 * (1.0 - r)).sqrt())
}

/// Outcome of one disordered run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub fidelity: f64,
    pub phase: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub levels: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub std_fidelity: Vec<f64>,
    /// Circular std of the phases of realizations with a reliable phase
    /// (NaN when there are none).
    pub phase_circ_std: Vec<f64>,
    pub m: usize,
    pub master_seed: u64,
}

/// Runs `m` realizations per level. Realization `i` of every level uses
/// stream `i` of `master_seed`, so levels share their random numbers and
/// differ only in strength. Results are reduced in index order.
pub fn disorder_sweep<F>(run: F, levels: &[f64], m: usize, master_seed: u64) -> Result<SweepReport>
where
    F: Fn(f64, u64, u64) -> Result<Sample> + Sync,
{
    if m == 0 {
        return invalid("at least one realization per level is required");
    }
    if levels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut report = SweepReport {
        levels: levels.to_vec(),
        mean_fidelity: Vec::new(),
        std_fidelity: Vec::new(),
        phase_circ_std: Vec::new(),
        m,
        master_seed,
    };
    for &level in levels {
        let samples: Vec<Sample> = (0..m as u64)
            .into_par_iter()
            .map(|i| run(level, master_seed, i))
            .collect::<Result<_>>()?;
        let mean = samples.iter().map(|s| s.fidelity).sum::<f64>() / m as f64;
        let var = samples.iter().map(|s| (s.fidelity - mean).powi(2)).sum::<f64>() / m as f64;
        let phases: Vec<f64> = samples.iter().filter_map(|s| s.phase).collect();
        report.mean_fidelity.push(mean);
        report.std_fidelity.push(var.sqrt());
        report.phase_circ_std.push(circular_std(&phases).unwrap_or(f64::NAN));
    }
    Ok(report)
}

/// Length series of transfer-time scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthSeries {
    /// One domain, `L = ℓ + 2`.
    SingleDomain,
    /// Two domains, `L = 2ℓ + 3`.
    TwoDomain,
    /// Fixed `ℓ`, `L = N(ℓ + 1) + 1`.
    FixedEll { ell: usize },
}

impl LengthSeries {
    /// Lattice of this series indexed by `ℓ` (first two) or `N` (fixed ℓ).
    pub fn lattice(self, kind: ModelKind, index: usize) -> Result<LatticeSpec> {
        match self {
            LengthSeries::SingleDomain => LatticeSpec::new(kind, 1, index),
            LengthSeries::TwoDomain => LatticeSpec::new(kind, 2, index),
            LengthSeries::FixedEll { ell } => LatticeSpec::new(kind, index, ell),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
}

/// Ordinary least squares.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return invalid("fit needs equally many abscissae and ordinates");
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Singular("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LineFit {
        intercept: my - slope * mx,
        slope,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthScan {
    pub lengths: Vec<usize>,
    pub times: Vec<f64>,
    /// Linear fit `t_tr = t_0 + A_0 L` (fixed-ℓ series, first point excluded).
    pub fit: Option<LineFit>,
}

/// Scans `t_tr` for each index in `range`. `time_for` returns the scan
/// result for one lattice.
pub fn length_scan<F>(series: LengthSeries, kind: ModelKind, range: &[usize], time_for: F) -> Result<LengthScan>
where
    F: Fn(&LatticeSpec) -> Result<TimeScanResult> + Sync,
{
    let specs: Vec<LatticeSpec> = range.iter().map(|&i| series.lattice(kind, i)).collect::<Result<_>>()?;
    let times: Vec<f64> = specs
        .par_iter()
        .map(|s| time_for(s).map(|r| r.t_tr))
        .collect::<Result<_>>()?;
    let lengths: Vec<usize> = specs.iter().map(|s| s.length()).collect();
    let fit = match series {
        LengthSeries::FixedEll { .. } if lengths.len() >= 3 => {
            let xs: Vec<f64> = lengths[1..].iter().map(|&l| l as f64).collect();
            Some(fit_line(&xs, &times[1..])?)
        }
        _ => None,
    };
    Ok(LengthScan { lengths, times, fit })
}
