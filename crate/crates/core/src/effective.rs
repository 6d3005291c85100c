//! Effective nearest-neighbour chain of the hybridizing boundary states,
//! closed-form transfer times and per-domain control optimization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{ControlVector, DisorderRealization, LatticeSpec, ModelKind};
use crate::linalg::{hermitian_eigen, C64};
use crate::pulse::{check_window, transfer_shape};
use crate::states::{chain_states, normalization_constants, BoundaryStateId};
use crate::timescan::{find_optimal_time, first_lobe, tick, tick_time, PlateauScan, ScanOptions};

/// Tridiagonal chain `L, (P_k or S_k)..., R` with couplings
/// `couplings[k-1] = <state k| H |state k-1>`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChain {
    pub labels: Vec<BoundaryStateId>,
    pub couplings: Vec<C64>,
}

impl EffectiveChain {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn hamiltonian(&self) -> DMatrix<C64> {
        let n = self.size();
        let mut h = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for (k, &v) in self.couplings.iter().enumerate() {
            h[(k + 1, k)] = v;
            h[(k, k + 1)] = v.conj();
        }
        h
    }
}

/// Effective couplings for the given per-domain controls.
pub fn effective_couplings(spec: &LatticeSpec, controls: &ControlVector) -> Result<EffectiveChain> {
    if !(spec.kind.is_creutz() || spec.kind == ModelKind::Ssh) {
        return Err(Error::Capability(format!(
            "{:?} has no effective boundary chain",
            spec.kind
        )));
    }
    let labels = chain_states(spec);
    let n = spec.domains;
    let c = &controls.per_domain;
    if c.len() != n {
        return invalid("control vector does not match the lattice");
    }
    // closed forms diverge at zero control; the coupling itself vanishes there
    let safe: Vec<f64> = c.iter().map(|&x| if x == 0.0 { 1e-300 } else { x }).collect();
    let norms = normalization_constants(spec, &ControlVector::transfer(&safe))?;
    let norm_of = |i: usize| -> f64 {
        if i == 0 {
            norms.left
        } else if i == n {
            norms.right
        } else {
            norms.walls[i - 1]
        }
    };
    let ell = spec.ell as i32;
    let mut couplings = Vec::with_capacity(n);
    for k in 1..=n {
        let ck = c[k - 1];
        if ck == 0.0 {
            couplings.push(C64::new(0.0, 0.0));
            continue;
        }
        let nn = norm_of(k) * norm_of(k - 1);
        let v = match spec.kind {
            ModelKind::Ssh => {
                let w = spec.strong_bond;
                let base = -w / ck;
                if n == 1 {
                    C64::new(-ck * nn * base.powi(-ell / 2 - 2), 0.0)
                } else if k == 1 || k == n {
                    C64::new(ck * nn * base.powi(-ell / 2 - 1), 0.0)
                } else {
                    C64::new(-ck * nn * base.powi(-ell / 2), 0.0)
                }
            }
            kind => {
                let d = if n == 1 {
                    ell + 1
                } else if k == 1 || k == n {
                    ell
                } else {
                    ell - 1
                };
                let p = if k == 1 { 1 } else { 0 };
                let jj = spec.hopping;
                if kind == ModelKind::CreutzRunged {
                    let sign = if (k as i32 + p) % 2 == 0 { 1.0 } else { -1.0 };
                    C64::new(0.0, 2.0 * sign * ck * nn * (-2.0 * jj / ck).powi(-d - 2))
                } else {
                    // sign (-1)^p: matches <k|H|k-1> of the lattice for every link
                    let sign = if p == 0 { 1.0 } else { -1.0 };
                    let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let base = C64::new(0.0, alt * 2.0 * jj / ck);
                    base.powi(-d - 2) * (2.0 * sign * ck * nn)
                }
            }
        };
        couplings.push(v);
    }
    Ok(EffectiveChain { labels, couplings })
}

/// Static evolution of the chain, returning the state at each requested time.
pub fn evolve_static(chain: &EffectiveChain, psi0: &DVector<C64>, times: &[f64]) -> Result<Vec<DVector<C64>>> {
    if psi0.len() != chain.size() {
        return invalid("initial state does not match the chain");
    }
    let s = hermitian_eigen(&chain.hamiltonian())?;
    Ok(times.iter().map(|&t| s.evolve(psi0, t)).collect())
}

/// Per-domain peak controls and timing of a transfer pulse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPlan {
    pub peaks: Vec<f64>,
    pub t_prep: f64,
    pub t_tr: f64,
    pub f0: f64,
}

impl ProtocolPlan {
    pub fn new(peaks: Vec<f64>, t_prep: f64, t_tr: f64) -> Result<Self> {
        let plan = ProtocolPlan {
            peaks,
            t_prep,
            t_tr,
            f0: 0.995,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.peaks.is_empty() {
            return Err(Error::EmptyInput);
        }
        check_window(self.t_prep, self.t_tr)
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        let n = self.peaks.len();
        (0..n).all(|d| (self.peaks[d] - self.peaks[n - 1 - d]).abs() < 1e-12)
    }
}

/// Occupations of the chain sites sampled after every step.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrajectory {
    pub times: Vec<f64>,
    pub occupations: Vec<Vec<f64>>,
    pub final_state: DVector<C64>,
}

/// Pulse-modulated evolution of the chain with couplings recomputed from the
/// instantaneous controls at every step midpoint.
pub fn evolve_pulsed(spec: &LatticeSpec, plan: &ProtocolPlan, psi0: &DVector<C64>, dt: f64) -> Result<ChainTrajectory> {
    plan.validate()?;
    let steps = (plan.t_tr / dt).round() as usize;
    let mut psi = psi0.clone();
    let occ = |v: &DVector<C64>| v.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>();
    let mut times = vec![0.0];
    let mut occupations = vec![occ(&psi)];
    for n in 0..steps {
        let t = (n as f64 + 0.5) * dt;
        let s = transfer_shape(t, plan.t_prep, plan.t_tr);
        let chain = chain_at(spec, &plan.peaks, s)?;
        psi = hermitian_eigen(&chain.hamiltonian())?.evolve(&psi, dt);
        times.push((n + 1) as f64 * dt);
        occupations.push(occ(&psi));
    }
    Ok(ChainTrajectory {
        times,
        occupations,
        final_state: psi,
    })
}

fn chain_at(spec: &LatticeSpec, peaks: &[f64], s: f64) -> Result<EffectiveChain> {
    let c: Vec<f64> = peaks.iter().map(|p| p * s).collect();
    effective_couplings(spec, &ControlVector::transfer(&c))
}

/// End-to-end amplitude of the pulsed chain as a function of `t_tr`.
pub fn chain_scan(spec: &LatticeSpec, peaks: &[f64], t_prep: f64, dt: f64) -> Result<PlateauScan> {
    let size = spec.domains + 1;
    let mut psi0 = DVector::from_element(size, C64::new(0.0, 0.0));
    psi0[0] = C64::new(1.0, 0.0);
    let mut target = DVector::from_element(size, C64::new(0.0, 0.0));
    target[size - 1] = C64::new(1.0, 0.0);
    let steps = (t_prep / dt).round() as usize;
    let up = |n: usize| {
        let t = (n as f64 + 0.5) * dt;
        Ok(chain_at(spec, peaks, transfer_shape(t, t_prep, 2.0 * t_prep))?.hamiltonian())
    };
    let down = |n: usize| {
        let t = t_prep + (n as f64 + 0.5) * dt;
        Ok(chain_at(spec, peaks, transfer_shape(t, t_prep, 2.0 * t_prep))?.hamiltonian())
    };
    let plateau = chain_at(spec, peaks, 1.0)?.hamiltonian();
    PlateauScan::build(&psi0, &target, steps, up, &plateau, steps, down, dt)
}

/// Closed-form transfer time (plateau only, preparation excluded) for one or
/// two domains.
pub fn predict_transfer_time(spec: &LatticeSpec, control: f64) -> Result<f64> {
    let n = spec.domains;
    if n > 2 {
        return Err(Error::Capability(
            "closed-form transfer times exist for one or two domains only".into(),
        ));
    }
    let ell = spec.ell as f64;
    match spec.kind {
        ModelKind::CreutzImbalanced | ModelKind::CreutzRunged => {
            let jj = spec.hopping;
            let e = control;
            if !(e > 0.0 && e < 2.0 * jj) {
                return invalid("control must lie in (0, 2J)");
            }
            let gap = 4.0 * jj * jj - e * e;
            Ok(if n == 1 {
                PI * e / (2.0 * gap) * (2.0 * jj / e).powf(ell + 3.0)
            } else {
                PI * e / gap * (2.0 * jj / e).powf(ell + 2.0)
            })
        }
        ModelKind::Ssh => {
            let w = spec.strong_bond;
            let v = control;
            if !(v > 0.0 && v < w) {
                return invalid("weak bond must lie in (0, w)");
            }
            let gap = w * w - v * v;
            Ok(if n == 1 {
                PI * v / (2.0 * gap) * (w / v).powf(ell / 2.0 + 2.0)
            } else {
                PI * (w * w + v * v).sqrt() / (2f64.sqrt() * gap) * (w / v).powf(ell / 2.0 + 1.0)
            })
        }
        other => Err(Error::Capability(format!("no closed-form transfer time for {other:?}"))),
    }
}

/// Localization length `1 / log10(2J / control)` in rungs.
pub fn localization_length(control: f64, hopping: f64) -> Result<f64> {
    if !(control > 0.0) {
        return invalid("control must be positive");
    }
    if control >= 2.0 * hopping {
        return invalid("control at or beyond the phase transition");
    }
    Ok(1.0 / (2.0 * hopping / control).log10())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOptions {
    pub t_prep: f64,
    pub f0: f64,
    /// Search box relative to the outer control.
    pub box_lo: f64,
    pub box_hi: f64,
    pub grid_step: f64,
    pub tolerance: f64,
    /// Force every inner domain to share one value.
    pub tie_inner: bool,
    /// Refine the effective optimum against the full lattice.
    pub refine_on_lattice: bool,
    /// Number of effective-chain local maxima verified on the lattice.
    pub starts: usize,
    /// Upper bound of the transfer-time search.
    pub t_max: f64,
    pub dt: f64,
}

impl OptimizeOptions {
    pub fn new(t_prep: f64) -> Self {
        OptimizeOptions {
            t_prep,
            f0: 0.995,
            box_lo: 0.8,
            box_hi: 1.2,
            grid_step: 0.01,
            tolerance: 0.001,
            tie_inner: false,
            refine_on_lattice: true,
            starts: 4,
            t_max: 5000.0,
            dt: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeResult {
    pub plan: ProtocolPlan,
    /// Free inner controls `c2, c3, ...`.
    pub inner: Vec<f64>,
    /// First-lobe peak fidelity on the effective chain.
    pub effective_peak: f64,
    /// First-lobe peak fidelity on the full lattice.
    pub lattice_peak: f64,
}

/// Mirror-symmetric peaks `(c1, c2, ..., c2, c1)` from the free values.
pub fn mirror_peaks(n: usize, c1: f64, inner: &[f64], tie: bool) -> Vec<f64> {
    (0..n)
        .map(|d| {
            let depth = d.min(n - 1 - d);
            if depth == 0 {
                c1
            } else if tie {
                inner[0]
            } else {
                inner[(depth - 1).min(inner.len() - 1)]
            }
        })
        .collect()
}

fn free_count(n: usize, tie: bool) -> usize {
    if n < 3 {
        0
    } else if tie {
        1
    } else {
        n.div_ceil(2) - 1
    }
}

const LOBE_FLOOR: f64 = 0.1;

/// Fidelity at the first maximum (first local maximum above 0.1) of a
/// plateau scan, refined off-grid by golden-section search.
pub fn first_lobe_peak(scan: &PlateauScan, t_min: f64, t_max: f64) -> (f64, f64) {
    let lo = tick(t_min);
    let hi = tick(t_max);
    let mut samples: Vec<f64> = Vec::new();
    for i in lo..=hi {
        samples.push(scan.fidelity(tick_time(i)));
        let n = samples.len();
        if n >= 3 {
            if let Some((k, _)) = first_lobe(&samples[n - 3..], LOBE_FLOOR) {
                let centre = lo + (n - 3 + k) as i64;
                let t = golden_max(|t| scan.fidelity(t), tick_time(centre - 1), tick_time(centre + 1), 1e-4);
                return (t, scan.fidelity(t));
            }
        }
    }
    let (i, f) = samples
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &f)| if f > acc.1 { (i, f) } else { acc });
    (tick_time(lo + i as i64), f * 0.5)
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

/// Search for mirror-symmetric inner controls maximizing the fidelity at the
/// first maximum, then report the earliest grid time reaching `f0` within
/// that first lobe.
pub fn optimize_controls(spec: &LatticeSpec, c1: f64, opts: &OptimizeOptions) -> Result<OptimizeResult> {
    let n = spec.domains;
    if n < 3 {
        return invalid("control optimization needs at least three domains");
    }
    let m = free_count(n, opts.tie_inner);
    let t_min = 2.0 * opts.t_prep;
    let eff = |inner: &[f64]| -> f64 {
        let peaks = mirror_peaks(n, c1, inner, opts.tie_inner);
        chain_scan(spec, &peaks, opts.t_prep, opts.dt)
            .map(|s| first_lobe_peak(&s, t_min, opts.t_max).1)
            .unwrap_or(0.0)
    };
    let lo = opts.box_lo * c1;
    let hi = opts.box_hi * c1;
    let grid: Vec<f64> = {
        let count = ((hi - lo) / opts.grid_step).round() as usize;
        (0..=count).map(|i| lo + i as f64 * opts.grid_step).collect()
    };
    // exhaustive grid for up to two free values, coordinate sweeps beyond
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::new();
    if m <= 2 {
        let g = grid.len();
        let cells = g.pow(m as u32);
        let point = |c: usize| -> Vec<f64> { (0..m).map(|d| grid[(c / g.pow(d as u32)) % g]).collect() };
        let values: Vec<f64> = (0..cells).map(|c| eff(&point(c))).collect();
        for c in 0..cells {
            let is_max = (0..m).all(|d| {
                let stride = g.pow(d as u32);
                let i = (c / stride) % g;
                (i == 0 || values[c - stride] <= values[c]) && (i + 1 == g || values[c + stride] <= values[c])
            });
            if is_max {
                starts.push((point(c), values[c]));
            }
        }
    } else {
        let mut best = vec![c1; m];
        let mut best_f = f64::NEG_INFINITY;
        for _ in 0..2 {
            for d in 0..m {
                for &g in &grid {
                    let mut p = best.clone();
                    p[d] = g;
                    let f = eff(&p);
                    if f > best_f {
                        best_f = f;
                        best = p;
                    }
                }
            }
        }
        starts.push((best, best_f));
    }
    starts.sort_by(|a, b| b.1.total_cmp(&a.1));
    starts.truncate(opts.starts.max(1));
    let polish = |start: Vec<f64>, obj: &dyn Fn(&[f64]) -> f64, half: f64| -> Vec<f64> {
        let mut p = start;
        for _ in 0..2 {
            for d in 0..m {
                let centre = p[d];
                let mut trial = p.clone();
                p[d] = golden_max(
                    |x| {
                        trial[d] = x;
                        obj(&trial)
                    },
                    (centre - half).max(lo),
                    (centre + half).min(hi),
                    opts.tolerance / 2.0,
                );
            }
        }
        p
    };
    let lattice = |inner: &[f64]| -> f64 {
        let peaks = mirror_peaks(n, c1, inner, opts.tie_inner);
        crate::protocol::lr_scan(spec, &peaks, opts.t_prep, &DisorderRealization::none(), opts.dt)
            .map(|s| first_lobe_peak(&s, t_min, opts.t_max).1)
            .unwrap_or(0.0)
    };
    // effective maxima are ranked by their full-lattice fidelity
    let mut inner = Vec::new();
    let mut effective_peak = f64::NEG_INFINITY;
    let mut best_lattice = f64::NEG_INFINITY;
    for (start, _) in starts {
        let p = polish(start, &eff, opts.grid_step);
        let f = if opts.refine_on_lattice || opts.starts > 1 {
            lattice(&p)
        } else {
            0.0
        };
        if f > best_lattice || inner.is_empty() {
            best_lattice = f;
            effective_peak = eff(&p);
            inner = p;
        }
    }
    if opts.refine_on_lattice {
        inner = polish(inner, &lattice, 2.0 * opts.grid_step);
    }
    let peaks = mirror_peaks(n, c1, &inner, opts.tie_inner);
    let scan = crate::protocol::lr_scan(spec, &peaks, opts.t_prep, &DisorderRealization::none(), opts.dt)?;
    let (lobe_time, lattice_peak) = first_lobe_peak(&scan, t_min, opts.t_max);
    let found = if lattice_peak >= opts.f0 {
        find_optimal_time(
            |t| Ok(scan.fidelity(t)),
            &ScanOptions::new(opts.f0, t_min, lobe_time + 0.1),
        )
    } else {
        Err(Error::EmptyInput)
    };
    match found {
        Ok(r) => Ok(OptimizeResult {
            plan: ProtocolPlan {
                peaks,
                t_prep: opts.t_prep,
                t_tr: r.t_tr,
                f0: opts.f0,
            },
            inner,
            effective_peak,
            lattice_peak,
        }),
        Err(_) => Err(Error::OptimizationFailed {
            best_controls: peaks,
            best_fidelity: lattice_peak,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_domain_coupling_value() {
        let s = LatticeSpec::creutz(1, 4).unwrap();
        let chain = effective_couplings(&s, &ControlVector::uniform(1, 1.0)).unwrap();
        assert!((chain.couplings[0].norm() - 3.0 / 128.0).abs() < 1e-15);
        let t = predict_transfer_time(&s, 1.0).unwrap();
        assert!((PI / (2.0 * chain.couplings[0].norm()) - t).abs() / t < 1e-12);
        assert!((t - PI / 6.0 * 128.0).abs() < 1e-10);
    }

    #[test]
    fn ssh_coupling_value() {
        let s = LatticeSpec::ssh(2, 4).unwrap();
        let chain = effective_couplings(&s, &ControlVector::uniform(2, 0.5)).unwrap();
        let expect = 0.5 * 3f64.sqrt() * (0.75f64 / 1.25).sqrt() * 2f64.powi(-3);
        assert!((chain.couplings[0].norm() - expect).abs() < 1e-15);
        assert!((chain.couplings[1].norm() - expect).abs() < 1e-15);
    }

    #[test]
    fn formula_examples() {
        let cl2 = LatticeSpec::creutz(2, 4).unwrap();
        assert!((predict_transfer_time(&cl2, 1.0).unwrap() - PI / 3.0 * 64.0).abs() < 1e-10);
        let ssh1 = LatticeSpec::ssh(1, 4).unwrap();
        assert!((predict_transfer_time(&ssh1, 0.5).unwrap() - PI * 0.5 / 1.5 * 16.0).abs() < 1e-10);
        let cl3 = LatticeSpec::creutz(3, 4).unwrap();
        assert!(matches!(predict_transfer_time(&cl3, 1.0), Err(Error::Capability(_))));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn localization_examples() {
        assert!((localization_length(1.0, 1.0).unwrap() - 3.3219).abs() < 1e-4);
        assert!((localization_length(0.2, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(localization_length(1.999999, 1.0).unwrap() > 1e5);
        assert!(localization_length(2.0, 1.0).is_err());
    }

    #[test]
    fn rabi_and_three_site_transfer() {
        let s = LatticeSpec::creutz(1, 4).unwrap();
        let chain = effective_couplings(&s, &ControlVector::uniform(1, 1.0)).unwrap();
        let t = PI / (2.0 * chain.couplings[0].norm());
        let psi0 = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let out = evolve_static(&chain, &psi0, &[t]).unwrap();
        assert!((out[0][1].norm_sqr() - 1.0).abs() < 1e-12);

        let s2 = LatticeSpec::creutz(2, 4).unwrap();
        let chain = effective_couplings(&s2, &ControlVector::uniform(2, 1.0)).unwrap();
        let v = chain.couplings[0].norm();
        assert!((v - chain.couplings[1].norm()).abs() < 1e-15);
        let t = PI / (2f64.sqrt() * v);
        let psi0 = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let out = evolve_static(&chain, &psi0, &[t]).unwrap();
        assert!((out[0][2].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dark_state_is_stationary() {
        let s2 = LatticeSpec::creutz(2, 4).unwrap();
        let chain = effective_couplings(&s2, &ControlVector::uniform(2, 1.0)).unwrap();
        // the zero mode of the three-site chain, written in the chain gauge
        let (v1, v2) = (chain.couplings[0], chain.couplings[1]);
        let mut dark = DVector::from_vec(vec![v2, C64::new(0.0, 0.0), -v1.conj()]);
        dark /= C64::new(dark.norm(), 0.0);
        assert!((dark[0].norm_sqr() - 0.5).abs() < 1e-12);
        let out = evolve_static(&chain, &dark, &[37.0, 500.0]).unwrap();
        for o in out {
            assert!((o.dotc(&dark).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_layout() {
        assert_eq!(mirror_peaks(5, 1.0, &[0.9, 0.8], false), vec![1.0, 0.9, 0.8, 0.9, 1.0]);
        assert_eq!(mirror_peaks(5, 1.0, &[0.9], true), vec![1.0, 0.9, 0.9, 0.9, 1.0]);
        assert_eq!(
            mirror_peaks(6, 1.0, &[0.9, 0.8], false),
            vec![1.0, 0.9, 0.8, 0.8, 0.9, 1.0]
        );
        assert_eq!(free_count(4, false), 1);
        assert_eq!(free_count(6, false), 2);
    }

    #[test]
    fn golden_finds_maximum() {
        let x = golden_max(|x| -(x - 0.37f64).powi(2), 0.0, 1.0, 1e-8);
        assert!((x - 0.37).abs() < 1e-7);
    }
}
