//! Time evolution of the full lattice and the transfer protocols.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::effective::ProtocolPlan;
use crate::error::{invalid, Error, Result};
use crate::lattice::{
    assemble_hamiltonian, chiral_operator, ControlVector, DisorderKind, DisorderRealization, LatticeSpec, Leg,
    ModelKind,
};
use crate::linalg::{chebyshev_evolve, hermitian_eigen, Spectrum, C64};
use crate::pulse::{check_window, ControlTarget, Envelope, PulseSchedule};
use crate::rng::{centered_uniforms, stream_rng};
use crate::states::{chain_states, compact_state, hybridized_state, BoundaryStateId};
use crate::timescan::{find_optimal_time, PlateauScan, ScanOptions, TimeScanResult};

pub const DEFAULT_DT: f64 = 0.1;

/// Step size and how often the trajectory is sampled (`record_every = 0`
/// keeps only the final state).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub dt: f64,
    pub record_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            dt: DEFAULT_DT,
            record_every: 1,
        }
    }
}

impl RunOptions {
    pub fn final_only() -> Self {
        RunOptions {
            dt: DEFAULT_DT,
            record_every: 0,
        }
    }
}

fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid("time step must be positive");
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return invalid("duration must be non-negative");
    }
    Ok((duration / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Exact exponential of the midpoint Hamiltonian per step. The spectrum is
/// reused while the Hamiltonian does not change. `observe` sees the state
/// after every step, together with the step index and time.
pub fn evolve_with<H, O>(
    psi0: &DVector<C64>,
    steps: usize,
    dt: f64,
    mut hamiltonian: H,
    mut observe: O,
) -> Result<DVector<C64>>
where
    H: FnMut(f64) -> Result<DMatrix<C64>>,
    O: FnMut(usize, f64, &DVector<C64>),
{
    let mut psi = psi0.clone();
    // a changing H is stepped by the Chebyshev series; once H repeats its
    // spectrum is cached for the rest of the plateau
    let mut last: Option<DMatrix<C64>> = None;
    let mut cached: Option<Spectrum> = None;
    for n in 0..steps {
        let h = hamiltonian((n as f64 + 0.5) * dt)?;
        let repeated = last.as_ref() == Some(&h);
        if !repeated {
            cached = None;
        }
        let fast = if repeated { None } else { chebyshev_evolve(&h, &psi, dt) };
        psi = match fast {
            Some(next) => next,
            None => {
                if cached.is_none() {
                    cached = Some(hermitian_eigen(&h)?);
                }
                cached.as_ref().unwrap().evolve(&psi, dt)
            }
        };
        last = Some(h);
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite amplitude at step {n}")));
        }
        observe(n + 1, (n + 1) as f64 * dt, &psi);
    }
    Ok(psi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<C64>>,
    pub final_state: DVector<C64>,
}

/// Evolves `psi0` on `spec` under `schedule` for its full duration.
pub fn evolve(
    psi0: &DVector<C64>,
    spec: &LatticeSpec,
    schedule: &PulseSchedule,
    disorder: &DisorderRealization,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if psi0.len() != spec.site_count() {
        return invalid("initial state does not match the lattice");
    }
    let steps = steps_for(schedule.duration, opts.dt)?;
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let every = opts.record_every;
    let final_state = evolve_with(
        psi0,
        steps,
        opts.dt,
        |t| Ok(assemble_hamiltonian(spec, &schedule.controls_at(t), disorder)?.matrix),
        |n, t, psi| {
            if every > 0 && (n % every == 0 || n == steps) {
                times.push(t);
                states.push(psi.clone());
            }
        },
    )?;
    if every == 0 {
        times.push(steps as f64 * opts.dt);
        states.push(final_state.clone());
    }
    Ok(Trajectory {
        times,
        states,
        final_state,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub t_tr: f64,
    pub dt: f64,
    pub wall_clock: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolResult {
    pub final_state: DVector<C64>,
    pub fidelity: f64,
    /// `arg <target|psi>`, absent when the fidelity is below 1/2.
    pub acquired_phase: Option<f64>,
    pub times: Vec<f64>,
    /// Per sample, occupation of every rung (ladders) or site (chains).
    pub rung_occupations: Vec<Vec<f64>>,
    pub tracked: Vec<BoundaryStateId>,
    /// Per sample, `|<state|psi>|²` for every tracked state.
    pub topological_occupations: Vec<Vec<f64>>,
    pub timing: Timing,
}

/// States whose occupation is recorded: the effective-chain states plus the
/// S-type wall states of ladders.
pub fn tracked_states(spec: &LatticeSpec) -> Vec<BoundaryStateId> {
    if !(spec.kind.is_creutz() || spec.kind == ModelKind::Ssh) {
        return Vec::new();
    }
    let mut ids = chain_states(spec);
    if spec.kind.is_creutz() {
        ids.extend((1..spec.domains).map(BoundaryStateId::S));
    }
    ids
}

/// Tracked states at the given controls: hybridized while every domain is
/// topological, compact otherwise (barriers).
fn tracked_vectors(spec: &LatticeSpec, ids: &[BoundaryStateId], controls: &ControlVector) -> Result<Vec<DVector<C64>>> {
    ids.iter()
        .map(|&id| hybridized_state(spec, id, controls).or_else(|_| compact_state(spec, id)))
        .collect()
}

fn finish(
    spec: &LatticeSpec,
    traj: Trajectory,
    controls_at: impl Fn(f64) -> ControlVector,
    target: &DVector<C64>,
    t_tr: f64,
    dt: f64,
    started: Instant,
) -> Result<ProtocolResult> {
    let tracked = tracked_states(spec);
    let mut rung_occupations = Vec::with_capacity(traj.states.len());
    let mut topological_occupations = Vec::with_capacity(traj.states.len());
    for (t, psi) in traj.times.iter().zip(&traj.states) {
        rung_occupations.push(crate::analysis::rung_occupation(psi, spec));
        let vecs = tracked_vectors(spec, &tracked, &controls_at(*t))?;
        topological_occupations.push(crate::analysis::topological_occupation(psi, &vecs));
    }
    let overlap = target.dotc(&traj.final_state);
    let fidelity = overlap.norm_sqr().min(1.0);
    Ok(ProtocolResult {
        final_state: traj.final_state,
        fidelity,
        acquired_phase: (fidelity > 0.5).then(|| overlap.arg()),
        times: traj.times,
        rung_occupations,
        tracked,
        topological_occupations,
        timing: Timing {
            t_tr,
            dt,
            wall_clock: started.elapsed().as_secs_f64(),
        },
    })
}

fn require_topological(spec: &LatticeSpec) -> Result<()> {
    if spec.kind.is_creutz() || spec.kind == ModelKind::Ssh {
        Ok(())
    } else {
        Err(Error::Capability(format!(
            "{:?} has no topological transfer",
            spec.kind
        )))
    }
}

fn check_plan(spec: &LatticeSpec, plan: &ProtocolPlan) -> Result<()> {
    plan.validate()?;
    if plan.peaks.len() != spec.domains {
        return invalid(format!(
            "plan has {} domain controls, lattice has {} domains",
            plan.peaks.len(),
            spec.domains
        ));
    }
    Ok(())
}

/// Left-to-right transfer of `|L>` under the standard pulse.
pub fn run_lr_transfer(
    spec: &LatticeSpec,
    plan: &ProtocolPlan,
    disorder: &DisorderRealization,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    let psi0 = compact_state(spec, BoundaryStateId::Left)?;
    let target = compact_state(spec, BoundaryStateId::Right)?;
    run_transfer_from(spec, plan, disorder, opts, &psi0, &target)
}

/// Standard pulse applied to an arbitrary initial state.
pub fn run_transfer_from(
    spec: &LatticeSpec,
    plan: &ProtocolPlan,
    disorder: &DisorderRealization,
    opts: &RunOptions,
    psi0: &DVector<C64>,
    target: &DVector<C64>,
) -> Result<ProtocolResult> {
    require_topological(spec)?;
    check_plan(spec, plan)?;
    let started = Instant::now();
    let schedule = PulseSchedule::transfer(&plan.peaks, plan.t_prep, plan.t_tr)?;
    let traj = evolve(psi0, spec, &schedule, disorder, opts)?;
    finish(
        spec,
        traj,
        |t| schedule.controls_at(t),
        target,
        plan.t_tr,
        opts.dt,
        started,
    )
}

/// Which side of wall `k` is made trivial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BarrierSide {
    /// Barrier in domain `k + 1`; `|L>` and `|S_k>` are swapped.
    Right,
    /// Barrier in domain `k`; `|S_k>` and `|R>` are swapped.
    Left,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierPlan {
    pub eps_bar: f64,
    pub t_prep: f64,
    pub side: BarrierSide,
}

impl BarrierPlan {
    pub fn new(eps_bar: f64, t_prep: f64) -> Self {
        BarrierPlan {
            eps_bar,
            t_prep,
            side: BarrierSide::Right,
        }
    }
}

/// Schedule of a transfer confined to domains `lo..=hi` (1-based) by
/// barriers, with the transfer pulse starting at `start`. Walls `lo - 1`
/// and `hi` follow the outermost active domains.
fn segment_transfer(s: &mut PulseSchedule, peaks: &[f64], lo: usize, hi: usize, start: f64, t_prep: f64, t_tr: f64) {
    let env = Envelope::Transfer { ramp: t_prep };
    for d in lo..=hi {
        s.add(ControlTarget::Domain(d), peaks[d - 1], start, start + t_tr, env);
    }
    s.add(ControlTarget::Wall(lo - 1), peaks[lo - 1], start, start + t_tr, env);
    s.add(ControlTarget::Wall(hi), peaks[hi - 1], start, start + t_tr, env);
}

/// Barrier-assisted schedule for swapping an end state with `|S_k>`.
pub fn ls_schedule(spec: &LatticeSpec, k: usize, plan: &ProtocolPlan, barrier: &BarrierPlan) -> Result<PulseSchedule> {
    if !spec.kind.is_creutz() {
        return Err(Error::Capability(
            "barrier transfers are defined for Creutz ladders".into(),
        ));
    }
    check_plan(spec, plan)?;
    if k == 0 || k >= spec.domains {
        return Err(Error::IndexOutOfRange {
            what: "wall",
            index: k,
            max: spec.domains.saturating_sub(1),
        });
    }
    if !(barrier.eps_bar > 2.0 * spec.hopping) {
        return invalid(format!(
            "barrier {} does not exceed the phase transition at {}",
            barrier.eps_bar,
            2.0 * spec.hopping
        ));
    }
    check_window(barrier.t_prep, 2.0 * barrier.t_prep)?;
    let total = plan.t_tr + 2.0 * barrier.t_prep;
    let mut s = PulseSchedule::new(spec.domains, total);
    let (bar, lo, hi) = match barrier.side {
        BarrierSide::Right => (k + 1, 1, k),
        BarrierSide::Left => (k, k + 1, spec.domains),
    };
    s.add(
        ControlTarget::Domain(bar),
        barrier.eps_bar,
        0.0,
        total,
        Envelope::Transfer { ramp: barrier.t_prep },
    );
    segment_transfer(&mut s, &plan.peaks, lo, hi, barrier.t_prep, plan.t_prep, plan.t_tr);
    Ok(s)
}

/// Swap between an end state and the S-type state of wall `k`; the plan's
/// `t_tr` is the length of the transfer stage alone.
pub fn run_ls_transfer(
    spec: &LatticeSpec,
    k: usize,
    plan: &ProtocolPlan,
    barrier: &BarrierPlan,
    disorder: &DisorderRealization,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    let started = Instant::now();
    let schedule = ls_schedule(spec, k, plan, barrier)?;
    let (from, to) = ls_endpoints(barrier.side, k);
    let psi0 = compact_state(spec, from)?;
    let target = compact_state(spec, to)?;
    let traj = evolve(&psi0, spec, &schedule, disorder, opts)?;
    finish(
        spec,
        traj,
        |t| schedule.controls_at(t),
        &target,
        plan.t_tr,
        opts.dt,
        started,
    )
}

fn ls_endpoints(side: BarrierSide, k: usize) -> (BoundaryStateId, BoundaryStateId) {
    match side {
        BarrierSide::Right => (BoundaryStateId::Left, BoundaryStateId::S(k)),
        BarrierSide::Left => (BoundaryStateId::S(k), BoundaryStateId::Right),
    }
}

/// End-to-end amplitude as a function of total duration for schedules made
/// of a fixed prefix, a constant plateau and a fixed suffix.
///
/// `make(total)` builds the schedule; `prefix` and `suffix` are the lengths
/// of the time-dependent parts.
#[allow(clippy::too_many_arguments)]
pub fn schedule_scan<M>(
    spec: &LatticeSpec,
    make: M,
    prefix: f64,
    suffix: f64,
    psi0: &DVector<C64>,
    target: &DVector<C64>,
    disorder: &DisorderRealization,
    dt: f64,
) -> Result<PlateauScan>
where
    M: Fn(f64) -> Result<PulseSchedule>,
{
    let reference = make(prefix + suffix)?;
    let long = make(prefix + suffix + 10.0)?;
    let plateau = assemble_hamiltonian(spec, &long.controls_at(prefix + 5.0), disorder)?.matrix;
    let pre_steps = steps_for(prefix, dt)?;
    let suf_steps = steps_for(suffix, dt)?;
    let at = |t: f64| Ok(assemble_hamiltonian(spec, &reference.controls_at(t), disorder)?.matrix);
    PlateauScan::build(
        psi0,
        target,
        pre_steps,
        |n| at((n as f64 + 0.5) * dt),
        &plateau,
        suf_steps,
        |n| at(prefix + (n as f64 + 0.5) * dt),
        dt,
    )
}

/// `L -> R` amplitude of the standard pulse as a function of `t_tr`.
pub fn lr_scan(
    spec: &LatticeSpec,
    peaks: &[f64],
    t_prep: f64,
    disorder: &DisorderRealization,
    dt: f64,
) -> Result<PlateauScan> {
    let psi0 = compact_state(spec, BoundaryStateId::Left)?;
    let target = compact_state(spec, BoundaryStateId::Right)?;
    transfer_scan(spec, peaks, t_prep, disorder, dt, &psi0, &target)
}

/// Standard-pulse amplitude between arbitrary states as a function of `t_tr`.
pub fn transfer_scan(
    spec: &LatticeSpec,
    peaks: &[f64],
    t_prep: f64,
    disorder: &DisorderRealization,
    dt: f64,
    psi0: &DVector<C64>,
    target: &DVector<C64>,
) -> Result<PlateauScan> {
    require_topological(spec)?;
    if peaks.len() != spec.domains {
        return invalid("peak controls do not match the lattice");
    }
    schedule_scan(
        spec,
        |t| PulseSchedule::transfer(peaks, t_prep, t),
        t_prep,
        t_prep,
        psi0,
        target,
        disorder,
        dt,
    )
}

/// Barrier-assisted amplitude as a function of the transfer-stage length.
/// The scan's argument is the total duration `t_tr + 2 t'_prep`.
pub fn ls_scan(
    spec: &LatticeSpec,
    k: usize,
    peaks: &[f64],
    t_prep: f64,
    barrier: &BarrierPlan,
    disorder: &DisorderRealization,
    dt: f64,
) -> Result<PlateauScan> {
    let (from, to) = ls_endpoints(barrier.side, k);
    let psi0 = compact_state(spec, from)?;
    let target = compact_state(spec, to)?;
    let edge = t_prep + barrier.t_prep;
    schedule_scan(
        spec,
        |total| {
            let plan = ProtocolPlan {
                peaks: peaks.to_vec(),
                t_prep,
                t_tr: total - 2.0 * barrier.t_prep,
                f0: 0.995,
            };
            ls_schedule(spec, k, &plan, barrier)
        },
        edge,
        edge,
        &psi0,
        &target,
        disorder,
        dt,
    )
}

/// Smallest `t_tr` on the 0.1 grid at which the pristine `L -> R` transfer
/// reaches `f0`.
pub fn optimal_lr_time(spec: &LatticeSpec, peaks: &[f64], t_prep: f64, f0: f64, t_max: f64) -> Result<TimeScanResult> {
    let scan = lr_scan(spec, peaks, t_prep, &DisorderRealization::none(), DEFAULT_DT)?;
    find_optimal_time(|t| Ok(scan.fidelity(t)), &ScanOptions::new(f0, 2.0 * t_prep, t_max))
}

/// Initial and target vectors of the trivial references: a single end site
/// (chain) or the even combination of the end rung (ladder).
pub fn trivial_endpoints(spec: &LatticeSpec) -> Result<(DVector<C64>, DVector<C64>)> {
    let n = spec.site_count();
    let mut a = DVector::from_element(n, C64::new(0.0, 0.0));
    let mut b = a.clone();
    match spec.kind {
        ModelKind::TrivialChain => {
            a[0] = C64::new(1.0, 0.0);
            b[n - 1] = C64::new(1.0, 0.0);
        }
        ModelKind::TrivialLadder => {
            let h = C64::new(0.5f64.sqrt(), 0.0);
            let l = spec.length();
            a[spec.site(1, Leg::A)?.flat] = h;
            a[spec.site(1, Leg::B)?.flat] = h;
            b[spec.site(l, Leg::A)?.flat] = h;
            b[spec.site(l, Leg::B)?.flat] = h;
        }
        other => return Err(Error::Capability(format!("{other:?} is not a trivial reference"))),
    }
    Ok((a, b))
}

/// End-site well protocol on a trivial chain or ladder.
pub fn run_trivial_transfer(
    spec: &LatticeSpec,
    mu0: f64,
    t_tr: f64,
    disorder: &DisorderRealization,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    let started = Instant::now();
    let (psi0, target) = trivial_endpoints(spec)?;
    let schedule = PulseSchedule::wells(mu0, t_tr)?;
    let traj = evolve(&psi0, spec, &schedule, disorder, opts)?;
    finish(spec, traj, |t| schedule.controls_at(t), &target, t_tr, opts.dt, started)
}

/// Fidelity of the well protocol at one `t_tr`, final state only.
pub fn trivial_fidelity(
    spec: &LatticeSpec,
    mu0: f64,
    t_tr: f64,
    disorder: &DisorderRealization,
    dt: f64,
) -> Result<f64> {
    let (psi0, target) = trivial_endpoints(spec)?;
    let schedule = PulseSchedule::wells(mu0, t_tr)?;
    let steps = steps_for(t_tr, dt)?;
    let psi = evolve_with(
        &psi0,
        steps,
        dt,
        |t| Ok(assemble_hamiltonian(spec, &schedule.controls_at(t), disorder)?.matrix),
        |_, _, _| {},
    )?;
    Ok(target.dotc(&psi).norm_sqr())
}

/// Smallest `t_tr` on the 0.1 grid at which the pristine well protocol
/// reaches `f0`.
pub fn optimal_trivial_time(spec: &LatticeSpec, mu0: f64, f0: f64, t_min: f64, t_max: f64) -> Result<TimeScanResult> {
    let none = DisorderRealization::none();
    find_optimal_time(
        |t| trivial_fidelity(spec, mu0, t, &none, DEFAULT_DT),
        &ScanOptions::new(f0, t_min, t_max),
    )
}

/// Two-stage transfer of `(|L> + |S_1>)/√2` to `ζ_1|S_{N-1}> + ζ_2|R>` on a
/// Creutz ladder: the `S_1` component moves to `R` behind a barrier in
/// domain 1, then `L` moves to `S_{N-1}` behind a barrier in domain N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionPlan {
    /// Peak controls of the `N - 1` active domains of each stage.
    pub peaks: Vec<f64>,
    pub t_prep: f64,
    pub stage: f64,
    pub eps_bar: f64,
    pub barrier_prep: f64,
    pub zeta: (f64, f64),
}

impl SuperpositionPlan {
    /// Six-domain layout with outer control `outer` and inner `inner`.
    pub fn six_domain(outer: f64, inner: f64) -> Self {
        SuperpositionPlan {
            peaks: vec![outer, inner, inner, inner, outer],
            t_prep: 30.0,
            stage: 150.7,
            eps_bar: 40.0,
            barrier_prep: 30.0,
            zeta: (-1.0, 1.0),
        }
    }

    pub fn total(&self) -> f64 {
        2.0 * self.stage + 3.0 * self.barrier_prep
    }

    /// Sets the stage length from a total duration.
    pub fn with_total(mut self, total: f64) -> Self {
        self.stage = (total - 3.0 * self.barrier_prep) / 2.0;
        self
    }
}

pub fn superposition_schedule(spec: &LatticeSpec, plan: &SuperpositionPlan) -> Result<PulseSchedule> {
    if !spec.kind.is_creutz() {
        return Err(Error::Capability("superposition transfer needs a Creutz ladder".into()));
    }
    let n = spec.domains;
    if n < 3 || plan.peaks.len() != n - 1 {
        return invalid("superposition transfer needs N >= 3 and N - 1 stage controls");
    }
    check_window(plan.t_prep, plan.stage)?;
    if !(plan.eps_bar > 2.0 * spec.hopping) {
        return invalid("barrier must exceed the phase transition");
    }
    let tb = plan.barrier_prep;
    let mut s = PulseSchedule::new(n, plan.total());
    let bar = Envelope::Transfer { ramp: tb };
    let mut stage1 = vec![0.0; n];
    stage1[1..].copy_from_slice(&plan.peaks);
    let mut stage2 = vec![0.0; n];
    stage2[..n - 1].copy_from_slice(&plan.peaks);
    s.add(ControlTarget::Domain(1), plan.eps_bar, 0.0, plan.stage + 2.0 * tb, bar);
    segment_transfer(&mut s, &stage1, 2, n, tb, plan.t_prep, plan.stage);
    let second = plan.stage + tb;
    s.add(ControlTarget::Domain(n), plan.eps_bar, second, plan.total(), bar);
    segment_transfer(&mut s, &stage2, 1, n - 1, second + tb, plan.t_prep, plan.stage);
    Ok(s)
}

pub fn superposition_endpoints(spec: &LatticeSpec, plan: &SuperpositionPlan) -> Result<(DVector<C64>, DVector<C64>)> {
    let n = spec.domains;
    let h = C64::new(0.5f64.sqrt(), 0.0);
    let psi0 = (compact_state(spec, BoundaryStateId::Left)? + compact_state(spec, BoundaryStateId::S(1))?) * h;
    let target = (compact_state(spec, BoundaryStateId::S(n - 1))? * C64::new(plan.zeta.0, 0.0)
        + compact_state(spec, BoundaryStateId::Right)? * C64::new(plan.zeta.1, 0.0))
        * h;
    Ok((psi0, target))
}

pub fn run_superposition_transfer(
    spec: &LatticeSpec,
    plan: &SuperpositionPlan,
    disorder: &DisorderRealization,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    let started = Instant::now();
    let schedule = superposition_schedule(spec, plan)?;
    let (psi0, target) = superposition_endpoints(spec, plan)?;
    let traj = evolve(&psi0, spec, &schedule, disorder, opts)?;
    finish(
        spec,
        traj,
        |t| schedule.controls_at(t),
        &target,
        plan.total(),
        opts.dt,
        started,
    )
}

/// Trivial counterpart of the superposition transfer: a chain of `length`
/// sites whose two end sites are doubled into `a`/`b` pairs. Stage 1 attaches
/// the `a` pair to the shared bulk and runs a well transfer `1a -> La`; stage
/// 2 does the same for `b`. Detached sites keep the full well depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrivialLine {
    pub length: usize,
    pub hopping: f64,
    pub mu0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinePair {
    A,
    B,
}

impl TrivialLine {
    pub fn new(length: usize, mu0: f64) -> Result<Self> {
        if length < 3 {
            return invalid("trivial line needs at least three sites");
        }
        if !(mu0 > 0.0) {
            return invalid("well depth must be positive");
        }
        Ok(TrivialLine {
            length,
            hopping: 1.0,
            mu0,
        })
    }

    /// Sites: `1a, 1b`, bulk `2 .. length-1`, `La, Lb`.
    pub fn site_count(&self) -> usize {
        self.length + 2
    }

    pub fn bond_count(&self) -> usize {
        self.length + 1
    }

    /// Bonds as (from, to, pair) in a fixed order; `None` marks bulk bonds.
    fn bonds(&self) -> Vec<(usize, usize, Option<LinePair>)> {
        let first_bulk = 2;
        let last_bulk = self.length - 1;
        let (la, lb) = (self.length, self.length + 1);
        let mut b = vec![(0, first_bulk, Some(LinePair::A)), (1, first_bulk, Some(LinePair::B))];
        b.extend((first_bulk..last_bulk).map(|s| (s, s + 1, None)));
        b.push((last_bulk, la, Some(LinePair::A)));
        b.push((last_bulk, lb, Some(LinePair::B)));
        b
    }

    fn pair_sites(&self, pair: LinePair) -> [usize; 2] {
        match pair {
            LinePair::A => [0, self.length],
            LinePair::B => [1, self.length + 1],
        }
    }

    /// Hamiltonian with `active` attached at well value `mu`; the other pair
    /// is detached and sits at `-mu0`.
    pub fn hamiltonian(&self, active: LinePair, mu: f64, disorder: &LineDisorder) -> DMatrix<C64> {
        let n = self.site_count();
        let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for (i, (a, b, pair)) in self.bonds().into_iter().enumerate() {
            if pair.is_some_and(|p| p != active) {
                continue;
            }
            let mag = (self.hopping + disorder.delta_j * disorder.bond(i)).abs();
            m[(a, b)] = C64::new(-mag, 0.0);
            m[(b, a)] = C64::new(-mag, 0.0);
        }
        let idle = if active == LinePair::A {
            LinePair::B
        } else {
            LinePair::A
        };
        for site in self.pair_sites(active) {
            m[(site, site)] += mu;
        }
        for site in self.pair_sites(idle) {
            m[(site, site)] -= self.mu0;
        }
        for s in 0..n {
            m[(s, s)] += disorder.delta_mu * disorder.site(s);
        }
        m
    }

    pub fn sample_disorder(
        &self,
        kind: DisorderKind,
        delta_j: f64,
        delta_mu: f64,
        seed: u64,
        stream: u64,
    ) -> LineDisorder {
        let mut rng = stream_rng(seed, stream);
        match kind {
            DisorderKind::None => LineDisorder::none(),
            DisorderKind::SymmetryPreserving => LineDisorder {
                delta_j,
                delta_mu: 0.0,
                bond_noise: centered_uniforms(&mut rng, self.bond_count()),
                site_noise: Vec::new(),
            },
            DisorderKind::General => LineDisorder {
                delta_j,
                delta_mu,
                bond_noise: centered_uniforms(&mut rng, self.bond_count()),
                site_noise: centered_uniforms(&mut rng, self.site_count()),
            },
        }
    }

    pub fn endpoints(&self) -> (DVector<C64>, DVector<C64>) {
        let n = self.site_count();
        let h = C64::new(0.5f64.sqrt(), 0.0);
        let mut a = DVector::from_element(n, C64::new(0.0, 0.0));
        let mut b = a.clone();
        a[0] = h;
        a[1] = h;
        b[self.length] = h;
        b[self.length + 1] = h;
        (a, b)
    }

    /// Runs both stages, `total / 2` each; returns (fidelity, final state).
    pub fn run(&self, total: f64, disorder: &LineDisorder, dt: f64) -> Result<(f64, DVector<C64>)> {
        let (psi0, target) = self.endpoints();
        let steps = steps_for(total, dt)?;
        let stage = total / 2.0;
        let well = |tau: f64| -self.mu0 * (std::f64::consts::PI * tau / stage).cos().powi(2);
        let psi = evolve_with(
            &psi0,
            steps,
            dt,
            |t| {
                Ok(if t < stage {
                    self.hamiltonian(LinePair::A, well(t), disorder)
                } else {
                    self.hamiltonian(LinePair::B, well(t - stage), disorder)
                })
            },
            |_, _, _| {},
        )?;
        Ok((target.dotc(&psi).norm_sqr(), psi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineDisorder {
    pub delta_j: f64,
    pub delta_mu: f64,
    pub bond_noise: Vec<f64>,
    pub site_noise: Vec<f64>,
}

impl LineDisorder {
    pub fn none() -> Self {
        LineDisorder {
            delta_j: 0.0,
            delta_mu: 0.0,
            bond_noise: Vec::new(),
            site_noise: Vec::new(),
        }
    }

    fn bond(&self, i: usize) -> f64 {
        self.bond_noise.get(i).copied().unwrap_or(0.0)
    }

    fn site(&self, i: usize) -> f64 {
        self.site_noise.get(i).copied().unwrap_or(0.0)
    }
}

/// Boundary state reached adiabatically from a single site: end rungs give
/// `L`/`R`, wall rungs `S_k`.
pub fn preparation_target(spec: &LatticeSpec, j: usize) -> Result<BoundaryStateId> {
    let l = spec.length();
    if j == 1 {
        return Ok(BoundaryStateId::Left);
    }
    if j == l {
        return Ok(BoundaryStateId::Right);
    }
    let period = spec.ell + 1;
    if (j - 1).is_multiple_of(period) {
        return Ok(BoundaryStateId::S((j - 1) / period));
    }
    invalid(format!("rung {j} hosts no computational state"))
}

/// Single-site preparation: every bond touching `(j, leg)` is switched on
/// with a `sin²` ramp over `ramp_time` while the particle sits on that site.
pub fn run_state_preparation(
    spec: &LatticeSpec,
    j: usize,
    leg: Leg,
    ramp_time: f64,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    if !spec.kind.is_creutz() {
        return Err(Error::Capability(
            "state preparation is defined for Creutz ladders".into(),
        ));
    }
    let started = Instant::now();
    let site = spec.site(j, leg)?.flat;
    let id = preparation_target(spec, j)?;
    let target = compact_state(spec, id)?;
    let full = assemble_hamiltonian(spec, &ControlVector::zeros(spec.domains), &DisorderRealization::none())?.matrix;
    let mut psi0 = DVector::from_element(spec.site_count(), C64::new(0.0, 0.0));
    psi0[site] = C64::new(1.0, 0.0);
    let steps = steps_for(ramp_time, opts.dt)?;
    let omega = std::f64::consts::PI / (2.0 * ramp_time.max(f64::MIN_POSITIVE));
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let every = opts.record_every;
    let final_state = evolve_with(
        &psi0,
        steps,
        opts.dt,
        |t| {
            let s = (omega * t).sin().powi(2);
            let mut h = full.clone();
            for x in 0..h.nrows() {
                if x != site {
                    h[(site, x)] *= s;
                    h[(x, site)] *= s;
                }
            }
            Ok(h)
        },
        |n, t, psi| {
            if every > 0 && (n % every == 0 || n == steps) {
                times.push(t);
                states.push(psi.clone());
            }
        },
    )?;
    if every == 0 {
        times.push(steps as f64 * opts.dt);
        states.push(final_state.clone());
    }
    let traj = Trajectory {
        times,
        states,
        final_state,
    };
    let zeros = ControlVector::zeros(spec.domains);
    finish(spec, traj, |_| zeros.clone(), &target, ramp_time, opts.dt, started)
}

/// Chirality `±1` of a state, normalized so that `|L>` has chirality `-1`.
pub fn chirality(spec: &LatticeSpec, psi: &DVector<C64>) -> Result<i32> {
    let x = chiral_operator(spec)?;
    let left = compact_state(spec, BoundaryStateId::Left)?;
    let reference = left.dotc(&(&x * &left)).re;
    let value = psi.dotc(&(&x * psi)).re;
    if value.abs() < 1e-6 {
        return Err(Error::Numerical("state has no definite chirality".into()));
    }
    Ok(if (value > 0.0) == (reference > 0.0) { -1 } else { 1 })
}
