//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p topotransfer-cli --test acceptance`.
//! Pass criterion numbers as arguments (`-- 3 7`) to run a subset. The
//! process exits non-zero on a failed criterion only when
//! `ACCEPTANCE_STRICT=1`, so known failures do not break `cargo test`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use topotransfer::analysis::{
    disorder_sweep, length_scan, phase_distance, zeta_formula, LengthSeries, PhaseModel, PhaseQuery, Sample,
};
use topotransfer::effective::{
    evolve_pulsed, first_lobe_peak, mirror_peaks, optimize_controls, predict_transfer_time, OptimizeOptions,
    ProtocolPlan,
};
use topotransfer::lattice::{
    assemble_hamiltonian, count_zero_modes, sample_disorder_stream, ControlVector, DisorderKind, DisorderRealization,
    LatticeSpec, ModelKind,
};
use topotransfer::linalg::{DVector, C64};
use topotransfer::protocol::{
    lr_scan, optimal_lr_time, optimal_trivial_time, run_lr_transfer, run_superposition_transfer, run_transfer_from,
    RunOptions, SuperpositionPlan, TrivialLine, DEFAULT_DT,
};
use topotransfer::states::{closed_form_state, compact_state, state_deviation, BoundaryStateId};
use topotransfer::timescan::{tick, tick_time, TimeScanResult};

struct Check {
    ok: bool,
    line: String,
}

fn check(ok: bool, line: String) -> Check {
    Check { ok, line }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

type Outcome = Result<Vec<Check>, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// One reference row: optimized controls and transfer time.
struct Row {
    kind: ModelKind,
    n: usize,
    ell: usize,
    c1: f64,
    inner: &'static [f64],
    tie: bool,
    t_tr: f64,
}

impl Row {
    fn label(&self) -> String {
        let fam = if self.kind == ModelKind::Ssh { "SSH" } else { "CL" };
        format!("{fam} N={} ell={}", self.n, self.ell)
    }

    fn spec(&self) -> LatticeSpec {
        LatticeSpec::new(self.kind, self.n, self.ell).unwrap()
    }

    fn peaks(&self) -> Vec<f64> {
        mirror_peaks(self.n, self.c1, self.inner, self.tie)
    }

    fn t_prep(&self) -> f64 {
        t_prep(self.kind)
    }
}

fn t_prep(kind: ModelKind) -> f64 {
    if kind == ModelKind::Ssh {
        15.0
    } else {
        30.0
    }
}

const CL: ModelKind = ModelKind::CreutzImbalanced;
const SSH: ModelKind = ModelKind::Ssh;

const TABLE: [Row; 10] = [
    Row {
        kind: CL,
        n: 3,
        ell: 4,
        c1: 1.0,
        inner: &[0.952],
        tie: false,
        t_tr: 123.4,
    },
    Row {
        kind: CL,
        n: 4,
        ell: 4,
        c1: 1.0,
        inner: &[0.969],
        tie: false,
        t_tr: 135.7,
    },
    Row {
        kind: CL,
        n: 5,
        ell: 4,
        c1: 1.0,
        inner: &[0.973],
        tie: true,
        t_tr: 148.9,
    },
    Row {
        kind: CL,
        n: 6,
        ell: 4,
        c1: 1.0,
        inner: &[0.975, 0.979],
        tie: false,
        t_tr: 162.2,
    },
    Row {
        kind: CL,
        n: 4,
        ell: 2,
        c1: 1.0,
        inner: &[0.906],
        tie: false,
        t_tr: 63.1,
    },
    Row {
        kind: SSH,
        n: 3,
        ell: 4,
        c1: 0.5,
        inner: &[0.543],
        tie: false,
        t_tr: 50.6,
    },
    Row {
        kind: SSH,
        n: 4,
        ell: 4,
        c1: 0.5,
        inner: &[0.560],
        tie: false,
        t_tr: 55.9,
    },
    Row {
        kind: SSH,
        n: 5,
        ell: 4,
        c1: 0.5,
        inner: &[0.561, 0.566],
        tie: false,
        t_tr: 62.2,
    },
    Row {
        kind: SSH,
        n: 6,
        ell: 4,
        c1: 0.5,
        inner: &[0.563, 0.576],
        tie: false,
        t_tr: 67.5,
    },
    Row {
        kind: SSH,
        n: 4,
        ell: 2,
        c1: 0.5,
        inner: &[0.560],
        tie: false,
        t_tr: 35.0,
    },
];

#[derive(Default)]
struct Ctx {
    /// Optimizer results per reference row index.
    optimized: BTreeMap<usize, (Vec<f64>, f64)>,
}

impl Ctx {
    fn optimize(&mut self, i: usize) -> Result<(Vec<f64>, f64), String> {
        if let Some(r) = self.optimized.get(&i) {
            return Ok(r.clone());
        }
        let row = &TABLE[i];
        let mut opts = OptimizeOptions::new(row.t_prep());
        opts.tie_inner = row.tie;
        let res = optimize_controls(&row.spec(), row.c1, &opts).map_err(err)?;
        let out = (res.inner.clone(), res.plan.t_tr);
        self.optimized.insert(i, out.clone());
        Ok(out)
    }
}

fn criterion_1(_: &mut Ctx) -> Outcome {
    let started = Instant::now();
    let mut out = Vec::new();
    for n in [1, 2, 4] {
        let spec = LatticeSpec::creutz(n, 4).map_err(err)?;
        let h = assemble_hamiltonian(&spec, &ControlVector::zeros(n), &DisorderRealization::none()).map_err(err)?;
        let z = count_zero_modes(&h, 1e-10).map_err(err)?;
        out.push(check(
            z == 2 * n,
            format!("CL N={n} ell=4: {z} zero modes, expected {}", 2 * n),
        ));
    }
    let spec = LatticeSpec::ssh(4, 4).map_err(err)?;
    let h = assemble_hamiltonian(&spec, &ControlVector::zeros(4), &DisorderRealization::none()).map_err(err)?;
    let z = count_zero_modes(&h, 1e-10).map_err(err)?;
    out.push(check(
        z == 5,
        format!("SSH N=4 ell=4 at v=0: {z} zero modes, expected 5"),
    ));
    let secs = started.elapsed().as_secs_f64();
    out.push(check(secs < 1.0, format!("runtime {secs:.3} s")));
    Ok(out)
}

fn criterion_2(_: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    for (ell, eps, expected) in [(4, 1.0, 0.016), (2, 1.5, 0.16)] {
        let spec = LatticeSpec::creutz(2, ell).map_err(err)?;
        let controls = ControlVector::uniform(2, eps);
        let h = assemble_hamiltonian(&spec, &controls, &DisorderRealization::none()).map_err(err)?;
        let a = closed_form_state(&spec, BoundaryStateId::Left, &controls).map_err(err)?;
        let d = state_deviation(&a, &h, spec.protected_count()).map_err(err)?;
        out.push(check(
            within(d, expected, 0.10),
            format!("ell={ell} eps={eps}: delta_L = {d:.4}, expected {expected} +-10%"),
        ));
    }
    Ok(out)
}

fn criterion_3(_: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let cases: Vec<(ModelKind, usize, Vec<usize>)> = vec![
        (CL, 1, (6..=11).collect()),
        (CL, 2, (4..=9).collect()),
        (SSH, 1, vec![6, 8, 10]),
        (SSH, 2, vec![4, 6, 8]),
    ];
    for (kind, n, ells) in cases {
        let c = if kind == SSH { 0.5 } else { 1.0 };
        let tp = t_prep(kind);
        for ell in ells {
            let spec = LatticeSpec::new(kind, n, ell).map_err(err)?;
            let formula = predict_transfer_time(&spec, c).map_err(err)? + 2.0 * tp;
            let scanned = optimal_lr_time(&spec, &vec![c; n], tp, 0.995, 3.0 * formula).map_err(err)?;
            let rel = scanned.t_tr / formula - 1.0;
            out.push(check(
                rel.abs() <= 0.10,
                format!(
                    "{kind:?} N={n} ell={ell}: scanned {:.1}, formula {formula:.1} ({:+.1}%)",
                    scanned.t_tr,
                    100.0 * rel
                ),
            ));
        }
    }
    Ok(out)
}

fn anchor(label: &str, t: f64, lo: f64, hi: f64) -> Check {
    let ok = t >= 0.95 * lo && t <= 1.05 * hi;
    let quoted = if lo == hi {
        format!("{lo}")
    } else {
        format!("{lo}-{hi}")
    };
    check(ok, format!("{label}: {t:.1}, anchor {quoted} +-5%"))
}

const LADDER_BUDGET: f64 = 1500.0;

fn criterion_4(_: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let none = DisorderRealization::none();
    for (len, chain, ladder, single, four_ell, four_peaks, four) in [
        (13, 332.3, 3567.7, 9013.8, 2, [1.0, 0.906, 0.906, 1.0], (63.0, 63.1)),
        (
            21,
            800.5,
            46739.8,
            2288679.9,
            4,
            [1.0, 0.969, 0.969, 1.0],
            (135.5, 135.7),
        ),
    ] {
        let spec = LatticeSpec::trivial_chain(len).map_err(err)?;
        let r = optimal_trivial_time(&spec, 10.0, 0.985, 1.0, 1.05 * chain).map_err(err)?;
        out.push(anchor(&format!("L={len} trivial chain"), r.t_tr, chain, chain));

        // every candidate time is a full direct run, so the search stops at
        // LADDER_BUDGET; a crossing below it already lies outside the band
        let spec = LatticeSpec::trivial_ladder(len).map_err(err)?;
        let t_max = f64::min(1.05 * ladder, LADDER_BUDGET);
        let r = optimal_trivial_time(&spec, 10.0, 0.95, 1.0, t_max);
        match r {
            Ok(r) => out.push(anchor(&format!("L={len} trivial CL"), r.t_tr, ladder, ladder)),
            Err(e) => out.push(check(false, format!("L={len} trivial CL (anchor {ladder}): {e}"))),
        }

        let spec = LatticeSpec::creutz(1, len - 2).map_err(err)?;
        let scan = lr_scan(&spec, &[1.0], 30.0, &none, DEFAULT_DT).map_err(err)?;
        let r = topotransfer::timescan::find_optimal_time(
            |t| Ok(scan.fidelity(t)),
            &topotransfer::timescan::ScanOptions::new(0.995, 60.0, 1.05 * single),
        );
        let formula = predict_transfer_time(&spec, 1.0).map_err(err)? + 60.0;
        match r {
            Ok(r) => out.push(anchor(
                &format!("L={len} CL N=1 (formula {formula:.1})"),
                r.t_tr,
                single,
                single,
            )),
            Err(e) => out.push(check(false, format!("L={len} CL N=1: {e}"))),
        }

        let spec = LatticeSpec::creutz(4, four_ell).map_err(err)?;
        let r = optimal_lr_time(&spec, &four_peaks, 30.0, 0.995, 500.0).map_err(err)?;
        out.push(anchor(&format!("L={len} CL N=4"), r.t_tr, four.0, four.1));
    }
    Ok(out)
}

fn criterion_5(ctx: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let none = DisorderRealization::none();
    for (i, row) in TABLE.iter().enumerate() {
        let spec = row.spec();
        let scan = lr_scan(&spec, &row.peaks(), row.t_prep(), &none, DEFAULT_DT).map_err(err)?;
        let (best_t, best_f) = (tick(0.95 * row.t_tr)..=tick(1.05 * row.t_tr))
            .map(|k| (tick_time(k), scan.fidelity(tick_time(k))))
            .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        out.push(check(
            best_f >= 0.995,
            format!(
                "{} quoted controls: max f {best_f:.4} at t={best_t:.1} within {}+-5%",
                row.label(),
                row.t_tr
            ),
        ));
        let (inner, t) = ctx.optimize(i)?;
        let ok = inner.len() == row.inner.len() && inner.iter().zip(row.inner).all(|(a, b)| (a - b).abs() <= 0.01);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
        out.push(check(
            ok,
            format!(
                "{} optimizer: ({}) at t={t:.1}, reference ({})",
                row.label(),
                fmt(&inner),
                fmt(row.inner)
            ),
        ));
    }
    Ok(out)
}

fn criterion_6(ctx: &mut Ctx) -> Outcome {
    let mut times: BTreeMap<usize, TimeScanResult> = BTreeMap::new();
    let spec = LatticeSpec::creutz(2, 4).map_err(err)?;
    times.insert(
        2,
        optimal_lr_time(&spec, &[1.0, 1.0], 30.0, 0.995, 2000.0).map_err(err)?,
    );
    for n in 3..=6 {
        let i = TABLE
            .iter()
            .position(|r| r.kind == CL && r.ell == 4 && r.n == n)
            .unwrap();
        let (_, t) = ctx.optimize(i)?;
        times.insert(
            n,
            TimeScanResult {
                t_tr: t,
                fidelity: 0.995,
                evaluations: 0,
            },
        );
    }
    let scan = length_scan(LengthSeries::FixedEll { ell: 4 }, CL, &[2, 3, 4, 5, 6], |s| {
        Ok(times[&s.domains].clone())
    })
    .map_err(err)?;
    let fit = scan.fit.ok_or("no fit")?;
    let pts: Vec<String> = scan
        .lengths
        .iter()
        .zip(&scan.times)
        .map(|(l, t)| format!("L={l}:{t:.1}"))
        .collect();
    Ok(vec![
        check(true, format!("points {}", pts.join(" "))),
        check(
            within(fit.slope, 2.55, 0.10),
            format!("A0 = {:.3}, expected 2.55 +-10%", fit.slope),
        ),
        check(
            within(fit.intercept, 81.66, 0.15),
            format!("t0 = {:.2}, expected 81.66 +-15%", fit.intercept),
        ),
    ])
}

fn criterion_7(_: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let two = LatticeSpec::creutz(2, 4).map_err(err)?;
    let t2 = optimal_lr_time(&two, &[1.0, 1.0], 30.0, 0.995, 2000.0)
        .map_err(err)?
        .t_tr;
    for (spec, peaks, t) in [
        (two, vec![1.0, 1.0], t2),
        (
            LatticeSpec::creutz(4, 4).map_err(err)?,
            vec![1.0, 0.969, 0.969, 1.0],
            135.7,
        ),
    ] {
        let plan = ProtocolPlan::new(peaks, 30.0, t).map_err(err)?;
        let full = run_lr_transfer(&spec, &plan, &DisorderRealization::none(), &RunOptions::default()).map_err(err)?;
        let size = spec.domains + 1;
        let mut psi0 = DVector::from_element(size, C64::new(0.0, 0.0));
        psi0[0] = C64::new(1.0, 0.0);
        let eff = evolve_pulsed(&spec, &plan, &psi0, DEFAULT_DT).map_err(err)?;
        if eff.occupations.len() != full.topological_occupations.len() {
            return Err(format!(
                "sample count mismatch: {} vs {}",
                eff.occupations.len(),
                full.topological_occupations.len()
            ));
        }
        let diff = eff
            .occupations
            .iter()
            .zip(&full.topological_occupations)
            .flat_map(|(e, f)| e.iter().zip(&f[..size]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        out.push(check(
            diff < 0.05,
            format!(
                "CL N={} ell=4 t={t:.1}: max occupation difference {diff:.4}",
                spec.domains
            ),
        ));
    }
    Ok(out)
}

fn criterion_8(_: &mut Ctx) -> Outcome {
    let spec = LatticeSpec::creutz(3, 4).map_err(err)?;
    let h = C64::new(0.5f64.sqrt(), 0.0);
    let l = compact_state(&spec, BoundaryStateId::Left).map_err(err)?;
    let s1 = compact_state(&spec, BoundaryStateId::S(1)).map_err(err)?;
    let r = compact_state(&spec, BoundaryStateId::Right).map_err(err)?;
    let psi0 = (&l + &s1) * h;
    let target = (&s1 - &r) * h;
    let plan = ProtocolPlan::new(vec![1.0, 0.952, 1.0], 30.0, 123.4).map_err(err)?;
    let res = run_transfer_from(
        &spec,
        &plan,
        &DisorderRealization::none(),
        &RunOptions::default(),
        &psi0,
        &target,
    )
    .map_err(err)?;
    let idx = res
        .tracked
        .iter()
        .position(|&id| id == BoundaryStateId::S(1))
        .ok_or("S1 not tracked")?;
    let dev = res
        .topological_occupations
        .iter()
        .map(|o| (o[idx] - 0.5).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        check(
            res.fidelity >= 0.99,
            format!("fidelity to (S1 - R)/sqrt2: {:.4}", res.fidelity),
        ),
        check(dev <= 0.01, format!("max |n_S1 - 0.5| = {dev:.4}")),
    ])
}

/// Reference peaks for a configuration, runged ladders borrowing the
/// imbalanced rows.
fn table_peaks(kind: ModelKind, n: usize, ell: usize) -> Option<Vec<f64>> {
    let kind = if kind == ModelKind::CreutzRunged { CL } else { kind };
    TABLE
        .iter()
        .find(|r| r.kind == kind && r.n == n && r.ell == ell)
        .map(Row::peaks)
}

/// Completed passages of the `R` occupation through 1/2 (up, then down)
/// before the end of the run.
fn earlier_lobes(occupation: &[f64]) -> usize {
    let mut above = false;
    let mut count = 0;
    for &x in occupation {
        if !above && x > 0.5 {
            above = true;
        } else if above && x < 0.5 {
            above = false;
            count += 1;
        }
    }
    count
}

fn criterion_9(_: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let none = DisorderRealization::none();
    for kind in [CL, ModelKind::CreutzRunged, SSH] {
        let model = PhaseModel::of(kind).map_err(err)?;
        let c1 = if kind == SSH { 0.5 } else { 1.0 };
        let tp = t_prep(kind);
        for ell in [2, 4] {
            for n in 1..=4 {
                let spec = LatticeSpec::new(kind, n, ell).map_err(err)?;
                let peaks = match table_peaks(kind, n, ell) {
                    Some(p) => p,
                    None if n < 3 => vec![c1; n],
                    None => {
                        let opts = OptimizeOptions {
                            f0: 0.9,
                            ..OptimizeOptions::new(tp)
                        };
                        optimize_controls(&spec, c1, &opts).map_err(err)?.plan.peaks
                    }
                };
                let scan = lr_scan(&spec, &peaks, tp, &none, DEFAULT_DT).map_err(err)?;
                let t = tick_time(tick(first_lobe_peak(&scan, 2.0 * tp, 1e5).0));
                let plan = ProtocolPlan::new(peaks, tp, t).map_err(err)?;
                let res = run_lr_transfer(&spec, &plan, &none, &RunOptions::default()).map_err(err)?;
                let r = res
                    .tracked
                    .iter()
                    .position(|&id| id == BoundaryStateId::Right)
                    .ok_or("R not tracked")?;
                let n_r: Vec<f64> = res.topological_occupations.iter().map(|o| o[r]).collect();
                let m = earlier_lobes(&n_r);
                let zeta = |direction| {
                    zeta_formula(&PhaseQuery {
                        model,
                        ell,
                        n_w: n - 1,
                        x: -1,
                        direction,
                    })
                };
                // each earlier lobe is a full round trip R -> L -> R
                let expected = (zeta(1) * (zeta(1) * zeta(-1)).powu(m as u32)).arg();
                let phase = res.acquired_phase.unwrap_or(f64::NAN);
                let d = phase_distance(phase, expected);
                out.push(check(
                    res.fidelity > 0.5 && d <= 0.05,
                    format!(
                        "{kind:?} ell={ell} n_w={}: phase {phase:+.3}, formula {expected:+.3} (zeta {:+.3}, {m} earlier lobes), f={:.3} at t={t:.1}",
                        n - 1,
                        zeta(1).arg(),
                        res.fidelity
                    ),
                ));
            }
        }
    }
    Ok(out)
}

fn criterion_10(_: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    for n in [1, 2] {
        let a = optimal_lr_time(
            &LatticeSpec::creutz(n, 4).map_err(err)?,
            &vec![1.0; n],
            30.0,
            0.995,
            5000.0,
        )
        .map_err(err)?;
        let b = optimal_lr_time(
            &LatticeSpec::runged(n, 4).map_err(err)?,
            &vec![1.0; n],
            30.0,
            0.995,
            5000.0,
        )
        .map_err(err)?;
        let rel = b.t_tr / a.t_tr - 1.0;
        out.push(check(
            rel.abs() <= 0.01,
            format!(
                "N={n}: imbalanced {:.1}, runged {:.1} ({:+.2}%)",
                a.t_tr,
                b.t_tr,
                100.0 * rel
            ),
        ));
    }
    Ok(out)
}

const M: usize = 200;
const SEED: u64 = 2024;

/// Disorder sweep of the `L -> R` amplitude at a fixed pristine-optimal time.
fn lr_sweep(spec: &LatticeSpec, peaks: &[f64], kind: DisorderKind, level: f64) -> Result<(f64, f64, f64), String> {
    let tp = t_prep(spec.kind);
    let t = optimal_lr_time(spec, peaks, tp, 0.995, 20000.0).map_err(err)?.t_tr;
    let dmu = if kind == DisorderKind::General { level } else { 0.0 };
    let rep = disorder_sweep(
        |dj, seed, stream| {
            let d = sample_disorder_stream(spec, kind, dj, dmu, seed, stream)?;
            let a = lr_scan(spec, peaks, tp, &d, DEFAULT_DT)?.amplitude(t);
            let f = a.norm_sqr();
            Ok(Sample {
                fidelity: f,
                phase: (f > 0.5).then(|| a.arg()),
            })
        },
        &[level],
        M,
        SEED,
    )
    .map_err(err)?;
    Ok((t, rep.mean_fidelity[0], rep.phase_circ_std[0]))
}

fn criterion_11(_: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let sp = DisorderKind::SymmetryPreserving;
    let cl4 = LatticeSpec::creutz(4, 2).map_err(err)?;
    let cl4_peaks = [1.0, 0.906, 0.906, 1.0];
    let ssh4 = LatticeSpec::ssh(4, 2).map_err(err)?;
    let ssh4_peaks = [0.5, 0.56, 0.56, 0.5];

    let (t, mean, _) = lr_sweep(&cl4, &cl4_peaks, sp, 0.1)?;
    out.push(check(
        mean >= 0.99,
        format!("CL N=4 L=13 t={t:.1}, SP dJ=0.1, M={M}: mean f {mean:.4}"),
    ));
    let (t, mean, _) = lr_sweep(&ssh4, &ssh4_peaks, DisorderKind::General, 0.05)?;
    out.push(check(
        mean >= 0.99,
        format!("SSH N=4 L=13 t={t:.1}, general 0.05, M={M}: mean f {mean:.4}"),
    ));

    let protocols: [(&str, LatticeSpec, Vec<f64>); 4] = [
        ("CL N=1 L=13", LatticeSpec::creutz(1, 11).map_err(err)?, vec![1.0]),
        ("CL N=4 L=13", cl4, cl4_peaks.to_vec()),
        ("SSH N=1 L=12", LatticeSpec::ssh(1, 10).map_err(err)?, vec![0.5]),
        ("SSH N=4 L=13", ssh4, ssh4_peaks.to_vec()),
    ];
    for (label, spec, peaks) in protocols {
        let (t, mean, std) = lr_sweep(&spec, &peaks, sp, 0.15)?;
        out.push(check(
            std < 0.1,
            format!("{label} t={t:.1}, SP dJ=0.15, M={M}: circular std {std:.4} (mean f {mean:.4})"),
        ));
    }
    Ok(out)
}

fn criterion_12(_: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let spec = LatticeSpec::creutz(6, 4).map_err(err)?;
    let plan = SuperpositionPlan::six_domain(1.0, 0.97).with_total(391.4);
    let none = DisorderRealization::none();
    let opts = RunOptions::final_only();
    let f = run_superposition_transfer(&spec, &plan, &none, &opts)
        .map_err(err)?
        .fidelity;
    out.push(check(
        (f - 0.996).abs() <= 0.005,
        format!("CL six-domain at 391.4: F = {f:.4}"),
    ));

    let line = TrivialLine::new(26, 10.0).map_err(err)?;
    let total = 2405.6;
    let (f, _) = line
        .run(total, &topotransfer::protocol::LineDisorder::none(), DEFAULT_DT)
        .map_err(err)?;
    out.push(check(
        (f - 0.986).abs() <= 0.01,
        format!("trivial line at {total}: F = {f:.4}"),
    ));

    let levels = [0.05, 0.1, 0.15];
    let m = 12;
    let sp = DisorderKind::SymmetryPreserving;
    let cl = disorder_sweep(
        |dj, seed, stream| {
            let d = sample_disorder_stream(&spec, sp, dj, 0.0, seed, stream)?;
            let r = run_superposition_transfer(&spec, &plan, &d, &opts)?;
            Ok(Sample {
                fidelity: r.fidelity,
                phase: r.acquired_phase,
            })
        },
        &levels,
        m,
        SEED,
    )
    .map_err(err)?;
    let triv = disorder_sweep(
        |dj, seed, stream| {
            let d = line.sample_disorder(sp, dj, 0.0, seed, stream);
            let (f, _) = line.run(total, &d, DEFAULT_DT)?;
            Ok(Sample {
                fidelity: f,
                phase: None,
            })
        },
        &levels,
        m,
        SEED,
    )
    .map_err(err)?;
    for (i, level) in levels.iter().enumerate() {
        let (a, b) = (cl.mean_fidelity[i], triv.mean_fidelity[i]);
        out.push(check(
            a >= b,
            format!("SP dJ={level}, M={m}: CL mean {a:.4}, trivial mean {b:.4}"),
        ));
    }
    Ok(out)
}

fn cli(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_topotransfer"))
        .args(args)
        .output()
        .map_err(err)
}

fn criterion_13(_: &mut Ctx) -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let commands: [(&str, Vec<&str>); 3] = [
        (
            "sweep.csv",
            vec![
                "sweep",
                "--model",
                "cl",
                "--N",
                "4",
                "--ell",
                "2",
                "--controls",
                "1,0.906,0.906,1",
                "--t-tr",
                "63.1",
                "--kind",
                "symmetry-preserving",
                "--levels",
                "0,0.1",
                "--M",
                "8",
                "--seed",
                "7",
            ],
        ),
        (
            "run.json",
            vec![
                "run",
                "--model",
                "ssh",
                "--N",
                "2",
                "--ell",
                "4",
                "--auto-time",
                "--format",
                "json",
            ],
        ),
        (
            "optimize.csv",
            vec!["optimize", "--model", "ssh", "--N", "3", "--ell", "4"],
        ),
    ];
    let mut out = Vec::new();
    for (name, args) in commands {
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let path = dir.path().join(format!("{rep}-{name}"));
            let mut full = args.clone();
            let p = path.to_string_lossy().to_string();
            full.extend(["--output", p.as_str()]);
            let o = cli(&full)?;
            if !o.status.success() {
                return Err(format!("{name}: {}", String::from_utf8_lossy(&o.stderr)));
            }
            bytes.push(std::fs::read(&path).map_err(err)?);
        }
        out.push(check(
            !bytes[0].is_empty() && bytes[0] == bytes[1],
            format!("{} ({} bytes) identical across runs", args[0], bytes[0].len()),
        ));
    }
    Ok(out)
}

type Criterion = fn(&mut Ctx) -> Outcome;

const CRITERIA: [(u32, &str, Criterion); 13] = [
    (1, "zero-mode census", criterion_1),
    (2, "analytic-state deviation", criterion_2),
    (3, "transfer-time formulas", criterion_3),
    (4, "length anchors", criterion_4),
    (5, "reference controls and times", criterion_5),
    (6, "linear scaling at fixed ell", criterion_6),
    (7, "effective-model oracle", criterion_7),
    (8, "S-state transparency", criterion_8),
    (9, "acquired phases", criterion_9),
    (10, "runged equivalence", criterion_10),
    (11, "disorder plateaus", criterion_11),
    (12, "superposition transfer", criterion_12),
    (13, "CLI determinism", criterion_13),
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut ctx = Ctx::default();
    let mut failed = 0;
    for (n, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut ctx)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panic".into())));
        let secs = started.elapsed().as_secs_f64();
        let (ok, lines) = match outcome {
            Ok(checks) => (checks.iter().all(|c| c.ok), checks),
            Err(e) => (false, vec![check(false, format!("error: {e}"))]),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n:>2}: {} {name} ({secs:.1} s)",
            if ok { "PASS" } else { "FAIL" }
        );
        for c in lines {
            println!("    [{}] {}", if c.ok { "ok" } else { "miss" }, c.line);
        }
    }
    println!("{failed} criteria failed");
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
