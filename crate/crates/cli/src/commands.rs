//! Protocol dispatch for every subcommand.

use topotransfer::analysis::{disorder_sweep, length_scan, LengthScan, LengthSeries, Sample};
use topotransfer::effective::{optimize_controls, OptimizeOptions, ProtocolPlan};
use topotransfer::lattice::{
    assemble_hamiltonian, count_zero_modes, sample_disorder, sample_disorder_stream, ControlVector, DisorderKind,
    DisorderRealization, LatticeSpec, Leg, ModelKind,
};
use topotransfer::linalg::hermitian_eigen;
use topotransfer::protocol::{
    lr_scan, ls_scan, optimal_lr_time, optimal_trivial_time, run_lr_transfer, run_ls_transfer, run_state_preparation,
    run_superposition_transfer, run_trivial_transfer, BarrierPlan, BarrierSide, ProtocolResult, RunOptions,
    SuperpositionPlan,
};
use topotransfer::states::{compact_state, hybridized_state, BoundaryStateId};
use topotransfer::timescan::{find_optimal_time, ScanOptions, TimeScanResult};

use crate::config::{Model, Protocol, RunConfig, Series, Side};
use crate::output::{Cell, Report};
use crate::CliError;

const ZERO_TOL: f64 = 1e-10;

fn default_protocol(cfg: &RunConfig) -> Protocol {
    cfg.protocol.unwrap_or(match cfg.model() {
        Model::Chain | Model::Ladder => Protocol::Trivial,
        _ => Protocol::Lr,
    })
}

fn run_options(cfg: &RunConfig) -> RunOptions {
    RunOptions {
        dt: cfg.dt(),
        record_every: cfg.record_every.unwrap_or(10),
    }
}

/// Bond and site disorder strengths; the site strength defaults to the bond
/// strength.
fn strengths(cfg: &RunConfig) -> (f64, f64) {
    let dj = cfg.delta_j.unwrap_or(0.0);
    (dj, cfg.delta_mu.unwrap_or(dj))
}

fn barrier(cfg: &RunConfig) -> BarrierPlan {
    let mut b = BarrierPlan::new(cfg.eps_bar(), cfg.barrier_prep.unwrap_or(cfg.t_prep()));
    if cfg.side == Some(Side::Left) {
        b.side = BarrierSide::Left;
    }
    b
}

fn scan_opts(cfg: &RunConfig, t_min: f64) -> ScanOptions {
    ScanOptions::new(cfg.f0(), t_min, cfg.t_max())
}

fn auto_time(cfg: &RunConfig) -> bool {
    cfg.auto_time.unwrap_or(cfg.t_tr.is_none())
}

/// Pristine transfer time of the configured protocol: given, or scanned.
fn transfer_time(cfg: &RunConfig, spec: &LatticeSpec, protocol: Protocol) -> Result<f64, CliError> {
    if !auto_time(cfg) {
        return cfg
            .t_tr
            .ok_or_else(|| CliError::Config("t_tr is required when auto_time is off".into()));
    }
    let t_prep = cfg.t_prep();
    let found: TimeScanResult = match protocol {
        Protocol::Lr => optimal_lr_time(spec, &cfg.peaks(spec.domains)?, t_prep, cfg.f0(), cfg.t_max())?,
        Protocol::Ls => {
            let b = barrier(cfg);
            let scan = ls_scan(
                spec,
                cfg.wall.unwrap_or(1),
                &cfg.peaks(spec.domains)?,
                t_prep,
                &b,
                &DisorderRealization::none(),
                cfg.dt(),
            )?;
            let r = find_optimal_time(|t| Ok(scan.fidelity(t)), &scan_opts(cfg, 2.0 * (t_prep + b.t_prep)))?;
            TimeScanResult {
                t_tr: r.t_tr - 2.0 * b.t_prep,
                ..r
            }
        }
        Protocol::Trivial => optimal_trivial_time(spec, cfg.mu0(), cfg.f0(), 0.0, cfg.t_max())?,
        Protocol::Superposition | Protocol::Prepare => {
            return Err(CliError::Config(
                "automatic timing is not available for this protocol".into(),
            ))
        }
    };
    Ok(found.t_tr)
}

fn superposition_plan(cfg: &RunConfig, spec: &LatticeSpec) -> Result<SuperpositionPlan, CliError> {
    let mut plan = SuperpositionPlan::six_domain(1.0, 0.97);
    let active = spec.domains.saturating_sub(1);
    plan.peaks = match &cfg.controls {
        Some(c) if c.len() == active => c.clone(),
        Some(c) => {
            return Err(CliError::Config(format!(
                "superposition needs {active} stage controls, got {}",
                c.len()
            )))
        }
        None => (0..active)
            .map(|d| if d == 0 || d + 1 == active { 1.0 } else { 0.97 })
            .collect(),
    };
    if let Some(t) = cfg.t_prep {
        plan.t_prep = t;
    }
    if let Some(e) = cfg.eps_bar {
        plan.eps_bar = e;
    }
    if let Some(b) = cfg.barrier_prep {
        plan.barrier_prep = b;
    }
    Ok(plan.with_total(cfg.t_tr.unwrap_or(391.4)))
}

fn parse_leg(text: Option<&str>) -> Result<Leg, CliError> {
    match text.unwrap_or("a").to_ascii_lowercase().as_str() {
        "a" => Ok(Leg::A),
        "b" => Ok(Leg::B),
        other => Err(CliError::Config(format!("unknown leg `{other}`"))),
    }
}

pub fn parse_state(text: &str) -> Result<BoundaryStateId, CliError> {
    let bad = || CliError::Config(format!("unknown state `{text}`"));
    let t = text.trim();
    match t {
        "L" => return Ok(BoundaryStateId::Left),
        "R" => return Ok(BoundaryStateId::Right),
        _ => {}
    }
    let (head, rest) = t.split_at(t.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?);
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    let tail = &rest[digits.len()..];
    let k: usize = digits.parse().map_err(|_| bad())?;
    match (head, tail) {
        ("S", "") => Ok(BoundaryStateId::S(k)),
        ("S", "l") => Ok(BoundaryStateId::SLeft(k)),
        ("S", "r") => Ok(BoundaryStateId::SRight(k)),
        ("P", "") => Ok(BoundaryStateId::P(k)),
        _ => Err(bad()),
    }
}

fn trajectory_report(result: &ProtocolResult) -> Report {
    let mut r = Report::new(&["t", "j", "occupation"]);
    for (t, occ) in result.times.iter().zip(&result.rung_occupations) {
        for (j, &n) in occ.iter().enumerate() {
            r.push(vec![Cell::Num(*t), Cell::from(j + 1), Cell::Num(n)]);
        }
    }
    r.note("fidelity", result.fidelity);
    r.note("phase", result.acquired_phase.unwrap_or(f64::NAN));
    r.note("t_tr", result.timing.t_tr);
    r
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.lattice()?;
    let protocol = default_protocol(cfg);
    let (dj, dmu) = strengths(cfg);
    let disorder = sample_disorder(&spec, cfg.disorder_kind(), dj, dmu, cfg.seed())?;
    let opts = run_options(cfg);
    let result = match protocol {
        Protocol::Lr => {
            let t_tr = transfer_time(cfg, &spec, protocol)?;
            let plan = ProtocolPlan::new(cfg.peaks(spec.domains)?, cfg.t_prep(), t_tr)?;
            run_lr_transfer(&spec, &plan, &disorder, &opts)?
        }
        Protocol::Ls => {
            let t_tr = transfer_time(cfg, &spec, protocol)?;
            let plan = ProtocolPlan::new(cfg.peaks(spec.domains)?, cfg.t_prep(), t_tr)?;
            run_ls_transfer(&spec, cfg.wall.unwrap_or(1), &plan, &barrier(cfg), &disorder, &opts)?
        }
        Protocol::Trivial => {
            let t_tr = transfer_time(cfg, &spec, protocol)?;
            run_trivial_transfer(&spec, cfg.mu0(), t_tr, &disorder, &opts)?
        }
        Protocol::Superposition => {
            let plan = superposition_plan(cfg, &spec)?;
            run_superposition_transfer(&spec, &plan, &disorder, &opts)?
        }
        Protocol::Prepare => {
            let leg = parse_leg(cfg.leg.as_deref())?;
            run_state_preparation(&spec, cfg.site.unwrap_or(1), leg, cfg.ramp_time.unwrap_or(60.0), &opts)?
        }
    };
    Ok(trajectory_report(&result))
}

#[allow(clippy::too_many_arguments)]
/// One disordered realization of the configured protocol at the pristine
/// transfer time `t_tr`.
fn realization(
    cfg: &RunConfig,
    spec: &LatticeSpec,
    protocol: Protocol,
    peaks: &[f64],
    t_tr: f64,
    level: f64,
    seed: u64,
    stream: u64,
) -> topotransfer::Result<Sample> {
    let kind = cfg.disorder_kind();
    let (dj, dmu) = match kind {
        DisorderKind::General => (level, level),
        _ => (level, 0.0),
    };
    let disorder = sample_disorder_stream(spec, kind, dj, dmu, seed, stream)?;
    let amp = match protocol {
        Protocol::Lr => lr_scan(spec, peaks, cfg.t_prep(), &disorder, cfg.dt())?.amplitude(t_tr),
        Protocol::Ls => {
            let b = barrier(cfg);
            ls_scan(
                spec,
                cfg.wall.unwrap_or(1),
                peaks,
                cfg.t_prep(),
                &b,
                &disorder,
                cfg.dt(),
            )?
            .amplitude(t_tr + 2.0 * b.t_prep)
        }
        _ => {
            let r = run_trivial_transfer(
                spec,
                cfg.mu0(),
                t_tr,
                &disorder,
                &RunOptions {
                    dt: cfg.dt(),
                    record_every: 0,
                },
            )?;
            return Ok(Sample {
                fidelity: r.fidelity,
                phase: r.acquired_phase,
            });
        }
    };
    let f = amp.norm_sqr().min(1.0);
    Ok(Sample {
        fidelity: f,
        phase: (f > 0.5).then(|| amp.arg()),
    })
}

pub fn sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.lattice()?;
    let protocol = default_protocol(cfg);
    if !matches!(protocol, Protocol::Lr | Protocol::Ls | Protocol::Trivial) {
        return Err(CliError::Config(
            "sweeps support the lr, ls and trivial protocols".into(),
        ));
    }
    if cfg.disorder_kind() == DisorderKind::None {
        return Err(CliError::Config("a sweep needs a disorder kind".into()));
    }
    let t_tr = transfer_time(cfg, &spec, protocol)?;
    let peaks = if spec.kind.is_trivial() {
        Vec::new()
    } else {
        cfg.peaks(spec.domains)?
    };
    let levels = cfg.levels()?;
    let m = cfg.m.unwrap_or(200);
    let report = disorder_sweep(
        |level, seed, stream| realization(cfg, &spec, protocol, &peaks, t_tr, level, seed, stream),
        &levels,
        m,
        cfg.seed(),
    )?;
    let mut r = Report::new(&["level", "mean_fidelity", "std_fidelity", "phase_circ_std", "M"]);
    for i in 0..report.levels.len() {
        r.push(vec![
            Cell::Num(report.levels[i]),
            Cell::Num(report.mean_fidelity[i]),
            Cell::Num(report.std_fidelity[i]),
            Cell::Num(report.phase_circ_std[i]),
            Cell::from(report.m),
        ]);
    }
    r.note("t_tr", t_tr);
    r.note("M", m);
    r.note("seed", Cell::Int(cfg.seed() as i64));
    Ok(r)
}

/// Controls of a fixed-ℓ lattice: uniform for N ≤ 2, optimized beyond.
fn series_time(cfg: &RunConfig, spec: &LatticeSpec) -> topotransfer::Result<TimeScanResult> {
    let c1 = cfg
        .eps_tr
        .unwrap_or(if spec.kind == ModelKind::Ssh { 0.5 } else { 1.0 });
    if spec.domains <= 2 {
        return optimal_lr_time(spec, &vec![c1; spec.domains], cfg.t_prep(), cfg.f0(), cfg.t_max());
    }
    let mut opts = OptimizeOptions::new(cfg.t_prep());
    opts.f0 = cfg.f0();
    opts.tie_inner = cfg.tie.unwrap_or(false);
    let best = optimize_controls(spec, c1, &opts)?;
    Ok(TimeScanResult {
        t_tr: best.plan.t_tr,
        fidelity: best.lattice_peak,
        evaluations: 0,
    })
}

pub fn scan_length(cfg: &RunConfig) -> Result<Report, CliError> {
    let kind = cfg.model_kind();
    let series = cfg.series.unwrap_or(Series::FixedEll);
    let (series, lo, hi) = match series {
        Series::Single => (
            LengthSeries::SingleDomain,
            cfg.n_min.unwrap_or(2),
            cfg.n_max.unwrap_or(8),
        ),
        Series::Two => (LengthSeries::TwoDomain, cfg.n_min.unwrap_or(2), cfg.n_max.unwrap_or(6)),
        Series::FixedEll => (
            LengthSeries::FixedEll {
                ell: cfg.ell.unwrap_or(4),
            },
            cfg.n_min.unwrap_or(1),
            cfg.n_max.unwrap_or(6),
        ),
    };
    if lo > hi {
        return Err(CliError::Config("n_min exceeds n_max".into()));
    }
    let range: Vec<usize> = (lo..=hi).collect();
    let scan: LengthScan = length_scan(series, kind, &range, |s| series_time(cfg, s))?;
    let mut r = Report::new(&["L", "t_tr", "t_fit"]);
    for (&l, &t) in scan.lengths.iter().zip(&scan.times) {
        let fit = scan.fit.map_or(f64::NAN, |f| f.intercept + f.slope * l as f64);
        r.push(vec![Cell::from(l), Cell::Num(t), Cell::Num(fit)]);
    }
    if let Some(f) = scan.fit {
        r.note("t0", f.intercept);
        r.note("A0", f.slope);
    }
    Ok(r)
}

pub fn optimize(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.lattice()?;
    let c1 = cfg.c1.or(cfg.eps_tr).unwrap_or(if cfg.is_ssh() { 0.5 } else { 1.0 });
    let mut opts = OptimizeOptions::new(cfg.t_prep());
    opts.f0 = cfg.f0();
    opts.tie_inner = cfg.tie.unwrap_or(false);
    opts.dt = cfg.dt();
    let best = optimize_controls(&spec, c1, &opts)?;
    let mut r = Report::new(&["domain", "control"]);
    for (d, &c) in best.plan.peaks.iter().enumerate() {
        r.push(vec![Cell::from(d + 1), Cell::Num(c)]);
    }
    r.note("t_tr", best.plan.t_tr);
    r.note("lattice_peak", best.lattice_peak);
    r.note("effective_peak", best.effective_peak);
    Ok(r)
}

pub fn states(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.lattice()?;
    let id = parse_state(cfg.state.as_deref().unwrap_or("L"))?;
    let peaks = match (&cfg.controls, cfg.eps_tr) {
        (None, None) => vec![0.0; spec.domains],
        _ => cfg.peaks(spec.domains)?,
    };
    let psi = if peaks.iter().all(|&c| c == 0.0) {
        compact_state(&spec, id)?
    } else {
        hybridized_state(&spec, id, &ControlVector::transfer(&peaks))?
    };
    let mut r = Report::new(&["site", "j", "leg", "re", "im"]);
    for (i, a) in psi.iter().enumerate() {
        let (j, leg) = if spec.kind.is_ladder() {
            (i / 2 + 1, if i % 2 == 0 { "A" } else { "B" })
        } else {
            (i + 1, "-")
        };
        r.push(vec![
            Cell::from(i),
            Cell::from(j),
            Cell::from(leg),
            Cell::Num(a.re),
            Cell::Num(a.im),
        ]);
    }
    r.note("state", Cell::Text(id.label()));
    Ok(r)
}

pub fn spectrum(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.lattice()?;
    let controls = match (&cfg.controls, cfg.eps_tr) {
        (Some(_), _) => ControlVector::transfer(&cfg.peaks(spec.domains)?),
        (None, Some(e)) => ControlVector::uniform(spec.domains, e),
        (None, None) => ControlVector::zeros(spec.domains),
    };
    let h = assemble_hamiltonian(&spec, &controls, &DisorderRealization::none())?;
    let s = hermitian_eigen(&h.matrix)?;
    let mut r = Report::new(&["index", "energy"]);
    for (i, &e) in s.values.iter().enumerate() {
        r.push(vec![Cell::from(i), Cell::Num(e)]);
    }
    r.note("zero_modes", count_zero_modes(&h, ZERO_TOL)?);
    Ok(r)
}
