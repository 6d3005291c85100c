//! Closed-form boundary and wall states.
//!
//! Every state is built from "arms": geometric profiles that start at an
//! anchor rung (amplitude 1) and decay into one domain with ratio `1/b` per
//! rung, carrying a fixed two-leg spinor. The final vector is rescaled so the
//! anchor amplitude on leg A is real and positive, which reproduces the
//! compact-state gauge in the limit of vanishing control.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{ControlVector, HamiltonianMatrix, LatticeSpec, ModelKind};
use crate::linalg::{hermitian_eigen, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryStateId {
    Left,
    Right,
    /// Wall state at wall `k` (two-sided for SSH chains).
    S(usize),
    /// Wall state `k` hybridized into the domain on its left.
    SLeft(usize),
    /// Wall state `k` hybridized into the domain on its right.
    SRight(usize),
    /// Four-site wall state at wall `k` (ladders only).
    P(usize),
}

impl BoundaryStateId {
    pub fn wall(self, spec: &LatticeSpec) -> usize {
        match self {
            BoundaryStateId::Left => 0,
            BoundaryStateId::Right => spec.domains,
            BoundaryStateId::S(k) | BoundaryStateId::SLeft(k) | BoundaryStateId::SRight(k) | BoundaryStateId::P(k) => k,
        }
    }

    pub fn label(self) -> String {
        match self {
            BoundaryStateId::Left => "L".into(),
            BoundaryStateId::Right => "R".into(),
            BoundaryStateId::S(k) => format!("S{k}"),
            BoundaryStateId::SLeft(k) => format!("S{k}l"),
            BoundaryStateId::SRight(k) => format!("S{k}r"),
            BoundaryStateId::P(k) => format!("P{k}"),
        }
    }

    fn check(self, spec: &LatticeSpec) -> Result<()> {
        if !(spec.kind.is_creutz() || spec.kind == ModelKind::Ssh) {
            return Err(Error::Capability(format!(
                "{:?} has no protected boundary states",
                spec.kind
            )));
        }
        match self {
            BoundaryStateId::Left | BoundaryStateId::Right => Ok(()),
            BoundaryStateId::P(_) if spec.kind == ModelKind::Ssh => {
                Err(Error::Capability("SSH chains have no four-site wall states".into()))
            }
            BoundaryStateId::S(k) | BoundaryStateId::SLeft(k) | BoundaryStateId::SRight(k) | BoundaryStateId::P(k) => {
                if k == 0 || k >= spec.domains {
                    Err(Error::IndexOutOfRange {
                        what: "wall",
                        index: k,
                        max: spec.domains.saturating_sub(1),
                    })
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Normalization constants of the closed-form states.
///
/// For ladders `left`, `right` and `walls[k-1]` are `N_L`, `N_R` and
/// `N_P(k)`; for SSH chains they are `N'_L`, `N'_R` and `N'_S(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSet {
    pub left: f64,
    pub right: f64,
    pub walls: Vec<f64>,
}

/// `(4J²/ε² - 1)` for ladders, `(w²/v² - 1)` for chains.
fn decay_excess(spec: &LatticeSpec, control: f64) -> f64 {
    if spec.kind == ModelKind::Ssh {
        (spec.strong_bond / control).powi(2) - 1.0
    } else {
        (2.0 * spec.hopping / control).powi(2) - 1.0
    }
}

fn check_controls(spec: &LatticeSpec, controls: &ControlVector) -> Result<()> {
    if controls.per_domain.len() != spec.domains {
        return invalid("control vector does not match the lattice");
    }
    let limit = if spec.kind == ModelKind::Ssh {
        spec.strong_bond
    } else {
        2.0 * spec.hopping
    };
    for &c in &controls.per_domain {
        if !(0.0..limit).contains(&c) {
            return invalid(format!("control {c} outside the topological range [0, {limit})"));
        }
    }
    Ok(())
}

pub fn normalization_constants(spec: &LatticeSpec, controls: &ControlVector) -> Result<NormalizationSet> {
    check_controls(spec, controls)?;
    let c = &controls.per_domain;
    let n = spec.domains;
    let x = |v: f64| decay_excess(spec, v);
    let (left, right, walls) = if spec.kind == ModelKind::Ssh {
        let end = |v: f64| x(v).sqrt();
        let wall = |vl: f64, vr: f64| {
            let tail = |v: f64| 1.0 / x(v);
            (1.0 + tail(vl) + tail(vr)).powf(-0.5)
        };
        (end(c[0]), end(c[n - 1]), (1..n).map(|k| wall(c[k - 1], c[k])).collect())
    } else {
        let end = |e: f64| (x(e) / 2.0).sqrt();
        let wall = |el: f64, er: f64| (1.0 / x(el) + 1.0 / x(er)).powf(-0.5) / 2f64.sqrt();
        (end(c[0]), end(c[n - 1]), (1..n).map(|k| wall(c[k - 1], c[k])).collect())
    };
    Ok(NormalizationSet { left, right, walls })
}

/// One decaying profile.
struct Arm {
    anchor: usize,
    forward: bool,
    len: usize,
    /// Per-rung ratio `1/b`.
    ratio: C64,
    spinor: C64,
    coef: f64,
    /// Leave the anchor to another arm.
    skip_anchor: bool,
}

fn chirality_spinor(spec: &LatticeSpec, id: BoundaryStateId) -> C64 {
    let w = id.wall(spec);
    match id {
        BoundaryStateId::Left => C64::new(0.0, -1.0),
        _ => C64::new(0.0, if w % 2 == 1 { 1.0 } else { -1.0 }),
    }
}

/// Ratio `1/b` of a ladder arm attached to wall `w` in a domain with control `c`.
fn ladder_ratio(spec: &LatticeSpec, wall: usize, c: f64) -> C64 {
    let jj = spec.hopping;
    match spec.kind {
        ModelKind::CreutzRunged => C64::new(-c / (2.0 * jj), 0.0),
        _ => {
            let sign = if wall % 2 == 1 { 1.0 } else { -1.0 };
            C64::new(c, 0.0) / C64::new(0.0, sign * 2.0 * jj)
        }
    }
}

fn arms(spec: &LatticeSpec, id: BoundaryStateId, c: &[f64]) -> Vec<Arm> {
    let ell = spec.ell;
    let n = spec.domains;
    let l = spec.length();
    let w = id.wall(spec);
    if spec.kind == ModelKind::Ssh {
        let ratio = |v: f64| C64::new(-v / spec.strong_bond, 0.0);
        let len = ell / 2 + 1;
        let site = spec.wall_rung(w);
        let arm = |forward, v| Arm {
            anchor: site,
            forward,
            len,
            ratio: ratio(v),
            spinor: C64::new(0.0, 0.0),
            coef: 1.0,
            skip_anchor: false,
        };
        return match id {
            BoundaryStateId::Left => vec![arm(true, c[0])],
            BoundaryStateId::Right => vec![arm(false, c[n - 1])],
            BoundaryStateId::SLeft(k) => vec![arm(false, c[k - 1])],
            BoundaryStateId::SRight(k) => vec![arm(true, c[k])],
            BoundaryStateId::S(k) | BoundaryStateId::P(k) => {
                let mut right = arm(true, c[k]);
                right.skip_anchor = true;
                vec![arm(false, c[k - 1]), right]
            }
        };
    }
    let spinor = chirality_spinor(spec, id);
    let arm = |anchor, forward, len, domain_control: f64, coef| Arm {
        anchor,
        forward,
        len,
        ratio: ladder_ratio(spec, w, domain_control),
        spinor,
        coef,
        skip_anchor: false,
    };
    match id {
        BoundaryStateId::Left => vec![arm(1, true, ell + 1, c[0], 1.0)],
        BoundaryStateId::Right => vec![arm(l, false, ell + 1, c[n - 1], 1.0)],
        BoundaryStateId::S(k) => vec![arm(spec.wall_rung(k), true, 1, 0.0, 1.0)],
        BoundaryStateId::SLeft(k) => vec![arm(spec.wall_rung(k), false, ell + 1, c[k - 1], 1.0)],
        BoundaryStateId::SRight(k) => vec![arm(spec.wall_rung(k), true, ell + 1, c[k], 1.0)],
        BoundaryStateId::P(k) => {
            let jk = spec.wall_rung(k);
            vec![
                arm(jk - 1, false, ell, c[k - 1], 1.0),
                arm(jk + 1, true, ell, c[k], -1.0),
            ]
        }
    }
}

fn paint(spec: &LatticeSpec, arms: &[Arm], scale_first: bool) -> DVector<C64> {
    let ladder = spec.kind.is_ladder();
    let mut v = DVector::from_element(spec.site_count(), C64::new(0.0, 0.0));
    for arm in arms {
        let mut amp = C64::new(arm.coef, 0.0);
        if scale_first {
            amp *= arm.ratio;
        }
        let stride = if ladder { 1 } else { 2 };
        for n in 0..arm.len {
            if n == 0 && arm.skip_anchor {
                amp *= arm.ratio;
                continue;
            }
            let offset = n * stride;
            let j = if arm.forward {
                arm.anchor + offset
            } else {
                arm.anchor - offset
            };
            if ladder {
                v[2 * (j - 1)] += amp;
                v[2 * (j - 1) + 1] += amp * arm.spinor;
            } else {
                v[j - 1] += amp;
            }
            amp *= arm.ratio;
        }
    }
    v
}

/// Multiplies `v` by the unit phase making its anchor amplitude real positive.
fn fix_gauge(spec: &LatticeSpec, id: BoundaryStateId, v: &mut DVector<C64>) {
    let anchor = match id {
        BoundaryStateId::Left => 1,
        BoundaryStateId::Right => spec.length(),
        BoundaryStateId::P(k) if spec.kind.is_ladder() => spec.wall_rung(k) - 1,
        other => spec.wall_rung(other.wall(spec)),
    };
    let idx = if spec.kind.is_ladder() {
        2 * (anchor - 1)
    } else {
        anchor - 1
    };
    let a = v[idx];
    if a.norm() > 0.0 {
        let phase = a.conj() / a.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Compact (zero-control) state.
pub fn compact_state(spec: &LatticeSpec, id: BoundaryStateId) -> Result<DVector<C64>> {
    hybridized_state(spec, id, &ControlVector::zeros(spec.domains))
}

/// Normalized hybridized state for the given per-domain controls.
pub fn hybridized_state(spec: &LatticeSpec, id: BoundaryStateId, controls: &ControlVector) -> Result<DVector<C64>> {
    id.check(spec)?;
    check_controls(spec, controls)?;
    let mut v = paint(spec, &arms(spec, id, &controls.per_domain), false);
    v /= C64::new(v.norm(), 0.0);
    fix_gauge(spec, id, &mut v);
    Ok(v)
}

/// Hybridized state with the closed-form normalization constant instead of
/// exact renormalization. Its norm differs from 1 by the truncation of the
/// geometric profile.
pub fn closed_form_state(spec: &LatticeSpec, id: BoundaryStateId, controls: &ControlVector) -> Result<DVector<C64>> {
    id.check(spec)?;
    let norms = normalization_constants(spec, controls)?;
    let c = &controls.per_domain;
    if c.contains(&0.0) {
        return compact_state(spec, id);
    }
    let n = match id {
        BoundaryStateId::Left => norms.left,
        BoundaryStateId::Right => norms.right,
        BoundaryStateId::P(k) | BoundaryStateId::S(k) => norms.walls[k - 1],
        BoundaryStateId::SLeft(k) | BoundaryStateId::SRight(k) => {
            let side = if matches!(id, BoundaryStateId::SLeft(_)) {
                c[k - 1]
            } else {
                c[k]
            };
            let single = ControlVector::uniform(1, side);
            let one = LatticeSpec {
                domains: 1,
                ..spec.clone()
            };
            normalization_constants(&one, &single)?.left
        }
    };
    let scale_first = spec.kind.is_ladder() || !matches!(id, BoundaryStateId::S(_));
    let mut v = paint(spec, &arms(spec, id, c), scale_first);
    v *= C64::new(n, 0.0);
    fix_gauge(spec, id, &mut v);
    Ok(v)
}

/// Norm of the part of `analytic` lying outside the span of the `count`
/// eigenstates of `h` closest to zero energy.
pub fn state_deviation(analytic: &DVector<C64>, h: &HamiltonianMatrix, count: usize) -> Result<f64> {
    if count == 0 {
        return Err(Error::EmptySubspace);
    }
    let spectrum = hermitian_eigen(&h.matrix)?;
    let mut projected = DVector::from_element(analytic.len(), C64::new(0.0, 0.0));
    for idx in spectrum.closest_to_zero(count) {
        let col = spectrum.vectors.column(idx);
        let overlap = col.dotc(analytic);
        projected += col * overlap;
    }
    Ok((analytic - projected).norm())
}

/// `‖H ψ‖`.
pub fn zero_energy_residual(h: &HamiltonianMatrix, psi: &DVector<C64>) -> f64 {
    h.apply(psi).norm()
}

/// All computational and P-type states of a lattice in chain order
/// (`L, P_1 .. P_{N-1}, R` for ladders, `L, S_1 .. S_{N-1}, R` for chains).
pub fn chain_states(spec: &LatticeSpec) -> Vec<BoundaryStateId> {
    let mut ids = vec![BoundaryStateId::Left];
    for k in 1..spec.domains {
        ids.push(if spec.kind == ModelKind::Ssh {
            BoundaryStateId::S(k)
        } else {
            BoundaryStateId::P(k)
        });
    }
    ids.push(BoundaryStateId::Right);
    ids
}
