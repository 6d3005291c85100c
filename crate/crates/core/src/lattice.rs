//! Lattice geometry, control layout, disorder and Hamiltonian assembly.
//!
//! Ladder sites are flattened as `2(j-1) + leg` with leg A = 0 and B = 1;
//! chains use `j - 1`. Rungs (or chain sites) are numbered from 1.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigen, C64};
use crate::rng::{centered_uniforms, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    CreutzImbalanced,
    CreutzRunged,
    Ssh,
    TrivialChain,
    TrivialLadder,
}

impl ModelKind {
    pub fn is_ladder(self) -> bool {
        matches!(
            self,
            ModelKind::CreutzImbalanced | ModelKind::CreutzRunged | ModelKind::TrivialLadder
        )
    }

    pub fn is_creutz(self) -> bool {
        matches!(self, ModelKind::CreutzImbalanced | ModelKind::CreutzRunged)
    }

    pub fn is_trivial(self) -> bool {
        matches!(self, ModelKind::TrivialChain | ModelKind::TrivialLadder)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    A,
    B,
}

impl Leg {
    pub fn sign(self) -> f64 {
        match self {
            Leg::A => 1.0,
            Leg::B => -1.0,
        }
    }

    pub fn offset(self) -> usize {
        match self {
            Leg::A => 0,
            Leg::B => 1,
        }
    }

    pub fn other(self) -> Leg {
        match self {
            Leg::A => Leg::B,
            Leg::B => Leg::A,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteIndex {
    pub j: usize,
    pub leg: Leg,
    pub flat: usize,
}

/// Description of one model instance.
///
/// Multidomain kinds have `domains` domains of `ell` inner rungs each, for a
/// total of `domains * (ell + 1) + 1` rungs. Trivial kinds are stored as a
/// single domain with `ell = L - 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: ModelKind,
    pub domains: usize,
    pub ell: usize,
    /// Horizontal/diagonal hopping of ladders and bond of the trivial chain.
    pub hopping: f64,
    /// Strong SSH bond.
    pub strong_bond: f64,
    /// Magnitude of the plaquette flux.
    pub flux: f64,
}

impl LatticeSpec {
    pub fn new(kind: ModelKind, domains: usize, ell: usize) -> Result<Self> {
        let spec = LatticeSpec {
            kind,
            domains,
            ell,
            hopping: 1.0,
            strong_bond: 1.0,
            flux: if kind == ModelKind::TrivialLadder { 0.0 } else { PI },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn creutz(domains: usize, ell: usize) -> Result<Self> {
        Self::new(ModelKind::CreutzImbalanced, domains, ell)
    }

    pub fn runged(domains: usize, ell: usize) -> Result<Self> {
        Self::new(ModelKind::CreutzRunged, domains, ell)
    }

    pub fn ssh(domains: usize, ell: usize) -> Result<Self> {
        Self::new(ModelKind::Ssh, domains, ell)
    }

    pub fn trivial_chain(length: usize) -> Result<Self> {
        if length < 4 {
            return invalid("trivial chain needs at least 4 sites");
        }
        Self::new(ModelKind::TrivialChain, 1, length - 2)
    }

    pub fn trivial_ladder(length: usize) -> Result<Self> {
        if length < 4 {
            return invalid("trivial ladder needs at least 4 rungs");
        }
        Self::new(ModelKind::TrivialLadder, 1, length - 2)
    }

    pub fn with_hopping(mut self, hopping: f64) -> Result<Self> {
        self.hopping = hopping;
        self.validate()?;
        Ok(self)
    }

    pub fn with_strong_bond(mut self, w: f64) -> Result<Self> {
        self.strong_bond = w;
        self.validate()?;
        Ok(self)
    }

    pub fn with_flux(mut self, flux: f64) -> Result<Self> {
        self.flux = flux;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains == 0 {
            return invalid("domain count must be positive");
        }
        if self.ell < 2 {
            return invalid(format!("ell = {} must be at least 2", self.ell));
        }
        if self.kind == ModelKind::Ssh && !self.ell.is_multiple_of(2) {
            return invalid(format!("SSH chains need even ell, got {}", self.ell));
        }
        if !(self.hopping.is_finite() && self.hopping > 0.0) {
            return invalid("hopping must be positive");
        }
        if !(self.strong_bond.is_finite() && self.strong_bond > 0.0) {
            return invalid("strong bond must be positive");
        }
        if !self.flux.is_finite() {
            return invalid("flux must be finite");
        }
        if self.kind.is_trivial() && self.domains != 1 {
            return invalid("trivial kinds have a single domain");
        }
        Ok(())
    }

    /// Number of rungs (ladders) or sites (chains).
    pub fn length(&self) -> usize {
        self.domains * (self.ell + 1) + 1
    }

    pub fn site_count(&self) -> usize {
        if self.kind.is_ladder() {
            2 * self.length()
        } else {
            self.length()
        }
    }

    /// Rung of wall `k` (0 and `N` are the two ends).
    pub fn wall_rung(&self, k: usize) -> usize {
        k * (self.ell + 1) + 1
    }

    /// Number of protected boundary states in the topological phase.
    pub fn protected_count(&self) -> usize {
        match self.kind {
            ModelKind::CreutzImbalanced | ModelKind::CreutzRunged => 2 * self.domains,
            ModelKind::Ssh => self.domains + 1,
            _ => 0,
        }
    }

    pub fn site(&self, j: usize, leg: Leg) -> Result<SiteIndex> {
        let l = self.length();
        if j == 0 || j > l {
            return Err(Error::IndexOutOfRange {
                what: "rung",
                index: j,
                max: l,
            });
        }
        let flat = if self.kind.is_ladder() {
            2 * (j - 1) + leg.offset()
        } else {
            if leg == Leg::B {
                return Err(Error::Capability("chains have one site per cell index".into()));
            }
            j - 1
        };
        Ok(SiteIndex { j, leg, flat })
    }
}

/// Layout information of one rung.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RungInfo {
    /// Domain label `ceil((j-1)/(ell+1))`; walls carry the label of the domain to their left.
    pub domain: usize,
    /// Wall index when the rung is a domain wall (0 and N for the ends).
    pub wall: Option<usize>,
    /// Flux through the plaquette between rungs `j` and `j+1`; `None` for the last rung.
    pub plaquette_flux: Option<f64>,
}

pub fn domain_scheme(spec: &LatticeSpec, j: usize) -> Result<RungInfo> {
    let l = spec.length();
    if j == 0 || j > l {
        return Err(Error::IndexOutOfRange {
            what: "rung",
            index: j,
            max: l,
        });
    }
    let period = spec.ell + 1;
    let domain = (j - 1).div_ceil(period);
    let wall = (j % period == 1 % period).then_some((j - 1) / period);
    let plaquette_flux = (j < l).then(|| plaquette_flux(spec, j));
    Ok(RungInfo {
        domain,
        wall,
        plaquette_flux,
    })
}

/// Flux of plaquette `j`: positive in odd domains, negative in even ones.
fn plaquette_flux(spec: &LatticeSpec, j: usize) -> f64 {
    if spec.kind == ModelKind::TrivialLadder {
        return 0.0;
    }
    let domain = j.div_ceil(spec.ell + 1);
    if domain % 2 == 1 {
        spec.flux
    } else {
        -spec.flux
    }
}

/// Control values per domain plus one value per wall (ends included).
///
/// For imbalanced ladders the values are the imbalances `ε`, for runged
/// ladders the vertical hoppings `m`, for SSH chains the weak bonds `v`
/// (wall values unused). For trivial kinds the two wall values are the
/// chemical potentials of the end sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub per_domain: Vec<f64>,
    pub walls: Vec<f64>,
}

impl ControlVector {
    pub fn zeros(domains: usize) -> Self {
        ControlVector {
            per_domain: vec![0.0; domains],
            walls: vec![0.0; domains + 1],
        }
    }

    /// Standard transfer layout: bulk rungs follow their domain, the two
    /// end rungs follow the outermost domains, inner walls stay balanced.
    pub fn transfer(per_domain: &[f64]) -> Self {
        let n = per_domain.len();
        let mut walls = vec![0.0; n + 1];
        if n > 0 {
            walls[0] = per_domain[0];
            walls[n] = per_domain[n - 1];
        }
        ControlVector {
            per_domain: per_domain.to_vec(),
            walls,
        }
    }

    /// Same value on every rung, walls included.
    pub fn uniform(domains: usize, value: f64) -> Self {
        ControlVector {
            per_domain: vec![value; domains],
            walls: vec![value; domains + 1],
        }
    }

    pub fn with_wall(mut self, wall: usize, value: f64) -> Self {
        self.walls[wall] = value;
        self
    }

    pub fn domains(&self) -> usize {
        self.per_domain.len()
    }

    fn check(&self, spec: &LatticeSpec) -> Result<()> {
        if self.per_domain.len() != spec.domains || self.walls.len() != spec.domains + 1 {
            return invalid(format!(
                "control vector sized for {} domains, lattice has {}",
                self.per_domain.len(),
                spec.domains
            ));
        }
        if self.per_domain.iter().chain(&self.walls).any(|x| !x.is_finite()) {
            return invalid("control values must be finite");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisorderKind {
    None,
    /// One draw per longitudinal step shared by every bond of that step.
    SymmetryPreserving,
    /// Independent draws for every bond and every site.
    General,
}

/// One quenched disorder realization.
///
/// Bond noise layout: ladders with symmetry-preserving disorder store one
/// draw per step `j -> j+1`; with general disorder four per step, ordered
/// (horizontal A, horizontal B, diagonal from A, diagonal from B). Chains
/// store one draw per bond. Site noise (general disorder only) holds one
/// draw per site. Bond magnitudes become `|a + δJ R|` for pristine
/// magnitude `a`; sites get `δμ R` added.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub kind: DisorderKind,
    pub delta_j: f64,
    pub delta_mu: f64,
    pub bond_noise: Vec<f64>,
    pub site_noise: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl DisorderRealization {
    pub fn none() -> Self {
        DisorderRealization {
            kind: DisorderKind::None,
            delta_j: 0.0,
            delta_mu: 0.0,
            bond_noise: Vec::new(),
            site_noise: Vec::new(),
            seed: 0,
            stream: 0,
        }
    }

    pub fn is_pristine(&self) -> bool {
        self.kind == DisorderKind::None
    }

    fn check(&self, spec: &LatticeSpec) -> Result<()> {
        if self.kind == DisorderKind::None {
            return Ok(());
        }
        let (bonds, sites) = noise_sizes(spec, self.kind);
        if self.bond_noise.len() != bonds || self.site_noise.len() != sites {
            return invalid("disorder realization does not match the lattice");
        }
        Ok(())
    }

    /// Draw for bond slot `slot` of step `step` (0-based).
    fn bond(&self, step: usize, slot: usize, ladder: bool) -> f64 {
        match self.kind {
            DisorderKind::None => 0.0,
            DisorderKind::SymmetryPreserving => self.delta_j * self.bond_noise[step],
            DisorderKind::General => {
                let idx = if ladder { 4 * step + slot } else { step };
                self.delta_j * self.bond_noise[idx]
            }
        }
    }

    fn site(&self, flat: usize) -> f64 {
        match self.kind {
            DisorderKind::General => self.delta_mu * self.site_noise[flat],
            _ => 0.0,
        }
    }
}

fn noise_sizes(spec: &LatticeSpec, kind: DisorderKind) -> (usize, usize) {
    let steps = spec.length() - 1;
    match kind {
        DisorderKind::None => (0, 0),
        DisorderKind::SymmetryPreserving => (steps, 0),
        DisorderKind::General => {
            let per_step = if spec.kind.is_ladder() { 4 } else { 1 };
            (per_step * steps, spec.site_count())
        }
    }
}

/// Draws a realization from stream 0 of `seed`.
pub fn sample_disorder(
    spec: &LatticeSpec,
    kind: DisorderKind,
    delta_j: f64,
    delta_mu: f64,
    seed: u64,
) -> Result<DisorderRealization> {
    sample_disorder_stream(spec, kind, delta_j, delta_mu, seed, 0)
}

/// Draws a realization from stream `stream` of the family seeded by `seed`.
pub fn sample_disorder_stream(
    spec: &LatticeSpec,
    kind: DisorderKind,
    delta_j: f64,
    delta_mu: f64,
    seed: u64,
    stream: u64,
) -> Result<DisorderRealization> {
    if !(delta_j >= 0.0 && delta_mu >= 0.0) {
        return invalid("disorder strengths must be non-negative");
    }
    let mut rng = stream_rng(seed, stream);
    Ok(draw(spec, kind, delta_j, delta_mu, seed, stream, &mut rng))
}

fn draw<R: Rng>(
    spec: &LatticeSpec,
    kind: DisorderKind,
    delta_j: f64,
    delta_mu: f64,
    seed: u64,
    stream: u64,
    rng: &mut R,
) -> DisorderRealization {
    let (bonds, sites) = noise_sizes(spec, kind);
    let bond_noise = centered_uniforms(rng, bonds);
    let site_noise = centered_uniforms(rng, sites);
    DisorderRealization {
        kind,
        delta_j,
        delta_mu,
        bond_noise,
        site_noise,
        seed,
        stream,
    }
}

/// Dense Hamiltonian together with the lattice it was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    pub matrix: DMatrix<C64>,
    pub spec: LatticeSpec,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, psi: &DVector<C64>) -> DVector<C64> {
        &self.matrix * psi
    }
}

fn hop(m: &mut DMatrix<C64>, to: usize, from: usize, amp: C64) {
    m[(to, from)] += amp;
    m[(from, to)] += amp.conj();
}

/// Control value acting on rung `j` (or chain site `j`).
pub fn rung_control(spec: &LatticeSpec, controls: &ControlVector, j: usize) -> f64 {
    let period = spec.ell + 1;
    if j % period == 1 % period {
        controls.walls[(j - 1) / period]
    } else {
        controls.per_domain[(j - 1).div_ceil(period) - 1]
    }
}

pub fn assemble_hamiltonian(
    spec: &LatticeSpec,
    controls: &ControlVector,
    disorder: &DisorderRealization,
) -> Result<HamiltonianMatrix> {
    spec.validate()?;
    controls.check(spec)?;
    disorder.check(spec)?;
    let mut m = DMatrix::from_element(spec.site_count(), spec.site_count(), C64::new(0.0, 0.0));
    match spec.kind {
        ModelKind::CreutzImbalanced | ModelKind::CreutzRunged | ModelKind::TrivialLadder => {
            fill_ladder(spec, controls, disorder, &mut m)
        }
        ModelKind::Ssh => fill_ssh(spec, controls, disorder, &mut m),
        ModelKind::TrivialChain => fill_chain(spec, controls, disorder, &mut m),
    }
    Ok(HamiltonianMatrix {
        matrix: m,
        spec: spec.clone(),
    })
}

fn fill_ladder(spec: &LatticeSpec, controls: &ControlVector, disorder: &DisorderRealization, m: &mut DMatrix<C64>) {
    let l = spec.length();
    let jj = spec.hopping;
    for j in 1..l {
        let phi = plaquette_flux(spec, j);
        let step = j - 1;
        for leg in [Leg::A, Leg::B] {
            let from = 2 * (j - 1) + leg.offset();
            let same = 2 * j + leg.offset();
            let cross = 2 * j + leg.other().offset();
            let (h_slot, d_slot) = match leg {
                Leg::A => (0, 2),
                Leg::B => (1, 3),
            };
            let h_mag = (jj + disorder.bond(step, h_slot, true)).abs();
            let d_mag = (jj + disorder.bond(step, d_slot, true)).abs();
            hop(m, same, from, -C64::from_polar(h_mag, leg.sign() * phi / 2.0));
            hop(m, cross, from, C64::new(-d_mag, 0.0));
        }
    }
    for j in 1..=l {
        let c = rung_control(spec, controls, j);
        let a = 2 * (j - 1);
        let b = a + 1;
        match spec.kind {
            ModelKind::CreutzRunged => hop(m, b, a, C64::new(-c, 0.0)),
            ModelKind::TrivialLadder => {
                // end-rung wells act on both legs; bulk control unused
                let wall = if j == 1 || j == l { c } else { 0.0 };
                m[(a, a)] += wall;
                m[(b, b)] += wall;
            }
            _ => {
                m[(a, a)] += c;
                m[(b, b)] -= c;
            }
        }
        m[(a, a)] += disorder.site(a);
        m[(b, b)] += disorder.site(b);
    }
}

/// Weak/strong bond pattern: inside domain `k` the bonds alternate
/// `v_k, w, v_k, ...` starting at the domain's left edge.
pub fn ssh_bond(spec: &LatticeSpec, controls: &ControlVector, bond: usize) -> f64 {
    let period = spec.ell + 1;
    let domain = bond / period;
    if (bond % period).is_multiple_of(2) {
        controls.per_domain[domain]
    } else {
        spec.strong_bond
    }
}

fn fill_ssh(spec: &LatticeSpec, controls: &ControlVector, disorder: &DisorderRealization, m: &mut DMatrix<C64>) {
    for bond in 0..spec.length() - 1 {
        let mag = (ssh_bond(spec, controls, bond) + disorder.bond(bond, 0, false)).abs();
        hop(m, bond + 1, bond, C64::new(-mag, 0.0));
    }
    for site in 0..spec.length() {
        m[(site, site)] += disorder.site(site);
    }
}

fn fill_chain(spec: &LatticeSpec, controls: &ControlVector, disorder: &DisorderRealization, m: &mut DMatrix<C64>) {
    let l = spec.length();
    for bond in 0..l - 1 {
        let mag = (spec.hopping + disorder.bond(bond, 0, false)).abs();
        hop(m, bond + 1, bond, C64::new(-mag, 0.0));
    }
    m[(0, 0)] += controls.walls[0];
    m[(l - 1, l - 1)] += controls.walls[1];
    for site in 0..l {
        m[(site, site)] += disorder.site(site);
    }
}

/// Chiral operator: `σ_y` on every rung for Creutz ladders, sublattice
/// parity for SSH chains.
pub fn chiral_operator(spec: &LatticeSpec) -> Result<DMatrix<C64>> {
    let n = spec.site_count();
    let mut x = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    match spec.kind {
        ModelKind::CreutzImbalanced | ModelKind::CreutzRunged => {
            if ((spec.flux.abs() - PI) / PI).abs() > 1e-12 {
                return Err(Error::Capability(
                    "chiral symmetry of the ladder requires flux ±π".into(),
                ));
            }
            for j in 0..spec.length() {
                x[(2 * j, 2 * j + 1)] = C64::new(0.0, -1.0);
                x[(2 * j + 1, 2 * j)] = C64::new(0.0, 1.0);
            }
        }
        ModelKind::Ssh => {
            for s in 0..n {
                x[(s, s)] = C64::new(if s % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
            }
        }
        other => return Err(Error::Capability(format!("{other:?} has no chiral symmetry"))),
    }
    Ok(x)
}

/// Frobenius norm of `XH + HX`.
pub fn chiral_anticommutator_norm(spec: &LatticeSpec, h: &HamiltonianMatrix) -> Result<f64> {
    let x = chiral_operator(spec)?;
    Ok((&x * &h.matrix + &h.matrix * &x).norm())
}

/// Number of k-points used for the winding integral.
pub const WINDING_GRID: usize = 2048;

/// Winding number of a uniform domain with control value `control` and
/// plaquette flux `flux` (±π for ladders; ignored for SSH).
pub fn winding_number(kind: ModelKind, control: f64, flux: f64, hopping: f64) -> Result<i32> {
    match kind {
        ModelKind::CreutzImbalanced | ModelKind::CreutzRunged => {
            if ((flux.abs() - PI) / PI).abs() > 1e-12 {
                return Err(Error::Capability("winding number is only defined at flux ±π".into()));
            }
        }
        ModelKind::Ssh => {}
        other => return Err(Error::Capability(format!("{other:?} has no winding number"))),
    }
    let mut total = 0.0;
    let mut prev: Option<C64> = None;
    let mut first: Option<C64> = None;
    let mut min_abs = f64::INFINITY;
    for n in 0..WINDING_GRID {
        let k = 2.0 * PI * n as f64 / WINDING_GRID as f64;
        let q = chiral_block(kind, control, flux, hopping, k);
        min_abs = min_abs.min(q.norm());
        if let Some(p) = prev {
            total += (q / p).arg();
        } else {
            first = Some(q);
        }
        prev = Some(q);
    }
    if let (Some(p), Some(f)) = (prev, first) {
        total += (f / p).arg();
    }
    let scale = hopping.abs().max(control.abs()).max(1e-300);
    if min_abs < 1e-9 * scale {
        return Err(Error::Singular(format!(
            "gap closes for control {control} (hopping {hopping})"
        )));
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

/// Off-diagonal block of the Bloch Hamiltonian in the chiral eigenbasis.
fn chiral_block(kind: ModelKind, control: f64, flux: f64, hopping: f64, k: f64) -> C64 {
    match kind {
        ModelKind::Ssh => {
            // h(k) = -(v + w e^{-ik}) σ^+ + h.c. in sublattice basis
            -(C64::new(control, 0.0) + C64::from_polar(hopping, -k))
        }
        _ => {
            // h(k) = d_z σ_z + d_x σ_x; in the σ_y eigenbasis the
            // off-diagonal block is d_z - i d_x
            let s = flux.signum();
            let dz = control - s * 2.0 * hopping * k.sin();
            let mut dx = -2.0 * hopping * k.cos();
            if kind == ModelKind::CreutzRunged {
                dx -= control;
                return C64::new(-s * 2.0 * hopping * k.sin(), -dx);
            }
            C64::new(dz, -dx)
        }
    }
}

/// Eigenvalues with `|E| < tol`.
pub fn count_zero_modes(h: &HamiltonianMatrix, tol: f64) -> Result<usize> {
    let s = hermitian_eigen(&h.matrix)?;
    Ok(s.values.iter().filter(|e| e.abs() < tol).count())
}
