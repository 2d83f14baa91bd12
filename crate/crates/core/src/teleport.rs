//! CV teleportation with tunable gain, its pure-loss equivalent, time-bin
//! qubit teleportation and the post-selected DV protocol.

use crate::fock::{moments_density, FockDensity, FockSpace, FockState};
use crate::gaussian::{GaussianOp, GaussianState};
use crate::measurement::{bell_dv_coincidence, ExactBeamSplitter, QuadratureGrid, DEFAULT_GRID_POINTS, GRID_SIGMAS};
use crate::metrics::QubitSubspace;
use crate::special::{displacement_rows_into, hermite_functions, ln_factorial, tmsv_coefficients};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Which representation a protocol runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Fock,
    Gaussian,
}

/// Outcome grid choice for the Bell measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    /// `±6σ` of the larger Bell marginal (plus its mean), with this many points
    Auto { points: usize },
    Fixed(QuadratureGrid),
}

/// Parameters of a CV teleporter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleportSpec {
    pub r: f64,
    pub gain: f64,
    pub grid: GridSpec,
    /// Fock levels kept in each EPR mode; `None` picks [`epr_resource_cutoff`]
    pub resource_cutoff: Option<usize>,
}

impl TeleportSpec {
    pub fn new(r: f64, gain: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("squeezing r = {r} must be ≥ 0")));
        }
        if !(gain >= 0.0) || !gain.is_finite() {
            return Err(Error::InvalidParameter(format!("gain g = {gain} must be ≥ 0")));
        }
        Ok(Self { r, gain, grid: GridSpec::Auto { points: DEFAULT_GRID_POINTS }, resource_cutoff: None })
    }

    /// Gain `g = tanh r`, which turns the teleporter into pure loss `tanh² r`.
    pub fn tuned(r: f64) -> Result<Self> {
        Self::new(r, r.tanh())
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_resource_cutoff(mut self, cutoff: usize) -> Self {
        self.resource_cutoff = Some(cutoff);
        self
    }
}

/// Tail weight of the EPR Schmidt series left out by [`epr_resource_cutoff`].
pub const EPR_TAIL: f64 = 1e-10;

/// Largest EPR cutoff picked automatically.
pub const MAX_RESOURCE_CUTOFF: usize = 160;

/// Smallest `K ≥ min` with discarded Schmidt weight `λ^{2K} ≤ 1e−10`.
pub fn epr_resource_cutoff(r: f64, min: usize) -> usize {
    let lambda = r.tanh();
    if lambda <= 0.0 {
        return min.max(1);
    }
    let k = (EPR_TAIL.ln() / (2.0 * lambda.ln())).ceil() as usize;
    k.clamp(min.max(1), MAX_RESOURCE_CUTOFF.max(min))
}

/// EPR pair from a p-squeezed (mode 0) and an x-squeezed (mode 1) vacuum on a
/// 50:50 beam splitter: `Var(x0 − x1) = Var(p0 + p1) = e^{−2r}`.
pub fn make_epr_gaussian(r: f64) -> GaussianState {
    GaussianState::vacuum(2)
        .evolve_all(&[
            GaussianOp::Squeeze { mode: 0, r, phi: std::f64::consts::PI },
            GaussianOp::Squeeze { mode: 1, r, phi: 0.0 },
            GaussianOp::BeamSplit { m1: 0, m2: 1, t: 0.5 },
        ])
        .expect("two-mode ops on a two-mode register")
}

/// The same EPR state on the Fock backend, via its Schmidt form
/// `Σ tanhⁿ r |n, n⟩ / cosh r`, truncated at `cutoff`.
pub fn make_epr_fock(r: f64, cutoff: usize) -> Result<FockState> {
    FockState::two_mode_squeezed_vacuum(cutoff, r)
}

/// Pure-loss channel of transmissivity `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossChannel {
    pub eta: f64,
}

impl LossChannel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("transmissivity {eta} outside [0, 1]")));
        }
        Ok(Self { eta })
    }

    /// `K_k = (1−η)^{k/2} (k!)^{−1/2} η^{n/2} a^k` for `k < cutoff`.
    pub fn kraus(&self, cutoff: usize) -> Vec<DMatrix<C64>> {
        let eta = self.eta;
        (0..cutoff)
            .map(|k| {
                let mut m = DMatrix::from_element(cutoff, cutoff, C64::new(0.0, 0.0));
                for n in k..cutoff {
                    // a^k |n⟩ = √(n!/(n−k)!) |n−k⟩
                    let ln_fall = 0.5 * (ln_factorial(n) - ln_factorial(n - k));
                    // 0^0 = 1 for the η and 1 − η powers
                    let pow = |base: f64, e: usize| if e == 0 { 0.0 } else { 0.5 * e as f64 * base.ln() };
                    let ln_c = pow(1.0 - eta, k) - 0.5 * ln_factorial(k) + pow(eta, n - k) + ln_fall;
                    let v = ln_c.exp();
                    m[(n - k, n)] = C64::new(v, 0.0);
                }
                m
            })
            .collect()
    }

    /// `max |Σ K†K − I|` at the given cutoff.
    pub fn trace_preservation_error(&self, cutoff: usize) -> f64 {
        let mut acc = DMatrix::<C64>::zeros(cutoff, cutoff);
        for k in self.kraus(cutoff) {
            acc += k.adjoint() * &k;
        }
        (acc - DMatrix::identity(cutoff, cutoff)).iter().map(|z| z.norm()).fold(0.0, |a, b| if b.is_nan() || b > a { b } else { a })
    }

    pub fn apply_to_mode(&self, rho: &FockDensity, mode: usize) -> Result<FockDensity> {
        let space = rho.space();
        space.check_mode(mode)?;
        let mut out = DMatrix::<C64>::zeros(space.dim(), space.dim());
        for k in self.kraus(space.cutoff()) {
            out += space.conjugate_local(rho.matrix(), &[mode], &k)?;
        }
        FockDensity::from_matrix(space, out)
    }
}

/// Loss `eta` on every mode of `rho`.
pub fn apply_loss(rho: &FockDensity, eta: f64) -> Result<FockDensity> {
    let ch = LossChannel::new(eta)?;
    (0..rho.space().modes()).try_fold(rho.clone(), |acc, m| ch.apply_to_mode(&acc, m))
}

/// Result of a Fock-backend teleportation.
#[derive(Debug, Clone)]
pub struct TeleportOutput {
    /// output density, not renormalized
    pub state: FockDensity,
    pub grid: QuadratureGrid,
    pub resource_cutoff: usize,
    pub trace: f64,
    pub leakage: f64,
}

/// Closed-form fidelity of unit-gain coherent-state teleportation.
pub fn coherent_unit_gain_fidelity(r: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * r).exp())
}

/// Teleports `mode` of `input` through the CV teleporter.
///
/// The input mode meets EPR mode A on a 50:50 beam splitter; `u = (x_in − x_A)/√2`
/// and `v = (p_in + p_A)/√2` are measured and EPR mode B is displaced by
/// `β = g(u + iv)`, i.e. `x_B → x_B + g√2 u`, `p_B → p_B + g√2 v`. Outcomes are
/// integrated over the grid. The beam splitter acts exactly in an enlarged
/// space holding every photon, and the channel is evaluated only on the support
/// of the teleported mode's reduced state.
pub fn cv_teleport(input: &FockDensity, mode: usize, spec: &TeleportSpec) -> Result<TeleportOutput> {
    let space = input.space();
    space.check_mode(mode)?;
    let n = space.cutoff();
    let (support, reduced) = mode_support(input, mode)?;
    let rank = support.len();
    let k = spec.resource_cutoff.unwrap_or_else(|| epr_resource_cutoff(spec.r, n));
    let grid = resolve_grid(&reduced, spec)?;
    let choi = teleport_choi(&support, n, k, spec.r, spec.gain, &grid)?;
    let state = apply_choi(input, mode, &support, &choi)?;
    debug_assert_eq!(choi.nrows(), n * rank);
    let trace = state.trace();
    let leakage = state.leakage();
    Ok(TeleportOutput { state, grid, resource_cutoff: k, trace, leakage })
}

/// Pure-state convenience wrapper around [`cv_teleport`].
pub fn cv_teleport_state(input: &FockState, mode: usize, spec: &TeleportSpec) -> Result<TeleportOutput> {
    cv_teleport(&input.to_density(), mode, spec)
}

/// Eigenvectors spanning the support of the reduced state of `mode`.
fn mode_support(input: &FockDensity, mode: usize) -> Result<(Vec<DVector<C64>>, FockDensity)> {
    let reduced = input.partial_trace(&[mode])?;
    let h = (reduced.matrix() + reduced.matrix().adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&j| eig.eigenvalues[j] > 1e-13).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues"));
    if idx.is_empty() {
        return Err(Error::Unnormalized(reduced.trace()));
    }
    Ok((idx.iter().map(|&j| eig.eigenvectors.column(j).into_owned()).collect(), reduced))
}

/// Bell-marginal extent for the input mode's moments.
fn bell_reach(reduced: &FockDensity, r: f64) -> Result<f64> {
    let mo = moments_density(reduced)?;
    let epr_var = 0.5 * (2.0 * r).cosh();
    let su = (0.5 * (mo.cov[(0, 0)] + epr_var)).sqrt();
    let sv = (0.5 * (mo.cov[(1, 1)] + epr_var)).sqrt();
    let mu = mo.mean[0].abs() / std::f64::consts::SQRT_2;
    let mv = mo.mean[1].abs() / std::f64::consts::SQRT_2;
    Ok((mu + GRID_SIGMAS * su).max(mv + GRID_SIGMAS * sv))
}

fn resolve_grid(reduced: &FockDensity, spec: &TeleportSpec) -> Result<QuadratureGrid> {
    let reach = bell_reach(reduced, spec.r)?;
    match spec.grid {
        GridSpec::Auto { points } => QuadratureGrid::new(reach, points),
        GridSpec::Fixed(g) => {
            if g.half_width < reach * (1.0 - 1e-12) {
                Err(Error::GridCoverage(format!("half-width {} < required {reach}", g.half_width)))
            } else {
                Ok(g)
            }
        }
    }
}

/// `J[(l,i),(l',j)] = ∫ du dv ⟨l|W_uv|e_i⟩ ⟨l'|W_uv|e_j⟩*` for the conditional
/// teleportation maps `W_uv` restricted to the support vectors `e_i`.
fn teleport_choi(support: &[DVector<C64>], n: usize, k: usize, r: f64, gain: f64, grid: &QuadratureGrid) -> Result<DMatrix<C64>> {
    let rank = support.len();
    let mx = n + k - 1;
    let bs = ExactBeamSplitter::new(0.5, mx - 1)?;
    let coeffs = tmsv_coefficients(k, r);
    let xs = grid.values();
    let w = grid.spacing() * grid.spacing();
    let phi: Vec<Vec<f64>> = xs.iter().map(|&x| hermite_functions(mx, x)).collect();
    // ⟨p = v|m⟩ = (−i)^m φ_m(v)
    let quarter = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)];
    let chi: Vec<Vec<C64>> = phi.iter().map(|row| row.iter().enumerate().map(|(m, &h)| quarter[m % 4] * h).collect()).collect();
    let e: Vec<Vec<C64>> = support.iter().map(|v| v.iter().cloned().collect()).collect();

    let dim = n * rank;
    let mut choi = DMatrix::<C64>::zeros(dim, dim);
    let zero = C64::new(0.0, 0.0);
    // a[(m' k + kk) rank + i]: after projecting output 1 on ⟨x = u|
    let mut a = vec![zero; mx * k * rank];
    let mut c = vec![zero; k * rank];
    let mut batch = DMatrix::<C64>::zeros(dim, xs.len());
    let mut dmat = vec![zero; n * k];
    for (iu, &u) in xs.iter().enumerate() {
        a.iter_mut().for_each(|z| *z = zero);
        let ph = &phi[iu];
        for kk in 0..k {
            let ck = coeffs[kk];
            for nn in 0..n {
                let tot = nn + kk;
                let blk = bs.block(tot);
                for np in 0..=tot {
                    let coef = blk[(np, nn)] * (ph[np] * ck);
                    if coef.re == 0.0 && coef.im == 0.0 {
                        continue;
                    }
                    let base = ((tot - np) * k + kk) * rank;
                    for i in 0..rank {
                        a[base + i] += coef * e[i][nn];
                    }
                }
            }
        }
        for (iv, &v) in xs.iter().enumerate() {
            let ch = &chi[iv];
            c.iter_mut().for_each(|z| *z = zero);
            for mp in 0..mx {
                let f = ch[mp];
                let row = &a[mp * k * rank..(mp + 1) * k * rank];
                for (cz, az) in c.iter_mut().zip(row) {
                    *cz += f * az;
                }
            }
            displacement_rows_into(C64::new(gain * u, gain * v), n, k, &mut dmat);
            let mut col = batch.column_mut(iv);
            for l in 0..n {
                let drow = &dmat[l * k..(l + 1) * k];
                for i in 0..rank {
                    let mut acc = zero;
                    for kk in 0..k {
                        acc += drow[kk] * c[kk * rank + i];
                    }
                    col[l * rank + i] = acc;
                }
            }
        }
        choi.gemm(C64::new(w, 0.0), &batch, &batch.adjoint(), C64::new(1.0, 0.0));
    }
    Ok(choi)
}

/// Applies the channel `J` on the support of `mode` and returns the output on
/// the same register.
fn apply_choi(input: &FockDensity, mode: usize, support: &[DVector<C64>], choi: &DMatrix<C64>) -> Result<FockDensity> {
    let space = input.space();
    let n = space.cutoff();
    let rank = support.len();
    let stride = space.stride(mode);
    let rest = space.dim() / n;
    let full = |ridx: usize, l: usize| (ridx / stride) * n * stride + l * stride + ridx % stride;
    // B_ij[rest, rest'] = ⟨e_i| ρ_{rest,rest'} |e_j⟩
    let m = input.matrix();
    let proj = DMatrix::from_fn(rank, n, |i, l| support[i][l].conj());
    let mut b = vec![DMatrix::<C64>::zeros(rank, rank); rest * rest];
    let mut block = DMatrix::<C64>::zeros(n, n);
    for r1 in 0..rest {
        for r2 in 0..rest {
            for l1 in 0..n {
                for l2 in 0..n {
                    block[(l1, l2)] = m[(full(r1, l1), full(r2, l2))];
                }
            }
            b[r1 * rest + r2] = &proj * &block * proj.adjoint();
        }
    }
    let mut out = DMatrix::<C64>::zeros(space.dim(), space.dim());
    for r1 in 0..rest {
        for r2 in 0..rest {
            let bij = &b[r1 * rest + r2];
            for l1 in 0..n {
                for l2 in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..rank {
                        for j in 0..rank {
                            acc += choi[(l1 * rank + i, l2 * rank + j)] * bij[(i, j)];
                        }
                    }
                    out[(full(r1, l1), full(r2, l2))] = acc;
                }
            }
        }
    }
    FockDensity::from_matrix(space, out)
}

/// Gaussian-backend teleportation of `mode`, averaged over outcomes.
pub fn cv_teleport_gaussian(input: &GaussianState, mode: usize, r: f64, gain: f64) -> Result<GaussianState> {
    let m = input.modes();
    if mode >= m {
        return Err(Error::ModeOutOfRange { mode, modes: m });
    }
    let (a, b) = (m, m + 1);
    let joint = input.tensor(&make_epr_gaussian(r)).evolve(&GaussianOp::BeamSplit { m1: mode, m2: a, t: 0.5 })?;
    let s2g = std::f64::consts::SQRT_2 * gain;
    // x on the input port, then p on EPR mode A; indices shift as modes are removed
    let step1 = joint.measure_feedforward(mode, [1.0, 0.0], 0.0, &[(b - 1, 0, s2g)])?;
    let step2 = step1.measure_feedforward(a - 1, [0.0, 1.0], 0.0, &[(b - 2, 1, s2g)])?;
    step2.move_mode(m - 1, mode)
}

/// Teleports both rails of a two-mode (time-bin) state, one after the other.
pub fn timebin_teleport(input: &FockDensity, spec: &TeleportSpec) -> Result<TeleportOutput> {
    if input.space().modes() != 2 {
        return Err(Error::InvalidParameter("time-bin input needs exactly two rails".into()));
    }
    let first = cv_teleport(input, 0, spec)?;
    let second = cv_teleport(&first.state, 1, spec)?;
    Ok(TeleportOutput {
        trace: second.state.trace(),
        leakage: second.state.leakage().max(first.leakage),
        resource_cutoff: second.resource_cutoff,
        grid: second.grid,
        state: second.state,
    })
}

/// Outcome of DV teleportation.
#[derive(Debug, Clone)]
pub struct DvTeleport {
    /// normalized output qubit in the `(|H⟩, |V⟩)` basis
    pub qubit: DMatrix<C64>,
    pub probability: f64,
    pub fidelity: f64,
}

/// Singlet `(|H⟩|V⟩ − |V⟩|H⟩)/√2` on rails `(2H, 2V, 3H, 3V)`.
pub fn singlet_resource() -> Result<FockState> {
    let space = FockSpace::new(4, 3)?;
    let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    amps[space.index_of(&[1, 0, 0, 1])?] = C64::new(h, 0.0);
    amps[space.index_of(&[0, 1, 1, 0])?] = C64::new(-h, 0.0);
    FockState::from_amplitudes(space, amps)
}

/// Post-selected polarization-qubit teleportation with the singlet resource.
pub fn teleport_dv(alpha: C64, beta: C64) -> Result<DvTeleport> {
    teleport_dv_with(alpha, beta, &singlet_resource()?)
}

/// As [`teleport_dv`] with an arbitrary two-photon resource on rails
/// `(2H, 2V, 3H, 3V)` at cutoff 3.
pub fn teleport_dv_with(alpha: C64, beta: C64, resource: &FockState) -> Result<DvTeleport> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Unnormalized(norm));
    }
    let rails = FockSpace::new(2, 3)?;
    let q = QubitSubspace::dual_rail();
    let input = q.encode(rails, alpha, beta)?;
    let (out, probability) = bell_dv_coincidence(&input.tensor(resource)?)?;
    let qubit = q.block(&out)?;
    let pop = qubit[(0, 0)].re + qubit[(1, 1)].re;
    let qubit = qubit / C64::new(pop, 0.0);
    let target = q.encode(rails, alpha, beta)?;
    let fidelity = out.overlap_pure(&target)? / pop;
    Ok(DvTeleport { qubit, probability, fidelity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::trace_distance;

    #[test]
    fn kraus_family_is_trace_preserving() {
        for &eta in &[0.0, 0.3, 0.77, 1.0] {
            assert!(LossChannel::new(eta).unwrap().trace_preservation_error(12) < 1e-12);
        }
        assert!(LossChannel::new(1.2).is_err());
    }

    #[test]
    fn loss_maps_coherent_to_coherent() {
        let alpha = C64::new(0.8, -0.3);
        let eta: f64 = 0.6;
        let rho = FockState::coherent(40, alpha).unwrap().to_density();
        let out = apply_loss(&rho, eta).unwrap();
        let expect = FockState::coherent(40, alpha * eta.sqrt()).unwrap();
        assert!(trace_distance(&out, &expect).unwrap() < 1e-10);
    }

    #[test]
    fn epr_backends_share_covariance() {
        let r = 0.6;
        let g = make_epr_gaussian(r);
        let f = make_epr_fock(r, 40).unwrap();
        let mo = crate::fock::moments(&f).unwrap();
        assert!((&mo.cov - g.cov()).amax() < 1e-9);
    }

    #[test]
    fn resource_cutoff_policy() {
        assert_eq!(epr_resource_cutoff(0.0, 12), 12);
        let k = epr_resource_cutoff(1.01, 12);
        let lam = 1.01f64.tanh();
        assert!(lam.powi(2 * k as i32) <= EPR_TAIL && lam.powi(2 * (k as i32 - 1)) > EPR_TAIL);
    }

    #[test]
    fn gaussian_unit_gain_fidelity() {
        for &r in &[0.0, 0.5, 1.2] {
            let input = GaussianState::coherent(C64::new(0.7, -0.2));
            let out = cv_teleport_gaussian(&input, 0, r, 1.0).unwrap();
            let f = crate::gaussian::fidelity(&input, &out).unwrap();
            assert!((f - coherent_unit_gain_fidelity(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_squeezing_zero_gain_outputs_vacuum() {
        let rho = FockState::basis(FockSpace::new(1, 6).unwrap(), &[1]).unwrap().to_density();
        let spec = TeleportSpec::tuned(0.0).unwrap().with_grid(GridSpec::Auto { points: 64 });
        let out = cv_teleport(&rho, 0, &spec).unwrap();
        let vac = FockState::vacuum(FockSpace::new(1, 6).unwrap());
        assert!(trace_distance(&out.state, &vac).unwrap() < 1e-10);
    }

    #[test]
    fn tuned_gain_matches_loss() {
        let r: f64 = 0.7;
        let space = FockSpace::new(1, 12).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = FockState::from_amplitudes(space, {
            let mut v = vec![C64::new(0.0, 0.0); 12];
            v[0] = C64::new(h, 0.0);
            v[1] = C64::new(h, 0.0);
            v
        })
        .unwrap();
        let rho = psi.to_density();
        let t = std::time::Instant::now();
        let out = cv_teleport(&rho, 0, &TeleportSpec::tuned(r).unwrap()).unwrap();
        eprintln!("teleport {:?} K={}", t.elapsed(), out.resource_cutoff);
        let lossy = apply_loss(&rho, r.tanh().powi(2)).unwrap();
        let td = trace_distance(&out.state, &lossy).unwrap();
        eprintln!("td {td:e} trace {}", out.trace);
        assert!(td < 1e-6);
        let g = cv_teleport_gaussian(&GaussianState::vacuum(1), 0, r, r.tanh()).unwrap();
        assert!((g.cov() - GaussianState::vacuum(1).cov()).amax() < 1e-12);
    }

    #[test]
    fn dv_teleport_basis_states() {
        let t = teleport_dv(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        assert!((t.probability - 0.25).abs() < 1e-12);
        assert!((t.fidelity - 1.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = teleport_dv(C64::new(h, 0.0), C64::new(0.0, h)).unwrap();
        assert!((t.fidelity - 1.0).abs() < 1e-12);
        assert!((t.qubit[(0, 1)] - C64::new(0.0, -0.5)).norm() < 1e-12);
        assert!(teleport_dv(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).is_err());
    }
}
