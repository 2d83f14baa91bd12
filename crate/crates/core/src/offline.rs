//! Off-line gate teleportation: the universal squeezer, cubic-phase ancillas
//! (exact, photon-counted, three-photon truncated) and the cubic phase gate
//! with its outcome-dependent Gaussian correction.

use crate::branch::{cz_average, cz_branch, outcome_grid, position_wavefunction, project_wavefunction, Ancilla, BranchOptions, DvrLadder};
use crate::cluster::PhaseFunction;
use crate::fock::{moments, FockDensity, FockSpace, FockState, ModeOperator, PositionBasis};
use crate::gaussian::{GaussianOp, GaussianState};
use crate::measurement::{quadrature_bra, ExactBeamSplitter, QuadratureGrid, GRID_SIGMAS};
use crate::special::{displacement_elements, tmsv_coefficients};
use crate::teleport::epr_resource_cutoff;
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

/// Ancilla leakage accepted by [`make_cubic_ancilla`].
pub const ANCILLA_LEAKAGE: f64 = 1e-4;

/// Weight beyond the output cutoff accepted by the cubic gate.
pub const CORRECTION_LEAKAGE: f64 = 1e-3;

/// Feedforward gain that cancels the ancilla's anti-squeezed quadrature.
pub fn squeezer_gain(t: f64) -> f64 {
    ((1.0 - t) / t).sqrt()
}

fn check_transmissivity(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("transmissivity {t} outside (0, 1)")));
    }
    Ok(())
}

/// Universal squeezer: input and x-squeezed ancilla on a splitter of
/// transmissivity `t`, `p` measured on the second port and fed forward as
/// `p → p + g m`. With the optimal gain and an ideal ancilla this maps
/// `x → √T x`, `p → p/√T`.
pub fn universal_squeezer(input: &GaussianState, t: f64, r: f64, gain: f64) -> Result<GaussianState> {
    check_transmissivity(t)?;
    if input.modes() != 1 {
        return Err(Error::InvalidParameter("squeezer input must be single-mode".into()));
    }
    input
        .tensor(&GaussianState::squeezed_vacuum(r, 0.0))
        .evolve(&GaussianOp::BeamSplit { m1: 0, m2: 1, t })?
        .measure_feedforward(1, [0.0, 1.0], 0.0, &[(0, 1, gain)])
}

/// Ideal squeezing map applied to `input`.
pub fn ideal_squeeze(input: &GaussianState, t: f64) -> Result<GaussianState> {
    check_transmissivity(t)?;
    input.evolve(&GaussianOp::Squeeze { mode: 0, r: -0.5 * t.ln(), phi: 0.0 })
}

/// Noise added by the squeezer beyond its linear map, referred to the input
/// and summed over both quadratures.
pub fn squeezer_excess_noise(input: &GaussianState, t: f64, r: f64, gain: f64) -> Result<f64> {
    let out = universal_squeezer(input, t, r, gain)?;
    // signal gains from unit probes; the map on means is linear
    let probe = |alpha: C64| -> Result<DVector<f64>> {
        let shifted = input.evolve(&GaussianOp::Displace { mode: 0, re: alpha.re, im: alpha.im })?;
        Ok(universal_squeezer(&shifted, t, r, gain)?.mean() - out.mean())
    };
    let gx = probe(C64::new(1.0 / SQRT_2, 0.0))?[0];
    let gp = probe(C64::new(0.0, 1.0 / SQRT_2))?[1];
    let (vin, vout) = (input.cov(), out.cov());
    Ok((vout[(0, 0)] - gx * gx * vin[(0, 0)]) / (gx * gx) + (vout[(1, 1)] - gp * gp * vin[(1, 1)]) / (gp * gp))
}

/// Minimizes a unimodal `f` on `[lo, hi]`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Fock-backend universal squeezer for a pure input, averaged over the
/// outcome; returns the output and the weight lost beyond `out_cutoff`.
pub fn universal_squeezer_fock(input: &FockState, t: f64, r: f64, gain: f64, ancilla_cutoff: usize, points: usize, out_cutoff: usize) -> Result<(FockDensity, f64)> {
    check_transmissivity(t)?;
    if input.space().modes() != 1 {
        return Err(Error::InvalidParameter("squeezer input must be single-mode".into()));
    }
    let n = input.space().cutoff();
    let anc = FockState::squeezed_vacuum(ancilla_cutoff, r, 0.0)?;
    let d = n + ancilla_cutoff - 1;
    let bs = ExactBeamSplitter::new(t, d - 1)?;
    let amps: Vec<C64> = input.amplitudes().iter().flat_map(|a| anc.amplitudes().iter().map(move |b| a * b)).collect();
    let table = bs.apply(&amps, n, ancilla_cutoff)?;
    let mi = moments(input)?;
    let var_m = (1.0 - t) * mi.cov[(1, 1)] + t * 0.5 * (2.0 * r).exp();
    let mean_m = (1.0 - t).sqrt() * mi.mean[1];
    let grid = QuadratureGrid::new(mean_m.abs() + GRID_SIGMAS * var_m.sqrt(), points)?;
    let w = grid.spacing();
    let mut rho = DMatrix::<C64>::zeros(out_cutoff, out_cutoff);
    let mut lost = 0.0;
    for m in grid.values() {
        let bra = quadrature_bra(d, FRAC_PI_2, m);
        let v = DVector::from_fn(d, |k, _| (0..d).map(|l| bra[l] * table[k * d + l]).sum::<C64>());
        let dm = displacement_elements(C64::new(0.0, gain * m / SQRT_2), out_cutoff, d);
        let out = DVector::from_fn(out_cutoff, |l, _| (0..d).map(|k| dm[l * d + k] * v[k]).sum::<C64>());
        lost += (v.norm_squared() - out.norm_squared()).max(0.0) * w;
        rho.ger(C64::new(w, 0.0), &out, &out.conjugate(), C64::new(1.0, 0.0));
    }
    Ok((FockDensity::from_matrix(FockSpace::new(1, out_cutoff)?, rho)?, lost))
}

/// Recipe for a cubic-phase ancilla.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CubicAncillaSpec {
    /// `exp(iχx̂³)` on the p-squeezed vacuum
    Exact { chi: f64, r: f64 },
    /// two-mode squeezing, displacement `X(t)` and photon count `n`, squeezed
    /// afterwards towards the target `chi`
    Gkp { t: f64, r: f64, n: usize, chi: f64 },
    /// exact ancilla restricted to three photons in its unsqueezed frame
    Marek3 { chi: f64, r: f64 },
}

impl CubicAncillaSpec {
    /// Photon-counted ancilla with the default displacement `t = 4 e^r`.
    pub fn gkp(r: f64, n: usize, chi: f64) -> Self {
        Self::Gkp { t: 4.0 * r.exp(), r, n, chi }
    }

    fn validate(&self) -> Result<()> {
        let (chi, r) = match *self {
            Self::Exact { chi, r } | Self::Marek3 { chi, r } | Self::Gkp { chi, r, .. } => (chi, r),
        };
        if !chi.is_finite() || !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("ancilla needs finite χ and r ≥ 0, got χ = {chi}, r = {r}")));
        }
        if let Self::Gkp { t, .. } = self {
            if !t.is_finite() {
                return Err(Error::InvalidParameter(format!("displacement t = {t} not finite")));
            }
            if chi == 0.0 {
                return Err(Error::InvalidParameter("photon-counted ancilla needs χ ≠ 0".into()));
            }
        }
        Ok(())
    }
}

/// Weight of `amps` beyond level `cutoff`.
fn weight_beyond(amps: &DVector<C64>, cutoff: usize) -> f64 {
    amps.iter().skip(cutoff).map(|z| z.norm_sqr()).sum::<f64>() / amps.norm_squared()
}

fn truncate(amps: &DVector<C64>, cutoff: usize) -> Result<FockState> {
    let leak = weight_beyond(amps, cutoff);
    if leak > ANCILLA_LEAKAGE {
        return Err(Error::Leakage { leakage: leak, threshold: ANCILLA_LEAKAGE });
    }
    let v = DVector::from_fn(cutoff, |k, _| amps.get(k).copied().unwrap_or(C64::new(0.0, 0.0)));
    FockState::from_vector(FockSpace::new(1, cutoff)?, v)?.normalized()
}

/// Scales `ψ(x) → e^{−ρ/2} ψ(e^{−ρ} x)`: the p-squeezer for `ρ > 0`.
fn dilate(amps: &DVector<C64>, rho: f64, ladder: &mut DvrLadder) -> Result<DVector<C64>> {
    let m = moments(&FockState::from_vector(FockSpace::new(1, amps.len())?, amps.clone())?)?;
    let reach = (m.mean[0].abs() + GRID_SIGMAS * m.cov[(0, 0)].sqrt()) * rho.exp().max(1.0) + 2.0;
    let scale = (-rho).exp();
    Ok(project_wavefunction(ladder, reach, 1e-12, 4 * crate::branch::MAX_DVR_CUTOFF, &|x| position_wavefunction(amps, scale * x) * scale.sqrt())?.amps)
}

/// Photon-count outcome probabilities `P(n)` of the photon-counted recipe.
pub fn gkp_outcome_probabilities(t: f64, r: f64, n_max: usize) -> Vec<f64> {
    let k = epr_resource_cutoff(r, 8);
    let c = tmsv_coefficients(k, r);
    let d = displacement_elements(C64::new(t / SQRT_2, 0.0), n_max + 1, k);
    (0..=n_max).map(|n| (0..k).map(|j| (c[j] * d[n * k + j]).norm_sqr()).sum()).collect()
}

/// Conditional photon-count state before post-processing, and its probability.
fn gkp_raw(t: f64, r: f64, n: usize) -> (DVector<C64>, f64) {
    let k = epr_resource_cutoff(r, 8);
    let c = tmsv_coefficients(k, r);
    let d = displacement_elements(C64::new(t / SQRT_2, 0.0), n + 1, k);
    let b = DVector::from_fn(k, |j, _| d[n * k + j] * c[j]);
    let p = b.norm_squared();
    (b / C64::new(p.sqrt(), 0.0), p)
}

/// Post-processing of the photon-counted state: the turning point
/// `y₀ = √(2n+1) − t` is moved to the origin, `F†` turns the Airy profile into
/// `exp(iγx̂³)|p=0⟩` with `γ = 1/(6√(2n+1))`, and the p-squeezer
/// `ρ = ln(γ/χ)/3` rescales `γ` to `χ`.
fn gkp_processed(t: f64, r: f64, n: usize, chi: f64, ladder: &mut DvrLadder) -> Result<DVector<C64>> {
    let (b, _) = gkp_raw(t, r, n);
    let root = (2.0 * n as f64 + 1.0).sqrt();
    let y0 = root - t;
    let gamma = 1.0 / (6.0 * root);
    let cols = b.len();
    let rows = (((2.0 * cols as f64).sqrt() + y0.abs() + 8.0).powi(2) / 2.0).ceil() as usize;
    let dm = displacement_elements(C64::new(-y0 / SQRT_2, 0.0), rows, cols);
    let quarter = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)];
    let shifted = DVector::from_fn(rows, |l, _| quarter[l % 4] * (0..cols).map(|k| dm[l * cols + k] * b[k]).sum::<C64>());
    if weight_beyond(&shifted, rows - rows / 8) > 1e-10 || (shifted.norm_squared() - 1.0).abs() > 1e-8 {
        return Err(Error::Leakage { leakage: 1.0 - shifted.norm_squared(), threshold: 1e-8 });
    }
    let sign = if chi < 0.0 { -1.0 } else { 1.0 };
    let mut v = dilate(&shifted, (gamma / chi.abs()).ln() / 3.0, ladder)?;
    if sign < 0.0 {
        // x → −x flips the sign of the cubic phase
        for (k, z) in v.iter_mut().enumerate() {
            if k % 2 == 1 {
                *z = -*z;
            }
        }
    }
    Ok(v)
}

fn marek3_low(chi: f64, r: f64, frame: f64, ladder: &mut DvrLadder) -> Result<DVector<C64>> {
    let chi3 = chi * (3.0 * frame).exp();
    let v = (2.0 * (r - frame)).exp();
    let reach = GRID_SIGMAS * (0.5 * v).sqrt().max(1.0);
    let inner = project_wavefunction(ladder, reach, 1e-12, crate::branch::MAX_DVR_CUTOFF, &|x| {
        C64::from_polar((PI * v).powf(-0.25) * (-0.5 * x * x / v).exp(), chi3 * x * x * x)
    })?;
    Ok(DVector::from_fn(4, |k, _| inner.amps[k]))
}

/// Squared overlap of the frame-`frame` three-photon ancilla with the exact one.
pub fn marek3_fidelity(chi: f64, r: f64, frame: f64) -> Result<f64> {
    Ok(marek3_low(chi, r, frame, &mut DvrLadder::new())?.norm_squared())
}

/// Frame squeezing in `[0, r]` (or `[r, 0]`) that maximises the retained weight.
pub fn marek3_frame(chi: f64, r: f64) -> Result<f64> {
    let (lo, hi) = if r >= 0.0 { (0.0, r) } else { (r, 0.0) };
    let mut err = None;
    let best = golden_section(
        |f| match marek3_fidelity(chi, r, f) {
            Ok(v) => -v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        1e-4,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Three-photon ancilla in the frame squeezed by `frame`:
/// `S(frame) · normalize(P_{≤3} S(frame)† e^{iχx̂³} S(r)|0⟩)`.
pub fn marek3_amplitudes(chi: f64, r: f64, frame: f64, ladder: &mut DvrLadder) -> Result<DVector<C64>> {
    let low = marek3_low(chi, r, frame, ladder)?;
    let low = &low / C64::new(low.norm(), 0.0);
    dilate(&low, frame, ladder)
}

/// Builds the ancilla on `cutoff` levels; fails with [`Error::Leakage`] when
/// more than `1e−4` of its weight lies beyond.
pub fn make_cubic_ancilla(spec: &CubicAncillaSpec, cutoff: usize) -> Result<FockState> {
    spec.validate()?;
    let mut ladder = DvrLadder::new();
    let amps = match *spec {
        CubicAncillaSpec::Exact { chi, r } => {
            let anc = Ancilla::Cubic { chi, r };
            let reach = GRID_SIGMAS * (0.5 * (2.0 * r).exp()).sqrt();
            project_wavefunction(&mut ladder, reach, 1e-12, crate::branch::MAX_DVR_CUTOFF, &|x| anc.eval(x))?.amps
        }
        CubicAncillaSpec::Marek3 { chi, r } => {
            let frame = marek3_frame(chi, r)?;
            marek3_amplitudes(chi, r, frame, &mut ladder)?
        }
        CubicAncillaSpec::Gkp { t, r, n, chi } => gkp_processed(t, r, n, chi, &mut ladder)?,
    };
    truncate(&amps, cutoff)
}

/// [`make_cubic_ancilla`], retrying at 1.5× the cutoff until the leakage is met.
pub fn make_cubic_ancilla_escalating(spec: &CubicAncillaSpec, cutoff: usize, max_cutoff: usize) -> Result<FockState> {
    let mut c = cutoff.max(1);
    loop {
        match make_cubic_ancilla(spec, c) {
            Err(Error::Leakage { .. }) if c < max_cutoff => c = ((c as f64 * 1.5).ceil() as usize).min(max_cutoff),
            other => return other,
        }
    }
}

/// Candidate photon-counted ancillas compared with exact ancillas of the same
/// x-spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GkpTableRow {
    pub n: usize,
    pub probability: f64,
    /// `r` of the exact ancilla with the same `Var x`
    pub r_matched: f64,
    pub fidelity: f64,
}

pub fn gkp_fidelity_table(t: f64, r: f64, chi: f64, ns: &[usize], cutoff: usize) -> Result<Vec<GkpTableRow>> {
    let probs = gkp_outcome_probabilities(t, r, ns.iter().copied().max().unwrap_or(0));
    ns.iter()
        .map(|&n| {
            let anc = make_cubic_ancilla(&CubicAncillaSpec::Gkp { t, r, n, chi }, cutoff)?;
            let var = moments(&anc)?.cov[(0, 0)];
            let r_matched = 0.5 * (2.0 * var).ln();
            let exact = make_cubic_ancilla(&CubicAncillaSpec::Exact { chi, r: r_matched.max(0.0) }, cutoff)?;
            let fidelity = anc.inner(&exact)?.norm_sqr();
            Ok(GkpTableRow { n, probability: probs[n], r_matched, fidelity })
        })
        .collect()
}

/// The outcome-dependent Gaussian correction `Y(s) = X(−s) exp(i(f(x̂ − s) − f(x̂)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCorrection {
    pub outcome: f64,
    /// global phase `f(−s) − f(0)`
    pub phase: f64,
    /// `exp(i z x̂)`
    pub z: f64,
    /// `exp(i σ x̂²/2)`
    pub shear: f64,
    /// final `X(x_shift)`
    pub x_shift: f64,
}

impl GaussianCorrection {
    /// Fails with [`Error::NonQuadratic`] when `f(x − s) − f(x)` has degree
    /// above two, i.e. for `f` beyond cubic.
    pub fn new(f: &PhaseFunction, s: f64) -> Result<Self> {
        let diff = f.shifted(-s).sub(f);
        let (z, shear) = diff.quadratic_part()?;
        Ok(Self { outcome: s, phase: diff.eval(0.0), z, shear, x_shift: -s })
    }

    /// Gaussian ops in application order (global phase dropped).
    pub fn ops(&self, mode: usize) -> Vec<GaussianOp> {
        let mut ops = Vec::new();
        if self.shear != 0.0 {
            ops.push(GaussianOp::Shear { mode, sigma: self.shear });
        }
        if self.z != 0.0 {
            ops.push(GaussianOp::Displace { mode, re: 0.0, im: self.z / SQRT_2 });
        }
        if self.x_shift != 0.0 {
            ops.push(GaussianOp::Displace { mode, re: self.x_shift / SQRT_2, im: 0.0 });
        }
        ops
    }

    /// The correction as a truncated Fock operator built from its generators,
    /// global phase included.
    pub fn to_fock(&self, space: FockSpace, mode: usize) -> Result<ModeOperator> {
        let mut op = ModeOperator::identity(space, mode)?.scale(C64::from_polar(1.0, self.phase));
        for g in self.ops(mode) {
            op = g.to_fock(space)?.compose(&op)?;
        }
        Ok(op)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("correction serializes")
    }
}

/// The four commuting factors of `exp(iχ(x̂+s)³)` as functions of the
/// truncated `x̂`: `e^{iχs³}`, `e^{i3χs²x̂}`, `e^{i3χs x̂²}`, `e^{iχx̂³}`.
pub fn cubic_factors(chi: f64, s: f64, cutoff: usize) -> Result<[DMatrix<C64>; 4]> {
    let basis = PositionBasis::new(cutoff)?;
    let phase = |f: &dyn Fn(f64) -> f64| basis.operator(|x| C64::from_polar(1.0, f(x)));
    Ok([
        phase(&|_| chi * s * s * s),
        phase(&|x| 3.0 * chi * s * s * x),
        phase(&|x| 3.0 * chi * s * x * x),
        phase(&|x| chi * x * x * x),
    ])
}

/// Output of the off-line gate.
#[derive(Debug, Clone)]
pub struct OfflineOutput {
    pub state: FockDensity,
    /// weight pushed beyond the output cutoff
    pub lost: f64,
    pub grid: QuadratureGrid,
}

fn correction_factor(f: &PhaseFunction, s: f64, y: f64) -> C64 {
    C64::from_polar(1.0, f.eval(y - s) - f.eval(y))
}

/// Off-line gate `exp(i f(x̂))` consuming `ancilla ≈ exp(i f(x̂))|p=0⟩`: the
/// input is coupled by `C_Z`, `p` is measured (outcome `s`) and `Y(s)` is
/// applied. Averaged over `points` outcomes; tends to `exp(i f(x̂)) F|ψ⟩`.
pub fn cubic_gate_offline(input: &FockState, f: &PhaseFunction, ancilla: &Ancilla, points: usize, out_cutoff: usize) -> Result<OfflineOutput> {
    let grid = outcome_grid(input, ancilla, points)?;
    let (state, lost) = cz_average(input, ancilla, &grid, &|s, y| correction_factor(f, s, y), &|s| -s, &BranchOptions::new(out_cutoff))?;
    if lost > CORRECTION_LEAKAGE {
        return Err(Error::Leakage { leakage: lost, threshold: CORRECTION_LEAKAGE });
    }
    Ok(OfflineOutput { state, lost, grid })
}

/// The off-line gate at the forced outcome `s`: normalized output and density.
pub fn cubic_gate_offline_at(input: &FockState, f: &PhaseFunction, ancilla: &Ancilla, s: f64, out_cutoff: usize) -> Result<(FockState, f64)> {
    let mut ladder = DvrLadder::new();
    let b = cz_branch(input, ancilla, s, &|y| correction_factor(f, s, y), &mut ladder, &BranchOptions::new(out_cutoff))?;
    let (out, lost) = b.displaced(-s, out_cutoff);
    if lost > CORRECTION_LEAKAGE * b.amps.norm_squared() {
        return Err(Error::Leakage { leakage: lost, threshold: CORRECTION_LEAKAGE });
    }
    let mut st = FockState::from_vector(FockSpace::new(1, out_cutoff)?, out)?;
    let density = st.normalize()?;
    Ok((st, density))
}

/// Displaces by `X(shift)` on enough rows to keep every photon.
fn shift_exact(amps: &DVector<C64>, shift: f64) -> DVector<C64> {
    let cols = amps.len();
    let rows = (((2.0 * cols as f64).sqrt() + shift.abs() + 8.0).powi(2) / 2.0).ceil() as usize;
    let d = displacement_elements(C64::new(shift / SQRT_2, 0.0), rows, cols);
    DVector::from_fn(rows, |l, _| (0..cols).map(|k| d[l * cols + k] * amps[k]).sum::<C64>())
}

/// Undoes `C(s₁, s₂) = X(s₂) F X(s₁) exp(i(f(x̂+s₁) − f(x̂)))` left by the
/// double-homodyne circuit, using only Gaussian operations.
pub fn gkp_cubic_correction(state: &FockState, f: &PhaseFunction, s1: f64, s2: f64, out_cutoff: usize) -> Result<FockState> {
    if state.space().modes() != 1 {
        return Err(Error::InvalidParameter("correction acts on a single mode".into()));
    }
    let quarter = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)];
    let a = shift_exact(state.amplitudes(), -s2);
    let a = DVector::from_fn(a.len(), |k, _| quarter[k % 4] * a[k]);
    let a = shift_exact(&a, -s1);
    let g = f.shifted(s1).sub(f);
    let mut ladder = DvrLadder::new();
    let m = moments(&FockState::from_vector(FockSpace::new(1, a.len())?, a.clone())?)?;
    let reach = m.mean[0].abs() + GRID_SIGMAS * m.cov[(0, 0)].sqrt() + 2.0;
    let out = project_wavefunction(&mut ladder, reach, 1e-12, crate::branch::MAX_DVR_CUTOFF, &|x| position_wavefunction(&a, x) * C64::from_polar(1.0, -g.eval(x)))?;
    let lost = weight_beyond(&out.amps, out_cutoff);
    if lost > CORRECTION_LEAKAGE {
        return Err(Error::Leakage { leakage: lost, threshold: CORRECTION_LEAKAGE });
    }
    let v = DVector::from_fn(out_cutoff, |k, _| out.amps.get(k).copied().unwrap_or(C64::new(0.0, 0.0)));
    FockState::from_vector(FockSpace::new(1, out_cutoff)?, v)?.normalized()
}

/// Double-homodyne cubic gate: `C_Z` with the ancilla and `p` measured on the
/// input (outcome `s₁`), then `C_Z` with a p-squeezed node and `p` measured on
/// the ancilla mode (outcome `s₂`), then [`gkp_cubic_correction`].
pub fn gkp_pipeline(input: &FockState, f: &PhaseFunction, ancilla: &Ancilla, node_r: f64, s1: f64, s2: f64, out_cutoff: usize) -> Result<FockState> {
    let one = |_: f64| C64::new(1.0, 0.0);
    let mut ladder = DvrLadder::new();
    let first = cz_branch(input, ancilla, s1, &one, &mut ladder, &BranchOptions::new(out_cutoff))?;
    let mid = FockState::from_vector(FockSpace::new(1, first.cutoff())?, first.amps)?.normalized()?;
    let mut ladder = DvrLadder::new();
    let second = cz_branch(&mid, &Ancilla::Squeezed { r: node_r }, s2, &one, &mut ladder, &BranchOptions::new(out_cutoff))?;
    let held = FockState::from_vector(FockSpace::new(1, second.cutoff())?, second.amps)?.normalized()?;
    gkp_cubic_correction(&held, f, s1, s2, out_cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::operator::{expm_hermitian, x_power};

    #[test]
    fn squeezer_gain_is_the_noise_minimum() {
        let input = GaussianState::coherent(C64::new(0.3, 0.2));
        for &t in &[0.2, 0.5, 0.8] {
            let g = golden_section(|g| squeezer_excess_noise(&input, t, 1.0, g).unwrap(), 0.0, 5.0, 1e-9);
            assert!((g - squeezer_gain(t)).abs() < 1e-6, "T={t}: {g}");
        }
    }

    #[test]
    fn squeezer_means_follow_the_ideal_map() {
        let alpha = 0.7;
        let input = GaussianState::coherent(C64::new(alpha, 0.4));
        let out = universal_squeezer(&input, 0.5, 3.0, squeezer_gain(0.5)).unwrap();
        assert!((out.mean()[0] - alpha * SQRT_2 * 0.5f64.sqrt()).abs() < 1e-12);
        assert!((out.mean()[1] - 0.4 * SQRT_2 / 0.5f64.sqrt()).abs() < 1e-12);
        assert!(universal_squeezer(&input, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn correction_vanishes_at_zero_outcome() {
        let c = GaussianCorrection::new(&PhaseFunction::cubic(0.05), 0.0).unwrap();
        assert!(c.ops(0).is_empty() && c.phase == 0.0);
        let c = GaussianCorrection::new(&PhaseFunction::cubic(0.05), 0.8).unwrap();
        assert!((c.shear + 6.0 * 0.05 * 0.8).abs() < 1e-15);
        assert!((c.z - 3.0 * 0.05 * 0.64).abs() < 1e-15);
        assert!(GaussianCorrection::new(&PhaseFunction { coeffs: vec![0.0, 0.0, 0.0, 0.0, 1.0] }, 0.5).is_err());
    }

    #[test]
    fn exact_ancilla_without_cubic_is_squeezed_vacuum() {
        let a = make_cubic_ancilla(&CubicAncillaSpec::Exact { chi: 0.0, r: 0.5 }, 40).unwrap();
        let b = FockState::squeezed_vacuum(40, 0.5, PI).unwrap();
        assert!((a.inner(&b).unwrap().norm_sqr() - 1.0).abs() < 1e-10);
        assert!(matches!(make_cubic_ancilla(&CubicAncillaSpec::Exact { chi: 0.1, r: 1.5 }, 8), Err(Error::Leakage { .. })));
    }

    #[test]
    fn exact_ancilla_matches_matrix_exponential() {
        let (chi, r) = (0.05, 0.6);
        let a = make_cubic_ancilla(&CubicAncillaSpec::Exact { chi, r }, 40).unwrap();
        let n = 120;
        let u = expm_hermitian(&x_power(n, 3), -chi, 1e-12).unwrap();
        let sq = FockState::squeezed_vacuum(n, r, PI).unwrap();
        let direct = FockState::from_vector(FockSpace::new(1, n).unwrap(), u * sq.amplitudes()).unwrap().with_cutoff(40).unwrap();
        assert!((a.inner(&direct).unwrap().norm_sqr() - direct.norm_sqr()).abs() < 1e-8);
    }

    #[test]
    fn fock_squeezer_matches_gaussian() {
        let (t, r) = (0.6, 0.3);
        let alpha = C64::new(0.3, -0.2);
        let (rho, lost) = universal_squeezer_fock(&FockState::coherent(14, alpha).unwrap(), t, r, squeezer_gain(t), 16, 256, 24).unwrap();
        let m = crate::fock::moments_density(&rho).unwrap();
        let g = universal_squeezer(&GaussianState::coherent(alpha), t, r, squeezer_gain(t)).unwrap();
        assert!(lost < 1e-8, "{lost}");
        assert!((&m.mean - g.mean()).amax() < 1e-6);
        assert!((&m.cov - g.cov()).amax() < 1e-6, "{} {}", m.cov, g.cov());
    }
}
