//! Position-space engine for C_Z-coupled teleportation steps.
//!
//! With the input on mode 0, an ancilla `A` on mode 1, `C_Z = exp(i x̂₀x̂₁)` and
//! mode 0 projected on `⟨p = s|`, the ancilla is left in
//! `ψ̃(s − y) A(y)` with `ψ̃` the input's momentum wavefunction. This holds for
//! any `A`, so broad squeezed or cubic ancillas never need a Fock expansion.
//! Pointwise corrections (functions of `x̂`) multiply the wavefunction; the
//! result is projected onto a position eigenbasis whose cutoff escalates until
//! the top levels are empty, and displacements act through exact matrix rows.

use crate::fock::{moments, FockDensity, FockSpace, FockState, PositionBasis};
use crate::measurement::{QuadratureGrid, GRID_SIGMAS};
use crate::special::{displacement_elements, hermite_functions};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Smallest position-basis cutoff tried.
pub const MIN_DVR_CUTOFF: usize = 48;

/// Largest position-basis cutoff before giving up.
pub const MAX_DVR_CUTOFF: usize = 2400;

/// Ancilla wavefunction on the receiving mode.
#[derive(Debug, Clone)]
pub enum Ancilla {
    /// truncated Fock expansion
    Fock(FockState),
    /// p-squeezed vacuum, `Var x = e^{2r}/2`
    Squeezed { r: f64 },
    /// `exp(iχx³)` on the p-squeezed vacuum
    Cubic { chi: f64, r: f64 },
    /// `exp(i(a x + b x²/2))` on the p-squeezed vacuum
    Quadratic { a: f64, b: f64, r: f64 },
}

impl Ancilla {
    fn squeezed_envelope(r: f64, x: f64) -> f64 {
        let v = (2.0 * r).exp();
        (PI * v).powf(-0.25) * (-0.5 * x * x / v).exp()
    }

    pub fn eval(&self, x: f64) -> C64 {
        match self {
            Ancilla::Fock(state) => {
                let amps = state.amplitudes();
                let h = hermite_functions(amps.len(), x);
                amps.iter().zip(&h).map(|(a, &b)| a * b).sum()
            }
            Ancilla::Squeezed { r } => C64::new(Self::squeezed_envelope(*r, x), 0.0),
            Ancilla::Cubic { chi, r } => C64::from_polar(Self::squeezed_envelope(*r, x), chi * x * x * x),
            Ancilla::Quadratic { a, b, r } => C64::from_polar(Self::squeezed_envelope(*r, x), a * x + 0.5 * b * x * x),
        }
    }

    /// Mean and variance of `x̂`.
    pub fn x_moments(&self) -> Result<(f64, f64)> {
        match self {
            Ancilla::Fock(state) => {
                let m = moments(state)?;
                Ok((m.mean[0], m.cov[(0, 0)]))
            }
            Ancilla::Squeezed { r } | Ancilla::Cubic { r, .. } | Ancilla::Quadratic { r, .. } => Ok((0.0, 0.5 * (2.0 * r).exp())),
        }
    }
}

/// Momentum wavefunction `ψ̃(k) = Σ c_n (−i)^n φ_n(k)` of a single-mode state.
pub fn momentum_wavefunction(amps: &DVector<C64>, k: f64) -> C64 {
    let h = hermite_functions(amps.len(), k);
    let quarter = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)];
    amps.iter().zip(&h).enumerate().map(|(n, (a, &b))| a * quarter[n % 4] * b).sum()
}

/// Position wavefunction `ψ(x) = Σ c_n φ_n(x)`.
pub fn position_wavefunction(amps: &DVector<C64>, x: f64) -> C64 {
    let h = hermite_functions(amps.len(), x);
    amps.iter().zip(&h).map(|(a, &b)| a * b).sum()
}

/// Settings shared by the engine calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOptions {
    /// Fock cutoff of the returned state
    pub out_cutoff: usize,
    /// accepted weight fraction in the top eighth of the position basis
    pub tail: f64,
    pub max_cutoff: usize,
}

impl BranchOptions {
    pub fn new(out_cutoff: usize) -> Self {
        Self { out_cutoff, tail: 1e-12, max_cutoff: MAX_DVR_CUTOFF }
    }
}

/// Position bases of growing size, built on demand, with cached ancilla samples.
pub struct DvrLadder {
    rungs: Vec<(PositionBasis, Option<Vec<C64>>)>,
}

impl Default for DvrLadder {
    fn default() -> Self {
        Self::new()
    }
}

impl DvrLadder {
    pub fn new() -> Self {
        Self { rungs: Vec::new() }
    }

    fn size(k: usize) -> usize {
        (MIN_DVR_CUTOFF as f64 * 1.5f64.powi(k as i32)).round() as usize
    }

    fn rung(&mut self, k: usize) -> Result<&mut (PositionBasis, Option<Vec<C64>>)> {
        while self.rungs.len() <= k {
            let w = Self::size(self.rungs.len());
            self.rungs.push((PositionBasis::new(w)?, None));
        }
        Ok(&mut self.rungs[k])
    }

    /// First rung whose outermost node exceeds `reach`.
    fn first_covering(reach: f64) -> usize {
        (0..).find(|&k| (2.0 * Self::size(k) as f64).sqrt() * 0.95 > reach).expect("ladder is unbounded")
    }
}

/// One conditional branch, before any final displacement.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Fock amplitudes at the position-basis cutoff
    pub amps: DVector<C64>,
    pub tail: f64,
}

impl Branch {
    pub fn cutoff(&self) -> usize {
        self.amps.len()
    }

    /// Displaces by `X(shift)` and truncates to `rows`; returns the
    /// amplitudes and the weight pushed beyond `rows`.
    pub fn displaced(&self, shift: f64, rows: usize) -> (DVector<C64>, f64) {
        let cols = self.amps.len();
        let d = displacement_elements(C64::new(shift / std::f64::consts::SQRT_2, 0.0), rows, cols);
        let out = DVector::from_fn(rows, |l, _| (0..cols).map(|k| d[l * cols + k] * self.amps[k]).sum::<C64>());
        let lost = (self.amps.norm_squared() - out.norm_squared()).max(0.0);
        (out, lost)
    }
}

fn tail_fraction(amps: &DVector<C64>) -> f64 {
    let w = amps.len();
    let total = amps.norm_squared();
    if total == 0.0 {
        return 0.0;
    }
    let top: f64 = amps.iter().skip(w - (w / 8).max(2)).map(|z| z.norm_sqr()).sum();
    top / total
}

/// Projects `f` onto position bases of growing size until its top levels empty.
pub fn project_wavefunction(ladder: &mut DvrLadder, reach: f64, tail: f64, max_cutoff: usize, f: &dyn Fn(f64) -> C64) -> Result<Branch> {
    project_with_ancilla(ladder, reach, tail, max_cutoff, None, &|y, _| f(y))
}

fn project_with_ancilla(ladder: &mut DvrLadder, reach: f64, tail: f64, max_cutoff: usize, ancilla: Option<&Ancilla>, f: &dyn Fn(f64, C64) -> C64) -> Result<Branch> {
    let mut k = DvrLadder::first_covering(reach);
    loop {
        let w = DvrLadder::size(k);
        if w > max_cutoff {
            return Err(Error::Leakage { leakage: f64::NAN, threshold: tail });
        }
        let (basis, cache) = ladder.rung(k)?;
        if let (Some(a), None) = (ancilla, &cache) {
            *cache = Some(basis.nodes().iter().map(|&y| a.eval(y)).collect());
        }
        let nodes = DVector::from_iterator(
            w,
            basis.nodes().iter().zip(basis.weights()).enumerate().map(|(j, (&y, &wt))| {
                let av = cache.as_ref().map_or(C64::new(1.0, 0.0), |c| c[j]);
                f(y, av) * wt
            }),
        );
        let amps = basis.from_nodes(&nodes);
        let t = tail_fraction(&amps);
        if t <= tail {
            return Ok(Branch { amps, tail: t });
        }
        k += 1;
    }
}

/// Extent of the input's momentum wavefunction.
fn momentum_reach(input: &FockState) -> Result<f64> {
    let m = moments(input)?;
    Ok(m.mean[1].abs() + GRID_SIGMAS * m.cov[(1, 1)].sqrt())
}

/// The ancilla state after the input is measured at `⟨p = s|` and the
/// pointwise factor `correction(y)` is applied; unnormalized, with squared norm
/// equal to the outcome density.
pub fn cz_branch(input: &FockState, ancilla: &Ancilla, s: f64, correction: &dyn Fn(f64) -> C64, ladder: &mut DvrLadder, opts: &BranchOptions) -> Result<Branch> {
    if input.space().modes() != 1 {
        return Err(Error::InvalidParameter("engine input must be single-mode".into()));
    }
    let amps = input.amplitudes().clone();
    let reach = s.abs() + momentum_reach(input)? + 2.0;
    project_with_ancilla(ladder, reach, opts.tail, opts.max_cutoff, Some(ancilla), &|y, a| momentum_wavefunction(&amps, s - y) * a * correction(y))
}

/// Outcome grid covering `s = p_in + x_anc`.
pub fn outcome_grid(input: &FockState, ancilla: &Ancilla, points: usize) -> Result<QuadratureGrid> {
    let m = moments(input)?;
    let (am, av) = ancilla.x_moments()?;
    let sd = (m.cov[(1, 1)] + av).sqrt();
    QuadratureGrid::new((m.mean[1] + am).abs() + GRID_SIGMAS * sd, points)
}

/// Outcome-averaged output `∫ ds |out_s⟩⟨out_s|`, where each branch is corrected
/// pointwise by `correction(s, y)` and then displaced by `X(shift(s))`.
pub fn cz_average(
    input: &FockState,
    ancilla: &Ancilla,
    grid: &QuadratureGrid,
    correction: &dyn Fn(f64, f64) -> C64,
    shift: &dyn Fn(f64) -> f64,
    opts: &BranchOptions,
) -> Result<(FockDensity, f64)> {
    let n = opts.out_cutoff;
    let mut ladder = DvrLadder::new();
    let mut rho = DMatrix::<C64>::zeros(n, n);
    let mut lost = 0.0;
    let w = grid.spacing();
    for s in grid.values() {
        let b = cz_branch(input, ancilla, s, &|y| correction(s, y), &mut ladder, opts)?;
        let (out, l) = b.displaced(shift(s), n);
        lost += l * w;
        rho.ger(C64::new(w, 0.0), &out, &out.conjugate(), C64::new(1.0, 0.0));
    }
    Ok((FockDensity::from_matrix(FockSpace::new(1, n)?, rho)?, lost))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_and_fock_squeezed_ancillas_agree() {
        let r = 0.4;
        let fock = FockState::squeezed_vacuum(60, r, PI).unwrap();
        let a = Ancilla::Fock(fock);
        let b = Ancilla::Squeezed { r };
        for &x in &[-2.5, 0.0, 0.7, 3.1] {
            assert!((a.eval(x) - b.eval(x)).norm() < 1e-10);
        }
        assert!((a.x_moments().unwrap().1 - b.x_moments().unwrap().1).abs() < 1e-9);
    }

    #[test]
    fn momentum_wavefunction_of_coherent_state() {
        let alpha = C64::new(0.3, 0.8);
        let st = FockState::coherent(40, alpha).unwrap();
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        for &k in &[-1.0, 0.4, 1.9] {
            let got = momentum_wavefunction(st.amplitudes(), k).norm_sqr();
            let want = (-(k - p0).powi(2)).exp() / PI.sqrt();
            assert!((got - want).abs() < 1e-10, "{got} {want} {x0}");
        }
    }

    #[test]
    fn branch_norms_integrate_to_one() {
        let input = FockState::coherent(20, C64::new(0.5, 0.2)).unwrap();
        let anc = Ancilla::Squeezed { r: 0.8 };
        let grid = outcome_grid(&input, &anc, 128).unwrap();
        let (rho, lost) = cz_average(&input, &anc, &grid, &|_, _| C64::new(1.0, 0.0), &|s| -s, &BranchOptions::new(30)).unwrap();
        assert!((rho.trace() + lost - 1.0).abs() < 1e-9, "{} {lost}", rho.trace());
    }
}
