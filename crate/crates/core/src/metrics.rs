//! Fidelities, distances and phase-space diagnostics.

use crate::fock::{moments_density, FockDensity, FockSpace, FockState};
use crate::measurement::QuadratureGrid;
use crate::special::{laguerre, ln_factorial};
use crate::{Error, Result, C64};
use nalgebra::DMatrix;

pub use crate::gaussian::fidelity as gaussian_fidelity;

/// A pure or mixed Fock-space state.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a FockState),
    Mixed(&'a FockDensity),
}

impl<'a> From<&'a FockState> for StateRef<'a> {
    fn from(s: &'a FockState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a FockDensity> for StateRef<'a> {
    fn from(s: &'a FockDensity) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    fn space(&self) -> FockSpace {
        match self {
            StateRef::Pure(s) => s.space(),
            StateRef::Mixed(r) => r.space(),
        }
    }

    fn matrix(&self) -> DMatrix<C64> {
        match self {
            StateRef::Pure(s) => s.to_density().into_matrix(),
            StateRef::Mixed(r) => r.matrix().clone(),
        }
    }
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues below this fraction of the largest are treated as zero.
const SPECTRAL_FLOOR: f64 = 1e-14;

/// `√Λ V†` restricted to the support of a PSD matrix.
fn support_root(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = hermitian_part(m).symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&j| eig.eigenvalues[j] > SPECTRAL_FLOOR * top).collect();
    let v = &eig.eigenvectors;
    DMatrix::from_fn(keep.len(), v.nrows(), |i, k| v[(k, keep[i])].conj() * eig.eigenvalues[keep[i]].sqrt())
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`; reduces to overlaps for pure inputs.
pub fn fidelity<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch(format!("{:?} vs {:?}", a.space(), b.space())));
    }
    Ok(match (a, b) {
        (StateRef::Pure(x), StateRef::Pure(y)) => x.inner(y)?.norm_sqr(),
        (StateRef::Pure(x), StateRef::Mixed(r)) | (StateRef::Mixed(r), StateRef::Pure(x)) => r.overlap_pure(x)?,
        (StateRef::Mixed(r), StateRef::Mixed(s)) => {
            // √ρ σ √ρ has the spectrum of W σ W† with W = √Λ V† on supp ρ
            let w = support_root(r.matrix());
            let inner = &w * s.matrix() * w.adjoint();
            let ev = hermitian_part(&inner).symmetric_eigenvalues();
            let top = ev.iter().cloned().fold(0.0, f64::max);
            let t: f64 = ev.iter().filter(|&&e| e > SPECTRAL_FLOOR * top).map(|e| e.sqrt()).sum();
            t * t
        }
    })
}

/// `½ ‖ρ − σ‖₁`.
pub fn trace_distance<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch(format!("{:?} vs {:?}", a.space(), b.space())));
    }
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * hermitian_part(&diff).symmetric_eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
}

/// A two-dimensional logical subspace spanned by two Fock basis states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitSubspace {
    pub zero: Vec<usize>,
    pub one: Vec<usize>,
}

impl QubitSubspace {
    /// Single photon shared by two rails: `|0_L⟩ = |1,0⟩`, `|1_L⟩ = |0,1⟩`.
    pub fn dual_rail() -> Self {
        Self { zero: vec![1, 0], one: vec![0, 1] }
    }

    /// `α|0_L⟩ + β|1_L⟩` on `space`.
    pub fn encode(&self, space: FockSpace, alpha: C64, beta: C64) -> Result<FockState> {
        let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
        amps[space.index_of(&self.zero)?] = alpha;
        amps[space.index_of(&self.one)?] = beta;
        FockState::from_amplitudes(space, amps)
    }

    /// Unnormalized `2 × 2` block of `ρ` on the subspace.
    pub fn block(&self, rho: &FockDensity) -> Result<DMatrix<C64>> {
        let s = rho.space();
        let idx = [s.index_of(&self.zero)?, s.index_of(&self.one)?];
        Ok(DMatrix::from_fn(2, 2, |i, j| rho.matrix()[(idx[i], idx[j])]))
    }
}

/// Population of the logical subspace.
pub fn qubit_population(rho: &FockDensity, sub: &QubitSubspace) -> Result<f64> {
    let b = sub.block(rho)?;
    Ok(b[(0, 0)].re + b[(1, 1)].re)
}

/// Selected elements `⟨bra|ρ|ket⟩`.
pub fn density_elements(rho: &FockDensity, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<Vec<C64>> {
    pairs.iter().map(|(b, k)| rho.element(b, k)).collect()
}

/// Wigner function of `|m⟩⟨n|` at `(x, p)` for `m ≥ n`.
fn wigner_element(m: usize, n: usize, x: f64, p: f64, lag: &[f64]) -> C64 {
    let r2 = x * x + p * p;
    let k = m - n;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let pref = sign * (0.5 * (ln_factorial(n) - ln_factorial(m))).exp() * (-r2).exp() / std::f64::consts::PI;
    // (√2 (x − ip))^k
    let z = C64::new(x, -p) * std::f64::consts::SQRT_2;
    z.powu(k as u32) * pref * lag[n]
}

/// Wigner function `W(x, p)` of a single-mode density.
pub fn wigner_point(rho: &FockDensity, x: f64, p: f64) -> Result<f64> {
    if rho.space().modes() != 1 {
        return Err(Error::InvalidParameter("Wigner function needs a single mode".into()));
    }
    let n = rho.space().cutoff();
    let m = rho.matrix();
    let z = 2.0 * (x * x + p * p);
    let mut w = 0.0;
    for k in 0..n {
        let lag = laguerre(n - k, k as f64, z);
        for j in 0..n - k {
            let e = wigner_element(j + k, j, x, p, &lag);
            // ρ_{jk'} W_{|j+k⟩⟨j|} appears with coefficient ρ_{j+k, j}
            let rho_mn = m[(j + k, j)];
            w += if k == 0 { (rho_mn * e).re } else { 2.0 * (rho_mn * e).re };
        }
    }
    Ok(w)
}

/// Wigner function of `mode` on `grid × grid`; rows index `x`, columns `p`.
///
/// Other modes are traced out first. Fails when the grid does not reach
/// `±4σ` or its spacing exceeds `σ/2` for the mode's quadrature deviations.
pub fn wigner_grid(rho: &FockDensity, mode: usize, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
    let reduced;
    let rho = if rho.space().modes() == 1 {
        rho.space().check_mode(mode)?;
        rho
    } else {
        reduced = rho.partial_trace(&[mode])?;
        &reduced
    };
    let mo = moments_density(rho)?;
    let ev = mo.cov.symmetric_eigenvalues();
    let smax = ev.iter().cloned().fold(0.0, f64::max).sqrt();
    let smin = ev.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
    let reach = mo.mean.amax() + 4.0 * smax;
    if grid.half_width < reach {
        return Err(Error::GridCoverage(format!("half-width {} below {reach}", grid.half_width)));
    }
    if grid.spacing() > 0.5 * smin {
        return Err(Error::GridCoverage(format!("spacing {} too coarse for σ = {smin}", grid.spacing())));
    }
    let xs = grid.values();
    let mut out = DMatrix::zeros(xs.len(), xs.len());
    for (i, &x) in xs.iter().enumerate() {
        for (j, &p) in xs.iter().enumerate() {
            out[(i, j)] = wigner_point(rho, x, p)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wigner_of_coherent_state_is_displaced_gaussian() {
        let alpha = C64::new(0.6, -0.35);
        let rho = FockState::coherent(40, alpha).unwrap().to_density();
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        for &(x, p) in &[(0.0, 0.0), (0.9, -0.4), (-0.5, 0.8), (1.3, 0.2)] {
            let expect = (-(x - x0) * (x - x0) - (p - p0) * (p - p0)).exp() / PI;
            assert!((wigner_point(&rho, x, p).unwrap() - expect).abs() < 1e-12, "({x}, {p})");
        }
    }

    #[test]
    fn wigner_of_single_photon_is_negative_at_origin() {
        let rho = FockState::basis(FockSpace::new(1, 4).unwrap(), &[1]).unwrap().to_density();
        assert!((wigner_point(&rho, 0.0, 0.0).unwrap() + 1.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn wigner_grid_integrates_to_one() {
        let rho = FockState::squeezed_vacuum(30, 0.3, 0.5).unwrap().to_density();
        let grid = QuadratureGrid::new(6.0, 128).unwrap();
        let w = wigner_grid(&rho, 0, &grid).unwrap();
        let total: f64 = w.iter().sum::<f64>() * grid.spacing() * grid.spacing();
        assert!((total - rho.trace()).abs() < 1e-8);
        assert!(wigner_grid(&rho, 0, &QuadratureGrid::new(40.0, 64).unwrap()).is_err());
    }

    #[test]
    fn mixed_fidelity_reduces_to_overlap() {
        let a = FockState::coherent(20, C64::new(0.4, 0.1)).unwrap().normalized().unwrap();
        let b = FockState::squeezed_vacuum(20, 0.4, 1.0).unwrap().normalized().unwrap();
        let pp = fidelity(&a, &b).unwrap();
        let mm = fidelity(&a.to_density(), &b.to_density()).unwrap();
        assert!((pp - mm).abs() < 1e-10);
        assert!((trace_distance(&a, &a.to_density()).unwrap()).abs() < 1e-12);
        // pure states: D = √(1 − F)
        assert!((trace_distance(&a, &b).unwrap() - (1.0 - pp).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn dual_rail_population() {
        let space = FockSpace::new(2, 3).unwrap();
        let q = QubitSubspace::dual_rail();
        let psi = q.encode(space, C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap();
        let rho = psi.to_density();
        assert!((qubit_population(&rho, &q).unwrap() - 1.0).abs() < 1e-14);
        let el = density_elements(&rho, &[(vec![1, 0], vec![0, 1])]).unwrap();
        assert!((el[0] - C64::new(0.0, -0.48)).norm() < 1e-14);
    }
}
