use super::operator::{annihilation, creation, kron, ModeOperator};
use super::{FockDensity, FockSpace, FockState};
use crate::{Result, C64, LEAKAGE_WARNING};
use nalgebra::{DMatrix, DVector};

/// First and second quadrature moments of a Fock-space state.
#[derive(Debug, Clone)]
pub struct Moments {
    /// `(⟨x0⟩, ⟨p0⟩, ⟨x1⟩, ...)`
    pub mean: DVector<f64>,
    /// symmetrized covariance in the same ordering
    pub cov: DMatrix<f64>,
    /// largest top-level population over all modes
    pub leakage: f64,
}

impl Moments {
    pub fn leakage_warning(&self) -> bool {
        self.leakage > LEAKAGE_WARNING
    }
}

/// Source of expectation values for local operators.
trait Expect {
    fn space(&self) -> FockSpace;
    fn expect(&self, op: &ModeOperator) -> Result<C64>;
    fn leakage(&self) -> f64;
}

impl Expect for FockState {
    fn space(&self) -> FockSpace {
        FockState::space(self)
    }
    fn expect(&self, op: &ModeOperator) -> Result<C64> {
        op.expectation(self)
    }
    fn leakage(&self) -> f64 {
        FockState::leakage(self)
    }
}

impl Expect for FockDensity {
    fn space(&self) -> FockSpace {
        FockDensity::space(self)
    }
    fn expect(&self, op: &ModeOperator) -> Result<C64> {
        op.expectation_density(self)
    }
    fn leakage(&self) -> f64 {
        FockDensity::leakage(self)
    }
}

/// Moments from normal-ordered `⟨a_j⟩`, `⟨a_j a_k⟩`, `⟨a_j† a_k⟩`.
///
/// The truncated ladder operators have exact matrix elements for these
/// products, so the only error is the state's own support near the cutoff.
fn moments_of<S: Expect>(s: &S) -> Result<Moments> {
    let space = s.space();
    let m = space.modes();
    let n = space.cutoff();
    let a = annihilation(n);
    let ad = creation(n);
    let mut first = vec![C64::new(0.0, 0.0); m];
    for j in 0..m {
        first[j] = s.expect(&ModeOperator::local(space, &[j], a.clone())?)?;
    }
    let mut aa = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
    let mut ada = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
    for j in 0..m {
        aa[(j, j)] = s.expect(&ModeOperator::local(space, &[j], &a * &a)?)?;
        ada[(j, j)] = s.expect(&ModeOperator::local(space, &[j], &ad * &a)?)?;
        for k in j + 1..m {
            let v = s.expect(&ModeOperator::local(space, &[j, k], kron(&[&a, &a]))?)?;
            aa[(j, k)] = v;
            aa[(k, j)] = v;
            let w = s.expect(&ModeOperator::local(space, &[j, k], kron(&[&ad, &a]))?)?;
            ada[(j, k)] = w;
            ada[(k, j)] = w.conj();
        }
    }
    let s2 = std::f64::consts::SQRT_2;
    let mut mean = DVector::zeros(2 * m);
    for j in 0..m {
        mean[2 * j] = s2 * first[j].re;
        mean[2 * j + 1] = s2 * first[j].im;
    }
    let mut cov = DMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        for k in 0..m {
            let d = if j == k { 0.5 } else { 0.0 };
            let xx = aa[(j, k)].re + ada[(j, k)].re + d;
            let pp = -aa[(j, k)].re + ada[(j, k)].re + d;
            let xp = aa[(j, k)].im + ada[(j, k)].im;
            cov[(2 * j, 2 * k)] = xx - mean[2 * j] * mean[2 * k];
            cov[(2 * j + 1, 2 * k + 1)] = pp - mean[2 * j + 1] * mean[2 * k + 1];
            cov[(2 * j, 2 * k + 1)] = xp - mean[2 * j] * mean[2 * k + 1];
            cov[(2 * k + 1, 2 * j)] = cov[(2 * j, 2 * k + 1)];
        }
    }
    Ok(Moments { mean, cov, leakage: s.leakage() })
}

pub fn moments(state: &FockState) -> Result<Moments> {
    moments_of(state)
}

pub fn moments_density(rho: &FockDensity) -> Result<Moments> {
    moments_of(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::operator::gates;

    #[test]
    fn coherent_state_moments() {
        let alpha = C64::new(0.7, -0.4);
        let s = FockState::coherent(30, alpha).unwrap();
        let mo = moments(&s).unwrap();
        assert!((mo.mean[0] - 2f64.sqrt() * 0.7).abs() < 1e-12);
        assert!((mo.mean[1] + 2f64.sqrt() * 0.4).abs() < 1e-12);
        assert!((mo.cov[(0, 0)] - 0.5).abs() < 1e-10);
        assert!((mo.cov[(1, 1)] - 0.5).abs() < 1e-10);
        assert!(mo.cov[(0, 1)].abs() < 1e-10);
    }

    #[test]
    fn squeezed_vacuum_variances() {
        let r = 0.4;
        let x_sq = moments(&FockState::squeezed_vacuum(40, r, 0.0).unwrap()).unwrap();
        assert!((x_sq.cov[(0, 0)] - 0.5 * (-2.0 * r).exp()).abs() < 1e-10);
        assert!((x_sq.cov[(1, 1)] - 0.5 * (2.0 * r).exp()).abs() < 1e-10);
        let p_sq = moments(&FockState::squeezed_vacuum(40, r, std::f64::consts::PI).unwrap()).unwrap();
        assert!((p_sq.cov[(1, 1)] - 0.5 * (-2.0 * r).exp()).abs() < 1e-10);
    }

    #[test]
    fn tmsv_correlations() {
        let r = 0.5;
        let s = FockState::two_mode_squeezed_vacuum(40, r).unwrap();
        let mo = moments(&s).unwrap();
        let sh = 0.5 * (2.0 * r).sinh();
        assert!((mo.cov[(0, 2)] - sh).abs() < 1e-10);
        assert!((mo.cov[(1, 3)] + sh).abs() < 1e-10);
        let rho = moments_density(&s.to_density()).unwrap();
        assert!((rho.cov.clone() - mo.cov).amax() < 1e-12);
    }

    #[test]
    fn leakage_flag() {
        let space = FockSpace::new(1, 4).unwrap();
        let top = FockState::basis(space, &[3]).unwrap();
        assert!(moments(&top).unwrap().leakage_warning());
        let p = gates::phase(space, 0, 0.2).unwrap();
        assert!(!moments(&p.apply_state(&FockState::vacuum(space)).unwrap()).unwrap().leakage_warning());
    }
}
