use super::FockSpace;
use crate::special;
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Pure state on a truncated register.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    space: FockSpace,
    amps: DVector<C64>,
}

/// Density operator on a truncated register.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    space: FockSpace,
    matrix: DMatrix<C64>,
}

#[derive(Serialize, Deserialize)]
struct StateDump {
    modes: usize,
    cutoff: usize,
    amplitudes: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct DensityDump {
    modes: usize,
    cutoff: usize,
    matrix: Vec<Vec<[f64; 2]>>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl FockState {
    pub fn vacuum(space: FockSpace) -> Self {
        let mut amps = DVector::from_element(space.dim(), zero());
        amps[0] = C64::new(1.0, 0.0);
        Self { space, amps }
    }

    pub fn basis(space: FockSpace, occupation: &[usize]) -> Result<Self> {
        let idx = space.index_of(occupation)?;
        let mut amps = DVector::from_element(space.dim(), zero());
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { space, amps })
    }

    pub fn from_amplitudes(space: FockSpace, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: amps.len() });
        }
        Ok(Self { space, amps: DVector::from_vec(amps) })
    }

    pub fn from_vector(space: FockSpace, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: amps.len() });
        }
        Ok(Self { space, amps })
    }

    /// Single-mode coherent state `|α⟩`, truncated (not renormalized).
    pub fn coherent(cutoff: usize, alpha: C64) -> Result<Self> {
        let space = FockSpace::new(1, cutoff)?;
        Self::from_amplitudes(space, special::coherent_amplitudes(cutoff, alpha))
    }

    /// Single-mode squeezed vacuum `S(r e^{iφ})|0⟩`, truncated.
    pub fn squeezed_vacuum(cutoff: usize, r: f64, phi: f64) -> Result<Self> {
        let space = FockSpace::new(1, cutoff)?;
        Self::from_amplitudes(space, special::squeezed_vacuum_amplitudes(cutoff, r, phi))
    }

    /// `Σ tanhⁿ r |n, n⟩ / cosh r` on two modes, truncated.
    pub fn two_mode_squeezed_vacuum(cutoff: usize, r: f64) -> Result<Self> {
        let space = FockSpace::new(2, cutoff)?;
        let mut s = Self::from_vector(space, DVector::from_element(space.dim(), zero()))?;
        for (n, c) in special::tmsv_coefficients(cutoff, r).into_iter().enumerate() {
            s.amps[n * cutoff + n] = C64::new(c, 0.0);
        }
        Ok(s)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amps
    }

    pub fn amplitude(&self, occupation: &[usize]) -> Result<C64> {
        Ok(self.amps[self.space.index_of(occupation)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm; fails on a zero vector.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Unnormalized(n));
        }
        self.amps /= C64::new(n.sqrt(), 0.0);
        Ok(n)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn inner(&self, other: &FockState) -> Result<C64> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!("{:?} vs {:?}", self.space, other.space)));
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn tensor(&self, other: &FockState) -> Result<FockState> {
        if self.space.cutoff() != other.space.cutoff() {
            return Err(Error::SpaceMismatch("tensor product needs equal cutoffs".into()));
        }
        let space = FockSpace::new(self.space.modes() + other.space.modes(), self.space.cutoff())?;
        let od = other.amps.len();
        let mut v = Vec::with_capacity(space.dim());
        for a in self.amps.iter() {
            for b in other.amps.iter() {
                v.push(a * b);
            }
        }
        debug_assert_eq!(v.len(), self.amps.len() * od);
        FockState::from_amplitudes(space, v)
    }

    /// Photon-number distribution of one mode.
    pub fn mode_populations(&self, mode: usize) -> Result<Vec<f64>> {
        self.space.check_mode(mode)?;
        let n = self.space.cutoff();
        let stride = self.space.stride(mode);
        let mut p = vec![0.0; n];
        for (i, a) in self.amps.iter().enumerate() {
            p[(i / stride) % n] += a.norm_sqr();
        }
        Ok(p)
    }

    /// Largest population found in the top Fock level of any mode.
    pub fn leakage(&self) -> f64 {
        let n = self.space.cutoff();
        (0..self.space.modes())
            .map(|m| self.mode_populations(m).map(|p| p[n - 1]).unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    pub fn to_density(&self) -> FockDensity {
        FockDensity { space: self.space, matrix: &self.amps * self.amps.adjoint() }
    }

    /// Re-expresses the state at another cutoff, dropping or zero-padding levels.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<FockState> {
        let space = FockSpace::new(self.space.modes(), cutoff)?;
        let mut out = DVector::from_element(space.dim(), zero());
        let keep = cutoff.min(self.space.cutoff());
        for (i, a) in self.amps.iter().enumerate() {
            let d = self.space.digits(i);
            if d.iter().all(|&k| k < keep) {
                out[space.index_of(&d)?] = *a;
            }
        }
        FockState::from_vector(space, out)
    }

    pub fn to_json(&self) -> String {
        let dump = StateDump {
            modes: self.space.modes(),
            cutoff: self.space.cutoff(),
            amplitudes: self.amps.iter().map(|a| [a.re, a.im]).collect(),
        };
        serde_json::to_string(&dump).expect("state dump is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: StateDump = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let space = FockSpace::new(dump.modes, dump.cutoff)?;
        Self::from_amplitudes(space, dump.amplitudes.iter().map(|a| C64::new(a[0], a[1])).collect())
    }
}

impl FockDensity {
    pub fn from_matrix(space: FockSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        Ok(Self { space, matrix })
    }

    pub fn vacuum(space: FockSpace) -> Self {
        FockState::vacuum(space).to_density()
    }

    /// Thermal state with mean photon number `nbar` on one mode.
    pub fn thermal(cutoff: usize, nbar: f64) -> Result<Self> {
        let space = FockSpace::new(1, cutoff)?;
        let q = nbar / (1.0 + nbar);
        let mut m = DMatrix::from_element(cutoff, cutoff, zero());
        let mut p = 1.0 / (1.0 + nbar);
        for n in 0..cutoff {
            m[(n, n)] = C64::new(p, 0.0);
            p *= q;
        }
        Self::from_matrix(space, m)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn element(&self, bra: &[usize], ket: &[usize]) -> Result<C64> {
        Ok(self.matrix[(self.space.index_of(bra)?, self.space.index_of(ket)?)])
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Divides by the trace; fails when the trace is not positive.
    pub fn normalize(&mut self) -> Result<f64> {
        let t = self.trace();
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Unnormalized(t));
        }
        self.matrix /= C64::new(t, 0.0);
        Ok(t)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.matrix.nrows();
        let mut e: f64 = 0.0;
        for i in 0..d {
            for j in 0..=i {
                e = e.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        e
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity to within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let h = self.hermiticity_error();
        if h > tol {
            return Err(Error::NonHermitian(h));
        }
        let t = self.trace();
        if (t - 1.0).abs() > tol {
            return Err(Error::Unnormalized(t));
        }
        let e = self.min_eigenvalue();
        if e < -tol {
            return Err(Error::InvalidParameter(format!("density has negative eigenvalue {e:e}")));
        }
        Ok(())
    }

    pub fn mode_populations(&self, mode: usize) -> Result<Vec<f64>> {
        self.space.check_mode(mode)?;
        let n = self.space.cutoff();
        let stride = self.space.stride(mode);
        let mut p = vec![0.0; n];
        for i in 0..self.matrix.nrows() {
            p[(i / stride) % n] += self.matrix[(i, i)].re;
        }
        Ok(p)
    }

    pub fn leakage(&self) -> f64 {
        let n = self.space.cutoff();
        (0..self.space.modes())
            .map(|m| self.mode_populations(m).map(|p| p[n - 1]).unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    /// Expectation `⟨ψ|ρ|ψ⟩`.
    pub fn overlap_pure(&self, psi: &FockState) -> Result<f64> {
        if self.space != psi.space() {
            return Err(Error::SpaceMismatch("overlap across spaces".into()));
        }
        let v = psi.amplitudes();
        Ok((v.adjoint() * &self.matrix * v)[(0, 0)].re)
    }

    /// Reduced density on `keep` (order preserved as listed).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<FockDensity> {
        if keep.is_empty() {
            return Err(Error::InvalidParameter("partial trace must keep at least one mode".into()));
        }
        let (offsets, bases) = self.space.local_layout(keep)?;
        let space = FockSpace::new(keep.len(), self.space.cutoff())?;
        let ld = offsets.len();
        let mut out = DMatrix::from_element(ld, ld, zero());
        for &b in &bases {
            for j in 0..ld {
                let cj = b + offsets[j];
                for i in 0..ld {
                    out[(i, j)] += self.matrix[(b + offsets[i], cj)];
                }
            }
        }
        FockDensity::from_matrix(space, out)
    }

    pub fn tensor(&self, other: &FockDensity) -> Result<FockDensity> {
        if self.space.cutoff() != other.space.cutoff() {
            return Err(Error::SpaceMismatch("tensor product needs equal cutoffs".into()));
        }
        let space = FockSpace::new(self.space.modes() + other.space.modes(), self.space.cutoff())?;
        FockDensity::from_matrix(space, self.matrix.kronecker(&other.matrix))
    }

    /// Re-expresses the density at another cutoff, dropping or zero-padding levels.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<FockDensity> {
        let space = FockSpace::new(self.space.modes(), cutoff)?;
        let keep = cutoff.min(self.space.cutoff());
        let map: Vec<Option<usize>> = (0..self.space.dim())
            .map(|i| {
                let d = self.space.digits(i);
                if d.iter().all(|&k| k < keep) {
                    space.index_of(&d).ok()
                } else {
                    None
                }
            })
            .collect();
        let mut out = DMatrix::from_element(space.dim(), space.dim(), zero());
        for (i, mi) in map.iter().enumerate() {
            let Some(a) = mi else { continue };
            for (j, mj) in map.iter().enumerate() {
                if let Some(b) = mj {
                    out[(*a, *b)] = self.matrix[(i, j)];
                }
            }
        }
        FockDensity::from_matrix(space, out)
    }

    pub fn to_json(&self) -> String {
        let d = self.matrix.nrows();
        let dump = DensityDump {
            modes: self.space.modes(),
            cutoff: self.space.cutoff(),
            matrix: (0..d).map(|i| (0..d).map(|j| [self.matrix[(i, j)].re, self.matrix[(i, j)].im]).collect()).collect(),
        };
        serde_json::to_string(&dump).expect("density dump is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: DensityDump = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let space = FockSpace::new(dump.modes, dump.cutoff)?;
        let d = space.dim();
        if dump.matrix.len() != d || dump.matrix.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: dump.matrix.len() });
        }
        let m = DMatrix::from_fn(d, d, |i, j| C64::new(dump.matrix[i][j][0], dump.matrix[i][j][1]));
        Self::from_matrix(space, m)
    }
}

impl From<&FockState> for FockDensity {
    fn from(s: &FockState) -> Self {
        s.to_density()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let s = FockState::coherent(8, C64::new(0.3, -0.7)).unwrap();
        let back = FockState::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        let rho = s.to_density();
        assert_eq!(rho, FockDensity::from_json(&rho.to_json()).unwrap());
    }

    #[test]
    fn partial_trace_of_product_returns_factor() {
        let a = FockState::coherent(5, C64::new(0.4, 0.1)).unwrap().normalized().unwrap();
        let b = FockState::squeezed_vacuum(5, 0.3, 0.0).unwrap().normalized().unwrap();
        let ab = a.tensor(&b).unwrap().to_density();
        let ra = ab.partial_trace(&[0]).unwrap();
        let rb = ab.partial_trace(&[1]).unwrap();
        assert!((ra.matrix() - a.to_density().matrix()).norm() < 1e-14);
        assert!((rb.matrix() - b.to_density().matrix()).norm() < 1e-14);
        let swapped = ab.partial_trace(&[1, 0]).unwrap();
        assert!((swapped.matrix() - b.tensor(&a).unwrap().to_density().matrix()).norm() < 1e-14);
    }

    #[test]
    fn leakage_reports_top_level() {
        let s = FockState::basis(FockSpace::new(2, 3).unwrap(), &[0, 2]).unwrap();
        assert_eq!(s.leakage(), 1.0);
        assert_eq!(FockState::vacuum(FockSpace::new(2, 3).unwrap()).leakage(), 0.0);
    }

    #[test]
    fn validation_catches_bad_trace() {
        let mut rho = FockDensity::vacuum(FockSpace::new(1, 3).unwrap());
        assert!(rho.validate(1e-12).is_ok());
        rho.matrix[(0, 0)] = C64::new(2.0, 0.0);
        assert!(rho.validate(1e-12).is_err());
    }
}
