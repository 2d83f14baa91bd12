//! Gaussian backend: first moments and covariance matrices.
//!
//! Vectors are ordered `(x0, p0, x1, p1, ...)`; the vacuum covariance is `I/2`.

use crate::fock::{gates, FockSpace, ModeOperator};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Smallest marginal variance accepted when conditioning.
pub const MIN_MARGINAL_VARIANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Gaussian unitaries. Each has a Fock counterpart via [`GaussianOp::to_fock`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GaussianOp {
    /// `exp((ζ* a² − ζ a†²)/2)`, `ζ = r e^{iφ}`
    Squeeze { mode: usize, r: f64, phi: f64 },
    /// `exp(iθ n̂)`
    Phase { mode: usize, theta: f64 },
    /// transmissivity `t`
    BeamSplit { m1: usize, m2: usize, t: f64 },
    /// `exp(α a† − α* a)`
    Displace { mode: usize, re: f64, im: f64 },
    /// `exp(r(a1†a2† − a1 a2))`
    TwoModeSqueeze { m1: usize, m2: usize, r: f64 },
    /// `exp(i g x1 x2)`
    ControlledPhase { m1: usize, m2: usize, g: f64 },
    /// `exp(i σ x²/2)`
    Shear { mode: usize, sigma: f64 },
    /// `exp(iπ n̂/2)`
    Fourier { mode: usize },
}

/// Affine symplectic map `ξ → S ξ + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    pub s: DMatrix<f64>,
    pub d: DVector<f64>,
}

/// Symplectic form `Ω` with blocks `[[0, 1], [−1, 0]]`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        o[(2 * j, 2 * j + 1)] = 1.0;
        o[(2 * j + 1, 2 * j)] = -1.0;
    }
    o
}

fn rot(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

impl GaussianOp {
    pub fn modes(&self) -> Vec<usize> {
        use GaussianOp::*;
        match *self {
            Squeeze { mode, .. } | Phase { mode, .. } | Displace { mode, .. } | Shear { mode, .. } | Fourier { mode } => vec![mode],
            BeamSplit { m1, m2, .. } | TwoModeSqueeze { m1, m2, .. } | ControlledPhase { m1, m2, .. } => vec![m1, m2],
        }
    }

    pub fn displace(mode: usize, alpha: C64) -> Self {
        GaussianOp::Displace { mode, re: alpha.re, im: alpha.im }
    }

    /// Local `2k × 2k` symplectic matrix and shift on the op's own modes.
    fn local(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        use GaussianOp::*;
        let one = |m: [[f64; 2]; 2]| DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]);
        Ok(match *self {
            Squeeze { r, phi, .. } => {
                let rt = one(rot(phi / 2.0));
                let d = DMatrix::from_diagonal(&DVector::from_vec(vec![(-r).exp(), r.exp()]));
                (&rt * d * rt.transpose(), DVector::zeros(2))
            }
            Phase { theta, .. } => (one(rot(theta)), DVector::zeros(2)),
            Fourier { .. } => (one(rot(std::f64::consts::FRAC_PI_2)), DVector::zeros(2)),
            Shear { sigma, .. } => (DMatrix::from_row_slice(2, 2, &[1.0, 0.0, sigma, 1.0]), DVector::zeros(2)),
            Displace { re, im, .. } => {
                let s2 = std::f64::consts::SQRT_2;
                (DMatrix::identity(2, 2), DVector::from_vec(vec![s2 * re, s2 * im]))
            }
            BeamSplit { t, m1, m2 } => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::InvalidParameter(format!("transmissivity {t} outside [0, 1]")));
                }
                distinct(m1, m2)?;
                let (a, b) = (t.sqrt(), (1.0 - t).sqrt());
                #[rustfmt::skip]
                let s = DMatrix::from_row_slice(4, 4, &[
                    a, 0.0, -b, 0.0,
                    0.0, a, 0.0, -b,
                    b, 0.0, a, 0.0,
                    0.0, b, 0.0, a,
                ]);
                (s, DVector::zeros(4))
            }
            TwoModeSqueeze { r, m1, m2 } => {
                distinct(m1, m2)?;
                let (c, s) = (r.cosh(), r.sinh());
                #[rustfmt::skip]
                let m = DMatrix::from_row_slice(4, 4, &[
                    c, 0.0, s, 0.0,
                    0.0, c, 0.0, -s,
                    s, 0.0, c, 0.0,
                    0.0, -s, 0.0, c,
                ]);
                (m, DVector::zeros(4))
            }
            ControlledPhase { g, m1, m2 } => {
                distinct(m1, m2)?;
                let mut m = DMatrix::identity(4, 4);
                m[(1, 2)] = g;
                m[(3, 0)] = g;
                (m, DVector::zeros(4))
            }
        })
    }

    /// Global symplectic transform on an `modes`-mode register.
    pub fn symplectic(&self, modes: usize) -> Result<SymplecticTransform> {
        let (ls, ld) = self.local()?;
        let support = self.modes();
        for &m in &support {
            if m >= modes {
                return Err(Error::ModeOutOfRange { mode: m, modes });
            }
        }
        let mut s = DMatrix::identity(2 * modes, 2 * modes);
        let mut d = DVector::zeros(2 * modes);
        let idx: Vec<usize> = support.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        for (a, &i) in idx.iter().enumerate() {
            d[i] = ld[a];
            for (b, &j) in idx.iter().enumerate() {
                s[(i, j)] = ls[(a, b)];
            }
        }
        Ok(SymplecticTransform { s, d })
    }

    /// The same unitary on a truncated Fock register.
    pub fn to_fock(&self, space: FockSpace) -> Result<ModeOperator> {
        use GaussianOp::*;
        match *self {
            Squeeze { mode, r, phi } => gates::squeeze(space, mode, r, phi),
            Phase { mode, theta } => gates::phase(space, mode, theta),
            BeamSplit { m1, m2, t } => gates::beamsplitter(space, m1, m2, t),
            Displace { mode, re, im } => gates::displace(space, mode, C64::new(re, im)),
            TwoModeSqueeze { m1, m2, r } => gates::two_mode_squeeze(space, m1, m2, r),
            ControlledPhase { m1, m2, g } => gates::controlled_phase(space, m1, m2, g),
            Shear { mode, sigma } => gates::shear(space, mode, sigma),
            Fourier { mode } => gates::fourier(space, mode),
        }
    }
}

fn distinct(a: usize, b: usize) -> Result<()> {
    if a == b {
        Err(Error::InvalidParameter(format!("two-mode gate needs distinct modes, got {a} twice")))
    } else {
        Ok(())
    }
}

impl SymplecticTransform {
    pub fn identity(modes: usize) -> Self {
        Self { s: DMatrix::identity(2 * modes, 2 * modes), d: DVector::zeros(2 * modes) }
    }

    pub fn modes(&self) -> usize {
        self.s.nrows() / 2
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &SymplecticTransform) -> SymplecticTransform {
        SymplecticTransform { s: &other.s * &self.s, d: &other.s * &self.d + &other.d }
    }

    /// `max |S Ω Sᵀ − Ω|`.
    pub fn symplectic_error(&self) -> f64 {
        let o = symplectic_form(self.modes());
        (&self.s * &o * self.s.transpose() - o).amax()
    }

    pub fn from_ops(modes: usize, ops: &[GaussianOp]) -> Result<Self> {
        let mut t = Self::identity(modes);
        for op in ops {
            t = t.then(&op.symplectic(modes)?);
        }
        Ok(t)
    }
}

#[derive(Serialize, Deserialize)]
struct GaussianDump {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() % 2 != 0 || mean.is_empty() {
            return Err(Error::InvalidParameter("mean vector must have even positive length".into()));
        }
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: cov.nrows() });
        }
        Ok(Self { mean, cov })
    }

    pub fn vacuum(modes: usize) -> Self {
        Self { mean: DVector::zeros(2 * modes), cov: DMatrix::identity(2 * modes, 2 * modes) * 0.5 }
    }

    pub fn coherent(alpha: C64) -> Self {
        let s2 = std::f64::consts::SQRT_2;
        Self { mean: DVector::from_vec(vec![s2 * alpha.re, s2 * alpha.im]), cov: DMatrix::identity(2, 2) * 0.5 }
    }

    pub fn squeezed_vacuum(r: f64, phi: f64) -> Self {
        Self::vacuum(1).evolve(&GaussianOp::Squeeze { mode: 0, r, phi }).expect("single-mode op")
    }

    pub fn thermal(nbar: f64) -> Self {
        Self { mean: DVector::zeros(2), cov: DMatrix::identity(2, 2) * (nbar + 0.5) }
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Checks symmetry and the uncertainty relation `V + iΩ/2 ≥ 0`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let asym = (&self.cov - self.cov.transpose()).amax();
        if asym > tol {
            return Err(Error::InvalidParameter(format!("covariance not symmetric ({asym:e})")));
        }
        let o = symplectic_form(self.modes());
        let h = DMatrix::from_fn(self.cov.nrows(), self.cov.ncols(), |i, j| C64::new(self.cov[(i, j)], 0.5 * o[(i, j)]));
        let min = h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::InvalidParameter(format!("covariance violates the uncertainty relation ({min:e})")));
        }
        Ok(())
    }

    pub fn apply(&self, t: &SymplecticTransform) -> Result<Self> {
        if t.modes() != self.modes() {
            return Err(Error::DimensionMismatch { expected: self.modes(), got: t.modes() });
        }
        Ok(Self { mean: &t.s * &self.mean + &t.d, cov: &t.s * &self.cov * t.s.transpose() })
    }

    pub fn evolve(&self, op: &GaussianOp) -> Result<Self> {
        self.apply(&op.symplectic(self.modes())?)
    }

    pub fn evolve_all(&self, ops: &[GaussianOp]) -> Result<Self> {
        ops.iter().try_fold(self.clone(), |s, op| s.evolve(op))
    }

    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let n = self.mean.len();
        let m = other.mean.len();
        let mut mean = DVector::zeros(n + m);
        mean.rows_mut(0, n).copy_from(&self.mean);
        mean.rows_mut(n, m).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(n + m, n + m);
        cov.view_mut((0, 0), (n, n)).copy_from(&self.cov);
        cov.view_mut((n, n), (m, m)).copy_from(&other.cov);
        GaussianState { mean, cov }
    }

    fn quadrature_indices(&self, keep: &[usize]) -> Result<Vec<usize>> {
        for &k in keep {
            if k >= self.modes() {
                return Err(Error::ModeOutOfRange { mode: k, modes: self.modes() });
            }
        }
        Ok(keep.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect())
    }

    /// Marginal on `keep`, in the listed order.
    pub fn reduce(&self, keep: &[usize]) -> Result<GaussianState> {
        if keep.is_empty() {
            return Err(Error::InvalidParameter("reduction must keep at least one mode".into()));
        }
        let idx = self.quadrature_indices(keep)?;
        let mean = DVector::from_fn(idx.len(), |i, _| self.mean[idx[i]]);
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cov[(idx[i], idx[j])]);
        Ok(GaussianState { mean, cov })
    }

    fn without(&self, mode: usize) -> Vec<usize> {
        (0..self.modes()).filter(|&m| m != mode).collect()
    }

    /// `1/√det(2V)`.
    pub fn purity(&self) -> f64 {
        1.0 / (&self.cov * 2.0).determinant().sqrt()
    }

    /// Conditions on outcome `q` of the quadrature `c · (x_j, p_j)` and
    /// removes mode `j`. Returns the state and the outcome density.
    pub fn condition(&self, mode: usize, c: [f64; 2], q: f64) -> Result<(GaussianState, f64)> {
        let (rest, vbc, var, mu) = self.split(mode, c)?;
        let resid = q - mu;
        let mut out = rest;
        out.mean += &vbc * (resid / var);
        out.cov -= &vbc * vbc.transpose() / var;
        let density = (-0.5 * resid * resid / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        Ok((out, density))
    }

    /// Homodyne conditioning on `x_θ = x cosθ + p sinθ`.
    pub fn condition_homodyne(&self, mode: usize, theta: f64, q: f64) -> Result<(GaussianState, f64)> {
        self.condition(mode, [theta.cos(), theta.sin()], q)
    }

    /// Measures `q = c · (x_j, p_j) + offset`, feeds it forward as
    /// `ξ_B → ξ_B + gains · q` on the remaining quadratures, and averages over
    /// the outcome. `gains` holds `(remaining-mode index, quadrature 0|1, gain)`.
    pub fn measure_feedforward(&self, mode: usize, c: [f64; 2], offset: f64, gains: &[(usize, usize, f64)]) -> Result<GaussianState> {
        let (rest, vbc, var, mu) = self.split(mode, c)?;
        let nb = rest.mean.len();
        let mut g = DVector::zeros(nb);
        for &(m, quad, gain) in gains {
            if 2 * m + quad >= nb || quad > 1 {
                return Err(Error::InvalidParameter(format!("feed-forward target ({m}, {quad}) out of range")));
            }
            g[2 * m + quad] += gain;
        }
        let mut out = rest;
        out.mean += &g * (mu + offset);
        out.cov += &g * vbc.transpose() + &vbc * g.transpose() + &g * g.transpose() * var;
        Ok(out)
    }

    /// Remaining state, `V_B,c`, `Var(q)` and `⟨q⟩` for a measurement on `mode`.
    fn split(&self, mode: usize, c: [f64; 2]) -> Result<(GaussianState, DVector<f64>, f64, f64)> {
        if mode >= self.modes() {
            return Err(Error::ModeOutOfRange { mode, modes: self.modes() });
        }
        if self.modes() < 2 {
            return Err(Error::InvalidParameter("cannot measure the only mode".into()));
        }
        let keep = self.without(mode);
        let rest = self.reduce(&keep)?;
        let bi = self.quadrature_indices(&keep)?;
        let (jx, jp) = (2 * mode, 2 * mode + 1);
        let vbc = DVector::from_fn(bi.len(), |i, _| c[0] * self.cov[(bi[i], jx)] + c[1] * self.cov[(bi[i], jp)]);
        let var = c[0] * c[0] * self.cov[(jx, jx)] + 2.0 * c[0] * c[1] * self.cov[(jx, jp)] + c[1] * c[1] * self.cov[(jp, jp)];
        if var < MIN_MARGINAL_VARIANCE {
            return Err(Error::SingularMarginal(var));
        }
        let mu = c[0] * self.mean[jx] + c[1] * self.mean[jp];
        Ok((rest, vbc, var, mu))
    }

    /// Moves mode `from` to position `to`, shifting the others.
    pub fn move_mode(&self, from: usize, to: usize) -> Result<GaussianState> {
        let n = self.modes();
        if from >= n || to >= n {
            return Err(Error::ModeOutOfRange { mode: from.max(to), modes: n });
        }
        let mut order: Vec<usize> = (0..n).filter(|&m| m != from).collect();
        order.insert(to, from);
        self.reduce(&order)
    }

    pub fn to_json(&self) -> String {
        let n = self.mean.len();
        let dump = GaussianDump {
            mean: self.mean.iter().cloned().collect(),
            cov: (0..n).map(|i| (0..n).map(|j| self.cov[(i, j)]).collect()).collect(),
        };
        serde_json::to_string(&dump).expect("gaussian dump is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: GaussianDump = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let n = dump.mean.len();
        if dump.cov.len() != n || dump.cov.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: dump.cov.len() });
        }
        Self::new(DVector::from_vec(dump.mean), DMatrix::from_fn(n, n, |i, j| dump.cov[i][j]))
    }

    /// CSV: first row the mean, then the covariance rows.
    pub fn to_csv(&self) -> String {
        let row = |v: Vec<f64>| v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(",");
        let n = self.mean.len();
        let mut s = row(self.mean.iter().cloned().collect());
        s.push('\n');
        for i in 0..n {
            s.push_str(&row((0..n).map(|j| self.cov[(i, j)]).collect()));
            s.push('\n');
        }
        s
    }
}

/// Fidelity between two single-mode Gaussian states.
pub fn fidelity(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.modes() != 1 || b.modes() != 1 {
        return Err(Error::InvalidParameter("Gaussian fidelity is implemented for single modes".into()));
    }
    let sum = a.cov() + b.cov();
    let delta = sum.determinant();
    let small = (4.0 * a.cov().determinant() - 1.0) * (4.0 * b.cov().determinant() - 1.0);
    let d = a.mean() - b.mean();
    let inv = sum.try_inverse().ok_or(Error::SingularMarginal(delta))?;
    let q = (d.transpose() * inv * &d)[(0, 0)];
    let small = small.max(0.0);
    Ok((-0.5 * q).exp() / ((delta + small).sqrt() - small.sqrt()))
}
