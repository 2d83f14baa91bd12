use super::{FockDensity, FockSpace, FockState};
use crate::{Error, Result, C64};
use nalgebra::DMatrix;

/// Label of a single-mode ladder or quadrature operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Annihilation,
    Creation,
    Number,
    X,
    P,
}

/// An operator acting on a subset of modes of a register.
///
/// The local matrix lives on `N^k` dimensions for `k` support modes, with the
/// first support mode most significant. [`ModeOperator::to_dense`] embeds it
/// into the full register when that is affordable.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    space: FockSpace,
    modes: Vec<usize>,
    local: DMatrix<C64>,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Truncated annihilation operator on `n` levels.
pub fn annihilation(n: usize) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(n, n, c(0.0));
    for k in 1..n {
        m[(k - 1, k)] = c((k as f64).sqrt());
    }
    m
}

pub fn creation(n: usize) -> DMatrix<C64> {
    annihilation(n).transpose()
}

pub fn number(n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { c(i as f64) } else { c(0.0) })
}

pub fn quadrature_x(n: usize) -> DMatrix<C64> {
    (annihilation(n) + creation(n)) * c(std::f64::consts::FRAC_1_SQRT_2)
}

pub fn quadrature_p(n: usize) -> DMatrix<C64> {
    (creation(n) - annihilation(n)) * (I * std::f64::consts::FRAC_1_SQRT_2)
}

/// Exact matrix elements of `x̂^k` on the first `n` levels, computed in a
/// padded space so no truncation enters.
pub fn x_power(n: usize, k: u32) -> DMatrix<C64> {
    power_exact(&quadrature_x(n + k as usize), n, k)
}

/// Exact matrix elements of `p̂^k` on the first `n` levels.
pub fn p_power(n: usize, k: u32) -> DMatrix<C64> {
    power_exact(&quadrature_p(n + k as usize), n, k)
}

fn power_exact(big: &DMatrix<C64>, n: usize, k: u32) -> DMatrix<C64> {
    let mut acc = DMatrix::identity(big.nrows(), big.nrows());
    for _ in 0..k {
        acc = &acc * big;
    }
    acc.view((0, 0), (n, n)).into_owned()
}

/// Kronecker product of per-mode local matrices, first factor most significant.
pub fn kron(factors: &[&DMatrix<C64>]) -> DMatrix<C64> {
    let mut acc = DMatrix::from_element(1, 1, c(1.0));
    for f in factors {
        acc = acc.kronecker(*f);
    }
    acc
}

/// Largest deviation of `m` from Hermiticity.
pub fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `exp(-i t H)` for a Hermitian matrix via its eigendecomposition.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64, tol: f64) -> Result<DMatrix<C64>> {
    let err = hermiticity_error(h);
    if err > tol {
        return Err(Error::NonHermitian(err));
    }
    let sym = (h + h.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * C64::from_polar(1.0, -t * eig.eigenvalues[j]));
    Ok(phases * v.adjoint())
}

impl ModeOperator {
    pub fn local(space: FockSpace, modes: &[usize], matrix: DMatrix<C64>) -> Result<Self> {
        let (offsets, _) = space.local_layout(modes)?;
        if matrix.nrows() != offsets.len() || matrix.ncols() != offsets.len() {
            return Err(Error::DimensionMismatch { expected: offsets.len(), got: matrix.nrows() });
        }
        Ok(Self { space, modes: modes.to_vec(), local: matrix })
    }

    pub fn identity(space: FockSpace, mode: usize) -> Result<Self> {
        let n = space.cutoff();
        Self::local(space, &[mode], DMatrix::identity(n, n))
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn local_matrix(&self) -> &DMatrix<C64> {
        &self.local
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space, modes: self.modes.clone(), local: self.local.adjoint() }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { space: self.space, modes: self.modes.clone(), local: &self.local * z }
    }

    /// Local matrix re-expressed on a superset of the support.
    fn on_support(&self, support: &[usize]) -> Result<DMatrix<C64>> {
        let n = self.space.cutoff();
        let k = support.len();
        let dim = n.pow(k as u32);
        let pos: Vec<usize> = self
            .modes
            .iter()
            .map(|m| support.iter().position(|s| s == m).ok_or_else(|| Error::SpaceMismatch("support is not a superset".into())))
            .collect::<Result<_>>()?;
        let digits = |mut idx: usize| {
            let mut d = vec![0; k];
            for j in (0..k).rev() {
                d[j] = idx % n;
                idx /= n;
            }
            d
        };
        let mut out = DMatrix::from_element(dim, dim, c(0.0));
        for col in 0..dim {
            let dc = digits(col);
            let lc = pos.iter().fold(0, |acc, &p| acc * n + dc[p]);
            for row in 0..dim {
                let dr = digits(row);
                let spectator_ok = (0..k).all(|j| pos.contains(&j) || dr[j] == dc[j]);
                if !spectator_ok {
                    continue;
                }
                let lr = pos.iter().fold(0, |acc, &p| acc * n + dr[p]);
                out[(row, col)] = self.local[(lr, lc)];
            }
        }
        Ok(out)
    }

    fn union_support(&self, other: &Self) -> Result<Vec<usize>> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch("operators on different registers".into()));
        }
        let mut s = self.modes.clone();
        for m in &other.modes {
            if !s.contains(m) {
                s.push(*m);
            }
        }
        Ok(s)
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        let s = self.union_support(other)?;
        let m = self.on_support(&s)? * other.on_support(&s)?;
        Self::local(self.space, &s, m)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let s = self.union_support(other)?;
        let m = self.on_support(&s)? + other.on_support(&s)?;
        Self::local(self.space, &s, m)
    }

    /// Full `N^M × N^M` matrix.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        let all: Vec<usize> = (0..self.space.modes()).collect();
        self.on_support(&all)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermiticity_error(&self.local) <= tol
    }

    pub fn unitarity_error(&self) -> f64 {
        let d = self.local.nrows();
        (&self.local * self.local.adjoint() - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn apply_state(&self, state: &FockState) -> Result<FockState> {
        if state.space() != self.space {
            return Err(Error::SpaceMismatch("operator and state registers differ".into()));
        }
        let mut out = state.clone();
        self.space.apply_local(out.amplitudes_mut().as_mut_slice(), &self.modes, &self.local)?;
        Ok(out)
    }

    /// `A ρ A†`.
    pub fn apply_density(&self, rho: &FockDensity) -> Result<FockDensity> {
        if rho.space() != self.space {
            return Err(Error::SpaceMismatch("operator and density registers differ".into()));
        }
        let m = self.space.conjugate_local(rho.matrix(), &self.modes, &self.local)?;
        FockDensity::from_matrix(self.space, m)
    }

    pub fn expectation(&self, state: &FockState) -> Result<C64> {
        let applied = self.apply_state(state)?;
        state.inner(&applied)
    }

    pub fn expectation_density(&self, rho: &FockDensity) -> Result<C64> {
        if rho.space() != self.space {
            return Err(Error::SpaceMismatch("operator and density registers differ".into()));
        }
        // tr(A ρ) = Σ_j (A ρ)_{jj}, computed column by column
        let mut acc = c(0.0);
        let mut col = vec![c(0.0); self.space.dim()];
        for j in 0..self.space.dim() {
            col.copy_from_slice(rho.matrix().column(j).as_slice());
            self.space.apply_local(&mut col, &self.modes, &self.local)?;
            acc += col[j];
        }
        Ok(acc)
    }
}

/// Single-mode operator of the given kind on `mode`.
pub fn make_operator(space: FockSpace, mode: usize, kind: OperatorKind) -> Result<ModeOperator> {
    let n = space.cutoff();
    let m = match kind {
        OperatorKind::Annihilation => annihilation(n),
        OperatorKind::Creation => creation(n),
        OperatorKind::Number => number(n),
        OperatorKind::X => quadrature_x(n),
        OperatorKind::P => quadrature_p(n),
    };
    ModeOperator::local(space, &[mode], m)
}

/// `exp(-i t H)`; fails when `H` is not Hermitian to within `1e-10`.
pub fn unitary_from_generator(h: &ModeOperator, t: f64) -> Result<ModeOperator> {
    let u = expm_hermitian(&h.local, t, 1e-10)?;
    ModeOperator::local(h.space, &h.modes, u)
}

/// Apply an operator to a pure state or a density.
pub trait Apply: Sized {
    fn apply(&self, op: &ModeOperator) -> Result<Self>;
}

impl Apply for FockState {
    fn apply(&self, op: &ModeOperator) -> Result<Self> {
        op.apply_state(self)
    }
}

impl Apply for FockDensity {
    fn apply(&self, op: &ModeOperator) -> Result<Self> {
        op.apply_density(self)
    }
}

pub fn apply<S: Apply>(op: &ModeOperator, state: &S) -> Result<S> {
    state.apply(op)
}

/// Standard Gaussian gates on a truncated register.
///
/// Each gate carries the exact matrix elements `⟨i|U|j⟩` of the untruncated
/// unitary for all levels below the cutoff, so weight pushed past the cutoff
/// is dropped rather than reflected back. Gates that mix photon numbers are
/// therefore only unitary up to that lost weight.
pub mod gates {
    use super::*;
    use crate::fock::PositionBasis;

    fn a2(n: usize) -> DMatrix<C64> {
        let a = annihilation(n);
        &a * &a
    }

    /// Working size for exponentials whose columns spread upward.
    fn padded(n: usize) -> usize {
        2 * n + 40
    }

    /// Top-left `n × n` block of `exp(-iH(M))` on the padded size `M`.
    fn single_padded(space: FockSpace, mode: usize, h: impl Fn(usize) -> DMatrix<C64>) -> Result<ModeOperator> {
        let n = space.cutoff();
        let m = padded(n);
        let u = expm_hermitian(&h(m), 1.0, 1e-10)?;
        ModeOperator::local(space, &[mode], u.view((0, 0), (n, n)).into_owned())
    }

    /// Assembles a two-mode gate from blocks of `(k1, k2)` states that the
    /// generator keeps closed; `block` returns the exponentiated block.
    fn two_mode_blocks(space: FockSpace, m1: usize, m2: usize, sectors: Vec<Vec<(usize, usize)>>, block: impl Fn(&[(usize, usize)]) -> Result<DMatrix<C64>>) -> Result<ModeOperator> {
        let n = space.cutoff();
        let mut u = DMatrix::zeros(n * n, n * n);
        for states in sectors {
            let b = block(&states)?;
            for (i, &(a1, a2)) in states.iter().enumerate() {
                if a1 >= n || a2 >= n {
                    continue;
                }
                for (j, &(b1, b2)) in states.iter().enumerate() {
                    if b1 < n && b2 < n {
                        u[(a1 * n + a2, b1 * n + b2)] = b[(i, j)];
                    }
                }
            }
        }
        ModeOperator::local(space, &[m1, m2], u)
    }

    /// `R(θ) = exp(iθ n̂)`, so `a → e^{iθ} a`.
    pub fn phase(space: FockSpace, mode: usize, theta: f64) -> Result<ModeOperator> {
        let n = space.cutoff();
        let u = DMatrix::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, theta * i as f64) } else { c(0.0) });
        ModeOperator::local(space, &[mode], u)
    }

    /// `S(ζ) = exp((ζ* a² − ζ a†²)/2)`, `ζ = r e^{iφ}`.
    pub fn squeeze(space: FockSpace, mode: usize, r: f64, phi: f64) -> Result<ModeOperator> {
        let zeta = C64::from_polar(r, phi);
        single_padded(space, mode, |m| {
            let a2 = a2(m);
            (&a2 * zeta.conj() - a2.adjoint() * zeta) * (I * 0.5)
        })
    }

    /// Beam splitter of transmissivity `t`:
    /// `x1 → √t x1 − √(1−t) x2`, `x2 → √(1−t) x1 + √t x2`.
    /// Exact on every total-photon-number sector.
    pub fn beamsplitter(space: FockSpace, m1: usize, m2: usize, t: f64) -> Result<ModeOperator> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("transmissivity {t} outside [0, 1]")));
        }
        let n = space.cutoff();
        let theta = t.sqrt().acos();
        let sectors = (0..2 * n - 1).map(|total| (0..=total).map(|k| (k, total - k)).collect()).collect();
        two_mode_blocks(space, m1, m2, sectors, |states| {
            // iθ(a1 a2† − a1† a2) couples (k, N−k) to (k∓1, N−k±1)
            let d = states.len();
            let mut h = DMatrix::zeros(d, d);
            for k in 0..d - 1 {
                let amp = ((k + 1) as f64 * (d - 1 - k) as f64).sqrt() * theta;
                h[(k, k + 1)] = I * amp;
                h[(k + 1, k)] = -I * amp;
            }
            expm_hermitian(&h, 1.0, 1e-10)
        })
    }

    /// `D(α) = exp(α a† − α* a)` from closed-form matrix elements.
    pub fn displace(space: FockSpace, mode: usize, alpha: C64) -> Result<ModeOperator> {
        let n = space.cutoff();
        let d = crate::special::displacement_elements(alpha, n, n);
        ModeOperator::local(space, &[mode], DMatrix::from_row_slice(n, n, &d))
    }

    /// `exp(r(a1†a2† − a1 a2))`, exact on each `n1 − n2` sector up to the
    /// padded size.
    pub fn two_mode_squeeze(space: FockSpace, m1: usize, m2: usize, r: f64) -> Result<ModeOperator> {
        let n = space.cutoff();
        let m = padded(n);
        let sectors = (0..2 * n - 1)
            .map(|k| {
                let (s1, s2) = if k < n { (k, 0) } else { (0, k - n + 1) };
                (0..m - s1.max(s2)).map(|j| (s1 + j, s2 + j)).collect()
            })
            .collect();
        two_mode_blocks(space, m1, m2, sectors, |states: &[(usize, usize)]| {
            let d = states.len();
            let mut h = DMatrix::zeros(d, d);
            for j in 0..d - 1 {
                let (k1, k2) = states[j];
                let amp = (((k1 + 1) * (k2 + 1)) as f64).sqrt() * r;
                h[(j + 1, j)] = I * amp;
                h[(j, j + 1)] = -I * amp;
            }
            expm_hermitian(&h, 1.0, 1e-10)
        })
    }

    /// `C_Z(g) = exp(i g x1 x2)`, diagonal in a padded position basis.
    pub fn controlled_phase(space: FockSpace, m1: usize, m2: usize, g: f64) -> Result<ModeOperator> {
        let n = space.cutoff();
        let basis = PositionBasis::new(padded(n))?;
        let (v, x) = (basis.vectors(), basis.nodes());
        let m = x.len();
        // A[(i, j), k] = v_ik v_jk, so U = A E Aᵀ with E_kl = e^{i g x_k x_l}
        let a = DMatrix::from_fn(n * n, m, |ij, k| c(v[(ij / n, k)] * v[(ij % n, k)]));
        let e = DMatrix::from_fn(m, m, |k, l| C64::from_polar(1.0, g * x[k] * x[l]));
        let w = &a * e * a.transpose();
        // w is indexed ((i1, j1), (i2, j2)); the gate wants ((i1, i2), (j1, j2))
        let u = DMatrix::from_fn(n * n, n * n, |row, col| {
            let (i1, i2, j1, j2) = (row / n, row % n, col / n, col % n);
            w[(i1 * n + j1, i2 * n + j2)]
        });
        ModeOperator::local(space, &[m1, m2], u)
    }

    /// `exp(i σ x²/2)`: `p → p + σ x`.
    pub fn shear(space: FockSpace, mode: usize, sigma: f64) -> Result<ModeOperator> {
        let n = space.cutoff();
        let basis = PositionBasis::new(padded(n))?;
        let u = basis.operator(|x| C64::from_polar(1.0, 0.5 * sigma * x * x));
        ModeOperator::local(space, &[mode], u.view((0, 0), (n, n)).into_owned())
    }

    /// Fourier transform `F = exp(iπ n̂/2)`: `F† x F = −p`, `F† p F = x`.
    pub fn fourier(space: FockSpace, mode: usize) -> Result<ModeOperator> {
        phase(space, mode, std::f64::consts::FRAC_PI_2)
    }
}
