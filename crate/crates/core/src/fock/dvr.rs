use crate::special::hermite_functions;
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};

/// Eigenbasis of the truncated position operator on `W` levels.
///
/// Functions of `x̂` are applied diagonally in this basis, so every such
/// function commutes exactly with every other even after truncation. The
/// nodes are the roots of `H_W` and the eigenvectors are normalized Hermite
/// function samples at those roots.
#[derive(Debug, Clone)]
pub struct PositionBasis {
    nodes: Vec<f64>,
    /// column `j` is the eigenvector for `nodes[j]`
    vectors: DMatrix<f64>,
    /// `√w_j`: a function `f` in the span of the first `W` levels has node
    /// amplitudes exactly `f(x_j) √w_j`
    weights: Vec<f64>,
}

/// Eigenvalues of the symmetric tridiagonal matrix with zero diagonal and
/// off-diagonal `off[k]` (between rows `k` and `k+1`), by Sturm bisection.
fn tridiagonal_eigenvalues(off: &[f64]) -> Vec<f64> {
    let n = off.len() + 1;
    let bound = off.iter().fold(0.0f64, |m, &b| m.max(b)) * 2.0 + 1.0;
    // number of eigenvalues strictly below `x`
    let count = |x: f64| -> usize {
        let mut c = 0;
        let mut d = -x;
        if d < 0.0 {
            c += 1;
        }
        for &b in off {
            let prev = if d == 0.0 { f64::MIN_POSITIVE } else { d };
            d = -x - b * b / prev;
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

impl PositionBasis {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidParameter("cutoff must be positive".into()));
        }
        let off: Vec<f64> = (1..cutoff).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let nodes = tridiagonal_eigenvalues(&off);
        let mut vectors = DMatrix::zeros(cutoff, cutoff);
        let mut weights = Vec::with_capacity(cutoff);
        for (j, &y) in nodes.iter().enumerate() {
            let phi = hermite_functions(cutoff, y);
            let norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (n, v) in phi.iter().enumerate() {
                vectors[(n, j)] = v / norm;
            }
            weights.push(1.0 / norm);
        }
        Ok(Self { nodes, vectors, weights })
    }

    pub fn cutoff(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Fock amplitudes of the wavefunction `f`, exact when `f` lies in the
    /// span of the first `W` levels and a projection otherwise.
    pub fn from_samples(&self, f: impl Fn(f64) -> C64) -> DVector<C64> {
        let nodes = DVector::from_iterator(self.cutoff(), self.nodes.iter().zip(&self.weights).map(|(&y, &w)| f(y) * w));
        self.from_nodes(&nodes)
    }

    /// Fock amplitudes → node amplitudes.
    pub fn to_nodes(&self, amps: &DVector<C64>) -> DVector<C64> {
        let w = self.cutoff();
        let mut out = DVector::from_element(w, C64::new(0.0, 0.0));
        for j in 0..w {
            let col = self.vectors.column(j);
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..w {
                acc += amps[n] * col[n];
            }
            out[j] = acc;
        }
        out
    }

    /// Node amplitudes → Fock amplitudes.
    pub fn from_nodes(&self, nodes: &DVector<C64>) -> DVector<C64> {
        let w = self.cutoff();
        let mut out = DVector::from_element(w, C64::new(0.0, 0.0));
        for j in 0..w {
            let z = nodes[j];
            if z.re == 0.0 && z.im == 0.0 {
                continue;
            }
            let col = self.vectors.column(j);
            for n in 0..w {
                out[n] += z * col[n];
            }
        }
        out
    }

    /// `f(x̂)|ψ⟩`.
    pub fn apply_fn(&self, amps: &DVector<C64>, f: impl Fn(f64) -> C64) -> DVector<C64> {
        let mut nodes = self.to_nodes(amps);
        for (z, &y) in nodes.iter_mut().zip(&self.nodes) {
            *z *= f(y);
        }
        self.from_nodes(&nodes)
    }

    /// Matrix of `f(x̂)` in the Fock basis.
    pub fn operator(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let w = self.cutoff();
        let v = self.vectors.map(|x| C64::new(x, 0.0));
        let d = DMatrix::from_fn(w, w, |i, j| if i == j { f(self.nodes[i]) } else { C64::new(0.0, 0.0) });
        &v * d * v.transpose()
    }
}
