use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Largest register dimension accepted by [`FockSpace::new`].
pub const MAX_DIM: usize = 1 << 23;

/// A register of `modes` oscillators, each truncated to `cutoff` levels.
///
/// Basis index of `|n_0, .., n_{M-1}⟩` is `Σ_j n_j N^{M-1-j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    modes: usize,
    cutoff: usize,
}

impl FockSpace {
    pub fn new(modes: usize, cutoff: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParameter("a register needs at least one mode".into()));
        }
        if cutoff == 0 {
            return Err(Error::InvalidParameter("cutoff must be positive".into()));
        }
        let mut dim: usize = 1;
        for _ in 0..modes {
            dim = dim
                .checked_mul(cutoff)
                .filter(|&d| d <= MAX_DIM)
                .ok_or_else(|| Error::InvalidParameter(format!("{cutoff}^{modes} exceeds the dimension limit")))?;
        }
        Ok(Self { modes, cutoff })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.modes as u32)
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            Err(Error::ModeOutOfRange { mode, modes: self.modes })
        } else {
            Ok(())
        }
    }

    /// Index stride of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.modes - 1 - mode) as u32)
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.modes];
        for j in (0..self.modes).rev() {
            d[j] = index % self.cutoff;
            index /= self.cutoff;
        }
        d
    }

    pub fn index_of(&self, occupation: &[usize]) -> Result<usize> {
        if occupation.len() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, got: occupation.len() });
        }
        let mut idx = 0;
        for &n in occupation {
            if n >= self.cutoff {
                return Err(Error::InvalidParameter(format!("occupation {n} ≥ cutoff {}", self.cutoff)));
            }
            idx = idx * self.cutoff + n;
        }
        Ok(idx)
    }

    /// Offsets of the local basis for a list of distinct modes (first listed
    /// mode most significant) and the base indices of every complementary
    /// configuration.
    pub(crate) fn local_layout(&self, modes: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut seen = vec![false; self.modes];
        for &m in modes {
            self.check_mode(m)?;
            if seen[m] {
                return Err(Error::InvalidParameter(format!("mode {m} listed twice")));
            }
            seen[m] = true;
        }
        let n = self.cutoff;
        let local_dim = n.pow(modes.len() as u32);
        let mut offsets = vec![0; local_dim];
        for (l, off) in offsets.iter_mut().enumerate() {
            let mut rem = l;
            for &m in modes.iter().rev() {
                *off += (rem % n) * self.stride(m);
                rem /= n;
            }
        }
        let rest: Vec<usize> = (0..self.modes).filter(|m| !seen[*m]).collect();
        let rest_dim = n.pow(rest.len() as u32);
        let mut bases = vec![0; rest_dim];
        for (b, base) in bases.iter_mut().enumerate() {
            let mut rem = b;
            for &m in rest.iter().rev() {
                *base += (rem % n) * self.stride(m);
                rem /= n;
            }
        }
        Ok((offsets, bases))
    }

    /// Applies a local operator on `modes` to an amplitude vector in place.
    pub(crate) fn apply_local(&self, amps: &mut [C64], modes: &[usize], op: &DMatrix<C64>) -> Result<()> {
        let (offsets, bases) = self.local_layout(modes)?;
        let ld = offsets.len();
        if op.nrows() != ld || op.ncols() != ld {
            return Err(Error::DimensionMismatch { expected: ld, got: op.nrows() });
        }
        if amps.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: amps.len() });
        }
        let mut buf = vec![C64::new(0.0, 0.0); ld];
        let mut out = vec![C64::new(0.0, 0.0); ld];
        for &b in &bases {
            for (v, &o) in buf.iter_mut().zip(&offsets) {
                *v = amps[b + o];
            }
            out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for c in 0..ld {
                let x = buf[c];
                if x.re == 0.0 && x.im == 0.0 {
                    continue;
                }
                let col = op.column(c);
                for (o, &e) in out.iter_mut().zip(col.iter()) {
                    *o += e * x;
                }
            }
            for (&v, &o) in out.iter().zip(&offsets) {
                amps[b + o] = v;
            }
        }
        Ok(())
    }

    /// Returns `A X A†` for a local operator `A` on `modes`.
    pub(crate) fn conjugate_local(&self, x: &DMatrix<C64>, modes: &[usize], op: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let d = self.dim();
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.nrows() });
        }
        let mut m = x.clone();
        for mut col in m.column_iter_mut() {
            self.apply_local(col.as_mut_slice(), modes, op)?;
        }
        let mut m = m.adjoint();
        for mut col in m.column_iter_mut() {
            self.apply_local(col.as_mut_slice(), modes, op)?;
        }
        Ok(m.adjoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_round_trip() {
        let s = FockSpace::new(3, 4).unwrap();
        for i in 0..s.dim() {
            assert_eq!(s.index_of(&s.digits(i)).unwrap(), i);
        }
        assert_eq!(s.index_of(&[1, 0, 0]).unwrap(), 16);
    }

    #[test]
    fn rejects_degenerate_spaces() {
        assert!(FockSpace::new(0, 3).is_err());
        assert!(FockSpace::new(2, 0).is_err());
        assert!(FockSpace::new(30, 10).is_err());
    }
}
