//! Homodyne, photon-counting and Bell measurements on the Fock backend.

use crate::fock::{gates, FockDensity, FockSpace, FockState};
use crate::fock::operator::expm_hermitian;
use crate::special::hermite_functions;
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Uniform outcome grid on `[−L, L]` with spacing `2L/(P−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub half_width: f64,
    pub points: usize,
}

/// Smallest accepted number of grid points.
pub const MIN_GRID_POINTS: usize = 64;

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Half-width of an automatic grid in units of the marginal standard deviation.
pub const GRID_SIGMAS: f64 = 6.0;

impl QuadratureGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!("grid half-width {half_width} must be positive")));
        }
        if points < MIN_GRID_POINTS || !points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid points {points} must be a power of two ≥ {MIN_GRID_POINTS}")));
        }
        Ok(Self { half_width, points })
    }

    /// Grid spanning `±6σ` of a marginal with standard deviation `std`.
    pub fn covering(std: f64, points: usize) -> Result<Self> {
        Self::new(GRID_SIGMAS * std, points)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let d = self.spacing();
        (0..self.points).map(|k| -self.half_width + d * k as f64).collect()
    }

    pub fn check(&self, x: f64) -> Result<()> {
        if x.abs() > self.half_width * (1.0 + 1e-12) || !x.is_finite() {
            Err(Error::OutsideGrid { outcome: x, half_width: self.half_width })
        } else {
            Ok(())
        }
    }

    /// Fails unless the grid spans at least `±6σ`.
    pub fn check_coverage(&self, std: f64) -> Result<()> {
        if self.half_width < GRID_SIGMAS * std * (1.0 - 1e-12) {
            Err(Error::GridCoverage(format!("half-width {} < {GRID_SIGMAS}σ = {}", self.half_width, GRID_SIGMAS * std)))
        } else {
            Ok(())
        }
    }
}

/// One measurement event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEntry {
    pub kind: String,
    pub mode: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    pub outcome: f64,
    pub density: f64,
}

/// Ordered measurement outcomes with the seed that produced them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub seed: Option<u64>,
    pub entries: Vec<MeasurementEntry>,
}

impl MeasurementRecord {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed: Some(seed), entries: Vec::new() }
    }

    pub fn push_homodyne(&mut self, mode: usize, angle: f64, outcome: f64, density: f64) {
        self.entries.push(MeasurementEntry { kind: "homodyne".into(), mode, angle: Some(angle), outcome, density });
    }

    pub fn push_count(&mut self, mode: usize, n: usize, probability: f64) {
        self.entries.push(MeasurementEntry { kind: "count".into(), mode, angle: None, outcome: n as f64, density: probability });
    }

    /// One JSON object per line; the first carries the seed.
    pub fn to_json_lines(&self) -> String {
        let mut s = serde_json::to_string(&serde_json::json!({ "seed": self.seed })).expect("seed header");
        s.push('\n');
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e).expect("entry is serializable"));
            s.push('\n');
        }
        s
    }

    pub fn from_json_lines(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: serde_json::Value =
            serde_json::from_str(lines.next().ok_or_else(|| Error::Format("empty record".into()))?).map_err(|e| Error::Format(e.to_string()))?;
        let seed = head.get("seed").and_then(|v| v.as_u64());
        let entries = lines.map(|l| serde_json::from_str(l).map_err(|e| Error::Format(e.to_string()))).collect::<Result<_>>()?;
        Ok(Self { seed, entries })
    }
}

/// Bra coefficients `⟨x_θ = x|n⟩ = e^{−inθ} φ_n(x)` for `n < len`.
pub fn quadrature_bra(len: usize, theta: f64, x: f64) -> Vec<C64> {
    hermite_functions(len, x).into_iter().enumerate().map(|(n, h)| C64::from_polar(h, -(n as f64) * theta)).collect()
}

/// Contracts `mode` with a bra vector, leaving the other modes.
fn contract_mode(state: &FockState, mode: usize, bra: &[C64]) -> Result<DVector<C64>> {
    let space = state.space();
    space.check_mode(mode)?;
    let n = space.cutoff();
    let stride = space.stride(mode);
    let outer = space.dim() / (stride * n);
    let amps = state.amplitudes();
    let mut out = DVector::from_element(outer * stride, C64::new(0.0, 0.0));
    for o in 0..outer {
        for k in 0..n {
            let w = bra[k];
            let base = (o * n + k) * stride;
            for i in 0..stride {
                out[o * stride + i] += w * amps[base + i];
            }
        }
    }
    Ok(out)
}

fn remaining_space(space: FockSpace) -> Result<Option<FockSpace>> {
    if space.modes() == 1 {
        Ok(None)
    } else {
        FockSpace::new(space.modes() - 1, space.cutoff()).map(Some)
    }
}

/// Result of a projective measurement on one mode.
#[derive(Debug, Clone)]
pub struct Projected<S> {
    /// normalized state of the remaining modes (`None` if nothing remains or
    /// the outcome has zero weight)
    pub state: Option<S>,
    /// outcome probability density (homodyne) or probability (counting)
    pub density: f64,
}

/// Projects `mode` onto `⟨x_θ = x|`.
pub fn homodyne_project(state: &FockState, mode: usize, theta: f64, x: f64, grid: &QuadratureGrid) -> Result<Projected<FockState>> {
    grid.check(x)?;
    let bra = quadrature_bra(state.space().cutoff(), theta, x);
    let v = contract_mode(state, mode, &bra)?;
    let density = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let st = match remaining_space(state.space())? {
        Some(sp) if density > 0.0 => Some(FockState::from_vector(sp, v / C64::new(density.sqrt(), 0.0))?),
        _ => None,
    };
    Ok(Projected { state: st, density })
}

/// Projects `mode` of a density operator onto `⟨x_θ = x|`.
pub fn homodyne_project_density(rho: &FockDensity, mode: usize, theta: f64, x: f64, grid: &QuadratureGrid) -> Result<Projected<FockDensity>> {
    grid.check(x)?;
    let space = rho.space();
    space.check_mode(mode)?;
    let n = space.cutoff();
    let bra = quadrature_bra(n, theta, x);
    let stride = space.stride(mode);
    let rd = space.dim() / n;
    let map = |r: usize, k: usize| (r / stride) * n * stride + k * stride + r % stride;
    let m = rho.matrix();
    let mut out = DMatrix::from_element(rd, rd, C64::new(0.0, 0.0));
    for j in 0..rd {
        for l in 0..n {
            let cl = bra[l].conj();
            let col = map(j, l);
            for i in 0..rd {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += bra[k] * m[(map(i, k), col)];
                }
                out[(i, j)] += acc * cl;
            }
        }
    }
    let density: f64 = out.diagonal().iter().map(|z| z.re).sum();
    let st = match remaining_space(space)? {
        Some(sp) if density > 0.0 => Some(FockDensity::from_matrix(sp, out / C64::new(density, 0.0))?),
        _ => None,
    };
    Ok(Projected { state: st, density })
}

/// Outcome density `⟨x_θ|ρ|x_θ⟩` of a single-mode density.
pub fn quadrature_density(rho: &DMatrix<C64>, theta: f64, x: f64) -> f64 {
    let w = quadrature_bra(rho.nrows(), theta, x);
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..w.len() {
        for n in 0..w.len() {
            acc += w[m] * rho[(m, n)] * w[n].conj();
        }
    }
    acc.re
}

/// Seeded homodyne sampler for one mode.
///
/// Outcomes are drawn from the discretized marginal on the grid and then
/// jittered uniformly within the chosen cell.
#[derive(Debug, Clone)]
pub struct HomodyneSampler {
    grid: QuadratureGrid,
    cdf: Vec<f64>,
    rng: ChaCha20Rng,
    seed: u64,
}

impl HomodyneSampler {
    pub fn new(reduced: &FockDensity, theta: f64, grid: QuadratureGrid, seed: u64) -> Result<Self> {
        if reduced.space().modes() != 1 {
            return Err(Error::InvalidParameter("sampler needs a single-mode density".into()));
        }
        let xs = grid.values();
        let mut cdf = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        for x in xs {
            acc += quadrature_density(reduced.matrix(), theta, x).max(0.0);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::DegenerateMarginal);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { grid, cdf, rng: ChaCha20Rng::seed_from_u64(seed), seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw(&mut self) -> f64 {
        let u: f64 = self.rng.gen();
        let k = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
        let d = self.grid.spacing();
        let centre = -self.grid.half_width + d * k as f64;
        let jitter: f64 = self.rng.gen_range(-0.5..0.5);
        (centre + jitter * d).clamp(-self.grid.half_width, self.grid.half_width)
    }
}

/// A single homodyne draw with its conditional state.
#[derive(Debug, Clone)]
pub struct HomodyneSample {
    pub outcome: f64,
    pub density: f64,
    pub state: Option<FockState>,
    pub seed: u64,
}

pub fn homodyne_sample(state: &FockState, mode: usize, theta: f64, grid: &QuadratureGrid, seed: u64) -> Result<HomodyneSample> {
    let reduced = state.to_density().partial_trace(&[mode])?;
    let mut s = HomodyneSampler::new(&reduced, theta, *grid, seed)?;
    let x = s.draw();
    let p = homodyne_project(state, mode, theta, x, grid)?;
    Ok(HomodyneSample { outcome: x, density: p.density, state: p.state, seed })
}

/// Projects `mode` onto `|n⟩`.
pub fn photon_count_project(state: &FockState, mode: usize, n: usize) -> Result<Projected<FockState>> {
    let cutoff = state.space().cutoff();
    if n >= cutoff {
        return Err(Error::InvalidParameter(format!("count {n} ≥ cutoff {cutoff}")));
    }
    let mut bra = vec![C64::new(0.0, 0.0); cutoff];
    bra[n] = C64::new(1.0, 0.0);
    let v = contract_mode(state, mode, &bra)?;
    let prob = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let st = match remaining_space(state.space())? {
        Some(sp) if prob > 0.0 => Some(FockState::from_vector(sp, v / C64::new(prob.sqrt(), 0.0))?),
        _ => None,
    };
    Ok(Projected { state: st, density: prob })
}

/// Beam splitter applied exactly, block by block in total photon number.
///
/// Input amplitudes `A[n1][n2]` with `n1 < d1`, `n2 < d2` map to an output of
/// size `(d1 + d2 − 1)²`, big enough to hold every photon.
#[derive(Debug, Clone)]
pub struct ExactBeamSplitter {
    /// `blocks[K][(n', n)]`: `|n, K−n⟩ → |n', K−n'⟩`
    blocks: Vec<DMatrix<C64>>,
}

impl ExactBeamSplitter {
    pub fn new(t: f64, max_total: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("transmissivity {t} outside [0, 1]")));
        }
        let theta = t.sqrt().acos();
        let mut blocks = Vec::with_capacity(max_total + 1);
        for k in 0..=max_total {
            // H = iθ(a1 a2† − a1† a2) restricted to n1 + n2 = k
            let mut h = DMatrix::from_element(k + 1, k + 1, C64::new(0.0, 0.0));
            for n in 0..=k {
                let m = k - n;
                if n > 0 {
                    h[(n - 1, n)] += C64::new(0.0, theta * ((n * (m + 1)) as f64).sqrt());
                }
                if m > 0 {
                    h[(n + 1, n)] -= C64::new(0.0, theta * (((n + 1) * m) as f64).sqrt());
                }
            }
            blocks.push(expm_hermitian(&h, 1.0, 1e-12)?);
        }
        Ok(Self { blocks })
    }

    pub fn max_total(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block(&self, total: usize) -> &DMatrix<C64> {
        &self.blocks[total]
    }

    /// Applies the splitter to a row-major `d1 × d2` amplitude table.
    pub fn apply(&self, amps: &[C64], d1: usize, d2: usize) -> Result<Vec<C64>> {
        if amps.len() != d1 * d2 {
            return Err(Error::DimensionMismatch { expected: d1 * d2, got: amps.len() });
        }
        let d = d1 + d2 - 1;
        if d1 + d2 - 2 > self.max_total() {
            return Err(Error::InvalidParameter("beam splitter blocks too small".into()));
        }
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for n in 0..d1 {
            for m in 0..d2 {
                let a = amps[n * d2 + m];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let k = n + m;
                let b = &self.blocks[k];
                for np in 0..=k {
                    out[np * d + (k - np)] += b[(np, n)] * a;
                }
            }
        }
        Ok(out)
    }
}

/// Applies an exact beam splitter on modes `(m1, m2)` and returns, for each
/// configuration of the remaining modes (in order), the enlarged two-mode
/// output table.
fn split_pair(state: &FockState, m1: usize, m2: usize, bs: &ExactBeamSplitter) -> Result<Vec<Vec<C64>>> {
    let space = state.space();
    let (offsets, bases) = space.local_layout(&[m1, m2])?;
    let n = space.cutoff();
    let amps = state.amplitudes();
    let mut out = Vec::with_capacity(bases.len());
    let mut local = vec![C64::new(0.0, 0.0); n * n];
    for &b in &bases {
        for (l, &o) in offsets.iter().enumerate() {
            local[l] = amps[b + o];
        }
        out.push(bs.apply(&local, n, n)?);
    }
    Ok(out)
}

/// CV Bell measurement: 50:50 beam splitter on `(m1, m2)`, then `x` on the
/// first output (outcome `u`) and `p` on the second (outcome `v`).
///
/// With the splitter convention used here `u = (x1 − x2)/√2` and
/// `v = (p1 + p2)/√2` in terms of the inputs.
pub fn bell_cv(state: &FockState, m1: usize, m2: usize, u: f64, v: f64, grid: &QuadratureGrid) -> Result<Projected<FockState>> {
    grid.check(u)?;
    grid.check(v)?;
    let space = state.space();
    if m1 == m2 {
        return Err(Error::InvalidParameter("Bell measurement needs two distinct modes".into()));
    }
    let n = space.cutoff();
    let d = 2 * n - 1;
    let bs = ExactBeamSplitter::new(0.5, d - 1)?;
    let fu = quadrature_bra(d, 0.0, u);
    let fv = quadrature_bra(d, std::f64::consts::FRAC_PI_2, v);
    let tables = split_pair(state, m1, m2, &bs)?;
    let rest: Vec<C64> = tables
        .iter()
        .map(|t| {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..d {
                let mut row = C64::new(0.0, 0.0);
                for b in 0..d {
                    row += fv[b] * t[a * d + b];
                }
                acc += fu[a] * row;
            }
            acc
        })
        .collect();
    let density = rest.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let st = if space.modes() > 2 && density > 0.0 {
        let sp = FockSpace::new(space.modes() - 2, n)?;
        Some(FockState::from_amplitudes(sp, rest.into_iter().map(|z| z / density.sqrt()).collect())?)
    } else {
        None
    };
    Ok(Projected { state: st, density })
}

/// DV Bell measurement on six rails `(1H, 1V, 2H, 2V, 3H, 3V)`.
///
/// Rails 1 hold one photon and rails 2, 3 hold an entangled pair. The pairs
/// `(1H, 2H)` and `(1V, 2V)` meet on 50:50 splitters and a coincidence is at
/// least one photon in each spatial output, regardless of polarization.
/// Returns the normalized state of rails 3 and the coincidence probability.
pub fn bell_dv_coincidence(state: &FockState) -> Result<(FockDensity, f64)> {
    let space = state.space();
    if space.modes() != 6 {
        return Err(Error::InvalidParameter(format!("expected six rails, got {}", space.modes())));
    }
    if space.cutoff() < 3 {
        return Err(Error::InvalidParameter("rails need cutoff ≥ 3".into()));
    }
    let mut off_sector = 0.0;
    for (i, a) in state.amplitudes().iter().enumerate() {
        let d = space.digits(i);
        if d[0] + d[1] != 1 || d[2] + d[3] + d[4] + d[5] != 2 {
            off_sector += a.norm_sqr();
        }
    }
    if off_sector > 1e-10 {
        return Err(Error::Sector(format!("weight {off_sector:e} outside the one-photon ⊗ two-photon sector")));
    }
    // every populated sector has at most two photons per splitter pair, below the cutoff
    let mut psi = gates::beamsplitter(space, 0, 2, 0.5)?.apply_state(state)?;
    psi = gates::beamsplitter(space, 1, 3, 0.5)?.apply_state(&psi)?;
    let mut amps = psi.into_amplitudes();
    for (i, a) in amps.iter_mut().enumerate() {
        let d = space.digits(i);
        if d[0] + d[1] == 0 || d[2] + d[3] == 0 {
            *a = C64::new(0.0, 0.0);
        }
    }
    let projected = FockState::from_vector(space, amps)?;
    let prob = projected.norm_sqr();
    if !(prob > 0.0) {
        return Err(Error::DegenerateMarginal);
    }
    let reduced = projected.to_density().partial_trace(&[4, 5])?.normalized()?;
    Ok((reduced, prob))
}
