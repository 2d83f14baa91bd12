//! Special functions and closed-form amplitudes used throughout the crate.

use crate::C64;
use std::f64::consts::PI;

const RESCALE: f64 = 1e150;

/// Hermite functions `φ_0(x) .. φ_{len-1}(x)`, normalized so that
/// `∫ φ_n² dx = 1`.
///
/// Uses the three-term recurrence with a running exponent so that high orders
/// far from the origin do not underflow through `φ_0`.
pub fn hermite_functions(len: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if len == 0 {
        return out;
    }
    let log0 = -0.25 * PI.ln() - 0.5 * x * x;
    // values are stored as mantissa * exp(log_scale)
    let mut log_scale = log0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = log0.exp();
    for n in 1..len {
        let nf = n as f64;
        let next = (2.0 / nf).sqrt() * x * cur - ((nf - 1.0) / nf).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
        }
        out[n] = if cur == 0.0 { 0.0 } else { cur * log_scale.exp() };
    }
    out
}

/// Coherent-state amplitudes `e^{-|α|²/2} αⁿ/√n!` for `n < cutoff`.
pub fn coherent_amplitudes(cutoff: usize, alpha: C64) -> Vec<C64> {
    let mut out = Vec::with_capacity(cutoff);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..cutoff {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Amplitudes of `S(ζ)|0⟩` with `S(ζ) = exp((ζ* a² − ζ a†²)/2)`, `ζ = r e^{iφ}`.
///
/// `φ = 0` squeezes x, `φ = π` squeezes p.
pub fn squeezed_vacuum_amplitudes(cutoff: usize, r: f64, phi: f64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); cutoff];
    if cutoff == 0 {
        return out;
    }
    let ratio = -C64::from_polar(r.tanh(), phi);
    let mut c = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    out[0] = c;
    let mut k = 1;
    while 2 * k < cutoff {
        let kf = k as f64;
        c *= ratio * ((2.0 * kf - 1.0) / (2.0 * kf)).sqrt();
        out[2 * k] = c;
        k += 1;
    }
    out
}

/// Schmidt coefficients `tanhⁿ r / cosh r` of the two-mode squeezed vacuum
/// generated by `exp(r(a1†a2† − a1 a2))`.
pub fn tmsv_coefficients(cutoff: usize, r: f64) -> Vec<f64> {
    let lambda = r.tanh();
    let mut c = 1.0 / r.cosh();
    let mut out = Vec::with_capacity(cutoff);
    for _ in 0..cutoff {
        out.push(c);
        c *= lambda;
    }
    out
}

/// Exact matrix elements `⟨m|D(α)|n⟩` for `m < rows`, `n < cols`,
/// returned row-major as `out[m * cols + n]`.
///
/// Uses the closed form `√(n!/m!) α^{m−n} e^{−|α|²/2} L_n^{(m−n)}(|α|²)`
/// (and its mirror for `m < n`), evaluated one diagonal at a time, with the
/// prefactor in the log domain. No truncation of the oscillator enters.
pub fn displacement_elements(alpha: C64, rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); rows * cols];
    displacement_rows_into(alpha, rows, cols, &mut out);
    out
}

pub(crate) fn displacement_rows_into(alpha: C64, rows: usize, cols: usize, out: &mut [C64]) {
    out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    if rows == 0 || cols == 0 {
        return;
    }
    let z = alpha.norm_sqr();
    if z == 0.0 {
        for k in 0..rows.min(cols) {
            out[k * cols + k] = C64::new(1.0, 0.0);
        }
        return;
    }
    let ln_abs = 0.5 * z.ln();
    let theta = alpha.arg();
    let mut lag = Vec::with_capacity(rows.min(cols));
    // diagonal k at offset `j`: prefactor P_j = e^{−z/2} √(j!/(j+k)!) |α|^k,
    // with P_{j+1} = P_j √((j+1)/(j+1+k))
    let mut diagonal = |k: usize, len: usize, phase: C64, out: &mut [C64], at: &dyn Fn(usize) -> usize| {
        laguerre_into(len, k as f64, z, &mut lag);
        let mut pref = (-0.5 * z + k as f64 * ln_abs - 0.5 * ln_factorial(k)).exp();
        for j in 0..len {
            out[at(j)] = phase * (pref * lag[j]);
            pref *= ((j + 1) as f64 / (j + 1 + k) as f64).sqrt();
        }
    };
    for k in 0..rows {
        let len = cols.min(rows - k);
        if len > 0 {
            let phase = C64::from_polar(1.0, k as f64 * theta);
            diagonal(k, len, phase, out, &|n| (n + k) * cols + n);
        }
    }
    let theta_up = std::f64::consts::PI - theta;
    for k in 1..cols {
        let len = rows.min(cols - k);
        if len > 0 {
            let phase = C64::from_polar(1.0, k as f64 * theta_up);
            diagonal(k, len, phase, out, &|m| m * cols + m + k);
        }
    }
}

/// Generalized Laguerre polynomials `L_0^{(k)}(z) .. L_{len-1}^{(k)}(z)`.
pub fn laguerre(len: usize, k: f64, z: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    laguerre_into(len, k, z, &mut out);
    out
}

fn laguerre_into(len: usize, k: f64, z: f64, out: &mut Vec<f64>) {
    out.clear();
    if len == 0 {
        return;
    }
    out.push(1.0);
    if len > 1 {
        out.push(1.0 + k - z);
    }
    for j in 1..len.saturating_sub(1) {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - z) * out[j] - (jf + k) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
}

/// Natural log of `n!`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else if n < 64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        // Stirling series, accurate to ~1e-15 relative here
        let x = n as f64 + 1.0;
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3)) + 1.0 / (1260.0 * x.powi(5))
    }
}

/// Physicists' Hermite polynomial `H_n(x)` by recurrence (small `n` only).
pub fn hermite_poly(n: usize, x: f64) -> f64 {
    let mut h0 = 1.0;
    if n == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_hermite_function(n: usize, x: f64) -> f64 {
        let norm = (2f64.powi(n as i32) * ln_factorial(n).exp() * PI.sqrt()).sqrt();
        hermite_poly(n, x) * (-0.5 * x * x).exp() / norm
    }

    #[test]
    fn hermite_functions_match_explicit_polynomials() {
        for &x in &[-3.1, -0.4, 0.0, 0.7, 2.5] {
            let phi = hermite_functions(12, x);
            for n in 0..12 {
                assert!((phi[n] - direct_hermite_function(n, x)).abs() < 1e-12, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn hermite_functions_are_normalized() {
        let dx = 0.01;
        let mut acc = vec![0.0; 40];
        let mut x = -15.0;
        while x <= 15.0 {
            for (a, v) in acc.iter_mut().zip(hermite_functions(40, x)) {
                *a += v * v * dx;
            }
            x += dx;
        }
        for a in acc {
            assert!((a - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hermite_functions_survive_far_from_origin() {
        // turning point √(2n+1) ≈ 44.7 for n = 1000; value is O(0.1)
        let phi = hermite_functions(1001, 44.0);
        assert!(phi[1000].abs() > 1e-3 && phi[1000].is_finite());
        let mut norm = 0.0;
        let dx = 0.002;
        let mut x = 40.0;
        while x < 50.0 {
            let v = hermite_functions(1001, x)[1000];
            norm += v * v * dx;
            x += dx;
        }
        // the tail towards the origin carries the rest of the weight
        assert!(norm > 0.05 && norm < 1.0);
    }

    #[test]
    fn squeezed_vacuum_matches_closed_form() {
        let r = 0.6;
        let phi = 0.3;
        let amps = squeezed_vacuum_amplitudes(30, r, phi);
        for k in 0..15 {
            let lnv = 0.5 * ln_factorial(2 * k) - k as f64 * 2f64.ln() - ln_factorial(k);
            let expect = (-C64::from_polar(r.tanh(), phi)).powu(k as u32) * lnv.exp() / r.cosh().sqrt();
            assert!((amps[2 * k] - expect).norm() < 1e-13);
            assert_eq!(amps[2 * k + 1], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn displacement_vacuum_column_is_coherent_state() {
        let alpha = C64::new(0.8, -0.5);
        let d = displacement_elements(alpha, 25, 4);
        let coh = coherent_amplitudes(25, alpha);
        for m in 0..25 {
            assert!((d[m * 4] - coh[m]).norm() < 1e-13);
        }
    }

    #[test]
    fn displacement_rows_are_unitary_for_large_argument() {
        // rows m < 20 of D(α) with |α| = 25 need columns far above the cutoff
        let alpha = C64::from_polar(25.0, -0.8);
        let cols = 1800;
        let d = displacement_elements(alpha, 20, cols);
        for m in 0..20 {
            let norm: f64 = (0..cols).map(|n| d[m * cols + n].norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10, "row {m}: {norm}");
        }
        for m in 0..20 {
            for mp in 0..m {
                let ov: C64 = (0..cols).map(|n| d[m * cols + n] * d[mp * cols + n].conj()).sum();
                assert!(ov.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn displacement_matches_truncated_exponential() {
        use crate::fock::{gates, FockSpace};
        let alpha = C64::new(-0.6, 0.9);
        let space = FockSpace::new(1, 80).unwrap();
        let u = gates::displace(space, 0, alpha).unwrap();
        let d = displacement_elements(alpha, 15, 15);
        for m in 0..15 {
            for n in 0..15 {
                assert!((d[m * 15 + n] - u.local_matrix()[(m, n)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn laguerre_low_orders() {
        let l = laguerre(4, 1.0, 0.5);
        assert!((l[2] - (0.5 * 0.25 - 3.0 * 0.5 + 3.0)).abs() < 1e-14);
    }
}
