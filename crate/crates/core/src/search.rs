//! Factored search primitives for Kronecker-structured beams.
//!
//! For a UPA, every candidate beam is c_v ⊗ c_h, so the inner product with a
//! channel vector factors through the reshaped channel: with h arranged as an
//! m_v x m_h matrix H̄ (row i holds antennas i*m_h..(i+1)*m_h),
//!
//!   (c_v ⊗ c_h)^H h = c_v^H (H̄ conj(c_h)).
//!
//! Evaluating all (q_v, q_h) pairs is then two small matrix products instead
//! of Q_v * Q_h full-length dot products.

use num_complex::Complex64 as C64;

use crate::channel::{ChannelBlock, UpaGeometry};
use crate::codebooks::DftCodebook;

/// All-pairs inner products (c_v ⊗ c_h)^H x, indexed `qv * q_h_len + qh`.
pub fn pair_inner_products(
    x: &[C64],
    geom: &UpaGeometry,
    cols_v: &[Vec<C64>],
    cols_h: &[Vec<C64>],
) -> Vec<C64> {
    let (mv, mh) = (geom.m_v, geom.m_h);
    debug_assert_eq!(x.len(), mv * mh);
    let qv = cols_v.len();
    let qh = cols_h.len();
    // t[i * qh + j] = sum_k conj(ch_j[k]) x[i*mh + k]
    let mut t = vec![C64::new(0.0, 0.0); mv * qh];
    for i in 0..mv {
        let row = &x[i * mh..(i + 1) * mh];
        for (j, ch) in cols_h.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in ch.iter().zip(row) {
                acc += a.conj() * b;
            }
            t[i * qh + j] = acc;
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); qv * qh];
    for (iv, cv) in cols_v.iter().enumerate() {
        for j in 0..qh {
            let mut acc = C64::new(0.0, 0.0);
            for (i, a) in cv.iter().enumerate() {
                acc += a.conj() * t[i * qh + j];
            }
            out[iv * qh + j] = acc;
        }
    }
    out
}

/// Index of the pair maximizing |(c_v ⊗ c_h)^H h|²; ties resolve to the
/// lowest (q_v, q_h) in lexicographic order.
pub fn dominant_pair_index(
    h: &[C64],
    geom: &UpaGeometry,
    cb_v: &DftCodebook,
    cb_h: &DftCodebook,
) -> (usize, usize) {
    let table = pair_inner_products(h, geom, cb_v.codewords(), cb_h.codewords());
    let qh = cb_h.len();
    let mut best = (0usize, 0usize);
    let mut best_gain = -1.0f64;
    for (flat, v) in table.iter().enumerate() {
        let gain = v.norm_sqr();
        if gain > best_gain {
            best_gain = gain;
            best = (flat / qh, flat % qh);
        }
    }
    best
}

/// Per-candidate block statistics against a fixed companion beam.
///
/// For every candidate pair c (columns of `cols_v` x `cols_h`), over the
/// tones w of `block`:
///   `power[c] = Σ_w |c^H h_w|²`
///   `cross[c] = Σ_w conj(companion_w) * (c^H h_w)`
/// where `companion_w` is the fixed beam's inner product with tone w.
pub struct BlockPairStats {
    pub power: Vec<f64>,
    pub cross: Vec<C64>,
}

pub fn block_pair_stats(
    block: &ChannelBlock<'_>,
    geom: &UpaGeometry,
    cols_v: &[Vec<C64>],
    cols_h: &[Vec<C64>],
    companion: Option<&[C64]>,
) -> BlockPairStats {
    let n_cand = cols_v.len() * cols_h.len();
    let mut power = vec![0.0; n_cand];
    let mut cross = vec![C64::new(0.0, 0.0); n_cand];
    for w in 0..block.cols() {
        let table = pair_inner_products(block.col(w), geom, cols_v, cols_h);
        match companion {
            Some(comp) => {
                let cw = comp[w];
                for (c, v) in table.iter().enumerate() {
                    power[c] += v.norm_sqr();
                    cross[c] += cw.conj() * v;
                }
            }
            None => {
                for (c, v) in table.iter().enumerate() {
                    power[c] += v.norm_sqr();
                }
            }
        }
    }
    BlockPairStats { power, cross }
}

/// Beam-shifted codeword for one axis: entries
/// `exp(j 2π (d/λ) m θ) * base[m]` — the Hadamard beam-shift construction,
/// unit norm whenever `base` is.
pub fn shifted_codeword(base: &[C64], d_over_lambda: f64, theta: f64) -> Vec<C64> {
    let step = 2.0 * std::f64::consts::PI * d_over_lambda * theta;
    base.iter()
        .enumerate()
        .map(|(m, b)| C64::from_polar(1.0, step * m as f64) * b)
        .collect()
}

/// Shifted copies of `base` for every offset in `grid_offsets`.
pub fn shifted_family(base: &[C64], d_over_lambda: f64, grid_offsets: &[f64]) -> Vec<Vec<C64>> {
    grid_offsets
        .iter()
        .map(|&t| shifted_codeword(base, d_over_lambda, t))
        .collect()
}

/// Two-beam quantized-combining gain
///   |h^H [c1 c2] z|² / ||[c1 c2] z||²
/// given a1 = c1^H h, a2 = c2^H h, g = c1^H c2. Returns `None` when the
/// denominator collapses (numerically parallel beams).
#[inline]
pub fn two_beam_gain(a1: C64, a2: C64, g: C64, z: &[C64]) -> Option<f64> {
    let num = (a1.conj() * z[0] + a2.conj() * z[1]).norm_sqr();
    let den = z[0].norm_sqr() + z[1].norm_sqr() + 2.0 * (z[0].conj() * z[1] * g).re;
    if den <= 1e-12 {
        return None;
    }
    Some(num / den)
}

/// Direction equality of DFT codewords across possibly different codebook
/// sizes: 2 q1/Q1 - 1 == 2 q2/Q2 - 1 with exact integer arithmetic
/// (indices are 0-based).
#[inline]
pub fn same_direction(idx1: usize, bits1: u32, idx2: usize, bits2: u32) -> bool {
    let (q1, q2) = ((idx1 + 1) as u128, (idx2 + 1) as u128);
    q1 << bits2 == q2 << bits1
}
