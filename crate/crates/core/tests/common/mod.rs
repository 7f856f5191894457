#![allow(dead_code)] // each test target uses a different subset

//! Shared Monte Carlo oracles for the integration suites.
//!
//! Everything here is deliberately independent of the library's search and
//! analysis code paths: channels are assembled from first principles and
//! expectations are estimated by brute force, so these estimators can sit on
//! the other side of closed-form assertions.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn standard_normal<R: Rng>(r: &mut R) -> f64 {
    let u1: f64 = r.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = r.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

pub fn cn01<R: Rng>(r: &mut R) -> C64 {
    C64::new(
        standard_normal(r) * std::f64::consts::FRAC_1_SQRT_2,
        standard_normal(r) * std::f64::consts::FRAC_1_SQRT_2,
    )
}

/// Unit-norm steering vector with half-wavelength phase progression.
pub fn steer(m_a: usize, psi: f64) -> Vec<C64> {
    let scale = 1.0 / (m_a as f64).sqrt();
    (0..m_a)
        .map(|m| C64::from_polar(scale, std::f64::consts::PI * m as f64 * psi))
        .collect()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// DFT codeword q (1-based) of a 2^b codebook.
pub fn dft_codeword(m_a: usize, b: u32, q: usize) -> Vec<C64> {
    let q_total = (1usize << b) as f64;
    let dir = 2.0 * q as f64 / q_total - 1.0;
    steer(m_a, dir)
}

/// Best codeword index (1-based) by correlation against an arbitrary vector.
pub fn best_dft_index(target: &[C64], m_a: usize, b: u32) -> usize {
    let q_total = 1usize << b;
    let mut best = 1;
    let mut best_gain = -1.0;
    for q in 1..=q_total {
        let c = dft_codeword(m_a, b, q);
        let g = inner(&c, target).norm_sqr();
        if g > best_gain {
            best_gain = g;
            best = q;
        }
    }
    best
}

/// One simplified multi-path channel draw (directions, sorted gains, h).
pub struct ChannelDraw {
    pub psi_v: Vec<f64>,
    pub psi_h: Vec<f64>,
    pub gains: Vec<C64>,
    pub h: Vec<C64>,
}

pub fn draw_channel<R: Rng>(r: &mut R, m_v: usize, m_h: usize, p: usize) -> ChannelDraw {
    let mut psi_v: Vec<f64> = (0..p).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut psi_h: Vec<f64> = (0..p).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut gains: Vec<C64> = (0..p).map(|_| cn01(r)).collect();
    // Sort by |gain| descending, keeping triples together.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| gains[j].norm_sqr().total_cmp(&gains[i].norm_sqr()));
    psi_v = order.iter().map(|&i| psi_v[i]).collect();
    psi_h = order.iter().map(|&i| psi_h[i]).collect();
    gains = order.iter().map(|&i| gains[i]).collect();

    let mut h = vec![C64::new(0.0, 0.0); m_v * m_h];
    for k in 0..p {
        let d = kron(&steer(m_v, psi_v[k]), &steer(m_h, psi_h[k]));
        for (hi, di) in h.iter_mut().zip(&d) {
            *hi += gains[k] * di;
        }
    }
    ChannelDraw { psi_v, psi_h, gains, h }
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Control-variate adjusted mean of `g` given zero-mean covariates.
///
/// Regresses g on the covariates and removes the fitted part evaluated at
/// the sample covariate means; with exact zero-mean controls this estimates
/// E[g] with reduced variance.
pub fn control_variate_mean(g: &[f64], covariates: &[Vec<f64>]) -> f64 {
    let n = g.len() as f64;
    let g_mean = g.iter().sum::<f64>() / n;
    let k = covariates.len();
    if k == 0 {
        return g_mean;
    }
    let x_means: Vec<f64> = covariates.iter().map(|x| x.iter().sum::<f64>() / n).collect();
    // Normal equations S beta = c.
    let mut s = vec![vec![0.0; k]; k];
    let mut c = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            s[i][j] = covariates[i]
                .iter()
                .zip(&covariates[j])
                .map(|(a, b)| (a - x_means[i]) * (b - x_means[j]))
                .sum();
        }
        c[i] = covariates[i]
            .iter()
            .zip(g)
            .map(|(a, b)| (a - x_means[i]) * (b - g_mean))
            .sum();
    }
    // Tiny Gaussian elimination (k <= 2 in practice).
    let beta = solve_real(&mut s, &mut c);
    let mut adjusted = g_mean;
    for i in 0..k {
        adjusted -= beta[i] * x_means[i];
    }
    adjusted
}

fn solve_real(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-30 {
            return vec![0.0; n];
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in (row + 1)..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}
