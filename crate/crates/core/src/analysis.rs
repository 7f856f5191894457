//! Closed-form gain analysis, feedback-bit allocation, and budget accounting.
//!
//! The formulas here quantify the two quantization stages separately — the
//! beam-quantization gain as a function of DFT codebook sizes and the
//! combining loss as a function of the combiner codebook size — and assemble
//! them into the expected beamforming gain used to pick a feedback split.
//! All of them assume half-wavelength spacing; callers evaluating other
//! geometries get a flag in the report.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMatrix, UpaGeometry};
use crate::codebooks::DftCodebook;
use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sq};
use crate::narrowband::FeedbackAllocation;
use crate::search::dominant_pair_index;

/// Mean squared correlation between a uniformly-drawn array direction and
/// its best b-bit DFT codeword:
/// (1/m_a²)(m_a + Σ_{q=1}^{m_a-1} 2(m_a-q) sinc(q/2^b)) with
/// sinc(x) = sin(pi x)/(pi x).
pub fn gamma_sq(m_a: usize, b: u32) -> f64 {
    assert!(m_a >= 1);
    let q_total = 2f64.powi(b as i32);
    let ma = m_a as f64;
    let mut acc = ma;
    for q in 1..m_a {
        let x = std::f64::consts::PI * q as f64 / q_total;
        acc += 2.0 * (ma - q as f64) * (x.sin() / x);
    }
    acc / (ma * ma)
}

/// Expected power of the n-th strongest of `p_count` unit-rate exponential
/// path powers: Σ_{q=n}^{P} 1/q.
pub fn order_stat_gain(p_count: usize, n: usize) -> Result<f64> {
    if n < 1 || n > p_count {
        return Err(Error::InvalidInput(format!(
            "order statistic index {n} outside 1..={p_count}"
        )));
    }
    Ok((n..=p_count).map(|q| 1.0 / q as f64).sum())
}

/// Beam-quantization gain lower bound:
/// (P/(M+N-1)) (N + Σ_{n=1}^{N} Σ_{q=n}^{P} (M Γ²_nv Γ²_nh - 1)/(q P)).
pub fn gbq_lower(p_count: usize, bits_per_beam: &[u32], geom: &UpaGeometry) -> f64 {
    let n_beams = bits_per_beam.len();
    assert!(n_beams >= 1 && p_count >= 1);
    let m = geom.antennas() as f64;
    let p = p_count as f64;
    let mut acc = n_beams as f64;
    for (n, &b) in bits_per_beam.iter().enumerate() {
        let g2 = gamma_sq(geom.m_v, b) * gamma_sq(geom.m_h, b);
        for q in (n + 1)..=p_count {
            acc += (m * g2 - 1.0) / (q as f64 * p);
        }
    }
    p / (m + n_beams as f64 - 1.0) * acc
}

/// Combining gain for a U-codeword phase codebook on two beams:
/// (1 + (U/π) sin(π/U)) / 2.
pub fn gbc_closed(u_count: u64) -> f64 {
    assert!(u_count >= 1);
    gbc_closed_real(u_count as f64)
}

fn gbc_closed_real(u: f64) -> f64 {
    debug_assert!(u >= 1.0);
    0.5 * (1.0 + u / std::f64::consts::PI * (std::f64::consts::PI / u).sin())
}

/// Combining gain used inside [`expected_gain`]:
/// 1 for a single beam; the two-beam closed form for N = 2; for N = 3 the
/// same closed form reused per relative phase with the combiner bits split
/// across the N-1 phases (an approximation — the exact analysis exists only
/// for N = 2).
pub fn gbc_combining(n_beams: usize, b_c: u32) -> f64 {
    if n_beams <= 1 {
        return 1.0;
    }
    let phases = (n_beams - 1) as f64;
    let u_eff = 2f64.powf(b_c as f64 / phases);
    gbc_closed_real(u_eff).powf(phases)
}

/// Expected beamforming gain of the full quantizer for a feedback split:
/// the beam-quantization bound times the combining gain.
pub fn expected_gain(p_count: usize, alloc: &FeedbackAllocation, geom: &UpaGeometry) -> f64 {
    gbq_lower(p_count, alloc.bits_per_beam(), geom) * gbc_combining(alloc.n_beams(), alloc.b_c())
}

/// Outcome of the feedback-bit allocation search.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub n_beams: usize,
    pub allocation: FeedbackAllocation,
    /// Mean of [`expected_gain`] over the path-count set.
    pub objective: f64,
}

/// Exhaustive feedback-bit allocation: searches N in {1, 2, 3} and all
/// integer splits B_T = B_c + Σ 2 B_n with every beam getting at least one
/// bit, maximizing the mean expected gain over `p_set`. Ties prefer fewer
/// beams, then the lexicographically smaller split.
pub fn allocate_feedback(geom: &UpaGeometry, b_total: u32, p_set: &[usize]) -> Result<AllocationResult> {
    if b_total < 2 {
        return Err(Error::InfeasibleBudget(b_total));
    }
    if p_set.is_empty() {
        return Err(Error::InvalidInput("empty path-count set".into()));
    }
    let mut best: Option<AllocationResult> = None;
    for n_beams in 1..=3usize {
        let mut bits = vec![1u32; n_beams];
        enumerate_splits(b_total, n_beams, &mut bits, 0, &mut |bits, b_c| {
            let alloc = FeedbackAllocation::new(bits.to_vec(), b_c);
            let objective = p_set
                .iter()
                .map(|&p| expected_gain(p, &alloc, geom))
                .sum::<f64>()
                / p_set.len() as f64;
            let replace = match &best {
                None => true,
                Some(cur) => {
                    objective > cur.objective + 1e-12
                        || ((objective - cur.objective).abs() <= 1e-12
                            && (n_beams, bits) < (cur.n_beams, cur.allocation.bits_per_beam()))
                }
            };
            if replace {
                best = Some(AllocationResult { n_beams, allocation: alloc, objective });
            }
        });
    }
    best.ok_or(Error::InfeasibleBudget(b_total))
}

fn enumerate_splits(
    b_total: u32,
    n_beams: usize,
    bits: &mut Vec<u32>,
    depth: usize,
    visit: &mut impl FnMut(&[u32], u32),
) {
    if depth == n_beams {
        let used: u32 = bits.iter().map(|&b| 2 * b).sum();
        if used <= b_total {
            visit(bits, b_total - used);
        }
        return;
    }
    let used: u32 = bits[..depth].iter().map(|&b| 2 * b).sum();
    if used + 2 > b_total {
        return;
    }
    for b in 1..=(b_total - used) / 2 {
        bits[depth] = b;
        enumerate_splits(b_total, n_beams, bits, depth + 1, visit);
    }
}

/// Quantization scheme whose feedback and search budgets are tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BudgetScheme {
    /// Three-round hierarchical quantizer with refinement bits tied to the
    /// second-round split.
    Proposed { b1: u32, b2: u32, b_c: u32 },
    /// Two singular-vector pairs quantized independently and summed.
    EnhancedKp { b1: u32, b2: u32 },
    /// Single Kronecker-product beam with per-axis codebooks.
    Kp { b1: u32 },
}

/// Feedback bits and vector-evaluation counts per scheme:
///   proposed:     B = 2(B1+B2)+Bc+1,  V = 2^{2B1} + 2^{2B2+Bc+1}
///   enhanced KP:  B = 2(B1+B2+1),     V = 2(2^{B1+B2} + 2^{B1} + 2^{B2})
///   KP:           B = 2B1,            V = 2^{B1+1}
pub fn complexity_budget(scheme: BudgetScheme) -> (u64, u64) {
    match scheme {
        BudgetScheme::Proposed { b1, b2, b_c } => (
            2 * (b1 as u64 + b2 as u64) + b_c as u64 + 1,
            (1u64 << (2 * b1)) + (1u64 << (2 * b2 + b_c + 1)),
        ),
        BudgetScheme::EnhancedKp { b1, b2 } => (
            2 * (b1 as u64 + b2 as u64 + 1),
            2 * ((1u64 << (b1 + b2)) + (1u64 << b1) + (1u64 << b2)),
        ),
        BudgetScheme::Kp { b1 } => (2 * b1 as u64, 1u64 << (b1 + 1)),
    }
}

/// Per-lag cross-tone correlation diagnostics of one wideband channel
/// realization.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    /// Normalized channel cross-correlation, indexed by tone lag.
    pub gamma_h: Vec<f64>,
    /// Squared correlation of the per-tone dominant DFT beams.
    pub gamma_c1: Vec<f64>,
}

/// Measures, per tone-pair lag, the normalized channel correlation and the
/// correlation of the dominant b-bit 2D DFT beams selected per tone,
/// averaged over all tone pairs at each lag.
pub fn cross_tone_correlation(channel: &ChannelMatrix, geom: &UpaGeometry, b: u32) -> Result<CorrelationProfile> {
    let w = channel.cols();
    if w < 2 {
        return Err(Error::InvalidInput("cross-tone correlation needs at least two tones".into()));
    }
    if channel.rows() != geom.antennas() {
        return Err(Error::InvalidInput("channel row count does not match the array".into()));
    }
    let cb_v = DftCodebook::new(geom.m_v, b);
    let cb_h = DftCodebook::new(geom.m_h, b);
    // Dominant per-tone beam, factored per axis.
    let beams: Vec<(usize, usize)> = (0..w)
        .map(|wi| dominant_pair_index(channel.col(wi), geom, &cb_v, &cb_h))
        .collect();
    let norms: Vec<f64> = (0..w).map(|wi| norm_sq(channel.col(wi))).collect();

    let mut gamma_h = vec![0.0; w];
    let mut gamma_c1 = vec![0.0; w];
    let mut counts = vec![0usize; w];
    for w1 in 0..w {
        for w2 in w1..w {
            let lag = w2 - w1;
            let hcorr = if lag == 0 {
                1.0
            } else {
                inner(channel.col(w1), channel.col(w2)).norm_sqr() / (norms[w1] * norms[w2])
            };
            let (v1, h1) = beams[w1];
            let (v2, h2) = beams[w2];
            let bcorr = inner(cb_v.codeword(v1), cb_v.codeword(v2)).norm_sqr()
                * inner(cb_h.codeword(h1), cb_h.codeword(h2)).norm_sqr();
            gamma_h[lag] += hcorr;
            gamma_c1[lag] += bcorr;
            counts[lag] += 1;
        }
    }
    for lag in 0..w {
        gamma_h[lag] /= counts[lag] as f64;
        gamma_c1[lag] /= counts[lag] as f64;
    }
    Ok(CorrelationProfile { gamma_h, gamma_c1 })
}

/// One row of an analytic gain table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub m_v: usize,
    pub m_h: usize,
    pub p_count: usize,
    pub n_beams: usize,
    pub bits_per_beam: Vec<u32>,
    pub b_c: u32,
    pub gamma_sq_v: Vec<f64>,
    pub gamma_sq_h: Vec<f64>,
    pub g_bq: f64,
    pub g_bc: f64,
    pub g_total: f64,
}

/// Analytic gain report over a set of allocations and path counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub rows: Vec<AnalyticRow>,
    /// True when the geometry breaks the half-wavelength assumption behind
    /// the closed forms.
    pub spacing_warning: bool,
    /// True when any row uses the N>=3 combining proxy.
    pub combining_proxy_used: bool,
}

/// Evaluates the closed forms for every (allocation, path count) pair.
pub fn analytic_report(
    geom: &UpaGeometry,
    allocations: &[FeedbackAllocation],
    p_set: &[usize],
) -> AnalyticReport {
    let mut rows = Vec::new();
    let mut proxy = false;
    for alloc in allocations {
        for &p in p_set {
            let g_bq = gbq_lower(p, alloc.bits_per_beam(), geom);
            let g_bc = gbc_combining(alloc.n_beams(), alloc.b_c());
            proxy |= alloc.n_beams() > 2;
            rows.push(AnalyticRow {
                m_v: geom.m_v,
                m_h: geom.m_h,
                p_count: p,
                n_beams: alloc.n_beams(),
                bits_per_beam: alloc.bits_per_beam().to_vec(),
                b_c: alloc.b_c(),
                gamma_sq_v: alloc.bits_per_beam().iter().map(|&b| gamma_sq(geom.m_v, b)).collect(),
                gamma_sq_h: alloc.bits_per_beam().iter().map(|&b| gamma_sq(geom.m_h, b)).collect(),
                g_bq,
                g_bc,
                g_total: g_bq * g_bc,
            });
        }
    }
    AnalyticReport {
        rows,
        spacing_warning: !geom.is_half_wavelength(),
        combining_proxy_used: proxy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_paths, wideband_channel, DelayProfile, Path, PathSet, WidebandGrid};
    use num_complex::Complex64 as C64;

    #[test]
    fn gamma_sq_limits_and_values() {
        assert!((gamma_sq(1, 0) - 1.0).abs() < 1e-15);
        assert!((gamma_sq(1, 7) - 1.0).abs() < 1e-15);
        // Large codebooks drive the correlation to one.
        for m_a in [2usize, 4, 8] {
            assert!((gamma_sq(m_a, 20) - 1.0).abs() < 1e-6);
        }
        assert!((gamma_sq(4, 2) - 0.784).abs() < 5e-4);
        // Strictly increasing in b, bounded by one.
        for m_a in [2usize, 4, 8, 16] {
            let mut prev = gamma_sq(m_a, 0);
            for b in 1..12 {
                let g = gamma_sq(m_a, b);
                assert!(g > prev && g <= 1.0 + 1e-12, "m_a={m_a} b={b}");
                prev = g;
            }
        }
    }

    #[test]
    fn order_stat_values() {
        assert!((order_stat_gain(1, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((order_stat_gain(3, 1).unwrap() - 11.0 / 6.0).abs() < 1e-15);
        assert!((order_stat_gain(5, 2).unwrap() - 77.0 / 60.0).abs() < 1e-15);
        assert!(order_stat_gain(3, 4).is_err());
        assert!(order_stat_gain(3, 0).is_err());
    }

    #[test]
    fn gbq_single_path_reduces_to_gamma_product() {
        let geom = UpaGeometry::new(4, 4, 0.5, 0.5).unwrap();
        let g = gbq_lower(1, &[3], &geom);
        let expected = gamma_sq(4, 3) * gamma_sq(4, 3);
        assert!((g - expected).abs() < 1e-12);
    }

    #[test]
    fn gbq_reference_value_and_monotonicity() {
        let geom = UpaGeometry::new(4, 4, 0.5, 0.5).unwrap();
        let g = gbq_lower(3, &[4], &geom);
        assert!((g - 1.848).abs() < 5e-3, "g = {g}");
        // Non-increasing in M at fixed path count and bits.
        let mut prev = f64::INFINITY;
        for m in (4..=20).step_by(2) {
            let geom = UpaGeometry::square(m).unwrap();
            let g = gbq_lower(3, &[4], &geom);
            assert!(g <= prev + 1e-12, "gbq increased at {m}x{m}");
            prev = g;
        }
    }

    #[test]
    fn gbc_limits_and_value() {
        assert!((gbc_closed(1) - 0.5).abs() < 1e-15);
        assert!((gbc_closed(4) - 0.9502).abs() < 1e-4);
        assert!((gbc_closed(1 << 20) - 1.0).abs() < 1e-10);
        let mut prev = 0.0;
        for b in 0..16 {
            let g = gbc_closed(1 << b);
            assert!(g > prev && (0.5..=1.0 + 1e-12).contains(&g));
            prev = g;
        }
    }

    #[test]
    fn expected_gain_shapes() {
        let geom = UpaGeometry::new(4, 4, 0.5, 0.5).unwrap();
        // N=1 has no combining loss.
        let a1 = FeedbackAllocation::new(vec![4], 0);
        assert!((expected_gain(3, &a1, &geom) - gbq_lower(3, &[4], &geom)).abs() < 1e-15);
        // N=2 is the plain product of the two closed forms.
        let a2 = FeedbackAllocation::new(vec![4, 3], 2);
        let expect = gbq_lower(3, &[4, 3], &geom) * gbc_closed(4);
        assert!((expected_gain(3, &a2, &geom) - expect).abs() < 1e-15);
    }

    #[test]
    fn allocation_minimal_budget() {
        let geom = UpaGeometry::new(4, 4, 0.5, 0.5).unwrap();
        let res = allocate_feedback(&geom, 2, &[3, 4, 5]).unwrap();
        assert_eq!(res.n_beams, 1);
        assert_eq!(res.allocation.bits_per_beam(), &[1]);
        assert_eq!(res.allocation.b_c(), 0);
        assert!(allocate_feedback(&geom, 1, &[3]).is_err());
        // Reported objective is consistent with expected_gain.
        let mean: f64 = [3usize, 4, 5]
            .iter()
            .map(|&p| expected_gain(p, &res.allocation, &geom))
            .sum::<f64>()
            / 3.0;
        assert!((res.objective - mean).abs() < 1e-12);
    }

    #[test]
    fn complexity_budget_table_rows() {
        // The six tabulated (B, V) rows.
        assert_eq!(complexity_budget(BudgetScheme::Proposed { b1: 5, b2: 4, b_c: 2 }), (21, 3072));
        assert_eq!(complexity_budget(BudgetScheme::Proposed { b1: 5, b2: 3, b_c: 2 }), (19, 1536));
        assert_eq!(complexity_budget(BudgetScheme::Proposed { b1: 4, b2: 3, b_c: 2 }), (17, 768));
        assert_eq!(complexity_budget(BudgetScheme::EnhancedKp { b1: 5, b2: 5 }), (22, 2176));
        assert_eq!(complexity_budget(BudgetScheme::EnhancedKp { b1: 5, b2: 4 }), (20, 1120));
        assert_eq!(complexity_budget(BudgetScheme::Kp { b1: 11 }), (22, 4096));
    }

    #[test]
    fn correlation_lag_zero_is_one() {
        let geom = UpaGeometry::new(2, 2, 0.5, 0.5).unwrap();
        let grid = WidebandGrid::new(8, 15e3, 2e9, 2, 2).unwrap();
        let ps = sample_paths(3, DelayProfile::default(), 1);
        let ch = wideband_channel(&geom, &ps, &grid).unwrap();
        let prof = cross_tone_correlation(&ch, &geom, 3).unwrap();
        assert!((prof.gamma_h[0] - 1.0).abs() < 1e-12);
        assert!((prof.gamma_c1[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_zero_delay_path_keeps_beam_static() {
        let geom = UpaGeometry::new(3, 3, 0.5, 0.5).unwrap();
        let grid = WidebandGrid::new(16, 15e3, 2e9, 2, 2).unwrap();
        let ps = PathSet::new(vec![Path { psi_v: 0.37, psi_h: -0.52, gain: C64::new(1.0, 0.0), delay: 0.0 }]).unwrap();
        let ch = wideband_channel(&geom, &ps, &grid).unwrap();
        let prof = cross_tone_correlation(&ch, &geom, 4).unwrap();
        for lag in 0..16 {
            assert!(prof.gamma_c1[lag] > 0.999, "beam moved at lag {lag}: {}", prof.gamma_c1[lag]);
        }
    }

    #[test]
    fn beam_correlation_dominates_channel_correlation() {
        // Spread delays decorrelate the channel with lag while the dominant
        // beam stays comparatively stable.
        let geom = UpaGeometry::new(3, 3, 0.5, 0.5).unwrap();
        let grid = WidebandGrid::new(96, 15e3, 2e9, 2, 2).unwrap();
        let mut gh = vec![0.0; 96];
        let mut gc = vec![0.0; 96];
        for seed in 0..24 {
            let ps = sample_paths(4, DelayProfile::default(), 1000 + seed);
            let ch = wideband_channel(&geom, &ps, &grid).unwrap();
            let prof = cross_tone_correlation(&ch, &geom, 4).unwrap();
            for lag in 0..96 {
                gh[lag] += prof.gamma_h[lag] / 24.0;
                gc[lag] += prof.gamma_c1[lag] / 24.0;
            }
        }
        assert!(gh[95] < gh[1], "channel correlation should decay with lag");
        let mean_gh: f64 = gh[1..].iter().sum::<f64>() / 95.0;
        let mean_gc: f64 = gc[1..].iter().sum::<f64>() / 95.0;
        assert!(mean_gc > mean_gh, "beam correlation {mean_gc} vs channel {mean_gh}");
    }

    #[test]
    fn report_flags_spacing() {
        let geom = UpaGeometry::new(4, 4, 0.8, 0.5).unwrap();
        let report = analytic_report(&geom, &[FeedbackAllocation::new(vec![4, 3], 2)], &[3]);
        assert!(report.spacing_warning);
        let geom2 = UpaGeometry::new(4, 4, 0.5, 0.5).unwrap();
        let report2 = analytic_report(&geom2, &[FeedbackAllocation::new(vec![4], 0)], &[3]);
        assert!(!report2.spacing_warning);
        assert!(!report2.combining_proxy_used);
    }
}
