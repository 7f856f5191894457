//! Multi-path channel synthesis for uniform planar arrays.
//!
//! Channels are sums of a few planar wavefronts. Each path carries a pair of
//! directional cosines (psi_v, psi_h) in [-1, 1], a circularly-symmetric
//! complex gain, and an excess tap delay that only matters in the wideband
//! (multi-tone) model. Steering vectors factor as Kronecker products of the
//! vertical and horizontal responses, which every search routine in this
//! crate exploits.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::kron;

/// Uniform planar array: `m_v` rows by `m_h` columns, spacings in carrier
/// wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaGeometry {
    pub m_v: usize,
    pub m_h: usize,
    pub d_v: f64,
    pub d_h: f64,
}

impl UpaGeometry {
    pub fn new(m_v: usize, m_h: usize, d_v: f64, d_h: f64) -> Result<Self> {
        if m_v == 0 || m_h == 0 {
            return Err(Error::InvalidDimension(format!(
                "array must have at least one antenna per axis, got {m_v}x{m_h}"
            )));
        }
        if !(d_v > 0.0) || !(d_h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "antenna spacings must be positive, got d_v={d_v}, d_h={d_h}"
            )));
        }
        Ok(Self { m_v, m_h, d_v, d_h })
    }

    /// Square half-wavelength array, the default experiment geometry.
    pub fn square(m: usize) -> Result<Self> {
        Self::new(m, m, 0.5, 0.5)
    }

    /// Total antenna count M = m_v * m_h.
    pub fn antennas(&self) -> usize {
        self.m_v * self.m_h
    }

    /// True when both spacings are half a carrier wavelength, the regime the
    /// closed-form analyses assume.
    pub fn is_half_wavelength(&self) -> bool {
        (self.d_v - 0.5).abs() < 1e-12 && (self.d_h - 0.5).abs() < 1e-12
    }
}

/// One radio path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Vertical directional cosine in [-1, 1].
    pub psi_v: f64,
    /// Horizontal directional cosine in [-1, 1].
    pub psi_h: f64,
    /// Complex gain.
    pub gain: C64,
    /// Excess tap delay in seconds.
    pub delay: f64,
}

/// A set of radio paths, stored sorted by |gain| descending so that the
/// ordered-statistics analyses can index "the n-th strongest path" directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    pub fn new(mut paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidInput("a path set needs at least one path".into()));
        }
        for p in &paths {
            if p.psi_v.abs() > 1.0 || p.psi_h.abs() > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "path direction out of range: psi_v={}, psi_h={}",
                    p.psi_v, p.psi_h
                )));
            }
            if p.delay < 0.0 {
                return Err(Error::InvalidInput(format!("negative delay {}", p.delay)));
            }
        }
        paths.sort_by(|a, b| b.gain.norm_sqr().total_cmp(&a.gain.norm_sqr()));
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Distribution of the excess tap delays.
///
/// The delay law only shapes wideband frequency selectivity; narrowband
/// synthesis ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DelayProfile {
    /// Delays uniform on [0, max] seconds.
    Uniform { max: f64 },
    /// All paths arrive together; the wideband channel is frequency flat up
    /// to beam squint.
    Zero,
}

impl Default for DelayProfile {
    /// Uniform over one microsecond.
    fn default() -> Self {
        DelayProfile::Uniform { max: 1e-6 }
    }
}

/// Draws `p_count` paths: directions uniform on [-1, 1], gains CN(0, 1),
/// delays from `profile`. Deterministic in `seed`.
pub fn sample_paths(p_count: usize, profile: DelayProfile, seed: u64) -> PathSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_paths_with(p_count, profile, &mut rng)
}

/// As [`sample_paths`] but drawing from a caller-managed RNG stream.
///
/// Per path the draw order is psi_v, psi_h, gain (re, im), delay.
pub fn sample_paths_with<R: Rng>(p_count: usize, profile: DelayProfile, rng: &mut R) -> PathSet {
    assert!(p_count >= 1, "p_count must be at least 1");
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let paths = (0..p_count)
        .map(|_| {
            let psi_v = rng.gen_range(-1.0..1.0);
            let psi_h = rng.gen_range(-1.0..1.0);
            let re: f64 = standard_normal(rng);
            let im: f64 = standard_normal(rng);
            let gain = C64::new(re * inv_sqrt2, im * inv_sqrt2);
            let delay = match profile {
                DelayProfile::Uniform { max } => {
                    if max > 0.0 {
                        rng.gen_range(0.0..max)
                    } else {
                        0.0
                    }
                }
                DelayProfile::Zero => 0.0,
            };
            Path { psi_v, psi_h, gain, delay }
        })
        .collect();
    PathSet::new(paths).expect("sampled paths are always valid")
}

/// Box-Muller standard normal; keeps the dependency surface to `rand` core.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform linear array response: unit-norm vector with entries
/// exp(j 2π (d/λ) m ψ) / sqrt(m_a), m = 0..m_a-1.
///
/// `psi` is nominally in [-1, 1]; out-of-range values are accepted (they
/// arise as summed beam-shift directions) and simply wrap the phase.
pub fn array_response(m_a: usize, d_over_lambda: f64, psi: f64) -> Result<Vec<C64>> {
    if m_a == 0 {
        return Err(Error::InvalidDimension("array response of a zero-element array".into()));
    }
    let scale = 1.0 / (m_a as f64).sqrt();
    let step = 2.0 * std::f64::consts::PI * d_over_lambda * psi;
    Ok((0..m_a)
        .map(|m| C64::from_polar(scale, step * m as f64))
        .collect())
}

/// Planar (2D) path response: vertical ⊗ horizontal array responses.
pub fn path_2d(geom: &UpaGeometry, psi_v: f64, psi_h: f64) -> Vec<C64> {
    let v = array_response(geom.m_v, geom.d_v, psi_v).expect("validated geometry");
    let h = array_response(geom.m_h, geom.d_h, psi_h).expect("validated geometry");
    kron(&v, &h)
}

/// Narrowband (single-tone) channel: sum of gain-weighted path responses.
pub fn narrowband_channel(geom: &UpaGeometry, paths: &PathSet) -> Result<Vec<C64>> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("narrowband channel of an empty path set".into()));
    }
    let m = geom.antennas();
    let mut h = vec![C64::new(0.0, 0.0); m];
    for p in paths.paths() {
        let d = path_2d(geom, p.psi_v, p.psi_h);
        for (hi, di) in h.iter_mut().zip(&d) {
            *hi += p.gain * di;
        }
    }
    Ok(h)
}

/// Multi-tone layout: `w_total` tones at `spacing` Hz around carrier `f_c`,
/// grouped into `l_blocks` wideband resource blocks of `r_blocks` narrowband
/// resource blocks each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidebandGrid {
    pub w_total: usize,
    pub spacing: f64,
    pub f_c: f64,
    pub l_blocks: usize,
    pub r_blocks: usize,
}

impl WidebandGrid {
    pub fn new(
        w_total: usize,
        spacing: f64,
        f_c: f64,
        l_blocks: usize,
        r_blocks: usize,
    ) -> Result<Self> {
        let grid = Self { w_total, spacing, f_c, l_blocks, r_blocks };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, message: String| Error::Config {
            field: field.into(),
            message,
        };
        if self.w_total == 0 {
            return Err(err("w_total", "tone count must be positive".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(err("spacing", format!("subcarrier spacing must be positive, got {}", self.spacing)));
        }
        if !(self.f_c > 0.0) {
            return Err(err("f_c", format!("carrier frequency must be positive, got {}", self.f_c)));
        }
        if self.l_blocks == 0 || self.w_total % self.l_blocks != 0 {
            return Err(err(
                "l_blocks",
                format!("{} wideband RBs do not evenly divide {} tones", self.l_blocks, self.w_total),
            ));
        }
        let per_l = self.w_total / self.l_blocks;
        if self.r_blocks == 0 || per_l % self.r_blocks != 0 {
            return Err(err(
                "r_blocks",
                format!("{} narrowband RBs do not evenly divide {} tones per wideband RB", self.r_blocks, per_l),
            ));
        }
        // Wavelength must stay positive across the band.
        let half_span = (self.w_total as f64) * self.spacing / 2.0;
        if half_span >= self.f_c {
            return Err(err("f_c", "band edge reaches zero frequency; wavelength undefined".into()));
        }
        Ok(())
    }

    /// Tones per wideband resource block.
    pub fn tones_per_wide_rb(&self) -> usize {
        self.w_total / self.l_blocks
    }

    /// Tones per narrowband resource block.
    pub fn tones_per_narrow_rb(&self) -> usize {
        self.tones_per_wide_rb() / self.r_blocks
    }

    /// Ratio `λ_c / λ[w]` for the 1-based tone index `w`; multiplies the
    /// spacing-in-wavelengths when forming per-tone steering phases.
    pub fn wavelength_ratio(&self, w: usize) -> f64 {
        1.0 + (self.spacing / self.f_c) * (w as f64 - (self.w_total as f64 + 1.0) / 2.0)
    }
}

/// Dense complex matrix of channel columns (antennas x tones, or
/// antennas x receive antennas for MIMO). Column-major so each tone is
/// contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ChannelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        assert!(!cols.is_empty());
        let rows = cols[0].len();
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.col_mut(j).copy_from_slice(c);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Borrowed view of a contiguous range of columns.
    pub fn col_range(&self, range: std::ops::Range<usize>) -> ChannelBlock<'_> {
        ChannelBlock { rows: self.rows, cols: range.len(), data: &self.data[range.start * self.rows..range.end * self.rows] }
    }

    pub fn as_block(&self) -> ChannelBlock<'_> {
        ChannelBlock { rows: self.rows, cols: self.cols, data: &self.data }
    }
}

/// Borrowed block of channel columns.
#[derive(Debug, Clone, Copy)]
pub struct ChannelBlock<'a> {
    rows: usize,
    cols: usize,
    data: &'a [C64],
}

impl<'a> ChannelBlock<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &'a [C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn sub(&self, range: std::ops::Range<usize>) -> ChannelBlock<'a> {
        ChannelBlock { rows: self.rows, cols: range.len(), data: &self.data[range.start * self.rows..range.end * self.rows] }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Wideband channel: column w-1 (0-based) holds the tone-w channel
///
///   `h[w] = Σ_p exp(-j 2π Δ (w - (W+1)/2) t_p) α_p d(ψ_p^v, ψ_p^h, w)`,
///
/// with the per-tone steering phases using `spacing/λ[w]`. Beam squint is
/// retained in synthesis even though the quantizers use center-tone
/// codebooks. The delay phase is referenced to the center tone so the
/// single-tone grid reduces exactly to [`narrowband_channel`].
pub fn wideband_channel(geom: &UpaGeometry, paths: &PathSet, grid: &WidebandGrid) -> Result<ChannelMatrix> {
    grid.validate()?;
    if paths.is_empty() {
        return Err(Error::InvalidInput("wideband channel of an empty path set".into()));
    }
    let m = geom.antennas();
    let w_total = grid.w_total;
    let mut out = ChannelMatrix::zeros(m, w_total);
    let center = (w_total as f64 + 1.0) / 2.0;
    for w in 1..=w_total {
        let ratio = grid.wavelength_ratio(w);
        let col = out.col_mut(w - 1);
        for p in paths.paths() {
            let delay_phase = -2.0 * std::f64::consts::PI * grid.spacing * (w as f64 - center) * p.delay;
            let coeff = p.gain * C64::from_polar(1.0, delay_phase);
            let dv = array_response(geom.m_v, geom.d_v * ratio, p.psi_v)?;
            let dh = array_response(geom.m_h, geom.d_h * ratio, p.psi_h)?;
            for (i, di) in kron(&dv, &dh).into_iter().enumerate() {
                col[i] += coeff * di;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, norm, norm_sq};

    #[test]
    fn array_response_stated_values() {
        // Single antenna.
        let r = array_response(1, 0.5, 0.7).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        // Broadside pair.
        let r = array_response(2, 0.5, 0.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((r[1] - C64::new(s, 0.0)).norm() < 1e-15);
        // Endfire direction flips the sign of the second element.
        let r = array_response(2, 0.5, 1.0).unwrap();
        assert!((r[1] - C64::new(-s, 0.0)).norm() < 1e-12);
        assert!(array_response(0, 0.5, 0.0).is_err());
    }

    #[test]
    fn path_2d_is_kronecker_and_unit_norm() {
        let geom = UpaGeometry::new(3, 4, 0.5, 0.5).unwrap();
        let d = path_2d(&geom, 0.3, -0.6);
        let v = array_response(3, 0.5, 0.3).unwrap();
        let h = array_response(4, 0.5, -0.6).unwrap();
        for i in 0..3 {
            for k in 0..4 {
                assert!((d[i * 4 + k] - v[i] * h[k]).norm() < 1e-12);
            }
        }
        assert!((norm(&d) - 1.0).abs() < 1e-12);

        let geom1 = UpaGeometry::new(1, 1, 0.5, 0.5).unwrap();
        let d1 = path_2d(&geom1, 0.9, -0.2);
        assert!((d1[0] - C64::new(1.0, 0.0)).norm() < 1e-15);

        let geom2 = UpaGeometry::new(2, 2, 0.5, 0.5).unwrap();
        let d2 = path_2d(&geom2, 0.0, 0.0);
        for e in &d2 {
            assert!((e - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let d3 = path_2d(&geom2, 1.0, 1.0);
        let signs = [0.5, -0.5, -0.5, 0.5];
        for (e, s) in d3.iter().zip(signs) {
            assert!((e - C64::new(s, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn hadamard_shift_identity_half_wavelength() {
        // sqrt(M) d(t1,t3) ⊙ d(t2,t4) = d(t1+t2, t3+t4) at half-wavelength.
        let geom = UpaGeometry::new(4, 3, 0.5, 0.5).unwrap();
        let m = geom.antennas() as f64;
        let (t1, t2, t3, t4) = (0.21, -0.43, 0.75, 0.11);
        let a = path_2d(&geom, t1, t3);
        let b = path_2d(&geom, t2, t4);
        let lhs: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y * m.sqrt()).collect();
        let rhs = path_2d(&geom, t1 + t2, t3 + t4);
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).norm() < 1e-12);
        }
    }

    #[test]
    fn sample_paths_deterministic_and_sorted() {
        let a = sample_paths(5, DelayProfile::default(), 42);
        let b = sample_paths(5, DelayProfile::default(), 42);
        assert_eq!(a, b);
        let c = sample_paths(5, DelayProfile::default(), 43);
        assert_ne!(a, c);
        for w in a.paths().windows(2) {
            assert!(w[0].gain.norm_sqr() >= w[1].gain.norm_sqr());
        }
    }

    #[test]
    fn sampled_gain_power_is_unit() {
        // Mean |gain|^2 over many draws approaches 1 (CN(0,1) power).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..20_000 {
            let ps = sample_paths_with(5, DelayProfile::Zero, &mut rng);
            acc += ps.paths().iter().map(|p| p.gain.norm_sqr()).sum::<f64>();
            count += 5;
        }
        let mean = acc / count as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean path power {mean}");
    }

    #[test]
    fn sampled_directions_uniform() {
        // Kolmogorov-Smirnov distance of psi_v draws against U(-1,1).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut psis = Vec::with_capacity(100_000);
        while psis.len() < 100_000 {
            let ps = sample_paths_with(3, DelayProfile::Zero, &mut rng);
            // Path order is sorted by gain, independent of direction, so the
            // direction marginals are untouched.
            psis.extend(ps.paths().iter().map(|p| p.psi_v));
        }
        psis.sort_by(f64::total_cmp);
        let n = psis.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, x) in psis.iter().enumerate() {
            let cdf = (x + 1.0) / 2.0;
            let emp_hi = (i as f64 + 1.0) / n;
            let emp_lo = i as f64 / n;
            ks = ks.max((cdf - emp_lo).abs()).max((emp_hi - cdf).abs());
        }
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn narrowband_single_and_coherent_paths() {
        let geom = UpaGeometry::new(3, 3, 0.5, 0.5).unwrap();
        let p = Path { psi_v: 0.4, psi_h: -0.3, gain: C64::new(1.0, 0.0), delay: 0.0 };
        let h = narrowband_channel(&geom, &PathSet::new(vec![p]).unwrap()).unwrap();
        let d = path_2d(&geom, 0.4, -0.3);
        for (a, b) in h.iter().zip(&d) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((norm(&h) - 1.0).abs() < 1e-12);

        // Two co-directional paths add linearly.
        let g1 = C64::new(0.3, -0.8);
        let g2 = C64::new(-1.1, 0.2);
        let ps = PathSet::new(vec![
            Path { gain: g1, ..p },
            Path { gain: g2, ..p },
        ])
        .unwrap();
        let h2 = narrowband_channel(&geom, &ps).unwrap();
        for (a, b) in h2.iter().zip(&d) {
            assert!((a - b * (g1 + g2)).norm() < 1e-12);
        }
    }

    #[test]
    fn narrowband_power_matches_path_count() {
        let geom = UpaGeometry::new(4, 4, 0.5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let ps = sample_paths_with(3, DelayProfile::Zero, &mut rng);
            let h = narrowband_channel(&geom, &ps).unwrap();
            acc += norm_sq(&h);
        }
        let mean = acc / trials as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean channel power {mean}");
    }

    #[test]
    fn wideband_single_tone_reduces_to_narrowband() {
        let geom = UpaGeometry::new(3, 2, 0.5, 0.5).unwrap();
        let ps = sample_paths(4, DelayProfile::default(), 99);
        let grid = WidebandGrid::new(1, 15e3, 2e9, 1, 1).unwrap();
        let wide = wideband_channel(&geom, &ps, &grid).unwrap();
        let narrow = narrowband_channel(&geom, &ps).unwrap();
        for (a, b) in wide.col(0).iter().zip(&narrow) {
            assert!((a - b).norm() < 1e-12, "wideband W=1 differs from narrowband");
        }
    }

    #[test]
    fn wideband_zero_delay_flat_at_matched_wavelength() {
        // With zero delays and negligible squint the columns coincide.
        let geom = UpaGeometry::new(2, 2, 0.5, 0.5).unwrap();
        let ps = sample_paths(3, DelayProfile::Zero, 5);
        let grid = WidebandGrid::new(8, 1.0, 1e15, 2, 2).unwrap();
        let wide = wideband_channel(&geom, &ps, &grid).unwrap();
        for w in 1..8 {
            for (a, b) in wide.col(w).iter().zip(wide.col(0)) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn grid_divisibility_enforced() {
        assert!(WidebandGrid::new(600, 15e3, 2e9, 4, 2).is_ok());
        let err = WidebandGrid::new(600, 15e3, 2e9, 1, 9).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "expected config error, got {err:?}");
    }

    #[test]
    fn adjacent_tone_correlation_is_high() {
        // W=600, 15 kHz spacing, 2 GHz carrier, P=4: adjacent tones stay
        // highly correlated on average.
        let geom = UpaGeometry::new(4, 4, 0.5, 0.5).unwrap();
        let grid = WidebandGrid::new(600, 15e3, 2e9, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for _ in 0..20 {
            let ps = sample_paths_with(4, DelayProfile::default(), &mut rng);
            let h = wideband_channel(&geom, &ps, &grid).unwrap();
            for w in 0..grid.w_total - 1 {
                let a = h.col(w);
                let b = h.col(w + 1);
                acc += inner(a, b).norm_sqr() / (norm_sq(a) * norm_sq(b));
                cnt += 1;
            }
        }
        let gamma = acc / cnt as f64;
        assert!(gamma > 0.9, "adjacent-tone correlation {gamma}");
    }
}
