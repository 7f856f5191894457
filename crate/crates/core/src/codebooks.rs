//! Quantization alphabets: oversampled DFT codebooks, direction-refinement
//! grids, and the combiner (weight-vector) codebook built by correlated
//! Grassmannian packing on an equal-gain phase grid.

use num_complex::Complex64 as C64;

use crate::channel::UpaGeometry;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_sqrt, normalized, CMat};

/// Oversampled DFT codebook for one array axis: 2^bits unit-norm codewords,
/// codeword q (1-based) steering the direction 2q/Q - 1 with phase step
/// pi per element regardless of the physical spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct DftCodebook {
    m_a: usize,
    bits: u32,
    codewords: Vec<Vec<C64>>,
}

impl DftCodebook {
    pub fn new(m_a: usize, bits: u32) -> Self {
        assert!(m_a >= 1, "codebook for a zero-element array");
        let q_total = 1usize << bits;
        let scale = 1.0 / (m_a as f64).sqrt();
        let codewords = (1..=q_total)
            .map(|q| {
                let dir = 2.0 * q as f64 / q_total as f64 - 1.0;
                (0..m_a)
                    .map(|m| C64::from_polar(scale, std::f64::consts::PI * m as f64 * dir))
                    .collect()
            })
            .collect();
        Self { m_a, bits, codewords }
    }

    pub fn m_a(&self) -> usize {
        self.m_a
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Codeword by 0-based index (index i steers direction 2(i+1)/Q - 1).
    pub fn codeword(&self, idx: usize) -> &[C64] {
        &self.codewords[idx]
    }

    pub fn codewords(&self) -> &[Vec<C64>] {
        &self.codewords
    }

    /// Steered direction of the 0-based codeword index, in [-1, 1].
    pub fn direction(&self, idx: usize) -> f64 {
        2.0 * (idx as f64 + 1.0) / self.len() as f64 - 1.0
    }

    /// One codeword per line, entries as comma-joined `re,im` pairs
    /// separated by single spaces.
    pub fn to_text(&self) -> String {
        codewords_to_text(&self.codewords)
    }

    pub fn from_text(m_a: usize, bits: u32, text: &str) -> Result<Self> {
        let codewords = codewords_from_text(text)?;
        if codewords.len() != 1usize << bits || codewords.iter().any(|c| c.len() != m_a) {
            return Err(Error::InvalidInput("codebook text does not match the declared shape".into()));
        }
        Ok(Self { m_a, bits, codewords })
    }
}

pub(crate) fn codewords_to_text(codewords: &[Vec<C64>]) -> String {
    let mut out = String::new();
    for cw in codewords {
        let line: Vec<String> = cw.iter().map(|c| format!("{},{}", c.re, c.im)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub(crate) fn codewords_from_text(text: &str) -> Result<Vec<Vec<C64>>> {
    let mut codewords = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cw = Vec::new();
        for tok in line.split_whitespace() {
            let (re, im) = tok
                .split_once(',')
                .ok_or_else(|| Error::InvalidInput(format!("bad codeword entry `{tok}`")))?;
            let re: f64 = re.parse().map_err(|_| Error::InvalidInput(format!("bad real part `{re}`")))?;
            let im: f64 = im.parse().map_err(|_| Error::InvalidInput(format!("bad imag part `{im}`")))?;
            cw.push(C64::new(re, im));
        }
        codewords.push(cw);
    }
    Ok(codewords)
}

/// Direction-offset grid for refining a coarse beam: 2^b_refine offsets,
/// symmetric about zero (zero itself excluded), uniform step
/// 2^-(b_base + b_refine).
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementGrid {
    b_base: u32,
    b_refine: u32,
    offsets: Vec<f64>,
}

impl RefinementGrid {
    pub fn new(b_base: u32, b_refine: u32) -> Self {
        assert!(b_refine >= 1, "refinement grid needs at least one bit");
        let count = 1usize << b_refine;
        let step = 2f64.powi(-((b_base + b_refine) as i32));
        let offsets = (0..count)
            .map(|k| step * (k as f64 - (count as f64 - 1.0) / 2.0))
            .collect();
        Self { b_base, b_refine, offsets }
    }

    pub fn b_base(&self) -> u32 {
        self.b_base
    }

    pub fn b_refine(&self) -> u32 {
        self.b_refine
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Analytic covariance of the effective channel C^H h h^H C for a set of
/// per-path quantized beams, assembled entrywise from the matched/unmatched
/// beam-path correlation cases and the expected ordered path powers.
///
/// Entry (c, d) sums over paths p: the per-axis factor is
///   Γ²(axis bits)    when p = c = d,
///   1/M_a            when p ≠ c, c = d,
///   Γ/M_a            when p ∈ {c, d}, c ≠ d,
///   1/M_a²           otherwise,
/// weighted by E|α_p|² = Σ_{q=p}^P 1/q.
pub fn analytic_covariance(
    geom: &UpaGeometry,
    n_beams: usize,
    bits_per_beam: &[u32],
    p_count: usize,
) -> CMat {
    assert!(n_beams >= 1 && bits_per_beam.len() == n_beams, "one bit budget per beam");
    assert!(p_count >= 1);
    let mv = geom.m_v as f64;
    let mh = geom.m_h as f64;
    let g2v: Vec<f64> = bits_per_beam.iter().map(|&b| crate::analysis::gamma_sq(geom.m_v, b)).collect();
    let g2h: Vec<f64> = bits_per_beam.iter().map(|&b| crate::analysis::gamma_sq(geom.m_h, b)).collect();
    let powers: Vec<f64> = (1..=p_count)
        .map(|n| crate::analysis::order_stat_gain(p_count, n).expect("n in range"))
        .collect();

    let mut r = CMat::zeros(n_beams, n_beams);
    for c in 0..n_beams {
        for d in 0..n_beams {
            let mut total = 0.0;
            for p in 0..p_count {
                let (tv, th) = if c == d {
                    if p == c {
                        (g2v[c], g2h[c])
                    } else {
                        (1.0 / mv, 1.0 / mh)
                    }
                } else if p == c {
                    (g2v[c].sqrt() / mv, g2h[c].sqrt() / mh)
                } else if p == d {
                    (g2v[d].sqrt() / mv, g2h[d].sqrt() / mh)
                } else {
                    (1.0 / (mv * mv), 1.0 / (mh * mh))
                };
                total += powers[p] * tv * th;
            }
            r[(c, d)] = C64::new(total, 0.0);
        }
    }
    r
}

/// Combiner (weight-vector) codebook: U = 2^b_c unit-norm codewords obtained
/// by coloring a max-min-chordal-distance packing of equal-gain seed vectors
/// with the effective-channel covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerCodebook {
    n_beams: usize,
    b_c: u32,
    phase_levels: u32,
    codewords: Vec<Vec<C64>>,
    seeds: Vec<Vec<C64>>,
    seed_phase_indices: Vec<Vec<u32>>,
}

impl CombinerCodebook {
    pub fn n_beams(&self) -> usize {
        self.n_beams
    }

    pub fn b_c(&self) -> u32 {
        self.b_c
    }

    pub fn phase_levels(&self) -> u32 {
        self.phase_levels
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codeword(&self, u: usize) -> &[C64] {
        &self.codewords[u]
    }

    pub fn codewords(&self) -> &[Vec<C64>] {
        &self.codewords
    }

    pub fn seeds(&self) -> &[Vec<C64>] {
        &self.seeds
    }

    /// Minimum pairwise chordal distance of the seed set.
    pub fn min_seed_distance(&self) -> f64 {
        let mut dmin = f64::INFINITY;
        for a in 0..self.seeds.len() {
            for b in (a + 1)..self.seeds.len() {
                dmin = dmin.min(chordal_distance(&self.seeds[a], &self.seeds[b]));
            }
        }
        dmin
    }

    pub fn to_text(&self) -> String {
        codewords_to_text(&self.codewords)
    }
}

/// Default phase quantization level for a codebook of U codewords.
pub fn default_phase_levels(u_codewords: usize) -> u32 {
    (2 * u_codewords).max(8) as u32
}

pub fn chordal_distance(a: &[C64], b: &[C64]) -> f64 {
    let ip = crate::linalg::inner(a, b).norm_sqr();
    (1.0 - ip.min(1.0)).max(0.0).sqrt()
}

/// Builds the combiner codebook from a Hermitian PSD covariance `r`.
///
/// Seed selection fixes the all-zero-phase vector first (chordal distance is
/// blind to global rotations, so candidates are the I^(N-1) phase classes
/// with a zero first phase), then packs the remaining U-1 seeds maximizing
/// the minimum pairwise chordal distance: exhaustively when the subset space
/// is small, greedy farthest-point otherwise. Ties pick the lexicographically
/// smallest phase-index tuple. Codewords are r^(1/2) e_u, renormalized.
pub fn combiner_codebook(
    r: &CMat,
    n_beams: usize,
    b_c: u32,
    phase_levels: u32,
) -> Result<CombinerCodebook> {
    assert_eq!(r.rows(), n_beams, "covariance must be N x N");
    if !r.is_hermitian(1e-9) {
        return Err(Error::NumericalDomain("combiner covariance is not Hermitian".into()));
    }
    let u_total = 1usize << b_c;

    if n_beams == 1 {
        // Combining degenerates to a scalar phase; a single trivial codeword.
        let one = vec![vec![C64::new(1.0, 0.0)]];
        return Ok(CombinerCodebook {
            n_beams,
            b_c,
            phase_levels,
            codewords: one.clone(),
            seeds: one,
            seed_phase_indices: vec![vec![phase_levels]],
        });
    }

    let i_levels = phase_levels as usize;
    let classes = i_levels.pow((n_beams - 1) as u32);
    if u_total > classes {
        return Err(Error::InfeasiblePacking { requested: u_total, available: classes });
    }

    // Candidate seeds: first entry phase fixed to zero (index I == phase 2π),
    // remaining entries on the I-point grid, in lexicographic index order.
    let mut candidates: Vec<(Vec<u32>, Vec<C64>)> = Vec::with_capacity(classes);
    let mut idx = vec![1u32; n_beams - 1];
    let scale = 1.0 / (n_beams as f64).sqrt();
    loop {
        let mut phases = Vec::with_capacity(n_beams);
        phases.push(phase_levels);
        phases.extend(idx.iter().copied());
        let seed: Vec<C64> = phases
            .iter()
            .map(|&k| C64::from_polar(scale, 2.0 * std::f64::consts::PI * k as f64 / phase_levels as f64))
            .collect();
        candidates.push((phases, seed));
        // Odometer increment over {1..I}^(N-1).
        let mut pos = n_beams - 1;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if idx[pos] < phase_levels {
                idx[pos] += 1;
                break;
            }
            idx[pos] = 1;
        }
        if idx.iter().all(|&k| k == 1) {
            break;
        }
    }
    debug_assert_eq!(candidates.len(), classes);

    // The all-zero-phase seed is the candidate with every index = I; it is
    // pinned as the first member of the packing.
    let zero_pos = candidates
        .iter()
        .position(|(p, _)| p.iter().all(|&k| k == phase_levels))
        .expect("zero-phase class exists");

    let chosen: Vec<usize> = if subsets_count(classes - 1, u_total - 1) <= 200_000 {
        exhaustive_packing(&candidates, zero_pos, u_total)
    } else {
        greedy_packing(&candidates, zero_pos, u_total)
    };

    let sqrt_r = hermitian_sqrt(r, 1e-12)?;
    let mut codewords = Vec::with_capacity(u_total);
    let mut seeds = Vec::with_capacity(u_total);
    let mut seed_phase_indices = Vec::with_capacity(u_total);
    for &ci in &chosen {
        let (phases, seed) = &candidates[ci];
        codewords.push(normalized(&sqrt_r.mul_vec(seed)));
        seeds.push(seed.clone());
        seed_phase_indices.push(phases.clone());
    }
    Ok(CombinerCodebook { n_beams, b_c, phase_levels, codewords, seeds, seed_phase_indices })
}

fn subsets_count(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc > 1 << 60 {
            return acc;
        }
    }
    acc
}

fn min_pairwise(candidates: &[(Vec<u32>, Vec<C64>)], subset: &[usize]) -> f64 {
    let mut dmin = f64::INFINITY;
    for i in 0..subset.len() {
        for j in (i + 1)..subset.len() {
            dmin = dmin.min(chordal_distance(&candidates[subset[i]].1, &candidates[subset[j]].1));
        }
    }
    dmin
}

fn exhaustive_packing(
    candidates: &[(Vec<u32>, Vec<C64>)],
    pinned: usize,
    u_total: usize,
) -> Vec<usize> {
    let others: Vec<usize> = (0..candidates.len()).filter(|&i| i != pinned).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut picks = vec![0usize; u_total - 1];
    combinations(&others, u_total - 1, &mut picks, 0, 0, &mut |subset| {
        let mut full = Vec::with_capacity(u_total);
        full.push(pinned);
        full.extend_from_slice(subset);
        let d = min_pairwise(candidates, &full);
        let replace = match &best {
            None => true,
            // Strictly-better distance wins; on ties the earlier (lexicographically
            // smaller index tuple) subset is kept since enumeration is ordered.
            Some((bd, _)) => d > *bd + 1e-12,
        };
        if replace {
            best = Some((d, full));
        }
    });
    best.expect("at least one subset").1
}

fn combinations(
    pool: &[usize],
    k: usize,
    scratch: &mut [usize],
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(scratch);
        return;
    }
    for i in start..pool.len() {
        scratch[depth] = pool[i];
        combinations(pool, k, scratch, depth + 1, i + 1, visit);
    }
}

fn greedy_packing(
    candidates: &[(Vec<u32>, Vec<C64>)],
    pinned: usize,
    u_total: usize,
) -> Vec<usize> {
    let mut chosen = vec![pinned];
    while chosen.len() < u_total {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..candidates.len() {
            if chosen.contains(&i) {
                continue;
            }
            let d = chosen
                .iter()
                .map(|&c| chordal_distance(&candidates[i].1, &candidates[c].1))
                .fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((bd, _)) => d > bd + 1e-12,
            };
            if better {
                best = Some((d, i));
            }
        }
        chosen.push(best.expect("candidates remain").1);
    }
    chosen
}
