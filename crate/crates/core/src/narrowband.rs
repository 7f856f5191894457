//! Narrowband (single-tone) CSI quantizers.
//!
//! Three families live here:
//! * sequential beam quantization over joint 2D DFT codebooks with a
//!   generalized-Rayleigh weight vector (the N-beam quantizer),
//! * the three-round hierarchical quantizer: a coarse dominant beam, then in
//!   parallel a beam-direction refinement (family 1) and an extra combined
//!   beam (family 2), then a one-bit selection,
//! * the Kronecker-product baselines that quantize singular vectors of the
//!   reshaped channel per axis.

use num_complex::Complex64 as C64;

use crate::channel::{ChannelMatrix, UpaGeometry};
use crate::codebooks::{CombinerCodebook, DftCodebook, RefinementGrid};
use crate::error::{Error, Result};
use crate::feedback::{Payload, PayloadReader};
use crate::linalg::{
    generalized_hermitian_eigen, hermitian_condition, inner, kron, normalized, projection_gain,
    solve_dense, CMat,
};
use crate::search::{
    dominant_pair_index, pair_inner_products, same_direction, shifted_family, two_beam_gain,
};

/// Condition-number ceiling on the beam Gram before the weight solve is
/// declared degenerate.
const GRAM_COND_LIMIT: f64 = 1e12;

/// Feedback-bit split r_N = [B_1..B_N, B_c], optionally carrying the
/// refinement budget B̌1 of the two-family scheme (2 B̌1 = 2 B2 + Bc).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeedbackAllocation {
    bits_per_beam: Vec<u32>,
    b_c: u32,
    b_refine: Option<u32>,
}

impl FeedbackAllocation {
    /// Plain split with no refinement family.
    pub fn new(bits_per_beam: Vec<u32>, b_c: u32) -> Self {
        assert!(!bits_per_beam.is_empty(), "at least one beam");
        Self { bits_per_beam, b_c, b_refine: None }
    }

    /// Two-family split (B1, B2, Bc) with B̌1 = (2 B2 + Bc) / 2; the sum must
    /// be even for the two codeword families to occupy the same bit budget.
    pub fn two_family(b1: u32, b2: u32, b_c: u32) -> Result<Self> {
        if b1 < 1 || b2 < 1 {
            return Err(Error::InvalidInput(format!(
                "two-family split needs at least one bit per beam, got B1={b1}, B2={b2}"
            )));
        }
        if (2 * b2 + b_c) % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "2*B2 + Bc = {} is odd; the refinement budget B̌1 would not be integral",
                2 * b2 + b_c
            )));
        }
        let b_refine = (2 * b2 + b_c) / 2;
        if b_refine < 1 {
            return Err(Error::InvalidInput("refinement budget must be at least one bit".into()));
        }
        Ok(Self { bits_per_beam: vec![b1, b2], b_c, b_refine: Some(b_refine) })
    }

    pub fn n_beams(&self) -> usize {
        self.bits_per_beam.len()
    }

    pub fn bits_per_beam(&self) -> &[u32] {
        &self.bits_per_beam
    }

    pub fn b_c(&self) -> u32 {
        self.b_c
    }

    pub fn b_refine(&self) -> Option<u32> {
        self.b_refine
    }

    /// Total budget B_T = B_c + Σ 2 B_n.
    pub fn total_bits(&self) -> u32 {
        self.b_c + self.bits_per_beam.iter().map(|&b| 2 * b).sum::<u32>()
    }
}

/// Which construction produced a codeword (and hence its payload layout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodewordFamily {
    /// Refined single beam (family 1).
    SingleBeam,
    /// Two combined beams (family 2).
    TwoBeam,
    /// Kronecker-product baseline.
    Kp,
    /// Enhanced Kronecker-product baseline.
    EnhancedKp,
}

/// A unit-norm beamformer with its feedback payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub vector: Vec<C64>,
    pub family: CodewordFamily,
    pub payload: Payload,
}

impl Codeword {
    /// Beamforming gain |h^H f|² against a channel.
    pub fn gain(&self, h: &[C64]) -> f64 {
        inner(&self.vector, h).norm_sqr()
    }
}

/// Output of the sequential N-beam quantizer: the selected beams, their
/// codebook indices, and the unquantized combining weight.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBeamSet {
    /// M x N matrix of selected unit-norm beams.
    pub beams: CMat,
    /// Per-beam (v, h) codeword indices (0-based).
    pub beam_indices: Vec<(usize, usize)>,
    /// Per-beam codebook sizes in bits.
    pub beam_bits: Vec<u32>,
    /// Unit-norm unquantized weight vector.
    pub weight: Vec<C64>,
}

impl QuantizedBeamSet {
    /// Unit-norm beamformer C z / ||C z||.
    pub fn beamformer(&self) -> Vec<C64> {
        normalized(&self.beams.mul_vec(&self.weight))
    }

    /// Combined gain |h^H C z|² / ||C z||².
    pub fn gain(&self, h: &[C64]) -> f64 {
        inner(&self.beamformer(), h).norm_sqr()
    }
}

/// Unquantized combining weight: the dominant generalized eigenvector of
/// (C^H C)^{-1} C^H h h^H C, i.e. the unit-norm scaling of
/// (C^H C)^{-1} C^H h. Errors when the beam Gram is numerically rank
/// deficient.
pub fn rayleigh_weight(beams: &CMat, h: &[C64]) -> Result<Vec<C64>> {
    let gram = beams.gram();
    let cond = hermitian_condition(&gram);
    if !cond.is_finite() || cond > GRAM_COND_LIMIT {
        return Err(Error::DegenerateBeamSet { cond });
    }
    let rhs = beams.herm_mul_vec(h);
    let z = solve_dense(&gram, &rhs)
        .ok_or(Error::DegenerateBeamSet { cond })?;
    Ok(normalized(&z))
}

/// Sequential beam quantization: the n-th beam maximizes the attainable
/// two-norm of the projection of h onto the span of the beams selected so
/// far plus the candidate, over the joint (v, h) DFT product codebook of
/// that round. Candidates that repeat an already-selected steering direction
/// are excluded. Ties resolve to the lowest (v, h) index.
pub fn beam_quantize(
    h: &[C64],
    geom: &UpaGeometry,
    n_beams: usize,
    bits_per_beam: &[u32],
) -> Result<QuantizedBeamSet> {
    if n_beams < 1 || bits_per_beam.len() != n_beams {
        return Err(Error::InvalidInput(format!(
            "need one bit budget per beam: N={n_beams}, got {}",
            bits_per_beam.len()
        )));
    }
    if h.len() != geom.antennas() {
        return Err(Error::InvalidInput("channel length does not match the array".into()));
    }

    let mut selected: Vec<SelectedBeam> = Vec::with_capacity(n_beams);
    for &bits in bits_per_beam.iter() {
        let cb_v = DftCodebook::new(geom.m_v, bits);
        let cb_h = DftCodebook::new(geom.m_h, bits);
        let table = pair_inner_products(h, geom, cb_v.codewords(), cb_h.codewords());
        let qh = cb_h.len();

        // Per-axis correlations of each previous beam with this round's
        // codebooks, so the candidate Gram assembles in O(n) per pair.
        let prev_v: Vec<Vec<C64>> = selected
            .iter()
            .map(|s| cb_v.codewords().iter().map(|c| inner(&s.col_v, c)).collect())
            .collect();
        let prev_h: Vec<Vec<C64>> = selected
            .iter()
            .map(|s| cb_h.codewords().iter().map(|c| inner(&s.col_h, c)).collect())
            .collect();

        let n_prev = selected.len();
        let mut gram = CMat::identity(n_prev + 1);
        for i in 0..n_prev {
            for j in 0..n_prev {
                gram[(i, j)] = selected[i].crosses[j];
            }
        }
        let mut rhs: Vec<C64> = selected.iter().map(|s| s.alpha).collect();
        rhs.push(C64::new(0.0, 0.0));

        let mut best: Option<(f64, usize, usize)> = None;
        for iv in 0..cb_v.len() {
            for ih in 0..qh {
                if selected.iter().any(|s| {
                    same_direction(s.idx_v, s.bits, iv, bits)
                        && same_direction(s.idx_h, s.bits, ih, bits)
                }) {
                    continue;
                }
                for j in 0..n_prev {
                    // c_j^H c_new factors per axis.
                    let cross = prev_v[j][iv] * prev_h[j][ih];
                    gram[(j, n_prev)] = cross;
                    gram[(n_prev, j)] = cross.conj();
                }
                rhs[n_prev] = table[iv * qh + ih];
                let Some(gain) = projection_gain(&gram, &rhs) else {
                    continue;
                };
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, iv, ih));
                }
            }
        }
        let Some((_, iv, ih)) = best else {
            return Err(Error::ExhaustedCodebook);
        };

        let col_v = cb_v.codeword(iv).to_vec();
        let col_h = cb_h.codeword(ih).to_vec();
        let beam = kron(&col_v, &col_h);
        let alpha = table[iv * qh + ih];
        let mut crosses: Vec<C64> = selected
            .iter()
            .map(|s| (inner(&s.col_v, &col_v) * inner(&s.col_h, &col_h)).conj())
            .collect();
        crosses.push(C64::new(1.0, 0.0));
        // Retrofit the new cross terms into the previously selected beams so
        // the next round's Gram assembly stays O(1) per entry.
        for s in selected.iter_mut() {
            let c_js = inner(&s.beam, &beam);
            s.crosses.push(c_js);
        }
        selected.push(SelectedBeam { idx_v: iv, idx_h: ih, bits, col_v, col_h, beam, alpha, crosses });
    }

    let beams = CMat::from_columns(&selected.iter().map(|s| s.beam.clone()).collect::<Vec<_>>());
    let weight = rayleigh_weight(&beams, h)?;
    Ok(QuantizedBeamSet {
        beams,
        beam_indices: selected.iter().map(|s| (s.idx_v, s.idx_h)).collect(),
        beam_bits: selected.iter().map(|s| s.bits).collect(),
        weight,
    })
}

struct SelectedBeam {
    idx_v: usize,
    idx_h: usize,
    bits: u32,
    col_v: Vec<C64>,
    col_h: Vec<C64>,
    beam: Vec<C64>,
    alpha: C64,
    /// c_self^H c_j for every selected beam j (self term = 1).
    crosses: Vec<C64>,
}

/// Round 1 of the hierarchical search: dominant joint (v, h) DFT pair under
/// B1-bit codebooks. Tie-break: lowest (v, h) index.
pub fn coarse_search(h: &[C64], geom: &UpaGeometry, b1: u32) -> (usize, usize) {
    let cb_v = DftCodebook::new(geom.m_v, b1);
    let cb_h = DftCodebook::new(geom.m_h, b1);
    dominant_pair_index(h, geom, &cb_v, &cb_h)
}

/// Round 2, family 1: beam-shift refinement of the coarse beam over the
/// joint offset grid.
pub fn refine_single(
    h: &[C64],
    geom: &UpaGeometry,
    b1: u32,
    coarse: (usize, usize),
    grid: &RefinementGrid,
) -> Codeword {
    let cb_v = DftCodebook::new(geom.m_v, b1);
    let cb_h = DftCodebook::new(geom.m_h, b1);
    let quantizer = ThreeRoundParts {
        geom: *geom,
        b1,
        cb1_v: &cb_v,
        cb1_h: &cb_h,
    };
    quantizer.family_one(h, coarse, grid)
}

/// Round 2, family 2: joint search for an additional B2-bit beam and a
/// quantized combiner, anchored on the coarse beam.
pub fn second_beam(
    h: &[C64],
    geom: &UpaGeometry,
    b1: u32,
    coarse: (usize, usize),
    b2: u32,
    combiners: &CombinerCodebook,
) -> Result<Codeword> {
    let cb_v = DftCodebook::new(geom.m_v, b1);
    let cb_h = DftCodebook::new(geom.m_h, b1);
    let quantizer = ThreeRoundParts {
        geom: *geom,
        b1,
        cb1_v: &cb_v,
        cb1_h: &cb_h,
    };
    quantizer.family_two(h, coarse, b2, combiners)
}

/// Round 3: one-bit selection between the two family codewords; family 1
/// wins ties.
pub fn select_final(h: &[C64], f1: &Codeword, f2: &Codeword) -> Codeword {
    if f1.gain(h) >= f2.gain(h) {
        f1.clone()
    } else {
        f2.clone()
    }
}

struct ThreeRoundParts<'a> {
    geom: UpaGeometry,
    b1: u32,
    cb1_v: &'a DftCodebook,
    cb1_h: &'a DftCodebook,
}

impl ThreeRoundParts<'_> {
    fn family_one(&self, h: &[C64], coarse: (usize, usize), grid: &RefinementGrid) -> Codeword {
        let base_v = self.cb1_v.codeword(coarse.0);
        let base_h = self.cb1_h.codeword(coarse.1);
        let fam_v = shifted_family(base_v, self.geom.d_v, grid.offsets());
        let fam_h = shifted_family(base_h, self.geom.d_h, grid.offsets());
        let table = pair_inner_products(h, &self.geom, &fam_v, &fam_h);
        let qh = fam_h.len();
        let mut best = (0usize, 0usize);
        let mut best_gain = -1.0;
        for (flat, v) in table.iter().enumerate() {
            let gain = v.norm_sqr();
            if gain > best_gain {
                best_gain = gain;
                best = (flat / qh, flat % qh);
            }
        }
        let vector = kron(&fam_v[best.0], &fam_h[best.1]);
        let mut payload = Payload::new();
        payload.push_field(0, 1);
        payload.push_field(coarse.0 as u64, self.b1);
        payload.push_field(coarse.1 as u64, self.b1);
        payload.push_field(best.0 as u64, grid.b_refine());
        payload.push_field(best.1 as u64, grid.b_refine());
        Codeword { vector, family: CodewordFamily::SingleBeam, payload }
    }

    fn family_two(
        &self,
        h: &[C64],
        coarse: (usize, usize),
        b2: u32,
        combiners: &CombinerCodebook,
    ) -> Result<Codeword> {
        if combiners.n_beams() != 2 {
            return Err(Error::InvalidInput(format!(
                "family-2 search needs a two-beam combiner codebook, got N={}",
                combiners.n_beams()
            )));
        }
        let c1_v = self.cb1_v.codeword(coarse.0);
        let c1_h = self.cb1_h.codeword(coarse.1);
        let c1 = kron(c1_v, c1_h);
        let a1 = inner(&c1, h);

        let cb2_v = DftCodebook::new(self.geom.m_v, b2);
        let cb2_h = DftCodebook::new(self.geom.m_h, b2);
        let table = pair_inner_products(h, &self.geom, cb2_v.codewords(), cb2_h.codewords());
        // Per-axis correlations with the anchor beam.
        let cross_v: Vec<C64> = cb2_v.codewords().iter().map(|c| inner(c1_v, c)).collect();
        let cross_h: Vec<C64> = cb2_h.codewords().iter().map(|c| inner(c1_h, c)).collect();

        let qh = cb2_h.len();
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for iv in 0..cb2_v.len() {
            for ih in 0..qh {
                if same_direction(coarse.0, self.b1, iv, b2)
                    && same_direction(coarse.1, self.b1, ih, b2)
                {
                    continue;
                }
                let a2 = table[iv * qh + ih];
                let g = cross_v[iv] * cross_h[ih];
                for (zi, z) in combiners.codewords().iter().enumerate() {
                    let Some(gain) = two_beam_gain(a1, a2, g, z) else {
                        continue;
                    };
                    if best.map_or(true, |(bg, _, _, _)| gain > bg) {
                        best = Some((gain, iv, ih, zi));
                    }
                }
            }
        }
        let Some((_, iv, ih, zi)) = best else {
            return Err(Error::ExhaustedCodebook);
        };
        let c2 = kron(cb2_v.codeword(iv), cb2_h.codeword(ih));
        let vector = assemble_two_beam(&c1, &c2, combiners.codeword(zi));
        let mut payload = Payload::new();
        payload.push_field(1, 1);
        payload.push_field(coarse.0 as u64, self.b1);
        payload.push_field(coarse.1 as u64, self.b1);
        payload.push_field(iv as u64, b2);
        payload.push_field(ih as u64, b2);
        payload.push_field(zi as u64, combiners.b_c());
        Ok(Codeword { vector, family: CodewordFamily::TwoBeam, payload })
    }
}

/// Unit-norm combination [c1 c2] z / ||[c1 c2] z||.
pub(crate) fn assemble_two_beam(c1: &[C64], c2: &[C64], z: &[C64]) -> Vec<C64> {
    let mut v: Vec<C64> = c1
        .iter()
        .zip(c2)
        .map(|(a, b)| a * z[0] + b * z[1])
        .collect();
    let n = crate::linalg::norm(&v);
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

/// Prebuilt three-round narrowband quantizer (codebooks constructed once).
#[derive(Debug, Clone)]
pub struct NarrowbandQuantizer {
    geom: UpaGeometry,
    alloc: FeedbackAllocation,
    cb1_v: DftCodebook,
    cb1_h: DftCodebook,
    grid: RefinementGrid,
    combiners: CombinerCodebook,
}

impl NarrowbandQuantizer {
    /// `alloc` must be a two-family split; `combiners` a matching two-beam
    /// codebook.
    pub fn new(
        geom: UpaGeometry,
        alloc: FeedbackAllocation,
        combiners: CombinerCodebook,
    ) -> Result<Self> {
        let Some(b_refine) = alloc.b_refine() else {
            return Err(Error::InvalidInput(
                "three-round quantizer needs a two-family allocation (use FeedbackAllocation::two_family)".into(),
            ));
        };
        if alloc.n_beams() != 2 {
            return Err(Error::InvalidInput("three-round quantizer uses exactly two beams".into()));
        }
        if combiners.n_beams() != 2 || combiners.b_c() != alloc.b_c() {
            return Err(Error::InvalidInput("combiner codebook does not match the allocation".into()));
        }
        let b1 = alloc.bits_per_beam()[0];
        Ok(Self {
            cb1_v: DftCodebook::new(geom.m_v, b1),
            cb1_h: DftCodebook::new(geom.m_h, b1),
            grid: RefinementGrid::new(b1, b_refine),
            geom,
            alloc,
            combiners,
        })
    }

    pub fn allocation(&self) -> &FeedbackAllocation {
        &self.alloc
    }

    pub fn geometry(&self) -> &UpaGeometry {
        &self.geom
    }

    pub fn combiners(&self) -> &CombinerCodebook {
        &self.combiners
    }

    pub fn refinement_grid(&self) -> &RefinementGrid {
        &self.grid
    }

    fn parts(&self) -> ThreeRoundParts<'_> {
        ThreeRoundParts {
            geom: self.geom,
            b1: self.alloc.bits_per_beam()[0],
            cb1_v: &self.cb1_v,
            cb1_h: &self.cb1_h,
        }
    }

    pub fn coarse(&self, h: &[C64]) -> (usize, usize) {
        dominant_pair_index(h, &self.geom, &self.cb1_v, &self.cb1_h)
    }

    pub fn family_one(&self, h: &[C64], coarse: (usize, usize)) -> Codeword {
        self.parts().family_one(h, coarse, &self.grid)
    }

    pub fn family_two(&self, h: &[C64], coarse: (usize, usize)) -> Result<Codeword> {
        self.parts()
            .family_two(h, coarse, self.alloc.bits_per_beam()[1], &self.combiners)
    }

    /// Full three-round quantization.
    pub fn quantize(&self, h: &[C64]) -> Result<Codeword> {
        let coarse = self.coarse(h);
        let f1 = self.family_one(h, coarse);
        let f2 = self.family_two(h, coarse)?;
        Ok(select_final(h, &f1, &f2))
    }

    /// Rebuilds the codeword vector from its feedback payload.
    pub fn decode(&self, payload: &Payload) -> Result<Codeword> {
        let mut r = payload.reader();
        let b1 = self.alloc.bits_per_beam()[0];
        let b2 = self.alloc.bits_per_beam()[1];
        let selector = r.read_field(1)?;
        let iv = r.read_field(b1)? as usize;
        let ih = r.read_field(b1)? as usize;
        self.check_index(iv, self.cb1_v.len(), "v-index")?;
        self.check_index(ih, self.cb1_h.len(), "h-index")?;
        if selector == 0 {
            let tv = r.read_field(self.grid.b_refine())? as usize;
            let th = r.read_field(self.grid.b_refine())? as usize;
            self.check_index(tv, self.grid.len(), "θv-index")?;
            self.check_index(th, self.grid.len(), "θh-index")?;
            let sv = crate::search::shifted_codeword(
                self.cb1_v.codeword(iv),
                self.geom.d_v,
                self.grid.offsets()[tv],
            );
            let sh = crate::search::shifted_codeword(
                self.cb1_h.codeword(ih),
                self.geom.d_h,
                self.grid.offsets()[th],
            );
            Ok(Codeword {
                vector: kron(&sv, &sh),
                family: CodewordFamily::SingleBeam,
                payload: payload.clone(),
            })
        } else {
            let cb2_v = DftCodebook::new(self.geom.m_v, b2);
            let cb2_h = DftCodebook::new(self.geom.m_h, b2);
            let jv = r.read_field(b2)? as usize;
            let jh = r.read_field(b2)? as usize;
            let zi = r.read_field(self.alloc.b_c())? as usize;
            self.check_index(zi, self.combiners.len(), "combiner index")?;
            let c1 = kron(self.cb1_v.codeword(iv), self.cb1_h.codeword(ih));
            let c2 = kron(cb2_v.codeword(jv), cb2_h.codeword(jh));
            Ok(Codeword {
                vector: assemble_two_beam(&c1, &c2, self.combiners.codeword(zi)),
                family: CodewordFamily::TwoBeam,
                payload: payload.clone(),
            })
        }
    }

    fn check_index(&self, idx: usize, len: usize, what: &str) -> Result<()> {
        if idx >= len {
            return Err(Error::Payload(format!("{what} {idx} out of range {len}")));
        }
        Ok(())
    }
}

/// Kronecker-product baseline: quantizes the dominant left/right singular
/// vectors of the reshaped channel with per-axis DFT codebooks of
/// `b_total`/2 bits each; the codeword is c_v ⊗ conj(c_h).
pub fn kp_baseline(h: &[C64], geom: &UpaGeometry, b_total: u32) -> Result<Codeword> {
    if b_total % 2 != 0 {
        return Err(Error::InvalidInput(format!("KP baseline needs an even budget, got {b_total}")));
    }
    let b1 = b_total / 2;
    let hbar = reshape(h, geom);
    let (_, us, vs) = crate::linalg::singular_pairs(&hbar);
    let cb_v = DftCodebook::new(geom.m_v, b1);
    let cb_h = DftCodebook::new(geom.m_h, b1);
    let iv = best_axis_index(&us[0], &cb_v);
    let ih = best_axis_index(&vs[0], &cb_h);
    let vector = kron_conj_h(cb_v.codeword(iv), cb_h.codeword(ih));
    let mut payload = Payload::new();
    payload.push_field(iv as u64, b1);
    payload.push_field(ih as u64, b1);
    Ok(Codeword { vector, family: CodewordFamily::Kp, payload })
}

/// Enhanced KP baseline: quantizes the two dominant singular-vector pairs
/// (B1 and B2 bits per axis) and returns the unweighted, unit-normalized sum
/// of the two Kronecker reconstructions.
pub fn enhanced_kp_baseline(h: &[C64], geom: &UpaGeometry, b1: u32, b2: u32) -> Result<Codeword> {
    if geom.m_v.min(geom.m_h) < 2 {
        return Err(Error::InvalidInput(
            "enhanced KP needs a second singular pair; both array axes must have >= 2 antennas".into(),
        ));
    }
    let hbar = reshape(h, geom);
    let (_, us, vs) = crate::linalg::singular_pairs(&hbar);
    let cb1_v = DftCodebook::new(geom.m_v, b1);
    let cb1_h = DftCodebook::new(geom.m_h, b1);
    let cb2_v = DftCodebook::new(geom.m_v, b2);
    let cb2_h = DftCodebook::new(geom.m_h, b2);
    let i1v = best_axis_index(&us[0], &cb1_v);
    let i1h = best_axis_index(&vs[0], &cb1_h);
    let i2v = best_axis_index(&us[1], &cb2_v);
    let i2h = best_axis_index(&vs[1], &cb2_h);
    let f1 = kron_conj_h(cb1_v.codeword(i1v), cb1_h.codeword(i1h));
    let f2 = kron_conj_h(cb2_v.codeword(i2v), cb2_h.codeword(i2h));
    let vector = normalized(&f1.iter().zip(&f2).map(|(a, b)| a + b).collect::<Vec<_>>());
    let mut payload = Payload::new();
    payload.push_field(1, 1);
    payload.push_field(i1v as u64, b1);
    payload.push_field(i1h as u64, b1);
    payload.push_field(1, 1);
    payload.push_field(i2v as u64, b2);
    payload.push_field(i2h as u64, b2);
    Ok(Codeword { vector, family: CodewordFamily::EnhancedKp, payload })
}

/// Decodes a KP-baseline payload back to its codeword vector.
pub fn decode_kp(payload: &Payload, geom: &UpaGeometry, b_total: u32) -> Result<Codeword> {
    let b1 = b_total / 2;
    let mut r = payload.reader();
    let iv = r.read_field(b1)? as usize;
    let ih = r.read_field(b1)? as usize;
    let cb_v = DftCodebook::new(geom.m_v, b1);
    let cb_h = DftCodebook::new(geom.m_h, b1);
    Ok(Codeword {
        vector: kron_conj_h(cb_v.codeword(iv), cb_h.codeword(ih)),
        family: CodewordFamily::Kp,
        payload: payload.clone(),
    })
}

/// Decodes an enhanced-KP payload (presence flags must be set).
pub fn decode_enhanced_kp(
    payload: &Payload,
    geom: &UpaGeometry,
    b1: u32,
    b2: u32,
) -> Result<Codeword> {
    let mut r = payload.reader();
    let read_beam = |r: &mut PayloadReader<'_>, bits: u32| -> Result<(usize, usize)> {
        if r.read_field(1)? != 1 {
            return Err(Error::Payload("enhanced-KP beam presence flag not set".into()));
        }
        Ok((r.read_field(bits)? as usize, r.read_field(bits)? as usize))
    };
    let (i1v, i1h) = read_beam(&mut r, b1)?;
    let (i2v, i2h) = read_beam(&mut r, b2)?;
    let cb1_v = DftCodebook::new(geom.m_v, b1);
    let cb1_h = DftCodebook::new(geom.m_h, b1);
    let cb2_v = DftCodebook::new(geom.m_v, b2);
    let cb2_h = DftCodebook::new(geom.m_h, b2);
    let f1 = kron_conj_h(cb1_v.codeword(i1v), cb1_h.codeword(i1h));
    let f2 = kron_conj_h(cb2_v.codeword(i2v), cb2_h.codeword(i2h));
    Ok(Codeword {
        vector: normalized(&f1.iter().zip(&f2).map(|(a, b)| a + b).collect::<Vec<_>>()),
        family: CodewordFamily::EnhancedKp,
        payload: payload.clone(),
    })
}

/// Reshape h into M_v x M_h with row i holding antennas i*M_h..(i+1)*M_h.
fn reshape(h: &[C64], geom: &UpaGeometry) -> CMat {
    let mut m = CMat::zeros(geom.m_v, geom.m_h);
    for i in 0..geom.m_v {
        for k in 0..geom.m_h {
            m[(i, k)] = h[i * geom.m_h + k];
        }
    }
    m
}

/// c_v ⊗ conj(c_h), the KP-baseline codeword structure.
fn kron_conj_h(cv: &[C64], ch: &[C64]) -> Vec<C64> {
    let ch_conj: Vec<C64> = ch.iter().map(|c| c.conj()).collect();
    kron(cv, &ch_conj)
}

fn best_axis_index(target: &[C64], cb: &DftCodebook) -> usize {
    let mut best = 0usize;
    let mut best_gain = -1.0;
    for (i, c) in cb.codewords().iter().enumerate() {
        let gain = inner(target, c).norm_sqr();
        if gain > best_gain {
            best_gain = gain;
            best = i;
        }
    }
    best
}

/// Rank-T precoder from the MIMO extension of the beam quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoPrecoder {
    pub beam_set: QuantizedBeamSet,
    /// Unit-norm per-layer beamformers f_t = C z̄_t / ||C z̄_t||.
    pub beamformers: Vec<Vec<C64>>,
}

impl MimoPrecoder {
    /// Sum over layers and receive antennas of |h_v^H f_t|².
    pub fn sum_gain(&self, h_mimo: &ChannelMatrix) -> f64 {
        self.beamformers
            .iter()
            .map(|f| {
                (0..h_mimo.cols())
                    .map(|v| inner(f, h_mimo.col(v)).norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }
}

/// MIMO beam quantization: beams maximize the principal generalized
/// eigenvalue of the pencil (C^H H H^H C, C^H C); the t-th layer weight is
/// the t-th generalized eigenvector.
pub fn mimo_quantize(
    h_mimo: &ChannelMatrix,
    geom: &UpaGeometry,
    n_beams: usize,
    bits_per_beam: &[u32],
    rank: usize,
) -> Result<MimoPrecoder> {
    let v_antennas = h_mimo.cols();
    if rank > n_beams {
        return Err(Error::InsufficientBeams { rank, beams: n_beams });
    }
    if rank < 1 || rank > v_antennas {
        return Err(Error::InvalidInput(format!(
            "rank {rank} outside 1..=min(V={v_antennas}, N={n_beams})"
        )));
    }
    if bits_per_beam.len() != n_beams {
        return Err(Error::InvalidInput("need one bit budget per beam".into()));
    }
    if h_mimo.rows() != geom.antennas() {
        return Err(Error::InvalidInput("channel rows do not match the array".into()));
    }

    let mut selected: Vec<SelectedBeam> = Vec::new();
    // Per-selected-beam rows of C^H H (length V each).
    let mut rows: Vec<Vec<C64>> = Vec::new();

    for &bits in bits_per_beam.iter() {
        let cb_v = DftCodebook::new(geom.m_v, bits);
        let cb_h = DftCodebook::new(geom.m_h, bits);
        let qh = cb_h.len();
        // Candidate inner products per receive antenna.
        let tables: Vec<Vec<C64>> = (0..v_antennas)
            .map(|t| pair_inner_products(h_mimo.col(t), geom, cb_v.codewords(), cb_h.codewords()))
            .collect();
        let prev_v: Vec<Vec<C64>> = selected
            .iter()
            .map(|s| cb_v.codewords().iter().map(|c| inner(&s.col_v, c)).collect())
            .collect();
        let prev_h: Vec<Vec<C64>> = selected
            .iter()
            .map(|s| cb_h.codewords().iter().map(|c| inner(&s.col_h, c)).collect())
            .collect();

        let n_prev = selected.len();
        let dim = n_prev + 1;
        let mut best: Option<(f64, usize, usize)> = None;
        for iv in 0..cb_v.len() {
            for ih in 0..qh {
                if selected.iter().any(|s| {
                    same_direction(s.idx_v, s.bits, iv, bits)
                        && same_direction(s.idx_h, s.bits, ih, bits)
                }) {
                    continue;
                }
                let mut gram = CMat::identity(dim);
                for i in 0..n_prev {
                    for j in 0..n_prev {
                        gram[(i, j)] = selected[i].crosses[j];
                    }
                    let cross = prev_v[i][iv] * prev_h[i][ih];
                    gram[(i, n_prev)] = cross;
                    gram[(n_prev, i)] = cross.conj();
                }
                // A = B B^H with B the candidate C^H H.
                let mut a = CMat::zeros(dim, dim);
                for t in 0..v_antennas {
                    let mut col: Vec<C64> = (0..n_prev).map(|i| rows[i][t]).collect();
                    col.push(tables[t][iv * qh + ih]);
                    for i in 0..dim {
                        for j in 0..dim {
                            a[(i, j)] += col[i] * col[j].conj();
                        }
                    }
                }
                let Ok((vals, _)) = generalized_hermitian_eigen(&a, &gram) else {
                    continue;
                };
                let gain = vals[0];
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, iv, ih));
                }
            }
        }
        let Some((_, iv, ih)) = best else {
            return Err(Error::ExhaustedCodebook);
        };
        let col_v = cb_v.codeword(iv).to_vec();
        let col_h = cb_h.codeword(ih).to_vec();
        let beam = kron(&col_v, &col_h);
        let mut crosses: Vec<C64> = selected.iter().map(|s| inner(&s.beam, &beam).conj()).collect();
        crosses.push(C64::new(1.0, 0.0));
        for s in selected.iter_mut() {
            let c_js = inner(&s.beam, &beam);
            s.crosses.push(c_js);
        }
        rows.push((0..v_antennas).map(|t| inner(&beam, h_mimo.col(t))).collect());
        selected.push(SelectedBeam {
            idx_v: iv,
            idx_h: ih,
            bits,
            col_v,
            col_h,
            beam,
            alpha: C64::new(0.0, 0.0),
            crosses,
        });
    }

    let beams = CMat::from_columns(&selected.iter().map(|s| s.beam.clone()).collect::<Vec<_>>());
    let gram = beams.gram();
    let cond = hermitian_condition(&gram);
    if !cond.is_finite() || cond > GRAM_COND_LIMIT {
        return Err(Error::DegenerateBeamSet { cond });
    }
    let mut a = CMat::zeros(n_beams, n_beams);
    for t in 0..v_antennas {
        let col = beams.herm_mul_vec(h_mimo.col(t));
        for i in 0..n_beams {
            for j in 0..n_beams {
                a[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    let (_, vecs) = generalized_hermitian_eigen(&a, &gram)?;
    let beamformers = (0..rank)
        .map(|t| normalized(&beams.mul_vec(&vecs[t])))
        .collect();
    Ok(MimoPrecoder {
        beam_set: QuantizedBeamSet {
            beam_indices: selected.iter().map(|s| (s.idx_v, s.idx_h)).collect(),
            beam_bits: selected.iter().map(|s| s.bits).collect(),
            weight: vecs[0].clone(),
            beams,
        },
        beamformers,
    })
}
