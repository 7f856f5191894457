//! Two-level wideband CSI quantizer.
//!
//! Level 1 picks two shared 2D DFT beams per wideband resource block from
//! the block's aggregate (Frobenius) gains. Level 2 serves each narrowband
//! resource block inside it: round 1 refines the first beam's direction on
//! the offset grid, round 2 refines it more coarsely while combining with
//! the second beam through the combiner codebook, and round 3 keeps the
//! better candidate with one selector bit.

use num_complex::Complex64 as C64;

use crate::channel::{ChannelBlock, ChannelMatrix, UpaGeometry, WidebandGrid};
use crate::codebooks::{CombinerCodebook, DftCodebook, RefinementGrid};
use crate::error::{Error, Result};
use crate::feedback::{index_width, Payload};
use crate::linalg::{inner, kron};
use crate::narrowband::assemble_two_beam;
use crate::search::{block_pair_stats, same_direction, shifted_family};

/// Bit budgets of the wideband scheme: level-1 beams (B_W1, B_W2) per
/// wideband RB; per narrowband RB 2*B_N1 bits split between the family-1
/// refinement (B_N1 per axis) and the family-2 refinement-plus-combiner
/// (B_N2 per axis plus B_c), so 2 B_N1 = 2 B_N2 + B_c.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WidebandAllocation {
    pub b_w1: u32,
    pub b_w2: u32,
    pub b_n1: u32,
    pub b_n2: u32,
    pub b_c: u32,
}

impl WidebandAllocation {
    pub fn new(b_w1: u32, b_w2: u32, b_n1: u32, b_n2: u32, b_c: u32) -> Result<Self> {
        if b_n1 < 1 || b_n2 < 1 {
            return Err(Error::InvalidInput(
                "wideband refinement budgets must be at least one bit".into(),
            ));
        }
        if 2 * b_n1 != 2 * b_n2 + b_c {
            return Err(Error::InvalidInput(format!(
                "narrowband-RB split violated: 2*B_N1 = {} but 2*B_N2 + B_c = {}",
                2 * b_n1,
                2 * b_n2 + b_c
            )));
        }
        Ok(Self { b_w1, b_w2, b_n1, b_n2, b_c })
    }
}

/// Resource-block index ranges of a wideband grid (0-based tone indices).
#[derive(Debug, Clone, PartialEq)]
pub struct RbPartition {
    /// L contiguous wideband ranges.
    pub wide: Vec<std::ops::Range<usize>>,
    /// Per wideband RB, its R narrowband sub-ranges.
    pub narrow: Vec<Vec<std::ops::Range<usize>>>,
}

/// Splits W tones into L wideband RBs of R narrowband RBs each; errors when
/// the divisions are uneven.
pub fn partition_rbs(grid: &WidebandGrid) -> Result<RbPartition> {
    grid.validate()?;
    let per_l = grid.tones_per_wide_rb();
    let per_r = grid.tones_per_narrow_rb();
    let wide: Vec<_> = (0..grid.l_blocks)
        .map(|l| l * per_l..(l + 1) * per_l)
        .collect();
    let narrow = wide
        .iter()
        .map(|w| {
            (0..grid.r_blocks)
                .map(|r| w.start + r * per_r..w.start + (r + 1) * per_r)
                .collect()
        })
        .collect();
    Ok(RbPartition { wide, narrow })
}

/// Total feedback bits of the wideband scheme over the whole band:
/// 2 (B_W1 + B_W2) L + (2 B_N1 + 1) R L.
pub fn wideband_overhead(grid: &WidebandGrid, b_w1: u32, b_w2: u32, b_n1: u32) -> u64 {
    let l = grid.l_blocks as u64;
    let r = grid.r_blocks as u64;
    2 * (b_w1 as u64 + b_w2 as u64) * l + (2 * b_n1 as u64 + 1) * r * l
}

/// Level-1 output for one wideband RB.
#[derive(Debug, Clone, PartialEq)]
pub struct Level1Beams {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub c1_v: Vec<C64>,
    pub c1_h: Vec<C64>,
    pub c1: Vec<C64>,
    pub c2: Vec<C64>,
}

impl Level1Beams {
    /// Level-1 payload: the two beam index pairs.
    pub fn payload(&self, alloc: &WidebandAllocation) -> Payload {
        let mut p = Payload::new();
        p.push_field(self.first.0 as u64, alloc.b_w1);
        p.push_field(self.first.1 as u64, alloc.b_w1);
        p.push_field(self.second.0 as u64, alloc.b_w2);
        p.push_field(self.second.1 as u64, alloc.b_w2);
        p
    }
}

/// One narrowband RB's quantization result.
#[derive(Debug, Clone, PartialEq)]
pub struct RbCodeword {
    pub l_index: usize,
    pub r_index: usize,
    /// false selects family 1 (refined beam), true selects family 2.
    pub two_beam: bool,
    pub vector: Vec<C64>,
    /// Block gain ||H^H f||² of the winning codeword.
    pub block_gain: f64,
    /// (ℓ, r)-prefixed per-RB payload.
    pub payload: Payload,
}

/// Full wideband quantization state: per-wideband-RB shared beams plus
/// per-narrowband-RB codewords.
#[derive(Debug, Clone, PartialEq)]
pub struct WidebandState {
    pub alloc: WidebandAllocation,
    pub level1: Vec<Level1Beams>,
    /// Indexed l * R + r.
    pub codewords: Vec<RbCodeword>,
}

impl WidebandState {
    /// Quantization bits actually spent, excluding RB-coordinate prefixes;
    /// equals [`wideband_overhead`].
    pub fn quantization_bits(&self, grid: &WidebandGrid) -> u64 {
        let l1: u64 = self
            .level1
            .iter()
            .map(|b| b.payload(&self.alloc).len() as u64)
            .sum();
        let prefix = (index_width(grid.l_blocks) + index_width(grid.r_blocks)) as u64;
        let l2: u64 = self
            .codewords
            .iter()
            .map(|c| c.payload.len() as u64 - prefix)
            .sum();
        l1 + l2
    }
}

/// Prebuilt wideband quantizer.
#[derive(Debug, Clone)]
pub struct WidebandQuantizer {
    geom: UpaGeometry,
    alloc: WidebandAllocation,
    cb_w1_v: DftCodebook,
    cb_w1_h: DftCodebook,
    cb_w2_v: DftCodebook,
    cb_w2_h: DftCodebook,
    grid_n1: RefinementGrid,
    grid_n2: RefinementGrid,
    combiners: CombinerCodebook,
}

impl WidebandQuantizer {
    pub fn new(
        geom: UpaGeometry,
        alloc: WidebandAllocation,
        combiners: CombinerCodebook,
    ) -> Result<Self> {
        if combiners.n_beams() != 2 || combiners.b_c() != alloc.b_c {
            return Err(Error::InvalidInput(
                "wideband quantizer needs a two-beam combiner codebook matching B_c".into(),
            ));
        }
        Ok(Self {
            cb_w1_v: DftCodebook::new(geom.m_v, alloc.b_w1),
            cb_w1_h: DftCodebook::new(geom.m_h, alloc.b_w1),
            cb_w2_v: DftCodebook::new(geom.m_v, alloc.b_w2),
            cb_w2_h: DftCodebook::new(geom.m_h, alloc.b_w2),
            grid_n1: RefinementGrid::new(alloc.b_w1, alloc.b_n1),
            grid_n2: RefinementGrid::new(alloc.b_w1, alloc.b_n2),
            geom,
            alloc,
            combiners,
        })
    }

    pub fn allocation(&self) -> &WidebandAllocation {
        &self.alloc
    }

    /// Level 1: shared beam pair for one wideband RB.
    ///
    /// The first beam maximizes the block gain ||H^H (c_v ⊗ c_h)||²; the
    /// second maximizes the combined normalized block gain jointly with a
    /// combiner codeword. Ties resolve to the lowest index.
    pub fn level1(&self, block: &ChannelBlock<'_>) -> Level1Beams {
        let stats1 = block_pair_stats(block, &self.geom, self.cb_w1_v.codewords(), self.cb_w1_h.codewords(), None);
        let qh1 = self.cb_w1_h.len();
        let mut best1 = 0usize;
        let mut best1_gain = -1.0;
        for (flat, &p) in stats1.power.iter().enumerate() {
            if p > best1_gain {
                best1_gain = p;
                best1 = flat;
            }
        }
        let first = (best1 / qh1, best1 % qh1);
        let c1_v = self.cb_w1_v.codeword(first.0).to_vec();
        let c1_h = self.cb_w1_h.codeword(first.1).to_vec();
        let c1 = kron(&c1_v, &c1_h);

        // Per-tone anchor inner products c1^H h_w.
        let a1: Vec<C64> = (0..block.cols()).map(|w| inner(&c1, block.col(w))).collect();
        let sa1: f64 = a1.iter().map(|x| x.norm_sqr()).sum();

        let stats2 = block_pair_stats(
            block,
            &self.geom,
            self.cb_w2_v.codewords(),
            self.cb_w2_h.codewords(),
            Some(&a1),
        );
        let cross_v: Vec<C64> = self.cb_w2_v.codewords().iter().map(|c| inner(&c1_v, c)).collect();
        let cross_h: Vec<C64> = self.cb_w2_h.codewords().iter().map(|c| inner(&c1_h, c)).collect();
        let qh2 = self.cb_w2_h.len();
        let mut best2: Option<(f64, usize)> = None;
        // Pass 0 excludes candidates repeating the first beam's direction;
        // if that empties the set (only possible with degenerate zero-bit
        // codebooks) the duplicate is admitted and the denominator guard in
        // the gain keeps the search finite.
        for pass in 0..2 {
            for iv in 0..self.cb_w2_v.len() {
                for ih in 0..qh2 {
                    if pass == 0
                        && same_direction(first.0, self.alloc.b_w1, iv, self.alloc.b_w2)
                        && same_direction(first.1, self.alloc.b_w1, ih, self.alloc.b_w2)
                    {
                        continue;
                    }
                    let flat = iv * qh2 + ih;
                    let g = cross_v[iv] * cross_h[ih];
                    for z in self.combiners.codewords() {
                        let Some(gain) =
                            block_two_beam_gain(sa1, stats2.power[flat], stats2.cross[flat], g, z)
                        else {
                            continue;
                        };
                        if best2.map_or(true, |(bg, _)| gain > bg) {
                            best2 = Some((gain, flat));
                        }
                    }
                }
            }
            if best2.is_some() {
                break;
            }
        }
        let flat2 = best2.expect("combiner codebook admits at least one non-degenerate pair").1;
        let second = (flat2 / qh2, flat2 % qh2);
        let c2 = kron(self.cb_w2_v.codeword(second.0), self.cb_w2_h.codeword(second.1));
        Level1Beams { first, second, c1_v, c1_h, c1, c2 }
    }

    /// Level 2: codeword for one narrowband RB given its wideband beams.
    pub fn level2(
        &self,
        nb_block: &ChannelBlock<'_>,
        beams: &Level1Beams,
        l_index: usize,
        r_index: usize,
        l_total: usize,
        r_total: usize,
    ) -> RbCodeword {
        // Round 1: joint refinement of the first beam on the fine grid.
        let fam1_v = shifted_family(&beams.c1_v, self.geom.d_v, self.grid_n1.offsets());
        let fam1_h = shifted_family(&beams.c1_h, self.geom.d_h, self.grid_n1.offsets());
        let stats1 = block_pair_stats(nb_block, &self.geom, &fam1_v, &fam1_h, None);
        let q1 = fam1_h.len();
        let mut arg1 = 0usize;
        let mut gain1 = -1.0;
        for (flat, &p) in stats1.power.iter().enumerate() {
            if p > gain1 {
                gain1 = p;
                arg1 = flat;
            }
        }
        let f1 = kron(&fam1_v[arg1 / q1], &fam1_h[arg1 % q1]);

        // Round 2: coarser refinement of the first beam combined with the
        // fixed second beam.
        let a2: Vec<C64> = (0..nb_block.cols())
            .map(|w| inner(&beams.c2, nb_block.col(w)))
            .collect();
        let sa2: f64 = a2.iter().map(|x| x.norm_sqr()).sum();
        let fam2_v = shifted_family(&beams.c1_v, self.geom.d_v, self.grid_n2.offsets());
        let fam2_h = shifted_family(&beams.c1_h, self.geom.d_h, self.grid_n2.offsets());
        let stats2 = block_pair_stats(nb_block, &self.geom, &fam2_v, &fam2_h, Some(&a2));
        let q2 = fam2_h.len();
        let mut best2: Option<(f64, usize, usize)> = None;
        for tv in 0..fam2_v.len() {
            for th in 0..q2 {
                let flat = tv * q2 + th;
                // g = (refined c1)^H c2, assembled from per-axis products.
                let g = axis_inner(&fam2_v[tv], self.cb_w2_v.codeword(beams.second.0))
                    * axis_inner(&fam2_h[th], self.cb_w2_h.codeword(beams.second.1));
                for (zi, z) in self.combiners.codewords().iter().enumerate() {
                    // Roles: z[0] weights the refined first beam, z[1] the
                    // second beam; cross = Σ_w conj(a2_w) (f^H h_w).
                    let Some(gain) =
                        block_two_beam_gain_ordered(stats2.power[flat], sa2, stats2.cross[flat], g, z)
                    else {
                        continue;
                    };
                    if best2.map_or(true, |(bg, _, _)| gain > bg) {
                        best2 = Some((gain, flat, zi));
                    }
                }
            }
        }
        let (gain2, flat2, zi) = best2.expect("offset grid is never empty");
        let refined = kron(&fam2_v[flat2 / q2], &fam2_h[flat2 % q2]);
        let f2 = assemble_two_beam(&refined, &beams.c2, self.combiners.codeword(zi));

        // Round 3: keep the larger block gain; family 1 wins ties.
        let two_beam = gain2 > gain1;
        let (vector, block_gain) = if two_beam { (f2, gain2) } else { (f1, gain1) };

        let mut payload = Payload::new();
        payload.push_field(l_index as u64, index_width(l_total));
        payload.push_field(r_index as u64, index_width(r_total));
        if two_beam {
            payload.push_field(1, 1);
            payload.push_field((flat2 / q2) as u64, self.alloc.b_n2);
            payload.push_field((flat2 % q2) as u64, self.alloc.b_n2);
            payload.push_field(zi as u64, self.alloc.b_c);
        } else {
            payload.push_field(0, 1);
            payload.push_field((arg1 / q1) as u64, self.alloc.b_n1);
            payload.push_field((arg1 % q1) as u64, self.alloc.b_n1);
        }
        RbCodeword { l_index, r_index, two_beam, vector, block_gain, payload }
    }

    /// Quantizes a whole multi-tone channel.
    pub fn quantize(&self, channel: &ChannelMatrix, grid: &WidebandGrid) -> Result<WidebandState> {
        if channel.rows() != self.geom.antennas() {
            return Err(Error::InvalidInput("channel rows do not match the array".into()));
        }
        if channel.cols() != grid.w_total {
            return Err(Error::InvalidInput("channel tone count does not match the grid".into()));
        }
        let partition = partition_rbs(grid)?;
        let mut level1 = Vec::with_capacity(grid.l_blocks);
        let mut codewords = Vec::with_capacity(grid.l_blocks * grid.r_blocks);
        for (l, wide) in partition.wide.iter().enumerate() {
            let block = channel.col_range(wide.clone());
            let beams = self.level1(&block);
            for (r, nb) in partition.narrow[l].iter().enumerate() {
                let nb_block = channel.col_range(nb.clone());
                codewords.push(self.level2(&nb_block, &beams, l, r, grid.l_blocks, grid.r_blocks));
            }
            level1.push(beams);
        }
        Ok(WidebandState { alloc: self.alloc, level1, codewords })
    }

    /// Rebuilds the shared beams of one wideband RB from a level-1 payload.
    pub fn decode_level1(&self, payload: &Payload) -> Result<Level1Beams> {
        let mut rd = payload.reader();
        let first = (
            rd.read_field(self.alloc.b_w1)? as usize,
            rd.read_field(self.alloc.b_w1)? as usize,
        );
        let second = (
            rd.read_field(self.alloc.b_w2)? as usize,
            rd.read_field(self.alloc.b_w2)? as usize,
        );
        let c1_v = self.cb_w1_v.codeword(first.0).to_vec();
        let c1_h = self.cb_w1_h.codeword(first.1).to_vec();
        let c1 = kron(&c1_v, &c1_h);
        let c2 = kron(self.cb_w2_v.codeword(second.0), self.cb_w2_h.codeword(second.1));
        Ok(Level1Beams { first, second, c1_v, c1_h, c1, c2 })
    }

    /// Rebuilds an RB codeword vector from its payload (needs the matching
    /// level-1 beams).
    pub fn decode_rb(
        &self,
        payload: &Payload,
        beams: &Level1Beams,
        l_total: usize,
        r_total: usize,
    ) -> Result<RbCodeword> {
        let mut rd = payload.reader();
        let l_index = rd.read_field(index_width(l_total))? as usize;
        let r_index = rd.read_field(index_width(r_total))? as usize;
        let selector = rd.read_field(1)?;
        if selector == 0 {
            let tv = rd.read_field(self.alloc.b_n1)? as usize;
            let th = rd.read_field(self.alloc.b_n1)? as usize;
            let sv = crate::search::shifted_codeword(&beams.c1_v, self.geom.d_v, self.grid_n1.offsets()[tv]);
            let sh = crate::search::shifted_codeword(&beams.c1_h, self.geom.d_h, self.grid_n1.offsets()[th]);
            Ok(RbCodeword {
                l_index,
                r_index,
                two_beam: false,
                vector: kron(&sv, &sh),
                block_gain: f64::NAN,
                payload: payload.clone(),
            })
        } else {
            let tv = rd.read_field(self.alloc.b_n2)? as usize;
            let th = rd.read_field(self.alloc.b_n2)? as usize;
            let zi = rd.read_field(self.alloc.b_c)? as usize;
            if zi >= self.combiners.len() {
                return Err(Error::Payload(format!("combiner index {zi} out of range")));
            }
            let sv = crate::search::shifted_codeword(&beams.c1_v, self.geom.d_v, self.grid_n2.offsets()[tv]);
            let sh = crate::search::shifted_codeword(&beams.c1_h, self.geom.d_h, self.grid_n2.offsets()[th]);
            let refined = kron(&sv, &sh);
            Ok(RbCodeword {
                l_index,
                r_index,
                two_beam: true,
                vector: assemble_two_beam(&refined, &beams.c2, self.combiners.codeword(zi)),
                block_gain: f64::NAN,
                payload: payload.clone(),
            })
        }
    }
}

fn axis_inner(a: &[C64], b: &[C64]) -> C64 {
    inner(a, b)
}

/// Block combined gain Σ_w |h_w^H [c1 c2] z|² / ||[c1 c2] z||² from the
/// accumulated statistics: s1 = Σ|c1^H h_w|², s2 = Σ|c2^H h_w|²,
/// cross = Σ conj(a1_w) a2_w, g = c1^H c2.
fn block_two_beam_gain(s1: f64, s2: f64, cross: C64, g: C64, z: &[C64]) -> Option<f64> {
    // |conj(a1) z0 + conj(a2) z1|² summed over tones.
    let num = z[0].norm_sqr() * s1
        + z[1].norm_sqr() * s2
        + 2.0 * (z[0] * z[1].conj() * cross).re;
    let den = z[0].norm_sqr() + z[1].norm_sqr() + 2.0 * (z[0].conj() * z[1] * g).re;
    if den <= 1e-12 {
        return None;
    }
    Some(num / den)
}

/// As [`block_two_beam_gain`] but with the cross sum accumulated as
/// Σ conj(a2_w) a1_w (companion-second ordering).
fn block_two_beam_gain_ordered(s1: f64, s2: f64, cross_21: C64, g: C64, z: &[C64]) -> Option<f64> {
    block_two_beam_gain(s1, s2, cross_21.conj(), g, z)
}
