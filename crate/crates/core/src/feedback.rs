//! Feedback payload bit layouts.
//!
//! All fields are packed most-significant bit first. Narrowband layouts:
//!
//!   family 1:  [0][v-index B1][h-index B1][θv-index B̌1][θh-index B̌1]
//!   family 2:  [1][v-index B1][h-index B1][v2-index B2][h2-index B2][z-index Bc]
//!
//! With 2 B̌1 = 2 B2 + Bc both families occupy 2(B1+B2)+Bc+1 bits. The KP
//! baseline sends its two per-axis indices back to back; the enhanced KP
//! baseline prefixes each beam with a presence flag so its payload length
//! matches the scheme's 2(B1+B2+1)-bit accounting. Wideband level-1 payloads
//! carry the two beam index pairs; level-2 payloads are the narrowband
//! family layouts shrunk to the refinement budgets and prefixed with the
//! resource-block coordinates (ℓ, r).

use crate::error::{Error, Result};

/// MSB-first bit string.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Payload {
    bits: Vec<bool>,
}

impl Payload {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `width` bits of `value`, most significant first.
    pub fn push_field(&mut self, value: u64, width: u32) {
        assert!(width == 64 || value < (1u64 << width), "field overflow: {value} in {width} bits");
        for k in (0..width).rev() {
            self.bits.push((value >> k) & 1 == 1);
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn reader(&self) -> PayloadReader<'_> {
        PayloadReader { bits: &self.bits, pos: 0 }
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(Error::Payload(format!("invalid bit character `{ch}`"))),
            }
        }
        Ok(Self { bits })
    }
}

/// Sequential field reader over a payload.
pub struct PayloadReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl PayloadReader<'_> {
    pub fn read_field(&mut self, width: u32) -> Result<u64> {
        if self.pos + width as usize > self.bits.len() {
            return Err(Error::Payload(format!(
                "payload truncated: wanted {width} bits at offset {}",
                self.pos
            )));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.bits[self.pos]);
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }
}

/// Bits needed to address `count` values (zero when there is one value).
pub fn index_width(count: usize) -> u32 {
    debug_assert!(count >= 1);
    usize::BITS - (count - 1).leading_zeros()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_msb_first() {
        let mut p = Payload::new();
        p.push_field(0b101, 3);
        p.push_field(0b01, 2);
        assert_eq!(p.to_bit_string(), "10101");
        let mut r = p.reader();
        assert_eq!(r.read_field(3).unwrap(), 0b101);
        assert_eq!(r.read_field(2).unwrap(), 0b01);
        assert!(r.read_field(1).is_err());
    }

    #[test]
    fn bit_string_round_trip() {
        let p = Payload::from_bit_string("110010").unwrap();
        assert_eq!(p.to_bit_string(), "110010");
        assert!(Payload::from_bit_string("10x1").is_err());
    }

    #[test]
    fn index_widths() {
        assert_eq!(index_width(1), 0);
        assert_eq!(index_width(2), 1);
        assert_eq!(index_width(4), 2);
        assert_eq!(index_width(5), 3);
        assert_eq!(index_width(9), 4);
    }
}
