//! Fixed-width bit vector over the assignment space.
//!
//! Bit `k` is stored in word `k / 64` at bit `k % 64`. Bits at or above the
//! width are always zero. The two block operations, [`BitField::shift_into_upper`]
//! and [`BitField::replicate_double`], are exact stand-ins for multiplying by
//! `2^p` and by `2^p + 1` as long as every set bit lies below `p`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const WORD_BITS: usize = 64;

/// Default cap on field width: 2^28 bits, 32 MiB per field.
pub const DEFAULT_MAX_WIDTH_BITS: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitFieldError {
    #[error("width mismatch: {left} vs {right} bits")]
    WidthMismatch { left: usize, right: usize },
    #[error("value needs {bits} bits but the field is {width} bits wide")]
    ValueTooWide { bits: u64, width: usize },
    #[error("field width 2^{log2_width} bits exceeds the cap of {cap} bits")]
    WidthCapExceeded { log2_width: usize, cap: u64 },
    #[error("width must be positive")]
    ZeroWidth,
    #[error("invalid hex field: {0}")]
    Hex(String),
}

/// Width `2^v` for `v` variables, checked against `cap`.
pub fn width_for_vars(var_count: usize, cap: u64) -> Result<usize, BitFieldError> {
    let exceeded = BitFieldError::WidthCapExceeded { log2_width: var_count, cap };
    if var_count >= 63 {
        return Err(exceeded);
    }
    let width = 1u64 << var_count;
    if width > cap || width > usize::MAX as u64 {
        return Err(exceeded);
    }
    Ok(width as usize)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitField {
    width: usize,
    words: Vec<u64>,
}

fn words_for(width: usize) -> usize {
    width.div_ceil(WORD_BITS)
}

impl BitField {
    /// All-zero field. Panics on zero width.
    pub fn zeros(width: usize) -> Self {
        assert!(width > 0, "bit field width must be positive");
        BitField { width, words: vec![0; words_for(width)] }
    }

    /// The field holding the value 1.
    pub fn one(width: usize) -> Self {
        let mut f = Self::zeros(width);
        f.words[0] = 1;
        f
    }

    /// Sets the value back to 1 without reallocating.
    pub(crate) fn reset_to_one(&mut self) {
        self.words.fill(0);
        self.words[0] = 1;
    }

    pub fn ones(width: usize) -> Self {
        let mut f = BitField { width, words: vec![u64::MAX; words_for(width)] };
        assert!(width > 0, "bit field width must be positive");
        f.trim();
        f
    }

    pub fn from_u64(value: u64, width: usize) -> Result<Self, BitFieldError> {
        Self::from_bignat(&BigUint::from(value), width)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Bytes of word storage held by the field.
    pub fn storage_bytes(&self) -> usize {
        self.words.len() * std::mem::size_of::<u64>()
    }

    /// Mask of valid bits in the last word.
    fn last_word_mask(&self) -> u64 {
        match self.width % WORD_BITS {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    /// Full-word value expected at `index` when all bits are set.
    pub(crate) fn full_word(&self, index: usize) -> u64 {
        if index + 1 == self.words.len() {
            self.last_word_mask()
        } else {
            u64::MAX
        }
    }

    fn trim(&mut self) {
        let mask = self.last_word_mask();
        if let Some(last) = self.words.last_mut() {
            *last &= mask;
        }
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / WORD_BITS] >> (bit % WORD_BITS) & 1 == 1
    }

    pub fn set(&mut self, bit: usize, value: bool) {
        assert!(bit < self.width, "bit {bit} out of range for width {}", self.width);
        let (w, b) = (bit / WORD_BITS, bit % WORD_BITS);
        if value {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Position of the highest set bit.
    pub fn highest_set_bit(&self) -> Option<usize> {
        self.words
            .iter()
            .rposition(|&w| w != 0)
            .map(|i| i * WORD_BITS + (WORD_BITS - 1 - self.words[i].leading_zeros() as usize))
    }

    fn grow_to(&mut self, width: usize) {
        if width > self.width {
            self.width = width;
            self.words.resize(words_for(width), 0);
        }
    }

    fn check_below(&self, p: usize) {
        debug_assert!(
            self.highest_set_bit().is_none_or(|h| h < p),
            "block operation at p={p} requires every set bit below p (highest is {:?})",
            self.highest_set_bit()
        );
    }

    /// ORs the low `p` bits, shifted left by `p`, into `[p, 2p)`.
    fn copy_low_block_up(&mut self, p: usize) {
        let shift = p % WORD_BITS;
        let offset = p / WORD_BITS;
        let src_words = words_for(p);
        if shift == 0 {
            let (low, high) = self.words.split_at_mut(offset);
            high[..src_words].copy_from_slice(&low[..src_words]);
            return;
        }
        // High to low so a source word is always read before any write lands
        // on it.
        for i in (0..src_words).rev() {
            let value = self.words[i];
            if value == 0 {
                continue;
            }
            let dest = i + offset;
            self.words[dest] |= value << shift;
            if dest + 1 < self.words.len() {
                self.words[dest + 1] |= value >> (WORD_BITS - shift);
            }
        }
    }

    fn clear_low_bits(&mut self, p: usize) {
        let full = p / WORD_BITS;
        self.words[..full].fill(0);
        let rest = p % WORD_BITS;
        if rest != 0 {
            self.words[full] &= !((1u64 << rest) - 1);
        }
    }

    /// Multiply by `2^p`: moves the low block `[0, p)` to `[p, 2p)`. Requires
    /// every set bit below `p`; the width grows to `2p` if it is smaller.
    pub fn shift_into_upper(&mut self, p: usize) {
        assert!(p > 0, "block size must be positive");
        self.check_below(p);
        self.grow_to(2 * p);
        self.copy_low_block_up(p);
        self.clear_low_bits(p);
    }

    /// Multiply by `2^p + 1`: copies the low block `[0, p)` to `[p, 2p)`.
    /// With every set bit below `p` the two copies never overlap, so no carry
    /// can occur.
    pub fn replicate_double(&mut self, p: usize) {
        assert!(p > 0, "block size must be positive");
        self.check_below(p);
        self.grow_to(2 * p);
        self.copy_low_block_up(p);
    }

    /// Sets `[0, n)` to all ones.
    pub(crate) fn fill_low(&mut self, n: usize) {
        debug_assert!(n <= self.width);
        let full = n / WORD_BITS;
        self.words[..full].fill(u64::MAX);
        let rest = n % WORD_BITS;
        if rest != 0 {
            self.words[full] |= (1u64 << rest) - 1;
        }
    }

    /// Repeats the block `[0, n)` across the whole field, where `n` is a power
    /// of two dividing the width. Same result as `replicate_double` for
    /// `p = n, 2n, ..., width / 2`.
    pub(crate) fn tile_low(&mut self, n: usize) {
        debug_assert!(n.is_power_of_two() && self.width.is_multiple_of(n));
        let mut filled = n;
        while filled < WORD_BITS.min(self.width) {
            self.words[0] |= self.words[0] << filled;
            filled *= 2;
        }
        filled = filled.max(WORD_BITS) / WORD_BITS;
        let total = self.words.len();
        while filled < total {
            let take = filled.min(total - filled);
            self.words.copy_within(0..take, filled);
            filled += take;
        }
        self.trim();
    }

    /// In-place bitwise OR.
    pub fn or_assign(&mut self, other: &BitField) -> Result<(), BitFieldError> {
        if self.width != other.width {
            return Err(BitFieldError::WidthMismatch { left: self.width, right: other.width });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
        Ok(())
    }

    pub fn or(&self, other: &BitField) -> Result<BitField, BitFieldError> {
        let mut out = self.clone();
        out.or_assign(other)?;
        Ok(out)
    }

    pub fn is_all_ones(&self) -> bool {
        self.first_incomplete_word(0) == self.words.len()
    }

    /// Index of the first word at or after `from` that is not all ones, or the
    /// word count if there is none.
    pub fn first_incomplete_word(&self, from: usize) -> usize {
        (from..self.words.len()).find(|&i| self.words[i] != self.full_word(i)).unwrap_or(self.words.len())
    }

    /// Ascending positions of clear bits below the width.
    pub fn clear_bits(&self) -> ClearBits<'_> {
        ClearBits { field: self, word: 0, pending: self.words.first().map_or(0, |w| !w & self.full_word(0)) }
    }

    pub fn clear_bit_positions(&self) -> Vec<usize> {
        self.clear_bits().collect()
    }

    pub fn to_bignat(&self) -> BigUint {
        BigUint::from_slice(&self.words.iter().flat_map(|&w| [w as u32, (w >> 32) as u32]).collect::<Vec<_>>())
    }

    pub fn from_bignat(value: &BigUint, width: usize) -> Result<Self, BitFieldError> {
        if width == 0 {
            return Err(BitFieldError::ZeroWidth);
        }
        if value.bits() > width as u64 {
            return Err(BitFieldError::ValueTooWide { bits: value.bits(), width });
        }
        let mut field = Self::zeros(width);
        for (slot, digit) in field.words.iter_mut().zip(value.iter_u64_digits()) {
            *slot = digit;
        }
        Ok(field)
    }

    /// `<width>:<hex>`, most significant word first, each word as 16 hex
    /// digits.
    pub fn to_hex(&self) -> String {
        let mut out = format!("{}:", self.width);
        for w in self.words.iter().rev() {
            out.push_str(&format!("{w:016x}"));
        }
        out
    }
}

impl FromStr for BitField {
    type Err = BitFieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: &str| BitFieldError::Hex(m.to_string());
        let (width, hex) = s.trim().split_once(':').ok_or_else(|| bad("missing `:`"))?;
        let width: usize = width.parse().map_err(|_| bad("width is not a number"))?;
        if width == 0 {
            return Err(BitFieldError::ZeroWidth);
        }
        let count = words_for(width);
        if hex.len() != count * 16 || !hex.is_ascii() {
            return Err(bad("digit count does not match width"));
        }
        let mut field = BitField::zeros(width);
        for (i, chunk) in hex.as_bytes().chunks(16).enumerate() {
            let text = std::str::from_utf8(chunk).map_err(|_| bad("not ASCII"))?;
            field.words[count - 1 - i] = u64::from_str_radix(text, 16).map_err(|_| bad("invalid digit"))?;
        }
        if field.words[count - 1] & !field.last_word_mask() != 0 {
            return Err(BitFieldError::ValueTooWide { bits: field.highest_set_bit().unwrap() as u64 + 1, width });
        }
        Ok(field)
    }
}

impl fmt::Debug for BitField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width <= 64 {
            write!(f, "BitField({}: {:#b})", self.width, self.words[0])
        } else {
            write!(f, "BitField({})", self.to_hex())
        }
    }
}

impl fmt::Display for BitField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for BitField {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for BitField {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

pub struct ClearBits<'a> {
    field: &'a BitField,
    word: usize,
    pending: u64,
}

impl Iterator for ClearBits<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while self.pending == 0 {
            self.word += 1;
            if self.word >= self.field.words.len() {
                return None;
            }
            self.pending = !self.field.words[self.word] & self.field.full_word(self.word);
        }
        let bit = self.pending.trailing_zeros() as usize;
        self.pending &= self.pending - 1;
        Some(self.word * WORD_BITS + bit)
    }
}
