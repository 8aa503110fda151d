//! ACN primitive encoders and decoders layered on [`BitStream`].
//!
//! [`AcnCodec`] owns a stream and forwards the stream interface; every
//! `enc_*` method has a `dec_*` counterpart that reads back exactly what
//! was written and advances the cursor by the same number of bits. Encoders
//! validate their arguments and check for space before writing, so a
//! rejected call leaves the stream untouched.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::{BitStream, StreamError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("value {value} is outside the range [{min}, {max}]")]
    Constraint { value: i128, min: i128, max: i128 },
    #[error("decoded value {value} is outside the range [{min}, {max}]")]
    DecodeConstraint { value: i128, min: i128, max: i128 },
    #[error("value {value} does not fit in {bits} bits")]
    ValueTooWide { value: i128, bits: u32 },
    #[error("byte {byte:#04x} at index {index} is outside the 7-bit range [0, 127]")]
    CharOutOfRange { index: usize, byte: u8 },
    #[error("character {byte:#04x} at index {index} is not in the permitted alphabet")]
    CharNotInAlphabet { index: usize, byte: u8 },
    #[error("decoded character index {code} at position {index} is outside the {size}-character alphabet")]
    BadCharIndex { index: usize, code: u64, size: usize },
    #[error("string length {len} is outside [{min}, {max}]")]
    StringLength { len: usize, min: usize, max: usize },
    #[error("string contains its termination pattern")]
    NullPatternCollision,
    #[error("no termination pattern found within {max_len} characters")]
    MissingTerminator { max_len: usize },
    #[error("string length {actual} does not match its length determinant {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("termination pattern must have 1 to 8 bytes, got {0}")]
    InvalidNullPattern(usize),
    #[error("invalid bit width {0}")]
    InvalidWidth(u32),
}

pub type CodecResult<T> = Result<T, CodecError>;

/// Smallest `n` with `range < 2^n`; zero for a singleton range.
pub fn bits_needed(range: u64) -> u32 {
    64 - range.leading_zeros()
}

/// Byte-multiple integer widths with dedicated big-endian codecs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WordWidth {
    #[serde(rename = "8")]
    W8,
    #[serde(rename = "16")]
    W16,
    #[serde(rename = "32")]
    W32,
    #[serde(rename = "64")]
    W64,
}

impl WordWidth {
    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(WordWidth::W8),
            16 => Some(WordWidth::W16),
            32 => Some(WordWidth::W32),
            64 => Some(WordWidth::W64),
            _ => None,
        }
    }

    pub fn bits(self) -> u32 {
        self.bytes() as u32 * 8
    }

    pub fn bytes(self) -> u8 {
        match self {
            WordWidth::W8 => 1,
            WordWidth::W16 => 2,
            WordWidth::W32 => 4,
            WordWidth::W64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    #[default]
    Big,
    Little,
}

impl fmt::Display for Endianness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Endianness::Big => "big",
            Endianness::Little => "little",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RealWidth {
    #[serde(rename = "32")]
    W32,
    #[serde(rename = "64")]
    W64,
}

impl RealWidth {
    pub fn bits(self) -> u32 {
        match self {
            RealWidth::W32 => 32,
            RealWidth::W64 => 64,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            32 => Some(RealWidth::W32),
            64 => Some(RealWidth::W64),
            _ => None,
        }
    }
}

/// Interprets the low `num_bytes` bytes of `v` as two's complement and
/// sign-extends to 64 bits. Higher bytes of `v` are ignored.
///
/// # Panics
///
/// Panics if `num_bytes` is not in `1..=8`.
pub fn uint2int(v: u64, num_bytes: u8) -> i64 {
    #[inline]
    fn extend(v: u64, mask: u64, sign: u64) -> i64 {
        let low = v & mask;
        if low & sign != 0 {
            (low | !mask) as i64
        } else {
            low as i64
        }
    }
    match num_bytes {
        1 => extend(v, 0xFF, 0x80),
        2 => extend(v, 0xFFFF, 0x8000),
        3 => extend(v, 0xFF_FFFF, 0x80_0000),
        4 => extend(v, 0xFFFF_FFFF, 0x8000_0000),
        5 => extend(v, 0xFF_FFFF_FFFF, 0x80_0000_0000),
        6 => extend(v, 0xFFFF_FFFF_FFFF, 0x8000_0000_0000),
        7 => extend(v, 0xFF_FFFF_FFFF_FFFF, 0x80_0000_0000_0000),
        8 => v as i64,
        _ => panic!("uint2int: byte count {num_bytes} outside 1..=8"),
    }
}

/// Two's-complement bit pattern of `v` truncated to `num_bytes` bytes.
///
/// # Panics
///
/// Panics if `num_bytes` is not in `1..=8`.
pub fn int2uint(v: i64, num_bytes: u8) -> u64 {
    assert!((1..=8).contains(&num_bytes), "int2uint: byte count {num_bytes} outside 1..=8");
    (v as u64) & low_mask(num_bytes as u32 * 8)
}

/// Sign-extends the low `n_bits` bits of `raw`.
pub fn sign_extend(raw: u64, n_bits: u32) -> i64 {
    if n_bits == 0 {
        0
    } else if n_bits >= 64 {
        raw as i64
    } else {
        let shift = 64 - n_bits;
        ((raw << shift) as i64) >> shift
    }
}

fn low_mask(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn signed_range(n_bits: u32) -> (i128, i128) {
    let half = 1i128 << (n_bits - 1);
    (-half, half - 1)
}

/// An ordered set of distinct 7-bit character codes used by the
/// character-index string encodings.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Alphabet {
    chars: Vec<u8>,
    #[serde(skip)]
    lookup: Vec<u8>,
}

const NOT_IN_ALPHABET: u8 = 0xFF;

impl Alphabet {
    pub fn new(chars: impl Into<Vec<u8>>) -> CodecResult<Self> {
        let chars = chars.into();
        if chars.is_empty() {
            return Err(CodecError::InvalidAlphabet("empty".into()));
        }
        let mut lookup = vec![NOT_IN_ALPHABET; 128];
        for (i, &c) in chars.iter().enumerate() {
            if c > 127 {
                return Err(CodecError::InvalidAlphabet(format!(
                    "character {c:#04x} is not 7-bit"
                )));
            }
            if lookup[c as usize] != NOT_IN_ALPHABET {
                return Err(CodecError::InvalidAlphabet(format!(
                    "duplicate character {c:#04x}"
                )));
            }
            lookup[c as usize] = i as u8;
        }
        Ok(Alphabet { chars, lookup })
    }

    /// All 128 ASCII codes in order.
    pub fn ascii() -> Self {
        Alphabet::new((0u8..=127).collect::<Vec<_>>()).expect("ASCII is a valid alphabet")
    }

    pub fn chars(&self) -> &[u8] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn contains(&self, c: u8) -> bool {
        self.index_of(c).is_some()
    }

    pub fn index_of(&self, c: u8) -> Option<u64> {
        match self.lookup.get(c as usize) {
            Some(&i) if i != NOT_IN_ALPHABET => Some(i as u64),
            _ => None,
        }
    }

    pub fn char_at(&self, index: u64) -> Option<u8> {
        self.chars.get(usize::try_from(index).ok()?).copied()
    }

    pub fn bits_per_char(&self) -> u32 {
        bits_needed(self.chars.len() as u64 - 1)
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Alphabet({:?})", String::from_utf8_lossy(&self.chars))
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> String {
        a.chars.iter().map(|&c| c as char).collect()
    }
}

impl TryFrom<String> for Alphabet {
    type Error = CodecError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let bytes: Vec<u8> = s
            .chars()
            .map(|c| {
                u8::try_from(c as u32)
                    .map_err(|_| CodecError::InvalidAlphabet(format!("character {c:?} is not 7-bit")))
            })
            .collect::<Result<_, _>>()?;
        Alphabet::new(bytes)
    }
}

fn check_ascii(s: &[u8]) -> CodecResult<()> {
    match s.iter().position(|&b| b > 127) {
        Some(index) => Err(CodecError::CharOutOfRange {
            index,
            byte: s[index],
        }),
        None => Ok(()),
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// A bit stream decorated with the ACN primitive catalog.
#[derive(Clone, PartialEq, Eq)]
pub struct AcnCodec {
    stream: BitStream,
}

impl fmt::Debug for AcnCodec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AcnCodec[{}]", self.stream.dump())
    }
}

impl From<BitStream> for AcnCodec {
    fn from(stream: BitStream) -> Self {
        AcnCodec { stream }
    }
}

impl AcnCodec {
    pub fn new(stream: BitStream) -> Self {
        AcnCodec { stream }
    }

    pub fn with_capacity(capacity_bytes: usize) -> CodecResult<Self> {
        Ok(AcnCodec::new(BitStream::new(capacity_bytes)?))
    }

    pub fn from_bytes(bytes: Vec<u8>) -> CodecResult<Self> {
        Ok(AcnCodec::new(BitStream::from_bytes(bytes)?))
    }

    pub fn stream(&self) -> &BitStream {
        &self.stream
    }

    pub fn stream_mut(&mut self) -> &mut BitStream {
        &mut self.stream
    }

    pub fn into_stream(self) -> BitStream {
        self.stream
    }

    pub fn buf(&self) -> &[u8] {
        self.stream.buf()
    }

    pub fn bit_index(&self) -> usize {
        self.stream.bit_index()
    }

    pub fn remaining_bits(&self) -> usize {
        self.stream.remaining_bits()
    }

    pub fn validate_offset_bits(&self, bits: usize) -> bool {
        self.stream.validate_offset_bits(bits)
    }

    pub fn reset_at(&self, other: &AcnCodec) -> CodecResult<AcnCodec> {
        Ok(AcnCodec::new(self.stream.reset_at(&other.stream)?))
    }

    pub fn is_prefix_of(&self, other: &AcnCodec) -> CodecResult<bool> {
        Ok(self.stream.is_prefix_of(&other.stream)?)
    }

    fn require(&self, bits: usize) -> CodecResult<()> {
        if self.stream.validate_offset_bits(bits) {
            Ok(())
        } else {
            Err(StreamError::OutOfBounds {
                at: self.bit_index(),
                needed: bits,
                available: self.remaining_bits(),
            }
            .into())
        }
    }

    pub fn enc_boolean(&mut self, v: bool) -> CodecResult<()> {
        Ok(self.stream.append_bit(v)?)
    }

    pub fn dec_boolean(&mut self) -> CodecResult<bool> {
        Ok(self.stream.read_bit()?)
    }

    /// Writes `v - min` in `bits_needed(max - min)` bits.
    pub fn encode_constrained_pos_whole_number(&mut self, v: u64, min: u64, max: u64) -> CodecResult<()> {
        if min > max || v < min || v > max {
            return Err(CodecError::Constraint {
                value: v as i128,
                min: min as i128,
                max: max as i128,
            });
        }
        let n = bits_needed(max - min);
        Ok(self.stream.append_lsb_bits_msb_first(v - min, n)?)
    }

    pub fn decode_constrained_pos_whole_number(&mut self, min: u64, max: u64) -> CodecResult<u64> {
        if min > max {
            return Err(CodecError::Constraint {
                value: min as i128,
                min: min as i128,
                max: max as i128,
            });
        }
        let raw = self.stream.read_n_lsb_bits_msb_first(bits_needed(max - min))?;
        let v = min as i128 + raw as i128;
        if v > max as i128 {
            return Err(CodecError::DecodeConstraint {
                value: v,
                min: min as i128,
                max: max as i128,
            });
        }
        Ok(v as u64)
    }

    /// Signed ranges share the unsigned encoding of `v - min`.
    pub fn encode_constrained_whole_number(&mut self, v: i64, min: i64, max: i64) -> CodecResult<()> {
        if min > max || v < min || v > max {
            return Err(CodecError::Constraint {
                value: v as i128,
                min: min as i128,
                max: max as i128,
            });
        }
        let span = (max as i128 - min as i128) as u64;
        let off = (v as i128 - min as i128) as u64;
        self.encode_constrained_pos_whole_number(off, 0, span)
    }

    pub fn decode_constrained_whole_number(&mut self, min: i64, max: i64) -> CodecResult<i64> {
        if min > max {
            return Err(CodecError::Constraint {
                value: min as i128,
                min: min as i128,
                max: max as i128,
            });
        }
        let span = (max as i128 - min as i128) as u64;
        let off = self.decode_constrained_pos_whole_number(0, span)?;
        Ok((min as i128 + off as i128) as i64)
    }

    /// Big-endian unsigned integer of 1, 2, 4 or 8 bytes.
    pub fn enc_uint_const_size_aligned(&mut self, v: u64, width: WordWidth) -> CodecResult<()> {
        let bits = width.bits();
        if v & !low_mask(bits) != 0 {
            return Err(CodecError::ValueTooWide {
                value: v as i128,
                bits,
            });
        }
        self.require(bits as usize)?;
        for i in (0..width.bytes()).rev() {
            self.stream.append_byte((v >> (8 * i as u32)) as u8)?;
        }
        Ok(())
    }

    pub fn dec_uint_const_size_aligned(&mut self, width: WordWidth) -> CodecResult<u64> {
        self.require(width.bits() as usize)?;
        let mut v = 0u64;
        for _ in 0..width.bytes() {
            v = (v << 8) | self.stream.read_byte()? as u64;
        }
        Ok(v)
    }

    pub fn enc_uint_const_size(&mut self, v: u64, n_bits: u32) -> CodecResult<()> {
        if !(1..=64).contains(&n_bits) {
            return Err(CodecError::InvalidWidth(n_bits));
        }
        if v & !low_mask(n_bits) != 0 {
            return Err(CodecError::ValueTooWide {
                value: v as i128,
                bits: n_bits,
            });
        }
        Ok(self.stream.append_lsb_bits_msb_first(v, n_bits)?)
    }

    pub fn dec_uint_const_size(&mut self, n_bits: u32) -> CodecResult<u64> {
        if !(1..=64).contains(&n_bits) {
            return Err(CodecError::InvalidWidth(n_bits));
        }
        Ok(self.stream.read_n_lsb_bits_msb_first(n_bits)?)
    }

    pub fn enc_int_twos_complement_const_size_aligned(&mut self, v: i64, width: WordWidth) -> CodecResult<()> {
        let (lo, hi) = signed_range(width.bits());
        if (v as i128) < lo || (v as i128) > hi {
            return Err(CodecError::Constraint {
                value: v as i128,
                min: lo,
                max: hi,
            });
        }
        self.enc_uint_const_size_aligned(int2uint(v, width.bytes()), width)
    }

    pub fn dec_int_twos_complement_const_size_aligned(&mut self, width: WordWidth) -> CodecResult<i64> {
        let raw = self.dec_uint_const_size_aligned(width)?;
        Ok(uint2int(raw, width.bytes()))
    }

    pub fn enc_int_twos_complement_const_size(&mut self, v: i64, n_bits: u32) -> CodecResult<()> {
        if !(1..=64).contains(&n_bits) {
            return Err(CodecError::InvalidWidth(n_bits));
        }
        let (lo, hi) = signed_range(n_bits);
        if (v as i128) < lo || (v as i128) > hi {
            return Err(CodecError::Constraint {
                value: v as i128,
                min: lo,
                max: hi,
            });
        }
        Ok(self
            .stream
            .append_lsb_bits_msb_first(v as u64 & low_mask(n_bits), n_bits)?)
    }

    pub fn dec_int_twos_complement_const_size(&mut self, n_bits: u32) -> CodecResult<i64> {
        if !(1..=64).contains(&n_bits) {
            return Err(CodecError::InvalidWidth(n_bits));
        }
        let raw = self.stream.read_n_lsb_bits_msb_first(n_bits)?;
        Ok(sign_extend(raw, n_bits))
    }

    /// Writes an IEEE-754 bit pattern. The pattern is never interpreted, so
    /// NaN payloads and signalling bits survive unchanged.
    pub fn enc_real_ieee754(&mut self, pattern: u64, width: RealWidth, endianness: Endianness) -> CodecResult<()> {
        let bytes: Vec<u8> = match (width, endianness) {
            (RealWidth::W32, _) if pattern > u32::MAX as u64 => {
                return Err(CodecError::ValueTooWide {
                    value: pattern as i128,
                    bits: 32,
                })
            }
            (RealWidth::W32, Endianness::Big) => (pattern as u32).to_be_bytes().to_vec(),
            (RealWidth::W32, Endianness::Little) => (pattern as u32).to_le_bytes().to_vec(),
            (RealWidth::W64, Endianness::Big) => pattern.to_be_bytes().to_vec(),
            (RealWidth::W64, Endianness::Little) => pattern.to_le_bytes().to_vec(),
        };
        Ok(self.stream.append_byte_array(&bytes)?)
    }

    pub fn dec_real_ieee754(&mut self, width: RealWidth, endianness: Endianness) -> CodecResult<u64> {
        let bytes = self.stream.read_byte_array(width.bits() as usize / 8)?;
        Ok(match (width, endianness) {
            (RealWidth::W32, Endianness::Big) => u32::from_be_bytes(bytes.try_into().unwrap()) as u64,
            (RealWidth::W32, Endianness::Little) => u32::from_le_bytes(bytes.try_into().unwrap()) as u64,
            (RealWidth::W64, Endianness::Big) => u64::from_be_bytes(bytes.try_into().unwrap()),
            (RealWidth::W64, Endianness::Little) => u64::from_le_bytes(bytes.try_into().unwrap()),
        })
    }

    /// Writes the characters of `s` followed by `null_pattern`.
    pub fn enc_string_ascii_null_terminated(
        &mut self,
        s: &[u8],
        max_len: usize,
        null_pattern: &[u8],
    ) -> CodecResult<()> {
        if !(1..=8).contains(&null_pattern.len()) {
            return Err(CodecError::InvalidNullPattern(null_pattern.len()));
        }
        if s.len() > max_len {
            return Err(CodecError::StringLength {
                len: s.len(),
                min: 0,
                max: max_len,
            });
        }
        check_ascii(s)?;
        // The decoder stops at the first occurrence of the pattern, which
        // must be the one we append.
        let mut framed = s.to_vec();
        framed.extend_from_slice(null_pattern);
        if find(&framed, null_pattern) != Some(s.len()) {
            return Err(CodecError::NullPatternCollision);
        }
        self.require(framed.len() * 8)?;
        Ok(self.stream.append_byte_array(&framed)?)
    }

    pub fn dec_string_ascii_null_terminated(&mut self, max_len: usize, null_pattern: &[u8]) -> CodecResult<Vec<u8>> {
        if !(1..=8).contains(&null_pattern.len()) {
            return Err(CodecError::InvalidNullPattern(null_pattern.len()));
        }
        let limit = max_len + null_pattern.len();
        let mut read = Vec::with_capacity(limit);
        while read.len() < limit {
            read.push(self.stream.read_byte()?);
            if read.ends_with(null_pattern) {
                read.truncate(read.len() - null_pattern.len());
                check_ascii(&read)?;
                return Ok(read);
            }
        }
        Err(CodecError::MissingTerminator { max_len })
    }

    fn check_alphabet(s: &[u8], alphabet: &Alphabet) -> CodecResult<()> {
        check_ascii(s)?;
        match s.iter().position(|&c| !alphabet.contains(c)) {
            Some(index) => Err(CodecError::CharNotInAlphabet { index, byte: s[index] }),
            None => Ok(()),
        }
    }

    // Shared by the internal and external length variants.
    fn enc_string_char_index_private(&mut self, s: &[u8], alphabet: &Alphabet) -> CodecResult<()> {
        let bits = alphabet.bits_per_char();
        for &c in s {
            let index = alphabet.index_of(c).expect("alphabet membership checked by caller");
            self.stream.append_lsb_bits_msb_first(index, bits)?;
        }
        Ok(())
    }

    fn dec_string_char_index_private(&mut self, len: usize, alphabet: &Alphabet) -> CodecResult<Vec<u8>> {
        let bits = alphabet.bits_per_char();
        self.require(len * bits as usize)?;
        (0..len)
            .map(|index| {
                let code = self.stream.read_n_lsb_bits_msb_first(bits)?;
                alphabet.char_at(code).ok_or(CodecError::BadCharIndex {
                    index,
                    code,
                    size: alphabet.len(),
                })
            })
            .collect()
    }

    /// Length as a constrained number in `[min_len, max_len]`, then one
    /// alphabet index per character.
    pub fn enc_string_char_index_internal(
        &mut self,
        s: &[u8],
        alphabet: &Alphabet,
        min_len: usize,
        max_len: usize,
    ) -> CodecResult<()> {
        if s.len() < min_len || s.len() > max_len {
            return Err(CodecError::StringLength {
                len: s.len(),
                min: min_len,
                max: max_len,
            });
        }
        Self::check_alphabet(s, alphabet)?;
        let total = bits_needed((max_len - min_len) as u64) as usize + s.len() * alphabet.bits_per_char() as usize;
        self.require(total)?;
        self.encode_constrained_pos_whole_number(s.len() as u64, min_len as u64, max_len as u64)?;
        self.enc_string_char_index_private(s, alphabet)
    }

    pub fn dec_string_char_index_internal(
        &mut self,
        alphabet: &Alphabet,
        min_len: usize,
        max_len: usize,
    ) -> CodecResult<Vec<u8>> {
        let len = self.decode_constrained_pos_whole_number(min_len as u64, max_len as u64)? as usize;
        self.dec_string_char_index_private(len, alphabet)
    }

    /// Character indices only; the length travels in a separate field.
    pub fn enc_string_char_index_external(
        &mut self,
        s: &[u8],
        alphabet: &Alphabet,
        max_len: usize,
        ext_len: usize,
    ) -> CodecResult<()> {
        if s.len() != ext_len {
            return Err(CodecError::LengthMismatch {
                expected: ext_len,
                actual: s.len(),
            });
        }
        if ext_len > max_len {
            return Err(CodecError::StringLength {
                len: ext_len,
                min: 0,
                max: max_len,
            });
        }
        Self::check_alphabet(s, alphabet)?;
        self.require(s.len() * alphabet.bits_per_char() as usize)?;
        self.enc_string_char_index_private(s, alphabet)
    }

    pub fn dec_string_char_index_external(
        &mut self,
        alphabet: &Alphabet,
        max_len: usize,
        ext_len: usize,
    ) -> CodecResult<Vec<u8>> {
        if ext_len > max_len {
            return Err(CodecError::StringLength {
                len: ext_len,
                min: 0,
                max: max_len,
            });
        }
        self.dec_string_char_index_private(ext_len, alphabet)
    }
}
