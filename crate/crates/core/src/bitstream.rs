//! Bit-exact append/read stream over a fixed-capacity byte buffer.
//!
//! Bits are numbered MSB-first: bit 0 of a byte is its most significant bit,
//! and the stream position is the pair `(current_byte, current_bit)`. The
//! buffer is allocated once, up front, and never grows; every append or read
//! is bounds-checked against the remaining capacity before it touches the
//! buffer, so a failed operation leaves both the buffer and the cursor as
//! they were.
//!
//! ```
//! use acnkit::bitstream::BitStream;
//!
//! let mut s = BitStream::new(2).unwrap();
//! s.append_lsb_bits_msb_first(0b101, 3).unwrap();
//! s.append_byte(0xAB).unwrap();
//! assert_eq!(s.bit_index(), 11);
//!
//! let mut r = s.clone();
//! r.set_cursor(0.into()).unwrap();
//! assert_eq!(r.read_n_lsb_bits_msb_first(3).unwrap(), 0b101);
//! assert_eq!(r.read_byte().unwrap(), 0xAB);
//! ```

use std::fmt;

use thiserror::Error;

/// Largest buffer [`BitStream::new`] will allocate (256 MiB).
pub const DEFAULT_MAX_CAPACITY_BYTES: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("requested capacity of {requested} bytes exceeds the limit of {limit} bytes")]
    Capacity { requested: usize, limit: usize },
    #[error("insufficient data: {needed} bits needed at bit {at}, only {available} available")]
    OutOfBounds {
        at: usize,
        needed: usize,
        available: usize,
    },
    #[error("cursor move by {offset} from bit {at} leaves the {capacity}-bit buffer")]
    BadMove {
        at: usize,
        offset: i64,
        capacity: usize,
    },
    #[error("value {value:#x} does not fit in {bits} bits")]
    ValueTooWide { value: u64, bits: u32 },
    #[error("invalid bit count {count} (allowed {min}..={max})")]
    InvalidBitCount { count: usize, min: usize, max: usize },
    #[error("source bit range {from}..{to} exceeds the {available} source bits")]
    SourceRange {
        from: usize,
        to: usize,
        available: usize,
    },
    #[error("buffers have different lengths ({left} and {right} bytes)")]
    LengthMismatch { left: usize, right: usize },
}

/// Absolute bit position in a stream, `current_byte * 8 + current_bit`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitCursor(usize);

impl BitCursor {
    pub const fn new(bits: usize) -> Self {
        BitCursor(bits)
    }

    pub const fn bits(self) -> usize {
        self.0
    }

    pub const fn byte(self) -> usize {
        self.0 / 8
    }

    pub const fn bit(self) -> u8 {
        (self.0 % 8) as u8
    }
}

impl From<usize> for BitCursor {
    fn from(bits: usize) -> Self {
        BitCursor(bits)
    }
}

impl fmt::Display for BitCursor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.byte(), self.bit())
    }
}

/// The structural invariant of a stream cursor over a buffer of `buf_len` bytes.
///
/// The cursor may rest one byte past the end only at bit 0.
pub fn invariant(current_bit: u8, current_byte: usize, buf_len: usize) -> bool {
    current_bit < 8 && (current_byte < buf_len || (current_bit == 0 && current_byte == buf_len))
}

/// Number of zero bits needed to move `offset` to the next multiple of `modulus`.
pub fn padding_bits(offset: usize, modulus: usize) -> usize {
    if modulus <= 1 {
        0
    } else {
        (modulus - offset % modulus) % modulus
    }
}

#[inline]
fn low_mask(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[inline]
fn bit_of(buf: &[u8], index: usize) -> bool {
    buf[index / 8] & (0x80 >> (index % 8)) != 0
}

/// Compares bits `[from_bit, to_bit)` of two buffers.
pub fn bit_ranges_equal(
    buf1: &[u8],
    buf2: &[u8],
    from_bit: usize,
    to_bit: usize,
) -> Result<bool, StreamError> {
    let available = 8 * buf1.len().min(buf2.len());
    if from_bit > to_bit || to_bit > available {
        return Err(StreamError::SourceRange {
            from: from_bit,
            to: to_bit,
            available,
        });
    }
    let mut i = from_bit;
    // Leading partial byte, whole bytes, trailing partial byte.
    while i < to_bit && !i.is_multiple_of(8) {
        if bit_of(buf1, i) != bit_of(buf2, i) {
            return Ok(false);
        }
        i += 1;
    }
    let whole_end = i + (to_bit - i) / 8 * 8;
    if buf1[i / 8..whole_end / 8] != buf2[i / 8..whole_end / 8] {
        return Ok(false);
    }
    i = whole_end;
    while i < to_bit {
        if bit_of(buf1, i) != bit_of(buf2, i) {
            return Ok(false);
        }
        i += 1;
    }
    Ok(true)
}

/// A fixed-capacity bit stream used both as the encoder's output and the
/// decoder's input.
#[derive(Clone, PartialEq, Eq)]
pub struct BitStream {
    buf: Vec<u8>,
    current_byte: usize,
    current_bit: u8,
}

impl BitStream {
    /// Allocates a zeroed stream of `capacity_bytes` with the cursor at bit 0.
    pub fn new(capacity_bytes: usize) -> Result<Self, StreamError> {
        Self::with_limit(capacity_bytes, DEFAULT_MAX_CAPACITY_BYTES)
    }

    pub fn with_limit(capacity_bytes: usize, limit: usize) -> Result<Self, StreamError> {
        if capacity_bytes > limit {
            return Err(StreamError::Capacity {
                requested: capacity_bytes,
                limit,
            });
        }
        Ok(BitStream {
            buf: vec![0; capacity_bytes],
            current_byte: 0,
            current_bit: 0,
        })
    }

    /// Wraps existing content, cursor at bit 0.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, StreamError> {
        if bytes.len() > DEFAULT_MAX_CAPACITY_BYTES {
            return Err(StreamError::Capacity {
                requested: bytes.len(),
                limit: DEFAULT_MAX_CAPACITY_BYTES,
            });
        }
        Ok(BitStream {
            buf: bytes,
            current_byte: 0,
            current_bit: 0,
        })
    }

    pub fn buf(&self) -> &[u8] {
        &self.buf
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    /// Mutable access to the raw buffer; the cursor is unaffected.
    pub fn buf_mut(&mut self) -> &mut [u8] {
        &mut self.buf
    }

    pub fn capacity_bits(&self) -> usize {
        self.buf.len() * 8
    }

    pub fn current_byte(&self) -> usize {
        self.current_byte
    }

    pub fn current_bit(&self) -> u8 {
        self.current_bit
    }

    pub fn bit_index(&self) -> usize {
        self.current_byte * 8 + self.current_bit as usize
    }

    pub fn cursor(&self) -> BitCursor {
        BitCursor(self.bit_index())
    }

    pub fn remaining_bits(&self) -> usize {
        self.capacity_bits() - self.bit_index()
    }

    pub fn validate_offset_bits(&self, bits: usize) -> bool {
        self.remaining_bits() >= bits
    }

    pub fn validate_offset_bytes(&self, bytes: usize) -> bool {
        bytes
            .checked_mul(8)
            .is_some_and(|bits| self.validate_offset_bits(bits))
    }

    pub fn invariant_holds(&self) -> bool {
        invariant(self.current_bit, self.current_byte, self.buf.len())
    }

    fn require(&self, bits: usize) -> Result<(), StreamError> {
        if self.validate_offset_bits(bits) {
            Ok(())
        } else {
            Err(StreamError::OutOfBounds {
                at: self.bit_index(),
                needed: bits,
                available: self.remaining_bits(),
            })
        }
    }

    #[inline]
    fn place(&mut self, bit_index: usize) {
        self.current_byte = bit_index / 8;
        self.current_bit = (bit_index % 8) as u8;
        debug_assert!(self.invariant_holds());
    }

    /// Moves the cursor to an absolute position.
    pub fn set_cursor(&mut self, cursor: BitCursor) -> Result<(), StreamError> {
        if cursor.bits() > self.capacity_bits() {
            return Err(StreamError::OutOfBounds {
                at: self.bit_index(),
                needed: cursor.bits(),
                available: self.capacity_bits(),
            });
        }
        self.place(cursor.bits());
        Ok(())
    }

    /// Moves the cursor by a signed number of bits.
    pub fn move_bit_index(&mut self, offset: i64) -> Result<(), StreamError> {
        let target = self.bit_index() as i128 + offset as i128;
        if target < 0 || target > self.capacity_bits() as i128 {
            return Err(StreamError::BadMove {
                at: self.bit_index(),
                offset,
                capacity: self.capacity_bits(),
            });
        }
        self.place(target as usize);
        Ok(())
    }

    /// Copy of the stream moved by `offset` bits.
    pub fn with_moved_bit_index(&self, offset: i64) -> Result<BitStream, StreamError> {
        let mut s = self.clone();
        s.move_bit_index(offset)?;
        Ok(s)
    }

    /// A stream holding this buffer and `other`'s cursor.
    pub fn reset_at(&self, other: &BitStream) -> Result<BitStream, StreamError> {
        let mut s = self.clone();
        s.set_cursor(other.cursor())?;
        Ok(s)
    }

    // Writes the low `n` bits of `v`, most significant first. Space must
    // already be checked.
    fn write_msb_unchecked(&mut self, v: u64, mut n: u32) {
        let mut at = self.bit_index();
        while n > 0 {
            let used = (at % 8) as u32;
            let take = (8 - used).min(n);
            let chunk = ((v >> (n - take)) & low_mask(take)) as u8;
            let shift = 8 - used - take;
            let mask = (low_mask(take) as u8) << shift;
            let byte = &mut self.buf[at / 8];
            *byte = (*byte & !mask) | (chunk << shift);
            at += take as usize;
            n -= take;
        }
        self.place(at);
    }

    fn read_msb_unchecked(&mut self, mut n: u32) -> u64 {
        let mut at = self.bit_index();
        let mut v = 0u64;
        while n > 0 {
            let used = (at % 8) as u32;
            let take = (8 - used).min(n);
            let shift = 8 - used - take;
            let chunk = (self.buf[at / 8] >> shift) as u64 & low_mask(take);
            v = (v << take) | chunk;
            at += take as usize;
            n -= take;
        }
        self.place(at);
        v
    }

    fn check_width(n_bits: u32) -> Result<(), StreamError> {
        if n_bits > 64 {
            Err(StreamError::InvalidBitCount {
                count: n_bits as usize,
                min: 0,
                max: 64,
            })
        } else {
            Ok(())
        }
    }

    pub fn append_bit(&mut self, bit: bool) -> Result<(), StreamError> {
        self.require(1)?;
        self.write_msb_unchecked(bit as u64, 1);
        Ok(())
    }

    pub fn append_bit_one(&mut self) -> Result<(), StreamError> {
        self.append_bit(true)
    }

    pub fn append_bit_zero(&mut self) -> Result<(), StreamError> {
        self.append_bit(false)
    }

    /// Appends `n` copies of `bit`.
    pub fn append_n_bits(&mut self, bit: bool, n: usize) -> Result<(), StreamError> {
        self.require(n)?;
        let word = if bit { u64::MAX } else { 0 };
        let mut left = n;
        while left > 0 {
            let take = left.min(64);
            self.write_msb_unchecked(word, take as u32);
            left -= take;
        }
        Ok(())
    }

    pub fn append_n_zero_bits(&mut self, n: usize) -> Result<(), StreamError> {
        self.append_n_bits(false, n)
    }

    pub fn append_n_one_bits(&mut self, n: usize) -> Result<(), StreamError> {
        self.append_n_bits(true, n)
    }

    /// Appends bit `position` of `byte`, counting from the MSB (position 0).
    pub fn append_bit_from_byte(&mut self, byte: u8, position: u8) -> Result<(), StreamError> {
        if position > 7 {
            return Err(StreamError::InvalidBitCount {
                count: position as usize,
                min: 0,
                max: 7,
            });
        }
        self.append_bit(byte & (0x80 >> position) != 0)
    }

    /// Appends bits `[from, from + n_bits)` of `src`, MSB-first indexing.
    pub fn append_bits_msb_first(
        &mut self,
        src: &[u8],
        n_bits: usize,
        from: usize,
    ) -> Result<(), StreamError> {
        let to = from.checked_add(n_bits).ok_or(StreamError::SourceRange {
            from,
            to: usize::MAX,
            available: src.len() * 8,
        })?;
        if to > src.len() * 8 {
            return Err(StreamError::SourceRange {
                from,
                to,
                available: src.len() * 8,
            });
        }
        self.require(n_bits)?;
        for i in from..to {
            self.append_bit_from_byte(src[i / 8], (i % 8) as u8)?;
        }
        Ok(())
    }

    /// Appends the `n_bits` least significant bits of `v`, most significant of them first.
    pub fn append_lsb_bits_msb_first(&mut self, v: u64, n_bits: u32) -> Result<(), StreamError> {
        Self::check_width(n_bits)?;
        if v & !low_mask(n_bits) != 0 {
            return Err(StreamError::ValueTooWide {
                value: v,
                bits: n_bits,
            });
        }
        self.require(n_bits as usize)?;
        self.write_msb_unchecked(v, n_bits);
        Ok(())
    }

    pub fn read_n_lsb_bits_msb_first(&mut self, n_bits: u32) -> Result<u64, StreamError> {
        Self::check_width(n_bits)?;
        self.require(n_bits as usize)?;
        Ok(self.read_msb_unchecked(n_bits))
    }

    /// Appends the `n_bits` least significant bits of `v`, least significant first.
    pub fn append_bits_lsb_first(&mut self, v: u64, n_bits: u32) -> Result<(), StreamError> {
        Self::check_width(n_bits)?;
        if v & !low_mask(n_bits) != 0 {
            return Err(StreamError::ValueTooWide {
                value: v,
                bits: n_bits,
            });
        }
        self.require(n_bits as usize)?;
        for k in 0..n_bits {
            self.write_msb_unchecked((v >> k) & 1, 1);
        }
        Ok(())
    }

    pub fn read_n_bits_lsb_first(&mut self, n_bits: u32) -> Result<u64, StreamError> {
        Self::check_width(n_bits)?;
        self.require(n_bits as usize)?;
        let mut v = 0u64;
        for k in 0..n_bits {
            v |= self.read_msb_unchecked(1) << k;
        }
        Ok(v)
    }

    fn check_partial(n_bits: u8) -> Result<(), StreamError> {
        if (1..=8).contains(&n_bits) {
            Ok(())
        } else {
            Err(StreamError::InvalidBitCount {
                count: n_bits as usize,
                min: 1,
                max: 8,
            })
        }
    }

    /// Appends the `n_bits` most significant bits of `byte`.
    pub fn append_partial_byte(&mut self, byte: u8, n_bits: u8) -> Result<(), StreamError> {
        Self::check_partial(n_bits)?;
        self.require(n_bits as usize)?;
        self.write_msb_unchecked((byte >> (8 - n_bits)) as u64, n_bits as u32);
        Ok(())
    }

    /// Reads `n_bits` into the high bits of the result; the low bits are zero.
    pub fn read_partial_byte(&mut self, n_bits: u8) -> Result<u8, StreamError> {
        Self::check_partial(n_bits)?;
        self.require(n_bits as usize)?;
        let v = self.read_msb_unchecked(n_bits as u32) as u8;
        Ok(((v as u16) << (8 - n_bits)) as u8)
    }

    pub fn append_byte(&mut self, byte: u8) -> Result<(), StreamError> {
        self.require(8)?;
        self.write_msb_unchecked(byte as u64, 8);
        Ok(())
    }

    pub fn append_byte_array(&mut self, bytes: &[u8]) -> Result<(), StreamError> {
        self.require(bytes.len() * 8)?;
        if self.current_bit == 0 {
            let start = self.current_byte;
            self.buf[start..start + bytes.len()].copy_from_slice(bytes);
            self.place((start + bytes.len()) * 8);
        } else {
            for &b in bytes {
                self.write_msb_unchecked(b as u64, 8);
            }
        }
        Ok(())
    }

    pub fn read_byte(&mut self) -> Result<u8, StreamError> {
        self.require(8)?;
        Ok(self.read_msb_unchecked(8) as u8)
    }

    pub fn read_byte_array(&mut self, n: usize) -> Result<Vec<u8>, StreamError> {
        self.require(n * 8)?;
        if self.current_bit == 0 {
            let start = self.current_byte;
            let out = self.buf[start..start + n].to_vec();
            self.place((start + n) * 8);
            Ok(out)
        } else {
            Ok((0..n).map(|_| self.read_msb_unchecked(8) as u8).collect())
        }
    }

    pub fn read_bit(&mut self) -> Result<bool, StreamError> {
        self.require(1)?;
        Ok(self.read_msb_unchecked(1) != 0)
    }

    pub fn peek_bit(&self) -> Result<bool, StreamError> {
        self.require(1)?;
        Ok(bit_of(&self.buf, self.bit_index()))
    }

    /// Reads `n_bits` packed MSB-first into `ceil(n_bits / 8)` bytes; the
    /// trailing pad bits of the last byte are zero.
    pub fn read_bits(&mut self, n_bits: usize) -> Result<Vec<u8>, StreamError> {
        self.require(n_bits)?;
        let mut out = Vec::with_capacity(n_bits.div_ceil(8));
        let mut left = n_bits;
        while left >= 8 {
            out.push(self.read_msb_unchecked(8) as u8);
            left -= 8;
        }
        if left > 0 {
            let v = self.read_msb_unchecked(left as u32) as u8;
            out.push(v << (8 - left));
        }
        Ok(out)
    }

    /// Pads with zero bits up to the next multiple of `modulus` bits of the
    /// absolute position. Space is checked before anything is written.
    pub fn align_to(&mut self, modulus: usize) -> Result<usize, StreamError> {
        let pad = padding_bits(self.bit_index(), modulus);
        self.append_n_zero_bits(pad)?;
        Ok(pad)
    }

    /// Skips the padding `align_to` would have written.
    pub fn skip_alignment(&mut self, modulus: usize) -> Result<usize, StreamError> {
        let pad = padding_bits(self.bit_index(), modulus);
        self.require(pad)?;
        self.place(self.bit_index() + pad);
        Ok(pad)
    }

    /// True when `self`'s cursor is not past `other`'s and both buffers agree
    /// on every bit before `self`'s cursor.
    pub fn is_prefix_of(&self, other: &BitStream) -> Result<bool, StreamError> {
        if self.buf.len() != other.buf.len() {
            return Err(StreamError::LengthMismatch {
                left: self.buf.len(),
                right: other.buf.len(),
            });
        }
        Ok(self.bit_index() <= other.bit_index()
            && bit_ranges_equal(&self.buf, &other.buf, 0, self.bit_index())?)
    }

    /// Hex dump of the buffer followed by the cursor as `byte:bit`.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.buf.len() * 3 + 12);
        for (i, b) in self.buf.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{b:02x}"));
        }
        out.push_str(&format!(" @ {}", self.cursor()));
        out
    }
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitStream[{}]", self.dump())
    }
}

impl fmt::Display for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_small_streams() {
        let s = BitStream::new(0).unwrap();
        assert_eq!(s.bit_index(), 0);
        assert_eq!(s.remaining_bits(), 0);
        let s = BitStream::new(2).unwrap();
        assert_eq!(s.remaining_bits(), 16);
        assert!(matches!(
            BitStream::new((1 << 28) + 1),
            Err(StreamError::Capacity { .. })
        ));
    }

    #[test]
    fn offset_validation() {
        let mut s = BitStream::new(1).unwrap();
        assert!(s.validate_offset_bits(8));
        assert!(!s.validate_offset_bits(9));
        s.append_bit(true).unwrap();
        assert_eq!(s.remaining_bits(), 7);
        assert!(s.validate_offset_bytes(0));
        assert!(!s.validate_offset_bytes(1));
    }

    #[test]
    fn moving_the_cursor() {
        let mut s = BitStream::new(2).unwrap();
        s.move_bit_index(11).unwrap();
        assert_eq!((s.current_byte(), s.current_bit()), (1, 3));
        s.move_bit_index(0).unwrap();
        assert_eq!(s.bit_index(), 11);
        s.move_bit_index(-11).unwrap();
        assert_eq!(s.bit_index(), 0);
        assert!(s.move_bit_index(-1).is_err());
        let mut one = BitStream::new(1).unwrap();
        assert!(matches!(one.move_bit_index(9), Err(StreamError::BadMove { .. })));
        one.move_bit_index(8).unwrap();
        assert_eq!((one.current_byte(), one.current_bit()), (1, 0));
        assert!(one.invariant_holds());
    }

    #[test]
    fn reset_at_takes_buffer_from_self_and_cursor_from_other() {
        let mut s = BitStream::new(2).unwrap();
        s.append_byte(0xA5).unwrap();
        s.append_n_one_bits(2).unwrap();
        assert_eq!(s.reset_at(&s).unwrap(), s);
        let other = BitStream::new(2).unwrap();
        let r = s.reset_at(&other).unwrap();
        assert_eq!(r.buf(), s.buf());
        assert_eq!(r.bit_index(), 0);
        assert_eq!(s.bit_index(), 10);

        let small = BitStream::new(1).unwrap();
        let mut far = BitStream::new(2).unwrap();
        far.move_bit_index(12).unwrap();
        assert!(small.reset_at(&far).is_err());
    }

    #[test]
    fn single_bits() {
        let mut s = BitStream::new(1).unwrap();
        s.append_bit(true).unwrap();
        assert_eq!(s.buf()[0], 0b1000_0000);
        assert_eq!(s.bit_index(), 1);
        let mut s = BitStream::new(1).unwrap();
        s.append_bit(false).unwrap();
        assert_eq!((s.buf()[0], s.bit_index()), (0, 1));
        let mut s = BitStream::new(0).unwrap();
        assert!(matches!(
            s.append_bit(true),
            Err(StreamError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn runs_of_bits() {
        let mut s = BitStream::new(1).unwrap();
        s.append_n_bits(true, 3).unwrap();
        assert_eq!(s.buf()[0], 0b1110_0000);
        assert_eq!(s.bit_index(), 3);
        s.append_n_bits(false, 0).unwrap();
        assert_eq!(s.bit_index(), 3);
        let mut s = BitStream::new(1).unwrap();
        assert!(s.append_n_bits(false, 9).is_err());
        assert_eq!(s.bit_index(), 0);
    }

    #[test]
    fn bit_from_byte_is_msb_indexed() {
        let mut s = BitStream::new(1).unwrap();
        s.append_bit_from_byte(0b1000_0000, 0).unwrap();
        s.append_bit_from_byte(0b1000_0000, 7).unwrap();
        s.append_bit_from_byte(0xFF, 3).unwrap();
        assert_eq!(s.buf()[0], 0b1010_0000);
        assert!(s.append_bit_from_byte(0xFF, 8).is_err());
    }

    #[test]
    fn partial_bytes_are_left_aligned() {
        let mut s = BitStream::new(2).unwrap();
        s.move_bit_index(5).unwrap();
        s.append_partial_byte(0b1010_0000, 3).unwrap();
        let mut r = s.clone();
        r.set_cursor(5.into()).unwrap();
        assert_eq!(r.read_partial_byte(3).unwrap(), 0b1010_0000);
        assert!(s.append_partial_byte(0, 0).is_err());
        assert!(s.append_partial_byte(0, 9).is_err());
    }

    #[test]
    fn straddling_byte() {
        let mut s = BitStream::new(2).unwrap();
        s.move_bit_index(4).unwrap();
        s.append_byte(0xAB).unwrap();
        assert_eq!(s.buf(), &[0x0A, 0xB0]);
        let mut r = s.clone();
        r.set_cursor(4.into()).unwrap();
        assert_eq!(r.read_byte().unwrap(), 0xAB);
    }

    #[test]
    fn read_bits_pads_with_zero() {
        let mut s = BitStream::from_bytes(vec![0b1011_1111]).unwrap();
        assert_eq!(s.read_bits(3).unwrap(), vec![0b1010_0000]);
        assert_eq!(s.read_bits(0).unwrap(), Vec::<u8>::new());
        let peeked = s.peek_bit().unwrap();
        let before = s.bit_index();
        assert_eq!(s.read_bit().unwrap(), peeked);
        assert_eq!(s.bit_index(), before + 1);
    }

    #[test]
    fn value_width_checks() {
        let mut s = BitStream::new(8).unwrap();
        assert!(matches!(
            s.append_lsb_bits_msb_first(4, 2),
            Err(StreamError::ValueTooWide { value: 4, bits: 2 })
        ));
        s.append_lsb_bits_msb_first(0, 0).unwrap();
        assert_eq!(s.read_n_lsb_bits_msb_first(0).unwrap(), 0);
        s.append_lsb_bits_msb_first(u64::MAX, 64).unwrap();
        s.set_cursor(0.into()).unwrap();
        assert_eq!(s.read_n_lsb_bits_msb_first(64).unwrap(), u64::MAX);
        assert!(s.append_lsb_bits_msb_first(0, 65).is_err());
    }

    #[test]
    fn lsb_first_reverses_bit_order() {
        let mut s = BitStream::new(1).unwrap();
        s.append_bits_lsb_first(0b110, 3).unwrap();
        assert_eq!(s.buf()[0], 0b0110_0000);
        s.set_cursor(0.into()).unwrap();
        assert_eq!(s.read_n_bits_lsb_first(3).unwrap(), 0b110);
    }

    #[test]
    fn bit_ranges() {
        let a = [0u8, 0];
        let b = [0u8, 0b0100_0000];
        assert!(bit_ranges_equal(&a, &b, 0, 9).unwrap());
        assert!(!bit_ranges_equal(&a, &b, 0, 10).unwrap());
        assert!(bit_ranges_equal(&a, &b, 10, 16).unwrap());
        assert!(bit_ranges_equal(&a, &b, 3, 3).unwrap());
        assert!(bit_ranges_equal(&a, &b, 0, 17).is_err());
    }

    #[test]
    fn prefix_after_rewind() {
        let mut s = BitStream::new(2).unwrap();
        s.append_lsb_bits_msb_first(0x5A5, 12).unwrap();
        let a = s.with_moved_bit_index(-3).unwrap();
        assert!(a.is_prefix_of(&s).unwrap());
        assert!(!s.is_prefix_of(&a).unwrap());
        assert!(s.is_prefix_of(&BitStream::new(3).unwrap()).is_err());
    }

    #[test]
    fn alignment_checks_space_before_padding() {
        let mut s = BitStream::new(1).unwrap();
        s.append_bit(true).unwrap();
        assert_eq!(s.align_to(8).unwrap(), 7);
        assert_eq!(s.bit_index(), 8);
        let mut s = BitStream::new(1).unwrap();
        s.append_bit(true).unwrap();
        assert!(s.align_to(16).is_err());
        assert_eq!(s.bit_index(), 1);
        assert_eq!(padding_bits(3, 8), 5);
        assert_eq!(padding_bits(8, 8), 0);
        assert_eq!(padding_bits(5, 1), 0);
    }

    #[test]
    fn dump_format() {
        let mut s = BitStream::new(2).unwrap();
        s.append_lsb_bits_msb_first(0xAB1, 12).unwrap();
        assert_eq!(s.dump(), "ab 10 @ 1:4");
    }
}
