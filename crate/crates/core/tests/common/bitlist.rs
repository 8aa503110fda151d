//! Reference model of the bit stream: a plain `Vec<bool>` and an index.
//!
//! Deliberately naive. Every operation is written bit by bit with no
//! masking tricks so that it can serve as an oracle for `BitStream`.

use acnkit::bitstream::BitStream;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitList {
    pub bits: Vec<bool>,
    pub pos: usize,
}

/// Result of one operation, shaped so model and implementation compare directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Err,
    Unit,
    Num(u64),
    Bytes(Vec<u8>),
}

impl BitList {
    pub fn new(capacity_bytes: usize) -> Self {
        BitList {
            bits: vec![false; capacity_bytes * 8],
            pos: 0,
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for b in bytes {
            for i in 0..8 {
                bits.push((b >> (7 - i)) & 1 == 1);
            }
        }
        BitList { bits, pos: 0 }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        pack(&self.bits)
    }

    fn room(&self, n: usize) -> bool {
        self.bits.len() - self.pos >= n
    }

    pub fn write(&mut self, src: &[bool]) -> bool {
        if !self.room(src.len()) {
            return false;
        }
        for &b in src {
            self.bits[self.pos] = b;
            self.pos += 1;
        }
        true
    }

    pub fn read(&mut self, n: usize) -> Option<Vec<bool>> {
        if !self.room(n) {
            return None;
        }
        let out = self.bits[self.pos..self.pos + n].to_vec();
        self.pos += n;
        Some(out)
    }
}

/// Packs bits MSB-first, zero-padding the last byte.
pub fn pack(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| {
            let mut b = 0u8;
            for (i, &bit) in c.iter().enumerate() {
                if bit {
                    b |= 0x80 >> i;
                }
            }
            b
        })
        .collect()
}

/// The low `n` bits of `v`, most significant first.
pub fn msb_bits(v: u64, n: u32) -> Vec<bool> {
    (0..n).rev().map(|k| (v >> k) & 1 == 1).collect()
}

pub fn bits_to_u64(bits: &[bool]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

fn fits(v: u64, n: u32) -> bool {
    n >= 64 || v >> n == 0
}

#[derive(Debug, Clone)]
pub enum Op {
    AppendBit(bool),
    AppendNBits(bool, usize),
    AppendBitFromByte(u8, u8),
    AppendBitsMsbFirst(Vec<u8>, usize, usize),
    AppendLsbBitsMsbFirst(u64, u32),
    ReadLsbBitsMsbFirst(u32),
    AppendBitsLsbFirst(u64, u32),
    ReadBitsLsbFirst(u32),
    AppendPartialByte(u8, u8),
    ReadPartialByte(u8),
    AppendByte(u8),
    AppendByteArray(Vec<u8>),
    ReadByte,
    ReadByteArray(usize),
    ReadBit,
    PeekBit,
    ReadBits(usize),
    AlignTo(usize),
    SkipAlignment(usize),
    SetCursor(usize),
    MoveBitIndex(i64),
}

impl Op {
    /// A random operation. Arguments stray outside their valid ranges now
    /// and then so error paths get exercised too.
    pub fn random<R: Rng>(rng: &mut R, capacity_bits: usize) -> Op {
        let n64 = |rng: &mut R| -> u32 {
            if rng.gen_ratio(1, 40) {
                65
            } else {
                rng.gen_range(0..=64)
            }
        };
        let value = |rng: &mut R, n: u32| -> u64 {
            let v: u64 = rng.gen();
            if n < 64 && !rng.gen_ratio(1, 20) {
                v & ((1u64 << n) - 1)
            } else {
                v
            }
        };
        match rng.gen_range(0..21) {
            0 => Op::AppendBit(rng.gen()),
            1 => Op::AppendNBits(rng.gen(), rng.gen_range(0..150)),
            2 => Op::AppendBitFromByte(rng.gen(), rng.gen_range(0..9)),
            3 => {
                let src: Vec<u8> = (0..rng.gen_range(0..6)).map(|_| rng.gen()).collect();
                let limit = src.len() * 8 + 2;
                Op::AppendBitsMsbFirst(src, rng.gen_range(0..=limit), rng.gen_range(0..=limit))
            }
            4 => {
                let n = n64(rng);
                Op::AppendLsbBitsMsbFirst(value(rng, n), n)
            }
            5 => Op::ReadLsbBitsMsbFirst(n64(rng)),
            6 => {
                let n = n64(rng);
                Op::AppendBitsLsbFirst(value(rng, n), n)
            }
            7 => Op::ReadBitsLsbFirst(n64(rng)),
            8 => Op::AppendPartialByte(rng.gen(), rng.gen_range(0..10)),
            9 => Op::ReadPartialByte(rng.gen_range(0..10)),
            10 => Op::AppendByte(rng.gen()),
            11 => Op::AppendByteArray((0..rng.gen_range(0..10)).map(|_| rng.gen()).collect()),
            12 => Op::ReadByte,
            13 => Op::ReadByteArray(rng.gen_range(0..10)),
            14 => Op::ReadBit,
            15 => Op::PeekBit,
            16 => Op::ReadBits(rng.gen_range(0..80)),
            17 => Op::AlignTo(*[0, 1, 8, 16, 32, 64, 3].get(rng.gen_range(0..7)).unwrap()),
            18 => Op::SkipAlignment(*[0, 1, 8, 16, 32, 64, 5].get(rng.gen_range(0..7)).unwrap()),
            19 => Op::SetCursor(rng.gen_range(0..=capacity_bits + 4)),
            _ => Op::MoveBitIndex(rng.gen_range(-(capacity_bits as i64) - 4..=capacity_bits as i64 + 4)),
        }
    }

    /// Applies the operation to the model. A failed operation leaves it untouched.
    pub fn apply_model(&self, m: &mut BitList) -> Outcome {
        let unit = |ok: bool| if ok { Outcome::Unit } else { Outcome::Err };
        match *self {
            Op::AppendBit(b) => unit(m.write(&[b])),
            Op::AppendNBits(b, n) => unit(m.write(&vec![b; n])),
            Op::AppendBitFromByte(byte, p) => {
                if p > 7 {
                    return Outcome::Err;
                }
                unit(m.write(&[(byte >> (7 - p)) & 1 == 1]))
            }
            Op::AppendBitsMsbFirst(ref src, n, from) => {
                let all = BitList::from_bytes(src).bits;
                if from + n > all.len() {
                    return Outcome::Err;
                }
                unit(m.write(&all[from..from + n]))
            }
            Op::AppendLsbBitsMsbFirst(v, n) => {
                if n > 64 || !fits(v, n) {
                    return Outcome::Err;
                }
                unit(m.write(&msb_bits(v, n)))
            }
            Op::ReadLsbBitsMsbFirst(n) => {
                if n > 64 {
                    return Outcome::Err;
                }
                m.read(n as usize).map_or(Outcome::Err, |b| Outcome::Num(bits_to_u64(&b)))
            }
            Op::AppendBitsLsbFirst(v, n) => {
                if n > 64 || !fits(v, n) {
                    return Outcome::Err;
                }
                let bits: Vec<bool> = (0..n).map(|k| (v >> k) & 1 == 1).collect();
                unit(m.write(&bits))
            }
            Op::ReadBitsLsbFirst(n) => {
                if n > 64 {
                    return Outcome::Err;
                }
                m.read(n as usize).map_or(Outcome::Err, |b| {
                    Outcome::Num(b.iter().enumerate().fold(0, |acc, (k, &x)| acc | (x as u64) << k))
                })
            }
            Op::AppendPartialByte(byte, n) => {
                if !(1..=8).contains(&n) {
                    return Outcome::Err;
                }
                let bits: Vec<bool> = (0..n).map(|i| (byte >> (7 - i)) & 1 == 1).collect();
                unit(m.write(&bits))
            }
            Op::ReadPartialByte(n) => {
                if !(1..=8).contains(&n) {
                    return Outcome::Err;
                }
                m.read(n as usize).map_or(Outcome::Err, |b| Outcome::Num(pack(&b)[0] as u64))
            }
            Op::AppendByte(byte) => unit(m.write(&msb_bits(byte as u64, 8))),
            Op::AppendByteArray(ref bytes) => unit(m.write(&BitList::from_bytes(bytes).bits)),
            Op::ReadByte => m.read(8).map_or(Outcome::Err, |b| Outcome::Num(bits_to_u64(&b))),
            Op::ReadByteArray(n) => m.read(n * 8).map_or(Outcome::Err, |b| Outcome::Bytes(pack(&b))),
            Op::ReadBit => m.read(1).map_or(Outcome::Err, |b| Outcome::Num(b[0] as u64)),
            Op::PeekBit => match m.bits.get(m.pos) {
                Some(&b) => Outcome::Num(b as u64),
                None => Outcome::Err,
            },
            Op::ReadBits(n) => m.read(n).map_or(Outcome::Err, |b| Outcome::Bytes(pack(&b))),
            Op::AlignTo(k) => {
                let pad = model_padding(m.pos, k);
                if m.write(&vec![false; pad]) {
                    Outcome::Num(pad as u64)
                } else {
                    Outcome::Err
                }
            }
            Op::SkipAlignment(k) => {
                let pad = model_padding(m.pos, k);
                m.read(pad).map_or(Outcome::Err, |_| Outcome::Num(pad as u64))
            }
            Op::SetCursor(c) => {
                if c > m.bits.len() {
                    return Outcome::Err;
                }
                m.pos = c;
                Outcome::Unit
            }
            Op::MoveBitIndex(d) => {
                let t = m.pos as i64 + d;
                if t < 0 || t as usize > m.bits.len() {
                    return Outcome::Err;
                }
                m.pos = t as usize;
                Outcome::Unit
            }
        }
    }

    pub fn apply_stream(&self, s: &mut BitStream) -> Outcome {
        fn unit<E>(r: Result<(), E>) -> Outcome {
            r.map_or(Outcome::Err, |_| Outcome::Unit)
        }
        fn num<T: Into<u64>, E>(r: Result<T, E>) -> Outcome {
            r.map_or(Outcome::Err, |v| Outcome::Num(v.into()))
        }
        fn bytes<E>(r: Result<Vec<u8>, E>) -> Outcome {
            r.map_or(Outcome::Err, Outcome::Bytes)
        }
        match *self {
            Op::AppendBit(b) => unit(s.append_bit(b)),
            Op::AppendNBits(b, n) => unit(s.append_n_bits(b, n)),
            Op::AppendBitFromByte(byte, p) => unit(s.append_bit_from_byte(byte, p)),
            Op::AppendBitsMsbFirst(ref src, n, from) => unit(s.append_bits_msb_first(src, n, from)),
            Op::AppendLsbBitsMsbFirst(v, n) => unit(s.append_lsb_bits_msb_first(v, n)),
            Op::ReadLsbBitsMsbFirst(n) => num(s.read_n_lsb_bits_msb_first(n)),
            Op::AppendBitsLsbFirst(v, n) => unit(s.append_bits_lsb_first(v, n)),
            Op::ReadBitsLsbFirst(n) => num(s.read_n_bits_lsb_first(n)),
            Op::AppendPartialByte(byte, n) => unit(s.append_partial_byte(byte, n)),
            Op::ReadPartialByte(n) => num(s.read_partial_byte(n)),
            Op::AppendByte(byte) => unit(s.append_byte(byte)),
            Op::AppendByteArray(ref b) => unit(s.append_byte_array(b)),
            Op::ReadByte => num(s.read_byte()),
            Op::ReadByteArray(n) => bytes(s.read_byte_array(n)),
            Op::ReadBit => num(s.read_bit()),
            Op::PeekBit => num(s.peek_bit()),
            Op::ReadBits(n) => bytes(s.read_bits(n)),
            Op::AlignTo(k) => num(s.align_to(k).map(|p| p as u64)),
            Op::SkipAlignment(k) => num(s.skip_alignment(k).map(|p| p as u64)),
            Op::SetCursor(c) => unit(s.set_cursor(c.into())),
            Op::MoveBitIndex(d) => unit(s.move_bit_index(d)),
        }
    }
}

fn model_padding(pos: usize, k: usize) -> usize {
    if k <= 1 {
        return 0;
    }
    let mut pad = 0;
    while !(pos + pad).is_multiple_of(k) {
        pad += 1;
    }
    pad
}

/// Runs `ops` on a fresh model and a fresh stream of the same capacity,
/// checking after every step that outcome, buffer, cursor and the cursor
/// invariant agree. Returns a description of the first divergence.
pub fn run_differential(capacity_bytes: usize, ops: &[Op]) -> Result<(), String> {
    let mut m = BitList::new(capacity_bytes);
    let mut s = BitStream::new(capacity_bytes).map_err(|e| e.to_string())?;
    for (i, op) in ops.iter().enumerate() {
        let want = op.apply_model(&mut m);
        let got = op.apply_stream(&mut s);
        if want != got {
            return Err(format!("step {i} {op:?}: model {want:?}, stream {got:?}"));
        }
        if !s.invariant_holds() {
            return Err(format!("step {i} {op:?}: invariant broken at {}", s.cursor()));
        }
        if s.bit_index() != m.pos {
            return Err(format!("step {i} {op:?}: cursor {} vs model {}", s.bit_index(), m.pos));
        }
        if s.buf() != m.to_bytes().as_slice() {
            return Err(format!("step {i} {op:?}: buffers differ\n  stream {}\n  model  {:02x?}", s.dump(), m.to_bytes()));
        }
    }
    Ok(())
}
