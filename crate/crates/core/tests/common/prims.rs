//! Primitive test cases with an independent bit-level oracle.

use acnkit::codec::{AcnCodec, Alphabet, CodecResult, Endianness, RealWidth, WordWidth};
use rand::seq::SliceRandom;
use rand::Rng;

use super::bitlist::msb_bits;

#[derive(Debug, Clone, PartialEq)]
pub enum Prim {
    Bool(bool),
    ConsPos { v: u64, min: u64, max: u64 },
    Cons { v: i64, min: i64, max: i64 },
    UInt { v: u64, bits: u32 },
    UIntAligned { v: u64, bits: u32 },
    Twos { v: i64, bits: u32 },
    TwosAligned { v: i64, bits: u32 },
    Real { pattern: u64, bits: u32, little: bool },
    NullTerm { s: Vec<u8>, max: usize, pattern: Vec<u8> },
    CharInternal { s: Vec<u8>, alphabet: Vec<u8>, min: usize, max: usize },
    CharExternal { s: Vec<u8>, alphabet: Vec<u8>, max: usize },
}

pub const KINDS: [&str; 11] = [
    "bool",
    "cpwn",
    "cwn",
    "uint",
    "uint_aligned",
    "twos",
    "twos_aligned",
    "real",
    "ascii_null",
    "char_internal",
    "char_external",
];

fn width_of(range: u128) -> u32 {
    let mut n = 0;
    while n < 128 && (range >> n) != 0 {
        n += 1;
    }
    n
}

fn word(bits: u32) -> WordWidth {
    WordWidth::from_bits(bits).expect("word width")
}

fn real(bits: u32) -> RealWidth {
    RealWidth::from_bits(bits).expect("real width")
}

fn endian(little: bool) -> Endianness {
    if little {
        Endianness::Little
    } else {
        Endianness::Big
    }
}

fn wide<R: Rng>(rng: &mut R) -> u64 {
    let shift = rng.gen_range(0..64);
    rng.gen::<u64>() >> shift
}

impl Prim {
    pub fn kind(&self) -> &'static str {
        match self {
            Prim::Bool(_) => "bool",
            Prim::ConsPos { .. } => "cpwn",
            Prim::Cons { .. } => "cwn",
            Prim::UInt { .. } => "uint",
            Prim::UIntAligned { .. } => "uint_aligned",
            Prim::Twos { .. } => "twos",
            Prim::TwosAligned { .. } => "twos_aligned",
            Prim::Real { .. } => "real",
            Prim::NullTerm { .. } => "ascii_null",
            Prim::CharInternal { .. } => "char_internal",
            Prim::CharExternal { .. } => "char_external",
        }
    }

    /// A valid random case of the given kind.
    pub fn random<R: Rng>(rng: &mut R, kind: &str) -> Prim {
        match kind {
            "bool" => Prim::Bool(rng.gen()),
            "cpwn" => {
                let a = wide(rng);
                let b = wide(rng);
                let (min, max) = (a.min(b), a.max(b));
                Prim::ConsPos { v: rng.gen_range(min..=max), min, max }
            }
            "cwn" => {
                let a = if rng.gen() { (wide(rng) as i64).wrapping_neg() } else { wide(rng) as i64 };
                let b = if rng.gen() { (wide(rng) as i64).wrapping_neg() } else { wide(rng) as i64 };
                let (min, max) = if rng.gen_ratio(1, 50) { (i64::MIN, i64::MAX) } else { (a.min(b), a.max(b)) };
                Prim::Cons { v: rng.gen_range(min..=max), min, max }
            }
            "uint" => {
                let bits = rng.gen_range(1..=64);
                Prim::UInt { v: rng.gen::<u64>() >> (64 - bits), bits }
            }
            "uint_aligned" => {
                let bits = *[8, 16, 32, 64].choose(rng).unwrap();
                Prim::UIntAligned { v: rng.gen::<u64>() >> (64 - bits), bits }
            }
            "twos" => {
                let bits = rng.gen_range(1..=64);
                Prim::Twos { v: rng.gen::<i64>() >> (64 - bits), bits }
            }
            "twos_aligned" => {
                let bits = *[8, 16, 32, 64].choose(rng).unwrap();
                Prim::TwosAligned { v: rng.gen::<i64>() >> (64 - bits), bits }
            }
            "real" => {
                let bits = *[32, 64].choose(rng).unwrap();
                // Every pattern is fair game, NaNs and signed zeros included.
                let pattern = if rng.gen_ratio(1, 8) {
                    *[0x7ff8_0000_0000_0001u64, 0x8000_0000_0000_0000, 0x7ff0_0000_0000_0000, 0xfff8_0000_0000_0000]
                        .choose(rng)
                        .unwrap()
                        >> (64 - bits)
                } else {
                    rng.gen::<u64>() >> (64 - bits)
                };
                Prim::Real { pattern, bits, little: rng.gen() }
            }
            "ascii_null" => {
                let pattern: Vec<u8> = (0..rng.gen_range(1..=8)).map(|_| rng.gen()).collect();
                let s: Vec<u8> = (0..rng.gen_range(0..12))
                    .map(|_| loop {
                        let c = rng.gen_range(0..128u8);
                        if c != pattern[0] {
                            break c;
                        }
                    })
                    .collect();
                let max = s.len() + rng.gen_range(0..4);
                Prim::NullTerm { s, max, pattern }
            }
            _ => {
                let mut pool: Vec<u8> = (0..128).collect();
                pool.shuffle(rng);
                pool.truncate(rng.gen_range(1..=128));
                let s: Vec<u8> = (0..rng.gen_range(0..16)).map(|_| *pool.choose(rng).unwrap()).collect();
                if kind == "char_internal" {
                    let min = rng.gen_range(0..=s.len());
                    let max = s.len() + rng.gen_range(0..40);
                    Prim::CharInternal { s, alphabet: pool, min, max }
                } else {
                    let max = s.len() + rng.gen_range(0..5);
                    Prim::CharExternal { s, alphabet: pool, max }
                }
            }
        }
    }

    /// The bits the primitive must produce, computed from first principles.
    pub fn oracle_bits(&self) -> Vec<bool> {
        match self {
            Prim::Bool(b) => vec![*b],
            Prim::ConsPos { v, min, max } => {
                msb_bits(v - min, width_of(*max as u128 - *min as u128))
            }
            Prim::Cons { v, min, max } => {
                let off = (*v as i128 - *min as i128) as u64;
                msb_bits(off, width_of((*max as i128 - *min as i128) as u128))
            }
            Prim::UInt { v, bits } | Prim::UIntAligned { v, bits } => msb_bits(*v, *bits),
            Prim::Twos { v, bits } | Prim::TwosAligned { v, bits } => {
                let modulus = 1i128 << bits;
                let raw = (*v as i128).rem_euclid(modulus) as u64;
                msb_bits(raw, *bits)
            }
            Prim::Real { pattern, bits, little } => {
                let n = (*bits / 8) as usize;
                let mut bytes: Vec<u8> = (0..n).map(|i| (pattern >> (8 * (n - 1 - i))) as u8).collect();
                if *little {
                    bytes.reverse();
                }
                bytes.iter().flat_map(|&b| msb_bits(b as u64, 8)).collect()
            }
            Prim::NullTerm { s, pattern, .. } => {
                s.iter().chain(pattern.iter()).flat_map(|&b| msb_bits(b as u64, 8)).collect()
            }
            Prim::CharInternal { s, alphabet, min, max } => {
                let mut out = msb_bits((s.len() - min) as u64, width_of((max - min) as u128));
                out.extend(char_indices(s, alphabet));
                out
            }
            Prim::CharExternal { s, alphabet, .. } => char_indices(s, alphabet),
        }
    }

    pub fn encode(&self, c: &mut AcnCodec) -> CodecResult<()> {
        match self {
            Prim::Bool(b) => c.enc_boolean(*b),
            Prim::ConsPos { v, min, max } => c.encode_constrained_pos_whole_number(*v, *min, *max),
            Prim::Cons { v, min, max } => c.encode_constrained_whole_number(*v, *min, *max),
            Prim::UInt { v, bits } => c.enc_uint_const_size(*v, *bits),
            Prim::UIntAligned { v, bits } => c.enc_uint_const_size_aligned(*v, word(*bits)),
            Prim::Twos { v, bits } => c.enc_int_twos_complement_const_size(*v, *bits),
            Prim::TwosAligned { v, bits } => c.enc_int_twos_complement_const_size_aligned(*v, word(*bits)),
            Prim::Real { pattern, bits, little } => c.enc_real_ieee754(*pattern, real(*bits), endian(*little)),
            Prim::NullTerm { s, max, pattern } => c.enc_string_ascii_null_terminated(s, *max, pattern),
            Prim::CharInternal { s, alphabet, min, max } => {
                c.enc_string_char_index_internal(s, &Alphabet::new(alphabet.clone())?, *min, *max)
            }
            Prim::CharExternal { s, alphabet, max } => {
                c.enc_string_char_index_external(s, &Alphabet::new(alphabet.clone())?, *max, s.len())
            }
        }
    }

    /// Decodes with the same parameters and returns the case it read back.
    pub fn decode(&self, c: &mut AcnCodec) -> CodecResult<Prim> {
        Ok(match self {
            Prim::Bool(_) => Prim::Bool(c.dec_boolean()?),
            Prim::ConsPos { min, max, .. } => Prim::ConsPos {
                v: c.decode_constrained_pos_whole_number(*min, *max)?,
                min: *min,
                max: *max,
            },
            Prim::Cons { min, max, .. } => Prim::Cons {
                v: c.decode_constrained_whole_number(*min, *max)?,
                min: *min,
                max: *max,
            },
            Prim::UInt { bits, .. } => Prim::UInt { v: c.dec_uint_const_size(*bits)?, bits: *bits },
            Prim::UIntAligned { bits, .. } => Prim::UIntAligned {
                v: c.dec_uint_const_size_aligned(word(*bits))?,
                bits: *bits,
            },
            Prim::Twos { bits, .. } => Prim::Twos {
                v: c.dec_int_twos_complement_const_size(*bits)?,
                bits: *bits,
            },
            Prim::TwosAligned { bits, .. } => Prim::TwosAligned {
                v: c.dec_int_twos_complement_const_size_aligned(word(*bits))?,
                bits: *bits,
            },
            Prim::Real { bits, little, .. } => Prim::Real {
                pattern: c.dec_real_ieee754(real(*bits), endian(*little))?,
                bits: *bits,
                little: *little,
            },
            Prim::NullTerm { max, pattern, .. } => Prim::NullTerm {
                s: c.dec_string_ascii_null_terminated(*max, pattern)?,
                max: *max,
                pattern: pattern.clone(),
            },
            Prim::CharInternal { alphabet, min, max, .. } => Prim::CharInternal {
                s: c.dec_string_char_index_internal(&Alphabet::new(alphabet.clone())?, *min, *max)?,
                alphabet: alphabet.clone(),
                min: *min,
                max: *max,
            },
            Prim::CharExternal { s, alphabet, max } => Prim::CharExternal {
                s: c.dec_string_char_index_external(&Alphabet::new(alphabet.clone())?, *max, s.len())?,
                alphabet: alphabet.clone(),
                max: *max,
            },
        })
    }

    /// Parses the argument list of a golden-vector line.
    pub fn parse(op: &str, args: &[&str]) -> Prim {
        let int = |i: usize| -> i128 { args[i].parse().unwrap_or_else(|_| panic!("bad integer {:?}", args[i])) };
        let hex = |i: usize| -> Vec<u8> { from_hex(args[i]) };
        match op {
            "bool" => Prim::Bool(int(0) != 0),
            "cpwn" => Prim::ConsPos { v: int(0) as u64, min: int(1) as u64, max: int(2) as u64 },
            "cwn" => Prim::Cons { v: int(0) as i64, min: int(1) as i64, max: int(2) as i64 },
            "uint" => Prim::UInt { v: int(0) as u64, bits: int(1) as u32 },
            "uint_aligned" => Prim::UIntAligned { v: int(0) as u64, bits: int(1) as u32 },
            "twos" => Prim::Twos { v: int(0) as i64, bits: int(1) as u32 },
            "twos_aligned" => Prim::TwosAligned { v: int(0) as i64, bits: int(1) as u32 },
            "real" => Prim::Real {
                pattern: u64::from_str_radix(args[0], 16).unwrap(),
                bits: int(1) as u32,
                little: args[2] == "little",
            },
            "ascii_null" => Prim::NullTerm { s: hex(0), max: int(1) as usize, pattern: hex(2) },
            "char_internal" => Prim::CharInternal {
                s: hex(0),
                alphabet: hex(1),
                min: int(2) as usize,
                max: int(3) as usize,
            },
            "char_external" => Prim::CharExternal { s: hex(0), alphabet: hex(1), max: int(2) as usize },
            other => panic!("unknown primitive {other}"),
        }
    }
}

fn char_indices(s: &[u8], alphabet: &[u8]) -> Vec<bool> {
    let mut bpc = 0;
    while (1usize << bpc) < alphabet.len() {
        bpc += 1;
    }
    s.iter()
        .flat_map(|c| {
            let i = alphabet.iter().position(|a| a == c).expect("character in alphabet");
            msb_bits(i as u64, bpc)
        })
        .collect()
}

pub fn from_hex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).expect("hex"))
        .collect()
}

pub fn to_hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

/// One parsed line of `fixtures/golden/primitives.txt`.
pub struct Golden {
    pub line: String,
    pub offset: usize,
    pub prim: Prim,
    pub bytes: Vec<u8>,
    pub bits: usize,
}

pub fn golden_vectors() -> Vec<Golden> {
    let text = std::fs::read_to_string(super::fixture("golden/primitives.txt")).expect("golden vectors");
    text.lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let (lhs, rhs) = line.split_once(" → ").expect("arrow");
            // Empty hex arguments leave double spaces, so split on single spaces.
            let parts: Vec<&str> = lhs.split(' ').collect();
            let offset = parts[0].trim_start_matches('@').parse().unwrap();
            let prim = Prim::parse(parts[1], &parts[2..]);
            let (hex, bits) = rhs.split_once('/').unwrap();
            Golden {
                line: line.to_string(),
                offset,
                prim,
                bytes: from_hex(hex),
                bits: bits.parse().unwrap(),
            }
        })
        .collect()
}

/// Encodes `p` at `offset` into a zeroed buffer with `slack` spare bits and
/// checks the bytes against the oracle, the cursor advance, and the
/// decoded value. `Err` carries a description of the first mismatch.
pub fn check_prim(p: &Prim, offset: usize) -> Result<(), String> {
    let want = p.oracle_bits();
    let cap = (offset + want.len()).div_ceil(8) + 2;
    let mut c = AcnCodec::with_capacity(cap).map_err(|e| e.to_string())?;
    c.stream_mut().set_cursor(offset.into()).unwrap();
    p.encode(&mut c).map_err(|e| format!("{p:?} @{offset}: encode failed: {e}"))?;
    if c.bit_index() != offset + want.len() {
        return Err(format!("{p:?} @{offset}: advanced {} bits, oracle {}", c.bit_index() - offset, want.len()));
    }
    let mut model = vec![false; offset];
    model.extend(&want);
    model.resize(cap * 8, false);
    let model = super::bitlist::pack(&model);
    if c.buf() != model.as_slice() {
        return Err(format!("{p:?} @{offset}: wrote {} expected {}", to_hex(c.buf()), to_hex(&model)));
    }
    let end = c.bit_index();
    c.stream_mut().set_cursor(offset.into()).unwrap();
    let back = p.decode(&mut c).map_err(|e| format!("{p:?} @{offset}: decode failed: {e}"))?;
    if &back != p {
        return Err(format!("{p:?} @{offset}: decoded {back:?}"));
    }
    if c.bit_index() != end {
        return Err(format!("{p:?} @{offset}: decode consumed {} bits, encode {}", c.bit_index() - offset, end - offset));
    }
    Ok(())
}
