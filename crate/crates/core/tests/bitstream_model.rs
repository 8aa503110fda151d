//! Differential tests of `BitStream` against the bit-list model.

mod common;

use acnkit::bitstream::{bit_ranges_equal, invariant, padding_bits, BitStream};
use common::bitlist::{run_differential, BitList, Op};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ops_from_seed(seed: u64, cap_bytes: usize, len: usize) -> Vec<Op> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| Op::random(&mut rng, cap_bytes * 8)).collect()
}

proptest! {
    #[test]
    fn stream_matches_model(seed in any::<u64>(), cap in 0usize..40, len in 0usize..200) {
        let ops = ops_from_seed(seed, cap, len);
        if let Err(e) = run_differential(cap, &ops) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn lsb_msb_roundtrip(v in any::<u64>(), n in 0u32..=64, off in 0usize..32) {
        let v = if n == 64 { v } else { v & ((1u64 << n) - 1) };
        let mut s = BitStream::new(16).unwrap();
        s.set_cursor(off.into()).unwrap();
        s.append_lsb_bits_msb_first(v, n).unwrap();
        prop_assert_eq!(s.bit_index(), off + n as usize);
        s.set_cursor(off.into()).unwrap();
        prop_assert_eq!(s.read_n_lsb_bits_msb_first(n).unwrap(), v);
    }

    #[test]
    fn align_pads_to_absolute_position(off in 0usize..200, k in prop::sample::select(vec![1usize, 8, 16, 32, 64])) {
        let mut s = BitStream::new(64).unwrap();
        s.set_cursor(off.into()).unwrap();
        let pad = s.align_to(k).unwrap();
        prop_assert_eq!(pad, padding_bits(off, k));
        prop_assert_eq!(s.bit_index() % k, 0);
        prop_assert!(pad < k.max(1));
    }

    #[test]
    fn prefix_after_more_writes(bytes in prop::collection::vec(any::<u8>(), 0..8), extra in 0usize..40) {
        let mut s = BitStream::new(16).unwrap();
        s.append_byte_array(&bytes).unwrap();
        let before = s.clone();
        s.append_n_one_bits(extra).unwrap();
        prop_assert!(before.is_prefix_of(&s).unwrap());
        prop_assert_eq!(s.is_prefix_of(&before).unwrap(), extra == 0);
    }
}

#[test]
fn invariant_edges() {
    assert!(invariant(0, 0, 0));
    assert!(!invariant(1, 0, 0));
    assert!(invariant(7, 3, 4));
    assert!(invariant(0, 4, 4));
    assert!(!invariant(1, 4, 4));
    assert!(!invariant(8, 0, 4));
}

#[test]
fn failed_ops_leave_stream_untouched() {
    let mut s = BitStream::new(2).unwrap();
    s.append_lsb_bits_msb_first(0x1ff, 9).unwrap();
    let snapshot = s.clone();
    assert!(s.append_lsb_bits_msb_first(0xff, 8).is_err());
    assert!(s.append_byte_array(&[1]).is_err());
    assert!(s.align_to(64).is_err());
    assert!(s.read_byte().is_err());
    assert_eq!(s, snapshot);
}

#[test]
fn full_buffer_cursor_rests_past_the_end() {
    let mut s = BitStream::new(1).unwrap();
    s.append_byte(0xa5).unwrap();
    assert_eq!((s.current_byte(), s.current_bit()), (1, 0));
    assert!(s.invariant_holds());
    assert!(s.append_bit(true).is_err());
}

#[test]
fn read_bits_zero_pads() {
    let mut s = BitStream::from_bytes(vec![0xff, 0xff]).unwrap();
    assert_eq!(s.read_bits(11).unwrap(), vec![0xff, 0xe0]);
}

#[test]
fn bit_ranges() {
    assert!(bit_ranges_equal(&[0xf0], &[0xf7], 0, 5).unwrap());
    assert!(!bit_ranges_equal(&[0xf0], &[0xf7], 0, 6).unwrap());
    assert!(bit_ranges_equal(&[0, 1, 2], &[0, 1, 3], 3, 23).unwrap());
    assert!(bit_ranges_equal(&[0], &[0], 0, 9).is_err());
}

#[test]
fn model_and_stream_agree_on_a_known_sequence() {
    let ops = vec![
        Op::AppendBit(true),
        Op::AppendLsbBitsMsbFirst(0b101, 3),
        Op::AlignTo(8),
        Op::AppendByte(0x3c),
        Op::SetCursor(0),
        Op::ReadBits(12),
    ];
    run_differential(4, &ops).unwrap();
    let mut m = BitList::new(4);
    for op in &ops {
        op.apply_model(&mut m);
    }
    assert_eq!(m.to_bytes(), vec![0xd0, 0x3c, 0, 0]);
}
