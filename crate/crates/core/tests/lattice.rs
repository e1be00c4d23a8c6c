use fsep_core::lattice::{
    decompose_regions, delta, height_profile, member_left_right, membership, ConfigRef, ExclusionConfig,
    MembershipClass, ParitySequence, RegionKind, StackConfig,
};
use fsep_core::substitution::{parse_phi, phi_stack};
use fsep_core::Error;
use proptest::prelude::*;

fn all_rings(m: usize) -> impl Iterator<Item = ExclusionConfig> {
    (0u64..1 << m).map(move |code| ExclusionConfig::from_bits((0..m).map(|i| code >> i & 1 == 1)).unwrap())
}

/// Whether the cyclic word starting at site `start` splits into `words`.
fn splits_from(x: &ExclusionConfig, start: usize, words: &[&str]) -> bool {
    let m = x.len();
    let bits: Vec<bool> = (0..m).map(|i| x.get(start + i)).collect();
    let mut ok = vec![false; m + 1];
    ok[m] = true;
    for p in (0..m).rev() {
        ok[p] = words.iter().any(|w| {
            let w: Vec<bool> = w.bytes().map(|b| b == b'1').collect();
            p + w.len() <= m && ok[p + w.len()] && bits[p..p + w.len()] == w[..]
        });
    }
    ok[0]
}

fn brute_left_right(x: &ExclusionConfig) -> (bool, bool) {
    let m = x.len();
    let left = (0..m).any(|s| splits_from(x, s, &["1100", "10"]));
    let right = (0..m).any(|s| splits_from(x, s, &["0011", "01"]));
    (left, right)
}

#[test]
fn left_right_membership_matches_word_parse() {
    for m in 3..=14 {
        for x in all_rings(m) {
            let (l, r) = brute_left_right(&x);
            let got = member_left_right(&x);
            assert_eq!((got.is_left(), got.is_right()), (l, r), "{x}");
        }
    }
}

#[test]
fn regions_tile_the_ring() {
    let mut classified = 0;
    for m in (4..=16).step_by(2) {
        for x in all_rings(m).filter(|x| 2 * x.particles() == x.len()) {
            let d = match decompose_regions(&x) {
                Ok(d) => d,
                Err(Error::SpreadTooLarge(s)) => {
                    assert!(s > 2);
                    assert_eq!(delta(&x).unwrap(), s);
                    continue;
                }
                Err(e) => panic!("{x}: {e}"),
            };
            classified += 1;
            assert_eq!(d.total_len(), m, "{x}");
            let mut pos = d.regions[0].start;
            for r in &d.regions {
                assert_eq!(r.start, pos % m, "{x}");
                let word: String = (0..r.len).map(|j| if x.get(r.start + j) { '1' } else { '0' }).collect();
                match r.kind {
                    RegionKind::L => assert_eq!(word, "10".repeat(r.len / 2), "{x}"),
                    RegionKind::R => assert_eq!(word, "01".repeat(r.len / 2), "{x}"),
                    RegionKind::T => {
                        let first = &word[..2];
                        assert!(first == "00" || first == "11", "{x}");
                        for (j, c) in word.chars().enumerate() {
                            let same_pair = (j / 2) % 2 == 0;
                            assert_eq!(c == first.chars().next().unwrap(), same_pair, "{x}");
                        }
                    }
                }
                pos += r.len;
            }
        }
    }
    assert!(classified > 1000);
}

#[test]
fn h_is_the_image_of_xstar() {
    for m in 3..=14 {
        for x in all_rings(m).filter(|x| x.len() - x.particles() >= 3) {
            let (n, offset) = parse_phi(&x).unwrap();
            assert_eq!(phi_stack(&n).unwrap().rotate(offset as isize), x);
            assert_eq!(x.in_h(), n.in_xstar(), "{x} parses to {n}");
        }
    }
}

#[test]
fn membership_dispatch() {
    let x = ExclusionConfig::from_bit_str("10100100").unwrap();
    let n: StackConfig = "ring:4:2,3,0,3".parse().unwrap();
    assert!(membership(ConfigRef::Exclusion(&x), &MembershipClass::Frozen).unwrap());
    assert!(membership(ConfigRef::Stack(&n), &MembershipClass::Xstar).unwrap());
    let sigma = ParitySequence::from_bit_str("0101").unwrap();
    assert!(membership(ConfigRef::Stack(&n), &MembershipClass::XstarSigma(sigma)).unwrap());
    let short = ParitySequence::from_bit_str("010").unwrap();
    assert!(matches!(
        membership(ConfigRef::Stack(&n), &MembershipClass::XstarSigma(short)),
        Err(Error::LengthMismatch { .. })
    ));
    assert!(matches!(
        membership(ConfigRef::Exclusion(&x), &MembershipClass::Xstar),
        Err(Error::ClassMismatch { .. })
    ));
    assert!(matches!(
        membership(ConfigRef::Stack(&n), &MembershipClass::H),
        Err(Error::ClassMismatch { .. })
    ));
}

#[test]
fn text_formats_round_trip() {
    let x: ExclusionConfig = "ring:10:0110010001".parse().unwrap();
    assert_eq!(x.to_string().parse::<ExclusionConfig>().unwrap(), x);
    assert!("ring:9:0110010001".parse::<ExclusionConfig>().is_err());
    assert!("ring:3:01x".parse::<ExclusionConfig>().is_err());
    let n: StackConfig = "ring:5:0,4,2,0,12".parse().unwrap();
    assert_eq!(n.heights(), [0, 4, 2, 0, 12]);
    assert_eq!(n.to_string().parse::<StackConfig>().unwrap(), n);
    assert!(matches!(StackConfig::new(vec![1, 2]), Err(Error::RingTooShort(2))));
}

fn ring() -> impl Strategy<Value = ExclusionConfig> {
    prop::collection::vec(any::<bool>(), 3..300).prop_map(|b| ExclusionConfig::from_bits(b).unwrap())
}

proptest! {
    #[test]
    fn views_wrap_around(x in ring()) {
        let m = x.len();
        let prev = x.prev_view();
        let next = x.next_view();
        for i in 0..m {
            prop_assert_eq!(prev[i / 64] >> (i % 64) & 1 == 1, x.get(i + m - 1));
            prop_assert_eq!(next[i / 64] >> (i % 64) & 1 == 1, x.get(i + 1));
        }
    }

    #[test]
    fn rotations_compose(x in ring(), a in -400isize..400, b in -400isize..400) {
        prop_assert_eq!(x.rotate(a).rotate(b), x.rotate(a + b));
        prop_assert_eq!(x.rotate(x.len() as isize), x.clone());
        for i in 0..x.len() {
            prop_assert_eq!(x.rotate(a).get(i), x.get((i as isize - a).rem_euclid(x.len() as isize) as usize));
        }
    }

    #[test]
    fn height_profile_round_trip(x in ring(), anchor in 0usize..1000) {
        let p = height_profile(&x, anchor % x.len());
        prop_assert_eq!(p.values.len(), x.len() + 1);
        let last = *p.values.last().unwrap();
        prop_assert_eq!(last, x.len() as i64 - 2 * x.particles() as i64);
        prop_assert_eq!(p.to_config().unwrap(), x);
    }

    #[test]
    fn pattern_counts_match_direct_scan(x in ring(), pat in prop::collection::vec(any::<bool>(), 1..6)) {
        let m = x.len();
        let direct = (0..m).filter(|&i| pat.iter().enumerate().all(|(j, &b)| x.get(i + j) == b)).count();
        prop_assert_eq!(x.count_pattern(&pat), direct);
    }

    #[test]
    fn stack_rotation_and_parity(h in prop::collection::vec(0u32..9, 3..40), k in -50isize..50) {
        let n = StackConfig::new(h).unwrap();
        let r = n.rotate(k);
        prop_assert_eq!(r.total(), n.total());
        prop_assert_eq!(r.parity_map(), n.parity_map().rotate(k));
        let even = StackConfig::new(n.heights().iter().map(|h| h & !1).collect()).unwrap();
        prop_assert_eq!(even.add_parity(&n.parity_map()).unwrap(), n);
    }
}
