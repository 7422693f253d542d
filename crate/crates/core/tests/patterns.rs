mod common;

use std::collections::BTreeMap;

use ehmi::pattern::{eval, parse, Frame, PatternLibrary, Rgb, PIXELS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frame_bytes(f: &Frame) -> [[u8; 3]; PIXELS] {
    f.pixels().map(|p| [p.r, p.g, p.b])
}

fn library() -> PatternLibrary {
    PatternLibrary::load_dir(&common::scenes_dir().join("patterns")).unwrap()
}

fn golden() -> Vec<(String, u64, Frame)> {
    let text = include_str!("fixtures/golden_frames.txt");
    text.lines()
        .map(|l| {
            let mut it = l.splitn(3, ' ');
            let id = it.next().unwrap().to_owned();
            let t = it.next().unwrap().parse().unwrap();
            let frame: Frame = it.next().unwrap().parse().unwrap();
            (id, t, frame)
        })
        .collect()
}

#[test]
fn golden_frames_match_engine_and_oracle() {
    let lib = library();
    let cases = golden();
    let patterns: std::collections::BTreeSet<_> = cases.iter().map(|c| c.0.as_str()).collect();
    assert!(patterns.len() >= 5, "{patterns:?}");
    for id in &patterns {
        assert!(cases.iter().filter(|c| c.0 == *id).count() >= 8);
    }
    for (id, t, want) in &cases {
        let p = lib.get(id).unwrap_or_else(|| panic!("no pattern {id}"));
        let got = eval(p, *t, &BTreeMap::new(), 1.0).unwrap();
        assert_eq!(got.to_bytes(), want.to_bytes(), "{id} @ {t}");
        assert_eq!(common::programs::oracle(p, *t, &BTreeMap::new(), 1.0), frame_bytes(want), "oracle {id} @ {t}");
    }
}

#[test]
fn hand_computed_examples() {
    let solid = parse(r#"pattern "solid" { param color c = #FF0000 duration 1000ms layer solid(c) }"#).unwrap();
    let none = BTreeMap::new();
    assert_eq!(eval(&solid, 0, &none, 1.0).unwrap(), Frame::filled(Rgb::new(255, 0, 0)));
    // 255 * 0.5 = 127.5 rounds to 128
    assert_eq!(eval(&solid, 0, &none, 0.5).unwrap(), Frame::filled(Rgb::new(0x80, 0, 0)));
    let blink = parse(r#"pattern "b" { param color c = #FF0000 duration 1000ms layer blink(c, 1000ms, 0.5) }"#).unwrap();
    assert!(eval(&blink, 750, &none, 1.0).unwrap().is_black());
    assert!(!eval(&blink, 499, &none, 1.0).unwrap().is_black());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn periodic_monotone_and_dark_at_zero(seed in any::<u64>(), t in 0u64..1_000_000, k in 1u64..50, b1 in 0.0f64..=1.0, b2 in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = common::programs::random_source(&mut rng);
        let p = parse(&src).unwrap();
        let none = BTreeMap::new();
        let f = eval(&p, t, &none, 1.0).unwrap();
        prop_assert_eq!(f, eval(&p, t + k * p.duration_ms, &none, 1.0).unwrap());
        prop_assert!(eval(&p, t, &none, 0.0).unwrap().is_black());
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let fl = eval(&p, t, &none, lo).unwrap().to_bytes();
        let fh = eval(&p, t, &none, hi).unwrap().to_bytes();
        prop_assert!(fl.iter().zip(fh.iter()).all(|(a, b)| a <= b));
        prop_assert_eq!(frame_bytes(&eval(&p, t, &none, hi).unwrap()), common::programs::oracle(&p, t, &none, hi));
    }

    #[test]
    fn printed_form_reparses_identically(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = parse(&common::programs::random_source(&mut rng)).unwrap();
        let again = parse(&p.to_string()).unwrap();
        prop_assert_eq!(p, again);
    }
}

#[test]
fn eval_is_byte_stable() {
    let lib = library();
    for p in lib.iter() {
        for t in (0..4000).step_by(37) {
            let a = eval(p, t, &BTreeMap::new(), 0.7).unwrap();
            let b = eval(p, t, &BTreeMap::new(), 0.7).unwrap();
            assert_eq!(a.to_bytes(), b.to_bytes());
        }
    }
}
