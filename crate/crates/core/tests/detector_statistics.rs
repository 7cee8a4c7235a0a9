use cpi_core::frame::unpack_bits;
use cpi_core::{detect_binary, detect_ideal, DetectorParams, Frame, Payload, SensorTag};
use proptest::prelude::*;

fn params() -> DetectorParams {
    DetectorParams {
        pdp: 0.5,
        gate_ns: 10.0,
        exposure_ns: 100.0,
        dark_count_rate: 0.0,
        seed: 42,
    }
}

fn constant(width: usize, height: usize, v: f32) -> Frame {
    Frame::analog(width, height, 0, SensorTag::A, vec![v; width * height]).unwrap()
}

fn ones(f: &Frame) -> usize {
    unpack_bits(
        f.width(),
        f.height(),
        match f.payload() {
            Payload::Binary(p) => p,
            Payload::Analog(_) => panic!("expected binary"),
        },
    )
    .iter()
    .filter(|&&b| b == 1)
    .count()
}

#[test]
fn firing_rate_matches_poisson_thinning() {
    let p = params();
    for lambda in [0.1, 0.5, 2.0] {
        // lambda = pdp * I * gate / exposure
        let intensity = lambda / (p.pdp * p.gate_ns / p.exposure_ns);
        let frame = constant(1000, 100, intensity as f32);
        let mut fired = 0usize;
        let mut draws = 0usize;
        for k in 0..10 {
            let out = detect_binary(&frame, &p, k).unwrap();
            fired += ones(&out);
            draws += out.pixels();
        }
        assert_eq!(draws, 1_000_000);
        let q = 1.0 - (-lambda).exp();
        let rate = fired as f64 / draws as f64;
        let se = (q * (1.0 - q) / draws as f64).sqrt();
        assert!(
            (rate - q).abs() <= 3.0 * se,
            "lambda {lambda}: rate {rate}, expected {q} +- {se}"
        );
    }
}

#[test]
fn dark_counts_alone_fire_at_their_rate() {
    let p = DetectorParams {
        dark_count_rate: 5e7,
        ..params()
    };
    let lambda: f64 = 5e7 * 10.0 * 1e-9;
    let out = detect_binary(&constant(1000, 200, 0.0), &p, 0).unwrap();
    let q = 1.0 - (-lambda).exp();
    let rate = ones(&out) as f64 / 200_000.0;
    assert!((rate - q).abs() <= 3.0 * (q * (1.0 - q) / 200_000.0).sqrt());
}

#[test]
fn darkness_without_dark_counts_is_exactly_zero() {
    let out = detect_binary(&constant(37, 5, 0.0), &params(), 9).unwrap();
    assert_eq!(ones(&out), 0);
    match out.payload() {
        Payload::Binary(p) => assert!(p.iter().all(|&b| b == 0)),
        Payload::Analog(_) => unreachable!(),
    }
}

#[test]
fn bright_pixels_saturate() {
    let out = detect_binary(&constant(64, 64, 1e4), &params(), 1).unwrap();
    assert_eq!(ones(&out), 64 * 64);
}

#[test]
fn detection_is_deterministic_per_frame_index() {
    let f = constant(50, 20, 3.0);
    let a = detect_binary(&f, &params(), 4).unwrap();
    assert_eq!(a, detect_binary(&f, &params(), 4).unwrap());
    assert_ne!(a, detect_binary(&f, &params(), 5).unwrap());
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(Frame::analog(2, 1, 0, SensorTag::A, vec![1.0, -1.0]).is_err());
    let bin = detect_binary(&constant(4, 4, 1.0), &params(), 0).unwrap();
    assert!(detect_binary(&bin, &params(), 0).is_err());
    let bad = DetectorParams {
        pdp: 1.5,
        ..params()
    };
    assert!(detect_binary(&constant(4, 4, 1.0), &bad, 0).is_err());
    let bad = DetectorParams {
        gate_ns: 200.0,
        ..params()
    };
    assert!(detect_binary(&constant(4, 4, 1.0), &bad, 0).is_err());
}

#[test]
fn ideal_detection_is_the_identity() {
    let f = Frame::analog(3, 2, 1, SensorTag::B, vec![0.0, 1.0, 2.5, 3.0, 0.5, 9.0]).unwrap();
    assert_eq!(detect_ideal(&f), f);
    assert_eq!(detect_ideal(&detect_ideal(&f)), detect_ideal(&f));
    let z = constant(4, 4, 0.0);
    assert_eq!(detect_ideal(&z), z);
}

proptest! {
    #[test]
    fn higher_efficiency_never_lowers_firing_probability(
        i in 0.0f64..1e3, pdp in 0.0f64..1.0, extra in 0.0f64..1.0, dcr in 0.0f64..1e6,
    ) {
        let lo = DetectorParams { pdp, dark_count_rate: dcr, ..params() };
        let hi = DetectorParams { pdp: (pdp + extra).min(1.0), ..lo };
        prop_assert!(hi.fire_probability(i) >= lo.fire_probability(i));
    }

    #[test]
    fn binary_output_has_zero_padding(w in 1usize..40, h in 1usize..6, v in 0.0f32..50.0, k in 0u64..100) {
        let out = detect_binary(&constant(w, h, v), &params(), k).unwrap();
        let Payload::Binary(p) = out.payload() else { unreachable!() };
        let rb = w.div_ceil(8);
        prop_assert_eq!(p.len(), rb * h);
        if w % 8 != 0 {
            for row in p.chunks(rb) {
                prop_assert_eq!(row[rb - 1] >> (w % 8), 0);
            }
        }
    }
}
