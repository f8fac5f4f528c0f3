use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wigest_core::csi::{ComplexSample, CsiStream};
use wigest_core::error::CsiError;
use wigest_core::io::{decode, encode, read_csi_file, record_len, write_csi_file, HEADER_LEN};

fn random_stream(rng: &mut ChaCha8Rng, n: usize, na: usize, ns: usize) -> CsiStream {
    let samples = (0..n * na * ns)
        .map(|_| ComplexSample::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
        .collect();
    let mut t = 0.0;
    let ts = (0..n)
        .map(|_| {
            t += rng.random_range(0.0005..0.002);
            t
        })
        .collect();
    CsiStream::new(rng.random(), 1000.0, na, ns, ts, samples).unwrap()
}

#[test]
fn thousand_packet_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = random_stream(&mut rng, 1000, 3, 30);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rx.csi");
    write_csi_file(&s, &path).unwrap();
    let back = read_csi_file(&path).unwrap();
    assert_eq!(back, s);
    let a: Vec<u32> = s
        .samples()
        .iter()
        .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
        .collect();
    let b: Vec<u32> = back
        .samples()
        .iter()
        .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
        .collect();
    assert_eq!(a, b);
    assert_eq!(std::fs::read(&path).unwrap(), encode(&back));
}

#[test]
fn intel5300_shape_parses() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_stream(&mut rng, 20, 3, 30);
    let back = decode(&encode(&s)).unwrap();
    assert_eq!(back.n_antennas(), 3);
    assert_eq!(back.n_subcarriers(), 30);
}

#[test]
fn truncation_reports_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_stream(&mut rng, 10, 2, 4);
    let bytes = encode(&s);
    let full = (HEADER_LEN + 10 * record_len(2, 4)) as u64;
    let cut = HEADER_LEN + 3 * record_len(2, 4) + 17;
    match decode(&bytes[..cut]) {
        Err(CsiError::Truncated { offset, expected }) => {
            assert_eq!(offset, cut as u64);
            assert_eq!(expected, full);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn nan_stream_cannot_be_written() {
    let mut samples = vec![ComplexSample::new(0.5, 0.5); 8];
    samples[5].im = f32::NAN;
    assert!(matches!(
        CsiStream::uniform(0, 1000.0, 2, 2, samples),
        Err(CsiError::NonFiniteSample { .. })
    ));
}

#[test]
fn missing_file_error_names_path() {
    let err = read_csi_file("/nonexistent/rx9.csi").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/rx9.csi"));
}

fn assert_invariants(s: &CsiStream) {
    assert!(s.n_antennas() >= 2);
    assert!(s.n_subcarriers() >= 1);
    assert!(s.sample_rate_hz() > 0.0 && s.sample_rate_hz().is_finite());
    assert_eq!(s.samples().len(), s.n_packets() * s.n_antennas() * s.n_subcarriers());
    assert!(s.timestamps().windows(2).all(|w| w[0] < w[1]));
    assert!(s.samples().iter().all(|c| c.re.is_finite() && c.im.is_finite()));
}

proptest! {
    #[test]
    fn encode_decode_identity(seed in any::<u64>(), n in 0usize..40, na in 2usize..4, ns in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_stream(&mut rng, n, na, ns);
        let bytes = encode(&s);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn accepted_mutants_satisfy_invariants(seed in any::<u64>(), flips in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_stream(&mut rng, 6, 2, 3);
        let mut bytes = encode(&s);
        for (pos, val) in flips {
            let i = pos % bytes.len();
            bytes[i] = val;
        }
        if let Ok(parsed) = decode(&bytes) {
            assert_invariants(&parsed);
        }
    }
}
