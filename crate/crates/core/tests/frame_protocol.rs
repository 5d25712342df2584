mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartbag_core::frame::{checksum, encode_frame, parse_frame, FrameError};
use support::frames::random_frame;

#[test]
fn ten_thousand_frames_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let frame = random_frame(&mut rng);
        let line = encode_frame(&frame).unwrap();
        let back = parse_frame(line.as_bytes()).unwrap_or_else(|e| panic!("{line:?}: {e}"));
        assert_eq!(back, frame.quantized(), "{line:?}");
        // Quantization is idempotent, so a second trip is byte-identical.
        assert_eq!(encode_frame(&back).unwrap(), line);
    }
}

#[test]
fn every_single_bit_flip_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let line = encode_frame(&random_frame(&mut rng)).unwrap().into_bytes();
        for pos in 0..line.len() - 1 {
            for bit in 0..8 {
                let mut bad = line.clone();
                bad[pos] ^= 1 << bit;
                assert!(
                    parse_frame(&bad).is_err(),
                    "flip {pos}:{bit} of {:?}",
                    String::from_utf8_lossy(&line)
                );
            }
        }
    }
}

#[test]
fn payload_flips_fail_the_checksum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let line = encode_frame(&random_frame(&mut rng)).unwrap().into_bytes();
    let star = line.iter().position(|&b| b == b'*').unwrap();
    for pos in 1..star {
        let mut bad = line.clone();
        bad[pos] ^= 1;
        if bad[pos] == b'*' || bad[pos] == b'$' {
            continue;
        }
        assert!(
            matches!(parse_frame(&bad), Err(FrameError::BadChecksum { .. })),
            "pos {pos}"
        );
    }
}

fn mutate(rng: &mut ChaCha8Rng, line: &mut Vec<u8>) {
    const BYTES: &[u8] = b"$*,.-0123456789ABCDEFabcdef\n\r \x00\xff";
    for _ in 0..rng.random_range(1..=4) {
        match rng.random_range(0..5) {
            0 if !line.is_empty() => {
                let i = rng.random_range(0..line.len());
                line[i] = rng.random();
            }
            1 if !line.is_empty() => {
                let i = rng.random_range(0..line.len());
                line.remove(i);
            }
            2 => {
                let i = rng.random_range(0..=line.len());
                line.insert(i, BYTES[rng.random_range(0..BYTES.len())]);
            }
            3 if !line.is_empty() => {
                let i = rng.random_range(0..line.len());
                line.truncate(i);
            }
            _ => {
                let n = rng.random_range(0..40);
                line.extend((0..n).map(|_| BYTES[rng.random_range(0..BYTES.len())]));
            }
        }
    }
}

/// Rewrites the checksum so mutations reach the field parser.
fn reseal(line: &[u8]) -> Vec<u8> {
    let body = line.strip_prefix(b"$").unwrap_or(line);
    let body = body.strip_suffix(b"\n").unwrap_or(body);
    let payload = match body.iter().rposition(|&b| b == b'*') {
        Some(i) => &body[..i],
        None => body,
    };
    let mut out = b"$".to_vec();
    out.extend_from_slice(payload);
    out.push(b'*');
    out.extend_from_slice(checksum(payload).as_bytes());
    out.push(b'\n');
    out
}

#[test]
fn fuzz_corpus_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut accepted = 0;
    for i in 0..10_000 {
        let mut line = encode_frame(&random_frame(&mut rng)).unwrap().into_bytes();
        mutate(&mut rng, &mut line);
        if i % 2 == 0 {
            line = reseal(&line);
        }
        if let Ok(frame) = parse_frame(&line) {
            // Whatever is accepted must itself be a valid frame.
            frame.validate().unwrap();
            accepted += 1;
        }
    }
    assert!(accepted < 10_000);
}

#[test]
fn resealed_field_damage_reports_field_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let line = encode_frame(&random_frame(&mut rng)).unwrap();
    let payload = &line[1..line.len() - 4];
    let mut fields: Vec<String> = payload.split(',').map(str::to_string).collect();

    fields[9] = "1e3".into();
    let bad = reseal(fields.join(",").as_bytes());
    assert_eq!(
        parse_frame(&bad).unwrap_err().code(),
        FrameError::BadNumber { field: "ax" }.code()
    );

    fields.pop();
    let bad = reseal(fields.join(",").as_bytes());
    assert!(matches!(
        parse_frame(&bad),
        Err(FrameError::BadFieldCount { found: 22 })
    ));
}
