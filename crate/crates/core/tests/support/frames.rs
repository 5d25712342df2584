//! Random frame generator shared by protocol tests.

#![allow(dead_code)]

use rand::Rng;
use smartbag_core::frame::{Gps, Imu, SensorFrame};

/// Real value spanning many magnitudes, both signs and exact zero.
fn real<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    match rng.random_range(0..6) {
        0 => 0.0,
        1 => rng.random_range(lo..=hi).round(),
        2 => {
            let scale = 10f64.powi(rng.random_range(-9..6));
            (rng.random_range(lo..=hi) * scale).clamp(lo, hi)
        }
        _ => rng.random_range(lo..=hi),
    }
}

fn device_id<R: Rng>(rng: &mut R) -> String {
    const ALNUM: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    let len = rng.random_range(1..=16);
    (0..len)
        .map(|_| ALNUM[rng.random_range(0..ALNUM.len())] as char)
        .collect()
}

pub fn random_frame<R: Rng>(rng: &mut R) -> SensorFrame {
    SensorFrame {
        device_id: device_id(rng),
        seq: rng.random(),
        ts: if rng.random_bool(0.1) {
            rng.random()
        } else {
            rng.random_range(0..4_102_444_800_000)
        },
        gps: Gps {
            lat: real(rng, -90.0, 90.0),
            lon: real(rng, -180.0, 180.0),
            alt: real(rng, -500.0, 9000.0),
            speed: real(rng, 0.0, 60.0),
            heading: real(rng, 0.0, 360.0),
        },
        imu: Imu {
            ax: real(rng, -16.0, 16.0),
            ay: real(rng, -16.0, 16.0),
            az: real(rng, -16.0, 16.0),
            yaw: real(rng, -180.0, 180.0),
            pitch: real(rng, -90.0, 90.0),
            roll: real(rng, -180.0, 180.0),
        },
        load_left: real(rng, 0.0, 500.0),
        load_right: real(rng, 0.0, 500.0),
        mq2: real(rng, 0.0, 10_000.0),
        mq135: real(rng, 0.0, 10_000.0),
        temp: real(rng, -40.0, 85.0),
        humidity: real(rng, 0.0, 100.0),
        water: rng.random_bool(0.5),
        sos: rng.random_bool(0.5),
    }
}
