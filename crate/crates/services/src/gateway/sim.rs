//! Simulated bag: emits frames whose sensor channels follow the synthetic
//! class profiles, with a GPS random walk and scripted SOS presses.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartbag_core::dataset::{default_profiles, ClassProfile, WATER_INDEX};
use smartbag_core::frame::{Gps, Imu, SensorFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub device_id: String,
    pub seed: u64,
    /// Device clock at the first frame (Unix ms).
    pub start_ts: u64,
    pub interval_ms: u64,
    /// Class index per block of `block_len` frames, cycled.
    pub schedule: Vec<usize>,
    pub block_len: u32,
    /// Frames (by seq) on which the SOS button is pressed.
    pub sos_seqs: BTreeSet<u32>,
    /// Also press SOS at random with each profile's SOS probability.
    pub random_sos: bool,
    pub origin: (f64, f64),
}

impl SimConfig {
    pub fn new(device_id: impl Into<String>) -> Self {
        Self {
            device_id: device_id.into(),
            seed: 42,
            start_ts: 1_700_000_000_000,
            interval_ms: 1000,
            schedule: vec![0, 1, 2, 1, 3, 0, 4],
            block_len: 10,
            sos_seqs: BTreeSet::new(),
            random_sos: false,
            origin: (12.9716, 77.5946),
        }
    }
}

pub struct Simulator {
    config: SimConfig,
    profiles: Vec<ClassProfile>,
    rng: ChaCha8Rng,
    seq: u32,
    lat: f64,
    lon: f64,
    heading: f64,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Self {
        Self::with_profiles(config, default_profiles())
    }

    pub fn with_profiles(config: SimConfig, profiles: Vec<ClassProfile>) -> Self {
        assert!(
            !config.schedule.is_empty(),
            "schedule needs at least one class"
        );
        assert!(
            config.schedule.iter().all(|&c| c < profiles.len()),
            "schedule refers to a missing profile"
        );
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            lat: config.origin.0,
            lon: config.origin.1,
            heading: 0.0,
            seq: 0,
            profiles,
            config,
        }
    }

    /// Class the next frame will be drawn from.
    pub fn current_class(&self) -> usize {
        let block = (self.seq / self.config.block_len.max(1)) as usize;
        self.config.schedule[block % self.config.schedule.len()]
    }

    pub fn next_frame(&mut self) -> SensorFrame {
        let class = self.current_class();
        let profile = &self.profiles[class];
        let x = profile.sample(&mut self.rng);
        let horizontal = x[0].hypot(x[1]);
        let speed = (horizontal * 2.0).max(0.0);
        self.heading = (self.heading + self.rng.random_range(-10.0..10.0)).rem_euclid(360.0);
        let step = speed * self.config.interval_ms as f64 / 1000.0 / 111_000.0;
        self.lat = (self.lat + step * self.heading.to_radians().cos()).clamp(-90.0, 90.0);
        self.lon = (self.lon + step * self.heading.to_radians().sin()).clamp(-180.0, 180.0);
        let sos = self.config.sos_seqs.contains(&self.seq)
            || (self.config.random_sos && self.rng.random_bool(profile.sos_prob));

        let frame = SensorFrame {
            device_id: self.config.device_id.clone(),
            seq: self.seq,
            ts: self.config.start_ts + self.seq as u64 * self.config.interval_ms,
            gps: Gps {
                lat: self.lat,
                lon: self.lon,
                alt: 920.0,
                speed,
                heading: self.heading,
            },
            imu: Imu {
                ax: x[0],
                ay: x[1],
                az: x[2],
                yaw: x[3],
                pitch: x[4],
                roll: x[5],
            },
            load_left: x[6],
            load_right: x[7],
            mq2: x[8].max(0.0),
            mq135: x[9].max(0.0),
            temp: x[10],
            humidity: x[11].clamp(0.0, 100.0),
            water: x[WATER_INDEX] > 0.5,
            sos,
        };
        self.seq = self.seq.wrapping_add(1);
        frame.quantized()
    }
}

impl Iterator for Simulator {
    type Item = SensorFrame;

    fn next(&mut self) -> Option<SensorFrame> {
        Some(self.next_frame())
    }
}
