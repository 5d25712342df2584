//! Line-oriented ASCII frames on the bag's serial link.
//!
//! ```text
//! $BAG,<device_id>,<seq>,<ts>,<lat>,<lon>,<alt>,<speed>,<heading>,<ax>,<ay>,<az>,
//!     <yaw>,<pitch>,<roll>,<load_left>,<load_right>,<mq2>,<mq135>,<temp>,<humidity>,
//!     <water>,<sos>*<CK>\n
//! ```
//!
//! `CK` is the XOR of every byte between `$` and `*`, as two uppercase hex
//! digits. Reals are rounded to 6 significant digits and printed in the
//! shortest decimal form that parses back to the same value.

use std::fmt;

use thiserror::Error;

use crate::dataset::FEATURE_COUNT;

pub const FRAME_TAG: &str = "BAG";
pub const MAX_DEVICE_ID_LEN: usize = 16;

/// Payload field names in wire order (the tag counts as a field).
pub const FIELD_NAMES: [&str; 23] = [
    "tag",
    "device_id",
    "seq",
    "ts",
    "lat",
    "lon",
    "alt",
    "speed",
    "heading",
    "ax",
    "ay",
    "az",
    "yaw",
    "pitch",
    "roll",
    "load_left",
    "load_right",
    "mq2",
    "mq135",
    "temp",
    "humidity",
    "water",
    "sos",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("line does not start with `$BAG`")]
    BadStart,
    #[error("missing or malformed `*CK` trailer")]
    BadFraming,
    #[error("checksum mismatch: line says {found:02X}, payload gives {expected:02X}")]
    BadChecksum { expected: u8, found: u8 },
    #[error("expected 23 payload fields, found {found}")]
    BadFieldCount { found: usize },
    #[error("field `{field}` is not a valid number")]
    BadNumber { field: &'static str },
    #[error("field `{field}` is out of range")]
    RangeViolation { field: &'static str },
    #[error("device id must be 1-16 ASCII alphanumerics")]
    BadDeviceId,
}

impl FrameError {
    /// Stable identifier for logs and counters.
    pub fn code(&self) -> &'static str {
        match self {
            FrameError::BadStart => "BAD_START",
            FrameError::BadFraming => "BAD_FRAMING",
            FrameError::BadChecksum { .. } => "BAD_CHECKSUM",
            FrameError::BadFieldCount { .. } => "BAD_FIELD_COUNT",
            FrameError::BadNumber { .. } => "BAD_NUMBER",
            FrameError::RangeViolation { .. } => "RANGE_VIOLATION",
            FrameError::BadDeviceId => "BAD_DEVICE_ID",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gps {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Imu {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// One reading of every bag channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorFrame {
    pub device_id: String,
    pub seq: u32,
    /// Unix epoch milliseconds on the device clock.
    pub ts: u64,
    pub gps: Gps,
    pub imu: Imu,
    pub load_left: f64,
    pub load_right: f64,
    pub mq2: f64,
    pub mq135: f64,
    pub temp: f64,
    pub humidity: f64,
    pub water: bool,
    pub sos: bool,
}

impl SensorFrame {
    /// The classifier's 13-feature vector in canonical order.
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        [
            self.imu.ax,
            self.imu.ay,
            self.imu.az,
            self.imu.yaw,
            self.imu.pitch,
            self.imu.roll,
            self.load_left,
            self.load_right,
            self.mq2,
            self.mq135,
            self.temp,
            self.humidity,
            if self.water { 1.0 } else { 0.0 },
        ]
    }

    fn reals(&self) -> [(&'static str, f64); 17] {
        [
            ("lat", self.gps.lat),
            ("lon", self.gps.lon),
            ("alt", self.gps.alt),
            ("speed", self.gps.speed),
            ("heading", self.gps.heading),
            ("ax", self.imu.ax),
            ("ay", self.imu.ay),
            ("az", self.imu.az),
            ("yaw", self.imu.yaw),
            ("pitch", self.imu.pitch),
            ("roll", self.imu.roll),
            ("load_left", self.load_left),
            ("load_right", self.load_right),
            ("mq2", self.mq2),
            ("mq135", self.mq135),
            ("temp", self.temp),
            ("humidity", self.humidity),
        ]
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if !valid_device_id(&self.device_id) {
            return Err(FrameError::BadDeviceId);
        }
        for (field, v) in self.reals() {
            if !v.is_finite() {
                return Err(FrameError::RangeViolation { field });
            }
        }
        check_range("lat", self.gps.lat, -90.0, 90.0)?;
        check_range("lon", self.gps.lon, -180.0, 180.0)?;
        check_range("humidity", self.humidity, 0.0, 100.0)
    }

    /// Copy with every real rounded exactly as the encoder prints it, so
    /// `parse_frame(encode_frame(f))` returns `f.quantized()`.
    pub fn quantized(&self) -> Self {
        let q = round_sig6;
        SensorFrame {
            device_id: self.device_id.clone(),
            seq: self.seq,
            ts: self.ts,
            gps: Gps {
                lat: q(self.gps.lat),
                lon: q(self.gps.lon),
                alt: q(self.gps.alt),
                speed: q(self.gps.speed),
                heading: q(self.gps.heading),
            },
            imu: Imu {
                ax: q(self.imu.ax),
                ay: q(self.imu.ay),
                az: q(self.imu.az),
                yaw: q(self.imu.yaw),
                pitch: q(self.imu.pitch),
                roll: q(self.imu.roll),
            },
            load_left: q(self.load_left),
            load_right: q(self.load_right),
            mq2: q(self.mq2),
            mq135: q(self.mq135),
            temp: q(self.temp),
            humidity: q(self.humidity),
            water: self.water,
            sos: self.sos,
        }
    }
}

impl fmt::Display for SensorFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}@{}", self.device_id, self.seq, self.ts)
    }
}

fn valid_device_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= MAX_DEVICE_ID_LEN && id.bytes().all(|b| b.is_ascii_alphanumeric())
}

fn check_range(field: &'static str, v: f64, lo: f64, hi: f64) -> Result<(), FrameError> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(FrameError::RangeViolation { field })
    }
}

/// XOR of all payload bytes.
pub fn checksum_byte(payload: &[u8]) -> u8 {
    payload.iter().fold(0, |acc, b| acc ^ b)
}

/// Checksum rendered as two uppercase hex digits.
pub fn checksum(payload: &[u8]) -> String {
    format!("{:02X}", checksum_byte(payload))
}

/// Rounds to 6 significant digits; zero (of either sign) becomes `+0.0`.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let y: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

fn render_real(x: f64) -> String {
    format!("{}", round_sig6(x))
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Renders a frame as one wire line, including the trailing `\n`.
pub fn encode_frame(frame: &SensorFrame) -> Result<String, FrameError> {
    frame.validate()?;
    let mut payload = format!("{FRAME_TAG},{},{},{}", frame.device_id, frame.seq, frame.ts);
    for (_, v) in frame.reals() {
        payload.push(',');
        payload.push_str(&render_real(v));
    }
    payload.push(',');
    payload.push_str(bit(frame.water));
    payload.push(',');
    payload.push_str(bit(frame.sos));
    let ck = checksum(payload.as_bytes());
    Ok(format!("${payload}*{ck}\n"))
}

fn hex_digit(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

fn is_decimal(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

fn parse_real(field: &'static str, s: &str) -> Result<f64, FrameError> {
    if !is_decimal(s) {
        return Err(FrameError::BadNumber { field });
    }
    let v: f64 = s.parse().map_err(|_| FrameError::BadNumber { field })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FrameError::RangeViolation { field })
    }
}

fn parse_uint<T: std::str::FromStr>(field: &'static str, s: &str) -> Result<T, FrameError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(FrameError::BadNumber { field });
    }
    // All digits but unparsable means overflow.
    s.parse().map_err(|_| FrameError::RangeViolation { field })
}

fn parse_bit(field: &'static str, s: &str) -> Result<bool, FrameError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ if is_decimal(s) => Err(FrameError::RangeViolation { field }),
        _ => Err(FrameError::BadNumber { field }),
    }
}

/// Strictly parses one wire line. A single trailing `\n` is optional; any other
/// deviation from the grammar is an error. Never panics.
pub fn parse_frame(line: &[u8]) -> Result<SensorFrame, FrameError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let body = line.strip_prefix(b"$").ok_or(FrameError::BadStart)?;
    if body.len() < 3 {
        return Err(FrameError::BadFraming);
    }
    let (payload, trailer) = body.split_at(body.len() - 3);
    if trailer[0] != b'*' || payload.contains(&b'*') || payload.contains(&b'$') {
        return Err(FrameError::BadFraming);
    }
    let found = match (hex_digit(trailer[1]), hex_digit(trailer[2])) {
        (Some(h), Some(l)) => (h << 4) | l,
        _ => return Err(FrameError::BadFraming),
    };
    let expected = checksum_byte(payload);
    if expected != found {
        return Err(FrameError::BadChecksum { expected, found });
    }
    let payload = std::str::from_utf8(payload).map_err(|_| FrameError::BadFraming)?;

    let fields: Vec<&str> = payload.split(',').collect();
    if fields[0] != FRAME_TAG {
        return Err(FrameError::BadStart);
    }
    if fields.len() != FIELD_NAMES.len() {
        return Err(FrameError::BadFieldCount {
            found: fields.len(),
        });
    }
    if !valid_device_id(fields[1]) {
        return Err(FrameError::BadDeviceId);
    }
    let real = |i: usize| parse_real(FIELD_NAMES[i], fields[i]);
    let frame = SensorFrame {
        device_id: fields[1].to_string(),
        seq: parse_uint("seq", fields[2])?,
        ts: parse_uint("ts", fields[3])?,
        gps: Gps {
            lat: real(4)?,
            lon: real(5)?,
            alt: real(6)?,
            speed: real(7)?,
            heading: real(8)?,
        },
        imu: Imu {
            ax: real(9)?,
            ay: real(10)?,
            az: real(11)?,
            yaw: real(12)?,
            pitch: real(13)?,
            roll: real(14)?,
        },
        load_left: real(15)?,
        load_right: real(16)?,
        mq2: real(17)?,
        mq135: real(18)?,
        temp: real(19)?,
        humidity: real(20)?,
        water: parse_bit("water", fields[21])?,
        sos: parse_bit("sos", fields[22])?,
    };
    frame.validate()?;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_frame() -> SensorFrame {
        SensorFrame {
            device_id: "BAG1".into(),
            ..SensorFrame::default()
        }
    }

    #[test]
    fn checksum_examples() {
        assert_eq!(checksum(b"A"), "41");
        assert_eq!(checksum(b"AB"), "03");
        assert_eq!(checksum(b""), "00");
    }

    #[test]
    fn zero_frame_encoding() {
        let line = encode_frame(&zero_frame()).unwrap();
        assert_eq!(
            line,
            "$BAG,BAG1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0*01\n"
        );
        assert_eq!(parse_frame(line.as_bytes()).unwrap(), zero_frame());
    }

    #[test]
    fn reals_use_six_significant_digits() {
        assert_eq!(render_real(151.2093), "151.209");
        assert_eq!(render_real(-33.86882), "-33.8688");
        assert_eq!(render_real(0.000123456789), "0.000123457");
        assert_eq!(render_real(1234567.0), "1234570");
        assert_eq!(render_real(-0.0), "0");
        assert_eq!(render_real(1.5), "1.5");
        assert_eq!(render_real(100.0), "100");
    }

    #[test]
    fn altered_checksum_rejected() {
        let line = encode_frame(&zero_frame()).unwrap();
        let bad = line.replace("*01", "*02");
        assert_eq!(
            parse_frame(bad.as_bytes()),
            Err(FrameError::BadChecksum {
                expected: 0x01,
                found: 0x02
            })
        );
        let lower = line.replace("*01", "*0a");
        assert_eq!(parse_frame(lower.as_bytes()), Err(FrameError::BadFraming));
    }

    #[test]
    fn missing_field_is_field_count_error() {
        let payload = "BAG,BAG1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0";
        let line = format!("${payload}*{}\n", checksum(payload.as_bytes()));
        assert_eq!(
            parse_frame(line.as_bytes()),
            Err(FrameError::BadFieldCount { found: 22 })
        );
    }

    fn with_payload(payload: &str) -> Result<SensorFrame, FrameError> {
        parse_frame(format!("${payload}*{}", checksum(payload.as_bytes())).as_bytes())
    }

    #[test]
    fn field_level_errors() {
        let base: Vec<String> =
            "BAG,BAG1,7,1000,12.5,77.25,10,1.2,90,0,0,1,0,0,0,40,40,120,80,27,55,0,1"
                .split(',')
                .map(String::from)
                .collect();
        let edit = |i: usize, v: &str| {
            let mut f = base.clone();
            f[i] = v.to_string();
            with_payload(&f.join(","))
        };
        let ok = with_payload(&base.join(",")).unwrap();
        assert_eq!(ok.seq, 7);
        assert!(ok.sos && !ok.water);

        assert_eq!(
            edit(4, "91"),
            Err(FrameError::RangeViolation { field: "lat" })
        );
        assert_eq!(
            edit(5, "-180.5"),
            Err(FrameError::RangeViolation { field: "lon" })
        );
        assert_eq!(
            edit(20, "100.1"),
            Err(FrameError::RangeViolation { field: "humidity" })
        );
        assert_eq!(
            edit(21, "2"),
            Err(FrameError::RangeViolation { field: "water" })
        );
        assert_eq!(edit(22, "yes"), Err(FrameError::BadNumber { field: "sos" }));
        assert_eq!(edit(9, "1e3"), Err(FrameError::BadNumber { field: "ax" }));
        assert_eq!(edit(9, "+1"), Err(FrameError::BadNumber { field: "ax" }));
        assert_eq!(edit(9, "1."), Err(FrameError::BadNumber { field: "ax" }));
        assert_eq!(edit(9, ""), Err(FrameError::BadNumber { field: "ax" }));
        assert_eq!(edit(2, "-1"), Err(FrameError::BadNumber { field: "seq" }));
        assert_eq!(
            edit(2, "4294967296"),
            Err(FrameError::RangeViolation { field: "seq" })
        );
        assert_eq!(edit(1, "bag-1"), Err(FrameError::BadDeviceId));
        assert_eq!(edit(1, "ABCDEFGHIJKLMNOPQ"), Err(FrameError::BadDeviceId));
        assert_eq!(edit(0, "GPS"), Err(FrameError::BadStart));
    }

    #[test]
    fn framing_errors() {
        assert_eq!(parse_frame(b""), Err(FrameError::BadStart));
        assert_eq!(parse_frame(b"BAG,1*00"), Err(FrameError::BadStart));
        assert_eq!(parse_frame(b"$"), Err(FrameError::BadFraming));
        assert_eq!(parse_frame(b"$BAG,x"), Err(FrameError::BadFraming));
        assert_eq!(parse_frame(b"$BAG*00\r\n"), Err(FrameError::BadFraming));
        assert_eq!(parse_frame(b"$A*41\n\n"), Err(FrameError::BadFraming));
        assert_eq!(
            parse_frame(&[b'$', 0xFF, b'*', b'F', b'F']),
            Err(FrameError::BadFraming)
        );
    }

    #[test]
    fn encode_rejects_invalid_frames() {
        let mut f = zero_frame();
        f.gps.lat = 95.0;
        assert_eq!(
            encode_frame(&f),
            Err(FrameError::RangeViolation { field: "lat" })
        );
        let mut f = zero_frame();
        f.temp = f64::NAN;
        assert_eq!(
            encode_frame(&f),
            Err(FrameError::RangeViolation { field: "temp" })
        );
        let mut f = zero_frame();
        f.device_id.clear();
        assert_eq!(encode_frame(&f), Err(FrameError::BadDeviceId));
    }

    #[test]
    fn features_follow_canonical_order() {
        let mut f = zero_frame();
        f.imu.ax = 1.0;
        f.load_right = 8.0;
        f.humidity = 12.0;
        f.water = true;
        let x = f.features();
        assert_eq!(x[0], 1.0);
        assert_eq!(x[7], 8.0);
        assert_eq!(x[11], 12.0);
        assert_eq!(x[12], 1.0);
    }

    #[test]
    fn error_codes_are_distinct() {
        let all = [
            FrameError::BadStart,
            FrameError::BadFraming,
            FrameError::BadChecksum {
                expected: 0,
                found: 1,
            },
            FrameError::BadFieldCount { found: 0 },
            FrameError::BadNumber { field: "x" },
            FrameError::RangeViolation { field: "x" },
            FrameError::BadDeviceId,
        ];
        let mut codes: Vec<&str> = all.iter().map(FrameError::code).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), all.len());
    }
}
