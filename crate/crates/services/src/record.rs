//! JSON telemetry document pushed by the gateway.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use smartbag_core::frame::{Gps, Imu, SensorFrame};
use smartbag_core::FEATURE_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDoc {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasDoc {
    pub mq2: f64,
    pub mq135: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvDoc {
    pub temp: f64,
    pub hum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpsDoc {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImuDoc {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// One frame as stored, plus the gateway receive time. `activity` is absent
/// until the alert service classifies the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TelemetryRecord {
    pub device_id: String,
    pub seq: u32,
    pub ts: u64,
    pub recv_ts: u64,
    pub gps: GpsDoc,
    pub imu: ImuDoc,
    pub load: LoadDoc,
    pub gas: GasDoc,
    pub env: EnvDoc,
    #[serde(with = "bit")]
    pub water: bool,
    #[serde(with = "bit")]
    pub sos: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
}

mod bit {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(de::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}

/// Lossless mapping from a frame to its telemetry document.
pub fn to_record(frame: &SensorFrame, recv_ts: u64) -> TelemetryRecord {
    TelemetryRecord {
        device_id: frame.device_id.clone(),
        seq: frame.seq,
        ts: frame.ts,
        recv_ts,
        gps: GpsDoc {
            lat: frame.gps.lat,
            lon: frame.gps.lon,
            alt: frame.gps.alt,
            speed: frame.gps.speed,
            heading: frame.gps.heading,
        },
        imu: ImuDoc {
            ax: frame.imu.ax,
            ay: frame.imu.ay,
            az: frame.imu.az,
            yaw: frame.imu.yaw,
            pitch: frame.imu.pitch,
            roll: frame.imu.roll,
        },
        load: LoadDoc {
            left: frame.load_left,
            right: frame.load_right,
        },
        gas: GasDoc {
            mq2: frame.mq2,
            mq135: frame.mq135,
        },
        env: EnvDoc {
            temp: frame.temp,
            hum: frame.humidity,
        },
        water: frame.water,
        sos: frame.sos,
        activity: None,
    }
}

impl TelemetryRecord {
    /// Inverse of [`to_record`].
    pub fn to_frame(&self) -> SensorFrame {
        SensorFrame {
            device_id: self.device_id.clone(),
            seq: self.seq,
            ts: self.ts,
            gps: Gps {
                lat: self.gps.lat,
                lon: self.gps.lon,
                alt: self.gps.alt,
                speed: self.gps.speed,
                heading: self.gps.heading,
            },
            imu: Imu {
                ax: self.imu.ax,
                ay: self.imu.ay,
                az: self.imu.az,
                yaw: self.imu.yaw,
                pitch: self.imu.pitch,
                roll: self.imu.roll,
            },
            load_left: self.load.left,
            load_right: self.load.right,
            mq2: self.gas.mq2,
            mq135: self.gas.mq135,
            temp: self.env.temp,
            humidity: self.env.hum,
            water: self.water,
            sos: self.sos,
        }
    }

    /// Classifier features in canonical order.
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        self.to_frame().features()
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("records serialize")
    }

    pub fn from_json(value: &Value) -> Result<Self, serde_json::Error> {
        Self::deserialize(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn zero_frame_document_is_exact() {
        let frame = SensorFrame {
            device_id: "BAG1".into(),
            ..SensorFrame::default()
        };
        let doc = to_record(&frame, 7).to_json();
        assert_eq!(
            doc,
            json!({
                "deviceId": "BAG1", "seq": 0, "ts": 0, "recvTs": 7,
                "gps": {"lat": 0.0, "lon": 0.0, "alt": 0.0, "speed": 0.0, "heading": 0.0},
                "imu": {"ax": 0.0, "ay": 0.0, "az": 0.0, "yaw": 0.0, "pitch": 0.0, "roll": 0.0},
                "load": {"left": 0.0, "right": 0.0},
                "gas": {"mq2": 0.0, "mq135": 0.0},
                "env": {"temp": 0.0, "hum": 0.0},
                "water": 0, "sos": 0
            })
        );
    }

    #[test]
    fn sos_and_water_are_bits() {
        let frame = SensorFrame {
            device_id: "B".into(),
            sos: true,
            water: true,
            ..SensorFrame::default()
        };
        let doc = to_record(&frame, 0).to_json();
        assert_eq!((&doc["sos"], &doc["water"]), (&json!(1), &json!(1)));
    }

    #[test]
    fn schema_is_enforced_on_read() {
        let good = to_record(
            &SensorFrame {
                device_id: "B".into(),
                ..Default::default()
            },
            1,
        )
        .to_json();
        assert!(TelemetryRecord::from_json(&good).is_ok());

        let mut missing = good.clone();
        missing["gas"].as_object_mut().unwrap().remove("mq2");
        assert!(TelemetryRecord::from_json(&missing).is_err());

        let mut bad_bit = good.clone();
        bad_bit["sos"] = json!(2);
        assert!(TelemetryRecord::from_json(&bad_bit).is_err());

        let mut labelled = good;
        labelled["activity"] = json!("Walking");
        assert_eq!(
            TelemetryRecord::from_json(&labelled)
                .unwrap()
                .activity
                .as_deref(),
            Some("Walking")
        );
    }
}
