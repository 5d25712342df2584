//! Services around the core: the document store emulator, the telemetry
//! gateway and the alert service, plus the clock and store client they share.

pub mod alerts;
pub mod client;
pub mod clock;
pub mod gateway;
pub mod paths;
pub mod record;
pub mod store;
