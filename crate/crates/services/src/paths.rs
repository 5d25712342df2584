//! Store paths used for one bag.

pub fn latest(device: &str) -> String {
    format!("bags/{device}/latest")
}

pub fn history(device: &str) -> String {
    format!("bags/{device}/history")
}

pub fn history_entry(device: &str, push_id: &str) -> String {
    format!("bags/{device}/history/{push_id}")
}

pub fn commands(device: &str) -> String {
    format!("bags/{device}/commands")
}

/// Device ids double as path segments and frame fields.
pub fn valid_device_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= smartbag_core::frame::MAX_DEVICE_ID_LEN
        && id.bytes().all(|b| b.is_ascii_alphanumeric())
}
