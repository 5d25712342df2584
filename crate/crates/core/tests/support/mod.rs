pub mod frames;
pub mod oracle;
