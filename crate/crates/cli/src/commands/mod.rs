pub mod calibrate;
pub mod compare;
pub mod inject;
pub mod sweep;
pub mod verify;
