//! Management plane for the slicenet emulator: the HTTP server and its state.

pub mod server;
