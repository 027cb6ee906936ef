//! WebSocket gateway and command-line front end for the hub simulator.

pub mod cli;
pub mod server;
