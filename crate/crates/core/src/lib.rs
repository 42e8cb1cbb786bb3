pub mod cli;
pub mod error;
pub mod hashing;
pub mod numcore;
pub mod p1;
pub mod p2;
pub mod qkdsim;
pub mod session;
