pub mod crypto;
pub mod chain;
pub mod sse;
pub mod workload;
pub mod protocol;
pub mod sweep;
