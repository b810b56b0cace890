pub mod arith;
pub mod ckks;
pub mod dispatch;
pub mod compiler;
pub mod gc;
pub mod isa;
pub mod metrics;
pub mod ppml;
pub mod sim;
