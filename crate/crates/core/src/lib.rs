//! Zero-knowledge proof-of-reserve and light-client proofs over Bitcoin
//! headers and transactions.

pub mod chain;
pub mod codec;
pub mod crypto;
pub mod light_client;
pub mod por;
pub mod sealed;
pub mod stark;
pub mod testchain;
pub mod uint;
