//! Partially homomorphic encryption for privacy-preserving vector similarity.
//!
//! Three additive schemes (Paillier, Damgård-Jurik, Okamoto-Uchiyama) share a
//! single interface. Embeddings are normalized, encoded as fixed-point integers
//! and encrypted componentwise; a server holding only the public key computes
//! the encrypted dot product with a plaintext query.

pub mod arithmetic;
pub mod bench;
pub mod encoding;
pub mod error;
pub mod keystore;
pub mod phe;
pub mod tensor;
pub mod twotower;

pub use arithmetic::Integer;
pub use encoding::{NormalizedVector, Precision};
pub use error::{Error, Result};
pub use phe::{Ciphertext, KeyPair, PublicKey, SchemeId, SecretKey};
