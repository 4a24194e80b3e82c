//! Browser bindings. Each export takes plain values and returns a JSON string.

use rand::rngs::OsRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use phesim::arithmetic::Integer;
use phesim::encoding::{check_capacity_for_space, decode_similarity, encode, prepare, CapacityReport, Precision};
use phesim::phe::prime_bits_for_security;
use phesim::tensor::{decrypt_similarity, dot_encrypted_plain, encrypt_values, encrypt_vector};
use phesim::{KeyPair, Result, SchemeId};

#[derive(Debug, Serialize)]
pub struct SimilarityDemo {
    pub scheme: String,
    pub security_bits: u32,
    pub digits: u32,
    pub normalized: bool,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub plain: f64,
    pub decrypted: f64,
    pub loss: f64,
    pub key_fingerprint: String,
    pub embedding_bytes: usize,
    pub similarity_hex: String,
}

/// Encrypts `source`, computes the encrypted dot product with `target` using
/// the public key, then decrypts.
pub fn similarity_demo(
    scheme: &str,
    security_bits: u32,
    digits: u32,
    normalize: bool,
    source: &[f64],
    target: &[f64],
) -> Result<SimilarityDemo> {
    let scheme = SchemeId::from_name(scheme, None)?;
    let precision = Precision::new(digits)?;
    let mut rng = OsRng;
    let kp = KeyPair::keygen(scheme, security_bits, &mut rng)?;
    let (source, target) = if normalize {
        (prepare(source)?.into_inner(), prepare(target)?.into_inner())
    } else {
        (source.to_vec(), target.to_vec())
    };
    let ev = if normalize {
        encrypt_vector(&kp, &phesim::NormalizedVector::new(source.clone())?, precision, &mut rng)?
    } else {
        encrypt_values(&kp, &source, precision, &mut rng)?
    };
    let es = dot_encrypted_plain(kp.public(), &ev, &target, &mut rng)?;
    let decrypted = decrypt_similarity(&kp, &es)?;
    let plain: f64 = source.iter().zip(&target).map(|(a, b)| a * b).sum();
    Ok(SimilarityDemo {
        scheme: scheme.name().into(),
        security_bits,
        digits,
        normalized: normalize,
        plain,
        decrypted,
        loss: (decrypted - plain).abs(),
        key_fingerprint: kp.public().fingerprint(),
        embedding_bytes: ev.to_bytes().len(),
        similarity_hex: es.ciphertext().to_hex(),
        source,
        target,
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct LossPoint {
    pub digits: u32,
    pub max_loss: f64,
    pub bound: f64,
}

/// Worst encoding loss over `pairs` random prepared pairs, per precision.
/// Encryption is exact, so this is also the loss after decryption.
pub fn loss_curve(dim: usize, max_digits: u32, pairs: usize, seed: u64) -> Result<Vec<LossPoint>> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(pairs);
    while inputs.len() < pairs {
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let (Ok(a), Ok(b)) = (prepare(&a), prepare(&b)) {
            inputs.push((a, b));
        }
    }
    (1..=max_digits)
        .map(|digits| {
            let precision = Precision::new(digits)?;
            let mut max_loss: f64 = 0.0;
            for (a, b) in &inputs {
                let mut sum = Integer::from(0u32);
                for (x, y) in a.components().iter().zip(b.components()) {
                    sum += encode(*x, precision)? * encode(*y, precision)?;
                }
                max_loss = max_loss.max((decode_similarity(&sum, precision) - a.dot(b)).abs());
            }
            Ok(LossPoint {
                digits,
                max_loss,
                bound: dim as f64 * 10f64.powi(-(digits as i32)),
            })
        })
        .collect()
}

/// Capacity check against the smallest plaintext space a key of this size
/// can have, so no key generation is needed.
pub fn capacity(scheme: &str, security_bits: u32, dj_s: u32, digits: u32, dim: usize) -> Result<CapacityReport> {
    let scheme = SchemeId::from_name(scheme, Some(dj_s))?;
    let b = prime_bits_for_security(security_bits)?;
    let space_bits = match scheme {
        SchemeId::Paillier => 2 * b - 1,
        SchemeId::DamgardJurik { s } => u64::from(s) * (2 * b - 1),
        SchemeId::OkamotoUchiyama => b - 1,
    };
    let space = Integer::from(1u32) << space_bits;
    Ok(check_capacity_for_space(&space, Precision::new(digits)?, dim))
}

fn to_js<T: Serialize>(result: Result<T>) -> std::result::Result<String, JsValue> {
    result
        .map(|v| serde_json::to_string(&v).expect("demo values serialize"))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = similarityDemo)]
pub fn similarity_demo_js(
    scheme: &str,
    security_bits: u32,
    digits: u32,
    normalize: bool,
    source: Vec<f64>,
    target: Vec<f64>,
) -> std::result::Result<String, JsValue> {
    to_js(similarity_demo(scheme, security_bits, digits, normalize, &source, &target))
}

#[wasm_bindgen(js_name = lossCurve)]
pub fn loss_curve_js(dim: usize, max_digits: u32, pairs: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(loss_curve(dim, max_digits, pairs, u64::from(seed)))
}

#[wasm_bindgen(js_name = capacityReport)]
pub fn capacity_js(
    scheme: &str,
    security_bits: u32,
    dj_s: u32,
    digits: u32,
    dim: usize,
) -> std::result::Result<String, JsValue> {
    to_js(capacity(scheme, security_bits, dj_s, digits, dim))
}
