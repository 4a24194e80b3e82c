//! Encrypted vectors and the encrypted-by-plain dot product.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::arithmetic::{Integer, RandomSource};
use crate::encoding::{check_capacity, decode_similarity, encode, NormalizedVector, Precision};
use crate::error::{Error, Result};
use crate::keystore::{parse_hex, to_hex};
use crate::phe::{Ciphertext, KeyPair, PublicKey, SchemeId};

/// Anything that can produce ciphertexts under a public key.
pub trait Encryptor {
    fn public_key(&self) -> &PublicKey;
    fn encrypt_message<R: RandomSource + ?Sized>(&self, m: &Integer, rng: &mut R) -> Result<Ciphertext>;
}

impl Encryptor for PublicKey {
    fn public_key(&self) -> &PublicKey {
        self
    }

    fn encrypt_message<R: RandomSource + ?Sized>(&self, m: &Integer, rng: &mut R) -> Result<Ciphertext> {
        self.encrypt(m, rng)
    }
}

impl Encryptor for KeyPair {
    fn public_key(&self) -> &PublicKey {
        self.public()
    }

    fn encrypt_message<R: RandomSource + ?Sized>(&self, m: &Integer, rng: &mut R) -> Result<Ciphertext> {
        // stay within the public bound so results are decodable by any holder
        if m >= self.public().plaintext_space() {
            return Err(Error::MessageTooLarge);
        }
        self.encrypt(m, rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedVector {
    scheme: SchemeId,
    ciphertexts: Vec<Ciphertext>,
    precision: Precision,
    key_fingerprint: String,
    /// Upper bound on every plaintext component, used for overflow checks.
    component_bound: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncryptedVectorJson {
    ciphertexts: Vec<String>,
    component_bound: f64,
    dim: usize,
    key_fingerprint: String,
    precision: Precision,
    scheme: String,
}

impl EncryptedVector {
    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.ciphertexts.len()
    }

    pub fn ciphertexts(&self) -> &[Ciphertext] {
        &self.ciphertexts
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn key_fingerprint(&self) -> &str {
        &self.key_fingerprint
    }

    pub fn component_bound(&self) -> f64 {
        self.component_bound
    }

    /// Reassembles a vector from raw ciphertexts, validating each against `pk`.
    pub fn from_parts(
        pk: &PublicKey,
        ciphertexts: Vec<Ciphertext>,
        precision: Precision,
        component_bound: f64,
    ) -> Result<Self> {
        if ciphertexts.is_empty() {
            return Err(Error::InvalidArgument("encrypted vector needs at least one dimension".into()));
        }
        if !component_bound.is_finite() || component_bound <= 0.0 {
            return Err(Error::InvalidArgument(format!("invalid component bound {component_bound}")));
        }
        for c in &ciphertexts {
            if c.scheme() != pk.scheme() || c.modulus() != pk.ciphertext_modulus() {
                return Err(Error::SchemeMismatch("ciphertext does not belong to this key".into()));
            }
        }
        Ok(EncryptedVector {
            scheme: pk.scheme(),
            ciphertexts,
            precision,
            key_fingerprint: pk.fingerprint(),
            component_bound,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&EncryptedVectorJson {
            ciphertexts: self.ciphertexts.iter().map(Ciphertext::to_hex).collect(),
            component_bound: self.component_bound,
            dim: self.dim(),
            key_fingerprint: self.key_fingerprint.clone(),
            precision: self.precision,
            scheme: self.scheme.name().into(),
        })
        .expect("encrypted vectors always serialize")
    }

    pub fn from_json(text: &str, pk: &PublicKey) -> Result<Self> {
        let raw: EncryptedVectorJson = serde_json::from_str(text)?;
        if raw.scheme != pk.scheme().name() {
            return Err(Error::SchemeMismatch(format!("vector is {} but key is {}", raw.scheme, pk.scheme().name())));
        }
        if raw.key_fingerprint != pk.fingerprint() {
            return Err(Error::KeyMismatch);
        }
        if raw.dim != raw.ciphertexts.len() {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                found: raw.ciphertexts.len(),
            });
        }
        let ciphertexts = parse_ciphertexts(pk, &raw.ciphertexts)?;
        Self::from_parts(pk, ciphertexts, raw.precision, raw.component_bound)
    }

    /// Concatenated fixed-width ciphertext bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.ciphertexts.iter().flat_map(Ciphertext::to_bytes).collect()
    }

    /// Decrypts every component to its fixed-point integer.
    pub fn decrypt_components(&self, kp: &KeyPair) -> Result<Vec<Integer>> {
        if kp.public().fingerprint() != self.key_fingerprint {
            return Err(Error::KeyMismatch);
        }
        self.ciphertexts.iter().map(|c| kp.decrypt(c)).collect()
    }
}

pub(crate) fn parse_ciphertexts(pk: &PublicKey, hex: &[String]) -> Result<Vec<Ciphertext>> {
    hex.iter()
        .map(|h| {
            let value = parse_hex(h).ok_or_else(|| Error::InvalidCiphertext(format!("`{h}` is not lowercase hex")))?;
            pk.ciphertext(value)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedSimilarity {
    ciphertext: Ciphertext,
    precision: Precision,
    key_fingerprint: String,
}

impl EncryptedSimilarity {
    pub fn new(ciphertext: Ciphertext, precision: Precision, key_fingerprint: String) -> Self {
        EncryptedSimilarity {
            ciphertext,
            precision,
            key_fingerprint,
        }
    }

    pub fn ciphertext(&self) -> &Ciphertext {
        &self.ciphertext
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn key_fingerprint(&self) -> &str {
        &self.key_fingerprint
    }
}

fn check_plain(values: &[f64]) -> Result<()> {
    match values.iter().find(|x| !x.is_finite() || **x < 0.0) {
        Some(&x) => Err(Error::NegativeValue(x)),
        None => Ok(()),
    }
}

fn bound_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(1.0, f64::max).ceil()
}

/// Worst-case dot product `dim * encode(bound_a) * encode(bound_b)` must stay
/// below the public plaintext bound.
fn check_dot_capacity(pk: &PublicKey, precision: Precision, dim: usize, bound_a: f64, bound_b: f64) -> Result<()> {
    let worst = Integer::from(dim) * encode(bound_a, precision)? * encode(bound_b, precision)?;
    if worst >= *pk.plaintext_space() {
        return Err(Error::OverflowRisk(format!(
            "{dim} dimensions at {} digits can reach 2^{:.1}, plaintext space is {} bits",
            precision.digits(),
            crate::encoding::log2(&worst),
            pk.plaintext_space().bits()
        )));
    }
    Ok(())
}

pub fn encrypt_vector<E: Encryptor, R: RandomSource + ?Sized>(
    encryptor: &E,
    v: &NormalizedVector,
    precision: Precision,
    rng: &mut R,
) -> Result<EncryptedVector> {
    let report = check_capacity(encryptor.public_key(), precision, v.dim());
    if !report.passes {
        return Err(Error::OverflowRisk(format!(
            "{} dimensions at {} digits need {:.1} bits, plaintext space has {} (max safe digits: {:?})",
            report.dim, report.digits, report.required_bits, report.available_bits, report.max_safe_digits
        )));
    }
    encrypt_components(encryptor, v.components(), precision, 1.0, rng)
}

/// Encrypts arbitrary nonnegative values; the overflow check assumes the
/// query is bounded like this vector.
pub fn encrypt_values<E: Encryptor, R: RandomSource + ?Sized>(
    encryptor: &E,
    values: &[f64],
    precision: Precision,
    rng: &mut R,
) -> Result<EncryptedVector> {
    check_plain(values)?;
    let bound = bound_of(values);
    check_dot_capacity(encryptor.public_key(), precision, values.len(), bound, bound)?;
    encrypt_components(encryptor, values, precision, bound, rng)
}

/// [`encrypt_values`] without the overflow guard. Sums may wrap around the
/// plaintext space; only for demonstrating why the guard exists.
pub fn encrypt_values_unguarded<E: Encryptor, R: RandomSource + ?Sized>(
    encryptor: &E,
    values: &[f64],
    precision: Precision,
    rng: &mut R,
) -> Result<EncryptedVector> {
    check_plain(values)?;
    encrypt_components(encryptor, values, precision, bound_of(values), rng)
}

fn encrypt_components<E: Encryptor, R: RandomSource + ?Sized>(
    encryptor: &E,
    values: &[f64],
    precision: Precision,
    component_bound: f64,
    rng: &mut R,
) -> Result<EncryptedVector> {
    let pk = encryptor.public_key();
    let ciphertexts = values
        .iter()
        .map(|&x| encryptor.encrypt_message(&encode(x, precision)?, rng))
        .collect::<Result<Vec<_>>>()?;
    EncryptedVector::from_parts(pk, ciphertexts, precision, component_bound)
}

/// Encrypted similarity of `ev` and a plaintext vector, using the public key
/// only: every ciphertext is raised to its encoded plaintext weight and the
/// terms are folded left to right with homomorphic addition.
///
/// Zero weights contribute a fresh encryption of zero instead of the trivial
/// ciphertext 1, so the result is always randomized.
pub fn dot_encrypted_plain<R: RandomSource + ?Sized>(
    pk: &PublicKey,
    ev: &EncryptedVector,
    plain: &[f64],
    rng: &mut R,
) -> Result<EncryptedSimilarity> {
    dot_inner(pk, ev, plain, rng, true)
}

/// [`dot_encrypted_plain`] without the overflow guard.
pub fn dot_encrypted_plain_unguarded<R: RandomSource + ?Sized>(
    pk: &PublicKey,
    ev: &EncryptedVector,
    plain: &[f64],
    rng: &mut R,
) -> Result<EncryptedSimilarity> {
    dot_inner(pk, ev, plain, rng, false)
}

fn dot_inner<R: RandomSource + ?Sized>(
    pk: &PublicKey,
    ev: &EncryptedVector,
    plain: &[f64],
    rng: &mut R,
    guarded: bool,
) -> Result<EncryptedSimilarity> {
    if plain.len() != ev.dim() {
        return Err(Error::DimensionMismatch {
            expected: ev.dim(),
            found: plain.len(),
        });
    }
    check_plain(plain)?;
    let fingerprint = pk.fingerprint();
    if fingerprint != ev.key_fingerprint {
        return Err(Error::KeyMismatch);
    }
    if guarded {
        check_dot_capacity(pk, ev.precision, ev.dim(), ev.component_bound, bound_of(plain))?;
    }

    let mut term = |c: &Ciphertext, weight: f64| -> Result<Ciphertext> {
        let k = encode(weight, ev.precision)?;
        if k.is_zero() {
            pk.encrypt(&k, rng)
        } else {
            pk.scalar_mul(c, &k)
        }
    };
    let mut acc = term(&ev.ciphertexts[0], plain[0])?;
    for (c, &weight) in ev.ciphertexts.iter().zip(plain).skip(1) {
        acc = pk.add(&acc, &term(c, weight)?)?;
    }
    Ok(EncryptedSimilarity {
        ciphertext: acc,
        precision: ev.precision,
        key_fingerprint: fingerprint,
    })
}

/// Decrypts the raw fixed-point sum `sum encode(a_i) * encode(b_i)`.
pub fn decrypt_similarity_integer(kp: &KeyPair, es: &EncryptedSimilarity) -> Result<Integer> {
    if kp.public().fingerprint() != es.key_fingerprint {
        return Err(Error::KeyMismatch);
    }
    kp.decrypt(&es.ciphertext)
}

pub fn decrypt_similarity(kp: &KeyPair, es: &EncryptedSimilarity) -> Result<f64> {
    Ok(decode_similarity(&decrypt_similarity_integer(kp, es)?, es.precision))
}

/// Componentwise homomorphic addition.
pub fn add_vectors(pk: &PublicKey, a: &EncryptedVector, b: &EncryptedVector) -> Result<EncryptedVector> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.precision != b.precision {
        return Err(Error::InvalidArgument("precision mismatch".into()));
    }
    let fingerprint = pk.fingerprint();
    if a.key_fingerprint != fingerprint || b.key_fingerprint != fingerprint {
        return Err(Error::KeyMismatch);
    }
    let ciphertexts = a
        .ciphertexts
        .iter()
        .zip(&b.ciphertexts)
        .map(|(x, y)| pk.add(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncryptedVector {
        scheme: a.scheme,
        ciphertexts,
        precision: a.precision,
        key_fingerprint: fingerprint,
        component_bound: a.component_bound + b.component_bound,
    })
}

/// Hex form of an encrypted similarity for transport.
pub fn similarity_to_hex(es: &EncryptedSimilarity) -> String {
    to_hex(es.ciphertext.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::seeded_rng;
    use crate::encoding::{dot, prepare};
    use rand::Rng;

    fn schemes() -> [SchemeId; 3] {
        [SchemeId::Paillier, SchemeId::DamgardJurik { s: 2 }, SchemeId::OkamotoUchiyama]
    }

    fn keypair(scheme: SchemeId, seed: u64) -> KeyPair {
        KeyPair::keygen_with_prime_bits(scheme, 256, 0, &mut seeded_rng(seed)).unwrap()
    }

    fn random_prepared<R: Rng>(dim: usize, rng: &mut R) -> NormalizedVector {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prepare(&raw).unwrap()
    }

    fn encoded_dot(a: &[f64], b: &[f64], p: Precision) -> Integer {
        a.iter().zip(b).map(|(x, y)| encode(*x, p).unwrap() * encode(*y, p).unwrap()).sum()
    }

    #[test]
    fn componentwise_roundtrip_and_zero() {
        let mut rng = seeded_rng(1);
        for scheme in schemes() {
            let kp = keypair(scheme, 10);
            let v = NormalizedVector::new(vec![0.0, 0.6, 0.8, 0.0]).unwrap();
            let p = Precision::new(6).unwrap();
            let ev = encrypt_vector(kp.public(), &v, p, &mut rng).unwrap();
            let decrypted = ev.decrypt_components(&kp).unwrap();
            let expected: Vec<Integer> = v.components().iter().map(|x| encode(*x, p).unwrap()).collect();
            assert_eq!(decrypted, expected);
        }
    }

    #[test]
    fn listing_vectors() {
        let mut rng = seeded_rng(2);
        let kp = keypair(SchemeId::Paillier, 11);
        let source = [7.11, 5.22, 5.33, 2.44, 3.55, 4.66];
        let target = [5.66, 3.77, 2.88, 4.0, 0.0, 5.99];
        let ev = encrypt_values(&kp, &source, Precision::DEFAULT, &mut rng).unwrap();
        let es = dot_encrypted_plain(kp.public(), &ev, &target, &mut rng).unwrap();
        let got = decrypt_similarity(&kp, &es).unwrap();
        let oracle: f64 = source.iter().zip(&target).map(|(x, y)| x * y).sum();
        assert!((oracle - 112.9458).abs() < 1e-9);
        assert!((got - oracle).abs() < 0.01);
    }

    #[test]
    fn basis_and_zero_queries() {
        let mut rng = seeded_rng(3);
        for scheme in schemes() {
            let kp = keypair(scheme, 12);
            let v = random_prepared(16, &mut rng);
            let p = Precision::DEFAULT;
            let ev = encrypt_vector(&kp, &v, p, &mut rng).unwrap();
            for j in [0, 7, 15] {
                let mut e = vec![0.0; 16];
                e[j] = 1.0;
                let es = dot_encrypted_plain(kp.public(), &ev, &e, &mut rng).unwrap();
                let got = decrypt_similarity(&kp, &es).unwrap();
                assert!((got - v.components()[j]).abs() <= 1e-19 + 1e-16, "{scheme} j={j}");
            }
            let zeros = vec![0.0; 16];
            let es = dot_encrypted_plain(kp.public(), &ev, &zeros, &mut rng).unwrap();
            assert_eq!(decrypt_similarity(&kp, &es).unwrap(), 0.0);
            assert_ne!(es.ciphertext().value(), &Integer::from(1u32));
        }
    }

    #[test]
    fn oracle_equivalence_is_exact() {
        let mut rng = seeded_rng(4);
        for scheme in schemes() {
            let kp = keypair(scheme, 13);
            let p = Precision::DEFAULT;
            for _ in 0..10 {
                let (a, b) = (random_prepared(8, &mut rng), random_prepared(8, &mut rng));
                let ev = encrypt_vector(&kp, &a, p, &mut rng).unwrap();
                let es = dot_encrypted_plain(kp.public(), &ev, b.components(), &mut rng).unwrap();
                let got = decrypt_similarity_integer(&kp, &es).unwrap();
                assert_eq!(got, encoded_dot(a.components(), b.components(), p));
                let loss = (decode_similarity(&got, p) - a.dot(&b)).abs();
                assert!(loss <= 8e-19 + 1e-15);
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = seeded_rng(5);
        let kp = keypair(SchemeId::OkamotoUchiyama, 14);
        let (a, b) = (random_prepared(12, &mut rng), random_prepared(12, &mut rng));
        let perm: Vec<usize> = (0..12).rev().collect();
        let pa = NormalizedVector::new(perm.iter().map(|&i| a.components()[i]).collect()).unwrap();
        let pb: Vec<f64> = perm.iter().map(|&i| b.components()[i]).collect();
        let p = Precision::DEFAULT;
        let e1 = encrypt_vector(&kp, &a, p, &mut rng).unwrap();
        let e2 = encrypt_vector(&kp, &pa, p, &mut rng).unwrap();
        let s1 = decrypt_similarity_integer(&kp, &dot_encrypted_plain(kp.public(), &e1, b.components(), &mut rng).unwrap());
        let s2 = decrypt_similarity_integer(&kp, &dot_encrypted_plain(kp.public(), &e2, &pb, &mut rng).unwrap());
        assert_eq!(s1.unwrap(), s2.unwrap());
    }

    #[test]
    fn dot_errors() {
        let mut rng = seeded_rng(6);
        let kp = keypair(SchemeId::Paillier, 15);
        let other = keypair(SchemeId::Paillier, 16);
        let v = random_prepared(4, &mut rng);
        let ev = encrypt_vector(&kp, &v, Precision::DEFAULT, &mut rng).unwrap();
        assert!(matches!(
            dot_encrypted_plain(kp.public(), &ev, &[0.1, 0.2], &mut rng),
            Err(Error::DimensionMismatch { expected: 4, found: 2 })
        ));
        assert!(matches!(
            dot_encrypted_plain(kp.public(), &ev, &[0.1, -0.2, 0.0, 0.0], &mut rng),
            Err(Error::NegativeValue(_))
        ));
        assert!(matches!(
            dot_encrypted_plain(other.public(), &ev, &[0.1, 0.2, 0.0, 0.0], &mut rng),
            Err(Error::KeyMismatch)
        ));
        let es = dot_encrypted_plain(kp.public(), &ev, &[0.1, 0.2, 0.0, 0.0], &mut rng).unwrap();
        assert!(matches!(decrypt_similarity(&other, &es), Err(Error::KeyMismatch)));
    }

    #[test]
    fn add_vectors_behaviour() {
        let mut rng = seeded_rng(7);
        let kp = keypair(SchemeId::DamgardJurik { s: 2 }, 17);
        let p = Precision::new(9).unwrap();
        let v = [0.1, 0.5, 0.9];
        let w = [0.3, 0.0, 0.25];
        let ev = encrypt_values(&kp, &v, p, &mut rng).unwrap();
        let ew = encrypt_values(&kp, &w, p, &mut rng).unwrap();
        let ez = encrypt_values(&kp, &[0.0; 3], p, &mut rng).unwrap();
        let identity = add_vectors(kp.public(), &ev, &ez).unwrap();
        assert_eq!(identity.decrypt_components(&kp).unwrap(), ev.decrypt_components(&kp).unwrap());
        let sum = add_vectors(kp.public(), &ev, &ew).unwrap().decrypt_components(&kp).unwrap();
        for i in 0..3 {
            assert_eq!(sum[i], encode(v[i], p).unwrap() + encode(w[i], p).unwrap());
        }
        let short = encrypt_values(&kp, &[0.1, 0.2], p, &mut rng).unwrap();
        assert!(matches!(add_vectors(kp.public(), &ev, &short), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn json_roundtrip_and_size_model() {
        let mut rng = seeded_rng(8);
        let kp = keypair(SchemeId::Paillier, 18);
        let v = random_prepared(128, &mut rng);
        let ev = encrypt_vector(&kp, &v, Precision::DEFAULT, &mut rng).unwrap();
        let text = ev.to_json();
        assert_eq!(EncryptedVector::from_json(&text, kp.public()).unwrap(), ev);
        // dim * hex length of a full-size ciphertext, plus the envelope
        let per = kp.public().ciphertext_modulus().bits().div_ceil(4) as f64 + 3.0;
        let model = 128.0 * per + 200.0;
        let ratio = text.len() as f64 / model;
        assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");
        let other = keypair(SchemeId::Paillier, 19);
        assert!(matches!(EncryptedVector::from_json(&text, other.public()), Err(Error::KeyMismatch)));
    }

    #[test]
    fn capacity_guard_and_wraparound() {
        let mut rng = seeded_rng(9);
        let kp = KeyPair::from_parts(
            SchemeId::Paillier,
            Integer::from(11u32),
            Integer::from(13u32),
            Integer::from(144u32),
            0,
        )
        .unwrap();
        let p = Precision::new(1).unwrap();
        let v = NormalizedVector::new(vec![0.6, 0.8]).unwrap();
        assert!(matches!(encrypt_vector(&kp, &v, p, &mut rng), Err(Error::OverflowRisk(_))));
        let values = [1.0, 1.0];
        assert!(matches!(encrypt_values(&kp, &values, p, &mut rng), Err(Error::OverflowRisk(_))));

        let ev = encrypt_values_unguarded(&kp, &values, p, &mut rng).unwrap();
        assert!(matches!(
            dot_encrypted_plain(kp.public(), &ev, &values, &mut rng),
            Err(Error::OverflowRisk(_))
        ));
        let es = dot_encrypted_plain_unguarded(kp.public(), &ev, &values, &mut rng).unwrap();
        // 10*10 + 10*10 = 200 wraps to 57 modulo n = 143
        assert_eq!(decrypt_similarity_integer(&kp, &es).unwrap(), Integer::from(57u32));
        assert_ne!(decrypt_similarity(&kp, &es).unwrap(), dot(&values, &values));
    }
}
