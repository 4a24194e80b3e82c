//! Additively homomorphic cryptosystems behind one scheme-generic key API.
//!
//! [`PublicKey`] encrypts, adds ciphertexts and multiplies them by plaintext
//! scalars. [`SecretKey`] decrypts. [`KeyPair`] holds both and additionally
//! encrypts through the Chinese remainder theorem, which the factorization
//! makes several times faster than the public route while producing the
//! same ciphertext distribution.

mod damgard_jurik;
mod okamoto_uchiyama;
mod paillier;

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_traits::{One, Zero};

use crate::arithmetic::{
    generate_prime_with_top_bits, is_probable_prime, lcm, random_below, seeded_rng, Integer,
    RandomSource,
};
use crate::error::{Error, Result};

/// Default Damgård-Jurik exponent; ciphertexts live modulo `n^3`.
pub const DEFAULT_DJ_S: u32 = 2;
const MAX_DJ_S: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Paillier,
    DamgardJurik { s: u32 },
    OkamotoUchiyama,
}

impl SchemeId {
    pub fn damgard_jurik(s: u32) -> Result<Self> {
        if s == 0 || s > MAX_DJ_S {
            return Err(Error::InvalidArgument(format!(
                "Damgård-Jurik exponent s must be in 1..={MAX_DJ_S}, got {s}"
            )));
        }
        Ok(SchemeId::DamgardJurik { s })
    }

    /// Stable identifier used in key files, databases and on the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            SchemeId::Paillier => "paillier",
            SchemeId::DamgardJurik { .. } => "damgard-jurik",
            SchemeId::OkamotoUchiyama => "okamoto-uchiyama",
        }
    }

    /// Parses [`SchemeId::name`]; `dj_s` defaults to [`DEFAULT_DJ_S`].
    pub fn from_name(name: &str, dj_s: Option<u32>) -> Result<Self> {
        match name {
            "paillier" => Ok(SchemeId::Paillier),
            "damgard-jurik" => SchemeId::damgard_jurik(dj_s.unwrap_or(DEFAULT_DJ_S)),
            "okamoto-uchiyama" => Ok(SchemeId::OkamotoUchiyama),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }

    /// Exponent `s` of the ciphertext modulus `n^(s+1)`; 1 for Paillier.
    fn level(&self) -> u32 {
        match self {
            SchemeId::Paillier => 1,
            SchemeId::DamgardJurik { s } => *s,
            SchemeId::OkamotoUchiyama => 0,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeId::Paillier => write!(f, "Paillier"),
            SchemeId::DamgardJurik { s } => write!(f, "Damgard-Jurik(s={s})"),
            SchemeId::OkamotoUchiyama => write!(f, "Okamoto-Uchiyama"),
        }
    }
}

/// Prime size for a security level: 80 bits maps to a 1024-bit RSA modulus,
/// 112 bits to a 2048-bit one.
pub fn prime_bits_for_security(security_bits: u32) -> Result<u64> {
    match security_bits {
        80 => Ok(512),
        112 => Ok(1024),
        other => Err(Error::UnsupportedSecurity(other)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    scheme: SchemeId,
    value: Integer,
    modulus: Arc<Integer>,
}

impl Ciphertext {
    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn value(&self) -> &Integer {
        &self.value
    }

    /// `n^2`, `n^(s+1)` or `n`, depending on the scheme.
    pub fn modulus(&self) -> &Integer {
        &self.modulus
    }

    pub fn to_hex(&self) -> String {
        self.value.to_str_radix(16)
    }

    /// Big-endian bytes, left-padded to the byte length of the modulus.
    pub fn to_bytes(&self) -> Vec<u8> {
        let width = self.modulus.bits().div_ceil(8) as usize;
        let raw = self.value.to_bytes_be();
        let mut out = vec![0u8; width - raw.len()];
        out.extend_from_slice(&raw);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    scheme: SchemeId,
    n: Integer,
    g: Integer,
    h: Option<Integer>,
    security_bits: u32,
    modulus: Arc<Integer>,
    n_s: Integer,
    plaintext_space: Integer,
}

impl PublicKey {
    /// Builds a public key from its transported material. `h` is required
    /// for Okamoto-Uchiyama and must equal `g^n mod n`.
    pub fn new(scheme: SchemeId, n: Integer, g: Integer, h: Option<Integer>, security_bits: u32) -> Result<Self> {
        if n < Integer::from(2u32) {
            return Err(Error::InvalidModulus);
        }
        let s = scheme.level();
        let (modulus, n_s, plaintext_space, h) = match scheme {
            SchemeId::Paillier | SchemeId::DamgardJurik { .. } => {
                if h.is_some() {
                    return Err(Error::KeyFormat(format!("{} keys carry no h", scheme.name())));
                }
                let n_s = n.pow(s);
                let modulus = &n_s * &n;
                (modulus, n_s.clone(), n_s, None)
            }
            SchemeId::OkamotoUchiyama => {
                let h = h.ok_or_else(|| Error::KeyFormat("Okamoto-Uchiyama key is missing h".into()))?;
                if h != g.modpow(&n, &n) {
                    return Err(Error::Integrity("h != g^n mod n".into()));
                }
                // p and q share a bit length b, so bits(n) is 3b - 2 ..= 3b and p >= 2^(b-1)
                let prime_bits = n.bits().div_ceil(3);
                let bound = Integer::one() << (prime_bits - 1);
                (n.clone(), n.clone(), bound, Some(h))
            }
        };
        if g <= Integer::one() || g >= modulus || !g.gcd(&n).is_one() {
            return Err(Error::Integrity("generator out of range or not coprime to n".into()));
        }
        Ok(PublicKey {
            scheme,
            n,
            g,
            h,
            security_bits,
            modulus: Arc::new(modulus),
            n_s,
            plaintext_space,
        })
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn n(&self) -> &Integer {
        &self.n
    }

    pub fn g(&self) -> &Integer {
        &self.g
    }

    pub fn h(&self) -> Option<&Integer> {
        self.h.as_ref()
    }

    /// Nominal security level; 0 for keys built from explicit primes.
    pub fn security_bits(&self) -> u32 {
        self.security_bits
    }

    pub fn ciphertext_modulus(&self) -> &Integer {
        &self.modulus
    }

    /// Largest exclusive message bound that is public: `n` for Paillier,
    /// `n^s` for Damgård-Jurik and `2^(b-1) <= p` for Okamoto-Uchiyama with
    /// `b`-bit primes (the true message space `Z_p` is secret).
    pub fn plaintext_space(&self) -> &Integer {
        &self.plaintext_space
    }

    /// Hex SHA-256 of the canonical public key serialization.
    pub fn fingerprint(&self) -> String {
        crate::keystore::public_fingerprint(self)
    }

    /// Wraps a raw value as a ciphertext under this key after range checks.
    pub fn ciphertext(&self, value: Integer) -> Result<Ciphertext> {
        if value.is_zero() || value >= *self.modulus {
            return Err(Error::InvalidCiphertext("value outside (0, modulus)".into()));
        }
        Ok(Ciphertext {
            scheme: self.scheme,
            value,
            modulus: Arc::clone(&self.modulus),
        })
    }

    pub(crate) fn random_nonce<R: RandomSource + ?Sized>(&self, rng: &mut R) -> Result<Integer> {
        loop {
            let r = random_below(&self.n, rng)?;
            if self.scheme == SchemeId::OkamotoUchiyama || r.gcd(&self.n).is_one() {
                return Ok(r);
            }
        }
    }

    pub fn encrypt<R: RandomSource + ?Sized>(&self, m: &Integer, rng: &mut R) -> Result<Ciphertext> {
        if *m >= self.plaintext_space {
            return Err(Error::MessageTooLarge);
        }
        let r = self.random_nonce(rng)?;
        self.encrypt_with_randomness(m, &r)
    }

    /// Encryption with caller-chosen randomness `r`. Only the public message
    /// bound is enforced.
    pub fn encrypt_with_randomness(&self, m: &Integer, r: &Integer) -> Result<Ciphertext> {
        if *m >= self.plaintext_space {
            return Err(Error::MessageTooLarge);
        }
        self.encrypt_unchecked(m, r)
    }

    fn encrypt_unchecked(&self, m: &Integer, r: &Integer) -> Result<Ciphertext> {
        if r.is_zero() || *r >= self.n {
            return Err(Error::InvalidArgument("randomness must lie in [1, n)".into()));
        }
        let value = match self.scheme {
            SchemeId::Paillier => paillier::encrypt(&self.g, &self.n, &self.modulus, m, r),
            SchemeId::DamgardJurik { s } => {
                damgard_jurik::encrypt(&self.g, &self.n, s, &self.n_s, &self.modulus, m, r)
            }
            SchemeId::OkamotoUchiyama => {
                let h = self.h.as_ref().expect("validated at construction");
                okamoto_uchiyama::encrypt(&self.g, h, &self.n, m, r)
            }
        };
        self.ciphertext(value)
    }

    fn check_operand(&self, c: &Ciphertext) -> Result<()> {
        if c.scheme != self.scheme {
            return Err(Error::SchemeMismatch(format!(
                "ciphertext is {} but key is {}",
                c.scheme, self.scheme
            )));
        }
        if *c.modulus != *self.modulus {
            return Err(Error::SchemeMismatch("ciphertext modulus differs from key".into()));
        }
        Ok(())
    }

    /// Homomorphic addition: the product of the ciphertexts.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_operand(a)?;
        self.check_operand(b)?;
        Ok(Ciphertext {
            scheme: self.scheme,
            value: &a.value * &b.value % &*self.modulus,
            modulus: Arc::clone(&self.modulus),
        })
    }

    /// Plaintext scalar multiplication: the ciphertext raised to `k`.
    /// `k = 0` yields the trivial encryption of zero, the value 1.
    pub fn scalar_mul(&self, c: &Ciphertext, k: &Integer) -> Result<Ciphertext> {
        self.check_operand(c)?;
        Ok(Ciphertext {
            scheme: self.scheme,
            value: c.value.modpow(k, &self.modulus),
            modulus: Arc::clone(&self.modulus),
        })
    }

    /// Signed entry point for scalars; negative values are rejected.
    pub fn scalar_mul_signed(&self, c: &Ciphertext, k: &BigInt) -> Result<Ciphertext> {
        let k = k.to_biguint().ok_or(Error::UnsupportedScalar)?;
        self.scalar_mul(c, &k)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    scheme: SchemeId,
    p: Integer,
    q: Integer,
    lambda: Option<Integer>,
    mu: Option<Integer>,
    gp_inv_l: Option<Integer>,
    n: Integer,
    n_s: Integer,
    modulus: Arc<Integer>,
}

impl SecretKey {
    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn p(&self) -> &Integer {
        &self.p
    }

    pub fn q(&self) -> &Integer {
        &self.q
    }

    /// `lcm(p - 1, q - 1)` for Paillier and Damgård-Jurik.
    pub fn lambda(&self) -> Option<&Integer> {
        self.lambda.as_ref()
    }

    /// Precomputed inverse used by Paillier and Damgård-Jurik decryption.
    pub fn mu(&self) -> Option<&Integer> {
        self.mu.as_ref()
    }

    /// `L(g^(p-1) mod p^2)^-1 mod p` for Okamoto-Uchiyama.
    pub fn gp_inv_l(&self) -> Option<&Integer> {
        self.gp_inv_l.as_ref()
    }

    /// The modulus the decrypted message is reduced by: `n`, `n^s` or `p`.
    pub fn message_modulus(&self) -> &Integer {
        match self.scheme {
            SchemeId::OkamotoUchiyama => &self.p,
            _ => &self.n_s,
        }
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<Integer> {
        if c.scheme != self.scheme {
            return Err(Error::SchemeMismatch(format!(
                "ciphertext is {} but key is {}",
                c.scheme, self.scheme
            )));
        }
        if *c.modulus != *self.modulus {
            return Err(Error::SchemeMismatch("ciphertext modulus differs from key".into()));
        }
        if !c.value.gcd(&self.n).is_one() {
            return Err(Error::InvalidCiphertext("value shares a factor with n".into()));
        }
        let value = &c.value;
        Ok(match self.scheme {
            SchemeId::Paillier => {
                let (lambda, mu) = self.paillier_constants();
                paillier::decrypt(value, lambda, mu, &self.n, &self.modulus)
            }
            SchemeId::DamgardJurik { s } => {
                let (lambda, mu) = self.paillier_constants();
                damgard_jurik::decrypt(value, lambda, mu, &self.n, s, &self.n_s, &self.modulus)
            }
            SchemeId::OkamotoUchiyama => {
                let gp_inv_l = self.gp_inv_l.as_ref().expect("set for Okamoto-Uchiyama");
                okamoto_uchiyama::decrypt(value, &self.p, &(&self.p * &self.p), gp_inv_l)
            }
        })
    }

    fn paillier_constants(&self) -> (&Integer, &Integer) {
        (
            self.lambda.as_ref().expect("set for Paillier and Damgård-Jurik"),
            self.mu.as_ref().expect("set for Paillier and Damgård-Jurik"),
        )
    }
}

/// Residues modulo two coprime factors of the ciphertext modulus, combined
/// with Garner's formula.
#[derive(Clone, Debug)]
struct CrtEncryptor {
    m1: Integer,
    m2: Integer,
    /// Orders of the unit groups modulo `m1` and `m2`, for exponent reduction.
    order1: Integer,
    order2: Integer,
    m1_inv: Integer,
}

impl CrtEncryptor {
    fn new(m1: Integer, order1: Integer, m2: Integer, order2: Integer) -> Self {
        let m1_inv = (&m1 % &m2).modinv(&m2).expect("coprime CRT moduli");
        CrtEncryptor {
            m1,
            m2,
            order1,
            order2,
            m1_inv,
        }
    }

    /// `base^exp` modulo `m1 * m2` for `base` coprime to both.
    fn pow(&self, base: &Integer, exp: &Integer) -> (Integer, Integer) {
        (
            base.modpow(&(exp % &self.order1), &self.m1),
            base.modpow(&(exp % &self.order2), &self.m2),
        )
    }

    fn combine(&self, x1: &Integer, x2: &Integer) -> Integer {
        let x1_mod_m2 = x1 % &self.m2;
        let diff = (x2 + &self.m2 - x1_mod_m2) % &self.m2;
        x1 + &self.m1 * (diff * &self.m1_inv % &self.m2)
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    public: PublicKey,
    secret: SecretKey,
    crt: CrtEncryptor,
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.secret == other.secret
    }
}

impl Eq for KeyPair {}

impl KeyPair {
    /// Generates a key pair at 80- or 112-bit security.
    pub fn keygen<R: RandomSource + ?Sized>(scheme: SchemeId, security_bits: u32, rng: &mut R) -> Result<Self> {
        let prime_bits = prime_bits_for_security(security_bits)?;
        Self::keygen_with_prime_bits(scheme, prime_bits, security_bits, rng)
    }

    /// Generates a key pair from `prime_bits`-bit primes, bypassing the
    /// security mapping. `security_bits` is recorded as a label only.
    pub fn keygen_with_prime_bits<R: RandomSource + ?Sized>(
        scheme: SchemeId,
        prime_bits: u64,
        security_bits: u32,
        rng: &mut R,
    ) -> Result<Self> {
        if let SchemeId::DamgardJurik { s } = scheme {
            SchemeId::damgard_jurik(s)?;
        }
        match scheme {
            SchemeId::Paillier | SchemeId::DamgardJurik { .. } => loop {
                let p = generate_prime_with_top_bits(prime_bits, 2, rng)?;
                let q = generate_prime_with_top_bits(prime_bits, 2, rng)?;
                if p == q {
                    continue;
                }
                let n = &p * &q;
                let phi = (&p - 1u32) * (&q - 1u32);
                if !n.gcd(&phi).is_one() {
                    continue;
                }
                let g = &n + 1u32;
                return Self::from_parts(scheme, p, q, g, security_bits);
            },
            SchemeId::OkamotoUchiyama => loop {
                let p = generate_prime_with_top_bits(prime_bits, 2, rng)?;
                let q = generate_prime_with_top_bits(prime_bits, 2, rng)?;
                if p == q {
                    continue;
                }
                let n = &p * &p * &q;
                if n.bits() != 3 * prime_bits {
                    continue;
                }
                let g = Self::okamoto_generator(&p, &n, rng)?;
                return Self::from_parts(scheme, p, q, g, security_bits);
            },
        }
    }

    /// Key pair from explicit primes with the default generator
    /// (`n + 1`, or a random valid `g` for Okamoto-Uchiyama).
    pub fn from_primes<R: RandomSource + ?Sized>(scheme: SchemeId, p: Integer, q: Integer, rng: &mut R) -> Result<Self> {
        let g = match scheme {
            SchemeId::OkamotoUchiyama => Self::okamoto_generator(&p, &(&p * &p * &q), rng)?,
            _ => &p * &q + 1u32,
        };
        Self::from_parts(scheme, p, q, g, 0)
    }

    fn okamoto_generator<R: RandomSource + ?Sized>(p: &Integer, n: &Integer, rng: &mut R) -> Result<Integer> {
        for _ in 0..10_000 {
            let g = random_below(n, rng)?;
            if g > Integer::one() && g.gcd(n).is_one() && okamoto_uchiyama::decryption_constant(&g, p).is_some() {
                return Ok(g);
            }
        }
        Err(Error::InvalidArgument("no usable Okamoto-Uchiyama generator found".into()))
    }

    /// Assembles and validates a key pair, deriving every precomputed constant.
    pub fn from_parts(scheme: SchemeId, p: Integer, q: Integer, g: Integer, security_bits: u32) -> Result<Self> {
        // deterministic witnesses keep validation reproducible
        let mut witness_rng = seeded_rng(0x5eed);
        for prime in [&p, &q] {
            if !is_probable_prime(prime, 20, &mut witness_rng) {
                return Err(Error::Integrity(format!("{prime} is not prime")));
            }
        }
        if p == q {
            return Err(Error::Integrity("p and q must differ".into()));
        }
        let s = scheme.level();
        match scheme {
            SchemeId::Paillier | SchemeId::DamgardJurik { .. } => {
                let n = &p * &q;
                let p1 = &p - 1u32;
                let q1 = &q - 1u32;
                if !n.gcd(&(&p1 * &q1)).is_one() {
                    return Err(Error::Integrity("gcd(n, (p-1)(q-1)) != 1".into()));
                }
                let lambda = lcm(&p1, &q1)?;
                let public = PublicKey::new(scheme, n.clone(), g, None, security_bits)?;
                let mu = match scheme {
                    SchemeId::Paillier => paillier::decryption_constant(&public.g, &lambda, &n),
                    _ => damgard_jurik::decryption_constant(&public.g, &lambda, &n, s),
                }
                .ok_or_else(|| Error::Integrity("generator yields no decryption constant".into()))?;
                let p_pow = p.pow(s + 1);
                let q_pow = q.pow(s + 1);
                let crt = CrtEncryptor::new(
                    p_pow.clone(),
                    p.pow(s) * &p1,
                    q_pow.clone(),
                    q.pow(s) * &q1,
                );
                let secret = SecretKey {
                    scheme,
                    p,
                    q,
                    lambda: Some(lambda),
                    mu: Some(mu),
                    gp_inv_l: None,
                    n,
                    n_s: public.n_s.clone(),
                    modulus: Arc::clone(&public.modulus),
                };
                Ok(KeyPair { public, secret, crt })
            }
            SchemeId::OkamotoUchiyama => {
                let p_squared = &p * &p;
                let n = &p_squared * &q;
                let gp_inv_l = okamoto_uchiyama::decryption_constant(&g, &p)
                    .ok_or_else(|| Error::Integrity("g^(p-1) = 1 mod p^2".into()))?;
                let h = g.modpow(&n, &n);
                let public = PublicKey::new(scheme, n.clone(), g, Some(h), security_bits)?;
                let crt = CrtEncryptor::new(p_squared, &p * (&p - 1u32), q.clone(), &q - 1u32);
                let secret = SecretKey {
                    scheme,
                    p,
                    q,
                    lambda: None,
                    mu: None,
                    gp_inv_l: Some(gp_inv_l),
                    n: n.clone(),
                    n_s: n,
                    modulus: Arc::clone(&public.modulus),
                };
                Ok(KeyPair { public, secret, crt })
            }
        }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn secret(&self) -> &SecretKey {
        &self.secret
    }

    pub fn into_public(self) -> PublicKey {
        self.public
    }

    /// Encrypts any `m` below the exact message modulus using the factorization.
    pub fn encrypt<R: RandomSource + ?Sized>(&self, m: &Integer, rng: &mut R) -> Result<Ciphertext> {
        let r = self.public.random_nonce(rng)?;
        self.encrypt_with_randomness(m, &r)
    }

    /// CRT equivalent of [`PublicKey::encrypt_with_randomness`]; the result is
    /// bit-identical for the same `r`.
    pub fn encrypt_with_randomness(&self, m: &Integer, r: &Integer) -> Result<Ciphertext> {
        if *m >= *self.secret.message_modulus() {
            return Err(Error::MessageTooLarge);
        }
        let pk = &self.public;
        if r.is_zero() || *r >= pk.n {
            return Err(Error::InvalidArgument("randomness must lie in [1, n)".into()));
        }
        let value = match pk.scheme {
            SchemeId::Paillier | SchemeId::DamgardJurik { .. } => {
                if !r.gcd(&pk.n).is_one() {
                    return pk.encrypt_unchecked(m, r);
                }
                let (x1, x2) = self.crt.pow(r, &pk.n_s);
                let noise = self.crt.combine(&x1, &x2);
                let gm = match pk.scheme {
                    SchemeId::Paillier => paillier::generator_power(&pk.g, m, &pk.n, &pk.modulus),
                    SchemeId::DamgardJurik { s } => {
                        damgard_jurik::generator_power(&pk.g, m, &pk.n, s, &pk.modulus)
                    }
                    SchemeId::OkamotoUchiyama => unreachable!(),
                };
                gm * noise % &*pk.modulus
            }
            SchemeId::OkamotoUchiyama => {
                if !r.gcd(&pk.n).is_one() {
                    return pk.encrypt_unchecked(m, r);
                }
                let h = pk.h.as_ref().expect("validated at construction");
                let (g1, g2) = self.crt.pow(&pk.g, m);
                let (h1, h2) = self.crt.pow(h, r);
                let x1 = g1 * h1 % &self.crt.m1;
                let x2 = g2 * h2 % &self.crt.m2;
                self.crt.combine(&x1, &x2)
            }
        };
        pk.ciphertext(value)
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<Integer> {
        self.secret.decrypt(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::seeded_rng;
    use rand::Rng;

    fn big(v: u64) -> Integer {
        Integer::from(v)
    }

    fn schemes() -> [SchemeId; 3] {
        [SchemeId::Paillier, SchemeId::DamgardJurik { s: 2 }, SchemeId::OkamotoUchiyama]
    }

    fn random_message<R: RandomSource>(kp: &KeyPair, rng: &mut R) -> Integer {
        let bound = kp.public().plaintext_space();
        crate::arithmetic::random_bits(bound.bits() + 8, rng) % bound
    }

    #[test]
    fn toy_paillier_encryption() {
        let mut rng = seeded_rng(0);
        let kp = KeyPair::from_parts(SchemeId::Paillier, big(11), big(13), big(144), 0).unwrap();
        assert_eq!(kp.public().plaintext_space(), &big(143));
        let c = kp.public().encrypt_with_randomness(&big(5), &big(7)).unwrap();
        let oracle = big(144).modpow(&big(5), &big(20449)) * big(7).modpow(&big(143), &big(20449)) % big(20449);
        assert_eq!(c.value(), &oracle);
        assert_eq!(kp.decrypt(&c).unwrap(), big(5));
        assert_eq!(kp.encrypt_with_randomness(&big(5), &big(7)).unwrap(), c);
        let c2 = kp.public().encrypt(&big(0), &mut rng).unwrap();
        assert_eq!(kp.decrypt(&c2).unwrap(), big(0));
    }

    #[test]
    fn toy_damgard_jurik_plaintext_space() {
        let kp = KeyPair::from_parts(SchemeId::DamgardJurik { s: 2 }, big(11), big(13), big(144), 0).unwrap();
        assert_eq!(kp.public().plaintext_space(), &big(20449));
        assert_eq!(kp.public().ciphertext_modulus(), &big(143u64.pow(3)));
        for m in [0u64, 1, 143, 20448] {
            let c = kp.public().encrypt_with_randomness(&big(m), &big(2)).unwrap();
            assert_eq!(kp.decrypt(&c).unwrap(), big(m));
        }
    }

    #[test]
    fn toy_okamoto_uchiyama_full_space() {
        let mut rng = seeded_rng(5);
        let kp = KeyPair::from_primes(SchemeId::OkamotoUchiyama, big(7), big(11), &mut rng).unwrap();
        assert_eq!(kp.public().n(), &big(539));
        for m in 0..7u64 {
            for _ in 0..5 {
                let c = kp.encrypt(&big(m), &mut rng).unwrap();
                assert_eq!(kp.decrypt(&c).unwrap(), big(m));
            }
        }
        assert!(matches!(kp.encrypt(&big(7), &mut rng), Err(Error::MessageTooLarge)));
    }

    #[test]
    fn keygen_modulus_sizes() {
        let mut rng = seeded_rng(80);
        let p = KeyPair::keygen(SchemeId::Paillier, 80, &mut rng).unwrap();
        assert_eq!(p.public().n().bits(), 1024);
        let ou = KeyPair::keygen(SchemeId::OkamotoUchiyama, 80, &mut rng).unwrap();
        assert_eq!(ou.public().n().bits(), 1536);
        assert_eq!(ou.public().plaintext_space(), &(Integer::one() << 511));
        assert!(matches!(
            KeyPair::keygen(SchemeId::Paillier, 100, &mut rng),
            Err(Error::UnsupportedSecurity(100))
        ));
    }

    #[test]
    fn dj_s1_behaves_like_paillier() {
        let mut rng = seeded_rng(1);
        let pk = KeyPair::keygen_with_prime_bits(SchemeId::Paillier, 128, 0, &mut rng).unwrap();
        let (p, q) = (pk.secret().p().clone(), pk.secret().q().clone());
        let dj = KeyPair::from_parts(SchemeId::DamgardJurik { s: 1 }, p, q, pk.public().g().clone(), 0).unwrap();
        for _ in 0..100 {
            let m = random_message(&pk, &mut rng);
            let r = pk.public().random_nonce(&mut rng).unwrap();
            let a = pk.public().encrypt_with_randomness(&m, &r).unwrap();
            let b = dj.public().encrypt_with_randomness(&m, &r).unwrap();
            assert_eq!(a.value(), b.value());
            assert_eq!(pk.decrypt(&a).unwrap(), dj.decrypt(&b).unwrap());
        }
    }

    #[test]
    fn homomorphic_laws_small_keys() {
        let mut rng = seeded_rng(2);
        for scheme in schemes() {
            let kp = KeyPair::keygen_with_prime_bits(scheme, 96, 0, &mut rng).unwrap();
            let pk = kp.public();
            let space = kp.secret().message_modulus().clone();
            let c2 = pk.encrypt(&big(2), &mut rng).unwrap();
            let c3 = pk.encrypt(&big(3), &mut rng).unwrap();
            assert_eq!(kp.decrypt(&pk.add(&c2, &c3).unwrap()).unwrap(), big(5));
            let c7 = pk.encrypt(&big(7), &mut rng).unwrap();
            assert_eq!(kp.decrypt(&pk.scalar_mul(&c7, &big(3)).unwrap()).unwrap(), big(21));
            assert_eq!(kp.decrypt(&pk.scalar_mul(&c7, &big(1)).unwrap()).unwrap(), big(7));
            assert_eq!(kp.decrypt(&pk.scalar_mul(&c7, &big(0)).unwrap()).unwrap(), big(0));
            for _ in 0..100 {
                let m1 = random_message(&kp, &mut rng);
                let m2 = random_message(&kp, &mut rng);
                let k = big(rng.gen());
                let e1 = pk.encrypt(&m1, &mut rng).unwrap();
                let e2 = kp.encrypt(&m2, &mut rng).unwrap();
                let zero = pk.encrypt(&big(0), &mut rng).unwrap();
                assert_eq!(kp.decrypt(&pk.add(&e1, &e2).unwrap()).unwrap(), (&m1 + &m2) % &space);
                assert_eq!(kp.decrypt(&pk.add(&zero, &e1).unwrap()).unwrap(), m1);
                assert_eq!(kp.decrypt(&pk.scalar_mul(&e1, &k).unwrap()).unwrap(), &k * &m1 % &space);
            }
        }
    }

    #[test]
    fn crt_encryption_is_bit_identical() {
        let mut rng = seeded_rng(3);
        for scheme in schemes() {
            let kp = KeyPair::keygen_with_prime_bits(scheme, 96, 0, &mut rng).unwrap();
            for _ in 0..20 {
                let m = random_message(&kp, &mut rng);
                let r = kp.public().random_nonce(&mut rng).unwrap();
                assert_eq!(
                    kp.encrypt_with_randomness(&m, &r).unwrap(),
                    kp.public().encrypt_with_randomness(&m, &r).unwrap()
                );
            }
        }
    }

    #[test]
    fn probabilistic_encryption() {
        let mut rng = seeded_rng(4);
        for scheme in schemes() {
            let kp = KeyPair::keygen_with_prime_bits(scheme, 64, 0, &mut rng).unwrap();
            let a = kp.public().encrypt(&big(42), &mut rng).unwrap();
            let b = kp.public().encrypt(&big(42), &mut rng).unwrap();
            assert_ne!(a, b);
            assert_eq!(kp.decrypt(&a).unwrap(), kp.decrypt(&b).unwrap());
        }
    }

    #[test]
    fn boundary_messages_roundtrip() {
        let mut rng = seeded_rng(6);
        for scheme in schemes() {
            let kp = KeyPair::keygen_with_prime_bits(scheme, 64, 0, &mut rng).unwrap();
            let top = kp.public().plaintext_space() - 1u32;
            for m in [big(0), big(1), top] {
                let c = kp.public().encrypt(&m, &mut rng).unwrap();
                assert_eq!(kp.decrypt(&c).unwrap(), m);
            }
            let too_big = kp.public().plaintext_space().clone();
            assert!(matches!(kp.public().encrypt(&too_big, &mut rng), Err(Error::MessageTooLarge)));
        }
    }

    #[test]
    fn ciphertext_size_bounds() {
        let mut rng = seeded_rng(7);
        for (scheme, factor) in [
            (SchemeId::Paillier, 2),
            (SchemeId::DamgardJurik { s: 2 }, 3),
            (SchemeId::DamgardJurik { s: 3 }, 4),
        ] {
            let kp = KeyPair::keygen_with_prime_bits(scheme, 64, 0, &mut rng).unwrap();
            let c = kp.public().encrypt(&big(9), &mut rng).unwrap();
            assert!(c.value().bits() <= factor * kp.public().n().bits());
        }
        let kp = KeyPair::keygen_with_prime_bits(SchemeId::OkamotoUchiyama, 64, 0, &mut rng).unwrap();
        let c = kp.public().encrypt(&big(9), &mut rng).unwrap();
        assert!(c.value().bits() <= kp.public().n().bits());
    }

    #[test]
    fn mismatched_operands_are_rejected() {
        let mut rng = seeded_rng(8);
        let a = KeyPair::keygen_with_prime_bits(SchemeId::Paillier, 64, 0, &mut rng).unwrap();
        let b = KeyPair::keygen_with_prime_bits(SchemeId::Paillier, 64, 0, &mut rng).unwrap();
        let ou = KeyPair::keygen_with_prime_bits(SchemeId::OkamotoUchiyama, 64, 0, &mut rng).unwrap();
        let ca = a.public().encrypt(&big(1), &mut rng).unwrap();
        let cb = b.public().encrypt(&big(1), &mut rng).unwrap();
        let cou = ou.public().encrypt(&big(1), &mut rng).unwrap();
        assert!(matches!(a.public().add(&ca, &cb), Err(Error::SchemeMismatch(_))));
        assert!(matches!(a.public().add(&ca, &cou), Err(Error::SchemeMismatch(_))));
        assert!(matches!(a.decrypt(&cou), Err(Error::SchemeMismatch(_))));
        assert!(matches!(
            a.public().scalar_mul_signed(&ca, &BigInt::from(-3)),
            Err(Error::UnsupportedScalar)
        ));
        let ok = a.public().scalar_mul_signed(&ca, &BigInt::from(4)).unwrap();
        assert_eq!(a.decrypt(&ok).unwrap(), big(4));
    }

    #[test]
    fn composition_of_additions() {
        let mut rng = seeded_rng(9);
        for scheme in schemes() {
            let kp = KeyPair::keygen_with_prime_bits(scheme, 64, 0, &mut rng).unwrap();
            let pk = kp.public();
            let [a, b, c] = [11u64, 22, 33].map(|m| pk.encrypt(&big(m), &mut rng).unwrap());
            let left = pk.add(&pk.add(&a, &b).unwrap(), &c).unwrap();
            let right = pk.add(&a, &pk.add(&b, &c).unwrap()).unwrap();
            assert_eq!(left, right);
            assert_eq!(kp.decrypt(&left).unwrap(), big(66));
        }
    }

    #[test]
    fn scheme_names_roundtrip() {
        for scheme in schemes() {
            assert_eq!(SchemeId::from_name(scheme.name(), Some(2)).unwrap(), scheme);
        }
        assert!(matches!(SchemeId::from_name("rsa", None), Err(Error::UnknownScheme(n)) if n == "rsa"));
        assert!(SchemeId::damgard_jurik(0).is_err());
    }
}
