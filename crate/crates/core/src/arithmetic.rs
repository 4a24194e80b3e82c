//! Arbitrary-precision modular arithmetic and prime generation.
//!
//! Exponentiation and inversion are delegated to `num-bigint`; primality
//! testing is Miller-Rabin over random bases.

use num_bigint::BigUint;
use num_integer::Integer as _;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Unbounded nonnegative integer used for every key, message and ciphertext.
pub type Integer = BigUint;

/// Number of Miller-Rabin rounds used by [`generate_prime`].
pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Smallest prime size accepted by [`generate_prime`].
pub const MIN_PRIME_BITS: u64 = 16;

/// Random source accepted by every randomized operation.
pub trait RandomSource: RngCore + CryptoRng {}

impl<T: RngCore + CryptoRng> RandomSource for T {}

/// Deterministic random source for tests and reproducible runs.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random source backed by operating system entropy.
pub fn os_rng() -> rand::rngs::OsRng {
    rand::rngs::OsRng
}

pub fn mod_pow(base: &Integer, exponent: &Integer, modulus: &Integer) -> Result<Integer> {
    if *modulus < Integer::from(2u32) {
        return Err(Error::InvalidModulus);
    }
    Ok(base.modpow(exponent, modulus))
}

pub fn mod_inverse(a: &Integer, modulus: &Integer) -> Result<Integer> {
    if *modulus < Integer::from(2u32) {
        return Err(Error::InvalidModulus);
    }
    a.modinv(modulus).ok_or(Error::NotInvertible)
}

pub fn lcm(a: &Integer, b: &Integer) -> Result<Integer> {
    if a.is_zero() || b.is_zero() {
        return Err(Error::InvalidArgument("lcm of zero".into()));
    }
    Ok(a.lcm(b))
}

/// Uniform sample of exactly `bits` random bits (top bit not forced).
pub(crate) fn random_bits<R: RandomSource + ?Sized>(bits: u64, rng: &mut R) -> Integer {
    let bytes = bits.div_ceil(8) as usize;
    let mut buf = vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    let excess = (bytes as u64 * 8 - bits) as u32;
    if excess > 0 {
        buf[0] &= 0xffu8 >> excess;
    }
    Integer::from_bytes_be(&buf)
}

/// Uniform integer in `[1, bound)` by rejection sampling.
pub fn random_below<R: RandomSource + ?Sized>(bound: &Integer, rng: &mut R) -> Result<Integer> {
    if *bound < Integer::from(2u32) {
        return Err(Error::InvalidArgument("random bound must be at least 2".into()));
    }
    let bits = bound.bits();
    loop {
        let x = random_bits(bits, rng);
        if !x.is_zero() && x < *bound {
            return Ok(x);
        }
    }
}

const SMALL_PRIMES: [u32; 53] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Miller-Rabin probable-prime test with `rounds` random bases.
pub fn is_probable_prime<R: RandomSource + ?Sized>(n: &Integer, rounds: usize, rng: &mut R) -> bool {
    let two = Integer::from(2u32);
    if *n < two {
        return false;
    }
    if *n == two {
        return true;
    }
    if n.is_even() {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        let p = Integer::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let one = Integer::one();
    let n_minus_one = n - &one;
    let twos = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> twos;
    // bases drawn from [2, n-2]
    let base_bound = n - &two;
    'witness: for _ in 0..rounds {
        let a = loop {
            let a = random_bits(n.bits(), rng);
            if a >= two && a < base_bound {
                break a;
            }
        };
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..twos {
            x = &x * &x % n;
            if x == n_minus_one {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

pub fn generate_prime<R: RandomSource + ?Sized>(bits: u64, rng: &mut R) -> Result<Integer> {
    generate_prime_with_top_bits(bits, 1, rng)
}

/// Prime with the `top` most significant bits set. Two top bits guarantee
/// that the product of two such `b`-bit primes has exactly `2b` bits.
pub(crate) fn generate_prime_with_top_bits<R: RandomSource + ?Sized>(
    bits: u64,
    top: u64,
    rng: &mut R,
) -> Result<Integer> {
    if bits < MIN_PRIME_BITS {
        return Err(Error::PrimeTooSmall(bits));
    }
    loop {
        let mut candidate = random_bits(bits, rng);
        for i in 0..top {
            candidate.set_bit(bits - 1 - i, true);
        }
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return Ok(candidate);
        }
    }
}
