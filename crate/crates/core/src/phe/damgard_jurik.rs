//! Damgård-Jurik: `c = g^m * r^(n^s) mod n^(s+1)`.
//!
//! Decryption raises the ciphertext to `lambda`, leaving `(1 + n)^(lambda*m)`,
//! and recovers the exponent base-`n` digit by digit.

use num_traits::{One, Zero};

use crate::arithmetic::Integer;

/// `(1 + n)^m mod n^(s+1)` via the binomial expansion `sum_k C(m, k) n^k`,
/// which terminates at `k = s` because `n^(s+1)` vanishes.
pub(crate) fn one_plus_n_power(m: &Integer, n: &Integer, s: u32, modulus: &Integer) -> Integer {
    let mut acc = Integer::one();
    let mut binom = Integer::one();
    let mut n_pow = Integer::one();
    for k in 1..=s {
        let k_big = Integer::from(k);
        if *m < k_big {
            break;
        }
        binom = binom * (m + 1u32 - &k_big) / &k_big;
        n_pow *= n;
        acc += &binom * &n_pow;
    }
    acc % modulus
}

pub(crate) fn generator_power(g: &Integer, m: &Integer, n: &Integer, s: u32, modulus: &Integer) -> Integer {
    if *g == n + 1u32 {
        one_plus_n_power(m, n, s, modulus)
    } else {
        g.modpow(m, modulus)
    }
}

pub(crate) fn encrypt(
    g: &Integer,
    n: &Integer,
    s: u32,
    n_s: &Integer,
    modulus: &Integer,
    m: &Integer,
    r: &Integer,
) -> Integer {
    generator_power(g, m, n, s, modulus) * r.modpow(n_s, modulus) % modulus
}

/// Recovers `i mod n^s` from `a = (1 + n)^i mod n^(s+1)`.
pub(crate) fn discrete_log_one_plus_n(a: &Integer, n: &Integer, s: u32) -> Integer {
    let mut i = Integer::zero();
    let mut n_j = n.clone();
    for j in 1..=s {
        let n_j1 = &n_j * n;
        let mut t1 = ((a % &n_j1) - 1u32) / n;
        let mut t2 = i.clone();
        let mut factorial = Integer::one();
        let mut n_pow = Integer::one();
        for k in 2..=j {
            i = (i + &n_j - 1u32) % &n_j;
            t2 = t2 * &i % &n_j;
            factorial *= k;
            n_pow *= n;
            let inv = factorial
                .modinv(&n_j)
                .expect("k! is invertible modulo n^j for any n without factors <= s");
            let sub = &t2 * &n_pow % &n_j * inv % &n_j;
            t1 = (t1 + &n_j - sub) % &n_j;
        }
        i = t1;
        n_j = n_j1;
    }
    i
}

/// `mu = dlog(g^lambda)^-1 mod n^s`; equals `lambda^-1` when `g = n + 1`.
pub(crate) fn decryption_constant(g: &Integer, lambda: &Integer, n: &Integer, s: u32) -> Option<Integer> {
    let n_s = n.pow(s);
    let modulus = &n_s * n;
    discrete_log_one_plus_n(&g.modpow(lambda, &modulus), n, s).modinv(&n_s)
}

pub(crate) fn decrypt(c: &Integer, lambda: &Integer, mu: &Integer, n: &Integer, s: u32, n_s: &Integer, modulus: &Integer) -> Integer {
    let a = c.modpow(lambda, modulus);
    discrete_log_one_plus_n(&a, n, s) * mu % n_s
}
