//! Paillier: `c = g^m * r^n mod n^2`.

use num_traits::One;

use crate::arithmetic::Integer;

/// `g^m mod n^2`, using `(1 + n)^m = 1 + m*n` when `g = n + 1`.
pub(crate) fn generator_power(g: &Integer, m: &Integer, n: &Integer, n_squared: &Integer) -> Integer {
    if *g == n + 1u32 {
        (Integer::one() + m * n) % n_squared
    } else {
        g.modpow(m, n_squared)
    }
}

pub(crate) fn encrypt(g: &Integer, n: &Integer, n_squared: &Integer, m: &Integer, r: &Integer) -> Integer {
    let gm = generator_power(g, m, n, n_squared);
    gm * r.modpow(n, n_squared) % n_squared
}

/// `L(x) = (x - 1) / n`
pub(crate) fn l_function(x: &Integer, n: &Integer) -> Integer {
    (x - 1u32) / n
}

/// `mu = L(g^lambda mod n^2)^-1 mod n`
pub(crate) fn decryption_constant(g: &Integer, lambda: &Integer, n: &Integer) -> Option<Integer> {
    let n_squared = n * n;
    l_function(&g.modpow(lambda, &n_squared), n).modinv(n)
}

/// `m = L(c^lambda mod n^2) * mu mod n`
pub(crate) fn decrypt(c: &Integer, lambda: &Integer, mu: &Integer, n: &Integer, n_squared: &Integer) -> Integer {
    l_function(&c.modpow(lambda, n_squared), n) * mu % n
}
