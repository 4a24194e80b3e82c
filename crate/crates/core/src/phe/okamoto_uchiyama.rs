//! Okamoto-Uchiyama over `n = p^2 q`: `c = g^m * h^r mod n` with `h = g^n mod n`.

use crate::arithmetic::Integer;

pub(crate) fn encrypt(g: &Integer, h: &Integer, n: &Integer, m: &Integer, r: &Integer) -> Integer {
    g.modpow(m, n) * h.modpow(r, n) % n
}

/// `L(x) = (x - 1) / p`
pub(crate) fn l_function(x: &Integer, p: &Integer) -> Integer {
    (x - 1u32) / p
}

/// `L(g^(p-1) mod p^2)^-1 mod p`, or `None` when `g` is unusable.
pub(crate) fn decryption_constant(g: &Integer, p: &Integer) -> Option<Integer> {
    let p_squared = p * p;
    let x = g.modpow(&(p - 1u32), &p_squared);
    if x.clone() % p != Integer::from(1u32) {
        return None;
    }
    l_function(&x, p).modinv(p)
}

pub(crate) fn decrypt(c: &Integer, p: &Integer, p_squared: &Integer, gp_inv_l: &Integer) -> Integer {
    let x = c.modpow(&(p - 1u32), p_squared);
    l_function(&x, p) * gp_inv_l % p
}
