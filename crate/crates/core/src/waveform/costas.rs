//! Costas permutations.
//!
//! Orders `p - 1` and `p - 2` come from the Welch exponential construction
//! over a prime `p`; the few low orders not reachable that way are tabulated.

use crate::{Error, Result};

/// Largest order offered by [`supported_orders`].
pub const MAX_ORDER: usize = 1024;

// Found by exhaustive search and re-checked by `is_costas` in the tests.
const TABLE: &[&[usize]] = &[
    &[0, 2, 1],
    &[2, 1, 3, 0],
    &[0, 1, 5, 3, 6, 2, 4],
    &[0, 1, 4, 6, 5, 3, 7, 2],
    &[0, 1, 3, 8, 12, 5, 11, 10, 6, 4, 7, 2, 9],
    &[0, 1, 4, 6, 13, 7, 11, 10, 5, 3, 12, 9, 2, 8],
];

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn pow_mod(base: usize, mut exp: usize, p: usize) -> usize {
    let (mut acc, mut b) = (1usize, base % p);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        exp >>= 1;
    }
    acc
}

fn primitive_root(p: usize) -> usize {
    let phi = p - 1;
    let mut factors = Vec::new();
    let mut n = phi;
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            factors.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    (2..p)
        .find(|&g| factors.iter().all(|&q| pow_mod(g, phi / q, p) != 1))
        .unwrap_or(1)
}

/// Welch W1 sequence of order `p - 1`: `c_i = g^i mod p - 1` for `i = 0..p-1`.
fn welch(p: usize) -> Vec<usize> {
    let g = primitive_root(p);
    (0..p - 1).map(|i| pow_mod(g, i, p) - 1).collect()
}

/// Orders for which [`costas_sequence`] succeeds, ascending.
pub fn supported_orders() -> Vec<usize> {
    let mut out: Vec<usize> = TABLE.iter().map(|s| s.len()).collect();
    for p in 5..=MAX_ORDER + 2 {
        if is_prime(p) {
            out.extend([p - 2, p - 1].into_iter().filter(|&n| n <= MAX_ORDER));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// A Costas permutation of `{0, .., n-1}`.
pub fn costas_sequence(n: usize) -> Result<Vec<usize>> {
    if let Some(s) = TABLE.iter().find(|s| s.len() == n) {
        return Ok(s.to_vec());
    }
    if n <= MAX_ORDER {
        if is_prime(n + 1) && n + 1 >= 5 {
            return Ok(welch(n + 1));
        }
        if is_prime(n + 2) && n + 2 >= 5 {
            // W1 starts with g^0 - 1 = 0; dropping that corner leaves a
            // Costas array of order p - 2 on the values 1..p-2.
            return Ok(welch(n + 2)[1..].iter().map(|&c| c - 1).collect());
        }
    }
    let orders = supported_orders();
    let shown: Vec<String> = orders.iter().take(24).map(|n| n.to_string()).collect();
    Err(Error::Construction(format!(
        "no Costas sequence of order {n}; supported orders are {}, ... up to {MAX_ORDER} \
         (p - 1 and p - 2 for primes p, plus tabulated low orders)",
        shown.join(", ")
    )))
}

/// Difference-triangle test: a permutation is Costas iff, for every
/// shift, the differences `c[i + s] - c[i]` are pairwise distinct.
pub fn is_costas(seq: &[usize]) -> bool {
    let n = seq.len();
    let mut sorted = seq.to_vec();
    sorted.sort_unstable();
    if sorted.iter().enumerate().any(|(i, &v)| i != v) {
        return false;
    }
    let mut seen = vec![false; 2 * n];
    for s in 1..n {
        seen.iter_mut().for_each(|x| *x = false);
        for i in 0..n - s {
            let d = seq[i + s] + n - seq[i];
            if seen[d] {
                return false;
            }
            seen[d] = true;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_generated_order_is_costas() {
        for n in supported_orders().into_iter().filter(|&n| n <= 200) {
            let s = costas_sequence(n).unwrap();
            assert_eq!(s.len(), n);
            assert!(is_costas(&s), "order {n}");
        }
    }

    #[test]
    fn large_orders_are_costas() {
        for n in [88, 96, 126, 250, 1020] {
            assert!(is_costas(&costas_sequence(n).unwrap()), "order {n}");
        }
    }

    #[test]
    fn order_four_example() {
        assert_eq!(costas_sequence(4).unwrap(), vec![2, 1, 3, 0]);
    }

    #[test]
    fn rejects_non_costas() {
        assert!(!is_costas(&[0, 1, 2, 3]));
        assert!(!is_costas(&[0, 0, 1]));
    }

    #[test]
    fn unsupported_order_lists_alternatives() {
        // 2 is not offered; 32 is neither p-1 nor p-2 nor tabulated.
        for n in [2, 32] {
            match costas_sequence(n) {
                Err(Error::Construction(msg)) => assert!(msg.contains("supported orders")),
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
