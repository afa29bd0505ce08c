//! Exact integer arithmetic over `Z_d`: prime factorization, the
//! "zero counts as `d`" gcd used to size cyclic subgroups of the phase space,
//! and p-adic valuations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A prime-power factor `p^s` of the modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrimePower {
    pub p: u64,
    pub s: u32,
}

impl PrimePower {
    pub fn value(&self) -> u64 {
        self.p.pow(self.s)
    }
}

/// Prime factorization `d = ∏ p_j^{s_j}` with strictly increasing primes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factorization {
    d: u64,
    factors: Vec<PrimePower>,
}

impl Factorization {
    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn factors(&self) -> &[PrimePower] {
        &self.factors
    }

    /// Number of distinct primes.
    pub fn k(&self) -> usize {
        self.factors.len()
    }

    /// The prime powers `d_j = p_j^{s_j}` in factor order.
    pub fn prime_powers(&self) -> Vec<u64> {
        self.factors.iter().map(PrimePower::value).collect()
    }

    pub fn is_prime(&self) -> bool {
        self.factors.len() == 1 && self.factors[0].s == 1
    }

    pub fn is_prime_power(&self) -> bool {
        self.factors.len() == 1
    }

    /// `∏ (p^{s+1} − 1)/(p − 1)`: the number of Lagrangian submodules of `Z_d²`.
    pub fn lagrangian_count(&self) -> u64 {
        self.factors
            .iter()
            .map(|f| (f.p.pow(f.s + 1) - 1) / (f.p - 1))
            .product()
    }

    /// `∏ (d_j + 1)`: the number of full-support slope tuples over the field factors.
    pub fn slope_tuple_count(&self) -> u64 {
        self.factors.iter().map(|f| f.value() + 1).product()
    }
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|pp| if pp.s == 1 { pp.p.to_string() } else { format!("{}^{}", pp.p, pp.s) })
            .collect();
        write!(f, "{}", parts.join("·"))
    }
}

/// Trial-division factorization.
pub fn factorize(d: u64) -> Result<Factorization> {
    if d == 0 {
        return Err(Error::InvalidModulus { d, reason: "modulus must be positive".into() });
    }
    let mut rest = d;
    let mut factors = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= rest {
        if rest % p == 0 {
            let mut s = 0;
            while rest % p == 0 {
                rest /= p;
                s += 1;
            }
            factors.push(PrimePower { p, s });
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        factors.push(PrimePower { p: rest, s: 1 });
    }
    Ok(Factorization { d, factors })
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            return false;
        }
        p += 1;
    }
    true
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// `gcd(m, n, d)` where a zero argument is read as `d`.
///
/// For a phase point `σ = (m, n) ≠ 0` this is the index `h` with
/// `|⟨σ⟩| = d / h`; `(0, 0)` gives `d`.
pub fn gcd3_zero_as_d(m: u64, n: u64, d: u64) -> Result<u64> {
    if d == 0 || m >= d || n >= d {
        return Err(Error::OutOfRange(format!("({m}, {n}) not in Z_{d}²")));
    }
    let lift = |x: u64| if x == 0 { d } else { x };
    Ok(gcd(gcd(lift(m), lift(n)), d))
}

/// p-adic valuation; `v_p(0)` is infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Valuation {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(e) => write!(f, "{e}"),
            Valuation::Infinite => write!(f, "∞"),
        }
    }
}

pub fn p_valuation(x: u64, p: u64) -> Result<Valuation> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if x == 0 {
        return Ok(Valuation::Infinite);
    }
    let mut e = 0;
    let mut rest = x;
    while rest % p == 0 {
        rest /= p;
        e += 1;
    }
    Ok(Valuation::Finite(e))
}

/// Multiplicative inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().factors().is_empty());
        let six = factorize(6).unwrap();
        assert_eq!(six.factors(), &[PrimePower { p: 2, s: 1 }, PrimePower { p: 3, s: 1 }]);
        let twelve = factorize(12).unwrap();
        assert_eq!(twelve.factors(), &[PrimePower { p: 2, s: 2 }, PrimePower { p: 3, s: 1 }]);
        assert!(factorize(0).is_err());
        assert_eq!(twelve.to_string(), "2^2·3");
    }

    #[test]
    fn lagrangian_count_small() {
        assert_eq!(factorize(2).unwrap().lagrangian_count(), 3);
        assert_eq!(factorize(4).unwrap().lagrangian_count(), 7);
        assert_eq!(factorize(6).unwrap().lagrangian_count(), 12);
        assert_eq!(factorize(6).unwrap().slope_tuple_count(), 12);
    }

    #[test]
    fn gcd3_examples() {
        assert_eq!(gcd3_zero_as_d(0, 0, 6).unwrap(), 6);
        assert_eq!(gcd3_zero_as_d(2, 4, 6).unwrap(), 2);
        assert_eq!(gcd3_zero_as_d(1, 5, 6).unwrap(), 1);
        assert_eq!(gcd3_zero_as_d(0, 3, 6).unwrap(), 3);
        assert!(gcd3_zero_as_d(6, 0, 6).is_err());
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(p_valuation(12, 2).unwrap(), Valuation::Finite(2));
        assert_eq!(p_valuation(5, 2).unwrap(), Valuation::Finite(0));
        assert_eq!(p_valuation(0, 3).unwrap(), Valuation::Infinite);
        assert!(matches!(p_valuation(8, 4), Err(Error::NotPrime(4))));
    }

    #[test]
    fn factorize_roundtrip_exhaustive_small() {
        for d in 1..=20_000u64 {
            let f = factorize(d).unwrap();
            assert_eq!(f.factors().iter().map(PrimePower::value).product::<u64>(), d);
            assert!(f.factors().windows(2).all(|w| w[0].p < w[1].p));
            assert!(f.factors().iter().all(|pp| is_prime(pp.p) && pp.s >= 1));
        }
    }

    proptest! {
        #[test]
        fn factorize_roundtrip(d in 1u64..=1_000_000) {
            let f = factorize(d).unwrap();
            prop_assert_eq!(f.factors().iter().map(PrimePower::value).product::<u64>(), d);
        }

        #[test]
        fn gcd3_divides(d in 2u64..200, m in 0u64..200, n in 0u64..200) {
            let (m, n) = (m % d, n % d);
            let h = gcd3_zero_as_d(m, n, d).unwrap();
            prop_assert_eq!(d % h, 0);
            for x in [m, n] {
                if x != 0 {
                    prop_assert_eq!(x % h, 0);
                }
            }
        }
    }
}
