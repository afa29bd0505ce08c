//! Arithmetic in `GF(p^s)` together with the trace character
//! `χ(x) = exp(2πi·Tr(x)/p)` and the bicharacter `⟨x, y⟩ = χ(xy)`.
//!
//! Elements are indexed `0..q` by their coefficient vectors over `Z_p` in the
//! polynomial basis `1, t, …, t^{s−1}`, packed little-endian in base `p`.
//! Index `0` is the additive identity and index `1` the multiplicative one.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::zmod::is_prime;

/// Largest supported field order.
pub const MAX_FIELD_ORDER: u64 = 1 << 16;

// Multiplication tables are only materialized up to this order.
const MUL_TABLE_LIMIT: u64 = 256;

#[derive(Clone, Debug)]
pub struct FieldTable {
    p: u64,
    s: u32,
    q: u64,
    /// Low coefficients `c_0..c_{s−1}` of the monic modulus `t^s + Σ c_i t^i`.
    modulus: Vec<u64>,
    mul_table: Option<Vec<u32>>,
    trace_table: Vec<u32>,
    chi_table: Vec<Complex64>,
}

impl PartialEq for FieldTable {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.s == other.s && self.modulus == other.modulus
    }
}

impl Eq for FieldTable {}

impl FieldTable {
    /// Builds `GF(p^s)` with the lexicographically smallest monic irreducible
    /// modulus (smallest packed index of its non-leading coefficients).
    pub fn new(p: u64, s: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if s == 0 {
            return Err(Error::OutOfRange("field degree must be at least 1".into()));
        }
        let q = p
            .checked_pow(s)
            .filter(|&q| q <= MAX_FIELD_ORDER)
            .ok_or(Error::FieldTooLarge { p, s, bound: MAX_FIELD_ORDER })?;
        let modulus = smallest_irreducible(p, s as usize);
        let mut field = FieldTable {
            p,
            s,
            q,
            modulus,
            mul_table: None,
            trace_table: Vec::new(),
            chi_table: Vec::new(),
        };
        if q <= MUL_TABLE_LIMIT {
            let mut table = vec![0u32; (q * q) as usize];
            for a in 0..q as u32 {
                for b in a..q as u32 {
                    let c = field.mul_slow(a, b);
                    table[(a as u64 * q + b as u64) as usize] = c;
                    table[(b as u64 * q + a as u64) as usize] = c;
                }
            }
            field.mul_table = Some(table);
        }
        field.trace_table = (0..q as u32).map(|x| field.trace_slow(x)).collect();
        field.chi_table = field
            .trace_table
            .iter()
            .map(|&t| Complex64::from_polar(1.0, 2.0 * PI * t as f64 / p as f64))
            .collect();
        Ok(field)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn order(&self) -> u64 {
        self.q
    }

    pub fn size(&self) -> usize {
        self.q as usize
    }

    /// Full coefficient list of the modulus, lowest degree first, leading 1 included.
    pub fn modulus_coefficients(&self) -> Vec<u64> {
        let mut c = self.modulus.clone();
        c.push(1);
        c
    }

    pub fn element(&self, index: u32) -> Result<FieldElement<'_>> {
        if index as u64 >= self.q {
            return Err(Error::OutOfRange(format!("element {index} not in GF({})", self.q)));
        }
        Ok(FieldElement { field: self, index })
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement<'_>> + '_ {
        (0..self.q as u32).map(move |index| FieldElement { field: self, index })
    }

    /// Embeds an integer into the prime subfield.
    pub fn from_int(&self, k: u64) -> u32 {
        (k % self.p) as u32
    }

    pub fn digits(&self, x: u32) -> Vec<u64> {
        let mut rest = x as u64;
        (0..self.s)
            .map(|_| {
                let c = rest % self.p;
                rest /= self.p;
                c
            })
            .collect()
    }

    pub fn from_digits(&self, digits: &[u64]) -> u32 {
        digits.iter().rev().fold(0u64, |acc, &c| acc * self.p + c % self.p) as u32
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.s == 1 {
            return ((a as u64 + b as u64) % self.p) as u32;
        }
        let (mut x, mut y) = (a as u64, b as u64);
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.s {
            out += ((x % self.p + y % self.p) % self.p) * place;
            x /= self.p;
            y /= self.p;
            place *= self.p;
        }
        out as u32
    }

    pub fn neg(&self, a: u32) -> u32 {
        let digits: Vec<u64> = self.digits(a).iter().map(|&c| (self.p - c) % self.p).collect();
        self.from_digits(&digits)
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match &self.mul_table {
            Some(t) => t[(a as u64 * self.q + b as u64) as usize],
            None => self.mul_slow(a, b),
        }
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let p = self.p;
        let s = self.s as usize;
        let (x, y) = (self.digits(a), self.digits(b));
        let mut prod = vec![0u64; 2 * s - 1];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                prod[i + j] = (prod[i + j] + xi * yj) % p;
            }
        }
        // t^s ≡ −Σ c_i t^i
        for deg in (s..prod.len()).rev() {
            let lead = prod[deg];
            if lead == 0 {
                continue;
            }
            prod[deg] = 0;
            for (i, &c) in self.modulus.iter().enumerate() {
                let k = deg - s + i;
                prod[k] = (prod[k] + (p - lead) * c) % p;
            }
        }
        self.from_digits(&prod[..s])
    }

    pub fn pow(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a;
        let mut acc = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        (a != 0).then(|| self.pow(a, self.q - 2))
    }

    fn trace_slow(&self, x: u32) -> u32 {
        let mut acc = 0u32;
        let mut term = x;
        for _ in 0..self.s {
            acc = self.add(acc, term);
            term = self.pow(term, self.p);
        }
        debug_assert!((acc as u64) < self.p, "trace must land in the prime subfield");
        acc
    }

    /// Absolute trace `x + x^p + … + x^{p^{s−1}}`, returned as an integer in `0..p`.
    pub fn trace(&self, x: u32) -> u32 {
        self.trace_table[x as usize]
    }

    pub fn chi(&self, x: u32) -> Complex64 {
        self.chi_table[x as usize]
    }

    pub fn bichar(&self, x: u32, y: u32) -> Complex64 {
        self.chi(self.mul(x, y))
    }

    /// Index of `2^{−1}`; `None` in characteristic two.
    pub fn half(&self) -> Option<u32> {
        self.inv(self.from_int(2))
    }
}

/// An element tied to its field, for mismatch-checked operations.
#[derive(Clone, Copy, Debug)]
pub struct FieldElement<'a> {
    field: &'a FieldTable,
    index: u32,
}

impl PartialEq for FieldElement<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index && self.field == other.field
    }
}

impl<'a> FieldElement<'a> {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn field(&self) -> &'a FieldTable {
        self.field
    }

    pub fn trace(&self) -> u32 {
        self.field.trace(self.index)
    }

    pub fn chi(&self) -> Complex64 {
        self.field.chi(self.index)
    }

    pub fn bichar(&self, other: &FieldElement<'_>) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(self.field.bichar(self.index, other.index))
    }

    pub fn add(&self, other: &FieldElement<'_>) -> Result<FieldElement<'a>> {
        self.check_same(other)?;
        Ok(FieldElement { field: self.field, index: self.field.add(self.index, other.index) })
    }

    pub fn mul(&self, other: &FieldElement<'_>) -> Result<FieldElement<'a>> {
        self.check_same(other)?;
        Ok(FieldElement { field: self.field, index: self.field.mul(self.index, other.index) })
    }

    fn check_same(&self, other: &FieldElement<'_>) -> Result<()> {
        if std::ptr::eq(self.field, other.field) || self.field == other.field {
            Ok(())
        } else {
            Err(Error::FieldMismatch)
        }
    }
}

fn poly_rem(num: &[u64], den: &[u64], p: u64) -> Vec<u64> {
    // den is monic, lowest degree first
    let mut r = num.to_vec();
    let dd = den.len() - 1;
    while r.len() > dd {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dd;
        if lead != 0 {
            for (i, &c) in den.iter().enumerate() {
                r[shift + i] = (r[shift + i] + (p - lead) * c % p) % p;
            }
        }
        r.pop();
    }
    r
}

fn is_irreducible(poly: &[u64], p: u64) -> bool {
    let deg = poly.len() - 1;
    for div_deg in 1..=deg / 2 {
        let count = p.pow(div_deg as u32);
        for packed in 0..count {
            let mut div = Vec::with_capacity(div_deg + 1);
            let mut rest = packed;
            for _ in 0..div_deg {
                div.push(rest % p);
                rest /= p;
            }
            div.push(1);
            if poly_rem(poly, &div, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn smallest_irreducible(p: u64, s: usize) -> Vec<u64> {
    let count = p.pow(s as u32);
    for packed in 0..count {
        let mut poly = Vec::with_capacity(s + 1);
        let mut rest = packed;
        for _ in 0..s {
            poly.push(rest % p);
            rest /= p;
        }
        poly.push(1);
        if is_irreducible(&poly, p) {
            poly.pop();
            return poly;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}
