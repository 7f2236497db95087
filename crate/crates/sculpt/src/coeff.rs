//! Coefficient backends for Fock-space amplitudes.
//!
//! Every amplitude produced by the sculpting pipeline lives in the ring
//! `Q(i, sqrt(2), sqrt(3), sqrt(5), ...)`: finite sums `sum_s c_s * sqrt(s)`
//! with `s` squarefree and `c_s` a complex rational. [`Exact`] implements
//! that ring directly, so equalities such as "fidelity is exactly 1" are
//! decidable. [`C64`] is the floating-point backend for instances where
//! exact arithmetic is either unavailable (discrete-Fourier phases whose
//! order does not divide 24) or too slow.

use std::collections::BTreeMap;
use std::fmt;

use num::complex::Complex;
use num::rational::BigRational;
use num::{BigInt, One, Zero};

/// Complex double-precision value, the floating-point coefficient backend.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C64(pub Complex<f64>);

impl C64 {
    pub fn from_f64(re: f64) -> Self {
        C64(Complex::new(re, 0.0))
    }
}

/// Element of `Q(i, sqrt(2), sqrt(3), ...)`.
///
/// Stored as a map from squarefree radicand to complex rational
/// coefficient; the key `1` holds the rational part. Radicands of distinct
/// squarefree integers are linearly independent over `Q(i)`, so the
/// representation is canonical once zero coefficients are dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exact {
    parts: BTreeMap<u64, Complex<BigRational>>,
}

/// Shared interface of the two coefficient backends.
///
/// Methods mirror field arithmetic; `inv` and `root_of_unity` are partial
/// because zero has no inverse and the exact ring only contains the roots
/// of unity of order dividing 24.
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    /// `p / q`. Panics if `q == 0`.
    fn from_ratio(p: i64, q: i64) -> Self;
    fn from_big_ratio(v: &BigRational) -> Self;
    /// `sqrt(p / q)`. Panics if `q == 0`.
    fn sqrt_ratio(p: u64, q: u64) -> Self;
    /// `exp(2 pi i q / d)`, or `None` if the backend cannot represent it.
    fn root_of_unity(d: u32, q: i64) -> Option<Self>;

    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    fn inv(&self) -> Option<Self>;

    fn is_zero(&self) -> bool;
    fn to_c64(&self) -> Complex<f64>;
    /// Whether arithmetic in this backend is exact.
    fn exact() -> bool;
    /// `|self - other| <= tol` in the complex plane.
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let d = self.to_c64() - other.to_c64();
        d.norm() <= tol
    }
    /// The value as an exact rational, if it is one (real, radical-free).
    fn re_big_ratio(&self) -> Option<BigRational>;

    fn pow_u(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }
    fn norm_sqr(&self) -> Self {
        self.mul(&self.conj())
    }
}

fn smallest_prime_factor(mut n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut p = 3;
    while p * p <= n {
        if n % p == 0 {
            return p;
        }
        p += 2;
    }
    let _ = &mut n;
    n
}

/// Splits `n` as `m^2 * s` with `s` squarefree; returns `(m, s)`.
fn square_split(mut n: u64) -> (u64, u64) {
    let mut m = 1u64;
    let mut s = 1u64;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0u32;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            m *= p.pow(e / 2);
            if e % 2 == 1 {
                s *= p;
            }
        }
        p = if p == 2 { 3 } else { p + 2 };
    }
    if n > 1 {
        s *= n;
    }
    (m, s)
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn crat(re: BigRational, im: BigRational) -> Complex<BigRational> {
    Complex::new(re, im)
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

impl Exact {
    fn empty() -> Self {
        Exact {
            parts: BTreeMap::new(),
        }
    }

    fn insert(&mut self, radicand: u64, c: Complex<BigRational>) {
        if c.is_zero() {
            return;
        }
        let entry = self
            .parts
            .entry(radicand)
            .or_insert_with(|| crat(BigRational::zero(), BigRational::zero()));
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.parts.remove(&radicand);
        }
    }

    fn from_complex(c: Complex<BigRational>) -> Self {
        let mut out = Exact::empty();
        out.insert(1, c);
        out
    }

    /// `m * sqrt(s)` for integer `m` and arbitrary `s >= 1`.
    fn sqrt_u64(s: u64) -> Self {
        let (m, s) = square_split(s);
        let mut out = Exact::empty();
        out.insert(s, crat(BigRational::from_integer(m.into()), BigRational::zero()));
        out
    }

    /// The iterator over `(radicand, coefficient)` pairs, radicands ascending.
    pub fn terms(&self) -> impl Iterator<Item = (u64, &Complex<BigRational>)> {
        self.parts.iter().map(|(s, c)| (*s, c))
    }

    /// Splits `self = a + b * sqrt(p)` where no radicand of `a` or `b` is
    /// divisible by the prime `p`.
    fn split(&self, p: u64) -> (Exact, Exact) {
        let mut a = Exact::empty();
        let mut b = Exact::empty();
        for (&s, c) in &self.parts {
            if s % p == 0 {
                b.insert(s / p, c.clone());
            } else {
                a.insert(s, c.clone());
            }
        }
        (a, b)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&s, c) in &self.parts {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im.is_zero() {
                write!(f, "{}", c.re)?;
            } else if c.re.is_zero() {
                write!(f, "{}i", c.im)?;
            } else {
                write!(f, "({}+{}i)", c.re, c.im)?;
            }
            if s != 1 {
                write!(f, "*sqrt({})", s)?;
            }
        }
        Ok(())
    }
}

/// `cos(t * 15 degrees)` for any integer `t`, exact in `Q(sqrt(2), sqrt(3))`.
fn cos_15deg(t: i64) -> Exact {
    let t = t.rem_euclid(24);
    // Fold into the first quadrant: cos is even and 24-periodic in t.
    let q = if t <= 6 {
        t
    } else if t <= 12 {
        return cos_15deg(12 - t).neg();
    } else {
        return cos_15deg(24 - t);
    };
    let mut out = Exact::empty();
    match q {
        0 => out.insert(1, crat(rat(1, 1), BigRational::zero())),
        // cos 15 = (sqrt(6) + sqrt(2)) / 4
        1 => {
            out.insert(6, crat(rat(1, 4), BigRational::zero()));
            out.insert(2, crat(rat(1, 4), BigRational::zero()));
        }
        2 => out.insert(3, crat(rat(1, 2), BigRational::zero())),
        3 => out.insert(2, crat(rat(1, 2), BigRational::zero())),
        4 => out.insert(1, crat(rat(1, 2), BigRational::zero())),
        // cos 75 = (sqrt(6) - sqrt(2)) / 4
        5 => {
            out.insert(6, crat(rat(1, 4), BigRational::zero()));
            out.insert(2, crat(rat(-1, 4), BigRational::zero()));
        }
        _ => {}
    }
    out
}

impl Coeff for Exact {
    fn zero() -> Self {
        Exact::empty()
    }

    fn one() -> Self {
        Exact::from_complex(crat(BigRational::one(), BigRational::zero()))
    }

    fn from_int(v: i64) -> Self {
        Exact::from_complex(crat(BigRational::from_integer(v.into()), BigRational::zero()))
    }

    fn from_ratio(p: i64, q: i64) -> Self {
        Exact::from_complex(crat(rat(p, q), BigRational::zero()))
    }

    fn from_big_ratio(v: &BigRational) -> Self {
        Exact::from_complex(crat(v.clone(), BigRational::zero()))
    }

    fn sqrt_ratio(p: u64, q: u64) -> Self {
        assert!(q != 0, "sqrt_ratio denominator must be nonzero");
        if p == 0 {
            return Exact::empty();
        }
        // sqrt(p/q) = sqrt(p*q) / q
        let (m, s) = square_split(p * q);
        let mut out = Exact::empty();
        out.insert(
            s,
            crat(
                BigRational::new(BigInt::from(m), BigInt::from(q)),
                BigRational::zero(),
            ),
        );
        out
    }

    fn root_of_unity(d: u32, q: i64) -> Option<Self> {
        if d == 0 || 24 % d != 0 {
            return None;
        }
        let t = q.rem_euclid(d as i64) * (24 / d as i64);
        let re = cos_15deg(t);
        let im = cos_15deg(t - 6); // sin x = cos(x - 90 degrees)
        let i = Exact::from_complex(crat(BigRational::zero(), BigRational::one()));
        Some(re.add(&i.mul(&im)))
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&s, c) in &other.parts {
            out.insert(s, c.clone());
        }
        out
    }

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Exact::empty();
        for (&s, c) in &self.parts {
            for (&t, d) in &other.parts {
                let g = gcd_u64(s, t);
                let r = (s / g) * (t / g);
                let scale = BigRational::from_integer(g.into());
                out.insert(r, c.clone() * d.clone() * crat(scale, BigRational::zero()));
            }
        }
        out
    }

    fn neg(&self) -> Self {
        let mut out = Exact::empty();
        for (&s, c) in &self.parts {
            out.insert(s, -c.clone());
        }
        out
    }

    fn conj(&self) -> Self {
        let mut out = Exact::empty();
        for (&s, c) in &self.parts {
            out.insert(s, c.conj());
        }
        out
    }

    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let p = self
            .parts
            .keys()
            .find(|&&s| s > 1)
            .map(|&s| smallest_prime_factor(s));
        match p {
            None => {
                // Purely complex-rational: (a+bi)^-1 = (a-bi)/(a^2+b^2).
                let c = self.parts.get(&1).expect("nonzero rational part");
                let n = c.norm_sqr();
                Some(Exact::from_complex(crat(
                    c.re.clone() / n.clone(),
                    -c.im.clone() / n,
                )))
            }
            Some(p) => {
                // self = a + b sqrt(p) with a, b free of p; multiplying by
                // the conjugate a - b sqrt(p) removes p, so recursion is on
                // the number of distinct primes across radicands.
                let (a, b) = self.split(p);
                let d = a.mul(&a).sub(&b.mul(&b).mul(&Exact::from_int(p as i64)));
                let dinv = d.inv()?;
                Some(a.sub(&b.mul(&Exact::sqrt_u64(p))).mul(&dinv))
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    fn to_c64(&self) -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for (&s, c) in &self.parts {
            let scale = (s as f64).sqrt();
            acc += Complex::new(big_ratio_f64(&c.re) * scale, big_ratio_f64(&c.im) * scale);
        }
        acc
    }

    fn exact() -> bool {
        true
    }

    fn re_big_ratio(&self) -> Option<BigRational> {
        if self.parts.is_empty() {
            return Some(BigRational::zero());
        }
        if self.parts.len() == 1 {
            if let Some(c) = self.parts.get(&1) {
                if c.im.is_zero() {
                    return Some(c.re.clone());
                }
            }
        }
        None
    }
}

/// Rounded `f64` value of a big rational.
pub fn big_ratio_f64(r: &BigRational) -> f64 {
    let numer = r.numer();
    let denom = r.denom();
    // Scale down in tandem so both halves fit in f64 range.
    let nb = numer.bits() as i64;
    let db = denom.bits() as i64;
    let shift = (nb.max(db) - 900).max(0) as u64;
    let n = (numer >> shift).to_string().parse::<f64>().unwrap_or(f64::NAN);
    let d = (denom >> shift).to_string().parse::<f64>().unwrap_or(f64::NAN);
    if d == 0.0 {
        return if n.is_sign_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
    }
    n / d
}

impl fmt::Display for C64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i", self.0.re, self.0.im)
    }
}

impl Coeff for C64 {
    fn zero() -> Self {
        C64(Complex::new(0.0, 0.0))
    }

    fn one() -> Self {
        C64(Complex::new(1.0, 0.0))
    }

    fn from_int(v: i64) -> Self {
        C64(Complex::new(v as f64, 0.0))
    }

    fn from_ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "from_ratio denominator must be nonzero");
        C64(Complex::new(p as f64 / q as f64, 0.0))
    }

    fn from_big_ratio(v: &BigRational) -> Self {
        C64(Complex::new(big_ratio_f64(v), 0.0))
    }

    fn sqrt_ratio(p: u64, q: u64) -> Self {
        assert!(q != 0, "sqrt_ratio denominator must be nonzero");
        C64(Complex::new((p as f64 / q as f64).sqrt(), 0.0))
    }

    fn root_of_unity(d: u32, q: i64) -> Option<Self> {
        if d == 0 {
            return None;
        }
        let theta = 2.0 * std::f64::consts::PI * (q.rem_euclid(d as i64) as f64) / d as f64;
        Some(C64(Complex::new(theta.cos(), theta.sin())))
    }

    fn add(&self, other: &Self) -> Self {
        C64(self.0 + other.0)
    }

    fn sub(&self, other: &Self) -> Self {
        C64(self.0 - other.0)
    }

    fn mul(&self, other: &Self) -> Self {
        C64(self.0 * other.0)
    }

    fn neg(&self) -> Self {
        C64(-self.0)
    }

    fn conj(&self) -> Self {
        C64(self.0.conj())
    }

    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(C64(self.0.inv()))
        }
    }

    fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }

    fn to_c64(&self) -> Complex<f64> {
        self.0
    }

    fn exact() -> bool {
        false
    }

    fn re_big_ratio(&self) -> Option<BigRational> {
        None
    }
}
