//! Integer and fractional-part primitives.
//!
//! Everything downstream (character tables, multiplicative evaluation, the
//! kernel sums over `d`) reduces to a handful of operations here: a linear
//! smallest-prime-factor sieve, factorization with a deterministic fallback
//! above the sieve limit, Möbius and k-free indicators, and the two
//! fractional-part kernels `Δ(t) = {t} - {t}²` and `‖t‖`.
//!
//! The kernels are exact: they take rationals (or integer numerator and
//! denominator pairs) and never look at a floating fractional part.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{capacity, domain, Result};

pub type ExactRational = BigRational;

/// Smallest-prime-factor table for `2..=limit`, built by a linear sieve.
#[derive(Debug, Clone)]
pub struct SieveTable {
    limit: usize,
    spf: Vec<u32>,
    primes: Vec<u32>,
}

impl SieveTable {
    pub const DEFAULT_LIMIT: usize = 10_000_000;
    /// Largest limit the table will allocate (the spf array is 4 bytes per entry).
    pub const MAX_LIMIT: usize = 1 << 31;

    pub fn new(limit: usize) -> Self {
        assert!(
            limit <= Self::MAX_LIMIT,
            "sieve limit {limit} exceeds MAX_LIMIT"
        );
        let mut spf = vec![0u32; limit + 1];
        let mut primes = Vec::with_capacity(if limit < 16 { 8 } else { limit / 10 });
        for i in 2..=limit {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                if p > si {
                    break;
                }
                let m = i * p as usize;
                if m > limit {
                    break;
                }
                spf[m] = p;
            }
        }
        primes.shrink_to_fit();
        SieveTable { limit, spf, primes }
    }

    pub fn try_new(limit: usize) -> Result<Self> {
        if limit > Self::MAX_LIMIT {
            return capacity(format!(
                "sieve limit {limit} exceeds the supported maximum {}",
                Self::MAX_LIMIT
            ));
        }
        Ok(Self::new(limit))
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn smallest_prime_factor(&self, n: u64) -> Option<u64> {
        if n < 2 || n as usize > self.limit {
            None
        } else {
            Some(self.spf[n as usize] as u64)
        }
    }

    pub fn is_prime(&self, n: u64) -> bool {
        match self.smallest_prime_factor(n) {
            Some(p) => p == n,
            None if n > self.limit as u64 => is_prime_u64(n),
            None => false,
        }
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Primes `p <= x` (truncated at the sieve limit).
    pub fn primes_up_to(&self, x: u64) -> &[u32] {
        let end = self.primes.partition_point(|&p| (p as u64) <= x);
        &self.primes[..end]
    }
}

/// `n` as its ordered list of `(prime, exponent)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Factorization {
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Builds a factorization from pairs, validating ordering, primality and exponents.
    pub fn from_pairs(mut factors: Vec<(u64, u32)>) -> Result<Self> {
        factors.sort_unstable();
        for w in factors.windows(2) {
            if w[0].0 == w[1].0 {
                return domain(format!("repeated prime {} in factorization", w[0].0));
            }
        }
        for &(p, e) in &factors {
            if e == 0 || !is_prime_u64(p) {
                return domain(format!("invalid factor {p}^{e}"));
            }
        }
        Ok(Factorization { factors })
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    /// The integer this factorization represents; `None` on u64 overflow.
    pub fn value(&self) -> Option<u64> {
        self.factors.iter().try_fold(1u64, |acc, &(p, e)| {
            p.checked_pow(e).and_then(|pe| acc.checked_mul(pe))
        })
    }

    pub fn value_big(&self) -> BigUint {
        self.factors
            .iter()
            .fold(BigUint::one(), |acc, &(p, e)| acc * BigUint::from(p).pow(e))
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    pub fn mobius(&self) -> i8 {
        if self.factors.iter().any(|&(_, e)| e >= 2) {
            0
        } else if self.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn is_kfree(&self, k: u32) -> bool {
        self.factors.iter().all(|&(_, e)| e < k)
    }

    pub fn radical(&self) -> u64 {
        self.factors.iter().map(|&(p, _)| p).product()
    }

    pub fn omega(&self) -> u32 {
        self.factors.len() as u32
    }

    /// All positive divisors, ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }
}

/// Factorizes `n >= 1`.
///
/// With a sieve and `n <= sieve.limit()` this is a walk down the spf table.
/// Otherwise it trial-divides by small primes (the sieve's, when given) and
/// finishes with deterministic Miller-Rabin plus Pollard-Brent rho.
pub fn factorize(n: u64, sieve: Option<&SieveTable>) -> Result<Factorization> {
    if n == 0 {
        return domain("cannot factorize 0");
    }
    let mut factors: Vec<(u64, u32)> = Vec::new();
    if let Some(s) = sieve {
        if n as usize <= s.limit() {
            let mut m = n;
            while m > 1 {
                let p = s.spf[m as usize] as u64;
                let mut e = 0;
                while m % p == 0 {
                    m /= p;
                    e += 1;
                }
                factors.push((p, e));
            }
            return Ok(Factorization { factors });
        }
    }

    let mut m = n;
    let mut push = |p: u64, m: &mut u64| {
        let mut e = 0;
        while *m % p == 0 {
            *m /= p;
            e += 1;
        }
        if e > 0 {
            factors.push((p, e));
        }
    };
    match sieve {
        Some(s) => {
            for &p in s.primes() {
                let p = p as u64;
                if p * p > m {
                    break;
                }
                push(p, &mut m);
            }
        }
        None => {
            push(2, &mut m);
            let mut p = 3u64;
            while p <= 1000 && p * p <= m {
                push(p, &mut m);
                p += 2;
            }
        }
    }
    if m > 1 {
        let mut rest = Vec::new();
        split_prime_factors(m, &mut rest);
        rest.sort_unstable();
        for p in rest {
            match factors.last_mut() {
                Some((q, e)) if *q == p => *e += 1,
                _ => factors.push((p, 1)),
            }
        }
    }
    factors.sort_unstable();
    Ok(Factorization { factors })
}

/// Factorizes an arbitrary-precision integer whose cofactor after trial
/// division by the sieve's primes fits in a u64.
pub fn factorize_big(n: &BigUint, sieve: &SieveTable) -> Result<Factorization> {
    if n.is_zero() {
        return domain("cannot factorize 0");
    }
    if let Ok(small) = u64::try_from(n) {
        return factorize(small, Some(sieve));
    }
    let mut m = n.clone();
    let mut factors = Vec::new();
    for &p in sieve.primes() {
        let pb = BigUint::from(p);
        let mut e = 0;
        loop {
            let (q, r) = m.div_rem(&pb);
            if !r.is_zero() {
                break;
            }
            m = q;
            e += 1;
        }
        if e > 0 {
            factors.push((p as u64, e));
        }
        if let Ok(small) = u64::try_from(&m) {
            let tail = factorize(small, Some(sieve))?;
            factors.extend_from_slice(tail.factors());
            factors.sort_unstable();
            return Ok(Factorization { factors });
        }
    }
    capacity(format!(
        "cofactor of {n} exceeds 64 bits after trial division to {}",
        sieve.limit()
    ))
}

fn split_prime_factors(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime_u64(n) {
        out.push(n);
        return;
    }
    let d = pollard_brent(n);
    split_prime_factors(d, out);
    split_prime_factors(n / d, out);
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64 % m;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for all of u64 (the seven-base set of Jim Sinclair).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 325, 9375, 28178, 450775, 9780504, 1795265022] {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// n is odd, composite and free of factors below 41 when this is called.
fn pollard_brent(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut ys = y;
        let mut r = 1u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..r.min(128).min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += 128;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

pub fn mobius(n: u64) -> Result<i8> {
    Ok(factorize(n, None)?.mobius())
}

/// 1 iff no `p^k` divides `n`. `k = 2` is the squarefree indicator, `k = 3` the cubefree one.
pub fn kfree_indicator(n: u64, k: u32) -> Result<u8> {
    if k < 2 {
        return domain(format!("k-free indicator needs k >= 2, got {k}"));
    }
    Ok(factorize(n, None)?.is_kfree(k) as u8)
}

/// `(rad(n), ω(n))`.
pub fn factor_stats(n: u64) -> Result<(u64, u32)> {
    let f = factorize(n, None)?;
    Ok((f.radical(), f.omega()))
}

/// `{t}`, always in `[0, 1)`.
pub fn fract(t: &ExactRational) -> ExactRational {
    t - t.floor()
}

/// `Δ(t) = {t} - {t}²`, in `[0, 1/4]`.
pub fn delta(t: &ExactRational) -> ExactRational {
    let f = fract(t);
    &f - &f * &f
}

/// `‖t‖ = min({t}, 1 - {t})`, in `[0, 1/2]`.
pub fn nearest_int_dist(t: &ExactRational) -> ExactRational {
    let f = fract(t);
    let g = ExactRational::one() - &f;
    if f <= g {
        f
    } else {
        g
    }
}

/// `Δ(num/den)` for nonnegative integer data, within a few ulps.
pub fn delta_ratio(num: u128, den: u128) -> f64 {
    debug_assert!(den > 0);
    let r = num % den;
    (r as f64 / den as f64) * ((den - r) as f64 / den as f64)
}

/// `‖num/den‖` for nonnegative integer data, rounded once to f64.
pub fn dist_ratio(num: u128, den: u128) -> f64 {
    debug_assert!(den > 0);
    let r = num % den;
    r.min(den - r) as f64 / den as f64
}

/// `lcm(3, 5, ..., 2M + 1)`; the empty lcm `1` for `M = 0`.
pub fn lcm_first_odds(m: u32) -> BigUint {
    let top = 2 * m as u64 + 1;
    if m == 0 {
        return BigUint::one();
    }
    let sieve = SieveTable::new(top as usize);
    let mut acc = BigUint::one();
    for &p in sieve.primes() {
        let p = p as u64;
        if p == 2 {
            continue;
        }
        let mut pk = p;
        while pk * p <= top {
            pk *= p;
        }
        acc *= BigUint::from(pk);
    }
    acc
}

/// Upper bound for `∑_{p > P} p^{-s}`, `s > 1`, `P >= 2`.
///
/// Partial summation against `π(x) < 1.25506 x / ln x` (valid for `x > 1`)
/// gives `∑_{p>P} p^{-s} <= s·1.25506 / ((s-1) ln P · P^{s-1})`.
pub fn prime_zeta_tail_bound(prime_bound: u64, s: f64) -> f64 {
    assert!(s > 1.0 && prime_bound >= 2);
    let p = prime_bound as f64;
    s * 1.25506 / ((s - 1.0) * p.ln() * p.powf(s - 1.0))
}

/// `Σ` with Neumaier compensation, so chunked sums merge to the same bits
/// regardless of how the chunks were scheduled.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn rational(num: i64, den: i64) -> ExactRational {
    ExactRational::new(num.into(), den.into())
}

pub fn rational_to_f64(r: &ExactRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // Extremely large or small values: fall back through the float ratio.
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        if r.is_negative() {
            -(n.abs() / d)
        } else {
            n / d
        }
    })
}

/// Formats a rational as `num/den` (or just `num` when the denominator is 1).
pub fn format_rational(r: &ExactRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses the `num/den` (or bare integer) form written by [`format_rational`].
pub fn parse_rational(s: &str) -> Result<ExactRational> {
    use num_bigint::BigInt;
    let parse = |x: &str| {
        x.trim()
            .parse::<BigInt>()
            .map_err(|_| crate::Error::Domain(format!("not a rational: {s:?}")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse(d)?;
            if d.is_zero() {
                return domain(format!("zero denominator in {s:?}"));
            }
            Ok(ExactRational::new(parse(n)?, d))
        }
        None => Ok(ExactRational::from_integer(parse(s)?)),
    }
}
