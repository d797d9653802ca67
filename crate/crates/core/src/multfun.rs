//! The functions `f = μ_k² g` with `g` completely multiplicative ±1, and the
//! sieve-driven empirical oracles built on a table of their values.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Roots;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, is_prime_u64, rational, ExactRational, NeumaierSum, SieveTable};
use crate::characters::{ChiStarExtension, RealPrimitiveCharacter};
use crate::error::{capacity, domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KFree {
    Squarefree,
    Cubefree,
}

impl KFree {
    pub fn from_k(k: u32) -> Result<Self> {
        match k {
            2 => Ok(KFree::Squarefree),
            3 => Ok(KFree::Cubefree),
            _ => domain(format!("kfree must be 2 or 3, got {k}")),
        }
    }

    pub fn k(self) -> u32 {
        match self {
            KFree::Squarefree => 2,
            KFree::Cubefree => 3,
        }
    }
}

impl fmt::Display for KFree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KFree::Squarefree => "squarefree",
            KFree::Cubefree => "cubefree",
        })
    }
}

/// `f = μ_k² g`, where `g = χ*` except at the flipped primes, where `g(p) = -χ(p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpec {
    kfree: KFree,
    chi_star: ChiStarExtension,
    flips: BTreeSet<u64>,
}

impl FunctionSpec {
    pub fn new(kfree: KFree, chi_star: ChiStarExtension, flips: BTreeSet<u64>) -> Result<Self> {
        let q = chi_star.base().conductor();
        for &p in &flips {
            if !is_prime_u64(p) {
                return domain(format!("flip {p} is not prime"));
            }
            if q % p == 0 {
                return domain(format!("flip {p} divides the conductor {q}"));
            }
        }
        Ok(FunctionSpec {
            kfree,
            chi_star,
            flips,
        })
    }

    pub fn kfree(&self) -> KFree {
        self.kfree
    }

    pub fn chi_star(&self) -> &ChiStarExtension {
        &self.chi_star
    }

    pub fn chi(&self) -> &RealPrimitiveCharacter {
        self.chi_star.base()
    }

    pub fn conductor(&self) -> u64 {
        self.chi().conductor()
    }

    pub fn flips(&self) -> &BTreeSet<u64> {
        &self.flips
    }

    #[inline]
    pub fn g_at_prime(&self, p: u64) -> i8 {
        let s = self.chi_star.at_prime(p);
        if self.flips.contains(&p) {
            -s
        } else {
            s
        }
    }

    pub fn g(&self, n: u64) -> i8 {
        if n == 0 {
            return 0;
        }
        let fac = factorize(n, None).expect("n >= 1");
        fac.factors()
            .iter()
            .map(|&(p, e)| if e % 2 == 1 { self.g_at_prime(p) } else { 1 })
            .product()
    }

    pub fn eval(&self, n: u64) -> i8 {
        if n == 0 {
            return 0;
        }
        let fac = factorize(n, None).expect("n >= 1");
        if !fac.is_kfree(self.kfree.k()) {
            return 0;
        }
        fac.factors()
            .iter()
            .map(|&(p, e)| if e % 2 == 1 { self.g_at_prime(p) } else { 1 })
            .product()
    }
}

pub fn eval_f(spec: &FunctionSpec, n: u64) -> i8 {
    spec.eval(n)
}

/// Tables longer than this are refused with a capacity error.
pub const MAX_TABLE_LEN: u64 = 1_600_000_000;

const SEGMENT: usize = 1 << 16;
const CHUNK: u64 = 1 << 16;

/// `f(n)` for `0 <= n <= max_n`, with `f(0) = 0`.
#[derive(Debug, Clone)]
pub struct FTable {
    values: Vec<i8>,
}

fn fill_segment(spec: &FunctionSpec, primes: &[u32], lo: u64, out: &mut [i8]) {
    let hi = lo + out.len() as u64;
    let k = spec.kfree.k();
    let mut rem: Vec<u64> = (lo..hi).collect();
    out.fill(1);
    if lo == 0 {
        out[0] = 0;
        rem[0] = 1;
    }
    for &p in primes {
        let p = p as u64;
        if p * p >= hi {
            break;
        }
        let gp = spec.g_at_prime(p);
        let first = lo.div_ceil(p).max(1) * p;
        let mut n = first;
        while n < hi {
            let i = (n - lo) as usize;
            let mut e = 0;
            while rem[i] % p == 0 {
                rem[i] /= p;
                e += 1;
            }
            if e >= k {
                out[i] = 0;
            } else if e % 2 == 1 {
                out[i] *= gp;
            }
            n += p;
        }
    }
    for (v, &r) in out.iter_mut().zip(&rem) {
        if r > 1 && *v != 0 {
            *v *= spec.g_at_prime(r);
        }
    }
}

impl FTable {
    pub fn build(spec: &FunctionSpec, max_n: u64) -> Result<Self> {
        if max_n > MAX_TABLE_LEN {
            return capacity(format!(
                "function table up to {max_n} exceeds the limit {MAX_TABLE_LEN}"
            ));
        }
        let root = (max_n + 1).sqrt() as usize + 2;
        let small = SieveTable::new(root.max(2));
        let mut values = vec![0i8; max_n as usize + 1];
        values
            .par_chunks_mut(SEGMENT)
            .enumerate()
            .for_each(|(i, seg)| fill_segment(spec, small.primes(), (i * SEGMENT) as u64, seg));
        Ok(FTable { values })
    }

    pub fn max_n(&self) -> u64 {
        self.values.len() as u64 - 1
    }

    #[inline]
    pub fn get(&self, n: u64) -> i8 {
        self.values[n as usize]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    fn require(&self, top: u64) -> Result<()> {
        if top > self.max_n() {
            return domain(format!("table covers n <= {}, need {top}", self.max_n()));
        }
        Ok(())
    }

    pub fn partial_sum(&self, x: u64) -> Result<i64> {
        self.require(x)?;
        Ok(self.values[1..=x as usize].iter().map(|&v| v as i64).sum())
    }

    fn chunks(x: u64) -> Vec<(u64, u64)> {
        (0..x.div_ceil(CHUNK))
            .map(|c| (1 + c * CHUNK, (1 + (c + 1) * CHUNK).min(x + 1)))
            .collect()
    }

    /// `∑_{n<=x} f(n) f(n+d)`.
    pub fn correlation_sum(&self, d: u64, x: u64) -> Result<i64> {
        self.require(x + d)?;
        let v = &self.values;
        Ok(Self::chunks(x)
            .par_iter()
            .map(|&(a, b)| {
                (a..b)
                    .map(|n| v[n as usize] as i64 * v[(n + d) as usize] as i64)
                    .sum::<i64>()
            })
            .sum())
    }

    pub fn empirical_correlation(&self, d: u64, x: u64) -> Result<f64> {
        if x == 0 {
            return domain("x must be at least 1");
        }
        Ok(self.correlation_sum(d, x)? as f64 / x as f64)
    }

    /// `(1/log x) ∑_{n<=x} f(n) f(n+h) / n`.
    pub fn log_weighted_correlation(&self, h: u64, x: u64) -> Result<f64> {
        if x < 2 {
            return domain("x must be at least 2");
        }
        self.require(x + h)?;
        let v = &self.values;
        let parts: Vec<NeumaierSum> = Self::chunks(x)
            .par_iter()
            .map(|&(a, b)| {
                let mut s = NeumaierSum::default();
                for n in a..b {
                    let t = v[n as usize] * v[(n + h) as usize];
                    if t != 0 {
                        s.add(t as f64 / n as f64);
                    }
                }
                s
            })
            .collect();
        let mut total = NeumaierSum::default();
        for p in &parts {
            total.merge(p);
        }
        Ok(total.value() / (x as f64).ln())
    }

    /// `(1/x) ∑_{n<=x} (∑_{k=n+1}^{n+H} f(k))²`.
    pub fn lambda(&self, big_h: u64, x: u64) -> Result<f64> {
        if big_h == 0 || x == 0 {
            return domain("H and x must be at least 1");
        }
        self.require(x + big_h)?;
        let v = &self.values;
        let total: u128 = Self::chunks(x)
            .par_iter()
            .map(|&(a, b)| {
                let mut w: i64 = (a + 1..=a + big_h).map(|k| v[k as usize] as i64).sum();
                let mut acc = 0u128;
                for n in a..b {
                    acc += (w * w) as u128;
                    if n + 1 == b {
                        break;
                    }
                    w += v[(n + big_h + 1) as usize] as i64 - v[(n + 1) as usize] as i64;
                }
                acc
            })
            .sum();
        Ok(total as f64 / x as f64)
    }

    /// Records of `|∑_{n<=x} f(nd)|` over `d <= d_max`, `x·d <= x_max`.
    ///
    /// Discovery order is by the largest argument `x·d` touched, then by `d`.
    pub fn hap_scan(&self, x_max: u64, d_max: u64) -> Result<ScanReport> {
        if x_max == 0 || d_max == 0 {
            return domain("x_max and d_max must be at least 1");
        }
        self.require(x_max)?;
        let v = &self.values;
        let per_d: Vec<Vec<ScanRecord>> = (1..=d_max.min(x_max))
            .into_par_iter()
            .map(|d| {
                let mut out = Vec::new();
                let mut s = 0i64;
                let mut best = 0i64;
                for x in 1..=x_max / d {
                    s += v[(x * d) as usize] as i64;
                    if s.abs() > best {
                        best = s.abs();
                        out.push(ScanRecord { x, d, sum: s });
                    }
                }
                out
            })
            .collect();
        let mut events: Vec<ScanRecord> = per_d.into_iter().flatten().collect();
        events.sort_by_key(|r| (r.x * r.d, r.d));
        let mut records = Vec::new();
        let mut best = 0u64;
        for r in events {
            if r.sum.unsigned_abs() > best {
                best = r.sum.unsigned_abs();
                records.push(r);
            }
        }
        Ok(ScanReport {
            x_max,
            d_max,
            records,
            final_max: best,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub x: u64,
    pub d: u64,
    pub sum: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub x_max: u64,
    pub d_max: u64,
    pub records: Vec<ScanRecord>,
    pub final_max: u64,
}

pub fn hap_discrepancy_scan(spec: &FunctionSpec, x_max: u64, d_max: u64) -> Result<ScanReport> {
    FTable::build(spec, x_max)?.hap_scan(x_max, d_max)
}

pub fn empirical_correlation(spec: &FunctionSpec, d: u64, x: u64) -> Result<f64> {
    FTable::build(spec, x + d)?.empirical_correlation(d, x)
}

pub fn log_weighted_correlation(spec: &FunctionSpec, h: u64, x: u64) -> Result<f64> {
    FTable::build(spec, x + h)?.log_weighted_correlation(h, x)
}

pub fn empirical_lambda(spec: &FunctionSpec, big_h: u64, x: u64) -> Result<f64> {
    FTable::build(spec, x + big_h)?.lambda(big_h, x)
}

/// Nonzero terms `(p, 1 - f(p)χ(p))` of the distance sum, `p <= x`.
fn distance_terms(
    spec: &FunctionSpec,
    chi: &RealPrimitiveCharacter,
    x: u64,
) -> Result<Vec<(u64, i64)>> {
    if x < 2 {
        return Ok(Vec::new());
    }
    let sieve = SieveTable::try_new(x as usize)?;
    Ok(sieve
        .primes()
        .iter()
        .map(|&p| {
            let p = p as u64;
            (p, 1 - (spec.g_at_prime(p) as i64) * (chi.value(p) as i64))
        })
        .filter(|&(_, t)| t != 0)
        .collect())
}

/// `𝔻(f, χ; x)² = ∑_{p<=x} (1 - f(p)χ(p)) / p`.
pub fn pretentious_distance_sq(
    spec: &FunctionSpec,
    chi: &RealPrimitiveCharacter,
    x: u64,
) -> Result<f64> {
    let mut s = NeumaierSum::default();
    for (p, t) in distance_terms(spec, chi, x)? {
        s.add(t as f64 / p as f64);
    }
    Ok(s.value())
}

/// Exact value of the distance sum when it has at most `max_terms` nonzero terms.
pub fn pretentious_distance_sq_exact(
    spec: &FunctionSpec,
    chi: &RealPrimitiveCharacter,
    x: u64,
    max_terms: usize,
) -> Result<ExactRational> {
    let terms = distance_terms(spec, chi, x)?;
    if terms.len() > max_terms {
        return capacity(format!(
            "{} nonzero distance terms exceed the exact limit {max_terms}",
            terms.len()
        ));
    }
    Ok(terms
        .into_iter()
        .fold(ExactRational::zero(), |a, (p, t)| a + rational(t, p as i64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::build_real_primitive;
    use num_integer::Integer;

    fn spec(k: KFree, q: u64, sign: i8, flips: &[u64]) -> FunctionSpec {
        let chi = build_real_primitive(q, None).unwrap();
        let ext = ChiStarExtension::uniform(chi, sign).unwrap();
        FunctionSpec::new(k, ext, flips.iter().copied().collect()).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_f(&spec(KFree::Squarefree, 5, 1, &[]), 4), 0);
        assert_eq!(eval_f(&spec(KFree::Cubefree, 5, 1, &[]), 4), 1);
        assert_eq!(eval_f(&spec(KFree::Squarefree, 5, 1, &[2]), 2), 1);
        assert_eq!(eval_f(&spec(KFree::Cubefree, 5, -1, &[]), 25), 1);
        assert_eq!(eval_f(&spec(KFree::Cubefree, 5, -1, &[]), 125), 0);
    }

    #[test]
    fn invalid_flips_are_rejected() {
        let chi = build_real_primitive(5, None).unwrap();
        let ext = ChiStarExtension::uniform(chi, 1).unwrap();
        assert!(FunctionSpec::new(KFree::Squarefree, ext.clone(), [5].into()).is_err());
        assert!(FunctionSpec::new(KFree::Squarefree, ext, [4].into()).is_err());
    }

    #[test]
    fn table_matches_pointwise_evaluation() {
        for s in [
            spec(KFree::Squarefree, 5, 1, &[2]),
            spec(KFree::Cubefree, 12, -1, &[5, 7]),
            spec(KFree::Cubefree, 8, 1, &[3]),
        ] {
            let t = FTable::build(&s, 200_000).unwrap();
            for n in 0..=200_000u64 {
                assert_eq!(t.get(n), s.eval(n), "n = {n}");
            }
        }
    }

    #[test]
    fn f_is_multiplicative_on_coprime_pairs() {
        let s = spec(KFree::Cubefree, 5, -1, &[3]);
        let t = FTable::build(&s, 1_000_000).unwrap();
        for m in 1..=1000u64 {
            for n in 1..=1000u64 {
                if m.gcd(&n) == 1 {
                    assert_eq!(t.get(m * n), t.get(m) * t.get(n));
                }
            }
        }
    }

    #[test]
    fn small_oracle_examples() {
        let s = spec(KFree::Squarefree, 5, 1, &[]);
        let t = FTable::build(&s, 10).unwrap();
        assert_eq!(
            t.empirical_correlation(1, 1).unwrap(),
            (s.eval(1) * s.eval(2)) as f64
        );
        let two = (s.eval(1) * s.eval(2)) as f64 + (s.eval(2) * s.eval(3)) as f64 / 2.0;
        let got = t.log_weighted_correlation(1, 2).unwrap();
        assert!((got - two / 2f64.ln()).abs() < 1e-15);
        assert_eq!(t.lambda(1, 1).unwrap(), (s.eval(2) as f64).powi(2));
        let r = t.hap_scan(1, 1).unwrap();
        assert_eq!(r.final_max, 1);
    }

    #[test]
    fn lambda_matches_direct_window_sums() {
        let s = spec(KFree::Cubefree, 5, 1, &[2]);
        let x = 300_000u64;
        let t = FTable::build(&s, x + 100).unwrap();
        for h in [1u64, 7, 64] {
            let mut total = 0i64;
            for n in 1..=x {
                let w: i64 = (n + 1..=n + h).map(|k| t.get(k) as i64).sum();
                total += w * w;
            }
            assert_eq!(t.lambda(h, x).unwrap(), total as f64 / x as f64);
        }
    }

    #[test]
    fn unit_window_is_kfree_density() {
        let s = spec(KFree::Squarefree, 5, 1, &[]);
        let v = empirical_lambda(&s, 1, 1_000_000).unwrap();
        assert!((v - 6.0 / std::f64::consts::PI.powi(2)).abs() < 1e-2);
    }

    #[test]
    fn scan_single_difference_matches_direct_loop() {
        let s = spec(KFree::Squarefree, 5, 1, &[]);
        let r = hap_discrepancy_scan(&s, 10_000, 1).unwrap();
        let mut sum = 0i64;
        let mut best = 0i64;
        for n in 1..=10_000u64 {
            sum += s.eval(n) as i64;
            best = best.max(sum.abs());
        }
        assert_eq!(r.final_max, best as u64);
        for w in r.records.windows(2) {
            assert!(w[1].sum.abs() > w[0].sum.abs());
        }
    }

    #[test]
    fn scan_records_are_global_maxima_in_discovery_order() {
        let s = spec(KFree::Cubefree, 5, 1, &[]);
        let t = FTable::build(&s, 50_000).unwrap();
        let r = t.hap_scan(50_000, 7).unwrap();
        let mut best = 0i64;
        let mut expect = Vec::new();
        for top in 1..=50_000u64 {
            for d in 1..=7u64 {
                if top % d != 0 {
                    continue;
                }
                let sum: i64 = (1..=top / d).map(|n| t.get(n * d) as i64).sum();
                if sum.abs() > best {
                    best = sum.abs();
                    expect.push(ScanRecord { x: top / d, d, sum });
                }
            }
        }
        assert_eq!(r.records, expect);
    }

    #[test]
    fn distance_examples() {
        let chi = build_real_primitive(5, None).unwrap();
        let s0 = spec(KFree::Squarefree, 5, 1, &[]);
        let s2 = spec(KFree::Squarefree, 5, 1, &[2]);
        assert_eq!(pretentious_distance_sq(&s0, &chi, 1_000_000).unwrap(), 0.2);
        assert_eq!(
            pretentious_distance_sq_exact(&s0, &chi, 1_000_000, 16).unwrap(),
            rational(1, 5)
        );
        assert_eq!(
            pretentious_distance_sq_exact(&s2, &chi, 1_000_000, 16).unwrap(),
            rational(6, 5)
        );
        assert_eq!(pretentious_distance_sq(&s0, &chi, 1).unwrap(), 0.0);
    }
}
