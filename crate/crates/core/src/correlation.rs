//! Closed-form correlations: the local factors of the twisted function `F`,
//! the constant `C = ∏_{p∤q} h(p)`, the profiles `g` and `u = g ∗ μ`, and the
//! autocorrelations `S_d`.
//!
//! Every local quantity is an exact rational; only Euler products over all
//! primes carry a floating value with a certified tail.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::arith::{
    factorize, is_prime_u64, prime_zeta_tail_bound, rational, rational_to_f64, ExactRational,
    SieveTable,
};
use crate::bounded::BoundedValue;
use crate::characters::{char_autocorrelation, RealPrimitiveCharacter};
use crate::error::{domain, Result};
use crate::multfun::{FunctionSpec, KFree};

fn int(n: i64) -> ExactRational {
    ExactRational::from_integer(n.into())
}

fn inv_pow(p: u64, k: u32) -> ExactRational {
    ExactRational::new(1.into(), num_bigint::BigInt::from(p).pow(k))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationModel {
    spec: FunctionSpec,
}

impl CorrelationModel {
    pub fn new(spec: FunctionSpec) -> Self {
        CorrelationModel { spec }
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn chi(&self) -> &RealPrimitiveCharacter {
        self.spec.chi()
    }

    pub fn kfree(&self) -> KFree {
        self.spec.kfree()
    }

    pub fn conductor(&self) -> u64 {
        self.spec.conductor()
    }

    fn k(&self) -> u32 {
        self.kfree().k()
    }

    fn check_prime(&self, p: u64) -> Result<()> {
        if !is_prime_u64(p) {
            return domain(format!("{p} is not prime"));
        }
        Ok(())
    }

    fn check_unramified(&self, p: u64) -> Result<()> {
        self.check_prime(p)?;
        if self.conductor() % p == 0 {
            return domain(format!("{p} divides the conductor {}", self.conductor()));
        }
        Ok(())
    }

    /// `F(p) = f(p)χ(p)`: `-1` exactly at the flips, `+1` at other primes.
    pub fn big_f(&self, p: u64) -> i8 {
        if self.spec.flips().contains(&p) {
            -1
        } else {
            1
        }
    }

    /// `F(p^k)`.
    pub fn f_value(&self, p: u64, k: u32) -> Result<ExactRational> {
        self.check_prime(p)?;
        if self.conductor() % p == 0 || k == 0 {
            return Ok(ExactRational::one());
        }
        if k >= self.k() {
            return Ok(ExactRational::zero());
        }
        Ok(int(self.big_f(p).pow(k) as i64))
    }

    /// `(F ∗ μ)(p^k) = F(p^k) - F(p^{k-1})`.
    pub fn fmu(&self, p: u64, k: u32) -> Result<ExactRational> {
        if k == 0 {
            return Ok(ExactRational::one());
        }
        Ok(self.f_value(p, k)? - self.f_value(p, k - 1)?)
    }

    pub fn h_value(&self, p: u64) -> Result<ExactRational> {
        self.check_unramified(p)?;
        let f = self.big_f(p) as i64;
        let pi = p as i64;
        let h = match self.kfree() {
            KFree::Squarefree => int(1) - rational(2 * (1 - f), pi) - rational(2 * f, pi * pi),
            KFree::Cubefree => {
                int(1) - rational(2 * (1 - f), pi) + rational(2 * (1 - f), pi * pi)
                    - rational(2, pi * pi * pi)
            }
        };
        assert!(!h.is_zero(), "h({p}) vanishes");
        Ok(h)
    }

    /// `h(p)` in floating point, for `p ∤ q`.
    pub fn h_f64(&self, p: u64) -> f64 {
        let f = self.big_f(p) as f64;
        let x = 1.0 / p as f64;
        match self.kfree() {
            KFree::Squarefree => 1.0 - 2.0 * (1.0 - f) * x - 2.0 * f * x * x,
            KFree::Cubefree => {
                1.0 - 2.0 * (1.0 - f) * x + 2.0 * (1.0 - f) * x * x - 2.0 * x * x * x
            }
        }
    }

    /// `M_p(F, F̄, d)` for `p^n ‖ d`, `p ∤ q`, by the closed case analysis.
    pub fn m_p_unramified(&self, p: u64, n: u32) -> Result<ExactRational> {
        self.check_unramified(p)?;
        if n == 0 {
            return self.h_value(p);
        }
        let f = self.big_f(p) as i64;
        let pi = p as i64;
        Ok(match (self.kfree(), n) {
            (KFree::Squarefree, 1) => int(1) - rational(2, pi * pi),
            (KFree::Squarefree, _) => int(1) - rational(1, pi * pi),
            (KFree::Cubefree, 1) => {
                int(1) - rational(2 * (1 - f), pi * pi) - rational(2 * f, pi * pi * pi)
            }
            (KFree::Cubefree, 2) => int(1) - rational(2, pi * pi * pi),
            (KFree::Cubefree, _) => int(1) - rational(1, pi * pi * pi),
        })
    }

    /// `M_p(F, F̄, d)` from the general sum
    /// `∑_{a=0}^{n} (|Fμ(p^a)|²/p^a + 2 ∑_{i>a} Fμ(p^a) Fμ(p^i) / p^i)`.
    pub fn m_p_series_sum(&self, p: u64, n: u32) -> Result<ExactRational> {
        self.check_unramified(p)?;
        let top = self.k();
        let fm: Vec<ExactRational> = (0..=top).map(|i| self.fmu(p, i)).collect::<Result<_>>()?;
        let mut acc = ExactRational::zero();
        for a in 0..=n.min(top) {
            let fa = &fm[a as usize];
            acc += fa * fa * inv_pow(p, a);
            for i in a + 1..=top {
                acc += int(2) * fa * &fm[i as usize] * inv_pow(p, i);
            }
        }
        Ok(acc)
    }

    /// `M_{p^l}(f, f̄, d)` for `p^l ‖ q`.
    pub fn m_pl_ramified(&self, p: u64, l: u32, d: u64) -> Result<ExactRational> {
        self.check_prime(p)?;
        if l == 0 || self.chi().factorization().exponent_of(p) != l {
            return domain(format!(
                "{p}^{l} does not exactly divide {}",
                self.conductor()
            ));
        }
        if d == 0 {
            return domain("d must be at least 1");
        }
        let mut v = 0u32;
        let mut m = d;
        while m % p == 0 {
            m /= p;
            v += 1;
        }
        if v + 1 < l {
            return Ok(ExactRational::zero());
        }
        if v + 1 == l {
            return Ok(-rational(1, p as i64));
        }
        let kk = v - l;
        let w = |j: u32| if j < self.k() { 1 } else { 0 };
        let mut s = ExactRational::zero();
        for j in 0..=kk {
            s += int(w(j)) * inv_pow(p, j);
        }
        Ok((int(1) - rational(1, p as i64)) * s - int(w(kk + 1)) * inv_pow(p, kk + 2))
    }

    /// `∏_{p^l ‖ q} M_{p^l}(f, f̄, d)`.
    pub fn ramified_product(&self, d: u64) -> Result<ExactRational> {
        let mut acc = ExactRational::one();
        for &(p, l) in self.chi().prime_powers() {
            acc *= self.m_pl_ramified(p, l, d)?;
            if acc.is_zero() {
                break;
            }
        }
        Ok(acc)
    }

    /// `g(p^n) = M_p(n) / h(p)` off the conductor, `1` on it.
    pub fn g_profile(&self, p: u64, n: u32) -> Result<ExactRational> {
        self.check_prime(p)?;
        if self.conductor() % p == 0 {
            return Ok(ExactRational::one());
        }
        Ok(self.m_p_unramified(p, n)? / self.h_value(p)?)
    }

    pub fn g_value(&self, d: u64) -> Result<ExactRational> {
        let fac = factorize(d, None)?;
        let mut acc = ExactRational::one();
        for &(p, e) in fac.factors() {
            acc *= self.g_profile(p, e)?;
        }
        Ok(acc)
    }

    /// `u(p^k)` from the closed formulas.
    pub fn u_prime_power(&self, p: u64, k: u32) -> Result<ExactRational> {
        self.check_prime(p)?;
        if k == 0 {
            return Ok(ExactRational::one());
        }
        if self.conductor() % p == 0 || k > self.k() {
            return Ok(ExactRational::zero());
        }
        let h = self.h_value(p)?;
        let one_f = int(1 - self.big_f(p) as i64);
        let pi = p as i64;
        let inv = rational(1, pi);
        Ok(match (self.kfree(), k) {
            (KFree::Squarefree, 1) => int(2) * &one_f / (&h * int(pi)) * (int(1) - &inv),
            (KFree::Squarefree, _) => ExactRational::one() / (&h * int(pi * pi)),
            (KFree::Cubefree, 1) => {
                int(2) * &one_f / (&h * int(pi)) * (int(1) - int(2) * &inv + &inv * &inv)
            }
            (KFree::Cubefree, 2) => int(2) * &one_f / (int(pi * pi) * &h) * (int(1) - &inv),
            (KFree::Cubefree, _) => ExactRational::one() / (&h * int(pi * pi * pi)),
        })
    }

    pub fn u_profile(&self) -> UProfile<'_> {
        UProfile { model: self }
    }

    pub fn u_value(&self, d: u64) -> Result<ExactRational> {
        let fac = factorize(d, None)?;
        let mut acc = ExactRational::one();
        for &(p, e) in fac.factors() {
            acc *= self.u_prime_power(p, e)?;
            if acc.is_zero() {
                break;
            }
        }
        Ok(acc)
    }

    /// `u(p^k)` in floating point.
    pub fn u_prime_power_f64(&self, p: u64, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        if self.conductor() % p == 0 || k > self.k() {
            return 0.0;
        }
        if self.big_f(p) == -1 {
            return rational_to_f64(&self.u_prime_power(p, k).expect("prime"));
        }
        let pk = (p as f64).powi(self.k() as i32);
        if k == self.k() {
            1.0 / (pk - 2.0)
        } else {
            0.0
        }
    }

    /// `(1 ∗ u)(d)` by summing `u` over the divisors of `d`.
    pub fn one_conv_u(&self, d: u64) -> Result<ExactRational> {
        let fac = factorize(d, None)?;
        let mut acc = ExactRational::zero();
        for e in fac.divisors() {
            acc += self.u_value(e)?;
        }
        Ok(acc)
    }

    /// Both sides of
    /// `∑_{R|m} |f(R)|²/R · ∏_{p^l‖q} (1[p^l | m/R] - 1[p^{l-1} | m/R]/p) = ∏_{p^l‖q} M_{p^l}(m)`
    /// for `rad(m) | q`.
    pub fn ramified_identity_sides(&self, m: u64) -> Result<(ExactRational, ExactRational)> {
        let fac = factorize(m, None)?;
        let q = self.conductor();
        if fac.factors().iter().any(|&(p, _)| q % p != 0) {
            return domain(format!("rad({m}) does not divide {q}"));
        }
        let mut left = ExactRational::zero();
        for r in fac.divisors() {
            let w = crate::arith::kfree_indicator(r, self.k())?;
            if w == 0 {
                continue;
            }
            let t = m / r;
            let mut prod = ExactRational::new(1.into(), r.into());
            for &(p, l) in self.chi().prime_powers() {
                let pl = p.pow(l);
                let a = if t % pl == 0 { 1 } else { 0 };
                let b = if t % (pl / p) == 0 { 1 } else { 0 };
                prod *= rational(a * p as i64 - b, p as i64);
            }
            left += prod;
        }
        Ok((left, self.ramified_product(m)?))
    }

    /// `S_d / C` by the local product `g(d') ∏_{p^l‖q} M_{p^l}(d)`, `d'` the part of `d`
    /// coprime to `q`.
    pub fn s_d_local(&self, d: u64) -> Result<ExactRational> {
        let ram = self.ramified_product(d)?;
        if ram.is_zero() {
            return Ok(ram);
        }
        Ok(self.g_value(d)? * ram)
    }

    /// `S_d / C` by the character-sum route
    /// `(1/q) ∑_{R|d, rad R | q} |f(R)|²/R · S_χ(d/R) · ∑_{e | d/R} u(e)`.
    pub fn s_d_character(&self, d: u64) -> Result<ExactRational> {
        let fac = factorize(d, None)?;
        let q = self.conductor();
        let mut acc = ExactRational::zero();
        for r in fac.divisors() {
            if factorize(r, None)?
                .factors()
                .iter()
                .any(|&(p, _)| q % p != 0)
            {
                continue;
            }
            if crate::arith::kfree_indicator(r, self.k())? == 0 {
                continue;
            }
            let s = char_autocorrelation(self.chi(), d / r);
            if s == 0 {
                continue;
            }
            acc += ExactRational::new(s.into(), r.into()) * self.one_conv_u(d / r)?;
        }
        Ok(acc / int(q as i64))
    }

    /// The exact `C`-free factors of `S_d` along both routes.
    pub fn s_d_routes(&self, d: u64) -> Result<(ExactRational, ExactRational)> {
        Ok((self.s_d_local(d)?, self.s_d_character(d)?))
    }
}

/// The generator `p ↦ (u(p), u(p²)[, u(p³)])` of the multiplicative function `u`.
#[derive(Debug, Clone, Copy)]
pub struct UProfile<'a> {
    model: &'a CorrelationModel,
}

impl UProfile<'_> {
    /// Largest exponent with possibly nonzero `u(p^k)`.
    pub fn max_exponent(&self) -> u32 {
        self.model.k()
    }

    pub fn triple(&self, p: u64) -> Result<Vec<ExactRational>> {
        (1..=self.max_exponent())
            .map(|k| self.model.u_prime_power(p, k))
            .collect()
    }
}

/// A certified Euler product `∏_{p <= P} local(p)` whose omitted factors satisfy
/// `|local(p) - 1| <= c p^{-s}` for `p > P`.
pub(crate) fn certified_product(
    primes: &[u32],
    skip: impl Fn(u64) -> bool,
    local: impl Fn(u64) -> f64,
    c: f64,
    s: f64,
) -> BoundedValue {
    let big_p = *primes.last().expect("nonempty prime list") as u64;
    let mut v = 1.0f64;
    let mut n = 0usize;
    for &p in primes {
        let p = p as u64;
        if skip(p) {
            continue;
        }
        v *= local(p);
        n += 1;
    }
    let eps = c * (big_p as f64).powf(-s);
    let log_bound = c * prime_zeta_tail_bound(big_p, s) / (1.0 - eps);
    let err = v.abs() * log_bound.exp_m1() + v.abs() * (n as f64 + 1.0) * 2.0 * f64::EPSILON;
    BoundedValue::new(v, err)
}

/// The global constants of a model: `C`, the `k`-free density `S₀`, and the
/// sums `U₀ = ∑ u(d)` and `C·U₀`, all as certified Euler products.
#[derive(Debug, Clone)]
pub struct ModelConstants {
    model: CorrelationModel,
    prime_bound: u64,
    c: BoundedValue,
    s0: BoundedValue,
    u0: BoundedValue,
    c_u0: BoundedValue,
}

impl ModelConstants {
    pub fn new(model: &CorrelationModel, prime_bound: u64) -> Result<Self> {
        if prime_bound < 100 {
            return domain(format!("prime bound {prime_bound} is below 100"));
        }
        if let Some(&top) = model.spec().flips().iter().next_back() {
            if prime_bound < top {
                return domain(format!(
                    "prime bound {prime_bound} is below the largest flip {top}"
                ));
            }
        }
        let sieve = SieveTable::try_new(prime_bound as usize)?;
        let primes = sieve.primes();
        let q = model.conductor();
        let k = model.k();
        let s = k as f64;
        let pk = |p: u64| (p as f64).powi(k as i32);
        let ramified = |p: u64| q % p == 0;
        let l0 = |p: u64| 1.0 + (1..=k).map(|j| model.u_prime_power_f64(p, j)).sum::<f64>();
        let big_p = prime_bound as f64;
        let c = certified_product(primes, ramified, |p| model.h_f64(p), 2.0, s);
        let s0 = certified_product(primes, |_| false, |p| 1.0 - 1.0 / pk(p), 1.0, s);
        let u0 = certified_product(primes, ramified, l0, 1.0 / (1.0 - 2.0 / big_p.powf(s)), s);
        let c_u0 = certified_product(primes, ramified, |p| model.h_f64(p) * l0(p), 1.0, s);
        Ok(ModelConstants {
            model: model.clone(),
            prime_bound,
            c,
            s0,
            u0,
            c_u0,
        })
    }

    pub fn model(&self) -> &CorrelationModel {
        &self.model
    }

    pub fn prime_bound(&self) -> u64 {
        self.prime_bound
    }

    pub fn c_value(&self) -> BoundedValue {
        self.c
    }

    /// Mean of `f²`, the density of `k`-free integers.
    pub fn s0(&self) -> BoundedValue {
        self.s0
    }

    fn exclusion_factor(&self, excluded: Option<u64>) -> f64 {
        match excluded {
            Some(l) => {
                1.0 + (1..=self.model.k())
                    .map(|j| self.model.u_prime_power_f64(l, j))
                    .sum::<f64>()
            }
            None => 1.0,
        }
    }

    /// `∑_{d, gcd(d, ℓ) = 1} u(d)` for an optional excluded prime `ℓ`.
    pub fn u0(&self, excluded: Option<u64>) -> BoundedValue {
        self.u0.scale(1.0 / self.exclusion_factor(excluded))
    }

    /// `C · ∑_{d, gcd(d, ℓ) = 1} u(d)`.
    pub fn c_u0(&self, excluded: Option<u64>) -> BoundedValue {
        self.c_u0.scale(1.0 / self.exclusion_factor(excluded))
    }

    /// `v(d) = C·g(d)`.
    pub fn v_value(&self, d: u64) -> Result<BoundedValue> {
        Ok(self.c.scale(rational_to_f64(&self.model.g_value(d)?)))
    }

    /// `S_d` by the local-product route.
    pub fn s_d_closed(&self, d: u64) -> Result<BoundedValue> {
        Ok(self.c.scale(rational_to_f64(&self.model.s_d_local(d)?)))
    }

    /// `S_d` along both closed routes.
    pub fn s_d_both(&self, d: u64) -> Result<(BoundedValue, BoundedValue)> {
        let (a, b) = self.model.s_d_routes(d)?;
        Ok((
            self.c.scale(rational_to_f64(&a)),
            self.c.scale(rational_to_f64(&b)),
        ))
    }
}

pub fn f_value(model: &CorrelationModel, p: u64, k: u32) -> Result<ExactRational> {
    model.f_value(p, k)
}

pub fn h_value(model: &CorrelationModel, p: u64) -> Result<ExactRational> {
    model.h_value(p)
}

pub fn c_value(model: &CorrelationModel, prime_bound: u64) -> Result<BoundedValue> {
    Ok(ModelConstants::new(model, prime_bound)?.c_value())
}

pub fn m_p_unramified(model: &CorrelationModel, p: u64, n: u32) -> Result<ExactRational> {
    model.m_p_unramified(p, n)
}

pub fn m_pl_ramified(model: &CorrelationModel, p: u64, l: u32, d: u64) -> Result<ExactRational> {
    model.m_pl_ramified(p, l, d)
}

pub fn u_value(model: &CorrelationModel, d: u64) -> Result<ExactRational> {
    model.u_value(d)
}

pub fn v_value(model: &CorrelationModel, d: u64, prime_bound: u64) -> Result<BoundedValue> {
    ModelConstants::new(model, prime_bound)?.v_value(d)
}

pub fn s_d_closed(model: &CorrelationModel, d: u64, prime_bound: u64) -> Result<BoundedValue> {
    ModelConstants::new(model, prime_bound)?.s_d_closed(d)
}

pub fn ramified_identity_sides(
    model: &CorrelationModel,
    m: u64,
) -> Result<(ExactRational, ExactRational)> {
    model.ramified_identity_sides(m)
}

/// A multiplicative function equal to `1` except on a finite set of primes,
/// where `f(p^j)` is given for `j = 1..=J` and stays at `f(p^J)` beyond.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnePretentious {
    exceptions: BTreeMap<u64, Vec<ExactRational>>,
}

impl OnePretentious {
    pub fn new(exceptions: BTreeMap<u64, Vec<ExactRational>>) -> Result<Self> {
        for (&p, vals) in &exceptions {
            if !is_prime_u64(p) {
                return domain(format!("exception {p} is not prime"));
            }
            if let Some(v) = vals.iter().find(|v| v.abs() > ExactRational::one()) {
                return domain(format!("|f({p}^j)| = {v} exceeds 1"));
            }
        }
        Ok(OnePretentious { exceptions })
    }

    pub fn trivial() -> Self {
        OnePretentious {
            exceptions: BTreeMap::new(),
        }
    }

    /// `F_p`: the twisted function `F` of `model` at `p`, and `1` at every other prime.
    pub fn local(model: &CorrelationModel, p: u64) -> Result<Self> {
        model.check_unramified(p)?;
        let vals = (1..=model.k())
            .map(|j| model.f_value(p, j))
            .collect::<Result<_>>()?;
        Self::new([(p, vals)].into_iter().collect())
    }

    /// A spec `f = μ_k² g` is itself never 1-pretentious: `g` agrees with a
    /// nonprincipal character off finitely many primes.
    pub fn from_spec(spec: &FunctionSpec) -> Result<Self> {
        domain(format!(
            "f pretends to be a character of conductor {}, not to 1",
            spec.conductor()
        ))
    }

    pub fn exceptions(&self) -> &BTreeMap<u64, Vec<ExactRational>> {
        &self.exceptions
    }

    fn value(&self, p: u64, j: u32) -> ExactRational {
        match self.exceptions.get(&p) {
            None => ExactRational::one(),
            Some(_) if j == 0 => ExactRational::one(),
            Some(v) if v.is_empty() => ExactRational::one(),
            Some(v) => v[(j as usize).min(v.len()) - 1].clone(),
        }
    }

    fn fmu(&self, p: u64, j: u32) -> ExactRational {
        if j == 0 {
            ExactRational::one()
        } else {
            self.value(p, j) - self.value(p, j - 1)
        }
    }

    /// `|fμ(p^k)|² + 2 ∑_{i>k} fμ(p^k) fμ(p^i) / p^{i-k}`.
    fn bracket(&self, p: u64, k: u32) -> ExactRational {
        let top = self.exceptions.get(&p).map_or(0, |v| v.len() as u32);
        let fk = self.fmu(p, k);
        let mut acc = &fk * &fk;
        for i in k + 1..=top {
            acc += int(2) * &fk * self.fmu(p, i) * inv_pow(p, i - k);
        }
        acc
    }

    /// `G(r)`; exact because the brackets equal `1` at `k = 0` and vanish at
    /// `k >= 1` for every prime outside the exception set.
    pub fn g_r(&self, r: u64) -> Result<BoundedValue> {
        Ok(BoundedValue::exact(rational_to_f64(&self.g_r_exact(r)?)))
    }

    pub fn g_r_exact(&self, r: u64) -> Result<ExactRational> {
        let fac = factorize(r, None)?;
        if fac
            .factors()
            .iter()
            .any(|(p, _)| !self.exceptions.contains_key(p))
        {
            return Ok(ExactRational::zero());
        }
        let mut acc = ExactRational::one();
        for &p in self.exceptions.keys() {
            acc *= self.bracket(p, fac.exponent_of(p));
        }
        Ok(acc)
    }

    /// `lim (1/x) ∑_{n<=x} f(n) f(n+d) = ∑_{r|d} G(r)/r`.
    pub fn correlation(&self, d: u64) -> Result<ExactRational> {
        let fac = factorize(d, None)?;
        let mut acc = ExactRational::zero();
        for r in fac.divisors() {
            acc += self.g_r_exact(r)? / int(r as i64);
        }
        Ok(acc)
    }
}

pub fn g_r(f: &OnePretentious, r: u64) -> Result<BoundedValue> {
    f.g_r(r)
}

pub fn correlation_1pretentious(f: &OnePretentious, d: u64) -> Result<ExactRational> {
    f.correlation(d)
}

/// Decides `u(p^k) < 0` without building the rational.
pub fn u_is_negative(model: &CorrelationModel, p: u64, k: u32) -> Result<bool> {
    Ok(model.u_prime_power(p, k)?.is_negative())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{build_real_primitive, ChiStarExtension};

    fn model(k: KFree, q: u64, flips: &[u64]) -> CorrelationModel {
        let chi = build_real_primitive(q, None).unwrap();
        let ext = ChiStarExtension::uniform(chi, 1).unwrap();
        CorrelationModel::new(FunctionSpec::new(k, ext, flips.iter().copied().collect()).unwrap())
    }

    #[test]
    fn big_f_examples() {
        let sq = model(KFree::Squarefree, 5, &[]);
        let cu = model(KFree::Cubefree, 5, &[2]);
        assert_eq!(sq.f_value(3, 1).unwrap(), int(1));
        assert_eq!(sq.f_value(3, 2).unwrap(), int(0));
        assert_eq!(cu.f_value(2, 2).unwrap(), int(1));
        assert_eq!(cu.f_value(2, 1).unwrap(), int(-1));
        assert_eq!(cu.f_value(5, 7).unwrap(), int(1));
        assert!(sq.f_value(4, 1).is_err());
    }

    #[test]
    fn h_examples() {
        let sq5 = model(KFree::Squarefree, 8, &[5]);
        assert_eq!(sq5.h_value(5).unwrap(), rational(7, 25));
        let cu2 = model(KFree::Cubefree, 5, &[2]);
        assert_eq!(cu2.h_value(2).unwrap(), rational(-1, 4));
        let sq = model(KFree::Squarefree, 5, &[]);
        assert_eq!(sq.h_value(7).unwrap(), rational(47, 49));
        assert!(sq.h_value(5).is_err());
    }

    #[test]
    fn closed_m_p_matches_general_sum() {
        for k in [KFree::Squarefree, KFree::Cubefree] {
            for flips in [&[][..], &[2, 3, 7, 11][..]] {
                let m = model(k, 5, flips);
                for p in [2u64, 3, 7, 11, 13] {
                    for n in 0..6 {
                        assert_eq!(
                            m.m_p_unramified(p, n).unwrap(),
                            m.m_p_series_sum(p, n).unwrap(),
                            "{k} p={p} n={n} flips={flips:?}"
                        );
                    }
                }
            }
        }
        let m = model(KFree::Squarefree, 5, &[]);
        assert_eq!(m.m_p_unramified(3, 0).unwrap(), rational(7, 9));
        assert_eq!(m.m_p_unramified(3, 2).unwrap(), rational(8, 9));
        let c = model(KFree::Cubefree, 5, &[]);
        assert_eq!(c.m_p_unramified(3, 3).unwrap(), rational(26, 27));
    }

    #[test]
    fn ramified_examples() {
        let m5 = model(KFree::Squarefree, 5, &[]);
        assert_eq!(m5.m_pl_ramified(5, 1, 1).unwrap(), rational(-1, 5));
        assert_eq!(m5.m_pl_ramified(5, 1, 5).unwrap(), rational(19, 25));
        let m8 = model(KFree::Squarefree, 8, &[]);
        assert_eq!(m8.m_pl_ramified(2, 3, 1).unwrap(), int(0));
        assert!(m8.m_pl_ramified(2, 2, 1).is_err());
        assert!(m5.m_pl_ramified(3, 1, 1).is_err());
    }

    #[test]
    fn ramified_identity_examples() {
        let m5 = model(KFree::Squarefree, 5, &[]);
        assert_eq!(
            m5.ramified_identity_sides(1).unwrap(),
            (rational(-1, 5), rational(-1, 5))
        );
        assert_eq!(
            m5.ramified_identity_sides(5).unwrap(),
            (rational(19, 25), rational(19, 25))
        );
        let m8 = model(KFree::Squarefree, 8, &[]);
        let (l, r) = m8.ramified_identity_sides(4).unwrap();
        assert_eq!(l, r);
        assert_eq!(l, rational(-1, 2));
        assert!(m5.ramified_identity_sides(10).is_err());
    }

    #[test]
    fn u_test_vectors() {
        let s2 = model(KFree::Squarefree, 5, &[2]);
        assert_eq!(s2.u_value(2).unwrap() * int(2), int(-4));
        assert_eq!(s2.u_value(4).unwrap() * int(4), int(-2));
        let s3 = model(KFree::Squarefree, 5, &[3]);
        assert_eq!(s3.u_value(3).unwrap() * int(3), int(-24));
        assert_eq!(s3.u_value(9).unwrap() * int(9), int(-9));
        let c2 = model(KFree::Cubefree, 5, &[2]);
        assert_eq!(c2.u_value(2).unwrap() * int(2), int(-4));
        assert_eq!(c2.u_value(4).unwrap() * int(4), int(-8));
        assert_eq!(c2.u_value(8).unwrap() * int(8), int(-4));
    }

    #[test]
    fn u_is_g_convolved_with_mobius() {
        for k in [KFree::Squarefree, KFree::Cubefree] {
            let m = model(k, 12, &[5, 7]);
            for d in 1..=2000u64 {
                assert_eq!(m.one_conv_u(d).unwrap(), m.g_value(d).unwrap(), "{k} d={d}");
            }
        }
    }

    #[test]
    fn float_u_matches_exact() {
        for k in [KFree::Squarefree, KFree::Cubefree] {
            let m = model(k, 5, &[2, 3]);
            for p in [2u64, 3, 5, 7, 101] {
                for j in 0..=4 {
                    let e = rational_to_f64(&m.u_prime_power(p, j).unwrap());
                    let f = m.u_prime_power_f64(p, j);
                    assert!((e - f).abs() <= 1e-15 * e.abs().max(1e-300), "{k} {p} {j}");
                }
            }
        }
    }

    #[test]
    fn routes_agree_exactly() {
        for q in [3u64, 4, 5, 8, 12] {
            for k in [KFree::Squarefree, KFree::Cubefree] {
                let m = model(k, q, &[7]);
                for d in 1..=100 {
                    let (a, b) = m.s_d_routes(d).unwrap();
                    assert_eq!(a, b, "q={q} {k} d={d}");
                }
            }
        }
    }

    #[test]
    fn constants_examples() {
        let sq = ModelConstants::new(&model(KFree::Squarefree, 5, &[]), 1_000_000).unwrap();
        let c = sq.c_value();
        assert!(c.value > 0.34 && c.value < 0.37 && c.err <= 1e-5, "{c}");
        assert!(
            (c.value - 0.350_689_242_087_6).abs() <= c.err + 1e-12,
            "{c}"
        );
        let s0 = sq.s0();
        assert!(s0.contains(6.0 / std::f64::consts::PI.powi(2)), "{s0}");
        let cu = ModelConstants::new(&model(KFree::Cubefree, 5, &[]), 1_000_000).unwrap();
        let c = cu.c_value();
        assert!(c.contains(0.687_899_122_977_7) && c.err <= 1e-10, "{c}");
        let fl = ModelConstants::new(&model(KFree::Squarefree, 5, &[2]), 1_000_000).unwrap();
        let ratio = fl.c_value().value / sq.c_value().value;
        assert!((ratio - (-0.5 / 0.5)).abs() < 1e-12);
        assert!(ModelConstants::new(&model(KFree::Squarefree, 5, &[]), 50).is_err());
        assert!(ModelConstants::new(&model(KFree::Squarefree, 5, &[211]), 200).is_err());
    }

    #[test]
    fn c_u0_is_product_of_c_and_u0() {
        for k in [KFree::Squarefree, KFree::Cubefree] {
            let mc = ModelConstants::new(&model(k, 5, &[2, 3]), 100_000).unwrap();
            let prod = mc.c_value() * mc.u0(None);
            assert!(prod.agrees_with(&mc.c_u0(None), 1e-12));
            let prod = mc.c_value() * mc.u0(Some(2));
            assert!(prod.agrees_with(&mc.c_u0(Some(2)), 1e-12));
        }
    }

    #[test]
    fn v_is_local_product() {
        let m = model(KFree::Squarefree, 5, &[3]);
        let mc = ModelConstants::new(&m, 100_000).unwrap();
        let sieve = SieveTable::new(100_000);
        for d in [1u64, 3, 9, 12, 45, 98] {
            let mut direct = 1.0;
            for &p in sieve.primes() {
                let p = p as u64;
                if p == 5 {
                    continue;
                }
                let n = factorize(d, None).unwrap().exponent_of(p);
                direct *= rational_to_f64(&m.m_p_unramified(p, n).unwrap());
            }
            assert!(mc.v_value(d).unwrap().contains(direct), "d={d}");
        }
        assert_eq!(mc.v_value(25).unwrap(), mc.v_value(1).unwrap());
        assert_eq!(mc.v_value(5 * 12).unwrap(), mc.v_value(12).unwrap());
    }

    #[test]
    fn local_perturbation_reproduces_m_p() {
        for k in [KFree::Squarefree, KFree::Cubefree] {
            let m = model(k, 5, &[2, 7]);
            for p in [2u64, 3, 7] {
                let fp = OnePretentious::local(&m, p).unwrap();
                for d in 1..=300u64 {
                    let n = factorize(d, None).unwrap().exponent_of(p);
                    assert_eq!(fp.correlation(d).unwrap(), m.m_p_unramified(p, n).unwrap());
                }
                assert_eq!(fp.correlation(1).unwrap(), m.m_p_unramified(p, 0).unwrap());
                assert_eq!(fp.g_r_exact(11).unwrap(), int(0));
            }
        }
        assert_eq!(
            OnePretentious::trivial().g_r(1).unwrap(),
            BoundedValue::exact(1.0)
        );
        assert!(OnePretentious::from_spec(model(KFree::Squarefree, 5, &[]).spec()).is_err());
        assert!(OnePretentious::new([(4, vec![int(0)])].into_iter().collect()).is_err());
        assert!(OnePretentious::new([(3, vec![int(2)])].into_iter().collect()).is_err());
    }
}
