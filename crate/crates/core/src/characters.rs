//! Real primitive Dirichlet characters and their completely multiplicative
//! extensions.
//!
//! A real primitive character of conductor `q` is a Kronecker symbol
//! `(D/·)` for a fundamental discriminant `D` with `|D| = q`. Some conductors
//! (8, 24, 40, ...) carry two such discriminants, so the sign is a parameter.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, nearest_int_dist, rational, ExactRational, Factorization};
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscriminantSign {
    Positive,
    Negative,
}

impl fmt::Display for DiscriminantSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscriminantSign::Positive => "positive",
            DiscriminantSign::Negative => "negative",
        })
    }
}

/// Conductors above this are rejected; the value table is `q` bytes and the
/// construction checks are `O(q · π(q))` for small `q`.
pub const MAX_CONDUCTOR: u64 = 50_000_000;

fn is_squarefree(n: u64) -> bool {
    factorize(n, None).map(|f| f.is_kfree(2)).unwrap_or(false)
}

/// Fundamental discriminants other than 1.
pub fn is_fundamental_discriminant(d: i64) -> bool {
    if d == 0 || d == 1 {
        return false;
    }
    let r = d.rem_euclid(4);
    if r == 1 {
        return is_squarefree(d.unsigned_abs());
    }
    if r == 0 {
        let m = d / 4;
        let mr = m.rem_euclid(4);
        return (mr == 2 || mr == 3) && is_squarefree(m.unsigned_abs());
    }
    false
}

/// Jacobi symbol `(a/n)` for odd `n >= 1`.
fn jacobi(a: i64, n: u64) -> i8 {
    debug_assert!(n % 2 == 1);
    let mut a = a.rem_euclid(n as i64) as u64;
    let mut n = n;
    let mut t = 1i8;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if n % 8 == 3 || n % 8 == 5 {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// Kronecker symbol `(d/n)` for `n >= 1`.
pub fn kronecker(d: i64, n: u64) -> i8 {
    debug_assert!(n >= 1);
    let tz = n.trailing_zeros();
    let odd = n >> tz;
    let two = if d % 2 == 0 {
        0
    } else {
        match d.rem_euclid(8) {
            1 | 7 => 1,
            _ => -1,
        }
    };
    let mut v = jacobi(d, odd);
    for _ in 0..tz {
        v *= two;
    }
    v
}

/// All admissible conductors `q <= max`.
pub fn admissible_conductors(max: u64) -> Vec<u64> {
    (3..=max)
        .filter(|&q| {
            let q = q as i64;
            is_fundamental_discriminant(q) || is_fundamental_discriminant(-q)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealPrimitiveCharacter {
    q: u64,
    discriminant: i64,
    factorization: Factorization,
    // values[a] = χ(a) for 0 <= a < q
    values: Vec<i8>,
}

/// Builds the real primitive character of conductor `q`.
///
/// `sign` selects the discriminant `+q` or `-q`; `None` prefers `+q` when it is
/// fundamental. The table is checked against every defining property before
/// it is returned.
pub fn build_real_primitive(
    q: u64,
    sign: Option<DiscriminantSign>,
) -> Result<RealPrimitiveCharacter> {
    if q > MAX_CONDUCTOR {
        return domain(format!(
            "conductor {q} exceeds the supported maximum {MAX_CONDUCTOR}"
        ));
    }
    let qi = q as i64;
    let pos = is_fundamental_discriminant(qi);
    let neg = is_fundamental_discriminant(-qi);
    let discriminant = match sign {
        None if pos => qi,
        None if neg => -qi,
        None => return domain(format!("{q} is not an admissible conductor")),
        Some(DiscriminantSign::Positive) if pos => qi,
        Some(DiscriminantSign::Negative) if neg => -qi,
        Some(s) => {
            return domain(format!(
                "{q} is not an admissible conductor for a {s} discriminant"
            ))
        }
    };
    let values: Vec<i8> = (0..q)
        .map(|a| {
            if a == 0 {
                0
            } else {
                kronecker(discriminant, a)
            }
        })
        .collect();
    let chi = RealPrimitiveCharacter {
        q,
        discriminant,
        factorization: factorize(q, None)?,
        values,
    };
    chi.check_invariants()?;
    Ok(chi)
}

impl RealPrimitiveCharacter {
    pub fn conductor(&self) -> u64 {
        self.q
    }

    pub fn discriminant(&self) -> i64 {
        self.discriminant
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    /// `(p, l)` with `p^l ‖ q`.
    pub fn prime_powers(&self) -> &[(u64, u32)] {
        self.factorization.factors()
    }

    pub fn radical(&self) -> u64 {
        self.factorization.radical()
    }

    pub fn divides_conductor(&self, p: u64) -> bool {
        self.q % p == 0
    }

    #[inline]
    pub fn value(&self, n: u64) -> i8 {
        self.values[(n % self.q) as usize]
    }

    /// `χ(a)` for `a = 1..=q`.
    pub fn table(&self) -> Vec<i8> {
        (1..=self.q).map(|a| self.value(a)).collect()
    }

    fn check_invariants(&self) -> Result<()> {
        let q = self.q;
        for a in 0..q {
            let v = self.values[a as usize];
            let unit = a.gcd(&q) == 1;
            if unit != (v != 0) || !(-1..=1).contains(&v) {
                return domain(format!("{q}: reality/support check failed at a = {a}"));
            }
        }
        if self.values.iter().map(|&v| v as i64).sum::<i64>() != 0 {
            return domain(format!("{q}: character sum over a period is not zero"));
        }
        // Complete multiplicativity on residues: every unit is a product of primes < q.
        if q <= 20_000 {
            let small = crate::arith::SieveTable::new(q as usize);
            for &p in small.primes() {
                let p = p as u64;
                if q % p == 0 {
                    continue;
                }
                let vp = self.values[(p % q) as usize];
                for a in 1..q {
                    if self.values[(a * p % q) as usize] != self.values[a as usize] * vp {
                        return domain(format!("{q}: multiplicativity check failed at {a}·{p}"));
                    }
                }
            }
        }
        // Primitivity: not induced from q/p for any p | q.
        for &(p, _) in self.factorization.factors() {
            let sub = q / p;
            let induced = (1..q).all(|a| {
                let b = (a + sub) % q;
                let (va, vb) = (self.values[a as usize], self.values[b as usize]);
                va == 0 || vb == 0 || va == vb
            });
            if induced {
                return domain(format!(
                    "{q}: primitivity check failed, induced from modulus {sub}"
                ));
            }
        }
        Ok(())
    }
}

/// `S_χ(h) = ∑_{a=1}^{q} χ(a) χ(a + h)` by direct summation.
pub fn char_autocorrelation(chi: &RealPrimitiveCharacter, h: u64) -> i64 {
    let q = chi.conductor();
    let shift = h % q;
    (1..=q)
        .map(|a| chi.value(a) as i64 * chi.value(a + shift) as i64)
        .sum()
}

/// `S_χ(h) = q ∏_{p^l ‖ q} (1[p^l | h] - (1/p)·1[p^{l-1} | h])`.
pub fn char_autocorrelation_closed(chi: &RealPrimitiveCharacter, h: u64) -> ExactRational {
    let mut acc = ExactRational::from_integer(chi.conductor().into());
    for &(p, l) in chi.prime_powers() {
        let pl = p.pow(l);
        let full = if h % pl == 0 { 1 } else { 0 };
        let part = if h % (pl / p) == 0 { 1 } else { 0 };
        acc *= rational(full * p as i64 - part, p as i64);
        if acc.is_zero() {
            break;
        }
    }
    acc
}

/// The divisors `g` of `rad(q) / 2^κ`, `κ = 1[2 | q]`, with their Möbius values.
pub fn kappa_divisors(chi: &RealPrimitiveCharacter) -> Vec<(u64, i8)> {
    squarefree_divisors(
        chi.prime_powers()
            .iter()
            .map(|&(p, _)| p)
            .filter(|&p| p != 2),
    )
}

/// Squarefree products of the given primes with their Möbius values, ascending.
pub(crate) fn squarefree_divisors(primes: impl Iterator<Item = u64>) -> Vec<(u64, i8)> {
    let mut out = vec![(1u64, 1i8)];
    for p in primes {
        let len = out.len();
        for i in 0..len {
            let (g, m) = out[i];
            out.push((g * p, -m));
        }
    }
    out.sort_unstable();
    out
}

/// `∑_{g | rad(q)/2^κ} μ(g)/g² ‖g t‖`, nonnegative for every `t`.
pub fn kappa_positive_sum(chi: &RealPrimitiveCharacter, t: &ExactRational) -> ExactRational {
    kappa_divisors(chi)
        .into_iter()
        .map(|(g, m)| {
            let gt = t * ExactRational::from_integer(g.into());
            rational(m as i64, (g * g) as i64) * nearest_int_dist(&gt)
        })
        .fold(ExactRational::zero(), |a, b| a + b)
}

/// `χ*`: completely multiplicative, equal to `χ` off the conductor and to a
/// chosen sign at each ramified prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChiStarExtension {
    base: RealPrimitiveCharacter,
    ramified_signs: BTreeMap<u64, i8>,
}

impl ChiStarExtension {
    pub fn new(base: RealPrimitiveCharacter, ramified_signs: BTreeMap<u64, i8>) -> Result<Self> {
        let ramified: Vec<u64> = base.prime_powers().iter().map(|&(p, _)| p).collect();
        let keys: Vec<u64> = ramified_signs.keys().copied().collect();
        if keys != ramified {
            return domain(format!(
                "ramified signs must cover exactly the primes {:?} dividing {}, got {:?}",
                ramified,
                base.conductor(),
                keys
            ));
        }
        if let Some((p, s)) = ramified_signs.iter().find(|(_, &s)| s != 1 && s != -1) {
            return domain(format!("ramified sign at {p} must be ±1, got {s}"));
        }
        Ok(ChiStarExtension {
            base,
            ramified_signs,
        })
    }

    /// All ramified signs equal to `sign`.
    pub fn uniform(base: RealPrimitiveCharacter, sign: i8) -> Result<Self> {
        let signs = base
            .prime_powers()
            .iter()
            .map(|&(p, _)| (p, sign))
            .collect();
        Self::new(base, signs)
    }

    pub fn base(&self) -> &RealPrimitiveCharacter {
        &self.base
    }

    pub fn ramified_signs(&self) -> &BTreeMap<u64, i8> {
        &self.ramified_signs
    }

    /// `χ*(p)` at a prime.
    pub fn at_prime(&self, p: u64) -> i8 {
        match self.ramified_signs.get(&p) {
            Some(&s) => s,
            None => self.base.value(p),
        }
    }

    pub fn value(&self, n: u64) -> i8 {
        if n == 0 {
            return 0;
        }
        let mut m = n;
        let mut sign = 1i8;
        for (&p, &s) in &self.ramified_signs {
            while m % p == 0 {
                m /= p;
                sign *= s;
            }
        }
        sign * self.base.value(m)
    }
}

pub fn chi_star_value(ext: &ChiStarExtension, n: u64) -> i8 {
    ext.value(n)
}
