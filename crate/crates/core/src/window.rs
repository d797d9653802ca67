//! Window variances `Λ(H)`, the `‖·‖`-kernel functionals `S(H)`, `Σ(H)`, `𝓜(H)`,
//! the lcm witnesses and power-law fits.

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{
    delta_ratio, dist_ratio, lcm_first_odds, nearest_int_dist, rational, rational_to_f64,
    ExactRational, NeumaierSum, SieveTable,
};
use crate::bounded::BoundedValue;
use crate::characters::squarefree_divisors;
use crate::correlation::{CorrelationModel, ModelConstants};
use crate::error::{capacity, domain, Result};
use crate::multfun::KFree;

const SUM_CHUNK: usize = 4096;
/// Nonzero `u(d)` entries beyond this many are refused.
pub const MAX_U_SUPPORT: usize = 200_000_000;

/// The nonzero values of `u` on `1..=limit`, ascending in `d`.
#[derive(Debug, Clone)]
pub struct UTable {
    limit: u64,
    entries: Vec<(u64, f64)>,
}

impl UTable {
    /// Enumerates the support of `u` multiplicatively: away from the flips,
    /// `u(p^e) ≠ 0` only for `e = k`.
    pub fn build(model: &CorrelationModel, limit: u64) -> Result<Self> {
        let k = model.kfree().k();
        let root = limit.nth_root(k) as usize + 1;
        let sieve = SieveTable::try_new(root.max(2))?;
        let q = model.conductor();
        let mut gens: Vec<(u64, Vec<(u64, f64)>)> = Vec::new();
        let mut primes: Vec<u64> = sieve.primes().iter().map(|&p| p as u64).collect();
        primes.extend(model.spec().flips().iter().copied());
        primes.sort_unstable();
        primes.dedup();
        for p in primes {
            if q % p == 0 || p > limit {
                continue;
            }
            let mut powers = Vec::new();
            let mut pe = 1u64;
            for e in 1..=k {
                pe = match pe.checked_mul(p) {
                    Some(v) if v <= limit => v,
                    _ => break,
                };
                let u = model.u_prime_power_f64(p, e);
                if u != 0.0 {
                    powers.push((pe, u));
                }
            }
            if !powers.is_empty() {
                gens.push((p, powers));
            }
        }
        let mut entries = Vec::new();
        let mut stack: Vec<(usize, u64, f64)> = vec![(0, 1, 1.0)];
        while let Some((i, d, u)) = stack.pop() {
            entries.push((d, u));
            if entries.len() > MAX_U_SUPPORT {
                return capacity(format!(
                    "support of u below {limit} exceeds {MAX_U_SUPPORT}"
                ));
            }
            for (j, (_, powers)) in gens.iter().enumerate().skip(i) {
                let smallest = powers[0].0;
                if d.saturating_mul(smallest) > limit {
                    continue;
                }
                for &(pe, up) in powers {
                    if let Some(nd) = d.checked_mul(pe) {
                        if nd <= limit {
                            stack.push((j + 1, nd, u * up));
                        }
                    }
                }
            }
        }
        entries.sort_unstable_by_key(|e| e.0);
        Ok(UTable { limit, entries })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }
}

/// Deterministic parallel sum of `term(d, u)` over a table, with the sum of
/// absolute values for rounding control.
fn table_sum(entries: &[(u64, f64)], term: impl Fn(u64, f64) -> f64 + Sync) -> (f64, f64) {
    let parts: Vec<(NeumaierSum, NeumaierSum)> = entries
        .par_chunks(SUM_CHUNK)
        .map(|chunk| {
            let mut s = NeumaierSum::default();
            let mut a = NeumaierSum::default();
            for &(d, u) in chunk {
                let t = term(d, u);
                s.add(t);
                a.add(t.abs());
            }
            (s, a)
        })
        .collect();
    let mut s = NeumaierSum::default();
    let mut a = NeumaierSum::default();
    for (ps, pa) in &parts {
        s.merge(ps);
        a.merge(pa);
    }
    (s.value(), a.value())
}

/// `{R : rad(R) | q, R k-free}`.
fn r_set(model: &CorrelationModel) -> Vec<u64> {
    let k = model.kfree().k();
    let mut out = vec![1u64];
    for &(p, _) in model.chi().prime_powers() {
        let len = out.len();
        let mut pe = 1;
        for _ in 1..k {
            pe *= p;
            for i in 0..len {
                out.push(out[i] * pe);
            }
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `g | rad(q)`.
    Full,
    /// `g | rad(q)/2^κ`, `κ = 1[2 | q]`.
    HalfKappa,
}

fn g_set(model: &CorrelationModel, variant: Variant) -> Vec<(u64, i8)> {
    let primes = model.chi().prime_powers().iter().map(|&(p, _)| p);
    match variant {
        Variant::Full => squarefree_divisors(primes),
        Variant::HalfKappa => squarefree_divisors(primes.filter(|&p| p != 2)),
    }
}

fn rounding(abs_sum: f64) -> f64 {
    abs_sum * 16.0 * f64::EPSILON
}

/// `Λ(H) = H·S₀ + 2 ∑_{h=1}^{H-1} (H-h) S_h`.
pub fn lambda_from_correlations(consts: &ModelConstants, big_h: u64) -> Result<BoundedValue> {
    if big_h == 0 {
        return domain("H must be at least 1");
    }
    let model = consts.model();
    let terms: Vec<f64> = (1..big_h)
        .into_par_iter()
        .map(|h| Ok((big_h - h) as f64 * rational_to_f64(&model.s_d_local(h)?)))
        .collect::<Result<_>>()?;
    let mut s = NeumaierSum::default();
    let mut a = NeumaierSum::default();
    for t in &terms {
        s.add(*t);
        a.add(t.abs());
    }
    let pairs = consts
        .c_value()
        .scale(2.0 * s.value())
        .with_extra_err(rounding(2.0 * a.value()));
    Ok(consts.s0().scale(big_h as f64) + pairs)
}

/// `Λ(H) = C q ∑_d u(d) d ∑_R ∑_{g | rad q} μ(g)/g² Δ(Hg/(qdR))`.
///
/// Terms with `d` beyond the cutoff all have `Hg/(qdR) < 1`, so `Δ(t) = t - t²`
/// there; the `t²` part cancels because `∑_{g | rad q} μ(g) = 0`, and the
/// linear part is `α·(U₀ - ∑_{d<=D} u(d))` with `α = (H/q) ∑_R 1/R ∑_g μ(g)/g`.
pub fn lambda_closed(
    consts: &ModelConstants,
    big_h: u64,
    d_cutoff: Option<u64>,
) -> Result<BoundedValue> {
    if big_h == 0 {
        return domain("H must be at least 1");
    }
    let model = consts.model();
    let q = model.conductor();
    let rad = model.chi().radical();
    let min_cut = 4 * big_h * rad;
    let cut = d_cutoff.unwrap_or(min_cut);
    if cut < min_cut {
        return domain(format!("d cutoff {cut} is below 4·H·rad(q) = {min_cut}"));
    }
    let rs = r_set(model);
    let gs = g_set(model, Variant::Full);
    let table = UTable::build(model, cut)?;
    let (a, a_abs) = table_sum(table.entries(), |d, u| {
        let mut k = 0.0;
        for &r in &rs {
            for &(g, m) in &gs {
                let w = delta_ratio(big_h as u128 * g as u128, (q * r) as u128 * d as u128);
                k += m as f64 * w / (g * g) as f64;
            }
        }
        u * d as f64 * k
    });
    let (p0, p0_abs) = table_sum(table.entries(), |_, u| u);
    let alpha = big_h as f64 / q as f64
        * rs.iter().map(|&r| 1.0 / r as f64).sum::<f64>()
        * gs.iter().map(|&(g, m)| m as f64 / g as f64).sum::<f64>();
    let head = consts
        .c_value()
        .scale(a - alpha * p0)
        .with_extra_err(consts.c_value().value.abs() * rounding(a_abs + alpha.abs() * p0_abs));
    let tail = consts.c_u0(None).scale(alpha);
    Ok((head + tail).scale(q as f64))
}

fn rational_parts(h: &ExactRational) -> Result<(u64, u64)> {
    if !h.is_positive() {
        return domain("H must be positive");
    }
    match (h.numer().to_u64(), h.denom().to_u64()) {
        (Some(a), Some(b)) if a < (1 << 62) && b < (1 << 62) => Ok((a, b)),
        _ => capacity(format!("H = {h} is too large for the floating kernel sum")),
    }
}

/// The `‖·‖`-kernel sum `∑_d u(d) d ∑_R ∑_g μ(g)/g² ‖Hg/(dR)‖` over `d` coprime to an
/// optional excluded prime; `Variant::Full` is `S(H)`, `Variant::HalfKappa` is `Σ(H)`
/// (and `𝓜(H)` with an excluded prime).
///
/// Beyond the cutoff every `Hg/(dR) <= 1/4`, so the tail is
/// `H ∑_R 1/R ∑_g μ(g)/g · (U₀ - ∑_{d<=D} u(d))`.
pub fn sigma_h(
    consts: &ModelConstants,
    big_h: &ExactRational,
    variant: Variant,
    excluded: Option<u64>,
    d_cutoff: Option<u64>,
) -> Result<BoundedValue> {
    let (a, b) = rational_parts(big_h)?;
    let model = consts.model();
    let rad = model.chi().radical();
    let min_cut = (4 * a as u128 * rad as u128).div_ceil(b as u128);
    let min_cut =
        u64::try_from(min_cut).map_err(|_| crate::Error::Capacity("cutoff overflow".into()))?;
    let cut = d_cutoff.unwrap_or(min_cut);
    if cut < min_cut {
        return domain(format!("d cutoff {cut} is below 4·H·rad(q) = {min_cut}"));
    }
    let rs = r_set(model);
    let gs = g_set(model, variant);
    let table = UTable::build(model, cut)?;
    let keep = |d: u64| excluded.is_none_or(|l| d % l != 0);
    let (main, main_abs) = table_sum(table.entries(), |d, u| {
        if !keep(d) {
            return 0.0;
        }
        let mut k = 0.0;
        for &r in &rs {
            for &(g, m) in &gs {
                let w = dist_ratio(a as u128 * g as u128, b as u128 * d as u128 * r as u128);
                k += m as f64 * w / (g * g) as f64;
            }
        }
        u * d as f64 * k
    });
    let (p0, p0_abs) = table_sum(table.entries(), |d, u| if keep(d) { u } else { 0.0 });
    let gamma = a as f64 / b as f64
        * rs.iter().map(|&r| 1.0 / r as f64).sum::<f64>()
        * gs.iter().map(|&(g, m)| m as f64 / g as f64).sum::<f64>();
    let head = BoundedValue::new(main - gamma * p0, rounding(main_abs + gamma.abs() * p0_abs));
    Ok(head + consts.u0(excluded).scale(gamma))
}

/// `𝓜(H)`: the half-κ kernel sum over `d` coprime to `excluded_prime`.
pub fn script_m(
    consts: &ModelConstants,
    big_h: &ExactRational,
    excluded_prime: u64,
    d_cutoff: Option<u64>,
) -> Result<BoundedValue> {
    if excluded_prime != 2 && excluded_prime != 3 {
        return domain(format!(
            "excluded prime must be 2 or 3, got {excluded_prime}"
        ));
    }
    sigma_h(
        consts,
        big_h,
        Variant::HalfKappa,
        Some(excluded_prime),
        d_cutoff,
    )
}

/// `max |Σ(H)|` over the given grid: a truncated stand-in for `sup_H |Σ(H)|`.
pub fn truncated_sup(consts: &ModelConstants, h_grid: &[u64]) -> Result<BoundedValue> {
    let vals: Vec<BoundedValue> = h_grid
        .par_iter()
        .map(|&h| {
            sigma_h(
                consts,
                &ExactRational::from_integer(h.into()),
                Variant::HalfKappa,
                None,
                None,
            )
        })
        .collect::<Result<_>>()?;
    vals.into_iter()
        .map(|v| BoundedValue::new(v.value.abs(), v.err))
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| crate::Error::Domain("empty H grid".into()))
}

/// Both sides of `4Λ(qH) - Λ(2qH) = 2Cq·S(H)`.
pub fn kernel_bridge(consts: &ModelConstants, big_h: u64) -> Result<(BoundedValue, BoundedValue)> {
    let q = consts.model().conductor();
    let lhs = lambda_closed(consts, q * big_h, None)?.scale(4.0)
        - lambda_closed(consts, 2 * q * big_h, None)?;
    let s = sigma_h(
        consts,
        &ExactRational::from_integer(big_h.into()),
        Variant::Full,
        None,
        None,
    )?;
    let rhs = consts.c_value().scale(2.0 * q as f64) * s;
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub h: u64,
    pub value_from_sd: BoundedValue,
    pub value_closed: BoundedValue,
    /// `(value, x)` when an empirical table was supplied.
    pub value_empirical: Option<(f64, u64)>,
}

impl LambdaReport {
    pub fn routes_agree(&self) -> bool {
        self.value_from_sd.agrees_with(&self.value_closed, 0.0)
    }
}

pub fn lambda_report(
    consts: &ModelConstants,
    big_h: u64,
    empirical: Option<(&crate::multfun::FTable, u64)>,
) -> Result<LambdaReport> {
    let value_empirical = match empirical {
        Some((t, x)) => Some((t.lambda(big_h, x)?, x)),
        None => None,
    };
    Ok(LambdaReport {
        h: big_h,
        value_from_sd: lambda_from_correlations(consts, big_h)?,
        value_closed: lambda_closed(consts, big_h, None)?,
        value_empirical,
    })
}

/// `(∑_{n<=H} |u(n)| n, ∑_{n<=H, gcd(n, m)=1} u(n) n)`.
pub fn u_moment_sums(model: &CorrelationModel, big_h: u64, coprime_to: u64) -> Result<(f64, f64)> {
    let t = UTable::build(model, big_h)?;
    let (abs_sum, _) = table_sum(t.entries(), |d, u| (u * d as f64).abs());
    let (restricted, _) = table_sum(t.entries(), |d, u| {
        if d.gcd(&coprime_to) == 1 {
            u * d as f64
        } else {
            0.0
        }
    });
    Ok((abs_sum, restricted))
}

/// One witness construction: `H₀ = scale · lcm(3, 5, ..., 2M+1)`, evaluated on the
/// `d <= 2M+1` coprime to `coprime_filter`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessConfig {
    pub m: u32,
    pub coprime_filter: u64,
    pub scale: (i64, i64),
    pub kappa: bool,
    /// Multiples `c` of `H₀` at which the functional is evaluated, each with the
    /// exact value every `‖c H₀ g / d‖` must take.
    pub multiples: Vec<(u64, (i64, i64))>,
    /// Prime excluded from `d` in `𝓜`.
    pub excluded: u64,
}

impl WitnessConfig {
    /// The construction for a model, or an error in the case `F(2) = F(3) = -1`
    /// (squarefree), where no witness is available.
    pub fn for_model(model: &CorrelationModel, m: u32) -> Result<Self> {
        let f2 = model.conductor() % 2 == 0 || model.big_f(2) == 1;
        let f3 = model.conductor() % 3 == 0 || model.big_f(3) == 1;
        let kappa = model.conductor() % 2 == 0;
        let (filter, scale, multiples, excluded) = match (model.kfree(), f2, f3) {
            (KFree::Squarefree, true, true) => (6, (1, 2), vec![(1, (1, 2))], 2),
            (KFree::Squarefree, false, true) => (2, (1, 4), vec![(1, (1, 4)), (2, (1, 2))], 2),
            (KFree::Squarefree, true, false) => (6, (1, 2), vec![(1, (1, 2)), (3, (1, 2))], 3),
            (KFree::Squarefree, false, false) => {
                return domain("no witness construction when F(2) = F(3) = -1")
            }
            (KFree::Cubefree, true, _) => (2, (1, 2), vec![(1, (1, 2))], 2),
            (KFree::Cubefree, false, _) => (2, (1, 4), vec![(1, (1, 4)), (2, (1, 2))], 2),
        };
        Ok(WitnessConfig {
            m,
            coprime_filter: filter,
            scale,
            kappa,
            multiples,
            excluded,
        })
    }

    pub fn h0(&self) -> ExactRational {
        ExactRational::new(BigInt::from(lcm_first_odds(self.m)), 1.into())
            * rational(self.scale.0, self.scale.1)
    }

    /// `d <= 2M+1` coprime to the filter.
    pub fn active_range(&self) -> Vec<u64> {
        (1..=2 * self.m as u64 + 1)
            .filter(|d| d.gcd(&self.coprime_filter) == 1)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessValue {
    /// `c` in `c·H₀`.
    pub multiple: u64,
    /// `∑_{active d} u(d) d ∑_{g | rad q / 2^κ} μ(g)/g² ‖c H₀ g/d‖`, a lower bound for
    /// `𝓜(c H₀)` (and for `Σ(c H₀)` when no flips are present).
    pub lower_bound: String,
    pub lower_bound_f64: f64,
    pub norms_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub m: u32,
    pub h0: String,
    pub active_d: Vec<u64>,
    pub values: Vec<WitnessValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub config: WitnessConfig,
    pub rows: Vec<WitnessRow>,
    /// `(M, c, value(4M)/value(M))` for each `M` whose `4M` is also present.
    pub ratios: Vec<(u32, u64, f64)>,
}

/// Largest `M` accepted by [`witness_experiment`].
pub const MAX_WITNESS_M: u32 = 64;

pub fn witness_experiment(model: &CorrelationModel, m_list: &[u32]) -> Result<WitnessReport> {
    if let Some(&m) = m_list.iter().find(|&&m| m == 0 || m > MAX_WITNESS_M) {
        return domain(format!("M = {m} outside 1..={MAX_WITNESS_M}"));
    }
    let gs = g_set(model, Variant::HalfKappa);
    let rows: Vec<WitnessRow> = m_list
        .iter()
        .map(|&m| {
            let cfg = WitnessConfig::for_model(model, m)?;
            let h0 = cfg.h0();
            let active = cfg.active_range();
            let mut values = Vec::new();
            for &(c, (en, ed)) in &cfg.multiples {
                let expect = rational(en, ed);
                let h = &h0 * ExactRational::from_integer(c.into());
                let mut norms_exact = true;
                let mut acc = ExactRational::zero();
                for &d in &active {
                    let mut inner = ExactRational::zero();
                    for &(g, mu) in &gs {
                        let t = &h * rational(g as i64, d as i64);
                        let n = nearest_int_dist(&t);
                        if n != expect {
                            norms_exact = false;
                        }
                        inner += rational(mu as i64, (g * g) as i64) * n;
                    }
                    let u = model.u_value(d)?;
                    if !u.is_zero() {
                        acc += u * ExactRational::from_integer(d.into()) * inner;
                    }
                }
                values.push(WitnessValue {
                    multiple: c,
                    lower_bound: crate::arith::format_rational(&acc),
                    lower_bound_f64: rational_to_f64(&acc),
                    norms_exact,
                });
            }
            Ok(WitnessRow {
                m,
                h0: crate::arith::format_rational(&h0),
                active_d: active,
                values,
            })
        })
        .collect::<Result<_>>()?;
    let config = WitnessConfig::for_model(model, m_list.first().copied().unwrap_or(1))?;
    let mut ratios = Vec::new();
    for row in &rows {
        if let Some(big) = rows.iter().find(|r| r.m == 4 * row.m) {
            for (a, b) in row.values.iter().zip(&big.values) {
                ratios.push((row.m, a.multiple, b.lower_bound_f64 / a.lower_bound_f64));
            }
        }
    }
    Ok(WitnessReport {
        config,
        rows,
        ratios,
    })
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub slope: f64,
    /// `(H, Λ(H))` used in the fit.
    pub points: Vec<(u64, BoundedValue)>,
    /// `H` values dropped because `Λ(H)` was within its error of zero.
    pub excluded: Vec<u64>,
}

/// Slope of `log Λ(H)` against `log H` over a geometric list of at least six `H`.
pub fn growth_exponent(consts: &ModelConstants, h_list: &[u64]) -> Result<GrowthFit> {
    if h_list.len() < 6 {
        return domain(format!("need at least 6 H values, got {}", h_list.len()));
    }
    let r0 = h_list[1] as f64 / h_list[0] as f64;
    if r0 <= 1.0
        || h_list
            .windows(2)
            .any(|w| ((w[1] as f64 / w[0] as f64) - r0).abs() > 1e-9 * r0)
    {
        return domain("H values must form an increasing geometric sequence");
    }
    let values: Vec<BoundedValue> = h_list
        .par_iter()
        .map(|&h| lambda_closed(consts, h, None))
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for (&h, v) in h_list.iter().zip(values) {
        if v.value <= v.err {
            log::warn!("Λ({h}) = {v} is indistinguishable from 0; point excluded from the fit");
            excluded.push(h);
        } else {
            points.push((h, v));
        }
    }
    if points.len() < 2 {
        return domain("fewer than two usable points");
    }
    let xs: Vec<f64> = points.iter().map(|(h, _)| (*h as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.value.ln()).collect();
    Ok(GrowthFit {
        slope: ols_slope(&xs, &ys),
        points,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{build_real_primitive, ChiStarExtension};
    use crate::multfun::FunctionSpec;

    fn model(k: KFree, q: u64, flips: &[u64]) -> CorrelationModel {
        let chi = build_real_primitive(q, None).unwrap();
        let ext = ChiStarExtension::uniform(chi, 1).unwrap();
        CorrelationModel::new(FunctionSpec::new(k, ext, flips.iter().copied().collect()).unwrap())
    }

    fn hq(n: i64) -> ExactRational {
        rational(n, 1)
    }

    #[test]
    fn u_table_matches_exact_values() {
        for k in [KFree::Squarefree, KFree::Cubefree] {
            let m = model(k, 5, &[2, 3]);
            let t = UTable::build(&m, 5000).unwrap();
            let mut it = t.entries().iter().peekable();
            for d in 1..=5000u64 {
                let e = rational_to_f64(&m.u_value(d).unwrap());
                let got = match it.peek() {
                    Some(&&(dd, u)) if dd == d => {
                        it.next();
                        u
                    }
                    _ => 0.0,
                };
                assert!(
                    (e - got).abs() <= 1e-14 * e.abs(),
                    "{k} d={d}: {e} vs {got}"
                );
            }
        }
    }

    #[test]
    fn lambda_routes_agree_small() {
        for q in [3u64, 4, 5, 8] {
            for k in [KFree::Squarefree, KFree::Cubefree] {
                let mc = ModelConstants::new(&model(k, q, &[]), 100_000).unwrap();
                for h in [1u64, 2, 5, 16, 33] {
                    let a = lambda_from_correlations(&mc, h).unwrap();
                    let b = lambda_closed(&mc, h, None).unwrap();
                    assert!(a.agrees_with(&b, 0.0), "q={q} {k} H={h}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn lambda_one_is_density() {
        let mc = ModelConstants::new(&model(KFree::Squarefree, 5, &[]), 1_000_000).unwrap();
        let v = lambda_from_correlations(&mc, 1).unwrap();
        assert!(v.contains(6.0 / std::f64::consts::PI.powi(2)), "{v}");
    }

    #[test]
    fn cutoff_must_cover_the_split() {
        let mc = ModelConstants::new(&model(KFree::Squarefree, 5, &[]), 1000).unwrap();
        assert!(lambda_closed(&mc, 10, Some(199)).is_err());
        assert!(lambda_closed(&mc, 10, Some(200)).is_ok());
        assert!(sigma_h(&mc, &hq(10), Variant::Full, None, Some(100)).is_err());
    }

    #[test]
    fn larger_cutoff_gives_consistent_values() {
        let mc = ModelConstants::new(&model(KFree::Cubefree, 12, &[5]), 100_000).unwrap();
        let a = lambda_closed(&mc, 40, None).unwrap();
        let b = lambda_closed(&mc, 40, Some(100_000)).unwrap();
        assert!(a.agrees_with(&b, 0.0), "{a} vs {b}");
        let a = sigma_h(&mc, &hq(40), Variant::HalfKappa, None, None).unwrap();
        let b = sigma_h(&mc, &hq(40), Variant::HalfKappa, None, Some(100_000)).unwrap();
        assert!(a.agrees_with(&b, 0.0), "{a} vs {b}");
    }

    #[test]
    fn full_is_half_kappa_difference_for_even_q() {
        for q in [4u64, 8, 12, 24] {
            for k in [KFree::Squarefree, KFree::Cubefree] {
                let mc = ModelConstants::new(&model(k, q, &[]), 100_000).unwrap();
                for h in [1i64, 3, 10, 77, 500] {
                    let s = sigma_h(&mc, &hq(h), Variant::Full, None, None).unwrap();
                    let a = sigma_h(&mc, &hq(h), Variant::HalfKappa, None, None).unwrap();
                    let b = sigma_h(&mc, &hq(2 * h), Variant::HalfKappa, None, None).unwrap();
                    assert!(
                        s.agrees_with(&(a - b.scale(0.25)), 1e-12),
                        "q={q} {k} H={h}"
                    );
                }
            }
        }
    }

    #[test]
    fn decomposition_squarefree_flip_two() {
        let mc = ModelConstants::new(&model(KFree::Squarefree, 5, &[2]), 100_000).unwrap();
        let h = hq(840);
        let sigma = sigma_h(&mc, &h, Variant::HalfKappa, None, None).unwrap();
        let m = |div: i64| script_m(&mc, &(&h / hq(div)), 2, None).unwrap();
        let rhs = m(1) - m(2).scale(4.0) - m(4).scale(2.0);
        assert!(sigma.agrees_with(&rhs, 1e-9), "{sigma} vs {rhs}");
    }

    #[test]
    fn decomposition_cubefree_flip_two() {
        let mc = ModelConstants::new(&model(KFree::Cubefree, 5, &[2]), 100_000).unwrap();
        let h = hq(840);
        let sigma = sigma_h(&mc, &h, Variant::HalfKappa, None, None).unwrap();
        let m = |div: i64| script_m(&mc, &(&h / hq(div)), 2, None).unwrap();
        let rhs = m(1) - m(2).scale(4.0) - m(4).scale(8.0) - m(8).scale(4.0);
        assert!(sigma.agrees_with(&rhs, 1e-9), "{sigma} vs {rhs}");
    }

    #[test]
    fn decomposition_squarefree_flip_three() {
        let mc = ModelConstants::new(&model(KFree::Squarefree, 5, &[3]), 100_000).unwrap();
        let h = hq(840);
        let sigma = sigma_h(&mc, &h, Variant::HalfKappa, None, None).unwrap();
        let m = |div: i64| script_m(&mc, &(&h / hq(div)), 3, None).unwrap();
        let rhs = m(1) - m(3).scale(24.0) - m(9).scale(9.0);
        assert!(sigma.agrees_with(&rhs, 1e-9), "{sigma} vs {rhs}");
    }

    #[test]
    fn sigma_over_h_stays_bounded() {
        for k in [KFree::Squarefree, KFree::Cubefree] {
            let mc = ModelConstants::new(&model(k, 5, &[]), 100_000).unwrap();
            let ratios: Vec<f64> = (4..=14)
                .map(|e| {
                    let h = 1i64 << e;
                    sigma_h(&mc, &hq(h), Variant::HalfKappa, None, None)
                        .unwrap()
                        .value
                        / h as f64
                })
                .collect();
            assert!(ratios.iter().all(|r| r.abs() < 1.0), "{k}: {ratios:?}");
        }
    }

    #[test]
    fn truncated_sup_is_grid_max() {
        let mc = ModelConstants::new(&model(KFree::Squarefree, 5, &[]), 100_000).unwrap();
        let grid = [3u64, 10, 50];
        let sup = truncated_sup(&mc, &grid).unwrap();
        for h in grid {
            let v = sigma_h(&mc, &hq(h as i64), Variant::HalfKappa, None, None).unwrap();
            assert!(v.value.abs() <= sup.value);
        }
        assert!(truncated_sup(&mc, &[]).is_err());
    }

    #[test]
    fn kernel_bridge_holds() {
        for (k, q) in [
            (KFree::Squarefree, 5u64),
            (KFree::Cubefree, 8),
            (KFree::Squarefree, 12),
        ] {
            let mc = ModelConstants::new(&model(k, q, &[]), 100_000).unwrap();
            for h in [1u64, 4, 9] {
                let (l, r) = kernel_bridge(&mc, h).unwrap();
                assert!(l.agrees_with(&r, 1e-9), "{k} q={q} H={h}: {l} vs {r}");
            }
        }
    }

    #[test]
    fn m_is_nonnegative_without_flips() {
        let mc = ModelConstants::new(&model(KFree::Squarefree, 12, &[]), 100_000).unwrap();
        for h in [1i64, 7, 30, 211] {
            for ex in [2u64, 3] {
                let v = script_m(&mc, &hq(h), ex, None).unwrap();
                assert!(v.upper() >= 0.0, "H={h}: {v}");
            }
        }
    }

    #[test]
    fn witness_norms_are_exact() {
        for (k, flips) in [
            (KFree::Squarefree, &[][..]),
            (KFree::Squarefree, &[2][..]),
            (KFree::Squarefree, &[3][..]),
            (KFree::Cubefree, &[][..]),
            (KFree::Cubefree, &[2][..]),
        ] {
            let rep = witness_experiment(&model(k, 5, flips), &[4, 8, 16]).unwrap();
            for row in &rep.rows {
                assert!(
                    row.values.iter().all(|v| v.norms_exact),
                    "{k} {flips:?} M={}",
                    row.m
                );
            }
        }
        assert!(witness_experiment(&model(KFree::Squarefree, 5, &[2, 3]), &[4]).is_err());
    }

    #[test]
    fn witness_lower_bound_matches_closed_sum() {
        let m = model(KFree::Squarefree, 5, &[]);
        let rep = witness_experiment(&m, &[32]).unwrap();
        let active = &rep.rows[0].active_d;
        let mut expect = ExactRational::zero();
        for &d in active {
            expect += m.u_value(d).unwrap() * hq(d as i64);
        }
        expect *= rational(1, 2) * (hq(1) - rational(1, 25));
        assert_eq!(
            rep.rows[0].values[0].lower_bound,
            crate::arith::format_rational(&expect)
        );
    }

    #[test]
    fn slope_of_constant_is_zero() {
        let xs: Vec<f64> = (0..8).map(|i| (i as f64) * 0.7).collect();
        assert_eq!(ols_slope(&xs, &[2.5; 8]), 0.0);
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + 1.0).collect();
        assert!((ols_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn growth_requires_geometric_list() {
        let mc = ModelConstants::new(&model(KFree::Squarefree, 5, &[]), 1000).unwrap();
        assert!(growth_exponent(&mc, &[16, 32, 64]).is_err());
        assert!(growth_exponent(&mc, &[16, 32, 64, 128, 256, 500]).is_err());
        assert!(growth_exponent(&mc, &[16, 32, 64, 128, 256, 512]).is_ok());
    }
}
