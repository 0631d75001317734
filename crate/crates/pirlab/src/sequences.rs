//! Construction parameters of the complete-graph scheme: the multiplicity
//! sequences `x_k`, `y_k`, `z_k`, the scale `M`, subpacketization and rate.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::rational::{binom, factorial, lcm_all, pow2, q, qi, Q};

/// Recovery-pattern classes. `Direct` is the step-1 request of a bare sub-file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternClass {
    Direct,
    Alpha,
    Beta,
    Gamma,
    Zeta,
}

impl PatternClass {
    pub const ALL: [PatternClass; 5] =
        [PatternClass::Direct, PatternClass::Alpha, PatternClass::Beta, PatternClass::Gamma, PatternClass::Zeta];
}

/// Pattern applications of one class at one step, in units of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassUsage {
    pub class: PatternClass,
    pub per_m: Q,
    /// Distinct realizations the applications are spread over.
    pub realizations: BigInt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepUsage {
    pub k: usize,
    pub classes: Vec<ClassUsage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLedger {
    pub n: usize,
    pub k0: usize,
    x: Vec<Option<Q>>,
    y: Vec<Option<Q>>,
    z: Vec<Option<Q>>,
    pub steps: Vec<StepUsage>,
    pub m_scale: BigInt,
    pub subpacketization: BigInt,
    pub answer_count: BigInt,
    pub rate: Q,
}

impl SequenceLedger {
    /// `x_k` for `1 <= k <= n-1`.
    pub fn x(&self, k: usize) -> Option<&Q> {
        self.x.get(k).and_then(Option::as_ref)
    }

    /// `y_k` for `2 <= k <= n-1`.
    pub fn y(&self, k: usize) -> Option<&Q> {
        self.y.get(k).and_then(Option::as_ref)
    }

    /// `z_k` for `1 <= k <= n-2`.
    pub fn z(&self, k: usize) -> Option<&Q> {
        self.z.get(k).and_then(Option::as_ref)
    }

    pub fn xs(&self) -> Vec<Q> {
        (1..self.n).map(|k| self.x(k).unwrap().clone()).collect()
    }

    /// Integer count of class applications at step `k`.
    pub fn class_count(&self, k: usize, class: PatternClass) -> BigInt {
        self.steps
            .iter()
            .find(|s| s.k == k)
            .and_then(|s| s.classes.iter().find(|c| c.class == class))
            .map(|c| (&c.per_m * Q::from_integer(self.m_scale.clone())).to_integer())
            .unwrap_or_default()
    }
}

pub fn k0(n: usize) -> usize {
    n / 2 + 2
}

/// Computes the sequences, checks every ledger invariant and derives `M`, `L`
/// and the rate.
pub fn build_sequences(n: usize) -> Result<SequenceLedger> {
    if n < 3 {
        return param("sequences need n >= 3");
    }
    let k0 = k0(n);
    let ni = n as i64;
    let mut x: Vec<Option<Q>> = vec![None; n];
    let mut y: Vec<Option<Q>> = vec![None; n];
    let mut z: Vec<Option<Q>> = vec![None; n];
    x[1] = Some(qi(1));
    z[1] = Some(qi(1));
    for k in 2..n {
        let ki = k as i64;
        let xp = x[k - 1].clone().unwrap();
        let zp = z[k - 1].clone().unwrap();
        let xk = if k < k0 { q(ni - ki + 1, 2) * &xp + &zp } else { q(ki - 1, 2 * ki - ni) * (&xp + &zp) };
        let yprev = y[k - 1].clone().unwrap_or_else(Q::zero);
        let yk = &xk - qi(2) * &xp + q(ki - 2, ni - ki) * yprev;
        if k <= n - 2 {
            z[k] = Some(if k < k0 { &xk - q(ki - 1, 2) * &xp } else { Q::zero() });
        }
        x[k] = Some(xk);
        y[k] = Some(yk);
    }
    let steps = step_usage(n, &x, &y, &z)?;
    let mut ledger = SequenceLedger {
        n,
        k0,
        x,
        y,
        z,
        steps,
        m_scale: BigInt::one(),
        subpacketization: BigInt::zero(),
        answer_count: BigInt::zero(),
        rate: Q::zero(),
    };
    check_invariants(&ledger)?;
    ledger.m_scale = minimal_scale(&ledger);
    let m = Q::from_integer(ledger.m_scale.clone());
    let (blue, total) = weighted_sums(&ledger);
    ledger.subpacketization = (qi(2) * &blue * &m).to_integer();
    ledger.answer_count = (&total * &m).to_integer();
    ledger.rate = qi(2) * &blue / (qi(ni) * &total);
    check_scaled(&ledger)?;
    Ok(ledger)
}

/// `(Σ C(n-2,k-1) x_k, Σ C(n-1,k) x_k)`.
fn weighted_sums(l: &SequenceLedger) -> (Q, Q) {
    let n = l.n as i64;
    let mut blue = Q::zero();
    let mut total = Q::zero();
    for k in 1..l.n {
        let xk = l.x(k).unwrap();
        blue += Q::from_integer(binom(n - 2, k as i64 - 1)) * xk;
        total += Q::from_integer(binom(n - 1, k as i64)) * xk;
    }
    (blue, total)
}

fn double_factorial(m: i64) -> BigInt {
    let mut acc = BigInt::one();
    let mut i = m;
    while i > 1 {
        acc *= i;
        i -= 2;
    }
    acc
}

/// Distinct selection sets a class can take at step `k`.
pub fn distinct_realizations(n: usize, k: usize, class: PatternClass) -> BigInt {
    let (n, k) = (n as i64, k as i64);
    let base = BigInt::from(2) * binom(n - 2, k - 1);
    match class {
        PatternClass::Direct => BigInt::from(if k == 1 { 2 } else { 0 }),
        PatternClass::Alpha | PatternClass::Gamma => base,
        PatternClass::Beta if k < 3 => BigInt::zero(),
        PatternClass::Beta if k % 2 == 1 => base * double_factorial(k - 2),
        PatternClass::Beta => base * (k - 1) * double_factorial(k - 3),
        PatternClass::Zeta => BigInt::from(2 * (n - 2)) * binom(n - 3, k - 1),
    }
}

fn step_usage(n: usize, x: &[Option<Q>], y: &[Option<Q>], z: &[Option<Q>]) -> Result<Vec<StepUsage>> {
    let ni = n as i64;
    let k0 = k0(n);
    let mut steps = vec![StepUsage {
        k: 1,
        classes: vec![ClassUsage {
            class: PatternClass::Direct,
            per_m: qi(2) * x[1].clone().unwrap(),
            realizations: BigInt::from(2),
        }],
    }];
    for k in 2..n {
        let ki = k as i64;
        let c = |a: i64, b: i64| Q::from_integer(binom(a, b));
        let xp = x[k - 1].clone().unwrap();
        let zp = z[k - 1].clone().unwrap_or_else(Q::zero);
        let yp = y[k - 1].clone().unwrap_or_else(Q::zero);
        let alpha = qi(2) * c(ni - 2, ki - 1) * &zp;
        let beta = if k >= 3 {
            let per = if k % 2 == 1 { ki - 1 } else { ki - 2 };
            qi(ni - 2) * c(ni - 3, ki - 3) * &yp / qi(per)
        } else {
            Q::zero()
        };
        let gamma = qi(2) * c(ni - 2, ki - 1) * &xp - &beta;
        let zeta = if k < k0 {
            qi(ni - 2) * c(ni - 3, ki - 1) * &xp
        } else {
            q(2 * (ni - 2), 2 * ki - ni) * c(ni - 3, ki - 1) * (&xp + &zp)
        };
        let expected = qi(2) * c(ni - 2, ki - 1) * x[k].clone().unwrap();
        if &alpha + &beta + &gamma + &zeta != expected {
            return Err(Error::Internal(format!("step {k}: class totals do not add up to 2·C(n-2,k-1)·x_k")));
        }
        let classes = [
            (PatternClass::Alpha, alpha),
            (PatternClass::Beta, beta),
            (PatternClass::Gamma, gamma),
            (PatternClass::Zeta, zeta),
        ]
        .into_iter()
        .map(|(class, per_m)| {
            if per_m.is_negative() {
                return Err(Error::Internal(format!("step {k}: negative {class:?} count")));
            }
            let realizations = distinct_realizations(n, k, class);
            if !per_m.is_zero() && realizations.is_zero() {
                return Err(Error::Internal(format!("step {k}: {class:?} has no realization")));
            }
            Ok(ClassUsage { class, per_m, realizations })
        })
        .collect::<Result<Vec<_>>>()?;
        steps.push(StepUsage { k, classes });
    }
    Ok(steps)
}

fn check_invariants(l: &SequenceLedger) -> Result<()> {
    let n = l.n;
    let fail = |what: String| Err(Error::Internal(what));
    let one = qi(1);
    if l.x(1) != Some(&one) || l.z(1) != Some(&one) {
        return fail("x_1 = z_1 = 1 violated".into());
    }
    if l.y(2) != Some(&q(n as i64 - 3, 2)) {
        return fail("y_2 = (n-3)/2 violated".into());
    }
    if l.y(n - 1) != Some(&Q::zero()) {
        return fail("y_{n-1} = 0 violated".into());
    }
    for k in 1..n {
        let xk = l.x(k).unwrap();
        if k >= 2 && xk < l.x(k - 1).unwrap() {
            return fail(format!("x not monotone at k = {k}"));
        }
        if let Some(zk) = l.z(k) {
            if zk.is_negative() || zk > xk {
                return fail(format!("0 <= z_{k} <= x_{k} violated"));
            }
            if k >= l.k0 && !zk.is_zero() {
                return fail(format!("z_{k} must vanish past k0"));
            }
        }
        if let Some(yk) = l.y(k) {
            if yk.is_negative() || yk > xk {
                return fail(format!("0 <= y_{k} <= x_{k} violated"));
            }
            if k + 1 < n && *xk < qi(k as i64) * yk / qi(2 * (n - k - 1) as i64) {
                return fail(format!("x_{k} >= k·y_{k}/(2(n-k-1)) violated"));
            }
        }
    }
    Ok(())
}

fn ledger_values(l: &SequenceLedger) -> Vec<Q> {
    let mut v: Vec<Q> = l.x.iter().chain(&l.y).chain(&l.z).flatten().cloned().collect();
    for step in &l.steps {
        for c in &step.classes {
            if !c.realizations.is_zero() {
                v.push(&c.per_m / Q::from_integer(c.realizations.clone()));
            }
        }
    }
    v
}

fn minimal_scale(l: &SequenceLedger) -> BigInt {
    lcm_all(&ledger_values(l))
}

fn check_scaled(l: &SequenceLedger) -> Result<()> {
    let m = Q::from_integer(l.m_scale.clone());
    if ledger_values(l).iter().all(|v| (v * &m).is_integer()) {
        Ok(())
    } else {
        Err(Error::Internal("scale M leaves a fractional count".into()))
    }
}

/// True iff scaling by `m` makes every multiplicity and every per-realization
/// application count integral.
pub fn scale_is_integral(l: &SequenceLedger, m: &BigInt) -> bool {
    let m = Q::from_integer(m.clone());
    ledger_values(l).iter().all(|v| (v * &m).is_integer())
}

pub fn scaling_m(n: usize) -> Result<BigInt> {
    Ok(build_sequences(n)?.m_scale)
}

pub fn subpacketization(n: usize) -> Result<BigInt> {
    Ok(build_sequences(n)?.subpacketization)
}

pub fn rate(n: usize) -> Result<Q> {
    Ok(build_sequences(n)?.rate)
}

/// Rate without building the scale, for large `n`.
pub fn rate_only(n: usize) -> Result<Q> {
    if n < 3 {
        return param("rate needs n >= 3");
    }
    let xs = x_recurrence(n);
    let ni = n as i64;
    let mut blue = Q::zero();
    let mut total = Q::zero();
    for (k, xk) in xs.iter().enumerate().skip(1) {
        blue += Q::from_integer(binom(ni - 2, k as i64 - 1)) * xk;
        total += Q::from_integer(binom(ni - 1, k as i64)) * xk;
    }
    Ok(qi(2) * blue / (qi(ni) * total))
}

/// `x_0..x_{n-1}` (with a dummy `x_0`) from the recurrence alone.
fn x_recurrence(n: usize) -> Vec<Q> {
    let k0 = k0(n);
    let ni = n as i64;
    let mut x = vec![Q::zero(), qi(1)];
    let mut z = qi(1);
    for k in 2..n {
        let ki = k as i64;
        let xp = x[k - 1].clone();
        let xk = if k < k0 { q(ni - ki + 1, 2) * &xp + &z } else { q(ki - 1, 2 * ki - ni) * (&xp + &z) };
        z = if k < k0 { &xk - q(ki - 1, 2) * &xp } else { Q::zero() };
        x.push(xk);
    }
    x
}

/// Explicit alternating-sum expression for `x_k`.
pub fn closed_form_x(n: usize, k: usize) -> Result<Q> {
    if n < 3 || k == 0 || k >= n {
        return param(format!("closed form needs n >= 3 and 1 <= k <= n-1, got ({n},{k})"));
    }
    let ni = n as i64;
    let k0 = k0(n);
    let top = factorial(n as u64 + 3);
    let coeff = |j: usize| -> Q { Q::new(top.clone(), pow2(j as u32) * factorial((n - j + 3) as u64)) };
    let sign = |e: i64| if e.is_even() { qi(1) } else { qi(-1) };
    if k < k0 {
        let sum = (0..k).fold(Q::zero(), |acc, j| {
            acc + coeff(j) * sign((k - j - 1) as i64) * Q::from_integer(binom(k as i64 - 1, j as i64))
        });
        return Ok(sum);
    }
    let prod = (k0..=k).fold(qi(1), |acc, i| acc * q(i as i64 - 1, 2 * i as i64 - ni));
    let sum = (0..=k0 - 2).fold(Q::zero(), |acc, j| {
        acc + coeff(j)
            * sign((k0 - j - 2) as i64)
            * q((k0 - j + 2) as i64, 2)
            * Q::from_integer(binom(k0 as i64 - 2, j as i64))
    });
    Ok(prod * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k4_ledger() {
        let l = build_sequences(4).unwrap();
        assert_eq!(l.xs(), vec![qi(1), q(5, 2), q(9, 2)]);
        assert_eq!(l.y(1), None);
        assert_eq!((l.y(2), l.y(3)), (Some(&q(1, 2)), Some(&Q::zero())));
        assert_eq!((l.z(1), l.z(2), l.z(3)), (Some(&qi(1)), Some(&qi(2)), None));
        assert_eq!(l.m_scale, BigInt::from(4));
        assert_eq!(l.subpacketization, BigInt::from(84));
        assert_eq!(l.answer_count, BigInt::from(60));
        assert_eq!(l.rate, q(7, 20));
    }

    #[test]
    fn k3_and_k5() {
        let l3 = build_sequences(3).unwrap();
        assert_eq!(l3.xs(), vec![qi(1), qi(2)]);
        assert_eq!((l3.m_scale.clone(), l3.subpacketization.clone()), (BigInt::one(), BigInt::from(6)));
        assert_eq!(l3.rate, q(1, 2));
        let l5 = build_sequences(5).unwrap();
        assert_eq!(l5.xs(), vec![qi(1), qi(3), qi(7), qi(11)]);
        assert_eq!(l5.rate, q(84, 305));
        assert_eq!(l5.subpacketization, BigInt::from(84) * &l5.m_scale);
        assert_eq!(l5.answer_count, BigInt::from(61) * &l5.m_scale);
        assert_eq!(l5.z(4), None);
        assert_eq!(l5.z(3), Some(&qi(4)));
    }

    #[test]
    fn class_counts() {
        let l = build_sequences(4).unwrap();
        let c = |k, cl| l.class_count(k, cl);
        assert_eq!(c(1, PatternClass::Direct), BigInt::from(8));
        assert_eq!(
            [c(2, PatternClass::Alpha), c(2, PatternClass::Beta), c(2, PatternClass::Gamma), c(2, PatternClass::Zeta)],
            [16, 0, 16, 8].map(BigInt::from)
        );
        assert_eq!(
            [c(3, PatternClass::Alpha), c(3, PatternClass::Beta), c(3, PatternClass::Gamma), c(3, PatternClass::Zeta)],
            [16, 2, 18, 0].map(BigInt::from)
        );
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_x(4, 2).unwrap(), q(5, 2));
        assert_eq!(closed_form_x(5, 4).unwrap(), qi(11));
        assert!(closed_form_x(4, 4).is_err());
        assert!(closed_form_x(2, 1).is_err());
    }

    #[test]
    fn rate_only_matches() {
        for n in 3..=9 {
            assert_eq!(rate_only(n).unwrap(), rate(n).unwrap());
        }
    }
}
