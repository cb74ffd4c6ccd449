//! Bessel functions of the first kind and the interval-scaled variant
//! `J_n(B, t) = (B/t) J_n(t)` used as an approximation target.
//!
//! Small arguments use the ascending power series, which is
//! cancellation-safe there; larger arguments switch to Miller's backward
//! recurrence, normalized through `J_0 + 2 sum J_{2k} = 1`, since the raw
//! series loses digits to alternating growth long before t reaches the
//! interval ends used here.

use thiserror::Error;

/// Largest argument evaluated by the ascending series. At this point the
/// series' largest term exceeds the result by ~3 orders; beyond it the
/// cancellation eats past the 1e-12 accuracy budget.
const SERIES_CUTOFF: f64 = 8.0;
/// Extra backward-recurrence depth beyond `n + 1.5 t`; validated by the
/// depth-doubling self-consistency test.
const MILLER_PAD: u32 = 40;
/// Rescale bound keeping the unnormalized recurrence inside f64 range.
const RESCALE_AT: f64 = 1e250;

#[derive(Debug, Error, PartialEq)]
pub enum BesselError {
    #[error("the scaled function needs order n >= 1, got 0")]
    OrderZero,
    #[error("interval endpoint must be positive and finite, got {0}")]
    BadEndpoint(f64),
    #[error("t = {t} lies outside [0, {b}]")]
    OutOfInterval { t: f64, b: f64 },
}

/// Order and interval endpoint of the scaled function `(B/t) J_n(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselSpec {
    n: u32,
    b: f64,
}

impl BesselSpec {
    pub fn new(n: u32, b: f64) -> Result<Self, BesselError> {
        if n == 0 {
            return Err(BesselError::OrderZero);
        }
        if !b.is_finite() || b <= 0.0 {
            return Err(BesselError::BadEndpoint(b));
        }
        Ok(Self { n, b })
    }

    pub fn order(&self) -> u32 {
        self.n
    }

    pub fn endpoint(&self) -> f64 {
        self.b
    }
}

/// Ascending series `sum_k (-1)^k (t/2)^{n+2k} / (k! (n+k)!)`.
fn ascending_series(n: u32, t: f64) -> f64 {
    let half = t / 2.0;
    let mut term = 1.0f64;
    for j in 1..=n {
        term *= half / j as f64;
    }
    let x = half * half;
    let mut sum = term;
    for k in 1..=80u32 {
        term *= -x / (k as f64 * (k + n) as f64);
        sum += term;
    }
    sum
}

/// Miller's backward recurrence from order `start` down to 0, normalized
/// by the even-order sum identity. The seed value is arbitrary: orders
/// beyond ~t decay super-exponentially, so the seed's error washes out of
/// the normalized result.
fn miller(n: u32, t: f64, start: u32) -> f64 {
    let start = start + start % 2;
    let mut above = 0.0f64;
    let mut current = 1e-30f64;
    let mut target = if n == start { current } else { 0.0 };
    let mut norm = 2.0 * current;
    let mut k = start;
    while k > 0 {
        let below = (2.0 * k as f64 / t) * current - above;
        above = current;
        current = below;
        k -= 1;
        if k == n {
            target = current;
        }
        if k == 0 {
            norm += current;
        } else if k.is_multiple_of(2) {
            norm += 2.0 * current;
        }
        if current.abs() > RESCALE_AT {
            let scale = 1.0 / RESCALE_AT;
            current *= scale;
            above *= scale;
            norm *= scale;
            target *= scale;
        }
    }
    target / norm
}

/// Bessel function of the first kind `J_n(t)` for `t >= 0`, accurate to
/// better than 1e-12 absolute over the orders and arguments in use
/// (n <= 10, t <= 150).
pub fn bessel_j(n: u32, t: f64) -> f64 {
    assert!(t.is_finite() && t >= 0.0, "argument must be finite and nonnegative");
    if t == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if t <= SERIES_CUTOFF {
        ascending_series(n, t)
    } else {
        miller(n, t, n + (1.5 * t).ceil() as u32 + MILLER_PAD)
    }
}

/// The scaled function `(B/t) J_n(t)` on `[0, B]`, continued at `t = 0` by
/// its limit: `B/2` for n = 1 (from `J_1(t) ~ t/2`), zero for n >= 2.
pub fn bessel_mod(spec: &BesselSpec, t: f64) -> Result<f64, BesselError> {
    if !t.is_finite() || t < 0.0 || t > spec.b {
        return Err(BesselError::OutOfInterval { t, b: spec.b });
    }
    if t == 0.0 {
        return Ok(if spec.n == 1 { spec.b / 2.0 } else { 0.0 });
    }
    Ok(spec.b / t * bessel_j(spec.n, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use twofloat::TwoFloat;

    /// The crate's double-word division only carries f64 accuracy (its
    /// quotient has an empty low word); one Newton step on the residual
    /// restores the full width.
    fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
        let q0 = TwoFloat::from(a.hi() / b.hi());
        let r = a - q0 * b;
        q0 + TwoFloat::from(f64::from(r) / b.hi())
    }

    /// Ascending series in double-word arithmetic; trustworthy wherever
    /// the f64 series is, and several digits past it.
    fn series_oracle(n: u32, t: f64) -> f64 {
        let half = TwoFloat::from(t / 2.0);
        let mut term = TwoFloat::from(1.0);
        for j in 1..=n {
            term = dd_div(term * half, TwoFloat::from(j as f64));
        }
        let x = half * half;
        let mut sum = term;
        for k in 1..=120u32 {
            term = dd_div(-term * x, TwoFloat::from((k * (k + n)) as f64));
            sum += term;
        }
        f64::from(sum)
    }

    #[test]
    fn zeroth_order_at_zero_is_one() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
    }

    #[test]
    fn higher_orders_vanish_at_zero() {
        assert_eq!(bessel_j(3, 0.0), 0.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
    }

    #[test]
    fn series_range_matches_the_extended_accumulation_oracle() {
        for n in 0..=6 {
            for &t in &[0.25, 1.0, 2.5, 4.0, 6.3, 7.9, 8.0] {
                let got = bessel_j(n, t);
                let want = series_oracle(n, t);
                assert!(
                    (got - want).abs() < 5e-14,
                    "J_{n}({t}): {got} vs oracle {want}"
                );
            }
        }
    }

    #[test]
    fn recurrence_and_series_agree_across_the_crossover() {
        for n in 0..=6 {
            for &t in &[6.0, 7.0, 7.9, 8.0, 8.1, 9.0, 10.5, 12.0] {
                let from_series = series_oracle(n, t);
                let from_miller = miller(n, t, n + (1.5 * t).ceil() as u32 + MILLER_PAD);
                assert!(
                    (from_series - from_miller).abs() < 1e-13,
                    "J_{n}({t}): series {from_series} vs recurrence {from_miller}"
                );
            }
        }
    }

    #[test]
    fn recurrence_depth_doubling_is_self_consistent() {
        for &t in &[9.0f64, 30.0, 77.5, 126.0] {
            for n in 0..=5 {
                let depth = n + (1.5 * t).ceil() as u32 + MILLER_PAD;
                let once = miller(n, t, depth);
                let twice = miller(n, t, 2 * depth);
                assert!(
                    (once - twice).abs() < 1e-12,
                    "J_{n}({t}): depth {depth} gives {once}, doubled gives {twice}"
                );
            }
        }
    }

    #[test]
    fn even_order_normalization_sums_to_one() {
        for &t in &[1.0, 5.0, 20.0, 77.3, 126.0] {
            let mut sum = bessel_j(0, t);
            let mut k = 2;
            while k < (t as u32) + 80 {
                sum += 2.0 * bessel_j(k, t);
                k += 2;
            }
            assert!((sum - 1.0).abs() < 1e-12, "normalization at t = {t}: {sum}");
        }
    }

    #[test]
    fn three_term_recurrence_holds_across_the_interval() {
        let mut t = 1.0;
        while t <= 126.0 {
            for n in 1..=8u32 {
                let lower = bessel_j(n - 1, t);
                let upper = bessel_j(n + 1, t);
                let middle = 2.0 * n as f64 / t * bessel_j(n, t);
                let scale = lower.abs().max(upper.abs()).max(middle.abs());
                assert!(
                    (lower + upper - middle).abs() <= 1e-10 * scale,
                    "recurrence at n = {n}, t = {t}"
                );
            }
            t += 2.7;
        }
    }

    #[test]
    fn scaled_function_limits_and_values() {
        let spec = BesselSpec::new(3, 126.0).unwrap();
        assert_eq!(bessel_mod(&spec, 0.0).unwrap(), 0.0);
        let narrow = BesselSpec::new(1, 2.0).unwrap();
        assert_eq!(bessel_mod(&narrow, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            bessel_mod(&spec, 126.0).unwrap(),
            bessel_j(3, 126.0),
            epsilon = 1e-15
        );
        // Near zero the n >= 2 variant behaves like B t^{n-1}, so it stays
        // tiny rather than diverging through the 1/t factor.
        assert!(bessel_mod(&spec, 1e-6).unwrap().abs() < 1e-9);
    }

    #[test]
    fn domain_violations_are_rejected() {
        let spec = BesselSpec::new(3, 126.0).unwrap();
        assert_eq!(
            bessel_mod(&spec, -0.5),
            Err(BesselError::OutOfInterval { t: -0.5, b: 126.0 })
        );
        assert_eq!(
            bessel_mod(&spec, 126.5),
            Err(BesselError::OutOfInterval { t: 126.5, b: 126.0 })
        );
        assert_eq!(BesselSpec::new(0, 5.0), Err(BesselError::OrderZero));
        assert_eq!(BesselSpec::new(2, 0.0), Err(BesselError::BadEndpoint(0.0)));
        assert_eq!(
            BesselSpec::new(2, f64::INFINITY),
            Err(BesselError::BadEndpoint(f64::INFINITY))
        );
    }
}
