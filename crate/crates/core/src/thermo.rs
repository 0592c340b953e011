//! Barotropic gas law `p(rho) = rho^gamma`, the entropy `H` and the relative
//! entropy `H(rho | r)` with its two-sided (quadratic / power) control.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Adiabatic exponent of the isentropic law `p = rho^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GasLaw {
    gamma: f64,
}

impl GasLaw {
    /// Exponents above 1 are accepted; anything at or below 3/2 is allowed but
    /// outside the range where the weak-solution theory applies, see
    /// [`GasLaw::in_theory_range`].
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(invalid("gamma", format!("{gamma} must be > 1")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn in_theory_range(&self) -> bool {
        self.gamma > 1.5
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.p(rho))
    }

    pub fn entropy(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.h(rho))
    }

    /// `H(rho | r) = H(rho) - H'(r)(rho - r) - H(r)`.
    pub fn relative_entropy(&self, rho: f64, r: f64) -> Result<f64> {
        check_density(rho)?;
        if !(r > 0.0) {
            return Err(Error::Domain(format!("reference density {r} must be > 0")));
        }
        Ok(self.rel_h(rho, r))
    }

    // Unchecked kernels used inside field loops.

    #[inline]
    pub(crate) fn p(&self, rho: f64) -> f64 {
        rho.powf(self.gamma)
    }

    #[inline]
    pub(crate) fn h(&self, rho: f64) -> f64 {
        rho.powf(self.gamma) / (self.gamma - 1.0)
    }

    /// `H'(r) = gamma r^(gamma-1) / (gamma-1)`, analytic.
    #[inline]
    pub fn derivative_h(&self, r: f64) -> f64 {
        self.gamma * r.powf(self.gamma - 1.0) / (self.gamma - 1.0)
    }

    /// `H''(r) = gamma r^(gamma-2)`.
    #[inline]
    pub fn second_derivative_h(&self, r: f64) -> f64 {
        self.gamma * r.powf(self.gamma - 2.0)
    }

    /// `p'(r) = gamma r^(gamma-1)`.
    #[inline]
    pub fn dpressure(&self, r: f64) -> f64 {
        self.gamma * r.powf(self.gamma - 1.0)
    }

    #[inline]
    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.gamma * rho.max(0.0).powf(self.gamma - 1.0)).sqrt()
    }

    #[inline]
    pub(crate) fn rel_h(&self, rho: f64, r: f64) -> f64 {
        let g = self.gamma;
        // H(rho|r) = r^g/(g-1) * [(1+t)^g - 1 - g t] with t = (rho - r)/r.
        let t = (rho - r) / r;
        let bracket = if t.abs() < 1e-3 {
            // Binomial series from the quadratic term on; avoids cancellation.
            let mut coef = g * (g - 1.0) / 2.0;
            let mut tk = t * t;
            let mut acc = 0.0;
            for k in 2..12 {
                acc += coef * tk;
                coef *= (g - k as f64) / (k as f64 + 1.0);
                tk *= t;
            }
            acc
        } else {
            (g * t.ln_1p()).exp_m1() - g * t
        };
        (r.powf(g) / (g - 1.0) * bracket).max(0.0)
    }
}

impl TryFrom<f64> for GasLaw {
    type Error = Error;
    fn try_from(g: f64) -> Result<Self> {
        GasLaw::new(g)
    }
}

impl From<GasLaw> for f64 {
    fn from(l: GasLaw) -> f64 {
        l.gamma
    }
}

fn check_density(rho: f64) -> Result<()> {
    if rho >= 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "density {rho} must be finite and >= 0"
        )))
    }
}

pub fn pressure(rho: f64, law: GasLaw) -> Result<f64> {
    law.pressure(rho)
}

pub fn entropy_h(rho: f64, law: GasLaw) -> Result<f64> {
    law.entropy(rho)
}

pub fn relative_entropy(rho: f64, r: f64, law: GasLaw) -> Result<f64> {
    law.relative_entropy(rho, r)
}

/// Weight `|d|^2` for `|d| < 1` and `|d|^gamma` otherwise.
#[inline]
pub fn sandwich_weight(rho: f64, r: f64, gamma: f64) -> f64 {
    let d = (rho - r).abs();
    if d < 1.0 {
        d * d
    } else {
        d.powf(gamma)
    }
}

/// Compact interval `[lo, hi]` inside `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compact {
    pub lo: f64,
    pub hi: f64,
}

impl Compact {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi.is_finite() && lo <= hi) {
            return Err(Error::Domain(format!(
                "compact [{lo}, {hi}] must satisfy 0 < lo <= hi < inf"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Upper end of the density sample range: far enough past `hi` to cover
    /// the `|rho - r| >= 1` branch with margin.
    pub fn rho_max(&self) -> f64 {
        2.0 * self.hi + 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichConstants {
    pub c1: f64,
    pub c2: f64,
    pub compact_lo: f64,
    pub compact_hi: f64,
}

impl SandwichConstants {
    /// True when `c1 w <= H(rho|r) <= c2 w` up to a relative slack.
    pub fn holds(&self, law: GasLaw, rho: f64, r: f64, rel_slack: f64) -> bool {
        let w = sandwich_weight(rho, r, law.gamma());
        let h = law.rel_h(rho, r);
        h >= self.c1 * w * (1.0 - rel_slack) && h <= self.c2 * w * (1.0 + rel_slack)
    }
}

pub const DEFAULT_SANDWICH_SAMPLES: usize = 401;

/// Tightest `(c1, c2)` over a `sample_count x sample_count` tensor grid with
/// `r` spanning the compact and `rho` spanning `[0, rho_max]`. Samples with
/// `rho == r` carry no information and are skipped.
pub fn fit_sandwich_constants(
    law: GasLaw,
    compact: Compact,
    sample_count: usize,
) -> Result<SandwichConstants> {
    Compact::new(compact.lo, compact.hi)?;
    if sample_count < 100 {
        return Err(invalid("sample_count", format!("{sample_count} < 100")));
    }
    let n = sample_count;
    let rho_max = compact.rho_max();
    let samples = (0..n).flat_map(move |a| {
        let r = lerp(compact.lo, compact.hi, a, n);
        (0..n).map(move |b| (lerp(0.0, rho_max, b, n), r))
    });
    let (c1, c2) = fit_sandwich_on_samples(law, samples)?;
    Ok(SandwichConstants {
        c1,
        c2,
        compact_lo: compact.lo,
        compact_hi: compact.hi,
    })
}

/// Min and max of `H(rho|r) / w(rho, r)` over arbitrary `(rho, r)` samples.
pub fn fit_sandwich_on_samples(
    law: GasLaw,
    samples: impl IntoIterator<Item = (f64, f64)>,
) -> Result<(f64, f64)> {
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0_f64;
    let mut valid = 0usize;
    for (rho, r) in samples {
        let w = sandwich_weight(rho, r, law.gamma());
        if w <= f64::EPSILON * r * r {
            continue;
        }
        let ratio = law.rel_h(rho, r) / w;
        c1 = c1.min(ratio);
        c2 = c2.max(ratio);
        valid += 1;
    }
    if valid == 0 {
        return Err(Error::NoValidSamples("every sample has rho == r"));
    }
    Ok((c1, c2))
}

fn lerp(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    if n == 1 {
        lo
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(g: f64) -> GasLaw {
        GasLaw::new(g).unwrap()
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(pressure(1.0, law(1.4)).unwrap(), 1.0);
        assert_eq!(pressure(0.0, law(1.4)).unwrap(), 0.0);
        assert_eq!(pressure(2.0, law(2.0)).unwrap(), 4.0);
        assert!(matches!(pressure(-1.0, law(2.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_h(0.0, law(1.7)).unwrap(), 0.0);
        assert_eq!(entropy_h(2.0, law(2.0)).unwrap(), 4.0);
        assert!((entropy_h(1.0, law(5.0 / 3.0)).unwrap() - 1.5).abs() < 1e-14);
        assert!(entropy_h(f64::NAN, law(2.0)).is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        let l = law(2.0);
        assert_eq!(relative_entropy(0.7, 0.7, law(1.6)).unwrap(), 0.0);
        assert!((relative_entropy(2.0, 1.0, l).unwrap() - 1.0).abs() < 1e-14);
        assert!((relative_entropy(0.0, 1.0, l).unwrap() - 1.0).abs() < 1e-14);
        assert!(relative_entropy(1.0, 0.0, l).is_err());
        assert!(relative_entropy(1.0, -2.0, l).is_err());
        // 5/3 at (2, 1): 3 * 2^(2/3) - 4 from symbolic expansion.
        let v = relative_entropy(2.0, 1.0, law(5.0 / 3.0)).unwrap();
        assert!((v - (3.0 * 2f64.powf(2.0 / 3.0) - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gamma_must_exceed_one() {
        assert!(GasLaw::new(1.0).is_err());
        assert!(GasLaw::new(0.5).is_err());
        assert!(!law(1.4).in_theory_range());
        assert!(law(5.0 / 3.0).in_theory_range());
    }

    #[test]
    fn sandwich_gamma_two_is_exact() {
        let k = Compact::new(0.5, 2.0).unwrap();
        let s = fit_sandwich_constants(law(2.0), k, 101).unwrap();
        assert!((s.c1 - 1.0).abs() < 1e-12, "{s:?}");
        assert!((s.c2 - 1.0).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn sandwich_five_thirds_finite_positive() {
        let k = Compact::new(0.5, 2.0).unwrap();
        let s = fit_sandwich_constants(law(5.0 / 3.0), k, 201).unwrap();
        assert!(s.c1 > 0.0 && s.c2.is_finite() && s.c1 <= s.c2);
    }

    #[test]
    fn degenerate_samples_error() {
        let diag = (1..10).map(|k| (k as f64 * 0.1, k as f64 * 0.1));
        assert!(matches!(
            fit_sandwich_on_samples(law(1.8), diag),
            Err(Error::NoValidSamples(_))
        ));
    }

    #[test]
    fn sandwich_rejects_bad_compact() {
        assert!(Compact::new(0.0, 1.0).is_err());
        assert!(Compact::new(1.0, f64::INFINITY).is_err());
        assert!(fit_sandwich_constants(law(2.0), Compact { lo: 0.0, hi: 1.0 }, 200).is_err());
        assert!(fit_sandwich_constants(law(2.0), Compact::new(1.0, 2.0).unwrap(), 50).is_err());
    }
}
