use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals; 0 for exact data.
    pub width: f64,
    pub used: usize,
    pub dropped: usize,
}

/// Log-log slope of `value` against `x`. Pairs with a nonpositive or
/// non-finite coordinate are dropped; at least three must remain.
pub fn fit_order(pairs: &[(f64, f64)]) -> Result<OrderFit> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::TooFewPoints { have: n, need: 3 });
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::TooFewPoints { have: 1, need: 3 });
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let width = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(OrderFit {
        slope,
        intercept,
        width,
        used: n,
        dropped: pairs.len() - n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_powers() {
        let eps = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
        let f = fit_order(&eps.map(|e| (e, e))).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && f.width < 1e-12);
        let f = fit_order(&eps.map(|e| (e, 3.0 * e.sqrt()))).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
    }

    #[test]
    fn drops_nonpositive() {
        let f = fit_order(&[(1.0, 1.0), (0.5, 0.0), (0.25, 0.25), (0.125, 0.125)]).unwrap();
        assert_eq!((f.used, f.dropped), (3, 1));
        assert!(fit_order(&[(1.0, 1.0), (0.5, -1.0), (0.25, 0.25)]).is_err());
    }
}
