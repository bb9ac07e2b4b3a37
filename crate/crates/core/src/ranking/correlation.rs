use crate::error::{Error, Result};

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite value in correlation input".into()));
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation of a constant sequence".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_lines() {
        let x = [1.0, 2.0, 3.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        let cubes: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        assert!((spearman(&x, &cubes).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_use_average_ranks() {
        let x = [10.0, 20.0, 20.0, 30.0, 40.0];
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        assert_eq!(fractional_ranks(&x), vec![1.0, 2.5, 2.5, 4.0, 5.0]);
        // Hand computation: rank deviations (-2, -0.5, -0.5, 1, 2) and (-2, 0, -1, 2, 1);
        // sum of products 8.5, sums of squares 9.5 and 10.
        let expected = 8.5 / (9.5f64 * 10.0).sqrt();
        assert!((spearman(&x, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Undefined(_))));
        assert!(matches!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), Err(Error::Undefined(_))));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    fn seq() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0..100.0f64, n),
                prop::collection::vec(-100.0..100.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_affine_invariant((x, y) in seq(), a in 0.1..10.0f64, b in -50.0..50.0f64) {
            let r = pearson(&x, &y).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((pearson(&y, &x).unwrap() - r).abs() < 1e-12);
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&xt, &y).unwrap() - r).abs() < 1e-9);
            let s = spearman(&x, &y).unwrap();
            prop_assert!((spearman(&y, &x).unwrap() - s).abs() < 1e-12);
            let xm: Vec<f64> = x.iter().map(|v| a * (v * v * v + v)).collect();
            prop_assert!((spearman(&xm, &y).unwrap() - s).abs() < 1e-12);
        }
    }
}
