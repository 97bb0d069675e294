//! Statistical helpers shared by the verification oracles and the harness:
//! chi-square goodness of fit, Spearman rank correlation, paired t-test, and
//! the incomplete gamma/beta functions that back their p-values.

use crate::error::{Error, Result};

/// ln Γ(x) via the Lanczos approximation (g = 7, 9 coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula keeps the approximation on x >= 0.5.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Lower regularized incomplete gamma P(a, x).
pub fn lower_regularized_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_p domain: a > 0, x >= 0");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_contfrac(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Upper regularized incomplete gamma Q(a, x) by modified Lentz continued fraction.
fn gamma_q_contfrac(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Survival function of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(statistic: f64, df: usize) -> f64 {
    assert!(df > 0, "chi-square needs at least one degree of freedom");
    if statistic <= 0.0 {
        return 1.0;
    }
    let a = df as f64 / 2.0;
    let x = statistic / 2.0;
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_contfrac(a, x)
    }
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0 && (0.0..=1.0).contains(&x), "beta domain");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)).exp();
    // The continued fraction converges fast only for x below the mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_contfrac(a, b, x) / a
    } else {
        1.0 - front * beta_contfrac(b, a, 1.0 - x) / b
    }
}

fn beta_contfrac(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// One-sided survival function of Student's t distribution.
pub fn student_t_sf(t: f64, df: usize) -> f64 {
    assert!(df > 0);
    let v = df as f64;
    let x = v / (v + t * t);
    let tail = 0.5 * regularized_incomplete_beta(v / 2.0, 0.5, x);
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Chi-square goodness-of-fit test of observed counts against expected
/// probabilities. Bins with zero expected probability must have zero counts.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != expected_probs.len() {
        return Err(Error::UniverseMismatch(format!(
            "{} observed bins vs {} expected bins",
            observed.len(),
            expected_probs.len()
        )));
    }
    if observed.len() < 2 {
        return Err(Error::InvalidConfig("chi-square needs at least 2 bins".into()));
    }
    let n: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut df = observed.len() - 1;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = n as f64 * p;
        if e == 0.0 {
            if o != 0 {
                return Err(Error::InvalidWeights(format!(
                    "observed {o} draws in a zero-probability bin"
                )));
            }
            df -= 1; // bin carries no information
            continue;
        }
        let diff = o as f64 - e;
        statistic += diff * diff / e;
    }
    let p_value = chi_square_sf(statistic, df.max(1));
    Ok(ChiSquareTest { statistic, df: df.max(1), p_value })
}

/// Ranks with ties assigned their average rank (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("NaN in ranked data"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidConfig("spearman needs two equal-length series".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, Copy)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub t_statistic: f64,
    pub df: usize,
    /// One-sided p-value for the alternative mean(a - b) > 0.
    pub p_one_sided: f64,
}

/// Paired t-test of `a` against `b` (alternative: mean(a) > mean(b)).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidConfig("paired test needs two equal-length series".into()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let df = a.len() - 1;
    if var == 0.0 {
        // Identical series: no evidence either way unless the mean moved.
        let p = if mean > 0.0 { 0.0 } else { 1.0 };
        return Ok(PairedTTest { mean_diff: mean, t_statistic: f64::INFINITY * mean.signum(), df, p_one_sided: p });
    }
    let t = mean / (var / n).sqrt();
    Ok(PairedTTest { mean_diff: mean, t_statistic: t, df, p_one_sided: student_t_sf(t, df) })
}

/// Sample mean and its 95% confidence half-width (1.96 standard errors).
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values below are frozen from SciPy 1.x evaluations.

    #[test]
    fn lower_gamma_matches_references() {
        let cases = [
            (0.5, 0.5, 0.682_689_492_137_085_9),
            (1.5, 2.0, 0.738_535_870_050_888_8),
            (9.5, 27.5, 0.999_976_756_285_747_3),
            (2.5, 0.001, 9.508_534_598_607_93e-9),
            (10.0, 10.0, 0.542_070_285_528_147_8),
            (0.5, 1e-12, 1.128_379_167_095_136_4e-6),
        ];
        for (a, x, want) in cases {
            assert_relative_eq!(lower_regularized_gamma(a, x), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn chi_square_sf_matches_references() {
        let cases = [
            (2.417_910_447_761_194, 3, 0.490_309_306_965_388_3),
            (10.083_333_333_333_334, 3, 0.017_870_892_893_625_56),
            (2.387_584_345_479_082, 3, 0.495_949_977_420_930_94),
            (15.0, 5, 0.010_362_337_915_786_429),
            (100.0, 19, 5.355_560_750_435_117e-13),
            (1e-8, 1, 0.999_920_211_544_052_6),
            (55.0, 19, 2.324_371_425_266_648e-5),
            (3.5, 7, 0.835_225_482_610_342_2),
        ];
        for (x, df, want) in cases {
            assert_relative_eq!(chi_square_sf(x, df), want, max_relative = 1e-9);
        }
        assert_eq!(chi_square_sf(0.0, 5), 1.0);
    }

    #[test]
    fn incomplete_beta_matches_references() {
        let cases = [
            (0.5, 0.5, 0.25, 0.333_333_333_333_333_37),
            (2.0, 3.0, 0.5, 0.6875),
            (9.5, 9.5, 0.7, 0.963_804_987_113_872_6),
            (5.0, 1.0, 0.9, 0.590_490_000_000_000_1),
        ];
        for (a, b, x, want) in cases {
            assert_relative_eq!(regularized_incomplete_beta(a, b, x), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn student_t_sf_matches_references() {
        let cases = [
            (1.729_132_811_521_367_8, 19, 0.05),
            (2.5, 19, 0.010_870_205_584_198_718),
            (0.0, 19, 0.5),
            (-1.0, 19, 0.835_061_599_539_437_5),
            (3.2, 9, 0.005_415_651_294_950_663),
            (1.0, 30, 0.162_654_307_713_014_92),
        ];
        for (t, df, want) in cases {
            assert_relative_eq!(student_t_sf(t, df), want, max_relative = 1e-9);
        }
    }

    #[test]
    fn chi_square_gof_on_uniform_counts() {
        let obs = [28u64, 31, 40, 35];
        let ps = [0.25; 4];
        let test = chi_square_gof(&obs, &ps).unwrap();
        assert_relative_eq!(test.statistic, 2.417_910_447_761_194, max_relative = 1e-12);
        assert_eq!(test.df, 3);
        assert_relative_eq!(test.p_value, 0.490_309_306_965_388_3, max_relative = 1e-9);
    }

    #[test]
    fn spearman_matches_scipy_with_ties() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.5, 1.5, 4.0, 3.0, 6.0, 5.0];
        assert_relative_eq!(spearman(&x, &y).unwrap(), 0.869_656_553_478_672_7, max_relative = 1e-12);
        let x2 = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let y2 = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0];
        assert_relative_eq!(spearman(&x2, &y2).unwrap(), 0.198_853_681_209_924_67, max_relative = 1e-12);
    }

    #[test]
    fn paired_t_test_one_sided() {
        // d = a - b has mean 1, sd ~ 1.0541
        let a = [2.0, 3.0, 1.0, 4.0, 2.5];
        let b = [1.0, 1.5, 0.5, 3.0, 1.5];
        let t = paired_t_test(&a, &b).unwrap();
        assert!(t.mean_diff > 0.0);
        assert!(t.p_one_sided < 0.05, "p = {}", t.p_one_sided);
        let sym = paired_t_test(&b, &a).unwrap();
        assert!(sym.p_one_sided > 0.95);
    }

    #[test]
    fn ranks_average_ties() {
        let r = average_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
    }
}
