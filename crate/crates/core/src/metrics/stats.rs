use serde::{Deserialize, Serialize};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
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
    for m in 1..=10_000 {
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
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// P(F ≤ f) for an F(d1, d2) variable.
pub fn f_cdf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f.is_infinite() {
        return 1.0;
    }
    inc_beta(d1 / 2.0, d2 / 2.0, d1 * f / (d1 * f + d2))
}

/// P(F > f), computed directly so small tail probabilities keep their
/// precision.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub ss_between: f64,
    pub ss_within: f64,
    pub df_between: u64,
    pub df_within: u64,
    /// Infinite when groups differ and every group is constant.
    pub f: f64,
    pub p: f64,
    /// SS_between / (SS_between + SS_within); 0 when there is no variance.
    pub eta_squared: f64,
}

/// One-way ANOVA over groups of observations. Needs at least two groups
/// and more observations than groups.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Option<Anova> {
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    if k < 2 || n <= k || groups.iter().any(Vec::is_empty) {
        return None;
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand).powi(2);
        ss_within += g.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }
    let df_between = (k - 1) as u64;
    let df_within = (n - k) as u64;
    let total = ss_between + ss_within;
    // sums of squares below this are rounding noise
    let noise = 1e-12 * groups.iter().flatten().map(|x| x * x).sum::<f64>().max(1.0);
    let (f, p) = if ss_between <= noise {
        (0.0, 1.0)
    } else if ss_within <= noise {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (f, f_sf(f, df_between as f64, df_within as f64))
    };
    let eta_squared = if total <= noise {
        0.0
    } else {
        (ss_between / total).clamp(0.0, 1.0)
    };
    Some(Anova {
        ss_between,
        ss_within,
        df_between,
        df_within,
        f,
        p,
        eta_squared,
    })
}

/// Mean and population standard deviation.
pub fn mean_and_sigma(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Quantile by linear interpolation between order statistics
/// (position `p·(n−1)` in the sorted sample).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    /// Simpson quadrature of the F density, split at the mode so the
    /// integrand is smooth on each piece.
    fn f_cdf_quadrature(f: f64, d1: f64, d2: f64) -> f64 {
        let ln_b = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
        let pdf = |x: f64| {
            if x <= 0.0 {
                return 0.0;
            }
            ((d1 / 2.0) * (d1 / d2).ln() + (d1 / 2.0 - 1.0) * x.ln()
                - ((d1 + d2) / 2.0) * (1.0 + d1 * x / d2).ln()
                - ln_b)
                .exp()
        };
        // substitute x = u² to tame the x^(d1/2-1) behavior near 0
        let g = |u: f64| 2.0 * u * pdf(u * u);
        let n = 200_000;
        let top = f.sqrt();
        let h = top / n as f64;
        let mut s = g(0.0) + g(top);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * g(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn f_cdf_matches_quadrature() {
        for &(f, d1, d2) in &[(1.0, 2.0, 10.0), (3.5, 4.0, 30.0), (0.7, 5.0, 8.0), (2.2, 2.0, 2.0)] {
            let a = f_cdf(f, d1, d2);
            let b = f_cdf_quadrature(f, d1, d2);
            assert!((a - b).abs() < 1e-8, "F({d1},{d2}) at {f}: {a} vs {b}");
        }
    }

    #[test]
    fn f_sf_matches_statrs() {
        for &(d1, d2) in &[(1.0, 5.0), (2.0, 27.0), (5.0, 1000.0), (9.0, 3.0)] {
            let dist = FisherSnedecor::new(d1, d2).unwrap();
            for &f in &[0.01, 0.5, 1.0, 2.5, 7.0, 40.0] {
                let ours = f_sf(f, d1, d2);
                let theirs = dist.sf(f);
                assert!(
                    (ours - theirs).abs() <= 1e-8 * theirs.max(1e-300) || (ours - theirs).abs() < 1e-14,
                    "sf F({d1},{d2}) at {f}: {ours} vs {theirs}"
                );
            }
        }
    }

    #[test]
    fn quartiles_of_one_to_nine() {
        let v: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.25), 3.0);
        assert_eq!(quantile(&v, 0.5), 5.0);
        assert_eq!(quantile(&v, 0.75), 7.0);
    }

    #[test]
    fn two_point_sigma() {
        let (m, s) = mean_and_sigma(&[0.50, 0.54]);
        assert!((m - 0.52).abs() < 1e-12);
        assert!((s - 0.02).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sf_decreasing_in_f(d1 in 1u32..20, d2 in 1u32..200, a in 0.01f64..50.0, b in 0.01f64..50.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(f_sf(hi, d1 as f64, d2 as f64) <= f_sf(lo, d1 as f64, d2 as f64) + 1e-15);
        }

        #[test]
        fn eta_squared_bounded(groups in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..8), 2..6)) {
            if let Some(a) = one_way_anova(&groups) {
                prop_assert!((0.0..=1.0).contains(&a.eta_squared));
                prop_assert!((0.0..=1.0).contains(&a.p));
            }
        }
    }
}
