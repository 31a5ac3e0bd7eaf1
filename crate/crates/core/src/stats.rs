//! Statistical machinery: 2x2 chi-squared tests, Wilson proportion
//! intervals, exact McNemar tests, column-normalized mosaic tables, and
//! informative-Dirichlet log-odds word scores.
//!
//! The special functions (log-gamma, regularized incomplete gamma,
//! normal quantile) are implemented locally so numeric results do not
//! depend on an external numerics crate.

use std::collections::BTreeMap;

use crate::error::StatsError;

/// Counts with rows = condition present/absent and columns = outcome
/// positive/negative: a = present+positive, b = present+negative,
/// c = absent+positive, d = absent+negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> ContingencyTable2x2 {
        ContingencyTable2x2 { a, b, c, d }
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogOddsResult {
    pub word: String,
    pub z: f64,
    pub count_a: u64,
    pub count_b: u64,
}

/// Pearson chi-squared test on a 2x2 table, no continuity correction,
/// one degree of freedom. Fails on tables where any row or column sums
/// to zero (those have a zero expected count).
pub fn chi_squared_2x2(t: ContingencyTable2x2) -> Result<TestResult, StatsError> {
    let (a, b, c, d) = (t.a as f64, t.b as f64, t.c as f64, t.d as f64);
    let n = a + b + c + d;
    let row = [a + b, c + d];
    let col = [a + c, b + d];
    if n == 0.0 || row.contains(&0.0) || col.contains(&0.0) {
        return Err(StatsError::DegenerateTable);
    }
    let observed = [[a, b], [c, d]];
    let mut statistic = 0.0;
    for (i, r) in row.iter().enumerate() {
        for (j, k) in col.iter().enumerate() {
            let expected = r * k / n;
            let diff = observed[i][j] - expected;
            statistic += diff * diff / expected;
        }
    }
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, 1.0),
        dof: 1,
    })
}

/// Survival function of the chi-squared distribution: the regularized
/// upper incomplete gamma Q(dof/2, x/2).
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    gamma_q(dof / 2.0, x / 2.0)
}

/// Wilson score interval for a binomial proportion at the given
/// central confidence level. Lower bound is exactly 0 for zero
/// successes; upper bound is exactly 1 when every trial succeeded.
pub fn wilson_ci(successes: u64, n: u64, level: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    assert!(successes <= n, "successes {successes} > trials {n}");
    assert!(level > 0.0 && level < 1.0, "level must be in (0, 1)");
    let z = normal_quantile(0.5 + level / 2.0);
    let nn = n as f64;
    let p = successes as f64 / nn;
    let z2 = z * z;
    let den = 1.0 + z2 / nn;
    let centre = (p + z2 / (2.0 * nn)) / den;
    let half = z * (p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)).sqrt() / den;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    Ok((lo, hi))
}

/// Exact two-sided McNemar test over paired per-row correctness.
/// `statistic` is the smaller discordant count; with no discordant
/// pairs the test is vacuous and p = 1.
pub fn mcnemar_exact(correct_a: &[bool], correct_b: &[bool]) -> TestResult {
    assert_eq!(correct_a.len(), correct_b.len(), "paired vectors differ in length");
    let mut n01 = 0u64; // a right, b wrong
    let mut n10 = 0u64; // a wrong, b right
    for (&a, &b) in correct_a.iter().zip(correct_b) {
        match (a, b) {
            (true, false) => n01 += 1,
            (false, true) => n10 += 1,
            _ => {}
        }
    }
    let n = n01 + n10;
    let k = n01.min(n10);
    let p_value = if n == 0 {
        1.0
    } else {
        (2.0 * binomial_cdf_half(k, n)).min(1.0)
    };
    TestResult {
        statistic: k as f64,
        p_value,
        dof: 1,
    }
}

/// P(Bin(n, 1/2) <= k), summed in log space so large n stays stable.
fn binomial_cdf_half(k: u64, n: u64) -> f64 {
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let mut sum = 0.0;
    for i in 0..=k {
        sum += (ln_choose(n, i) - ln_half_n).exp();
    }
    sum.min(1.0)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Informative-Dirichlet log-odds word scores between two bags of
/// words. The prior for each word is `alpha0` times its pooled
/// frequency; scores are z-values of the log-odds-ratio difference,
/// sorted by z descending (ties by word).
pub fn fightin_words(
    tokens_a: &BTreeMap<String, u64>,
    tokens_b: &BTreeMap<String, u64>,
    alpha0: f64,
) -> Result<Vec<LogOddsResult>, StatsError> {
    assert!(alpha0 > 0.0, "alpha0 must be positive");
    let na: u64 = tokens_a.values().sum();
    let nb: u64 = tokens_b.values().sum();
    if na == 0 || nb == 0 {
        return Err(StatsError::EmptyCorpus);
    }
    let (naf, nbf) = (na as f64, nb as f64);
    let pooled = naf + nbf;
    let mut vocab: Vec<&String> = tokens_a.keys().chain(tokens_b.keys()).collect();
    vocab.sort_unstable();
    vocab.dedup();
    let mut out = Vec::with_capacity(vocab.len());
    for word in vocab {
        let ya = tokens_a.get(word).copied().unwrap_or(0);
        let yb = tokens_b.get(word).copied().unwrap_or(0);
        let alpha = alpha0 * (ya + yb) as f64 / pooled;
        let (yaf, ybf) = (ya as f64, yb as f64);
        let delta = ((yaf + alpha) / (naf + alpha0 - yaf - alpha)).ln()
            - ((ybf + alpha) / (nbf + alpha0 - ybf - alpha)).ln();
        let variance = 1.0 / (yaf + alpha) + 1.0 / (ybf + alpha);
        out.push(LogOddsResult {
            word: word.clone(),
            z: delta / variance.sqrt(),
            count_a: ya,
            count_b: yb,
        });
    }
    out.sort_by(|x, y| y.z.total_cmp(&x.z).then_with(|| x.word.cmp(&y.word)));
    Ok(out)
}

/// One side of a mosaic display: outcome ratios within the rows that
/// share a condition value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MosaicGroup {
    pub present: bool,
    pub positive_ratio: f64,
    pub negative_ratio: f64,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MosaicResult {
    pub table: ContingencyTable2x2,
    /// Condition-present group first, then condition-absent.
    pub groups: [MosaicGroup; 2],
    pub test: TestResult,
}

/// Column-normalized 2x2 mosaic over (condition present, outcome
/// positive) observations, with the chi-squared independence test.
pub fn mosaic_table(rows: &[(bool, bool)]) -> Result<MosaicResult, StatsError> {
    let mut t = ContingencyTable2x2::new(0, 0, 0, 0);
    for &(present, positive) in rows {
        match (present, positive) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    let test = chi_squared_2x2(t)?;
    let present_n = t.a + t.b;
    let absent_n = t.c + t.d;
    Ok(MosaicResult {
        table: t,
        groups: [
            MosaicGroup {
                present: true,
                positive_ratio: t.a as f64 / present_n as f64,
                negative_ratio: t.b as f64 / present_n as f64,
                n: present_n,
            },
            MosaicGroup {
                present: false,
                positive_ratio: t.c as f64 / absent_n as f64,
                negative_ratio: t.d as f64 / absent_n as f64,
                n: absent_n,
            },
        ],
        test,
    })
}

// ---- special functions ----

/// Natural log of the gamma function (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma Q(a, x) for a > 0, x >= 0.
/// Series expansion below the a + 1 crossover, Lentz continued
/// fraction above it; absolute error stays well under 1e-12.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_q domain: a > 0, x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

/// Lower regularized gamma P(a, x) by power series; valid for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..500 {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    sum * (a * x.ln() - x - ln_gamma(a)).exp()
}

/// Upper regularized gamma Q(a, x) by modified Lentz continued
/// fraction; valid for x >= a + 1.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
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
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a)).exp() * h
}

/// Inverse standard normal CDF (Wichura's PPND16 rational
/// approximations), accurate to about 1e-15 over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile domain: p in (0, 1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        const A: [f64; 8] = [
            3.387_132_872_796_366_608,
            133.141_667_891_784_377_45,
            1_971.590_950_306_551_442_7,
            13_731.693_765_509_461_125,
            45_921.953_931_549_871_457,
            67_265.770_927_008_700_853,
            33_430.575_583_588_128_105,
            2_509.080_928_730_122_672_7,
        ];
        const B: [f64; 8] = [
            1.0,
            42.313_330_701_600_911_252,
            687.187_007_492_057_908_3,
            5_394.196_021_424_751_107_7,
            21_213.794_301_586_595_867,
            39_307.895_800_092_710_61,
            28_729.085_735_721_942_674,
            5_226.495_278_852_854_561,
        ];
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        const C: [f64; 8] = [
            1.423_437_110_749_683_577_34,
            4.630_337_846_156_545_295_9,
            5.769_497_221_460_691_405_5,
            3.647_848_324_763_204_605_04,
            1.270_458_252_452_368_382_58,
            0.241_780_725_177_450_611_77,
            2.272_384_498_926_918_458_33e-2,
            7.745_450_142_783_414_076_4e-4,
        ];
        const D: [f64; 8] = [
            1.0,
            2.053_191_626_637_758_821_87,
            1.676_384_830_183_803_849_4,
            0.689_767_334_985_100_004_55,
            0.148_103_976_427_480_074_59,
            1.519_866_656_361_645_719_66e-2,
            5.475_938_084_995_344_946e-4,
            1.050_750_071_644_416_843_24e-9,
        ];
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        const E: [f64; 8] = [
            6.657_904_643_501_103_777_2,
            5.463_784_911_164_114_369_9,
            1.784_826_539_917_291_335_8,
            0.296_560_571_828_504_891_23,
            2.653_218_952_657_612_309_3e-2,
            1.242_660_947_388_078_438_6e-3,
            2.711_555_568_743_487_578_15e-5,
            2.010_334_399_292_288_132_65e-7,
        ];
        const F: [f64; 8] = [
            1.0,
            0.599_832_206_555_887_937_69,
            0.136_929_880_922_735_805_31,
            1.487_536_129_085_061_485_25e-2,
            7.868_691_311_456_132_591e-4,
            1.846_318_317_510_054_681_8e-5,
            1.421_511_758_316_445_888_7e-7,
            2.044_263_103_389_939_785_64e-15,
        ];
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn chi_squared_independent_table_is_zero() {
        let r = chi_squared_2x2(ContingencyTable2x2::new(10, 10, 10, 10)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.dof, 1);
    }

    #[test]
    fn chi_squared_spot_values() {
        let r = chi_squared_2x2(ContingencyTable2x2::new(10, 20, 30, 40)).unwrap();
        assert!(close(r.statistic, 0.793_650_793_650_793_6, 1e-12));
        assert!(close(r.p_value, 0.372_998_483_613_486_86, 1e-12));
        let r = chi_squared_2x2(ContingencyTable2x2::new(50, 0, 0, 50)).unwrap();
        assert!(close(r.statistic, 100.0, 1e-9));
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn chi_squared_rejects_degenerate_tables() {
        assert_eq!(
            chi_squared_2x2(ContingencyTable2x2::new(0, 0, 3, 4)),
            Err(StatsError::DegenerateTable)
        );
        assert_eq!(
            chi_squared_2x2(ContingencyTable2x2::new(0, 2, 0, 4)),
            Err(StatsError::DegenerateTable)
        );
        assert_eq!(
            chi_squared_2x2(ContingencyTable2x2::new(0, 0, 0, 0)),
            Err(StatsError::DegenerateTable)
        );
    }

    #[test]
    fn chi_squared_transposition_and_label_swap_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let t = ContingencyTable2x2::new(
                rng.random_range(1..200),
                rng.random_range(1..200),
                rng.random_range(1..200),
                rng.random_range(1..200),
            );
            let base = chi_squared_2x2(t).unwrap();
            let transposed = chi_squared_2x2(ContingencyTable2x2::new(t.a, t.c, t.b, t.d)).unwrap();
            let swapped = chi_squared_2x2(ContingencyTable2x2::new(t.d, t.c, t.b, t.a)).unwrap();
            assert!(close(base.statistic, transposed.statistic, 1e-9));
            assert!(close(base.statistic, swapped.statistic, 1e-9));
        }
    }

    #[test]
    fn chi_squared_statistic_scales_linearly() {
        let t = ContingencyTable2x2::new(12, 45, 23, 9);
        let base = chi_squared_2x2(t).unwrap().statistic;
        for k in [2u64, 3, 7] {
            let scaled =
                chi_squared_2x2(ContingencyTable2x2::new(t.a * k, t.b * k, t.c * k, t.d * k))
                    .unwrap()
                    .statistic;
            assert!(close(scaled, base * k as f64, 1e-9 * k as f64));
        }
    }

    #[test]
    fn chi_squared_p_matches_reference_distribution() {
        let reference = ChiSquared::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let t = ContingencyTable2x2::new(
                rng.random_range(1..500),
                rng.random_range(1..500),
                rng.random_range(1..500),
                rng.random_range(1..500),
            );
            let r = chi_squared_2x2(t).unwrap();
            let expected = reference.sf(r.statistic);
            assert!(
                close(r.p_value, expected, 1e-9),
                "stat {} p {} ref {}",
                r.statistic,
                r.p_value,
                expected
            );
        }
    }

    #[test]
    fn normal_quantile_spot_values() {
        assert!(close(normal_quantile(0.975), 1.959_963_984_540_054, 1e-12));
        assert!(close(normal_quantile(0.5), 0.0, 1e-15));
        assert!(close(normal_quantile(0.025), -1.959_963_984_540_054, 1e-12));
        // far tail engages the outer rational approximation
        assert!(close(normal_quantile(1e-12), -7.034_483_825_301_132, 1e-9));
    }

    #[test]
    fn wilson_boundaries_clamp_exactly() {
        let (lo, _) = wilson_ci(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = wilson_ci(10, 10, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert_eq!(wilson_ci(1, 0, 0.95), Err(StatsError::EmptySample));
    }

    #[test]
    fn wilson_spot_value() {
        let (lo, hi) = wilson_ci(5, 10, 0.95).unwrap();
        assert!(close(lo, 0.236_593_090_512_564, 1e-12));
        assert!(close(hi, 0.763_406_909_487_436_1, 1e-12));
    }

    #[test]
    fn wilson_width_shrinks_with_n() {
        let mut last_width = f64::INFINITY;
        for n in [10u64, 20, 40, 80, 160, 320] {
            let (lo, hi) = wilson_ci(n / 2, n, 0.95).unwrap();
            let width = hi - lo;
            assert!(width < last_width);
            last_width = width;
        }
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..400u64);
            let s = rng.random_range(0..=n);
            let (lo, hi) = wilson_ci(s, n, 0.95).unwrap();
            let p = s as f64 / n as f64;
            assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }

    #[test]
    fn mcnemar_spot_values() {
        // discordant (15, 5): two-sided exact binomial tail
        let a: Vec<bool> = std::iter::repeat(true)
            .take(15)
            .chain(std::iter::repeat(false).take(5))
            .collect();
        let b: Vec<bool> = std::iter::repeat(false)
            .take(15)
            .chain(std::iter::repeat(true).take(5))
            .collect();
        let r = mcnemar_exact(&a, &b);
        assert!(close(r.p_value, 0.041_389_465_332_031_25, 1e-10));

        let same = vec![true, false, true];
        assert_eq!(mcnemar_exact(&same, &same).p_value, 1.0);

        let a: Vec<bool> = (0..20).map(|i| i < 10).collect();
        let b: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        assert_eq!(mcnemar_exact(&a, &b).p_value, 1.0);
    }

    #[test]
    fn mcnemar_large_n_stays_finite() {
        // 2000 discordant pairs would overflow a naive factorial sum;
        // the log-space tail keeps a representable answer here
        let a: Vec<bool> = (0..2000).map(|i| i < 1150).collect();
        let b: Vec<bool> = (0..2000).map(|i| i >= 1150).collect();
        let r = mcnemar_exact(&a, &b);
        assert!(r.p_value > 0.0 && r.p_value < 1e-6, "p {}", r.p_value);

        // fully one-sided 2000 pairs: the true p is ~1e-602, below
        // f64 range, so it underflows to an honest zero (never NaN)
        let a = vec![true; 2000];
        let b = vec![false; 2000];
        let r = mcnemar_exact(&a, &b);
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn fightin_words_identical_corpora_all_zero() {
        let mut bag = BTreeMap::new();
        bag.insert("alpha".to_string(), 4u64);
        bag.insert("beta".to_string(), 2u64);
        for r in fightin_words(&bag, &bag, 500.0).unwrap() {
            assert!(close(r.z, 0.0, 1e-12));
        }
    }

    #[test]
    fn fightin_words_dominant_word_has_max_z() {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for w in ["one", "two", "three", "four"] {
            a.insert(w.to_string(), 25u64);
            b.insert(w.to_string(), 25u64);
        }
        a.insert("loud".to_string(), 100u64);
        let scored = fightin_words(&a, &b, 500.0).unwrap();
        assert_eq!(scored[0].word, "loud");
        assert!(scored[0].z > scored[1].z);
    }

    #[test]
    fn fightin_words_sign_flips_on_swap() {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        a.insert("x".to_string(), 9u64);
        a.insert("y".to_string(), 1u64);
        b.insert("x".to_string(), 2u64);
        b.insert("y".to_string(), 8u64);
        let fwd = fightin_words(&a, &b, 500.0).unwrap();
        let rev = fightin_words(&b, &a, 500.0).unwrap();
        for f in &fwd {
            let r = rev.iter().find(|r| r.word == f.word).unwrap();
            assert!(close(f.z, -r.z, 1e-12));
        }
    }

    #[test]
    fn fightin_words_empty_corpus_rejected() {
        let empty = BTreeMap::new();
        let mut full = BTreeMap::new();
        full.insert("w".to_string(), 1u64);
        assert_eq!(fightin_words(&empty, &full, 500.0), Err(StatsError::EmptyCorpus));
    }

    #[test]
    fn mosaic_ratios_normalize_within_groups() {
        let rows: Vec<(bool, bool)> = [(true, true); 3]
            .into_iter()
            .chain([(true, false); 1])
            .chain([(false, true); 2])
            .chain([(false, false); 6])
            .collect();
        let m = mosaic_table(&rows).unwrap();
        assert_eq!(m.table, ContingencyTable2x2::new(3, 1, 2, 6));
        assert!(close(m.groups[0].positive_ratio, 0.75, 1e-12));
        assert!(close(m.groups[0].negative_ratio, 0.25, 1e-12));
        assert!(close(m.groups[1].positive_ratio, 0.25, 1e-12));
        assert_eq!(m.groups[0].n, 4);
        assert_eq!(m.groups[1].n, 8);
    }

    #[test]
    fn mosaic_all_absent_is_degenerate() {
        let rows = vec![(false, true), (false, false)];
        assert_eq!(mosaic_table(&rows), Err(StatsError::DegenerateTable));
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(close(ln_gamma(1.0), 0.0, 1e-14));
        assert!(close(ln_gamma(2.0), 0.0, 1e-14));
        assert!(close(ln_gamma(5.0), 24.0f64.ln(), 1e-12));
        assert!(close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-13));
    }

    #[test]
    fn gamma_q_complements_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a: f64 = rng.random_range(0.2..20.0);
            let x: f64 = rng.random_range(0.0..40.0);
            let q = gamma_q(a, x);
            assert!((0.0..=1.0).contains(&q));
        }
        assert_eq!(gamma_q(0.5, 0.0), 1.0);
    }
}
