//! Univariate and bivariate standard normal probabilities.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{check_open_probability, Result};

#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `P(Z >= x)`.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_quantile(p: f64) -> Result<f64> {
    check_open_probability("quantile probability", p)?;
    Ok(quantile_unchecked(p))
}

/// Critical value `b` with `P(Z >= b) = level`; `+inf` for a non-positive level.
#[inline]
pub fn upper_critical_value(level: f64) -> f64 {
    if level <= 0.0 {
        f64::INFINITY
    } else if level >= 1.0 {
        f64::NEG_INFINITY
    } else {
        -quantile_unchecked(level)
    }
}

/// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

// Gauss-Legendre nodes (negative half) and weights for 6, 12 and 20 points.
const GL_X: [&[f64]; 3] = [
    &[
        -0.932_469_514_203_152_2,
        -0.661_209_386_466_264_7,
        -0.238_619_186_083_197,
    ],
    &[
        -0.981_560_634_246_719_1,
        -0.904_117_256_370_475,
        -0.769_902_674_194_305,
        -0.587_317_954_286_617_1,
        -0.367_831_498_998_180_2,
        -0.125_233_408_511_469_2,
    ],
    &[
        -0.993_128_599_185_094_9,
        -0.963_971_927_277_913_8,
        -0.912_234_428_251_326,
        -0.839_116_971_822_218_8,
        -0.746_331_906_460_150_8,
        -0.636_053_680_726_515,
        -0.510_867_001_950_827_1,
        -0.373_706_088_715_419_6,
        -0.227_785_851_141_645_1,
        -0.076_526_521_133_497_33,
    ],
];
const GL_W: [&[f64]; 3] = [
    &[
        0.171_324_492_379_170_5,
        0.360_761_573_048_138_4,
        0.467_913_934_572_690_4,
    ],
    &[
        0.047_175_336_386_511_77,
        0.106_939_325_995_318_3,
        0.160_078_328_543_346_4,
        0.203_167_426_723_065_9,
        0.233_492_536_538_354_7,
        0.249_147_045_813_402_9,
    ],
    &[
        0.017_614_007_139_152_12,
        0.040_601_429_800_386_94,
        0.062_672_048_334_109_06,
        0.083_276_741_576_704_75,
        0.101_930_119_817_240_4,
        0.118_194_531_961_518_4,
        0.131_688_638_449_176_6,
        0.142_096_109_318_382_1,
        0.149_172_986_472_603_7,
        0.152_753_387_130_725_9,
    ],
];

/// Upper orthant `P(X > h, Y > k)` for standard normals with correlation `r`.
///
/// Drezner-Wesolowsky with Genz's refinements; absolute accuracy near 1e-15.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return normal_sf(k);
    }
    if k == f64::NEG_INFINITY {
        return normal_sf(h);
    }
    let r = r.clamp(-1.0, 1.0);
    let ng = if r.abs() < 0.3 {
        0
    } else if r.abs() < 0.75 {
        1
    } else {
        2
    };
    let (xs_nodes, ws) = (GL_X[ng], GL_W[ng]);
    let two_pi = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (&x, &w) in xs_nodes.iter().zip(ws) {
            let sn = (asr * (x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            let sn = (asr * (-x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        return bvn * asr / (2.0 * two_pi) + normal_cdf(-h) * normal_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * normal_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (&x, &w) in xs_nodes.iter().zip(ws) {
            let xs = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = as_ * (-x + 1.0).powi(2) / 4.0;
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * (-(bs / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                    - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn += normal_cdf(-h.max(k));
    } else {
        // k was negated above
        bvn = -bvn + (normal_cdf(-h) - normal_cdf(-k)).max(0.0);
    }
    bvn.clamp(0.0, 1.0)
}

/// Lower orthant `P(X < h, Y < k)` for standard normals with correlation `r`.
pub fn bvn_lower(h: f64, k: f64, r: f64) -> f64 {
    bvn_upper(-h, -k, r)
}

/// Lower orthant `P(X1 < h1, X2 < h2, X3 < h3)` for standard normals with
/// correlations `r12, r13, r23`.
///
/// Genz's trivariate method: starting from `r12 = r13 = 0`, Plackett's
/// identity integrates the derivative along the path `r = sin(x asin(r))`.
pub fn tvn_lower(h: [f64; 3], r12: f64, r13: f64, r23: f64) -> f64 {
    tvn_lower_with(h, r12, r13, r23, 1e-14)
}

/// [`tvn_lower`] with absolute quadrature tolerance `eps`.
pub(crate) fn tvn_lower_with(h: [f64; 3], r12: f64, r13: f64, r23: f64, eps: f64) -> f64 {
    let [mut h1, mut h2, mut h3] = h;
    let (mut r12, mut r13, mut r23) = (
        r12.clamp(-1.0, 1.0),
        r13.clamp(-1.0, 1.0),
        r23.clamp(-1.0, 1.0),
    );
    // make r23 the largest in magnitude
    if r12.abs() > r13.abs() {
        std::mem::swap(&mut h2, &mut h3);
        std::mem::swap(&mut r12, &mut r13);
    }
    if r13.abs() > r23.abs() {
        std::mem::swap(&mut h1, &mut h2);
        std::mem::swap(&mut r23, &mut r13);
    }
    if h1.is_infinite() || h2.is_infinite() || h3.is_infinite() {
        return tvn_with_infinite([h1, h2, h3], r12, r13, r23);
    }
    const EPS: f64 = 1e-14;
    if r12.abs() + r13.abs() < EPS {
        return normal_cdf(h1) * bvn_lower(h2, h3, r23);
    }
    if r13.abs() + r23.abs() < EPS {
        return normal_cdf(h3) * bvn_lower(h1, h2, r12);
    }
    if r12.abs() + r23.abs() < EPS {
        return normal_cdf(h2) * bvn_lower(h1, h3, r13);
    }
    if 1.0 - r23 < EPS {
        return bvn_lower(h1, h2.min(h3), r12);
    }
    if r23 + 1.0 < EPS {
        return if h2 > -h3 {
            (bvn_lower(h1, h2, r12) - bvn_lower(h1, -h3, r12)).max(0.0)
        } else {
            0.0
        };
    }
    let base = bvn_lower(h2, h3, r23) * normal_cdf(h1);
    let (rua, rub) = (r12.asin(), r13.asin());
    let f = |x: f64| {
        let mut v = 0.0;
        if rua != 0.0 {
            let (s, c2) = sin_cos2(rua * x);
            v += rua * plackett(h1, h2, h3, (rub * x).sin(), r23, s, c2);
        }
        if rub != 0.0 {
            let (s, c2) = sin_cos2(rub * x);
            v += rub * plackett(h1, h3, h2, (rua * x).sin(), r23, s, c2);
        }
        v
    };
    (base + adaptive_kronrod(&f, 0.0, 1.0, eps) / (2.0 * PI)).clamp(0.0, 1.0)
}

/// `(sin x, cos^2 x)` with the square kept accurate near `pi/2`.
fn sin_cos2(x: f64) -> (f64, f64) {
    let s = x.sin();
    let c2 = if x.abs() > 1.5 {
        let e = PI / 2.0 - x.abs();
        let c = e.sin();
        c * c
    } else {
        1.0 - s * s
    };
    (s, c2)
}

/// Plackett integrand for the pair `(ba, bb)` at correlation `r`
/// (`rr = 1 - r^2`), with the remaining correlations `ra`, `rb`.
fn plackett(ba: f64, bb: f64, bc: f64, ra: f64, rb: f64, r: f64, rr: f64) -> f64 {
    let dt = rr * (rr - (ra - rb).powi(2) - 2.0 * ra * rb * (1.0 - r));
    if dt <= 0.0 {
        return 0.0;
    }
    let bt = (bc * rr + ba * (r * rb - ra) + bb * (r * ra - rb)) / dt.sqrt();
    let ft = (ba - r * bb).powi(2) / rr + bb * bb;
    if bt <= -10.0 || ft >= 100.0 {
        return 0.0;
    }
    let f = (-ft / 2.0).exp();
    if bt < 10.0 {
        f * normal_cdf(bt)
    } else {
        f
    }
}

fn tvn_with_infinite(h: [f64; 3], r12: f64, r13: f64, r23: f64) -> f64 {
    if h.contains(&f64::NEG_INFINITY) {
        return 0.0;
    }
    match (h[0].is_infinite(), h[1].is_infinite(), h[2].is_infinite()) {
        (true, true, true) => 1.0,
        (true, true, false) => normal_cdf(h[2]),
        (true, false, true) => normal_cdf(h[1]),
        (false, true, true) => normal_cdf(h[0]),
        (true, false, false) => bvn_lower(h[1], h[2], r23),
        (false, true, false) => bvn_lower(h[0], h[2], r13),
        (false, false, true) => bvn_lower(h[0], h[1], r12),
        (false, false, false) => unreachable!("some bound is infinite"),
    }
}

const KRONROD_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const GAUSS7_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point rule.
fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = KRONROD_W[7] * fc;
    let mut g = GAUSS7_W[3] * fc;
    for i in 0..7 {
        let pair = f(c - h * KRONROD_X[i]) + f(c + h * KRONROD_X[i]);
        k += KRONROD_W[i] * pair;
        if i % 2 == 1 {
            g += GAUSS7_W[i / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut pieces = vec![(a, b, kronrod15(f, a, b))];
    for _ in 0..100 {
        let total_err: f64 = pieces.iter().map(|p| p.2 .1).sum();
        if total_err <= tol {
            break;
        }
        let (i, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("non-empty");
        let (lo, hi, _) = pieces.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        pieces.push((lo, mid, kronrod15(f, lo, mid)));
        pieces.push((mid, hi, kronrod15(f, mid, hi)));
    }
    pieces.iter().map(|p| p.2 .0).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_constants() {
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((normal_quantile(0.99).unwrap() - 2.326_347_874_040_841).abs() < 1e-14);
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn inverse_pair() {
        assert!((normal_quantile(normal_cdf(1.7)).unwrap() - 1.7).abs() < 1e-12);
        let mut p = 1e-10;
        while p < 1.0 - 1e-10 {
            for q in [p, 1.0 - p] {
                let x = normal_quantile(q).unwrap();
                assert!((normal_cdf(x) - q).abs() <= 1e-12 * q.max(1e-4), "p={q}");
            }
            p *= 1.7;
        }
        // the upper tail is ill-conditioned in x (1 - p loses digits), so only
        // check x-space round trips where the lower tail governs
        for i in -60..=30 {
            let x = i as f64 / 10.0;
            let back = normal_quantile(normal_cdf(x)).unwrap();
            assert!(
                (back - x).abs() <= 1e-12 * x.abs().max(1.0),
                "x={x}: {back}"
            );
        }
    }

    #[test]
    fn critical_values() {
        assert_eq!(upper_critical_value(0.0), f64::INFINITY);
        assert_eq!(upper_critical_value(1.0), f64::NEG_INFINITY);
        assert!((upper_critical_value(0.01) - 2.326_347_874_040_841).abs() < 1e-13);
        assert!((normal_sf(upper_critical_value(1e-9)) - 1e-9).abs() < 1e-22);
    }

    /// `P(X > h, Y > k) = ∫_h^∞ φ(x) P(Y > k | x) dx` by composite Simpson.
    fn bvn_quadrature(h: f64, k: f64, r: f64) -> f64 {
        let hi = 12.0;
        let lo = h.max(-12.0);
        let n = 40_000;
        let step = (hi - lo) / n as f64;
        let s = (1.0 - r * r).sqrt();
        let f = |x: f64| normal_pdf(x) * normal_sf((k - r * x) / s);
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let x = lo + i as f64 * step;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * step / 3.0
    }

    #[test]
    fn bivariate_matches_quadrature() {
        for &r in &[
            -0.95, -0.8, -0.5, -0.1, 0.0, 0.2, 0.5, 0.71, 0.76, 0.9, 0.93, 0.99,
        ] {
            for &(h, k) in &[
                (0.0, 0.0),
                (1.0, 2.0),
                (2.3, 2.3),
                (-1.0, 0.5),
                (3.0, -2.0),
                (2.8, 1.9),
            ] {
                let a = bvn_upper(h, k, r);
                let b = bvn_quadrature(h, k, r);
                assert!((a - b).abs() < 1e-10, "r={r} h={h} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn bivariate_limits() {
        let q = 2.0;
        assert!((bvn_upper(q, q, 0.0) - normal_sf(q).powi(2)).abs() < 1e-16);
        assert!((bvn_upper(q, q, 1.0) - normal_sf(q)).abs() < 1e-16);
        assert!(bvn_upper(q, q, -1.0).abs() < 1e-16);
        assert!((bvn_upper(0.0, 0.0, 0.5) - (0.25 + 0.5f64.asin() / (2.0 * PI))).abs() < 1e-15);
        assert_eq!(bvn_upper(f64::INFINITY, 0.0, 0.3), 0.0);
        assert_eq!(bvn_upper(f64::NEG_INFINITY, 1.0, 0.3), normal_sf(1.0));
    }

    fn tvn_by_simpson(h: [f64; 3], r12: f64, r13: f64, r23: f64) -> f64 {
        // condition on X1 and integrate the bivariate conditional orthant
        let n = 4000;
        let lo = -9.0f64;
        let hi = h[0].min(9.0);
        let step = (hi - lo) / n as f64;
        let s2 = (1.0 - r12 * r12).sqrt();
        let s3 = (1.0 - r13 * r13).sqrt();
        let rc = (r23 - r12 * r13) / (s2 * s3);
        let g =
            |x: f64| normal_pdf(x) * bvn_lower((h[1] - r12 * x) / s2, (h[2] - r13 * x) / s3, rc);
        let mut acc = g(lo) + g(hi);
        for i in 1..n {
            acc += g(lo + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * step / 3.0
    }

    #[test]
    fn trivariate_against_conditioning() {
        let cases = [
            ([2.2, 2.2, 2.2], 0.7627, 0.6667, 0.6992),
            ([0.5, -0.3, 1.1], -0.4, 0.2, 0.5),
            ([1.0, 2.0, 1.5], 0.0, 0.0, 0.3),
            ([1.9, 2.4, 2.1], 0.95, 0.9, 0.93),
            ([0.0, 0.0, 0.0], 0.3, -0.3, 0.1),
        ];
        for (h, r12, r13, r23) in cases {
            let got = tvn_lower(h, r12, r13, r23);
            let want = tvn_by_simpson(h, r12, r13, r23);
            assert!(
                (got - want).abs() < 1e-11,
                "{h:?} {r12} {r13} {r23}: {got} vs {want}"
            );
            let permuted = tvn_lower([h[2], h[0], h[1]], r13, r23, r12);
            assert!((got - permuted).abs() < 1e-13);
        }
        let orthant = tvn_lower([0.0; 3], 0.5, 0.5, 0.5);
        assert!((orthant - (0.125 + 3.0 * 0.5f64.asin() / (4.0 * PI))).abs() < 1e-14);
        assert_eq!(tvn_lower([1.0, f64::NEG_INFINITY, 0.0], 0.2, 0.2, 0.2), 0.0);
        assert!(
            (tvn_lower([1.0, f64::INFINITY, 0.5], 0.2, 0.3, 0.4) - bvn_lower(1.0, 0.5, 0.3)).abs()
                < 1e-15
        );
    }
}
