//! Gaussian special functions and a derivative-free scalar maximizer.
//!
//! `q_tail` is built on a complementary error function that follows the
//! classic fdlibm `s_erf.c` rational approximations; the published bound on
//! each piece is below 2^-57 relative, which keeps `q_tail` within 1e-15
//! absolute everywhere on the real line.

use crate::error::{Error, Result};

/// A closed search interval `[lo, hi]` with `lo < hi`, both finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("interval bounds must be finite: [{lo}, {hi}]")));
        }
        if lo >= hi {
            return Err(Error::invalid(format!("interval requires lo < hi: [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Upper tail `P(Z > z)` of the standard normal distribution.
pub fn q_tail(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::invalid("q_tail of NaN"));
    }
    Ok(0.5 * erfc(z * std::f64::consts::FRAC_1_SQRT_2))
}

/// Infallible variant for arguments already known not to be NaN.
#[inline]
pub(crate) fn q(z: f64) -> f64 {
    debug_assert!(!z.is_nan());
    0.5 * erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of [`q_tail`] on `(0, 1)`.
///
/// Acklam's rational approximation gives a starting point good to ~1e-9
/// relative; two Halley steps against `q_tail` bring it to machine precision.
pub fn q_tail_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("q_tail_inverse needs p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Q^{-1}(p) = Phi^{-1}(1 - p) = -Phi^{-1}(p)
    let mut z = -acklam_probit(p);
    for _ in 0..2 {
        let err = q(z) - p;
        let pdf = normal_pdf(z);
        if pdf == 0.0 {
            break;
        }
        // d/dz Q = -pdf, d2/dz2 Q = z * pdf
        let u = err / pdf;
        z += u / (1.0 - 0.5 * z * u);
    }
    Ok(z)
}

fn acklam_probit(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let r = (-2.0 * p.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else if p <= 1.0 - P_LOW {
        let s = p - 0.5;
        let r = s * s;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * s
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let r = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    }
}

/// Golden-section iteration cap.
pub const MAX_GOLDEN_ITERS: usize = 200;

/// Maximizes `f` over `domain` by golden-section search.
///
/// Stops when the bracket is narrower than `tol` or after
/// [`MAX_GOLDEN_ITERS`] iterations, and reports the midpoint of the final
/// bracket, which also settles ties on a plateau. The two endpoints are
/// then compared against that midpoint and win only if strictly larger,
/// which lets boundary maxima come back exactly. An endpoint value of
/// `-inf` is treated as "not better"; any other non-finite evaluation is an
/// error.
pub fn maximize_scalar<F>(mut f: F, domain: Interval, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: x })
        }
    };

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (domain.lo, domain.hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut iters = 0;
    while b - a > tol && iters < MAX_GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
        iters += 1;
    }

    let mid = 0.5 * (a + b);
    let mut best = (mid, eval(mid)?);
    for end in [domain.lo, domain.hi] {
        let v = f(end);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::NonFinite { point: end });
        }
        if v > best.1 {
            best = (end, v);
        }
    }
    Ok(best)
}

// Complementary error function, fdlibm algorithm.

const ERX: f64 = 8.450_629_115_104_675e-1;
const PP0: f64 = 1.283_791_670_955_125_6e-1;
const PP1: f64 = -3.250_421_072_470_015e-1;
const PP2: f64 = -2.848_174_957_559_851e-2;
const PP3: f64 = -5.770_270_296_489_442e-3;
const PP4: f64 = -2.376_301_665_665_016_3e-5;
const QQ1: f64 = 3.979_172_239_591_553_5e-1;
const QQ2: f64 = 6.502_224_998_876_729e-2;
const QQ3: f64 = 5.081_306_281_875_766e-3;
const QQ4: f64 = 1.324_947_380_043_216_4e-4;
const QQ5: f64 = -3.960_228_278_775_368e-6;
const PA0: f64 = -2.362_118_560_752_659_4e-3;
const PA1: f64 = 4.148_561_186_837_483e-1;
const PA2: f64 = -3.722_078_760_357_013e-1;
const PA3: f64 = 3.183_466_199_011_617_5e-1;
const PA4: f64 = -1.108_946_942_823_966_8e-1;
const PA5: f64 = 3.547_830_432_561_823_6e-2;
const PA6: f64 = -2.166_375_594_868_790_8e-3;
const QA1: f64 = 1.064_208_804_008_442_3e-1;
const QA2: f64 = 5.403_979_177_021_71e-1;
const QA3: f64 = 7.182_865_441_419_627e-2;
const QA4: f64 = 1.261_712_198_087_616_4e-1;
const QA5: f64 = 1.363_708_391_202_905e-2;
const QA6: f64 = 1.198_449_984_679_910_7e-2;
const RA0: f64 = -9.864_944_034_847_148e-3;
const RA1: f64 = -6.938_585_727_071_818e-1;
const RA2: f64 = -1.055_862_622_532_329_1e1;
const RA3: f64 = -6.237_533_245_032_601e1;
const RA4: f64 = -1.623_966_694_625_734_7e2;
const RA5: f64 = -1.846_050_929_067_110_4e2;
const RA6: f64 = -8.128_743_550_630_659e1;
const RA7: f64 = -9.814_329_344_169_145;
const SA1: f64 = 1.965_127_166_743_925_7e1;
const SA2: f64 = 1.376_577_541_435_190_4e2;
const SA3: f64 = 4.345_658_774_752_292e2;
const SA4: f64 = 6.453_872_717_332_679e2;
const SA5: f64 = 4.290_081_400_275_678e2;
const SA6: f64 = 1.086_350_055_417_794_3e2;
const SA7: f64 = 6.570_249_770_319_282;
const SA8: f64 = -6.042_441_521_485_81e-2;
const RB0: f64 = -9.864_942_924_700_099e-3;
const RB1: f64 = -7.992_832_376_805_23e-1;
const RB2: f64 = -1.775_795_491_775_475_2e1;
const RB3: f64 = -1.606_363_848_558_219_2e2;
const RB4: f64 = -6.375_664_433_683_896e2;
const RB5: f64 = -1.025_095_131_611_077_2e3;
const RB6: f64 = -4.835_191_916_086_514e2;
const SB1: f64 = 3.033_806_074_348_245_6e1;
const SB2: f64 = 3.257_925_129_965_739e2;
const SB3: f64 = 1.536_729_586_084_437e3;
const SB4: f64 = 3.199_858_219_508_595_6e3;
const SB5: f64 = 2.553_050_406_433_164_4e3;
const SB6: f64 = 4.745_285_412_069_554e2;
const SB7: f64 = -2.244_095_244_658_581_8e1;
const TINY: f64 = 1.387_778_780_781_445_7e-17;

fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 2.0;
    }
    let neg = x < 0.0;
    let ax = x.abs();
    if ax < 0.84375 {
        let temp = if ax < TINY {
            ax
        } else {
            let z = ax * ax;
            let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
            let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
            let y = r / s;
            if ax < 0.25 {
                ax + ax * y
            } else {
                0.5 + (ax * y + (ax - 0.5))
            }
        };
        return if neg { 1.0 + temp } else { 1.0 - temp };
    }
    if ax < 1.25 {
        let s = ax - 1.0;
        let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
        let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
        return if neg { 1.0 + ERX + p / q } else { 1.0 - ERX - p / q };
    }
    if ax < 28.0 {
        let s = 1.0 / (ax * ax);
        let (r, ss) = if ax < 1.0 / 0.35 {
            (
                RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
                1.0 + s
                    * (SA1
                        + s * (SA2 + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
            )
        } else {
            if neg && ax > 6.0 {
                return 2.0;
            }
            (
                RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
                1.0 + s * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
            )
        };
        // split ax so that z*z is exact
        let z = f64::from_bits(ax.to_bits() & 0xffff_ffff_0000_0000);
        let r = (-z * z - 0.5625).exp() * ((z - ax) * (z + ax) + r / ss).exp();
        return if neg { 2.0 - r / ax } else { r / ax };
    }
    if neg {
        2.0
    } else {
        0.0
    }
}
