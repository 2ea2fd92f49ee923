//! Standard normal distribution functions.

use libm::erfc;
use std::f64::consts::{PI, SQRT_2};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 − Φ(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse cdf. Acklam's rational approximation (relative error ~1e-9)
/// followed by one Halley step against the erfc-based cdf.
pub fn quantile(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    if u > 0.5 {
        // Upper half through the tail probability keeps 1 − u exact.
        return -lower_quantile(1.0 - u);
    }
    lower_quantile(u)
}

/// `Φ⁻¹(1 − q)` computed from the tail probability `q`.
pub fn upper_quantile(q: f64) -> f64 {
    if q > 0.5 {
        return lower_quantile(1.0 - q);
    }
    -lower_quantile(q)
}

fn lower_quantile(u: f64) -> f64 {
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

    let x = if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // Halley refinement; u ≤ 0.5 so cdf(x) is computed in the accurate tail.
    let e = cdf(x) - u;
    let step = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - step / (1.0 + 0.5 * x * step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-16);
        let c = cdf(1.959_963_984_540_054);
        assert!((c - 0.975).abs() < 1e-15, "{c:?}");
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-13);
        assert!((quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-11);
        assert!((upper_quantile(1e-4) - 3.719_016_485_455_709).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..2000 {
            let u = i as f64 / 2000.0;
            let x = quantile(u);
            assert!((cdf(x) - u).abs() <= 1e-15 * u.max(1e-3) * 10.0, "u={u}");
        }
    }
}
