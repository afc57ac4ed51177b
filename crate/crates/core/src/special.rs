//! Standard normal distribution function.

use libm::erfc;

/// `Φ(x)`, evaluated as `erfc(−x/√2)/2` so that both tails keep full
/// relative precision.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `exp(−x)` with an exact zero once the result is below the smallest
/// subnormal (`x > 745`).
pub fn exp_neg(x: f64) -> f64 {
    if x > 745.0 {
        0.0
    } else {
        (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        // Values from a 50-digit evaluation.
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (1.959_963_984_540_054, 0.975),
            (-3.0, 0.001_349_898_031_630_094_6),
            (-8.0, 6.220_960_574_271_784e-16),
        ];
        for (x, want) in cases {
            let got = normal_cdf(x);
            assert!((got - want).abs() <= 1e-15, "x={x}: {got} vs {want}");
            assert!(((got - want) / want).abs() < 1e-13, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn cdf_symmetry() {
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_neg_underflow_is_exact_zero() {
        assert_eq!(exp_neg(746.0), 0.0);
        assert_eq!(exp_neg(0.0), 1.0);
        assert!(exp_neg(700.0) > 0.0);
    }
}
