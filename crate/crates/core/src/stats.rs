//! Small statistical helpers.

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of a normal with the given mean and standard deviation.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    std_normal_cdf((x - mean) / sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_values() {
        assert_relative_eq!(std_normal_cdf(0.0), 0.5, epsilon = 1e-15);
        // Frozen from scipy.stats.norm.cdf.
        assert_relative_eq!(
            std_normal_cdf(1.0) - std_normal_cdf(-1.0),
            0.6826894921370859,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            std_normal_cdf(0.1) - std_normal_cdf(-0.1),
            0.07965567455405798,
            epsilon = 1e-12
        );
    }

    #[test]
    fn symmetry() {
        for z in [0.3, 1.7, 2.9] {
            assert_relative_eq!(std_normal_cdf(z) + std_normal_cdf(-z), 1.0, epsilon = 1e-14);
        }
    }
}
