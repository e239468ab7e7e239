/// `(1/n) ln(1/(1-r))`: worst-case KL distortion of a linear algorithm after
/// `n` ratings when a fraction `r` of the training data is manipulated.
pub fn kl_bound(n: usize, r: f64) -> f64 {
    assert!(n >= 1, "n must be positive");
    assert!((0.0..1.0).contains(&r), "r must lie in [0, 1), got {r}");
    -(-r).ln_1p() / n as f64
}

/// `sqrt((1/2n) ln(1/(1-r)))`, the matching RMS distortion bound.
pub fn rms_bound(n: usize, r: f64) -> f64 {
    (0.5 * kl_bound(n, r)).sqrt()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn zero_manipulation_means_zero_bound() {
        for n in 1..50 {
            assert_eq!(kl_bound(n, 0.0), 0.0);
            assert_eq!(rms_bound(n, 0.0), 0.0);
        }
    }

    #[test]
    fn ten_percent_examples() {
        let b22 = rms_bound(22, 0.1);
        assert_abs_diff_eq!(b22, (0.9f64.recip().ln() / 44.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b22, 0.04893, epsilon = 5e-5);
        assert!(b22 < 0.05);
        let b21 = rms_bound(21, 0.1);
        assert_abs_diff_eq!(b21, 0.0501, epsilon = 5e-5);
        assert!(b21 <= 0.0501);
    }

    #[test]
    fn monotone_in_n_and_r() {
        for &r in &[0.01, 0.05, 0.1, 0.2, 0.5] {
            for n in 1..40 {
                assert!(kl_bound(n + 1, r) < kl_bound(n, r));
                assert!(rms_bound(n + 1, r) < rms_bound(n, r));
                assert!(kl_bound(n, r) < kl_bound(n, r + 0.01));
                assert!(rms_bound(n, r) < rms_bound(n, r + 0.01));
            }
        }
    }
}
