use libm::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// ln P(Z > z) for standard normal Z, accurate far into the tail.
pub fn ln_normal_tail(z: f64) -> f64 {
    if z < 5.0 {
        return (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln();
    }
    // Mills ratio by backward continued fraction z + 1/(z + 2/(z + ...)).
    let mut cf = z;
    for k in (1..=60).rev() {
        cf = z + k as f64 / cf;
    }
    -0.5 * z * z - LN_SQRT_2PI - cf.ln()
}

/// ln(P(a < Z <= b)) for a < b.
pub fn ln_normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        let la = ln_normal_tail(a);
        let lb = ln_normal_tail(b);
        la + (-(lb - la).exp_m1()).ln()
    } else if b <= 0.0 {
        ln_normal_interval(-b, -a)
    } else {
        (1.0 - (ln_normal_tail(-a)).exp() - (ln_normal_tail(b)).exp()).ln()
    }
}

/// ln sum exp(x_i)
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_is_continuous_at_switch() {
        let lo = ln_normal_tail(5.0 - 1e-12);
        let hi = ln_normal_tail(5.0);
        assert!((lo - hi).abs() < 1e-9, "{lo} vs {hi}");
    }

    #[test]
    fn tail_matches_known_values() {
        // P(Z > 1.96) = 0.0249978951482204...
        assert!((ln_normal_tail(1.96).exp() - 0.024_997_895_148_220_4).abs() < 1e-13);
        // ln P(Z > 40) = -804.6084420137538 (mpmath)
        assert!((ln_normal_tail(40.0) + 804.608_442_013_753_8).abs() < 1e-9);
    }

    #[test]
    fn interval_symmetry() {
        let a = ln_normal_interval(0.3, 1.2);
        let b = ln_normal_interval(-1.2, -0.3);
        assert!((a - b).abs() < 1e-14);
        let c = ln_normal_interval(-1.0, 1.0).exp();
        assert!((c - 0.682_689_492_137_085_9).abs() < 1e-12);
    }
}
