use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub(crate) fn t_pvalue(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    if !(df > 0.0) {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Two-sided p-value of a standard-normal statistic.
pub(crate) fn z_pvalue(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    if z.is_infinite() {
        return 0.0;
    }
    let dist = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * dist.sf(z.abs())).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // qt(0.975, 10) = 2.228139
        assert!((t_pvalue(2.228138851986, 10.0) - 0.05).abs() < 1e-9);
        assert!((z_pvalue(1.959963984540054) - 0.05).abs() < 1e-9);
        assert_eq!(t_pvalue(0.0, 5.0), 1.0);
        assert_eq!(t_pvalue(f64::INFINITY, 5.0), 0.0);
        assert_eq!(z_pvalue(f64::NAN), 1.0);
    }
}
