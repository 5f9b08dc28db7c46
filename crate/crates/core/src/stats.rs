//! Small summary statistics shared by the experiment drivers.

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); zero for a single value.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    LinearFit {
        slope,
        intercept,
        r2: 1.0 - ss_res / ss_tot,
    }
}

/// Least squares through the origin, `y ≈ c·x`; returns `(c, R²)`.
pub fn proportional_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let c = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let my = mean(y);
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - c * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (c, 1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        let (c, r2) = proportional_fit(&x, &[3.0, 6.0, 9.0, 12.0]);
        assert!((c - 3.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sd_of_known_sample() {
        assert!((sample_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - (32.0f64 / 7.0).sqrt()).abs() < 1e-14);
        assert_eq!(sample_sd(&[3.0]), 0.0);
    }
}
