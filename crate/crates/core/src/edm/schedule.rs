use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_SIGMA_MIN: f64 = 0.002;
pub const DEFAULT_SIGMA_MAX: f64 = 80.0;
pub const DEFAULT_RHO: f64 = 7.0;

/// Decreasing noise levels `sigma_0 = sigma_max > ... > sigma_{N-1} =
/// sigma_min > sigma_N = 0`, interpolated linearly in `sigma^(1/rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSchedule {
    levels: Vec<f64>,
    rho: f64,
    sigma_min: f64,
    sigma_max: f64,
}

impl SigmaSchedule {
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Number of solver steps `N`; there are `N + 1` levels.
    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }
}

impl Default for SigmaSchedule {
    fn default() -> Self {
        sigma_schedule(DEFAULT_STEPS, DEFAULT_SIGMA_MIN, DEFAULT_SIGMA_MAX, DEFAULT_RHO)
            .expect("default schedule is valid")
    }
}

/// With `n_steps == 1` the single level is `sigma_max`, followed by zero.
pub fn sigma_schedule(
    n_steps: usize,
    sigma_min: f64,
    sigma_max: f64,
    rho: f64,
) -> Result<SigmaSchedule> {
    if n_steps < 1 {
        return Err(Error::Config("schedule needs at least one step".into()));
    }
    if !(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max.is_finite()) {
        return Err(Error::Config(format!(
            "need 0 < sigma_min < sigma_max, got sigma_min={sigma_min}, sigma_max={sigma_max}"
        )));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Config(format!("rho must be positive, got {rho}")));
    }
    let n = n_steps;
    let mut levels = Vec::with_capacity(n + 1);
    if n == 1 {
        levels.push(sigma_max);
    } else {
        let inv = 1.0 / rho;
        let (a, b) = (sigma_max.powf(inv), sigma_min.powf(inv));
        for i in 0..n {
            let v = if i == 0 {
                sigma_max
            } else if i == n - 1 {
                sigma_min
            } else {
                (a + i as f64 / (n - 1) as f64 * (b - a)).powf(rho)
            };
            levels.push(v);
        }
    }
    levels.push(0.0);
    Ok(SigmaSchedule {
        levels,
        rho,
        sigma_min,
        sigma_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_exact() {
        let s = sigma_schedule(50, 0.002, 80.0, 7.0).unwrap();
        let l = s.levels();
        assert_eq!(l.len(), 51);
        assert_eq!(l[0], 80.0);
        assert_eq!(l[49], 0.002);
        assert_eq!(l[50], 0.0);
    }

    #[test]
    fn three_step_interior() {
        // ((10^(1/7) + 0.1^(1/7)) / 2)^7, evaluated with mpmath at 50 digits.
        let s = sigma_schedule(3, 0.1, 10.0, 7.0).unwrap();
        assert!((s.levels()[1] - 1.450_732_113_566_191_5).abs() < 1e-9);
    }

    #[test]
    fn rho_one_is_linear() {
        let s = sigma_schedule(5, 1.0, 9.0, 1.0).unwrap();
        let expect = [9.0, 7.0, 5.0, 3.0, 1.0, 0.0];
        for (a, b) in s.levels().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step() {
        let s = sigma_schedule(1, 0.1, 10.0, 7.0).unwrap();
        assert_eq!(s.levels(), &[10.0, 0.0]);
    }

    #[test]
    fn invalid_bounds() {
        assert!(sigma_schedule(10, 1.0, 1.0, 7.0).is_err());
        assert!(sigma_schedule(10, 0.0, 1.0, 7.0).is_err());
        assert!(sigma_schedule(10, 0.1, 1.0, 0.0).is_err());
        assert!(sigma_schedule(0, 0.1, 1.0, 7.0).is_err());
    }

    proptest! {
        #[test]
        fn strictly_decreasing(
            n in 1usize..200, lo in 1e-4f64..1.0, span in 1.01f64..1e3, rho in 0.2f64..20.0,
        ) {
            let s = sigma_schedule(n, lo, lo * span, rho).unwrap();
            prop_assert!(s.levels().windows(2).all(|w| w[0] > w[1]));
            prop_assert!(s.levels().iter().all(|v| v.is_finite()));
        }
    }
}
