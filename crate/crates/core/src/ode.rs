//! Fixed-step fourth-order Runge-Kutta.
//!
//! [`rk4_step`] is the classical scheme. [`lawson_rk4_step`] is the same
//! tableau applied after factoring out an affine part `L y + c` that is
//! propagated exactly with matrix exponentials (Lawson's integrating-factor
//! RK4). With `L = 0, c = 0` the two coincide.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Exact propagators of `ydot = L y + c` over `h/2` and `h`.
#[derive(Debug, Clone)]
pub enum AffinePropagator {
    Identity,
    Exponential {
        half_lin: DMatrix<f64>,
        half_off: DVector<f64>,
        full_lin: DMatrix<f64>,
        full_off: DVector<f64>,
    },
}

impl AffinePropagator {
    /// Builds the propagators from the augmented exponential
    /// `exp(s [[L, c], [0, 0]]) = [[e^{sL}, phi(sL) s c], [0, 1]]`.
    pub fn new(lin: &DMatrix<f64>, forcing: &DVector<f64>, h: f64) -> Self {
        let d = lin.nrows();
        let mut aug = DMatrix::zeros(d + 1, d + 1);
        aug.view_mut((0, 0), (d, d)).copy_from(lin);
        aug.view_mut((0, d), (d, 1)).copy_from(forcing);
        let split = |s: f64| {
            let e = (&aug * s).exp();
            (
                e.view((0, 0), (d, d)).into_owned(),
                e.view((0, d), (d, 1)).column(0).into_owned(),
            )
        };
        let (half_lin, half_off) = split(0.5 * h);
        let (full_lin, full_off) = split(h);
        AffinePropagator::Exponential {
            half_lin,
            half_off,
            full_lin,
            full_off,
        }
    }

    fn half_state(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            AffinePropagator::Identity => y.clone(),
            AffinePropagator::Exponential { half_lin, half_off, .. } => half_lin * y + half_off,
        }
    }

    fn full_state(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            AffinePropagator::Identity => y.clone(),
            AffinePropagator::Exponential { full_lin, full_off, .. } => full_lin * y + full_off,
        }
    }

    fn half_slope(&self, k: &DVector<f64>) -> DVector<f64> {
        match self {
            AffinePropagator::Identity => k.clone(),
            AffinePropagator::Exponential { half_lin, .. } => half_lin * k,
        }
    }

    fn full_slope(&self, k: &DVector<f64>) -> DVector<f64> {
        match self {
            AffinePropagator::Identity => k.clone(),
            AffinePropagator::Exponential { full_lin, .. } => full_lin * k,
        }
    }
}

/// Classical RK4 step of `ydot = f(t, y)`.
pub fn rk4_step<F>(f: F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    lawson_rk4_step(f, t, y, h, &AffinePropagator::Identity)
}

/// Integrating-factor RK4 step of `ydot = L y + c + f(t, y)`, with the affine
/// part carried by `prop`.
pub fn lawson_rk4_step<F>(mut f: F, t: f64, y: &DVector<f64>, h: f64, prop: &AffinePropagator) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let half = 0.5 * h;
    let y_half = prop.half_state(y);
    let y_full = prop.full_state(y);

    let k1 = f(t, y)?;
    let y2 = prop.half_state(&(y + &k1 * half));
    let k2 = f(t + half, &y2)?;
    let y3 = &y_half + &k2 * half;
    let k3 = f(t + half, &y3)?;
    let y4 = &y_full + prop.half_slope(&k3) * h;
    let k4 = f(t + h, &y4)?;

    let slope = prop.full_slope(&k1) + prop.half_slope(&(k2 + k3)) * 2.0 + k4;
    Ok(y_full + slope * (h / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let y = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let next = rk4_step(|_, y| Ok(DVector::zeros(y.len())), 0.0, &y, 0.1).unwrap();
        assert_eq!(next, y);
    }

    #[test]
    fn exponential_decay_single_step() {
        let y = DVector::from_element(1, 1.0);
        let next = rk4_step(|_, y| Ok(-y), 0.0, &y, 0.1).unwrap();
        assert!((next[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn fourth_order_convergence() {
        // ydot = cos(t) y, y(0) = 1 -> y = exp(sin t)
        let err = |steps: usize| {
            let h = 1.0 / steps as f64;
            let mut y = DVector::from_element(1, 1.0);
            for k in 0..steps {
                y = rk4_step(|t, y| Ok(y * t.cos()), k as f64 * h, &y, h).unwrap();
            }
            (y[0] - 1f64.sin().exp()).abs()
        };
        let ratio = err(20) / err(40);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn lawson_with_zero_affine_part_is_rk4() {
        let lin = DMatrix::zeros(2, 2);
        let prop = AffinePropagator::new(&lin, &DVector::zeros(2), 0.05);
        let f = |t: f64, y: &DVector<f64>| Ok(DVector::from_vec(vec![y[1], -y[0] + t]));
        let y = DVector::from_vec(vec![0.3, -0.4]);
        let a = lawson_rk4_step(f, 0.2, &y, 0.05, &prop).unwrap();
        let b = rk4_step(f, 0.2, &y, 0.05).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn lawson_is_exact_for_affine_systems() {
        // ydot = -a (y - b): exact for any step, including very stiff ones
        let (a, b) = (5000.0, 2.0);
        let lin = DMatrix::from_element(1, 1, -a);
        let forcing = DVector::from_element(1, a * b);
        let h = 0.01;
        let prop = AffinePropagator::new(&lin, &forcing, h);
        let mut y = DVector::from_element(1, -1.0);
        for k in 0..10 {
            y = lawson_rk4_step(|_, y| Ok(DVector::zeros(y.len())), k as f64 * h, &y, h, &prop).unwrap();
        }
        assert!((y[0] - b).abs() < 1e-12);

        let lin = DMatrix::from_element(1, 1, -0.7);
        let forcing = DVector::from_element(1, 0.35);
        let prop = AffinePropagator::new(&lin, &forcing, 0.3);
        let y0 = DVector::from_element(1, 4.0);
        let y1 = lawson_rk4_step(|_, y| Ok(DVector::zeros(y.len())), 0.0, &y0, 0.3, &prop).unwrap();
        let exact = 0.5 + (4.0 - 0.5) * (-0.7f64 * 0.3).exp();
        assert!((y1[0] - exact).abs() < 1e-14);
    }

    #[test]
    fn lawson_matches_rk4_when_non_stiff() {
        // ydot = -0.5 y + sin(t): split into affine and forcing parts
        let lin = DMatrix::from_element(1, 1, -0.5);
        let h = 0.01;
        let prop = AffinePropagator::new(&lin, &DVector::zeros(1), h);
        let mut a = DVector::from_element(1, 1.0);
        let mut b = a.clone();
        for k in 0..100 {
            let t = k as f64 * h;
            a = lawson_rk4_step(|t, _| Ok(DVector::from_element(1, t.sin())), t, &a, h, &prop).unwrap();
            b = rk4_step(|t, y| Ok(y * -0.5 + DVector::from_element(1, t.sin())), t, &b, h).unwrap();
        }
        assert!((a - b).norm() < 1e-9);
    }
}
