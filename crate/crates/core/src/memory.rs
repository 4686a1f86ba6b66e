//! Recorded data for concurrent learning.
//!
//! [`IntegrationBuffer`] keeps the measured samples covering the last
//! integration window and turns them into the window integrals
//! `script_Y(t) = int_{t-dt}^{t} Y dtau` and `script_U(t) = int_{t-dt}^{t} u dtau`.
//! [`HistoryStack`] holds up to `N` recorded tuples and the cached gram
//! `sum_i R_i^T R_i` whose minimum eigenvalue certifies finite excitation.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{IclError, Result};

/// One measured sample: time, measured state, regressor at the measured state, applied input.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub t: f64,
    pub x: DVector<f64>,
    pub y: DMatrix<f64>,
    pub u: DVector<f64>,
}

/// Window integrals and the states at both window endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowIntegrals {
    pub script_y: DMatrix<f64>,
    pub script_u: DVector<f64>,
    pub x_now: DVector<f64>,
    pub x_lag: DVector<f64>,
}

impl WindowIntegrals {
    /// `x(t) - x(t - dt)`.
    pub fn delta_x(&self) -> DVector<f64> {
        &self.x_now - &self.x_lag
    }
}

/// Sliding buffer of samples over `[t_now - span - 2h, t_now]`.
#[derive(Debug, Clone)]
pub struct IntegrationBuffer {
    span: f64,
    step: f64,
    samples: VecDeque<WindowSample>,
    first_x: Option<DVector<f64>>,
}

impl IntegrationBuffer {
    pub fn new(span: f64, step: f64) -> Result<Self> {
        if !(span > 0.0 && span.is_finite()) || !(step > 0.0 && step.is_finite()) {
            return Err(IclError::InvalidConfig(format!(
                "buffer span and step must be positive (span = {span}, step = {step})"
            )));
        }
        Ok(IntegrationBuffer {
            span,
            step,
            samples: VecDeque::with_capacity(Self::capacity_for(span, step)),
            first_x: None,
        })
    }

    /// Upper bound on the number of retained samples.
    pub fn capacity_for(span: f64, step: f64) -> usize {
        (span / step).ceil() as usize + 4
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &VecDeque<WindowSample> {
        &self.samples
    }

    pub fn latest(&self) -> Option<&WindowSample> {
        self.samples.back()
    }

    /// The first state ever pushed; the lagged state while `t <= span`.
    pub fn first_state(&self) -> Option<&DVector<f64>> {
        self.first_x.as_ref()
    }

    fn time_tol(&self) -> f64 {
        1e-6 * self.step
    }

    pub fn push(&mut self, sample: WindowSample) -> Result<()> {
        if let Some(last) = self.samples.back() {
            if !(sample.t > last.t) {
                return Err(IclError::Ordering {
                    last: last.t,
                    t: sample.t,
                });
            }
        }
        if self.first_x.is_none() {
            self.first_x = Some(sample.x.clone());
        }
        let horizon = sample.t - self.span - 2.0 * self.step - self.time_tol();
        self.samples.push_back(sample);
        while self.samples.front().is_some_and(|s| s.t < horizon) {
            self.samples.pop_front();
        }
        Ok(())
    }

    /// Window integrals over `[t_now - span, t_now]`: composite trapezoid with
    /// Gregory end corrections on the sample grid.
    ///
    /// For `t_now <= span` the integrals are exactly zero and the lagged
    /// state is the initial state. A window start between two samples is
    /// handled by cubic interpolation of `x`, `Y` and `u` through the four
    /// nearest samples (linear when fewer are buffered).
    pub fn window_integrals(&self, t_now: f64) -> Result<WindowIntegrals> {
        let last = self
            .samples
            .back()
            .ok_or_else(|| IclError::NotReady("empty integration buffer".into()))?;
        if (t_now - last.t).abs() > self.time_tol() {
            return Err(IclError::Domain(format!(
                "window integrals requested at t = {t_now} but latest sample is at {}",
                last.t
            )));
        }
        let (n, m) = last.y.shape();
        if t_now <= self.span {
            return Ok(WindowIntegrals {
                script_y: DMatrix::zeros(n, m),
                script_u: DVector::zeros(n),
                x_now: last.x.clone(),
                x_lag: self.first_x.clone().expect("non-empty buffer has a first state"),
            });
        }

        let start = t_now - self.span;
        let tol = self.time_tol();
        let j = self.samples.partition_point(|s| s.t < start - tol);
        if j == self.samples.len() {
            return Err(IclError::NotReady(format!("no samples in window starting at {start}")));
        }
        let first = &self.samples[j];
        let (x_lag, y_lag, u_lag, t_lag) = if (first.t - start).abs() <= tol {
            (first.x.clone(), first.y.clone(), first.u.clone(), first.t)
        } else if j == 0 {
            return Err(IclError::NotReady(format!(
                "buffer starts at {} but the window starts at {start}",
                first.t
            )));
        } else if j >= 2 && j + 1 < self.samples.len() {
            let nodes = [j - 2, j - 1, j, j + 1].map(|i| &self.samples[i]);
            let w = lagrange_weights(nodes.map(|s| s.t), start);
            let mix_v = |f: fn(&WindowSample) -> &DVector<f64>| {
                nodes
                    .iter()
                    .zip(w)
                    .fold(DVector::zeros(n), |acc, (s, wi)| acc + f(s) * wi)
            };
            let y = nodes
                .iter()
                .zip(w)
                .fold(DMatrix::zeros(n, m), |acc, (s, wi)| acc + &s.y * wi);
            (mix_v(|s| &s.x), y, mix_v(|s| &s.u), start)
        } else {
            let prev = &self.samples[j - 1];
            let a = (start - prev.t) / (first.t - prev.t);
            (
                prev.x.lerp(&first.x, a),
                &prev.y * (1.0 - a) + &first.y * a,
                prev.u.lerp(&first.u, a),
                start,
            )
        };

        let mut script_y = DMatrix::zeros(n, m);
        let mut script_u = DVector::zeros(n);
        let (mut t_prev, mut y_prev, mut u_prev) = (t_lag, &y_lag, &u_lag);
        for s in self.samples.range(j..) {
            let half = 0.5 * (s.t - t_prev);
            if half > 0.0 {
                script_y += (y_prev + &s.y) * half;
                script_u += (u_prev + &s.u) * half;
            }
            t_prev = s.t;
            y_prev = &s.y;
            u_prev = &s.u;
        }

        // Gregory end corrections on the uniformly spaced samples. They vanish
        // for polynomials of degree <= 1 and lift the rule to fourth order.
        let grid: Vec<&WindowSample> = self.samples.range(j..).collect();
        let k = grid.len().saturating_sub(1);
        let h = self.step;
        let uniform = |i: usize| (grid[i + 1].t - grid[i].t - h).abs() <= tol;
        if grid.len() >= 6 && [0, 1, k - 2, k - 1].into_iter().all(uniform) {
            let ends = |f: &dyn Fn(&WindowSample) -> DMatrix<f64>| {
                let (f0, f1, f2) = (f(grid[0]), f(grid[1]), f(grid[2]));
                let (g0, g1, g2) = (f(grid[k]), f(grid[k - 1]), f(grid[k - 2]));
                let first = (&g0 - &g1) - (&f1 - &f0);
                let second = (&g0 - &g1 * 2.0 + &g2) + (&f2 - &f1 * 2.0 + &f0);
                first * (-h / 12.0) - second * (h / 24.0)
            };
            script_y += ends(&|s| s.y.clone());
            let du = ends(&|s| DMatrix::from_column_slice(n, 1, s.u.as_slice()));
            script_u += du.column(0);
        }

        Ok(WindowIntegrals {
            script_y,
            script_u,
            x_now: last.x.clone(),
            x_lag,
        })
    }
}

fn lagrange_weights(ts: [f64; 4], t: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for (i, wi) in w.iter_mut().enumerate() {
        for (k, &tk) in ts.iter().enumerate() {
            if k != i {
                *wi *= (t - tk) / (ts[i] - tk);
            }
        }
    }
    w
}

/// One recorded data tuple.
///
/// For integral concurrent learning `regressor` is `script_Y_i`, `response`
/// is `x(t_i) - x(t_i - dt)` and `input` is `script_U_i`. For the
/// derivative-based baseline they are `Y_i`, the estimated `xdot_i`, and `u_i`.
/// Either way the recorded data satisfy `response - input = regressor * theta`
/// up to noise.
#[derive(Debug, Clone, PartialEq)]
pub struct StackEntry {
    t: f64,
    regressor: DMatrix<f64>,
    response: DVector<f64>,
    input: DVector<f64>,
    gram_term: DMatrix<f64>,
    rhs_term: DVector<f64>,
}

impl StackEntry {
    pub fn new(t: f64, regressor: DMatrix<f64>, response: DVector<f64>, input: DVector<f64>) -> Result<Self> {
        let n = regressor.nrows();
        if response.len() != n || input.len() != n {
            return Err(IclError::Dimension {
                what: "stack entry vectors",
                expected: n.to_string(),
                got: format!("{} / {}", response.len(), input.len()),
            });
        }
        let all_finite = regressor
            .iter()
            .chain(response.iter())
            .chain(input.iter())
            .all(|v| v.is_finite());
        if !all_finite || !t.is_finite() {
            return Err(IclError::Domain(format!("non-finite stack entry at t = {t}")));
        }
        let gram_term = regressor.tr_mul(&regressor);
        let rhs_term = regressor.tr_mul(&(&response - &input));
        Ok(StackEntry {
            t,
            regressor,
            response,
            input,
            gram_term,
            rhs_term,
        })
    }

    /// Builds an integral entry from window integrals taken at `t`.
    pub fn from_window(t: f64, w: &WindowIntegrals) -> Result<Self> {
        StackEntry::new(t, w.script_y.clone(), w.delta_x(), w.script_u.clone())
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn regressor(&self) -> &DMatrix<f64> {
        &self.regressor
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn input(&self) -> &DVector<f64> {
        &self.input
    }

    /// `R^T R`.
    pub fn gram_term(&self) -> &DMatrix<f64> {
        &self.gram_term
    }

    /// `R^T (response - input)`.
    pub fn rhs_term(&self) -> &DVector<f64> {
        &self.rhs_term
    }
}

/// Relative improvement a replacement must achieve before it is accepted.
pub const DEFAULT_RECORD_MARGIN: f64 = 0.01;

/// Fixed-capacity history stack with a cached gram matrix.
///
/// Recording policy: while not full every candidate is appended. Once full, a
/// candidate replaces the slot that maximizes the minimum eigenvalue of the
/// resulting gram, and only when that improves the current minimum by the
/// relative margin. The minimum eigenvalue is therefore non-decreasing.
#[derive(Debug, Clone)]
pub struct HistoryStack {
    capacity: usize,
    m: usize,
    margin: f64,
    entries: Vec<StackEntry>,
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    lambda_min: f64,
}

impl HistoryStack {
    pub fn new(capacity: usize, m: usize) -> Result<Self> {
        Self::with_margin(capacity, m, DEFAULT_RECORD_MARGIN)
    }

    pub fn with_margin(capacity: usize, m: usize, margin: f64) -> Result<Self> {
        if capacity == 0 || m == 0 {
            return Err(IclError::InvalidConfig(format!(
                "history stack needs positive capacity and parameter dimension (N = {capacity}, m = {m})"
            )));
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(IclError::InvalidConfig(format!(
                "recording margin must be >= 0, got {margin}"
            )));
        }
        Ok(HistoryStack {
            capacity,
            m,
            margin,
            entries: Vec::with_capacity(capacity),
            gram: DMatrix::zeros(m, m),
            rhs: DVector::zeros(m),
            lambda_min: 0.0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> &[StackEntry] {
        &self.entries
    }

    /// Cached `sum_i R_i^T R_i`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Cached `sum_i R_i^T (response_i - input_i)`.
    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Offers a candidate to the stack; returns whether it was stored.
    pub fn try_record(&mut self, candidate: StackEntry) -> Result<bool> {
        if candidate.regressor.ncols() != self.m {
            return Err(IclError::Dimension {
                what: "stack entry regressor columns",
                expected: self.m.to_string(),
                got: candidate.regressor.ncols().to_string(),
            });
        }
        if let Some(first) = self.entries.first() {
            if first.regressor.nrows() != candidate.regressor.nrows() {
                return Err(IclError::Dimension {
                    what: "stack entry regressor rows",
                    expected: first.regressor.nrows().to_string(),
                    got: candidate.regressor.nrows().to_string(),
                });
            }
        }

        if !self.is_full() {
            self.gram += &candidate.gram_term;
            self.rhs += &candidate.rhs_term;
            self.entries.push(candidate);
            // Adding a PSD term cannot lower the minimum eigenvalue.
            self.lambda_min = min_eigenvalue(&self.gram).max(self.lambda_min);
            return Ok(true);
        }

        let mut best: Option<(usize, f64)> = None;
        for (j, old) in self.entries.iter().enumerate() {
            let trial = &self.gram - &old.gram_term + &candidate.gram_term;
            let lam = min_eigenvalue(&trial);
            if best.is_none_or(|(_, b)| lam > b) {
                best = Some((j, lam));
            }
        }
        let (slot, best_lambda) = best.expect("full stack has at least one entry");
        // Absolute floor keeps eigensolver round-off from counting as improvement.
        let floor = 1e-12 * self.gram.trace().abs();
        if best_lambda > self.lambda_min * (1.0 + self.margin) + floor {
            self.entries[slot] = candidate;
            self.recompute();
            self.lambda_min = self.lambda_min.max(min_eigenvalue(&self.gram));
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn recompute(&mut self) {
        self.gram.fill(0.0);
        self.rhs.fill(0.0);
        for e in &self.entries {
            self.gram += &e.gram_term;
            self.rhs += &e.rhs_term;
        }
    }
}

/// Smallest eigenvalue of the symmetrized matrix, clamped at zero.
pub fn min_eigenvalue(gram: &DMatrix<f64>) -> f64 {
    let sym = (gram + gram.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min().max(0.0)
}

/// Minimum eigenvalue of the stack gram; zero for an empty stack.
pub fn excitation_metric(stack: &HistoryStack) -> f64 {
    stack.lambda_min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: f64, x: &[f64], y: DMatrix<f64>, u: &[f64]) -> WindowSample {
        WindowSample {
            t,
            x: DVector::from_column_slice(x),
            y,
            u: DVector::from_column_slice(u),
        }
    }

    fn scalar_sample(t: f64, x: f64, y: f64, u: f64) -> WindowSample {
        sample(t, &[x], DMatrix::from_element(1, 1, y), &[u])
    }

    #[test]
    fn push_and_ordering() {
        let mut b = IntegrationBuffer::new(0.5, 0.1).unwrap();
        b.push(scalar_sample(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(b.len(), 1);
        let err = b.push(scalar_sample(0.0, 1.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, IclError::Ordering { .. }));
        assert!(b.push(scalar_sample(-1.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn buffer_length_is_bounded_by_window() {
        let (span, h) = (0.5, 0.0004);
        let mut b = IntegrationBuffer::new(span, h).unwrap();
        let mut max_len = 0;
        for k in 0..5000 {
            b.push(scalar_sample(k as f64 * h, 0.0, 0.0, 0.0)).unwrap();
            max_len = max_len.max(b.len());
        }
        // 1250 intervals plus the two slack steps
        assert_eq!(max_len, 1253);
        assert!(max_len <= IntegrationBuffer::capacity_for(span, h));
        let front = b.samples().front().unwrap().t;
        let back = b.latest().unwrap().t;
        assert!(back - front >= span + 2.0 * h - 1e-9);
    }

    #[test]
    fn zero_branch_before_window_fills() {
        let mut b = IntegrationBuffer::new(1.0, 0.1).unwrap();
        for k in 0..=5 {
            let t = k as f64 * 0.1;
            b.push(sample(
                t,
                &[1.0 + t, 2.0],
                DMatrix::from_element(2, 3, 7.0),
                &[3.0, 3.0],
            ))
            .unwrap();
        }
        let w = b.window_integrals(0.5).unwrap();
        assert_eq!(w.script_y, DMatrix::zeros(2, 3));
        assert_eq!(w.script_u, DVector::zeros(2));
        assert_eq!(w.x_lag.as_slice(), &[1.0, 2.0]);
        assert_eq!(w.x_now.as_slice(), &[1.5, 2.0]);
        // bitwise zeros
        assert!(w.script_y.iter().all(|v| v.to_bits() == 0));
    }

    #[test]
    fn trapezoid_exact_on_constants_and_linears() {
        let (span, h) = (0.37, 0.01);
        let mut b = IntegrationBuffer::new(span, h).unwrap();
        let c = 2.5;
        for k in 0..200 {
            let t = k as f64 * h;
            b.push(scalar_sample(t, 3.0 * t, 4.0 * t - 1.0, c)).unwrap();
        }
        let t_now = 199.0 * h;
        let w = b.window_integrals(t_now).unwrap();
        let a = t_now - span;
        assert!((w.script_u[0] - c * span).abs() < 1e-12);
        let exact = 2.0 * (t_now * t_now - a * a) - span;
        assert!((w.script_y[(0, 0)] - exact).abs() < 1e-12);
        // interpolated lag state of a linear signal is exact
        assert!((w.x_lag[0] - 3.0 * a).abs() < 1e-12);
        assert!((w.delta_x()[0] - 3.0 * span).abs() < 1e-12);
    }

    #[test]
    fn cubics_integrate_and_interpolate_exactly() {
        let h = 0.01;
        let cube = |t: f64| t * t * t - 2.0 * t * t + 0.5;
        let prim = |t: f64| t.powi(4) / 4.0 - 2.0 * t.powi(3) / 3.0 + 0.5 * t;
        for span in [0.4, 0.377] {
            let mut b = IntegrationBuffer::new(span, h).unwrap();
            for k in 0..150 {
                let t = k as f64 * h;
                b.push(scalar_sample(t, cube(t), cube(t), 1.0)).unwrap();
            }
            let t_now = 149.0 * h;
            let w = b.window_integrals(t_now).unwrap();
            let a = t_now - span;
            assert!((w.x_lag[0] - cube(a)).abs() < 1e-12, "span {span}");
            if span == 0.4 {
                assert!((w.script_y[(0, 0)] - (prim(t_now) - prim(a))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_not_covered_is_not_ready() {
        let mut b = IntegrationBuffer::new(0.5, 0.1).unwrap();
        // first sample arrives late: t = 0.3 with window 0.5 requested at t = 0.6
        for k in 3..=6 {
            b.push(scalar_sample(k as f64 * 0.1, 0.0, 0.0, 0.0)).unwrap();
        }
        assert!(matches!(b.window_integrals(0.6), Err(IclError::NotReady(_))));
    }

    fn entry(r: &[f64], rows: usize, cols: usize, z: &[f64]) -> StackEntry {
        StackEntry::new(
            1.0,
            DMatrix::from_row_slice(rows, cols, r),
            DVector::from_column_slice(z),
            DVector::zeros(rows),
        )
        .unwrap()
    }

    #[test]
    fn excitation_metric_examples() {
        let mut s = HistoryStack::new(4, 3).unwrap();
        assert_eq!(excitation_metric(&s), 0.0);
        let eye = DMatrix::<f64>::identity(3, 3);
        let e = StackEntry::new(1.0, eye.clone(), DVector::zeros(3), DVector::zeros(3)).unwrap();
        s.try_record(e.clone()).unwrap();
        assert!((excitation_metric(&s) - 1.0).abs() < 1e-14);
        s.try_record(e).unwrap();
        assert!((excitation_metric(&s) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn full_stack_rejects_duplicate() {
        let mut s = HistoryStack::new(2, 2).unwrap();
        let a = entry(&[1.0, 0.0], 1, 2, &[1.0]);
        let b = entry(&[0.0, 1.0], 1, 2, &[1.0]);
        assert!(s.try_record(a.clone()).unwrap());
        assert!(s.try_record(b).unwrap());
        let before = s.lambda_min();
        assert!(!s.try_record(a).unwrap());
        assert_eq!(s.lambda_min(), before);
    }

    #[test]
    fn rank_completing_candidate_is_accepted() {
        // n = 1, m = 2: two copies of [1, 0] leave the gram rank one.
        let mut s = HistoryStack::new(2, 2).unwrap();
        let a = entry(&[1.0, 0.0], 1, 2, &[0.0]);
        s.try_record(a.clone()).unwrap();
        s.try_record(a).unwrap();
        assert_eq!(s.lambda_min(), 0.0);
        // gram becomes diag(1, 1) after swapping one copy for [0, 1]
        let c = entry(&[0.0, 1.0], 1, 2, &[0.0]);
        assert!(s.try_record(c).unwrap());
        assert!((s.lambda_min() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut s = HistoryStack::new(2, 2).unwrap();
        assert!(s.try_record(entry(&[1.0, 0.0, 0.0], 1, 3, &[0.0])).is_err());
        s.try_record(entry(&[1.0, 0.0], 1, 2, &[0.0])).unwrap();
        assert!(s.try_record(entry(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[0.0, 0.0])).is_err());
    }

    fn brute_force_gram(s: &HistoryStack) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(s.m, s.m);
        for e in s.entries() {
            for i in 0..s.m {
                for j in 0..s.m {
                    g[(i, j)] += (0..e.regressor().nrows())
                        .map(|r| e.regressor()[(r, i)] * e.regressor()[(r, j)])
                        .sum::<f64>();
                }
            }
        }
        g
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gram_cache_and_monotone_lambda(
            m in 1usize..=4,
            n in 1usize..=2,
            cap in 1usize..=20,
            data in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 10), 1..60),
        ) {
            let mut s = HistoryStack::new(cap, m).unwrap();
            let mut last = 0.0;
            for row in data {
                let r = DMatrix::from_row_slice(n, m, &row[..n * m]);
                let z = DVector::from_column_slice(&row[n * m..n * m + n]);
                s.try_record(StackEntry::new(1.0, r, z, DVector::zeros(n)).unwrap()).unwrap();
                let g = brute_force_gram(&s);
                let scale = g.norm().max(1.0);
                prop_assert!((&g - s.gram()).norm() <= 1e-10 * scale);
                prop_assert!((s.gram() - s.gram().transpose()).norm() <= 1e-12 * scale);
                prop_assert!(s.gram().clone().symmetric_eigenvalues().min() >= -1e-10 * scale);
                prop_assert!(s.lambda_min() >= last);
                last = s.lambda_min();
                prop_assert!(s.len() <= cap);
            }
        }
    }
}
