//! Natural cubic spline through strictly increasing knots.

/// Natural cubic spline (zero second derivative at both end knots).
/// Evaluation outside the knot range clamps to the edge knot value.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl NaturalSpline {
    /// `xs` must be strictly increasing and the same length as `ys` (≥ 1).
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len(), "knot arrays differ in length");
        assert!(!xs.is_empty(), "spline needs at least one knot");
        debug_assert!(xs.windows(2).all(|w| w[1] > w[0]), "knots must increase");
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 1..k {
                // sub-diagonal entry of row i equals h of its left interval
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Self { xs, ys, m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // index of the interval containing x
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// Second derivative at knot `i`.
    pub fn knot_second_derivative(&self, i: usize) -> f64 {
        self.m[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_reproduced() {
        let s = NaturalSpline::new(vec![0.0, 1.5, 4.0, 9.0], vec![3.25; 4]);
        for i in 0..=90 {
            assert!((s.eval(i as f64 * 0.1) - 3.25).abs() < 1e-14);
        }
    }

    #[test]
    fn two_knots_are_linear() {
        let s = NaturalSpline::new(vec![2.0, 6.0], vec![0.0, 1.0]);
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(s.eval(8.0), 1.0);
        assert!((s.eval(3.0) - 0.25).abs() < 1e-15);
        assert!((s.eval(5.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn passes_through_knots_with_natural_ends() {
        let xs: Vec<f64> = vec![0.0, 0.7, 2.0, 2.5, 4.0, 7.5];
        let ys: Vec<f64> = vec![1.0, -2.0, 0.5, 3.0, 3.0, -1.0];
        let s = NaturalSpline::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x) - y).abs() < 1e-12);
        }
        assert_eq!(s.knot_second_derivative(0), 0.0);
        assert_eq!(s.knot_second_derivative(5), 0.0);
    }

    #[test]
    fn linear_data_is_exact() {
        let xs: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = NaturalSpline::new(xs, ys);
        for i in 0..=81 {
            let x = i as f64;
            assert!((s.eval(x) - (2.0 * x - 1.0)).abs() < 1e-10);
        }
    }
}
