//! Piecewise Hermite interpolation on strictly increasing knots.

/// Index `i` of the interval `[xs[i], xs[i+1]]` containing `x`, clamped to the table.
fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    debug_assert!(n >= 2);
    let i = xs.partition_point(|&k| k <= x);
    i.saturating_sub(1).min(n - 2)
}

/// C² piecewise quintic built from values, first and second derivatives.
#[derive(Debug, Clone)]
pub struct QuinticHermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl QuinticHermite {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n && d1.len() == n && d2.len() == n);
        debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));
        Self { xs, ys, d1, d2 }
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn first(&self) -> f64 {
        self.xs[0]
    }

    pub fn last(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Value and the first three derivatives at `x`.
    pub fn eval_all(&self, x: f64) -> [f64; 4] {
        let i = locate(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let c0 = self.ys[i];
        let c1 = h * self.d1[i];
        let c2 = 0.5 * h * h * self.d2[i];
        let r0 = self.ys[i + 1] - (c0 + c1 + c2);
        let r1 = h * self.d1[i + 1] - (c1 + 2.0 * c2);
        let r2 = h * h * self.d2[i + 1] - 2.0 * c2;
        let c3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
        let c4 = -15.0 * r0 + 7.0 * r1 - r2;
        let c5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;

        let v = c0 + s * (c1 + s * (c2 + s * (c3 + s * (c4 + s * c5))));
        let dv = c1 + s * (2.0 * c2 + s * (3.0 * c3 + s * (4.0 * c4 + s * 5.0 * c5)));
        let ddv = 2.0 * c2 + s * (6.0 * c3 + s * (12.0 * c4 + s * 20.0 * c5));
        let dddv = 6.0 * c3 + s * (24.0 * c4 + s * 60.0 * c5);
        [v, dv / h, ddv / (h * h), dddv / (h * h * h)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_reproduces_quintics_and_derivatives() {
        let f = |x: f64| x.powi(5) - 3.0 * x.powi(3) + x;
        let d1 = |x: f64| 5.0 * x.powi(4) - 9.0 * x * x + 1.0;
        let d2 = |x: f64| 20.0 * x.powi(3) - 18.0 * x;
        let d3 = |x: f64| 60.0 * x * x - 18.0;
        let xs: Vec<f64> = vec![-1.0, -0.2, 0.5, 1.3];
        let q = QuinticHermite::new(
            xs.clone(),
            xs.iter().map(|&x| f(x)).collect(),
            xs.iter().map(|&x| d1(x)).collect(),
            xs.iter().map(|&x| d2(x)).collect(),
        );
        for x in [-1.0, -0.5, 0.0, 0.4, 1.0, 1.3] {
            let [v, a, b, c] = q.eval_all(x);
            assert!((v - f(x)).abs() < 1e-12);
            assert!((a - d1(x)).abs() < 1e-11);
            assert!((b - d2(x)).abs() < 1e-10);
            assert!((c - d3(x)).abs() < 1e-8);
        }
    }
}
