//! Interpolants used by tabulated fields.

use crate::error::{Error, Result};

/// Monotonicity-preserving C¹ cubic Hermite interpolant (Steffen's slopes).
///
/// Slopes come from the parabola through three neighbouring nodes and are
/// limited so that monotone data produce a monotone interpolant. Away from
/// extrema the slopes are second-order accurate.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_nodes(&xs, &ys)?;
        let slopes = steffen_slopes(&xs, &ys);
        Ok(Self { xs, ys, slopes })
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    /// Node slopes of the fitted interpolant.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Value and first derivative. Outside the node range the interpolant is
    /// continued linearly with the end slope.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        if n == 1 {
            return (self.ys[0], 0.0);
        }
        if x <= self.xs[0] {
            return (self.ys[0] + self.slopes[0] * (x - self.xs[0]), self.slopes[0]);
        }
        if x >= self.xs[n - 1] {
            return (
                self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]),
                self.slopes[n - 1],
            );
        }
        let k = interval(&self.xs, x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        hermite(
            t,
            h,
            self.ys[k],
            self.ys[k + 1],
            self.slopes[k],
            self.slopes[k + 1],
        )
    }
}

/// Continuous piecewise-linear interpolant; derivative is the right-hand slope
/// at interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_nodes(&xs, &ys)?;
        Ok(Self { xs, ys })
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        if n == 1 {
            return (self.ys[0], 0.0);
        }
        let k = if x <= self.xs[0] {
            0
        } else if x >= self.xs[n - 1] {
            n - 2
        } else {
            interval(&self.xs, x)
        };
        let slope = (self.ys[k + 1] - self.ys[k]) / (self.xs[k + 1] - self.xs[k]);
        (self.ys[k] + slope * (x - self.xs[k]), slope)
    }
}

fn check_nodes(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Shape(format!(
            "table needs matching non-empty abscissae and values (got {} and {})",
            xs.len(),
            ys.len()
        )));
    }
    if let Some(w) = xs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Model(format!(
            "table abscissae must be strictly increasing (nodes {} and {})",
            w,
            w + 1
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Model("table contains non-finite entries".into()));
    }
    Ok(())
}

/// Index k with xs[k] <= x < xs[k+1]; caller guarantees x is inside.
fn interval(xs: &[f64], x: f64) -> usize {
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(k) => k.min(xs.len() - 2),
        Err(k) => k - 1,
    }
}

fn hermite(t: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = 6.0 * t2 - 6.0 * t;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = -6.0 * t2 + 6.0 * t;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let deriv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
    (value, deriv)
}

fn steffen_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 1 {
        return vec![0.0];
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let s: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if n == 2 {
        return vec![s[0], s[0]];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let p = (s[i - 1] * h[i] + s[i] * h[i - 1]) / (h[i - 1] + h[i]);
        d[i] = if s[i - 1] * s[i] <= 0.0 {
            0.0
        } else {
            (s[i - 1].signum() + s[i].signum())
                * s[i - 1].abs().min(s[i].abs()).min(0.5 * p.abs())
        };
    }
    // End slopes from the one-sided parabola, limited as in Steffen (1990).
    let p0 = s[0] * (1.0 + h[0] / (h[0] + h[1])) - s[1] * h[0] / (h[0] + h[1]);
    d[0] = end_slope(p0, s[0]);
    let m = n - 2;
    let pn = s[m] * (1.0 + h[m] / (h[m] + h[m - 1])) - s[m - 1] * h[m] / (h[m] + h[m - 1]);
    d[n - 1] = end_slope(pn, s[m]);
    d
}

fn end_slope(p: f64, s: f64) -> f64 {
    if p * s <= 0.0 {
        0.0
    } else if p.abs() > 2.0 * s.abs() {
        2.0 * s
    } else {
        p
    }
}

/// Keys cubic-convolution weights (a = -1/2) and their derivatives for the
/// four nodes around fractional offset `t` in [0, 1).
pub(crate) fn keys_weights(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    let w = [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ];
    let dw = [
        -1.5 * t2 + 2.0 * t - 0.5,
        4.5 * t2 - 5.0 * t,
        -4.5 * t2 + 4.0 * t + 0.5,
        1.5 * t2 - t,
    ];
    (w, dw)
}
