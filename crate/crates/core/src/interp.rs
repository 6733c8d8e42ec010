//! Cubic Hermite pieces built from sampled values and derivatives.

/// Cubic on `[t0, t1]` matching values and slopes at both ends.
#[derive(Debug, Clone, Copy)]
pub struct HermiteCubic {
    pub t0: f64,
    pub t1: f64,
    // power-basis coefficients in s = (t - t0) / h
    c: [f64; 4],
}

impl HermiteCubic {
    pub fn new(t0: f64, t1: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> Self {
        let h = t1 - t0;
        let m0 = d0 * h;
        let m1 = d1 * h;
        let c0 = y0;
        let c1 = m0;
        let c2 = -3.0 * y0 - 2.0 * m0 + 3.0 * y1 - m1;
        let c3 = 2.0 * y0 + m0 - 2.0 * y1 + m1;
        HermiteCubic { t0, t1, c: [c0, c1, c2, c3] }
    }

    #[inline]
    fn s(&self, t: f64) -> f64 {
        (t - self.t0) / (self.t1 - self.t0)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let s = self.s(t);
        ((self.c[3] * s + self.c[2]) * s + self.c[1]) * s + self.c[0]
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let s = self.s(t);
        ((3.0 * self.c[3] * s + 2.0 * self.c[2]) * s + self.c[1]) / (self.t1 - self.t0)
    }

    /// Interior critical points, sorted, as times.
    pub fn critical_points(&self) -> Vec<f64> {
        let (a, b, c) = (3.0 * self.c[3], 2.0 * self.c[2], self.c[1]);
        let mut roots = Vec::new();
        let scale = a.abs().max(b.abs()).max(c.abs());
        if scale == 0.0 {
            return roots;
        }
        if a.abs() <= 1e-14 * scale {
            if b != 0.0 {
                roots.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // numerically stable pair
                let q = -0.5 * (b + b.signum() * sq);
                if q != 0.0 {
                    roots.push(q / a);
                    roots.push(c / q);
                } else {
                    roots.push(0.0);
                }
            }
        }
        let mut out: Vec<f64> = roots
            .into_iter()
            .filter(|s| *s > 0.0 && *s < 1.0)
            .map(|s| self.t0 + s * (self.t1 - self.t0))
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Split `[t0, t1]` into pieces on which the cubic is monotone.
    pub fn monotone_breaks(&self) -> Vec<f64> {
        let mut pts = vec![self.t0];
        pts.extend(self.critical_points());
        pts.push(self.t1);
        pts
    }
}

/// Bisection for a sign change of `f` on `[a, b]` with `f(a) f(b) < 0`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if b - a <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
