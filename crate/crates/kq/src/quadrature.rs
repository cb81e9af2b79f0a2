//! Adaptive Simpson quadrature with an absolute tolerance and a subdivision
//! budget. Used for the integrating-factor solution of the rate equation,
//! whose kernel concentrates its mass in a boundary layer of width
//! `1/(2 gamma)` at the upper limit.

use crate::error::{Error, Result};

pub const DEFAULT_MAX_SUBDIVISIONS: usize = 1 << 20;

struct Workspace<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    budget: usize,
    used: usize,
}

#[inline]
fn simpson_rule(a: f64, fa: f64, fm: f64, b: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

impl<F: Fn(f64) -> f64> Workspace<'_, F> {
    // Classic adaptive Simpson with the |S2 - S1|/15 error estimate.
    fn refine(
        &mut self,
        a: f64,
        fa: f64,
        m: f64,
        fm: f64,
        b: f64,
        fb: f64,
        whole: f64,
        tol: f64,
    ) -> Result<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        let left = simpson_rule(a, fa, flm, m, fm);
        let right = simpson_rule(m, fm, frm, b, fb);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol || (b - a) < 1e-14 * (m.abs() + 1.0) {
            return Ok(left + right + err / 15.0);
        }
        if self.used >= self.budget {
            return Err(Error::QuadratureNonConvergence {
                k: f64::NAN,
                budget: self.budget,
            });
        }
        self.used += 2;
        let l = self.refine(a, fa, lm, flm, m, fm, left, 0.5 * tol)?;
        let r = self.refine(m, fm, rm, frm, b, fb, right, 0.5 * tol)?;
        Ok(l + r)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    budget: usize,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut ws = Workspace { f, budget, used: 0 };
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson_rule(a, fa, fm, b, fb);
    ws.refine(a, fa, m, fm, b, fb, whole, tol)
}

/// Integrate over `[a, b]` split at the given interior breakpoints, spreading
/// the tolerance across segments. Breakpoints outside `(a, b)` are ignored.
pub fn adaptive_simpson_segmented<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
    budget: usize,
) -> Result<f64> {
    let mut edges = vec![a];
    for &x in breakpoints {
        if x > a && x < b {
            edges.push(x);
        }
    }
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let seg_tol = tol / edges.len() as f64;
    let mut total = crate::sum::CompensatedSum::new();
    for w in edges.windows(2) {
        total.add(adaptive_simpson(f, w[0], w[1], seg_tol, budget)?);
    }
    Ok(total.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let f = |x: f64| 3.0 * x * x;
        let v = adaptive_simpson(&f, 0.0, 2.0, 1e-14, 1 << 16).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn boundary_layer_kernel() {
        // 2g e^{-2g(b-t)} over [0, b] integrates to 1 - e^{-2gb}.
        let g = 50.0;
        let b = 100.0;
        let f = |t: f64| 2.0 * g * (-2.0 * g * (b - t)).exp();
        let breaks: Vec<f64> = (0..20)
            .map(|j| b - (1u64 << j) as f64 / (2.0 * g))
            .collect();
        let v = adaptive_simpson_segmented(&f, 0.0, b, &breaks, 1e-12, 1 << 20).unwrap();
        let exact = 1.0 - (-2.0 * g * b).exp();
        assert!((v - exact).abs() < 1e-10, "v={v} exact={exact}");
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        // A needle the budget cannot resolve at this tolerance.
        let f = |x: f64| (-(x * 1e8).powi(2)).exp();
        let r = adaptive_simpson(&f, -1.0, 1.0, 1e-16, 8);
        assert!(r.is_err());
    }

    #[test]
    fn empty_interval() {
        assert_eq!(adaptive_simpson(&|x: f64| x, 1.0, 1.0, 1e-12, 8).unwrap(), 0.0);
    }
}
