//! Projected BFGS on a box with one optional capped-sum group.
//!
//! Each iteration fixes the variables sitting on a bound whose gradient
//! points outward, takes a quasi-Newton step in the remaining ones and runs
//! an Armijo backtracking search along the projection arc
//! `t -> P(x + t d)`. Stationarity is measured by the projected gradient
//! `|x - P(x - g)|_inf`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Components whose sum is capped, with the cap.
    pub sum_cap: Option<(Range<usize>, f64)>,
}

impl Bounds {
    pub fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*lo, *hi);
        }
        let Some((range, cap)) = &self.sum_cap else {
            return;
        };
        let group = &mut x[range.clone()];
        if group.iter().sum::<f64>() <= *cap {
            return;
        }
        // Euclidean projection onto {lo <= v <= hi, sum v <= cap}: shift by
        // the multiplier lambda > 0 solving sum clamp(v - lambda) = cap.
        let lo = &self.lo[range.clone()];
        let hi = &self.hi[range.clone()];
        let orig: Vec<f64> = group.to_vec();
        let shifted = |lam: f64| -> f64 {
            orig.iter()
                .zip(lo)
                .zip(hi)
                .map(|((v, l), h)| (v - lam).clamp(*l, *h))
                .sum()
        };
        let (mut a, mut b) = (
            0.0,
            orig.iter().zip(lo).map(|(v, l)| v - l).fold(0.0, f64::max),
        );
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if shifted(mid) > *cap {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-17 {
                break;
            }
        }
        for ((v, l), (h, o)) in group.iter_mut().zip(lo).zip(hi.iter().zip(&orig)) {
            *v = (o - b).clamp(*l, *h);
        }
    }

    fn at_lower(&self, x: &[f64], i: usize) -> bool {
        x[i] <= self.lo[i] + 1e-12 * (1.0 + self.lo[i].abs())
    }

    fn at_upper(&self, x: &[f64], i: usize) -> bool {
        x[i] >= self.hi[i] - 1e-12 * (1.0 + self.hi[i].abs())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Options {
    pub tol_grad: f64,
    pub tol_step: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    pub pg_norm: f64,
}

fn pg_norm(bounds: &Bounds, x: &[f64], g: &[f64]) -> f64 {
    let mut z: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    bounds.project(&mut z);
    x.iter()
        .zip(&z)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over `bounds`. `f` returns the value and writes the
/// gradient; a non-finite value marks an infeasible trial point.
pub(crate) fn minimize<F>(mut f: F, x0: &[f64], bounds: &Bounds, opts: Options) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = vec![0.0; d];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return Outcome {
            x,
            f: fx,
            iterations: 0,
            converged: false,
            pg_norm: f64::INFINITY,
        };
    }

    let mut hess = DMatrix::<f64>::identity(d, d);
    let mut scaled = false;
    let mut xt = vec![0.0; d];
    let mut gt = vec![0.0; d];
    let mut iterations = 0;
    let mut pg = pg_norm(bounds, &x, &g);

    while iterations < opts.max_iter && pg > opts.tol_grad {
        iterations += 1;
        let free: Vec<usize> = (0..d)
            .filter(|&i| {
                !(bounds.at_lower(&x, i) && g[i] > 0.0) && !(bounds.at_upper(&x, i) && g[i] < 0.0)
            })
            .collect();

        let mut step_ok = false;
        for attempt in 0..2 {
            let dir = if attempt == 0 {
                newton_direction(&hess, &g, &free)
            } else {
                None
            };
            let dir = dir.unwrap_or_else(|| {
                let mut v = vec![0.0; d];
                for &i in &free {
                    v[i] = -g[i];
                }
                v
            });
            if attempt == 1 {
                hess = DMatrix::identity(d, d);
                scaled = false;
            }

            let mut t = 1.0;
            for _ in 0..60 {
                for i in 0..d {
                    xt[i] = x[i] + t * dir[i];
                }
                bounds.project(&mut xt);
                let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                if s.iter().all(|v| *v == 0.0) {
                    break;
                }
                let ft = f(&xt, &mut gt);
                if ft.is_finite() && ft <= fx + 1e-4 * dot(&g, &s) {
                    let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                    bfgs_update(&mut hess, &s, &yv, &mut scaled);
                    let small_step = s.iter().map(|v| v.abs()).fold(0.0, f64::max)
                        <= opts.tol_step * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max));
                    let flat = (fx - ft).abs() <= 1e-15 * (1.0 + fx.abs());
                    x.copy_from_slice(&xt);
                    g.copy_from_slice(&gt);
                    fx = ft;
                    step_ok = !(small_step && flat);
                    break;
                }
                t *= 0.5;
            }
            if step_ok {
                break;
            }
        }
        pg = pg_norm(bounds, &x, &g);
        if !step_ok {
            break;
        }
    }

    Outcome {
        converged: pg <= opts.tol_grad,
        x,
        f: fx,
        iterations,
        pg_norm: pg,
    }
}

fn newton_direction(hess: &DMatrix<f64>, g: &[f64], free: &[usize]) -> Option<Vec<f64>> {
    if free.is_empty() {
        return None;
    }
    let k = free.len();
    let sub = DMatrix::from_fn(k, k, |r, c| hess[(free[r], free[c])]);
    let rhs = DVector::from_iterator(k, free.iter().map(|&i| -g[i]));
    let sol = sub.cholesky()?.solve(&rhs);
    let mut dir = vec![0.0; g.len()];
    for (pos, &i) in free.iter().enumerate() {
        dir[i] = sol[pos];
    }
    (dot(&dir, g) < 0.0).then_some(dir)
}

fn bfgs_update(hess: &mut DMatrix<f64>, s: &[f64], y: &[f64], scaled: &mut bool) {
    let sy = dot(s, y);
    let (ns, ny) = (dot(s, s).sqrt(), dot(y, y).sqrt());
    if sy <= 1e-12 * ns * ny || sy <= 0.0 {
        return;
    }
    let d = s.len();
    if !*scaled {
        *hess = DMatrix::identity(d, d) * (dot(y, y) / sy);
        *scaled = true;
    }
    let sv = DVector::from_column_slice(s);
    let yv = DVector::from_column_slice(y);
    let bs = &*hess * &sv;
    let sbs = sv.dot(&bs);
    if sbs <= 0.0 {
        return;
    }
    *hess += &yv * yv.transpose() / sy - &bs * bs.transpose() / sbs;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Options {
        Options {
            tol_grad: 1e-10,
            tol_step: 1e-14,
            max_iter: 500,
        }
    }

    #[test]
    fn unconstrained_quadratic() {
        let b = Bounds {
            lo: vec![-10.0; 2],
            hi: vec![10.0; 2],
            sum_cap: None,
        };
        let out = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 1.0) + x[1];
                g[1] = 4.0 * (x[1] + 2.0) + x[0];
                (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 2.0).powi(2) + x[0] * x[1]
            },
            &[0.0, 0.0],
            &b,
            opts(),
        );
        assert!(out.converged);
        // stationary point of the quadratic
        let (x, y) = (out.x[0], out.x[1]);
        assert!((2.0 * (x - 1.0) + y).abs() < 1e-9 && (4.0 * (y + 2.0) + x).abs() < 1e-9);
    }

    #[test]
    fn minimum_on_the_bound() {
        let b = Bounds {
            lo: vec![0.0, 0.0],
            hi: vec![5.0, 5.0],
            sum_cap: None,
        };
        let out = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] + 1.0);
                g[1] = 2.0 * (x[1] - 2.0);
                (x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2)
            },
            &[3.0, 3.0],
            &b,
            opts(),
        );
        assert!(out.converged);
        assert_eq!(out.x[0], 0.0);
        assert!((out.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn capped_sum_projection() {
        let b = Bounds {
            lo: vec![0.0; 3],
            hi: vec![1.0; 3],
            sum_cap: Some((1..3, 0.9)),
        };
        let mut x = vec![2.0, 0.8, 0.6];
        b.project(&mut x);
        assert_eq!(x[0], 1.0);
        assert!((x[1] + x[2] - 0.9).abs() < 1e-12);
        assert!((x[1] - 0.55).abs() < 1e-12 && (x[2] - 0.35).abs() < 1e-12);

        let mut y = vec![0.5, 0.95, 0.0];
        b.project(&mut y);
        assert!((y[1] - 0.9).abs() < 1e-12 && y[2] == 0.0);
    }

    #[test]
    fn minimum_on_the_sum_face() {
        let b = Bounds {
            lo: vec![0.0; 2],
            hi: vec![1.0; 2],
            sum_cap: Some((0..2, 1.0)),
        };
        let out = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 0.8);
                g[1] = 2.0 * (x[1] - 0.6);
                (x[0] - 0.8).powi(2) + (x[1] - 0.6).powi(2)
            },
            &[0.0, 0.0],
            &b,
            opts(),
        );
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 0.6).abs() < 1e-8 && (out.x[1] - 0.4).abs() < 1e-8);
    }
}
