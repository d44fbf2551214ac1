//! Sharpe ratio, a bounded Powell minimizer and the lookback search built on them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean over sample standard deviation, monthly and unannualized.
pub fn sharpe_ratio(excess_returns: &[f64]) -> Result<f64> {
    let n = excess_returns.len();
    if n < 2 {
        return Err(Error::UndefinedSharpe(format!("{n} observations, need at least 2")));
    }
    let mean = excess_returns.iter().sum::<f64>() / n as f64;
    let var = excess_returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::UndefinedSharpe("zero or non-finite standard deviation".into()));
    }
    Ok(mean / sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowellOptions {
    /// Relative decrease per sweep below which the search stops.
    pub ftol: f64,
    /// Line-search interval width at which golden-section refinement stops.
    pub xtol: f64,
    pub maxiter: usize,
}

impl Default for PowellOptions {
    fn default() -> Self {
        PowellOptions { ftol: 1e-8, xtol: 1e-6, maxiter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowellResult {
    pub x: Vec<f64>,
    pub fun: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105_1;

struct Problem<'a, F> {
    f: F,
    bounds: &'a [(f64, f64)],
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Problem<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.bounds) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Range of step sizes `t` keeping `x + t d` inside the box.
    fn step_range(&self, x: &[f64], d: &[f64]) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for ((xi, di), (bl, bh)) in x.iter().zip(d).zip(self.bounds) {
            if *di == 0.0 {
                continue;
            }
            let (a, b) = ((bl - xi) / di, (bh - xi) / di);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (lo.min(0.0), hi.max(0.0))
    }

    fn point(x: &[f64], d: &[f64], t: f64) -> Vec<f64> {
        x.iter().zip(d).map(|(a, b)| a + t * b).collect()
    }

    /// Minimize along `d` from `x`; only moves when the value strictly improves.
    fn line_min(&mut self, x: &mut Vec<f64>, fx: &mut f64, d: &[f64], xtol: f64) {
        let dnorm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dnorm == 0.0 {
            return;
        }
        let (tmin, tmax) = self.step_range(x, d);
        if tmax - tmin <= 0.0 {
            return;
        }
        let g = |t: f64, p: &mut Self| {
            let mut pt = Self::point(x, d, t);
            p.clamp(&mut pt);
            p.eval(&pt)
        };

        // bracket a minimum inside [tmin, tmax]
        let (mut a, mut b) = (0.0, 1.0f64.clamp(tmin, tmax));
        if b == 0.0 {
            b = tmin.max(-1.0);
        }
        let (mut fa, mut fb) = (*fx, g(b, self));
        if fb > fa {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        let mut c = (b + GOLD * (b - a)).clamp(tmin, tmax);
        let mut fc = g(c, self);
        let mut guard = 0;
        while fb > fc && c != b && guard < 200 {
            a = b;
            b = c;
            fb = fc;
            c = (b + GOLD * (b - a)).clamp(tmin, tmax);
            fc = g(c, self);
            guard += 1;
        }
        let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };

        // golden-section refinement
        let tol = xtol / dnorm;
        let mut x1 = lo + CGOLD * (hi - lo);
        let mut x2 = hi - CGOLD * (hi - lo);
        let mut f1 = g(x1, self);
        let mut f2 = g(x2, self);
        while hi - lo > tol {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = lo + CGOLD * (hi - lo);
                f1 = g(x1, self);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = hi - CGOLD * (hi - lo);
                f2 = g(x2, self);
            }
        }
        let mut best = (*fx, 0.0);
        for (t, v) in [(b, fb), (c, fc), (x1, f1), (x2, f2)] {
            if v < best.0 {
                best = (v, t);
            }
        }
        if best.1 != 0.0 {
            let mut p = Self::point(x, d, best.1);
            self.clamp(&mut p);
            *x = p;
            *fx = best.0;
        }
    }
}

/// Powell's conjugate-direction method with golden-section line searches.
///
/// Bounds are enforced by restricting each line search to the box. The
/// direction of largest decrease is replaced by the net sweep direction
/// when the extrapolation test favours it.
pub fn powell_minimize<F>(f: F, start: &[f64], bounds: &[(f64, f64)], opts: &PowellOptions) -> Result<PowellResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    if n == 0 || bounds.len() != n {
        return Err(Error::InvalidInput("start and bounds must have the same non-zero length".into()));
    }
    if bounds.iter().any(|(lo, hi)| lo > hi || lo.is_nan() || hi.is_nan()) {
        return Err(Error::InvalidInput("each bound needs lo <= hi".into()));
    }
    let mut prob = Problem { f, bounds, evals: 0 };
    let mut p = start.to_vec();
    prob.clamp(&mut p);
    let mut fret = prob.eval(&p);
    if !fret.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut dirs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut pt = p.clone();
    for iter in 1..=opts.maxiter {
        let fp = fret;
        let (mut ibig, mut del) = (0, 0.0);
        for (i, dir) in dirs.iter().enumerate() {
            let before = fret;
            prob.line_min(&mut p, &mut fret, dir, opts.xtol);
            if before - fret > del {
                del = before - fret;
                ibig = i;
            }
        }
        if 2.0 * (fp - fret) <= opts.ftol * (fp.abs() + fret.abs()) + 1e-25 {
            return Ok(PowellResult { x: p, fun: fret, iterations: iter, evaluations: prob.evals, converged: true });
        }
        let mut ptt: Vec<f64> = p.iter().zip(&pt).map(|(a, b)| 2.0 * a - b).collect();
        prob.clamp(&mut ptt);
        let xit: Vec<f64> = p.iter().zip(&pt).map(|(a, b)| a - b).collect();
        pt = p.clone();
        let fptt = prob.eval(&ptt);
        if fptt < fp {
            let t = 2.0 * (fp - 2.0 * fret + fptt) * (fp - fret - del).powi(2) - del * (fp - fptt).powi(2);
            if t < 0.0 {
                prob.line_min(&mut p, &mut fret, &xit, opts.xtol);
                dirs[ibig] = dirs[n - 1].clone();
                dirs[n - 1] = xit;
            }
        }
    }
    Ok(PowellResult { x: p, fun: fret, iterations: opts.maxiter, evaluations: prob.evals, converged: false })
}

/// Integer ranges at most this wide are verified by evaluating every lookback.
pub const EXHAUSTIVE_LIMIT: usize = 32;
/// Objective value used for lookbacks whose Sharpe ratio is undefined.
pub const UNDEFINED_PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub lookback: usize,
    /// `None` when the Sharpe ratio was undefined.
    pub sharpe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    #[serde(rename = "best_L")]
    pub best_lookback: usize,
    pub best_sharpe: f64,
    /// Every distinct lookback evaluated, sorted.
    pub evaluations: Vec<Evaluation>,
    pub converged: bool,
    pub powell_iterations: usize,
    pub exhaustive: bool,
    pub bounds: (usize, usize),
}

/// Maximize training Sharpe over integer lookbacks in `bounds`.
///
/// `objective` maps a lookback to its training-period Sharpe ratio. Powell
/// searches a continuous relaxation rounded inside the objective; ranges of
/// at most [`EXHAUSTIVE_LIMIT`] integers are then swept in full so the answer
/// is the exact integer argmax, ties going to the smaller lookback.
pub fn optimize_lookback<F>(objective: F, bounds: (usize, usize), opts: &PowellOptions) -> Result<OptimizationResult>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let (lo, hi) = bounds;
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!("lookback bounds must satisfy 1 <= min <= max, got [{lo}, {hi}]")));
    }
    let classify = |l: usize| -> Result<Option<f64>> {
        match objective(l) {
            Ok(s) if s.is_finite() => Ok(Some(s)),
            Ok(_) | Err(Error::UndefinedSharpe(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut cache: BTreeMap<usize, Option<f64>> = BTreeMap::new();
    let mut converged = true;
    let mut iterations = 0;
    let mut exhaustive = false;

    if lo == hi {
        cache.insert(lo, classify(lo)?);
    } else {
        let mut failure: Option<Error> = None;
        let round = |x: f64| (x.round().max(lo as f64).min(hi as f64)) as usize;
        let start = [0.5 * (lo + hi) as f64];
        let res = powell_minimize(
            |x: &[f64]| {
                let l = round(x[0]);
                let v = match cache.get(&l) {
                    Some(v) => *v,
                    None => match classify(l) {
                        Ok(v) => {
                            cache.insert(l, v);
                            v
                        }
                        Err(e) => {
                            failure.get_or_insert(e);
                            None
                        }
                    },
                };
                v.map_or(UNDEFINED_PENALTY, |s| -s)
            },
            &start,
            &[(lo as f64, hi as f64)],
            opts,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        converged = res.converged;
        iterations = res.iterations;
        if hi - lo < EXHAUSTIVE_LIMIT {
            exhaustive = true;
            let todo: Vec<usize> = (lo..=hi).filter(|l| !cache.contains_key(l)).collect();
            let done: Vec<(usize, Result<Option<f64>>)> = todo.par_iter().map(|&l| (l, classify(l))).collect();
            for (l, v) in done {
                cache.insert(l, v?);
            }
        }
    }

    let mut best: Option<(usize, f64)> = None;
    for (&l, v) in &cache {
        if let Some(s) = v {
            if best.is_none_or(|(_, b)| *s > b) {
                best = Some((l, *s));
            }
        }
    }
    let Some((best_lookback, best_sharpe)) = best else {
        return Err(Error::UndefinedSharpe(format!("every lookback in [{lo}, {hi}] has an undefined Sharpe ratio")));
    };
    Ok(OptimizationResult {
        best_lookback,
        best_sharpe,
        evaluations: cache.into_iter().map(|(lookback, sharpe)| Evaluation { lookback, sharpe }).collect(),
        converged,
        powell_iterations: iterations,
        exhaustive,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sharpe_examples() {
        assert!((sharpe_ratio(&[0.02, 0.0, 0.04]).unwrap() - 1.0).abs() < 1e-12);
        assert!(sharpe_ratio(&[0.01; 5]).is_err());
        assert!(sharpe_ratio(&[0.01]).is_err());
    }

    #[test]
    fn one_dimensional_quadratic() {
        let r = powell_minimize(|x| (x[0] - 6.0).powi(2), &[12.5], &[(1.0, 24.0)], &PowellOptions::default()).unwrap();
        assert!((r.x[0] - 6.0).abs() < 1e-6, "{:?}", r);
        assert!(r.converged);
    }

    #[test]
    fn separable_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let r = powell_minimize(f, &[0.0, 0.0], &[(-10.0, 10.0); 2], &PowellOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 2.0).abs() < 1e-5, "{:?}", r);
        assert!(r.iterations <= 50);
    }

    #[test]
    fn unbounded_quadratic() {
        let inf = f64::INFINITY;
        let f = |x: &[f64]| (x[0] - 40.0).powi(2) + (x[0] - x[1]).powi(2);
        let r = powell_minimize(f, &[0.0, 0.0], &[(-inf, inf); 2], &PowellOptions::default()).unwrap();
        assert!((r.x[0] - 40.0).abs() < 1e-5 && (r.x[1] - 40.0).abs() < 1e-5, "{:?}", r);
    }

    #[test]
    fn minimum_on_the_boundary() {
        let r = powell_minimize(|x| (x[0] + 5.0).powi(2), &[3.0], &[(1.0, 24.0)], &PowellOptions::default()).unwrap();
        assert_eq!(r.x[0], 1.0);
    }

    #[test]
    fn constant_objective_stays_put() {
        let r = powell_minimize(|_| 3.0, &[2.0, 5.0], &[(0.0, 10.0); 2], &PowellOptions::default()).unwrap();
        assert_eq!(r.x, vec![2.0, 5.0]);
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let r = powell_minimize(|_| f64::INFINITY, &[0.0], &[(0.0, 1.0)], &PowellOptions::default());
        assert!(matches!(r, Err(Error::NonFiniteObjective)));
    }

    #[test]
    fn lookback_singleton_and_sweep() {
        let r = optimize_lookback(|_| Ok(0.5), (3, 3), &PowellOptions::default()).unwrap();
        assert_eq!(r.best_lookback, 3);
        assert_eq!(r.evaluations.len(), 1);

        let r = optimize_lookback(|l| Ok(-((l as f64) - 6.0).powi(2)), (1, 24), &PowellOptions::default()).unwrap();
        assert_eq!(r.best_lookback, 6);
        assert!(r.exhaustive);
        assert_eq!(r.evaluations.len(), 24);
    }

    #[test]
    fn ties_go_to_shorter_lookback() {
        let r = optimize_lookback(|l| Ok(if l == 4 || l == 9 { 1.0 } else { 0.0 }), (1, 12), &PowellOptions::default())
            .unwrap();
        assert_eq!(r.best_lookback, 4);
    }

    #[test]
    fn undefined_everywhere_is_an_error() {
        let r = optimize_lookback(|_| Err(Error::UndefinedSharpe("flat".into())), (1, 5), &PowellOptions::default());
        assert!(matches!(r, Err(Error::UndefinedSharpe(_))));
    }

    #[test]
    fn undefined_lookbacks_are_skipped() {
        let r = optimize_lookback(
            |l| {
                if l < 3 {
                    Err(Error::UndefinedSharpe("short".into()))
                } else {
                    Ok(1.0 / l as f64)
                }
            },
            (1, 8),
            &PowellOptions::default(),
        )
        .unwrap();
        assert_eq!(r.best_lookback, 3);
        assert_eq!(r.evaluations.iter().filter(|e| e.sharpe.is_none()).count(), 2);
    }

    proptest! {
        #[test]
        fn sharpe_is_scale_free(rets in prop::collection::vec(-0.2f64..0.2, 3..60), c in 1e-3f64..1e3) {
            if let Ok(s) = sharpe_ratio(&rets) {
                let scaled: Vec<f64> = rets.iter().map(|r| r * c).collect();
                prop_assert!((sharpe_ratio(&scaled).unwrap() - s).abs() <= 1e-12 * s.abs().max(1.0));
            }
        }

        #[test]
        fn powell_solves_positive_definite_quadratics(
            a in prop::collection::vec(-1.0f64..1.0, 9),
            target in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            // H = A^T A + I is positive definite
            let h = |i: usize, j: usize| (0..3).map(|k| a[k * 3 + i] * a[k * 3 + j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            let f = |x: &[f64]| {
                let mut v = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        v += (x[i] - target[i]) * h(i, j) * (x[j] - target[j]);
                    }
                }
                v
            };
            let r = powell_minimize(f, &[0.0; 3], &[(-10.0, 10.0); 3], &PowellOptions::default()).unwrap();
            prop_assert!(r.iterations <= 50);
            for i in 0..3 {
                prop_assert!((r.x[i] - target[i]).abs() < 1e-5, "{:?} vs {:?}", r.x, target);
            }
        }
    }
}
