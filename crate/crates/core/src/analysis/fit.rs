use nalgebra::{DMatrix, DVector};

use crate::analysis::samples::DelaySampleSet;
use crate::delay::{DelayFunction, ExpTerm, InvolutionPair};
use crate::error::{Error, Result};
use crate::sim::Polarity;

/// Largest accepted condition number of the (column-scaled) design matrix.
pub const COND_LIMIT: f64 = 1e12;

const SEED_RATES: usize = 24;
const LM_ITERS: usize = 300;

/// A SumExp function fitted to one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFit {
    pub function: DelayFunction,
    pub rms: f64,
    /// Terms left after dropping non-positive amplitudes.
    pub terms: usize,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub pair: InvolutionPair,
    pub rising: EdgeFit,
    pub falling: EdgeFit,
    /// Reported, not enforced: fitted pairs are only approximate involutions.
    pub involution_residual: f64,
}

/// Fits `δ∞ − Σ aₖ e^{−rₖ T}` to both edges of `samples` and pairs the
/// results in fitted mode.
pub fn fit_sumexp(samples: &DelaySampleSet, terms: usize) -> Result<FitResult> {
    let up_pts = samples.edge(Polarity::Rising);
    let down_pts = samples.edge(Polarity::Falling);
    let rising = fit_edge(&up_pts, terms)?;
    let falling = fit_edge(&down_pts, terms)?;
    let pair = InvolutionPair::fitted(rising.function.clone(), falling.function.clone())
        .map_err(|e| Error::FitFailed(format!("fitted functions do not form a channel: {e}")))?;
    let grid: Vec<f64> = down_pts.iter().map(|p| p.0).collect();
    let involution_residual = pair.involution_residual(&grid);
    Ok(FitResult {
        pair,
        rising,
        falling,
        involution_residual,
    })
}

/// Linear part of the separable problem for fixed rates.
struct Linear {
    /// `[δ∞, b₁, …]` with `bₖ` the amplitude at `T = T₀`.
    coef: Vec<f64>,
    rates: Vec<f64>,
    residual: DVector<f64>,
    condition: f64,
}

struct Problem {
    x: Vec<f64>,
    y: DVector<f64>,
    t0: f64,
}

impl Problem {
    /// Least-squares amplitudes for `rates`; terms whose amplitude comes out
    /// non-positive are removed and the rest re-solved.
    fn solve(&self, rates: &[f64]) -> Option<Linear> {
        let mut active: Vec<f64> = rates.to_vec();
        loop {
            let m = self.x.len();
            let n = active.len() + 1;
            let mut a = DMatrix::<f64>::zeros(m, n);
            for (i, &x) in self.x.iter().enumerate() {
                a[(i, 0)] = 1.0;
                for (k, &r) in active.iter().enumerate() {
                    a[(i, k + 1)] = -(-r * x).exp();
                }
            }
            let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm().max(1e-300)).collect();
            for (j, s) in norms.iter().enumerate() {
                a.column_mut(j).scale_mut(1.0 / s);
            }
            let svd = a.clone().svd(true, true);
            let sv = &svd.singular_values;
            let smax = sv.max();
            let smin = sv.min();
            let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
            let z = svd.solve(&self.y, smax * 1e-15).ok()?;
            let coef: Vec<f64> = z.iter().zip(&norms).map(|(v, s)| v / s).collect();
            if let Some(k) = (1..n).find(|&k| !(coef[k] > 0.0)) {
                active.remove(k - 1);
                if active.is_empty() {
                    return None;
                }
                continue;
            }
            let residual = &self.y - &a * &z;
            return Some(Linear {
                coef,
                rates: active,
                residual,
                condition,
            });
        }
    }

    fn cost(&self, rates: &[f64]) -> f64 {
        match self.solve(rates) {
            Some(l) if l.rates.len() == rates.len() => l.residual.norm_squared(),
            _ => f64::INFINITY,
        }
    }
}

/// Fits one edge. `points` are `(T, δ)` pairs.
pub fn fit_edge(points: &[(f64, f64)], terms: usize) -> Result<EdgeFit> {
    if terms == 0 {
        return Err(Error::invalid("at least one term is required"));
    }
    if points.len() < 4 * terms {
        return Err(Error::invalid(format!(
            "{} samples are too few for {terms} terms (need {})",
            points.len(),
            4 * terms
        )));
    }
    let mut ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let t0 = ts[0];
    let span = ts[ts.len() - 1] - t0;
    let finest = ts.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(span > 0.0 && span / finest >= 100.0) {
        return Err(Error::invalid("samples must span at least two decades of T"));
    }
    let problem = Problem {
        x: points.iter().map(|p| p.0 - t0).collect(),
        y: DVector::from_iterator(points.len(), points.iter().map(|p| p.1)),
        t0,
    };

    let seeds: Vec<f64> = (0..SEED_RATES)
        .map(|i| (0.3 / span) * (3000.0f64).powf(i as f64 / (SEED_RATES - 1) as f64))
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for combo in combinations(SEED_RATES, terms) {
        let rates: Vec<f64> = combo.iter().map(|&i| seeds[i]).collect();
        let c = problem.cost(&rates);
        if c.is_finite() && best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, rates));
        }
    }
    // fall back to fewer terms if no seed keeps all amplitudes positive
    let start = match best {
        Some((_, r)) => r,
        None => {
            let l = problem
                .solve(&seeds[..terms.min(SEED_RATES)])
                .ok_or_else(|| Error::FitFailed("no admissible starting point".into()))?;
            l.rates
        }
    };
    let rates = levenberg_marquardt(&problem, start);
    let lin = problem
        .solve(&rates)
        .ok_or_else(|| Error::FitFailed("no positive amplitudes remain".into()))?;
    if lin.condition > COND_LIMIT {
        return Err(Error::FitFailed(format!(
            "design matrix condition number {:.3e} exceeds {COND_LIMIT:.0e} (rates {:?})",
            lin.condition, lin.rates
        )));
    }
    let exp_terms: Vec<ExpTerm> = lin
        .rates
        .iter()
        .zip(&lin.coef[1..])
        .map(|(&r, &b)| ExpTerm {
            amplitude: b * (r * problem.t0).exp(),
            rate: r,
        })
        .collect();
    if exp_terms.iter().any(|t| !(t.amplitude.is_finite() && t.amplitude > 0.0)) {
        return Err(Error::FitFailed("amplitude overflow after re-centering".into()));
    }
    let function = DelayFunction::sum_exp(lin.coef[0], exp_terms)
        .map_err(|e| Error::FitFailed(e.to_string()))?;
    let rms = (lin.residual.norm_squared() / points.len() as f64).sqrt();
    Ok(EdgeFit {
        function,
        rms,
        terms: lin.rates.len(),
        condition: lin.condition,
    })
}

/// Levenberg–Marquardt on the log-rates of the variable-projection residual.
fn levenberg_marquardt(problem: &Problem, start: Vec<f64>) -> Vec<f64> {
    let residual = |theta: &[f64]| -> Option<DVector<f64>> {
        let rates: Vec<f64> = theta.iter().map(|v| v.exp()).collect();
        problem
            .solve(&rates)
            .filter(|l| l.rates.len() == rates.len())
            .map(|l| l.residual)
    };
    let mut theta: Vec<f64> = start.iter().map(|r| r.ln()).collect();
    let Some(mut r) = residual(&theta) else {
        return start;
    };
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let n = theta.len();
    for _ in 0..LM_ITERS {
        let mut jac = DMatrix::<f64>::zeros(r.len(), n);
        let mut ok = true;
        for j in 0..n {
            let h = 1e-7 * (1.0 + theta[j].abs());
            let mut tp = theta.clone();
            tp[j] += h;
            match residual(&tp) {
                Some(rp) => jac.set_column(j, &((rp - &r) / h)),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            if let Some(rc) = residual(&cand) {
                let c = rc.norm_squared();
                if c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    theta = cand;
                    r = rc;
                    cost = c;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    theta.iter().map(|v| v.exp()).collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 4), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn recovers_two_term_sumexp() {
        let f = DelayFunction::sum_exp(
            1000.0,
            vec![
                ExpTerm { amplitude: 300.0, rate: 0.01 },
                ExpTerm { amplitude: 200.0, rate: 0.002 },
            ],
        )
        .unwrap();
        let pts: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let t = -50.0 + 5000.0 * (i as f64 / 199.0).powi(2);
                (t, f.value(t))
            })
            .collect();
        let fit = fit_edge(&pts, 2).unwrap();
        assert!(fit.rms <= 1e-4, "rms {}", fit.rms);
        for &(t, _) in &pts {
            assert!((fit.function.value(t) - f.value(t)).abs() < 1e-3);
        }
    }
}
