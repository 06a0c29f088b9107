//! Derivative-free minimization (Nelder–Mead simplex).

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Converged once the spread of simplex values falls below
    /// `f_tol * (|f_best| + 1e-8)` and the simplex diameter below `x_tol`.
    pub f_tol: f64,
    pub x_tol: f64,
    /// Restarts from the best vertex with a fresh simplex until a restart
    /// stops improving the minimum.
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            f_tol: 1e-10,
            x_tol: 1e-6,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with initial simplex edge lengths `steps`.
/// Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = Minimum {
        x: x0.to_vec(),
        f: eval(x0),
        evals: 1,
        converged: false,
    };
    for _ in 0..=opts.max_restarts {
        let budget = opts.max_evals.saturating_sub(best.evals);
        if budget == 0 {
            break;
        }
        let run = simplex_run(&eval, &best.x, steps, budget, opts);
        let evals = best.evals + run.evals;
        let improved = run.f < best.f - opts.f_tol * (best.f.abs() + 1e-8);
        if run.f <= best.f {
            best = Minimum { evals, ..run };
        } else {
            best.evals = evals;
            best.converged = run.converged;
        }
        if !improved && best.converged {
            break;
        }
    }
    best
}

fn simplex_run<F>(f: &F, x0: &[f64], steps: &[f64], budget: usize, opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = n + 1;
    let mut converged = false;

    let sort = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    sort(&mut simplex);

    while evals < budget {
        let f_best = simplex[0].1;
        let f_worst = simplex[n].1;
        let spread = f_worst - f_best;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if f_best.is_finite() && spread <= opts.f_tol * (f_best.abs() + 1e-8) && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(ALPHA);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(GAMMA);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(RHO * ALPHA);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-RHO);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, fx) in simplex[1..].iter_mut() {
                    for (xi, bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + SIGMA * (*xi - bi);
                    }
                    *fx = f(x);
                }
                evals += n;
            }
        }
        sort(&mut simplex);
    }

    let (x, fx) = simplex.swap_remove(0);
    Minimum {
        x,
        f: fx,
        evals,
        converged,
    }
}
