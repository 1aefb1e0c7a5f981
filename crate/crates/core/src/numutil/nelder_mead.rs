use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Stop once `max f - min f` over the simplex falls below this.
    pub tol: f64,
    /// ...and the simplex diameter (max-norm distance of every vertex to
    /// the best one) below this. Guards against vertices straddling a
    /// minimum at equal heights.
    pub xtol: f64,
    pub max_iters: usize,
    /// Relative edge of the initial simplex: coordinate `i` is offset by
    /// `step * max(|x0_i|, 1)`.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            xtol: 1e-8,
            max_iters: 500,
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub argmin: Vec<f64>,
    pub min: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with the default options.
pub fn nelder_mead<F>(f: F, x0: &[f64], tol: f64, max_iters: usize) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    nelder_mead_with(
        f,
        x0,
        NelderMeadOptions {
            tol,
            max_iters,
            ..Default::default()
        },
    )
}

/// Downhill simplex with the usual coefficients (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2). Non-finite values away from `x0` count as
/// `+inf`.
pub fn nelder_mead_with<F>(mut f: F, x0: &[f64], opts: NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let k = x0.len();
    if k == 0 {
        return Err(Error::usage("Nelder-Mead needs at least one coordinate"));
    }
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(Error::usage(format!("objective is {f0} at the starting point")));
    }
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..k {
        let mut x = x0.to_vec();
        x[i] += opts.step * x0[i].abs().max(1.0);
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // stable sort keeps x0 first among ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[k].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (spread < opts.tol || simplex[k].1 == simplex[0].1) && diameter < opts.xtol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; k];
        for (x, _) in &simplex[..k] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / k as f64;
            }
        }
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let worst = simplex[k].0.clone();
        let (f_best, f_second_worst, f_worst) = (simplex[0].1, simplex[k - 1].1, simplex[k].1);

        let xr = along(1.0, &worst);
        let fr = eval(&xr);
        if fr < f_best {
            let xe = along(2.0, &worst);
            let fe = eval(&xe);
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second_worst {
            simplex[k] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = along(0.5, &worst);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5, &worst);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < f_worst.min(fr) {
            simplex[k] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            let v = eval(&x);
            *vertex = (x, v);
        }
    }

    let (argmin, min) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        argmin,
        min,
        iterations,
        converged,
    })
}
