//! Bounded Nelder-Mead with restarts.

/// Box constraints, one interval per coordinate.
#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NmOptions {
    /// Spread of objective values across the simplex at convergence.
    pub ftol: f64,
    /// Largest coordinate distance from the best vertex at convergence.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            xtol: 1e-6,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` inside `bounds`. Trial points are projected onto the box.
/// Non-finite objective values are treated as `+inf`.
pub(crate) fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    bounds: &Bounds,
    opts: NmOptions,
) -> NmResult {
    let dim = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut start = x0.to_vec();
    bounds.clamp(&mut start);
    let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
    for i in 0..dim {
        let mut v = start.clone();
        let up = v[i] + step[i];
        v[i] = if up <= bounds.hi[i] { up } else { v[i] - step[i] };
        bounds.clamp(&mut v);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let f_spread = values[dim] - values[0];
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread.is_finite() && f_spread <= opts.ftol && x_spread <= opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + t * (simplex[dim][j] - centroid[j]))
                .collect();
            bounds.clamp(&mut p);
            p
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[dim] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=dim {
            let mut v: Vec<f64> = (0..dim)
                .map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]))
                .collect();
            bounds.clamp(&mut v);
            values[i] = eval(&v);
            simplex[i] = v;
        }
    }
    let best = (0..=dim)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap())
        .unwrap();
    NmResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
    }
}

/// Runs Nelder-Mead from every start, then once more from the best point with
/// a reduced simplex. Returns the best result; `converged` reflects the final
/// polishing run.
pub(crate) fn minimize_multistart(
    f: &mut dyn FnMut(&[f64]) -> f64,
    starts: &[Vec<f64>],
    step: &[f64],
    bounds: &Bounds,
    opts: NmOptions,
) -> NmResult {
    let mut best: Option<NmResult> = None;
    let mut total = 0;
    for s in starts {
        let r = nelder_mead(f, s, step, bounds, opts);
        total += r.iterations;
        if best.as_ref().map_or(true, |b| r.f < b.f) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    let small: Vec<f64> = step.iter().map(|s| s * 0.1).collect();
    let polished = nelder_mead(f, &best.x, &small, bounds, opts);
    total += polished.iterations;
    let mut out = if polished.f <= best.f { polished } else { NmResult { converged: polished.converged, ..best } };
    out.iterations = total;
    out
}
