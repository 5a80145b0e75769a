//! Nelder–Mead simplex search on a periodic box.

use super::Domain;

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `start` with initial edge length `step`.
///
/// Stops when both the spread of simplex values and the simplex diameter fall
/// below `tol`, or after `max_iter` iterations.
pub fn nelder_mead<F>(f: &F, domain: &Domain, start: &[f64], step: f64, tol: f64, max_iter: usize) -> SimplexOutcome
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>| {
        domain.wrap(x);
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    let v0 = eval(&mut x0);
    simplex.push((x0, v0));
    for k in 0..n {
        let mut x = start.to_vec();
        x[k] += step;
        let v = eval(&mut x);
        simplex.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.0, &b.0)));
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| domain.distance(x, &simplex[0].0))
            .fold(0.0, f64::max);
        if spread.abs() <= tol && diameter <= tol {
            converged = true;
            break;
        }
        iterations += 1;

        // Centroid in the chart around the best vertex so wrapped points stay adjacent.
        let anchor = simplex[0].0.clone();
        let unwrap = |x: &[f64]| domain.unwrap_near(x, &anchor);
        let pts: Vec<Vec<f64>> = simplex.iter().map(|(x, _)| unwrap(x)).collect();
        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let worst = &pts[n];
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect()
        };

        let mut xr = along(alpha);
        let vr = eval(&mut xr);
        if vr < simplex[0].1 {
            let mut xe = along(gamma);
            let ve = eval(&mut xe);
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[n - 1].1 {
            simplex[n] = (xr, vr);
            continue;
        }
        let (xc, vc) = if vr < simplex[n].1 {
            let mut x = along(rho * alpha);
            let v = eval(&mut x);
            (x, v)
        } else {
            let mut x = along(-rho);
            let v = eval(&mut x);
            (x, v)
        };
        if vc < simplex[n].1.min(vr) {
            simplex[n] = (xc, vc);
            continue;
        }
        for k in 1..=n {
            let mut x: Vec<f64> = pts[0].iter().zip(&pts[k]).map(|(b, p)| b + sigma * (p - b)).collect();
            let v = eval(&mut x);
            simplex[k] = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.0, &b.0)));
    let (x, value) = simplex.swap_remove(0);
    SimplexOutcome {
        x,
        value,
        iterations,
        evaluations: evals,
        converged,
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}
