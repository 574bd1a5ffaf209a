//! Nelder–Mead simplex minimizer with optional box projection.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    pub max_evals: usize,
    /// Stop when the spread of function values in the simplex falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter (sup-norm) falls below this.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.25, max_evals: 600, f_tol: 1e-10, x_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u), "inverted bounds");
        Self { lower, upper }
    }

    /// Sup-norm ball of radius `r` around `center`.
    pub fn around(center: &[f64], r: f64) -> Self {
        Self::new(center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn intersect(&self, other: &Bounds) -> Bounds {
        let lower: Vec<f64> = self.lower.iter().zip(&other.lower).map(|(a, b)| a.max(*b)).collect();
        let upper: Vec<f64> = self.upper.iter().zip(&other.upper).zip(&lower).map(|((a, b), l)| a.min(*b).max(*l)).collect();
        Bounds::new(lower, upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Objective<'f, F> {
    f: &'f mut F,
    bounds: Option<&'f Bounds>,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Objective<'_, F> {
    fn call(&mut self, mut x: Vec<f64>) -> (Vec<f64>, f64) {
        if let Some(b) = self.bounds {
            b.project(&mut x);
        }
        self.evals += 1;
        let v = (self.f)(&x);
        (x, if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// Minimizes `f` from `x0`. The returned value never exceeds `f(x0)`
/// (after projecting `x0` into the bounds).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    bounds: Option<&Bounds>,
    opts: NelderMeadOptions,
) -> Minimum {
    let dim = x0.len();
    let mut obj = Objective { f: &mut f, bounds, evals: 0 };
    let (x_start, f_start) = obj.call(x0.to_vec());
    if dim == 0 {
        return Minimum { x: x_start, value: f_start, evals: obj.evals, converged: true };
    }

    let mut simplex = vec![(x_start.clone(), f_start)];
    for k in 0..dim {
        let mut x = x_start.clone();
        x[k] += opts.initial_step;
        if let Some(b) = bounds {
            // step inward when the vertex would be clipped onto the start
            if x[k] > b.upper[k] {
                x[k] = x_start[k] - opts.initial_step;
            }
        }
        simplex.push(obj.call(x));
    }

    let mut converged = false;
    while obj.evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_tol * (1.0 + best.abs()) && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let along = |t: f64, x: &[f64]| -> Vec<f64> { centroid.iter().zip(x).map(|(c, w)| c + t * (w - c)).collect() };

        let (xr, fr) = obj.call(along(-1.0, &simplex[dim].0));
        if fr < simplex[0].1 {
            let (xe, fe) = obj.call(along(-2.0, &simplex[dim].0));
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[dim].1 {
            obj.call(along(-0.5, &simplex[dim].0))
        } else {
            obj.call(along(0.5, &simplex[dim].0))
        };
        if fc < fr.min(simplex[dim].1) {
            simplex[dim] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let shrunk: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
            *vertex = obj.call(shrunk);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals: obj.evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions { max_evals: 5000, f_tol: 1e-14, x_tol: 1e-9, initial_step: 0.5 };
        let m = nelder_mead(rosen, &[-1.2, 1.0], None, opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2);
        let b = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let m = nelder_mead(f, &[0.0, 0.0], Some(&b), NelderMeadOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] + 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn never_worse_than_start_and_handles_zero_dim() {
        let f = |x: &[f64]| x.iter().map(|v| v.sin()).sum::<f64>();
        let m = nelder_mead(f, &[0.3, -0.2, 0.1], None, NelderMeadOptions { max_evals: 20, ..Default::default() });
        assert!(m.value <= f(&[0.3, -0.2, 0.1]));
        let m0 = nelder_mead(|_| 4.0, &[], None, NelderMeadOptions::default());
        assert_eq!(m0.value, 4.0);
        assert!(m0.x.is_empty());
    }
}
