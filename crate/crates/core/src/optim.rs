//! Box-constrained Nelder–Mead simplex descent.
//!
//! Trial points are clamped into the box before evaluation, so every vertex
//! stays feasible. The search stops when the simplex diameter (largest
//! distance from the best vertex) drops below `tolerance`, or after
//! `max_iterations` reflection steps.

/// Closed interval for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Initial edge length as a fraction of each coordinate's box width.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` over the box starting from `x0`.
///
/// Non-finite objective values are treated as `+inf`, so the simplex moves
/// away from them. The returned value is never worse than `f(x0)`.
pub fn minimize<F>(f: F, x0: &[f64], bounds: &[Bound], opts: &SimplexOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(x0.len(), bounds.len(), "start point and bounds differ in dimension");
    let dim = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let project = |x: &mut [f64]| {
        for (xi, b) in x.iter_mut().zip(bounds) {
            *xi = b.clamp(*xi);
        }
    };

    let mut start = x0.to_vec();
    project(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(&start);
    simplex.push((start.clone(), v0));
    for i in 0..dim {
        let mut p = start.clone();
        let step = opts.initial_step * bounds[i].width();
        // step inward if the forward step would leave the box
        p[i] = if p[i] + step <= bounds[i].hi {
            p[i] + step
        } else {
            p[i] - step
        };
        project(&mut p);
        let v = eval(&p);
        simplex.push((p, v));
    }
    if dim == 0 {
        return Minimum {
            x: start,
            value: v0,
            iterations: 0,
            converged: true,
        };
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(p, _)| p[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p);
            p
        };

        let reflected = along(REFLECT);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(EXPAND);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let p = along(CONTRACT);
            let v = eval(&p);
            (p, v)
        } else {
            let p = along(-CONTRACT);
            let v = eval(&p);
            (p, v)
        };
        if fc < fr.min(worst.1) {
            simplex[dim] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            project(&mut p);
            let v = eval(&p);
            *vertex = (p, v);
        }
    }
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
        converged,
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(p, _)| {
            p.iter()
                .zip(best)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let b = [Bound::new(-5.0, 5.0); 2];
        let m = minimize(f, &[4.0, 4.0], &b, &SimplexOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let b = [Bound::new(-3.0, 3.0); 2];
        let opts = SimplexOptions {
            max_iterations: 5000,
            ..Default::default()
        };
        let m = minimize(f, &[-1.2, 1.0], &b, &opts);
        assert!(m.value < 1e-8, "{m:?}");
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| x[0] + x[1];
        let b = [Bound::new(0.5, 2.0), Bound::new(-1.0, 1.0)];
        let m = minimize(f, &[1.0, 0.0], &b, &SimplexOptions::default());
        assert!((m.x[0] - 0.5).abs() < 1e-5 && (m.x[1] + 1.0).abs() < 1e-5);
        assert!(b.iter().zip(&m.x).all(|(b, x)| b.contains(*x)));
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| if x[0] > 0.3 { f64::NAN } else { (x[0] - 0.2).abs() };
        let m = minimize(f, &[0.0], &[Bound::new(0.0, 1.0)], &SimplexOptions::default());
        assert!(m.value <= 0.2);
    }
}
