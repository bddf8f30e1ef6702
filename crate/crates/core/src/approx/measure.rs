use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::features::FeatureMap;
use crate::Samples;

fn project_to_ball(x: &mut [f64], radius: f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        let s = radius / norm;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Cube grid of spacing `h` over `[-R, R]^n`, each node projected onto the
/// ball. Every point of the ball lies within `h sqrt(n) / 2` of a node.
pub fn ball_grid(n: usize, radius: f64, h: f64) -> Result<Samples> {
    if n == 0 || !(radius > 0.0) || !(h > 0.0) {
        return Err(invalid("grid needs n >= 1, R > 0 and h > 0"));
    }
    let per_axis = (2.0 * radius / h).ceil() as usize + 1;
    let total = per_axis.checked_pow(n as u32).filter(|t| *t <= 20_000_000).ok_or(Error::DimensionTooHigh(n))?;
    let step = 2.0 * radius / (per_axis - 1) as f64;
    let mut out = Samples::with_capacity(n, total);
    let mut idx = vec![0usize; n];
    let mut pt = vec![0.0; n];
    for _ in 0..total {
        for (p, &i) in pt.iter_mut().zip(&idx) {
            *p = -radius + step * i as f64;
        }
        let norm = pt.iter().map(|v| v * v).sum::<f64>().sqrt();
        // Nodes farther than half a cell diagonal from the ball add nothing.
        if norm <= radius + 0.5 * step * (n as f64).sqrt() {
            project_to_ball(&mut pt, radius);
            out.push(&pt);
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < per_axis {
                break;
            }
            *slot = 0;
        }
    }
    Ok(out)
}

/// `max_x |sum_i c_i relu(w_i . x + b_i) - g(x)|` over the grid.
pub fn measure_linf_error<G>(g: G, map: &FeatureMap, coefficients: &[f64], grid: &Samples) -> Result<f64>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    if grid.is_empty() {
        return Err(Error::EmptySampleSet("error grid"));
    }
    if grid.dim() != map.dim() {
        return Err(Error::DimensionMismatch { expected: map.dim(), got: grid.dim() });
    }
    if coefficients.len() != map.neurons() {
        return Err(Error::DimensionMismatch { expected: map.neurons(), got: coefficients.len() });
    }
    let rows: Vec<&[f64]> = grid.rows().collect();
    Ok(rows
        .par_iter()
        .map(|x| (map.psi_unchecked(x, coefficients) - g(x)).abs())
        .reduce(|| 0.0, f64::max))
}

/// A sup-norm measurement with a certified upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfMeasurement {
    /// Largest error actually observed.
    pub value: f64,
    /// No point of the ball has a larger error than this.
    pub upper: f64,
    /// Finest cell width used.
    pub spacing: f64,
    pub evaluations: usize,
    /// Whether `upper <= (1 + rel_slack) value` was reached within budget.
    pub converged: bool,
}

/// Branch-and-bound maximization of `|e|` over `B_R` for an `L`-Lipschitz
/// error `e`: cells whose bound `|e(center)| + L * half-diagonal` exceeds
/// `(1 + rel_slack)` times the best value are split until none remain.
pub fn linf_error_certified<E>(
    error: E,
    n: usize,
    radius: f64,
    lipschitz: f64,
    rel_slack: f64,
    initial_h: f64,
    max_evaluations: usize,
) -> Result<LinfMeasurement>
where
    E: Fn(&[f64]) -> f64 + Sync,
{
    if n == 0 || !(radius > 0.0) || !(initial_h > 0.0) || !(lipschitz >= 0.0) || !(rel_slack > 0.0) {
        return Err(invalid("certified sup-norm needs n >= 1, R > 0, h > 0, L >= 0 and positive slack"));
    }
    let sqrt_n = (n as f64).sqrt();
    let per_axis = (2.0 * radius / initial_h).ceil().max(1.0) as usize;
    let h0 = 2.0 * radius / per_axis as f64;
    let mut cells: Vec<Vec<f64>> = Vec::new();
    let total = per_axis.checked_pow(n as u32).filter(|t| *t <= max_evaluations).ok_or(Error::DimensionTooHigh(n))?;
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let c: Vec<f64> = idx.iter().map(|&i| -radius + h0 * (i as f64 + 0.5)).collect();
        if c.iter().map(|v| v * v).sum::<f64>().sqrt() - 0.5 * h0 * sqrt_n <= radius {
            cells.push(c);
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < per_axis {
                break;
            }
            *slot = 0;
        }
    }
    let eval = |cells: &[Vec<f64>]| -> Vec<f64> {
        cells
            .par_iter()
            .map(|c| {
                let mut p = c.clone();
                project_to_ball(&mut p, radius);
                error(&p).abs()
            })
            .collect()
    };
    let mut width = h0;
    let mut values = eval(&cells);
    let mut evaluations = values.len();
    let mut best = values.iter().cloned().fold(0.0f64, f64::max);
    loop {
        let reach = lipschitz * 0.5 * width * sqrt_n;
        let threshold = (1.0 + rel_slack) * best;
        let live: Vec<&Vec<f64>> = cells.iter().zip(&values).filter(|(_, v)| **v + reach > threshold).map(|(c, _)| c).collect();
        if live.is_empty() {
            return Ok(LinfMeasurement { value: best, upper: threshold.max(best), spacing: width, evaluations, converged: true });
        }
        let children = live.len() << n;
        if evaluations + children > max_evaluations {
            let upper = values.iter().map(|v| v + reach).fold(threshold, f64::max);
            return Ok(LinfMeasurement { value: best, upper, spacing: width, evaluations, converged: false });
        }
        let half = 0.5 * width;
        let mut next = Vec::with_capacity(children);
        for c in live {
            for mask in 0..(1usize << n) {
                let child: Vec<f64> =
                    c.iter().enumerate().map(|(d, v)| v + if mask >> d & 1 == 1 { 0.5 * half } else { -0.5 * half }).collect();
                if child.iter().map(|v| v * v).sum::<f64>().sqrt() - 0.5 * half * sqrt_n <= radius {
                    next.push(child);
                }
            }
        }
        width = half;
        values = eval(&next);
        evaluations += values.len();
        best = values.iter().cloned().fold(best, f64::max);
        cells = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_ball() {
        let grid = ball_grid(2, 1.0, 0.1).unwrap();
        assert!(grid.rows().all(|p| p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-12));
        let mut g = crate::rng::seeded(1);
        use rand::Rng;
        for _ in 0..500 {
            let p = [g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)];
            if p[0] * p[0] + p[1] * p[1] > 1.0 {
                continue;
            }
            let d = grid.rows().map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()).fold(f64::MAX, f64::min);
            assert!(d <= 0.1 * 2f64.sqrt() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn zero_network_matches_zero_function() {
        let map = FeatureMap::sample(2, 5, 1.0, 1).unwrap();
        let grid = ball_grid(2, 1.0, 0.2).unwrap();
        assert_eq!(measure_linf_error(|_| 0.0, &map, &[0.0; 5], &grid).unwrap(), 0.0);
        assert!(measure_linf_error(|_| 0.0, &map, &[0.0; 5], &Samples::with_capacity(2, 0)).is_err());
    }

    #[test]
    fn certified_bound_brackets_known_maximum() {
        // |x . (1, 2)| on the unit disc peaks at sqrt(5); Lipschitz constant sqrt(5).
        let m = linf_error_certified(|x| x[0] + 2.0 * x[1], 2, 1.0, 5f64.sqrt(), 0.01, 0.5, 1_000_000).unwrap();
        assert!(m.converged);
        assert!(m.value <= 5f64.sqrt() + 1e-12);
        assert!(m.upper >= 5f64.sqrt());
        assert!(m.upper <= 1.01 * m.value + 1e-12);
    }
}
