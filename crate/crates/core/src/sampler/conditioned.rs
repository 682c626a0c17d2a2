//! Exact-up-to-grid samplers for conditioned Brownian motion.

use super::RngStream;
use crate::error::{Error, Result};
use crate::genealogy::LineagePath;
use crate::geometry::{IntervalKernel, KernelEvaluator, DENSITY_FLOOR};

pub const GRID_POINTS: usize = 4096;

/// Half-width of the sampling window in units of `sqrt(dt)`.
const WINDOW_SDS: f64 = 12.0;

/// A one-dimensional density tabulated on a uniform grid, sampled by
/// inverting the CDF of its piecewise-linear interpolant.
#[derive(Debug, Clone)]
pub struct GridDensity {
    lo: f64,
    h: f64,
    values: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridDensity {
    pub fn tabulate<F: Fn(f64) -> f64>(lo: f64, hi: f64, points: usize, f: F) -> Self {
        let h = (hi - lo) / (points - 1) as f64;
        let values: Vec<f64> = (0..points).map(|i| f(lo + i as f64 * h).max(0.0)).collect();
        let mut cdf = Vec::with_capacity(points);
        cdf.push(0.0);
        for w in values.windows(2) {
            let last = *cdf.last().unwrap();
            cdf.push(last + 0.5 * h * (w[0] + w[1]));
        }
        Self { lo, h, values, cdf }
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.lo + i as f64 * self.h)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mean of the normalized interpolant.
    pub fn mean(&self) -> f64 {
        let mut m = 0.0;
        for (i, w) in self.values.windows(2).enumerate() {
            let a = self.lo + i as f64 * self.h;
            // ∫ y (f0 + (f1 - f0)(y - a)/h) dy over the cell
            m += self.h * (w[0] * (a + self.h / 2.0) + (w[1] - w[0]) * (a / 2.0 + self.h / 3.0));
        }
        m / self.total()
    }

    /// Quantile at `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u * self.total();
        let j = match self.cdf.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(j) => j.min(self.values.len() - 2),
            Err(j) => j.saturating_sub(1).min(self.values.len() - 2),
        };
        let r = target - self.cdf[j];
        let (f0, f1) = (self.values[j], self.values[j + 1]);
        let slope = (f1 - f0) / self.h;
        let s = if slope.abs() < 1e-300 || (slope * r).abs() < 1e-12 * f0 * f0 {
            if f0 > 0.0 {
                r / f0
            } else {
                0.5 * self.h
            }
        } else {
            let disc = (f0 * f0 + 2.0 * slope * r).max(0.0);
            2.0 * r / (f0 + disc.sqrt())
        };
        self.lo + j as f64 * self.h + s.clamp(0.0, self.h)
    }
}

fn window(k: &IntervalKernel, x: f64, dt: f64) -> (f64, f64) {
    let w = WINDOW_SDS * dt.sqrt();
    ((x - w).max(k.lo()), (x + w).min(k.hi()))
}

fn open_clamp(v: f64, lo: f64, hi: f64) -> f64 {
    if v <= lo {
        lo + (hi - lo) * 1e-15
    } else if v >= hi {
        hi - (hi - lo) * 1e-15
    } else {
        v
    }
}

/// Tabulated one-step law of the conditioned-forever process along one axis.
pub fn h_step_axis_density(k: &IntervalKernel, x: f64, dt: f64) -> GridDensity {
    let (a, b) = window(k, x, dt);
    GridDensity::tabulate(a, b, GRID_POINTS, |y| {
        if y <= k.lo() || y >= k.hi() {
            0.0
        } else {
            crate::geometry::axis_h_kernel(k, dt, x, y)
        }
    })
}

/// One step of Brownian motion conditioned to stay in the domain forever,
/// drawn from `y ↦ ĥp_dt(x, y)`. Axes are sampled independently.
pub fn h_process_step(rng: &mut RngStream, ke: &KernelEvaluator, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveTime(dt));
    }
    if !ke.domain().contains(x)? {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let phi = ke.spectral().phi(x);
    if phi < 1e-12 {
        return Err(Error::NearBoundary(phi));
    }
    Ok(ke
        .axes()
        .iter()
        .zip(x)
        .map(|(k, &xi)| {
            let g = h_step_axis_density(k, xi, dt);
            open_clamp(g.quantile(rng.uniform()), k.lo(), k.hi())
        })
        .collect())
}

/// Samples the path started at `x`, conditioned to stay in the domain on
/// `[0, s]` and pinned at `y` at time `s`, on the grid `0, grid_dt, ..., s`.
pub fn pinned_bridge_path(
    rng: &mut RngStream,
    ke: &KernelEvaluator,
    x: &[f64],
    y: &[f64],
    s: f64,
    grid_dt: f64,
) -> Result<LineagePath> {
    if !(grid_dt > 0.0 && grid_dt < s) {
        return Err(Error::InvalidArgument(format!("need 0 < grid_dt < s, got {grid_dt}, {s}")));
    }
    if !ke.domain().contains(x)? {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    if !ke.domain().contains(y)? {
        return Err(Error::OutsideDomain(y.to_vec()));
    }
    let total = ke.heat_kernel(s, x, y)?;
    if !(total > DENSITY_FLOOR) {
        return Err(Error::Underflow(format!("p_s(x, y) = {total:e} below the numeric floor")));
    }
    let d = x.len();
    let mut times = vec![0.0];
    let mut values = x.to_vec();
    let mut current = x.to_vec();
    let mut t = 0.0;
    loop {
        let next = t + grid_dt;
        // avoid a sliver step right before the pinned endpoint
        if next >= s - 1e-9 * grid_dt {
            break;
        }
        let (delta, rest) = (next - t, s - next);
        for (axis, k) in ke.axes().iter().enumerate() {
            let (z, target) = (current[axis], y[axis]);
            let (a, b) = window(k, z, delta);
            let g = GridDensity::tabulate(a, b, GRID_POINTS, |w| {
                if w <= k.lo() || w >= k.hi() {
                    0.0
                } else {
                    k.density(delta, z, w) * k.density(rest, w, target)
                }
            });
            if !(g.total() > 0.0) {
                return Err(Error::Underflow("bridge step has no mass on the grid".into()));
            }
            current[axis] = open_clamp(g.quantile(rng.uniform()), k.lo(), k.hi());
        }
        times.push(next);
        values.extend_from_slice(&current);
        t = next;
    }
    times.push(s);
    values.extend_from_slice(y);
    Ok(LineagePath::new(times, d, values, Vec::new()))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::analysis::ks::ks_statistic;
    use crate::geometry::DomainSpec;

    fn unit() -> KernelEvaluator {
        KernelEvaluator::new(&DomainSpec::unit_interval())
    }

    fn phi2_cdf(y: f64) -> f64 {
        y - (2.0 * PI * y).sin() / (2.0 * PI)
    }

    #[test]
    fn grid_quantile_of_uniform_and_linear() {
        let g = GridDensity::tabulate(0.0, 1.0, 11, |_| 1.0);
        assert!((g.quantile(0.37) - 0.37).abs() < 1e-12);
        let g = GridDensity::tabulate(0.0, 1.0, 11, |y| 2.0 * y);
        assert!((g.quantile(0.25) - 0.5).abs() < 1e-12);
        assert!((g.mean() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn h_steps_stay_inside() {
        let ke = unit();
        let mut rng = RngStream::new(4, 4);
        let mut x = vec![0.5];
        for i in 0..20_000 {
            let dt = if i % 2 == 0 { 1e-3 } else { 0.2 };
            x = h_process_step(&mut rng, &ke, &x, dt).unwrap();
            assert!(x[0] > 0.0 && x[0] < 1.0);
        }
    }

    #[test]
    fn h_step_preserves_phi_squared() {
        let ke = unit();
        let n = 10_000;
        for (i, &dt) in [0.1, 0.5, 1.0].iter().enumerate() {
            let mut rng = RngStream::new(77, i as u64);
            let start = GridDensity::tabulate(0.0, 1.0, GRID_POINTS, |y| 2.0 * (PI * y).sin().powi(2));
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let x0 = open_clamp(start.quantile(rng.uniform()), 0.0, 1.0);
                out.push(h_process_step(&mut rng, &ke, &[x0], dt).unwrap()[0]);
            }
            let d = ks_statistic(&out, phi2_cdf);
            assert!(d < 0.02, "dt={dt} ks={d}");
        }
    }

    #[test]
    fn h_step_drift_matches_log_phi_gradient() {
        let ke = unit();
        let (x, dt) = (0.25, 1e-4);
        let g = h_step_axis_density(&ke.axes()[0], x, dt);
        let mean_disp = g.mean() - x;
        let h = 1e-6;
        let phi = |y: f64| ke.spectral().phi(&[y]);
        let fd = (phi(x + h).ln() - phi(x - h).ln()) / (2.0 * h);
        let expected = dt * fd;
        assert!((fd - PI / (PI * x).tan()).abs() < 1e-6);
        assert!((mean_disp / expected - 1.0).abs() < 0.1, "{mean_disp} vs {expected}");
    }

    #[test]
    fn h_step_replays() {
        let ke = unit();
        let mut a = RngStream::new(9, 9);
        let mut b = RngStream::new(9, 9);
        assert_eq!(
            h_process_step(&mut a, &ke, &[0.3], 0.05).unwrap(),
            h_process_step(&mut b, &ke, &[0.3], 0.05).unwrap()
        );
    }

    #[test]
    fn h_step_rectangle_stays_inside() {
        let ke = KernelEvaluator::new(&DomainSpec::rectangle(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap());
        let mut rng = RngStream::new(1, 1);
        let mut x = vec![0.5, 0.0];
        for _ in 0..2000 {
            x = h_process_step(&mut rng, &ke, &x, 0.05).unwrap();
            assert!(ke.domain().contains(&x).unwrap());
        }
    }

    #[test]
    fn pinned_path_endpoints_and_interior() {
        let ke = unit();
        let mut rng = RngStream::new(5, 5);
        for _ in 0..10_000 {
            let p = pinned_bridge_path(&mut rng, &ke, &[0.3], &[0.7], 1.0, 0.25).unwrap();
            assert_eq!(p.value(0)[0], 0.3);
            assert_eq!(p.value(p.len() - 1)[0], 0.7);
            assert_eq!(*p.times().last().unwrap(), 1.0);
            assert!(p.values().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn pinned_path_errors() {
        let ke = unit();
        let mut rng = RngStream::new(5, 5);
        assert!(pinned_bridge_path(&mut rng, &ke, &[0.3], &[0.7], 1.0, 1.5).is_err());
        assert!(matches!(
            pinned_bridge_path(&mut rng, &ke, &[0.3], &[0.7], 500.0, 1.0),
            Err(Error::Underflow(_))
        ));
    }
}
