use std::f64::consts::PI;

use super::quadrature::simpson_refined;
use super::{DomainSpec, SpectralData};
use crate::error::{Error, Result};

/// Values below this are treated as numerically zero when dividing.
pub const DENSITY_FLOOR: f64 = 1e-290;

const PHI_FLOOR: f64 = 1e-12;

#[inline]
fn gauss(z: f64, t: f64) -> f64 {
    (-z * z / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Killed Brownian transition density on a single interval `(lo, lo + len)`.
///
/// Two representations are available: the method of images (fast for small
/// `t`) and the sine expansion (fast for large `t`). [`IntervalKernel::density`]
/// switches between them at `t_switch = len² / π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalKernel {
    lo: f64,
    len: f64,
    tol: f64,
    t_switch: f64,
}

impl IntervalKernel {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Self {
        let len = hi - lo;
        Self {
            lo,
            len,
            tol,
            t_switch: len * len / PI,
        }
    }

    pub fn t_switch(&self) -> f64 {
        self.t_switch
    }

    pub fn lambda1(&self) -> f64 {
        PI * PI / (2.0 * self.len * self.len)
    }

    #[inline]
    fn decay(&self, t: f64) -> f64 {
        PI * PI * t / (2.0 * self.len * self.len)
    }

    /// Sine-series value of `e^{shift·λ₁ t} p_t(x, y)`.
    fn spectral_scaled(&self, t: f64, x: f64, y: f64, shift: bool) -> f64 {
        let c = self.decay(t);
        let (ax, ay) = (PI * (x - self.lo) / self.len, PI * (y - self.lo) / self.len);
        let pre = 2.0 / self.len;
        let base = if shift { 1.0 } else { 0.0 };
        let mut sum = 0.0;
        let mut k = 1u64;
        loop {
            let kf = k as f64;
            let w = (-(kf * kf - base) * c).exp();
            sum += w * (kf * ax).sin() * (kf * ay).sin();
            let next = kf + 1.0;
            let rest = (-(next * next - base) * c).exp() / (1.0 - (-(2.0 * next + 1.0) * c).exp());
            if pre * rest < self.tol || k > 1_000_000 {
                break;
            }
            k += 1;
        }
        pre * sum
    }

    pub fn spectral(&self, t: f64, x: f64, y: f64) -> f64 {
        self.spectral_scaled(t, x, y, false)
    }

    pub fn image(&self, t: f64, x: f64, y: f64) -> f64 {
        let (u, v, l) = (x - self.lo, y - self.lo, self.len);
        let mut sum = gauss(v - u, t) - gauss(v + u, t);
        let mut k = 1u64;
        loop {
            let s = 2.0 * k as f64 * l;
            if k >= 2 && 8.0 * gauss(s - 2.0 * l, t) < self.tol {
                break;
            }
            sum += gauss(v - u + s, t) - gauss(v + u + s, t) + gauss(v - u - s, t) - gauss(v + u - s, t);
            k += 1;
            if k > 1_000_000 {
                break;
            }
        }
        sum
    }

    pub fn density(&self, t: f64, x: f64, y: f64) -> f64 {
        if t < self.t_switch {
            self.image(t, x, y)
        } else {
            self.spectral(t, x, y)
        }
    }

    /// `e^{λ₁ t} p_t(x, y)`, computed without underflow for large `t`.
    pub fn scaled_density(&self, t: f64, x: f64, y: f64) -> f64 {
        if t < self.t_switch {
            (self.lambda1() * t).exp() * self.image(t, x, y)
        } else {
            self.spectral_scaled(t, x, y, true)
        }
    }

    /// `∫_a^b p_t(x, y) dy` by the term-by-term integrated sine series.
    pub fn mass(&self, t: f64, x: f64, a: f64, b: f64) -> f64 {
        let a = a.max(self.lo);
        let b = b.min(self.lo + self.len);
        if b <= a {
            return 0.0;
        }
        let c = self.decay(t);
        let ax = PI * (x - self.lo) / self.len;
        let (aa, ab) = (PI * (a - self.lo) / self.len, PI * (b - self.lo) / self.len);
        let mut sum = 0.0;
        let mut k = 1u64;
        loop {
            let kf = k as f64;
            sum += (-kf * kf * c).exp() * (kf * ax).sin() * ((kf * aa).cos() - (kf * ab).cos()) / kf;
            let next = kf + 1.0;
            let rest = 4.0 / (PI * next) * (-next * next * c).exp() / (1.0 - (-(2.0 * next + 1.0) * c).exp());
            if rest < self.tol || k > 10_000_000 {
                break;
            }
            k += 1;
        }
        2.0 / PI * sum
    }

    /// `P_x(τ > t)` for this interval alone.
    pub fn survival(&self, t: f64, x: f64) -> f64 {
        self.mass(t, x, self.lo, self.lo + self.len)
    }

    /// `∫ p_t(x, y) dy` by composite Simpson, refined until stable.
    pub fn survival_quadrature(&self, t: f64, x: f64) -> f64 {
        simpson_refined(|y| self.density(t, x, y), self.lo, self.lo + self.len)
    }
}

/// Reference densities for Brownian motion killed on leaving a domain.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    domain: DomainSpec,
    spectral: SpectralData,
    axes: Vec<IntervalKernel>,
    series_tol: f64,
}

impl KernelEvaluator {
    pub const DEFAULT_SERIES_TOL: f64 = 1e-14;

    pub fn new(domain: &DomainSpec) -> Self {
        Self::with_tolerance(domain, Self::DEFAULT_SERIES_TOL)
    }

    pub fn with_tolerance(domain: &DomainSpec, series_tol: f64) -> Self {
        let axes = domain
            .bounds()
            .iter()
            .map(|&(lo, hi)| IntervalKernel::new(lo, hi, series_tol))
            .collect();
        Self {
            domain: domain.clone(),
            spectral: domain.eigen(),
            axes,
            series_tol,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn axes(&self) -> &[IntervalKernel] {
        &self.axes
    }

    pub fn series_tol(&self) -> f64 {
        self.series_tol
    }

    fn check_time(t: f64) -> Result<()> {
        if t > 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(Error::NonPositiveTime(t))
        }
    }

    fn check_inside(&self, x: &[f64]) -> Result<()> {
        if self.domain.contains(x)? {
            Ok(())
        } else {
            Err(Error::OutsideDomain(x.to_vec()))
        }
    }

    fn check_args(&self, t: f64, x: &[f64], y: &[f64]) -> Result<()> {
        Self::check_time(t)?;
        self.check_inside(x)?;
        self.check_inside(y)
    }

    /// `p_t(x, y)`.
    pub fn heat_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_args(t, x, y)?;
        Ok(self.heat_kernel_unchecked(t, x, y))
    }

    pub(crate) fn heat_kernel_unchecked(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        self.axes
            .iter()
            .zip(x.iter().zip(y))
            .map(|(k, (&xi, &yi))| k.density(t, xi, yi))
            .product()
    }

    /// `p_t(x, y)` forced through the image representation on every axis.
    pub fn heat_kernel_image(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_args(t, x, y)?;
        Ok(self
            .axes
            .iter()
            .zip(x.iter().zip(y))
            .map(|(k, (&xi, &yi))| k.image(t, xi, yi))
            .product())
    }

    /// `p_t(x, y)` forced through the sine expansion on every axis.
    pub fn heat_kernel_spectral(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_args(t, x, y)?;
        Ok(self
            .axes
            .iter()
            .zip(x.iter().zip(y))
            .map(|(k, (&xi, &yi))| k.spectral(t, xi, yi))
            .product())
    }

    /// `P_x(τ_Λ > t)` from the integrated series.
    pub fn survival(&self, t: f64, x: &[f64]) -> Result<f64> {
        Self::check_time(t)?;
        self.check_inside(x)?;
        Ok(self.axes.iter().zip(x).map(|(k, &xi)| k.survival(t, xi)).product())
    }

    /// `P_x(τ_Λ > t)` by Simpson quadrature of the kernel.
    pub fn survival_quadrature(&self, t: f64, x: &[f64]) -> Result<f64> {
        Self::check_time(t)?;
        self.check_inside(x)?;
        Ok(self
            .axes
            .iter()
            .zip(x)
            .map(|(k, &xi)| k.survival_quadrature(t, xi))
            .product())
    }

    /// `P_x(B_t ∈ box, τ_Λ > t)` for an axis-aligned box.
    pub fn box_mass(&self, t: f64, x: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
        Self::check_time(t)?;
        self.check_inside(x)?;
        self.domain.check_dim(lower)?;
        self.domain.check_dim(upper)?;
        Ok(self
            .axes
            .iter()
            .enumerate()
            .map(|(i, k)| k.mass(t, x[i], lower[i], upper[i]))
            .product())
    }

    /// Law of `B_t` given `B_0 = x` and survival up to `t`. The normalizer is
    /// computed once by quadrature.
    pub fn conditioned(&self, t: f64, x: &[f64]) -> Result<ConditionedDensity<'_>> {
        let normalizer = self.survival_quadrature(t, x)?;
        if !(normalizer > DENSITY_FLOOR) {
            return Err(Error::Underflow(format!(
                "survival probability {normalizer:e} at t = {t} is below the numeric floor"
            )));
        }
        Ok(ConditionedDensity {
            ke: self,
            t,
            x: x.to_vec(),
            normalizer,
        })
    }

    /// `p̃_t(x, y) = p_t(x, y) / ∫ p_t(x, z) dz`.
    pub fn conditioned_density(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.conditioned(t, x)?.density(y)
    }

    /// Transition density of Brownian motion conditioned to stay forever:
    /// `e^{λt} φ(y)/φ(x) p_t(x, y)`.
    pub fn h_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_args(t, x, y)?;
        let phi_x = self.spectral.phi(x);
        if phi_x < PHI_FLOOR {
            return Err(Error::NearBoundary(phi_x));
        }
        Ok(self.h_kernel_unchecked(t, x, y))
    }

    pub(crate) fn h_kernel_unchecked(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        self.axes
            .iter()
            .zip(x.iter().zip(y))
            .map(|(k, (&xi, &yi))| axis_h_kernel(k, t, xi, yi))
            .product()
    }

    /// Density in `y` of `B_{t1}` for the path started at `x`, conditioned to
    /// stay in the domain on `[0, t]` and pinned at `B_t = v`.
    pub fn bridge_marginal(&self, t: f64, t1: f64, x: &[f64], v: &[f64], y: &[f64]) -> Result<f64> {
        Self::check_time(t)?;
        if !(t1 > 0.0 && t1 < t) {
            return Err(Error::InvalidArgument(format!("need 0 < t1 < t, got t1 = {t1}, t = {t}")));
        }
        self.check_inside(x)?;
        self.check_inside(v)?;
        self.check_inside(y)?;
        let total = self.heat_kernel_unchecked(t, x, v);
        if !(total > DENSITY_FLOOR) {
            return Err(Error::Underflow(format!("p_t(x, v) = {total:e} below the numeric floor")));
        }
        Ok(self.heat_kernel_unchecked(t1, x, y) * self.heat_kernel_unchecked(t - t1, y, v) / total)
    }
}

/// Per-axis h-kernel. Uses the scaled series so large `t` does not underflow.
pub(crate) fn axis_h_kernel(k: &IntervalKernel, t: f64, x: f64, y: f64) -> f64 {
    let (sx, sy) = (
        (PI * (x - k.lo) / k.len).sin(),
        (PI * (y - k.lo) / k.len).sin(),
    );
    if sy <= 0.0 {
        return 0.0;
    }
    sy / sx * k.scaled_density(t, x, y)
}

impl IntervalKernel {
    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.len
    }

    pub fn len(&self) -> f64 {
        self.len
    }
}

/// `y ↦ p̃_t(x, y)` with a cached normalizer.
#[derive(Debug, Clone)]
pub struct ConditionedDensity<'a> {
    ke: &'a KernelEvaluator,
    t: f64,
    x: Vec<f64>,
    normalizer: f64,
}

impl ConditionedDensity<'_> {
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn density(&self, y: &[f64]) -> Result<f64> {
        self.ke.check_inside(y)?;
        Ok(self.ke.heat_kernel_unchecked(self.t, &self.x, y) / self.normalizer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::quadrature::simpson;

    fn unit() -> KernelEvaluator {
        KernelEvaluator::new(&DomainSpec::unit_interval())
    }

    fn interior_grid(m: usize) -> Vec<f64> {
        (1..=m).map(|i| i as f64 / (m + 1) as f64).collect()
    }

    #[test]
    fn symmetric_in_x_and_y() {
        let ke = unit();
        for &t in &[0.01, 0.1, 0.5, 2.0, 10.0] {
            for &x in &[0.1, 0.33, 0.8] {
                for &y in &[0.05, 0.5, 0.91] {
                    let a = ke.heat_kernel(t, &[x], &[y]).unwrap();
                    let b = ke.heat_kernel(t, &[y], &[x]).unwrap();
                    assert!((a - b).abs() <= 1e-14 * a.max(1.0), "t={t} x={x} y={y}");
                }
            }
        }
    }

    #[test]
    fn image_and_spectral_agree_at_diagonal() {
        let k = IntervalKernel::new(0.0, 1.0, 1e-14);
        let a = k.image(0.1, 0.5, 0.5);
        let b = k.spectral(0.1, 0.5, 0.5);
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn representations_agree_on_grid() {
        for (lo, hi) in [(0.0, 1.0), (-1.0, 2.0)] {
            let k = IntervalKernel::new(lo, hi, 1e-14);
            let pts: Vec<f64> = interior_grid(21).iter().map(|u| lo + u * (hi - lo)).collect();
            for &t in &[0.05, 0.1, 0.3, 1.0, 3.0, 7.0, 20.0] {
                for &x in &pts {
                    for &y in &pts {
                        let d = (k.image(t, x, y) - k.spectral(t, x, y)).abs();
                        assert!(d < 1e-13, "t={t} x={x} y={y} diff={d:e}");
                    }
                }
            }
        }
    }

    #[test]
    fn survival_series_matches_quadrature() {
        let ke = unit();
        let s = ke.survival(1.0, &[0.5]).unwrap();
        let q = ke.survival_quadrature(1.0, &[0.5]).unwrap();
        // odd-k series written out independently
        let mut oracle = 0.0;
        for k in (1..200).step_by(2) {
            let kf = k as f64;
            let sign = if (k - 1) / 2 % 2 == 0 { 1.0 } else { -1.0 };
            oracle += 4.0 / (kf * PI) * sign * (-kf * kf * PI * PI / 2.0).exp();
        }
        assert!(s > 0.0 && s < 1.0);
        assert!((s - oracle).abs() < 1e-14, "{s} vs {oracle}");
        assert!((q - oracle).abs() < 1e-10, "{q} vs {oracle}");
    }

    #[test]
    fn box_mass_matches_quadrature() {
        let ke = unit();
        let m = ke.box_mass(0.7, &[0.3], &[0.4], &[0.6]).unwrap();
        let q = simpson(|y| ke.heat_kernel(0.7, &[0.3], &[y]).unwrap(), 0.4, 0.6, 2048);
        assert!((m - q).abs() < 1e-12);
    }

    #[test]
    fn conditioned_density_normalizes() {
        let ke = unit();
        for &t in &[0.05, 1.0, 5.0] {
            for &x in &[0.1, 0.5, 0.85] {
                let c = ke.conditioned(t, &[x]).unwrap();
                let total = simpson_refined(|y| c.density(&[y]).unwrap_or(0.0), 0.0, 1.0);
                assert!((total - 1.0).abs() < 1e-8, "t={t} x={x} total={total}");
            }
        }
    }

    #[test]
    fn conditioned_density_long_time_limit() {
        let ke = unit();
        let v = ke.conditioned_density(10.0, &[0.5], &[0.5]).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn conditioned_density_vanishes_linearly() {
        let ke = unit();
        let c = ke.conditioned(5.0, &[0.5]).unwrap();
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&y| c.density(&[y]).unwrap() / y)
            .collect();
        // limit is (π/2)·π
        for r in &ratios {
            assert!(r.is_finite() && *r > 0.0);
        }
        assert!((ratios[2] - PI * PI / 2.0).abs() < 1e-3);
        assert!((ratios[1] - ratios[2]).abs() < 1e-4 * ratios[2] * 100.0);
    }

    #[test]
    fn conditioned_density_reports_underflow() {
        let ke = unit();
        assert!(matches!(ke.conditioned(400.0, &[0.5]), Err(Error::Underflow(_))));
    }

    #[test]
    fn h_kernel_integrates_to_one() {
        let ke = unit();
        for &t in &[0.1, 1.0, 5.0] {
            for x in interior_grid(9) {
                let total = simpson_refined(|y| if y <= 0.0 || y >= 1.0 { 0.0 } else { ke.h_kernel(t, &[x], &[y]).unwrap() }, 0.0, 1.0);
                assert!((total - 1.0).abs() < 1e-8, "t={t} x={x} total={total}");
            }
        }
    }

    #[test]
    fn h_kernel_long_time_limit_is_phi_squared() {
        let ke = unit();
        let mut worst: f64 = 0.0;
        for y in interior_grid(99) {
            let v = ke.h_kernel(10.0, &[0.5], &[y]).unwrap();
            let limit = 2.0 * (PI * y).sin().powi(2);
            worst = worst.max((v / limit - 1.0).abs());
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn h_kernel_small_time_is_gaussian_on_diagonal() {
        let ke = unit();
        let mut prev = f64::INFINITY;
        for &t in &[1e-2, 1e-3, 1e-4, 1e-5] {
            let ratio = ke.h_kernel(t, &[0.5], &[0.5]).unwrap() / gauss(0.0, t);
            let err = (ratio - 1.0).abs();
            assert!(err <= prev);
            prev = err;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn h_kernel_rejects_points_at_the_boundary() {
        let ke = unit();
        assert!(matches!(ke.h_kernel(1.0, &[1e-14], &[0.5]), Err(Error::NearBoundary(_))));
        assert!(ke.h_kernel(-1.0, &[0.5], &[0.5]).is_err());
        assert!(ke.h_kernel(1.0, &[0.5], &[1.5]).is_err());
    }

    #[test]
    fn h_kernel_does_not_underflow_at_large_time() {
        let ke = unit();
        let v = ke.h_kernel(500.0, &[0.3], &[0.5]).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rectangle_kernels_factorize() {
        let d = DomainSpec::rectangle(vec![(0.0, 1.0), (0.0, 2.0)]).unwrap();
        let ke = KernelEvaluator::new(&d);
        let kx = IntervalKernel::new(0.0, 1.0, 1e-14);
        let ky = IntervalKernel::new(0.0, 2.0, 1e-14);
        let (x, y) = ([0.3, 1.2], [0.6, 0.4]);
        let p = ke.heat_kernel(0.4, &x, &y).unwrap();
        assert!((p - kx.density(0.4, 0.3, 0.6) * ky.density(0.4, 1.2, 0.4)).abs() < 1e-15);
        let h = ke.h_kernel(0.4, &x, &y).unwrap();
        let e = ke.spectral();
        let direct = (e.lambda1 * 0.4).exp() * e.phi(&y) / e.phi(&x) * p;
        assert!((h / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bridge_marginal_normalizes_and_is_symmetric() {
        let ke = unit();
        let total = simpson_refined(
            |y| if y <= 0.0 || y >= 1.0 { 0.0 } else { ke.bridge_marginal(4.0, 1.0, &[0.3], &[0.7], &[y]).unwrap() },
            0.0,
            1.0,
        );
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        for u in [0.05, 0.2, 0.37, 0.49] {
            let a = ke.bridge_marginal(2.0, 1.0, &[0.5], &[0.5], &[0.5 + u]).unwrap();
            let b = ke.bridge_marginal(2.0, 1.0, &[0.5], &[0.5], &[0.5 - u]).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        assert!(ke.bridge_marginal(1.0, 1.0, &[0.5], &[0.5], &[0.5]).is_err());
        assert!(matches!(
            ke.bridge_marginal(500.0, 1.0, &[0.5], &[0.5], &[0.5]),
            Err(Error::Underflow(_))
        ));
    }

    #[test]
    fn eigenfunction_identity() {
        let ke = unit();
        let e = ke.spectral().clone();
        for &t in &[0.05, 0.3, 2.0, 8.0] {
            for x in interior_grid(9) {
                let q = simpson_refined(|y| ke.heat_kernel(t, &[x], &[y]).unwrap_or(0.0) * e.phi(&[y]), 0.0, 1.0);
                let ratio = (e.lambda1 * t).exp() * q / e.phi(&[x]);
                assert!((ratio - 1.0).abs() < 1e-8, "t={t} x={x} ratio={ratio}");
            }
        }
    }

    #[test]
    fn conditioned_density_bounds_with_unit_exponent() {
        let ke = unit();
        for &t in &[2.0, 4.0, 9.0] {
            for x in interior_grid(9) {
                let c = ke.conditioned(t, &[x]).unwrap();
                for y in interior_grid(99) {
                    let v = c.density(&[y]).unwrap();
                    let dist = y.min(1.0 - y);
                    assert!(dist <= v && v <= 2.0, "t={t} x={x} y={y} v={v}");
                }
            }
        }
    }
}
