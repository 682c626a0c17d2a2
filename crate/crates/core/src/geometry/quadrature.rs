//! Composite Simpson quadrature.

pub const DEFAULT_PANELS: usize = 2048;
pub const REFINE_RTOL: f64 = 1e-9;
const MAX_PANELS: usize = 1 << 20;

/// Composite Simpson rule with `panels` subintervals (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// Simpson on [`DEFAULT_PANELS`] panels, doubled until the relative change
/// drops below [`REFINE_RTOL`].
pub fn simpson_refined<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let mut panels = DEFAULT_PANELS;
    let mut prev = simpson(&f, a, b, panels);
    while panels < MAX_PANELS {
        panels *= 2;
        let next = simpson(&f, a, b, panels);
        let scale = next.abs().max(f64::MIN_POSITIVE);
        if (next - prev).abs() <= REFINE_RTOL * scale {
            return next;
        }
        prev = next;
    }
    prev
}

/// Simpson nodes and weights on `[a, b]`.
pub fn simpson_rule(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let nodes = (0..=n).map(|i| a + i as f64 * h).collect();
    let weights = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Tensor-product Simpson over a box for a function given by its values on
/// the tensor grid, enumerated with the last axis fastest.
pub fn tensor_simpson<F: FnMut(&[f64]) -> f64>(bounds: &[(f64, f64)], panels: usize, mut f: F) -> f64 {
    let rules: Vec<(Vec<f64>, Vec<f64>)> = bounds
        .iter()
        .map(|&(a, b)| simpson_rule(a, b, panels))
        .collect();
    let dims: Vec<usize> = rules.iter().map(|r| r.0.len()).collect();
    let total: usize = dims.iter().product();
    let mut idx = vec![0usize; bounds.len()];
    let mut point = vec![0.0; bounds.len()];
    let mut sum = 0.0;
    for _ in 0..total {
        let mut w = 1.0;
        for (axis, &i) in idx.iter().enumerate() {
            point[axis] = rules[axis].0[i];
            w *= rules[axis].1[i];
        }
        sum += w * f(&point);
        for axis in (0..idx.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < dims[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn refined_sine() {
        let v = simpson_refined(f64::sin, 0.0, std::f64::consts::PI);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_matches_product() {
        let v = tensor_simpson(&[(0.0, 1.0), (0.0, 2.0)], 64, |p| p[0] * p[0] * p[1]);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }
}
