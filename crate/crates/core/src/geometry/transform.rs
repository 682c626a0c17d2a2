use crate::error::{Error, Result};
use crate::genealogy::LineagePath;

/// Pulls a one-dimensional path on `D = x(U)` back to `U` for the map
/// `x(u) = u^a`, i.e. applies `u = x^{1/a}` pointwise. Time stamps and
/// carriers are kept.
pub fn pullback_path(path: &LineagePath, a: f64) -> Result<LineagePath> {
    if !(a >= 1.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent a must be >= 1, got {a}")));
    }
    if path.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: path.dim(),
        });
    }
    let inv = 1.0 / a;
    let mut values = Vec::with_capacity(path.values().len());
    for &v in path.values() {
        if !(v > 0.0) {
            return Err(Error::InvalidArgument(format!("nonpositive path value {v}")));
        }
        values.push(if a == 1.0 { v } else { v.powf(inv) });
    }
    Ok(path.with_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genealogy::CarrierSegment;

    fn constant(v: f64) -> LineagePath {
        LineagePath::new(
            vec![0.0, 0.5, 1.0],
            1,
            vec![v; 3],
            vec![CarrierSegment { start: 0.0, end: 1.0, particle: 0 }],
        )
    }

    #[test]
    fn unit_exponent_is_identity() {
        let p = LineagePath::new(
            vec![0.0, 0.1, 0.2],
            1,
            vec![0.31, 0.27, 0.9],
            vec![CarrierSegment { start: 0.0, end: 0.2, particle: 3 }],
        );
        assert_eq!(pullback_path(&p, 1.0).unwrap(), p);
    }

    #[test]
    fn square_root_of_constant() {
        let q = pullback_path(&constant(0.25), 2.0).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.5));
        assert_eq!(q.times(), constant(0.25).times());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pullback_path(&constant(0.0), 2.0).is_err());
        assert!(pullback_path(&constant(0.3), 0.5).is_err());
    }
}
