use serde::{Deserialize, Serialize};

/// Particle `particle` carries the lineage on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSegment {
    pub start: f64,
    pub end: f64,
    pub particle: usize,
}

/// A path sampled on a time grid, with the particles that carried it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineagePath {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
    carrier: Vec<CarrierSegment>,
}

impl LineagePath {
    /// `values` is row-major, `dim` coordinates per time.
    pub fn new(times: Vec<f64>, dim: usize, values: Vec<f64>, carrier: Vec<CarrierSegment>) -> Self {
        assert_eq!(times.len() * dim, values.len(), "values do not match the time grid");
        Self {
            times,
            dim,
            values,
            carrier,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn carrier(&self) -> &[CarrierSegment] {
        &self.carrier
    }

    /// Index of the last grid time `<= t` (with a relative slack of 1e-9).
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let slack = 1e-9 * t.abs().max(1.0);
        let k = self.times.partition_point(|&s| s <= t + slack);
        k.checked_sub(1)
    }

    pub fn value_at(&self, t: f64) -> Option<&[f64]> {
        self.index_at(t).map(|i| self.value(i))
    }

    /// Particle carrying the path at time `s`; at a switch time the later
    /// carrier wins.
    pub fn carrier_at(&self, s: f64) -> Option<usize> {
        self.carrier
            .iter()
            .rev()
            .find(|c| c.start <= s && s <= c.end)
            .map(|c| c.particle)
    }

    /// Carrier just before `s`.
    pub fn carrier_before(&self, s: f64) -> Option<usize> {
        self.carrier
            .iter()
            .find(|c| c.start < s && s <= c.end)
            .or_else(|| self.carrier.first().filter(|c| c.start == s))
            .map(|c| c.particle)
    }

    /// Same times and carriers with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self::new(self.times.clone(), self.dim, values, self.carrier.clone())
    }

    /// The part of the path on `[0, t_end]`.
    pub fn restrict(&self, t_end: f64) -> Self {
        let keep = self.index_at(t_end).map_or(0, |i| i + 1);
        let carrier = self
            .carrier
            .iter()
            .filter(|c| c.start <= t_end)
            .map(|c| CarrierSegment {
                end: c.end.min(t_end),
                ..*c
            })
            .collect();
        Self::new(
            self.times[..keep].to_vec(),
            self.dim,
            self.values[..keep * self.dim].to_vec(),
            carrier,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LineagePath {
        LineagePath::new(
            vec![0.0, 0.5, 1.0, 1.5],
            1,
            vec![0.1, 0.2, 0.3, 0.4],
            vec![
                CarrierSegment {
                    start: 0.0,
                    end: 0.7,
                    particle: 3,
                },
                CarrierSegment {
                    start: 0.7,
                    end: 1.5,
                    particle: 1,
                },
            ],
        )
    }

    #[test]
    fn lookup() {
        let p = sample();
        assert_eq!(p.value_at(0.99), Some(&[0.2][..]));
        assert_eq!(p.value_at(1.0), Some(&[0.3][..]));
        assert_eq!(p.value_at(-0.1), None);
        assert_eq!(p.carrier_at(0.7), Some(1));
        assert_eq!(p.carrier_before(0.7), Some(3));
        assert_eq!(p.carrier_before(0.0), Some(3));
        assert_eq!(p.carrier_at(2.0), None);
    }

    #[test]
    fn restrict_clips_grid_and_carrier() {
        let r = sample().restrict(0.6);
        assert_eq!(r.times(), &[0.0, 0.5]);
        assert_eq!(r.carrier().len(), 1);
        assert_eq!(r.carrier()[0].end, 0.6);
    }

    #[test]
    #[should_panic]
    fn shape_mismatch_panics() {
        LineagePath::new(vec![0.0, 1.0], 2, vec![0.0; 3], vec![]);
    }
}
