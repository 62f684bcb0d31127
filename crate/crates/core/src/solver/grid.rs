use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[-L, L]` with an odd number of points, so `x = 0` is a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    nx: usize,
}

impl Grid {
    pub fn new(half_width: f64, nx: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(
                "half_width",
                format!("L must be > 0, got {half_width}"),
            ));
        }
        if nx < 3 || nx.is_multiple_of(2) {
            return Err(Error::invalid(
                "nx",
                format!("need an odd count >= 3, got {nx}"),
            ));
        }
        Ok(Grid { half_width, nx })
    }

    /// Grid on `[-L, L]` with spacing as close to `dx` as an odd count allows.
    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::invalid("dx", format!("must be > 0, got {dx}")));
        }
        let half = (half_width / dx).round().max(1.0) as usize;
        Grid::new(half_width, 2 * half + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.nx
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.nx - 1) as f64
    }

    pub fn center_index(&self) -> usize {
        (self.nx - 1) / 2
    }

    /// `x_i`, exactly antisymmetric about the center node.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center_index() as f64) * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let k = (x / self.dx()).round() + self.center_index() as f64;
        k.clamp(0.0, (self.nx - 1) as f64) as usize
    }
}

/// Finite samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "values",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                x: grid.x(index),
                t: f64::NAN,
            });
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Field { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        Field { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![0.0; grid.len()];
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation, constant extension outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let dx = self.grid.dx();
        let s = x / dx + self.grid.center_index() as f64;
        if s <= 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        if s >= last as f64 {
            return self.values[last];
        }
        let k = s.floor() as usize;
        let w = s - k as f64;
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_or_tiny_counts() {
        assert!(Grid::new(1.0, 4).is_err());
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(0.0, 5).is_err());
        assert!(Grid::new(1.0, 3).is_ok());
    }

    #[test]
    fn nodes_are_symmetric_with_zero_center() {
        let g = Grid::new(40.0, 4001).unwrap();
        assert_eq!(g.dx(), 0.02);
        assert_eq!(g.x(g.center_index()), 0.0);
        assert_eq!(g.x(0), -40.0);
        assert_eq!(g.x(4000), 40.0);
        for i in 0..g.len() {
            assert_eq!(g.x(i), -g.x(g.len() - 1 - i));
        }
        assert_eq!(g.nearest_index(0.011), g.center_index() + 1);
    }

    #[test]
    fn spacing_constructor_rounds_to_odd_count() {
        let g = Grid::with_spacing(40.0, 0.02).unwrap();
        assert_eq!(g.len(), 4001);
    }

    #[test]
    fn field_validates_values() {
        let g = Grid::new(1.0, 3).unwrap();
        assert!(Field::new(g.clone(), vec![0.0, 1.0]).is_err());
        match Field::new(g.clone(), vec![0.0, f64::NAN, 1.0]) {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        let f = Field::new(g, vec![1.0, 3.0, 5.0]).unwrap();
        assert_eq!(f.interpolate(0.5), 4.0);
        assert_eq!(f.interpolate(-7.0), 1.0);
        assert_eq!(f.max_abs(), 5.0);
    }
}
