//! Cell-centered tensor grids.
//!
//! Axis `a` is split into `(max - min) / spacing` cells; cell `i` covers
//! `[min + i*h, min + (i+1)*h)` and is represented by its center. Flat indices
//! are row-major with axis 0 varying slowest. Angular axes are given in degrees
//! and converted to radians wherever derivatives are taken.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub spacing: f64,
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub angular: bool,
}

impl Axis {
    pub fn linear(min: f64, max: f64, spacing: f64) -> Self {
        Axis { min, max, spacing, periodic: false, angular: false }
    }

    /// A periodic angular axis in degrees.
    pub fn angle(min: f64, max: f64, spacing: f64) -> Self {
        Axis { min, max, spacing, periodic: true, angular: true }
    }

    fn validate(&self) -> Result<usize> {
        if !(self.min.is_finite() && self.max.is_finite() && self.spacing.is_finite()) {
            return Err(Error::InvalidGrid("non-finite axis bounds".into()));
        }
        if self.spacing <= 0.0 {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {}", self.spacing)));
        }
        if self.max <= self.min {
            return Err(Error::InvalidGrid(format!("max {} must exceed min {}", self.max, self.min)));
        }
        let ratio = (self.max - self.min) / self.spacing;
        let cells = ratio.round();
        if (ratio - cells).abs() > 1e-9 * ratio.max(1.0) || cells < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "extent {} is not an integer multiple of spacing {}",
                self.max - self.min,
                self.spacing
            )));
        }
        Ok(cells as usize)
    }

    /// Factor converting native axis units to the units used for derivatives.
    pub fn metric_scale(&self) -> f64 {
        if self.angular {
            std::f64::consts::PI / 180.0
        } else {
            1.0
        }
    }

    pub fn metric_spacing(&self) -> f64 {
        self.spacing * self.metric_scale()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.spacing
    }

    pub fn period(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<Axis>,
    counts: Vec<usize>,
    strides: Vec<usize>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        let counts = axes.iter().map(Axis::validate).collect::<Result<Vec<_>>>()?;
        let mut strides = vec![1; counts.len()];
        for a in (0..counts.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        Ok(GridSpec { axes, counts, strides })
    }

    /// Square 2D grid `[min, max]^2`.
    pub fn square(min: f64, max: f64, spacing: f64) -> Result<Self> {
        GridSpec::new(vec![Axis::linear(min, max, spacing), Axis::linear(min, max, spacing)])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn coord(&self, index: usize, axis: usize) -> usize {
        (index / self.strides[axis]) % self.counts[axis]
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.coord(index, a)).collect()
    }

    /// Face neighbor along `axis` in direction `dir` (±1). Periodic axes wrap;
    /// returns `None` past the edge of a non-periodic axis.
    pub fn neighbor(&self, index: usize, axis: usize, dir: isize) -> Option<usize> {
        let n = self.counts[axis];
        let c = self.coord(index, axis);
        let stride = self.strides[axis];
        match dir {
            1 if c + 1 < n => Some(index + stride),
            1 if self.axes[axis].periodic => Some(index + stride - (n * stride)),
            -1 if c > 0 => Some(index - stride),
            -1 if self.axes[axis].periodic => Some(index + (n - 1) * stride),
            1 | -1 => None,
            _ => panic!("neighbor direction must be +1 or -1"),
        }
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.axes[a].center(self.coord(index, a))).collect()
    }

    /// True for cells in the outermost layer of any non-periodic axis.
    pub fn is_boundary(&self, index: usize) -> bool {
        (0..self.dim()).any(|a| {
            let c = self.coord(index, a);
            !self.axes[a].periodic && (c == 0 || c + 1 == self.counts[a])
        })
    }

    /// Wraps periodic components into `[min, max)`.
    pub fn wrap(&self, x: &mut [f64]) {
        for (xa, axis) in x.iter_mut().zip(&self.axes) {
            if axis.periodic {
                *xa = axis.min + (*xa - axis.min).rem_euclid(axis.period());
            }
        }
    }

    /// Cell containing the continuous point `x`, or `None` outside the domain.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut index = 0;
        for (a, axis) in self.axes.iter().enumerate() {
            let mut u = (x[a] - axis.min) / axis.spacing;
            if axis.periodic {
                u = u.rem_euclid(self.counts[a] as f64);
            }
            if !u.is_finite() || u < 0.0 {
                return None;
            }
            let mut c = u.floor() as usize;
            if c >= self.counts[a] {
                if axis.periodic || x[a] <= axis.max {
                    c = self.counts[a] - 1;
                } else {
                    return None;
                }
            }
            index += c * self.strides[a];
        }
        Some(index)
    }

    pub fn min_metric_spacing(&self) -> f64 {
        self.axes.iter().map(Axis::metric_spacing).fold(f64::INFINITY, f64::min)
    }
}
