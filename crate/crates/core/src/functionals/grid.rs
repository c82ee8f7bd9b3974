use alloc::format;

use crate::{Error, Result};

/// Uniform radial grid `r_i = i * h`, `i = 0..=n`, `h = r_max / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
}

impl RadialGrid {
    pub const MIN_INTERVALS: usize = 16;

    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::invalid(format!("r_max = {r_max} must be positive")));
        }
        if n < Self::MIN_INTERVALS {
            return Err(Error::invalid(format!(
                "n = {n} must be at least {}",
                Self::MIN_INTERVALS
            )));
        }
        Ok(RadialGrid { r_max, n })
    }

    /// Grid used for stationary solves.
    pub fn stationary() -> Self {
        RadialGrid {
            r_max: 50.0,
            n: 8192,
        }
    }

    /// Grid used for time evolution.
    pub fn dynamics() -> Self {
        RadialGrid {
            r_max: 64.0,
            n: 4096,
        }
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.r_max
        } else {
            i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.node(i))
    }

    /// Same extent, every other node. `None` when `n` is odd or too small.
    pub fn coarsened(&self) -> Option<Self> {
        (self.n.is_multiple_of(2) && self.n / 2 >= Self::MIN_INTERVALS).then_some(RadialGrid {
            r_max: self.r_max,
            n: self.n / 2,
        })
    }

    /// Same extent, `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        RadialGrid {
            r_max: self.r_max,
            n: self.n * factor.max(1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_cover_the_interval() {
        let g = RadialGrid::new(10.0, 16).unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(16), 10.0);
        let nodes: alloc::vec::Vec<f64> = g.nodes().collect();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(RadialGrid::new(10.0, 15).is_err());
        assert!(RadialGrid::new(0.0, 64).is_err());
        assert!(RadialGrid::new(f64::INFINITY, 64).is_err());
    }
}
