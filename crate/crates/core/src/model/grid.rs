use crate::error::{Error, Result};

/// Equally spaced dyadic points `(first + j) * 2^-g` for `j < count`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicGrid {
    g: u32,
    first: i64,
    count: usize,
}

/// `H_g ∩ [0, 1)`: the `2^g` points `j / 2^g`.
pub fn dyadic_grid(g: u32) -> Result<DyadicGrid> {
    if g > 40 {
        return Err(Error::arg("g", format!("grid exponent {g} too large")));
    }
    Ok(DyadicGrid {
        g,
        first: 0,
        count: 1usize << g,
    })
}

impl DyadicGrid {
    /// The points of `H_g` within `radius` of `center`, where `center` must
    /// itself lie on `H_g`.
    pub fn window(g: u32, center: f64, radius: f64) -> Result<DyadicGrid> {
        let step = (-(g as f64)).exp2();
        let c = center / step;
        if (c - c.round()).abs() > 1e-9 {
            return Err(Error::arg("center", format!("{center} is not on H_{g}")));
        }
        let half = (radius / step + 1e-9).floor() as i64;
        Ok(DyadicGrid {
            g,
            first: c.round() as i64 - half,
            count: (2 * half + 1) as usize,
        })
    }

    pub fn g(&self) -> u32 {
        self.g
    }

    pub fn spacing(&self) -> f64 {
        (-(self.g as f64)).exp2()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn point(&self, j: usize) -> f64 {
        (self.first + j as i64) as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.point(j)).collect()
    }

    /// Restrict to the points `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> DyadicGrid {
        DyadicGrid {
            g: self.g,
            first: self.first + start as i64,
            count: len.min(self.count.saturating_sub(start)),
        }
    }
}
