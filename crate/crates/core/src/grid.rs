//! Uniform square grids and smooth compactly supported profiles on them.

use crate::error::{config, Error, Result};

/// `n × n` cells covering `[origin, origin + side]²`.
///
/// Values live at cell centres and are stored row-major: index `i * n + j`
/// is row `i` (the `x2` direction) and column `j` (the `x1` direction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceGrid {
    n: usize,
    side: f64,
    origin: [f64; 2],
}

impl SourceGrid {
    pub fn new(n: usize, side: f64, origin: [f64; 2]) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return config(format!("grid size must be a power of two >= 4, got {n}"));
        }
        if !(side > 0.0 && side.is_finite()) || !origin.iter().all(|v| v.is_finite()) {
            return config(format!("invalid box: side {side}, origin {origin:?}"));
        }
        Ok(Self { n, side, origin })
    }

    /// Box `[−side/2, side/2]²`.
    pub fn centered(n: usize, side: f64) -> Result<Self> {
        Self::new(n, side, [-0.5 * side, -0.5 * side])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [
            self.origin[0] + (j as f64 + 0.5) * h,
            self.origin[1] + (i as f64 + 0.5) * h,
        ]
    }

    pub fn center_of(&self, k: usize) -> [f64; 2] {
        self.center(k / self.n, k % self.n)
    }

    /// Whether `p` lies in the closed box.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|d| p[d] >= self.origin[d] && p[d] <= self.origin[d] + self.side)
    }

    /// Distance from `p` to the closed box (zero inside).
    pub fn distance_to_box(&self, p: [f64; 2]) -> f64 {
        let d: Vec<f64> = (0..2)
            .map(|k| {
                (self.origin[k] - p[k])
                    .max(p[k] - self.origin[k] - self.side)
                    .max(0.0)
            })
            .collect();
        d[0].hypot(d[1])
    }

    /// Evaluate `f` at every cell centre.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.center_of(k))).collect()
    }

    /// Same box, twice as many cells per side.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n,
            ..*self
        }
    }
}

/// `β(t) = exp(1 − 1/(1 − t²))` on `|t| < 1`, zero elsewhere; `β(0) = 1`.
pub fn bump1(t: f64) -> f64 {
    let q = 1.0 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / q).exp()
    }
}

/// `amplitude · β((x1−c1)/r1) β((x2−c2)/r2)`, smooth with rectangular support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: [f64; 2],
    pub radii: [f64; 2],
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: [f64; 2], radii: [f64; 2], amplitude: f64) -> Result<Self> {
        if !(radii[0] > 0.0 && radii[1] > 0.0)
            || !amplitude.is_finite()
            || !center.iter().all(|c| c.is_finite())
        {
            return config(format!(
                "invalid bump: center {center:?}, radii {radii:?}, amplitude {amplitude}"
            ));
        }
        Ok(Self {
            center,
            radii,
            amplitude,
        })
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.amplitude
            * bump1((p[0] - self.center[0]) / self.radii[0])
            * bump1((p[1] - self.center[1]) / self.radii[1])
    }
}

/// Row/column extent of the nonzero cells: `(i_min, i_max, j_min, j_max)`.
pub fn support_extent(values: &[f64], grid: &SourceGrid) -> Option<(usize, usize, usize, usize)> {
    let n = grid.n();
    let mut ext: Option<(usize, usize, usize, usize)> = None;
    for (k, v) in values.iter().enumerate() {
        if *v != 0.0 {
            let (i, j) = (k / n, k % n);
            ext = Some(match ext {
                None => (i, i, j, j),
                Some((a, b, c, d)) => (a.min(i), b.max(i), c.min(j), d.max(j)),
            });
        }
    }
    ext
}

/// Checks that nonzero values keep a collar of at least `collar` zero cells from the box edge.
pub fn check_collar(values: &[f64], grid: &SourceGrid, collar: usize, what: &str) -> Result<()> {
    if values.len() != grid.len() {
        let n = grid.n();
        return Err(Error::Input(format!(
            "{what}: {} values for a {n}x{n} grid",
            values.len()
        )));
    }
    if let Some((i0, i1, j0, j1)) = support_extent(values, grid) {
        let last = grid.n() - 1;
        if i0 < collar || j0 < collar || i1 + collar > last || j1 + collar > last {
            return config(format!(
                "{what} must vanish on a boundary collar of {collar} cells (support rows {i0}..={i1}, cols {j0}..={j1}, n = {})",
                grid.n()
            ));
        }
    }
    Ok(())
}

/// Largest distance between two support cell centres (bounding-box diagonal).
pub fn support_diameter(values: &[f64], grid: &SourceGrid) -> f64 {
    match support_extent(values, grid) {
        None => 0.0,
        Some((i0, i1, j0, j1)) => grid.h() * ((i1 - i0) as f64).hypot((j1 - j0) as f64),
    }
}
