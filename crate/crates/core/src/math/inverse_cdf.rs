//! Tabulated inverse-CDF sampling for unnormalized log-densities on `(0, ∞)`.

use rand::Rng;

use super::quadrature::{locate_support, to_u, QuadratureConfig, Transformed};
use crate::error::{Error, Result};

/// Largest deviation (nats) between the log-density and its chordal
/// interpolation that a cell may carry.
const MAX_MISFIT: f64 = 2e-3;
/// Cells lighter than this share of the total mass are never refined.
const NEGLIGIBLE_MASS: f64 = 1e-10;
const MAX_CELLS: usize = 200_000;
const INITIAL_CELLS: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Cell {
    t0: f64,
    t1: f64,
    g0: f64,
    g1: f64,
}

/// Immutable sampler built once from a log-density; cheap to share across threads.
///
/// Inside every cell the log-density (in the transformed variable) is
/// treated as linear, so each draw inverts a truncated exponential.
#[derive(Debug, Clone)]
pub struct InverseCdfSampler {
    cfg: QuadratureConfig,
    cells: Vec<Cell>,
    /// `cumulative[j]` is the probability of all cells before `j`; the last entry is 1.
    cumulative: Vec<f64>,
}

impl InverseCdfSampler {
    pub fn new<F>(log_density: F, cfg: &QuadratureConfig) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        cfg.validate()?;
        let vector = |u: f64, out: &mut [f64]| out[0] = log_density(u);
        let f = Transformed::new(&vector, cfg.transform);
        let (t_min, t_max) = match cfg.transform {
            super::Transform::LogSubstitution => (f64::NEG_INFINITY, f64::INFINITY),
            super::Transform::RationalSubstitution => (0.0, 1.0),
        };
        let support = locate_support(&f, 1, t_min, t_max, cfg)?;
        let peak = support.peaks[0];
        if peak == f64::NEG_INFINITY {
            return Err(Error::numeric("density vanishes everywhere"));
        }

        let eval = |t: f64| -> Result<f64> {
            let mut out = [0.0];
            f.eval(t, &mut out)?;
            Ok(out[0] - peak)
        };

        let width = (support.hi - support.lo) / INITIAL_CELLS as f64;
        let mut stack = Vec::with_capacity(INITIAL_CELLS);
        let mut left = eval(support.lo)?;
        for i in 0..INITIAL_CELLS {
            let t0 = support.lo + i as f64 * width;
            let t1 = if i + 1 == INITIAL_CELLS {
                support.hi
            } else {
                t0 + width
            };
            let right = eval(t1)?;
            stack.push(Cell {
                t0,
                t1,
                g0: left,
                g1: right,
            });
            left = right;
        }
        // rough scale for the negligible-mass test
        let rough_total: f64 = stack.iter().map(cell_mass).sum();
        if !(rough_total > 0.0) {
            return Err(Error::numeric("density has no resolvable mass"));
        }

        stack.reverse();
        let mut cells = Vec::new();
        while let Some(cell) = stack.pop() {
            if cells.len() + stack.len() > MAX_CELLS {
                return Err(Error::numeric("inverse-CDF table exceeded its size budget"));
            }
            let mid = 0.5 * (cell.t0 + cell.t1);
            let gm = eval(mid)?;
            let chord = 0.5 * (cell.g0 + cell.g1);
            let misfit = if gm.is_finite() && chord.is_finite() {
                (gm - chord).abs()
            } else if gm == f64::NEG_INFINITY && chord == f64::NEG_INFINITY {
                0.0
            } else {
                f64::INFINITY
            };
            let heavy = cell_mass(&cell).max((gm.exp()) * (cell.t1 - cell.t0))
                > NEGLIGIBLE_MASS * rough_total;
            let splittable = mid > cell.t0 && mid < cell.t1;
            if misfit > MAX_MISFIT && heavy && splittable {
                // push right first so cells come out in ascending order
                stack.push(Cell {
                    t0: mid,
                    t1: cell.t1,
                    g0: gm,
                    g1: cell.g1,
                });
                stack.push(Cell {
                    t0: cell.t0,
                    t1: mid,
                    g0: cell.g0,
                    g1: gm,
                });
            } else {
                cells.push(cell);
            }
        }

        let mut cumulative = Vec::with_capacity(cells.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for c in &cells {
            acc += cell_mass(c);
            cumulative.push(acc);
        }
        cumulative.iter_mut().for_each(|c| *c /= acc);
        Ok(InverseCdfSampler {
            cfg: *cfg,
            cells,
            cumulative,
        })
    }

    /// Map a uniform variate in `[0, 1)` to a draw.
    pub fn draw(&self, uniform: f64) -> f64 {
        let v = uniform.clamp(0.0, 1.0);
        let j = self
            .cumulative
            .partition_point(|c| *c <= v)
            .saturating_sub(1)
            .min(self.cells.len() - 1);
        let cell = &self.cells[j];
        let span = self.cumulative[j + 1] - self.cumulative[j];
        let r = if span > 0.0 {
            ((v - self.cumulative[j]) / span).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let t = invert_cell(cell, r);
        to_u(self.cfg.transform, t).0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw(rng.random::<f64>())
    }

    /// Tabulated CDF at `u`, consistent with `draw`.
    pub fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let t = super::quadrature::to_t(self.cfg.transform, u);
        let j = self.cells.partition_point(|c| c.t1 <= t);
        if j >= self.cells.len() {
            return 1.0;
        }
        let cell = &self.cells[j];
        if t <= cell.t0 {
            return self.cumulative[j];
        }
        let partial = Cell { t1: t, ..*cell };
        let fraction = if cell_mass(cell) > 0.0 {
            (exp_segment_mass(partial.t0, partial.t1, cell.g0, slope(cell)) / cell_mass(cell))
                .clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.cumulative[j] + fraction * (self.cumulative[j + 1] - self.cumulative[j])
    }

    pub fn cells(&self) -> usize {
        self.cells.len()
    }
}

fn slope(c: &Cell) -> f64 {
    if c.g0.is_finite() && c.g1.is_finite() {
        (c.g1 - c.g0) / (c.t1 - c.t0)
    } else {
        0.0
    }
}

/// ∫_{t0}^{t1} exp(g0 + s (t − t0)) dt
fn exp_segment_mass(t0: f64, t1: f64, g0: f64, s: f64) -> f64 {
    let h = t1 - t0;
    let x = s * h;
    if x.abs() < 1e-12 {
        g0.exp() * h
    } else {
        g0.exp() * x.exp_m1() / s
    }
}

fn cell_mass(c: &Cell) -> f64 {
    match (c.g0.is_finite(), c.g1.is_finite()) {
        (true, true) => exp_segment_mass(c.t0, c.t1, c.g0, slope(c)),
        (true, false) => 0.5 * c.g0.exp() * (c.t1 - c.t0),
        (false, true) => 0.5 * c.g1.exp() * (c.t1 - c.t0),
        (false, false) => 0.0,
    }
}

fn invert_cell(c: &Cell, r: f64) -> f64 {
    let h = c.t1 - c.t0;
    let s = slope(c);
    let x = s * h;
    if !(c.g0.is_finite() && c.g1.is_finite()) || x.abs() < 1e-12 {
        return c.t0 + r * h;
    }
    // solve (e^{s τ} − 1) / (e^{s h} − 1) = r for τ
    let tau = if x > 0.0 {
        // work from the right edge to avoid overflow of e^{x}
        let y = -x;
        h + (r + (1.0 - r) * y.exp()).ln() / s
    } else {
        (r * x.exp_m1()).ln_1p() / s
    };
    c.t0 + tau.clamp(0.0, h)
}
