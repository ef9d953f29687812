//! Adaptive Gauss–Kronrod quadrature of log-densities on the positive half-line.
//!
//! Integrands are supplied as `u ↦ ln f(u)`. The half-line is mapped to a
//! finite or bi-infinite `t` range, the bulk of the integrand is located by a
//! deterministic scan, and a G7/K15 pair is refined by bisection. Every sum is
//! carried relative to the peak of the (transformed) integrand, so results never
//! overflow even when `f` spans hundreds of orders of magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Change of variables used to map `(0, ∞)` onto the integration domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `u = eᵗ`, `t ∈ ℝ`.
    LogSubstitution,
    /// `u = t / (1 − t)`, `t ∈ (0, 1)`.
    RationalSubstitution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Target relative error of the integral on the linear scale.
    pub relative_tolerance: f64,
    /// Natural log of an absolute error floor, measured in units of the
    /// integrand's peak value.
    pub absolute_log_tolerance: f64,
    pub max_subdivisions: usize,
    pub transform: Transform,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            relative_tolerance: 1e-9,
            absolute_log_tolerance: -80.0,
            max_subdivisions: 2048,
            transform: Transform::LogSubstitution,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance <= 1e-3) {
            return Err(Error::usage(format!(
                "relative_tolerance must lie in (0, 1e-3], got {}",
                self.relative_tolerance
            )));
        }
        if self.max_subdivisions < 16 {
            return Err(Error::usage(format!(
                "max_subdivisions must be at least 16, got {}",
                self.max_subdivisions
            )));
        }
        if self.absolute_log_tolerance.is_nan() {
            return Err(Error::usage("absolute_log_tolerance is NaN"));
        }
        Ok(())
    }

    /// Number of nats below the peak at which the integrand is treated as negligible.
    pub(crate) fn cutoff(&self) -> f64 {
        40.0 - self.relative_tolerance.ln()
    }
}

// 15-point Kronrod abscissae and weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Largest |t| explored under the log substitution (u up to e^700).
const LOG_T_LIMIT: f64 = 700.0;
const INITIAL_PIECES: usize = 32;

/// Integrand in the transformed variable: writes `ln f(u(t)) + ln |du/dt|`
/// for every component into `out`.
pub(crate) struct Transformed<'a, F> {
    log_f: &'a F,
    transform: Transform,
}

impl<'a, F> Transformed<'a, F>
where
    F: Fn(f64, &mut [f64]),
{
    pub(crate) fn new(log_f: &'a F, transform: Transform) -> Self {
        Transformed { log_f, transform }
    }

    pub(crate) fn eval(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (u, log_jac) = to_u(self.transform, t);
        if !(u > 0.0) || !u.is_finite() {
            out.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            return Ok(());
        }
        (self.log_f)(u, out);
        for v in out.iter_mut() {
            if v.is_nan() {
                return Err(Error::numeric(format!("log-density is NaN at u = {u}")));
            }
            if *v == f64::INFINITY {
                return Err(Error::numeric(format!("log-density is +inf at u = {u}")));
            }
            *v += log_jac;
        }
        Ok(())
    }
}

/// Map `t` to `(u, ln du/dt)`.
#[inline]
pub(crate) fn to_u(transform: Transform, t: f64) -> (f64, f64) {
    match transform {
        Transform::LogSubstitution => (t.exp(), t),
        Transform::RationalSubstitution => {
            let one_minus = 1.0 - t;
            (t / one_minus, -2.0 * one_minus.ln())
        }
    }
}

#[inline]
pub(crate) fn to_t(transform: Transform, u: f64) -> f64 {
    match transform {
        Transform::LogSubstitution => {
            if u <= 0.0 {
                f64::NEG_INFINITY
            } else {
                u.ln()
            }
        }
        Transform::RationalSubstitution => {
            if u == f64::INFINITY {
                1.0
            } else {
                u / (1.0 + u)
            }
        }
    }
}

/// The `t` range that carries all non-negligible mass, together with the
/// per-component peak log values used as scale shifts.
#[derive(Debug, Clone)]
pub(crate) struct Support {
    pub lo: f64,
    pub hi: f64,
    pub peaks: Vec<f64>,
}

/// Locate the bulk of every component inside the domain `[t_min, t_max]`.
pub(crate) fn locate_support<F>(
    f: &Transformed<'_, F>,
    dim: usize,
    t_min: f64,
    t_max: f64,
    cfg: &QuadratureConfig,
) -> Result<Support>
where
    F: Fn(f64, &mut [f64]),
{
    let cutoff = cfg.cutoff();
    let (scan_lo, scan_hi, n_scan) = match cfg.transform {
        Transform::LogSubstitution => {
            let lo = t_min.max(-40.0);
            let hi = t_max.min(40.0);
            let (lo, hi) = if lo < hi {
                (lo, hi)
            } else {
                // the whole domain lies outside the default window
                (t_min.max(-LOG_T_LIMIT), t_max.min(LOG_T_LIMIT))
            };
            let n = (((hi - lo) / 0.25).ceil() as usize).clamp(16, 640);
            (lo, hi, n)
        }
        Transform::RationalSubstitution => (t_min.max(0.0), t_max.min(1.0), 512),
    };
    if !(scan_lo < scan_hi) {
        return Err(Error::usage(format!(
            "empty integration range [{t_min}, {t_max}]"
        )));
    }

    // Open grid: endpoints of the rational map are singular.
    let h = (scan_hi - scan_lo) / n_scan as f64;
    let mut grid: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n_scan);
    let mut buf = vec![0.0; dim];
    for i in 0..n_scan {
        let t = scan_lo + (i as f64 + 0.5) * h;
        f.eval(t, &mut buf)?;
        grid.push((t, buf.clone()));
    }
    let mut peaks = vec![f64::NEG_INFINITY; dim];
    for (_, vals) in &grid {
        for (p, v) in peaks.iter_mut().zip(vals) {
            *p = p.max(*v);
        }
    }

    let significant = |vals: &[f64], peaks: &[f64]| {
        vals.iter()
            .zip(peaks)
            .any(|(v, p)| *p > f64::NEG_INFINITY && *v > p - cutoff)
    };

    let first = grid.iter().position(|(_, v)| significant(v, &peaks));
    let Some(first) = first else {
        // every component vanishes on the grid
        return Ok(Support {
            lo: scan_lo,
            hi: scan_hi,
            peaks,
        });
    };
    let last = grid
        .iter()
        .rposition(|(_, v)| significant(v, &peaks))
        .unwrap_or(first);

    let mut lo = if first == 0 {
        scan_lo
    } else {
        grid[first - 1].0
    };
    let mut hi = if last + 1 == grid.len() {
        scan_hi
    } else {
        grid[last + 1].0
    };

    if cfg.transform == Transform::LogSubstitution {
        if first == 0 && scan_lo > t_min {
            lo = extend(f, &mut peaks, grid[0].0, -1.0, t_min, cutoff)?;
        }
        if last + 1 == grid.len() && scan_hi < t_max {
            hi = extend(f, &mut peaks, grid[grid.len() - 1].0, 1.0, t_max, cutoff)?;
        }
    }
    Ok(Support { lo, hi, peaks })
}

/// Walk outward from `start` with growing steps until every component has
/// decayed `cutoff` nats below its peak, or the domain bound is hit.
fn extend<F>(
    f: &Transformed<'_, F>,
    peaks: &mut [f64],
    start: f64,
    direction: f64,
    bound: f64,
    cutoff: f64,
) -> Result<f64>
where
    F: Fn(f64, &mut [f64]),
{
    let mut t = start;
    let mut step = 0.5;
    let mut buf = vec![0.0; peaks.len()];
    loop {
        let next = t + direction * step;
        let clipped = if direction < 0.0 {
            next.max(bound)
        } else {
            next.min(bound)
        };
        if clipped.abs() > LOG_T_LIMIT {
            return Err(Error::numeric(
                "integrand does not decay on the half-line (not integrable or too heavy-tailed)",
            ));
        }
        t = clipped;
        f.eval(t, &mut buf)?;
        let mut alive = false;
        for (p, v) in peaks.iter_mut().zip(&buf) {
            if *v > *p {
                *p = *v;
            }
            if *p > f64::NEG_INFINITY && *v > *p - cutoff {
                alive = true;
            }
        }
        if !alive || t == bound {
            return Ok(t);
        }
        step *= 1.25;
    }
}

#[derive(Debug, Clone)]
struct Piece {
    a: f64,
    b: f64,
    kronrod: Vec<f64>,
    error: Vec<f64>,
}

fn gauss_kronrod<F>(
    f: &Transformed<'_, F>,
    peaks: &[f64],
    a: f64,
    b: f64,
    buf: &mut [f64],
) -> Result<Piece>
where
    F: Fn(f64, &mut [f64]),
{
    let dim = peaks.len();
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut accumulate = |t: f64, wk: f64, wg: f64, buf: &mut [f64]| -> Result<()> {
        f.eval(t, buf)?;
        for k in 0..dim {
            if peaks[k] == f64::NEG_INFINITY {
                continue;
            }
            let v = (buf[k] - peaks[k]).exp();
            kronrod[k] += wk * v;
            gauss[k] += wg * v;
        }
        Ok(())
    };
    accumulate(centre, WGK[7], WG[3], buf)?;
    for j in 0..7 {
        let dx = half * XGK[j];
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        accumulate(centre - dx, WGK[j], wg, buf)?;
        accumulate(centre + dx, WGK[j], wg, buf)?;
    }
    let error = kronrod
        .iter()
        .zip(&gauss)
        .map(|(k, g)| (k - g).abs() * half)
        .collect();
    kronrod.iter_mut().for_each(|k| *k *= half);
    Ok(Piece {
        a,
        b,
        kronrod,
        error,
    })
}

/// Adaptive integration of every component over `[lo, hi]` in `t`,
/// returning natural logs of the integrals.
pub(crate) fn adaptive<F>(
    f: &Transformed<'_, F>,
    support: &Support,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    let dim = support.peaks.len();
    let peaks = &support.peaks;
    let mut buf = vec![0.0; dim];
    let width = (support.hi - support.lo) / INITIAL_PIECES as f64;
    let mut pieces = Vec::with_capacity(cfg.max_subdivisions);
    for i in 0..INITIAL_PIECES {
        let a = support.lo + i as f64 * width;
        let b = if i + 1 == INITIAL_PIECES {
            support.hi
        } else {
            a + width
        };
        pieces.push(gauss_kronrod(f, peaks, a, b, &mut buf)?);
    }
    let floor = cfg.absolute_log_tolerance.exp();

    loop {
        let mut totals = vec![0.0; dim];
        let mut errors = vec![0.0; dim];
        for p in &pieces {
            for k in 0..dim {
                totals[k] += p.kronrod[k];
                errors[k] += p.error[k];
            }
        }
        let tolerances: Vec<f64> = totals
            .iter()
            .map(|t| (cfg.relative_tolerance * t).max(floor))
            .collect();
        let converged = errors.iter().zip(&tolerances).all(|(e, tol)| e <= tol);
        let finish = |totals: &[f64]| -> Vec<f64> {
            totals
                .iter()
                .zip(peaks)
                .map(|(t, p)| {
                    if *t > 0.0 && *p > f64::NEG_INFINITY {
                        t.ln() + p
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect()
        };
        if converged {
            return Ok(finish(&totals));
        }
        if pieces.len() >= cfg.max_subdivisions {
            let partial = finish(&totals);
            return Err(Error::Numeric {
                message: format!(
                    "quadrature did not converge within {} subdivisions",
                    cfg.max_subdivisions
                ),
                partial_log: partial.first().copied(),
            });
        }

        // Bisect the piece contributing the largest share of any component's error budget.
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let score = p
                    .error
                    .iter()
                    .zip(&tolerances)
                    .map(|(e, tol)| e / tol)
                    .fold(0.0, f64::max);
                (i, score)
            })
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        let piece = pieces.swap_remove(worst);
        let mid = 0.5 * (piece.a + piece.b);
        if !(mid > piece.a && mid < piece.b) {
            return Err(Error::Numeric {
                message: "quadrature interval collapsed below machine resolution".into(),
                partial_log: finish(&totals).first().copied(),
            });
        }
        pieces.push(gauss_kronrod(f, peaks, piece.a, mid, &mut buf)?);
        pieces.push(gauss_kronrod(f, peaks, mid, piece.b, &mut buf)?);
        // keep order deterministic and independent of swap_remove history
        pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    }
}

fn domain(transform: Transform, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(lo >= 0.0) || !(hi > lo) {
        return Err(Error::usage(format!(
            "invalid integration range [{lo}, {hi}]"
        )));
    }
    Ok((to_t(transform, lo), to_t(transform, hi)))
}

/// `ln ∫₀^∞ exp(log_f(u)) du`.
pub fn integrate_log_density<F>(log_f: F, cfg: &QuadratureConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_log_density_between(log_f, 0.0, f64::INFINITY, cfg)
}

/// `ln ∫_lo^hi exp(log_f(u)) du` for `0 ≤ lo < hi ≤ ∞`.
pub fn integrate_log_density_between<F>(
    log_f: F,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let vector = |u: f64, out: &mut [f64]| out[0] = log_f(u);
    Ok(integrate_log_density_many(1, vector, lo, hi, cfg)?[0])
}

/// Integrate `dim` log-densities sharing one set of nodes. `log_f(u, out)`
/// writes the `dim` values at `u`. Each component meets the relative
/// tolerance against its own integral.
pub fn integrate_log_density_many<F>(
    dim: usize,
    log_f: F,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    cfg.validate()?;
    if dim == 0 {
        return Ok(Vec::new());
    }
    let (t_min, t_max) = domain(cfg.transform, lo, hi)?;
    let f = Transformed::new(&log_f, cfg.transform);
    let support = locate_support(&f, dim, t_min, t_max, cfg)?;
    adaptive(&f, &support, cfg)
}
