use std::cmp::Ordering;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{efficiency_report_with, EfficiencyReport, GeometryConfig, SimpsonOptions};
use crate::{Error, Result};

/// Inclusive arithmetic grid `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn single(value: f64) -> Self {
        Self::new(value, value, 1.0)
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::invalid("grid range has non-finite bounds"));
        }
        if self.start == self.stop {
            return Ok(vec![self.start]);
        }
        if self.step == 0.0 || (self.stop - self.start).signum() != self.step.signum() {
            return Err(Error::invalid(format!(
                "step {} does not move from {} towards {}",
                self.step, self.start, self.stop
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        // Index-based values avoid accumulated rounding; snap to micro-units
        // so that 0.2 + 13 * 0.01 prints and compares as 0.33.
        Ok((0..=n)
            .map(|i| {
                let v = self.start + i as f64 * self.step;
                (v * 1e9).round() / 1e9
            })
            .collect())
    }
}

impl FromStr for GridRange {
    type Err = Error;

    /// Parses `start:stop:step` or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {p:?} in range {s:?}")))
        };
        match parts.as_slice() {
            [v] => Ok(Self::single(num(v)?)),
            [a, b, c] => Ok(Self::new(num(a)?, num(b)?, num(c)?)),
            _ => Err(Error::invalid(format!("expected start:stop:step, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub theta0_deg: GridRange,
    pub h_m: GridRange,
    pub y0_m: GridRange,
    /// Minimum admissible feed height (physical constraint), if any.
    pub h_min: Option<f64>,
    /// Step of the optional second pass over `y0` around the coarse optimum.
    pub y0_refine_step: Option<f64>,
    pub aperture_side: f64,
    pub q: f64,
    pub qe: f64,
    #[serde(skip, default)]
    pub quadrature: SimpsonOptions,
}

impl Default for SweepSpec {
    /// The published ranges with 1° / 1 cm / 1 cm steps.
    fn default() -> Self {
        Self {
            theta0_deg: GridRange::new(0.0, 50.0, 1.0),
            h_m: GridRange::new(0.20, 1.80, 0.01),
            y0_m: GridRange::new(-0.15, 0.15, 0.01),
            h_min: None,
            y0_refine_step: Some(0.001),
            aperture_side: super::DEFAULT_APERTURE_SIDE,
            q: super::DEFAULT_Q,
            qe: super::DEFAULT_QE,
            quadrature: SimpsonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub best: GeometryConfig,
    pub report: EfficiencyReport,
    /// Points in the coarse grid (before the constraint is applied).
    pub grid_size: usize,
    /// Points whose efficiencies were actually evaluated.
    pub evaluated: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    h: f64,
    theta0_deg: f64,
    y0: f64,
    report: EfficiencyReport,
}

impl Candidate {
    /// Ordering where the preferred candidate is `Less`: higher `eta_a`,
    /// then lexicographically smaller `(H, θ0, y0)`.
    fn preference(&self, other: &Self) -> Ordering {
        other
            .report
            .eta_a
            .total_cmp(&self.report.eta_a)
            .then(self.h.total_cmp(&other.h))
            .then(self.theta0_deg.total_cmp(&other.theta0_deg))
            .then(self.y0.total_cmp(&other.y0))
    }
}

fn evaluate(spec: &SweepSpec, points: &[(f64, f64, f64)]) -> Result<Vec<Candidate>> {
    points
        .par_iter()
        .map(|&(h, theta0_deg, y0)| {
            let g = GeometryConfig {
                h,
                theta0: theta0_deg.to_radians(),
                fbp: [0.0, y0],
                aperture_side: spec.aperture_side,
                q: spec.q,
                qe: spec.qe,
            };
            efficiency_report_with(&g, spec.quadrature).map(|report| Candidate {
                h,
                theta0_deg,
                y0,
                report,
            })
        })
        .collect()
}

fn pick(cands: &[Candidate]) -> Option<Candidate> {
    cands.iter().copied().min_by(|a, b| a.preference(b))
}

/// Exhaustive grid search maximizing aperture efficiency with `x0 = 0`.
///
/// The result depends only on the set of grid points, not on traversal
/// order or thread count.
pub fn sweep_optimize(spec: &SweepSpec) -> Result<SweepOutcome> {
    let hs = spec.h_m.values()?;
    let thetas = spec.theta0_deg.values()?;
    let y0s = spec.y0_m.values()?;
    let grid_size = hs.len() * thetas.len() * y0s.len();
    if grid_size == 0 {
        return Err(Error::invalid("empty sweep grid"));
    }
    let half = 0.5 * spec.aperture_side;
    let h_min = spec.h_min.unwrap_or(f64::NEG_INFINITY);
    let mut points = Vec::with_capacity(grid_size);
    for &h in hs.iter().filter(|&&h| h >= h_min - 1e-12) {
        for &t in &thetas {
            for &y in y0s.iter().filter(|y| y.abs() <= half) {
                points.push((h, t, y));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("no grid point satisfies the sweep constraints"));
    }
    let mut evaluated = points.len();
    let coarse = evaluate(spec, &points)?;
    let mut best = pick(&coarse).expect("non-empty");

    if let Some(step) = spec.y0_refine_step {
        let coarse_step = spec.y0_m.step.abs();
        if step > 0.0 && step < coarse_step && y0s.len() > 1 {
            let n = (coarse_step / step).round() as i64;
            let refine: Vec<(f64, f64, f64)> = (-n..=n)
                .map(|i| ((best.y0 + i as f64 * step) * 1e9).round() / 1e9)
                .filter(|y| y.abs() <= half)
                .map(|y| (best.h, best.theta0_deg, y))
                .collect();
            evaluated += refine.len();
            let mut refined = evaluate(spec, &refine)?;
            refined.push(best);
            best = pick(&refined).expect("non-empty");
        }
    }

    Ok(SweepOutcome {
        best: GeometryConfig {
            h: best.h,
            theta0: best.theta0_deg.to_radians(),
            fbp: [0.0, best.y0],
            aperture_side: spec.aperture_side,
            q: spec.q,
            qe: spec.qe,
        },
        report: best.report,
        grid_size,
        evaluated,
    })
}
