//! Feed/aperture geometry and efficiencies.
//!
//! The RIS aperture is a square of side `aperture_side` centred on the
//! origin of the `z = 0` plane. The feed sits at `(0, -H tan θ0, H)` and is
//! aimed at the feed beam point (FBP) `(x0, y0, 0)`. Its radiation is modelled
//! as a `cos^q` field pattern around the feed axis, and each aperture element
//! receives it through a `cos^qe` element pattern.

mod quadrature;
mod sweep;

pub use quadrature::{integrate_1d, integrate_2d, Quadrature, SimpsonOptions};
pub use sweep::{sweep_optimize, GridRange, SweepOutcome, SweepSpec};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Side of the 8×8 tile used throughout (m).
pub const DEFAULT_APERTURE_SIDE: f64 = 0.1846;
/// Feed pattern exponent fitted to the horn datasheet.
pub const DEFAULT_Q: f64 = 5.0;
/// Element pattern exponent.
pub const DEFAULT_QE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Feed height above the aperture plane (m).
    pub h: f64,
    /// Offset angle between the feed and the aperture normal (rad).
    pub theta0: f64,
    /// Feed beam point `(x0, y0)` on the aperture plane (m).
    pub fbp: [f64; 2],
    pub aperture_side: f64,
    pub q: f64,
    pub qe: f64,
}

impl GeometryConfig {
    /// Configuration with the tile defaults (`q = 5`, `qe = 1`, 18.46 cm side).
    pub fn new(h: f64, theta0: f64, fbp: [f64; 2]) -> Self {
        Self {
            h,
            theta0,
            fbp,
            aperture_side: DEFAULT_APERTURE_SIDE,
            q: DEFAULT_Q,
            qe: DEFAULT_QE,
        }
    }

    pub fn with_aperture_side(mut self, side: f64) -> Self {
        self.aperture_side = side;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.h, self.theta0, self.fbp[0], self.fbp[1], self.aperture_side, self.q, self.qe]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("geometry has non-finite fields"));
        }
        if self.h <= 0.0 {
            return Err(Error::invalid(format!("feed height must be positive, got {}", self.h)));
        }
        if self.aperture_side <= 0.0 {
            return Err(Error::invalid("aperture side must be positive"));
        }
        if self.q < 0.0 || self.qe < 0.0 {
            return Err(Error::invalid("pattern exponents must be non-negative"));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.theta0) {
            return Err(Error::invalid(format!(
                "offset angle must lie in [0, 90) degrees, got {:.3}",
                self.theta0.to_degrees()
            )));
        }
        Ok(())
    }

    pub fn feed_position(&self) -> [f64; 3] {
        [0.0, -self.h * self.theta0.tan(), self.h]
    }

    fn fbp_inside(&self) -> bool {
        let half = 0.5 * self.aperture_side;
        self.fbp[0].abs() <= half && self.fbp[1].abs() <= half
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricQuantities {
    pub feed_pos: [f64; 3],
    /// Feed to FBP distance.
    pub r0: f64,
    /// Feed to element distance.
    pub r: f64,
    /// In-plane FBP to element distance.
    pub s: f64,
}

/// Closed-form feed/FBP/element distances.
pub fn geometric_quantities(g: &GeometryConfig, element_xy: [f64; 2]) -> GeometricQuantities {
    let [x0, y0] = g.fbp;
    let [x, y] = element_xy;
    let (t, sec2) = (g.theta0.tan(), 1.0 / g.theta0.cos().powi(2));
    let h2 = g.h * g.h;
    let r0 = (x0 * x0 + y0 * y0 + h2 * sec2 + y0 * 2.0 * g.h * t).sqrt();
    let r = (x * x + y * y + h2 * sec2 + y * 2.0 * g.h * t).sqrt();
    let s = ((x - x0).powi(2) + (y - y0).powi(2)).sqrt();
    GeometricQuantities {
        feed_pos: g.feed_position(),
        r0,
        r,
        s,
    }
}

#[inline]
fn pow_exp(base: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        base.powi(e as i32)
    } else {
        base.powf(e)
    }
}

/// Per-geometry constants for fast integrand evaluation.
#[derive(Debug, Clone, Copy)]
struct Field {
    h: f64,
    h_qe: f64,
    r0: f64,
    x0: f64,
    y0: f64,
    base: f64,
    lin_y: f64,
    q: f64,
    qe: f64,
}

impl Field {
    fn new(g: &GeometryConfig) -> Self {
        let t = g.theta0.tan();
        let base = g.h * g.h / g.theta0.cos().powi(2);
        let lin_y = 2.0 * g.h * t;
        let [x0, y0] = g.fbp;
        Self {
            h: g.h,
            h_qe: pow_exp(g.h, g.qe),
            r0: (x0 * x0 + y0 * y0 + base + y0 * lin_y).sqrt(),
            x0,
            y0,
            base,
            lin_y,
            q: g.q,
            qe: g.qe,
        }
    }

    /// `(r, cos ψ)` where ψ is the angle off the feed axis, clamped so the
    /// back hemisphere contributes nothing.
    #[inline]
    fn geometry(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y + self.base + y * self.lin_y;
        let r = r2.sqrt();
        let s2 = (x - self.x0).powi(2) + (y - self.y0).powi(2);
        let c = (self.r0 * self.r0 + r2 - s2) / (2.0 * self.r0 * r);
        (r, c.clamp(0.0, 1.0))
    }

    /// Power per unit aperture area.
    #[inline]
    fn power(&self, r: f64, c: f64) -> f64 {
        self.h / (r * r * r) * pow_exp(c, 2.0 * self.q)
    }

    /// Illumination field amplitude including the element pattern.
    #[inline]
    fn illumination(&self, r: f64, c: f64) -> f64 {
        self.h_qe / pow_exp(r, 1.0 + self.qe) * pow_exp(c, self.q)
    }

    fn illumination_at(&self, x: f64, y: f64) -> f64 {
        let (r, c) = self.geometry(x, y);
        self.illumination(r, c)
    }
}

/// Total power of a `cos^{2q}` pattern over the forward hemisphere.
pub fn hemisphere_power(q: f64) -> f64 {
    2.0 * std::f64::consts::PI / (2.0 * q + 1.0)
}

/// The integrals every efficiency needs: `∬P dA`, `∬I dA` and `∬I² dA`.
fn aperture_integrals(g: &GeometryConfig, opts: SimpsonOptions) -> Result<[f64; 3]> {
    let field = Field::new(g);
    let half = 0.5 * g.aperture_side;
    // Power peaks between the feed foot point and the FBP.
    let foot_y = -g.h * g.theta0.tan();
    let q = integrate_2d(
        |x, y| {
            let (r, c) = field.geometry(x, y);
            let i = field.illumination(r, c);
            [field.power(r, c), i, i * i]
        },
        (-half, half),
        (-half, half),
        &[g.fbp[0], 0.0],
        &[g.fbp[1], foot_y],
        opts,
    );
    if !q.converged {
        return Err(Error::numerical(format!(
            "aperture quadrature did not reach rel_tol {:e} within {} levels (H={}, theta0={:.2} deg)",
            opts.rel_tol,
            opts.max_depth,
            g.h,
            g.theta0.to_degrees()
        )));
    }
    Ok(q.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub eta_s: f64,
    pub eta_i: f64,
    pub eta_a: f64,
    pub edge_taper_db: f64,
}

fn spillover_from(g: &GeometryConfig, p: f64) -> f64 {
    (p / hemisphere_power(g.q)).clamp(0.0, 1.0)
}

fn illumination_from(g: &GeometryConfig, i1: f64, i2: f64) -> f64 {
    let area = g.aperture_side * g.aperture_side;
    if i2 <= 0.0 {
        return 0.0;
    }
    (i1 * i1 / (area * i2)).clamp(0.0, 1.0)
}

/// Fraction of the feed power intercepted by the aperture.
pub fn spillover_efficiency(g: &GeometryConfig) -> Result<f64> {
    spillover_efficiency_with(g, SimpsonOptions::default())
}

pub fn spillover_efficiency_with(g: &GeometryConfig, opts: SimpsonOptions) -> Result<f64> {
    g.validate()?;
    let [p, _, _] = aperture_integrals(g, opts)?;
    Ok(spillover_from(g, p))
}

/// Uniformity of the aperture illumination, `(1/A)|∬I|² / ∬|I|²`.
pub fn illumination_efficiency(g: &GeometryConfig) -> Result<f64> {
    illumination_efficiency_with(g, SimpsonOptions::default())
}

pub fn illumination_efficiency_with(g: &GeometryConfig, opts: SimpsonOptions) -> Result<f64> {
    g.validate()?;
    let [_, i1, i2] = aperture_integrals(g, opts)?;
    Ok(illumination_from(g, i1, i2))
}

/// Edge illumination relative to the FBP, in dB.
///
/// Takes the weakest of the four edge midpoints and four corners. Clamped to
/// 0 dB when every edge point outshines the FBP.
pub fn edge_taper(g: &GeometryConfig) -> f64 {
    let field = Field::new(g);
    let centre = field.illumination_at(g.fbp[0], g.fbp[1]);
    let h = 0.5 * g.aperture_side;
    let points = [
        (h, 0.0),
        (-h, 0.0),
        (0.0, h),
        (0.0, -h),
        (h, h),
        (h, -h),
        (-h, h),
        (-h, -h),
    ];
    let weakest = points
        .iter()
        .map(|&(x, y)| field.illumination_at(x, y))
        .fold(f64::INFINITY, f64::min);
    let ratio = (weakest / centre).powi(2);
    (10.0 * ratio.log10()).min(0.0)
}

/// All efficiencies from one shared quadrature pass.
pub fn efficiency_report(g: &GeometryConfig) -> Result<EfficiencyReport> {
    efficiency_report_with(g, SimpsonOptions::default())
}

pub fn efficiency_report_with(g: &GeometryConfig, opts: SimpsonOptions) -> Result<EfficiencyReport> {
    g.validate()?;
    if !g.fbp_inside() {
        return Err(Error::invalid(format!(
            "feed beam point ({}, {}) lies outside the aperture",
            g.fbp[0], g.fbp[1]
        )));
    }
    let [p, i1, i2] = aperture_integrals(g, opts)?;
    let eta_s = spillover_from(g, p);
    let eta_i = illumination_from(g, i1, i2);
    Ok(EfficiencyReport {
        eta_s,
        eta_i,
        eta_a: eta_s * eta_i,
        edge_taper_db: edge_taper(g),
    })
}
