//! Unit-cell reflection coefficients versus frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Result};

/// Bias state of a unit cell. Bit `0` is OFF, bit `1` is ON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Off,
    On,
}

impl CellState {
    pub const ALL: [CellState; 2] = [CellState::Off, CellState::On];

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            CellState::Off
        } else {
            CellState::On
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            CellState::Off => 0,
            CellState::On => 1,
        }
    }

    /// Row offset of this state inside a group's pair of rows.
    pub fn index(self) -> usize {
        self.bit() as usize
    }
}

/// Anything that can report a cell's complex reflection coefficient.
pub trait ReflectionModel: Sync {
    fn coefficient(&self, state: CellState, freq_hz: f64) -> Result<Complex64>;
}

/// Perfect 1-bit cell: `+1` when OFF, `-1` when ON, at every frequency.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealReflection;

impl ReflectionModel for IdealReflection {
    fn coefficient(&self, state: CellState, _freq_hz: f64) -> Result<Complex64> {
        Ok(match state {
            CellState::Off => Complex64::new(1.0, 0.0),
            CellState::On => Complex64::new(-1.0, 0.0),
        })
    }
}

/// One measured (or assumed) frequency point of the cell response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionAnchor {
    pub freq_hz: f64,
    pub off_db: f64,
    pub off_phase_deg: f64,
    pub on_db: f64,
    pub on_phase_deg: f64,
}

impl ReflectionAnchor {
    const fn new(freq_ghz: f64, off_db: f64, off_phase_deg: f64, on_db: f64, on_phase_deg: f64) -> Self {
        Self {
            freq_hz: freq_ghz * 1e9,
            off_db,
            off_phase_deg,
            on_db,
            on_phase_deg,
        }
    }
}

/// Anchor set for the fabricated cell.
///
/// The 5.91, 5.93, 6.16 and 6.50 GHz rows carry the quoted waveguide
/// measurements (phase differences of 174°, 178°, ~110° and ~35°; ON at
/// -3.77 dB and OFF at -1.67 dB at 5.93 GHz; 1.88 dB state gap at 6.16 GHz).
/// The 5.0 and 5.5 GHz rows are smooth fill-ins so the table covers the full
/// sensing band.
pub const MEASURED_ANCHORS: [ReflectionAnchor; 6] = [
    ReflectionAnchor::new(5.00, -0.80, 150.0, -1.20, 60.0),
    ReflectionAnchor::new(5.50, -1.00, 110.0, -2.00, -20.0),
    ReflectionAnchor::new(5.91, -1.90, 60.0, -2.90, -114.0),
    ReflectionAnchor::new(5.93, -1.67, 55.0, -3.77, -123.0),
    ReflectionAnchor::new(6.16, -1.20, 20.0, -3.08, -90.0),
    ReflectionAnchor::new(6.50, -1.00, -30.0, -1.10, -65.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReflectionTable {
    /// Anchors sorted by frequency with phases unwrapped along frequency.
    anchors: Vec<ReflectionAnchor>,
}

fn unwrap_deg(prev: f64, next: f64) -> f64 {
    let mut v = next;
    while v - prev > 180.0 {
        v -= 360.0;
    }
    while v - prev < -180.0 {
        v += 360.0;
    }
    v
}

/// Builds the piecewise-linear table (magnitude in dB, phase in unwrapped
/// degrees) through `anchors`.
pub fn build_reflection_table(anchors: &[ReflectionAnchor]) -> Result<CellReflectionTable> {
    if anchors.len() < 2 {
        return Err(Error::invalid("reflection table needs at least two anchors"));
    }
    for w in anchors.windows(2) {
        if !(w[1].freq_hz > w[0].freq_hz) {
            return Err(Error::invalid(format!(
                "anchors must be strictly increasing in frequency ({} then {})",
                w[0].freq_hz, w[1].freq_hz
            )));
        }
    }
    for a in anchors {
        if a.off_db > 0.0 || a.on_db > 0.0 || !a.off_db.is_finite() || !a.on_db.is_finite() {
            return Err(Error::invalid(format!(
                "anchor at {} Hz has a magnitude outside (0, 1]",
                a.freq_hz
            )));
        }
    }
    let mut out = Vec::with_capacity(anchors.len());
    out.push(anchors[0]);
    for a in &anchors[1..] {
        let prev = out.last().expect("non-empty");
        let mut a = *a;
        a.off_phase_deg = unwrap_deg(prev.off_phase_deg, a.off_phase_deg);
        a.on_phase_deg = unwrap_deg(prev.on_phase_deg, a.on_phase_deg);
        out.push(a);
    }
    Ok(CellReflectionTable { anchors: out })
}

impl Default for CellReflectionTable {
    fn default() -> Self {
        build_reflection_table(&MEASURED_ANCHORS).expect("built-in anchors are valid")
    }
}

impl CellReflectionTable {
    pub fn anchors(&self) -> &[ReflectionAnchor] {
        &self.anchors
    }

    pub fn frequency_range(&self) -> (f64, f64) {
        (
            self.anchors[0].freq_hz,
            self.anchors[self.anchors.len() - 1].freq_hz,
        )
    }

    /// Interpolated `(magnitude dB, phase deg)` for a state.
    pub fn db_and_phase(&self, state: CellState, freq_hz: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.frequency_range();
        // Allow round-off at the band edges.
        let tol = 1e-6 * hi;
        if !(freq_hz >= lo - tol && freq_hz <= hi + tol) {
            return Err(Error::invalid(format!(
                "frequency {:.6} GHz outside reflection table range [{:.3}, {:.3}] GHz",
                freq_hz / 1e9,
                lo / 1e9,
                hi / 1e9
            )));
        }
        let f = freq_hz.clamp(lo, hi);
        let k = self
            .anchors
            .windows(2)
            .position(|w| f <= w[1].freq_hz)
            .unwrap_or(self.anchors.len() - 2);
        let (a, b) = (&self.anchors[k], &self.anchors[k + 1]);
        let t = (f - a.freq_hz) / (b.freq_hz - a.freq_hz);
        let lerp = |x: f64, y: f64| x + t * (y - x);
        Ok(match state {
            CellState::Off => (lerp(a.off_db, b.off_db), lerp(a.off_phase_deg, b.off_phase_deg)),
            CellState::On => (lerp(a.on_db, b.on_db), lerp(a.on_phase_deg, b.on_phase_deg)),
        })
    }

    /// Absolute ON/OFF phase difference wrapped into `[0°, 180°]`.
    pub fn phase_difference_deg(&self, freq_hz: f64) -> Result<f64> {
        let (_, p_off) = self.db_and_phase(CellState::Off, freq_hz)?;
        let (_, p_on) = self.db_and_phase(CellState::On, freq_hz)?;
        let d = (p_off - p_on).rem_euclid(360.0);
        Ok(if d > 180.0 { 360.0 - d } else { d })
    }
}

impl ReflectionModel for CellReflectionTable {
    fn coefficient(&self, state: CellState, freq_hz: f64) -> Result<Complex64> {
        let (db, deg) = self.db_and_phase(state, freq_hz)?;
        Ok(Complex64::from_polar(10f64.powf(db / 20.0), deg * PI / 180.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quoted_anchor_values() {
        let t = CellReflectionTable::default();
        let (on, _) = t.db_and_phase(CellState::On, 5.93e9).unwrap();
        let (off, _) = t.db_and_phase(CellState::Off, 5.93e9).unwrap();
        assert_abs_diff_eq!(on, -3.77, epsilon = 1e-12);
        assert_abs_diff_eq!(off, -1.67, epsilon = 1e-12);
        assert_abs_diff_eq!(t.phase_difference_deg(5.93e9).unwrap(), 178.0, epsilon = 1e-9);

        assert_abs_diff_eq!(t.phase_difference_deg(5.91e9).unwrap(), 174.0, epsilon = 1e-9);
        for s in CellState::ALL {
            assert!(t.db_and_phase(s, 5.91e9).unwrap().0 >= -3.0);
        }

        assert_abs_diff_eq!(t.phase_difference_deg(6.16e9).unwrap(), 110.0, epsilon = 1e-9);
        let gap = t.db_and_phase(CellState::Off, 6.16e9).unwrap().0
            - t.db_and_phase(CellState::On, 6.16e9).unwrap().0;
        assert_abs_diff_eq!(gap.abs(), 1.88, epsilon = 1e-9);
    }

    #[test]
    fn magnitudes_stay_passive_across_band() {
        let t = CellReflectionTable::default();
        for i in 0..=150 {
            let f = 5.0e9 + i as f64 * 1e7;
            for s in CellState::ALL {
                let m = t.coefficient(s, f).unwrap().norm();
                assert!(m > 0.0 && m <= 1.0);
            }
        }
    }

    #[test]
    fn out_of_range_and_unsorted_are_errors() {
        let t = CellReflectionTable::default();
        assert!(t.coefficient(CellState::On, 4.9e9).is_err());
        assert!(t.coefficient(CellState::On, 6.6e9).is_err());
        let mut a = MEASURED_ANCHORS.to_vec();
        a.swap(0, 1);
        assert!(build_reflection_table(&a).is_err());
    }

    #[test]
    fn phase_interpolation_takes_short_way_round() {
        let a = [
            ReflectionAnchor::new(1.0, 0.0, 170.0, 0.0, 0.0),
            ReflectionAnchor::new(2.0, 0.0, -170.0, 0.0, 0.0),
        ];
        let t = build_reflection_table(&a).unwrap();
        let (_, p) = t.db_and_phase(CellState::Off, 1.5e9).unwrap();
        assert_abs_diff_eq!(p, 180.0, epsilon = 1e-12);
    }
}
