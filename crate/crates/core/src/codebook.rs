//! Steering phase profiles, 1-bit quantization and far-field patterns.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    element_center, group_of, group_members, CellState, ReflectionModel, CELL_PITCH, GROUPS,
    RIS_ELEMENTS, RIS_SIDE,
};
use crate::{wavelength, Complex64, Error, Result};

/// Frequency used to compute codebook profiles (Hz).
pub const CODEBOOK_FREQUENCY: f64 = 5.91e9;
/// Frequency at which patterns are evaluated by default (Hz).
pub const PATTERN_FREQUENCY: f64 = 6.16e9;
/// Horn pattern exponent used for element illumination.
pub const FEED_Q: f64 = 5.0;

/// Desired beam direction plus the feed position it is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec {
    pub theta: f64,
    pub phi: f64,
    pub frequency: f64,
    pub feed_pos: [f64; 3],
}

impl SteeringSpec {
    /// Feed at distance `d` from the tile centre, tilted by `feed_angle` out of
    /// the scan plane (the x–z plane swept by the rotor).
    pub fn characterization(d: f64, feed_angle: f64, frequency: f64, theta: f64) -> Self {
        Self {
            theta,
            phi: 0.0,
            frequency,
            feed_pos: characterization_feed(d, feed_angle),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::invalid(format!("frequency must be positive, got {}", self.frequency)));
        }
        if !(self.theta.abs() <= PI / 2.0) {
            return Err(Error::invalid(format!("|theta| must not exceed 90°, got {}", self.theta)));
        }
        if !self.phi.is_finite() || self.feed_pos.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("steering spec has non-finite entries"));
        }
        if self.feed_pos[2] <= 0.0 {
            return Err(Error::invalid("feed must sit in front of the tile (z > 0)"));
        }
        Ok(())
    }
}

pub fn characterization_feed(d: f64, feed_angle: f64) -> [f64; 3] {
    [0.0, d * feed_angle.sin(), d * feed_angle.cos()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    /// `phases[i][j]` in `[0, 2π)`.
    pub phases: [[f64; RIS_SIDE]; RIS_SIDE],
    pub cell_pitch: f64,
    pub tile_hw: f64,
}

/// Per-element bias bits, `bits[i][j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RisState {
    pub bits: [[u8; RIS_SIDE]; RIS_SIDE],
}

impl RisState {
    pub fn zeros() -> Self {
        Self {
            bits: [[0; RIS_SIDE]; RIS_SIDE],
        }
    }

    pub fn from_row_major(bits: &[u8]) -> Result<Self> {
        if bits.len() != RIS_ELEMENTS {
            return Err(Error::dims(format!("state needs {RIS_ELEMENTS} bits, got {}", bits.len())));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("state bits must be 0 or 1, got {b}")));
        }
        let mut s = Self::zeros();
        for (n, &b) in bits.iter().enumerate() {
            s.bits[n / RIS_SIDE][n % RIS_SIDE] = b;
        }
        Ok(s)
    }

    pub fn to_row_major(&self) -> Vec<u8> {
        self.bits.iter().flatten().copied().collect()
    }

    pub fn flipped(&self) -> Self {
        let mut s = *self;
        s.bits.iter_mut().flatten().for_each(|b| *b ^= 1);
        s
    }
}

impl Serialize for RisState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RisState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u8>::deserialize(d)?;
        RisState::from_row_major(&v).map_err(serde::de::Error::custom)
    }
}

pub fn ideal_phase_profile(s: &SteeringSpec) -> Result<PhaseProfile> {
    s.validate()?;
    let k = TAU / wavelength(s.frequency);
    let [xc, yc, zc] = s.feed_pos;
    let mut phases = [[0.0; RIS_SIDE]; RIS_SIDE];
    for (i, row) in phases.iter_mut().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            let [x, y, _] = element_center(i, j);
            let r = ((xc - x).powi(2) + (yc - y).powi(2) + zc * zc).sqrt();
            let raw = k * (r - s.theta.sin() * x * s.phi.cos() + y * s.phi.sin());
            *p = wrap_phase(raw);
        }
    }
    Ok(PhaseProfile {
        phases,
        cell_pitch: CELL_PITCH,
        tile_hw: RIS_SIDE as f64 * CELL_PITCH,
    })
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Bit 1 for phases in `[π, 2π)`, bit 0 otherwise.
pub fn quantize_profile(p: &PhaseProfile) -> RisState {
    let mut s = RisState::zeros();
    for (i, row) in p.phases.iter().enumerate() {
        for (j, &ph) in row.iter().enumerate() {
            s.bits[i][j] = u8::from(wrap_phase(ph) >= PI);
        }
    }
    s
}

/// Collapses each 2×2 block to its common bit.
pub fn group_states(r: &RisState) -> Result<[u8; GROUPS]> {
    let mut out = [0u8; GROUPS];
    for (l, g) in out.iter_mut().enumerate() {
        let members = group_members(l);
        let first = r.bits[members[0] / RIS_SIDE][members[0] % RIS_SIDE];
        for &n in &members[1..] {
            if r.bits[n / RIS_SIDE][n % RIS_SIDE] != first {
                return Err(Error::invalid(format!("group {l} mixes ON and OFF cells")));
            }
        }
        *g = first;
    }
    Ok(out)
}

pub fn expand_groups(groups: &[u8; GROUPS]) -> RisState {
    let mut s = RisState::zeros();
    for i in 0..RIS_SIDE {
        for j in 0..RIS_SIDE {
            s.bits[i][j] = groups[group_of(i, j)];
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationPattern {
    pub angles_deg: Vec<f64>,
    pub gain_db: Vec<f64>,
}

impl RadiationPattern {
    /// Angle of the strongest sample (first one on ties).
    pub fn peak_angle(&self) -> f64 {
        let mut best = 0;
        for (n, &g) in self.gain_db.iter().enumerate() {
            if g > self.gain_db[best] {
                best = n;
            }
        }
        self.angles_deg[best]
    }

    pub fn gain_at(&self, angle_deg: f64) -> Option<f64> {
        self.angles_deg
            .iter()
            .position(|&a| (a - angle_deg).abs() < 1e-9)
            .map(|n| self.gain_db[n])
    }
}

/// Unnormalized far-field amplitude toward each rotor angle in the x–z plane.
pub fn pattern_amplitudes(
    r: &RisState,
    frequency: f64,
    feed_pos: [f64; 3],
    rotor_angles_deg: &[f64],
    cells: &dyn ReflectionModel,
) -> Result<Vec<f64>> {
    if rotor_angles_deg.is_empty() {
        return Err(Error::invalid("pattern needs at least one rotor angle"));
    }
    if rotor_angles_deg.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("rotor angles must be strictly increasing"));
    }
    if !(frequency > 0.0) || feed_pos[2] <= 0.0 {
        return Err(Error::invalid("pattern needs a positive frequency and a feed in front of the tile"));
    }
    let k = TAU / wavelength(frequency);
    let norm = feed_pos.iter().map(|v| v * v).sum::<f64>().sqrt();
    let axis = feed_pos.map(|v| -v / norm);
    let refl = [
        cells.coefficient(CellState::Off, frequency)?,
        cells.coefficient(CellState::On, frequency)?,
    ];
    // Illuminated element field before the steering phase toward the receiver.
    let mut elements = Vec::with_capacity(RIS_ELEMENTS);
    for i in 0..RIS_SIDE {
        for j in 0..RIS_SIDE {
            let p = element_center(i, j);
            let v = [p[0] - feed_pos[0], p[1] - feed_pos[1], p[2] - feed_pos[2]];
            let dist = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            let cos = (v[0] * axis[0] + v[1] * axis[1] + v[2] * axis[2]) / dist;
            let amp = cos.max(0.0).powf(FEED_Q) / dist;
            let field = refl[r.bits[i][j] as usize] * Complex64::from_polar(amp, -k * dist);
            elements.push((p[0], field));
        }
    }
    Ok(rotor_angles_deg
        .par_iter()
        .map(|&a| {
            let s = a.to_radians().sin();
            elements
                .iter()
                .map(|&(x, f)| f * Complex64::from_polar(1.0, k * s * x))
                .sum::<Complex64>()
                .norm()
        })
        .collect())
}

/// Far-field pattern normalized to a 0 dB peak.
pub fn radiation_pattern(
    r: &RisState,
    frequency: f64,
    feed_pos: [f64; 3],
    rotor_angles_deg: &[f64],
    cells: &dyn ReflectionModel,
) -> Result<RadiationPattern> {
    let amps = pattern_amplitudes(r, frequency, feed_pos, rotor_angles_deg, cells)?;
    let peak = amps.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::numerical("radiation pattern has no finite nonzero lobe"));
    }
    Ok(RadiationPattern {
        angles_deg: rotor_angles_deg.to_vec(),
        gain_db: amps.iter().map(|&a| 20.0 * (a / peak).log10()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::IdealReflection;
    use proptest::prelude::*;

    fn sweep() -> Vec<f64> {
        (-30..=30).map(|n| f64::from(n) * 2.0).collect()
    }

    fn steered(theta_deg: f64) -> RisState {
        let s = SteeringSpec::characterization(0.40, 35f64.to_radians(), CODEBOOK_FREQUENCY, theta_deg.to_radians());
        quantize_profile(&ideal_phase_profile(&s).unwrap())
    }

    #[test]
    fn boresight_profile_matches_distance() {
        let h = 0.3;
        let s = SteeringSpec {
            theta: 0.0,
            phi: 0.0,
            frequency: 5.91e9,
            feed_pos: [0.0, 0.0, h],
        };
        let p = ideal_phase_profile(&s).unwrap();
        let k = TAU / wavelength(5.91e9);
        for i in 0..8 {
            for j in 0..8 {
                let [x, y, _] = element_center(i, j);
                let want = (k * (x * x + y * y + h * h).sqrt()).rem_euclid(TAU);
                assert!((p.phases[i][j] - want).abs() < 1e-12);
                assert_eq!(p.phases[i][j], p.phases[i][7 - j]);
            }
        }
    }

    #[test]
    fn quantization_boundaries() {
        let mut p = PhaseProfile {
            phases: [[0.0; 8]; 8],
            cell_pitch: CELL_PITCH,
            tile_hw: 0.184,
        };
        p.phases[0][1] = PI / 2.0;
        p.phases[0][2] = PI;
        p.phases[0][3] = 1.5 * PI;
        let s = quantize_profile(&p);
        assert_eq!(&s.bits[0][..4], &[0, 0, 1, 1]);
        let all = PhaseProfile {
            phases: [[1.5 * PI; 8]; 8],
            ..p
        };
        assert!(quantize_profile(&all).bits.iter().flatten().all(|&b| b == 1));
    }

    #[test]
    fn groups_round_trip_and_reject_mixed() {
        assert_eq!(group_states(&RisState::zeros()).unwrap(), [0; 16]);
        let checker: [u8; 16] = std::array::from_fn(|l| ((l / 4 + l % 4) % 2) as u8);
        let s = expand_groups(&checker);
        assert_eq!(group_states(&s).unwrap(), checker);
        let mut mixed = s;
        mixed.bits[0][1] ^= 1;
        assert!(group_states(&mixed).is_err());
    }

    #[test]
    fn state_json_is_flat_row_major() {
        let mut s = RisState::zeros();
        s.bits[1][0] = 1;
        let text = serde_json::to_string(&s).unwrap();
        let v: Vec<u8> = serde_json::from_str(&text).unwrap();
        assert_eq!(v.len(), 64);
        assert_eq!(v[8], 1);
        assert_eq!(serde_json::from_str::<RisState>(&text).unwrap(), s);
        assert!(serde_json::from_str::<RisState>("[0,1]").is_err());
    }

    #[test]
    fn steered_peaks_land_on_command() {
        for t in [0.0, 20.0, -20.0, 40.0, -40.0] {
            let p = radiation_pattern(&steered(t), CODEBOOK_FREQUENCY, characterization_feed(0.40, 35f64.to_radians()), &sweep(), &IdealReflection).unwrap();
            assert!((p.peak_angle() - t).abs() <= 2.0, "theta {t}: peak {}", p.peak_angle());
        }
    }

    #[test]
    fn specular_baseline_has_no_steered_lobe() {
        let feed = characterization_feed(0.40, 35f64.to_radians());
        let off = radiation_pattern(&RisState::zeros(), CODEBOOK_FREQUENCY, feed, &sweep(), &IdealReflection).unwrap();
        assert!(off.peak_angle().abs() <= 2.0);
        assert!(off.gain_at(40.0).unwrap() < -6.0);
    }

    #[test]
    fn bad_angle_lists() {
        let feed = [0.0, 0.0, 0.4];
        assert!(radiation_pattern(&RisState::zeros(), 6e9, feed, &[], &IdealReflection).is_err());
        assert!(radiation_pattern(&RisState::zeros(), 6e9, feed, &[0.0, 0.0], &IdealReflection).is_err());
    }

    proptest! {
        #[test]
        fn quantization_ignores_whole_turns(ph in prop::array::uniform8(0.0f64..TAU), turns in -5i32..5) {
            let mut a = PhaseProfile { phases: [[0.0; 8]; 8], cell_pitch: CELL_PITCH, tile_hw: 0.184 };
            a.phases[3] = ph;
            let mut b = a.clone();
            for p in b.phases[3].iter_mut() {
                *p = wrap_phase(*p + f64::from(turns) * TAU);
            }
            prop_assert_eq!(quantize_profile(&a), quantize_profile(&b));
        }

        #[test]
        fn negated_theta_mirrors_in_x(theta in -1.2f64..1.2, d in 0.2f64..0.8) {
            let s = SteeringSpec { theta, phi: 0.0, frequency: 5.91e9, feed_pos: [0.0, 0.0, d] };
            let m = SteeringSpec { theta: -theta, ..s };
            let a = ideal_phase_profile(&s).unwrap();
            let b = ideal_phase_profile(&m).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    let diff = (a.phases[i][j] - b.phases[7 - i][j]).rem_euclid(TAU);
                    prop_assert!(diff.min(TAU - diff) < 1e-9);
                }
            }
        }

        #[test]
        fn bit_flip_keeps_pattern(bits in prop::collection::vec(0u8..2, 64)) {
            let s = RisState::from_row_major(&bits).unwrap();
            let feed = characterization_feed(0.4, 0.6);
            let angles: Vec<f64> = (-6..=6).map(|n| f64::from(n) * 10.0).collect();
            let a = radiation_pattern(&s, 6.16e9, feed, &angles, &IdealReflection);
            let b = radiation_pattern(&s.flipped(), 6.16e9, feed, &angles, &IdealReflection);
            if let (Ok(a), Ok(b)) = (a, b) {
                for (x, y) in a.gain_db.iter().zip(&b.gain_db) {
                    prop_assert!((x - y).abs() < 1e-9 || (x.is_infinite() && y.is_infinite()));
                }
            }
        }

        #[test]
        fn groups_expand_and_collapse(g in prop::array::uniform16(0u8..2)) {
            prop_assert_eq!(group_states(&expand_groups(&g)).unwrap(), g);
        }
    }
}
