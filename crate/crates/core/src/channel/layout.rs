//! Physical placement of Tx, Rx, RIS elements and the sensed volume.

use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Result};

/// RIS elements per side.
pub const RIS_SIDE: usize = 8;
/// Element count `N × N`.
pub const RIS_ELEMENTS: usize = RIS_SIDE * RIS_SIDE;
/// Unit-cell pitch (m).
pub const CELL_PITCH: f64 = 0.023;
/// Groups of 2×2 elements switched together.
pub const GROUPS: usize = 16;
/// Elements per group.
pub const ELEMENTS_PER_GROUP: usize = 4;
/// States per element.
pub const STATES: usize = 2;
/// Cuboids in the space of interest.
pub const CUBOIDS: usize = 32;

/// Centre of element `(i, j)`, symmetric about the tile centre.
pub fn element_center(i: usize, j: usize) -> [f64; 3] {
    let w = RIS_SIDE as f64 * CELL_PITCH;
    [
        (i as f64 + 0.5) * CELL_PITCH - w / 2.0,
        (j as f64 + 0.5) * CELL_PITCH - w / 2.0,
        0.0,
    ]
}

/// Group of element `(i, j)`: contiguous 2×2 blocks numbered row-major.
pub fn group_of(i: usize, j: usize) -> usize {
    (i / 2) * (RIS_SIDE / 2) + j / 2
}

/// Row-major element indices belonging to group `l`.
pub fn group_members(l: usize) -> [usize; ELEMENTS_PER_GROUP] {
    let (bi, bj) = (2 * (l / (RIS_SIDE / 2)), 2 * (l % (RIS_SIDE / 2)));
    [
        bi * RIS_SIDE + bj,
        bi * RIS_SIDE + bj + 1,
        (bi + 1) * RIS_SIDE + bj,
        (bi + 1) * RIS_SIDE + bj + 1,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Transmit power (W).
    pub pt: f64,
    /// Linear antenna gains.
    pub g_t: f64,
    pub g_r: f64,
    pub tx_pos: [f64; 3],
    pub rx_pos: [f64; 3],
    /// Row-major element centres, `RIS_ELEMENTS` entries.
    pub element_pos: Vec<[f64; 3]>,
}

impl Default for LinkBudget {
    /// Unit transmit power, 12 dBi horns, feed at the 33 cm / 35° placement
    /// and the receiver below the tile looking at the sensed volume.
    fn default() -> Self {
        let h: f64 = 0.33;
        let theta0 = 35f64.to_radians();
        let gain = 10f64.powf(12.0 / 10.0);
        Self {
            pt: 1.0,
            g_t: gain,
            g_r: gain,
            tx_pos: [0.0, -h * theta0.tan(), h],
            rx_pos: [-0.25, 0.0, 0.05],
            element_pos: (0..RIS_SIDE)
                .flat_map(|i| (0..RIS_SIDE).map(move |j| element_center(i, j)))
                .collect(),
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.pt > 0.0 && self.g_t > 0.0 && self.g_r > 0.0) {
            return Err(Error::invalid("Pt, gT and gR must be positive"));
        }
        if self.element_pos.len() != RIS_ELEMENTS {
            return Err(Error::dims(format!(
                "expected {RIS_ELEMENTS} element positions, got {}",
                self.element_pos.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub center_m: [f64; 3],
    pub size_m: [f64; 3],
}

/// The sensed volume: `CUBOIDS` boxes and their reflection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid {
    pub cuboids: Vec<Cuboid>,
    pub eta: Vec<Complex64>,
}

/// Cells along x, y and z of the default partition.
pub const GRID_DIMS: [usize; 3] = [4, 4, 2];

impl SceneGrid {
    /// 30 × 30 × 20 cm box, 50 cm from the tile centre and rotated 15° away
    /// from the feed, split 4 × 4 × 2. Cuboid `m = ix + 4 iy + 16 iz`.
    pub fn default_geometry() -> Vec<Cuboid> {
        let tilt = 15f64.to_radians();
        let dist = 0.50;
        let centre = [0.0, dist * tilt.sin(), dist * tilt.cos()];
        let extent = [0.30, 0.30, 0.20];
        let size = [
            extent[0] / GRID_DIMS[0] as f64,
            extent[1] / GRID_DIMS[1] as f64,
            extent[2] / GRID_DIMS[2] as f64,
        ];
        let mut out = Vec::with_capacity(CUBOIDS);
        for iz in 0..GRID_DIMS[2] {
            for iy in 0..GRID_DIMS[1] {
                for ix in 0..GRID_DIMS[0] {
                    let idx = [ix, iy, iz];
                    let mut c = [0.0; 3];
                    for a in 0..3 {
                        c[a] = centre[a] - extent[a] / 2.0 + (idx[a] as f64 + 0.5) * size[a];
                    }
                    out.push(Cuboid {
                        center_m: c,
                        size_m: size,
                    });
                }
            }
        }
        out
    }

    pub fn empty() -> Self {
        Self {
            cuboids: Self::default_geometry(),
            eta: vec![Complex64::new(0.0, 0.0); CUBOIDS],
        }
    }

    pub fn with_eta(eta: Vec<Complex64>) -> Result<Self> {
        if eta.len() != CUBOIDS {
            return Err(Error::dims(format!("expected {CUBOIDS} cuboid coefficients, got {}", eta.len())));
        }
        Ok(Self {
            cuboids: Self::default_geometry(),
            eta,
        })
    }

    pub fn index(ix: usize, iy: usize, iz: usize) -> usize {
        ix + GRID_DIMS[0] * iy + GRID_DIMS[0] * GRID_DIMS[1] * iz
    }

    pub fn validate(&self) -> Result<()> {
        if self.cuboids.len() != CUBOIDS || self.eta.len() != CUBOIDS {
            return Err(Error::dims(format!(
                "scene must have {CUBOIDS} cuboids and coefficients, got {} and {}",
                self.cuboids.len(),
                self.eta.len()
            )));
        }
        Ok(())
    }
}

/// On-disk scene layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub cuboids: Vec<SceneFileCuboid>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFileCuboid {
    pub center_m: [f64; 3],
    pub size_m: [f64; 3],
    pub eta_re: f64,
    pub eta_im: f64,
}

impl From<&SceneGrid> for SceneFile {
    fn from(s: &SceneGrid) -> Self {
        Self {
            cuboids: s
                .cuboids
                .iter()
                .zip(&s.eta)
                .map(|(c, e)| SceneFileCuboid {
                    center_m: c.center_m,
                    size_m: c.size_m,
                    eta_re: e.re,
                    eta_im: e.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<SceneFile> for SceneGrid {
    type Error = Error;

    fn try_from(f: SceneFile) -> Result<Self> {
        let grid = SceneGrid {
            cuboids: f
                .cuboids
                .iter()
                .map(|c| Cuboid {
                    center_m: c.center_m,
                    size_m: c.size_m,
                })
                .collect(),
            eta: f.cuboids.iter().map(|c| Complex64::new(c.eta_re, c.eta_im)).collect(),
        };
        grid.validate()?;
        Ok(grid)
    }
}
