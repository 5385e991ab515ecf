//! Tx → RIS element → cuboid → Rx propagation.
//!
//! Each path contributes
//!
//! ```text
//! h = λ r(s) η √(gT gR) / (4π d_tx d_nm d_rx) · exp(-j 2π (d_tx + d_nm + d_rx) / λ)
//! ```
//!
//! where `d_tx` runs from the Tx to element `n`, `d_nm` from the element to
//! cuboid `m` and `d_rx` from the cuboid to the Rx. The functions here return
//! the kernel with `η` factored out; scene coefficients are applied by the
//! caller through `y = Pt · T · A · η`.

mod layout;
mod reflection;

pub use layout::*;
pub use reflection::*;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

use crate::sequencer::TimeMatrix;
use crate::{labels, rng, wavelength, Complex64, Error, Result};

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Kernel of a single path from three path lengths, without `η`.
pub fn path_kernel(
    lambda: f64,
    reflection: Complex64,
    g_t: f64,
    g_r: f64,
    d_tx: f64,
    d_nm: f64,
    d_rx: f64,
) -> Result<Complex64> {
    if !(d_tx > 0.0 && d_nm > 0.0 && d_rx > 0.0) {
        return Err(Error::invalid(format!(
            "path lengths must be positive (d_tx={d_tx}, d_nm={d_nm}, d_rx={d_rx})"
        )));
    }
    let amp = lambda * (g_t * g_r).sqrt() / (4.0 * PI * d_tx * d_nm * d_rx);
    let phase = -2.0 * PI * (d_tx + d_nm + d_rx) / lambda;
    Ok(reflection * Complex64::from_polar(amp, phase))
}

/// Kernel for element `n`, cuboid `m` and state `state` at `freq_hz`.
pub fn element_gain(
    n: usize,
    m: usize,
    state: CellState,
    freq_hz: f64,
    lb: &LinkBudget,
    cuboids: &[Cuboid],
    tbl: &dyn ReflectionModel,
) -> Result<Complex64> {
    let el = *lb
        .element_pos
        .get(n)
        .ok_or_else(|| Error::invalid(format!("element index {n} out of range")))?;
    let cub = cuboids
        .get(m)
        .ok_or_else(|| Error::invalid(format!("cuboid index {m} out of range")))?
        .center_m;
    path_kernel(
        wavelength(freq_hz),
        tbl.coefficient(state, freq_hz)?,
        lb.g_t,
        lb.g_r,
        distance(lb.tx_pos, el),
        distance(el, cub),
        distance(cub, lb.rx_pos),
    )
}

/// Frequency-independent path lengths for every (element, cuboid) pair.
///
/// Building `A` at many frequencies only needs the total length and the
/// length product of each path, so these are computed once.
#[derive(Debug, Clone)]
pub struct PathTable {
    g_t: f64,
    g_r: f64,
    /// `[n * M + m]`: total path length.
    total: Vec<f64>,
    /// `[n * M + m]`: product of the three legs.
    product: Vec<f64>,
    cuboids: usize,
}

impl PathTable {
    pub fn new(lb: &LinkBudget, cuboids: &[Cuboid]) -> Result<Self> {
        lb.validate()?;
        let m_count = cuboids.len();
        let mut total = Vec::with_capacity(lb.element_pos.len() * m_count);
        let mut product = Vec::with_capacity(total.capacity());
        for &el in &lb.element_pos {
            let d_tx = distance(lb.tx_pos, el);
            for c in cuboids {
                let d_nm = distance(el, c.center_m);
                let d_rx = distance(c.center_m, lb.rx_pos);
                if !(d_tx > 0.0 && d_nm > 0.0 && d_rx > 0.0) {
                    return Err(Error::invalid("zero-length path in link layout"));
                }
                total.push(d_tx + d_nm + d_rx);
                product.push(d_tx * d_nm * d_rx);
            }
        }
        Ok(Self {
            g_t: lb.g_t,
            g_r: lb.g_r,
            total,
            product,
            cuboids: m_count,
        })
    }

    /// Per-group sums of the state-free kernel, `[l][m]`.
    fn group_sums(&self, freq_hz: f64) -> Vec<Vec<Complex64>> {
        let lambda = wavelength(freq_hz);
        let scale = lambda * (self.g_t * self.g_r).sqrt() / (4.0 * PI);
        let k = 2.0 * PI / lambda;
        (0..GROUPS)
            .map(|l| {
                let mut row = vec![Complex64::new(0.0, 0.0); self.cuboids];
                for n in group_members(l) {
                    for (m, acc) in row.iter_mut().enumerate() {
                        let idx = n * self.cuboids + m;
                        *acc += Complex64::from_polar(scale / self.product[idx], -k * self.total[idx]);
                    }
                }
                row
            })
            .collect()
    }

    /// The `(L·Na) × M` gain matrix at `freq_hz`.
    pub fn gain_matrix(&self, freq_hz: f64, tbl: &dyn ReflectionModel) -> Result<ChannelGainMatrix> {
        let r = [
            tbl.coefficient(CellState::Off, freq_hz)?,
            tbl.coefficient(CellState::On, freq_hz)?,
        ];
        let sums = self.group_sums(freq_hz);
        let a = DMatrix::from_fn(GROUPS * STATES, self.cuboids, |row, m| {
            r[row % STATES] * sums[row / STATES][m]
        });
        Ok(ChannelGainMatrix { a })
    }
}

/// Gain matrix `A`: rows `(l, OFF), (l, ON)` for `l = 0..L`, one column per cuboid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGainMatrix {
    pub a: DMatrix<Complex64>,
}

impl ChannelGainMatrix {
    pub fn new(a: DMatrix<Complex64>) -> Result<Self> {
        if a.nrows() != GROUPS * STATES {
            return Err(Error::dims(format!(
                "gain matrix needs {} rows, got {}",
                GROUPS * STATES,
                a.nrows()
            )));
        }
        if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical("gain matrix has non-finite entries"));
        }
        Ok(Self { a })
    }

    pub fn row_index(group: usize, state: CellState) -> usize {
        group * STATES + state.index()
    }

    pub fn cuboids(&self) -> usize {
        self.a.ncols()
    }
}

/// Gain matrix for the given layout at one frequency.
pub fn gain_matrix(
    lb: &LinkBudget,
    tbl: &dyn ReflectionModel,
    cuboids: &[Cuboid],
    freq_hz: f64,
) -> Result<ChannelGainMatrix> {
    PathTable::new(lb, cuboids)?.gain_matrix(freq_hz, tbl)
}

/// `y = Pt · (T·A) · η + z`, with `z` circular complex Gaussian of total
/// standard deviation `noise_std` (each quadrature gets `noise_std / √2`).
pub fn received_signal(
    t: &TimeMatrix,
    a: &ChannelGainMatrix,
    eta: &[Complex64],
    pt: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    if t.cols() != a.a.nrows() {
        return Err(Error::dims(format!(
            "T has {} columns but A has {} rows",
            t.cols(),
            a.a.nrows()
        )));
    }
    if eta.len() != a.a.ncols() {
        return Err(Error::dims(format!(
            "eta has {} entries but A has {} columns",
            eta.len(),
            a.a.ncols()
        )));
    }
    let gamma = t.measurement_matrix(a)?;
    let eta = nalgebra::DVector::from_column_slice(eta);
    let clean = gamma.gamma * eta * Complex64::new(pt, 0.0);
    let mut y: Vec<Complex64> = clean.iter().copied().collect();
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std / 2f64.sqrt())
            .map_err(|e| Error::invalid(format!("noise std: {e}")))?;
        let mut g = rng::stream(seed, labels!["received-noise"]);
        for v in &mut y {
            *v += Complex64::new(normal.sample(&mut g), normal.sample(&mut g));
        }
    }
    Ok(y)
}
