//! Scene estimation from `y = Γη + z`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::sequencer::MeasurementMatrix;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ReconstructionMode {
    /// `argmin ‖Γη − y‖² + μ‖η‖²`.
    LeastSquaresRidge { mu: f64 },
    /// Orthogonal matching pursuit, stopping at `sparsity` atoms or when the
    /// residual norm falls to `tol`.
    MatchingPursuit { sparsity: usize, tol: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub eta: Vec<Complex64>,
    pub residual_norm: f64,
    /// Matching pursuit only: residual norm before the first and after each
    /// iteration.
    pub residual_history: Vec<f64>,
    /// Matching pursuit only: selected columns in selection order.
    pub support: Vec<usize>,
}

pub fn reconstruct_scene(y: &[Complex64], g: &MeasurementMatrix, mode: ReconstructionMode) -> Result<Reconstruction> {
    let gm = &g.gamma;
    if y.len() != gm.nrows() {
        return Err(Error::dims(format!("y has {} entries, Γ has {} rows", y.len(), gm.nrows())));
    }
    let y = DVector::from_column_slice(y);
    match mode {
        ReconstructionMode::LeastSquaresRidge { mu } => ridge(&y, gm, mu),
        ReconstructionMode::MatchingPursuit { sparsity, tol } => omp(&y, gm, sparsity, tol),
    }
}

fn solve_normal(gm: &DMatrix<Complex64>, y: &DVector<Complex64>, mu: f64) -> Result<DVector<Complex64>> {
    let n = gm.ncols();
    let mut normal = gm.adjoint() * gm;
    let scale = (0..n).map(|i| normal[(i, i)].re).fold(0.0, f64::max);
    for i in 0..n {
        normal[(i, i)] += Complex64::new(mu, 0.0);
    }
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::numerical("normal equations are singular"))?;
    let l = chol.l_dirty();
    let min_pivot = (0..n).map(|i| l[(i, i)].re.powi(2)).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-13 * scale.max(mu)) {
        return Err(Error::numerical("normal equations are numerically singular"));
    }
    Ok(chol.solve(&(gm.adjoint() * y)))
}

fn ridge(y: &DVector<Complex64>, gm: &DMatrix<Complex64>, mu: f64) -> Result<Reconstruction> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!("ridge weight must be finite and non-negative, got {mu}")));
    }
    if gm.ncols() == 0 {
        return Err(Error::dims("Γ has no columns"));
    }
    let eta = solve_normal(gm, y, mu)?;
    let residual_norm = (gm * &eta - y).norm();
    Ok(Reconstruction {
        eta: eta.iter().copied().collect(),
        residual_norm,
        residual_history: Vec::new(),
        support: Vec::new(),
    })
}

fn omp(y: &DVector<Complex64>, gm: &DMatrix<Complex64>, sparsity: usize, tol: f64) -> Result<Reconstruction> {
    let m = gm.ncols();
    if sparsity == 0 || sparsity > m.min(gm.nrows()) {
        return Err(Error::invalid(format!("sparsity must be in 1..={}", m.min(gm.nrows()))));
    }
    let norms: Vec<f64> = (0..m).map(|j| gm.column(j).norm()).collect();
    let mut support: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    let mut history = vec![residual.norm()];
    let mut coef = DVector::<Complex64>::zeros(0);
    while support.len() < sparsity && residual.norm() > tol {
        let corr = gm.adjoint() * &residual;
        let pick = (0..m)
            .filter(|j| !support.contains(j) && norms[*j] > 0.0)
            .max_by(|&a, &b| (corr[a].norm() / norms[a]).total_cmp(&(corr[b].norm() / norms[b])));
        let Some(j) = pick else { break };
        support.push(j);
        let sub = DMatrix::from_fn(gm.nrows(), support.len(), |r, c| gm[(r, support[c])]);
        coef = match solve_normal(&sub, y, 0.0) {
            Ok(c) => c,
            Err(_) => {
                support.pop();
                break;
            }
        };
        residual = y - &sub * &coef;
        history.push(residual.norm());
    }
    let mut eta = vec![Complex64::new(0.0, 0.0); m];
    for (k, &j) in support.iter().enumerate() {
        eta[j] = coef[k];
    }
    Ok(Reconstruction {
        eta,
        residual_norm: residual.norm(),
        residual_history: history,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{labels, rng};
    use rand::Rng;

    fn random_gamma(rows: usize, cols: usize, seed: u64) -> MeasurementMatrix {
        let mut g = rng::stream(seed, labels!["gamma"]);
        MeasurementMatrix {
            gamma: DMatrix::from_fn(rows, cols, |_, _| Complex64::new(g.random::<f64>() - 0.5, g.random::<f64>() - 0.5)),
        }
    }

    #[test]
    fn zero_measurement_gives_zero_ridge() {
        let g = random_gamma(10, 32, 1);
        let r = reconstruct_scene(&[Complex64::new(0.0, 0.0); 10], &g, ReconstructionMode::LeastSquaresRidge { mu: 0.3 }).unwrap();
        assert!(r.eta.iter().all(|e| e.norm() == 0.0));
    }

    #[test]
    fn underdetermined_without_ridge_is_singular() {
        let g = random_gamma(10, 32, 2);
        let y = vec![Complex64::new(1.0, 0.0); 10];
        let r = reconstruct_scene(&y, &g, ReconstructionMode::LeastSquaresRidge { mu: 0.0 });
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn overdetermined_exact_recovery() {
        let g = random_gamma(100, 32, 3);
        let eta: Vec<Complex64> = (0..32).map(|n| Complex64::new(n as f64 * 0.1, -0.05 * n as f64)).collect();
        let y: Vec<Complex64> = (&g.gamma * DVector::from_column_slice(&eta)).iter().copied().collect();
        let r = reconstruct_scene(&y, &g, ReconstructionMode::LeastSquaresRidge { mu: 0.0 }).unwrap();
        let err: f64 = r.eta.iter().zip(&eta).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = eta.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-10);
    }

    #[test]
    fn omp_residual_never_grows() {
        let g = random_gamma(20, 32, 4);
        let y: Vec<Complex64> = (0..20).map(|n| Complex64::new((n as f64).cos(), 0.2)).collect();
        let r = reconstruct_scene(&y, &g, ReconstructionMode::MatchingPursuit { sparsity: 12, tol: 0.0 }).unwrap();
        assert_eq!(r.residual_history.len(), 13);
        for w in r.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert!(reconstruct_scene(&y, &g, ReconstructionMode::MatchingPursuit { sparsity: 0, tol: 0.0 }).is_err());
    }
}
