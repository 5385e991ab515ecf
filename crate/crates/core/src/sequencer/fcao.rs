//! Coordinate descent on the time-allocation matrix.
//!
//! Each frame row of `Γ = T·A` is `b + Σ_l (n_kl/39)·d_l` with
//! `b = Σ_l a_(l,OFF)` and `d_l = a_(l,ON) − a_(l,OFF)`, so changing one ON
//! count moves a single row of `Γ` along `d_l`. The Gram matrix `G = ΓᴴΓ` is
//! updated with a rank-one correction and the objective (mean squared
//! normalized off-diagonal Gram entry) is re-evaluated in `O(M²)` per level.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{TimeMatrix, SLOTS_PER_FRAME};
use crate::channel::{ChannelGainMatrix, STATES};
use crate::{labels, rng, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcaoOptions {
    pub frames: usize,
    /// Upper bound on full passes over all `(k, l)` cells, per restart.
    pub max_sweeps: usize,
    pub restarts: usize,
    /// A restart stops once a sweep improves the objective by less than this
    /// fraction.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for FcaoOptions {
    fn default() -> Self {
        Self {
            frames: super::DEFAULT_FRAMES,
            max_sweeps: 30,
            restarts: 4,
            rel_tol: 5e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcaoOutcome {
    pub time_matrix: TimeMatrix,
    pub objective: f64,
    /// Objective of every restart's random starting point.
    pub initial_objectives: Vec<f64>,
    /// Objective after each sweep of the winning restart, starting point first.
    pub trace: Vec<f64>,
    pub winning_restart: usize,
}

struct State {
    gamma: DMatrix<Complex64>,
    gram: DMatrix<Complex64>,
}

fn objective_from_gram(gram: &DMatrix<Complex64>) -> f64 {
    let m = gram.ncols();
    let mut sum = 0.0;
    for i in 0..m {
        let gi = gram[(i, i)].re;
        for j in (i + 1)..m {
            let den = gi * gram[(j, j)].re;
            sum += if den > 0.0 { gram[(i, j)].norm_sqr() / den } else { 1.0 };
        }
    }
    sum / (m * (m - 1) / 2) as f64
}

/// Mean squared coherence, the quantity the optimizer minimizes.
pub(crate) fn objective(gamma: &DMatrix<Complex64>) -> f64 {
    objective_from_gram(&(gamma.adjoint() * gamma))
}

/// Minimizes the mean squared coherence of `T·A` over realizable `T`.
pub fn fcao_optimize(a: &ChannelGainMatrix, opts: &FcaoOptions) -> Result<FcaoOutcome> {
    let am = &a.a;
    if am.nrows() % STATES != 0 || am.nrows() == 0 {
        return Err(Error::dims("A must have (OFF, ON) row pairs"));
    }
    if am.ncols() < 2 {
        return Err(Error::invalid("need at least two cuboids"));
    }
    if opts.frames == 0 || opts.restarts == 0 {
        return Err(Error::invalid("frames and restarts must be positive"));
    }
    let groups = am.nrows() / STATES;
    let m = am.ncols();
    let slots = SLOTS_PER_FRAME;
    let base: DVector<Complex64> = (0..groups)
        .map(|l| am.row(l * STATES).transpose())
        .fold(DVector::zeros(m), |acc, r| acc + r);
    let diffs: Vec<DVector<Complex64>> = (0..groups)
        .map(|l| (am.row(l * STATES + 1) - am.row(l * STATES)).transpose())
        .collect();

    let run = |r: usize| -> Result<(FcaoOutcome, f64)> {
        let mut g = rng::stream(opts.seed, labels!["fcao", r]);
        let mut counts: Vec<Vec<u32>> = (0..opts.frames)
            .map(|_| (0..groups).map(|_| g.random_range(0..=slots)).collect())
            .collect();
        let gamma = DMatrix::from_fn(opts.frames, m, |k, j| {
            let mut v = base[j];
            for l in 0..groups {
                v += diffs[l][j] * (f64::from(counts[k][l]) / f64::from(slots));
            }
            v
        });
        let gram = gamma.adjoint() * &gamma;
        let mut st = State { gamma, gram };
        let mut current = objective_from_gram(&st.gram);
        let initial = current;
        let mut trace = vec![current];

        let mut e = DMatrix::<Complex64>::zeros(m, m);
        let mut f = DMatrix::<Complex64>::zeros(m, m);
        for _ in 0..opts.max_sweeps {
            let mut improved = false;
            for k in 0..opts.frames {
                for l in 0..groups {
                    let row: Vec<Complex64> = st.gamma.row(k).iter().copied().collect();
                    let d = &diffs[l];
                    // G' = G + c·E + c²·F for a row shift of c·d.
                    for i in 0..m {
                        for j in 0..m {
                            e[(i, j)] = row[i].conj() * d[j] + d[i].conj() * row[j];
                            f[(i, j)] = d[i].conj() * d[j];
                        }
                    }
                    let n0 = counts[k][l];
                    let mut best_level = n0;
                    let mut best_val = current;
                    for level in 0..=slots {
                        if level == n0 {
                            continue;
                        }
                        let c = (f64::from(level) - f64::from(n0)) / f64::from(slots);
                        let val = shifted_objective(&st.gram, &e, &f, c);
                        if val < best_val * (1.0 - 1e-12) {
                            best_val = val;
                            best_level = level;
                        }
                    }
                    if best_level != n0 {
                        let c = (f64::from(best_level) - f64::from(n0)) / f64::from(slots);
                        for j in 0..m {
                            st.gamma[(k, j)] += d[j] * c;
                        }
                        st.gram += &e * Complex64::new(c, 0.0) + &f * Complex64::new(c * c, 0.0);
                        counts[k][l] = best_level;
                        current = best_val;
                        improved = true;
                    }
                }
            }
            // Refresh to stop rounding drift from the rank-one updates.
            st.gram = st.gamma.adjoint() * &st.gamma;
            let before = *trace.last().expect("trace starts non-empty");
            current = objective_from_gram(&st.gram).min(current);
            trace.push(current);
            if !improved || before - current < opts.rel_tol * before {
                break;
            }
        }
        let exact = objective(&st.gamma);
        let outcome = FcaoOutcome {
            time_matrix: TimeMatrix::from_on_counts(&counts, slots)?,
            objective: exact,
            initial_objectives: Vec::new(),
            trace,
            winning_restart: r,
        };
        Ok((outcome, initial))
    };
    let runs: Vec<(FcaoOutcome, f64)> = (0..opts.restarts).into_par_iter().map(run).collect::<Result<_>>()?;
    let initial_objectives: Vec<f64> = runs.iter().map(|(_, i)| *i).collect();
    // Lowest objective, earliest restart on ties.
    let mut best = runs
        .into_iter()
        .map(|(o, _)| o)
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("at least one restart");
    best.initial_objectives = initial_objectives;
    if !best.objective.is_finite() {
        return Err(Error::numerical("optimizer objective is not finite"));
    }
    Ok(best)
}

fn shifted_objective(
    gram: &DMatrix<Complex64>,
    e: &DMatrix<Complex64>,
    f: &DMatrix<Complex64>,
    c: f64,
) -> f64 {
    let m = gram.ncols();
    let c2 = c * c;
    let diag: Vec<f64> = (0..m)
        .map(|i| gram[(i, i)].re + c * e[(i, i)].re + c2 * f[(i, i)].re)
        .collect();
    let mut sum = 0.0;
    for j in 1..m {
        // Column-major: walk the strict upper triangle down each column.
        let gc = gram.column(j);
        let ec = e.column(j);
        let fc = f.column(j);
        let dj = diag[j];
        for i in 0..j {
            let v = gc[i] + ec[i] * c + fc[i] * c2;
            let den = diag[i] * dj;
            sum += if den > 0.0 { v.norm_sqr() / den } else { 1.0 };
        }
    }
    sum / (m * (m - 1) / 2) as f64
}
