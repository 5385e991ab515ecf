//! Adaptive Simpson quadrature over rectangles.
//!
//! The 2-D rule is the iterated form: an outer adaptive Simpson in `x` whose
//! integrand is an inner adaptive Simpson in `y`. Integrands are vector
//! valued (`[f64; N]`) so several related integrals share every function
//! evaluation; each component is held to its own tolerance.

/// Tolerance settings shared by both integration directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpsonOptions {
    /// Relative tolerance against a coarse whole-domain estimate.
    pub rel_tol: f64,
    /// Bisection levels allowed below each initial panel.
    pub max_depth: u32,
    /// Bisection levels always taken before the error test may accept.
    pub min_depth: u32,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            max_depth: 12,
            min_depth: 2,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<const N: usize> {
    pub value: [f64; N],
    /// False when some panel hit `max_depth` without meeting its tolerance.
    pub converged: bool,
    pub evaluations: usize,
}

struct Ctx<'f, F, const N: usize> {
    f: &'f mut F,
    opts: SimpsonOptions,
    converged: bool,
    evaluations: usize,
}

impl<F: FnMut(f64) -> [f64; N], const N: usize> Ctx<'_, F, N> {
    fn eval(&mut self, x: f64) -> [f64; N] {
        self.evaluations += 1;
        (self.f)(x)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        a: f64,
        b: f64,
        fa: [f64; N],
        fm: [f64; N],
        fb: [f64; N],
        whole: [f64; N],
        eps: [f64; N],
        depth: u32,
    ) -> [f64; N] {
        let m = 0.5 * (a + b);
        let h = b - a;
        let flm = self.eval(0.5 * (a + m));
        let frm = self.eval(0.5 * (m + b));
        let mut left = [0.0; N];
        let mut right = [0.0; N];
        let mut delta = [0.0; N];
        let mut ok = true;
        for i in 0..N {
            left[i] = h / 12.0 * (fa[i] + 4.0 * flm[i] + fm[i]);
            right[i] = h / 12.0 * (fm[i] + 4.0 * frm[i] + fb[i]);
            delta[i] = left[i] + right[i] - whole[i];
            if delta[i].abs() > 15.0 * eps[i] || !delta[i].is_finite() {
                ok = false;
            }
        }
        if (ok && depth >= self.opts.min_depth) || depth >= self.opts.max_depth {
            if !ok {
                self.converged = false;
            }
            let mut out = [0.0; N];
            for i in 0..N {
                out[i] = left[i] + right[i] + delta[i] / 15.0;
            }
            return out;
        }
        let mut half = eps;
        for e in half.iter_mut() {
            *e *= 0.5;
        }
        let l = self.recurse(a, m, fa, flm, fm, left, half, depth + 1);
        let r = self.recurse(m, b, fm, frm, fb, right, half, depth + 1);
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = l[i] + r[i];
        }
        out
    }
}

/// Integrates `f` over `[a, b]`, splitting first at the interior `breaks`
/// (points where the integrand is known to peak).
pub fn integrate_1d<F, const N: usize>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: SimpsonOptions,
) -> Quadrature<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let mut nodes = vec![a];
    let mut interior: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    nodes.extend(interior);
    nodes.push(b);

    let mut ctx = Ctx {
        f: &mut f,
        opts,
        converged: true,
        evaluations: 0,
    };
    if b <= a {
        return Quadrature {
            value: [0.0; N],
            converged: true,
            evaluations: 0,
        };
    }

    // Panel end points and midpoints, plus a coarse composite estimate that
    // sets the absolute tolerance.
    let mut panels = Vec::with_capacity(nodes.len() - 1);
    let mut coarse = [0.0; N];
    let mut f_prev = ctx.eval(nodes[0]);
    for w in nodes.windows(2) {
        let (pa, pb) = (w[0], w[1]);
        let fm = ctx.eval(0.5 * (pa + pb));
        let fb = ctx.eval(pb);
        let mut whole = [0.0; N];
        for i in 0..N {
            whole[i] = (pb - pa) / 6.0 * (f_prev[i] + 4.0 * fm[i] + fb[i]);
            coarse[i] += whole[i].abs();
        }
        panels.push((pa, pb, f_prev, fm, fb, whole));
        f_prev = fb;
    }
    let total_width = b - a;
    let mut value = [0.0; N];
    for (pa, pb, fa, fm, fb, whole) in panels {
        let share = (pb - pa) / total_width;
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = opts.rel_tol * coarse[i] * share;
        }
        let v = ctx.recurse(pa, pb, fa, fm, fb, whole, eps, 0);
        for i in 0..N {
            value[i] += v[i];
        }
    }
    Quadrature {
        value,
        converged: ctx.converged,
        evaluations: ctx.evaluations,
    }
}

/// Iterated adaptive Simpson over `[x0, x1] × [y0, y1]`.
pub fn integrate_2d<F, const N: usize>(
    f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    x_breaks: &[f64],
    y_breaks: &[f64],
    opts: SimpsonOptions,
) -> Quadrature<N>
where
    F: Fn(f64, f64) -> [f64; N],
{
    let mut inner_converged = true;
    let mut inner_evals = 0usize;
    let outer = integrate_1d(
        |x| {
            let q = integrate_1d(|y| f(x, y), y0, y1, y_breaks, opts);
            inner_converged &= q.converged;
            inner_evals += q.evaluations;
            q.value
        },
        x0,
        x1,
        x_breaks,
        opts,
    );
    Quadrature {
        value: outer.value,
        converged: outer.converged && inner_converged,
        evaluations: inner_evals,
    }
}
