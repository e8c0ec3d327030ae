//! Adaptive Simpson quadrature.

use crate::scalar::Scalar;

const MAX_DEPTH: u32 = 48;

fn simpson<F: Scalar>(a: F, fa: F, b: F, fb: F, fm: F) -> F {
    (b - a) / F::lit(6.0) * (fa + F::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Scalar, G: Fn(F) -> F>(
    f: &G,
    a: F,
    fa: F,
    b: F,
    fb: F,
    m: F,
    fm: F,
    whole: F,
    tol: F,
    depth: u32,
) -> F {
    let half = F::lit(0.5);
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= F::lit(15.0) * tol || m <= a || m >= b {
        return left + right + delta / F::lit(15.0);
    }
    recurse(f, a, fa, m, fm, lm, flm, left, tol * half, depth + 1)
        + recurse(f, m, fm, b, fb, rm, frm, right, tol * half, depth + 1)
}

/// Integrates `f` over `[a, b]` to an absolute tolerance of roughly `tol`.
pub fn integrate<F: Scalar, G: Fn(F) -> F>(f: G, a: F, b: F, tol: F) -> F {
    if a == b {
        return F::zero();
    }
    if b < a {
        return -integrate(f, b, a, tol);
    }
    let m = (a + b) * F::lit(0.5);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(&f, a, fa, b, fb, m, fm, whole, tol, 0)
}

/// Integrates over consecutive panels `[p0, p1], [p1, p2], ...`, splitting the
/// tolerance evenly.
pub fn integrate_panels<F: Scalar, G: Fn(F) -> F>(f: G, breaks: &[F], tol: F) -> F {
    if breaks.len() < 2 {
        return F::zero();
    }
    let per = tol / F::lit((breaks.len() - 1) as f64);
    breaks
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], per))
        .fold(F::zero(), |acc, x| acc + x)
}
