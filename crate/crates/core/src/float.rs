//! Floating-point helpers shared by the accumulators and solvers.

/// Error-free transformation of `a + b` (Knuth). Returns `(sum, err)` with
/// `sum + err == a + b` exactly.
#[inline(always)]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Adds `x` into a compensated `(sum, comp)` pair.
#[inline(always)]
pub(crate) fn comp_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let (s, e) = two_sum(*sum, x);
    *sum = s;
    *comp += e;
}
