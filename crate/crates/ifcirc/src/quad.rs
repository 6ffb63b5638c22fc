//! Adaptive panel-based Gaussian quadrature (Gauss 7 / Kronrod 15).
//!
//! Globally adaptive: the interval is seeded with a uniform panel set sized to
//! the integrand's characteristic oscillation, then the panel with the worst
//! error estimate is bisected until the summed error estimate meets the
//! tolerance. Convergence is judged against `max(abs_tol, rel_tol·|estimate|)`;
//! with `abs_tol = 0` the termination decisions are invariant under scaling of
//! the integrand, which downstream code relies on.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::C64;

/// 15-point Kronrod abscissae (positive half, descending; last is the center).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

/// 7-point Gauss weights; nodes are `XGK[1]`, `XGK[3]`, `XGK[5]` and the center.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: C64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadResult {
    pub value: C64,
    /// Summed per-panel error estimates.
    pub abs_error: f64,
    /// Whether the tolerance target was met within the panel budget.
    pub converged: bool,
}

/// One Gauss–Kronrod 7/15 evaluation on `[a, b]`.
///
/// Returns the Kronrod estimate and the |K − G| error estimate. All nodes are
/// interior, so the integrand is never evaluated at the endpoints.
fn gk15(f: &dyn Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        resk += s * WGK[i];
        if i % 2 == 1 {
            resg += s * WG[i / 2];
        }
    }
    ((resk * h), ((resk - resg) * h).norm())
}

/// Adaptively integrate `f` over `[a, b]`.
///
/// `init_panels` seeds the initial uniform subdivision (callers size it to the
/// integrand's oscillation); `max_panels` bounds total panel count. The final
/// value is accumulated over panels sorted by position, so it is deterministic
/// for fixed inputs regardless of refinement history.
pub(crate) fn integrate_adaptive(
    f: &dyn Fn(f64) -> C64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    init_panels: usize,
    max_panels: usize,
) -> QuadResult {
    let init = init_panels.max(1);
    let mut active: BinaryHeap<Panel> = BinaryHeap::with_capacity(init * 2);
    let mut settled: Vec<Panel> = Vec::new();
    let width = b - a;
    let mut total = C64::new(0.0, 0.0);
    let mut total_err = 0.0;
    for i in 0..init {
        let pa = a + width * (i as f64 / init as f64);
        let pb = a + width * ((i + 1) as f64 / init as f64);
        let (value, err) = gk15(f, pa, pb);
        total += value;
        total_err += err;
        active.push(Panel {
            a: pa,
            b: pb,
            value,
            err,
        });
    }

    let tolerance_met = |val: C64, err: f64| err <= abs_tol || err <= rel_tol * val.norm();
    let mut n_panels = init;
    let min_width = width * 1e-14;
    while !tolerance_met(total, total_err) && n_panels < max_panels {
        let Some(worst) = active.pop() else { break };
        if worst.b - worst.a <= min_width {
            // Bisection has hit floating-point resolution; freeze this panel
            // so the budget is spent where refinement can still help.
            settled.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(f, worst.a, mid);
        let (v2, e2) = gk15(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        active.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        active.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        n_panels += 1;
    }

    // Re-accumulate in interval order: left-to-right summation is independent
    // of the heap's pop history and slightly kinder to cancellation.
    settled.extend(active);
    settled.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = settled
        .iter()
        .fold(C64::new(0.0, 0.0), |acc, p| acc + p.value);
    let abs_error: f64 = settled.iter().map(|p| p.err).sum();
    QuadResult {
        value,
        abs_error,
        converged: tolerance_met(value, abs_error),
    }
}
