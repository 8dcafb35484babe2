//! Derivative-free maximizers: a region-clamped Nelder-Mead simplex for the
//! joint likelihood and golden-section search for the one-dimensional
//! arrival problems.

use crate::geometry::{Point2, Region};

pub(crate) struct NmOutcome {
    pub point: Point2,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Maximizes `f` over `region` starting a simplex at `start` with edge
/// `step`. Candidate points are clamped onto the rectangle, so the iterate
/// never leaves the feasible set. Stops when the simplex diameter falls
/// below `tol`.
pub(crate) fn nelder_mead_max<F: FnMut(Point2) -> f64>(
    mut f: F,
    start: Point2,
    step: f64,
    region: Region,
    tol: f64,
    max_iter: usize,
) -> NmOutcome {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let clamp = |p: Point2| region.clamp(p);
    let mut evals = 0usize;
    let mut eval = |p: Point2, evals: &mut usize| {
        *evals += 1;
        f(p)
    };

    let p0 = clamp(start);
    // nudge degenerate vertices inward when the start sits on the boundary
    let dx = if p0.x + step <= region.x_max { step } else { -step };
    let dy = if p0.y + step <= region.y_max { step } else { -step };
    let mut simplex = [p0, clamp(p0.add(dx, 0.0)), clamp(p0.add(0.0, dy))];
    let mut values = [
        eval(simplex[0], &mut evals),
        eval(simplex[1], &mut evals),
        eval(simplex[2], &mut evals),
    ];

    let mut converged = false;
    for _ in 0..max_iter {
        // order descending by value (index 0 best for a maximizer)
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        let (best, mid, worst) = (order[0], order[1], order[2]);

        let diam = simplex[best]
            .dist(simplex[mid])
            .max(simplex[best].dist(simplex[worst]))
            .max(simplex[mid].dist(simplex[worst]));
        if diam < tol {
            converged = true;
            break;
        }

        let centroid = Point2::new(
            0.5 * (simplex[best].x + simplex[mid].x),
            0.5 * (simplex[best].y + simplex[mid].y),
        );
        let reflect = clamp(Point2::new(
            centroid.x + ALPHA * (centroid.x - simplex[worst].x),
            centroid.y + ALPHA * (centroid.y - simplex[worst].y),
        ));
        let f_reflect = eval(reflect, &mut evals);

        if f_reflect > values[best] {
            let expand = clamp(Point2::new(
                centroid.x + GAMMA * (reflect.x - centroid.x),
                centroid.y + GAMMA * (reflect.y - centroid.y),
            ));
            let f_expand = eval(expand, &mut evals);
            if f_expand > f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect > values[mid] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
            continue;
        }
        let contract = clamp(Point2::new(
            centroid.x + RHO * (simplex[worst].x - centroid.x),
            centroid.y + RHO * (simplex[worst].y - centroid.y),
        ));
        let f_contract = eval(contract, &mut evals);
        if f_contract > values[worst] {
            simplex[worst] = contract;
            values[worst] = f_contract;
            continue;
        }
        // shrink toward the best vertex
        for i in [mid, worst] {
            simplex[i] = clamp(Point2::new(
                simplex[best].x + SIGMA * (simplex[i].x - simplex[best].x),
                simplex[best].y + SIGMA * (simplex[i].y - simplex[best].y),
            ));
            values[i] = eval(simplex[i], &mut evals);
        }
    }

    let mut best = 0;
    for i in 1..3 {
        if values[i] > values[best] {
            best = i;
        }
    }
    NmOutcome {
        point: simplex[best],
        value: values[best],
        evals,
        converged,
    }
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]` to interval
/// width `tol`. Returns the midpoint of the final bracket and its value.
pub(crate) fn golden_section_max<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    const INV_PHI2: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2
    let mut x1 = lo + INV_PHI2 * (hi - lo);
    let mut x2 = hi - INV_PHI2 * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - INV_PHI2 * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + INV_PHI2 * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    (mid, fm)
}
