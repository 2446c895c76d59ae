//! Lower convex hulls and interpolation over rate-distortion point clouds.

/// Indices of the lower convex hull of `points` (as `(rate, distortion)`),
/// sorted by rate.
///
/// Monotone chain over the lower side. Collinear interior points are
/// dropped; the leftmost point is the lowest-distortion point among those
/// with minimal rate. The returned chain starts at the minimal-rate point and
/// stops at the global minimum of distortion, so it is a nonincreasing
/// distortion-vs-rate curve.
pub fn convex_hull_lower_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| points[i].0.is_finite() && points[i].1.is_finite()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    order.dedup_by(|a, b| points[*a] == points[*b]);

    let mut hull: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        if let Some(&last) = hull.last() {
            // Same rate, higher distortion: never on the lower hull.
            if points[last].0 == points[i].0 {
                continue;
            }
        }
        while hull.len() >= 2 {
            let o = points[hull[hull.len() - 2]];
            let a = points[hull[hull.len() - 1]];
            let b = points[i];
            let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    // Keep the decreasing part only: past the distortion minimum the curve
    // is dominated.
    if let Some(argmin) = hull
        .iter()
        .enumerate()
        .min_by(|a, b| points[*a.1].1.total_cmp(&points[*b.1].1).then(a.0.cmp(&b.0)))
        .map(|(pos, _)| pos)
    {
        hull.truncate(argmin + 1);
    }
    hull
}

/// Lower convex hull of `(rate, distortion)` pairs.
pub fn convex_hull_lower(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    convex_hull_lower_indices(points).into_iter().map(|i| points[i]).collect()
}

/// Piecewise-linear interpolation of a curve sorted by its first coordinate.
/// Returns `None` outside the covered range.
pub fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let first = curve.first()?;
    let last = curve.last()?;
    if x < first.0 || x > last.0 {
        return None;
    }
    let idx = curve.partition_point(|p| p.0 < x);
    if idx == 0 {
        return Some(first.1);
    }
    let (x0, y0) = curve[idx - 1];
    let (x1, y1) = curve[idx];
    if x1 == x0 {
        return Some(y1.min(y0));
    }
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Lower-hull distortion at rate `x`; beyond the last hull point the curve is
/// flat at its minimum. `None` left of the first point.
pub fn hull_value(hull: &[(f64, f64)], x: f64) -> Option<f64> {
    let last = hull.last()?;
    if x >= last.0 {
        return Some(last.1);
    }
    interpolate(hull, x)
}
