//! Finite, testable surrogates of the qualitative claims: decay of the
//! submerged part, bump-shape agreement with the limit profile, multiplier
//! and separation trends under a shrinking competing coefficient, and
//! ground-state existence probes across growing boxes.

use rayon::prelude::*;

use crate::decomp::{dist, emerging_parts, norm, split, BumpLayout, ThresholdSet};
use crate::energy::{action_i, grad_i, Coeffs};
use crate::error::{Error, Result};
use crate::field::{integrate, integrate_with, sample, CoefficientPair, Domain, GridField};
use crate::limit::{solve_ground_state, LimitPack};
use crate::maxmin::{outer_maximize, InnerSolveResult, OuterOptions, Problem};
use crate::scalar::Real;

/// Log-linear fit of the submerged part against the distance to the
/// emerging support, over 2..6 decay lengths (`1/eta_s` each). Passes when
/// the fitted rate reaches the certified `eta_s`.
pub fn decay_check<T: Real>(
    result: &InnerSolveResult<T>,
    layout: &BumpLayout<T>,
    thresholds: &ThresholdSet<T>,
) -> Result<(T, bool)> {
    let _ = layout;
    decay_rate_of_field(&result.u, thresholds).map(|rate| (rate, rate >= thresholds.eta_s))
}

/// Same fit for a bare field (used for the limit profile cross-check).
pub fn decay_rate_of_field<T: Real>(
    u: &GridField<T>,
    thresholds: &ThresholdSet<T>,
) -> Result<T> {
    let parts = split(u, thresholds.delta)?;
    let dom = u.domain();
    let support: Vec<[T; 2]> = (0..dom.node_count())
        .filter(|&i| parts.high.at(i) > T::zero())
        .map(|i| dom.point(i))
        .collect();
    if support.is_empty() {
        return Err(Error::Fit("no emerging support to measure distance from".into()));
    }
    let len = T::one() / thresholds.eta_s;
    let (d_lo, d_hi) = (T::two() * len, T::of(6.0) * len);
    let mut sx = T::zero();
    let mut sy = T::zero();
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut count = 0usize;
    for i in 0..dom.node_count() {
        let v = parts.low.at(i);
        if !(v > T::zero()) || v >= thresholds.delta {
            continue;
        }
        let p = dom.point(i);
        let d = support
            .iter()
            .map(|s| dist(p, *s))
            .fold(T::infinity(), |m, x| m.min(x));
        if d < d_lo || d > d_hi {
            continue;
        }
        let y = v.ln();
        sx += d;
        sy += y;
        sxx += d * d;
        sxy += d * y;
        count += 1;
    }
    if count < 20 {
        return Err(Error::Fit(format!("only {count} sample nodes in the decay window")));
    }
    let n = T::of(count as f64);
    let denom = n * sxx - sx * sx;
    if denom.abs() < T::of(1e-300) {
        return Err(Error::Fit("degenerate decay fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    Ok(-slope)
}

/// Per-bump sup distance to the limit profile and strict support
/// containment.
#[derive(Debug, Clone)]
pub struct ShapeReport<T: Real> {
    /// `sup_(|x| < r) |u(x + x_i) - w(x)|` per bump.
    pub distance: Vec<T>,
    /// Whether each emerging support sits strictly inside its ball.
    pub support_strict: Vec<bool>,
}

pub fn shape_distance<T: Real>(
    result: &InnerSolveResult<T>,
    layout: &BumpLayout<T>,
    pack: &LimitPack<T>,
    r: T,
    thresholds: &ThresholdSet<T>,
) -> Result<ShapeReport<T>> {
    let dom = result.u.domain();
    let l = dom.half_width();
    for c in &layout.centers {
        if norm(*c) + r > l {
            return Err(Error::Config(format!(
                "sampling radius {r} around {:?} leaves the box",
                c.map(|x| x.to_f64_lossy())
            )));
        }
    }
    let parts = split(&result.u, thresholds.delta)?;
    let mass_tol = T::of(1e-10) * (T::one() + integrate(&parts.high));
    let emerging = emerging_parts(&parts.high, layout, mass_tol)?;
    let h = dom.spacing();
    let mut distance = Vec::with_capacity(layout.k());
    let mut strict = Vec::with_capacity(layout.k());
    for (i, c) in layout.centers.iter().enumerate() {
        let mut sup = T::zero();
        for n in 0..dom.node_count() {
            let p = dom.point(n);
            let off = [p[0] - c[0], p[1] - c[1]];
            let rr = norm(off);
            if rr < r {
                let w_val = pack.profile.value_at(rr);
                let u_val = result.u.interp_cubic(p);
                sup = sup.max((u_val - w_val).abs());
            }
        }
        distance.push(sup);
        let max_support_dist = (0..dom.node_count())
            .filter(|&n| emerging.parts[i].at(n) > T::zero())
            .map(|n| dist(dom.point(n), *c))
            .fold(T::zero(), |m, v| m.max(v));
        strict.push(max_support_dist < layout.radius - h);
    }
    Ok(ShapeReport { distance, support_strict: strict })
}

/// One row of the shrinking-`C` scan.
#[derive(Debug, Clone)]
pub struct ScanRow<T: Real> {
    pub c: T,
    pub mu: T,
    pub max_lambda: T,
    pub min_separation: Option<T>,
    pub shape_distance: T,
    pub decay_rate: T,
    pub converged: bool,
}

/// Monotone-trend statistics over the converged rows, each trend allowed
/// one 5%-magnitude violation to absorb optimizer noise.
#[derive(Debug, Clone, Copy)]
pub struct TrendStats {
    pub lambda_violations: usize,
    pub separation_violations: usize,
    pub shape_violations: usize,
    pub lambda_trend_ok: bool,
    pub separation_trend_ok: bool,
    pub converged_rows: usize,
}

/// Scan a strictly descending list of competing amplitudes: for each `C`
/// run the outer maximization at the given `k` and collect multiplier,
/// separation, shape, and decay statistics. Rows are evaluated
/// independently (deterministic per-row seeds) and aggregated in order.
pub fn b_scan<T: Real>(
    base: &CoefficientPair<T>,
    c_list: &[T],
    k: usize,
    dom: Domain<T>,
    p: T,
    q: T,
    opts: &OuterOptions<T>,
) -> Result<(Vec<ScanRow<T>>, TrendStats)> {
    if c_list.len() < 4 {
        return Err(Error::Config("scan needs at least 4 amplitudes".into()));
    }
    if !c_list.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::Config("amplitude list must be strictly descending".into()));
    }
    let pack = solve_ground_state(base.a_inf, p, dom)?;
    let thresholds = ThresholdSet::derive(base.a0, p, q, base.eta, &pack)?;
    for &c in c_list {
        if !(c < thresholds.b1) {
            return Err(Error::Config(format!(
                "amplitude {c} is not below the admissible bound {}",
                thresholds.b1
            )));
        }
    }

    let rows: Vec<ScanRow<T>> = c_list
        .par_iter()
        .enumerate()
        .map(|(row_idx, &c)| {
            let pair = with_amplitude(base, c);
            let (a_field, b_field) = match sample(&pair, dom) {
                Ok(f) => f,
                Err(_) => return failed_row(c),
            };
            let coeffs = Coeffs::new(&a_field, &b_field, p, q);
            let problem = Problem {
                coeffs,
                pack: &pack,
                thresholds,
                a0: pair.a0,
                zeta: pair.zeta,
            };
            let mut row_opts = *opts;
            row_opts.seed = opts.seed.wrapping_add(row_idx as u64);
            match outer_maximize(&problem, k, &row_opts) {
                Ok(report) => {
                    let r_shape = thresholds.big_r.min(
                        dom.half_width()
                            - report
                                .layout
                                .centers
                                .iter()
                                .map(|&c0| norm(c0))
                                .fold(T::zero(), |m, v| m.max(v)),
                    );
                    let shape = shape_distance(&report.inner, &report.layout, &pack, r_shape, &thresholds)
                        .map(|s| s.distance.iter().fold(T::zero(), |m, &v| m.max(v)))
                        .unwrap_or(T::nan());
                    let decay = decay_check(&report.inner, &report.layout, &thresholds)
                        .map(|(rate, _)| rate)
                        .unwrap_or(T::nan());
                    ScanRow {
                        c,
                        mu: report.mu,
                        max_lambda: report.inner.max_lambda(),
                        min_separation: report.layout.min_separation(),
                        shape_distance: shape,
                        decay_rate: decay,
                        converged: report.inner.converged,
                    }
                }
                Err(_) => failed_row(c),
            }
        })
        .collect();

    let good: Vec<&ScanRow<T>> = rows.iter().filter(|r| r.converged).collect();
    let tolerance = T::of(0.05);
    let mut lambda_violations = 0usize;
    let mut separation_violations = 0usize;
    let mut shape_violations = 0usize;
    for w in good.windows(2) {
        if w[1].max_lambda > w[0].max_lambda * (T::one() + tolerance) {
            lambda_violations += 1;
        }
        if let (Some(s0), Some(s1)) = (w[0].min_separation, w[1].min_separation) {
            if s1 < s0 * (T::one() - tolerance) {
                separation_violations += 1;
            }
        }
        if w[1].shape_distance > w[0].shape_distance * (T::one() + tolerance) {
            shape_violations += 1;
        }
    }
    let stats = TrendStats {
        lambda_violations,
        separation_violations,
        shape_violations,
        lambda_trend_ok: lambda_violations <= 1,
        separation_trend_ok: separation_violations <= 1,
        converged_rows: good.len(),
    };
    Ok((rows, stats))
}

fn failed_row<T: Real>(c: T) -> ScanRow<T> {
    ScanRow {
        c,
        mu: T::nan(),
        max_lambda: T::nan(),
        min_separation: None,
        shape_distance: T::nan(),
        decay_rate: T::nan(),
        converged: false,
    }
}

fn with_amplitude<T: Real>(base: &CoefficientPair<T>, c: T) -> CoefficientPair<T> {
    use crate::field::BDescriptor::*;
    let mut pair = *base;
    pair.b = match pair.b {
        Zero => Zero,
        Rational { power, .. } => Rational { amplitude: c, power },
        Exponential { kappa, .. } => Exponential { amplitude: c, kappa },
        CompactTent { radius, .. } => CompactTent { amplitude: c, radius },
    };
    pair
}

/// Unique positive Nehari scaling of `u`: the closed form for `b = 0`,
/// otherwise the certified root of `d/dt I(tu) = 0`.
pub fn nehari_project<T: Real>(u: &GridField<T>, coeffs: &Coeffs<T>) -> Result<T> {
    let dom = u.domain();
    let norm_a = crate::field::gradient_bilinear(u, u)
        + integrate_with(dom, |i| coeffs.a.at(i) * u.at(i) * u.at(i));
    let pp1 = coeffs.p + T::one();
    let qp1 = coeffs.q + T::one();
    let focus = integrate_with(dom, |i| u.at(i).abs().powf(pp1));
    if !(focus > T::zero()) {
        return Err(Error::EmptyBump(0));
    }
    let compete = integrate_with(dom, |i| coeffs.b.at(i) * u.at(i).abs().powf(qp1));
    if compete == T::zero() {
        return Ok((norm_a / focus).powf(T::one() / (coeffs.p - T::one())));
    }
    // psi(t) = norm + t^(q-1) compete - t^(p-1) focus has a single positive
    // root beyond its lone interior maximum
    let psi = |t: T| {
        norm_a + t.powf(coeffs.q - T::one()) * compete - t.powf(coeffs.p - T::one()) * focus
    };
    let mut hi = T::one();
    let mut found = false;
    for _ in 0..200 {
        if psi(hi) < T::zero() {
            found = true;
            break;
        }
        hi = hi * T::two();
    }
    if !found {
        return Err(Error::Solver("no Nehari crossing found".into()));
    }
    let mut lo = hi * T::half();
    while psi(lo) < T::zero() {
        lo = lo * T::half();
        if lo < T::of(1e-30) {
            return Err(Error::Solver("Nehari bracket degenerated".into()));
        }
    }
    for _ in 0..200 {
        let mid = T::half() * (lo + hi);
        if psi(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::of(1e-14) * hi {
            break;
        }
    }
    // certificate: exactly one sign change on the sampled bracket
    let mut changes = 0usize;
    let mut prev = psi(hi / T::of(64.0));
    for j in 2..=64usize {
        let t = hi * T::of(j as f64 / 64.0);
        let v = psi(t);
        if (v < T::zero()) != (prev < T::zero()) {
            changes += 1;
        }
        prev = v;
    }
    if changes != 1 {
        return Err(Error::Solver(format!(
            "Nehari derivative changes sign {changes} times"
        )));
    }
    Ok(T::half() * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Exists,
    Escape,
    Indeterminate,
}

/// Outcome of the ground-state probe across box sizes.
#[derive(Debug, Clone)]
pub struct GroundStateVerdict<T: Real> {
    pub verdict: Verdict,
    pub m_candidate: T,
    /// Action of the Nehari-projected ground-state translate at the box
    /// margin: the level of escaping mass.
    pub reference: T,
    pub margin: T,
    /// Outward drift of the minimizer center per unit of box growth.
    pub drift_slope: T,
    pub centers: Vec<[T; 2]>,
    pub box_sizes: Vec<T>,
}

/// Probe for a ground state: minimize `I` on the Nehari manifold from
/// centered, off-center, and near-margin starts, on each box size in turn.
/// Existence shows up as a stable interior minimizer strictly below the
/// escape level; non-existence as a center drifting with the box.
pub fn ground_state_probe<T: Real>(
    pair: &CoefficientPair<T>,
    p: T,
    q: T,
    dim: usize,
    box_sizes: &[T],
    target_spacing: T,
    budget: usize,
) -> Result<GroundStateVerdict<T>> {
    if box_sizes.len() < 2 {
        return Err(Error::Config("probe needs at least two box sizes".into()));
    }
    pair.validate()?;
    let mut centers = Vec::new();
    let mut m_candidates = Vec::new();
    let mut references = Vec::new();
    let mut all_converged = true;

    for &l in box_sizes {
        let m_nodes = (((T::two() * l / target_spacing).to_f64_lossy().round() as usize) | 1).max(33);
        let dom = Domain::new(dim, l, m_nodes)?;
        let (a_field, b_field) = sample(pair, dom)?;
        let coeffs = Coeffs::new(&a_field, &b_field, p, q);
        let pack = solve_ground_state(pair.a_inf, p, dom)?;
        let margin_dist = T::of(8.0) / pair.a0.sqrt();
        let r_edge = l - margin_dist;
        let zeta = pair.zeta;

        let reference = {
            let w_edge = pack.translate(dom, [zeta[0] * r_edge, zeta[1] * r_edge]);
            let t = nehari_project(&w_edge, &coeffs)?;
            action_i(&w_edge.scaled(t), &coeffs).total
        };
        references.push(reference);

        let starts = [
            [T::zero(), T::zero()],
            [zeta[0] * r_edge * T::half(), zeta[1] * r_edge * T::half()],
            [zeta[0] * r_edge, zeta[1] * r_edge],
        ];
        let mut best: Option<(T, [T; 2])> = None;
        for s in starts {
            match nehari_descent(&pack, &coeffs, s, budget) {
                Ok((value, center)) => {
                    if best.map_or(true, |(bv, _)| value < bv) {
                        best = Some((value, center));
                    }
                }
                Err(_) => all_converged = false,
            }
        }
        let (value, center) =
            best.ok_or_else(|| Error::IndeterminateVerdict("all probe starts failed".into()))?;
        m_candidates.push(value);
        centers.push(center);
    }

    let last = box_sizes.len() - 1;
    let m_candidate = m_candidates[last];
    let reference = references[last];
    let margin = reference - m_candidate;
    let mut slope_acc = T::zero();
    for i in 1..box_sizes.len() {
        let dl = box_sizes[i] - box_sizes[i - 1];
        slope_acc += (norm(centers[i]) - norm(centers[i - 1])) / dl;
    }
    let drift_slope = slope_acc / T::of((box_sizes.len() - 1) as f64);

    let tol = T::of(0.01) * T::one().max(reference.abs());
    let verdict = if drift_slope > T::half() {
        Verdict::Escape
    } else if margin > tol && drift_slope < T::of(0.2) {
        Verdict::Exists
    } else if !all_converged {
        return Err(Error::IndeterminateVerdict(format!(
            "budget {budget} exhausted with margin {margin} and drift {drift_slope}"
        )));
    } else {
        Verdict::Indeterminate
    };
    Ok(GroundStateVerdict {
        verdict,
        m_candidate,
        reference,
        margin,
        drift_slope,
        centers,
        box_sizes: box_sizes.to_vec(),
    })
}

/// Projected gradient descent on the Nehari manifold: clipped gradient
/// step, rescale back onto the manifold, accept only energy decreases.
fn nehari_descent<T: Real>(
    pack: &LimitPack<T>,
    coeffs: &Coeffs<T>,
    start_center: [T; 2],
    budget: usize,
) -> Result<(T, [T; 2])> {
    let dom = coeffs.domain();
    let w0 = pack.translate(dom, start_center);
    let t0 = nehari_project(&w0, coeffs)?;
    let mut u = w0.scaled(t0);
    let mut value = action_i(&u, coeffs).total;

    let h = dom.spacing();
    let dim_t = T::of(dom.dim() as f64);
    let mut stall = 0usize;
    let mut iters = 0usize;
    while iters < budget && stall < 3 {
        iters += 1;
        let sup = u.sup_abs().max(T::one());
        let lip = T::of(4.0) * dim_t / (h * h)
            + coeffs.a.sup_abs()
            + coeffs.q * coeffs.b_sup() * sup.powf(coeffs.q - T::one())
            + coeffs.p * sup.powf(coeffs.p - T::one());
        let mut step = T::of(4.0) / lip;
        let g = grad_i(&u, coeffs);
        let mut accepted = false;
        for _ in 0..25 {
            let mut cand = u.zip_with(&g, |a, b| (a - step * b).max(T::zero()));
            cand.zero_boundary();
            if let Ok(t) = nehari_project(&cand, coeffs) {
                let cand = cand.scaled(t);
                let cand_value = action_i(&cand, coeffs).total;
                if cand_value <= value {
                    let decrease = value - cand_value;
                    u = cand;
                    value = cand_value;
                    accepted = true;
                    if decrease <= T::of(1e-10) * (T::one() + value.abs()) {
                        stall += 1;
                    } else {
                        stall = 0;
                    }
                    break;
                }
            }
            step = step * T::half();
        }
        if !accepted {
            stall += 1;
        }
    }
    if iters >= budget && stall == 0 {
        return Err(Error::IndeterminateVerdict("descent budget exhausted".into()));
    }
    let mass = integrate_with(dom, |i| u.at(i) * u.at(i));
    let cx = integrate_with(dom, |i| u.at(i) * u.at(i) * dom.point(i)[0]) / mass;
    let cy = match dom.dim() {
        1 => T::zero(),
        _ => integrate_with(dom, |i| u.at(i) * u.at(i) * dom.point(i)[1]) / mass,
    };
    Ok((value, [cx, cy]))
}
