//! Level-delta machinery: threshold selection, submerged/emerging split,
//! emerging-part extraction, local barycenters, and the scalar projections
//! onto the constraint classes.

use crate::energy::Coeffs;
use crate::error::{Error, Result};
use crate::field::{gradient_bilinear, integrate, integrate_with, Domain, GridField};
use crate::limit::LimitPack;
use crate::scalar::Real;

/// The admissibility thresholds gating the whole pipeline.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdSet<T: Real> {
    pub delta: T,
    /// Ball radius for the emerging parts.
    pub big_r: T,
    /// Admissible bound on `|b|_inf`.
    pub b1: T,
    /// Decay rate certified for the submerged part.
    pub eta_s: T,
}

impl<T: Real> ThresholdSet<T> {
    /// Derive all four thresholds from the coefficient data and the limit
    /// pack: the largest admissible dyadic `delta`, the ball radius from
    /// the profile tail, the explicit `B1` bound, and `eta_s` at the
    /// midpoint of its admissible interval.
    pub fn derive(a0: T, p: T, q: T, eta: T, pack: &LimitPack<T>) -> Result<Self> {
        let delta = choose_delta(a0, p, q, eta)?;
        let big_r = choose_r(pack, delta)?;
        let b1 = b1_threshold(delta, p, q)?;
        let hi = (a0 - delta.powf(p - T::one())).sqrt();
        debug_assert!(eta < hi);
        let eta_s = T::half() * (eta + hi);
        Ok(Self { delta, big_r, b1, eta_s })
    }
}

/// Largest `delta = 2^-m`, `m >= 2`, satisfying the four smallness
/// inequalities with 10% slack. Each left side is monotone in `delta`, so
/// the scan from large to small is exact and deterministic.
pub fn choose_delta<T: Real>(a0: T, p: T, q: T, eta: T) -> Result<T> {
    if !(a0 > T::zero()) {
        return Err(Error::Config("a0 must be positive".into()));
    }
    if !(eta >= T::zero() && eta < a0.sqrt()) {
        return Err(Error::Config("eta must lie in [0, sqrt(a0))".into()));
    }
    if !(T::one() < q && q < p) {
        return Err(Error::Config("exponents must satisfy 1 < q < p".into()));
    }
    let slack = T::of(0.9);
    let pm1 = p - T::one();
    for m in 2..=200 {
        let delta = T::of(2.0).powi(-(m as i32));
        let dp = delta.powf(pm1);
        let ok = p * dp <= slack * a0
            && dp / (p + T::one()) <= slack * a0 * T::half()
            && dp <= slack * (a0 - eta * eta)
            && T::two().powf(pm1) * dp <= slack * a0;
        if ok {
            return Ok(delta);
        }
    }
    Err(Error::Config("no admissible dyadic delta found".into()))
}

/// `R = 2 r*`, `r*` the first radius where the profile drops below
/// `delta`, rounded up to a multiple of the grid spacing.
pub fn choose_r<T: Real>(pack: &LimitPack<T>, delta: T) -> Result<T> {
    if !(delta < pack.peak) {
        return Err(Error::Config(format!(
            "delta = {delta} must be below the peak {}",
            pack.peak
        )));
    }
    let prof = &pack.profile;
    let mut r_star = prof.r_max();
    for j in 1..prof.r.len() {
        if prof.w[j] < delta {
            // linear interpolation of the crossing radius
            let t = (prof.w[j - 1] - delta) / (prof.w[j - 1] - prof.w[j]);
            r_star = prof.r[j - 1] + t * prof.step();
            break;
        }
    }
    let h = pack.w_grid.domain().spacing();
    let cells = (T::two() * r_star / h).ceil();
    Ok(cells * h)
}

/// Explicit admissibility bound on `|b|_inf`:
/// `B1 = p(p-1) delta^(p-q) / (q(q-1))`, the constant that makes
/// `q(q-1) b (delta+s)^(q-2) <= p(p-1)(delta+s)^(p-2)` for all `s >= 0`,
/// hence the third derivative of the fiber map negative.
pub fn b1_threshold<T: Real>(delta: T, p: T, q: T) -> Result<T> {
    if !(q > T::one()) {
        return Err(Error::Config("q must exceed 1".into()));
    }
    if !(p > q) {
        return Err(Error::Config("p must exceed q".into()));
    }
    Ok(p * (p - T::one()) * delta.powf(p - q) / (q * (q - T::one())))
}

/// Submerged/emerging decomposition at level `delta`; the reconstruction
/// `low + high = u` is node-wise bit-exact for dyadic `delta`.
#[derive(Debug, Clone)]
pub struct DeltaSplit<T: Real> {
    pub low: GridField<T>,
    pub high: GridField<T>,
}

pub fn split<T: Real>(u: &GridField<T>, delta: T) -> Result<DeltaSplit<T>> {
    if !u.is_nonnegative() {
        return Err(Error::Domain("split requires a nonnegative field".into()));
    }
    let low = u.map(|v| v.min(delta));
    let high = u.zip_with(&low, |a, b| a - b);
    Ok(DeltaSplit { low, high })
}

/// Bump centers with their common ball radius; membership in the layout
/// class requires pairwise separation `>= 2R`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpLayout<T: Real> {
    pub centers: Vec<[T; 2]>,
    pub radius: T,
}

impl<T: Real> BumpLayout<T> {
    pub fn new(centers: Vec<[T; 2]>, radius: T) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Config("layout needs at least one center".into()));
        }
        if !(radius > T::zero()) {
            return Err(Error::Config("ball radius must be positive".into()));
        }
        let layout = Self { centers, radius };
        if let Some(d) = layout.min_separation() {
            if d < T::two() * layout.radius {
                return Err(Error::Config(format!(
                    "centers too close: separation {} < 2R = {}",
                    d,
                    layout.radius * T::two()
                )));
            }
        }
        Ok(layout)
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn min_separation(&self) -> Option<T> {
        let mut best: Option<T> = None;
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                let d = dist(self.centers[i], self.centers[j]);
                best = Some(match best {
                    Some(b) => b.min(d),
                    None => d,
                });
            }
        }
        best
    }

    /// Every ball must sit at least `margin` inside the box (the margin is
    /// 4 decay lengths in the callers).
    pub fn validate_in_domain(&self, dom: Domain<T>, margin: T) -> Result<()> {
        let l = dom.half_width();
        for (i, c) in self.centers.iter().enumerate() {
            let reach = norm(*c) + self.radius + margin;
            if reach > l {
                return Err(Error::Config(format!(
                    "ball {i} reaches {reach} beyond the box half-width {l}"
                )));
            }
        }
        Ok(())
    }
}

#[inline]
pub fn dist<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

#[inline]
pub fn norm<T: Real>(a: [T; 2]) -> T {
    (a[0] * a[0] + a[1] * a[1]).sqrt()
}

/// The per-bump pieces of the emerging part, one field per center.
#[derive(Debug, Clone)]
pub struct EmergingSet<T: Real> {
    pub parts: Vec<GridField<T>>,
}

impl<T: Real> EmergingSet<T> {
    pub fn sum(&self) -> GridField<T> {
        let mut acc = GridField::zeros(self.parts[0].domain());
        for p in &self.parts {
            acc = acc.zip_with(p, |a, b| a + b);
        }
        acc
    }
}

/// Partition the emerging component into per-bump parts by nearest-ball
/// assignment of the connected components of its support. Componentwise
/// mass landing outside every ball beyond `tol` is an error, as is an
/// empty bump.
pub fn emerging_parts<T: Real>(
    high: &GridField<T>,
    layout: &BumpLayout<T>,
    tol: T,
) -> Result<EmergingSet<T>> {
    let dom = high.domain();
    let n = dom.node_count();
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut queue = Vec::new();
    for start in 0..n {
        if visited[start] || !(high.at(start) > T::zero()) {
            continue;
        }
        // collect one connected component (2N-neighbour BFS in index order)
        let mut component = Vec::new();
        visited[start] = true;
        queue.push(start);
        while let Some(i) = queue.pop() {
            component.push(i);
            for nb in neighbors(dom, i) {
                if !visited[nb] && high.at(nb) > T::zero() {
                    visited[nb] = true;
                    queue.push(nb);
                }
            }
        }
        // nearest ball wins; ties go to the lowest center index
        let mut best = 0usize;
        let mut best_d = T::infinity();
        for (ci, c) in layout.centers.iter().enumerate() {
            let d = component
                .iter()
                .map(|&i| dist(dom.point(i), *c))
                .fold(T::infinity(), |m, v| m.min(v));
            if d < best_d {
                best_d = d;
                best = ci;
            }
        }
        for &i in &component {
            assignment[i] = Some(best);
        }
    }

    let vol = dom.cell_volume();
    let mut outside_mass = T::zero();
    let mut parts: Vec<GridField<T>> = (0..layout.k()).map(|_| GridField::zeros(dom)).collect();
    for i in 0..n {
        if let Some(ci) = assignment[i] {
            let v = high.at(i);
            if dist(dom.point(i), layout.centers[ci]) > layout.radius {
                outside_mass += v * vol;
            }
            parts[ci].set(i, v);
        }
    }
    if outside_mass > tol {
        return Err(Error::EmergingOutsideBalls(format!(
            "mass {outside_mass} beyond tolerance {tol}"
        )));
    }
    for (ci, part) in parts.iter().enumerate() {
        if !part.values().iter().any(|&v| v > T::zero()) {
            return Err(Error::EmptyBump(ci));
        }
    }
    Ok(EmergingSet { parts })
}

fn neighbors<T: Real>(dom: Domain<T>, idx: usize) -> Vec<usize> {
    let m = dom.nodes_per_axis();
    let (ix, iy) = dom.split_index(idx);
    let mut out = Vec::with_capacity(4);
    if ix > 0 {
        out.push(dom.linear_index(ix - 1, iy));
    }
    if ix + 1 < m {
        out.push(dom.linear_index(ix + 1, iy));
    }
    if dom.dim() == 2 {
        if iy > 0 {
            out.push(dom.linear_index(ix, iy - 1));
        }
        if iy + 1 < m {
            out.push(dom.linear_index(ix, iy + 1));
        }
    }
    out
}

/// Weighted mean of `x - center` against the squared part:
/// `∫ part^2 (x - center) / ∫ part^2`.
pub fn barycenter<T: Real>(part: &GridField<T>, center: [T; 2]) -> Result<[T; 2]> {
    let dom = part.domain();
    let mass = integrate_with(dom, |i| part.at(i) * part.at(i));
    if !(mass > T::zero()) {
        return Err(Error::EmptyBump(0));
    }
    let mx = integrate_with(dom, |i| {
        let p = dom.point(i);
        part.at(i) * part.at(i) * (p[0] - center[0])
    });
    let my = match dom.dim() {
        1 => T::zero(),
        _ => integrate_with(dom, |i| {
            let p = dom.point(i);
            part.at(i) * part.at(i) * (p[1] - center[1])
        }),
    };
    Ok([mx / mass, my / mass])
}

/// Translate a field by `shift` (value at `x` becomes the old value at
/// `x - shift`) with cubic resampling; negatives from the interpolation are
/// clamped away and the boundary stays zero. A zero shift is the identity.
pub fn translate<T: Real>(f: &GridField<T>, shift: [T; 2]) -> GridField<T> {
    if shift[0] == T::zero() && shift[1] == T::zero() {
        return f.clone();
    }
    let dom = f.domain();
    let mut out = GridField::from_fn(dom, |p| {
        f.interp_cubic([p[0] - shift[0], p[1] - shift[1]]).max(T::zero())
    });
    out.zero_boundary();
    out
}

/// Which emerging part the fiber projection runs over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BumpSel {
    All,
    One(usize),
}

/// Scalar coefficients of the fiber map
/// `g(t) = I(rest + t v)` restricted to the support of `v`:
/// `g'(t) = kc + pc + t (kq + pq) + ∫ b (low + t v)^q v - ∫ (low + t v)^p v`.
struct Fiber<T: Real> {
    kin_cross: T,
    kin_quad: T,
    pot_cross: T,
    pot_quad: T,
    /// (value of v, value of low, a, b, trapezoid weight * h^N) per support node
    supp: Vec<(T, T, T, T, T)>,
    p: T,
    q: T,
}

impl<T: Real> Fiber<T> {
    fn build(rest: &GridField<T>, v: &GridField<T>, c: &Coeffs<T>) -> Self {
        let dom = v.domain();
        let vol = dom.cell_volume();
        let kin_cross = gradient_bilinear(rest, v);
        let kin_quad = gradient_bilinear(v, v);
        let pot_cross = integrate_with(dom, |i| c.a.at(i) * rest.at(i) * v.at(i));
        let pot_quad = integrate_with(dom, |i| c.a.at(i) * v.at(i) * v.at(i));
        let mut supp = Vec::new();
        for i in 0..dom.node_count() {
            if v.at(i) > T::zero() {
                supp.push((
                    v.at(i),
                    rest.at(i),
                    c.a.at(i),
                    c.b.at(i),
                    dom.trapezoid_weight(i) * vol,
                ));
            }
        }
        Self { kin_cross, kin_quad, pot_cross, pot_quad, supp, p: c.p, q: c.q }
    }

    fn dg(&self, t: T) -> T {
        let mut nl = T::zero();
        for &(v, low, _a, b, w) in &self.supp {
            let base = low + t * v;
            nl += (b * base.powf(self.q) - base.powf(self.p)) * v * w;
        }
        self.kin_cross + self.pot_cross + t * (self.kin_quad + self.pot_quad) + nl
    }

    fn d2g(&self, t: T) -> T {
        let mut nl = T::zero();
        for &(v, low, _a, b, w) in &self.supp {
            let base = low + t * v;
            nl += (self.q * b * base.powf(self.q - T::one())
                - self.p * base.powf(self.p - T::one()))
                * v
                * v
                * w;
        }
        self.kin_quad + self.pot_quad + nl
    }
}

/// Unique positive root of the fiber derivative: the maximizer of
/// `t -> I(u_delta + sum_{j != i} u_j^delta + t u_i^delta)`.
///
/// Solved by a doubling bracket plus safeguarded Newton; every accepted
/// root carries a uniqueness certificate (single sign change of `g'` over
/// 64 samples of the bracket, `g'' < 0` at the root).
pub fn theta_project<T: Real>(
    u: &GridField<T>,
    layout: &BumpLayout<T>,
    sel: BumpSel,
    coeffs: &Coeffs<T>,
    thresholds: &ThresholdSet<T>,
) -> Result<T> {
    let b_sup = coeffs.b_sup();
    if b_sup >= thresholds.b1 {
        return Err(Error::ThresholdViolated {
            have: b_sup.to_f64_lossy(),
            limit: thresholds.b1.to_f64_lossy(),
        });
    }
    let parts = split(u, thresholds.delta)?;
    let mass_tol = T::of(1e-10) * (T::one() + integrate(&parts.high));
    let emerging = emerging_parts(&parts.high, layout, mass_tol)?;
    let (v, rest) = match sel {
        BumpSel::All => (parts.high.clone(), parts.low.clone()),
        BumpSel::One(i) => {
            if i >= emerging.parts.len() {
                return Err(Error::Config(format!("bump index {i} out of range")));
            }
            let mut rest = parts.low.clone();
            for (j, pj) in emerging.parts.iter().enumerate() {
                if j != i {
                    rest = rest.zip_with(pj, |a, b| a + b);
                }
            }
            (emerging.parts[i].clone(), rest)
        }
    };
    if !v.values().iter().any(|&x| x > T::zero()) {
        return Err(Error::EmptyBump(match sel {
            BumpSel::All => 0,
            BumpSel::One(i) => i,
        }));
    }
    solve_fiber_root(&Fiber::build(&rest, &v, coeffs))
}

fn solve_fiber_root<T: Real>(fiber: &Fiber<T>) -> Result<T> {
    let g0 = fiber.dg(T::zero());
    if !(g0 > T::zero()) {
        return Err(Error::Solver(format!("fiber derivative nonpositive at 0: {g0}")));
    }
    let mut hi = T::one();
    let mut found = false;
    for _ in 0..200 {
        if fiber.dg(hi) < T::zero() {
            found = true;
            break;
        }
        hi = hi * T::two();
    }
    if !found {
        return Err(Error::Solver("no sign change found on the fiber".into()));
    }
    let mut lo = T::zero();
    let mut t = T::half() * (lo + hi);
    for _ in 0..200 {
        let g = fiber.dg(t);
        if g > T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        // Newton step, safeguarded by the bracket
        let d2 = fiber.d2g(t);
        let mut next = if d2 < T::zero() { t - g / d2 } else { T::nan() };
        if !(next > lo && next < hi) {
            next = T::half() * (lo + hi);
        }
        if (hi - lo) <= T::of(1e-14) * hi.max(T::one()) {
            t = T::half() * (lo + hi);
            break;
        }
        t = next;
    }

    // uniqueness certificate
    let samples = 64usize;
    let top = hi * (T::one() + T::of(1e-12));
    let mut changes = 0usize;
    let mut prev = fiber.dg(T::zero());
    for k in 1..=samples {
        let tk = top * T::of(k as f64 / samples as f64);
        let g = fiber.dg(tk);
        if (g < T::zero()) != (prev < T::zero()) {
            changes += 1;
        }
        prev = g;
    }
    if changes != 1 {
        return Err(Error::Solver(format!(
            "fiber derivative changes sign {changes} times on the bracket"
        )));
    }
    if !(fiber.d2g(t) < T::zero()) {
        return Err(Error::Solver("fiber second derivative not negative at the root".into()));
    }
    Ok(t)
}

/// Per-bump constraint residuals: the scalar Nehari pairing
/// `I'(u)[u_i^delta]` and the local barycenter vector of each part.
#[derive(Debug, Clone)]
pub struct ConstraintResiduals<T: Real> {
    pub nehari: Vec<T>,
    pub barycenter: Vec<[T; 2]>,
}

impl<T: Real> ConstraintResiduals<T> {
    pub fn max_abs(&self) -> T {
        let n = self.nehari.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let b = self
            .barycenter
            .iter()
            .fold(T::zero(), |m, v| m.max(v[0].abs()).max(v[1].abs()));
        n.max(b)
    }

    pub fn is_member(&self, tol: T) -> bool {
        self.max_abs() <= tol
    }
}

/// Compute the residuals of `u` with respect to a layout without altering it.
pub fn constraint_residuals<T: Real>(
    u: &GridField<T>,
    layout: &BumpLayout<T>,
    coeffs: &Coeffs<T>,
    delta: T,
) -> Result<ConstraintResiduals<T>> {
    let parts = split(u, delta)?;
    let mass_tol = T::of(1e-10) * (T::one() + integrate(&parts.high));
    let emerging = emerging_parts(&parts.high, layout, mass_tol)?;
    let grad = crate::energy::grad_i(u, coeffs);
    let mut nehari = Vec::with_capacity(layout.k());
    let mut beta = Vec::with_capacity(layout.k());
    for (i, part) in emerging.parts.iter().enumerate() {
        nehari.push(crate::energy::pairing(&grad, part));
        beta.push(barycenter(part, layout.centers[i])?);
    }
    Ok(ConstraintResiduals { nehari, barycenter: beta })
}

/// Project onto the constraint class: iteratively recenter each emerging
/// part to kill its barycenter, then rescale each along its fiber to kill
/// the Nehari pairing. Inputs already in the class are returned unchanged.
pub fn project_to_s<T: Real>(
    u: &GridField<T>,
    layout: &BumpLayout<T>,
    coeffs: &Coeffs<T>,
    thresholds: &ThresholdSet<T>,
    tol: T,
) -> Result<(GridField<T>, ConstraintResiduals<T>)> {
    let b_sup = coeffs.b_sup();
    if b_sup >= thresholds.b1 {
        return Err(Error::ThresholdViolated {
            have: b_sup.to_f64_lossy(),
            limit: thresholds.b1.to_f64_lossy(),
        });
    }
    let delta = thresholds.delta;
    let mut cur = u.clone();
    for _sweep in 0..40 {
        let res = constraint_residuals(&cur, layout, coeffs, delta)?;
        if res.is_member(tol) {
            return Ok((cur, res));
        }
        let parts = split(&cur, delta)?;
        let mass_tol = T::of(1e-10) * (T::one() + integrate(&parts.high));
        let emerging = emerging_parts(&parts.high, layout, mass_tol)?;

        // recenter: translate each part by the negative of its barycenter
        let mut new_parts = Vec::with_capacity(emerging.parts.len());
        for (i, part) in emerging.parts.iter().enumerate() {
            let beta = res.barycenter[i];
            let moved = translate(part, [-beta[0], -beta[1]]);
            if !moved.values().iter().any(|&x| x > T::zero()) {
                return Err(Error::EmptyBump(i));
            }
            // recentring must not push support outside the ball
            let vol = moved.domain().cell_volume();
            let mut outside = T::zero();
            for n in 0..moved.domain().node_count() {
                if moved.at(n) > T::zero()
                    && dist(moved.domain().point(n), layout.centers[i]) > layout.radius
                {
                    outside += moved.at(n) * vol;
                }
            }
            if outside > mass_tol {
                return Err(Error::EmergingOutsideBalls(format!(
                    "recentring bump {i} leaked mass {outside}"
                )));
            }
            new_parts.push(moved);
        }

        // rescale each part along its own fiber
        let mut next = parts.low.clone();
        for p in &new_parts {
            next = next.zip_with(p, |a, b| a + b);
        }
        let re_split = split(&next, delta)?;
        let re_parts = emerging_parts(&re_split.high, layout, mass_tol)?;
        let mut out = re_split.low.clone();
        for (i, part) in re_parts.parts.iter().enumerate() {
            let mut rest = re_split.low.clone();
            for (j, pj) in re_parts.parts.iter().enumerate() {
                if j != i {
                    rest = rest.zip_with(pj, |a, b| a + b);
                }
            }
            let theta = solve_fiber_root(&Fiber::build(&rest, part, coeffs))?;
            out = out.zip_with(part, |acc, v| acc + theta * v);
        }
        cur = out;
    }
    let res = constraint_residuals(&cur, layout, coeffs, delta)?;
    if res.is_member(tol) {
        Ok((cur, res))
    } else {
        Err(Error::Solver(format!(
            "projection stalled with residual {}",
            res.max_abs()
        )))
    }
}
