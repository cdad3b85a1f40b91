//! The max-min scheme: block-coordinate inner minimization over the
//! constraint class, Lagrange-multiplier extraction on each ball, the
//! derivative-free outer maximization over bump layouts, the energy
//! ladder check, and the gluing construction used for warm starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;

use crate::decomp::{
    dist, emerging_parts, norm, project_to_s, split, BumpLayout, BumpSel,
    ConstraintResiduals, ThresholdSet,
};
use crate::energy::{action_i, grad_i, pairing, Coeffs};
use crate::error::{Error, Result};
use crate::field::{integrate, GridField};
use crate::limit::LimitPack;
use crate::scalar::Real;

/// Everything an inner or outer solve needs about the problem instance.
pub struct Problem<'a, T: Real> {
    pub coeffs: Coeffs<'a, T>,
    pub pack: &'a LimitPack<T>,
    pub thresholds: ThresholdSet<T>,
    pub a0: T,
    /// Unit direction inside the cone; outer-search rays go this way.
    pub zeta: [T; 2],
}

impl<'a, T: Real> Problem<'a, T> {
    /// Four decay lengths; every ball must stay this far inside the box.
    pub fn box_margin(&self) -> T {
        T::of(4.0) / self.a0.sqrt()
    }

    fn check_b_threshold(&self) -> Result<()> {
        let b_sup = self.coeffs.b_sup();
        if b_sup >= self.thresholds.b1 {
            return Err(Error::ThresholdViolated {
                have: b_sup.to_f64_lossy(),
                limit: self.thresholds.b1.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// Tolerances and budgets of the inner solve.
#[derive(Debug, Clone, Copy)]
pub struct InnerOptions<T: Real> {
    /// Relative sweep-to-sweep decrease below which the energy counts as
    /// stationary.
    pub energy_tol: T,
    /// Residual tolerance factor; the working tolerance is
    /// `residual_tol * max(1, sup |init|)`.
    pub residual_tol: T,
    pub max_sweeps: usize,
    pub submerged_iters: usize,
    pub emerging_steps: usize,
}

impl<T: Real> Default for InnerOptions<T> {
    fn default() -> Self {
        Self {
            energy_tol: T::of(1e-9),
            residual_tol: T::of(1e-6),
            max_sweeps: 200,
            submerged_iters: 160,
            emerging_steps: 40,
        }
    }
}

/// Multiplier fit on one ball.
#[derive(Debug, Clone, Copy)]
pub struct MultiplierFit<T: Real> {
    pub lambda: [T; 2],
    /// Relative misfit of the least-squares representation.
    pub fit_residual: T,
}

/// Converged (or best-effort) state of one inner minimization.
#[derive(Debug, Clone)]
pub struct InnerSolveResult<T: Real> {
    pub u: GridField<T>,
    pub mu: T,
    pub lambdas: Vec<MultiplierFit<T>>,
    pub residuals: ConstraintResiduals<T>,
    pub per_bump_j: Vec<T>,
    pub sweeps: usize,
    pub converged: bool,
    pub tau_s: T,
}

impl<T: Real> InnerSolveResult<T> {
    pub fn max_lambda(&self) -> T {
        self.lambdas
            .iter()
            .fold(T::zero(), |m, l| m.max(norm(l.lambda)))
    }
}

/// Block-coordinate descent to a stationary configuration of the
/// constrained class: an obstacle solve for the submerged part (convex,
/// monotone), clipped gradient steps for each emerging part, then fiber
/// rescaling and barycenter recentering. The reported `mu` is the lowest
/// in-class energy visited, a certified upper bound on the discrete
/// infimum.
pub fn minimize_on_s<T: Real>(
    layout: &BumpLayout<T>,
    init: &GridField<T>,
    problem: &Problem<T>,
    opts: &InnerOptions<T>,
) -> Result<InnerSolveResult<T>> {
    problem.check_b_threshold()?;
    let coeffs = &problem.coeffs;
    let th = &problem.thresholds;
    let tau_s = opts.residual_tol * T::one().max(init.sup_abs());

    let (mut u, mut res) = project_to_s(init, layout, coeffs, th, tau_s)?;
    let mut energy = action_i(&u, coeffs).total;
    let mut best_u = u.clone();
    let mut best_energy = energy;
    let mut best_res = res.clone();
    let mut em_scale = T::one();
    let mut last_decrease = T::infinity();
    let mut converged = false;
    let mut sweeps_done = 0usize;

    let ball_mask = emerging_mask(&u, layout);

    for sweep in 1..=opts.max_sweeps {
        sweeps_done = sweep;
        let prev_u = u.clone();
        let prev_energy = energy;

        submerged_block(&mut u, coeffs, th, opts.submerged_iters);
        emerging_block(&mut u, &ball_mask, coeffs, em_scale, opts.emerging_steps);
        check_collapse(&u, layout, th)?;
        let (pu, pres) = project_to_s(&u, layout, coeffs, th, tau_s)?;
        u = pu;
        res = pres;
        energy = action_i(&u, coeffs).total;

        if energy > prev_energy + T::of(1e-12) * (T::one() + prev_energy.abs()) {
            // projection undid more than the blocks gained; retry the sweep
            // with a shorter emerging step
            u = prev_u;
            energy = prev_energy;
            em_scale = em_scale * T::half();
            if em_scale < T::of(1e-8) {
                converged = res.max_abs() <= tau_s;
                last_decrease = T::zero();
                break;
            }
            continue;
        }

        if energy < best_energy {
            best_energy = energy;
            best_u = u.clone();
            best_res = res.clone();
        }
        last_decrease = prev_energy - energy;
        if last_decrease <= opts.energy_tol * (T::one() + energy.abs())
            && res.max_abs() <= tau_s
        {
            converged = true;
            break;
        }
    }

    if !converged && best_res.max_abs() > tau_s {
        return Err(Error::NotConverged {
            sweeps: sweeps_done,
            last_decrease: last_decrease.to_f64_lossy(),
        });
    }

    let lambdas = extract_multipliers(&best_u, layout, coeffs, th)?;
    let per_bump_j = per_bump_j_values(&best_u, layout, coeffs, th)?;
    Ok(InnerSolveResult {
        u: best_u,
        mu: best_energy,
        lambdas,
        residuals: best_res,
        per_bump_j,
        sweeps: sweeps_done,
        converged,
        tau_s,
    })
}

fn per_bump_j_values<T: Real>(
    u: &GridField<T>,
    layout: &BumpLayout<T>,
    coeffs: &Coeffs<T>,
    th: &ThresholdSet<T>,
) -> Result<Vec<T>> {
    let parts = split(u, th.delta)?;
    let mass_tol = T::of(1e-10) * (T::one() + integrate(&parts.high));
    let emerging = emerging_parts(&parts.high, layout, mass_tol)?;
    Ok(emerging
        .parts
        .iter()
        .map(|p| crate::energy::action_j(p, coeffs, th.delta))
        .collect())
}

fn check_collapse<T: Real>(
    u: &GridField<T>,
    layout: &BumpLayout<T>,
    th: &ThresholdSet<T>,
) -> Result<()> {
    let dom = u.domain();
    let floor = th.delta / T::of(10.0);
    for (i, c) in layout.centers.iter().enumerate() {
        let mut sup = T::zero();
        for n in 0..dom.node_count() {
            if dist(dom.point(n), *c) <= layout.radius {
                sup = sup.max(u.at(n) - th.delta);
            }
        }
        if sup < floor {
            return Err(Error::BumpCollapse {
                bump: i,
                sup: sup.to_f64_lossy(),
                floor: floor.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Nodes strictly inside some ball (and off the boundary): the variables
/// of the emerging block.
fn emerging_mask<T: Real>(u: &GridField<T>, layout: &BumpLayout<T>) -> Vec<usize> {
    let dom = u.domain();
    let h = dom.spacing();
    let mut mask = Vec::new();
    for n in 0..dom.node_count() {
        if dom.is_boundary(n) {
            continue;
        }
        let p = dom.point(n);
        if layout
            .centers
            .iter()
            .any(|c| dist(p, *c) < layout.radius - h * T::half())
        {
            mask.push(n);
        }
    }
    mask
}

/// Convex obstacle solve for the submerged part: minimize `I` over
/// `{0 <= v <= delta, v = delta on supp u^delta}` by monotone accelerated
/// projected gradient (FISTA with a descent safeguard).
fn submerged_block<T: Real>(
    u: &mut GridField<T>,
    coeffs: &Coeffs<T>,
    th: &ThresholdSet<T>,
    iters: usize,
) {
    let delta = th.delta;
    let parts = match split(u, delta) {
        Ok(p) => p,
        Err(_) => return,
    };
    let dom = u.domain();
    let contact: Vec<bool> = (0..dom.node_count())
        .map(|i| parts.high.at(i) > T::zero())
        .collect();
    let high = parts.high;

    let h = dom.spacing();
    let dim = T::of(dom.dim() as f64);
    let lip = T::of(4.0) * dim / (h * h)
        + coeffs.a.sup_abs()
        + coeffs.q * coeffs.b_sup() * delta.powf(coeffs.q - T::one())
        + coeffs.p * delta.powf(coeffs.p - T::one());
    let step = T::one() / lip;

    let compose = |v: &GridField<T>| v.zip_with(&high, |a, b| a + b);
    let project = |v: &mut GridField<T>| {
        for i in 0..dom.node_count() {
            if dom.is_boundary(i) {
                v.set(i, T::zero());
            } else if contact[i] {
                v.set(i, delta);
            } else {
                v.set(i, v.at(i).max(T::zero()).min(delta));
            }
        }
    };

    let mut x = parts.low.clone();
    let mut x_old = x.clone();
    let mut fx = action_i(&compose(&x), coeffs).total;
    let mut t = T::one();
    for _ in 0..iters {
        let t_next = T::half() * (T::one() + (T::one() + T::of(4.0) * t * t).sqrt());
        let beta = (t - T::one()) / t_next;
        let mut y = x.zip_with(&x_old, |a, b| a + beta * (a - b));
        project(&mut y);
        let g = grad_i(&compose(&y), coeffs);
        let mut z = y.zip_with(&g, |a, b| a - step * b);
        project(&mut z);
        let fz = action_i(&compose(&z), coeffs).total;
        if fz <= fx {
            x_old = x;
            x = z;
            fx = fz;
            t = t_next;
        } else {
            // momentum restart with a plain projected gradient step
            t = T::one();
            let g = grad_i(&compose(&x), coeffs);
            let mut z = x.zip_with(&g, |a, b| a - step * b);
            project(&mut z);
            let fz = action_i(&compose(&z), coeffs).total;
            if fz <= fx {
                x_old = x.clone();
                x = z;
                fx = fz;
            } else {
                break;
            }
        }
    }
    *u = compose(&x);
}

/// Clipped gradient steps on the nodes inside the balls.
fn emerging_block<T: Real>(
    u: &mut GridField<T>,
    mask: &[usize],
    coeffs: &Coeffs<T>,
    scale: T,
    steps: usize,
) {
    let dom = u.domain();
    let h = dom.spacing();
    let dim = T::of(dom.dim() as f64);
    for _ in 0..steps {
        let sup = u.sup_abs().max(T::one());
        let lip = T::of(4.0) * dim / (h * h)
            + coeffs.a.sup_abs()
            + coeffs.q * coeffs.b_sup() * sup.powf(coeffs.q - T::one())
            + coeffs.p * sup.powf(coeffs.p - T::one());
        let step = scale / lip;
        let g = grad_i(u, coeffs);
        for &i in mask {
            let v = (u.at(i) - step * g.at(i)).max(T::zero());
            u.set(i, v);
        }
    }
}

/// Least-squares fit of the gradient against the multiplier basis
/// `u_i^delta (x - x_i)_m` on each ball, per the Euler-Lagrange identity
/// with multipliers.
pub fn extract_multipliers<T: Real>(
    u: &GridField<T>,
    layout: &BumpLayout<T>,
    coeffs: &Coeffs<T>,
    th: &ThresholdSet<T>,
) -> Result<Vec<MultiplierFit<T>>> {
    let parts = split(u, th.delta)?;
    let mass_tol = T::of(1e-10) * (T::one() + integrate(&parts.high));
    let emerging = emerging_parts(&parts.high, layout, mass_tol)?;
    let grad = grad_i(u, coeffs);
    let dom = u.domain();
    let dims = dom.dim();
    let mut out = Vec::with_capacity(layout.k());
    for (i, part) in emerging.parts.iter().enumerate() {
        let center = layout.centers[i];
        let mut phi = Vec::with_capacity(dims);
        for m in 0..dims {
            let mut f = GridField::zeros(dom);
            for n in 0..dom.node_count() {
                if part.at(n) > T::zero() {
                    let p = dom.point(n);
                    f.set(n, part.at(n) * (p[m] - center[m]));
                }
            }
            phi.push(f);
        }
        // normal equations (at most 2x2)
        let mut g_mat = [[T::zero(); 2]; 2];
        let mut c_vec = [T::zero(); 2];
        for m in 0..dims {
            for n in 0..dims {
                g_mat[m][n] = pairing(&phi[m], &phi[n]);
            }
            c_vec[m] = pairing(&grad, &phi[m]);
        }
        let lambda = match dims {
            1 => {
                if g_mat[0][0].abs() < T::of(1e-300) {
                    return Err(Error::Solver(format!("degenerate multiplier basis on bump {i}")));
                }
                [c_vec[0] / g_mat[0][0], T::zero()]
            }
            _ => {
                let det = g_mat[0][0] * g_mat[1][1] - g_mat[0][1] * g_mat[1][0];
                let scale = g_mat[0][0].abs().max(g_mat[1][1].abs());
                if det.abs() < T::of(1e-28) * scale * scale {
                    return Err(Error::Solver(format!("degenerate multiplier basis on bump {i}")));
                }
                [
                    (c_vec[0] * g_mat[1][1] - c_vec[1] * g_mat[0][1]) / det,
                    (c_vec[1] * g_mat[0][0] - c_vec[0] * g_mat[1][0]) / det,
                ]
            }
        };
        // relative misfit on the ball
        let mut num = T::zero();
        let mut den = T::zero();
        for n in 0..dom.node_count() {
            if within_ball(dom.point(n), center, layout.radius) && !dom.is_boundary(n) {
                let model = part.at(n)
                    * (lambda[0] * (dom.point(n)[0] - center[0])
                        + lambda[1] * (dom.point(n)[1] - center[1]));
                let diff = grad.at(n) - model;
                num += diff * diff;
                den += grad.at(n) * grad.at(n);
            }
        }
        let fit_residual = if den > T::zero() { (num / den).sqrt() } else { T::zero() };
        out.push(MultiplierFit { lambda, fit_residual });
    }
    Ok(out)
}

#[inline]
fn within_ball<T: Real>(p: [T; 2], c: [T; 2], r: T) -> bool {
    dist(p, c) <= r
}

/// Pointwise max of `u` and the fiber-projected translate of the limit
/// ground state at `new_center`, reprojected on the extended layout.
pub fn glue_candidate<T: Real>(
    u: &GridField<T>,
    layout: &BumpLayout<T>,
    new_center: [T; 2],
    problem: &Problem<T>,
) -> Result<(GridField<T>, BumpLayout<T>)> {
    let th = &problem.thresholds;
    for c in &layout.centers {
        if dist(*c, new_center) < T::two() * layout.radius {
            return Err(Error::Config(format!(
                "new center too close to an existing one: {} < 2R",
                dist(*c, new_center)
            )));
        }
    }
    let w_tilde = projected_translate(problem, new_center)?;
    let glued = u.join(&w_tilde);
    let mut centers = layout.centers.clone();
    centers.push(new_center);
    let extended = BumpLayout::new(centers, layout.radius)?;
    let tau = T::of(1e-6) * T::one().max(glued.sup_abs());
    let (projected, _res) = project_to_s(&glued, &extended, &problem.coeffs, th, tau)?;
    Ok((projected, extended))
}

/// Translate of the limit ground state, rescaled along its fiber so it
/// satisfies the single-bump constraint.
pub fn projected_translate<T: Real>(problem: &Problem<T>, center: [T; 2]) -> Result<GridField<T>> {
    let dom = problem.coeffs.domain();
    let th = &problem.thresholds;
    let w_y = problem.pack.translate(dom, center);
    let single = BumpLayout::new(vec![center], th.big_r)?;
    let theta = crate::decomp::theta_project(&w_y, &single, BumpSel::All, &problem.coeffs, th)?;
    let parts = split(&w_y, th.delta)?;
    Ok(parts.low.zip_with(&parts.high, move |a, b| a + theta * b))
}

/// Options of the outer layout search.
#[derive(Debug, Clone, Copy)]
pub struct OuterOptions<T: Real> {
    pub ray_starts: usize,
    pub random_starts: usize,
    pub seed: u64,
    /// Cap on inner evaluations per start.
    pub eval_budget: usize,
    /// Landscape flatness threshold (relative spread across starts).
    pub flat_tol: T,
    pub inner: InnerOptions<T>,
}

impl<T: Real> Default for OuterOptions<T> {
    fn default() -> Self {
        Self {
            ray_starts: 3,
            random_starts: 2,
            seed: 7,
            eval_budget: 60,
            flat_tol: T::of(0.02),
            inner: InnerOptions::default(),
        }
    }
}

/// Outcome of the outer maximization at one bump count.
#[derive(Debug, Clone)]
pub struct MaxMinReport<T: Real> {
    pub k: usize,
    pub layout: BumpLayout<T>,
    pub mu: T,
    pub inner: InnerSolveResult<T>,
    pub provenance: String,
    pub flat: bool,
    /// Center placement was restricted to this radius (box truncation).
    pub truncation_radius: T,
    pub starts_tried: usize,
    pub starts_converged: usize,
}

/// Multi-start compass search over center tuples: starts are seeded at
/// graded radii along the cone direction plus random interior points; each
/// candidate layout is evaluated by a glue-warm-started inner solve.
pub fn outer_maximize<T: Real>(
    problem: &Problem<T>,
    k: usize,
    opts: &OuterOptions<T>,
) -> Result<MaxMinReport<T>> {
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    problem.check_b_threshold()?;
    let th = &problem.thresholds;
    let dom = problem.coeffs.domain();
    let big_r = th.big_r;
    let r_center_max = dom.half_width() - big_r - problem.box_margin();
    if r_center_max <= T::zero() {
        return Err(Error::Config(
            "box too small to hold a single admissible ball".into(),
        ));
    }
    let starts = build_starts(problem, k, r_center_max, opts);
    if starts.is_empty() {
        return Err(Error::Solver("no feasible starts".into()));
    }

    let outcomes: Vec<Option<StartOutcome<T>>> = starts
        .par_iter()
        .map(|(tag, centers)| pattern_search(problem, centers.clone(), r_center_max, opts, tag))
        .collect();

    let mut best: Option<StartOutcome<T>> = None;
    let mut tried = 0usize;
    let mut converged_count = 0usize;
    let mut mus = Vec::new();
    for oc in outcomes.into_iter().flatten() {
        tried += 1;
        if oc.result.converged {
            converged_count += 1;
        }
        mus.push(oc.mu);
        best = Some(match best {
            None => oc,
            Some(b) => {
                if oc.mu > b.mu || (oc.mu == b.mu && lex_less(&oc.centers, &b.centers)) {
                    oc
                } else {
                    b
                }
            }
        });
    }
    let best = best.ok_or_else(|| Error::Solver("all outer starts failed".into()))?;
    let spread = mus.iter().fold(T::zero(), |m, &v| m.max(v))
        - mus.iter().fold(T::infinity(), |m, &v| m.min(v));
    let flat = mus.len() >= 2 && spread <= opts.flat_tol * T::one().max(best.mu.abs());

    let layout = BumpLayout::new(best.centers.clone(), big_r)?;
    Ok(MaxMinReport {
        k,
        layout,
        mu: best.mu,
        inner: best.result,
        provenance: best.provenance,
        flat,
        truncation_radius: r_center_max,
        starts_tried: tried,
        starts_converged: converged_count,
    })
}

struct StartOutcome<T: Real> {
    centers: Vec<[T; 2]>,
    mu: T,
    result: InnerSolveResult<T>,
    provenance: String,
}

fn lex_less<T: Real>(a: &[[T; 2]], b: &[[T; 2]]) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        for m in 0..2 {
            if x[m] < y[m] {
                return true;
            }
            if x[m] > y[m] {
                return false;
            }
        }
    }
    false
}

fn build_starts<T: Real>(
    problem: &Problem<T>,
    k: usize,
    r_center_max: T,
    opts: &OuterOptions<T>,
) -> Vec<(String, Vec<[T; 2]>)> {
    let th = &problem.thresholds;
    let zeta = problem_zeta(problem);
    let spacing = T::of(2.2) * th.big_r;
    let need = spacing * T::of((k - 1) as f64);
    let mut starts = Vec::new();

    // graded radii along the cone direction, mirroring the escaping test
    // configurations
    for j in 0..opts.ray_starts {
        let t = T::of((j + 1) as f64 / (opts.ray_starts + 1) as f64);
        let r_far = r_center_max * t;
        let base = (r_far - need).max(T::zero());
        let centers: Vec<[T; 2]> = (0..k)
            .map(|i| {
                let r = base + spacing * T::of(i as f64);
                [zeta[0] * r, zeta[1] * r]
            })
            .collect();
        if feasible_layout(&centers, th.big_r, r_center_max) {
            starts.push((format!("ray-start-{j}"), centers));
        }
    }

    // seeded random interior configurations
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dim = problem.coeffs.domain().dim();
    let mut made = 0usize;
    let mut attempts = 0usize;
    while made < opts.random_starts && attempts < 200 {
        attempts += 1;
        let centers: Vec<[T; 2]> = (0..k)
            .map(|_| random_center(&mut rng, dim, r_center_max))
            .collect();
        if feasible_layout(&centers, th.big_r, r_center_max) {
            starts.push((format!("random-start-{made}"), centers));
            made += 1;
        }
    }
    starts
}

fn problem_zeta<T: Real>(problem: &Problem<T>) -> [T; 2] {
    problem.zeta
}

fn random_center<T: Real>(rng: &mut ChaCha8Rng, dim: usize, r_max: T) -> [T; 2] {
    let rm = r_max.to_f64_lossy();
    match dim {
        1 => [T::of(rng.gen_range(-rm..rm)), T::zero()],
        _ => {
            let r = rm * rng.gen_range(0.0f64..1.0).sqrt();
            let ang = rng.gen_range(0.0f64..std::f64::consts::TAU);
            [T::of(r * ang.cos()), T::of(r * ang.sin())]
        }
    }
}

fn feasible_layout<T: Real>(centers: &[[T; 2]], big_r: T, r_center_max: T) -> bool {
    for (i, c) in centers.iter().enumerate() {
        if norm(*c) > r_center_max {
            return false;
        }
        for c2 in centers.iter().skip(i + 1) {
            if dist(*c, *c2) < T::two() * big_r {
                return false;
            }
        }
    }
    true
}

fn pattern_search<T: Real>(
    problem: &Problem<T>,
    start: Vec<[T; 2]>,
    r_center_max: T,
    opts: &OuterOptions<T>,
    tag: &str,
) -> Option<StartOutcome<T>> {
    let th = &problem.thresholds;
    let dom = problem.coeffs.domain();
    let dim = dom.dim();
    let h = dom.spacing();
    let mut cache: HashMap<Vec<u64>, Option<(T, usize)>> = HashMap::new();
    let mut results: Vec<InnerSolveResult<T>> = Vec::new();
    let mut evals = 0usize;

    let eval = |centers: &Vec<[T; 2]>,
                    results: &mut Vec<InnerSolveResult<T>>,
                    cache: &mut HashMap<Vec<u64>, Option<(T, usize)>>,
                    evals: &mut usize|
     -> Option<(T, usize)> {
        let key: Vec<u64> = centers
            .iter()
            .flat_map(|c| [c[0].to_f64_lossy().to_bits(), c[1].to_f64_lossy().to_bits()])
            .collect();
        if let Some(hit) = cache.get(&key) {
            return *hit;
        }
        if *evals >= opts.eval_budget {
            return None;
        }
        *evals += 1;
        let outcome = evaluate_layout(problem, centers, opts).ok().map(|res| {
            results.push(res);
            (results.last().unwrap().mu, results.len() - 1)
        });
        cache.insert(key, outcome);
        outcome
    };

    let mut current = start;
    let (mut best_mu, mut best_idx) = eval(&current, &mut results, &mut cache, &mut evals)?;
    let mut sigma = (th.big_r * T::half() / h).round().max(T::one()) * h;
    while sigma >= h * T::of(0.999) && evals < opts.eval_budget {
        let mut improved = false;
        'poll: for ci in 0..current.len() {
            for axis in 0..dim {
                for sgn in [T::one(), -T::one()] {
                    let mut cand = current.clone();
                    cand[ci][axis] += sgn * sigma;
                    if !feasible_layout(&cand, th.big_r, r_center_max) {
                        continue;
                    }
                    if let Some((mu, idx)) = eval(&cand, &mut results, &mut cache, &mut evals) {
                        if mu > best_mu + T::of(1e-12) * (T::one() + best_mu.abs()) {
                            current = cand;
                            best_mu = mu;
                            best_idx = idx;
                            improved = true;
                            break 'poll;
                        }
                    }
                }
            }
        }
        if !improved {
            sigma = sigma * T::half();
        }
    }

    let result = results[best_idx].clone();
    Some(StartOutcome {
        centers: current,
        mu: best_mu,
        result,
        provenance: format!("{tag} ({evals} evaluations)"),
    })
}

/// Build a warm-start by gluing fiber-projected translates of the ground
/// state at the given centers, then run the inner solve.
pub fn evaluate_layout<T: Real>(
    problem: &Problem<T>,
    centers: &[[T; 2]],
    opts: &OuterOptions<T>,
) -> Result<InnerSolveResult<T>> {
    let th = &problem.thresholds;
    let mut u = projected_translate(problem, centers[0])?;
    let mut layout = BumpLayout::new(vec![centers[0]], th.big_r)?;
    for c in centers.iter().skip(1) {
        let (glued, extended) = glue_candidate(&u, &layout, *c, problem)?;
        u = glued;
        layout = extended;
    }
    minimize_on_s(&layout, &u, problem, &opts.inner)
}

/// One rung of the energy ladder.
#[derive(Debug, Clone, Copy)]
pub struct LadderRung<T: Real> {
    pub k: usize,
    /// `mu_1 - m_inf` for the first rung, `mu_(k+1) - mu_k - m_inf` above.
    pub margin: T,
    pub pass: bool,
}

/// Check the strict energy ladder on consecutive reports: the first rung
/// must clear `m_inf` by more than `tol`, higher rungs may dip at most
/// `tol` below the superadditive bound. Failures are recorded, never
/// dropped.
pub fn ladder_check<T: Real>(
    reports: &[MaxMinReport<T>],
    m_inf: T,
    tol: T,
) -> Result<Vec<LadderRung<T>>> {
    if reports.is_empty() {
        return Err(Error::Config("ladder check needs at least one report".into()));
    }
    for (i, rep) in reports.iter().enumerate() {
        if rep.k != i + 1 {
            return Err(Error::Config(format!(
                "ladder check needs consecutive k values; report {} has k = {}",
                i, rep.k
            )));
        }
    }
    let mut rungs = Vec::with_capacity(reports.len());
    let first = reports[0].mu - m_inf;
    rungs.push(LadderRung { k: 1, margin: first, pass: first > tol });
    for w in reports.windows(2) {
        let margin = w[1].mu - w[0].mu - m_inf;
        rungs.push(LadderRung { k: w[1].k, margin, pass: margin > -tol });
    }
    Ok(rungs)
}
