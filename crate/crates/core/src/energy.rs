//! Action functionals `I`, `I_inf` and the emerging-part functionals `J`,
//! `J_inf`, their exact discrete gradient, and the splitting machinery.
//!
//! The kinetic term is the discrete Dirichlet edge form, whose exact
//! Euler-Lagrange operator is the `2N+1`-point Laplacian; every other term
//! is nodal, so the gradient below is the exact derivative of `action_i`
//! with respect to interior node values.

use crate::field::{gradient_bilinear, integrate_with, laplacian, Domain, GridField};
use crate::scalar::Real;

/// Coefficient fields and exponents bundled for the functional evaluations.
#[derive(Clone, Copy)]
pub struct Coeffs<'a, T: Real> {
    pub a: &'a GridField<T>,
    pub b: &'a GridField<T>,
    pub p: T,
    pub q: T,
}

impl<'a, T: Real> Coeffs<'a, T> {
    pub fn new(a: &'a GridField<T>, b: &'a GridField<T>, p: T, q: T) -> Self {
        Self { a, b, p, q }
    }

    pub fn domain(&self) -> Domain<T> {
        self.a.domain()
    }

    pub fn b_sup(&self) -> T {
        self.b.sup_abs()
    }
}

/// Term-by-term account of `I(u)`.
#[derive(Debug, Clone, Copy)]
pub struct EnergyBreakdown<T: Real> {
    /// `∫ |∇u|^2`
    pub kinetic: T,
    /// `∫ a u^2`
    pub potential: T,
    /// `∫ b |u|^(q+1) / (q+1)`
    pub competing: T,
    /// `∫ |u|^(p+1) / (p+1)`
    pub focusing: T,
    /// `I(u) = kinetic/2 + potential/2 + competing - focusing`
    pub total: T,
}

/// Evaluate `I(u)` term by term.
pub fn action_i<T: Real>(u: &GridField<T>, c: &Coeffs<T>) -> EnergyBreakdown<T> {
    let dom = u.domain();
    let kinetic = gradient_bilinear(u, u);
    let potential = integrate_with(dom, |i| c.a.at(i) * u.at(i) * u.at(i));
    let qp1 = c.q + T::one();
    let pp1 = c.p + T::one();
    let competing = integrate_with(dom, |i| c.b.at(i) * u.at(i).abs().powf(qp1)) / qp1;
    let focusing = integrate_with(dom, |i| u.at(i).abs().powf(pp1)) / pp1;
    EnergyBreakdown {
        kinetic,
        potential,
        competing,
        focusing,
        total: T::half() * kinetic + T::half() * potential + competing - focusing,
    }
}

/// `I(u)` with `a ≡ a_inf`, `b ≡ 0`.
pub fn action_i_inf<T: Real>(u: &GridField<T>, a_inf: T, p: T) -> T {
    let dom = u.domain();
    let kinetic = gradient_bilinear(u, u);
    let potential = integrate_with(dom, |i| u.at(i) * u.at(i)) * a_inf;
    let pp1 = p + T::one();
    let focusing = integrate_with(dom, |i| u.at(i).abs().powf(pp1)) / pp1;
    T::half() * (kinetic + potential) - focusing
}

/// The six-term emerging-part functional `J(v)`, evaluated on the strict
/// support of `v` only; `|supp v|` is the count of positive nodes times
/// `h^N`.
pub fn action_j<T: Real>(v: &GridField<T>, c: &Coeffs<T>, delta: T) -> T {
    let dom = v.domain();
    let qp1 = c.q + T::one();
    let pp1 = c.p + T::one();
    let kinetic = gradient_bilinear(v, v);
    let on_supp = |i: usize, val: T| if v.at(i) > T::zero() { val } else { T::zero() };
    let quad = integrate_with(dom, |i| {
        on_supp(i, c.a.at(i) * v.at(i) * v.at(i))
    });
    let linear = integrate_with(dom, |i| on_supp(i, c.a.at(i) * delta * v.at(i)));
    let competing = integrate_with(dom, |i| {
        on_supp(i, c.b.at(i) * (delta + v.at(i)).powf(qp1))
    }) / qp1;
    let focusing = integrate_with(dom, |i| on_supp(i, (delta + v.at(i)).powf(pp1))) / pp1;
    let b_corr = integrate_with(dom, |i| on_supp(i, c.b.at(i))) * delta.powf(qp1) / qp1;
    let supp_measure = support_measure(v);
    let s_corr = supp_measure * delta.powf(pp1) / pp1;
    T::half() * (kinetic + quad) + linear + competing - focusing - b_corr + s_corr
}

/// `J` for the limit functional (`a ≡ a_inf`, `b ≡ 0`).
pub fn action_j_inf<T: Real>(v: &GridField<T>, a_inf: T, p: T, delta: T) -> T {
    let dom = v.domain();
    let pp1 = p + T::one();
    let kinetic = gradient_bilinear(v, v);
    let on_supp = |i: usize, val: T| if v.at(i) > T::zero() { val } else { T::zero() };
    let quad = integrate_with(dom, |i| on_supp(i, v.at(i) * v.at(i))) * a_inf;
    let linear = integrate_with(dom, |i| on_supp(i, v.at(i))) * a_inf * delta;
    let focusing = integrate_with(dom, |i| on_supp(i, (delta + v.at(i)).powf(pp1))) / pp1;
    let s_corr = support_measure(v) * delta.powf(pp1) / pp1;
    T::half() * (kinetic + quad) + linear - focusing + s_corr
}

/// Discrete measure of the strict support: positive-node count times `h^N`.
pub fn support_measure<T: Real>(v: &GridField<T>) -> T {
    let dom = v.domain();
    let count = v.values().iter().filter(|&&x| x > T::zero()).count();
    T::of(count as f64) * dom.cell_volume()
}

/// Exact discrete gradient of `action_i`: the node-wise residual
/// `-Δu + a u + b u^q - u^p` on interior nodes (zero on the boundary), so
/// that `d/dε I(u + εv)|_0 = Σ grad_i(u) v h^N` for interior-supported `v`.
pub fn grad_i<T: Real>(u: &GridField<T>, c: &Coeffs<T>) -> GridField<T> {
    let dom = u.domain();
    let lap = laplacian(u);
    let mut out = GridField::zeros(dom);
    for i in 0..dom.node_count() {
        if dom.is_boundary(i) {
            continue;
        }
        let uv = u.at(i);
        let au = uv.abs();
        let res = -lap.at(i) + c.a.at(i) * uv + c.b.at(i) * au.powf(c.q - T::one()) * uv
            - au.powf(c.p - T::one()) * uv;
        out.set(i, res);
    }
    out
}

/// L2 pairing `Σ f g h^N` with trapezoidal weights (equals the plain sum
/// for interior-supported factors).
pub fn pairing<T: Real>(f: &GridField<T>, g: &GridField<T>) -> T {
    integrate_with(f.domain(), |i| f.at(i) * g.at(i))
}

/// Directional derivative `I'(u)[v]` via the exact discrete gradient.
pub fn directional_derivative<T: Real>(u: &GridField<T>, v: &GridField<T>, c: &Coeffs<T>) -> T {
    pairing(&grad_i(u, c), v)
}

/// L2 norm of a field under the grid quadrature.
pub fn l2_norm<T: Real>(f: &GridField<T>) -> T {
    integrate_with(f.domain(), |i| f.at(i) * f.at(i)).sqrt()
}

/// `H^1`-type squared norm `∫ |∇u|^2 + ∫ u^2`.
pub fn h1_norm_sq<T: Real>(f: &GridField<T>) -> T {
    gradient_bilinear(f, f) + integrate_with(f.domain(), |i| f.at(i) * f.at(i))
}
