//! Uniform-grid function representation on a Dirichlet box, coefficient
//! sampling, trapezoidal quadrature, difference stencils, and validation
//! of the structural hypotheses on the coefficient pair.

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};

/// Truncation box `[-L, L]^N` with `M` nodes per axis (odd, so the origin
/// is a node), spacing `h = 2L/(M-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain<T: Real> {
    n: usize,
    l: T,
    m: usize,
}

impl<T: Real> Domain<T> {
    pub fn new(n: usize, l: T, m: usize) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {n}")));
        }
        if !(l > T::zero()) || !l.is_finite() {
            return Err(Error::Config("half-width must be positive and finite".into()));
        }
        if m < 33 || m % 2 == 0 {
            return Err(Error::Config(format!("nodes per axis must be odd and >= 33, got {m}")));
        }
        Ok(Self { n, l, m })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> T {
        self.l
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> T {
        T::two() * self.l / T::of((self.m - 1) as f64)
    }

    pub fn node_count(&self) -> usize {
        match self.n {
            1 => self.m,
            _ => self.m * self.m,
        }
    }

    /// Quadrature cell volume `h^N`.
    pub fn cell_volume(&self) -> T {
        let h = self.spacing();
        match self.n {
            1 => h,
            _ => h * h,
        }
    }

    /// Decompose a linear index into per-axis indices `(ix, iy)`; `iy = 0` in 1-D.
    #[inline]
    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        match self.n {
            1 => (idx, 0),
            _ => (idx % self.m, idx / self.m),
        }
    }

    #[inline]
    pub fn linear_index(&self, ix: usize, iy: usize) -> usize {
        match self.n {
            1 => ix,
            _ => iy * self.m + ix,
        }
    }

    /// Physical coordinates of a node. The second coordinate is 0 in 1-D.
    #[inline]
    pub fn point(&self, idx: usize) -> [T; 2] {
        let h = self.spacing();
        let (ix, iy) = self.split_index(idx);
        let x = -self.l + h * T::of(ix as f64);
        let y = match self.n {
            1 => T::zero(),
            _ => -self.l + h * T::of(iy as f64),
        };
        [x, y]
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        let (ix, iy) = self.split_index(idx);
        let last = self.m - 1;
        ix == 0 || ix == last || (self.n == 2 && (iy == 0 || iy == last))
    }

    /// Trapezoidal weight of a node (without the `h^N` factor).
    #[inline]
    pub fn trapezoid_weight(&self, idx: usize) -> T {
        let (ix, iy) = self.split_index(idx);
        let last = self.m - 1;
        let wx = if ix == 0 || ix == last { T::half() } else { T::one() };
        match self.n {
            1 => wx,
            _ => {
                let wy = if iy == 0 || iy == last { T::half() } else { T::one() };
                wx * wy
            }
        }
    }
}

/// Scalar function sampled on the nodes of a [`Domain`]. Values are stored
/// row-major; admissible candidates are nonnegative and vanish on the
/// boundary nodes (Dirichlet truncation).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T: Real> {
    dom: Domain<T>,
    vals: Vec<T>,
}

impl<T: Real> GridField<T> {
    pub fn zeros(dom: Domain<T>) -> Self {
        Self { dom, vals: vec![T::zero(); dom.node_count()] }
    }

    pub fn from_values(dom: Domain<T>, vals: Vec<T>) -> Result<Self> {
        if vals.len() != dom.node_count() {
            return Err(Error::Domain(format!(
                "value count {} does not match node count {}",
                vals.len(),
                dom.node_count()
            )));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field contains non-finite values".into()));
        }
        Ok(Self { dom, vals })
    }

    /// Sample a function of the node coordinates; boundary handling is the
    /// caller's business.
    pub fn from_fn(dom: Domain<T>, f: impl Fn([T; 2]) -> T) -> Self {
        let vals = (0..dom.node_count()).map(|i| f(dom.point(i))).collect();
        Self { dom, vals }
    }

    pub fn domain(&self) -> Domain<T> {
        self.dom
    }

    pub fn values(&self) -> &[T] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.vals
    }

    #[inline]
    pub fn at(&self, idx: usize) -> T {
        self.vals[idx]
    }

    pub fn set(&mut self, idx: usize, v: T) {
        self.vals[idx] = v;
    }

    pub fn sup_abs(&self) -> T {
        self.vals.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.vals.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.vals.iter().all(|&v| v >= T::zero())
    }

    pub fn is_boundary_zero(&self) -> bool {
        (0..self.dom.node_count())
            .filter(|&i| self.dom.is_boundary(i))
            .all(|i| self.vals[i] == T::zero())
    }

    /// Force exact zeros on the boundary nodes.
    pub fn zero_boundary(&mut self) {
        for i in 0..self.dom.node_count() {
            if self.dom.is_boundary(i) {
                self.vals[i] = T::zero();
            }
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { dom: self.dom, vals: self.vals.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.dom, other.dom, "fields live on different domains");
        let vals = self
            .vals
            .iter()
            .zip(other.vals.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self { dom: self.dom, vals }
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// Pointwise maximum (lattice join).
    pub fn join(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.max(b))
    }

    /// Pointwise minimum (lattice meet).
    pub fn meet(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.min(b))
    }

    /// Bilinear (multilinear) interpolation at an arbitrary point; zero
    /// outside the box.
    pub fn interp_linear(&self, p: [T; 2]) -> T {
        let dom = self.dom;
        let h = dom.spacing();
        let l = dom.half_width();
        let m = dom.nodes_per_axis();
        let grid = |c: T| (c + l) / h;
        let fx = grid(p[0]);
        if fx < T::zero() || fx > T::of((m - 1) as f64) {
            return T::zero();
        }
        let ix = fx.floor().to_f64_lossy() as usize;
        let ix = ix.min(m - 2);
        let tx = fx - T::of(ix as f64);
        match dom.dim() {
            1 => {
                let a = self.vals[ix];
                let b = self.vals[ix + 1];
                a + (b - a) * tx
            }
            _ => {
                let fy = grid(p[1]);
                if fy < T::zero() || fy > T::of((m - 1) as f64) {
                    return T::zero();
                }
                let iy = fy.floor().to_f64_lossy() as usize;
                let iy = iy.min(m - 2);
                let ty = fy - T::of(iy as f64);
                let v00 = self.vals[dom.linear_index(ix, iy)];
                let v10 = self.vals[dom.linear_index(ix + 1, iy)];
                let v01 = self.vals[dom.linear_index(ix, iy + 1)];
                let v11 = self.vals[dom.linear_index(ix + 1, iy + 1)];
                let a = v00 + (v10 - v00) * tx;
                let b = v01 + (v11 - v01) * tx;
                a + (b - a) * ty
            }
        }
    }

    /// Separable 4-point Lagrange cubic interpolation; zero outside the box.
    pub fn interp_cubic(&self, p: [T; 2]) -> T {
        let dom = self.dom;
        let h = dom.spacing();
        let l = dom.half_width();
        let m = dom.nodes_per_axis();
        let weights = |frac: T| -> [T; 4] {
            // Lagrange basis on nodes {0,1,2,3} evaluated at 1 + frac
            let t = T::one() + frac;
            let mut w = [T::zero(); 4];
            for (k, wk) in w.iter_mut().enumerate() {
                let mut acc = T::one();
                for j in 0..4 {
                    if j != k {
                        acc = acc * (t - T::of(j as f64)) / T::of(k as f64 - j as f64);
                    }
                }
                *wk = acc;
            }
            w
        };
        let locate = |c: T| -> Option<(usize, [T; 4])> {
            let fx = (c + l) / h;
            if fx < T::zero() || fx > T::of((m - 1) as f64) {
                return None;
            }
            let i = (fx.floor().to_f64_lossy() as usize).min(m - 2);
            let base = i.saturating_sub(1).min(m - 4);
            let frac = fx - T::of((base + 1) as f64);
            Some((base, weights(frac)))
        };
        let Some((bx, wx)) = locate(p[0]) else { return T::zero() };
        match dom.dim() {
            1 => (0..4).fold(T::zero(), |acc, k| acc + wx[k] * self.vals[bx + k]),
            _ => {
                let Some((by, wy)) = locate(p[1]) else { return T::zero() };
                let mut acc = T::zero();
                for ky in 0..4 {
                    let mut row = T::zero();
                    for kx in 0..4 {
                        row += wx[kx] * self.vals[dom.linear_index(bx + kx, by + ky)];
                    }
                    acc += wy[ky] * row;
                }
                acc
            }
        }
    }

    /// Serialize as CSV: a `N,L,M` header, the triple itself, then the
    /// row-major values (one grid row per line).
    pub fn to_csv(&self) -> String {
        let dom = self.dom;
        let mut out = String::from("N,L,M\n");
        out.push_str(&format!("{},{},{}\n", dom.dim(), dom.half_width(), dom.nodes_per_axis()));
        let m = dom.nodes_per_axis();
        let rows = match dom.dim() {
            1 => 1,
            _ => m,
        };
        for r in 0..rows {
            let line: Vec<String> = (0..m)
                .map(|c| format!("{:e}", self.vals[r * m + c]))
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
        if header.trim() != "N,L,M" {
            return Err(Error::Config(format!("bad CSV header: {header}")));
        }
        let meta = lines.next().ok_or_else(|| Error::Config("missing N,L,M line".into()))?;
        let parts: Vec<&str> = meta.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Config("malformed N,L,M line".into()));
        }
        let n: usize = parts[0].trim().parse().map_err(|_| Error::Config("bad N".into()))?;
        let l: f64 = parts[1].trim().parse().map_err(|_| Error::Config("bad L".into()))?;
        let m: usize = parts[2].trim().parse().map_err(|_| Error::Config("bad M".into()))?;
        let dom = Domain::new(n, T::of(l), m)?;
        let mut vals = Vec::with_capacity(dom.node_count());
        for line in lines {
            for tok in line.split(',') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad value: {tok}")))?;
                vals.push(T::of(v));
            }
        }
        Self::from_values(dom, vals)
    }
}

/// Analytic descriptor for the attractive perturbation `alpha` in
/// `a(x) = a_inf - alpha(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaDescriptor<T: Real> {
    Zero,
    /// `c * exp(-kappa |x|)`
    Exponential { c: T, kappa: T },
    /// Well of the given depth on `B_radius(0)`; sampled with a one-cell
    /// linear mollification so it does not alias on coarse grids.
    IndicatorWell { depth: T, radius: T },
}

impl<T: Real> AlphaDescriptor<T> {
    /// Analytic (unmollified) value at radius `r`.
    pub fn eval(&self, r: T) -> T {
        match *self {
            AlphaDescriptor::Zero => T::zero(),
            AlphaDescriptor::Exponential { c, kappa } => c * (-kappa * r).exp(),
            AlphaDescriptor::IndicatorWell { depth, radius } => {
                if r <= radius {
                    depth
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Value used when sampling on a grid of spacing `h`.
    fn sampled(&self, r: T, h: T) -> T {
        match *self {
            AlphaDescriptor::IndicatorWell { depth, radius } => {
                // ramp from `depth` at `radius` to 0 at `radius + h`
                if r <= radius {
                    depth
                } else if r >= radius + h {
                    T::zero()
                } else {
                    depth * (T::one() - (r - radius) / h)
                }
            }
            _ => self.eval(r),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaDescriptor::Zero => true,
            AlphaDescriptor::Exponential { c, kappa } => {
                c >= T::zero() && kappa > T::zero() && c.is_finite() && kappa.is_finite()
            }
            AlphaDescriptor::IndicatorWell { depth, radius } => {
                depth >= T::zero() && radius > T::zero() && depth.is_finite() && radius.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("malformed alpha descriptor".into()))
        }
    }
}

/// Analytic descriptor for the competing coefficient `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BDescriptor<T: Real> {
    Zero,
    /// `amplitude / (1 + |x|)^power`
    Rational { amplitude: T, power: T },
    /// `amplitude * exp(-kappa |x|)`
    Exponential { amplitude: T, kappa: T },
    /// `amplitude * max(0, 1 - |x|/radius)`
    CompactTent { amplitude: T, radius: T },
}

impl<T: Real> BDescriptor<T> {
    pub fn eval(&self, r: T) -> T {
        match *self {
            BDescriptor::Zero => T::zero(),
            BDescriptor::Rational { amplitude, power } => {
                amplitude / (T::one() + r).powf(power)
            }
            BDescriptor::Exponential { amplitude, kappa } => amplitude * (-kappa * r).exp(),
            BDescriptor::CompactTent { amplitude, radius } => {
                amplitude * (T::one() - r / radius).max(T::zero())
            }
        }
    }

    /// Supremum of the descriptor over all of space.
    pub fn sup(&self) -> T {
        match *self {
            BDescriptor::Zero => T::zero(),
            BDescriptor::Rational { amplitude, .. } => amplitude,
            BDescriptor::Exponential { amplitude, .. } => amplitude,
            BDescriptor::CompactTent { amplitude, .. } => amplitude,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BDescriptor::Zero => true,
            BDescriptor::Rational { amplitude, power } => {
                amplitude >= T::zero() && power > T::zero()
            }
            BDescriptor::Exponential { amplitude, kappa } => {
                amplitude >= T::zero() && kappa > T::zero()
            }
            BDescriptor::CompactTent { amplitude, radius } => {
                amplitude >= T::zero() && radius > T::zero()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("malformed b descriptor".into()))
        }
    }
}

/// Open cone of directions on which the decay/growth conditions are imposed.
/// In 1-D the angular interval degenerates to the half-lines at angles 0
/// and pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cone<T: Real> {
    Full,
    /// Angular interval `[lo, hi]` (radians) of directions, `hi > lo`.
    Angular { lo: T, hi: T },
}

impl<T: Real> Cone<T> {
    pub fn contains_angle(&self, ang: T) -> bool {
        match *self {
            Cone::Full => true,
            Cone::Angular { lo, hi } => {
                // normalize into [lo, lo + 2pi)
                let two_pi = T::of(std::f64::consts::TAU);
                let mut a = ang;
                while a < lo {
                    a += two_pi;
                }
                while a >= lo + two_pi {
                    a -= two_pi;
                }
                a <= hi
            }
        }
    }

    /// Representative unit directions inside the cone.
    pub fn sample_directions(&self, dim: usize, count: usize) -> Vec<[T; 2]> {
        match dim {
            1 => {
                let mut dirs = Vec::new();
                if self.contains_angle(T::zero()) {
                    dirs.push([T::one(), T::zero()]);
                }
                if self.contains_angle(T::of(std::f64::consts::PI)) {
                    dirs.push([-T::one(), T::zero()]);
                }
                dirs
            }
            _ => {
                let (lo, hi) = match *self {
                    Cone::Full => (T::zero(), T::of(std::f64::consts::TAU)),
                    Cone::Angular { lo, hi } => (lo, hi),
                };
                let count = count.max(2);
                (0..count)
                    .map(|i| {
                        let t = T::of(i as f64) / T::of((count - 1) as f64);
                        let ang = lo + (hi - lo) * t;
                        [ang.cos(), ang.sin()]
                    })
                    .collect()
            }
        }
    }
}

/// Coefficient pair `a(x) = a_inf - alpha(x)`, `b(x) >= 0`, with the cone
/// data needed by the decay/growth hypothesis and the declared infimum
/// `a0` of `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientPair<T: Real> {
    pub a_inf: T,
    pub alpha: AlphaDescriptor<T>,
    pub b: BDescriptor<T>,
    /// Declared infimum of `a`.
    pub a0: T,
    /// Decay rate in the cone bound `alpha <= c exp(-eta |x|)`; must satisfy
    /// `0 < eta < sqrt(a0)`.
    pub eta: T,
    pub cone: Cone<T>,
    /// Constant `c` in the cone bound.
    pub cone_c: T,
    /// Unit direction inside the cone.
    pub zeta: [T; 2],
    /// Radius of the ball around `zeta` contained in the closed cone.
    pub d: T,
}

impl<T: Real> CoefficientPair<T> {
    /// Constant-coefficient pair of the limit problem.
    pub fn limit(a_inf: T) -> Self {
        Self {
            a_inf,
            alpha: AlphaDescriptor::Zero,
            b: BDescriptor::Zero,
            a0: a_inf,
            eta: T::half() * a_inf.sqrt(),
            cone: Cone::Full,
            cone_c: T::one(),
            zeta: [T::one(), T::zero()],
            d: T::half(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        self.b.validate()?;
        if !(self.a_inf > T::zero()) {
            return Err(Error::Config("a_inf must be positive".into()));
        }
        if !(self.a0 > T::zero()) {
            return Err(Error::Config("a0 must be positive".into()));
        }
        if !(self.eta > T::zero() && self.eta < self.a0.sqrt()) {
            return Err(Error::Config("eta must lie in (0, sqrt(a0))".into()));
        }
        if !(self.d >= T::half()) {
            return Err(Error::Config("ball radius d must be >= 1/2".into()));
        }
        let zn = (self.zeta[0] * self.zeta[0] + self.zeta[1] * self.zeta[1]).sqrt();
        if (zn - T::one()).abs() > T::of(1e-9) {
            return Err(Error::Config("zeta must be a unit vector".into()));
        }
        Ok(())
    }

    pub fn a_at(&self, p: [T; 2]) -> T {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        self.a_inf - self.alpha.eval(r)
    }

    pub fn b_at(&self, p: [T; 2]) -> T {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        self.b.eval(r)
    }
}

/// Sample the coefficient pair on a grid. Indicator wells are mollified
/// over one grid cell; everything else is evaluated exactly at the nodes.
pub fn sample<T: Real>(
    pair: &CoefficientPair<T>,
    dom: Domain<T>,
) -> Result<(GridField<T>, GridField<T>)> {
    pair.validate()?;
    let h = dom.spacing();
    let a = GridField::from_fn(dom, |p| {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        pair.a_inf - pair.alpha.sampled(r, h)
    });
    let b = GridField::from_fn(dom, |p| pair.b_at(p));
    Ok((a, b))
}

/// Composite trapezoidal quadrature over the box with a fixed pairwise
/// reduction tree.
pub fn integrate<T: Real>(f: &GridField<T>) -> T {
    let dom = f.domain();
    let vol = dom.cell_volume();
    pairwise_sum(0, dom.node_count(), &|i| f.at(i) * dom.trapezoid_weight(i)) * vol
}

/// Quadrature of `g(node)` without materializing a field.
pub fn integrate_with<T: Real>(dom: Domain<T>, g: impl Fn(usize) -> T) -> T {
    let vol = dom.cell_volume();
    pairwise_sum(0, dom.node_count(), &|i| g(i) * dom.trapezoid_weight(i)) * vol
}

/// Discrete Dirichlet energy `sum over forward edges of (Df)^2 h^N`.
///
/// This is the quadratic form whose exact Euler-Lagrange operator is the
/// `2N+1`-point Laplacian below (summation by parts holds to rounding for
/// boundary-zero fields).
pub fn weak_gradient_energy<T: Real>(f: &GridField<T>) -> T {
    gradient_bilinear(f, f)
}

/// Bilinear form associated with [`weak_gradient_energy`]:
/// `sum_edges Df . Dg * h^N`.
pub fn gradient_bilinear<T: Real>(f: &GridField<T>, g: &GridField<T>) -> T {
    let dom = f.domain();
    assert_eq!(dom, g.domain(), "fields live on different domains");
    let m = dom.nodes_per_axis();
    let h = dom.spacing();
    let inv_h2 = T::one() / (h * h);
    let vol = dom.cell_volume();
    match dom.dim() {
        1 => {
            let s = pairwise_sum(0, m - 1, &|i| {
                (f.at(i + 1) - f.at(i)) * (g.at(i + 1) - g.at(i))
            });
            s * inv_h2 * vol
        }
        _ => {
            // x-edges row by row, then y-edges, in fixed order
            let sx = pairwise_sum(0, m * (m - 1), &|e| {
                let row = e / (m - 1);
                let col = e % (m - 1);
                let i = dom.linear_index(col, row);
                let j = dom.linear_index(col + 1, row);
                (f.at(j) - f.at(i)) * (g.at(j) - g.at(i))
            });
            let sy = pairwise_sum(0, m * (m - 1), &|e| {
                let col = e / (m - 1);
                let row = e % (m - 1);
                let i = dom.linear_index(col, row);
                let j = dom.linear_index(col, row + 1);
                (f.at(j) - f.at(i)) * (g.at(j) - g.at(i))
            });
            (sx + sy) * inv_h2 * vol
        }
    }
}

/// `2N+1`-point Laplacian with homogeneous Dirichlet boundary; output is
/// zero on boundary nodes.
pub fn laplacian<T: Real>(f: &GridField<T>) -> GridField<T> {
    let dom = f.domain();
    let m = dom.nodes_per_axis();
    let h = dom.spacing();
    let inv_h2 = T::one() / (h * h);
    let mut out = GridField::zeros(dom);
    match dom.dim() {
        1 => {
            for i in 1..m - 1 {
                let v = (f.at(i - 1) - T::two() * f.at(i) + f.at(i + 1)) * inv_h2;
                out.set(i, v);
            }
        }
        _ => {
            for iy in 1..m - 1 {
                for ix in 1..m - 1 {
                    let c = dom.linear_index(ix, iy);
                    let v = (f.at(dom.linear_index(ix - 1, iy))
                        + f.at(dom.linear_index(ix + 1, iy))
                        + f.at(dom.linear_index(ix, iy - 1))
                        + f.at(dom.linear_index(ix, iy + 1))
                        - T::of(4.0) * f.at(c))
                        * inv_h2;
                    out.set(c, v);
                }
            }
        }
    }
    out
}

/// Outcome of one hypothesis check.
#[derive(Debug, Clone)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub pass: bool,
    /// True when the check is a finite surrogate of a limit statement.
    pub finite_surrogate: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Validate the structural hypotheses on the coefficient pair by sampling:
/// tail limits on shells, sign/infimum conditions, boundedness of `b`, and
/// the cone bound plus growth condition along rays. The two limit
/// statements are checked as finite trends over the outermost shells and
/// flagged as surrogates.
pub fn check_hypotheses<T: Real>(
    pair: &CoefficientPair<T>,
    dom: Domain<T>,
    tol: T,
) -> HypothesisReport {
    let mut checks = Vec::new();
    let l = dom.half_width();
    let n_shells = 8usize;
    let n_radii = 64usize;
    let dirs_cone = pair.cone.sample_directions(dom.dim(), 17);

    // (h1): a -> a_inf and b -> 0, checked as decreasing trends of alpha and
    // b over the outermost shells.
    {
        let shell = |k: usize| l * (T::of(0.6) + T::of(0.4) * T::of(k as f64 / (n_shells - 1) as f64));
        let alpha_vals: Vec<T> = (0..n_shells).map(|k| pair.alpha.eval(shell(k)).abs()).collect();
        let b_vals: Vec<T> = (0..n_shells).map(|k| pair.b.eval(shell(k)).abs()).collect();
        let trend_ok = |vals: &[T]| vals.windows(2).all(|w| w[1] <= w[0] + tol);
        let pass = trend_ok(&alpha_vals) && trend_ok(&b_vals);
        checks.push(HypothesisCheck {
            name: "h1",
            pass,
            finite_surrogate: true,
            detail: format!(
                "outer-shell trend: alpha {} -> {}, b {} -> {}",
                alpha_vals[0], alpha_vals[n_shells - 1], b_vals[0], b_vals[n_shells - 1]
            ),
        });
    }

    // (h2): a0 > 0, alpha >= 0, and the declared a0 really bounds a from
    // below on sampled radii.
    {
        let mut min_a = T::infinity();
        let mut min_alpha = T::infinity();
        for k in 0..=n_radii {
            let r = l * T::of(k as f64 / n_radii as f64);
            let al = pair.alpha.eval(r);
            min_alpha = min_alpha.min(al);
            min_a = min_a.min(pair.a_inf - al);
        }
        let pass = pair.a0 > T::zero() && min_alpha >= -tol && min_a >= pair.a0 - tol;
        checks.push(HypothesisCheck {
            name: "h2",
            pass,
            finite_surrogate: false,
            detail: format!("a0 = {}, sampled min a = {}, min alpha = {}", pair.a0, min_a, min_alpha),
        });
    }

    // (h3): b >= 0 and bounded.
    {
        let mut min_b = T::infinity();
        let mut max_b = T::zero();
        for k in 0..=n_radii {
            let r = l * T::of(k as f64 / n_radii as f64);
            let b = pair.b.eval(r);
            min_b = min_b.min(b);
            max_b = max_b.max(b);
        }
        let pass = min_b >= -tol && max_b.is_finite();
        checks.push(HypothesisCheck {
            name: "h3",
            pass,
            finite_surrogate: false,
            detail: format!("sampled b range [{}, {}]", min_b, max_b),
        });
    }

    // (h4a): alpha(x) <= c exp(-eta |x|) on rays in the cone.
    {
        let mut worst = T::neg_infinity();
        let mut pass = !dirs_cone.is_empty();
        for _dir in &dirs_cone {
            for k in 1..=n_radii {
                let r = l * T::of(k as f64 / n_radii as f64);
                let bound = pair.cone_c * (-pair.eta * r).exp();
                let excess = pair.alpha.eval(r) - bound;
                worst = worst.max(excess);
                if excess > tol {
                    pass = false;
                }
            }
        }
        checks.push(HypothesisCheck {
            name: "h4-alpha-bound",
            pass,
            finite_surrogate: false,
            detail: format!("max(alpha - c e^(-eta r)) over cone rays = {}", worst),
        });
    }

    // (h4b): b(x) e^(eta |x|) -> +inf in the cone, checked as monotone
    // growth over the outermost shells (a finite surrogate of the limit).
    {
        let mut pass = !dirs_cone.is_empty();
        let mut last_vals = Vec::new();
        for k in 0..n_shells {
            let r = l * (T::of(0.6) + T::of(0.4) * T::of(k as f64 / (n_shells - 1) as f64));
            let g = pair.b.eval(r) * (pair.eta * r).exp();
            last_vals.push(g);
        }
        for w in last_vals.windows(2) {
            if !(w[1] > w[0]) {
                pass = false;
            }
        }
        checks.push(HypothesisCheck {
            name: "h4-growth",
            pass,
            finite_surrogate: true,
            detail: format!(
                "b e^(eta r) over outer shells: {} -> {}",
                last_vals.first().copied().unwrap_or(T::zero()),
                last_vals.last().copied().unwrap_or(T::zero())
            ),
        });
    }

    HypothesisReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom1(l: f64, m: usize) -> Domain<f64> {
        Domain::new(1, l, m).unwrap()
    }

    fn dom2(l: f64, m: usize) -> Domain<f64> {
        Domain::new(2, l, m).unwrap()
    }

    #[test]
    fn domain_rejects_bad_shapes() {
        assert!(Domain::new(3, 1.0, 65).is_err());
        assert!(Domain::new(2, 1.0, 64).is_err());
        assert!(Domain::new(2, 1.0, 31).is_err());
        assert!(Domain::new(2, -1.0, 65).is_err());
    }

    #[test]
    fn sample_zero_perturbation_is_constant() {
        let pair = CoefficientPair::limit(2.5f64);
        let (a, b) = sample(&pair, dom2(6.0, 33)).unwrap();
        assert!(a.values().iter().all(|&v| v == 2.5));
        assert!(b.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_matches_the_coefficient_families() {
        // a(x) = 2 - e^{-|x|} has value 1 at the origin
        let pair = CoefficientPair {
            a_inf: 2.0,
            alpha: AlphaDescriptor::Exponential { c: 1.0, kappa: 1.0 },
            b: BDescriptor::Rational { amplitude: 0.3, power: 1.0 },
            a0: 1.0,
            eta: 0.5,
            cone: Cone::Full,
            cone_c: 1.0,
            zeta: [1.0, 0.0],
            d: 0.5,
        };
        let dom = dom1(8.0, 33);
        let (a, b) = sample(&pair, dom).unwrap();
        let origin = dom.linear_index(16, 0);
        assert!((a.at(origin) - 1.0).abs() < 1e-15);
        // b(x) = C/(1+|x|) at |x| = 1 is C/2
        let h = dom.spacing();
        let one = (1.0 / h).round() as usize;
        let idx = dom.linear_index(16 + one, 0);
        assert!((b.at(idx) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn sample_rejects_malformed_descriptors() {
        let mut pair = CoefficientPair::limit(1.0f64);
        pair.alpha = AlphaDescriptor::Exponential { c: -1.0, kappa: 1.0 };
        assert!(sample(&pair, dom1(6.0, 33)).is_err());
    }

    #[test]
    fn integrate_constant_is_exact() {
        let dom = dom2(3.0, 41);
        let f = GridField::from_fn(dom, |_| 1.0);
        assert!((integrate(&f) - 36.0).abs() < 1e-12);
        let d1 = dom1(3.0, 41);
        let f1 = GridField::from_fn(d1, |_| 1.0);
        assert!((integrate(&f1) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_zero_is_zero() {
        let f = GridField::<f64>::zeros(dom2(3.0, 33));
        assert_eq!(integrate(&f), 0.0);
    }

    #[test]
    fn integrate_gaussian_matches_analytic() {
        let pi = std::f64::consts::PI;
        let f1 = GridField::from_fn(dom1(8.0, 257), |p| (-p[0] * p[0]).exp());
        assert!((integrate(&f1) - pi.sqrt()).abs() < 1e-6);
        let f2 = GridField::from_fn(dom2(8.0, 257), |p| (-(p[0] * p[0] + p[1] * p[1])).exp());
        assert!((integrate(&f2) - pi).abs() < 1e-6);
    }

    #[test]
    fn integrate_is_linear_and_monotone() {
        let dom = dom1(4.0, 65);
        let f = GridField::from_fn(dom, |p| (p[0] * 1.3).sin().abs());
        let g = GridField::from_fn(dom, |p| (p[0] * 0.7).cos() + 1.5);
        let sum = f.zip_with(&g, |a, b| a + 2.0 * b);
        let lhs = integrate(&sum);
        let rhs = integrate(&f) + 2.0 * integrate(&g);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        // f <= f + |g| pointwise
        let bigger = f.zip_with(&g, |a, b| a + b.abs());
        assert!(integrate(&f) <= integrate(&bigger));
    }

    #[test]
    fn gradient_energy_of_sine_is_second_order() {
        // f(x) = sin(pi x / L) vanishes at the boundary; int f'^2 = pi^2 / L
        let l = 4.0;
        let exact = std::f64::consts::PI.powi(2) / l;
        let mut errs = Vec::new();
        for m in [65usize, 129] {
            let dom = dom1(l, m);
            let f = GridField::from_fn(dom, |p| (std::f64::consts::PI * p[0] / l).sin());
            errs.push((weak_gradient_energy(&f) - exact).abs());
        }
        assert!(errs[0] < 1e-2);
        // halving h should cut the error by about 4
        assert!(errs[1] < 0.35 * errs[0], "errors: {errs:?}");
    }

    #[test]
    fn summation_by_parts_is_exact() {
        for dom in [dom2(3.0, 33)] {
            let mut f = GridField::from_fn(dom, |p| (1.7 * p[0] + 0.3).sin() * (0.9 * p[1]).cos());
            let mut g = GridField::from_fn(dom, |p| (p[0] * p[1] * 0.31).cos() + 0.2 * p[0]);
            f.zero_boundary();
            g.zero_boundary();
            let bilinear = gradient_bilinear(&f, &g);
            let lap = laplacian(&g);
            let pairing = integrate_with(dom, |i| f.at(i) * lap.at(i));
            assert!(
                (bilinear + pairing).abs() <= 1e-12 * bilinear.abs().max(1.0),
                "bilinear {bilinear} vs pairing {pairing}"
            );
        }
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let f = GridField::<f64>::zeros(dom2(3.0, 33));
        assert!(laplacian(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_is_deterministic() {
        let pair = CoefficientPair {
            a_inf: 2.0,
            alpha: AlphaDescriptor::Exponential { c: 1.0, kappa: 1.0 },
            b: BDescriptor::Rational { amplitude: 0.1, power: 1.0 },
            a0: 1.0,
            eta: 0.5,
            cone: Cone::Full,
            cone_c: 1.0,
            zeta: [1.0, 0.0],
            d: 0.5,
        };
        let dom = dom2(6.0, 65);
        let (a1, b1) = sample(&pair, dom).unwrap();
        let (a2, b2) = sample(&pair, dom).unwrap();
        assert!(a1.values().iter().zip(a2.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(b1.values().iter().zip(b2.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn hypotheses_pass_on_a_compliant_pair() {
        let pair = CoefficientPair {
            a_inf: 2.0,
            alpha: AlphaDescriptor::Exponential { c: 1.0, kappa: 1.0 },
            b: BDescriptor::Rational { amplitude: 0.1, power: 1.0 },
            a0: 1.0,
            eta: 0.5,
            cone: Cone::Full,
            cone_c: 1.0,
            zeta: [1.0, 0.0],
            d: 0.5,
        };
        let report = check_hypotheses(&pair, dom2(12.0, 65), 1e-9);
        assert!(report.all_pass(), "{report:?}");
        assert!(report.checks.iter().any(|c| c.finite_surrogate));
    }

    #[test]
    fn hypotheses_flag_a_slowly_decaying_alpha() {
        // alpha = e^{-0.1|x|} decays slower than e^{-eta|x|} with eta = 0.5
        let pair = CoefficientPair {
            a_inf: 2.0,
            alpha: AlphaDescriptor::Exponential { c: 1.0, kappa: 0.1 },
            b: BDescriptor::Rational { amplitude: 0.1, power: 1.0 },
            a0: 1.0,
            eta: 0.5,
            cone: Cone::Full,
            cone_c: 1.0,
            zeta: [1.0, 0.0],
            d: 0.5,
        };
        let report = check_hypotheses(&pair, dom2(12.0, 65), 1e-9);
        let h4a = report.checks.iter().find(|c| c.name == "h4-alpha-bound").unwrap();
        assert!(!h4a.pass);
    }

    #[test]
    fn hypotheses_flag_a_negative_b() {
        // bypasses descriptor validation on purpose: the checker must catch it
        let pair = CoefficientPair {
            a_inf: 1.0,
            alpha: AlphaDescriptor::Zero,
            b: BDescriptor::Rational { amplitude: -0.1, power: 1.0 },
            a0: 1.0,
            eta: 0.5,
            cone: Cone::Full,
            cone_c: 1.0,
            zeta: [1.0, 0.0],
            d: 0.5,
        };
        let report = check_hypotheses(&pair, dom2(12.0, 65), 1e-9);
        let h3 = report.checks.iter().find(|c| c.name == "h3").unwrap();
        assert!(!h3.pass);
    }

    #[test]
    fn csv_roundtrip_preserves_the_field() {
        let dom = dom2(2.0, 33);
        let f = GridField::from_fn(dom, |p| (p[0] + 2.0) * (p[1] - 0.5));
        let g = GridField::<f64>::from_csv(&f.to_csv()).unwrap();
        assert_eq!(f.domain(), g.domain());
        for i in 0..dom.node_count() {
            assert!((f.at(i) - g.at(i)).abs() <= 1e-12 * f.at(i).abs().max(1.0));
        }
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let dom = dom1(4.0, 65);
        let f = GridField::from_fn(dom, |p| 1.0 + p[0] + 0.5 * p[0] * p[0] - 0.25 * p[0].powi(3));
        for &x in &[-3.9, -1.234, 0.0, 0.77, 2.501, 3.9] {
            let exact = 1.0 + x + 0.5 * x * x - 0.25 * x * x * x;
            assert!((f.interp_cubic([x, 0.0]) - exact).abs() < 1e-12, "x = {x}");
        }
        // node values are reproduced exactly
        let idx = dom.linear_index(20, 0);
        let p = dom.point(idx);
        assert_eq!(f.interp_cubic(p), f.at(idx));
    }
}
