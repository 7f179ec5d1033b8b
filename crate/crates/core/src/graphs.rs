//! Maximal monotone graphs and their Yosida regularizations.
//!
//! A graph `β = ∂β̂` is represented by its effective domain, its minimal
//! section `β°` and the convex antiderivative `β̂` with `β̂(0) = 0`. Only
//! minimal sections are ever evaluated, so a graph that is multivalued at a
//! closed endpoint (the obstacle graph) is stored as "zero inside, vertical at
//! the endpoints" and its resolvent is the projection onto the interval.
//!
//! The Yosida approximation at level `ε > 0` is
//!
//! ```text
//! β^ε(r) = (r − J_ε r) / ε,     J_ε = (I + εβ)^{-1}
//! ```
//!
//! and its antiderivative is evaluated through the Moreau envelope
//! `β̂^ε(r) = β̂(J_ε r) + ε/2 · β^ε(r)²`, which equals `∫₀^r β^ε`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Tolerance on the Newton increment of the scalar resolvent solve.
pub const RESOLVENT_TOL: f64 = 1e-12;
const RESOLVENT_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("{graph}: r = {r} lies outside the graph domain {domain}")]
    OutsideDomain { graph: String, r: f64, domain: Interval },
    #[error("{graph}: resolvent root-find did not converge (eps = {eps}, r = {r})")]
    ResolventNonConvergence { graph: String, eps: f64, r: f64 },
    #[error("Yosida level must be positive, got {0}")]
    NonPositiveLevel(f64),
    #[error("invalid potential parameter: {0}")]
    InvalidParameter(String),
    #[error("(A5): coupling function {0}")]
    CouplingAssumption(String),
}

/// An interval of the extended real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn real_line() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: true, hi_open: true }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: false, hi_open: false }
    }

    pub fn contains(&self, r: f64) -> bool {
        let above = if self.lo_open { r > self.lo } else { r >= self.lo };
        let below = if self.hi_open { r < self.hi } else { r <= self.hi };
        above && below
    }

    pub fn closure_contains(&self, r: f64) -> bool {
        r >= self.lo && r <= self.hi
    }

    /// True when both endpoints are excluded (infinite endpoints count as excluded).
    pub fn is_open(&self) -> bool {
        (self.lo_open || self.lo.is_infinite()) && (self.hi_open || self.hi.is_infinite())
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        let lo_ok =
            self.lo > other.lo || (self.lo == other.lo && (self.lo_open || !other.lo_open || self.lo.is_infinite()));
        let hi_ok =
            self.hi < other.hi || (self.hi == other.hi && (self.hi_open || !other.hi_open || self.hi.is_infinite()));
        lo_ok && hi_ok
    }

    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_open { '(' } else { '[' };
        let r = if self.hi_open { ')' } else { ']' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// Regularity class of a graph at the ends of its domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Smooth,
    SingularAtEndpoints,
    MultivaluedAtEndpoints,
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// User-supplied graph given by closures. The section must be nondecreasing
/// with `section(0) = 0`; `section_derivative` is used by the Newton resolvent.
pub struct CustomGraph {
    pub name: String,
    pub domain: Interval,
    pub kind: GraphKind,
    pub section: Box<ScalarFn>,
    pub section_derivative: Box<ScalarFn>,
    pub antiderivative: Box<ScalarFn>,
}

#[derive(Clone)]
enum Shape {
    Linear { slope: f64 },
    Cubic { coef: f64 },
    Logarithmic,
    Obstacle { lo: f64, hi: f64 },
    Custom(Arc<CustomGraph>),
}

/// A maximal monotone graph `β = ∂β̂` on the real line with `0 ∈ β(0)`.
#[derive(Clone)]
pub struct MonotoneGraph {
    shape: Shape,
}

impl fmt::Debug for MonotoneGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneGraph").field("name", &self.name()).field("domain", &self.domain()).finish()
    }
}

fn x_ln_x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl MonotoneGraph {
    /// `β(r) = slope · r`.
    pub fn linear(slope: f64) -> Self {
        assert!(slope >= 0.0, "linear graph needs a nonnegative slope");
        MonotoneGraph { shape: Shape::Linear { slope } }
    }

    /// `β(r) = coef · r³`.
    pub fn cubic(coef: f64) -> Self {
        assert!(coef >= 0.0, "cubic graph needs a nonnegative coefficient");
        MonotoneGraph { shape: Shape::Cubic { coef } }
    }

    /// `β(r) = ln((1+r)/(1−r))` on `(−1, 1)`.
    pub fn logarithmic() -> Self {
        MonotoneGraph { shape: Shape::Logarithmic }
    }

    /// Subdifferential of the indicator of `[−1, 1]`.
    pub fn obstacle() -> Self {
        Self::obstacle_on(-1.0, 1.0)
    }

    /// Subdifferential of the indicator of `[lo, hi]`, `lo ≤ 0 ≤ hi`.
    pub fn obstacle_on(lo: f64, hi: f64) -> Self {
        assert!(lo <= 0.0 && hi >= 0.0 && lo < hi, "obstacle interval must contain 0");
        MonotoneGraph { shape: Shape::Obstacle { lo, hi } }
    }

    pub fn custom(graph: CustomGraph) -> Self {
        MonotoneGraph { shape: Shape::Custom(Arc::new(graph)) }
    }

    pub fn name(&self) -> String {
        match &self.shape {
            Shape::Linear { slope } => format!("linear({slope})"),
            Shape::Cubic { coef } => format!("cubic({coef})"),
            Shape::Logarithmic => "logarithmic".to_string(),
            Shape::Obstacle { lo, hi } => format!("obstacle[{lo}, {hi}]"),
            Shape::Custom(c) => c.name.clone(),
        }
    }

    pub fn domain(&self) -> Interval {
        match &self.shape {
            Shape::Linear { .. } | Shape::Cubic { .. } => Interval::real_line(),
            Shape::Logarithmic => Interval::open(-1.0, 1.0),
            Shape::Obstacle { lo, hi } => Interval::closed(*lo, *hi),
            Shape::Custom(c) => c.domain,
        }
    }

    pub fn kind(&self) -> GraphKind {
        match &self.shape {
            Shape::Linear { .. } | Shape::Cubic { .. } => GraphKind::Smooth,
            Shape::Logarithmic => GraphKind::SingularAtEndpoints,
            Shape::Obstacle { .. } => GraphKind::MultivaluedAtEndpoints,
            Shape::Custom(c) => c.kind,
        }
    }

    /// Whether `β̂` is C² in the interior of its domain with a single-valued
    /// graph, i.e. the potential admits the smooth stability analysis.
    pub fn is_smooth_in_interior(&self) -> bool {
        self.kind() != GraphKind::MultivaluedAtEndpoints
    }

    fn outside(&self, r: f64) -> GraphError {
        GraphError::OutsideDomain { graph: self.name(), r, domain: self.domain() }
    }

    /// The least-modulus element `β°(r)`.
    pub fn minimal_section(&self, r: f64) -> Result<f64, GraphError> {
        if !self.domain().contains(r) {
            return Err(self.outside(r));
        }
        Ok(self.section_unchecked(r))
    }

    fn section_unchecked(&self, r: f64) -> f64 {
        match &self.shape {
            Shape::Linear { slope } => slope * r,
            Shape::Cubic { coef } => coef * r * r * r,
            Shape::Logarithmic => {
                if r >= 1.0 {
                    f64::INFINITY
                } else if r <= -1.0 {
                    f64::NEG_INFINITY
                } else {
                    (r.ln_1p() - (-r).ln_1p()).max(f64::MIN)
                }
            }
            Shape::Obstacle { .. } => 0.0,
            Shape::Custom(c) => (c.section)(r),
        }
    }

    fn section_derivative(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Linear { slope } => *slope,
            Shape::Cubic { coef } => 3.0 * coef * s * s,
            Shape::Logarithmic => 2.0 / ((1.0 - s) * (1.0 + s)),
            Shape::Obstacle { .. } => 0.0,
            Shape::Custom(c) => (c.section_derivative)(s),
        }
    }

    /// The convex antiderivative `β̂(r)`; `+∞` outside its effective domain.
    pub fn antiderivative(&self, r: f64) -> f64 {
        match &self.shape {
            Shape::Linear { slope } => 0.5 * slope * r * r,
            Shape::Cubic { coef } => 0.25 * coef * r.powi(4),
            Shape::Logarithmic => {
                if r.abs() > 1.0 {
                    f64::INFINITY
                } else {
                    x_ln_x(1.0 + r) + x_ln_x(1.0 - r)
                }
            }
            Shape::Obstacle { lo, hi } => {
                if r >= *lo && r <= *hi {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Shape::Custom(c) => {
                if c.domain.closure_contains(r) {
                    (c.antiderivative)(r)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// The resolvent `J_ε r = (I + εβ)^{-1} r`.
    pub fn resolvent(&self, eps: f64, r: f64) -> Result<f64, GraphError> {
        if !(eps > 0.0) {
            return Err(GraphError::NonPositiveLevel(eps));
        }
        match &self.shape {
            Shape::Linear { slope } => Ok(r / (1.0 + eps * slope)),
            Shape::Obstacle { lo, hi } => Ok(r.clamp(*lo, *hi)),
            _ => self.newton_resolvent(eps, r),
        }
    }

    /// Safeguarded Newton on the strictly increasing map `s ↦ s + ε β°(s) − r`,
    /// falling back to bisection whenever the step leaves the bracket.
    fn newton_resolvent(&self, eps: f64, r: f64) -> Result<f64, GraphError> {
        if r == 0.0 {
            return Ok(0.0);
        }
        let dom = self.domain();
        let phi = |s: f64| s + eps * self.section_unchecked(s) - r;

        // φ(0) = −r and φ(r) = ε β°(r) have opposite signs, so the root lies
        // between 0 and r, intersected with the closed domain.
        let (mut a, mut b) = if r > 0.0 { (0.0, r.min(dom.hi)) } else { (r.max(dom.lo), 0.0) };

        // A closed endpoint absorbs everything beyond it (vertical segment).
        if r > 0.0 && !dom.hi_open && b == dom.hi && phi(b) <= 0.0 {
            return Ok(b);
        }
        if r < 0.0 && !dom.lo_open && a == dom.lo && phi(a) >= 0.0 {
            return Ok(a);
        }

        let scale = 1.0 + r.abs();
        let mut s = 0.5 * (a + b);
        for _ in 0..RESOLVENT_MAX_ITER {
            let f = phi(s);
            if f == 0.0 {
                return Ok(s);
            }
            if !f.is_finite() || f > 0.0 {
                b = s;
            } else {
                a = s;
            }
            let d = 1.0 + eps * self.section_derivative(s);
            let mut next = s - f / d;
            if !next.is_finite() || next <= a || next >= b {
                next = 0.5 * (a + b);
            }
            if (next - s).abs() <= RESOLVENT_TOL * (1.0 + s.abs()) {
                return Ok(next);
            }
            if (b - a) <= 4.0 * f64::EPSILON * scale {
                // bracket collapsed to neighbouring floats near a singular endpoint
                let fa = phi(a);
                let fb = phi(b);
                return Ok(if fb.is_finite() && fb.abs() < fa.abs() { b } else { a });
            }
            s = next;
        }
        Err(GraphError::ResolventNonConvergence { graph: self.name(), eps, r })
    }

    /// The Yosida approximation `β^ε(r)`.
    pub fn yosida(&self, eps: f64, r: f64) -> Result<f64, GraphError> {
        let s = self.resolvent(eps, r)?;
        Ok((r - s) / eps)
    }

    /// `β^ε(r)` together with its derivative `(β^ε)'(r)`.
    pub fn yosida_with_derivative(&self, eps: f64, r: f64) -> Result<(f64, f64), GraphError> {
        let s = self.resolvent(eps, r)?;
        let value = (r - s) / eps;
        let slope = match &self.shape {
            Shape::Obstacle { lo, hi } => {
                if r > *hi || r < *lo {
                    1.0 / eps
                } else {
                    0.0
                }
            }
            _ => {
                let d = self.section_derivative(s);
                if !d.is_finite() || !self.domain().contains(s) {
                    1.0 / eps
                } else {
                    d / (1.0 + eps * d)
                }
            }
        };
        Ok((value, slope))
    }

    /// `β̂^ε(r) = ∫₀^r β^ε(s) ds`.
    pub fn yosida_antiderivative(&self, eps: f64, r: f64) -> Result<f64, GraphError> {
        let s = self.resolvent(eps, r)?;
        let y = (r - s) / eps;
        let base = match &self.shape {
            Shape::Obstacle { .. } => 0.0,
            _ => self.antiderivative(s),
        };
        Ok(base + 0.5 * eps * y * y)
    }
}

/// Lipschitz perturbation `π(r) = slope · r` with antiderivative
/// `π̂(r) = slope · r²/2 + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub slope: f64,
    pub offset: f64,
}

impl Perturbation {
    pub fn zero() -> Self {
        Perturbation { slope: 0.0, offset: 0.0 }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.slope * r
    }

    pub fn antiderivative(&self, r: f64) -> f64 {
        0.5 * self.slope * r * r + self.offset
    }

    pub fn lipschitz(&self) -> f64 {
        self.slope.abs()
    }
}

/// A double-well potential `W = β̂ + π̂`, so that `W' = β + π`.
#[derive(Clone, Debug)]
pub struct PotentialSplit {
    pub name: String,
    pub graph: MonotoneGraph,
    pub perturbation: Perturbation,
}

impl PotentialSplit {
    pub fn new(name: impl Into<String>, graph: MonotoneGraph, perturbation: Perturbation) -> Self {
        PotentialSplit { name: name.into(), graph, perturbation }
    }

    /// `W(r) = ¼(r² − 1)²`: `β(r) = r³`, `π(r) = −r`.
    pub fn regular() -> Self {
        Self::new("regular", MonotoneGraph::cubic(1.0), Perturbation { slope: -1.0, offset: 0.25 })
    }

    /// `W(r) = (1+r)ln(1+r) + (1−r)ln(1−r) − c r²`, nonconvex for `c > 1`.
    pub fn logarithmic(c: f64) -> Result<Self, GraphError> {
        if !(c > 1.0) {
            return Err(GraphError::InvalidParameter(format!(
                "logarithmic potential needs c > 1 for a double well, got c = {c}"
            )));
        }
        Ok(Self::new("logarithmic", MonotoneGraph::logarithmic(), Perturbation { slope: -2.0 * c, offset: 0.0 }))
    }

    /// `W(r) = I_[−1,1](r) − c r²`.
    pub fn obstacle(c: f64) -> Result<Self, GraphError> {
        if !(c > 0.0) {
            return Err(GraphError::InvalidParameter(format!("double-obstacle potential needs c > 0, got c = {c}")));
        }
        Ok(Self::new("obstacle", MonotoneGraph::obstacle(), Perturbation { slope: -2.0 * c, offset: 0.0 }))
    }

    pub fn pi(&self, r: f64) -> f64 {
        self.perturbation.value(r)
    }

    pub fn pi_antiderivative(&self, r: f64) -> f64 {
        self.perturbation.antiderivative(r)
    }

    pub fn w(&self, r: f64) -> f64 {
        self.graph.antiderivative(r) + self.pi_antiderivative(r)
    }

    /// `W'(r) = β°(r) + π(r)` on the graph domain.
    pub fn w_prime(&self, r: f64) -> Result<f64, GraphError> {
        Ok(self.graph.minimal_section(r)? + self.pi(r))
    }

    /// Regularized potential `β̂^ε + π̂`.
    pub fn w_regularized(&self, eps: f64, r: f64) -> Result<f64, GraphError> {
        Ok(self.graph.yosida_antiderivative(eps, r)? + self.pi_antiderivative(r))
    }
}

pub fn make_regular_split() -> PotentialSplit {
    PotentialSplit::regular()
}

pub fn make_logarithmic_split(c: f64) -> Result<PotentialSplit, GraphError> {
    PotentialSplit::logarithmic(c)
}

pub fn make_obstacle_split(c: f64) -> Result<PotentialSplit, GraphError> {
    PotentialSplit::obstacle(c)
}

/// User-supplied `g` on its native domain.
pub struct CustomCoupling {
    pub g: Box<ScalarFn>,
    pub g_prime: Box<ScalarFn>,
    pub g_second: Box<ScalarFn>,
}

#[derive(Clone)]
enum CouplingProfile {
    Affine { intercept: f64, slope: f64 },
    Custom(Arc<CustomCoupling>),
}

/// Quadratic C¹ continuation past one endpoint, flattening out after `width`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Blend {
    at: f64,
    value: f64,
    slope: f64,
    width: f64,
}

const BLEND_WIDTH: f64 = 1.0;
const G_FLOOR: f64 = -1.0 / 3.0;

/// The coupling function `g` on `cl D(β)` with its C¹ extension to ℝ.
#[derive(Clone)]
pub struct CouplingFunction {
    native: Interval,
    profile: CouplingProfile,
    left: Option<Blend>,
    right: Option<Blend>,
}

impl fmt::Debug for CouplingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("CouplingFunction");
        d.field("native", &self.native);
        if let CouplingProfile::Affine { intercept, slope } = self.profile {
            d.field("intercept", &intercept).field("slope", &slope);
        }
        d.finish()
    }
}

impl CouplingFunction {
    /// `g(r) = (1 + r)/2` on `[−1, 1]`.
    pub fn default_coupling() -> Self {
        Self::affine(0.5, 0.5, Interval::closed(-1.0, 1.0)).expect("default coupling satisfies (A5)")
    }

    /// `g ≡ 0`; turns the μ-equation into the heat equation.
    pub fn zero() -> Self {
        Self::affine(0.0, 0.0, Interval::closed(-1.0, 1.0)).expect("zero coupling satisfies (A5)")
    }

    /// `g(r) = intercept + slope · r` on `native`.
    pub fn affine(intercept: f64, slope: f64, native: Interval) -> Result<Self, GraphError> {
        let profile = CouplingProfile::Affine { intercept, slope };
        Self::extend_profile(native, profile)
    }

    /// Validate a user-supplied `g` against (A5) on a sample grid and extend it to ℝ.
    pub fn extend(native: Interval, custom: CustomCoupling) -> Result<Self, GraphError> {
        Self::extend_profile(native, CouplingProfile::Custom(Arc::new(custom)))
    }

    fn extend_profile(native: Interval, profile: CouplingProfile) -> Result<Self, GraphError> {
        let native = Interval::closed(native.lo, native.hi);
        let mut out = CouplingFunction { native, profile, left: None, right: None };
        out.validate()?;
        if native.lo.is_finite() {
            let (v, s) = (out.g(native.lo), out.g_prime(native.lo));
            let mut width = BLEND_WIDTH;
            if s > 0.0 && v - 0.5 * s * width < G_FLOOR {
                width = 2.0 * (v - G_FLOOR) / s;
            }
            out.left = Some(Blend { at: native.lo, value: v, slope: s, width });
        }
        if native.hi.is_finite() {
            let (v, s) = (out.g(native.hi), out.g_prime(native.hi));
            let mut width = BLEND_WIDTH;
            if s < 0.0 && v + 0.5 * s * width < G_FLOOR {
                width = 2.0 * (v - G_FLOOR) / (-s);
            }
            out.right = Some(Blend { at: native.hi, value: v, slope: s, width });
        }
        Ok(out)
    }

    fn validate(&self) -> Result<(), GraphError> {
        let (lo, hi) = (self.native.lo.max(-1e3), self.native.hi.min(1e3));
        if !(lo < hi) {
            return Err(GraphError::CouplingAssumption("native domain is empty".into()));
        }
        let n = 200;
        let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        for &r in &grid {
            let (g, gp, gpp) = (self.g(r), self.g_prime(r), self.g_second(r));
            if !(g.is_finite() && gp.is_finite() && gpp.is_finite()) {
                return Err(GraphError::CouplingAssumption(format!("non-finite value at r = {r}")));
            }
            if g < -1e-12 {
                return Err(GraphError::CouplingAssumption(format!("g({r}) = {g} is negative")));
            }
            if gpp > 1e-12 {
                return Err(GraphError::CouplingAssumption(format!("g''({r}) = {gpp} > 0, g is not concave")));
            }
        }
        for w in grid.windows(3) {
            let mid = self.g(w[1]);
            let chord = 0.5 * (self.g(w[0]) + self.g(w[2]));
            if mid < chord - 1e-10 * (1.0 + mid.abs()) {
                return Err(GraphError::CouplingAssumption(format!("g is not concave near r = {}", w[1])));
            }
        }
        Ok(())
    }

    pub fn native_domain(&self) -> Interval {
        self.native
    }

    /// `g` on the native domain (the formula is evaluated as given elsewhere).
    pub fn g(&self, r: f64) -> f64 {
        match &self.profile {
            CouplingProfile::Affine { intercept, slope } => intercept + slope * r,
            CouplingProfile::Custom(c) => (c.g)(r),
        }
    }

    pub fn g_prime(&self, r: f64) -> f64 {
        match &self.profile {
            CouplingProfile::Affine { slope, .. } => *slope,
            CouplingProfile::Custom(c) => (c.g_prime)(r),
        }
    }

    pub fn g_second(&self, r: f64) -> f64 {
        match &self.profile {
            CouplingProfile::Affine { .. } => 0.0,
            CouplingProfile::Custom(c) => (c.g_second)(r),
        }
    }

    /// The C¹ extension of `g` to the whole real line; `≥ −1/3` everywhere.
    pub fn extended_g(&self, r: f64) -> f64 {
        if let Some(b) = self.left.filter(|b| r < b.at) {
            let d = (b.at - r).min(b.width);
            return b.value - b.slope * d + b.slope * d * d / (2.0 * b.width);
        }
        if let Some(b) = self.right.filter(|b| r > b.at) {
            let d = (r - b.at).min(b.width);
            return b.value + b.slope * d - b.slope * d * d / (2.0 * b.width);
        }
        self.g(r)
    }

    pub fn extended_g_prime(&self, r: f64) -> f64 {
        if let Some(b) = self.left.filter(|b| r < b.at) {
            let d = (b.at - r).min(b.width);
            return b.slope * (1.0 - d / b.width);
        }
        if let Some(b) = self.right.filter(|b| r > b.at) {
            let d = (r - b.at).min(b.width);
            return b.slope * (1.0 - d / b.width);
        }
        self.g_prime(r)
    }

    /// `α(r) = (1 + 2g(r))^{-1/2}`, using the extension; lies in `(0, √3]`.
    pub fn alpha(&self, r: f64) -> f64 {
        (1.0 + 2.0 * self.extended_g(r)).sqrt().recip()
    }

    /// True when `g` is identically zero (pure heat equation for μ).
    pub fn is_zero(&self) -> bool {
        matches!(self.profile, CouplingProfile::Affine { intercept, slope } if intercept == 0.0 && slope == 0.0)
    }
}

pub fn make_default_coupling() -> CouplingFunction {
    CouplingFunction::default_coupling()
}

pub fn alpha(coupling: &CouplingFunction, r: f64) -> f64 {
    coupling.alpha(r)
}

/// One row of a [`DominationReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct DominationSample {
    pub r: f64,
    /// `|β°(r)|`
    pub bulk: f64,
    /// `η|β_Γ°(r)| + C_Γ`
    pub bound: f64,
    pub pass: bool,
    /// `|β^ε(r)|`
    pub yosida_bulk: f64,
    /// `η|β_Γ^{εη}(r)| + C_Γ`
    pub yosida_bound: f64,
    pub yosida_pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationReport {
    pub eta: f64,
    pub c_gamma: f64,
    pub eps: f64,
    pub domain_ok: bool,
    pub samples: Vec<DominationSample>,
    pub pass: bool,
}

/// Compatibility check: `D(β_Γ) ⊆ D(β)` and `|β°| ≤ η|β_Γ°| + C_Γ` on the
/// samples, plus the same inequality between the Yosida maps at levels `ε`
/// and `εη`.
pub fn check_domination(
    bulk: &MonotoneGraph,
    boundary: &MonotoneGraph,
    eta: f64,
    c_gamma: f64,
    eps: f64,
    samples: &[f64],
) -> Result<DominationReport, GraphError> {
    if !(eta > 0.0) || !(c_gamma >= 0.0) {
        return Err(GraphError::InvalidParameter(format!(
            "domination constants need eta > 0 and C_Gamma >= 0, got eta = {eta}, C_Gamma = {c_gamma}"
        )));
    }
    let domain_ok = boundary.domain().is_subset_of(&bulk.domain());
    let slack = |x: f64| 1e-12 * (1.0 + x.abs());
    let mut rows = Vec::with_capacity(samples.len());
    for &r in samples {
        let gamma = boundary.minimal_section(r)?;
        let b = bulk.minimal_section(r).map(f64::abs).unwrap_or(f64::INFINITY);
        let bound = eta * gamma.abs() + c_gamma;
        let yb = bulk.yosida(eps, r)?.abs();
        let ybound = eta * boundary.yosida(eps * eta, r)?.abs() + c_gamma;
        rows.push(DominationSample {
            r,
            bulk: b,
            bound,
            pass: b <= bound + slack(bound),
            yosida_bulk: yb,
            yosida_bound: ybound,
            yosida_pass: yb <= ybound + slack(ybound),
        });
    }
    let pass = domain_ok && rows.iter().all(|s| s.pass && s.yosida_pass);
    Ok(DominationReport { eta, c_gamma, eps, domain_ok, samples: rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimize `s ↦ (s − r)²/(2ε) + I(s)` by a fine scan of the interval.
    fn scan_prox_indicator(lo: f64, hi: f64, eps: f64, r: f64) -> f64 {
        let n = 200_000;
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .min_by(|a, b| {
                let fa = (a - r).powi(2) / (2.0 * eps);
                let fb = (b - r).powi(2) / (2.0 * eps);
                fa.partial_cmp(&fb).unwrap()
            })
            .unwrap()
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + h * i as f64);
        }
        acc * h / 3.0
    }

    #[test]
    fn obstacle_resolvent_is_projection() {
        let g = MonotoneGraph::obstacle();
        let scanned = scan_prox_indicator(-1.0, 1.0, 0.5, 2.0);
        assert!((scanned - 1.0).abs() < 1e-4);
        assert_eq!(g.resolvent(0.5, 2.0).unwrap(), 1.0);
        assert_eq!(g.yosida(0.5, 2.0).unwrap(), 2.0);
        assert_eq!(g.yosida_antiderivative(0.3, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn obstacle_antiderivative_matches_quadrature() {
        let g = MonotoneGraph::obstacle();
        let quad = simpson(|s| g.yosida(0.5, s).unwrap(), 1.0, 2.0, 1000);
        assert!((quad - 1.0).abs() < 1e-12);
        assert!((g.yosida_antiderivative(0.5, 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_resolvent_solves_substitution() {
        let g = MonotoneGraph::cubic(1.0);
        let s = g.resolvent(1.0, 2.0).unwrap();
        assert!((s + s.powi(3) - 2.0).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
        let y = g.yosida(1.0, 2.0).unwrap();
        assert!((y - 1.0).abs() < 1e-12);
        assert!(y <= g.minimal_section(2.0).unwrap().abs());
    }

    #[test]
    fn origin_is_fixed() {
        for g in [
            MonotoneGraph::cubic(1.0),
            MonotoneGraph::logarithmic(),
            MonotoneGraph::obstacle(),
            MonotoneGraph::linear(2.0),
        ] {
            assert_eq!(g.resolvent(0.7, 0.0).unwrap(), 0.0);
            assert_eq!(g.yosida(0.01, 0.0).unwrap(), 0.0);
            assert_eq!(g.yosida_antiderivative(0.01, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_graph_closed_form() {
        let g = MonotoneGraph::linear(1.0);
        for &r in &[-3.0, -0.2, 0.5, 4.0] {
            let (y, dy) = g.yosida_with_derivative(0.25, r).unwrap();
            assert!((y - r / 1.25).abs() < 1e-15);
            assert!((dy - 1.0 / 1.25).abs() < 1e-15);
        }
    }

    #[test]
    fn regular_split_values() {
        let p = PotentialSplit::regular();
        assert_eq!(p.w_prime(1.0).unwrap(), 0.0);
        assert_eq!(p.graph.minimal_section(0.0).unwrap(), 0.0);
        assert_eq!(p.pi(0.0), 0.0);
        let quad = simpson(|s| s.powi(3), 0.0, 2.0, 100);
        assert!((p.graph.antiderivative(2.0) - quad).abs() < 1e-12);
        assert_eq!(p.graph.antiderivative(2.0), 4.0);
        for &r in &[-1.7, -0.3, 0.0, 0.4, 1.2] {
            let closed = 0.25 * (r * r - 1.0_f64).powi(2);
            assert!((p.w(r) - closed).abs() < 1e-14);
        }
    }

    #[test]
    fn logarithmic_split_values() {
        let p = PotentialSplit::logarithmic(2.0).unwrap();
        assert_eq!(p.graph.minimal_section(0.0).unwrap(), 0.0);
        let beta = p.graph.minimal_section(0.5).unwrap();
        assert!((beta - 3.0_f64.ln()).abs() < 1e-14);
        // finite-difference derivative of W + 2c r
        let h = 1e-5;
        let f = |r: f64| p.w(r) + 2.0 * r * r;
        let fd = (f(0.5 + h) - f(0.5 - h)) / (2.0 * h);
        assert!((fd - 3.0_f64.ln()).abs() < 1e-8);
        assert!(p.graph.minimal_section(1.0 - 1e-7).unwrap() > 16.0);
        assert!(p.graph.minimal_section(1.0).is_err());
        assert!(p.graph.minimal_section(-1.2).is_err());
        for &r in &[-0.9_f64, -0.1, 0.3, 0.99] {
            let closed = (1.0 + r) * (1.0 + r).ln() + (1.0 - r) * (1.0 - r).ln() - 2.0 * r * r;
            assert!((p.w(r) - closed).abs() < 1e-14);
        }
        assert!(PotentialSplit::logarithmic(0.5).is_err());
    }

    #[test]
    fn obstacle_split_values() {
        let p = PotentialSplit::obstacle(1.0).unwrap();
        assert_eq!(p.graph.antiderivative(0.5), 0.0);
        assert_eq!(p.graph.antiderivative(1.5), f64::INFINITY);
        assert_eq!(p.graph.minimal_section(1.0).unwrap(), 0.0);
        assert_eq!(p.graph.resolvent(0.5, 2.0).unwrap(), 1.0);
        assert!(PotentialSplit::obstacle(0.0).is_err());
    }

    #[test]
    fn log_resolvent_far_outside_domain_stays_finite() {
        let g = MonotoneGraph::logarithmic();
        for &r in &[5.0, 1e3, 1e6, -1e6] {
            for &eps in &[1.0, 1e-3] {
                let s = g.resolvent(eps, r).unwrap();
                assert!(s.abs() <= 1.0);
                assert!(g.yosida(eps, r).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn domination_examples() {
        let log = MonotoneGraph::logarithmic();
        let samples: Vec<f64> = (-9..=9).map(|i| i as f64 * 0.1).collect();
        assert!(check_domination(&log, &log, 1.0, 0.0, 0.01, &samples).unwrap().pass);

        let cubic = MonotoneGraph::cubic(1.0);
        let obstacle = MonotoneGraph::obstacle();
        let rep = check_domination(&cubic, &obstacle, 1.0, 0.0, 0.01, &[0.9]).unwrap();
        assert!(!rep.pass);
        assert!((rep.samples[0].bulk - 0.729).abs() < 1e-15);
        assert_eq!(rep.samples[0].bound, 0.0);

        let double = MonotoneGraph::cubic(2.0);
        let wide: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.17).collect();
        assert!(check_domination(&cubic, &double, 1.0, 0.0, 0.1, &wide).unwrap().pass);

        // sample outside D(β_Γ)
        assert!(check_domination(&log, &log, 1.0, 0.0, 0.1, &[1.5]).is_err());
        // D(β_Γ) ⊄ D(β)
        let rep = check_domination(&log, &cubic, 1.0, 0.0, 0.1, &[0.0]).unwrap();
        assert!(!rep.domain_ok && !rep.pass);
    }

    #[test]
    fn default_coupling_and_extension() {
        let c = CouplingFunction::default_coupling();
        assert_eq!(c.g(0.0), 0.5);
        assert!(c.extended_g(-10.0) >= -1.0 / 3.0);
        for i in 0..=100 {
            let r = -1.0 + 2.0 * i as f64 / 100.0;
            assert_eq!(c.extended_g(r), c.g(r));
        }
        // C¹ across the junctions
        for &x in &[-1.0, 1.0, -2.0, 2.0] {
            let h = 1e-9;
            assert!((c.extended_g_prime(x - h) - c.extended_g_prime(x + h)).abs() < 1e-6);
            assert!((c.extended_g(x - h) - c.extended_g(x + h)).abs() < 1e-8);
        }
        assert!((c.alpha(1.0) - 3.0_f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn extension_band_shrinks_to_respect_floor() {
        let c = CouplingFunction::affine(0.0, 2.0, Interval::closed(0.0, 1.0)).unwrap();
        for i in 0..400 {
            let r = -3.0 + 0.01 * i as f64;
            assert!(c.extended_g(r) >= G_FLOOR - 1e-15);
        }
        assert!((c.extended_g(-5.0) - G_FLOOR).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_gives_unit_alpha() {
        let c = CouplingFunction::zero();
        assert!(c.is_zero());
        for &r in &[-50.0, -1.0, 0.0, 0.3, 7.0] {
            assert_eq!(c.alpha(r), 1.0);
        }
    }

    #[test]
    fn coupling_validation_rejects_convex_or_negative() {
        let convex =
            CustomCoupling { g: Box::new(|r| r * r), g_prime: Box::new(|r| 2.0 * r), g_second: Box::new(|_| 2.0) };
        assert!(CouplingFunction::extend(Interval::closed(-1.0, 1.0), convex).is_err());
        assert!(CouplingFunction::affine(0.0, 1.0, Interval::closed(-1.0, 1.0)).is_err());
    }
}
