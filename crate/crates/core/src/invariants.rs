//! Wrapping numbers: quadrature, gluing, closed forms, limit analysis,
//! singularity classes and accidental invariants.

use num_integer::Integer;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CompiledAxis, MapClass, MapKind, PairSlots, SpatialDensity, Term, TripleSpec, UnitField};
use crate::lie::{ElementKind, RootPair};
use crate::quad::{self, Grid};

/// Accepted change of the integral under halving the radial resolution.
pub const TOLERANCE: f64 = 5e-3;
/// Refinement steps after the first pass before giving up.
pub const MAX_REFINEMENTS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct WrappingResult {
    pub raw: f64,
    pub glued: f64,
    pub analytic: Option<Rational64>,
    pub quadrature_error: f64,
    pub singular: bool,
    /// Grid of the accepted pass.
    pub grid: Grid,
}

/// Integrates the wrapping density with Richardson-style error control.
/// Each refinement doubles `n_r` and multiplies `n_phi` by 2 (by 4 when the
/// triple is flagged singular at the origin).
pub fn wrapping_numeric(field: &UnitField, singular: bool) -> Result<WrappingResult> {
    let mut grid = field.grid;
    let mut last = None;
    for _ in 0..=MAX_REFINEMENTS {
        let q = quad::integrate(field, &grid);
        if q.error <= TOLERANCE && q.raw.is_finite() {
            return Ok(WrappingResult {
                raw: q.raw,
                glued: q.raw,
                analytic: None,
                quadrature_error: q.error,
                singular,
                grid,
            });
        }
        last = Some(q);
        grid = grid
            .with_n_r(grid.n_r * 2)
            .with_n_phi(grid.n_phi * if singular { 4 } else { 2 });
    }
    let q = last.expect("at least one pass");
    Err(Error::NonConvergent {
        raw: q.raw,
        error: q.error,
    })
}

/// Doubles disk-map values; identity otherwise.
pub fn glue(mut result: WrappingResult, class: &MapClass) -> WrappingResult {
    result.glued = match class.kind {
        MapKind::DiskToDisk => 2.0 * result.raw,
        _ => result.raw,
    };
    result
}

/// Closed-form value plus whether any step function was evaluated at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub value: Rational64,
    pub tie: bool,
}

impl ClosedForm {
    pub fn to_f64(&self) -> f64 {
        *self.value.numer() as f64 / *self.value.denom() as f64
    }
}

struct Steps {
    tie: bool,
}

impl Steps {
    fn th(&mut self, x: i64) -> Rational64 {
        match x.signum() {
            1 => Rational64::from_integer(1),
            -1 => Rational64::from_integer(0),
            _ => {
                self.tie = true;
                Rational64::new(1, 2)
            }
        }
    }

    fn sg(&mut self, x: i64) -> Rational64 {
        self.th(x) - self.th(-x)
    }
}

fn or(x: Rational64, y: Rational64) -> Rational64 {
    x + y - x * y
}

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

/// Labels accepted by [`wrapping_analytic_d3`]: the table list plus 12*.
pub const CLOSED_FORM_LABELS: [&str; 19] = [
    "123", "45*", "67*", "124", "125", "126", "127", "128", "12*", "451", "452", "453", "456",
    "457", "671", "672", "673", "674", "675",
];

/// Printed closed forms, `theta(0) = 1/2`. `128` has no printed form; it
/// uses the limit-analysis expression shared with
/// [`wrapping_consistent_d3`].
pub fn wrapping_analytic_d3(label: &str, l: [i64; 3]) -> Result<ClosedForm> {
    let [l0, l1, l2] = l;
    let [a0, a1, a2] = l.map(i64::abs);
    let mut s = Steps { tie: false };
    let value = match label {
        "123" => r(l0 - l1) * s.sg(a0 - a1),
        "45*" => r(l0 - l2) * s.sg(a0 - a2),
        "67*" => r(l1 - l2) * s.sg(a1 - a2),
        "124" => r(l0 - l1) * s.sg(a2 - a1),
        "125" => -r(l0 - l1) * s.sg(a2 - a1),
        "126" => r(l0 - l1) * s.sg(a2 - a0),
        "127" => -r(l0 - l1) * s.sg(a2 - a0),
        "451" => -r(l0 - l2) * s.sg(a1 - a2),
        "452" => r(l0 - l2) * s.sg(a1 - a2),
        "456" => -r(l0 - l2) * s.sg(a1 - a0),
        "457" => r(l0 - l2) * s.sg(a1 - a0),
        "671" => r(l1 - l2) * s.sg(a0 - a2),
        "672" => -r(l1 - l2) * s.sg(a0 - a2),
        "674" => r(l1 - l2) * s.sg(a0 - a1),
        "675" => -r(l1 - l2) * s.sg(a0 - a1),
        "453" => {
            let hi = or(s.th(a0 - a2), s.th(2 * a1 - a0 - a2));
            let lo = or(s.th(a2 - a0), s.th(a0 + a2 - 2 * a1));
            r(l0 - l2) * s.sg(a0 - a1) * (hi + lo)
        }
        "673" => {
            let hi = or(s.th(2 * a0 - a1 - a2), s.th(a1 - a2));
            let lo = or(s.th(a1 + a2 - 2 * a0), s.th(a2 - a1));
            r(l2 - l1) * s.sg(a1 - a0) * (hi + lo)
        }
        "12*" => {
            let hi = or(s.th(a0 + a1 - 2 * a2), s.th(a0 - a1));
            let lo = or(s.th(a1 - a0), s.th(2 * a2 - a0 - a1));
            r(l0 - l1) * r(2) * s.sg(a0 - a2) * (hi + lo)
        }
        "128" => n128(&mut s, l),
        _ => return Err(Error::UnknownLabel(label.to_string())),
    };
    Ok(ClosedForm { value, tie: s.tie })
}

fn n128(s: &mut Steps, l: [i64; 3]) -> Rational64 {
    let [l0, l1, _] = l;
    let [a0, a1, a2] = l.map(i64::abs);
    let (big, small) = (a0.max(a1), a0.min(a1));
    if a0 == a1 {
        s.tie = true;
    }
    r(l0 - l1) * (s.sg(big - a2) - s.sg(a2 - small)) / r(2)
}

/// Closed forms consistent with the quadrature convention used here:
/// pairs sharing a root take equal values, and the two theta blocks of
/// 453/673/12* combine by logical OR instead of a sum.
pub fn wrapping_consistent_d3(label: &str, l: [i64; 3]) -> Result<ClosedForm> {
    let [l0, l1, l2] = l;
    let [a0, a1, a2] = l.map(i64::abs);
    let mut s = Steps { tie: false };
    let value = match label {
        "123" | "45*" | "67*" | "128" => return wrapping_analytic_d3(label, l),
        "124" | "125" => r(l0 - l1) * s.sg(a2 - a1),
        "126" | "127" => r(l0 - l1) * s.sg(a2 - a0),
        "451" | "452" => r(l0 - l2) * s.sg(a1 - a2),
        "456" | "457" => r(l0 - l2) * s.sg(a1 - a0),
        "671" | "672" => r(l1 - l2) * s.sg(a0 - a2),
        "674" | "675" => r(l1 - l2) * s.sg(a0 - a1),
        "453" => {
            let hi = or(s.th(a0 - a2), s.th(2 * a1 - a0 - a2));
            let lo = or(s.th(a2 - a0), s.th(a0 + a2 - 2 * a1));
            r(l0 - l2) * s.sg(a0 - a1) * or(hi, lo)
        }
        "673" => {
            let hi = or(s.th(2 * a0 - a1 - a2), s.th(a1 - a2));
            let lo = or(s.th(a1 + a2 - 2 * a0), s.th(a2 - a1));
            r(l2 - l1) * s.sg(a1 - a0) * or(hi, lo)
        }
        "12*" => {
            let hi = or(s.th(a0 + a1 - 2 * a2), s.th(a0 - a1));
            let lo = or(s.th(a1 - a0), s.th(2 * a2 - a0 - a1));
            r(l0 - l1) * s.sg(a0 - a2) * or(hi, lo)
        }
        _ => return Err(Error::UnknownLabel(label.to_string())),
    };
    Ok(ClosedForm { value, tie: s.tie })
}

/// Usual sphere invariant of a root `(i, j)`: `(l_i - l_j) sgn(|l_i| - |l_j|)`.
pub fn wrapping_analytic_usual(d: usize, root: &RootPair, l: &[i64]) -> Result<ClosedForm> {
    if l.len() != d || root.col >= d {
        return Err(Error::DimensionMismatch(format!("root ({},{}) with {} charges", root.row, root.col, l.len())));
    }
    let (li, lj) = (l[root.row], l[root.col]);
    let mut s = Steps { tie: false };
    let value = r(li - lj) * s.sg(li.abs() - lj.abs());
    Ok(ClosedForm { value, tie: s.tie })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Singularity {
    Regular,
    SingularAtOrigin,
}

/// Tabulated conditions under which the Cartesian integrand of a d=3 triple
/// diverges like `1/r` at the origin.
pub fn singularity_class(label: &str, l: [i64; 3]) -> Result<Singularity> {
    let [a0, a1, a2] = l.map(i64::abs);
    let singular = match label {
        "124" | "125" => a2 == a1 + 1,
        "126" | "127" => a2 == a0 + 1,
        "451" | "452" => a1 == a2 + 1,
        "456" | "457" => a1 == a0 + 1,
        "671" | "672" => a0 == a2 + 1,
        "674" | "675" => a0 == a1 + 1,
        "453" => (a2 < a1 && a1 < a0 && 2 * a1 == a0 + a2 + 1) || (a2 < a0 && a0 < a1 && a0 == a2 + 1),
        "673" => (a2 < a0 && a0 < a1 && 2 * a0 == a1 + a2 + 1) || (a2 < a1 && a1 < a0 && a1 == a2 + 1),
        "123" | "45*" | "67*" | "128" | "458" | "678" => false,
        _ => return Err(Error::UnknownLabel(label.to_string())),
    };
    Ok(if singular {
        Singularity::SingularAtOrigin
    } else {
        Singularity::Regular
    })
}

/// Measured small-r behaviour of the Cartesian integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginGrowth {
    /// Median over fixed azimuths of `|integrand|` at r = 1e-3.
    pub inner: f64,
    /// Same at r = 1e-2.
    pub outer: f64,
    pub ratio: f64,
    pub class: Singularity,
}

const GROWTH_PHIS: [f64; 4] = [0.3, 1.1, 2.3, 4.0];

/// Compares `|S . (dS/dr x dS/dphi)| / r` at r = 1e-3 and 1e-2. A ratio
/// above 3 means `1/r` growth; integrands below 1e-9 at both radii are
/// identically zero to working precision and count as regular.
pub fn origin_growth(field: &UnitField) -> OriginGrowth {
    let plain = field.with_fix(None);
    let measure = |r: f64| {
        let mut v: Vec<f64> = GROWTH_PHIS
            .iter()
            .map(|&phi| plain.sample(r, phi).map(|s| s.density().abs() / r).unwrap_or(0.0))
            .collect();
        v.sort_by(f64::total_cmp);
        0.5 * (v[1] + v[2])
    };
    let inner = measure(1e-3);
    let outer = measure(1e-2);
    let ratio = if outer > 0.0 { inner / outer } else if inner > 0.0 { f64::INFINITY } else { 0.0 };
    let class = if inner < 1e-9 && outer < 1e-9 {
        Singularity::Regular
    } else if ratio > 3.0 {
        Singularity::SingularAtOrigin
    } else {
        Singularity::Regular
    };
    OriginGrowth { inner, outer, ratio, class }
}

/// Azimuthal winding of a nice pair: `m_sym + i m_anti = C e^{i nu phi} r^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWinding {
    pub nu: i32,
    pub amplitude: f64,
    pub p: i32,
}

/// Requires each pair axis to be a single term with a coordinated phase.
pub fn pair_winding(sym: &CompiledAxis, anti: &CompiledAxis) -> Option<PairWinding> {
    let ([t1], [t2]) = (sym.terms.as_slice(), anti.terms.as_slice()) else {
        return None;
    };
    if t1.p != t2.p || t1.q != t2.q || t1.q == 0 {
        return None;
    }
    let scale = t1.a.abs().max(t1.b.abs()).max(t2.a.abs()).max(t2.b.abs());
    let tol = 1e-9 * scale;
    let sigma = if (t2.b - t1.a).abs() < tol && (t1.b + t2.a).abs() < tol {
        1
    } else if (t2.b + t1.a).abs() < tol && (t1.b - t2.a).abs() < tol {
        -1
    } else {
        return None;
    };
    Some(PairWinding {
        nu: sigma * t1.q,
        amplitude: t1.a.hypot(t2.a),
        p: t1.p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EndLimit {
    value: f64,
    /// Limit in {-1, 0, 1} known exactly.
    exact: Option<i64>,
    pole: bool,
}

const AVG_SAMPLES: usize = 4096;

fn phi_average(f: impl Fn(f64) -> f64) -> f64 {
    let step = std::f64::consts::TAU / AVG_SAMPLES as f64;
    (0..AVG_SAMPLES).map(|k| f((k as f64 + 0.5) * step)).sum::<f64>() / AVG_SAMPLES as f64
}

fn lead_value(lead: &[Term], phi: f64) -> f64 {
    lead.iter().map(|t| t.angular(phi)).sum()
}

/// Odd under a half-period shift, so every azimuthal average of an odd
/// function of it vanishes.
fn is_single_oscillation(lead: &[Term]) -> bool {
    lead.len() == 1 && lead[0].q != 0
}

fn end_limit(third: &CompiledAxis, pair: &PairWinding, hi: bool, fixed: bool) -> EndLimit {
    let (Some(pmax), Some(pmin)) = (third.max_p(), third.min_p()) else {
        return EndLimit { value: 0.0, exact: Some(0), pole: false };
    };
    let p3 = if hi { pmax } else { pmin };
    let dominates = if hi { p3 > pair.p } else { p3 < pair.p };
    let lead: Vec<Term> = third.at_power(p3).copied().collect();
    if dominates {
        if lead.iter().all(|t| t.q == 0) {
            let c: f64 = lead.iter().map(|t| t.a).sum();
            let v = if fixed { 1 } else { c.signum() as i64 };
            return EndLimit { value: v as f64, exact: Some(v), pole: true };
        }
        if fixed {
            return EndLimit { value: 1.0, exact: Some(1), pole: false };
        }
        if is_single_oscillation(&lead) {
            return EndLimit { value: 0.0, exact: Some(0), pole: false };
        }
        let v = phi_average(|phi| lead_value(&lead, phi).signum());
        return EndLimit { value: v, exact: None, pole: false };
    }
    if p3 == pair.p {
        if !fixed && is_single_oscillation(&lead) {
            return EndLimit { value: 0.0, exact: Some(0), pole: false };
        }
        let amp = pair.amplitude;
        let v = phi_average(|phi| {
            let t = lead_value(&lead, phi);
            let t = if fixed { t.abs() } else { t };
            t / (amp * amp + t * t).sqrt()
        });
        return EndLimit { value: v, exact: None, pole: false };
    }
    EndLimit { value: 0.0, exact: Some(0), pole: false }
}

/// Analytic value of a nice-pair triple from the limits of its third
/// component. The density of such a triple is a total radial derivative, so
/// the raw value is `orientation * (-nu/2) * (<S3>(r=inf) - <S3>(r=0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPrediction {
    pub raw: f64,
    pub glued: f64,
    /// Glued value when both limits are known exactly.
    pub exact: Option<Rational64>,
    pub disk: bool,
    pub fixed: bool,
}

pub fn predict_limits(density: &SpatialDensity, spec: &TripleSpec) -> Option<LimitPrediction> {
    let d = density.d;
    let slots = spec.nice_pair(d)?;
    let axes: Vec<CompiledAxis> = spec
        .axes
        .iter()
        .map(|a| a.matrix(d).map(|m| density.compile(&m)))
        .collect::<Result<_>>()
        .ok()?;
    predict_from_axes(&axes, spec.axes[slots.third].is_off_diagonal(d), slots)
}

fn predict_from_axes(axes: &[CompiledAxis], third_off_diagonal: bool, slots: PairSlots) -> Option<LimitPrediction> {
    let pair = pair_winding(&axes[slots.sym], &axes[slots.anti])?;
    let third = &axes[slots.third];
    let hi = end_limit(third, &pair, true, false);
    let lo = end_limit(third, &pair, false, false);
    let disk = !(hi.pole && lo.pole);
    let fixed = disk && third_off_diagonal;
    let (hi, lo) = if fixed {
        (end_limit(third, &pair, true, true), end_limit(third, &pair, false, true))
    } else {
        (hi, lo)
    };
    let factor = slots.orientation as f64 * -(pair.nu as f64) / 2.0;
    let raw = factor * (hi.value - lo.value);
    let glue = if disk { 2 } else { 1 };
    let exact = match (hi.exact, lo.exact) {
        (Some(h), Some(l)) => Some(Rational64::new(
            slots.orientation as i64 * -(pair.nu as i64) * (h - l) * glue,
            2,
        )),
        _ => None,
    };
    Some(LimitPrediction {
        raw,
        glued: raw * glue as f64,
        exact,
        disk,
        fixed,
    })
}

/// Boundary form of a nice-pair integral evaluated on the field itself:
/// `orientation * (-nu/2) * (<S3>(u_max) - <S3>(u_min))`.
pub fn total_derivative_estimate(field: &UnitField, spec: &TripleSpec, d: usize) -> Option<f64> {
    let slots = spec.nice_pair(d)?;
    let pair = pair_winding(&field.axes[slots.sym], &field.axes[slots.anti])?;
    let g = field.grid;
    let phis = g.phis();
    let avg = |u: f64| {
        phis.iter()
            .map(|&phi| field.sample_u(u, phi).map(|s| s.s[slots.third]).unwrap_or(0.0))
            .sum::<f64>()
            / phis.len() as f64
    };
    let factor = slots.orientation as f64 * -(pair.nu as f64) / 2.0;
    Some(factor * (avg(g.u_max()) - avg(g.u_min())))
}

/// Leading behaviour at one end: true when a single axis dominates with a
/// phase-free (constant) leading part.
fn end_is_pole(axes: &[CompiledAxis], hi: bool) -> bool {
    let ps: Vec<Option<i32>> = axes.iter().map(|a| if hi { a.max_p() } else { a.min_p() }).collect();
    let Some(best) = (if hi { ps.iter().flatten().max() } else { ps.iter().flatten().min() }) else {
        return false;
    };
    let leaders: Vec<usize> = (0..axes.len()).filter(|&c| ps[c] == Some(*best)).collect();
    leaders.len() == 1 && axes[leaders[0]].at_power(*best).all(|t| t.q == 0)
}

/// Wrapping predicted for a triple mixing one cos-type and one sin-type
/// axis of different roots, with a Cartan third axis. Magnitude: with
/// azimuthal frequencies `a` (cos axis) and `b` (sin axis) and `p = gcd`,
/// the value is `p` when `a/p` and `b/p` are both odd and 0 otherwise. The
/// sign is the local degree summed over the preimages of the cos-axis pole.
/// Returns `None` when the triple is not of this shape or not sphere-class.
pub fn accidental_predict(density: &SpatialDensity, spec: &TripleSpec) -> Option<i64> {
    let d = density.d;
    if spec.nice_pair(d).is_some() {
        return None;
    }
    let kinds: Vec<Option<ElementKind>> = spec.axes.iter().map(|a| a.kind(d)).collect();
    let cos_slot = (0..3).find(|&s| matches!(kinds[s], Some(ElementKind::Symmetric { .. })))?;
    let sin_slot = (0..3).find(|&s| matches!(kinds[s], Some(ElementKind::Antisymmetric { .. })))?;
    let third = 3 - cos_slot - sin_slot;
    if spec.axes[third].is_off_diagonal(d) {
        return None;
    }
    let axes: Vec<CompiledAxis> = spec
        .axes
        .iter()
        .map(|a| a.matrix(d).map(|m| density.compile(&m)))
        .collect::<Result<_>>()
        .ok()?;
    let ([tc], [ts]) = (axes[cos_slot].terms.as_slice(), axes[sin_slot].terms.as_slice()) else {
        return None;
    };
    if tc.q == 0 || ts.q == 0 || axes[third].terms.iter().any(|t| t.q != 0) || axes[third].is_zero() {
        return None;
    }
    if !(end_is_pole(&axes, true) && end_is_pole(&axes, false)) {
        return None;
    }
    let (a, b) = (tc.q.abs() as i64, ts.q.abs() as i64);
    let p = a.gcd(&b);
    let magnitude = if (a / p) % 2 == 1 && (b / p) % 2 == 1 { p } else { 0 };
    if magnitude == 0 {
        return Some(0);
    }
    let degree = preimage_degree(&axes, cos_slot, third, ts);
    Some(degree.signum() * magnitude)
}

fn preimage_degree(axes: &[CompiledAxis], cos_slot: usize, third: usize, ts: &Term) -> i64 {
    let cartan = &axes[third];
    let shift_of = |u: f64| {
        let p = if u > 0.0 { cartan.max_p() } else { cartan.min_p() };
        p.unwrap_or(0) as f64 * u
    };
    let t_at = |u: f64| cartan.eval_shifted(u, 0.0, shift_of(u))[0];
    let mut roots = Vec::new();
    let (lo, hi, n) = (-40.0, 40.0, 16000);
    let h = (hi - lo) / n as f64;
    // bracket between the last nonzero sample and the current one, so a
    // grid point landing exactly on a root is not skipped
    let (mut prev_u, mut prev) = (lo, t_at(lo));
    for k in 1..=n {
        let u = lo + h * k as f64;
        let cur = t_at(u);
        if cur == 0.0 {
            continue;
        }
        if prev != 0.0 && prev.signum() != cur.signum() {
            let (mut x0, mut x1, mut f0) = (prev_u, u, prev);
            for _ in 0..80 {
                let xm = 0.5 * (x0 + x1);
                let fm = t_at(xm);
                if fm.signum() == f0.signum() {
                    x0 = xm;
                    f0 = fm;
                } else {
                    x1 = xm;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
        (prev_u, prev) = (u, cur);
    }
    // zeros of a cos(q phi) + b sin(q phi)
    let q = ts.q as f64;
    let x0 = ts.b.atan2(ts.a);
    let phis: Vec<f64> = (0..2 * ts.q.abs())
        .map(|k| ((x0 + std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI) / q).rem_euclid(std::f64::consts::TAU))
        .collect();
    let (s1, s2) = ((cos_slot + 1) % 3, (cos_slot + 2) % 3);
    let mut degree = 0;
    for &u in &roots {
        let pmax = axes.iter().filter_map(|a| a.max_p()).max().unwrap_or(0) as f64;
        let pmin = axes.iter().filter_map(|a| a.min_p()).min().unwrap_or(0) as f64;
        let shift = if u > 0.0 { pmax * u } else { pmin * u };
        for &phi in &phis {
            let v: Vec<[f64; 3]> = axes.iter().map(|a| a.eval_shifted(u, phi, shift)).collect();
            if v[cos_slot][0] <= 0.0 {
                continue;
            }
            let j = v[s1][1] * v[s2][2] - v[s1][2] * v[s2][1];
            degree += j.signum() as i64;
        }
    }
    degree
}
