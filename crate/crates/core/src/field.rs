//! Observable fields `m_a(r, phi) = Tr(T_a R(r, phi))`, unit-vector triples
//! built from them, and map classification.
//!
//! Every field is compiled to a short list of real terms
//! `r^p (A cos(q phi) + B sin(q phi))`; the common Gaussian `exp(-2 r^2)`
//! is dropped because S only depends on the direction of `(m_a, m_b, m_c)`.
//! Evaluation in `u = ln r` divides all terms by a common `exp(s(u))` chosen
//! so that the largest term is O(1) at both ends of the radial range.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{self, CMatrix, ElementKind};
use crate::quad::{self, Grid};
use crate::state::{radial_profile, PerturbedField, QuditState};

/// Spatial structure of the reduced photon-B operator seen through photon A:
/// `R_jn(r, phi) = sum_{i,m} K[(j,n),(i,m)] psi_i(r,phi) conj(psi_m(r,phi))`
/// with `psi_i = f_i(r) e^{i l_i phi}` over the photon-A modes.
#[derive(Debug, Clone)]
pub struct SpatialDensity {
    pub d: usize,
    pub modes: Vec<i64>,
    coef: Vec<Complex64>,
}

impl SpatialDensity {
    fn idx(&self, j: usize, n: usize, i: usize, m: usize) -> usize {
        let k = self.modes.len();
        ((j * self.d + n) * k + i) * k + m
    }

    /// From level amplitudes: level `j` carries `sum_i b[j][i] psi_i`.
    pub fn from_amplitudes(modes: &[i64], b: &DMatrix<Complex64>) -> Self {
        let d = b.nrows();
        let k = modes.len();
        let mut out = SpatialDensity {
            d,
            modes: modes.to_vec(),
            coef: vec![Complex64::new(0.0, 0.0); d * d * k * k],
        };
        for j in 0..d {
            for n in 0..d {
                for i in 0..k {
                    for m in 0..k {
                        let at = out.idx(j, n, i, m);
                        out.coef[at] = b[(j, i)] * b[(n, m)].conj();
                    }
                }
            }
        }
        out
    }

    pub fn from_state(state: &QuditState) -> Self {
        let d = state.d();
        let b = DMatrix::from_fn(d, d, |j, i| if i == j { state.c[j] } else { Complex64::new(0.0, 0.0) });
        Self::from_amplitudes(&state.l, &b)
    }

    pub fn from_perturbed(field: &PerturbedField) -> Self {
        Self::from_amplitudes(&field.modes, &field.b)
    }

    /// From a biphoton density matrix indexed `(a * d + b)` with photon A
    /// first; photon A's modes carry the charges `l_a`.
    pub fn from_density(rho: &CMatrix, l_a: &[i64]) -> Result<Self> {
        let d = l_a.len();
        if rho.nrows() != d * d || rho.ncols() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "density is {}x{}, expected {}x{}",
                rho.nrows(),
                rho.ncols(),
                d * d,
                d * d
            )));
        }
        let mut out = SpatialDensity {
            d,
            modes: l_a.to_vec(),
            coef: vec![Complex64::new(0.0, 0.0); d * d * d * d],
        };
        for j in 0..d {
            for n in 0..d {
                for i in 0..d {
                    for m in 0..d {
                        let at = out.idx(j, n, i, m);
                        out.coef[at] = rho[(i * d + j, m * d + n)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// All photon-A charges negated (the photon roles exchanged).
    pub fn swapped(&self) -> Self {
        SpatialDensity {
            d: self.d,
            modes: self.modes.iter().map(|l| -l).collect(),
            coef: self.coef.clone(),
        }
    }

    /// Physical `R(r, phi)` including the Gaussian envelope.
    pub fn r_matrix(&self, r: f64, phi: f64) -> CMatrix {
        let psi: Vec<Complex64> = self
            .modes
            .iter()
            .map(|&l| radial_profile(l, r) * Complex64::from_polar(1.0, l as f64 * phi))
            .collect();
        let k = self.modes.len();
        DMatrix::from_fn(self.d, self.d, |j, n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..k {
                for m in 0..k {
                    acc += self.coef[self.idx(j, n, i, m)] * psi[i] * psi[m].conj();
                }
            }
            acc
        })
    }

    fn scale(&self) -> f64 {
        self.coef.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Compiles `Tr(M R)` for a Hermitian `M` into real terms.
    pub fn compile(&self, m: &CMatrix) -> CompiledAxis {
        let d = self.d;
        let k = self.modes.len();
        let mscale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let clean = |z: Complex64| {
            let re = if z.re.abs() <= 1e-13 * mscale { 0.0 } else { z.re };
            let im = if z.im.abs() <= 1e-13 * mscale { 0.0 } else { z.im };
            Complex64::new(re, im)
        };
        let mut acc: BTreeMap<(i32, i32), (f64, f64)> = BTreeMap::new();
        for i in 0..k {
            for mm in 0..k {
                let mut w = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    for n in 0..d {
                        let mv = clean(m[(n, j)]);
                        if mv != Complex64::new(0.0, 0.0) {
                            w += mv * self.coef[self.idx(j, n, i, mm)];
                        }
                    }
                }
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let p = (self.modes[i].abs() + self.modes[mm].abs()) as i32;
                let q = (self.modes[i] - self.modes[mm]) as i32;
                // Re(w e^{i q phi}) = Re w cos - Im w sin
                let (a, b) = if q >= 0 { (w.re, -w.im) } else { (w.re, w.im) };
                let e = acc.entry((p, q.abs())).or_insert((0.0, 0.0));
                e.0 += a;
                e.1 += if q == 0 { 0.0 } else { b };
            }
        }
        let tol = 1e-12 * self.scale() * mscale.max(1e-300);
        let terms = acc
            .into_iter()
            .filter_map(|((p, q), (a, b))| {
                let a = if a.abs() <= tol { 0.0 } else { a };
                let b = if b.abs() <= tol { 0.0 } else { b };
                (a != 0.0 || b != 0.0).then_some(Term { p, q, a, b })
            })
            .collect();
        CompiledAxis { terms }
    }
}

impl From<&QuditState> for SpatialDensity {
    fn from(s: &QuditState) -> Self {
        SpatialDensity::from_state(s)
    }
}

/// One real term `r^p (a cos(q phi) + b sin(q phi))`, `q >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub p: i32,
    pub q: i32,
    pub a: f64,
    pub b: f64,
}

impl Term {
    pub fn angular(&self, phi: f64) -> f64 {
        let x = self.q as f64 * phi;
        self.a * x.cos() + self.b * x.sin()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompiledAxis {
    pub terms: Vec<Term>,
}

impl CompiledAxis {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_p(&self) -> Option<i32> {
        self.terms.iter().map(|t| t.p).max()
    }

    pub fn min_p(&self) -> Option<i32> {
        self.terms.iter().map(|t| t.p).min()
    }

    /// `(m, dm/du, dm/dphi)` with every term scaled by `exp(p u - shift)`.
    pub fn eval_shifted(&self, u: f64, phi: f64, shift: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for t in &self.terms {
            let f = (t.p as f64 * u - shift).exp();
            let x = t.q as f64 * phi;
            let (sn, cs) = x.sin_cos();
            let g = t.a * cs + t.b * sn;
            out[0] += f * g;
            out[1] += f * t.p as f64 * g;
            out[2] += f * t.q as f64 * (t.b * cs - t.a * sn);
        }
        out
    }

    /// Terms at exponent `p`.
    pub fn at_power(&self, p: i32) -> impl Iterator<Item = &Term> {
        self.terms.iter().filter(move |t| t.p == p)
    }
}

/// Physical observable `m_a(r, phi)` with its analytic partials.
#[derive(Debug, Clone)]
pub struct ComponentField {
    pub axis: CompiledAxis,
}

impl ComponentField {
    pub fn value(&self, r: f64, phi: f64) -> f64 {
        let g = (-2.0 * r * r).exp();
        self.axis
            .terms
            .iter()
            .map(|t| g * r.powi(t.p) * t.angular(phi))
            .sum()
    }

    /// `(dm/dr, dm/dphi)`.
    pub fn partials(&self, r: f64, phi: f64) -> (f64, f64) {
        let g = (-2.0 * r * r).exp();
        let mut dr = 0.0;
        let mut dp = 0.0;
        for t in &self.axis.terms {
            let ang = t.angular(phi);
            let x = t.q as f64 * phi;
            let dang = t.q as f64 * (t.b * x.cos() - t.a * x.sin());
            let rp = r.powi(t.p);
            let drp = if t.p == 0 { 0.0 } else { t.p as f64 * r.powi(t.p - 1) };
            dr += g * (drp - 4.0 * r * rp) * ang;
            dp += g * rp * dang;
        }
        (dr, dp)
    }
}

/// Closed-form evaluator of `<psi|T_a|psi>` for one axis.
pub fn component_field(density: &SpatialDensity, axis: &Axis) -> Result<ComponentField> {
    let m = axis.matrix(density.d)?;
    Ok(ComponentField {
        axis: density.compile(&m),
    })
}

/// One axis of a triple: a basis element or a real combination of Cartan
/// (diagonal) elements.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Index(usize),
    Combo(Vec<(usize, f64)>),
}

impl Axis {
    /// `(m_3 + sqrt(3) m_8)/2`, the Cartan image of the (0,2) root for d=3.
    pub fn star_plus() -> Axis {
        Axis::Combo(vec![(3, 0.5), (8, 3f64.sqrt() / 2.0)])
    }

    /// `(sqrt(3) m_8 - m_3)/2`, the Cartan image of the (1,2) root for d=3.
    pub fn star_minus() -> Axis {
        Axis::Combo(vec![(3, -0.5), (8, 3f64.sqrt() / 2.0)])
    }

    pub fn matrix(&self, d: usize) -> Result<CMatrix> {
        let mut out = CMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for (a, w) in self.weights() {
            let kind = lie::kind_of(d, a)?;
            if matches!(self, Axis::Combo(_)) && !kind.is_diagonal() {
                return Err(Error::InvalidAxis(format!("combination uses off-diagonal element {a}")));
            }
            add_element(&mut out, kind, w);
        }
        Ok(out)
    }

    pub fn weights(&self) -> Vec<(usize, f64)> {
        match self {
            Axis::Index(a) => vec![(*a, 1.0)],
            Axis::Combo(v) => v.clone(),
        }
    }

    /// True for a single symmetric or antisymmetric element.
    pub fn is_off_diagonal(&self, d: usize) -> bool {
        match self {
            Axis::Index(a) => lie::kind_of(d, *a).map(|k| !k.is_diagonal()).unwrap_or(false),
            Axis::Combo(_) => false,
        }
    }

    pub fn kind(&self, d: usize) -> Option<ElementKind> {
        match self {
            Axis::Index(a) => lie::kind_of(d, *a).ok(),
            Axis::Combo(_) => None,
        }
    }
}

fn add_element(out: &mut CMatrix, kind: ElementKind, w: f64) {
    let d = out.nrows();
    match kind {
        ElementKind::Symmetric { i, j } => {
            out[(i, j)] += w;
            out[(j, i)] += w;
        }
        ElementKind::Antisymmetric { i, j } => {
            out[(i, j)] += Complex64::new(0.0, -w);
            out[(j, i)] += Complex64::new(0.0, w);
        }
        ElementKind::Diagonal { level } => {
            let norm = (2.0 / (level * (level + 1)) as f64).sqrt();
            for k in 0..level.min(d) {
                out[(k, k)] += w * norm;
            }
            out[(level, level)] -= w * norm * level as f64;
        }
    }
}

/// Slots of a nice pair inside a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSlots {
    pub sym: usize,
    pub anti: usize,
    pub third: usize,
    /// +1 when `(sym, anti, third)` is a cyclic order of `(0, 1, 2)`.
    pub orientation: i32,
}

/// Three axes defining one candidate map, with its display label.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleSpec {
    pub axes: [Axis; 3],
    pub label: String,
}

/// Fixed ordering of the reduced 18-entry d=3 spectrum.
pub const CANONICAL_LABELS: [&str; 18] = [
    "123", "45*", "67*", "124", "125", "126", "127", "128", "451", "452", "453", "456", "457",
    "671", "672", "673", "674", "675",
];

impl TripleSpec {
    pub fn from_indices(d: usize, idx: [usize; 3]) -> Result<TripleSpec> {
        let label = if d <= 3 {
            idx.iter().map(|a| a.to_string()).collect::<String>()
        } else {
            idx.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("-")
        };
        let spec = TripleSpec {
            axes: idx.map(Axis::Index),
            label,
        };
        spec.validate(d)?;
        Ok(spec)
    }

    /// Parses undashed labels ("123", and "45*", "67*", "12*" for d=3) or
    /// dash-separated indices.
    pub fn parse(label: &str, d: usize) -> Result<TripleSpec> {
        let unknown = || Error::UnknownLabel(label.to_string());
        let spec = if label.contains('-') {
            let parts: Vec<usize> = label
                .split('-')
                .map(|s| s.trim().parse::<usize>().map_err(|_| unknown()))
                .collect::<Result<_>>()?;
            if parts.len() != 3 {
                return Err(unknown());
            }
            TripleSpec {
                axes: [Axis::Index(parts[0]), Axis::Index(parts[1]), Axis::Index(parts[2])],
                label: label.to_string(),
            }
        } else {
            let chars: Vec<char> = label.chars().collect();
            if chars.len() != 3 || !(2..=3).contains(&d) {
                return Err(unknown());
            }
            let mut axes = Vec::with_capacity(3);
            for (slot, ch) in chars.iter().enumerate() {
                let axis = match ch {
                    '1'..='8' => Axis::Index(ch.to_digit(10).unwrap() as usize),
                    '*' if slot == 2 => match &label[..2] {
                        "67" => Axis::star_minus(),
                        "12" | "45" => Axis::star_plus(),
                        _ => return Err(unknown()),
                    },
                    _ => return Err(unknown()),
                };
                axes.push(axis);
            }
            TripleSpec {
                axes: [axes[0].clone(), axes[1].clone(), axes[2].clone()],
                label: label.to_string(),
            }
        };
        spec.validate(d)?;
        Ok(spec)
    }

    /// The 18 reduced d=3 triples in table order.
    pub fn canonical18() -> Vec<TripleSpec> {
        CANONICAL_LABELS
            .iter()
            .map(|l| TripleSpec::parse(l, 3).expect("canonical label"))
            .collect()
    }

    /// Checks ranges and linear independence of the three axes.
    pub fn validate(&self, d: usize) -> Result<()> {
        let n = d * d - 1;
        let mut vecs = vec![vec![0.0; n]; 3];
        for (slot, axis) in self.axes.iter().enumerate() {
            axis.matrix(d)?;
            for (a, w) in axis.weights() {
                if a == 0 || a > n {
                    return Err(Error::AxisOutOfRange { axis: a, d });
                }
                vecs[slot][a - 1] += w;
            }
        }
        if rank(&vecs) < 3 {
            return Err(Error::InvalidAxis(format!("axes of {:?} are linearly dependent", self.label)));
        }
        Ok(())
    }

    /// Locates a nice pair (symmetric and antisymmetric element of one root).
    pub fn nice_pair(&self, d: usize) -> Option<PairSlots> {
        for s in 0..3 {
            for t in 0..3 {
                if s == t {
                    continue;
                }
                if let (Some(ElementKind::Symmetric { i, j }), Some(ElementKind::Antisymmetric { i: i2, j: j2 })) =
                    (self.axes[s].kind(d), self.axes[t].kind(d))
                {
                    if i == i2 && j == j2 {
                        let third = 3 - s - t;
                        let orientation = if (s + 1) % 3 == t { 1 } else { -1 };
                        return Some(PairSlots {
                            sym: s,
                            anti: t,
                            third,
                            orientation,
                        });
                    }
                }
            }
        }
        None
    }

    /// Slot that the origin fix acts on: the non-pair slot, else the last.
    pub fn fix_slot(&self, d: usize) -> usize {
        self.nice_pair(d).map(|p| p.third).unwrap_or(2)
    }

    /// Whether the origin fix is eligible for this triple: a nice pair whose
    /// third axis is off-diagonal.
    pub fn fix_eligible(&self, d: usize) -> bool {
        self.nice_pair(d)
            .map(|p| self.axes[p.third].is_off_diagonal(d))
            .unwrap_or(false)
    }
}

impl fmt::Display for TripleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

fn rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let ncols = m.first().map(|r| r.len()).unwrap_or(0);
    let mut r = 0;
    for c in 0..ncols {
        let Some(piv) = (r..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else {
            break;
        };
        if m[piv][c].abs() < 1e-12 {
            continue;
        }
        m.swap(r, piv);
        for k in 0..m.len() {
            if k != r {
                let f = m[k][c] / m[r][c];
                for cc in 0..ncols {
                    m[k][cc] -= f * m[r][cc];
                }
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Value and derivatives of S at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub s: [f64; 3],
    /// Derivative along the radial coordinate requested (`u` or `r`).
    pub ds_dx: [f64; 3],
    pub ds_dphi: [f64; 3],
}

impl FieldSample {
    /// `S . (dS/dx x dS/dphi)`.
    pub fn density(&self) -> f64 {
        dot(&self.s, &cross(&self.ds_dx, &self.ds_dphi))
    }
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, Copy)]
struct PTerm {
    qi: usize,
    p: f64,
    q: f64,
    a: f64,
    b: f64,
}

pub(crate) struct TrigTables {
    n_phi: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

pub(crate) struct PreparedRow {
    f: [Vec<f64>; 3],
}

/// Normalized triple `S = m / |m|` with analytic partials.
#[derive(Debug, Clone)]
pub struct UnitField {
    pub axes: [CompiledAxis; 3],
    /// Slot replaced by its absolute value (origin fix), if any.
    pub fix_slot: Option<usize>,
    pub grid: Grid,
    qs: Vec<i32>,
    pterms: [Vec<PTerm>; 3],
    pmax: f64,
    pmin: f64,
}

impl UnitField {
    pub fn new(axes: [CompiledAxis; 3], fix_slot: Option<usize>, grid: Grid) -> UnitField {
        let mut qs: Vec<i32> = axes.iter().flat_map(|a| a.terms.iter().map(|t| t.q)).collect();
        qs.sort_unstable();
        qs.dedup();
        let pterms = [0, 1, 2].map(|c| {
            axes[c]
                .terms
                .iter()
                .map(|t| PTerm {
                    qi: qs.binary_search(&t.q).unwrap(),
                    p: t.p as f64,
                    q: t.q as f64,
                    a: t.a,
                    b: t.b,
                })
                .collect()
        });
        let pmax = axes.iter().filter_map(|a| a.max_p()).max().unwrap_or(0) as f64;
        let pmin = axes.iter().filter_map(|a| a.min_p()).min().unwrap_or(0) as f64;
        UnitField {
            axes,
            fix_slot,
            grid,
            qs,
            pterms,
            pmax,
            pmin,
        }
    }

    pub fn origin_fixed(&self) -> bool {
        self.fix_slot.is_some()
    }

    pub fn with_fix(&self, fix_slot: Option<usize>) -> UnitField {
        let mut f = self.clone();
        f.fix_slot = fix_slot;
        f
    }

    pub fn with_grid(&self, grid: Grid) -> UnitField {
        let mut f = self.clone();
        f.grid = grid;
        f
    }

    fn shift(&self, u: f64) -> f64 {
        if u > 0.0 {
            self.pmax * u
        } else {
            self.pmin * u
        }
    }

    pub(crate) fn tables(&self, phis: &[f64]) -> TrigTables {
        let n = phis.len();
        let mut cos = Vec::with_capacity(self.qs.len() * n);
        let mut sin = Vec::with_capacity(self.qs.len() * n);
        for &q in &self.qs {
            for &phi in phis {
                let (s, c) = (q as f64 * phi).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        TrigTables { n_phi: n, cos, sin }
    }

    pub(crate) fn prepare_row(&self, u: f64) -> PreparedRow {
        let sh = self.shift(u);
        PreparedRow {
            f: [0, 1, 2].map(|c| self.pterms[c].iter().map(|t| (t.p * u - sh).exp()).collect()),
        }
    }

    /// S and the `u`-density at grid column `k`; `None` where `|m| = 0`.
    pub(crate) fn point(&self, row: &PreparedRow, tab: &TrigTables, k: usize) -> Option<([f64; 3], f64)> {
        let mut m = [0.0; 3];
        let mut mu = [0.0; 3];
        let mut mp = [0.0; 3];
        for c in 0..3 {
            for (t, &f) in self.pterms[c].iter().zip(&row.f[c]) {
                let at = t.qi * tab.n_phi + k;
                let (cs, sn) = (tab.cos[at], tab.sin[at]);
                let g = t.a * cs + t.b * sn;
                m[c] += f * g;
                mu[c] += f * t.p * g;
                mp[c] += f * t.q * (t.b * cs - t.a * sn);
            }
        }
        let (s, su, sp) = self.normalize(m, mu, mp)?;
        Some((s, dot(&s, &cross(&su, &sp))))
    }

    /// Returns `(S, (dm/du)/|m|, (dm/dphi)/|m|)`; the density is
    /// `S . (a x b)` for the last two.
    fn normalize(&self, mut m: [f64; 3], mut mu: [f64; 3], mut mp: [f64; 3]) -> Option<([f64; 3], [f64; 3], [f64; 3])> {
        if let Some(slot) = self.fix_slot {
            if m[slot] < 0.0 {
                m[slot] = -m[slot];
                mu[slot] = -mu[slot];
                mp[slot] = -mp[slot];
            }
        }
        let mx = m[0].abs().max(m[1].abs()).max(m[2].abs());
        if !(mx > 0.0) || !mx.is_finite() {
            return None;
        }
        let mm = [m[0] / mx, m[1] / mx, m[2] / mx];
        let nn = dot(&mm, &mm).sqrt();
        let n = mx * nn;
        let s = [mm[0] / nn, mm[1] / nn, mm[2] / nn];
        Some((s, mu.map(|x| x / n), mp.map(|x| x / n)))
    }

    /// Sample at `(u = ln r, phi)` with derivatives along `u`.
    pub fn sample_u(&self, u: f64, phi: f64) -> Option<FieldSample> {
        let sh = self.shift(u);
        let mut m = [0.0; 3];
        let mut mu = [0.0; 3];
        let mut mp = [0.0; 3];
        for c in 0..3 {
            let v = self.axes[c].eval_shifted(u, phi, sh);
            m[c] = v[0];
            mu[c] = v[1];
            mp[c] = v[2];
        }
        let (s, a, b) = self.normalize(m, mu, mp)?;
        let proj = |x: [f64; 3]| {
            let sx = dot(&s, &x);
            [x[0] - s[0] * sx, x[1] - s[1] * sx, x[2] - s[2] * sx]
        };
        Some(FieldSample {
            s,
            ds_dx: proj(a),
            ds_dphi: proj(b),
        })
    }

    /// Sample at `(r, phi)` with derivatives along `r`.
    pub fn sample(&self, r: f64, phi: f64) -> Option<FieldSample> {
        let mut out = self.sample_u(r.ln(), phi)?;
        out.ds_dx = out.ds_dx.map(|x| x / r);
        Some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    SphereToSphere,
    DiskToDisk,
    Degenerate,
}

impl MapKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapKind::SphereToSphere => "sphere",
            MapKind::DiskToDisk => "disk",
            MapKind::Degenerate => "degenerate",
        }
    }

    pub fn parse(s: &str) -> Option<MapKind> {
        match s {
            "sphere" => Some(MapKind::SphereToSphere),
            "disk" => Some(MapKind::DiskToDisk),
            "degenerate" => Some(MapKind::Degenerate),
            _ => None,
        }
    }
}

/// Map class plus the boundary diagnostics it was decided from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapClass {
    pub kind: MapKind,
    /// Azimuthal variance of S at the inner radius.
    pub var_lo: f64,
    /// Azimuthal variance of S at the outer radius.
    pub var_hi: f64,
}

/// Point-image threshold on the azimuthal variance at a boundary.
pub const SPHERE_THRESHOLD: f64 = 1e-6;
/// Below this the image is treated as a single point everywhere.
const CONSTANT_THRESHOLD: f64 = 1e-12;
/// Allowed fraction of grid points with `|m| = 0`.
pub const ZERO_FRACTION_LIMIT: f64 = 0.01;

const PROBE_ROWS: usize = 65;

/// Builds `S` for a triple; `fix_origin` replaces the fix slot by its
/// absolute value.
pub fn triple_field(
    density: &SpatialDensity,
    spec: &TripleSpec,
    fix_origin: bool,
    grid: Option<Grid>,
) -> Result<UnitField> {
    let d = density.d;
    spec.validate(d)?;
    let axes = [0, 1, 2].map(|s| {
        spec.axes[s]
            .matrix(d)
            .map(|m| density.compile(&m))
    });
    let [a0, a1, a2] = axes;
    let axes = [a0?, a1?, a2?];
    let grid = grid.unwrap_or_else(|| Grid::for_modes(&density.modes));
    if axes.iter().all(|a| a.is_zero()) {
        return Err(Error::DegenerateField { fraction: 1.0 });
    }
    let fix = fix_origin.then(|| spec.fix_slot(d));
    let field = UnitField::new(axes, fix, grid);
    let rows = quad::sample_rows(&field, &quad::probe_rows(&grid, PROBE_ROWS), grid.n_phi.min(512));
    let zeros: usize = rows.iter().map(|r| r.zeros).sum();
    let fraction = zeros as f64 / (rows.len() * grid.n_phi.min(512)) as f64;
    if fraction > ZERO_FRACTION_LIMIT {
        return Err(Error::DegenerateField { fraction });
    }
    Ok(field)
}

/// Sphere/disk/degenerate decision from the unfixed field's boundary rows.
pub fn classify_map(field: &UnitField) -> MapClass {
    let plain = field.with_fix(None);
    let grid = field.grid;
    let n_phi = grid.n_phi.min(512);
    let rows = quad::sample_rows(&plain, &quad::probe_rows(&grid, PROBE_ROWS), n_phi);
    let var_lo = rows[0].variance;
    let var_hi = rows[rows.len() - 1].variance;
    let max_var = rows.iter().map(|r| r.variance).fold(0.0, f64::max);
    let spread = rows
        .iter()
        .map(|r| (0..3).map(|c| (r.mean[c] - rows[0].mean[c]).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let kind = if max_var < CONSTANT_THRESHOLD && spread < CONSTANT_THRESHOLD.sqrt() {
        MapKind::Degenerate
    } else if var_lo < SPHERE_THRESHOLD && var_hi < SPHERE_THRESHOLD {
        MapKind::SphereToSphere
    } else {
        MapKind::DiskToDisk
    };
    MapClass { kind, var_lo, var_hi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_state;

    fn st(l: &[i64]) -> QuditState {
        make_state(l, vec![Complex64::new(1.0, 0.0); l.len()]).unwrap()
    }

    #[test]
    fn printed_component_forms() {
        let s = make_state(
            &[-2, 1, 3],
            vec![Complex64::new(0.7, 0.2), Complex64::new(0.4, -0.3), Complex64::new(0.5, 0.1)],
        )
        .unwrap();
        let den = SpatialDensity::from_state(&s);
        for (r, phi) in [(0.4, 0.3), (1.1, 2.0), (1.9, 4.4)] {
            let psi = s.psi(r, phi);
            let rho = DMatrix::from_fn(3, 3, |i, j| psi[i] * psi[j].conj());
            for a in 1..=8 {
                let m = Axis::Index(a).matrix(3).unwrap();
                let want = (m * &rho).trace().re;
                let got = component_field(&den, &Axis::Index(a)).unwrap().value(r, phi);
                assert!((want - got).abs() < 1e-13, "a={a} want {want} got {got}");
            }
        }
    }

    #[test]
    fn unit_c_components() {
        let s = st(&[-1, 0, 2]);
        let den = SpatialDensity::from_state(&s);
        let (r, phi) = (0.8, 1.3);
        let f = |l: i64| radial_profile(l, r);
        let m1 = component_field(&den, &Axis::Index(1)).unwrap().value(r, phi);
        assert!((m1 - 2.0 * f(-1) * f(0) * (phi * -1.0).cos()).abs() < 1e-14);
        let m3 = component_field(&den, &Axis::Index(3)).unwrap().value(r, phi);
        assert!((m3 - (f(-1).powi(2) - f(0).powi(2))).abs() < 1e-14);
        let m8 = component_field(&den, &Axis::Index(8)).unwrap().value(r, phi);
        let want = (f(-1).powi(2) + f(0).powi(2) - 2.0 * f(2).powi(2)) / 3f64.sqrt();
        assert!((m8 - want).abs() < 1e-14);
    }

    #[test]
    fn label_parsing() {
        assert_eq!(TripleSpec::canonical18().len(), 18);
        assert_eq!(TripleSpec::parse("45*", 3).unwrap().axes[2], Axis::star_plus());
        assert_eq!(TripleSpec::parse("67*", 3).unwrap().axes[2], Axis::star_minus());
        assert!(TripleSpec::parse("129", 3).is_err());
        assert!(TripleSpec::parse("112", 3).is_err());
        assert!(TripleSpec::parse("1-2-14", 4).is_ok());
        assert!(TripleSpec::parse("1-2-16", 4).is_err());
        let p = TripleSpec::parse("451", 3).unwrap().nice_pair(3).unwrap();
        assert_eq!((p.sym, p.anti, p.third, p.orientation), (0, 1, 2, 1));
        let p = TripleSpec::from_indices(3, [1, 4, 5]).unwrap().nice_pair(3).unwrap();
        assert_eq!((p.sym, p.anti, p.third, p.orientation), (1, 2, 0, 1));
    }

    #[test]
    fn classification_examples() {
        let den = SpatialDensity::from_state(&st(&[-1, 0, 1]));
        let cls = |l: &str| {
            let spec = TripleSpec::parse(l, 3).unwrap();
            classify_map(&triple_field(&den, &spec, false, None).unwrap()).kind
        };
        assert_eq!(cls("123"), MapKind::SphereToSphere);
        assert_eq!(cls("124"), MapKind::DiskToDisk);
        assert_eq!(cls("453"), MapKind::DiskToDisk);
    }

    #[test]
    fn separable_state_is_degenerate() {
        let s = make_state(&[-1, 0, 1], vec![Complex64::new(1.0, 0.0), 0.0.into(), 0.0.into()]).unwrap();
        let den = SpatialDensity::from_state(&s);
        let spec = TripleSpec::parse("123", 3).unwrap();
        let f = triple_field(&den, &spec, false, None).unwrap();
        assert_eq!(classify_map(&f).kind, MapKind::Degenerate);
        let spec = TripleSpec::parse("124", 3).unwrap();
        assert!(matches!(
            triple_field(&den, &spec, false, None),
            Err(Error::DegenerateField { .. })
        ));
    }
}
