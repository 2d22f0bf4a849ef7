//! Triple enumeration, full spectra, counting, dependency analysis,
//! similarity scores and spectrum file formats.

use std::fmt::Write as _;
use std::io::{Read, Write};

use num_rational::{Ratio, Rational64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{classify_map, triple_field, MapKind, SpatialDensity, TripleSpec};
use crate::invariants::{self, origin_growth, predict_limits, wrapping_numeric, Singularity};
use crate::quad::Grid;
use crate::state::QuditState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Every pure-index triple `a < b < c`.
    Full,
    /// The 18 d=3 table triples, including the two Cartan combinations.
    Canonical18,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Canonical18 => "canonical18",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Some(Mode::Full),
            "canonical18" | "canonical" | "reduced" => Some(Mode::Canonical18),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SpectrumOptions {
    /// Replaces the default grid derived from the OAM charges.
    pub grid: Option<Grid>,
    /// Evaluate from the other photon's side, which flips every sign.
    pub swap_photons: bool,
}

/// Threshold on `|glued|` below which an entry is displayed as trivial.
pub const TRIVIAL_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry {
    pub label: String,
    pub map_class: MapKind,
    pub raw: f64,
    pub glued: f64,
    /// Exact value from the boundary-limit analysis of nice-pair triples.
    pub analytic: Option<Rational64>,
    pub singular: bool,
    pub trivial: bool,
    pub quadrature_error: f64,
    pub converged: bool,
    pub origin_fixed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologicalSpectrum {
    pub d: usize,
    pub mode: Mode,
    pub entries: Vec<SpectrumEntry>,
}

impl TopologicalSpectrum {
    pub fn glued(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.glued).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn get(&self, label: &str) -> Option<&SpectrumEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn rows(&self) -> Vec<SpectrumRow> {
        self.entries.iter().map(SpectrumRow::from).collect()
    }
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

pub fn enumerate_triples(d: usize, mode: Mode) -> Result<Vec<TripleSpec>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    match mode {
        Mode::Canonical18 if d != 3 => Err(Error::ModeMismatch(format!(
            "canonical18 requires d=3, got d={d}"
        ))),
        Mode::Canonical18 => Ok(TripleSpec::canonical18()),
        Mode::Full => {
            let n = d * d - 1;
            let mut out = Vec::with_capacity(binomial(n as u64, 3) as usize);
            for a in 1..=n {
                for b in a + 1..=n {
                    for c in b + 1..=n {
                        out.push(TripleSpec::from_indices(d, [a, b, c])?);
                    }
                }
            }
            Ok(out)
        }
    }
}

pub fn compute_spectrum(state: &QuditState, mode: Mode, options: &SpectrumOptions) -> Result<TopologicalSpectrum> {
    compute_spectrum_density(&SpatialDensity::from_state(state), mode, options)
}

/// Spectrum of an arbitrary spatial density (pure, perturbed or mixed).
pub fn compute_spectrum_density(
    density: &SpatialDensity,
    mode: Mode,
    options: &SpectrumOptions,
) -> Result<TopologicalSpectrum> {
    let d = density.d;
    let triples = enumerate_triples(d, mode)?;
    let swapped;
    let density = if options.swap_photons {
        swapped = density.swapped();
        &swapped
    } else {
        density
    };
    let entries = crate::pool::install(|| {
        triples
            .par_iter()
            .map(|spec| evaluate_triple(density, spec, options.grid))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(TopologicalSpectrum { d, mode, entries })
}

fn degenerate_entry(label: &str) -> SpectrumEntry {
    SpectrumEntry {
        label: label.to_string(),
        map_class: MapKind::Degenerate,
        raw: 0.0,
        glued: 0.0,
        analytic: None,
        singular: false,
        trivial: true,
        quadrature_error: 0.0,
        converged: true,
        origin_fixed: false,
    }
}

/// Full per-triple pipeline: build, classify, optionally fix the origin,
/// integrate with refinement, glue, and attach the limit prediction.
pub fn evaluate_triple(density: &SpatialDensity, spec: &TripleSpec, grid: Option<Grid>) -> Result<SpectrumEntry> {
    let d = density.d;
    let field = match triple_field(density, spec, false, grid) {
        Ok(f) => f,
        Err(Error::DegenerateField { .. }) => return Ok(degenerate_entry(&spec.label)),
        Err(e) => return Err(e),
    };
    let class = classify_map(&field);
    if class.kind == MapKind::Degenerate {
        return Ok(degenerate_entry(&spec.label));
    }
    let fix = class.kind == MapKind::DiskToDisk && spec.fix_eligible(d);
    let field = if fix { field.with_fix(Some(spec.fix_slot(d))) } else { field };
    let singular = origin_growth(&field).class == Singularity::SingularAtOrigin;
    let (result, converged) = match wrapping_numeric(&field, singular) {
        Ok(r) => (invariants::glue(r, &class), true),
        Err(Error::NonConvergent { raw, error }) => {
            let r = invariants::WrappingResult {
                raw,
                glued: raw,
                analytic: None,
                quadrature_error: error,
                singular,
                grid: field.grid,
            };
            (invariants::glue(r, &class), false)
        }
        Err(e) => return Err(e),
    };
    let analytic = predict_limits(density, spec).and_then(|p| p.exact);
    Ok(SpectrumEntry {
        label: spec.label.clone(),
        map_class: class.kind,
        raw: result.raw,
        glued: result.glued,
        analytic,
        singular,
        trivial: result.glued.abs() < TRIVIAL_THRESHOLD,
        quadrature_error: result.quadrature_error,
        converged,
        origin_fixed: fix,
    })
}

/// Number of independent invariants: `d(d-1)(d-2)(d+3)/4`, and 1 for d=2.
pub fn independent_count(d: usize) -> u64 {
    if d == 2 {
        return 1;
    }
    let d = d as u64;
    d * (d - 1) * (d - 2) * (d + 3) / 4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub topo_levels: u64,
    pub oam_levels: u64,
    pub topo_bits: f64,
    pub oam_bits: f64,
}

/// One binary signal per candidate triple versus one level per OAM state.
pub fn capacity(d: usize) -> Capacity {
    let n = (d * d - 1) as u64;
    make_capacity(binomial(n, 3), d as u64)
}

/// Same, counting only independent invariants as topological levels.
pub fn capacity_independent(d: usize) -> Capacity {
    make_capacity(independent_count(d), d as u64)
}

fn make_capacity(topo: u64, oam: u64) -> Capacity {
    Capacity {
        topo_levels: topo,
        oam_levels: oam,
        topo_bits: (topo as f64).log2(),
        oam_bits: (oam as f64).log2(),
    }
}

/// Which closed-form set the dependency scan evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormSet {
    /// Printed forms, with 12* in the eighth slot.
    Printed,
    /// Quadrature-consistent forms, with 12* in the eighth slot.
    Consistent,
    /// Printed forms with the table's 128 in the eighth slot.
    Table,
}

/// Slot order of the scanned 18-vector.
pub const SCAN_LABELS: [&str; 18] = [
    "123", "45*", "67*", "124", "125", "126", "127", "12*", "451", "452", "453", "456", "457",
    "671", "672", "673", "674", "675",
];

fn scan_labels(set: FormSet) -> [&'static str; 18] {
    let mut labels = SCAN_LABELS;
    if set == FormSet::Table {
        labels[7] = "128";
    }
    labels
}

fn form(set: FormSet, label: &str, l: [i64; 3]) -> Result<Rational64> {
    let cf = match set {
        FormSet::Printed | FormSet::Table => invariants::wrapping_analytic_d3(label, l)?,
        FormSet::Consistent => invariants::wrapping_consistent_d3(label, l)?,
    };
    Ok(cf.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationCheck {
    pub name: String,
    /// Samples on which the relation evaluated to exactly zero.
    pub holds: usize,
    pub samples: usize,
    /// First sample where it failed, if any.
    pub counterexample: Option<[i64; 3]>,
}

impl RelationCheck {
    pub fn all_hold(&self) -> bool {
        self.holds == self.samples
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyReport {
    pub l_range: i64,
    pub forms: FormSet,
    pub samples: usize,
    pub rank: usize,
    pub relations: Vec<RelationCheck>,
    pub pairwise: Vec<RelationCheck>,
}

type Q = Ratio<i128>;

/// Row-echelon accumulator over exact rationals.
struct Echelon {
    rows: Vec<(usize, Vec<Q>)>,
}

impl Echelon {
    fn insert(&mut self, mut v: Vec<Q>) {
        for (pivot, row) in &self.rows {
            let f = v[*pivot];
            if f != Q::from_integer(0) {
                for (x, y) in v.iter_mut().zip(row) {
                    *x -= f * y;
                }
            }
        }
        if let Some(p) = v.iter().position(|x| *x != Q::from_integer(0)) {
            let inv = Q::from_integer(1) / v[p];
            for x in v.iter_mut() {
                *x *= inv;
            }
            for (_, row) in self.rows.iter_mut() {
                let f = row[p];
                if f != Q::from_integer(0) {
                    for (x, y) in row.iter_mut().zip(&v) {
                        *x -= f * y;
                    }
                }
            }
            self.rows.push((p, v));
        }
    }
}

/// Exact rank of the 18-vectors of closed-form invariants over all distinct
/// charge triples in `[-l_range, l_range]^3`, plus checks of the three
/// linear relations and six pairwise identities on every sample.
pub fn dependency_scan(l_range: i64, forms: FormSet) -> Result<DependencyReport> {
    if l_range < 1 {
        return Err(Error::InvalidInput(format!("l_range must be positive, got {l_range}")));
    }
    let labels = scan_labels(forms);
    let slot = |name: &str| labels.iter().position(|l| *l == name).expect("scan label");
    let rel_defs: [(&str, [(&str, i64); 3]); 3] = [
        ("N123 - N456 + N674", [("123", 1), ("456", -1), ("674", 1)]),
        ("N671 - N45* - N126", [("671", 1), ("45*", -1), ("126", -1)]),
        ("N67* + N451 - N124", [("67*", 1), ("451", 1), ("124", -1)]),
    ];
    let pair_defs = [
        ("124", "125"),
        ("126", "127"),
        ("451", "452"),
        ("456", "457"),
        ("671", "672"),
        ("674", "675"),
    ];
    let mut relations: Vec<RelationCheck> = rel_defs
        .iter()
        .map(|(n, _)| RelationCheck { name: n.to_string(), holds: 0, samples: 0, counterexample: None })
        .collect();
    let mut pairwise: Vec<RelationCheck> = pair_defs
        .iter()
        .map(|(a, b)| RelationCheck { name: format!("N{a} = N{b}"), holds: 0, samples: 0, counterexample: None })
        .collect();
    let mut ech = Echelon { rows: Vec::new() };
    let mut samples = 0;
    for l0 in -l_range..=l_range {
        for l1 in -l_range..=l_range {
            for l2 in -l_range..=l_range {
                if l0 == l1 || l1 == l2 || l0 == l2 {
                    continue;
                }
                let l = [l0, l1, l2];
                let v: Vec<Rational64> = labels.iter().map(|lab| form(forms, lab, l)).collect::<Result<_>>()?;
                samples += 1;
                for (check, (_, terms)) in relations.iter_mut().zip(&rel_defs) {
                    let s: Rational64 = terms.iter().map(|(n, c)| v[slot(n)] * *c).sum();
                    record(check, s == Rational64::from_integer(0), l);
                }
                for (check, (a, b)) in pairwise.iter_mut().zip(&pair_defs) {
                    record(check, v[slot(a)] == v[slot(b)], l);
                }
                if ech.rows.len() < labels.len() {
                    ech.insert(v.iter().map(|x| Q::new(*x.numer() as i128, *x.denom() as i128)).collect());
                }
            }
        }
    }
    Ok(DependencyReport {
        l_range,
        forms,
        samples,
        rank: ech.rows.len(),
        relations,
        pairwise,
    })
}

fn record(check: &mut RelationCheck, ok: bool, l: [i64; 3]) {
    check.samples += 1;
    if ok {
        check.holds += 1;
    } else if check.counterexample.is_none() {
        check.counterexample = Some(l);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScores {
    pub residual: f64,
    pub cosine: f64,
}

/// `residual = 1 - sum (|A_i| - |E_i|)^2 / sum |A_i|` and the cosine of the
/// L1-normalized vectors.
pub fn similarity(a: &[f64], e: &[f64]) -> Result<SimilarityScores> {
    if a.len() != e.len() {
        return Err(Error::LengthMismatch(a.len(), e.len()));
    }
    let l1a: f64 = a.iter().map(|x| x.abs()).sum();
    let l1e: f64 = e.iter().map(|x| x.abs()).sum();
    if l1a == 0.0 || l1e == 0.0 {
        return Err(Error::ZeroVector);
    }
    let sq: f64 = a.iter().zip(e).map(|(x, y)| (x.abs() - y.abs()).powi(2)).sum();
    let residual = 1.0 - sq / l1a;
    let ah: Vec<f64> = a.iter().map(|x| x / l1a).collect();
    let eh: Vec<f64> = e.iter().map(|x| x / l1e).collect();
    let dotp: f64 = ah.iter().zip(&eh).map(|(x, y)| x * y).sum();
    let na: f64 = ah.iter().map(|x| x * x).sum();
    let ne: f64 = eh.iter().map(|x| x * x).sum();
    Ok(SimilarityScores {
        residual,
        cosine: (dotp / (na * ne).sqrt()).clamp(-1.0, 1.0),
    })
}

/// One serialized spectrum row; CSV and JSON share these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumRow {
    pub triple_label: String,
    pub map_class: String,
    pub raw: f64,
    pub glued: f64,
    /// Exact value as `p` or `p/q`; empty when unavailable.
    pub analytic: Option<String>,
    pub singular: bool,
    pub trivial: bool,
}

impl From<&SpectrumEntry> for SpectrumRow {
    fn from(e: &SpectrumEntry) -> Self {
        SpectrumRow {
            triple_label: e.label.clone(),
            map_class: e.map_class.as_str().to_string(),
            raw: e.raw,
            glued: e.glued,
            analytic: e.analytic.map(format_rational),
            singular: e.singular,
            trivial: e.trivial,
        }
    }
}

pub fn format_rational(r: Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Option<Rational64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            (d != 0).then(|| Rational64::new(n, d))
        }
        None => s.parse().ok().map(Rational64::from_integer),
    }
}

pub const CSV_HEADER: [&str; 7] = ["triple_label", "map_class", "raw", "glued", "analytic", "singular", "trivial"];

pub fn write_csv<W: Write>(rows: &[SpectrumRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SpectrumRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::InvalidInput(format!("unexpected spectrum header {:?}", headers)));
    }
    let mut rows = Vec::new();
    for rec in rd.deserialize() {
        let row: SpectrumRow = rec?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDocument {
    pub d: usize,
    pub mode: Mode,
    pub entries: Vec<SpectrumRow>,
}

impl From<&TopologicalSpectrum> for SpectrumDocument {
    fn from(s: &TopologicalSpectrum) -> Self {
        SpectrumDocument {
            d: s.d,
            mode: s.mode,
            entries: s.rows(),
        }
    }
}

/// Bar chart of glued values in spectrum order; trivial bars in gray.
pub fn render_svg(rows: &[SpectrumRow]) -> String {
    let n = rows.len().max(1);
    let bar = if n > 200 { 2.0 } else { 24.0 };
    let (left, top, height) = (50.0, 20.0, 300.0);
    let width = left + bar * n as f64 + 20.0;
    let vmax = rows.iter().map(|r| r.glued.abs()).fold(1.0, f64::max).ceil();
    let zero_y = top + height / 2.0;
    let scale = height / 2.0 / vmax;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="10">"#,
        width,
        top + height + 60.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{zero_y}" x2="{:.1}" y2="{zero_y}" stroke="black"/>"#,
        width - 20.0
    );
    let _ = writeln!(s, r#"<text x="5" y="{:.1}">{vmax}</text>"#, top + 4.0);
    let _ = writeln!(s, r#"<text x="5" y="{:.1}">-{vmax}</text>"#, top + height + 4.0);
    for (k, r) in rows.iter().enumerate() {
        let x = left + bar * k as f64;
        let h = r.glued.abs() * scale;
        let y = if r.glued >= 0.0 { zero_y - h } else { zero_y };
        let color = if r.trivial { "#bbbbbb" } else if r.glued >= 0.0 { "#1f77b4" } else { "#d62728" };
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.2}" width="{:.1}" height="{:.2}" fill="{color}"><title>{} {:.4}</title></rect>"#,
            x + 0.1 * bar,
            y,
            0.8 * bar,
            h,
            xml_escape(&r.triple_label),
            r.glued
        );
        if n <= 200 {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" transform="rotate(90 {:.1} {:.1})">{}</text>"#,
                x + 0.3 * bar,
                top + height + 8.0,
                x + 0.3 * bar,
                top + height + 8.0,
                xml_escape(&r.triple_label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(enumerate_triples(3, Mode::Full).unwrap().len(), 56);
        assert_eq!(enumerate_triples(3, Mode::Canonical18).unwrap()[0].label, "123");
        assert!(matches!(enumerate_triples(4, Mode::Canonical18), Err(Error::ModeMismatch(_))));
        assert_eq!(independent_count(2), 1);
        assert_eq!(independent_count(3), 9);
        assert_eq!(independent_count(4), 42);
        assert_eq!(capacity(2).topo_levels, 1);
        assert_eq!(capacity(7).topo_levels, 17296);
    }

    #[test]
    fn similarity_basics() {
        let a = [1.0, -2.0, 0.0, 3.0];
        let s = similarity(&a, &a).unwrap();
        assert_eq!((s.residual, s.cosine), (1.0, 1.0));
        let b: Vec<f64> = a.iter().map(|x| 3.0 * x).collect();
        let s = similarity(&a, &b).unwrap();
        assert!((s.cosine - 1.0).abs() < 1e-15);
        assert!(s.residual < 1.0);
        assert!(matches!(similarity(&a, &[0.0; 4]), Err(Error::ZeroVector)));
        assert!(matches!(similarity(&a, &[1.0]), Err(Error::LengthMismatch(4, 1))));
    }

    #[test]
    fn rational_round_trip() {
        for r in [Rational64::new(-3, 2), Rational64::from_integer(4), Rational64::from_integer(0)] {
            assert_eq!(parse_rational(&format_rational(r)), Some(r));
        }
        assert_eq!(parse_rational("1/0"), None);
    }
}
