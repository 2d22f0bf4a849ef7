//! Generalized Gell-Mann basis of su(d) and its Cartan-Weyl decomposition.
//!
//! Ordering: for each column `j = 1..d` (0-based) the symmetric and
//! antisymmetric elements of every pair `(i, j)` with `i < j`, followed by the
//! diagonal element of level `j`. For d=3 this is exactly lambda_1..lambda_8,
//! for d=2 the Pauli matrices, and every root's two Hermitian parts occupy
//! consecutive indices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Structural type of a basis element; indices are 0-based matrix positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    /// `E_ij + E_ji`, the cos-type element.
    Symmetric { i: usize, j: usize },
    /// `-i E_ij + i E_ji`, the sin-type element.
    Antisymmetric { i: usize, j: usize },
    /// `sqrt(2/(l(l+1))) diag(1,..,1,-l,0,..)` with `l` leading ones.
    Diagonal { level: usize },
}

impl ElementKind {
    pub fn is_diagonal(&self) -> bool {
        matches!(self, ElementKind::Diagonal { .. })
    }
}

#[derive(Debug, Clone)]
pub struct BasisElement {
    /// 1-based position in the basis.
    pub index: usize,
    pub kind: ElementKind,
    pub matrix: CMatrix,
}

/// 1-based index of the symmetric element of pair `(i, j)`, `i < j`.
pub fn sym_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * j + 2 * i
}

/// 1-based index of the antisymmetric element of pair `(i, j)`, `i < j`.
pub fn anti_index(i: usize, j: usize) -> usize {
    sym_index(i, j) + 1
}

/// 1-based index of the diagonal element of the given level (1..d-1).
pub fn diag_index(level: usize) -> usize {
    (level + 1) * (level + 1) - 1
}

/// Kind of the basis element at 1-based `index`, without building matrices.
pub fn kind_of(d: usize, index: usize) -> Result<ElementKind> {
    if index == 0 || index > d * d - 1 {
        return Err(Error::AxisOutOfRange { axis: index, d });
    }
    let j = (index as f64).sqrt().floor() as usize;
    let j = if (j + 1) * (j + 1) <= index { j + 1 } else { j };
    let off = index - j * j;
    if off == 2 * j {
        Ok(ElementKind::Diagonal { level: j })
    } else if off % 2 == 0 {
        Ok(ElementKind::Symmetric { i: off / 2, j })
    } else {
        Ok(ElementKind::Antisymmetric { i: off / 2, j })
    }
}

fn element_matrix(d: usize, kind: ElementKind) -> CMatrix {
    let mut m = CMatrix::from_element(d, d, ZERO);
    match kind {
        ElementKind::Symmetric { i, j } => {
            m[(i, j)] = ONE;
            m[(j, i)] = ONE;
        }
        ElementKind::Antisymmetric { i, j } => {
            m[(i, j)] = -I;
            m[(j, i)] = I;
        }
        ElementKind::Diagonal { level } => {
            let norm = (2.0 / (level * (level + 1)) as f64).sqrt();
            for k in 0..level {
                m[(k, k)] = Complex64::new(norm, 0.0);
            }
            m[(level, level)] = Complex64::new(-(level as f64) * norm, 0.0);
        }
    }
    m
}

/// Ordered basis of su(d) with `Tr(T_a T_b) = 2 delta_ab`.
#[derive(Debug, Clone)]
pub struct LieBasis {
    pub d: usize,
    pub elements: Vec<BasisElement>,
}

impl LieBasis {
    pub fn new(d: usize) -> Result<Self> {
        Ok(LieBasis {
            d,
            elements: build_basis(d)?,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element at 1-based index `a`.
    pub fn get(&self, a: usize) -> Result<&BasisElement> {
        if a == 0 || a > self.elements.len() {
            return Err(Error::AxisOutOfRange { axis: a, d: self.d });
        }
        Ok(&self.elements[a - 1])
    }
}

pub fn build_basis(d: usize) -> Result<Vec<BasisElement>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 1..d {
        for i in 0..j {
            for kind in [
                ElementKind::Symmetric { i, j },
                ElementKind::Antisymmetric { i, j },
            ] {
                out.push(BasisElement {
                    index: out.len() + 1,
                    kind,
                    matrix: element_matrix(d, kind),
                });
            }
        }
        let kind = ElementKind::Diagonal { level: j };
        out.push(BasisElement {
            index: out.len() + 1,
            kind,
            matrix: element_matrix(d, kind),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RootPair {
    /// 0-based row of the raising operator's unit entry.
    pub row: usize,
    /// 0-based column, `row < col`.
    pub col: usize,
    pub raising: CMatrix,
    /// 1-based (symmetric, antisymmetric) indices with `E + E^dag = T_a1`
    /// and `(E - E^dag)/i = T_a2`.
    pub nice_pair: (usize, usize),
    /// Coefficients of `[E, E^dag]` over the d-1 Cartan elements, level order.
    pub cartan_combo: Vec<f64>,
}

impl RootPair {
    /// `[E, E^dag]` as a dense matrix.
    pub fn commutator(&self) -> CMatrix {
        let e = &self.raising;
        let ed = e.adjoint();
        e * &ed - &ed * e
    }

    /// The Cartan combination as (1-based basis index, weight) pairs.
    pub fn cartan_axis(&self) -> Vec<(usize, f64)> {
        self.cartan_combo
            .iter()
            .enumerate()
            .filter(|(_, w)| w.abs() > 1e-15)
            .map(|(k, &w)| (diag_index(k + 1), w))
            .collect()
    }
}

/// Root pairs in basis order plus the d-1 Cartan elements.
pub fn cartan_weyl(d: usize) -> Result<(Vec<RootPair>, Vec<BasisElement>)> {
    let basis = build_basis(d)?;
    let cartan: Vec<BasisElement> = basis
        .iter()
        .filter(|b| b.kind.is_diagonal())
        .cloned()
        .collect();
    let mut roots = Vec::with_capacity(d * (d - 1) / 2);
    for j in 1..d {
        for i in 0..j {
            let mut e = CMatrix::from_element(d, d, ZERO);
            e[(i, j)] = ONE;
            let ed = e.adjoint();
            let comm = &e * &ed - &ed * &e;
            let cartan_combo = cartan
                .iter()
                .map(|h| (&h.matrix * &comm).trace().re / 2.0)
                .collect();
            roots.push(RootPair {
                row: i,
                col: j,
                raising: e,
                nice_pair: (sym_index(i, j), anti_index(i, j)),
                cartan_combo,
            });
        }
    }
    Ok((roots, cartan))
}

/// The d(d-1)/2 nice pairs with their roots.
pub fn nice_pairs(d: usize) -> Result<Vec<((usize, usize), RootPair)>> {
    Ok(cartan_weyl(d)?
        .0
        .into_iter()
        .map(|r| (r.nice_pair, r))
        .collect())
}
