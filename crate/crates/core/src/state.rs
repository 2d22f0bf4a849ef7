//! Biphoton state model `sum_i c_i |l_i>_A |-l_i>_B` at z=0, its radial
//! profiles, and the off-subspace perturbation model.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `r^|l| exp(-r^2)` in beam-waist units, with `0^0 = 1`.
pub fn radial_profile(l: i64, r: f64) -> f64 {
    let a = l.unsigned_abs() as i32;
    let pow = if a == 0 { 1.0 } else { r.powi(a) };
    pow * (-r * r).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuditState {
    pub l: Vec<i64>,
    pub c: Vec<Complex64>,
    /// Set when duplicate charges were explicitly allowed.
    pub degenerate: bool,
}

impl QuditState {
    pub fn d(&self) -> usize {
        self.l.len()
    }

    pub fn max_abs_l(&self) -> i64 {
        self.l.iter().map(|l| l.abs()).max().unwrap_or(0)
    }

    /// Photon-A field amplitudes `c_k f_k(r) e^{i l_k phi}`.
    pub fn psi(&self, r: f64, phi: f64) -> Vec<Complex64> {
        self.l
            .iter()
            .zip(&self.c)
            .map(|(&l, &c)| c * radial_profile(l, r) * Complex64::from_polar(1.0, l as f64 * phi))
            .collect()
    }

    /// Same state with every charge negated (the other photon's view).
    pub fn swapped(&self) -> QuditState {
        QuditState {
            l: self.l.iter().map(|l| -l).collect(),
            c: self.c.clone(),
            degenerate: self.degenerate,
        }
    }

    /// Amplitudes rescaled componentwise; used to probe scale invariance.
    pub fn rescaled(&self, s: &[Complex64]) -> Result<QuditState> {
        if s.len() != self.d() {
            return Err(Error::DimensionMismatch(format!(
                "{} scale factors for d={}",
                s.len(),
                self.d()
            )));
        }
        let c = self.c.iter().zip(s).map(|(a, b)| a * b).collect();
        make_state_with(&self.l, c, self.degenerate)
    }
}

/// Validated state; rejects duplicate charges.
pub fn make_state(l: &[i64], c: Vec<Complex64>) -> Result<QuditState> {
    make_state_with(l, c, false)
}

/// Validated state; `allow_degenerate` permits repeated charges.
pub fn make_state_with(l: &[i64], c: Vec<Complex64>, allow_degenerate: bool) -> Result<QuditState> {
    if l.len() != c.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} charges but {} amplitudes",
            l.len(),
            c.len()
        )));
    }
    if l.len() < 2 {
        return Err(Error::InvalidDimension(l.len()));
    }
    let mut degenerate = false;
    for (k, a) in l.iter().enumerate() {
        if l[..k].contains(a) {
            if !allow_degenerate {
                return Err(Error::DuplicateCharge(*a));
            }
            degenerate = true;
        }
    }
    if c.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::ZeroAmplitudes);
    }
    if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("non-finite amplitude".into()));
    }
    Ok(QuditState {
        l: l.to_vec(),
        c,
        degenerate,
    })
}

/// Uniform real amplitudes `1/sqrt(d)`.
pub fn maximally_entangled(l: &[i64]) -> Result<QuditState> {
    let a = Complex64::new(1.0 / (l.len() as f64).sqrt(), 0.0);
    make_state(l, vec![a; l.len()])
}

/// Off-subspace weights: `delta[j][k]` attaches mode `j` to qudit level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePerturbation {
    pub delta: DMatrix<f64>,
}

impl SubspacePerturbation {
    pub fn new(delta: DMatrix<f64>) -> Result<Self> {
        if delta.nrows() != delta.ncols() {
            return Err(Error::DimensionMismatch("perturbation must be square".into()));
        }
        for j in 0..delta.nrows() {
            for k in 0..delta.ncols() {
                let v = delta[(j, k)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!("delta[{j}][{k}] = {v} outside [0,1]")));
                }
                if j == k && v != 0.0 {
                    return Err(Error::InvalidInput(format!("delta[{j}][{j}] must be 0")));
                }
            }
        }
        Ok(SubspacePerturbation { delta })
    }

    pub fn zero(d: usize) -> Self {
        SubspacePerturbation {
            delta: DMatrix::zeros(d, d),
        }
    }

    /// Off-diagonal entries drawn uniformly from `[lo, hi]`.
    pub fn uniform<R: rand::Rng>(d: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let mut delta = DMatrix::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                if j != k {
                    delta[(j, k)] = rng.random_range(lo..=hi);
                }
            }
        }
        SubspacePerturbation { delta }
    }

    pub fn d(&self) -> usize {
        self.delta.nrows()
    }

    /// Arithmetic mean of the off-diagonal weights.
    pub fn mean(&self) -> f64 {
        let d = self.d();
        if d < 2 {
            return 0.0;
        }
        let total: f64 = self.delta.iter().sum();
        total / (d * (d - 1)) as f64
    }
}

/// Perturbed field: level `k` carries `sum_j b[k][j] f_j e^{i l_j phi}`.
#[derive(Debug, Clone)]
pub struct PerturbedField {
    pub modes: Vec<i64>,
    pub b: DMatrix<Complex64>,
}

impl PerturbedField {
    pub fn psi(&self, r: f64, phi: f64) -> Vec<Complex64> {
        let basis: Vec<Complex64> = self
            .modes
            .iter()
            .map(|&l| radial_profile(l, r) * Complex64::from_polar(1.0, l as f64 * phi))
            .collect();
        (0..self.b.nrows())
            .map(|k| (0..self.modes.len()).map(|j| self.b[(k, j)] * basis[j]).sum())
            .collect()
    }
}

/// Mixes off-subspace modes into each level; `delta = 0` reproduces the state.
pub fn inject_subspace(state: &QuditState, pert: &SubspacePerturbation) -> Result<PerturbedField> {
    let d = state.d();
    if pert.d() != d {
        return Err(Error::DimensionMismatch(format!(
            "perturbation is {}x{}, state has d={d}",
            pert.d(),
            pert.d()
        )));
    }
    let keep = 1.0 - pert.mean();
    let mut b = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for k in 0..d {
        b[(k, k)] = state.c[k] * keep;
        for j in 0..d {
            if j != k {
                b[(k, j)] = Complex64::new(pert.delta[(j, k)], 0.0);
            }
        }
    }
    Ok(PerturbedField {
        modes: state.l.clone(),
        b,
    })
}

/// On-disk state description; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub d: usize,
    pub l: Vec<i64>,
    pub c: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Vec<Vec<f64>>>,
}

impl StateFile {
    pub fn from_state(state: &QuditState, pert: Option<&SubspacePerturbation>) -> Self {
        StateFile {
            d: state.d(),
            l: state.l.clone(),
            c: state.c.iter().map(|z| [z.re, z.im]).collect(),
            perturbation: pert.map(|p| {
                (0..p.d())
                    .map(|j| (0..p.d()).map(|k| p.delta[(j, k)]).collect())
                    .collect()
            }),
        }
    }

    /// Validates into a state and optional perturbation.
    pub fn to_state(&self, allow_degenerate: bool) -> Result<(QuditState, Option<SubspacePerturbation>)> {
        if self.l.len() != self.d || self.c.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "d={} but {} charges and {} amplitudes",
                self.d,
                self.l.len(),
                self.c.len()
            )));
        }
        let c = self.c.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        let state = make_state_with(&self.l, c, allow_degenerate)?;
        let pert = match &self.perturbation {
            None => None,
            Some(rows) => {
                if rows.len() != self.d || rows.iter().any(|r| r.len() != self.d) {
                    return Err(Error::DimensionMismatch("perturbation must be d x d".into()));
                }
                let m = DMatrix::from_fn(self.d, self.d, |j, k| rows[j][k]);
                Some(SubspacePerturbation::new(m)?)
            }
        };
        Ok((state, pert))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
