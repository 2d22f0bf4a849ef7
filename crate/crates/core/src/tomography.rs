//! Projective tomography of the biphoton state in the OAM level basis:
//! measurement set, coincidence simulation with optional noise,
//! chi-square reconstruction with thresholding, and state metrics.
//!
//! Both photons use level coordinates: level `k` of photon A carries charge
//! `l_k`, level `k` of photon B carries `-l_k`. The density matrix is
//! indexed `a * d + b` with photon A first.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpatialDensity;
use crate::lie::CMatrix;
use crate::spectrum::{compute_spectrum_density, Mode, SpectrumOptions, TopologicalSpectrum};
use crate::state::QuditState;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Per-photon projectors: the `d` basis kets, then for every pair `(n, m)`
/// the superpositions `(|n> + e^{i theta}|m>)/sqrt(2)` for theta = 0,
/// pi/2, pi, 3pi/2.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pub d: usize,
    pub subspace_l: Vec<i64>,
    pub labels: Vec<String>,
    pub vectors: Vec<DVector<Complex64>>,
}

impl ProjectionSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of coincidence settings, `K^2`.
    pub fn settings(&self) -> usize {
        self.len() * self.len()
    }

    /// Two-photon vector of setting `(m, n)`.
    pub fn joint(&self, m: usize, n: usize) -> DVector<Complex64> {
        self.vectors[m].kronecker(&self.vectors[n])
    }
}

pub fn projection_set(d: usize, subspace_l: &[i64]) -> Result<ProjectionSet> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if subspace_l.len() != d {
        return Err(Error::DimensionMismatch(format!("{} charges for d={d}", subspace_l.len())));
    }
    for (k, l) in subspace_l.iter().enumerate() {
        if subspace_l[..k].contains(l) {
            return Err(Error::DuplicateCharge(*l));
        }
    }
    let mut labels = Vec::new();
    let mut vectors = Vec::new();
    for k in 0..d {
        labels.push(format!("l{}", subspace_l[k]));
        let mut v = DVector::from_element(d, ZERO);
        v[k] = Complex64::new(1.0, 0.0);
        vectors.push(v);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for n in 0..d {
        for m in n + 1..d {
            let phases = [
                ("+", Complex64::new(1.0, 0.0)),
                ("+i", Complex64::new(0.0, 1.0)),
                ("-", Complex64::new(-1.0, 0.0)),
                ("-i", Complex64::new(0.0, -1.0)),
            ];
            for (tag, ph) in phases {
                labels.push(format!("l{}{}l{}", subspace_l[n], tag, subspace_l[m]));
                let mut v = DVector::from_element(d, ZERO);
                v[n] = Complex64::new(s, 0.0);
                v[m] = ph * s;
                vectors.push(v);
            }
        }
    }
    Ok(ProjectionSet {
        d,
        subspace_l: subspace_l.to_vec(),
        labels,
        vectors,
    })
}

/// Normalized density matrix of `sum_i c_i |i>_A |i>_B`.
pub fn pure_density(state: &QuditState) -> CMatrix {
    let d = state.d();
    let mut psi = DVector::from_element(d * d, ZERO);
    for i in 0..d {
        psi[i * d + i] = state.c[i];
    }
    let n = psi.norm();
    psi /= Complex64::new(n, 0.0);
    &psi * psi.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    Poisson,
    /// Poisson counts after photon-B leakage between neighbouring OAM
    /// modes on basis settings, with Gaussian width `sigma` in units of l.
    PoissonCrosstalk { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMatrix {
    pub counts: DMatrix<f64>,
    pub total_counts: f64,
    pub noise: Noise,
    pub seed: u64,
}

/// Expected coincidences `total_counts * <P_m x P_n>_rho`, optionally
/// with crosstalk and Poisson sampling. `total_counts` is the expected
/// count for a setting of unit probability.
pub fn simulate_coincidences(
    rho: &CMatrix,
    set: &ProjectionSet,
    total_counts: f64,
    noise: Noise,
    seed: u64,
) -> Result<CoincidenceMatrix> {
    let d = set.d;
    if rho.nrows() != d * d || rho.ncols() != d * d {
        return Err(Error::DimensionMismatch(format!("density is {}x{}, set has d={d}", rho.nrows(), rho.ncols())));
    }
    let k = set.len();
    let mut rates = DMatrix::from_fn(k, k, |m, n| {
        let v = set.joint(m, n);
        total_counts * (v.adjoint() * rho * &v)[(0, 0)].re.max(0.0)
    });
    if let Noise::PoissonCrosstalk { sigma } = noise {
        let w = crosstalk_weights(&set.subspace_l, sigma);
        let basis = rates.view((0, 0), (d, d)).clone_owned();
        for m in 0..d {
            for n in 0..d {
                rates[(m, n)] = (0..d).map(|j| w[(n, j)] * basis[(m, j)]).sum();
            }
        }
    }
    if matches!(noise, Noise::Poisson | Noise::PoissonCrosstalk { .. }) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in rates.iter_mut() {
            *x = if *x > 0.0 {
                Poisson::new(*x).map(|p| p.sample(&mut rng)).unwrap_or(*x)
            } else {
                0.0
            };
        }
    }
    Ok(CoincidenceMatrix {
        counts: rates,
        total_counts,
        noise,
        seed,
    })
}

/// Row-normalized `exp(-(l_n - l_j)^2 / 2 sigma^2)`.
fn crosstalk_weights(l: &[i64], sigma: f64) -> DMatrix<f64> {
    let d = l.len();
    let mut w = DMatrix::from_fn(d, d, |n, j| {
        let dl = (l[n] - l[j]) as f64;
        if sigma > 0.0 {
            (-dl * dl / (2.0 * sigma * sigma)).exp()
        } else if n == j {
            1.0
        } else {
            0.0
        }
    });
    for n in 0..d {
        let s: f64 = w.row(n).sum();
        for j in 0..d {
            w[(n, j)] /= s;
        }
    }
    w
}

/// Threshold from the basis block: the largest coincidence between
/// mismatched OAM levels relative to the total basis-block counts.
pub fn epsilon_from_crosstalk(c: &CoincidenceMatrix, set: &ProjectionSet) -> f64 {
    let d = set.d;
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    for m in 0..d {
        for n in 0..d {
            total += c.counts[(m, n)];
            if m != n {
                worst = worst.max(c.counts[(m, n)]);
            }
        }
    }
    if total > 0.0 {
        worst / total
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    pub max_iterations: usize,
    /// Stop once the gradient norm, relative to the total counts, is below this.
    pub gradient_tolerance: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            max_iterations: 10_000,
            gradient_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub rho: CMatrix,
    /// chi-square of the optimizer output, before thresholding.
    pub chi2: f64,
    pub iterations: usize,
    /// chi-square after every accepted step, starting with the seed.
    pub history: Vec<f64>,
    /// Number of entries zeroed by the threshold.
    pub thresholded: usize,
}

struct Problem {
    projectors: Vec<DVector<Complex64>>,
    measured: Vec<f64>,
    /// Expected counts per unit probability.
    scale: f64,
    floor: f64,
}

impl Problem {
    fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|v| (v.adjoint() * rho * v)[(0, 0)].re)
            .collect()
    }

    fn chi2(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.measured)
            .map(|(pk, cm)| {
                let cp = self.scale * pk;
                (cm - cp).powi(2) / cp.max(self.floor)
            })
            .sum()
    }

    fn dchi2_dp(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.measured)
            .map(|(pk, cm)| {
                let cp = self.scale * pk;
                if cp > self.floor {
                    self.scale * (1.0 - (cm / cp).powi(2))
                } else {
                    -2.0 * self.scale * (cm - cp) / self.floor
                }
            })
            .collect()
    }
}

fn rho_of(g: &CMatrix) -> CMatrix {
    let r = g.adjoint() * g;
    let t = r.trace().re;
    r / Complex64::new(t, 0.0)
}

/// Minimizes `sum (C_M - C_P)^2 / C_P` over `rho = G^dag G / Tr(G^dag G)`,
/// then zeroes entries with modulus `<= epsilon` and re-projects.
pub fn reconstruct(
    c: &CoincidenceMatrix,
    set: &ProjectionSet,
    epsilon: f64,
    options: &ReconstructOptions,
) -> Result<Reconstruction> {
    let d = set.d;
    let k = set.len();
    if c.counts.nrows() != k || c.counts.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "counts are {}x{}, set has {k} projectors",
            c.counts.nrows(),
            c.counts.ncols()
        )));
    }
    if c.counts.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidInput("coincidence counts must be finite and nonnegative".into()));
    }
    let total: f64 = c.counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroCounts);
    }
    let per_photon = (2 * d - 1) as f64;
    let mut projectors = Vec::with_capacity(k * k);
    let mut measured = Vec::with_capacity(k * k);
    for m in 0..k {
        for n in 0..k {
            projectors.push(set.joint(m, n));
            measured.push(c.counts[(m, n)]);
        }
    }
    let prob = Problem {
        projectors,
        measured,
        scale: total / (per_photon * per_photon),
        floor: 1e-9 * total,
    };

    let seed = linear_inversion(&prob, d * d);
    let mut g = hermitian_sqrt(&seed);
    let mut p = prob.probabilities(&rho_of(&g));
    let mut chi = prob.chi2(&p);
    let mut history = vec![chi];
    let mut step = 1.0 / total;
    let mut iterations = 0;
    let mut converged = false;
    let mut grad = gradient(&prob, &g, &p);
    let mut dir = -&grad;
    while iterations < options.max_iterations {
        let gnorm = grad.norm();
        if gnorm / total < options.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        // Polak-Ribiere direction, reset to steepest descent when it is
        // not a descent direction
        if re_dot(&grad, &dir) >= 0.0 {
            dir = -&grad;
        }
        let dnorm = dir.norm();
        let mut accepted = false;
        while step * dnorm > 1e-16 * g.norm() {
            let trial = &g + &dir * Complex64::new(step, 0.0);
            let tp = prob.probabilities(&rho_of(&trial));
            let tc = prob.chi2(&tp);
            if tc <= chi {
                g = trial;
                p = tp;
                chi = tc;
                history.push(chi);
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if dir != -&grad {
                dir = -&grad;
                step = 1.0 / total;
                continue;
            }
            // No representable descent step remains: numerical minimum.
            converged = true;
            break;
        }
        let next = gradient(&prob, &g, &p);
        let beta = (re_dot(&next, &(&next - &grad)) / re_dot(&grad, &grad)).max(0.0);
        dir = -&next + &dir * Complex64::new(beta, 0.0);
        grad = next;
    }
    if !converged {
        return Err(Error::ReconstructionNonConvergent { chi2: chi, iterations });
    }
    let mut rho = rho_of(&g);
    let mut thresholded = 0;
    if epsilon > 0.0 {
        for z in rho.iter_mut() {
            if z.norm() <= epsilon && *z != ZERO {
                *z = ZERO;
                thresholded += 1;
            }
        }
        if thresholded > 0 {
            rho = project_physical(&rho);
        }
    }
    Ok(Reconstruction {
        rho,
        chi2: chi,
        iterations,
        history,
        thresholded,
    })
}

fn re_dot(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn gradient(prob: &Problem, g: &CMatrix, p: &[f64]) -> CMatrix {
    let n = g.nrows();
    let t = (g.adjoint() * g).trace().re;
    let gk = prob.dchi2_dp(p);
    let mut m = CMatrix::from_element(n, n, ZERO);
    let mut avg = 0.0;
    for ((v, w), pk) in prob.projectors.iter().zip(&gk).zip(p) {
        if *w != 0.0 {
            m += (v * v.adjoint()) * Complex64::new(*w, 0.0);
        }
        avg += w * pk;
    }
    for i in 0..n {
        m[(i, i)] -= Complex64::new(avg, 0.0);
    }
    g * m / Complex64::new(t, 0.0)
}

/// Least-squares solve of `Tr(rho P_k) = C_k / scale` over Hermitian
/// matrices, projected to a physical state and mixed with `1e-3` of the
/// identity so that the square-root factor has full rank.
fn linear_inversion(prob: &Problem, n: usize) -> CMatrix {
    let basis = hermitian_basis(n);
    let rows = prob.projectors.len();
    let a = DMatrix::from_fn(rows, basis.len(), |k, b| {
        let v = &prob.projectors[k];
        (v.adjoint() * &basis[b] * v)[(0, 0)].re
    });
    let y = DVector::from_fn(rows, |k, _| prob.measured[k] / prob.scale);
    let x = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(basis.len()));
    let mut rho = CMatrix::from_element(n, n, ZERO);
    for (b, xb) in basis.iter().zip(x.iter()) {
        rho += b * Complex64::new(*xb, 0.0);
    }
    let rho = project_physical(&rho);
    let mix = 1e-3;
    rho * Complex64::new(1.0 - mix, 0.0) + CMatrix::identity(n, n) * Complex64::new(mix / n as f64, 0.0)
}

fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut m = CMatrix::from_element(n, n, ZERO);
        m[(i, i)] = Complex64::new(1.0, 0.0);
        out.push(m);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut s = CMatrix::from_element(n, n, ZERO);
            s[(i, j)] = Complex64::new(1.0, 0.0);
            s[(j, i)] = Complex64::new(1.0, 0.0);
            out.push(s);
            let mut a = CMatrix::from_element(n, n, ZERO);
            a[(i, j)] = Complex64::new(0.0, -1.0);
            a[(j, i)] = Complex64::new(0.0, 1.0);
            out.push(a);
        }
    }
    out
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Hermitian part with negative eigenvalues clipped, scaled to unit trace.
pub fn project_physical(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    if total <= 0.0 {
        return CMatrix::identity(n, n) / Complex64::new(n as f64, 0.0);
    }
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        vals.iter().map(|x| Complex64::new(x / total, 0.0)),
    ));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|x| Complex64::new(x.max(0.0).sqrt(), 0.0)),
    ));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// `(Tr sqrt(sqrt(a) b sqrt(a)))^2`.
pub fn fidelity(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let sa = hermitian_sqrt(a);
    let inner = &sa * b * &sa;
    let eig = SymmetricEigen::new(hermitize(&inner));
    let tr: f64 = eig.eigenvalues.iter().map(|x| x.max(0.0).sqrt()).sum();
    Ok(tr * tr)
}

pub fn purity(rho: &CMatrix) -> f64 {
    (rho * rho).trace().re
}

/// Two-qubit concurrence; other sizes are unsupported.
pub fn concurrence(rho: &CMatrix) -> Result<f64> {
    if rho.shape() != (4, 4) {
        return Err(Error::Unsupported(format!(
            "concurrence is defined here for two qubits only, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let mut yy = CMatrix::from_element(4, 4, ZERO);
    // sigma_y x sigma_y
    for (i, j, v) in [(0, 3, -1.0), (1, 2, 1.0), (2, 1, 1.0), (3, 0, -1.0)] {
        yy[(i, j)] = Complex64::new(v, 0.0);
    }
    let tilde = &yy * rho.map(|z| z.conj()) * &yy;
    let s = hermitian_sqrt(rho);
    let r = &s * tilde * &s;
    let eig = SymmetricEigen::new(hermitize(&r));
    let mut lam: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub fidelity: f64,
    pub purity: f64,
    pub concurrence: Option<f64>,
}

/// Fidelity between target and measured, purity of the measured state, and
/// its concurrence for two qubits.
pub fn metrics(rho_t: &CMatrix, rho_m: &CMatrix) -> Result<Metrics> {
    Ok(Metrics {
        fidelity: fidelity(rho_t, rho_m)?,
        purity: purity(rho_m),
        concurrence: if rho_m.nrows() == 4 { Some(concurrence(rho_m)?) } else { None },
    })
}

/// Spectrum of a biphoton density, photon A carrying the charges `l_a` and
/// photon B the charges `l_b` (which must be the negatives of `l_a`).
pub fn spectrum_from_density(
    rho: &CMatrix,
    l_a: &[i64],
    l_b: &[i64],
    mode: Mode,
    options: &SpectrumOptions,
) -> Result<TopologicalSpectrum> {
    if l_a.len() != l_b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} charges", l_a.len(), l_b.len())));
    }
    if l_a.iter().zip(l_b).any(|(a, b)| *a != -*b) {
        return Err(Error::InvalidInput("photon B charges must be conjugate to photon A".into()));
    }
    let density = SpatialDensity::from_density(rho, l_a)?;
    compute_spectrum_density(&density, mode, options)
}

/// Haar-random amplitudes: a normalized complex Gaussian vector.
pub fn haar_amplitudes<R: Rng>(d: usize, rng: &mut R) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// K x K grid with a header row and column of projector labels.
pub fn write_counts_csv<W: Write>(c: &CoincidenceMatrix, set: &ProjectionSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::from("projector")];
    header.extend(set.labels.iter().cloned());
    w.write_record(&header)?;
    for (m, label) in set.labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend((0..set.len()).map(|n| c.counts[(m, n)].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a grid written by [`write_counts_csv`]; labels must match the set.
pub fn read_counts_csv<R: Read>(input: R, set: &ProjectionSet) -> Result<DMatrix<f64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.len() != set.len() + 1 || header[1..] != set.labels[..] {
        return Err(Error::InvalidInput("coincidence header does not match the projection set".into()));
    }
    let k = set.len();
    let mut m = DMatrix::zeros(k, k);
    let mut row = 0;
    for rec in rd.records() {
        let rec = rec?;
        if row >= k || rec.len() != k + 1 || rec[0] != set.labels[row] {
            return Err(Error::InvalidInput(format!("bad coincidence row {row}")));
        }
        for n in 0..k {
            m[(row, n)] = rec[n + 1]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad count at row {row}, column {n}")))?;
        }
        row += 1;
    }
    if row != k {
        return Err(Error::InvalidInput(format!("{row} coincidence rows, expected {k}")));
    }
    Ok(m)
}

/// Nested `[re, im]` arrays.
pub fn density_to_json(rho: &CMatrix) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..rho.nrows())
        .map(|i| (0..rho.ncols()).map(|j| [rho[(i, j)].re, rho[(i, j)].im]).collect())
        .collect();
    serde_json::json!(rows)
}

pub fn density_from_json(v: &serde_json::Value) -> Result<CMatrix> {
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(v.clone())?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("density matrix must be square".into()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::maximally_entangled;

    #[test]
    fn set_sizes() {
        assert_eq!(projection_set(2, &[0, 1]).unwrap().settings(), 36);
        assert_eq!(projection_set(3, &[-1, 0, 1]).unwrap().settings(), 225);
        assert!(matches!(projection_set(2, &[1, 1]), Err(Error::DuplicateCharge(1))));
        let set = projection_set(3, &[-1, 0, 1]).unwrap();
        assert_eq!(set.labels[3], "l-1+l0");
        assert_eq!(set.labels[4], "l-1+il0");
        for v in &set.vectors {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_sum() {
        let s = maximally_entangled(&[-1, 0, 1]).unwrap();
        let set = projection_set(3, &s.l).unwrap();
        let c = simulate_coincidences(&pure_density(&s), &set, 1.0, Noise::None, 0).unwrap();
        let total: f64 = c.counts.iter().sum();
        assert!((total - 25.0).abs() < 1e-12);
        for m in 0..3 {
            for n in 0..3 {
                if m != n {
                    assert_eq!(c.counts[(m, n)], 0.0);
                }
            }
        }
    }

    #[test]
    fn plus_plus_rate_is_half() {
        let s = maximally_entangled(&[0, 1]).unwrap();
        let set = projection_set(2, &s.l).unwrap();
        let c = simulate_coincidences(&pure_density(&s), &set, 1.0, Noise::None, 0).unwrap();
        let plus = set.labels.iter().position(|l| l == "l0+l1").unwrap();
        let minus = set.labels.iter().position(|l| l == "l0-l1").unwrap();
        assert!((c.counts[(plus, plus)] - 0.5).abs() < 1e-12);
        assert!(c.counts[(plus, minus)].abs() < 1e-12);
    }

    #[test]
    fn metric_extremes() {
        let bell = pure_density(&maximally_entangled(&[0, 1]).unwrap());
        assert!((concurrence(&bell).unwrap() - 1.0).abs() < 1e-7);
        let mut prod = CMatrix::from_element(4, 4, ZERO);
        prod[(0, 0)] = Complex64::new(1.0, 0.0);
        assert!(concurrence(&prod).unwrap() < 1e-7);
        assert!((fidelity(&bell, &bell).unwrap() - 1.0).abs() < 1e-7);
        let mixed = CMatrix::identity(9, 9) / Complex64::new(9.0, 0.0);
        assert!((purity(&mixed) - 1.0 / 9.0).abs() < 1e-15);
        assert!(matches!(concurrence(&mixed), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_counts_rejected() {
        let set = projection_set(2, &[0, 1]).unwrap();
        let c = CoincidenceMatrix {
            counts: DMatrix::zeros(6, 6),
            total_counts: 0.0,
            noise: Noise::None,
            seed: 0,
        };
        assert!(matches!(
            reconstruct(&c, &set, 0.0, &ReconstructOptions::default()),
            Err(Error::ZeroCounts)
        ));
    }
}
