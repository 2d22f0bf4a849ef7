//! Quadrature of the wrapping density over the (radial, azimuthal) plane.
//!
//! The radial direction is sampled either in `u = ln r` (default) or in `r`
//! directly, with composite Simpson weights; the azimuth uses the midpoint
//! rule. Rows are processed in fixed chunks and summed in order, so results
//! do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::UnitField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    /// Simpson in `u = ln r`; reaches deep into both asymptotic regimes.
    LogRadial,
    /// Simpson in `r` with weights divided by `r`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub kind: GridKind,
    pub r_min: f64,
    pub r_max: f64,
    /// Number of radial intervals; always a multiple of 4.
    pub n_r: usize,
    pub n_phi: usize,
}

fn round_up4(n: usize) -> usize {
    n.div_ceil(4) * 4
}

impl Grid {
    /// Default logarithmic grid for the given OAM charges.
    pub fn for_modes(modes: &[i64]) -> Grid {
        let lmax = modes.iter().map(|l| l.abs()).max().unwrap_or(0) as f64;
        let r_min: f64 = 1e-8;
        let r_max = 1e8;
        let span = (r_max / r_min).ln();
        let per_unit = (4.0 * lmax).max(8.0);
        Grid {
            kind: GridKind::LogRadial,
            r_min,
            r_max,
            n_r: round_up4(((span * per_unit).ceil() as usize).max(256)),
            n_phi: default_n_phi(modes),
        }
    }

    /// Uniform-in-r grid on `[1e-3, sqrt(max|l|) + 6]` with 4096 intervals.
    pub fn linear_for_modes(modes: &[i64]) -> Grid {
        let lmax = modes.iter().map(|l| l.abs()).max().unwrap_or(0) as f64;
        Grid {
            kind: GridKind::Linear,
            r_min: 1e-3,
            r_max: lmax.sqrt() + 6.0,
            n_r: 4096,
            n_phi: default_n_phi(modes),
        }
    }

    pub fn with_n_r(mut self, n_r: usize) -> Grid {
        self.n_r = round_up4(n_r.max(4));
        self
    }

    pub fn with_n_phi(mut self, n_phi: usize) -> Grid {
        self.n_phi = n_phi.max(4);
        self
    }

    /// Radial nodes as `(u, weight_fine)`, weight in the `u` measure.
    fn nodes(&self) -> (Vec<f64>, f64) {
        let n = self.n_r;
        match self.kind {
            GridKind::LogRadial => {
                let (a, b) = (self.r_min.ln(), self.r_max.ln());
                let h = (b - a) / n as f64;
                ((0..=n).map(|j| a + h * j as f64).collect(), h)
            }
            GridKind::Linear => {
                let h = (self.r_max - self.r_min) / n as f64;
                (
                    (0..=n).map(|j| (self.r_min + h * j as f64).ln()).collect(),
                    h,
                )
            }
        }
    }

    /// Simpson weights for every node (`stride` 1) or every other node
    /// (`stride` 2), converted to the `u` measure.
    fn weights(&self, us: &[f64], h: f64, stride: usize) -> Vec<f64> {
        let n = self.n_r / stride;
        let hs = h * stride as f64;
        let mut w = vec![0.0; self.n_r + 1];
        for k in 0..=n {
            let base = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let j = k * stride;
            let jac = match self.kind {
                GridKind::LogRadial => 1.0,
                GridKind::Linear => (-us[j]).exp(),
            };
            w[j] = base * hs / 3.0 * jac;
        }
        w
    }

    pub fn phis(&self) -> Vec<f64> {
        let step = std::f64::consts::TAU / self.n_phi as f64;
        (0..self.n_phi).map(|k| (k as f64 + 0.5) * step).collect()
    }

    pub fn u_min(&self) -> f64 {
        self.r_min.ln()
    }

    pub fn u_max(&self) -> f64 {
        self.r_max.ln()
    }
}

pub fn default_n_phi(modes: &[i64]) -> usize {
    let mut dl = 0;
    for a in modes {
        for b in modes {
            dl = dl.max((a - b).abs());
        }
    }
    64 * (dl.max(1) as usize)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    /// Sum over components of the azimuthal variance of S.
    pub variance: f64,
    pub mean: [f64; 3],
    pub zeros: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub raw: f64,
    /// Same integral on every other radial node.
    pub coarse: f64,
    pub error: f64,
    pub zero_fraction: f64,
    pub lo: RowStats,
    pub hi: RowStats,
    pub grid: Grid,
}

struct Row {
    sum: f64,
    stats: RowStats,
}

const CHUNK: usize = 16;

/// Integrates `(1/4pi) S . (dS/du x dS/dphi)` over the grid.
pub fn integrate(field: &UnitField, grid: &Grid) -> QuadResult {
    let (us, h) = grid.nodes();
    let phis = grid.phis();
    let tables = field.tables(&phis);
    let rows: Vec<Row> = crate::pool::install(|| {
        us.par_chunks(CHUNK)
            .flat_map_iter(|chunk| {
                chunk
                    .iter()
                    .map(|&u| row(field, &tables, u, phis.len()))
                    .collect::<Vec<_>>()
            })
            .collect()
    });
    let dphi = std::f64::consts::TAU / grid.n_phi as f64;
    let norm = dphi / (4.0 * std::f64::consts::PI);
    let wf = grid.weights(&us, h, 1);
    let wc = grid.weights(&us, h, 2);
    let zeros: usize = rows.iter().map(|r| r.stats.zeros).sum();

    // Integrand in the grid's own coordinate x (u for log grids, r for
    // linear ones), so that Simpson panels are uniform in x.
    let to_x = |u: f64| match grid.kind {
        GridKind::LogRadial => u,
        GridKind::Linear => u.exp(),
    };
    let jac = |u: f64| match grid.kind {
        GridKind::LogRadial => 1.0,
        GridKind::Linear => (-u).exp(),
    };
    let fx: Vec<f64> = rows.iter().zip(&us).map(|(r, &u)| r.sum * jac(u)).collect();
    let total_width = to_x(us[grid.n_r]) - to_x(us[0]);

    // Each coarse panel spans four fine intervals; where the fine and
    // coarse Simpson values disagree by more than the panel's share of
    // LOCAL_TOLERANCE the two fine panels are refined adaptively.
    let mut fine = 0.0;
    let mut coarse = 0.0;
    let mut signed = 0.0;
    let mut refine = Vec::new();
    for k in 0..grid.n_r / 4 {
        let j = 4 * k;
        let f_loc: f64 = (j..=j + 4).map(|i| wf_panel(&wf, &wc, i, j, true)).zip(j..=j + 4).map(|(w, i)| w * rows[i].sum).sum();
        let c_loc: f64 = (j..=j + 4).map(|i| wf_panel(&wf, &wc, i, j, false)).zip(j..=j + 4).map(|(w, i)| w * rows[i].sum).sum();
        coarse += c_loc;
        let width = to_x(us[j + 4]) - to_x(us[j]);
        if ((f_loc - c_loc) * norm).abs() > LOCAL_TOLERANCE * width / total_width {
            refine.push(j);
        } else {
            fine += f_loc;
            signed += f_loc - c_loc;
        }
    }
    let eval = |x: f64| {
        let u = match grid.kind {
            GridKind::LogRadial => x,
            GridKind::Linear => x.ln(),
        };
        row(field, &tables, u, phis.len()).sum * jac(u)
    };
    let refined: Vec<(f64, f64)> = crate::pool::install(|| {
        refine
            .par_iter()
            .flat_map_iter(|&j| {
                [j, j + 2].map(|i| {
                    let (a, b) = (to_x(us[i]), to_x(us[i + 2]));
                    let whole = (b - a) / 6.0 * (fx[i] + 4.0 * fx[i + 1] + fx[i + 2]);
                    let tol = LOCAL_TOLERANCE / norm * (b - a) / total_width;
                    adaptive(&eval, a, b, [fx[i], fx[i + 1], fx[i + 2]], whole, tol, 0)
                })
            })
            .collect()
    });
    let mut local_error = 0.0;
    for (v, e) in refined {
        fine += v;
        local_error += e;
    }
    let fine = fine * norm;
    let coarse = coarse * norm;
    let error = (signed * norm).abs() + local_error * norm;
    QuadResult {
        raw: fine,
        coarse,
        error,
        zero_fraction: zeros as f64 / (rows.len() * grid.n_phi) as f64,
        lo: rows[0].stats,
        hi: rows[rows.len() - 1].stats,
        grid: *grid,
    }
}

/// Share of the raw wrapping value a panel may deviate by before it is
/// refined locally.
const LOCAL_TOLERANCE: f64 = 1e-3;
const MAX_DEPTH: usize = 18;

/// Weight of node `i` inside the coarse panel starting at node `j`, for the
/// fine (stride 1) or coarse (stride 2) rule. Shared end nodes get half
/// of the global interior weight from each side.
fn wf_panel(wf: &[f64], wc: &[f64], i: usize, j: usize, fine: bool) -> f64 {
    let w = if fine { wf[i] } else { wc[i] };
    if (i == j && i != 0) || (i == j + 4 && i != wf.len() - 1) {
        w / 2.0
    } else {
        w
    }
}

/// Adaptive Simpson on `[a, b]` given the values at `a`, the midpoint and
/// `b`. Returns the integral and its error estimate.
fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, v: [f64; 3], whole: f64, tol: f64, depth: usize) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (fl, fr) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (v[0] + 4.0 * fl + v[1]);
    let right = (b - m) / 6.0 * (v[1] + 4.0 * fr + v[2]);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol || depth >= MAX_DEPTH {
        return (left + right, diff.abs() / 15.0);
    }
    let (l, el) = adaptive(f, a, m, [v[0], fl, v[1]], left, tol / 2.0, depth + 1);
    let (r, er) = adaptive(f, m, b, [v[1], fr, v[2]], right, tol / 2.0, depth + 1);
    (l + r, el + er)
}

fn row(field: &UnitField, tables: &crate::field::TrigTables, u: f64, n_phi: usize) -> Row {
    let prepared = field.prepare_row(u);
    let mut sum = 0.0;
    let mut zeros = 0;
    let mut s1 = [0.0; 3];
    let mut s2 = [0.0; 3];
    for k in 0..n_phi {
        match field.point(&prepared, tables, k) {
            Some((s, dens)) => {
                sum += dens;
                for c in 0..3 {
                    s1[c] += s[c];
                    s2[c] += s[c] * s[c];
                }
            }
            None => zeros += 1,
        }
    }
    let n = (n_phi - zeros).max(1) as f64;
    let mean = [s1[0] / n, s1[1] / n, s1[2] / n];
    let variance = (0..3).map(|c| (s2[c] / n - mean[c] * mean[c]).max(0.0)).sum();
    Row {
        sum,
        stats: RowStats {
            variance,
            mean,
            zeros,
        },
    }
}

/// Row statistics (azimuthal variance, mean, zero count) at the given `u`
/// values; used for classification without a full integration pass.
pub fn sample_rows(field: &UnitField, us: &[f64], n_phi: usize) -> Vec<RowStats> {
    let step = std::f64::consts::TAU / n_phi as f64;
    let phis: Vec<f64> = (0..n_phi).map(|k| (k as f64 + 0.5) * step).collect();
    let tables = field.tables(&phis);
    us.iter().map(|&u| row(field, &tables, u, n_phi).stats).collect()
}

/// The nodes used by [`sample_rows`] for grid-wide checks: both ends plus
/// evenly spaced interior rows.
pub fn probe_rows(grid: &Grid, count: usize) -> Vec<f64> {
    let (a, b) = (grid.u_min(), grid.u_max());
    (0..count)
        .map(|k| a + (b - a) * k as f64 / (count - 1) as f64)
        .collect()
}
