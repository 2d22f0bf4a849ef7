//! Monopole charge of a unit isovector field on a periodic plane, in two
//! discretizations: the area-element form with explicit Levi-Civita
//! contractions, and the planar triple-product form. Both are evaluated on
//! the same lattice and must agree to round-off.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::{cross, dot};

/// One term `a cos(kx x + ky y) + b sin(kx x + ky y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub kx: i32,
    pub ky: i32,
    pub a: f64,
    pub b: f64,
}

/// Three-component trigonometric polynomial on the torus `[0, 2pi)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigField {
    pub components: [Vec<Wave>; 3],
}

/// Unit field value with its two partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoSample {
    pub phi: [f64; 3],
    pub dx: [f64; 3],
    pub dy: [f64; 3],
}

impl TrigField {
    /// Random field with `waves` terms per component and wave numbers in
    /// `-kmax..=kmax`.
    pub fn random<R: Rng>(rng: &mut R, waves: usize, kmax: i32) -> TrigField {
        let components = [0, 1, 2].map(|_| {
            (0..waves)
                .map(|_| Wave {
                    kx: rng.random_range(-kmax..=kmax),
                    ky: rng.random_range(-kmax..=kmax),
                    a: rng.random_range(-1.0..1.0),
                    b: rng.random_range(-1.0..1.0),
                })
                .collect()
        });
        TrigField { components }
    }

    /// Raw `(m, dm/dx, dm/dy)`.
    pub fn raw(&self, x: f64, y: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let mut m = [0.0; 3];
        let mut mx = [0.0; 3];
        let mut my = [0.0; 3];
        for (c, waves) in self.components.iter().enumerate() {
            for w in waves {
                let (s, co) = (w.kx as f64 * x + w.ky as f64 * y).sin_cos();
                let g = w.a * co + w.b * s;
                let dg = w.b * co - w.a * s;
                m[c] += g;
                mx[c] += w.kx as f64 * dg;
                my[c] += w.ky as f64 * dg;
            }
        }
        (m, mx, my)
    }

    /// Normalized field with analytic partials; `None` where `m = 0`.
    pub fn unit(&self, x: f64, y: f64) -> Option<IsoSample> {
        let (m, mx, my) = self.raw(x, y);
        let n = dot(&m, &m).sqrt();
        if !(n > 0.0) {
            return None;
        }
        let phi = m.map(|v| v / n);
        let proj = |d: [f64; 3]| {
            let s = dot(&phi, &d);
            [0, 1, 2].map(|c| (d[c] - phi[c] * s) / n)
        };
        Some(IsoSample {
            phi,
            dx: proj(mx),
            dy: proj(my),
        })
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn samples(field: &TrigField, n: usize) -> Vec<IsoSample> {
    let h = TAU / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for ix in 0..n {
        for iy in 0..n {
            let (x, y) = ((ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h);
            if let Some(s) = field.unit(x, y) {
                out.push(s);
            }
        }
    }
    out
}

/// `(1/8pi) sum dOmega^i eps^{ijk} eps^{abc} phi^a d_j phi^b d_k phi^c`
/// with `dOmega = (0, 0, hx hy)` and no z-dependence.
pub fn charge_area_form(field: &TrigField, n: usize) -> f64 {
    let h = TAU / n as f64;
    let area = [0.0, 0.0, h * h];
    let mut total = 0.0;
    for s in samples(field, n) {
        let grad = |j: usize| match j {
            0 => s.dx,
            1 => s.dy,
            _ => [0.0; 3],
        };
        for (i, &da) in area.iter().enumerate() {
            if da == 0.0 {
                continue;
            }
            for j in 0..3 {
                for k in 0..3 {
                    let e1 = levi_civita(i, j, k);
                    if e1 == 0.0 {
                        continue;
                    }
                    let (gj, gk) = (grad(j), grad(k));
                    for a in 0..3 {
                        for b in 0..3 {
                            for c in 0..3 {
                                let e2 = levi_civita(a, b, c);
                                if e2 != 0.0 {
                                    total += da * e1 * e2 * s.phi[a] * gj[b] * gk[c];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    total / (8.0 * PI)
}

/// `(1/4pi) sum phi . (d_x phi x d_y phi) hx hy`.
pub fn charge_planar_form(field: &TrigField, n: usize) -> f64 {
    let h = TAU / n as f64;
    let total: f64 = samples(field, n)
        .iter()
        .map(|s| dot(&s.phi, &cross(&s.dx, &s.dy)) * h * h)
        .sum();
    total / (4.0 * PI)
}
