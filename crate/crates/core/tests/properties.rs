use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use topospec::field::{component_field, triple_field, Axis, CANONICAL_LABELS};
use topospec::invariants::{total_derivative_estimate, wrapping_numeric};
use topospec::lie::{CMatrix, LieBasis};
use topospec::monopole::{charge_area_form, charge_planar_form, TrigField};
use topospec::spectrum::{dependency_scan, similarity, FormSet};
use topospec::state::{inject_subspace, make_state, radial_profile};
use topospec::tomography::{
    concurrence, fidelity, metrics, projection_set, pure_density, purity, reconstruct, simulate_coincidences,
    Noise, ReconstructOptions,
};
use topospec::{
    build_basis, cartan_weyl, compute_spectrum, nice_pairs, Mode, SpatialDensity, SpectrumOptions,
    SubspacePerturbation, TripleSpec,
};

fn cz(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn distinct3() -> impl Strategy<Value = [i64; 3]> {
    [-5i64..=5, -5i64..=5, -5i64..=5].prop_filter("distinct charges", |l| l[0] != l[1] && l[1] != l[2] && l[0] != l[2])
}

fn amplitudes3() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((0.2f64..1.5, -1.0f64..1.0).prop_map(|(a, b)| cz(a, b)), 3)
}

fn density(l: &[i64], c: Vec<Complex64>) -> SpatialDensity {
    SpatialDensity::from_state(&make_state(l, c).unwrap())
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[test]
fn basis_trace_orthonormality() {
    for d in 2..=8 {
        let basis = build_basis(d).unwrap();
        assert_eq!(basis.len(), d * d - 1);
        for a in &basis {
            assert!(a.matrix.trace().norm() < 1e-14, "d={d} T{} not traceless", a.index);
            assert!((&a.matrix - a.matrix.adjoint()).iter().all(|z| z.norm() < 1e-15));
            for b in &basis {
                let t = (&a.matrix * &b.matrix).trace();
                let want = if a.index == b.index { 2.0 } else { 0.0 };
                assert!((t - cz(want, 0.0)).norm() < 1e-13, "d={d} Tr(T{} T{}) = {t}", a.index, b.index);
            }
        }
    }
}

#[test]
fn root_commutators_are_cartan() {
    for d in 2..=8 {
        let (roots, cartan) = cartan_weyl(d).unwrap();
        assert_eq!(roots.len(), d * (d - 1) / 2);
        for r in &roots {
            let comm = r.commutator();
            let mut want = CMatrix::from_element(d, d, cz(0.0, 0.0));
            want[(r.row, r.row)] = cz(1.0, 0.0);
            want[(r.col, r.col)] = cz(-1.0, 0.0);
            assert_eq!(comm, want);
            let mut sum = CMatrix::from_element(d, d, cz(0.0, 0.0));
            for (w, h) in r.cartan_combo.iter().zip(&cartan) {
                sum += &h.matrix * cz(*w, 0.0);
            }
            assert!((sum - want).iter().all(|z| z.norm() < 1e-13));
        }
    }
}

#[test]
fn root_parts_span_the_algebra() {
    for d in 2..=8 {
        let basis = LieBasis::new(d).unwrap();
        let (roots, cartan) = cartan_weyl(d).unwrap();
        let mut gens: Vec<CMatrix> = Vec::new();
        for r in &roots {
            let e = &r.raising;
            let ed = e.adjoint();
            gens.push((e + &ed) * cz(0.5, 0.0));
            gens.push((e - &ed) * cz(0.0, -0.5));
        }
        gens.extend(cartan.iter().map(|h| h.matrix.clone()));
        let n = d * d - 1;
        let change = DMatrix::from_fn(n, n, |i, j| {
            (&gens[j] * &basis.get(i + 1).unwrap().matrix).trace().re / 2.0
        });
        assert_eq!(change.rank(1e-10), n, "d={d}");
    }
}

#[test]
fn nice_pair_examples() {
    let three: Vec<(usize, usize)> = nice_pairs(3).unwrap().into_iter().map(|(p, _)| p).collect();
    assert_eq!(three, vec![(1, 2), (4, 5), (6, 7)]);
    assert_eq!(nice_pairs(2).unwrap().len(), 1);
    assert_eq!(nice_pairs(5).unwrap().len(), 10);
}

#[test]
fn radial_profile_shape() {
    for l in 1..=6i64 {
        let peak = (l as f64 / 2.0).sqrt();
        let f = |r| radial_profile(l, r);
        assert!(f(peak) > f(peak - 1e-3) && f(peak) > f(peak + 1e-3), "l={l}");
    }
    for (l, lp) in [(1, 2), (0, 3), (2, 5)] {
        let ratio = |r: f64| radial_profile(l, r) / radial_profile(lp, r);
        assert!(ratio(20.0) < ratio(10.0) && ratio(10.0) < ratio(5.0));
        assert!(ratio(20.0) < 0.1);
        let inv = |r: f64| radial_profile(lp, r) / radial_profile(l, r);
        assert!(inv(20.0) > inv(10.0));
    }
}

#[test]
fn dependency_rank_is_stable() {
    for range in 3..=5 {
        assert_eq!(dependency_scan(range, FormSet::Printed).unwrap().rank, 9, "range {range}");
    }
}

#[test]
fn separable_state_is_trivial() {
    let state = make_state(&[-1, 0, 1], vec![cz(1.0, 0.0), cz(0.0, 0.0), cz(0.0, 0.0)]).unwrap();
    let s = compute_spectrum(&state, Mode::Canonical18, &SpectrumOptions::default()).unwrap();
    assert!(s.entries.iter().all(|e| e.trivial), "{:?}", s.glued());
}

#[test]
fn orthogonal_states_share_a_spectrum() {
    let w = Complex64::from_polar(1.0, TAU / 3.0);
    let a = make_state(&[-1, 0, 1], vec![cz(1.0, 0.0); 3]).unwrap();
    let b = make_state(&[-1, 0, 1], vec![cz(1.0, 0.0), w, w * w]).unwrap();
    let overlap: Complex64 = a.c.iter().zip(&b.c).map(|(x, y)| x.conj() * y).sum();
    assert!(overlap.norm() < 1e-12);
    let opts = SpectrumOptions::default();
    let sa = compute_spectrum(&a, Mode::Canonical18, &opts).unwrap();
    let sb = compute_spectrum(&b, Mode::Canonical18, &opts).unwrap();
    for (x, y) in sa.entries.iter().zip(&sb.entries) {
        assert!((x.glued - y.glued).abs() < 0.05, "{}: {} vs {}", x.label, x.glued, y.glued);
    }
}

#[test]
fn swapping_photons_flips_the_spectrum() {
    let state = make_state(&[-1, 0, 2], vec![cz(1.0, 0.0); 3]).unwrap();
    let plain = compute_spectrum(&state, Mode::Canonical18, &SpectrumOptions::default()).unwrap();
    let opts = SpectrumOptions {
        swap_photons: true,
        ..Default::default()
    };
    let swapped = compute_spectrum(&state, Mode::Canonical18, &opts).unwrap();
    for (x, y) in plain.entries.iter().zip(&swapped.entries) {
        assert!((x.glued + y.glued).abs() < 0.05, "{}: {} vs {}", x.label, x.glued, y.glued);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unit_field_identities(
        l in distinct3(),
        c in amplitudes3(),
        label in 0usize..18,
        fix in any::<bool>(),
        pts in prop::collection::vec((-6.0f64..6.0, 0.0f64..TAU), 20),
    ) {
        let dn = density(&l, c);
        let spec = TripleSpec::parse(CANONICAL_LABELS[label], 3).unwrap();
        let Ok(field) = triple_field(&dn, &spec, fix, None) else { return Ok(()) };
        for (u, phi) in pts {
            if let Some(s) = field.sample_u(u, phi) {
                prop_assert!((dot(&s.s, &s.s) - 1.0).abs() < 1e-10);
                prop_assert!(dot(&s.s, &s.ds_dx).abs() < 1e-10 * (1.0 + dot(&s.ds_dx, &s.ds_dx).sqrt()));
                prop_assert!(dot(&s.s, &s.ds_dphi).abs() < 1e-10 * (1.0 + dot(&s.ds_dphi, &s.ds_dphi).sqrt()));
            }
        }
    }

    #[test]
    fn analytic_partials_match_differences(
        l in distinct3(),
        c in amplitudes3(),
        label in 0usize..18,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let dn = density(&l, c);
        let spec = TripleSpec::parse(CANONICAL_LABELS[label], 3).unwrap();
        let Ok(field) = triple_field(&dn, &spec, false, None) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-5;
        for _ in 0..100 {
            let (r, phi) = (rng.random_range(0.3..3.0), rng.random_range(0.0..TAU));
            let Some(s) = field.sample(r, phi) else { continue };
            // five-point central stencil
            let stencil = |g: &dyn Fn(f64) -> Option<[f64; 3]>| -> Option<[f64; 3]> {
                let (a, b, c, d) = (g(2.0 * h)?, g(h)?, g(-h)?, g(-2.0 * h)?);
                Some([0, 1, 2].map(|k| (-a[k] + 8.0 * b[k] - 8.0 * c[k] + d[k]) / (12.0 * h)))
            };
            let (Some(fr), Some(fp)) = (
                stencil(&|dx| field.sample(r + dx, phi).map(|x| x.s)),
                stencil(&|dx| field.sample(r, phi + dx).map(|x| x.s)),
            ) else { continue };
            let nr = dot(&s.ds_dx, &s.ds_dx).sqrt();
            let np = dot(&s.ds_dphi, &s.ds_dphi).sqrt();
            for k in 0..3 {
                prop_assert!((fr[k] - s.ds_dx[k]).abs() <= 1e-6 * nr.max(1e-3), "dr {} vs {}", fr[k], s.ds_dx[k]);
                prop_assert!((fp[k] - s.ds_dphi[k]).abs() <= 1e-6 * np.max(1e-3), "dphi {} vs {}", fp[k], s.ds_dphi[k]);
            }
        }
    }

    #[test]
    fn nice_pair_coordinated_signs(
        l in distinct3(),
        c in amplitudes3(),
        label in 0usize..18,
        pts in prop::collection::vec((0.05f64..4.0, 0.0f64..TAU), 20),
    ) {
        let spec = TripleSpec::parse(CANONICAL_LABELS[label], 3).unwrap();
        let Some(slots) = spec.nice_pair(3) else { return Ok(()) };
        let dn = density(&l, c);
        let Ok(field) = triple_field(&dn, &spec, true, None) else { return Ok(()) };
        for (r, phi) in pts {
            if let Some(s) = field.sample(r, phi) {
                let lhs = s.s[slots.sym] * s.ds_dx[slots.anti];
                let rhs = s.s[slots.anti] * s.ds_dx[slots.sym];
                prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn usual_triples_rotate_azimuthally(
        d in 2usize..=5,
        seed in any::<u64>(),
        pts in prop::collection::vec((0.1f64..3.0, 0.0f64..TAU), 10),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut l: Vec<i64> = Vec::new();
        while l.len() < d {
            let x = rng.random_range(-6..=6);
            if !l.contains(&x) {
                l.push(x);
            }
        }
        let c: Vec<Complex64> = (0..d).map(|_| cz(rng.random_range(0.2..1.5), rng.random_range(-1.0..1.0))).collect();
        let dn = density(&l, c);
        for (_, root) in nice_pairs(d).unwrap() {
            let dl = (l[root.row] - l[root.col]) as f64;
            let mx = component_field(&dn, &Axis::Index(root.nice_pair.0)).unwrap();
            let my = component_field(&dn, &Axis::Index(root.nice_pair.1)).unwrap();
            let mz = component_field(&dn, &Axis::Combo(root.cartan_axis())).unwrap();
            for &(r, phi) in &pts {
                let scale = mx.value(r, phi).abs() + my.value(r, phi).abs() + 1e-300;
                prop_assert!((mx.partials(r, phi).1 - dl * my.value(r, phi)).abs() < 1e-10 * scale * (1.0 + dl.abs()));
                prop_assert!((my.partials(r, phi).1 + dl * mx.value(r, phi)).abs() < 1e-10 * scale * (1.0 + dl.abs()));
                prop_assert!(mz.partials(r, phi).1.abs() < 1e-12 * (1.0 + mz.value(r, phi).abs()));
            }
        }
    }

    #[test]
    fn zero_perturbation_is_identity(
        l in distinct3(),
        c in amplitudes3(),
        pts in prop::collection::vec((0.01f64..4.0, 0.0f64..TAU), 10),
    ) {
        let state = make_state(&l, c).unwrap();
        let plain = SpatialDensity::from_state(&state);
        let field = inject_subspace(&state, &SubspacePerturbation::zero(3)).unwrap();
        let pert = SpatialDensity::from_perturbed(&field);
        for a in 1..=8 {
            let x = component_field(&plain, &Axis::Index(a)).unwrap();
            let y = component_field(&pert, &Axis::Index(a)).unwrap();
            for &(r, phi) in &pts {
                prop_assert_eq!(x.value(r, phi), y.value(r, phi));
            }
        }
    }

    #[test]
    fn total_derivative_matches_quadrature(
        l in distinct3(),
        c in amplitudes3(),
        label in 0usize..18,
    ) {
        let spec = TripleSpec::parse(CANONICAL_LABELS[label], 3).unwrap();
        prop_assume!(spec.nice_pair(3).is_some());
        let dn = density(&l, c);
        let Ok(field) = triple_field(&dn, &spec, false, None) else { return Ok(()) };
        let Ok(w) = wrapping_numeric(&field, false) else { return Ok(()) };
        let boundary = total_derivative_estimate(&field, &spec, 3).unwrap();
        prop_assert!((w.raw - boundary).abs() < 5e-3, "quadrature {} vs boundary {boundary}", w.raw);
    }

    #[test]
    fn monopole_forms_agree(seed in any::<u64>(), waves in 1usize..6, kmax in 1i32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = TrigField::random(&mut rng, waves, kmax);
        let (a, b) = (charge_area_form(&f, 40), charge_planar_form(&f, 40));
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn similarity_properties(
        a in prop::collection::vec(-5.0f64..5.0, 18),
        e in prop::collection::vec(-5.0f64..5.0, 18),
        k in 0.1f64..10.0,
    ) {
        prop_assume!(a.iter().any(|x| x.abs() > 1e-6) && e.iter().any(|x| x.abs() > 1e-6));
        let same = similarity(&a, &a).unwrap();
        prop_assert_eq!(same.cosine, 1.0);
        prop_assert_eq!(same.residual, 1.0);
        let ae = similarity(&a, &e).unwrap();
        let ea = similarity(&e, &a).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ae.cosine));
        prop_assert!((ae.cosine - ea.cosine).abs() < 1e-12);
        let scaled: Vec<f64> = e.iter().map(|x| x * k).collect();
        prop_assert!((similarity(&a, &scaled).unwrap().cosine - ae.cosine).abs() < 1e-12);
    }
}

fn no_magnitude_ties(l: &[i64; 3]) -> bool {
    let m = l.map(i64::abs);
    m[0] != m[1] && m[1] != m[2] && m[0] != m[2] && (0..3).all(|i| 2 * m[i] != m[(i + 1) % 3] + m[(i + 2) % 3])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectrum_is_scale_invariant(
        l in distinct3().prop_filter("no magnitude ties", no_magnitude_ties),
        s in amplitudes3(),
    ) {
        let state = make_state(&l, vec![cz(1.0, 0.0); 3]).unwrap();
        let opts = SpectrumOptions::default();
        let base = compute_spectrum(&state, Mode::Canonical18, &opts).unwrap();
        let scaled = compute_spectrum(&state.rescaled(&s).unwrap(), Mode::Canonical18, &opts).unwrap();
        for (x, y) in base.entries.iter().zip(&scaled.entries) {
            prop_assert!((x.glued - y.glued).abs() < 0.05, "{}: {} vs {}", x.label, x.glued, y.glued);
        }
    }

    #[test]
    fn chi2_descends_and_zero_threshold_is_identity(seed in any::<u64>(), noisy in any::<bool>()) {
        let l = [-1, 0, 2];
        let set = projection_set(3, &l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = make_state(&l, topospec::tomography::haar_amplitudes(3, &mut rng)).unwrap();
        let rho = pure_density(&state);
        let noise = if noisy { Noise::Poisson } else { Noise::None };
        let counts = simulate_coincidences(&rho, &set, 1e4, noise, seed).unwrap();
        let rec = reconstruct(&counts, &set, 0.0, &ReconstructOptions::default()).unwrap();
        prop_assert!(rec.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*rec.history.last().unwrap(), rec.chi2);
        prop_assert_eq!(rec.thresholded, 0);
    }

    #[test]
    fn metric_ranges(seed in any::<u64>(), d in 2usize..=3) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = d * d;
        let g = CMatrix::from_fn(n, n, |_, _| cz(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let a = &g.adjoint() * &g;
        let a = &a / a.trace();
        let h = CMatrix::from_fn(n, n, |_, _| cz(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let b = &h.adjoint() * &h;
        let b = &b / b.trace();
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        let p = purity(&a);
        prop_assert!(p >= 1.0 / (n as f64) - 1e-12 && p <= 1.0 + 1e-12);
        if d == 2 {
            let c = concurrence(&a).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        }
        let m = metrics(&a, &b).unwrap();
        prop_assert_eq!(m.fidelity, f);
        // commuting inputs: diagonal states
        let da = CMatrix::from_diagonal(&a.diagonal());
        let db = CMatrix::from_diagonal(&b.diagonal());
        prop_assert!((fidelity(&da, &db).unwrap() - fidelity(&db, &da).unwrap()).abs() < 1e-12);
    }
}
