use std::f64::consts::PI;
use std::sync::Arc;

use phasefield::config::Config;
use phasefield::diagnostics::{energy_series_ok, l1_error};
use phasefield::experiments::random_perturbed;
use phasefield::grid::{
    apply_biharmonic, apply_laplacian, divergence, forward_transform, gradient, inverse_transform, Field, SpectralGrid,
};
use phasefield::models::{eval_rhs, mass, ModelPreset, PhaseFieldModel};
use phasefield::snapshot::{decode_snapshot, encode_snapshot};
use phasefield::splitting::{apply_f_ex, apply_f_im, implicit_solve, resolve_m2, SplitConfig};
use phasefield::steppers::{Integrator, SchemeConfig, SchemeKind};
use proptest::prelude::*;

fn grid(dim: usize, n: usize, len: f64) -> Arc<SpectralGrid> {
    SpectralGrid::new(&vec![n; dim], &vec![len; dim]).unwrap()
}

/// `(dim, n)` with at most 2¹⁵ points.
fn shape() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![
        (3u32..=8).prop_map(|p| (1, 1usize << p)),
        (3u32..=7).prop_map(|p| (2, 1usize << p)),
        (3u32..=5).prop_map(|p| (3, 1usize << p)),
    ]
}

fn noise(g: &Arc<SpectralGrid>, seed: u64) -> Field {
    random_perturbed(g, 0.0, 1.0, seed)
}

/// Smooth positive field built from a few low modes.
fn smooth(g: &Arc<SpectralGrid>, mean: f64, amp: f64, seed: u64) -> Field {
    let phases: Vec<f64> = (0..6)
        .map(|i| ((seed as f64 + 1.3) * (i as f64 + 0.7)).sin() * PI)
        .collect();
    let l = g.length().to_vec();
    Field::from_fn(g, |x| {
        let mut s = 0.0;
        for (a, xa) in x.iter().enumerate() {
            let k = 2.0 * PI / l[a];
            s += (k * xa + phases[2 * a]).cos() + 0.5 * (2.0 * k * xa + phases[2 * a + 1]).sin();
        }
        mean + amp * s / (1.5 * x.len() as f64)
    })
}

fn rel_close(a: &Field, b: &Field, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol * a.max_abs().max(b.max_abs()).max(1e-300)
}

fn presets() -> Vec<(ModelPreset, f64, f64)> {
    vec![
        (ModelPreset::ClassicCh { epsilon: 0.05 }, 0.0, 0.6),
        (ModelPreset::ThinFilm { epsilon: 0.1 }, 0.5, 0.3),
        (
            ModelPreset::Chvm {
                omega: 0.95,
                epsilon: 0.1,
            },
            0.3,
            0.5,
        ),
    ]
}

fn all_schemes() -> Vec<SchemeConfig> {
    [
        SchemeKind::Be { j: 1 },
        SchemeKind::Be { j: 3 },
        SchemeKind::Cn { j: 1 },
        SchemeKind::Cn { j: 2 },
        SchemeKind::Imex1,
        SchemeKind::Imex2,
    ]
    .into_iter()
    .map(SchemeConfig::new)
    .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip((dim, n) in shape(), seed in any::<u64>(), len in 1.0f64..40.0) {
        let g = grid(dim, n, len);
        let f = noise(&g, seed);
        let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
        prop_assert!(rel_close(&f, &back, 1e-12));
    }

    #[test]
    fn operators_are_linear(
        (dim, n) in shape(),
        s1 in any::<u64>(),
        s2 in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let g = grid(dim, n, 2.0 * PI);
        let (f, h) = (noise(&g, s1), noise(&g, s2));
        let comb = f.lin_comb(a, &h, b);
        for op in [apply_laplacian, apply_biharmonic] {
            let lhs = op(&comb).unwrap();
            let rhs = op(&f).unwrap().lin_comb(a, &op(&h).unwrap(), b);
            prop_assert!(rel_close(&lhs, &rhs, 1e-11));
        }
        let grads = gradient(&comb).unwrap();
        let (gf, gh) = (gradient(&f).unwrap(), gradient(&h).unwrap());
        for ((l, x), y) in grads.iter().zip(&gf).zip(&gh) {
            prop_assert!(rel_close(l, &x.lin_comb(a, y, b), 1e-11));
        }
    }

    #[test]
    fn single_modes_are_eigenfunctions((dim, n) in shape(), len in 1.0f64..40.0, pick in any::<u64>()) {
        let g = grid(dim, n, len);
        let j: Vec<f64> = (0..dim)
            .map(|a| ((pick >> (8 * a)) % (n as u64 / 2)) as f64)
            .collect();
        let k: Vec<f64> = j.iter().map(|&j| 2.0 * PI * j / len).collect();
        let f = Field::from_fn(&g, |x| x.iter().zip(&k).map(|(x, k)| k * x).sum::<f64>().cos());
        let k2: f64 = k.iter().map(|k| k * k).sum();
        let lap = apply_laplacian(&f).unwrap();
        let bih = apply_biharmonic(&f).unwrap();
        // Sampling roundoff of `f` reaches every mode and is amplified by the
        // largest symbol on the grid.
        let scale = g.ksq().iter().fold(1.0f64, |m, &v| m.max(v));
        prop_assert!(lap.max_abs_diff(&f.map(|v| -k2 * v)) <= 1e-12 * scale);
        prop_assert!(bih.max_abs_diff(&f.map(|v| k2 * k2 * v)) <= 1e-12 * scale * scale);
    }

    #[test]
    fn divergence_has_zero_mean((dim, n) in shape(), seed in any::<u64>()) {
        let g = grid(dim, n, 3.0);
        let v: Vec<Field> = (0..dim).map(|a| noise(&g, seed.wrapping_add(a as u64))).collect();
        let d = divergence(&v).unwrap();
        let mag = v.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        prop_assert!(d.mean().abs() <= 1e-13 * mag.max(1.0));
    }

    #[test]
    fn rhs_is_mean_free(seed in any::<u64>(), n in prop_oneof![Just(16usize), Just(32)]) {
        let g = grid(2, n, 4.0 * PI);
        for (model, mean, amp) in presets() {
            let u = smooth(&g, mean, amp, seed);
            let f = eval_rhs(&model, &u, 0.0).unwrap();
            prop_assert!(f.mean().abs() <= 1e-12 * f.max_abs().max(1.0), "{}", model.name());
        }
    }

    #[test]
    fn g_derivative_is_mobility_times_w2(x in 0.0f64..1.0) {
        for (model, _, _) in presets() {
            let (lo, hi) = model.admissible_range();
            let (lo, hi) = (lo.max(-1.0) + 0.05, hi.min(2.0) - 0.05);
            let u = lo + x * (hi - lo);
            let d = 1e-5;
            let fd = (model.g_fun(u + d) - model.g_fun(u - d)) / (2.0 * d);
            let exact = model.mobility(u) * model.potential_second(u);
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{} u={u}", model.name());
        }
    }

    #[test]
    fn split_parts_sum_to_rhs(
        seed in any::<u64>(),
        m0 in 0.0f64..1.0,
        m1 in 0.0f64..5.0,
        m2 in 0.0f64..3.0,
    ) {
        let g = grid(2, 16, 6.0 * PI);
        let cfg = SplitConfig { m0, m1, ..SplitConfig::fixed(m2) };
        for (model, mean, amp) in presets() {
            let u = smooth(&g, mean, amp, seed);
            let f = eval_rhs(&model, &u, 0.0).unwrap();
            let sum = apply_f_im(&cfg, m2, &u).unwrap().lin_comb(1.0, &apply_f_ex(&cfg, m2, &model, &u, 0.0).unwrap(), 1.0);
            let scale = f.max_abs().max(apply_f_im(&cfg, m2, &u).unwrap().max_abs());
            prop_assert!(sum.max_abs_diff(&f) <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn implicit_solve_inverts_and_keeps_mean(
        (dim, n) in shape(),
        seed in any::<u64>(),
        m1 in 0.0f64..5.0,
        m2 in 0.0f64..3.0,
        w in 0.1f64..1.0,
        h in 1e-4f64..10.0,
    ) {
        let g = grid(dim, n, 2.0 * PI);
        let cfg = SplitConfig::fixed(m2).with_m1(m1);
        let v = noise(&g, seed);
        let rhs = v.lin_comb(1.0, &apply_f_im(&cfg, m2, &v).unwrap(), -h * w);
        let back = implicit_solve(&cfg, m2, &rhs, w, h).unwrap();
        // Forming `rhs` already rounds at the scale of |rhs|, which exceeds
        // |v| by the stiffness ratio h·m2·k⁴.
        let scale = v.max_abs().max(rhs.max_abs());
        prop_assert!(back.max_abs_diff(&v) <= 1e-12 * scale);
        prop_assert!((back.mean() - rhs.mean()).abs() <= 1e-13 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn dynamic_m2_is_monotone(a1 in 0.01f64..3.0, a2 in 0.01f64..3.0, c1 in 0.1f64..1.0, c2 in 0.1f64..1.0) {
        let g = grid(1, 8, 1.0);
        let model = ModelPreset::ThinFilm { epsilon: 0.1 };
        let m = |a: f64, c: f64| resolve_m2(&SplitConfig::dynamic(a), &model, &Field::constant(&g, c)).unwrap();
        let (lo, hi) = (a1.min(a2), a1.max(a2));
        prop_assert!(m(lo, c1) <= m(hi, c1));
        let (clo, chi) = (c1.min(c2), c1.max(c2));
        prop_assert!(m(a1, clo) <= m(a1, chi));
    }

    #[test]
    fn energy_check_is_monotone_in_tol(
        e in prop::collection::vec(-10.0f64..10.0, 2..20),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        prop_assert!(!energy_series_ok(&e, lo) || energy_series_ok(&e, hi));
    }

    #[test]
    fn l1_error_is_a_metric(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let g = grid(2, 16, 5.0);
        let (a, b, c) = (noise(&g, s1), noise(&g, s2), noise(&g, s3));
        let d = |x: &Field, y: &Field| l1_error(x, y).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12 * d(&a, &c));
    }

    #[test]
    fn random_perturbed_is_seeded(seed in any::<u64>(), mean in -1.0f64..1.0, eta in 0.0f64..0.5) {
        let g = grid(2, 8, 1.0);
        let a = random_perturbed(&g, mean, eta, seed);
        let b = random_perturbed(&g, mean, eta, seed);
        prop_assert_eq!(a.values(), b.values());
        prop_assert!(a.values().iter().all(|v| (v - mean).abs() <= eta));
    }

    #[test]
    fn snapshot_round_trip((dim, n) in shape(), seed in any::<u64>(), t in -1e3f64..1e3) {
        let g = grid(dim, n, 7.0);
        let f = noise(&g, seed);
        let s = decode_snapshot(&encode_snapshot(&f, t, "thin_film").unwrap()).unwrap();
        prop_assert_eq!(s.header.t, t);
        prop_assert_eq!(s.field.values(), f.values());
    }

    #[test]
    fn config_round_trip_is_canonical(
        seed in 0..=i64::MAX as u64,
        eps in 0.01f64..1.0,
        n in prop_oneof![Just(16usize), Just(64)],
        h in 1e-4f64..1.0,
        m2 in 0.0f64..10.0,
        tol in 1e-14f64..1e-6,
    ) {
        let text = format!(
            "experiment = \"simulate\"\nseed = {seed}\n\n[model]\npreset = \"thin_film\"\nepsilon = {eps:?}\n\n\
             [grid]\nn = [{n}, {n}]\nlength_pi = [12.0, 12.0]\n\n[ic]\nkind = \"cosine_perturbed\"\nmean = 0.35\namp = 0.1\n\n\
             [run]\nscheme = \"imex2\"\nh = {h:?}\nt_end = 1.0\nenergy_tol = {tol:?}\n\n[split]\nm2 = {{ static = {m2:?} }}\n"
        );
        let cfg = Config::from_toml(&text).unwrap();
        let canon = cfg.to_toml();
        let again = Config::from_toml(&canon).unwrap();
        prop_assert_eq!(again.to_toml(), canon);
        prop_assert_eq!(again.seed, seed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn unforced_steps_conserve_mass(seed in any::<u64>(), h in 1e-3f64..0.5) {
        let g = grid(2, 16, 6.0 * PI);
        let model = ModelPreset::ThinFilm { epsilon: 0.1 };
        let u0 = smooth(&g, 0.5, 0.2, seed);
        for scheme in all_schemes() {
            let integ = Integrator { scheme, split: SplitConfig::dynamic(1.0), model: &model };
            let mut u = u0.clone();
            let mut prev = None;
            for _ in 0..20 {
                let next = integ.step(&u, prev.as_ref(), 0.0, h).unwrap().u_next;
                prev = Some(std::mem::replace(&mut u, next));
            }
            let (m0, m1) = (mass(&u0), mass(&u));
            prop_assert!((m1 - m0).abs() <= 1e-11 * (1.0 + m0.abs()), "{}", scheme.label());
        }
    }
}

#[test]
fn swap_symmetric_data_stays_symmetric() {
    let g = grid(2, 32, 6.0 * PI);
    let model = ModelPreset::ThinFilm { epsilon: 0.1 };
    let u0 = Field::from_fn(&g, |x| {
        0.5 + 0.1 * ((x[0] / 3.0).cos() * (x[1] / 3.0).cos()) + 0.05 * ((x[0] + x[1]) / 3.0).sin()
    });
    let swap = |f: &Field| {
        let mut out = f.clone();
        for i in 0..32 {
            for j in 0..32 {
                out.values_mut()[i * 32 + j] = f.values()[j * 32 + i];
            }
        }
        out
    };
    for scheme in all_schemes() {
        let integ = Integrator {
            scheme,
            split: SplitConfig::dynamic(1.0),
            model: &model,
        };
        let mut u = u0.clone();
        for _ in 0..100 {
            u = integ.step(&u, None, 0.0, 0.05).unwrap().u_next;
        }
        assert!(u.max_abs_diff(&swap(&u)) <= 1e-10, "{}", scheme.label());
    }
}
