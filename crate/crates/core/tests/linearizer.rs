use weblin::corpus::case;
use weblin::invariants::ZeroTestPolicy;
use weblin::linearizer::straight::foliations;
use weblin::linearizer::{
    build_connection, flatness_residual, integrate_lambda, linearize, straightness_report, svg,
    Linearization, LinearizeOptions, ScalarField,
};

fn run(id: u8, opts: &LinearizeOptions) -> Linearization {
    let web = case(id).unwrap().web();
    linearize(&web, opts, &ZeroTestPolicy::default()).unwrap()
}

fn gauge(l1: f64, l2: f64) -> LinearizeOptions {
    LinearizeOptions {
        lambda0: (l1, l2),
        ..Default::default()
    }
}

#[test]
fn example_three_straightens() {
    let lin = run(3, &LinearizeOptions::default());
    for s in &lin.result.straightness {
        assert!(s.residual < 1e-6, "{s:?}");
        assert_eq!(s.skipped, 0);
    }
}

#[test]
fn example_six_straightens_for_n_two() {
    let mut opts = LinearizeOptions::default();
    opts.params.insert("n".into(), 2.0);
    let lin = run(6, &opts);
    assert_eq!(lin.result.straightness.len(), 4);
    for s in &lin.result.straightness {
        assert!(s.residual < 1e-5, "{s:?}");
    }
}

#[test]
fn gauge_choice_changes_coordinates_not_straightness() {
    let a = run(2, &LinearizeOptions::default());
    let mut opts = gauge(0.1, -0.1);
    opts.grid = 81;
    let b = run(2, &opts);
    let g = a.result.grid;
    let far = (g.nx - 1, g.ny - 1);
    let fine = b.result.grid;
    let far_b = (fine.nx - 1, fine.ny - 1);
    assert!((a.result.u.at(far.0, far.1) - b.result.u.at(far_b.0, far_b.1)).abs() > 1e-3);
    for lin in [&a, &b] {
        assert!(
            lin.result.max_straightness() < 1e-5,
            "{:?}",
            lin.result.straightness
        );
    }
}

fn affine_image(lin: &Linearization, m: [[f64; 2]; 2], t: (f64, f64)) -> Linearization {
    let mut out = lin.clone();
    let r = &mut out.result;
    let map = |a: &ScalarField, b: &ScalarField, row: [f64; 2], shift: f64| ScalarField {
        grid: a.grid,
        values: a
            .values
            .iter()
            .zip(&b.values)
            .map(|(p, q)| row[0] * p + row[1] * q + shift)
            .collect(),
    };
    let (u, v) = (lin.result.u.clone(), lin.result.v.clone());
    let [ux, uy, vx, vy] = lin.result.gradient.clone();
    r.u = map(&u, &v, m[0], t.0);
    r.v = map(&u, &v, m[1], t.1);
    r.gradient = [
        map(&ux, &vx, m[0], 0.0),
        map(&uy, &vy, m[0], 0.0),
        map(&ux, &vx, m[1], 0.0),
        map(&uy, &vy, m[1], 0.0),
    ];
    out
}

fn residuals(lin: &Linearization, id: u8) -> Vec<f64> {
    let web = case(id).unwrap().web();
    straightness_report(&lin.result, &web, 9, &Default::default())
        .unwrap()
        .foliations
        .iter()
        .map(|s| s.residual)
        .collect()
}

#[test]
fn similarity_leaves_straightness_unchanged() {
    let lin = run(2, &gauge(0.2, -0.2));
    let before = residuals(&lin, 2);
    let (c, s) = (0.6f64.cos() * 3.0, 0.6f64.sin() * 3.0);
    let moved = affine_image(&lin, [[c, -s], [s, c]], (5.0, -2.0));
    let after = residuals(&moved, 2);
    for (a, b) in before.iter().zip(&after) {
        assert!((a - b).abs() <= 1e-9 * a + 1e-13, "{a} vs {b}");
    }
}

#[test]
fn affine_map_keeps_straight_leaves_straight() {
    let lin = run(3, &LinearizeOptions::default());
    let moved = affine_image(&lin, [[2.0, 0.7], [-0.3, 0.5]], (1.0, 1.0));
    for r in residuals(&moved, 3) {
        assert!(r < 1e-6, "{r}");
    }
}

#[test]
fn negative_control_stays_curved() {
    let opts = LinearizeOptions {
        force: true,
        ..Default::default()
    };
    let lin = run(5, &opts);
    assert!(lin.check.is_none());
    assert!(
        lin.result.max_straightness() > 1e-2,
        "{:?}",
        lin.result.straightness
    );
    assert!(lin.result.path_independence_residual > 1e-3);
}

#[test]
fn refinement_shrinks_residuals() {
    let web = case(1).unwrap().web();
    let coarse = gauge(0.5, -0.5);
    let fine = LinearizeOptions {
        grid: 81,
        ..coarse.clone()
    };
    let flat = |o: &LinearizeOptions| {
        let s = integrate_lambda(&web, o).unwrap();
        let c = build_connection(&s.lambda1, &s.lambda2, &s.coefficients);
        (flatness_residual(&c, &s.coefficients), s.path_discrepancy)
    };
    let (f41, d41) = flat(&coarse);
    let (f81, d81) = flat(&fine);
    assert!(f41 / f81 >= 3.5, "{f41} {f81}");
    assert!(d41 / d81 >= 3.5, "{d41} {d81}");
    let straight = |o: &LinearizeOptions| {
        let o = LinearizeOptions {
            force: true,
            ..o.clone()
        };
        linearize(&web, &o, &ZeroTestPolicy::default())
            .unwrap()
            .result
            .max_straightness()
    };
    let (s41, s81) = (straight(&coarse), straight(&fine));
    assert!(s41 / s81 >= 3.5, "{s41} {s81}");
}

#[test]
fn runs_are_deterministic() {
    let a = run(4, &gauge(0.1, 0.2));
    let b = run(4, &gauge(0.1, 0.2));
    assert_eq!(a.result.u, b.result.u);
    assert_eq!(a.result.v, b.result.v);
    assert_eq!(a.result.straightness, b.result.straightness);
}

#[test]
fn svg_has_a_group_per_foliation() {
    let lin = run(2, &LinearizeOptions::default());
    let web = case(2).unwrap().web();
    let names: Vec<String> = foliations(&web).into_iter().map(|(n, _)| n).collect();
    let text = svg::render(&lin.result.grid, &lin.leaves, &names);
    assert_eq!(text.matches("class=\"foliation\"").count(), 2 * names.len());
    assert_eq!(text.matches("<polyline").count(), 2 * lin.leaves.len());
}

#[test]
fn thread_count_does_not_change_results() {
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let web = case(4).unwrap().web();
    let opts = gauge(0.1, 0.2);
    let run_with = |n| {
        pool(n).install(|| {
            let lin = linearize(&web, &opts, &ZeroTestPolicy::default()).unwrap();
            let check = weblin::invariants::check_dweb(&web, &ZeroTestPolicy::default()).unwrap();
            let evidence: Vec<String> = check
                .reports
                .iter()
                .flat_map(|r| r.evidence.iter().map(|e| e.residual.to_decimal()))
                .collect();
            (
                lin.result.u,
                lin.result.v,
                lin.result.straightness,
                evidence,
            )
        })
    };
    assert_eq!(run_with(1), run_with(4));
}
