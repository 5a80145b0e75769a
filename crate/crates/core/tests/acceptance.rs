//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! hard failure.

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modewitness::cluster::{cluster_witness_table, optimize_cluster};
use modewitness::fock::{
    apply_passive_unitary, apply_passive_unitary_density, apply_loss, squeezed_vacuum, subtract_photon_at_angles,
    FockBasis, PureState, QuantumState,
};
use modewitness::generators::{build_generator_set, full_count, local_count, Partition};
use modewitness::homodyne::{
    analytic_fisher, default_settings, hellinger_replicates, homodyne_problem, homodyne_witness,
    marginal_distribution, KappaSchedule, MeasurementSetting,
};
use modewitness::mode_basis::{clements_orthogonal, lift, lift_matrix, BasisChange};
use modewitness::optimize::OptimizerConfig;
use modewitness::recipe::Recipe;
use modewitness::sweep::{critical_eta, witness_at_eta, witness_of_state, CriticalEta};
use modewitness::witness::{default_config, state_moments, WitnessProblem};

struct Outcome {
    id: &'static str,
    pass: bool,
    /// Soft parts are reported but do not fail the run.
    hard: bool,
    detail: String,
}

fn recipe(name: &str) -> Recipe {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../recipes").join(format!("{name}.json"));
    Recipe::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn report(out: &mut Vec<Outcome>, id: &'static str, pass: bool, hard: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let kind = if hard { "" } else { " (soft)" };
    println!("criterion {id}{kind}: {tag}  {detail}");
    out.push(Outcome { id, pass, hard, detail });
}

fn criterion_1(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let gens = build_generator_set(2, 2).unwrap();
    let mut listed: Vec<Vec<u8>> = vec![
        vec![1, 0, 0, 0],
        vec![0, 1, 0, 0],
        vec![0, 0, 1, 0],
        vec![0, 0, 0, 1],
        vec![2, 0, 0, 0],
        vec![0, 2, 0, 0],
        vec![0, 0, 2, 0],
        vec![0, 0, 0, 2],
        vec![1, 1, 0, 0],
        vec![1, 0, 1, 0],
        vec![1, 0, 0, 1],
        vec![0, 1, 1, 0],
        vec![0, 1, 0, 1],
        vec![0, 0, 1, 1],
    ];
    let mut got: Vec<Vec<u8>> = gens.generators().iter().map(|g| g.exponents().to_vec()).collect();
    listed.sort();
    got.sort();
    let mut ok = gens.len() == 14 && got == listed;
    let mut mismatches = Vec::new();
    for n in 1..=3 {
        for m in 1..=5 {
            let g = build_generator_set(n, m).unwrap();
            let enumerated = g.local_indices(&Partition::singletons(m)).unwrap().len();
            let formula = m * n * (n + 3) / 2;
            if enumerated != formula || local_count(n, m) != formula || full_count(n, m) != g.len() {
                mismatches.push((n, m));
            }
        }
    }
    ok &= mismatches.is_empty();
    let secs = t.elapsed().as_secs_f64();
    ok &= secs < 1.0;
    report(out, "1", ok, true, format!("ℓ(2,2) = {}, ℓ_loc mismatches {mismatches:?}, {secs:.3}s", gens.len()));
}

fn criterion_2(out: &mut Vec<Outcome>) {
    let gens = build_generator_set(3, 2).unwrap();
    let i = gens.index_of(&[2, 0, 1, 0]).unwrap();
    let l = gens.index_of(&[1, 1, 1, 0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let theta = rng.random_range(0.0..TAU);
        let u = lift(&clements_orthogonal(&[theta], &[0.0], 2).unwrap(), &gens).unwrap().u;
        worst = worst.max((u[(i, l)] - 2.0 * theta.cos().powi(2) * theta.sin()).abs());
    }
    report(out, "2", worst <= 1e-10, true, format!("max deviation {worst:.2e} over 20 angles"));
}

fn criterion_3(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let r = recipe("fig6");
    let state = r.build_state().unwrap();
    let part = Partition::singletons(2);
    let cfg = OptimizerConfig::default();
    let w2 = witness_of_state(&state, 2, &part, &cfg).unwrap().value;
    let gens1 = build_generator_set(1, 2).unwrap();
    let p1 = WitnessProblem::from_moments(&state_moments(&state, &gens1).unwrap(), &part).unwrap();
    let border = (0..64)
        .map(|k| p1.evaluate_params(&[0.0, TAU * k as f64 / 64.0]).unwrap())
        .fold(f64::INFINITY, f64::min);
    let w1 = witness_of_state(&state, 1, &part, &cfg).unwrap().value;
    let secs = t.elapsed().as_secs_f64();
    let ok = (w2 - 0.98).abs() <= 0.02 && border.abs() <= 1e-4 && w1.abs() <= 1e-4 && secs < 300.0 && r.cutoff == 12;
    report(
        out,
        "3",
        ok,
        true,
        format!("N=2 min {w2:.4}, N=1 θ=0 border min {border:.1e}, N=1 global min {w1:.1e}, {secs:.1}s"),
    );
}

fn criterion_4(out: &mut Vec<Outcome>) {
    let tables: [(&str, Vec<(&str, f64)>); 3] = [
        ("table1", vec![("1|2|3", 0.94), ("12|3", 0.0)]),
        ("table2", vec![("1|2|3|4", 0.87), ("12|3|4", 0.33), ("12|34", 0.33), ("1|234", 0.0)]),
        (
            "table3",
            vec![
                ("1|2|3|4|5", 0.92),
                ("12|3|4|5", 0.31),
                ("12|34|5", 0.31),
                ("123|4|5", 0.17),
                ("123|45", 0.17),
                ("1234|5", 0.0),
            ],
        ),
    ];
    let mut structure = true;
    let mut numeric = true;
    let mut budget = true;
    let mut lines = Vec::new();
    for (name, rows) in tables {
        let t = Instant::now();
        let r = recipe(name);
        let spec = r.cluster_spec().unwrap();
        let m = spec.modes();
        let cluster = optimize_cluster(&spec, &OptimizerConfig::genetic(1)).unwrap();
        let parts: Vec<Partition> = rows.iter().map(|(p, _)| Partition::parse(p, m).unwrap()).collect();
        let reports = cluster_witness_table(&cluster, &spec, &parts, &default_config(m, 7), &[1, 2, 3]).unwrap();
        let mut cells = Vec::new();
        for ((p, want), rep) in rows.iter().zip(&reports) {
            let w = rep.value;
            if *want == 0.0 {
                structure &= w.abs() < 1e-3;
            } else {
                structure &= w > 1e-3;
            }
            numeric &= (w - want).abs() <= 0.05;
            cells.push(format!("{p}={w:.3}({want})"));
        }
        let secs = t.elapsed().as_secs_f64();
        budget &= secs <= 3600.0;
        lines.push(format!("{m} modes [{}] {secs:.0}s", cells.join(" ")));
    }
    let detail = lines.join("; ");
    report(out, "4 structure", structure && budget, true, detail.clone());
    report(out, "4 values ±0.05", numeric, false, detail);
}

fn critical(psi: &PureState, order: usize) -> CriticalEta {
    let cfg = OptimizerConfig::default();
    let part = Partition::singletons(2);
    critical_eta(|e| witness_at_eta(psi, e, order, &part, &cfg), 0.01, 1e-3).unwrap()
}

fn criterion_5(out: &mut Vec<Outcome>) {
    let fam = recipe("fig7_family");
    let grid = fam.sweep.clone().unwrap();
    let mut ordered = true;
    let mut cells = Vec::new();
    for &a in &grid.angles {
        let psi = fam.with_subtraction_angle(grid.subtraction, a).unwrap().build_lossless().unwrap();
        let (c1, c2) = (critical(&psi, 1), critical(&psi, 2));
        let strictly = matches!(c2, CriticalEta::At(_) | CriticalEta::Below(_)) && c2.value() < c1.value();
        ordered &= strictly;
        cells.push(format!("{a:+.2}:{:.3}/{:.3}", c1.value(), c2.value()));
    }
    let fam8 = recipe("fig8_family");
    let g8 = fam8.sweep.clone().unwrap();
    let near: Vec<(f64, f64)> = [-0.30, -0.275, -0.25, -0.225, -0.20]
        .iter()
        .map(|&a| {
            let psi = fam8.with_subtraction_angle(g8.subtraction, a).unwrap().build_lossless().unwrap();
            (a, critical(&psi, 2).value())
        })
        .collect();
    let (best_angle, best) = near.iter().copied().fold((0.0, 1.0), |acc, x| if x.1 < acc.1 { x } else { acc });
    let resilient = (best - 0.05).abs() <= 0.05;
    report(
        out,
        "5",
        ordered && resilient,
        true,
        format!(
            "one-photon η_c N1/N2 [{}]; two-photon N=2 lowest η_c {best:.3} at Θ₂={best_angle}",
            cells.join(" ")
        ),
    );
}

struct HellingerRun {
    state: QuantumState,
    q: DMatrix<f64>,
    fishers: Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
}

fn criterion_7(out: &mut Vec<Outcome>) -> HellingerRun {
    let t = Instant::now();
    let r = recipe("fig10");
    let state = r.build_state().unwrap();
    let gens = build_generator_set(1, 2).unwrap();
    let part = Partition::singletons(2);
    let settings = default_settings(&state).unwrap();
    let moments = state_moments(&state, &gens).unwrap();
    let mut fishers = Vec::new();
    let mut replicates = Vec::new();
    let mut within = true;
    let mut worst_z: f64 = 0.0;
    for (k, s) in settings.iter().enumerate() {
        let exact = analytic_fisher(&state, &gens, s).unwrap().values;
        let dist = marginal_distribution(&state, s).unwrap();
        let est = hellinger_replicates(&dist, &gens, 1_000_000, 100, 10 + k as u64, &KappaSchedule::default()).unwrap();
        let sd = est.fisher.std_error.clone().unwrap();
        for (i, (&e, &h)) in exact.iter().zip(est.fisher.values.iter()).enumerate() {
            let d = (e - h).abs();
            within &= d <= 3.0 * sd[i] + 1e-12;
            if sd[i] > 0.0 {
                worst_z = worst_z.max(d / sd[i]);
            }
        }
        fishers.push((exact, est.fisher.values.clone(), sd));
        replicates.push(est.replicates);
    }
    // Witness maps: E per setting from every replicate, mean and SD per basis.
    let per_rep: Vec<Vec<WitnessProblem>> = replicates
        .iter()
        .map(|reps| {
            reps.iter()
                .map(|f| WitnessProblem::new(f.clone(), moments.cov.clone(), &gens, &part).unwrap())
                .collect()
        })
        .collect();
    let n = 24;
    let (mut q_pos, mut p_band_ok, mut p_max) = (0usize, true, f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            let x = [PI * i as f64 / n as f64, TAU * j as f64 / n as f64];
            let stats: Vec<(f64, f64)> = per_rep
                .iter()
                .map(|probs| {
                    let v: Vec<f64> = probs.iter().map(|p| p.evaluate_params(&x).unwrap()).collect();
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    let var = v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
                    (mean, var.sqrt())
                })
                .collect();
            let ((eq, _), (ep, sp)) = (stats[0], stats[1]);
            q_pos += usize::from(eq > 0.0);
            p_max = p_max.max(ep);
            p_band_ok &= ep - 3.0 * sp <= 0.0;
        }
    }
    let frac = q_pos as f64 / (n * n) as f64;
    let secs = t.elapsed().as_secs_f64();
    let ok = within && frac > 0.5 && p_band_ok && secs < 1800.0;
    report(
        out,
        "7",
        ok,
        true,
        format!(
            "Fisher within 3σ: {within} (max |Δ|/σ {worst_z:.2}); q-map positive on {:.1}% of bases; p-map max mean {p_max:.4}, non-positive within 3σ: {p_band_ok}; {secs:.0}s",
            100.0 * frac
        ),
    );
    HellingerRun {
        state,
        q: moments.qfi,
        fishers,
    }
}

fn gap(q: &DMatrix<f64>, f: &DMatrix<f64>) -> f64 {
    (q - f).symmetric_eigenvalues().min()
}

fn moved(state: &QuantumState, bc: &BasisChange) -> QuantumState {
    let u = bc.mode_unitary();
    match state {
        QuantumState::Pure(s) => apply_passive_unitary(s, &u).unwrap().into(),
        QuantumState::Mixed(r) => apply_passive_unitary_density(r, &u).unwrap().into(),
    }
}

fn criterion_6(out: &mut Vec<Outcome>, hell: &HellingerRun) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut parts = Vec::new();

    // (a) Q − F ⪰ 0, exact Fisher over random settings and the sampled one within 3σ.
    let mut a_ok = true;
    let mut a_worst = f64::INFINITY;
    let states: Vec<QuantumState> = ["fig5", "fig6", "fig9_top", "fig10"]
        .iter()
        .map(|n| recipe(n).build_state().unwrap())
        .collect();
    for state in &states {
        for order in 1..=2 {
            let gens = build_generator_set(order, 2).unwrap();
            let q = state_moments(state, &gens).unwrap().qfi;
            for _ in 0..5 {
                let phi = vec![rng.random_range(0.0..PI), rng.random_range(0.0..PI)];
                let f = analytic_fisher(state, &gens, &MeasurementSetting::adapted(state, phi).unwrap()).unwrap();
                let g = gap(&q, &f.values);
                a_worst = a_worst.min(g);
                a_ok &= g >= -1e-6 * q.amax().max(1.0);
            }
        }
    }
    let _ = &hell.state;
    for (_, mean, sd) in &hell.fishers {
        let g = gap(&hell.q, mean);
        a_ok &= g >= -(1e-6 + 3.0 * sd.norm());
    }
    parts.push(("a", a_ok, format!("λmin(Q−F) ≥ {a_worst:.1e}")));

    // (b) Q = 4Γ for pure states, evaluated through the density-matrix route.
    let mut b_worst: f64 = 0.0;
    for _ in 0..10 {
        let r = [rng.random_range(0.05..0.35), -rng.random_range(0.05..0.35)];
        let mut s = squeezed_vacuum(&r, 14).unwrap();
        for _ in 0..2 {
            s = subtract_photon_at_angles(&s, &[rng.random_range(0.0..TAU)]).unwrap().state;
        }
        let rho: QuantumState = s.to_density().unwrap().into();
        for order in 1..=2 {
            let mo = state_moments(&rho, &build_generator_set(order, 2).unwrap()).unwrap();
            b_worst = b_worst.max((&mo.qfi - &mo.cov * 4.0).amax() / mo.qfi.amax().max(1.0));
        }
    }
    parts.push(("b", b_worst <= 1e-7, format!("max |Q−4Γ| {b_worst:.1e}")));

    // (c) lift(O₁O₂) = lift(O₁)·lift(O₂).
    let mut c_worst: f64 = 0.0;
    for m in 2..=3 {
        let gens = build_generator_set(3, m).unwrap();
        for _ in 0..10 {
            let mut params = || (0..m * (m - 1)).map(|_| rng.random_range(0.0..TAU)).collect::<Vec<_>>();
            let o1 = BasisChange::from_params(&params(), m).unwrap().orthogonal();
            let o2 = BasisChange::from_params(&params(), m).unwrap().orthogonal();
            let lhs = lift_matrix(&(&o1 * &o2), &gens).unwrap();
            let rhs = lift_matrix(&o1, &gens).unwrap() * lift_matrix(&o2, &gens).unwrap();
            c_worst = c_worst.max((lhs - rhs).amax());
        }
    }
    parts.push(("c", c_worst <= 1e-9, format!("max deviation {c_worst:.1e}")));

    // (d) basis probing against physical re-simulation, 50 random bases.
    let mut d_worst: f64 = 0.0;
    let probe_states = [states[1].clone(), states[3].clone()];
    for k in 0..50 {
        let state = &probe_states[k % 2];
        let order = 1 + k % 4 / 2;
        let gens = build_generator_set(order, 2).unwrap();
        let part = Partition::singletons(2);
        let bc = BasisChange::from_params(&[rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)], 2).unwrap();
        let probed = WitnessProblem::from_moments(&state_moments(state, &gens).unwrap(), &part)
            .unwrap()
            .evaluate(&bc)
            .unwrap();
        let direct = WitnessProblem::from_moments(&state_moments(&moved(state, &bc), &gens).unwrap(), &part)
            .unwrap()
            .evaluate(&BasisChange::identity(2))
            .unwrap();
        d_worst = d_worst.max((probed - direct).abs());
    }
    parts.push(("d", d_worst <= 1e-6, format!("max deviation {d_worst:.1e}")));

    // (e) Gaussian states, every partition, N ≤ 2.
    let mut e_worst = f64::NEG_INFINITY;
    for m in 2..=3 {
        for _ in 0..2 {
            let r: Vec<f64> = (0..m).map(|_| rng.random_range(-0.25..0.25)).collect();
            let params: Vec<f64> = (0..m * (m - 1)).map(|_| rng.random_range(0.0..TAU)).collect();
            let psi = squeezed_vacuum(&r, if m == 2 { 14 } else { 13 }).unwrap();
            let u = BasisChange::from_params(&params, m).unwrap().mode_unitary();
            let state: QuantumState = apply_passive_unitary(&psi, &u).unwrap().into();
            for order in 1..=2 {
                for p in Partition::all_shapes(m) {
                    let cfg = if m == 2 { OptimizerConfig::default() } else { default_config(m, 3) };
                    e_worst = e_worst.max(witness_of_state(&state, order, &p, &cfg).unwrap().value);
                }
            }
        }
    }
    parts.push(("e", e_worst <= 1e-3, format!("max W {e_worst:.1e}")));

    // (f) product states seen from 200 random bases.
    let basis = FockBasis::shared(2, 10).unwrap();
    let mut f_worst = f64::NEG_INFINITY;
    for k in 0..200 {
        let r = [rng.random_range(0.05..0.3), -rng.random_range(0.05..0.3)];
        let psi = match k % 3 {
            0 => squeezed_vacuum(&r, 20).unwrap(),
            1 => subtract_photon_at_angles(&squeezed_vacuum(&r, 20).unwrap(), &[0.0]).unwrap().state,
            _ => PureState::number_state(basis.clone(), &[rng.random_range(0..3), rng.random_range(0..3)]).unwrap(),
        };
        let product: QuantumState = if k % 4 == 0 {
            apply_loss(&psi.into(), &[rng.random_range(0.5..1.0), 1.0]).unwrap().into()
        } else {
            psi.into()
        };
        let bc = BasisChange::from_params(&[rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)], 2).unwrap();
        let gens = build_generator_set(1 + k % 2, 2).unwrap();
        let e = WitnessProblem::from_moments(&state_moments(&moved(&product, &bc), &gens).unwrap(), &Partition::singletons(2))
            .unwrap()
            .evaluate_orthogonal(&bc.orthogonal().transpose())
            .unwrap();
        f_worst = f_worst.max(e);
    }
    parts.push(("f", f_worst <= 1e-6, format!("max E {f_worst:.1e}")));

    let ok = parts.iter().all(|p| p.1);
    let detail: Vec<String> = parts
        .iter()
        .map(|(k, pass, d)| format!("({k}) {} {d}", if *pass { "ok" } else { "FAIL" }))
        .collect();
    report(out, "6", ok, true, detail.join("; "));
}

fn w_hom(r: &Recipe, eta: f64) -> f64 {
    let state = r.with_eta(eta).build_state().unwrap();
    let gens = build_generator_set(2, 2).unwrap();
    let settings = default_settings(&state).unwrap();
    let (p, _) = homodyne_problem(&state, &gens, &Partition::singletons(2), &settings, &BasisChange::identity(2)).unwrap();
    homodyne_witness(&p, &OptimizerConfig::default()).unwrap().value
}

fn criterion_8(out: &mut Vec<Outcome>) {
    let top = recipe("fig9_top");
    let top_vals: Vec<(f64, f64)> = [1.0, 0.95, 0.91].iter().map(|&e| (e, w_hom(&top, e))).collect();
    let top_ok = top_vals.iter().all(|v| v.1 > 0.0);

    let bottom = recipe("fig9_bottom");
    let (mut hi, mut lo) = (0.96, 0.88);
    let ends = (w_hom(&bottom, hi), w_hom(&bottom, lo));
    let bracket = ends.0 > 0.0 && ends.1 <= 0.0;
    if bracket {
        while hi - lo > 2e-3 {
            let mid = 0.5 * (hi + lo);
            if w_hom(&bottom, mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let loss = 1.0 - 0.5 * (hi + lo);
    let bottom_ok = bracket && (loss - 0.08).abs() <= 0.02;
    let cells: Vec<String> = top_vals.iter().map(|(e, w)| format!("η={e}:{w:.4}")).collect();
    report(
        out,
        "8",
        top_ok && bottom_ok,
        true,
        format!(
            "different modes W_hom [{}]; same mode crosses zero at {:.1}% loss",
            cells.join(" "),
            100.0 * loss
        ),
    );
}

fn main() {
    let start = Instant::now();
    let mut out = Vec::new();
    criterion_1(&mut out);
    criterion_2(&mut out);
    criterion_3(&mut out);
    criterion_4(&mut out);
    criterion_5(&mut out);
    let hell = criterion_7(&mut out);
    criterion_6(&mut out, &hell);
    criterion_8(&mut out);

    out.sort_by(|a, b| a.id.cmp(b.id));
    println!("\nsummary ({:.0}s):", start.elapsed().as_secs_f64());
    for o in &out {
        let kind = if o.hard { "" } else { " (soft)" };
        println!("  {} criterion {}{kind}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
    }
    if out.iter().any(|o| o.hard && !o.pass) {
        std::process::exit(1);
    }
}
