//! Temporary numeric probes (deleted before release).

use std::f64::consts::PI;
use warped_spectra::*;

#[test]
#[ignore]
fn probe_criterion6_scaling() {
    for n in [256usize, 512, 1024] {
        let mesh = BaseMesh::circle(2.0 * PI, n).unwrap();
        let warp = WarpingSpec::constant(1.0).sample(&mesh, 1).unwrap();
        let r = WarpingSpec::fourier(0.0, vec![0.0, 1.0], vec![])
            .sample_direction(&mesh)
            .unwrap();
        let t0 = std::time::Instant::now();
        let dec = eigensolve(&assemble_operator(&warp, 0.0).unwrap(), None).unwrap();
        let solve_time = t0.elapsed();
        let cluster = dec.cluster_around(1, 1e-9);
        let report = degenerate_derivative_matrix(
            &warp,
            &r,
            &dec,
            cluster.clone(),
            WeightExponent::MMinusOne,
        )
        .unwrap();
        let fd = fd_cluster_slopes(&warp, &r, 0.0, cluster, 1e-3).unwrap();
        let mut worst_rel = 0.0_f64;
        let mut worst_mixed = 0.0_f64;
        for (q, f) in report.split_slopes.iter().zip(fd.iter()) {
            worst_rel = worst_rel.max((q - f).abs() / f.abs());
            worst_mixed = worst_mixed.max((q - f).abs() / (1.0 + f.abs()));
        }
        println!(
            "n={n}: solve {:?}, slopes {:?} vs fd {:?}, rel {worst_rel:.3e}, mixed {worst_mixed:.3e}, h^2/4 = {:.3e}",
            solve_time,
            report.split_slopes,
            fd,
            (2.0 * PI / n as f64).powi(2) / 4.0
        );
    }
}

#[test]
#[ignore]
fn probe_criterion7_seed42() {
    let n = 256;
    let mesh = BaseMesh::circle(2.0 * PI, n).unwrap();
    let warp = WarpingSpec::constant(1.0).sample(&mesh, 1).unwrap();
    let specs = fourier_candidates(42, 3, 1);
    println!("candidate spec: {:?}", specs[0]);
    let r = specs[0].sample_direction(&mesh).unwrap();
    let perturbed = warp.perturbed(&r, 0.1).unwrap();
    println!(
        "perturbed f range: [{}, {}]",
        perturbed.min_value(),
        perturbed.max_value()
    );
    let lambda_max = 10.0;
    let fiber = circle_fiber(2.0 * PI, lambda_max * perturbed.max_node_value().powi(2)).unwrap();
    println!(
        "fiber entries: {:?}",
        fiber.entries.iter().map(|e| e.mu).collect::<Vec<_>>()
    );
    let family = spectrum_of_family(&perturbed, &fiber, lambda_max).unwrap();
    let spec = assemble_spectrum(&family, &fiber, lambda_max, 1e-6).unwrap();
    let mut min_gap = f64::INFINITY;
    for w in spec.levels.windows(2) {
        min_gap = min_gap.min(w[1].lambda - w[0].lambda);
    }
    println!("levels: {}", spec.levels.len());
    for level in &spec.levels {
        if !level.warped_simple {
            println!(
                "NOT WARPED SIMPLE: lambda={} sources={:?}",
                level.lambda,
                level
                    .sources
                    .iter()
                    .map(|s| (s.mu, s.m_l, s.m_f))
                    .collect::<Vec<_>>()
            );
        }
    }
    println!(
        "all warped simple: {}, min inter-level gap {min_gap:.3e}",
        spec.levels.iter().all(|l| l.warped_simple)
    );
}

#[test]
#[ignore]
fn probe_criterion8_sphere() {
    let n = 256;
    let mesh = BaseMesh::circle(2.0 * PI, n).unwrap();
    let lambda_max = 10.0;
    let fiber = sphere_fiber(4).unwrap();
    // perturbed warp from criterion 7
    let warp = WarpingSpec::constant(1.0).sample(&mesh, 2).unwrap();
    let specs = fourier_candidates(42, 3, 1);
    let r = specs[0].sample_direction(&mesh).unwrap();
    let perturbed = warp.perturbed(&r, 0.1).unwrap();
    let family = spectrum_of_family(&perturbed, &fiber, lambda_max).unwrap();
    let spec = assemble_spectrum(&family, &fiber, lambda_max, 1e-6).unwrap();
    println!("perturbed sphere: {} levels", spec.levels.len());
    for level in &spec.levels {
        let g = level.g_simple;
        if g != Some(true) {
            println!(
                "NOT G-SIMPLE: lambda={} mult={} sources={:?}",
                level.lambda,
                level.total_mult,
                level
                    .sources
                    .iter()
                    .map(|s| (s.mu, s.m_l, s.m_f))
                    .collect::<Vec<_>>()
            );
        }
    }
    // negative control: unperturbed f = 1
    let flat_family = spectrum_of_family(&warp, &fiber, lambda_max).unwrap();
    let flat_spec = assemble_spectrum(&flat_family, &fiber, lambda_max, 1e-6).unwrap();
    let non_g = flat_spec
        .levels
        .iter()
        .filter(|l| l.g_simple == Some(false))
        .count();
    println!("flat control: {} levels, {} non-G-simple", flat_spec.levels.len(), non_g);
    for level in flat_spec.levels.iter().filter(|l| l.g_simple == Some(false)) {
        println!(
            "  control non-G-simple lambda={} sources={:?}",
            level.lambda,
            level
                .sources
                .iter()
                .map(|s| (s.mu, s.m_l, s.m_f))
                .collect::<Vec<_>>()
        );
    }
}

#[test]
#[ignore]
fn probe_criterion1_timing() {
    let t0 = std::time::Instant::now();
    let mesh = BaseMesh::circle(2.0 * PI, 32).unwrap();
    let warp = WarpingSpec::fourier(2.0, vec![1.0], vec![])
        .sample(&mesh, 1)
        .unwrap();
    let op = assemble_full_product(&warp, 32, 2.0 * PI).unwrap();
    let assembled = assembled_discrete_multiset(&warp, 32, 2.0 * PI).unwrap();
    let report = validate_separation(&op, &assembled, 40).unwrap();
    println!(
        "criterion 1: pass={} max_dev={:.3e} elapsed {:?}",
        report.pass,
        report.max_abs_dev,
        t0.elapsed()
    );
}

#[test]
#[ignore]
fn probe_criterion4_hf_fd() {
    for n in [128usize, 256, 512] {
        let mesh = BaseMesh::circle(2.0 * PI, n).unwrap();
        let warp = WarpingSpec::constant(2.0).sample(&mesh, 1).unwrap();
        let r = WarpingSpec::constant(1.0).sample_direction(&mesh).unwrap();
        let dec = eigensolve(&assemble_operator(&warp, 1.0).unwrap(), None).unwrap();
        let hf = hellmann_feynman_slope(&warp, &r, &dec, 0).unwrap();
        let fd = fd_slope(&warp, &r, 1.0, 0, &[1e-3, 5e-4, 2.5e-4, 1.25e-4]).unwrap();
        println!(
            "n={n}: hf={hf:.15} fd={:.15} (step {}) |diff|={:.3e} mixed={:.3e}",
            fd.value,
            fd.step_used,
            (hf - fd.value).abs(),
            (hf - fd.value).abs() / (1.0 + hf.abs())
        );
    }
}

#[test]
#[ignore]
fn probe_criterion3_constants() {
    for n in [32usize, 64, 128] {
        let mesh = BaseMesh::circle(2.0 * PI, n).unwrap();
        let flat = {
            let w = WarpingSpec::constant(1.0).sample(&mesh, 1).unwrap();
            eigensolve(&assemble_operator(&w, 0.0).unwrap(), None).unwrap()
        };
        let mut worst = 0.0_f64;
        for (c, m, mu) in [
            (0.5, 1usize, 1.0),
            (0.5, 2, 4.0),
            (1.0, 1, 2.0),
            (2.0, 1, 1.0),
            (2.0, 3, 4.0),
        ] {
            let w = WarpingSpec::constant(c).sample(&mesh, m).unwrap();
            let dec = eigensolve(&assemble_operator(&w, mu).unwrap(), None).unwrap();
            for (got, fl) in dec.eigenvalues.iter().zip(flat.eigenvalues.iter()) {
                let expect = fl + mu / (c * c);
                worst = worst.max((got - expect).abs() / (1.0 + expect.abs()));
            }
        }
        println!("n={n}: worst mixed-relative shift error {worst:.3e}");
    }
}
