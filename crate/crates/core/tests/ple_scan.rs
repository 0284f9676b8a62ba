use antenna_core::pipeline::{
    analyze_scan, enhancement_statistics, linewidth_statistics, spectral_wandering, ConstraintSet, MeanStd,
    SaturationGroup, SeparationReference,
};
use antenna_core::synth::{measured_group, rng, PleScanSynth, Violation};
use rand_distr::{Distribution, Normal};

fn injected_rates(centers: &[f64], pairs: &[(usize, f64)], dt: f64) -> Vec<f64> {
    pairs.iter().map(|&(i, _)| (centers[i + 1] - centers[i]) * 1e3 / dt).collect()
}

#[test]
fn violating_lines_rejected_for_their_reason() {
    let s = PleScanSynth { violations: true, lines: 10, ..Default::default() }.generate(21);
    let out = analyze_scan(&s.scan, &ConstraintSet::default(), SeparationReference::FirstAccepted).unwrap();
    for (i, o) in out.iter().enumerate().take(10) {
        assert!(o.accepted().is_some(), "line {i}: {:?}", o.reason());
    }
    for &(i, v) in &s.violations {
        let reason = out[i].reason().map(|r| r.as_str());
        let want = match v {
            Violation::AmplitudeRatio => "amplitude_ratio",
            Violation::CenterOutOfRange => "center_out_of_range",
            Violation::SubGridLinewidth => "linewidth",
        };
        assert_eq!(reason, Some(want), "{v:?}");
    }
}

#[test]
fn wandering_std_recovered_over_500_lines() {
    let g = PleScanSynth { lines: 500, step_std_ghz: 0.03, ..Default::default() };
    let s = g.generate(5);
    let out = analyze_scan(&s.scan, &ConstraintSet::default(), SeparationReference::FirstAccepted).unwrap();
    let w = spectral_wandering(&s.scan, &out).unwrap();
    assert_eq!(w.skipped_pairs, 0);
    let injected = 30.0 / g.duration_s;
    let rel = (w.std_mhz_per_s - injected).abs() / injected;
    assert!(rel < 0.1, "std {} vs {injected}", w.std_mhz_per_s);
    let realized = MeanStd::of(&injected_rates(&s.a2_centers_ghz, &w.rates_mhz_per_s, g.duration_s)).unwrap();
    assert!((w.std_mhz_per_s - realized.std).abs() / realized.std < 0.02);
}

#[test]
fn linewidth_ensemble_mean_recovered() {
    // widths drawn from a known distribution, one line per draw
    let mut r = rng(77);
    let dist = Normal::new(0.15, 0.02).unwrap();
    let mut per_line = Vec::new();
    let mut truth = Vec::new();
    for k in 0..40 {
        let fwhm: f64 = dist.sample(&mut r);
        truth.push(fwhm);
        let mut g = PleScanSynth { lines: 1, ..Default::default() };
        for p in &mut g.line.model.peaks {
            p.width = fwhm / antenna_core::models::FWHM_PER_SIGMA;
        }
        let s = g.generate(500 + k);
        per_line.extend(analyze_scan(&s.scan, &ConstraintSet::default(), SeparationReference::None).unwrap());
    }
    let stats = linewidth_statistics(&[(50.0, per_line)]);
    let mean_truth = truth.iter().sum::<f64>() / truth.len() as f64;
    let a2 = stats[0].a2_fwhm_ghz.unwrap();
    assert_eq!(stats[0].accepted, 40);
    assert!((a2.mean - mean_truth).abs() / mean_truth < 0.05);
}

#[test]
fn ratio_error_matches_resampling() {
    let bulk = measured_group(10.1e3, 0.6e3, 0.3e3, 12, 1);
    let antenna = measured_group(119.3e3, 4.9e3, 2.0e3, 12, 2);
    let groups = vec![
        SaturationGroup { name: "bulk".into(), i_sat: bulk.clone() },
        SaturationGroup { name: "antenna".into(), i_sat: antenna.clone() },
    ];
    let stats = enhancement_statistics(&groups, "bulk").unwrap();
    let a = &stats[1];
    assert!((stats[0].mean_ratio.value - 1.0).abs() < 1e-12);
    // resample both groups with their reported errors
    let mut r = rng(3);
    let std_norm = Normal::new(0.0, 1.0).unwrap();
    let mut ratios = Vec::new();
    for _ in 0..20000 {
        let mean = |g: &[(f64, f64)], r: &mut _| {
            g.iter().map(|&(v, e)| v + e * std_norm.sample(r)).sum::<f64>() / g.len() as f64
        };
        let b = mean(&bulk, &mut r);
        let x = mean(&antenna, &mut r);
        ratios.push(x / b);
    }
    let mc = MeanStd::of(&ratios).unwrap();
    let rel = (a.mean_ratio.error - mc.std).abs() / mc.std;
    assert!(rel < 0.15, "{} vs {}", a.mean_ratio.error, mc.std);
}
