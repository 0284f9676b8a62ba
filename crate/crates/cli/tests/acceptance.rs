use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use antenna_core::antenna_design::{weighted_enhancement, EmitterSpectrum, SpectralWindow};
use antenna_core::dipole::{CollectionGeometry, DipoleConfig, DipoleOrientation, ReferenceModel};
use antenna_core::fitkit::{FitResult, LmOptions};
use antenna_core::materials::MaterialLibrary;
use antenna_core::models::{
    fit_double_gaussian, fit_g2, fit_odmr, fit_saturation, g2_background_correct, g2_value, G2Model,
};
use antenna_core::stratified::{vacuum_wavenumber, Layer, Polarization, ResolvedLayer, ResolvedStack, Stack};
use antenna_core::synth::{rng, G2Synth, OdmrSynth, PleLineSynth, SaturationSynth};
use num_complex::Complex64;
use rand::Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn antenna(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_antenna"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("antenna {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn result_of(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["result"].clone()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let r = f()?;
    let el = t.elapsed();
    match limit {
        Some(l) if el > l => Err(format!("{r}; took {:.1} s, limit {:.0} s", el.as_secs_f64(), l.as_secs_f64())),
        _ => Ok(format!("{r}; {:.2} s", el.as_secs_f64())),
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// 1
fn tmm_invariants() -> Outcome {
    let mut r = rng(2024);
    let (mut worst_rt, mut worst_split, mut worst_rev, mut worst_fresnel) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let nl = r.random_range(1..=8);
        let layers: Vec<ResolvedLayer> = (0..nl)
            .map(|_| ResolvedLayer { index: c(r.random_range(1.0..3.5)), thickness_nm: r.random_range(10.0..500.0) })
            .collect();
        let stack = ResolvedStack { incidence: c(r.random_range(1.0..2.0)), layers, exit: c(r.random_range(1.0..3.5)) };
        let wl = r.random_range(400.0..1600.0);
        let k0 = vacuum_wavenumber(wl);
        let n_min = stack.layers.iter().map(|l| l.index.re).fold(stack.incidence.re.min(stack.exit.re), f64::min);
        let kpar = k0 * n_min * r.random_range(0.0..0.95);
        let mut split = stack.clone();
        let i = r.random_range(0..nl);
        let frac = r.random_range(0.1..0.9);
        let l = split.layers[i];
        split.layers[i].thickness_nm = frac * l.thickness_nm;
        split.layers.insert(i + 1, ResolvedLayer { index: l.index, thickness_nm: (1.0 - frac) * l.thickness_nm });
        let rev = ResolvedStack {
            incidence: stack.exit,
            layers: stack.layers.iter().rev().copied().collect(),
            exit: stack.incidence,
        };
        for pol in Polarization::BOTH {
            let a = stack.amplitudes(k0, kpar, pol).unwrap();
            worst_rt = worst_rt.max((a.reflectance + a.transmittance - 1.0).abs());
            let b = split.amplitudes(k0, kpar, pol).unwrap();
            worst_split = worst_split.max((a.r - b.r).norm()).max((a.t - b.t).norm());
            let v = rev.amplitudes(k0, kpar, pol).unwrap();
            worst_rev = worst_rev.max((a.transmittance - v.transmittance).abs());
        }
        let (n1, n2) = (stack.incidence.re, stack.exit.re);
        let iface = ResolvedStack { incidence: stack.incidence, layers: vec![], exit: stack.exit };
        let sin1 = kpar / (k0 * n1);
        let cos1 = (1.0 - sin1 * sin1).sqrt();
        let cos2 = (1.0 - (n1 * sin1 / n2).powi(2)).sqrt();
        let rs = (n1 * cos1 - n2 * cos2) / (n1 * cos1 + n2 * cos2);
        let rp = (n2 * cos1 - n1 * cos2) / (n2 * cos1 + n1 * cos2);
        let got_s = iface.amplitudes(k0, kpar, Polarization::S).unwrap().r;
        let got_p = iface.amplitudes(k0, kpar, Polarization::P).unwrap().r;
        worst_fresnel = worst_fresnel.max((got_s - rs).norm()).max((got_p - rp).norm());
    }
    check(
        worst_rt < 1e-10 && worst_split < 1e-10 && worst_rev < 1e-10 && worst_fresnel < 1e-12,
        format!(
            "200 stacks: |R+T-1| {worst_rt:.1e}, split {worst_split:.1e}, reversal {worst_rev:.1e}, Fresnel {worst_fresnel:.1e}"
        ),
    )
}

// 2
fn airy_oracle() -> Outcome {
    let (n0, n1, n2, d) = (1.0, 1.45, 2.6, 310.0);
    let film = ResolvedStack { incidence: c(n0), layers: vec![ResolvedLayer { index: c(n1), thickness_nm: d }], exit: c(n2) };
    let r01 = (n0 - n1) / (n0 + n1);
    let r12 = (n1 - n2) / (n1 + n2);
    let mut worst = 0.0f64;
    let mut wl = 900.0;
    while wl <= 1150.0 {
        let cos2d = (2.0 * vacuum_wavenumber(wl) * n1 * d).cos();
        let want = (r01 * r01 + r12 * r12 + 2.0 * r01 * r12 * cos2d) / (1.0 + r01 * r01 * r12 * r12 + 2.0 * r01 * r12 * cos2d);
        let got = film.amplitudes(vacuum_wavenumber(wl), 0.0, Polarization::S).unwrap().reflectance;
        worst = worst.max((got - want).abs());
        wl += 0.5;
    }
    check(worst < 1e-8, format!("max |R - Airy| over 900-1150 nm = {worst:.1e}"))
}

// 3
fn reflectivity_dip(dir: &Path) -> Outcome {
    let opt = dir.join("c3_opt.json");
    antenna(&["optimize", "--bounds", "silica_nm=0:400", "--upper-silver-nm", "22", "--sic-nm", "137", "--out", s(&opt)])?;
    let silica = result_of(&opt)["design"]["silica_nm"].as_f64().unwrap();
    let refl = dir.join("c3_refl.csv");
    let silica_arg = silica.to_string();
    antenna(&[
        "reflectivity", "--antenna", "--silica-nm", &silica_arg, "--upper-silver-nm", "22", "--sic-nm", "137",
        "--lambda-min", "900", "--lambda-max", "1000", "--lambda-step", "1", "--out", s(&refl),
    ])?;
    let (wl, rmin) = csv_rows(&refl)
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap()))
        .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    check(
        (wl - 950.0).abs() <= 25.0,
        format!("SiO2 {silica:.1} nm; minimum R = {rmin:.3} at {wl} nm (want 950 +- 25)"),
    )
}

// 4
fn bulk_normalization() -> Outcome {
    let lib = MaterialLibrary::bundled();
    let sic = lib.get("sic").unwrap();
    let air = lib.get("air").unwrap();
    let geom = CollectionGeometry::new(0.9);
    let mut worst = 0.0f64;
    let mut n = 0;
    let stack = Stack::new(air, vec![Layer::new(sic.clone(), 180.0).unwrap()], sic.clone());
    for depth in [20.0, 70.0, 160.0] {
        for orientation in [DipoleOrientation::Horizontal, DipoleOrientation::Vertical] {
            let dip = DipoleConfig::new(orientation, 0, depth);
            for window in [SpectralWindow::RT, SpectralWindow::LT, SpectralWindow::FULL] {
                let e = weighted_enhancement(&stack, &dip, &EmitterSpectrum::bundled_v2(), &window, &geom, ReferenceModel::SemiInfinite)
                    .map_err(|e| e.to_string())?;
                worst = worst.max((e - 1.0).abs());
                n += 1;
            }
        }
    }
    check(worst < 1e-9, format!("{n} window/depth/orientation cases: max |E - 1| = {worst:.1e}"))
}

// 5
fn fig1c(dir: &Path) -> Outcome {
    let (out, summary) = (dir.join("c5.csv"), dir.join("c5.json"));
    antenna(&["sweep", "--preset", "fig1c", "--out", s(&out), "--summary", s(&summary)])?;
    let r = result_of(&summary);
    let n = csv_rows(&out).len();
    let am = &r["argmax"];
    let (ag, sic) = (am["coordinates"][0].as_f64().unwrap(), am["coordinates"][1].as_f64().unwrap());
    let v = am["value"].as_f64().unwrap();
    check(
        n == 10_000 && (130.0..=160.0).contains(&sic) && (18.0..=42.0).contains(&ag) && (24.0..=45.0).contains(&v),
        format!("{n} cells; argmax Ag {ag:.1} nm, SiC {sic:.1} nm, enhancement {v:.2}"),
    )
}

// 6
fn fig1e(dir: &Path) -> Outcome {
    let (out, summary) = (dir.join("c6.csv"), dir.join("c6.json"));
    antenna(&["sweep", "--preset", "fig1e", "--out", s(&out), "--summary", s(&summary)])?;
    let r = result_of(&summary);
    let count = r["branch_count"].as_u64().unwrap();
    let first = &r["branches"][0];
    let (lo, hi) = (first["range"][0].as_f64().unwrap(), first["range"][1].as_f64().unwrap());
    let branch_max = first["value"].as_f64().unwrap();
    let mut ridge: Vec<(f64, f64)> = Vec::new();
    for row in csv_rows(&out) {
        let (t, pos, e) = (row[0].parse::<f64>().unwrap(), row[1].parse::<f64>().unwrap(), row[2].parse::<f64>().unwrap());
        if t < lo || t > hi {
            continue;
        }
        match ridge.iter_mut().find(|(p, _)| *p == pos) {
            Some(x) => x.1 = x.1.max(e),
            None => ridge.push((pos, e)),
        }
    }
    let at = |x: f64| {
        ridge.iter().min_by(|a, b| (a.0 - x).abs().total_cmp(&(b.0 - x).abs())).map(|p| *p).unwrap()
    };
    let (p2, p8) = (at(0.2), at(0.8));
    check(
        count == 3 && p2.1 >= 0.55 * branch_max && p8.1 >= 0.55 * branch_max,
        format!(
            "{count} branches; first branch max {branch_max:.2}, ridge {:.2} at {:.3}, {:.2} at {:.3} ({:.2}, {:.2} of max)",
            p2.1, p2.0, p8.1, p8.0, p2.1 / branch_max, p8.1 / branch_max
        ),
    )
}

// 7
fn window_ratios(dir: &Path) -> Outcome {
    let (full, lt) = (dir.join("c7_full.json"), dir.join("c7_lt.json"));
    antenna(&["window-ratio", "--window-a", "full", "--window-b", "rt", "--at-optimum", "--out", s(&full)])?;
    antenna(&["window-ratio", "--window-a", "lt", "--window-b", "rt", "--at-optimum", "--out", s(&lt)])?;
    let (a, b) = (result_of(&full), result_of(&lt));
    let (ra, rb) = (a["ratio"].as_f64().unwrap(), b["ratio"].as_f64().unwrap());
    let d = &a["design"];
    check(
        (0.55..=0.75).contains(&ra) && (0.6..=0.8).contains(&rb),
        format!(
            "at Ag {:.1} nm / SiC {:.1} nm: full/RT {ra:.3}, LT/RT {rb:.3}",
            d["upper_silver_nm"].as_f64().unwrap(),
            d["sic_nm"].as_f64().unwrap()
        ),
    )
}

// 8
fn g2_identities() -> Outcome {
    let mut r = rng(88);
    let mut exact = 0;
    for _ in 0..1000 {
        let m = G2Model::new(
            r.random_range(1.0..20.0),
            r.random_range(0.0..5.0),
            r.random_range(-50.0..50.0),
            r.random_range(0.1..20.0),
            r.random_range(1.0..500.0),
        )
        .unwrap();
        if g2_value(&m, m.tau0) == (m.n - 1.0) / m.n {
            exact += 1;
        }
    }
    let mut identity = 0.0f64;
    let mut affine = 0.0f64;
    for _ in 0..1000 {
        let (x, y, t) = (r.random_range(-1.0..3.0), r.random_range(-1.0..3.0), r.random_range(0.0..1.0));
        let rho = r.random_range(0.05..1.0);
        identity = identity.max((g2_background_correct(x, 1.0).unwrap() - x).abs());
        let f = |g: f64| g2_background_correct(g, rho).unwrap();
        let mix = t * x + (1.0 - t) * y;
        affine = affine.max((f(mix) - (t * f(x) + (1.0 - t) * f(y))).abs() * rho * rho);
    }
    check(
        exact == 1000 && identity == 0.0 && affine < 1e-12,
        format!("dip exact in {exact}/1000 draws; rho=1 identity error {identity:.1e}; affinity error {affine:.1e}"),
    )
}

// 9
fn within(fit: &FitResult, truth: &[f64]) -> bool {
    fit.parameters.iter().zip(&fit.std_errors).zip(truth).all(|((p, e), t)| (p - t).abs() <= 3.0 * e)
}

fn fit_recovery() -> Outcome {
    let seeds = 9000..9100u64;
    let lm = LmOptions::default();
    let o = OdmrSynth::default();
    let ot = o.model;
    let o_truth = [
        ot.peaks[0].amplitude, ot.peaks[0].center, ot.peaks[0].width, ot.peaks[1].amplitude, ot.peaks[1].center,
        ot.peaks[1].width, ot.offset,
    ];
    let odmr = seeds
        .clone()
        .filter(|&k| {
            let d = o.generate(k);
            fit_odmr(&d.x, &d.y, Some(&d.sigma_y), None, &lm).is_ok_and(|f| within(&f.fit, &o_truth))
        })
        .count();
    let g = G2Synth::default();
    let gt = g.model;
    let g_truth = [gt.n, gt.a, gt.tau0, gt.tau1, gt.tau2];
    let g2 = seeds
        .clone()
        .filter(|&k| {
            let d = g.generate(k);
            fit_g2(&d.x, &d.y, Some(&d.sigma_y), None, &lm).is_ok_and(|f| within(&f.fit, &g_truth))
        })
        .count();
    let st = SaturationSynth::default();
    let s_truth = [st.model.i_sat, st.model.p_exc, st.model.b];
    let mut example = String::new();
    let sat = seeds
        .clone()
        .filter(|&k| {
            let d = st.generate(k);
            let f = fit_saturation(&d.power, &d.sigma_power, &d.counts, &d.sigma_counts, None, &lm);
            if let (Ok(f), true) = (&f, example.is_empty()) {
                example = format!(
                    "seed {k}: I_sat {:.1} +- {:.1} kcps, P_exc {:.0} +- {:.0} uW",
                    f.fit.parameters[0] / 1e3,
                    f.fit.std_errors[0] / 1e3,
                    f.fit.parameters[1],
                    f.fit.std_errors[1]
                );
            }
            f.is_ok_and(|f| within(&f.fit, &s_truth))
        })
        .count();
    let p = PleLineSynth::default();
    let p_truth = p.model.params();
    let dg = seeds
        .clone()
        .filter(|&k| {
            let d = p.generate(k);
            fit_double_gaussian(&d.x, &d.y, Some(&d.sigma_y), None, &lm).is_ok_and(|f| within(&f.1, &p_truth))
        })
        .count();
    check(
        odmr >= 95 && g2 >= 95 && sat >= 95 && dg >= 95,
        format!("within 3 sigma: ODMR {odmr}/100, g2 {g2}/100, saturation {sat}/100, double Gaussian {dg}/100; {example}"),
    )
}

// 10
fn ple_end_to_end(dir: &Path) -> Outcome {
    let scan = dir.join("c10_scan");
    let (stats, lines) = (dir.join("c10_stats.json"), dir.join("c10_lines.csv"));
    antenna(&[
        "synth", "ple-scan", "--seed", "2610", "--lines", "50", "--step-std-mhz", "104", "--duration-s", "4",
        "--violations", "--out", s(&scan),
    ])?;
    antenna(&[
        "ple-analyze", "--manifest", s(&scan.join("scan.txt")), "--out", s(&stats), "--lines-out", s(&lines),
    ])?;
    let truth: Value = serde_json::from_str(&std::fs::read_to_string(scan.join("truth.json")).unwrap()).unwrap();
    let centers: Vec<f64> = truth["a2_centers_ghz"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let r = result_of(&stats);
    let w = &r["scans"][0]["wandering"];
    let got_std = w["std_mhz_per_s"].as_f64().ok_or("no wandering std")?;
    let injected: Vec<f64> = w["rates_mhz_per_s"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let i = p[0].as_u64().unwrap() as usize;
            (centers[i + 1] - centers[i]) * 1e3 / 4.0
        })
        .collect();
    let m = injected.iter().sum::<f64>() / injected.len() as f64;
    let realized = (injected.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (injected.len() - 1) as f64).sqrt();
    let std_err = (got_std - realized).abs() / realized;

    let fwhm = truth["fwhm_ghz"].as_f64().unwrap();
    let lw = &r["linewidths"][0];
    let a1 = lw["a1_fwhm_ghz"]["mean"].as_f64().unwrap();
    let a2 = lw["a2_fwhm_ghz"]["mean"].as_f64().unwrap();
    let fwhm_err = ((a1 - fwhm).abs()).max((a2 - fwhm).abs()) / fwhm;

    let table = csv_rows(&lines);
    let mut fired = Vec::new();
    for v in truth["violations"].as_array().unwrap() {
        let i = v[0].as_u64().unwrap() as usize;
        let want = match v[1].as_str().unwrap() {
            "sub_grid_linewidth" => "linewidth",
            other => other,
        };
        fired.push((want.to_string(), table[i][3] == *want));
    }
    let accepted = r["scans"][0]["accepted"].as_u64().unwrap();
    let all_fired = fired.len() == 3 && fired.iter().all(|f| f.1);
    check(
        std_err < 0.1 && fwhm_err < 0.05 && all_fired,
        format!(
            "wandering std {got_std:.2} MHz/s vs injected {realized:.2} ({:.1}%; nominal 26.00); FWHM {:.1}/{:.1} MHz vs {:.1} ({:.1}%); {accepted} accepted; rejections fired: {}",
            100.0 * std_err,
            a1 * 1e3,
            a2 * 1e3,
            fwhm * 1e3,
            100.0 * fwhm_err,
            fired.iter().map(|(k, ok)| format!("{k}={ok}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// 11
fn delta_pol(dir: &Path) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (d, want_accept) in [(0.0, true), (14.16, false)] {
        let traces = dir.join(format!("c11_{d}.csv"));
        let res = dir.join(format!("c11_{d}.json"));
        let arg = d.to_string();
        antenna(&["synth", "polarization", "--seed", "1", "--delta-pol", &arg, "--out", s(&traces)])?;
        antenna(&["preselect", "--input", s(&traces), "--out", s(&res)])?;
        let p = &result_of(&res)["preselection"];
        let (dp, acc) = (p["delta_pol"].as_f64().unwrap(), p["accepted"].as_bool().unwrap());
        ok &= acc == want_accept && (dp - d).abs() < 1e-9 && (!want_accept || dp.abs() < 1.5);
        parts.push(format!("dPol {dp:.2}% {}", if acc { "accepted" } else { "rejected" }));
    }
    check(ok, parts.join("; "))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir: PathBuf = tmp.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("TMM invariants", Box::new(|| timed(Some(Duration::from_secs(5)), tmm_invariants))),
        ("Airy oracle", Box::new(|| timed(None, airy_oracle))),
        ("reflectivity dip", Box::new(|| timed(Some(Duration::from_secs(5)), || reflectivity_dip(&dir)))),
        ("enhancement normalization", Box::new(|| timed(None, bulk_normalization))),
        ("Ag x SiC sweep maximum", Box::new(|| timed(Some(Duration::from_secs(60)), || fig1c(&dir)))),
        ("longitudinal mode branches", Box::new(|| timed(None, || fig1e(&dir)))),
        ("window ratios", Box::new(|| timed(None, || window_ratios(&dir)))),
        ("g2 identities", Box::new(|| timed(None, g2_identities))),
        ("fit recovery Monte Carlo", Box::new(|| timed(None, fit_recovery))),
        ("PLE pipeline end to end", Box::new(|| timed(Some(Duration::from_secs(10)), || ple_end_to_end(&dir)))),
        ("polarization preselection", Box::new(|| timed(None, || delta_pol(&dir)))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail}", i + 1);
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
