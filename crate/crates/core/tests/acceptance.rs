//! End-to-end acceptance suite. Every criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use icoh::measures::{find_peaks, DEFAULT_MIN_PROMINENCE};
use icoh::toys::{
    agreement_fraction, coefficient_errors, column_sum_error, direct_links, icoh_closed_form_gap,
    icoh_constrained_ncr_gap, inverse_identity_error, row_sum_error, run_pipeline, toy_model_9_1, toy_model_9_2,
    within_unit_interval, PipelineOutput, DEFAULT_SEED, FIT_ORDER, N_SAMPLES, SAMPLING_RATE,
};
use icoh::{fit_least_squares, ConnectivityMap, ExampleId, FrequencyGrid};

use common::random_stable_model;

const FUZZ_MODELS: u64 = 100;
const SPREAD_SEEDS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn peaks(map: &ConnectivityMap, r: usize, s: usize) -> Vec<f64> {
    find_peaks(map, r, s, DEFAULT_MIN_PROMINENCE).peaks.iter().map(|p| p.frequency_hz).collect()
}

fn near(list: &[f64], target: f64) -> bool {
    list.iter().any(|f| (f - target).abs() <= 1.0)
}

fn c1_spectrum_peak(t1: &PipelineOutput) -> Outcome {
    let (f, _) = t1.coherence.argmax(0, 0);
    let p = peaks(&t1.coherence, 0, 0);
    outcome((f - 33.0).abs() <= 1.0 && near(&p, 33.0), format!("S_11 argmax {f} Hz, peaks {p:?}"))
}

fn c2_coherence_peaks(t1: &PipelineOutput) -> Outcome {
    let p = peaks(&t1.coherence, 3, 0);
    outcome(near(&p, 22.0) && near(&p, 35.0), format!("coherence (4,1) peaks {p:?}"))
}

fn c3_directed_structure(t1: &PipelineOutput) -> Outcome {
    let support = direct_links(&t1.truth);
    let mut ok = true;
    let mut weakest_present = f64::MAX;
    let mut strongest_absent: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            if i == j {
                continue;
            }
            let m = t1.icoh.max(i, j);
            if support.contains(&(i, j)) {
                ok &= m > 0.1;
                weakest_present = weakest_present.min(m);
            } else {
                ok &= m < 0.05;
                strongest_absent = strongest_absent.max(m);
            }
        }
    }
    let (f, _) = t1.icoh.argmax(1, 0);
    ok &= (f - 33.0).abs() <= 1.0;
    outcome(
        ok,
        format!("present min {weakest_present:.4}, absent max {strongest_absent:.4}, kappa_2<-1 argmax {f} Hz"),
    )
}

fn c4_icoh_vs_gpdc(t1: &PipelineOutput) -> Outcome {
    let pairs: Vec<(f64, f64)> = [0, 3].iter().map(|&r| (t1.icoh.max(r, 4), t1.gpdc.max(r, 4))).collect();
    outcome(
        pairs.iter().all(|(k, g)| k >= g),
        format!("1<-5: {:.4} vs {:.4}; 4<-5: {:.4} vs {:.4}", pairs[0].0, pairs[0].1, pairs[1].0, pairs[1].1),
    )
}

fn c5_toy_9_2_spectra(t2: &PipelineOutput) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for ch in 0..5 {
        let p = peaks(&t2.coherence, ch, ch);
        ok &= near(&p, 8.0) && near(&p, 32.0);
        if ch >= 2 {
            ok &= near(&p, 23.0);
        }
        detail.push(format!("S_{0}{0} {p:?}", ch + 1));
    }
    outcome(ok, detail.join("; "))
}

fn c6_coherence_strength(t2: &PipelineOutput) -> Outcome {
    let m: Vec<f64> = [2, 3, 4].iter().map(|&k| t2.coherence.max(1, k)).collect();
    outcome(m.iter().all(|&v| v > 0.9), format!("max coherence (2,3..5) {m:.4?}"))
}

fn c7_icoh_frequencies(t2: &PipelineOutput) -> Outcome {
    let col2: Vec<f64> = [0, 2, 3, 4].iter().map(|&k| t2.icoh.argmax(k, 1).0).collect();
    let (f21, _) = t2.icoh.argmax(1, 0);
    outcome(
        col2.iter().all(|f| (f - 16.0).abs() <= 1.0) && (f21 - 28.0).abs() <= 1.0,
        format!("kappa_k<-2 argmax {col2:?}, kappa_2<-1 argmax {f21}"),
    )
}

fn c8_gpdc_artifacts(t2: &PipelineOutput) -> Outcome {
    let (f12, _) = t2.gpdc.argmax(0, 1);
    let col: Vec<(f64, f64)> = [2, 3, 4].iter().map(|&k| t2.gpdc.argmax(k, 1)).collect();
    outcome(
        f12 == 1.0 && col.iter().all(|(f, v)| (f - 23.0).abs() <= 1.0 && *v < 0.5),
        format!("gPDC 1<-2 argmax {f12}; k<-2 (argmax, max) {col:.4?}"),
    )
}

fn fuzz_worst(gap: impl Fn(&icoh::ArModel, &FrequencyGrid) -> f64, fitted: &[&PipelineOutput]) -> f64 {
    let grid = FrequencyGrid::standard();
    let mut worst = gap(&toy_model_9_1(), &grid).max(gap(&toy_model_9_2(), &grid));
    for out in fitted {
        worst = worst.max(gap(out.model(), &grid));
    }
    for seed in 0..FUZZ_MODELS {
        worst = worst.max(gap(&random_stable_model(seed), &grid));
    }
    worst
}

fn c9_identity(t1: &PipelineOutput, t2: &PipelineOutput) -> Outcome {
    let worst = fuzz_worst(|m, g| icoh_constrained_ncr_gap(m, g).unwrap(), &[t1, t2]);
    outcome(worst <= 1e-10, format!("max |iCoh - constrained NCR| = {worst:.3e} over toys + {FUZZ_MODELS} random models"))
}

fn c10_closed_form(t1: &PipelineOutput, t2: &PipelineOutput) -> Outcome {
    let worst = fuzz_worst(|m, g| icoh_closed_form_gap(m, g).unwrap(), &[t1, t2]);
    outcome(worst <= 1e-12, format!("max |closed form - partial-coherence form| = {worst:.3e}"))
}

fn c11_normalization(outs: &[&PipelineOutput]) -> Outcome {
    let mut col: f64 = 0.0;
    let mut row: f64 = 0.0;
    let mut bounded = true;
    for out in outs {
        col = col.max(column_sum_error(&out.pdc)).max(column_sum_error(&out.gpdc));
        row = row.max(row_sum_error(&out.ncr));
        for map in [&out.coherence, &out.partial_coherence, &out.icoh, &out.ncr, &out.pdc, &out.gpdc] {
            bounded &= within_unit_interval(map);
        }
    }
    outcome(
        col <= 1e-10 && row <= 1e-10 && bounded,
        format!("PDC/gPDC column-sum error {col:.3e}, NCR row-sum error {row:.3e}, all in [0,1]: {bounded}"),
    )
}

fn c12_spectral_consistency(outs: &[&PipelineOutput]) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for out in outs {
        let inv = inverse_identity_error(&out.spectrum).unwrap();
        let frac = agreement_fraction(&out.coherence, &out.periodogram_coherence, 0.1);
        ok &= inv <= 1e-8 && frac >= 0.95;
        detail.push(format!("{}: |S S^-1 - I| {inv:.2e}, overlay {frac:.3}", out.example));
    }
    outcome(ok, detail.join("; "))
}

fn c13_estimation(outs: &[&PipelineOutput]) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for out in outs {
        let (matched, extra) = coefficient_errors(&out.truth, out.model());
        ok &= matched <= 0.05 && extra <= 0.05;
        // estimator spread over independent seeds
        let mut spread: f64 = 0.0;
        for seed in 0..SPREAD_SEEDS {
            let data = out.truth.simulate(N_SAMPLES, 1000, SAMPLING_RATE, 1000 + seed).unwrap();
            let fit = fit_least_squares(&data, FIT_ORDER).unwrap();
            let (m, e) = coefficient_errors(&out.truth, &fit);
            spread = spread.max(m).max(e);
        }
        ok &= spread <= 0.05;
        detail.push(format!(
            "{}: A(1..2) err {matched:.4}, A(3) max {extra:.4}, worst over {SPREAD_SEEDS} seeds {spread:.4}",
            out.example
        ));
    }
    outcome(ok, detail.join("; "))
}

fn timed(example: ExampleId) -> (PipelineOutput, Duration) {
    let start = Instant::now();
    let out = run_pipeline(example, DEFAULT_SEED).unwrap();
    (out, start.elapsed())
}

#[test]
fn acceptance_criteria() {
    let (t1, d1) = timed(ExampleId::Toy91);
    let (t2, d2) = timed(ExampleId::Toy92);
    let both = [&t1, &t2];

    let results = [
        ("1  toy 9.1 autospectrum peak", c1_spectrum_peak(&t1)),
        ("2  toy 9.1 coherence peaks", c2_coherence_peaks(&t1)),
        ("3  toy 9.1 iCoh directed structure", c3_directed_structure(&t1)),
        ("4  toy 9.1 iCoh >= gPDC from node 5", c4_icoh_vs_gpdc(&t1)),
        ("5  toy 9.2 autospectra peaks", c5_toy_9_2_spectra(&t2)),
        ("6  toy 9.2 coherence strength", c6_coherence_strength(&t2)),
        ("7  toy 9.2 iCoh frequencies", c7_icoh_frequencies(&t2)),
        ("8  toy 9.2 gPDC artifacts", c8_gpdc_artifacts(&t2)),
        ("9  iCoh = constrained NCR", c9_identity(&t1, &t2)),
        ("10 closed form = partial-coherence form", c10_closed_form(&t1, &t2)),
        ("11 normalization and bounds", c11_normalization(&both)),
        ("12 spectral consistency", c12_spectral_consistency(&both)),
        ("13 estimation recovery", c13_estimation(&both)),
        (
            "-- desk-scale runtime < 10 s per pipeline",
            outcome(
                d1 < Duration::from_secs(10) && d2 < Duration::from_secs(10),
                format!("toy 9.1 {:.2} s, toy 9.2 {:.2} s", d1.as_secs_f64(), d2.as_secs_f64()),
            ),
        ),
    ];

    let mut failed = Vec::new();
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
