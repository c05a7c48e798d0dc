use std::fs;
use std::path::{Path, PathBuf};

use icoh::measures::{
    coherence, constrained_ncr_map, gpdc, icoh_lenient, ncr, partial_coherence, pdc,
};
use icoh::spectral::{cross_spectrum, periodogram_cross_spectrum};
use icoh::toys::run_pipeline;
use icoh::{fit_least_squares, ArModel, ConnectivityMap, CrossSpectrum, Error, FrequencyGrid, MeasureId, TimeSeriesData};

use crate::config::{set, set_switch, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    emit, format_time_series, map_peaks, measure_csv, read_measure_csv, read_model, read_time_series, row_peaks,
    to_json, write_text, MeasurePeaks, ModelFile,
};
use crate::svg::{grid_svg, Series, BLUE, RED};
use crate::{Cli, Command, FitArgs, MeasuresArgs, PeaksArgs, ReproduceArgs, SimulateArgs};

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(args) => simulate(&mut cfg, args),
        Command::Fit(args) => fit(&mut cfg, args),
        Command::Measures(args) => measures(&mut cfg, args),
        Command::Reproduce(args) => reproduce(&mut cfg, args),
        Command::Peaks(args) => peaks(&mut cfg, args),
    }
}

fn warn(failures: &[Error]) {
    for f in failures {
        eprintln!("warning: {f}; affected pairs are reported as 0");
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn simulate(cfg: &mut RunConfig, args: SimulateArgs) -> CliResult<()> {
    if args.example.is_some() {
        cfg.model = None;
    }
    if args.model.is_some() {
        cfg.example = None;
    }
    set(&mut cfg.example, args.example);
    set(&mut cfg.model, args.model);
    set(&mut cfg.n_samples, args.n_samples);
    set(&mut cfg.burn_in, args.burn_in);
    set(&mut cfg.sampling_rate, args.sampling_rate);
    set(&mut cfg.seed, args.seed);

    let n = cfg.n_samples()?;
    let model = match (cfg.example, &cfg.model) {
        (Some(example), None) => example.model(),
        (None, Some(path)) => read_model(path)?,
        (Some(_), Some(_)) => return Err(CliError::Usage("give either an example or a model file, not both".into())),
        (None, None) => return Err(CliError::Usage("simulate needs --example or --model".into())),
    };
    let data = model.simulate(n, cfg.burn_in(), cfg.sampling_rate()?, cfg.seed())?;
    emit(args.output.as_deref(), &format_time_series(&data))
}

fn fit(cfg: &mut RunConfig, args: FitArgs) -> CliResult<()> {
    set(&mut cfg.input, args.input);
    set(&mut cfg.order, args.order);
    set(&mut cfg.sampling_rate, args.sampling_rate);
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("fit needs --input".into()))?;
    let data = read_time_series(&input, cfg.sampling_rate()?)?;
    let model = fit_least_squares(&data, cfg.order()?)?;
    emit(args.output.as_deref(), &to_json(&ModelFile::from_model(&model)))
}

fn apply_measures_flags(cfg: &mut RunConfig, args: MeasuresArgs) {
    if args.input.is_some() {
        cfg.example = None;
    }
    if args.example.is_some() {
        cfg.input = None;
    }
    set(&mut cfg.input, args.input);
    set(&mut cfg.example, args.example);
    set(&mut cfg.order, args.order);
    set(&mut cfg.n_dft, args.n_dft);
    set(&mut cfg.sampling_rate, args.sampling_rate);
    if args.f_min.is_some() || args.f_max.is_some() {
        let (lo, hi) = cfg.band.unwrap_or((1.0, 127.0));
        cfg.band = Some((args.f_min.unwrap_or(lo), args.f_max.unwrap_or(hi)));
    }
    set(&mut cfg.measures, args.measures);
    set(&mut cfg.seed, args.seed);
    set(&mut cfg.n_samples, args.n_samples);
    set(&mut cfg.burn_in, args.burn_in);
    set(&mut cfg.periodogram.segment_len, args.segment_len);
    set(&mut cfg.periodogram.overlap_fraction, args.overlap);
    set(&mut cfg.periodogram.window, args.window);
    set(&mut cfg.min_prominence, args.min_prominence);
    set_switch(&mut cfg.diagonalize_noise, args.diagonalize_noise);
    set_switch(&mut cfg.plot, args.plot);
    set(&mut cfg.output_dir, args.out_dir);
}

fn load_data(cfg: &RunConfig) -> CliResult<TimeSeriesData> {
    let fs = cfg.sampling_rate()?;
    match (&cfg.input, cfg.example) {
        (Some(path), None) => read_time_series(path, fs),
        (None, Some(example)) => Ok(example.model().simulate(cfg.n_samples()?, cfg.burn_in(), fs, cfg.seed())?),
        (Some(_), Some(_)) => Err(CliError::Usage("give either an input file or an example, not both".into())),
        (None, None) => Err(CliError::Usage("measures needs --input or --example".into())),
    }
}

fn compute_measure(
    measure: MeasureId,
    model: &ArModel,
    grid: &FrequencyGrid,
    cs: &CrossSpectrum,
    diagonalize_noise: bool,
) -> CliResult<ConnectivityMap> {
    Ok(match measure {
        MeasureId::Coherence => coherence(cs)?,
        MeasureId::PartialCoherence => partial_coherence(cs)?,
        MeasureId::Icoh => {
            let (map, failures) = icoh_lenient(model, grid);
            warn(&failures);
            map
        }
        MeasureId::Ncr => ncr(model, grid, diagonalize_noise)?,
        MeasureId::ConstrainedNcr => {
            let (map, failures) = constrained_ncr_map(model, grid);
            warn(&failures);
            map
        }
        MeasureId::Pdc => pdc(model, grid)?,
        MeasureId::Gpdc => gpdc(model, grid)?,
    })
}

fn measures(cfg: &mut RunConfig, args: MeasuresArgs) -> CliResult<()> {
    apply_measures_flags(cfg, args);
    let requested = cfg.measures();
    if requested.is_empty() {
        return Err(CliError::Usage("no measures requested".into()));
    }
    let grid = cfg.grid()?;
    let order = cfg.order()?;
    let data = load_data(cfg)?;
    let model = fit_least_squares(&data, order)?;
    let diagonalize = cfg.diagonalize_noise();
    if requested.contains(&MeasureId::Ncr) && !model.has_diagonal_noise() && !diagonalize {
        return Err(CliError::Usage(
            "ncr assumes uncorrelated innovations but the fitted noise covariance has non-zero off-diagonal \
             entries; pass --diagonalize-noise (config: \"diagonalize_noise\": true) to drop them"
                .into(),
        ));
    }
    let cs = cross_spectrum(&model, &grid)?;
    let maps = requested
        .iter()
        .map(|&m| compute_measure(m, &model, &grid, &cs, diagonalize))
        .collect::<CliResult<Vec<_>>>()?;

    let out_dir = cfg.output_dir();
    create_dir(&out_dir)?;
    let min_prominence = cfg.min_prominence();
    let mut summary: Vec<MeasurePeaks> = Vec::new();
    for map in &maps {
        write_text(&out_dir.join(format!("{}.csv", map.measure.name())), &measure_csv(map))?;
        summary.push(map_peaks(map, min_prominence));
    }
    write_text(&out_dir.join("peaks.json"), &to_json(&summary))?;

    if cfg.plot() {
        for map in &maps {
            let shown = map.clone().with_normalized_autospectrum(&cs)?;
            let name = map.measure.name();
            let svg = grid_svg(
                &format!("{name} (diagonal: autospectrum scaled to unit maximum)"),
                &[Series { label: name, color: BLUE, map: &shown }],
            );
            write_text(&out_dir.join(format!("{name}.svg")), &svg)?;
        }
        let find = |id: MeasureId| maps.iter().find(|m| m.measure == id);
        if let Some(coh) = find(MeasureId::Coherence) {
            let parametric = coh.clone().with_normalized_autospectrum(&cs)?;
            let (f_lo, f_hi) = band_edges(&grid);
            let welch = periodogram_cross_spectrum(&data, cfg.periodogram())?.restrict(f_lo, f_hi)?;
            let nonparametric = coherence(&welch)?.with_normalized_autospectrum(&welch)?;
            write_text(
                &out_dir.join("coherence_periodogram.svg"),
                &coherence_overlay("coherence: parametric vs periodogram", &parametric, &nonparametric),
            )?;
        }
        if let (Some(k), Some(g)) = (find(MeasureId::Icoh), find(MeasureId::Gpdc)) {
            let k = k.clone().with_normalized_autospectrum(&cs)?;
            let g = g.clone().with_normalized_autospectrum(&cs)?;
            write_text(&out_dir.join("icoh_gpdc.svg"), &icoh_gpdc_overlay("iCoh vs gPDC", &k, &g))?;
        }
    }
    Ok(())
}

fn band_edges(grid: &FrequencyGrid) -> (f64, f64) {
    let f = grid.frequencies();
    (f[0], f[f.len() - 1])
}

fn coherence_overlay(title: &str, parametric: &ConnectivityMap, periodogram: &ConnectivityMap) -> String {
    grid_svg(
        title,
        &[
            Series { label: "periodogram", color: RED, map: periodogram },
            Series { label: "fitted MVAR", color: BLUE, map: parametric },
        ],
    )
}

fn icoh_gpdc_overlay(title: &str, icoh_map: &ConnectivityMap, gpdc_map: &ConnectivityMap) -> String {
    grid_svg(
        title,
        &[
            Series { label: "gPDC", color: BLUE, map: gpdc_map },
            Series { label: "iCoh", color: RED, map: icoh_map },
        ],
    )
}

fn reproduce(cfg: &mut RunConfig, args: ReproduceArgs) -> CliResult<()> {
    set(&mut cfg.seed, args.seed);
    set(&mut cfg.output_dir, args.out_dir);
    let example = args.example;
    let seed = cfg.seed();
    let out_dir = cfg.output_dir();
    create_dir(&out_dir)?;

    let report = icoh::toys::run_reproduction(example, seed);
    let name = example.name();
    write_text(&out_dir.join(format!("{name}_report.json")), &to_json(&report))?;

    if let Ok(out) = run_pipeline(example, seed) {
        write_text(
            &out_dir.join(format!("{name}_coherence.svg")),
            &coherence_overlay(
                &format!("{name}: squared coherence, fitted MVAR vs periodogram (seed {seed})"),
                &out.coherence,
                &out.periodogram_coherence,
            ),
        )?;
        let icoh_map = out.icoh.clone().with_normalized_autospectrum(&out.spectrum)?;
        let gpdc_map = out.gpdc.clone().with_normalized_autospectrum(&out.spectrum)?;
        write_text(
            &out_dir.join(format!("{name}_icoh_gpdc.svg")),
            &icoh_gpdc_overlay(&format!("{name}: iCoh vs gPDC (seed {seed})"), &icoh_map, &gpdc_map),
        )?;
    }

    let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).collect();
    for c in &failed {
        eprintln!("FAIL {}: expected {}, observed {}", c.name, c.expected, c.observed);
    }
    println!(
        "{name}: {}/{} checks passed (seed {seed})",
        report.checks.len() - failed.len(),
        report.checks.len()
    );
    if report.overall_pass {
        Ok(())
    } else {
        Err(CliError::ReproductionFailed {
            failed: failed.len(),
            total: report.checks.len(),
        })
    }
}

fn peaks(cfg: &mut RunConfig, args: PeaksArgs) -> CliResult<()> {
    set(&mut cfg.min_prominence, args.min_prominence);
    let rows: Vec<_> = read_measure_csv(&args.csv)?
        .into_iter()
        .filter(|r| args.receiver.is_none_or(|i| r.receiver == i) && args.sender.is_none_or(|j| r.sender == j))
        .collect();
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no rows for the requested cells", args.csv.display())));
    }
    let single_cell = args.receiver.is_some() && args.sender.is_some();
    let min_prominence = cfg.min_prominence();
    let summary = MeasurePeaks {
        measure: measure_name(&args.csv),
        min_prominence,
        pairs: row_peaks(&rows, min_prominence, single_cell)?,
    };
    emit(args.output.as_deref(), &to_json(&summary))
}

fn measure_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| PathBuf::from(path).display().to_string())
}
