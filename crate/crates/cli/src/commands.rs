use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use bst_core::hom::{
    confidence_band, pcc_curve, sample_counts, FitBounds, HomError, Interval, ParamName,
};
use bst_core::io::{self as bio, MatrixFile, MatrixPayload, TimetagWriter};
use bst_core::phase::{detect_lobe_centers, masked_amplitudes, Disambiguator, PhaseInterval};
use bst_core::tofs::{for_each_event_chunk, normalized_cross_correlation, rebin_to_wavelength};
use bst_core::{
    build_phase_mask, decompose, fit_interferogram, hom_from_jsa, initial_guess,
    monte_carlo_schmidt, reconstruct_jsi, CurveKind, ExchangeSymmetry, FitResult, Histogram2D,
    HomCurve, HomFitParams, JsaMatrix, JsiMatrix, LobeDetection, PhaseError, TofsError,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Modes written next to `schmidt.json`, per photon.
const MAX_EXPORTED_MODES: usize = 32;

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        let p = self.path(name);
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| CliError::io(&p, e))
    }

    fn write_with<F>(&self, name: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), bio::FormatError>,
    {
        let mut w = self.create(name)?;
        f(&mut w).map_err(|e| CliError::io(&self.path(name), e))?;
        w.flush().map_err(|e| CliError::io(&self.path(name), e))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(CliError::numeric)?;
        text.push('\n');
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn phi_label(phi: f64) -> String {
    format!("{phi:.4}")
}

pub fn simulate(cfg: &PipelineConfig, out: &Path) -> CliResult<()> {
    let grid = cfg.grid()?;
    let jsa = cfg.state.synthesize(&grid).map_err(CliError::numeric)?;
    let jsi = JsiMatrix::from_jsa(&jsa);
    let d = decompose(&jsa).map_err(CliError::numeric)?;
    let k = d.schmidt_number();
    let o = Output::new(out)?;
    o.write_with("jsa.bin", |w| bio::write_jsa(&jsa, w))?;
    o.write_with("jsa.csv", |w| bio::write_jsa_csv(&jsa, w))?;
    let wl = grid.wavelengths();
    o.write_with("jsi.csv", |w| {
        bio::write_map_csv("jsi", "intensity", &wl, &wl, jsi.values(), w)
    })?;
    o.write_with("jsi.pgm", |w| bio::write_pgm(jsi.values(), w))?;

    let m = d.mode_count().min(MAX_EXPORTED_MODES);
    let cols = |modes: &DMatrix<Complex64>| modes.columns(0, m).into_owned();
    o.write_with("modes1.bin", |w| {
        bio::write_modes(d.grid1(), &cols(d.modes1()), w)
    })?;
    o.write_with("modes2.bin", |w| {
        bio::write_modes(d.grid2(), &cols(d.modes2()), w)
    })?;
    o.write_json(
        "schmidt.json",
        &json!({
            "K": k,
            "coefficients": d.coefficients(),
            "mode_count": d.mode_count(),
            "modes": { "photon1": "modes1.bin", "photon2": "modes2.bin", "exported": m },
            "phase_phi_p": cfg.state.phase_phi_p,
            "grid": cfg.grid,
        }),
    )?;
    println!("K = {k:.4} ({} modes) -> {}", d.mode_count(), out.display());
    Ok(())
}

pub fn tofs(cfg: &PipelineConfig, out: &Path, pairs: u64, seed: u64) -> CliResult<()> {
    if pairs == 0 {
        return Err(CliError::Config("--pairs must be at least 1".into()));
    }
    let grid = cfg.grid()?;
    if let Some(w) = cfg.tofs.aliasing_warning(grid.span()) {
        eprintln!("warning: {w}");
    }
    let jsa = cfg.state.synthesize(&grid).map_err(CliError::numeric)?;
    let jsi = JsiMatrix::from_jsa(&jsa);
    let o = Output::new(out)?;
    let tag_path = o.path("timetags.bin");
    let mut writer = TimetagWriter::new(o.create("timetags.bin")?, cfg.tofs.timing_resolution)
        .map_err(|e| CliError::io(&tag_path, e))?;
    let mut hist = Histogram2D::empty(cfg.tofs.histogram_spec());
    enum Failure {
        Tofs(TofsError),
        Write(bio::FormatError),
    }
    impl From<TofsError> for Failure {
        fn from(e: TofsError) -> Self {
            Failure::Tofs(e)
        }
    }
    for_each_event_chunk(&jsi, pairs as usize, &cfg.tofs, seed, |ev| {
        hist.add_events(ev, &cfg.tofs);
        writer.write(ev).map_err(Failure::Write)
    })
    .map_err(|f| match f {
        Failure::Tofs(e) => CliError::numeric(e),
        Failure::Write(e) => CliError::io(&tag_path, e),
    })?;
    let events = writer.count();
    writer.finish().map_err(|e| CliError::io(&tag_path, e))?;
    o.write_with("histogram.bin", |w| bio::write_histogram(&hist, w))?;

    let rec = reconstruct_jsi(&hist, &cfg.tofs).map_err(CliError::numeric)?;
    let counts = hist.counts.map(|c| c as f64);
    let (c1, c2) = (rec.axis1.centers(), rec.axis2.centers());
    o.write_with("jsi_reconstructed.csv", |w| {
        bio::write_map_csv("jsi", "counts", &c1, &c2, &counts, w)
    })?;
    o.write_with("jsi_reconstructed.pgm", |w| bio::write_pgm(&counts, w))?;
    let reference = rebin_to_wavelength(&jsi, &rec.axis1, &rec.axis2);
    let ncc = normalized_cross_correlation(&reference, &rec.density);
    let s = hist.stats;
    o.write_json(
        "tofs.json",
        &json!({
            "pairs": pairs,
            "seed": seed,
            "events": events,
            "coincidences": s.coincidences(),
            "in_range": s.in_range,
            "out_of_range": s.out_of_range,
            "dropped_singles": s.dropped_singles,
            "reconstruction_ncc": ncc,
        }),
    )?;
    println!("accepted coincidences: {}", s.in_range);
    println!("reconstruction correlation: {ncc:.6}");
    Ok(())
}

pub fn hom(cfg: &PipelineConfig, out: &Path, phis: &[f64], sample: Option<u64>) -> CliResult<()> {
    let grid = cfg.grid()?;
    let delays = cfg.hom.delays();
    let (delta, sigma) = cfg.state.nominal_bins();
    let o = Output::new(out)?;
    let mut summary = Vec::new();
    for (idx, &phi) in phis.iter().enumerate() {
        let unit = HomFitParams::new(1.0, 1.0, delta, sigma, phi);
        let p = pcc_curve(&unit, &delays).map_err(CliError::numeric)?;
        let peak = p.iter().cloned().fold(0.0, f64::max);
        let n = cfg.hom.peak_counts / peak;
        let params = HomFitParams { n, ..unit };
        let model: Vec<f64> = p.iter().map(|v| n * v).collect();
        let jsa = cfg
            .state
            .with_phase(phi)
            .synthesize(&grid)
            .map_err(CliError::numeric)?;
        let oracle = hom_from_jsa(&jsa, &delays).map_err(CliError::numeric)?;
        let total = model.iter().sum::<f64>().round().max(1.0) as u64;
        let band = confidence_band(&params, &delays, total, 3.0).map_err(CliError::numeric)?;

        let name = format!("hom_phi_{}.csv", phi_label(phi));
        let mut text = String::from(
            "# bst-hom v1\nposition_mm,delay_ps,counts,oracle,lower_3sigma,upper_3sigma\n",
        );
        for k in 0..delays.len() {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                bst_core::hom::delay_to_stage_position(delays[k]),
                delays[k],
                model[k],
                n * oracle.values[k],
                band.lower[k],
                band.upper[k],
            ));
        }
        let path = o.path(&name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        let mut entry = json!({ "phi": phi, "file": name, "params": params });
        if let Some(seed) = sample {
            let counts = sample_counts(&model, seed, idx as u64).map_err(CliError::numeric)?;
            let curve = HomCurve::new(delays.clone(), counts, CurveKind::Counts)
                .map_err(CliError::numeric)?;
            let sname = format!("hom_sampled_phi_{}.csv", phi_label(phi));
            o.write_with(&sname, |w| bio::write_hom_csv(&curve, w))?;
            entry["sampled_file"] = json!(sname);
            entry["seed"] = json!(seed);
        }
        summary.push(entry);
        println!(
            "phi = {phi:.4}: peak {:.0} counts -> {name}",
            cfg.hom.peak_counts
        );
    }
    o.write_json("hom.json", &summary)
}

/// `name=value` initial-value override.
pub fn parse_init(s: &str) -> Result<(ParamName, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let name: ParamName = k.trim().parse()?;
    let value: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("invalid value in {s:?}"))?;
    Ok((name, value))
}

/// `name=lo:hi` bound override; either side may be empty for unbounded.
pub fn parse_bound(s: &str) -> Result<(ParamName, Interval), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=lo:hi, got {s:?}"))?;
    let name: ParamName = k.trim().parse()?;
    let (lo, hi) = v
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi in {s:?}"))?;
    let side = |t: &str, inf: f64| -> Result<f64, String> {
        let t = t.trim();
        if t.is_empty() {
            Ok(inf)
        } else {
            t.parse().map_err(|_| format!("invalid bound in {s:?}"))
        }
    };
    let (lo, hi) = (side(lo, f64::NEG_INFINITY)?, side(hi, f64::INFINITY)?);
    if !(lo <= hi) {
        return Err(format!("empty interval in {s:?}"));
    }
    Ok((name, Interval::new(lo, hi)))
}

pub fn fit(
    data_path: &Path,
    out: &Path,
    inits: &[(ParamName, f64)],
    bounds_override: &[(ParamName, Interval)],
) -> CliResult<()> {
    let data = bio::read_hom_csv(open(data_path)?).map_err(|e| CliError::reading(data_path, e))?;
    let mut bounds = FitBounds::default();
    for &(name, iv) in bounds_override {
        bounds.set(name, iv);
    }
    let mut init = initial_guess(&data).map_err(|e| CliError::Fit(e.to_string()))?;
    // automatic guesses follow narrowed bounds; explicit ones are checked
    for name in ParamName::ALL {
        let iv = bounds.get(name);
        init.set(name, init.get(name).clamp(iv.lo, iv.hi));
    }
    for &(name, v) in inits {
        init.set(name, v);
    }
    let o = Output::new(out)?;
    let (fit, failure) = match fit_interferogram(&data, init, &bounds) {
        Ok(f) => (f, None),
        Err(HomError::NoConvergence(f)) => {
            let msg = format!("no convergence after {} iterations", f.iterations);
            (*f, Some(CliError::Fit(msg)))
        }
        Err(e @ HomError::InitOutOfBounds { .. }) => return Err(CliError::Config(e.to_string())),
        Err(e) => return Err(CliError::Fit(e.to_string())),
    };
    write_fit(&o, &data, &fit)?;
    let p = &fit.params;
    let se = &fit.standard_errors;
    println!(
        "N = {:.4} ± {:.2e}, V = {:.4} ± {:.2e}, delta = {:.4} ± {:.2e}, sigma = {:.4} ± {:.2e}, phi = {:.4} ± {:.2e}{}",
        p.n, se.n, p.v, se.v, p.delta, se.delta, p.sigma, se.sigma, p.phi, se.phi,
        if fit.converged { "" } else { " (not converged)" }
    );
    failure.map_or(Ok(()), Err)
}

fn write_fit(o: &Output, data: &HomCurve, fit: &FitResult) -> CliResult<()> {
    o.write_json("fit.json", fit)?;
    let model = pcc_curve(&fit.params, &data.delays).map_err(CliError::numeric)?;
    let mut text = String::from("# bst-residuals v1\ndelay_ps,data,model,residual\n");
    for ((t, y), m) in data.delays.iter().zip(&data.values).zip(&model) {
        text.push_str(&format!("{t},{y},{m},{}\n", y - m));
    }
    let p = o.path("residuals.csv");
    std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
}

pub struct InferArgs<'a> {
    pub jsi: &'a Path,
    pub fit: &'a Path,
    pub out: &'a Path,
    pub rounds: usize,
    pub seed: u64,
    pub candidates: Vec<f64>,
}

/// Whether `lattice` is the node list of `grid`.
fn same_nodes(lattice: &[f64], grid: &[f64]) -> bool {
    lattice.len() == grid.len()
        && lattice
            .iter()
            .zip(grid)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs())
}

pub fn infer(cfg: &PipelineConfig, args: InferArgs<'_>) -> CliResult<()> {
    let map =
        bio::read_map_csv(open(args.jsi)?, "jsi").map_err(|e| CliError::reading(args.jsi, e))?;
    let fit_text = std::fs::read_to_string(args.fit).map_err(|e| CliError::io(args.fit, e))?;
    let fit: FitResult = serde_json::from_str(&fit_text)
        .map_err(|e| CliError::Config(format!("{}:{}: {e}", args.fit.display(), e.line())))?;
    if map.values.iter().any(|&v| !(v >= 0.0)) {
        return Err(CliError::Config(format!(
            "{}: intensities must be non-negative",
            args.jsi.display()
        )));
    }

    // counts are used as measured; other intensity maps become expected counts
    let integral = map.values.iter().all(|v| v.fract() == 0.0);
    let sum = map.values.sum();
    if !(sum > 0.0) {
        return Err(CliError::Numeric(format!(
            "{}: map is empty",
            args.jsi.display()
        )));
    }
    let counts = if integral {
        map.values.map(|v| v as u64)
    } else {
        let scale = cfg.mc.total_counts / sum;
        map.values.map(|v| (v * scale).round() as u64)
    };

    let symmetry = if fit.params.phi.cos() >= 0.0 {
        ExchangeSymmetry::Antisymmetric
    } else {
        ExchangeSymmetry::Symmetric
    };
    let centers = detect_lobe_centers(
        &map.values,
        &map.lambda1,
        &map.lambda2,
        LobeDetection::default(),
    )
    .map_err(CliError::numeric)?;
    let mask = build_phase_mask(&map.lambda1, &map.lambda2, centers, symmetry)
        .map_err(CliError::numeric)?;
    let k =
        monte_carlo_schmidt(&counts, &mask, args.rounds, args.seed).map_err(CliError::numeric)?;

    let o = Output::new(args.out)?;
    let grid = cfg.grid()?;
    let wl = grid.wavelengths();
    let on_grid = same_nodes(&map.lambda1, &wl) && same_nodes(&map.lambda2, &wl);
    let amps = masked_amplitudes(&map.values, &mask).map_err(CliError::numeric)?;
    let amps = amps.map(|a| Complex64::new(a, 0.0));
    if on_grid {
        let jsa = JsaMatrix::new_normalized(grid.clone(), grid.clone(), amps)
            .map_err(CliError::numeric)?;
        o.write_with("jsa_inferred.bin", |w| bio::write_jsa(&jsa, w))?;
    } else {
        let step = |l: &[f64]| if l.len() > 1 { l[1] - l[0] } else { 1.0 };
        let (w1, w2) = (step(&map.lambda1), step(&map.lambda2));
        let norm = (amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * (w1 * w2).abs()).sqrt();
        let file = MatrixFile {
            payload: MatrixPayload::JsaWavelength,
            axes: [map.lambda1[0] - w1 / 2.0, w1, map.lambda2[0] - w2 / 2.0, w2],
            normalized: true,
            data: amps / Complex64::new(norm, 0.0),
        };
        o.write_with("jsa_inferred.bin", |w| file.write_to(w))?;
    }
    o.write_with("mask_signs.csv", |w| bio::write_sign_csv(mask.signs(), w))?;

    let measured_jsi = on_grid.then_some(&map.values);
    let dis = Disambiguator::new(
        &grid,
        measured_jsi,
        &cfg.state,
        &args.candidates,
        &cfg.hom.delays(),
    )
    .map_err(CliError::numeric)?;
    let interval = PhaseInterval::from_fit(&fit, cfg.hom.k_sigma);
    let (phase_report, failure) = match dis.select(interval) {
        Ok(r) => (r, None),
        Err(PhaseError::Ambiguous { phis, report }) => (
            *report,
            Some(CliError::Ambiguous(format!(
                "candidates {phis:?} all match the measured phase"
            ))),
        ),
        Err(PhaseError::NoCandidate { report }) => (
            *report,
            Some(CliError::Ambiguous(
                "no candidate matches the measured phase".into(),
            )),
        ),
        Err(e) => return Err(CliError::numeric(e)),
    };
    o.write_json(
        "report.json",
        &json!({
            "schmidt": k,
            "mask": {
                "symmetry": mask.symmetry(),
                "lobe_centers_nm": mask.lobe_centers(),
                "stripe_boundaries_nm": mask.boundaries(),
            },
            "counts_from_map": integral,
            "phase": phase_report,
        }),
    )?;
    println!(
        "K = {:.4} ± {:.4} (3 sigma, {} rounds)",
        k.mean, k.bound, k.rounds
    );
    match phase_report.selected_phi {
        Some(phi) => println!("selected phase: {phi:.4}"),
        None => println!("no phase selected"),
    }
    failure.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_parsing() {
        assert_eq!(parse_init("V=0.9").unwrap(), (ParamName::V, 0.9));
        assert_eq!(parse_init(" phi = 1 ").unwrap(), (ParamName::Phi, 1.0));
        assert!(parse_init("W=1").is_err());
        assert!(parse_init("V").is_err());
        let (n, iv) = parse_bound("sigma=0.5:").unwrap();
        assert_eq!(n, ParamName::Sigma);
        assert_eq!((iv.lo, iv.hi), (0.5, f64::INFINITY));
        assert!(parse_bound("V=1:0").is_err());
        assert!(parse_bound("V=0-1").is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(phi_label(std::f64::consts::FRAC_PI_2), "1.5708");
        assert_eq!(phi_label(0.0), "0.0000");
    }
}
