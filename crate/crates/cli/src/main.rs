use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use topospec::field::{triple_field, SpatialDensity, TripleSpec};
use topospec::invariants::{self, Singularity};
use topospec::spectrum::{self, FormSet, SpectrumDocument};
use topospec::state::{inject_subspace, make_state_with, StateFile, SubspacePerturbation};
use topospec::tomography::{self, Noise, ReconstructOptions};
use topospec::{Error, Grid, Mode, SpectrumOptions};

#[derive(Parser)]
#[command(name = "topospec", version, about = "Topological spectra of OAM-entangled qudit states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a state file.
    State {
        #[command(subcommand)]
        action: StateCmd,
    },
    /// Compute or compare spectra.
    Spectrum {
        #[command(subcommand)]
        action: SpectrumCmd,
    },
    /// Evaluate a single invariant.
    Invariant {
        #[command(subcommand)]
        action: InvariantCmd,
    },
    /// Dependency analysis of the d=3 closed forms.
    Deps {
        #[command(subcommand)]
        action: DepsCmd,
    },
    /// Simulated tomography round trip.
    Tomo {
        #[command(subcommand)]
        action: TomoCmd,
    },
}

#[derive(Subcommand)]
enum StateCmd {
    Make(StateMake),
}

#[derive(Subcommand)]
enum SpectrumCmd {
    Compute(SpectrumCompute),
    Compare(SpectrumCompare),
}

#[derive(Subcommand)]
enum InvariantCmd {
    Eval(InvariantEval),
}

#[derive(Subcommand)]
enum DepsCmd {
    Scan(DepsScan),
}

#[derive(Subcommand)]
enum TomoCmd {
    Run(TomoRun),
}

#[derive(Args)]
struct StateMake {
    /// OAM charges, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    l: Vec<i64>,
    /// Amplitudes as `re` or `re:im`, comma separated; defaults to uniform.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    c: Vec<String>,
    #[arg(long)]
    allow_degenerate: bool,
    /// Draw off-diagonal subspace weights uniformly from `lo,hi`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    perturb: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Canonical18,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Full => Mode::Full,
            ModeArg::Canonical18 => Mode::Canonical18,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Log,
    Linear,
}

#[derive(Args, Clone)]
struct GridOpts {
    /// Radial intervals.
    #[arg(long)]
    grid_nr: Option<usize>,
    /// Azimuthal samples.
    #[arg(long)]
    grid_nphi: Option<usize>,
    /// Outer radius in waist units.
    #[arg(long)]
    rmax: Option<f64>,
    /// Radial sampling variable.
    #[arg(long, value_enum, default_value = "log")]
    grid: GridArg,
}

impl GridOpts {
    fn build(&self, modes: &[i64]) -> Option<Grid> {
        let untouched = self.grid_nr.is_none() && self.grid_nphi.is_none() && self.rmax.is_none();
        if untouched && matches!(self.grid, GridArg::Log) {
            return None;
        }
        let mut g = match self.grid {
            GridArg::Log => Grid::for_modes(modes),
            GridArg::Linear => Grid::linear_for_modes(modes),
        };
        if let Some(n) = self.grid_nr {
            g = g.with_n_r(n);
        }
        if let Some(n) = self.grid_nphi {
            g = g.with_n_phi(n);
        }
        if let Some(r) = self.rmax {
            g.r_max = r;
        }
        Some(g)
    }
}

#[derive(Args)]
struct SpectrumCompute {
    #[arg(long)]
    state: PathBuf,
    #[arg(long, value_enum, default_value = "canonical18")]
    mode: ModeArg,
    #[command(flatten)]
    grid: GridOpts,
    /// Evaluate from photon B's side (flips every sign).
    #[arg(long)]
    swap_photons: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumCompare {
    a: PathBuf,
    b: PathBuf,
    /// Compare this column instead of `glued`.
    #[arg(long, default_value = "glued")]
    column: String,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormsArg {
    Printed,
    Consistent,
    Table,
}

impl From<FormsArg> for FormSet {
    fn from(f: FormsArg) -> FormSet {
        match f {
            FormsArg::Printed => FormSet::Printed,
            FormsArg::Consistent => FormSet::Consistent,
            FormsArg::Table => FormSet::Table,
        }
    }
}

#[derive(Args)]
struct InvariantEval {
    /// Triple label such as 124, 45*, or 1-2-14.
    #[arg(long)]
    label: String,
    /// Charges for the closed forms (d=3).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    l: Option<Vec<i64>>,
    /// State file for the numerical value.
    #[arg(long)]
    state: Option<PathBuf>,
    #[command(flatten)]
    grid: GridOpts,
}

#[derive(Args)]
struct DepsScan {
    #[arg(long, default_value_t = 10)]
    l_range: i64,
    #[arg(long, value_enum, default_value = "printed")]
    forms: FormsArg,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    None,
    Poisson,
    Crosstalk,
}

#[derive(Args)]
struct TomoRun {
    #[arg(long)]
    state: PathBuf,
    /// Expected counts for a unit-probability setting.
    #[arg(long, default_value_t = 1e4)]
    counts: f64,
    #[arg(long, value_enum, default_value = "poisson")]
    noise: NoiseArg,
    /// Crosstalk width in units of l.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Threshold on density-matrix entries; `auto` derives it from the basis block.
    #[arg(long, default_value = "0")]
    epsilon: String,
    #[arg(long, value_enum, default_value = "canonical18")]
    mode: ModeArg,
    /// Skip the spectrum of the reconstructed state.
    #[arg(long)]
    no_spectrum: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}

fn failure_code(e: &Error) -> u8 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn run(cmd: Command) -> topospec::Result<ExitCode> {
    match cmd {
        Command::State { action: StateCmd::Make(a) } => state_make(a),
        Command::Spectrum { action: SpectrumCmd::Compute(a) } => spectrum_compute(a),
        Command::Spectrum { action: SpectrumCmd::Compare(a) } => spectrum_compare(a),
        Command::Invariant { action: InvariantCmd::Eval(a) } => invariant_eval(a),
        Command::Deps { action: DepsCmd::Scan(a) } => deps_scan(a),
        Command::Tomo { action: TomoCmd::Run(a) } => tomo_run(a),
    }
}

fn parse_amplitude(s: &str) -> topospec::Result<Complex64> {
    let bad = || Error::InvalidInput(format!("bad amplitude {s:?}; use re or re:im"));
    let (re, im) = match s.split_once(':') {
        Some((r, i)) => (r, i),
        None => (s, "0"),
    };
    Ok(Complex64::new(
        re.trim().parse().map_err(|_| bad())?,
        im.trim().parse().map_err(|_| bad())?,
    ))
}

fn state_make(a: StateMake) -> topospec::Result<ExitCode> {
    let d = a.l.len();
    let c = if a.c.is_empty() {
        vec![Complex64::new(1.0 / (d as f64).sqrt(), 0.0); d]
    } else {
        a.c.iter().map(|s| parse_amplitude(s)).collect::<topospec::Result<_>>()?
    };
    let state = make_state_with(&a.l, c, a.allow_degenerate)?;
    let pert = match a.perturb {
        Some(v) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
            if v.len() != 2 {
                return Err(Error::InvalidInput("--perturb takes lo,hi".into()));
            }
            if !(0.0..=1.0).contains(&v[0]) || !(v[0]..=1.0).contains(&v[1]) {
                return Err(Error::InvalidInput("perturbation range must satisfy 0 <= lo <= hi <= 1".into()));
            }
            Some(SubspacePerturbation::uniform(d, v[0], v[1], &mut rng))
        }
        None => None,
    };
    StateFile::from_state(&state, pert.as_ref()).write(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn load_density(path: &Path) -> topospec::Result<(SpatialDensity, Vec<i64>)> {
    let file = StateFile::read(path)?;
    let (state, pert) = file.to_state(true)?;
    let density = match pert {
        Some(p) => SpatialDensity::from_perturbed(&inject_subspace(&state, &p)?),
        None => SpatialDensity::from_state(&state),
    };
    Ok((density, state.l))
}

fn create(path: &Path) -> topospec::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> topospec::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn write_spectrum_outputs(
    spec: &topospec::TopologicalSpectrum,
    csv: Option<&Path>,
    json: Option<&Path>,
    svg: Option<&Path>,
) -> topospec::Result<()> {
    let rows = spec.rows();
    if let Some(p) = csv {
        spectrum::write_csv(&rows, create(p)?)?;
    }
    if let Some(p) = json {
        write_json(p, &SpectrumDocument::from(spec))?;
    }
    if let Some(p) = svg {
        std::fs::write(p, spectrum::render_svg(&rows))?;
    }
    Ok(())
}

fn spectrum_compute(a: SpectrumCompute) -> topospec::Result<ExitCode> {
    let (density, modes) = load_density(&a.state)?;
    let options = SpectrumOptions {
        grid: a.grid.build(&modes),
        swap_photons: a.swap_photons,
    };
    let spec = spectrum::compute_spectrum_density(&density, a.mode.into(), &options)?;
    write_spectrum_outputs(&spec, a.csv.as_deref(), a.json.as_deref(), a.svg.as_deref())?;
    let nonzero = spec.entries.iter().filter(|e| !e.trivial).count();
    let failed = spec.entries.iter().filter(|e| !e.converged).count();
    if a.csv.is_none() && a.json.is_none() {
        let mut out = std::io::stdout().lock();
        spectrum::write_csv(&spec.rows(), &mut out)?;
    }
    eprintln!("{} triples, {} nontrivial, {} not converged", spec.entries.len(), nonzero, failed);
    Ok(if failed > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn read_column(path: &Path, column: &str) -> topospec::Result<Vec<f64>> {
    let rows = spectrum::read_csv(File::open(path)?)?;
    rows.iter()
        .map(|r| match column {
            "glued" => Ok(r.glued),
            "raw" => Ok(r.raw),
            "analytic" => r
                .analytic
                .as_deref()
                .and_then(spectrum::parse_rational)
                .map(|q| *q.numer() as f64 / *q.denom() as f64)
                .ok_or_else(|| Error::InvalidInput(format!("missing analytic value for {}", r.triple_label))),
            _ => Err(Error::InvalidInput(format!("unknown column {column:?}"))),
        })
        .collect()
}

fn spectrum_compare(a: SpectrumCompare) -> topospec::Result<ExitCode> {
    let va = read_column(&a.a, &a.column)?;
    let vb = read_column(&a.b, &a.column)?;
    let s = spectrum::similarity(&va, &vb)?;
    println!("residual {:.6}", s.residual);
    println!("cosine {:.6}", s.cosine);
    if let Some(p) = a.json {
        write_json(&p, &s)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn invariant_eval(a: InvariantEval) -> topospec::Result<ExitCode> {
    if a.l.is_none() && a.state.is_none() {
        return Err(Error::InvalidInput("pass --l for closed forms or --state for quadrature".into()));
    }
    let mut report = serde_json::Map::new();
    report.insert("label".into(), json!(a.label));
    if let Some(l) = &a.l {
        let l3: [i64; 3] = l
            .as_slice()
            .try_into()
            .map_err(|_| Error::DimensionMismatch("closed forms take three charges".into()))?;
        let printed = invariants::wrapping_analytic_d3(&a.label, l3)?;
        let consistent = invariants::wrapping_consistent_d3(&a.label, l3)?;
        println!("printed    {}{}", spectrum::format_rational(printed.value), if printed.tie { " (tie)" } else { "" });
        println!("consistent {}{}", spectrum::format_rational(consistent.value), if consistent.tie { " (tie)" } else { "" });
        report.insert("printed".into(), json!(spectrum::format_rational(printed.value)));
        report.insert("consistent".into(), json!(spectrum::format_rational(consistent.value)));
        report.insert("tie".into(), json!(printed.tie || consistent.tie));
        if let Ok(class) = invariants::singularity_class(&a.label, l3) {
            let singular = class == Singularity::SingularAtOrigin;
            println!("singular   {singular}");
            report.insert("singular".into(), json!(singular));
        }
    }
    if let Some(path) = &a.state {
        let (density, modes) = load_density(path)?;
        let spec = TripleSpec::parse(&a.label, density.d)?;
        let entry = spectrum::evaluate_triple(&density, &spec, a.grid.build(&modes))?;
        println!("class      {}", entry.map_class.as_str());
        println!("raw        {:.6}", entry.raw);
        println!("glued      {:.6}", entry.glued);
        if let Some(q) = entry.analytic {
            println!("limit      {}", spectrum::format_rational(q));
        }
        println!("error      {:.2e}", entry.quadrature_error);
        let field = triple_field(&density, &spec, false, None)?;
        let growth = invariants::origin_growth(&field);
        println!("growth     {:.3}", growth.ratio);
        report.insert("raw".into(), json!(entry.raw));
        report.insert("glued".into(), json!(entry.glued));
        report.insert("map_class".into(), json!(entry.map_class.as_str()));
        if !entry.converged {
            return Err(Error::NonConvergent { raw: entry.raw, error: entry.quadrature_error });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn deps_scan(a: DepsScan) -> topospec::Result<ExitCode> {
    if a.l_range < 3 {
        return Err(Error::InvalidInput(format!("l_range must be at least 3, got {}", a.l_range)));
    }
    let r = spectrum::dependency_scan(a.l_range, a.forms.into())?;
    println!("samples {}", r.samples);
    println!("rank {}", r.rank);
    for c in r.relations.iter().chain(&r.pairwise) {
        let status = if c.all_hold() { "holds" } else { "fails" };
        match c.counterexample {
            Some(l) if !c.all_hold() => println!("{:<22} {status} {}/{} first failure l={:?}", c.name, c.holds, c.samples, l),
            _ => println!("{:<22} {status} {}/{}", c.name, c.holds, c.samples),
        }
    }
    if let Some(p) = a.json {
        write_json(&p, &r)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn tomo_run(a: TomoRun) -> topospec::Result<ExitCode> {
    let file = StateFile::read(&a.state)?;
    let (state, pert) = file.to_state(false)?;
    let d = state.d();
    let set = tomography::projection_set(d, &state.l)?;
    let rho_t = match &pert {
        None => tomography::pure_density(&state),
        Some(_) => {
            return Err(Error::Unsupported(
                "tomography of perturbed states is not modelled; pass an unperturbed state".into(),
            ))
        }
    };
    let noise = match a.noise {
        NoiseArg::None => Noise::None,
        NoiseArg::Poisson => Noise::Poisson,
        NoiseArg::Crosstalk => Noise::PoissonCrosstalk { sigma: a.sigma },
    };
    let counts = tomography::simulate_coincidences(&rho_t, &set, a.counts, noise, a.seed)?;
    let epsilon = if a.epsilon == "auto" {
        tomography::epsilon_from_crosstalk(&counts, &set)
    } else {
        a.epsilon
            .parse::<f64>()
            .ok()
            .filter(|e| *e >= 0.0)
            .ok_or_else(|| Error::InvalidInput(format!("bad epsilon {:?}", a.epsilon)))?
    };
    let rec = tomography::reconstruct(&counts, &set, epsilon, &ReconstructOptions::default())?;
    let m = tomography::metrics(&rho_t, &rec.rho)?;
    std::fs::create_dir_all(&a.out_dir)?;
    tomography::write_counts_csv(&counts, &set, create(&a.out_dir.join("coincidences.csv"))?)?;
    write_json(&a.out_dir.join("density.json"), &tomography::density_to_json(&rec.rho))?;
    let meta = json!({
        "seed": a.seed,
        "counts": a.counts,
        "noise": noise,
        "epsilon": epsilon,
        "settings": set.settings(),
        "chi2": rec.chi2,
        "iterations": rec.iterations,
        "thresholded": rec.thresholded,
        "fidelity": m.fidelity,
        "purity": m.purity,
        "concurrence": m.concurrence,
    });
    write_json(&a.out_dir.join("metrics.json"), &meta)?;
    println!("settings {}", set.settings());
    println!("fidelity {:.6}", m.fidelity);
    println!("purity {:.6}", m.purity);
    if let Some(c) = m.concurrence {
        println!("concurrence {c:.6}");
    }
    if !a.no_spectrum {
        let l_b: Vec<i64> = state.l.iter().map(|l| -l).collect();
        let mode: Mode = a.mode.into();
        let mode = if d != 3 { Mode::Full } else { mode };
        let reconstructed = tomography::spectrum_from_density(&rec.rho, &state.l, &l_b, mode, &SpectrumOptions::default())?;
        let ideal = spectrum::compute_spectrum(&state, mode, &SpectrumOptions::default())?;
        write_spectrum_outputs(&reconstructed, Some(&a.out_dir.join("spectrum.csv")), None, None)?;
        match spectrum::similarity(&ideal.glued(), &reconstructed.glued()) {
            Ok(s) => println!("spectrum residual {:.6} cosine {:.6}", s.residual, s.cosine),
            Err(e) => println!("spectrum similarity unavailable: {e}"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_exit_with_two() {
        assert_eq!(failure_code(&Error::NonConvergent { raw: 0.4, error: 0.1 }), 2);
        assert_eq!(failure_code(&Error::InvalidInput("x".into())), 1);
        assert_eq!(failure_code(&Error::Unsupported("x".into())), 1);
    }

    #[test]
    fn amplitudes_parse() {
        assert_eq!(parse_amplitude("0.5").unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(parse_amplitude("-1:2").unwrap(), Complex64::new(-1.0, 2.0));
        assert!(parse_amplitude("a:b").is_err());
    }
}
