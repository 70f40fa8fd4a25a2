//! Command-line front end: build states, run the witness battery, scan
//! interferometer fringes and uncertainty regions, sample measurements and
//! regenerate figure and table data.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use bosewitness::fock::Operator;
use bosewitness::interferometer::{
    evolve_sequence, fringe, ramsey, sample_many, PulseSpec, SequenceElement, SzSampler,
};
use bosewitness::registry::{parse_real, Descriptor};
use bosewitness::serial::{fmt_f64, state_from_json, state_to_json, to_json_compact, to_json_string};
use bosewitness::spin::{evaluate_frame, SpinFrame, SpinOperators};
use bosewitness::states::Structure;
use bosewitness::witness::{hup_region, run_battery, summarize, BatteryConfig, HupRegion, Verdict, WitnessReport};
use bosewitness::{expectation_real, QuantumState, Tolerances};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

const DESCRIPTOR_HELP: &str = "\
State descriptors have the form name:key=value,... with angles in radians.
Values may be written with pi: pi/4, 3*pi/4, -pi.

  noon:N=4,theta=0.7854          cos(theta)|N,0> + sin(theta)|0,N>
  binomial:N=10,theta=pi/8,chi=0 N bosons in one rotated mode
  relphase:N=100,p=0             relative-phase state (or theta_p=<angle>)
  cohmix:alpha2=2,nmax=40        phase-averaged two-mode coherent state
  verstraete                     two-mode single-boson mixture
  fock:occ=3/1                   Fock state, occupations separated by '/'
  case3:N=100,pairs=2            relative-phase state on the first pair
  case3sum:N=8,pairs=2           binomial(N, pi/8) on every pair
  separable:structure=case2,pairs=2,seed=7,nmax=6
                                 seeded random separable state

Set BOSEWITNESS_THREADS to cap parallelism.";

#[derive(Parser)]
#[command(name = "bosewitness", version, about = "Entanglement tests, spin squeezing and interferometry for bosonic modes", after_help = DESCRIPTOR_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and inspect states.
    #[command(subcommand)]
    State(StateCommand),
    /// Run entanglement tests.
    #[command(subcommand)]
    Witness(WitnessCommand),
    /// Parameter scans written as CSV.
    #[command(subcommand)]
    Scan(ScanCommand),
    /// Repeated S_z measurements after a pulse sequence.
    Sample(SampleArgs),
    /// Regenerate a figure or table data set.
    Reproduce(ReproduceArgs),
}

#[derive(Subcommand)]
enum StateCommand {
    /// Write a state file from a descriptor and print its summary.
    Make {
        /// State descriptor, e.g. noon:N=4,theta=0.7854.
        descriptor: String,
        /// Output path; the JSON goes to stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum WitnessCommand {
    /// Run the full battery on one state.
    Run(WitnessArgs),
}

#[derive(Args)]
struct StateInput {
    /// State descriptor.
    #[arg(short, long, conflicts_with = "state")]
    descriptor: Option<String>,
    /// State file written by `state make`.
    #[arg(short, long)]
    state: Option<PathBuf>,
}

impl StateInput {
    fn load(&self) -> Result<(QuantumState, Option<Descriptor>)> {
        match (&self.descriptor, &self.state) {
            (Some(d), None) => {
                let desc = Descriptor::parse(d)?;
                Ok((desc.build()?, Some(desc)))
            }
            (None, Some(p)) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok((state_from_json(&text)?, None))
            }
            _ => bail!("give exactly one of --descriptor or --state"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StructureArg {
    TwoMode,
    Case1,
    Case2,
    Case3,
    Case3OneBoson,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct WitnessArgs {
    #[command(flatten)]
    input: StateInput,
    /// Sub-system structure; defaults to the descriptor's, else two modes or every mode separate.
    #[arg(long, value_enum)]
    structure: Option<StructureArg>,
    /// Number of mode pairs for multi-mode structures.
    #[arg(long)]
    pairs: Option<usize>,
    /// Correlation exponents m,n (repeatable); defaults to 1,1 and 2,2.
    #[arg(long = "correlation-order", value_parser = parse_order)]
    orders: Vec<(u32, u32)>,
    /// Quadrature angle in radians.
    #[arg(long, default_value = "0", value_parser = parse_angle)]
    quadrature_theta: f64,
    /// Firing ratio for the number-difference test; inapplicable when omitted.
    #[arg(long)]
    number_diff_ratio: Option<f64>,
    /// Relative margin a strict inequality must clear.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Format written to stdout when no output path is given.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the CSV report here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Golden verdict file; exit status 3 when the verdicts differ.
    #[arg(long)]
    expect: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ScanCommand {
    /// Mean and variance of S_z after one pulse, over a phase grid.
    Fringe(FringeArgs),
    /// Allowed range of Var(S_x) against |<S_z>| from the uncertainty relation.
    HupRegion(HupArgs),
}

#[derive(Args)]
struct FringeArgs {
    #[command(flatten)]
    input: StateInput,
    /// Pulse area.
    #[arg(long, default_value = "pi/2", value_parser = parse_angle)]
    theta: f64,
    #[arg(long, default_value = "-pi", value_parser = parse_angle)]
    phi_min: f64,
    #[arg(long, default_value = "pi", value_parser = parse_angle)]
    phi_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 73)]
    points: usize,
    /// Measurements per grid point; 0 leaves the sample columns empty.
    #[arg(short = 'R', long, default_value_t = 1000)]
    repetitions: usize,
    /// Base seed; grid point k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HupArgs {
    #[arg(long = "J")]
    j: f64,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Number of |<S_z>| points on [0, J], endpoints included.
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    input: StateInput,
    /// Sequence file: a JSON list of {"pulse":{...}}, {"free":{...}} or "phase_changer".
    #[arg(long, conflicts_with = "pulse")]
    sequence: Option<PathBuf>,
    /// Single pulse as theta,phi.
    #[arg(long, value_parser = parse_pulse)]
    pulse: Option<PulseSpec>,
    #[arg(short = 'R', long, default_value_t = 1000)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of independent records, seeds seed..seed+records.
    #[arg(long, default_value_t = 1)]
    records: u64,
    /// Drop the individual outcomes from the output.
    #[arg(long)]
    summary_only: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReproduceId {
    /// Uncertainty region at J = 1000, xi = 1.
    HupJ1000Xi1,
    /// Uncertainty region at J = 1000, xi = 10.
    HupJ1000Xi10,
    /// Uncertainty region at J = 1, xi = 10, with an excluded interval.
    HupJ1Xi10,
    /// Ramsey fringes of 20 bosons with and without collisions.
    RamseyFringe,
    /// Phase scan of the N = 1000 relative-phase state.
    RelphaseFringe,
    /// Verdict table for the named example states.
    WitnessSummary,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    id: ReproduceId,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    parse_real(s).ok_or_else(|| format!("'{s}' is not a number"))
}

fn parse_order(s: &str) -> std::result::Result<(u32, u32), String> {
    let (m, n) = s.split_once(',').ok_or("expected m,n")?;
    let p = |x: &str| x.trim().parse::<u32>().map_err(|_| format!("'{x}' is not a positive integer"));
    Ok((p(m)?, p(n)?))
}

fn parse_pulse(s: &str) -> std::result::Result<PulseSpec, String> {
    let (t, p) = s.split_once(',').ok_or("expected theta,phi")?;
    PulseSpec::new(parse_angle(t)?, parse_angle(p)?).map_err(|e| e.to_string())
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

fn frame_of(state: &QuantumState) -> Result<SpinFrame> {
    let ops = SpinOperators::adjacent_pairs(state.basis().clone())?;
    Ok(evaluate_frame(&ops, state)?)
}

fn state_make(descriptor: &str, output: Option<&Path>) -> Result<()> {
    let desc = Descriptor::parse(descriptor)?;
    let st = desc.build()?;
    let json = state_to_json(&st);
    let n_mean = expectation_real(&Operator::total_number(st.basis().clone()), &st)?;
    let ssr = st.ssr();
    let summary = format!(
        "state: {}\nmodes: {}\nsectors: {:?}\nkind: {}\nmean boson number: {}\nglobal SSR: {}\nlocal SSR: {}\ndiscarded mass: {}\n",
        desc.source(),
        st.basis().num_modes(),
        st.basis().sectors(),
        if st.is_pure() { "pure" } else { "mixed" },
        fmt_f64(n_mean),
        ssr.global_compliant,
        ssr.local_compliant,
        fmt_f64(st.discarded_mass()),
    );
    match output {
        Some(p) => {
            write_out(Some(p), &json)?;
            print!("{summary}");
        }
        None => {
            print!("{json}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn structure_for(args: &WitnessArgs, state: &QuantumState, desc: Option<&Descriptor>) -> Result<Structure> {
    let pairs = args.pairs.unwrap_or(state.basis().num_modes() / 2);
    Ok(match args.structure {
        Some(StructureArg::TwoMode) => Structure::TwoMode,
        Some(StructureArg::Case1) => Structure::Case1 { pairs },
        Some(StructureArg::Case2) => Structure::Case2 { pairs },
        Some(StructureArg::Case3) => Structure::Case3 { pairs, one_boson: false },
        Some(StructureArg::Case3OneBoson) => Structure::Case3 { pairs, one_boson: true },
        None => match desc {
            Some(d) => d.structure()?,
            None => BatteryConfig::for_state(state)?.structure,
        },
    })
}

fn report_rows(reports: &[WitnessReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            vec![
                r.test_id.clone(),
                r.inequality.clone(),
                r.frame.clone(),
                r.verdict.as_str().to_string(),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                fmt_f64(r.margin),
                fmt_f64(r.tolerance),
                to_json_compact(&r.params),
            ]
        })
        .collect()
}

const REPORT_HEADER: [&str; 9] =
    ["test_id", "paper_eq", "frame", "verdict", "lhs", "rhs", "margin", "tolerance", "params"];

/// Golden files map test ids to verdicts; the key `*` constrains every test
/// that is not inapplicable.
fn compare_golden(summary: &BTreeMap<String, Verdict>, golden: &BTreeMap<String, Verdict>) -> Vec<String> {
    let mut diffs = Vec::new();
    for (id, want) in golden {
        if id == "*" {
            for (tid, got) in summary {
                if *got != Verdict::Inapplicable && got != want && !golden.contains_key(tid) {
                    diffs.push(format!("{tid}: expected {}, got {}", want.as_str(), got.as_str()));
                }
            }
            continue;
        }
        match summary.get(id) {
            Some(got) if got == want => {}
            Some(got) => diffs.push(format!("{id}: expected {}, got {}", want.as_str(), got.as_str())),
            None => diffs.push(format!("{id}: not reported")),
        }
    }
    diffs
}

fn witness_run(args: &WitnessArgs) -> Result<ExitCode> {
    if args.tol.is_nan() || args.tol <= 0.0 {
        bail!("--tol must be positive");
    }
    let (state, desc) = args.input.load()?;
    let structure = structure_for(args, &state, desc.as_ref())?;
    let mut config = BatteryConfig::new(structure);
    config.tolerances = Tolerances { verdict: args.tol, ..Tolerances::default() };
    if !args.orders.is_empty() {
        config.correlation_orders = args.orders.clone();
    }
    config.quadrature_theta = args.quadrature_theta;
    config.number_diff_ratio = args.number_diff_ratio;
    let result = run_battery(&state, &config)?;

    let json = to_json_string(&result.reports);
    let csv = csv_text(&REPORT_HEADER, &report_rows(&result.reports))?;
    if let Some(p) = &args.json {
        write_out(Some(p), &json)?;
    }
    if let Some(p) = &args.csv {
        write_out(Some(p), &csv)?;
    }
    if args.json.is_none() && args.csv.is_none() {
        write_out(None, if args.format == Format::Json { &json } else { &csv })?;
    } else {
        for (id, v) in result.summary() {
            println!("{id}: {}", v.as_str());
        }
    }

    if let Some(golden) = &args.expect {
        let text = fs::read_to_string(golden).with_context(|| format!("reading {}", golden.display()))?;
        let want: BTreeMap<String, Verdict> = serde_json::from_str(&text).context("parsing golden file")?;
        let diffs = compare_golden(&summarize(&result.reports), &want);
        if !diffs.is_empty() {
            for d in &diffs {
                eprintln!("verdict mismatch: {d}");
            }
            return Ok(ExitCode::from(3));
        }
        eprintln!("verdicts match {}", golden.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        bail!("grid needs at least one point");
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    Ok((0..points).map(|k| min + (max - min) * k as f64 / (points - 1) as f64).collect())
}

fn fringe_rows(state: &QuantumState, theta: f64, phis: &[f64], r: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    let frame = frame_of(state)?;
    let predicted = fringe(&frame, theta, phis);
    let samples: Vec<Option<(f64, f64)>> = if r == 0 {
        vec![None; phis.len()]
    } else {
        phis.par_iter()
            .enumerate()
            .map(|(k, &phi)| -> Result<Option<(f64, f64)>> {
                let seq = [SequenceElement::Pulse(PulseSpec::new(theta, phi)?)];
                let out = evolve_sequence(state, &seq)?;
                let rec = SzSampler::new(&out).record(r, seed.wrapping_add(k as u64))?;
                Ok(Some((rec.sample_mean, (rec.sample_variance / r as f64).sqrt())))
            })
            .collect::<Result<_>>()?
    };
    Ok(predicted
        .iter()
        .zip(samples)
        .map(|(p, s)| {
            let (sm, se) = s.map(|(m, e)| (fmt_f64(m), fmt_f64(e))).unwrap_or_default();
            vec![fmt_f64(p.phi), fmt_f64(p.mean), fmt_f64(p.variance), sm, se]
        })
        .collect())
}

const FRINGE_HEADER: [&str; 5] = ["phi", "mean", "variance", "sample_mean", "sample_stderr"];

fn scan_fringe(args: &FringeArgs) -> Result<()> {
    let (state, _) = args.input.load()?;
    let phis = grid(args.phi_min, args.phi_max, args.points)?;
    let rows = fringe_rows(&state, args.theta, &phis, args.repetitions, args.seed)?;
    write_out(args.output.as_deref(), &csv_text(&FRINGE_HEADER, &rows)?)
}

fn hup_rows(j: f64, xi: f64, points: usize) -> Result<Vec<Vec<String>>> {
    grid(0.0, j, points)?
        .into_iter()
        .map(|sz| {
            Ok(match hup_region(j, xi, sz)? {
                HupRegion::Allowed { lower, upper } => {
                    vec![fmt_f64(sz), fmt_f64(lower), fmt_f64(upper), "false".into()]
                }
                HupRegion::Excluded => vec![fmt_f64(sz), String::new(), String::new(), "true".into()],
            })
        })
        .collect()
}

const HUP_HEADER: [&str; 4] = ["sz", "lower", "upper", "excluded"];

fn scan_hup(args: &HupArgs) -> Result<()> {
    write_out(args.output.as_deref(), &csv_text(&HUP_HEADER, &hup_rows(args.j, args.xi, args.points)?)?)
}

fn sample(args: &SampleArgs) -> Result<()> {
    let (state, _) = args.input.load()?;
    let seq: Vec<SequenceElement> = match (&args.sequence, args.pulse) {
        (Some(p), None) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).context("parsing sequence file")?
        }
        (None, Some(p)) => vec![SequenceElement::Pulse(p)],
        (None, None) => vec![],
        _ => bail!("give at most one of --sequence or --pulse"),
    };
    if args.records == 0 {
        bail!("--records must be at least 1");
    }
    let seeds: Vec<u64> = (0..args.records).map(|k| args.seed.wrapping_add(k)).collect();
    let mut recs = sample_many(&state, &seq, args.repetitions, &seeds)?;
    if args.summary_only {
        for r in &mut recs {
            r.samples.clear();
        }
    }
    write_out(args.output.as_deref(), &to_json_string(&recs))
}

fn reproduce_witness_summary() -> Result<String> {
    let states = [
        "relphase:N=1000,p=0",
        "cohmix:alpha2=2,nmax=40",
        "verstraete",
        "noon:N=4,theta=pi/4",
        "binomial:N=10,theta=pi/8,chi=0",
        "case3:N=100,pairs=2",
        "case3sum:N=8,pairs=2",
        "separable:structure=case2,pairs=2,seed=1",
    ];
    let results: Vec<(String, BTreeMap<String, Verdict>)> = states
        .par_iter()
        .map(|d| -> Result<_> {
            let desc = Descriptor::parse(d)?;
            let st = desc.build()?;
            let mut config = BatteryConfig::new(desc.structure()?);
            if d.starts_with("noon") {
                config.correlation_orders.push((4, 4));
            }
            Ok((d.to_string(), run_battery(&st, &config)?.summary()))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = results
        .into_iter()
        .flat_map(|(d, s)| s.into_iter().map(move |(id, v)| vec![d.clone(), id, v.as_str().to_string()]))
        .collect();
    csv_text(&["state", "test_id", "verdict"], &rows)
}

fn reproduce_ramsey() -> Result<String> {
    let n = 20u32;
    let state = QuantumState::fock(bosewitness::FockBasis::two_mode(n as usize), &[n, 0])?;
    let phis = grid(-PI, PI, 73)?;
    let mut rows = Vec::new();
    for chi_t in [0.0, 0.01, 0.02, 0.05] {
        let results: Vec<_> =
            phis.par_iter().map(|&phi2| ramsey(&state, 1.0, chi_t, phi2)).collect::<Result<_, _>>()?;
        for (phi2, r) in phis.iter().zip(results) {
            rows.push(vec![
                fmt_f64(chi_t),
                fmt_f64(*phi2),
                fmt_f64(r.predicted_mean),
                fmt_f64(r.predicted_variance),
                fmt_f64(r.intermediate.xi2),
                r.intermediate.squeezed.to_string(),
            ]);
        }
    }
    csv_text(&["chi_T", "phi2", "mean", "variance", "xi2", "squeezed"], &rows)
}

fn reproduce(args: &ReproduceArgs) -> Result<()> {
    let text = match args.id {
        ReproduceId::HupJ1000Xi1 => csv_text(&HUP_HEADER, &hup_rows(1000.0, 1.0, 1001)?)?,
        ReproduceId::HupJ1000Xi10 => csv_text(&HUP_HEADER, &hup_rows(1000.0, 10.0, 1001)?)?,
        ReproduceId::HupJ1Xi10 => csv_text(&HUP_HEADER, &hup_rows(1.0, 10.0, 201)?)?,
        ReproduceId::RamseyFringe => reproduce_ramsey()?,
        ReproduceId::RelphaseFringe => {
            let st = bosewitness::make_state("relphase:N=1000,p=0")?;
            let phis = grid(-PI, PI, 181)?;
            csv_text(&FRINGE_HEADER, &fringe_rows(&st, FRAC_PI_2, &phis, 1000, 0)?)?
        }
        ReproduceId::WitnessSummary => reproduce_witness_summary()?,
    };
    write_out(args.output.as_deref(), &text)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("BOSEWITNESS_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("BOSEWITNESS_THREADS='{v}' is not a count"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_threads()?;
    match cli.command {
        Command::State(StateCommand::Make { descriptor, output }) => state_make(&descriptor, output.as_deref())?,
        Command::Witness(WitnessCommand::Run(args)) => return witness_run(&args),
        Command::Scan(ScanCommand::Fringe(args)) => scan_fringe(&args)?,
        Command::Scan(ScanCommand::HupRegion(args)) => scan_hup(&args)?,
        Command::Sample(args) => sample(&args)?,
        Command::Reproduce(args) => reproduce(&args)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
