//! The `troprelu` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};
use crate::io::{csv, report, sherlock, spec_file::SpecFile};
use crate::network::{self, ChainMode, Domain, InputSubdivision, Network, Options, Slot, Track};
use crate::spec_check::{self, Status, Verdict};
use crate::subdivision::{SubdivisionConfig, SubdivisionGrid, SubdivisionMode, DEFAULT_CELL_BUDGET};
use crate::tropical::DEFAULT_EPS;

pub const EXIT_VERIFIED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Box,
    Zone,
    External,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DomainArg {
    Zone,
    Octagon,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrackArg {
    Io,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SubdivModeArg {
    Cellwise,
    Extra,
    Both,
}

/// Range analysis of ReLU networks with tropical polyhedra.
///
/// Exit status: 0 when every assertion is verified, 2 when some assertion
/// is unknown, 1 on error.
#[derive(Debug, Parser)]
#[command(name = "troprelu", version)]
struct Args {
    /// Sherlock network file.
    #[arg(long)]
    network: PathBuf,
    /// JSON specification: input box and assertions.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum, default_value = "zone")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "zone")]
    domain: DomainArg,
    /// Nodes kept in the final abstraction.
    #[arg(long, value_enum, default_value = "io")]
    track: TrackArg,
    /// Input subdivision, e.g. `x1:2,x2:4`; unlisted inputs stay whole.
    #[arg(long)]
    subdiv: Option<String>,
    #[arg(long, value_enum, default_value = "cellwise")]
    subdiv_mode: SubdivModeArg,
    #[arg(long, default_value_t = DEFAULT_CELL_BUDGET)]
    cell_budget: usize,
    /// Write the JSON report here (`-` for stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    no_timings: bool,
    /// CSV projection `label,label:path`, e.g. `y1,y2:out.csv`; repeatable.
    #[arg(long)]
    csv: Vec<String>,
    /// Membership and verdict tolerance.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    /// Apply ReLU to the output layer regardless of the file's directive.
    #[arg(long)]
    output_relu: bool,
}

fn parse_subdiv(text: &str, inputs: usize) -> Result<Vec<usize>> {
    let mut counts = vec![1; inputs];
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::InvalidSpec(format!("bad subdivision entry '{part}', expected x<k>:<pieces>"));
        let (var, n) = part.split_once(':').ok_or_else(bad)?;
        let k: usize = var.trim().strip_prefix('x').and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let n: usize = n.trim().parse().ok().filter(|&n| n > 0).ok_or_else(bad)?;
        if k == 0 || k > inputs {
            return Err(Error::InvalidSpec(format!("no input x{k}")));
        }
        counts[k - 1] = n;
    }
    Ok(counts)
}

fn parse_csv_target(net: &Network, text: &str) -> Result<((Slot, Slot), PathBuf)> {
    let bad = || Error::InvalidSpec(format!("bad csv target '{text}', expected a,b:path"));
    let (dims, path) = text.split_once(':').ok_or_else(bad)?;
    let (a, b) = dims.split_once(',').ok_or_else(bad)?;
    let slot = |l: &str| {
        net.parse_slot(l.trim())
            .ok_or_else(|| Error::InvalidSpec(format!("unknown node '{}'", l.trim())))
    };
    Ok(((slot(a)?, slot(b)?), PathBuf::from(path)))
}

fn execute(args: Args, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    let parse_opts = sherlock::ParseOptions {
        relu_output: args.output_relu.then_some(true),
        ..Default::default()
    };
    let net = sherlock::read_with(&args.network, parse_opts)?;
    let spec = SpecFile::read(&args.spec)?;
    spec.validate(&net)?;
    let subdivision = match &args.subdiv {
        None => None,
        Some(s) => Some(InputSubdivision {
            counts: parse_subdiv(s, net.inputs())?,
            config: SubdivisionConfig {
                mode: match args.subdiv_mode {
                    SubdivModeArg::Cellwise => SubdivisionMode::CellwiseUnion,
                    SubdivModeArg::Extra => SubdivisionMode::ExtraConstraints,
                    SubdivModeArg::Both => SubdivisionMode::Both,
                },
                cell_budget: args.cell_budget,
                ..SubdivisionConfig::default()
            },
        }),
    };
    let opts = Options {
        mode: match args.mode {
            ModeArg::Box => ChainMode::Box,
            ModeArg::Zone => ChainMode::Zone,
            ModeArg::External => ChainMode::External,
        },
        domain: match args.domain {
            DomainArg::Zone => Domain::Zone,
            DomainArg::Octagon => Domain::Octagon,
        },
        track: match args.track {
            TrackArg::Io => Track::Io,
            TrackArg::All => Track::All,
        },
        subdivision,
        eps: args.eps,
    };
    let csv_targets = args
        .csv
        .iter()
        .map(|t| parse_csv_target(&net, t))
        .collect::<Result<Vec<_>>>()?;

    let t0 = Instant::now();
    let res = network::analyze(&net, &spec.input_box, &opts)?;
    let analysis_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let verdicts = spec
        .assertions
        .iter()
        .map(|a| -> Result<Verdict> {
            let whole = spec_check::check(a, &res, opts.eps)?;
            match &opts.subdivision {
                Some(s) if whole.status == Status::Unknown => {
                    let grid = SubdivisionGrid::uniform(&spec.input_box, &s.counts)?;
                    spec_check::check_with_subdivision(a, &net, &grid, &opts, s.config.cell_budget)
                }
                _ => Ok(whole),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let check_ms = t1.elapsed().as_secs_f64() * 1e3;

    // a report on stdout must stay parseable, so the summary moves to stderr
    let summary: &mut dyn Write = match &args.report {
        Some(p) if p.as_os_str() == "-" => err,
        _ => &mut *out,
    };
    for v in &verdicts {
        writeln!(summary, "{}: {:?} (min {})", v.name, v.status, v.witness)?;
    }
    for (dims, path) in &csv_targets {
        csv::emit_projection_csv(&net, &res, *dims, path)?;
    }
    if let Some(path) = &args.report {
        let timings = (!args.no_timings).then_some(report::Timings { analysis_ms, check_ms });
        let json = report::Report::build(&net, &opts, &res, &verdicts, timings).to_json()?;
        if path.as_os_str() == "-" {
            out.write_all(json.as_bytes())?;
        } else {
            std::fs::write(path, json)?;
        }
    }
    Ok(verdicts.iter().all(|v| v.status == Status::Verified))
}

/// Runs the CLI and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_VERIFIED };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(args, out, err) {
        Ok(true) => EXIT_VERIFIED,
        Ok(false) => EXIT_UNKNOWN,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
