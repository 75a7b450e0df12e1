use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use refind::config::{family_spec, SegmentOptions};
use refind::driver::{run_observed, IterationRecord, RunState};
use refind::exec::Execution;
use refind::indicators::SignVote;
use refind::io::{self, Image};
use refind::strategies::{FamilySpec, SignMode, StrategyKind};
use refind::verify::{self, VerifyOptions};
use refind::{CoarseParam, IdentityModel, Mesh, Result, Zonation};

#[derive(Parser)]
#[command(name = "refind", version, about = "Adaptive zonation by refinement indicators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Segment a PNM image with the identity model.
    Segment(SegmentArgs),
    /// Run the randomized self-checks.
    Verify(VerifyArgs),
    /// Serve the identity model for a PNM image over stdin/stdout.
    WorkerIdentity {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Args)]
struct SegmentArgs {
    /// Key = value file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<StrategyKind>,
    #[arg(long)]
    sign_mode: Option<SignMode>,
    #[arg(long)]
    select_top: Option<usize>,
    #[arg(long)]
    max_zones: Option<usize>,
    #[arg(long)]
    j_tol: Option<f64>,
    #[arg(long)]
    ind_tol: Option<f64>,
    #[arg(long)]
    coarsen_tol: Option<f64>,
    /// sequential or parallel.
    #[arg(long)]
    execution: Option<Execution>,
    /// Elementary family, `name [row_min col_min row_max col_max]`; repeatable.
    #[arg(long = "family", value_parser = family_spec)]
    families: Vec<FamilySpec>,
    #[arg(long)]
    out_seg: Option<PathBuf>,
    #[arg(long)]
    out_zones: Option<PathBuf>,
    #[arg(long)]
    out_sign: Option<PathBuf>,
    #[arg(long)]
    out_zonefile: Option<PathBuf>,
    /// `.json` for the structured report, plain text otherwise.
    #[arg(long)]
    out_report: Option<PathBuf>,
    /// Also write the images of every N-th iteration.
    #[arg(long)]
    out_every: Option<usize>,
}

impl SegmentArgs {
    fn options(self) -> Result<SegmentOptions> {
        let file = match &self.config {
            Some(path) => SegmentOptions::parse(&fs::read_to_string(path)?)?,
            None => SegmentOptions::default(),
        };
        let flags = SegmentOptions {
            input: self.input,
            strategy: self.strategy,
            sign_mode: self.sign_mode,
            select_top: self.select_top,
            max_zones: self.max_zones,
            j_tol: self.j_tol,
            ind_tol: self.ind_tol,
            coarsen_tol: self.coarsen_tol,
            execution: self.execution,
            out_seg: self.out_seg,
            out_zones: self.out_zones,
            out_sign: self.out_sign,
            out_zonefile: self.out_zonefile,
            out_report: self.out_report,
            out_every: self.out_every,
            families: self.families,
        };
        Ok(file.overridden_by(flags))
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    cases: usize,
    /// Scale the identity decrease constant so the checks must fail.
    #[arg(long)]
    perturb: bool,
}

fn load_image(path: &Path) -> Result<Image> {
    io::read_ppm(&fs::read(path)?)
}

/// `dir/name.ext` becomes `dir/name.0007.ext`.
fn numbered(path: &Path, iteration: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{iteration:04}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{iteration:04}"),
    };
    path.with_file_name(name)
}

fn write_images(
    opts: &SegmentOptions,
    mesh: &Mesh,
    vote: SignVote,
    state: &RunState<'_>,
    iteration: Option<usize>,
) -> Result<()> {
    let target = |p: &Path| iteration.map_or_else(|| p.to_path_buf(), |i| numbered(p, i));
    if let Some(p) = &opts.out_seg {
        fs::write(target(p), io::write_ppm(&io::render_param(state.fine, mesh)?))?;
    }
    if let Some(p) = &opts.out_zones {
        fs::write(target(p), io::write_ppm(&io::render_zonation(state.zonation, mesh)?))?;
    }
    if let Some(p) = &opts.out_sign {
        fs::write(target(p), io::write_ppm(&io::render_pseudo_sign(state.gradient, mesh, vote)?))?;
    }
    Ok(())
}

fn segment(args: SegmentArgs) -> Result<()> {
    let opts = args.options()?;
    let input = opts.input.as_deref().ok_or_else(|| refind::Error::InvalidArgument("--input is required".into()))?;
    let image = load_image(input)?;
    let mesh = image.mesh();
    let model = IdentityModel::observed(mesh.clone(), image.to_fine_param())?;
    let cfg = opts.run_config(&model);
    let vote = match cfg.strategy.sign_mode {
        SignMode::Sum => SignVote::Sum,
        SignMode::Majority | SignMode::PerComponent => SignVote::Majority,
    };
    let z0 = Zonation::single(mesh.n_cells());
    let m0 = CoarseParam::zeros(1, image.channels());

    let mut observer = |record: &IterationRecord, state: &RunState<'_>| -> Result<()> {
        match opts.out_every {
            Some(n) if n > 0 && record.iteration.is_multiple_of(n) => {
                write_images(&opts, &mesh, vote, state, Some(record.iteration))
            }
            _ => Ok(()),
        }
    };
    let history = run_observed(&model, &mesh, &z0, &m0, &cfg, &mut observer)?;

    let state = RunState {
        zonation: &history.zonation,
        coarse: &history.coarse,
        fine: &history.fine,
        gradient: &history.gradient,
        reports: &[],
    };
    write_images(&opts, &mesh, vote, &state, None)?;
    if let Some(p) = &opts.out_zonefile {
        fs::write(p, io::write_zonation(&history.zonation, &mesh)?)?;
    }
    if let Some(p) = &opts.out_report {
        let json = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        fs::write(p, if json { io::json_report(&history) } else { io::text_report(&history) })?;
    }
    let last = history.records.last().expect("a run has at least one record");
    println!(
        "stopped ({}) after {} iterations: {} zones, J = {}, {:.2}% explained",
        history.stop_reason.as_str(),
        last.iteration,
        last.zones,
        last.j_opt,
        last.percent_explained
    );
    Ok(())
}

fn verify_cmd(args: VerifyArgs) -> Result<bool> {
    let outcomes = verify::run_checks(VerifyOptions { seed: args.seed, cases: args.cases, perturb: args.perturb })?;
    let mut ok = true;
    for c in &outcomes {
        ok &= c.passed();
        println!(
            "{} {}: {}/{} within {:e} (worst {:e})",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.cases - c.failures,
            c.cases,
            c.tolerance,
            c.worst
        );
    }
    Ok(ok)
}

fn worker_identity(data: &Path) -> Result<()> {
    let image = load_image(data)?;
    let model = IdentityModel::observed(image.mesh(), image.to_fine_param())?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    refind::worker::serve(&model, BufReader::new(stdin.lock()), BufWriter::new(stdout.lock()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Segment(args) => segment(args).map(|_| true),
        Command::Verify(args) => verify_cmd(args),
        Command::WorkerIdentity { data } => worker_identity(&data).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
