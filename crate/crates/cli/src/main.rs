//! `bmas`: build candidate atlases, inspect singular fade states, run outage
//! simulations and verify atlases.

use std::path::PathBuf;
use std::process::ExitCode;

use bmas_core::bmas::{offline_search, CandidateTable, PruneSettings, DEFAULT_LIST_CAP};
use bmas_core::gf2::DEFAULT_ENUM_BUDGET;
use bmas_core::modem::{Constellation, Modulation};
use bmas_core::sfs::{activity_exact, enumerate_sfs, DEFAULT_ACTIVITY_RADIUS};
use bmas_core::sim::{config_help, emit_results, estimate_outage, SimConfig, TrialContext};
use bmas_core::verify::{verify_atlas_text, VerifyOptions};
use bmas_core::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_IO: u8 = 4;

fn keys_help() -> String {
    format!(
        "Configuration keys (TOML sections, or --set section.key=value):\n{}\n\n\
         Exit codes: 0 success, 2 configuration error, 3 verification failure, 4 I/O error.",
        config_help()
    )
}

#[derive(Parser)]
#[command(name = "bmas", version, about = "Adaptive binary network coding for network-MIMO uplinks")]
#[command(after_help = keys_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the off-line search and write a candidate atlas.
    Atlas(AtlasArgs),
    /// Estimate outage probability and backhaul load.
    #[command(after_help = keys_help())]
    Simulate(SimulateArgs),
    /// Re-check an atlas against brute-force oracles.
    Verify(VerifyArgs),
    /// Print the singular fade states of a constellation.
    SfsList(SfsListArgs),
}

#[derive(Args)]
struct AtlasArgs {
    /// Constellation: qam4 or qam16.
    #[arg(long = "mod", value_parser = parse_modulation)]
    modulation: Modulation,
    /// Number of terminals.
    #[arg(long, default_value_t = 2)]
    u: usize,
    /// Rows of each mapping matrix.
    #[arg(long)]
    r: usize,
    /// Keep only the K most active states.
    #[arg(long)]
    keep: Option<usize>,
    /// Relative radius of the activity neighbourhood.
    #[arg(long, default_value_t = DEFAULT_ACTIVITY_RADIUS)]
    delta: f64,
    /// Candidates stored per state.
    #[arg(long, default_value_t = DEFAULT_LIST_CAP)]
    cap: usize,
    /// Largest matrix size, in bits, the search may enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUM_BUDGET)]
    budget: u32,
    /// Output file; defaults to atlas-<mod>-u<u>-r<r>.txt.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML configuration file; defaults apply when omitted.
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. --set run.frames=500.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for results.csv and manifest.json.
    #[arg(short, long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    atlas: PathBuf,
    /// Random channel draws for the decode check.
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SfsListArgs {
    #[arg(long = "mod", value_parser = parse_modulation)]
    modulation: Modulation,
    #[arg(long, default_value_t = DEFAULT_ACTIVITY_RADIUS)]
    delta: f64,
}

fn parse_modulation(s: &str) -> Result<Modulation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Checksum { .. } => EXIT_VERIFY,
        Error::Internal(_) => 1,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Atlas(a) => cmd_atlas(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::SfsList(a) => cmd_sfs_list(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn cmd_atlas(a: AtlasArgs) -> Result<u8, Error> {
    let settings = PruneSettings {
        keep: a.keep,
        delta: a.delta,
        cap: a.cap,
        budget: a.budget,
    };
    let c = Constellation::new(a.modulation);
    let table = offline_search(&c, a.u, a.r, &settings)?;
    let out = a
        .out
        .unwrap_or_else(|| PathBuf::from(format!("atlas-{}-u{}-r{}.txt", a.modulation, a.u, a.r)));
    table.write_atlas(&out)?;
    print_summary(&table);
    println!("wrote {}", out.display());
    Ok(0)
}

fn print_summary(t: &CandidateTable) {
    println!("{}", t.header());
    println!("states: {} enumerated, {} kept", t.total_sfs, t.entries.len());
    println!(
        "candidates: {} lists, {} distinct matrices, {} states without a consistent candidate",
        t.lists.len(),
        t.distinct_matrices(),
        t.unresolved_sfs()
    );
    println!("{:>5}  {:>22}  {:>10}  {:>5}  {:>10}", "sfs", "value", "activity", "list", "max dmin");
    for (k, e) in t.entries.iter().enumerate() {
        let list = t.list_of(k);
        let top = list.first().map_or(0.0, |c| c.score.dmin);
        println!(
            "{:>5}  {:>22}  {:>10.3e}  {:>5}  {:>10.6}",
            e.index,
            format!("{:+.4}{:+.4}j", e.value.re, e.value.im),
            e.activity,
            list.len(),
            top
        );
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8, Error> {
    let base = match &a.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    let mut overrides = a.overrides.clone();
    if let Some(f) = a.frames {
        overrides.push(format!("run.frames={f}"));
    }
    if let Some(s) = a.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(w) = a.workers {
        overrides.push(format!("run.workers={w}"));
    }
    let config = base.with_overrides(&overrides)?;
    let ctx = TrialContext::load(config)?;
    let results = estimate_outage(&ctx)?;
    let (csv, manifest) = emit_results(&results, &ctx.config, &ctx.tables, &a.out)?;
    println!(
        "{:<12} {:>7} {:>10} {:>21} {:>7} {:>10} {:>8}",
        "scheme", "snr_db", "p_out", "95% interval", "frames", "backhaul", "degraded"
    );
    for r in &results {
        println!(
            "{:<12} {:>7} {:>10.3e} [{:>9.3e}, {:>9.3e}] {:>7} {:>10} {:>8}",
            r.scheme.to_string(),
            r.snr_db,
            r.p_out,
            r.ci_lo,
            r.ci_hi,
            r.frames,
            r.backhaul_bits.map_or("unlimited".into(), |b| b.to_string()),
            r.degraded_count
        );
    }
    println!("wrote {} and {}", csv.display(), manifest.display());
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> Result<u8, Error> {
    let text = std::fs::read_to_string(&a.atlas).map_err(|source| Error::Io {
        path: a.atlas.clone(),
        source,
    })?;
    let opts = VerifyOptions {
        decode_draws: a.draws,
        seed: a.seed,
        ..VerifyOptions::default()
    };
    let report = verify_atlas_text(&text, &opts);
    println!("{report}");
    Ok(if report.passed() { 0 } else { EXIT_VERIFY })
}

fn cmd_sfs_list(a: SfsListArgs) -> Result<u8, Error> {
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(Error::InvalidArgument(format!("--delta {} outside (0, 1)", a.delta)));
    }
    let c = Constellation::new(a.modulation);
    let states = enumerate_sfs(&c);
    println!("{} singular fade states of {}", states.len(), a.modulation);
    println!(
        "{:>5}  {:>22}  {:>8}  {:>10}  {:>7}  {:>7}  partition",
        "index", "value", "|v|", "activity", "groups", "clashes"
    );
    for (i, s) in states.iter().enumerate() {
        println!(
            "{:>5}  {:>22}  {:>8.4}  {:>10.3e}  {:>7}  {:>7}  {}",
            i,
            format!("{:+.4}{:+.4}j", s.value.re, s.value.im),
            s.value.norm(),
            activity_exact(s.value, a.delta),
            s.partition.len(),
            s.partition.clash_count(),
            s.partition.digest()
        );
    }
    Ok(0)
}
