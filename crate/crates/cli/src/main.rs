use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fundmatch::alt::{run_algorithm1, run_algorithm2, run_algorithm3};
use fundmatch::analysis::{classify_outcomes, mobility_report, render_comparison, render_mobility, summarize_comparison};
use fundmatch::da::{sp_da_traced, sr_da_traced, DaTrace, Proposer};
use fundmatch::format::{
    parse_allocation, parse_instance, parse_manifest, parse_market, render_verdict, serialize_allocation, serialize_market,
    AllocationMeta,
};
use fundmatch::generator::{generate_market, GeneratorConfig};
use fundmatch::market::{Market, RankOrderList};
use fundmatch::oracle::{enumerate_stable, find_sr_da_manipulation, max_stable_size, EnumerationBounds};
use fundmatch::smti::{reduce_smti, smti_lemma_check};
use fundmatch::stability::{check, is_stable_with_limit, DEFAULT_RETIMING_LIMIT};
use fundmatch::{sr_da, Allocation, Mode};

#[derive(Parser)]
#[command(name = "fundmatch", version, about = "College admissions matching with state- and self-funded seats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    SpDa,
    SrDa,
    Alg1,
    Alg2,
    Alg3,
}

impl Algorithm {
    fn token(self) -> &'static str {
        match self {
            Algorithm::SpDa => "sp-da",
            Algorithm::SrDa => "sr-da",
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Alg3 => "alg3",
        }
    }

    fn seeded(self) -> bool {
        matches!(self, Algorithm::Alg1 | Algorithm::Alg2 | Algorithm::Alg3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Full,
    Certain,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Full => Mode::Full,
            ModeArg::Certain => Mode::Certain,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism and print the allocation document.
    Solve {
        #[arg(long, value_enum)]
        algorithm: Algorithm,
        #[arg(long)]
        market: PathBuf,
        /// Seed for the random fallback of alg1-3 (default 0).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Stability verdict. Exit code 0 stable, 1 unstable, 2 error.
    Check {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RETIMING_LIMIT)]
        retiming_limit: usize,
    },
    /// Winners and losers between two allocations.
    Compare {
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        alternate: PathBuf,
        #[arg(long)]
        mobility: bool,
        #[arg(long)]
        json: bool,
    },
    /// Every stable allocation of a small market.
    Enumerate {
        #[arg(long)]
        market: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        max_size_only: bool,
    },
    /// Write a synthetic market.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate the smti section of an instance into a market.
    ReduceSmti {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare both sides of the SMTI equivalence. Exit code 1 if they differ.
    VerifySmtiLemma {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Search a student's misreports for one that improves her SR-DA outcome.
    Manipulate {
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        student: String,
    },
    /// Generate and solve every (seed, config) pair of a manifest.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "sr-da")]
        baseline: Algorithm,
        #[arg(long, value_enum, default_value = "alg3")]
        alternate: Algorithm,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_market(path: &Path) -> Result<Market> {
    parse_market(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_allocation(path: &Path, market: &Market) -> Result<Allocation> {
    Ok(parse_allocation(&read(path)?, market)
        .with_context(|| format!("parsing {}", path.display()))?
        .allocation)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn render_da_trace(market: &Market, trace: &DaTrace) -> String {
    let proposer = match trace.proposer {
        Proposer::Students => "students",
        Proposer::Colleges => "colleges",
    };
    let mut out = format!("trace proposer={proposer} rounds={}\n", trace.rounds.len());
    for (i, r) in trace.rounds.iter().enumerate() {
        writeln!(out, "round {}", i + 1).expect("write to string");
        for k in &r.proposals {
            writeln!(out, "propose {}", market.display_contract(k)).expect("write to string");
        }
        for k in &r.rejections {
            writeln!(out, "reject {}", market.display_contract(k)).expect("write to string");
        }
    }
    out
}

/// Allocation plus trace text.
fn solve(market: &Market, algorithm: Algorithm, seed: u64) -> Result<(Allocation, String)> {
    Ok(match algorithm {
        Algorithm::SpDa => {
            let (y, t) = sp_da_traced(market);
            let text = render_da_trace(market, &t);
            (y, text)
        }
        Algorithm::SrDa => {
            let (y, t) = sr_da_traced(market);
            let text = render_da_trace(market, &t);
            (y, text)
        }
        Algorithm::Alg1 | Algorithm::Alg2 | Algorithm::Alg3 => {
            let run = match algorithm {
                Algorithm::Alg1 => run_algorithm1,
                Algorithm::Alg2 => run_algorithm2,
                _ => run_algorithm3,
            };
            let (y, t) = run(market, seed);
            let mut text = serde_json::to_string_pretty(&t)?;
            text.push('\n');
            (y, text)
        }
    })
}

fn allocation_rows(market: &Market, y: &Allocation) -> String {
    let mut rows: Vec<String> = y.iter().map(|k| market.display_contract(k)).collect();
    rows.sort();
    rows.iter().map(|r| format!("{r}\n")).collect()
}

fn rol_text(market: &Market, rol: &RankOrderList) -> String {
    rol.iter()
        .map(|e| format!("{}:{}", market.college(e.college).id.as_str(), e.terms.bit()))
        .collect::<Vec<_>>()
        .join(",")
}

fn assignment_text(market: &Market, y: &Allocation, s: fundmatch::StudentIx) -> String {
    y.assignment(s)
        .map(|k| market.display_contract(&k))
        .unwrap_or_else(|| "unassigned".into())
}

fn run(cli: Cli, out: &mut String) -> Result<u8> {
    match cli.command {
        Command::Solve {
            algorithm,
            market,
            seed,
            trace,
        } => {
            let m = load_market(&market)?;
            let seed_used = algorithm.seeded().then(|| seed.unwrap_or(0));
            let (y, trace_text) = solve(&m, algorithm, seed_used.unwrap_or(0))?;
            out.push_str(&serialize_allocation(&m, &y, &AllocationMeta::new(algorithm.token(), seed_used))?);
            if let Some(path) = trace {
                write_atomic(&path, &trace_text)?;
            }
            Ok(0)
        }
        Command::Check {
            mode,
            market,
            allocation,
            retiming_limit,
        } => {
            let m = load_market(&market)?;
            let y = load_allocation(&allocation, &m)?;
            let verdict = match mode {
                ModeArg::Full => is_stable_with_limit(&m, &y, retiming_limit)?,
                ModeArg::Certain => check(&m, &y, Mode::Certain)?,
            };
            out.push_str(&render_verdict(&m, &verdict));
            Ok(if verdict.stable { 0 } else { 1 })
        }
        Command::Compare {
            market,
            baseline,
            alternate,
            mobility,
            json,
        } => {
            let m = load_market(&market)?;
            let base = load_allocation(&baseline, &m)?;
            let alt = load_allocation(&alternate, &m)?;
            let records = classify_outcomes(&m, &base, &alt)?;
            let report = summarize_comparison(&m, &records, &base, &alt)?;
            let mob = if mobility { Some(mobility_report(&m, &base, &alt, &records)?) } else { None };
            if json {
                let value = serde_json::json!({ "comparison": report, "mobility": mob, "records": records });
                out.push_str(&serde_json::to_string_pretty(&value)?);
                out.push('\n');
            } else {
                out.push_str(&render_comparison(&report));
                if let Some(mob) = mob {
                    out.push_str(&render_mobility(&mob));
                }
            }
            Ok(0)
        }
        Command::Enumerate {
            market,
            mode,
            max_size_only,
        } => {
            let m = load_market(&market)?;
            let mode: Mode = mode.into();
            if max_size_only {
                let (size, y) = max_stable_size(&m, mode, EnumerationBounds::default())?;
                writeln!(out, "mode={}\nmax_size={size}", mode.token())?;
                out.push_str(&allocation_rows(&m, &y));
            } else {
                let set = enumerate_stable(&m, mode, EnumerationBounds::default())?;
                writeln!(out, "mode={}\nfingerprint={}\nstable_allocations={}", mode.token(), set.fingerprint, set.allocations.len())?;
                for (i, y) in set.allocations.iter().enumerate() {
                    writeln!(out, "[allocation {}] size={}", i + 1, y.len())?;
                    out.push_str(&allocation_rows(&m, y));
                }
            }
            Ok(0)
        }
        Command::Generate { config, seed, out: path } => {
            let mut c = GeneratorConfig::from_toml(&read(&config)?).with_context(|| format!("parsing {}", config.display()))?;
            c.seed = seed;
            let m = generate_market(&c)?;
            write_atomic(&path, &serialize_market(&m)?)?;
            writeln!(out, "wrote {} students, {} colleges to {}", m.n_students(), m.n_colleges(), path.display())?;
            Ok(0)
        }
        Command::ReduceSmti { instance, out: path } => {
            let doc = parse_instance(&read(&instance)?).with_context(|| format!("parsing {}", instance.display()))?;
            let smti = doc.smti.ok_or_else(|| anyhow!("{} has no [smti] section", instance.display()))?;
            let m = reduce_smti(&smti)?;
            write_atomic(&path, &serialize_market(&m)?)?;
            writeln!(out, "wrote {} students, {} colleges to {}", m.n_students(), m.n_colleges(), path.display())?;
            Ok(0)
        }
        Command::VerifySmtiLemma { instance } => {
            let doc = parse_instance(&read(&instance)?).with_context(|| format!("parsing {}", instance.display()))?;
            let smti = doc.smti.ok_or_else(|| anyhow!("{} has no [smti] section", instance.display()))?;
            let r = smti_lemma_check(&smti)?;
            writeln!(
                out,
                "holds={}\nperfect_weakly_stable_matching={}\nstudents={}\nmax_certainly_stable_size={}",
                r.holds, r.perfect_stable_matching, r.students, r.max_certainly_stable_size
            )?;
            Ok(if r.holds { 0 } else { 1 })
        }
        Command::Manipulate { market, student } => {
            let m = load_market(&market)?;
            let s = m.student_ix(&student).ok_or_else(|| anyhow!("unknown student {student:?}"))?;
            match find_sr_da_manipulation(&m, s)? {
                None => out.push_str("none\n"),
                Some(rol) => {
                    let truthful = sr_da(&m);
                    let lied = sr_da(&m.with_rols([(s, rol.clone())]));
                    writeln!(out, "student={student}\nmisreport rol={}", rol_text(&m, &rol))?;
                    writeln!(out, "truthful={}\nmisreported={}", assignment_text(&m, &truthful, s), assignment_text(&m, &lied, s))?;
                }
            }
            Ok(0)
        }
        Command::Sweep {
            manifest,
            out_dir,
            baseline,
            alternate,
        } => {
            let entries = parse_manifest(&read(&manifest)?).with_context(|| format!("parsing {}", manifest.display()))?;
            let base_dir = manifest.parent().unwrap_or(Path::new("."));
            fs::create_dir_all(&out_dir)?;
            writeln!(out, "seed config students baseline_assigned alternate_assigned winners losers")?;
            for e in entries {
                let config_path = base_dir.join(&e.config);
                let mut c = GeneratorConfig::from_toml(&read(&config_path)?).with_context(|| format!("parsing {}", config_path.display()))?;
                c.seed = e.seed;
                let m = generate_market(&c)?;
                let stem = Path::new(&e.config)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "config".into());
                let name = format!("{stem}-{}", e.seed);
                write_atomic(&out_dir.join(format!("{name}.market")), &serialize_market(&m)?)?;
                let mut ys = Vec::new();
                for (label, alg) in [("baseline", baseline), ("alternate", alternate)] {
                    let (y, _) = solve(&m, alg, e.seed)?;
                    let meta = AllocationMeta::new(alg.token(), alg.seeded().then_some(e.seed));
                    write_atomic(&out_dir.join(format!("{name}.{label}.alloc")), &serialize_allocation(&m, &y, &meta)?)?;
                    ys.push(y);
                }
                let records = classify_outcomes(&m, &ys[0], &ys[1])?;
                let r = summarize_comparison(&m, &records, &ys[0], &ys[1])?;
                writeln!(
                    out,
                    "{} {} {} {} {} {} {}",
                    e.seed,
                    e.config,
                    m.n_students(),
                    r.baseline.assigned,
                    r.alternate.assigned,
                    r.winners.total,
                    r.losers.total
                )?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    match run(cli, &mut out) {
        Ok(code) => {
            print!("{out}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
