//! Command line front end: run scenarios, size groups, demo distributed key
//! generation, and re-check stored run directories for determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pharos::committee::{group_size_table, min_group_size_binom, min_group_size_hyper, Beta};
use pharos::crypto::{hash_parts, Seed};
use pharos::threshold::dkg::{deal_all, run_dkg, Dealing};
use pharos::threshold::{
    derive_randomness, recover, sign_share, verify_group, GroupSignature, SchemeParams,
};
use pharos_sim::metrics::{observer_export_csv, round_rows, summary, to_csv};
use pharos_sim::runner;
use pharos_sim::scenario::Scenario;
use pharos_sim::theorems::run_checks;

#[derive(Parser)]
#[command(name = "pharos-sim", version, about = "Deterministic threshold-relay consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write metrics, summary, observer exports,
    /// and the theorem report into an output directory.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<String>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimal group sizes meeting a dishonest-majority failure bound.
    Groupsize {
        /// Adversary strength as an integer or fraction, e.g. "3" or "14/5".
        #[arg(long)]
        beta: Option<String>,
        /// Failure bound exponent: the target is 2^-rho_log2.
        #[arg(long)]
        rho_log2: Option<u32>,
        /// Universe size for the hypergeometric bound.
        #[arg(long, default_value_t = 10_000)]
        population: u64,
        /// Print the full grid: beta in {3,4,5}, rho_log2 in {40,64,80,128}.
        #[arg(long)]
        table: bool,
    },
    /// Deal a distributed key, run the complaint round, sign with the result.
    DkgDemo {
        /// Participant count.
        #[arg(long)]
        n: u32,
        /// Recovery threshold.
        #[arg(long)]
        t: u32,
        /// Seed string for the dealing transcript.
        #[arg(long, default_value = "dkg-demo")]
        seed: String,
        /// Corrupt this many dealers' shares before verification.
        #[arg(long, default_value_t = 0)]
        bad_dealers: u32,
        /// Use the 2048-bit group instead of the toy one.
        #[arg(long)]
        standard: bool,
    },
    /// Re-simulate a stored run directory and compare outputs byte for byte.
    Check {
        /// Directory previously written by `run`.
        #[arg(long)]
        metrics: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, seed, out } => cmd_run(&scenario, seed, &out),
        Command::Groupsize { beta, rho_log2, population, table } => {
            cmd_groupsize(beta, rho_log2, population, table)
        }
        Command::DkgDemo { n, t, seed, bad_dealers, standard } => {
            cmd_dkg_demo(n, t, &seed, bad_dealers, standard)
        }
        Command::Check { metrics } => cmd_check(&metrics),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("write {}: {e}", path.display()))
}

fn read_file(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("read {}: {e}", path.display()))
}

/// Exit code 2 flags a safety violation; liveness shortfalls stay visible in
/// the report without failing the process.
fn cmd_run(path: &Path, seed: Option<String>, out: &Path) -> Result<ExitCode, String> {
    let mut sc = Scenario::load(path)?;
    if let Some(seed) = seed {
        sc.master_seed = seed;
    }
    sc.validate()?;
    fs::create_dir_all(out).map_err(|e| format!("create {}: {e}", out.display()))?;

    let art = runner::run(sc);
    let report = run_checks(&art);
    let sum = summary(&art);

    write_file(&out.join("scenario.json"), &art.scenario.to_json())?;
    write_file(&out.join("metrics.csv"), &to_csv(&round_rows(&art)))?;
    write_file(&out.join("summary.json"), &sum.to_json())?;
    write_file(&out.join("report.json"), &report.to_json())?;
    for i in 0..art.observers.len() {
        write_file(&out.join(format!("obs-{i}.csv")), &observer_export_csv(&art, i))?;
    }

    for line in report.lines() {
        println!("{line}");
    }
    println!(
        "{}: rounds={} completed={} events={} messages={} normal={} safety={} all={}",
        sum.scenario,
        sum.rounds,
        sum.completed,
        sum.events_processed,
        sum.messages_delivered,
        sum.normal_rounds,
        if report.safety_ok { "ok" } else { "VIOLATED" },
        if report.all_ok { "ok" } else { "failed" },
    );
    Ok(if report.safety_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn parse_beta(s: &str) -> Result<Beta, String> {
    s.parse::<Beta>().map_err(|e| format!("beta: {e}"))
}

fn cmd_groupsize(
    beta: Option<String>,
    rho_log2: Option<u32>,
    population: u64,
    table: bool,
) -> Result<ExitCode, String> {
    if table {
        let betas: Vec<Beta> =
            [3u64, 4, 5].iter().map(|&b| Beta::from_integer(b).expect("beta > 2")).collect();
        let rhos = [40u32, 64, 80, 128];
        let grid = group_size_table(&betas, &rhos, population).map_err(|e| e.to_string())?;

        let header = |title: &str| {
            println!("{title}");
            print!("{:>9}", "rho_log2");
            for b in &grid.betas {
                print!("{:>9}", format!("beta={b}"));
            }
            println!();
        };
        header(&format!("minimal group sizes, hypergeometric, population {population}"));
        for (i, &rho) in grid.rho_log2s.iter().enumerate() {
            print!("{rho:>9}");
            for v in &grid.hyper[i] {
                print!("{v:>9}");
            }
            println!();
        }
        println!();
        header("minimal group sizes, binomial");
        for (i, &rho) in grid.rho_log2s.iter().enumerate() {
            print!("{rho:>9}");
            for v in &grid.binom[i] {
                print!("{v:>9}");
            }
            println!();
        }
        return Ok(ExitCode::SUCCESS);
    }

    let beta = parse_beta(&beta.ok_or("--beta required unless --table")?)?;
    let rho = rho_log2.ok_or("--rho-log2 required unless --table")?;
    let hyper = min_group_size_hyper(beta, rho, population).map_err(|e| e.to_string())?;
    let binom = min_group_size_binom(beta, rho).map_err(|e| e.to_string())?;
    println!("hypergeometric beta={beta} rho_log2={rho} population={population} n={hyper}");
    println!("binomial beta={beta} rho_log2={rho} n={binom}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_dkg_demo(
    n: u32,
    t: u32,
    seed: &str,
    bad_dealers: u32,
    standard: bool,
) -> Result<ExitCode, String> {
    if t == 0 || t > n {
        return Err(format!("need 0 < t <= n, got t={t} n={n}"));
    }
    if bad_dealers > n {
        return Err(format!("bad_dealers={bad_dealers} exceeds n={n}"));
    }
    let params = if standard { SchemeParams::standard() } else { SchemeParams::toy() };
    println!(
        "dkg: n={n} t={t} seed={seed:?} bad_dealers={bad_dealers} group={}",
        if standard { "standard" } else { "toy" }
    );

    let transcript_seed = Seed(hash_parts(&[b"dkg-demo", seed.as_bytes()]).0);
    let mut dealings: Vec<Dealing> = deal_all(&params, t, n, &transcript_seed);
    for d in dealings.iter_mut().take(bad_dealers as usize) {
        // A corrupted dealer hands member 1 a share off its committed
        // polynomial; the share check must catch it.
        let share = d.shares.get_mut(&1).expect("member 1 share");
        *share = (share.clone() + 1u32) % params.q();
        println!("corrupted dealer {} share for member 1", d.dealer_index);
    }

    let outcome = match run_dkg(&params, t, n, &dealings) {
        Ok(o) => o,
        Err(e) => {
            println!("dkg failed: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    println!("qualified dealers: {:?}", outcome.qualified);
    println!("disqualified dealers: {:?}", outcome.disqualified);
    for c in &outcome.complaints {
        println!("complaint: member {} against dealer {}", c.complainer, c.dealer);
    }
    println!("group public key: {}", hex::encode(params.encode_element(outcome.vvec.group_key())));

    let message = format!("dkg-demo:{seed}");
    let shares: Vec<_> = outcome
        .shares
        .values()
        .take(t as usize)
        .map(|k| sign_share(&params, message.as_bytes(), k))
        .collect();
    let value = recover(&params, t, &shares).map_err(|e| e.to_string())?;
    let sig = GroupSignature { value, contributors: shares };
    let ok = verify_group(&params, t, &outcome.vvec, message.as_bytes(), &sig);
    println!("group signature: {}", hex::encode(params.encode_element(&sig.value)));
    println!("signature verifies: {ok}");
    println!("derived randomness: {}", hex::encode(derive_randomness(&params, &sig.value).0));
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

/// Exit code 3 flags a reproducibility mismatch.
fn cmd_check(dir: &Path) -> Result<ExitCode, String> {
    let sc = Scenario::from_json(&read_file(&dir.join("scenario.json"))?)?;
    sc.validate()?;
    let art = runner::run(sc);
    let report = run_checks(&art);

    let mut fresh = vec![
        ("metrics.csv".to_string(), to_csv(&round_rows(&art))),
        ("summary.json".to_string(), summary(&art).to_json()),
        ("report.json".to_string(), report.to_json()),
    ];
    for i in 0..art.observers.len() {
        fresh.push((format!("obs-{i}.csv"), observer_export_csv(&art, i)));
    }

    let mut mismatches = 0u32;
    for (name, regenerated) in &fresh {
        let stored = read_file(&dir.join(name))?;
        if &stored == regenerated {
            println!("ok {name}");
        } else {
            println!("MISMATCH {name}");
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        println!("{mismatches} file(s) differ: the run did not reproduce");
        return Ok(ExitCode::from(3));
    }
    println!("reproduced {} file(s) byte for byte", fresh.len());
    Ok(if report.safety_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
