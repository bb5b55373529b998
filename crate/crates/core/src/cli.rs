//! Command-line front end. Exit codes: 0 success, 1 a check failed or the
//! run could not finish, 2 usage error or unknown scheme.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::lift::{dual_example_scheme, example1_scheme, lift_private, theorem1_scheme};
use crate::linear::{LinearScheme, LinearSchemeMatrices};
use crate::model::{DemandVector, Rational, SchemeInstance};
use crate::region::{self, parse_rational};
use crate::schemes::{
    baseline_uncoded, dual_corner_scheme, memory_share, restricted_demand_set, small_cache_2x4_scheme,
    DemandLabel, DUAL_CORNER_DESCRIPTOR,
};
use crate::search::{search_linear_scheme, verify_linear, SearchConfig, Strategy, DEFAULT_TRIALS};
use crate::session::{simulate_session, Frame};
use crate::verifier::{
    budget_from_env, check_decodability, check_lemma1, check_privacy, measure_rates,
    plaintext_header_control, EnumerationOrder, Verdict, VerifyConfig,
};

#[derive(Parser, Debug)]
#[command(name = "cachepriv", version, about = "Demand-private coded caching toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exhaustively check decodability and privacy of a scheme
    Verify {
        scheme: String,
        /// Symbol width in bits
        #[arg(long = "l", default_value_t = 1)]
        width: usize,
        /// Check privacy for this user only
        #[arg(long)]
        user: Option<usize>,
        /// Atom budget (defaults to CACHEPRIV_BUDGET or 2^28)
        #[arg(long)]
        budget: Option<u128>,
        /// Print verdicts as JSON
        #[arg(long)]
        json: bool,
    },
    /// Print the measured memory, rate and header size
    Measure {
        scheme: String,
        #[arg(long = "l", default_value_t = 1)]
        width: usize,
    },
    /// Write the two-user region boundary and scheme points as CSV and SVG
    Region {
        #[arg(long, default_value = "1/6")]
        step: String,
        /// Output path without extension
        #[arg(long, default_value = "region")]
        out: PathBuf,
    },
    /// Search for a linear restricted-demand scheme
    Search {
        /// Target point as M,R
        #[arg(long, default_value = "4/3,1/3")]
        target: String,
        #[arg(long, default_value_t = 2)]
        files: usize,
        /// Number of users of the restricted-demand scheme
        #[arg(long, default_value_t = 4)]
        users: usize,
        /// Subpacketization
        #[arg(long, default_value_t = 3)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random restarts
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        budget: u64,
        /// Enumerate every canonical placement instead of sampling
        #[arg(long)]
        exhaustive: bool,
        /// Compare the result with the committed witness
        #[arg(long)]
        regen: bool,
        /// Write the descriptor here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one session and write its transcript
    Simulate {
        scheme: String,
        /// Comma-separated file indices, one per user
        #[arg(long)]
        demands: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "l", default_value_t = 1)]
        width: usize,
        /// Transcript file; a summary is printed either way
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn index_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::ParameterMismatch(format!("bad number {x:?} in {s:?}")))
        })
        .collect()
}

fn triple(body: &str) -> Result<(usize, usize, Rational)> {
    let parts: Vec<&str> = body.split(',').collect();
    let [n, k, m] = parts[..] else {
        return Err(Error::UnknownScheme(body.into()));
    };
    let bad = || Error::UnknownScheme(body.into());
    Ok((
        n.trim().parse().map_err(|_| bad())?,
        k.trim().parse().map_err(|_| bad())?,
        parse_rational(m).map_err(|_| bad())?,
    ))
}

/// Resolves a scheme name or a descriptor path.
pub fn parse_scheme(name: &str) -> Result<SchemeInstance> {
    match name {
        "example1" => return Ok(example1_scheme()),
        "dual" => return Ok(dual_example_scheme()),
        "small-np" => return Ok(small_cache_2x4_scheme()),
        "dual-np" => return Ok(dual_corner_scheme()),
        _ => {}
    }
    if let Some(body) = name.strip_prefix("thm1:") {
        let (n, k, m) = triple(body)?;
        return theorem1_scheme(n, k, m);
    }
    if let Some(body) = name.strip_prefix("baseline:") {
        let (n, k, m) = triple(body)?;
        return baseline_uncoded(n, k, m);
    }
    if let Some(body) = name.strip_prefix("plaintext:") {
        let (n, k, m) = triple(body)?;
        return Ok(plaintext_header_control(baseline_uncoded(n, k, m)?));
    }
    if let Some(body) = name.strip_prefix("share:") {
        let (lambda, rest) = body
            .split_once(':')
            .ok_or_else(|| Error::UnknownScheme(name.into()))?;
        let lambda = parse_rational(lambda).map_err(|_| Error::UnknownScheme(name.into()))?;
        // scheme names may contain ':' themselves, so try every split
        for (i, _) in rest.match_indices(':') {
            if let (Ok(a), Ok(b)) = (parse_scheme(&rest[..i]), parse_scheme(&rest[i + 1..])) {
                return memory_share(a, b, lambda);
            }
        }
        return Err(Error::UnknownScheme(name.into()));
    }
    if let Some(body) = name.strip_prefix("lift:") {
        let inner = parse_scheme(body)?;
        let p = inner.params();
        return lift_private(inner, p.n_files, p.n_users / p.n_files.max(1));
    }
    let path = Path::new(name);
    if path.is_file() {
        let m = LinearSchemeMatrices::load(path)?;
        return Ok(Arc::new(LinearScheme::new(m)?));
    }
    Err(Error::UnknownScheme(name.into()))
}

fn print_verdict(v: &Verdict) {
    let status = if v.pass { "PASS" } else { "FAIL" };
    let mut line = format!("{status} {} ({} atoms, {} cases)", v.check, v.atoms, v.cases);
    if let Some(mi) = v.mutual_information_bits {
        line.push_str(&format!(" MI={mi:.6} bits"));
    }
    println!("{line}");
    if let Some(c) = &v.counterexample {
        println!("  counterexample: {}", serde_json::to_string(c).expect("serializes"));
    }
}

fn linear_matrices(name: &str) -> Option<LinearSchemeMatrices> {
    match name {
        "small-np" => Some(crate::schemes::small_cache_2x4_matrices()),
        "dual-np" => Some(crate::schemes::dual_corner_matrices()),
        _ => {
            let path = Path::new(name);
            path.is_file().then(|| LinearSchemeMatrices::load(path).ok()).flatten()
        }
    }
}

fn verify(name: &str, width: usize, user: Option<usize>, budget: Option<u128>, json: bool) -> Result<bool> {
    let scheme = parse_scheme(name)?;
    let cfg = VerifyConfig {
        width,
        budget: budget.unwrap_or_else(budget_from_env),
        order: EnumerationOrder::Natural,
    };
    let p = scheme.params();
    if !json {
        println!(
            "{}: N={} K={} t={} M={} R={}",
            scheme.name(),
            p.n_files,
            p.n_users,
            p.subpacketization,
            p.memory(),
            p.rate()
        );
    }
    let start = Instant::now();
    let mut verdicts = Vec::new();
    if let Some(m) = linear_matrices(name) {
        verdicts.push(verify_linear(&m, &m.demand_subset())?);
    }
    verdicts.push(check_decodability(scheme.as_ref(), &cfg)?);
    if scheme.privacy().is_private() {
        let users: Vec<usize> = match user {
            Some(u) => vec![u],
            None => (0..p.n_users).collect(),
        };
        for u in users {
            verdicts.push(check_privacy(scheme.as_ref(), u, &cfg)?);
        }
        if p.n_files == 2 && p.n_users == 2 {
            verdicts.push(check_lemma1(scheme.as_ref(), &cfg)?);
        }
    } else if let Some(m) = linear_matrices(name) {
        if m.demand_label == DemandLabel::RestrictedShift && m.n_users % m.n_files == 0 {
            let lifted = lift_private(scheme.clone(), m.n_files, m.n_users / m.n_files)?;
            verdicts.push(check_decodability(lifted.as_ref(), &cfg)?);
            for u in 0..lifted.params().n_users {
                verdicts.push(check_privacy(lifted.as_ref(), u, &cfg)?);
            }
        }
    }
    let pass = verdicts.iter().all(|v| v.pass);
    if json {
        println!("{}", serde_json::to_string_pretty(&verdicts).expect("serializes"));
    } else {
        verdicts.iter().for_each(print_verdict);
        println!(
            "{} in {:.3}s",
            if pass { "all checks passed" } else { "some checks failed" },
            start.elapsed().as_secs_f64()
        );
    }
    Ok(pass)
}

fn measure(name: &str, width: usize) -> Result<bool> {
    let scheme = parse_scheme(name)?;
    let m = measure_rates(scheme.as_ref(), width)?;
    println!("M={} R={} header_bits={}", m.memory, m.rate, m.header_bits);
    Ok(true)
}

fn emit_region(step: &str, out: &Path) -> Result<bool> {
    let step = parse_rational(step)?;
    let points = region::measured_points(&region::implemented_schemes_2x2()?)?;
    let mut on_boundary = true;
    for p in &points {
        let opt = region::optimal_private_rate_2x2(p.memory)?;
        on_boundary &= opt == p.rate;
        println!("{}: M={} R={} R*={}", p.source, p.memory, p.rate, opt);
    }
    let (csv, svg) = region::emit_region(out, step, &points)?;
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(on_boundary)
}

#[allow(clippy::too_many_arguments)]
fn search(
    target: &str,
    files: usize,
    users: usize,
    t: usize,
    seed: u64,
    trials: u64,
    exhaustive: bool,
    regen: bool,
    out: Option<&Path>,
) -> Result<bool> {
    let (m, r) = target
        .split_once(',')
        .ok_or_else(|| Error::ParameterMismatch(format!("target {target:?} is not M,R")))?;
    let (m, r) = (parse_rational(m)?, parse_rational(r)?);
    let dim = |x: Rational| {
        let d = x * t as i64;
        (d.is_integer() && d >= Rational::from_integer(0))
            .then(|| *d.numer() as usize)
            .ok_or_else(|| Error::NonIntegralSplit(format!("{x} * {t} is not a whole number")))
    };
    let (cache_dim, tx_dim) = (dim(m)?, dim(r)?);
    if files == 0 || !users.is_multiple_of(files) {
        return Err(Error::ParameterMismatch(format!(
            "{users} users do not stack over {files} files"
        )));
    }
    let demands = restricted_demand_set(files, users / files);
    let cfg = SearchConfig {
        strategy: if exhaustive { Strategy::Exhaustive } else { Strategy::RandomRestarts },
        seed,
        trials,
    };
    let start = Instant::now();
    let found = match search_linear_scheme(files, users, t, cache_dim, tx_dim, &demands, &cfg) {
        Ok(found) => found,
        Err(Error::SearchExhausted { trials }) => {
            eprintln!("no scheme found within {trials} restarts");
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    let Some(found) = found else {
        eprintln!("exhaustive search: no linear scheme at M={m} R={r} with t={t}");
        return Ok(false);
    };
    eprintln!("found witness in {:.2}s", start.elapsed().as_secs_f64());
    let text = found.to_descriptor();
    if regen {
        let same = text == DUAL_CORNER_DESCRIPTOR;
        if same {
            println!("witness matches the committed descriptor");
        } else {
            println!("witness differs from the committed descriptor:\n{text}");
        }
        return Ok(same);
    }
    match out {
        Some(path) => {
            fs::write(path, &text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(true)
}

fn simulate(name: &str, demands: &str, seed: u64, width: usize, out: Option<&Path>) -> Result<bool> {
    let scheme = parse_scheme(name)?;
    let p = scheme.params();
    let demands = DemandVector::new(index_list(demands)?, p.n_files)?;
    let (transcript, pass) = match simulate_session(scheme.as_ref(), &demands, seed, width) {
        Ok(t) => (t, true),
        Err(Error::SessionMismatch { transcript, .. }) => (*transcript, false),
        Err(e) => return Err(e),
    };
    for frame in &transcript.frames {
        match frame {
            Frame::Placement { user, key, cache } => {
                println!("placement user={user} key={key} cache_bits={}", cache.len())
            }
            Frame::Delivery { header, payload } => {
                println!("delivery header_bits={} payload_bits={}", header.len(), payload.len())
            }
            Frame::DecodeReport { user, file, matched, .. } => {
                println!("decode user={user} file={file} matched={matched}")
            }
        }
    }
    if let Some(path) = out {
        fs::write(path, transcript.to_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(pass)
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Verify { scheme, width, user, budget, json } => verify(&scheme, width, user, budget, json),
        Command::Measure { scheme, width } => measure(&scheme, width),
        Command::Region { step, out } => emit_region(&step, &out),
        Command::Search { target, files, users, t, seed, budget, exhaustive, regen, out } => {
            search(&target, files, users, t, seed, budget, exhaustive, regen, out.as_deref())
        }
        Command::Simulate { scheme, demands, seed, width, out } => {
            simulate(&scheme, &demands, seed, width, out.as_deref())
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e @ Error::UnknownScheme(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::fmt_rational;

    #[test]
    fn scheme_names_resolve() {
        for name in ["example1", "small-np", "thm1:3,2,0", "baseline:2,2,1", "plaintext:2,2,0", "lift:small-np"] {
            assert!(parse_scheme(name).is_ok(), "{name}");
        }
        assert_eq!(fmt_rational(parse_scheme("thm1:2,3,1").unwrap().params().rate()), "1/1");
        assert!(matches!(parse_scheme("nope"), Err(Error::UnknownScheme(_))));
        assert!(matches!(parse_scheme("thm1:2,2"), Err(Error::UnknownScheme(_))));
    }

    #[test]
    fn share_names_split_on_the_right_colon() {
        let s = parse_scheme("share:1/2:thm1:2,2,0:thm1:2,2,2").unwrap();
        assert_eq!(s.params().memory(), Rational::from_integer(1));
        assert_eq!(s.params().rate(), Rational::from_integer(1));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["cachepriv", "frobnicate"]), 2);
        assert_eq!(run(["cachepriv", "verify", "no-such-scheme"]), 2);
    }
}
