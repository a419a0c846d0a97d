//! `rgc`: command-line front end for garbled-circuit delegation.
//!
//! Exit codes: 0 success, 1 protocol or runtime error, 2 usage error.
//! Every random choice derives from `--seed` through a [`SeedTree`], so
//! identical arguments give byte-identical outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde_json::json;

use rgc_core::circuit::{parse_circuit, random_circuit, CpCircuit};
use rgc_core::delegation::{
    blind_delegate, gbc_decrypt, gbc_encrypt, gbc_keygen, product_state, server_eval, shor_delegate,
    shor_postprocess, EncodedResult, GbcKeys, JobBundle, KappaMode,
};
use rgc_core::encoding::{cnot_cost, decode, encode, lemma1_check, KeySchedule};
use rgc_core::garble::garble_circuit;
use rgc_core::net_io::{self, Wire};
use rgc_core::oracle::RandomOracle;
use rgc_core::security::{
    key_recovery_experiment, run_ind_cpa_gbc, run_na_sym_kdm, run_rg_game, BruteForce, ConstantGuess, GameConfig,
    GbcDistinguisher, KdmChallenger, KdmConstant, KdmDistinguisher, KdmLeakedKey, KdmTagGrinding, KeyLowBit, LeakedKey,
    PadCollision, RandomGuess, ReplayRevealed, RgConstant, RgDistinguisher, RgInstance, RgLeakedKey, RgOpenAndInspect,
    RgTagGrinding, RowFrequency, TagGrinding,
};
use rgc_core::seed::SeedTree;
use rgc_core::sim::{fidelity, DensityMatrix, SparseState};
use rgc_core::sym::CryptoParams;

#[derive(Parser)]
#[command(name = "rgc", version, about = "Reversible garbled circuits for delegating C+P quantum circuits")]
struct Cli {
    /// Master seed for all randomness.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Use the lazily sampled table oracle (single-process commands only).
    #[arg(long, global = true)]
    table_oracle: bool,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct KappaArgs {
    /// Security parameter.
    #[arg(long, default_value_t = 16)]
    eta: usize,

    /// Use kappa = eta instead of eta + 4 N_q.
    #[arg(long = "conjecture-1")]
    conjecture_1: bool,
}

impl KappaArgs {
    fn mode(&self) -> KappaMode {
        if self.conjecture_1 {
            KappaMode::Eta
        } else {
            KappaMode::Margin
        }
    }
}

#[derive(Args, Clone)]
struct RemoteArgs {
    /// Evaluate on a server at host:port.
    #[arg(long, conflicts_with = "dir")]
    endpoint: Option<String>,

    /// Evaluate through a file-transport directory.
    #[arg(long)]
    dir: Option<PathBuf>,

    /// Seconds to wait for a remote result.
    #[arg(long, default_value_t = 600)]
    timeout: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a key schedule for a circuit.
    Keygen {
        #[arg(long)]
        circuit: PathBuf,
        #[command(flatten)]
        kappa: KappaArgs,
        /// Number of inputs carrying superpositions (defaults to all).
        #[arg(long)]
        quantum: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Garble a circuit under a key schedule.
    Garble {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode an input and package it with a garbled bundle as a job.
    Encode {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// Product input over 0, 1, +, - (character i is qubit i).
        #[arg(long)]
        input: String,
        /// Oracle seed in hex; defaults to the one derived from --seed.
        #[arg(long)]
        oracle_seed: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a job locally or remotely.
    Eval {
        #[arg(long)]
        job: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        remote: RemoteArgs,
    },
    /// Decode an evaluation result.
    Decode {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full delegation: keygen, garble, encode, eval, decode.
    Delegate {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        input: String,
        #[command(flatten)]
        kappa: KappaArgs,
        #[command(flatten)]
        remote: RemoteArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Delegate through the universal machine so the circuit stays hidden.
    Blind {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 16)]
        kappa: usize,
        /// Gate capacity of the universal machine.
        #[arg(long)]
        max_gates: usize,
        /// Largest phase exponent d the machine supports.
        #[arg(long = "max-denom", default_value_t = 3)]
        max_denom: u32,
    },
    /// Delegated order finding and factoring.
    Shor {
        #[arg(long = "M")]
        modulus: u64,
        #[arg(long)]
        a: Option<u64>,
        #[command(flatten)]
        kappa: KappaArgs,
        #[arg(long, default_value_t = 10)]
        attempts: usize,
    },
    /// Exact check of the encoding bound on a random state.
    Lemma1 {
        #[arg(long)]
        kappa: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Reference qubits entangled with the encoded ones.
        #[arg(long, default_value_t = 0)]
        refs: usize,
    },
    /// Run the distinguishing games and print JSON lines.
    SecurityTest {
        #[arg(long, value_enum, default_value_t = Game::All)]
        game: Game,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long, default_value_t = 16)]
        kappa: usize,
        /// Oracle queries allowed per distinguisher run.
        #[arg(long, default_value_t = 64)]
        budget: u64,
    },
    /// Time evaluation on random circuits.
    Bench {
        #[arg(long, default_value_t = 5)]
        qubits: usize,
        #[arg(long, default_value_t = 15)]
        gates: usize,
        #[arg(long = "max-denom", default_value_t = 3)]
        max_denom: u32,
        #[arg(long, default_value_t = 16)]
        kappa: usize,
        #[arg(long, default_value_t = 10)]
        reps: u64,
    },
    /// Serve evaluation requests.
    Serve {
        #[arg(long, conflicts_with = "dir", required_unless_present = "dir")]
        endpoint: Option<String>,
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Stop after this many requests.
        #[arg(long)]
        max_requests: Option<u64>,
        /// Inbox poll interval in milliseconds.
        #[arg(long, default_value_t = 100)]
        poll_ms: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Game {
    All,
    IndCpa,
    Kdm,
    Rg,
    KeyRecovery,
}

/// An error caused by the arguments rather than by the run.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_circuit(path: &Path) -> anyhow::Result<CpCircuit> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_circuit(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_wire<T: Wire>(path: &Path) -> anyhow::Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    T::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_wire<T: Wire>(path: &Path, v: &T) -> anyhow::Result<()> {
    std::fs::write(path, v.to_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn input_state(spec: &str, circuit: &CpCircuit) -> anyhow::Result<SparseState> {
    if spec.chars().count() != circuit.num_inputs() {
        return Err(usage(format!(
            "input {spec:?} has {} qubits, circuit has {}",
            spec.chars().count(),
            circuit.num_inputs()
        )));
    }
    product_state(spec).map_err(|e| usage(e.to_string()))
}

fn quantum_count(spec: &str) -> usize {
    spec.chars().filter(|c| !matches!(c, '0' | '1')).count()
}

fn local_only(cli_table: bool, what: &str) -> anyhow::Result<()> {
    if cli_table {
        return Err(usage(format!("--table-oracle cannot be used with {what}")));
    }
    Ok(())
}

/// The oracle for a run and its public seed (empty for the table oracle).
fn make_oracle(seeds: &SeedTree, table: bool) -> (RandomOracle, Vec<u8>) {
    if table {
        (RandomOracle::table(seeds.seed_u64("oracle")), Vec::new())
    } else {
        let seed = seeds.seed_bytes("oracle").to_vec();
        (RandomOracle::hash_derived(&seed), seed)
    }
}

/// Terms as `{bits, re, im}` with qubit 0 first in `bits`.
fn state_json(s: &SparseState) -> serde_json::Value {
    let terms: Vec<_> = s
        .terms()
        .iter()
        .map(|(b, a)| {
            let bits: String = (0..b.len()).map(|i| if b.get(i) { '1' } else { '0' }).collect();
            json!({ "bits": bits, "re": a.re, "im": a.im })
        })
        .collect();
    json!({ "qubits": s.layout().total_bits(), "terms": terms })
}

fn evaluate(job: &JobBundle, remote: &RemoteArgs, seeds: &SeedTree) -> anyhow::Result<EncodedResult> {
    let timeout = Duration::from_secs(remote.timeout);
    if let Some(ep) = &remote.endpoint {
        return Ok(net_io::submit_tcp(ep.as_str(), job, timeout)?);
    }
    if let Some(dir) = &remote.dir {
        let id = format!("job-{:016x}", seeds.seed_u64("job-id"));
        net_io::submit_file(dir, &id, job)?;
        return Ok(net_io::collect_file(dir, &id, timeout)?);
    }
    let oracle = RandomOracle::hash_derived(&job.oracle_seed);
    Ok(server_eval(&oracle, job)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seeds = SeedTree::new(cli.seed);
    match cli.cmd {
        Command::Keygen {
            circuit,
            kappa,
            quantum,
            out,
        } => {
            let c = read_circuit(&circuit)?;
            let nq = quantum.unwrap_or(c.num_inputs());
            if nq > c.num_inputs() {
                return Err(usage("--quantum exceeds the number of inputs"));
            }
            let keys = gbc_keygen(kappa.eta, nq, &c, kappa.mode(), &mut seeds.rng("keys")).map_err(|e| usage(e.to_string()))?;
            write_wire(&out, &keys.schedule)?;
            println!("{}", json!({ "kappa": keys.kappa_bits, "wires": keys.schedule.pairs.len() }));
        }
        Command::Garble { circuit, keys, out } => {
            local_only(cli.table_oracle, "garble")?;
            let c = read_circuit(&circuit)?;
            let schedule: KeySchedule = read_wire(&keys)?;
            if schedule.pairs.len() != c.num_wires() {
                bail!("key schedule has {} wires, circuit has {}", schedule.pairs.len(), c.num_wires());
            }
            let (oracle, oseed) = make_oracle(&seeds, false);
            let params = CryptoParams::with_kappa(schedule.kappa_bits)?;
            let bundle = garble_circuit(&oracle, &params, &c, &schedule, &seeds.child("garble"))?;
            write_wire(&out, &bundle)?;
            println!(
                "{}",
                json!({ "gates": c.len(), "toffolis": c.toffoli_count(), "oracle_seed": hex::encode(oseed) })
            );
        }
        Command::Encode {
            keys,
            bundle,
            input,
            oracle_seed,
            out,
        } => {
            local_only(cli.table_oracle, "encode")?;
            let schedule: KeySchedule = read_wire(&keys)?;
            let bundle: rgc_core::garble::GarbledBundle = read_wire(&bundle)?;
            let state = input_state(&input, &bundle.circuit)?;
            let oracle_seed = match oracle_seed {
                Some(h) => hex::decode(h).map_err(|e| usage(format!("--oracle-seed: {e}")))?,
                None => seeds.seed_bytes("oracle").to_vec(),
            };
            let encoded = encode(&state, &schedule, &schedule.input_wires)?;
            let cost = cnot_cost(&schedule, &schedule.input_wires)?;
            write_wire(
                &out,
                &JobBundle {
                    oracle_seed,
                    encoded,
                    bundle,
                },
            )?;
            println!("{}", serde_json::to_string(&cost)?);
        }
        Command::Eval { job, out, remote } => {
            local_only(cli.table_oracle, "eval")?;
            let job: JobBundle = read_wire(&job)?;
            let res = evaluate(&job, &remote, &seeds)?;
            write_wire(&out, &res)?;
            println!("{}", res.stats.to_json_line());
        }
        Command::Decode { keys, result, out } => {
            let schedule: KeySchedule = read_wire(&keys)?;
            let res: EncodedResult = read_wire(&result)?;
            let state = decode(&res.state, &schedule, &schedule.output_wires)?;
            if let Some(p) = out {
                write_wire(&p, &state)?;
            }
            println!("{}", state_json(&state));
        }
        Command::Delegate {
            circuit,
            input,
            kappa,
            remote,
            out,
        } => {
            let c = read_circuit(&circuit)?;
            let state = input_state(&input, &c)?;
            let remote_mode = remote.endpoint.is_some() || remote.dir.is_some();
            if remote_mode {
                local_only(cli.table_oracle, "--endpoint or --dir")?;
            }
            let keys = gbc_keygen(kappa.eta, quantum_count(&input), &c, kappa.mode(), &mut seeds.rng("keys"))
                .map_err(|e| usage(e.to_string()))?;
            let (oracle, oseed) = make_oracle(&seeds, cli.table_oracle);
            let job = gbc_encrypt(&oracle, &oseed, &keys, &c, &state, &seeds)?;
            let res = if remote_mode {
                evaluate(&job, &remote, &seeds)?
            } else {
                server_eval(&oracle, &job)?
            };
            let output = gbc_decrypt(&keys, &res)?;
            let direct = c.simulate(&state)?;
            if let Some(p) = out {
                write_wire(&p, &output)?;
            }
            let cost = cnot_cost(&keys.schedule, &keys.schedule.input_wires)?;
            println!(
                "{}",
                json!({
                    "kappa": keys.kappa_bits,
                    "fidelity_vs_direct": fidelity(&output, &direct)?,
                    "cost_within_bound": cost.within_bound(),
                    "encoding": cost,
                    "stats": res.stats,
                    "output": state_json(&output),
                })
            );
        }
        Command::Blind {
            circuit,
            input,
            kappa,
            max_gates,
            max_denom,
        } => {
            let c = read_circuit(&circuit)?;
            let state = input_state(&input, &c)?;
            if kappa == 0 || kappa % 8 != 0 {
                return Err(usage("--kappa must be a positive multiple of 8"));
            }
            let (oracle, oseed) = make_oracle(&seeds, cli.table_oracle);
            let run = blind_delegate(&oracle, &oseed, kappa, &c, &state, max_gates, max_denom, &seeds).map_err(|e| match e {
                rgc_core::Error::CircuitTooLarge { .. } | rgc_core::Error::InvalidCircuit(_) => usage(e.to_string()),
                e => e.into(),
            })?;
            let direct = c.simulate(&state)?;
            println!(
                "{}",
                json!({
                    "machine_gates": run.job.bundle.circuit.len(),
                    "fidelity_vs_direct": fidelity(&run.output, &direct)?,
                    "stats": run.stats,
                })
            );
        }
        Command::Shor {
            modulus,
            a,
            kappa,
            attempts,
        } => {
            let a = match a {
                Some(a) => a,
                None => (2..modulus)
                    .find(|&a| rgc_core::delegation::gcd(a, modulus) == 1)
                    .ok_or_else(|| usage("no base coprime to M"))?,
            };
            rgc_core::delegation::check_shor_modulus(modulus, a).map_err(|e| usage(e.to_string()))?;
            let (oracle, oseed) = make_oracle(&seeds, cli.table_oracle);
            let start = Instant::now();
            let run = shor_delegate(&oracle, &oseed, modulus, a, kappa.eta, kappa.mode(), &seeds)?;
            let mut rng = seeds.rng("measure");
            let mut found = None;
            let mut tried = 0;
            for _ in 0..attempts {
                tried += 1;
                let o = shor_postprocess(&run.setup, &run.output, &mut rng)?;
                if let Some(f) = o.factor {
                    found = Some((f, o));
                    break;
                }
            }
            let (factor, outcome) = found.ok_or_else(|| anyhow!("no factor of {modulus} in {attempts} attempts"))?;
            println!("factor {factor} of {modulus} (a = {a}, attempt {tried})");
            println!(
                "{}",
                json!({
                    "M": modulus,
                    "a": a,
                    "factor": factor,
                    "period": outcome.period,
                    "attempts": tried,
                    "cost": run.cost,
                    "stats": run.stats,
                    "elapsed_ms": start.elapsed().as_millis() as u64,
                })
            );
        }
        Command::Lemma1 { kappa, n, refs } => {
            if kappa == 0 || n == 0 {
                return Err(usage("--kappa and --n must be positive"));
            }
            let psi = SparseState::random("s", n + refs, &mut seeds.rng("state")).map_err(|e| usage(e.to_string()))?;
            let rho = DensityMatrix::pure(&psi)?;
            let report = lemma1_check(kappa, n, &rho).map_err(|e| usage(e.to_string()))?;
            println!("{}", serde_json::to_string(&report)?);
            if !report.holds() {
                bail!("distance {} exceeds bound {}", report.distance, report.bound);
            }
        }
        Command::SecurityTest {
            game,
            trials,
            kappa,
            budget,
        } => security_test(game, trials, kappa, budget, cli.seed)?,
        Command::Bench {
            qubits,
            gates,
            max_denom,
            kappa,
            reps,
        } => {
            if qubits == 0 {
                return Err(usage("--qubits must be positive"));
            }
            for r in 0..reps {
                let s = seeds.indexed("bench", r);
                let c = random_circuit(qubits, gates, max_denom, &mut s.rng("circuit"))?;
                let state = SparseState::random("q", qubits, &mut s.rng("state"))?;
                let keys = GbcKeys {
                    schedule: rgc_core::encoding::gen_keys(kappa, &c, &mut s.rng("keys"))?,
                    kappa_bits: kappa,
                    eta: kappa,
                    num_quantum: qubits,
                };
                let (oracle, oseed) = make_oracle(&s, cli.table_oracle);
                let t0 = Instant::now();
                let job = gbc_encrypt(&oracle, &oseed, &keys, &c, &state, &s)?;
                let t1 = Instant::now();
                let res = server_eval(&oracle, &job)?;
                let t2 = Instant::now();
                let out = gbc_decrypt(&keys, &res)?;
                let f = fidelity(&out, &c.simulate(&state)?)?;
                println!(
                    "{}",
                    json!({
                        "rep": r,
                        "gates": c.len(),
                        "garble_us": (t1 - t0).as_micros() as u64,
                        "eval_us": (t2 - t1).as_micros() as u64,
                        "fidelity": f,
                        "stats": res.stats,
                    })
                );
            }
        }
        Command::Serve {
            endpoint,
            dir,
            max_requests,
            poll_ms,
        } => {
            local_only(cli.table_oracle, "serve")?;
            if let Some(ep) = endpoint {
                let listener = std::net::TcpListener::bind(&ep).with_context(|| format!("binding {ep}"))?;
                eprintln!("listening on {}", listener.local_addr()?);
                let n = net_io::serve_tcp(listener, max_requests)?;
                eprintln!("served {n} requests");
            } else if let Some(d) = dir {
                let n = net_io::serve_dir(&d, Duration::from_millis(poll_ms), max_requests.map(|m| m as usize))?;
                eprintln!("served {n} jobs");
            }
        }
    }
    Ok(())
}

fn security_test(game: Game, trials: u64, kappa: usize, budget: u64, seed: u64) -> anyhow::Result<()> {
    if kappa == 0 || !kappa.is_multiple_of(8) {
        return Err(usage("--kappa must be a positive multiple of 8"));
    }
    if trials < 2 {
        return Err(usage("--trials must be at least 2"));
    }
    let c = rgc_core::circuit::allocate_wires(
        3,
        &[
            rgc_core::circuit::LogicalGate::toffoli(0, 1, 2),
            rgc_core::circuit::LogicalGate::phase(2, 1),
            rgc_core::circuit::LogicalGate::toffoli(2, 0, 1),
        ],
    )?;
    let cfg = |s: u64| GameConfig {
        kappa_bits: kappa,
        trials,
        seed: seed.wrapping_mul(1000).wrapping_add(s),
        query_budget: budget,
    };
    let emit = |r: rgc_core::security::GameReport| println!("{}", r.to_json_line());
    let want = |g: Game| game == Game::All || game == g;

    if want(Game::IndCpa) {
        let ds: [&dyn GbcDistinguisher; 4] = [&ConstantGuess(true), &TagGrinding, &RowFrequency, &KeyLowBit];
        for (i, d) in ds.into_iter().enumerate() {
            emit(run_ind_cpa_gbc(d, &c, &cfg(10 + i as u64), false)?);
        }
        emit(run_ind_cpa_gbc(&LeakedKey, &c, &cfg(19), true)?);
    }
    if want(Game::Kdm) {
        let ds: [&dyn KdmDistinguisher; 4] = [
            &KdmConstant(true),
            &KdmTagGrinding { two_cycle: false },
            &KdmTagGrinding { two_cycle: true },
            &PadCollision,
        ];
        for (i, d) in ds.into_iter().enumerate() {
            emit(run_na_sym_kdm(d, 3, &cfg(20 + i as u64), KdmChallenger::Honest)?);
        }
        emit(run_na_sym_kdm(&PadCollision, 3, &cfg(28), KdmChallenger::ReusedPad)?);
        emit(run_na_sym_kdm(&KdmLeakedKey, 3, &cfg(29), KdmChallenger::LeakKeys)?);
    }
    if want(Game::Rg) {
        let mut rng = SeedTree::new(seed).rng("rg-input");
        let input = rgc_core::bits::BitString::from_u64(rng.gen_range(0..8), 3);
        let inst = RgInstance::from_circuit(&c, &input)?;
        let ds: [&dyn RgDistinguisher; 3] = [&RgConstant(false), &RgOpenAndInspect, &RgTagGrinding];
        for (i, d) in ds.into_iter().enumerate() {
            emit(run_rg_game(d, &inst, &cfg(30 + i as u64), false)?);
        }
        emit(run_rg_game(&RgLeakedKey, &inst, &cfg(39), true)?);
    }
    if want(Game::KeyRecovery) {
        let runs = [
            key_recovery_experiment(&c, &RandomGuess, kappa, trials, seed ^ 41, budget, 0)?,
            key_recovery_experiment(&c, &ReplayRevealed, kappa, trials, seed ^ 42, budget, 0)?,
            key_recovery_experiment(&c, &BruteForce, 8, trials.min(1000), seed ^ 43, 300, 0)?,
        ];
        for r in runs {
            println!("{}", serde_json::to_string(&r)?);
        }
    }
    Ok(())
}
