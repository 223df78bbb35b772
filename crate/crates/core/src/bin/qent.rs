use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use qent_core::demo::{self, ConditionalTally};
use qent_core::experiment::{self, eta_grid, SeriesConfig, SeriesKind};
use qent_core::noise::DampingMode;
use qent_core::transport::{Peer, TcpTransport};
use qent_core::wire::SessionId;
use qent_core::{Node, QentError, RandomSource};

#[derive(Parser)]
#[command(name = "qent", version, about = "Distributed entanglement simulator and BB84 channel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a BB84 series over damping factors and eavesdropper rates.
    Series {
        #[arg(long, default_value = "control")]
        series: SeriesKind,
        #[arg(long, default_value_t = 0.05)]
        eta_step: f64,
        /// Comma-separated; ignored for the control series.
        #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_EVE_RATES)]
        eve_rates: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1000)]
        qubits: usize,
        #[arg(long, env = "QENT_SEED", default_value_t = 1)]
        seed: u64,
        /// How the damping factor turns into loss: fraction or kraus.
        #[arg(long, default_value = "fraction")]
        damping: DampingMode,
        /// Raw per-trial CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-(rate, eta) means, spread and polynomial fit, as CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Entangle, rotate P, measure P, and report P(Q=0 | P=0) across two nodes.
    #[command(group(ArgGroup::new("mode").required(true).args(["loopback", "listen", "connect"])))]
    DemoEntangle {
        /// Run both nodes in this process over an in-memory channel.
        #[arg(long)]
        loopback: bool,
        /// Serve the Q side on HOST:PORT.
        #[arg(long, value_name = "HOST:PORT")]
        listen: Option<String>,
        /// Drive the P side against a listening peer.
        #[arg(long, value_name = "HOST:PORT")]
        connect: Option<String>,
        /// ry, rx, x, y, z, h or identity.
        #[arg(long, default_value = "ry")]
        gate: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, env = "QENT_SEED", default_value_t = 1)]
        seed: u64,
    },
    /// Convert between a damping factor and attenuation in dB.
    #[command(group(ArgGroup::new("input").required(true).args(["eta", "db"])))]
    ConvertDb {
        /// Damping factor in [0, 1).
        #[arg(long)]
        eta: Option<f64>,
        /// Attenuation in dB (≥ 0).
        #[arg(long)]
        db: Option<f64>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qent: {e}");
            ExitCode::FAILURE
        }
    }
}

fn writer(path: Option<&PathBuf>) -> Result<Box<dyn Write>, QentError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn report(gate: &str, theta: f64, t: &ConditionalTally) {
    let cond = t
        .q_zero_given_p_zero()
        .map_or_else(|| "undefined".to_string(), |p| format!("{p:.4}"));
    println!(
        "gate={gate} theta={theta} trials={} p_zero={} p_q0_given_p0={cond}",
        t.trials, t.p_zero
    );
}

fn run(cli: Cli) -> Result<(), QentError> {
    match cli.command {
        Command::Series {
            series,
            eta_step,
            eve_rates,
            trials,
            qubits,
            seed,
            damping,
            out,
            summary,
        } => {
            let cfg = SeriesConfig {
                series,
                etas: eta_grid(eta_step)?,
                eve_rates,
                trials,
                qubits,
                master_seed: seed,
                damping,
            };
            let rows = experiment::run_series(&cfg)?;
            experiment::write_rows(writer(out.as_ref())?, &rows)?;
            if let Some(path) = summary {
                experiment::write_rows(writer(Some(&path))?, &experiment::summarize(&rows)?)?;
            }
        }
        Command::DemoEntangle {
            loopback,
            listen,
            connect,
            gate,
            theta,
            trials,
            seed,
        } => {
            let g = demo::parse_gate(&gate, theta)?;
            if loopback {
                report(&gate, theta, &demo::run_loopback(&g, trials, seed)?);
            } else if let Some(addr) = listen {
                let listener = TcpListener::bind(&addr)?;
                eprintln!("listening on {}", listener.local_addr()?);
                let (stream, _) = listener.accept()?;
                let node_seed = RandomSource::derive_seed(seed, 1);
                let mut peer = Peer::accept(Node::new("responder", 2, node_seed), TcpTransport::new(stream)?)?;
                let t = demo::run_responder(&mut peer, &mut RandomSource::new(node_seed))?;
                report(&gate, theta, &t);
            } else if let Some(addr) = connect {
                let node_seed = RandomSource::derive_seed(seed, 0);
                let mut peer = Peer::connect(
                    Node::new("initiator", 1, node_seed),
                    TcpTransport::connect(addr.as_str())?,
                    SessionId::from_u128(u128::from(seed)),
                )?;
                let t = demo::run_initiator(&mut peer, &g, trials, &mut RandomSource::new(node_seed))?;
                println!("gate={gate} theta={theta} trials={} p_zero={}", t.trials, t.p_zero);
            }
        }
        Command::ConvertDb { eta, db } => {
            if let Some(eta) = eta {
                println!("eta={eta} db={:.6}", experiment::attenuation_db(eta)?);
            } else if let Some(db) = db {
                println!("db={db} eta={:.6}", experiment::eta_of_db(db)?);
            }
        }
    }
    Ok(())
}
