//! `dpd`: data-path discovery from the command line.
//!
//! Exit status is 0 on success, 1 when some probe ended in a loop, a disconnection, or without
//! observations, and 2 when an input could not be used.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use datapath::discovery::{derived_uid, plan, DiscoveryRequest};
use datapath::formats::{
    header_from_filter, load_log, parse_suite, read_text, traffic_type, write_log, CaseRecord,
    FlowTreeDoc,
};
use datapath::service::{self, AppState};
use datapath::{discover, render, Backend, DiscoveryResult, Error, Rules, Settings, Topology};
use datapath_core::simulator::{simulate, Probe};
use datapath_core::testgen::{bounds, suite_size_from, TestCase};

#[derive(Parser)]
#[command(
    name = "dpd",
    version,
    about = "Discover the data-paths of an SDN data-plane"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a topology file and report violations and warnings.
    Validate {
        topology: PathBuf,
        /// Also compile a rules file against the topology.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Worst-case number and length of data-paths.
    Bounds { topology: PathBuf },
    /// Export the test suite of a traffic type as JSON lines.
    Suite {
        topology: PathBuf,
        filter: String,
        #[arg(long)]
        cap: Option<u64>,
        #[arg(long = "from", value_name = "HOST")]
        sources: Vec<String>,
        #[arg(long, env = "DPD_ENUMERATION_LIMIT", default_value_t = datapath_core::headers::DEFAULT_ENUMERATION_LIMIT)]
        limit: u32,
    },
    /// Simulate one probe and print its observations as JSON lines.
    Simulate {
        topology: PathBuf,
        rules: PathBuf,
        #[arg(long = "from", value_name = "HOST")]
        source: String,
        #[arg(long)]
        header: String,
        /// Also print the ground-truth paths to stderr.
        #[arg(long)]
        truth: bool,
    },
    /// Reconstruct flow trees from simulated probes or an observation log.
    Discover {
        topology: PathBuf,
        #[arg(long, conflicts_with = "log", required_unless_present = "log")]
        rules: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long = "from", value_name = "HOST")]
        sources: Vec<String>,
        /// One header; unlisted fields are zero.
        #[arg(long, group = "probe", required_unless_present_any = ["traffic_type", "suite"])]
        header: Option<String>,
        /// Every header of a traffic type.
        #[arg(long = "type", group = "probe")]
        traffic_type: Option<String>,
        /// Test cases exported by `dpd suite`.
        #[arg(long, group = "probe")]
        suite: Option<PathBuf>,
        #[arg(long)]
        cap: Option<u64>,
        /// Drop the global ordering assumptions, for logs captured on real networks.
        #[arg(long)]
        relaxed: bool,
        #[arg(long, env = "DPD_ENUMERATION_LIMIT", default_value_t = datapath_core::headers::DEFAULT_ENUMERATION_LIMIT)]
        limit: u32,
        /// Print rendered trees instead of JSON.
        #[arg(long)]
        text: bool,
    },
    /// Draw a flow tree file, or every tree of a discovery result, as text.
    Render { file: PathBuf },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long, requires = "topology")]
        rules: Option<PathBuf>,
        /// Overrides DPD_LISTEN.
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
    },
}

enum Outcome {
    Done,
    AnalysisFailures,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::AnalysisFailures) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(text: &str) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| Error::Io {
            path: "<stdout>".into(),
            source,
        })
}

fn run(cmd: Command) -> Result<Outcome, Error> {
    match cmd {
        Command::Validate { topology, rules } => {
            let topo = Topology::load(&topology)?;
            let report = topo.plane.validate();
            for w in &report.warnings {
                eprintln!("{w}");
            }
            let mut msg = format!(
                "valid: {} hosts, {} switches, {} links, {}-bit headers\n",
                topo.plane.host_count(),
                topo.plane.switches().count(),
                topo.plane.link_count(),
                topo.schema.total_width()
            );
            if let Some(r) = rules {
                let rules = Rules::load(&topo, &r)?;
                msg.push_str(&format!("rules: {} installed\n", rules.config.rule_count()));
            }
            emit(&msg)?;
        }
        Command::Bounds { topology } => {
            let topo = Topology::load(&topology)?;
            let b = bounds(&topo.plane);
            emit(&format!(
                "nodes: {}\nmax_path_length: {}\nmax_path_count: {}\n",
                topo.plane.node_count(),
                b.max_path_length,
                b.max_path_count
            ))?;
        }
        Command::Suite {
            topology,
            filter,
            cap,
            sources,
            limit,
        } => {
            let topo = Topology::load(&topology)?;
            let t = traffic_type(&topo.schema, &filter)?;
            eprintln!(
                "suite size: {}",
                suite_size_from(source_count(&topo, &sources)?, &t)
            );
            let req = DiscoveryRequest {
                sources,
                traffic_type: Some(filter),
                cap,
                ..Default::default()
            };
            let mut out = String::new();
            for (case, _) in plan(&topo, &req, limit)? {
                let rec =
                    CaseRecord::new(&topo.plane, &case, Some(derived_uid(&topo.plane, &case)));
                out.push_str(&serde_json::to_string(&rec).expect("plain record"));
                out.push('\n');
            }
            emit(&out)?;
        }
        Command::Simulate {
            topology,
            rules,
            source,
            header,
            truth,
        } => {
            let topo = Topology::load(&topology)?;
            let rules = Rules::load(&topo, &rules)?;
            let case = TestCase {
                host: topo.host(&source)?,
                header: header_from_filter(&topo.schema, &header)?,
            };
            let probe = Probe {
                uid: derived_uid(&topo.plane, &case),
                origin: case.host,
                header: case.header,
            };
            let r = simulate(&topo.plane, &rules.config, &probe)?;
            if r.loop_hit {
                eprintln!("warning: the probe entered a forwarding loop");
            }
            if r.truncated {
                eprintln!("warning: the event budget ran out; the log is incomplete");
            }
            if truth {
                for p in &r.truth {
                    eprintln!("{}", p.render(&topo.plane));
                }
            }
            emit(&write_log(&topo.plane, &r.log))?;
        }
        Command::Discover {
            topology,
            rules,
            log,
            sources,
            header,
            traffic_type,
            suite,
            cap,
            relaxed,
            limit,
            text,
        } => {
            let topo = Topology::load(&topology)?;
            let cases = suite
                .map(|p| parse_suite(&read_text(&p)?).map_err(|e| e.in_file(&p)))
                .transpose()?;
            let req = DiscoveryRequest {
                sources,
                header: header.map(serde_json::Value::String),
                traffic_type,
                cases,
                cap,
                relaxed,
                ..Default::default()
            };
            let result = match (rules, log) {
                (Some(r), _) => {
                    let rules = Rules::load(&topo, &r)?;
                    discover(&topo, &req, Backend::Simulate(&rules.config), limit)?
                }
                (None, Some(l)) => {
                    let log = load_log(&topo.plane, &l)?;
                    discover(&topo, &req, Backend::Log(&log), limit)?
                }
                (None, None) => unreachable!("clap requires a backend"),
            };
            if text {
                emit(&render::result(&result))?;
            } else {
                emit(&format!(
                    "{}\n",
                    serde_json::to_string_pretty(&result).expect("plain document")
                ))?;
            }
            if result.has_failures() {
                return Ok(Outcome::AnalysisFailures);
            }
        }
        Command::Render { file } => {
            let text = read_text(&file)?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Syntax(format!("{}: {e}", file.display())))?;
            let out = if value.get("entries").is_some() {
                let r: DiscoveryResult = serde_json::from_value(value)
                    .map_err(|e| Error::Syntax(format!("{}: {e}", file.display())))?;
                render::result(&r)
            } else {
                let t: FlowTreeDoc = serde_json::from_value(value)
                    .map_err(|e| Error::Syntax(format!("{}: {e}", file.display())))?;
                render::tree(&t)
            };
            emit(&out)?;
        }
        Command::Serve {
            topology,
            rules,
            listen,
        } => {
            let mut settings = Settings::from_env().map_err(Error::Request)?;
            if let Some(l) = listen {
                settings.listen = l;
            }
            let state = AppState::new(settings.clone());
            if let Some(t) = topology {
                let topo = Topology::load(&t)?;
                let rules = rules.map(|r| Rules::load(&topo, &r)).transpose()?;
                state.load(topo, rules);
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|source| Error::Io {
                path: "<runtime>".into(),
                source,
            })?;
            runtime
                .block_on(async {
                    let listener = tokio::net::TcpListener::bind(settings.listen).await?;
                    eprintln!("listening on {}", listener.local_addr()?);
                    service::serve(state, listener).await
                })
                .map_err(|source| Error::Io {
                    path: settings.listen.to_string(),
                    source,
                })?;
        }
    }
    Ok(Outcome::Done)
}

fn source_count(topo: &Topology, names: &[String]) -> Result<usize, Error> {
    if names.is_empty() {
        return Ok(topo.plane.host_count());
    }
    let mut hosts = names
        .iter()
        .map(|n| topo.host(n))
        .collect::<Result<Vec<_>, _>>()?;
    hosts.sort();
    hosts.dedup();
    Ok(hosts.len())
}
