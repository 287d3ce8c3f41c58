//! `rwelfare`: exact revealed-preference welfare tests on JSON data files.
//!
//! Every command prints one JSON document with the answer, the raw verdict
//! and a certificate that `rwelfare verify` re-checks without solving any
//! linear program. Exit status is 0 for a positive answer, 1 for a
//! negative one and 2 for bad input.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use revealed_welfare::afriat::{afriat_system, build_utility, rationalize};
use revealed_welfare::aggregate::{
    check_demand, representative_consumer, sample_prices, RepAnswer,
};
use revealed_welfare::certificate::Certificate;
use revealed_welfare::collective::{
    efficiency_system, envy_free_rationalizable, envy_system, kaldor_system, kaldor_undominated,
    possibly_efficient, walras_system, walrasian_allocation, EnvyAnswer,
};
use revealed_welfare::feasibility::FeasibilityProblem;
use revealed_welfare::individual::{
    acceptable_top, acceptance_system, rank_robust, varian_system, AcceptAnswer,
};
use revealed_welfare::model::{load_data_file, DataFile, IndividualDataset};
use revealed_welfare::numerics::RVector;
use revealed_welfare::revpref::check_garp;
use revealed_welfare::synth::gen_economy;
use revealed_welfare::walras_price::{equilibrium_price, price_system};

#[derive(Parser)]
#[command(
    name = "rwelfare",
    version,
    about = "Revealed-preference welfare tests with checkable certificates"
)]
struct Cli {
    /// Include the labeled feasibility system in the output.
    #[arg(long, global = true)]
    dump_lp: bool,
    /// Also write the certificate alone to this file.
    #[arg(long, global = true, value_name = "FILE")]
    certificate: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check GARP for one agent, or for every agent.
    Garp {
        data: PathBuf,
        #[arg(long)]
        agent: Option<String>,
    },
    /// Afriat numbers for one agent's data.
    Rationalize {
        data: PathBuf,
        #[arg(long)]
        agent: Option<String>,
        /// Also print the pieces of the induced utility.
        #[arg(long)]
        utility: bool,
    },
    /// Is xbar above ybar for every concave rationalizing utility?
    Rank {
        data: PathBuf,
        #[arg(long)]
        agent: Option<String>,
        #[arg(long, value_name = "VECTOR")]
        xbar: String,
        #[arg(long, value_name = "VECTOR")]
        ybar: String,
    },
    /// Can xbar be weakly better than every observed bundle?
    Accept {
        data: PathBuf,
        #[arg(long)]
        agent: Option<String>,
        #[arg(long, value_name = "VECTOR")]
        xbar: String,
    },
    /// Possible Pareto efficiency of a named allocation.
    Efficient {
        data: PathBuf,
        #[arg(long)]
        allocation: String,
    },
    /// Sufficient condition for an allocation to Kaldor dominate another.
    Kaldor {
        data: PathBuf,
        #[arg(long)]
        allocation: String,
        #[arg(long, value_name = "ALLOCATION")]
        versus: String,
    },
    /// Is a named allocation of the endowments a Walrasian equilibrium?
    WalrasAlloc {
        data: PathBuf,
        #[arg(long)]
        allocation: String,
    },
    /// Is a named price a Walrasian equilibrium price?
    WalrasPrice {
        data: PathBuf,
        #[arg(long)]
        price: String,
    },
    /// Representative consumer for the aggregate data.
    RepConsumer {
        data: PathBuf,
        /// Largest integer price coordinate on the demand-check grid.
        #[arg(long, default_value_t = 3)]
        depth: u32,
    },
    /// Envy-free rationalization of a named allocation.
    Envy {
        data: PathBuf,
        #[arg(long)]
        allocation: String,
    },
    /// Write a seeded Cobb-Douglas economy as a data file.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        agents: usize,
        #[arg(long, default_value_t = 2)]
        goods: usize,
        #[arg(long, default_value_t = 3)]
        observations: usize,
    },
    /// Re-check a certificate (or a command's full output) against data.
    Verify { certificate: PathBuf, data: PathBuf },
}

/// Result of one command before printing.
struct Report {
    answer: String,
    positive: bool,
    body: Value,
    certificate: Option<Certificate>,
    lp: Option<FeasibilityProblem>,
}

impl Report {
    fn new(answer: impl Serialize, positive: bool, verdict: impl Serialize) -> Result<Self> {
        let answer = serde_json::to_value(answer)?;
        Ok(Report {
            answer: answer
                .as_str()
                .map_or_else(|| answer.to_string(), str::to_string),
            positive,
            body: json!({ "verdict": serde_json::to_value(verdict)? }),
            certificate: None,
            lp: None,
        })
    }

    fn with_certificate(mut self, c: Option<Certificate>) -> Self {
        self.certificate = c;
        self
    }

    fn with_lp(mut self, lp: Option<FeasibilityProblem>) -> Self {
        self.lp = lp;
        self
    }
}

fn load(path: &Path) -> Result<DataFile> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_data_file(file).with_context(|| format!("cannot read {}", path.display()))
}

fn pick_agent<'a>(data: &'a DataFile, agent: Option<&str>) -> Result<&'a IndividualDataset> {
    match agent {
        Some(id) => data
            .group
            .agent(id)
            .ok_or_else(|| anyhow!("no agent {id:?}")),
        None if data.group.len() == 1 => Ok(&data.group.agents()[0]),
        None => bail!(
            "the file has {} agents; choose one with --agent",
            data.group.len()
        ),
    }
}

fn vector(text: &str, d: &IndividualDataset) -> Result<RVector> {
    let v = RVector::parse_list(text).with_context(|| format!("bad vector {text:?}"))?;
    if v.len() != d.dim() {
        bail!(
            "vector {text:?} has {} entries, the data have {} goods",
            v.len(),
            d.dim()
        );
    }
    Ok(v)
}

fn run(cli: &Cli) -> Result<Report> {
    let dump = cli.dump_lp;
    match &cli.command {
        Command::Garp { data, agent } => {
            let data = load(data)?;
            let agents: Vec<&IndividualDataset> = match agent {
                Some(_) => vec![pick_agent(&data, agent.as_deref())?],
                None => data.group.agents().iter().collect(),
            };
            let results: Vec<Value> = agents
                .iter()
                .map(|d| json!({ "agent": d.id(), "report": check_garp(d) }))
                .collect();
            let violations: Vec<&IndividualDataset> = agents
                .iter()
                .copied()
                .filter(|d| !check_garp(d).passes())
                .collect();
            let positive = violations.is_empty();
            let cert = match (agents.as_slice(), violations.first()) {
                (_, Some(d)) => Some(Certificate::from_garp(d)),
                ([d], None) => Some(Certificate::from_garp(d)),
                _ => None,
            };
            let answer = if positive { "PASSES" } else { "VIOLATES" };
            let lp = match agents.as_slice() {
                [d] if dump => Some(afriat_system(d)),
                _ => None,
            };
            Ok(Report::new(answer, positive, results)?
                .with_certificate(cert)
                .with_lp(lp))
        }
        Command::Rationalize {
            data,
            agent,
            utility,
        } => {
            let data = load(data)?;
            let d = pick_agent(&data, agent.as_deref())?;
            let lp = dump.then(|| afriat_system(d));
            match rationalize(d) {
                Ok(numbers) => {
                    let mut report = Report::new("RATIONALIZABLE", true, &numbers)?;
                    if *utility {
                        let u = build_utility(&numbers, d)?;
                        report.body["utility"] = serde_json::to_value(&u)?;
                    }
                    Ok(report
                        .with_certificate(Some(Certificate::from_garp(d)))
                        .with_lp(lp))
                }
                Err(report) => Ok(Report::new("NOT_RATIONALIZABLE", false, &report)?
                    .with_certificate(Some(Certificate::from_garp(d)))
                    .with_lp(lp)),
            }
        }
        Command::Rank {
            data,
            agent,
            xbar,
            ybar,
        } => {
            let data = load(data)?;
            let d = pick_agent(&data, agent.as_deref())?;
            let (x, y) = (vector(xbar, d)?, vector(ybar, d)?);
            let v = rank_robust(d, &x, &y)?;
            let positive = v.answer == revealed_welfare::individual::RankAnswer::RobustlyBetter;
            let cert = Certificate::from_rank(d, &x, &y, &v);
            let lp = dump.then(|| varian_system(d, &x, &y).0);
            Ok(Report::new(v.answer, positive, &v)?
                .with_certificate(cert)
                .with_lp(lp))
        }
        Command::Accept { data, agent, xbar } => {
            let data = load(data)?;
            let d = pick_agent(&data, agent.as_deref())?;
            let x = vector(xbar, d)?;
            let v = acceptable_top(d, &x)?;
            let lp = if dump {
                Some(acceptance_system(d, &x)?)
            } else {
                None
            };
            Ok(
                Report::new(v.answer, v.answer == AcceptAnswer::Acceptable, &v)?
                    .with_certificate(Certificate::from_accept(d, &x, &v))
                    .with_lp(lp),
            )
        }
        Command::Efficient { data, allocation } => {
            let data = load(data)?;
            let xbar = data.allocation(allocation)?;
            let v = possibly_efficient(&data.group, xbar)?;
            let positive = v.support.is_some();
            let lp = if dump {
                Some(efficiency_system(&data.group, xbar)?)
            } else {
                None
            };
            Ok(Report::new(v.answer, positive, &v)?
                .with_certificate(Certificate::from_efficiency(xbar, &v))
                .with_lp(lp))
        }
        Command::Kaldor {
            data,
            allocation,
            versus,
        } => {
            let data = load(data)?;
            let (xbar, ybar) = (data.allocation(allocation)?, data.allocation(versus)?);
            let v = kaldor_undominated(&data.group, xbar, ybar)?;
            let positive = v.support.is_some();
            let lp = if dump {
                Some(kaldor_system(&data.group, xbar, ybar)?)
            } else {
                None
            };
            Ok(Report::new(v.answer, positive, &v)?
                .with_certificate(Certificate::from_kaldor(xbar, ybar, &v))
                .with_lp(lp))
        }
        Command::WalrasAlloc { data, allocation } => {
            let data = load(data)?;
            let (omega, xbar) = (data.endowments()?, data.allocation(allocation)?);
            let v = walrasian_allocation(&data.group, omega, xbar)?;
            let positive = v.support.is_some();
            let lp = if dump {
                Some(walras_system(&data.group, omega, xbar)?)
            } else {
                None
            };
            Ok(Report::new(v.answer, positive, &v)?
                .with_certificate(Certificate::from_walras(omega, xbar, &v))
                .with_lp(lp))
        }
        Command::WalrasPrice { data, price } => {
            let data = load(data)?;
            let (omega, p) = (data.endowments()?, data.price(price)?);
            let v = equilibrium_price(&data.group, omega, p)?;
            let positive = v.equilibrium.is_some();
            let lp = if dump {
                Some(price_system(&data.group, omega, p)?)
            } else {
                None
            };
            Ok(Report::new(v.answer, positive, &v)?
                .with_certificate(Certificate::from_price(omega, p, &v))
                .with_lp(lp))
        }
        Command::RepConsumer { data, depth } => {
            let data = load(data)?;
            let v = representative_consumer(&data.group);
            let positive = v.answer == RepAnswer::Representable;
            let mut report = Report::new(v.answer, positive, &v)?;
            if positive {
                let samples = sample_prices(data.group.dim(), *depth);
                report.body["demand_check"] =
                    json!(check_demand(&data.group, &v, &samples, *depth)?);
            }
            Ok(report.with_certificate(Certificate::from_representative(&v)))
        }
        Command::Envy { data, allocation } => {
            let data = load(data)?;
            let xbar = data.allocation(allocation)?;
            let v = envy_free_rationalizable(&data.group, xbar)?;
            let lp = dump.then(|| envy_system(&data.group, xbar));
            Ok(Report::new(v.answer, v.answer == EnvyAnswer::Yes, &v)?
                .with_certificate(Certificate::from_envy(xbar, &v))
                .with_lp(lp))
        }
        Command::Gen {
            seed,
            agents,
            goods,
            observations,
        } => {
            if *agents < 1 || *goods < 2 || *observations < 1 {
                bail!("need at least one agent, two goods and one observation");
            }
            let e = gen_economy(*seed, *agents, *goods, *observations);
            let file = DataFile {
                group: e.group,
                endowments: Some(e.endowments),
                allocations: [("equilibrium".to_string(), e.allocation)].into(),
                prices: [("equilibrium".to_string(), e.price)].into(),
            };
            Ok(Report {
                answer: "GENERATED".into(),
                positive: true,
                body: file.to_json(),
                certificate: None,
                lp: None,
            })
        }
        Command::Verify { certificate, data } => {
            let text = std::fs::read_to_string(certificate)
                .with_context(|| format!("cannot read {}", certificate.display()))?;
            let value: Value = serde_json::from_str(&text).context("certificate is not JSON")?;
            let value = match value.get("certificate") {
                Some(inner) => inner.clone(),
                None => value,
            };
            let cert: Certificate = serde_json::from_value(value).context("not a certificate")?;
            let data = load(data)?;
            let ok = cert.verify(&data.group);
            Ok(Report {
                answer: if ok { "PASS" } else { "FAIL" }.into(),
                positive: ok,
                body: json!({ "kind": serde_json::to_value(&cert)?["kind"] }),
                certificate: None,
                lp: None,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let mut out = if matches!(cli.command, Command::Gen { .. }) {
        report.body
    } else {
        let mut out = json!({ "answer": report.answer });
        if let Value::Object(body) = report.body {
            out.as_object_mut().expect("object").extend(body);
        }
        out
    };
    if let Some(c) = &report.certificate {
        out["certificate"] = serde_json::to_value(c).expect("serializable");
    }
    if let Some(lp) = &report.lp {
        out["lp"] = lp.to_json();
    }
    if let (Some(path), Some(c)) = (&cli.certificate, &report.certificate) {
        let text = serde_json::to_string_pretty(c).expect("serializable");
        if let Err(e) = std::fs::write(path, text + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    let text = serde_json::to_string_pretty(&out).expect("serializable");
    // A closed pipe (`rwelfare ... | head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout(), "{text}");
    if report.positive {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
