//! The `causeway` command line. Each invocation is stateless except `serve`,
//! which owns a workspace directory.
//!
//! Exit codes: 0 success, 1 the graph is inconsistent with the data,
//! 2 invalid input or usage, 3 the analysis failed on valid input.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use causeway_core::data::MissingPolicy;
use causeway_core::estimate::DEFAULT_REPLICATES;
use causeway_core::synth::ScmSpec;
use causeway_core::{CausalDag, DataTable, Schema};
use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, AdjustmentRequest, AnalysisError, EstimateRequest, ImplicationsRequest};
use crate::assets;
use crate::dagfile::{self, FormatError};
use crate::report::{Report, ReportBody, ValidationDoc};
use crate::server::{self, AppState, ServeError};
use crate::study::{Study, StudyError};
use crate::table::{self, LoadOptions, TableError};
use crate::workspace::{Workspace, WorkspaceError, WORKSPACE_ENV};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INCONSISTENT: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_ANALYSIS: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "causeway",
    version,
    about = "Causal graphs, implication tests, adjustment sets and IPW effect estimates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a DAG or structural-model file.
    Validate {
        /// File path, or `@name` for a bundled file.
        file: String,
    },
    /// Test the graph's implied independencies against data.
    Implications {
        graph: String,
        data: PathBuf,
        /// Significance level.
        #[arg(long, default_value_t = causeway_core::citest::DEFAULT_ALPHA)]
        alpha: f64,
        /// g2-williams, g2 or pearson.
        #[arg(long, default_value = "g2-williams")]
        statistic: String,
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List back-door trails and minimal adjustment sets.
    Adjust {
        graph: String,
        #[arg(long)]
        treatment: String,
        #[arg(long)]
        outcome: String,
        /// Also check this comma-separated candidate set.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        check: Option<Vec<String>>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Estimate the effect of each treatment level by inverse-probability
    /// weighting.
    Estimate {
        graph: String,
        data: PathBuf,
        #[arg(long)]
        treatment: String,
        #[arg(long)]
        outcome: String,
        /// Comma-separated adjustment set; default is the first minimal set.
        /// Pass an empty value for no adjustment.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        adjust: Option<Vec<String>>,
        /// Outcome level counted as the event.
        #[arg(long)]
        outcome_level: Option<String>,
        /// Headline measure: rr (risk ratio) or or (odds ratio).
        #[arg(long, default_value = "rr")]
        measure: String,
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also report the unadjusted estimate side by side.
        #[arg(long)]
        compare_unadjusted: bool,
        /// Use 1/propensity instead of stabilized weights.
        #[arg(long)]
        unstabilized: bool,
        /// Truncate weights at their 1st and 99th percentiles.
        #[arg(long)]
        truncate: bool,
        /// Estimate even if the adjustment set fails the back-door criterion.
        #[arg(long)]
        allow_invalid_adjustment: bool,
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sample data from a structural model.
    Simulate {
        /// Model file, or `@name` for a bundled scenario.
        model: String,
        /// Number of rows; with --study, the number of participants.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lay out rows as the study's participants × scenarios.
        #[arg(long)]
        study: Option<String>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API over a workspace.
    Serve {
        /// Graph to start from (optional when the workspace has history).
        #[arg(long)]
        graph: Option<String>,
        /// Dataset to store in the workspace.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        input: DataArgs,
        #[arg(long, env = WORKSPACE_ENV, default_value = ".causeway")]
        workspace: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Schema file for the data; the graph's variables by default.
    #[arg(long)]
    schema: Option<String>,
    /// Study descriptor: outcome coding and column binning.
    #[arg(long)]
    study: Option<String>,
    /// Drop rows with empty cells instead of failing.
    #[arg(long)]
    drop_incomplete: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: TableError },
    #[error("no bundled file `@{0}`")]
    UnknownAsset(String),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Analysis(e) if !e.is_input_error() => EXIT_ANALYSIS,
            CliError::Serve(_) => EXIT_ANALYSIS,
            _ => EXIT_INPUT,
        }
    }
}

/// Reads a path, or a bundled file for `@name`.
fn read_source(arg: &str) -> Result<String, CliError> {
    if let Some(name) = arg.strip_prefix('@') {
        return assets::ASSETS
            .iter()
            .find(|a| a.name == name || a.file == name)
            .map(|a| a.text.to_string())
            .ok_or_else(|| CliError::UnknownAsset(name.into()));
    }
    std::fs::read_to_string(arg).map_err(|source| CliError::Read {
        path: arg.into(),
        source,
    })
}

fn format_err(path: &str) -> impl FnOnce(FormatError) -> CliError + '_ {
    move |source| CliError::Format {
        path: path.into(),
        source,
    }
}

fn has_model(text: &str) -> bool {
    text.lines().any(|l| l.trim_start().starts_with("cpt"))
}

/// A DAG file, or the graph of a structural-model file.
fn load_graph(arg: &str) -> Result<CausalDag, CliError> {
    let text = read_source(arg)?;
    if has_model(&text) {
        Ok(dagfile::parse_scm(&text).map_err(format_err(arg))?.graph().clone())
    } else {
        dagfile::parse_dag(&text).map_err(format_err(arg))
    }
}

fn load_model(arg: &str) -> Result<ScmSpec, CliError> {
    dagfile::parse_scm(&read_source(arg)?).map_err(format_err(arg))
}

fn load_study(arg: &str) -> Result<Study, CliError> {
    if arg.starts_with('@') {
        // bundled descriptors refer to bundled files
        let mut s = Study::parse(&read_source(arg)?, Path::new(arg))?;
        fn at(p: &Path) -> PathBuf {
            PathBuf::from(format!("@{}", p.display()))
        }
        s.graph = at(&s.graph);
        s.pilot_graph = s.pilot_graph.as_deref().map(at);
        s.model = s.model.as_deref().map(at);
        Ok(s)
    } else {
        Ok(Study::load(Path::new(arg))?)
    }
}

fn load_data(path: &Path, g: &CausalDag, args: &DataArgs, study: Option<&Study>) -> Result<DataTable, CliError> {
    let schema = match &args.schema {
        Some(s) => dagfile::parse_schema(&read_source(s)?).map_err(format_err(s))?,
        None => Schema::from_dag(g),
    };
    let options = LoadOptions {
        missing: if args.drop_incomplete {
            MissingPolicy::DropRow
        } else {
            MissingPolicy::Reject
        },
        binning: study.map(|s| s.binning.clone()).unwrap_or_default(),
    };
    let table_err = |source| CliError::Table {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let loaded = table::load_table(file, &schema, &options).map_err(table_err)?;
    if loaded.dropped > 0 {
        eprintln!(
            "dropped {} incomplete rows of {}",
            loaded.dropped,
            loaded.dropped + loaded.table.n_rows()
        );
    }
    Ok(loaded.table)
}

fn emit(report: &Report, output: &OutputArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = &output.out {
        std::fs::write(path, report.to_json()).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    }
    let text = if output.json { report.to_json() } else { report.render() };
    let _ = stdout.write_all(text.as_bytes());
    Ok(())
}

fn run_command(cli: Cli, stdout: &mut dyn Write) -> Result<u8, CliError> {
    match cli.command {
        Command::Validate { file } => {
            let has_model = has_model(&read_source(&file)?);
            let g = load_graph(&file)?;
            let doc = ValidationDoc {
                variables: g.len(),
                edges: g.n_edges(),
                has_model,
            };
            let report = Report::new(
                crate::report::Provenance::new(Some(&g), None, &has_model),
                ReportBody::Validation(doc),
            );
            let _ = stdout.write_all(report.render().as_bytes());
            Ok(EXIT_OK)
        }
        Command::Implications {
            graph,
            data,
            alpha,
            statistic,
            input,
            output,
        } => {
            let g = load_graph(&graph)?;
            let study = input.study.as_deref().map(load_study).transpose()?;
            let t = load_data(&data, &g, &input, study.as_ref())?;
            let report = analysis::implications(&g, &t, &ImplicationsRequest { alpha, statistic })?;
            emit(&report, &output, stdout)?;
            let consistent = matches!(&report.body, ReportBody::Implications(d) if d.consistent());
            Ok(if consistent { EXIT_OK } else { EXIT_INCONSISTENT })
        }
        Command::Adjust {
            graph,
            treatment,
            outcome,
            check,
            output,
        } => {
            let g = load_graph(&graph)?;
            let check = check.map(|c| c.into_iter().filter(|s| !s.is_empty()).collect());
            let report = analysis::adjustment(
                &g,
                &AdjustmentRequest {
                    treatment,
                    outcome,
                    check,
                },
            )?;
            emit(&report, &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Estimate {
            graph,
            data,
            treatment,
            outcome,
            adjust,
            outcome_level,
            measure,
            replicates,
            seed,
            compare_unadjusted,
            unstabilized,
            truncate,
            allow_invalid_adjustment,
            input,
            output,
        } => {
            let g = load_graph(&graph)?;
            let study = input.study.as_deref().map(load_study).transpose()?;
            let t = load_data(&data, &g, &input, study.as_ref())?;
            let outcome_level = outcome_level.or_else(|| {
                study
                    .as_ref()
                    .filter(|s| s.outcome.variable == outcome)
                    .map(|s| s.outcome.event.clone())
            });
            let req = EstimateRequest {
                treatment,
                outcome,
                adjustment: adjust.map(|a| a.into_iter().filter(|s| !s.is_empty()).collect()),
                outcome_level,
                measure,
                stabilized: !unstabilized,
                truncate,
                replicates,
                seed,
                allow_invalid_adjustment,
                compare_unadjusted,
            };
            let report = analysis::estimate(&g, &t, &req)?;
            emit(&report, &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            model,
            n,
            seed,
            study,
            out,
        } => {
            let m = load_model(&model)?;
            let t = match study.as_deref().map(load_study).transpose()? {
                Some(mut s) => {
                    if let Some(n) = n {
                        s.participants = n;
                    }
                    s.simulate(&m, seed)?
                }
                None => {
                    let n = n.ok_or_else(|| CliError::Usage("--n is required without --study".into()))?;
                    analysis::sample_parallel(&m, n, seed)?
                }
            };
            let csv = table::table_to_string(&t);
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|source| CliError::Write {
                        path: path.clone(),
                        source,
                    })?;
                    eprintln!("wrote {} rows to {}", t.n_rows(), path.display());
                }
                None => {
                    let _ = stdout.write_all(csv.as_bytes());
                }
            }
            Ok(EXIT_OK)
        }
        Command::Serve {
            graph,
            data,
            input,
            workspace,
            host,
            port,
        } => {
            let g = graph.as_deref().map(load_graph).transpose()?;
            let t = match (&data, &g) {
                (Some(path), Some(g)) => {
                    let study = input.study.as_deref().map(load_study).transpose()?;
                    Some(load_data(path, g, &input, study.as_ref())?)
                }
                (Some(_), None) => return Err(CliError::Usage("--data needs --graph to define its schema".into())),
                _ => None,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(ServeError::Io)?;
            runtime.block_on(async move {
                let listener = server::bind(SocketAddr::new(host, port)).await?;
                let ws = Workspace::open(&workspace, g, t)?;
                let shutdown = server::shutdown_signal()?;
                eprintln!(
                    "serving {} on http://{}/api/v1 (graph version {})",
                    workspace.display(),
                    listener.local_addr().map_err(ServeError::Io)?,
                    ws.active().version
                );
                server::serve(listener, AppState::new(ws), shutdown).await?;
                Ok::<_, CliError>(())
            })?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses arguments and runs one command, returning the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match run_command(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
