//! `mlk`: operator CLI over a model lake, either embedded (opens the lake
//! directory directly, holding its lock) or remote (talks to `mlk serve`).
//!
//! With `--output json` every command prints exactly the canonical JSON the
//! HTTP service returns for the same request.
//!
//! Exit codes: 0 success, 1 rejected request (validation, conflict, bad
//! query), 2 not found, 3 IO / configuration / transport error.

pub mod backend;
pub mod cli;
pub mod fixture_files;
pub mod render;

use std::ffi::OsString;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use clap::Parser;
use modellake::catalog::SearchQuery;
use modellake::model::{Record, RecordType, Timestamp};
use modellake::Lake;
use modellake_server::api::{self, Query, Write};
use modellake_server::ServiceConfig;
use serde_json::Value;

use crate::backend::{Backend, Failure};
use crate::cli::{Audit, Cli, Command, Output};

/// Parses `argv` and runs one command. Payloads go to `out`, diagnostics
/// to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn io::Write, err: &mut dyn io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let output = cli.output;
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Api(e) => {
                    if output == Output::Json {
                        let _ = out.write_all(&api::to_body(e));
                        let _ = out.write_all(b"\n");
                    }
                    let _ = writeln!(err, "error: {e}");
                    if let Some(v) = &e.violations {
                        for v in &v.violations {
                            let _ = writeln!(err, "  {}: {} ({})", v.field, v.message, v.rule);
                        }
                    }
                }
                Failure::Setup(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                }
            }
            f.exit_code()
        }
    }
}

fn setup<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Setup(format!("{context}: {e}"))
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(setup("reading stdin"))?;
        return Ok(buf);
    }
    std::fs::read(path).map_err(setup(&path.display().to_string()))
}

fn data_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    cli.data_dir.clone().ok_or_else(|| {
        Failure::Setup(
            "no lake selected: pass --data-dir or --endpoint (or set MLK_DATA_DIR)".into(),
        )
    })
}

fn backend(cli: &Cli) -> Result<Backend, Failure> {
    match (&cli.data_dir, &cli.endpoint) {
        (Some(_), Some(_)) => Err(Failure::Setup(
            "--data-dir and --endpoint are mutually exclusive".into(),
        )),
        (None, Some(url)) => Ok(Backend::remote(url)),
        _ => {
            let lake = Lake::open(data_dir(cli)?).map_err(|e| Failure::Setup(e.to_string()))?;
            Ok(Backend::Embedded {
                lake: Box::new(lake),
                swamp_threshold: cli.swamp_threshold,
            })
        }
    }
}

fn emit(body: &[u8], output: Output, out: &mut dyn io::Write) -> Result<(), Failure> {
    let r = match output {
        Output::Json => out.write_all(body).and_then(|_| out.write_all(b"\n")),
        Output::Table => {
            let v: Value = serde_json::from_slice(body).map_err(setup("response"))?;
            out.write_all(render::render(&v).as_bytes())
        }
    };
    r.map_err(setup("writing output"))
}

fn execute(cli: Cli, out: &mut dyn io::Write, err: &mut dyn io::Write) -> Result<(), Failure> {
    if !cli.swamp_threshold.is_finite() {
        return Err(Failure::Setup("swamp threshold must be finite".into()));
    }
    let output = cli.output;
    let q = match &cli.command {
        Command::Init { dir } => return init(&cli, dir.clone(), out),
        Command::Serve { bind } => return serve_forever(&cli, bind, out),
        Command::Canonicalize(f) => return canonicalize(&f.file, out),
        Command::Put { file, kind } => {
            let w = Write::Artifact {
                payload: read_input(file)?,
                kind: *kind,
            };
            return write(&cli, w, out, err);
        }
        Command::Ingest(f) => return register(&cli, RecordType::Ingest, &f.file, out, err),
        Command::RegisterProcess(f) => {
            return register(&cli, RecordType::Process, &f.file, out, err)
        }
        Command::RegisterAnalysis(f) => {
            return register(&cli, RecordType::Analysis, &f.file, out, err)
        }
        Command::Register { record_type, file } => {
            return register(&cli, *record_type, &file.file, out, err)
        }
        Command::Search {
            text,
            kind,
            tag,
            user,
            from,
            to,
            limit,
            offset,
        } => Query::Search(SearchQuery {
            text: text.clone(),
            kinds: kind.clone(),
            tags: tag.clone(),
            user: user.clone(),
            from: from.as_deref().map(Timestamp::parse_lenient),
            to: to.as_deref().map(Timestamp::parse_lenient),
            limit: *limit,
            offset: *offset,
        }),
        Command::Lineage { id, .. } => Query::Lineage(id.clone()),
        Command::Versions { id } => Query::Versions(id.clone()),
        Command::Diff { a, b } => Query::Diff(a.clone(), b.clone()),
        Command::Audit(a) => match a {
            Audit::Compliance { model, approved } => Query::Compliance {
                model: model.clone(),
                approved: api::approved_from_param(Some(approved)),
            },
            Audit::Repro { analysis } => Query::Repro(analysis.clone()),
            Audit::Health { threshold } => {
                if threshold.is_some_and(|t| !t.is_finite()) {
                    return Err(
                        api::ApiError::invalid_query("threshold must be a finite number").into(),
                    );
                }
                Query::Health {
                    threshold: *threshold,
                }
            }
            Audit::Bias { model } => Query::Bias(model.clone()),
            Audit::Evolution { head } => Query::Evolution(head.clone()),
        },
        Command::Project { study_id } => Query::Project(study_id.clone()),
    };
    let output = match &cli.command {
        Command::Lineage {
            format: Some(f), ..
        } => *f,
        _ => output,
    };
    let body = backend(&cli)?.query(&q)?;
    emit(&body, output, out)
}

fn write(
    cli: &Cli,
    w: Write,
    out: &mut dyn io::Write,
    err: &mut dyn io::Write,
) -> Result<(), Failure> {
    let (created, body) = backend(cli)?.write(w)?;
    if !created {
        let _ = writeln!(err, "note: already present, nothing written");
    }
    emit(&body, cli.output, out)
}

fn register(
    cli: &Cli,
    record_type: RecordType,
    file: &Path,
    out: &mut dyn io::Write,
    err: &mut dyn io::Write,
) -> Result<(), Failure> {
    let w = Write::Register {
        record_type,
        body: read_input(file)?,
    };
    write(cli, w, out, err)
}

fn init(cli: &Cli, dir: Option<PathBuf>, out: &mut dyn io::Write) -> Result<(), Failure> {
    if cli.endpoint.is_some() {
        return Err(Failure::Setup(
            "init works on a local directory only".into(),
        ));
    }
    let dir = match dir {
        Some(d) => d,
        None => data_dir(cli)?,
    };
    let created = !Lake::exists(&dir);
    let lake = if created {
        Lake::init(&dir)
    } else {
        Lake::open(&dir)
    }
    .map_err(|e| Failure::Setup(e.to_string()))?;
    let body = api::to_body(&serde_json::json!({
        "created": created,
        "records": lake.record_count(),
        "root": dir.display().to_string(),
    }));
    emit(&body, cli.output, out)
}

fn serve_forever(cli: &Cli, bind: &str, out: &mut dyn io::Write) -> Result<(), Failure> {
    if cli.endpoint.is_some() {
        return Err(Failure::Setup(
            "serve needs --data-dir, not --endpoint".into(),
        ));
    }
    let config = ServiceConfig {
        bind: bind.to_string(),
        data_dir: data_dir(cli)?,
        swamp_threshold: cli.swamp_threshold,
    };
    let rt = tokio::runtime::Runtime::new().map_err(setup("starting runtime"))?;
    rt.block_on(async {
        let handle = modellake_server::serve(config)
            .await
            .map_err(|e| Failure::Setup(e.to_string()))?;
        writeln!(out, "listening on {}", handle.url())
            .and_then(|_| out.flush())
            .map_err(setup("writing output"))?;
        tokio::signal::ctrl_c()
            .await
            .map_err(setup("waiting for ctrl-c"))?;
        handle.shutdown().await.map_err(setup("shutting down"))
    })
}

fn canonicalize(file: &Path, out: &mut dyn io::Write) -> Result<(), Failure> {
    let input = read_input(file)?;
    let text = String::from_utf8(input).map_err(setup("input"))?;
    let mut buf = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let bad =
            |msg: String| api::ApiError::new("malformed_json", format!("line {}: {msg}", i + 1));
        let mut v: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let record_type: RecordType = v["record_type"]
            .as_str()
            .ok_or_else(|| bad("missing record_type".into()))?
            .parse()
            .map_err(bad)?;
        let record =
            Record::from_json(record_type, v["record"].take()).map_err(|e| bad(e.to_string()))?;
        let bytes = record
            .canonical_bytes()
            .map_err(|e| api::ApiError::new("validation_failed", format!("line {}: {e}", i + 1)))?;
        buf.extend_from_slice(
            record
                .record_id()
                .expect("canonical bytes succeeded")
                .as_bytes(),
        );
        buf.push(b'\t');
        buf.extend_from_slice(&bytes);
        buf.push(b'\n');
    }
    out.write_all(&buf).map_err(setup("writing output"))
}
