//! Service state kept in a workspace directory.
//!
//! ```text
//! <dir>/.lock              held while a service owns the workspace
//! <dir>/graphs/v0001.dag   one file per graph version, never rewritten
//! <dir>/data.schema        schema of the dataset
//! <dir>/data.csv           the dataset, written once
//! <dir>/reports/<id>.json  computed reports
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use causeway_core::graph::{CausalDag, GraphError};
use causeway_core::DataTable;
use serde::{Deserialize, Serialize};

use crate::dagfile::{self, FormatError};
use crate::report::{graph_id, Report};
use crate::table::{self, LoadOptions, TableError};

/// Environment variable naming the workspace directory.
pub const WORKSPACE_ENV: &str = "CAUSEWAY_WORKSPACE";

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("workspace {0} is locked by another process (remove .lock if it is stale)")]
    Locked(PathBuf),
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: TableError },
    #[error("workspace has no graph; start it with a graph file")]
    NoGraph,
    #[error("workspace has no dataset; start it with a data file")]
    NoData,
    #[error("graph version {0} does not exist")]
    UnknownVersion(u64),
    #[error("edit is based on version {base} but the active version is {active}")]
    StaleBase { base: u64, active: u64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("the new graph does not declare the dataset's variables: {0}")]
    SchemaChange(String),
    #[error("unknown report `{0}`")]
    UnknownReport(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A graph edit request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum GraphEdit {
    AddEdge { src: String, dst: String },
    RemoveEdge { src: String, dst: String },
}

impl GraphEdit {
    pub fn apply(&self, g: &CausalDag) -> Result<CausalDag, GraphError> {
        match self {
            GraphEdit::AddEdge { src, dst } => g.with_edge(src, dst),
            GraphEdit::RemoveEdge { src, dst } => g.without_edge(src, dst),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            GraphEdit::AddEdge { src, dst } => format!("add {src} -> {dst}"),
            GraphEdit::RemoveEdge { src, dst } => format!("remove {src} -> {dst}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphVersion {
    /// Numbered from 1.
    pub version: u64,
    pub graph: Arc<CausalDag>,
    pub id: String,
    pub note: String,
}

/// Removes the lock file when dropped.
#[derive(Debug)]
struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Lock, WorkspaceError> {
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Lock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(WorkspaceError::Locked(dir.to_path_buf())),
            Err(e) => Err(io(&path)(e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug)]
pub struct Workspace {
    dir: PathBuf,
    _lock: Lock,
    history: Vec<GraphVersion>,
    data: Option<Arc<DataTable>>,
    reports: BTreeMap<String, Arc<Report>>,
    /// (graph version, operation, parameters) -> report id
    cache: BTreeMap<(u64, String, String), String>,
}

const NOTE_PREFIX: &str = "# note: ";

impl Workspace {
    /// Opens (creating if needed) and locks a workspace. An initial graph
    /// starts a new history unless it equals the latest stored version. A
    /// dataset is stored on first use; later runs must not replace it.
    pub fn open(dir: &Path, graph: Option<CausalDag>, data: Option<DataTable>) -> Result<Workspace, WorkspaceError> {
        fs::create_dir_all(dir.join("graphs")).map_err(io(dir))?;
        fs::create_dir_all(dir.join("reports")).map_err(io(dir))?;
        let lock = Lock::acquire(dir)?;
        let mut ws = Workspace {
            dir: dir.to_path_buf(),
            _lock: lock,
            history: Vec::new(),
            data: None,
            reports: BTreeMap::new(),
            cache: BTreeMap::new(),
        };
        ws.load_history()?;
        ws.load_data(data)?;
        if let Some(g) = graph {
            if ws.history.last().is_none_or(|v| *v.graph != g) {
                ws.commit(g, "loaded from file".into())?;
            }
        }
        if ws.history.is_empty() {
            return Err(WorkspaceError::NoGraph);
        }
        Ok(ws)
    }

    fn load_history(&mut self) -> Result<(), WorkspaceError> {
        let graphs = self.dir.join("graphs");
        let mut files: Vec<(u64, PathBuf)> = fs::read_dir(&graphs)
            .map_err(io(&graphs))?
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let v = name.strip_prefix('v')?.strip_suffix(".dag")?.parse().ok()?;
                Some((v, e.path()))
            })
            .collect();
        files.sort();
        for (k, (v, path)) in files.into_iter().enumerate() {
            if v != k as u64 + 1 {
                break;
            }
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            let g = dagfile::parse_dag(&text).map_err(|source| WorkspaceError::Format {
                path: path.clone(),
                source,
            })?;
            let note = text
                .lines()
                .find_map(|l| l.strip_prefix(NOTE_PREFIX))
                .unwrap_or_default()
                .to_string();
            self.history.push(GraphVersion {
                version: v,
                id: graph_id(&g),
                graph: Arc::new(g),
                note,
            });
        }
        Ok(())
    }

    fn load_data(&mut self, data: Option<DataTable>) -> Result<(), WorkspaceError> {
        let (schema_path, data_path) = (self.dir.join("data.schema"), self.dir.join("data.csv"));
        if data_path.exists() {
            let text = fs::read_to_string(&schema_path).map_err(io(&schema_path))?;
            let schema = dagfile::parse_schema(&text).map_err(|source| WorkspaceError::Format {
                path: schema_path.clone(),
                source,
            })?;
            let file = fs::File::open(&data_path).map_err(io(&data_path))?;
            let stored = table::load_table(file, &schema, &LoadOptions::default())
                .map_err(|source| WorkspaceError::Table {
                    path: data_path.clone(),
                    source,
                })?
                .table;
            if let Some(new) = &data {
                if *new != stored {
                    return Err(WorkspaceError::Io {
                        path: data_path,
                        source: std::io::Error::other("the workspace already holds a different dataset"),
                    });
                }
            }
            self.data = Some(Arc::new(stored));
        } else if let Some(t) = data {
            fs::write(&schema_path, dagfile::render_schema(t.schema())).map_err(io(&schema_path))?;
            let tmp = self.dir.join("data.csv.tmp");
            fs::write(&tmp, table::table_to_string(&t)).map_err(io(&tmp))?;
            fs::rename(&tmp, &data_path).map_err(io(&data_path))?;
            self.data = Some(Arc::new(t));
        }
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn active(&self) -> &GraphVersion {
        self.history.last().expect("history is never empty once opened")
    }

    pub fn version(&self, v: u64) -> Result<&GraphVersion, WorkspaceError> {
        v.checked_sub(1)
            .and_then(|i| self.history.get(i as usize))
            .ok_or(WorkspaceError::UnknownVersion(v))
    }

    /// The requested version, or the active one.
    pub fn resolve(&self, v: Option<u64>) -> Result<&GraphVersion, WorkspaceError> {
        v.map_or_else(|| Ok(self.active()), |v| self.version(v))
    }

    pub fn history(&self) -> &[GraphVersion] {
        &self.history
    }

    /// Latest version whose graph has this id.
    pub fn version_of(&self, graph_id: &str) -> Option<u64> {
        self.history.iter().rev().find(|v| v.id == graph_id).map(|v| v.version)
    }

    pub fn data(&self) -> Result<Arc<DataTable>, WorkspaceError> {
        self.data.clone().ok_or(WorkspaceError::NoData)
    }

    fn check_against_data(&self, g: &CausalDag) -> Result<(), WorkspaceError> {
        if let Some(t) = &self.data {
            for v in g.variables() {
                if t.schema().variable(v.name()) != Some(v) {
                    return Err(WorkspaceError::SchemaChange(format!(
                        "`{}` is missing from the data or has different levels",
                        v.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Appends a new version; earlier versions are never modified.
    pub fn commit(&mut self, g: CausalDag, note: String) -> Result<&GraphVersion, WorkspaceError> {
        self.check_against_data(&g)?;
        let version = self.history.len() as u64 + 1;
        let path = self.dir.join("graphs").join(format!("v{version:04}.dag"));
        let note = note.replace('\n', " ");
        let text = format!("{NOTE_PREFIX}{note}\n{}", dagfile::render_dag(&g));
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, text).map_err(io(&tmp))?;
        fs::rename(&tmp, &path).map_err(io(&path))?;
        self.history.push(GraphVersion {
            version,
            id: graph_id(&g),
            graph: Arc::new(g),
            note,
        });
        Ok(self.active())
    }

    /// Applies edits atomically on top of the active version. With `base`,
    /// the edit is refused unless `base` is still the active version.
    pub fn apply_edits(&mut self, base: Option<u64>, edits: &[GraphEdit]) -> Result<&GraphVersion, WorkspaceError> {
        let active = self.active().version;
        if let Some(base) = base {
            if base != active {
                return Err(WorkspaceError::StaleBase { base, active });
            }
        }
        let mut g = (*self.active().graph).clone();
        for e in edits {
            g = e.apply(&g)?;
        }
        let note = edits.iter().map(GraphEdit::describe).collect::<Vec<_>>().join("; ");
        self.commit(g, note)
    }

    pub fn cached(&self, version: u64, op: &str, params: &str) -> Option<Arc<Report>> {
        let id = self.cache.get(&(version, op.to_string(), params.to_string()))?;
        self.reports.get(id).cloned()
    }

    /// Stores a report computed on `version` and returns its id.
    pub fn store(
        &mut self,
        version: u64,
        op: &str,
        params: &str,
        report: Report,
    ) -> Result<(String, Arc<Report>), WorkspaceError> {
        let id = report.id();
        let path = self.dir.join("reports").join(format!("{id}.json"));
        if !path.exists() {
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, report.to_json()).map_err(io(&tmp))?;
            fs::rename(&tmp, &path).map_err(io(&path))?;
        }
        let report = Arc::new(report);
        self.reports.insert(id.clone(), report.clone());
        self.cache
            .insert((version, op.to_string(), params.to_string()), id.clone());
        Ok((id, report))
    }

    /// A stored report, from memory or from an earlier run's files.
    pub fn report(&self, id: &str) -> Result<Arc<Report>, WorkspaceError> {
        if let Some(r) = self.reports.get(id) {
            return Ok(r.clone());
        }
        if !id.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(WorkspaceError::UnknownReport(id.into()));
        }
        let path = self.dir.join("reports").join(format!("{id}.json"));
        let text = fs::read_to_string(&path).map_err(|_| WorkspaceError::UnknownReport(id.into()))?;
        serde_json::from_str(&text)
            .map(Arc::new)
            .map_err(|_| WorkspaceError::UnknownReport(id.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use causeway_core::synth::scenarios;

    #[test]
    fn history_is_append_only_and_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let m = scenarios::confounded_triangle();
        let data = m.sample(50, 1).unwrap();
        {
            let mut ws = Workspace::open(dir.path(), Some(m.graph().clone()), Some(data.clone())).unwrap();
            assert_eq!(ws.active().version, 1);
            let edit = GraphEdit::RemoveEdge {
                src: "Z".into(),
                dst: "X".into(),
            };
            let v2 = ws.apply_edits(Some(1), std::slice::from_ref(&edit)).unwrap().version;
            assert_eq!(v2, 2);
            assert!(matches!(
                ws.apply_edits(Some(1), &[edit]),
                Err(WorkspaceError::StaleBase { .. })
            ));
            let cyc = GraphEdit::AddEdge {
                src: "Y".into(),
                dst: "Z".into(),
            };
            assert!(matches!(
                ws.apply_edits(None, &[cyc]),
                Err(WorkspaceError::Graph(GraphError::CycleDetected { .. }))
            ));
            assert_eq!(ws.history().len(), 2);
            assert_eq!(*ws.version(1).unwrap().graph, *m.graph());
            assert!(matches!(
                Workspace::open(dir.path(), None, None),
                Err(WorkspaceError::Locked(_))
            ));
        }
        let ws = Workspace::open(dir.path(), None, None).unwrap();
        assert_eq!(ws.history().len(), 2);
        assert_eq!(ws.active().note, "remove Z -> X");
        assert_eq!(*ws.data().unwrap(), data);
        drop(ws);
        let other = m.sample(50, 2).unwrap();
        assert!(Workspace::open(dir.path(), None, Some(other)).is_err());
    }
}
