//! Running tasks as local processes in per-attempt sandboxes.
//!
//! Layout under the sandbox root:
//!
//! ```text
//! data/<label>                       published outputs
//! <task>/attempt-<n>/inputs/<label>  staged inputs
//! <task>/attempt-<n>/outputs/<label> files the task writes
//! <task>/attempt-<n>/.contract/      probe transcripts
//! <task>/attempt-<n>/stdout.log
//! <task>/attempt-<n>/stderr.log
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::backend::{Backend, Completion, Launch};
use super::config::{EngineConfig, Mode};
use super::observe::{CheckCtx, Evidence, ProbeRun};
use super::record::FileFacts;
use crate::constraint::{Block, CheckTime, Direction, PropertyEnvironment, PropertyName};
use crate::daw::{ClusterSpec, TaskDef};
use crate::ids::{LabelId, NodeId, TaskId};
use crate::lang::{interpolate, Desugared};
use crate::value::Value;

const SHELL_BUILTINS: &[&str] = &[
    ":", ".", "true", "false", "echo", "printf", "test", "[", "exit", "cd", "export", "set", "read", "eval", "exec",
];

pub(crate) struct RealBackend {
    root: PathBuf,
    /// Deletes the root on drop unless the sandbox is kept.
    _temp: Option<tempfile::TempDir>,
    keep: bool,
    data_dir: PathBuf,
    output_dir: Option<PathBuf>,
    relations: BTreeMap<String, String>,
    started: Instant,
    tx: Sender<Completion>,
    rx: Receiver<Completion>,
    pids: BTreeMap<(TaskId, u32), u32>,
    /// Hashes of staged inputs, for `inputs_unchanged`.
    staged: BTreeMap<(TaskId, u32), BTreeMap<LabelId, String>>,
    facts: BTreeMap<(TaskId, u32, Direction, LabelId, CheckTime), Option<FileFacts>>,
    probes: usize,
}

fn attempt_rel(task: &TaskId, attempt: u32) -> String {
    format!("{task}/attempt-{attempt}")
}

/// Size and sha256 of a file, or of a directory tree in path order.
pub(crate) fn file_facts(path: &Path) -> Option<FileFacts> {
    let meta = fs::metadata(path).ok()?;
    if meta.is_dir() {
        let mut h = Sha256::new();
        let mut size = 0;
        for e in walkdir::WalkDir::new(path).sort_by_file_name().into_iter().flatten() {
            if e.file_type().is_file() {
                let rel = e.path().strip_prefix(path).ok()?;
                let bytes = fs::read(e.path()).ok()?;
                size += bytes.len() as u64;
                h.update(rel.to_string_lossy().as_bytes());
                h.update(&bytes);
            }
        }
        return Some(FileFacts {
            size_bytes: size,
            sha256: hex::encode(h.finalize()),
            format_ok: true,
            is_dir: true,
        });
    }
    let mut f = fs::File::open(path).ok()?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).ok()?;
    Some(FileFacts {
        size_bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
        format_ok: std::str::from_utf8(&bytes).is_ok(),
        is_dir: false,
    })
}

/// Hard-links `src` to `dst`, copying when linking is impossible.
fn link_or_copy(src: &Path, dst: &Path) -> std::io::Result<()> {
    if let Some(p) = dst.parent() {
        fs::create_dir_all(p)?;
    }
    if src.is_dir() {
        for e in walkdir::WalkDir::new(src) {
            let e = e.map_err(std::io::Error::other)?;
            let rel = e.path().strip_prefix(src).map_err(std::io::Error::other)?;
            let target = dst.join(rel);
            if e.file_type().is_dir() {
                fs::create_dir_all(&target)?;
            } else {
                link_or_copy(e.path(), &target)?;
            }
        }
        return Ok(());
    }
    if fs::hard_link(src, dst).is_err() {
        fs::copy(src, dst)?;
    }
    Ok(())
}

fn executable_on_path(name: &str) -> bool {
    if name.contains('/') {
        return Path::new(name).is_file();
    }
    if SHELL_BUILTINS.contains(&name) {
        return true;
    }
    std::env::var_os("PATH")
        .map(|p| std::env::split_paths(&p).any(|d| d.join(name).is_file()))
        .unwrap_or(false)
}

impl RealBackend {
    pub(crate) fn new(_wf: &Desugared, config: &EngineConfig, workflow_dir: &Path) -> Result<Self, String> {
        let (root, temp) = match &config.sandbox_root {
            Some(r) => {
                fs::create_dir_all(r).map_err(|e| format!("cannot create `{}`: {e}", r.display()))?;
                let r = r.canonicalize().map_err(|e| e.to_string())?;
                (r, None)
            }
            None => {
                let t = tempfile::Builder::new().prefix("vcflow-").tempdir().map_err(|e| e.to_string())?;
                (t.path().to_path_buf(), Some(t))
            }
        };
        fs::create_dir_all(root.join("data")).map_err(|e| e.to_string())?;
        let data_dir = config.data_dir.clone().unwrap_or_else(|| workflow_dir.to_path_buf());
        let data_dir = data_dir.canonicalize().unwrap_or(data_dir);
        let (tx, rx) = channel();
        Ok(RealBackend {
            root,
            _temp: temp,
            keep: config.keep_sandbox,
            data_dir,
            output_dir: config.output_dir.clone(),
            relations: config.relations.clone(),
            started: Instant::now(),
            tx,
            rx,
            pids: BTreeMap::new(),
            staged: BTreeMap::new(),
            facts: BTreeMap::new(),
            probes: 0,
        })
    }

    fn attempt_dir(&self, task: &TaskId, attempt: u32) -> PathBuf {
        self.root.join(attempt_rel(task, attempt))
    }

    fn path_of(&self, ctx: &CheckCtx, dir: Direction, label: &LabelId) -> PathBuf {
        let sub = match dir {
            Direction::Incoming => "inputs",
            Direction::Outgoing => "outputs",
        };
        self.attempt_dir(&ctx.task.id, ctx.attempt).join(sub).join(label.as_str())
    }

    /// Where a label's data comes from before staging.
    fn source_of(&self, label: &LabelId) -> PathBuf {
        let produced = self.root.join("data").join(label.as_str());
        if produced.exists() {
            produced
        } else {
            self.data_dir.join(label.as_str())
        }
    }

    /// Runs `command` in the attempt directory; records a transcript.
    fn run_probe(&mut self, ctx: &CheckCtx, command: &str) -> Result<ProbeRun, String> {
        let dir = self.attempt_dir(&ctx.task.id, ctx.attempt);
        let out = Command::new("sh")
            .arg("-c")
            .arg(command)
            .current_dir(&dir)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| format!("cannot run probe `{command}`: {e}"))?;
        let mut output = String::from_utf8_lossy(&out.stdout).into_owned();
        output.push_str(&String::from_utf8_lossy(&out.stderr));
        self.probes += 1;
        let transcript = format!(
            "$ {command}\n{output}[exit {}]\n",
            out.status.code().map(|c| c.to_string()).unwrap_or_else(|| "signal".into())
        );
        let contract = dir.join(".contract");
        let _ = fs::create_dir_all(&contract);
        let _ = fs::write(contract.join(format!("probe-{:03}.txt", self.probes)), transcript);
        Ok(ProbeRun {
            success: out.status.success(),
            output,
        })
    }
}

impl Evidence for RealBackend {
    fn label(&mut self, ctx: &CheckCtx, dir: Direction, label: &LabelId) -> Option<FileFacts> {
        let key = (ctx.task.id.clone(), ctx.attempt, dir, label.clone(), ctx.time);
        if let Some(f) = self.facts.get(&key) {
            return f.clone();
        }
        let f = file_facts(&self.path_of(ctx, dir, label));
        // During-checks see files that are still being written.
        if ctx.time != CheckTime::During {
            self.facts.insert(key, f.clone());
        }
        f
    }

    fn label_path(&self, ctx: &CheckCtx, dir: Direction, label: &LabelId) -> String {
        self.path_of(ctx, dir, label).to_string_lossy().into_owned()
    }

    fn executable_present(&mut self, ctx: &CheckCtx) -> Result<bool, String> {
        let Some(cmd) = &ctx.task.command else { return Ok(true) };
        let Some(exe) = cmd.split_whitespace().next() else { return Ok(true) };
        Ok(executable_on_path(exe))
    }

    fn logged_no_error(&mut self, ctx: &CheckCtx) -> Result<bool, String> {
        let p = self.attempt_dir(&ctx.task.id, ctx.attempt).join("stderr.log");
        let text = fs::read(&p).map_err(|e| format!("cannot read `{}`: {e}", p.display()))?;
        Ok(!String::from_utf8_lossy(&text).to_lowercase().contains("error"))
    }

    fn inputs_unchanged(&mut self, ctx: &CheckCtx) -> Result<bool, String> {
        let staged = self.staged.get(&(ctx.task.id.clone(), ctx.attempt)).cloned().unwrap_or_default();
        for (l, hash) in staged {
            match file_facts(&self.path_of(ctx, Direction::Incoming, &l)) {
                Some(f) if f.sha256 == hash => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    fn relation(&mut self, ctx: &CheckCtx, name: &str) -> Result<bool, String> {
        let template = self
            .relations
            .get(name)
            .cloned()
            .ok_or_else(|| format!("no command configured for relation `{name}`"))?;
        let mut vars = BTreeMap::new();
        for l in &ctx.task.inputs {
            vars.insert(l.to_string(), self.label_path(ctx, Direction::Incoming, l));
        }
        for l in &ctx.task.outputs {
            vars.insert(l.to_string(), self.label_path(ctx, Direction::Outgoing, l));
        }
        let command = interpolate(&template, &vars)?;
        Ok(self.run_probe(ctx, &command)?.success)
    }

    fn iter(&mut self, ctx: &CheckCtx, block: Block, pattern: &str) -> Result<Vec<(String, String)>, String> {
        let base = self.attempt_dir(&ctx.task.id, ctx.attempt);
        let base = if pattern.contains('/') {
            base
        } else {
            base.join(match block {
                Block::Require => "inputs",
                Block::Promise => "outputs",
            })
        };
        let full = format!("{}/{}", glob::Pattern::escape(&base.to_string_lossy()), pattern);
        let paths = glob::glob(&full).map_err(|e| format!("bad pattern `{pattern}`: {e}"))?;
        Ok(paths
            .flatten()
            .map(|p| {
                let name = p.strip_prefix(&base).unwrap_or(&p).to_string_lossy().into_owned();
                (p.to_string_lossy().into_owned(), name)
            })
            .collect())
    }

    fn probe(
        &mut self,
        ctx: &CheckCtx,
        _block: Block,
        command: &str,
        vars: &BTreeMap<String, String>,
        _detects_fault: bool,
    ) -> Result<ProbeRun, String> {
        let command = interpolate(command, vars)?;
        self.run_probe(ctx, &command)
    }
}

impl Backend for RealBackend {
    fn mode(&self) -> Mode {
        Mode::Real
    }

    fn wall_now(&self) -> Option<f64> {
        Some(self.started.elapsed().as_secs_f64())
    }

    fn wait(&mut self, deadline: Option<f64>) -> Option<Completion> {
        match deadline {
            None => self.rx.recv().ok(),
            Some(d) => {
                let left = (d - self.started.elapsed().as_secs_f64()).max(0.0);
                match self.rx.recv_timeout(Duration::from_secs_f64(left)) {
                    Ok(c) => Some(c),
                    Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => None,
                }
            }
        }
        .inspect(|c| {
            self.pids.remove(&(c.task.clone(), c.attempt));
        })
    }

    fn prepare(&mut self, task: &TaskDef, attempt: u32, _node: &NodeId) -> Result<Option<String>, String> {
        let rel = attempt_rel(&task.id, attempt);
        let dir = self.root.join(&rel);
        for sub in ["inputs", "outputs", ".contract"] {
            fs::create_dir_all(dir.join(sub)).map_err(|e| format!("cannot create sandbox `{}`: {e}", dir.display()))?;
        }
        let mut hashes = BTreeMap::new();
        for l in &task.inputs {
            let src = self.source_of(l);
            if !src.exists() {
                continue;
            }
            let dst = dir.join("inputs").join(l.as_str());
            link_or_copy(&src, &dst).map_err(|e| format!("cannot stage `{l}`: {e}"))?;
            if let Some(f) = file_facts(&dst) {
                hashes.insert(l.clone(), f.sha256);
            }
        }
        self.staged.insert((task.id.clone(), attempt), hashes);
        Ok(Some(rel))
    }

    fn launch(&mut self, task: &TaskDef, attempt: u32, node: &NodeId, now: f64) -> Launch {
        let Some(cmd) = &task.command else {
            return Launch::At {
                finish_at: now,
                exit_code: 0,
                peak_memory: 0,
            };
        };
        let dir = self.attempt_dir(&task.id, attempt);
        let (out, err) = match (fs::File::create(dir.join("stdout.log")), fs::File::create(dir.join("stderr.log"))) {
            (Ok(o), Ok(e)) => (o, e),
            (Err(e), _) | (_, Err(e)) => return Launch::Failed(format!("cannot create logs: {e}")),
        };
        let mut c = Command::new("sh");
        c.arg("-c")
            .arg(cmd)
            .current_dir(&dir)
            .stdin(Stdio::null())
            .stdout(out)
            .stderr(err)
            .env("VCFLOW_TASK", task.id.as_str())
            .env("VCFLOW_ATTEMPT", attempt.to_string())
            .env("VCFLOW_NODE", node.as_str())
            .env("VCFLOW_INPUTS", dir.join("inputs"))
            .env("VCFLOW_OUTPUTS", dir.join("outputs"))
            .process_group(0);
        for (k, v) in &task.params {
            let text = match v {
                Value::Str(s) => s.clone(),
                other => other.to_string(),
            };
            c.env(format!("VCFLOW_PARAM_{}", k.to_uppercase()), text);
        }
        let child = match c.spawn() {
            Ok(ch) => ch,
            Err(e) => return Launch::Failed(format!("cannot start `{cmd}`: {e}")),
        };
        let pid = child.id();
        self.pids.insert((task.id.clone(), attempt), pid);
        let tx = self.tx.clone();
        let id = task.id.clone();
        std::thread::spawn(move || {
            // wait4 also reports the peak resident set of the reaped tree.
            let mut status = 0;
            let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
            let r = unsafe { libc::wait4(pid as libc::pid_t, &mut status, 0, &mut usage) };
            let (exit_code, peak) = if r < 0 {
                (None, None)
            } else {
                let code = libc::WIFEXITED(status).then(|| libc::WEXITSTATUS(status) as i64);
                (code, Some(usage.ru_maxrss.max(0) as u64 * 1024))
            };
            drop(child);
            let _ = tx.send(Completion {
                task: id,
                attempt,
                exit_code,
                peak_memory: peak,
            });
        });
        Launch::Spawned
    }

    fn kill(&mut self, task: &TaskId, attempt: u32) {
        if let Some(pid) = self.pids.remove(&(task.clone(), attempt)) {
            // The task runs in its own process group.
            unsafe {
                libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
            }
        }
    }

    fn collect(&mut self, task: &TaskDef, attempt: u32) -> Result<(), String> {
        self.pids.remove(&(task.id.clone(), attempt));
        let dir = self.attempt_dir(&task.id, attempt).join("outputs");
        for l in &task.outputs {
            let src = dir.join(l.as_str());
            if !src.exists() {
                continue;
            }
            let dst = self.root.join("data").join(l.as_str());
            if dst.is_dir() {
                fs::remove_dir_all(&dst).map_err(|e| e.to_string())?;
            } else if dst.exists() {
                fs::remove_file(&dst).map_err(|e| e.to_string())?;
            }
            link_or_copy(&src, &dst).map_err(|e| format!("cannot publish `{l}`: {e}"))?;
        }
        Ok(())
    }

    fn static_env(&mut self, wf: &Desugared, cluster: &ClusterSpec) -> PropertyEnvironment {
        let mut env = PropertyEnvironment::new(cluster);
        for l in &wf.workflow_inputs {
            let facts = file_facts(&self.data_dir.join(l.as_str()));
            env.set_data(l, PropertyName::FileExists, Value::Bool(facts.is_some()));
            env.set_data(l, PropertyName::FolderExists, Value::Bool(facts.as_ref().is_some_and(|f| f.is_dir)));
            if let Some(f) = facts {
                env.set_data(l, PropertyName::FileSizeBytes, Value::Int(f.size_bytes as i64));
                env.set_data(l, PropertyName::Checksum, Value::Str(f.sha256));
                env.set_data(l, PropertyName::FormatOk, Value::Bool(f.format_ok));
            }
        }
        env
    }

    fn corrupt(&mut self, label: &LabelId) {
        let p = self.root.join("data").join(label.as_str());
        if p.is_file() {
            let _ = fs::write(&p, b"\xff\xfe corrupted\n");
        }
    }

    fn sample_memory(&mut self, task: &TaskId, attempt: u32) -> Option<u64> {
        let pid = self.pids.get(&(task.clone(), attempt))?;
        let status = fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
        let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
        let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
        Some(kb * 1024)
    }

    fn log_paths(&self, task: &TaskId, attempt: u32) -> (Option<String>, Option<String>) {
        let rel = attempt_rel(task, attempt);
        (Some(format!("{rel}/stdout.log")), Some(format!("{rel}/stderr.log")))
    }

    fn finish(&mut self, final_outputs: &[LabelId]) -> Result<Option<PathBuf>, String> {
        let leftover: Vec<(TaskId, u32)> = self.pids.keys().cloned().collect();
        for (t, a) in leftover {
            self.kill(&t, a);
        }
        if let Some(out) = &self.output_dir {
            fs::create_dir_all(out).map_err(|e| e.to_string())?;
            for l in final_outputs {
                let src = self.root.join("data").join(l.as_str());
                if src.exists() {
                    link_or_copy(&src, &out.join(l.as_str())).map_err(|e| format!("cannot copy `{l}` out: {e}"))?;
                }
            }
        }
        if self.keep {
            if let Some(t) = self._temp.take() {
                return Ok(Some(t.keep()));
            }
            return Ok(Some(self.root.clone()));
        }
        Ok(None)
    }
}
