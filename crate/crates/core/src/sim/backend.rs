use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::profile::{SimOutput, DEFAULT_OUTPUT_BYTES};
use super::FaultScript;
use crate::constraint::{Block, CheckTime, Direction, Observation, PropertyEnvironment, PropertyName};
use crate::daw::{ClusterSpec, TaskDef};
use crate::engine::{Backend, CheckCtx, Completion, EngineConfig, Evidence, FileFacts, Launch, Mode, ProbeRun};
use crate::ids::{LabelId, NodeId, TaskId};
use crate::lang::{template_variables, Desugared};
use crate::value::Value;

/// Commands every simulated node can run.
const BUILTINS: &[&str] = &["true", "false", "echo", "cat", "sh", "test", "printf", "exit", ":"];

/// Exit code of a command the node cannot find, as reported by a shell.
const NOT_FOUND: i64 = 127;
/// Exit code of a task killed for exceeding its node's memory.
const OUT_OF_MEMORY: i64 = 137;

#[derive(Debug, Clone)]
struct SimFile {
    producer: String,
    size: u64,
    content: Option<String>,
    corrupt: bool,
}

impl SimFile {
    fn facts(&self, label: &LabelId) -> FileFacts {
        let mut h = Sha256::new();
        h.update(format!(
            "{}|{}|{}|{}|{}",
            self.producer,
            label,
            self.size,
            self.content.as_deref().unwrap_or(""),
            self.corrupt
        ));
        FileFacts {
            size_bytes: self.size,
            sha256: hex::encode(h.finalize()),
            format_ok: !self.corrupt,
            is_dir: false,
        }
    }
}

/// Backend that runs tasks on the simulation clock from their profiles.
pub(crate) struct SimBackend {
    rng: ChaCha8Rng,
    jitter: f64,
    faults: FaultScript,
    workflow_inputs: BTreeSet<LabelId>,
    /// Published data, by label.
    files: BTreeMap<LabelId, SimFile>,
    attempts: BTreeMap<(TaskId, u32), BTreeMap<LabelId, SimFile>>,
    corrupted: BTreeSet<LabelId>,
    keep: Option<PathBuf>,
    node_execs: BTreeMap<NodeId, BTreeSet<String>>,
    node_memory: BTreeMap<NodeId, u64>,
    node_files: BTreeMap<NodeId, BTreeSet<String>>,
    /// Inputs as each attempt saw them at dispatch.
    staged: BTreeMap<(TaskId, u32), BTreeMap<LabelId, SimFile>>,
}

fn attempt_dir(task: &TaskId, attempt: u32) -> String {
    format!("{task}/attempt-{attempt}")
}

impl SimBackend {
    pub(crate) fn new(wf: &Desugared, cluster: &ClusterSpec, config: &EngineConfig, faults: &FaultScript) -> Self {
        let keep = config.keep_sandbox.then(|| config.sandbox_root.clone()).flatten();
        SimBackend {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            jitter: config.runtime_jitter,
            faults: faults.clone(),
            workflow_inputs: wf.workflow_inputs.clone(),
            files: BTreeMap::new(),
            attempts: BTreeMap::new(),
            corrupted: BTreeSet::new(),
            keep,
            node_execs: cluster
                .nodes
                .iter()
                .map(|n| (n.id.clone(), n.installed_executables.clone()))
                .collect(),
            node_memory: cluster.nodes.iter().map(|n| (n.id.clone(), n.memory_bytes)).collect(),
            node_files: cluster.nodes.iter().map(|n| (n.id.clone(), n.present_files.clone())).collect(),
            staged: BTreeMap::new(),
        }
    }

    fn input_file(&self, label: &LabelId, visible: bool) -> Option<SimFile> {
        if self.workflow_inputs.contains(label) {
            return visible.then(|| SimFile {
                producer: "data".into(),
                size: DEFAULT_OUTPUT_BYTES,
                content: None,
                corrupt: self.corrupted.contains(label),
            });
        }
        self.files.get(label).cloned()
    }

    fn file(&self, ctx: &CheckCtx, dir: Direction, label: &LabelId) -> Option<SimFile> {
        match dir {
            Direction::Incoming => {
                let visible = ctx.cluster.node(ctx.node).is_some_and(|n| n.present_files.contains(label.as_str()));
                self.input_file(label, visible)
            }
            Direction::Outgoing if ctx.time == CheckTime::After => {
                self.attempts.get(&(ctx.task.id.clone(), ctx.attempt))?.get(label).cloned()
            }
            Direction::Outgoing => None,
        }
    }

    fn parse_path(path: &str) -> Option<(Direction, LabelId)> {
        if let Some(l) = path.strip_prefix("in:") {
            Some((Direction::Incoming, LabelId::new(l)))
        } else {
            path.strip_prefix("out:").map(|l| (Direction::Outgoing, LabelId::new(l)))
        }
    }

    fn write_manifest(&self, root: &std::path::Path) -> Result<(), String> {
        let mut manifest: BTreeMap<String, FileFacts> = BTreeMap::new();
        for ((task, attempt), ins) in &self.staged {
            for (l, f) in ins {
                manifest.insert(format!("{}/inputs/{l}", attempt_dir(task, *attempt)), f.facts(l));
            }
        }
        for ((task, attempt), outs) in &self.attempts {
            for (l, f) in outs {
                manifest.insert(format!("{}/outputs/{l}", attempt_dir(task, *attempt)), f.facts(l));
            }
        }
        std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
        std::fs::write(root.join("manifest.json"), text).map_err(|e| e.to_string())
    }
}

impl Evidence for SimBackend {
    fn label(&mut self, ctx: &CheckCtx, dir: Direction, label: &LabelId) -> Option<FileFacts> {
        self.file(ctx, dir, label).map(|f| f.facts(label))
    }

    fn label_path(&self, _ctx: &CheckCtx, dir: Direction, label: &LabelId) -> String {
        match dir {
            Direction::Incoming => format!("in:{label}"),
            Direction::Outgoing => format!("out:{label}"),
        }
    }

    fn executable_present(&mut self, ctx: &CheckCtx) -> Result<bool, String> {
        let Some(cmd) = &ctx.task.command else { return Ok(true) };
        let Some(exe) = cmd.split_whitespace().next() else { return Ok(true) };
        let installed = ctx.cluster.node(ctx.node).is_some_and(|n| n.installed_executables.contains(exe));
        Ok(installed || BUILTINS.contains(&exe))
    }

    fn logged_no_error(&mut self, ctx: &CheckCtx) -> Result<bool, String> {
        let stderr = ctx.task.sim_profile.as_ref().and_then(|p| p.stderr.as_deref()).unwrap_or("");
        Ok(!stderr.to_lowercase().contains("error"))
    }

    fn inputs_unchanged(&mut self, ctx: &CheckCtx) -> Result<bool, String> {
        Ok(!ctx.task.sim_profile.as_ref().is_some_and(|p| p.mutates_inputs))
    }

    fn relation(&mut self, ctx: &CheckCtx, _name: &str) -> Result<bool, String> {
        let outs = self.attempts.get(&(ctx.task.id.clone(), ctx.attempt));
        Ok(!outs.is_some_and(|o| o.values().any(|f| f.corrupt)))
    }

    fn iter(&mut self, ctx: &CheckCtx, block: Block, pattern: &str) -> Result<Vec<(String, String)>, String> {
        let pat = glob::Pattern::new(pattern).map_err(|e| format!("bad pattern `{pattern}`: {e}"))?;
        let mut candidates: Vec<(Direction, &LabelId, String)> = Vec::new();
        if pattern.contains('/') {
            // Relative to the sandbox: inputs/<label> and outputs/<label>.
            candidates.extend(ctx.task.inputs.iter().map(|l| (Direction::Incoming, l, format!("inputs/{l}"))));
            candidates.extend(ctx.task.outputs.iter().map(|l| (Direction::Outgoing, l, format!("outputs/{l}"))));
        } else {
            let (labels, dir) = match block {
                Block::Require => (&ctx.task.inputs, Direction::Incoming),
                Block::Promise => (&ctx.task.outputs, Direction::Outgoing),
            };
            candidates.extend(labels.iter().map(|l| (dir, l, l.to_string())));
        }
        Ok(candidates
            .into_iter()
            .filter(|(dir, l, path)| pat.matches(path) && self.file(ctx, *dir, l).is_some())
            .map(|(dir, l, _)| (self.label_path(ctx, dir, l), l.to_string()))
            .collect())
    }

    fn probe(
        &mut self,
        ctx: &CheckCtx,
        _block: Block,
        command: &str,
        vars: &BTreeMap<String, String>,
        detects_fault: bool,
    ) -> Result<ProbeRun, String> {
        let mut files = Vec::new();
        for v in template_variables(command) {
            let path = vars.get(&v).ok_or_else(|| format!("unbound variable `{v}` in probe"))?;
            if let Some((dir, l)) = SimBackend::parse_path(path) {
                files.push(self.file(ctx, dir, &l));
            }
        }
        let bad = files.iter().any(|f| f.as_ref().is_none_or(|f| f.corrupt));
        // A probe detects exactly the simulated faults of the files it reads.
        Ok(ProbeRun {
            success: if detects_fault { bad } else { !bad },
            output: String::new(),
        })
    }
}

impl Backend for SimBackend {
    fn mode(&self) -> Mode {
        Mode::Simulated
    }

    fn wall_now(&self) -> Option<f64> {
        None
    }

    fn wait(&mut self, _deadline: Option<f64>) -> Option<Completion> {
        None
    }

    fn prepare(&mut self, task: &TaskDef, attempt: u32, node: &NodeId) -> Result<Option<String>, String> {
        let files = self.node_files.get(node).cloned().unwrap_or_default();
        let ins = task
            .inputs
            .iter()
            .filter_map(|l| self.input_file(l, files.contains(l.as_str())).map(|f| (l.clone(), f)))
            .collect();
        self.staged.insert((task.id.clone(), attempt), ins);
        Ok(self.keep.as_ref().map(|_| attempt_dir(&task.id, attempt)))
    }

    fn launch(&mut self, task: &TaskDef, attempt: u32, node: &NodeId, now: f64) -> Launch {
        let profile = task.sim_profile.clone().unwrap_or_default();
        let factor = self.faults.straggle_factor(&task.id);
        let noise = if self.jitter > 0.0 {
            1.0 + self.jitter * self.rng.gen_range(-1.0..=1.0)
        } else {
            1.0
        };
        let runtime = (profile.nominal_runtime_s * factor * noise).max(0.0);
        let exe = task.command.as_deref().and_then(|c| c.split_whitespace().next());
        let mut exit_code = profile.exit_code;
        if let Some(e) = exe {
            let installed = self.node_execs.get(node).is_some_and(|s| s.contains(e));
            if !installed && !BUILTINS.contains(&e) {
                exit_code = NOT_FOUND;
            }
        }
        if self.node_memory.get(node).is_some_and(|m| profile.memory_use_bytes > *m) {
            exit_code = OUT_OF_MEMORY;
        }
        let mut outs = BTreeMap::new();
        if exit_code != NOT_FOUND {
            for l in &task.outputs {
                let spec = profile
                    .outputs
                    .iter()
                    .find(|o| o.path == *l)
                    .cloned()
                    .unwrap_or_else(|| SimOutput::new(l.clone()));
                if spec.missing {
                    continue;
                }
                outs.insert(
                    l.clone(),
                    SimFile {
                        producer: task.id.to_string(),
                        size: spec.effective_size(),
                        content: spec.content.clone(),
                        corrupt: spec.corrupt || self.corrupted.contains(l),
                    },
                );
            }
        }
        self.attempts.insert((task.id.clone(), attempt), outs);
        Launch::At {
            finish_at: now + runtime,
            exit_code,
            peak_memory: profile.memory_use_bytes,
        }
    }

    fn kill(&mut self, _task: &TaskId, _attempt: u32) {}

    fn collect(&mut self, task: &TaskDef, attempt: u32) -> Result<(), String> {
        if let Some(outs) = self.attempts.get(&(task.id.clone(), attempt)) {
            for (l, f) in outs {
                self.files.insert(l.clone(), f.clone());
            }
        }
        Ok(())
    }

    fn static_env(&mut self, wf: &Desugared, cluster: &ClusterSpec) -> PropertyEnvironment {
        let mut env = PropertyEnvironment::new(cluster);
        for l in &wf.workflow_inputs {
            let visible = cluster.nodes.iter().any(|n| n.present_files.contains(l.as_str()));
            let file = self.input_file(l, visible);
            env.set_data(l, PropertyName::FileExists, Value::Bool(file.is_some()));
            env.set_data(l, PropertyName::FolderExists, Value::Bool(false));
            if let Some(f) = file {
                let facts = f.facts(l);
                env.set_data(l, PropertyName::FileSizeBytes, Value::Int(facts.size_bytes as i64));
                env.set_data(l, PropertyName::Checksum, Value::Str(facts.sha256));
                env.set_data(l, PropertyName::FormatOk, Observation::new(Value::Bool(facts.format_ok)));
            }
        }
        env
    }

    fn corrupt(&mut self, label: &LabelId) {
        self.corrupted.insert(label.clone());
        if let Some(f) = self.files.get_mut(label) {
            f.corrupt = true;
        }
        for outs in self.attempts.values_mut() {
            if let Some(f) = outs.get_mut(label) {
                f.corrupt = true;
            }
        }
    }

    fn sample_memory(&mut self, _task: &TaskId, _attempt: u32) -> Option<u64> {
        None
    }

    fn log_paths(&self, _task: &TaskId, _attempt: u32) -> (Option<String>, Option<String>) {
        (None, None)
    }

    fn finish(&mut self, _final_outputs: &[LabelId]) -> Result<Option<PathBuf>, String> {
        match &self.keep {
            Some(root) => {
                self.write_manifest(root)?;
                Ok(Some(root.clone()))
            }
            None => Ok(None),
        }
    }
}
