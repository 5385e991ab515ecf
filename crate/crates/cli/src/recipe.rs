//! JSON experiment recipes.
//!
//! A recipe is an ordered list of CLI invocations sharing one output
//! directory. Each step gets `--seed` derived from the master seed and its
//! `(command, id)` pair unless it passes one explicitly, and `{out}` in its
//! arguments expands to the output directory. After every step the runner
//! hashes the files that appeared or changed and rewrites the manifest, so a
//! failing run leaves a manifest truncated at the failing step.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use ris_sense::checksum::file_sha256;
use ris_sense::{labels, rng};

use crate::{execute, write_file, Cli, CliError, CliResult};

pub const MANIFEST_NAME: &str = "recipe-manifest.json";

const COMMANDS: [&str; 10] = [
    "geometry", "codebook", "pattern", "sequence", "coherence", "dataset", "train", "evaluate", "plot", "report",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    #[serde(default)]
    pub name: Option<String>,
    pub master_seed: u64,
    /// Relative paths resolve against the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub steps: Vec<RecipeStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeStep {
    pub id: String,
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub id: String,
    pub command: String,
    /// Arguments before `{out}` expansion.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeManifest {
    pub name: Option<String>,
    pub master_seed: u64,
    pub completed: bool,
    pub steps: Vec<StepRecord>,
}

impl Recipe {
    pub fn validate(&self) -> CliResult {
        let mut ids = HashSet::new();
        for (n, s) in self.steps.iter().enumerate() {
            if !COMMANDS.contains(&s.command.as_str()) {
                return Err(CliError::usage(format!("step {n} ({}): unknown command {:?}", s.id, s.command)));
            }
            if s.id.is_empty() || !ids.insert(s.id.as_str()) {
                return Err(CliError::usage(format!("step {n}: step ids must be non-empty and unique")));
            }
        }
        Ok(())
    }
}

fn snapshot(root: &Path) -> CliResult<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> CliResult {
        let entries = fs::read_dir(dir).map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths {
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let rel = p.strip_prefix(root).expect("walk stays under root");
                let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                if key != MANIFEST_NAME {
                    out.insert(key, file_sha256(&p)?);
                }
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

fn save(manifest: &RecipeManifest, out: &Path) -> CliResult {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::data(e.to_string()))? + "\n";
    write_file(&out.join(MANIFEST_NAME), text)
}

/// Runs every step in order and returns the manifest. `seed` overrides the
/// recipe's master seed; `out` overrides its output directory.
pub fn run_recipe(file: &Path, out: Option<&Path>, seed: Option<u64>) -> CliResult<RecipeManifest> {
    let text = fs::read(file).map_err(|e| CliError::data(format!("cannot read {}: {e}", file.display())))?;
    let recipe: Recipe =
        serde_json::from_slice(&text).map_err(|e| CliError::usage(format!("{}: {e}", file.display())))?;
    recipe.validate()?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| recipe.output_dir.clone())
        .ok_or_else(|| CliError::usage("recipe has no output_dir and --out was not given"))?;
    fs::create_dir_all(&out).map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
    let master = seed.unwrap_or(recipe.master_seed);
    let mut manifest = RecipeManifest {
        name: recipe.name.clone(),
        master_seed: master,
        completed: false,
        steps: Vec::new(),
    };
    let out_str = out.to_string_lossy().into_owned();
    let mut before = snapshot(&out)?;
    for (index, step) in recipe.steps.iter().enumerate() {
        let explicit = step.args.iter().any(|a| a == "--seed" || a.starts_with("--seed="));
        let step_seed = (!explicit).then(|| rng::derive_seed(master, labels![step.command.as_str(), step.id.as_str()]));
        let mut argv = vec!["ris-sense".to_string(), step.command.clone()];
        argv.extend(step.args.iter().map(|a| a.replace("{out}", &out_str)));
        if let Some(s) = step_seed {
            argv.push("--seed".into());
            argv.push(s.to_string());
        }
        log::info!("recipe step {index} ({}): {}", step.id, argv[1..].join(" "));
        let result = Cli::try_parse_from(&argv)
            .map_err(|e| CliError::usage(e.render().to_string().trim_end().to_string()))
            .and_then(execute);
        let after = snapshot(&out)?;
        let outputs = after
            .iter()
            .filter(|(k, v)| before.get(*k) != Some(*v))
            .map(|(k, v)| Artifact {
                path: k.clone(),
                sha256: v.clone(),
            })
            .collect();
        before = after;
        manifest.steps.push(StepRecord {
            index,
            id: step.id.clone(),
            command: step.command.clone(),
            args: step.args.clone(),
            seed: step_seed,
            ok: result.is_ok(),
            error: result.as_ref().err().map(ToString::to_string),
            outputs,
        });
        save(&manifest, &out)?;
        if let Err(e) = result {
            return Err(CliError {
                code: e.code,
                message: format!("step {index} ({}) failed: {}", step.id, e.message),
            });
        }
    }
    manifest.completed = true;
    save(&manifest, &out)?;
    Ok(manifest)
}
