//! Tree serialization: the JSON merge list, Newick and Graphviz DOT.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hclust::{Dendrogram, Merge};
use crate::ingest::LabelRegistry;
use crate::VERSION;

/// On-disk tree document. `merges` is the dendrogram's merge list verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub hiertree_version: String,
    pub measure: String,
    pub linkage: String,
    pub labels: Vec<String>,
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

impl TreeFile {
    pub fn new(tree: &Dendrogram, labels: &LabelRegistry, measure: &str, linkage: &str) -> Self {
        TreeFile {
            hiertree_version: VERSION.to_owned(),
            measure: measure.to_owned(),
            linkage: linkage.to_owned(),
            labels: labels.names().to_vec(),
            n_leaves: tree.n_leaves(),
            merges: tree.merges().to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tf: TreeFile = serde_json::from_str(text)?;
        if tf.labels.len() != tf.n_leaves {
            return Err(Error::Validation(format!("tree lists {} labels for {} leaves", tf.labels.len(), tf.n_leaves)));
        }
        tf.dendrogram()?;
        LabelRegistry::from_names(tf.labels.iter().cloned())?;
        Ok(tf)
    }

    pub fn dendrogram(&self) -> Result<Dendrogram> {
        Dendrogram::new(self.n_leaves, self.merges.clone())
    }

    pub fn registry(&self) -> Result<LabelRegistry> {
        LabelRegistry::from_names(self.labels.iter().cloned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeFormat {
    Newick,
    Json,
    Dot,
}

impl FromStr for TreeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "newick" | "nwk" => Ok(TreeFormat::Newick),
            "json" => Ok(TreeFormat::Json),
            "dot" => Ok(TreeFormat::Dot),
            other => Err(Error::Validation(format!("unknown tree format '{other}'"))),
        }
    }
}

pub fn export_tree(tree: &Dendrogram, labels: &LabelRegistry, format: TreeFormat) -> String {
    match format {
        TreeFormat::Newick => to_newick(tree, labels),
        TreeFormat::Json => TreeFile::new(tree, labels, "", "").to_json(),
        TreeFormat::Dot => to_dot(tree, labels),
    }
}

fn newick_name(name: &str) -> String {
    let needs_quotes = name.chars().any(|c| c.is_whitespace() || "()[]':;,_".contains(c));
    if needs_quotes {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.to_owned()
    }
}

/// Newick with merge heights as branch lengths: a child's branch is its
/// parent's height minus its own (leaves sit at height 0).
pub fn to_newick(tree: &Dendrogram, labels: &LabelRegistry) -> String {
    enum Step {
        Open(usize),
        Sep,
        Close,
        Length(usize, usize),
    }
    let mut out = String::new();
    let mut stack = vec![Step::Open(tree.root())];
    while let Some(step) = stack.pop() {
        match step {
            Step::Open(id) => match tree.children(id) {
                Some((l, r)) => {
                    out.push('(');
                    stack.push(Step::Close);
                    stack.push(Step::Length(r, id));
                    stack.push(Step::Open(r));
                    stack.push(Step::Sep);
                    stack.push(Step::Length(l, id));
                    stack.push(Step::Open(l));
                }
                None => out.push_str(&newick_name(labels.name(id))),
            },
            Step::Sep => out.push(','),
            Step::Close => out.push(')'),
            Step::Length(child, parent) => {
                let len = tree.height_of(parent) - tree.height_of(child);
                let _ = write!(out, ":{len}");
            }
        }
    }
    out.push_str(";\n");
    out
}

pub fn to_dot(tree: &Dendrogram, labels: &LabelRegistry) -> String {
    let mut out = String::from("digraph dendrogram {\n  rankdir=TB;\n  node [shape=box];\n");
    for leaf in 0..tree.n_leaves() {
        let name = labels.name(leaf).replace('\\', "\\\\").replace('"', "\\\"");
        let _ = writeln!(out, "  n{leaf} [label=\"{name}\"];");
    }
    for (step, m) in tree.merges().iter().enumerate() {
        let id = tree.n_leaves() + step;
        let _ = writeln!(out, "  n{id} [label=\"{}\", shape=ellipse];", m.height);
        let _ = writeln!(out, "  n{id} -> n{};", m.left);
        let _ = writeln!(out, "  n{id} -> n{};", m.right);
    }
    out.push_str("}\n");
    out
}
