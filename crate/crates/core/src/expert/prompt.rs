use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// System and user templates for the three prompt kinds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplates {
    pub edge_system: String,
    pub edge_user: String,
    pub confounder_system: String,
    pub confounder_user: String,
    pub prior_system: String,
    pub prior_user: String,
}

const FILES: [&str; 6] = [
    "edge_system.txt",
    "edge_user.txt",
    "confounder_system.txt",
    "confounder_user.txt",
    "prior_system.txt",
    "prior_user.txt",
];

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            edge_system: include_str!("../../templates/edge_system.txt").to_string(),
            edge_user: include_str!("../../templates/edge_user.txt").to_string(),
            confounder_system: include_str!("../../templates/confounder_system.txt").to_string(),
            confounder_user: include_str!("../../templates/confounder_user.txt").to_string(),
            prior_system: include_str!("../../templates/prior_system.txt").to_string(),
            prior_user: include_str!("../../templates/prior_user.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Load from a directory holding the six template files; missing files
    /// keep the built-in text.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut t = PromptTemplates::default();
        for (name, slot) in FILES.iter().zip([
            &mut t.edge_system,
            &mut t.edge_user,
            &mut t.confounder_system,
            &mut t.confounder_user,
            &mut t.prior_system,
            &mut t.prior_user,
        ]) {
            let p = dir.join(name);
            if p.exists() {
                *slot = std::fs::read_to_string(&p).map_err(|e| Error::io(p.display().to_string(), e))?;
            }
        }
        Ok(t)
    }
}

/// Substitute `{name}` slots. `{{` and `}}` become literal braces; braces
/// around anything that is not a known slot name are kept as written.
pub fn render(template: &str, slots: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(c) = rest.chars().next() {
        if rest.starts_with("{{") {
            out.push('{');
            rest = &rest[2..];
        } else if rest.starts_with("}}") {
            out.push('}');
            rest = &rest[2..];
        } else if c == '{' {
            let close = rest[1..].find('}').map(|k| k + 1);
            let name = close.map(|k| &rest[1..k]);
            match name.and_then(|n| slots.get(n).map(|v| (n, v))) {
                Some((n, v)) if n.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') => {
                    out.push_str(v);
                    rest = &rest[n.len() + 2..];
                }
                _ => {
                    out.push('{');
                    rest = &rest[1..];
                }
            }
        } else {
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    out
}
