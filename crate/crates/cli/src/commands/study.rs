use crate::output::{Output, Table};
use crate::presets::{find, PRESETS};
use crate::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Preset name (see --list).
    #[arg(long, required_unless_present = "list")]
    pub preset: Option<String>,
    /// List the available presets.
    #[arg(long)]
    pub list: bool,
}

pub fn run(a: &Args, seed: u64) -> CliResult<Output> {
    if a.list {
        let mut t = Table::new(&["preset", "description"]);
        for p in PRESETS {
            t.push(vec![p.name.into(), p.about.into()]);
        }
        return Ok(Output::new(serde_json::json!({ "presets": PRESETS.len() })).with_table(t));
    }
    let name = a.preset.as_deref().unwrap_or_default();
    let preset = find(name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::usage(format!("unknown preset `{name}`; available: {}", names.join(", ")))
    })?;
    preset.run(seed)
}
