use std::collections::BTreeSet;
use std::path::PathBuf;

use liouville::config::RunConfig;

fn root() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", ".."].iter().collect()
}

#[test]
fn schema_lists_every_field() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("docs/config.schema.json")).unwrap()).unwrap();
    let in_schema: BTreeSet<String> = schema["properties"].as_object().unwrap().keys().cloned().collect();
    let cfg = RunConfig::from_json_str(r#"{"coupling": [[1.0]]}"#).unwrap();
    let in_struct: BTreeSet<String> =
        serde_json::to_value(&cfg).unwrap().as_object().unwrap().keys().cloned().collect();
    assert_eq!(in_schema, in_struct);
}

#[test]
fn shipped_configs_load() {
    for entry in std::fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
