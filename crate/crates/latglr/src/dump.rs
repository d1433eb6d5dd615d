//! Deterministic JSON renderings of tables and forests.
//!
//! Maps are ordered, so equal structures always print byte-for-byte equal.

use std::collections::BTreeMap;

use latglr_core::grammar::Grammar;
use latglr_core::gss::{CanonicalContent, GssState};
use latglr_core::lattice::Lattice;
use latglr_core::table::{Lookahead, SlrTable, StateId, TableAction};
use serde::Serialize;

#[derive(Serialize)]
struct TableDump {
    states: usize,
    conflict_cells: usize,
    actions: Vec<BTreeMap<String, Vec<String>>>,
    conflicts: Vec<ConflictDump>,
}

#[derive(Serialize)]
struct ConflictDump {
    state: usize,
    symbol: String,
    actions: Vec<String>,
}

fn column_name(g: &Grammar, la: Lookahead) -> String {
    match la {
        Lookahead::Symbol(s) => g.name(s).to_string(),
        Lookahead::End => "$".to_string(),
    }
}

fn action_name(a: &TableAction) -> String {
    match a {
        TableAction::Shift(s) => format!("shift {}", s.0),
        TableAction::Reduce(r) => format!("reduce {}", r.0),
        TableAction::Accept => "accept".to_string(),
    }
}

/// Pretty JSON of the action table: one object per state mapping each
/// column (symbol name, or `$` for end of input) to its actions.
pub fn table_json(g: &Grammar, table: &SlrTable) -> String {
    let mut actions = Vec::with_capacity(table.state_count());
    let mut conflicts = Vec::new();
    for s in 0..table.state_count() {
        let mut row = BTreeMap::new();
        for (la, cell) in table.row(StateId(s as u32)) {
            let names: Vec<String> = cell.iter().map(action_name).collect();
            if cell.len() > 1 {
                conflicts.push(ConflictDump {
                    state: s,
                    symbol: column_name(g, *la),
                    actions: names.clone(),
                });
            }
            row.insert(column_name(g, *la), names);
        }
        actions.push(row);
    }
    let dump = TableDump {
        states: table.state_count(),
        conflict_cells: table.conflict_cells(),
        actions,
        conflicts,
    };
    serde_json::to_string_pretty(&dump).expect("table dump serializes")
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum NodeDump {
    Hypotheses(Vec<HypothesisDump>),
    Alternatives(Vec<Vec<String>>),
}

#[derive(Serialize)]
struct HypothesisDump {
    word: String,
    acoustic_logp: f64,
}

/// Pretty JSON of the forest keyed by `"cat:start:end"`.
pub fn forest_json(gss: &GssState, g: &Grammar, lattice: &Lattice) -> String {
    let forest = gss.canonical_forest(g, lattice);
    let nodes: BTreeMap<String, NodeDump> = forest
        .nodes
        .into_iter()
        .map(|(k, c)| {
            let d = match c {
                CanonicalContent::Hypotheses(hs) => NodeDump::Hypotheses(
                    hs.into_iter()
                        .map(|h| HypothesisDump {
                            word: h.word,
                            acoustic_logp: h.acoustic_logp,
                        })
                        .collect(),
                ),
                CanonicalContent::Sequences(s) => NodeDump::Alternatives(s),
            };
            (k, d)
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "nodes": nodes })).expect("forest dump serializes")
}

/// Pretty JSON of the stack's vertices and links, by time and state.
pub fn gss_json(gss: &GssState, g: &Grammar) -> String {
    let c = gss.canonical_gss(g);
    let links: Vec<_> = c
        .links
        .iter()
        .map(|l| serde_json::json!({ "owner": l.owner, "node": l.node, "preds": l.preds }))
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "vertices": c.vertices, "links": links }))
        .expect("stack dump serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use latglr_core::{build_slr_table, parse_exhaustive, parse_grammar, parse_lattice};

    #[test]
    fn table_dump_lists_conflict() {
        let g = parse_grammar("S -> S S\nS -> a\nlex a a\n").unwrap();
        let t = build_slr_table(&g);
        let v: serde_json::Value = serde_json::from_str(&table_json(&g, &t)).unwrap();
        assert_eq!(v["states"], 4);
        assert_eq!(v["conflict_cells"], 1);
        assert_eq!(v["conflicts"][0]["symbol"], "a");
        assert_eq!(v["actions"][0]["$"], serde_json::Value::Null);
    }

    #[test]
    fn forest_dump_is_keyed_by_span() {
        let g = parse_grammar("S -> NP VP\nNP -> n\nVP -> v\nlex n dog\nlex v barks\n").unwrap();
        let t = build_slr_table(&g);
        let l = parse_lattice("0 5 dog -50.0\n5 9 barks -40.0\n").unwrap();
        let (gss, _) = parse_exhaustive(&g, &t, &l);
        let v: serde_json::Value = serde_json::from_str(&forest_json(&gss, &g, &l)).unwrap();
        assert_eq!(v["nodes"]["S:0:9"]["alternatives"][0][0], "NP:0:5");
        assert_eq!(v["nodes"]["n:0:5"]["hypotheses"][0]["word"], "dog");
    }
}
