use std::collections::BTreeMap;

use anyhow::{anyhow, Result};
use lara::rewrite::PlanExpr;
use serde::{Deserialize, Serialize};

/// A plan plus where to find the tables it mentions. Table paths are
/// resolved relative to the document's own location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub tables: BTreeMap<String, TableSource>,
    pub plan: PlanExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSource {
    pub path: String,
    pub schema: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl PlanDocument {
    pub fn parse(text: &str) -> Result<PlanDocument> {
        ron::from_str(text).map_err(|e| anyhow!("plan parse error at {}: {}", e.position, e.code))
    }

    pub fn serialize(&self) -> String {
        ron::ser::to_string_pretty(self, ron::ser::PrettyConfig::default()).expect("plan to RON")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lara::rewrite::PlanOps;
    use lara::Kind;

    #[test]
    fn plan_documents_round_trip() {
        let doc = PlanDocument {
            tables: BTreeMap::from([
                (
                    "A".to_string(),
                    TableSource {
                        path: "a.csv".into(),
                        schema: "a.toml".into(),
                        delimiter: ',',
                    },
                ),
                (
                    "B".to_string(),
                    TableSource {
                        path: "b.tsv".into(),
                        schema: "b.toml".into(),
                        delimiter: '\t',
                    },
                ),
            ]),
            plan: PlanExpr::union(
                PlanExpr::strict_join(
                    PlanExpr::table("A"),
                    PlanExpr::table("B"),
                    PlanOps::single("mul"),
                ),
                PlanExpr::EmptyTable(vec![("x".into(), Kind::Text)]),
                PlanOps::single("add"),
            ),
        };
        let text = doc.serialize();
        assert_eq!(PlanDocument::parse(&text).unwrap(), doc);
    }

    #[test]
    fn empty_ops_round_trip() {
        let doc = PlanDocument {
            tables: BTreeMap::new(),
            plan: PlanExpr::Rename {
                input: Box::new(PlanExpr::table("T")),
                renaming: BTreeMap::from([("a".to_string(), "b".to_string())]),
            },
        };
        assert_eq!(PlanDocument::parse(&doc.serialize()).unwrap(), doc);
    }
}
