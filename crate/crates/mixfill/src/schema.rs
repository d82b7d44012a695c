//! JSON column schemas describing how to read a CSV into a `MixedTable`.

use mixfill_core::table::{ColumnKind, ColumnMeta};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MISSING_TOKENS: &[&str] = &["NA", ""];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    Quantitative,
    Categorical,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: SchemaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordered: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
    /// Tokens read as Missing; the first one is written back out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_tokens: Option<Vec<String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read schema: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid schema JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("categorical column `{0}` lists no levels")]
    MissingLevels(String),
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, SchemaError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), SchemaError> {
        for col in &self.columns {
            if col.kind == SchemaKind::Categorical
                && col.levels.as_ref().is_none_or(|l| l.is_empty())
            {
                return Err(SchemaError::MissingLevels(col.name.clone()));
            }
        }
        Ok(())
    }

    pub fn missing_tokens(&self) -> Vec<String> {
        self.missing_tokens.clone().unwrap_or_else(|| {
            DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
        })
    }

    pub fn to_columns(&self) -> Vec<ColumnMeta> {
        self.columns
            .iter()
            .map(|c| ColumnMeta {
                name: c.name.clone(),
                kind: match c.kind {
                    SchemaKind::Quantitative => ColumnKind::Quantitative,
                    SchemaKind::Categorical => ColumnKind::Categorical {
                        levels: c.levels.clone().unwrap_or_default(),
                        ordered: c.ordered.unwrap_or(false),
                    },
                },
            })
            .collect()
    }

    /// Schema mirroring an existing table (handy after aggregation or
    /// column drops).
    pub fn from_table(table: &mixfill_core::MixedTable) -> Self {
        Schema {
            columns: table
                .columns()
                .iter()
                .map(|c| match &c.kind {
                    ColumnKind::Quantitative => ColumnSchema {
                        name: c.name.clone(),
                        kind: SchemaKind::Quantitative,
                        levels: None,
                        ordered: None,
                    },
                    ColumnKind::Categorical { levels, ordered } => ColumnSchema {
                        name: c.name.clone(),
                        kind: SchemaKind::Categorical,
                        levels: Some(levels.clone()),
                        ordered: if *ordered { Some(true) } else { None },
                    },
                })
                .collect(),
            missing_tokens: None,
        }
    }
}
