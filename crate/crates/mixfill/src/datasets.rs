//! Bundled datasets, compiled into the binary.
//!
//! Every entry carries a provenance note. Two entries (`concrete`,
//! `parkinson`) are synthetic stand-ins: the original public files could
//! not be fetched in the build environment, so same-shape surrogates are
//! bundled and flagged. Checks tied to those entries are informative only.

use mixfill_core::MixedTable;

use crate::io::{read_table, IoError};
use crate::schema::{Schema, SchemaError};

pub struct BuiltinDataset {
    pub name: &'static str,
    pub csv: &'static str,
    pub schema_json: &'static str,
    /// Provenance and any shape caveat.
    pub note: &'static str,
    /// True when the bundled file is a generated surrogate, not the
    /// original data.
    pub synthetic: bool,
}

macro_rules! builtin {
    ($name:literal, $file:literal, $note:literal, $synthetic:literal) => {
        BuiltinDataset {
            name: $name,
            csv: include_str!(concat!("../../../data/", $file, ".csv")),
            schema_json: include_str!(concat!("../../../data/", $file, ".schema.json")),
            note: $note,
            synthetic: $synthetic,
        }
    };
}

pub const BUILTINS: &[BuiltinDataset] = &[
    builtin!(
        "lanza",
        "lanza",
        "Lanza gastric-damage trial data (HSAUR distribution, 198 rows across four studies; \
         some published summaries cite 100 rows)",
        false
    ),
    builtin!(
        "hayes",
        "hayes",
        "Hayes-Roth concept-learning data (UCI, 132 rows; the non-informative name column \
         is dropped)",
        false
    ),
    builtin!(
        "tictactoe",
        "tictactoe",
        "Tic-Tac-Toe endgame data (UCI via the KEEL mirror, 958 rows)",
        false
    ),
    builtin!("rock", "rock", "rock permeability measurements (R datasets package, 48 rows)", false),
    builtin!(
        "concrete",
        "concrete",
        "SYNTHETIC STAND-IN shaped like the Concrete Slump data (103 rows x 10 columns); \
         the original UCI file was unavailable in the build environment",
        true
    ),
    builtin!(
        "wine",
        "wine",
        "red wine quality data (UCI via the KEEL mirror, 1599 rows; some published \
         summaries cite 122 rows)",
        false
    ),
    builtin!(
        "parkinson",
        "parkinson",
        "SYNTHETIC STAND-IN shaped like the Parkinsons telemonitoring voice data \
         (195 rows x 22 columns); the original UCI file was unavailable in the build \
         environment",
        true
    ),
    builtin!("iris", "iris", "Anderson/Fisher iris measurements (R datasets package, 150 rows)", false),
    builtin!(
        "contraception",
        "contraception",
        "Contraceptive Method Choice data (UCI, truncated to the first 313 of 1473 rows \
         to match the shape cited by the comparative study)",
        false
    ),
    builtin!(
        "musk",
        "musk",
        "Musk (version 1) molecule conformations (UCI, 476 rows x 167 columns)",
        false
    ),
    builtin!(
        "wwtp-fixture",
        "wwtp_fixture",
        "SYNTHETIC FIXTURE: a wastewater-treatment-plant style monitoring table \
         (789 rows x 11 columns, one treatment factor plus ten measurements) with \
         heavy, column-structured missingness",
        true
    ),
];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("unknown dataset `{0}`; known: {known}", known = names().join(", "))]
    Unknown(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Io(#[from] IoError),
}

pub fn names() -> Vec<&'static str> {
    BUILTINS.iter().map(|d| d.name).collect()
}

pub fn find(name: &str) -> Option<&'static BuiltinDataset> {
    BUILTINS.iter().find(|d| d.name == name)
}

pub fn load_builtin(name: &str) -> Result<(MixedTable, Schema), DatasetError> {
    let entry = find(name).ok_or_else(|| DatasetError::Unknown(name.to_string()))?;
    let schema = Schema::from_json(entry.schema_json)?;
    let table = read_table(entry.csv.as_bytes(), &schema)?;
    Ok((table, schema))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mixfill_core::table::ColumnKind;

    #[test]
    fn all_builtins_load() {
        for d in BUILTINS {
            let (table, _) = load_builtin(d.name).unwrap();
            assert!(table.n_rows() > 0, "{} is empty", d.name);
        }
    }

    #[test]
    fn expected_shapes() {
        let cases = [
            ("lanza", 198, 3),
            ("hayes", 132, 5),
            ("tictactoe", 958, 10),
            ("rock", 48, 4),
            ("concrete", 103, 10),
            ("wine", 1599, 12),
            ("parkinson", 195, 22),
            ("iris", 150, 5),
            ("contraception", 313, 10),
            ("musk", 476, 167),
            ("wwtp-fixture", 789, 11),
        ];
        for (name, rows, cols) in cases {
            let (t, _) = load_builtin(name).unwrap();
            assert_eq!((t.n_rows(), t.n_cols()), (rows, cols), "{name}");
        }
    }

    #[test]
    fn iris_is_mixed() {
        let (t, _) = load_builtin("iris").unwrap();
        let c = t.column_index("species").unwrap();
        match &t.column(c).kind {
            ColumnKind::Categorical { levels, .. } => assert_eq!(levels.len(), 3),
            _ => panic!("species should be categorical"),
        }
        assert!(!t.has_missing());
    }

    #[test]
    fn only_the_fixture_has_missing() {
        for d in BUILTINS {
            let (t, _) = load_builtin(d.name).unwrap();
            assert_eq!(t.has_missing(), d.name == "wwtp-fixture", "{}", d.name);
        }
    }

    #[test]
    fn unknown_name_lists_options() {
        let err = load_builtin("nope").unwrap_err().to_string();
        assert!(err.contains("iris"));
    }
}
