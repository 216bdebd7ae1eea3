use std::collections::HashMap;
use std::io::Read;

use crate::{DomeState, Error, Result};

/// Built-in condition table: index, condition description, open-compatible flag.
const BUILTIN: [(&str, u8); 36] = [
    ("Clear", 1),
    ("Sunny", 0),
    ("Passing clouds", 1),
    ("Low level haze", 1),
    ("Scattered clouds", 1),
    ("Partly sunny", 1),
    ("Broken clouds", 1),
    ("Duststorm", 0),
    ("Sandstorm", 0),
    ("Pleasantly warm", 1),
    ("Thunderstorms passing clouds", 1),
    ("Thunderstorms partly sunny", 1),
    ("Thundershowers", 1),
    ("Mostly cloudy", 1),
    ("Thunderstorms Broken clouds", 1),
    ("Thunderstorms Scattered clouds", 1),
    ("Extremely hot", 0),
    ("Mild", 1),
    ("Thunderstorms Partly clouds", 1),
    ("Rain Partly cloudy", 0),
    ("Rain Scattered clouds", 0),
    ("Rain Broken clouds", 0),
    ("Haze", 1),
    ("Overcast", 1),
    ("Dense fog", 1),
    ("Rain passing clouds", 0),
    ("Rain Mostly cloudy", 0),
    ("Rain Partly sunny", 0),
    ("Fog", 1),
    ("Hail Partly sunny", 0),
    ("Thundershowers passing clouds", 1),
    ("More clouds than sun", 1),
    ("Thunderstorms more clouds than sun", 1),
    ("Thunderstorms", 1),
    ("Partly cloudy", 1),
    ("Hail", 0),
];

/// Case-folds, collapses internal whitespace and drops a trailing period
/// ("Passing clouds." and "passing  CLOUDS" both become "passing clouds").
pub fn normalize_text(s: &str) -> String {
    let folded = s.trim().trim_end_matches('.').to_lowercase();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionEntry {
    pub index: usize,
    pub condition: String,
    pub flag: DomeState,
}

/// Mapping from weather description to whether that weather alone permits
/// an open dome. Immutable once built.
#[derive(Debug, Clone)]
pub struct ConditionTable {
    entries: Vec<ConditionEntry>,
    lookup: HashMap<String, DomeState>,
}

impl ConditionTable {
    /// The 36-row table used for labeling unless overridden.
    pub fn builtin() -> Self {
        let pairs = BUILTIN
            .iter()
            .map(|&(name, flag)| (name.to_string(), DomeState::from_bool(flag == 1)));
        Self::from_pairs(pairs).expect("built-in condition table is valid")
    }

    /// Builds a table from `(condition, flag)` pairs, numbering them from 1.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, DomeState)>,
    {
        let mut entries = Vec::new();
        let mut lookup = HashMap::new();
        for (i, (condition, flag)) in pairs.into_iter().enumerate() {
            let key = normalize_text(&condition);
            if key.is_empty() {
                return Err(Error::InvalidTable(format!(
                    "entry {} has an empty condition",
                    i + 1
                )));
            }
            if lookup.insert(key, flag).is_some() {
                return Err(Error::InvalidTable(format!(
                    "duplicate condition `{}`",
                    condition.trim()
                )));
            }
            entries.push(ConditionEntry {
                index: i + 1,
                condition: condition.trim().to_string(),
                flag,
            });
        }
        if entries.is_empty() {
            return Err(Error::InvalidTable("no entries".into()));
        }
        Ok(Self { entries, lookup })
    }

    /// Reads `condition,flag` lines. A leading `condition,flag` header and
    /// `#` comment lines are skipped.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut pairs = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            if record.len() != 2 {
                return Err(Error::InvalidTable(format!(
                    "line {}: expected `condition,flag`, got {} fields",
                    line + 1,
                    record.len()
                )));
            }
            let (condition, flag) = (&record[0], &record[1]);
            if line == 0 && condition.eq_ignore_ascii_case("condition") {
                continue;
            }
            let flag = match flag {
                "0" => DomeState::Close,
                "1" => DomeState::Open,
                other => {
                    return Err(Error::InvalidTable(format!(
                        "line {}: flag must be 0 or 1, got `{other}`",
                        line + 1
                    )))
                }
            };
            pairs.push((condition.to_string(), flag));
        }
        Self::from_pairs(pairs)
    }

    pub fn entries(&self) -> &[ConditionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, condition: &str) -> Option<DomeState> {
        self.lookup.get(&normalize_text(condition)).copied()
    }
}

impl Default for ConditionTable {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Looks up the open-compatibility flag of a weather description.
pub fn condition_flag(condition: &str, table: &ConditionTable) -> Result<DomeState> {
    table
        .get(condition)
        .ok_or_else(|| Error::UnmappedCondition(condition.to_string()))
}
