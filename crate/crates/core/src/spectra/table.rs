//! Level and transition records, and the CSV loader for level tables.
//!
//! A level-table file holds two comma-separated sections. The first starts
//! with the header `label,configuration,term,j,parity,energy_cm1,lifetime_s`,
//! the second with `lower,upper,kind,measured_hz,sigma_hz`. Lines starting
//! with `#` are comments; a `# system: <name>` comment names the table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::units::wavenumber_to_frequency;
use super::SpectraError;

const LEVEL_HEADER: [&str; 7] = [
    "label",
    "configuration",
    "term",
    "j",
    "parity",
    "energy_cm1",
    "lifetime_s",
];
const TRANSITION_HEADER: [&str; 5] = ["lower", "upper", "kind", "measured_hz", "sigma_hz"];

/// Total angular momentum J, stored as 2J so half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AngularMomentum(u32);

impl AngularMomentum {
    pub fn from_twice(twice: u32) -> Self {
        AngularMomentum(twice)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl FromStr for AngularMomentum {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once('/') {
            Some((num, den)) => {
                let num: u32 = num.trim().parse().map_err(|_| format!("bad J numerator `{num}`"))?;
                match den.trim() {
                    "2" => Ok(AngularMomentum(num)),
                    "1" => Ok(AngularMomentum(2 * num)),
                    other => Err(format!("J must be integer or half-integer, got denominator `{other}`")),
                }
            }
            None => s
                .parse::<u32>()
                .map(|j| AngularMomentum(2 * j))
                .map_err(|_| format!("bad J value `{s}`")),
        }
    }
}

impl fmt::Display for AngularMomentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl FromStr for Parity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "even" | "e" | "+" => Ok(Parity::Even),
            "odd" | "o" | "-" => Ok(Parity::Odd),
            other => Err(format!("unknown parity `{other}`")),
        }
    }
}

/// Multipolarity or excitation mechanism of a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    E1,
    E2,
    M1,
    TwoPhotonDegenerate,
    TwoPhotonNondegenerate,
    E1M1,
    HyperfineInduced,
}

impl FromStr for TransitionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s.trim() {
            "E1" => TransitionKind::E1,
            "E2" => TransitionKind::E2,
            "M1" => TransitionKind::M1,
            "TwoPhotonDegenerate" | "2PD" => TransitionKind::TwoPhotonDegenerate,
            "TwoPhotonNondegenerate" | "2PN" => TransitionKind::TwoPhotonNondegenerate,
            "E1M1" | "E1-M1" => TransitionKind::E1M1,
            "HyperfineInduced" | "HFI" => TransitionKind::HyperfineInduced,
            other => return Err(format!("unknown transition kind `{other}`")),
        };
        Ok(kind)
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// An energy level. Energies are in cm⁻¹ relative to the ground level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub label: String,
    pub configuration: String,
    pub term: String,
    pub j: AngularMomentum,
    pub parity: Parity,
    pub energy_cm1: f64,
    pub lifetime_s: Option<f64>,
}

/// Identifies a transition by its (lower, upper) level labels.
///
/// Rendered as `lower-upper`; level labels never contain `-`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionKey {
    pub lower: String,
    pub upper: String,
}

impl TransitionKey {
    pub fn new(lower: impl Into<String>, upper: impl Into<String>) -> Self {
        TransitionKey {
            lower: lower.into(),
            upper: upper.into(),
        }
    }

    /// True if the key joins `a` and `b` in either orientation.
    pub fn joins(&self, a: &str, b: &str) -> bool {
        (self.lower == a && self.upper == b) || (self.lower == b && self.upper == a)
    }
}

impl fmt::Display for TransitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lower, self.upper)
    }
}

impl FromStr for TransitionKey {
    type Err = SpectraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lower, upper) = s
            .split_once('-')
            .ok_or_else(|| SpectraError::BadKey(s.to_string()))?;
        let (lower, upper) = (lower.trim(), upper.trim());
        if lower.is_empty() || upper.is_empty() || upper.contains('-') {
            return Err(SpectraError::BadKey(s.to_string()));
        }
        Ok(TransitionKey::new(lower, upper))
    }
}

impl Serialize for TransitionKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TransitionKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub lower: String,
    pub upper: String,
    pub kind: TransitionKind,
    pub measured_hz: Option<f64>,
    pub sigma_hz: Option<f64>,
}

impl Transition {
    pub fn key(&self) -> TransitionKey {
        TransitionKey::new(&self.lower, &self.upper)
    }
}

/// A validated set of levels and the transitions that connect them.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelTable {
    system: String,
    levels: Vec<Level>,
    transitions: Vec<Transition>,
    index: BTreeMap<String, usize>,
}

fn valid_label(label: &str) -> bool {
    !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl LevelTable {
    /// Builds a table, checking every level and transition invariant.
    pub fn new(
        system: impl Into<String>,
        levels: Vec<Level>,
        transitions: Vec<Transition>,
    ) -> Result<Self, SpectraError> {
        let mut index = BTreeMap::new();
        for (i, level) in levels.iter().enumerate() {
            if !valid_label(&level.label) {
                return Err(SpectraError::BadLabel(level.label.clone()));
            }
            if !level.energy_cm1.is_finite() || level.energy_cm1 < 0.0 {
                return Err(SpectraError::InvalidLevel {
                    label: level.label.clone(),
                    reason: format!("energy {} cm⁻¹ must be finite and ≥ 0", level.energy_cm1),
                });
            }
            if let Some(tau) = level.lifetime_s {
                if !(tau > 0.0) || !tau.is_finite() {
                    return Err(SpectraError::InvalidLevel {
                        label: level.label.clone(),
                        reason: format!("lifetime {tau} s must be positive"),
                    });
                }
            }
            if index.insert(level.label.clone(), i).is_some() {
                return Err(SpectraError::DuplicateLabel(level.label.clone()));
            }
        }
        match levels.iter().filter(|l| l.energy_cm1 == 0.0).count() {
            0 => return Err(SpectraError::NoGroundLevel),
            1 => {}
            _ => return Err(SpectraError::MultipleGroundLevels),
        }

        let table = LevelTable {
            system: system.into(),
            levels,
            transitions: Vec::new(),
            index,
        };
        let mut table = table;
        for t in &transitions {
            table.check_transition(t)?;
            if table.transitions.iter().any(|u| u.key().joins(&t.lower, &t.upper)) {
                return Err(SpectraError::DuplicateTransition(t.key()));
            }
            table.transitions.push(t.clone());
        }
        Ok(table)
    }

    fn check_transition(&self, t: &Transition) -> Result<(), SpectraError> {
        let invalid = |reason: String| SpectraError::InvalidTransition {
            key: t.key(),
            reason,
        };
        let lower = self
            .level(&t.lower)
            .ok_or_else(|| SpectraError::DanglingEndpoint(t.lower.clone()))?;
        let upper = self
            .level(&t.upper)
            .ok_or_else(|| SpectraError::DanglingEndpoint(t.upper.clone()))?;
        if t.lower == t.upper {
            return Err(invalid("lower and upper coincide".into()));
        }
        if upper.energy_cm1 <= lower.energy_cm1 {
            return Err(invalid("upper level must lie above lower level".into()));
        }
        match (t.measured_hz, t.sigma_hz) {
            (None, Some(_)) => Err(invalid("uncertainty given without a measured frequency".into())),
            (Some(f), _) if !f.is_finite() || f <= 0.0 => {
                Err(invalid(format!("measured frequency {f} Hz must be positive")))
            }
            (_, Some(s)) if !(s > 0.0) || !s.is_finite() => {
                Err(invalid(format!("uncertainty {s} Hz must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn system(&self) -> &str {
        &self.system
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn level(&self, label: &str) -> Option<&Level> {
        self.index.get(label).map(|&i| &self.levels[i])
    }

    /// The zero-energy level.
    pub fn ground(&self) -> &Level {
        self.levels
            .iter()
            .find(|l| l.energy_cm1 == 0.0)
            .expect("validated table has a ground level")
    }

    /// Transition joining `a` and `b`, in either orientation.
    pub fn find_transition(&self, a: &str, b: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.key().joins(a, b))
    }

    pub fn transition(&self, key: &TransitionKey) -> Option<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.lower == key.lower && t.upper == key.upper)
    }

    /// Resolves a key given in either orientation to the stored one.
    pub fn resolve_key(&self, key: &TransitionKey) -> Result<TransitionKey, SpectraError> {
        self.find_transition(&key.lower, &key.upper)
            .map(Transition::key)
            .ok_or_else(|| SpectraError::UnknownTransition(key.clone()))
    }

    fn energy(&self, label: &str) -> Result<f64, SpectraError> {
        self.level(label)
            .map(|l| l.energy_cm1)
            .ok_or_else(|| SpectraError::UnknownLabel(label.to_string()))
    }

    /// Linear-QM frequency of a key's level pair, from the level energies.
    pub fn key_frequency(&self, key: &TransitionKey) -> Result<f64, SpectraError> {
        transition_frequency(self, &key.lower, &key.upper)
    }

    /// Parses a level table from CSV text. `default_name` is used when no
    /// `# system:` comment is present.
    pub fn from_csv_str(text: &str, default_name: &str) -> Result<Self, SpectraError> {
        let system = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix('#'))
            .find_map(|c| c.trim().strip_prefix("system:"))
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|| default_name.to_string());

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());

        #[derive(PartialEq)]
        enum Section {
            Start,
            Levels,
            Transitions,
        }
        let mut section = Section::Start;
        let mut levels = Vec::new();
        let mut transitions = Vec::new();
        let mut transition_lines = Vec::new();

        for record in reader.records() {
            let record = record.map_err(|e| SpectraError::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.iter().all(str::is_empty) {
                continue;
            }
            let fields: Vec<&str> = record.iter().collect();
            if fields == LEVEL_HEADER {
                if section != Section::Start {
                    return Err(SpectraError::Parse {
                        line,
                        message: "level header must come first".into(),
                    });
                }
                section = Section::Levels;
                continue;
            }
            if fields == TRANSITION_HEADER {
                if section != Section::Levels {
                    return Err(SpectraError::Parse {
                        line,
                        message: "transition header must follow the level section".into(),
                    });
                }
                section = Section::Transitions;
                continue;
            }
            let parse_err = |message: String| SpectraError::Parse { line, message };
            match section {
                Section::Start => {
                    return Err(parse_err(format!(
                        "expected header `{}`",
                        LEVEL_HEADER.join(",")
                    )))
                }
                Section::Levels => {
                    if fields.len() != LEVEL_HEADER.len() {
                        return Err(parse_err(format!(
                            "expected {} fields, found {}",
                            LEVEL_HEADER.len(),
                            fields.len()
                        )));
                    }
                    levels.push(Level {
                        label: fields[0].to_string(),
                        configuration: fields[1].to_string(),
                        term: fields[2].to_string(),
                        j: fields[3].parse().map_err(parse_err)?,
                        parity: fields[4].parse().map_err(parse_err)?,
                        energy_cm1: parse_f64(fields[5]).map_err(parse_err)?,
                        lifetime_s: parse_opt_f64(fields[6]).map_err(parse_err)?,
                    });
                }
                Section::Transitions => {
                    if fields.len() != TRANSITION_HEADER.len() {
                        return Err(parse_err(format!(
                            "expected {} fields, found {}",
                            TRANSITION_HEADER.len(),
                            fields.len()
                        )));
                    }
                    transitions.push(Transition {
                        lower: fields[0].to_string(),
                        upper: fields[1].to_string(),
                        kind: fields[2].parse().map_err(parse_err)?,
                        measured_hz: parse_opt_f64(fields[3]).map_err(parse_err)?,
                        sigma_hz: parse_opt_f64(fields[4]).map_err(parse_err)?,
                    });
                    transition_lines.push(line);
                }
            }
        }
        if section == Section::Start {
            return Err(SpectraError::Parse {
                line: 0,
                message: "no level section found".into(),
            });
        }

        // Validate levels first so transition errors can carry their line.
        let mut table = LevelTable::new(system, levels, Vec::new())?;
        for (t, line) in transitions.into_iter().zip(transition_lines) {
            let with_line = |e: SpectraError| match e {
                SpectraError::DanglingEndpoint(label) => SpectraError::DanglingEndpointAt { line, label },
                other => SpectraError::Parse {
                    line,
                    message: other.to_string(),
                },
            };
            table.check_transition(&t).map_err(with_line)?;
            if table.find_transition(&t.lower, &t.upper).is_some() {
                return Err(with_line(SpectraError::DuplicateTransition(t.key())));
            }
            table.transitions.push(t);
        }
        Ok(table)
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad number `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number `{s}`"))
    }
}

fn parse_opt_f64(s: &str) -> Result<Option<f64>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

/// Reads and validates a level table file.
pub fn load_level_table(path: impl AsRef<Path>) -> Result<LevelTable, SpectraError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SpectraError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LevelTable::from_csv_str(&text, &stem)
}

/// Frequency of the `lower` → `upper` interval in Hz.
pub fn transition_frequency(table: &LevelTable, lower: &str, upper: &str) -> Result<f64, SpectraError> {
    let e_lower = table.energy(lower)?;
    let e_upper = table.energy(upper)?;
    let interval = e_upper - e_lower;
    if !(interval > 0.0) {
        return Err(SpectraError::NonPositiveInterval {
            lower: lower.to_string(),
            upper: upper.to_string(),
        });
    }
    wavenumber_to_frequency(interval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const YB: &str = "\
# system: Yb I
label,configuration,term,j,parity,energy_cm1,lifetime_s
1S0,4f14 6s2,1S,0,even,0,
3P0,4f14 6s6p,3P,0,odd,17288.439,20
J2,4f13 5d 6s2,,2,odd,23188.518,60
lower,upper,kind,measured_hz,sigma_hz
1S0,3P0,HyperfineInduced,,
3P0,J2,HyperfineInduced,,
1S0,J2,E1M1,,
";

    #[test]
    fn parses_sections_and_system_name() {
        let t = LevelTable::from_csv_str(YB, "fallback").unwrap();
        assert_eq!(t.system(), "Yb I");
        assert_eq!(t.levels().len(), 3);
        assert_eq!(t.transitions().len(), 3);
        assert_eq!(t.ground().label, "1S0");
        assert_eq!(t.level("3P0").unwrap().lifetime_s, Some(20.0));
    }

    #[test]
    fn transition_frequencies_from_energies() {
        let t = LevelTable::from_csv_str(YB, "").unwrap();
        let f = transition_frequency(&t, "1S0", "3P0").unwrap();
        assert_relative_eq!(f, 5.182_943_6e14, max_relative = 1e-8);
        // (23188.518 − 17288.439) × c
        let f = transition_frequency(&t, "3P0", "J2").unwrap();
        assert_relative_eq!(f, 1.768_799e14, max_relative = 1e-6);
        assert!(matches!(
            transition_frequency(&t, "1S0", "1S0"),
            Err(SpectraError::NonPositiveInterval { .. })
        ));
        assert!(matches!(
            transition_frequency(&t, "1S0", "nope"),
            Err(SpectraError::UnknownLabel(_))
        ));
    }

    #[test]
    fn dangling_endpoint_reports_line() {
        let text = YB.replace("1S0,J2,E1M1,,", "1S0,X9,E1M1,,");
        match LevelTable::from_csv_str(&text, "") {
            Err(SpectraError::DanglingEndpointAt { line, label }) => {
                assert_eq!(label, "X9");
                assert_eq!(line, 9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_line() {
        let text = YB.replace("17288.439", "seventeen");
        match LevelTable::from_csv_str(&text, "") {
            Err(SpectraError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_label_and_missing_ground() {
        let dup = YB.replace("J2,4f13", "3P0,4f13");
        assert!(matches!(
            LevelTable::from_csv_str(&dup, ""),
            Err(SpectraError::DuplicateLabel(_))
        ));
        let no_ground = YB.replace("1S0,4f14 6s2,1S,0,even,0,", "1S0,4f14 6s2,1S,0,even,5,");
        assert!(matches!(
            LevelTable::from_csv_str(&no_ground, ""),
            Err(SpectraError::NoGroundLevel)
        ));
    }

    #[test]
    fn rejects_inverted_or_bad_transitions() {
        let inverted = YB.replace("3P0,J2,Hyperfine", "J2,3P0,Hyperfine");
        assert!(LevelTable::from_csv_str(&inverted, "").is_err());
        let sigma_only = YB.replace("1S0,J2,E1M1,,", "1S0,J2,E1M1,,5");
        assert!(LevelTable::from_csv_str(&sigma_only, "").is_err());
        let neg_sigma = YB.replace("1S0,J2,E1M1,,", "1S0,J2,E1M1,1e14,-5");
        assert!(LevelTable::from_csv_str(&neg_sigma, "").is_err());
    }

    #[test]
    fn angular_momentum_parsing() {
        assert_eq!("1/2".parse::<AngularMomentum>().unwrap().twice(), 1);
        assert_eq!("5/2".parse::<AngularMomentum>().unwrap().value(), 2.5);
        assert_eq!("2".parse::<AngularMomentum>().unwrap().twice(), 4);
        assert_eq!("3/2".parse::<AngularMomentum>().unwrap().to_string(), "3/2");
        assert!("1/3".parse::<AngularMomentum>().is_err());
    }

    #[test]
    fn transition_key_text_form() {
        let k: TransitionKey = "1S0-3P0".parse().unwrap();
        assert_eq!(k, TransitionKey::new("1S0", "3P0"));
        assert_eq!(k.to_string(), "1S0-3P0");
        assert!("1S0".parse::<TransitionKey>().is_err());
        assert!("a-b-c".parse::<TransitionKey>().is_err());
    }
}
