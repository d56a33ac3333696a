//! Closure cycles: closed walks through the transition graph whose signed
//! frequency sum vanishes when every frequency is a level-energy difference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::table::{LevelTable, TransitionKey};
use super::SpectraError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// One transition of a cycle, traversed upward (`Plus`) or downward (`Minus`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CycleLeg {
    pub transition: TransitionKey,
    pub sign: Sign,
}

/// A simple cycle in the undirected transition graph, in canonical form.
///
/// Canonical form starts at the lexicographically smallest level label and
/// takes the orientation with more upward legs; ties go to the orientation
/// whose second level has the smaller label. A 1-2-3 triangle therefore
/// always reads `f12 + f23 − f13`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClosureCycle {
    levels: Vec<String>,
    legs: Vec<CycleLeg>,
}

impl ClosureCycle {
    pub fn legs(&self) -> &[CycleLeg] {
        &self.legs
    }

    /// Levels in walk order, starting at the canonical start level.
    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &TransitionKey> {
        self.legs.iter().map(|l| &l.transition)
    }

    /// Signed sum of level-energy differences along the cycle, in cm⁻¹.
    ///
    /// Each level's energy enters with an integer coefficient accumulated
    /// over the legs; those coefficients cancel, so the result is exactly 0.
    pub fn signed_energy_sum(&self, table: &LevelTable) -> Result<f64, SpectraError> {
        let mut coefficients: BTreeMap<&str, i64> = BTreeMap::new();
        for leg in &self.legs {
            let s = leg.sign.as_i8() as i64;
            *coefficients.entry(&leg.transition.upper).or_default() += s;
            *coefficients.entry(&leg.transition.lower).or_default() -= s;
        }
        let mut sum = 0.0;
        for (label, c) in coefficients {
            let level = table
                .level(label)
                .ok_or_else(|| SpectraError::UnknownLabel(label.to_string()))?;
            sum += c as f64 * level.energy_cm1;
        }
        Ok(sum)
    }

    /// Builds the canonical cycle through exactly the given transitions.
    ///
    /// Keys may be given in either orientation and in any order; they must
    /// form one simple cycle of length ≥ 3.
    pub fn from_transitions(table: &LevelTable, keys: &[TransitionKey]) -> Result<Self, SpectraError> {
        let not_cycle = |reason: &str| SpectraError::NotACycle(reason.to_string());
        if keys.len() < 3 {
            return Err(not_cycle("a closure needs at least three transitions"));
        }
        let mut resolved = Vec::with_capacity(keys.len());
        for k in keys {
            let k = table.resolve_key(k)?;
            if resolved.contains(&k) {
                return Err(not_cycle("repeated transition"));
            }
            resolved.push(k);
        }
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for k in &resolved {
            adjacency.entry(&k.lower).or_default().push(&k.upper);
            adjacency.entry(&k.upper).or_default().push(&k.lower);
        }
        if adjacency.values().any(|n| n.len() != 2) {
            return Err(not_cycle("every level must be shared by exactly two transitions"));
        }
        let start = *adjacency.keys().next().expect("non-empty");
        let mut walk = vec![start];
        let mut previous = start;
        let mut current = adjacency[start][0];
        while current != start {
            walk.push(current);
            let next = adjacency[current]
                .iter()
                .copied()
                .find(|&n| n != previous)
                .expect("degree two");
            previous = current;
            current = next;
        }
        if walk.len() != resolved.len() {
            return Err(not_cycle("transitions form more than one loop"));
        }
        canonical_cycle(table, &walk)
    }
}

impl fmt::Display for ClosureCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, leg) in self.legs.iter().enumerate() {
            let sign = match (i, leg.sign) {
                (0, Sign::Plus) => "",
                (0, Sign::Minus) => "−",
                (_, Sign::Plus) => " + ",
                (_, Sign::Minus) => " − ",
            };
            write!(f, "{sign}f({})", leg.transition)?;
        }
        Ok(())
    }
}

fn legs_for(table: &LevelTable, walk: &[&str]) -> Result<Vec<CycleLeg>, SpectraError> {
    let n = walk.len();
    (0..n)
        .map(|i| {
            let (a, b) = (walk[i], walk[(i + 1) % n]);
            let t = table.find_transition(a, b).ok_or_else(|| {
                SpectraError::UnknownTransition(TransitionKey::new(a, b))
            })?;
            let sign = if t.lower == a { Sign::Plus } else { Sign::Minus };
            Ok(CycleLeg {
                transition: t.key(),
                sign,
            })
        })
        .collect()
}

/// Canonicalizes a closed walk given as its sequence of distinct levels.
fn canonical_cycle(table: &LevelTable, walk: &[&str]) -> Result<ClosureCycle, SpectraError> {
    let start = (0..walk.len()).min_by_key(|&i| walk[i]).expect("non-empty walk");
    let forward: Vec<&str> = walk[start..].iter().chain(&walk[..start]).copied().collect();
    let mut backward = vec![forward[0]];
    backward.extend(forward[1..].iter().rev());

    let forward_legs = legs_for(table, &forward)?;
    let backward_legs = legs_for(table, &backward)?;
    let ups = |legs: &[CycleLeg]| legs.iter().filter(|l| l.sign == Sign::Plus).count();
    let take_forward = match ups(&forward_legs).cmp(&ups(&backward_legs)) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => forward[1] <= backward[1],
    };
    let (levels, legs) = if take_forward {
        (forward, forward_legs)
    } else {
        (backward, backward_legs)
    };
    Ok(ClosureCycle {
        levels: levels.into_iter().map(str::to_string).collect(),
        legs,
    })
}

/// All simple cycles of length ≤ `max_length` in the undirected transition
/// graph, canonicalized, deduplicated and sorted (shorter cycles first).
///
/// Returns an empty list when `max_length < 3`.
pub fn enumerate_closures(table: &LevelTable, max_length: usize) -> Vec<ClosureCycle> {
    let mut adjacency: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for t in table.transitions() {
        adjacency.entry(&t.lower).or_default().insert(&t.upper);
        adjacency.entry(&t.upper).or_default().insert(&t.lower);
    }

    let mut found: BTreeSet<(usize, ClosureCycle)> = BTreeSet::new();
    if max_length < 3 {
        return Vec::new();
    }
    for &start in adjacency.keys() {
        let mut path = vec![start];
        extend_paths(&adjacency, start, &mut path, max_length, &mut |walk| {
            let cycle = canonical_cycle(table, walk).expect("walk edges come from the table");
            found.insert((cycle.len(), cycle));
        });
    }
    found.into_iter().map(|(_, c)| c).collect()
}

/// Depth-first extension of `path`, visiting only levels whose label sorts
/// after `start` so each cycle is rooted at its smallest label.
fn extend_paths<'a>(
    adjacency: &BTreeMap<&'a str, BTreeSet<&'a str>>,
    start: &'a str,
    path: &mut Vec<&'a str>,
    max_length: usize,
    emit: &mut dyn FnMut(&[&'a str]),
) {
    let tip = *path.last().expect("path starts non-empty");
    for &next in &adjacency[tip] {
        if next == start && path.len() >= 3 {
            emit(path);
        } else if next > start && !path.contains(&next) && path.len() < max_length {
            path.push(next);
            extend_paths(adjacency, start, path, max_length, emit);
            path.pop();
        }
    }
}

/// Signed frequency sum Σ sᵢ fᵢ around `cycle`.
pub fn closure_residual(
    cycle: &ClosureCycle,
    frequencies: &BTreeMap<TransitionKey, f64>,
) -> Result<f64, SpectraError> {
    cycle.legs().iter().try_fold(0.0, |acc, leg| {
        let f = frequencies
            .get(&leg.transition)
            .ok_or_else(|| SpectraError::MissingFrequency(leg.transition.clone()))?;
        Ok(acc + leg.sign.value() * f)
    })
}
