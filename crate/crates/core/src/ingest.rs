//! Event and metadata ingestion into yearly multi-view count matrices.
//!
//! Each event lists up to three tactics, three targets and four weapons.
//! For every year and view the ingest produces a group × category matrix
//! whose entries count how often a group's events of that year named the
//! category.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TACTIC_UNIVERSE: [&str; 9] = [
    "Armed Assault",
    "Assassination",
    "Bombing/Explosion",
    "Facility/Infrastructure Attack",
    "Hijacking",
    "Hostage Taking (Barricade Incident)",
    "Hostage Taking (Kidnapping)",
    "Unarmed Assault",
    "Unknown",
];

pub const TARGET_UNIVERSE: [&str; 22] = [
    "Abortion Related",
    "Airports & Aircraft",
    "Business",
    "Educational Institution",
    "Food or Water Supply",
    "Government (Diplomatic)",
    "Government (General)",
    "Journalists & Media",
    "Maritime",
    "Military",
    "NGO",
    "Other",
    "Police",
    "Private Citizens & Property",
    "Religious Figures/Institutions",
    "Telecommunication",
    "Terrorists/Non-State Militia",
    "Tourists",
    "Transportation",
    "Unknown",
    "Utilities",
    "Violent Political Party",
];

pub const WEAPON_UNIVERSE: [&str; 11] = [
    "Biological",
    "Chemical",
    "Explosives",
    "Fake Weapons",
    "Firearms",
    "Incendiary",
    "Melee",
    "Other",
    "Sabotage Equipment",
    "Unknown",
    "Vehicle (not to include vehicle-borne explosives, i.e., car or truck bombs)",
];

/// Perpetrator labels that are too broad to count as organizations.
pub const DEFAULT_EXCLUDED_ACTORS: [&str; 6] = [
    "Unknown",
    "Gunmen",
    "Separatists",
    "Militants",
    "Tribesmen",
    "Anti-Muslim Extremists",
];

/// Placeholder for metadata fields of groups absent from the metadata file.
pub const UNKNOWN_CATEGORY: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Tactic,
    Target,
    Weapon,
}

impl View {
    pub const ALL: [View; 3] = [View::Tactic, View::Target, View::Weapon];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            View::Tactic => "tactic",
            View::Target => "target",
            View::Weapon => "weapon",
        }
    }

    /// Maximum number of categories a single event may list in this view.
    pub fn max_per_event(self) -> usize {
        match self {
            View::Tactic | View::Target => 3,
            View::Weapon => 4,
        }
    }

    pub fn universe(self) -> &'static [&'static str] {
        match self {
            View::Tactic => &TACTIC_UNIVERSE,
            View::Target => &TARGET_UNIVERSE,
            View::Weapon => &WEAPON_UNIVERSE,
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive calendar-year window, written `A..B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn is_empty(&self) -> bool {
        self.start > self.end
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }
}

impl FromStr for YearRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid year range `{s}`, expected A..B"));
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let start = a.trim().parse().map_err(|_| bad())?;
        let end = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad())?;
        Ok(Self { start, end })
    }
}

impl From<YearRange> for String {
    fn from(y: YearRange) -> Self {
        y.to_string()
    }
}

impl TryFrom<String> for YearRange {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: String,
    pub year: i32,
    pub group: String,
    pub tactics: Vec<String>,
    pub targets: Vec<String>,
    pub weapons: Vec<String>,
    pub region: String,
    pub doubt_flag: bool,
}

impl EventRecord {
    pub fn categories(&self, view: View) -> &[String] {
        match view {
            View::Tactic => &self.tactics,
            View::Target => &self.targets,
            View::Weapon => &self.weapons,
        }
    }

    /// Total number of category mentions across the three views.
    pub fn mentions(&self) -> usize {
        self.tactics.len() + self.targets.len() + self.weapons.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMetadata {
    pub group: String,
    pub ideology: String,
    pub most_common_region: String,
}

impl GroupMetadata {
    pub fn unknown(group: &str) -> Self {
        Self {
            group: group.to_string(),
            ideology: UNKNOWN_CATEGORY.to_string(),
            most_common_region: UNKNOWN_CATEGORY.to_string(),
        }
    }
}

/// Column names of the events file. Multi-valued fields are read from
/// `{prefix}1 ..= {prefix}N` where N is the view's per-event maximum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSchema {
    pub event_id: String,
    pub year: String,
    pub group: String,
    pub tactic_prefix: String,
    pub target_prefix: String,
    pub weapon_prefix: String,
    pub region: String,
    pub doubt: String,
}

impl Default for EventSchema {
    fn default() -> Self {
        Self {
            event_id: "event_id".into(),
            year: "year".into(),
            group: "group".into(),
            tactic_prefix: "tactic".into(),
            target_prefix: "target".into(),
            weapon_prefix: "weapon".into(),
            region: "region".into(),
            doubt: "doubt".into(),
        }
    }
}

impl EventSchema {
    fn prefix(&self, view: View) -> &str {
        match view {
            View::Tactic => &self.tactic_prefix,
            View::Target => &self.target_prefix,
            View::Weapon => &self.weapon_prefix,
        }
    }
}

fn column(headers: &HashMap<&str, usize>, name: &str) -> Result<usize> {
    headers
        .get(name)
        .copied()
        .ok_or_else(|| Error::Schema(name.to_string()))
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" => Some(false),
        "1" | "true" | "yes" => Some(true),
        _ => None,
    }
}

pub fn parse_events(path: impl AsRef<Path>, schema: &EventSchema) -> Result<Vec<EventRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_events(file, schema)
}

/// Reads events from any CSV source. See [`parse_events`].
pub fn read_events<R: std::io::Read>(reader: R, schema: &EventSchema) -> Result<Vec<EventRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(reader);
    let header_row = rdr.headers()?.clone();
    let headers: HashMap<&str, usize> = header_row
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();

    let id_col = column(&headers, &schema.event_id)?;
    let year_col = column(&headers, &schema.year)?;
    let group_col = column(&headers, &schema.group)?;
    let region_col = column(&headers, &schema.region)?;
    let doubt_col = column(&headers, &schema.doubt)?;
    let mut view_cols: [Vec<usize>; 3] = Default::default();
    for view in View::ALL {
        let prefix = schema.prefix(view);
        // The first slot is mandatory; the rest are read when present.
        view_cols[view.index()].push(column(&headers, &format!("{prefix}1"))?);
        for k in 2..=view.max_per_event() {
            if let Some(&c) = headers.get(format!("{prefix}{k}").as_str()) {
                view_cols[view.index()].push(c);
            }
        }
    }

    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize| record.get(c).unwrap_or("").trim();

        let year: i32 = field(year_col).parse().map_err(|_| Error::Row {
            line,
            message: format!("unparseable year `{}`", field(year_col)),
        })?;
        let group = field(group_col).to_string();
        if group.is_empty() {
            return Err(Error::Row {
                line,
                message: "empty group".into(),
            });
        }
        let doubt_flag = parse_flag(field(doubt_col)).ok_or_else(|| Error::Row {
            line,
            message: format!("unparseable doubt flag `{}`", field(doubt_col)),
        })?;

        let mut lists: [Vec<String>; 3] = Default::default();
        for view in View::ALL {
            let values: Vec<String> = view_cols[view.index()]
                .iter()
                .map(|&c| field(c))
                .filter(|v| !v.is_empty())
                .map(str::to_string)
                .collect();
            if values.is_empty() {
                return Err(Error::Row {
                    line,
                    message: format!("event lists no {view}"),
                });
            }
            lists[view.index()] = values;
        }
        let [tactics, targets, weapons] = lists;

        events.push(EventRecord {
            event_id: field(id_col).to_string(),
            year,
            group,
            tactics,
            targets,
            weapons,
            region: field(region_col).to_string(),
            doubt_flag,
        });
    }
    Ok(events)
}

pub fn parse_metadata(path: impl AsRef<Path>) -> Result<Vec<GroupMetadata>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_metadata(file)
}

pub fn read_metadata<R: std::io::Read>(reader: R) -> Result<Vec<GroupMetadata>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header_row = rdr.headers()?.clone();
    let headers: HashMap<&str, usize> = header_row
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();
    let group_col = column(&headers, "group")?;
    let ideology_col = column(&headers, "ideology")?;
    let region_col = column(&headers, "region")?;

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize| record.get(c).unwrap_or("").trim().to_string();
        let group = field(group_col);
        if !seen.insert(group.clone()) {
            return Err(Error::Row {
                line,
                message: format!("duplicate metadata for group `{group}`"),
            });
        }
        out.push(GroupMetadata {
            group,
            ideology: field(ideology_col),
            most_common_region: field(region_col),
        });
    }
    Ok(out)
}

/// Drops events outside the analysis window.
pub fn restrict_years(events: Vec<EventRecord>, years: YearRange) -> Vec<EventRecord> {
    events
        .into_iter()
        .filter(|e| years.contains(e.year))
        .collect()
}

/// Applies the sample rules in order: doubted events out, excluded actors
/// out, then groups with fewer than `min_attacks` remaining events out.
pub fn filter_sample(
    events: Vec<EventRecord>,
    min_attacks: usize,
    excluded_actors: &BTreeSet<String>,
) -> Vec<EventRecord> {
    let min_attacks = min_attacks.max(1);
    let kept: Vec<EventRecord> = events
        .into_iter()
        .filter(|e| !e.doubt_flag && !excluded_actors.contains(&e.group))
        .collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for e in &kept {
        *counts.entry(e.group.as_str()).or_default() += 1;
    }
    let eligible: BTreeSet<String> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_attacks)
        .map(|(g, _)| g.to_string())
        .collect();
    kept.into_iter()
        .filter(|e| eligible.contains(&e.group))
        .collect()
}

pub fn default_excluded_actors() -> BTreeSet<String> {
    DEFAULT_EXCLUDED_ACTORS
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Dense row-major matrix of non-negative counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<u32>,
}

impl CountMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0; n_rows * n_cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        Self {
            n_rows: rows.len(),
            n_cols,
            data: rows.concat(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.n_cols + c]
    }

    fn add(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.n_cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.n_rows).map(move |r| self.row(r))
    }

    pub fn total(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }
}

/// One year of the dataset: the active groups and their three view matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSlice {
    pub year: i32,
    /// Active groups, sorted by name. Row `i` of every matrix is `groups[i]`.
    pub groups: Vec<String>,
    pub matrices: [CountMatrix; 3],
}

impl YearSlice {
    pub fn matrix(&self, view: View) -> &CountMatrix {
        &self.matrices[view.index()]
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            year: self.year,
            groups: rows.iter().map(|&r| self.groups[r].clone()).collect(),
            matrices: [
                self.matrices[0].select_rows(rows),
                self.matrices[1].select_rows(rows),
                self.matrices[2].select_rows(rows),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewDataset {
    pub years: Vec<i32>,
    pub vocabularies: [Vec<String>; 3],
    pub slices: BTreeMap<i32, YearSlice>,
    pub metadata: BTreeMap<String, GroupMetadata>,
}

impl MultiViewDataset {
    pub fn vocabulary(&self, view: View) -> &[String] {
        &self.vocabularies[view.index()]
    }

    pub fn slice(&self, year: i32) -> Option<&YearSlice> {
        self.slices.get(&year)
    }

    pub fn metadata_for(&self, group: &str) -> GroupMetadata {
        self.metadata
            .get(group)
            .cloned()
            .unwrap_or_else(|| GroupMetadata::unknown(group))
    }

    /// Writes `{year}_{view}.csv` for every slice into `dir`.
    pub fn dump(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for slice in self.slices.values() {
            for view in View::ALL {
                let path = dir.join(format!("{}_{}.csv", slice.year, view));
                let mut w = csv::Writer::from_path(&path)?;
                let mut header = vec!["group".to_string()];
                header.extend(self.vocabulary(view).iter().cloned());
                w.write_record(&header)?;
                let m = slice.matrix(view);
                for (g, row) in slice.groups.iter().zip(m.rows()) {
                    let mut rec = vec![g.clone()];
                    rec.extend(row.iter().map(u32::to_string));
                    w.write_record(&rec)?;
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// Builds the yearly matrices. Events outside `years` are ignored.
pub fn build_dataset(
    events: &[EventRecord],
    metadata: &[GroupMetadata],
    years: YearRange,
) -> Result<MultiViewDataset> {
    if years.is_empty() {
        return Err(Error::Config(format!("empty year range {years}")));
    }

    let mut vocab_sets: [BTreeSet<String>; 3] = Default::default();
    for view in View::ALL {
        let set = &mut vocab_sets[view.index()];
        set.extend(view.universe().iter().map(|s| s.to_string()));
        for e in events.iter().filter(|e| years.contains(e.year)) {
            set.extend(e.categories(view).iter().cloned());
        }
    }
    let vocabularies: [Vec<String>; 3] = vocab_sets.map(|s| s.into_iter().collect());
    let col_index: [HashMap<&str, usize>; 3] = std::array::from_fn(|v| {
        vocabularies[v]
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect()
    });

    let mut by_year: BTreeMap<i32, BTreeMap<&str, Vec<&EventRecord>>> =
        years.years().map(|y| (y, BTreeMap::new())).collect();
    for e in events.iter().filter(|e| years.contains(e.year)) {
        by_year
            .get_mut(&e.year)
            .expect("year in range")
            .entry(e.group.as_str())
            .or_default()
            .push(e);
    }

    let mut slices = BTreeMap::new();
    for (&year, groups) in &by_year {
        let names: Vec<String> = groups.keys().map(|g| g.to_string()).collect();
        let mut matrices: [CountMatrix; 3] =
            std::array::from_fn(|v| CountMatrix::zeros(names.len(), vocabularies[v].len()));
        for (row, group_events) in groups.values().enumerate() {
            for e in group_events {
                for view in View::ALL {
                    for cat in e.categories(view) {
                        let col = col_index[view.index()][cat.as_str()];
                        matrices[view.index()].add(row, col, 1);
                    }
                }
            }
        }
        slices.insert(
            year,
            YearSlice {
                year,
                groups: names,
                matrices,
            },
        );
    }

    let active: BTreeSet<&str> = events
        .iter()
        .filter(|e| years.contains(e.year))
        .map(|e| e.group.as_str())
        .collect();
    let given: HashMap<&str, &GroupMetadata> =
        metadata.iter().map(|m| (m.group.as_str(), m)).collect();
    let metadata = active
        .iter()
        .map(|&g| {
            let m = given
                .get(g)
                .map(|m| (*m).clone())
                .unwrap_or_else(|| GroupMetadata::unknown(g));
            (g.to_string(), m)
        })
        .collect();

    Ok(MultiViewDataset {
        years: years.years().collect(),
        vocabularies,
        slices,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "event_id,year,group,tactic1,tactic2,tactic3,target1,target2,target3,weapon1,weapon2,weapon3,weapon4,region,doubt\n";

    fn ev(id: &str, year: i32, group: &str, tactics: &[&str], doubt: bool) -> EventRecord {
        EventRecord {
            event_id: id.into(),
            year,
            group: group.into(),
            tactics: tactics.iter().map(|s| s.to_string()).collect(),
            targets: vec!["Police".into()],
            weapons: vec!["Explosives".into()],
            region: "South Asia".into(),
            doubt_flag: doubt,
        }
    }

    #[test]
    fn single_valued_row() {
        let csv =
            format!("{HEADER}e1,2005,G1,Bombing/Explosion,,,Police,,,Explosives,,,,South Asia,0\n");
        let events = read_events(csv.as_bytes(), &EventSchema::default()).unwrap();
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.year, 2005);
        assert_eq!(e.tactics, vec!["Bombing/Explosion"]);
        assert_eq!(e.targets, vec!["Police"]);
        assert_eq!(e.weapons, vec!["Explosives"]);
        assert!(!e.doubt_flag);
    }

    #[test]
    fn blank_cells_are_dropped() {
        let csv = format!(
            "{HEADER}e1,2005,G1,Armed Assault,Assassination,,Police,,,Firearms,,,,South Asia,1\n"
        );
        let events = read_events(csv.as_bytes(), &EventSchema::default()).unwrap();
        assert_eq!(events[0].tactics.len(), 2);
        assert!(events[0].doubt_flag);
    }

    #[test]
    fn quoted_fields_and_unknown_categories() {
        let csv = format!(
            "{HEADER}e1,2005,\"Group, The\",Space Laser,,,\"Private Citizens & Property\",,,Firearms,,,,\"Asia, South\",0\n"
        );
        let events = read_events(csv.as_bytes(), &EventSchema::default()).unwrap();
        assert_eq!(events[0].group, "Group, The");
        assert_eq!(events[0].tactics, vec!["Space Laser"]);
        assert_eq!(events[0].region, "Asia, South");
        let ds = build_dataset(&events, &[], YearRange::new(2005, 2005)).unwrap();
        assert!(ds
            .vocabulary(View::Tactic)
            .iter()
            .any(|t| t == "Space Laser"));
        assert_eq!(ds.vocabulary(View::Tactic).len(), 10);
    }

    #[test]
    fn missing_group_column_names_it() {
        let csv = "event_id,year,tactic1,target1,weapon1,region,doubt\n";
        match read_events(csv.as_bytes(), &EventSchema::default()) {
            Err(Error::Schema(col)) => assert_eq!(col, "group"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn bad_year_reports_line() {
        let csv = format!(
            "{HEADER}e1,2005,G1,Armed Assault,,,Police,,,Firearms,,,,X,0\ne2,20o5,G1,Armed Assault,,,Police,,,Firearms,,,,X,0\n"
        );
        match read_events(csv.as_bytes(), &EventSchema::default()) {
            Err(Error::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn threshold_boundary() {
        let mut events: Vec<_> = (0..49)
            .map(|i| ev(&format!("a{i}"), 2000, "A", &["Armed Assault"], false))
            .collect();
        events.extend((0..50).map(|i| ev(&format!("b{i}"), 2000, "B", &["Armed Assault"], false)));
        let out = filter_sample(events, 50, &default_excluded_actors());
        assert!(out.iter().all(|e| e.group == "B"));
        assert_eq!(out.len(), 50);
    }

    #[test]
    fn doubt_removed_before_counting() {
        let mut events: Vec<_> = (0..50)
            .map(|i| ev(&format!("a{i}"), 2000, "A", &["Armed Assault"], false))
            .collect();
        events[17].doubt_flag = true;
        let out = filter_sample(events, 50, &default_excluded_actors());
        assert!(out.is_empty());
    }

    #[test]
    fn generic_actor_excluded() {
        let events: Vec<_> = (0..500)
            .map(|i| ev(&format!("u{i}"), 2000, "Unknown", &["Armed Assault"], false))
            .collect();
        assert!(filter_sample(events, 50, &default_excluded_actors()).is_empty());
    }

    #[test]
    fn two_tactics_increment_two_cells() {
        let events = vec![ev(
            "1",
            2000,
            "G",
            &["Armed Assault", "Assassination"],
            false,
        )];
        let ds = build_dataset(&events, &[], YearRange::new(2000, 2000)).unwrap();
        let slice = ds.slice(2000).unwrap();
        let vocab = ds.vocabulary(View::Tactic);
        let m = slice.matrix(View::Tactic);
        let col = |c: &str| vocab.iter().position(|v| v == c).unwrap();
        assert_eq!(m.get(0, col("Armed Assault")), 1);
        assert_eq!(m.get(0, col("Assassination")), 1);
        assert_eq!(m.row(0).iter().sum::<u32>(), 2);
    }

    #[test]
    fn repeated_events_accumulate() {
        let events: Vec<_> = (0..3)
            .map(|i| ev(&i.to_string(), 2000, "G", &["Hijacking"], false))
            .collect();
        let ds = build_dataset(&events, &[], YearRange::new(2000, 2000)).unwrap();
        let vocab = ds.vocabulary(View::Tactic);
        let col = vocab.iter().position(|v| v == "Hijacking").unwrap();
        assert_eq!(ds.slice(2000).unwrap().matrix(View::Tactic).get(0, col), 3);
    }

    #[test]
    fn hand_tabulated_contingency() {
        // Two groups over two years; rows sorted by group name.
        let t = |id: &str, y, g: &str, tac: &[&str], tgt: &[&str], wpn: &[&str]| EventRecord {
            event_id: id.into(),
            year: y,
            group: g.into(),
            tactics: tac.iter().map(|s| s.to_string()).collect(),
            targets: tgt.iter().map(|s| s.to_string()).collect(),
            weapons: wpn.iter().map(|s| s.to_string()).collect(),
            region: "R".into(),
            doubt_flag: false,
        };
        let aa = "Armed Assault";
        let bo = "Bombing/Explosion";
        let po = "Police";
        let mi = "Military";
        let fi = "Firearms";
        let ex = "Explosives";
        let events = vec![
            t("1", 2001, "A", &[aa], &[po], &[fi]),
            t("2", 2001, "A", &[aa, bo], &[po], &[fi, ex]),
            t("3", 2001, "A", &[bo], &[mi], &[ex]),
            t("4", 2001, "B", &[bo], &[mi], &[ex]),
            t("5", 2001, "B", &[bo], &[mi, po], &[ex]),
            t("6", 2001, "B", &[aa], &[mi], &[fi]),
            t("7", 2002, "A", &[aa], &[po], &[fi]),
            t("8", 2002, "A", &[aa], &[po], &[fi]),
            t("9", 2002, "B", &[bo], &[mi], &[ex]),
            t("10", 2002, "B", &[bo], &[mi], &[ex]),
            t("11", 2002, "B", &[bo], &[mi], &[ex, fi]),
            t("12", 2002, "B", &[aa, bo], &[po], &[fi]),
        ];
        let ds = build_dataset(&events, &[], YearRange::new(2001, 2002)).unwrap();
        let cell = |year, view: View, row, cat: &str| {
            let col = ds.vocabulary(view).iter().position(|v| v == cat).unwrap();
            ds.slice(year).unwrap().matrix(view).get(row, col)
        };
        // (year, view, group row, category) -> hand count
        let expected = [
            (2001, View::Tactic, 0, aa, 2),
            (2001, View::Tactic, 0, bo, 2),
            (2001, View::Tactic, 1, aa, 1),
            (2001, View::Tactic, 1, bo, 2),
            (2001, View::Target, 0, po, 2),
            (2001, View::Target, 0, mi, 1),
            (2001, View::Target, 1, po, 1),
            (2001, View::Target, 1, mi, 3),
            (2001, View::Weapon, 0, fi, 2),
            (2001, View::Weapon, 0, ex, 2),
            (2001, View::Weapon, 1, fi, 1),
            (2001, View::Weapon, 1, ex, 2),
            (2002, View::Tactic, 0, aa, 2),
            (2002, View::Tactic, 0, bo, 0),
            (2002, View::Tactic, 1, aa, 1),
            (2002, View::Tactic, 1, bo, 4),
            (2002, View::Target, 0, po, 2),
            (2002, View::Target, 1, po, 1),
            (2002, View::Target, 1, mi, 3),
            (2002, View::Weapon, 0, fi, 2),
            (2002, View::Weapon, 1, fi, 2),
            (2002, View::Weapon, 1, ex, 3),
        ];
        for (year, view, row, cat, n) in expected {
            assert_eq!(
                cell(year, view, row, cat),
                n,
                "{year} {view} row {row} {cat}"
            );
        }
        for year in [2001, 2002] {
            let slice = ds.slice(year).unwrap();
            let total: u64 = slice.matrices.iter().map(CountMatrix::total).sum();
            let expected: usize = events
                .iter()
                .filter(|e| e.year == year)
                .map(EventRecord::mentions)
                .sum();
            assert_eq!(total, expected as u64);
        }
    }

    #[test]
    fn empty_year_range_is_config_error() {
        assert!(matches!(
            build_dataset(&[], &[], YearRange::new(2005, 2004)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn missing_metadata_gets_sentinel() {
        let events = vec![ev("1", 2000, "G", &["Hijacking"], false)];
        let meta = vec![GroupMetadata {
            group: "H".into(),
            ideology: "Far left".into(),
            most_common_region: "Europe".into(),
        }];
        let ds = build_dataset(&events, &meta, YearRange::new(2000, 2000)).unwrap();
        assert_eq!(ds.metadata_for("G").ideology, UNKNOWN_CATEGORY);
        assert!(!ds.metadata.contains_key("H"));
    }

    #[test]
    fn year_range_parse() {
        assert_eq!(
            "2001..2003".parse::<YearRange>().unwrap(),
            YearRange::new(2001, 2003)
        );
        assert_eq!(
            "2001..=2003".parse::<YearRange>().unwrap(),
            YearRange::new(2001, 2003)
        );
        assert!("2001-2003".parse::<YearRange>().is_err());
        let y = YearRange::new(1997, 2018);
        assert_eq!(serde_json::to_string(&y).unwrap(), "\"1997..2018\"");
        assert_eq!(
            serde_json::from_str::<YearRange>("\"1997..2018\"").unwrap(),
            y
        );
        assert!(serde_json::from_str::<YearRange>("\"1997\"").is_err());
    }

    fn arb_event() -> impl Strategy<Value = EventRecord> {
        let cat = |view: View| {
            proptest::sample::select(view.universe().to_vec()).prop_map(str::to_string)
        };
        (
            2000i32..2003,
            proptest::sample::select(vec!["A", "B", "C", "D"]),
            proptest::collection::vec(cat(View::Tactic), 1..=3),
            proptest::collection::vec(cat(View::Target), 1..=3),
            proptest::collection::vec(cat(View::Weapon), 1..=4),
            proptest::bool::weighted(0.1),
        )
            .prop_map(|(year, g, tactics, targets, weapons, doubt)| EventRecord {
                event_id: String::new(),
                year,
                group: g.to_string(),
                tactics,
                targets,
                weapons,
                region: "R".into(),
                doubt_flag: doubt,
            })
    }

    proptest! {
        #[test]
        fn mass_is_conserved_and_order_irrelevant(
            events in proptest::collection::vec(arb_event(), 1..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let range = YearRange::new(2000, 2002);
            let ds = build_dataset(&events, &[], range).unwrap();
            for (&year, slice) in &ds.slices {
                let total: u64 = slice.matrices.iter().map(CountMatrix::total).sum();
                let expected: usize = events.iter().filter(|e| e.year == year).map(EventRecord::mentions).sum();
                prop_assert_eq!(total, expected as u64);
                for r in 0..slice.n_groups() {
                    prop_assert!(slice.matrices.iter().any(|m| m.row(r).iter().any(|&v| v > 0)));
                }
            }
            let mut shuffled = events.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(build_dataset(&shuffled, &[], range).unwrap(), ds);
        }

        #[test]
        fn filter_is_idempotent(
            events in proptest::collection::vec(arb_event(), 0..80),
            min in 1usize..20,
        ) {
            let excluded = default_excluded_actors();
            let once = filter_sample(events, min, &excluded);
            let twice = filter_sample(once.clone(), min, &excluded);
            prop_assert_eq!(once, twice);
        }
    }
}
